"""Desk-scale experiments: success rates, distribution checks, initialization comparisons and tables.

Every experiment is described by an :class:`ExperimentConfig` and returns
an :class:`ExperimentResult` holding one or more plot-ready tables.
:func:`run_experiment` writes them next to a manifest that is enough to
reproduce the run.
"""
from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Mapping, Sequence

import numpy as np

from . import __version__
from .bdp import bdp_exact, suggested_width
from .datadep import default_params
from .dist import classify_case, compose_dist, mc_active_dist, p2_matrix, pi1
from .errors import ConfigError, UnsupportedCaseError
from .netcore import (
    Architecture,
    InitScheme,
    NetworkParams,
    OptimizerConfig,
    forward,
    init_network,
    stack_params,
    train_replicates,
)
from .netcore.schemes import draw_layer
from .netcore.training import _rmse
from .output import config_hash, to_json, write_csv, write_json
from .rng import substream
from .trainability import (
    Requirement,
    Variant,
    deep3_trainability,
    mc_trainability,
    shallow_trainability,
    zero_bias_upper_1d,
)

SUCCESS_THRESHOLD = 1e-2

# ---------------------------------------------------------------------------
# targets


@dataclass(frozen=True)
class Target:
    name: str
    dim: int
    fn: Callable[[np.ndarray], np.ndarray]

    def __call__(self, x) -> np.ndarray:
        """Values at inputs ``(..., dim)``, returned with a trailing axis of length 1."""
        x = np.asarray(x, dtype=float)
        return self.fn(x)[..., None]


_F2_COEF = math.sqrt(3) / (math.sqrt(3) - 1)


def _relu(z):
    return np.maximum(z, 0.0)


TARGETS: dict[str, Target] = {
    "f1": Target("f1", 1, lambda x: np.abs(x[..., 0])),
    "f2": Target(
        "f2", 1, lambda x: np.abs(x[..., 0]) - _F2_COEF * (_relu(x[..., 0] - 1) + _relu(-x[..., 0] - 1))
    ),
    "f3": Target(
        "f3",
        2,
        lambda x: np.sin(np.pi * x[..., 0]) * np.cos(np.pi * x[..., 1]) * np.exp(-x[..., 0] ** 2 - x[..., 1] ** 2),
    ),
    "f4": Target("f4", 2, lambda x: np.sin(np.pi * (x[..., 0] - x[..., 1])) * np.exp(x[..., 0] + x[..., 1])),
    "sine-sum": Target("sine-sum", 1, lambda x: np.sin(4 * np.pi * x[..., 0]) + np.sin(6 * np.pi * x[..., 0])),
}

# width of the smallest shallow network that represents the target exactly
MIN_WIDTH = {"f1": 2, "f2": 4}

EXPERIMENTS = {
    "success-rate": "empirical training success rate against analytic trainability over widths",
    "dist-check": "analytic active-neuron distributions against Monte Carlo",
    "init-compare": "training RMSE and dead neurons for three initialization methods",
    "sine-demo": "init-compare on the sine sum, plus the trained networks on a fine grid",
    "trainability-table": "table of analytic trainability values with optional Monte Carlo checks",
}

_TARGETS_FOR = {
    "success-rate": ("f1", "f2"),
    "init-compare": ("f3", "f4", "sine-sum"),
    "sine-demo": ("sine-sum",),
}

_DEFAULTS: dict[str, dict[str, Any]] = {
    "success-rate": dict(
        target="f1", widths=(2, 4, 8, 16), replicates=200, epochs=20000, train_points=600, radius=math.sqrt(3),
        optimizer={"method": "sgd", "lr": 1e-3, "batch_size": 128},
    ),
    "dist-check": dict(arch=(1, 6, 4), schemes=("sphere-bias", "sphere-bias"), radius=1.0, samples=100000),
    "init-compare": dict(
        target="f3", widths=(100,), replicates=10, epochs=20000, train_points=25,
        optimizer={"method": "momentum", "lr": 5e-3, "momentum": 0.9},
    ),
    "sine-demo": dict(
        target="sine-sum", widths=(500,), replicates=1, epochs=15000, train_points=100,
        optimizer={"method": "adam", "lr": 1e-3},
    ),
    "trainability-table": dict(samples=0, radius=1.0),
}

_INIT_COMPARE_SINE = dict(widths=(500,), train_points=100, optimizer={"method": "adam", "lr": 1e-3})

_OPTIMIZER_KEYS = {"method", "lr", "momentum", "batch_size", "beta1", "beta2", "eps"}

METHODS = ("he-no-bias", "he-bias", "data-dependent")


@dataclass(frozen=True)
class ExperimentConfig:
    """Settings for one experiment; unset fields take per-experiment defaults.

    ``optimizer`` overrides fields of :class:`OptimizerConfig` (except
    ``epochs`` and ``seed``, which come from this config).
    """

    experiment: str
    target: str | None = None
    widths: tuple[int, ...] | None = None
    replicates: int | None = None
    seed: int = 0
    epochs: int | None = None
    train_points: int | None = None
    test_points: int = 1000
    radius: float | None = None
    optimizer: Mapping[str, Any] = field(default_factory=dict)
    samples: int | None = None
    arch: tuple[int, ...] | None = None
    schemes: tuple[str, ...] | None = None
    record_every: int = 100
    out: str | None = None

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}; choose from {sorted(EXPERIMENTS)}")
        defaults = dict(_DEFAULTS[self.experiment])
        if self.experiment == "init-compare" and self.target == "sine-sum":
            defaults.update(_INIT_COMPARE_SINE)
        for name, value in defaults.items():
            if getattr(self, name) in (None, {}):
                object.__setattr__(self, name, value)
        object.__setattr__(self, "optimizer", dict(self.optimizer))
        for name in ("widths", "arch"):
            value = getattr(self, name)
            if value is not None:
                object.__setattr__(self, name, tuple(int(v) for v in value))
        if self.schemes is not None:
            object.__setattr__(self, "schemes", tuple(str(s) for s in self.schemes))
        if self.replicates is None:
            object.__setattr__(self, "replicates", 1)
        self._validate()

    def _validate(self):
        if self.target is not None and self.target not in TARGETS:
            raise ConfigError(f"unknown target {self.target!r}; choose from {sorted(TARGETS)}")
        allowed = _TARGETS_FOR.get(self.experiment)
        if allowed is not None and self.target not in allowed:
            raise ConfigError(f"experiment {self.experiment} needs a target in {allowed}, got {self.target!r}")
        if self.replicates < 1:
            raise ConfigError(f"replicates must be >= 1, got {self.replicates}")
        if self.seed < 0:
            raise ConfigError(f"seed must be >= 0, got {self.seed}")
        if self.widths is not None and (not self.widths or min(self.widths) < 1):
            raise ConfigError(f"widths must be a non-empty list of positive integers, got {self.widths}")
        if self.epochs is not None and self.epochs < 0:
            raise ConfigError(f"epochs must be >= 0, got {self.epochs}")
        if self.train_points is not None and self.train_points < 2:
            raise ConfigError(f"train_points must be >= 2, got {self.train_points}")
        if self.test_points < 1 or self.record_every < 1:
            raise ConfigError("test_points and record_every must be >= 1")
        if self.radius is not None and not (self.radius > 0 and math.isfinite(self.radius)):
            raise ConfigError(f"radius must be positive and finite, got {self.radius}")
        if self.samples is not None and self.samples < 0:
            raise ConfigError(f"samples must be >= 0, got {self.samples}")
        unknown = set(self.optimizer) - _OPTIMIZER_KEYS
        if unknown:
            raise ConfigError(f"unknown optimizer keys {sorted(unknown)}")
        try:
            self.optimizer_config()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if self.experiment == "dist-check":
            if len(self.arch) != 3 or self.arch[0] != 1:
                raise ConfigError(f"dist-check needs an architecture (1, n1, n2), got {self.arch}")
            if len(self.schemes) != 2:
                raise ConfigError(f"dist-check needs two schemes, got {self.schemes}")
            if self.samples < 1:
                raise ConfigError("dist-check needs samples >= 1")
        if self.schemes is not None:
            for tag in self.schemes:
                try:
                    InitScheme.parse(tag)
                except ValueError as exc:
                    raise ConfigError(f"bad scheme {tag!r}: {exc}") from exc

    def optimizer_config(self) -> OptimizerConfig:
        return OptimizerConfig(epochs=self.epochs or 0, seed=self.seed, **self.optimizer)

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any]) -> "ExperimentConfig":
        """Build from lower_snake_case keys; a manifest's ``config`` entry is accepted too."""
        if "config" in doc and "experiment" not in doc:
            doc = doc["config"]
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(doc) - names
        if unknown:
            raise ConfigError(f"unknown config keys {sorted(unknown)}")
        if "experiment" not in doc:
            raise ConfigError("config needs an 'experiment' key")
        try:
            return cls(**doc)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def load(cls, path: str | Path) -> "ExperimentConfig":
        try:
            doc = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(doc, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(doc)

    def to_dict(self) -> dict[str, Any]:
        doc = dataclasses.asdict(self)
        for name in ("widths", "arch", "schemes"):
            if doc[name] is not None:
                doc[name] = list(doc[name])
        return doc

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)


@dataclass
class Table:
    header: tuple[str, ...]
    rows: list[tuple]

    def column(self, name: str) -> list:
        k = self.header.index(name)
        return [row[k] for row in self.rows]


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    tables: dict[str, Table]
    extra: dict[str, Any] = field(default_factory=dict)


# ---------------------------------------------------------------------------
# success rate


def _uniform_inputs(gen, shape, radius):
    return gen.uniform(-radius, radius, shape)


def run_success_rate(cfg: ExperimentConfig) -> ExperimentResult:
    """Train ``replicates`` He-with-bias shallow networks per width; success is test RMSE < 1e-2."""
    target = TARGETS[cfg.target]
    radius = cfg.radius
    m = MIN_WIDTH[cfg.target]
    opt = cfg.optimizer_config()
    scheme = InitScheme.he(True)
    rows = []
    per_rep = []
    for n in cfg.widths:
        gens = [substream(cfg.seed, 1, n, i) for i in range(cfg.replicates)]
        x = np.stack([_uniform_inputs(g, (cfg.train_points, 1), radius) for g in gens])
        xt = np.stack([_uniform_inputs(g, (cfg.test_points, 1), radius) for g in gens])
        w1, b1 = zip(*(draw_layer(scheme, 1, n, g) for g in gens))
        w2, b2 = zip(*(draw_layer(scheme, n, 1, g) for g in gens))
        seeds = [int(g.integers(2**63)) for g in gens]
        ws, bs, hist = train_replicates(
            [np.stack(w1), np.stack(w2)],
            [np.stack(b1), np.stack(b2)],
            x,
            target(x),
            opt,
            seeds=seeds,
            record_every=cfg.record_every,
        )
        test = _rmse(ws, bs, xt, target(xt))
        success = test < SUCCESS_THRESHOLD
        p = float(np.mean(success))
        stderr = math.sqrt(p * (1 - p) / cfg.replicates)
        analytic = shallow_trainability(n, m, 1, radius, scheme).value if n >= m else 0.0
        rows.append((n, p, stderr, analytic, float(np.median(test)), cfg.replicates))
        per_rep.extend((n, i, float(hist.rmse[i, -1]), float(test[i]), bool(success[i])) for i in range(cfg.replicates))
    return ExperimentResult(
        cfg,
        {
            "success_rate": Table(
                ("width", "success_rate", "stderr", "trainability", "median_test_rmse", "replicates"), rows
            ),
            "success_replicates": Table(("width", "replicate", "train_rmse", "test_rmse", "success"), per_rep),
        },
    )


# ---------------------------------------------------------------------------
# distribution check


def run_dist_check(cfg: ExperimentConfig) -> ExperimentResult:
    """Analytic and Monte Carlo active-neuron distributions for a (1, n1, n2) prefix."""
    _, n1, n2 = cfg.arch
    s1, s2 = (InitScheme.parse(t) for t in cfg.schemes)
    r = cfg.radius
    first = pi1(n1, 1, r, s1)
    try:
        classify_case(s1, s2)
        second = compose_dist(first, [p2_matrix(n1, n2, r, s1, s2)])
    except UnsupportedCaseError:
        second = None
    mc_arch = Architecture(tuple(cfg.arch) + (1,))
    emp = mc_active_dist(mc_arch, [s1, s2, s2], r, cfg.samples, cfg.seed)
    rows = []
    for layer, analytic, e in ((1, first, emp[0]), (2, second, emp[1])):
        for k in range(e.probs.size):
            value = None if analytic is None else float(analytic.probs[k])
            rows.append((layer, k, value, float(e.probs[k]), float(e.stderr[k])))
    tv = [float(first.tv(emp[0].probs)), None if second is None else float(second.tv(emp[1].probs))]
    return ExperimentResult(
        cfg, {"dist_check": Table(("layer", "count", "analytic", "empirical", "stderr"), rows)}, {"tv": tv}
    )


# ---------------------------------------------------------------------------
# initialization comparison


def _training_set(cfg: ExperimentConfig, target: Target, replicate: int) -> np.ndarray:
    if cfg.target == "sine-sum":
        return np.linspace(-1.0, 1.0, cfg.train_points)[:, None]
    gen = substream(cfg.seed, 2, replicate)
    return gen.uniform(-1.0, 1.0, (cfg.train_points, target.dim))


def _init_method(method: str, arch: Architecture, x: np.ndarray, gen: np.random.Generator):
    if method == "data-dependent":
        dd = default_params(x, arch.widths[1] / x.shape[0])
        scheme = InitScheme.data_dependent(dd.sigma_in, dd.sigma_e, dd.sigma_out)
        return init_network(arch, [scheme, scheme], gen, inputs=x)
    return init_network(arch, InitScheme.parse(method), gen)


def run_init_compare(cfg: ExperimentConfig) -> ExperimentResult:
    """Train every method on the same data per replicate and record RMSE and dead neurons."""
    target = TARGETS[cfg.target]
    n = cfg.widths[0]
    arch = Architecture((target.dim, n, 1))
    opt = cfg.optimizer_config()
    if "batch_size" not in cfg.optimizer:
        opt = dataclasses.replace(opt, batch_size=cfg.train_points)
    xs = np.stack([_training_set(cfg, target, i) for i in range(cfg.replicates)])
    ys = target(xs)
    # radius of the smallest centred ball holding the input domain
    radius = math.sqrt(target.dim)
    curve_rows, rep_rows = [], []
    trained = {}
    for k, method in enumerate(METHODS):
        nets = [_init_method(method, arch, xs[i], substream(cfg.seed, 3, k, i)) for i in range(cfg.replicates)]
        ws, bs = stack_params(nets)
        ws, bs, hist = train_replicates(
            ws,
            bs,
            xs,
            ys,
            opt,
            seeds=[cfg.seed + i for i in range(cfg.replicates)],
            dead_radius=radius,
            record_every=cfg.record_every,
        )
        epochs = sorted(set(range(0, opt.epochs + 1, cfg.record_every)) | {opt.epochs})
        for e in epochs:
            col = hist.rmse[:, e]
            dead = hist.dead_layer1[:, e]
            curve_rows.append((e, method, float(col.mean()), float(col.std()), float(dead.mean())))
        for i in range(cfg.replicates):
            rep_rows.append(
                (
                    method,
                    i,
                    float(hist.rmse[i, 0]),
                    float(hist.rmse[i, -1]),
                    int(hist.dead_layer1[i, 0]),
                    int(hist.dead_layer1[i, -1]),
                )
            )
        trained[method] = (ws, bs)
    summary = {
        "expected_dead_fraction_he_bias": bdp_exact(target.dim, radius),
        "dead_radius": radius,
    }
    tables = {
        "init_compare": Table(("epoch", "method", "mean_rmse", "std_rmse", "mean_dead"), curve_rows),
        "init_compare_replicates": Table(
            ("method", "replicate", "initial_rmse", "final_rmse", "initial_dead", "final_dead"), rep_rows
        ),
    }
    return ExperimentResult(cfg, tables, {"summary": summary, "trained": trained})


def run_sine_demo(cfg: ExperimentConfig) -> ExperimentResult:
    """init-compare on the sine sum, plus each method's first trained network on a fine grid."""
    result = run_init_compare(cfg)
    grid = np.linspace(-1.0, 1.0, 1001)[:, None]
    truth = TARGETS["sine-sum"](grid)[:, 0]
    outputs = []
    for method in METHODS:
        ws, bs = result.extra["trained"][method]
        net = NetworkParams(tuple(w[0] for w in ws), tuple(b[0] for b in bs))
        outputs.append(forward(net, grid)[:, 0])
    rows = [(float(grid[j, 0]), float(truth[j])) + tuple(float(o[j]) for o in outputs) for j in range(grid.shape[0])]
    result.tables["sine_curve"] = Table(("x", "target") + tuple(m.replace("-", "_") for m in METHODS), rows)
    return result


# ---------------------------------------------------------------------------
# trainability table

_CASE_SCHEMES = {
    "1.1": ("sphere-no-bias", "normal-no-bias"),
    "1.2": ("sphere-no-bias", "sphere-bias"),
    "2.1": ("sphere-bias", "normal-no-bias"),
    "2.2": ("sphere-bias", "sphere-bias"),
}

_SHALLOW_GRID = ((2, 2, 1, 1.0), (6, 2, 1, 1.0), (10, 4, 1, 1.0), (10, 4, 2, 1 / math.sqrt(3)), (300, 200, 1, 1 / math.sqrt(3)))
# cases with a biased first layer are closed-form only for n1 = m1 = 1
_DEEP_GRID = {
    "1.1": ((1, 1, 1, 1), (2, 2, 2, 1), (2, 2, 2, 2), (3, 4, 3, 2)),
    "1.2": ((1, 3, 1, 1), (3, 4, 3, 1), (3, 4, 3, 2)),
    "2.1": ((1, 1, 1, 1), (1, 3, 1, 1), (1, 3, 1, 2)),
    "2.2": ((1, 3, 1, 1), (1, 3, 1, 2), (1, 6, 1, 3)),
}
_ZERO_BIAS_GRID = ((2, 1), (2, 2), (2, 3), (2, 4), (4, 2), (4, 3))

TABLE_HEADER = ("config_hash", "quantity", "n", "m", "d", "r", "schemes", "value", "stderr", "kind")


def _row(quantity, n, m, d, r, schemes, est, **extra):
    key = dict(quantity=quantity, n=n, m=m, d=d, r=r, schemes=schemes, **extra)
    return (config_hash(key), quantity, n, m, d, r, schemes, est.value, est.stderr, est.kind.value)


def run_trainability_table(cfg: ExperimentConfig) -> ExperimentResult:
    """Shallow, three-layer and zero-bias upper-bound values; MC checks when ``samples > 0``."""
    samples = cfg.samples
    rows = []
    bias = InitScheme.sphere(True)
    for n, m, d, r in _SHALLOW_GRID:
        rows.append(_row("shallow", str(n), str(m), d, r, bias.tag, shallow_trainability(n, m, d, r, bias)))
        if samples:
            est = mc_trainability((d, n, 1), bias, r, (m,), samples, cfg.seed)
            rows.append(_row("shallow-mc", str(n), str(m), d, r, bias.tag, est))
    rows.append(
        _row("shallow", "2", "2", 1, 1.0, "sphere-no-bias", shallow_trainability(2, 2, 1, 1.0, InitScheme.sphere(False)))
    )
    n_sugg = suggested_width(200, 1, 1 / math.sqrt(3))
    rows.append(
        _row("suggested-width", str(n_sugg), "200", 1, 1 / math.sqrt(3), bias.tag,
             shallow_trainability(n_sugg, 200, 1, 1 / math.sqrt(3), bias))
    )
    r = cfg.radius
    for case, tags in _CASE_SCHEMES.items():
        schemes = "/".join(tags)
        for n1, n2, m1, m2 in _DEEP_GRID[case]:
            ns, ms = f"{n1};{n2}", f"{m1};{m2}"
            for variant in Variant:
                est = deep3_trainability(case, n1, n2, m1, m2, r, variant=variant.value)
                rows.append(_row(f"deep3-{case}-{variant.value}", ns, ms, 1, r, schemes, est))
            if samples:
                est = mc_trainability(
                    (1, n1, n2, 1), [InitScheme.parse(t) for t in tags + tags[1:]], r, (m1, m2), samples, cfg.seed
                )
                rows.append(_row(f"deep3-{case}-mc", ns, ms, 1, r, schemes, est))
    for n, layers in _ZERO_BIAS_GRID:
        ns, ms = ";".join([str(n)] * layers), ";".join(["1"] * layers)
        rows.append(_row("zero-bias-upper", ns, ms, 1, r, "normal-no-bias", zero_bias_upper_1d(n, layers)))
        if samples:
            est = mc_trainability(
                (1,) + (n,) * layers + (1,),
                InitScheme.normal(),
                r,
                Requirement((1,) * layers, require_active=True),
                samples,
                cfg.seed,
            )
            rows.append(_row("zero-bias-mc", ns, ms, 1, r, "normal-no-bias", est))
    return ExperimentResult(cfg, {"trainability_table": Table(TABLE_HEADER, rows)})


# ---------------------------------------------------------------------------
# running and writing

RUNNERS: dict[str, Callable[[ExperimentConfig], ExperimentResult]] = {
    "success-rate": run_success_rate,
    "dist-check": run_dist_check,
    "init-compare": run_init_compare,
    "sine-demo": run_sine_demo,
    "trainability-table": run_trainability_table,
}


def run(cfg: ExperimentConfig) -> ExperimentResult:
    return RUNNERS[cfg.experiment](cfg)


def write_result(result: ExperimentResult, out_dir: str | Path, fmt: str = "csv") -> list[Path]:
    """Write every table as CSV (or JSON records) plus ``manifest.json``; returns the written paths."""
    out = Path(out_dir)
    paths = []
    for name, table in result.tables.items():
        if fmt == "csv":
            paths.append(write_csv(out / f"{name}.csv", table.header, table.rows))
        elif fmt == "json":
            records = [dict(zip(table.header, row)) for row in table.rows]
            paths.append(write_json(out / f"{name}.json", records))
        else:
            raise ConfigError(f"unknown format {fmt!r}")
    manifest = {
        "config": result.config.to_dict(),
        "seed": result.config.seed,
        "version": __version__,
        "outputs": [p.name for p in paths],
    }
    paths.append(write_json(out / "manifest.json", manifest))
    return paths


def run_experiment(cfg: ExperimentConfig, out_dir: str | Path | None = None, fmt: str = "csv") -> ExperimentResult:
    result = run(cfg)
    target = out_dir if out_dir is not None else cfg.out
    if target is not None:
        write_result(result, target, fmt)
    return result


def describe() -> str:
    return to_json(EXPERIMENTS)
