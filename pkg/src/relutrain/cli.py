"""Command-line interface: ``relutrain <command> ...``.

Exit codes: 0 on success, 2 for configuration errors, 3 for cases
without a closed form.
"""
from __future__ import annotations

import argparse
import csv
import io
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .bdp import bdp, mc_bdp
from .dist import classify_case, compose_dist, mc_active_dist, p2_matrix, pi1
from .errors import ConfigError, UnsupportedCaseError
from .experiments import EXPERIMENTS, ExperimentConfig, Table, run_experiment, write_result
from .interp import Dataset, build_interpolant, witness_data
from .netcore import Architecture, InitScheme, forward
from .output import fmt, to_json, write_csv, write_json
from .trainability import (
    Requirement,
    deep3_trainability,
    mc_trainability,
    shallow_trainability,
    zero_bias_upper_1d,
)

EXIT_OK, EXIT_CONFIG, EXIT_UNSUPPORTED = 0, 2, 3


def _emit(table: Table, name: str, args) -> None:
    """Print ``table`` to stdout, and also write it under ``--out`` when given."""
    if args.format == "json":
        text = to_json([dict(zip(table.header, row)) for row in table.rows]) + "\n"
    else:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(table.header)
        writer.writerows([fmt(v) for v in row] for row in table.rows)
        text = buf.getvalue()
    sys.stdout.write(text)
    if args.out:
        out = Path(args.out)
        if args.format == "json":
            write_json(out / f"{name}.json", [dict(zip(table.header, row)) for row in table.rows])
        else:
            write_csv(out / f"{name}.csv", table.header, table.rows)


def _ints(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(v) for v in text.replace(";", ",").split(",") if v.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc


def _schemes(text: str) -> list[InitScheme]:
    try:
        return [InitScheme.parse(t) for t in text.split("/")]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


# ---------------------------------------------------------------------------
# commands


def cmd_bdp(args) -> int:
    res = bdp(args.d, args.r)
    header = ["d", "r", "exact", "lower", "upper"]
    row = [args.d, args.r, res.exact, res.lower, res.upper]
    if args.samples:
        p, se = mc_bdp(args.d, args.r, args.samples, args.seed)
        header += ["mc", "stderr"]
        row += [p, se]
    _emit(Table(tuple(header), [tuple(row)]), "bdp", args)
    return EXIT_OK


def cmd_trainability(args) -> int:
    header = ("quantity", "value", "stderr", "kind")
    rows = []
    if args.kind == "shallow":
        scheme = InitScheme.parse(args.scheme)
        est = shallow_trainability(args.n[0], args.m[0], args.d, args.r, scheme)
        rows.append(("shallow", est.value, est.stderr, est.kind.value))
        if args.samples:
            mc = mc_trainability((args.d, args.n[0], 1), scheme, args.r, (args.m[0],), args.samples, args.seed)
            rows.append(("monte-carlo", mc.value, mc.stderr, mc.kind.value))
    elif args.kind == "deep3":
        if len(args.n) != 2 or len(args.m) != 2:
            raise ConfigError("deep3 needs --n n1,n2 and --m m1,m2")
        est = deep3_trainability(args.case, *args.n, *args.m, args.r, variant=args.variant)
        rows.append((f"deep3-{args.case}-{args.variant}", est.value, est.stderr, est.kind.value))
    else:
        if len(args.n) != 1:
            raise ConfigError("zero-bias-upper needs a single width --n")
        est = zero_bias_upper_1d(args.n[0], args.layers)
        rows.append(("zero-bias-upper", est.value, est.stderr, est.kind.value))
        if args.samples:
            arch = (1,) + (args.n[0],) * args.layers + (1,)
            req = Requirement((1,) * args.layers, require_active=True)
            mc = mc_trainability(arch, InitScheme.normal(), args.r, req, args.samples, args.seed)
            rows.append(("monte-carlo", mc.value, mc.stderr, mc.kind.value))
    _emit(Table(header, rows), "trainability", args)
    return EXIT_OK


def cmd_dist(args) -> int:
    arch = args.arch
    if len(arch) < 2:
        raise ConfigError("--arch needs at least an input width and one hidden width")
    schemes = args.schemes
    hidden = arch[1:]
    if len(schemes) == 1:
        schemes = schemes * len(hidden)
    if len(schemes) != len(hidden):
        raise ConfigError(f"{len(schemes)} schemes for {len(hidden)} hidden layers")
    analytic = [pi1(hidden[0], arch[0], args.r, schemes[0])]
    if len(hidden) >= 2:
        if arch[0] != 1 or len(hidden) > 2:
            raise UnsupportedCaseError("closed-form deeper layers need (1, n1, n2)")
        classify_case(schemes[0], schemes[1])
        analytic.append(compose_dist(analytic[0], [p2_matrix(hidden[0], hidden[1], args.r, schemes[0], schemes[1])]))
    emp = None
    if args.samples:
        emp = mc_active_dist(Architecture(tuple(arch) + (1,)), schemes + schemes[-1:], args.r, args.samples, args.seed)
    rows = []
    for t, dist in enumerate(analytic):
        for k in range(dist.probs.size):
            row = (t + 1, k, float(dist.probs[k]))
            if emp is not None:
                row += (float(emp[t].probs[k]), float(emp[t].stderr[k]))
            rows.append(row)
    header = ("layer", "count", "analytic") + (("empirical", "stderr") if emp is not None else ())
    _emit(Table(header, rows), "dist", args)
    return EXIT_OK


def cmd_interpolate(args) -> int:
    if args.data:
        path = Path(args.data)
        if path.suffix == ".json":
            data = Dataset.from_json(path.read_text())
        else:
            data = Dataset.read_csv(path)
    else:
        data = witness_data(args.witness, seed=args.seed, d=args.dim)
    net = build_interpolant(data, seed=args.seed)
    pred = forward(net, data.inputs).reshape(data.targets.shape)
    residual = float(np.max(np.abs(pred - data.targets)))
    table = Table(("points", "width", "dim", "max_residual"), [(data.size, net.weights[0].shape[0], data.dim, residual)])
    _emit(table, "interpolate", args)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        net.save(out / "network.json")
        data.write_csv(out / "data.csv")
    return EXIT_OK


def cmd_experiment(args) -> int:
    if args.action == "list":
        rows = [(name, text) for name, text in EXPERIMENTS.items()]
        _emit(Table(("experiment", "description"), rows), "experiments", argparse.Namespace(format=args.format, out=None))
        return EXIT_OK
    if args.config:
        cfg = ExperimentConfig.load(args.config)
        if args.id and args.id != cfg.experiment:
            raise ConfigError(f"config is for {cfg.experiment!r}, not {args.id!r}")
    elif args.id:
        cfg = ExperimentConfig(args.id)
    else:
        raise ConfigError("experiment run needs an id or --config")
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.replicates is not None:
        overrides["replicates"] = args.replicates
    if args.samples is not None:
        overrides["samples"] = args.samples
    if overrides:
        cfg = ExperimentConfig.from_dict({**cfg.to_dict(), **overrides})
    out = args.out or cfg.out
    result = run_experiment(cfg)
    if out:
        for path in write_result(result, out, args.format):
            print(path)
    else:
        for name, table in result.tables.items():
            _emit(table, name, argparse.Namespace(format=args.format, out=None))
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def _common(p: argparse.ArgumentParser, *, seed_default: int | None = 0) -> None:
    p.add_argument("--seed", type=int, default=seed_default, help="random seed")
    p.add_argument("--out", help="output directory")
    p.add_argument("--format", choices=("csv", "json"), default="csv")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="relutrain", description="Trainability of randomly initialized ReLU networks")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("bdp", help="born-dead probability of a first-layer neuron")
    p.add_argument("--d", type=int, required=True, help="input dimension")
    p.add_argument("--r", type=float, required=True, help="radius of the input ball")
    p.add_argument("--samples", type=int, default=0, help="Monte Carlo samples (0 skips)")
    _common(p)
    p.set_defaults(func=cmd_bdp)

    p = sub.add_parser("trainability", help="shallow, three-layer or zero-bias trainability")
    p.add_argument("kind", choices=("shallow", "deep3", "zero-bias-upper"))
    p.add_argument("--n", type=_ints, default=(2,), help="width(s), comma separated")
    p.add_argument("--m", type=_ints, default=(2,), help="required active count(s)")
    p.add_argument("--d", type=int, default=1)
    p.add_argument("--r", type=float, default=1.0)
    p.add_argument("--scheme", default="sphere-bias", help="first-layer scheme tag (shallow)")
    p.add_argument("--case", choices=("1.1", "1.2", "2.1", "2.2"), default="1.1")
    p.add_argument("--variant", choices=("printed", "corrected"), default="printed")
    p.add_argument("--layers", type=int, default=2, help="number of hidden layers (zero-bias-upper)")
    p.add_argument("--samples", type=int, default=0, help="Monte Carlo samples (0 skips)")
    _common(p)
    p.set_defaults(func=cmd_trainability)

    p = sub.add_parser("dist", help="active-neuron distributions per hidden layer")
    p.add_argument("--arch", type=_ints, default=(1, 6, 4), help="input and hidden widths, e.g. 1,6,4")
    p.add_argument("--schemes", type=_schemes, default=_schemes("sphere-bias"), help="scheme tags joined by '/'")
    p.add_argument("--r", type=float, default=1.0)
    p.add_argument("--samples", type=int, default=0, help="Monte Carlo samples (0 skips)")
    _common(p)
    p.set_defaults(func=cmd_dist)

    p = sub.add_parser("interpolate", help="exact shallow interpolant of a dataset")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--data", help="CSV (x0.., y) or JSON dataset")
    src.add_argument("--witness", type=int, help="use the m+1 point witness dataset for width m")
    p.add_argument("--dim", type=int, default=1, help="input dimension of the witness dataset")
    _common(p)
    p.set_defaults(func=cmd_interpolate)

    p = sub.add_parser("experiment", help="run or list desk-scale experiments")
    p.add_argument("action", choices=("run", "list"))
    p.add_argument("id", nargs="?", help="experiment id")
    p.add_argument("--config", help="JSON config or manifest")
    p.add_argument("--replicates", type=int)
    p.add_argument("--samples", type=int)
    _common(p, seed_default=None)
    p.set_defaults(func=cmd_experiment)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UnsupportedCaseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_UNSUPPORTED
    except ValueError as exc:
        # ConfigError and invalid numeric arguments alike
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
