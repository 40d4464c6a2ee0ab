"""Weight/bias initialization schemes."""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from .network import Architecture, NetworkParams


class SchemeKind(str, Enum):
    NORMAL_NO_BIAS = "normal-no-bias"
    NORMAL_WITH_BIAS = "normal-bias"
    HE_NO_BIAS = "he-no-bias"
    HE_WITH_BIAS = "he-bias"
    SPHERE_NO_BIAS = "sphere-no-bias"
    SPHERE_WITH_BIAS = "sphere-bias"
    DATA_DEPENDENT = "data-dependent"


@dataclass(frozen=True)
class InitScheme:
    """How one layer's rows ``(w_j, b_j)`` are drawn.

    Use the constructors (:meth:`normal`, :meth:`he`, :meth:`sphere`,
    :meth:`data_dependent`) or :meth:`parse` rather than building directly.
    """

    kind: SchemeKind
    sigma: float | None = None
    sigma_b: float | None = None
    sigma_in: float | None = None
    sigma_e: float | None = None
    sigma_out: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", SchemeKind(self.kind))
        for name in ("sigma", "sigma_b", "sigma_in", "sigma_out"):
            v = getattr(self, name)
            if v is not None and not (v > 0 and math.isfinite(v)):
                raise ValueError(f"{name} must be positive and finite, got {v}")
        if self.sigma_e is not None and not (self.sigma_e >= 0 and math.isfinite(self.sigma_e)):
            raise ValueError(f"sigma_e must be nonnegative, got {self.sigma_e}")
        if self.kind in (SchemeKind.NORMAL_NO_BIAS, SchemeKind.NORMAL_WITH_BIAS) and self.sigma is None:
            object.__setattr__(self, "sigma", 1.0)
        if self.kind is SchemeKind.NORMAL_WITH_BIAS and self.sigma_b is None:
            object.__setattr__(self, "sigma_b", self.sigma)
        if self.kind is SchemeKind.DATA_DEPENDENT and (self.sigma_in is None or self.sigma_e is None or self.sigma_out is None):
            raise ValueError("data-dependent scheme needs sigma_in, sigma_e and sigma_out")

    @classmethod
    def normal(cls, sigma: float = 1.0, sigma_b: float | None = None, *, bias: bool = False) -> "InitScheme":
        if sigma_b is not None or bias:
            return cls(SchemeKind.NORMAL_WITH_BIAS, sigma=sigma, sigma_b=sigma if sigma_b is None else sigma_b)
        return cls(SchemeKind.NORMAL_NO_BIAS, sigma=sigma)

    @classmethod
    def he(cls, bias: bool) -> "InitScheme":
        return cls(SchemeKind.HE_WITH_BIAS if bias else SchemeKind.HE_NO_BIAS)

    @classmethod
    def sphere(cls, bias: bool) -> "InitScheme":
        return cls(SchemeKind.SPHERE_WITH_BIAS if bias else SchemeKind.SPHERE_NO_BIAS)

    @classmethod
    def data_dependent(cls, sigma_in: float, sigma_e: float, sigma_out: float) -> "InitScheme":
        return cls(SchemeKind.DATA_DEPENDENT, sigma_in=sigma_in, sigma_e=sigma_e, sigma_out=sigma_out)

    @classmethod
    def parse(cls, text: str) -> "InitScheme":
        """Parse a tag such as ``he-bias``, ``sphere-no-bias`` or ``normal-bias:0.5``."""
        tag, _, arg = text.strip().partition(":")
        kind = SchemeKind(tag)
        if kind is SchemeKind.DATA_DEPENDENT:
            raise ValueError("data-dependent scheme is built from data, not parsed")
        if kind in (SchemeKind.NORMAL_NO_BIAS, SchemeKind.NORMAL_WITH_BIAS):
            vals = [float(v) for v in arg.split(",")] if arg else [1.0]
            return cls(kind, sigma=vals[0], sigma_b=vals[1] if len(vals) > 1 else None)
        return cls(kind)

    @property
    def tag(self) -> str:
        return self.kind.value

    @property
    def has_bias(self) -> bool:
        return self.kind in (
            SchemeKind.NORMAL_WITH_BIAS,
            SchemeKind.HE_WITH_BIAS,
            SchemeKind.SPHERE_WITH_BIAS,
            SchemeKind.DATA_DEPENDENT,
        )

    @property
    def isotropic_with_bias(self) -> bool:
        """Direction of the augmented row [w, b] is uniform on the sphere."""
        if self.kind is SchemeKind.NORMAL_WITH_BIAS:
            return self.sigma == self.sigma_b
        return self.kind in (SchemeKind.HE_WITH_BIAS, SchemeKind.SPHERE_WITH_BIAS)

    def bias_scale_ratio(self) -> float | None:
        """sigma_w / sigma_b for independent-normal with-bias schemes, 1 for isotropic ones."""
        if self.kind is SchemeKind.NORMAL_WITH_BIAS:
            return self.sigma / self.sigma_b
        if self.isotropic_with_bias:
            return 1.0
        return None


def draw_layer(scheme: InitScheme, fan_in: int, width: int, gen: np.random.Generator, count: int | None = None):
    """Draw ``count`` stacked copies of one layer: W ``(count, width, fan_in)``, b ``(count, width)``.

    With ``count=None`` the leading axis is dropped.
    """
    lead = (1 if count is None else count, width)
    kind = scheme.kind
    if kind is SchemeKind.DATA_DEPENDENT:
        raise ValueError("data-dependent biases need training inputs; use init_network(..., inputs=...)")
    if scheme.has_bias:
        v = gen.standard_normal(lead + (fan_in + 1,))
        w, b = v[..., :fan_in], v[..., fan_in]
        if kind is SchemeKind.NORMAL_WITH_BIAS:
            w, b = scheme.sigma * w, scheme.sigma_b * b
        elif kind is SchemeKind.HE_WITH_BIAS:
            s = math.sqrt(2.0 / (fan_in + 1))
            w, b = s * w, s * b
        else:
            norm = np.sqrt(np.sum(w * w, axis=-1) + b * b)
            w, b = w / norm[..., None], b / norm
    else:
        w = gen.standard_normal(lead + (fan_in,))
        if kind is SchemeKind.NORMAL_NO_BIAS:
            w = scheme.sigma * w
        elif kind is SchemeKind.HE_NO_BIAS:
            w = math.sqrt(2.0 / fan_in) * w
        else:
            w = w / np.linalg.norm(w, axis=-1, keepdims=True)
        b = np.zeros(lead)
    if count is None:
        return w[0], b[0]
    return w, b


def init_network(
    arch: Architecture | Sequence[int],
    schemes: InitScheme | Sequence[InitScheme],
    seed: int | np.random.Generator,
    *,
    inputs=None,
) -> NetworkParams:
    """Draw a network layer by layer from ``schemes`` (one per layer, or one for all).

    A data-dependent first layer needs the training ``inputs``; it is only
    valid for shallow networks, whose output layer is then drawn from
    N(0, sigma_out^2) with zero bias.
    """
    arch = arch if isinstance(arch, Architecture) else Architecture(tuple(arch))
    if isinstance(schemes, InitScheme):
        schemes = [schemes] * arch.depth
    schemes = list(schemes)
    if len(schemes) != arch.depth:
        raise ValueError(f"{len(schemes)} schemes for {arch.depth} layers")
    gen = np.random.default_rng(seed)
    ws, bs = [], []
    for t, scheme in enumerate(schemes):
        fan_in, width = arch.widths[t], arch.widths[t + 1]
        if t == 1 and schemes[0].kind is SchemeKind.DATA_DEPENDENT:
            # output layer of the data-dependent scheme; the second entry is ignored
            w = schemes[0].sigma_out * gen.standard_normal((width, fan_in))
            b = np.zeros(width)
        elif scheme.kind is SchemeKind.DATA_DEPENDENT:
            if t != 0 or arch.depth != 2:
                raise ValueError("data-dependent scheme is only defined for the first layer of a shallow network")
            if inputs is None:
                raise ValueError("data-dependent scheme needs training inputs")
            from ..datadep import datadep_biases

            w = scheme.sigma_in * gen.standard_normal((width, fan_in))
            b = datadep_biases(w, inputs, scheme.sigma_e, gen)
        else:
            w, b = draw_layer(scheme, fan_in, width, gen)
        ws.append(w)
        bs.append(b)
    return NetworkParams(tuple(ws), tuple(bs))
