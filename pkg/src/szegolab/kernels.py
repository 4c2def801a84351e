"""Interaction-coefficient families for cubic resonant systems.

A resonant system evolves mode amplitudes by

    i d(alpha_n)/dt = sum_{n+m=k+l} C_nmkl conj(alpha_m) alpha_k alpha_l  (+ linear term)

and the families here fix ``C``.  Couplings are evaluated lazily per index
quadruple; the flow module owns the factorized fast paths.
"""

from dataclasses import asdict, dataclass
from enum import Enum
import math

import numpy as np

from . import _accel


class Family(str, Enum):
    SZEGO = "Szego"
    TRUNCATED = "Truncated"
    BETA = "Beta"
    MODE_ANCHORED = "ModeAnchored"
    POWER_PRODUCT = "PowerProduct"
    POWER_SUM = "PowerSum"
    EXTENDED = "Extended"


_CODES = {
    Family.SZEGO: _accel.SZEGO,
    Family.TRUNCATED: _accel.TRUNCATED,
    Family.BETA: _accel.BETA,
    Family.MODE_ANCHORED: _accel.MODE_ANCHORED,
    Family.POWER_PRODUCT: _accel.POWER_PRODUCT,
    Family.POWER_SUM: _accel.POWER_SUM,
    Family.EXTENDED: _accel.EXTENDED,
}


@dataclass(frozen=True)
class KernelSpec:
    """Immutable description of one coupling family and its parameters.

    ``delta1``/``delta2`` are offsets from the cubic Szego value, so that
    ``C_n0n0 = 1 + delta1 + delta2*n`` for ``n != 0``; with the defaults every
    deformation is switched off.  ``alpha`` adds the non-resonant term
    ``alpha*(u|1)`` and is honoured by every family.
    """

    family: Family = Family.SZEGO
    beta: float = 0.0
    alpha: float = 0.0
    gamma: float = 1.0
    delta1: float = 0.0
    delta2: float = 0.0
    G: float = 0.0
    anchor: int = 0
    truncated_flag: bool = False

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        for name in ("beta", "alpha", "gamma", "delta1", "delta2", "G"):
            val = float(getattr(self, name))
            if not math.isfinite(val):
                raise ValueError(f"kernel parameter {name} must be finite, got {val}")
            object.__setattr__(self, name, val)
        if self.G < 0:
            raise ValueError(f"G must be >= 0, got {self.G}")
        if int(self.anchor) != self.anchor or self.anchor < 0:
            raise ValueError(f"anchor must be a nonnegative integer, got {self.anchor}")
        object.__setattr__(self, "anchor", int(self.anchor))
        object.__setattr__(self, "truncated_flag", bool(self.truncated_flag))

    @property
    def code(self):
        return _CODES[self.family]

    @property
    def params(self):
        """Positional tuple consumed by the compiled kernels."""
        return (
            self.code,
            self.beta,
            self.gamma,
            self.delta1,
            self.delta2,
            self.G,
            self.anchor,
            self.truncated_flag,
        )

    @property
    def manifold_beta(self):
        """The beta of the equivalent Beta kernel on L(1), if there is one."""
        if self.family == Family.SZEGO:
            return 0.0
        if self.family == Family.TRUNCATED:
            return 1.0
        if self.family == Family.BETA:
            return self.beta
        return None

    def to_dict(self):
        d = asdict(self)
        d["family"] = self.family.value
        return d

    @classmethod
    def from_dict(cls, d):
        known = set(cls.__dataclass_fields__)
        extra = set(d) - known
        if extra:
            raise ValueError(f"unknown kernel fields: {sorted(extra)}")
        return cls(**d)


def _check_quadruple(n, m, k, l):
    for idx in (n, m, k, l):
        if int(idx) != idx:
            raise ValueError(f"mode indices must be integers, got {idx}")
        if idx < 0:
            raise ValueError(f"negative mode index {idx}")
    if n + m != k + l:
        raise ValueError(f"non-resonant indices ({n},{m},{k},{l}): n+m != k+l")


def coupling(spec, n, m, k, l):
    """Coupling ``C_nmkl`` of ``spec`` for one resonant quadruple."""
    _check_quadruple(n, m, k, l)
    return float(_accel.coupling_scalar(*spec.params, int(n), int(m), int(k), int(l)))


def coupling_array(spec, n, m, k, l):
    """Vectorized :func:`coupling` over broadcastable index arrays."""
    n, m, k, l = (np.asarray(i) for i in (n, m, k, l))
    if np.any(n + m != k + l):
        raise ValueError("non-resonant indices")
    if any(np.any(i < 0) for i in (n, m, k, l)):
        raise ValueError("negative mode index")
    return _accel.coupling_vec(*spec.params, n, m, k, l)


def linear_term(spec, amplitudes):
    """Non-resonant contribution to ``i d(alpha)/dt``: ``alpha * alpha_0`` on mode 0."""
    a = np.asarray(amplitudes, dtype=complex)
    out = np.zeros_like(a)
    if spec.alpha != 0.0:
        out[0] = spec.alpha * a[0]
    return out


def alpha_shift(spec, amplitudes):
    """Effective linear coefficient ``alpha + delta1*N + delta2*E``.

    The delta couplings act on L(1) like an alpha-deformation whose strength
    depends on the conserved charges.  This is a diagnostic; the deltas stay
    in the couplings and are not added again by :func:`linear_term`.
    """
    a = np.asarray(amplitudes, dtype=complex)
    w = np.abs(a) ** 2
    return spec.alpha + spec.delta1 * w.sum() + spec.delta2 * np.dot(np.arange(a.size), w)
