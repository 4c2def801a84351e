"""The rank-one manifold L(1) and its reduced dynamics.

States on L(1) have alpha_0 = b and alpha_n = (b p + a) p^(n-1).  Along the
flow the modulus x = |p|^2 obeys xdot^2 + V(x) = 0 with V a quartic whose
coefficients depend only on the conserved N, E and S.
"""

from dataclasses import dataclass, field
from enum import Enum
import cmath
import math

import numpy as np

from .state import ModeState, as_amplitudes

EPS_ROOT = 1e-9


class Regime(str, Enum):
    STATIONARY = "Stationary"
    PERIODIC = "Periodic"
    INFINITE_TIME_BLOWUP = "InfiniteTimeBlowup"
    INVALID = "Invalid"


class Branch(str, Enum):
    ZERO = "Zero"
    PI = "Pi"


@dataclass(frozen=True)
class ManifoldState:
    b: complex
    a: complex
    p: complex

    def __post_init__(self):
        for name in ("b", "a", "p"):
            v = complex(getattr(self, name))
            if not (math.isfinite(v.real) and math.isfinite(v.imag)):
                raise ValueError(f"{name} must be finite")
            object.__setattr__(self, name, v)
        if abs(self.p) >= 1.0:
            raise ValueError("|p| must be < 1")

    @property
    def x(self):
        return abs(self.p) ** 2

    @property
    def c(self):
        return self.b * self.p + self.a

    def as_array(self):
        return np.array([self.b, self.a, self.p], dtype=complex)

    @classmethod
    def from_array(cls, y):
        return cls(complex(y[0]), complex(y[1]), complex(y[2]))


@dataclass(frozen=True)
class LDParams:
    b: complex
    poles: tuple

    def __post_init__(self):
        poles = tuple((complex(c), complex(p)) for c, p in self.poles)
        for _, p in poles:
            if abs(p) >= 1.0:
                raise ValueError("all poles need |p_k| < 1")
        ps = [p for _, p in poles]
        for i in range(len(ps)):
            for j in range(i):
                if abs(ps[i] - ps[j]) <= 1e-14:
                    raise ValueError("coincident poles are not supported")
        object.__setattr__(self, "b", complex(self.b))
        object.__setattr__(self, "poles", poles)


# -- lifting ------------------------------------------------------------------


def lift_L1(ms, nmax):
    """Mode amplitudes of an L(1) state."""
    if not isinstance(ms, ManifoldState):
        ms = ManifoldState(*ms)
    n = np.arange(nmax)
    out = np.empty(nmax, dtype=complex)
    out[0] = ms.b
    # p**(n-1) computed as a cumulative product keeps p = 0 exact
    out[1:] = ms.c * ms.p ** (n[1:] - 1)
    return ModeState(out)


def lift_LD(params, nmax):
    """alpha_0 = b + sum c_k, alpha_n = sum c_k p_k^n."""
    n = np.arange(nmax)
    out = np.zeros(nmax, dtype=complex)
    out[0] = params.b
    for c, p in params.poles:
        out[1:] += c * p ** n[1:]
        out[0] += c
    return ModeState(out)


def project_L1(state):
    """Read (b, a, p) off mode amplitudes assumed to lie on L(1).

    Returns None when the implied |p| is not below one.
    """
    a = as_amplitudes(state)
    b = complex(a[0])
    if a[1] == 0:
        return ManifoldState(b, 0.0, 0.0)
    p = complex(a[2] / a[1])
    if abs(p) >= 1.0:
        return None
    return ManifoldState(b, complex(a[1]) - b * p, p)


def stationary_szego(p, t, nmax):
    """The Blaschke-factor solution exp(-it)(conj(p) - z)/(1 - p z)."""
    p = complex(p)
    if abs(p) >= 1.0:
        raise ValueError("|p| must be < 1")
    ph = cmath.exp(-1j * t)
    n = np.arange(1, nmax)
    out = np.empty(nmax, dtype=complex)
    out[0] = ph * p.conjugate()
    out[1:] = ph * (abs(p) ** 2 - 1.0) * p ** (n - 1)
    return ModeState(out, t)


def stationary_manifold_state(p):
    """(b, a, p) coordinates of :func:`stationary_szego` at t = 0."""
    p = complex(p)
    return ManifoldState(p.conjugate(), -1.0, p)


# -- reduced dynamics ---------------------------------------------------------


def _NE(ms):
    x = ms.x
    E = abs(ms.c) ** 2 / (1.0 - x) ** 2
    N = abs(ms.b) ** 2 + (1.0 - x) * E
    return N, E


def reduced_charges(beta, ms):
    """(N, E, S, H) on L(1) for the beta kernel."""
    N, E = _NE(ms)
    x = ms.x
    S = (N + E) * x + 0.5 * beta * E * x * x + 2.0 * (ms.a * ms.b.conjugate() * ms.p.conjugate()).real
    H = 0.25 * (N * N + 2 * N * E - (2 + beta) * E * E + 2 * E * S)
    return N, E, S, H


def reduced_rhs(beta, ms):
    """(db/dt, da/dt, dp/dt) of the three-dimensional reduced system."""
    N, E = _NE(ms)
    b, a, p = ms.b, ms.a, ms.p
    x = abs(p) ** 2
    dp = -1j * ((N - beta * (1 - x) * E) * p + a * b.conjugate())
    db = -1j * ((N + E) * b + E * a * p.conjugate())
    da = -1j * ((N - beta * E) * a - beta * E * x * b * p)
    return db, da, dp


def xdot(ms):
    return 2.0 * (ms.a * ms.b.conjugate() * ms.p.conjugate()).imag


@dataclass
class ReducedTrajectory:
    beta: float
    times: np.ndarray
    y: np.ndarray
    reason: str

    @property
    def b(self):
        return self.y[:, 0]

    @property
    def a(self):
        return self.y[:, 1]

    @property
    def p(self):
        return self.y[:, 2]

    @property
    def x(self):
        return np.abs(self.p) ** 2

    def states(self):
        return [ManifoldState.from_array(v) for v in self.y]

    def charges(self):
        return np.array([reduced_charges(self.beta, s) for s in self.states()])

    def xdot(self):
        return np.array([xdot(s) for s in self.states()])


def integrate_reduced(beta, ms, t_end, checkpoint_dt, rtol=1e-12, atol=1e-14, stop_on_x=0.999999):
    from .flow import solve_ode

    def f(t, y):
        if abs(y[2]) >= 1.0:
            return np.full(3, np.nan, dtype=complex)
        return np.array(reduced_rhs(beta, ManifoldState.from_array(y)), dtype=complex)

    ts, ys, reason = solve_ode(
        f, ms.as_array(), t_end, checkpoint_dt, rtol, atol,
        stop=lambda t, y: abs(y[2]) ** 2 >= stop_on_x,
    )
    return ReducedTrajectory(float(beta), ts, ys, reason)


# -- effective potential ------------------------------------------------------


@dataclass
class EffectivePotential:
    """V(x) = sum_k coeffs[k] x^k with ``xdot**2 + V(x) = 0``."""

    coeffs: tuple
    roots: list = field(default_factory=list)
    regime: Regime = None
    beta: float = None

    @property
    def scale(self):
        return max(max(abs(c) for c in self.coeffs), 1e-300)

    def __call__(self, x):
        return np.polynomial.polynomial.polyval(x, self.coeffs)

    def derivative(self, x, k=1):
        d = np.polynomial.polynomial.polyder(self.coeffs, k)
        return np.polynomial.polynomial.polyval(x, d)

    def multiplicity(self, x, tol=EPS_ROOT):
        """How many successive derivatives vanish at ``x`` (0 if V(x) != 0)."""
        m = 0
        for k in range(5):
            v = self(x) if k == 0 else self.derivative(x, k)
            if abs(v) > tol * self.scale:
                break
            m += 1
        return m

    def real_roots(self, imag_tol=1e-6):
        out = sorted(r.real for r in self.roots if abs(r.imag) <= imag_tol * (1 + abs(r)))
        merged = []
        for r in out:
            if merged and abs(r - merged[-1]) <= imag_tol:
                continue
            merged.append(r)
        return merged


def _roots(coeffs):
    c = np.trim_zeros(np.asarray(coeffs, dtype=float)[::-1], "f")
    if c.size <= 1:
        return []
    roots = np.roots(c)
    d = np.polyder(c)
    polished = []
    for r in roots:
        dv = np.polyval(d, r)
        if dv != 0:
            step = np.polyval(c, r) / dv
            if abs(step) < 1e-3 * (1 + abs(r)):
                r = r - step
        polished.append(complex(r))
    return polished


def veff_coefficients(beta, N, E, S):
    """(c0, c1, c2, c3, c4) of the effective potential."""
    c4 = beta * (beta - 8.0) * E * E / 4.0
    c3 = beta * E * (3.0 * E - N)
    c2 = N * N + 2 * N * E - 3 * E * E + (4.0 - beta) * E * S
    c1 = 4 * E * E - 4 * N * E - 6 * E * S + 2 * N * S
    c0 = S * S
    return (c0, c1, c2, c3, c4)


def veff(beta, N, E, S, x0=None):
    if N < 0 or E < 0:
        raise ValueError("N and E must be nonnegative")
    coeffs = veff_coefficients(beta, N, E, S)
    pot = EffectivePotential(coeffs, [], None, float(beta))
    # split off the root at x = 1 exactly; a numerically split double or
    # triple root would otherwise show up as a complex cluster
    m = pot.multiplicity(1.0) if any(coeffs) else 0
    rest = np.asarray(coeffs, dtype=float)
    for _ in range(m):
        rest, _ = np.polynomial.polynomial.polydiv(rest, (-1.0, 1.0))
    pot.roots = _roots(rest) + [1.0 + 0j] * m
    if x0 is not None:
        pot.regime = classify(pot, x0)
    return pot


def potential_of(beta, ms):
    N, E, S, _ = reduced_charges(beta, ms)
    return veff(beta, N, E, S, x0=ms.x)


def _well(pot, x0, tol):
    """Edges (left, right) of the allowed interval reached from x0.

    ``right`` is None when V stays nonpositive all the way to +inf.
    """
    roots = pot.real_roots()
    v1 = pot.derivative(x0)
    on_root = abs(pot(x0)) <= tol
    sep = 1e-6
    if on_root and v1 > 0:
        left = max((r for r in roots if r < x0 - sep), default=-math.inf)
        return left, x0
    lefts = [r for r in roots if r <= x0 + (sep if not on_root else -sep)]
    if on_root:
        left = x0
    else:
        left = max(lefts, default=-math.inf)
    right = min((r for r in roots if r > x0 + sep), default=None)
    return left, right


def classify(pot, x0):
    """Regime of the motion of x started at ``x0``."""
    if not 0.0 <= x0 < 1.0:
        raise ValueError("x0 must lie in [0, 1)")
    tol = EPS_ROOT * pot.scale
    if pot(x0) > tol:
        raise ValueError("dynamically inaccessible: V_eff(x0) > 0")
    if max(abs(c) for c in pot.coeffs) == 0.0 or pot.multiplicity(x0) >= 2:
        return Regime.STATIONARY
    left, right = _well(pot, x0, tol)
    if right is None or left < -1e-6:
        return Regime.INVALID
    if abs(right - 1.0) <= 1e-6:
        return Regime.INFINITE_TIME_BLOWUP if pot.multiplicity(1.0) >= 2 else Regime.INVALID
    if right < 1.0:
        return Regime.PERIODIC
    return Regime.INVALID


class Category(str, Enum):
    BOUNDED = "Bounded"
    EXPONENTIAL = "Exponential"
    POLYNOMIAL = "Polynomial"
    INVALID = "Invalid"


def category(pot, x0):
    """Phase-diagram label: growth type of Sobolev norms."""
    regime = classify(pot, x0)
    if regime in (Regime.STATIONARY, Regime.PERIODIC):
        return Category.BOUNDED
    if regime == Regime.INFINITE_TIME_BLOWUP:
        return Category.POLYNOMIAL if pot.multiplicity(1.0) >= 3 else Category.EXPONENTIAL
    return Category.INVALID


# -- blow-up families and thresholds ------------------------------------------


def blowup_family(beta, b, p, lam):
    """The a that puts (b, a, p) on the V(1) = 0 submanifold."""
    if beta <= 0:
        raise ValueError("no nontrivial blow-up family for beta <= 0")
    b, p = complex(b), complex(p)
    x = abs(p) ** 2
    if not 0.0 < x < 1.0:
        raise ValueError("need 0 < |p| < 1")
    if b == 0:
        raise ValueError("need b != 0")
    den = (2.0 - beta) * x - beta
    if abs(den) <= 1e-14 * (1 + beta):
        raise ValueError("parametrization singular: (2 - beta)|p|^2 = beta")
    num = ((1 + x) * beta - 2.0) + math.sqrt(2 * beta) * cmath.exp(1j * lam) * (1 - x) * math.sqrt(1 + 1 / x)
    return b * p * num / den


def blowup_condition(beta, ms):
    """(2 + beta) E - 2 (N + S); zero exactly on the blow-up families."""
    N, E, S, _ = reduced_charges(beta, ms)
    return (2 + beta) * E - 2 * (N + S)


def threshold_x0(beta, branch):
    """|p|^2 at which the exponential cascade turns polynomial."""
    branch = Branch(branch)
    ok = beta >= 16 if branch == Branch.ZERO else 9 < beta <= 16
    if not ok:
        raise ValueError(f"no polynomial-growth threshold on this branch for beta={beta}")
    return (math.sqrt(beta) - 4.0) ** 2 / (beta - 8.0)


def second_root(pot):
    """(x_min, c) from V = c4 (x-1)^2 (x - x_min)(x - c); requires V(1) = V'(1) = 0."""
    q, _ = np.polynomial.polynomial.polydiv(pot.coeffs, (1.0, -2.0, 1.0))
    q = np.trim_zeros(np.asarray(q), "b")
    if q.size < 3:
        raise ValueError("potential is not quartic")
    r = np.polynomial.polynomial.polyroots(q)
    if np.max(np.abs(r.imag)) > 1e-7:
        raise ValueError("quadratic factor has complex roots")
    return tuple(sorted(r.real))


def locate_threshold(beta, lam, b=1.0, lo=1e-6, hi=1 - 1e-6, tol=1e-13):
    """x0 with c = 1 on the family (beta, b, sqrt(x0), lam), by bisection."""

    def g(x0):
        a = blowup_family(beta, b, math.sqrt(x0), lam)
        pot = potential_of(beta, ManifoldState(b, a, math.sqrt(x0)))
        # second derivative at 1 vanishes exactly when c = 1
        return pot.derivative(1.0, 2) / pot.scale

    glo, ghi = g(lo), g(hi)
    if glo * ghi > 0:
        raise ValueError("no polynomial-growth threshold bracketed on this branch")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        gm = g(mid)
        if gm * glo > 0:
            lo, glo = mid, gm
        else:
            hi = mid
    return 0.5 * (lo + hi)


# -- closed-form solutions ----------------------------------------------------


@dataclass(frozen=True)
class ClosedForm:
    kind: str  # "cosh", "cos" or "rational"
    x_min: float
    c: float
    rate: float  # omega, Omega or c_tilde
    phase: float

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if self.kind == "rational":
            s2 = self.rate * (t + self.phase) ** 2
            return (s2 + self.x_min) / (s2 + 1.0)
        xm, c = self.x_min, self.c
        arg = self.rate * t + self.phase
        f = np.cosh(arg) if self.kind == "cosh" else np.cos(arg)
        return ((c - xm) * f - c - xm + 2 * c * xm) / ((c - xm) * f + c + xm - 2.0)


def closed_form(pot, x0, direction=1):
    """Elementary x(t) on a potential with a double root at x = 1.

    ``direction`` is the sign of xdot(0); it only matters off turning points.
    """
    regime = classify(pot, x0)
    if regime == Regime.INVALID:
        raise ValueError("closed form undefined in the Invalid regime")
    if pot.multiplicity(1.0) < 2:
        raise ValueError("no elementary closed form: V has no double root at x = 1")
    c4 = pot.coeffs[4]
    sgn = 1.0 if direction >= 0 else -1.0
    if pot.multiplicity(1.0) >= 3:
        xm = second_root_triple(pot)
        ct = c4 * (1 - xm) ** 2 / 4.0
        s2 = max(((1 - xm) / (1 - x0) - 1.0) / ct, 0.0)
        return ClosedForm("rational", xm, 1.0, ct, sgn * math.sqrt(s2))
    r1, r2 = second_root(pot)
    # x_min is the turning point bounding the well from the left
    cand = [r for r in (r1, r2) if r <= x0 + 1e-9]
    xm = max(cand) if cand else min(r1, r2)
    c = r2 if xm == r1 else r1
    w2 = -c4 * (1 - c) * (1 - xm)
    den = (c - xm) * (x0 - 1.0)
    A = (-c - xm + 2 * c * xm - x0 * (c + xm - 2.0)) / den if den != 0 else 1.0
    if w2 > 0:
        w = math.sqrt(w2)
        phi = math.acosh(max(A, 1.0))
        form = ClosedForm("cosh", xm, c, w, phi)
    else:
        w = math.sqrt(-w2)
        phi = math.acos(min(max(A, -1.0), 1.0))
        form = ClosedForm("cos", xm, c, w, phi)
    h = 1e-6 / max(w, 1e-300)
    if phi != 0.0 and (float(form(h)) - float(form(0.0))) * sgn < 0:
        form = ClosedForm(form.kind, xm, c, w, -phi)
    return form


def second_root_triple(pot):
    q, _ = np.polynomial.polynomial.polydiv(pot.coeffs, (-1.0, 3.0, -3.0, 1.0))
    q = np.trim_zeros(np.asarray(q), "b")
    return float(-q[0] / q[1])


def analytic_x(pot, x0, t, direction=1):
    """|p(t)|^2 from the cosh, cos or rational branch, with x(0) = x0."""
    return closed_form(pot, x0, direction)(t)


def omega(pot, x0=None):
    """Exponential rate at which 1 - x(t) decays on the cosh branch."""
    r1, r2 = second_root(pot)
    w2 = -pot.coeffs[4] * (1 - r1) * (1 - r2)
    if w2 <= 0:
        raise ValueError("no exponential approach to x = 1")
    return math.sqrt(w2)


def growth_rate(s, omega):
    """Predicted late-time rate of log ||u||_{H^s}."""
    if s <= 0.5:
        raise ValueError("no growth predicted for s <= 1/2")
    if omega <= 0:
        raise ValueError("omega must be positive")
    return (2 * s - 1) * omega / 2
