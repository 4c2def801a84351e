"""Right-hand sides of the resonant flow and adaptive time integration."""

from dataclasses import dataclass, field, replace
from enum import Enum
import math

import numpy as np

from . import _accel
from .kernels import Family, KernelSpec, linear_term
from .state import DEFAULT_SOBOLEV, ModeState, as_amplitudes, charges, tail_mass


class NoFastPath(ValueError):
    pass


# -- right-hand sides ---------------------------------------------------------


def _projection(v, method, pair_weight=None):
    if method == "conv":
        return _accel.cubic_projection_conv(v, pair_weight)
    if method == "fft":
        return _accel.cubic_projection_fft(v, pair_weight)
    raise ValueError(f"unknown method {method!r}")


def _minus_shifted(r, v, coef, method, pair_weight=None):
    """r -= coef * S Pi(|S^+ v|^2 S^+ v), in place."""
    if coef != 0.0 and v.size > 1:
        r[1:] -= coef * _projection(v[1:], method, pair_weight)
    return r


def _fast_cubic(spec, a, method):
    fam = spec.family
    nmax = a.size
    if fam == Family.SZEGO:
        return _projection(a, method)
    if fam in (Family.TRUNCATED, Family.BETA, Family.EXTENDED):
        beta = 1.0 if fam == Family.TRUNCATED else spec.beta
        r = _minus_shifted(_projection(a, method), a, beta, method)
        if fam == Family.EXTENDED:
            w = np.abs(a) ** 2
            n = np.arange(nmax)
            g = w[0]
            r[0] += (spec.gamma - 1.0) * g * a[0]
            r[0] += 2.0 * np.dot(spec.delta1 + spec.delta2 * n[1:], w[1:]) * a[0]
            r[1:] += 2.0 * (spec.delta1 + spec.delta2 * n[1:]) * g * a[1:]
        return r
    if fam == Family.MODE_ANCHORED:
        r = _projection(a, method)
        j = spec.anchor
        if spec.beta != 0.0:
            cut = a.copy()
            if j < nmax:
                cut[j] = 0.0
            rc = _projection(cut, method)
            if j < nmax:
                rc[j] = 0.0
            r -= spec.beta * rc
        return r
    if fam == Family.POWER_PRODUCT:
        w = (np.arange(nmax) + 1.0) ** spec.G
        v = w * a
        r = _projection(v, method)
        if spec.truncated_flag:
            _minus_shifted(r, v, 1.0, method)
        return w * r
    if fam == Family.POWER_SUM:
        pw = (np.arange(2 * nmax - 1) + 1.0) ** spec.G
        r = _projection(a, method, pw)
        if spec.truncated_flag and nmax > 1:
            pw_shift = (np.arange(2 * nmax - 3) + 3.0) ** spec.G
            r[1:] -= _projection(a[1:], method, pw_shift)
        return r
    raise NoFastPath(f"no fast path for family {fam.value}")


def cubic_term(spec, state, method="fast"):
    """The resonant sum ``sum C conj(a_m) a_k a_l`` for every output mode.

    ``method`` is ``"direct"`` (brute force), ``"fast"``/``"auto"`` (Cauchy
    products, transform-based above 64 modes), ``"conv"`` or ``"fft"``.
    """
    a = as_amplitudes(state)
    if method == "direct":
        return _accel.resonant_sum(spec.params, a)
    if method in ("fast", "auto"):
        method = "conv" if a.size <= 64 else "fft"
    return _fast_cubic(spec, a, method)


def rhs_direct(spec, state):
    """d(alpha)/dt by the exact O(Nmax^3) resonant triple loop."""
    a = as_amplitudes(state)
    return -1j * (_accel.resonant_sum(spec.params, a) + linear_term(spec, a))


def rhs_fast(spec, state, method="auto"):
    """d(alpha)/dt through factorized Cauchy products; equals :func:`rhs_direct`."""
    a = as_amplitudes(state)
    return -1j * (cubic_term(spec, a, method=method) + linear_term(spec, a))


# -- integrator ---------------------------------------------------------------

# Dormand-Prince 5(4)
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_E = np.array([71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40])


def _rms(x):
    x = np.asarray(x)
    if np.iscomplexobj(x):
        x = x.view(np.float64)
    return math.sqrt(float(np.mean(x * x)))


class DormandPrince:
    """Adaptive Dormand-Prince 5(4) stepper with PI step-size control.

    Works on complex arrays; error norms are taken over the real and
    imaginary parts as independent components.
    """

    safety = 0.9
    fac_min = 0.2
    fac_max = 10.0
    pi_beta = 0.04

    def __init__(self, f, t0, y0, rtol, atol, max_step=math.inf, first_step=None):
        self.f = f
        self.t = float(t0)
        self.y = np.array(y0)
        self.rtol = rtol
        self.atol = atol
        self.max_step = max_step
        self.k1 = f(self.t, self.y)
        self.nfev = 1
        self.err_old = 1e-4
        self.rejected_last = False
        self.n_accepted = 0
        self.n_rejected = 0
        self.h = first_step if first_step else self._initial_step()

    def _scale(self, y, y_new=None):
        mag = np.abs(y.view(np.float64)) if np.iscomplexobj(y) else np.abs(y)
        if y_new is not None:
            other = np.abs(y_new.view(np.float64)) if np.iscomplexobj(y_new) else np.abs(y_new)
            mag = np.maximum(mag, other)
        return self.atol + self.rtol * mag

    def _initial_step(self):
        y, f0 = self.y, self.k1
        sc = self._scale(y)
        real = lambda z: z.view(np.float64) if np.iscomplexobj(z) else z  # noqa: E731
        d0 = _rms(real(y) / sc)
        d1 = _rms(real(f0) / sc)
        h0 = 1e-6 if (d0 < 1e-5 or d1 < 1e-5) else 0.01 * d0 / d1
        h0 = min(h0, self.max_step)
        f1 = self.f(self.t + h0, y + h0 * f0)
        self.nfev += 1
        d2 = _rms(real(f1 - f0) / sc) / h0
        m = max(d1, d2)
        h1 = max(1e-6, h0 * 1e-3) if m <= 1e-15 else (0.01 / m) ** 0.2
        return min(100 * h0, h1, self.max_step)

    def attempt(self, h):
        """One trial step of size ``h``; returns (y_new, k7, err)."""
        t, y = self.t, self.y
        ks = [self.k1]
        for i in range(1, 7):
            yi = y.copy()
            for j, aij in enumerate(_A[i]):
                if aij != 0.0:
                    yi += (h * aij) * ks[j]
            if i == 6:
                y_new = yi
            ks.append(self.f(t + _C[i] * h, yi))
        self.nfev += 6
        err_vec = ks[0] * _E[0]
        for j in range(1, 7):
            if _E[j] != 0.0:
                err_vec = err_vec + _E[j] * ks[j]
        err_vec = h * err_vec
        sc = self._scale(y, y_new)
        ev = err_vec.view(np.float64) if np.iscomplexobj(err_vec) else err_vec
        err = _rms(ev / sc)
        return y_new, ks[6], err

    def step(self, t_limit=math.inf):
        """Advance by one accepted step, never past ``t_limit``.

        Returns False on step-size underflow.
        """
        while True:
            h = min(self.h, self.max_step)
            clipped = False
            if self.t + h >= t_limit:
                h = t_limit - self.t
                clipped = True
            if h <= 16 * np.finfo(float).eps * max(1.0, abs(self.t)):
                return False
            y_new, k7, err = self.attempt(h)
            if not np.isfinite(err):
                err = 1e10
            fac11 = err ** (0.2 - self.pi_beta * 0.75) if err > 0 else 0.0
            if err <= 1.0:
                fac = fac11 / self.err_old**self.pi_beta
                fac = max(1.0 / self.fac_max, min(1.0 / self.fac_min, fac / self.safety))
                h_new = h / fac
                if self.rejected_last:
                    h_new = min(h_new, h)
                self.err_old = max(err, 1e-4)
                self.t = t_limit if clipped else self.t + h
                self.y = y_new
                self.k1 = k7
                self.n_accepted += 1
                self.rejected_last = False
                # a clipped step says nothing new about the natural step size
                self.h = max(h_new, self.h) if clipped else h_new
                return True
            self.n_rejected += 1
            self.rejected_last = True
            self.h = h / min(1.0 / self.fac_min, fac11 / self.safety)


class Termination(str, Enum):
    REACHED_T_END = "ReachedTEnd"
    TAIL_MASS_EXCEEDED = "TailMassExceeded"
    STEP_UNDERFLOW = "StepUnderflow"
    X_THRESHOLD = "XThreshold"


@dataclass
class IntegratorControls:
    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    max_step: float = math.inf
    t_end: float = 1.0
    checkpoint_dt: float = 0.1
    stop_on_tail_mass: float = 1e-8
    stop_on_x: float = 0.999
    track_x: bool = False
    method: str = "auto"
    s_list: tuple = DEFAULT_SOBOLEV

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ValueError("tolerances must be positive")
        if not self.t_end > 0:
            raise ValueError("t_end must be positive")
        if not self.checkpoint_dt > 0:
            raise ValueError("checkpoint_dt must be positive")
        self.s_list = tuple(float(s) for s in self.s_list)

    def to_dict(self):
        d = dict(self.__dict__)
        d["s_list"] = list(self.s_list)
        d["max_step"] = None if math.isinf(self.max_step) else self.max_step
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        extra = set(d) - set(cls.__dataclass_fields__)
        if extra:
            raise ValueError(f"unknown controls fields: {sorted(extra)}")
        if d.get("max_step") is None:
            d.pop("max_step", None)
        return cls(**d)


def x_of(a):
    """|p|^2 read off an L(1)-shaped state as |alpha_2/alpha_1|^2."""
    a1 = abs(a[1])
    return float(abs(a[2]) ** 2 / a1**2) if a1 > 0 else 0.0


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    charges: list
    termination: Termination
    kernel: KernelSpec
    controls: IntegratorControls
    stats: dict = field(default_factory=dict)

    def state(self, i):
        return ModeState(self.states[i], self.times[i])

    def column(self, name):
        if name.startswith("H^"):
            s = float(name[2:])
            return np.array([c.sobolev[s] for c in self.charges])
        if name == "x":
            return np.array([x_of(a) for a in self.states])
        return np.array([np.nan if getattr(c, name) is None else getattr(c, name) for c in self.charges])

    def relative_drift(self, name, mask=None):
        col = self.column(name)
        if mask is not None:
            col = col[mask]
        ref = abs(col[0])
        return float(np.max(np.abs(col - col[0])) / (ref if ref > 0 else 1.0))


def integrate(spec, state0, controls=None, keep_states=True):
    """Integrate the full mode-space flow with checkpointing and stop rules."""
    controls = controls or IntegratorControls()
    a0 = np.array(as_amplitudes(state0))
    t0 = state0.time if isinstance(state0, ModeState) else 0.0
    method = controls.method

    def f(t, y):
        return rhs_fast(spec, y, method=method)

    stepper = DormandPrince(f, t0, a0, controls.rel_tol, controls.abs_tol, controls.max_step)
    with_S = controls.track_x
    times, states, recs = [], [], []

    def record(t, y):
        times.append(t)
        states.append(np.array(y) if keep_states else None)
        recs.append(charges(spec, y, controls.s_list, with_S=with_S))

    record(t0, a0)
    t_end = t0 + controls.t_end
    n_chk = 1
    next_chk = min(t0 + controls.checkpoint_dt, t_end)
    termination = Termination.REACHED_T_END
    while True:
        if not stepper.step(next_chk):
            termination = Termination.STEP_UNDERFLOW
            break
        y = stepper.y
        stop = None
        if tail_mass(y) > controls.stop_on_tail_mass:
            stop = Termination.TAIL_MASS_EXCEEDED
        elif controls.track_x and x_of(y) >= controls.stop_on_x:
            stop = Termination.X_THRESHOLD
        if stepper.t >= next_chk or stop is not None:
            record(stepper.t, y)
        if stop is not None:
            termination = stop
            break
        if stepper.t >= next_chk:
            if next_chk >= t_end:
                break
            n_chk += 1
            next_chk = min(t0 + n_chk * controls.checkpoint_dt, t_end)
    if times[-1] != stepper.t:
        record(stepper.t, stepper.y)
    stats = {"accepted": stepper.n_accepted, "rejected": stepper.n_rejected, "nfev": stepper.nfev}
    arr = np.array(states) if keep_states else np.empty((0, a0.size), complex)
    return Trajectory(np.array(times), arr, recs, termination, spec, controls, stats)


def solve_ode(f, y0, t_end, checkpoint_dt, rtol=1e-12, atol=1e-14, stop=None):
    """Generic checkpointed Dormand-Prince solve; ``stop(t, y)`` may end early.

    Returns (times, values, reason) with reason in {"t_end", "stop", "underflow"}.
    """
    stepper = DormandPrince(f, 0.0, np.asarray(y0), rtol, atol)
    ts, ys = [0.0], [np.array(y0)]
    n_chk = 1
    next_chk = min(checkpoint_dt, t_end)
    reason = "t_end"
    while True:
        if not stepper.step(next_chk):
            reason = "underflow"
            break
        halted = stop is not None and stop(stepper.t, stepper.y)
        if stepper.t >= next_chk or halted:
            ts.append(stepper.t)
            ys.append(np.array(stepper.y))
        if halted:
            reason = "stop"
            break
        if stepper.t >= next_chk:
            if next_chk >= t_end:
                break
            n_chk += 1
            next_chk = min(n_chk * checkpoint_dt, t_end)
    if ts[-1] != stepper.t:
        ts.append(stepper.t)
        ys.append(np.array(stepper.y))
    return np.array(ts), np.array(ys), reason


def with_controls(controls, **changes):
    return replace(controls, **changes)
