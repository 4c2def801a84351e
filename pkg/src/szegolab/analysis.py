"""Post-processing: spectral tail fits, blow-up extrapolation, growth rates."""

from dataclasses import dataclass
import math

import numpy as np

from .state import as_amplitudes, position_profile

DEFAULT_FLOOR = 1e-13


class TailNotResolved(ValueError):
    pass


class NoBlowupTrend(ValueError):
    pass


@dataclass(frozen=True)
class TailFit:
    """|alpha_n| ~ c n^-gamma exp(-rho n) over modes window[0] <= n < window[1]."""

    c: float
    gamma: float
    rho: float
    window: tuple
    rms_log_residual: float


def tail_window(a, floor=DEFAULT_FLOOR, lo=None, hi=None):
    """Contiguous run of modes above ``floor`` starting at ``lo``.

    Defaults to [Nmax/4, Nmax/2).  The run ends at the first mode below the
    floor so round-off plateaus beyond it never enter the fit.
    """
    nmax = a.size
    lo = max(1, nmax // 4 if lo is None else lo)
    hi = nmax // 2 if hi is None else hi
    mag = np.abs(a[lo:hi])
    below = np.flatnonzero(mag <= floor)
    end = lo + (below[0] if below.size else mag.size)
    return lo, end


def tail_fit(state, floor=DEFAULT_FLOOR, window=None, weights=None):
    """Least-squares fit of log|alpha_n| = log c - gamma log n - rho n."""
    a = as_amplitudes(state)
    lo, hi = window if window is not None else tail_window(a, floor)
    if hi - lo < 8:
        raise TailNotResolved(f"tail not resolved: only {max(hi - lo, 0)} modes above floor {floor:g}")
    n = np.arange(lo, hi, dtype=float)
    y = np.log(np.abs(a[lo:hi]))
    X = np.column_stack([np.ones_like(n), -np.log(n), -n])
    w = np.ones_like(n) if weights is None else np.asarray(weights, dtype=float)
    sw = np.sqrt(w)
    coef, *_ = np.linalg.lstsq(X * sw[:, None], y * sw, rcond=None)
    res = y - X @ coef
    return TailFit(
        c=float(math.exp(coef[0])),
        gamma=float(coef[1]),
        rho=float(coef[2]),
        window=(int(lo), int(hi)),
        rms_log_residual=float(np.sqrt(np.mean(res**2))),
    )


def tail_fits(times, states, floor=DEFAULT_FLOOR):
    """Fit every checkpoint that has a resolved tail; returns (times, fits)."""
    ts, fits = [], []
    for t, s in zip(times, states):
        try:
            fits.append(tail_fit(s, floor))
            ts.append(t)
        except TailNotResolved:
            pass
    return np.array(ts), fits


@dataclass(frozen=True)
class BlowupEstimate:
    t_star: float
    t_linear: float
    t_quadratic: float
    bracket: tuple
    n_points: int


def blowup_extrapolate(times, rhos, fraction=0.25, min_points=5):
    """Extrapolate rho(t) to zero from the final ``fraction`` of samples.

    The linear crossing is the estimate; the spread between the linear and
    quadratic crossings is reported as the bracket.
    """
    t = np.asarray(times, dtype=float)
    r = np.asarray(rhos, dtype=float)
    k = max(min_points, int(math.ceil(fraction * t.size)))
    if t.size < min_points:
        raise NoBlowupTrend(f"no blow-up trend: need {min_points} samples, got {t.size}")
    t, r = t[-k:], r[-k:]
    if not np.all(np.diff(r) < 0):
        raise NoBlowupTrend("no blow-up trend: rho is not decreasing over the final window")
    slope, icpt = np.polyfit(t, r, 1)
    t_lin = -icpt / slope
    t_quad = t_lin
    if t.size >= 3:
        roots = np.roots(np.polyfit(t, r, 2))
        real = [z.real for z in roots if abs(z.imag) < 1e-12 * (1 + abs(z)) and z.real >= t[-1] - 1e-12]
        if real:
            t_quad = min(real)
    lo, hi = sorted((t_lin, t_quad))
    return BlowupEstimate(float(t_lin), float(t_lin), float(t_quad), (float(lo), float(hi)), int(t.size))


def growth_rate_fit(trajectory, s, window=None, log_log=False):
    """Slope of log ||u||_{H^s} against t (or log t when ``log_log``)."""
    if s <= 0.5:
        raise ValueError("no growth predicted for s <= 1/2")
    t = np.asarray(trajectory.times, dtype=float)
    norms = _sobolev_series(trajectory, s)
    lo, hi = window if window is not None else (t[0], t[-1])
    m = (t >= lo) & (t <= hi)
    if log_log:
        m &= t > 0
    if m.sum() < 5:
        raise ValueError(f"need at least 5 checkpoints in window, got {int(m.sum())}")
    xs = np.log(t[m]) if log_log else t[m]
    return float(np.polyfit(xs, np.log(norms[m]), 1)[0])


def _sobolev_series(trajectory, s):
    s = float(s)
    try:
        return trajectory.column(f"H^{s}")
    except (KeyError, AttributeError):
        from .state import sobolev_norm

        return np.array([sobolev_norm(a, s) for a in trajectory.states])


def late_window(times, count=10):
    t = np.asarray(times)
    return float(t[max(0, t.size - count)]), float(t[-1])


@dataclass(frozen=True)
class Concentration:
    theta: float
    vmax2: float


def concentration(state, oversample=4):
    """Location and height of max |u - alpha_0|^2 in position space."""
    a = as_amplitudes(state)
    prof = position_profile(a, oversample * a.size)
    # refine the grid maximum with a parabola through three samples
    j = int(np.argmax(np.abs(prof.v)))
    m = prof.v.size
    y0, y1, y2 = (abs(prof.v[(j + d) % m]) ** 2 for d in (-1, 0, 1))
    den = y0 - 2 * y1 + y2
    off = 0.5 * (y0 - y2) / den if den != 0 else 0.0
    dth = 2 * math.pi / m
    theta = (prof.theta[j] + off * dth) % (2 * math.pi)
    v = np.polynomial.polynomial.polyval(np.exp(1j * theta), a) - a[0]
    return Concentration(float(theta), float(abs(v) ** 2))
