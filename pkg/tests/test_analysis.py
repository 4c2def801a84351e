import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from szegolab.analysis import (
    NoBlowupTrend,
    TailNotResolved,
    blowup_extrapolate,
    concentration,
    growth_rate_fit,
    late_window,
    tail_fit,
    tail_window,
)
from szegolab.flow import IntegratorControls, integrate
from szegolab.kernels import KernelSpec
from szegolab.manifold import ManifoldState, blowup_family, lift_L1, reduced_charges

NMAX = 512


def model(c, gamma, rho, nmax=NMAX):
    n = np.arange(nmax, dtype=float)
    a = np.zeros(nmax, complex)
    a[1:] = c * n[1:] ** -gamma * np.exp(-rho * n[1:])
    return a


def test_exact_model_recovery():
    f = tail_fit(model(2.0, 2.0, 0.1), floor=1e-300)
    assert (f.c, f.gamma, f.rho) == pytest.approx((2.0, 2.0, 0.1), abs=1e-6)
    assert f.window == (128, 256)
    assert f.rms_log_residual < 1e-10


def test_geometric_tail():
    p = 0.97
    f = tail_fit(p ** np.arange(NMAX, dtype=float) + 0j, floor=1e-300)
    assert abs(f.gamma) < 1e-8
    assert f.rho == pytest.approx(-math.log(p), rel=1e-8)


@given(
    c=st.floats(0.1, 10),
    gamma=st.floats(0, 4),
    rho=st.floats(0.0, 0.05),
    phase=st.floats(0, 2 * math.pi),
)
def test_round_trip_random(c, gamma, rho, phase):
    f = tail_fit(model(c, gamma, rho) * np.exp(1j * phase), floor=0.0)
    assert f.c == pytest.approx(c, rel=1e-6)
    assert f.gamma == pytest.approx(gamma, abs=1e-6)
    assert f.rho == pytest.approx(rho, abs=1e-6)


def test_window_stops_at_floor():
    a = model(1.0, 0.0, 0.2)
    lo, hi = tail_window(a, 1e-13)
    assert (lo, hi) == (128, 150)  # e^{-0.2 n} drops below 1e-13 at n = 150
    a = model(1.0, 0.0, 0.1)
    lo, hi = tail_window(a, 1e-13)
    assert (lo, hi) == (128, 256)  # capped at Nmax/2


def test_tail_not_resolved():
    a = np.zeros(NMAX, complex)
    a[:4] = 1
    with pytest.raises(TailNotResolved, match="tail not resolved"):
        tail_fit(a)


def test_blowup_linear():
    t = np.linspace(0, 1.5, 20)
    est = blowup_extrapolate(t, 1 - t / 2)
    assert est.t_star == pytest.approx(2.0, abs=1e-12)
    assert est.bracket[0] <= 2.0 + 1e-9 and est.bracket[1] >= 2.0 - 1e-9


def test_blowup_quadratic_bracket():
    t = np.linspace(0, 0.9, 40)
    est = blowup_extrapolate(t, (1 - t) ** 2 + 0.5 * (1 - t))
    assert est.t_quadratic == pytest.approx(1.0, abs=1e-9)
    assert est.bracket[0] <= 1.0 <= est.bracket[1] + 1e-12


def test_blowup_constant_raises():
    with pytest.raises(NoBlowupTrend, match="no blow-up trend"):
        blowup_extrapolate(np.arange(10.0), np.ones(10))
    with pytest.raises(NoBlowupTrend):
        blowup_extrapolate(np.arange(3.0), [3.0, 2.0, 1.0])


@pytest.fixture(scope="module")
def truncated_run():
    a = lift_L1(ManifoldState(1.0, blowup_family(1.0, 1.0, 0.5, 0.0), 0.5), 512)
    ctl = IntegratorControls(t_end=3.0, checkpoint_dt=0.1, s_list=(1.0, 2.0), stop_on_tail_mass=1.0)
    return integrate(KernelSpec("Truncated"), a, ctl)


def test_growth_rate_invariances(truncated_run):
    tr = truncated_run
    s1 = growth_rate_fit(tr, 1.0, (1.0, 3.0))
    shifted = integrate(
        KernelSpec("Truncated"),
        tr.states[0] * np.exp(0.7j),
        IntegratorControls(t_end=3.0, checkpoint_dt=0.1, s_list=(1.0, 2.0), stop_on_tail_mass=1.0),
    )
    assert growth_rate_fit(shifted, 1.0, (1.0, 3.0)) == pytest.approx(s1, rel=1e-8)
    # the slope is unchanged when times are translated together with the window
    class Shifted:
        times = tr.times + 5.0
        column = tr.column
        states = tr.states

    assert growth_rate_fit(Shifted, 1.0, (6.0, 8.0)) == pytest.approx(s1, rel=1e-10)


def test_growth_rate_errors(truncated_run):
    with pytest.raises(ValueError):
        growth_rate_fit(truncated_run, 0.5)
    with pytest.raises(ValueError, match="at least 5"):
        growth_rate_fit(truncated_run, 1.0, (0.0, 0.3))


def test_growth_rate_from_states(truncated_run):
    tr = truncated_run

    class Bare:
        times = tr.times
        states = tr.states

        @staticmethod
        def column(name):
            raise KeyError(name)

    assert growth_rate_fit(Bare, 1.0) == pytest.approx(growth_rate_fit(tr, 1.0), rel=1e-12)


def test_late_window():
    assert late_window(np.arange(30.0)) == (20.0, 29.0)
    assert late_window(np.arange(4.0)) == (0.0, 3.0)


def test_concentration_on_L1():
    ms = ManifoldState(0.4, 0.2 - 0.1j, 0.999 * np.exp(0.8j))
    a = lift_L1(ms, 16384)
    E = reduced_charges(1, ms)[1]
    conc = concentration(a)
    assert conc.theta == pytest.approx(2 * math.pi - 0.8, abs=1e-4)
    assert conc.vmax2 == pytest.approx(4 * E, rel=1e-2)
