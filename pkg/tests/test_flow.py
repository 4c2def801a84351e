import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import solve_ivp

import oracles
from conftest import random_state
from szegolab.flow import (
    DormandPrince,
    IntegratorControls,
    Termination,
    cubic_term,
    integrate,
    rhs_direct,
    rhs_fast,
    solve_ode,
)
from szegolab.kernels import KernelSpec
from szegolab.state import restrict_residue
from test_kernels import ALL_SPECS, oracle_kw

FAST_SPECS = ALL_SPECS + [KernelSpec("Beta", beta=2.5, alpha=-0.4), KernelSpec("ModeAnchored", beta=0.3, anchor=40)]


def test_truncated_examples():
    spec = KernelSpec("Truncated")
    a = np.zeros(6, complex)
    a[0] = 1
    np.testing.assert_array_equal(rhs_direct(spec, a), [-1j, 0, 0, 0, 0, 0])
    a[1] = 1
    np.testing.assert_allclose(rhs_direct(spec, a), [-3j, -2j, -1j, 0, 0, 0], atol=1e-15)
    np.testing.assert_allclose(rhs_fast(spec, a), [-3j, -2j, -1j, 0, 0, 0], atol=1e-15)


@pytest.mark.parametrize("spec", FAST_SPECS, ids=lambda s: s.family.value)
def test_zero_state(spec):
    z = np.zeros(12, complex)
    assert not np.any(rhs_direct(spec, z))
    assert not np.any(rhs_fast(spec, z))


@pytest.mark.parametrize("spec", ALL_SPECS, ids=lambda s: s.family.value)
def test_direct_matches_loop_oracle(spec, rng):
    a = random_state(rng, 7)
    ref = oracles.rhs(spec.family.value, list(a), alpha=spec.alpha, **oracle_kw(spec))
    np.testing.assert_allclose(rhs_direct(spec, a), ref, rtol=1e-13, atol=1e-14)


@pytest.mark.parametrize("spec", FAST_SPECS, ids=lambda s: s.family.value)
@pytest.mark.parametrize("method", ["conv", "fft"])
def test_fast_matches_direct(spec, method, rng):
    for nmax in (2, 3, 32):
        for _ in range(10):
            a = random_state(rng, nmax, decay=0.05)
            d = rhs_direct(spec, a)
            f = rhs_fast(spec, a, method=method)
            assert np.max(np.abs(f - d)) <= 1e-12 * np.max(np.abs(d))


def test_beta_one_is_truncated(rng):
    a = random_state(rng, 40)
    np.testing.assert_array_equal(rhs_fast(KernelSpec("Beta", beta=1.0), a), rhs_fast(KernelSpec("Truncated"), a))


def test_unknown_method(rng):
    with pytest.raises(ValueError):
        cubic_term(KernelSpec("Szego"), random_state(rng, 4), method="bogus")


def test_alpha_single_mode():
    spec = KernelSpec("Szego", alpha=1.0)
    a = np.zeros(8, complex)
    a[0] = 1.0
    tr = integrate(spec, a, IntegratorControls(t_end=3.0, checkpoint_dt=0.5))
    # i a0' = (|a0|^2 + alpha) a0 with |a0| = 1
    np.testing.assert_allclose(tr.states[:, 0], np.exp(-2j * tr.times), atol=1e-9)
    np.testing.assert_allclose(np.abs(tr.states[:, 0]), 1.0, atol=1e-12)


def test_dopri_linear_ode_order():
    lam = -0.7 + 2.0j
    errs = []
    for tol in (1e-6, 1e-9):
        ts, ys, reason = solve_ode(lambda t, y: lam * y, np.array([1.0 + 0j]), 2.0, 2.0, rtol=tol, atol=tol * 1e-2)
        assert reason == "t_end" and ts[-1] == 2.0
        errs.append(abs(ys[-1, 0] - np.exp(2 * lam)))
    assert errs[1] < errs[0] < 1e-5


def test_dopri_matches_scipy(rng):
    spec = KernelSpec("Beta", beta=0.6)
    a = random_state(rng, 24, support=8)
    tr = integrate(spec, a, IntegratorControls(t_end=1.0, checkpoint_dt=0.25, rel_tol=1e-11, abs_tol=1e-13))

    def f(t, y):
        return rhs_fast(spec, y)

    ref = solve_ivp(f, (0, 1.0), a, method="DOP853", rtol=1e-12, atol=1e-14, t_eval=tr.times)
    np.testing.assert_allclose(tr.states, ref.y.T, atol=1e-9)


def test_step_underflow_on_blowup():
    ts, ys, reason = solve_ode(lambda t, y: y * y, np.array([1.0]), 2.0, 0.1)
    assert reason == "underflow"
    assert ts[-1] == pytest.approx(1.0, abs=1e-3)


def test_trajectory_invariants(rng):
    spec = KernelSpec("Szego")
    tr = integrate(spec, 0.5 * random_state(rng, 64, support=4), IntegratorControls(t_end=1.0, checkpoint_dt=0.3))
    assert np.all(np.diff(tr.times) > 0)
    assert len(tr.charges) == len(tr.states) == len(tr.times)
    assert tr.times[-1] == pytest.approx(1.0)
    np.testing.assert_allclose(tr.times, [0, 0.3, 0.6, 0.9, 1.0], atol=1e-12)
    assert tr.termination == Termination.REACHED_T_END


def test_tail_mass_stop():
    a = np.zeros(32, complex)
    a[0] = a[1] = 1
    tr = integrate(KernelSpec("Truncated"), a, IntegratorControls(t_end=50, checkpoint_dt=1.0, stop_on_tail_mass=1e-6))
    assert tr.termination == Termination.TAIL_MASS_EXCEEDED
    assert tr.charges[-1].tail_mass > 1e-6
    assert all(c.tail_mass <= 1e-6 for c in tr.charges[:-1])


def test_x_threshold_stop():
    from szegolab.manifold import ManifoldState, blowup_family, lift_L1

    ms = ManifoldState(1, blowup_family(1, 1, 0.5, 0), 0.5)
    ctl = IntegratorControls(t_end=10, checkpoint_dt=0.5, track_x=True, stop_on_x=0.6)
    tr = integrate(KernelSpec("Truncated"), lift_L1(ms, 128), ctl)
    assert tr.termination == Termination.X_THRESHOLD
    x = tr.column("x")
    assert x[-1] >= 0.6 and np.all(x[:-1] < 0.6)


def test_controls_validation():
    with pytest.raises(ValueError):
        IntegratorControls(rel_tol=0)
    with pytest.raises(ValueError):
        IntegratorControls(t_end=-1)
    c = IntegratorControls(t_end=2.0)
    assert IntegratorControls.from_dict(c.to_dict()) == c


@pytest.mark.parametrize("spec", [KernelSpec("Szego"), KernelSpec("Beta", beta=0.4), KernelSpec("Truncated"),
                                  KernelSpec("Extended", beta=0.3, gamma=1.2, delta1=0.2, delta2=0.1, alpha=0.5)],
                         ids=lambda s: s.family.value)
def test_conservation(spec, rng):
    a = 0.3 * random_state(rng, 128, support=6)
    tr = integrate(spec, a, IntegratorControls(t_end=1.0, checkpoint_dt=0.25))
    assert tr.termination == Termination.REACHED_T_END
    assert tr.charges[-1].tail_mass < 1e-9
    assert tr.relative_drift("N") <= 1e-8
    assert tr.relative_drift("E") <= 1e-8
    assert tr.relative_drift("H") <= 1e-7


@pytest.mark.parametrize("pq", [(1, 2), (2, 3), (1, 3)])
def test_residue_class_invariance(pq, rng):
    a = restrict_residue(random_state(rng, 48, support=8), *pq).amplitudes
    tr = integrate(KernelSpec("Beta", beta=0.5), a, IntegratorControls(t_end=2.0, checkpoint_dt=0.5, stop_on_tail_mass=1.0))
    assert tr.times[-1] == 2.0
    off = np.arange(48) % pq[1] != pq[0]
    assert np.max(np.abs(tr.states[:, off])) <= 1e-12


def test_odd_mode_embedding(rng):
    beta, T = 0.4, 1.5
    j = random_state(rng, 8)
    odd = np.zeros(16, complex)
    odd[1::2] = j
    # identical Galerkin systems, so the tail-mass stop is switched off
    ctl = dict(rel_tol=1e-12, abs_tol=1e-14, stop_on_tail_mass=1.0)
    tr = integrate(KernelSpec("Beta", beta=beta), odd, IntegratorControls(t_end=T, checkpoint_dt=T, **ctl))
    ref = integrate(KernelSpec("Szego"), j, IntegratorControls(t_end=(1 - beta) * T, checkpoint_dt=(1 - beta) * T, **ctl))
    assert tr.times[-1] == T
    np.testing.assert_allclose(tr.states[-1, 1::2], ref.states[-1], atol=1e-9)
    assert np.max(np.abs(tr.states[:, 0::2])) == 0.0


@settings(max_examples=8)
@given(eps=st.floats(0.3, 2.0), seed=st.integers(0, 1000))
def test_scaling_symmetry(eps, seed):
    spec = KernelSpec("Beta", beta=0.7)
    a = random_state(np.random.default_rng(seed), 24, support=5)
    T = 0.8
    ctl = dict(rel_tol=1e-12, abs_tol=1e-14, stop_on_tail_mass=1.0)
    base = integrate(spec, a, IntegratorControls(t_end=eps**2 * T, checkpoint_dt=eps**2 * T, **ctl))
    scaled = integrate(spec, eps * a, IntegratorControls(t_end=T, checkpoint_dt=T, **ctl))
    np.testing.assert_allclose(scaled.states[-1], eps * base.states[-1], atol=1e-9 * max(1, eps))


def test_stepper_clip_does_not_overshoot():
    st_ = DormandPrince(lambda t, y: -y, 0.0, np.array([1.0]), 1e-8, 1e-10)
    while st_.t < 0.3:
        assert st_.step(0.3)
    assert st_.t == 0.3
