import numpy as np
import pytest

from mgtlab.charpoly import roots_at
from mgtlab.errors import DegenerateRoots, StepTooLarge, UncalibratedConstants
from mgtlab.kernelcore import FrequencyZones, make_params
from mgtlab.modesolver import (
    ModeState,
    calibrate_bounds,
    cramer_coeffs,
    expdiff,
    evolve_mode,
    kernel_hat,
    mode_oracle,
    pointwise_bound,
    propagate_state,
    system_matrix,
    third_datum,
)


def test_third_datum_examples():
    assert third_datum(make_params(0.5, 0.3, 1.0), 2.0, 0, 0, 1) == pytest.approx(-2.0)
    assert third_datum(make_params(1.0, 1.0, 0.5), 1.0, 1, 0, 0) == pytest.approx(-1.0)
    assert third_datum(make_params(0.5, 0.0, 1.0), 2.0, 0, 1, 0) == pytest.approx(-4.0)


def test_cramer_reconstruction():
    p = make_params(1.0, 1.0, 0.5)
    cr = roots_at(p, 1.0)
    co = cramer_coeffs(cr, 1, 0, 0, 0)
    assert np.sum(co.c) == pytest.approx(1.0, abs=1e-12)
    assert np.sum(co.c * cr.roots) == pytest.approx(0.0, abs=1e-12)
    d = np.array([1.0, 0.0, 0.0, third_datum(p, 1.0, 1, 0, 0)])
    V = np.vander(cr.roots[0], 4, increasing=True).T
    dense = np.linalg.solve(V, d)
    np.testing.assert_allclose(cramer_coeffs(cr, *d).c[0], dense, atol=1e-10)


def test_cramer_degenerate():
    with pytest.raises(DegenerateRoots):
        cramer_coeffs(np.array([[-1.0, -1.0, -2.0, -3.0]]), 1, 0, 0, 0)


def test_evolve_initial_state():
    st = evolve_mode(make_params(1.0, 1.0, 0.5), 1.3, 0.2, -0.4, 0.7, 0.0)
    assert (st.u, st.ut, st.utt, st.w) == pytest.approx((0.2, -0.4, 0.7, 0.0), abs=1e-12)


def test_evolve_vs_oracle_reference_mode():
    p = make_params(1.0, 1.0, 0.5)
    st = evolve_mode(p, 1.0, 1, 0, 0, 1.0)
    ref = mode_oracle(p, 1.0, 1, 0, 0, 1.0, 1e-3)
    a, b = st.vector(), ref.vector()
    assert np.max(np.abs(a - b)) / max(1.0, np.max(np.abs(a))) < 1e-8


def test_evolve_zero_frequency_limit():
    p = make_params(1.0, 1.0, 0.5)
    t = np.linspace(0.0, 10.0, 11)
    st = evolve_mode(p, 1e-6, 1, 0, 0, t)
    np.testing.assert_allclose(st.u, 1.0, atol=1e-8)
    ref = mode_oracle(p, 1e-6, 1, 0, 0, 10.0, 1e-2)
    assert abs(ref.u - st.u[-1]) < 1e-8


def test_oracle_random_inviscid_case():
    p = make_params(0.5, 0.0, 1.0)
    rng = np.random.default_rng(7)
    d = rng.standard_normal(3)
    st = evolve_mode(p, 5.0, *d, 2.0)
    ref = mode_oracle(p, 5.0, *d, 2.0, 2e-4)
    assert np.max(np.abs(st.vector() - ref.vector())) / max(1.0, np.max(np.abs(st.vector()))) < 1e-8


def test_oracle_rejects_large_step():
    with pytest.raises(StepTooLarge):
        mode_oracle(make_params(1.0, 1.0, 0.5), 10.0, 1, 0, 0, 1.0, 0.5)
    st = mode_oracle(make_params(1.0, 1.0, 0.5), 1.0, 0.3, 0.2, 0.1, 0.0, 0.01)
    assert (st.u, st.ut, st.utt, st.w) == (0.3, 0.2, 0.1, 0.0)


def test_kernel_hat_initial_values():
    p = make_params(1.0, 1.0, 0.5)
    for j in range(3):
        for k in range(3):
            want = 1.0 if j == k else 0.0
            assert kernel_hat(p, 0.7, 0.0, j, k) == pytest.approx(want, abs=1e-12)


def test_system_matrix_eigenvalues():
    p = make_params(0.5, 0.1, 1.5)
    for r in (0.01, 0.3, 3.0, 40.0):
        lam = np.sort_complex(np.linalg.eigvals(system_matrix(p, r)))
        ref = np.sort_complex(roots_at(p, r).roots[0])
        assert np.max(np.abs(lam - ref)) / max(1.0, np.abs(ref).max()) < 1e-8


def test_semigroup():
    p = make_params(1.0, 1.0, 0.5)
    r = 2.5
    mid = evolve_mode(p, r, 1.0, -0.5, 0.25, 1.5)
    restarted = propagate_state(p, ModeState(1.5, r, mid.u, mid.ut, mid.utt, mid.w), 2.0)
    direct = evolve_mode(p, r, 1.0, -0.5, 0.25, 3.5)
    assert np.max(np.abs(restarted.vector() - direct.vector())) < 1e-8


def test_expdiff_subnormal_time():
    # complex division by a subnormal exponent difference used to give nan
    a, b = np.array([-0.5 + 1j]), np.array([-1.0 + 0j])
    out = expdiff(a, b, np.array([1.1125369292536007e-308]))
    assert np.all(np.isfinite(out))
    assert out[0] == pytest.approx(1.1125369292536007e-308, rel=1e-12)
    t = np.array([0.5])
    ref = (np.exp(a * t) - np.exp(b * t)) / (a - b)
    assert np.allclose(expdiff(a, b, t), ref, rtol=1e-12, atol=0)


def test_pointwise_bound_requires_calibration():
    p = make_params(1.0, 1.0, 0.5)
    with pytest.raises(UncalibratedConstants):
        pointwise_bound(p, FrequencyZones(), 1.0, 1.0, (1, 1, 1), None)


def test_pointwise_bound_dominates():
    p = make_params(1.0, 1.0, 0.5)
    zones = FrequencyZones()
    r_cal = np.geomspace(1e-3, 1e3, 120)
    t_cal = np.linspace(0.0, 40.0, 81)
    data = lambda r: (np.ones_like(r), np.ones_like(r), np.ones_like(r))  # noqa: E731
    cal = calibrate_bounds(p, zones, r_cal, t_cal, data)
    r = np.geomspace(1.3e-3, 800, 50)
    t = np.linspace(0.0, 35.0, 50)
    u = evolve_mode(p, r, 1.0, 1.0, 1.0, t).u
    bound = pointwise_bound(p, zones, r[None, :], t[:, None], (1.0, 1.0, 1.0), cal)
    assert np.all(np.abs(u) <= bound)


def test_memory_auxiliary_identity():
    # r^2 W = tau u_ttt + u_tt + r^2 u + (delta + tau) r^2 u_t along the solution
    from mgtlab.modesolver import mode_expsum

    p = make_params(0.8, 0.4, 0.9)
    r = np.array([0.05, 1.0, 7.0])
    es = mode_expsum(p, r, 1.0, -0.3, 0.6)
    t = np.linspace(0.0, 6.0, 13)
    w = es.memory(p, t)
    rhs = (p.tau * es.value(t, 3) + es.value(t, 2) + r ** 2 * es.value(t, 0)
           + (p.delta + p.tau) * r ** 2 * es.value(t, 1))
    np.testing.assert_allclose(r ** 2 * w, rhs, atol=1e-10)


def test_memory_auxiliary_at_zero_frequency():
    p = make_params(0.8, 0.4, 0.9)
    t = np.array([0.0, 1.0, 4.0])
    st = evolve_mode(p, 0.0, 1.0, 0.0, 0.0, t)
    np.testing.assert_allclose(st.w, p.m * p.tau * -np.expm1(-t / p.tau), atol=1e-12)
