import numpy as np
import pytest

from mgtlab.errors import MissingAuxiliaries, StencilOutOfRange, WeightDivergence
from mgtlab.inviscid import (
    coupling_k,
    difference_mode,
    difference_trajectory,
    energies,
    energies_from_values,
    energy_balance_residual,
    finite_time_sup_diff,
    forced_oracle,
    homogeneous_trajectory,
    inviscid_metrics,
)
from mgtlab.kernelcore import DataTriple, algebraic_tail_profile, gaussian_profile, make_params, radial_grid
from mgtlab.modesolver import mode_expsum


@pytest.fixture(scope="module")
def gauss3():
    g = gaussian_profile(3, 1.0, 1.0, radial_grid(12.0, 512))
    return DataTriple(g, g, g)


def test_coupling_k():
    assert coupling_k(make_params(1.0, 1.0, 0.5)) == pytest.approx(0.75)
    assert coupling_k(make_params(0.7, 0.0, 0.5)) == pytest.approx(1 / 0.7)
    assert coupling_k(make_params(0.7, 1e12, 0.5)) == pytest.approx(1 / 1.4, rel=1e-9)


def test_energies_zero_state():
    p = make_params(1.0, 1.0, 0.5)
    e = energies_from_values(p, 2.0, 1.0, 0j, 0j, 0j, 0j, 0.0)
    assert e.e1 == 0 and e.e2 == 0 and e.e_total == 0
    with pytest.raises(MissingAuxiliaries):
        energies_from_values(p, 2.0, 1.0, 0j, 0j, 0j)


def test_energy_at_start():
    p = make_params(0.8, 0.4, 0.9)
    r, d = 1.7, (0.3 + 0.1j, -0.5, 0.25j)
    e = energies(homogeneous_trajectory(p, r, *d), 0.0)
    want = (p.tau * abs(d[2]) ** 2 + (p.delta + p.tau) * r * r * abs(d[1]) ** 2
            + 2 * r * r * np.real(d[0] * np.conj(d[1])) + p.m * r * r * abs(d[0]) ** 2)
    assert e.e1[0] == pytest.approx(want, rel=1e-12)


def test_balance_residual_second_order():
    p = make_params(1.0, 0.5, 0.5)
    traj = homogeneous_trajectory(p, [0.3, 2.0], 1.0, 0.5, -0.2)
    a = np.array(energy_balance_residual(traj, 1.0, 1e-2))
    b = np.array(energy_balance_residual(traj, 1.0, 5e-3))
    np.testing.assert_allclose(a / b, 4.0, rtol=0.05)


def test_balance_residual_zero_state_and_stencil():
    p = make_params(1.0, 0.5, 0.5)
    traj = homogeneous_trajectory(p, [1.0], 0.0, 0.0, 0.0)
    r1, r2 = energy_balance_residual(traj, 1.0, 0.1)
    assert np.all(r1 == 0) and np.all(r2 == 0)
    with pytest.raises(StencilOutOfRange):
        energy_balance_residual(traj, 0.05, 0.1)


def test_inviscid_forcing_drops_out():
    p = make_params(1.0, 0.0, 0.5)
    traj = difference_trajectory(p, [1.0], 1.0, 0.0, 0.0)
    assert np.all(np.abs(traj.state(np.linspace(0, 5, 6)).u) < 1e-13)


def test_difference_mode_trivial():
    p = make_params(1.0, 0.1, 0.5)
    st = difference_mode(p, (1.0, 1.0, 1.0), [0.5, 2.0], 0.0)
    assert np.max(np.abs(st.vector())) < 1e-13
    st0 = difference_mode(p.with_delta(0.0), (1.0, 1.0, 1.0), [0.5, 2.0], 3.0)
    assert np.max(np.abs(st0.vector())) == 0.0


def test_difference_matches_forced_oracle():
    p = make_params(1.0, 0.01, 0.5)
    r = 1.0
    d = np.exp(-0.5) * np.ones(3)  # Gaussian data exp(-r^2/2) at r = 1
    inviscid = mode_expsum(p.with_delta(0.0), r, *d)
    forcing = lambda s: -p.delta * r * r * inviscid.value(s, 1)[0]  # noqa: E731
    ref = forced_oracle(p, r, forcing, 5.0, 1e-3)
    got = difference_mode(p, d, r, 5.0)
    assert np.max(np.abs(got.vector()[0] - ref.vector())) < 1e-8


def test_inviscid_metrics_zero_delta(gauss3):
    rep = inviscid_metrics(1.0, 0.5, [0.0, 1e-2, 1e-3], gauss3)
    assert rep.records[0].M == 0.0


def test_inviscid_metrics_window_extension(gauss3):
    a = inviscid_metrics(1.0, 0.5, [1e-2], gauss3, t_grid=np.geomspace(1e-2, 100, 60))
    b = inviscid_metrics(1.0, 0.5, [1e-2], gauss3, t_grid=np.geomspace(1e-2, 200, 70))
    assert b.records[0].M == pytest.approx(a.records[0].M, rel=0.01)


def test_weight_divergence():
    grid = radial_grid(12.0, 512)
    tail = algebraic_tail_profile(3, 6.0, grid)
    with pytest.raises(WeightDivergence):
        inviscid_metrics(1.0, 0.5, [1e-2], DataTriple(tail, tail, tail))


@pytest.mark.xfail(strict=True, reason="the difference is O(delta) for admissible smooth data")
def test_inviscid_metrics_sqrt_delta(gauss3):
    rep = inviscid_metrics(1.0, 0.5, [1e-1, 1e-2, 1e-3, 1e-4], gauss3)
    assert rep.slope == pytest.approx(0.5, abs=0.05)


@pytest.mark.xfail(strict=True, reason="the difference is O(delta) for admissible smooth data")
def test_finite_time_sqrt_delta(gauss3):
    deltas = [1e-1, 1e-2, 1e-3, 1e-4]
    M = [finite_time_sup_diff(make_params(1.0, d, 0.5), gauss3, 5.0) for d in deltas]
    assert np.polyfit(np.log(deltas), np.log(M), 1)[0] == pytest.approx(0.5, abs=0.05)


def test_finite_time_growth(gauss3):
    p = make_params(1.0, 0.1, 0.5)
    T = np.linspace(2.0, 10.0, 9)
    M = np.array([finite_time_sup_diff(p, gauss3, tv) for tv in T])
    assert np.polyfit(T, np.log(M), 1)[0] <= 1 / (2 * p.tau)
    assert finite_time_sup_diff(p, gauss3, 0.0) == 0.0
