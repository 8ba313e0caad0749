import math

import numpy as np
import pytest

from mgtlab.errors import AliasingMaskMissing, InvalidGrid, MissingDerivatives, NoContraction, WindowTooShort
from mgtlab.jmgt import (
    FieldState,
    NonlinearConfig,
    TorusGrid,
    Trajectory,
    etd_observed_order,
    etd_solve,
    evolution_norm,
    gaussian_data,
    lattice_eigen_distance,
    linear_propagator_step,
    nonlinear_decay_report,
    nonlinearity,
    picard_solve,
    relative_difference,
    trust_time,
)
from mgtlab.kernelcore import make_params
from mgtlab.modesolver import evolve_mode

P = make_params(1.0, 1.0, 0.5)
WEST = NonlinearConfig("westervelt", 0.5)
KUZN = NonlinearConfig("Kuznetsov", 0.5)


def _zeros(grid):
    return np.zeros(grid.shape, complex)


def _cos_state(grid, psi=None):
    c = grid.expand(grid.to_spectral(np.cos(grid.x[0])))
    return FieldState(grid, _zeros(grid) if psi is None else psi, c, c.copy(), _zeros(grid))


@pytest.fixture(scope="module")
def grid1():
    return TorusGrid(1, 16 * math.pi, 256)


def test_grid_validation():
    for args in [(4, 10.0, 32), (1, 10.0, 8), (1, 10.0, 48), (1, -1.0, 32)]:
        with pytest.raises(InvalidGrid):
            TorusGrid(*args)


def test_dealias_mask():
    g = TorusGrid(1, 2 * math.pi, 64)
    k = np.abs(np.fft.fftfreq(64, 1 / 64))
    np.testing.assert_array_equal(g.mask, k <= 64 / 3)


def test_nonlinearity_zero_state(grid1):
    z = FieldState(grid1, *(_zeros(grid1) for _ in range(4)))
    assert np.all(nonlinearity(z, WEST) == 0) and np.all(nonlinearity(z, KUZN) == 0)


def test_westervelt_cos_example():
    g = TorusGrid(1, 2 * math.pi, 64)
    F = nonlinearity(_cos_state(g), WEST)
    assert F[0] == pytest.approx(1.5, abs=1e-14)
    assert F[2] == pytest.approx(0.75, abs=1e-14) and F[-2] == pytest.approx(0.75, abs=1e-14)
    others = np.delete(F, [0, 2, 62])
    assert np.max(np.abs(others)) < 1e-14


def test_kuznetsov_constant_psi():
    g = TorusGrid(1, 2 * math.pi, 64)
    psi = _zeros(g)
    psi[0] = 3.0
    Fk = nonlinearity(_cos_state(g, psi), KUZN)
    Fw = nonlinearity(_cos_state(g, psi), WEST)
    np.testing.assert_allclose(Fk, Fw * 0.5 / 1.5, atol=1e-15)


def test_kuznetsov_gradient_term():
    # psi = sin x, psi_t = cos x: 2 grad(psi).grad(psi_t) = -2 cos x sin x = -sin 2x
    g = TorusGrid(1, 2 * math.pi, 64)
    s = g.expand(g.to_spectral(np.sin(g.x[0])))
    c = g.expand(g.to_spectral(np.cos(g.x[0])))
    st = FieldState(g, s, c, _zeros(g), _zeros(g))
    F = nonlinearity(st, KUZN)
    phys = np.fft.ifft(F, norm="forward").real
    np.testing.assert_allclose(phys, -np.sin(2 * g.x[0]), atol=1e-13)


def test_aliasing_mask_missing(grid1):
    st = _cos_state(grid1)
    st.psi_t[grid1.points // 2] = 1.0
    with pytest.raises(AliasingMaskMissing):
        nonlinearity(st, WEST)


def test_masked_modes_stay_empty(grid1):
    F = nonlinearity(gaussian_data(grid1, 0.5), WEST)
    assert np.all(F[~grid1.mask] == 0)


def test_propagator_identity_and_semigroup(grid1):
    d = gaussian_data(grid1, 1.0)
    assert linear_propagator_step(d, 0.0, P) is d
    one = linear_propagator_step(d, 0.8, P)
    two = linear_propagator_step(linear_propagator_step(d, 0.4, P), 0.4, P)
    scale = np.max(np.abs(one.compact()))
    assert np.max(np.abs(one.compact() - two.compact())) < 1e-10 * scale


def test_lattice_matches_mode_evolution(grid1):
    d = gaussian_data(grid1, 1.0, slots=(1.0, -0.5, 0.25))
    t = 3.7
    lat = linear_propagator_step(d, t, P).compact()
    y0 = d.compact()
    r = np.sqrt(np.sum(grid1.kvec ** 2, axis=0))
    ref = evolve_mode(P, r, y0[0], y0[1], y0[2], t).vector().T
    assert np.max(np.abs(lat - ref)) < 1e-10 * max(1.0, np.max(np.abs(ref)))


def test_lattice_eigenvalues(grid1):
    assert lattice_eigen_distance(grid1, P) < 1e-8


def test_linear_fields_stay_real(grid1):
    d = gaussian_data(grid1, 1.0)
    st = linear_propagator_step(d, 5.0, P)
    phys = np.fft.ifft(np.stack([st.psi, st.psi_t, st.psi_tt, st.w]), norm="forward")
    assert np.max(np.abs(phys.imag)) < 1e-12


def test_picard_zero_data(grid1):
    z = FieldState(grid1, *(_zeros(grid1) for _ in range(4)))
    tr = picard_solve(z, P, WEST, 4.0)
    assert tr.iterations == 1 and np.all(tr.final.compact() == 0)


def _manufactured(grid):
    bump = grid.expand(grid.to_spectral(np.exp(-grid.x[0] ** 2 / 8.0)))
    return lambda t: 1e-3 * math.sin(t) * bump


def test_picard_manufactured_source(grid1):
    d = gaussian_data(grid1, 1e-2)
    src = _manufactured(grid1)
    T = 8.0
    pic = picard_solve(d, P, None, T, t_samples=161, source=src)
    etd = etd_solve(d, P, None, 0.0125, T, source=src)
    assert pic.iterations == 1
    assert relative_difference(etd.final, pic.final) < 1e-6


def test_etd_linear_exact_for_any_step(grid1):
    d = gaussian_data(grid1, 1.0)
    ref = linear_propagator_step(d, 6.0, P).compact()
    for dt in (2.0, 0.3):
        got = etd_solve(d, P, None, dt, 6.0).final.compact()
        assert np.max(np.abs(got - ref)) < 1e-12 * np.max(np.abs(ref))


def test_etd_order(grid1):
    assert etd_observed_order(gaussian_data(grid1, 1e-2), P, WEST, 0.2, 10.0) >= 2.0


def test_picard_small_data_n1():
    grid = TorusGrid(1, 64 * math.pi, 1024)
    d = gaussian_data(grid, 1e-2)
    T = trust_time(grid, P)
    tr = picard_solve(d, P, WEST, T, t_samples=2 * int(math.ceil(T / 0.1)) + 1)
    assert tr.contraction < 0.5 and tr.iterations <= 6
    etd = etd_solve(d, P, WEST, 0.0125, T)
    assert relative_difference(etd.final, tr.final) < 1e-6


def test_no_contraction_for_large_data(grid1):
    with pytest.raises(NoContraction):
        picard_solve(gaussian_data(grid1, 5.0), P, WEST, 10.0)


def test_evolution_norm_zero(grid1):
    z = FieldState(grid1, *(_zeros(grid1) for _ in range(4)))
    tr = etd_solve(z, P, None, 0.1, 5.0)
    assert evolution_norm(tr, "Xs", 1.0) == 0.0 and evolution_norm(tr, "Ys", 1.0) == 0.0


def test_evolution_norm_at_start(grid1):
    d = gaussian_data(grid1, 1.0, slots=(1.0, 0.5, 0.25))
    tr = etd_solve(d, P, None, 0.1, 2.0, t_samples=[0.0])
    assert tr.times.tolist() == [0.0]
    s = 0.5
    want = (tr.norm(0)[0] + tr.norm(1)[0] + tr.norm(2)[0]
            + tr.norm(0, s + 2)[0] + tr.norm(1, s + 1)[0] + tr.norm(2, s)[0])
    assert evolution_norm(tr, "Xs", s) == pytest.approx(want, rel=1e-14)
    assert tr.norm(0)[0] == pytest.approx(float(grid1.l2(d.compact()[0])), rel=1e-14)


def test_xs_norm_stable_through_window(grid1):
    d = gaussian_data(grid1, 1e-2)
    T = trust_time(grid1, P)
    vals = [evolution_norm(etd_solve(d, P, None, 0.1, f * T), "Xs", 0.0) for f in (0.25, 0.5, 1.0)]
    assert max(vals) / min(vals) < 1.05


def test_missing_derivatives(grid1):
    tr = etd_solve(gaussian_data(grid1, 1e-2), P, None, 0.1, 1.0)
    bare = Trajectory(tr.grid, tr.params, None, tr.times, {0: tr.spectra[0]}, tr.final, "linear")
    with pytest.raises(MissingDerivatives):
        evolution_norm(bare, "Xs", 0.0)


def test_decay_report_window(grid1):
    d = gaussian_data(grid1, 1e-2)
    short = etd_solve(d, P, WEST, 0.1, 4.0)
    with pytest.raises(WindowTooShort):
        nonlinear_decay_report(short, 1, 0.0)
    T = trust_time(grid1, P)
    tr = etd_solve(d, P, WEST, 0.05, T, t_samples=np.geomspace(1.0, T, 40))
    rep = nonlinear_decay_report(tr, 1, 0.0)
    assert set(rep) == {"psi_L2", "psi_t_L2", "psi_tt_L2", "psi_Hdot", "psi_t_Hdot", "psi_tt_Hdot"}
    assert rep["psi_t_L2"].expected == -0.25 and rep["psi_L2"].window_limited


def test_config_validation():
    with pytest.raises(ValueError):
        NonlinearConfig("burgers", 0.5)
    with pytest.raises(ValueError):
        NonlinearConfig("westervelt", 0.0)
    assert KUZN.kind == "kuznetsov"
