"""Property tests for the structural invariants of each module."""
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mgtlab.charpoly import quartic_at, roots_at
from mgtlab.expcli import compare_rates, json_bytes
from mgtlab.inviscid import controlled_quantity, coupling_k, energies, homogeneous_trajectory
from mgtlab.jmgt import FieldState, TorusGrid, linear_propagator_step
from mgtlab.kernelcore import FrequencyZones, make_params
from mgtlab.modesolver import ModeState, cramer_coeffs, evolve_mode, mode_oracle, propagate_state, third_datum
from mgtlab.normlab import fit_decay

taus = st.floats(0.1, 2.0)
deltas = st.one_of(st.just(0.0), st.floats(1e-3, 3.0))
fracs = st.floats(0.05, 0.95)  # m * tau
radii = st.floats(1e-3, 1e3)
data = st.floats(-2.0, 2.0)


@st.composite
def params(draw):
    tau = draw(taus)
    return make_params(tau, draw(deltas), draw(fracs) / tau)


@given(params(), radii)
def test_quartic_coefficients(p, r):
    q = quartic_at(p, r)
    assert q.as_tuple() == pytest.approx((p.tau ** 2, 2 * p.tau, 1 + p.tau * (p.delta + p.tau) * r * r,
                            (p.delta + 2 * p.tau) * r * r, (1 - p.m * p.tau) * r * r), rel=1e-14)


@given(params(), radii)
def test_roots_residual_sign_and_conjugation(p, r):
    cr = roots_at(p, r)
    z = cr.roots[0]
    assert np.all(cr.residuals <= 1e-10 * cr.scale)
    assert np.all(z.real < 0)
    for w in z:
        assert np.min(np.abs(np.conj(w) - z)) <= 1e-9 * max(1.0, abs(w))


@given(params(), radii)
def test_vieta(p, r):
    z = roots_at(p, r).roots[0]
    q = quartic_at(p, r)
    assert abs(z.sum() - (-2.0 / p.tau)) <= 1e-8 * max(2.0 / p.tau, np.abs(z).max())
    prod = float(q.c0) / float(q.c4)
    assert abs(np.prod(z) - prod) <= 1e-8 * max(abs(prod), np.abs(z).max() ** 4)


@given(params(), st.floats(1e-2, 50.0), data, data, data)
def test_cramer_reconstructs_data(p, r, d0, d1, d2):
    cr = roots_at(p, r)
    d3 = third_datum(p, r, d0, d1, d2)
    c = cramer_coeffs(cr, d0, d1, d2, d3).c[0]
    z = cr.roots[0]
    for k, want in enumerate((d0, d1, d2, d3)):
        assert abs(np.sum(c * z ** k) - want) <= 1e-8 * max(1.0, abs(want))


@given(params(), st.floats(1e-2, 5.0), data, data, data, st.floats(0.1, 4.0))
def test_evolve_matches_oracle(p, r, d0, d1, d2, t):
    st_ = evolve_mode(p, r, d0, d1, d2, t)
    lam = np.abs(roots_at(p, r).roots).max()
    # RK4 global error ~ t lam^5 h^4 / 120: aim well below the tolerance
    ref = mode_oracle(p, r, d0, d1, d2, t, min(0.25, (1.2e-8 / (t * lam)) ** 0.25) / lam)
    a = st_.vector()
    assert np.max(np.abs(a - ref.vector())) / max(1.0, np.max(np.abs(a))) < 1e-8


@given(params(), st.floats(1e-2, 20.0), data, data, data, st.floats(0.0, 5.0), st.floats(0.0, 5.0))
def test_semigroup(p, r, d0, d1, d2, t1, t2):
    mid = evolve_mode(p, r, d0, d1, d2, t1)
    a = propagate_state(p, ModeState(t1, r, mid.u, mid.ut, mid.utt, mid.w), t2).vector()
    b = evolve_mode(p, r, d0, d1, d2, t1 + t2).vector()
    assert np.max(np.abs(a - b)) <= 1e-8 * max(1.0, np.max(np.abs(b)))


@given(params(), st.floats(1e-2, 20.0), data, data, data)
def test_memory_auxiliary_starts_at_zero(p, r, d0, d1, d2):
    assert evolve_mode(p, r, d0, d1, d2, 0.0).w == 0


@given(params())
def test_coupling_constant_range(p):
    k = coupling_k(p)
    assert 1 / (2 * p.tau) - 1e-15 <= k <= 1 / p.tau + 1e-15


@given(params(), st.floats(1e-2, 20.0), data, data, data, st.floats(0.0, 20.0))
def test_energy_controls_quadratic_form(p, r, d0, d1, d2, t):
    traj = homogeneous_trajectory(p, r, d0, d1, d2)
    e = float(energies(traj, t).e_total[0])
    q = float(controlled_quantity(traj, t)[0])
    assert e >= -1e-12 * max(1.0, q)


@given(taus, fracs, st.floats(1e-2, 20.0), data, data, data)
def test_inviscid_energy_non_increasing(tau, frac, r, d0, d1, d2):
    p = make_params(tau, 0.0, frac / tau)
    traj = homogeneous_trajectory(p, r, d0, d1, d2)
    e = energies(traj, np.linspace(0.0, 10.0, 41)).e_total[:, 0]
    assert np.all(np.diff(e) <= 1e-10 * max(1.0, np.abs(e).max()))


@given(st.floats(1e-3, 1.0), st.floats(1.5, 100.0), st.lists(st.floats(1e-6, 1e6), min_size=1, max_size=20))
def test_zone_partition(eps, ratio, rs):
    z = FrequencyZones(eps, eps * ratio)
    r = np.sort(np.array(rs))
    cls = z.classify(r)
    assert np.all(np.isin(cls, [0, 1, 2])) and np.all(np.diff(cls) >= 0)


@given(st.floats(-2.0, 1.0), st.floats(0.1, 10.0))
def test_fit_recovers_power(exponent, scale):
    t = np.geomspace(1.0, 1e4, 12)
    fit = fit_decay(t, scale * (1 + t) ** exponent)
    assert abs(fit.exponent - exponent) < 1e-10 and fit.valid


@given(st.floats(-2.0, 2.0), st.floats(-2.0, 2.0), st.floats(0.0, 1.0))
def test_compare_rates_logic(m, e, tol):
    assert compare_rates(m, e, tol, "two").passed == (abs(m - e) <= tol)
    assert compare_rates(m, e, tol, "upper").passed == (m <= e + tol)


@given(st.dictionaries(st.text(min_size=1, max_size=5),
                       st.one_of(st.floats(allow_nan=True), st.integers(), st.text(max_size=5)),
                       max_size=6))
def test_json_stable(doc):
    assert json_bytes(doc) == json_bytes(dict(reversed(list(doc.items()))))


GRID = TorusGrid(1, 8 * math.pi, 32)


@given(params(), st.lists(st.floats(-1.0, 1.0), min_size=3 * 32, max_size=3 * 32), st.floats(0.0, 3.0),
       st.floats(0.0, 3.0))
def test_lattice_semigroup_and_reality(p, vals, t1, t2):
    f = np.array(vals).reshape(3, 32)
    c = GRID.expand(GRID.to_spectral(f))
    s0 = FieldState(GRID, c[0], c[1], c[2], np.zeros(GRID.shape, complex))
    a = linear_propagator_step(linear_propagator_step(s0, t1, p), t2, p).compact()
    b = linear_propagator_step(s0, t1 + t2, p).compact()
    scale = max(1.0, np.max(np.abs(b)))
    assert np.max(np.abs(a - b)) <= 1e-10 * scale
    phys = GRID.to_physical(b)
    assert np.max(np.abs(phys.imag)) < 1e-12 * scale
