"""Acceptance suite: quantitative checks of roots, expansions, the exact
mode solver, decay envelopes and rates, pointwise bounds, energy
identities, the vanishing-diffusivity limit, the nonlinear solver and
run-to-run determinism.

Each ``criterion_k(ctx)`` returns ``(checks, tables)``.  ``ctx.fast``
shrinks every experiment for smoke tests and the determinism rerun.
"""
from __future__ import annotations

import itertools
import math
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .charpoly import asymptotic_small, kappa, roots_at, spectral_abscissa
from .expcli import (
    CheckRecord,
    ExperimentSpec,
    RunReport,
    check_at_least,
    check_at_most,
    compare_rates,
    make_rng,
    run_isolated,
)
from .kernelcore import (
    DataTriple,
    FrequencyZones,
    PhysParams,
    gaussian_profile,
    radial_grid,
)
from .modesolver import calibrate_bounds, evolve_mode, mode_oracle, pointwise_bound, system_matrix
from .normlab import (
    default_window,
    fit_decay,
    osc_integral,
    regularity_loss_probe,
    solution_norm,
    sup_exterior_weight,
)

TAUS = (0.1, 0.5, 1.0)
DELTAS = (0.0, 0.1, 1.0)
MTAUS = (0.25, 0.5, 0.9)


def standard_sweep() -> list[PhysParams]:
    return [PhysParams(tau, delta, mt / tau) for tau, delta, mt in itertools.product(TAUS, DELTAS, MTAUS)]


@dataclass(frozen=True)
class Context:
    seed: int
    fast: bool
    threads: int = 1


# ---------------------------------------------------------------- 1 roots

def criterion_1(ctx: Context):
    r = np.geomspace(1e-3, 1e3, 60 if ctx.fast else 500)
    worst_res = worst_vieta = 0.0
    worst_abs = -math.inf
    rows = []
    for p in standard_sweep():
        cr = roots_at(p, r)
        worst_res = max(worst_res, float(np.max(cr.residuals / cr.scale)))
        z = cr.roots
        r2 = r * r
        c = np.stack([np.full_like(r, p.tau ** 2), np.full_like(r, 2 * p.tau),
                      1 + p.tau * (p.delta + p.tau) * r2, (p.delta + 2 * p.tau) * r2,
                      (1 - p.m * p.tau) * r2], axis=1)
        e1 = z.sum(axis=1)
        e2 = sum(z[:, i] * z[:, j] for i, j in itertools.combinations(range(4), 2))
        e3 = sum(z[:, i] * z[:, j] * z[:, k] for i, j, k in itertools.combinations(range(4), 3))
        e4 = z.prod(axis=1)
        # elementary symmetric functions against -c3/c4, c2/c4, -c1/c4, c0/c4
        for got, want, mag in ((e1, -c[:, 1] / c[:, 0], np.abs(z).max(axis=1)),
                               (e2, c[:, 2] / c[:, 0], np.abs(z).max(axis=1) ** 2),
                               (e3, -c[:, 3] / c[:, 0], np.abs(z).max(axis=1) ** 3),
                               (e4, c[:, 4] / c[:, 0], np.abs(z).max(axis=1) ** 4)):
            # relative to the size of the largest product term
            rel = np.abs(got - want) / np.maximum(np.abs(want), mag)
            worst_vieta = max(worst_vieta, float(rel.max()))
        ab = spectral_abscissa(p, r)
        worst_abs = max(worst_abs, ab.abscissa)
        rows.append((p.tau, p.delta, p.m * p.tau, ab.abscissa, ab.r_at_max))
    checks = [
        check_at_most("roots: max residual / scale", worst_res, 1e-10, 1),
        check_at_most("roots: max Vieta relative error", worst_vieta, 1e-8, 1),
        check_at_most("roots: max spectral abscissa", worst_abs, 0.0, 1, "strictly negative required"),
    ]
    checks[-1] = CheckRecord(checks[-1].name, worst_abs, 0.0, 0.0, bool(worst_abs < 0), 1, "strict")
    return checks, {"c1_abscissa": (["tau", "delta", "mtau", "abscissa", "r_at_max"], rows)}


# ----------------------------------------------------------- 2 asymptotics

def _osc_pair_small(p: PhysParams, r: np.ndarray) -> np.ndarray:
    """Numerical roots nearest the two-term oscillatory expansion."""
    z = roots_at(p, r).roots
    a = asymptotic_small(p, r)[:, :2]
    out = np.empty_like(a)
    for j in range(2):
        idx = np.argmin(np.abs(z - a[:, j:j + 1]), axis=1)
        out[:, j] = z[np.arange(r.size), idx]
    return out


def criterion_2(ctx: Context):
    zones = FrequencyZones()
    checks = []
    rows = []
    sweep = standard_sweep()
    worst_ratio = 0.0
    r_small = np.geomspace(zones.eps / 10, zones.eps * (1 - 1e-9), 12)
    for p in sweep:
        err = np.abs(_osc_pair_small(p, r_small) - asymptotic_small(p, r_small)[:, :2]).max(axis=1)
        scaled = err / r_small ** 3
        ratio = float(scaled.max() / scaled.min())
        worst_ratio = max(worst_ratio, ratio)
        rows.append((p.tau, p.delta, p.m * p.tau, float(scaled.min()), float(scaled.max())))
    checks.append(check_at_most("small r: spread of error / r^3 over last decade", worst_ratio, 4.0, 2))

    r_large = np.geomspace(100.0, 1000.0, 8 if ctx.fast else 20)
    worst_rel = 0.0
    for p in sweep:
        if p.delta != 0:
            continue
        z = roots_at(p, r_large).roots
        osc = z[np.arange(r_large.size), np.argmax(z.imag, axis=1)]
        pred = p.m / p.tau ** 2 / r_large ** 2
        fit = np.polyfit(np.log(r_large), np.log(-osc.real), 1)
        fitted = np.exp(np.polyval(fit, np.log(r_large)))
        worst_rel = max(worst_rel, float(np.max(np.abs(fitted / pred - 1))))
    checks.append(check_at_most("large r, delta=0: relative error of -Re(osc) vs m/tau^2 r^-2",
                                worst_rel, 0.05, 2))

    unstable = PhysParams(1.0, 0.1, 2.0, allow_unstable=True)
    kp = kappa(unstable, +1)
    re_max = float(roots_at(unstable, np.geomspace(10.0, 1e3, 20)).roots.real.max())
    checks.append(check_at_least("kappa+ for tau=1, m=2, delta=0.1", kp, 0.0, 2, "must be > 0"))
    checks[-1] = CheckRecord(checks[-1].name, kp, 0.0, 0.0, bool(kp > 0 and re_max > 0), 2,
                             f"largest Re root at high r = {re_max:.6g}")
    return checks, {"c2_small_r": (["tau", "delta", "mtau", "err_r3_min", "err_r3_max"], rows)}


# ---------------------------------------------------------------- 3 oracle

def criterion_3(ctx: Context):
    rng = make_rng(ctx.seed)
    cases = 20 if ctx.fast else 100
    worst = 0.0
    rows = []
    for i in range(cases):
        tau = float(rng.uniform(0.1, 1.0))
        delta = float(rng.choice([0.0, rng.uniform(0.0, 1.0)]))
        mtau = float(rng.uniform(0.1, 0.9))
        p = PhysParams(tau, delta, mtau / tau)
        r = float(10 ** rng.uniform(-2, 2))
        d = rng.normal(size=3) + 1j * rng.normal(size=3)
        t = float(rng.uniform(0.5, 10.0))
        lam = float(np.max(np.abs(np.linalg.eigvals(system_matrix(p, r)))))
        lam = max(1.0, lam)
        # RK4 global error ~ t lam (lam dt)^4 / 120; aim two decades below the threshold
        dt = min(0.25, (120 * 1e-10 / (t * lam)) ** 0.25) / lam
        ref = mode_oracle(p, r, *d, t, dt).vector()
        got = evolve_mode(p, r, *d, t).vector()
        rel = float(np.linalg.norm(got - ref) / np.linalg.norm(ref))
        worst = max(worst, rel)
        rows.append((i, tau, delta, mtau, r, t, rel))
    checks = [check_at_most(f"evolve_mode vs RK4 oracle, {cases} seeded cases: max relative error",
                            worst, 1e-8, 3)]
    return checks, {"c3_oracle": (["case", "tau", "delta", "mtau", "r", "t", "rel_err"], rows)}


# ------------------------------------------------------- 4 lemma envelopes

OSC_C = 2.0
OSC_EPS = (0.25, 0.5)
EXTERIOR_C = 4.0


def _osc_norms(n, s, c, eps, times):
    return np.sqrt([osc_integral(n, s, c, float(t), eps) for t in times])


def criterion_4(ctx: Context):
    times = default_window(points=12 if ctx.fast else 25)
    checks = []
    rows = []
    cases = ((1, 0.0, 0.5, "two"), (3, 0.0, -0.25, "two"), (3, 1.0, -0.75, "two"),
             (2, 0.4, -1.0 / 6.0, "upper"))
    for eps in OSC_EPS:
        for n, s, want, sided in cases:
            v = _osc_norms(n, s, OSC_C, eps, times)
            fit = fit_decay(times, v)
            checks.append(compare_rates(fit, want, 0.05, sided,
                                        f"oscillatory integral n={n}, s={s:g}, eps={eps:g}", 4))
            rows.extend((n, s, eps, t, x) for t, x in zip(times, v))
        v = _osc_norms(2, 0.0, OSC_C, eps, times)
        flat = v / np.sqrt(np.log(np.e + times))
        spread = float(flat.max() / flat.min())
        checks.append(check_at_most(f"oscillatory integral n=2, s=0, eps={eps:g}: "
                                    "max/min of norm / sqrt(ln(e+t))", spread, 1.10, 4))
        rows.extend((2, 0.0, eps, t, x) for t, x in zip(times, v))
    w = [sup_exterior_weight(2.0, EXTERIOR_C, float(t), FrequencyZones().cap_n) for t in times]
    checks.append(compare_rates(fit_decay(times, w), -1.0, 0.02, "two",
                                "exterior weight sup r^-2 exp(-c t / r^2)", 4))
    return checks, {"c4_oscint": (["n", "s", "eps", "t", "norm"], rows)}


# ----------------------------------------------------------- 5 decay rates

def gaussian_triple(n: float, width: float = 1.0, grid=None) -> DataTriple:
    grid = grid or radial_grid(12.0, 1024)
    g = gaussian_profile(n, 1.0, width, grid)
    return DataTriple(g, g, g)


def criterion_5(ctx: Context):
    checks = []
    rows = []
    times = default_window(points=12 if ctx.fast else 25)
    p = PhysParams(1.0, 1.0, 0.5)
    data = gaussian_triple(3, grid=radial_grid(12.0, 512 if ctx.fast else 1024))
    for k, want in ((0, -0.25), (1, -0.75)):
        v = solution_norm(p, data, times, 0.0, k)
        checks.append(compare_rates(fit_decay(times, v), want, 0.05, "two",
                                    f"Gaussian data, delta=1, n=3: L2 norm of d^{k}/dt^{k} phi", 5))
        rows.extend(("viscous", k, t, x) for t, x in zip(times, v))
    p0 = p.with_delta(0.0)
    for gamma in (0.5, 1.0):
        res = regularity_loss_probe(p0, gamma, panels=200 if ctx.fast else 600)
        checks.append(compare_rates(res.fit, res.expected, 0.1, "two",
                                    f"regularity loss, delta=0, gamma={gamma:g}: exterior H^2-dot norm", 5))
        checks.append(CheckRecord(f"regularity loss, gamma={gamma:g}: delta=0.1 contrast decays exponentially",
                                  res.contrast_rate, 0.0, 0.0,
                                  bool(res.contrast_rate < 0 and res.contrast_r2 > 0.99), 5,
                                  f"R^2 = {res.contrast_r2:.6f}"))
        rows.extend((f"inviscid_gamma_{gamma:g}", 0, t, x) for t, x in zip(res.times, res.norms))
    return checks, {"c5_decay": (["run", "k", "t", "norm"], rows)}


# -------------------------------------------------- 6 pointwise domination

def _calibrate_slots(p: PhysParams, zones: FrequencyZones, r, t):
    """Largest calibrated constant per zone over unit data in each slot."""
    from .modesolver import BoundCalibration, ZoneBound

    merged: dict = {}
    for slot in range(3):
        def data_fn(rr, slot=slot):
            d = [np.zeros_like(rr), np.zeros_like(rr), np.zeros_like(rr)]
            d[slot] = np.ones_like(rr)
            return d
        cal = calibrate_bounds(p, zones, r, t, data_fn)
        for z, zb in cal.per_zone.items():
            if z not in merged or zb.C > merged[z].C:
                merged[z] = ZoneBound(zb.C, zb.c_slow, zb.c_fast)
    return BoundCalibration(p, zones, merged)


def criterion_6(ctx: Context):
    zones = FrequencyZones()
    rng = make_rng(ctx.seed)
    r_cal = np.geomspace(1e-3, 1e3, 60 if ctx.fast else 160)
    t_cal = np.linspace(0.0, 60.0, 40 if ctx.fast else 121)
    r_chk = np.geomspace(1.1e-3, 0.9e3, 50)
    t_chk = np.linspace(0.25, 50.0, 50)
    sweep = standard_sweep()[::9] if ctx.fast else standard_sweep()
    worst = 0.0
    rows = []
    for p in sweep:
        cal = _calibrate_slots(p, zones, r_cal, t_cal)
        d = rng.normal(size=(3, r_chk.size)) + 1j * rng.normal(size=(3, r_chk.size))
        u = evolve_mode(p, r_chk, *d, t_chk).u
        bound = pointwise_bound(p, zones, r_chk[None, :], t_chk[:, None], np.abs(d), cal)
        ratio = float(np.max(np.abs(u) / bound))
        worst = max(worst, ratio)
        rows.append((p.tau, p.delta, p.m * p.tau, ratio,
                     *(cal.per_zone[z].C for z in sorted(cal.per_zone))))
    checks = [check_at_most(f"max |u| / calibrated bound on 50x50 grid over {len(sweep)} sweep members",
                            worst, 1.0, 6)]
    return checks, {"c6_domination": (["tau", "delta", "mtau", "max_ratio", "C_interior",
                                       "C_bounded", "C_exterior"], rows)}


# ------------------------------------------------------ 7 energy identities

def criterion_7(ctx: Context):
    from .inviscid import (
        coupling_k,
        difference_trajectory,
        dissipation_rate,
        energies,
        energy_balance_residual,
        homogeneous_trajectory,
    )

    rng = make_rng(ctx.seed)
    checks = []
    rows = []
    viscous = [p for p in standard_sweep() if p.delta > 0]
    if ctx.fast:
        viscous = viscous[::6]
    r_modes = np.array([0.3, 1.0, 3.0])
    dts = (2e-2, 1e-2, 5e-3)
    orders = []
    for p in viscous:
        tr = difference_trajectory(p, r_modes, 1.0, 0.5, -0.2)
        res = [np.concatenate(energy_balance_residual(tr, 2.0, dt)) for dt in dts]
        e = energies(tr, 2.0)
        scale = np.concatenate([np.abs(e.e1), np.abs(e.e2)])
        for a, b, dt in zip(res[:-1], res[1:], dts[1:]):
            # residuals at the round-off floor of the central difference carry no order
            keep = b > 1e6 * np.finfo(float).eps * scale / dt
            o = np.log2(a[keep] / b[keep])
            orders.extend(o.tolist())
            rows.extend((p.tau, p.delta, p.m * p.tau, float(x)) for x in o)
    orders = np.array(orders)
    worst = float(orders[np.argmax(np.abs(orders - 2.0))])
    checks.append(compare_rates(worst, 2.0, 0.2, "two",
                                "energy identity residuals: observed order (worst case)", 7))

    # dE/dt <= C delta r^2 (1 + r^2) |phi^0_t|^2 with C = max(delta + tau, tau k^2)
    r = np.geomspace(1e-2, 1e2, 20)
    t = np.linspace(0.0, 20.0, 81)
    worst_ratio = -math.inf
    for p in viscous:
        d = rng.normal(size=(3, r.size)) + 1j * rng.normal(size=(3, r.size))
        tr = difference_trajectory(p, r, *d)
        k = coupling_k(p)
        C = max(p.delta + p.tau, p.tau * k * k)
        rate = dissipation_rate(tr, t)
        bound = C * p.delta * r ** 2 * (1 + r ** 2) * np.abs(tr.forcing_velocity(t)) ** 2
        scale = np.abs(energies(tr, t).e_total).max() + 1e-300
        worst_ratio = max(worst_ratio, float(np.max((rate - bound) / scale)))
    checks.append(check_at_most("max of (dE/dt - C delta r^2 (1+r^2) |phi0_t|^2) / max E",
                                worst_ratio, 1e-10, 7))

    inviscid = [p for p in standard_sweep() if p.delta == 0]
    worst_rise = -math.inf
    t = np.linspace(0.0, 20.0, 401)
    for p in inviscid:
        rm = 10 ** rng.uniform(-2, 2, size=20)
        d = rng.normal(size=(3, 20)) + 1j * rng.normal(size=(3, 20))
        e = energies(homogeneous_trajectory(p, rm, *d), t).e_total
        rise = np.diff(e, axis=0) / e[0][None, :]
        worst_rise = max(worst_rise, float(rise.max()))
    checks.append(check_at_most("delta=0: largest relative increase of E between samples (20 modes)",
                                worst_rise, 1e-12, 7))
    return checks, {"c7_orders": (["tau", "delta", "mtau", "order"], rows)}


# ---------------------------------------------------- 8 vanishing diffusivity

INVISCID_DELTAS = (1e-1, 1e-2, 1e-3, 1e-4)


def criterion_8(ctx: Context):
    from .inviscid import finite_time_sup_diff, inviscid_metrics

    tau, m = 1.0, 0.5
    data = gaussian_triple(3)
    t_grid = np.geomspace(1e-2, 1e2 * tau, 30 if ctx.fast else 60)
    rep = inviscid_metrics(tau, m, INVISCID_DELTAS, data, t_grid=t_grid)
    checks = [compare_rates(rep.slope, 0.5, 0.05, "two",
                            "slope of log M(delta) vs log delta, delta in 1e-1..1e-4", 8)]
    rows = [("M", rec.delta, rec.M, rec.t_at_sup) for rec in rep.records]

    Ts = np.linspace(2 * tau, 10 * tau, 5 if ctx.fast else 9)
    for delta in (1e-1, 1e-2):
        p = PhysParams(tau, delta, m)
        sup = np.array([finite_time_sup_diff(p, data, float(T)) for T in Ts])
        growth = float(np.polyfit(Ts, np.log(sup), 1)[0])
        checks.append(compare_rates(growth, 1.0 / (2 * tau), 0.0, "upper",
                                    f"finite-time sup growth rate in T, delta={delta:g}", 8))
        rows.extend(("sup", delta, float(s), float(T)) for s, T in zip(sup, Ts))
    return checks, {"c8_inviscid": (["quantity", "delta", "value", "time"], rows)}


# ------------------------------------------------------------ 9 nonlinear

NONLINEAR_PARAMS = (1.0, 1.0, 0.5)
AMPLITUDE = 1e-2


def _nonlinear_setups(fast: bool) -> dict:
    """(n, box length, points, ETD step) per dimension."""
    if fast:
        return {1: (1, 16 * math.pi, 256, 0.0125), 2: (2, 32 * math.pi, 64, 0.0125)}
    return {1: (1, 64 * math.pi, 1024, 0.0125), 2: (2, 128 * math.pi, 512, 0.025)}


def _picard_samples(T: float, h: float = 0.05) -> int:
    return 2 * int(math.ceil(T / h / 2)) + 1


def criterion_9(ctx: Context):
    from .jmgt import (
        NonlinearConfig,
        TorusGrid,
        etd_solve,
        gaussian_data,
        lattice_eigen_distance,
        nonlinear_decay_report,
        picard_solve,
        relative_difference,
        trust_time,
    )

    p = PhysParams(*NONLINEAR_PARAMS)
    west = NonlinearConfig("westervelt", 0.5)
    kuzn = NonlinearConfig("kuznetsov", 0.5)
    setups = _nonlinear_setups(ctx.fast)
    checks = []
    rows = []
    expected_psi_t = {1: -0.25, 2: -0.5}

    for n, (dim, L, N, dt) in setups.items():
        grid = TorusGrid(dim, L, N)
        checks.append(check_at_most(f"n={n}: lattice eigenvalues vs characteristic roots (set distance)",
                                    lattice_eigen_distance(grid, p), 1e-8, 9))
        data = gaussian_data(grid, AMPLITUDE)
        T = trust_time(grid, p)
        samples = np.concatenate([[0.0], np.geomspace(1.0, T, 60)])
        nonlin = etd_solve(data, p, west, dt, T, t_samples=samples)
        linear = etd_solve(data, p, None, dt, T, t_samples=samples)
        checks.append(check_at_most(f"n={n}: largest imaginary part of physical fields",
                                    nonlin.diagnostics["max_imag"], 1e-12, 9))
        rep_nl = nonlinear_decay_report(nonlin, n, 0.0)
        rep_lin = nonlinear_decay_report(linear, n, 0.0)
        checks.append(compare_rates(rep_nl["psi_t_L2"].fit, expected_psi_t[n], 0.1, "two",
                                    f"Westervelt n={n}: L2 decay exponent of psi_t", 9))
        checks.append(compare_rates(rep_nl["psi_t_L2"].fit.exponent, rep_lin["psi_t_L2"].fit.exponent,
                                    0.05, "two", f"Westervelt n={n}: nonlinear vs linear psi_t exponent", 9))
        for name, rc in rep_nl.items():
            rows.append((n, name, rc.fit.exponent, rep_lin[name].fit.exponent, rc.expected,
                         int(rc.window_limited)))

        if n == 1 or ctx.fast:
            # full Picard and cross-validation where storing every sample is affordable
            pic = picard_solve(data, p, west, T, t_samples=_picard_samples(T))
            checks.append(check_at_most(f"n={n}: Picard contraction factor at amplitude {AMPLITUDE:g}",
                                        pic.contraction, 0.5, 9, f"iterations={pic.iterations}"))
            checks.append(check_at_most(f"n={n}: Picard iterations", pic.iterations, 10, 9))
            checks.append(check_at_most(f"n={n}: Picard vs ETD relative psi_t difference at T",
                                        relative_difference(nonlin.final, pic.final), 1e-6, 9))
        else:
            # the same cross-validation on a coarser lattice of the same dimension
            coarse = TorusGrid(dim, 32 * math.pi, 64)
            cdata = gaussian_data(coarse, AMPLITUDE)
            Tc = trust_time(coarse, p)
            pic = picard_solve(cdata, p, west, Tc, t_samples=_picard_samples(Tc))
            etd_c = etd_solve(cdata, p, west, 0.0125, Tc)
            checks.append(check_at_most(f"n={n} (64^2 lattice): Picard contraction factor",
                                        pic.contraction, 0.5, 9, f"iterations={pic.iterations}"))
            checks.append(check_at_most(f"n={n} (64^2 lattice): Picard iterations", pic.iterations, 10, 9))
            checks.append(check_at_most(f"n={n} (64^2 lattice): Picard vs ETD relative psi_t difference",
                                        relative_difference(etd_c.final, pic.final), 1e-6, 9))
            # step refinement of the production run over an initial stretch
            short = etd_solve(data, p, west, dt, 20.0, t_samples=[20.0], refine_tol=1e-6)
            checks.append(check_at_most(f"n={n}: ETD change when halving dt (T=20)",
                                        short.diagnostics["refinement_change"], 1e-6, 9))

    # Kuznetsov cross-validation and the smallness ladder, one dimension
    dim, L, N, dt = setups[1]
    grid = TorusGrid(dim, L, N)
    T = trust_time(grid, p)
    data = gaussian_data(grid, AMPLITUDE)
    pk = picard_solve(data, p, kuzn, T, t_samples=_picard_samples(T))
    ek = etd_solve(data, p, kuzn, dt, T)
    checks.append(check_at_most("Kuznetsov n=1: Picard vs ETD relative psi_t difference at T",
                                relative_difference(ek.final, pk.final), 1e-6, 9,
                                f"factor={pk.contraction:.3g}, iterations={pk.iterations}"))
    factors = []
    for amp in (AMPLITUDE, AMPLITUDE / 2, AMPLITUDE / 4):
        tr = picard_solve(gaussian_data(grid, amp), p, west, T, t_samples=_picard_samples(T))
        factors.append(tr.contraction)
        rows.append((1, f"contraction_amplitude_{amp:g}", tr.contraction, math.nan, math.nan, 0))
    monotone = all(b < a for a, b in zip(factors[:-1], factors[1:]))
    checks.append(CheckRecord("Picard contraction factor decreases along amplitude ladder",
                              factors[-1], factors[0], 0.0, monotone, 9,
                              ", ".join(f"{f:.4g}" for f in factors)))
    return checks, {"c9_nonlinear": (["n", "quantity", "nonlinear", "linear", "expected",
                                      "window_limited"], rows)}


# ---------------------------------------------------------- 10 determinism

def criterion_10(ctx: Context):
    from .expcli import load_spec, run

    spec = load_spec({"kind": "accept", "seed": ctx.seed,
                      "accept": {"criteria": list(range(1, 10)), "fast": True}})
    with tempfile.TemporaryDirectory() as tmp:
        a, b = Path(tmp, "a"), Path(tmp, "b")
        run(spec, a)
        run(spec, b)
        names = sorted(f.name for f in a.iterdir() if f.name != "timing.json")
        same = [f for f in names if (a / f).read_bytes() == (b / f).read_bytes()]
        missing = sorted(set(names) ^ set(f.name for f in b.iterdir() if f.name != "timing.json"))
    ok = len(same) == len(names) and not missing and len(names) > 0
    return [CheckRecord("repeated fast accept runs: byte-identical artifacts", len(same), len(names),
                        0.0, ok, 10, f"{len(names)} files compared")], {}


# ------------------------------------------------------------------ suite

CRITERIA = {1: criterion_1, 2: criterion_2, 3: criterion_3, 4: criterion_4, 5: criterion_5,
            6: criterion_6, 7: criterion_7, 8: criterion_8, 9: criterion_9, 10: criterion_10}


def run_suite(spec: ExperimentSpec, report: RunReport) -> None:
    block = spec.block("accept")
    ctx = Context(spec.seed, bool(block["fast"]), spec.threads)
    tasks = [(f"criterion {c}", c, (lambda c=c: CRITERIA[c](ctx))) for c in sorted(block["criteria"])]
    for checks, tables in run_isolated(tasks, spec.threads):
        report.checks.extend(checks)
        report.tables.update(tables)
