"""Single experiments behind the non-acceptance CLI subcommands.

Each runner takes a validated spec and returns (checks, tables, documents):
check records, CSV tables keyed by file stem, and extra JSON documents.
"""
from __future__ import annotations

import math

import numpy as np

from .charpoly import labelled_roots, roots_at, spectral_abscissa
from .errors import BranchAmbiguity
from .expcli import ExperimentSpec, check_at_most, compare_rates
from .kernelcore import DataTriple, PhysParams, gaussian_profile, radial_grid
from .modesolver import kernel_hat, mode_oracle, system_matrix
from .normlab import dns_exponent, fit_decay, osc_integral, solution_norm


def _params(spec: ExperimentSpec) -> PhysParams:
    p = spec.params
    return PhysParams(float(p["tau"]), float(p["delta"]), float(p["m"]))


def _times(spec: ExperimentSpec) -> np.ndarray:
    g = spec.grid
    return np.geomspace(float(g["t_min"]), float(g["t_max"]), int(g["t_points"]))


def run_roots(spec: ExperimentSpec):
    p = _params(spec)
    g = spec.grid
    r = np.geomspace(float(g["r_min"]), float(g["r_max"]), int(g["r_points"]))
    try:
        cr = labelled_roots(p, r)
        labels = cr.labels
    except BranchAmbiguity:
        cr = roots_at(p, r)
        order = np.argsort(-cr.roots.imag, axis=1, kind="stable")
        cr = type(cr)(cr.r, np.take_along_axis(cr.roots, order, axis=1), cr.residuals, cr.scale)
        labels = ("root1", "root2", "root3", "root4")
    header = ["r"] + [f"{lab}_{part}" for lab in labels for part in ("re", "im")] + ["max_residual_scaled"]
    rows = []
    for k in range(r.size):
        vals = [r[k]]
        for j in range(4):
            vals += [cr.roots[k, j].real, cr.roots[k, j].imag]
        rows.append(vals + [float(np.max(cr.residuals[k] / cr.scale[k]))])
    ab = spectral_abscissa(p, r)
    checks = [check_at_most("max residual / scale", float(np.max(cr.residuals / cr.scale)), 1e-10),
              check_at_most("spectral abscissa", ab.abscissa, 0.0, note=f"at r={ab.r_at_max:g}")]
    return checks, {"roots": (header, rows)}, {}


def run_kernels(spec: ExperimentSpec):
    p = _params(spec)
    b = spec.block("kernels")
    t = np.linspace(0.0, float(b["t_max"]), int(b["t_points"]))
    rows = []
    worst = 0.0
    for r in b["r"]:
        r = float(r)
        vals = [kernel_hat(p, r, t, slot) for slot in range(3)]
        for i, tv in enumerate(t):
            rows.append([r, tv] + [x for v in vals for x in (v[i].real, v[i].imag)])
        lam = max(1.0, float(np.max(np.abs(np.linalg.eigvals(system_matrix(p, r))))))
        T = float(t[-1])
        dt = min(0.25, (120 * 1e-10 / (max(T, 1e-12) * lam)) ** 0.25) / lam
        for slot in range(3):
            d = [0.0, 0.0, 0.0]
            d[slot] = 1.0
            ref = mode_oracle(p, r, *d, T, dt).u
            worst = max(worst, abs(vals[slot][-1] - ref) / max(abs(ref), 1e-300))
    header = ["r", "t"] + [f"K{j}_{part}" for j in range(3) for part in ("re", "im")]
    return [check_at_most("kernel vs RK4 oracle at t_max (relative)", worst, 1e-8)], {"kernels": (header, rows)}, {}


def run_decay(spec: ExperimentSpec):
    p = _params(spec)
    b = spec.block("decay")
    n, s, k = float(b["n"]), float(b["s"]), int(b["k"])
    grid = radial_grid(float(spec.grid["rmax"]), int(spec.grid["nodes"]))
    g = gaussian_profile(n, 1.0, float(b["width"]), grid)
    data = DataTriple(g, g, g)
    times = _times(spec)
    v = solution_norm(p, data, times, s, k)
    power, log_half = dns_exponent(n, s + k)
    fit = fit_decay(times, v, "power_log_half" if log_half else "power")
    checks = [compare_rates(fit, power, 0.05, "two", f"H^{s:g}-dot norm of d^{k}/dt^{k} phi, n={n:g}")]
    return checks, {"decay": (["t", "norm"], list(zip(times, v)))}, {}


def run_oscint(spec: ExperimentSpec):
    b = spec.block("oscint")
    n, s, c, eps = float(b["n"]), float(b["s"]), float(b["c"]), float(b["eps"])
    times = _times(spec)
    G = np.array([osc_integral(n, s, c, float(t), eps) for t in times])
    v = np.sqrt(G)
    power, log_half = dns_exponent(n, s)
    rows = list(zip(times, G, v))
    if log_half:
        flat = v / np.sqrt(np.log(np.e + times))
        checks = [check_at_most("max/min of norm / sqrt(ln(e+t))", float(flat.max() / flat.min()), 1.10)]
    else:
        upper = n > 2 - 2 * s and n < 3 - 2 * s
        checks = [compare_rates(fit_decay(times, v), power, 0.05, "upper" if upper else "two",
                                f"oscillatory integral exponent n={n:g}, s={s:g}")]
    return checks, {"oscint": (["t", "G", "sqrt_G"], rows)}, {}


def run_inviscid(spec: ExperimentSpec):
    from .inviscid import inviscid_metrics

    p = spec.params
    b = spec.block("inviscid")
    grid = radial_grid(float(spec.grid["rmax"]), int(spec.grid["nodes"]))
    g = gaussian_profile(float(b["n"]), 1.0, float(b["width"]), grid)
    rep = inviscid_metrics(float(p["tau"]), float(p["m"]), b["deltas"], DataTriple(g, g, g))
    rows = [(rec.delta, rec.M, rec.t_at_sup) for rec in rep.records]
    checks = [compare_rates(rep.slope, 0.5, 0.05, "two", "slope of log M(delta) vs log delta")]
    return checks, {"inviscid": (["delta", "M", "t_at_sup"], rows)}, {}


def run_nonlinear(spec: ExperimentSpec):
    from .jmgt import (
        NonlinearConfig,
        TorusGrid,
        etd_solve,
        evolution_norm,
        gaussian_data,
        nonlinear_decay_report,
        picard_solve,
        relative_difference,
        trust_time,
    )

    p = _params(spec)
    b = spec.block("nonlinear")
    cfg = NonlinearConfig(str(b["kind"]), float(b["k_ab"]))
    n = int(b["n"])
    grid = TorusGrid(n, float(b["L"]), int(b["points"]))
    data = gaussian_data(grid, float(b["amplitude"]), float(b["width_sq"]))
    T = float(b["T"]) if b["T"] is not None else trust_time(grid, p)
    samples = np.concatenate([[0.0], np.geomspace(min(1.0, T), T, 60)])
    traj = etd_solve(data, p, cfg, float(b["dt"]), T, t_samples=samples)
    s = float(b["s"])
    header = ["t", "psi_L2", "psi_t_L2", "psi_tt_L2", "psi_Hdot_s2", "psi_t_Hdot_s1", "psi_tt_Hdot_s"]
    cols = [traj.norm(0), traj.norm(1), traj.norm(2), traj.norm(0, s + 2), traj.norm(1, s + 1), traj.norm(2, s)]
    rows = [[t] + [c[i] for c in cols] for i, t in enumerate(traj.times)]
    rep = nonlinear_decay_report(traj, n, s)
    doc = {name: {"exponent": rc.fit.exponent, "expected": rc.expected, "rss": rc.fit.rss,
                  "window": list(rc.fit.window), "points": rc.fit.points,
                  "window_limited": rc.window_limited} for name, rc in rep.items()}
    doc["evolution_norms"] = {"Xs": evolution_norm(traj, "Xs", s), "Ys": evolution_norm(traj, "Ys", s)}
    tol = 0.15 if n == 3 else 0.1
    checks = [compare_rates(rep["psi_t_L2"].fit, -n / 4.0, tol, "two", "L2 decay exponent of psi_t")]
    if b["picard"]:
        h = 0.05
        pic = picard_solve(data, p, cfg, T, t_samples=2 * int(math.ceil(T / h / 2)) + 1,
                           tol=float(b["tol"]))
        doc["picard"] = {"iterations": pic.iterations, "contraction": pic.contraction}
        checks.append(check_at_most("Picard contraction factor", pic.contraction, 1.0))
        checks.append(check_at_most("Picard vs ETD relative psi_t difference at T",
                                    relative_difference(traj.final, pic.final), 1e-6))
    return checks, {"nonlinear_norms": (header, rows)}, {"decay_report": doc}


RUNNERS = {"roots": run_roots, "kernels": run_kernels, "decay": run_decay, "oscint": run_oscint,
           "inviscid": run_inviscid, "nonlinear": run_nonlinear}
