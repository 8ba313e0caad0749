"""Per-mode energies, their dissipation identities, and the vanishing
sound-diffusivity limit.

For the difference u = phi^delta - phi^0 of a viscous and an inviscid
solution with identical data, u solves the viscous equation forced by
delta Delta phi^0_t, i.e. by -delta r^2 phi^0_t on the Fourier side.  Two energies E1 (multiplier
u_tt) and E2 (multiplier u_t) are combined as E = E1 + k E2 with
k = (tau + delta/2) / (tau (delta + tau)).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .errors import MissingAuxiliaries, StencilOutOfRange, StepTooLarge, WeightDivergence
from .kernelcore import DataTriple, PhysParams, gauss_legendre_panels
from .modesolver import ExpSum, ModeState, mode_expsum, system_matrix
from .normlab import data_cutoff, parseval_factor

GL_ORDER = 16


def coupling_k(params: PhysParams) -> float:
    tau, delta = params.tau, params.delta
    k = (tau + delta / 2.0) / (tau * (delta + tau))
    lo, hi = 1.0 / (2.0 * tau), 1.0 / tau
    assert lo - 1e-15 <= k <= hi + 1e-15, "coupling constant left [1/(2 tau), 1/tau]"
    return k


@dataclass(frozen=True)
class EnergyState:
    e1: NDArray
    e2: NDArray
    e_total: NDArray
    k: float
    aux_w: NDArray
    aux_v: NDArray
    history_term: NDArray


@dataclass(frozen=True)
class ModeTrajectory:
    """Closed-form trajectory of one or many modes.

    ``sol`` is the mode itself; ``source`` (if any) is the inviscid
    solution whose time derivative drives the difference equation.
    """

    params: PhysParams
    r: NDArray
    sol: ExpSum
    source: ExpSum | None = None

    def state(self, t) -> ModeState:
        return self.sol.state(self.params, self.r, t)

    def aux_v(self, t) -> NDArray:
        return self.sol.memory_sq(self.params, t)

    def forcing_velocity(self, t) -> NDArray:
        """phi^0_t on the Fourier side (zero for homogeneous runs)."""
        if self.source is None:
            return np.zeros(np.shape(self.sol.value(t)), dtype=complex)
        return self.source.value(t, 1)


def homogeneous_trajectory(params: PhysParams, r, d0, d1, d2) -> ModeTrajectory:
    r = np.atleast_1d(np.asarray(r, dtype=float))
    return ModeTrajectory(params, r, mode_expsum(params, r, d0, d1, d2))


def difference_trajectory(params: PhysParams, r, d0, d1, d2) -> ModeTrajectory:
    """phi^delta - phi^0 for identical data, with phi^0 kept as the source."""
    r = np.atleast_1d(np.asarray(r, dtype=float))
    inviscid = mode_expsum(params.with_delta(0.0), r, d0, d1, d2)
    viscous = mode_expsum(params, r, d0, d1, d2)
    return ModeTrajectory(params, r, viscous - inviscid, inviscid)


def difference_mode(params: PhysParams, data, r, t) -> ModeState:
    """Fourier state of phi^delta - phi^0 at time t.

    ``data`` is a triple (d0, d1, d2) of values at ``r``.
    """
    return difference_trajectory(params, r, *data).state(t)


# ----------------------------------------------------------- energies

def history_term(params: PhysParams, t, u, w, v) -> NDArray:
    """int_0^t g(t-eta) |u(t) - u(eta)|^2 d eta from the auxiliaries."""
    g = params.kernel(t)
    return params.tau * (params.m - g) * np.abs(u) ** 2 - 2.0 * np.real(u * np.conj(w)) + v


def energies_from_values(params: PhysParams, r, t, u, ut, utt, w=None, v=None) -> EnergyState:
    if w is None or v is None:
        raise MissingAuxiliaries("energies need the memory auxiliaries W and V")
    tau, delta, m = params.tau, params.delta, params.m
    r2 = np.asarray(r, dtype=float) ** 2
    g = params.kernel(t)
    if np.ndim(g):
        g = np.reshape(g, np.shape(g) + (1,) * (np.ndim(u) - np.ndim(g)))
    H = tau * (m - g) * np.abs(u) ** 2 - 2.0 * np.real(u * np.conj(w)) + v
    au2 = np.abs(u) ** 2
    e1 = (tau * np.abs(utt) ** 2 + (delta + tau) * r2 * np.abs(ut) ** 2
          + 2.0 * r2 * np.real(u * np.conj(ut)) + (r2 / tau) * H + g * r2 * au2
          - 2.0 * r2 * np.real(w * np.conj(ut)))
    e2 = (r2 * au2 + np.abs(ut) ** 2 + 2.0 * tau * np.real(utt * np.conj(ut))
          + r2 * H + tau * (g - m) * r2 * au2)
    k = coupling_k(params)
    return EnergyState(e1, e2, e1 + k * e2, k, w, v, H)


def energies(traj: ModeTrajectory, t) -> EnergyState:
    st = traj.state(t)
    return energies_from_values(traj.params, traj.r, t, st.u, st.ut, st.utt, st.w, traj.aux_v(t))


def energy_rates(traj: ModeTrajectory, t) -> tuple[NDArray, NDArray]:
    """Right-hand sides of the two dissipation identities.

    dE1/dt = -2|u_tt|^2 + 2 r^2 |u_t|^2 - r^2 H / tau^2 - (g/tau) r^2 |u|^2 + 2 Re(f conj(u_tt))
    dE2/dt = -2(delta+tau) r^2 |u_t|^2 + 2 tau |u_tt|^2 - g r^2 |u|^2 - r^2 H / tau + 2 Re(f conj(u_t))
    with forcing f = -delta r^2 phi^0_t.
    """
    p = traj.params
    st = traj.state(t)
    v = traj.aux_v(t)
    r2 = traj.r ** 2
    g = p.kernel(t)
    if np.ndim(g):
        g = g[:, None]
    H = p.tau * (p.m - g) * np.abs(st.u) ** 2 - 2.0 * np.real(st.u * np.conj(st.w)) + v
    f = -p.delta * r2 * traj.forcing_velocity(t)
    au2 = np.abs(st.u) ** 2
    d1 = (-2.0 * np.abs(st.utt) ** 2 + 2.0 * r2 * np.abs(st.ut) ** 2 - r2 * H / p.tau ** 2
          - (g / p.tau) * r2 * au2 + 2.0 * np.real(f * np.conj(st.utt)))
    d2 = (-2.0 * (p.delta + p.tau) * r2 * np.abs(st.ut) ** 2 + 2.0 * p.tau * np.abs(st.utt) ** 2
          - g * r2 * au2 - r2 * H / p.tau + 2.0 * np.real(f * np.conj(st.ut)))
    return d1, d2


def energy_balance_residual(traj: ModeTrajectory, t: float, dt: float) -> tuple[NDArray, NDArray]:
    """|central difference of E_i minus the analytic rate| at time t."""
    if dt <= 0 or t - dt < 0:
        raise StencilOutOfRange(f"stencil [t-dt, t+dt] = [{t - dt:g}, {t + dt:g}] leaves t >= 0")
    ep = energies(traj, t + dt)
    em = energies(traj, t - dt)
    d1, d2 = energy_rates(traj, t)
    fd1 = (ep.e1 - em.e1) / (2.0 * dt)
    fd2 = (ep.e2 - em.e2) / (2.0 * dt)
    return np.abs(fd1 - d1), np.abs(fd2 - d2)


def dissipation_rate(traj: ModeTrajectory, t) -> NDArray:
    """dE/dt for the combined energy."""
    d1, d2 = energy_rates(traj, t)
    return d1 + coupling_k(traj.params) * d2


def dissipation_bound_coefficient(params: PhysParams, r) -> NDArray:
    """Coefficient B(r) with dE/dt <= B(r) |phi^0_t|^2 from Young's inequality.

    B = delta ((delta + tau) r^4 + tau k^2 r^2).
    """
    r2 = np.asarray(r, dtype=float) ** 2
    k = coupling_k(params)
    return params.delta * ((params.delta + params.tau) * r2 * r2 + params.tau * k * k * r2)


def controlled_quantity(traj: ModeTrajectory, t) -> NDArray:
    """r^2 |u_t + k u|^2 + |u_tt + k u_t|^2 + g r^2 |u|^2."""
    st = traj.state(t)
    k = coupling_k(traj.params)
    g = traj.params.kernel(t)
    if np.ndim(g):
        g = g[:, None]
    r2 = traj.r ** 2
    return (r2 * np.abs(st.ut + k * st.u) ** 2 + np.abs(st.utt + k * st.ut) ** 2
            + g * r2 * np.abs(st.u) ** 2)


# ------------------------------------------------------------ oracle

def forced_oracle(params: PhysParams, r: float, forcing, t: float, dt: float,
                  y0=(0.0, 0.0, 0.0)) -> ModeState:
    """Classical RK4 on the third-order system with memory auxiliary and a
    time-dependent source ``forcing(t)`` entering as tau u_ttt = ... + f."""
    A = system_matrix(params, float(r))
    lam = np.max(np.abs(np.linalg.eigvals(A)))
    if lam * dt >= 0.5:
        raise StepTooLarge(f"|lambda|max * dt = {lam * dt:.3g} >= 0.5")
    y = np.array([*y0, 0.0], dtype=complex)
    if t == 0:
        return ModeState(0.0, r, *y)
    steps = int(math.ceil(t / dt - 1e-12))
    h = t / steps
    b = np.array([0.0, 0.0, 1.0 / params.tau, 0.0])

    def rhs(s, y):
        return A @ y + b * forcing(s)

    s = 0.0
    for _ in range(steps):
        k1 = rhs(s, y)
        k2 = rhs(s + h / 2, y + h / 2 * k1)
        k3 = rhs(s + h / 2, y + h / 2 * k2)
        k4 = rhs(s + h, y + h * k3)
        y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        s += h
    return ModeState(t, r, *y)


# --------------------------------------------------- inviscid limit

def l1_proxy(n: float, nodes, weights, values) -> NDArray:
    """(2pi)^{-n} |S^{n-1}| int r^{n-1} |f| dr, the radial majorant of sup_x |f|."""
    return parseval_factor(n) * np.sum(weights * nodes ** (n - 1) * np.abs(values), axis=-1)


def _check_weight(data: DataTriple, s0: float) -> None:
    n = data.n
    if s0 <= n + 2:
        raise WeightDivergence(f"s0 = {s0} must exceed n + 2 = {n + 2}")
    for p in (data.p0, data.p1, data.p2):
        if p.family == "algebraic_tail" and p.params[0] <= n + 1 + s0:
            raise WeightDivergence(
                f"<r>^(1+s0) weighted L1 norm diverges for tail exponent {p.params[0]}")


def inviscid_grid(data: DataTriple, t_max: float, speed: float, rmax: float = 12.0):
    """Uniform Gauss-Legendre panels resolving phases up to t_max."""
    top = data_cutoff(data, rmax)
    h = min(math.pi / (2.0 * speed * max(t_max, 1e-12)), top / 16)
    panels = int(math.ceil(top / h))
    breaks = np.linspace(0.0, top, panels + 1)
    breaks = np.concatenate([[0.0], np.geomspace(1e-5, breaks[1], 6)[:-1], breaks[1:]])
    return gauss_legendre_panels(breaks, GL_ORDER)


@dataclass(frozen=True)
class InviscidRecord:
    delta: float
    M: float
    t_at_sup: float


@dataclass(frozen=True)
class InviscidReport:
    records: tuple
    slope: float
    running_slopes: tuple


def _sup_metric(params: PhysParams, data: DataTriple, grid, t_grid) -> tuple[float, float]:
    d = data.resample(grid).stacked()
    traj = difference_trajectory(params, grid.nodes, *d)
    k = coupling_k(params)
    st = traj.state(t_grid)
    g = params.kernel(t_grid)
    r = grid.nodes
    n = data.n
    q = (l1_proxy(n, r, grid.weights, r * (st.ut + k * st.u))
         + l1_proxy(n, r, grid.weights, st.utt + k * st.ut)
         + np.sqrt(g) * l1_proxy(n, r, grid.weights, r * st.u))
    i = int(np.argmax(q))
    return float(q[i]), float(t_grid[i])


def inviscid_metrics(tau: float, m: float, deltas, data: DataTriple, s0: float | None = None,
                     t_grid=None, grid=None) -> InviscidReport:
    """M(delta) = sup_t of the three L1-proxy quantities of phi^delta - phi^0,
    and the least-squares slope of log M against log delta over delta > 0."""
    n = data.n
    s0 = n + 2.5 if s0 is None else s0
    _check_weight(data, s0)
    t_grid = np.geomspace(1e-2, 1e2 * tau, 60) if t_grid is None else np.asarray(t_grid, dtype=float)
    deltas = [float(x) for x in deltas]
    speed = math.sqrt((max(deltas) + tau) / tau)
    grid = grid or inviscid_grid(data, float(t_grid.max()), speed)
    recs = []
    for dl in deltas:
        if dl == 0:
            recs.append(InviscidRecord(0.0, 0.0, 0.0))
            continue
        p = PhysParams(tau, dl, m)
        M, ts = _sup_metric(p, data, grid, t_grid)
        recs.append(InviscidRecord(dl, M, ts))
    pos = [(r.delta, r.M) for r in recs if r.delta > 0]
    x = np.log([a for a, _ in pos])
    y = np.log([b for _, b in pos])
    slope = float(np.polyfit(x, y, 1)[0]) if len(pos) >= 2 else math.nan
    running = tuple(float(v) for v in np.diff(y) / np.diff(x)) if len(pos) >= 2 else ()
    return InviscidReport(tuple(recs), slope, running)


def finite_time_sup_diff(params: PhysParams, data: DataTriple, T: float, samples: int = 200,
                         grid=None) -> float:
    """sup over [0, T] of the L1 proxy of |phi^delta - phi^0|."""
    if T <= 0:
        return 0.0
    grid = grid or inviscid_grid(data, T, math.sqrt((params.delta + params.tau) / params.tau))
    d = data.resample(grid).stacked()
    traj = difference_trajectory(params, grid.nodes, *d)
    ts = np.linspace(0.0, T, samples + 1)
    u = traj.state(ts).u
    return float(np.max(l1_proxy(data.n, grid.nodes, grid.weights, u)))
