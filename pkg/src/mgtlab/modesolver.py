"""Exact evolution of single Fourier modes.

Each mode of the reduced fourth-order ODE is a sum of four exponentials
whose amplitudes solve a Vandermonde system.  The memory auxiliary
W(t) = int_0^t g(t - eta) u(eta) d eta is then available in closed form
because g is a single exponential.  An independent one-step integrator
on the original third-order integro-differential system serves as the
oracle.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
import scipy.linalg
from numpy.typing import ArrayLike, NDArray

from .charpoly import DEGENERACY_GAP, CharRoots, roots_at
from .errors import DegenerateRoots, StepTooLarge, UncalibratedConstants
from .kernelcore import FrequencyZones, PhysParams, Zone

EIG_COND_LIMIT = 1e12


@dataclass(frozen=True)
class ModeState:
    """(u, u_t, u_tt, W) of one or many modes at time ``t``."""

    t: float
    r: NDArray
    u: NDArray
    ut: NDArray
    utt: NDArray
    w: NDArray

    def vector(self) -> NDArray:
        return np.stack([self.u, self.ut, self.utt, self.w], axis=-1)


@dataclass(frozen=True)
class ModeCoeffs:
    c: NDArray        # (K, 4) amplitudes
    roots: NDArray    # (K, 4)
    cond: NDArray     # (K,) Vandermonde condition numbers


def third_datum(params: PhysParams, r, d0, d1, d2):
    """u_ttt(0) implied by the third-order equation at t = 0."""
    r2 = np.asarray(r, dtype=float) ** 2
    return (-r2 * d0 - (params.delta + params.tau) * r2 * d1 - d2) / params.tau


def vandermonde(roots: ArrayLike) -> NDArray:
    z = np.asarray(roots, dtype=complex)
    return np.stack([z ** k for k in range(4)], axis=-2)


def inverse_vandermonde(roots: ArrayLike) -> NDArray:
    """Closed-form inverse via Lagrange basis polynomials.

    Row j holds the power-basis coefficients of prod_{i!=j} (x - l_i) / (l_j - l_i).
    Raises DegenerateRoots when two roots are closer than the degeneracy gap.
    """
    z = np.atleast_2d(np.asarray(roots, dtype=complex))
    K = z.shape[0]
    inv = np.empty((K, 4, 4), dtype=complex)
    for j in range(4):
        others = [z[:, i] for i in range(4) if i != j]
        e1 = others[0] + others[1] + others[2]
        e2 = others[0] * others[1] + others[0] * others[2] + others[1] * others[2]
        e3 = others[0] * others[1] * others[2]
        denom = (z[:, j] - others[0]) * (z[:, j] - others[1]) * (z[:, j] - others[2])
        inv[:, j, 0] = -e3 / denom
        inv[:, j, 1] = e2 / denom
        inv[:, j, 2] = -e1 / denom
        inv[:, j, 3] = 1.0 / denom
    return inv


def _min_gap(z: NDArray) -> NDArray:
    return np.min(np.stack([np.abs(z[:, i] - z[:, j])
                            for i, j in itertools.combinations(range(4), 2)]), axis=0)


def cramer_coeffs(roots, d0, d1, d2, d3, with_cond: bool = True) -> ModeCoeffs:
    """Amplitudes c_j with sum_j c_j l_j^k = d_k, k = 0..3."""
    z = roots.roots if isinstance(roots, CharRoots) else np.atleast_2d(np.asarray(roots, dtype=complex))
    gap = _min_gap(z)
    if np.any(gap < DEGENERACY_GAP):
        raise DegenerateRoots(f"root gap {gap.min():.3e} below {DEGENERACY_GAP:g}")
    d = np.stack(np.broadcast_arrays(*(np.asarray(x, dtype=complex) for x in (d0, d1, d2, d3))), axis=-1)
    d = np.broadcast_to(d, (z.shape[0], 4))
    c = np.einsum("kjl,kl->kj", inverse_vandermonde(z), d)
    cond = np.linalg.cond(vandermonde(z)) if with_cond else np.full(z.shape[0], np.nan)
    return ModeCoeffs(c, z, cond)


# ------------------------------------------------- exponential-sum algebra

def expdiff(a: NDArray, b: NDArray, t: NDArray) -> NDArray:
    """(exp(a t) - exp(b t)) / (a - b), stable when (a - b) t is small."""
    a, b, t = np.broadcast_arrays(np.asarray(a, dtype=complex), np.asarray(b, dtype=complex),
                                  np.asarray(t, dtype=float))
    z = (a - b) * t
    small = np.abs(z) < 1.0
    out = np.empty(a.shape, dtype=complex)
    zs = z[small]
    # Taylor series below 1e-4 (truncation ~z^4/120); complex division by a
    # subnormal z overflows.
    tiny = np.abs(zs) < 1e-4
    safe = np.where(tiny, 1.0, zs)
    phi = np.where(tiny, 1.0 + zs * (0.5 + zs * (1.0 / 6.0 + zs / 24.0)), np.expm1(safe) / safe)
    out[small] = t[small] * np.exp(b[small] * t[small]) * phi
    big = ~small
    out[big] = (np.exp(a[big] * t[big]) - np.exp(b[big] * t[big])) / (a[big] - b[big])
    return out


@dataclass(frozen=True)
class ExpSum:
    """Per-mode exponential sums u(t) = sum_j amps[k, j] exp(rates[k, j] t).

    Time arguments may be scalars or 1-D arrays; array times give results of
    shape (T, K).
    """

    amps: NDArray
    rates: NDArray

    def _t(self, t):
        t = np.asarray(t, dtype=float)
        return t[..., None, None] if t.ndim else t

    def value(self, t, k: int = 0) -> NDArray:
        tt = self._t(t)
        return np.sum(self.amps * self.rates ** k * np.exp(self.rates * tt), axis=-1)

    def __sub__(self, other: "ExpSum") -> "ExpSum":
        return ExpSum(np.concatenate([self.amps, -other.amps], axis=-1),
                      np.concatenate([self.rates, other.rates], axis=-1))

    def scaled(self, factor) -> "ExpSum":
        return ExpSum(self.amps * np.asarray(factor)[..., None], self.rates)

    def memory(self, params: PhysParams, t) -> NDArray:
        """W(t) = int_0^t m exp(-(t-eta)/tau) u(eta) d eta."""
        tt = self._t(t)
        return params.m * np.sum(self.amps * expdiff(self.rates, -1.0 / params.tau, tt), axis=-1)

    def _pairs(self, k: int = 0):
        a = self.amps * self.rates ** k
        aa = a[..., :, None] * np.conj(a[..., None, :])
        ss = self.rates[..., :, None] + np.conj(self.rates[..., None, :])
        return aa, ss

    def memory_sq(self, params: PhysParams, t) -> NDArray:
        """V(t) = int_0^t m exp(-(t-eta)/tau) |u(eta)|^2 d eta."""
        aa, ss = self._pairs()
        tt = self._t(t)[..., None] if np.ndim(t) else t
        val = np.sum(aa * expdiff(ss, -1.0 / params.tau, tt), axis=(-1, -2))
        return params.m * val.real

    def sq_integral(self, t, k: int = 0) -> NDArray:
        """int_0^t |d^k u / dt^k|^2 d eta."""
        aa, ss = self._pairs(k)
        tt = self._t(t)[..., None] if np.ndim(t) else t
        return np.sum(aa * expdiff(ss, 0.0, tt), axis=(-1, -2)).real

    def state(self, params: PhysParams, r, t) -> ModeState:
        return ModeState(t, np.asarray(r), self.value(t, 0), self.value(t, 1),
                         self.value(t, 2), self.memory(params, t))


def mode_expsum(params: PhysParams, r, d0, d1, d2, roots: CharRoots | None = None) -> ExpSum:
    """Exponential-sum representation of the modes with data (d0, d1, d2)."""
    r = np.atleast_1d(np.asarray(r, dtype=float))
    roots = roots if roots is not None else roots_at(params, r)
    d3 = third_datum(params, r, d0, d1, d2)
    co = cramer_coeffs(roots, d0, d1, d2, d3, with_cond=False)
    return ExpSum(co.c, co.roots)


# ------------------------------------------------------ first-order system

def system_matrix(params: PhysParams, r: float) -> NDArray:
    """Generator of y' = A y for y = (u, u_t, u_tt, W)."""
    tau, delta, m = params.tau, params.delta, params.m
    r2 = r * r
    return np.array([
        [0.0, 1.0, 0.0, 0.0],
        [0.0, 0.0, 1.0, 0.0],
        [-r2 / tau, -(delta + tau) * r2 / tau, -1.0 / tau, r2 / tau],
        [m, 0.0, 0.0, -1.0 / tau],
    ])


class Propagator:
    """exp(A t) for one frequency, by eigen-decomposition when well
    conditioned and by scaling-and-squaring Pade otherwise."""

    def __init__(self, params: PhysParams, r: float):
        self.params = params
        self.r = float(r)
        self.A = system_matrix(params, r)
        lam, vec = np.linalg.eig(self.A)
        self.cond = float(np.linalg.cond(vec))
        self.diagonal = self.cond < EIG_COND_LIMIT and _min_gap(lam[None, :])[0] >= DEGENERACY_GAP
        self.eigenvalues = lam
        if self.diagonal:
            self.V = vec
            self.Vinv = np.linalg.inv(vec)

    def matrix(self, t: float) -> NDArray:
        if self.diagonal:
            return (self.V * np.exp(self.eigenvalues * t)) @ self.Vinv
        return scipy.linalg.expm(self.A * t)

    def apply(self, y: ArrayLike, t: float) -> NDArray:
        return self.matrix(t) @ np.asarray(y, dtype=complex)


def propagate_state(params: PhysParams, state: ModeState, dt: float) -> ModeState:
    """Advance a single-mode state by ``dt`` using the matrix exponential."""
    y = Propagator(params, float(state.r)).apply(state.vector(), dt)
    return ModeState(state.t + dt, state.r, *y)


def evolve_mode(params: PhysParams, r, d0, d1, d2, t) -> ModeState:
    """Exact mode values at time t.

    Non-degenerate modes use the Cramer amplitudes; the memory auxiliary is
    the closed-form convolution of the exponential sum with the kernel.
    Modes whose roots nearly coincide fall back to the matrix exponential.
    """
    scalar = np.ndim(r) == 0
    r = np.atleast_1d(np.asarray(r, dtype=float))
    d0, d1, d2 = (np.broadcast_to(np.asarray(x, dtype=complex), r.shape) for x in (d0, d1, d2))
    roots = roots_at(params, r)
    ok = roots.min_gap >= DEGENERACY_GAP
    t_arr = np.asarray(t, dtype=float)
    shape = t_arr.shape + r.shape
    out = np.zeros((4,) + shape, dtype=complex)
    if np.any(ok):
        sub = CharRoots(roots.r[ok], roots.roots[ok], roots.residuals[ok], roots.scale[ok])
        es = mode_expsum(params, r[ok], d0[ok], d1[ok], d2[ok], sub)
        st = es.state(params, r[ok], t)
        for i, f in enumerate((st.u, st.ut, st.utt, st.w)):
            out[i][..., ok] = f
    for k in np.flatnonzero(~ok):
        prop = Propagator(params, r[k])
        y0 = np.array([d0[k], d1[k], d2[k], 0.0])
        for idx, tv in np.ndenumerate(t_arr):
            out[(slice(None),) + idx + (k,)] = prop.apply(y0, float(tv))
    if scalar:
        out = out[..., 0]
        r = r[0]
    return ModeState(t, r, out[0], out[1], out[2], out[3])


def kernel_hat(params: PhysParams, r, t, slot: int, k: int = 0) -> NDArray:
    """k-th time derivative of the slot-j kernel (unit datum in slot j)."""
    if slot not in (0, 1, 2) or k not in (0, 1, 2):
        raise ValueError("slot and derivative order must lie in {0, 1, 2}")
    d = [0.0, 0.0, 0.0]
    d[slot] = 1.0
    st = evolve_mode(params, r, *d, t)
    return (st.u, st.ut, st.utt)[k]


# ------------------------------------------------------------------ oracle

def mode_oracle(params: PhysParams, r: float, d0, d1, d2, t: float, dt: float) -> ModeState:
    """Classical fourth-order Runge-Kutta on the third-order system with
    the memory auxiliary, started from (d0, d1, d2, 0).

    For a linear autonomous system one RK4 step is multiplication by the
    degree-4 Taylor polynomial of h A, so the whole run is a matrix power.
    """
    A = system_matrix(params, float(r))
    lam_max = np.max(np.abs(np.linalg.eigvals(A)))
    if lam_max * dt >= 0.5:
        raise StepTooLarge(f"|lambda|max * dt = {lam_max * dt:.3g} >= 0.5")
    y0 = np.array([d0, d1, d2, 0.0], dtype=complex)
    if t == 0:
        return ModeState(0.0, r, *y0)
    steps = int(np.ceil(t / dt - 1e-12))
    h = t / steps
    hA = h * A
    P = np.eye(4)
    term = np.eye(4)
    for j in range(1, 5):
        term = term @ hA / j
        P = P + term
    y = np.linalg.matrix_power(P, steps) @ y0
    return ModeState(t, r, *y)


# -------------------------------------------------- pointwise estimates

@dataclass(frozen=True)
class ZoneBound:
    """Constants of one zone: amplitude C, slow rate c_slow and fast rate c_fast."""

    C: float
    c_slow: float
    c_fast: float


@dataclass(frozen=True)
class BoundCalibration:
    params: PhysParams
    zones: FrequencyZones
    per_zone: dict


def _bound_shape(params: PhysParams, zones: FrequencyZones, r, t, data_abs, zb: dict):
    """Right-hand side of the pointwise estimate without the constant C.

    Each slot carries the envelope of its kernel: in the interior the
    diffusive wave part plus the exponentially damped relaxation part, in
    the bounded zone a single exponential, and at high frequency the
    delta-dependent exterior envelope.
    """
    r = np.asarray(r, dtype=float)
    t = np.asarray(t, dtype=float)
    a0, a1, a2 = (np.abs(np.asarray(x)) for x in data_abs)
    zone = zones.classify(r)
    out = np.zeros(np.broadcast(r, t).shape)
    w = np.sqrt(1.0 - params.m * params.tau)

    if Zone.INTERIOR in zb:
        z = zb[Zone.INTERIOR]
        diff = np.exp(-z.c_slow * r * r * t)
        relax = np.exp(-z.c_fast * t)
        osc = np.abs(np.sin(w * r * t)) / np.where(r > 0, r, np.inf)
        val = diff * (a0 + osc * (a1 + a2)) + relax * (r * a0 + r * a1 + a2)
        out = np.where(zone == Zone.INTERIOR, val, out)
    if Zone.BOUNDED in zb:
        z = zb[Zone.BOUNDED]
        val = np.exp(-z.c_slow * t) * (a0 + a1 + a2)
        out = np.where(zone == Zone.BOUNDED, val, out)
    if Zone.EXTERIOR in zb:
        z = zb[Zone.EXTERIOR]
        rr = np.where(r > 0, r, 1.0)
        if params.delta > 0:
            env = np.exp(-z.c_slow * t)
        else:
            env = np.exp(-z.c_slow * t / (rr * rr))
        val = (a0 + a1) / rr * env + a2 / (rr * rr) * env + np.exp(-z.c_fast * t) * (a0 + a1 / rr + a2 / (rr * rr))
        out = np.where(zone == Zone.EXTERIOR, val, out)
    return out


def decay_rates(params: PhysParams, zones: FrequencyZones, margin: float = 0.1, samples: int = 400) -> dict:
    """Rates (c_slow, c_fast) per zone read off the characteristic roots and
    shrunk by ``margin`` so that they are valid lower envelopes."""
    f = 1.0 - margin
    tau, delta, m = params.tau, params.delta, params.m
    out = {}
    # interior: diffusive rate of the wave pair, relaxation near 1/tau
    r_int = np.geomspace(1e-4, zones.eps, samples)
    ro = roots_at(params, r_int).roots
    re = -ro.real
    osc_idx = np.argsort(np.abs(ro), axis=1)
    wave = np.take_along_axis(re, osc_idx[:, :2], axis=1).min(axis=1) / r_int ** 2
    relax = np.take_along_axis(re, osc_idx[:, 2:], axis=1).min(axis=1)
    out[Zone.INTERIOR] = (f * min(wave.min(), 0.5 * (delta + 2 * m * tau * tau)), f * relax.min())
    r_bdd = np.linspace(zones.eps, zones.cap_n, samples)
    rate = (-roots_at(params, r_bdd).roots.real).min()
    out[Zone.BOUNDED] = (f * rate, f * rate)
    r_ext = np.geomspace(zones.cap_n, 1e4, samples)
    ro = roots_at(params, r_ext).roots
    re = -ro.real
    big = np.abs(ro.imag) > 1.0  # oscillatory pair at high frequency
    slow = np.where(big, re, np.inf).min(axis=1)
    fast = np.where(big, np.inf, re).min(axis=1)
    if delta > 0:
        out[Zone.EXTERIOR] = (f * min(slow.min(), fast.min()), f * fast.min())
    else:
        out[Zone.EXTERIOR] = (f * (slow * r_ext ** 2).min(), f * fast.min())
    return out


def calibrate_bounds(params: PhysParams, zones: FrequencyZones, r_grid, t_grid, data_fn,
                     margin: float = 0.1, safety: float = 2.0) -> BoundCalibration:
    """Fix c from the root real parts, then C as ``safety`` times the largest
    ratio |u| / shape over the (r, t) calibration grid, zone by zone.

    ``data_fn(r)`` returns the data triple (d0, d1, d2) at radial frequency r.
    """
    rates = decay_rates(params, zones, margin)
    r_grid = np.asarray(r_grid, dtype=float)
    t_grid = np.asarray(t_grid, dtype=float)
    d = data_fn(r_grid)
    st = evolve_mode(params, r_grid, *d, t_grid)
    per_zone = {}
    zone = zones.classify(r_grid)
    for z, (cs, cf) in rates.items():
        mask = zone == z
        if not np.any(mask):
            continue
        zb = {z: ZoneBound(1.0, cs, cf)}
        shape = _bound_shape(params, zones, r_grid[None, mask], t_grid[:, None],
                             [x[mask] for x in d], zb)
        ratio = np.abs(st.u[:, mask]) / shape
        per_zone[z] = ZoneBound(safety * max(1.0, float(np.max(ratio))), cs, cf)
    return BoundCalibration(params, zones, per_zone)


def pointwise_bound(params: PhysParams, zones: FrequencyZones, r, t, data_abs,
                    calibration: BoundCalibration | None) -> NDArray:
    """Zone-wise pointwise upper bound for |u(t, r)| with calibrated constants."""
    if calibration is None:
        raise UncalibratedConstants("pointwise_bound needs a calibration (C, c) per zone")
    needed = set(int(z) for z in np.unique(zones.classify(r)))
    missing = needed - set(int(z) for z in calibration.per_zone)
    if missing:
        raise UncalibratedConstants(f"no calibrated constants for zones {sorted(missing)}")
    shape = _bound_shape(params, zones, r, t, data_abs, calibration.per_zone)
    zone = zones.classify(np.asarray(r, dtype=float))
    C = np.zeros(np.shape(zone))
    for z, zb in calibration.per_zone.items():
        C = np.where(zone == z, zb.C, C)
    return C * shape
