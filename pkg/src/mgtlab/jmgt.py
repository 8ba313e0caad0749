"""Pseudospectral solver for the nonlinear viscous equation on a periodic box.

Fields are stored as Fourier-series coefficients c_k = fftn(f) / N^n on
the dealiased lattice only.  Each lattice mode carries the state
y = (psi, psi_t, psi_tt, W) and obeys y' = A(|k|) y + b F with
b = (0, 0, 1/tau, 0), the same first-order system the single-mode
solver uses.  The linear part is advanced exactly; the quadratic source
F is handled either by Picard iteration on the Duhamel formula or by a
second-order exponential time differencing scheme.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.fft
import scipy.linalg
from numpy.typing import NDArray

from .charpoly import DEGENERACY_GAP, roots_at
from .errors import (
    AliasingMaskMissing,
    InvalidGrid,
    MissingDerivatives,
    NoContraction,
    QuadratureUnderResolved,
    StepRefinementFailed,
    WindowTooShort,
)
from .kernelcore import PhysParams
from .normlab import DecayFit, dns_exponent, dns_reference, fit_decay

EIG_COND_LIMIT = 1e8
KINDS = ("kuznetsov", "westervelt")

_workers = 1


def set_threads(k: int) -> None:
    """Worker count for the FFTs."""
    global _workers
    _workers = max(1, int(k))


# ------------------------------------------------------------------ lattice

@dataclass(frozen=True)
class TorusGrid:
    n: int
    L: float
    points: int
    dealias: float = 2.0 / 3.0

    def __post_init__(self):
        if self.n not in (1, 2, 3):
            raise InvalidGrid(f"dimension must be 1, 2 or 3, got {self.n}")
        if self.points < 16 or self.points & (self.points - 1):
            raise InvalidGrid(f"points per axis must be a power of two >= 16, got {self.points}")
        if not self.L > 0:
            raise InvalidGrid("box length must be positive")
        if not 0 < self.dealias <= 1:
            raise InvalidGrid("dealias fraction must lie in (0, 1]")

    @property
    def shape(self) -> tuple:
        return (self.points,) * self.n

    @property
    def volume(self) -> float:
        return self.L ** self.n

    @cached_property
    def _index(self) -> NDArray:
        return np.fft.fftfreq(self.points, 1.0 / self.points)

    @cached_property
    def mask(self) -> NDArray:
        keep = np.abs(self._index) <= self.dealias * self.points / 2
        out = np.ones(self.shape, dtype=bool)
        for ax in range(self.n):
            sl = [None] * self.n
            sl[ax] = slice(None)
            out = out & keep[tuple(sl)]
        return out

    @cached_property
    def active(self) -> NDArray:
        """Flat indices of the modes kept by the dealiasing mask."""
        return np.flatnonzero(self.mask.ravel())

    @cached_property
    def kvec(self) -> NDArray:
        """(n, M) wavevectors of the active modes."""
        k1 = 2 * math.pi / self.L * self._index
        full = np.meshgrid(*([k1] * self.n), indexing="ij")
        return np.stack([g.ravel()[self.active] for g in full])

    @cached_property
    def _shells(self) -> tuple[NDArray, NDArray]:
        idx = np.meshgrid(*([self._index] * self.n), indexing="ij")
        m2 = sum(g.ravel()[self.active] ** 2 for g in idx).astype(np.int64)
        uniq, inv = np.unique(m2, return_inverse=True)
        return 2 * math.pi / self.L * np.sqrt(uniq.astype(float)), inv

    @property
    def shell_radii(self) -> NDArray:
        return self._shells[0]

    @property
    def shell_index(self) -> NDArray:
        return self._shells[1]

    @cached_property
    def x(self) -> list[NDArray]:
        """Physical coordinates, centred so that x = 0 is a grid point."""
        x1 = (np.arange(self.points) - self.points // 2) * (self.L / self.points)
        return np.meshgrid(*([x1] * self.n), indexing="ij")

    def compress(self, full: NDArray) -> NDArray:
        return np.asarray(full).reshape(full.shape[:-self.n] + (-1,))[..., self.active]

    def expand(self, compact: NDArray) -> NDArray:
        compact = np.asarray(compact)
        lead = compact.shape[:-1]
        out = np.zeros(lead + (self.points ** self.n,), dtype=complex)
        out[..., self.active] = compact
        return out.reshape(lead + self.shape)

    def to_physical(self, compact: NDArray) -> NDArray:
        axes = tuple(range(-self.n, 0))
        return scipy.fft.ifftn(self.expand(compact), axes=axes, norm="forward", workers=_workers)

    def to_spectral(self, phys: NDArray) -> NDArray:
        axes = tuple(range(-self.n, 0))
        return self.compress(scipy.fft.fftn(phys, axes=axes, norm="forward", workers=_workers))

    def l2(self, compact: NDArray) -> NDArray:
        """Physical L^2 norm over the box from active coefficients."""
        return np.sqrt(self.volume * np.sum(np.abs(compact) ** 2, axis=-1))

    def shell_power(self, compact: NDArray) -> NDArray:
        return np.bincount(self.shell_index, weights=np.abs(compact) ** 2,
                           minlength=self.shell_radii.size)


def trust_time(grid: TorusGrid, params: PhysParams) -> float:
    """Time before the fastest wave wraps half-way around the box."""
    c_wave = math.sqrt((params.delta + params.tau) / params.tau)
    return grid.L / (2.0 * c_wave)


@dataclass(frozen=True)
class FieldState:
    """Fourier-series coefficients of (psi, psi_t, psi_tt, W) on the full lattice."""

    grid: TorusGrid
    psi: NDArray
    psi_t: NDArray
    psi_tt: NDArray
    w: NDArray
    t: float = 0.0

    def __post_init__(self):
        for a in (self.psi, self.psi_t, self.psi_tt, self.w):
            if np.shape(a) != self.grid.shape:
                raise InvalidGrid(f"field shape {np.shape(a)} does not match lattice {self.grid.shape}")
        if self.t == 0 and np.any(self.w != 0):
            raise ValueError("memory auxiliary must vanish at t = 0")

    def compact(self) -> NDArray:
        """(4, M) active-mode state, after checking the dealiasing mask."""
        stacked = np.stack([self.psi, self.psi_t, self.psi_tt, self.w])
        outside = stacked.reshape(4, -1)[:, ~self.grid.mask.ravel()]
        if np.any(outside != 0):
            raise AliasingMaskMissing("state has energy in modes outside the dealiasing mask")
        return self.grid.compress(stacked)

    @classmethod
    def from_compact(cls, grid: TorusGrid, y: NDArray, t: float) -> "FieldState":
        full = grid.expand(y)
        return cls(grid, full[0], full[1], full[2], full[3], t)


def gaussian_data(grid: TorusGrid, amplitude: float = 1e-2, width_sq: float = 4.0,
                  slots=(1.0, 1.0, 1.0)) -> FieldState:
    """slots[j] * amplitude * exp(-|x|^2 / (2 width_sq)) in each datum, dealiased."""
    r2 = sum(xi ** 2 for xi in grid.x)
    g = amplitude * np.exp(-r2 / (2.0 * width_sq))
    c = grid.expand(grid.to_spectral(g))
    return FieldState(grid, slots[0] * c, slots[1] * c, slots[2] * c, np.zeros(grid.shape, complex))


# ------------------------------------------------------------ nonlinearity

@dataclass(frozen=True)
class NonlinearConfig:
    kind: str
    k_ab: float

    def __post_init__(self):
        kind = self.kind.lower()
        if kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")
        object.__setattr__(self, "kind", kind)
        if not self.k_ab > 0:
            raise ValueError("k_ab must be positive")


def _source(grid: TorusGrid, y: NDArray, config: NonlinearConfig, diag: dict | None = None) -> NDArray:
    """Active coefficients of F for active-mode states y of shape (..., 4, M)."""
    sp = (slice(None),) * grid.n
    phys = grid.to_physical(y[..., 1:3, :])
    pt, ptt = phys[(Ellipsis, 0) + sp], phys[(Ellipsis, 1) + sp]
    if diag is not None:
        diag["max_imag"] = max(diag.get("max_imag", 0.0), float(np.max(np.abs(phys.imag))))
    if config.kind == "westervelt":
        prod = 2.0 * (1.0 + config.k_ab) * pt * ptt
    else:
        prod = 2.0 * config.k_ab * pt * ptt
        # (..., 2, n, M): gradients of psi and psi_t
        grads = 1j * grid.kvec * y[..., 0:2, None, :]
        g = grid.to_physical(grads)
        dot = np.sum(g[(Ellipsis, 0, slice(None)) + sp] * g[(Ellipsis, 1, slice(None)) + sp], axis=-1 - grid.n)
        prod = prod + 2.0 * dot
    return grid.to_spectral(prod)


def nonlinearity(state: FieldState, config: NonlinearConfig) -> NDArray:
    """Full-lattice coefficients of the quadratic source, dealiased."""
    y = state.compact()
    return state.grid.expand(_source(state.grid, y, config))


# --------------------------------------------------------- linear stepping

def _system_matrices(params: PhysParams, r: NDArray) -> NDArray:
    tau, delta, m = params.tau, params.delta, params.m
    r2 = r ** 2
    A = np.zeros(r.shape + (4, 4))
    A[..., 0, 1] = 1.0
    A[..., 1, 2] = 1.0
    A[..., 2, 0] = -r2 / tau
    A[..., 2, 1] = -(delta + tau) * r2 / tau
    A[..., 2, 2] = -1.0 / tau
    A[..., 2, 3] = r2 / tau
    A[..., 3, 0] = m
    A[..., 3, 3] = -1.0 / tau
    return A


def _phi1(z):
    small = np.abs(z) < 1e-3
    zs = np.where(small, 1.0, z)
    return np.where(small, 1 + z / 2 + z * z / 6 + z ** 3 / 24, np.expm1(zs) / zs)


def _phi2(z):
    small = np.abs(z) < 1e-2
    zs = np.where(small, 1.0, z)
    series = 0.5 + z / 6 + z * z / 24 + z ** 3 / 120 + z ** 4 / 720
    return np.where(small, series, (np.expm1(zs) - zs) / (zs * zs))


class ShellPropagator:
    """Exact propagators for all shells |k| = r_j at once.

    Shells with well separated eigenvalues use the eigen-decomposition;
    the rest (including k = 0, where the generator is defective) use the
    matrix exponential, with an augmented matrix for the phi-functions.
    """

    def __init__(self, params: PhysParams, radii: NDArray):
        self.params = params
        self.radii = np.asarray(radii, dtype=float)
        self.A = _system_matrices(params, self.radii)
        self.b = np.array([0.0, 0.0, 1.0 / params.tau, 0.0])
        lam, V = np.linalg.eig(self.A)
        lam_sorted = np.sort_complex(lam)
        gaps = np.where(np.eye(4, dtype=bool), np.inf, np.abs(lam[:, :, None] - lam[:, None, :]))
        ok = (np.linalg.cond(V) < EIG_COND_LIMIT) & (gaps.min(axis=(1, 2)) >= DEGENERACY_GAP)
        self.eigenvalues = lam_sorted
        self.diagonal = ok
        self._lam = lam[ok]
        self._V = V[ok]
        self._Vinv = np.linalg.inv(V[ok])
        self._Vinv_b = self._Vinv @ self.b
        self._cache: dict = {}

    def matrix(self, h: float) -> NDArray:
        key = ("E", float(h))
        if key not in self._cache:
            out = np.empty(self.A.shape, dtype=complex)
            ok = self.diagonal
            out[ok] = (self._V * np.exp(self._lam * h)[:, None, :]) @ self._Vinv
            if np.any(~ok):
                out[~ok] = scipy.linalg.expm(self.A[~ok] * h)
            self._cache[key] = out
        return self._cache[key]

    def phi_vectors(self, h: float) -> tuple[NDArray, NDArray]:
        """(h phi1(hA) b, h phi2(hA) b) per shell."""
        key = ("phi", float(h))
        if key not in self._cache:
            p1 = np.empty(self.radii.shape + (4,), dtype=complex)
            p2 = np.empty_like(p1)
            ok = self.diagonal
            z = self._lam * h
            p1[ok] = np.einsum("sij,sj->si", self._V, h * _phi1(z) * self._Vinv_b)
            p2[ok] = np.einsum("sij,sj->si", self._V, h * _phi2(z) * self._Vinv_b)
            if np.any(~ok):
                k = int(np.sum(~ok))
                M = np.zeros((k, 6, 6))
                M[:, :4, :4] = self.A[~ok] * h
                M[:, :4, 4] = self.b * h
                M[:, 4, 5] = 1.0
                X = scipy.linalg.expm(M)
                p1[~ok] = X[:, :4, 4]
                p2[~ok] = X[:, :4, 5]
            self._cache[key] = (p1, p2)
        return self._cache[key]


@functools.lru_cache(maxsize=8)
def shell_propagator(grid: TorusGrid, params: PhysParams) -> ShellPropagator:
    return ShellPropagator(params, grid.shell_radii)


def _apply(E_modes: NDArray, y: NDArray) -> NDArray:
    return np.einsum("mij,jm->im", E_modes, y)


def linear_propagator_step(state: FieldState, dt: float, params: PhysParams) -> FieldState:
    """Exact homogeneous advance of every lattice mode by ``dt``."""
    grid = state.grid
    y = state.compact()
    if dt == 0:
        return state
    E = shell_propagator(grid, params).matrix(dt)[grid.shell_index]
    return FieldState.from_compact(grid, _apply(E, y), state.t + dt)


def lattice_eigen_distance(grid: TorusGrid, params: PhysParams, skip_origin: bool = True) -> float:
    """Largest set distance between lattice generator eigenvalues and the
    characteristic roots at the same |k|, relative to max(1, |lambda|)."""
    prop = shell_propagator(grid, params)
    r = prop.radii
    keep = r > 0 if skip_origin else np.ones(r.shape, bool)
    lat = prop.eigenvalues[keep]
    ref = roots_at(params, r[keep]).roots
    d = np.abs(lat[:, :, None] - ref[:, None, :])
    scale = np.maximum(1.0, np.abs(ref).max(axis=1))
    dist = np.maximum(d.min(axis=2).max(axis=1), d.min(axis=1).max(axis=1)) / scale
    return float(dist.max())


# -------------------------------------------------------------- trajectory

@dataclass
class Trajectory:
    """Shell power spectra of psi and its first two time derivatives at
    the sample times, plus the final state and solver diagnostics."""

    grid: TorusGrid
    params: PhysParams
    config: NonlinearConfig | None
    times: NDArray
    spectra: dict
    final: FieldState
    method: str
    iterations: int = 0
    contraction: float = 0.0
    diagnostics: dict = field(default_factory=dict)

    def _weights(self, sigma: float) -> NDArray:
        r = self.grid.shell_radii
        if sigma == 0:
            return np.ones_like(r)
        return np.where(r > 0, r ** (2 * sigma), 0.0)

    def norm(self, order: int, sigma: float = 0.0) -> NDArray:
        """H^sigma-dot norm of the order-th time derivative at each sample."""
        if order not in self.spectra:
            raise MissingDerivatives(f"trajectory does not store time derivative {order}")
        return np.sqrt(self.grid.volume * self.spectra[order] @ self._weights(sigma))


def _record(grid: TorusGrid, y: NDArray) -> NDArray:
    return np.stack([grid.shell_power(y[j]) for j in range(3)])


def _empty_trajectory_spectra(samples: list) -> dict:
    arr = np.array(samples)
    return {j: arr[:, j, :] for j in range(3)}


# ------------------------------------------------------------------ Picard

@dataclass(frozen=True)
class _Duhamel:
    Eh: NDArray
    E2h: NDArray
    b0: NDArray
    bh: NDArray
    b2h: NDArray
    bmh: NDArray


def _duhamel_ops(grid: TorusGrid, prop: ShellPropagator, h: float) -> _Duhamel:
    idx = grid.shell_index
    Eh = prop.matrix(h)
    E2h = prop.matrix(2 * h)
    Emh = prop.matrix(-h)
    b = prop.b
    return _Duhamel(Eh[idx], E2h[idx], np.broadcast_to(b, (idx.size, 4)),
                    (Eh @ b)[idx], (E2h @ b)[idx], (Emh @ b)[idx])


def _duhamel(ops: _Duhamel, F: NDArray, h: float) -> NDArray:
    """Composite Simpson Duhamel integrals int_0^{t_j} E(t_j - s) b F(s) ds
    at every sample, for F sampled on a uniform grid with an even number
    of intervals.  Odd samples use the one-interval three-point rule."""
    S, M = F.shape
    out = np.zeros((S, 4, M), dtype=complex)
    for j in range(0, S - 2, 2):
        f0, f1, f2 = F[j], F[j + 1], F[j + 2]
        step2 = (h / 3.0) * (ops.b2h * f0[:, None] + 4 * ops.bh * f1[:, None] + ops.b0 * f2[:, None])
        out[j + 2] = _apply(ops.E2h, out[j]) + step2.T
        step1 = (h / 12.0) * (5 * ops.bh * f0[:, None] + 8 * ops.b0 * f1[:, None] - ops.bmh * f2[:, None])
        out[j + 1] = _apply(ops.Eh, out[j]) + step1.T
    return out


def _weighted_sup(grid: TorusGrid, times: NDArray, y: NDArray) -> float:
    """sup_t of the L^2 norms of (psi, psi_t, psi_tt) with the decay weights."""
    n = grid.n
    w0 = 1.0 / dns_reference(n, 0.0, times)
    w1 = (1 + times) ** (n / 4)
    w2 = (1 + times) ** (0.5 + n / 4)
    return float(np.max(w0 * grid.l2(y[:, 0]) + w1 * grid.l2(y[:, 1]) + w2 * grid.l2(y[:, 2])))


def _uniform_samples(T: float, t_samples) -> NDArray:
    if np.ndim(t_samples) == 0:
        count = int(t_samples)
        if count % 2 == 0:
            count += 1
        return np.linspace(0.0, T, count)
    t = np.asarray(t_samples, dtype=float)
    if t.size < 3 or t.size % 2 == 0:
        raise ValueError("Picard samples need an even number (>= 2) of intervals")
    h = np.diff(t)
    if t[0] != 0 or not np.allclose(h, h[0], rtol=1e-9, atol=0):
        raise ValueError("Picard samples must be uniform and start at t = 0")
    return t


def picard_solve(data: FieldState, params: PhysParams, config: NonlinearConfig, T: float,
                 t_samples=None, tol: float = 1e-10, max_iter: int = 10, source=None,
                 quad_tol: float = 1e-7) -> Trajectory:
    """Fixed-point iteration y = y_lin + Duhamel[F(y)] on uniform samples.

    ``source``, if given, is a callable t -> full-lattice coefficients
    that replaces F; one iteration then gives the forced linear solution.
    The contraction factor is the largest ratio of successive weighted
    differences observed before they reach round-off.
    """
    grid = data.grid
    y0 = data.compact()
    times = _uniform_samples(T, t_samples if t_samples is not None else max(3, int(round(T / 0.05)) + 1))
    h = float(times[1] - times[0])
    prop = shell_propagator(grid, params)
    Eh = prop.matrix(h)[grid.shell_index]
    lin = np.empty((times.size, 4, y0.shape[1]), dtype=complex)
    lin[0] = y0
    for j in range(1, times.size):
        lin[j] = _apply(Eh, lin[j - 1])
    ops = _duhamel_ops(grid, prop, h)
    diag: dict = {}

    def forcing(y):
        if source is not None:
            return np.stack([grid.compress(np.asarray(source(t))) for t in times])
        return _source(grid, y, config, diag)

    y = lin
    norm_lin = max(_weighted_sup(grid, times, lin), np.finfo(float).tiny)
    diffs: list[float] = []
    iterations = 0
    converged = False
    F = None
    while iterations < max_iter:
        with np.errstate(over="ignore", invalid="ignore"):
            F = forcing(y)
            y_new = lin + _duhamel(ops, F, h)
            d = _weighted_sup(grid, times, y_new - y)
        iterations += 1
        if not math.isfinite(d):
            raise NoContraction(f"iterates left floating-point range after {iterations} iterations")
        diffs.append(d)
        y = y_new
        if source is not None or d <= tol * norm_lin:
            converged = True
            break
    ratios = [diffs[i + 1] / diffs[i] for i in range(len(diffs) - 1)
              if diffs[i] > 1e3 * np.finfo(float).eps * norm_lin]
    factor = max(ratios) if ratios else 0.0
    if not converged:
        raise NoContraction(f"no convergence in {max_iter} iterations (observed factor {factor:.3g})")

    # Simpson error estimate from the same source on every other sample.
    quad_err = 0.0
    if source is None and F is not None:
        F = forcing(y)
    if F is not None and times.size >= 5:
        S2 = 1 + 2 * ((times.size - 1) // 4)
        coarse = _duhamel(_duhamel_ops(grid, prop, 2 * h), F[:2 * S2 - 1:2], 2 * h)
        fine = _duhamel(ops, F[:2 * S2 - 1], h)
        quad_err = _weighted_sup(grid, times[:2 * S2 - 1:2], fine[::2] - coarse) / 15.0 / norm_lin
        if quad_err > quad_tol:
            raise QuadratureUnderResolved(
                f"Simpson error estimate {quad_err:.3g} exceeds {quad_tol:.3g}; use more samples")
    diag.update(quad_error=quad_err, differences=diffs)
    spectra = _empty_trajectory_spectra([_record(grid, y[j]) for j in range(times.size)])
    final = FieldState.from_compact(grid, y[-1], float(times[-1]))
    return Trajectory(grid, params, config, times, spectra, final, "picard", iterations, factor, diag)


# --------------------------------------------------------------------- ETD

def _record_indices(steps: int, dt: float, t_samples) -> NDArray:
    if t_samples is None:
        T = steps * dt
        t_samples = np.concatenate([[0.0], np.geomspace(min(1.0, T), T, 48)])
    idx = np.unique(np.clip(np.rint(np.asarray(t_samples, dtype=float) / dt), 0, steps).astype(int))
    return idx


def _etd_run(data: FieldState, params: PhysParams, config: NonlinearConfig | None, dt: float,
             steps: int, record: NDArray, source=None):
    grid = data.grid
    prop = shell_propagator(grid, params)
    idx = grid.shell_index
    E = prop.matrix(dt)[idx]
    p1, p2 = (p[idx] for p in prop.phi_vectors(dt))
    y = data.compact()
    diag: dict = {"max_imag": 0.0}
    samples = []
    rec = set(int(i) for i in record)
    forced = config is not None or source is not None

    def F(state, t):
        if source is not None:
            return grid.compress(np.asarray(source(t)))
        return _source(grid, state, config, diag)

    fn = F(y, 0.0) if forced else None
    for j in range(steps + 1):
        if j in rec:
            samples.append(_record(grid, y))
        if j == steps:
            break
        if not forced:
            y = _apply(E, y)
            continue
        a = _apply(E, y) + (p1 * fn[:, None]).T
        fa = F(a, (j + 1) * dt)
        y = a + (p2 * (fa - fn)[:, None]).T
        fn = F(y, (j + 1) * dt)
    return y, samples, diag


def etd_solve(data: FieldState, params: PhysParams, config: NonlinearConfig | None, dt: float,
              T: float, t_samples=None, source=None, refine_tol: float | None = None) -> Trajectory:
    """Exponential time differencing (ETD2RK): exact linear propagation,
    source interpolated linearly across each step between the current
    state and an exponential-Euler predictor.

    ``config=None`` and no ``source`` gives exact linear evolution.  With
    ``refine_tol`` the run is repeated at dt/2 and the relative endpoint
    change in psi_t must stay below it.
    """
    steps = max(1, int(round(T / dt)))
    dt = T / steps
    record = _record_indices(steps, dt, t_samples)
    y, samples, diag = _etd_run(data, params, config, dt, steps, record, source)
    if refine_tol is not None:
        y2, _, _ = _etd_run(data, params, config, dt / 2, 2 * steps, np.array([], int), source)
        change = float(data.grid.l2(y2[1] - y[1]) / max(data.grid.l2(y2[1]), np.finfo(float).tiny))
        diag["refinement_change"] = change
        if change > refine_tol:
            raise StepRefinementFailed(f"halving dt changed psi_t(T) by {change:.3g} > {refine_tol:.3g}")
    spectra = _empty_trajectory_spectra(samples)
    final = FieldState.from_compact(data.grid, y, float(T))
    method = "etd" if (config is not None or source is not None) else "linear"
    return Trajectory(data.grid, params, config, record * dt, spectra, final, method, diagnostics=diag)


def etd_observed_order(data: FieldState, params: PhysParams, config: NonlinearConfig, dt: float,
                       T: float, source=None) -> float:
    """Richardson estimate of the order from runs at dt, dt/2 and dt/4."""
    ends = []
    for j in range(3):
        h = dt / 2 ** j
        y, _, _ = _etd_run(data, params, config, h, int(round(T / h)), np.array([], int), source)
        ends.append(y[1])
    grid = data.grid
    e1 = float(grid.l2(ends[0] - ends[1]))
    e2 = float(grid.l2(ends[1] - ends[2]))
    return math.log2(e1 / e2) if e2 > 0 else math.inf


def relative_difference(a: FieldState, b: FieldState, slot: int = 1) -> float:
    """Relative L^2 difference of one field (default psi_t), normalised by b."""
    fa = (a.psi, a.psi_t, a.psi_tt, a.w)[slot]
    fb = (b.psi, b.psi_t, b.psi_tt, b.w)[slot]
    return float(np.linalg.norm(fa - fb) / max(np.linalg.norm(fb), np.finfo(float).tiny))


# -------------------------------------------------------------------- norms

def _psi_weight(n: int, t: NDArray) -> NDArray:
    # P_n for n >= 2; in one dimension the L^2 norm grows like (1+t)^{1/2}.
    return dns_reference(n, 0.0, t)


def evolution_norm(traj: Trajectory, flavor: str, s: float) -> float:
    """Weighted sup over the stored samples defining the Xs or Ys norms."""
    t = np.asarray(traj.times, dtype=float)
    n = traj.grid.n
    lo = (1 + t) ** (0.5 + s / 2 + n / 4)
    total = np.zeros_like(t)
    if flavor == "Xs":
        total += traj.norm(0) / _psi_weight(n, t)
        orders = (0, 1, 2)
    elif flavor == "Ys":
        orders = (1, 2)
    else:
        raise ValueError(f"flavor must be 'Xs' or 'Ys', got {flavor!r}")
    for ell in (1, 2):
        total += (1 + t) ** (-0.5 + ell / 2 + n / 4) * traj.norm(ell)
    for ell in orders:
        total += lo * traj.norm(ell, s + 2 - ell)
    return float(total.max()) if t.size else 0.0


@dataclass(frozen=True)
class RateCheck:
    fit: DecayFit
    expected: float
    window_limited: bool = False


def nonlinear_decay_report(traj: Trajectory, n: int, s: float, t_min: float = 5.0,
                           points: int = 25) -> dict:
    """Fitted decay exponents inside [t_min, trust window] with the
    target rates.  The psi-itself fit is flagged window-limited."""
    t_max = trust_time(traj.grid, traj.params)
    t = np.asarray(traj.times)
    usable = np.flatnonzero((t >= t_min) & (t <= t_max * (1 + 1e-12)))
    if usable.size < 8:
        raise WindowTooShort(f"{usable.size} samples inside [{t_min}, {t_max:.4g}], need 8")
    if usable.size > points:
        targets = np.geomspace(t[usable[0]], t[usable[-1]], points)
        usable = np.unique(usable[np.abs(t[usable][None, :] - targets[:, None]).argmin(axis=1)])
    tt = t[usable]
    hs_rate = -0.5 - s / 2 - n / 4
    p0, log_half = dns_exponent(n, 0.0)
    out = {
        "psi_L2": RateCheck(fit_decay(tt, traj.norm(0)[usable],
                                      "power_log_half" if log_half else "power"), p0, True),
    }
    for ell, name in ((1, "psi_t"), (2, "psi_tt")):
        out[f"{name}_L2"] = RateCheck(fit_decay(tt, traj.norm(ell)[usable]), 0.5 - ell / 2 - n / 4)
    for ell, name in ((0, "psi"), (1, "psi_t"), (2, "psi_tt")):
        out[f"{name}_Hdot"] = RateCheck(fit_decay(tt, traj.norm(ell, s + 2 - ell)[usable]), hs_rate)
    return out
