"""The r-parameterised characteristic quartic of the reduced fourth-order
Fourier ODE, its numerical roots, branch labelling and the small/large
frequency expansions.

    tau^2 l^4 + 2 tau l^3 + (1 + tau (delta+tau) r^2) l^2
        + (delta + 2 tau) r^2 l + (1 - m tau) r^2 = 0
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import (
    BranchAmbiguity,
    DegenerateLeadingCoefficient,
    OutOfZone,
    PolishDivergence,
)
from .kernelcore import FrequencyZones, PhysParams

LABELS = ("Osc+", "Osc-", "Relax+", "Relax-")
RESIDUAL_TOL = 1e-10
DEGENERACY_GAP = 1e-8


@dataclass(frozen=True)
class QuarticCoeffs:
    """Coefficients of l^4 .. l^0; scalars or arrays broadcast against ``r``."""

    r: NDArray
    c4: NDArray
    c3: NDArray
    c2: NDArray
    c1: NDArray
    c0: NDArray

    def stacked(self) -> NDArray:
        """(K, 5) array, highest power first."""
        r = np.atleast_1d(self.r)
        cols = [np.broadcast_to(np.asarray(c, dtype=float), r.shape)
                for c in (self.c4, self.c3, self.c2, self.c1, self.c0)]
        return np.stack(cols, axis=-1)

    def as_tuple(self) -> tuple:
        return tuple(float(c) for c in (self.c4, self.c3, self.c2, self.c1, self.c0))


def quartic_at(params: PhysParams, r: ArrayLike) -> QuarticCoeffs:
    tau, delta, m = params.tau, params.delta, params.m
    r = np.asarray(r, dtype=float)
    r2 = r * r
    return QuarticCoeffs(
        r=r,
        c4=np.full_like(r, tau * tau),
        c3=np.full_like(r, 2.0 * tau),
        c2=1.0 + tau * (delta + tau) * r2,
        c1=(delta + 2.0 * tau) * r2,
        c0=(1.0 - m * tau) * r2,
    )


@dataclass(frozen=True)
class CharRoots:
    """Roots of the quartic along a set of radial frequencies.

    ``roots`` has shape (K, 4).  Once labelled (``labels`` not None) column j
    carries the family ``labels[j]``.
    """

    r: NDArray
    roots: NDArray
    residuals: NDArray
    scale: NDArray
    labels: tuple | None = None

    def __len__(self):
        return self.roots.shape[0]

    @property
    def min_gap(self) -> NDArray:
        z = self.roots
        gaps = [np.abs(z[:, i] - z[:, j]) for i, j in itertools.combinations(range(4), 2)]
        return np.min(np.stack(gaps), axis=0)

    @property
    def degenerate(self) -> NDArray:
        """Degeneracy flag: some pair of roots closer than the gap threshold."""
        return self.min_gap < DEGENERACY_GAP

    def branch(self, label: str) -> NDArray:
        if self.labels is None:
            raise BranchAmbiguity("roots are not labelled; call match_branches first")
        return self.roots[:, self.labels.index(label)]


def _horner(coef: NDArray, z: NDArray):
    """Value and derivative of the polynomials ``coef`` (K, 5) at z (K, 4)."""
    p = np.zeros_like(z)
    dp = np.zeros_like(z)
    for k in range(coef.shape[-1]):
        dp = dp * z + p
        p = p * z + coef[:, k:k + 1]
    return p, dp


def _scale(coef: NDArray, z: NDArray) -> NDArray:
    az = np.abs(z)
    s = np.zeros(z.shape)
    for k in range(coef.shape[-1]):
        s = s * az + np.abs(coef[:, k:k + 1])
    return np.maximum(s, 1.0)


def solve_roots(coeffs: QuarticCoeffs, polish_steps: int = 4) -> CharRoots:
    """Companion-matrix eigenvalues followed by guarded Newton polishing.

    A Newton update is kept only if it lowers the residual, so polishing
    cannot make a root worse near coalescence.
    """
    coef = coeffs.stacked()
    if np.any(coef[:, 0] == 0):
        raise DegenerateLeadingCoefficient("leading coefficient c4 vanishes")
    monic = coef[:, 1:] / coef[:, :1]
    K = coef.shape[0]
    comp = np.zeros((K, 4, 4))
    comp[:, 0, :] = -monic
    comp[:, 1, 0] = comp[:, 2, 1] = comp[:, 3, 2] = 1.0
    z = np.linalg.eigvals(comp).astype(complex)

    p, dp = _horner(coef, z)
    for _ in range(polish_steps):
        safe = np.abs(dp) > 0
        step = np.where(safe, p / np.where(safe, dp, 1.0), 0.0)
        cand = z - step
        pc, dpc = _horner(coef, cand)
        better = np.abs(pc) < np.abs(p)
        z = np.where(better, cand, z)
        p = np.where(better, pc, p)
        dp = np.where(better, dpc, dp)

    residuals = np.abs(p)
    scale = _scale(coef, z)
    bad = residuals > RESIDUAL_TOL * scale
    if np.any(bad):
        k = int(np.argwhere(bad)[0, 0])
        raise PolishDivergence(
            f"root residual {residuals[k].max():.3e} exceeds tolerance at r={np.atleast_1d(coeffs.r)[k]:g}")
    return CharRoots(np.atleast_1d(coeffs.r).astype(float), z, residuals, scale)


def roots_at(params: PhysParams, r: ArrayLike) -> CharRoots:
    """Unlabelled roots for every r."""
    return solve_roots(quartic_at(params, np.atleast_1d(r)))


# ------------------------------------------------------- branch matching

# the three ways of splitting four roots into two unordered pairs
_PARTITIONS = (((0, 1), (2, 3)), ((0, 2), (1, 3)), ((0, 3), (1, 2)))


def _order_pair(a: complex, b: complex) -> tuple[complex, complex]:
    """'+' member first: positive imaginary part, or the larger real root."""
    if abs(a.imag) > 1e-14 * max(abs(a), 1e-300) or abs(b.imag) > 1e-14 * max(abs(b), 1e-300):
        return (a, b) if a.imag >= b.imag else (b, a)
    return (a, b) if a.real >= b.real else (b, a)


def _descriptor(a: complex, b: complex) -> np.ndarray:
    # elementary symmetric functions of a pair are smooth through coalescence
    return np.array([a + b, a * b])


def match_branches(roots: CharRoots, params: PhysParams) -> CharRoots:
    """Label roots along an increasing r grid by continuity.

    Roots are tracked pair-wise: at each step the split of the four roots
    into an oscillatory pair and a relaxation pair is the one whose pair
    sums and products move least.  Inside a pair, '+' is the root with
    positive imaginary part (or the larger one when both are real), which
    keeps labels well defined when a conjugate pair passes through a real
    double root.  At the smallest r the oscillatory pair is the one nearest
    the origin, matching the small-frequency expansion.
    """
    r = roots.r
    if r.size > 1 and np.any(np.diff(r) <= 0):
        raise BranchAmbiguity("r grid must be strictly increasing")
    z = roots.roots
    out = np.empty_like(z)

    first = z[0]
    order = np.argsort(np.abs(first))  # two smallest magnitudes -> oscillatory pair
    osc = _order_pair(first[order[0]], first[order[1]])
    rel = _order_pair(first[order[2]], first[order[3]])
    out[0] = [osc[0], osc[1], rel[0], rel[1]]
    prev_osc, prev_rel = _descriptor(*osc), _descriptor(*rel)

    for k in range(1, z.shape[0]):
        cur = z[k]
        scale = max(1.0, float(np.max(np.abs(cur))))
        cands = []
        for (i, j), (p, q) in _PARTITIONS:
            for a, b in (((i, j), (p, q)), ((p, q), (i, j))):
                d_osc = _descriptor(cur[a[0]], cur[a[1]])
                d_rel = _descriptor(cur[b[0]], cur[b[1]])
                cost = (np.abs(d_osc - prev_osc) / np.array([scale, scale * scale])).max()
                cost = max(cost, (np.abs(d_rel - prev_rel) / np.array([scale, scale * scale])).max())
                cands.append((cost, a, b, d_osc, d_rel))
        cands.sort(key=lambda c: c[0])
        best = cands[0]
        # separation between the chosen split and every other split at this r
        sep = min(max((np.abs(c[3] - best[3]) / np.array([scale, scale * scale])).max(),
                      (np.abs(c[4] - best[4]) / np.array([scale, scale * scale])).max())
                  for c in cands[1:])
        if best[0] >= 0.5 * sep:
            raise BranchAmbiguity(
                f"cannot pair roots between r={r[k - 1]:g} and r={r[k]:g}; refine the grid")
        a, b = best[1], best[2]
        osc = _order_pair(cur[a[0]], cur[a[1]])
        rel = _order_pair(cur[b[0]], cur[b[1]])
        out[k] = [osc[0], osc[1], rel[0], rel[1]]
        prev_osc, prev_rel = best[3], best[4]

    return CharRoots(roots.r, out, roots.residuals, roots.scale, LABELS)


def labelled_roots(params: PhysParams, r_grid: ArrayLike) -> CharRoots:
    return match_branches(roots_at(params, r_grid), params)


# ------------------------------------------------------------ expansions

def asymptotic_small(params: PhysParams, r: ArrayLike, order: int = 2,
                     zones: FrequencyZones | None = None) -> NDArray:
    """Small-frequency expansions in label order (Osc+, Osc-, Relax+, Relax-).

    order 1 keeps the linear terms only; order 2 adds the quadratic damping
    of the oscillatory pair.
    """
    zones = zones or FrequencyZones()
    r = np.asarray(r, dtype=float)
    if np.any(r >= zones.eps) or np.any(r < 0):
        raise OutOfZone(f"small-frequency expansion needs 0 <= r < eps={zones.eps}")
    tau, delta, m = params.tau, params.delta, params.m
    w = np.sqrt(complex(1.0 - m * tau)) * r
    damp = 0.5 * (delta + 2.0 * m * tau * tau) * r * r if order >= 2 else 0.0 * r
    split = np.sqrt(complex(m * tau)) * r
    return np.stack([1j * w - damp, -1j * w - damp,
                     -1.0 / tau + split, -1.0 / tau - split], axis=-1)


def kappa(params: PhysParams, sign: int = +1) -> float:
    """Large-frequency limit of the relaxation pair."""
    tau, delta, m = params.tau, params.delta, params.m
    disc = delta * delta + 4.0 * tau * tau * (delta + tau) * m
    return (-(delta + 2.0 * tau) + np.sign(sign) * np.sqrt(disc)) / (2.0 * tau * (delta + tau))


def asymptotic_large(params: PhysParams, r: ArrayLike, order: int = 2,
                     zones: FrequencyZones | None = None) -> NDArray:
    """Large-frequency expansions: (osc+, osc-, kappa+, kappa-).

    For delta > 0 the oscillatory pair is +-i sqrt((delta+tau)/tau) r minus a
    constant damping.  For delta = 0 it is +-i r +- i m/(2 tau) / r with the
    weak damping m/tau^2 / r^2 when ``order`` >= 2.
    """
    zones = zones or FrequencyZones()
    r = np.asarray(r, dtype=float)
    if np.any(r <= zones.cap_n):
        raise OutOfZone(f"large-frequency expansion needs r > N={zones.cap_n}")
    tau, delta, m = params.tau, params.delta, params.m
    kp, km = kappa(params, +1), kappa(params, -1)
    if delta > 0:
        im = np.sqrt((delta + tau) / tau) * r
        re = -delta / (2.0 * tau * (delta + tau)) * np.ones_like(r)
        plus, minus = re + 1j * im, re - 1j * im
    else:
        im = r + (m / (2.0 * tau)) / r
        re = -(m / tau ** 2) / r ** 2 if order >= 2 else 0.0 * r
        plus, minus = re + 1j * im, re - 1j * im
    ones = np.ones_like(r)
    return np.stack([plus, minus, kp * ones + 0j, km * ones + 0j], axis=-1)


def oscillatory_pair_large(roots: CharRoots) -> NDArray:
    """Per r, the root with the largest imaginary part (upper member of the
    oscillatory pair at high frequency)."""
    idx = np.argmax(roots.roots.imag, axis=1)
    return roots.roots[np.arange(len(roots)), idx]


@dataclass(frozen=True)
class AbscissaReport:
    abscissa: float
    r_at_max: float
    stable: bool


def spectral_abscissa(params: PhysParams, r_grid: ArrayLike) -> AbscissaReport:
    """Largest real part over all roots on the grid, with its location."""
    r_grid = np.atleast_1d(np.asarray(r_grid, dtype=float))
    if r_grid.size == 0 or np.any(r_grid <= 0):
        raise OutOfZone("abscissa grid must be non-empty with r > 0")
    cr = roots_at(params, r_grid)
    re = cr.roots.real.max(axis=1)
    k = int(np.argmax(re))
    return AbscissaReport(float(re[k]), float(r_grid[k]), bool(re[k] < 0))
