"""Shared domain types: physical parameters, the exponential memory kernel,
frequency zones, radial quadrature grids and closed-form radial data.

Fourier data are given directly on the radial frequency variable r = |xi|
with the non-unitary forward transform, so no n-dimensional FFT is needed by
the linear pipeline.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import (
    InsufficientDecay,
    InvalidGrid,
    NonPositiveParameter,
    StabilityViolated,
)


@dataclass(frozen=True)
class PhysParams:
    """Relaxation time ``tau``, sound diffusivity ``delta`` and memory strength ``m``.

    The squared sound speed is normalised to one.  Construct through
    :func:`make_params` to get validation.
    """

    tau: float
    delta: float
    m: float
    allow_unstable: bool = False

    def __post_init__(self):
        if not (self.tau > 0):
            raise NonPositiveParameter(f"tau must be > 0, got {self.tau}")
        if not (self.m > 0):
            raise NonPositiveParameter(f"m must be > 0, got {self.m}")
        if not (self.delta >= 0):
            raise NonPositiveParameter(f"delta must be >= 0, got {self.delta}")
        if self.m * self.tau >= 1 and not self.allow_unstable:
            raise StabilityViolated(
                f"m*tau = {self.m * self.tau:g} >= 1; pass allow_unstable=True for instability demos"
            )

    @property
    def stable(self) -> bool:
        return self.m * self.tau < 1

    @property
    def kernel(self) -> "MemoryKernel":
        return MemoryKernel(self)

    def with_delta(self, delta: float) -> "PhysParams":
        return PhysParams(self.tau, float(delta), self.m, self.allow_unstable)


def make_params(tau: float, delta: float, m: float, allow_unstable: bool = False) -> PhysParams:
    return PhysParams(float(tau), float(delta), float(m), bool(allow_unstable))


@dataclass(frozen=True)
class MemoryKernel:
    """The relaxation kernel g(t) = m exp(-t/tau)."""

    params: PhysParams

    def __call__(self, t: ArrayLike) -> NDArray:
        p = self.params
        return p.m * np.exp(-np.asarray(t, dtype=float) / p.tau)

    def derivative(self, t: ArrayLike) -> NDArray:
        return -self(t) / self.params.tau

    def cumulative(self, t: ArrayLike) -> NDArray:
        """Integral of g(t - eta) over eta in [0, t], i.e. tau (m - g(t))."""
        p = self.params
        return p.m * p.tau * -np.expm1(-np.asarray(t, dtype=float) / p.tau)


class Zone(enum.IntEnum):
    INTERIOR = 0
    BOUNDED = 1
    EXTERIOR = 2


@dataclass(frozen=True)
class FrequencyZones:
    """Sharp partition r < eps | eps <= r <= cap_n | r > cap_n."""

    eps: float = 0.05
    cap_n: float = 20.0

    def __post_init__(self):
        if not (0 < self.eps < self.cap_n):
            raise NonPositiveParameter(f"need 0 < eps < N, got eps={self.eps}, N={self.cap_n}")

    def classify(self, r: ArrayLike) -> NDArray:
        r = np.asarray(r, dtype=float)
        out = np.full(r.shape, Zone.BOUNDED, dtype=int)
        out[r < self.eps] = Zone.INTERIOR
        out[r > self.cap_n] = Zone.EXTERIOR
        return out

    def zone_of(self, r: float) -> Zone:
        return Zone(int(self.classify(np.array([r]))[0]))

    def mask(self, r: ArrayLike, zone: Zone) -> NDArray:
        return self.classify(r) == zone


# ----------------------------------------------------------------- grids

@dataclass(frozen=True)
class RadialGrid:
    nodes: NDArray
    weights: NDArray

    def __post_init__(self):
        validate_grid(self.nodes, self.weights)

    @property
    def rmax(self) -> float:
        return float(self.nodes[-1])


def validate_grid(nodes, weights) -> None:
    nodes = np.asarray(nodes)
    weights = np.asarray(weights)
    if nodes.ndim != 1 or nodes.size == 0 or nodes.shape != weights.shape:
        raise InvalidGrid("nodes and weights must be equal-length non-empty 1-D arrays")
    if not np.all(np.isfinite(nodes)) or nodes[0] < 0:
        raise InvalidGrid("nodes must be finite and non-negative")
    if np.any(np.diff(nodes) <= 0):
        raise InvalidGrid("nodes must be strictly increasing")
    if np.any(weights <= 0) or not np.all(np.isfinite(weights)):
        raise InvalidGrid("weights must be positive and finite")


def gauss_legendre_panels(breaks: ArrayLike, order: int = 16) -> RadialGrid:
    """Composite Gauss-Legendre rule on consecutive breakpoints."""
    breaks = np.asarray(breaks, dtype=float)
    if breaks.ndim != 1 or breaks.size < 2 or np.any(np.diff(breaks) <= 0):
        raise InvalidGrid("panel breakpoints must be strictly increasing, at least two")
    x, w = np.polynomial.legendre.leggauss(order)
    a, b = breaks[:-1, None], breaks[1:, None]
    half = 0.5 * (b - a)
    nodes = (a + half * (x + 1.0)).ravel()
    weights = (half * w).ravel()
    return RadialGrid(nodes, weights)


def radial_grid(rmax: float = 12.0, nodes: int = 1024, order: int = 16,
                r_knee: float = 1.0, r_floor: float = 1e-4) -> RadialGrid:
    """Composite Gauss-Legendre grid on [0, rmax].

    Half of the panels are geometrically graded on [r_floor, r_knee] to
    resolve small frequencies; the rest are uniform on [r_knee, rmax].
    """
    if rmax <= 0 or nodes < 2 * order:
        raise InvalidGrid(f"need rmax > 0 and nodes >= {2 * order}")
    panels = max(nodes // order, 2)
    if rmax <= r_knee:
        return gauss_legendre_panels(np.linspace(0.0, rmax, panels + 1), order)
    n_geo = panels // 2
    n_uni = panels - n_geo
    geo = np.geomspace(r_floor, r_knee, n_geo)
    uni = np.linspace(r_knee, rmax, n_uni + 1)[1:]
    return gauss_legendre_panels(np.concatenate([[0.0], geo, uni]), order)


# -------------------------------------------------------------- profiles

def _gaussian(r, amplitude=1.0, width=1.0):
    return amplitude * np.exp(-0.5 * width * r * r)


def _algebraic_tail(r, a=4.0, amplitude=1.0):
    return amplitude * (1.0 + r * r) ** (-0.5 * a)


def _zero(r):
    return np.zeros_like(r)


PROFILE_FAMILIES = {
    "gaussian": _gaussian,
    "algebraic_tail": _algebraic_tail,
    "zero": _zero,
}


@dataclass(frozen=True)
class RadialProfile:
    """Radial Fourier samples f(r_k) on a quadrature grid.

    ``family`` and ``params`` remember the closed form so that the profile
    can be re-sampled on another grid (time-adapted grids need this).
    """

    n: float
    nodes: NDArray
    weights: NDArray
    values: NDArray
    label: str = ""
    family: str | None = None
    params: tuple = field(default=())

    def __post_init__(self):
        if not (self.n > 0):
            raise NonPositiveParameter(f"dimension must be > 0, got {self.n}")
        validate_grid(self.nodes, self.weights)
        if np.shape(self.values) != np.shape(self.nodes):
            raise InvalidGrid("values must match nodes")
        if not np.all(np.isfinite(self.values)):
            raise InvalidGrid("profile values must be finite")

    def evaluate(self, r: ArrayLike) -> NDArray:
        if self.family is None:
            raise InvalidGrid("profile has no closed form to re-sample")
        return PROFILE_FAMILIES[self.family](np.asarray(r, dtype=float), *self.params).astype(complex)

    def resample(self, grid: RadialGrid) -> "RadialProfile":
        return RadialProfile(self.n, grid.nodes, grid.weights, self.evaluate(grid.nodes),
                             self.label, self.family, self.params)


def _profile(n, grid: RadialGrid, family: str, params: tuple, label: str) -> RadialProfile:
    if not isinstance(grid, RadialGrid):
        raise InvalidGrid("grid must be a RadialGrid")
    vals = PROFILE_FAMILIES[family](grid.nodes, *params).astype(complex)
    return RadialProfile(float(n), grid.nodes, grid.weights, vals, label, family, params)


def gaussian_profile(n: float, amplitude: float, width: float, grid: RadialGrid) -> RadialProfile:
    """amplitude * exp(-width r^2 / 2): the transform of a spatial Gaussian."""
    if not (width > 0):
        raise InvalidGrid(f"width must be > 0, got {width}")
    return _profile(n, grid, "gaussian", (float(amplitude), float(width)), "gaussian")


def algebraic_tail_profile(n: float, a: float, grid: RadialGrid, amplitude: float = 1.0) -> RadialProfile:
    """(1 + r^2)^(-a/2); square integrable only when a > n/2."""
    if not (a > n / 2):
        raise InsufficientDecay(f"tail exponent a={a} must exceed n/2={n / 2}")
    return _profile(n, grid, "algebraic_tail", (float(a), float(amplitude)), "algebraic_tail")


def zero_profile(n: float, grid: RadialGrid) -> RadialProfile:
    return _profile(n, grid, "zero", (), "zero")


@dataclass(frozen=True)
class DataTriple:
    """Fourier transforms of (phi0, phi1, phi2) on one shared grid."""

    p0: RadialProfile
    p1: RadialProfile
    p2: RadialProfile

    def __post_init__(self):
        if not (np.array_equal(self.p0.nodes, self.p1.nodes)
                and np.array_equal(self.p0.nodes, self.p2.nodes)):
            raise InvalidGrid("data triple profiles must share one grid")
        if not (self.p0.n == self.p1.n == self.p2.n):
            raise InvalidGrid("data triple profiles must share one dimension")

    @property
    def n(self) -> float:
        return self.p0.n

    @property
    def nodes(self) -> NDArray:
        return self.p0.nodes

    @property
    def weights(self) -> NDArray:
        return self.p0.weights

    def stacked(self) -> NDArray:
        """Data as a (3, K) complex array."""
        return np.stack([self.p0.values, self.p1.values, self.p2.values])

    def resample(self, grid: RadialGrid) -> "DataTriple":
        return DataTriple(self.p0.resample(grid), self.p1.resample(grid), self.p2.resample(grid))
