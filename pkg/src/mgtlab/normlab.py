"""Sobolev norms by radial quadrature, the oscillatory model integral,
reference decay envelopes and power-law regression.

A radial function f(|xi|) in R^n has homogeneous Sobolev norm

    ||f||_{H^s-dot}^2 = (2 pi)^{-n} |S^{n-1}| int_0^inf r^{2s+n-1} |f(r)|^2 dr,

with |S^{n-1}| = 2 pi^{n/2} / Gamma(n/2), which makes sense for real n > 0.
"""
from __future__ import annotations

import functools
import math
import warnings
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.special import gamma as gamma_fn

from .charpoly import roots_at
from .errors import (
    DivergentAtOrigin,
    InsufficientSamples,
    NonPositiveValues,
    ResolutionBudgetExceeded,
    TruncationWarning,
    UnsupportedDimension,
)
from .kernelcore import (
    DataTriple,
    FrequencyZones,
    PhysParams,
    RadialGrid,
    RadialProfile,
    Zone,
    gauss_legendre_panels,
)
from .modesolver import mode_expsum

GL_ORDER = 16
DEFAULT_BUDGET = 400_000


def sphere_area(n: float) -> float:
    """Surface measure of the unit sphere in R^n (n real, n > 0)."""
    return 2.0 * math.pi ** (n / 2.0) / float(gamma_fn(n / 2.0))


def parseval_factor(n: float) -> float:
    return (2.0 * math.pi) ** (-n) * sphere_area(n)


def weighted_sq_integral(n: float, s: float, nodes, weights, sq_values) -> float:
    """(2pi)^{-n} |S^{n-1}| * sum_k w_k r_k^{2s+n-1} v_k for v = |f|^2."""
    nodes = np.asarray(nodes)
    return parseval_factor(n) * float(np.sum(weights * nodes ** (2 * s + n - 1) * sq_values))


def _tail_estimate(profile: RadialProfile, s: float) -> float:
    """Squared-norm contribution beyond r_max from a local power law fitted
    to the last two nodes; inf if the tail is not integrable."""
    r = profile.nodes[-2:]
    v = r ** (2 * s + profile.n - 1) * np.abs(profile.values[-2:]) ** 2
    if np.any(v <= 0):
        return 0.0
    p = np.log(v[1] / v[0]) / np.log(r[1] / r[0])
    if p >= -1:
        return math.inf
    return parseval_factor(profile.n) * v[1] * r[1] / (-p - 1.0)


def _algebraic_tail(profile: RadialProfile, s: float) -> float:
    """Exact tail of amplitude^2 int_R^inf r^{2s+n-1} (1+r^2)^{-a} dr via the
    hypergeometric-free bound r^{2s+n-1-2a} (1 + r^{-2})^{-a} expanded to
    second order."""
    a, amp = profile.params
    n = profile.n
    R = float(profile.nodes[-1])
    p = 2 * s + n - 1 - a * 2
    if p >= -1:
        return math.inf
    # (1+r^2)^{-a} = r^{-2a} (1 - a r^{-2} + a(a+1)/2 r^{-4} - ...)
    terms = [1.0, -a, a * (a + 1) / 2.0]
    tail = sum(c * R ** (p - 2 * j + 1) / (-(p - 2 * j) - 1.0) for j, c in enumerate(terms))
    return parseval_factor(n) * amp * amp * tail


def radial_hs_norm(profile: RadialProfile, s: float, tol: float = 1e-12, tail: bool = True) -> float:
    """Homogeneous Sobolev norm of a radial profile on its grid.

    Algebraic-tail profiles receive an analytic correction for r > r_max.
    Other profiles warn when the estimated tail exceeds ``tol`` relative.
    """
    n = profile.n
    if 2 * s + n <= 0 and np.abs(profile.values[0]) > 0:
        raise DivergentAtOrigin(f"r^(2s+n-1) is not integrable at 0 for s={s}, n={n}")
    sq = weighted_sq_integral(n, s, profile.nodes, profile.weights, np.abs(profile.values) ** 2)
    if tail and profile.family == "algebraic_tail":
        sq += _algebraic_tail(profile, s)
    elif tail:
        est = _tail_estimate(profile, s)
        if est > tol * max(sq, 1e-300):
            warnings.warn(f"spectral tail beyond r_max={profile.nodes[-1]:g} is {est:.2e} "
                          f"of the squared norm {sq:.2e}", TruncationWarning, stacklevel=2)
    return math.sqrt(max(sq, 0.0))


# --------------------------------------------------- time-adapted grids

@functools.lru_cache(maxsize=64)
def _rate_profile(params: PhysParams, rmax: float):
    """Slowest decay rate and largest phase speed |d Im(l)/dr| along r.

    The phase speed sets how fast e^{l t} oscillates in r at fixed t.
    """
    r = np.concatenate([np.geomspace(1e-6, 1.0, 400), np.linspace(1.0, max(rmax, 1.0), 2000)[1:]])
    z = roots_at(params, r).roots
    im = np.sort(np.abs(z.imag), axis=1)
    slope = np.abs(np.gradient(im, r, axis=0)).max(axis=1)
    speed = np.maximum(slope, im.max(axis=1) / r)
    return r, (-z.real).min(axis=1), speed


def data_cutoff(data: DataTriple, rmax: float, rel: float = 1e-34) -> float:
    """Radius beyond which all data are negligible (squared, relative)."""
    if data.p0.family is None:
        return rmax
    r = np.linspace(0.0, rmax, 4001)
    mags = sum(np.abs(p.evaluate(r)) ** 2 for p in (data.p0, data.p1, data.p2))
    keep = np.flatnonzero(mags > rel * mags.max()) if mags.max() > 0 else np.array([0])
    return float(min(rmax, r[min(keep[-1] + 1, r.size - 1)]))


def _data_mag(data: DataTriple, r) -> NDArray:
    return np.max(np.abs(np.stack([p.evaluate(r) for p in (data.p0, data.p1, data.p2)])), axis=0)


def adapted_grid(params: PhysParams, t: float, rmax: float, floor: float = 40.0,
                 budget: int = DEFAULT_BUDGET, r_lo: float = 0.0, coarse_panels: int = 32,
                 data_mag=None) -> RadialGrid:
    """Quadrature grid for |u(t, r)|^2 on [r_lo, rmax].

    Fine panels, narrow enough to resolve the phase of every mode pair,
    cover the range where the mode amplitude (slowest rate times t, plus
    the data decay given by ``data_mag(r)``) stays above exp(-floor).
    Outside it coarse panels suffice.
    """
    r, rate, freq = _rate_profile(params, float(rmax))
    loss = rate * t
    if data_mag is not None:
        mag = np.asarray(data_mag(r), dtype=float)
        peak = mag.max()
        loss = loss + np.where(mag > 0, -np.log(np.maximum(mag, 1e-300) / peak), np.inf) if peak > 0 else loss
    live = (loss <= floor) & (r <= rmax)
    r_env = rmax if t <= 0 else (float(r[np.flatnonzero(live)[-1]]) if np.any(live) else float(r[0]))
    r_env = min(max(r_env, r_lo), rmax)
    if r_env > r_lo:
        a = 2.0 * float(freq[r <= r_env].max()) if np.any(r <= r_env) else 2.0 * float(freq[0])
        h = r_env - r_lo if a * t == 0 else min(math.pi / (a * t), r_env - r_lo)
        panels = max(int(math.ceil((r_env - r_lo) / h)), 8)
        if panels * GL_ORDER > budget:
            raise ResolutionBudgetExceeded(
                f"{panels * GL_ORDER} nodes needed at t={t:g} (budget {budget}); use the phase-averaged norm")
        breaks = np.linspace(r_lo, r_env, panels + 1)
        if r_lo == 0.0:
            breaks = np.concatenate([[0.0], np.geomspace(max(breaks[1] * 1e-3, min(1e-5, breaks[1] / 2)), breaks[1], 6)[:-1], breaks[1:]])
    else:
        breaks = np.array([r_lo])
    if rmax > r_env:
        breaks = np.concatenate([breaks, np.linspace(r_env, rmax, coarse_panels + 1)[1:]])
    return gauss_legendre_panels(breaks, GL_ORDER)


# ------------------------------------------------------ solution norms

def _zone_interval(zones: FrequencyZones | None, zone: Zone | None, rmax: float):
    if zone is None:
        return 0.0, rmax
    zones = zones or FrequencyZones()
    return {Zone.INTERIOR: (0.0, min(zones.eps, rmax)),
            Zone.BOUNDED: (zones.eps, min(zones.cap_n, rmax)),
            Zone.EXTERIOR: (zones.cap_n, rmax)}[Zone(zone)]


def solution_norm(params: PhysParams, data: DataTriple, t, s: float, k: int = 0,
                  zone: Zone | None = None, zones: FrequencyZones | None = None,
                  rmax: float | None = None, budget: int = DEFAULT_BUDGET) -> NDArray:
    """||d^k/dt^k phi(t)||_{H^s-dot} for each requested time.

    Every grid mode is evolved exactly.  Profiles with a closed form are
    re-sampled on a grid adapted to each t; otherwise the data grid is used.
    ``zone`` restricts the integral to one frequency zone.
    """
    if k not in (0, 1, 2):
        raise ValueError("time derivative order must be 0, 1 or 2")
    times = np.atleast_1d(np.asarray(t, dtype=float))
    rmax = float(rmax if rmax is not None else data.nodes[-1])
    lo, hi = _zone_interval(zones, zone, rmax)
    adaptive = data.p0.family is not None
    cut = data_cutoff(data, hi) if adaptive else hi
    out = np.empty(times.shape)
    for i, tv in enumerate(times):
        if hi <= lo:
            out[i] = 0.0
            continue
        if adaptive:
            grid = adapted_grid(params, tv, max(cut, lo + 1e-12), r_lo=lo, budget=budget,
                                data_mag=lambda r: _data_mag(data, r))
            d = data.resample(grid)
            nodes, weights, vals = grid.nodes, grid.weights, d.stacked()
        else:
            sel = (data.nodes >= lo) & (data.nodes <= hi)
            nodes, weights, vals = data.nodes[sel], data.weights[sel], data.stacked()[:, sel]
        if nodes.size == 0:
            out[i] = 0.0
            continue
        es = mode_expsum(params, nodes, vals[0], vals[1], vals[2])
        u = es.value(tv, k)
        out[i] = math.sqrt(max(weighted_sq_integral(data.n, s, nodes, weights, np.abs(u) ** 2), 0.0))
    return out if np.ndim(t) else out[0]


def phase_averaged_norm(params: PhysParams, data: DataTriple, t, s: float,
                        r_lo: float, r_hi: float, k: int = 0, panels: int = 400,
                        tail: bool = True) -> NDArray:
    """Zone-restricted norm with oscillating cross terms dropped.

    |sum_j c_j e^{l_j t}|^2 is replaced by sum_j |c_j|^2 e^{2 Re l_j t}; the
    dropped terms carry phases e^{i (Im l_i - Im l_j) t} that average out in
    r once t times the frequency gap is large.  Use this where direct
    quadrature would need too many nodes (high frequencies, late times).
    A power-law tail beyond ``r_hi`` is added analytically when ``tail``.
    """
    times = np.atleast_1d(np.asarray(t, dtype=float))
    breaks = np.geomspace(r_lo, r_hi, panels + 1)
    grid = gauss_legendre_panels(breaks, GL_ORDER)
    d = data.resample(grid).stacked()
    es = mode_expsum(params, grid.nodes, d[0], d[1], d[2])
    amp2 = np.abs(es.amps * es.rates ** k) ** 2
    re = es.rates.real
    n = data.n
    w = grid.weights * grid.nodes ** (2 * s + n - 1)
    out = np.empty(times.shape)
    for i, tv in enumerate(times):
        dens = np.sum(amp2 * np.exp(2.0 * re * tv), axis=1)
        sq = float(np.sum(w * dens))
        if tail:
            # local power law of the density at the upper end
            r2 = grid.nodes[-GL_ORDER:]
            f2 = (r2 ** (2 * s + n - 1) * dens[-GL_ORDER:])
            if f2[0] > 0 and f2[-1] > 0:
                p = math.log(f2[-1] / f2[0]) / math.log(r2[-1] / r2[0])
                if p < -1:
                    sq += f2[-1] * r2[-1] / (-p - 1.0)
        out[i] = math.sqrt(parseval_factor(n) * max(sq, 0.0))
    return out if np.ndim(t) else out[0]


# ------------------------------------------------- reference envelopes

def dns_reference(n: float, s: float, t) -> NDArray:
    """Four-branch decay envelope of the H^s-dot norm driven by L^1 data."""
    t = np.asarray(t, dtype=float)
    if n < 3 - 2 * s:
        if n < 2 - 2 * s:
            return (1 + t) ** (1 - s - n / 2)
        if n == 2 - 2 * s:
            return (1 + t) ** (0.5 - s / 2 - n / 4) * np.sqrt(np.log(np.e + t))
        return (1 + t) ** (1 - 5 * s / 6 - 5 * n / 12)
    return (1 + t) ** (0.5 - s / 2 - n / 4)


def dns_exponent(n: float, s: float) -> tuple[float, bool]:
    """(power, has_log_half_factor) of the envelope."""
    if n < 3 - 2 * s:
        if n < 2 - 2 * s:
            return 1 - s - n / 2, False
        if n == 2 - 2 * s:
            return 0.5 - s / 2 - n / 4, True
        return 1 - 5 * s / 6 - 5 * n / 12, False
    return 0.5 - s / 2 - n / 4, False


def pn_reference(n: int, t) -> NDArray:
    if n < 2:
        raise UnsupportedDimension(f"P_n is defined for n >= 2, got {n}")
    t = np.asarray(t, dtype=float)
    if n == 2:
        return np.sqrt(np.log(np.e + t))
    return (1 + t) ** (0.5 - n / 4)


# ---------------------------------------------- oscillatory model integral

def osc_integral(n: float, s: float, c: float, t: float, eps: float,
                 budget: int = DEFAULT_BUDGET, cutoff: float = 40.0) -> float:
    """int_0^eps r^{2s+n-3} sin^2(r t) exp(-c r^2 t) dr.

    sin^2(rt)/r^2 is evaluated as t^2 sinc^2(rt), which is exact at every
    node and removes the apparent singularity at r = 0.  Beyond
    r = sqrt(cutoff / (c t)) the Gaussian factor is below exp(-cutoff) and
    the range is dropped.  Panels are no wider than pi / (4 t).
    """
    if 2 * s + n - 1 < 0:
        raise DivergentAtOrigin("need 2s + n - 1 >= 0")
    if c <= 0 or t <= 0:
        raise ValueError("c and t must be positive")
    top = min(eps, math.sqrt(cutoff / (c * t)))
    width = math.pi / (4.0 * t)
    panels = int(math.ceil(top / width))
    if panels * GL_ORDER > budget:
        raise ResolutionBudgetExceeded(f"{panels * GL_ORDER} nodes exceed budget {budget}")
    first = top / panels
    breaks = np.concatenate([[0.0], np.geomspace(first * 1e-8, first, 24), np.linspace(first, top, panels + 1)[1:]])
    g = gauss_legendre_panels(breaks, GL_ORDER)
    r = g.nodes
    f = r ** (2 * s + n - 1) * (t * np.sinc(r * t / np.pi)) ** 2 * np.exp(-c * r * r * t)
    return float(np.sum(g.weights * f))


def sup_exterior_weight(s: float, c: float, t: float, cap_n: float) -> float:
    """max over r > N of r^{-s} exp(-c t / r^2)."""
    if s < 0:
        raise ValueError("s must be >= 0")
    if s == 0:
        return 1.0  # supremum approached as r -> infinity
    r_star = math.sqrt(2.0 * c * t / s)
    r_star = max(r_star, cap_n)
    return float(r_star ** (-s) * math.exp(-c * t / r_star ** 2))


# ---------------------------------------------------------- regression

@dataclass(frozen=True)
class DecayFit:
    exponent: float
    log_half: bool
    rss: float
    window: tuple
    points: int
    intercept: float = 0.0
    rss_threshold: float = 1e-2

    @property
    def valid(self) -> bool:
        return self.points >= 8 and self.rss <= self.rss_threshold


def fit_decay(times: ArrayLike, values: ArrayLike, model: str = "power",
              rss_threshold: float = 1e-2) -> DecayFit:
    """Least squares of log v against log(1+t).

    ``power_log_half`` divides out sqrt(ln(e+t)) first, so a pure
    log-half envelope has exponent zero.
    """
    t = np.asarray(times, dtype=float)
    v = np.asarray(values, dtype=float)
    if t.size < 8 or t.size != v.size:
        raise InsufficientSamples(f"need >= 8 samples, got {t.size}")
    if np.any(v <= 0) or not np.all(np.isfinite(v)):
        raise NonPositiveValues("decay fit needs strictly positive finite values")
    if model not in ("power", "power_log_half"):
        raise ValueError(f"unknown model {model!r}")
    y = np.log(v)
    if model == "power_log_half":
        y = y - 0.5 * np.log(np.log(np.e + t))
    x = np.log1p(t)
    A = np.column_stack([x, np.ones_like(x)])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    rss = float(np.sum((A @ coef - y) ** 2))
    return DecayFit(float(coef[0]), model == "power_log_half", rss,
                    (float(t.min()), float(t.max())), int(t.size), float(coef[1]), rss_threshold)


def fit_exponential(times: ArrayLike, values: ArrayLike) -> tuple[float, float]:
    """Slope and R^2 of log v against t (exponential decay check)."""
    t = np.asarray(times, dtype=float)
    y = np.log(np.asarray(values, dtype=float))
    A = np.column_stack([t, np.ones_like(t)])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    ss = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / ss if ss > 0 else 1.0
    return float(coef[0]), r2


def default_window(t_min: float = 1e2, t_max: float = 1e5, points: int = 25) -> NDArray:
    return np.geomspace(t_min, t_max, points)


# ------------------------------------------------------ regularity loss

@dataclass(frozen=True)
class RegularityLossResult:
    gamma: float
    s: float
    tail_exponent: float
    times: NDArray
    norms: NDArray
    fit: DecayFit
    contrast_times: NDArray
    contrast_norms: NDArray
    contrast_rate: float
    contrast_r2: float

    @property
    def expected(self) -> float:
        return -self.gamma / 2.0


def borderline_tail_exponent(s: float, n: float, gamma: float, slot: int = 2) -> float:
    """Fourier tail exponent a that puts a slot datum exactly at the
    regularity the gamma-decay estimate asks for: H^{s+gamma-1} for the
    first two slots and H^{s+gamma-2} for the third."""
    return s + n / 2.0 + gamma - (2.0 if slot == 2 else 1.0)


def regularity_loss_probe(params: PhysParams, gamma: float, s: float = 2.0, n: float = 3.0,
                          zones: FrequencyZones | None = None, times: ArrayLike | None = None,
                          contrast_delta: float = 0.1, slot: int = 2, grid: RadialGrid | None = None,
                          r_hi_factor: float = 100.0, panels: int = 600) -> RegularityLossResult:
    """Exterior-zone decay of the inviscid problem for borderline data.

    The datum (1+r^2)^{-a/2} sits in ``slot``; with a at the borderline the
    exterior H^s-dot norm should decay like t^{-gamma/2}.  The fit window
    starts well after N^2 / c, the time the slowest exterior mode needs to
    feel its damping.  A companion run with delta = ``contrast_delta`` on
    the same data is fitted on a linear time axis to exhibit exponential
    decay.
    """
    from .kernelcore import algebraic_tail_profile, radial_grid, zero_profile

    if params.delta != 0:
        raise ValueError("regularity-loss probe runs the inviscid problem (delta = 0)")
    zones = zones or FrequencyZones()
    grid = grid or radial_grid(12.0, 512)
    a = borderline_tail_exponent(s, n, gamma, slot)
    z = zero_profile(n, grid)
    tail = algebraic_tail_profile(n, a, grid)
    slots = [z, z, z]
    slots[slot] = tail
    data = DataTriple(*slots)
    if times is None:
        t0 = 10.0 * zones.cap_n ** 2 * params.tau ** 2 / params.m
        times = np.geomspace(t0, 100.0 * t0, 25)
    times = np.asarray(times, dtype=float)
    r_hi = r_hi_factor * math.sqrt(times.max())
    norms = phase_averaged_norm(params, data, times, s, zones.cap_n, r_hi, panels=panels)
    fit = fit_decay(times, norms)

    visc = params.with_delta(contrast_delta)
    rate = contrast_delta / (2 * visc.tau * (contrast_delta + visc.tau))
    ct = np.linspace(1.0, 30.0 / rate, 25)
    cn = phase_averaged_norm(visc, data, ct, s, zones.cap_n, r_hi, panels=panels)
    slope, r2 = fit_exponential(ct, cn)
    return RegularityLossResult(gamma, s, a, times, norms, fit, ct, cn, slope, r2)
