"""Distance, angle and fading distributions for nearest-satellite relaying.

The relay is the satellite nearest the receiver.  ``theta1`` is its central
angle from the receiver, ``theta2`` its central angle from the transmitter.
Fading power follows the shadowed-Rician (SR) law.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .geometry import (
    ConstellationGeometry,
    central_angle_from_chord,
    chord_distance,
    psi_of,
)
from .quadrature import DEFAULT_QUAD, QuadratureConfig, cumulative, integrate_intervals

__all__ = [
    "SeriesTruncationError",
    "ShadowedRicianParams",
    "DEFAULT_FADING",
    "theta1_pdf",
    "theta1_cdf",
    "mean_theta1",
    "downlink_distance_pdf",
    "downlink_distance_cdf",
    "mean_downlink_distance",
    "expected_downlink_distance",
    "theta2_pdf",
    "theta2_cdf",
    "uplink_distance_pdf",
    "uplink_distance_cdf",
    "sr_pdf",
    "sr_cdf",
    "sr_sf",
    "sr_mgf",
    "sr_mean",
    "sr_sample",
]


class SeriesTruncationError(ArithmeticError):
    """The SR density series needed more than ``series_max_terms`` terms."""


@dataclass(frozen=True)
class ShadowedRicianParams:
    """Shadowed-Rician fading parameters.

    m: Nakagami shape of the line-of-sight amplitude; b0: half the average
    scatter power; omega: average line-of-sight power.
    """

    m: float = 19.4
    b0: float = 0.158
    omega: float = 1.29
    series_eps: float = 1e-12
    series_max_terms: int = 2000

    def __post_init__(self):
        if not self.m > 0:
            raise ValueError("m must be positive")
        if not self.b0 > 0:
            raise ValueError("b0 must be positive")
        if not self.omega >= 0:
            raise ValueError("omega must be nonnegative")
        if not self.series_eps > 0:
            raise ValueError("series_eps must be positive")
        if self.series_max_terms < 1:
            raise ValueError("series_max_terms must be >= 1")

    @property
    def los_fraction(self) -> float:
        """``omega / (2 b0 m + omega)``: success parameter of the mixing law."""
        return self.omega / (2.0 * self.b0 * self.m + self.omega)


DEFAULT_FADING = ShadowedRicianParams()


# --- nearest-satellite central angle ------------------------------------------------

def theta1_pdf(theta, geom: ConstellationGeometry):
    theta = np.asarray(theta, dtype=float)
    inside = (theta >= 0) & (theta <= math.pi)
    t = np.where(inside, theta, 0.0)
    n = geom.n_sats
    base = np.cos(0.5 * t) ** 2  # (1 + cos t) / 2
    out = 0.5 * n * np.sin(t) * base ** (n - 1)
    return np.where(inside, out, 0.0)


def theta1_cdf(theta, geom: ConstellationGeometry):
    theta = np.clip(np.asarray(theta, dtype=float), 0.0, math.pi)
    base = np.cos(0.5 * theta) ** 2
    out = 1.0 - base ** geom.n_sats
    return out if out.ndim else float(out)


def mean_theta1(geom: ConstellationGeometry) -> float:
    """Mean nearest-satellite central angle, ``pi * prod (2k-1)/(2k)`` for k = 1..N.

    Evaluated in log space through the gamma function so large N stays finite.
    """
    n = geom.n_sats
    log_prod = special.gammaln(n + 0.5) - special.gammaln(n + 1.0) - 0.5 * math.log(math.pi)
    return math.pi * math.exp(log_prod)


# --- downlink distance --------------------------------------------------------------

def _cap_fraction(d0, geom):
    h = geom.rs_km - geom.re_km
    return (d0 * d0 - h * h) / (4.0 * geom.re_km * geom.rs_km)


def downlink_distance_pdf(d0, geom: ConstellationGeometry):
    d0 = np.asarray(d0, dtype=float)
    inside = (d0 >= geom.d_min) & (d0 <= geom.d_max)
    x = np.clip(_cap_fraction(np.where(inside, d0, geom.d_min), geom), 0.0, 1.0)
    n = geom.n_sats
    out = n * (1.0 - x) ** (n - 1) * d0 / (2.0 * geom.re_km * geom.rs_km)
    return np.where(inside, out, 0.0)


def downlink_distance_cdf(d0, geom: ConstellationGeometry):
    d0 = np.asarray(d0, dtype=float)
    x = np.clip(_cap_fraction(np.clip(d0, geom.d_min, geom.d_max), geom), 0.0, 1.0)
    out = 1.0 - (1.0 - x) ** geom.n_sats
    out = np.where(d0 <= geom.d_min, 0.0, out)
    return np.where(d0 >= geom.d_max, 1.0, out)


def mean_downlink_distance(geom: ConstellationGeometry) -> float:
    """Chord length at the mean nearest-satellite angle.

    This is a plug-in value, not ``E[d_down]``; see
    :func:`expected_downlink_distance` for the latter.
    """
    return float(chord_distance(mean_theta1(geom), geom))


def expected_downlink_distance(geom: ConstellationGeometry,
                               quad: QuadratureConfig = DEFAULT_QUAD) -> float:
    """``E[d_down]`` as the integral of the downlink survival function."""
    def sf(d):
        return 1.0 - downlink_distance_cdf(d, geom)
    edges = _mass_edges(geom)
    pieces = integrate_intervals(sf, chord_distance(edges, geom), quad).value
    return geom.d_min + float(math.fsum(pieces))


def _mass_edges(geom: ConstellationGeometry, centre: float = 0.0, n: int = 24):
    """Breakpoints in central angle, dense where the nearest-satellite mass sits."""
    width = min(math.pi, 12.0 / math.sqrt(geom.n_sats))
    lo = max(0.0, centre - width)
    hi = min(math.pi, centre + width)
    pts = np.unique(np.concatenate([[0.0], np.linspace(lo, hi, n), [math.pi]]))
    return pts


# --- transmitter-side central angle -------------------------------------------------

def _ring_density(psi, geom: ConstellationGeometry):
    """Density per steradian of the relay lying at angle ``psi`` from the receiver.

    Equals ``theta1_pdf(psi) / (2 pi sin psi)`` with the ``sin`` cancelled,
    which also supplies the finite limit at ``psi -> 0``.
    """
    psi = np.asarray(psi, dtype=float)
    inside = (psi >= 0) & (psi <= math.pi)
    n = geom.n_sats
    hav = np.sin(0.5 * np.where(inside, psi, 0.0)) ** 2
    # cos^2(psi/2)^(n-1) through log1p: a plain power amplifies rounding n-fold.
    with np.errstate(divide="ignore"):
        dens = np.exp((n - 1) * np.log1p(-hav))
    return np.where(inside, n / (4.0 * math.pi) * dens, 0.0)


def _azimuth_edges(n: int = 16) -> np.ndarray:
    # Geometric grading toward phi = 0 where the ring integrand peaks.
    return np.concatenate([[0.0], math.pi * 2.0 ** -np.arange(n - 1, -1, -1.0)])


def _theta2_ring(beta, Theta, geom, quad, literal=False):
    """``integral over phi in [0, 2pi)`` of the ring density at ``(beta, phi)``."""
    beta = np.atleast_1d(np.asarray(beta, dtype=float))

    def integrand(phi):
        return _ring_density(psi_of(beta[:, None], phi[None, :], Theta, literal=literal), geom)

    pieces = integrate_intervals(integrand, _azimuth_edges(), quad.tightened()).value
    # The integrand is even in phi.
    return 2.0 * pieces.sum(axis=-1)


def _check_beta(beta):
    beta = np.asarray(beta, dtype=float)
    if np.any(beta < 0) or np.any(beta > math.pi) or np.any(~np.isfinite(beta)):
        raise ValueError("beta must lie in [0, pi]")
    return beta


_BLOCK = 2048


def theta2_pdf(beta, Theta: float, geom: ConstellationGeometry,
               quad: QuadratureConfig = DEFAULT_QUAD, literal: bool = False):
    """Density of the relay's central angle from the transmitter."""
    beta = _check_beta(beta)
    flat = beta.ravel()
    out = np.empty(flat.size)
    for start in range(0, flat.size, _BLOCK):
        b = flat[start:start + _BLOCK]
        out[start:start + _BLOCK] = np.sin(b) * _theta2_ring(b, Theta, geom, quad, literal)
    return out.reshape(beta.shape) if beta.ndim else float(out[0])


def _theta2_edges(Theta, geom):
    edges = _mass_edges(geom, centre=Theta, n=48)
    return edges


def theta2_cdf(beta, Theta: float, geom: ConstellationGeometry,
               quad: QuadratureConfig = DEFAULT_QUAD, literal: bool = False,
               max_exact: int = 4096):
    """CDF of the relay's central angle from the transmitter.

    The double integral is evaluated as an adaptive integral over the polar
    angle of the azimuthal ring integral.  For arrays with more than
    ``max_exact`` distinct points the CDF is computed exactly at about that
    many knots (split between quantiles of the query points and the region
    holding the mass) and interpolated monotonically between them.
    """
    beta = _check_beta(beta)
    flat = beta.ravel()

    def pdf(x):
        return theta2_pdf(x, Theta, geom, quad, literal)

    uniq = np.unique(flat)
    if uniq.size > max_exact:
        from scipy.interpolate import PchipInterpolator

        # Half the knots follow the query points, half cover the mass window.
        edges = _theta2_edges(Theta, geom)
        width = min(math.pi, 12.0 / math.sqrt(geom.n_sats))
        window = np.linspace(max(0.0, Theta - width), min(math.pi, Theta + width), max_exact // 2)
        knots = np.unique(np.concatenate(
            [np.quantile(uniq, np.linspace(0.0, 1.0, max_exact - max_exact // 2)), window, edges]))
        values = _cdf_at(pdf, knots, _theta2_edges(Theta, geom))
        out = PchipInterpolator(knots, values)(flat)
    else:
        out = _cdf_at(pdf, flat, _theta2_edges(Theta, geom))
    out = np.clip(out, 0.0, 1.0)
    return out.reshape(beta.shape) if beta.ndim else float(out[0])


def _cdf_at(pdf, x, breakpoints):
    """Cumulative integral of ``pdf`` from 0, with extra breakpoints folded in."""
    x = np.asarray(x, dtype=float)
    grid = np.union1d(x, breakpoints)
    values = cumulative(pdf, grid, 0.0)
    return values[np.searchsorted(grid, x)]


# --- uplink distance ----------------------------------------------------------------

def uplink_distance_cdf(d0, Theta: float, geom: ConstellationGeometry,
                        quad: QuadratureConfig = DEFAULT_QUAD, literal: bool = False):
    """CDF of the transmitter-to-relay distance: the theta2 CDF at ``theta(d0)``."""
    d0 = np.asarray(d0, dtype=float)
    clipped = np.clip(d0, geom.d_min, geom.d_max)
    out = np.asarray(theta2_cdf(central_angle_from_chord(clipped, geom), Theta, geom, quad, literal))
    out = np.where(d0 <= geom.d_min, 0.0, out)
    out = np.where(d0 >= geom.d_max, 1.0, out)
    return out if out.ndim else float(out)


def uplink_distance_pdf(d0, Theta: float, geom: ConstellationGeometry,
                        quad: QuadratureConfig = DEFAULT_QUAD, literal: bool = False):
    """Density of the transmitter-to-relay distance.

    ``f(d) = f_theta2(theta) * d / (Rs Re sin theta)``; the ``sin theta``
    cancels against the one inside ``f_theta2`` so the zenith end is finite.
    """
    d0 = np.asarray(d0, dtype=float)
    flat = d0.ravel()
    inside = (flat > geom.d_min) & (flat < geom.d_max)
    out = np.zeros(flat.size)
    if np.any(inside):
        d_in = flat[inside]
        theta = central_angle_from_chord(d_in, geom)
        ring = np.empty(d_in.size)
        for start in range(0, d_in.size, _BLOCK):
            ring[start:start + _BLOCK] = _theta2_ring(theta[start:start + _BLOCK], Theta, geom, quad, literal)
        out[inside] = ring * d_in / (geom.rs_km * geom.re_km)
    return out.reshape(d0.shape) if d0.ndim else float(out[0])


# --- shadowed-Rician fading ---------------------------------------------------------

_RESCALE = 1e280
_LOG_RESCALE = math.log(_RESCALE)


def sr_pdf(t, params: ShadowedRicianParams = DEFAULT_FADING):
    """SR fading-power density, summing the confluent series term by term.

    Successive terms follow ``a_{n+1} / a_n = x (m + n) / (n + 1)^2`` with
    ``x = omega t / (2 b0 (2 b0 m + omega))``; summation stops once the next
    term is below ``series_eps`` of the running sum and terms are shrinking.
    Terms only start shrinking near ``n ~ x``, so with ``omega >> 2 b0 m`` and
    large ``t`` the budget ``series_max_terms`` can run out; that raises
    :class:`SeriesTruncationError` rather than returning a truncated value.
    """
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("fading power must be nonnegative")
    m, b0, om = params.m, params.b0, params.omega
    two_b0 = 2.0 * b0
    x = om * t / (two_b0 * (two_b0 * m + om))
    flat_x = np.atleast_1d(x).ravel()
    flat_t = np.atleast_1d(t).ravel()
    total = np.ones_like(flat_x)
    term = np.ones_like(flat_x)
    # Partial sums can pass the float range before the terms turn over, so
    # both are rescaled in place and the scale is carried in logs.
    log_scale = np.zeros_like(flat_x)
    # exp(-t / 2b0) * 1F1(m; 1; x) <= exp(-t / 2b0 + x) (1 + x)^m; beyond this the density underflows.
    negligible = flat_t / two_b0 - flat_x - m * np.log1p(flat_x) > 800.0
    active = (flat_x > 0) & ~negligible
    n = 0
    while np.any(active):
        if n >= params.series_max_terms:
            raise SeriesTruncationError(
                f"SR series not converged after {params.series_max_terms} terms")
        idx = np.nonzero(active)[0]
        ratio = flat_x[idx] * (m + n) / ((n + 1.0) ** 2)
        term[idx] *= ratio
        total[idx] += term[idx]
        big = idx[total[idx] > _RESCALE]
        if big.size:
            term[big] /= _RESCALE
            total[big] /= _RESCALE
            log_scale[big] += _LOG_RESCALE
        done = (term[idx] < params.series_eps * total[idx]) & (ratio < 1.0)
        active[idx[done]] = False
        n += 1
    log_lead = m * math.log(two_b0 * m / (two_b0 * m + om)) - math.log(two_b0)
    out = np.exp(log_lead - flat_t / two_b0 + np.log(total) + log_scale)
    out[negligible] = 0.0
    return out.reshape(t.shape) if t.ndim else float(out[0])


def _mixture_weights(params: ShadowedRicianParams):
    """Negative-binomial weights of the gamma mixture equivalent to the SR series."""
    p = params.los_fraction
    if p == 0.0:
        return np.array([1.0])
    q = 1.0 - p
    mean = params.m * p / q
    n_hi = int(math.ceil(2.0 * mean + 64.0))
    while True:
        k = np.arange(n_hi + 1)
        logw = (special.gammaln(params.m + k) - special.gammaln(params.m) - special.gammaln(k + 1.0)
                + params.m * math.log(q) + k * math.log(p))
        w = np.exp(logw)
        # Past the mode the weights fall geometrically, so a small last weight bounds the tail.
        if k[-1] > mean and (w[-1] / (1.0 - p) < 1e-17 or math.fsum(w) >= 1.0 - 1e-16):
            return w
        if n_hi > 10 * params.series_max_terms:
            raise SeriesTruncationError("SR mixture weights did not converge")
        n_hi *= 2


def sr_cdf(t, params: ShadowedRicianParams = DEFAULT_FADING):
    """SR fading-power CDF through its gamma-mixture representation.

    The density is ``sum_n w_n Gamma(n + 1, scale 2 b0)`` with negative
    binomial weights ``w_n``, so the CDF is a weighted sum of regularised
    incomplete gamma functions.
    """
    t = np.asarray(t, dtype=float)
    w = _mixture_weights(params)
    k = np.arange(w.size)
    z = np.clip(t, 0.0, None)[..., None] / (2.0 * params.b0)
    out = (w * special.gammainc(k + 1.0, z)).sum(axis=-1)
    return out if out.ndim else float(out)


def sr_sf(t, params: ShadowedRicianParams = DEFAULT_FADING):
    """SR fading-power survival function ``P(W > t)``."""
    t = np.asarray(t, dtype=float)
    w = _mixture_weights(params)
    k = np.arange(w.size)
    z = np.clip(t, 0.0, None)[..., None] / (2.0 * params.b0)
    out = (w * special.gammaincc(k + 1.0, z)).sum(axis=-1)
    return out if out.ndim else float(out)


def sr_mgf(sigma, params: ShadowedRicianParams = DEFAULT_FADING):
    """Laplace transform ``E[exp(-sigma W)]`` of the SR fading power."""
    sigma = np.asarray(sigma, dtype=float)
    m, b0, om = params.m, params.b0, params.omega
    u = 1.0 + 2.0 * b0 * sigma
    # Finite while both factors stay positive, which includes a neighbourhood of 0.
    if np.any(u <= om / (2.0 * b0 * m + om)):
        raise ValueError("sigma below the abscissa of convergence")
    # (2 b0 m)^m u^(m-1) / ((2 b0 m + omega) u - omega)^m, in logs
    log_val = (m * np.log(2.0 * b0 * m) + (m - 1.0) * np.log(u)
               - m * np.log((2.0 * b0 * m + om) * u - om))
    out = np.exp(log_val)
    return out if out.ndim else float(out)


def sr_mean(params: ShadowedRicianParams = DEFAULT_FADING) -> float:
    return params.omega + 2.0 * params.b0


def sr_sample(rng: np.random.Generator, params: ShadowedRicianParams = DEFAULT_FADING,
              size=None):
    """Draw SR fading powers.

    Line-of-sight power is Gamma(m, omega / m); given it, the received power
    is Rician with scatter power ``2 b0``, i.e. ``b0`` times a noncentral
    chi-square with two degrees of freedom.
    """
    if params.omega == 0.0:
        return rng.exponential(2.0 * params.b0, size=size)
    los = rng.gamma(params.m, params.omega / params.m, size=size)
    return params.b0 * rng.noncentral_chisquare(2.0, los / params.b0, size=size)
