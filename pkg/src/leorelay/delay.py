"""Transmission-delay analytics for the relay hop.

Per-link delay is ``M / (B log2(1 + SNR))``.  The downlink average uses the
plug-in formula (mean distance and mean fading inside the log).  The uplink
average integrates the delay against the density of the uplink SNR over a
finite window ``[gamma_min, gamma_max]``: the density is positive at
``gamma -> 0`` while the delay grows like ``1 / gamma``, so the untruncated
expectation is infinite.  The mass left outside the window is reported.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .distributions import (
    ShadowedRicianParams,
    _mass_edges,
    downlink_distance_pdf,
    mean_downlink_distance,
    sr_cdf,
    sr_mean,
    sr_pdf,
    sr_sf,
    uplink_distance_pdf,
)
from .geometry import (
    ConstellationGeometry,
    InfeasibleGeometryError,
    chord_distance,
    visibility_angle,
)
from .link_budget import LinkBudgetParams, db_to_linear, snr, z_of_gamma
from .quadrature import DEFAULT_QUAD, QuadratureConfig, integrate, integrate_full

__all__ = [
    "PacketParams",
    "DelayIntegrationConfig",
    "WindowedDelay",
    "TruncatedMassWarning",
    "link_delay",
    "avg_delay_downlink",
    "snr_up_pdf",
    "snr_up_cdf",
    "snr_down_pdf",
    "snr_down_cdf",
    "snr_quantile",
    "avg_delay_uplink",
    "expected_delay_downlink",
    "total_delay_analytic",
    "relay_objective",
    "feasible_relay_interval",
    "optimal_relay_angle",
]


class TruncatedMassWarning(UserWarning):
    """More than the allowed probability mass falls outside the SNR window."""


@dataclass(frozen=True)
class PacketParams:
    packet_bits: float = 0.5e9
    bandwidth: float = 0.5e9

    def __post_init__(self):
        if not (self.packet_bits > 0 and self.bandwidth > 0):
            raise ValueError("packet size and bandwidth must be positive")


@dataclass(frozen=True)
class DelayIntegrationConfig:
    """SNR window for the uplink delay integral.

    ``gamma_max=None`` means: pick the upper SNR quantile at ``1 - upper_tail``.
    """

    gamma_min: float = float(db_to_linear(-20.0))
    gamma_max: float | None = None
    upper_tail: float = 1e-6
    mass_warning: float = 1e-3
    quad: QuadratureConfig = field(default_factory=QuadratureConfig)

    def __post_init__(self):
        if not self.gamma_min > 0:
            raise ValueError("gamma_min must be positive")
        if self.gamma_max is not None and not self.gamma_max > self.gamma_min:
            raise ValueError("need 0 < gamma_min < gamma_max")
        if not 0 < self.upper_tail < 1:
            raise ValueError("upper_tail must lie in (0, 1)")


@dataclass(frozen=True)
class WindowedDelay:
    """Result of a windowed delay integral."""

    delay: float
    gamma_min: float
    gamma_max: float
    window_mass: float
    mass_below: float
    mass_above: float

    @property
    def truncated_mass(self) -> float:
        return self.mass_below + self.mass_above

    def __float__(self) -> float:
        return self.delay


def link_delay(snr_linear, pkt: PacketParams):
    """Transmission time of one packet; ``inf`` where the SNR is zero."""
    s = np.asarray(snr_linear, dtype=float)
    if np.any(s < 0):
        raise ValueError("SNR must be nonnegative")
    with np.errstate(divide="ignore"):
        out = pkt.packet_bits / (pkt.bandwidth * np.log2(1.0 + s))
    return out if out.ndim else float(out)


def avg_delay_downlink(geom: ConstellationGeometry, params: LinkBudgetParams,
                       srp: ShadowedRicianParams, pkt: PacketParams) -> float:
    """Plug-in downlink delay: the mean nearest-satellite distance and the
    mean fading power substituted into the delay formula."""
    gamma = snr(mean_downlink_distance(geom), sr_mean(srp), params)
    return link_delay(gamma, pkt)


class _SnrLaw:
    """Distribution of ``snr(d, W)`` with ``d`` drawn from ``dist_pdf`` and ``W`` SR."""

    def __init__(self, dist_pdf, angle_edges, geom, params, srp, quad):
        self.dist_pdf = dist_pdf
        self.geom = geom
        self.params = params
        self.srp = srp
        self.quad = quad
        self.inner = quad.tightened()
        d_edges = chord_distance(angle_edges, geom)
        self.d_edges = d_edges
        self.u_edges = d_edges ** 2

    def pdf(self, gamma):
        """Density of the SNR, a vector-valued integral over squared distance ``u`` (km^2)."""
        gamma = np.asarray(gamma, dtype=float)
        flat = gamma.ravel()
        z = z_of_gamma(np.atleast_1d(flat), self.params) * 1e6  # per km^2
        jac = 1e6 / self.params.snr_gain                         # dz/dgamma, per km^2

        def integrand(u):
            root = np.sqrt(u)
            w = np.multiply.outer(z, u)
            return jac * 0.5 * root * sr_pdf(w, self.srp) * self.dist_pdf(root)

        value = integrate_full(integrand, self.u_edges[0], self.u_edges[-1], self.inner,
                               self.u_edges[1:-1]).value
        value = np.maximum(np.atleast_1d(value), 0.0)
        return value.reshape(gamma.shape) if gamma.ndim else float(value[0])

    def _tail(self, fn, gamma):
        z = z_of_gamma(gamma, self.params) * 1e6

        def integrand(d):
            return fn(z * d * d, self.srp) * self.dist_pdf(d)

        return float(integrate(integrand, self.d_edges[0], self.d_edges[-1], self.inner,
                               self.d_edges[1:-1]))

    def mass_below(self, gamma: float) -> float:
        return self._tail(sr_cdf, gamma)

    def mass_above(self, gamma: float) -> float:
        return self._tail(sr_sf, gamma)

    def lower_quantile(self, p: float) -> float:
        """``g`` with ``P(SNR <= g) = p``."""
        hi = float(snr(self.geom.d_min, sr_mean(self.srp), self.params))
        while self.mass_below(hi) < p:
            hi *= 4.0
        lo = hi / 4.0
        while self.mass_below(lo) > p:
            lo /= 4.0
        f = lambda lg: math.log(self.mass_below(math.exp(lg))) - math.log(p)
        return math.exp(optimize.brentq(f, math.log(lo), math.log(hi), xtol=1e-9))

    def upper_quantile(self, tail: float, start: float) -> float:
        """``g > start`` with ``P(SNR > g) = tail``, to root-finding tolerance."""
        lo = start
        hi = max(start * 2.0, float(snr(self.geom.d_min, sr_mean(self.srp), self.params)))
        while self.mass_above(hi) > tail:
            lo, hi = hi, hi * 4.0
        if self.mass_above(lo) <= tail:
            raise ValueError(f"less than {tail:g} of the SNR mass lies above {lo:g}")
        f = lambda lg: math.log(self.mass_above(math.exp(lg))) - math.log(tail)
        return math.exp(optimize.brentq(f, math.log(lo), math.log(hi), xtol=1e-6))

    def windowed_delay(self, pkt: PacketParams, cfg: DelayIntegrationConfig) -> WindowedDelay:
        g_lo = cfg.gamma_min
        g_hi = cfg.gamma_max
        if g_hi is None:
            g_hi = self.upper_quantile(cfg.upper_tail, g_lo)
        edges = np.geomspace(g_lo, g_hi, 25)

        def weighted(g):
            p = self.pdf(g)
            return np.stack([link_delay(g, pkt) * p, p])

        res = integrate_full(weighted, g_lo, g_hi, cfg.quad, edges[1:-1]).value
        delay, mass = float(res[0]), float(res[1])
        below = self.mass_below(g_lo)
        above = self.mass_above(g_hi)
        if below + above > cfg.mass_warning:
            warnings.warn(
                f"{below + above:.3e} of the SNR mass lies outside "
                f"[{g_lo:.3g}, {g_hi:.3g}]", TruncatedMassWarning, stacklevel=3)
        return WindowedDelay(delay, g_lo, g_hi, mass, below, above)


def _uplink_law(Theta, geom, params, srp, quad, literal=False):
    def pdf(d):
        return uplink_distance_pdf(d, Theta, geom, quad.tightened(), literal)
    return _SnrLaw(pdf, _mass_edges(geom, centre=Theta, n=48), geom, params, srp, quad)


def _downlink_law(geom, params, srp, quad):
    def pdf(d):
        return downlink_distance_pdf(d, geom)
    return _SnrLaw(pdf, _mass_edges(geom, n=48), geom, params, srp, quad)


def snr_up_pdf(gamma, Theta: float, geom: ConstellationGeometry, params: LinkBudgetParams,
               srp: ShadowedRicianParams, quad: QuadratureConfig = DEFAULT_QUAD,
               literal: bool = False):
    """Density of the uplink SNR at ``gamma``.

    ``f(g) = z'(g) * integral of (sqrt(u) / 2) f_W(z(g) u) f_dup(sqrt(u)) du`` over
    ``u = d^2``; ``z'(g)`` is the Jacobian of the map from SNR to fading power.
    """
    return _uplink_law(Theta, geom, params, srp, quad, literal).pdf(gamma)


def snr_up_cdf(gamma, Theta: float, geom: ConstellationGeometry, params: LinkBudgetParams,
               srp: ShadowedRicianParams, quad: QuadratureConfig = DEFAULT_QUAD,
               literal: bool = False):
    """``P(SNR_up <= gamma)``, integrating the fading CDF against the uplink distance law."""
    law = _uplink_law(Theta, geom, params, srp, quad, literal)
    g = np.asarray(gamma, dtype=float)
    out = np.array([law.mass_below(v) if v > 0 else 0.0 for v in g.ravel()])
    return out.reshape(g.shape) if g.ndim else float(out[0])


def snr_down_cdf(gamma, geom: ConstellationGeometry, params: LinkBudgetParams,
                 srp: ShadowedRicianParams, quad: QuadratureConfig = DEFAULT_QUAD):
    """``P(SNR_down <= gamma)``."""
    law = _downlink_law(geom, params, srp, quad)
    g = np.asarray(gamma, dtype=float)
    out = np.array([law.mass_below(v) if v > 0 else 0.0 for v in g.ravel()])
    return out.reshape(g.shape) if g.ndim else float(out[0])


def snr_quantile(p: float, link: str, Theta: float, geom: ConstellationGeometry,
                 params: LinkBudgetParams, srp: ShadowedRicianParams,
                 quad: QuadratureConfig = DEFAULT_QUAD) -> float:
    """SNR level below which a fraction ``p`` of the uplink or downlink SNR mass lies."""
    if not 0 < p < 1:
        raise ValueError("p must lie in (0, 1)")
    if link == "up":
        law = _uplink_law(Theta, geom, params, srp, quad)
    elif link == "down":
        law = _downlink_law(geom, params, srp, quad)
    else:
        raise ValueError("link must be 'up' or 'down'")
    return law.lower_quantile(p)


def snr_down_pdf(gamma, geom: ConstellationGeometry, params: LinkBudgetParams,
                 srp: ShadowedRicianParams, quad: QuadratureConfig = DEFAULT_QUAD):
    """Density of the downlink SNR, built like :func:`snr_up_pdf` from the downlink distance law."""
    return _downlink_law(geom, params, srp, quad).pdf(gamma)


def avg_delay_uplink(Theta: float, geom: ConstellationGeometry, params: LinkBudgetParams,
                     srp: ShadowedRicianParams, pkt: PacketParams,
                     cfg: DelayIntegrationConfig = DelayIntegrationConfig(),
                     literal: bool = False) -> WindowedDelay:
    """Uplink delay integrated over the SNR window of ``cfg``.

    The value is ``E[tau_up; gamma_min <= SNR <= gamma_max]``, i.e. not
    renormalised by the window mass.
    """
    return _uplink_law(Theta, geom, params, srp, cfg.quad, literal).windowed_delay(pkt, cfg)


def expected_delay_downlink(geom: ConstellationGeometry, params: LinkBudgetParams,
                            srp: ShadowedRicianParams, pkt: PacketParams,
                            cfg: DelayIntegrationConfig = DelayIntegrationConfig()) -> WindowedDelay:
    """Windowed true expectation of the downlink delay (diagnostic for the plug-in value)."""
    return _downlink_law(geom, params, srp, cfg.quad).windowed_delay(pkt, cfg)


def total_delay_analytic(Theta: float, geom: ConstellationGeometry,
                         up: LinkBudgetParams, down: LinkBudgetParams,
                         srp: ShadowedRicianParams, packet_bits: float,
                         cfg: DelayIntegrationConfig = DelayIntegrationConfig(),
                         literal: bool = False) -> float:
    tau_up = avg_delay_uplink(Theta, geom, up, srp, PacketParams(packet_bits, up.bandwidth),
                              cfg, literal).delay
    tau_down = avg_delay_downlink(geom, down, srp, PacketParams(packet_bits, down.bandwidth))
    return tau_up + tau_down


# --- relay position ---------------------------------------------------------------------

def relay_objective(t, Theta: float, geom: ConstellationGeometry,
                    up: LinkBudgetParams, down: LinkBudgetParams,
                    srp: ShadowedRicianParams, packet_bits: float):
    """Mean-fading delays for a relay at central angle ``t`` from the receiver.

    Returns ``(tau_up, tau_down)``; the relay sits on the great circle between
    the stations, ``Theta - t`` from the transmitter.
    """
    t = np.asarray(t, dtype=float)
    w = sr_mean(srp)
    tau_up = link_delay(snr(chord_distance(Theta - t, geom), w, up),
                        PacketParams(packet_bits, up.bandwidth))
    tau_down = link_delay(snr(chord_distance(t, geom), w, down),
                          PacketParams(packet_bits, down.bandwidth))
    return tau_up, tau_down


def feasible_relay_interval(Theta: float, geom: ConstellationGeometry) -> tuple[float, float]:
    """Arc positions ``t`` (from the receiver) visible from both stations."""
    alpha = visibility_angle(geom)
    lo, hi = max(0.0, Theta - alpha), min(Theta, alpha)
    if lo > hi:
        raise InfeasibleGeometryError(
            f"stations {Theta:.4f} rad apart share no visible relay position "
            f"(limit {2 * alpha:.4f} rad)")
    return lo, hi


def _golden(f, a, b, tol):
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def optimal_relay_angle(Theta: float, geom: ConstellationGeometry,
                        up: LinkBudgetParams, down: LinkBudgetParams,
                        srp: ShadowedRicianParams, packet_bits: float,
                        n_grid: int = 512, tol: float = 1e-12) -> float:
    """Relay position minimising the mean-fading total delay.

    A grid scan over the feasible arc is refined by golden-section search in
    the bracket around the best grid point.  Ties go to the point nearer the
    receiver (smaller ``t``).
    """
    lo, hi = feasible_relay_interval(Theta, geom)
    if hi == lo:
        return lo

    def total(t):
        tu, td = relay_objective(t, Theta, geom, up, down, srp, packet_bits)
        return tu + td

    grid = np.linspace(lo, hi, n_grid)
    values = total(grid)
    k = int(np.argmin(values))
    a, b = grid[max(k - 1, 0)], grid[min(k + 1, n_grid - 1)]
    t_ref = _golden(lambda t: float(total(t)), a, b, tol)
    return t_ref if float(total(t_ref)) < values[k] else float(grid[k])
