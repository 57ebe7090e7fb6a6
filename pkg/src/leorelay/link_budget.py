"""Free-space link budget: propagation gain, noise power and received SNR.

Everything here is in linear units with distances in kilometres at the
interface and metres inside the formulas.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

__all__ = [
    "BOLTZMANN",
    "LinkBudgetParams",
    "db_to_linear",
    "linear_to_db",
    "noise_power",
    "propagation_loss",
    "snr",
    "z_of_gamma",
    "DEFAULT_UPLINK",
    "DEFAULT_DOWNLINK",
]

BOLTZMANN = 1.380649e-23  # J/K


def db_to_linear(value_db):
    return 10.0 ** (np.asarray(value_db, dtype=float) / 10.0)


def linear_to_db(value):
    return 10.0 * np.log10(np.asarray(value, dtype=float))


def noise_power(boltzmann: float, bandwidth: float, temperature: float) -> float:
    if min(boltzmann, bandwidth, temperature) <= 0:
        raise ValueError("noise power inputs must be positive")
    return boltzmann * bandwidth * temperature


@dataclass(frozen=True)
class LinkBudgetParams:
    """One direction of a ground-satellite link.

    ``eirp`` is transmit power times transmit antenna gain (W).  Losses are
    linear factors >= 1.  Give either ``noise_power`` directly or
    ``noise_temperature`` (then ``N = k B T``), not both.
    """

    eirp: float
    wavelength: float
    bandwidth: float
    noise_power: float | None = None
    noise_temperature: float | None = None
    rx_gain: float = 1.0
    feeder_loss_tx: float = 1.0
    feeder_loss_rx: float = 1.0
    additional_loss: float = 1.0

    def __post_init__(self):
        if (self.noise_power is None) == (self.noise_temperature is None):
            raise ValueError("give exactly one of noise_power or noise_temperature")
        if self.noise_power is None:
            object.__setattr__(self, "noise_power",
                               noise_power(BOLTZMANN, self.bandwidth, self.noise_temperature))
            object.__setattr__(self, "noise_temperature", None)
        for name in ("eirp", "wavelength", "bandwidth", "noise_power", "rx_gain"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        for name in ("feeder_loss_tx", "feeder_loss_rx", "additional_loss"):
            if not getattr(self, name) >= 1.0:
                raise ValueError(f"{name} must be >= 1 (linear)")

    @property
    def total_loss(self) -> float:
        return self.feeder_loss_tx * self.feeder_loss_rx * self.additional_loss

    @property
    def snr_gain(self) -> float:
        """SNR per unit fading power at 1 m: ``eirp G_rx lambda^2 / ((4 pi)^2 L N)``."""
        return (self.eirp * self.rx_gain * self.wavelength ** 2
                / ((4.0 * math.pi) ** 2 * self.total_loss * self.noise_power))

    def scaled(self, factor: float) -> "LinkBudgetParams":
        """Same link with EIRP and noise both multiplied by ``factor``."""
        return replace(self, eirp=self.eirp * factor, noise_power=self.noise_power * factor)


def _metres(d_km):
    d = np.asarray(d_km, dtype=float)
    if np.any(~(d > 0)):
        raise ValueError("distance must be positive")
    return d * 1e3


def propagation_loss(d, params: LinkBudgetParams,
                     tx_gain: float = 1.0):
    """Linear end-to-end gain ``G_tx G_rx lambda^2 / ((4 pi d)^2 L_tx L_rx L_add)``.

    ``tx_gain`` defaults to 1 because the transmit antenna gain is already
    folded into the EIRP.
    """
    d_m = _metres(d)
    out = (tx_gain * params.rx_gain * params.wavelength ** 2
           / ((4.0 * math.pi * d_m) ** 2 * params.total_loss))
    return out if out.ndim else float(out)


def snr(d, fading_power, params: LinkBudgetParams):
    """Received SNR at distance ``d`` (km) for fading power ``fading_power``."""
    d_m = _metres(d)
    w = np.asarray(fading_power, dtype=float)
    if np.any(w < 0):
        raise ValueError("fading power must be nonnegative")
    out = params.snr_gain * w / d_m ** 2
    return out if out.ndim else float(out)


def z_of_gamma(gamma, params: LinkBudgetParams):
    """Fading power per square metre of distance producing SNR ``gamma``.

    ``snr(d, z_of_gamma(g) * d_m**2) == g``.
    """
    g = np.asarray(gamma, dtype=float)
    if np.any(g < 0):
        raise ValueError("gamma must be nonnegative")
    out = g / params.snr_gain
    return out if out.ndim else float(out)


# Reference budgets: EIRP 60 dB up, 30 dB down; L_add 3 dB; noise 3.6e-12 W both ways.
DEFAULT_UPLINK = LinkBudgetParams(
    eirp=float(db_to_linear(60.0)),
    wavelength=0.015,
    bandwidth=0.5e9,
    noise_power=3.6e-12,
    additional_loss=float(db_to_linear(3.0)),
)
DEFAULT_DOWNLINK = LinkBudgetParams(
    eirp=float(db_to_linear(30.0)),
    wavelength=0.0231,
    bandwidth=0.25e9,
    noise_power=3.6e-12,
    additional_loss=float(db_to_linear(3.0)),
)
