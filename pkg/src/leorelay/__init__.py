"""Delay analysis for ground-satellite-ground relaying over a random LEO constellation."""

from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("artifact")
except PackageNotFoundError:  # running from a source tree
    __version__ = "0.0.0"

from .delay import (
    DelayIntegrationConfig,
    PacketParams,
    avg_delay_downlink,
    avg_delay_uplink,
    link_delay,
    optimal_relay_angle,
    snr_up_pdf,
    total_delay_analytic,
)
from .distributions import ShadowedRicianParams
from .geometry import ConstellationGeometry, l_max, min_hops, visibility_angle
from .link_budget import DEFAULT_DOWNLINK, DEFAULT_UPLINK, LinkBudgetParams
from .montecarlo import ScenarioConfig, run_campaign, simulate_multihop

__all__ = [
    "__version__",
    "ConstellationGeometry",
    "ShadowedRicianParams",
    "LinkBudgetParams",
    "DEFAULT_UPLINK",
    "DEFAULT_DOWNLINK",
    "PacketParams",
    "DelayIntegrationConfig",
    "ScenarioConfig",
    "visibility_angle",
    "l_max",
    "min_hops",
    "link_delay",
    "avg_delay_downlink",
    "avg_delay_uplink",
    "snr_up_pdf",
    "total_delay_analytic",
    "optimal_relay_angle",
    "run_campaign",
    "simulate_multihop",
]
