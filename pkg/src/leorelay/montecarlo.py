"""Seeded Monte-Carlo simulation of the ground-satellite-ground relay unit.

The receiver sits at the north pole and the transmitter at polar angle
``theta_sep`` on the zero meridian.  Each trial draws ``n_sats`` satellites
uniformly on the shell, keeps those above both stations' horizons, relays
through the one nearest the receiver and draws independent SR fading for
the two links.

Trials are simulated in fixed blocks of ``BLOCK_SIZE``.  Block ``k`` of
stream ``s`` draws from a Philox generator keyed by ``(seed, s, k)``, so a
trial's random numbers depend only on its index and never on how blocks are
scheduled across workers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .delay import PacketParams, link_delay
from .distributions import DEFAULT_FADING, ShadowedRicianParams, sr_mean, sr_sample
from .geometry import (
    ConstellationGeometry,
    InfeasibleGeometryError,
    SphericalPoint,
    chord_distance,
    ground_separation_angle,
    min_hops,
    visibility_angle,
)
from .link_budget import DEFAULT_DOWNLINK, DEFAULT_UPLINK, LinkBudgetParams, snr

__all__ = [
    "BLOCK_SIZE",
    "DEFAULT_SEPARATION_KM",
    "ScenarioConfig",
    "RelayChoice",
    "EpisodeResult",
    "DelayStats",
    "MultihopStats",
    "substream",
    "sample_constellation",
    "select_relay",
    "simulate_episode",
    "simulate_trials",
    "run_campaign",
    "simulate_multihop",
]

BLOCK_SIZE = 1024
DEFAULT_SEPARATION_KM = 500.0
_Z95 = 1.959963984540054


@dataclass(frozen=True)
class ScenarioConfig:
    """Everything one simulated experiment needs.

    ``min_snr``, when set, additionally requires a candidate relay to give at
    least that mean-fading SNR on both links.
    """

    geom: ConstellationGeometry = field(default_factory=ConstellationGeometry)
    theta_sep: float = DEFAULT_SEPARATION_KM / 6371.0
    uplink: LinkBudgetParams = DEFAULT_UPLINK
    downlink: LinkBudgetParams = DEFAULT_DOWNLINK
    srp: ShadowedRicianParams = DEFAULT_FADING
    packet_bits: float = 0.5e9
    seed: int = 0
    n_trials: int = 100_000
    min_snr: float | None = None

    def __post_init__(self):
        if not 0.0 <= self.theta_sep <= math.pi:
            raise ValueError("theta_sep must lie in [0, pi]")
        if self.n_trials < 1:
            raise ValueError("n_trials must be >= 1")
        if not self.packet_bits > 0:
            raise ValueError("packet_bits must be positive")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")

    @property
    def pkt_up(self) -> PacketParams:
        return PacketParams(self.packet_bits, self.uplink.bandwidth)

    @property
    def pkt_down(self) -> PacketParams:
        return PacketParams(self.packet_bits, self.downlink.bandwidth)

    def with_(self, **changes) -> "ScenarioConfig":
        return replace(self, **changes)


@dataclass(frozen=True)
class RelayChoice:
    index: int
    theta1: float
    theta2: float
    d_up: float
    d_down: float


@dataclass(frozen=True)
class EpisodeResult:
    relay_found: bool
    d_up: float = math.nan
    d_down: float = math.nan
    w2_up: float = math.nan
    w2_down: float = math.nan
    snr_up: float = math.nan
    snr_down: float = math.nan
    tau_up: float = math.nan
    tau_down: float = math.nan
    tau_total: float = math.nan
    theta1: float = math.nan
    theta2: float = math.nan


def substream(seed: int, *key: int) -> np.random.Generator:
    """Counter-based generator for ``(seed, *key)``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=key)))


def sample_constellation(rng: np.random.Generator, geom: ConstellationGeometry) -> list[SphericalPoint]:
    """``n_sats`` points i.i.d. uniform on the shell."""
    cos_polar = rng.uniform(-1.0, 1.0, geom.n_sats)
    azimuth = rng.uniform(0.0, 2.0 * math.pi, geom.n_sats)
    return [SphericalPoint(float(np.arccos(c)), float(a), geom.rs_km)
            for c, a in zip(cos_polar, azimuth)]


def _tx_direction(theta_sep):
    return np.array([math.sin(theta_sep), 0.0, math.cos(theta_sep)])


def _choose(cos_rx, cos_tx, cos_key, feasible):
    """Row-wise argmax of ``cos_key`` over feasible columns, ties to larger ``cos_tx``
    then to the lowest column.  Rows with no feasible column get -1."""
    key = np.where(feasible, cos_key, -np.inf)
    best = key.max(axis=-1, keepdims=True)
    tied = feasible & (key == best)
    second = np.where(tied, cos_tx, -np.inf)
    idx = np.argmax(second, axis=-1)
    idx = np.where(feasible.any(axis=-1), idx, -1)
    return idx


def _feasible(cos_rx, cos_tx, scenario: ScenarioConfig):
    cos_vis = math.cos(visibility_angle(scenario.geom))
    ok = (cos_rx >= cos_vis) & (cos_tx >= cos_vis)
    if scenario.min_snr is not None:
        geom, w = scenario.geom, sr_mean(scenario.srp)
        d_down = chord_distance(np.arccos(np.clip(cos_rx, -1, 1)), geom)
        d_up = chord_distance(np.arccos(np.clip(cos_tx, -1, 1)), geom)
        ok &= (snr(d_up, w, scenario.uplink) >= scenario.min_snr)
        ok &= (snr(d_down, w, scenario.downlink) >= scenario.min_snr)
    return ok


def select_relay(points: Sequence[SphericalPoint], scenario: ScenarioConfig) -> RelayChoice | None:
    """Dual-visible satellite with the shortest downlink; ``None`` on outage.

    Shortest downlink is the same as strongest average downlink power because
    every satellite uses the same budget and the mean fading is constant.
    """
    if not points:
        return None
    units = np.array([p.unit_vector() for p in points])
    cos_rx = units[:, 2]
    cos_tx = units @ _tx_direction(scenario.theta_sep)
    feasible = _feasible(cos_rx, cos_tx, scenario)
    idx = int(_choose(cos_rx, cos_tx, cos_rx, feasible))
    if idx < 0:
        return None
    geom = scenario.geom
    theta1 = float(np.arccos(np.clip(cos_rx[idx], -1.0, 1.0)))
    theta2 = float(np.arccos(np.clip(cos_tx[idx], -1.0, 1.0)))
    return RelayChoice(idx, theta1, theta2, float(chord_distance(theta2, geom)),
                       float(chord_distance(theta1, geom)))


def simulate_trials(rng: np.random.Generator, scenario: ScenarioConfig, n: int,
                    ideal_t: float | None = None) -> dict[str, np.ndarray]:
    """Simulate ``n`` independent trials from one generator.

    Draw order: satellite polar cosines ``(n, N)``, azimuths ``(n, N)``, then
    uplink and downlink fading ``(n,)`` each.  With ``ideal_t`` set the relay
    is the dual-visible satellite nearest the point ``ideal_t`` from the
    receiver along the station arc, instead of the one nearest the receiver.
    Outage trials carry NaN in every per-link field.
    """
    geom = scenario.geom
    cos_polar = rng.uniform(-1.0, 1.0, (n, geom.n_sats))
    azimuth = rng.uniform(0.0, 2.0 * math.pi, (n, geom.n_sats))
    w_up = sr_sample(rng, scenario.srp, n)
    w_down = sr_sample(rng, scenario.srp, n)

    sin_polar = np.sqrt(np.maximum(0.0, 1.0 - cos_polar * cos_polar))
    x = sin_polar * np.cos(azimuth)
    st, ct = math.sin(scenario.theta_sep), math.cos(scenario.theta_sep)
    cos_rx = cos_polar
    cos_tx = st * x + ct * cos_polar
    feasible = _feasible(cos_rx, cos_tx, scenario)
    if ideal_t is None:
        key = cos_rx
    else:
        key = math.sin(ideal_t) * x + math.cos(ideal_t) * cos_polar
    idx = _choose(cos_rx, cos_tx, key, feasible)
    found = idx >= 0
    safe = np.where(found, idx, 0)
    rows = np.arange(n)
    theta1 = np.arccos(np.clip(cos_rx[rows, safe], -1.0, 1.0))
    theta2 = np.arccos(np.clip(cos_tx[rows, safe], -1.0, 1.0))
    d_down = chord_distance(theta1, geom)
    d_up = chord_distance(theta2, geom)
    snr_up = snr(d_up, w_up, scenario.uplink)
    snr_down = snr(d_down, w_down, scenario.downlink)
    tau_up = link_delay(snr_up, scenario.pkt_up)
    tau_down = link_delay(snr_down, scenario.pkt_down)
    out = {
        "theta1": theta1, "theta2": theta2, "d_up": d_up, "d_down": d_down,
        "w2_up": w_up, "w2_down": w_down, "snr_up": np.atleast_1d(snr_up),
        "snr_down": np.atleast_1d(snr_down), "tau_up": np.atleast_1d(tau_up),
        "tau_down": np.atleast_1d(tau_down),
    }
    for k, v in out.items():
        out[k] = np.where(found, v, np.nan)
    out["tau_total"] = out["tau_up"] + out["tau_down"]
    out["relay_found"] = found
    return out


def simulate_episode(rng: np.random.Generator, scenario: ScenarioConfig) -> EpisodeResult:
    r = simulate_trials(rng, scenario, 1)
    if not r["relay_found"][0]:
        return EpisodeResult(relay_found=False)
    fields = {k: float(v[0]) for k, v in r.items() if k != "relay_found"}
    return EpisodeResult(relay_found=True, **fields)


_STAT_FIELDS = ("theta1", "theta2", "d_up", "d_down", "snr_up", "snr_down",
                "tau_up", "tau_down", "tau_total")


def _mean_ci(x):
    n = x.size
    if n == 0:
        return math.nan, math.nan, (math.nan, math.nan)
    mean = float(np.mean(x))
    var = float(np.var(x, ddof=1)) if n > 1 else 0.0
    half = _Z95 * math.sqrt(var / n)
    return mean, var, (mean - half, mean + half)


@dataclass(eq=False)
class DelayStats:
    """Aggregate of a campaign.

    Means, variances and 95% normal-approximation intervals are over trials
    that found a relay; ``samples`` keeps the per-trial values (NaN on outage)
    for empirical CDFs.
    """

    count: int
    outage_fraction: float
    mean_total: float
    var_total: float
    ci_total: tuple[float, float]
    mean_up: float
    ci_up: tuple[float, float]
    mean_down: float
    ci_down: tuple[float, float]
    quantiles_total: dict[float, float]
    samples: dict[str, np.ndarray] = field(repr=False)

    @classmethod
    def from_samples(cls, samples: dict[str, np.ndarray]) -> "DelayStats":
        found = samples["relay_found"]
        count = int(found.size)
        tot = samples["tau_total"][found]
        mean_t, var_t, ci_t = _mean_ci(tot)
        mean_u, _, ci_u = _mean_ci(samples["tau_up"][found])
        mean_d, _, ci_d = _mean_ci(samples["tau_down"][found])
        qs = (0.05, 0.25, 0.5, 0.75, 0.95)
        quant = ({q: float(v) for q, v in zip(qs, np.quantile(tot, qs))}
                 if tot.size else {q: math.nan for q in qs})
        return cls(count, 1.0 - float(found.mean()), mean_t, var_t, ci_t,
                   mean_u, ci_u, mean_d, ci_d, quant, samples)

    @property
    def n_relayed(self) -> int:
        return int(self.samples["relay_found"].sum())

    def ecdf(self, name: str) -> np.ndarray:
        """Sorted finite samples of ``name`` (e.g. ``"d_up"``)."""
        v = self.samples[name]
        return np.sort(v[np.isfinite(v)])

    def censored_mean(self, name: str, snr_name: str, lo: float, hi: float) -> float:
        """Mean over relayed trials of ``name`` with trials outside the SNR window counted as 0."""
        found = self.samples["relay_found"]
        v = self.samples[name][found]
        g = self.samples[snr_name][found]
        inside = (g >= lo) & (g <= hi)
        return float(np.mean(np.where(inside, v, 0.0)))

    def censored_mean_ci(self, name: str, snr_name: str, lo: float, hi: float):
        found = self.samples["relay_found"]
        v = self.samples[name][found]
        g = self.samples[snr_name][found]
        return _mean_ci(np.where((g >= lo) & (g <= hi), v, 0.0))

    def summary(self) -> dict:
        return {
            "count": self.count, "outage_fraction": self.outage_fraction,
            "mean_total": self.mean_total, "var_total": self.var_total,
            "ci_total": self.ci_total, "mean_up": self.mean_up, "ci_up": self.ci_up,
            "mean_down": self.mean_down, "ci_down": self.ci_down,
            "quantiles_total": self.quantiles_total,
        }

    def __eq__(self, other):
        if not isinstance(other, DelayStats):
            return NotImplemented
        if self.samples.keys() != other.samples.keys():
            return False
        same = all(np.array_equal(self.samples[k], other.samples[k], equal_nan=k != "relay_found")
                   for k in self.samples)
        return same and _nan_equal(self.summary(), other.summary())


def _nan_equal(a, b):
    if isinstance(a, dict):
        return a.keys() == b.keys() and all(_nan_equal(a[k], b[k]) for k in a)
    if isinstance(a, tuple):
        return len(a) == len(b) and all(_nan_equal(x, y) for x, y in zip(a, b))
    if isinstance(a, float) and math.isnan(a):
        return isinstance(b, float) and math.isnan(b)
    return a == b


def _block(seed, stream, k, scenario, n, ideal_t):
    return simulate_trials(substream(seed, stream, k), scenario, n, ideal_t)


def _run_blocks(scenario: ScenarioConfig, n_jobs: int, stream: int, ideal_t):
    n = scenario.n_trials
    sizes = [min(BLOCK_SIZE, n - start) for start in range(0, n, BLOCK_SIZE)]
    args = [(scenario.seed, stream, k, scenario, size, ideal_t) for k, size in enumerate(sizes)]
    if n_jobs == 1 or len(args) == 1:
        parts = [_block(*a) for a in args]
    else:
        from joblib import Parallel, delayed

        parts = Parallel(n_jobs=n_jobs)(delayed(_block)(*a) for a in args)
    return {key: np.concatenate([p[key] for p in parts]) for key in parts[0]}


def run_campaign(scenario: ScenarioConfig, n_jobs: int = 1, stream: int = 0,
                 ideal_t: float | None = None) -> DelayStats:
    """Simulate ``scenario.n_trials`` trials and aggregate them.

    Output is bit-identical for a given ``(seed, stream, n_trials)`` whatever
    ``n_jobs`` is.
    """
    return DelayStats.from_samples(_run_blocks(scenario, n_jobs, stream, ideal_t))


@dataclass(eq=False)
class MultihopStats:
    n_hops: int
    theta_seg: float
    per_hop: list[DelayStats]
    total: DelayStats


def simulate_multihop(total_distance: float, scenario: ScenarioConfig, n_jobs: int = 1,
                      arc: bool = False) -> MultihopStats:
    """Chain of ``min_hops`` equal relay units covering ``total_distance`` km.

    Each hop redraws its own constellation (stream index = hop index), so
    hops are independent.  A trial is an outage if any hop is.
    """
    geom = scenario.geom
    n = min_hops(total_distance, geom, arc=arc)
    theta_seg = float(ground_separation_angle(total_distance / n, geom, arc=arc))
    if theta_seg > 2.0 * visibility_angle(geom):
        raise InfeasibleGeometryError(
            f"segment angle {theta_seg:.4f} rad exceeds the dual-visibility limit")
    hop_scenario = scenario.with_(theta_sep=theta_seg)
    raw = [_run_blocks(hop_scenario, n_jobs, h, None) for h in range(n)]
    per_hop = [DelayStats.from_samples(r) for r in raw]
    found = np.logical_and.reduce([r["relay_found"] for r in raw])
    summed = {"relay_found": found}
    for key in ("tau_up", "tau_down", "tau_total"):
        summed[key] = np.where(found, np.sum([r[key] for r in raw], axis=0), np.nan)
    return MultihopStats(n, theta_seg, per_hop, DelayStats.from_samples(summed))
