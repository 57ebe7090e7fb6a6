"""INI experiment configuration.

Sections ``geometry``, ``uplink``, ``downlink``, ``fading``, ``packet`` and
``run``.  Any key ending in ``_db`` is read in decibels and converted to a
linear value for the key without the suffix.  Unknown sections or keys are
errors reported with their line number.

Example::

    [geometry]
    altitude_km = 500
    n_sats = 500
    separation_km = 500

    [uplink]
    eirp_db = 60
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .delay import DelayIntegrationConfig
from .distributions import ShadowedRicianParams
from .geometry import EARTH_RADIUS_KM, ConstellationGeometry
from .link_budget import DEFAULT_DOWNLINK, DEFAULT_UPLINK, LinkBudgetParams, db_to_linear
from .montecarlo import DEFAULT_SEPARATION_KM, ScenarioConfig

__all__ = ["ConfigError", "ExperimentConfig", "OPERATOR_PRESETS", "load_config", "parse_config"]

# Altitude stand-ins for the three operator curves; budgets stay at the defaults.
OPERATOR_PRESETS = {"oneweb": 1200.0, "telesat": 1150.0, "spacex": 1110.0}

_LINK_KEYS = {"eirp", "wavelength_m", "bandwidth_hz", "noise_power_w", "noise_temperature_k",
              "rx_gain", "feeder_loss_tx", "feeder_loss_rx", "additional_loss"}
_SCHEMA = {
    "geometry": {"re_km", "rs_km", "altitude_km", "n_sats", "separation_km"},
    "uplink": _LINK_KEYS,
    "downlink": _LINK_KEYS,
    "fading": {"m", "b0", "omega"},
    "packet": {"packet_bits"},
    "run": {"seed", "trials", "jobs", "gamma_min"},
}
_INTEGER_KEYS = {"n_sats", "seed", "trials", "jobs"}


class ConfigError(ValueError):
    """Bad configuration; the message names the file and line where possible."""


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    n_jobs: int = 1
    delay: DelayIntegrationConfig = field(default_factory=DelayIntegrationConfig)

    def with_scenario(self, **changes) -> "ExperimentConfig":
        return replace(self, scenario=replace(self.scenario, **changes))

    def snapshot(self) -> dict:
        """Resolved parameters in plain types, enough to rebuild this config."""
        sc = self.scenario

        def link(p: LinkBudgetParams):
            return {f.name: getattr(p, f.name) for f in fields(p) if f.name != "noise_temperature"}

        return {
            "geometry": {"re_km": sc.geom.re_km, "rs_km": sc.geom.rs_km, "n_sats": sc.geom.n_sats,
                         "theta_sep_rad": sc.theta_sep},
            "uplink": link(sc.uplink),
            "downlink": link(sc.downlink),
            "fading": {"m": sc.srp.m, "b0": sc.srp.b0, "omega": sc.srp.omega},
            "packet": {"packet_bits": sc.packet_bits},
            "run": {"seed": sc.seed, "trials": sc.n_trials, "jobs": self.n_jobs,
                    "gamma_min": self.delay.gamma_min},
        }

    def to_ini(self) -> str:
        """INI text that :func:`parse_config` maps back to this config."""
        snap = self.snapshot()
        geo = snap["geometry"]
        lines = ["[geometry]", f"re_km = {geo['re_km']!r}", f"rs_km = {geo['rs_km']!r}",
                 f"n_sats = {geo['n_sats']}",
                 f"separation_km = {geo['theta_sep_rad'] * geo['re_km']!r}"]
        rename = {"wavelength": "wavelength_m", "bandwidth": "bandwidth_hz",
                  "noise_power": "noise_power_w"}
        for sec in ("uplink", "downlink"):
            lines += ["", f"[{sec}]"]
            lines += [f"{rename.get(k, k)} = {v!r}" for k, v in snap[sec].items()]
        for sec in ("fading", "packet", "run"):
            lines += ["", f"[{sec}]"]
            lines += [f"{k} = {v!r}" for k, v in snap[sec].items()]
        return "\n".join(lines) + "\n"


def _line_of(text: str, section: str | None, key: str | None = None) -> int | None:
    current = None
    for no, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1].strip()
            if key is None and current == section:
                return no
            continue
        if key is not None and current == section and line:
            name = line.split("=", 1)[0].split(":", 1)[0].strip().lower()
            if name == key:
                return no
    return None


def _where(source, text, section, key=None):
    no = _line_of(text, section, key)
    return f"{source}:{no}" if no is not None else source


def _number(raw: str, key: str, where: str):
    try:
        if key in _INTEGER_KEYS:
            return int(raw)
        v = float(raw)
    except ValueError:
        raise ConfigError(f"{where}: {key} = {raw!r} is not a number") from None
    if not math.isfinite(v):
        raise ConfigError(f"{where}: {key} must be finite")
    return v


def _read_section(cp, text, source, section):
    out = {}
    if not cp.has_section(section):
        return out
    allowed = _SCHEMA[section]
    for key, raw in cp.items(section):
        where = _where(source, text, section, key)
        base = key[:-3] if key.endswith("_db") else key
        if base not in allowed or (key.endswith("_db") and key in allowed):
            raise ConfigError(f"{where}: unknown key {key!r} in [{section}]")
        if base in out:
            raise ConfigError(f"{where}: {base!r} given twice in [{section}]")
        value = _number(raw, key, where)
        out[base] = float(db_to_linear(value)) if key.endswith("_db") else value
    return out


def _link(values: dict, default: LinkBudgetParams) -> LinkBudgetParams:
    kw = {
        "eirp": values.get("eirp", default.eirp),
        "wavelength": values.get("wavelength_m", default.wavelength),
        "bandwidth": values.get("bandwidth_hz", default.bandwidth),
        "rx_gain": values.get("rx_gain", default.rx_gain),
        "feeder_loss_tx": values.get("feeder_loss_tx", default.feeder_loss_tx),
        "feeder_loss_rx": values.get("feeder_loss_rx", default.feeder_loss_rx),
        "additional_loss": values.get("additional_loss", default.additional_loss),
    }
    if "noise_power_w" in values and "noise_temperature_k" in values:
        raise ValueError("give noise_power_w or noise_temperature_k, not both")
    if "noise_temperature_k" in values:
        kw["noise_temperature"] = values["noise_temperature_k"]
    else:
        kw["noise_power"] = values.get("noise_power_w", default.noise_power)
    return LinkBudgetParams(**kw)


def parse_config(text: str, source: str = "<config>") -> ExperimentConfig:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from None
    for section in cp.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"{_where(source, text, section)}: unknown section [{section}]")
    vals = {s: _read_section(cp, text, source, s) for s in _SCHEMA}

    def build(section, fn):
        try:
            return fn()
        except ConfigError:
            raise
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"{_where(source, text, section)}: [{section}] {exc}") from None

    g = vals["geometry"]

    def geometry():
        re_km = g.get("re_km", EARTH_RADIUS_KM)
        if "rs_km" in g and "altitude_km" in g:
            raise ValueError("give rs_km or altitude_km, not both")
        rs_km = g["rs_km"] if "rs_km" in g else re_km + g.get("altitude_km", 500.0)
        return ConstellationGeometry(re_km=re_km, rs_km=rs_km, n_sats=g.get("n_sats", 500))

    geom = build("geometry", geometry)
    theta_sep = g.get("separation_km", DEFAULT_SEPARATION_KM) / geom.re_km
    up = build("uplink", lambda: _link(vals["uplink"], DEFAULT_UPLINK))
    down = build("downlink", lambda: _link(vals["downlink"], DEFAULT_DOWNLINK))
    f = vals["fading"]
    base = ShadowedRicianParams()
    srp = build("fading", lambda: ShadowedRicianParams(
        m=f.get("m", base.m), b0=f.get("b0", base.b0), omega=f.get("omega", base.omega)))
    r = vals["run"]
    packet_bits = vals["packet"].get("packet_bits", 0.5e9)
    scenario = build("run", lambda: ScenarioConfig(
        geom=geom, theta_sep=theta_sep, uplink=up, downlink=down, srp=srp,
        packet_bits=packet_bits, seed=r.get("seed", 0), n_trials=r.get("trials", 100_000)))
    jobs = r.get("jobs", 1)
    if jobs == 0:
        raise ConfigError(f"{_where(source, text, 'run', 'jobs')}: jobs must be nonzero")
    delay = build("run", lambda: DelayIntegrationConfig(gamma_min=r.get("gamma_min", 0.01)))
    return ExperimentConfig(scenario, jobs, delay)


def load_config(path: str | Path | None) -> ExperimentConfig:
    """Read ``path``; ``None`` gives the built-in defaults."""
    if path is None:
        return ExperimentConfig()
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"{p}: {exc.strerror}") from None
    return parse_config(text, str(p))
