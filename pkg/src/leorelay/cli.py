"""Command-line driver: validation suite and parameter sweeps.

Every command writes ``<command>.csv`` and ``manifest.json`` into ``--out``.
CSV bytes depend only on the configuration, seed, trial count and command
arguments, never on ``--jobs``.
"""

from __future__ import annotations

import argparse
import json
import math
import platform
import sys
import time
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .config import OPERATOR_PRESETS, ConfigError, ExperimentConfig, load_config
from .delay import (
    TruncatedMassWarning,
    avg_delay_downlink,
    avg_delay_uplink,
    optimal_relay_angle,
    relay_objective,
)
from .geometry import (
    ConstellationGeometry,
    GeometryDomainError,
    InfeasibleGeometryError,
    ground_separation_angle,
    l_max,
    visibility_angle,
)
from .montecarlo import run_campaign, simulate_multihop
from .tables import write_csv
from .validation import run_validation

__all__ = ["main", "build_parser"]

EXIT_OK, EXIT_FAILED, EXIT_CONFIG = 0, 1, 2


def _floats(text: str) -> list[float]:
    try:
        out = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None
    if not out:
        raise argparse.ArgumentTypeError("list must not be empty")
    return out


def _ints(text: str) -> list[int]:
    vals = _floats(text)
    if any(v != int(v) or v < 1 for v in vals):
        raise argparse.ArgumentTypeError(f"expected positive integers, got {text!r}")
    return [int(v) for v in vals]


def _names(text: str) -> list[str]:
    names = [v.strip().lower() for v in text.split(",") if v.strip()]
    bad = [n for n in names if n not in OPERATOR_PRESETS]
    if bad or not names:
        raise argparse.ArgumentTypeError(
            f"unknown preset(s) {bad}; choose from {sorted(OPERATOR_PRESETS)}")
    return names


def _u64(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="INI config file (defaults built in)")
    common.add_argument("--seed", type=_u64, help="override [run] seed")
    common.add_argument("--trials", type=int, help="override [run] trials")
    common.add_argument("--jobs", type=int, help="worker processes (-1 = all cores)")
    common.add_argument("--out", type=Path, default=Path("."), help="output directory")
    common.add_argument("--format", choices=["csv"], default="csv")

    p = argparse.ArgumentParser(prog="leorelay", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("validate", parents=[common], help="analytic vs simulation suite")
    s = sub.add_parser("sweep-nsat", parents=[common], help="delay vs constellation size and altitude")
    s.add_argument("--nsat", type=_ints, default=[200, 500, 1000])
    s.add_argument("--altitudes", type=_floats, default=[500.0, 1000.0, 1500.0], help="km")
    s = sub.add_parser("sweep-distance", parents=[common], help="delay vs station separation")
    s.add_argument("--distances", type=_floats,
                   default=[100.0, 500.0, 1000.0, 2000.0, 3000.0, 4000.0, 5000.0],
                   help="ground arc length between stations, km")
    s.add_argument("--presets", type=_names, default=list(OPERATOR_PRESETS))
    s = sub.add_parser("sweep-hops", parents=[common], help="multi-hop chains vs altitude")
    s.add_argument("--total-distance", type=float, default=15000.0, help="km")
    s.add_argument("--altitudes", type=_floats, default=[500.0, 1000.0, 1500.0], help="km")
    s = sub.add_parser("relay-sweep", parents=[common], help="delay vs ideal relay position")
    s.add_argument("--points", type=int, default=33, help="grid points over the feasible arc")
    return p


def _resolve(args) -> ExperimentConfig:
    cfg = load_config(args.config)
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.trials is not None:
        if args.trials < 1:
            raise ConfigError("--trials must be >= 1")
        changes["n_trials"] = args.trials
    if changes:
        cfg = cfg.with_scenario(**changes)
    if args.jobs is not None:
        if args.jobs == 0:
            raise ConfigError("--jobs must be nonzero")
        cfg = ExperimentConfig(cfg.scenario, args.jobs, cfg.delay)
    return cfg


def _analytic_total(cfg: ExperimentConfig, scenario) -> tuple[float, float]:
    """Windowed uplink plus plug-in downlink, and the uplink truncated mass."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TruncatedMassWarning)
        up = avg_delay_uplink(scenario.theta_sep, scenario.geom, scenario.uplink,
                              scenario.srp, scenario.pkt_up, cfg.delay)
    down = avg_delay_downlink(scenario.geom, scenario.downlink, scenario.srp, scenario.pkt_down)
    return up.delay + down, up.truncated_mass


def _feasible(theta, geom) -> bool:
    return theta <= 2.0 * visibility_angle(geom)


_NAN = math.nan


def cmd_validate(cfg: ExperimentConfig, args, out: Path):
    report = run_validation(cfg)
    path = out / "validate.csv"
    path.write_text(report.to_csv(), encoding="utf-8", newline="")
    for c in report.failures():
        print(f"FAIL {c.name}: {c.statistic:.6g} (threshold {c.threshold:g})", file=sys.stderr)
    return {"validate": path}, (EXIT_OK if report.passed else EXIT_FAILED)


_DELAY_COLS = ("analytic_tau_total_s", "analytic_uplink_truncated_mass", "mc_mean_tau_total_s",
               "mc_ci95_low_s", "mc_ci95_high_s", "mc_median_tau_total_s", "mc_outage_fraction",
               "status")


def _delay_cells(cfg, scenario):
    if not _feasible(scenario.theta_sep, scenario.geom):
        return [_NAN, _NAN, _NAN, _NAN, _NAN, _NAN, 1.0, "infeasible"]
    analytic, trunc = _analytic_total(cfg, scenario)
    st = run_campaign(scenario, n_jobs=cfg.n_jobs)
    status = "ok" if st.outage_fraction < 1.0 else "outage"
    return [analytic, trunc, st.mean_total, st.ci_total[0], st.ci_total[1],
            st.quantiles_total[0.5], st.outage_fraction, status]


def cmd_sweep_nsat(cfg: ExperimentConfig, args, out: Path):
    sc = cfg.scenario
    rows = []
    for h in args.altitudes:
        for n in args.nsat:
            geom = ConstellationGeometry.from_altitude(h, n_sats=n, re_km=sc.geom.re_km)
            rows.append([n, h, *_delay_cells(cfg, sc.with_(geom=geom))])
    path = write_csv(out / "sweep-nsat.csv", ("n_sats", "altitude_km", *_DELAY_COLS), rows)
    return {"sweep-nsat": path}, EXIT_OK


def cmd_sweep_distance(cfg: ExperimentConfig, args, out: Path):
    sc = cfg.scenario
    rows = []
    for name in args.presets:
        h = OPERATOR_PRESETS[name]
        geom = ConstellationGeometry.from_altitude(h, n_sats=sc.geom.n_sats, re_km=sc.geom.re_km)
        for dist in args.distances:
            try:
                theta = float(ground_separation_angle(dist, geom, arc=True))
            except GeometryDomainError:
                rows.append([name, h, dist, _NAN, _NAN, _NAN, _NAN, _NAN, _NAN, _NAN, 1.0,
                             "infeasible"])
                continue
            rows.append([name, h, dist, theta, *_delay_cells(cfg, sc.with_(geom=geom, theta_sep=theta))])
    header = ("preset", "altitude_km", "distance_km", "theta_sep_rad", *_DELAY_COLS)
    path = write_csv(out / "sweep-distance.csv", header, rows)
    return {"sweep-distance": path}, EXIT_OK


def cmd_sweep_hops(cfg: ExperimentConfig, args, out: Path):
    sc = cfg.scenario
    rows = []
    for h in args.altitudes:
        geom = ConstellationGeometry.from_altitude(h, n_sats=sc.geom.n_sats, re_km=sc.geom.re_km)
        try:
            res = simulate_multihop(args.total_distance, sc.with_(geom=geom), n_jobs=cfg.n_jobs)
        except InfeasibleGeometryError:
            rows.append([h, l_max(geom), 0, _NAN, _NAN, _NAN, _NAN, _NAN, 1.0, "infeasible"])
            continue
        t = res.total
        rows.append([h, l_max(geom), res.n_hops, res.theta_seg, t.mean_total, t.ci_total[0],
                     t.ci_total[1], t.quantiles_total[0.5], t.outage_fraction, "ok" if t.outage_fraction < 1 else "outage"])
    header = ("altitude_km", "l_max_km", "n_hops", "theta_seg_rad", "mc_mean_tau_total_s",
              "mc_ci95_low_s", "mc_ci95_high_s", "mc_median_tau_total_s", "mc_outage_fraction",
              "status")
    path = write_csv(out / "sweep-hops.csv", header, rows)
    return {"sweep-hops": path}, EXIT_OK


def relay_sweep_rows(cfg: ExperimentConfig, n_points: int, with_mc: bool = True):
    """Grid over the feasible relay arc; the analytic argmin row is flagged."""
    sc = cfg.scenario
    alpha = visibility_angle(sc.geom)
    lo, hi = max(0.0, sc.theta_sep - alpha), min(sc.theta_sep, alpha)
    if lo > hi:
        raise InfeasibleGeometryError("no relay position is visible from both stations")
    grid = np.linspace(lo, hi, n_points)
    tau_up, tau_down = relay_objective(grid, sc.theta_sep, sc.geom, sc.uplink, sc.downlink,
                                       sc.srp, sc.packet_bits)
    total = tau_up + tau_down
    best = int(np.argmin(total))
    t_opt = optimal_relay_angle(sc.theta_sep, sc.geom, sc.uplink, sc.downlink, sc.srp,
                                sc.packet_bits)
    rows = []
    for k, t in enumerate(grid):
        mc = run_campaign(sc, n_jobs=cfg.n_jobs, ideal_t=float(t)) if with_mc else None
        rows.append([float(t), float(t) / sc.theta_sep if sc.theta_sep else 0.0,
                     float(tau_up[k]), float(tau_down[k]), float(total[k]),
                     mc.mean_total if mc else _NAN, mc.ci_total[0] if mc else _NAN,
                     mc.ci_total[1] if mc else _NAN, k == best, t_opt])
    return rows


RELAY_HEADER = ("t_rad", "t_over_theta", "analytic_tau_up_s", "analytic_tau_down_s",
                "analytic_tau_total_s", "mc_mean_tau_total_s", "mc_ci95_low_s", "mc_ci95_high_s",
                "is_argmin", "optimal_t_rad")


def cmd_relay_sweep(cfg: ExperimentConfig, args, out: Path):
    if args.points < 2:
        raise ConfigError("--points must be >= 2")
    rows = relay_sweep_rows(cfg, args.points)
    path = write_csv(out / "relay-sweep.csv", RELAY_HEADER, rows)
    return {"relay-sweep": path}, EXIT_OK


_COMMANDS = {
    "validate": cmd_validate,
    "sweep-nsat": cmd_sweep_nsat,
    "sweep-distance": cmd_sweep_distance,
    "sweep-hops": cmd_sweep_hops,
    "relay-sweep": cmd_relay_sweep,
}


def _arguments(args) -> dict:
    skip = {"config", "out", "func"}
    out = {}
    for k, v in sorted(vars(args).items()):
        if k not in skip:
            out[k] = str(v) if isinstance(v, Path) else v
    return out


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _resolve(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out: Path = args.out
    out.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    try:
        outputs, status = _COMMANDS[args.command](cfg, args, out)
    except (ConfigError, InfeasibleGeometryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    manifest = {
        "artifact_version": __version__,
        "command": args.command,
        "arguments": _arguments(args),
        "config_path": str(args.config) if args.config else None,
        "config": cfg.snapshot(),
        "config_ini": cfg.to_ini(),
        "seed": cfg.scenario.seed,
        "trials": cfg.scenario.n_trials,
        "outputs": {k: str(v) for k, v in outputs.items()},
        "exit_status": status,
        "wall_clock_s": time.perf_counter() - start,
        "python": platform.python_version(),
        "numpy": np.__version__,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n",
                                       encoding="utf-8")
    return status


if __name__ == "__main__":
    raise SystemExit(main())
