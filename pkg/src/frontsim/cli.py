"""Command-line experiment runner: ``frontsim simulate | limits | couple-r0 | validate-kernel``."""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import analytics, counts, particle, renewal
from .disorder import (DisorderSpec, InvalidSpec, MixtureSpec, TwoStateSpec,
                       spec_from_dict, spec_hash, spec_to_dict)

log = logging.getLogger("frontsim")

SCHEMA_VERSION = 1
RESULTS_COLUMNS = ["schema_version", "N", "spec_hash", "engine", "n_cycles", "v_hat",
                   "stderr", "mean_cycle_length", "mean_moves_per_cycle"]
COUPLED_COLUMNS = ["schema_version", "N", "path", "horizon", "r_low", "r_high",
                   "speed_low", "speed_high", "ordered"]
DUMP_COLUMNS = ["t", "front_drop", "counts"]

EXIT_OK, EXIT_CHECK_FAILED, EXIT_CONFIG, EXIT_CYCLE_CAP, EXIT_IO = 0, 1, 3, 4, 5

ENGINES = ("naive", "counts", "both")
# stream purposes; see renewal.replicate_stream
_PURPOSE = {"counts": 0, "naive": 1, "couple": 2}


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    spec: DisorderSpec
    N_list: list[int]
    engine: str = "counts"
    n_cycles: int = 10_000
    replicates: int = 1
    seed: int = 0
    cycle_cap: int = renewal.DEFAULT_CYCLE_CAP
    out: Path = Path("results")
    dump: Optional[Path] = None
    couple: dict = field(default_factory=dict)


def _positive_int(value, name: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int) or value < 1:
        raise ConfigError(f"{name} must be a positive integer, got {value!r}")
    return value


def parse_config(data: dict) -> ExperimentConfig:
    if "disorder" not in data:
        raise ConfigError("config needs a [disorder] table")
    try:
        spec = spec_from_dict(data["disorder"])
    except InvalidSpec as exc:
        raise ConfigError(str(exc)) from exc
    N_list = data.get("N", [1000])
    if isinstance(N_list, int):
        N_list = [N_list]
    if not N_list:
        raise ConfigError("N must be a non-empty list")
    N_list = [_positive_int(n, "N") for n in N_list]
    engine = data.get("engine", "counts")
    if engine not in ENGINES:
        raise ConfigError(f"engine must be one of {ENGINES}, got {engine!r}")
    seed = data.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed < 2**64:
        raise ConfigError("seed must be an integer in [0, 2**64)")
    couple = dict(data.get("couple", {}))
    return ExperimentConfig(
        spec=spec,
        N_list=N_list,
        engine=engine,
        n_cycles=_positive_int(data.get("n_cycles", 10_000), "n_cycles"),
        replicates=_positive_int(data.get("replicates", 1), "replicates"),
        seed=seed,
        cycle_cap=_positive_int(data.get("cycle_cap", renewal.DEFAULT_CYCLE_CAP), "cycle_cap"),
        out=Path(data.get("out", "results")),
        couple=couple,
    )


def load_config(path: Path) -> ExperimentConfig:
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return parse_config(data)


def _fmt(x) -> str:
    if isinstance(x, float):
        return repr(float(x))
    return str(x)


def _json_float(x: float):
    return None if x is None or not math.isfinite(x) else float(x)


def _write_csv(path: Path, columns: list[str], rows: list[list]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _write_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _workers() -> int:
    return max(1, int(os.environ.get("FRONTSIM_WORKERS", "1")))


def _dump_trajectory(cfg: ExperimentConfig, N: int) -> None:
    """Counts trajectory of replicate 0 (same stream as the simulated run)."""
    sizes = renewal.split_counts(cfg.n_cycles, cfg.replicates)
    rng = renewal.replicate_stream(cfg.seed, N, 0, _PURPOSE["counts"])
    trace: list = []
    renewal.collect_cycles(cfg.spec, N, sizes[0], rng, renewal.COUNTS, cfg.cycle_cap,
                           trace=trace)
    rows = [[t, drop, " ".join(f"{d}:{c}" for d, c in enumerate(cnt) if c)]
            for t, drop, cnt in trace]
    _write_csv(cfg.dump / f"trajectory_N{N}.csv", DUMP_COLUMNS, rows)


def run_experiment(cfg: ExperimentConfig) -> dict:
    """Speed estimates for every N and engine; writes results.csv and summary.json."""
    engines = ["naive", "counts"] if cfg.engine == "both" else [cfg.engine]
    limits = analytics.limits_report(cfg.spec)
    limit = limits["limit_speed"]
    h = spec_hash(cfg.spec)
    rows, summary_rows = [], []
    for N in cfg.N_list:
        for engine in engines:
            cycles = renewal.collect_cycles_parallel(
                cfg.spec, N, cfg.n_cycles, cfg.seed, cfg.replicates, engine,
                cfg.cycle_cap, _workers(), purpose=_PURPOSE[engine])
            est = renewal.estimate_speed(cycles, N=N, spec=cfg.spec)
            rows.append([SCHEMA_VERSION, N, h, engine, est.n_cycles, est.v_hat, est.stderr,
                         est.mean_cycle_length, est.mean_moves_per_cycle])
            z = (est.v_hat - limit) / est.stderr if est.stderr > 0 else math.nan
            summary_rows.append({"N": N, "engine": engine, "n_cycles": est.n_cycles,
                                 "v_hat": est.v_hat, "stderr": _json_float(est.stderr),
                                 "limit_speed": limit, "z_score": _json_float(z),
                                 "mean_cycle_length": est.mean_cycle_length,
                                 "mean_moves_per_cycle": est.mean_moves_per_cycle})
            log.info("N=%d engine=%s v_hat=%.6f +- %.6f (limit %.6f)",
                     N, engine, est.v_hat, est.stderr, limit)
        if cfg.dump is not None:
            _dump_trajectory(cfg, N)
    _write_csv(cfg.out / "results.csv", RESULTS_COLUMNS, rows)
    summary = {"schema_version": SCHEMA_VERSION, "spec": spec_to_dict(cfg.spec),
               "spec_hash": h, "seed": cfg.seed, "limits": limits, "rows": summary_rows}
    _write_json(cfg.out / "summary.json", summary)
    return summary


def run_coupled_r0(cfg: ExperimentConfig) -> dict:
    """Pathwise-coupled two-state runs at the config's r and at ``couple.r_compare``."""
    spec = cfg.spec
    if not isinstance(spec, TwoStateSpec):
        raise ConfigError("couple-r0 needs a two_state disorder")
    c = cfg.couple
    if "r_compare" not in c:
        raise ConfigError("couple-r0 needs couple.r_compare")
    r_high = TwoStateSpec(spec.rho, c["r_compare"]).r
    if r_high < spec.r:
        raise ConfigError("couple.r_compare must be >= disorder.r")
    horizon = _positive_int(c.get("horizon", 1000), "couple.horizon")
    paths = _positive_int(c.get("paths", 10), "couple.paths")
    N_list = c.get("N", cfg.N_list)
    N_list = [_positive_int(n, "couple.N") for n in ([N_list] if isinstance(N_list, int) else N_list)]
    rows, per_N = [], []
    for N in N_list:
        lows, highs, ordered = [], [], 0
        for path in range(paths):
            rng = renewal.replicate_stream(cfg.seed, N, path, _PURPOSE["couple"])
            fa, fb = particle.run_coupled_two_state(spec.rho, spec.r, r_high, N, horizon, rng)
            ok = bool(np.all(fa >= fb))
            ordered += ok
            lows.append(fa[-1] / horizon)
            highs.append(fb[-1] / horizon)
            rows.append([SCHEMA_VERSION, N, path, horizon, float(spec.r), float(r_high),
                         lows[-1], highs[-1], int(ok)])
        per_N.append({"N": N, "paths": paths, "ordered_fraction": ordered / paths,
                      "mean_speed_low": float(np.mean(lows)),
                      "mean_speed_high": float(np.mean(highs)),
                      "limit_low": analytics.limit_speed(spec),
                      "limit_high": analytics.limit_speed(TwoStateSpec(spec.rho, r_high))})
    _write_csv(cfg.out / "coupled.csv", COUPLED_COLUMNS, rows)
    summary = {"schema_version": SCHEMA_VERSION, "spec": spec_to_dict(spec), "seed": cfg.seed,
               "r_compare": float(r_high), "horizon": horizon, "rows": per_N,
               "all_ordered": all(r["ordered_fraction"] == 1.0 for r in per_N)}
    _write_json(cfg.out / "coupled_summary.json", summary)
    return summary


def validate_kernel(spec: DisorderSpec, N_max: int = 3, max_depth: int = 2) -> dict:
    """Max TV distance between the counts kernel and exhaustive particle enumeration."""
    lattice = spec.lattice() if isinstance(spec, MixtureSpec) else spec
    report = {}
    for N in range(1, N_max + 1):
        worst = 0.0
        for x in counts.enumerate_configurations(N, max_depth):
            depths = np.repeat(np.arange(len(x.counts)), x.counts)
            state = particle.ParticleState.from_positions(-depths.astype(float))
            exact = particle.enumerate_step_law(state, lattice)
            kernel = counts.transition_law(x, lattice, N)
            keys = set(exact) | set(kernel)
            tv = 0.5 * math.fsum(abs(exact.get(k, 0.0) - kernel.get(k, 0.0)) for k in keys)
            worst = max(worst, tv)
        report[N] = worst
    return report


def _apply_overrides(cfg: ExperimentConfig, args) -> ExperimentConfig:
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    if args.out is not None:
        cfg = replace(cfg, out=Path(args.out))
    if getattr(args, "engine", None) is not None:
        cfg = replace(cfg, engine=args.engine)
    if getattr(args, "dump", None) is not None:
        cfg = replace(cfg, dump=Path(args.dump))
    return cfg


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="frontsim", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config_required=True):
        p.add_argument("--config", "--spec", dest="config", required=config_required,
                       help="TOML experiment file")
        p.add_argument("--seed", type=int)
        p.add_argument("--out", help="output directory")

    sim = sub.add_parser("simulate", help="estimate front speeds over an N sweep")
    common(sim)
    sim.add_argument("--engine", choices=ENGINES)
    sim.add_argument("--dump", help="directory for per-N counts trajectories")

    lim = sub.add_parser("limits", help="print the N -> infinity limits as JSON")
    common(lim)

    cpl = sub.add_parser("couple-r0", help="coupled two-state runs at r and r_compare")
    common(cpl)

    val = sub.add_parser("validate-kernel", help="check the counts kernel against enumeration")
    common(val, config_required=False)
    val.add_argument("--n-max", type=int, default=3)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "validate-kernel" and args.config is None:
            spec = TwoStateSpec(1.0, "1/2")
        else:
            cfg = _apply_overrides(load_config(Path(args.config)), args)
            spec = cfg.spec
        if args.command == "simulate":
            run_experiment(cfg)
        elif args.command == "limits":
            print(json.dumps(analytics.limits_report(spec), indent=2, sort_keys=True))
        elif args.command == "couple-r0":
            summary = run_coupled_r0(cfg)
            print(json.dumps(summary["rows"], indent=2))
            if not summary["all_ordered"]:
                return EXIT_CHECK_FAILED
        elif args.command == "validate-kernel":
            report = validate_kernel(spec, args.n_max)
            print(json.dumps({str(k): v for k, v in report.items()}, indent=2))
            if max(report.values()) >= 1e-10:
                return EXIT_CHECK_FAILED
    except (ConfigError, InvalidSpec) as exc:
        print(f"frontsim: invalid config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except renewal.CycleCapExceeded as exc:
        print(f"frontsim: {exc}", file=sys.stderr)
        return EXIT_CYCLE_CAP
    except OSError as exc:
        print(f"frontsim: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
