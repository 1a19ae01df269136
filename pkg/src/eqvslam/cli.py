"""Command line front end: ``eqvslam simulate | replay | sweep``.

Exit status: 0 success, 1 usage or configuration error, 2 bad input data,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .config import ConfigError, RunConfig, config_to_dict, load_config
from .evaluation import AlignmentError, align_by_pose, equivalence_residual, error_report, storage_increase
from .group import DomainError
from .observer import NumericalError
from .replay import read_records, read_reference, run_replay
from .simulation import simulate
from .sweep import run_sweep
from .traces import DataError, ROT_COLS, pose_row, write_simulation, write_table

log = logging.getLogger("eqvslam")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERICAL = 0, 1, 2, 3
MONOTONE_SLACK = 1e-8


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _floats(text: str) -> tuple:
    try:
        return tuple(float(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="eqvslam", description="Equivariant monocular SLAM observer.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p):
        p.add_argument("--config", type=Path, help="YAML run configuration")
        p.add_argument("--out", type=Path, required=True, help="output directory")
        p.add_argument("--seed", type=int)
        p.add_argument("--integrator", choices=("euler", "rk4"))
        p.add_argument("--alpha", type=float)
        p.add_argument("--dt", type=float)

    sim = sub.add_parser("simulate", help="run the simulated scenario and write traces")
    common(sim)
    sim.add_argument("--k", type=float)
    sim.add_argument("--duration", type=float)
    sim.add_argument("--noise", type=float, help="bearing noise standard deviation (rad)")

    rep = sub.add_parser("replay", help="stream recorded bearings through the observer")
    rep.add_argument("records", type=Path)
    common(rep)
    rep.add_argument("--k", type=float)
    rep.add_argument("--velocity", type=Path, help="velocity table (default: velocity.csv beside records)")
    rep.add_argument("--reference", type=Path, help="reference trajectory with t, x, y, z columns")
    rep.add_argument("--min-sightings", type=int)
    rep.add_argument("--max-missed", type=int)

    swp = sub.add_parser("sweep", help="basin-of-attraction sweep over gains")
    common(swp)
    swp.add_argument("--k", type=_floats, help="comma-separated gain grid")
    swp.add_argument("--samples", type=int)
    swp.add_argument("--horizon", type=float)
    swp.add_argument("--workers", type=int)
    return parser


def _apply_overrides(cfg: RunConfig, args) -> RunConfig:
    obs = {}
    for name in ("integrator", "alpha", "dt"):
        value = getattr(args, name, None)
        if value is not None:
            obs[name] = value
    if args.command != "sweep" and args.k is not None:
        obs["k"] = args.k
    if obs:
        cfg = cfg.with_observer(**obs)
    sc = {}
    if args.seed is not None:
        sc["seed"] = args.seed
    for name in ("duration", "noise"):
        value = getattr(args, name, None)
        if value is not None:
            sc[name] = value
    if sc:
        cfg = replace(cfg, scenario=replace(cfg.scenario, **sc))
    rp = {}
    for name in ("min_sightings", "max_missed"):
        value = getattr(args, name, None)
        if value is not None:
            rp[name] = value
    if rp:
        cfg = replace(cfg, replay=replace(cfg.replay, **rp))
    if args.command == "sweep":
        sw = {name: getattr(args, name) for name in ("samples", "horizon", "workers")
              if getattr(args, name) is not None}
        if args.k is not None:
            sw["k"] = args.k
        if args.seed is not None:
            sw["seed"] = args.seed
        if sw:
            cfg = replace(cfg, sweep=replace(cfg.sweep, **sw))
    return cfg


def _write_json(path: Path, data) -> None:
    path.write_text(json.dumps(data, indent=2, sort_keys=True, default=float) + "\n")


def cmd_simulate(cfg: RunConfig, out: Path) -> int:
    result = simulate(cfg.scenario)
    out.mkdir(parents=True, exist_ok=True)
    write_simulation(result, out)
    report = error_report(result)
    rise = storage_increase(result.storage)
    aligned = align_by_pose(result.estimate(-1), result.true_state(-1))
    summary = {
        **report.summary(),
        "steps": int(result.times.size - 1),
        "final_time_s": float(result.times[-1]),
        "storage_max_step_increase": rise,
        "storage_monotone": bool(rise <= MONOTONE_SLACK),
        "monotone_slack": MONOTONE_SLACK,
        "step_rejections": int(result.rejections),
        "aligned_landmark_error_m": float(np.linalg.norm(aligned.p - result.landmarks, axis=1).max(initial=0.0)),
        "equivalence_residual_m": equivalence_residual(result.estimate(-1), result.true_state(-1)),
        "config": config_to_dict(cfg),
    }
    _write_json(out / "summary.json", summary)
    print(f"simulate: {summary['steps']} steps, equivalence residual "
          f"{summary['equivalence_residual_m']:.3g} m, storage monotone: {summary['storage_monotone']}")
    return EXIT_OK


def cmd_replay(cfg: RunConfig, args) -> int:
    velocity = args.velocity or args.records.with_name("velocity.csv")
    records = read_records(args.records, velocity)
    reference = read_reference(args.reference) if args.reference else None
    result = run_replay(records, cfg.observer, cfg.replay, reference)
    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    write_table(out / "estimate.csv", "trajectory",
                (pose_row(result.times[k], result.est_R[k], result.est_x[k]) for k in range(result.times.size)),
                header=["t", "x", "y", "z", *ROT_COLS])
    write_table(out / "landmark_trace.csv", "landmark_trace",
                ([t, lid, *p] for t, lid, p in result.landmark_trace), header=["t", "id", "x", "y", "z"])
    write_table(out / "map.csv", "map", ([lid, *p] for lid, p in result.final_map.items()))
    write_table(out / "innovation.csv", "innovation",
                ([result.times[k], *result.innovation[k]] for k in range(result.innovation.shape[0])))
    write_table(out / "events.csv", "events", result.events, header=["t", "event", "id"])
    summary = {
        "frames": int(result.times.size),
        "landmarks_in_map": len(result.final_map),
        "step_rejections": int(result.rejections),
        "config": config_to_dict(cfg),
    }
    if result.alignment is not None:
        a = result.alignment
        summary["alignment"] = {"R": a.S.R.tolist(), "t": a.S.x.tolist(), "scale": a.scale, "rmse_m": a.rmse}
    _write_json(out / "summary.json", summary)
    msg = f"replay: {summary['frames']} frames, {summary['landmarks_in_map']} landmarks in final map"
    if result.alignment is not None:
        msg += f", aligned RMSE {result.alignment.rmse:.3g} m"
    print(msg)
    return EXIT_OK


def cmd_sweep(cfg: RunConfig, out: Path) -> int:
    result = run_sweep(cfg.scenario, cfg.sweep)
    out.mkdir(parents=True, exist_ok=True)
    write_table(out / "sweep.csv", "sweep",
                ([o.k, o.alpha, o.converged.size, int(o.converged.sum()), o.fraction] for o in result.outcomes),
                header=["k", "alpha", "samples", "converged", "fraction"])
    write_table(out / "conditions.csv", "conditions", (
        [o.k, o.alpha, j, bool(o.converged[j]), o.final_bearing_error[j], o.final_range_error[j]]
        for o in result.outcomes for j in range(o.converged.size)),
        header=["k", "alpha", "index", "converged", "bearing_error", "range_error"])
    alphas = sorted({o.alpha for o in result.outcomes})
    summary = {
        "fractions": [{"k": o.k, "alpha": o.alpha, "fraction": o.fraction} for o in result.outcomes],
        "non_decreasing_in_k": {str(a): result.non_decreasing_in_k(a) for a in alphas},
        "accepted": len(result.accepted),
        "excluded_near_exception_set": len(result.excluded),
        "horizon_s": result.horizon,
        "config": config_to_dict(cfg),
    }
    _write_json(out / "summary.json", summary)
    for o in result.outcomes:
        print(f"sweep: k={o.k:g} alpha={o.alpha:g} converged {o.fraction:.1%} of {o.converged.size}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config) if args.config else RunConfig()
        cfg = _apply_overrides(cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (TypeError, ValueError) as exc:
        print(f"invalid option: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        if args.command == "simulate":
            return cmd_simulate(cfg, args.out)
        if args.command == "replay":
            return cmd_replay(cfg, args)
        return cmd_sweep(cfg, args.out)
    except (DataError, AlignmentError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NumericalError, DomainError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
