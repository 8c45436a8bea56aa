"""Command-line entry point: ``littoral {simulate,detect,track,evaluate,all}``."""
import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from littoral.config import ConfigError, load_config, to_dict
from littoral.detect import write_detections, write_score_map
from littoral.eval import (
    OSPA_HEADER,
    TIMING_HEADER,
    TRACK_HEADER,
    map_name,
    ospa_rows,
    run_monte_carlo,
    run_pipeline,
    run_seed,
    score_map_name,
    timing_rows,
    track_rows,
)
from littoral.io import atomic_write_text, write_csv, write_grid, write_truth_json
from littoral.scene import ScenarioError, generate_scenario

log = logging.getLogger("littoral")

MEASUREMENT_HEADER = ("scan", "a", "r", "score")


def _load(args):
    overrides = {
        "seed": args.seed,
        "eval.n_runs": args.runs,
        "out": args.out,
        "detector.kind": args.detector,
        "birth.mode": args.birth,
    }
    return load_config(args.config, overrides)


def _out_dir(cfg):
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    atomic_write_text(out / "effective_config.json", json.dumps(to_dict(cfg), indent=2) + "\n")
    return out


def _run0_rng(cfg):
    return np.random.default_rng(run_seed(cfg.seed, 0))


def cmd_simulate(cfg):
    out = _out_dir(cfg)
    scenario = generate_scenario(cfg.scenario, _run0_rng(cfg), render=True)
    for k, grid in enumerate(scenario.maps):
        write_grid(out / "maps" / map_name(k), grid, k)
    sc = cfg.scenario
    write_truth_json(out / "truth.json", scenario.truth, sc.n_az, sc.n_rg)
    log.info("wrote %d maps to %s", sc.n_scans, out / "maps")


def _pipeline_run(cfg):
    rng = _run0_rng(cfg)
    scenario = generate_scenario(cfg.scenario, rng, render=cfg.detector.kind == "cfar")
    return scenario, run_pipeline(cfg, rng, scenario)


def _write_measurements(path, per_scan):
    rows = [(k, a, r, s) for k, Z in enumerate(per_scan) for a, r, s in Z]
    write_csv(path, MEASUREMENT_HEADER, rows)


def cmd_detect(cfg):
    out = _out_dir(cfg)
    if cfg.detector.kind == "surrogate":
        # keep the synthesised score maps so they can be replayed through scoremap-file
        from littoral.detect import synthesize_score_map
        rng = _run0_rng(cfg)
        scenario = generate_scenario(cfg.scenario, rng, render=False)
        sc = cfg.scenario
        sirs = [t.sir_db for t in sc.targets]
        for k in range(sc.n_scans):
            scores = synthesize_score_map(scenario.truth[k], sirs, (sc.n_az, sc.n_rg),
                                          cfg.detector.surrogate, rng)
            write_score_map(out / "scoremaps" / score_map_name(k), scores, k)
    _, result = _pipeline_run(cfg)
    write_detections(out / "detections.csv", result.detections)
    _write_measurements(out / "measurements.csv", result.measurements)


def cmd_track(cfg):
    out = _out_dir(cfg)
    _, result = _pipeline_run(cfg)
    write_csv(out / "tracks.csv", TRACK_HEADER, track_rows(result.estimates))
    write_csv(out / "track_ospa.csv", ("scan", "ospa"),
              [(k, float(v)) for k, v in enumerate(result.ospa)])
    _write_measurements(out / "measurements.csv", result.measurements)
    n_declared = sum(len(e) for e in result.estimates)
    log.info("declared %d track estimates over %d scans", n_declared, cfg.scenario.n_scans)


def cmd_evaluate(cfg):
    out = _out_dir(cfg)
    mc = run_monte_carlo(cfg)
    write_csv(out / "ospa.csv", OSPA_HEADER, ospa_rows(mc.curve))
    write_csv(out / "timing.csv", TIMING_HEADER, timing_rows([mc]))
    log.info("mean OSPA %.3f over %d runs", float(np.mean(mc.curve.mean)), mc.curve.n_runs)


def cmd_all(cfg):
    cmd_simulate(cfg)
    cmd_detect(cfg)
    cmd_track(cfg)
    cmd_evaluate(cfg)


COMMANDS = {
    "simulate": cmd_simulate,
    "detect": cmd_detect,
    "track": cmd_track,
    "evaluate": cmd_evaluate,
    "all": cmd_all,
}


def build_parser():
    parser = argparse.ArgumentParser(prog="littoral", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="TOML experiment configuration")
        p.add_argument("--seed", type=int, help="override the configured seed")
        p.add_argument("--runs", type=int, help="override eval.n_runs")
        p.add_argument("--out", help="override the output directory")
        p.add_argument("--detector", choices=["cfar", "surrogate", "scoremap-file", "detections-file"])
        p.add_argument("--birth", choices=["ideal", "mdb", "measurement_driven"])
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _load(args)
        COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"littoral: invalid configuration: {exc}", file=sys.stderr)
        return 2
    except (ScenarioError, OSError, ValueError, RuntimeError) as exc:
        print(f"littoral: {args.command} failed: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
