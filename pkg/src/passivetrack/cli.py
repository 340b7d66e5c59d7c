"""Command-line entry point: ``passivetrack <stage> ...``.

Stages read and write files only, so they can be chained or re-run one at a
time::

    passivetrack simulate --scenario sc.json --out caps/
    passivetrack detect   --in caps/ --config cfg.json --out features.csv
    passivetrack estimate --features features.csv --adoa 37.87,57.26,-1 --config cfg.json --out report.json
    passivetrack predict  --report report.json --window 3
    passivetrack eval     --report report.json --truth caps/truth.csv --scenario sc.json

or all at once with ``passivetrack run --scenario sc.json --out results/``.
Errors go to stderr tagged with the failing stage; the exit status is 1.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import formats, pipeline
from .blockage import PredictorConfig
from .config import (ConfigError, PipelineConfig, adoa_from_string, default_scenario_document,
                     load_config, load_scenario, parse_scenario, save_config, save_scenario)
from .estimator import EstimationError
from .kernels import BACKEND

log = logging.getLogger("passivetrack")


class CliError(Exception):
    def __init__(self, stage: str, message: str):
        super().__init__(message)
        self.stage = stage


def _scenario(path):
    if path is None:
        return parse_scenario(default_scenario_document())
    return load_scenario(path)


def _config(path, scenario=None) -> PipelineConfig:
    if path is not None:
        return load_config(path)
    return PipelineConfig.for_scenario(scenario) if scenario is not None else PipelineConfig()


def _track(scenario, track_spec, truth_path, stage):
    if truth_path is not None and Path(truth_path).exists():
        return formats.read_truth(truth_path, scenario.sweep_period)
    if track_spec is None:
        raise CliError(stage, "no truth track: pass --truth <csv> or add a 'track' section to the scenario")
    return track_spec.track(scenario.sweep_period)


def cmd_simulate(args) -> int:
    scenario, spec = _scenario(args.scenario)
    if args.trial is not None:
        from .scenarios import scenario_a

        trial = scenario_a(args.trial, scenario)
        scenario, spec = trial.scenario, trial.track
    track = _track(scenario, spec, args.truth, "simulate")
    paths = pipeline.simulate(scenario, track, args.out, jobs=args.jobs)
    print(f"wrote {len(paths)} sweep containers and truth.csv to {args.out}")
    return 0


def cmd_detect(args) -> int:
    cfg = _config(args.config)
    if not Path(args.input).is_dir():
        raise CliError("detect", f"capture directory {args.input} does not exist")
    features = pipeline.detect(args.input, cfg.detector, map_dir=args.maps, jobs=args.jobs)
    formats.write_features(args.out, features)
    valid = sum(f.valid for f in features)
    print(f"{len(features)} sweeps, {valid} with detections -> {args.out}")
    return 0


def cmd_estimate(args) -> int:
    cfg = _config(args.config)
    adoa = adoa_from_string(args.adoa)
    features = formats.read_features(args.features)
    if not features:
        report = pipeline.empty_report(features, cfg, adoa, "no sweeps")
    else:
        try:
            est, smoothed = pipeline.estimate_features(features, adoa, cfg)
        except EstimationError as exc:
            raise CliError("estimate", str(exc)) from exc
        report = pipeline.build_report(pipeline.regularize_rows(features, cfg.system.sweep_period),
                                       smoothed, est, adoa, cfg)
    formats.dump_json(args.out, report)
    _summary(report)
    return 0


def cmd_predict(args) -> int:
    report = pipeline.load_report(args.report)
    if report.get("estimate") is None:
        raise CliError("predict", "report holds no estimate")
    try:
        report["prediction"] = formats.to_jsonable(
            pipeline.predict_report(report, PredictorConfig(window=args.window)))
    except ValueError as exc:
        raise CliError("predict", str(exc)) from exc
    if report.pop("metrics", None) is not None:
        print("metrics dropped; re-run 'eval' to refresh them")
    formats.dump_json(args.out or args.report, report)
    _summary(report)
    return 0


def cmd_run(args) -> int:
    scenario, spec = _scenario(args.scenario)
    if args.trial is not None:
        from .scenarios import scenario_a

        trial = scenario_a(args.trial, scenario)
        scenario, spec = trial.scenario, trial.track
    track = _track(scenario, spec, args.truth, "run")
    cfg = _config(args.config, scenario)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    report, features, maps = pipeline.run(
        scenario, track, cfg, jobs=args.jobs,
        capture_dir=out / "captures" if args.keep_captures else None)
    formats.write_features(out / "features.csv", features)
    formats.write_truth(out / "truth.csv", track)
    formats.dump_json(out / "report.json", report)
    if args.plot:
        from . import plotting

        plotting.doppler_time_maps(maps, scenario.sweep_period, _mkdir(args.plot))
        plotting.feature_timeline(report, args.plot)
        plotting.trajectory_overlay(report, args.plot, track, scenario.tx_positions)
    _summary(report)
    return 0


def cmd_eval(args) -> int:
    report = pipeline.load_report(args.report)
    truth = formats.read_truth(args.truth, report["sweep_period"])
    txs = _scenario(args.scenario)[0].tx_positions if args.scenario else None
    metrics = pipeline.evaluate(report, truth, txs)
    if args.out:
        report["metrics"] = metrics
        formats.dump_json(args.out, report)
    if args.plot:
        from . import plotting

        plotting.feature_timeline(report, _mkdir(args.plot))
        plotting.trajectory_overlay(report, args.plot, truth, txs)
    shown = {k: v for k, v in metrics.items() if k != "trajectory_errors_m"}
    print(json.dumps(shown, indent=2))
    return 0


def cmd_scenario(args) -> int:
    scenario, spec = _scenario(None)
    if args.trial is not None:
        from .scenarios import scenario_a

        trial = scenario_a(args.trial, scenario)
        scenario, spec = trial.scenario, trial.track
    save_scenario(args.out, scenario, spec)
    if args.config:
        save_config(args.config, PipelineConfig.for_scenario(scenario))
    return 0


def _mkdir(path) -> Path:
    Path(path).mkdir(parents=True, exist_ok=True)
    return Path(path)


def _summary(report: dict) -> None:
    est = report.get("estimate")
    if est is None:
        print(f"no estimate ({report.get('note', 'no data')})")
        return
    print(f"d = {est['d']:.3f} m, TX2 = ({est['tx2'][0]:.3f}, {est['tx2'][1]:.3f}) m, "
          f"sweeps {est['first_sweep']}..{est['first_sweep'] + est['K'] - 1}, "
          f"objective {est['objective']:.4g}")
    for link in (report.get("prediction") or {}).get("links", []):
        if link["blocked"]:
            print(f"link {link['link']}: blockage predicted in {link['time_s']:.3f} s (mu = {link['mu']:.3f})")
        else:
            print(f"link {link['link']}: no blockage predicted")
    metrics = report.get("metrics")
    if metrics and metrics.get("tx1_error_m") is not None:
        print(f"errors: TX1 {metrics['tx1_error_m']:.3f} m, TX2 {metrics['tx2_error_m']:.3f} m, "
              f"trajectory mean {metrics['trajectory_mean_error_m']:.3f} m")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="passivetrack", description=__doc__.split("\n")[0])
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    p.add_argument("--version", action="version", version=f"%(prog)s 0.1.0 ({BACKEND} kernels)")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="write capture containers for a scenario")
    s.add_argument("--scenario", help="scenario JSON (default: packaged scenario A)")
    s.add_argument("--truth", help="truth track CSV to simulate (default: the scenario's track)")
    s.add_argument("--trial", type=int, help="use the randomized scenario-A track of this trial")
    s.add_argument("--out", required=True, help="output directory")
    s.add_argument("--jobs", type=int, default=1)
    s.set_defaults(func=cmd_simulate, stage="simulate")

    s = sub.add_parser("detect", help="capture containers -> features CSV")
    s.add_argument("--in", dest="input", required=True, help="directory of sweep_*.psiq files")
    s.add_argument("--config", help="pipeline config JSON")
    s.add_argument("--out", required=True, help="features CSV")
    s.add_argument("--maps", help="also dump Doppler-angle maps into this directory")
    s.add_argument("--jobs", type=int, default=1)
    s.set_defaults(func=cmd_detect, stage="detect")

    s = sub.add_parser("estimate", help="features CSV -> report with TX and trajectory estimates")
    s.add_argument("--features", required=True)
    s.add_argument("--adoa", required=True, help="phi_rx,phi_tx1,sign in degrees, e.g. 37.87,57.26,-1")
    s.add_argument("--config", help="pipeline config JSON")
    s.add_argument("--out", required=True, help="report JSON")
    s.set_defaults(func=cmd_estimate, stage="estimate")

    s = sub.add_parser("predict", help="recompute blockage predictions in a report")
    s.add_argument("--report", required=True)
    s.add_argument("--window", type=int, default=3, help="velocity averaging window in sweeps")
    s.add_argument("--out", help="write here instead of updating the report in place")
    s.set_defaults(func=cmd_predict, stage="predict")

    s = sub.add_parser("run", help="simulate, detect, estimate, predict and evaluate")
    s.add_argument("--scenario", help="scenario JSON (default: packaged scenario A)")
    s.add_argument("--truth", help="truth track CSV (default: the scenario's track)")
    s.add_argument("--trial", type=int, help="use the randomized scenario-A track of this trial")
    s.add_argument("--config", help="pipeline config JSON (default: derived from the scenario)")
    s.add_argument("--out", required=True, help="output directory")
    s.add_argument("--keep-captures", action="store_true", help="also write the capture containers")
    s.add_argument("--plot", help="write CSV/SVG figures into this directory")
    s.add_argument("--jobs", type=int, default=1)
    s.set_defaults(func=cmd_run, stage="run")

    s = sub.add_parser("eval", help="score a report against a truth track")
    s.add_argument("--report", required=True)
    s.add_argument("--truth", required=True, help="truth CSV")
    s.add_argument("--scenario", help="scenario JSON, for transmitter and blockage errors")
    s.add_argument("--out", help="write the report with metrics here")
    s.add_argument("--plot", help="write CSV/SVG figures into this directory")
    s.set_defaults(func=cmd_eval, stage="eval")

    s = sub.add_parser("scenario", help="write the packaged scenario (and a matching config)")
    s.add_argument("--out", required=True)
    s.add_argument("--trial", type=int)
    s.add_argument("--config", help="also write the default pipeline config here")
    s.set_defaults(func=cmd_scenario, stage="scenario")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except pipeline.StageError as exc:
        print(f"passivetrack: {exc}", file=sys.stderr)
    except CliError as exc:
        print(f"passivetrack: [{exc.stage}] {exc}", file=sys.stderr)
    except (ConfigError, formats.FormatError, OSError, ValueError, EstimationError) as exc:
        print(f"passivetrack: [{args.stage}] {type(exc).__name__}: {exc}", file=sys.stderr)
    return 1


if __name__ == "__main__":
    sys.exit(main())
