"""Stage functions behind the command line: simulate, detect, estimate,
predict, evaluate and the end-to-end run.

Every stage reads what it needs from its arguments (or files) only, so each
one can be re-run on its own from on-disk inputs. Failures are re-raised as
:class:`StageError` carrying the name of the stage that failed.
"""

from __future__ import annotations

import logging
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import blockage, dsp, formats, geometry
from .config import PipelineConfig, SystemConfig, adoa_to_string
from .estimator import Estimate, EstimationError, estimate, feature_matrix
from .waveform import DwellCapture, Scenario, SweepCapture, TruthTrack, simulate_sweep

log = logging.getLogger(__name__)

REPORT_FORMAT = "passivetrack-report"
REPORT_VERSION = 1


class StageError(RuntimeError):
    """A pipeline stage failed; ``stage`` names it."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage


def _parallel_map(fn, items, jobs: int):
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [fn(i) for i in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


# ------------------------------------------------------------------ simulate


def simulate(scenario: Scenario, track: TruthTrack, out_dir, jobs: int = 1) -> list[Path]:
    """Write one capture container per sweep plus ``truth.csv`` into ``out_dir``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = _parallel_map(_SimulateSweep(scenario, track, out_dir), range(1, track.K + 1), jobs)
    formats.write_truth(out_dir / "truth.csv", track)
    return paths


class _SimulateSweep:
    # picklable callable for the process pool
    def __init__(self, scenario, track, out_dir):
        self.scenario, self.track, self.out_dir = scenario, track, out_dir

    def __call__(self, k: int) -> Path:
        sc = self.scenario
        cap = simulate_sweep(sc, self.track, k)
        path = self.out_dir / formats.capture_name(k)
        formats.write_capture(path, formats.records_from_sweep(cap, sc.beam_grid, sc.carriers,
                                                               sc.sample_period))
        return path


# -------------------------------------------------------------------- detect


def detect_capture(capture: SweepCapture, cfg, beam_grid, sample_period: float,
                   sweep_period: float):
    """Features and maps of one sweep; a missing dwell makes the row invalid."""
    t_start = (capture.sweep - 1) * sweep_period
    try:
        return dsp.process_sweep(capture, cfg, beam_grid, sample_period, sweep_period)
    except KeyError as exc:
        log.warning("sweep %d: %s; row marked invalid", capture.sweep, exc)
        return dsp.FeatureVector(capture.sweep, t_start), []


def capture_from_records(records: list[formats.DwellRecord]):
    """Rebuild a sweep capture and its receiver parameters from dwell records."""
    if not records:
        raise ValueError("empty capture file")
    sweeps = {r.sweep for r in records}
    if len(sweeps) != 1:
        raise ValueError(f"records from several sweeps {sorted(sweeps)} in one container")
    dwells = {(r.band, r.beam): DwellCapture(r.band, r.sweep, r.beam, r.reference, r.surveillance)
              for r in records}
    angles = {}
    for r in records:
        angles.setdefault(r.beam, r.beam_angle)
    Q = max(angles)
    beam_grid = [angles.get(q + 1, np.nan) for q in range(Q)]
    ts = records[0].sample_period
    return SweepCapture(records[0].sweep, dwells), beam_grid, ts, records[0].n_samples * ts * Q


def detect(in_dir, cfg: dsp.DetectorConfig, map_dir=None, jobs: int = 1) -> list[dsp.FeatureVector]:
    """Process every ``sweep_*.psiq`` container in ``in_dir``."""
    files = sorted(Path(in_dir).glob("sweep_*.psiq"))
    results = _parallel_map(_DetectFile(cfg), files, jobs)
    features = []
    for fv, maps, carriers, beam_grid in results:
        features.append(fv)
        if map_dir is not None:
            for m in maps:
                path = Path(map_dir) / f"map_b{m.band}_{formats.capture_name(m.sweep)}"
                formats.write_capture(path, formats.map_records(m, beam_grid, carriers[m.band]))
    return features


class _DetectFile:
    def __init__(self, cfg):
        self.cfg = cfg

    def __call__(self, path):
        records = formats.read_capture(path)
        capture, beam_grid, ts, sweep_period = capture_from_records(records)
        carriers = {r.band: r.carrier for r in records}
        fv, maps = detect_capture(capture, self.cfg, beam_grid, ts, sweep_period)
        return fv, maps, carriers, beam_grid


# ------------------------------------------------------------------ estimate


def regularize_rows(features: list[dsp.FeatureVector], sweep_period: float) -> list[dsp.FeatureVector]:
    """Rows for sweeps 1..max(k) in order; sweeps without a row become invalid."""
    by_k = {f.sweep: f for f in features}
    K = max(by_k, default=0)
    return [by_k.get(k, dsp.FeatureVector(k, (k - 1) * sweep_period)) for k in range(1, K + 1)]


def dwell_offsets(features, system: SystemConfig) -> np.ndarray:
    """Middle of the dwell whose beam produced each sweep's raw AoA, in seconds."""
    grid = np.asarray(system.beam_grid)
    out = np.zeros(len(features))
    for i, f in enumerate(features):
        if f.aoa_valid:
            q = int(np.argmin(np.abs(grid - f.aoa)))
            out[i] = (q + 0.5) * system.dwell
    return out


def estimate_features(features, adoa: geometry.AdoaPair, cfg: PipelineConfig):
    """Smooth the AoAs and fit the trajectory. Returns ``(estimate, smoothed rows)``."""
    rows = regularize_rows(features, cfg.system.sweep_period)
    smoothed = dsp.smooth_aoa(rows)
    offsets = dwell_offsets(rows, cfg.system) if cfg.system.dwell_offsets else None
    est = estimate(feature_matrix(smoothed), adoa, cfg.system.wavelengths, cfg.system.sweep_period,
                   cfg.estimator, offsets=offsets)
    return est, smoothed


# ------------------------------------------------------------------- predict


def predict_report(report: dict, cfg: blockage.PredictorConfig) -> dict:
    """Blockage section for the estimate stored in ``report``."""
    sweeps = report["sweeps"]
    if cfg.window > len(sweeps):
        raise ValueError(f"window {cfg.window} exceeds the {len(sweeps)} estimated sweeps")
    P = np.array([s["p"] for s in sweeps], dtype=float)
    V = np.array([s["v"] for s in sweeps], dtype=float)
    txs = [np.asarray(report["estimate"]["tx1"], float), np.asarray(report["estimate"]["tx2"], float)]
    pred = blockage.predict(P, V, txs, cfg)
    links = []
    for m, (link, tx) in enumerate(zip(pred.links, txs), start=1):
        entry = {"link": m, "blocked": link.blocked, "time_s": link.time, "mu": link.mu,
                 "degenerate": link.degenerate}
        if link.blocked:
            # re-check the intersection identity before it goes on record
            miss = np.linalg.norm(pred.p_last + pred.v_bar * link.time - link.mu * tx)
            if miss > 1e-9:
                raise RuntimeError(f"link {m}: intersection identity off by {miss:.3g} m")
            entry["identity_residual_m"] = float(miss)
        links.append(entry)
    return {"window": cfg.window, "from_sweep": sweeps[-1]["k"], "v_bar": pred.v_bar,
            "p_last": pred.p_last, "links": links}


# -------------------------------------------------------------------- report


def build_report(features, smoothed, est: Estimate, adoa: geometry.AdoaPair,
                 cfg: PipelineConfig) -> dict:
    T_d = cfg.system.sweep_period
    P = est.params.positions(T_d)
    V = est.params.velocities
    k0 = est.first_sweep
    sweeps = [{"k": k0 + i, "t": (k0 + i - 1) * T_d, "p": P[i], "v": V[i]} for i in range(est.K)]
    feats = [{"k": f.sweep, "aoa_raw_deg": f.aoa, "aoa_smoothed_deg": s.aoa, "f1_hz": f.f1,
              "f2_hz": f.f2} for f, s in zip(features, smoothed)]
    report = {
        "format": REPORT_FORMAT,
        "version": REPORT_VERSION,
        "adoa": adoa_to_string(adoa),
        "sweep_period": T_d,
        "carriers": list(cfg.system.carriers),
        "estimate": {
            "d": est.params.d,
            "tx1": [est.params.d, 0.0],
            "tx2": est.tx2,
            "objective": est.objective,
            "converged": est.converged,
            "per_start_objectives": est.per_start_objectives,
            "first_sweep": k0,
            "K": est.K,
        },
        "sweeps": sweeps,
        "features": feats,
    }
    report["prediction"] = predict_report(formats.to_jsonable(report), cfg.predictor)
    return formats.to_jsonable(report)


def empty_report(features, cfg: PipelineConfig, adoa: geometry.AdoaPair, reason: str) -> dict:
    return formats.to_jsonable({
        "format": REPORT_FORMAT, "version": REPORT_VERSION, "adoa": adoa_to_string(adoa),
        "sweep_period": cfg.system.sweep_period, "carriers": list(cfg.system.carriers),
        "estimate": None, "sweeps": [], "prediction": None, "note": reason,
        "features": [{"k": f.sweep, "aoa_raw_deg": f.aoa, "aoa_smoothed_deg": f.aoa,
                      "f1_hz": f.f1, "f2_hz": f.f2} for f in features],
    })


def load_report(path) -> dict:
    doc = formats.load_json(path, REPORT_FORMAT)
    if doc.get("version") != REPORT_VERSION:
        raise formats.FormatError(f"unsupported report version {doc.get('version')!r}")
    return doc


# ------------------------------------------------------------------ evaluate


def evaluate(report: dict, truth: TruthTrack, true_txs=None) -> dict:
    """Error metrics of a report against a truth track (and true TX positions)."""
    metrics: dict = {}
    sweeps = [s for s in report.get("sweeps", []) if 1 <= s["k"] <= truth.K]
    if sweeps:
        idx = np.array([s["k"] - 1 for s in sweeps])
        P = np.array([s["p"] for s in sweeps], dtype=float)
        err = np.linalg.norm(P - truth.positions[idx], axis=1)
        metrics["trajectory_mean_error_m"] = float(err.mean())
        metrics["trajectory_rms_error_m"] = float(np.sqrt(np.mean(err ** 2)))
        metrics["trajectory_errors_m"] = err
    aoa_err = []
    for f in report.get("features", []):
        if f.get("aoa_raw_deg") is not None and 1 <= f["k"] <= truth.K:
            aoa_err.append(f["aoa_raw_deg"] - float(geometry.aoa(truth.positions[f["k"] - 1])))
    metrics["aoa_rms_error_deg"] = float(np.sqrt(np.mean(np.square(aoa_err)))) if aoa_err else None

    est = report.get("estimate")
    if est is not None and true_txs is not None:
        t1, t2 = (np.asarray(t, float) for t in true_txs)
        metrics["tx1_error_m"] = float(np.linalg.norm(np.asarray(est["tx1"]) - t1))
        metrics["tx2_error_m"] = float(np.linalg.norm(np.asarray(est["tx2"]) - t2))
    pred = report.get("prediction")
    if pred is not None and true_txs is not None and 1 <= pred["from_sweep"] <= truth.K:
        k = pred["from_sweep"] - 1
        links = []
        for entry, tx in zip(pred["links"], true_txs):
            actual = blockage.predict_link(truth.positions[k], truth.velocities[k], tx)
            e = {"link": entry["link"], "true_blocked": actual.blocked, "true_time_s": actual.time,
                 "time_error_s": None}
            if entry["blocked"] and actual.blocked:
                e["time_error_s"] = entry["time_s"] - actual.time
            links.append(e)
        metrics["blockage"] = links
    return formats.to_jsonable(metrics)


# ----------------------------------------------------------------------- run


class _SimDetect:
    def __init__(self, scenario, track, cfg):
        self.scenario, self.track, self.cfg = scenario, track, cfg

    def __call__(self, k):
        sc = self.scenario
        cap = simulate_sweep(sc, self.track, k)
        return detect_capture(cap, self.cfg.detector, sc.beam_grid, sc.sample_period, sc.sweep_period)


def run(scenario: Scenario, track: TruthTrack, cfg: PipelineConfig, jobs: int = 1,
        capture_dir=None):
    """simulate -> detect -> smooth -> estimate -> predict -> evaluate.

    Returns ``(report, features, maps)``. Captures go to disk only when
    ``capture_dir`` is given.
    """
    stage = "simulate"
    try:
        if capture_dir is not None:
            simulate(scenario, track, capture_dir, jobs)
            stage = "detect"
            results = _parallel_map(_DetectFile(cfg.detector),
                                    sorted(Path(capture_dir).glob("sweep_*.psiq")), jobs)
            results = [(fv, maps) for fv, maps, _, _ in results]
        else:
            results = _parallel_map(_SimDetect(scenario, track, cfg), range(1, track.K + 1), jobs)
        stage = "detect"
        features = [fv for fv, _ in results]
        maps = defaultdict(list)
        for _, ms in results:
            for m in ms:
                maps[m.band].append(m)
        stage = "estimate"
        if not features:
            report = empty_report(features, cfg, scenario.adoa, "no sweeps")
        else:
            try:
                est, smoothed = estimate_features(features, scenario.adoa, cfg)
            except EstimationError as exc:
                raise StageError("estimate", str(exc)) from exc
            stage = "predict"
            report = build_report(regularize_rows(features, cfg.system.sweep_period), smoothed, est,
                                  scenario.adoa, cfg)
        stage = "eval"
        report["metrics"] = evaluate(report, track, scenario.tx_positions)
    except StageError:
        raise
    except Exception as exc:
        raise StageError(stage, f"{type(exc).__name__}: {exc}") from exc
    return report, features, dict(maps)
