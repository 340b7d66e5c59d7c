"""CSV and SVG figures: Doppler-time maps, feature timelines, trajectories.

CSV files are always written. SVGs need matplotlib (the ``plot`` extra);
without it they are skipped with a log message.
"""

from __future__ import annotations

import csv
import io
import logging
from pathlib import Path

import numpy as np

from .formats import atomic_write

log = logging.getLogger(__name__)


def _pyplot():
    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        log.info("matplotlib not installed; writing CSV only")
        return None
    return plt


def _write_csv(path, header, rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    atomic_write(path, buf.getvalue())


def _num(v):
    return "" if v is None or (isinstance(v, float) and not np.isfinite(v)) else f"{v:.9g}"


def doppler_time_maps(maps_by_band: dict, sweep_period: float, out_dir) -> list[Path]:
    """Per band: CAF magnitude (max over beams) against sweep time and Doppler."""
    out_dir = Path(out_dir)
    written = []
    plt = _pyplot()
    for band, maps in sorted(maps_by_band.items()):
        maps = sorted(maps, key=lambda m: m.sweep)
        if not maps:
            continue
        bins = maps[0].doppler_bins
        image = np.array([m.magnitudes.max(axis=0) for m in maps])
        best_beam = np.array([m.magnitudes.argmax(axis=0) for m in maps])
        t = np.array([(m.sweep - 1) * sweep_period for m in maps])
        path = out_dir / f"doppler_time_band{band}.csv"
        rows = [[m.sweep, _num(ti), _num(f), int(q) + 1, _num(v)]
                for m, ti, row, beams in zip(maps, t, image, best_beam)
                for f, v, q in zip(bins, row, beams)]
        _write_csv(path, ["k", "t_s", "doppler_hz", "best_beam", "magnitude"], rows)
        written.append(path)
        if plt is not None:
            fig, ax = plt.subplots(figsize=(6, 4))
            db = 20 * np.log10(np.maximum(image.T, 1e-12))
            ax.imshow(db, aspect="auto", origin="lower", cmap="viridis",
                      extent=[t[0], t[-1] + sweep_period, bins[0], bins[-1]],
                      vmin=db.max() - 30, vmax=db.max())
            ax.set_xlabel("time [s]")
            ax.set_ylabel("Doppler [Hz]")
            ax.set_title(f"band {band}: CAF magnitude, max over beams [dB]")
            svg = out_dir / f"doppler_time_band{band}.svg"
            fig.savefig(svg)
            plt.close(fig)
            written.append(svg)
    return written


def feature_timeline(report: dict, out_dir) -> list[Path]:
    out_dir = Path(out_dir)
    T_d = report["sweep_period"]
    feats = report.get("features", [])
    rows = [[f["k"], _num((f["k"] - 1) * T_d), _num(f["aoa_raw_deg"]), _num(f["aoa_smoothed_deg"]),
             _num(f["f1_hz"]), _num(f["f2_hz"])] for f in feats]
    path = out_dir / "features.csv"
    _write_csv(path, ["k", "t_s", "aoa_raw_deg", "aoa_smoothed_deg", "f1_hz", "f2_hz"], rows)
    written = [path]
    plt = _pyplot()
    if plt is not None and feats:
        def col(name):
            return np.array([np.nan if f[name] is None else f[name] for f in feats], dtype=float)

        t = (np.array([f["k"] for f in feats]) - 1) * T_d
        fig, (a1, a2) = plt.subplots(2, 1, sharex=True, figsize=(6, 5))
        a1.step(t, col("aoa_raw_deg"), where="post", label="raw")
        a1.plot(t, col("aoa_smoothed_deg"), "o-", label="smoothed")
        a1.set_ylabel("AoA [deg]")
        a1.legend()
        a2.plot(t, col("f1_hz"), "s-", label="band 1")
        a2.plot(t, col("f2_hz"), "^-", label="band 2")
        a2.set_ylabel("Doppler [Hz]")
        a2.set_xlabel("time [s]")
        a2.legend()
        svg = out_dir / "features.svg"
        fig.savefig(svg)
        plt.close(fig)
        written.append(svg)
    return written


def trajectory_overlay(report: dict, out_dir, truth=None, true_txs=None) -> list[Path]:
    out_dir = Path(out_dir)
    sweeps = report.get("sweeps", [])
    rows = []
    for s in sweeps:
        row = [s["k"], _num(s["p"][0]), _num(s["p"][1]), "", ""]
        if truth is not None and 1 <= s["k"] <= truth.K:
            row[3:] = [_num(v) for v in truth.positions[s["k"] - 1]]
        rows.append(row)
    path = out_dir / "trajectory.csv"
    _write_csv(path, ["k", "x_est", "y_est", "x_true", "y_true"], rows)
    written = [path]
    plt = _pyplot()
    if plt is not None and sweeps:
        P = np.array([s["p"] for s in sweeps])
        fig, ax = plt.subplots(figsize=(5, 5))
        ax.plot(P[:, 0], P[:, 1], "o-", label="estimated")
        if truth is not None:
            ax.plot(truth.positions[:, 0], truth.positions[:, 1], "k--", label="truth")
        est = report.get("estimate") or {}
        for name, key in (("TX1", "tx1"), ("TX2", "tx2")):
            if key in est:
                ax.plot(*est[key], "rx")
                ax.annotate(f"{name} est", est[key])
        if true_txs is not None:
            for tx in true_txs:
                ax.plot(*tx, "k^")
        ax.plot(0, 0, "ks")
        ax.annotate("RX", (0, 0))
        ax.set_aspect("equal")
        ax.set_xlabel("x [m]")
        ax.set_ylabel("y [m]")
        ax.legend()
        svg = out_dir / "trajectory.svg"
        fig.savefig(svg)
        plt.close(fig)
        written.append(svg)
    return written
