"""On-disk formats: IQ capture containers, features CSV, JSON documents.

Capture container
-----------------
A sweep file is a concatenation of dwell records. Each record is a 48-byte
little-endian header followed by ``N0`` reference samples and ``N0``
surveillance samples, each sample two float32 values (I, Q)::

    offset  type      field
    0       4s        magic  b"PSIQ"
    4       uint32    format version (1)
    8       uint32    band m (1 or 2)
    12      uint32    sweep k (1-based)
    16      uint32    beam index q (1-based)
    20      uint32    N0
    24      float64   sample period T_s [s]
    32      float64   beam angle [deg]
    40      float64   carrier frequency [Hz]

Doppler-angle map dumps reuse the record layout: ``N0`` is the number of
Doppler bins, the reference block carries the bin centers in I and the
surveillance block the CAF magnitudes in I (Q is zero in both).
"""

from __future__ import annotations

import csv
import io
import json
import os
import struct
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dsp import DopplerAngleMap, FeatureVector

MAGIC = b"PSIQ"
FORMAT_VERSION = 1
HEADER = struct.Struct("<4sIIIIIddd")
SAMPLE_DTYPE = np.dtype("<c8")


class FormatError(ValueError):
    pass


@dataclass
class DwellRecord:
    band: int
    sweep: int
    beam: int
    sample_period: float
    beam_angle: float
    carrier: float
    reference: np.ndarray
    surveillance: np.ndarray

    @property
    def n_samples(self) -> int:
        return len(self.reference)


def atomic_write(path, data: bytes | str) -> None:
    """Write to a temporary file next to ``path`` and rename over it."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, mode) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise


def encode_record(rec: DwellRecord) -> bytes:
    ref = np.asarray(rec.reference).astype(SAMPLE_DTYPE)
    sur = np.asarray(rec.surveillance).astype(SAMPLE_DTYPE)
    if ref.shape != sur.shape or ref.ndim != 1:
        raise FormatError("reference and surveillance must be 1-D and equally long")
    header = HEADER.pack(MAGIC, FORMAT_VERSION, rec.band, rec.sweep, rec.beam, len(ref),
                         rec.sample_period, rec.beam_angle, rec.carrier)
    return header + ref.tobytes() + sur.tobytes()


def decode_records(buf: bytes) -> list[DwellRecord]:
    out = []
    pos = 0
    view = memoryview(buf)
    while pos < len(buf):
        if len(buf) - pos < HEADER.size:
            raise FormatError(f"truncated header at byte {pos}")
        magic, version, band, sweep, beam, n0, ts, angle, carrier = HEADER.unpack_from(buf, pos)
        if magic != MAGIC:
            raise FormatError(f"bad magic {magic!r} at byte {pos}")
        if version != FORMAT_VERSION:
            raise FormatError(f"unsupported capture format version {version}")
        pos += HEADER.size
        nbytes = n0 * SAMPLE_DTYPE.itemsize
        if len(buf) - pos < 2 * nbytes:
            raise FormatError(f"truncated sample block in record for band {band} beam {beam}")
        ref = np.frombuffer(view[pos:pos + nbytes], dtype=SAMPLE_DTYPE).copy()
        sur = np.frombuffer(view[pos + nbytes:pos + 2 * nbytes], dtype=SAMPLE_DTYPE).copy()
        pos += 2 * nbytes
        out.append(DwellRecord(band, sweep, beam, ts, angle, carrier, ref, sur))
    return out


def write_capture(path, records: list[DwellRecord]) -> None:
    atomic_write(path, b"".join(encode_record(r) for r in records))


def read_capture(path) -> list[DwellRecord]:
    return decode_records(Path(path).read_bytes())


def capture_name(sweep: int) -> str:
    return f"sweep_{sweep:05d}.psiq"


def records_from_sweep(capture, beam_grid, carriers, sample_period) -> list[DwellRecord]:
    recs = []
    for (band, beam), dw in sorted(capture.dwells.items()):
        recs.append(DwellRecord(band, capture.sweep, beam, sample_period, float(beam_grid[beam - 1]),
                                float(carriers[band - 1]), dw.reference, dw.surveillance))
    return recs


def map_records(dmap: DopplerAngleMap, beam_grid, carrier: float) -> list[DwellRecord]:
    recs = []
    for q, row in enumerate(dmap.magnitudes):
        recs.append(DwellRecord(dmap.band, dmap.sweep, q + 1, dmap.resolution, float(beam_grid[q]),
                                carrier, dmap.doppler_bins.astype(complex), row.astype(complex)))
    return recs


# ---------------------------------------------------------------- features CSV

FEATURE_COLUMNS = ["k", "t_start_s", "aoa_deg", "aoa_valid", "f1_hz", "f1_valid",
                   "f2_hz", "f2_valid", "peak1_mag", "peak2_mag"]


def _num(x: float) -> str:
    return f"{x:.9g}"


def write_features(path, features: list[FeatureVector]) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(FEATURE_COLUMNS)
    for f in features:
        w.writerow([f.sweep, _num(f.t_start), _num(f.aoa), int(f.aoa_valid), _num(f.f1),
                    int(f.f1_valid), _num(f.f2), int(f.f2_valid), _num(f.peak1), _num(f.peak2)])
    atomic_write(path, buf.getvalue())


def parse_features(text: str) -> list[FeatureVector]:
    rows = list(csv.DictReader(io.StringIO(text)))
    if rows and set(FEATURE_COLUMNS) - set(rows[0]):
        raise FormatError(f"features CSV lacks columns {sorted(set(FEATURE_COLUMNS) - set(rows[0]))}")
    out = []
    for r in rows:
        def val(name, flag=None):
            if flag is not None and r[flag].strip() != "1":
                return np.nan
            return float(r[name])

        out.append(FeatureVector(
            sweep=int(r["k"]), t_start=float(r["t_start_s"]),
            aoa=val("aoa_deg", "aoa_valid"), f1=val("f1_hz", "f1_valid"), f2=val("f2_hz", "f2_valid"),
            peak1=float(r["peak1_mag"]), peak2=float(r["peak2_mag"]),
        ))
    return out


def read_features(path) -> list[FeatureVector]:
    return parse_features(Path(path).read_text())


# ------------------------------------------------------------------ truth CSV

TRUTH_COLUMNS = ["k", "t", "x", "y", "vx", "vy"]


def write_truth(path, track) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRUTH_COLUMNS)
    for k in range(track.K):
        w.writerow([k + 1, repr(float(track.times[k])), *(repr(float(v)) for v in track.positions[k]),
                    *(repr(float(v)) for v in track.velocities[k])])
    atomic_write(path, buf.getvalue())


def read_truth(path, sweep_period: float | None = None):
    from .waveform import TruthTrack

    rows = list(csv.DictReader(io.StringIO(Path(path).read_text())))
    if rows and set(TRUTH_COLUMNS) - set(rows[0]):
        raise FormatError(f"truth CSV needs columns {TRUTH_COLUMNS}")
    rows.sort(key=lambda r: int(r["k"]))
    pos = [[float(r["x"]), float(r["y"])] for r in rows]
    vel = [[float(r["vx"]), float(r["vy"])] for r in rows]
    if sweep_period is None:
        t = [float(r["t"]) for r in rows]
        sweep_period = t[1] - t[0] if len(t) > 1 else 0.0
    return TruthTrack(np.reshape(pos, (-1, 2)), np.reshape(vel, (-1, 2)), sweep_period)


# ------------------------------------------------------------- JSON documents


def to_jsonable(obj):
    """Plain JSON types; arrays become lists and non-finite floats None."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else None
    if obj is None or isinstance(obj, str):
        return obj
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dump_json(path, doc: dict) -> None:
    atomic_write(path, json.dumps(to_jsonable(doc), indent=2, allow_nan=False) + "\n")


def load_json(path, kind: str | None = None) -> dict:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(doc, dict):
        raise FormatError(f"{path}: expected a JSON object")
    if kind is not None and doc.get("format") != kind:
        raise FormatError(f"{path}: expected a '{kind}' document, got {doc.get('format')!r}")
    return doc
