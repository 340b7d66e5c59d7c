import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from passivetrack import formats
from passivetrack.dsp import DopplerAngleMap, FeatureVector
from passivetrack.waveform import TruthTrack


def _record(n=64, seed=0, beam=2):
    rng = np.random.default_rng(seed)
    z = lambda: (rng.normal(size=n) + 1j * rng.normal(size=n)).astype(np.complex64)  # noqa: E731
    return formats.DwellRecord(1, 3, beam, 1e-6, 27.0, 60.98e9, z(), z())


def test_header_layout():
    buf = formats.encode_record(_record(n=10))
    assert formats.HEADER.size == 48
    assert len(buf) == 48 + 2 * 10 * 8
    assert buf[:4] == b"PSIQ"
    assert int.from_bytes(buf[4:8], "little") == 1
    assert int.from_bytes(buf[20:24], "little") == 10


def test_capture_bit_exact_round_trip(tmp_path):
    recs = [_record(seed=s, beam=q) for s, q in ((0, 1), (1, 2))]
    path = tmp_path / "sweep_00003.psiq"
    formats.write_capture(path, recs)
    first = path.read_bytes()
    back = formats.read_capture(path)
    formats.write_capture(path, back)
    assert path.read_bytes() == first
    for a, b in zip(recs, back):
        np.testing.assert_array_equal(a.reference, b.reference)
        np.testing.assert_array_equal(a.surveillance, b.surveillance)
        assert (a.band, a.sweep, a.beam, a.sample_period, a.beam_angle, a.carrier) == \
               (b.band, b.sweep, b.beam, b.sample_period, b.beam_angle, b.carrier)


@settings(max_examples=50, deadline=None)
@given(data=st.binary(min_size=16, max_size=512))
def test_float_samples_survive_byte_round_trip(data):
    usable = len(data) // 8 * 8
    samples = np.frombuffer(data[:usable], dtype="<c8")
    rec = formats.DwellRecord(2, 1, 1, 1e-7, 40.0, 60.985e9, samples, samples[::-1].copy())
    blob = formats.encode_record(rec)
    assert formats.encode_record(formats.decode_records(blob)[0]) == blob


def test_bad_containers_rejected():
    blob = formats.encode_record(_record())
    with pytest.raises(formats.FormatError):
        formats.decode_records(b"XXXX" + blob[4:])
    with pytest.raises(formats.FormatError):
        formats.decode_records(blob[:-8])
    with pytest.raises(formats.FormatError):
        formats.decode_records(blob[:30])
    bad_version = blob[:4] + (7).to_bytes(4, "little") + blob[8:]
    with pytest.raises(formats.FormatError):
        formats.decode_records(bad_version)


def test_map_dump_layout():
    bins = np.arange(-100, 101, 20.0)
    dmap = DopplerAngleMap(2, 5, np.abs(np.random.default_rng(0).normal(size=(4, len(bins)))), bins)
    recs = formats.map_records(dmap, (40, 27, 18, 10), 60.985e9)
    blob = b"".join(formats.encode_record(r) for r in recs)
    back = formats.decode_records(blob)
    assert [r.beam for r in back] == [1, 2, 3, 4]
    np.testing.assert_allclose(back[1].reference.real, bins)
    np.testing.assert_allclose(back[3].surveillance.real, dmap.magnitudes[3], rtol=1e-6)


def test_features_csv_round_trip(tmp_path):
    rows = [FeatureVector(1, 0.0), FeatureVector(2, 0.2, 27.0, 140.0, np.nan, 1234.5678901, np.nan),
            FeatureVector(3, 0.4, 18.25, -300.0, 20.0, 1e7, 2e7)]
    path = tmp_path / "f.csv"
    formats.write_features(path, rows)
    text = path.read_text()
    assert text.splitlines()[0] == ",".join(formats.FEATURE_COLUMNS)
    back = formats.read_features(path)
    for a, b in zip(rows, back):
        assert a.sweep == b.sweep
        np.testing.assert_allclose(b.as_row(), a.as_row(), rtol=1e-9, equal_nan=True)
        assert (a.aoa_valid, a.f1_valid, a.f2_valid) == (b.aoa_valid, b.f1_valid, b.f2_valid)
    formats.write_features(path, back)
    assert path.read_text() == text


def test_features_csv_missing_column():
    with pytest.raises(formats.FormatError):
        formats.parse_features("k,t_start_s\n1,0\n")


def test_truth_csv_round_trip(tmp_path):
    track = TruthTrack.straight([2.1, 2.3], [-0.3381, -0.725], 5, 0.2)
    formats.write_truth(tmp_path / "t.csv", track)
    back = formats.read_truth(tmp_path / "t.csv")
    np.testing.assert_array_equal(back.positions, track.positions)
    np.testing.assert_array_equal(back.velocities, track.velocities)
    assert back.sweep_period == pytest.approx(0.2)


def test_json_nan_becomes_null(tmp_path):
    doc = {"format": "x", "a": np.float64(np.nan), "b": [1.0, np.inf], "c": np.arange(3),
           "d": {"e": np.bool_(True)}, "f": (np.int64(4), None)}
    formats.dump_json(tmp_path / "d.json", doc)
    back = formats.load_json(tmp_path / "d.json", "x")
    assert back == {"format": "x", "a": None, "b": [1.0, None], "c": [0, 1, 2], "d": {"e": True},
                    "f": [4, None]}
    with pytest.raises(formats.FormatError):
        formats.load_json(tmp_path / "d.json", "y")


def test_atomic_write_leaves_no_temp_files(tmp_path):
    formats.atomic_write(tmp_path / "sub" / "a.txt", "hello")
    assert [p.name for p in (tmp_path / "sub").iterdir()] == ["a.txt"]
