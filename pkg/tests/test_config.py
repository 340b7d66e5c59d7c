import json

import numpy as np
import pytest

from passivetrack import config
from passivetrack.config import (ConfigError, PipelineConfig, TrackSpec, adoa_from_string, adoa_to_string,
                                 default_scenario_document, load_config, load_scenario, parse_scenario,
                                 save_config, save_scenario)
from passivetrack.geometry import AdoaPair, aoa
from passivetrack.scenarios import CROSSING_AFTER, crossing_track, scenario_a


def test_packaged_scenario_matches_desk_geometry():
    sc, spec = parse_scenario(default_scenario_document())
    np.testing.assert_allclose(sc.tx_positions[1], [1.8, -1.4], atol=1e-9)
    assert sc.d_true == 2.7 and sc.beam_grid == (40.0, 27.0, 18.0, 10.0)
    assert sc.sweep_period == pytest.approx(0.2) and sc.doppler_resolution == pytest.approx(20.0)
    assert spec.K == 15


def test_scenario_round_trip(tmp_path):
    sc, spec = parse_scenario(default_scenario_document())
    save_scenario(tmp_path / "s.json", sc, spec)
    back, back_spec = load_scenario(tmp_path / "s.json")
    assert back == sc and back_spec == spec


def test_scenario_rejects_unknown_fields_and_wrong_header(tmp_path):
    doc = default_scenario_document()
    doc["scenario"]["colour"] = "red"
    with pytest.raises(ConfigError, match="colour"):
        parse_scenario(doc)
    doc = default_scenario_document()
    doc["format"] = "passivetrack-config"
    with pytest.raises(ConfigError):
        parse_scenario(doc)
    (tmp_path / "bad.json").write_text("{not json")
    with pytest.raises(ConfigError):
        load_scenario(tmp_path / "bad.json")


def test_config_round_trip(tmp_path):
    sc, _ = parse_scenario(default_scenario_document())
    cfg = PipelineConfig.for_scenario(sc)
    save_config(tmp_path / "c.json", cfg)
    back = load_config(tmp_path / "c.json")
    assert back == cfg
    doc = json.loads((tmp_path / "c.json").read_text())
    assert doc["format"] == "passivetrack-config" and doc["version"] == 1


def test_config_partial_document_uses_defaults():
    cfg = PipelineConfig.from_document({"format": "passivetrack-config", "version": 1,
                                        "detector": {"gamma": 4.0}, "estimator": {"starts": 5}})
    assert cfg.detector.gamma == 4.0 and cfg.detector.train_half_width == 16
    assert cfg.estimator.starts == 5
    assert cfg.estimator.weights == PipelineConfig().estimator.weights


def test_config_rejects_bad_values():
    with pytest.raises(ConfigError):
        PipelineConfig.from_document({"format": "passivetrack-config", "version": 1,
                                      "detector": {"gamma": 0.5}})
    with pytest.raises(ConfigError):
        PipelineConfig.from_document({"format": "passivetrack-config", "version": 2})
    with pytest.raises(ConfigError):
        PipelineConfig.from_document({"format": "passivetrack-config", "version": 1, "extra": {}})


def test_adoa_string_round_trip():
    adoa = AdoaPair(37.8749836510982, 57.26477372789239, -1)
    assert adoa_from_string(adoa_to_string(adoa)) == adoa
    assert adoa_from_string(" 30, 40 ,1") == AdoaPair(30.0, 40.0, 1)
    for bad in ("30,40", "a,b,c"):
        with pytest.raises(ConfigError):
            adoa_from_string(bad)


def test_track_spec():
    track = TrackSpec((1.0, 2.0), (0.5, -0.5), 3).track(0.2)
    np.testing.assert_allclose(track.positions, [[1, 2], [1.1, 1.9], [1.2, 1.8]])
    with pytest.raises(ValueError):
        TrackSpec((1.0,), (0.0, 0.0), 3)


def test_crossing_track_hits_the_crossing_point():
    spec = crossing_track(1.6, 65.0, 0.4, 0.2, 15)
    end = np.array(spec.start) + np.array(spec.velocity) * (14 * 0.2 + 0.4)
    np.testing.assert_allclose(end, [1.6, 0.0], atol=1e-12)
    assert np.linalg.norm(spec.velocity) == pytest.approx(0.8)


def test_scenario_a_trials_deterministic_and_distinct():
    a, b, c = scenario_a(3), scenario_a(3), scenario_a(4)
    assert a == b and a != c
    assert a.scenario.noise_seed != c.scenario.noise_seed
    assert CROSSING_AFTER[0] <= a.crossing_after <= CROSSING_AFTER[1]
    # the beam grid has gaps, but most sweeps of the track are seen by some beam
    track = a.track.track(a.scenario.sweep_period)
    seen = sum(a.scenario.covering_beam(p) is not None for p in track.positions)
    assert seen >= track.K // 2
    assert all(0 < aoa(p) < 60 for p in track.positions)


def test_all_exported_names_exist():
    for name in config.__all__:
        assert hasattr(config, name)
