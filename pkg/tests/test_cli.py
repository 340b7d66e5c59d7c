import json

import numpy as np
import pytest

from passivetrack import cli, formats, pipeline
from passivetrack.config import default_scenario_document, load_scenario, parse_scenario

K_SHORT = 6


@pytest.fixture(scope="module")
def staged(tmp_path_factory):
    """Short scenario simulated and detected once through the command line."""
    root = tmp_path_factory.mktemp("cli")
    doc = default_scenario_document()
    doc["track"]["K"] = K_SHORT
    (root / "sc.json").write_text(json.dumps(doc))
    assert cli.main(["scenario", "--out", str(root / "default.json"), "--config", str(root / "cfg.json")]) == 0
    assert cli.main(["simulate", "--scenario", str(root / "sc.json"), "--out", str(root / "caps")]) == 0
    assert cli.main(["detect", "--in", str(root / "caps"), "--config", str(root / "cfg.json"),
                     "--out", str(root / "features.csv"), "--maps", str(root / "maps")]) == 0
    return root


def test_simulate_writes_one_container_per_sweep(staged):
    names = sorted(p.name for p in (staged / "caps").glob("sweep_*.psiq"))
    assert names == [formats.capture_name(k) for k in range(1, K_SHORT + 1)]
    recs = formats.read_capture(staged / "caps" / names[0])
    assert len(recs) == 8 and {(r.band, r.beam) for r in recs} == {(b, q) for b in (1, 2) for q in range(1, 5)}
    assert formats.read_truth(staged / "caps" / "truth.csv").K == K_SHORT


def test_detect_outputs(staged):
    features = formats.read_features(staged / "features.csv")
    assert [f.sweep for f in features] == list(range(1, K_SHORT + 1))
    assert sum(f.valid for f in features) >= K_SHORT - 2
    maps = sorted((staged / "maps").glob("map_b*_sweep_*.psiq"))
    assert len(maps) == 2 * K_SHORT


def test_detect_from_files_matches_in_memory_run(staged):
    sc, spec = load_scenario(staged / "sc.json")
    _, features, _ = pipeline.run(sc, spec.track(sc.sweep_period), pipeline.PipelineConfig.for_scenario(sc))
    from_files = formats.read_features(staged / "features.csv")
    for a, b in zip(features, from_files):
        np.testing.assert_allclose(b.as_row(), a.as_row(), rtol=1e-7, equal_nan=True)


def test_estimate_predict_eval_chain(staged, capsys):
    sc, _ = load_scenario(staged / "sc.json")
    adoa = f"{sc.adoa.phi_rx},{sc.adoa.phi_tx1},{sc.adoa.half_plane}"
    report = staged / "report.json"
    assert cli.main(["estimate", "--features", str(staged / "features.csv"), "--adoa", adoa,
                     "--config", str(staged / "cfg.json"), "--out", str(report)]) == 0
    doc = json.loads(report.read_text())
    assert doc["format"] == "passivetrack-report" and doc["version"] == 1
    assert 0.5 <= doc["estimate"]["d"] <= 10.0
    assert len(doc["sweeps"]) == doc["estimate"]["K"]

    assert cli.main(["predict", "--report", str(report), "--window", "2",
                     "--out", str(staged / "pred.json")]) == 0
    pred = json.loads((staged / "pred.json").read_text())["prediction"]
    assert pred["window"] == 2 and len(pred["links"]) == 2

    capsys.readouterr()
    assert cli.main(["eval", "--report", str(staged / "pred.json"), "--truth", str(staged / "caps" / "truth.csv"),
                     "--scenario", str(staged / "sc.json"), "--out", str(staged / "scored.json"),
                     "--plot", str(staged / "plots")]) == 0
    printed = json.loads(capsys.readouterr().out)
    scored = json.loads((staged / "scored.json").read_text())

    # independent recomputation of the headline metrics
    truth = formats.read_truth(staged / "caps" / "truth.csv")
    P = np.array([s["p"] for s in scored["sweeps"]])
    idx = [s["k"] - 1 for s in scored["sweeps"]]
    expected = np.linalg.norm(P - truth.positions[idx], axis=1).mean()
    assert printed["trajectory_mean_error_m"] == pytest.approx(expected, rel=1e-12)
    assert scored["metrics"]["tx1_error_m"] == pytest.approx(abs(scored["estimate"]["d"] - sc.d_true), rel=1e-12)
    tx2_err = np.linalg.norm(np.array(scored["estimate"]["tx2"]) - sc.tx_positions[1])
    assert scored["metrics"]["tx2_error_m"] == pytest.approx(tx2_err, rel=1e-12)
    assert (staged / "plots" / "trajectory.csv").exists() and (staged / "plots" / "features.csv").exists()


def test_estimate_is_deterministic(staged):
    sc, _ = load_scenario(staged / "sc.json")
    adoa = f"{sc.adoa.phi_rx},{sc.adoa.phi_tx1},{sc.adoa.half_plane}"
    outs = []
    for name in ("r1.json", "r2.json"):
        assert cli.main(["estimate", "--features", str(staged / "features.csv"), "--adoa", adoa,
                         "--out", str(staged / name)]) == 0
        outs.append((staged / name).read_bytes())
    assert outs[0] == outs[1]


def test_simulate_is_deterministic(staged, tmp_path):
    assert cli.main(["simulate", "--scenario", str(staged / "sc.json"), "--out", str(tmp_path)]) == 0
    for k in (1, K_SHORT):
        name = formats.capture_name(k)
        assert (tmp_path / name).read_bytes() == (staged / "caps" / name).read_bytes()


def test_zero_sweeps_gives_empty_outputs(tmp_path):
    doc = default_scenario_document()
    doc["track"]["K"] = 0
    (tmp_path / "sc.json").write_text(json.dumps(doc))
    assert cli.main(["run", "--scenario", str(tmp_path / "sc.json"), "--out", str(tmp_path / "out")]) == 0
    report = json.loads((tmp_path / "out" / "report.json").read_text())
    assert report["estimate"] is None and report["sweeps"] == []
    assert formats.read_features(tmp_path / "out" / "features.csv") == []


def test_errors_exit_with_status_one(tmp_path, capsys):
    assert cli.main(["detect", "--in", str(tmp_path / "missing"), "--out", str(tmp_path / "f.csv")]) == 1
    assert "[detect]" in capsys.readouterr().err
    (tmp_path / "bad.json").write_text("{")
    assert cli.main(["simulate", "--scenario", str(tmp_path / "bad.json"), "--out", str(tmp_path / "c")]) == 1
    assert "[simulate]" in capsys.readouterr().err
    (tmp_path / "f.csv").write_text("k,t_start_s\n1,0\n")
    assert cli.main(["estimate", "--features", str(tmp_path / "f.csv"), "--adoa", "30,40,1",
                     "--out", str(tmp_path / "r.json")]) == 1
    assert cli.main(["estimate", "--features", str(tmp_path / "f.csv"), "--adoa", "30,40",
                     "--out", str(tmp_path / "r.json")]) == 1
    assert "[estimate]" in capsys.readouterr().err


def test_scenario_command_writes_loadable_documents(staged):
    sc, spec = load_scenario(staged / "default.json")
    assert (sc, spec) == parse_scenario(default_scenario_document())
    assert cli.main(["scenario", "--out", str(staged / "t3.json"), "--trial", "3"]) == 0
    sc3, spec3 = load_scenario(staged / "t3.json")
    assert sc3.noise_seed == 1003 and spec3 != spec


def test_version_flag(capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main(["--version"])
    assert exc.value.code == 0
    assert "passivetrack" in capsys.readouterr().out
