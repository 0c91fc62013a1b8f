import json
from pathlib import Path

import numpy as np
import pytest

from hybridqae import cli, pipeline
from hybridqae.classical import MlpAutoencoder, ScalerParams
from hybridqae.classifier import ClassifierModel
from hybridqae.exceptions import ConfigError, StageError, VerificationError
from hybridqae.persistence import config_hash, load_model, save_model
from hybridqae.qae import QaeModel

REFERENCE = Path(__file__).resolve().parents[1] / "configs" / "reference.json"

SMALL = {
    "seed": 3,
    "data": {"synthetic": {"n_samples": 300}, "split_sizes": [200, 50, 50]},
    "qae": {"epochs": 2},
    "classical": {"epochs": 2, "knn_k": 5},
    "classifier": {"n_starts": 2, "maxiter": 60},
    "evaluation": {"fidelity_shots": 200, "fidelity_shot_samples": 3, "classifier_shots": 64},
}


@pytest.fixture
def small_config(tmp_path):
    p = tmp_path / "small.json"
    p.write_text(json.dumps(SMALL))
    return p


@pytest.fixture(scope="module")
def small_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    report = pipeline.run_pipeline(pipeline.load_config(overrides=SMALL), out)
    return out, report


# -- config -------------------------------------------------------------------

def test_reference_file_matches_defaults():
    assert pipeline.load_config(REFERENCE) == pipeline.DEFAULT_CONFIG


def test_config_rejects_unknown_keys_and_bad_values():
    with pytest.raises(ConfigError, match="qae.epoch"):
        pipeline.load_config(overrides={"qae": {"epoch": 3}})
    with pytest.raises(ConfigError):
        pipeline.load_config(overrides={"qae": {"epochs": 0}})
    with pytest.raises(ConfigError):
        pipeline.load_config(overrides={"data": {"split_fractions": [0.5, 0.5, 0.0]}})
    with pytest.raises(ConfigError):
        pipeline.load_config(overrides={"data": {"synthetic": {"fraction": 1.5}}})


def test_config_hash_tracks_content():
    a = pipeline.load_config()
    b = pipeline.load_config(overrides={"seed": 43})
    assert config_hash(a) == config_hash(pipeline.load_config())
    assert config_hash(a) != config_hash(b)


# -- persistence --------------------------------------------------------------

def test_models_round_trip_bit_exact(tmp_path):
    rng = np.random.default_rng(0)
    models = {
        "qae": QaeModel(rng.normal(size=6), {"seed": 1}),
        "qclassifier": ClassifierModel(float(rng.normal()), float(rng.normal())),
        "minmax": ScalerParams(rng.normal(size=4), rng.normal(size=4) + 5),
        "mlp_autoencoder": MlpAutoencoder.glorot(rng),
    }
    for kind, model in models.items():
        path = tmp_path / f"{kind}.json"
        save_model(model, path, "abc")
        back = load_model(path, kind)
        assert json.dumps(back.to_dict()) == json.dumps(model.to_dict())
        assert json.loads(path.read_text())["config_hash"] == "abc"


# -- pipeline -----------------------------------------------------------------

def test_report_fields_populated(small_run):
    out, report = small_run
    body = report.body
    assert body["classical"]["parameters"] == 22
    assert body["quantum_exact"]["parameters"] == 6
    for section in ("classical", "quantum_exact", "quantum_shots"):
        for value in body[section].values():
            assert value is not None
    assert body["dataset"]["split_sizes"] == [200, 50, 50]
    assert "16 weights + 6 biases" in body["footnotes"][0]
    assert (out / "summary.txt").read_text().startswith(f"# config_hash: {body['config_hash']}")


def test_every_output_carries_config_hash(small_run):
    out, report = small_run
    h = report.body["config_hash"]
    for path in out.iterdir():
        if path.suffix in (".csv", ".txt"):
            assert path.read_text().startswith(f"# config_hash: {h}\n"), path.name
        elif path.name != "report.json":
            assert json.loads(path.read_text())["config_hash"] == h, path.name


def test_figure_series_shapes(small_run):
    out, _ = small_run
    recon = np.genfromtxt(out / "qae_reconstruction.csv", delimiter=",", skip_header=2)
    assert recon.shape == (50, 11)
    loss = np.genfromtxt(out / "qae_loss.csv", delimiter=",", skip_header=2)
    assert loss.shape == (2, 3)
    clf = np.genfromtxt(out / "classification_shots.csv", delimiter=",", skip_header=2)
    assert set(np.unique(clf[:, 4])) <= {0, 1}


def test_rerun_is_identical_and_verifies(small_run, tmp_path):
    out, report = small_run
    again = pipeline.run_pipeline(pipeline.load_config(overrides=SMALL), tmp_path)
    assert again.body == report.body
    pipeline.verify(out)
    pipeline.verify(tmp_path)


def test_verify_detects_tampering(small_run, tmp_path):
    out, _ = small_run
    for f in out.iterdir():
        (tmp_path / f.name).write_bytes(f.read_bytes())
    doc = json.loads((tmp_path / "report.json").read_text())
    doc["quantum_exact"]["accuracy"] += 1e-6
    (tmp_path / "report.json").write_text(json.dumps(doc))
    with pytest.raises(StageError) as info:
        pipeline.verify(tmp_path)
    assert isinstance(info.value.cause, VerificationError)
    assert "quantum_exact.accuracy" in str(info.value)


def test_verify_detects_changed_model(small_run, tmp_path):
    out, _ = small_run
    for f in out.iterdir():
        (tmp_path / f.name).write_bytes(f.read_bytes())
    model = load_model(tmp_path / "qae_model.json", "qae")
    model.theta[0] += 0.1
    save_model(model, tmp_path / "qae_model.json", json.loads((out / "report.json").read_text())["config_hash"])
    with pytest.raises(StageError, match="qae_model.json"):
        pipeline.verify(tmp_path)


# -- CLI ----------------------------------------------------------------------

def test_cli_stage_by_stage(small_config, tmp_path, capsys):
    args = ["--config", str(small_config), "--out-dir", str(tmp_path)]
    for cmd in ("gen-data", "cluster", "baseline", "train-qae", "eval-qae", "train-clf"):
        assert cli.main([cmd, *args]) == 0, cmd
    assert cli.main(["fidelity", *args, "--mode", "exact"]) == 0
    capsys.readouterr()
    assert cli.main(["eval-clf", *args, "--mode", "shots", "--shots", "32"]) == 0
    metrics = json.loads(capsys.readouterr().out)
    assert metrics["shots"] == 32
    assert (tmp_path / "classification_shots.csv").exists()


def test_cli_run_all_and_verify(small_config, tmp_path, capsys):
    args = ["--config", str(small_config), "--out-dir", str(tmp_path)]
    assert cli.main(["run-all", *args]) == 0
    assert "quantum (exact)" in capsys.readouterr().out
    assert cli.main(["verify", "--out-dir", str(tmp_path)]) == 0


def test_cli_missing_data_file(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"data": {"source": "csv", "path": "missing.csv"}}))
    code = cli.main(["gen-data", "--config", str(cfg), "--out-dir", str(tmp_path / "o")])
    assert code == cli.EXIT_DATA
    assert "[gen-data]" in capsys.readouterr().err


def test_cli_missing_upstream_artifact(tmp_path, capsys):
    assert cli.main(["train-qae", "--out-dir", str(tmp_path)]) == cli.EXIT_DATA
    assert "[train-qae]" in capsys.readouterr().err


def test_cli_config_errors(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert cli.main(["gen-data", "--config", str(bad), "--out-dir", str(tmp_path)]) == cli.EXIT_CONFIG
    assert cli.main(["gen-data", "--config", str(tmp_path / "absent.json")]) == cli.EXIT_CONFIG
    assert cli.main(["gen-data", "--seed", "-1", "--out-dir", str(tmp_path)]) == cli.EXIT_CONFIG


def test_cli_numerical_error_exit_code(small_run, tmp_path):
    out, _ = small_run
    for f in out.iterdir():
        (tmp_path / f.name).write_bytes(f.read_bytes())
    doc = json.loads((tmp_path / "report.json").read_text())
    doc["classical"]["accuracy"] = -1.0
    (tmp_path / "report.json").write_text(json.dumps(doc))
    assert cli.main(["verify", "--out-dir", str(tmp_path)]) == cli.EXIT_NUMERICAL


def test_exit_code_mapping():
    from hybridqae.exceptions import DataFormatError, PostSelectionError
    assert cli.exit_code_for(StageError("x", PostSelectionError("p=0"))) == cli.EXIT_NUMERICAL
    assert cli.exit_code_for(StageError("x", DataFormatError("bad", 3))) == cli.EXIT_DATA
    assert cli.exit_code_for(ConfigError("bad")) == cli.EXIT_CONFIG


def test_csv_source(tmp_path, small_run):
    out, _ = small_run
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({**SMALL, "data": {"source": "csv", "path": str(out / "data.csv"),
                                                "split_sizes": [200, 50, 50]}}))
    assert cli.main(["gen-data", "--config", str(cfg), "--out-dir", str(tmp_path / "o")]) == 0
    assert (tmp_path / "o" / "data.csv").read_text().splitlines()[1:] == \
        (out / "data.csv").read_text().splitlines()[1:]
