"""End-to-end orchestration: data -> KMeans labels -> (QAE + classifier) and
(MinMax + 4-2-4 autoencoder + KNN) -> report.

Every stage persists what it trains into the output directory; metrics are
always computed from the persisted artifacts, which is what lets `verify`
re-derive a saved report.
"""

import copy
import csv
import functools
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .classical import (
    MlpConfig,
    kmeans_cluster,
    knn_predict_many,
    minmax_apply,
    minmax_fit,
    minmax_inverse,
    mlp_forward,
    mlp_loss_and_grads,
    mlp_train,
)
from .classifier import (
    QuantumClassifier,
    _cross_entropy,
    _rhos_from,
    class_probabilities,
    evaluate_samples,
)
from .data import (
    FEATURES,
    SyntheticConfig,
    format_timestamp,
    generate_synthetic,
    load_csv,
    normalize_for_phase_encoding,
    split,
    write_csv,
)
from .exceptions import (
    ConfigError,
    DataFormatError,
    HybridQaeError,
    InvalidArgumentError,
    StageError,
    VerificationError,
)
from .persistence import (
    SCHEMA_VERSION,
    config_hash,
    dumps_document,
    file_sha256,
    load_document,
    load_model,
    save_model,
)
from .qae import (
    N_PARAMS,
    QuantumAutoencoder,
    TrainConfig,
    autoencoder_fidelity,
    qae_loss,
    reconstruct,
    reconstruction_error,
    train_qae,
)

DEFAULT_CONFIG = {
    "schema_version": SCHEMA_VERSION,
    "seed": 42,
    "data": {
        "source": "synthetic",
        "path": None,
        "synthetic": {
            "n_samples": 11560,
            "mean_a": [50.0, 55.0, 50.0, 45.0],
            "mean_b": [58.66, 46.34, 44.8, 51.93],
            # isotropic sensor noise plus a dominant spread along mean_b - mean_a
            "cov_a": [[9.3333, -5.3333, -3.2, 4.2667],
                      [-5.3333, 9.3333, 3.2, -4.2667],
                      [-3.2, 3.2, 5.92, -2.56],
                      [4.2667, -4.2667, -2.56, 7.4133]],
            "cov_b": [[9.3333, -5.3333, -3.2, 4.2667],
                      [-5.3333, 9.3333, 3.2, -4.2667],
                      [-3.2, 3.2, 5.92, -2.56],
                      [4.2667, -4.2667, -2.56, 7.4133]],
            "fraction": 0.5,
            "ar1": 0.0,
            "start_time": 1_600_000_000.0,
            "interval_s": 10.0,
        },
        "split_sizes": [10040, 520, 1000],
        "split_fractions": None,
    },
    "cluster": {"restarts": 30, "max_iter": 300},
    "qae": {"epochs": 100, "batch_size": 20, "learning_rate": 0.001, "init_scale": 0.1},
    "classifier": {"n_starts": 4, "maxiter": 400},
    "classical": {"epochs": 50, "batch_size": 32, "learning_rate": 0.01, "knn_k": 100},
    "evaluation": {"fidelity_shots": 10000, "fidelity_shot_samples": 50, "classifier_shots": 1024},
}

FILES = {
    "data": "data.csv",
    "labeled": "labeled.csv",
    "kmeans": "kmeans.json",
    "qae": "qae_model.json",
    "qae_loss": "qae_loss.csv",
    "qae_recon": "qae_reconstruction.csv",
    "fidelity": "fidelity.csv",
    "classifier": "classifier.json",
    "clf_exact": "classification_exact.csv",
    "clf_shots": "classification_shots.csv",
    "scaler": "scaler.json",
    "mlp": "mlp_model.json",
    "mlp_loss": "mlp_loss.csv",
    "baseline_recon": "baseline_reconstruction.csv",
    "baseline_clf": "baseline_classification.csv",
    "report": "report.json",
    "summary": "summary.txt",
}
MODEL_FILES = ("data", "labeled", "kmeans", "qae", "classifier", "scaler", "mlp")

PARAMETER_FOOTNOTE = (
    "classical count is 16 weights + 6 biases of the 4-2-4 network; "
    "counting weights only gives 16"
)


# -- configuration ------------------------------------------------------------

def _merge(base, override, path=""):
    out = copy.deepcopy(base)
    for key, value in override.items():
        where = f"{path}{key}"
        if key not in base:
            raise ConfigError(f"unknown config key {where!r}")
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"config key {where!r} must be an object")
            out[key] = _merge(base[key], value, where + ".")
        else:
            out[key] = value
    return out


def validate_config(config):
    if config.get("schema_version") != SCHEMA_VERSION:
        raise ConfigError(f"unsupported config schema_version {config.get('schema_version')!r}")
    if not isinstance(config["seed"], int) or config["seed"] < 0:
        raise ConfigError("seed must be a non-negative integer")
    data = config["data"]
    if data["source"] not in ("synthetic", "csv"):
        raise ConfigError("data.source must be 'synthetic' or 'csv'")
    if data["source"] == "csv" and not data["path"]:
        raise ConfigError("data.path is required when data.source is 'csv'")
    if (data["split_sizes"] is None) == (data["split_fractions"] is None):
        raise ConfigError("give exactly one of data.split_sizes and data.split_fractions")
    for section, keys in (("qae", ("epochs", "batch_size")), ("classical", ("epochs", "batch_size", "knn_k")),
                          ("classifier", ("n_starts", "maxiter")), ("cluster", ("restarts", "max_iter")),
                          ("evaluation", ("fidelity_shots", "fidelity_shot_samples", "classifier_shots"))):
        for key in keys:
            value = config[section][key]
            if not isinstance(value, int) or isinstance(value, bool) or value < 1:
                raise ConfigError(f"{section}.{key} must be a positive integer")
    for section in ("qae", "classical"):
        if not config[section]["learning_rate"] > 0:
            raise ConfigError(f"{section}.learning_rate must be positive")
    if data["source"] == "synthetic":
        try:
            _synthetic_config(config).validate()
        except InvalidArgumentError as exc:
            raise ConfigError(f"data.synthetic: {exc}") from exc
    return config


def load_config(path=None, overrides=None):
    """Defaults, then the JSON document at `path`, then `overrides` (a dict)."""
    config = copy.deepcopy(DEFAULT_CONFIG)
    if path is not None:
        try:
            doc = json.loads(Path(path).read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
        if not isinstance(doc, dict):
            raise ConfigError("config must be a JSON object")
        config = _merge(config, doc)
        if config["data"]["path"]:
            # relative data paths are taken relative to the config file
            config["data"]["path"] = str((Path(path).parent / config["data"]["path"]).resolve())
    if overrides:
        config = _merge(config, overrides)
    return validate_config(config)


def _synthetic_config(config):
    return SyntheticConfig(seed=config["seed"], **config["data"]["synthetic"])


# -- workspace ----------------------------------------------------------------

class Workspace:
    """An output directory plus the effective config, with cached loaders."""

    def __init__(self, config, out_dir):
        self.config = config
        self.out_dir = Path(out_dir)
        self.hash = config_hash(config)
        self._cache = {}

    def path(self, name):
        return self.out_dir / FILES[name]

    def header(self):
        return f"config_hash: {self.hash}"

    def _cached(self, key, load):
        if key not in self._cache:
            self._cache[key] = load()
        return self._cache[key]

    def dataset(self):
        return self._cached("data", lambda: load_csv(self.path("data")))

    def labeled(self):
        ds = self._cached("labeled", lambda: load_csv(self.path("labeled")))
        if ds.labels is None:
            raise DataFormatError(f"{self.path('labeled')} has no label column")
        return ds

    def splits(self):
        def make():
            d = self.config["data"]
            return split(self.labeled(), d["split_fractions"], self.config["seed"], d["split_sizes"])
        return self._cached("splits", make)

    def phases(self, part):
        index = ("train", "val", "test").index(part)
        return self._cached(f"phases-{part}",
                            lambda: normalize_for_phase_encoding(self.splits()[index].features))

    def model(self, name, kind):
        return self._cached(name, lambda: load_model(self.path(name), kind))

    def write_rows(self, name, header, rows):
        with open(self.path(name), "w", encoding="utf-8", newline="") as fh:
            fh.write(f"# {self.header()}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([repr(v) if isinstance(v, float) else v for v in row])

    def write_text(self, name, text):
        self.path(name).write_text(text, encoding="utf-8")


def stage(name):
    """Attach the stage name to any package or I/O error raised inside."""
    def wrap(fn):
        @functools.wraps(fn)
        def run(*args, **kwargs):
            try:
                return fn(*args, **kwargs)
            except StageError:
                raise
            except (HybridQaeError, OSError) as exc:
                raise StageError(name, exc) from exc
        return run
    return wrap


def _hidden_components(ws):
    if ws.config["data"]["source"] != "synthetic":
        return None
    return generate_synthetic(_synthetic_config(ws.config)).components


# -- evaluations (read persisted artifacts only) -------------------------------

def evaluate_data(ws):
    ds = ws.dataset()
    return {"n_samples": len(ds), "sha256": file_sha256(ws.path("data")),
            "source": ws.config["data"]["source"]}


def evaluate_clustering(ws):
    ds = ws.labeled()
    km = ws.model("kmeans", "kmeans")
    d = ((ds.features[:, None, :] - km.centroids[None]) ** 2).sum(axis=2)
    nearest = d.argmin(axis=1)
    if not np.array_equal(nearest, ds.labels):
        raise VerificationError("stored labels are not the nearest-centroid assignment")
    out = {
        "inertia": float(d[np.arange(len(ds)), nearest].sum()),
        "cluster_sizes": np.bincount(ds.labels, minlength=2).tolist(),
    }
    components = _hidden_components(ws)
    if components is not None:
        agree = float(np.mean(components == ds.labels))
        out["component_agreement"] = max(agree, 1.0 - agree)
    return out


def evaluate_qae_losses(ws):
    theta = ws.model("qae", "qae").theta
    return {part + "_loss": qae_loss(theta, ws.phases(part)) for part in ("train", "val", "test")}


def evaluate_reconstruction(ws):
    theta = ws.model("qae", "qae").theta
    test = ws.splits()[2]
    x = ws.phases("test")
    decoded = np.array([reconstruct(v, theta) for v in x])
    # relative error is scale free, so phases compare directly; the series is
    # written in sensor units using each sample's original norm
    per_sample = np.mean(np.abs(decoded - x) / np.abs(x), axis=1)
    sensor = decoded * np.linalg.norm(test.features, axis=1, keepdims=True) / np.pi
    rows = [
        [i, format_timestamp(test.timestamps[i]), *map(float, test.features[i]),
         *map(float, sensor[i]), float(per_sample[i])]
        for i in range(len(x))
    ]
    return {"reconstruction_error": reconstruction_error(x, decoded)}, rows


def _series_header():
    return (["index", "timestamp"] + [f"orig_{f}" for f in FEATURES]
            + [f"decoded_{f}" for f in FEATURES] + ["error"])


def evaluate_fidelity(ws, with_shots=True):
    theta = ws.model("qae", "qae").theta
    x = ws.phases("test")
    ev = ws.config["evaluation"]
    exact = np.array([autoencoder_fidelity(v, theta) for v in x])
    out = {"fidelity_mean": float(exact.mean()), "fidelity_std": float(exact.std())}
    shots = [None] * len(x)
    if with_shots:
        n = min(ev["fidelity_shot_samples"], len(x))
        seed = ws.config["seed"]
        for i in range(n):
            shots[i] = autoencoder_fidelity(x[i], theta, "shots", ev["fidelity_shots"], seed + i)
        sampled = np.array(shots[:n])
        out.update({
            "fidelity_shots": ev["fidelity_shots"],
            "fidelity_shot_samples": n,
            "fidelity_shots_mean": float(sampled.mean()),
            "fidelity_exact_mean_same_samples": float(exact[:n].mean()),
            "fidelity_max_abs_diff": float(np.max(np.abs(sampled - exact[:n]))),
        })
    rows = [[i, float(exact[i]), "" if shots[i] is None else float(shots[i])] for i in range(len(x))]
    return out, rows


def _latent_rhos(ws, part):
    qa = QuantumAutoencoder.from_model(ws.model("qae", "qae"))
    return _rhos_from(qa.transform(ws.phases(part)))


def evaluate_classifier_training(ws):
    model = ws.model("classifier", "qclassifier")
    rhos = _latent_rhos(ws, "train")
    y = ws.splits()[0].labels
    p0 = class_probabilities(rhos, model.alpha, model.gamma)
    return {"train_loss": _cross_entropy(p0, y),
            "train_accuracy": float(np.mean((p0 < 0.5).astype(int) == y))}


def evaluate_classification(ws, mode):
    model = ws.model("classifier", "qclassifier")
    rows = evaluate_samples(model, _latent_rhos(ws, "test"), ws.splits()[2].labels, mode,
                            ws.config["evaluation"]["classifier_shots"], ws.config["seed"])
    out = {"accuracy": float(np.mean([r["correct"] for r in rows]))}
    if mode == "shots":
        out["shots"] = ws.config["evaluation"]["classifier_shots"]
    return out, [[r["index"], r["p0"], r["predicted"], r["true"], r["correct"]] for r in rows]


def evaluate_baseline(ws):
    scaler = ws.model("scaler", "minmax")
    mlp = ws.model("mlp", "mlp_autoencoder")
    train, val, test = ws.splits()
    scaled = [minmax_apply(scaler, part.features) for part in (train, val, test)]
    latent_train = mlp_forward(mlp, scaled[0])[0]
    latent_test, out_test = mlp_forward(mlp, scaled[2])
    decoded = minmax_inverse(scaler, out_test)
    per_sample = np.mean(np.abs(decoded - test.features) / np.abs(test.features), axis=1)
    pred = knn_predict_many(latent_train, train.labels, latent_test, ws.config["classical"]["knn_k"])
    metrics = {
        "reconstruction_error": reconstruction_error(test.features, decoded),
        "accuracy": float(np.mean(pred == test.labels)),
        "train_loss": mlp_loss_and_grads(mlp, scaled[0])[0],
        "val_loss": mlp_loss_and_grads(mlp, scaled[1])[0],
        "knn_k": ws.config["classical"]["knn_k"],
    }
    recon_rows = [
        [i, format_timestamp(test.timestamps[i]), *map(float, test.features[i]),
         *map(float, decoded[i]), float(per_sample[i])]
        for i in range(len(test))
    ]
    clf_rows = [[i, int(pred[i]), int(test.labels[i]), int(pred[i] == test.labels[i])]
                for i in range(len(test))]
    return metrics, recon_rows, clf_rows


# -- stages -------------------------------------------------------------------

@stage("gen-data")
def run_gen_data(ws):
    ws.out_dir.mkdir(parents=True, exist_ok=True)
    if ws.config["data"]["source"] == "synthetic":
        ds = generate_synthetic(_synthetic_config(ws.config))
    else:
        ds = load_csv(ws.config["data"]["path"])
    write_csv(ds.with_labels(None), ws.path("data"), ws.header())
    ws._cache.clear()
    return evaluate_data(ws)


@stage("cluster")
def run_cluster(ws):
    ds = ws.dataset()
    c = ws.config["cluster"]
    km = kmeans_cluster(ds.features, 2, ws.config["seed"], c["max_iter"], c["restarts"])
    write_csv(ds.with_labels(km.labels), ws.path("labeled"), ws.header())
    save_model(km, ws.path("kmeans"), ws.hash)
    ws._cache.clear()
    return evaluate_clustering(ws)


@stage("train-qae")
def run_train_qae(ws):
    q = ws.config["qae"]
    cfg = TrainConfig(learning_rate=q["learning_rate"], batch_size=q["batch_size"],
                      epochs=q["epochs"], seed=ws.config["seed"], init_scale=q["init_scale"])
    model, history = train_qae(ws.phases("train"), ws.phases("val"), cfg)
    save_model(model, ws.path("qae"), ws.hash)
    ws.write_text("qae_loss", history.to_csv(ws.header()))
    ws._cache.pop("qae", None)
    return {**evaluate_qae_losses(ws), "best_epoch": model.training_meta["best_epoch"],
            "epochs": q["epochs"]}


@stage("eval-qae")
def run_eval_qae(ws):
    metrics, rows = evaluate_reconstruction(ws)
    ws.write_rows("qae_recon", _series_header(), rows)
    return metrics


@stage("fidelity")
def run_fidelity(ws, mode="shots"):
    metrics, rows = evaluate_fidelity(ws, with_shots=mode == "shots")
    ws.write_rows("fidelity", ["index", "exact", "shots"], rows)
    return metrics


@stage("train-clf")
def run_train_clf(ws):
    c = ws.config["classifier"]
    clf = QuantumClassifier(ws.config["seed"], c["n_starts"], c["maxiter"])
    bloch = QuantumAutoencoder.from_model(ws.model("qae", "qae")).transform(ws.phases("train"))
    clf.fit(bloch, ws.splits()[0].labels)
    save_model(clf.model_, ws.path("classifier"), ws.hash)
    ws._cache.pop("classifier", None)
    return evaluate_classifier_training(ws)


@stage("eval-clf")
def run_eval_clf(ws, mode="exact"):
    if mode not in ("exact", "shots"):
        raise ConfigError(f"unknown mode {mode!r}")
    metrics, rows = evaluate_classification(ws, mode)
    ws.write_rows("clf_exact" if mode == "exact" else "clf_shots",
                  ["index", "p0", "predicted", "true", "correct"], rows)
    return metrics


@stage("baseline")
def run_baseline(ws):
    c = ws.config["classical"]
    train, val, _ = ws.splits()
    scaler = minmax_fit(train.features)
    cfg = MlpConfig(c["epochs"], c["batch_size"], c["learning_rate"], ws.config["seed"])
    mlp, history = mlp_train(minmax_apply(scaler, train.features),
                             minmax_apply(scaler, val.features), cfg)
    save_model(scaler, ws.path("scaler"), ws.hash)
    save_model(mlp, ws.path("mlp"), ws.hash)
    ws.write_text("mlp_loss", history.to_csv(ws.header()))
    for key in ("scaler", "mlp"):
        ws._cache.pop(key, None)
    metrics, recon_rows, clf_rows = evaluate_baseline(ws)
    ws.write_rows("baseline_recon", _series_header(), recon_rows)
    ws.write_rows("baseline_clf", ["index", "predicted", "true", "correct"], clf_rows)
    return metrics


# -- report -------------------------------------------------------------------

@dataclass
class PipelineReport:
    body: dict
    timing: dict = field(default_factory=dict)

    def to_json(self):
        doc = dict(self.body)
        doc["timing"] = self.timing
        return dumps_document(doc)

    def summary(self):
        return format_summary(self.body)


def _assemble(ws, parts):
    q_loss = parts["train-qae"]
    return {
        "kind": "pipeline_report",
        "config_hash": ws.hash,
        "config": ws.config,
        "dataset": {**parts["gen-data"], "split_sizes": [len(p) for p in ws.splits()]},
        "artifacts": {FILES[k]: file_sha256(ws.path(k)) for k in MODEL_FILES},
        "clustering": parts["cluster"],
        "classical": {**parts["baseline"], "parameters": 22},
        "quantum_exact": {
            "reconstruction_error": parts["eval-qae"]["reconstruction_error"],
            "accuracy": parts["eval-clf-exact"]["accuracy"],
            "fidelity_mean": parts["fidelity"]["fidelity_mean"],
            "fidelity_std": parts["fidelity"]["fidelity_std"],
            "train_loss": q_loss["train_loss"],
            "val_loss": q_loss["val_loss"],
            "test_loss": q_loss["test_loss"],
            "classifier_train_loss": parts["train-clf"]["train_loss"],
            "classifier_train_accuracy": parts["train-clf"]["train_accuracy"],
            "parameters": N_PARAMS,
        },
        "quantum_shots": {
            "accuracy": parts["eval-clf-shots"]["accuracy"],
            "shots": parts["eval-clf-shots"]["shots"],
            **{k: v for k, v in parts["fidelity"].items() if k.startswith("fidelity_") and
               k not in ("fidelity_mean", "fidelity_std")},
        },
        "footnotes": [PARAMETER_FOOTNOTE],
    }


def _pct(v):
    return f"{100 * v:6.2f}%"


def format_summary(body):
    c, qe, qs = body["classical"], body["quantum_exact"], body["quantum_shots"]
    lines = [
        f"# config_hash: {body['config_hash']}",
        f"{'pipeline':<24}{'compression error':>20}{'classification accuracy':>26}{'parameters':>12}",
        f"{'classical (AE + KNN)':<24}{_pct(c['reconstruction_error']):>20}{_pct(c['accuracy']):>26}{'22*':>12}",
        f"{'quantum (exact)':<24}{_pct(qe['reconstruction_error']):>20}{_pct(qe['accuracy']):>26}{qe['parameters']:>12}",
        f"{'quantum (%d shots)' % qs['shots']:<24}{'-':>20}{_pct(qs['accuracy']):>26}{qe['parameters']:>12}",
        "",
        f"mean fidelity (exact, {body['dataset']['split_sizes'][2]} test samples): {qe['fidelity_mean']:.4f}",
    ]
    if "fidelity_shots_mean" in qs:
        lines.append(
            f"mean fidelity ({qs['fidelity_shots']} shots, first {qs['fidelity_shot_samples']} samples): "
            f"{qs['fidelity_shots_mean']:.4f} (exact on same samples {qs['fidelity_exact_mean_same_samples']:.4f})"
        )
    lines.append(f"QAE validation loss: {qe['val_loss']:.5f}")
    lines.append(f"* {body['footnotes'][0]}")
    return "\n".join(lines) + "\n"


def run_pipeline(config, out_dir):
    ws = Workspace(config, out_dir)
    parts, timing = {}, {}

    def timed(key, fn, *args):
        start = time.perf_counter()
        parts[key] = fn(ws, *args)
        timing[key] = time.perf_counter() - start

    timed("gen-data", run_gen_data)
    timed("cluster", run_cluster)
    timed("baseline", run_baseline)
    timed("train-qae", run_train_qae)
    timed("eval-qae", run_eval_qae)
    timed("fidelity", run_fidelity, "shots")
    timed("train-clf", run_train_clf)
    timed("eval-clf-exact", run_eval_clf, "exact")
    timed("eval-clf-shots", run_eval_clf, "shots")
    report = PipelineReport(stage("report")(_assemble)(ws, parts), timing)
    ws.write_text("report", report.to_json())
    ws.write_text("summary", report.summary())
    return report


def load_report(out_dir):
    return load_document(Path(out_dir) / FILES["report"])


# -- verification -------------------------------------------------------------

def _compare(expected, actual, tol, path, problems):
    if isinstance(expected, dict):
        for key, value in expected.items():
            if key not in actual:
                problems.append(f"{path}{key}: not recomputed")
            else:
                _compare(value, actual[key], tol, f"{path}{key}.", problems)
    elif isinstance(expected, float) or isinstance(actual, float):
        if not abs(float(expected) - float(actual)) <= tol:
            problems.append(f"{path[:-1]}: report {expected!r}, recomputed {actual!r}")
    elif expected != actual:
        problems.append(f"{path[:-1]}: report {expected!r}, recomputed {actual!r}")


@stage("verify")
def verify(out_dir, tol=1e-9):
    """Re-derive every metric of a saved report from its persisted artifacts.

    Returns the recomputed report body; raises VerificationError on mismatch.
    """
    report = load_report(out_dir)
    report.pop("timing", None)
    report.pop("schema_version", None)
    config = validate_config(report["config"])
    ws = Workspace(config, out_dir)
    if ws.hash != report["config_hash"]:
        raise VerificationError("config hash does not match the embedded config")
    problems = []
    for name, digest in report["artifacts"].items():
        if file_sha256(Path(out_dir) / name) != digest:
            problems.append(f"artifact {name} changed since the report was written")

    fidelity, _ = evaluate_fidelity(ws)
    baseline, _, _ = evaluate_baseline(ws)
    parts = {
        "gen-data": evaluate_data(ws),
        "cluster": evaluate_clustering(ws),
        "baseline": baseline,
        "train-qae": evaluate_qae_losses(ws),
        "eval-qae": evaluate_reconstruction(ws)[0],
        "fidelity": fidelity,
        "train-clf": evaluate_classifier_training(ws),
        "eval-clf-exact": evaluate_classification(ws, "exact")[0],
        "eval-clf-shots": evaluate_classification(ws, "shots")[0],
    }
    recomputed = _assemble(ws, parts)
    _compare(report, recomputed, tol, "", problems)
    if problems:
        raise VerificationError("; ".join(problems))
    return recomputed
