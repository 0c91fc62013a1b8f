"""Versioned JSON documents for models, metrics and configs.

Floats are written with Python's shortest round-trip repr, so a saved model
reloads bit-for-bit.
"""

import hashlib
import json
from pathlib import Path

import numpy as np

from .classical import KMeansModel, MlpAutoencoder, ScalerParams
from .classifier import ClassifierModel
from .exceptions import DataFormatError
from .qae import QaeModel

SCHEMA_VERSION = 1

_LOADERS = {
    "qae": QaeModel.from_dict,
    "qclassifier": ClassifierModel.from_dict,
    "minmax": ScalerParams.from_dict,
    "mlp_autoencoder": MlpAutoencoder.from_dict,
    "kmeans": lambda d: KMeansModel(np.array(d["centroids"], dtype=float), None, d["inertia"]),
}


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    return obj


def canonical_json(obj):
    return json.dumps(_plain(obj), sort_keys=True, separators=(",", ":"), allow_nan=False)


def config_hash(config):
    return hashlib.sha256(canonical_json(config).encode()).hexdigest()[:16]


def file_sha256(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def dumps_document(doc, cfg_hash=None):
    body = {"schema_version": SCHEMA_VERSION}
    if cfg_hash is not None:
        body["config_hash"] = cfg_hash
    body.update(_plain(doc))
    return json.dumps(body, sort_keys=True, indent=2, allow_nan=False) + "\n"


def save_document(doc, path, cfg_hash=None):
    Path(path).write_text(dumps_document(doc, cfg_hash), encoding="utf-8")


def load_document(path):
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise DataFormatError(f"cannot read {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"{path} is not valid JSON: {exc.msg}", exc.lineno) from exc
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise DataFormatError(f"{path}: unsupported schema_version {doc.get('schema_version')!r}")
    return doc


def save_model(model, path, cfg_hash=None):
    save_document(model.to_dict(), path, cfg_hash)


def load_model(path, kind):
    doc = load_document(path)
    if doc.get("kind") != kind:
        raise DataFormatError(f"{path} holds a {doc.get('kind')!r} document, expected {kind!r}")
    return _LOADERS[kind](doc)
