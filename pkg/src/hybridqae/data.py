"""Sensor data ingestion, synthetic stand-in data, normalization and splits."""

import csv
import json
import math
from dataclasses import asdict, dataclass
from datetime import datetime, timezone

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array

from .exceptions import DataFormatError, DegenerateInputError, InvalidArgumentError, SchemaError

FEATURES = ("FRC", "FT", "LIC", "PI")
HEADER = ("timestamp",) + FEATURES
LABEL_COLUMN = "label"
MIN_SHIFTED_VALUE = 0.1


@dataclass(frozen=True)
class Sample:
    features: tuple
    timestamp: float = None
    label: int = None


@dataclass
class Dataset:
    features: np.ndarray
    timestamps: np.ndarray = None  # seconds since epoch, NaN where missing
    labels: np.ndarray = None
    provenance: str = ""
    components: np.ndarray = None  # generating mixture component, synthetic data only

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=float).reshape(-1, len(FEATURES))
        if not np.all(np.isfinite(self.features)):
            raise InvalidArgumentError("features must be finite")
        n = len(self.features)
        if self.timestamps is None:
            self.timestamps = np.full(n, np.nan)
        self.timestamps = np.asarray(self.timestamps, dtype=float)
        if self.timestamps.shape != (n,):
            raise InvalidArgumentError("timestamps length does not match features")
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=int)
            if self.labels.shape != (n,) or not np.isin(self.labels, (0, 1)).all():
                raise InvalidArgumentError("labels must be a 0/1 vector matching features")

    def __len__(self):
        return len(self.features)

    def __iter__(self):
        for i in range(len(self)):
            ts = None
            if not np.isnan(self.timestamps[i]):
                ts = float(self.timestamps[i])
            label = None if self.labels is None else int(self.labels[i])
            yield Sample(tuple(float(v) for v in self.features[i]), ts, label)

    def subset(self, index):
        def take(a):
            return None if a is None else a[index]

        return Dataset(
            self.features[index], take(self.timestamps), take(self.labels),
            self.provenance, take(self.components),
        )

    def with_labels(self, labels):
        return Dataset(self.features, self.timestamps, labels, self.provenance, self.components)

    def equals(self, other):
        def same(a, b):
            if a is None or b is None:
                return a is None and b is None
            return np.array_equal(a, b, equal_nan=a.dtype.kind == "f")

        return (
            same(self.features, other.features)
            and same(self.timestamps, other.timestamps)
            and same(self.labels, other.labels)
        )


# -- CSV -----------------------------------------------------------------------

def _parse_timestamp(text, line):
    if text == "":
        return math.nan
    try:
        dt = datetime.fromisoformat(text.replace("Z", "+00:00"))
    except ValueError:
        raise DataFormatError(f"invalid ISO-8601 timestamp {text!r}", line) from None
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.timestamp()


def format_timestamp(ts):
    if ts is None or math.isnan(ts):
        return ""
    return datetime.fromtimestamp(ts, tz=timezone.utc).isoformat()


def _parse_float(text, column, line):
    try:
        value = float(text)
    except ValueError:
        raise DataFormatError(f"non-numeric value {text!r} in column {column}", line) from None
    if not math.isfinite(value):
        raise DataFormatError(f"non-finite value {text!r} in column {column}", line)
    return value


def load_csv(path):
    """Read `timestamp,FRC,FT,LIC,PI[,label]` rows; leading '#' lines are skipped."""
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise DataFormatError(f"cannot read {path}: {exc.strerror}") from exc

    lineno = 0
    while lineno < len(lines) and lines[lineno].startswith("#"):
        lineno += 1
    if lineno >= len(lines) or not lines[lineno].strip():
        raise DataFormatError("file is empty", lineno + 1)

    header = next(csv.reader([lines[lineno]]))
    header = [h.strip() for h in header]
    has_label = len(header) == len(HEADER) + 1 and header[-1] == LABEL_COLUMN
    expected = list(HEADER) + ([LABEL_COLUMN] if has_label else [])
    if header != expected:
        missing = [c for c in HEADER if c not in header]
        detail = f"missing column(s) {', '.join(missing)}" if missing else f"unexpected header {header}"
        raise SchemaError(detail, lineno + 1)

    feats, stamps, labels = [], [], []
    for offset, row in enumerate(csv.reader(lines[lineno + 1 :]), start=lineno + 2):
        if not row:
            continue
        if len(row) != len(expected):
            raise DataFormatError(f"expected {len(expected)} fields, got {len(row)}", offset)
        stamps.append(_parse_timestamp(row[0].strip(), offset))
        feats.append([_parse_float(v.strip(), c, offset) for v, c in zip(row[1:5], FEATURES)])
        if has_label:
            if row[5].strip() not in ("0", "1"):
                raise DataFormatError(f"label must be 0 or 1, got {row[5]!r}", offset)
            labels.append(int(row[5]))
    if not feats:
        raise DataFormatError("no data rows", lineno + 1)
    return Dataset(
        np.array(feats), np.array(stamps), np.array(labels) if has_label else None,
        provenance=f"csv:{path}",
    )


def write_csv(dataset, path, header_comment=None):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        w = csv.writer(fh, lineterminator="\n")
        cols = list(HEADER) + ([LABEL_COLUMN] if dataset.labels is not None else [])
        w.writerow(cols)
        for sample in dataset:
            row = [format_timestamp(sample.timestamp)] + [repr(v) for v in sample.features]
            if dataset.labels is not None:
                row.append(str(sample.label))
            w.writerow(row)


# -- synthetic data ------------------------------------------------------------

@dataclass
class SyntheticConfig:
    """Two-component Gaussian mixture in sensor units.

    `fraction` is the probability of drawing from component b. `ar1` adds
    per-feature AR(1) correlation to the noise while keeping its stationary
    covariance unchanged.
    """

    n_samples: int
    mean_a: list
    mean_b: list
    cov_a: list
    cov_b: list
    fraction: float = 0.5
    seed: int = 42
    ar1: float = 0.0
    start_time: float = 1_600_000_000.0
    interval_s: float = 10.0

    def validate(self):
        if self.n_samples < 1:
            raise InvalidArgumentError("n_samples must be positive")
        if not 0 < self.fraction < 1:
            raise InvalidArgumentError("fraction must lie in (0, 1)")
        if not -1 < self.ar1 < 1:
            raise InvalidArgumentError("ar1 must lie in (-1, 1)")
        for name in ("mean_a", "mean_b"):
            if np.shape(getattr(self, name)) != (4,):
                raise InvalidArgumentError(f"{name} must have 4 components")
        for name in ("cov_a", "cov_b"):
            c = np.asarray(getattr(self, name), dtype=float)
            if c.shape != (4, 4) or not np.allclose(c, c.T):
                raise InvalidArgumentError(f"{name} must be a symmetric 4x4 matrix")
            if np.linalg.eigvalsh(c).min() < -1e-10:
                raise InvalidArgumentError(f"{name} is not positive semidefinite")

    def to_dict(self):
        return asdict(self)


def _psd_sqrt(cov):
    w, v = np.linalg.eigh(np.asarray(cov, dtype=float))
    return v * np.sqrt(np.clip(w, 0, None))


def generate_synthetic(config):
    config.validate()
    n = config.n_samples
    root = np.random.SeedSequence(config.seed)
    member_seq, *feature_seqs = root.spawn(1 + len(FEATURES))
    component = (np.random.default_rng(member_seq).random(n) < config.fraction).astype(int)

    # one noise stream per feature
    z = np.column_stack([np.random.default_rng(s).standard_normal(n) for s in feature_seqs])
    if config.ar1:
        rho, scale = config.ar1, math.sqrt(1 - config.ar1**2)
        for t in range(1, n):
            z[t] = rho * z[t - 1] + scale * z[t]

    means = np.array([config.mean_a, config.mean_b], dtype=float)
    roots = [_psd_sqrt(config.cov_a), _psd_sqrt(config.cov_b)]
    x = means[component] + np.where(
        component[:, None] == 1, z @ roots[1].T, z @ roots[0].T
    )
    shift = np.clip(MIN_SHIFTED_VALUE - x.min(axis=0), 0, None)
    x = x + shift

    stamps = config.start_time + config.interval_s * np.arange(n)
    provenance = "synthetic:" + json.dumps(config.to_dict(), sort_keys=True)
    return Dataset(x, stamps, None, provenance, component)


# -- normalization -------------------------------------------------------------

def normalize_for_phase_encoding(x):
    """Rescale to Euclidean norm pi. Accepts one 4-vector or a stack of rows."""
    x = np.asarray(x, dtype=float)
    norms = np.linalg.norm(x, axis=-1, keepdims=True)
    if np.any(norms <= 1e-9):
        raise DegenerateInputError("cannot normalize a (near) zero vector")
    return np.pi * x / norms


class PhaseNormalizer(TransformerMixin, BaseEstimator):
    """Stateless transformer applying normalize_for_phase_encoding row-wise."""

    def fit(self, X, y=None):
        self.n_features_in_ = check_array(X).shape[1]
        return self

    def transform(self, X):
        return normalize_for_phase_encoding(check_array(X))


# -- splitting -----------------------------------------------------------------

def split_sizes(n, fractions):
    fractions = np.asarray(fractions, dtype=float)
    if fractions.ndim != 1 or np.any(fractions < 0) or np.any(fractions > 1):
        raise InvalidArgumentError("fractions must lie in [0, 1]")
    if abs(fractions.sum() - 1) > 1e-9:
        raise InvalidArgumentError(f"fractions sum to {fractions.sum()}, not 1")
    bounds = np.rint(np.cumsum(fractions) * n).astype(int)
    bounds[-1] = n
    return np.diff(np.concatenate([[0], bounds])).tolist()


def split(dataset, fractions=None, seed=0, sizes=None):
    """Seeded shuffle then contiguous (train, val, test) slices."""
    n = len(dataset)
    if sizes is None:
        if fractions is None:
            raise InvalidArgumentError("give either fractions or sizes")
        sizes = split_sizes(n, fractions)
    sizes = [int(s) for s in sizes]
    if len(sizes) != 3 or min(sizes) < 0 or sum(sizes) != n:
        raise InvalidArgumentError(f"split sizes {sizes} do not partition {n} rows")
    order = np.random.default_rng(seed).permutation(n)
    cuts = np.cumsum([0] + sizes)
    return tuple(dataset.subset(order[cuts[i] : cuts[i + 1]]) for i in range(3))
