"""Single-qubit variational classifier acting on the latent qubit.

The trainable gate is U(alpha, 0, gamma); class 0 ("Class A") is assigned
when the probability of reading |0> is at least one half.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .exceptions import DegenerateLabelsError, InvalidArgumentError
from .quantum import DensityMatrix, apply_unitary, sample_shots, u3_matrix

PROB_CLIP = 1e-7
OPTIMIZER = "nelder-mead"
GATE_TAG = "u3(alpha, beta=0, gamma) = [[c, -e^{i gamma} s], [e^{i beta} s, e^{i(beta+gamma)} c]]"


@dataclass(frozen=True)
class LabeledCompressedSample:
    compressed_state: DensityMatrix
    label: int

    def __post_init__(self):
        if self.compressed_state.n_qubits != 1:
            raise InvalidArgumentError("compressed state must be a single qubit")
        if self.label not in (0, 1):
            raise InvalidArgumentError(f"label must be 0 or 1, got {self.label!r}")


@dataclass
class ClassifierModel:
    alpha: float
    gamma: float
    beta: float = 0.0
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if not (np.isfinite(self.alpha) and np.isfinite(self.gamma)):
            raise InvalidArgumentError("classifier angles must be finite")
        if self.beta != 0.0:
            raise InvalidArgumentError("beta is fixed at 0")

    def to_dict(self):
        return {
            "kind": "qclassifier",
            "alpha": float(self.alpha),
            "gamma": float(self.gamma),
            "beta": 0.0,
            "gate": GATE_TAG,
            "optimizer": OPTIMIZER,
            "metadata": self.metadata,
        }

    @classmethod
    def from_dict(cls, d):
        if d.get("kind") != "qclassifier" or d.get("gate") != GATE_TAG:
            raise InvalidArgumentError("document does not describe a compatible classifier")
        return cls(float(d["alpha"]), float(d["gamma"]), metadata=dict(d.get("metadata", {})))


def _as_matrix(state):
    if isinstance(state, DensityMatrix):
        return state.matrix
    return DensityMatrix(state).matrix


def class_probability(state, alpha, gamma, beta=0.0):
    """p0 = <0| U rho U^dagger |0>; depends on U's first row only, so not on beta."""
    rho = _as_matrix(state)
    if rho.shape != (2, 2):
        raise InvalidArgumentError("classifier input must be a single-qubit state")
    row = u3_matrix(alpha, beta, gamma)[0]
    return float(np.clip(np.real(row @ rho @ row.conj()), 0.0, 1.0))


def _rhos_from(X):
    """Accept an (n, 3) Bloch array, an (n, 2, 2) stack or DensityMatrix objects."""
    if len(X) and isinstance(X[0], DensityMatrix):
        return np.array([s.matrix for s in X])
    X = np.asarray(X)
    if X.ndim == 3 and X.shape[1:] == (2, 2):
        return X.astype(complex)
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != 3:
        raise InvalidArgumentError("expected Bloch vectors of shape (n, 3)")
    x, y, z = X.T
    rho = np.empty((len(X), 2, 2), dtype=complex)
    rho[:, 0, 0] = (1 + z) / 2
    rho[:, 1, 1] = (1 - z) / 2
    rho[:, 0, 1] = (x - 1j * y) / 2
    rho[:, 1, 0] = (x + 1j * y) / 2
    return rho


def class_probabilities(rhos, alpha, gamma):
    row = u3_matrix(alpha, 0.0, gamma)[0]
    p0 = np.einsum("b,nbc,c->n", row, rhos, row.conj()).real
    return np.clip(p0, 0.0, 1.0)


def predict_label(p0):
    if not 0.0 <= p0 <= 1.0:
        raise InvalidArgumentError(f"probability {p0!r} outside [0, 1]")
    return 0 if p0 >= 0.5 else 1


def _cross_entropy(p0, y):
    y_hat = np.clip(1.0 - p0, PROB_CLIP, 1.0 - PROB_CLIP)
    return float(np.mean(-(1 - y) * np.log(1 - y_hat) - y * np.log(y_hat)))


def cross_entropy_loss(model, samples):
    """Binary cross entropy with y_hat = 1 - p0, the predicted chance of class 1."""
    if len(samples) == 0:
        raise InvalidArgumentError("no samples")
    rhos = np.array([s.compressed_state.matrix for s in samples])
    y = np.array([s.label for s in samples])
    return _cross_entropy(class_probabilities(rhos, model.alpha, model.gamma), y)


def _starting_simplexes(rng, n_starts, step=0.5):
    for _ in range(n_starts):
        x0 = np.array([rng.uniform(0, np.pi), rng.uniform(-np.pi, np.pi)])
        yield np.array([x0, x0 + [step, 0.0], x0 + [0.0, step]])


def fit_angles(rhos, y, seed=0, n_starts=4, maxiter=400):
    """Multi-start Nelder-Mead over (alpha, gamma); returns (alpha, gamma, loss, details)."""
    y = np.asarray(y, dtype=int)
    if len(y) == 0:
        raise InvalidArgumentError("no training samples")
    if len(np.unique(y)) < 2:
        raise DegenerateLabelsError("training set contains a single class")

    def objective(p):
        return _cross_entropy(class_probabilities(rhos, p[0], p[1]), y)

    rng = np.random.default_rng(seed)
    best, starts = None, []
    for simplex in _starting_simplexes(rng, n_starts):
        starts.append(min(objective(v) for v in simplex))
        res = minimize(
            objective, simplex[0], method="Nelder-Mead",
            options={"initial_simplex": simplex, "xatol": 1e-8, "fatol": 1e-10,
                     "maxiter": maxiter, "adaptive": False},
        )
        if best is None or res.fun < best.fun:
            best = res
    return float(best.x[0]), float(best.x[1]), float(best.fun), {"start_losses": starts}


def train_classifier(samples, seed=0, n_starts=4):
    if len(samples) == 0:
        raise InvalidArgumentError("no training samples")
    rhos = np.array([s.compressed_state.matrix for s in samples])
    y = np.array([s.label for s in samples])
    alpha, gamma, loss, _ = fit_angles(rhos, y, seed, n_starts)
    meta = {"seed": seed, "final_loss": loss, "n_train": len(samples),
            "optimizer": OPTIMIZER, "n_starts": n_starts}
    return ClassifierModel(alpha, gamma, metadata=meta)


def _shot_p0(rho, model, shots, seed):
    rotated = apply_unitary(DensityMatrix(rho), u3_matrix(model.alpha, 0.0, model.gamma))
    return sample_shots(rotated, [0], shots, seed).frequency("0")


def evaluate_samples(model, rhos, labels, mode="exact", shots=1024, seed=0):
    """Per-sample rows (index, p0, predicted, true, correct).

    In shots mode p0 is the observed |0> frequency; sample i uses seed + i.
    """
    rhos = np.asarray(rhos)
    labels = np.asarray(labels, dtype=int)
    if len(rhos) == 0:
        raise InvalidArgumentError("no samples to evaluate")
    if mode == "exact":
        p0 = class_probabilities(rhos, model.alpha, model.gamma)
    elif mode == "shots":
        p0 = np.array([_shot_p0(r, model, shots, seed + i) for i, r in enumerate(rhos)])
    else:
        raise InvalidArgumentError(f"unknown evaluation mode {mode!r}")
    pred = np.array([predict_label(p) for p in p0])
    return [
        {"index": i, "p0": float(p0[i]), "predicted": int(pred[i]),
         "true": int(labels[i]), "correct": int(pred[i] == labels[i])}
        for i in range(len(rhos))
    ]


def evaluate_accuracy(model, samples, mode="exact", shots=1024, seed=0):
    if len(samples) == 0:
        raise InvalidArgumentError("no samples to evaluate")
    rhos = np.array([s.compressed_state.matrix for s in samples])
    labels = [s.label for s in samples]
    rows = evaluate_samples(model, rhos, labels, mode, shots, seed)
    return sum(r["correct"] for r in rows) / len(rows)


class QuantumClassifier(ClassifierMixin, BaseEstimator):
    """Fit on latent Bloch vectors, e.g. the output of QuantumAutoencoder.transform."""

    def __init__(self, seed=0, n_starts=4, maxiter=400):
        self.seed = seed
        self.n_starts = n_starts
        self.maxiter = maxiter

    def fit(self, X, y):
        X, y = check_X_y(X, y)
        alpha, gamma, loss, _ = fit_angles(_rhos_from(X), y, self.seed, self.n_starts, self.maxiter)
        self.model_ = ClassifierModel(alpha, gamma, metadata={
            "seed": self.seed, "final_loss": loss, "n_train": len(y),
            "optimizer": OPTIMIZER, "n_starts": self.n_starts,
        })
        self.classes_ = np.array([0, 1])
        self.n_features_in_ = X.shape[1]
        return self

    @classmethod
    def from_model(cls, model, **params):
        est = cls(**params)
        est.model_ = model
        est.classes_ = np.array([0, 1])
        est.n_features_in_ = 3
        return est

    def predict_proba(self, X):
        check_is_fitted(self, "model_")
        p0 = class_probabilities(_rhos_from(check_array(X)), self.model_.alpha, self.model_.gamma)
        return np.column_stack([p0, 1 - p0])

    def predict(self, X):
        return np.array([predict_label(p) for p in self.predict_proba(X)[:, 0]])

    def score_shots(self, X, y, shots=1024, seed=0):
        check_is_fitted(self, "model_")
        rows = evaluate_samples(self.model_, _rhos_from(check_array(X)), y, "shots", shots, seed)
        return float(np.mean([r["correct"] for r in rows]))
