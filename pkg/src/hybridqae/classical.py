"""Classical comparison pipeline: MinMax scaling, KMeans labelling, a 4-2-4
sigmoid autoencoder trained by backpropagation, and KNN on its latents.
"""

from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, ClusterMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .exceptions import DegenerateFeatureError, InvalidArgumentError
from .optim import Adam
from .qae import TrainingHistory

# -- MinMax scaling ------------------------------------------------------------


@dataclass
class ScalerParams:
    data_min: np.ndarray
    data_max: np.ndarray

    def to_dict(self):
        return {"kind": "minmax", "min": self.data_min.tolist(), "max": self.data_max.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(np.array(d["min"], dtype=float), np.array(d["max"], dtype=float))


def minmax_fit(X):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if len(X) == 0:
        raise InvalidArgumentError("cannot fit a scaler on empty data")
    lo, hi = X.min(axis=0), X.max(axis=0)
    flat = np.flatnonzero(hi <= lo)
    if len(flat):
        raise DegenerateFeatureError(f"feature(s) {flat.tolist()} are constant")
    return ScalerParams(lo, hi)


def minmax_apply(params, X):
    """Scale to [0, 1]; values outside the fitted range are clamped."""
    X = np.asarray(X, dtype=float)
    return np.clip((X - params.data_min) / (params.data_max - params.data_min), 0.0, 1.0)


def minmax_inverse(params, X):
    return np.asarray(X, dtype=float) * (params.data_max - params.data_min) + params.data_min


class ClampedMinMaxScaler(TransformerMixin, BaseEstimator):
    def fit(self, X, y=None):
        X = check_array(X)
        self.params_ = minmax_fit(X)
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "params_")
        return minmax_apply(self.params_, check_array(X))

    def inverse_transform(self, X):
        check_is_fitted(self, "params_")
        return minmax_inverse(self.params_, check_array(X))


# -- KMeans --------------------------------------------------------------------


@dataclass
class KMeansModel:
    centroids: np.ndarray
    labels: np.ndarray
    inertia: float
    n_iter: int = 0
    inertia_trace: list = field(default_factory=list)

    def to_dict(self):
        return {"kind": "kmeans", "centroids": self.centroids.tolist(), "inertia": self.inertia}


def _sq_dists(X, C):
    return ((X[:, None, :] - C[None, :, :]) ** 2).sum(axis=2)


def _lloyd(X, centroids, max_iter):
    labels = None
    trace = []
    for it in range(1, max_iter + 1):
        d = _sq_dists(X, centroids)
        new = d.argmin(axis=1)
        trace.append(float(d[np.arange(len(X)), new].sum()))
        if labels is not None and np.array_equal(new, labels):
            break
        labels = new
        for j in range(len(centroids)):
            members = labels == j
            if members.any():
                centroids[j] = X[members].mean(axis=0)
            else:
                # reseed an empty cluster at the point worst served by its centroid
                far = int(np.argmax(d[np.arange(len(X)), labels]))
                centroids[j] = X[far]
                labels[far] = j
    d = _sq_dists(X, centroids)
    labels = d.argmin(axis=1)
    inertia = float(d[np.arange(len(X)), labels].sum())
    return centroids, labels, inertia, it, trace


def _best_transfer(X, labels, k):
    """Index and target of the single-point move that lowers inertia most.

    Moving x from cluster a (size n_a, mean m_a) to b changes inertia by
    n_b/(n_b+1)|x-m_b|^2 - n_a/(n_a-1)|x-m_a|^2. Returns None when no move helps.
    """
    n = len(X)
    counts = np.bincount(labels, minlength=k)
    means = np.array([X[labels == j].mean(axis=0) for j in range(k)])
    d = _sq_dists(X, means)
    own = counts[labels]
    removal = np.where(own > 1, own / np.maximum(own - 1, 1) * d[np.arange(n), labels], np.inf)
    addition = counts / (counts + 1.0) * d
    addition[np.arange(n), labels] = np.inf
    delta = addition.min(axis=1) - removal
    delta[own <= 1] = np.inf
    i = int(np.argmin(delta))
    scale = max(1.0, float(d[np.arange(n), labels].sum()))
    if not delta[i] < -1e-12 * scale:
        return None
    return i, int(np.argmin(addition[i]))


def _lloyd_with_transfers(X, centroids, max_iter):
    """Lloyd to a fixpoint, then single-point transfers (Hartigan) while they
    lower inertia, re-running Lloyd after each. Lloyd fixpoints alone can be
    poor local optima on small sets; the combined fixpoint is stable under both.
    """
    k = len(centroids)
    centroids, labels, inertia, n_iter, trace = _lloyd(X, centroids, max_iter)
    while n_iter < max_iter:
        move = _best_transfer(X, labels, k)
        if move is None:
            break
        labels = labels.copy()
        labels[move[0]] = move[1]
        start = np.array([X[labels == j].mean(axis=0) for j in range(k)])
        trace.append(float(((X - start[labels]) ** 2).sum()))
        centroids, labels, inertia, it, more = _lloyd(X, start, max_iter - n_iter)
        n_iter += it
        trace.extend(more)
    return centroids, labels, inertia, n_iter, trace


def kmeans_cluster(X, k=2, seed=0, max_iter=300, restarts=30):
    """Lloyd's algorithm from random distinct data rows, best of `restarts`.

    Each restart is polished with single-point transfers (see
    _lloyd_with_transfers). Cluster ids are ordered by the lexicographic order
    of their centroids.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise InvalidArgumentError("expected a 2-D array")
    distinct = np.unique(X, axis=0)
    if len(distinct) < k:
        raise InvalidArgumentError(f"need at least {k} distinct rows, got {len(distinct)}")
    rng = np.random.default_rng(seed)
    best = None
    for _ in range(restarts):
        init = distinct[rng.choice(len(distinct), size=k, replace=False)].copy()
        result = _lloyd_with_transfers(X, init, max_iter)
        if best is None or result[2] < best[2]:
            best = result
    centroids, labels, inertia, n_iter, trace = best
    order = np.lexsort(centroids.T[::-1])
    remap = np.empty(k, dtype=int)
    remap[order] = np.arange(k)
    return KMeansModel(centroids[order], remap[labels], inertia, n_iter, trace)


class LloydKMeans(ClusterMixin, BaseEstimator):
    def __init__(self, n_clusters=2, seed=0, max_iter=300, restarts=30):
        self.n_clusters = n_clusters
        self.seed = seed
        self.max_iter = max_iter
        self.restarts = restarts

    def fit(self, X, y=None):
        X = check_array(X)
        self.model_ = kmeans_cluster(X, self.n_clusters, self.seed, self.max_iter, self.restarts)
        self.cluster_centers_ = self.model_.centroids
        self.labels_ = self.model_.labels
        self.inertia_ = self.model_.inertia
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "cluster_centers_")
        return _sq_dists(check_array(X), self.cluster_centers_).argmin(axis=1)


# -- 4-2-4 sigmoid autoencoder -------------------------------------------------


def sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


@dataclass
class MlpAutoencoder:
    W1: np.ndarray  # (2, 4)
    b1: np.ndarray  # (2,)
    W2: np.ndarray  # (4, 2)
    b2: np.ndarray  # (4,)
    activation: str = "sigmoid"

    def __post_init__(self):
        shapes = [(2, 4), (2,), (4, 2), (4,)]
        for arr, shape in zip(self.params(), shapes):
            if np.shape(arr) != shape:
                raise InvalidArgumentError("autoencoder must have a 4-2-4 layout")

    def params(self):
        return [self.W1, self.b1, self.W2, self.b2]

    @property
    def n_parameters(self):
        return sum(np.size(p) for p in self.params())

    @classmethod
    def zeros(cls):
        return cls(np.zeros((2, 4)), np.zeros(2), np.zeros((4, 2)), np.zeros(4))

    @classmethod
    def glorot(cls, rng):
        def layer(fan_out, fan_in):
            lim = np.sqrt(6.0 / (fan_in + fan_out))
            return rng.uniform(-lim, lim, (fan_out, fan_in))

        return cls(layer(2, 4), np.zeros(2), layer(4, 2), np.zeros(4))

    def to_dict(self):
        return {
            "kind": "mlp_autoencoder",
            "layout": [4, 2, 4],
            "activation": self.activation,
            "W1": self.W1.tolist(), "b1": self.b1.tolist(),
            "W2": self.W2.tolist(), "b2": self.b2.tolist(),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(*(np.array(d[k], dtype=float) for k in ("W1", "b1", "W2", "b2")))


def mlp_forward(model, X):
    """Returns (latent, output); accepts one row or a batch."""
    X = np.asarray(X, dtype=float)
    h = sigmoid(X @ model.W1.T + model.b1)
    return h, sigmoid(h @ model.W2.T + model.b2)


def mlp_loss_and_grads(model, X):
    """Mean squared reconstruction error and its gradients by backpropagation."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    h, y = mlp_forward(model, X)
    n = X.size
    loss = float(((y - X) ** 2).sum() / n)
    d_out = 2.0 * (y - X) / n * y * (1 - y)
    d_hid = (d_out @ model.W2) * h * (1 - h)
    grads = [d_hid.T @ X, d_hid.sum(axis=0), d_out.T @ h, d_out.sum(axis=0)]
    return loss, grads


@dataclass
class MlpConfig:
    epochs: int = 50
    batch_size: int = 32
    learning_rate: float = 0.01
    seed: int = 0


def mlp_train(X_train, X_val, config=None):
    config = config or MlpConfig()
    X_train = np.asarray(X_train, dtype=float)
    X_val = np.asarray(X_val, dtype=float)
    if X_train.ndim != 2 or len(X_train) == 0 or len(X_val) == 0:
        raise InvalidArgumentError("training and validation data must be non-empty")
    rng = np.random.default_rng(config.seed)
    model = MlpAutoencoder.glorot(rng)
    opt = Adam(config.learning_rate)
    history = TrainingHistory()
    n = len(X_train)
    for _ in range(config.epochs):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, config.batch_size):
            batch = X_train[order[start : start + config.batch_size]]
            loss, grads = mlp_loss_and_grads(model, batch)
            total += loss * len(batch)
            model = MlpAutoencoder(*opt.step(model.params(), grads))
        history.train_loss.append(total / n)
        history.val_loss.append(mlp_loss_and_grads(model, X_val)[0])
    return model, history


class SigmoidAutoencoder(TransformerMixin, BaseEstimator):
    """transform -> 2-d latent activations; inverse_transform -> decoder output."""

    def __init__(self, epochs=50, batch_size=32, learning_rate=0.01, seed=0):
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.seed = seed

    def fit(self, X, y=None, X_val=None):
        X = check_array(X)
        X_val = X if X_val is None else check_array(X_val)
        cfg = MlpConfig(self.epochs, self.batch_size, self.learning_rate, self.seed)
        self.model_, self.history_ = mlp_train(X, X_val, cfg)
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "model_")
        return mlp_forward(self.model_, check_array(X))[0]

    def inverse_transform(self, Z):
        check_is_fitted(self, "model_")
        m = self.model_
        return sigmoid(check_array(Z) @ m.W2.T + m.b2)

    def reconstruct(self, X):
        check_is_fitted(self, "model_")
        return mlp_forward(self.model_, check_array(X))[1]


# -- k nearest neighbours ------------------------------------------------------


def knn_predict_many(train_latents, train_labels, queries, k, chunk=512):
    train = np.asarray(train_latents, dtype=float)
    labels = np.asarray(train_labels, dtype=int)
    queries = np.atleast_2d(np.asarray(queries, dtype=float))
    if not 1 <= k <= len(train):
        raise InvalidArgumentError(f"k={k} must lie in [1, {len(train)}]")
    out = np.empty(len(queries), dtype=int)
    for start in range(0, len(queries), chunk):
        d = _sq_dists(queries[start : start + chunk], train)
        # stable sort: equal distances keep the lower training index first
        nearest = np.argsort(d, axis=1, kind="stable")[:, :k]
        ones = labels[nearest].sum(axis=1)
        out[start : start + chunk] = (2 * ones > k).astype(int)
    return out


def knn_predict(train_latents, train_labels, query_latent, k):
    """Majority label of the k nearest training points; a tied vote gives 0."""
    return int(knn_predict_many(train_latents, train_labels, [query_latent], k)[0])


class MajorityKNN(ClassifierMixin, BaseEstimator):
    def __init__(self, k=100):
        self.k = k

    def fit(self, X, y):
        X, y = check_X_y(X, y)
        self.X_ = X
        self.y_ = y.astype(int)
        self.classes_ = np.array([0, 1])
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "X_")
        return knn_predict_many(self.X_, self.y_, check_array(X), self.k)
