"""Two-qubit variational autoencoder that compresses a phase-encoded 4-vector
onto qubit 0 and drives the trash qubit 1 towards |0>.
"""

import csv
import io
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .exceptions import DegenerateDenominatorError, InvalidArgumentError
from .optim import Adam
from .quantum import (
    CNOT,
    DensityMatrix,
    apply_cnot,
    apply_ry,
    apply_unitary,
    attach_ground_qubit,
    fidelity,
    partial_trace,
    phase_encode,
    postselect,
    sample_shots,
)

N_PARAMS = 6
LATENT_QUBIT = 0
TRASH_QUBIT = 1
ANSATZ_TAG = (
    "ry(t0,q0) ry(t1,q1) cnot(q0->q1) ry(t2,q0) ry(t3,q1) cnot(q0->q1) "
    "ry(t4,q0) ry(t5,q1); ry(t)=exp(+i*sigma_y*t/2); q0=msb=latent, q1=trash"
)
NORMALIZATION_TAG = "pi*x/||x||_2"
_Z_TRASH = np.array([1.0, -1.0, 1.0, -1.0])  # Z on q1 over |00>,|01>,|10>,|11>
_H = np.array([[1, 1], [1, -1]]) / np.sqrt(2)


def _check_theta(theta):
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (N_PARAMS,):
        raise InvalidArgumentError(f"expected {N_PARAMS} encoder angles, got shape {theta.shape}")
    if not np.all(np.isfinite(theta)):
        raise InvalidArgumentError("encoder angles must be finite")
    return theta


def _check_batch(batch):
    batch = np.asarray(batch, dtype=float)
    if batch.ndim == 1:
        batch = batch[None, :]
    if batch.ndim != 2 or batch.shape[1] != 4:
        raise InvalidArgumentError(f"expected rows of 4 features, got shape {batch.shape}")
    if len(batch) == 0:
        raise InvalidArgumentError("batch is empty")
    if not np.all(np.isfinite(batch)):
        raise InvalidArgumentError("batch contains non-finite values")
    return batch


# -- circuits ----------------------------------------------------------------

def apply_encoder(state, theta):
    t = _check_theta(theta)
    for layer in range(3):
        state = apply_ry(state, 0, t[2 * layer])
        state = apply_ry(state, 1, t[2 * layer + 1])
        if layer < 2:
            state = apply_cnot(state, 0, 1)
    return state


def apply_decoder(state, theta):
    """Adjoint of apply_encoder: reversed gate order, negated angles."""
    t = _check_theta(theta)
    for layer in reversed(range(3)):
        if layer < 2:
            state = apply_cnot(state, 0, 1)
        state = apply_ry(state, 1, -t[2 * layer + 1])
        state = apply_ry(state, 0, -t[2 * layer])
    return state


def encoder_unitaries(thetas):
    """Stack of 4x4 encoder matrices for an (m, 6) array of angle sets."""
    thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
    c, s = np.cos(thetas / 2), np.sin(thetas / 2)
    r = np.empty(thetas.shape + (2, 2))
    r[..., 0, 0] = c
    r[..., 0, 1] = s
    r[..., 1, 0] = -s
    r[..., 1, 1] = c
    u = None
    for layer in range(3):
        a, b = r[:, 2 * layer], r[:, 2 * layer + 1]
        kron = np.einsum("mac,mbd->mabcd", a, b).reshape(-1, 4, 4)
        u = kron if u is None else kron @ (CNOT.real @ u)
    return u


def encode_batch(batch):
    """Phase-encoded amplitudes, one row per input vector."""
    return 0.5 * np.exp(1j * np.asarray(batch, dtype=float))


def phase_encoding_unitary(x):
    """A unitary P(x) with P(x)|00> equal to the phase-encoded state of x."""
    return np.diag(np.exp(1j * np.asarray(x, dtype=float))) @ np.kron(_H, _H)


def trash_expectations(thetas, batch):
    """<Z> on the trash qubit; shape (n_thetas, n_samples)."""
    u = encoder_unitaries(thetas)
    psi = encode_batch(batch)
    out = np.einsum("mij,bj->mbi", u, psi)
    return (np.abs(out) ** 2) @ _Z_TRASH


# -- loss and gradient -------------------------------------------------------

def qae_loss(theta, batch):
    """Mean of |1 - <Z_trash>| over the batch; <Z> <= 1 so no abs is needed."""
    theta = _check_theta(theta)
    batch = _check_batch(batch)
    return float(1.0 - trash_expectations(theta, batch)[0].mean())


def _shifted(theta):
    shifts = np.pi / 2 * np.eye(N_PARAMS)
    return np.vstack([theta[None, :], theta + shifts, theta - shifts])


def loss_and_gradient(theta, batch):
    theta = _check_theta(theta)
    batch = _check_batch(batch)
    losses = 1.0 - trash_expectations(_shifted(theta), batch).mean(axis=1)
    grad = (losses[1 : 1 + N_PARAMS] - losses[1 + N_PARAMS :]) / 2
    return float(losses[0]), grad


def parameter_shift_gradient(theta, batch):
    return loss_and_gradient(theta, batch)[1]


# -- training ----------------------------------------------------------------

@dataclass
class TrainConfig:
    learning_rate: float = 0.001
    batch_size: int = 20
    epochs: int = 100
    seed: int = 0
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    init_scale: float = 0.1

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise InvalidArgumentError("learning_rate must be positive")
        if self.batch_size < 1:
            raise InvalidArgumentError("batch_size must be at least 1")
        if self.epochs < 1:
            raise InvalidArgumentError("epochs must be at least 1")


@dataclass
class TrainingHistory:
    train_loss: list = field(default_factory=list)
    val_loss: list = field(default_factory=list)

    def __len__(self):
        return len(self.train_loss)

    def to_csv(self, header_comment=None):
        buf = io.StringIO()
        if header_comment:
            buf.write(f"# {header_comment}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["epoch", "train_loss", "val_loss"])
        for i, (tr, va) in enumerate(zip(self.train_loss, self.val_loss), start=1):
            w.writerow([i, repr(tr), repr(va)])
        return buf.getvalue()


@dataclass
class QaeModel:
    theta: np.ndarray
    training_meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.theta = _check_theta(self.theta)

    def to_dict(self):
        return {
            "kind": "qae",
            "theta": [float(t) for t in self.theta],
            "ansatz": ANSATZ_TAG,
            "normalization": NORMALIZATION_TAG,
            "training_meta": self.training_meta,
        }

    @classmethod
    def from_dict(cls, d):
        if d.get("kind") != "qae":
            raise InvalidArgumentError("document does not describe a QAE model")
        if d.get("ansatz") != ANSATZ_TAG:
            raise InvalidArgumentError("unsupported ansatz convention in saved model")
        return cls(np.array(d["theta"], dtype=float), dict(d.get("training_meta", {})))


def train_qae(train, val, config=None):
    """Mini-batch Adam with parameter-shift gradients.

    `train` and `val` are arrays of phase-normalized 4-vectors. Returns the
    parameters with the lowest validation loss seen at an epoch boundary.
    """
    config = config or TrainConfig()
    train = np.asarray(train, dtype=float)
    if train.ndim != 2 or len(train) == 0:
        raise InvalidArgumentError("training set is empty")
    train = _check_batch(train)
    val = _check_batch(val)

    rng = np.random.default_rng(config.seed)
    theta = rng.uniform(-config.init_scale, config.init_scale, N_PARAMS)
    opt = Adam(config.learning_rate, config.adam_beta1, config.adam_beta2, config.adam_eps)
    history = TrainingHistory()
    best = (np.inf, theta.copy(), 0)
    n = len(train)
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, config.batch_size):
            batch = train[order[start : start + config.batch_size]]
            loss, grad = loss_and_gradient(theta, batch)
            total += loss * len(batch)
            theta = opt.step(theta, grad)
        history.train_loss.append(total / n)
        val_loss = qae_loss(theta, val)
        history.val_loss.append(val_loss)
        if val_loss < best[0]:
            best = (val_loss, theta.copy(), epoch)

    meta = {
        "epochs_run": config.epochs,
        "best_epoch": best[2],
        "final_train_loss": history.train_loss[-1],
        "final_val_loss": history.val_loss[-1],
        "best_val_loss": best[0],
        "seed": config.seed,
        "learning_rate": config.learning_rate,
        "batch_size": config.batch_size,
        "normalization": NORMALIZATION_TAG,
    }
    return QaeModel(best[1], meta), history


# -- compression and diagnostics ----------------------------------------------

def compress(x, theta):
    """Encode x, run the encoder, post-select the trash qubit on |0>.

    Returns the normalized latent qubit state and the success probability.
    """
    encoded = apply_encoder(phase_encode(x), theta)
    return postselect(encoded, TRASH_QUBIT, 0)


def reduced_latent_state(x, theta):
    """Exact mixed state of the latent qubit (trash traced out, no post-selection)."""
    return partial_trace(apply_encoder(phase_encode(x), theta), LATENT_QUBIT)


def wrap_phase(z):
    """Map angles to (-pi, pi]."""
    z = np.asarray(z, dtype=float)
    return z - 2 * np.pi * np.ceil((z - np.pi) / (2 * np.pi))


def reconstruct(x, theta):
    """Decode the post-selected latent state and read back its phases.

    The unobservable global phase is fixed with the original x: of the four
    offsets that zero one residual, the one with the least total absolute
    residual is used.
    """
    x = np.asarray(x, dtype=float)
    latent, _ = compress(x, theta)
    decoded = apply_decoder(attach_ground_qubit(latent, TRASH_QUBIT), theta)
    phi = np.angle(decoded.amplitudes)
    candidates = x - phi
    costs = np.array([np.abs(wrap_phase(phi + c - x)).sum() for c in candidates])
    # with four residuals the L1 optimum can be a flat interval; take the
    # lowest-index candidate so the choice does not hinge on rounding
    best = int(np.flatnonzero(costs <= costs.min() + 1e-9)[0])
    return wrap_phase(phi + candidates[best])


def reconstruction_error(originals, decoded):
    """Average over rows of the mean relative absolute error per component."""
    orig = np.asarray(originals, dtype=float)
    dec = np.asarray(decoded, dtype=float)
    if orig.shape != dec.shape:
        raise InvalidArgumentError(f"shape mismatch {orig.shape} vs {dec.shape}")
    if orig.ndim == 1:
        orig, dec = orig[None, :], dec[None, :]
    if len(orig) == 0:
        raise InvalidArgumentError("no samples to compare")
    small = np.argwhere(np.abs(orig) < 1e-9)
    if len(small):
        raise DegenerateDenominatorError(tuple(int(i) for i in small[0]))
    return float(np.mean(np.abs(dec - orig) / np.abs(orig)))


def autoencoder_fidelity(x, theta, mode="exact", shots=10_000, seed=0):
    """Overlap between |psi_x> and its compress-then-decode reconstruction.

    mode="exact" evaluates Tr[rho_x sigma] with density matrices. mode="shots"
    simulates the compute-uncompute circuit: encode, measure the trash qubit
    and reset it to |0>, decode, undo the encoding and report the fraction of
    |00> outcomes.
    """
    theta = _check_theta(theta)
    psi = phase_encode(x)
    if mode == "exact":
        rho_x = psi.to_density_matrix()
        rho_a = partial_trace(apply_encoder(psi, theta), LATENT_QUBIT)
        sigma = apply_unitary(
            attach_ground_qubit(rho_a, TRASH_QUBIT), encoder_unitaries(theta)[0].conj().T
        )
        return fidelity(rho_x, sigma)
    if mode != "shots":
        raise InvalidArgumentError(f"unknown fidelity mode {mode!r}")
    if not isinstance(shots, (int, np.integer)) or shots < 1:
        raise InvalidArgumentError("shots must be a positive integer")

    encoded = apply_encoder(psi, theta)
    seeds = np.random.SeedSequence(seed).generate_state(3)
    collapse = sample_shots(encoded, [TRASH_QUBIT], shots, int(seeds[0]))
    p_dagger = phase_encoding_unitary(x).conj().T
    hits = 0
    for outcome in (0, 1):
        n_branch = collapse.counts.get(str(outcome), 0)
        if n_branch == 0:
            continue
        latent, _ = postselect(encoded, TRASH_QUBIT, outcome)
        # reset the measured trash qubit to |0>
        branch = apply_decoder(attach_ground_qubit(latent, TRASH_QUBIT), theta)
        branch = apply_unitary(branch, p_dagger)
        counts = sample_shots(branch, [0, 1], n_branch, int(seeds[1 + outcome]))
        hits += counts.counts.get("00", 0)
    return hits / shots


# -- estimator ---------------------------------------------------------------

class QuantumAutoencoder(TransformerMixin, BaseEstimator):
    """sklearn-style wrapper around train_qae.

    Expects phase-normalized rows (see PhaseNormalizer). `transform` returns
    the Bloch vector of the latent qubit's reduced density matrix, so the
    output can be fed to QuantumClassifier or any sklearn estimator.
    """

    def __init__(self, learning_rate=0.001, batch_size=20, epochs=100, seed=0,
                 adam_beta1=0.9, adam_beta2=0.999, adam_eps=1e-8, init_scale=0.1):
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.epochs = epochs
        self.seed = seed
        self.adam_beta1 = adam_beta1
        self.adam_beta2 = adam_beta2
        self.adam_eps = adam_eps
        self.init_scale = init_scale

    def _config(self):
        return TrainConfig(**{k: v for k, v in self.get_params().items()})

    def fit(self, X, y=None, X_val=None):
        X = check_array(X)
        X_val = X if X_val is None else check_array(X_val)
        self.model_, self.history_ = train_qae(X, X_val, self._config())
        self.theta_ = self.model_.theta
        self.n_features_in_ = X.shape[1]
        return self

    @classmethod
    def from_model(cls, model, **params):
        est = cls(**params)
        est.model_ = model
        est.theta_ = model.theta
        est.history_ = None
        est.n_features_in_ = 4
        return est

    def transform(self, X):
        check_is_fitted(self, "theta_")
        X = _check_batch(check_array(X))
        out = np.einsum("ij,bj->bi", encoder_unitaries(self.theta_)[0], encode_batch(X))
        m = out.reshape(-1, 2, 2)
        rho = np.einsum("nab,ncb->nac", m, m.conj())
        return np.column_stack(
            [2 * rho[:, 0, 1].real, -2 * rho[:, 0, 1].imag, (rho[:, 0, 0] - rho[:, 1, 1]).real]
        )

    def latent_density_matrices(self, X):
        return [DensityMatrix.from_bloch(r) for r in self.transform(X)]

    def loss(self, X):
        check_is_fitted(self, "theta_")
        return qae_loss(self.theta_, check_array(X))

    def score(self, X, y=None):
        return 1.0 - self.loss(X)

    def compress(self, X):
        check_is_fitted(self, "theta_")
        return [compress(x, self.theta_) for x in check_array(X)]

    def reconstruct(self, X):
        check_is_fitted(self, "theta_")
        return np.array([reconstruct(x, self.theta_) for x in check_array(X)])

    def fidelity(self, X, mode="exact", shots=10_000, seed=0):
        check_is_fitted(self, "theta_")
        return np.array([
            autoencoder_fidelity(x, self.theta_, mode, shots, seed + i)
            for i, x in enumerate(check_array(X))
        ])
