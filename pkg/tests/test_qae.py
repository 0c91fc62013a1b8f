import numpy as np
import pytest

from hybridqae.exceptions import DegenerateDenominatorError, InvalidArgumentError
from hybridqae.qae import (
    ANSATZ_TAG,
    QaeModel,
    QuantumAutoencoder,
    TrainConfig,
    apply_decoder,
    apply_encoder,
    autoencoder_fidelity,
    compress,
    encoder_unitaries,
    parameter_shift_gradient,
    qae_loss,
    reconstruct,
    reconstruction_error,
    train_qae,
    wrap_phase,
)
from hybridqae.quantum import StateVector, expectation_z, phase_encode

S2 = 1 / np.sqrt(2)
PP = StateVector(np.full(4, 0.5))
ZEROS = np.zeros(6)
DISENTANGLE = np.array([0, 0, 0, 0, 0, np.pi / 2])


def random_state(rng):
    v = rng.normal(size=4) + 1j * rng.normal(size=4)
    return StateVector(v / np.linalg.norm(v))


def central_difference(f, theta, h=1e-4):
    g = np.zeros_like(theta)
    for k in range(len(theta)):
        e = np.zeros_like(theta)
        e[k] = h
        g[k] = (f(theta + e) - f(theta - e)) / (2 * h)
    return g


# -- encoder / decoder --------------------------------------------------------

def test_encoder_zero_angles_is_identity():
    psi = random_state(np.random.default_rng(0))
    assert apply_encoder(psi, ZEROS).allclose(psi)


def test_encoder_rotates_trash_to_zero():
    # |++> is fixed by both CNOTs; the final Ry(pi/2) on q1 sends |+> to |0>
    out = apply_encoder(PP, DISENTANGLE)
    assert out.allclose([S2, 0, S2, 0])


def test_encoder_preserves_norm():
    rng = np.random.default_rng(1)
    for _ in range(100):
        out = apply_encoder(random_state(rng), rng.uniform(-np.pi, np.pi, 6))
        assert abs(np.linalg.norm(out.amplitudes) - 1) < 1e-10


def test_encoder_rejects_wrong_parameter_count():
    with pytest.raises(InvalidArgumentError):
        apply_encoder(PP, np.zeros(5))
    with pytest.raises(InvalidArgumentError):
        apply_decoder(PP, np.zeros(7))


def test_decoder_inverts_encoder():
    rng = np.random.default_rng(2)
    for _ in range(100):
        psi = random_state(rng)
        theta = rng.uniform(-np.pi, np.pi, 6)
        assert apply_decoder(apply_encoder(psi, theta), theta).allclose(psi)
        assert apply_encoder(apply_decoder(psi, theta), theta).allclose(psi)


def test_decoder_zero_angles_is_identity():
    psi = random_state(np.random.default_rng(3))
    assert apply_decoder(psi, ZEROS).allclose(psi)


def test_vectorized_unitary_matches_gate_path():
    rng = np.random.default_rng(4)
    thetas = rng.uniform(-np.pi, np.pi, (20, 6))
    us = encoder_unitaries(thetas)
    for theta, u in zip(thetas, us):
        psi = random_state(rng)
        assert np.allclose(u @ psi.amplitudes, apply_encoder(psi, theta).amplitudes, atol=1e-12)


# -- loss ---------------------------------------------------------------------

def test_loss_examples():
    assert qae_loss(ZEROS, [[0, 0, 0, 0]]) == pytest.approx(1.0, abs=1e-12)
    assert qae_loss(DISENTANGLE, [[0, 0, 0, 0]]) == pytest.approx(0.0, abs=1e-12)


def test_loss_matches_gate_path():
    rng = np.random.default_rng(5)
    batch = rng.uniform(0, np.pi, (7, 4))
    theta = rng.uniform(-np.pi, np.pi, 6)
    oracle = np.mean([abs(1 - expectation_z(apply_encoder(phase_encode(x), theta), 1)) for x in batch])
    assert qae_loss(theta, batch) == pytest.approx(oracle, abs=1e-12)


def test_loss_non_negative_and_bounded():
    rng = np.random.default_rng(6)
    for _ in range(200):
        val = qae_loss(rng.uniform(-np.pi, np.pi, 6), rng.uniform(-5, 5, (3, 4)))
        assert -1e-12 <= val <= 2 + 1e-12


def test_loss_invariant_under_global_phase():
    rng = np.random.default_rng(7)
    for _ in range(50):
        theta = rng.uniform(-np.pi, np.pi, 6)
        batch = rng.uniform(0, np.pi, (5, 4))
        shift = rng.uniform(-3, 3)
        assert abs(qae_loss(theta, batch) - qae_loss(theta, batch + shift)) < 1e-10


def test_loss_rejects_empty_batch():
    with pytest.raises(InvalidArgumentError):
        qae_loss(ZEROS, np.zeros((0, 4)))


# -- gradients ----------------------------------------------------------------

def test_gradient_theta5_at_zero():
    # shifted losses: theta5=+pi/2 gives <Z>=+1 (loss 0), -pi/2 gives <Z>=-1 (loss 2)
    assert qae_loss(DISENTANGLE, [[0, 0, 0, 0]]) == pytest.approx(0.0)
    assert qae_loss(-DISENTANGLE, [[0, 0, 0, 0]]) == pytest.approx(2.0)
    g = parameter_shift_gradient(ZEROS, [[0, 0, 0, 0]])
    assert g[5] == pytest.approx(-1.0, abs=1e-12)


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(8)
    for _ in range(25):
        theta = rng.uniform(-np.pi, np.pi, 6)
        batch = rng.uniform(0, np.pi, (rng.integers(1, 10), 4))
        fd = central_difference(lambda t: qae_loss(t, batch), theta)
        assert np.max(np.abs(parameter_shift_gradient(theta, batch) - fd)) < 1e-5


def test_gradient_vanishes_along_flat_direction():
    # With theta1 = theta3 = 0 the trash qubit stays |+> through both CNOTs,
    # so <Z_trash> cannot depend on theta0.
    rng = np.random.default_rng(9)
    theta = rng.uniform(-np.pi, np.pi, 6)
    theta[[1, 3]] = 0.0
    batch = [[0, 0, 0, 0]]
    sweep = []
    for t0 in np.linspace(-np.pi, np.pi, 13):
        t = theta.copy()
        t[0] = t0
        sweep.append(qae_loss(t, batch))
    assert np.ptp(sweep) < 1e-12
    assert abs(parameter_shift_gradient(theta, batch)[0]) < 1e-10


# -- compression --------------------------------------------------------------

def test_compress_disentangled_state():
    latent, p0 = compress([0, 0, 0, 0], DISENTANGLE)
    assert p0 == pytest.approx(1.0, abs=1e-10)
    assert latent.allclose([S2, S2])


def test_compress_uniform_state_at_zero_angles():
    latent, p0 = compress([0, 0, 0, 0], ZEROS)
    assert p0 == pytest.approx(0.5, abs=1e-12)
    assert latent.allclose([S2, S2])


def test_compress_probability_matches_expectation():
    rng = np.random.default_rng(10)
    for _ in range(100):
        x = rng.uniform(0, np.pi, 4)
        theta = rng.uniform(-np.pi, np.pi, 6)
        _, p0 = compress(x, theta)
        z = expectation_z(apply_encoder(phase_encode(x), theta), 1)
        assert abs(p0 - (1 - (1 - z) / 2)) < 1e-10


# -- reconstruction -----------------------------------------------------------

def test_wrap_phase_range():
    z = np.array([np.pi, -np.pi, 3 * np.pi, 0.1, -0.1 - 2 * np.pi])
    w = wrap_phase(z)
    assert np.all(w > -np.pi) and np.all(w <= np.pi)
    assert np.allclose(w, [np.pi, np.pi, np.pi, 0.1, -0.1])


@pytest.mark.parametrize("c", [0.0, 0.5, 1.3])
def test_reconstruct_exact_for_zero_loss(c):
    x = np.full(4, c)
    assert qae_loss(DISENTANGLE, [x]) == pytest.approx(0.0, abs=1e-12)
    assert np.allclose(reconstruct(x, DISENTANGLE), x, atol=1e-8)


def test_reconstruct_gauge_covariance():
    rng = np.random.default_rng(11)
    theta = rng.uniform(-1, 1, 6)
    for _ in range(20):
        x = rng.uniform(0.5, 2.0, 4)
        c = rng.uniform(-0.4, 0.4)
        a = reconstruct(x, theta)
        b = reconstruct(x + c, theta)
        assert np.allclose(wrap_phase(b - c - a), 0, atol=1e-9)


def test_reconstruction_error_examples():
    x = np.array([[1.0, 2.0, 3.0, 4.0]])
    assert reconstruction_error(x, x) == 0.0
    assert reconstruction_error([[1, 1, 1, 1]], [[1.1, 0.9, 1, 1]]) == pytest.approx(0.05)
    assert reconstruction_error([[2, 2, 2, 2]], [[1, 1, 1, 1]]) == pytest.approx(0.5)


def test_reconstruction_error_degenerate_denominator():
    with pytest.raises(DegenerateDenominatorError) as info:
        reconstruction_error([[1, 1, 1, 1], [1, 0, 1, 1]], [[1, 1, 1, 1]] * 2)
    assert info.value.index == (1, 1)


# -- fidelity -----------------------------------------------------------------

def test_fidelity_one_for_zero_loss():
    assert autoencoder_fidelity(np.full(4, 0.7), DISENTANGLE) == pytest.approx(1.0, abs=1e-10)


def test_fidelity_exact_matches_brute_force():
    # oracle: explicit 4x4 matrices, trace-out by index arithmetic
    rng = np.random.default_rng(12)
    for _ in range(20):
        x = rng.uniform(0, np.pi, 4)
        theta = rng.uniform(-np.pi, np.pi, 6)
        u = encoder_unitaries(theta)[0]
        psi = 0.5 * np.exp(1j * x)
        e = u @ np.outer(psi, psi.conj()) @ u.conj().T
        rho_a = np.array([[e[0, 0] + e[1, 1], e[0, 2] + e[1, 3]],
                          [e[2, 0] + e[3, 1], e[2, 2] + e[3, 3]]])
        sigma = u.conj().T @ np.kron(rho_a, np.diag([1, 0])) @ u
        oracle = np.real(psi.conj() @ sigma @ psi)
        assert autoencoder_fidelity(x, theta) == pytest.approx(oracle, abs=1e-12)


def test_fidelity_shots_close_to_exact():
    rng = np.random.default_rng(13)
    theta = rng.uniform(-1, 1, 6)
    for i in range(20):
        x = rng.uniform(0, np.pi, 4)
        exact = autoencoder_fidelity(x, theta)
        est = autoencoder_fidelity(x, theta, mode="shots", shots=10_000, seed=i)
        assert abs(est - exact) < 0.02


def test_fidelity_shots_deterministic_and_bounded():
    x, theta = np.array([0.3, 1.1, 2.0, 0.9]), np.linspace(-1, 1, 6)
    a = autoencoder_fidelity(x, theta, mode="shots", shots=500, seed=4)
    assert a == autoencoder_fidelity(x, theta, mode="shots", shots=500, seed=4)
    assert 0 <= a <= 1


def test_fidelity_bad_mode():
    with pytest.raises(InvalidArgumentError):
        autoencoder_fidelity(np.zeros(4), ZEROS, mode="tomography")


# -- training -----------------------------------------------------------------

def _toy_data(n, seed):
    rng = np.random.default_rng(seed)
    base = np.array([1.2, 1.6, 1.4, 1.3])
    return base + 0.1 * rng.normal(size=(n, 4))


def test_train_reduces_loss_and_is_deterministic():
    train, val = _toy_data(200, 0), _toy_data(40, 1)
    cfg = TrainConfig(learning_rate=0.01, epochs=8, seed=3)
    model, hist = train_qae(train, val, cfg)
    again, hist2 = train_qae(train, val, cfg)
    assert hist.train_loss == hist2.train_loss and hist.val_loss == hist2.val_loss
    assert np.array_equal(model.theta, again.theta)
    assert len(hist) == 8
    assert hist.train_loss[-1] < hist.train_loss[0]
    assert model.training_meta["best_val_loss"] == min(hist.val_loss)
    assert qae_loss(model.theta, val) == pytest.approx(min(hist.val_loss))


def test_train_rejects_empty():
    with pytest.raises(InvalidArgumentError):
        train_qae(np.zeros((0, 4)), _toy_data(5, 0))


def test_train_config_validation():
    with pytest.raises(InvalidArgumentError):
        TrainConfig(learning_rate=0)
    with pytest.raises(InvalidArgumentError):
        TrainConfig(batch_size=0)


def test_model_round_trip():
    m = QaeModel(np.linspace(-1, 1, 6), {"seed": 1})
    d = m.to_dict()
    assert d["ansatz"] == ANSATZ_TAG
    back = QaeModel.from_dict(d)
    assert np.array_equal(back.theta, m.theta)


def test_history_csv():
    _, hist = train_qae(_toy_data(40, 0), _toy_data(10, 1), TrainConfig(epochs=2))
    lines = hist.to_csv("config_hash: abc").splitlines()
    assert lines[0] == "# config_hash: abc"
    assert lines[1] == "epoch,train_loss,val_loss"
    assert len(lines) == 4


# -- estimator ----------------------------------------------------------------

def test_estimator_transform_matches_partial_trace():
    from hybridqae.qae import reduced_latent_state

    X = _toy_data(30, 2)
    est = QuantumAutoencoder(epochs=2, learning_rate=0.01, seed=1).fit(X)
    bloch = est.transform(X)
    assert bloch.shape == (30, 3)
    for x, r in zip(X, bloch):
        assert np.allclose(reduced_latent_state(x, est.theta_).bloch_vector(), r, atol=1e-12)
    assert est.score(X) == pytest.approx(1 - qae_loss(est.theta_, X))


def test_estimator_params_roundtrip():
    est = QuantumAutoencoder(epochs=3)
    assert est.get_params()["epochs"] == 3
    assert est.set_params(seed=9).seed == 9
