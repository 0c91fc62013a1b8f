"""Dense simulator for 1-3 qubit pure and mixed states.

Qubit 0 is the most significant bit of the basis index, so for two qubits
the basis order is |q0 q1> = |00>, |01>, |10>, |11>.
"""

from dataclasses import dataclass, field

import numpy as np

from .exceptions import InvalidArgumentError, PostSelectionError

MAX_QUBITS = 3
NORM_TOL = 1e-8
POSTSELECT_EPS = 1e-12


def _n_qubits_for(dim):
    n = int(dim).bit_length() - 1
    if dim < 2 or (1 << n) != dim:
        raise InvalidArgumentError(f"dimension {dim} is not a power of two")
    if n > MAX_QUBITS:
        raise InvalidArgumentError(f"{n} qubits exceeds the supported maximum of {MAX_QUBITS}")
    return n


def _frozen(a):
    a = np.array(a, dtype=complex)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class StateVector:
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = _frozen(self.amplitudes)
        if amps.ndim != 1:
            raise InvalidArgumentError("amplitudes must be one-dimensional")
        _n_qubits_for(amps.size)
        if not np.all(np.isfinite(amps)):
            raise InvalidArgumentError("amplitudes must be finite")
        norm = np.vdot(amps, amps).real
        if abs(norm - 1.0) > NORM_TOL:
            raise InvalidArgumentError(f"state is not normalized (norm^2 = {norm!r})")
        object.__setattr__(self, "amplitudes", amps)

    @property
    def n_qubits(self):
        return _n_qubits_for(self.amplitudes.size)

    def probabilities(self):
        return np.abs(self.amplitudes) ** 2

    def to_density_matrix(self):
        return DensityMatrix(np.outer(self.amplitudes, self.amplitudes.conj()))

    def allclose(self, other, atol=1e-10):
        return np.allclose(self.amplitudes, _amps(other), rtol=0, atol=atol)


@dataclass(frozen=True)
class DensityMatrix:
    matrix: np.ndarray

    def __post_init__(self):
        m = _frozen(self.matrix)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise InvalidArgumentError("density matrix must be square")
        _n_qubits_for(m.shape[0])
        if not np.all(np.isfinite(m)):
            raise InvalidArgumentError("density matrix must be finite")
        if not np.allclose(m, m.conj().T, rtol=0, atol=NORM_TOL):
            raise InvalidArgumentError("density matrix is not Hermitian")
        if abs(np.trace(m).real - 1.0) > NORM_TOL:
            raise InvalidArgumentError("density matrix does not have unit trace")
        if np.linalg.eigvalsh(m).min() < -NORM_TOL:
            raise InvalidArgumentError("density matrix is not positive semidefinite")
        object.__setattr__(self, "matrix", m)

    @property
    def n_qubits(self):
        return _n_qubits_for(self.matrix.shape[0])

    def probabilities(self):
        return np.clip(np.diag(self.matrix).real, 0.0, None)

    def purity(self):
        return float(np.real(np.trace(self.matrix @ self.matrix)))

    def bloch_vector(self):
        """(x, y, z) Bloch coordinates of a single-qubit state."""
        if self.n_qubits != 1:
            raise InvalidArgumentError("Bloch vector is only defined for one qubit")
        m = self.matrix
        return np.array([2 * m[0, 1].real, -2 * m[0, 1].imag, (m[0, 0] - m[1, 1]).real])

    @classmethod
    def from_bloch(cls, r):
        x, y, z = r
        return cls(0.5 * np.array([[1 + z, x - 1j * y], [x + 1j * y, 1 - z]]))


@dataclass(frozen=True)
class MeasurementCounts:
    counts: dict
    total_shots: int
    seed: int
    qubits: tuple = field(default=())

    def __post_init__(self):
        if sum(self.counts.values()) != self.total_shots:
            raise InvalidArgumentError("counts do not sum to total_shots")

    def frequency(self, outcome):
        return self.counts.get(outcome, 0) / self.total_shots


def _amps(state):
    return state.amplitudes if isinstance(state, StateVector) else np.asarray(state)


def _check_qubit(n, qubit):
    if not isinstance(qubit, (int, np.integer)) or not 0 <= qubit < n:
        raise InvalidArgumentError(f"qubit index {qubit!r} out of range for {n} qubits")


# -- gate matrices ----------------------------------------------------------

def ry_matrix(angle):
    # exp(+i sigma_y angle / 2): note the sign, R_y(pi)|0> = -|1>
    c, s = np.cos(angle / 2), np.sin(angle / 2)
    return np.array([[c, s], [-s, c]], dtype=complex)


def u3_matrix(alpha, beta, gamma):
    # Unitary completion: the top-right entry carries -e^{+i gamma}, which is
    # e^{-i gamma'} with gamma' = -(pi + gamma). Only the first row enters p0.
    c, s = np.cos(alpha / 2), np.sin(alpha / 2)
    return np.array(
        [
            [c, -np.exp(1j * gamma) * s],
            [np.exp(1j * beta) * s, np.exp(1j * (beta + gamma)) * c],
        ]
    )


CNOT = np.array(
    [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex
)
PAULI_Z = np.diag([1.0, -1.0]).astype(complex)


# -- state preparation -------------------------------------------------------

def statevector_init(n_qubits):
    if not isinstance(n_qubits, (int, np.integer)) or not 1 <= n_qubits <= MAX_QUBITS:
        raise InvalidArgumentError(f"n_qubits must be in [1, {MAX_QUBITS}], got {n_qubits!r}")
    amps = np.zeros(2**n_qubits, dtype=complex)
    amps[0] = 1.0
    return StateVector(amps)


def phase_encode(x):
    """Load a 4-vector into the phases of an equal-weight two-qubit superposition."""
    x = np.asarray(x, dtype=float)
    if x.shape != (4,):
        raise InvalidArgumentError(f"expected a 4-vector, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise InvalidArgumentError("phase encoding requires finite components")
    return StateVector(0.5 * np.exp(1j * x))


# -- gate application --------------------------------------------------------

def apply_single_qubit_gate(state, qubit, matrix):
    n = state.n_qubits
    _check_qubit(n, qubit)
    psi = state.amplitudes.reshape((2,) * n)
    psi = np.moveaxis(np.tensordot(matrix, psi, axes=([1], [qubit])), 0, qubit)
    return StateVector(psi.reshape(-1))


def apply_ry(state, qubit, angle):
    return apply_single_qubit_gate(state, qubit, ry_matrix(angle))


def apply_u3(state, qubit, alpha, beta, gamma):
    return apply_single_qubit_gate(state, qubit, u3_matrix(alpha, beta, gamma))


def apply_pauli_x(state, qubit):
    return apply_single_qubit_gate(state, qubit, np.array([[0, 1], [1, 0]], dtype=complex))


def apply_cnot(state, control, target):
    n = state.n_qubits
    _check_qubit(n, control)
    _check_qubit(n, target)
    if control == target:
        raise InvalidArgumentError("control and target must differ")
    psi = state.amplitudes.reshape((2,) * n).copy()
    sel = [slice(None)] * n
    sel[control] = 1
    sub = psi[tuple(sel)]
    # target axis index shifts down by one once the control axis is removed
    t_axis = target - (1 if target > control else 0)
    psi[tuple(sel)] = np.flip(sub, axis=t_axis)
    return StateVector(psi.reshape(-1))


def apply_unitary(state, unitary):
    """Apply a full-register unitary to a StateVector or DensityMatrix."""
    u = np.asarray(unitary)
    if isinstance(state, DensityMatrix):
        if u.shape != state.matrix.shape:
            raise InvalidArgumentError("unitary and density matrix dimensions differ")
        return DensityMatrix(u @ state.matrix @ u.conj().T)
    if u.shape != (state.amplitudes.size,) * 2:
        raise InvalidArgumentError("unitary and state dimensions differ")
    return StateVector(u @ state.amplitudes)


# -- measurement -------------------------------------------------------------

def expectation_z(state, qubit):
    n = state.n_qubits
    _check_qubit(n, qubit)
    probs = state.probabilities().reshape((2,) * n)
    axes = tuple(i for i in range(n) if i != qubit)
    marginal = probs.sum(axis=axes) if axes else probs
    return float(marginal[0] - marginal[1])


def marginal_probabilities(state, qubits):
    n = state.n_qubits
    qubits = list(qubits)
    for q in qubits:
        _check_qubit(n, q)
    if len(set(qubits)) != len(qubits):
        raise InvalidArgumentError("duplicate qubits in measurement list")
    probs = state.probabilities().reshape((2,) * n)
    rest = tuple(i for i in range(n) if i not in qubits)
    marg = probs.sum(axis=rest) if rest else probs
    # reorder kept axes to the order the caller listed them
    kept_sorted = sorted(qubits)
    marg = np.transpose(marg, [kept_sorted.index(q) for q in qubits])
    marg = marg.reshape(-1)
    return marg / marg.sum()


def sample_shots(state, qubits, shots, seed):
    """Draw `shots` i.i.d. Born-rule outcomes over `qubits`.

    Accepts a StateVector or DensityMatrix. Outcome strings list the bits in
    the same order as `qubits`.
    """
    if not isinstance(shots, (int, np.integer)) or shots < 1:
        raise InvalidArgumentError(f"shots must be a positive integer, got {shots!r}")
    qubits = tuple(qubits)
    probs = marginal_probabilities(state, qubits)
    rng = np.random.default_rng(seed)
    drawn = rng.multinomial(shots, probs)
    width = len(qubits)
    counts = {format(i, f"0{width}b"): int(c) for i, c in enumerate(drawn) if c}
    return MeasurementCounts(counts=counts, total_shots=int(shots), seed=seed, qubits=qubits)


def partial_trace(state, keep):
    """Reduced density matrix of the single qubit `keep`."""
    if isinstance(state, StateVector):
        n = state.n_qubits
        _check_qubit(n, keep)
        psi = np.moveaxis(state.amplitudes.reshape((2,) * n), keep, 0).reshape(2, -1)
        return DensityMatrix(psi @ psi.conj().T)
    n = state.n_qubits
    _check_qubit(n, keep)
    rho = state.matrix.reshape((2,) * (2 * n))
    rho = np.moveaxis(rho, (keep, n + keep), (0, n))
    rho = rho.reshape(2, 2 ** (n - 1), 2, 2 ** (n - 1))
    return DensityMatrix(np.einsum("ajbj->ab", rho))


def postselect(state, qubit, outcome):
    """Project `qubit` onto |outcome> and renormalize the remaining qubits.

    Returns the post-measurement state of the other qubits and the
    probability of the outcome.
    """
    n = state.n_qubits
    _check_qubit(n, qubit)
    if n < 2:
        raise InvalidArgumentError("post-selection needs at least two qubits")
    if outcome not in (0, 1):
        raise InvalidArgumentError(f"outcome must be 0 or 1, got {outcome!r}")
    psi = np.take(state.amplitudes.reshape((2,) * n), outcome, axis=qubit).reshape(-1)
    p = float(np.vdot(psi, psi).real)
    if p <= POSTSELECT_EPS:
        raise PostSelectionError(
            f"outcome {outcome} on qubit {qubit} has probability {p:.3e}"
        )
    return StateVector(psi / np.sqrt(p)), p


def attach_ground_qubit(state, position):
    """Tensor a fresh |0> qubit into wire `position` of a one-qubit state."""
    if state.n_qubits != 1:
        raise InvalidArgumentError("attach_ground_qubit expects a one-qubit input")
    if position not in (0, 1):
        raise InvalidArgumentError(f"position must be 0 or 1, got {position!r}")
    ground = np.array([1.0, 0.0], dtype=complex)
    if isinstance(state, DensityMatrix):
        g = np.outer(ground, ground)
        m = np.kron(g, state.matrix) if position == 0 else np.kron(state.matrix, g)
        return DensityMatrix(m)
    a = state.amplitudes
    return StateVector(np.kron(ground, a) if position == 0 else np.kron(a, ground))


def fidelity(rho, sigma):
    """Tr[rho sigma] for a pure `rho` and an arbitrary `sigma`."""
    if isinstance(rho, StateVector):
        rho = rho.to_density_matrix()
    if isinstance(sigma, StateVector):
        sigma = sigma.to_density_matrix()
    if rho.matrix.shape != sigma.matrix.shape:
        raise InvalidArgumentError("fidelity operands have different dimensions")
    if abs(rho.purity() - 1.0) > 1e-8:
        raise InvalidArgumentError("first fidelity operand must be a pure state")
    f = np.trace(rho.matrix @ sigma.matrix)
    return float(np.clip(f.real, 0.0, 1.0))
