"""Dense statevector simulation of qubit circuits.

Wire 0 is the most significant bit of the basis-state index. Gate
exponentials go through Hermitian eigendecomposition so that two-eigenvalue
generator structure is exact by construction. Intended scale is <= 12 qubits.
"""
from __future__ import annotations

import numpy as np

from .errors import CircuitValidationError, NumericalError
from .ir import (
    QUBIT,
    CircuitIR,
    GateSpec,
    MatrixObservable,
    PauliObservable,
    resolve,
)

PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}
_H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
_CNOT = np.array(
    [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex
)
_FIXED = {"H": _H, "CNOT": _CNOT}

IMAG_TOL = 1e-10


class EvalCounter:
    """Counts circuit-expectation evaluations performed on behalf of a caller."""

    __slots__ = ("count",)

    def __init__(self):
        self.count = 0

    def add(self, n: int = 1):
        self.count += n


def check_hermitian(matrix: np.ndarray, what: str = "matrix", tol: float = 1e-12) -> np.ndarray:
    m = np.asarray(matrix, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise CircuitValidationError(f"{what} is not square")
    if np.max(np.abs(m - m.conj().T)) > tol:
        raise NumericalError(f"{what} is not Hermitian within {tol:g}")
    return m


def kron_all(mats) -> np.ndarray:
    out = np.array([[1.0 + 0j]])
    for m in mats:
        out = np.kron(out, m)
    return out


def gate_unitary(generator: np.ndarray, mu: float) -> np.ndarray:
    """exp(-i*mu*G) for Hermitian G, via eigendecomposition."""
    g = check_hermitian(generator, "generator")
    w, v = np.linalg.eigh(g)
    return (v * np.exp(-1j * mu * w)) @ v.conj().T


def gate_generator(gate: GateSpec, theta) -> np.ndarray | None:
    """Hermitian generator of a parametrized gate; None for fixed gates."""
    kind = gate.kind
    if kind in ("RX", "RY", "RZ"):
        return PAULI[kind[1]] / 2.0
    if kind == "PAULIROT":
        return kron_all(PAULI[l] for l in gate.word) / 2.0
    if kind == "EXPZ":
        return PAULI["Z"].copy()
    if kind == "EXPW":
        delta = resolve(gate.args[1], theta)
        return np.cos(delta) * PAULI["X"] + np.sin(delta) * PAULI["Y"]
    if kind == "EXP11":
        return np.diag([0.0, 0.0, 0.0, 1.0]).astype(complex)
    if kind == "CROSSRES":
        b = resolve(gate.args[1], theta)
        c = resolve(gate.args[2], theta)
        return (
            np.kron(PAULI["X"], PAULI["I"])
            - b * np.kron(PAULI["Z"], PAULI["X"])
            + c * np.kron(PAULI["I"], PAULI["X"])
        )
    if kind == "EXPG":
        return gate.matrix
    return None


def gate_matrix(gate: GateSpec, theta, delta: float = 0.0) -> np.ndarray:
    """Resolved unitary of a gate, with an optional shift of its exponent argument."""
    fixed = _FIXED.get(gate.kind)
    if fixed is not None:
        return fixed
    gen = gate_generator(gate, theta)
    mu = resolve(gate.args[0], theta) + delta
    return gate_unitary(gen, mu)


def apply_matrix(state: np.ndarray, mat: np.ndarray, wires, n: int) -> np.ndarray:
    """Apply a 2^k x 2^k matrix on the given wires of an n-qubit state."""
    k = len(wires)
    psi = state.reshape((2,) * n)
    op = np.asarray(mat, dtype=complex).reshape((2,) * (2 * k))
    psi = np.tensordot(op, psi, axes=(tuple(range(k, 2 * k)), tuple(wires)))
    psi = np.moveaxis(psi, tuple(range(k)), tuple(wires))
    return np.ascontiguousarray(psi).reshape(-1)


def zero_state(n: int) -> np.ndarray:
    state = np.zeros(2**n, dtype=complex)
    state[0] = 1.0
    return state


def run_gates(gates, n: int, theta, state: np.ndarray | None = None,
              shift: tuple[int, int, float] | None = None,
              offset: int = 0) -> np.ndarray:
    """Apply a gate sequence; shift=(pos, arg, delta) nudges one resolved argument.

    offset is the circuit position of gates[0], so shift positions refer to
    the full circuit even when running a slice.
    """
    if state is None:
        state = zero_state(n)
    for i, gate in enumerate(gates):
        delta = 0.0
        if shift is not None and shift[0] == offset + i:
            if shift[1] != 0:
                raise CircuitValidationError(
                    f"gate {gate.kind} has no shiftable argument slot {shift[1]}"
                )
            delta = shift[2]
        state = apply_matrix(state, gate_matrix(gate, theta, delta), gate.wires, n)
    return state


def run(circuit: CircuitIR, theta) -> np.ndarray:
    """Statevector U(theta)|0...0> of a qubit circuit."""
    if circuit.platform != QUBIT:
        raise CircuitValidationError("run() expects a qubit circuit")
    return run_gates(circuit.gates, circuit.wire_count, theta)


def apply_pauli_word(state: np.ndarray, word, n: int) -> np.ndarray:
    for wire, letter in word:
        state = apply_matrix(state, PAULI[letter], (wire,), n)
    return state


def apply_observable(state: np.ndarray, obs, n: int) -> np.ndarray:
    """B|psi> for a Pauli-sum or explicit-matrix observable."""
    if isinstance(obs, PauliObservable):
        out = np.zeros_like(state)
        for coeff, word in obs.terms:
            out += coeff * apply_pauli_word(state, word, n)
        return out
    if isinstance(obs, MatrixObservable):
        return apply_matrix(state, obs.matrix, obs.wires, n)
    raise CircuitValidationError(f"unsupported qubit observable {type(obs).__name__}")


def expectation(state: np.ndarray, obs) -> float:
    """<psi|B|psi>; the imaginary residue must be below 1e-10 and is discarded."""
    n = int(round(np.log2(state.shape[0])))
    if 2**n != state.shape[0]:
        raise CircuitValidationError("state length is not a power of two")
    if isinstance(obs, (PauliObservable, MatrixObservable)):
        max_wire = obs.max_wire() if isinstance(obs, PauliObservable) else max(obs.wires, default=-1)
        if max_wire >= n:
            raise CircuitValidationError(
                f"observable wire {max_wire} out of range for {n}-qubit state"
            )
    value = np.vdot(state, apply_observable(state, obs, n))
    if abs(value.imag) > IMAG_TOL:
        raise NumericalError(f"expectation has imaginary residue {value.imag:.3e}")
    return float(value.real)


def evaluate(circuit: CircuitIR, theta, shift: tuple[int, int, float] | None = None,
             counter: EvalCounter | None = None) -> float:
    """One full expectation evaluation f(theta), optionally with a shifted gate argument."""
    state = run_gates(circuit.gates, circuit.wire_count, theta, shift=shift)
    if counter is not None:
        counter.add()
    return expectation(state, circuit.observable)


# -- shot-based sampling ---------------------------------------------------


def _marginal_probs(state: np.ndarray, wires, n: int) -> np.ndarray:
    psi = state.reshape((2,) * n)
    psi = np.moveaxis(psi, tuple(wires), tuple(range(len(wires))))
    psi = psi.reshape(2 ** len(wires), -1)
    p = np.sum(np.abs(psi) ** 2, axis=1)
    p = np.clip(p.real, 0.0, None)
    return p / p.sum()


def _sample_eigenvalues(rng, eigenvalues: np.ndarray, probs: np.ndarray, shots: int):
    """Multinomial draw from the Born distribution; returns (mean, sample variance)."""
    counts = rng.multinomial(shots, probs)
    mean = float(counts @ eigenvalues) / shots
    second = float(counts @ (eigenvalues**2)) / shots
    var = max(second - mean**2, 0.0)
    if shots > 1:
        var *= shots / (shots - 1)
    else:
        var = 0.0
    return mean, var


def sample_expectation(circuit: CircuitIR, theta, shots: int, seed: int | None = None,
                       shift: tuple[int, int, float] | None = None,
                       counter: EvalCounter | None = None) -> tuple[float, float]:
    """Shot-based estimate of the expectation: (sample mean, standard error).

    Pauli sums are sampled term by term with shots split equally; explicit
    matrix observables are sampled in their eigenbasis. Deterministic for a
    given seed.
    """
    if shots < 1:
        raise CircuitValidationError("shots must be >= 1")
    state = run_gates(circuit.gates, circuit.wire_count, theta, shift=shift)
    if counter is not None:
        counter.add()
    rng = np.random.default_rng(seed)
    n = circuit.wire_count
    obs = circuit.observable

    if isinstance(obs, PauliObservable):
        per_term = max(1, shots // max(1, len(obs.terms)))
        estimate = 0.0
        variance = 0.0
        for coeff, word in obs.terms:
            if not word:  # identity term: eigenvalue +1 with certainty
                estimate += coeff
                continue
            exact = float(np.vdot(state, apply_pauli_word(state, word, n)).real)
            p_plus = min(max((1.0 + exact) / 2.0, 0.0), 1.0)
            mean, var = _sample_eigenvalues(
                rng, np.array([1.0, -1.0]), np.array([p_plus, 1.0 - p_plus]), per_term
            )
            estimate += coeff * mean
            variance += coeff**2 * var / per_term
        return estimate, float(np.sqrt(variance))

    if isinstance(obs, MatrixObservable):
        w, v = np.linalg.eigh(obs.matrix)
        rotated = apply_matrix(state, v.conj().T, obs.wires, n)
        probs = _marginal_probs(rotated, obs.wires, n)
        mean, var = _sample_eigenvalues(rng, w, probs, shots)
        return mean, float(np.sqrt(var / shots))

    raise CircuitValidationError(f"unsupported qubit observable {type(obs).__name__}")
