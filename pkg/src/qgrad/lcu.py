"""Differentiation of arbitrary qubit gates via an ancilla-based linear
combination of unitaries.

The gate derivative dG/dmu = -i*G_gen*exp(-i*mu*G_gen) is decomposed into
real-weighted unitaries; each term is evaluated by a Hadamard-sandwich
circuit that conditions the gate and the unitary on an ancilla, and the
branch statistics 2*(p0*E0 - p1*E1) recover the cross term.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CircuitValidationError, NumericalError
from .ir import QUBIT, CircuitIR, occurrences, resolve
from .simulator import (
    EvalCounter,
    apply_matrix,
    apply_observable,
    check_hermitian,
    expectation,
    gate_generator,
    gate_unitary,
    run_gates,
)

BRANCH_EPS = 1e-14
RECONSTRUCTION_TOL = 1e-10
UNITARITY_TOL = 1e-12


@dataclass(frozen=True)
class UnitaryDecomposition:
    """dG/dmu = sum_k alpha_k * A_k with real alpha_k and unitary A_k."""

    alphas: tuple[float, ...]
    unitaries: tuple[np.ndarray, ...]
    method: str

    def __len__(self):
        return len(self.alphas)


@dataclass(frozen=True)
class AncillaRunResult:
    """Branch statistics of one LCU circuit execution."""

    p0: float
    p1: float
    e0: float
    e1: float


@dataclass(frozen=True)
class ConjugatedObservable:
    """Observable V'BV realized by applying the tail gates before measuring B."""

    tail_gates: tuple
    theta: tuple
    base: object
    wire_count: int

    def expectation(self, state: np.ndarray) -> float:
        state = run_gates(self.tail_gates, self.wire_count, self.theta, state=state)
        return expectation(state, self.base)


def _observable_expectation(obs, state: np.ndarray) -> float:
    if isinstance(obs, ConjugatedObservable):
        return obs.expectation(state)
    return expectation(state, obs)


def derivative_matrix(generator: np.ndarray, mu: float) -> np.ndarray:
    """dG/dmu = -i * G_gen * exp(-i*mu*G_gen)."""
    gen = check_hermitian(generator, "generator")
    return -1j * gen @ gate_unitary(gen, mu)


def _check_unitary(m: np.ndarray, what: str) -> None:
    res = np.max(np.abs(m.conj().T @ m - np.eye(m.shape[0])))
    if res > UNITARITY_TOL:
        raise NumericalError(f"{what} deviates from unitarity by {res:.3e}")


def _check_reconstruction(alphas, unitaries, target: np.ndarray) -> None:
    total = sum(a * u for a, u in zip(alphas, unitaries))
    res = np.max(np.abs(total - target))
    if res > RECONSTRUCTION_TOL:
        raise NumericalError(f"decomposition residual {res:.3e} above {RECONSTRUCTION_TOL:g}")


def _hermitian_unitary_shift(h: np.ndarray) -> np.ndarray:
    """h + i*sqrt(I - h^2) for Hermitian h with spectrum in [-1, 1]."""
    w, v = np.linalg.eigh(h)
    phases = w + 1j * np.sqrt(np.clip(1.0 - w**2, 0.0, 1.0))
    return (v * phases) @ v.conj().T


def decompose_derivative(generator: np.ndarray, mu: float,
                         method: str = "polar") -> UnitaryDecomposition:
    """Decompose the gate derivative into real-weighted unitaries.

    polar: two terms alpha/2 * U(P +- i*sqrt(I-P^2)) from the polar factors
    of the normalized derivative; collapses to one term when P = I.
    footnote: four terms alpha/2 * {A1, A1', i*A2, i*A2'} built from the
    Hermitian and anti-Hermitian parts of the normalized derivative.
    """
    deriv = derivative_matrix(generator, mu)
    dim = deriv.shape[0]
    alpha = float(np.linalg.norm(deriv, 2))
    if alpha < 1e-300:  # zero generator: derivative vanishes identically
        return UnitaryDecomposition((0.0,), (np.eye(dim, dtype=complex),), method)

    if method == "polar":
        w, sigma, xh = np.linalg.svd(deriv / alpha)
        u = w @ xh
        if sigma.min() > 1.0 - 1e-12:
            terms = [(alpha, u)]
        else:
            x = xh.conj().T
            root = np.sqrt(np.clip(1.0 - sigma**2, 0.0, 1.0))
            a_plus = u @ ((x * (sigma + 1j * root)) @ xh)
            a_minus = u @ ((x * (sigma - 1j * root)) @ xh)
            terms = [(alpha / 2.0, a_plus), (alpha / 2.0, a_minus)]
    elif method == "footnote":
        t = deriv / alpha
        t_re = (t + t.conj().T) / 2.0
        t_im = (t - t.conj().T) / 2.0j
        a1 = _hermitian_unitary_shift(t_re)
        a2 = _hermitian_unitary_shift(t_im)
        terms = [
            (alpha / 2.0, a1),
            (alpha / 2.0, a1.conj().T),
            (alpha / 2.0, 1j * a2),
            (alpha / 2.0, 1j * a2.conj().T),
        ]
    else:
        raise CircuitValidationError(f"unknown decomposition method {method!r}")

    for _, unit in terms:
        _check_unitary(unit, "decomposition term")
    _check_reconstruction([a for a, _ in terms], [u for _, u in terms], deriv)
    return UnitaryDecomposition(
        tuple(a for a, _ in terms), tuple(u for _, u in terms), method
    )


def lcu_circuit_run(psi: np.ndarray, gate_mat: np.ndarray, a_mat: np.ndarray,
                    wires, q_obs) -> AncillaRunResult:
    """Simulate the ancilla circuit: H, gate on ancilla=0, A on ancilla=1, H.

    psi excludes the ancilla, which is appended as the last wire. Returns the
    branch probabilities and the conditional expectations of q_obs on the
    normalized branch states; a branch below probability 1e-14 reports
    expectation 0 (only the product p_i*E_i is consumed downstream).
    """
    dim = psi.shape[0]
    if gate_mat.shape != a_mat.shape or gate_mat.shape[0] != 2 ** len(wires):
        raise CircuitValidationError("gate and A must be unitaries on the same wires")
    n = int(round(np.log2(dim)))
    # after the first Hadamard both ancilla columns hold psi/sqrt(2)
    col0 = psi / np.sqrt(2.0)
    col1 = psi / np.sqrt(2.0)
    col0 = apply_matrix(col0, gate_mat, wires, n)
    col1 = apply_matrix(col1, a_mat, wires, n)
    out0 = (col0 + col1) / np.sqrt(2.0)
    out1 = (col0 - col1) / np.sqrt(2.0)
    p0 = float(np.vdot(out0, out0).real)
    p1 = float(np.vdot(out1, out1).real)
    if abs(p0 + p1 - 1.0) > 1e-12:
        raise NumericalError(f"branch probabilities sum to {p0 + p1!r}")
    e0 = _observable_expectation(q_obs, out0 / np.sqrt(p0)) if p0 >= BRANCH_EPS else 0.0
    e1 = _observable_expectation(q_obs, out1 / np.sqrt(p1)) if p1 >= BRANCH_EPS else 0.0
    return AncillaRunResult(p0, p1, e0, e1)


def lcu_branch_closed_form(psi: np.ndarray, gate_mat: np.ndarray, a_mat: np.ndarray,
                           wires, q_obs) -> AncillaRunResult:
    """Branch statistics from the closed-form expressions
    p_i = <psi|(G +- A)'(G +- A)|psi>/4, independent of the circuit simulation."""
    n = int(round(np.log2(psi.shape[0])))
    g_psi = apply_matrix(psi, gate_mat, wires, n)
    a_psi = apply_matrix(psi, a_mat, wires, n)
    plus = (g_psi + a_psi) / 2.0
    minus = (g_psi - a_psi) / 2.0
    p0 = float(np.vdot(plus, plus).real)
    p1 = float(np.vdot(minus, minus).real)
    e0 = _observable_expectation(q_obs, plus / np.sqrt(p0)) if p0 >= BRANCH_EPS else 0.0
    e1 = _observable_expectation(q_obs, minus / np.sqrt(p1)) if p1 >= BRANCH_EPS else 0.0
    return AncillaRunResult(p0, p1, e0, e1)


def combine(result: AncillaRunResult) -> float:
    """2*(p0*E0 - p1*E1); both ancilla outcomes contribute, no post-selection."""
    return 2.0 * (result.p0 * result.e0 - result.p1 * result.e1)


def lcu_gradient(circuit: CircuitIR, theta, k: int, method: str = "polar",
                 counter: EvalCounter | None = None) -> float:
    """d<B>/d(theta_k) via per-term LCU circuit runs.

    For each occurrence the prefix gates prepare |psi>, the suffix gates are
    absorbed into the measured observable, and one ancilla run per
    decomposition term supplies <psi|G'QA_k|psi> + h.c.
    """
    if circuit.platform != QUBIT:
        raise CircuitValidationError("lcu gradient on a non-qubit circuit")
    n = circuit.wire_count
    total = 0.0
    for occ in occurrences(circuit, k):
        gate = circuit.gates[occ.gate]
        gen = gate_generator(gate, theta)
        mu = resolve(gate.args[0], theta)
        gate_mat = gate_unitary(gen, mu)
        decomp = decompose_derivative(gen, mu, method)
        psi = run_gates(circuit.gates[: occ.gate], n, theta)
        q_obs = ConjugatedObservable(
            circuit.gates[occ.gate + 1:], tuple(theta), circuit.observable, n
        )
        subtotal = 0.0
        for alpha_k, a_k in zip(decomp.alphas, decomp.unitaries):
            if alpha_k == 0.0:
                continue
            result = lcu_circuit_run(psi, gate_mat, a_k, gate.wires, q_obs)
            if counter is not None:
                counter.add()
            subtotal += alpha_k * combine(result)
        total += occ.coeff * subtotal
    return total
