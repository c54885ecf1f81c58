"""Qubit gradient back-ends: generator spectrum analysis, the two-term
parameter-shift rule, the exact-insertion oracle, and central finite
differences.

Multi-occurrence parameters follow the product rule: each affine reference
is shifted separately and the contributions are summed with their
chain-rule factors.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import CircuitValidationError, ShiftRuleInapplicable
from .ir import QUBIT, CircuitIR, occurrences
from .simulator import (
    EvalCounter,
    apply_matrix,
    apply_observable,
    check_hermitian,
    evaluate,
    gate_generator,
    run,
    run_gates,
    sample_expectation,
)

CLUSTER_TOL = 1e-9
DEFAULT_DELTA = 1e-4


@dataclass(frozen=True)
class GeneratorSpectrum:
    """Clustered eigenvalues of a gate generator.

    For two distinct values e1 > e2, r = (e1 - e2)/2 and midpoint is the
    unobservable global-phase offset (e1 + e2)/2. A single distinct value
    means the gate is a pure phase in mu (r is None).
    """

    distinct_eigenvalues: tuple[float, ...]
    r: float | None
    midpoint: float | None
    applicable: bool

    @property
    def shift(self) -> float | None:
        return math.pi / (4.0 * self.r) if self.r else None


@dataclass(frozen=True)
class ShiftRule:
    """Gradient formula df = sum_i gamma_i * f(mu + s_i)."""

    terms: tuple[tuple[float, float], ...]


def analyze_generator(generator: np.ndarray) -> GeneratorSpectrum:
    """Cluster the generator spectrum with absolute tolerance CLUSTER_TOL."""
    g = check_hermitian(generator, "generator")
    eigenvalues = np.linalg.eigvalsh(g)
    clusters: list[list[float]] = [[float(eigenvalues[0])]]
    for ev in eigenvalues[1:]:
        if ev - clusters[-1][-1] > CLUSTER_TOL:
            clusters.append([])
        clusters[-1].append(float(ev))
    distinct = tuple(float(np.mean(c)) for c in clusters)
    if len(distinct) > 2:
        return GeneratorSpectrum(distinct, None, None, False)
    if len(distinct) == 1:
        return GeneratorSpectrum(distinct, None, distinct[0], True)
    e2, e1 = distinct
    return GeneratorSpectrum(distinct, (e1 - e2) / 2.0, (e1 + e2) / 2.0, True)


def two_term_rule(spectrum: GeneratorSpectrum) -> ShiftRule:
    if not spectrum.applicable or spectrum.r is None:
        raise CircuitValidationError("no two-term rule for this spectrum")
    s = spectrum.shift
    return ShiftRule(((spectrum.r, s), (-spectrum.r, -s)))


def _check_qubit(circuit: CircuitIR) -> None:
    if circuit.platform != QUBIT:
        raise CircuitValidationError("qubit gradient on a non-qubit circuit")


def shift_rule_gradient(circuit: CircuitIR, theta, k: int,
                        counter: EvalCounter | None = None) -> float:
    """d<B>/d(theta_k) via the exact two-term parameter-shift rule.

    Each occurrence costs two expectation evaluations. Raises
    ShiftRuleInapplicable if any referenced gate's generator has more than
    two distinct eigenvalues.
    """
    _check_qubit(circuit)
    total = 0.0
    for occ in occurrences(circuit, k):
        gate = circuit.gates[occ.gate]
        spectrum = analyze_generator(gate_generator(gate, theta))
        if not spectrum.applicable:
            raise ShiftRuleInapplicable(gate.label(), len(spectrum.distinct_eigenvalues))
        if spectrum.r is None:
            continue  # pure phase gate: zero contribution, nothing to evaluate
        for gamma, s in two_term_rule(spectrum).terms:
            total += occ.coeff * gamma * evaluate(
                circuit, theta, shift=(occ.gate, occ.arg, s), counter=counter
            )
    return total


def shift_rule_gradient_sampled(circuit: CircuitIR, theta, k: int, shots: int,
                                seed: int | None = None,
                                counter: EvalCounter | None = None) -> tuple[float, float]:
    """Shot-based shift-rule estimate: (gradient estimate, standard error)."""
    _check_qubit(circuit)
    rng = np.random.default_rng(seed)
    estimate = 0.0
    variance = 0.0
    for occ in occurrences(circuit, k):
        gate = circuit.gates[occ.gate]
        spectrum = analyze_generator(gate_generator(gate, theta))
        if not spectrum.applicable:
            raise ShiftRuleInapplicable(gate.label(), len(spectrum.distinct_eigenvalues))
        if spectrum.r is None:
            continue
        for gamma, s in two_term_rule(spectrum).terms:
            mean, stderr = sample_expectation(
                circuit, theta, shots, seed=int(rng.integers(2**63)),
                shift=(occ.gate, occ.arg, s), counter=counter,
            )
            weight = occ.coeff * gamma
            estimate += weight * mean
            variance += weight**2 * stderr**2
    return estimate, float(np.sqrt(variance))


def exact_gradient(circuit: CircuitIR, theta, k: int,
                   counter: EvalCounter | None = None) -> float:
    """Ground-truth gradient by operator insertion.

    For each occurrence, runs the circuit with -i*G inserted right after the
    referenced gate and takes 2*Re<psi_full|B|psi_ins>, scaled by the affine
    chain factor.
    """
    _check_qubit(circuit)
    occs = occurrences(circuit, k)
    if not occs:
        return 0.0
    n = circuit.wire_count
    psi_full = run(circuit, theta)
    if counter is not None:
        counter.add()
    total = 0.0
    for occ in occs:
        gate = circuit.gates[occ.gate]
        gen = gate_generator(gate, theta)
        state = run_gates(circuit.gates[: occ.gate + 1], n, theta)
        state = apply_matrix(state, -1j * gen, gate.wires, n)
        state = run_gates(circuit.gates[occ.gate + 1:], n, theta, state=state)
        if counter is not None:
            counter.add()
        inner = np.vdot(psi_full, apply_observable(state, circuit.observable, n))
        total += occ.coeff * 2.0 * inner.real
    return total


def finite_difference(circuit: CircuitIR, theta, k: int, delta: float = DEFAULT_DELTA,
                      counter: EvalCounter | None = None) -> float:
    """Central difference (f(theta + d/2 e_k) - f(theta - d/2 e_k)) / d."""
    if delta <= 0:
        raise CircuitValidationError("finite-difference delta must be positive")
    _check_qubit(circuit)
    plus = np.array(theta, dtype=float)
    minus = plus.copy()
    plus[k] += delta / 2.0
    minus[k] -= delta / 2.0
    return (evaluate(circuit, plus, counter=counter)
            - evaluate(circuit, minus, counter=counter)) / delta
