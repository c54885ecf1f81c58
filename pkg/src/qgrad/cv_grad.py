"""Continuous-variable gradient back-ends.

Matrix-level shift decompositions exist for (R, phi), (D, r), (D, phi),
(S, r), (BS, theta) and (BS, phi). For first-degree observables with only
Gaussian gates after the differentiated one, the same combination applies
directly to whole-circuit expectations (the hardware-style route). Higher
degrees go through the product rule at matrix level. The cubic-phase
parameter has no analytic rule and is served by finite differences only.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    CircuitValidationError,
    DegreeTooHigh,
    NonGaussianAfterGate,
    NoShiftRule,
)
from .heisenberg import (
    DEFAULT_MAX_DEGREE,
    conjugate,
    cv_expectation,
    first_degree_image,
    gate_action,
    gaussian_matrix,
    embed_matrix,
)
from .ir import CV, GATE_DEFS, CircuitIR, occurrences, resolve
from .quad_algebra import QuadPolynomial
from .simulator import EvalCounter

DEFAULT_SHIFT = 1.0
DEFAULT_DELTA = 1e-4

_HALF_PI = math.pi / 2.0


@dataclass(frozen=True)
class CVShiftRule:
    """Matrix identity dM/dmu = sum_i gamma_i * M(mu + s_i)."""

    terms: tuple[tuple[float, float], ...]
    free_shift: float | None = None


def cv_shift_rule(kind: str, param_name: str, s: float = DEFAULT_SHIFT) -> CVShiftRule:
    """Shift decomposition for one (gate, parameter) pair.

    The displacement-r and squeezing-r rules take an arbitrary nonzero real
    shift s; the angle rules use +-pi/2 with weight 1/2.
    """
    pair = (kind, param_name)
    if pair in (("R", "phi"), ("D", "phi"), ("BS", "theta"), ("BS", "phi")):
        return CVShiftRule(((0.5, _HALF_PI), (-0.5, -_HALF_PI)))
    if pair == ("D", "r"):
        if s == 0.0:
            raise CircuitValidationError("free shift s must be nonzero")
        return CVShiftRule(((1.0 / (2.0 * s), s), (-1.0 / (2.0 * s), -s)), free_shift=s)
    if pair == ("S", "r"):
        if s == 0.0:
            raise CircuitValidationError("free shift s must be nonzero")
        w = 1.0 / (2.0 * math.sinh(s))
        return CVShiftRule(((w, s), (-w, -s)), free_shift=s)
    raise NoShiftRule(f"no shift rule for parameter {param_name!r} of gate {kind}")


def _occurrence_rule(circuit: CircuitIR, occ, s: float) -> CVShiftRule:
    gate = circuit.gates[occ.gate]
    gdef = GATE_DEFS[gate.kind]
    if occ.arg not in gdef.diff_args:
        raise NoShiftRule(
            f"no shift rule for parameter {gdef.arg_names[occ.arg]!r} of gate "
            f"{gate.label()}"
        )
    return cv_shift_rule(gate.kind, gdef.arg_names[occ.arg], s)


def _check_cv(circuit: CircuitIR) -> None:
    if circuit.platform != CV:
        raise CircuitValidationError("cv gradient on a non-cv circuit")


def cv_gradient_circuit_shift(circuit: CircuitIR, theta, k: int, s: float = DEFAULT_SHIFT,
                              max_degree: int = DEFAULT_MAX_DEGREE,
                              counter: EvalCounter | None = None) -> float:
    """Circuit-level CV shift rule: whole-circuit evaluations only.

    Requires a first-degree observable and no non-Gaussian gate anywhere
    after a differentiated occurrence.
    """
    _check_cv(circuit)
    if circuit.observable.poly.degree > 1:
        raise DegreeTooHigh(
            f"observable degree {circuit.observable.poly.degree} exceeds 1; "
            f"the circuit-level shift rule needs a first-degree observable"
        )
    total = 0.0
    for occ in occurrences(circuit, k):
        rule = _occurrence_rule(circuit, occ, s)
        for later in circuit.gates[occ.gate + 1:]:
            if not later.gate_def.gaussian:
                raise NonGaussianAfterGate(later.label())
        for gamma, shift in rule.terms:
            total += occ.coeff * gamma * cv_expectation(
                circuit, theta, max_degree=max_degree,
                shift=(occ.gate, occ.arg, shift), counter=counter,
            )
    return total


def _derivative_action_matrix(circuit: CircuitIR, occ, theta, rule: CVShiftRule) -> np.ndarray:
    """Matrix-level derivative of the occurrence's gate: the rule combination
    of shifted local matrices, embedded with zeros outside the gate block."""
    gate = circuit.gates[occ.gate]
    values = [resolve(a, theta) for a in gate.args]
    n = circuit.wire_count
    local = np.zeros((2 * len(gate.wires) + 1,) * 2)
    for gamma, shift in rule.terms:
        shifted = list(values)
        shifted[occ.arg] += shift
        local += gamma * gaussian_matrix(gate.kind, shifted).matrix
    out = np.zeros((2 * n + 1, 2 * n + 1))
    idx = [0]
    for w in gate.wires:
        idx.extend((1 + 2 * w, 2 + 2 * w))
    out[np.ix_(idx, idx)] = local
    return out


def _conjugate_derivative(poly: QuadPolynomial, matrix: np.ndarray,
                          deriv_matrix: np.ndarray) -> QuadPolynomial:
    """d/dmu of the conjugation of poly: Leibniz rule over each monomial's
    factors, one factor at a time mapped through the derivative matrix."""
    n = poly.n_modes
    out = QuadPolynomial.zero(n)
    images: dict = {}
    deriv_images: dict = {}
    for mono, coeff in poly.terms.items():
        factors = mono.factors()
        for j in range(len(factors)):
            acc = QuadPolynomial.identity(n, coeff)
            for i, factor in enumerate(factors):
                table, source = (deriv_images, deriv_matrix) if i == j else (images, matrix)
                img = table.get(factor)
                if img is None:
                    img = first_degree_image(source, factor[0], factor[1], n)
                    table[factor] = img
                acc = acc * img
            out = out + acc
    return out


def cv_gradient_heisenberg(circuit: CircuitIR, theta, k: int, s: float = DEFAULT_SHIFT,
                           max_degree: int = DEFAULT_MAX_DEGREE,
                           counter: EvalCounter | None = None) -> float:
    """Matrix-level CV gradient with the product rule for higher degrees.

    The differentiated gate must be Gaussian; gates after it may include the
    cubic phase within the degree cap.
    """
    _check_cv(circuit)
    n = circuit.wire_count
    total = 0.0
    for occ in occurrences(circuit, k):
        gate = circuit.gates[occ.gate]
        if not gate.gate_def.gaussian:
            raise NoShiftRule(
                f"no shift rule for the non-Gaussian gate {gate.label()}"
            )
        rule = _occurrence_rule(circuit, occ, s)
        poly = circuit.observable.poly
        for pos in range(len(circuit.gates) - 1, occ.gate, -1):
            poly = conjugate(poly, gate_action(circuit.gates[pos], theta, n), max_degree)
        gate_matrix = gate_action(gate, theta, n).matrix
        deriv = _derivative_action_matrix(circuit, occ, theta, rule)
        poly = _conjugate_derivative(poly, gate_matrix, deriv)
        for pos in range(occ.gate - 1, -1, -1):
            poly = conjugate(poly, gate_action(circuit.gates[pos], theta, n), max_degree)
        if counter is not None:
            counter.add()
        value = poly.vacuum_expectation()
        total += occ.coeff * value.real
    return total


def cv_finite_difference(circuit: CircuitIR, theta, k: int, delta: float = DEFAULT_DELTA,
                         max_degree: int = DEFAULT_MAX_DEGREE,
                         counter: EvalCounter | None = None) -> float:
    """Central difference of the cv expectation over theta[k]."""
    if delta <= 0:
        raise CircuitValidationError("finite-difference delta must be positive")
    _check_cv(circuit)
    plus = np.array(theta, dtype=float)
    minus = plus.copy()
    plus[k] += delta / 2.0
    minus[k] -= delta / 2.0
    f_plus = cv_expectation(circuit, plus, max_degree=max_degree, counter=counter)
    f_minus = cv_expectation(circuit, minus, max_degree=max_degree, counter=counter)
    return (f_plus - f_minus) / delta
