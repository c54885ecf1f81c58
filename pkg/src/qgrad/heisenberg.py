"""Heisenberg-picture engine for continuous-variable circuits.

Gaussian gates act on the operator basis C = (1, x_1, p_1, ..., x_n, p_n)
through real (2n+1)x(2n+1) matrices M, row-acting: the conjugated operator is
C_i -> sum_j M_ij C_j. The cubic phase gate acts by polynomial substitution
(x -> x, p -> p + gamma*x^2) and may raise the observable degree, which is
capped at max_degree. Convention hbar = 2 throughout (see quad_algebra).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import CircuitValidationError, DegreeBoundExceeded, NumericalError
from .ir import CV, CircuitIR, GateSpec, resolve
from .quad_algebra import QuadPolynomial
from .simulator import EvalCounter

DEFAULT_MAX_DEGREE = 8
SYMPLECTIC_TOL = 1e-10
IMAG_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class HeisenbergMatrix:
    """Row-acting matrix of a Gaussian gate over (1, x_1, p_1, ...)."""

    matrix: np.ndarray
    label: str
    params: tuple[float, ...]

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        object.__setattr__(self, "matrix", m)
        size = m.shape[0]
        if m.shape != (size, size) or size % 2 != 1:
            raise CircuitValidationError(f"{self.label}: matrix must be (2n+1)x(2n+1)")
        if not np.array_equal(m[0], np.eye(size)[0]):
            raise NumericalError(f"{self.label}: first row must map identity to identity")
        block = m[1:, 1:]
        j = symplectic_form(size // 2)
        res = np.max(np.abs(block @ j @ block.T - j))
        if res > SYMPLECTIC_TOL:
            raise NumericalError(f"{self.label}: block deviates from symplectic by {res:.3e}")

    @property
    def n_modes(self) -> int:
        return self.matrix.shape[0] // 2


def symplectic_form(n_modes: int) -> np.ndarray:
    """Block-diagonal form J with [[0, 1], [-1, 0]] per mode (x, p ordering)."""
    j2 = np.array([[0.0, 1.0], [-1.0, 0.0]])
    out = np.zeros((2 * n_modes, 2 * n_modes))
    for m in range(n_modes):
        out[2 * m: 2 * m + 2, 2 * m: 2 * m + 2] = j2
    return out


def gaussian_matrix(kind: str, params) -> HeisenbergMatrix:
    """Heisenberg matrix of a Gaussian gate on its own modes."""
    params = tuple(float(p) for p in params)
    if kind == "R":
        (phi,) = params
        c, s = math.cos(phi), math.sin(phi)
        m = np.array([[1, 0, 0], [0, c, -s], [0, s, c]], dtype=float)
    elif kind == "D":
        r, phi = params
        m = np.array(
            [[1, 0, 0], [2 * r * math.cos(phi), 1, 0], [2 * r * math.sin(phi), 0, 1]],
            dtype=float,
        )
    elif kind == "S":
        (r,) = params
        m = np.diag([1.0, math.exp(-r), math.exp(r)])
    elif kind == "BS":
        theta, phi = params
        c = math.cos(theta)
        a = math.cos(phi) * math.sin(theta)
        b = math.sin(phi) * math.sin(theta)
        m = np.array(
            [
                [1, 0, 0, 0, 0],
                [0, c, 0, -a, -b],
                [0, 0, c, b, -a],
                [0, a, -b, c, 0],
                [0, b, a, 0, c],
            ],
            dtype=float,
        )
    else:
        raise CircuitValidationError(f"no Heisenberg matrix for gate kind {kind!r}")
    return HeisenbergMatrix(m, kind, params)


def embed_matrix(local: np.ndarray, wires, n_modes: int) -> np.ndarray:
    """Place a gate-local matrix into the (2n+1)-dimensional circuit basis."""
    out = np.eye(2 * n_modes + 1)
    idx = [0]
    for w in wires:
        idx.extend((1 + 2 * w, 2 + 2 * w))
    out[np.ix_(idx, idx)] = local
    return out


# -- gate actions ----------------------------------------------------------


@dataclass(frozen=True, eq=False)
class LinearAction:
    """Global row-acting matrix of a Gaussian gate."""

    matrix: np.ndarray
    label: str


@dataclass(frozen=True, eq=False)
class SubstitutionAction:
    """Per-quadrature replacement polynomials; unlisted quadratures map to themselves."""

    rules: dict
    label: str


GateAction = LinearAction | SubstitutionAction


def gate_action(gate: GateSpec, theta, n_modes: int,
                shift: tuple[int, float] | None = None) -> GateAction:
    """Resolved action of a CV gate; shift=(arg, delta) nudges one argument."""
    values = [resolve(a, theta) for a in gate.args]
    if shift is not None:
        values[shift[0]] += shift[1]
    if gate.kind == "CUBICPHASE":
        gamma = values[0]
        mode = gate.wires[0]
        x = QuadPolynomial.quadrature(n_modes, mode, "x")
        p = QuadPolynomial.quadrature(n_modes, mode, "p")
        return SubstitutionAction({(mode, "p"): p + gamma * (x * x)}, gate.label())
    local = gaussian_matrix(gate.kind, values)
    return LinearAction(embed_matrix(local.matrix, gate.wires, n_modes), gate.label())


def first_degree_image(matrix: np.ndarray, mode: int, ch: str,
                       n_modes: int) -> QuadPolynomial:
    """Image of x_mode or p_mode under a row-acting global matrix."""
    row = matrix[1 + 2 * mode + (0 if ch == "x" else 1)]
    poly = QuadPolynomial.identity(n_modes, row[0]) if row[0] else QuadPolynomial.zero(n_modes)
    for m in range(n_modes):
        for off, c in ((0, "x"), (1, "p")):
            coeff = row[1 + 2 * m + off]
            if coeff:
                poly = poly + QuadPolynomial.quadrature(n_modes, m, c, coeff)
    return poly


def conjugate(poly: QuadPolynomial, action: GateAction,
              max_degree: int = DEFAULT_MAX_DEGREE) -> QuadPolynomial:
    """Conjugate a polynomial by a gate action.

    Conjugation is an algebra homomorphism: each first-degree factor is
    replaced by its image and the images are multiplied in word order.
    Linear actions never raise the degree; substitutions may, and hitting
    the cap is a hard error naming the gate.
    """
    n = poly.n_modes
    if isinstance(action, LinearAction):
        if action.matrix.shape[0] != 2 * n + 1:
            raise CircuitValidationError(
                f"{action.label}: matrix size does not match {n} modes"
            )
        images = {}

        def image(factor):
            if factor not in images:
                images[factor] = first_degree_image(action.matrix, factor[0], factor[1], n)
            return images[factor]
    else:
        identity_rules = action.rules

        def image(factor):
            rule = identity_rules.get(factor)
            if rule is None:
                return QuadPolynomial.quadrature(n, factor[0], factor[1])
            return rule

    out = QuadPolynomial.zero(n)
    for mono, coeff in poly.terms.items():
        acc = QuadPolynomial.identity(n, coeff)
        for factor in mono.factors():
            acc = acc * image(factor)
            if acc.degree > max_degree:
                raise DegreeBoundExceeded(action.label, acc.degree, max_degree)
        out = out + acc
    return out


def product_matrix(circuit: CircuitIR, theta,
                   shift: tuple[int, int, float] | None = None) -> np.ndarray:
    """Single global matrix of an all-Gaussian circuit (reverse-order product)."""
    n = circuit.wire_count
    total = np.eye(2 * n + 1)
    for pos, gate in enumerate(circuit.gates):
        if not gate.gate_def.gaussian:
            raise CircuitValidationError(
                f"product matrix needs an all-Gaussian circuit; {gate.label()} is not"
            )
        local_shift = (shift[1], shift[2]) if shift is not None and shift[0] == pos else None
        action = gate_action(gate, theta, n, shift=local_shift)
        total = action.matrix @ total
    return total


def heisenberg_evolve(obs: QuadPolynomial, circuit: CircuitIR, theta,
                      max_degree: int = DEFAULT_MAX_DEGREE,
                      shift: tuple[int, int, float] | None = None) -> QuadPolynomial:
    """Evolve the observable backwards through the circuit (last gate first)."""
    if circuit.platform != CV:
        raise CircuitValidationError("heisenberg evolution expects a cv circuit")
    poly = obs
    n = circuit.wire_count
    for pos in range(len(circuit.gates) - 1, -1, -1):
        gate = circuit.gates[pos]
        local_shift = (shift[1], shift[2]) if shift is not None and shift[0] == pos else None
        poly = conjugate(poly, gate_action(gate, theta, n, shift=local_shift), max_degree)
    return poly


def vacuum_expectation(poly: QuadPolynomial) -> complex:
    """<0|poly|0> on the multimode vacuum."""
    return poly.vacuum_expectation()


def cv_expectation(circuit: CircuitIR, theta, max_degree: int = DEFAULT_MAX_DEGREE,
                   shift: tuple[int, int, float] | None = None,
                   counter: EvalCounter | None = None) -> float:
    """Vacuum expectation of the evolved observable; must be real within 1e-10."""
    if circuit.platform != CV:
        raise CircuitValidationError("cv expectation on a non-cv circuit")
    evolved = heisenberg_evolve(circuit.observable.poly, circuit, theta,
                                max_degree=max_degree, shift=shift)
    if counter is not None:
        counter.add()
    value = vacuum_expectation(evolved)
    if abs(value.imag) > IMAG_TOL:
        raise NumericalError(f"cv expectation has imaginary residue {value.imag:.3e}")
    return float(value.real)
