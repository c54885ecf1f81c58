"""Gradient method dispatch and the hybrid gradient-descent loop.

Auto resolution per parameter: qubit circuits use the parameter-shift rule
when every referenced generator has at most two distinct eigenvalues and
fall back to the ancilla LCU route otherwise; cv circuits use the
circuit-level shift rule when its preconditions hold and the matrix-level
product rule otherwise.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import cv_grad, lcu, qubit_grad
from .errors import CircuitValidationError
from .heisenberg import DEFAULT_MAX_DEGREE, cv_expectation
from .ir import GATE_DEFS, QUBIT, CircuitIR, occurrences
from .simulator import EvalCounter, evaluate, gate_generator, sample_expectation


class GradMethod(str, Enum):
    SHIFT = "shift"
    LCU = "lcu"
    EXACT = "exact"
    FINITE_DIFF = "fd"
    CV_SHIFT = "cvshift"
    CV_HEISENBERG = "cvheisenberg"
    AUTO = "auto"


_QUBIT_METHODS = {GradMethod.SHIFT, GradMethod.LCU, GradMethod.EXACT, GradMethod.FINITE_DIFF}
_CV_METHODS = {GradMethod.CV_SHIFT, GradMethod.CV_HEISENBERG, GradMethod.FINITE_DIFF}


@dataclass(frozen=True)
class ParamAnalysis:
    """Per-parameter dispatch decision with the reasoning behind it."""

    index: int
    method: GradMethod
    reason: str
    occurrences: tuple[dict, ...]


@dataclass(frozen=True)
class GradResult:
    gradient: np.ndarray
    per_param_method: tuple[str, ...]
    per_param_evals: tuple[int, ...]
    evaluations: int
    stderr: np.ndarray | None = None


@dataclass(frozen=True)
class OptStep:
    step: int
    theta: tuple[float, ...]
    value: float
    gradient: tuple[float, ...]
    evaluations: int


@dataclass(frozen=True)
class OptTrace:
    steps: tuple[OptStep, ...]
    per_param_method: tuple[str, ...]
    evaluations: int

    @property
    def final(self) -> OptStep:
        return self.steps[-1]


def objective(circuit: CircuitIR, theta, max_degree: int = DEFAULT_MAX_DEGREE,
              counter: EvalCounter | None = None) -> float:
    """Exact expectation value on either platform."""
    if circuit.platform == QUBIT:
        return evaluate(circuit, theta, counter=counter)
    return cv_expectation(circuit, theta, max_degree=max_degree, counter=counter)


def analyze_parameter(circuit: CircuitIR, theta, k: int,
                      shift_s: float = cv_grad.DEFAULT_SHIFT) -> ParamAnalysis:
    """Resolve the Auto method for one parameter and collect diagnostics."""
    occs = occurrences(circuit, k)
    details = []
    if circuit.platform == QUBIT:
        all_applicable = True
        reasons = []
        for occ in occs:
            gate = circuit.gates[occ.gate]
            spectrum = qubit_grad.analyze_generator(gate_generator(gate, theta))
            details.append(
                {
                    "gate": occ.gate,
                    "kind": gate.label(),
                    "coefficient": occ.coeff,
                    "eigenvalue_clusters": len(spectrum.distinct_eigenvalues),
                    "r": spectrum.r,
                    "shift": spectrum.shift,
                }
            )
            if not spectrum.applicable:
                all_applicable = False
                reasons.append(
                    f"{gate.label()}: {len(spectrum.distinct_eigenvalues)} eigenvalue "
                    f"clusters; shift rule inapplicable"
                )
        if not occs:
            return ParamAnalysis(k, GradMethod.SHIFT, "parameter unused; gradient is 0", ())
        if all_applicable:
            return ParamAnalysis(
                k, GradMethod.SHIFT,
                "all generators have at most 2 eigenvalue clusters; shift rule selected",
                tuple(details),
            )
        return ParamAnalysis(
            k, GradMethod.LCU, "; ".join(reasons) + "; LCU selected", tuple(details)
        )

    # cv: circuit-level shift rule when preconditions hold, matrix route otherwise
    reasons = []
    applicable = True
    if circuit.observable.poly.degree > 1:
        applicable = False
        reasons.append(f"observable degree {circuit.observable.poly.degree} > 1")
    for occ in occs:
        gate = circuit.gates[occ.gate]
        gdef = GATE_DEFS[gate.kind]
        entry = {"gate": occ.gate, "kind": gate.label(), "coefficient": occ.coeff}
        try:
            rule = cv_grad.cv_shift_rule(gate.kind, gdef.arg_names[occ.arg], shift_s) \
                if occ.arg in gdef.diff_args else None
        except cv_grad.NoShiftRule:  # pragma: no cover - diff_args filters first
            rule = None
        if rule is None:
            entry["rule"] = None
            applicable = False
            reasons.append(f"{gate.label()}: no shift rule for this parameter")
        else:
            entry["rule"] = [list(t) for t in rule.terms]
            entry["free_shift"] = rule.free_shift
        blocking = next(
            (g.label() for g in circuit.gates[occ.gate + 1:] if not g.gate_def.gaussian),
            None,
        )
        if blocking is not None:
            applicable = False
            reasons.append(f"non-Gaussian gate {blocking} after {gate.label()}")
        details.append(entry)
    if not occs:
        return ParamAnalysis(k, GradMethod.CV_SHIFT, "parameter unused; gradient is 0", ())
    if applicable:
        return ParamAnalysis(
            k, GradMethod.CV_SHIFT,
            "first-degree observable with Gaussian tail; circuit-level shift rule selected",
            tuple(details),
        )
    return ParamAnalysis(
        k, GradMethod.CV_HEISENBERG,
        "; ".join(reasons) + "; matrix-level product rule selected",
        tuple(details),
    )


def _resolve(circuit: CircuitIR, theta, k: int, method: GradMethod,
             shift_s: float) -> GradMethod:
    if method != GradMethod.AUTO:
        allowed = _QUBIT_METHODS if circuit.platform == QUBIT else _CV_METHODS
        if method not in allowed:
            raise CircuitValidationError(
                f"method {method.value!r} does not apply to {circuit.platform} circuits"
            )
        return method
    return analyze_parameter(circuit, theta, k, shift_s).method


def grad(circuit: CircuitIR, theta, method: GradMethod | str = GradMethod.AUTO, *,
         shots: int | None = None, seed: int | None = None,
         delta: float = qubit_grad.DEFAULT_DELTA, shift_s: float = cv_grad.DEFAULT_SHIFT,
         max_degree: int = DEFAULT_MAX_DEGREE) -> GradResult:
    """Full gradient with per-parameter method resolution and evaluation counts."""
    method = GradMethod(method)
    theta = np.asarray(theta, dtype=float)
    if len(theta) != circuit.param_count:
        raise CircuitValidationError(
            f"expected {circuit.param_count} parameter values, got {len(theta)}"
        )
    gradient = np.zeros(circuit.param_count)
    stderr = np.zeros(circuit.param_count) if shots is not None else None
    methods = []
    evals = []
    rng = np.random.default_rng(seed) if shots is not None else None
    for k in range(circuit.param_count):
        resolved = _resolve(circuit, theta, k, method, shift_s)
        counter = EvalCounter()
        if shots is not None:
            if resolved != GradMethod.SHIFT:
                raise CircuitValidationError(
                    f"shot-based gradients support only the shift rule, not "
                    f"{resolved.value!r}"
                )
            gradient[k], stderr[k] = qubit_grad.shift_rule_gradient_sampled(
                circuit, theta, k, shots, seed=int(rng.integers(2**63)), counter=counter
            )
        elif resolved == GradMethod.SHIFT:
            gradient[k] = qubit_grad.shift_rule_gradient(circuit, theta, k, counter=counter)
        elif resolved == GradMethod.LCU:
            gradient[k] = lcu.lcu_gradient(circuit, theta, k, counter=counter)
        elif resolved == GradMethod.EXACT:
            gradient[k] = qubit_grad.exact_gradient(circuit, theta, k, counter=counter)
        elif resolved == GradMethod.FINITE_DIFF:
            if circuit.platform == QUBIT:
                gradient[k] = qubit_grad.finite_difference(circuit, theta, k, delta, counter=counter)
            else:
                gradient[k] = cv_grad.cv_finite_difference(
                    circuit, theta, k, delta, max_degree=max_degree, counter=counter
                )
        elif resolved == GradMethod.CV_SHIFT:
            gradient[k] = cv_grad.cv_gradient_circuit_shift(
                circuit, theta, k, shift_s, max_degree=max_degree, counter=counter
            )
        elif resolved == GradMethod.CV_HEISENBERG:
            gradient[k] = cv_grad.cv_gradient_heisenberg(
                circuit, theta, k, shift_s, max_degree=max_degree, counter=counter
            )
        else:  # pragma: no cover
            raise CircuitValidationError(f"unhandled method {resolved!r}")
        methods.append(resolved.value)
        evals.append(counter.count)
    return GradResult(gradient, tuple(methods), tuple(evals), sum(evals), stderr)


def optimize(circuit: CircuitIR, theta0, method: GradMethod | str = GradMethod.AUTO, *,
             learning_rate: float = 0.1, steps: int = 100,
             shots: int | None = None, seed: int | None = None,
             delta: float = qubit_grad.DEFAULT_DELTA,
             shift_s: float = cv_grad.DEFAULT_SHIFT,
             max_degree: int = DEFAULT_MAX_DEGREE) -> OptTrace:
    """Plain gradient descent theta <- theta - lr * grad(theta).

    The trace records steps+1 points (initial point included); deterministic
    for exact gradients, and for sampled gradients when a seed is given.
    """
    if learning_rate <= 0:
        raise CircuitValidationError("learning rate must be positive")
    if steps < 0:
        raise CircuitValidationError("steps must be >= 0")
    theta = np.asarray(theta0, dtype=float).copy()
    rng = np.random.default_rng(seed)
    records = []
    total_evals = 0
    methods: tuple[str, ...] = ()
    for t in range(steps + 1):
        step_seed = int(rng.integers(2**63)) if shots is not None else None
        counter = EvalCounter()
        if shots is not None:
            value, _ = sample_expectation(circuit, theta, shots, seed=step_seed, counter=counter)
        else:
            value = objective(circuit, theta, max_degree=max_degree, counter=counter)
        result = grad(circuit, theta, method, shots=shots,
                      seed=int(rng.integers(2**63)) if shots is not None else None,
                      delta=delta, shift_s=shift_s, max_degree=max_degree)
        methods = result.per_param_method
        step_evals = counter.count + result.evaluations
        total_evals += step_evals
        records.append(OptStep(t, tuple(theta), value, tuple(result.gradient), step_evals))
        if t < steps:
            theta = theta - learning_rate * result.gradient
    return OptTrace(tuple(records), methods, total_evals)
