"""Shift-rule, exact-insertion and finite-difference gradient tests."""
import numpy as np
import pytest

from qgrad.errors import ShiftRuleInapplicable
from qgrad.ir import (
    Affine,
    CircuitIR,
    GateSpec,
    PauliObservable,
    parse_circuit,
)
from qgrad.qubit_grad import (
    analyze_generator,
    exact_gradient,
    finite_difference,
    shift_rule_gradient,
    shift_rule_gradient_sampled,
)
from qgrad.simulator import PAULI, EvalCounter, gate_generator

from builders import random_shiftable_circuit

RY_TEXT = "platform qubit\nwires 1\ngate RY 0 th[0]\nobserve 1.0 Z0\n"

CROSSRES_TEXT = (
    "platform qubit\nwires 2\ngate RY 0 0.4\n"
    "gate CROSSRES 0 1 th[0] 0.5 0.3\nobserve 1.0 Z0 + 0.5 X0X1\n"
)


class TestAnalyzeGenerator:
    def test_half_pauli(self):
        spec = analyze_generator(PAULI["Z"] / 2)
        assert spec.distinct_eigenvalues == pytest.approx((-0.5, 0.5))
        assert spec.r == pytest.approx(0.5)
        assert spec.shift == pytest.approx(np.pi / 2)
        assert spec.applicable

    def test_projector_spectrum_with_midpoint(self):
        spec = analyze_generator(np.diag([0.0, 0.0, 0.0, 1.0]).astype(complex))
        assert spec.distinct_eigenvalues == pytest.approx((0.0, 1.0))
        assert spec.r == pytest.approx(0.5)
        assert spec.midpoint == pytest.approx(0.5)
        assert spec.applicable

    def test_cross_resonance_not_applicable(self):
        circuit = parse_circuit(CROSSRES_TEXT)
        gen = gate_generator(circuit.gates[1], [0.0])
        spec = analyze_generator(gen)
        assert len(spec.distinct_eigenvalues) == 4
        assert not spec.applicable

    def test_scaling_consistency(self):
        rng = np.random.default_rng(13)
        g = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
        g = (g + g.conj().T) / 2
        base = analyze_generator(g)
        for c in (2.5, -0.7):
            scaled = analyze_generator(c * g)
            assert scaled.r == pytest.approx(abs(c) * base.r, rel=1e-12)
            assert scaled.shift == pytest.approx(base.shift / abs(c), rel=1e-12)

    def test_near_degenerate_clusters_merge(self):
        g = np.diag([0.5, 0.5 + 1e-12]).astype(complex)
        spec = analyze_generator(g)
        assert len(spec.distinct_eigenvalues) == 1
        assert spec.r is None


class TestShiftRule:
    def test_ry_closed_form(self):
        c = parse_circuit(RY_TEXT)
        assert shift_rule_gradient(c, [0.7], 0) == pytest.approx(-np.sin(0.7), abs=1e-12)
        assert shift_rule_gradient(c, [0.0], 0) == pytest.approx(0.0, abs=1e-12)

    def test_repeated_parameter_matches_exact(self):
        c = parse_circuit(
            "platform qubit\nwires 1\ngate RZ 0 th[0]\ngate H 0\ngate RY 0 th[0]\n"
            "observe 1.0 Z0\n"
        )
        theta = [0.41]
        assert shift_rule_gradient(c, theta, 0) == pytest.approx(
            exact_gradient(c, theta, 0), abs=1e-10
        )

    def test_inapplicable_names_gate(self):
        c = parse_circuit(CROSSRES_TEXT)
        with pytest.raises(ShiftRuleInapplicable) as err:
            shift_rule_gradient(c, [0.3], 0)
        assert err.value.n_eigenvalues == 4
        assert "CROSSRES" in str(err.value)

    def test_two_evaluations_per_occurrence(self):
        rng = np.random.default_rng(23)
        for _ in range(10):
            c = random_shiftable_circuit(rng)
            theta = rng.uniform(-np.pi, np.pi, c.param_count)
            for k in range(c.param_count):
                from qgrad.ir import occurrences
                counter = EvalCounter()
                shift_rule_gradient(c, theta, k, counter=counter)
                assert counter.count == 2 * len(occurrences(c, k))

    def test_exactness_on_random_circuits(self):
        rng = np.random.default_rng(29)
        worst = 0.0
        for _ in range(60):
            c = random_shiftable_circuit(rng)
            theta = rng.uniform(-np.pi, np.pi, c.param_count)
            for k in range(c.param_count):
                diff = abs(shift_rule_gradient(c, theta, k) - exact_gradient(c, theta, k))
                worst = max(worst, diff)
        assert worst < 1e-9

    def test_midpoint_shift_invariance(self):
        # exp(-i mu P11) versus the traceless-shifted generator P11 - I/2
        shifted = np.diag([0.0, 0.0, 0.0, 1.0]).astype(complex) - np.eye(4) / 2
        obs = PauliObservable(((1.0, ((0, "Z"),)), (0.4, ((1, "X"),))))
        binding = (Affine(1.0, 0, 0.0),)
        prep = (GateSpec("H", (0,)), GateSpec("RY", (1,), (Affine(1.0, 0, 0.1),)))
        plain = CircuitIR("qubit", 2, prep + (GateSpec("EXP11", (0, 1), binding),), obs, 1)
        traceless = CircuitIR(
            "qubit", 2, prep + (GateSpec("EXPG", (0, 1), binding, matrix=shifted),), obs, 1
        )
        theta = [0.77]
        assert shift_rule_gradient(plain, theta, 0) == pytest.approx(
            shift_rule_gradient(traceless, theta, 0), abs=1e-10
        )

    def test_generator_rescaling_leaves_gradient_unchanged(self):
        # (G, mu) -> (cG, mu/c) is the same physical circuit; chain rule compensates
        rng = np.random.default_rng(31)
        g = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
        g = (g + g.conj().T) / 2
        obs = PauliObservable(((1.0, ((0, "Z"),)),))
        scale = 1.9
        base = CircuitIR(
            "qubit", 1, (GateSpec("EXPG", (0,), (Affine(1.0, 0, 0.0),), matrix=g),), obs, 1
        )
        rescaled = CircuitIR(
            "qubit", 1,
            (GateSpec("EXPG", (0,), (Affine(1.0 / scale, 0, 0.0),), matrix=scale * g),),
            obs, 1,
        )
        theta = [0.63]
        assert shift_rule_gradient(base, theta, 0) == pytest.approx(
            shift_rule_gradient(rescaled, theta, 0), abs=1e-10
        )


class TestExactGradient:
    def test_ry_closed_form(self):
        c = parse_circuit(RY_TEXT)
        assert exact_gradient(c, [0.7], 0) == pytest.approx(-np.sin(0.7), abs=1e-12)

    def test_unused_parameter(self):
        c = parse_circuit(
            "platform qubit\nwires 1\nparams 2\ngate RY 0 th[0]\nobserve 1.0 Z0\n"
        )
        assert exact_gradient(c, [0.7, 0.2], 1) == 0.0

    def test_matches_finite_difference_on_crossres(self):
        c = parse_circuit(CROSSRES_TEXT)
        theta = [0.52]
        assert exact_gradient(c, theta, 0) == pytest.approx(
            finite_difference(c, theta, 0), abs=1e-6
        )


class TestFiniteDifference:
    def test_cosine_accuracy(self):
        c = parse_circuit(RY_TEXT)
        assert finite_difference(c, [0.7], 0, delta=1e-4) == pytest.approx(
            -np.sin(0.7), abs=1e-8
        )

    def test_constant_circuit(self):
        c = parse_circuit("platform qubit\nwires 1\nparams 1\ngate H 0\nobserve 1.0 Z0\n")
        assert finite_difference(c, [0.4], 0) == 0.0

    def test_quadratic_error_scaling(self):
        c = parse_circuit(RY_TEXT)
        exact = -np.sin(0.7)
        errors = [abs(finite_difference(c, [0.7], 0, delta=d) - exact)
                  for d in (1e-2, 1e-3, 1e-4)]
        # each decade of delta buys ~two decades of accuracy until the fp floor
        for bigger, smaller in zip(errors, errors[1:]):
            if bigger > 1e-9:
                assert smaller < bigger * 0.05

    def test_agreement_with_shift_rule(self):
        rng = np.random.default_rng(37)
        for _ in range(10):
            c = random_shiftable_circuit(rng, max_qubits=3)
            theta = rng.uniform(-np.pi, np.pi, c.param_count)
            for k in range(c.param_count):
                assert finite_difference(c, theta, k) == pytest.approx(
                    shift_rule_gradient(c, theta, k), abs=1e-6
                )


class TestSampledShiftRule:
    def test_deterministic_given_seed(self):
        c = parse_circuit(RY_TEXT)
        a = shift_rule_gradient_sampled(c, [0.7], 0, shots=1000, seed=5)
        b = shift_rule_gradient_sampled(c, [0.7], 0, shots=1000, seed=5)
        assert a == b

    def test_estimate_brackets_exact(self):
        c = parse_circuit(RY_TEXT)
        exact = -np.sin(0.7)
        estimate, stderr = shift_rule_gradient_sampled(c, [0.7], 0, shots=10**5, seed=19)
        assert abs(estimate - exact) < 5 * stderr
