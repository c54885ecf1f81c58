"""CV gradient tests: shift decompositions, circuit-level rule, product rule."""
import numpy as np
import pytest

from qgrad.cv_grad import (
    cv_finite_difference,
    cv_gradient_circuit_shift,
    cv_gradient_heisenberg,
    cv_shift_rule,
)
from qgrad.errors import DegreeTooHigh, NonGaussianAfterGate, NoShiftRule
from qgrad.heisenberg import cv_expectation, gaussian_matrix
from qgrad.ir import parse_circuit

from builders import random_gaussian_circuit

# hand-coded analytic derivatives of the gate matrices (independent of the rules)
def _analytic_derivative(kind, param_name, values):
    eps = 1e-6  # only used for documentation; derivatives below are exact
    del eps
    if kind == "R":
        (phi,) = values
        c, s = np.cos(phi), np.sin(phi)
        return np.array([[0, 0, 0], [0, -s, -c], [0, c, -s]])
    if kind == "D":
        r, phi = values
        if param_name == "r":
            return np.array([[0, 0, 0], [2 * np.cos(phi), 0, 0], [2 * np.sin(phi), 0, 0]])
        return np.array([[0, 0, 0], [-2 * r * np.sin(phi), 0, 0], [2 * r * np.cos(phi), 0, 0]])
    if kind == "S":
        (r,) = values
        return np.diag([0.0, -np.exp(-r), np.exp(r)])
    if kind == "BS":
        theta, phi = values
        ct, st = np.cos(theta), np.sin(theta)
        cp, sp = np.cos(phi), np.sin(phi)
        if param_name == "theta":
            da, db = cp * ct, sp * ct
            return np.array(
                [
                    [0, 0, 0, 0, 0],
                    [0, -st, 0, -da, -db],
                    [0, 0, -st, db, -da],
                    [0, da, -db, -st, 0],
                    [0, db, da, 0, -st],
                ]
            )
        da, db = -sp * st, cp * st
        return np.array(
            [
                [0, 0, 0, 0, 0],
                [0, 0, 0, -da, -db],
                [0, 0, 0, db, -da],
                [0, da, -db, 0, 0],
                [0, db, da, 0, 0],
            ]
        )
    raise ValueError(kind)


ALL_RULES = [("R", "phi", 1), ("D", "r", 2), ("D", "phi", 2), ("S", "r", 1),
             ("BS", "theta", 2), ("BS", "phi", 2)]


class TestShiftRules:
    def test_squeezing_rule_terms(self):
        rule = cv_shift_rule("S", "r", s=0.5)
        w = 1.0 / (2.0 * np.sinh(0.5))
        assert rule.terms == ((w, 0.5), (-w, -0.5))
        assert rule.free_shift == 0.5

    def test_rotation_rule_terms(self):
        rule = cv_shift_rule("R", "phi")
        assert rule.terms == ((0.5, np.pi / 2), (-0.5, -np.pi / 2))

    def test_squeezing_identity_exact(self):
        rule = cv_shift_rule("S", "r", s=1.0)
        r = 0.3
        combo = sum(g * gaussian_matrix("S", (r + sh,)).matrix for g, sh in rule.terms)
        assert np.max(np.abs(combo - _analytic_derivative("S", "r", (r,)))) < 1e-12

    @pytest.mark.parametrize("kind,param,n_params", ALL_RULES)
    def test_all_rules_match_analytic_derivatives(self, kind, param, n_params):
        rng = np.random.default_rng(abs(hash((kind, param))) % 2**32)
        names = {"R": ("phi",), "D": ("r", "phi"), "S": ("r",), "BS": ("theta", "phi")}[kind]
        slot = names.index(param)
        for _ in range(100):
            values = rng.uniform(-2.0, 2.0, n_params)
            s = float(rng.uniform(0.1, 2.0))
            rule = cv_shift_rule(kind, param, s)
            combo = np.zeros_like(gaussian_matrix(kind, values).matrix)
            for gamma, shift in rule.terms:
                shifted = list(values)
                shifted[slot] += shift
                combo = combo + gamma * gaussian_matrix(kind, shifted).matrix
            target = _analytic_derivative(kind, param, values)
            assert np.max(np.abs(combo - target)) < 1e-12

    def test_cubic_phase_has_no_rule(self):
        with pytest.raises(NoShiftRule):
            cv_shift_rule("CUBICPHASE", "gamma")


class TestCircuitShift:
    def test_displacement_gradient(self):
        c = parse_circuit("platform cv\nwires 1\ngate D 0 th[0] 0.0\nobserve 1.0 x0\n")
        assert cv_gradient_circuit_shift(c, [0.4], 0) == pytest.approx(2.0, abs=1e-12)

    def test_rotated_displacement_phi_gradient(self):
        c = parse_circuit(
            "platform cv\nwires 1\ngate D 0 th[0] 0.0\ngate R 0 th[1]\nobserve 1.0 x0\n"
        )
        r, phi = 0.4, 0.9
        assert cv_gradient_circuit_shift(c, [r, phi], 1) == pytest.approx(
            -2 * r * np.sin(phi), abs=1e-12
        )

    def test_degree_two_observable_refused(self):
        c = parse_circuit("platform cv\nwires 1\ngate S 0 th[0]\nobserve 1.0 x0^2\n")
        with pytest.raises(DegreeTooHigh):
            cv_gradient_circuit_shift(c, [0.1], 0)

    def test_non_gaussian_after_gate_refused(self):
        c = parse_circuit(
            "platform cv\nwires 1\ngate D 0 th[0] 0.0\ngate CUBICPHASE 0 0.1\n"
            "observe 1.0 x0\n"
        )
        with pytest.raises(NonGaussianAfterGate) as err:
            cv_gradient_circuit_shift(c, [0.3], 0)
        assert "CUBICPHASE" in str(err.value)

    def test_cubic_parameter_refused(self):
        c = parse_circuit(
            "platform cv\nwires 1\ngate CUBICPHASE 0 th[0]\nobserve 1.0 x0\n"
        )
        with pytest.raises(NoShiftRule):
            cv_gradient_circuit_shift(c, [0.1], 0)

    def test_matches_heisenberg_on_random_degree_one(self):
        rng = np.random.default_rng(79)
        for _ in range(30):
            c = random_gaussian_circuit(rng, degree_one_obs=True)
            theta = rng.uniform(-0.8, 0.8, c.param_count)
            for k in range(c.param_count):
                a = cv_gradient_circuit_shift(c, theta, k)
                b = cv_gradient_heisenberg(c, theta, k)
                assert a == pytest.approx(b, abs=1e-10)
                fd = cv_finite_difference(c, theta, k)
                assert a == pytest.approx(fd, abs=1e-6)


class TestHeisenbergGradient:
    def test_squeezing_on_x_squared(self):
        c = parse_circuit("platform cv\nwires 1\ngate S 0 th[0]\nobserve 1.0 x0^2\n")
        assert cv_gradient_heisenberg(c, [0.1], 0) == pytest.approx(
            -2 * np.exp(-0.2), abs=1e-10
        )
        assert cv_finite_difference(c, [0.1], 0) == pytest.approx(
            -2 * np.exp(-0.2), abs=1e-7
        )

    def test_naive_scalar_shift_fails_on_degree_two(self):
        # the negative witness: applying the matrix rule's scalar combination
        # to whole-circuit values is wrong beyond first degree
        c = parse_circuit("platform cv\nwires 1\ngate S 0 th[0]\nobserve 1.0 x0^2\n")
        r, s = 0.1, 1.0
        w = 1.0 / (2.0 * np.sinh(s))
        naive = w * (cv_expectation(c, [r + s]) - cv_expectation(c, [r - s]))
        true = cv_gradient_heisenberg(c, [r], 0)
        assert abs(naive - true) > 0.1
        assert true == pytest.approx(-2 * np.exp(-2 * r), abs=1e-10)

    def test_free_shift_independence(self):
        c = parse_circuit(
            "platform cv\nwires 1\ngate D 0 th[0] 0.4\ngate S 0 th[1]\nobserve 1.0 x0^2\n"
        )
        theta = [0.3, 0.2]
        for k in range(2):
            values = [cv_gradient_heisenberg(c, theta, k, s=s) for s in (0.3, 1.0, 1.7)]
            assert max(values) - min(values) < 1e-10

    def test_gaussian_param_before_cubic_matches_fd(self):
        c = parse_circuit(
            "platform cv\nwires 1\ngate S 0 th[0]\ngate CUBICPHASE 0 th[1]\n"
            "observe 1.0 p0^2\n"
        )
        theta = [0.3, 0.1]
        assert cv_gradient_heisenberg(c, theta, 0) == pytest.approx(
            cv_finite_difference(c, theta, 0), abs=1e-6
        )

    def test_cubic_parameter_raises_but_fd_works(self):
        c = parse_circuit(
            "platform cv\nwires 1\ngate S 0 th[0]\ngate CUBICPHASE 0 th[1]\n"
            "observe 1.0 p0^2\n"
        )
        theta = [0.3, 0.1]
        with pytest.raises(NoShiftRule):
            cv_gradient_heisenberg(c, theta, 1)
        assert np.isfinite(cv_finite_difference(c, theta, 1))

    def test_even_observable_zero_r_gradient(self):
        # at r=0 the displacement gradient of an even observable vanishes
        c = parse_circuit("platform cv\nwires 1\ngate D 0 th[0] 0.0\nobserve 1.0 x0^2\n")
        assert cv_gradient_heisenberg(c, [0.0], 0) == pytest.approx(0.0, abs=1e-10)

    def test_s2_composite_gradients_match_fd(self):
        c = parse_circuit(
            "platform cv\nwires 1\nparams 2\ngate S2 0 th[0] th[1]\nobserve 1.0 x0^2\n"
        )
        theta = [0.25, 0.8]
        for k in range(2):
            assert cv_gradient_heisenberg(c, theta, k) == pytest.approx(
                cv_finite_difference(c, theta, k), abs=1e-6
            )

    def test_matches_fd_on_random_degree_two(self):
        rng = np.random.default_rng(83)
        for _ in range(20):
            c = random_gaussian_circuit(rng, degree_one_obs=False)
            theta = rng.uniform(-0.6, 0.6, c.param_count)
            for k in range(c.param_count):
                assert cv_gradient_heisenberg(c, theta, k) == pytest.approx(
                    cv_finite_difference(c, theta, k), abs=1e-6
                )


class TestCvFiniteDifference:
    def test_unused_parameter(self):
        c = parse_circuit(
            "platform cv\nwires 1\nparams 2\ngate S 0 th[0]\nobserve 1.0 x0^2\n"
        )
        assert cv_finite_difference(c, [0.1, 0.9], 1) == 0.0

    def test_squeezing_value(self):
        c = parse_circuit("platform cv\nwires 1\ngate S 0 th[0]\nobserve 1.0 x0^2\n")
        assert cv_finite_difference(c, [0.1], 0, delta=1e-4) == pytest.approx(
            -2 * np.exp(-0.2), abs=1e-7
        )
