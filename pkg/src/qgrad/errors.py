"""Exception hierarchy shared by all qgrad modules."""


class QGradError(Exception):
    """Base class for all qgrad errors."""


class CircuitSyntaxError(QGradError):
    """Malformed circuit text. Carries the 1-based line and column."""

    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


class CircuitValidationError(QGradError):
    """Structurally valid text that violates a semantic rule (unknown gate,
    wire out of range, platform mismatch, non-Hermitian observable, ...)."""


class ShiftRuleInapplicable(QGradError):
    """A differentiated gate's generator has more than two distinct eigenvalues."""

    def __init__(self, gate_label: str, n_eigenvalues: int):
        super().__init__(
            f"gate {gate_label}: generator has {n_eigenvalues} distinct "
            f"eigenvalues; the two-term shift rule does not apply"
        )
        self.gate_label = gate_label
        self.n_eigenvalues = n_eigenvalues


class NoShiftRule(QGradError):
    """No analytic shift rule exists for the requested gate parameter."""


class NonGaussianAfterGate(QGradError):
    """A non-Gaussian gate sits between the differentiated gate and the observable."""

    def __init__(self, gate_label: str):
        super().__init__(
            f"gate {gate_label} is non-Gaussian and follows the differentiated "
            f"gate; the circuit-level shift rule does not apply"
        )
        self.gate_label = gate_label


class DegreeTooHigh(QGradError):
    """Observable degree exceeds what the circuit-level shift rule supports."""


class DegreeBoundExceeded(QGradError):
    """Conjugation grew a polynomial past the configured degree cap."""

    def __init__(self, gate_label: str, degree: int, max_degree: int):
        super().__init__(
            f"gate {gate_label} raised the observable degree to {degree}, "
            f"above the cap {max_degree}"
        )
        self.gate_label = gate_label


class NumericalError(QGradError):
    """A numerical tolerance check failed (non-Hermitian input, imaginary
    residue, unitarity or reconstruction residual)."""
