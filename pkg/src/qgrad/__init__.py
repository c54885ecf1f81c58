"""qgrad: exact gradient recipes for simulated variational quantum circuits.

Qubit circuits get the two-term parameter-shift rule, an ancilla-based
linear-combination-of-unitaries route for arbitrary gates, an
operator-insertion oracle and finite differences. Continuous-variable
circuits get matrix-level shift decompositions in the Heisenberg picture,
a circuit-level shift rule for first-degree observables, and the product
rule for higher degrees. A plain gradient-descent loop and a CLI sit on top.
"""

from .cv_grad import (
    CVShiftRule,
    cv_finite_difference,
    cv_gradient_circuit_shift,
    cv_gradient_heisenberg,
    cv_shift_rule,
)
from .dispatch import (
    GradMethod,
    GradResult,
    OptStep,
    OptTrace,
    analyze_parameter,
    grad,
    objective,
    optimize,
)
from .errors import (
    CircuitSyntaxError,
    CircuitValidationError,
    DegreeBoundExceeded,
    DegreeTooHigh,
    NonGaussianAfterGate,
    NoShiftRule,
    NumericalError,
    QGradError,
    ShiftRuleInapplicable,
)
from .heisenberg import (
    HeisenbergMatrix,
    LinearAction,
    SubstitutionAction,
    conjugate,
    cv_expectation,
    embed_matrix,
    gate_action,
    gaussian_matrix,
    heisenberg_evolve,
    product_matrix,
    vacuum_expectation,
)
from .ir import (
    Affine,
    CircuitIR,
    CircuitSplit,
    CVObservable,
    GateSpec,
    Literal,
    MatrixObservable,
    Occurrence,
    PauliObservable,
    occurrences,
    parse_circuit,
    print_circuit,
    split_at,
)
from .lcu import (
    AncillaRunResult,
    UnitaryDecomposition,
    combine,
    decompose_derivative,
    lcu_branch_closed_form,
    lcu_circuit_run,
    lcu_gradient,
)
from .quad_algebra import HBAR, QuadMonomial, QuadPolynomial, canonicalize
from .qubit_grad import (
    GeneratorSpectrum,
    ShiftRule,
    analyze_generator,
    exact_gradient,
    finite_difference,
    shift_rule_gradient,
    shift_rule_gradient_sampled,
)
from .simulator import (
    EvalCounter,
    evaluate,
    expectation,
    gate_unitary,
    run,
    sample_expectation,
)

__version__ = "0.1.0"
