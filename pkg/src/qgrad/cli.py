"""Command-line interface: eval | grad | sample | optimize | check.

Each command prints one JSON object on stdout with all floats rendered at
17 significant digits, so identical inputs (and seeds) give byte-identical
output. Human-readable errors go to stderr with exit codes 1 (parse or
validation), 2 (method inapplicable) and 3 (numerical failure).
"""
from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .dispatch import GradMethod, analyze_parameter, grad, objective, optimize
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
from .ir import QUBIT, parse_circuit
from .simulator import EvalCounter, sample_expectation

SCHEMA_VERSION = 1

_EXIT_CODES = (
    (CircuitSyntaxError, 1),
    (CircuitValidationError, 1),
    (ShiftRuleInapplicable, 2),
    (NoShiftRule, 2),
    (NonGaussianAfterGate, 2),
    (DegreeTooHigh, 2),
    (DegreeBoundExceeded, 3),
    (NumericalError, 3),
)


def _json_value(obj) -> str:
    """Serialize with deterministic %.17g floats."""
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return "%.17g" % float(obj)
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        inner = ", ".join(f"{json.dumps(str(k))}: {_json_value(v)}" for k, v in obj.items())
        return "{" + inner + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        return "[" + ", ".join(_json_value(v) for v in obj) + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _emit(document: dict) -> None:
    sys.stdout.write(_json_value(document) + "\n")


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse defaults to exit code 2; usage errors are code 1
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(1)


def _build_parser() -> _Parser:
    parser = _Parser(prog="qgrad", description="Gradients of variational quantum circuits.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, blurb in (
        ("eval", "evaluate the expectation value"),
        ("grad", "evaluate the expectation and its gradient"),
        ("sample", "shot-based estimate of the expectation"),
        ("optimize", "run gradient descent on the expectation"),
        ("check", "report the per-parameter differentiation method"),
    ):
        p = sub.add_parser(name, help=blurb)
        p.add_argument("file", metavar="FILE", help="circuit text file")
        p.add_argument("--params", default=None, metavar="v1,v2,...",
                       help="parameter values (default: all zeros)")
        p.add_argument("--method", default="auto",
                       choices=[m.value for m in GradMethod],
                       help="gradient method (default: auto)")
        p.add_argument("--shots", type=int, default=None, help="measurement shots")
        p.add_argument("--seed", type=int, default=None,
                       help="sampler seed (falls back to QGRAD_SEED)")
        p.add_argument("--lr", type=float, default=0.1, help="learning rate")
        p.add_argument("--steps", type=int, default=100, help="gradient-descent steps")
        p.add_argument("--delta", type=float, default=1e-4, help="finite-difference step")
        p.add_argument("--shift-s", type=float, default=1.0, dest="shift_s",
                       help="free shift for the displacement/squeezing rules")
        p.add_argument("--max-degree", type=int, default=8, dest="max_degree",
                       help="cap on the evolved observable degree (cv)")
    return parser


def _load(args):
    with open(args.file, encoding="utf-8") as fh:
        circuit = parse_circuit(fh.read())
    if args.params is None:
        theta = np.zeros(circuit.param_count)
    else:
        try:
            values = [float(v) for v in args.params.split(",") if v.strip() != ""]
        except ValueError:
            raise CircuitValidationError(f"malformed --params value {args.params!r}") from None
        theta = np.asarray(values, dtype=float)
        if len(theta) != circuit.param_count:
            raise CircuitValidationError(
                f"--params has {len(theta)} values, circuit declares "
                f"{circuit.param_count} parameters"
            )
    return circuit, theta


def _seed(args) -> int | None:
    if args.seed is not None:
        return args.seed
    env = os.environ.get("QGRAD_SEED")
    return int(env) if env else None


def _cmd_eval(args) -> dict:
    circuit, theta = _load(args)
    counter = EvalCounter()
    value = objective(circuit, theta, max_degree=args.max_degree, counter=counter)
    return {"schema_version": SCHEMA_VERSION, "command": "eval",
            "value": value, "evaluations": counter.count}

def _cmd_grad(args) -> dict:
    circuit, theta = _load(args)
    counter = EvalCounter()
    value = objective(circuit, theta, max_degree=args.max_degree, counter=counter)
    result = grad(circuit, theta, args.method, shots=args.shots, seed=_seed(args),
                  delta=args.delta, shift_s=args.shift_s, max_degree=args.max_degree)
    doc = {"schema_version": SCHEMA_VERSION, "command": "grad", "value": value,
           "gradient": list(result.gradient)}
    if result.stderr is not None:
        doc["stderr"] = list(result.stderr)
    doc["per_param_method"] = list(result.per_param_method)
    doc["evaluations"] = counter.count + result.evaluations
    return doc


def _cmd_sample(args) -> dict:
    circuit, theta = _load(args)
    if circuit.platform != QUBIT:
        raise CircuitValidationError("sampling is only defined for qubit circuits")
    shots = args.shots if args.shots is not None else 1000
    counter = EvalCounter()
    estimate, stderr = sample_expectation(circuit, theta, shots, seed=_seed(args),
                                          counter=counter)
    return {"schema_version": SCHEMA_VERSION, "command": "sample", "value": estimate,
            "stderr": stderr, "shots": shots, "evaluations": counter.count}


def _cmd_optimize(args) -> dict:
    circuit, theta = _load(args)
    trace = optimize(circuit, theta, args.method, learning_rate=args.lr,
                     steps=args.steps, shots=args.shots, seed=_seed(args),
                     delta=args.delta, shift_s=args.shift_s, max_degree=args.max_degree)
    final = trace.final
    return {
        "schema_version": SCHEMA_VERSION,
        "command": "optimize",
        "value": final.value,
        "gradient": list(final.gradient),
        "theta": list(final.theta),
        "per_param_method": list(trace.per_param_method),
        "evaluations": trace.evaluations,
        "trace": [
            {"step": s.step, "theta": list(s.theta), "value": s.value,
             "gradient": list(s.gradient), "evaluations": s.evaluations}
            for s in trace.steps
        ],
    }


def _cmd_check(args) -> dict:
    circuit, theta = _load(args)
    per_param = []
    for k in range(circuit.param_count):
        analysis = analyze_parameter(circuit, theta, k, args.shift_s)
        per_param.append({
            "param": k,
            "method": analysis.method.value,
            "reason": analysis.reason,
            "occurrences": [dict(d) for d in analysis.occurrences],
        })
    return {"schema_version": SCHEMA_VERSION, "command": "check",
            "per_param": per_param, "evaluations": 0}


_COMMANDS = {
    "eval": _cmd_eval,
    "grad": _cmd_grad,
    "sample": _cmd_sample,
    "optimize": _cmd_optimize,
    "check": _cmd_check,
}


def main(argv=None) -> int:
    try:
        args = _build_parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        _emit(_COMMANDS[args.command](args))
    except QGradError as exc:
        sys.stderr.write(f"qgrad: {exc}\n")
        for klass, code in _EXIT_CODES:
            if isinstance(exc, klass):
                return code
        return 1
    except OSError as exc:
        sys.stderr.write(f"qgrad: {exc}\n")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
