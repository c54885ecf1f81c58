"""Circuit intermediate representation and the line-oriented text format.

All IR objects are immutable after construction and validated eagerly, so
they can be shared freely across concurrent evaluations.
"""
from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from .errors import CircuitSyntaxError, CircuitValidationError
from .quad_algebra import QuadPolynomial, canonicalize

QUBIT = "qubit"
CV = "cv"

_FLOAT = r"[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?"
_ARG_RE = re.compile(
    rf"^(?P<coef>{_FLOAT}\*|[+-])?th\[(?P<idx>\d+)\](?P<off>[+-](?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)?$"
)
_PAULIROT_RE = re.compile(r"^PAULIROT\(([XYZ]+)\)$")
_PAULI_WORD_RE = re.compile(r"^(?:I|(?:[XYZ]\d+)+)$")
_PAULI_FACTOR_RE = re.compile(r"([XYZ])(\d+)")
_CV_WORD_RE = re.compile(r"^(?:I|(?:[xp]\d+(?:\^\d+)?)+)$")
_CV_FACTOR_RE = re.compile(r"([xp])(\d+)(?:\^(\d+))?")


# -- parameter bindings ------------------------------------------------


@dataclass(frozen=True)
class Literal:
    value: float


@dataclass(frozen=True)
class Affine:
    """Argument value coeff*theta[index] + offset."""

    coeff: float
    index: int
    offset: float = 0.0


Binding = Literal | Affine


def resolve(binding: Binding, theta) -> float:
    if isinstance(binding, Literal):
        return binding.value
    return binding.coeff * float(theta[binding.index]) + binding.offset


def _scale_binding(binding: Binding, factor: float) -> Binding:
    if isinstance(binding, Literal):
        return Literal(binding.value * factor)
    return Affine(binding.coeff * factor, binding.index, binding.offset * factor)


# -- gate table ---------------------------------------------------------


@dataclass(frozen=True)
class GateDef:
    platform: str
    n_wires: int            # -1: derived from the Pauli word / generator matrix
    n_args: int
    diff_args: tuple[int, ...]     # arg slots with an analytic derivative rule
    literal_args: tuple[int, ...]  # arg slots that must not bind parameters
    arg_names: tuple[str, ...]
    gaussian: bool = False
    text_form: bool = True


GATE_DEFS: dict[str, GateDef] = {
    "RX": GateDef(QUBIT, 1, 1, (0,), (), ("mu",)),
    "RY": GateDef(QUBIT, 1, 1, (0,), (), ("mu",)),
    "RZ": GateDef(QUBIT, 1, 1, (0,), (), ("mu",)),
    "PAULIROT": GateDef(QUBIT, -1, 1, (0,), (), ("mu",)),
    "EXPW": GateDef(QUBIT, 1, 2, (0,), (1,), ("mu", "delta")),
    "EXPZ": GateDef(QUBIT, 1, 1, (0,), (), ("mu",)),
    "EXP11": GateDef(QUBIT, 2, 1, (0,), (), ("mu",)),
    "CROSSRES": GateDef(QUBIT, 2, 3, (0,), (1, 2), ("mu", "b", "c")),
    "CNOT": GateDef(QUBIT, 2, 0, (), (), ()),
    "H": GateDef(QUBIT, 1, 0, (), (), ()),
    # exponential of an explicit Hermitian generator; API-only, no text form
    "EXPG": GateDef(QUBIT, -1, 1, (0,), (), ("mu",), text_form=False),
    "R": GateDef(CV, 1, 1, (0,), (), ("phi",), gaussian=True),
    "D": GateDef(CV, 1, 2, (0, 1), (), ("r", "phi"), gaussian=True),
    "S": GateDef(CV, 1, 1, (0,), (), ("r",), gaussian=True),
    "BS": GateDef(CV, 2, 2, (0, 1), (), ("theta", "phi"), gaussian=True),
    "CUBICPHASE": GateDef(CV, 1, 1, (), (), ("gamma",), gaussian=False),
}


@dataclass(frozen=True, eq=False)
class GateSpec:
    kind: str
    wires: tuple[int, ...]
    args: tuple[Binding, ...] = ()
    word: str | None = None            # PAULIROT only
    matrix: np.ndarray | None = None   # EXPG only (Hermitian generator)

    @property
    def gate_def(self) -> GateDef:
        return GATE_DEFS[self.kind]

    def label(self) -> str:
        kind = f"PAULIROT({self.word})" if self.kind == "PAULIROT" else self.kind
        return f"{kind} on wires {list(self.wires)}"

    def __eq__(self, other):
        if not isinstance(other, GateSpec):
            return NotImplemented
        if (self.kind, self.wires, self.args, self.word) != (other.kind, other.wires, other.args, other.word):
            return False
        if (self.matrix is None) != (other.matrix is None):
            return False
        return self.matrix is None or np.array_equal(self.matrix, other.matrix)


# -- observables --------------------------------------------------------


@dataclass(frozen=True)
class PauliObservable:
    """Real-weighted sum of Pauli words; a word is a sorted tuple of (wire, letter)."""

    terms: tuple[tuple[float, tuple[tuple[int, str], ...]], ...]

    def max_wire(self) -> int:
        return max((w for _, word in self.terms for w, _ in word), default=-1)


@dataclass(frozen=True, eq=False)
class MatrixObservable:
    """Explicit Hermitian matrix on a small set of wires."""

    matrix: np.ndarray
    wires: tuple[int, ...]

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        object.__setattr__(self, "matrix", m)
        dim = 2 ** len(self.wires)
        if m.shape != (dim, dim):
            raise CircuitValidationError(
                f"observable matrix shape {m.shape} does not match {len(self.wires)} wires"
            )
        if len(self.wires) > 3:
            raise CircuitValidationError("explicit matrix observables support at most 3 wires")
        if np.max(np.abs(m - m.conj().T)) > 1e-12:
            raise CircuitValidationError("observable matrix is not Hermitian within 1e-12")

    def __eq__(self, other):
        if not isinstance(other, MatrixObservable):
            return NotImplemented
        return self.wires == other.wires and np.array_equal(self.matrix, other.matrix)


@dataclass(frozen=True, eq=False)
class CVObservable:
    """Quadrature polynomial observable.

    raw_terms keeps the words as written (for printing); poly is the
    canonical form used by the engine.
    """

    raw_terms: tuple[tuple[float, tuple[tuple[int, str], ...]], ...]
    poly: QuadPolynomial

    @classmethod
    def from_terms(cls, raw_terms, n_modes: int) -> "CVObservable":
        poly = QuadPolynomial.zero(n_modes)
        for coeff, word in raw_terms:
            poly = poly + canonicalize(list(word), n_modes) * coeff
        obs = cls(tuple((float(c), tuple(w)) for c, w in raw_terms), poly)
        if not poly.is_hermitian(1e-12):
            raise CircuitValidationError(
                "cv observable is not Hermitian after canonicalization"
            )
        return obs

    def max_mode(self) -> int:
        return max((m for _, word in self.raw_terms for m, _ in word), default=-1)

    def __eq__(self, other):
        if not isinstance(other, CVObservable):
            return NotImplemented
        return self.raw_terms == other.raw_terms


Observable = PauliObservable | MatrixObservable | CVObservable


# -- circuit ------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class CircuitIR:
    platform: str
    wire_count: int
    gates: tuple[GateSpec, ...]
    observable: Observable
    param_count: int

    def __post_init__(self):
        _validate(self)

    def __eq__(self, other):
        if not isinstance(other, CircuitIR):
            return NotImplemented
        return (
            self.platform == other.platform
            and self.wire_count == other.wire_count
            and self.param_count == other.param_count
            and self.gates == other.gates
            and self.observable == other.observable
        )


def _validate(c: CircuitIR) -> None:
    if c.platform not in (QUBIT, CV):
        raise CircuitValidationError(f"unknown platform {c.platform!r}")
    if c.wire_count < 1:
        raise CircuitValidationError("wire count must be positive")
    if c.param_count < 0:
        raise CircuitValidationError("param count must be non-negative")
    for i, g in enumerate(c.gates):
        gdef = GATE_DEFS.get(g.kind)
        if gdef is None:
            raise CircuitValidationError(f"gate {i}: unknown gate kind {g.kind!r}")
        if gdef.platform != c.platform:
            raise CircuitValidationError(
                f"gate {i} ({g.kind}): {gdef.platform} gate in a {c.platform} circuit"
            )
        n_wires = gdef.n_wires
        if g.kind == "PAULIROT":
            if not g.word or not all(l in "XYZ" for l in g.word):
                raise CircuitValidationError(f"gate {i}: PAULIROT needs a Pauli word")
            n_wires = len(g.word)
        if g.kind == "EXPG":
            if g.matrix is None:
                raise CircuitValidationError(f"gate {i}: EXPG needs a generator matrix")
            dim = 2 ** len(g.wires)
            if g.matrix.shape != (dim, dim):
                raise CircuitValidationError(f"gate {i}: EXPG generator shape mismatch")
            if np.max(np.abs(g.matrix - g.matrix.conj().T)) > 1e-12:
                raise CircuitValidationError(f"gate {i}: EXPG generator is not Hermitian")
            n_wires = len(g.wires)
        if len(g.wires) != n_wires:
            raise CircuitValidationError(
                f"gate {i} ({g.kind}): expected {n_wires} wires, got {len(g.wires)}"
            )
        if len(set(g.wires)) != len(g.wires):
            raise CircuitValidationError(f"gate {i} ({g.kind}): repeated wire index")
        for w in g.wires:
            if not 0 <= w < c.wire_count:
                raise CircuitValidationError(
                    f"gate {i} ({g.kind}): wire {w} out of range for {c.wire_count} wires"
                )
        if len(g.args) != gdef.n_args:
            raise CircuitValidationError(
                f"gate {i} ({g.kind}): expected {gdef.n_args} args, got {len(g.args)}"
            )
        for slot, arg in enumerate(g.args):
            if isinstance(arg, Affine):
                if slot in gdef.literal_args:
                    raise CircuitValidationError(
                        f"gate {i} ({g.kind}): arg {gdef.arg_names[slot]!r} is "
                        f"structural and must be a literal"
                    )
                if not 0 <= arg.index < c.param_count:
                    raise CircuitValidationError(
                        f"gate {i} ({g.kind}): parameter index {arg.index} out of "
                        f"range for {c.param_count} parameters"
                    )
                if arg.coeff == 0.0:
                    raise CircuitValidationError(
                        f"gate {i} ({g.kind}): affine binding with zero coefficient"
                    )
    obs = c.observable
    if c.platform == QUBIT:
        if isinstance(obs, CVObservable):
            raise CircuitValidationError("cv observable in a qubit circuit")
        if isinstance(obs, PauliObservable):
            for _, word in obs.terms:
                for w, _ in word:
                    if not 0 <= w < c.wire_count:
                        raise CircuitValidationError(f"observable wire {w} out of range")
                if len({w for w, _ in word}) != len(word):
                    raise CircuitValidationError("observable word repeats a wire")
        else:
            for w in obs.wires:
                if not 0 <= w < c.wire_count:
                    raise CircuitValidationError(f"observable wire {w} out of range")
    else:
        if not isinstance(obs, CVObservable):
            raise CircuitValidationError("cv circuit needs a quadrature-polynomial observable")
        if obs.poly.n_modes != c.wire_count:
            raise CircuitValidationError("observable mode count does not match circuit")
        if obs.max_mode() >= c.wire_count:
            raise CircuitValidationError("observable mode out of range")


# -- occurrences and splitting -------------------------------------------


@dataclass(frozen=True)
class Occurrence:
    """One affine reference to a parameter: gate position, arg slot, chain-rule factor."""

    gate: int
    arg: int
    coeff: float


def occurrences(circuit: CircuitIR, k: int) -> list[Occurrence]:
    """Every gate argument whose binding references theta[k]."""
    if not 0 <= k < circuit.param_count:
        raise CircuitValidationError(
            f"parameter index {k} out of range for {circuit.param_count} parameters"
        )
    out = []
    for pos, gate in enumerate(circuit.gates):
        for slot, arg in enumerate(gate.args):
            if isinstance(arg, Affine) and arg.index == k:
                out.append(Occurrence(pos, slot, arg.coeff))
    return out


@dataclass(frozen=True)
class CircuitSplit:
    before: tuple[GateSpec, ...]
    target: GateSpec
    after: tuple[GateSpec, ...]


def split_at(circuit: CircuitIR, position: int) -> CircuitSplit:
    if not 0 <= position < len(circuit.gates):
        raise CircuitValidationError(
            f"gate position {position} out of range for {len(circuit.gates)} gates"
        )
    return CircuitSplit(
        circuit.gates[:position], circuit.gates[position], circuit.gates[position + 1:]
    )


# -- parser ---------------------------------------------------------------


def _tokens(line: str) -> list[tuple[str, int]]:
    return [(m.group(0), m.start() + 1) for m in re.finditer(r"\S+", line)]


def _parse_binding(tok: str, line_no: int, col: int) -> Binding:
    try:
        return Literal(float(tok))
    except ValueError:
        pass
    m = _ARG_RE.match(tok)
    if not m:
        raise CircuitSyntaxError(f"malformed gate argument {tok!r}", line_no, col)
    coef_s = m.group("coef")
    if coef_s is None:
        coeff = 1.0
    elif coef_s == "-":
        coeff = -1.0
    elif coef_s == "+":
        coeff = 1.0
    else:
        coeff = float(coef_s[:-1])
    offset = float(m.group("off")) if m.group("off") else 0.0
    return Affine(coeff, int(m.group("idx")), offset)


def _parse_gate_line(toks, line_no: int) -> list[GateSpec]:
    kind_tok, kind_col = toks[1]
    word = None
    kind = kind_tok
    m = _PAULIROT_RE.match(kind_tok)
    if m:
        kind, word = "PAULIROT", m.group(1)
    composite_s2 = kind == "S2"
    if composite_s2:
        n_wires, n_args = 1, 2
    else:
        gdef = GATE_DEFS.get(kind)
        if gdef is None or not gdef.text_form:
            raise CircuitSyntaxError(f"unknown gate {kind_tok!r}", line_no, kind_col)
        n_wires = len(word) if kind == "PAULIROT" else gdef.n_wires
        n_args = gdef.n_args
    body = toks[2:]
    if len(body) != n_wires + n_args:
        raise CircuitSyntaxError(
            f"gate {kind_tok} takes {n_wires} wires and {n_args} args, got "
            f"{len(body)} tokens",
            line_no,
            kind_col,
        )
    wires = []
    for tok, col in body[:n_wires]:
        if not tok.isdigit():
            raise CircuitSyntaxError(f"expected wire index, got {tok!r}", line_no, col)
        wires.append(int(tok))
    args = [_parse_binding(tok, line_no, col) for tok, col in body[n_wires:]]
    if composite_s2:
        # two-parameter squeezer: expands to R(phi/2) S(r) R(-phi/2) at IR level
        r_arg, phi_arg = args
        half = _scale_binding(phi_arg, 0.5)
        neg_half = _scale_binding(phi_arg, -0.5)
        w = tuple(wires)
        return [
            GateSpec("R", w, (half,)),
            GateSpec("S", w, (r_arg,)),
            GateSpec("R", w, (neg_half,)),
        ]
    return [GateSpec(kind, tuple(wires), tuple(args), word=word)]


def _split_terms(toks, line_no: int):
    groups, current = [], []
    for tok, col in toks:
        if tok == "+":
            if not current:
                raise CircuitSyntaxError("dangling '+' in observable", line_no, col)
            groups.append(current)
            current = []
        else:
            current.append((tok, col))
    if not current:
        raise CircuitSyntaxError("observable ends with '+'", line_no, toks[-1][1])
    groups.append(current)
    return groups


def _parse_observable(toks, line_no: int, platform: str) -> Observable:
    terms = []
    for group in _split_terms(toks, line_no):
        if len(group) != 2:
            raise CircuitSyntaxError(
                "each observable term is '<coeff> <word>'", line_no, group[0][1]
            )
        (coeff_tok, coeff_col), (word_tok, word_col) = group
        try:
            coeff = float(coeff_tok)
        except ValueError:
            raise CircuitSyntaxError(
                f"malformed observable coefficient {coeff_tok!r}", line_no, coeff_col
            ) from None
        if platform == QUBIT:
            if not _PAULI_WORD_RE.match(word_tok):
                raise CircuitSyntaxError(
                    f"malformed Pauli word {word_tok!r}", line_no, word_col
                )
            word = tuple(
                sorted((int(w), l) for l, w in _PAULI_FACTOR_RE.findall(word_tok))
            )
            terms.append((coeff, word))
        else:
            if not _CV_WORD_RE.match(word_tok) and word_tok != "1":
                raise CircuitSyntaxError(
                    f"malformed quadrature monomial {word_tok!r}", line_no, word_col
                )
            factors = []
            for ch, mode, power in _CV_FACTOR_RE.findall(word_tok):
                factors.extend([(int(mode), ch)] * int(power or 1))
            terms.append((coeff, tuple(factors)))
    return terms


def parse_circuit(text: str) -> CircuitIR:
    """Parse the line-oriented circuit format into a validated CircuitIR."""
    platform = None
    wire_count = None
    param_count = None
    gates: list[GateSpec] = []
    raw_obs = None
    obs_line = -1

    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0]
        toks = _tokens(line)
        if not toks:
            continue
        head, head_col = toks[0]
        if head == "platform":
            if platform is not None:
                raise CircuitSyntaxError("duplicate platform line", line_no, head_col)
            if len(toks) != 2 or toks[1][0] not in (QUBIT, CV):
                raise CircuitSyntaxError("expected 'platform qubit' or 'platform cv'", line_no, head_col)
            platform = toks[1][0]
        elif head == "wires":
            if wire_count is not None:
                raise CircuitSyntaxError("duplicate wires line", line_no, head_col)
            if len(toks) != 2 or not toks[1][0].isdigit():
                raise CircuitSyntaxError("expected 'wires <N>'", line_no, head_col)
            wire_count = int(toks[1][0])
        elif head == "params":
            if param_count is not None:
                raise CircuitSyntaxError("duplicate params line", line_no, head_col)
            if len(toks) != 2 or not toks[1][0].isdigit():
                raise CircuitSyntaxError("expected 'params <m>'", line_no, head_col)
            param_count = int(toks[1][0])
        elif head == "gate":
            if platform is None or wire_count is None:
                raise CircuitSyntaxError("gate before platform/wires", line_no, head_col)
            if raw_obs is not None:
                raise CircuitSyntaxError("gate after observe line", line_no, head_col)
            if len(toks) < 2:
                raise CircuitSyntaxError("gate line needs a gate kind", line_no, head_col)
            gates.extend(_parse_gate_line(toks, line_no))
        elif head == "observe":
            if platform is None:
                raise CircuitSyntaxError("observe before platform", line_no, head_col)
            if raw_obs is not None:
                raise CircuitSyntaxError("duplicate observe line", line_no, head_col)
            if len(toks) < 2:
                raise CircuitSyntaxError("empty observable", line_no, head_col)
            raw_obs = _parse_observable(toks[1:], line_no, platform)
            obs_line = line_no
        else:
            raise CircuitSyntaxError(f"unknown directive {head!r}", line_no, head_col)

    if platform is None:
        raise CircuitSyntaxError("missing platform line", 1, 1)
    if wire_count is None:
        raise CircuitSyntaxError("missing wires line", 1, 1)
    if raw_obs is None:
        raise CircuitSyntaxError("missing observe line", 1, 1)

    if param_count is None:
        referenced = [a.index for g in gates for a in g.args if isinstance(a, Affine)]
        param_count = max(referenced, default=-1) + 1

    if platform == QUBIT:
        observable: Observable = PauliObservable(tuple(raw_obs))
    else:
        try:
            observable = CVObservable.from_terms(raw_obs, wire_count)
        except CircuitValidationError as exc:
            raise CircuitSyntaxError(str(exc), obs_line, 1) from None
    return CircuitIR(platform, wire_count, tuple(gates), observable, param_count)


# -- printer --------------------------------------------------------------


def _fmt(value: float) -> str:
    return "%.17g" % value


def _fmt_binding(b: Binding) -> str:
    if isinstance(b, Literal):
        return _fmt(b.value)
    if b.coeff == 1.0:
        head = ""
    elif b.coeff == -1.0:
        head = "-"
    else:
        head = _fmt(b.coeff) + "*"
    tail = ""
    if b.offset != 0.0:
        tail = ("+" if b.offset > 0 else "") + _fmt(b.offset)
    return f"{head}th[{b.index}]{tail}"


def _fmt_cv_word(word) -> str:
    if not word:
        return "I"
    out, i = [], 0
    while i < len(word):
        j = i
        while j < len(word) and word[j] == word[i]:
            j += 1
        mode, ch = word[i]
        out.append(f"{ch}{mode}" + (f"^{j - i}" if j - i > 1 else ""))
        i = j
    return "".join(out)


def print_circuit(circuit: CircuitIR) -> str:
    """Render a CircuitIR back to its text form; parse(print(parse(t))) == parse(t)."""
    lines = [
        f"platform {circuit.platform}",
        f"wires {circuit.wire_count}",
        f"params {circuit.param_count}",
    ]
    for g in circuit.gates:
        if not g.gate_def.text_form:
            raise CircuitValidationError(f"gate {g.kind} has no text form")
        kind = f"PAULIROT({g.word})" if g.kind == "PAULIROT" else g.kind
        parts = [kind] + [str(w) for w in g.wires] + [_fmt_binding(a) for a in g.args]
        lines.append("gate " + " ".join(parts))
    obs = circuit.observable
    if isinstance(obs, PauliObservable):
        rendered = [
            _fmt(c) + " " + ("".join(f"{l}{w}" for w, l in word) or "I")
            for c, word in obs.terms
        ]
    elif isinstance(obs, CVObservable):
        rendered = [_fmt(c) + " " + _fmt_cv_word(word) for c, word in obs.raw_terms]
    else:
        raise CircuitValidationError("matrix observables have no text form")
    lines.append("observe " + " + ".join(rendered))
    return "\n".join(lines) + "\n"
