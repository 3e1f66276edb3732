"""Text format for experiments: wire declarations, named states,
unitaries and detectors, circuit steps, and outcome queries.

The format is line-oriented UTF-8 with ``#`` comments.  Kets use one
character per wire ('u'/'d' for spins, digits for larger factors),
scalars are complex literals like ``0.5-0.25i`` or ``sqrt(0.75)``, and
matrices are bracketed rows of complex literals on a single line.
Names must be declared before use; normalization and unitarity are
validated when parsing finishes.  ``print_spec`` emits the canonical
normalized form, which re-parses to a structurally equal spec.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

import numpy as np

from . import circuits, qcore
from .detectors import AncillaDetector, Detector, EffectDetector
from .qcore import StateVector
from .reporting import format_float

_VALIDATION_TOL = 1e-9


class DslParseError(ValueError):
    """Parse or validation failure with a 1-based source position."""

    def __init__(self, line: int, column: int, message: str, token: str = ""):
        self.line = line
        self.column = column
        self.message = message
        self.token = token
        where = f"line {line}, column {column}"
        shown = f" near {token!r}" if token else ""
        super().__init__(f"{where}: {message}{shown}")


@dataclass(frozen=True)
class GateRef:
    unitary: str
    wires: tuple[str, ...]


@dataclass(frozen=True)
class MeasureRef:
    wire: str
    kind: str  # "sg" or a detector name
    label: str


@dataclass(eq=False)
class ExperimentSpec:
    """Parsed experiment: declarations, circuit steps, and queries."""

    wires: tuple[tuple[str, int], ...] = ()
    states: dict[str, np.ndarray] = field(default_factory=dict)
    unitaries: dict[str, np.ndarray] = field(default_factory=dict)
    detectors: dict[str, Detector] = field(default_factory=dict)
    prepare: str | None = None
    steps: tuple[GateRef | MeasureRef, ...] = ()
    queries: dict[str, tuple[tuple[str, str], ...]] = field(default_factory=dict)

    @property
    def factor_dims(self) -> tuple[int, ...]:
        return tuple(dim for _, dim in self.wires)

    def wire_index(self, name: str) -> int:
        for i, (wire, _) in enumerate(self.wires):
            if wire == name:
                return i
        raise KeyError(name)

    def to_circuit(self) -> circuits.Circuit:
        if self.prepare is None:
            raise ValueError("experiment has no prepare line")
        initial = StateVector(self.factor_dims, self.states[self.prepare])
        steps: list[circuits.Gate | circuits.Measure] = []
        for step in self.steps:
            if isinstance(step, GateRef):
                steps.append(
                    circuits.Gate(
                        tuple(self.wire_index(w) for w in step.wires),
                        self.unitaries[step.unitary],
                    )
                )
            else:
                det = None if step.kind == "sg" else self.detectors[step.kind]
                steps.append(
                    circuits.Measure(self.wire_index(step.wire), step.label, det)
                )
        return circuits.Circuit(initial, tuple(steps))

    def query(self, name: str) -> circuits.OutcomeQuery:
        if name not in self.queries:
            raise KeyError(name)
        return circuits.OutcomeQuery(self.queries[name])

    def __eq__(self, other) -> bool:
        if not isinstance(other, ExperimentSpec):
            return NotImplemented
        return (
            self.wires == other.wires
            and self.prepare == other.prepare
            and self.steps == other.steps
            and self.queries == other.queries
            and _dict_equal(self.states, other.states)
            and _dict_equal(self.unitaries, other.unitaries)
            and _detectors_equal(self.detectors, other.detectors)
        )


def _dict_equal(a: dict[str, np.ndarray], b: dict[str, np.ndarray]) -> bool:
    return a.keys() == b.keys() and all(np.array_equal(a[k], b[k]) for k in a)


def _detectors_equal(a: dict[str, Detector], b: dict[str, Detector]) -> bool:
    if a.keys() != b.keys():
        return False
    for key in a:
        da, db = a[key], b[key]
        if type(da) is not type(db):
            return False
        if isinstance(da, EffectDetector):
            if not np.array_equal(da.effect, db.effect):
                return False
        else:
            if da.ancilla_dim != db.ancilla_dim:
                return False
            if not np.array_equal(da.coupling, db.coupling):
                return False
            if not np.array_equal(da.projector, db.projector):
                return False
    return True


# --- lexer -----------------------------------------------------------------

_NUMBER = r"[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?"
_TOKEN_RE = re.compile(
    "|".join(
        [
            rf"(?P<COMPLEX>(?:{_NUMBER})?(?:{_NUMBER})i)",
            rf"(?P<NUMBER>{_NUMBER})",
            r"(?P<KET>\|[a-z0-9]+>)",
            r"(?P<ARROW>->)",
            r"(?P<IDENT>[A-Za-z_][A-Za-z0-9_-]*)",
            r"(?P<SYM>[:=*+,\[\]()\-])",
            r"(?P<WS>\s+)",
            r"(?P<BAD>.)",
        ]
    )
)

# A complex literal is a single token with no internal whitespace:
# "2i", "1+2i", "-1.5e-3-0.25i".  The second signed part must carry an
# explicit sign when a real part is present.
_COMPLEX_RE = re.compile(
    rf"^(?:(?P<re>{_NUMBER})(?=[+-]))?(?P<im>{_NUMBER})i$"
)


@dataclass(frozen=True)
class _Token:
    kind: str
    text: str
    line: int
    column: int


def _tokenize_line(text: str, line_no: int) -> list[_Token]:
    tokens = []
    for match in _TOKEN_RE.finditer(text):
        kind = match.lastgroup
        value = match.group()
        if kind == "WS":
            continue
        if kind == "BAD":
            raise DslParseError(line_no, match.start() + 1, "unexpected character", value)
        tokens.append(_Token(kind, value, line_no, match.start() + 1))
    return tokens


class _LineParser:
    def __init__(self, tokens: list[_Token], line_no: int, line_len: int):
        self.tokens = tokens
        self.pos = 0
        self.line_no = line_no
        self.line_len = line_len

    def peek(self) -> _Token | None:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def next(self, expect: str | None = None, text: str | None = None) -> _Token:
        token = self.peek()
        if token is None:
            raise DslParseError(
                self.line_no, self.line_len + 1, self._expected(expect, text)
            )
        if expect is not None and token.kind != expect:
            raise DslParseError(
                token.line, token.column, self._expected(expect, text), token.text
            )
        if text is not None and token.text != text:
            raise DslParseError(
                token.line, token.column, self._expected(expect, text), token.text
            )
        self.pos += 1
        return token

    @staticmethod
    def _expected(expect: str | None, text: str | None) -> str:
        if text is not None:
            return f"expected {text!r}"
        return f"expected {expect}" if expect else "unexpected end of line"

    def expect_end(self) -> None:
        token = self.peek()
        if token is not None:
            raise DslParseError(
                token.line, token.column, "unexpected trailing input", token.text
            )

    def error(self, message: str, token: _Token | None = None) -> DslParseError:
        if token is None:
            token = self.peek()
        if token is None:
            return DslParseError(self.line_no, self.line_len + 1, message)
        return DslParseError(token.line, token.column, message, token.text)


def parse_complex(token: _Token) -> complex:
    if token.kind == "NUMBER":
        return complex(float(token.text), 0.0)
    match = _COMPLEX_RE.match(token.text)
    if not match:
        raise DslParseError(token.line, token.column, "malformed complex literal", token.text)
    re_part = float(match.group("re")) if match.group("re") else 0.0
    return complex(re_part, float(match.group("im")))


def format_complex(value: complex) -> str:
    re_part, im_part = float(value.real), float(value.imag)
    if im_part == 0.0:
        return format_float(re_part)
    if re_part == 0.0:
        return f"{format_float(im_part)}i"
    sign = "+" if not math.copysign(1.0, im_part) < 0 else "-"
    return f"{format_float(re_part)}{sign}{format_float(abs(im_part))}i"


# --- parser ----------------------------------------------------------------


class _Parser:
    def __init__(self):
        self.spec = ExperimentSpec()
        self.wires: list[tuple[str, int]] = []
        self.steps: list[GateRef | MeasureRef] = []
        self.measure_kinds: dict[str, str] = {}
        self.decl_positions: dict[tuple[str, str], _Token] = {}
        self.names: set[str] = set()

    def parse(self, source: str) -> ExperimentSpec:
        for line_no, raw in enumerate(source.splitlines(), start=1):
            text = raw.split("#", 1)[0]
            tokens = _tokenize_line(text, line_no)
            if not tokens:
                continue
            self._parse_line(_LineParser(tokens, line_no, len(text)))
        self._finalize()
        spec = self.spec
        spec.wires = tuple(self.wires)
        spec.steps = tuple(self.steps)
        return spec

    def _parse_line(self, lp: _LineParser) -> None:
        head = lp.next("IDENT")
        handler = {
            "wire": self._parse_wire,
            "state": self._parse_state,
            "unitary": self._parse_unitary,
            "detector": self._parse_detector,
            "prepare": self._parse_prepare,
            "gate": self._parse_gate,
            "measure": self._parse_measure,
            "query": self._parse_query,
        }.get(head.text)
        if handler is None:
            raise lp.error(f"unknown declaration {head.text!r}", head)
        handler(lp)
        lp.expect_end()

    def _declare(self, token: _Token, kind: str) -> str:
        if token.text in self.names:
            raise DslParseError(
                token.line, token.column, f"name {token.text!r} already declared", token.text
            )
        self.names.add(token.text)
        self.decl_positions[(kind, token.text)] = token
        return token.text

    def _parse_wire(self, lp: _LineParser) -> None:
        name = self._declare(lp.next("IDENT"), "wire")
        lp.next("SYM", ":")
        dim_token = lp.next("NUMBER")
        try:
            dim = int(dim_token.text)
        except ValueError:
            dim = -1
        if dim < 2 or str(dim) != dim_token.text:
            raise lp.error("wire dimension must be an integer >= 2", dim_token)
        self.wires.append((name, dim))

    def _wire_dims(self) -> tuple[int, ...]:
        return tuple(dim for _, dim in self.wires)

    def _lookup_wire(self, token: _Token) -> str:
        for wire, _ in self.wires:
            if wire == token.text:
                return wire
        raise DslParseError(token.line, token.column, f"undefined wire {token.text!r}", token.text)

    def _parse_state(self, lp: _LineParser) -> None:
        if not self.wires:
            raise lp.error("state declared before any wire")
        name = self._declare(lp.next("IDENT"), "state")
        lp.next("SYM", "=")
        dims = self._wire_dims()
        amps = np.zeros(math.prod(dims), dtype=complex)
        sign = 1.0
        while True:
            scalar, ket_token = self._parse_term(lp)
            amps[self._ket_index(ket_token, dims)] += sign * scalar
            token = lp.peek()
            if token is None:
                break
            if token.kind == "SYM" and token.text in "+-":
                sign = 1.0 if token.text == "+" else -1.0
                lp.next()
                continue
            raise lp.error("expected '+', '-', or end of state expression")
        self.spec.states[name] = amps

    def _parse_term(self, lp: _LineParser) -> tuple[complex, _Token]:
        token = lp.peek()
        if token is None:
            raise lp.error("expected a term")
        if token.kind == "KET":
            return 1.0 + 0.0j, lp.next()
        scalar = self._parse_scalar(lp)
        lp.next("SYM", "*")
        return scalar, lp.next("KET")

    def _parse_scalar(self, lp: _LineParser) -> complex:
        token = lp.peek()
        if token is None:
            raise lp.error("expected a scalar")
        if token.kind in ("NUMBER", "COMPLEX"):
            return parse_complex(lp.next())
        if token.kind == "IDENT" and token.text == "sqrt":
            lp.next()
            lp.next("SYM", "(")
            arg_token = lp.next("NUMBER")
            value = float(arg_token.text)
            if value < 0:
                raise lp.error("sqrt argument must be non-negative", arg_token)
            lp.next("SYM", ")")
            return complex(math.sqrt(value), 0.0)
        raise lp.error("expected a number, complex literal, or sqrt(...)")

    def _ket_index(self, token: _Token, dims: tuple[int, ...]) -> int:
        chars = token.text[1:-1]
        if len(chars) != len(dims):
            raise DslParseError(
                token.line,
                token.column,
                f"ket must have one character per wire ({len(dims)} expected)",
                token.text,
            )
        index = 0
        for ch, dim in zip(chars, dims):
            if ch == "u":
                level = 0
            elif ch == "d":
                level = 1
            elif ch.isdigit():
                level = int(ch)
            else:
                raise DslParseError(
                    token.line, token.column, f"invalid ket character {ch!r}", token.text
                )
            if level >= dim:
                raise DslParseError(
                    token.line,
                    token.column,
                    f"ket level {level} out of range for wire dimension {dim}",
                    token.text,
                )
            index = index * dim + level
        return index

    def _parse_matrix(self, lp: _LineParser) -> np.ndarray:
        open_token = lp.next("SYM", "[")
        rows = []
        while True:
            rows.append(self._parse_row(lp))
            token = lp.next("SYM")
            if token.text == ",":
                continue
            if token.text == "]":
                break
            raise lp.error("expected ',' or ']' in matrix", token)
        width = len(rows[0])
        if any(len(row) != width for row in rows):
            raise DslParseError(
                open_token.line, open_token.column, "matrix rows have unequal lengths", "["
            )
        return np.array(rows, dtype=complex)

    def _parse_row(self, lp: _LineParser) -> list[complex]:
        lp.next("SYM", "[")
        entries = []
        while True:
            token = lp.peek()
            if token is not None and token.kind in ("NUMBER", "COMPLEX"):
                entries.append(parse_complex(lp.next()))
            else:
                raise lp.error("expected a matrix entry")
            token = lp.next("SYM")
            if token.text == ",":
                continue
            if token.text == "]":
                return entries
            raise lp.error("expected ',' or ']' in matrix row", token)

    def _parse_unitary(self, lp: _LineParser) -> None:
        name = self._declare(lp.next("IDENT"), "unitary")
        lp.next("SYM", "=")
        self.spec.unitaries[name] = self._parse_matrix(lp)

    def _parse_detector(self, lp: _LineParser) -> None:
        name_token = lp.next("IDENT")
        lp.next("SYM", "=")
        kind = lp.next("IDENT")
        if kind.text == "effect":
            matrix = self._parse_matrix(lp)
            name = self._declare(name_token, "detector")
            self.spec.detectors[name] = ("effect", matrix)  # validated at finalize
        elif kind.text == "ancilla":
            dim_token = lp.next("NUMBER")
            dim = int(dim_token.text) if dim_token.text.isdigit() else -1
            if dim < 2:
                raise lp.error("ancilla dimension must be an integer >= 2", dim_token)
            lp.next("IDENT", "coupling")
            coupling = self._parse_matrix(lp)
            lp.next("IDENT", "projector")
            projector = self._parse_matrix(lp)
            name = self._declare(name_token, "detector")
            self.spec.detectors[name] = ("ancilla", dim, coupling, projector)
        else:
            raise lp.error("expected 'effect' or 'ancilla'", kind)

    def _parse_prepare(self, lp: _LineParser) -> None:
        token = lp.next("IDENT")
        if token.text not in self.spec.states:
            raise DslParseError(
                token.line, token.column, f"undefined state {token.text!r}", token.text
            )
        if self.spec.prepare is not None:
            raise lp.error("prepare already given", token)
        self.spec.prepare = token.text

    def _parse_gate(self, lp: _LineParser) -> None:
        name_token = lp.next("IDENT")
        if name_token.text not in self.spec.unitaries:
            raise DslParseError(
                name_token.line,
                name_token.column,
                f"undefined unitary {name_token.text!r}",
                name_token.text,
            )
        lp.next("IDENT", "on")
        wires = []
        while lp.peek() is not None:
            wires.append(self._lookup_wire(lp.next("IDENT")))
        if not wires:
            raise lp.error("gate needs at least one wire")
        if len(set(wires)) != len(wires):
            raise lp.error("gate wires must be distinct", name_token)
        dims = dict(self.wires)
        span = math.prod(dims[w] for w in wires)
        matrix = self.spec.unitaries[name_token.text]
        if matrix.shape != (span, span):
            raise DslParseError(
                name_token.line,
                name_token.column,
                f"unitary is {matrix.shape[0]}x{matrix.shape[1]} but wires span "
                f"dimension {span}",
                name_token.text,
            )
        self.steps.append(GateRef(name_token.text, tuple(wires)))

    def _parse_measure(self, lp: _LineParser) -> None:
        wire_token = lp.next("IDENT")
        wire = self._lookup_wire(wire_token)
        if dict(self.wires)[wire] != 2:
            raise DslParseError(
                wire_token.line,
                wire_token.column,
                "only spin wires (dimension 2) are measurable",
                wire_token.text,
            )
        kind_token = lp.next("IDENT")
        if kind_token.text == "SG":
            kind = "sg"
        elif kind_token.text == "det":
            det_token = lp.next("IDENT")
            if det_token.text not in self.spec.detectors:
                raise DslParseError(
                    det_token.line,
                    det_token.column,
                    f"undefined detector {det_token.text!r}",
                    det_token.text,
                )
            kind = det_token.text
        else:
            raise lp.error("expected 'SG' or 'det'", kind_token)
        lp.next("ARROW")
        label_token = lp.next("IDENT")
        if label_token.text in self.measure_kinds:
            raise DslParseError(
                label_token.line,
                label_token.column,
                f"measurement label {label_token.text!r} already used",
                label_token.text,
            )
        self.measure_kinds[label_token.text] = kind
        self.steps.append(MeasureRef(wire, kind, label_token.text))

    def _parse_query(self, lp: _LineParser) -> None:
        name_token = lp.next("IDENT")
        if name_token.text in self.spec.queries:
            raise DslParseError(
                name_token.line,
                name_token.column,
                f"query {name_token.text!r} already declared",
                name_token.text,
            )
        lp.next("SYM", ":")
        assignments = []
        seen = set()
        while lp.peek() is not None:
            label_token = lp.next("IDENT")
            if label_token.text not in self.measure_kinds:
                raise DslParseError(
                    label_token.line,
                    label_token.column,
                    f"unknown measurement label {label_token.text!r}",
                    label_token.text,
                )
            if label_token.text in seen:
                raise DslParseError(
                    label_token.line,
                    label_token.column,
                    f"label {label_token.text!r} assigned twice",
                    label_token.text,
                )
            seen.add(label_token.text)
            lp.next("SYM", "=")
            outcome_token = lp.next("IDENT")
            valid = (
                circuits.SG_OUTCOMES
                if self.measure_kinds[label_token.text] == "sg"
                else circuits.DETECTOR_OUTCOMES
            )
            if outcome_token.text not in valid:
                raise DslParseError(
                    outcome_token.line,
                    outcome_token.column,
                    f"outcome must be one of {valid}",
                    outcome_token.text,
                )
            assignments.append((label_token.text, outcome_token.text))
            if lp.peek() is not None:
                lp.next("SYM", ",")
        self.spec.queries[name_token.text] = tuple(sorted(assignments))

    def _finalize(self) -> None:
        for name, amps in self.spec.states.items():
            norm = np.linalg.norm(amps)
            if abs(norm - 1.0) > _VALIDATION_TOL:
                token = self.decl_positions[("state", name)]
                raise DslParseError(
                    token.line,
                    token.column,
                    f"state {name!r} is not normalized (norm={norm:.12g})",
                    token.text,
                )
        for name, matrix in self.spec.unitaries.items():
            if not qcore.is_unitary(matrix, _VALIDATION_TOL):
                token = self.decl_positions[("unitary", name)]
                raise DslParseError(
                    token.line, token.column, f"matrix {name!r} is not unitary", token.text
                )
        built: dict[str, Detector] = {}
        for name, payload in self.spec.detectors.items():
            token = self.decl_positions[("detector", name)]
            try:
                if payload[0] == "effect":
                    built[name] = EffectDetector(payload[1])
                else:
                    built[name] = AncillaDetector(payload[1], payload[2], payload[3])
            except ValueError as exc:
                raise DslParseError(
                    token.line, token.column, f"invalid detector {name!r}: {exc}", token.text
                ) from exc
        self.spec.detectors = built


def parse(source: str) -> ExperimentSpec:
    """Parse experiment text; raises DslParseError with a position on
    any lexical, syntactic, reference, or validation error."""
    return _Parser().parse(source)


def parse_file(path) -> ExperimentSpec:
    with open(path, "r", encoding="utf-8") as handle:
        return parse(handle.read())


# --- printer ---------------------------------------------------------------


def print_spec(spec: ExperimentSpec) -> str:
    """Canonical normalized text; ``parse(print_spec(s))`` is
    structurally equal to ``s``."""
    lines: list[str] = []
    for name, dim in spec.wires:
        lines.append(f"wire {name} : {dim}")
    for name in sorted(spec.unitaries):
        lines.append(f"unitary {name} = {_format_matrix(spec.unitaries[name])}")
    for name in sorted(spec.detectors):
        det = spec.detectors[name]
        if isinstance(det, EffectDetector):
            lines.append(f"detector {name} = effect {_format_matrix(det.effect)}")
        else:
            lines.append(
                f"detector {name} = ancilla {det.ancilla_dim} "
                f"coupling {_format_matrix(det.coupling)} "
                f"projector {_format_matrix(det.projector)}"
            )
    dims = spec.factor_dims
    for name in sorted(spec.states):
        lines.append(f"state {name} = {_format_state(spec.states[name], dims)}")
    if spec.prepare is not None:
        lines.append(f"prepare {spec.prepare}")
    for step in spec.steps:
        if isinstance(step, GateRef):
            lines.append(f"gate {step.unitary} on {' '.join(step.wires)}")
        else:
            kind = "SG" if step.kind == "sg" else f"det {step.kind}"
            lines.append(f"measure {step.wire} {kind} -> {step.label}")
    for name in sorted(spec.queries):
        body = ", ".join(f"{label} = {outcome}" for label, outcome in spec.queries[name])
        lines.append(f"query {name} : {body}".rstrip())
    return "\n".join(lines) + ("\n" if lines else "")


def _format_matrix(matrix: np.ndarray) -> str:
    rows = [
        "[" + ", ".join(format_complex(entry) for entry in row) + "]"
        for row in matrix
    ]
    return "[" + ", ".join(rows) + "]"


def _format_state(amps: np.ndarray, dims: tuple[int, ...]) -> str:
    terms = []
    for index, amp in enumerate(amps):
        if amp == 0:
            continue
        terms.append(f"{format_complex(amp)}*|{_ket_chars(index, dims)}>")
    return " + ".join(terms) if terms else "0*|" + "u" * len(dims) + ">"


def _ket_chars(index: int, dims: tuple[int, ...]) -> str:
    levels = []
    for dim in reversed(dims):
        levels.append(index % dim)
        index //= dim
    levels.reverse()
    chars = []
    for level, dim in zip(levels, dims):
        if dim == 2:
            chars.append("u" if level == 0 else "d")
        else:
            chars.append(str(level))
    return "".join(chars)
