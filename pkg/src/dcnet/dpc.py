"""Reader and writer for ``.dpc`` circuit descriptions.

Line-oriented grammar::

    # comment (also allowed after a statement)
    mode <label> [<x> <y>]
    diss <rate> <label>:<weight> [<label>:<weight> ...]     weight = re | re,im
    loss <label> <rate>
    init <label> <re> [<im>]
    set <key> <value>

Mode references may appear before the declaration.  Parsing collects every
diagnostic in one pass and raises :class:`DpcError` at the end.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .circuit import Circuit, Diagnostic, Dissipator, ModeRef, validate

LABEL_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_.\-]*\Z")
KEYWORDS = ("mode", "diss", "loss", "init", "set")


class DpcError(ValueError):
    def __init__(self, diagnostics: list[Diagnostic]):
        self.diagnostics = diagnostics
        super().__init__("\n".join(str(d) for d in diagnostics))


@dataclass(frozen=True)
class Token:
    text: str
    line: int
    column: int


@dataclass(frozen=True)
class Statement:
    kind: str
    tokens: tuple[Token, ...]

    @property
    def line(self) -> int:
        return self.tokens[0].line


@dataclass
class CircuitDocument:
    statements: list[Statement] = field(default_factory=list)
    config: dict[str, str] = field(default_factory=dict)
    diagnostics: list[Diagnostic] = field(default_factory=list)


@dataclass
class ParseResult:
    document: CircuitDocument
    circuit: Circuit
    initial: np.ndarray


def _tokenize(text: str) -> list[list[Token]]:
    lines = []
    for n, raw in enumerate(text.splitlines(), start=1):
        body = raw.split("#", 1)[0]
        toks = [Token(m.group(), n, m.start() + 1) for m in re.finditer(r"\S+", body)]
        if toks:
            lines.append(toks)
    return lines


def parse_circuit(text: str) -> ParseResult:
    doc = CircuitDocument()
    diags = doc.diagnostics

    def err(tok: Token, msg: str):
        diags.append(Diagnostic("error", msg, tok.line, tok.column))

    def number(tok: Token, s: str | None = None) -> float | None:
        s = tok.text if s is None else s
        try:
            x = float(s)
        except ValueError:
            err(tok, f"malformed number {s!r}")
            return None
        if not math.isfinite(x):
            err(tok, f"non-finite number {s!r}")
            return None
        return x

    def label(tok: Token, s: str | None = None) -> str | None:
        s = tok.text if s is None else s
        if not LABEL_RE.match(s):
            err(tok, f"invalid label {s!r}")
            return None
        return s

    modes: list[ModeRef] = []
    declared: dict[str, Token] = {}
    diss: list[Dissipator] = []
    refs: list[tuple[str, Token]] = []
    inits: list[tuple[str, complex, Token]] = []

    for toks in _tokenize(text):
        head, args = toks[0], toks[1:]
        kind = head.text
        if kind not in KEYWORDS:
            err(head, f"unknown statement {kind!r}")
            continue
        doc.statements.append(Statement(kind, tuple(toks)))

        if kind == "mode":
            if len(args) not in (1, 3):
                err(head, "expected 'mode <label> [<x> <y>]'")
                continue
            name = label(args[0])
            pos = None
            if len(args) == 3:
                x, y = number(args[1]), number(args[2])
                pos = (x, y) if x is not None and y is not None else None
            if name is None:
                continue
            if name in declared:
                first = declared[name]
                err(args[0], f"duplicate mode {name!r} (first declared at {first.line}:{first.column})")
                continue
            declared[name] = args[0]
            modes.append(ModeRef(name, pos))

        elif kind == "diss":
            if len(args) < 2:
                err(head, "expected 'diss <rate> <label>:<weight> ...'")
                continue
            rate = number(args[0])
            if rate is not None and rate < 0:
                err(args[0], f"negative rate {rate!r}")
            weights = []
            ok = rate is not None and rate >= 0
            for tok in args[1:]:
                name, sep, wtext = tok.text.partition(":")
                if not sep or not wtext:
                    err(tok, f"expected <label>:<weight>, got {tok.text!r}")
                    ok = False
                    continue
                name = label(tok, name)
                parts = wtext.split(",")
                if len(parts) > 2:
                    err(tok, f"malformed weight {wtext!r}")
                    ok = False
                    continue
                vals = [number(tok, p) for p in parts]
                if name is None or any(v is None for v in vals):
                    ok = False
                    continue
                refs.append((name, tok))
                weights.append((name, complex(vals[0], vals[1] if len(vals) == 2 else 0.0)))
            if ok:
                if not any(w != 0 for _, w in weights):
                    err(head, "dissipator has no non-zero weight")
                else:
                    diss.append(Dissipator(rate, tuple(weights)))

        elif kind == "loss":
            if len(args) != 2:
                err(head, "expected 'loss <label> <rate>'")
                continue
            name, rate = label(args[0]), number(args[1])
            if rate is not None and rate < 0:
                err(args[1], f"negative rate {rate!r}")
                continue
            if name is not None and rate is not None:
                refs.append((name, args[0]))
                diss.append(Dissipator(rate, ((name, 1 + 0j),)))

        elif kind == "init":
            if len(args) not in (2, 3):
                err(head, "expected 'init <label> <re> [<im>]'")
                continue
            name = label(args[0])
            vals = [number(t) for t in args[1:]]
            if name is not None and all(v is not None for v in vals):
                refs.append((name, args[0]))
                inits.append((name, complex(vals[0], vals[1] if len(vals) == 2 else 0.0), args[0]))

        elif kind == "set":
            if len(args) != 2:
                err(head, "expected 'set <key> <value>'")
                continue
            doc.config[args[0].text] = args[1].text

    for name, tok in refs:
        if name not in declared:
            err(tok, f"unknown mode {name!r}")

    circuit = Circuit(modes, diss, {"source": "dpc"})
    initial = np.zeros(len(modes), dtype=complex)
    index = {m.label: i for i, m in enumerate(modes)}
    for name, val, _ in inits:
        if name in index:
            initial[index[name]] = val

    if not diags:
        for d in validate(circuit):
            if d.severity == "warning":
                diags.append(d)
    diags.sort(key=lambda d: (d.line or 0, d.column or 0))
    if any(d.severity == "error" for d in diags):
        raise DpcError(diags)
    return ParseResult(doc, circuit, initial)


def format_number(x: float) -> str:
    """Shortest decimal that reads back to the same double."""
    x = float(x)
    if x == 0:
        return "0"
    if x.is_integer() and abs(x) < 1e15:
        return str(int(x))
    return repr(x)


def format_weight(w: complex) -> str:
    w = complex(w)
    if w.imag == 0:
        return format_number(w.real)
    return f"{format_number(w.real)},{format_number(w.imag)}"


def serialize_circuit(circuit: Circuit, initial=None, config: Mapping[str, str] | None = None) -> str:
    """Canonical ``.dpc`` text: modes, dissipators, then optional init/set lines."""
    out = []
    for m in circuit.modes:
        if m.position is None:
            out.append(f"mode {m.label}")
        else:
            out.append(f"mode {m.label} {format_number(m.position[0])} {format_number(m.position[1])}")
    for d in circuit.dissipators:
        if len(d.weights) == 1 and d.weights[0][1] == 1:
            out.append(f"loss {d.weights[0][0]} {format_number(d.rate)}")
        else:
            ws = " ".join(f"{k}:{format_weight(w)}" for k, w in d.weights)
            out.append(f"diss {format_number(d.rate)} {ws}")
    if initial is not None:
        for m, a in zip(circuit.modes, np.asarray(initial, dtype=complex)):
            if a != 0:
                out.append(f"init {m.label} {format_number(a.real)} {format_number(a.imag)}")
    for k, v in (config or {}).items():
        out.append(f"set {k} {v}")
    return "\n".join(out) + "\n"
