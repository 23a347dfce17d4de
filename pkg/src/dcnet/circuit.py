"""Network data model: bosonic modes coupled through shared lossy reservoirs.

A :class:`Circuit` is a list of modes plus a list of dissipators.  Each
dissipator ``j`` carries a rate ``gamma_j`` and complex weights ``x_jk`` so
that its jump operator is ``A_j = sum_k x_jk a_k``.  Mode order is the
canonical index order used by every matrix and vector in the package.

Builders follow the sign conventions of the lattice formulas they encode;
no gauge normalization is applied.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from types import MappingProxyType
from typing import Iterable, Mapping, Sequence

import numpy as np


@dataclass(frozen=True)
class ModeRef:
    label: str
    position: tuple[float, float] | None = None


@dataclass(frozen=True)
class Dissipator:
    """Shared reservoir with rate ``rate`` and jump operator ``sum_k w_k a_k``."""

    rate: float
    weights: tuple[tuple[str, complex], ...]

    @classmethod
    def from_map(cls, rate: float, weights: Mapping[str, complex] | Iterable[tuple[str, complex]]) -> "Dissipator":
        items = weights.items() if isinstance(weights, Mapping) else weights
        return cls(float(rate), tuple((str(k), complex(v)) for k, v in items))

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(k for k, _ in self.weights)


@dataclass(frozen=True)
class Diagnostic:
    severity: str  # "error" | "warning"
    message: str
    line: int | None = None
    column: int | None = None

    def __str__(self) -> str:
        loc = f"{self.line}:{self.column}: " if self.line is not None else ""
        return f"{loc}{self.severity}: {self.message}"


class InvalidCircuit(ValueError):
    def __init__(self, diagnostics: Sequence[Diagnostic]):
        self.diagnostics = list(diagnostics)
        super().__init__("; ".join(str(d) for d in self.diagnostics))


@dataclass(frozen=True)
class Circuit:
    modes: tuple[ModeRef, ...]
    dissipators: tuple[Dissipator, ...]
    metadata: Mapping = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "modes", tuple(self.modes))
        object.__setattr__(self, "dissipators", tuple(self.dissipators))
        object.__setattr__(self, "metadata", MappingProxyType(dict(self.metadata)))

    @property
    def labels(self) -> list[str]:
        return [m.label for m in self.modes]

    @property
    def n_modes(self) -> int:
        return len(self.modes)

    def index(self, label: str) -> int:
        try:
            return self._index_map()[label]
        except KeyError:
            raise KeyError(f"unknown mode {label!r}") from None

    def _index_map(self) -> dict[str, int]:
        return {m.label: i for i, m in enumerate(self.modes)}

    def rates(self) -> np.ndarray:
        return np.array([d.rate for d in self.dissipators], dtype=float)

    def weight_matrix(self) -> np.ndarray:
        """Stacked weight rows X, shape (n_dissipators, n_modes)."""
        idx = self._index_map()
        X = np.zeros((len(self.dissipators), self.n_modes), dtype=complex)
        for j, d in enumerate(self.dissipators):
            for label, w in d.weights:
                X[j, idx[label]] += w
        return X

    def positions(self) -> np.ndarray:
        if any(m.position is None for m in self.modes):
            raise ValueError("circuit has modes without positions")
        return np.array([m.position for m in self.modes], dtype=float)


def validate(circuit: Circuit) -> list[Diagnostic]:
    """Structural checks; an empty list means the circuit is well formed."""
    out: list[Diagnostic] = []
    seen: set[str] = set()
    for m in circuit.modes:
        if m.label in seen:
            out.append(Diagnostic("error", f"duplicate mode {m.label!r}"))
        seen.add(m.label)
        if m.position is not None and not all(math.isfinite(c) for c in m.position):
            out.append(Diagnostic("error", f"mode {m.label!r} has a non-finite position"))

    touched: set[str] = set()
    for j, d in enumerate(circuit.dissipators):
        if not math.isfinite(d.rate) or d.rate < 0:
            out.append(Diagnostic("error", f"dissipator {j} has invalid rate {d.rate!r}"))
        elif d.rate == 0:
            out.append(Diagnostic("warning", f"dissipator {j} has zero rate"))
        if not any(w != 0 for _, w in d.weights):
            out.append(Diagnostic("error", f"dissipator {j} has an empty weight row"))
        for label, w in d.weights:
            if label not in seen:
                out.append(Diagnostic("error", f"dissipator {j} references undeclared mode {label!r}"))
            if not (math.isfinite(w.real) and math.isfinite(w.imag)):
                out.append(Diagnostic("error", f"dissipator {j} has a non-finite weight on {label!r}"))
            if w != 0:
                touched.add(label)

    for m in circuit.modes:
        if m.label not in touched:
            out.append(Diagnostic("warning", f"mode {m.label!r} is not coupled to any reservoir"))
    return out


def check(circuit: Circuit) -> Circuit:
    """Raise :class:`InvalidCircuit` if ``validate`` reports any error."""
    errors = [d for d in validate(circuit) if d.severity == "error"]
    if errors:
        raise InvalidCircuit(errors)
    return circuit


def _check_rate(rate: float) -> float:
    rate = float(rate)
    if not math.isfinite(rate) or rate < 0:
        raise ValueError(f"rates must be finite and non-negative, got {rate}")
    return rate


def build_chain(n: int, rates: Sequence[float] | float = 1.0) -> Circuit:
    """Linear chain with ``A_j = a_j - a_{j+1}``."""
    if n < 2:
        raise ValueError("a chain needs at least two modes")
    if np.isscalar(rates):
        rates = [rates] * (n - 1)
    if len(rates) != n - 1:
        raise ValueError(f"expected {n - 1} rates, got {len(rates)}")
    modes = [ModeRef(f"a{j}", (float(j), 0.0)) for j in range(1, n + 1)]
    diss = [
        Dissipator.from_map(_check_rate(g), {modes[j].label: 1, modes[j + 1].label: -1})
        for j, g in enumerate(rates)
    ]
    return Circuit(modes, diss, {"builder": "chain", "n": n})


def build_two_arm(n_per_arm: int, rate: float = 1.0) -> Circuit:
    """Two chains joined by the control pair ``L``/``R``.

    Mode order: arm 1 (``a1..aN``), arm 2 (``b1..bN``), then ``L``, ``R``.
    The central jump operator is ``a_N - a_R + a_L - b_1``.
    """
    N = n_per_arm
    if N < 2:
        raise ValueError("each arm needs at least two modes")
    g = _check_rate(rate)
    arm1 = [ModeRef(f"a{j}", (float(j), 0.0)) for j in range(1, N + 1)]
    arm2 = [ModeRef(f"b{j}", (float(N + 1 + j), 2.0)) for j in range(1, N + 1)]
    ctrl_l = ModeRef("L", (N + 0.5, 1.0))
    ctrl_r = ModeRef("R", (N + 1.5, 1.0))
    diss = [Dissipator.from_map(g, {arm1[j].label: 1, arm1[j + 1].label: -1}) for j in range(N - 1)]
    diss.append(Dissipator.from_map(g, {arm1[-1].label: 1, "R": -1, "L": 1, arm2[0].label: -1}))
    diss += [Dissipator.from_map(g, {arm2[j].label: 1, arm2[j + 1].label: -1}) for j in range(N - 1)]
    return Circuit(arm1 + arm2 + [ctrl_l, ctrl_r], diss, {"builder": "two_arm", "n_per_arm": N})


def build_double_chain(n_columns: int, rate: float = 1.0) -> Circuit:
    """Two parallel rows; reservoir j couples columns j and j+1 with signs (+, -, +, -).

    Mode order: upper row ``u1..uN`` then lower row ``l1..lN``.
    """
    N = n_columns
    if N < 2:
        raise ValueError("a double chain needs at least two columns")
    g = _check_rate(rate)
    upper = [ModeRef(f"u{j}", (float(j), 0.0)) for j in range(1, N + 1)]
    lower = [ModeRef(f"l{j}", (float(j), 1.0)) for j in range(1, N + 1)]
    diss = [
        Dissipator.from_map(g, {upper[j].label: 1, lower[j].label: -1,
                                upper[j + 1].label: 1, lower[j + 1].label: -1})
        for j in range(N - 1)
    ]
    return Circuit(upper + lower, diss, {"builder": "double_chain", "n_columns": N})


def square_label(r: int, c: int) -> str:
    """Label of lattice site (r, c), 0-based indices, 1-based in the label."""
    return f"s{r + 1}_{c + 1}"


def build_square_lattice(rows: int, cols: int, rate: float = 1.0) -> Circuit:
    """Square lattice with all-plus plaquette reservoirs on the checkerboard.

    A plaquette with upper-left site (j, k) carries a reservoir iff j + k is
    even, so every interior site sits in exactly two plaquettes.  Sites are
    row-major; ``metadata["plaquettes"]`` lists the 0-based upper-left corner
    of each dissipator in order.
    """
    if rows < 2 or cols < 2:
        raise ValueError("square lattice needs at least 2x2 sites")
    g = _check_rate(rate)
    modes = [ModeRef(square_label(r, c), (float(c), float(r))) for r in range(rows) for c in range(cols)]
    diss, plaquettes = [], []
    for j in range(rows - 1):
        for k in range(cols - 1):
            if (j + k) % 2:
                continue
            corners = [(j, k), (j + 1, k), (j, k + 1), (j + 1, k + 1)]
            diss.append(Dissipator.from_map(g, {square_label(*rc): 1 for rc in corners}))
            plaquettes.append((j, k))
    meta = {"builder": "square_lattice", "rows": rows, "cols": cols, "plaquettes": tuple(plaquettes)}
    return Circuit(modes, diss, meta)


def build_honeycomb(rows: int, cols: int, rate: float = 1.0) -> Circuit:
    """Honeycomb of ``rows x cols`` hexagonal cells (pointy-top, odd rows shifted).

    Each cell gets one reservoir with weights ``(-1)**k`` over its corners
    k = 1..6 taken counter-clockwise.  Shared vertices keep the parity of k
    across cells, so the signs form a global bipartite pattern.
    """
    if rows < 1 or cols < 1:
        raise ValueError("honeycomb needs at least one cell")
    g = _check_rate(rate)
    s3 = math.sqrt(3.0)
    vertices: dict[tuple[float, float], str] = {}
    modes: list[ModeRef] = []
    diss = []
    for r in range(rows):
        for c in range(cols):
            cx, cy = s3 * (c + 0.5 * (r % 2)), 1.5 * r
            w = {}
            for k in range(1, 7):
                ang = math.radians(30 + 60 * (k - 1))
                key = (round(cx + math.cos(ang), 9) + 0.0, round(cy + math.sin(ang), 9) + 0.0)
                if key not in vertices:
                    vertices[key] = f"h{len(vertices) + 1}"
                    modes.append(ModeRef(vertices[key], key))
                w[vertices[key]] = (-1) ** k
            diss.append(Dissipator.from_map(g, w))
    return Circuit(modes, diss, {"builder": "honeycomb", "rows": rows, "cols": cols})


def add_mode_loss(circuit: Circuit, mode: str, rate: float) -> Circuit:
    """Return a copy with plain single-mode loss on ``mode``."""
    circuit.index(mode)
    d = Dissipator.from_map(_check_rate(rate), {mode: 1})
    return replace(circuit, dissipators=circuit.dissipators + (d,))
