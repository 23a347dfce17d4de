"""Stationary subspace analysis: kernel bases, compact localized states, loss robustness."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

import numpy as np

from .circuit import Circuit, add_mode_loss, check
from .dynamics import SpectrumResult, drift_matrix, kernel, spectrum

#: magnitude below which an amplitude counts as outside the support
SUPPORT_THRESHOLD = 1e-9
#: tolerance for ``X v = 0``
STATIONARY_TOL = 1e-9
DEFAULT_CANDIDATE_CAP = 10**6


class EnumerationBudgetExceeded(RuntimeError):
    pass


@dataclass
class LocalizedState:
    amplitudes: np.ndarray
    support: tuple[str, ...]

    @property
    def support_size(self) -> int:
        return len(self.support)


@dataclass
class RobustnessReport:
    stationary: bool
    residual: float
    lossy_support: tuple[str, ...]
    surviving_fraction: float  # |P_new v| / |v|, P_new the new kernel projector
    spectrum_before: SpectrumResult
    spectrum_after: SpectrumResult


@dataclass
class PhotonStationarity:
    stationary: bool
    residual: float
    decay_rate: float  # <c|M|c>, the amplitude decay rate when c is an eigenvector


def kernel_basis(circuit: Circuit) -> list[np.ndarray]:
    """Orthonormal basis of the stationary subspace."""
    K = kernel(circuit)
    return [K[:, i].copy() for i in range(K.shape[1])]


def _active_weights(circuit: Circuit) -> np.ndarray:
    X = circuit.weight_matrix()
    return X[circuit.rates() > 0]


def kernel_residual(circuit: Circuit, amplitudes) -> float:
    """``max_j |<A_j>|`` over reservoirs with non-zero rate."""
    check(circuit)
    v = np.asarray(amplitudes, dtype=complex)
    X = _active_weights(circuit)
    return float(np.abs(X @ v).max()) if X.size else 0.0


def normalize_phase(v: np.ndarray) -> np.ndarray:
    """Unit norm, first significant entry real and positive."""
    v = np.asarray(v, dtype=complex)
    v = v / np.linalg.norm(v)
    big = np.flatnonzero(np.abs(v) > SUPPORT_THRESHOLD)
    if big.size:
        v = v * (abs(v[big[0]]) / v[big[0]])
    return v


def localized_state(circuit: Circuit, amplitudes) -> LocalizedState:
    v = np.asarray(amplitudes, dtype=complex)
    scale = np.abs(v).max()
    mask = np.abs(v) > SUPPORT_THRESHOLD * max(scale, 1.0)
    labels = circuit.labels
    return LocalizedState(v, tuple(labels[i] for i in np.flatnonzero(mask)))


def adjacency(circuit: Circuit) -> list[set[int]]:
    """Modes are adjacent when they share a reservoir with non-zero rate."""
    X = _active_weights(circuit)
    adj: list[set[int]] = [set() for _ in range(circuit.n_modes)]
    for row in X:
        nz = np.flatnonzero(row)
        for i in nz:
            adj[i].update(int(j) for j in nz if j != i)
    return adj


def connected_subsets(adj: Sequence[set[int]], max_size: int, cap: int = DEFAULT_CANDIDATE_CAP) -> Iterator[tuple[int, ...]]:
    """Each connected vertex subset of size <= max_size exactly once (ESU enumeration)."""
    count = 0

    def extend(sub: list[int], nbhd: set[int], ext: list[int], root: int):
        nonlocal count
        count += 1
        if count > cap:
            raise EnumerationBudgetExceeded(f"more than {cap} candidate supports; lower max_support or raise the cap")
        yield tuple(sorted(sub))
        if len(sub) == max_size:
            return
        ext = list(ext)
        while ext:
            w = ext.pop(0)
            new = sorted(set(ext) | {u for u in adj[w] if u > root and u not in nbhd})
            yield from extend(sub + [w], nbhd | adj[w] | {w}, new, root)

    for v in range(len(adj)):
        yield from extend([v], adj[v] | {v}, sorted(u for u in adj[v] if u > v), v)


def find_localized_states(
    circuit: Circuit,
    max_support: int,
    max_candidates: int = DEFAULT_CANDIDATE_CAP,
) -> list[LocalizedState]:
    """Stationary states supported on at most ``max_support`` connected modes.

    Every connected support S is tested by restricting the weight matrix to
    the columns in S.  For each site s in S, the projection of the unit
    vector on s onto the restricted null space is kept when it is non-zero
    on every site of S.  Results are deduplicated up to a complex factor and
    sorted by support size, then by mode index.
    """
    check(circuit)
    n = circuit.n_modes
    if not 1 <= max_support <= n:
        raise ValueError(f"max_support must lie in [1, {n}]")
    X = _active_weights(circuit)
    labels = circuit.labels
    found: dict[tuple, tuple[tuple[int, ...], np.ndarray]] = {}
    for S in connected_subsets(adjacency(circuit), max_support, max_candidates):
        cols = list(S)
        sub = X[:, cols]
        sub = sub[np.any(sub != 0, axis=1)]
        if sub.shape[0]:
            _, s, Vh = np.linalg.svd(sub)
            rank = int(np.sum(s > 1e-10 * max(s.max(), 1.0)))
            N = Vh[rank:].conj().T
        else:
            N = np.eye(len(cols), dtype=complex)
        if N.shape[1] == 0:
            continue
        P = N @ N.conj().T
        for i in range(len(cols)):
            p = P[:, i]
            if np.linalg.norm(p) < 1e-8 or np.abs(p).min() < 1e-8 * np.abs(p).max():
                continue
            p = normalize_phase(p)
            key = (S, tuple(np.round(p.real, 9) + 0.0) + tuple(np.round(p.imag, 9) + 0.0))
            if key not in found:
                found[key] = (S, p)
    states = []
    for S, p in sorted(found.values(), key=lambda item: (len(item[0]), item[0], tuple(-np.abs(item[1])))):
        v = np.zeros(n, dtype=complex)
        v[list(S)] = p
        states.append(LocalizedState(v, tuple(labels[i] for i in S)))
    return states


def loss_robustness(
    circuit: Circuit,
    state: LocalizedState | np.ndarray,
    lossy_modes: Iterable[str],
    rate: float,
) -> RobustnessReport:
    """Add single-mode loss on ``lossy_modes`` and test whether ``state`` stays stationary."""
    v = state.amplitudes if isinstance(state, LocalizedState) else np.asarray(state, dtype=complex)
    if kernel_residual(circuit, v) > STATIONARY_TOL * max(1.0, np.abs(v).max()):
        raise ValueError("state is not stationary in the original circuit")
    if rate <= 0:
        raise ValueError("loss rate must be positive")
    lossy = list(lossy_modes)
    lossy_circuit = circuit
    for m in lossy:
        lossy_circuit = add_mode_loss(lossy_circuit, m, rate)
    res = kernel_residual(lossy_circuit, v)
    K = kernel(lossy_circuit)
    surviving = np.linalg.norm(K @ (K.conj().T @ v)) / np.linalg.norm(v)
    support = localized_state(circuit, v).support
    return RobustnessReport(
        stationary=res <= STATIONARY_TOL * max(1.0, np.abs(v).max()),
        residual=res,
        lossy_support=tuple(m for m in lossy if m in support),
        surviving_fraction=float(surviving),
        spectrum_before=spectrum(circuit),
        spectrum_after=spectrum(lossy_circuit),
    )


def single_photon_stationarity(circuit: Circuit, coefficients) -> PhotonStationarity:
    """Stationarity of ``sum_k c_k a_k^dag |0...0>``.

    The single-excitation sector evolves with the same drift matrix as the
    coherent amplitudes, so the state is stationary iff ``X c = 0``.
    """
    c = np.asarray(coefficients, dtype=complex)
    if c.shape != (circuit.n_modes,):
        raise ValueError("coefficient vector does not match the circuit")
    if abs(np.linalg.norm(c) - 1.0) > 1e-9:
        raise ValueError("coefficients must be normalized")
    res = kernel_residual(circuit, c)
    rate = float(np.real(c.conj() @ drift_matrix(circuit) @ c))
    return PhotonStationarity(res <= STATIONARY_TOL, res, rate)
