"""Coherent-amplitude dynamics of a circuit.

For product coherent states the master equation reduces to the linear system
``d alpha / dt = -M alpha`` with the Hermitian PSD drift matrix
``M = X^H diag(gamma) X``.  Its kernel is the stationary subspace.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy.integrate import solve_ivp

from .circuit import Circuit, check

#: eigenvalues below ZERO_THRESHOLD * max eigenvalue count as zero
ZERO_THRESHOLD = 1e-10


@dataclass
class Trajectory:
    times: np.ndarray
    amplitudes: np.ndarray  # shape (n_times, n_modes)
    labels: tuple[str, ...] = ()
    unit: str = "gamma_t"

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex)
        if self.times.ndim != 1 or self.amplitudes.shape[0] != self.times.size:
            raise ValueError("times and amplitudes disagree in length")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("trajectory times must be strictly increasing")

    @property
    def final(self) -> np.ndarray:
        return self.amplitudes[-1]


@dataclass
class SpectrumResult:
    eigenvalues: np.ndarray
    kernel_dimension: int
    gap: float | None


@dataclass
class ConservationReport:
    kernel_residuals: np.ndarray
    extra: dict[str, float] = field(default_factory=dict)

    @property
    def max_residual(self) -> float:
        vals = list(self.kernel_residuals) + list(self.extra.values())
        return float(max(vals)) if vals else 0.0


def drift_matrix(circuit: Circuit) -> np.ndarray:
    """``M = X^H Gamma X`` in canonical mode order."""
    check(circuit)
    X = circuit.weight_matrix()
    M = X.conj().T @ (circuit.rates()[:, None] * X)
    return 0.5 * (M + M.conj().T)


def _scaled_weights(circuit: Circuit) -> np.ndarray:
    check(circuit)
    return np.sqrt(circuit.rates())[:, None] * circuit.weight_matrix()


def _as_vector(circuit: Circuit, initial) -> np.ndarray:
    x = np.asarray(initial, dtype=complex)
    if x.shape != (circuit.n_modes,):
        raise ValueError(f"amplitude vector has shape {x.shape}, circuit has {circuit.n_modes} modes")
    if not np.all(np.isfinite(x)):
        raise ValueError("amplitudes must be finite")
    return x


def _check_times(times) -> np.ndarray:
    t = np.atleast_1d(np.asarray(times, dtype=float))
    if np.any(t < 0) or np.any(np.diff(t) <= 0):
        raise ValueError("times must be non-negative and strictly increasing")
    return t


def kernel(circuit: Circuit) -> np.ndarray:
    """Orthonormal basis of ker(M) as columns, shape (n_modes, k).

    Computed from the SVD of ``sqrt(Gamma) X`` rather than from ``M`` so that
    ``X v`` is small at working precision, not at its square root.
    """
    W = _scaled_weights(circuit)
    n = circuit.n_modes
    if W.shape[0] == 0:
        return np.eye(n, dtype=complex)
    _, s, Vh = np.linalg.svd(W, full_matrices=True)
    smax = s.max() if s.size else 0.0
    if smax == 0:
        return np.eye(n, dtype=complex)
    rank = int(np.sum(s > np.sqrt(ZERO_THRESHOLD) * smax))
    return Vh[rank:].conj().T


def evolve(
    circuit: Circuit,
    initial,
    times: Sequence[float],
    rates: Callable[[float], Sequence[float]] | None = None,
    unit: str = "gamma_t",
) -> Trajectory:
    """Propagate coherent amplitudes, ``alpha(t) = exp(-M t) alpha(0)``.

    With constant rates the propagator comes from the eigendecomposition of M.
    ``rates`` may instead be a callable ``t -> per-dissipator rates`` for
    time-dependent reservoirs; that path uses an adaptive Runge-Kutta solver.
    """
    x0 = _as_vector(circuit, initial)
    t = _check_times(times)
    if rates is None:
        lam, V = np.linalg.eigh(drift_matrix(circuit))
        lam = np.clip(lam, 0.0, None)
        c = V.conj().T @ x0
        amps = (V @ (np.exp(-np.outer(lam, t)) * c[:, None])).T
        if t[0] == 0.0:
            amps[0] = x0
    else:
        check(circuit)
        X = circuit.weight_matrix()
        XH = X.conj().T

        def rhs(tt, y):
            g = np.asarray(rates(tt), dtype=float)
            return -(XH @ (g * (X @ y)))

        sol = solve_ivp(rhs, (0.0, float(t[-1])), x0, method="DOP853", t_eval=t,
                        rtol=1e-11, atol=1e-13)
        if not sol.success:
            raise RuntimeError(f"integration failed: {sol.message}")
        amps = sol.y.T
    return Trajectory(t, amps, tuple(circuit.labels), unit)


def asymptotic_state(circuit: Circuit, initial) -> np.ndarray:
    """Long-time limit: orthogonal projection onto ker(M)."""
    x0 = _as_vector(circuit, initial)
    K = kernel(circuit)
    return K @ (K.conj().T @ x0)


def spectrum(circuit: Circuit) -> SpectrumResult:
    W = _scaled_weights(circuit)
    n = circuit.n_modes
    s = np.linalg.svd(W, compute_uv=False) if W.size else np.zeros(0)
    ev = np.zeros(n)
    ev[: s.size] = s[:n] ** 2
    ev = np.sort(ev)
    cut = ZERO_THRESHOLD * ev.max() if ev.size and ev.max() > 0 else 0.0
    zero = ev <= cut
    nonzero = ev[~zero]
    return SpectrumResult(ev, int(zero.sum()), float(nonzero[0]) if nonzero.size else None)


def conserved_quantities(
    circuit: Circuit,
    trajectory: Trajectory,
    functionals: Mapping[str, Sequence[complex]] | None = None,
) -> ConservationReport:
    """Drift of every kernel component ``v^H alpha(t)`` along a trajectory.

    ``functionals`` adds named linear forms (coefficient vectors ``c``,
    evaluated as ``c . alpha``), e.g. ``alpha_R + alpha_L`` for the distributor.
    """
    A = trajectory.amplitudes
    if A.shape[1] != circuit.n_modes:
        raise ValueError("trajectory does not match the circuit")
    K = kernel(circuit)
    proj = A @ K.conj()
    res = np.abs(proj - proj[0]).max(axis=0) if proj.size else np.zeros(0)
    extra = {}
    for name, coeffs in (functionals or {}).items():
        c = np.asarray(coeffs, dtype=complex)
        vals = A @ c
        extra[name] = float(np.abs(vals - vals[0]).max())
    return ConservationReport(res, extra)


def heat_variables(circuit: Circuit, amplitudes) -> dict[tuple[int, int], complex]:
    """Sign-staggered plaquette expectations ``(-1)**j <A_{j,k}>`` of a square lattice."""
    plaquettes = circuit.metadata.get("plaquettes")
    if plaquettes is None:
        raise ValueError("heat variables need a circuit from build_square_lattice")
    A = circuit.weight_matrix()[: len(plaquettes)] @ np.asarray(amplitudes, dtype=complex)
    return {p: (-1) ** p[0] * a for p, a in zip(plaquettes, A)}


def heat_residual(circuit: Circuit, trajectory: Trajectory) -> float:
    """Max deviation of the plaquette variables from the discrete heat equation.

    On the checkerboard lattice the staggered variables obey
    ``d lam/dt = -4 gamma lam + gamma * (sum of the four diagonal neighbours)``;
    the derivative is taken from the exact right-hand side ``-M alpha``.
    """
    plaquettes = circuit.metadata.get("plaquettes")
    if plaquettes is None:
        raise ValueError("heat residual needs a circuit from build_square_lattice")
    rates = circuit.rates()[: len(plaquettes)]
    if rates.size == 0 or not np.allclose(rates, rates[0]):
        raise ValueError("heat equation form needs uniform plaquette rates")
    gamma = rates[0]
    M = drift_matrix(circuit)
    worst = 0.0
    for alpha in trajectory.amplitudes:
        lam = heat_variables(circuit, alpha)
        dlam = heat_variables(circuit, -M @ alpha)
        for (j, k), val in lam.items():
            nb = sum(lam.get((j + dj, k + dk), 0.0) for dj in (-1, 1) for dk in (-1, 1))
            worst = max(worst, abs(dlam[(j, k)] - gamma * (-4 * val + nb)))
    return float(worst)
