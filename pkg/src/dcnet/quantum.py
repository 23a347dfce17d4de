"""Quantum-state layer.

Mixtures of product coherent states stay mixtures of product coherent states
under the master equation; only the amplitudes move.  That reduction is
checked here against brute-force integration of the full Lindblad equation in
a truncated Fock basis for circuits of up to three modes.

Fock basis ordering is mode-major: the index of ``|n_1, ..., n_m>`` is
``sum_k n_k (cutoff + 1) ** (m - 1 - k)``, so the photon number of the last
mode runs fastest.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np
import scipy.sparse as sp
from scipy.integrate import solve_ivp
from scipy.special import gammaln

from .circuit import Circuit, build_chain, check
from .dynamics import asymptotic_state, evolve, kernel, spectrum

DEFAULT_CUTOFF = 6
LEAKAGE_WARN = 1e-4


class TruncationWarning(UserWarning):
    pass


# ---------------------------------------------------------------------------
# coherent-state mixtures


@dataclass
class CoherentMixture:
    weights: np.ndarray  # (K,)
    amplitudes: np.ndarray  # (K, n_modes)

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float).reshape(-1)
        self.amplitudes = np.atleast_2d(np.asarray(self.amplitudes, dtype=complex))
        if self.weights.size == 0:
            raise ValueError("a mixture needs at least one component")
        if self.amplitudes.shape[0] != self.weights.size:
            raise ValueError("one amplitude vector per weight is required")
        if np.any(self.weights < 0) or abs(self.weights.sum() - 1.0) > 1e-12:
            raise ValueError("weights must be non-negative and sum to 1")

    def mean_photon_number(self) -> float:
        return float(self.weights @ np.sum(np.abs(self.amplitudes) ** 2, axis=1))


def evolve_mixture(circuit: Circuit, mixture: CoherentMixture, t: float) -> CoherentMixture:
    if t < 0:
        raise ValueError("t must be non-negative")
    amps = np.array([evolve(circuit, a, [t]).final for a in mixture.amplitudes])
    return CoherentMixture(mixture.weights.copy(), amps)


def product_coherent_fidelity(a, b) -> float:
    """``|<a|b>|^2`` for product coherent states."""
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    if a.shape != b.shape:
        raise ValueError("amplitude vectors differ in length")
    return float(np.exp(-np.sum(np.abs(a - b) ** 2)))


@dataclass
class ErasureReport:
    alpha_bar: np.ndarray  # asymptotic common amplitude, one per signal component
    delta_e: float  # total mean photon number lost, from the kernel projection
    delta_e_closed_form: float
    delta_e_trajectory: float  # same quantity from the propagated amplitudes
    delta_e0: float  # signal-mode energy change at this N
    delta_e0_large_n: float  # sum p |beta|^2 - |alpha|^2
    fidelity_to_phi: float
    reservoir_condition_residual: float  # |alpha| - sum p |beta| cos(arg beta - arg alpha)


def erasure_scenario(N: int, alpha: complex, signal: Sequence[tuple[float, complex]], rate: float = 1.0) -> ErasureReport:
    """Signal mode attached to the end of an (N+1)-mode chain held at ``alpha``.

    The signal starts in ``sum_j p_j |beta_j><beta_j|``.  Mode 0 of the
    (N+2)-mode chain is the signal.
    """
    if N < 1:
        raise ValueError("N must be positive")
    if not signal:
        raise ValueError("signal distribution is empty")
    p = np.array([s[0] for s in signal], dtype=float)
    beta = np.array([s[1] for s in signal], dtype=complex)
    alpha = complex(alpha)
    chain = build_chain(N + 2, rate)
    init = np.full((p.size, N + 2), alpha, dtype=complex)
    init[:, 0] = beta
    mix = CoherentMixture(p, init)

    final = np.array([asymptotic_state(chain, a) for a in init])
    alpha_bar = final[:, 0].copy()
    e0 = mix.mean_photon_number()
    delta_e = e0 - CoherentMixture(p, final).mean_photon_number()

    gap = spectrum(chain).gap
    late = evolve_mixture(chain, mix, 60.0 / gap)
    phi = np.full(N + 2, alpha)
    fid = float(sum(pk * product_coherent_fidelity(f, phi) for pk, f in zip(p, final)))
    cond = abs(alpha) - float(np.sum(p * np.abs(beta) * np.cos(np.angle(beta) - np.angle(alpha))))
    return ErasureReport(
        alpha_bar=alpha_bar,
        delta_e=float(delta_e),
        delta_e_closed_form=float((N + 1) / (N + 2) * np.sum(p * np.abs(beta - alpha) ** 2)),
        delta_e_trajectory=float(e0 - late.mean_photon_number()),
        delta_e0=float(np.sum(p * (np.abs(beta) ** 2 - np.abs(alpha_bar) ** 2))),
        delta_e0_large_n=float(np.sum(p * np.abs(beta) ** 2) - abs(alpha) ** 2),
        fidelity_to_phi=min(1.0, fid),
        reservoir_condition_residual=cond,
    )


# ---------------------------------------------------------------------------
# coherent superpositions (cat states): pure-state prediction from amplitudes


def evolve_superposition(circuit: Circuit, components, t: float):
    """Amplitudes and coherence factors for ``sum_a c_a |alpha_a>`` at time t.

    Returns ``(amps_t, F)`` such that the evolved density matrix is
    ``sum_ab c_a c_b^* F_ab |alpha_a(t)><alpha_b(t)|``, with
    ``F_ab = <alpha_b(0)|alpha_a(0)> / <alpha_b(t)|alpha_a(t)>``.
    """
    amps0 = np.atleast_2d(np.asarray(components, dtype=complex))
    amps_t = np.array([evolve(circuit, a, [t]).final for a in amps0])

    def log_overlap(a):
        # log <a_b|a_a> for all pairs, normalized coherent states
        g = a.conj() @ a.T  # g[b, a] = a_b^H a_a
        nrm = np.sum(np.abs(a) ** 2, axis=1)
        return g.T - 0.5 * nrm[:, None] - 0.5 * nrm[None, :]

    F = np.exp(log_overlap(amps0) - log_overlap(amps_t))
    return amps_t, F


# ---------------------------------------------------------------------------
# truncated Fock space


@dataclass
class FockDensityMatrix:
    n_modes: int
    cutoff: int
    matrix: np.ndarray
    leakage: float = 0.0

    @property
    def dim(self) -> int:
        return (self.cutoff + 1) ** self.n_modes

    def trace(self) -> float:
        return float(np.real(np.trace(self.matrix)))

    def total_photon_populations(self) -> np.ndarray:
        """Population of each total photon number 0 .. n_modes*cutoff."""
        tot = _total_number(self.n_modes, self.cutoff)
        diag = np.real(np.diag(self.matrix))
        return np.bincount(tot, weights=diag, minlength=self.n_modes * self.cutoff + 1)

    def mean_photon_number(self) -> float:
        pops = self.total_photon_populations()
        return float(np.arange(pops.size) @ pops)


@dataclass(frozen=True)
class GibbsSpec:
    beta: float
    cutoff: int = DEFAULT_CUTOFF

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError("inverse temperature must be positive")


@lru_cache(maxsize=16)
def _total_number(n_modes: int, cutoff: int) -> np.ndarray:
    grids = np.indices((cutoff + 1,) * n_modes).reshape(n_modes, -1)
    return grids.sum(axis=0)


@lru_cache(maxsize=16)
def annihilators(n_modes: int, cutoff: int) -> tuple[sp.csr_matrix, ...]:
    a = sp.diags(np.sqrt(np.arange(1, cutoff + 1)), 1, format="csr")
    eye = sp.identity(cutoff + 1, format="csr")
    ops = []
    for k in range(n_modes):
        op = sp.csr_matrix(np.ones((1, 1)))
        for m in range(n_modes):
            op = sp.kron(op, a if m == k else eye, format="csr")
        ops.append(op.astype(complex))
    return tuple(ops)


def coherent_ket(amplitudes, cutoff: int = DEFAULT_CUTOFF) -> tuple[np.ndarray, float]:
    """Truncated product coherent state, renormalized.  Returns (ket, dropped norm^2)."""
    amps = np.asarray(amplitudes, dtype=complex).reshape(-1)
    n = np.arange(cutoff + 1)
    ket = np.ones(1, dtype=complex)
    for alpha in amps:
        # alpha**n / sqrt(n!) e^{-|alpha|^2/2}, done in logs for stability
        with np.errstate(divide="ignore"):
            mag = np.exp(n * np.log(abs(alpha)) - 0.5 * gammaln(n + 1) - 0.5 * abs(alpha) ** 2) if alpha != 0 else (n == 0).astype(float)
        single = mag * np.exp(1j * n * np.angle(alpha))
        ket = np.kron(ket, single)
    kept = float(np.vdot(ket, ket).real)
    return ket / np.sqrt(kept), 1.0 - kept


def fock_ket(occupations: dict[tuple[int, ...], complex], n_modes: int, cutoff: int = DEFAULT_CUTOFF) -> np.ndarray:
    """Normalized superposition of number states ``{(n_1, .., n_m): amplitude}``."""
    ket = np.zeros((cutoff + 1) ** n_modes, dtype=complex)
    for occ, c in occupations.items():
        if len(occ) != n_modes or any(not 0 <= k <= cutoff for k in occ):
            raise ValueError(f"bad occupation {occ}")
        ket[np.ravel_multi_index(occ, (cutoff + 1,) * n_modes)] += c
    return ket / np.linalg.norm(ket)


def pure_density(ket: np.ndarray, n_modes: int, cutoff: int, leakage: float = 0.0) -> FockDensityMatrix:
    return FockDensityMatrix(n_modes, cutoff, np.outer(ket, ket.conj()), leakage)


def coherent_density(amplitudes, cutoff: int = DEFAULT_CUTOFF) -> FockDensityMatrix:
    amps = np.asarray(amplitudes, dtype=complex).reshape(-1)
    ket, lost = coherent_ket(amps, cutoff)
    return pure_density(ket, amps.size, cutoff, lost)


def superposition_density(coeffs, components, cutoff: int = DEFAULT_CUTOFF, coherence=None) -> FockDensityMatrix:
    """``sum_ab c_a c_b^* F_ab |alpha_a><alpha_b|`` normalized to unit trace."""
    comps = np.atleast_2d(np.asarray(components, dtype=complex))
    c = np.asarray(coeffs, dtype=complex)
    F = np.ones((c.size, c.size)) if coherence is None else np.asarray(coherence)
    kets = [coherent_ket(a, cutoff)[0] for a in comps]
    rho = sum(c[a] * np.conj(c[b]) * F[a, b] * np.outer(kets[a], kets[b].conj())
              for a in range(c.size) for b in range(c.size))
    rho = 0.5 * (rho + rho.conj().T)
    return FockDensityMatrix(comps.shape[1], cutoff, rho / np.trace(rho).real)


def _jump_operators(circuit: Circuit, cutoff: int):
    check(circuit)
    if circuit.n_modes > 3:
        raise ValueError("the Fock oracle handles at most three modes")
    ops = annihilators(circuit.n_modes, cutoff)
    X = circuit.weight_matrix()
    out = []
    for g, row in zip(circuit.rates(), X):
        if g == 0:
            continue
        A = sum((w * ops[k] for k, w in enumerate(row) if w != 0), sp.csr_matrix(ops[0].shape, dtype=complex))
        A = sp.csr_matrix(A)
        out.append((g, A, sp.csr_matrix(A.conj().T @ A)))
    return out


def _rhs(jumps, rho: np.ndarray) -> np.ndarray:
    out = np.zeros_like(rho)
    rho_h = rho.conj().T
    for g, A, K in jumps:
        # A rho A^dag = A (A rho^dag)^dag and rho K = (K rho^dag)^dag
        out += g * (2 * (A @ (A @ rho_h).conj().T) - K @ rho - (K @ rho_h).conj().T)
    return out


def lindblad_rhs(circuit: Circuit, rho: FockDensityMatrix) -> np.ndarray:
    """Right-hand side of the master equation for a Hermitian ``rho``."""
    if rho.n_modes != circuit.n_modes:
        raise ValueError("density matrix does not match the circuit")
    return _rhs(_jump_operators(circuit, rho.cutoff), rho.matrix)


def fock_oracle_trajectory(circuit: Circuit, rho0: FockDensityMatrix, times: Sequence[float]) -> list[FockDensityMatrix]:
    """Integrate the full master equation in the truncated Fock basis.

    Leakage is the initial truncation loss plus the largest population seen
    on states whose total photon number exceeds the cutoff (those states are
    not propagated faithfully).
    """
    if rho0.n_modes != circuit.n_modes:
        raise ValueError("density matrix does not match the circuit")
    t = np.atleast_1d(np.asarray(times, dtype=float))
    if np.any(t < 0) or np.any(np.diff(t) <= 0):
        raise ValueError("times must be non-negative and strictly increasing")
    jumps = _jump_operators(circuit, rho0.cutoff)
    d = rho0.dim

    def f(_, y):
        return _rhs(jumps, y.reshape(d, d)).reshape(-1)

    if t[-1] == 0:
        ys = np.repeat(rho0.matrix.reshape(-1, 1), t.size, axis=1)
    else:
        sol = solve_ivp(f, (0.0, float(t[-1])), rho0.matrix.reshape(-1).astype(complex),
                        method="DOP853", t_eval=t, rtol=1e-9, atol=1e-12)
        if not sol.success:
            raise RuntimeError(f"oracle integration failed: {sol.message}")
        ys = sol.y
    over = _total_number(rho0.n_modes, rho0.cutoff) > rho0.cutoff
    out = []
    worst = 0.0
    for k in range(t.size):
        m = ys[:, k].reshape(d, d)
        m = 0.5 * (m + m.conj().T)
        worst = max(worst, float(np.real(np.diag(m))[over].sum()))
        out.append(m)
    leakage = rho0.leakage + worst
    if leakage > LEAKAGE_WARN:
        warnings.warn(f"Fock truncation leakage {leakage:.3g} exceeds {LEAKAGE_WARN}", TruncationWarning, stacklevel=2)
    return [FockDensityMatrix(rho0.n_modes, rho0.cutoff, m, leakage) for m in out]


def fock_oracle_evolve(circuit: Circuit, rho0: FockDensityMatrix, t: float) -> FockDensityMatrix:
    return fock_oracle_trajectory(circuit, rho0, [t])[-1]


def trace_distance(a: FockDensityMatrix, b: FockDensityMatrix) -> float:
    return float(0.5 * np.abs(np.linalg.eigvalsh(a.matrix - b.matrix)).sum())


def fidelity_to_pure(rho: FockDensityMatrix, ket: np.ndarray) -> float:
    return float(np.real(ket.conj() @ rho.matrix @ ket))


def stationary_mode(circuit: Circuit) -> np.ndarray:
    """Coefficients ``v`` of the single stationary collective mode (A_sum for a chain)."""
    K = kernel(circuit)
    if K.shape[1] != 1:
        raise ValueError("circuit needs a one-dimensional stationary subspace")
    v = K[:, 0]
    return v * (abs(v[0]) / v[0]) if v[0] != 0 else v


def gibbs_state(circuit: Circuit, spec: GibbsSpec) -> FockDensityMatrix:
    """Thermal state ``exp(-beta B^dag B)`` of the stationary collective mode B.

    All modes orthogonal to B are in vacuum, i.e. the state lives in the
    sector generated from the vacuum by ``B^dag``.  Truncated at ``cutoff``
    quanta of B; the discarded thermal tail is reported through a warning.
    """
    if circuit.n_modes > 2:
        raise ValueError("Gibbs check is limited to two modes")
    v = stationary_mode(circuit)
    c = spec.cutoff
    ops = annihilators(circuit.n_modes, c)
    Bdag = sum(v[k] * ops[k].conj().T for k in range(circuit.n_modes))
    dim = (c + 1) ** circuit.n_modes
    ket = np.zeros(dim, dtype=complex)
    ket[0] = 1.0
    rho = np.zeros((dim, dim), dtype=complex)
    weights = np.exp(-spec.beta * np.arange(c + 1))
    for n in range(c + 1):
        rho += weights[n] * np.outer(ket, ket.conj())
        ket = (Bdag @ ket) / math.sqrt(n + 1)
    tail = math.exp(-spec.beta * (c + 1))
    if tail > 1e-6:
        warnings.warn(f"thermal weight beyond cutoff is {tail:.3g}", TruncationWarning, stacklevel=2)
    return FockDensityMatrix(circuit.n_modes, c, rho / np.trace(rho).real, tail)


def lindblad_residual(circuit: Circuit, rho: FockDensityMatrix) -> float:
    """Frobenius norm of ``d rho / dt``."""
    return float(np.linalg.norm(lindblad_rhs(circuit, rho)))


def gibbs_stationarity(circuit: Circuit, spec: GibbsSpec) -> float:
    return lindblad_residual(circuit, gibbs_state(circuit, spec))
