import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from dcnet.circuit import add_mode_loss, build_chain, build_square_lattice, build_two_arm
from dcnet.dynamics import (Trajectory, asymptotic_state, conserved_quantities, drift_matrix, evolve,
                            heat_residual, heat_variables, spectrum)

finite = st.floats(-3, 3, allow_nan=False)
cvec = lambda n: arrays(complex, n, elements=st.complex_numbers(max_magnitude=3, allow_nan=False, allow_infinity=False))


def test_drift_examples():
    assert np.allclose(drift_matrix(build_chain(3)), [[1, -1, 0], [-1, 2, -1], [0, -1, 1]])
    assert np.allclose(drift_matrix(build_square_lattice(2, 2)), np.ones((4, 4)))


def test_drift_hermitian_psd_with_complex_weights():
    from dcnet.circuit import Circuit, Dissipator, ModeRef
    c = Circuit([ModeRef("x"), ModeRef("y"), ModeRef("z")],
                [Dissipator(0.4, (("x", 1 + 2j), ("y", -0.5j))), Dissipator(1.1, (("y", 1), ("z", 2 - 1j)))])
    M = drift_matrix(c)
    assert np.allclose(M, M.conj().T)
    assert np.linalg.eigvalsh(M).min() > -1e-12


def test_two_mode_closed_form():
    tr = evolve(build_chain(2), [1, 0], [0.5])
    e = np.exp(-1.0)
    assert np.allclose(tr.final, [(1 + e) / 2, (1 - e) / 2], rtol=1e-12)
    assert np.allclose(tr.final, [0.68394, 0.31606], atol=5e-6)


def test_zero_time_exact():
    x = np.array([1 + 2j, -0.3, 0.25j])
    tr = evolve(build_chain(3), x, [0.0, 1.0])
    assert np.array_equal(tr.amplitudes[0], x)


def test_single_cell_map():
    tr = evolve(build_square_lattice(2, 2), [1, 0, 0, 0], [10.0])
    assert np.allclose(tr.final, [0.75, -0.25, -0.25, -0.25], atol=1e-8)


def test_asymptotic_examples():
    assert np.allclose(asymptotic_state(build_chain(3), [3, 0, 0]), [1, 1, 1], atol=1e-12)
    cell = add_mode_loss(add_mode_loss(build_square_lattice(2, 2), "s1_1", 1), "s1_2", 1)
    assert np.allclose(asymptotic_state(cell, [0, 0, 1, 0]), [0, 0, 0.5, -0.5], atol=1e-12)


def test_spectrum_examples():
    assert np.allclose(spectrum(build_chain(3)).eigenvalues, [0, 1, 3], atol=1e-12)
    s = spectrum(build_square_lattice(2, 2, 1.5))
    assert np.allclose(s.eigenvalues, [0, 0, 0, 6])
    assert s.kernel_dimension == 3 and s.gap == pytest.approx(6)


def test_trajectory_requires_increasing_times():
    with pytest.raises(ValueError):
        Trajectory(np.array([0.0, 0.0]), np.zeros((2, 1)), ("a",))
    with pytest.raises(ValueError):
        evolve(build_chain(2), [1, 0], [1.0, 0.5])
    with pytest.raises(ValueError):
        evolve(build_chain(2), [1, 0, 0], [1.0])


def euler(M, x0, t_end, dt):
    x = np.array(x0, dtype=complex)
    for _ in range(int(round(t_end / dt))):
        x = x - dt * (M @ x)
    return x


def test_matches_explicit_euler_oracle():
    c = build_chain(6, 1.0)
    rng = np.random.default_rng(3)
    x0 = rng.normal(size=6) + 1j * rng.normal(size=6)
    x0 /= np.linalg.norm(x0)  # Euler's own O(dt) error scales with |x0|
    ref = euler(drift_matrix(c), x0, 2.0, 1e-4)
    assert np.abs(evolve(c, x0, [2.0]).final - ref).max() < 1e-5


def test_time_dependent_rates_reduce_to_constant():
    c = build_chain(4, 0.8)
    x0 = [1, 0.5j, 0, -1]
    a = evolve(c, x0, [0.5, 1.5]).amplitudes
    b = evolve(c, x0, [0.5, 1.5], rates=lambda t: [0.8] * 3).amplitudes
    assert np.allclose(a, b, atol=1e-9)


def test_time_dependent_rates_pulse():
    # single dissipator with rate g(t): difference decays as exp(-2 * integral g)
    c = build_chain(2, 1.0)
    out = evolve(c, [1, 0], [2.0], rates=lambda t: [np.sin(t) ** 2]).final
    integral = 1.0 - np.sin(4.0) / 4.0
    d = np.exp(-2 * integral)
    assert np.allclose(out, [(1 + d) / 2, (1 - d) / 2], atol=1e-9)


def test_conserved_quantities_chain_and_two_arm():
    rng = np.random.default_rng(0)
    c = build_chain(5)
    tr = evolve(c, rng.normal(size=5) + 1j * rng.normal(size=5), np.linspace(0, 10, 41))
    rep = conserved_quantities(c, tr, {"sum": np.ones(5)})
    assert rep.extra["sum"] < 1e-9 and rep.max_residual < 1e-9

    c = build_two_arm(30, 1)
    coeff = np.zeros(c.n_modes)
    coeff[[c.index("L"), c.index("R")]] = 1
    tr = evolve(c, rng.normal(size=c.n_modes) + 1j * rng.normal(size=c.n_modes), np.linspace(0, 200, 21))
    assert conserved_quantities(c, tr, {"ctrl": coeff}).extra["ctrl"] < 1e-9


def test_kernel_vector_conserved_exactly():
    c = build_square_lattice(2, 2)
    tr = evolve(c, [1, -1, 0, 0], [0.5, 3.0, 20.0])
    assert np.allclose(tr.amplitudes, [1, -1, 0, 0], atol=1e-13)


def test_heat_variables_and_residual():
    c = build_square_lattice(6, 6)
    rng = np.random.default_rng(5)
    tr = evolve(c, rng.normal(size=36) + 1j * rng.normal(size=36), np.linspace(0, 3, 13))
    assert heat_residual(c, tr) < 1e-8
    lam = heat_variables(c, tr.amplitudes[0])
    assert len(lam) == len(c.metadata["plaquettes"])
    with pytest.raises(ValueError):
        heat_residual(build_chain(3), evolve(build_chain(3), [1, 0, 0], [1.0]))


def test_heat_equation_against_finite_differences():
    # independent check of the lattice equation from numerically differentiated trajectories
    c = build_square_lattice(6, 6)
    rng = np.random.default_rng(9)
    x0 = rng.normal(size=36)
    h = 1e-4
    t0 = 0.7
    tr = evolve(c, x0, [t0 - h, t0, t0 + h])
    lm, l0, lp = (heat_variables(c, a) for a in tr.amplitudes)
    for (j, k), val in l0.items():
        deriv = (lp[(j, k)] - lm[(j, k)]) / (2 * h)
        nb = sum(l0.get((j + dj, k + dk), 0) for dj in (-1, 1) for dk in (-1, 1))
        assert abs(deriv - (-4 * val + nb)) < 1e-6


@settings(max_examples=40, deadline=None)
@given(n=st.integers(2, 8), data=st.data())
def test_contraction_and_linearity(n, data):
    rates = data.draw(st.lists(st.floats(0, 3), min_size=n - 1, max_size=n - 1))
    c = build_chain(n, rates)
    x, y = data.draw(cvec(n)), data.draw(cvec(n))
    a, b = data.draw(st.complex_numbers(max_magnitude=2)), data.draw(st.complex_numbers(max_magnitude=2))
    ts = [0.1, 1.0, 7.0]
    ex, ey = evolve(c, x, ts).amplitudes, evolve(c, y, ts).amplitudes
    exy = evolve(c, a * x + b * y, ts).amplitudes
    assert np.allclose(exy, a * ex + b * ey, atol=1e-9 * (1 + np.abs(exy).max()))
    norms = np.linalg.norm(ex, axis=1)
    assert np.all(norms <= np.linalg.norm(x) * (1 + 1e-12) + 1e-12)


@settings(max_examples=30, deadline=None)
@given(n=st.integers(2, 7), data=st.data())
def test_asymptotic_matches_long_evolution(n, data):
    rates = data.draw(st.lists(st.floats(0.2, 3), min_size=n - 1, max_size=n - 1))
    c = build_chain(n, rates)
    x = data.draw(cvec(n))
    T = 40.0 / spectrum(c).gap
    assert np.allclose(asymptotic_state(c, x), evolve(c, x, [T]).final, atol=1e-6)
    p = asymptotic_state(c, x)
    assert np.allclose(asymptotic_state(c, p), p, atol=1e-12)
