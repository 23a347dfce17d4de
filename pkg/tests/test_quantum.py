import warnings

import numpy as np
import pytest

from dcnet.circuit import add_mode_loss, build_chain
from dcnet.dynamics import evolve
from dcnet.quantum import (CoherentMixture, GibbsSpec, TruncationWarning, annihilators,
                           coherent_density, coherent_ket, erasure_scenario, evolve_mixture,
                           evolve_superposition, fidelity_to_pure, fock_ket, fock_oracle_evolve,
                           fock_oracle_trajectory, gibbs_state, gibbs_stationarity, lindblad_residual,
                           product_coherent_fidelity, pure_density, superposition_density, trace_distance)
from dcnet.stationary import single_photon_stationarity


def test_product_coherent_fidelity():
    assert product_coherent_fidelity([1, 2j], [1, 2j]) == 1.0
    assert product_coherent_fidelity([1], [0]) == pytest.approx(0.367879441171, rel=1e-11)
    assert product_coherent_fidelity([0.75] * 4, [1] * 4) == pytest.approx(0.778800783071, rel=1e-11)
    with pytest.raises(ValueError):
        product_coherent_fidelity([1], [1, 2])


def test_mixture_validation():
    with pytest.raises(ValueError):
        CoherentMixture([], np.zeros((0, 2)))
    with pytest.raises(ValueError):
        CoherentMixture([0.5, 0.4], [[1, 0], [0, 1]])
    with pytest.raises(ValueError):
        CoherentMixture([1.0], [[1, 0], [0, 1]])


def test_evolve_mixture():
    c = build_chain(3)
    one = CoherentMixture([1.0], [[1, 0, 2j]])
    out = evolve_mixture(c, one, 0.8)
    assert np.allclose(out.amplitudes[0], evolve(c, [1, 0, 2j], [0.8]).final)
    cat = CoherentMixture([0.3, 0.7], [[1.5, 0, 0], [0, 0, -3j]])
    late = evolve_mixture(c, cat, 60.0)
    assert np.array_equal(late.weights, [0.3, 0.7])
    assert np.allclose(late.amplitudes, [[0.5] * 3, [-1j] * 3], atol=1e-12)


def test_mixture_energy_non_increasing():
    c = build_chain(5, [0.5, 1, 2, 1])
    rng = np.random.default_rng(1)
    mix = CoherentMixture([0.2, 0.5, 0.3], rng.normal(size=(3, 5)) + 1j * rng.normal(size=(3, 5)))
    e = [evolve_mixture(c, mix, t).mean_photon_number() for t in np.linspace(0, 8, 33)]
    assert np.all(np.diff(e) <= 1e-12)


def test_erasure_examples():
    r = erasure_scenario(2, 1.0, [(1.0, 0.0)])
    assert r.alpha_bar[0] == pytest.approx(0.75, abs=1e-12)
    assert r.delta_e == pytest.approx(0.75, abs=1e-12)
    assert r.delta_e_closed_form == pytest.approx(0.75, abs=1e-15)
    assert r.fidelity_to_phi == pytest.approx(0.778800783071, rel=1e-11)

    r = erasure_scenario(4, 0.3 - 0.2j, [(1.0, 0.3 - 0.2j)])
    assert np.allclose(r.alpha_bar, 0.3 - 0.2j) and abs(r.delta_e) < 1e-12 and r.fidelity_to_phi == pytest.approx(1)


def test_erasure_mixture_and_delta_e0():
    sig = [(0.25, 2.0), (0.75, -0.5j)]
    N, alpha = 5, 0.8
    r = erasure_scenario(N, alpha, sig)
    bars = [(b + (N + 1) * alpha) / (N + 2) for _, b in sig]
    assert np.allclose(r.alpha_bar, bars, atol=1e-12)
    assert r.delta_e == pytest.approx(r.delta_e_closed_form, abs=1e-12)
    assert r.delta_e_trajectory == pytest.approx(r.delta_e_closed_form, abs=1e-6)
    expect_e0 = sum(p * (abs(b) ** 2 - abs(a) ** 2) for (p, b), a in zip(sig, bars))
    assert r.delta_e0 == pytest.approx(expect_e0, abs=1e-12)
    assert r.delta_e0_large_n == pytest.approx(0.25 * 4 + 0.75 * 0.25 - 0.64)
    # condition |alpha| = sum p |beta| cos(arg beta - arg alpha)
    assert r.reservoir_condition_residual == pytest.approx(0.8 - 0.25 * 2.0)
    with pytest.raises(ValueError):
        erasure_scenario(3, 1.0, [])


def test_erasure_fidelity_closed_form():
    for N in (2, 9, 29):
        for beta in (0, 0.5, 1j):
            r = erasure_scenario(N, 1.0, [(1.0, beta)])
            assert r.fidelity_to_phi == pytest.approx(np.exp(-abs(beta - 1) ** 2 / (N + 2)), rel=1e-9)


def test_coherent_ket_normalization():
    ket, lost = coherent_ket([0.5, 0.3j], 6)
    assert np.linalg.norm(ket) == pytest.approx(1)
    assert 0 < lost < 1e-5
    ket, lost = coherent_ket([0.0], 3)
    assert np.array_equal(ket, [1, 0, 0, 0]) and lost == 0
    # mode-major: |n1, n2> -> n1 * (cutoff+1) + n2
    k = fock_ket({(1, 0): 1}, 2, 2)
    assert k[3] == 1


def test_annihilator_commutator():
    a, b = annihilators(2, 4)
    comm = (a @ a.conj().T - a.conj().T @ a).toarray()
    # [a, a^dag] = 1 except on the truncated top level
    d = np.real(np.diag(comm)).reshape(5, 5)
    assert np.allclose(d[:4], 1) and np.allclose(d[4], -4)
    assert np.allclose((a @ b - b @ a).toarray(), 0)


def test_symmetric_single_photon_stationary():
    c = build_chain(2)
    rho0 = pure_density(fock_ket({(1, 0): 1, (0, 1): 1}, 2), 2, 6)
    assert trace_distance(fock_oracle_evolve(c, rho0, 5.0), rho0) < 1e-8


def test_antisymmetric_single_photon_decay():
    c = build_chain(2)
    rho0 = pure_density(fock_ket({(1, 0): 1, (0, 1): -1}, 2), 2, 6)
    for t, rho in zip([0.25, 1.0], fock_oracle_trajectory(c, rho0, [0.25, 1.0])):
        assert rho.total_photon_populations()[1] == pytest.approx(np.exp(-4 * t), abs=1e-6)


def test_single_photon_cross_validation_three_modes():
    c = build_chain(3, [1.0, 0.5])
    cases = [np.array([1, 1, 1]) / np.sqrt(3), np.array([1, -1, 0]) / np.sqrt(2), np.array([1, 0, -1j]) / np.sqrt(2)]
    for coeff in cases:
        rho0 = pure_density(fock_ket({(1, 0, 0): coeff[0], (0, 1, 0): coeff[1], (0, 0, 1): coeff[2]}, 3, 2), 3, 2)
        rho = fock_oracle_evolve(c, rho0, 2.0)
        # the one-photon block evolves with the same drift matrix
        amp = evolve(c, coeff, [2.0]).final
        ket = fock_ket({(1, 0, 0): 1}, 3, 2) * 0
        for k, occ in enumerate([(1, 0, 0), (0, 1, 0), (0, 0, 1)]):
            ket += amp[k] * fock_ket({occ: 1}, 3, 2)
        expect = np.outer(ket, ket.conj())
        one = np.abs(np.diag(expect)) > 0
        block = rho.matrix[np.ix_(one, one)]
        assert np.allclose(block, expect[np.ix_(one, one)], atol=1e-8)
        st = single_photon_stationarity(c, coeff).stationary
        assert st == (abs(rho.total_photon_populations()[1] - 1) < 1e-8)


def test_coherent_product_matches_amplitudes():
    c = build_chain(2)
    rho = fock_oracle_evolve(c, coherent_density([0.5, 0.0]), 1.0)
    ket, _ = coherent_ket(evolve(c, [0.5, 0], [1.0]).final, 6)
    assert fidelity_to_pure(rho, ket) > 1 - 1e-6
    assert abs(rho.trace() - 1) < 1e-6


def test_three_mode_coherent_with_complex_weights():
    from dcnet.circuit import Circuit, Dissipator, ModeRef
    c = Circuit([ModeRef("x"), ModeRef("y"), ModeRef("z")],
                [Dissipator(0.7, (("x", 1), ("y", -1j))), Dissipator(0.4, (("y", 1), ("z", 0.5 + 0.5j)))])
    a0 = [0.4, 0.3j, -0.2]
    rho = fock_oracle_evolve(c, coherent_density(a0, 5), 1.5)
    ket, _ = coherent_ket(evolve(c, a0, [1.5]).final, 5)
    assert fidelity_to_pure(rho, ket) > 1 - 1e-6


def test_single_mode_loss_analytic():
    c = add_mode_loss(build_chain(2, 0.0), "a1", 0.5)
    rho = fock_oracle_evolve(c, coherent_density([0.6, 0.0]), 2.0)
    # single-mode loss: alpha(t) = alpha(0) exp(-gamma t)
    ket, _ = coherent_ket([0.6 * np.exp(-1.0), 0.0], 6)
    assert fidelity_to_pure(rho, ket) > 1 - 1e-6


def test_cat_state_coherences_follow_prediction():
    c = build_chain(2)
    comps = [[0.8, 0.0], [-0.8, 0.0]]
    coeffs = [1, 1]
    t = 1.5
    amps_t, F = evolve_superposition(c, comps, t)
    err = []
    for cutoff in (8, 12):
        rho = fock_oracle_evolve(c, superposition_density(coeffs, comps, cutoff), t)
        err.append(trace_distance(rho, superposition_density(coeffs, amps_t, cutoff, F)))
    # remaining mismatch is truncation error and shrinks with the cutoff
    assert err[1] < 1e-7 and err[1] < err[0] / 100
    # off-diagonals between the two components survive
    assert np.abs(F[0, 1]) < 1


def test_trace_conserved_with_generous_cutoff():
    c = build_chain(2)
    for rho in fock_oracle_trajectory(c, coherent_density([0.7, -0.3], 10), np.linspace(0.5, 5, 4)):
        assert abs(rho.trace() - 1) < 1e-6
        assert np.allclose(rho.matrix, rho.matrix.conj().T)
        assert np.linalg.eigvalsh(rho.matrix).min() > -1e-8


def test_leakage_warning():
    c = build_chain(2)
    with pytest.warns(TruncationWarning):
        rho = fock_oracle_evolve(c, coherent_density([2.0, 0.0], 3), 0.5)
    assert rho.leakage > 1e-4


def test_oracle_rejects_large_circuits():
    with pytest.raises(ValueError):
        fock_oracle_evolve(build_chain(4), coherent_density([0, 0, 0, 0], 1), 1.0)


def test_gibbs():
    c = build_chain(2)
    with pytest.warns(TruncationWarning):
        assert gibbs_stationarity(c, GibbsSpec(1.0, 6)) < 1e-6
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        assert gibbs_stationarity(c, GibbsSpec(20.0, 6)) < 1e-8
        rho = gibbs_state(c, GibbsSpec(20.0, 6))
    assert rho.trace() == pytest.approx(1)
    vac = pure_density(fock_ket({(0, 0): 1}, 2), 2, 6)
    assert lindblad_residual(c, vac) == 0.0
    with pytest.raises(ValueError):
        GibbsSpec(0.0)


def test_gibbs_thermal_distribution():
    c = build_chain(2)
    with pytest.warns(TruncationWarning):
        rho = gibbs_state(c, GibbsSpec(0.5, 6))
    pops = rho.total_photon_populations()[:7]
    w = np.exp(-0.5 * np.arange(7))
    assert np.allclose(pops, w / w.sum())


def test_non_stationary_density_has_residual():
    c = build_chain(2)
    rho = pure_density(fock_ket({(1, 0): 1}, 2), 2, 6)
    assert lindblad_residual(c, rho) > 0.1
    with pytest.raises(ValueError):
        lindblad_residual(build_chain(3), rho)
