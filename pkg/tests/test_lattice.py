import numpy as np
import pytest
from scipy import stats

from chargeflow.lattice import (
    LatticeParams,
    NodeError,
    _t_commutator_matrix,
    bell_jump_rates,
    build_model,
    check_T_commutation,
    check_gauge_equivalence,
    evolve,
    ground_state_current,
    lattice_dimension,
    lattice_ground_state,
    reversal_conditions_check,
    run_bell_ensemble,
    run_bell_process,
    sector_reversal,
)
from chargeflow.model import classify_charges
from chargeflow.presets import FIGURE_CHARGES, lattice_preset

THETA_GRID = np.linspace(-np.pi / 2, np.pi / 2, 360, endpoint=False)


def random_params(rng, L_max=6, n_sources_max=3):
    L = int(rng.integers(2, L_max + 1))
    n_max = int(rng.integers(1, 3))
    n_src = int(rng.integers(1, min(n_sources_max, L) + 1))
    sites = tuple(int(s) for s in rng.choice(L, size=n_src, replace=False))
    g = tuple(
        rng.uniform(0.3, 1.5) * np.exp(1j * rng.uniform(0, 2 * np.pi)) for _ in range(n_src)
    )
    return LatticeParams(
        L=L, a=1.0, n_max=n_max, source_sites=sites, charges=g,
        m=float(rng.uniform(0.5, 2.0)), E0=float(rng.uniform(0.0, 1.0)), hbar=1.0,
    )


def random_state(rng, dim):
    psi = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return psi / np.linalg.norm(psi)


def test_dimension_formula_and_preset_size():
    model = build_model(lattice_preset())
    assert model.dim == 45 == lattice_dimension(8, 2)
    assert lattice_dimension(2, 1) == 3
    assert lattice_dimension(3, 3) == 1 + 3 + 6 + 10


def test_free_chain_matrix_by_hand():
    params = LatticeParams(L=2, a=1.0, n_max=1, source_sites=(), charges=())
    model = build_model(params)
    onsite = params.E0 + 1.0
    expected = np.array(
        [[0.0, 0.0, 0.0], [0.0, onsite, -0.5], [0.0, -0.5, onsite]], dtype=complex
    )
    assert model.basis == [(0, 0), (1, 0), (0, 1)]
    np.testing.assert_allclose(model.H, expected, atol=1e-15)


def test_single_real_source_gives_real_symmetric_matrix():
    model = build_model(
        LatticeParams(L=4, a=1.0, n_max=2, source_sites=(1,), charges=(0.7,))
    )
    assert np.max(np.abs(model.H.imag)) == 0.0
    np.testing.assert_allclose(model.H, model.H.T, atol=1e-15)


def test_imaginary_source_matrix_by_hand():
    model = build_model(
        LatticeParams(L=2, a=1.0, n_max=1, source_sites=(0,), charges=(1j,), E0=0.5)
    )
    expected = np.array(
        [[0.0, 1j, 0.0], [-1j, 1.5, -0.5], [0.0, -0.5, 1.5]], dtype=complex
    )
    np.testing.assert_allclose(model.H, expected, atol=1e-15)


def test_hermiticity_of_random_models():
    rng = np.random.default_rng(0)
    for _ in range(10):
        model = build_model(random_params(rng))
        np.testing.assert_allclose(model.H, model.H.conj().T, atol=1e-12)


def test_dimension_guard():
    with pytest.raises(ValueError):
        LatticeParams(L=100, a=1.0, n_max=4, source_sites=(0,), charges=(1.0,))


def test_evolve_identity_phase_and_group_property():
    rng = np.random.default_rng(1)
    model = build_model(lattice_preset())
    psi = random_state(rng, model.dim)
    np.testing.assert_allclose(evolve(model, psi, 0.0), psi)
    energy, ground = lattice_ground_state(model)
    np.testing.assert_allclose(
        evolve(model, ground, 0.8), np.exp(-1j * energy * 0.8) * ground, atol=1e-12
    )
    back = evolve(model, evolve(model, psi, 1.3), -1.3)
    np.testing.assert_allclose(back, psi, atol=1e-8)
    drift = abs(np.linalg.norm(evolve(model, psi, 1.0)) - 1.0)
    assert drift < 1e-9


def test_sector_reversal_is_an_antiunitary_involution():
    rng = np.random.default_rng(2)
    model = build_model(lattice_preset())
    psi = random_state(rng, model.dim)
    phi = random_state(rng, model.dim)
    theta = 0.9
    np.testing.assert_allclose(
        sector_reversal(model, theta, sector_reversal(model, theta, psi)), psi, atol=1e-12
    )
    np.testing.assert_allclose(
        np.vdot(sector_reversal(model, theta, psi), sector_reversal(model, theta, phi)),
        np.conj(np.vdot(psi, phi)),
        atol=1e-12,
    )


def test_T_commutation_vanishes_for_matching_phase():
    model = build_model(lattice_preset((1.0, -2.0)))
    assert check_T_commutation(model, 0.0) <= 1e-10
    rot = build_model(
        lattice_preset((np.exp(1j * np.pi / 3), -2.0 * np.exp(1j * np.pi / 3)))
    )
    assert check_T_commutation(rot, np.pi / 3) <= 1e-10
    assert check_T_commutation(rot, 0.0) > 1e-2


def test_T_commutation_grid_minimum_for_quarter_turn_pair():
    model = build_model(lattice_preset((1.0, 1j)))
    vals = check_T_commutation(model, THETA_GRID, kind="fro")
    assert vals.min() > 1e-2
    # S_j = 10 open creation slots per source makes the norm exactly sqrt(80),
    # independent of theta, for this charge pair
    np.testing.assert_allclose(vals.min(), np.sqrt(80.0), rtol=1e-12)


def test_frobenius_closed_form_matches_explicit_matrix():
    rng = np.random.default_rng(3)
    for _ in range(8):
        model = build_model(random_params(rng))
        theta = float(rng.uniform(-np.pi, np.pi))
        explicit = np.linalg.norm(_t_commutator_matrix(model, theta), "fro")
        closed = check_T_commutation(model, theta, kind="fro")
        np.testing.assert_allclose(closed, explicit, rtol=1e-11, atol=1e-13)
        op = check_T_commutation(model, theta, kind="op")
        assert op <= closed * (1 + 1e-9) + 1e-12


def test_commutation_dichotomy_matches_charge_classification():
    rng = np.random.default_rng(4)
    for _ in range(60):
        params = random_params(rng)
        if rng.random() < 0.5:
            # force a symmetric set: common phase, real magnitudes of both signs
            phase = np.exp(1j * rng.uniform(-np.pi / 2, np.pi / 2))
            params = LatticeParams(
                L=params.L, a=params.a, n_max=params.n_max,
                source_sites=params.source_sites,
                charges=tuple(
                    phase * rng.uniform(0.3, 1.5) * rng.choice([-1.0, 1.0])
                    for _ in params.source_sites
                ),
                m=params.m, E0=params.E0, hbar=params.hbar,
            )
        model = build_model(params)
        verdict = classify_charges(np.array(params.charges))
        if verdict.symmetric:
            assert check_T_commutation(model, verdict.theta, kind="fro") < 1e-8
        else:
            vals = check_T_commutation(model, THETA_GRID, kind="fro")
            assert vals.min() > 1e-8


def test_gauge_equivalence_is_exact():
    rng = np.random.default_rng(5)
    model = build_model(lattice_preset((1.0, 1j)))
    assert check_gauge_equivalence(model, 0.0) <= 1e-12
    for _ in range(10):
        m = build_model(random_params(rng))
        theta = float(rng.uniform(-np.pi, np.pi))
        assert check_gauge_equivalence(m, theta) <= 1e-12
    # group law: composing two rotations equals the single rotation
    t1, t2 = 0.4, -1.1
    assert check_gauge_equivalence(model, t1 + t2) <= 1e-12


def test_bell_rates_net_current_identity():
    rng = np.random.default_rng(6)
    model = build_model(lattice_preset((1.0, 1j)))
    psi = random_state(rng, model.dim)
    for qi in rng.choice(model.dim, size=5, replace=False):
        rates_out = bell_jump_rates(model, psi, int(qi))
        for occ, rate in rates_out.items():
            qj = model.state_index(occ)
            rates_back = bell_jump_rates(model, psi, occ)
            back = rates_back.get(model.basis[int(qi)], 0.0)
            lhs = rate * abs(psi[qi]) ** 2 - back * abs(psi[qj]) ** 2
            rhs = (
                2.0
                / model.params.hbar
                * np.imag(np.conj(psi[qj]) * model.H[qj, qi] * psi[qi])
            )
            np.testing.assert_allclose(lhs, rhs, atol=1e-14)
            assert rate == 0.0 or back == 0.0  # at most one active direction


def test_bell_rates_vanish_for_real_eigenstates():
    model = build_model(lattice_preset((1.0, -2.0)))
    _, ground = lattice_ground_state(model)
    ground = ground / np.exp(1j * np.angle(ground[np.argmax(np.abs(ground))]))
    for qi in range(model.dim):
        if abs(ground[qi]) > 1e-12:
            assert bell_jump_rates(model, ground, qi) == {}


def test_bell_rates_match_brute_force_on_three_state_model():
    model = build_model(
        LatticeParams(L=2, a=1.0, n_max=1, source_sites=(0,), charges=(1j,), E0=0.5)
    )
    rng = np.random.default_rng(7)
    psi = random_state(rng, 3)
    for qi in range(3):
        rates = bell_jump_rates(model, psi, qi)
        for qj in range(3):
            expected = (
                2.0 * max(0.0, np.imag(np.conj(psi[qj]) * model.H[qj, qi] * psi[qi]))
            ) / abs(psi[qi]) ** 2
            got = rates.get(model.basis[qj], 0.0)
            if qj == qi:
                assert model.basis[qj] not in rates
            else:
                np.testing.assert_allclose(got, expected, atol=1e-14)
    _, ground = lattice_ground_state(model)
    # single source is gauge-equivalent to a real coupling: stationary, no jumps
    assert all(
        bell_jump_rates(model, ground, qi) == {}
        for qi in range(3)
        if abs(ground[qi]) > 1e-12
    )


def test_bell_rates_signal_nodes():
    model = build_model(lattice_preset((1.0, 1j)))
    psi = np.zeros(model.dim, dtype=complex)
    psi[3] = 1.0
    with pytest.raises(NodeError):
        bell_jump_rates(model, psi, 0)


def test_bell_process_stationary_for_real_ground_state():
    model = build_model(lattice_preset((1.0, -2.0)))
    _, ground = lattice_ground_state(model)
    rec = run_bell_process(model, ground, 0.5, seed=11)
    assert len(rec.states) == 1 and rec.node_warnings == 0
    res = run_bell_ensemble(model, ground, 0.5, 300, seed=12)
    assert res.n_jumps.sum() == 0


def test_bell_ensemble_equivariance_three_presets():
    rng_seeds = {"real": 21, "rotated": 22, "asymmetric": 23}
    charge_sets = {
        "real": (1.0, -2.0),
        "rotated": (np.exp(1j * np.pi / 3), -2.0 * np.exp(1j * np.pi / 3)),
        "asymmetric": (1.0, 1j),
    }
    for name, charges in charge_sets.items():
        model = build_model(lattice_preset(charges))
        psi0 = np.zeros(model.dim, dtype=complex)
        psi0[0] = 1.0
        res = run_bell_ensemble(model, psi0, 0.6, 6000, seed=rng_seeds[name])
        probs = np.abs(evolve(model, psi0, 0.6)) ** 2
        counts = np.bincount(res.final_indices, minlength=model.dim)
        pooled = _pool_bins(counts, probs * 6000)
        p = stats.chisquare(*pooled).pvalue
        assert p > 0.01, (name, p)


def _pool_bins(counts, expected, min_expected=5.0):
    order = np.argsort(-expected)
    obs_pool, exp_pool = [], []
    acc_o = acc_e = 0.0
    for i in order:
        acc_o += counts[i]
        acc_e += expected[i]
        if acc_e >= min_expected:
            obs_pool.append(acc_o)
            exp_pool.append(acc_e)
            acc_o = acc_e = 0.0
    if acc_e > 0 and exp_pool:
        obs_pool[-1] += acc_o
        exp_pool[-1] += acc_e
    obs = np.array(obs_pool)
    exp = np.array(exp_pool)
    return obs, exp * obs.sum() / exp.sum()


def test_reversal_identity_follows_commutation():
    rng = np.random.default_rng(8)
    psi = random_state(rng, 45)
    sym = build_model(lattice_preset((1.0, -2.0)))
    rot = build_model(
        lattice_preset((np.exp(1j * np.pi / 5), -2.0 * np.exp(1j * np.pi / 5)))
    )
    asym = build_model(lattice_preset((1.0, 1j)))
    assert reversal_conditions_check(sym, 0.0, psi).passed
    assert reversal_conditions_check(rot, np.pi / 5, psi).passed
    assert not reversal_conditions_check(rot, 0.0, psi).passed
    for theta in np.linspace(-np.pi / 2, np.pi / 2, 9):
        rep = reversal_conditions_check(asym, theta, psi)
        assert not rep.passed
        assert rep.commutator_norm > 1e-2


def test_ground_state_current_dichotomy():
    assert ground_state_current(build_model(lattice_preset((1.0, -2.0)))).max_abs == 0.0
    rotated = build_model(
        lattice_preset((0.8 * np.exp(1j * 0.7), -1.2 * np.exp(1j * 0.7)))
    )
    assert ground_state_current(rotated).max_abs <= 1e-10
    rep = ground_state_current(build_model(lattice_preset(FIGURE_CHARGES)))
    assert rep.max_abs > 1e-3
    np.testing.assert_allclose(rep.max_abs, 0.009720226158657539, rtol=1e-9)


def test_ground_state_current_signals_degeneracy():
    model = build_model(lattice_preset((1.0, 1j)))
    with pytest.raises(ValueError):
        ground_state_current(model, gap_tol=1e9)


def test_truncation_convergence_is_quartic_in_coupling():
    def energy(scale, n_max):
        params = LatticeParams(
            L=5, a=1.0, n_max=n_max, source_sites=(1, 3),
            charges=(scale, -0.8 * scale), E0=1.0,
        )
        return lattice_ground_state(build_model(params))[0]

    g = 0.2
    d12 = abs(energy(g, 1) - energy(g, 2))
    d12_half = abs(energy(g / 2, 1) - energy(g / 2, 2))
    ratio = d12 / d12_half
    assert 10.0 < ratio < 24.0  # fourth-order scaling: ratio ~ 16
    d23 = abs(energy(g, 2) - energy(g, 3))
    assert d23 < d12
