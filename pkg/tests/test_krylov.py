import numpy as np
import pytest
import scipy.linalg

import oracles
from qkff.krylov import (
    OverlapRankError,
    Provenance,
    QDavidsonParams,
    StopRule,
    build_subspace_matrices,
    fast_forward,
    fidelity,
    load_subspace,
    mrk_build,
    mrqd_build,
    observable,
    qdavidson_build,
    qdavidson_step,
    reconstruct,
    regularized_solve,
    residue_norm,
    save_subspace,
    subspace_from_states,
)
from qkff.pauli import PauliString, PauliSum, heisenberg_xyz
from qkff.states import StateVector, basis_state, exact_evolve, neel_state

P = QDavidsonParams()


def _random_states(rng, n, count):
    return [StateVector(oracles.random_state(rng, n), n) for _ in range(count)]


def _chain_basis(h_dense, seed, m, tau):
    """Oracle real-time chain via dense eigendecomposition."""
    cols = [seed.copy()]
    for k in range(1, m):
        cols.append(oracles.unitary_propagate(h_dense, seed, k * tau))
    return cols


# ---------------------------------------------------------------- matrices


def test_matrices_single_neel_reference():
    h = heisenberg_xyz(8, 1, 1, 1, 1)
    d, e = build_subspace_matrices(h, [neel_state(8)])
    np.testing.assert_allclose(d, [[-7.0]], atol=1e-12)
    np.testing.assert_allclose(e, [[1.0]], atol=1e-12)


def test_matrices_z_on_basis_pair():
    z = PauliSum((PauliString("Z", 1.0),), 1)
    d, e = build_subspace_matrices(z, [basis_state(1, "0"), basis_state(1, "1")])
    np.testing.assert_allclose(d, np.diag([1.0, -1.0]), atol=1e-14)
    np.testing.assert_allclose(e, np.eye(2), atol=1e-14)


def test_matrices_match_dense_oracle_on_chain():
    h = heisenberg_xyz(4, 1, 1, 1, 1)
    hd = oracles.heisenberg_dense(4, 1, 1, 1, 1)
    cols = _chain_basis(hd, neel_state(4).amps, 5, 0.5)
    states = [StateVector(c, 4) for c in cols]
    d, e = build_subspace_matrices(h, states)
    B = np.stack(cols, axis=1)
    d_oracle = B.conj().T @ hd @ B
    e_oracle = B.conj().T @ B
    np.testing.assert_allclose(d, d_oracle, atol=1e-10)
    np.testing.assert_allclose(e, e_oracle, atol=1e-10)


def test_matrices_hermitian_and_psd():
    rng = np.random.default_rng(4)
    h = heisenberg_xyz(4, 0.9, 1.1, -0.7, 0.5)
    d, e = build_subspace_matrices(h, _random_states(rng, 4, 6))
    np.testing.assert_allclose(d, d.conj().T, atol=1e-10)
    np.testing.assert_allclose(e, e.conj().T, atol=1e-10)
    assert np.linalg.eigvalsh(e).min() >= -1e-10


def test_matrices_register_mismatch():
    h = heisenberg_xyz(3, 1, 1, 1, 1)
    with pytest.raises(ValueError):
        build_subspace_matrices(h, [neel_state(4)])


# ---------------------------------------------------------------- eigensolve


def test_regularized_solve_identity_overlap():
    rng = np.random.default_rng(6)
    a = rng.standard_normal((5, 5)) + 1j * rng.standard_normal((5, 5))
    d = 0.5 * (a + a.conj().T)
    sol = regularized_solve(d, np.eye(5, dtype=complex), 1e-12)
    np.testing.assert_allclose(sol.eigenvalues, np.linalg.eigvalsh(d), atol=1e-12)
    assert sol.retained_rank == 5


def test_regularized_solve_duplicate_vector():
    rng = np.random.default_rng(7)
    h = heisenberg_xyz(3, 1, 1, 1, 1)
    states = _random_states(rng, 3, 3)
    states.append(StateVector(states[0].amps.copy(), 3))  # exact duplicate
    d, e = build_subspace_matrices(h, states)
    sol = regularized_solve(d, e, 1e-12)
    assert sol.retained_rank == 3
    d0, e0 = build_subspace_matrices(h, states[:3])
    sol0 = regularized_solve(d0, e0, 1e-12)
    np.testing.assert_allclose(sol.eigenvalues, sol0.eigenvalues, atol=1e-8)


def test_regularized_solve_spectrum_bracketing():
    rng = np.random.default_rng(8)
    h = heisenberg_xyz(3, 1, 1, 1, 1)
    spectrum = np.linalg.eigvalsh(oracles.heisenberg_dense(3, 1, 1, 1, 1))
    d, e = build_subspace_matrices(h, _random_states(rng, 3, 3))
    sol = regularized_solve(d, e, 1e-12)
    assert sol.eigenvalues.min() >= spectrum.min() - 1e-9
    assert sol.eigenvalues.max() <= spectrum.max() + 1e-9


def test_regularized_solve_rank_zero():
    with pytest.raises(OverlapRankError):
        regularized_solve(np.eye(2, dtype=complex), np.zeros((2, 2), complex), 1e-12)


def test_regularized_solve_unitary_invariance():
    rng = np.random.default_rng(9)
    h = heisenberg_xyz(3, 1, 1, 1, 1)
    d, e = build_subspace_matrices(h, _random_states(rng, 3, 4))
    u = np.linalg.qr(rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4)))[0]
    sol = regularized_solve(d, e, 1e-12)
    sol_mixed = regularized_solve(u.conj().T @ d @ u, u.conj().T @ e @ u, 1e-12)
    np.testing.assert_allclose(sol.eigenvalues, sol_mixed.eigenvalues, atol=1e-8)


def test_eigenvectors_overlap_orthonormal():
    rng = np.random.default_rng(10)
    h = heisenberg_xyz(4, 1, 1, 1, 1)
    d, e = build_subspace_matrices(h, _random_states(rng, 4, 5))
    sol = regularized_solve(d, e, 1e-12)
    gram = sol.eigenvectors.conj().T @ e @ sol.eigenvectors
    np.testing.assert_allclose(gram, np.eye(sol.retained_rank), atol=1e-8)


# ---------------------------------------------------------------- residues


def test_residue_zero_for_contained_eigenpair():
    h = heisenberg_xyz(4, 1, 1, 1, 1)
    hd = oracles.heisenberg_dense(4, 1, 1, 1, 1)
    w, u = np.linalg.eigh(hd)
    ground = StateVector(u[:, 0].astype(complex), 4)
    sub = subspace_from_states(h, [ground])
    assert residue_norm(h, sub, np.array([1.0 + 0j]), float(w[0])) <= 1e-10


def test_residue_is_energy_variance_for_single_vector():
    h = heisenberg_xyz(6, 1, 1, 1, 1)
    hd = oracles.heisenberg_dense(6, 1, 1, 1, 1)
    sub = subspace_from_states(h, [neel_state(6)])
    lam = float(sub.d[0, 0].real)
    psi = neel_state(6).amps
    variance = float(np.real(psi.conj() @ hd @ hd @ psi) - np.real(psi.conj() @ hd @ psi) ** 2)
    assert abs(residue_norm(h, sub, np.array([1.0 + 0j]), lam) - variance) < 1e-8


def test_residue_matches_dense_quadratic_form():
    rng = np.random.default_rng(12)
    h = heisenberg_xyz(4, 1, 1, 1, 1)
    hd = oracles.heisenberg_dense(4, 1, 1, 1, 1)
    states = _random_states(rng, 4, 3)
    sub = subspace_from_states(h, states)
    v = rng.standard_normal(3) + 1j * rng.standard_normal(3)
    lam = 0.37
    B = np.stack([s.amps for s in states], axis=1)
    shifted = hd - lam * np.eye(16)
    oracle = float(np.real((B @ v).conj() @ shifted @ shifted @ (B @ v)))
    assert abs(residue_norm(h, sub, v, lam) - oracle) < 1e-10


# ---------------------------------------------------------------- qdavidson


def test_qdavidson_fixed_point_on_eigenstate():
    h = heisenberg_xyz(4, 1, 1, 1, 1)
    hd = oracles.heisenberg_dense(4, 1, 1, 1, 1)
    ground = StateVector(np.linalg.eigh(hd)[1][:, 0].astype(complex), 4)
    sub = subspace_from_states(h, [ground])
    out, rep = qdavidson_step(h, sub, P)
    assert rep.added == 0
    assert out is sub
    assert rep.residues.max() <= 1e-10


def test_qdavidson_growth_and_rebuild_oracle():
    h = heisenberg_xyz(4, 1, 1, 1, 1)
    sub = subspace_from_states(h, [neel_state(4)])
    out, rep = qdavidson_step(h, sub, QDavidsonParams(eps=1e-3, dtau=0.1, max_dim=16))
    assert rep.added >= 1
    assert out.dimension == sub.dimension + rep.added
    d_fresh, e_fresh = build_subspace_matrices(h, out.basis)
    np.testing.assert_allclose(out.d, d_fresh, atol=1e-10)
    np.testing.assert_allclose(out.e, e_fresh, atol=1e-10)
    kinds = [p.kind for p in out.provenance]
    assert kinds[0] == "initial" and set(kinds[1:]) == {"qdavidson-correction"}


def test_qdavidson_converges_to_small_residues():
    h = heisenberg_xyz(4, 1, 1, 1, 1)
    p = QDavidsonParams(eps=1e-3, dtau=0.1, max_dim=32)
    sub, rep = qdavidson_build(h, neel_state(4), p)
    assert max(rep.residues) <= p.eps**2
    # converged subspace is a fixed point
    again, rep2 = qdavidson_step(h, sub, p)
    assert rep2.added == 0 and again is sub


def test_qdavidson_respects_max_dim():
    h = heisenberg_xyz(6, 1, 1, 1, 1)
    p = QDavidsonParams(max_dim=7)
    sub, _ = qdavidson_build(h, neel_state(6), p)
    assert sub.dimension <= 7


def test_qdavidson_rejects_oversized_subspace():
    rng = np.random.default_rng(13)
    h = heisenberg_xyz(3, 1, 1, 1, 1)
    sub = subspace_from_states(h, _random_states(rng, 3, 4))
    with pytest.raises(ValueError):
        qdavidson_step(h, sub, QDavidsonParams(max_dim=2))


# ---------------------------------------------------------------- mrk


def test_mrk_stationary_reference():
    # Z-type Hamiltonian leaves the alternating state invariant up to phase
    terms = tuple(
        PauliString("I" * i + "Z" + "I" * (3 - i), 0.5 + 0.3 * i) for i in range(4)
    )
    h = PauliSum(terms, 4)
    sub, rep = mrk_build(
        h, neel_state(4), 6, 0.3, StopRule(max_references=1), QDavidsonParams(max_dim=12)
    )
    assert sub.dimension == 6
    np.testing.assert_allclose(np.abs(sub.e), np.ones((6, 6)), atol=1e-10)
    sol = regularized_solve(sub.d, sub.e, 1e-12)
    assert sol.retained_rank == 1


def test_mrk_single_reference_overlap_is_toeplitz():
    h = heisenberg_xyz(4, 1, 1, 1, 1)
    sub, _ = mrk_build(
        h, neel_state(4), 10, 0.1, StopRule(max_references=1), QDavidsonParams(max_dim=16)
    )
    e = sub.e
    for k in range(10):
        for ell in range(k, 10):
            assert abs(e[k, ell] - e[0, ell - k]) < 1e-10
    # entries are the seed's return amplitudes under real-time evolution
    hd = oracles.heisenberg_dense(4, 1, 1, 1, 1)
    seed = neel_state(4).amps
    for ell in range(10):
        expect = np.vdot(seed, oracles.unitary_propagate(hd, seed, 0.1 * ell))
        assert abs(e[0, ell] - expect) < 1e-10


def test_mrk_excludes_used_references():
    h = heisenberg_xyz(4, 1, 1, 1, 1)
    sub, rep = mrk_build(
        h, neel_state(4), 4, 0.2, StopRule(max_references=3), QDavidsonParams(max_dim=24)
    )
    assert rep.references == 3
    assert sub.dimension == 12
    seeds = [p for p in sub.provenance if p.power == 0]
    assert [p.ref for p in seeds] == [0, 1, 2]
    # seed states are distinct basis labels
    seed_cols = [sub.basis_matrix[:, 4 * r] for r in range(3)]
    labels = [int(np.argmax(np.abs(c))) for c in seed_cols]
    assert len(set(labels)) == 3


def test_mrk_needs_bounded_stop():
    h = heisenberg_xyz(3, 1, 1, 1, 1)
    with pytest.raises(ValueError):
        mrk_build(h, neel_state(3), 4, 0.1, StopRule(), QDavidsonParams())


def test_mrk_propagates_selection_exhaustion():
    # stationary chains burn through all four labels of a 2-qubit register
    terms = (PauliString("ZI", 0.9), PauliString("IZ", 0.4))
    h = PauliSum(terms, 2)
    with pytest.raises(ValueError, match="excluded"):
        mrk_build(
            h, neel_state(2), 2, 0.3, StopRule(max_references=10),
            QDavidsonParams(max_dim=64),
        )


def test_basis_columns_stored_normalized():
    h = heisenberg_xyz(4, 1, 1, 1, 1)
    sub, _ = mrk_build(
        h, neel_state(4), 5, 0.3, StopRule(max_references=2), QDavidsonParams(max_dim=16)
    )
    np.testing.assert_allclose(np.diag(sub.e).real, 1.0, atol=1e-10)


# ---------------------------------------------------------------- mrqd


def _target_stop(h, s0, t_final, target, tol=1e-12):
    exact = exact_evolve(h, s0, t_final, tol)
    return StopRule(fidelity_target=target, t_final=t_final, exact_final=exact)


def test_mrqd_degenerate_matches_mrk():
    # a target the seed chain already meets leaves the Davidson loop idle
    h = heisenberg_xyz(2, 1, 1, 1, 1)
    s0 = neel_state(2)
    stop = _target_stop(h, s0, 5.0, 0.9)
    p = QDavidsonParams(max_dim=16)
    sub_mrqd, rep_mrqd = mrqd_build(h, s0, 4, 0.2, stop, p)
    sub_mrk, _ = mrk_build(h, s0, 4, 0.2, stop, p)
    assert rep_mrqd.iterations == 0
    np.testing.assert_array_equal(sub_mrqd.basis_matrix, sub_mrk.basis_matrix)
    np.testing.assert_array_equal(sub_mrqd.d, sub_mrk.d)
    np.testing.assert_array_equal(sub_mrqd.e, sub_mrk.e)
    assert sub_mrqd.provenance == sub_mrk.provenance


def test_mrqd_provenance_and_rebuild():
    h = heisenberg_xyz(4, 1, 1, 1, 1)
    s0 = neel_state(4)
    stop = _target_stop(h, s0, 10.0, 0.95)
    sub, rep = mrqd_build(h, s0, 5, 0.1, stop, QDavidsonParams(max_dim=40))
    assert rep.converged
    for p in sub.provenance:
        assert p.kind in ("initial", "qdavidson-correction", "time-chain")
        if p.kind == "time-chain":
            assert 1 <= p.power <= 4
    d_fresh, e_fresh = build_subspace_matrices(h, sub.basis)
    np.testing.assert_allclose(sub.d, d_fresh, atol=1e-10)
    np.testing.assert_allclose(sub.e, e_fresh, atol=1e-10)
    # chain powers are genuine real-time evolutions of their reference
    by_ref = {}
    for idx, p in enumerate(sub.provenance):
        by_ref.setdefault(p.ref, {})[p.power] = sub.basis_matrix[:, idx]
    hd = oracles.heisenberg_dense(4, 1, 1, 1, 1)
    for powers in by_ref.values():
        for k in sorted(powers)[1:]:
            expect = oracles.unitary_propagate(hd, powers[0], 0.1 * k)
            assert np.linalg.norm(powers[k] - expect) < 1e-8


# ---------------------------------------------------------------- fast forward


def test_fast_forward_t0_is_exact_identity():
    rng = np.random.default_rng(14)
    h = heisenberg_xyz(3, 1, 1, 1, 1)
    sub = subspace_from_states(h, _random_states(rng, 3, 4))
    c0 = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    ff = fast_forward(sub, c0, P)
    np.testing.assert_array_equal(ff(0.0), c0)
    np.testing.assert_array_equal(ff.c0, c0)
    # same t twice gives identical results
    np.testing.assert_array_equal(ff(3.7), ff(3.7))


def test_fast_forward_full_span_reproduces_exact_dynamics():
    rng = np.random.default_rng(15)
    h = heisenberg_xyz(2, 1, 1, 1, 1)
    hd = oracles.heisenberg_dense(2, 1, 1, 1, 1)
    states = _random_states(rng, 2, 4)  # spans the 4-dimensional space
    sub = subspace_from_states(h, states)
    psi0 = oracles.random_state(rng, 2)
    B = np.stack([s.amps for s in states], axis=1)
    c0 = np.linalg.solve(B, psi0)
    ff = fast_forward(sub, c0, P)
    for t in (1.0, 5.0, 10.0):
        exact = oracles.unitary_propagate(hd, psi0, t)
        psi_k = reconstruct(sub, ff(t))
        fid = abs(np.vdot(exact, psi_k.amps)) ** 2
        assert fid >= 1.0 - 1e-8


def test_fast_forward_orthonormal_basis_reduces_to_plain_exponential():
    h = heisenberg_xyz(2, 1, 1, 1, 1)
    basis = [basis_state(2, b) for b in ("00", "01", "10", "11")]
    sub = subspace_from_states(h, basis)
    np.testing.assert_allclose(sub.e, np.eye(4), atol=1e-14)
    c0 = np.array([0, 1, 0, 0], complex)
    ff = fast_forward(sub, c0, P)
    for t in (0.5, 2.0, 9.0):
        c = ff(t)
        expect = scipy.linalg.expm(-1j * sub.d * t) @ c0
        np.testing.assert_allclose(c, expect, atol=1e-10)
        assert abs(np.linalg.norm(c) - 1.0) < 1e-10


def test_fast_forward_generator_matrix():
    rng = np.random.default_rng(16)
    h = heisenberg_xyz(2, 1, 1, 1, 1)
    sub = subspace_from_states(h, _random_states(rng, 2, 3))
    ff = fast_forward(sub, np.array([1, 0, 0], complex), P)
    e_inv = np.linalg.pinv(sub.e, rcond=1e-10)
    np.testing.assert_allclose(ff.generator, -1j * e_inv @ sub.d, atol=1e-8)


# ---------------------------------------------------------------- observables


def test_observable_neel_z1():
    h = heisenberg_xyz(8, 1, 1, 1, 1)
    sub = subspace_from_states(h, [neel_state(8)])
    z1 = PauliSum((PauliString("Z" + "I" * 7, 1.0),), 8)
    assert observable(sub, z1, np.array([1.0 + 0j])) == pytest.approx(1.0)


def test_observable_basis_coefficient_vector():
    rng = np.random.default_rng(18)
    h = heisenberg_xyz(3, 1, 1, 1, 1)
    states = _random_states(rng, 3, 3)
    sub = subspace_from_states(h, states)
    o = heisenberg_xyz(3, 0.2, -0.4, 0.9, 0.1)
    c = np.zeros(3, complex)
    c[1] = 1.0
    direct = float(
        np.real(np.vdot(states[1].amps, oracles.heisenberg_dense(3, 0.2, -0.4, 0.9, 0.1) @ states[1].amps))
    )
    assert observable(sub, o, c) == pytest.approx(direct, abs=1e-10)


def test_observable_matches_reconstructed_statevector():
    rng = np.random.default_rng(19)
    h = heisenberg_xyz(4, 1, 1, 1, 1)
    sub = subspace_from_states(h, _random_states(rng, 4, 5))
    o = heisenberg_xyz(4, 0.3, 0.3, -1.0, 0.8)
    od = oracles.heisenberg_dense(4, 0.3, 0.3, -1.0, 0.8)
    c = rng.standard_normal(5) + 1j * rng.standard_normal(5)
    psi = reconstruct(sub, c).amps
    assert observable(sub, o, c) == pytest.approx(
        float(np.real(psi.conj() @ od @ psi)), abs=1e-8
    )


def test_observable_rejects_nonhermitian():
    h = heisenberg_xyz(2, 1, 1, 1, 1)
    sub = subspace_from_states(h, [neel_state(2)])
    bad = PauliSum((PauliString("XY", 1j),), 2)
    with pytest.raises(ValueError):
        observable(sub, bad, np.array([1.0 + 0j]))


# ---------------------------------------------------------------- fidelity


def test_fidelity_self_and_orthogonal():
    rng = np.random.default_rng(20)
    h = heisenberg_xyz(3, 1, 1, 1, 1)
    basis = [basis_state(3, format(k, "03b")) for k in range(4)]
    sub = subspace_from_states(h, basis)
    c = np.array([1, 0, 0, 0], complex)
    f, nrm = fidelity(basis[0], sub, c)
    assert abs(f - 1.0) < 1e-10 and abs(nrm - 1.0) < 1e-10
    f_orth, _ = fidelity(basis_state(3, "111"), sub, c)
    assert f_orth == 0.0


def test_fidelity_register_mismatch():
    h = heisenberg_xyz(3, 1, 1, 1, 1)
    sub = subspace_from_states(h, [neel_state(3)])
    with pytest.raises(ValueError):
        fidelity(neel_state(4), sub, np.array([1.0 + 0j]))


# ---------------------------------------------------------------- checkpoints


def test_checkpoint_roundtrip(tmp_path):
    h = heisenberg_xyz(4, 1, 1, 1, 1)
    sub, _ = qdavidson_build(h, neel_state(4), QDavidsonParams(max_dim=6))
    save_subspace(tmp_path / "ckpt", sub, {"eps": 1e-3})
    loaded, params = load_subspace(tmp_path / "ckpt")
    np.testing.assert_array_equal(loaded.basis_matrix, sub.basis_matrix)
    np.testing.assert_array_equal(loaded.d, sub.d)
    np.testing.assert_array_equal(loaded.e, sub.e)
    assert loaded.provenance == sub.provenance
    assert loaded.n == 4
    assert params == {"eps": 1e-3}


def test_checkpoint_rejects_unknown_format(tmp_path):
    (tmp_path / "manifest.json").write_text('{"format": "other"}')
    with pytest.raises(ValueError):
        load_subspace(tmp_path)


def test_provenance_validation():
    with pytest.raises(ValueError):
        Provenance("mystery")
