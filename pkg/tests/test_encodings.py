"""Equivariant building blocks: rotation conventions, singlet machinery,
and the graph permutation layers, all checked against dense oracles."""
import itertools
import math

import numpy as np
import pytest

from eqmol.encodings import (
    EulerAngles,
    GraphSpec,
    QubitPermutation,
    conjugating_matrix,
    euler_rotate,
    graph_encoding_state,
    graph_layer,
    heisenberg_observable,
    permute_graph,
    permute_state,
    rotation_matrix,
    singlet_init,
    so3_embed,
    so3_embed_matrix,
    uniform_superposition,
)
from eqmol.qsim import Statevector, apply_gate, expectation, pauli_vec_rot_matrix


class TestEulerRotations:
    def test_identity_angles(self):
        x = np.array([0.2, -1.0, 3.0])
        assert np.allclose(euler_rotate(EulerAngles(0, 0, 0), x), x)

    def test_rz_counterclockwise_convention(self):
        # r_z(pi/2) maps x-hat to y-hat
        out = euler_rotate(EulerAngles(0.0, 0.0, math.pi / 2), np.array([1.0, 0, 0]))
        assert np.allclose(out, [0.0, 1.0, 0.0], atol=1e-12)

    def test_rz_general_angle(self):
        alpha = 0.77
        out = euler_rotate(EulerAngles(0.0, 0.0, alpha), np.array([1.0, 0, 0]))
        assert np.allclose(out, [math.cos(alpha), math.sin(alpha), 0.0], atol=1e-12)

    def test_norm_preserved(self):
        rng = np.random.default_rng(5)
        for _ in range(100):
            angles = EulerAngles(*rng.uniform(-math.pi, math.pi, size=3))
            x = rng.normal(size=3)
            out = euler_rotate(angles, x)
            assert np.linalg.norm(out) == pytest.approx(np.linalg.norm(x), abs=1e-12)

    def test_inverse_composition(self):
        rng = np.random.default_rng(6)
        for _ in range(20):
            angles = EulerAngles(*rng.uniform(-math.pi, math.pi, size=3))
            x = rng.normal(size=3)
            back = euler_rotate(angles.inverse(), euler_rotate(angles, x))
            assert np.allclose(back, x, atol=1e-12)

    def test_rotation_matrix_is_orthogonal(self):
        r = rotation_matrix(EulerAngles(0.4, 1.3, -2.2))
        assert np.allclose(r @ r.T, np.eye(3), atol=1e-12)
        assert np.linalg.det(r) == pytest.approx(1.0, abs=1e-12)


class TestSO3Embedding:
    def test_z_axis_reduces_to_rz(self):
        mat = so3_embed_matrix(np.array([0.0, 0.0, math.pi]))
        expected = np.diag([np.exp(-1j * math.pi / 2), np.exp(1j * math.pi / 2)])
        assert np.allclose(mat, expected, atol=1e-12)

    def test_zero_vector_is_identity(self):
        assert np.allclose(so3_embed_matrix(np.zeros(3)), np.eye(2), atol=1e-12)

    def test_embed_gate_matches_matrix(self):
        x = np.array([0.3, -0.8, 1.1])
        state = apply_gate(Statevector.zero(1), so3_embed(x))
        assert np.allclose(state.amplitudes, so3_embed_matrix(x)[:, 0], atol=1e-12)

    def test_conjugation_identity(self):
        # U(r(psi,theta,phi) x) = V U(x) V^dagger for the conjugating gates
        rng = np.random.default_rng(7)
        for _ in range(100):
            x = rng.normal(size=3)
            angles = EulerAngles(*rng.uniform(-math.pi, math.pi, size=3))
            lhs = so3_embed_matrix(euler_rotate(angles, x))
            v = conjugating_matrix(angles)
            rhs = v @ so3_embed_matrix(x) @ v.conj().T
            assert np.abs(lhs - rhs).max() < 1e-10


class TestSinglet:
    def test_single_pair_amplitudes(self):
        state = singlet_init(1)
        s = 1 / math.sqrt(2)
        assert np.allclose(state.amplitudes, [0.0, s, -s, 0.0], atol=1e-15)

    def test_heisenberg_expectation_dense_oracle(self):
        state = singlet_init(1)
        obs = heisenberg_observable(0, 1, 2)
        dense = np.vdot(state.amplitudes, obs.matrix() @ state.amplitudes).real
        assert dense == pytest.approx(-3.0, abs=1e-12)
        assert expectation(state, obs) == pytest.approx(-3.0, abs=1e-12)

    def test_three_pairs_product_structure(self):
        state = singlet_init(3)
        assert state.n_qubits == 6
        single = singlet_init(1).amplitudes
        expected = np.kron(np.kron(single, single), single)
        assert np.allclose(state.amplitudes, expected, atol=1e-15)

    def test_vv_invariance(self):
        rng = np.random.default_rng(8)
        base = singlet_init(1).amplitudes
        for _ in range(20):
            v = pauli_vec_rot_matrix(rng.normal(size=3))
            moved = np.kron(v, v) @ base
            assert abs(abs(np.vdot(base, moved)) - 1.0) < 1e-12

    def test_rejects_nonpositive_pairs(self):
        with pytest.raises(Exception):
            singlet_init(0)


class TestHeisenbergObservable:
    def test_terms(self):
        obs = heisenberg_observable(0, 2, 3)
        assert set(obs.terms) == {(1.0, "XIX"), (1.0, "YIY"), (1.0, "ZIZ")}

    def test_on_zero_state(self):
        state = Statevector.zero(2)
        assert expectation(state, heisenberg_observable(0, 1, 2)) == pytest.approx(1.0)

    def test_invariant_under_identical_rotations(self):
        rng = np.random.default_rng(9)
        state = Statevector(2, rng.normal(size=4) + 1j * rng.normal(size=4))
        amps = state.amplitudes / np.linalg.norm(state.amplitudes)
        obs = heisenberg_observable(0, 1, 2)
        base = np.vdot(amps, obs.matrix() @ amps).real
        for _ in range(100):
            v = pauli_vec_rot_matrix(rng.normal(size=3))
            rotated = np.kron(v, v) @ amps
            got = np.vdot(rotated, obs.matrix() @ rotated).real
            assert abs(got - base) < 1e-10

    def test_rejects_equal_qubits(self):
        with pytest.raises(Exception):
            heisenberg_observable(1, 1, 3)


class TestUniformSuperposition:
    def test_amplitudes(self):
        assert np.allclose(uniform_superposition(1).amplitudes, [2**-0.5] * 2)
        assert np.allclose(uniform_superposition(2).amplitudes, [0.5] * 4)

    def test_permutation_invariant(self):
        state = uniform_superposition(3)
        perm = QubitPermutation((2, 0, 1))
        assert np.allclose(permute_state(state, perm).amplitudes, state.amplitudes)


def _toy_spec():
    return GraphSpec(
        n_nodes=2,
        node_features=np.array([0.3, -0.4]),
        edges=((0, 1, 1.0),),
        permutable=(0, 1),
    )


class TestGraphLayer:
    def test_zero_parameters_identity(self):
        spec = _toy_spec()
        state = uniform_superposition(2)
        for op in graph_layer(spec, beta=0.0, gamma=0.0):
            state = apply_gate(state, op)
        assert np.allclose(state.amplitudes, uniform_superposition(2).amplitudes,
                           atol=1e-12)

    def test_quarter_turn_expectations(self):
        # single edge, gamma = pi/4 on |s>: <Z0 Z1> stays 0, <X0> = cos(pi/2) = 0
        spec = _toy_spec()
        state = uniform_superposition(2)
        for op in graph_layer(spec, beta=0.0, gamma=math.pi / 4):
            state = apply_gate(state, op)
        from eqmol.qsim import PauliObservable
        assert expectation(state, PauliObservable([(1.0, "ZZ")])) == pytest.approx(0.0, abs=1e-12)
        assert expectation(state, PauliObservable([(1.0, "XI")])) == pytest.approx(0.0, abs=1e-12)

    def test_edge_order_irrelevant(self):
        rng = np.random.default_rng(10)
        spec = GraphSpec(3, np.array([0.1, 0.2, 0.3]),
                         ((0, 1, 0.5), (0, 2, -0.3), (1, 2, 1.1)), (0, 1, 2))
        flipped = GraphSpec(3, spec.node_features,
                            tuple(reversed(spec.edges)), spec.permutable)
        betas, gammas = rng.normal(size=2), rng.normal(size=2)
        a = graph_encoding_state(spec, betas, gammas).amplitudes
        b = graph_encoding_state(flipped, betas, gammas).amplitudes
        assert np.allclose(a, b, atol=1e-12)


class TestPermutations:
    def test_rejects_non_bijection(self):
        with pytest.raises(Exception):
            QubitPermutation((0, 0, 1))

    def test_inverse_roundtrip(self):
        rng = np.random.default_rng(11)
        state = Statevector(3, rng.normal(size=8) + 1j * rng.normal(size=8))
        perm = QubitPermutation((1, 2, 0))
        back = permute_state(permute_state(state, perm), perm.inverse())
        assert np.allclose(back.amplitudes, state.amplitudes, atol=1e-12)

    def test_identity_permutation(self):
        spec = _toy_spec()
        ident = QubitPermutation((0, 1))
        assert permute_graph(spec, ident).edges == spec.edges

    def test_permute_state_basis_action(self):
        # |01> with swap must become |10>
        amps = np.zeros(4, dtype=complex)
        amps[1] = 1.0
        swapped = permute_state(Statevector(2, amps), QubitPermutation((1, 0)))
        assert swapped.amplitudes[2] == pytest.approx(1.0)

    def test_full_encoding_equivariance(self):
        rng = np.random.default_rng(12)
        for trial in range(20):
            feats = rng.normal(size=4)
            weights = rng.normal(size=6)
            edges = tuple((i, j, float(w)) for (i, j), w in
                          zip(itertools.combinations(range(4), 2), weights))
            spec = GraphSpec(4, feats, edges, (1, 2, 3))
            betas, gammas = rng.normal(size=3), rng.normal(size=3)
            state = graph_encoding_state(spec, betas, gammas)
            for h_perm in itertools.permutations((1, 2, 3)):
                perm = QubitPermutation((0,) + h_perm)
                lhs = permute_state(state, perm).amplitudes
                rhs = graph_encoding_state(permute_graph(spec, perm),
                                           betas, gammas).amplitudes
                assert np.abs(lhs - rhs).max() < 1e-10
