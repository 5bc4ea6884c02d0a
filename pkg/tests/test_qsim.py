"""Simulator tests built oracle-first: every kernel is compared against
dense Kronecker-product linear algebra on small systems."""
import math

import numpy as np
import pytest

from eqmol.qsim import (
    Circuit,
    GateOp,
    PauliObservable,
    SimulationError,
    Statevector,
    UnsupportedGeneratorError,
    apply_gate,
    apply_gate_batch,
    expectation,
    grad_fd,
    grad_param_shift,
    heisenberg_matrix,
    pauli_vec_rot_matrix,
    rotation_matrix_1q,
    run,
)

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)


def dense_1q(mat, qubit, n):
    out = np.array([[1.0 + 0j]])
    for q in range(n):
        out = np.kron(out, mat if q == qubit else I2)
    return out


def random_state(n, rng):
    amps = rng.normal(size=2**n) + 1j * rng.normal(size=2**n)
    return Statevector(n, amps / np.linalg.norm(amps))


class TestStatevector:
    def test_zero_state(self):
        state = Statevector.zero(3)
        assert state.amplitudes[0] == 1.0
        assert np.count_nonzero(state.amplitudes) == 1
        assert state.norm == pytest.approx(1.0)

    def test_rejects_bad_sizes(self):
        with pytest.raises(SimulationError):
            Statevector(2, np.zeros(3))
        with pytest.raises(SimulationError):
            Statevector(0, np.zeros(1))
        with pytest.raises(SimulationError):
            Statevector(9, np.zeros(2**9))


class TestGateConventions:
    def test_rx_pi_on_zero(self):
        # exp(-i pi/2 X) |0> = -i |1>
        state = apply_gate(Statevector.zero(1), GateOp.rx(0, math.pi))
        assert np.allclose(state.amplitudes, [0.0, -1j])

    def test_rz_is_diagonal_phase(self):
        theta = 0.731
        mat = rotation_matrix_1q("rz", theta)
        expected = np.diag([np.exp(-1j * theta / 2), np.exp(1j * theta / 2)])
        assert np.allclose(mat, expected)

    def test_ry_matches_real_rotation(self):
        theta = 1.234
        mat = rotation_matrix_1q("ry", theta)
        c, s = math.cos(theta / 2), math.sin(theta / 2)
        assert np.allclose(mat, [[c, -s], [s, c]])

    def test_cnot_msb_convention(self):
        # qubit 0 is the most significant bit: |10> is index 2
        amps = np.zeros(4, dtype=complex)
        amps[2] = 1.0
        state = apply_gate(Statevector(2, amps), GateOp.cnot(0, 1))
        assert np.allclose(state.amplitudes, [0, 0, 0, 1])

    def test_cnot_control_off_is_identity(self):
        amps = np.zeros(4, dtype=complex)
        amps[1] = 1.0  # |01>
        state = apply_gate(Statevector(2, amps), GateOp.cnot(0, 1))
        assert np.allclose(state.amplitudes, amps)

    def test_zzrot_half_angle_phases(self):
        theta = 0.47
        state = Statevector(2, np.full(4, 0.5, dtype=complex))
        out = apply_gate(state, GateOp.zzrot(0, 1, theta))
        # equal bits get exp(-i theta/2), unequal exp(+i theta/2)
        expected = 0.5 * np.exp(-0.5j * theta * np.array([1, -1, -1, 1]))
        assert np.allclose(out.amplitudes, expected)

    def test_gate_constructors_validate(self):
        with pytest.raises(SimulationError):
            GateOp.cnot(1, 1)
        with pytest.raises(SimulationError):
            GateOp.heisenberg(0, 0, 1.0, 0.1)
        with pytest.raises(SimulationError):
            GateOp.pauli_vec_rot(0, (1.0, 2.0))
        with pytest.raises(SimulationError):
            GateOp.pauli_vec_rot(0, (1.0, float("nan"), 0.0))


class TestMatrixBuilders:
    def test_pauli_vec_rot_closed_form(self):
        rng = np.random.default_rng(3)
        for _ in range(25):
            vec = rng.normal(size=3)
            r = np.linalg.norm(vec)
            nx, ny, nz = vec / r
            expected = (math.cos(r / 2) * I2
                        - 1j * math.sin(r / 2) * (nx * X + ny * Y + nz * Z))
            assert np.allclose(pauli_vec_rot_matrix(vec), expected, atol=1e-12)

    def test_pauli_vec_rot_zero_vector_is_identity(self):
        assert np.allclose(pauli_vec_rot_matrix((0.0, 0.0, 0.0)), I2)

    def test_pauli_vec_rot_batched_matches_scalar(self):
        rng = np.random.default_rng(4)
        vecs = rng.normal(size=(6, 3))
        batched = pauli_vec_rot_matrix(vecs)
        for i in range(6):
            assert np.allclose(batched[i], pauli_vec_rot_matrix(vecs[i]))

    def test_heisenberg_matches_expm_oracle(self):
        h = -0.8 * (np.kron(X, X) + np.kron(Y, Y) + np.kron(Z, Z))
        evals, evecs = np.linalg.eigh(h)
        t = 0.37
        expected = evecs @ np.diag(np.exp(-1j * t * evals)) @ evecs.conj().T
        assert np.allclose(heisenberg_matrix(0.8, t), expected, atol=1e-12)

    def test_heisenberg_is_unitary(self):
        m = heisenberg_matrix(1.3, 0.9)
        assert np.allclose(m @ m.conj().T, np.eye(4), atol=1e-12)

    def test_heisenberg_vectorized_times(self):
        times = np.array([[0.1, -0.4], [2.0, 0.0]])
        stacked = heisenberg_matrix(1.0, times)
        assert stacked.shape == (2, 2, 4, 4)
        for i in range(2):
            for j in range(2):
                assert np.allclose(stacked[i, j], heisenberg_matrix(1.0, times[i, j]))


class TestKernelsAgainstDenseOracle:
    def test_single_qubit_all_positions(self):
        rng = np.random.default_rng(11)
        n = 4
        state = random_state(n, rng)
        for q in range(n):
            theta = rng.uniform(-3, 3)
            for kind in ("rx", "ry", "rz"):
                got = apply_gate(state, GateOp(kind, (q,), angle=theta))
                full = dense_1q(rotation_matrix_1q(kind, theta), q, n)
                assert np.allclose(got.amplitudes, full @ state.amplitudes, atol=1e-12)

    def test_two_qubit_both_orders(self):
        rng = np.random.default_rng(12)
        n = 4
        state = random_state(n, rng)
        for qi, qj in [(0, 1), (1, 3), (3, 1), (2, 0)]:
            op = GateOp.heisenberg(qi, qj, 1.0, 0.42)
            got = apply_gate(state, op)
            # dense oracle: H acts symmetrically, so qubit order is irrelevant
            obs = PauliObservable([(1.0, _string(n, {qi: "X", qj: "X"})),
                                   (1.0, _string(n, {qi: "Y", qj: "Y"})),
                                   (1.0, _string(n, {qi: "Z", qj: "Z"}))])
            h = -1.0 * obs.matrix()
            evals, evecs = np.linalg.eigh(h)
            full = evecs @ np.diag(np.exp(-1j * 0.42 * evals)) @ evecs.conj().T
            assert np.allclose(got.amplitudes, full @ state.amplitudes, atol=1e-12)

    def test_batched_matches_loop(self):
        rng = np.random.default_rng(13)
        n = 3
        amps = rng.normal(size=(5, 8)) + 1j * rng.normal(size=(5, 8))
        angles = rng.uniform(-2, 2, size=5)
        op = GateOp.ry(1, 0.0)
        got = apply_gate_batch(amps, op, n, angle=angles)
        for b in range(5):
            single = apply_gate(Statevector(n, amps[b]), GateOp.ry(1, angles[b]))
            assert np.allclose(got[b], single.amplitudes, atol=1e-12)

    def test_norm_preserved(self):
        rng = np.random.default_rng(14)
        state = random_state(5, rng)
        ops = [GateOp.rx(0, 0.3), GateOp.cnot(2, 4), GateOp.zzrot(1, 3, 1.1),
               GateOp.heisenberg(0, 4, 0.7, 0.2),
               GateOp.pauli_vec_rot(3, (0.4, -1.0, 0.2))]
        for op in ops:
            state = apply_gate(state, op)
        assert state.norm == pytest.approx(1.0, abs=1e-12)

    def test_adjoint_inverts(self):
        rng = np.random.default_rng(15)
        state = random_state(4, rng)
        ops = [GateOp.pauli_vec_rot(1, (0.3, 0.9, -0.4), scale=1.7),
               GateOp.heisenberg(0, 3, 1.2, 0.8), GateOp.zzrot(1, 2, 0.5),
               GateOp.rx(2, 1.9), GateOp.cnot(3, 0)]
        out = state
        for op in ops:
            out = apply_gate(out, op)
        for op in reversed(ops):
            out = apply_gate(out, op.adjoint())
        assert np.allclose(out.amplitudes, state.amplitudes, atol=1e-12)

    def test_qubit_out_of_range(self):
        with pytest.raises(SimulationError):
            apply_gate(Statevector.zero(2), GateOp.rx(2, 0.1))


def _string(n, assignment):
    chars = ["I"] * n
    for q, p in assignment.items():
        chars[q] = p
    return "".join(chars)


class TestObservables:
    def test_bad_string_rejected(self):
        with pytest.raises(SimulationError):
            PauliObservable([(1.0, "XA")])

    def test_expectation_matches_dense(self):
        rng = np.random.default_rng(21)
        state = random_state(3, rng)
        obs = PauliObservable([(0.5, "XYZ"), (-1.25, "ZIZ"), (2.0, "IIY")])
        dense = np.vdot(state.amplitudes, obs.matrix() @ state.amplitudes).real
        assert expectation(state, obs) == pytest.approx(dense, abs=1e-12)

    def test_mismatched_size_rejected(self):
        with pytest.raises(SimulationError):
            expectation(Statevector.zero(2), PauliObservable([(1.0, "XXX")]))

    def test_z_expectation_on_basis_states(self):
        obs = PauliObservable([(1.0, "ZI")])
        amps = np.zeros(4, dtype=complex)
        amps[3] = 1.0  # |11>
        assert expectation(Statevector(2, amps), obs) == pytest.approx(-1.0)


class TestCircuit:
    def _sample_circuit(self):
        circuit = Circuit(2)
        circuit.add(GateOp.ry(0, 0.0), "angle")
        circuit.add(GateOp.cnot(0, 1))
        circuit.add(GateOp.rz(1, 0.0), "angle")
        circuit.add(GateOp.zzrot(0, 1, 0.0), "angle")
        return circuit

    def test_bind_and_run(self):
        circuit = self._sample_circuit()
        assert circuit.n_params == 3
        params = np.array([0.3, -0.8, 0.5])
        state = run(circuit, params, Statevector.zero(2))
        manual = Statevector.zero(2)
        for op in [GateOp.ry(0, 0.3), GateOp.cnot(0, 1), GateOp.rz(1, -0.8),
                   GateOp.zzrot(0, 1, 0.5)]:
            manual = apply_gate(manual, op)
        assert np.allclose(state.amplitudes, manual.amplitudes, atol=1e-12)

    def test_bind_wrong_length(self):
        with pytest.raises(SimulationError):
            self._sample_circuit().bind([0.1])

    def test_bind_rejects_unknown_field(self):
        circuit = Circuit(1)
        with pytest.raises(SimulationError):
            circuit.add(GateOp.rx(0, 0.0), "vec")

    def test_size_mismatch(self):
        with pytest.raises(SimulationError):
            run(self._sample_circuit(), np.zeros(3), Statevector.zero(3))


class TestGradients:
    def _random_circuit(self, rng, n=3, depth=6):
        circuit = Circuit(n)
        for _ in range(depth):
            kind = rng.choice(["rx", "ry", "rz", "zzrot", "cnot"])
            if kind == "cnot":
                q = rng.choice(n, size=2, replace=False)
                circuit.add(GateOp.cnot(int(q[0]), int(q[1])))
            elif kind == "zzrot":
                q = rng.choice(n, size=2, replace=False)
                circuit.add(GateOp.zzrot(int(q[0]), int(q[1]), 0.0), "angle")
            else:
                circuit.add(GateOp(kind, (int(rng.integers(n)),), angle=0.0), "angle")
        return circuit

    def test_param_shift_matches_fd(self):
        rng = np.random.default_rng(31)
        obs = PauliObservable([(1.0, "ZZI"), (0.3, "XIX")])
        for _ in range(50):
            circuit = self._random_circuit(rng)
            params = rng.uniform(-2, 2, size=circuit.n_params)
            exact = grad_param_shift(circuit, params, obs, Statevector.zero(3))

            def value(p):
                return expectation(run(circuit, p, Statevector.zero(3)), obs)

            approx = grad_fd(value, params, h=1e-5)
            scale = max(1.0, float(np.abs(exact).max()))
            assert np.abs(exact - approx).max() / scale < 1e-6

    def test_param_shift_rejects_composite_generators(self):
        circuit = Circuit(2)
        circuit.add(GateOp.heisenberg(0, 1, 1.0, 0.0), "time")
        with pytest.raises(UnsupportedGeneratorError):
            grad_param_shift(circuit, [0.1], PauliObservable([(1.0, "ZZ")]),
                             Statevector.zero(2))

    def test_fd_rejects_bad_step(self):
        with pytest.raises(SimulationError):
            grad_fd(lambda p: 0.0, np.zeros(2), h=0.0)

    def test_fd_on_quadratic(self):
        # f(x, y) = x^2 + 3y; central differences are exact for quadratics
        grad = grad_fd(lambda p: p[0] ** 2 + 3 * p[1], np.array([1.5, -2.0]), h=1e-4)
        assert np.allclose(grad, [3.0, 3.0], atol=1e-6)
