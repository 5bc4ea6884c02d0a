"""Equivariant circuit building blocks.

Rotation conventions: r_z(a) rotates (1,0,0) toward (0,1,0) (counter-
clockwise), gates are exp(-i theta/2 P).  With these conventions the
single-qubit embedding satisfies

    U(r(psi, theta, phi) x) = V U(x) V*,   V = RZ(psi) RX(theta) RZ(phi),

i.e. the conjugating gate sequence carries the *same* Euler angles as the
classical rotation (negating them instead corresponds to the clockwise
rotation convention).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .qsim import (
    GateOp,
    apply_gate,
    PauliObservable,
    SimulationError,
    Statevector,
    pauli_vec_rot_matrix,
    rotation_matrix_1q,
)


@dataclass(frozen=True)
class EulerAngles:
    psi: float
    theta: float
    phi: float

    def inverse(self) -> "EulerAngles":
        return EulerAngles(-self.phi, -self.theta, -self.psi)


def _rot_z(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def _rot_x(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rotation_matrix(angles: EulerAngles) -> np.ndarray:
    """3x3 matrix of r(psi, theta, phi) = r_z(psi) r_x(theta) r_z(phi)."""
    return _rot_z(angles.psi) @ _rot_x(angles.theta) @ _rot_z(angles.phi)


def euler_rotate(angles: EulerAngles, x) -> np.ndarray:
    return rotation_matrix(angles) @ np.asarray(x, dtype=float)


def conjugating_gates(angles: EulerAngles, qubit: int = 0) -> list:
    """Gate sequence realizing V = RZ(psi) RX(theta) RZ(phi) (circuit order)."""
    return [
        GateOp.rz(qubit, angles.phi),
        GateOp.rx(qubit, angles.theta),
        GateOp.rz(qubit, angles.psi),
    ]


def conjugating_matrix(angles: EulerAngles) -> np.ndarray:
    return (
        rotation_matrix_1q("rz", angles.psi)
        @ rotation_matrix_1q("rx", angles.theta)
        @ rotation_matrix_1q("rz", angles.phi)
    )


def so3_embed(x, qubit: int = 0) -> GateOp:
    """Rotation-equivariant single-qubit embedding exp(-i/2 <x, sigma>)."""
    return GateOp.pauli_vec_rot(qubit, x)


def so3_embed_matrix(x) -> np.ndarray:
    return pauli_vec_rot_matrix(np.asarray(x, dtype=float))


# ---------------------------------------------------------------------------
# Rotation-invariant pieces

def singlet_init(pair_count: int) -> Statevector:
    """Tensor product of (|01> - |10>)/sqrt(2) on qubit pairs (2k, 2k+1)."""
    if pair_count < 1:
        raise SimulationError("pair_count must be >= 1")
    singlet = np.zeros(4, dtype=complex)
    singlet[1], singlet[2] = 1 / math.sqrt(2), -1 / math.sqrt(2)
    amps = np.array([1.0 + 0j])
    for _ in range(pair_count):
        amps = np.kron(amps, singlet)
    return Statevector(2 * pair_count, amps)


def heisenberg_observable(i: int, j: int, n_qubits: int) -> PauliObservable:
    """X(i)X(j) + Y(i)Y(j) + Z(i)Z(j) on an n-qubit register."""
    if i == j:
        raise SimulationError("observable needs two distinct qubits")
    terms = []
    for p in "XYZ":
        string = ["I"] * n_qubits
        string[i], string[j] = p, p
        terms.append((1.0, "".join(string)))
    return PauliObservable(terms)


def uniform_superposition(n: int) -> Statevector:
    if n < 1:
        raise SimulationError("need at least one qubit")
    amps = np.full(2**n, 2 ** (-n / 2), dtype=complex)
    return Statevector(n, amps)


# ---------------------------------------------------------------------------
# Graph permutation-equivariant encoding

@dataclass(frozen=True)
class GraphSpec:
    """Weighted graph with per-node features and an explicit permutable set.

    node_features is (n_nodes,) scalars or (n_nodes, k); edges are
    (i, j, weight) with i < j and no duplicates.
    """

    n_nodes: int
    node_features: np.ndarray
    edges: tuple
    permutable: tuple = ()

    def __post_init__(self):
        feats = np.asarray(self.node_features, dtype=float)
        if feats.shape[0] != self.n_nodes or not np.all(np.isfinite(feats)):
            raise SimulationError("node features must be finite, one row per node")
        seen = set()
        edges = []
        for i, j, w in self.edges:
            if not (0 <= i < j < self.n_nodes):
                raise SimulationError(f"bad edge ({i}, {j}): need 0 <= i < j < n")
            if (i, j) in seen:
                raise SimulationError(f"duplicate edge ({i}, {j})")
            if not math.isfinite(w):
                raise SimulationError(f"edge ({i}, {j}) weight not finite")
            seen.add((i, j))
            edges.append((int(i), int(j), float(w)))
        object.__setattr__(self, "node_features", feats)
        object.__setattr__(self, "edges", tuple(edges))
        object.__setattr__(self, "permutable", tuple(int(p) for p in self.permutable))

    def node_scalars(self) -> np.ndarray:
        feats = self.node_features
        return feats if feats.ndim == 1 else feats[:, 0]


def graph_layer(spec: GraphSpec, beta: float, gamma: float) -> list:
    """One alternating layer: U_G(edges, gamma) then U_N(a, beta).

    Edge terms are exp(-i gamma eps_ij ZZ), realized as ZZRot with angle
    2*gamma*eps_ij under the half-angle ZZRot convention.  Edges are applied
    in canonical sorted order for bit-exact reproducibility (the terms
    commute, so the state does not depend on it).
    """
    ops = []
    for i, j, w in sorted(spec.edges):
        ops.append(GateOp.zzrot(i, j, 2.0 * gamma * w))
    for node, a in enumerate(spec.node_scalars()):
        ops.append(GateOp.rx(node, a * beta))
    return ops


@dataclass(frozen=True)
class QubitPermutation:
    """Bijection on {0..n-1}; sigma[k] is the source index of new slot k."""

    sigma: tuple

    def __post_init__(self):
        sigma = tuple(int(s) for s in self.sigma)
        if sorted(sigma) != list(range(len(sigma))):
            raise SimulationError(f"{sigma} is not a bijection on 0..{len(sigma) - 1}")
        object.__setattr__(self, "sigma", sigma)

    @property
    def n(self) -> int:
        return len(self.sigma)

    def inverse(self) -> "QubitPermutation":
        inv = [0] * self.n
        for new, old in enumerate(self.sigma):
            inv[old] = new
        return QubitPermutation(tuple(inv))

    def __call__(self, k: int) -> int:
        return self.sigma[k]


def permute_graph(spec: GraphSpec, perm: QubitPermutation) -> GraphSpec:
    """Relabel nodes so that new node k carries old node sigma(k)."""
    if perm.n != spec.n_nodes:
        raise SimulationError("permutation size does not match graph")
    inv = perm.inverse()
    feats = spec.node_features[list(perm.sigma)]
    edges = []
    for i, j, w in spec.edges:
        a, b = inv(i), inv(j)
        edges.append((min(a, b), max(a, b), w))
    permutable = tuple(sorted(inv(p) for p in spec.permutable))
    return GraphSpec(spec.n_nodes, feats, tuple(sorted(edges)), permutable)


def permute_state(state: Statevector, perm: QubitPermutation) -> Statevector:
    """Re-index amplitudes so that new qubit k holds old qubit sigma(k)."""
    n = state.n_qubits
    if perm.n != n:
        raise SimulationError("permutation size does not match state")
    amps = state.amplitudes.reshape((2,) * n)
    amps = np.transpose(amps, axes=perm.sigma)
    return Statevector(n, np.ascontiguousarray(amps).reshape(-1))


def graph_encoding_state(spec: GraphSpec, betas, gammas) -> Statevector:
    """|E, a, beta, gamma>_p: alternating layers applied to |s>."""
    betas = np.atleast_1d(np.asarray(betas, dtype=float))
    gammas = np.atleast_1d(np.asarray(gammas, dtype=float))
    if betas.shape != gammas.shape:
        raise SimulationError("beta/gamma layer counts differ")
    state = uniform_superposition(spec.n_nodes)
    for beta, gamma in zip(betas, gammas):
        for op in graph_layer(spec, beta, gamma):
            state = apply_gate(state, op)
    return state
