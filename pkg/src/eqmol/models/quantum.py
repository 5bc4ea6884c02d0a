"""The three quantum model families as batched energy evaluators.

Every kind exposes energy_batch(params, positions) -> (B,) model-unit
energies, evaluated on the statevector kernels with a batch dimension so a
whole dataset runs through one circuit layout at once.  Data-dependent
gate parameters vary per batch element; trainable parameters are shared.
"""
from __future__ import annotations

import functools
import math

import numpy as np

from ..encodings import heisenberg_observable, singlet_init, uniform_superposition
from ..qsim import (
    PauliObservable,
    _apply_1q,
    _apply_2q,
    _apply_cnot,
    _apply_zzrot,
    expectation_batch,
    heisenberg_matrix,
    pauli_vec_rot_matrix,
    rotation_matrix_1q,
)
from .common import GRAPH_EDGE_CLASSES, GRAPH_EDGES, GRAPH_NODES, ModelConfig


def _bond_geometry(positions: np.ndarray):
    """Vectorized bond vectors / lengths; positions (B, A, 3)."""
    bonds = positions[:, 1:] - positions[:, :1]
    dists = np.linalg.norm(bonds, axis=2)
    return bonds, dists


def _bond_angles(bonds: np.ndarray, dists: np.ndarray) -> np.ndarray:
    """Pairwise bond angles for NH3, pairs (0,1), (0,2), (1,2): (B, 3)."""
    units = bonds / dists[:, :, None]
    pairs = [(0, 1), (0, 2), (1, 2)]
    cosang = np.stack(
        [np.einsum("bi,bi->b", units[:, i], units[:, j]) for i, j in pairs], axis=1
    )
    return np.arccos(np.clip(cosang, -1.0, 1.0))


# ---------------------------------------------------------------------------
# Rotationally equivariant model: 6 qubits = 3 singlet pairs

_ROT_EQ_PAIRS = [(2 * k, 2 * k + 1) for k in range(3)]
_ROT_EQ_COUPLERS = [(q, (q + 1) % 6) for q in range(6)] + [(q, (q + 2) % 6) for q in range(6)]


def _rot_eq_unpack(params: np.ndarray, layers: int):
    scales = params[:layers]
    times = params[layers:layers + layers * 12].reshape(layers, 12)
    a, b = params[-2], params[-1]
    return scales, times, a, b


def _rot_eq_readout() -> PauliObservable:
    terms = []
    for qa, qb in _ROT_EQ_PAIRS:
        terms.extend(heisenberg_observable(qa, qb, 6).terms)
    return PauliObservable(terms)


_ROT_EQ_OBSERVABLE = _rot_eq_readout()


def rot_eq_pair_bonds(positions: np.ndarray) -> np.ndarray:
    """One bond vector per singlet pair, (B, 3, 3); LiH re-uses its single
    bond on all three pairs."""
    bonds, _ = _bond_geometry(positions)
    return bonds[:, [0, 0, 0]] if bonds.shape[1] == 1 else bonds


def rot_eq_layer_unitary(layer_times: np.ndarray) -> np.ndarray:
    """Fold one layer's 12 couplers into a 64x64 block, stored transposed.

    The couplers carry no data dependence, so their product can be applied
    to the whole batch with a single matmul (amps @ result)."""
    mats = heisenberg_matrix(1.0, layer_times)
    u = np.eye(64, dtype=complex)
    for c, (qi, qj) in enumerate(_ROT_EQ_COUPLERS):
        u = _apply_2q(u, mats[c], qi, qj, 6)
    return u


def rot_eq_encode(amps: np.ndarray, pair_bonds: np.ndarray, scale: float) -> np.ndarray:
    """Apply the scaled bond-vector rotation to the first qubit of each pair.

    Acting on one qubit per pair matters: the singlet is invariant under
    identical rotations of both members, and with a single bond (LiH) a
    both-qubit encoding becomes a global SU(2) rotation that commutes with
    every coupler and the readout, collapsing the model to a constant.
    One-sided encoding keeps full rotational equivariance (conjugation by
    V on the encoded qubit extends to V on every qubit) while letting the
    state depend on the bond geometry."""
    for k, (qa, _) in enumerate(_ROT_EQ_PAIRS):
        mats = pauli_vec_rot_matrix(pair_bonds[:, k] * scale)
        amps = _apply_1q(amps, mats, qa, 6)
    return amps


def rot_eq_energy_batch(config: ModelConfig, params: np.ndarray,
                        positions: np.ndarray) -> np.ndarray:
    n = 6
    batch = positions.shape[0]
    pair_bonds = rot_eq_pair_bonds(positions)
    scales, times, a, b = _rot_eq_unpack(params, config.layers)

    amps = np.broadcast_to(singlet_init(3).amplitudes, (batch, 2**n)).copy()
    for layer in range(config.layers):
        amps = rot_eq_encode(amps, pair_bonds, scales[layer])
        amps = amps @ rot_eq_layer_unitary(times[layer])

    return a * expectation_batch(amps, _ROT_EQ_OBSERVABLE, n) + b


def rot_eq_init(config: ModelConfig, rng: np.random.Generator) -> np.ndarray:
    scales = 0.5 + 0.1 * rng.normal(size=config.layers)
    times = 0.1 * rng.normal(size=config.layers * 12)
    affine = np.array([-0.1, 0.5]) + 0.02 * rng.normal(size=2)
    return np.concatenate([scales, times, affine])


# ---------------------------------------------------------------------------
# Diagonal readout helpers: <Z...Z> observables are signed probability sums

def _bit_signs(qubit: int, n: int) -> np.ndarray:
    idx = np.arange(2**n)
    return 1.0 - 2.0 * ((idx >> (n - 1 - qubit)) & 1)


@functools.lru_cache(maxsize=None)
def _z_sum_diag(n: int) -> np.ndarray:
    return sum(_bit_signs(q, n) for q in range(n))


@functools.lru_cache(maxsize=None)
def _graph_readout_diag(n: int, edge_qubits: tuple) -> np.ndarray:
    """Rows: the diagonal of Z_q for each qubit, then Z_i Z_j per edge."""
    rows = [_bit_signs(q, n) for q in range(n)]
    rows += [_bit_signs(i, n) * _bit_signs(j, n) for i, j in edge_qubits]
    return np.stack(rows)


# ---------------------------------------------------------------------------
# Non-equivariant model: RY distance encodings, RY/RZ/RY layers, ring CNOTs

def _non_eq_encodings(config: ModelConfig, positions: np.ndarray) -> np.ndarray:
    _, dists = _bond_geometry(positions)
    m = dists.shape[1]
    cols = [dists[:, q % m] for q in range(config.n_qubits)]
    return np.stack(cols, axis=1)  # (B, n_qubits)


def non_eq_energy_batch(config: ModelConfig, params: np.ndarray,
                        positions: np.ndarray) -> np.ndarray:
    n = config.n_qubits
    batch = positions.shape[0]
    enc = _non_eq_encodings(config, positions)
    theta = params.reshape(config.layers, n, 3)

    amps = np.zeros((batch, 2**n), dtype=complex)
    amps[:, 0] = 1.0
    for layer in range(config.layers):
        for q in range(n):
            amps = _apply_1q(amps, rotation_matrix_1q("ry", enc[:, q]), q, n)
        for q in range(n):
            amps = _apply_1q(amps, rotation_matrix_1q("ry", theta[layer, q, 0]), q, n)
            amps = _apply_1q(amps, rotation_matrix_1q("rz", theta[layer, q, 1]), q, n)
            amps = _apply_1q(amps, rotation_matrix_1q("ry", theta[layer, q, 2]), q, n)
        for q in range(n):
            amps = _apply_cnot(amps, q, (q + 1) % n, n)

    # sum of <Z_q> is diagonal: a signed sum of measurement probabilities
    probs = (amps.conj() * amps).real
    return probs @ _z_sum_diag(n)


def non_eq_init(config: ModelConfig, rng: np.random.Generator) -> np.ndarray:
    return 0.1 * rng.normal(size=config.layers * config.n_qubits * 3)


# ---------------------------------------------------------------------------
# Graph permutation-equivariant model

def graph_arrays(config: ModelConfig, positions: np.ndarray):
    """Node features (B, n, 3), edge features (B, e, 2), edge metadata.

    Must agree with features.build_graph on each sample (tested); edge
    order is the canonical sorted order.  Edge features: heavy-H edge ->
    (d_i, 1), H-H edge -> (sin theta, cos theta).
    """
    bonds, dists = _bond_geometry(positions)
    batch = positions.shape[0]
    if config.molecule == "LiH":
        d = dists[:, 0]
        zeros, ones = np.zeros(batch), np.ones(batch)
        node_feats = np.stack([
            np.stack([d, zeros, zeros], axis=1),
            np.stack([d, zeros, ones], axis=1),
        ], axis=1)
        edge_feats = np.stack([d, ones], axis=1)[:, None, :]
        edge_qubits = [(0, 1)]
        node_classes = np.array([0, 1])  # 0 heavy, 1 hydrogen
        edge_classes = np.array([0])
        return node_feats, edge_feats, edge_qubits, node_classes, edge_classes

    angles = _bond_angles(bonds, dists)  # pairs (0,1), (0,2), (1,2)
    mean_d = dists.mean(axis=1)
    mean_t = angles.mean(axis=1)
    own = [angles[:, [0, 1]].mean(axis=1),
           angles[:, [0, 2]].mean(axis=1),
           angles[:, [1, 2]].mean(axis=1)]
    zeros, ones = np.zeros(batch), np.ones(batch)
    node_feats = np.stack(
        [np.stack([mean_d, mean_t, zeros], axis=1)]
        + [np.stack([dists[:, i], own[i], ones], axis=1) for i in range(3)],
        axis=1,
    )
    nh = [np.stack([dists[:, i], ones], axis=1) for i in range(3)]
    hh = [np.stack([np.sin(angles[:, k]), np.cos(angles[:, k])], axis=1) for k in range(3)]
    edge_feats = np.stack(nh + hh, axis=1)
    edge_qubits = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]
    node_classes = np.array([0, 1, 1, 1])
    edge_classes = np.array([0, 0, 0, 1, 1, 1])
    return node_feats, edge_feats, edge_qubits, node_classes, edge_classes


def _graph_unpack(config: ModelConfig, params: np.ndarray,
                  node_classes: np.ndarray, edge_classes: np.ndarray):
    """Per-layer weight matrices W_node (n, 3), W_edge (e, 2) plus readout
    weights (z per node, zz per edge, affine); strict mode shares weights
    within node/edge classes."""
    n, e = len(node_classes), len(edge_classes)
    layers = config.layers
    if config.strict_equivariance:
        ecls = GRAPH_EDGE_CLASSES[config.molecule]
        per_layer = 2 * 3 + ecls * 2
        w_node, w_edge = [], []
        for layer in range(layers):
            chunk = params[layer * per_layer:(layer + 1) * per_layer]
            cls_node = chunk[:6].reshape(2, 3)
            cls_edge = chunk[6:].reshape(ecls, 2)
            w_node.append(cls_node[node_classes])
            w_edge.append(cls_edge[edge_classes])
        rest = params[layers * per_layer:]
        z_w = rest[:2][node_classes]
        zz_w = rest[2:2 + ecls][edge_classes]
        a, b = rest[-2], rest[-1]
    else:
        per_layer = n * 3 + e * 2
        w_node, w_edge = [], []
        for layer in range(layers):
            chunk = params[layer * per_layer:(layer + 1) * per_layer]
            w_node.append(chunk[:n * 3].reshape(n, 3))
            w_edge.append(chunk[n * 3:].reshape(e, 2))
        rest = params[layers * per_layer:]
        z_w = rest[:n]
        zz_w = rest[n:n + e]
        a, b = rest[-2], rest[-1]
    return w_node, w_edge, z_w, zz_w, a, b


def graph_perm_energy_batch(config: ModelConfig, params: np.ndarray,
                            positions: np.ndarray) -> np.ndarray:
    n = config.n_qubits
    batch = positions.shape[0]
    node_feats, edge_feats, edge_qubits, node_classes, edge_classes = \
        graph_arrays(config, positions)
    w_node, w_edge, z_w, zz_w, a, b = _graph_unpack(config, params,
                                                    node_classes, edge_classes)

    amps = np.broadcast_to(uniform_superposition(n).amplitudes, (batch, 2**n)).copy()
    for layer in range(config.layers):
        edge_angles = np.einsum("bef,ef->be", edge_feats, w_edge[layer])
        node_angles = np.einsum("bnf,nf->bn", node_feats, w_node[layer])
        for e_idx, (qi, qj) in enumerate(edge_qubits):
            amps = _apply_zzrot(amps, 2.0 * edge_angles[:, e_idx], qi, qj, n)
        for node in range(n):
            amps = _apply_1q(amps, rotation_matrix_1q("rx", node_angles[:, node]), node, n)

    probs = (amps.conj() * amps).real
    vals = probs @ _graph_readout_diag(n, tuple(edge_qubits)).T
    total = vals[:, :n] @ z_w + vals[:, n:] @ zz_w
    return a * total + b


def graph_perm_init(config: ModelConfig, rng: np.random.Generator) -> np.ndarray:
    from .common import count_params

    params = 0.1 * rng.normal(size=count_params(config))
    params[-2] += 0.3  # readout scale away from zero
    params[-1] += 0.5
    return params


ENERGY_BATCH = {
    "rot_eq": rot_eq_energy_batch,
    "non_eq": non_eq_energy_batch,
    "graph_perm": graph_perm_energy_batch,
}

QUANTUM_INIT = {
    "rot_eq": rot_eq_init,
    "non_eq": non_eq_init,
    "graph_perm": graph_perm_init,
}
