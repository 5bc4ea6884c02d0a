"""Derived geometric features: bond vectors, distances, angles, graphs.

Atom ordering is fixed by the dataset schema: the heavy atom (Li or N) is
row 0, hydrogens follow.  All scalar features are functions of distances
and angles only and are therefore invariant under rigid motions; analytic
position-Jacobians are provided for the force chain rule.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

MOLECULES = ("LiH", "NH3")
ATOM_COUNT = {"LiH": 2, "NH3": 4}

# Equilibrium bond length of the surrogate potential per molecule; also the
# reference distance r0 of the Morse-style feature channel.
EQUILIBRIUM_DISTANCE = {"LiH": 1.6, "NH3": 1.01}
MORSE_EXPONENT = 1.0

RBF_COUNT = 16
RBF_CENTERS = np.linspace(0.5, 3.0, RBF_COUNT)
RBF_WIDTH = RBF_CENTERS[1] - RBF_CENTERS[0]

_DEGENERATE_DISTANCE = 1e-8


class DegenerateGeometryError(ValueError):
    """Two atoms coincide; bond features are undefined."""


@dataclass(frozen=True)
class GeometricFeatures:
    molecule: str
    bond_vectors: np.ndarray   # (m, 3), heavy -> hydrogen
    distances: np.ndarray      # (m,)
    unit_dirs: np.ndarray      # (m, 3)
    angle_pairs: tuple         # bond-index pairs (i, j), i < j
    angles: np.ndarray         # (len(angle_pairs),) radians in [0, pi]


def _validated_positions(positions, molecule: str) -> np.ndarray:
    if molecule not in MOLECULES:
        raise ValueError(f"unknown molecule {molecule!r}")
    pos = np.asarray(positions, dtype=float)
    expected = ATOM_COUNT[molecule]
    if pos.shape != (expected, 3):
        raise ValueError(f"{molecule} expects positions of shape ({expected}, 3), got {pos.shape}")
    if not np.all(np.isfinite(pos)):
        raise ValueError("positions contain non-finite values")
    return pos


def compute_features(positions, molecule: str) -> GeometricFeatures:
    pos = _validated_positions(positions, molecule)
    vectors = pos[1:] - pos[0]
    distances = np.linalg.norm(vectors, axis=1)
    if np.any(distances < _DEGENERATE_DISTANCE):
        raise DegenerateGeometryError(
            f"bond length below {_DEGENERATE_DISTANCE} A in {molecule} geometry"
        )
    units = vectors / distances[:, None]
    pairs, angles = [], []
    m = len(distances)
    for i in range(m):
        for j in range(i + 1, m):
            cosang = float(np.clip(np.dot(units[i], units[j]), -1.0, 1.0))
            pairs.append((i, j))
            angles.append(math.acos(cosang))
    return GeometricFeatures(
        molecule=molecule,
        bond_vectors=vectors,
        distances=distances,
        unit_dirs=units,
        angle_pairs=tuple(pairs),
        angles=np.asarray(angles),
    )


# ---------------------------------------------------------------------------
# Graph construction

def build_graph(features: GeometricFeatures):
    """GraphSpec view of the molecule.

    NH3: 4 nodes (N + 3 H), N-H edges weighted by bond length, H-H edges by
    bond angle, hydrogens declared permutable.  LiH degenerates to 2 nodes
    and a single distance-weighted edge with no permutable set.

    Node features are class-shared so permutation equivariance survives the
    encoder: hydrogen i -> (d_i, mean of its angles, 1), heavy atom ->
    (mean d, mean theta, 0).
    """
    from .encodings import GraphSpec

    d = features.distances
    if features.molecule == "LiH":
        node_feats = np.array([[d[0], 0.0, 0.0], [d[0], 0.0, 1.0]])
        return GraphSpec(2, node_feats, ((0, 1, float(d[0])),), permutable=())

    theta = dict(zip(features.angle_pairs, features.angles))
    mean_theta = float(features.angles.mean())
    node_feats = [[float(d.mean()), mean_theta, 0.0]]
    for i in range(3):
        own = [t for (a, b), t in theta.items() if i in (a, b)]
        node_feats.append([float(d[i]), float(np.mean(own)), 1.0])
    edges = [(0, i + 1, float(d[i])) for i in range(3)]
    for (i, j), t in sorted(theta.items()):
        edges.append((i + 1, j + 1, float(t)))
    return GraphSpec(4, np.asarray(node_feats), tuple(edges), permutable=(1, 2, 3))


# ---------------------------------------------------------------------------
# Invariant feature vector (input of the classical model)

def _pools(values: np.ndarray) -> list:
    if values.size == 0:
        return [0.0, 0.0, 0.0]
    return [float(values.mean()), float(values.min()), float(values.max())]


def rbf_encode(value: float) -> np.ndarray:
    return np.exp(-((value - RBF_CENTERS) ** 2) / (2 * RBF_WIDTH**2))


def invariant_feature_vector(features: GeometricFeatures) -> np.ndarray:
    """Permutation- and E(3)-invariant descriptor (length 28).

    Layout: pools(d), pools(1/d), pools(exp(-a(d-r0))), pools(theta),
    then 16 Gaussian RBFs of the mean bond distance; pools are
    (mean, min, max).
    """
    d = features.distances
    r0 = EQUILIBRIUM_DISTANCE[features.molecule]
    morse = np.exp(-MORSE_EXPONENT * (d - r0))
    parts = _pools(d) + _pools(1.0 / d) + _pools(morse) + _pools(features.angles)
    return np.concatenate([np.asarray(parts), rbf_encode(float(d.mean()))])


# ---------------------------------------------------------------------------
# Analytic position gradients

def distance_gradients(positions, molecule: str) -> np.ndarray:
    """d(d_i)/d(positions): shape (m, A, 3)."""
    feats = compute_features(positions, molecule)
    m = len(feats.distances)
    a = ATOM_COUNT[molecule]
    grads = np.zeros((m, a, 3))
    for i in range(m):
        grads[i, i + 1] = feats.unit_dirs[i]
        grads[i, 0] = -feats.unit_dirs[i]
    return grads


def angle_gradients(positions, molecule: str) -> np.ndarray:
    """d(theta_ij)/d(positions): shape (p, A, 3); zero at collinear bonds."""
    feats = compute_features(positions, molecule)
    a = ATOM_COUNT[molecule]
    p = len(feats.angle_pairs)
    grads = np.zeros((p, a, 3))
    for k, (i, j) in enumerate(feats.angle_pairs):
        ri, rj = feats.bond_vectors[i], feats.bond_vectors[j]
        di, dj = feats.distances[i], feats.distances[j]
        cosang = math.cos(feats.angles[k])
        sinang = math.sin(feats.angles[k])
        if sinang < 1e-12:
            continue
        dtheta_dri = -(rj / (di * dj) - cosang * ri / di**2) / sinang
        dtheta_drj = -(ri / (di * dj) - cosang * rj / dj**2) / sinang
        grads[k, i + 1] = dtheta_dri
        grads[k, j + 1] = dtheta_drj
        grads[k, 0] = -(dtheta_dri + dtheta_drj)
    return grads


def _pool_jacobian(values: np.ndarray, grads: np.ndarray) -> list:
    """Jacobians of (mean, min, max) pools; grads has shape (m, A, 3)."""
    if values.size == 0:
        zero = np.zeros(grads.shape[1:]) if grads.size else np.zeros((0, 3))
        return [zero, zero, zero]
    return [
        grads.mean(axis=0),
        grads[int(np.argmin(values))],
        grads[int(np.argmax(values))],
    ]


def invariant_feature_jacobian(positions, molecule: str) -> np.ndarray:
    """d(invariant_feature_vector)/d(positions): shape (n_features, A, 3)."""
    feats = compute_features(positions, molecule)
    d = feats.distances
    r0 = EQUILIBRIUM_DISTANCE[molecule]
    d_grads = distance_gradients(positions, molecule)
    t_grads = angle_gradients(positions, molecule)

    inv_grads = -d_grads / (d**2)[:, None, None]
    morse = np.exp(-MORSE_EXPONENT * (d - r0))
    morse_grads = -MORSE_EXPONENT * morse[:, None, None] * d_grads

    rows = []
    rows += _pool_jacobian(d, d_grads)
    rows += _pool_jacobian(1.0 / d, inv_grads)
    rows += _pool_jacobian(morse, morse_grads)
    if feats.angles.size:
        rows += _pool_jacobian(feats.angles, t_grads)
    else:
        zero = np.zeros((ATOM_COUNT[molecule], 3))
        rows += [zero, zero, zero]

    mean_d = float(d.mean())
    mean_d_grad = d_grads.mean(axis=0)
    rbf = rbf_encode(mean_d)
    for k in range(RBF_COUNT):
        coef = -(mean_d - RBF_CENTERS[k]) / RBF_WIDTH**2 * rbf[k]
        rows.append(coef * mean_d_grad)
    return np.stack(rows)
