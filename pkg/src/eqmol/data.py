"""Surrogate molecular datasets with analytically consistent forces.

The ab initio pipeline is out of scope; energies come from closed-form
surrogate surfaces instead, so generated forces are exact negative
gradients of the stored energy by construction:

- LiH: Morse bond, E = D (1 - exp(-a (r - r0)))^2 with D=2.5, a=1.2, r0=1.6.
- NH3: harmonic bonds + angles, E = sum k_b (d_i - d0)^2 / 2
  + sum k_t (theta_ij - theta0)^2 / 2 with k_b=20, k_t=5, d0=1.01,
  theta0=1.87.

Units follow the dataset schema labels (A, eV/A, energy in surrogate
Hartree-like units); the surrogate is self-consistent, not physically
calibrated.
"""
from __future__ import annotations

import json
import math
import os
import tempfile
from dataclasses import dataclass, field

import numpy as np

from .features import (
    ATOM_COUNT,
    EQUILIBRIUM_DISTANCE,
    MOLECULES,
    angle_gradients,
    compute_features,
    distance_gradients,
)

LIH_WELL_DEPTH = 2.5
LIH_MORSE_A = 1.2
LIH_R0 = EQUILIBRIUM_DISTANCE["LiH"]

NH3_K_BOND = 20.0
NH3_K_ANGLE = 5.0
NH3_D0 = EQUILIBRIUM_DISTANCE["NH3"]
NH3_THETA0 = 1.87

DEFAULT_SIZE = {"LiH": 2000, "NH3": 2400}
DESK_SIZE = 300


class DatasetError(ValueError):
    """Malformed or inconsistent dataset content."""


@dataclass(frozen=True)
class MoleculeSample:
    positions: np.ndarray  # (A, 3)
    forces: np.ndarray     # (A, 3)
    energy: float

    def __post_init__(self):
        object.__setattr__(self, "positions", np.asarray(self.positions, dtype=float))
        object.__setattr__(self, "forces", np.asarray(self.forces, dtype=float))


@dataclass(frozen=True)
class Dataset:
    molecule: str
    samples: tuple
    provenance: str = "surrogate"

    def __post_init__(self):
        if self.molecule not in MOLECULES:
            raise DatasetError(f"unknown molecule {self.molecule!r}")
        if not self.samples:
            raise DatasetError("dataset must be non-empty")
        object.__setattr__(self, "samples", tuple(self.samples))
        expected = (ATOM_COUNT[self.molecule], 3)
        for idx, s in enumerate(self.samples):
            if s.positions.shape != expected or s.forces.shape != expected:
                raise DatasetError(
                    f"sample {idx}: expected position/force shape {expected}, "
                    f"got {s.positions.shape} / {s.forces.shape}"
                )
            if not (np.all(np.isfinite(s.positions)) and np.all(np.isfinite(s.forces))
                    and math.isfinite(s.energy)):
                raise DatasetError(f"sample {idx}: non-finite values")

    def __len__(self):
        return len(self.samples)

    def positions_array(self) -> np.ndarray:
        return np.stack([s.positions for s in self.samples])

    def forces_array(self) -> np.ndarray:
        return np.stack([s.forces for s in self.samples])

    def energies_array(self) -> np.ndarray:
        return np.array([s.energy for s in self.samples])

    def subset(self, indices) -> "Dataset":
        return Dataset(self.molecule, tuple(self.samples[i] for i in indices),
                       self.provenance)


# ---------------------------------------------------------------------------
# Surrogate energy surfaces (shared by generation and the self-consistency
# tests: energy recomputed from stored positions must match stored energy)

def lih_energy(positions) -> float:
    feats = compute_features(positions, "LiH")
    r = float(feats.distances[0])
    return LIH_WELL_DEPTH * (1.0 - math.exp(-LIH_MORSE_A * (r - LIH_R0))) ** 2


def lih_forces(positions) -> np.ndarray:
    feats = compute_features(positions, "LiH")
    r = float(feats.distances[0])
    expo = math.exp(-LIH_MORSE_A * (r - LIH_R0))
    de_dr = 2.0 * LIH_WELL_DEPTH * (1.0 - expo) * LIH_MORSE_A * expo
    d_grads = distance_gradients(positions, "LiH")
    return -de_dr * d_grads[0]


def nh3_energy(positions) -> float:
    feats = compute_features(positions, "NH3")
    bond = 0.5 * NH3_K_BOND * np.sum((feats.distances - NH3_D0) ** 2)
    angle = 0.5 * NH3_K_ANGLE * np.sum((feats.angles - NH3_THETA0) ** 2)
    return float(bond + angle)


def nh3_forces(positions) -> np.ndarray:
    feats = compute_features(positions, "NH3")
    d_grads = distance_gradients(positions, "NH3")
    t_grads = angle_gradients(positions, "NH3")
    grad = np.zeros_like(np.asarray(positions, dtype=float))
    for i, d in enumerate(feats.distances):
        grad += NH3_K_BOND * (d - NH3_D0) * d_grads[i]
    for k, theta in enumerate(feats.angles):
        grad += NH3_K_ANGLE * (theta - NH3_THETA0) * t_grads[k]
    return -grad


ENERGY_FN = {"LiH": lih_energy, "NH3": nh3_energy}


# ---------------------------------------------------------------------------
# Generation (per-sample seed streams so parallel generation is stable)

def _sample_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng([seed, index])


def _random_rotation(rng: np.random.Generator) -> np.ndarray:
    q = rng.normal(size=4)
    q /= np.linalg.norm(q)
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


def gen_lih(n: int, seed: int, noise_scale: float = 0.0) -> Dataset:
    """Random LiH bonds, r ~ U[1.2, 2.4] A, random rigid motion."""
    if n < 1:
        raise DatasetError("need at least one sample")
    samples = []
    for idx in range(n):
        rng = _sample_rng(seed, idx)
        r = rng.uniform(1.2, 2.4)
        rot = _random_rotation(rng)
        shift = rng.normal(scale=2.0, size=3)
        positions = np.stack([np.zeros(3), np.array([r, 0.0, 0.0])])
        positions = positions @ rot.T + shift
        forces = lih_forces(positions)
        if noise_scale > 0:
            forces = forces + rng.normal(scale=noise_scale, size=forces.shape)
        samples.append(MoleculeSample(positions, forces, lih_energy(positions)))
    return Dataset("LiH", tuple(samples), "surrogate")


def _equilibrium_nh3_directions() -> np.ndarray:
    """Three unit vectors with pairwise angle NH3_THETA0 (trigonal pyramid)."""
    # each direction: tilt t from the -z axis, azimuths 0/120/240 degrees;
    # pairwise cosine = sin^2 t cos(120) + cos^2 t solved for the target angle
    cos_target = math.cos(NH3_THETA0)
    cos_t2 = (2.0 * cos_target + 1.0) / 3.0
    tilt = math.acos(math.sqrt(cos_t2))
    dirs = []
    for k in range(3):
        az = 2.0 * math.pi * k / 3.0
        dirs.append([
            math.sin(tilt) * math.cos(az),
            math.sin(tilt) * math.sin(az),
            -math.cos(tilt),
        ])
    return np.asarray(dirs)


def nh3_equilibrium_positions() -> np.ndarray:
    return np.vstack([np.zeros(3), NH3_D0 * _equilibrium_nh3_directions()])


def gen_nh3(n: int, seed: int, noise_scale: float = 0.0) -> Dataset:
    """Perturbed trigonal-pyramidal NH3 geometries with random rigid motion."""
    if n < 1:
        raise DatasetError("need at least one sample")
    base_dirs = _equilibrium_nh3_directions()
    samples = []
    for idx in range(n):
        rng = _sample_rng(seed, idx)
        lengths = NH3_D0 * rng.uniform(0.9, 1.1, size=3)
        dirs = base_dirs + rng.normal(scale=0.06, size=(3, 3))
        dirs /= np.linalg.norm(dirs, axis=1)[:, None]
        positions = np.vstack([np.zeros(3), lengths[:, None] * dirs])
        rot = _random_rotation(rng)
        shift = rng.normal(scale=2.0, size=3)
        positions = positions @ rot.T + shift
        forces = nh3_forces(positions)
        if noise_scale > 0:
            forces = forces + rng.normal(scale=noise_scale, size=forces.shape)
        samples.append(MoleculeSample(positions, forces, nh3_energy(positions)))
    return Dataset("NH3", tuple(samples), "surrogate")


GENERATORS = {"LiH": gen_lih, "NH3": gen_nh3}


# ---------------------------------------------------------------------------
# JSON persistence (full double round-trip precision via repr floats)

def _atomic_write(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save_dataset(dataset: Dataset, path: str) -> None:
    payload = {
        "molecule": dataset.molecule,
        "provenance": dataset.provenance,
        "samples": [
            {
                "positions": s.positions.tolist(),
                "forces": s.forces.tolist(),
                "energy": s.energy,
            }
            for s in dataset.samples
        ],
    }
    _atomic_write(path, json.dumps(payload))


def load_dataset(path: str) -> Dataset:
    try:
        with open(path) as fh:
            payload = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise DatasetError(f"cannot read dataset {path}: {exc}") from exc
    if not isinstance(payload, dict) or "molecule" not in payload or "samples" not in payload:
        raise DatasetError(f"{path}: expected object with 'molecule' and 'samples'")
    molecule = payload["molecule"]
    if molecule not in MOLECULES:
        raise DatasetError(f"{path}: unknown molecule {molecule!r}")
    expected = (ATOM_COUNT[molecule], 3)
    samples = []
    for idx, rec in enumerate(payload["samples"]):
        try:
            positions = np.asarray(rec["positions"], dtype=float)
            forces = np.asarray(rec["forces"], dtype=float)
            energy = float(rec["energy"])
        except (KeyError, TypeError, ValueError) as exc:
            raise DatasetError(f"{path}: sample {idx} malformed: {exc}") from exc
        if positions.shape != expected:
            raise DatasetError(
                f"{path}: sample {idx} positions shape {positions.shape} != {expected}"
            )
        if forces.shape != expected:
            raise DatasetError(
                f"{path}: sample {idx} forces shape {forces.shape} != {expected}"
            )
        if not (np.all(np.isfinite(positions)) and np.all(np.isfinite(forces))
                and math.isfinite(energy)):
            raise DatasetError(f"{path}: sample {idx} has non-finite values")
        samples.append(MoleculeSample(positions, forces, energy))
    if not samples:
        raise DatasetError(f"{path}: dataset has no samples")
    return Dataset(molecule, tuple(samples), payload.get("provenance", "ingested"))
