"""Training loops and the prediction API shared by all four model kinds.

Gradient routes follow the method table: parameter-shift for the
non-equivariant circuit (all its trainable gates have single-Pauli
generators), central finite differences over the parameters for the
rotationally equivariant and graph circuits (Heisenberg couplers and
vector rotations have composite generators), and backpropagation for the
classical network.  Forces always mean -dE/dpositions; the uniform
numerical route is a central difference with h = 1e-4 on raw coordinates.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from ..data import Dataset, MoleculeSample
from ..features import compute_features, invariant_feature_vector
from ..pipeline import (
    Adam,
    MinMaxScaler,
    TrainSchedule,
    canonical_schedule,
    clip_gradient,
    huber,
    huber_grad,
)
from . import classical
from .common import Model, ModelConfig, count_params
from .quantum import ENERGY_BATCH, QUANTUM_INIT

FORCE_FD_STEP = 1e-4
THETA_FD_STEP = 1e-5


class TrainingError(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    epochs: int
    lr: float
    clip_norm: float
    batch_size: int = 0        # 0 = full batch
    huber_delta: float = 0.5   # classical force loss threshold


def default_train_config(kind: str, epochs: int | None = None) -> TrainConfig:
    if kind == "classical":
        return TrainConfig(epochs or 300, 1e-3, 5.0, batch_size=32)
    return TrainConfig(epochs or 400, 0.05, 10.0)


# ---------------------------------------------------------------------------
# Prediction

def init_model(config: ModelConfig) -> Model:
    rng = np.random.default_rng(config.seed)
    if config.kind == "classical":
        params = classical.classical_init(config, rng)
    else:
        params = QUANTUM_INIT[config.kind](config, rng)
    return Model(config, params)


def _classical_feats(positions: np.ndarray, molecule: str) -> np.ndarray:
    return np.stack([
        invariant_feature_vector(compute_features(p, molecule)) for p in positions
    ])


def predict_energy_batch(model: Model, positions: np.ndarray) -> np.ndarray:
    """Model-unit (scaled) energies for positions of shape (B, A, 3)."""
    cfg = model.config
    if cfg.kind == "classical":
        feats = _classical_feats(positions, cfg.molecule)
        return classical.energy_batch(cfg, model.params, feats)
    return ENERGY_BATCH[cfg.kind](cfg, model.params, positions)


def predict_energy(model: Model, sample: MoleculeSample) -> float:
    return float(predict_energy_batch(model, sample.positions[None])[0])


def _stacked_force_shifts(positions: np.ndarray, h: float) -> np.ndarray:
    """All +-h single-coordinate displacements, shape (2*A*3, B, A, 3)."""
    b, a, _ = positions.shape
    shifts = np.broadcast_to(positions, (2 * a * 3,) + positions.shape).copy()
    k = 0
    for atom in range(a):
        for coord in range(3):
            shifts[k, :, atom, coord] += h
            shifts[k + 1, :, atom, coord] -= h
            k += 2
    return shifts


def _forces_from_stacked(energies: np.ndarray, shape: tuple, h: float) -> np.ndarray:
    b, a, _ = shape
    diffs = energies.reshape(a, 3, 2, b)
    forces = -(diffs[:, :, 0] - diffs[:, :, 1]) / (2 * h)
    return np.moveaxis(forces, 2, 0)


def fd_forces_batch(model: Model, positions: np.ndarray,
                    h: float = FORCE_FD_STEP) -> np.ndarray:
    """-dE/dx by central differences; one stacked batched energy call."""
    shifts = _stacked_force_shifts(positions, h)
    energies = predict_energy_batch(model, shifts.reshape((-1,) + positions.shape[1:]))
    return _forces_from_stacked(energies, positions.shape, h)


def predict_forces(model: Model, sample: MoleculeSample) -> np.ndarray:
    return fd_forces_batch(model, sample.positions[None])[0]


def classical_backprop_forces(model: Model, sample: MoleculeSample) -> np.ndarray:
    """Exact-gradient force path for the classical kind."""
    cfg = model.config
    if cfg.kind != "classical":
        raise TrainingError("backprop forces are only defined for the classical kind")
    feats = _classical_feats(sample.positions[None], cfg.molecule)
    jacs = classical.feature_jacobians(sample.positions[None], cfg.molecule)
    return classical.backprop_forces(cfg, model.params, feats, jacs)[0]


# ---------------------------------------------------------------------------
# Shared preprocessing

def _prepare_targets(model: Model, dataset: Dataset):
    if model.energy_scaler is None:
        model.energy_scaler = MinMaxScaler().fit(dataset.energies_array())
    if model.force_scaler is None:
        model.force_scaler = MinMaxScaler().fit(dataset.forces_array())
    e_t = model.energy_scaler.transform(dataset.energies_array())
    f_t = model.force_scaler.transform(dataset.forces_array())
    return e_t, f_t


# ---------------------------------------------------------------------------
# Quantum training

def _quantum_forces(config: ModelConfig, params: np.ndarray,
                    positions: np.ndarray) -> np.ndarray:
    efn = ENERGY_BATCH[config.kind]
    shifts = _stacked_force_shifts(positions, FORCE_FD_STEP)
    energies = efn(config, params, shifts.reshape((-1,) + positions.shape[1:]))
    return _forces_from_stacked(energies, positions.shape, FORCE_FD_STEP)


def _quantum_energy_forces(config: ModelConfig, params: np.ndarray,
                           positions: np.ndarray, with_forces: bool):
    """Energy and (optionally) FD forces from a single stacked circuit run."""
    efn = ENERGY_BATCH[config.kind]
    if not with_forces:
        return efn(config, params, positions), None
    b = positions.shape[0]
    shifts = _stacked_force_shifts(positions, FORCE_FD_STEP)
    stacked = np.concatenate([positions[None], shifts], axis=0)
    energies = efn(config, params, stacked.reshape((-1,) + positions.shape[1:]))
    forces = _forces_from_stacked(energies[b:], positions.shape, FORCE_FD_STEP)
    return energies[:b], forces


def _quantum_loss(config: ModelConfig, params: np.ndarray, positions: np.ndarray,
                  e_t: np.ndarray, f_t: np.ndarray, w_e: float, w_f: float) -> float:
    energy, forces = _quantum_energy_forces(config, params, positions, w_f > 0)
    loss = w_e * float(np.mean((energy - e_t) ** 2))
    if w_f > 0:
        loss += w_f * float(np.mean((forces - f_t) ** 2))
    return loss


def _quantum_grad_fd(config, params, positions, e_t, f_t, w_e, w_f) -> np.ndarray:
    grad = np.empty_like(params)
    for k in range(params.size):
        stepped = params.copy()
        stepped[k] = params[k] + THETA_FD_STEP
        up = _quantum_loss(config, stepped, positions, e_t, f_t, w_e, w_f)
        stepped[k] = params[k] - THETA_FD_STEP
        down = _quantum_loss(config, stepped, positions, e_t, f_t, w_e, w_f)
        grad[k] = (up - down) / (2 * THETA_FD_STEP)
    return grad


def _rot_eq_grad_fd(config, params, positions, e_t, f_t, w_e, w_f) -> np.ndarray:
    """Central FD gradient for the rot_eq kind with suffix recomputation.

    Same step and differencing as the generic route, but each perturbed
    parameter touches exactly one layer, so the states entering that layer
    and the gate matrices of every other layer can be computed once and
    reused.  The force-phase evaluations dominate training cost without
    this."""
    from ..encodings import singlet_init
    from ..qsim import _apply_1q, expectation_batch, pauli_vec_rot_matrix
    from .quantum import (
        _ROT_EQ_OBSERVABLE,
        _ROT_EQ_PAIRS,
        _rot_eq_unpack,
        rot_eq_layer_unitary,
        rot_eq_pair_bonds,
    )

    n_layers = config.layers
    h = THETA_FD_STEP
    batch = positions.shape[0]
    if w_f > 0:
        shifts = _stacked_force_shifts(positions, FORCE_FD_STEP)
        stacked = np.concatenate([positions[None], shifts], axis=0)
        stacked = stacked.reshape((-1,) + positions.shape[1:])
    else:
        stacked = positions
    pair_bonds = rot_eq_pair_bonds(stacked)
    scales, times, a_r, b_r = _rot_eq_unpack(params, n_layers)

    def loss_from_total(total, a_v, b_v):
        energies = a_v * total + b_v
        loss = w_e * float(np.mean((energies[:batch] - e_t) ** 2))
        if w_f > 0:
            forces = _forces_from_stacked(energies[batch:], positions.shape,
                                          FORCE_FD_STEP)
            loss += w_f * float(np.mean((forces - f_t) ** 2))
        return loss

    enc_mats = [[pauli_vec_rot_matrix(pair_bonds[:, k] * scales[layer])
                 for k in range(3)] for layer in range(n_layers)]
    layer_us = [rot_eq_layer_unitary(times[layer]) for layer in range(n_layers)]

    def encode(amps, layer, mats=None):
        mats = enc_mats[layer] if mats is None else mats
        for k, (qa, _) in enumerate(_ROT_EQ_PAIRS):
            amps = _apply_1q(amps, mats[k], qa, 6)
        return amps

    amps = np.broadcast_to(singlet_init(3).amplitudes, (stacked.shape[0], 64)).copy()
    pre_layer, post_enc = [amps], []
    for layer in range(n_layers):
        amps = encode(amps, layer)
        post_enc.append(amps)
        amps = amps @ layer_us[layer]
        pre_layer.append(amps)
    total_base = expectation_batch(amps, _ROT_EQ_OBSERVABLE, 6)

    def suffix_total(amps, layer_next):
        for layer in range(layer_next, n_layers):
            amps = encode(amps, layer) @ layer_us[layer]
        return expectation_batch(amps, _ROT_EQ_OBSERVABLE, 6)

    grad = np.empty_like(params)
    for layer in range(n_layers):
        vals = []
        for sign in (1.0, -1.0):
            s = scales[layer] + sign * h
            mats = [pauli_vec_rot_matrix(pair_bonds[:, k] * s) for k in range(3)]
            amps = encode(pre_layer[layer], layer, mats) @ layer_us[layer]
            vals.append(loss_from_total(suffix_total(amps, layer + 1), a_r, b_r))
        grad[layer] = (vals[0] - vals[1]) / (2 * h)
    idx = n_layers
    for layer in range(n_layers):
        for c in range(12):
            vals = []
            for sign in (1.0, -1.0):
                stepped = times[layer].copy()
                stepped[c] += sign * h
                amps = post_enc[layer] @ rot_eq_layer_unitary(stepped)
                vals.append(loss_from_total(suffix_total(amps, layer + 1), a_r, b_r))
            grad[idx] = (vals[0] - vals[1]) / (2 * h)
            idx += 1
    grad[-2] = (loss_from_total(total_base, a_r + h, b_r)
                - loss_from_total(total_base, a_r - h, b_r)) / (2 * h)
    grad[-1] = (loss_from_total(total_base, a_r, b_r + h)
                - loss_from_total(total_base, a_r, b_r - h)) / (2 * h)
    return grad


def _quantum_grad_shift(config, params, positions, e_t, f_t, w_e, w_f) -> np.ndarray:
    """Exact parameter-shift chain rule; every non_eq slot is a single
    Pauli rotation, so dE/dtheta_k = (E(+pi/2) - E(-pi/2)) / 2."""
    batch = positions.shape[0]
    with_f = w_f > 0
    energy, forces = _quantum_energy_forces(config, params, positions, with_f)
    grad = np.empty_like(params)
    e_res = 2.0 * w_e * (energy - e_t) / batch
    for k in range(params.size):
        stepped = params.copy()
        stepped[k] = params[k] + math.pi / 2
        e_plus, f_plus = _quantum_energy_forces(config, stepped, positions, with_f)
        stepped[k] = params[k] - math.pi / 2
        e_minus, f_minus = _quantum_energy_forces(config, stepped, positions, with_f)
        de = 0.5 * (e_plus - e_minus)
        grad[k] = float(e_res @ de)
        if w_f > 0:
            df = 0.5 * (f_plus - f_minus)
            f_res = 2.0 * w_f * (forces - f_t) / f_t.size
            grad[k] += float(np.sum(f_res * df))
    return grad


def _train_quantum(model: Model, dataset: Dataset, schedule: TrainSchedule,
                   cfg: TrainConfig) -> list:
    positions = dataset.positions_array()
    e_t, f_t = _prepare_targets(model, dataset)
    grad_fn = {
        "non_eq": _quantum_grad_shift,
        "rot_eq": _rot_eq_grad_fd,
    }.get(model.config.kind, _quantum_grad_fd)
    adam = Adam(lr=cfg.lr)
    params = model.params.copy()
    history = []
    for epoch in range(cfg.epochs):
        w_e, w_f = schedule.weights(epoch)
        loss = _quantum_loss(model.config, params, positions, e_t, f_t, w_e, w_f)
        if not math.isfinite(loss):
            raise TrainingError(f"non-finite loss at epoch {epoch} (full batch)")
        history.append(loss)
        grad = grad_fn(model.config, params, positions, e_t, f_t, w_e, w_f)
        grad = clip_gradient(grad, cfg.clip_norm)
        params = adam.step(params, grad)
    model.params = params
    return history


# ---------------------------------------------------------------------------
# Classical training

def _train_classical(model: Model, dataset: Dataset, schedule: TrainSchedule,
                     cfg: TrainConfig) -> list:
    config = model.config
    positions = dataset.positions_array()
    feats = _classical_feats(positions, config.molecule)
    jacs = classical.feature_jacobians(positions, config.molecule)
    e_t, f_t = _prepare_targets(model, dataset)

    rng = np.random.default_rng(config.seed + 1)
    adam = Adam(lr=cfg.lr)
    params = model.params.copy()
    n = len(dataset)
    batch_size = cfg.batch_size or n
    history = []
    for epoch in range(cfg.epochs):
        w_e, w_f = schedule.weights(epoch)
        order = rng.permutation(n)
        for start in range(0, n, batch_size):
            idx = order[start:start + batch_size]
            fb, eb = feats[idx], e_t[idx]
            energy = classical.energy_batch(config, params, fb)
            upstream = 2.0 * w_e * (energy - eb) / idx.size
            grad = classical.param_gradient(config, params, fb, upstream)
            if w_f > 0:
                jb, tb = jacs[idx], f_t[idx]
                force = classical.backprop_forces(config, params, fb, jb)
                dldf = w_f * huber_grad(force - tb, cfg.huber_delta) / tb.size
                grad += classical.force_loss_param_gradient(config, params, fb, jb, dldf)
            grad = clip_gradient(grad, cfg.clip_norm)
            params = adam.step(params, grad)
            if not np.all(np.isfinite(params)):
                raise TrainingError(
                    f"non-finite parameters at epoch {epoch}, batch {start // batch_size}"
                )
        energy = classical.energy_batch(config, params, feats)
        loss = w_e * float(np.mean((energy - e_t) ** 2))
        if w_f > 0:
            force = classical.backprop_forces(config, params, feats, jacs)
            loss += w_f * float(np.mean(huber(force - f_t, cfg.huber_delta)))
        if not math.isfinite(loss):
            raise TrainingError(f"non-finite loss at epoch {epoch}")
        history.append(loss)
    model.params = params
    return history


def train(model: Model, dataset: Dataset, schedule: TrainSchedule | None = None,
          train_cfg: TrainConfig | None = None):
    """Fit the model in place; returns (model, loss history)."""
    if dataset.molecule != model.config.molecule:
        raise TrainingError(
            f"dataset molecule {dataset.molecule} != model molecule "
            f"{model.config.molecule}"
        )
    cfg = train_cfg or default_train_config(model.config.kind)
    sched = schedule or canonical_schedule(model.config.kind, cfg.epochs)
    if model.config.kind == "classical":
        history = _train_classical(model, dataset, sched, cfg)
    else:
        history = _train_quantum(model, dataset, sched, cfg)
    if not np.all(np.isfinite(model.params)):
        raise TrainingError("training produced non-finite parameters")
    return model, history
