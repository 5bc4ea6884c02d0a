"""Shared training machinery: scaling, losses, clipping, schedules,
post-correction, and a small Adam optimizer.

Leakage rule: scalers and post-corrections are fitted on training data
only; transforming test data never mutates the fitted statistics.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


class DegenerateScaleError(ValueError):
    """A channel is constant; min-max scaling is undefined."""


class DegenerateFitError(ValueError):
    """Least-squares design matrix is rank deficient."""


@dataclass
class MinMaxScaler:
    """Per-channel min-max scaling onto [0, 1] (on the fit domain)."""

    mins: np.ndarray | None = None
    maxs: np.ndarray | None = None

    @property
    def fitted(self) -> bool:
        return self.mins is not None

    def fit(self, values) -> "MinMaxScaler":
        v = np.asarray(values, dtype=float)
        flat = v.reshape(-1, v.shape[-1]) if v.ndim > 1 else v.reshape(-1, 1)
        mins, maxs = flat.min(axis=0), flat.max(axis=0)
        if np.any(maxs - mins <= 0):
            raise DegenerateScaleError("constant channel; cannot min-max scale")
        self.mins, self.maxs = mins, maxs
        return self

    def _check(self):
        if not self.fitted:
            raise ValueError("scaler not fitted")

    def transform(self, values) -> np.ndarray:
        self._check()
        v = np.asarray(values, dtype=float)
        return (v - self.mins.reshape((1,) * (v.ndim - 1) + (-1,))) / (self.maxs - self.mins) \
            if v.ndim > 1 else (v - self.mins[0]) / (self.maxs[0] - self.mins[0])

    def inverse(self, values) -> np.ndarray:
        self._check()
        v = np.asarray(values, dtype=float)
        return v * (self.maxs - self.mins) + self.mins if v.ndim > 1 \
            else v * (self.maxs[0] - self.mins[0]) + self.mins[0]

    def to_dict(self) -> dict:
        self._check()
        return {"mins": self.mins.tolist(), "maxs": self.maxs.tolist()}

    @classmethod
    def from_dict(cls, payload: dict) -> "MinMaxScaler":
        return cls(np.asarray(payload["mins"], dtype=float),
                   np.asarray(payload["maxs"], dtype=float))


# ---------------------------------------------------------------------------
# Losses and clipping

def huber(residual, delta: float = 0.5):
    """r^2/2 inside |r| <= delta, delta(|r| - delta/2) outside."""
    if delta <= 0:
        raise ValueError("huber threshold must be positive")
    r = np.abs(np.asarray(residual, dtype=float))
    out = np.where(r <= delta, 0.5 * r**2, delta * (r - 0.5 * delta))
    return float(out) if out.ndim == 0 else out


def huber_grad(residual, delta: float = 0.5):
    r = np.asarray(residual, dtype=float)
    return np.where(np.abs(r) <= delta, r, delta * np.sign(r))


def clip_gradient(grad, max_norm: float) -> np.ndarray:
    if max_norm <= 0:
        raise ValueError("max_norm must be positive")
    g = np.asarray(grad, dtype=float)
    norm = float(np.linalg.norm(g))
    return g if norm <= max_norm else g * (max_norm / norm)


# ---------------------------------------------------------------------------
# Post-correction (quadratic for energy, linear pooled for forces)

@dataclass(frozen=True)
class PostCorrection:
    energy_coeffs: tuple  # (c2, c1, c0): target = c2 p^2 + c1 p + c0
    force_coeffs: tuple   # (m, b): target = m p + b


def fit_postcorrection(energy_pred, energy_target,
                       force_pred=None, force_target=None) -> PostCorrection:
    ep = np.asarray(energy_pred, dtype=float).ravel()
    et = np.asarray(energy_target, dtype=float).ravel()
    if ep.size < 3:
        raise DegenerateFitError("need >= 3 energy pairs for quadratic fit")
    design = np.stack([ep**2, ep, np.ones_like(ep)], axis=1)
    if np.linalg.matrix_rank(design) < 3:
        raise DegenerateFitError("energy design matrix is rank deficient")
    c2, c1, c0 = np.linalg.lstsq(design, et, rcond=None)[0]

    if force_pred is None:
        m, b = 1.0, 0.0
    else:
        fp = np.asarray(force_pred, dtype=float).ravel()
        ft = np.asarray(force_target, dtype=float).ravel()
        if fp.size < 2:
            raise DegenerateFitError("need >= 2 force pairs for linear fit")
        design_f = np.stack([fp, np.ones_like(fp)], axis=1)
        if np.linalg.matrix_rank(design_f) < 2:
            raise DegenerateFitError("force design matrix is rank deficient")
        m, b = np.linalg.lstsq(design_f, ft, rcond=None)[0]
    return PostCorrection((float(c2), float(c1), float(c0)), (float(m), float(b)))


def apply_energy_correction(pc: PostCorrection, prediction):
    c2, c1, c0 = pc.energy_coeffs
    p = np.asarray(prediction, dtype=float)
    out = c2 * p**2 + c1 * p + c0
    return float(out) if out.ndim == 0 else out


def apply_force_correction(pc: PostCorrection, prediction):
    m, b = pc.force_coeffs
    out = m * np.asarray(prediction, dtype=float) + b
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# Two-phase schedules

@dataclass(frozen=True)
class TrainSchedule:
    """Piecewise-linear loss weights over epochs.

    Each weight is described by breakpoints [(epoch, value), ...]; between
    breakpoints the value interpolates linearly, outside it clamps.
    """

    total_epochs: int
    energy_points: tuple
    force_points: tuple

    def _eval(self, points, epoch: float) -> float:
        xs = [p[0] for p in points]
        ys = [p[1] for p in points]
        return float(np.interp(epoch, xs, ys))

    def weights(self, epoch: float):
        return self._eval(self.energy_points, epoch), self._eval(self.force_points, epoch)


def schedule_weights(schedule: TrainSchedule, epoch: float):
    if epoch < 0:
        raise ValueError("epoch must be >= 0")
    return schedule.weights(epoch)


def canonical_schedule(kind: str, total_epochs: int) -> TrainSchedule:
    """Per-method schedules; phase boundaries scale with the epoch budget.

    At the canonical budgets (400 epochs for the quantum methods) these
    reproduce the literal boundaries: rotational-equivariant force ramp over
    epochs [100, 300], graph method energy-only below epoch 200, classical
    30% warm-up with a ramp to 1 by 60%.
    """
    t = total_epochs
    if kind == "rot_eq":
        e = ((0, 1.0), (t, 1.0))
        f = ((0.0, 0.0), (0.25 * t, 0.0), (0.75 * t, 1.0), (t, 1.0))
    elif kind == "non_eq":
        e = ((0, 1.0), (t, 1.0))
        f = ((0, 1.0), (t, 1.0))
    elif kind == "graph_perm":
        e = ((0, 1.0), (t, 1.0))
        boundary = 0.5 * t
        f = ((0.0, 0.0), (np.nextafter(boundary, 0.0), 0.0), (boundary, 1.0), (t, 1.0))
    elif kind == "classical":
        e = ((0, 1.0), (t, 1.0))
        f = ((0.0, 0.0), (0.3 * t, 0.0), (0.6 * t, 1.0), (t, 1.0))
    else:
        raise ValueError(f"unknown model kind {kind!r}")
    return TrainSchedule(t, e, f)


# ---------------------------------------------------------------------------
# Adam

@dataclass
class Adam:
    lr: float = 0.05
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    m: np.ndarray | None = None
    v: np.ndarray | None = None
    t: int = 0

    def step(self, params: np.ndarray, grad: np.ndarray) -> np.ndarray:
        if self.m is None:
            self.m = np.zeros_like(params)
            self.v = np.zeros_like(params)
        self.t += 1
        self.m = self.beta1 * self.m + (1 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1 - self.beta2) * grad**2
        m_hat = self.m / (1 - self.beta1**self.t)
        v_hat = self.v / (1 - self.beta2**self.t)
        return params - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)
