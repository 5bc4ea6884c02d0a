"""Classical equivariant baseline: invariant features into an MLP with a
skip connection, SiLU activations, and hand-written backpropagation.

The network reads the E(3)- and permutation-invariant feature vector, so
its predictions inherit those invariances exactly.  Forces come from the
exact input-gradient chained through the analytic feature Jacobian.
"""
from __future__ import annotations

import numpy as np

from ..features import invariant_feature_jacobian
from .common import CLASSICAL_HIDDEN, CLASSICAL_INPUT_SIZE, ModelConfig


def _layout(config: ModelConfig):
    sizes = (CLASSICAL_INPUT_SIZE,) + tuple(config.hidden_sizes)
    offsets, pos = [], 0
    for a, b in zip(sizes[:-1], sizes[1:]):
        offsets.append((pos, pos + a * b, a, b))       # weight block
        pos += a * b + b                               # + bias block
    out_w = pos
    return sizes, offsets, out_w


def unpack(config: ModelConfig, params: np.ndarray):
    sizes, offsets, out_w = _layout(config)
    weights, biases = [], []
    for start, wend, a, b in offsets:
        weights.append(params[start:wend].reshape(a, b))
        biases.append(params[wend:wend + b])
    w_out = params[out_w:-1]
    b_out = params[-1]
    return weights, biases, w_out, b_out


def classical_init(config: ModelConfig, rng: np.random.Generator) -> np.ndarray:
    sizes = (CLASSICAL_INPUT_SIZE,) + tuple(config.hidden_sizes)
    parts = []
    for a, b in zip(sizes[:-1], sizes[1:]):
        parts.append(rng.normal(scale=np.sqrt(2.0 / a), size=a * b))
        parts.append(np.zeros(b))
    parts.append(rng.normal(scale=np.sqrt(1.0 / sizes[-1]), size=sizes[-1]))
    parts.append(np.array([0.5]))
    return np.concatenate(parts)


def _silu(x):
    sig = 1.0 / (1.0 + np.exp(-x))
    return x * sig


def _silu_prime(x):
    sig = 1.0 / (1.0 + np.exp(-x))
    return sig * (1.0 + x * (1.0 - sig))


def _forward(config: ModelConfig, params: np.ndarray, feats: np.ndarray):
    """feats (B, F) -> energies (B,) plus the activation cache.

    Skip connection: the first hidden activation is added onto the second
    (both width 128 in the canonical layout)."""
    (w1, w2, w3), (b1, b2, b3), w_out, b_out = unpack(config, params)
    z1 = feats @ w1 + b1
    a1 = _silu(z1)
    z2 = a1 @ w2 + b2
    a2 = _silu(z2) + a1
    z3 = a2 @ w3 + b3
    a3 = _silu(z3)
    energy = a3 @ w_out + b_out
    return energy, (feats, z1, a1, z2, a2, z3, a3)


def energy_batch(config: ModelConfig, params: np.ndarray, feats: np.ndarray) -> np.ndarray:
    return _forward(config, params, feats)[0]


def param_gradient(config: ModelConfig, params: np.ndarray, feats: np.ndarray,
                   upstream: np.ndarray) -> np.ndarray:
    """Gradient of sum_b upstream_b * E(feats_b) with respect to params."""
    (w1, w2, w3), _, w_out, _ = unpack(config, params)
    _, (f, z1, a1, z2, a2, z3, a3) = _forward(config, params, feats)
    grad = np.zeros_like(params)
    d_a3 = upstream[:, None] * w_out
    d_z3 = d_a3 * _silu_prime(z3)
    d_a2 = d_z3 @ w3.T
    d_z2 = d_a2 * _silu_prime(z2)
    d_a1 = d_z2 @ w2.T + d_a2     # skip connection
    d_z1 = d_a1 * _silu_prime(z1)

    sizes, offsets, out_w = _layout(config)
    blocks = [(f, d_z1), (a1, d_z2), (a2, d_z3)]
    for (start, wend, a, b), (inp, delta) in zip(offsets, blocks):
        grad[start:wend] = (inp.T @ delta).ravel()
        grad[wend:wend + b] = delta.sum(axis=0)
    grad[out_w:-1] = upstream @ a3
    grad[-1] = upstream.sum()
    return grad


def input_gradient(config: ModelConfig, params: np.ndarray, feats: np.ndarray) -> np.ndarray:
    """Exact dE/dfeats, shape (B, F)."""
    (w1, w2, w3), _, w_out, _ = unpack(config, params)
    _, (f, z1, a1, z2, a2, z3, a3) = _forward(config, params, feats)
    d_z3 = _silu_prime(z3) * w_out
    d_a2 = d_z3 @ w3.T
    d_z2 = d_a2 * _silu_prime(z2)
    d_a1 = d_z2 @ w2.T + d_a2
    d_z1 = d_a1 * _silu_prime(z1)
    return d_z1 @ w1.T


def backprop_forces(config: ModelConfig, params: np.ndarray, feats: np.ndarray,
                    jacobians: np.ndarray) -> np.ndarray:
    """F = -J^T dE/dfeats; jacobians (B, F, A, 3) -> forces (B, A, 3)."""
    g = input_gradient(config, params, feats)
    return -np.einsum("bf,bfax->bax", g, jacobians)


def feature_jacobians(positions: np.ndarray, molecule: str) -> np.ndarray:
    return np.stack([invariant_feature_jacobian(p, molecule) for p in positions])


def force_loss_param_gradient(config: ModelConfig, params: np.ndarray,
                              feats: np.ndarray, jacobians: np.ndarray,
                              dloss_dforce: np.ndarray,
                              eps: float = 1e-4) -> np.ndarray:
    """Gradient of the force-loss term with respect to the parameters.

    The force loss reaches the parameters through the input-gradient g(f);
    its parameter gradient is grad_theta sum_b v_b . g(f_b) with
    v_b = -J_b dL/dF_b.  That equals the parameter gradient of a
    directional derivative of E, evaluated here by a central difference of
    two plain backprop passes along the (unit) directions v_b.
    """
    v = -np.einsum("bax,bfax->bf", dloss_dforce, jacobians)
    norms = np.linalg.norm(v, axis=1)
    scale = np.where(norms > 0, norms, 1.0)
    v_hat = v / scale[:, None]
    g_plus = param_gradient(config, params, feats + eps * v_hat, norms)
    g_minus = param_gradient(config, params, feats - eps * v_hat, norms)
    return (g_plus - g_minus) / (2.0 * eps)
