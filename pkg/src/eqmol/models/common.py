"""Model kinds, configurations, parameter counting, and checkpoints."""
from __future__ import annotations

import json
from dataclasses import dataclass, replace

import numpy as np

from ..data import _atomic_write
from ..features import MOLECULES
from ..pipeline import MinMaxScaler, PostCorrection

KINDS = ("rot_eq", "non_eq", "graph_perm", "classical")

CLASSICAL_INPUT_SIZE = 28
CLASSICAL_HIDDEN = (128, 128, 64)

GRAPH_NODES = {"LiH": 2, "NH3": 4}
GRAPH_EDGES = {"LiH": 1, "NH3": 6}
GRAPH_EDGE_CLASSES = {"LiH": 1, "NH3": 2}  # heavy-H, and H-H for NH3


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ModelConfig:
    kind: str
    molecule: str
    n_qubits: int = 0
    layers: int = 0
    hidden_sizes: tuple = ()
    strict_equivariance: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown model kind {self.kind!r}")
        if self.molecule not in MOLECULES:
            raise ConfigError(f"unknown molecule {self.molecule!r}")


def canonical_config(kind: str, molecule: str, strict_equivariance: bool = True,
                     seed: int = 0) -> ModelConfig:
    """Reference architectures: RotEq 6q/6L, NonEq 4q/4L, GraphPerm
    4q/4L (LiH shrinks to its 2-node graph), Classical 128-128-64."""
    if kind == "rot_eq":
        return ModelConfig(kind, molecule, n_qubits=6, layers=6, seed=seed)
    if kind == "non_eq":
        return ModelConfig(kind, molecule, n_qubits=4, layers=4, seed=seed)
    if kind == "graph_perm":
        return ModelConfig(kind, molecule, n_qubits=GRAPH_NODES[molecule], layers=4,
                           strict_equivariance=strict_equivariance, seed=seed)
    if kind == "classical":
        return ModelConfig(kind, molecule, hidden_sizes=CLASSICAL_HIDDEN, seed=seed)
    raise ConfigError(f"unknown model kind {kind!r}")


def count_params(config: ModelConfig) -> int:
    if config.kind == "rot_eq":
        if config.n_qubits != 6:
            raise ConfigError("rotational-equivariant layout is fixed at 6 qubits")
        # per layer: 1 encoding scale + 12 coupler times (ring + chords)
        return config.layers * 13 + 2
    if config.kind == "non_eq":
        return config.layers * config.n_qubits * 3
    if config.kind == "graph_perm":
        nodes = GRAPH_NODES[config.molecule]
        edges = GRAPH_EDGES[config.molecule]
        if config.n_qubits != nodes:
            raise ConfigError(f"graph model for {config.molecule} needs {nodes} qubits")
        if config.strict_equivariance:
            per_layer = 2 * 3 + GRAPH_EDGE_CLASSES[config.molecule] * 2
            readout = 2 + GRAPH_EDGE_CLASSES[config.molecule] + 2
        else:
            per_layer = nodes * 3 + edges * 2
            readout = nodes + edges + 2
        return config.layers * per_layer + readout
    if config.kind == "classical":
        sizes = (CLASSICAL_INPUT_SIZE,) + tuple(config.hidden_sizes)
        total = sum(a * b + b for a, b in zip(sizes[:-1], sizes[1:]))
        return total + sizes[-1] + 1  # linear output weights + bias
    raise ConfigError(f"unknown model kind {config.kind!r}")


@dataclass
class Model:
    config: ModelConfig
    params: np.ndarray
    energy_scaler: MinMaxScaler | None = None
    force_scaler: MinMaxScaler | None = None
    postcorrection: PostCorrection | None = None

    def __post_init__(self):
        self.params = np.asarray(self.params, dtype=float)
        expected = count_params(self.config)
        if self.params.shape != (expected,):
            raise ConfigError(
                f"{self.config.kind} expects {expected} parameters, got {self.params.shape}"
            )

    def with_params(self, params: np.ndarray) -> "Model":
        return Model(self.config, params, self.energy_scaler, self.force_scaler,
                     self.postcorrection)


def save_model(model: Model, path: str) -> None:
    cfg = model.config
    payload = {
        "kind": cfg.kind,
        "config": {
            "molecule": cfg.molecule,
            "n_qubits": cfg.n_qubits,
            "layers": cfg.layers,
            "hidden_sizes": list(cfg.hidden_sizes),
            "strict_equivariance": cfg.strict_equivariance,
            "seed": cfg.seed,
        },
        "params": model.params.tolist(),
        "scalers": {
            "energy": model.energy_scaler.to_dict() if model.energy_scaler else None,
            "force": model.force_scaler.to_dict() if model.force_scaler else None,
        },
        "postcorrection": {
            "energy": list(model.postcorrection.energy_coeffs),
            "force": list(model.postcorrection.force_coeffs),
        } if model.postcorrection else None,
    }
    _atomic_write(path, json.dumps(payload))


def load_model(path: str) -> Model:
    with open(path) as fh:
        payload = json.load(fh)
    c = payload["config"]
    config = ModelConfig(payload["kind"], c["molecule"], n_qubits=c["n_qubits"],
                         layers=c["layers"], hidden_sizes=tuple(c["hidden_sizes"]),
                         strict_equivariance=c["strict_equivariance"], seed=c["seed"])
    scalers = payload.get("scalers") or {}
    pc = payload.get("postcorrection")
    return Model(
        config,
        np.asarray(payload["params"], dtype=float),
        MinMaxScaler.from_dict(scalers["energy"]) if scalers.get("energy") else None,
        MinMaxScaler.from_dict(scalers["force"]) if scalers.get("force") else None,
        PostCorrection(tuple(pc["energy"]), tuple(pc["force"])) if pc else None,
    )
