"""K-fold cross-validation harness with regression metrics and summaries.

Per fold: scalers are fitted on the training split only, the model trains
with seed = base_seed + fold, a post-correction is fitted on training
predictions, and metrics are computed on corrected test predictions in
physical units.  Force metrics are computed per Cartesian component and
then averaged.
"""
from __future__ import annotations

import csv
import io
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .data import Dataset, _atomic_write
from .models import canonical_config, count_params, default_train_config, init_model, train
from .models.train import fd_forces_batch, predict_energy_batch
from .pipeline import (
    apply_energy_correction,
    apply_force_correction,
    fit_postcorrection,
)

KIND_ORDER = ("rot_eq", "non_eq", "graph_perm", "classical")

# Desk-scale epoch presets: small enough that a full 4-kind, 5-fold run on
# a 300-sample set stays well under half an hour on one core, large enough
# that the equivariant kinds separate cleanly from the non-equivariant one.
DESK_EPOCHS = {"rot_eq": 16, "non_eq": 10, "graph_perm": 40, "classical": 150}

ENERGY_METRICS = ("energy_r2", "energy_mae", "energy_rmse")
FORCE_METRICS = ("force_r2", "force_mae", "force_rmse")


class CrossValError(ValueError):
    """Structural misuse of the harness (bad k, bad kind names)."""


class UndefinedMetricError(ValueError):
    """R-squared requested against constant targets."""


# ---------------------------------------------------------------------------
# Metrics

def r2(pred, target) -> float:
    p, t = _paired(pred, target)
    ss_tot = float(np.sum((t - t.mean()) ** 2))
    if ss_tot == 0.0:
        raise UndefinedMetricError("R^2 is undefined for constant targets")
    return 1.0 - float(np.sum((t - p) ** 2)) / ss_tot


def mae(pred, target) -> float:
    p, t = _paired(pred, target)
    return float(np.mean(np.abs(p - t)))


def rmse(pred, target) -> float:
    p, t = _paired(pred, target)
    return float(np.sqrt(np.mean((p - t) ** 2)))


def _paired(pred, target):
    p = np.asarray(pred, dtype=float).ravel()
    t = np.asarray(target, dtype=float).ravel()
    if p.size == 0 or p.size != t.size:
        raise CrossValError(f"metric inputs must have equal non-zero length, "
                            f"got {p.size} and {t.size}")
    return p, t


# ---------------------------------------------------------------------------
# Folds

def kfold_split(n: int, k: int = 5, seed: int = 0) -> list:
    """Shuffled partition into k folds; returns (train_idx, test_idx) pairs."""
    if k < 2:
        raise CrossValError(f"need k >= 2 folds, got {k}")
    if n < k:
        raise CrossValError(f"cannot split {n} samples into {k} folds")
    order = np.random.default_rng(seed).permutation(n)
    chunks = np.array_split(order, k)
    splits = []
    for i, test in enumerate(chunks):
        train_idx = np.sort(np.concatenate([c for j, c in enumerate(chunks) if j != i]))
        splits.append((train_idx, np.sort(test)))
    return splits


# ---------------------------------------------------------------------------
# Reports

@dataclass(frozen=True)
class FoldReport:
    kind: str
    fold: int
    energy: dict               # metric name -> value
    force: dict                # averaged over components
    force_components: dict     # metric name -> (x, y, z) values
    param_count: int
    wall_time: float

    def metric_items(self):
        for name in ENERGY_METRICS:
            yield name, self.energy[name]
        for name in FORCE_METRICS:
            yield name, self.force[name]

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "fold": self.fold,
            "energy": dict(self.energy),
            "force": dict(self.force),
            "force_components": {k: list(v) for k, v in self.force_components.items()},
            "param_count": self.param_count,
            "wall_time": self.wall_time,
        }


@dataclass(frozen=True)
class CVSummary:
    mean: float
    std: float
    cov: float | None      # None when the mean is zero (undefined)
    range: float

    def to_dict(self) -> dict:
        return {
            "mean": self.mean,
            "std": self.std,
            "cov": "undefined" if self.cov is None else self.cov,
            "range": self.range,
        }


def summarize(scores) -> CVSummary:
    """Population statistics over fold scores (divisor k, not k-1)."""
    x = np.asarray(scores, dtype=float)
    if x.ndim != 1 or x.size < 2:
        raise CrossValError("summarize needs at least 2 fold scores")
    mean = float(x.mean())
    std = float(np.sqrt(np.mean((x - mean) ** 2)))
    cov = None if mean == 0.0 else std / mean
    return CVSummary(mean, std, cov, float(x.max() - x.min()))


# ---------------------------------------------------------------------------
# The harness

def evaluate_fold(dataset: Dataset, kind: str, fold: int, train_idx, test_idx,
                  base_seed: int, epochs: int | None = None,
                  strict_equivariance: bool = True) -> FoldReport:
    start = time.perf_counter()
    train_ds = dataset.subset(train_idx)
    test_ds = dataset.subset(test_idx)
    config = canonical_config(kind, dataset.molecule,
                              strict_equivariance=strict_equivariance,
                              seed=base_seed + fold)
    model = init_model(config)
    budget = epochs if epochs is not None else DESK_EPOCHS[kind]
    train(model, train_ds, train_cfg=default_train_config(kind, budget))

    def predict(split: Dataset):
        positions = split.positions_array()
        energy = model.energy_scaler.inverse(predict_energy_batch(model, positions))
        force = model.force_scaler.inverse(fd_forces_batch(model, positions))
        return energy, force

    e_train, f_train = predict(train_ds)
    correction = fit_postcorrection(e_train, train_ds.energies_array(),
                                    f_train, train_ds.forces_array())
    e_pred, f_pred = predict(test_ds)
    e_pred = apply_energy_correction(correction, e_pred)
    f_pred = apply_force_correction(correction, f_pred)
    e_true = test_ds.energies_array()
    f_true = test_ds.forces_array()

    energy = {"energy_r2": r2(e_pred, e_true),
              "energy_mae": mae(e_pred, e_true),
              "energy_rmse": rmse(e_pred, e_true)}
    components = {}
    for name, fn in (("force_r2", r2), ("force_mae", mae), ("force_rmse", rmse)):
        components[name] = tuple(
            fn(f_pred[:, :, c], f_true[:, :, c]) for c in range(3)
        )
    force = {name: float(np.mean(vals)) for name, vals in components.items()}
    return FoldReport(kind, fold, energy, force, components,
                      count_params(config), time.perf_counter() - start)


def _fold_job(args):
    return evaluate_fold(*args)


def normalize_kinds(kinds) -> tuple:
    if isinstance(kinds, str):
        kinds = (kinds,)
    resolved = []
    for kind in kinds:
        name = kind.replace("-", "_")
        if name == "all":
            resolved.extend(KIND_ORDER)
        elif name in KIND_ORDER:
            resolved.append(name)
        else:
            raise CrossValError(f"unknown model kind {kind!r}")
    # preserve first-seen order without duplicates
    return tuple(dict.fromkeys(resolved))


def run_cv(dataset: Dataset, kinds="all", k: int = 5, base_seed: int = 0,
           epochs: int | None = None, strict_equivariance: bool = True,
           jobs: int = 1) -> dict:
    """Returns {kind: {"folds": [FoldReport...], "summary": {metric: CVSummary}}}.

    Folds are independent; with jobs > 1 they run in worker processes, but
    aggregation always happens in (kind, fold) order so results are
    reproducible regardless of completion order.
    """
    kind_list = normalize_kinds(kinds)
    splits = kfold_split(len(dataset), k, seed=base_seed)
    tasks = [(dataset, kind, fold, train_idx, test_idx, base_seed, epochs,
              strict_equivariance)
             for kind in kind_list
             for fold, (train_idx, test_idx) in enumerate(splits)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            reports = list(pool.map(_fold_job, tasks))
    else:
        reports = [evaluate_fold(*task) for task in tasks]

    results: dict = {}
    for kind in kind_list:
        folds = sorted((r for r in reports if r.kind == kind), key=lambda r: r.fold)
        summary = {}
        for name in ENERGY_METRICS + FORCE_METRICS:
            scores = [dict(r.metric_items())[name] for r in folds]
            summary[name] = summarize(scores)
        results[kind] = {"folds": folds, "summary": summary}
    return results


# ---------------------------------------------------------------------------
# Report writers (all atomic)

def write_fold_csv(results: dict, path: str) -> None:
    # wall_time lives on the in-memory FoldReport only: report files must be
    # bit-identical across reruns of the same invocation, and timings are not
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["kind", "fold", "metric", "value"])
    for kind, payload in results.items():
        for report in payload["folds"]:
            for name, value in report.metric_items():
                writer.writerow([kind, report.fold, name, repr(value)])
            writer.writerow([kind, report.fold, "param_count",
                             repr(report.param_count)])
    _atomic_write(path, buf.getvalue())


def write_summary_json(results: dict, path: str) -> None:
    payload = {
        kind: {name: summ.to_dict() for name, summ in data["summary"].items()}
        for kind, data in results.items()
    }
    _atomic_write(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")


RADAR_AXES = ("energy_r2", "force_r2", "energy_consistency_inv",
              "force_consistency_inv", "energy_stability_inv")


def radar_rows(results: dict) -> list:
    """Five display axes per kind, each normalized to [0, 1] across kinds.

    Normalization is (x - min) / (max - min) per axis over the compared
    kinds (1.0 when all kinds tie); "inverted" axes apply 1 - normalized
    so that larger is always better.  Display-only convention.
    """
    kinds = list(results)
    raw = {
        "energy_r2": [results[k]["summary"]["energy_r2"].mean for k in kinds],
        "force_r2": [results[k]["summary"]["force_r2"].mean for k in kinds],
        "energy_consistency_inv": [results[k]["summary"]["energy_r2"].std for k in kinds],
        "force_consistency_inv": [results[k]["summary"]["force_r2"].std for k in kinds],
        "energy_stability_inv": [results[k]["summary"]["energy_r2"].range for k in kinds],
    }
    normalized = {}
    for axis, values in raw.items():
        lo, hi = min(values), max(values)
        span = hi - lo
        norm = [1.0 if span == 0 else (v - lo) / span for v in values]
        if axis.endswith("_inv"):
            norm = [1.0 - v if span != 0 else 1.0 for v in norm]
        normalized[axis] = norm
    return [[kind] + [normalized[axis][i] for axis in RADAR_AXES]
            for i, kind in enumerate(kinds)]


def write_radar_csv(results: dict, path: str) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["kind"] + list(RADAR_AXES))
    for row in radar_rows(results):
        writer.writerow([row[0]] + [repr(v) for v in row[1:]])
    _atomic_write(path, buf.getvalue())
