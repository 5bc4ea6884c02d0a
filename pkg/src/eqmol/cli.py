"""Command-line entry point: data generation, training, equivariance
checks, cross-validation, and report printing.

Exit codes: 0 success, 1 validation error (bad flags or bad inputs),
2 runtime failure.  Every command echoes its fully resolved configuration
before doing work, and all output files are written atomically.
"""
from __future__ import annotations

import itertools
import json
import os
import sys

import click
import numpy as np

from . import crossval as cv
from . import data as datamod
from .data import DEFAULT_SIZE, _atomic_write, load_dataset, save_dataset
from .encodings import (
    EulerAngles,
    QubitPermutation,
    conjugating_matrix,
    euler_rotate,
    graph_encoding_state,
    permute_graph,
    permute_state,
    singlet_init,
    so3_embed_matrix,
)
from .features import build_graph, compute_features
from .models import canonical_config, default_train_config, init_model, save_model, train
from .models.train import fd_forces_batch, predict_energy_batch
from .qsim import pauli_vec_rot_matrix


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    with open(path) as fh:
        payload = json.load(fh)
    if not isinstance(payload, dict):
        raise click.ClickException(f"config file {path} must hold a JSON object")
    return payload


def _resolve(flag_value, config: dict, key: str, default):
    """Flags beat the config file, which beats the built-in default."""
    if flag_value is not None:
        return flag_value
    return config.get(key, default)


def _echo_config(command: str, resolved: dict) -> None:
    click.echo(f"[{command}] resolved config: "
               + json.dumps(resolved, sort_keys=True, default=str))


@click.group()
def cli():
    """Geometric QML benchmark toolkit."""


@cli.command("gen-data")
@click.option("--molecule", type=click.Choice(["LiH", "NH3"]), required=True,
              help="Target molecule.")
@click.option("--n", type=int, default=None,
              help="Sample count (default: full benchmark dataset size).")
@click.option("--seed", type=int, default=None, help="Generation seed (default 0).")
@click.option("--out", required=True, help="Output dataset JSON path.")
@click.option("--config", "config_path", default=None,
              help="JSON config file; flags override its values.")
def gen_data(molecule, n, seed, out, config_path):
    """Generate a surrogate dataset with analytic energies and forces."""
    config = _load_config(config_path)
    n = int(_resolve(n, config, "n", DEFAULT_SIZE[molecule]))
    seed = int(_resolve(seed, config, "seed", 0))
    _echo_config("gen-data", {"molecule": molecule, "n": n, "seed": seed, "out": out})
    dataset = datamod.GENERATORS[molecule](n, seed=seed)
    save_dataset(dataset, out)
    click.echo(f"wrote {len(dataset)} {molecule} samples to {out}")


@cli.command("train")
@click.option("--data", "data_path", required=True, help="Dataset JSON path.")
@click.option("--kinds", default=None,
              type=click.Choice(["rot-eq", "non-eq", "graph-perm", "classical"]),
              help="Model kind to train (default rot-eq).")
@click.option("--seed", type=int, default=None, help="Init seed (default 0).")
@click.option("--epochs", type=int, default=None,
              help="Epoch budget (default: per-kind canonical budget).")
@click.option("--strict-equivariance", type=click.BOOL, default=None,
              help="Share graph weights per node/edge class (default true).")
@click.option("--out", required=True, help="Model checkpoint JSON path.")
@click.option("--config", "config_path", default=None,
              help="JSON config file; flags override its values.")
def train_cmd(data_path, kinds, seed, epochs, strict_equivariance, out, config_path):
    """Train one model on a full dataset and save its checkpoint."""
    config = _load_config(config_path)
    kind = str(_resolve(kinds, config, "kinds", "rot-eq")).replace("-", "_")
    seed = int(_resolve(seed, config, "seed", 0))
    epochs = _resolve(epochs, config, "epochs", None)
    strict = bool(_resolve(strict_equivariance, config, "strict_equivariance", True))
    _echo_config("train", {"data": data_path, "kinds": kind, "seed": seed,
                           "epochs": epochs, "strict_equivariance": strict,
                           "out": out})
    dataset = load_dataset(data_path)
    model_config = canonical_config(kind, dataset.molecule,
                                    strict_equivariance=strict, seed=seed)
    model = init_model(model_config)
    train_cfg = default_train_config(kind, epochs)
    _, history = train(model, dataset, train_cfg=train_cfg)
    save_model(model, out)
    click.echo(f"trained {kind} for {train_cfg.epochs} epochs, "
               f"final loss {history[-1]:.6g}, checkpoint at {out}")


@cli.command("crossval")
@click.option("--data", "data_path", required=True, help="Dataset JSON path.")
@click.option("--kinds", default=None,
              help="Comma-separated kinds or 'all' (default all).")
@click.option("--k", type=int, default=None, help="Fold count (default 5).")
@click.option("--seed", type=int, default=None, help="Base seed (default 0).")
@click.option("--epochs", type=int, default=None,
              help="Epoch budget for every kind (default: desk presets).")
@click.option("--strict-equivariance", type=click.BOOL, default=None,
              help="Graph weight sharing mode (default true).")
@click.option("--jobs", type=int, default=None,
              help="Parallel fold workers (default 1).")
@click.option("--out", "out_dir", required=True, help="Report output directory.")
@click.option("--config", "config_path", default=None,
              help="JSON config file; flags override its values.")
def crossval_cmd(data_path, kinds, k, seed, epochs, strict_equivariance, jobs,
                 out_dir, config_path):
    """Run k-fold cross-validation and write fold/summary/radar reports."""
    config = _load_config(config_path)
    kinds = str(_resolve(kinds, config, "kinds", "all"))
    k = int(_resolve(k, config, "k", 5))
    seed = int(_resolve(seed, config, "seed", 0))
    epochs = _resolve(epochs, config, "epochs", None)
    strict = bool(_resolve(strict_equivariance, config, "strict_equivariance", True))
    jobs = int(_resolve(jobs, config, "jobs", 1))
    kind_list = cv.normalize_kinds(kinds.split(","))
    _echo_config("crossval", {"data": data_path, "kinds": list(kind_list), "k": k,
                              "seed": seed, "epochs": epochs,
                              "strict_equivariance": strict, "jobs": jobs,
                              "out": out_dir})
    dataset = load_dataset(data_path)
    results = cv.run_cv(dataset, kind_list, k=k, base_seed=seed, epochs=epochs,
                        strict_equivariance=strict, jobs=jobs)
    os.makedirs(out_dir, exist_ok=True)
    cv.write_fold_csv(results, os.path.join(out_dir, "folds.csv"))
    cv.write_summary_json(results, os.path.join(out_dir, "summary.json"))
    cv.write_radar_csv(results, os.path.join(out_dir, "radar.csv"))
    for kind in kind_list:
        summary = results[kind]["summary"]
        click.echo(f"{kind}: energy R2 mean {summary['energy_r2'].mean:.4f}, "
                   f"force R2 mean {summary['force_r2'].mean:.4f}")
    click.echo(f"reports written to {out_dir}")


# ---------------------------------------------------------------------------
# Equivariance suites

def _suite_encodings(rng: np.random.Generator) -> list:
    checks = []
    err = 0.0
    for _ in range(20):
        x = rng.normal(size=3)
        angles = EulerAngles(*rng.uniform(-np.pi, np.pi, size=3))
        rotated = so3_embed_matrix(euler_rotate(angles, x))
        v = conjugating_matrix(angles)
        err = max(err, float(np.abs(rotated - v @ so3_embed_matrix(x) @ v.conj().T).max()))
    checks.append(("so3 conjugation identity", err, 1e-10))

    err = 0.0
    singlet = singlet_init(1).amplitudes
    for _ in range(20):
        v = pauli_vec_rot_matrix(rng.normal(size=3))
        moved = np.kron(v, v) @ singlet
        err = max(err, abs(1.0 - abs(np.vdot(singlet, moved))))
    checks.append(("singlet invariance", err, 1e-10))

    err = 0.0
    for i in range(20):
        sample = datamod.gen_nh3(1, seed=900 + i).samples[0]
        spec = build_graph(compute_features(sample.positions, "NH3"))
        betas = rng.normal(size=3)
        gammas = rng.normal(size=3)
        state = graph_encoding_state(spec, betas, gammas)
        for h_perm in itertools.permutations((1, 2, 3)):
            perm = QubitPermutation((0,) + h_perm)
            lhs = permute_state(state, perm).amplitudes
            rhs = graph_encoding_state(permute_graph(spec, perm), betas, gammas).amplitudes
            err = max(err, float(np.abs(lhs - rhs).max()))
    checks.append(("graph permutation equivariance", err, 1e-10))
    return checks


def _suite_models(rng: np.random.Generator) -> list:
    from .encodings import rotation_matrix
    checks = []
    dataset = datamod.gen_lih(10, seed=901)
    positions = dataset.positions_array()
    model = init_model(canonical_config("rot_eq", "LiH", seed=2))
    base_e = predict_energy_batch(model, positions)
    base_f = fd_forces_batch(model, positions)
    e_err, f_err = 0.0, 0.0
    for _ in range(10):
        rot = rotation_matrix(EulerAngles(*rng.uniform(-np.pi, np.pi, size=3)))
        shift = rng.normal(size=3)
        moved = positions @ rot.T + shift
        e_err = max(e_err, float(np.abs(predict_energy_batch(model, moved) - base_e).max()))
        f_err = max(f_err, float(np.abs(fd_forces_batch(model, moved) - base_f @ rot.T).max()))
    checks.append(("rot_eq energy rigid-motion invariance", e_err, 1e-8))
    checks.append(("rot_eq force covariance", f_err, 1e-6))

    dataset = datamod.gen_nh3(10, seed=902)
    model = init_model(canonical_config("graph_perm", "NH3", seed=2))
    positions = dataset.positions_array()
    base_e = predict_energy_batch(model, positions)
    err = 0.0
    for h_perm in itertools.permutations((1, 2, 3)):
        permuted = positions[:, (0,) + h_perm]
        err = max(err, float(np.abs(predict_energy_batch(model, permuted) - base_e).max()))
    checks.append(("graph_perm strict hydrogen-permutation invariance", err, 1e-10))
    return checks


@cli.command("check-equivariance")
@click.option("--suite", type=click.Choice(["encodings", "models", "all"]),
              default="all", help="Which invariant suite to run.")
def check_equivariance(suite):
    """Run the symmetry property suites and print a pass/fail table."""
    _echo_config("check-equivariance", {"suite": suite})
    rng = np.random.default_rng(7)
    checks = []
    if suite in ("encodings", "all"):
        checks.extend(_suite_encodings(rng))
    if suite in ("models", "all"):
        checks.extend(_suite_models(rng))
    width = max(len(name) for name, _, _ in checks)
    failed = False
    for name, err, tol in checks:
        ok = err <= tol
        failed = failed or not ok
        status = "PASS" if ok else "FAIL"
        click.echo(f"{name:<{width}}  max err {err:.3e}  tol {tol:.0e}  {status}")
    if failed:
        raise click.ClickException("one or more equivariance checks failed")


@cli.command("report")
@click.option("--data", "report_dir", required=True,
              help="Cross-validation output directory (with summary.json).")
@click.option("--out", default=None,
              help="Optional path for a plain-text copy of the table.")
def report_cmd(report_dir, out):
    """Print a per-kind metric table from a crossval summary."""
    _echo_config("report", {"data": report_dir, "out": out})
    path = os.path.join(report_dir, "summary.json")
    if not os.path.exists(path):
        raise click.ClickException(f"no summary.json under {report_dir}")
    with open(path) as fh:
        summary = json.load(fh)
    lines = [f"{'kind':<12} {'metric':<12} {'mean':>12} {'std':>12} "
             f"{'cov':>12} {'range':>12}"]
    for kind in sorted(summary):
        for metric in sorted(summary[kind]):
            stats = summary[kind][metric]
            cov = stats["cov"]
            cov_text = cov if isinstance(cov, str) else f"{cov:.6f}"
            lines.append(f"{kind:<12} {metric:<12} {stats['mean']:>12.6f} "
                         f"{stats['std']:>12.6f} {cov_text:>12} "
                         f"{stats['range']:>12.6f}")
    text = "\n".join(lines)
    click.echo(text)
    if out is not None:
        _atomic_write(out, text + "\n")


def main(argv=None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.exceptions.Exit as exc:
        return int(exc.exit_code)
    except click.Abort:
        click.echo("aborted", err=True)
        return 1
    except click.ClickException as exc:
        exc.show()
        return 1
    except ValueError as exc:
        click.echo(f"error: {exc}", err=True)
        return 1
    except Exception as exc:  # runtime failures (training aborts, IO, ...)
        click.echo(f"failure: {exc}", err=True)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
