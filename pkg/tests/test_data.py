"""Surrogate dataset tests: analytic force consistency against an FD
oracle, determinism, and serialization round-trips."""
import json
import os

import numpy as np
import pytest

from eqmol.data import (
    DatasetError,
    LIH_R0,
    MoleculeSample,
    Dataset,
    gen_lih,
    gen_nh3,
    lih_energy,
    lih_forces,
    load_dataset,
    nh3_energy,
    nh3_equilibrium_positions,
    nh3_forces,
    save_dataset,
)


def fd_forces(energy_fn, positions, h=1e-5):
    out = np.zeros_like(positions)
    for a in range(positions.shape[0]):
        for c in range(3):
            plus = positions.copy()
            plus[a, c] += h
            minus = positions.copy()
            minus[a, c] -= h
            out[a, c] = -(energy_fn(plus) - energy_fn(minus)) / (2 * h)
    return out


class TestSurrogateSurfaces:
    def test_lih_minimum(self):
        pos = np.array([[0.0, 0.0, 0.0], [LIH_R0, 0.0, 0.0]])
        assert lih_energy(pos) == pytest.approx(0.0, abs=1e-12)
        assert np.abs(lih_forces(pos)).max() < 1e-10

    def test_lih_morse_value(self):
        # direct Morse evaluation oracle at r = 2.0
        pos = np.array([[0.0, 0.0, 0.0], [2.0, 0.0, 0.0]])
        expected = 2.5 * (1.0 - np.exp(-1.2 * (2.0 - 1.6))) ** 2
        assert lih_energy(pos) == pytest.approx(expected, abs=1e-12)

    def test_nh3_equilibrium(self):
        pos = nh3_equilibrium_positions()
        assert nh3_energy(pos) == pytest.approx(0.0, abs=1e-10)
        assert np.abs(nh3_forces(pos)).max() < 1e-8

    def test_forces_match_fd_oracle(self):
        lih = gen_lih(50, seed=100)
        for sample in lih.samples:
            oracle = fd_forces(lih_energy, sample.positions)
            assert np.abs(sample.forces - oracle).max() < 1e-6
        nh3 = gen_nh3(50, seed=100)
        for sample in nh3.samples:
            oracle = fd_forces(nh3_energy, sample.positions)
            assert np.abs(sample.forces - oracle).max() < 1e-6

    def test_stored_energy_matches_recomputation(self):
        for dataset, efn in ((gen_lih(30, seed=5), lih_energy),
                             (gen_nh3(30, seed=5), nh3_energy)):
            for sample in dataset.samples:
                assert efn(sample.positions) == pytest.approx(sample.energy, abs=1e-10)


class TestGeneration:
    def test_shapes(self):
        ds = gen_nh3(7, seed=1)
        assert ds.positions_array().shape == (7, 4, 3)
        assert ds.forces_array().shape == (7, 4, 3)
        assert ds.energies_array().shape == (7,)
        assert ds.provenance == "surrogate"

    def test_lih_bond_length_range(self):
        ds = gen_lih(200, seed=2)
        pos = ds.positions_array()
        r = np.linalg.norm(pos[:, 1] - pos[:, 0], axis=1)
        assert r.min() >= 1.2 and r.max() <= 2.4

    def test_determinism(self):
        a, b = gen_lih(20, seed=9), gen_lih(20, seed=9)
        assert np.array_equal(a.positions_array(), b.positions_array())
        assert np.array_equal(a.forces_array(), b.forces_array())
        assert np.array_equal(a.energies_array(), b.energies_array())
        c = gen_lih(20, seed=10)
        assert not np.array_equal(a.positions_array(), c.positions_array())

    def test_prefix_stability(self):
        # per-sample seeding: a longer run shares its prefix with a shorter one
        short, long = gen_nh3(5, seed=3), gen_nh3(9, seed=3)
        assert np.array_equal(short.positions_array(), long.positions_array()[:5])

    def test_force_noise(self):
        clean = gen_lih(10, seed=4)
        noisy = gen_lih(10, seed=4, noise_scale=0.1)
        assert np.array_equal(clean.positions_array(), noisy.positions_array())
        assert np.array_equal(clean.energies_array(), noisy.energies_array())
        assert not np.array_equal(clean.forces_array(), noisy.forces_array())

    def test_rejects_empty(self):
        with pytest.raises(Exception):
            gen_lih(0, seed=0)


class TestValidation:
    def test_rejects_nonfinite(self):
        bad = MoleculeSample(np.full((2, 3), np.nan), np.zeros((2, 3)), 0.0)
        with pytest.raises(DatasetError):
            Dataset("LiH", (bad,), "surrogate")

    def test_rejects_bad_atom_count(self):
        bad = MoleculeSample(np.zeros((3, 3)), np.zeros((3, 3)), 0.0)
        with pytest.raises(DatasetError):
            Dataset("LiH", (bad,), "surrogate")

    def test_dataset_rejects_mixed_sizes(self):
        s2 = MoleculeSample(np.zeros((2, 3)) + [[0, 0, 0], [1, 0, 0]],
                            np.zeros((2, 3)), 0.0)
        s4 = MoleculeSample(np.eye(4, 3), np.zeros((4, 3)), 0.0)
        with pytest.raises(DatasetError):
            Dataset("LiH", (s2, s4), "surrogate")

    def test_dataset_rejects_empty(self):
        with pytest.raises(DatasetError):
            Dataset("LiH", (), "surrogate")


class TestSerialization:
    def test_roundtrip_lossless(self, tmp_path):
        ds = gen_lih(10, seed=11)
        path = str(tmp_path / "lih.json")
        save_dataset(ds, path)
        loaded = load_dataset(path)
        assert loaded.molecule == ds.molecule
        assert np.array_equal(loaded.positions_array(), ds.positions_array())
        assert np.array_equal(loaded.forces_array(), ds.forces_array())
        assert np.array_equal(loaded.energies_array(), ds.energies_array())

    def test_no_leftover_tempfiles(self, tmp_path):
        save_dataset(gen_lih(3, seed=1), str(tmp_path / "a.json"))
        assert sorted(os.listdir(tmp_path)) == ["a.json"]

    def test_shape_mismatch_names_record(self, tmp_path):
        path = str(tmp_path / "bad.json")
        payload = {
            "molecule": "LiH", "provenance": "ingested",
            "samples": [
                {"positions": [[0, 0, 0], [1, 0, 0]],
                 "forces": [[0, 0, 0], [0, 0, 0]], "energy": 0.1},
                {"positions": [[0, 0], [1, 0], [0, 1], [1, 1]],
                 "forces": [[0, 0, 0], [0, 0, 0]], "energy": 0.2},
            ],
        }
        with open(path, "w") as fh:
            json.dump(payload, fh)
        with pytest.raises(DatasetError, match="1"):
            load_dataset(path)

    def test_nan_energy_names_record(self, tmp_path):
        path = str(tmp_path / "nan.json")
        payload = {
            "molecule": "LiH", "provenance": "ingested",
            "samples": [
                {"positions": [[0, 0, 0], [1, 0, 0]],
                 "forces": [[0, 0, 0], [0, 0, 0]], "energy": float("nan")},
            ],
        }
        with open(path, "w") as fh:
            json.dump(payload, fh)
        with pytest.raises(DatasetError, match="0"):
            load_dataset(path)

    def test_malformed_file(self, tmp_path):
        path = str(tmp_path / "junk.json")
        with open(path, "w") as fh:
            fh.write("[1, 2, 3]")
        with pytest.raises(DatasetError):
            load_dataset(path)


class TestSubset:
    def test_subset_selects(self):
        ds = gen_lih(10, seed=12)
        sub = ds.subset([3, 5, 7])
        assert len(sub) == 3
        assert np.array_equal(sub.positions_array(), ds.positions_array()[[3, 5, 7]])
