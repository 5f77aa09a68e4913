import numpy as np
import pytest

from projsde.errors import PreconditionError
from projsde.model import constant_model
from projsde.simulate import PathSample, simulate_sample, strong_error_probe

from conftest import se_of_mean


def test_brownian_increment_variance(unit_model):
    s = simulate_sample(unit_model, 200, 50, substeps=4, seed=1)
    sq = np.diff(s.values, axis=1) ** 2
    assert abs(sq.mean() - s.delta) <= 5 * se_of_mean(sq)


def test_constant_sigma_quadratic_variation():
    s = simulate_sample(constant_model(2.0), 1000, 100, substeps=1, seed=2)
    u = np.diff(s.values, axis=1) ** 2 / s.delta
    assert abs(u.mean() - 4.0) <= 3 * se_of_mean(u)


def test_sample_invariants(ex_model):
    s = simulate_sample(ex_model, 5, 20, substeps=4, seed=3)
    assert s.values.shape == (5, 21)
    assert np.all(s.values[:, 0] == 0.0)
    assert s.delta * s.n == 1.0


def test_determinism_and_threads(ex_model):
    a = simulate_sample(ex_model, 40, 16, substeps=8, seed=9)
    b = simulate_sample(ex_model, 40, 16, substeps=8, seed=9, threads=4)
    assert a.to_bytes() == b.to_bytes()


def test_path_permutation_only_permutes_rows(ex_model):
    ids = np.arange(6)
    perm = np.array([3, 0, 5, 1, 4, 2])
    a = simulate_sample(ex_model, 6, 10, 4, seed=4, path_ids=ids)
    b = simulate_sample(ex_model, 6, 10, 4, seed=4, path_ids=perm)
    assert np.array_equal(a.values[perm], b.values)


def test_second_moment_matches_time(unit_model):
    s = simulate_sample(unit_model, 2000, 10, substeps=1, seed=5)
    m2 = (s.values ** 2).mean(axis=0)
    se = (s.values ** 2).std(axis=0, ddof=1) / np.sqrt(s.N)
    t = s.times()
    assert np.all(np.abs(m2[1:] - t[1:]) <= 5 * se[1:])


def test_serialization_roundtrip(tmp_path, ex_model):
    s = simulate_sample(ex_model, 3, 5, 2, seed=11)
    for name in ("s.bin", "s.csv"):
        s.save(tmp_path / name)
        r = PathSample.load(tmp_path / name)
        assert np.array_equal(r.values, s.values)
        assert (r.N, r.n, r.seed, r.substeps) == (3, 5, 11, 2)
    raw = s.to_bytes()
    assert raw[:4] == b"PSMP"
    with pytest.raises(ValueError):
        PathSample.from_bytes(raw[:-8])


def test_preconditions(unit_model):
    with pytest.raises(PreconditionError):
        simulate_sample(unit_model, 0, 10)
    with pytest.raises(PreconditionError):
        simulate_sample(unit_model, 1, 1)
    with pytest.raises(PreconditionError):
        strong_error_probe(unit_model, 4, [1, 2], replicates=0)


def test_strong_error_constant_sigma_is_exact(unit_model):
    tab = strong_error_probe(unit_model, 4, [1, 2, 4], replicates=100, seed=1)
    assert np.all(tab.rms <= 1e-12)


def test_strong_order_half(smooth_model):
    tab = strong_error_probe(smooth_model, 4, [1, 2, 4, 8, 16], replicates=400, seed=2)
    assert 0.4 <= tab.slope <= 0.6
