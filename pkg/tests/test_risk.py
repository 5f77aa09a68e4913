import math

import numpy as np
import pytest

from projsde.estimator import truncate
from projsde.model import Compact, constant_model
from projsde.risk import (ExperimentSpec, empirical_norm_sq, estimation_risk, occupation_norm_x,
                          replicate_errors, report_csv_row, risk_of_function, target_function,
                          theoretical_norm_sq)
from projsde.simulate import simulate_sample

from conftest import se_of_mean


def test_empirical_norm(unit_model):
    s = simulate_sample(unit_model, 400, 20, 1, seed=1)
    assert empirical_norm_sq(lambda x: np.ones_like(x), s) == 1.0
    assert empirical_norm_sq(lambda x: np.zeros_like(x), s) == 0.0
    # k = 0 terms sit at 0 and count as 1; the rest are symmetric
    v = (s.values[:, 1:s.n] >= 0).astype(float)
    half = empirical_norm_sq(lambda x: (x > 0).astype(float), s)
    expected = 0.5 * (s.n - 1) / s.n
    assert abs(half - expected) <= 3 * se_of_mean(v.mean(axis=1))
    assert occupation_norm_x(lambda x: x, s) == empirical_norm_sq(lambda x: x, s)


def test_theoretical_norm(unit_model):
    v, se = theoretical_norm_sq(lambda x: np.full_like(x, 3.0), unit_model, 10, 200)
    assert v == pytest.approx(9.0) and se == pytest.approx(0.0, abs=1e-12)
    n = 16
    v, se = theoretical_norm_sq(lambda x: x, unit_model, n, 4000, seed=2, substeps=1)
    assert abs(v - (n - 1) / (2 * n)) <= 3 * se
    v, _ = theoretical_norm_sq(lambda x: (x > 20).astype(float), unit_model, n, 200)
    assert v == 0.0
    with pytest.raises(ValueError):
        theoretical_norm_sq(lambda x: x, unit_model, n, 10)


def test_norm_consistency(ex_model):
    f = lambda x: np.cos(x) + x
    s = simulate_sample(ex_model, 3000, 8, 2, seed=11)
    emp = empirical_norm_sq(f, s)
    per_path = np.mean(f(s.values[:, :8]) ** 2, axis=1)
    th, se = theoretical_norm_sq(f, ex_model, 8, 3000, seed=12, substeps=2)
    assert abs(emp - th) <= 4 * math.hypot(se, se_of_mean(per_path))


def test_injected_truth_has_zero_risk(ex_model):
    exp = ExperimentSpec(N=10, n=10, eval_paths=100)
    assert risk_of_function(target_function(ex_model, exp), ex_model, exp) == 0.0


def test_consistency_in_span():
    m = constant_model(1.2)
    exp = ExperimentSpec(N=200, n=100, m=4, substeps=1, eval_paths=100)
    rep = estimation_risk(m, exp, replicates=5, seed=1)
    assert rep.risk_n_sq < 0.01
    assert rep.risk_n <= math.sqrt(rep.risk_n_sq) + 3 * rep.se
    assert rep.skipped == 0 and rep.m == 4


def test_truncation_never_hurts():
    m = constant_model(1.0)
    exp = ExperimentSpec(N=4, n=20, m=10, substeps=1, eval_paths=50, constrained=False)
    raw, trunc = [], []
    exp_t = ExperimentSpec(N=4, n=20, m=10, substeps=1, eval_paths=50, constrained=False,
                           truncated=True)
    e_raw, _, _ = replicate_errors(m, exp, 10, seed=3)
    e_tr, _, _ = replicate_errors(m, exp_t, 10, seed=3)
    assert np.all(e_tr <= e_raw + 1e-15)


def test_risk_decreases_with_data(ex_model):
    medians = []
    for N in (8, 32, 128):
        exp = ExperimentSpec(N=N, n=N, substeps=4, eval_paths=100)
        medians.append(estimation_risk(ex_model, exp, replicates=20, seed=4).median())
    inversions = sum(b > a for a, b in zip(medians, medians[1:]))
    assert inversions <= 1


def test_replicates_are_thread_invariant(ex_model):
    exp = ExperimentSpec(N=16, n=16, substeps=4, eval_paths=50)
    a = estimation_risk(ex_model, exp, 6, seed=2, threads=1)
    b = estimation_risk(ex_model, exp, 6, seed=2, threads=4)
    assert np.array_equal(a.per_replicate, b.per_replicate)
    cols, vals = report_csv_row("x", exp, a, 2)
    assert cols[0] == "experiment" and len(cols) == len(vals)


def test_nonzero_start_is_consistent():
    from dataclasses import replace
    m = replace(constant_model(1.0), x0=0.5)
    exp = ExperimentSpec(N=100, n=50, m=4, substeps=1, eval_paths=50, interval=Compact(-0.5, 1.5))
    assert estimation_risk(m, exp, 3, seed=1).risk_n_sq < 0.02
