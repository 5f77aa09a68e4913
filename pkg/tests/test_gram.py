import math

import numpy as np
import pytest

from projsde.basis import BasisSpec
from projsde.gram import (ConditionTable, ConditionRow, estimate_gram, gram_condition_sweep,
                          conditioning_bound, norm_equivalence_monitor, sample_gram)
from projsde.model import constant_model
from projsde.simulate import simulate_sample

from oracles import brownian_gram


def test_constant_function_gram(ex_model):
    rep = estimate_gram(ex_model, BasisSpec.fourier(0, -1.0, 1.0), 8, mc_paths=1000)
    assert rep.psi.shape == (1, 1) and rep.psi[0, 0] == 1.0
    assert rep.op_norm_inverse == 1.0 / rep.min_eig


def test_brownian_gram_matches_quadrature(unit_model):
    spec = BasisSpec.spline(3, -1.0, 1.0, 2)
    rep = estimate_gram(unit_model, spec, 8, mc_paths=4000, seed=3, substeps=1)
    ref = brownian_gram(spec, 8)
    assert np.all(np.abs(rep.psi - ref) <= 3.5 * rep.se + 1e-12)
    assert np.max(np.abs(rep.psi - rep.psi.T)) <= 1e-12


def test_unreachable_interval_is_rank_deficient(unit_model):
    rep = estimate_gram(unit_model, BasisSpec.spline(2, 10.0, 11.0, 3), 8, mc_paths=1000)
    assert rep.rank_deficient


def test_disjoint_seeds_agree(ex_model):
    spec = BasisSpec.spline(2, -1.0, 1.0, 3)
    a = estimate_gram(ex_model, spec, 8, 2000, seed=1, substeps=2)
    b = estimate_gram(ex_model, spec, 8, 2000, seed=2, substeps=2)
    assert np.all(np.abs(a.psi - b.psi) <= 4 * np.hypot(a.se, b.se) + 1e-12)
    g = np.random.default_rng(0)
    v = g.standard_normal((1000, spec.m))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    assert np.all(np.einsum("ij,jk,ik->i", v, a.psi, v) > 0)


def test_conditioning_bound_closed_form_for_unit_sigma(unit_model):
    N, m, A = 100, 5, 2.0
    expected = m * math.log(N) / A * math.exp(A * A / (2 * (1 - 1 / math.log(N))) + A)
    assert conditioning_bound(unit_model, m, N, A) == pytest.approx(expected, rel=1e-10)


def test_sweep_and_negative_control(ex_model):
    ok = gram_condition_sweep(ex_model, [64, 128, 256], 8.0, math.sqrt(24 / 17), mc_paths=2000,
                              seed=1, substeps=2)
    assert ok.ratios.max() <= 3 * ok.ratios.min()
    assert ok.to_csv().splitlines()[0].startswith("N,n,K,m")
    wide = gram_condition_sweep(ex_model, [64, 128, 256], 8.0, 3.0, mc_paths=2000, seed=1,
                                substeps=2)
    # the conditioning bound over N / log^2 N diverges once exp(A_N^2 / 2) outgrows N
    rhs = lambda t: np.array([r.bound_rhs / r.scale for r in t.rows])
    growth = lambda t: rhs(t)[-1] / rhs(t)[0]
    assert np.all(np.diff(rhs(wide)) > 0)
    assert growth(wide) > 100 * growth(ok)
    assert wide.ratios.min() > 100 * ok.ratios.max()


def test_bounded_rule():
    def table(r):
        return ConditionTable([ConditionRow(1, 1, 1, 1, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, v) for v in r])
    assert table([3, 2, 2.5, 1]).bounded()
    assert not table([1, 2, 3, 4]).bounded()
    assert not table([1, 0.5, 3]).bounded()


def test_norm_equivalence(ex_model):
    spec = BasisSpec.spline(2, -1.0, 1.0, 3)
    samples = [simulate_sample(ex_model, 2000, 10, 2, seed=s) for s in range(5)]
    rep = norm_equivalence_monitor(samples, spec, ex_model, mc_paths=20000, seed=99, substeps=2)
    assert rep.violation_fraction == 0.0
    assert rep.to_csv().startswith("sample,deviation,violated")
    big = BasisSpec.spline(40, -1.0, 1.0, 3)
    single = [simulate_sample(ex_model, 1, 10, 2, seed=s) for s in range(5)]
    neg = norm_equivalence_monitor(single, big, ex_model, mc_paths=2000, seed=99, substeps=2)
    assert neg.violation_fraction >= 0.8


def test_constant_basis_deviation_shrinks(unit_model):
    spec = BasisSpec.fourier(0, -1.0, 1.0)
    s = simulate_sample(unit_model, 50, 10, 1, seed=1)
    assert sample_gram(s, spec)[0, 0] == 1.0
