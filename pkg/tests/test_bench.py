import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from projsde.bench import RateLadder, fit_slope, run_ladder, theoretical_slope
from projsde.errors import DegenerateAbscissae, InsufficientRungs, PreconditionError
from projsde.model import constant_model


def test_exact_line():
    x = np.linspace(1, 6, 5)
    fit = fit_slope(np.column_stack([x, -0.8 * x + 1]))
    assert fit.slope == pytest.approx(-0.8, abs=1e-12)
    assert fit.intercept == pytest.approx(1.0, abs=1e-12)
    assert fit.r_squared == pytest.approx(1.0)


@given(st.floats(-3, 3), st.floats(-5, 5), st.floats(0.1, 10), st.integers(3, 8))
def test_noiseless_power_law_exact(slope, icpt, w, k):
    x = np.log(2.0 ** np.arange(4, 4 + k))
    y = slope * x + icpt
    fit = fit_slope(np.column_stack([x, y, np.full(k, w)]))
    assert abs(fit.slope - slope) <= 1e-12 * max(1, abs(slope)) * 10


def test_degenerate_and_short():
    with pytest.raises(DegenerateAbscissae):
        fit_slope([(1.0, 2.0), (1.0, 3.0), (1.0, 4.0)])
    with pytest.raises(PreconditionError):
        fit_slope([(1.0, 2.0), (2.0, 3.0)])


def test_noisy_line_within_three_se():
    g = np.random.default_rng(0)
    x = np.linspace(3, 9, 12)
    sd = 0.05
    y = -0.66 * x + 2 + g.normal(0, sd, x.size)
    fit = fit_slope(np.column_stack([x, y, np.full(x.size, 1 / sd ** 2)]))
    assert abs(fit.slope + 0.66) <= 3 * fit.se


def test_theoretical_slopes():
    assert theoretical_slope("compact_repeated", 2) == pytest.approx(-0.8)
    assert theoretical_slope("compact_repeated", 1) == pytest.approx(-2 / 3)
    assert theoretical_slope("real_line", 2) == pytest.approx(-0.6)


def test_ladder_preconditions():
    m = constant_model()
    with pytest.raises(InsufficientRungs):
        run_ladder(RateLadder("compact_repeated", [(8, 8)] * 3, 2.0, m))
    with pytest.raises(PreconditionError):
        run_ladder(RateLadder("compact_repeated", [(8, 8), (16, 16), (32, 32), (64, 64)], 2.0, m,
                              replicates=5))
    with pytest.raises(PreconditionError):
        RateLadder("compact_single_path", [(2, 8)] * 4, 2.0, m)
    with pytest.raises(PreconditionError):
        RateLadder("bogus", [(8, 8)] * 4, 2.0, m)


@pytest.fixture(scope="module")
def small_ladder():
    lad = RateLadder("compact_repeated", [(8, 8), (16, 16), (32, 32), (64, 64)], 2.0,
                     constant_model(), replicates=20, seed=3, m=4, substeps=2, eval_paths=50)
    return lad, run_ladder(lad)


def test_constant_truth_parametric_slope(small_ladder):
    _, res = small_ladder
    assert res.fit.slope == pytest.approx(-1.0, abs=0.25)
    assert [r.m for r in res.rungs] == [4, 4, 4, 4]


def test_ladder_outputs_deterministic(small_ladder):
    lad, res = small_ladder
    again = run_ladder(lad, threads=4)
    assert res.to_csv() == again.to_csv()
    assert res.slope_json() == again.slope_json()
    assert res.plot_data() == again.plot_data()
    assert res.to_csv().splitlines()[0] == "rung,N,n,m,A_N,risk,se,skipped"
