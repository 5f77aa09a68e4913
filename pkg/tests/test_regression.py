import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from projsde.errors import MissingFineGrid
from projsde.model import constant_model
from projsde.regression import (build_regression, decompose_residuals, reconstruction_error,
                                regression_from_values)
from projsde.simulate import PathSample, simulate_sample

from conftest import se_of_mean


def test_hand_computed_pairs():
    s = PathSample(values=np.array([[0.0, 1.0, 1.0]]), n=2, N=1, delta=0.5, seed=0, substeps=1)
    d = build_regression(s)
    assert np.array_equal(d.u, [2.0, 0.0])
    assert np.array_equal(d.x, [0.0, 1.0])
    assert d.to_csv().splitlines()[0] == "j,k,x,u"


@given(arrays(float, (3, 6), elements=st.floats(-5, 5)), st.floats(-3, 3))
def test_shift_invariance_and_nonnegativity(values, c):
    a = regression_from_values(values, 0.2)
    b = regression_from_values(values + c, 0.2)
    assert np.all(a.u >= 0)
    assert np.allclose(a.u, b.u, atol=1e-9)


def test_constant_sigma_mean_u():
    s = simulate_sample(constant_model(2.0), 500, 50, substeps=1, seed=1)
    d = build_regression(s)
    assert abs(d.u.mean() - 4.0) <= 3 * se_of_mean(d.u)


def test_missing_fine_grid(ex_model):
    s = simulate_sample(ex_model, 2, 8, 4, seed=1)
    with pytest.raises(MissingFineGrid):
        decompose_residuals(s, ex_model)


def test_zero_drift_terms_vanish(smooth_model):
    s = simulate_sample(smooth_model, 4, 8, 16, seed=1, keep_fine=True)
    dec = decompose_residuals(s, smooth_model)
    assert np.all(dec.r1 == 0) and np.all(dec.r2 == 0) and np.all(dec.zeta3 == 0)


def test_constant_sigma_zeta2_vanishes():
    m = constant_model(1.5, drift=0.3)
    s = simulate_sample(m, 4, 8, 16, seed=1, keep_fine=True)
    assert np.all(decompose_residuals(s, m).zeta2 == 0)


def test_reconstruction(ex_model):
    s = simulate_sample(ex_model, 50, 20, 64, seed=2, keep_fine=True)
    assert reconstruction_error(s, ex_model) <= 1e-3


def test_zeta_centred(ex_model):
    s = simulate_sample(ex_model, 200, 50, 64, seed=3, keep_fine=True)
    dec = decompose_residuals(s, ex_model)
    for z in (dec.zeta1, dec.zeta2, dec.zeta3):
        assert abs(z.mean()) <= 3 * se_of_mean(z)
    # per-k means of zeta are centred as well
    Z = dec.zeta.reshape(200, 50)
    zk = np.abs(Z.mean(axis=0)) / (Z.std(axis=0, ddof=1) / np.sqrt(200))
    assert np.mean(zk <= 3) >= 0.9
