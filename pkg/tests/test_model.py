import math

import numpy as np
import pytest

from projsde.errors import ConfigError, NonPositiveSigma, PreconditionError
from projsde.model import (Compact, Growing, HolderClassSpec, check_assumptions, constant_model,
                           custom_model, derivative_check, example_model, model_from_config)


def test_constant_model_passes_all_checks(unit_model):
    rep = check_assumptions(unit_model)
    assert rep.lipschitz_L0 == 0.0
    assert rep.passes_lipschitz and rep.passes_ellipticity and rep.passes_growth
    assert rep.passes_restrict


def test_example_model_values(ex_model):
    assert ex_model.sigma(np.array(0.0)) == pytest.approx(math.sqrt(0.8) + 1 / (4 * math.pi))
    assert float(ex_model.sigma(np.array(0.0))) == pytest.approx(0.9740, abs=1e-4)
    assert float(ex_model.b(np.array(math.pi))) == pytest.approx(1.0, abs=1e-15)
    assert float(ex_model.sigma_prime(np.array(0.0))) == 0.0
    assert ex_model.kappa0 == pytest.approx(math.sqrt(0.8))
    assert ex_model.kappa1 == pytest.approx(math.sqrt(0.8) + 1 / (4 * math.pi))


def test_example_model_assumptions(ex_model):
    rep = check_assumptions(ex_model)
    assert math.isfinite(rep.lipschitz_L0)
    assert rep.ellipticity_margin >= 0.0
    assert rep.passes_ellipticity and rep.passes_growth
    # sup sigma <= 1, so the integral condition must hold at every probed A
    assert ex_model.sup_bounded_by_one
    assert rep.integral_condition_holds


def test_sigma_equal_x_is_rejected():
    m = custom_model("0*x", "x", "1+0*x", "0*x", kappa0=0.1, kappa1=10.0)
    with pytest.raises(NonPositiveSigma):
        check_assumptions(m)


@pytest.mark.parametrize("name", ["example", "smooth", "unit"])
def test_derivatives_match_finite_differences(name, ex_model, smooth_model, unit_model):
    model = {"example": ex_model, "smooth": smooth_model, "unit": unit_model}[name]
    errs = derivative_check(model)
    assert max(errs.values()) <= 1e-6


def test_short_grid_rejected(unit_model):
    with pytest.raises(PreconditionError):
        check_assumptions(unit_model, np.linspace(-1, 1, 50))


def test_shift_moves_start_to_zero(ex_model):
    from dataclasses import replace
    m = replace(ex_model, x0=0.7)
    s = m.shifted()
    assert s.x0 == 0.0
    assert float(s.sigma(np.array(0.0))) == pytest.approx(float(ex_model.sigma(np.array(0.7))))


def test_holder_spec_integer_part():
    assert HolderClassSpec(2.0, 1.0).d == 1
    assert HolderClassSpec(2.5, 1.0).d == 2
    with pytest.raises(PreconditionError):
        HolderClassSpec(0.5, 1.0)


def test_intervals():
    assert Compact(-1, 2).bounds(10) == (-1, 2)
    lo, hi = Growing(2.0).bounds(math.e ** 4)
    assert hi == pytest.approx(4.0) and lo == -hi


def test_model_from_config_registry():
    assert model_from_config({"name": "constant_unit"}).name == "constant_unit"
    assert model_from_config({"name": "example_2_4"}).name == "example_2_4"
    m = model_from_config({"name": "custom", "b": "0*x", "sigma": "2+0*x",
                           "sigma_prime": "0*x", "sigma_double_prime": "0*x"})
    assert float(m.sigma(np.array(3.0))) == 2.0
    with pytest.raises(ConfigError, match="name"):
        model_from_config({})
    with pytest.raises(ConfigError, match="unknown name"):
        model_from_config({"name": "custom", "b": "os.system(1)", "sigma": "1+0*x",
                           "sigma_prime": "0*x", "sigma_double_prime": "0*x"})
    with pytest.raises(ConfigError):
        model_from_config({"name": "hypothesis:1"})


def test_constant_model_rejects_nonpositive():
    with pytest.raises(NonPositiveSigma):
        constant_model(0.0)
