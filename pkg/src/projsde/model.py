"""Diffusion models dX = b(X) dt + sigma(X) dW and numerical assumption checks.

All coefficient callables are vectorised: they take and return numpy arrays.
Derivatives are supplied analytically; finite differences are only used to
check them.
"""

from dataclasses import dataclass, field, replace
import math
from typing import Callable, Optional

import numpy as np
from scipy import integrate

from .errors import ConfigError, NonPositiveSigma, PreconditionError

Fn = Callable[[np.ndarray], np.ndarray]


def _zero(x):
    return np.zeros_like(np.asarray(x, dtype=float))


def _const(c):
    def f(x):
        return np.full_like(np.asarray(x, dtype=float), c)
    return f


@dataclass(frozen=True)
class DiffusionModel:
    """Time-homogeneous scalar diffusion with analytic derivatives.

    ``kappa0 <= sigma <= kappa1`` is the ellipticity band.  ``x0`` is the
    starting point; :meth:`shifted` returns the equivalent model started at 0.
    """

    b: Fn
    b_prime: Fn
    sigma: Fn
    sigma_prime: Fn
    sigma_double_prime: Fn
    kappa0: float
    kappa1: float
    x0: float = 0.0
    name: str = "custom"
    params: dict = field(default_factory=dict, compare=False)

    def sigma2(self, x):
        s = self.sigma(x)
        return s * s

    @property
    def sup_bounded_by_one(self):
        return self.kappa1 <= 1.0

    def shifted(self):
        """Translate the start point to 0: b~(x) = b(x + x0), sigma~(x) = sigma(x + x0)."""
        if self.x0 == 0.0:
            return self
        x0 = self.x0

        def sh(f):
            return lambda x: f(np.asarray(x, dtype=float) + x0)

        return replace(
            self,
            b=sh(self.b),
            b_prime=sh(self.b_prime),
            sigma=sh(self.sigma),
            sigma_prime=sh(self.sigma_prime),
            sigma_double_prime=sh(self.sigma_double_prime),
            x0=0.0,
        )


@dataclass(frozen=True)
class Compact:
    A: float
    B: float

    def bounds(self, N=None):
        return self.A, self.B


@dataclass(frozen=True)
class Growing:
    """Symmetric interval [-A_N, A_N] with A_N = a * sqrt(log N)."""

    a: float

    def bounds(self, N):
        if N < 2:
            raise PreconditionError("growing interval needs N >= 2")
        AN = self.a * math.sqrt(math.log(N))
        return -AN, AN


@dataclass(frozen=True)
class RealLine:
    """Estimation on the real line, carried out on a growing window."""

    a: float

    def bounds(self, N):
        return Growing(self.a).bounds(N)


@dataclass(frozen=True)
class HolderClassSpec:
    beta: float
    R: float
    interval: object = None

    def __post_init__(self):
        if self.beta < 1:
            raise PreconditionError("beta must be >= 1")
        if self.R <= 0:
            raise PreconditionError("R must be positive")

    @property
    def d(self):
        # largest integer strictly smaller than beta
        return int(math.ceil(self.beta)) - 1


def constant_model(sigma=1.0, drift=0.0, name=None):
    s = float(sigma)
    if s <= 0:
        raise NonPositiveSigma(f"constant sigma must be positive, got {s}")
    return DiffusionModel(
        b=_const(float(drift)),
        b_prime=_zero,
        sigma=_const(s),
        sigma_prime=_zero,
        sigma_double_prime=_zero,
        kappa0=s,
        kappa1=s,
        name=name or ("constant_unit" if s == 1.0 and drift == 0.0 else "constant"),
        params={"sigma": s, "drift": float(drift)},
    )


def example_model():
    """b(x) = 1/(2 + cos x), sigma(x) = sqrt(4/5) + 1/(4 pi + x^2)."""
    c = math.sqrt(4.0 / 5.0)
    q = 4.0 * math.pi

    def b(x):
        return 1.0 / (2.0 + np.cos(x))

    def b_prime(x):
        return np.sin(x) / (2.0 + np.cos(x)) ** 2

    def sigma(x):
        x = np.asarray(x, dtype=float)
        return c + 1.0 / (q + x * x)

    def sigma_prime(x):
        x = np.asarray(x, dtype=float)
        return -2.0 * x / (q + x * x) ** 2

    def sigma_double_prime(x):
        x = np.asarray(x, dtype=float)
        d = q + x * x
        return -2.0 / d**2 + 8.0 * x * x / d**3

    return DiffusionModel(
        b=b,
        b_prime=b_prime,
        sigma=sigma,
        sigma_prime=sigma_prime,
        sigma_double_prime=sigma_double_prime,
        kappa0=c,
        kappa1=c + 1.0 / q,
        name="example_2_4",
    )


_EXPR_NAMESPACE = {
    name: getattr(np, name)
    for name in (
        "sin", "cos", "tan", "exp", "log", "sqrt", "tanh", "cosh", "sinh",
        "arctan", "abs", "pi", "e", "where", "minimum", "maximum",
    )
}


def _compile_expr(key, src):
    try:
        code = compile(str(src), f"<{key}>", "eval")
    except SyntaxError as exc:
        raise ConfigError(f"model.{key}: cannot parse expression {src!r}: {exc.msg}") from None
    for name in code.co_names:
        if name != "x" and name not in _EXPR_NAMESPACE:
            raise ConfigError(f"model.{key}: unknown name {name!r} in expression {src!r}")

    def f(x):
        x = np.asarray(x, dtype=float)
        out = eval(code, {"__builtins__": {}}, dict(_EXPR_NAMESPACE, x=x))
        return np.broadcast_to(np.asarray(out, dtype=float), x.shape).copy()

    return f


def custom_model(b, sigma, sigma_prime, sigma_double_prime, b_prime="0*x",
                 kappa0=None, kappa1=None, x0=0.0, grid=None):
    """Model from numpy expressions in ``x``; derivatives must be given explicitly."""
    fns = {
        key: _compile_expr(key, src)
        for key, src in [
            ("b", b), ("b_prime", b_prime), ("sigma", sigma),
            ("sigma_prime", sigma_prime), ("sigma_double_prime", sigma_double_prime),
        ]
    }
    if kappa0 is None or kappa1 is None:
        g = default_probe_grid() if grid is None else np.asarray(grid, dtype=float)
        s = fns["sigma"](g + x0)
        kappa0 = float(np.min(s)) if kappa0 is None else kappa0
        kappa1 = float(np.max(s)) if kappa1 is None else kappa1
    return DiffusionModel(
        kappa0=float(kappa0), kappa1=float(kappa1), x0=float(x0), name="custom",
        params={"b": b, "sigma": sigma}, **fns,
    )


def default_probe_grid():
    return np.linspace(-10.0, 10.0, 2001)


def _check_grid(grid):
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < 100 or grid.min() > -10.0 or grid.max() < 10.0:
        raise PreconditionError("probe grid needs >= 100 points spanning at least [-10, 10]")
    return np.sort(grid)


@dataclass
class AssumptionReport:
    lipschitz_L0: float
    ellipticity_margin: float
    upper_margin: float
    derivative_sup: float
    growth_exponent: float
    drift_sup: float
    drift_prime_sup: float
    integral_condition_holds: bool
    integral_condition_worst: float
    passes_lipschitz: bool
    passes_ellipticity: bool
    passes_growth: bool
    passes_restrict: bool

    def as_dict(self):
        return dict(self.__dict__)


def check_assumptions(model, grid=None):
    """Grid evidence that the model meets its standing regularity conditions."""
    grid = _check_grid(default_probe_grid() if grid is None else grid)
    s = model.sigma(grid)
    if np.any(~np.isfinite(s)) or np.any(s <= 0):
        bad = grid[np.argmax(~(s > 0))]
        raise NonPositiveSigma(f"sigma(x) <= 0 at x = {bad:g}")
    b = model.b(grid)
    dx = np.diff(grid)
    slopes = (np.abs(np.diff(b)) + np.abs(np.diff(s))) / dx
    L0 = float(np.max(slopes))

    dsum = np.abs(model.sigma_prime(grid)) + np.abs(model.sigma_double_prime(grid))
    # growth exponent of the running envelope of |sigma'| + |sigma''| over |x| >= 1
    order = np.argsort(np.abs(grid))
    env = np.maximum.accumulate(dsum[order])
    ax = np.abs(grid[order])
    mask = (ax >= 1.0) & (env > 0)
    if mask.sum() >= 2 and np.ptp(np.log1p(ax[mask])) > 0:
        gexp = float(np.polyfit(np.log1p(ax[mask]), np.log(env[mask]), 1)[0])
    else:
        gexp = 0.0

    bp = model.b_prime(grid)
    worst = math.inf
    holds = True
    for A in grid[grid != 0.0]:
        val, _ = integrate.quad(lambda u: 1.0 / float(model.sigma(np.array(u))), 0.0, float(A))
        # exp(-S(A)^2/2) <= exp(-A^2/2)  <=>  S(A)^2 >= A^2
        gap = val * val - A * A
        worst = min(worst, gap)
        if gap < -1e-9 * max(1.0, A * A):
            holds = False

    return AssumptionReport(
        lipschitz_L0=L0,
        ellipticity_margin=float(np.min(s) - model.kappa0),
        upper_margin=float(model.kappa1 - np.max(s)),
        derivative_sup=float(np.max(dsum)),
        growth_exponent=gexp,
        drift_sup=float(np.max(np.abs(b))),
        drift_prime_sup=float(np.max(np.abs(bp))),
        integral_condition_holds=holds,
        integral_condition_worst=float(worst),
        passes_lipschitz=bool(np.isfinite(L0)),
        passes_ellipticity=bool(np.min(s) >= model.kappa0 - 1e-12 and np.max(s) <= model.kappa1 + 1e-12),
        passes_growth=bool(np.all(np.isfinite(dsum)) and np.isfinite(gexp)),
        passes_restrict=bool(holds and np.all(np.isfinite(bp)) and np.all(np.isfinite(b))),
    )


def derivative_check(model, grid=None, step=1e-5):
    """Largest mismatch between analytic derivatives and centred differences."""
    grid = default_probe_grid() if grid is None else np.asarray(grid, dtype=float)
    fd1 = (model.sigma(grid + step) - model.sigma(grid - step)) / (2 * step)
    fd2 = (model.sigma_prime(grid + step) - model.sigma_prime(grid - step)) / (2 * step)
    fdb = (model.b(grid + step) - model.b(grid - step)) / (2 * step)
    return {
        "sigma_prime": float(np.max(np.abs(fd1 - model.sigma_prime(grid)))),
        "sigma_double_prime": float(np.max(np.abs(fd2 - model.sigma_double_prime(grid)))),
        "b_prime": float(np.max(np.abs(fdb - model.b_prime(grid)))),
    }


def model_from_config(cfg, hypotheses=None):
    """Build a model from a config mapping with a ``name`` key.

    Names: ``constant_unit``, ``constant``, ``example_2_4``, ``hypothesis:<j>``
    (needs ``hypotheses``), ``custom``.
    """
    if not isinstance(cfg, dict) or "name" not in cfg:
        raise ConfigError("model: missing required key 'name'")
    name = str(cfg["name"])
    x0 = float(cfg.get("x0", 0.0))
    if name == "constant_unit":
        m = constant_model(1.0)
    elif name == "constant":
        m = constant_model(float(cfg.get("sigma", 1.0)), float(cfg.get("drift", 0.0)))
    elif name == "example_2_4":
        m = example_model()
    elif name.startswith("hypothesis:"):
        if hypotheses is None:
            raise ConfigError("model: 'hypothesis:<j>' needs a [lowerbound] section")
        try:
            j = int(name.split(":", 1)[1])
        except ValueError:
            raise ConfigError(f"model: bad hypothesis index in {name!r}") from None
        m = hypotheses.model(j)
    elif name == "custom":
        missing = [k for k in ("b", "sigma", "sigma_prime", "sigma_double_prime") if k not in cfg]
        if missing:
            raise ConfigError(f"model: custom model missing key(s) {', '.join(missing)}")
        m = custom_model(
            cfg["b"], cfg["sigma"], cfg["sigma_prime"], cfg["sigma_double_prime"],
            b_prime=cfg.get("b_prime", "0*x"), kappa0=cfg.get("kappa0"),
            kappa1=cfg.get("kappa1"), x0=x0,
        )
        return m.shifted()
    else:
        raise ConfigError(f"model: unknown model name {name!r}")
    if x0 != 0.0:
        m = replace(m, x0=x0).shifted()
    return m
