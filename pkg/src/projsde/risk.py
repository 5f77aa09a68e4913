"""Empirical and theoretical norms and Monte Carlo estimation risk.

||h||^2_{n,N} = (1/Nn) sum_j sum_{k<n} h(X^j_{k/n})^2 on a sample, and
||h||^2_n = E[(1/n) sum_{k<n} h(X_{k/n})^2] estimated on fresh evaluation paths.
"""

from dataclasses import dataclass, field
import math
from typing import Optional

import numpy as np

from . import rng
from .basis import BasisSpec, ConstraintBall
from .errors import SingularDesign
from .estimator import dimension_rule, fit, spec_for_dimension, truncate
from .model import Compact
from .regression import build_regression
from .simulate import iter_path_batches, simulate_sample


def empirical_norm_sq(fn, sample, x0=0.0):
    X = sample.values[:, :sample.n] + x0
    v = fn(X)
    return float(np.mean(v * v))


def theoretical_norm_sq(fn, model, n, mc_paths=2000, seed=0, substeps=8):
    """(value, se) of ||fn||^2_n by Monte Carlo; the k = 0 term fn(x0)^2/n is included."""
    if mc_paths < 100:
        raise ValueError("theoretical_norm_sq needs mc_paths >= 100")
    per_path = []
    for vals in iter_path_batches(model, mc_paths, n, substeps, seed, purpose=rng.EVAL):
        v = fn(vals[:, :n] + model.x0)
        per_path.append(np.mean(v * v, axis=1))
    per_path = np.concatenate(per_path)
    return float(per_path.mean()), float(per_path.std(ddof=1) / math.sqrt(per_path.size))


def occupation_norm_x(fn, sample, x0=0.0):
    """Riemann approximation of int_0^1 h^2(X_t) dt averaged over paths."""
    return empirical_norm_sq(fn, sample, x0)


@dataclass
class ExperimentSpec:
    """One rung of an estimation experiment."""

    N: int
    n: int
    interval: object = field(default_factory=lambda: Compact(-1.0, 1.0))
    kind: str = "spline"
    degree: int = 3
    m: Optional[int] = None
    beta: float = 2.0
    c: float = 1.0
    constrained: bool = True
    truncated: bool = False
    target_kind: str = "restricted"
    substeps: int = 16
    eval_paths: int = 200
    power: int = 2

    def bounds(self):
        return self.interval.bounds(self.N)

    def basis(self):
        A, B = self.bounds()
        if self.m is not None:
            return spec_for_dimension(self.kind, self.m, A, B, self.degree)
        dim = dimension_rule(self.N, self.n, self.beta, self.interval, self.c)
        if isinstance(self.interval, Compact):
            return spec_for_dimension(self.kind, dim, A, B, self.degree)
        # growing and real-line regimes prescribe K_N directly
        if self.kind == "spline":
            return BasisSpec.spline(dim, A, B, self.degree)
        return BasisSpec.fourier(max(0, (dim - 1) // 2), A, B)

    def constraint(self, spec):
        return ConstraintBall.for_spec(spec, self.N, self.n, None if self.constrained else math.inf)


def target_function(model, exp):
    """sigma^2 restricted to the estimation interval, or on the whole line for target_kind 'full'."""
    A, B = exp.bounds()
    if exp.target_kind == "full":
        return lambda x: model.sigma2(x)
    return lambda x: np.where((x >= A) & (x <= B), model.sigma2(x), 0.0)


@dataclass
class RiskReport:
    risk_n_sq: float
    risk_n: float
    se_sq: float
    se: float
    replicates: int
    skipped: int
    target_kind: str
    per_replicate: np.ndarray
    m: int

    @property
    def primary(self):
        return self.risk_n_sq

    def median(self):
        return float(np.median(self.per_replicate))


def evaluation_values(model, n, paths, seed, substeps):
    """Shared evaluation paths (in original coordinates) for all replicates of a rung."""
    vals = [v[:, :n] + model.x0 for v in iter_path_batches(model, paths, n, substeps, seed,
                                                            purpose=rng.EVAL)]
    return np.concatenate(vals)


def replicate_errors(model, exp, replicates, seed, threads=1, estimates_hook=None):
    """Squared ||.||_n errors per replicate and the number of skipped (singular) replicates."""
    spec = exp.basis()
    ball = exp.constraint(spec)
    target = target_function(model, exp)
    X_eval = evaluation_values(model, exp.n, exp.eval_paths, rng.derive_seed(seed, rng.EVAL),
                               exp.substeps)
    t_eval = target(X_eval)

    def one(r):
        s = simulate_sample(model, exp.N, exp.n, exp.substeps, rng.derive_seed(seed, rng.REPLICATE, r))
        try:
            est = fit(build_regression(s, model.x0), spec, ball)
        except SingularDesign:
            return None
        if exp.truncated:
            est = truncate(est, exp.N)
        if estimates_hook is not None:
            estimates_hook(r, est)
        diff = est(X_eval.ravel()).reshape(X_eval.shape) - t_eval
        return float(np.mean(diff * diff))

    out = rng.ordered_map(one, range(replicates), threads)
    errs = np.array([e for e in out if e is not None])
    return errs, sum(e is None for e in out), spec


def estimation_risk(model, exp, replicates=20, seed=0, threads=1):
    errs, skipped, spec = replicate_errors(model, exp, replicates, seed, threads)
    if errs.size == 0:
        raise SingularDesign("every replicate hit a singular design")
    roots = np.sqrt(errs)
    k = errs.size
    se_sq = float(errs.std(ddof=1) / math.sqrt(k)) if k > 1 else 0.0
    se = float(roots.std(ddof=1) / math.sqrt(k)) if k > 1 else 0.0
    return RiskReport(risk_n_sq=float(errs.mean()), risk_n=float(roots.mean()), se_sq=se_sq, se=se,
                      replicates=k, skipped=int(skipped), target_kind=exp.target_kind,
                      per_replicate=errs, m=spec.m)


def risk_of_function(h, model, exp, seed=0):
    """||h - target||^2_n on the evaluation paths of ``exp`` (used to inject known estimates)."""
    target = target_function(model, exp)
    X = evaluation_values(model, exp.n, exp.eval_paths, rng.derive_seed(seed, rng.EVAL), exp.substeps)
    d = h(X) - target(X)
    return float(np.mean(d * d))


def report_csv_row(exp_id, exp, report, seed):
    cols = ("experiment", "N", "n", "m", "seed", "risk_n_sq", "se_sq", "risk_n", "se",
            "replicates", "skipped")
    vals = (exp_id, exp.N, exp.n, report.m, seed, report.risk_n_sq, report.se_sq, report.risk_n,
            report.se, report.replicates, report.skipped)
    return cols, vals
