"""Rate-of-convergence ladders and weighted log-log slope fits."""

from dataclasses import dataclass, field
import io
import json
import math
from typing import List, Optional, Tuple

import numpy as np

from . import rng
from .errors import DegenerateAbscissae, InsufficientRungs, PreconditionError
from .model import Compact, Growing
from .risk import ExperimentSpec, estimation_risk

REGIMES = ("compact_single_path", "compact_repeated", "growing_interval", "real_line")


@dataclass
class SlopeFit:
    slope: float
    se: float
    r_squared: float
    intercept: float


def fit_slope(points):
    """Weighted least squares line through (x, y, weight) triples; weights are 1/var(y)."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] not in (2, 3):
        raise PreconditionError("points must be (x, y) or (x, y, weight) triples")
    x, y = pts[:, 0], pts[:, 1]
    w = pts[:, 2] if pts.shape[1] == 3 else np.ones_like(x)
    if np.unique(x).size < 2:
        raise DegenerateAbscissae("slope fit needs at least two distinct abscissae")
    if x.size < 3:
        raise PreconditionError("slope fit needs at least three points")
    if np.any(w <= 0) or not np.all(np.isfinite(w)):
        raise PreconditionError("weights must be positive and finite")
    xb = np.sum(w * x) / np.sum(w)
    yb = np.sum(w * y) / np.sum(w)
    sxx = np.sum(w * (x - xb) ** 2)
    slope = float(np.sum(w * (x - xb) * (y - yb)) / sxx)
    intercept = float(yb - slope * xb)
    resid = y - (intercept + slope * x)
    syy = np.sum(w * (y - yb) ** 2)
    r2 = 1.0 if syy == 0 else float(1.0 - np.sum(w * resid ** 2) / syy)
    return SlopeFit(slope=slope, se=float(1.0 / math.sqrt(sxx)), r_squared=r2, intercept=intercept)


def theoretical_slope(regime, beta):
    if regime == "real_line":
        return -3.0 * beta / (2.0 * (2.0 * beta + 1.0))
    return -2.0 * beta / (2.0 * beta + 1.0)


@dataclass
class RateLadder:
    regime: str
    sizes: List[Tuple[int, int]]
    beta: float
    truth: object
    replicates: int = 20
    seed: int = 0
    interval: Optional[object] = None
    kind: str = "spline"
    degree: int = 3
    c: float = 1.0
    m: Optional[int] = None
    constrained: bool = True
    substeps: int = 16
    eval_paths: int = 200
    truth_id: str = "custom"

    def __post_init__(self):
        if self.regime not in REGIMES:
            raise PreconditionError(f"unknown regime {self.regime!r}")
        if self.regime == "compact_single_path" and any(N != 1 for N, _ in self.sizes):
            raise PreconditionError("compact_single_path rungs need N = 1")

    def experiment(self, N, n):
        if self.interval is not None:
            interval = self.interval
        elif self.regime in ("growing_interval", "real_line"):
            interval = Growing(math.sqrt(3.0 * self.beta / (2.0 * self.beta + 1.0)))
        else:
            interval = Compact(-1.0, 1.0)
        real = self.regime == "real_line"
        return ExperimentSpec(
            N=N, n=n, interval=interval, kind=self.kind, degree=self.degree, m=self.m,
            beta=self.beta, c=self.c, constrained=self.constrained, truncated=real,
            target_kind="full" if real else "restricted", substeps=self.substeps,
            eval_paths=self.eval_paths, power=1 if real else 2,
        )


@dataclass
class Rung:
    rung: int
    N: int
    n: int
    m: int
    A_N: float
    risk: float
    se: float
    skipped: int


@dataclass
class LadderResult:
    regime: str
    beta: float
    rungs: List[Rung] = field(default_factory=list)
    fit: Optional[SlopeFit] = None
    theoretical: float = 0.0

    CSV_COLUMNS = ("rung", "N", "n", "m", "A_N", "risk", "se", "skipped")

    def to_csv(self):
        buf = io.StringIO()
        buf.write(",".join(self.CSV_COLUMNS) + "\n")
        for r in self.rungs:
            buf.write(",".join(repr(getattr(r, c)) for c in self.CSV_COLUMNS) + "\n")
        return buf.getvalue()

    def slope_json(self):
        return json.dumps({
            "regime": self.regime, "beta": self.beta, "slope": self.fit.slope,
            "slope_se": self.fit.se, "intercept": self.fit.intercept,
            "r_squared": self.fit.r_squared, "theoretical_slope": self.theoretical,
            "abscissa": "log N" if self.regime == "real_line" else "log(N n)",
        }, sort_keys=True, indent=2)

    def plot_data(self):
        buf = io.StringIO()
        buf.write("# log_size log_risk risk se\n")
        for x, r in zip(self.abscissae(), self.rungs):
            buf.write(f"{x!r} {math.log(r.risk)!r} {r.risk!r} {r.se!r}\n")
        return buf.getvalue()

    def abscissae(self):
        if self.regime == "real_line":
            return [math.log(r.N) for r in self.rungs]
        return [math.log(r.N * r.n) for r in self.rungs]

    def within(self, tolerance=0.15, target=None):
        t = self.theoretical if target is None else target
        return abs(self.fit.slope - t) <= tolerance


def run_ladder(ladder, threads=1):
    if len(ladder.sizes) < 4:
        raise InsufficientRungs("a rate ladder needs at least four rungs")
    if ladder.replicates < 20:
        raise PreconditionError("a rate ladder needs at least 20 replicates per rung")
    res = LadderResult(regime=ladder.regime, beta=ladder.beta,
                       theoretical=theoretical_slope(ladder.regime, ladder.beta))
    for i, (N, n) in enumerate(ladder.sizes):
        exp = ladder.experiment(N, n)
        rep = estimation_risk(ladder.truth, exp, ladder.replicates,
                              rng.derive_seed(ladder.seed, rng.REPLICATE, i), threads)
        risk, se = (rep.risk_n, rep.se) if exp.power == 1 else (rep.risk_n_sq, rep.se_sq)
        res.rungs.append(Rung(rung=i, N=N, n=n, m=rep.m, A_N=float(exp.bounds()[1]), risk=risk,
                              se=se, skipped=rep.skipped))
    xs = res.abscissae()
    weighted = all(r.se > 0 for r in res.rungs)
    pts = [(x, math.log(r.risk), (r.risk / r.se) ** 2 if weighted else 1.0)
           for x, r in zip(xs, res.rungs)]
    res.fit = fit_slope(pts)
    return res
