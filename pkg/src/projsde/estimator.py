"""Least-squares projection estimator of sigma^2 over a coefficient ball.

The contrast gamma(h) = mean over (j, k) of (U - h(X))^2 is minimised over
h = sum a_l phi_l with sum a_l^2 <= radius_sq.  Inside the ball the answer is
the normal-equation solution; otherwise it is the ridge solution whose norm
equals the radius, located by bisection on the ridge multiplier.
"""

from dataclasses import dataclass, replace
import math
from typing import Optional

import numpy as np

from .basis import BasisSpec, ConstraintBall, eval_basis
from .errors import PreconditionError, SingularDesign
from .model import Compact

SINGULAR_RTOL = 1e-14
BISECTION_ITERS = 200


@dataclass(frozen=True)
class Estimate:
    spec: BasisSpec
    coeffs: np.ndarray
    constraint: ConstraintBall
    active: bool
    lam: float = 0.0
    truncation_level: Optional[float] = None
    floor_zero: bool = False

    def __call__(self, x):
        return evaluate(self, x)

    def to_dict(self):
        return {
            "basis": self.spec.to_dict(),
            "coeffs": [float(c) for c in self.coeffs],
            "lambda": float(self.lam),
            "active": bool(self.active),
            "truncation_level": self.truncation_level,
            "constraint": self.constraint.to_dict(),
        }

    @classmethod
    def from_dict(cls, d):
        spec = BasisSpec.from_dict(d["basis"])
        c = d["constraint"]
        r = c.get("radius_sq")
        ball = ConstraintBall(spec.m, spec.A, spec.B, c["N"], c["n"], math.inf if r is None else r)
        return cls(spec=spec, coeffs=np.asarray(d["coeffs"], dtype=float), constraint=ball,
                   active=bool(d["active"]), lam=float(d["lambda"]),
                   truncation_level=d.get("truncation_level"))


def design_matrix(data, spec):
    return eval_basis(spec, data.x)


def contrast(data, coeffs, spec, design=None):
    """gamma(h) for h = sum coeffs_l phi_l."""
    P = design_matrix(data, spec) if design is None else design
    r = data.u - P @ np.asarray(coeffs, dtype=float)
    return float(np.mean(r * r))


def ridge_path(w, c, lam):
    """Coefficients (in the eigenbasis) of (G + lam I)^{-1} r given eig(G) = w, V^T r = c."""
    return c / (w + lam)


def fit(data, spec, constraint, design=None):
    """Minimise the contrast over the ball {sum a^2 <= constraint.radius_sq}."""
    if len(data) == 0:
        raise PreconditionError("regression data is empty")
    P = design_matrix(data, spec) if design is None else design
    used = np.any(P != 0.0, axis=0)
    coeffs = np.zeros(spec.m)
    if not used.any():
        raise SingularDesign("no observation falls on the support of the basis")
    Pu = P[:, used]
    size = float(P.shape[0])
    G = Pu.T @ Pu / size
    r = Pu.T @ data.u / size
    w, V = np.linalg.eigh(G)
    w = np.clip(w, 0.0, None)
    c = V.T @ r
    radius = constraint.radius_sq
    singular = w[0] < SINGULAR_RTOL * w[-1]

    if singular:
        keep = w >= SINGULAR_RTOL * w[-1]
        a0 = np.where(keep, c / np.where(keep, w, 1.0), 0.0)
    else:
        a0 = c / w
    if a0 @ a0 <= radius:
        if singular:
            raise SingularDesign(
                f"design Gram is singular (min/max eigenvalue {w[0] / w[-1]:.3g}) "
                "and the ball constraint is inactive; reduce m"
            )
        coeffs[used] = V @ a0
        return Estimate(spec, coeffs, constraint, active=False, lam=0.0)

    def norm2(lam):
        a = c / (w + lam)
        return float(a @ a)

    lo, hi = 0.0, 1.0
    while norm2(hi) > radius:
        lo, hi = hi, 2.0 * hi
    for _ in range(BISECTION_ITERS):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if norm2(mid) > radius:
            lo = mid
        else:
            hi = mid
    # hi is feasible and within machine precision of the boundary
    coeffs[used] = V @ (c / (w + hi))
    return Estimate(spec, coeffs, constraint, active=True, lam=hi)


def evaluate(est, x):
    """sum coeffs_l phi_l(x), clipped from above at the truncation level if set."""
    v = eval_basis(est.spec, x) @ est.coeffs
    if est.truncation_level is not None:
        v = np.minimum(v, est.truncation_level)
    if est.floor_zero:
        v = np.maximum(v, 0.0)
    return v


def truncate(est, N):
    """Clip the estimate from above at log N."""
    if N < 3:
        raise PreconditionError("truncation needs N >= 3 so that log N > 1")
    return replace(est, truncation_level=math.log(N))


def dimension_rule(N, n, beta, interval, c=1.0):
    """Dimension m (or K_N on a growing interval) prescribed for the regime.

    compact, N = 1: ceil(c n^{1/(2 beta + 1)})
    compact, N > 1: ceil(c (N n)^{1/(2 beta + 1)})
    growing:        ceil(c N^{2/(2 beta + 1)} / log(N)^{5/2})
    The result is at least 2.
    """
    if beta < 1:
        raise PreconditionError("dimension rule needs beta >= 1")
    if math.isinf(beta):
        return max(2, math.ceil(c))
    e = 1.0 / (2.0 * beta + 1.0)
    if isinstance(interval, Compact):
        base = n if N == 1 else N * n
        val = c * base ** e
    else:
        if N < 3:
            raise PreconditionError("growing-interval rule needs N >= 3")
        val = c * N ** (2.0 * e) / math.log(N) ** 2.5
    # guard against ceil of values like 4.000000000000001 from float powers
    return max(2, math.ceil(round(val, 9)))


def spec_for_dimension(kind, m, A, B, degree=3):
    """Basis of dimension closest to m: splines use K = max(1, m - degree), Fourier D = (m - 1) // 2."""
    if kind == "spline":
        return BasisSpec.spline(max(1, int(m) - degree), A, B, degree)
    return BasisSpec.fourier(max(0, (int(m) - 1) // 2), A, B)
