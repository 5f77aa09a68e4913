"""Approximation bases on [A, B]: clamped B-splines and dilated Fourier functions.

Spline basis: K uniform knot intervals, degree M, dimension m = K + M, values
vanish outside [A, B].  Fourier basis: (1, f_1..f_D, g_1..g_D) with
f_l(x) = sqrt(2)/(B - A) cos(2 pi l (x - A)/(B - A)) (and sin for g_l),
dimension m = 2D + 1, evaluated on the whole line.  ``normalized=True`` swaps
in the L2([A, B])-orthonormal scaling 1/sqrt(B - A).
"""

from dataclasses import dataclass, asdict
import math

import numpy as np

from .errors import DegenerateKnots, PreconditionError


@dataclass(frozen=True)
class BasisSpec:
    kind: str
    A: float
    B: float
    K: int = 0
    degree: int = 3
    D: int = 0
    normalized: bool = False

    def __post_init__(self):
        if self.kind not in ("spline", "fourier"):
            raise PreconditionError(f"unknown basis kind {self.kind!r}")
        if not self.A < self.B:
            raise PreconditionError("basis interval needs A < B")
        if self.kind == "spline":
            if self.K < 1:
                raise DegenerateKnots(f"spline basis needs K >= 1, got K={self.K}")
            if self.degree < 0:
                raise PreconditionError("spline degree must be >= 0")
        elif self.D < 0:
            raise PreconditionError("Fourier basis needs D >= 0")

    @classmethod
    def spline(cls, K, A, B, degree=3):
        return cls("spline", float(A), float(B), K=int(K), degree=int(degree))

    @classmethod
    def fourier(cls, D, A, B, normalized=False):
        return cls("fourier", float(A), float(B), D=int(D), normalized=bool(normalized))

    @property
    def m(self):
        return self.K + self.degree if self.kind == "spline" else 2 * self.D + 1

    def knots(self):
        """Full clamped knot vector u_{-M}..u_{K+M}."""
        interior = self.A + np.arange(self.K + 1) * (self.B - self.A) / self.K
        interior[-1] = self.B
        return np.concatenate([np.full(self.degree, self.A), interior, np.full(self.degree, self.B)])

    def to_dict(self):
        d = {"kind": self.kind, "A": self.A, "B": self.B}
        if self.kind == "spline":
            d.update(K=self.K, degree=self.degree)
        else:
            d.update(D=self.D, normalized=self.normalized)
        return d

    @classmethod
    def from_dict(cls, d):
        kind = d["kind"]
        if kind == "spline":
            return cls.spline(d["K"], d["A"], d["B"], d.get("degree", 3))
        return cls.fourier(d["D"], d["A"], d["B"], d.get("normalized", False))


def _spans(spec, x):
    """Knot span index i with u_i <= x < u_{i+1} (last interval closed); -1 outside."""
    t = spec.knots()
    M, K = spec.degree, spec.K
    inside = (x >= spec.A) & (x <= spec.B)
    span = np.searchsorted(t, x, side="right") - 1
    span = np.clip(span, M, M + K - 1)
    return np.where(inside, span, -1), t


def _local_basis(t, span, x, degree):
    """Non-zero B-splines of ``degree`` on each span via the triangular Cox-de Boor scheme.

    Returns an array (len(x), degree + 1); column r is B_{span - degree + r}.
    """
    P = x.size
    Nv = np.zeros((P, degree + 1))
    Nv[:, 0] = 1.0
    left = np.zeros((P, degree + 1))
    right = np.zeros((P, degree + 1))
    for j in range(1, degree + 1):
        left[:, j] = x - t[span + 1 - j]
        right[:, j] = t[span + j] - x
        saved = np.zeros(P)
        for r in range(j):
            denom = right[:, r + 1] + left[:, j - r]
            temp = np.divide(Nv[:, r], denom, out=np.zeros(P), where=denom != 0)
            Nv[:, r] = saved + right[:, r + 1] * temp
            saved = left[:, j - r] * temp
        Nv[:, j] = saved
    return Nv


def _spline_eval(spec, x, deriv=False):
    x = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.zeros((x.size, spec.m))
    span, t = _spans(spec, x)
    ok = span >= 0
    if not ok.any():
        return out
    xs, sp = x[ok], span[ok]
    M = spec.degree
    rows = np.nonzero(ok)[0]
    if not deriv:
        local = _local_basis(t, sp, xs, M)
        for r in range(M + 1):
            # basis index l = span - M + r, with knot offset M removed -> span - M + r - 0
            out[rows, sp - M + r] = local[:, r]
        return out
    if M == 0:
        return out
    low = _local_basis(t, sp, xs, M - 1)  # columns: N_{span-M+1+r, M-1}
    # N_{l, M-1} for l = span - M .. span, the first one is zero on this span
    lowfull = np.zeros((xs.size, M + 1))
    lowfull[:, 1:] = low
    for r in range(M + 1):
        l = sp - M + r
        d1 = t[l + M] - t[l]
        d2 = t[l + M + 1] - t[l + 1]
        a = np.divide(lowfull[:, r], d1, out=np.zeros(xs.size), where=d1 != 0)
        nxt = lowfull[:, r + 1] if r + 1 <= M else np.zeros(xs.size)
        bterm = np.divide(nxt, d2, out=np.zeros(xs.size), where=d2 != 0)
        out[rows, l] = M * (a - bterm)
    return out


def _fourier_eval(spec, x, deriv=False):
    x = np.atleast_1d(np.asarray(x, dtype=float))
    L = spec.B - spec.A
    D = spec.D
    scale = math.sqrt(2.0 / L) if spec.normalized else math.sqrt(2.0) / L
    c0 = 1.0 / math.sqrt(L) if spec.normalized else 1.0
    out = np.empty((x.size, 2 * D + 1))
    out[:, 0] = 0.0 if deriv else c0
    if D:
        ell = np.arange(1, D + 1)
        w = 2.0 * math.pi * ell / L
        arg = np.outer(x - spec.A, w)
        if deriv:
            out[:, 1:D + 1] = -scale * w * np.sin(arg)
            out[:, D + 1:] = scale * w * np.cos(arg)
        else:
            out[:, 1:D + 1] = scale * np.cos(arg)
            out[:, D + 1:] = scale * np.sin(arg)
    return out


def eval_basis(spec, x):
    """Matrix (len(x), m) of basis values phi_0..phi_{m-1} at ``x``."""
    if spec.kind == "spline":
        return _spline_eval(spec, x)
    return _fourier_eval(spec, x)


def eval_basis_derivative(spec, x):
    """Matrix (len(x), m) of first derivatives."""
    if spec.kind == "spline":
        return _spline_eval(spec, x, deriv=True)
    return _fourier_eval(spec, x, deriv=True)


def default_probe(spec, per_interval=64):
    if spec.kind == "spline":
        pts = per_interval * spec.K + 1
    else:
        pts = per_interval * (2 * spec.D + 1) + 1
    return np.linspace(spec.A, spec.B, pts)


def basis_norms(spec, probe=None):
    """(L(m), R(m)): sup over the probe of sum phi_l^2 and sum phi_l'^2."""
    probe = default_probe(spec) if probe is None else np.asarray(probe, dtype=float)
    L = float(np.max(np.sum(eval_basis(spec, probe) ** 2, axis=1)))
    R = float(np.max(np.sum(eval_basis_derivative(spec, probe) ** 2, axis=1)))
    return L, R


@dataclass(frozen=True)
class ConstraintBall:
    """Coefficient ball sum a_l^2 <= m (B - A)^2 log(N n)."""

    m: int
    A: float
    B: float
    N: int
    n: int
    override: float = None

    @property
    def radius_sq(self):
        if self.override is not None:
            return float(self.override)
        return self.m * (self.B - self.A) ** 2 * math.log(self.N * self.n)

    @classmethod
    def for_spec(cls, spec, N, n, override=None):
        return cls(spec.m, spec.A, spec.B, int(N), int(n), override)

    def to_dict(self):
        r = self.radius_sq
        # null marks an unconstrained fit; JSON has no infinity
        return {"m": self.m, "A": self.A, "B": self.B, "N": self.N, "n": self.n,
                "radius_sq": r if math.isfinite(r) else None}


def spec_asdict(spec):
    return asdict(spec)
