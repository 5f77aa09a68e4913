"""Monte Carlo Gram matrix of a basis under the path law and the diagnostics built on it.

Psi[l, l'] = E[(1/n) sum_{k=0}^{n-1} phi_l(X_{k/n}) phi_l'(X_{k/n})].
"""

from dataclasses import dataclass, field
import io
import math
from typing import List

import numpy as np
from scipy import integrate

from . import rng
from .basis import BasisSpec, basis_norms, eval_basis
from .estimator import dimension_rule
from .model import Growing
from .simulate import iter_path_batches

RANK_RTOL = 1e-12
NORM_EQUIVALENCE_THRESHOLD = 0.5


@dataclass
class GramReport:
    psi: np.ndarray
    se: np.ndarray
    min_eig: float
    max_eig: float
    op_norm_inverse: float
    l_m: float
    product: float
    mc_paths: int
    rank_deficient: bool

    def quadratic_form(self, v):
        v = np.asarray(v, dtype=float)
        return float(v @ self.psi @ v)


def _path_moments(vals, spec, n):
    """Per-path matrices (1/n) sum_k phi phi^T for observation arrays of shape (P, n + 1)."""
    P = vals.shape[0]
    Phi = eval_basis(spec, vals[:, :n].ravel()).reshape(P, n, spec.m)
    return np.einsum("pki,pkj->pij", Phi, Phi) / n


def estimate_gram(model, spec, n, mc_paths=2000, seed=0, substeps=8):
    """Psi_m by Monte Carlo over ``mc_paths`` fresh paths, with entrywise standard errors."""
    total = np.zeros((spec.m, spec.m))
    total_sq = np.zeros((spec.m, spec.m))
    for vals in iter_path_batches(model, mc_paths, n, substeps, seed, purpose=rng.GRAM):
        mom = _path_moments(vals + model.x0, spec, n)
        total += mom.sum(axis=0)
        total_sq += (mom * mom).sum(axis=0)
    psi = total / mc_paths
    psi = 0.5 * (psi + psi.T)
    var = np.clip(total_sq / mc_paths - psi * psi, 0.0, None)
    se = np.sqrt(var / max(mc_paths - 1, 1))
    w = np.linalg.eigvalsh(psi)
    lo, hi = float(w[0]), float(w[-1])
    deficient = hi <= 0.0 or lo <= RANK_RTOL * hi
    inv = math.inf if lo <= 0.0 else 1.0 / lo
    l_m, _ = basis_norms(spec)
    return GramReport(psi=psi, se=se, min_eig=lo, max_eig=hi, op_norm_inverse=inv, l_m=l_m,
                      product=l_m * inv, mc_paths=int(mc_paths), rank_deficient=bool(deficient))


def conditioning_bound(model, m, N, A_N):
    """Right-hand side of the Gram-conditioning bound with its unknown constants set to 1."""
    S_A, _ = integrate.quad(lambda u: 1.0 / model.sigma(u), 0.0, A_N, epsabs=1e-12, epsrel=1e-12)
    logN = math.log(N)
    return m * logN / A_N * math.exp(S_A * S_A / (2.0 * (1.0 - 1.0 / logN)) + A_N)


@dataclass
class ConditionRow:
    N: int
    n: int
    K: int
    m: int
    A_N: float
    l_m: float
    op_norm_inverse: float
    product: float
    bound_rhs: float
    scale: float
    ratio: float


@dataclass
class ConditionTable:
    rows: List[ConditionRow] = field(default_factory=list)

    COLUMNS = ("N", "n", "K", "m", "A_N", "l_m", "op_norm_inverse", "product", "bound_rhs",
               "scale", "ratio")

    @property
    def ratios(self):
        return np.array([r.ratio for r in self.rows])

    def bounded(self):
        """Ratio at the largest N is no larger than at the smallest, and not strictly increasing."""
        r = self.ratios
        increasing = len(r) > 1 and bool(np.all(np.diff(r) > 0))
        return bool(r[-1] <= r[0]) and not increasing

    def to_csv(self):
        buf = io.StringIO()
        buf.write(",".join(self.COLUMNS) + "\n")
        for row in self.rows:
            buf.write(",".join(repr(getattr(row, c)) for c in self.COLUMNS) + "\n")
        return buf.getvalue()


def growing_bounds(a, N):
    return Growing(a).bounds(N)


def gram_condition_sweep(model, N_list, beta, a, c=1.0, degree=3, kind="spline", n_of_N=None,
                         mc_paths=20000, seed=0, substeps=4):
    """L(m) ||Psi_m^{-1}||_op against N / log^2 N along a growing-interval ladder.

    The interval is [-a sqrt(log N), a sqrt(log N)], K_N follows the growing-interval
    dimension rule, and n = n_of_N(N) (default n = N).
    """
    N_list = [int(N) for N in N_list]
    if any(b <= a_ for a_, b in zip(N_list, N_list[1:])):
        raise ValueError("N_list must be increasing")
    n_of_N = (lambda N: N) if n_of_N is None else n_of_N
    table = ConditionTable()
    for N in N_list:
        n = int(n_of_N(N))
        K = dimension_rule(N, n, beta, Growing(a), c)
        lo, hi = growing_bounds(a, N)
        if kind == "spline":
            spec = BasisSpec.spline(K, lo, hi, degree)
        else:
            spec = BasisSpec.fourier(max(0, (K - 1) // 2), lo, hi)
        rep = estimate_gram(model, spec, n, mc_paths, rng.derive_seed(seed, rng.GRAM, N), substeps)
        scale = N / math.log(N) ** 2
        table.rows.append(ConditionRow(
            N=N, n=n, K=K, m=spec.m, A_N=hi, l_m=rep.l_m, op_norm_inverse=rep.op_norm_inverse,
            product=rep.product, bound_rhs=conditioning_bound(model, spec.m, N, hi), scale=scale,
            ratio=rep.product / scale,
        ))
    return table


def sample_gram(sample, spec, x0=0.0):
    """Empirical (1/Nn) Phi^T Phi of one sample."""
    X = sample.values[:, :sample.n].ravel() + x0
    P = eval_basis(spec, X)
    return P.T @ P / X.size


@dataclass
class EventReport:
    deviations: np.ndarray
    threshold: float
    violation_fraction: float
    rank_deficient: bool

    def to_csv(self):
        buf = io.StringIO()
        buf.write("sample,deviation,violated\n")
        for i, d in enumerate(self.deviations):
            buf.write(f"{i},{float(d)!r},{int(d > self.threshold)}\n")
        return buf.getvalue()


def _inv_sqrt(psi):
    w, V = np.linalg.eigh(psi)
    return (V / np.sqrt(w)) @ V.T


def norm_equivalence_monitor(samples, spec, model, mc_paths=20000, seed=0, gram=None, substeps=8):
    """sup_h | ||h||^2_{n,N} / ||h||^2_n - 1 | per sample, as a whitened spectral norm."""
    n = samples[0].n
    rep = estimate_gram(model, spec, n, mc_paths, seed, substeps) if gram is None else gram
    if rep.rank_deficient:
        return EventReport(np.full(len(samples), np.inf), NORM_EQUIVALENCE_THRESHOLD, 1.0, True)
    W = _inv_sqrt(rep.psi)
    devs = []
    for s in samples:
        D = W @ (sample_gram(s, spec, model.x0) - rep.psi) @ W
        devs.append(float(np.max(np.abs(np.linalg.eigvalsh(0.5 * (D + D.T))))))
    devs = np.array(devs)
    frac = float(np.mean(devs > NORM_EQUIVALENCE_THRESHOLD))
    return EventReport(devs, NORM_EQUIVALENCE_THRESHOLD, frac, False)
