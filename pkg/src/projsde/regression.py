"""Regression pairs (X_{k delta}, U_{k delta}) and the residual decomposition.

U_{k delta} = (X_{(k+1) delta} - X_{k delta})^2 / delta splits into
sigma^2(X_{k delta}) plus three centred terms zeta1..zeta3 and three small
remainders r1..r3.  The decomposition is a diagnostic that needs the true
model and the fine simulation grid; the estimator only ever sees (x, u).
"""

from dataclasses import dataclass
import io

import numpy as np

from .errors import MissingFineGrid, PreconditionError


@dataclass
class RegressionData:
    """Flat (j, k) row-major regression pairs, k = 0..n-1."""

    x: np.ndarray
    u: np.ndarray
    n: int
    N: int
    delta: float

    def __len__(self):
        return self.x.size

    def to_csv(self):
        buf = io.StringIO()
        buf.write("j,k,x,u\n")
        for idx, (xv, uv) in enumerate(zip(self.x, self.u)):
            j, k = divmod(idx, self.n)
            buf.write(f"{j},{k},{float(xv)!r},{float(uv)!r}\n")
        return buf.getvalue()


def regression_from_values(values, delta):
    values = np.asarray(values, dtype=float)
    if values.ndim != 2 or values.shape[1] < 3:
        raise PreconditionError("need a (N, n + 1) array with n >= 2")
    N, n1 = values.shape
    inc = np.diff(values, axis=1)
    return RegressionData(
        x=values[:, :-1].ravel().copy(),
        u=(inc * inc / delta).ravel(),
        n=n1 - 1,
        N=N,
        delta=float(delta),
    )


def build_regression(sample, x0=0.0):
    """Regression pairs of a PathSample; ``x0`` maps stored (shifted) states back to original ones."""
    return regression_from_values(np.asarray(sample.values) + x0, sample.delta)


@dataclass
class ResidualDecomposition:
    zeta1: np.ndarray
    zeta2: np.ndarray
    zeta3: np.ndarray
    r1: np.ndarray
    r2: np.ndarray
    r3: np.ndarray
    phi_values: np.ndarray

    @property
    def zeta(self):
        return self.zeta1 + self.zeta2 + self.zeta3

    @property
    def remainder(self):
        return self.r1 + self.r2 + self.r3

    def total(self):
        return self.zeta + self.remainder


def phi_function(model, x):
    """Phi = 2 b sigma' sigma + (sigma'' sigma + sigma'^2) sigma^2."""
    s = model.sigma(x)
    sp = model.sigma_prime(x)
    spp = model.sigma_double_prime(x)
    return 2.0 * model.b(x) * sp * s + (spp * s + sp * sp) * s * s


def decompose_residuals(sample, model):
    """Split u - sigma^2(x) into zeta1..3 and r1..3 using the fine grid.

    Stochastic and time integrals are left-point sums over the fine grid with
    the increments used to simulate the sample.
    """
    if not sample.has_fine_grid:
        raise MissingFineGrid("sample was simulated without keep_fine=True")
    model = model.shifted()
    N, n, s = sample.N, sample.n, sample.substeps
    delta = sample.delta
    dt = delta / s
    Xl = sample.fine[:, :-1].reshape(N, n, s)
    dW = sample.dW.reshape(N, n, s)
    xk = Xl[:, :, 0]
    # (k+1) delta - t_i for the left points of each sub-interval
    lag = (s - np.arange(s)) * dt

    sig = model.sigma(Xl)
    bx = model.b(Xl)
    M = np.sum(sig * dW, axis=2)
    Ib = np.sum(bx, axis=2) * dt
    S2 = np.sum(sig * sig, axis=2) * dt
    bk = model.b(xk)
    phi = phi_function(model, Xl)

    zeta1 = (M * M - S2) / delta
    zeta2 = 2.0 / delta * np.sum(lag * model.sigma_prime(Xl) * sig * sig * dW, axis=2)
    zeta3 = 2.0 * bk * M
    r1 = Ib * Ib / delta
    r2 = 2.0 / delta * (Ib - bk * delta) * M
    r3 = np.sum(lag * phi, axis=2) * dt / delta
    flat = lambda a: a.reshape(N * n)
    return ResidualDecomposition(
        zeta1=flat(zeta1), zeta2=flat(zeta2), zeta3=flat(zeta3),
        r1=flat(r1), r2=flat(r2), r3=flat(r3),
        phi_values=phi.reshape(N * n, s),
    )


def reconstruction_error(sample, model, decomposition=None):
    """max |u - sigma^2(x) - sum of terms| divided by the RMS of u - sigma^2(x)."""
    dec = decompose_residuals(sample, model) if decomposition is None else decomposition
    data = build_regression(sample)
    target = data.u - model.shifted().sigma2(data.x)
    gap = np.max(np.abs(target - dec.total()))
    return float(gap / np.sqrt(np.mean(target * target)))
