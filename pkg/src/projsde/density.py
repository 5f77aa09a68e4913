"""Transition density by Brownian-bridge Monte Carlo and the quantities derived from it.

p(s, t, x, y) = exp(-(S(y) - S(x))^2 / (2 tau) + H(y) - H(x)) / sqrt(2 pi tau sigma^2(y))
               * E[exp(tau * int_0^1 G(u S(x) + (1 - u) S(y) + sqrt(tau) Bbridge_u) du)]
with tau = t - s, S(x) = int_0^x 1/sigma, H(x) = int_0^x (b/sigma^2 - sigma'/(2 sigma)),
G = -(mu^2 + mu')/2 in Lamperti coordinates, mu = b/sigma - sigma'/2.
"""

from dataclasses import dataclass
import math

import numpy as np
from scipy import integrate
from scipy.interpolate import CubicHermiteSpline
from scipy.special import ndtr

from . import rng
from .errors import PreconditionError, QuadratureFailure
from .simulate import iter_path_batches

BRIDGE_BATCH = 1000
_GL_HI = np.polynomial.legendre.leggauss(12)
_GL_LO = np.polynomial.legendre.leggauss(8)


def _cell_integrals(f, nodes, rule):
    """Gauss-Legendre integral of f over each cell [nodes[i], nodes[i+1]]."""
    z, w = rule
    a, b = nodes[:-1, None], nodes[1:, None]
    half = 0.5 * (b - a)
    pts = a + half * (z + 1.0)
    return np.sum(f(pts) * w, axis=1) * half[:, 0]


def _cumulative(f, nodes, i0, tol=1e-10):
    hi = _cell_integrals(f, nodes, _GL_HI)
    lo = _cell_integrals(f, nodes, _GL_LO)
    if not np.all(np.isfinite(hi)):
        raise QuadratureFailure("non-finite integrand in density transform")
    # cells where the two rules disagree go to adaptive quadrature
    for i in np.flatnonzero(np.abs(hi - lo) > tol):
        val, err = integrate.quad(lambda t: float(f(np.array(t))), nodes[i], nodes[i + 1],
                                  epsabs=tol * 1e-2, epsrel=1e-12, limit=200)
        if not np.isfinite(val) or err > tol:
            raise QuadratureFailure(f"cell quadrature did not converge (error {err:.3g})")
        hi[i] = val
    out = np.concatenate([[0.0], np.cumsum(hi)])
    return out - out[i0]


class DensityTransforms:
    """S, S^{-1}, H and G of a model, tabulated on [-L, L] with cubic Hermite interpolation.

    Outside [-L, L] S and H are continued linearly with their end slopes.
    """

    def __init__(self, model, L=30.0, h=0.01):
        self.model = model
        count = int(round(L / h))
        self.grid = np.linspace(-L, L, 2 * count + 1)
        g = self.grid
        sig = model.sigma(g)
        if np.any(sig <= 0):
            from .errors import NonPositiveSigma
            raise NonPositiveSigma("sigma must be positive on the transform grid")
        self._inv_sigma = lambda x: 1.0 / model.sigma(x)
        self._dH = lambda x: model.b(x) / model.sigma(x) ** 2 - model.sigma_prime(x) / (2.0 * model.sigma(x))
        Sg = _cumulative(self._inv_sigma, g, count)
        Hg = _cumulative(self._dH, g, count)
        self._S = CubicHermiteSpline(g, Sg, 1.0 / sig, extrapolate=False)
        self._H = CubicHermiteSpline(g, Hg, self._dH(g), extrapolate=False)
        self._Sinv = CubicHermiteSpline(Sg, g, sig, extrapolate=False)
        self._Sg, self._Hg = Sg, Hg
        self._ends = (g[0], g[-1])

    def _extend(self, spline, x, vals_at_ends, slopes):
        x = np.asarray(x, dtype=float)
        lo, hi = self._ends
        out = spline(np.clip(x, lo, hi))
        below, above = x < lo, x > hi
        out = np.where(below, vals_at_ends[0] + slopes[0] * (x - lo), out)
        return np.where(above, vals_at_ends[1] + slopes[1] * (x - hi), out)

    def S(self, x):
        lo, hi = self._ends
        return self._extend(self._S, x, (self._Sg[0], self._Sg[-1]),
                            (1.0 / self.model.sigma(lo), 1.0 / self.model.sigma(hi)))

    def H(self, x):
        lo, hi = self._ends
        return self._extend(self._H, x, (self._Hg[0], self._Hg[-1]),
                            (self._dH(lo), self._dH(hi)))

    def S_inv(self, z):
        z = np.asarray(z, dtype=float)
        lo, hi = self._ends
        zlo, zhi = self._Sg[0], self._Sg[-1]
        x = self._Sinv(np.clip(z, zlo, zhi))
        x = np.where(z < zlo, lo + self.model.sigma(lo) * (z - zlo), x)
        x = np.where(z > zhi, hi + self.model.sigma(hi) * (z - zhi), x)
        # one Newton step on S(x) = z polishes the interpolation error
        return x - (self.S(x) - z) * self.model.sigma(x)

    def S_exact(self, x):
        val, err = integrate.quad(self._inv_sigma, 0.0, float(x), epsabs=1e-13, epsrel=1e-13, limit=200)
        return val

    def H_exact(self, x):
        val, err = integrate.quad(self._dH, 0.0, float(x), epsabs=1e-13, epsrel=1e-13, limit=200)
        return val

    def g_x(self, x):
        """G composed with S, i.e. G(S(x)), in original coordinates."""
        m = self.model
        s, sp, spp = m.sigma(x), m.sigma_prime(x), m.sigma_double_prime(x)
        b, bp = m.b(x), m.b_prime(x)
        mu = b / s - 0.5 * sp
        return -0.5 * (mu * mu + (bp * s - b * sp) / s - 0.5 * s * spp)

    def G(self, z):
        return self.g_x(self.S_inv(z))


def bridge_paths(seed, bridges, steps):
    """Brownian bridges on u = i/steps, i = 0..steps, generated in fixed batches of streams."""
    out = np.empty((bridges, steps + 1))
    u = np.arange(steps + 1) / steps
    for start in range(0, bridges, BRIDGE_BATCH):
        count = min(BRIDGE_BATCH, bridges - start)
        g = rng.stream(seed, rng.BRIDGE, start // BRIDGE_BATCH)
        inc = g.standard_normal((BRIDGE_BATCH, steps))[:count] / math.sqrt(steps)
        W = np.concatenate([np.zeros((count, 1)), np.cumsum(inc, axis=1)], axis=1)
        out[start:start + count] = W - u * W[:, -1:]
    return out


def _trapezoid_weights(steps):
    w = np.full(steps + 1, 1.0 / steps)
    w[0] = w[-1] = 0.5 / steps
    return w


def _bridge_samples(tr, tau, x, y, bridge, weights):
    """Per-bridge values of exp(tau * int_0^1 G(...) du)."""
    steps = bridge.shape[1] - 1
    u = np.arange(steps + 1) / steps
    Sx, Sy = float(tr.S(x)), float(tr.S(y))
    z = u * Sx + (1.0 - u) * Sy + math.sqrt(tau) * bridge
    return np.exp(tau * (tr.G(z) @ weights))


def _prefactor(tr, tau, x, y):
    s_y = float(tr.model.sigma(y))
    d = float(tr.S(y) - tr.S(x))
    return math.exp(-d * d / (2.0 * tau) + float(tr.H(y) - tr.H(x))) / math.sqrt(2.0 * math.pi * tau * s_y * s_y)


def _check_times(s, t):
    if not (0.0 <= s < t <= 1.0):
        raise PreconditionError("need 0 <= s < t <= 1")


def transition_density(model, s, t, x, y, bridges=10000, bridge_steps=64, seed=0, transforms=None):
    """(value, se) of p(s, t, x, y)."""
    _check_times(s, t)
    if bridges < 100:
        raise PreconditionError("need bridges >= 100")
    tr = DensityTransforms(model) if transforms is None else transforms
    tau = t - s
    pref = _prefactor(tr, tau, x, y)
    if pref == 0.0:
        return 0.0, 0.0
    vals = _bridge_samples(tr, tau, x, y, bridge_paths(seed, bridges, bridge_steps),
                           _trapezoid_weights(bridge_steps))
    return pref * float(vals.mean()), pref * float(vals.std(ddof=1) / math.sqrt(bridges))


def transition_density_grid(model, s, t, x, ys, bridges=2000, bridge_steps=32, seed=0, transforms=None):
    """Vectorized over y with one shared set of bridges; returns (values, se) arrays."""
    _check_times(s, t)
    tr = DensityTransforms(model) if transforms is None else transforms
    tau = t - s
    bridge = bridge_paths(seed, bridges, bridge_steps)
    w = _trapezoid_weights(bridge_steps)
    vals = np.empty(len(ys))
    ses = np.empty(len(ys))
    for i, y in enumerate(ys):
        pref = _prefactor(tr, tau, x, y)
        if pref == 0.0:
            vals[i] = ses[i] = 0.0
            continue
        e = _bridge_samples(tr, tau, x, y, bridge, w)
        vals[i] = pref * e.mean()
        ses[i] = pref * e.std(ddof=1) / math.sqrt(bridges)
    return vals, ses


def transition_density_b0(model, s, t, x, y, bridges=10000, bridge_steps=64, seed=0, transforms=None):
    """Variant for zero-drift models using H(y) - H(x) = log sqrt(sigma(x)/sigma(y))."""
    _check_times(s, t)
    tr = DensityTransforms(model) if transforms is None else transforms
    tau = t - s
    sx, sy = float(model.sigma(x)), float(model.sigma(y))
    d = float(tr.S(y) - tr.S(x))
    pref = math.exp(-d * d / (2 * tau)) * math.sqrt(sx / sy) / math.sqrt(2 * math.pi * tau * sy * sy)
    vals = _bridge_samples(tr, tau, x, y, bridge_paths(seed, bridges, bridge_steps),
                           _trapezoid_weights(bridge_steps))
    return pref * float(vals.mean()), pref * float(vals.std(ddof=1) / math.sqrt(bridges))


def occupation_density(model, n, y, bridges=2000, bridge_steps=32, seed=0, transforms=None,
                       return_se=False):
    """f_n(y) = (1/n) sum_{k=1}^{n-1} p(0, k/n, x0, y), one shared bridge set across k."""
    if n < 2:
        raise PreconditionError("occupation density needs n >= 2")
    tr = DensityTransforms(model) if transforms is None else transforms
    bridge = bridge_paths(seed, bridges, bridge_steps)
    w = _trapezoid_weights(bridge_steps)
    acc = np.zeros(bridges)
    for k in range(1, n):
        tau = k / n
        pref = _prefactor(tr, tau, model.x0, y)
        if pref > 0.0:
            acc += pref * _bridge_samples(tr, tau, model.x0, y, bridge, w)
    acc /= n
    value = float(acc.mean())
    if return_se:
        return value, float(acc.std(ddof=1) / math.sqrt(bridges))
    return value


def gaussian_occupation_density(n, y, scale=1.0):
    """Closed form of f_n for X = scale * W started at 0."""
    k = np.arange(1, n)
    v = scale * scale * k / n
    return float(np.sum(np.exp(-y * y / (2 * v)) / np.sqrt(2 * np.pi * v)) / n)


@dataclass
class ExitEstimate:
    value: float
    se: float
    argmax_time: float
    per_time: np.ndarray


def exit_probability(model, A, mc_paths=20000, substeps=16, seed=0, grid=32):
    """sup over t = k/grid of P(|X_t| > A), with the binomial SE at the maximising time."""
    if A < 0:
        raise PreconditionError("exit threshold must be non-negative")
    counts = np.zeros(grid + 1)
    for vals in iter_path_batches(model, mc_paths, grid, substeps, seed, purpose=rng.EVAL):
        counts += np.sum(np.abs(vals + model.x0) > A, axis=0)
    p = counts / mc_paths
    k = int(np.argmax(p))
    pk = p[k]
    return ExitEstimate(value=float(pk), se=float(math.sqrt(pk * (1 - pk) / mc_paths)),
                        argmax_time=k / grid, per_time=p)


def gaussian_exit(A, t=1.0, scale=1.0):
    """P(|scale W_t| > A)."""
    return float(2.0 * (1.0 - ndtr(A / (scale * math.sqrt(t)))))


def normalization(model, t, lo=-10.0, hi=10.0, points=401, bridges=500, bridge_steps=16, seed=0,
                  transforms=None):
    """Simpson integral of p(0, t, x0, .) over [lo, hi]."""
    ys = np.linspace(lo, hi, points)
    vals, _ = transition_density_grid(model, 0.0, t, model.x0, ys, bridges, bridge_steps, seed,
                                      transforms)
    return float(integrate.simpson(vals, x=ys))


def chapman_kolmogorov(model, t1, t2, y, lo=-8.0, hi=8.0, points=321, bridges=500, bridge_steps=16,
                       seed=0, transforms=None):
    """(int p(0,t1,x0,z) p(t1,t2,z,y) dz, p(0,t2,x0,y))."""
    tr = DensityTransforms(model) if transforms is None else transforms
    zs = np.linspace(lo, hi, points)
    first, _ = transition_density_grid(model, 0.0, t1, model.x0, zs, bridges, bridge_steps, seed, tr)
    second = np.array([
        transition_density(model, t1, t2, z, y, bridges, bridge_steps, seed + 1, tr)[0] for z in zs
    ])
    lhs = float(integrate.simpson(first * second, x=zs))
    rhs = transition_density(model, 0.0, t2, model.x0, y, 4 * bridges, bridge_steps, seed + 2, tr)[0]
    return lhs, rhs


@dataclass
class SandwichFit:
    c_sigma: float
    C: float


def fit_sandwich(taus, dys, values, c_grid=None):
    """Tightest (c_sigma, C), both > 1, for which the two-sided Gaussian bounds hold on the probes.

    Lower: exp(-c dy^2/tau) / (C sqrt(tau)) <= p.  Upper: p <= C exp(-dy^2/(c tau)) / sqrt(tau).
    """
    taus, dys, values = (np.asarray(a, dtype=float) for a in (taus, dys, values))
    ok = values > 0
    taus, dys, values = taus[ok], dys[ok], values[ok]
    c_grid = np.linspace(1.0001, 10.0, 2000) if c_grid is None else np.asarray(c_grid)
    best = None
    q = dys * dys / taus
    for c in c_grid:
        up = np.max(values * np.sqrt(taus) * np.exp(q / c))
        low = np.max(np.exp(-c * q) / (values * np.sqrt(taus)))
        C = max(up, low, 1.0 + 1e-12)
        if best is None or C < best.C:
            best = SandwichFit(float(c), float(C))
    return best
