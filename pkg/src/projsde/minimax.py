"""Bump hypotheses for the minimax lower bound and checks of the three Tsybakov premises.

sigma_j^2 = 1 + Gamma sum_k w^j_k eta_k on [A, B], with
eta_k(x) = phi_k((x - A)/(B - A)), phi_k(u) = R h^beta K((u - x_k)/h), h = 1/m,
x_k = (k - 1/2)/m, K(u) = a K0(2u), K0(x) = exp(-1/(1 - x^2)) on (-1, 1), and
Gamma = (kappa1^2 - 1)/(R ||K||_inf).
"""

from dataclasses import dataclass
import io
import math
from typing import Optional

import numpy as np
from scipy import integrate

from . import rng
from .density import DensityTransforms, bridge_paths, _trapezoid_weights
from .errors import CodebookInfeasible, PreconditionError
from .model import DiffusionModel
from .simulate import simulate_sample

MAX_DERIVATIVE = 4


# --- bump kernel ------------------------------------------------------------

def _g_derivative(x, k):
    """k-th derivative of g(x) = -1/(1 - x^2) = -(1/(1 - x) + 1/(1 + x))/2."""
    f = math.factorial(k)
    return -0.5 * (f / (1.0 - x) ** (k + 1) + (-1) ** k * f / (1.0 + x) ** (k + 1))


def k0_derivatives(x, order):
    """K0 and its derivatives up to ``order`` at x; list of arrays, zero outside (-1, 1).

    With F = exp(g): F^(n) = sum_{i<n} C(n-1, i) g^(i+1) F^(n-1-i).
    """
    x = np.asarray(x, dtype=float)
    inside = np.abs(x) < 1.0
    xi = np.where(inside, x, 0.0)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        F = [np.where(inside, np.exp(_g_derivative(xi, 0)), 0.0)]
        g = [_g_derivative(xi, k) for k in range(1, order + 1)]
        for nn in range(1, order + 1):
            acc = np.zeros_like(xi)
            for i in range(nn):
                term = math.comb(nn - 1, i) * g[i] * F[nn - 1 - i]
                acc = acc + np.where(F[0] > 0, term, 0.0)
            F.append(np.where(inside, acc, 0.0))
    return F


@dataclass(frozen=True)
class BumpKernel:
    """K(u) = a K0(2u), positive exactly on (-1/2, 1/2)."""

    a: float = 1.0

    def derivative(self, u, order=0):
        return self.a * 2.0 ** order * k0_derivatives(2.0 * np.asarray(u, dtype=float), order)[order]

    def __call__(self, u):
        return self.derivative(u, 0)

    @property
    def sup(self):
        return self.a * math.exp(-1.0)

    @property
    def l2_norm(self):
        """||K|| over (-1/2, 1/2)."""
        val, _ = integrate.quad(lambda u: float(self(u)) ** 2, -0.5, 0.5, epsabs=1e-15, epsrel=1e-13,
                                limit=200)
        return math.sqrt(val)

    def derivative_sup(self, order, points=200001):
        u = np.linspace(-0.5, 0.5, points)
        return float(np.max(np.abs(self.derivative(u, order))))


# --- codebook ---------------------------------------------------------------

def hamming(a, b):
    return int(np.sum(np.asarray(a) != np.asarray(b)))


def min_distance(words):
    W = np.asarray(words)
    best = W.shape[1]
    for i in range(len(W)):
        for j in range(i + 1, len(W)):
            best = min(best, hamming(W[i], W[j]))
    return best


def _bits(value, m):
    return np.array([(value >> (m - 1 - i)) & 1 for i in range(m)], dtype=np.int8)


def build_codebook(m, M_target, seed=0, slack=1.0, tries_per_word=2000):
    """Zero word plus M_target binary words of length m with pairwise Hamming distance >= m/8.

    Random search with rejection first; a greedy Gilbert-Varshamov sweep over all
    2^m words takes over if that stalls and m <= 24.
    """
    if m < 8:
        raise PreconditionError("codebook needs m >= 8")
    if M_target > 2.0 ** (m / 8.0) * slack:
        raise CodebookInfeasible(
            f"M_target={M_target} exceeds the guaranteed 2^(m/8)={2 ** (m / 8):.3g} (slack {slack})")
    dmin = math.ceil(m / 8.0)
    g = rng.stream(seed, rng.CODEBOOK)
    words = [np.zeros(m, dtype=np.int8)]
    tries = 0
    while len(words) < M_target + 1 and tries < tries_per_word * (M_target + 1):
        tries += 1
        w = g.integers(0, 2, m).astype(np.int8)
        if all(hamming(w, v) >= dmin for v in words):
            words.append(w)
    if len(words) < M_target + 1:
        if m > 24:
            raise CodebookInfeasible("random codeword search stalled and m > 24")
        words = _greedy_gv(m, M_target + 1, dmin)
    W = np.array(words, dtype=np.int8)
    if min_distance(W) < dmin:
        raise CodebookInfeasible("codebook failed verification")
    return W


def _greedy_gv(m, count, dmin):
    alive = np.ones(1 << m, dtype=bool)
    idx = np.arange(1 << m, dtype=np.uint32)
    words = []
    pos = 0
    while len(words) < count:
        nxt = np.flatnonzero(alive[pos:])
        if nxt.size == 0:
            raise CodebookInfeasible("greedy sweep exhausted the words")
        pos += int(nxt[0])
        words.append(_bits(pos, m))
        alive &= np.bitwise_count(idx ^ np.uint32(pos)) >= dmin
    return words


def tsybakov_bound(M, alpha=1.0 / 16.0):
    """sqrt(M)/(1 + sqrt(M)) (1 - 2 alpha - sqrt(2 alpha / log M))."""
    if M < 2:
        raise PreconditionError("need M >= 2")
    r = math.sqrt(M)
    return r / (1.0 + r) * (1.0 - 2.0 * alpha - math.sqrt(2.0 * alpha / math.log(M)))


# --- hypotheses -------------------------------------------------------------

@dataclass
class HypothesisSet:
    beta: float
    R: float
    kappa1: float
    A: float
    B: float
    m: int
    codewords: np.ndarray
    kernel: BumpKernel = BumpKernel()
    gamma_scale: float = 1.0
    dilation: float = 1.0

    @property
    def h(self):
        return 1.0 / self.m

    @property
    def M(self):
        return len(self.codewords) - 1

    @property
    def Gamma(self):
        return self.gamma_scale * (self.kappa1 ** 2 - 1.0) / (self.R * self.kernel.sup)

    @property
    def d(self):
        return math.ceil(self.beta) - 1

    def perturbation(self, word, x, order=0):
        """order-th derivative of Gamma sum_k w_k eta_k at x."""
        x = np.asarray(x, dtype=float)
        L = self.B - self.A
        u = (x - self.A) / L
        inside = (u > 0.0) & (u < 1.0)
        k = np.clip(np.floor(u * self.m).astype(int), 0, self.m - 1)
        w = np.asarray(word)[k] * inside
        centre = (k + 0.5) / self.m
        v = (u - centre) / self.h
        scale = self.dilation * self.R * self.h ** (self.beta - order) * L ** (-order)
        return self.Gamma * scale * w * self.kernel.derivative(v, order)

    def perturbation_derivatives(self, word, x, max_order):
        """[P, P', ..., P^(max_order)] of the perturbation from a single kernel evaluation."""
        x = np.asarray(x, dtype=float)
        out = [np.zeros_like(x) for _ in range(max_order + 1)]
        L = self.B - self.A
        u = (x - self.A) / L
        inside = (u > 0.0) & (u < 1.0)
        if not inside.any():
            return out
        ui = u[inside]
        k = np.clip(np.floor(ui * self.m).astype(int), 0, self.m - 1)
        w = np.asarray(word)[k]
        v = (ui - (k + 0.5) / self.m) / self.h
        K0 = k0_derivatives(2.0 * v, max_order)
        for o in range(max_order + 1):
            scale = self.dilation * self.R * self.h ** (self.beta - o) * L ** (-o)
            out[o][inside] = self.Gamma * scale * w * self.kernel.a * 2.0 ** o * K0[o]
        return out

    def sigma2(self, j, x, order=0):
        val = self.perturbation(self.codewords[j], x, order)
        return 1.0 + val if order == 0 else val

    def model(self, j):
        word = self.codewords[j]

        def s2(x, o=0):
            v = self.perturbation(word, x, o)
            return 1.0 + v if o == 0 else v

        def sigma(x):
            return np.sqrt(s2(x))

        def sigma_prime(x):
            return s2(x, 1) / (2.0 * np.sqrt(s2(x)))

        def sigma_double_prime(x):
            s = np.sqrt(s2(x))
            sp = s2(x, 1) / (2.0 * s)
            return (s2(x, 2) - 2.0 * sp * sp) / (2.0 * s)

        zero = lambda x: np.zeros_like(np.asarray(x, dtype=float))
        return DiffusionModel(b=zero, b_prime=zero, sigma=sigma, sigma_prime=sigma_prime,
                              sigma_double_prime=sigma_double_prime, kappa0=1.0,
                              kappa1=float(self.kappa1), name=f"hypothesis:{j}")

    def to_dict(self):
        return {
            "beta": self.beta, "R": self.R, "kappa1": self.kappa1, "A": self.A, "B": self.B,
            "m": self.m, "Gamma": self.Gamma, "a": self.kernel.a, "gamma_scale": self.gamma_scale,
            "dilation": self.dilation, "codewords": self.codewords.astype(int).tolist(),
        }


class HypothesisTransforms(DensityTransforms):
    """Density transforms of a zero-drift hypothesis with G = s2''/8 - 3 s2'^2/(32 s2), s2 = sigma^2."""

    G_SPACING = 2e-5

    def __init__(self, hs, j, **kw):
        self.hs = hs
        self.word = hs.codewords[j]
        super().__init__(hs.model(j), **kw)
        # G vanishes outside S((A, B)); tabulate it there once and interpolate linearly
        zlo, zhi = float(self.S(hs.A)), float(self.S(hs.B))
        count = int(math.ceil((zhi - zlo) / self.G_SPACING)) + 1
        self._zt = np.linspace(zlo, zhi, count)
        self._gt = self.g_x(self.S_inv(self._zt))

    def g_x(self, x):
        P, P1, P2 = self.hs.perturbation_derivatives(self.word, x, 2)
        return P2 / 8.0 - 3.0 * P1 * P1 / (32.0 * (1.0 + P))

    def G(self, z):
        return np.interp(z, self._zt, self._gt, left=0.0, right=0.0)


def holder_unit_quotient(beta, A, B, m, points=8001, a=1.0):
    """Hoelder quotient of the all-ones hypothesis with kappa1^2 - 1 = R = 1."""
    hs = HypothesisSet(beta, 1.0, math.sqrt(2.0), A, B, m, np.ones((1, m), dtype=np.int8),
                       BumpKernel(a))
    return _holder_quotient(lambda x: hs.sigma2(0, x, hs.d), beta - hs.d,
                            np.linspace(A, B, points))


def saturating_kappa1(beta, R, A, B, m):
    """Largest kappa1 for which the hypotheses stay in the Hoelder ball of radius R."""
    q = holder_unit_quotient(beta, A, B, m)
    return math.sqrt(1.0 + R / q)


def build_hypotheses(beta, R, kappa1, interval, m, M_target, seed=0, a=1.0, gamma_scale=1.0,
                     dilation=1.0, slack=1.0):
    if m < 8:
        raise PreconditionError("hypothesis construction needs m >= 8")
    if kappa1 is None:
        kappa1 = saturating_kappa1(beta, R, interval[0], interval[1], m)
    if kappa1 <= 1.0:
        raise PreconditionError("kappa1 must exceed 1")
    words = build_codebook(m, M_target, seed, slack)
    return HypothesisSet(float(beta), float(R), float(kappa1), float(interval[0]),
                         float(interval[1]), int(m), words, BumpKernel(a), gamma_scale, dilation)


def bump_model(beta, R, kappa1, interval, bumps, a=1.0):
    """sigma^2 = 1 + Gamma sum over all bumps, as a zero-drift model (rate-ladder truth)."""
    hs = HypothesisSet(float(beta), float(R), float(kappa1), float(interval[0]), float(interval[1]),
                       int(bumps), np.ones((2, bumps), dtype=np.int8), BumpKernel(a))
    return hs.model(1)


# --- premise 2: separation ---------------------------------------------------

@dataclass
class SeparationReport:
    distances: np.ndarray
    analytic: np.ndarray
    max_rel_error: float
    min_distance: float
    single_bit_distance: float
    two_s: float
    separated: bool


def pairwise_separation(hs, c0=1.0, N=1, n=1):
    """L2([A, B]) distances by quadrature over the bump cells and the analytic identity."""
    J = hs.M + 1
    L = hs.B - hs.A
    K2 = hs.kernel.l2_norm ** 2
    unit = L * hs.Gamma ** 2 * (hs.dilation * hs.R) ** 2 * K2 * hs.h ** (2 * hs.beta + 1)
    cell_sq = np.empty(hs.m)
    for k in range(hs.m):
        lo = hs.A + k * L / hs.m
        hi = hs.A + (k + 1) * L / hs.m
        e = np.zeros(hs.m, dtype=np.int8)
        e[k] = 1
        f = lambda x, e=e: float(hs.perturbation(e, x)) ** 2
        cell_sq[k], _ = integrate.quad(f, lo, hi, epsabs=0.0, epsrel=1e-13, limit=200)
    dist = np.zeros((J, J))
    ana = np.zeros((J, J))
    for i in range(J):
        for j in range(i + 1, J):
            diff = hs.codewords[i] != hs.codewords[j]
            dist[i, j] = dist[j, i] = math.sqrt(float(np.sum(cell_sq[diff])))
            ana[i, j] = ana[j, i] = math.sqrt(unit * int(diff.sum()))
    off = ~np.eye(J, dtype=bool)
    rel = float(np.max(np.abs(dist[off] - ana[off]) / ana[off])) if J > 1 else 0.0
    Lam0 = hs.R * hs.Gamma * hs.dilation * math.sqrt(K2) * math.sqrt(L) / (2 ** (hs.beta + 1) * c0 ** hs.beta)
    two_s = 2.0 * Lam0 * (N * n) ** (-hs.beta / (2 * hs.beta + 1))
    dmin = float(dist[off].min()) if J > 1 else 0.0
    return SeparationReport(dist, ana, rel, dmin, math.sqrt(unit), two_s, dmin >= two_s)


# --- premise 1: Hoelder membership -------------------------------------------

def _holder_quotient(f, alpha, probe, chunk=512):
    v = f(probe)
    best = 0.0
    for s in range(0, probe.size, chunk):
        xs = probe[s:s + chunk, None]
        dx = np.abs(xs - probe[None, :])
        dv = np.abs(v[s:s + chunk, None] - v[None, :])
        with np.errstate(divide="ignore", invalid="ignore"):
            q = np.where(dx > 0, dv / dx ** alpha, 0.0)
        best = max(best, float(q.max()))
    return best


@dataclass
class HolderReport:
    quotients: np.ndarray
    max_quotient: float
    R: float
    slack: float
    member: bool


def holder_membership(hs, probe=None, slack=0.05):
    if hs.d > MAX_DERIVATIVE:
        raise PreconditionError("Hoelder check supports d <= 4")
    probe = np.linspace(hs.A, hs.B, 4000) if probe is None else np.asarray(probe, dtype=float)
    alpha = hs.beta - hs.d
    q = np.array([_holder_quotient(lambda x: hs.sigma2(j, x, hs.d), alpha, probe)
                  for j in range(hs.M + 1)])
    mx = float(q.max())
    return HolderReport(q, mx, hs.R, slack, mx <= hs.R * (1.0 + slack))


# --- premise 3: Kullback budget -----------------------------------------------

def _gauss_logpdf(x, y, tau):
    d = y - x
    return -0.5 * d * d / tau - 0.5 * math.log(2.0 * math.pi * tau)


def log_transition_b0(tr, tau, x, y, bridge, first_order=False, chunk=2000):
    """log p(tau, x, y) for a zero-drift model, vectorized over transitions (x, y)."""
    model = tr.model
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    sx, sy = model.sigma(x), model.sigma(y)
    Sx, Sy = tr.S(x), tr.S(y)
    d = Sy - Sx
    logpref = -0.5 * d * d / tau + 0.5 * np.log(sx / sy) - 0.5 * np.log(2 * math.pi * tau * sy * sy)
    steps = bridge.shape[1] - 1
    u = np.arange(steps + 1) / steps
    w = _trapezoid_weights(steps)
    logfac = np.empty(x.size)
    for s in range(0, x.size, chunk):
        a, b = Sx[s:s + chunk, None, None], Sy[s:s + chunk, None, None]
        z = u * a + (1.0 - u) * b + math.sqrt(tau) * bridge[None]
        I = tr.G(z) @ w
        if first_order:
            logfac[s:s + chunk] = np.log1p(tau * I.mean(axis=1))
        else:
            logfac[s:s + chunk] = np.log(np.mean(np.exp(tau * I), axis=1))
    return logpref + logfac


@dataclass
class KLReport:
    per_hypothesis: np.ndarray
    per_se: np.ndarray
    average: float
    se: float
    budget: float
    kl_null: float
    tsybakov_pm: float
    within_budget: bool

    def to_csv(self):
        buf = io.StringIO()
        buf.write("hypothesis,kl,se\n")
        for j, (k, s) in enumerate(zip(self.per_hypothesis, self.per_se), start=1):
            buf.write(f"{j},{float(k)!r},{float(s)!r}\n")
        return buf.getvalue()


def kl_single(hs, j, N, n, mc_paths, seed, bridges=100, bridge_steps=16, substeps=64,
              first_order=False):
    """(KL(P_j^N, P_0^N), se) over all n transitions of each path.

    Hypotheses equal to the null word return exactly 0.
    """
    if not np.any(hs.codewords[j] != hs.codewords[0]):
        return 0.0, 0.0
    model = hs.model(j)
    sample = simulate_sample(model, mc_paths, n, substeps, rng.derive_seed(seed, rng.HYPOTHESIS, j))
    X = sample.values
    x, y = X[:, :-1].ravel(), X[:, 1:].ravel()
    tau = 1.0 / n
    tr = HypothesisTransforms(hs, j)
    bridge = bridge_paths(rng.derive_seed(seed, rng.BRIDGE, j), bridges, bridge_steps)
    lr = log_transition_b0(tr, tau, x, y, bridge, first_order) - _gauss_logpdf(x, y, tau)
    per_path = lr.reshape(mc_paths, n).sum(axis=1)
    return float(N * per_path.mean()), float(N * per_path.std(ddof=1) / math.sqrt(mc_paths))


def kl_budget(hs, N, n, mc_paths=500, seed=0, bridges=100, bridge_steps=16, substeps=64,
              first_order=False, threads=1):
    if hs.M < 1:
        raise PreconditionError("need at least one alternative hypothesis")
    res = rng.ordered_map(
        lambda j: kl_single(hs, j, N, n, mc_paths, seed, bridges, bridge_steps, substeps, first_order),
        range(1, hs.M + 1), threads)
    kl = np.array([r[0] for r in res])
    se = np.array([r[1] for r in res])
    avg = float(kl.mean())
    avg_se = float(math.sqrt(np.sum(se * se)) / kl.size)
    budget = math.log(hs.M) / 16.0 if hs.M > 1 else 0.0
    null, _ = kl_single(hs, 0, N, n, max(mc_paths, 2), seed, bridges, bridge_steps, substeps)
    pm = tsybakov_bound(hs.M) if hs.M >= 2 else float("nan")
    return KLReport(kl, se, avg, avg_se, budget, null, pm, avg <= budget + 3.0 * avg_se)
