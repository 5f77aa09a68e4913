"""Independent reference computations used by the unit and acceptance tests."""

import itertools

import numpy as np
from scipy import integrate
from scipy.stats import norm

from projsde.basis import eval_basis
from projsde.estimator import design_matrix


def lattice_search(data, spec, radius_sq, points=41, rounds=12):
    """Best contrast over a 3-d coefficient lattice inside the ball, refined around the optimum."""
    P = design_matrix(data, spec)
    u = data.u
    r = np.sqrt(radius_sq)
    centre = np.zeros(spec.m)
    half = r
    best_val, best = np.inf, centre
    for _ in range(rounds):
        axes = [np.linspace(c - half, c + half, points) for c in centre]
        grid = np.array(list(itertools.product(*axes)))
        grid = grid[np.sum(grid * grid, axis=1) <= radius_sq]
        if grid.size == 0:
            break
        res = u[:, None] - P @ grid.T
        vals = np.mean(res * res, axis=0)
        i = int(np.argmin(vals))
        if vals[i] < best_val:
            best_val, best = float(vals[i]), grid[i]
        centre = best
        half *= 4.0 / (points - 1)
    return best_val, best


def kkt_residual(data, est):
    """Norm of the Lagrangian gradient of the constrained contrast at the fitted coefficients."""
    P = design_matrix(data, est.spec)
    a = est.coeffs
    grad = -2.0 * P.T @ (data.u - P @ a) / P.shape[0]
    return float(np.linalg.norm(grad + 2.0 * est.lam * a))


def brownian_gram(spec, n):
    """(1/n) sum_k E[phi phi^T(W_{k/n})] for standard Brownian motion from 0, by quadrature."""
    psi = np.outer(*(2 * [eval_basis(spec, np.array([0.0]))[0]]))
    nodes, weights = np.polynomial.legendre.leggauss(400)
    x = 0.5 * (spec.B - spec.A) * (nodes + 1) + spec.A
    w = 0.5 * (spec.B - spec.A) * weights
    Phi = eval_basis(spec, x)
    for k in range(1, n):
        dens = norm.pdf(x, scale=np.sqrt(k / n))
        psi = psi + Phi.T @ ((w * dens)[:, None] * Phi)
    return psi / n


def gaussian_density(t, y, scale=1.0):
    return float(norm.pdf(y, scale=scale * np.sqrt(t)))


def quad(f, a, b):
    return integrate.quad(f, a, b, epsabs=1e-13, epsrel=1e-12, limit=400)[0]
