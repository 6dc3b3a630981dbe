"""Atomic sub-problem solvers used inside the ADMM iteration."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import MaxIterations

LASSO_TOL = 1e-8
LASSO_MAX_SWEEPS = 10_000


def soft_threshold(a, b):
    """``sgn(a) * max(|a| - b, 0)``, elementwise."""
    if np.any(np.asarray(b) < 0):
        raise ValueError("threshold must be nonnegative")
    out = np.sign(a) * np.maximum(np.abs(a) - b, 0.0)
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class BivariateProblem:
    """``v(a1, a2) = b1|a1 a2| + b2(|a1| + |a2|) + b3 a1^2/2 + b4 a2^2/2 - b5 a1 - b6 a2``."""

    b1: float
    b2: float
    b3: float
    b4: float
    b5: float
    b6: float

    def __post_init__(self):
        if self.b1 < 0 or self.b2 < 0:
            raise ValueError("b1 and b2 must be nonnegative")
        if not (self.b3 > 0 and self.b4 > 0):
            raise ValueError("b3 and b4 must be positive")

    def value(self, a1, a2):
        return bivariate_objective(a1, a2, self.b1, self.b2, self.b3, self.b4, self.b5, self.b6)


def bivariate_objective(a1, a2, b1, b2, b3, b4, b5, b6):
    return (b1 * np.abs(a1 * a2) + b2 * (np.abs(a1) + np.abs(a2))
            + 0.5 * b3 * a1 * a1 + 0.5 * b4 * a2 * a2 - b5 * a1 - b6 * a2)


@njit(cache=True)
def _prox_scalar(b1, b2, b3, b4, b5, b6):
    best1 = 0.0
    best2 = 0.0
    best_v = 0.0
    best_l1 = 0.0
    # origin, then the two axis minimizers, then one stationary point per open quadrant
    for c in range(7):
        if c == 0:
            continue
        if c == 1:
            c1 = max(abs(b5) - b2, 0.0) / b3
            c1 = c1 if b5 >= 0 else -c1
            c2 = 0.0
        elif c == 2:
            c1 = 0.0
            c2 = max(abs(b6) - b2, 0.0) / b4
            c2 = c2 if b6 >= 0 else -c2
        else:
            det = b3 * b4 - b1 * b1
            if det <= 0.0:
                continue
            s1 = 1.0 if c in (3, 4) else -1.0
            s2 = 1.0 if c in (3, 5) else -1.0
            r1 = s1 * b5 - b2
            r2 = s2 * b6 - b2
            u = (b4 * r1 - b1 * r2) / det
            w = (b3 * r2 - b1 * r1) / det
            if not (u > 0.0 and w > 0.0):
                continue
            c1 = s1 * u
            c2 = s2 * w
        v = (b1 * abs(c1 * c2) + b2 * (abs(c1) + abs(c2))
             + 0.5 * b3 * c1 * c1 + 0.5 * b4 * c2 * c2 - b5 * c1 - b6 * c2)
        l1 = abs(c1) + abs(c2)
        tol = 1e-14 * (1.0 + abs(best_v))
        if v < best_v - tol:
            take = True
        elif abs(v - best_v) <= tol:
            take = l1 < best_l1 or (l1 == best_l1 and (c1 < best1 or (c1 == best1 and c2 < best2)))
        else:
            take = False
        if take:
            best1, best2, best_v, best_l1 = c1, c2, v, l1
    return best1, best2


@njit(cache=True)
def _prox_many(b1, b2, b3, b4, b5, b6, out1, out2):
    for i in range(b5.shape[0]):
        out1[i], out2[i] = _prox_scalar(b1[i], b2[i], b3[i], b4[i], b5[i], b6[i])


def bivariate_prox_batch(b1, b2, b3, b4, b5, b6):
    """Global minimizers of ``v`` for arrays of problems (broadcast together).

    Candidates: the origin, the two axis minimizers (soft-thresholding of the
    free coordinate), and the stationary point of each open sign quadrant, where
    ``|a1 a2|`` is linear. A quadrant candidate is discarded unless its 2x2
    system is positive definite and the solution lies strictly inside the
    quadrant; otherwise the minimum over that closed quadrant sits on an axis and
    is already covered. Ties prefer the smaller l1 norm, then lexicographic order.
    """
    arrays = np.broadcast_arrays(*(np.asarray(b, dtype=float) for b in (b1, b2, b3, b4, b5, b6)))
    shape = arrays[0].shape
    flat = [np.ascontiguousarray(a).ravel() for a in arrays]
    out1 = np.empty(flat[0].shape[0])
    out2 = np.empty(flat[0].shape[0])
    _prox_many(*flat, out1, out2)
    return out1.reshape(shape), out2.reshape(shape)


def bivariate_prox(prob: BivariateProblem):
    """Exact global minimizer ``(a1, a2)`` of ``prob``."""
    return _prox_scalar(float(prob.b1), float(prob.b2), float(prob.b3),
                        float(prob.b4), float(prob.b5), float(prob.b6))


@njit(cache=True)
def _cd_sweeps(gram, grad, coef, kappa, tol, max_sweeps):
    p, m = coef.shape
    sweeps = 0
    while sweeps < max_sweeps:
        sweeps += 1
        biggest = 0.0
        for j in range(p):
            d = gram[j, j]
            if d <= 0.0:
                continue
            for k in range(m):
                old = coef[j, k]
                z = grad[j, k] + d * old
                if z > kappa:
                    new = (z - kappa) / d
                elif z < -kappa:
                    new = (z + kappa) / d
                else:
                    new = 0.0
                step = new - old
                if step != 0.0:
                    coef[j, k] = new
                    for i in range(p):
                        grad[i, k] -= gram[i, j] * step
                    if abs(step) > biggest:
                        biggest = abs(step)
        if biggest < tol:
            return sweeps, True
    return sweeps, False


def lasso_gram(gram, corr, kappa, warm_start=None, tol=LASSO_TOL, max_sweeps=LASSO_MAX_SWEEPS):
    """Cyclic coordinate descent for independent Lasso columns sharing one design.

    Minimizes ``0.5 * ||r_k - D b_k||^2 + kappa * ||b_k||_1`` for every column
    ``k`` given only ``gram = D^T D`` (p x p) and ``corr = D^T R`` (p x m).
    Coordinates with an all-zero design column are held at zero.

    Returns ``(coef, sweeps, converged)``; convergence means the largest
    coordinate change in a sweep fell below ``tol``.
    """
    gram = np.ascontiguousarray(gram, dtype=float)
    corr = np.asarray(corr, dtype=float)
    squeeze = corr.ndim == 1
    if squeeze:
        corr = corr[:, None]
    p, m = corr.shape
    if warm_start is None:
        coef = np.zeros((p, m))
    else:
        coef = np.array(warm_start, dtype=float).reshape(p, m)
    coef[np.diag(gram) <= 0] = 0.0
    grad = np.ascontiguousarray(corr - gram @ coef)  # D^T (r - D b)
    sweeps, converged = _cd_sweeps(gram, grad, coef, float(kappa), float(tol), int(max_sweeps))
    if squeeze:
        coef = coef[:, 0]
    return coef, sweeps, converged


def lasso_column(response, design, kappa3, warm_start=None, tol=LASSO_TOL, max_sweeps=LASSO_MAX_SWEEPS):
    """Solve ``min_b 0.5 ||response - design b||^2 + kappa3 ||b||_1``.

    Raises :class:`MaxIterations` if coordinate descent does not settle within
    ``max_sweeps`` passes.
    """
    if kappa3 < 0:
        raise ValueError("kappa3 must be nonnegative")
    design = np.asarray(design, dtype=float)
    response = np.asarray(response, dtype=float)
    coef, sweeps, converged = lasso_gram(design.T @ design, design.T @ response, kappa3,
                                         warm_start, tol, max_sweeps)
    if not converged:
        raise MaxIterations(f"lasso did not converge in {sweeps} sweeps", result=coef)
    return coef


def lasso_kkt_violation(response, design, kappa3, coef):
    """Largest violation of the Lasso stationarity conditions at ``coef``."""
    g = design.T @ (response - design @ coef)
    active = coef != 0
    off = np.maximum(np.abs(g[~active]) - kappa3, 0.0)
    on = np.abs(g[active] - kappa3 * np.sign(coef[active]))
    return float(max(off.max(initial=0.0), on.max(initial=0.0)))


# Block updates of the ADMM sweep. ``prob`` carries the Gram matrices, the
# penalty weights and rho (see ``admm.AdmmProblem``); ``state`` the iterate.

def update_beta(prob, state):
    return (prob.xm1 - state.tau1 + prob.rho * state.beta_t) / (prob.xx + prob.rho)


def update_theta(prob, state):
    rhs = prob.m1y - prob.xm1 * state.delta - prob.g12 @ state.pi - state.tau2 + prob.rho * state.theta_t
    return prob.solve11(rhs)


def update_zeta(prob, state):
    return (prob.xm2 - prob.xm1 @ state.lam - state.tau3 + prob.rho * state.zeta_t) / (prob.xx + prob.rho)


def update_pi(prob, state):
    rhs = prob.m2y - prob.xm2 * state.delta - prob.g12.T @ state.theta - state.tau4 + prob.rho * state.pi_t
    return prob.solve22(rhs)


def update_delta(prob, state):
    z = prob.xy - prob.xm1 @ state.theta - prob.xm2 @ state.pi
    return float(np.sign(z) * max(abs(z) - prob.cfg.kappa4, 0.0) / prob.xx)


def update_lambda(prob, state, tol=LASSO_TOL, max_sweeps=LASSO_MAX_SWEEPS):
    """All columns of Lambda; column k regresses ``M2_k - x zeta_k`` on M1."""
    corr = prob.g12 - np.outer(prob.xm1, state.zeta)
    return lasso_gram(prob.g11, corr, prob.cfg.kappa3, state.lam, tol, max_sweeps)


def update_beta_theta_tilde(prob, state):
    cfg, rho = prob.cfg, prob.rho
    quad = 2.0 * cfg.kappa1 * cfg.nu1 + rho
    return bivariate_prox_batch(cfg.kappa1, cfg.mu1, quad, quad,
                                state.tau1 + rho * state.beta, state.tau2 + rho * state.theta)


def update_zeta_pi_tilde(prob, state):
    cfg, rho = prob.cfg, prob.rho
    quad = 2.0 * cfg.kappa2 * cfg.nu2 + rho
    return bivariate_prox_batch(cfg.kappa2, cfg.mu2, quad, quad,
                                state.tau3 + rho * state.zeta, state.tau4 + rho * state.pi)
