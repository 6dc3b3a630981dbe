"""ADMM for the relaxed penalized least-squares objective.

Each iteration updates, in order: beta, theta, zeta, pi, delta, the columns of
Lambda, the relaxed pairs (beta~, theta~), the relaxed pairs (zeta~, pi~), and
finally the four dual vectors. Everything is computed from Gram matrices, so
the per-iteration cost does not depend on the sample size.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from . import solvers
from .errors import NotStandardized
from .model import Coefficients, Dataset, PenaltyConfig, Relaxed, pathway_penalty

log = logging.getLogger(__name__)

ZERO_THRESHOLD = 1e-8


@dataclass(frozen=True)
class FitOptions:
    """Solver settings.

    ``rho`` is given on the unit-norm column scale: with ``scale_rho`` the
    augmented Lagrangian uses ``rho * (n - 1)``, which is the same iteration as
    running with ``rho`` on columns of unit Euclidean norm. ``feas_tol`` bounds
    ``max |primal - relaxed|`` at convergence, on top of the objective test.
    """

    rho: float = 1.0
    max_iters: int = 5000
    rel_tol: float = 1e-6
    feas_tol: float = 1e-6
    scale_rho: bool = True
    inner_lasso_tol: float = solvers.LASSO_TOL
    inner_max_sweeps: int = solvers.LASSO_MAX_SWEEPS
    # None starts every primal, relaxed and dual variable at zero
    init: Optional[Coefficients] = None

    def __post_init__(self):
        if not self.rho > 0:
            raise ValueError("rho must be positive")
        if not (self.rel_tol > 0 and self.inner_lasso_tol > 0 and self.feas_tol > 0):
            raise ValueError("tolerances must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be a positive integer")

    def as_dict(self) -> dict:
        return {"rho": self.rho, "scale_rho": self.scale_rho, "max_iters": self.max_iters,
                "rel_tol": self.rel_tol, "feas_tol": self.feas_tol,
                "inner_lasso_tol": self.inner_lasso_tol, "inner_max_sweeps": self.inner_max_sweeps,
                "init": "zeros" if self.init is None else "warm"}


class AdmmProblem:
    """Gram matrices and factorizations for one (data, penalty, rho) triple."""

    def __init__(self, data: Dataset, cfg: PenaltyConfig, rho: float = 1.0):
        x, m1, m2, y = data.x, data.m1, data.m2, data.y
        self.cfg = cfg
        self.rho = float(rho)
        self.n = data.n
        self.xx = float(x @ x)
        self.xm1 = x @ m1
        self.xm2 = x @ m2
        self.xy = float(x @ y)
        self.g11 = m1.T @ m1
        self.g12 = m1.T @ m2
        self.g22 = m2.T @ m2
        self.m1y = m1.T @ y
        self.m2y = m2.T @ y
        self.yy = float(y @ y)
        self.tr11 = float(np.trace(self.g11))
        self.tr22 = float(np.trace(self.g22))
        self._c11 = cho_factor(self.g11 + self.rho * np.eye(data.p1))
        self._c22 = cho_factor(self.g22 + self.rho * np.eye(data.p2))

    def solve11(self, rhs):
        return cho_solve(self._c11, rhs)

    def solve22(self, rhs):
        return cho_solve(self._c22, rhs)

    def loss(self, beta, theta, zeta, pi, lam, delta) -> float:
        """Same value as :func:`model.loss`, from the cached Gram matrices."""
        l1 = self.tr11 - 2.0 * beta @ self.xm1 + self.xx * beta @ beta
        lx = self.xm1 @ lam
        l2 = (self.tr22 + self.xx * zeta @ zeta + np.sum(lam * (self.g11 @ lam))
              - 2.0 * zeta @ self.xm2 - 2.0 * np.sum(lam * self.g12) + 2.0 * zeta @ lx)
        l3 = (self.yy + self.xx * delta * delta + theta @ self.g11 @ theta + pi @ self.g22 @ pi
              - 2.0 * delta * self.xy - 2.0 * theta @ self.m1y - 2.0 * pi @ self.m2y
              + 2.0 * delta * (theta @ self.xm1) + 2.0 * delta * (pi @ self.xm2)
              + 2.0 * theta @ self.g12 @ pi)
        return float(l1 + l2 + l3)

    def residual_gradients(self, coef: Coefficients):
        """Dual values that make ``coef`` (with relaxed == primal) an ADMM fixed point."""
        tau1 = self.xm1 - self.xx * coef.beta
        r3_m1 = self.m1y - self.xm1 * coef.delta - self.g11 @ coef.theta - self.g12 @ coef.pi
        tau3 = self.xm2 - self.xx * coef.zeta - coef.lam.T @ self.xm1
        r3_m2 = self.m2y - self.xm2 * coef.delta - self.g12.T @ coef.theta - self.g22 @ coef.pi
        return tau1, r3_m1, tau3, r3_m2


@dataclass
class AdmmState:
    """Primal blocks, relaxed copies (``*_t``) and unscaled duals ``tau1..tau4``."""

    beta: np.ndarray
    theta: np.ndarray
    zeta: np.ndarray
    pi: np.ndarray
    lam: np.ndarray
    delta: float
    beta_t: np.ndarray
    theta_t: np.ndarray
    zeta_t: np.ndarray
    pi_t: np.ndarray
    tau1: np.ndarray
    tau2: np.ndarray
    tau3: np.ndarray
    tau4: np.ndarray
    rho: float = 1.0

    @classmethod
    def zeros(cls, p1, p2, rho=1.0):
        z1, z2 = np.zeros(p1), np.zeros(p2)
        return cls(z1.copy(), z1.copy(), z2.copy(), z2.copy(), np.zeros((p1, p2)), 0.0,
                   z1.copy(), z1.copy(), z2.copy(), z2.copy(),
                   z1.copy(), z1.copy(), z2.copy(), z2.copy(), rho)

    @classmethod
    def warm(cls, prob: AdmmProblem, coef: Coefficients):
        tau1, tau2, tau3, tau4 = prob.residual_gradients(coef)
        b, t, z, p = (np.array(v) for v in (coef.beta, coef.theta, coef.zeta, coef.pi))
        return cls(b, t, z, p, np.array(coef.lam), coef.delta,
                   b.copy(), t.copy(), z.copy(), p.copy(), tau1, tau2, tau3, tau4, prob.rho)

    @property
    def coef(self) -> Coefficients:
        return Coefficients(self.beta, self.theta, self.zeta, self.pi, self.lam, self.delta)

    @property
    def aux(self) -> Relaxed:
        return Relaxed(self.beta_t, self.theta_t, self.zeta_t, self.pi_t)

    def relaxed_coef(self) -> Coefficients:
        """Relaxed copies (exact zeros) combined with Lambda and delta."""
        return Coefficients(self.beta_t, self.theta_t, self.zeta_t, self.pi_t, self.lam, self.delta)

    def max_violation(self) -> float:
        return float(max(np.max(np.abs(self.beta - self.beta_t), initial=0.0),
                         np.max(np.abs(self.theta - self.theta_t), initial=0.0),
                         np.max(np.abs(self.zeta - self.zeta_t), initial=0.0),
                         np.max(np.abs(self.pi - self.pi_t), initial=0.0)))

    def primal_residuals(self) -> dict:
        return {
            "beta": float(np.linalg.norm(self.beta - self.beta_t)),
            "theta": float(np.linalg.norm(self.theta - self.theta_t)),
            "zeta": float(np.linalg.norm(self.zeta - self.zeta_t)),
            "pi": float(np.linalg.norm(self.pi - self.pi_t)),
        }


def relaxed_penalty(cfg: PenaltyConfig, beta_t, theta_t, zeta_t, pi_t, lam, delta) -> float:
    p = cfg.kappa1 * np.sum(pathway_penalty(beta_t, theta_t, cfg.nu1))
    p += cfg.kappa2 * np.sum(pathway_penalty(zeta_t, pi_t, cfg.nu2))
    p += cfg.mu1 * (np.sum(np.abs(beta_t)) + np.sum(np.abs(theta_t)))
    p += cfg.mu2 * (np.sum(np.abs(zeta_t)) + np.sum(np.abs(pi_t)))
    p += cfg.kappa3 * np.sum(np.abs(lam)) + cfg.kappa4 * abs(delta)
    return float(p)


def state_objective(prob: AdmmProblem, s: AdmmState) -> float:
    """Loss on the primal blocks plus P1/P2 on the relaxed copies and P3."""
    half_loss = 0.5 * prob.loss(s.beta, s.theta, s.zeta, s.pi, s.lam, s.delta)
    return half_loss + relaxed_penalty(prob.cfg, s.beta_t, s.theta_t, s.zeta_t, s.pi_t, s.lam, s.delta)


def augmented_lagrangian(prob: AdmmProblem, s: AdmmState) -> float:
    value = state_objective(prob, s)
    for primal, relaxed, tau in ((s.beta, s.beta_t, s.tau1), (s.theta, s.theta_t, s.tau2),
                                 (s.zeta, s.zeta_t, s.tau3), (s.pi, s.pi_t, s.tau4)):
        h = primal - relaxed
        value += float(h @ tau) + 0.5 * prob.rho * float(h @ h)
    return value


def admm_step(prob: AdmmProblem, s: AdmmState, opts: FitOptions) -> bool:
    """One full Gauss-Seidel sweep, in place. Returns False if the Lambda Lasso hit its budget."""
    s.beta = solvers.update_beta(prob, s)
    s.theta = solvers.update_theta(prob, s)
    s.zeta = solvers.update_zeta(prob, s)
    s.pi = solvers.update_pi(prob, s)
    s.delta = solvers.update_delta(prob, s)
    s.lam, _, lasso_ok = solvers.update_lambda(prob, s, opts.inner_lasso_tol, opts.inner_max_sweeps)
    s.beta_t, s.theta_t = solvers.update_beta_theta_tilde(prob, s)
    s.zeta_t, s.pi_t = solvers.update_zeta_pi_tilde(prob, s)
    rho = prob.rho
    s.tau1 = s.tau1 + rho * (s.beta - s.beta_t)
    s.tau2 = s.tau2 + rho * (s.theta - s.theta_t)
    s.tau3 = s.tau3 + rho * (s.zeta - s.zeta_t)
    s.tau4 = s.tau4 + rho * (s.pi - s.pi_t)
    return lasso_ok


def active_sets(coef: Coefficients, threshold: float = ZERO_THRESHOLD):
    """Index sets of nonzero path products ``beta_j theta_j``, ``zeta_k pi_k``, ``beta_j lam_jk pi_k``.

    The third set is returned as an ``(m, 2)`` integer array of ``(j, k)`` pairs.
    """
    b = np.abs(coef.beta) > threshold
    t = np.abs(coef.theta) > threshold
    z = np.abs(coef.zeta) > threshold
    p = np.abs(coef.pi) > threshold
    lam = np.abs(coef.lam) > threshold
    a1 = np.flatnonzero(b & t)
    a2 = np.flatnonzero(z & p)
    a3 = np.argwhere(b[:, None] & lam & p[None, :])
    return a1, a2, a3


@dataclass
class FitResult:
    coef: Coefficients
    objective_trace: np.ndarray
    iterations: int
    converged: bool
    primal_residuals: dict
    active_sets: tuple
    cfg: PenaltyConfig
    warnings: list = field(default_factory=list)
    state: Optional[AdmmState] = None

    @property
    def n_active(self) -> int:
        return sum(len(a) for a in self.active_sets)

    @property
    def objective(self) -> float:
        return float(self.objective_trace[-1])


def effective_rho(data: Dataset, opts: FitOptions) -> float:
    return opts.rho * (data.n - 1) if opts.scale_rho else opts.rho


def fit(data: Dataset, cfg: PenaltyConfig, opts: FitOptions = FitOptions()) -> FitResult:
    """Minimize ``loss / 2 + P1 + P2 + P3`` on standardized ``data``.

    Stops once the relative change of the tracked objective drops below
    ``opts.rel_tol`` (relative to ``max(1, |previous|)``) while the relaxed
    copies agree with the primal blocks to ``opts.feas_tol``, or after
    ``opts.max_iters`` sweeps. The returned coefficients take beta, theta, zeta
    and pi from the relaxed copies, which carry exact zeros.
    """
    if not data.standardized:
        raise NotStandardized("fit expects a standardized dataset; call standardize() first")
    prob = AdmmProblem(data, cfg, effective_rho(data, opts))
    if opts.init is None:
        state = AdmmState.zeros(data.p1, data.p2, prob.rho)
    else:
        opts.init.check_against(data)
        state = AdmmState.warm(prob, opts.init)

    warnings = []
    trace = []
    previous = state_objective(prob, state)
    converged = False
    it = 0
    for it in range(1, opts.max_iters + 1):
        if not admm_step(prob, state, opts) and not warnings:
            warnings.append(f"Lambda lasso hit {opts.inner_max_sweeps} sweeps at iteration {it}")
        current = state_objective(prob, state)
        trace.append(current)
        if (abs(current - previous) / max(1.0, abs(previous)) < opts.rel_tol
                and state.max_violation() < opts.feas_tol):
            converged = True
            break
        previous = current
    if not converged:
        log.debug("ADMM stopped at max_iters=%d without meeting rel_tol", opts.max_iters)
    coef = state.relaxed_coef()
    return FitResult(
        coef=coef,
        objective_trace=np.asarray(trace),
        iterations=it,
        converged=converged,
        primal_residuals=state.primal_residuals(),
        active_sets=active_sets(coef),
        cfg=cfg,
        warnings=warnings,
        state=state,
    )
