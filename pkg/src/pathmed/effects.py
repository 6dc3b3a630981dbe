"""Pathway-effect decomposition and predicted pathway values."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import Coefficients, Scaling


@dataclass(frozen=True)
class PathwayEffects:
    """Per-path and total effects of moving the exposure from ``x_star`` to ``x``.

    ``ie1_per_path[j] = beta_j theta_j (x - x*)``, ``ie2_per_path[k] = zeta_k pi_k (x - x*)``
    and ``ie12_per_path[j, k] = beta_j lam_jk pi_k (x - x*)``.
    """

    ie1_per_path: np.ndarray
    ie2_per_path: np.ndarray
    ie12_per_path: np.ndarray
    ie1_total: float
    ie2_total: float
    ie12_total: float
    de: float
    te: float

    @property
    def ie_total(self) -> float:
        return self.ie1_total + self.ie2_total + self.ie12_total

    def ranked_paths(self, m1_names=None, m2_names=None):
        """Nonzero per-path effects as dicts (1-based ``j``/``k``), sorted by decreasing magnitude."""
        p1, p2 = self.ie12_per_path.shape
        m1_names = m1_names or [f"M1_{j + 1}" for j in range(p1)]
        m2_names = m2_names or [f"M2_{k + 1}" for k in range(p2)]
        rows = []
        for j in np.flatnonzero(self.ie1_per_path):
            rows.append({"type": "IE1", "path": ["X", m1_names[j], "Y"], "j": int(j) + 1,
                         "effect": float(self.ie1_per_path[j])})
        for k in np.flatnonzero(self.ie2_per_path):
            rows.append({"type": "IE2", "path": ["X", m2_names[k], "Y"], "k": int(k) + 1,
                         "effect": float(self.ie2_per_path[k])})
        for j, k in np.argwhere(self.ie12_per_path != 0):
            rows.append({"type": "IE12", "path": ["X", m1_names[j], m2_names[k], "Y"],
                         "j": int(j) + 1, "k": int(k) + 1, "effect": float(self.ie12_per_path[j, k])})
        rows.sort(key=lambda r: -abs(r["effect"]))
        return rows


def pathway_effects(coef: Coefficients, x: float = 1.0, x_star: float = 0.0,
                    scaling: Scaling | None = None) -> PathwayEffects:
    """Effects on the fitting scale, or on the original scale when ``scaling`` is given."""
    if scaling is not None:
        coef = coef.to_original_scale(scaling)
    contrast = float(x) - float(x_star)
    ie1 = coef.beta * coef.theta * contrast
    ie2 = coef.zeta * coef.pi * contrast
    ie12 = coef.beta[:, None] * coef.lam * coef.pi[None, :] * contrast
    ie1_total = float(np.sum(ie1))
    ie2_total = float(np.sum(ie2))
    ie12_total = float(np.sum(ie12))
    de = coef.delta * contrast
    te = de + ie1_total + ie2_total + ie12_total
    return PathwayEffects(ie1, ie2, ie12, ie1_total, ie2_total, ie12_total, de, te)


def predicted_values(coef: Coefficients, x):
    """Predicted outcome contributions through M1 only, M2 only, both, and in total.

    ``x`` may be a scalar or an array of exposures.
    """
    x = np.asarray(x, dtype=float)
    v1 = x * float(coef.beta @ coef.theta)
    v2 = x * float(coef.zeta @ coef.pi)
    v3 = x * float(coef.beta @ coef.lam @ coef.pi)
    return v1, v2, v3, v1 + v2 + v3


def mspe(fitted: Coefficients, truth: Coefficients, x_sample) -> float:
    """Mean over ``x_sample`` of ``(V_hat - V_true)^2``; the direct path is excluded."""
    v_hat = predicted_values(fitted, x_sample)[3]
    v_true = predicted_values(truth, x_sample)[3]
    return float(np.mean((v_hat - v_true) ** 2))
