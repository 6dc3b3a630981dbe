"""Data containers, standardization, the least-squares loss and the pathway penalties.

The marginal model links an exposure ``x`` to two ordered mediator blocks and
an outcome::

    M1 = x beta + eps
    M2 = x zeta + M1 Lambda + vartheta
    Y  = x delta + M1 theta + M2 pi + xi

All fitting happens on centred, unit-variance columns.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np
from scipy.linalg import solve_triangular

from .errors import ConstantColumn, DimensionMismatch, SingularMatrix

MASK_TERMS = ("P1", "P2", "P3")

_MEAN_TOL = 1e-10
_SD_TOL = 1e-8


def _frozen(a, ndim):
    arr = np.array(a, dtype=float, copy=True)
    if arr.ndim != ndim:
        raise DimensionMismatch(f"expected {ndim}-d array, got shape {arr.shape}")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class Scaling:
    """Column means and standard deviations removed by :func:`standardize`."""

    x_mean: float
    x_sd: float
    m1_mean: np.ndarray
    m1_sd: np.ndarray
    m2_mean: np.ndarray
    m2_sd: np.ndarray
    y_mean: float
    y_sd: float

    def compose(self, inner: "Scaling") -> "Scaling":
        # self was applied first, inner second
        return Scaling(
            x_mean=self.x_mean + self.x_sd * inner.x_mean,
            x_sd=self.x_sd * inner.x_sd,
            m1_mean=self.m1_mean + self.m1_sd * inner.m1_mean,
            m1_sd=self.m1_sd * inner.m1_sd,
            m2_mean=self.m2_mean + self.m2_sd * inner.m2_mean,
            m2_sd=self.m2_sd * inner.m2_sd,
            y_mean=self.y_mean + self.y_sd * inner.y_mean,
            y_sd=self.y_sd * inner.y_sd,
        )


@dataclass(frozen=True)
class Dataset:
    """Observed sample ``(x, m1, m2, y)``.

    ``m1_names``/``m2_names`` label mediator columns for reporting; they default
    to ``M1_j``/``M2_k``. ``scaling`` holds the original column moments when the
    dataset came out of :func:`standardize`.
    """

    x: np.ndarray
    m1: np.ndarray
    m2: np.ndarray
    y: np.ndarray
    standardized: bool = False
    m1_names: tuple = ()
    m2_names: tuple = ()
    scaling: Optional[Scaling] = None

    def __post_init__(self):
        x = _frozen(self.x, 1)
        y = _frozen(self.y, 1)
        m1 = _frozen(self.m1, 2)
        m2 = _frozen(self.m2, 2)
        n = x.shape[0]
        if not (m1.shape[0] == m2.shape[0] == y.shape[0] == n):
            raise DimensionMismatch(
                f"row counts differ: x={n}, m1={m1.shape[0]}, m2={m2.shape[0]}, y={y.shape[0]}"
            )
        if n < 2:
            raise DimensionMismatch("need at least two observations")
        for name, arr in (("x", x), ("m1", m1), ("m2", m2), ("y", y)):
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"block {name!r} contains non-finite values")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "m1", m1)
        object.__setattr__(self, "m2", m2)
        m1_names = tuple(self.m1_names) or tuple(f"M1_{j + 1}" for j in range(m1.shape[1]))
        m2_names = tuple(self.m2_names) or tuple(f"M2_{k + 1}" for k in range(m2.shape[1]))
        if len(m1_names) != m1.shape[1] or len(m2_names) != m2.shape[1]:
            raise DimensionMismatch("column name count does not match mediator dimension")
        object.__setattr__(self, "m1_names", m1_names)
        object.__setattr__(self, "m2_names", m2_names)
        if self.standardized:
            _check_constant(self)
            for name, arr in self._columns():
                mean = arr.mean(axis=0)
                sd = arr.std(axis=0, ddof=1)
                if np.any(np.abs(mean) >= _MEAN_TOL) or np.any(np.abs(sd - 1.0) >= _SD_TOL):
                    raise ValueError(f"block {name!r} is flagged standardized but is not")

    def _columns(self):
        return (
            ("x", self.x[:, None]),
            ("m1", self.m1),
            ("m2", self.m2),
            ("y", self.y[:, None]),
        )

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def p1(self) -> int:
        return self.m1.shape[1]

    @property
    def p2(self) -> int:
        return self.m2.shape[1]


def _check_constant(data: Dataset):
    for name, arr in data._columns():
        spread = np.ptp(arr, axis=0)
        bad = np.flatnonzero(spread == 0.0)
        if bad.size:
            raise ConstantColumn(name, int(bad[0]))


def standardize(raw: Dataset) -> Dataset:
    """Centre every column and divide by its sample sd (divisor ``n - 1``).

    Raises :class:`ConstantColumn` for a zero-variance column. Original moments
    are kept on ``scaling`` (composed with any earlier scaling) so estimates can
    be mapped back to the input units.
    """
    _check_constant(raw)

    def _std(a):
        mean = a.mean(axis=0)
        sd = a.std(axis=0, ddof=1)
        return (a - mean) / sd, mean, sd

    x, xm, xs = _std(raw.x)
    m1, m1m, m1s = _std(raw.m1)
    m2, m2m, m2s = _std(raw.m2)
    y, ym, ys = _std(raw.y)
    scaling = Scaling(float(xm), float(xs), m1m, m1s, m2m, m2s, float(ym), float(ys))
    if raw.scaling is not None:
        scaling = raw.scaling.compose(scaling)
    return Dataset(
        x=x, m1=m1, m2=m2, y=y, standardized=True,
        m1_names=raw.m1_names, m2_names=raw.m2_names, scaling=scaling,
    )


@dataclass(frozen=True)
class Coefficients:
    """Parameter block ``(beta, theta, zeta, pi, Lambda, delta)`` of the marginal model."""

    beta: np.ndarray
    theta: np.ndarray
    zeta: np.ndarray
    pi: np.ndarray
    lam: np.ndarray
    delta: float = 0.0

    def __post_init__(self):
        beta = _frozen(self.beta, 1)
        theta = _frozen(self.theta, 1)
        zeta = _frozen(self.zeta, 1)
        pi = _frozen(self.pi, 1)
        lam = _frozen(self.lam, 2)
        p1, p2 = beta.shape[0], zeta.shape[0]
        if theta.shape != (p1,) or pi.shape != (p2,) or lam.shape != (p1, p2):
            raise DimensionMismatch(
                f"inconsistent coefficient shapes: beta {beta.shape}, theta {theta.shape}, "
                f"zeta {zeta.shape}, pi {pi.shape}, lam {lam.shape}"
            )
        delta = float(self.delta)
        for arr in (beta, theta, zeta, pi, lam):
            if not np.all(np.isfinite(arr)):
                raise ValueError("coefficients must be finite")
        if not np.isfinite(delta):
            raise ValueError("coefficients must be finite")
        for name, arr in (("beta", beta), ("theta", theta), ("zeta", zeta), ("pi", pi), ("lam", lam)):
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "delta", delta)

    @classmethod
    def zeros(cls, p1: int, p2: int) -> "Coefficients":
        return cls(np.zeros(p1), np.zeros(p1), np.zeros(p2), np.zeros(p2), np.zeros((p1, p2)), 0.0)

    @property
    def p1(self) -> int:
        return self.beta.shape[0]

    @property
    def p2(self) -> int:
        return self.zeta.shape[0]

    def check_against(self, data: Dataset):
        if self.p1 != data.p1 or self.p2 != data.p2:
            raise DimensionMismatch(
                f"coefficients are ({self.p1}, {self.p2}) but data has ({data.p1}, {data.p2})"
            )

    def to_original_scale(self, scaling: Scaling) -> "Coefficients":
        """Map standardized-scale coefficients back to the units described by ``scaling``."""
        sx, sy = scaling.x_sd, scaling.y_sd
        s1, s2 = scaling.m1_sd, scaling.m2_sd
        return Coefficients(
            beta=self.beta * s1 / sx,
            theta=self.theta * sy / s1,
            zeta=self.zeta * s2 / sx,
            pi=self.pi * sy / s2,
            lam=self.lam * s2[None, :] / s1[:, None],
            delta=self.delta * sy / sx,
        )


class Relaxed(NamedTuple):
    """Relaxed copies of ``(beta, theta, zeta, pi)`` carried by the ADMM splitting."""

    beta: np.ndarray
    theta: np.ndarray
    zeta: np.ndarray
    pi: np.ndarray


def parse_mask(mask) -> frozenset:
    """Accept ``"P1P2P3"``, ``"P1,P3"`` or an iterable of term names."""
    if isinstance(mask, str):
        text = mask.upper().replace(",", "").replace("+", "").replace(" ", "")
        terms = set()
        for i in range(0, len(text), 2):
            terms.add(text[i:i + 2])
    else:
        terms = {str(t).upper() for t in mask}
    unknown = terms - set(MASK_TERMS)
    if unknown:
        raise ValueError(f"unknown penalty terms {sorted(unknown)}; expected a subset of {MASK_TERMS}")
    return frozenset(terms)


def mask_label(mask) -> str:
    return "".join(t for t in MASK_TERMS if t in mask)


@dataclass(frozen=True)
class PenaltyConfig:
    """Tuning parameters of the three penalties.

    Weights belonging to a term outside ``mask`` are zeroed on construction.
    """

    nu1: float = 2.0
    nu2: float = 2.0
    kappa1: float = 0.0
    kappa2: float = 0.0
    kappa3: float = 0.0
    kappa4: float = 0.0
    mu1: float = 0.0
    mu2: float = 0.0
    mask: frozenset = field(default_factory=lambda: frozenset(MASK_TERMS))

    def __post_init__(self):
        mask = parse_mask(self.mask)
        object.__setattr__(self, "mask", mask)
        if self.nu1 < 0.5 or self.nu2 < 0.5:
            raise ValueError("nu1 and nu2 must be >= 1/2 for the relaxed penalty to be convex")
        for name in ("kappa1", "kappa2", "kappa3", "kappa4", "mu1", "mu2"):
            value = float(getattr(self, name))
            if not value >= 0.0:
                raise ValueError(f"{name} must be nonnegative, got {value}")
            object.__setattr__(self, name, value)
        if "P1" not in mask:
            object.__setattr__(self, "kappa1", 0.0)
            object.__setattr__(self, "kappa2", 0.0)
        if "P2" not in mask:
            object.__setattr__(self, "mu1", 0.0)
            object.__setattr__(self, "mu2", 0.0)
        if "P3" not in mask:
            object.__setattr__(self, "kappa3", 0.0)
            object.__setattr__(self, "kappa4", 0.0)

    @classmethod
    def shared(cls, kappa: float, ratio: float, mask="P1P2P3", nu=(2.0, 2.0)) -> "PenaltyConfig":
        """All kappas equal ``kappa``, both mus equal ``ratio * kappa``."""
        mu = ratio * kappa
        return cls(nu1=nu[0], nu2=nu[1], kappa1=kappa, kappa2=kappa, kappa3=kappa,
                   kappa4=kappa, mu1=mu, mu2=mu, mask=parse_mask(mask))

    def with_kappa(self, kappa: float, ratio: float) -> "PenaltyConfig":
        return PenaltyConfig.shared(kappa, ratio, self.mask, (self.nu1, self.nu2))

    def as_dict(self) -> dict:
        return {
            "nu1": self.nu1, "nu2": self.nu2,
            "kappa1": self.kappa1, "kappa2": self.kappa2, "kappa3": self.kappa3, "kappa4": self.kappa4,
            "mu1": self.mu1, "mu2": self.mu2, "mask": mask_label(self.mask),
        }


def pathway_penalty(a, b, nu):
    """Elementwise relaxed product penalty ``|ab| + nu (a^2 + b^2)``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return np.abs(a * b) + nu * (a * a + b * b)


def residuals(data: Dataset, coef: Coefficients):
    """Residual blocks of the three regressions of the marginal model."""
    coef.check_against(data)
    x = data.x
    r1 = data.m1 - np.outer(x, coef.beta)
    r2 = data.m2 - np.outer(x, coef.zeta) - data.m1 @ coef.lam
    r3 = data.y - x * coef.delta - data.m1 @ coef.theta - data.m2 @ coef.pi
    return r1, r2, r3


def loss(data: Dataset, coef: Coefficients) -> float:
    """Sum of squared residuals over the M1, M2 and Y equations (unit error covariances)."""
    r1, r2, r3 = residuals(data, coef)
    return float(np.sum(r1 * r1) + np.sum(r2 * r2) + r3 @ r3)


def penalty_value(coef: Coefficients, cfg: PenaltyConfig, aux: Optional[Relaxed] = None) -> float:
    """P1 + P2 + P3.

    The P1/P2 terms are evaluated on ``aux`` when given (the ADMM relaxed copies);
    P3 always uses ``coef.lam`` and ``coef.delta``.
    """
    src = aux if aux is not None else coef
    beta, theta, zeta, pi = (np.asarray(v, dtype=float) for v in (src.beta, src.theta, src.zeta, src.pi))
    if beta.shape != coef.beta.shape or zeta.shape != coef.zeta.shape:
        raise DimensionMismatch("relaxed copies do not match coefficient dimensions")
    p1 = cfg.kappa1 * np.sum(pathway_penalty(beta, theta, cfg.nu1))
    p1 += cfg.kappa2 * np.sum(pathway_penalty(zeta, pi, cfg.nu2))
    p2 = cfg.mu1 * (np.sum(np.abs(beta)) + np.sum(np.abs(theta)))
    p2 += cfg.mu2 * (np.sum(np.abs(zeta)) + np.sum(np.abs(pi)))
    p3 = cfg.kappa3 * np.sum(np.abs(coef.lam)) + cfg.kappa4 * abs(coef.delta)
    return float(p1 + p2 + p3)


def objective(data: Dataset, coef: Coefficients, cfg: PenaltyConfig) -> float:
    """Relaxed penalized objective ``loss / 2 + P1 + P2 + P3``."""
    return 0.5 * loss(data, coef) + penalty_value(coef, cfg)


@dataclass(frozen=True)
class SequentialTruth:
    """Parameters of the fully ordered structural model.

    ``phi`` and ``psi`` are strictly upper triangular within-modality adjacency
    matrices; ``xi1``/``xi2`` are the diagonal error covariances (given as
    vectors of variances or diagonal matrices).
    """

    alpha: np.ndarray
    phi: np.ndarray
    gamma: np.ndarray
    omega: np.ndarray
    psi: np.ndarray
    theta: np.ndarray
    pi: np.ndarray
    delta: float
    xi1: np.ndarray
    xi2: np.ndarray
    sigma2: float = 1.0

    def __post_init__(self):
        alpha = _frozen(self.alpha, 1)
        gamma = _frozen(self.gamma, 1)
        p1, p2 = alpha.shape[0], gamma.shape[0]
        phi = _frozen(self.phi, 2)
        psi = _frozen(self.psi, 2)
        omega = _frozen(self.omega, 2)
        xi1 = np.asarray(self.xi1, dtype=float)
        xi2 = np.asarray(self.xi2, dtype=float)
        xi1 = _frozen(np.diag(xi1) if xi1.ndim == 1 else xi1, 2)
        xi2 = _frozen(np.diag(xi2) if xi2.ndim == 1 else xi2, 2)
        if phi.shape != (p1, p1) or psi.shape != (p2, p2) or omega.shape != (p1, p2):
            raise DimensionMismatch("sequential model matrices have inconsistent shapes")
        if xi1.shape != (p1, p1) or xi2.shape != (p2, p2):
            raise DimensionMismatch("error covariances have inconsistent shapes")
        for name, m in (("phi", phi), ("psi", psi)):
            if np.any(np.tril(m) != 0.0):
                raise ValueError(f"{name} must be strictly upper triangular")
        for name, m in (("xi1", xi1), ("xi2", xi2)):
            d = np.diag(m)
            if np.any(m - np.diag(d) != 0.0) or np.any(d <= 0.0):
                raise ValueError(f"{name} must be diagonal with positive entries")
        if not self.sigma2 > 0:
            raise ValueError("sigma2 must be positive")
        theta = _frozen(self.theta, 1)
        pi = _frozen(self.pi, 1)
        if theta.shape != (p1,) or pi.shape != (p2,):
            raise DimensionMismatch("theta/pi have inconsistent shapes")
        for name, arr in (("alpha", alpha), ("gamma", gamma), ("phi", phi), ("psi", psi),
                          ("omega", omega), ("xi1", xi1), ("xi2", xi2), ("theta", theta), ("pi", pi)):
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "delta", float(self.delta))
        object.__setattr__(self, "sigma2", float(self.sigma2))


def influence_matrix(adjacency: np.ndarray) -> np.ndarray:
    """``(I - A)^{-1}`` for a strictly upper-triangular adjacency ``A``."""
    p = adjacency.shape[0]
    eye = np.eye(p)
    inv = solve_triangular(eye - adjacency, eye, lower=False, unit_diagonal=True)
    if not np.all(np.isfinite(inv)):
        raise SingularMatrix("influence matrix is not finite")
    return inv


def sequential_to_marginal(truth: SequentialTruth):
    """Marginal-model coefficients and error covariances implied by ``truth``.

    Returns ``(coef, sigma1, sigma2)`` with ``beta = alpha (I - Phi)^{-1}``,
    ``zeta = gamma (I - Psi)^{-1}``, ``Lambda = Omega (I - Psi)^{-1}`` and
    ``Sigma = (I - A^T)^{-1} Xi (I - A)^{-1}`` for each modality.
    """
    a1 = influence_matrix(truth.phi)
    a2 = influence_matrix(truth.psi)
    coef = Coefficients(
        beta=truth.alpha @ a1,
        theta=truth.theta,
        zeta=truth.gamma @ a2,
        pi=truth.pi,
        lam=truth.omega @ a2,
        delta=truth.delta,
    )
    sigma1 = a1.T @ truth.xi1 @ a1
    sigma2 = a2.T @ truth.xi2 @ a2
    return coef, sigma1, sigma2

