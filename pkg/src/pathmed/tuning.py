"""Modified BIC and grid search over the shared penalty level."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .admm import FitOptions, FitResult, fit
from .errors import PathmedError
from .model import Dataset, PenaltyConfig, loss, mask_label, parse_mask

log = logging.getLogger(__name__)

# name -> (mask, mu/kappa ratio)
PRESETS = {
    "P2P3": ("P2P3", 1.0),
    "P1P3": ("P1P3", 0.0),
    "P1P2P3-1": ("P1P2P3", 1.0),
    "P1P2P3-2": ("P1P2P3", 0.1),
}


@dataclass(frozen=True)
class TuningPlan:
    """Grid of shared ``kappa`` values with ``mu = ratio * kappa``.

    ``kappa_grid=None`` builds the default grid per dataset: ``n_grid``
    log-spaced values spanning ``span * kappa_max``.
    """

    kappa_grid: Optional[tuple] = None
    ratio: float = 0.1
    mask: frozenset = field(default_factory=lambda: parse_mask("P1P2P3"))
    nu: tuple = (2.0, 2.0)
    rho: float = 1.0
    n_grid: int = 30
    span: tuple = (1e-3, 1e1)
    warm_start: bool = True

    def __post_init__(self):
        object.__setattr__(self, "mask", parse_mask(self.mask))
        if self.ratio < 0:
            raise ValueError("ratio must be nonnegative")
        if self.kappa_grid is not None:
            grid = tuple(float(k) for k in np.atleast_1d(self.kappa_grid))
            if not grid:
                raise ValueError("kappa grid is empty")
            if any(k <= 0 for k in grid) or any(b <= a for a, b in zip(grid, grid[1:])):
                raise ValueError("kappa grid must be positive and strictly increasing")
            object.__setattr__(self, "kappa_grid", grid)
        if self.n_grid < 1:
            raise ValueError("n_grid must be positive")

    @classmethod
    def preset(cls, name: str, **kwargs) -> "TuningPlan":
        mask, ratio = PRESETS[name]
        return cls(mask=parse_mask(mask), ratio=ratio, **kwargs)

    def penalty(self, kappa: float) -> PenaltyConfig:
        return PenaltyConfig.shared(kappa, self.ratio, self.mask, self.nu)

    def as_dict(self) -> dict:
        return {"kappa_grid": None if self.kappa_grid is None else list(self.kappa_grid),
                "ratio": self.ratio, "mask": mask_label(self.mask), "nu": list(self.nu),
                "rho": self.rho, "n_grid": self.n_grid, "span": list(self.span),
                "warm_start": self.warm_start}


@dataclass
class GridRecord:
    kappa: float
    bic: float = math.inf
    loss: float = math.nan
    n_active: tuple = (0, 0, 0)
    iterations: int = 0
    converged: bool = False
    error: Optional[str] = None
    result: Optional[FitResult] = None

    @property
    def ok(self) -> bool:
        return self.error is None


def bic(result: FitResult, data: Dataset) -> float:
    """``loss + log(n) * (|A1| + |A2| + |A3|)``.

    With every error variance fixed at one, ``-2 log L`` equals the
    least-squares loss up to a constant, which is dropped.
    """
    result.coef.check_against(data)
    return loss(data, result.coef) + math.log(data.n) * result.n_active


def kappa_max(data: Dataset, plan: TuningPlan, opts: FitOptions = FitOptions(),
              start: float = 1.0, max_steps: int = 60) -> float:
    """Smallest power-of-two multiple of ``start`` whose fit selects no pathway."""
    opts = replace(opts, rho=plan.rho, init=None)

    def empty(kappa):
        return fit(data, plan.penalty(kappa), opts).n_active == 0

    kappa = float(start)
    if empty(kappa):
        for _ in range(max_steps):
            if not empty(kappa / 2.0):
                return kappa
            kappa /= 2.0
        return kappa
    for _ in range(max_steps):
        kappa *= 2.0
        if empty(kappa):
            return kappa
    raise PathmedError(f"no all-zero fit found up to kappa={kappa:g}")


def default_grid(data: Dataset, plan: TuningPlan, opts: FitOptions = FitOptions()) -> np.ndarray:
    kmax = kappa_max(data, plan, opts)
    lo, hi = plan.span
    return np.geomspace(lo * kmax, hi * kmax, plan.n_grid)


def grid_search(data: Dataset, plan: TuningPlan, opts: FitOptions = FitOptions()):
    """Fit every grid value from largest to smallest and keep the lowest BIC.

    Each fit starts from the previous grid point's solution when
    ``plan.warm_start``. BIC ties go to the larger kappa. A grid point that
    raises is recorded with its error and skipped.

    Returns ``(best, records)`` with ``records`` in increasing-kappa order.
    """
    grid = np.asarray(plan.kappa_grid if plan.kappa_grid is not None else default_grid(data, plan, opts))
    base = replace(opts, rho=plan.rho, init=None)
    records = []
    previous = None
    for kappa in grid[::-1]:
        rec = GridRecord(kappa=float(kappa))
        run_opts = replace(base, init=previous.coef) if (plan.warm_start and previous is not None) else base
        try:
            res = fit(data, plan.penalty(kappa), run_opts)
        except (PathmedError, np.linalg.LinAlgError, FloatingPointError, ValueError) as exc:
            log.warning("grid point kappa=%g failed: %s", kappa, exc)
            rec.error = f"{type(exc).__name__}: {exc}"
            records.append(rec)
            continue
        rec.bic = bic(res, data)
        rec.loss = loss(data, res.coef)
        rec.n_active = tuple(len(a) for a in res.active_sets)
        rec.iterations = res.iterations
        rec.converged = res.converged
        rec.result = res
        records.append(rec)
        previous = res
    records.reverse()
    usable = [r for r in records if r.ok]
    if not usable:
        raise PathmedError("every grid point failed")
    # records are increasing in kappa, so scanning from the top keeps the larger kappa on ties
    best = None
    for rec in reversed(usable):
        if best is None or rec.bic < best.bic:
            best = rec
    return best.result, records
