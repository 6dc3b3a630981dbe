"""Synthetic data generation and replicated Monte-Carlo experiments."""
from __future__ import annotations

import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Optional

import numpy as np

from .admm import FitOptions, active_sets
from .effects import mspe, pathway_effects
from .errors import DimensionMismatch, InfeasibleSparsity
from .model import Coefficients, Dataset, SequentialTruth, influence_matrix, standardize
from .tuning import TuningPlan, grid_search

log = logging.getLogger(__name__)

# magnitudes cycled over each support; theta/pi are rescaled afterwards
EXPOSURE_MAGNITUDES = (0.5, 0.4, 0.3)
OUTCOME_MAGNITUDES = (0.6, 0.8, 1.0)
LAMBDA_MAGNITUDES = (0.5, 0.4)


@dataclass(frozen=True)
class NoiseScales:
    """Error standard deviations of the M1, M2 and Y equations."""

    m1: float = 1.0
    m2: float = 1.0
    y: float = 1.0

    def __post_init__(self):
        if min(self.m1, self.m2, self.y) < 0:
            raise ValueError("noise scales must be nonnegative")


@dataclass(frozen=True)
class SimConfig:
    """Monte-Carlo design.

    ``orthogonal_errors`` projects the mediator errors so that the truth is
    an exact least-squares solution in every sample (``eps`` orthogonal to
    ``[1, X]`` and ``vartheta`` orthogonal to ``[1, X, M1]``); combined with
    ``noise.y = 0`` this is the noiseless-recovery setting.
    """

    n: int = 50
    p1: int = 20
    p2: int = 30
    sparsity: float = 0.1
    target_total_ie: float = 8.0
    noise: NoiseScales = field(default_factory=NoiseScales)
    seed: int = 0
    replications: int = 200
    delta: float = 1.0
    exposure: str = "normal"
    orthogonal_errors: bool = False

    def __post_init__(self):
        if not 0.0 < self.sparsity <= 1.0:
            raise ValueError("sparsity must lie in (0, 1]")
        if min(self.n, self.p1, self.p2, self.replications) < 1:
            raise ValueError("n, p1, p2 and replications must be at least 1")
        if self.exposure not in ("normal", "bernoulli"):
            raise ValueError(f"unknown exposure distribution {self.exposure!r}")
        if isinstance(self.noise, dict):
            object.__setattr__(self, "noise", NoiseScales(**self.noise))

    def support_sizes(self):
        s1 = int(round(self.sparsity * self.p1))
        s2 = int(round(self.sparsity * self.p2))
        if s1 == 0 or s2 == 0:
            raise InfeasibleSparsity(
                f"sparsity {self.sparsity} leaves an empty support (p1={self.p1}, p2={self.p2})")
        return s1, s2

    def as_dict(self) -> dict:
        return asdict(self)


def _cycled(k, pattern):
    return np.array([pattern[i % len(pattern)] for i in range(k)])


def default_truth(config: SimConfig) -> Coefficients:
    """Sparse truth with all three pathway types active and total IE fixed.

    ``beta``/``theta`` share the first ``s1`` M1 indices, ``zeta``/``pi`` the
    first ``s2`` M2 indices and ``Lambda`` is nonzero on their product block.
    ``theta`` and ``pi`` are then scaled by one common factor, which scales
    every indirect effect linearly, to hit ``target_total_ie``.
    """
    s1, s2 = config.support_sizes()
    p1, p2 = config.p1, config.p2
    beta, theta = np.zeros(p1), np.zeros(p1)
    zeta, pi = np.zeros(p2), np.zeros(p2)
    lam = np.zeros((p1, p2))
    beta[:s1] = _cycled(s1, EXPOSURE_MAGNITUDES)
    theta[:s1] = _cycled(s1, OUTCOME_MAGNITUDES)
    zeta[:s2] = _cycled(s2, EXPOSURE_MAGNITUDES)
    pi[:s2] = _cycled(s2, OUTCOME_MAGNITUDES)
    lam[:s1, :s2] = _cycled(s1 * s2, LAMBDA_MAGNITUDES).reshape(s1, s2)
    base = beta @ theta + zeta @ pi + beta @ lam @ pi
    c = config.target_total_ie / base
    return Coefficients(beta=beta, theta=c * theta, zeta=zeta, pi=c * pi, lam=lam, delta=config.delta)


def true_indicators(coef: Coefficients, threshold: float = 0.0):
    """Boolean path indicators ``(ie1 (p1,), ie2 (p2,), ie12 (p1, p2))``."""
    ie1 = np.abs(coef.beta * coef.theta) > threshold
    ie2 = np.abs(coef.zeta * coef.pi) > threshold
    ie12 = np.abs(coef.beta[:, None] * coef.lam * coef.pi[None, :]) > threshold
    return ie1, ie2, ie12


def _exposure(config: SimConfig, rng: np.random.Generator) -> np.ndarray:
    if config.exposure == "bernoulli":
        return rng.integers(0, 2, size=config.n).astype(float) - 0.5
    return rng.standard_normal(config.n)


def _project_out(e: np.ndarray, basis: np.ndarray) -> np.ndarray:
    q, _ = np.linalg.qr(basis)
    return e - q @ (q.T @ e)


def generate(config: SimConfig, truth: Coefficients, rng=None) -> Dataset:
    """Draw one raw dataset from the marginal model.

    ``rng`` defaults to a generator seeded with ``config.seed``.
    """
    if truth.p1 != config.p1 or truth.p2 != config.p2:
        raise DimensionMismatch(
            f"truth is ({truth.p1}, {truth.p2}) but config asks for ({config.p1}, {config.p2})")
    rng = np.random.default_rng(config.seed) if rng is None else rng
    n, ns = config.n, config.noise
    x = _exposure(config, rng)
    eps = ns.m1 * rng.standard_normal((n, config.p1))
    vth = ns.m2 * rng.standard_normal((n, config.p2))
    xi = ns.y * rng.standard_normal(n)
    ones = np.ones((n, 1))
    if config.orthogonal_errors:
        x = x - x.mean()
        eps = _project_out(eps, np.column_stack([ones, x]))
    m1 = np.outer(x, truth.beta) + eps
    if config.orthogonal_errors:
        vth = _project_out(vth, np.column_stack([ones, x, m1]))
    m2 = np.outer(x, truth.zeta) + m1 @ truth.lam + vth
    y = x * truth.delta + m1 @ truth.theta + m2 @ truth.pi + xi
    return Dataset(x=x, m1=m1, m2=m2, y=y)


def generate_sequential(config: SimConfig, truth: SequentialTruth, rng=None) -> Dataset:
    """Draw one raw dataset from the fully ordered structural model."""
    p1, p2 = truth.alpha.shape[0], truth.gamma.shape[0]
    if (p1, p2) != (config.p1, config.p2):
        raise DimensionMismatch(f"truth is ({p1}, {p2}) but config asks for ({config.p1}, {config.p2})")
    rng = np.random.default_rng(config.seed) if rng is None else rng
    n = config.n
    x = _exposure(config, rng)
    eps = rng.standard_normal((n, p1)) * np.sqrt(np.diag(truth.xi1))
    eta = rng.standard_normal((n, p2)) * np.sqrt(np.diag(truth.xi2))
    xi = np.sqrt(truth.sigma2) * rng.standard_normal(n)
    m1 = (np.outer(x, truth.alpha) + eps) @ influence_matrix(truth.phi)
    m2 = (np.outer(x, truth.gamma) + m1 @ truth.omega + eta) @ influence_matrix(truth.psi)
    y = x * truth.delta + m1 @ truth.theta + m2 @ truth.pi + xi
    return Dataset(x=x, m1=m1, m2=m2, y=y)


@dataclass(frozen=True)
class Confusion:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def sensitivity(self) -> float:
        pos = self.tp + self.fn
        return self.tp / pos if pos else 1.0

    @property
    def specificity(self) -> float:
        neg = self.tn + self.fp
        return self.tn / neg if neg else 1.0


def confusion(estimated, truth) -> Confusion:
    est = np.asarray(estimated, dtype=bool).ravel()
    tru = np.asarray(truth, dtype=bool).ravel()
    if est.shape != tru.shape:
        raise DimensionMismatch("indicator vectors differ in length")
    return Confusion(tp=int(np.sum(est & tru)), fp=int(np.sum(est & ~tru)),
                     tn=int(np.sum(~est & ~tru)), fn=int(np.sum(~est & tru)))


def path_confusion(estimated: Coefficients, truth: Coefficients) -> dict:
    """Joint confusion over all path indicators, plus one per path type."""
    est = active_indicators(estimated)
    tru = true_indicators(truth)
    out = {name: confusion(e, t) for name, e, t in zip(("ie1", "ie2", "ie12"), est, tru)}
    out["all"] = confusion(np.concatenate([e.ravel() for e in est]),
                           np.concatenate([t.ravel() for t in tru]))
    return out


def active_indicators(coef: Coefficients):
    """Indicators of the estimated active sets, on the same layout as :func:`true_indicators`."""
    a1, a2, a3 = active_sets(coef)
    ie1 = np.zeros(coef.p1, dtype=bool)
    ie2 = np.zeros(coef.p2, dtype=bool)
    ie12 = np.zeros((coef.p1, coef.p2), dtype=bool)
    ie1[a1] = True
    ie2[a2] = True
    if len(a3):
        ie12[a3[:, 0], a3[:, 1]] = True
    return ie1, ie2, ie12


@dataclass
class ReplicationRecord:
    index: int
    ie_estimate: float = float("nan")
    mse: float = float("nan")
    sensitivity: float = float("nan")
    specificity: float = float("nan")
    mspe: float = float("nan")
    wall_time: float = 0.0
    kappa: float = float("nan")
    n_active: int = 0
    per_type: dict = field(default_factory=dict)
    # per grid index (increasing kappa): (tp, fp, positives, negatives) of the joint indicators
    roc_counts: Optional[np.ndarray] = None
    error: Optional[str] = None

    def row(self) -> dict:
        return {"replication": self.index, "ie_estimate": self.ie_estimate, "mse": self.mse,
                "sensitivity": self.sensitivity, "specificity": self.specificity,
                "mspe": self.mspe, "wall_time": self.wall_time, "kappa": self.kappa,
                "n_active": self.n_active}


@dataclass
class ExperimentReport:
    config: SimConfig
    plan: TuningPlan
    records: list
    roc: np.ndarray  # rows (grid index, fpr, tpr) in increasing-kappa order
    truth: Coefficients

    @property
    def completed(self):
        return [r for r in self.records if r.error is None]

    @property
    def skips(self) -> int:
        return len(self.records) - len(self.completed)

    def mean(self, name: str) -> float:
        vals = [getattr(r, name) for r in self.completed]
        return float(np.mean(vals)) if vals else float("nan")

    def aggregates(self) -> dict:
        names = ("ie_estimate", "mse", "sensitivity", "specificity", "mspe", "wall_time")
        out = {name: self.mean(name) for name in names}
        for kind in ("ie1", "ie2", "ie12"):
            for stat in ("sensitivity", "specificity"):
                vals = [r.per_type[kind][stat] for r in self.completed]
                out[f"{kind}_{stat}"] = float(np.mean(vals)) if vals else float("nan")
        out["replications"] = len(self.completed)
        out["skips"] = self.skips
        return out

    def roc_staircase(self) -> np.ndarray:
        """ROC points sorted by FPR with TPR made non-decreasing (upper envelope)."""
        if self.roc.size == 0:
            return self.roc.reshape(0, 2)
        pts = self.roc[np.lexsort((self.roc[:, 2], self.roc[:, 1]))][:, 1:]
        pts = pts.copy()
        pts[:, 1] = np.maximum.accumulate(pts[:, 1])
        return pts


def replication_seed(seed: int, index: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(seed) & (2**64 - 1), int(index)])


def run_replication(config: SimConfig, plan: TuningPlan, opts: FitOptions,
                    truth: Coefficients, index: int) -> ReplicationRecord:
    rec = ReplicationRecord(index=index)
    start = time.perf_counter()
    try:
        rng = np.random.default_rng(replication_seed(config.seed, index))
        raw = generate(config, truth, rng)
        data = standardize(raw)
        best, records = grid_search(data, plan, opts)
        est = best.coef.to_original_scale(data.scaling)
        ie = pathway_effects(est).ie_total
        conf = path_confusion(est, truth)
        rec.ie_estimate = ie
        rec.mse = (ie - config.target_total_ie) ** 2
        rec.sensitivity = conf["all"].sensitivity
        rec.specificity = conf["all"].specificity
        rec.per_type = {k: {"sensitivity": c.sensitivity, "specificity": c.specificity}
                        for k, c in conf.items() if k != "all"}
        rec.mspe = mspe(est, truth, raw.x)
        rec.kappa = float(next(r.kappa for r in records if r.result is best))
        rec.n_active = best.n_active
        counts = np.full((len(records), 4), -1, dtype=np.int64)
        for g, r in enumerate(records):
            if r.ok:
                c = path_confusion(r.result.coef, truth)["all"]
                counts[g] = (c.tp, c.fp, c.tp + c.fn, c.tn + c.fp)
        rec.roc_counts = counts
    except Exception as exc:  # recorded as a skip, never fatal
        log.warning("replication %d failed: %s", index, exc)
        rec.error = f"{type(exc).__name__}: {exc}"
    rec.wall_time = time.perf_counter() - start
    return rec


def _pooled_roc(records) -> np.ndarray:
    counts = [r.roc_counts for r in records if r.error is None and r.roc_counts is not None]
    if not counts:
        return np.zeros((0, 3))
    width = min(len(c) for c in counts)
    rows = []
    for g in range(width):
        usable = np.array([c[g] for c in counts if c[g, 0] >= 0])
        if len(usable) == 0:
            continue
        tp, fp, pos, neg = usable.sum(axis=0)
        rows.append((g, fp / neg if neg else 0.0, tp / pos if pos else 1.0))
    return np.array(rows, dtype=float)


def _run_chunk(args):
    config, plan, opts, truth, indices = args
    return [run_replication(config, plan, opts, truth, i) for i in indices]


def run_experiment(config: SimConfig, plan: TuningPlan, opts: FitOptions = FitOptions(),
                   truth: Optional[Coefficients] = None, workers: int = 1) -> ExperimentReport:
    """Replicate generate, standardize, tune and score ``config.replications`` times.

    Replication ``i`` draws from its own stream derived from ``(seed, i)``, so
    results do not depend on ``workers``.
    """
    truth = default_truth(config) if truth is None else truth
    indices = list(range(config.replications))
    if workers <= 1:
        records = [run_replication(config, plan, opts, truth, i) for i in indices]
    else:
        chunks = [indices[w::workers] for w in range(workers)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = [r for part in pool.map(_run_chunk, [(config, plan, opts, truth, c) for c in chunks])
                       for r in part]
        records.sort(key=lambda r: r.index)
    return ExperimentReport(config=config, plan=plan, records=records,
                            roc=_pooled_roc(records), truth=truth)


def with_n(config: SimConfig, n: int) -> SimConfig:
    return replace(config, n=n)
