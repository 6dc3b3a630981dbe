"""CSV ingestion and result emission.

Coefficient files are long-form CSVs with 1-based indices. Floats in CSVs
are written with 17 significant digits; JSON uses Python's shortest
round-trip ``repr``, which is also exact.
"""
from __future__ import annotations

import csv
import json
import math
import os
from pathlib import Path

import numpy as np

from . import __version__
from .admm import FitResult
from .effects import PathwayEffects, pathway_effects
from .errors import DimensionMismatch, IoError, NonNumericCell, ParseError, RowCountMismatch
from .model import Coefficients, Dataset
from .simulation import ExperimentReport

BLOCKS = ("beta", "theta", "zeta", "pi")


def fmt(x) -> str:
    return format(float(x), ".17g")


def read_matrix(path):
    """Read a numeric CSV with a header row; returns ``(names, array)``."""
    path = Path(path)
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise ParseError(path, 1, 1, "empty file, expected a header row")
    names = [h.strip() for h in rows[0]]
    if not names or any(not h for h in names):
        raise ParseError(path, 1, 1, "header has an empty column name")
    values = []
    for r, row in enumerate(rows[1:], start=2):
        if not row:
            continue  # tolerate blank trailing lines
        if len(row) != len(names):
            raise ParseError(path, r, min(len(row), len(names)) + 1,
                             f"expected {len(names)} cells, found {len(row)}")
        parsed = []
        for c, cell in enumerate(row, start=1):
            try:
                v = float(cell)
            except ValueError:
                raise NonNumericCell(path, r, c, cell) from None
            if not math.isfinite(v):
                raise NonNumericCell(path, r, c, cell)
            parsed.append(v)
        values.append(parsed)
    return names, np.array(values, dtype=float).reshape(len(values), len(names))


def load_dataset(x_path, m1_path, m2_path, y_path) -> Dataset:
    """Unstandardized dataset from four CSV files; mediator headers become path labels."""
    parts = {key: read_matrix(p) for key, p in
             (("x", x_path), ("m1", m1_path), ("m2", m2_path), ("y", y_path))}
    counts = {key: arr.shape[0] for key, (_, arr) in parts.items()}
    if len(set(counts.values())) != 1:
        raise RowCountMismatch(f"row counts differ across inputs: {counts}")
    for key in ("x", "y"):
        if parts[key][1].shape[1] != 1:
            raise DimensionMismatch(f"{key} file must have exactly one column")
    return Dataset(x=parts["x"][1][:, 0], m1=parts["m1"][1], m2=parts["m2"][1], y=parts["y"][1][:, 0],
                   m1_names=tuple(parts["m1"][0]), m2_names=tuple(parts["m2"][0]))


def _write_csv(path: Path, header, rows):
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            w.writerows(rows)
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def _write_json(path: Path, obj):
    try:
        with open(path, "w") as fh:
            json.dump(_jsonable(obj), fh, indent=2, allow_nan=True)
            fh.write("\n")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (frozenset, set)):
        return sorted(obj)
    return obj


def _prepare_dir(out) -> Path:
    out = Path(out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoError(f"cannot create {out}: {exc}") from exc
    if not os.access(out, os.W_OK):
        raise IoError(f"{out} is not writable")
    return out


def write_coefficients(coef: Coefficients, out, m1_names=None, m2_names=None):
    out = _prepare_dir(out)
    m1_names = list(m1_names or [f"M1_{j + 1}" for j in range(coef.p1)])
    m2_names = list(m2_names or [f"M2_{k + 1}" for k in range(coef.p2)])
    for block, names in zip(BLOCKS, (m1_names, m1_names, m2_names, m2_names)):
        vec = getattr(coef, block)
        _write_csv(out / f"{block}.csv", ["index", "name", "value"],
                   [[i + 1, names[i], fmt(v)] for i, v in enumerate(vec)])
    _write_csv(out / "delta.csv", ["name", "value"], [["delta", fmt(coef.delta)]])
    _write_csv(out / "lambda.csv", ["j", "k", "m1", "m2", "value"],
               [[j + 1, k + 1, m1_names[j], m2_names[k], fmt(coef.lam[j, k])]
                for j, k in np.argwhere(coef.lam != 0)])


def load_coefficients(directory):
    """Inverse of :func:`write_coefficients`; returns ``(coef, m1_names, m2_names)``."""
    directory = Path(directory)

    def long_form(block):
        path = directory / f"{block}.csv"
        try:
            with open(path, newline="") as fh:
                rows = list(csv.DictReader(fh))
        except OSError as exc:
            raise IoError(f"cannot read {path}: {exc}") from exc
        try:
            rows.sort(key=lambda r: int(r["index"]))
            return [r["name"] for r in rows], np.array([float(r["value"]) for r in rows])
        except (KeyError, ValueError, TypeError) as exc:
            raise ParseError(path, 0, 0, f"malformed coefficient file ({exc})") from None

    m1_names, beta = long_form("beta")
    _, theta = long_form("theta")
    m2_names, zeta = long_form("zeta")
    _, pi = long_form("pi")
    lam = np.zeros((beta.size, zeta.size))
    try:
        with open(directory / "lambda.csv", newline="") as fh:
            for r in csv.DictReader(fh):
                lam[int(r["j"]) - 1, int(r["k"]) - 1] = float(r["value"])
        with open(directory / "delta.csv", newline="") as fh:
            delta = float(next(csv.DictReader(fh))["value"])
    except OSError as exc:
        raise IoError(str(exc)) from exc
    except (KeyError, ValueError, IndexError, StopIteration) as exc:
        raise ParseError(directory, 0, 0, f"malformed coefficient file ({exc})") from None
    coef = Coefficients(beta=beta, theta=theta, zeta=zeta, pi=pi, lam=lam, delta=delta)
    return coef, m1_names, m2_names


def effects_summary(eff: PathwayEffects, m1_names=None, m2_names=None) -> dict:
    return {"ie1_total": eff.ie1_total, "ie2_total": eff.ie2_total, "ie12_total": eff.ie12_total,
            "ie_total": eff.ie_total, "de": eff.de, "te": eff.te,
            "paths": eff.ranked_paths(m1_names, m2_names)}


def emit_results(result, out, *, m1_names=None, m2_names=None, extra=None) -> list:
    """Write ``result`` (a FitResult, ExperimentReport or PathwayEffects) under ``out``.

    ``extra`` is merged into the JSON summary (BIC, selected kappa, scale,
    grid table and so on). Returns the written paths.
    """
    out = _prepare_dir(out)
    summary = dict(extra or {})
    written = []
    if isinstance(result, FitResult):
        write_coefficients(result.coef, out, m1_names, m2_names)
        written += [out / f"{b}.csv" for b in (*BLOCKS, "delta", "lambda")]
        summary.update({
            "objective_trace": result.objective_trace,
            "objective": result.objective,
            "iterations": result.iterations,
            "converged": result.converged,
            "active_set_sizes": [len(a) for a in result.active_sets],
            "primal_residuals": result.primal_residuals,
            "penalty": result.cfg.as_dict(),
            "warnings": list(result.warnings),
            "warning_count": len(result.warnings),
        })
        if "effects" not in summary:
            summary["effects"] = effects_summary(pathway_effects(result.coef), m1_names, m2_names)
    elif isinstance(result, ExperimentReport):
        rows = []
        for r in result.records:
            row = r.row()
            rows.append([row["replication"]] + [fmt(row[k]) for k in
                        ("ie_estimate", "mse", "sensitivity", "specificity", "mspe", "wall_time", "kappa")]
                        + [row["n_active"], r.error or ""])
        _write_csv(out / "metrics.csv", ["replication", "ie_estimate", "mse", "sensitivity", "specificity",
                                         "mspe", "wall_time", "kappa", "n_active", "error"], rows)
        _write_csv(out / "roc.csv", ["grid_index", "fpr", "tpr"],
                   [[int(g), fmt(f), fmt(t)] for g, f, t in result.roc])
        _write_csv(out / "roc_staircase.csv", ["fpr", "tpr"],
                   [[fmt(f), fmt(t)] for f, t in result.roc_staircase()])
        written += [out / "metrics.csv", out / "roc.csv", out / "roc_staircase.csv"]
        summary.update({
            "aggregates": result.aggregates(),
            "config": result.config.as_dict(),
            "plan": result.plan.as_dict(),
            "warning_count": result.skips,
            "skipped": [{"replication": r.index, "error": r.error} for r in result.records if r.error],
        })
    elif isinstance(result, PathwayEffects):
        summary.update(effects_summary(result, m1_names, m2_names))
    else:
        raise TypeError(f"cannot emit {type(result).__name__}")
    _write_json(out / "summary.json", summary)
    written.append(out / "summary.json")
    return written


def write_grid_table(records, out):
    out = _prepare_dir(out)
    _write_csv(out / "grid.csv", ["kappa", "bic", "loss", "n_ie1", "n_ie2", "n_ie12",
                                  "iterations", "converged", "error"],
               [[fmt(r.kappa), fmt(r.bic), fmt(r.loss), *r.n_active, r.iterations,
                 int(r.converged), r.error or ""] for r in records])
    return out / "grid.csv"


def write_manifest(out, command, inputs, config, seed=None):
    out = _prepare_dir(out)
    manifest = {"command": command, "inputs": {k: str(Path(v).resolve()) for k, v in inputs.items()},
                "config": config, "seed": seed, "output": str(out.resolve()),
                "version": __version__}
    _write_json(out / "manifest.json", manifest)
    return out / "manifest.json"
