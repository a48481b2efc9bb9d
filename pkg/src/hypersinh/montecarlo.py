"""Ensemble execution, estimator algebra, and power-law exponent fitting.

Estimates are carried as (count, sum, sum of squared deviations) triples with
Welford/Chan combination, so merging is associative and commutative and the
reduce over substreams is bit-identical regardless of worker count.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import NonPositiveData, WorkerFailure
from .randfields import RngStream


@dataclass(frozen=True)
class Moments:
    """Single-pass moment triple (count, mean, M2)."""

    n: int
    mean: float
    m2: float

    @staticmethod
    def of(values) -> "Moments":
        v = np.asarray(values, dtype=float).ravel()
        n = len(v)
        mean = float(v.mean()) if n else 0.0
        m2 = float(np.sum((v - mean) ** 2)) if n else 0.0
        return Moments(n, mean, m2)

    def merge(self, other: "Moments") -> "Moments":
        if self.n == 0:
            return other
        if other.n == 0:
            return self
        n = self.n + other.n
        delta = other.mean - self.mean
        mean = self.mean + delta * other.n / n
        m2 = self.m2 + other.m2 + delta * delta * self.n * other.n / n
        return Moments(n, mean, m2)


@dataclass(frozen=True)
class MCEstimate:
    mean: float
    stderr: float
    n: int
    seed: int
    stream_range: tuple[int, int]

    @staticmethod
    def from_moments(m: Moments, seed: int, stream_range) -> "MCEstimate":
        se = math.sqrt(m.m2 / (m.n - 1) / m.n) if m.n > 1 else 0.0
        return MCEstimate(m.mean, se, m.n, seed, tuple(stream_range))


def _run_substream(args):
    job, seed, stream_id = args
    try:
        value = job.observable(RngStream(seed, stream_id))
        return stream_id, float(value)
    except Exception as exc:  # surfaced with the substream id for exact replay
        return stream_id, exc


def run_ensemble(job, n_samples: int, seed: int, workers: int = 1) -> MCEstimate:
    """Evaluate job.observable on n_samples deterministic substreams.

    The reduce folds results in substream order, so the merged estimate is
    bit-identical for any worker count.
    """
    if n_samples < 2:
        raise ValueError("need n_samples >= 2")
    tasks = [(job, seed, i) for i in range(n_samples)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_substream, tasks, chunksize=max(1, n_samples // (4 * workers))))
    else:
        results = [_run_substream(t) for t in tasks]
    results.sort(key=lambda r: r[0])
    values = []
    for stream_id, value in results:
        if isinstance(value, Exception):
            raise WorkerFailure(f"substream {stream_id} failed: {value}", substream_id=stream_id)
        values.append(value)
    moments = Moments(0, 0.0, 0.0)
    for v in values:
        moments = moments.merge(Moments.of([v]))
    return MCEstimate.from_moments(moments, seed, (0, n_samples))


@dataclass(frozen=True)
class PowerLawFit:
    exponent: float
    exponent_ci95: float
    intercept: float
    r_squared: float


def fit_power_law(points) -> PowerLawFit:
    """Weighted least squares of log(estimate) against log(x).

    points is a sequence of (x, estimate, stderr); weights come from the
    relative standard errors (uniform if all are zero).  Requires at least
    four strictly positive abscissae.
    """
    pts = [(float(x), float(y), float(se)) for x, y, se in points]
    if len(pts) < 4:
        raise NonPositiveData("power-law fit needs at least 4 abscissae")
    if any(x <= 0 or y <= 0 for x, y, _ in pts):
        raise NonPositiveData("power-law fit needs positive x and estimates")
    lx = np.log([p[0] for p in pts])
    ly = np.log([p[1] for p in pts])
    rel = np.array([p[2] / p[1] for p in pts])
    w = 1.0 / np.where(rel > 0, rel ** 2, np.nan)
    if np.all(np.isnan(w)):
        w = np.ones_like(lx)
    else:
        w = np.where(np.isnan(w), np.nanmax(w), w)
    sw = w.sum()
    xbar = float((w * lx).sum() / sw)
    ybar = float((w * ly).sum() / sw)
    sxx = float((w * (lx - xbar) ** 2).sum())
    sxy = float((w * (lx - xbar) * (ly - ybar)).sum())
    slope = sxy / sxx
    intercept = ybar - slope * xbar
    resid = ly - (intercept + slope * lx)
    # known-variance weighted regression: Var(slope) = 1 / Sxx
    if np.all(rel == 0):
        dof = len(pts) - 2
        var_slope = float((resid ** 2).sum() / dof / ((lx - lx.mean()) ** 2).sum()) if dof > 0 else 0.0
    else:
        var_slope = 1.0 / sxx
    ss_tot = float((w * (ly - ybar) ** 2).sum())
    r2 = 1.0 - float((w * resid ** 2).sum()) / ss_tot if ss_tot > 0 else 1.0
    return PowerLawFit(slope, 1.96 * math.sqrt(var_slope), math.exp(intercept), r2)


def write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def write_json(path, payload) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
