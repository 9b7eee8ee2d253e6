"""Monte Carlo calibration of the heavy-tail threshold constant.

Under the null hypothesis the tail is an exact power law. For each
(exponent, tail size) cell we draw ``runs`` synthetic tails, refit the
exponent with the cutoff held at its true value, and record the normalized
KS statistic ``S = d * sqrt(n_tail)``. The recommended constant ``C`` is a
round number that bounds the pooled S values, giving the threshold
``d* = C / sqrt(n_tail)``.

Replicate ``r`` of cell ``c`` (cells enumerated exponent-major) draws from
stream ``(seed, c, r)``; see :mod:`ht_sentinel.rng`.
"""

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import DomainError, InvalidConfigError
from .powerlaw import _ks_from_log_ratios
from .rng import substream, thread_count

SCHEMA = "ht-sentinel/v1"
QUANTILE_LEVELS = (0.5, 0.95, 0.99, 0.999, 0.9999)


def powerlaw_log_ratio(u, alpha0):
    """``ln(x / x_min)`` for the inverse-transform draw with uniform ``u``."""
    return -np.log1p(-np.asarray(u, dtype=np.float64)) / (alpha0 - 1.0)


def powerlaw_from_uniform(u, alpha0, x_min):
    """Inverse-transform map ``x_min * (1 - u)**(-1 / (alpha0 - 1))``."""
    if not alpha0 > 1:
        raise InvalidConfigError(f"alpha0 must exceed 1, got {alpha0}")
    if not x_min > 0:
        raise InvalidConfigError(f"x_min must be positive, got {x_min}")
    return x_min * np.power(1.0 - np.asarray(u, dtype=np.float64), -1.0 / (alpha0 - 1.0))


def sample_powerlaw(alpha0, x_min, n, rng):
    """``n`` i.i.d. power-law draws from generator ``rng`` (one uniform per draw)."""
    if int(n) < 1:
        raise InvalidConfigError(f"n must be at least 1, got {n}")
    return powerlaw_from_uniform(rng.random(int(n)), alpha0, x_min)


def threshold_d_star(c, n_tail):
    """Heavy-tail acceptance threshold ``c / sqrt(n_tail)``."""
    if n_tail < 1:
        raise DomainError(f"n_tail must be positive, got {n_tail}")
    if not c > 0:
        raise DomainError(f"c must be positive, got {c}")
    return c / math.sqrt(n_tail)


@dataclass(frozen=True)
class CalibrationConfig:
    """Monte Carlo grid and the rule that turns pooled S values into ``C``.

    ``recommended_c`` is the smallest multiple of ``c_grid_step`` (never
    below ``c_floor``) that is at least the ``selection_quantile`` of the
    pooled S values. The defaults (99.99% quantile, half-integer grid) give a
    round bound on the far tail of the histogram. The sample maximum is a
    poor choice: over 10^5 draws it moves by several tenths between seeds.
    """

    alphas: tuple = (1.5, 2.0, 2.5, 3.0)
    n_tails: tuple = (100, 200, 300)
    runs: int = 10000
    x_min: float = 1.0
    seed: int = 20240229
    selection_quantile: float = 0.9999
    c_grid_step: float = 0.5
    c_floor: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "alphas", tuple(float(a) for a in self.alphas))
        object.__setattr__(self, "n_tails", tuple(int(n) for n in self.n_tails))
        if not self.alphas or not self.n_tails:
            raise InvalidConfigError("alphas and n_tails must be non-empty")
        if any(not a > 1 for a in self.alphas):
            raise InvalidConfigError(f"every alpha must exceed 1, got {self.alphas}")
        if any(n < 2 for n in self.n_tails):
            raise InvalidConfigError(f"every n_tail must be at least 2, got {self.n_tails}")
        if int(self.runs) < 1:
            raise InvalidConfigError(f"runs must be at least 1, got {self.runs}")
        if not self.x_min > 0:
            raise InvalidConfigError(f"x_min must be positive, got {self.x_min}")
        if not 0 < self.selection_quantile <= 1:
            raise InvalidConfigError("selection_quantile must lie in (0, 1]")
        if not self.c_grid_step > 0:
            raise InvalidConfigError("c_grid_step must be positive")
        if not 0 <= int(self.seed) < 2**64:
            raise InvalidConfigError("seed must be a 64-bit unsigned integer")

    @property
    def cells(self):
        return [(a, n) for a in self.alphas for n in self.n_tails]


@dataclass(frozen=True, eq=False)
class CalibrationCell:
    alpha: float
    n_tail: int
    s_values: np.ndarray = field(repr=False)

    @property
    def quantiles(self):
        return summarize(self.s_values)


@dataclass(frozen=True, eq=False)
class CalibrationResult:
    config: CalibrationConfig
    cells: tuple
    recommended_c: float

    @property
    def pooled(self):
        return np.sort(np.concatenate([c.s_values for c in self.cells]))

    @property
    def pooled_quantiles(self):
        return summarize(self.pooled)

    def to_dict(self, include_samples=False):
        cfg = asdict(self.config)
        cfg["alphas"] = list(cfg["alphas"])
        cfg["n_tails"] = list(cfg["n_tails"])
        cells = []
        for cell in self.cells:
            entry = {"alpha": cell.alpha, "n_tail": cell.n_tail, "quantiles": cell.quantiles}
            if include_samples:
                entry["s_values"] = [float(s) for s in cell.s_values]
            cells.append(entry)
        return {
            "schema": SCHEMA,
            "config": cfg,
            "cells": cells,
            "pooled_quantiles": self.pooled_quantiles,
            "recommended_c": self.recommended_c,
        }

    def to_json(self, include_samples=False):
        return json.dumps(self.to_dict(include_samples), indent=2, sort_keys=True) + "\n"

    def histogram(self, bins=50, per_cell=False):
        """Histogram rows ``(cell_label, bin_left, bin_right, count)`` over shared edges."""
        pooled = self.pooled
        hi = max(float(pooled[-1]), self.recommended_c)
        edges = np.linspace(0.0, hi, bins + 1)
        groups = [("pooled", pooled)]
        if per_cell:
            groups += [(f"alpha={c.alpha:g},n_tail={c.n_tail}", c.s_values) for c in self.cells]
        rows = []
        for label, values in groups:
            counts, _ = np.histogram(values, bins=edges)
            rows += [(label, float(edges[i]), float(edges[i + 1]), int(counts[i])) for i in range(bins)]
        return rows

    def histogram_csv(self, bins=50, per_cell=False):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["cell", "bin_left", "bin_right", "count"])
        for label, left, right, count in self.histogram(bins, per_cell):
            writer.writerow([label, repr(left), repr(right), count])
        return buf.getvalue()


def summarize(s_values):
    s = np.asarray(s_values, dtype=np.float64)
    out = {f"q{level * 100:g}": float(np.quantile(s, level)) for level in QUANTILE_LEVELS}
    out["max"] = float(s.max())
    return out


def simulate_cell(alpha0, n_tail, runs, seed, cell_index, x_min=1.0):
    """Sorted S values for one cell.

    The draws are generated directly as log-ratios ``ln(x / x_min)``, so the
    result does not depend on ``x_min`` at all; the exponent is estimated
    with the cutoff fixed at the truth.
    """
    log_r = np.empty((runs, n_tail))
    for r in range(runs):
        log_r[r] = powerlaw_log_ratio(substream(seed, cell_index, r).random(n_tail), alpha0)
    log_r.sort(axis=1)
    alpha_hat = 1.0 + n_tail / log_r.sum(axis=1)
    d = _ks_from_log_ratios(log_r, alpha_hat[:, None])
    return np.sort(d * math.sqrt(n_tail))


def select_c(pooled, config):
    q = float(np.quantile(pooled, config.selection_quantile))
    step = config.c_grid_step
    c = math.ceil(q / step - 1e-9) * step
    return round(max(c, config.c_floor), 10)


def run_calibration(config=None, workers=None):
    config = config or CalibrationConfig()

    def run(item):
        index, (alpha, n_tail) = item
        s = simulate_cell(alpha, n_tail, int(config.runs), int(config.seed), index, config.x_min)
        return CalibrationCell(alpha=alpha, n_tail=n_tail, s_values=s)

    items = list(enumerate(config.cells))
    n_workers = min(thread_count(workers), len(items))
    if n_workers == 1:
        cells = [run(item) for item in items]
    else:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            cells = list(pool.map(run, items))
    pooled = np.concatenate([c.s_values for c in cells])
    return CalibrationResult(config=config, cells=tuple(cells), recommended_c=select_c(pooled, config))
