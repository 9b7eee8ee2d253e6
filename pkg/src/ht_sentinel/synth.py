"""Deterministic synthetic data: distributions, random matrices, trajectories.

The trajectory generator stands in for real training checkpoints. It builds
one weight matrix per epoch from a few fixed ingredients and per-epoch
schedules:

* phase I blends a well-conditioned (orthogonal) initialization, perturbed by
  Gaussian noise whose scale jumps from epoch to epoch, with a heavy-tailed
  component ``U @ diag(s) @ V.T`` (orthonormal ``U``, ``V``; power-law ``s``)
  that is faded in. The spectrum starts narrow (a
  steep fitted exponent) and fluctuates strongly.
* phase II is the heavy-tailed component plus a decaying Gaussian bulk, under
  a slowly shrinking overall scale, so the tail cleans up while ``x_min``
  drifts down.
* phase III floors the small singular values at a growing threshold. The
  lower part of the spectrum merges into a bulk, pushing ``x_min`` right and
  the fitted exponent back up.

Per-epoch noise comes from its own stream, so epochs can be generated in any
order or in parallel.
"""

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .calibration import sample_powerlaw
from .errors import InvalidConfigError
from .ingest import ManifestEntry, RunManifest, write_manifest, write_matrix
from .rng import substream
from .spectra import WeightMatrix, esd

SYNTH_STREAM = 2**32 + 2
_DIST, _GAUSS, _HEAVY, _TRAJ_BASE, _TRAJ_EPOCH = 0, 1, 2, 3, 4


def gen_distribution(kind, params, n, seed=0, rng=None):
    """``n`` draws of ``kind`` in {power_law, exponential, log_normal}.

    power_law: ``alpha`` (> 1), ``x_min`` (> 0, default 1).
    exponential: ``lam`` (> 0), ``x_min`` (default 0); inverse transform.
    log_normal: ``mu``, ``sigma`` (> 0).
    """
    params = dict(params or {})
    rng = rng if rng is not None else substream(seed, SYNTH_STREAM, _DIST)
    n = int(n)
    if n < 1:
        raise InvalidConfigError(f"n must be at least 1, got {n}")
    if kind == "power_law":
        return sample_powerlaw(float(params.get("alpha", 2.5)), float(params.get("x_min", 1.0)), n, rng)
    if kind == "exponential":
        lam = float(params.get("lam", 1.0))
        if not lam > 0:
            raise InvalidConfigError(f"lam must be positive, got {lam}")
        return float(params.get("x_min", 0.0)) - np.log1p(-rng.random(n)) / lam
    if kind == "log_normal":
        sigma = float(params.get("sigma", 1.0))
        if not sigma > 0:
            raise InvalidConfigError(f"sigma must be positive, got {sigma}")
        return np.exp(float(params.get("mu", 0.0)) + sigma * rng.standard_normal(n))
    raise InvalidConfigError(f"unknown distribution kind {kind!r}")


def gen_gaussian_matrix(n, m, sigma=1.0, seed=0):
    if n < 1 or m < 1:
        raise InvalidConfigError(f"matrix dimensions must be positive, got {n}x{m}")
    rng = substream(seed, SYNTH_STREAM, _GAUSS)
    return WeightMatrix(sigma * rng.standard_normal((n, m)))


def gen_heavytail_matrix(n, m, tail_alpha, seed=0):
    """Gaussian matrix with power-law column scales ``s_j`` (exponent ``tail_alpha``)."""
    if not tail_alpha > 1:
        raise InvalidConfigError(f"tail_alpha must exceed 1, got {tail_alpha}")
    if n < 1 or m < 1:
        raise InvalidConfigError(f"matrix dimensions must be positive, got {n}x{m}")
    rng = substream(seed, SYNTH_STREAM, _HEAVY)
    g = rng.standard_normal((n, m))
    s = sample_powerlaw(tail_alpha, 1.0, m, rng)
    return WeightMatrix(g * s)


@dataclass(frozen=True)
class TrajectorySpec:
    """Schedule of a synthetic three-phase run.

    ``column_alpha`` is the power-law exponent of the heavy-tailed column
    scales; eigenvalues scale like squared column scales, so their tail
    exponent is ``(column_alpha + 1) / 2``, about 2.44 for the default.
    """

    epochs: int = 205
    phase_boundaries: tuple = (25, 150)
    matrix_dims: tuple = (400, 400)
    seed: int = 7
    column_alpha: float = 3.88
    init_noise: tuple = (0.05, 0.6)
    init_scale: float = 1.4
    fade_power: float = 6.0
    bulk_start: float = 0.5
    bulk_end: float = 0.05
    scale_decay: float = 0.85
    floor_growth: float = 2.0

    def __post_init__(self):
        b1, b2 = self.phase_boundaries
        if self.epochs < 1:
            raise InvalidConfigError("epochs must be at least 1")
        if self.epochs >= 3 and not 1 <= b1 < b2 <= self.epochs:
            raise InvalidConfigError(f"need 1 <= b1 < b2 <= epochs, got {self.phase_boundaries}")
        if not self.column_alpha > 1:
            raise InvalidConfigError("column_alpha must exceed 1")


class _Ingredients:
    def __init__(self, spec):
        n, m = spec.matrix_dims
        rng = substream(spec.seed, SYNTH_STREAM, _TRAJ_BASE)
        self.init = _orthonormal_columns(rng, n, m)
        self.left = _orthonormal_columns(rng, n, m)
        self.right = _orthonormal_columns(rng, m, m)
        self.bulk = rng.standard_normal((n, m)) / math.sqrt(n)
        self.scales = np.sort(sample_powerlaw(spec.column_alpha, 1.0, m, rng))[::-1]

    def heavy(self, floor=1.0):
        return (self.left * np.maximum(self.scales, floor)) @ self.right.T


def _orthonormal_columns(rng, n, m):
    q, r = np.linalg.qr(rng.standard_normal((n, m)))
    return q * np.sign(np.diag(r))


def _epoch_matrix(spec, ing, epoch):
    b1, b2 = spec.phase_boundaries
    n, m = spec.matrix_dims
    if epoch <= b1:
        rng = substream(spec.seed, SYNTH_STREAM, _TRAJ_EPOCH, epoch)
        lo, hi = spec.init_noise
        noise_scale = math.exp(rng.uniform(math.log(lo), math.log(hi)))
        noise = rng.standard_normal((n, m)) / math.sqrt(n)
        # cos/sin weights keep the energy of two independent parts constant
        theta = 0.5 * math.pi * (epoch / b1) ** spec.fade_power
        start = spec.init_scale * (ing.init + noise_scale * noise)
        return math.cos(theta) * start + math.sin(theta) * (ing.heavy() + spec.bulk_start * ing.bulk)
    if epoch <= b2:
        frac = (epoch - b1) / (b2 - b1)
        bulk = spec.bulk_start + (spec.bulk_end - spec.bulk_start) * frac
        scale = 1.0 + (spec.scale_decay - 1.0) * frac
        return scale * (ing.heavy() + bulk * ing.bulk)
    frac = (epoch - b2) / max(spec.epochs - b2, 1)
    floor = 1.0 + (spec.floor_growth - 1.0) * frac
    return spec.scale_decay * (ing.heavy(floor) + spec.bulk_end * ing.bulk)


def trajectory_matrices(spec=None):
    """Yield ``(epoch, WeightMatrix)`` for epochs ``1..spec.epochs``."""
    spec = spec or TrajectorySpec()
    ing = _Ingredients(spec)
    for epoch in range(1, spec.epochs + 1):
        yield epoch, WeightMatrix(_epoch_matrix(spec, ing, epoch))


def trajectory_spectra(spec=None):
    return [(epoch, esd(w)) for epoch, w in trajectory_matrices(spec)]


def gen_trajectory(spec=None, out_dir=None, model_label="synthetic", matrix_id="en.0.s.a.v"):
    """Write one NPY file per epoch plus ``manifest.json`` into ``out_dir``.

    Returns the manifest. Without ``out_dir`` nothing is written and the list
    of ``(epoch, Spectrum)`` pairs is returned instead.
    """
    spec = spec or TrajectorySpec()
    if out_dir is None:
        return trajectory_spectra(spec)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    entries = []
    for epoch, w in trajectory_matrices(spec):
        path = out / f"epoch_{epoch:04d}.npy"
        write_matrix(path, w)
        entries.append(ManifestEntry(epoch=epoch, path=path, kind="matrix"))
    manifest = RunManifest(model_label=model_label, matrix_id=matrix_id, entries=tuple(entries), base_dir=out)
    write_manifest(out / "manifest.json", manifest)
    return manifest
