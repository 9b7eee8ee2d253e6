"""Empirical spectral densities of weight matrices."""

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, NumericFailureError

# singular values below this fraction of the largest are treated as exact zeros
SVD_RELATIVE_FLOOR = 1e-12


@dataclass(frozen=True, eq=False)
class WeightMatrix:
    """A dense, finite, real 2-D weight matrix stored as float64."""

    values: np.ndarray

    def __post_init__(self):
        arr = np.array(self.values, dtype=np.float64, copy=True)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise InvalidInputError(f"weight matrix must be 2-D and non-empty, got shape {arr.shape}")
        bad = np.argwhere(~np.isfinite(arr))
        if bad.size:
            raise InvalidInputError(f"non-finite entry at index {tuple(int(i) for i in bad[0])}")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @classmethod
    def from_flat(cls, rows, cols, values):
        values = np.asarray(values, dtype=np.float64)
        if values.size != rows * cols:
            raise InvalidInputError(f"expected {rows * cols} values, got {values.size}")
        return cls(values.reshape(rows, cols))

    @property
    def rows(self):
        return self.values.shape[0]

    @property
    def cols(self):
        return self.values.shape[1]

    @property
    def shape(self):
        return self.values.shape


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Ascending non-negative eigenvalues of W^T W.

    ``source_rows >= source_cols`` records the orientation used.
    """

    eigenvalues: np.ndarray
    source_rows: int
    source_cols: int

    def __post_init__(self):
        ev = np.array(self.eigenvalues, dtype=np.float64, copy=True).ravel()
        if ev.size == 0:
            raise InvalidInputError("spectrum is empty")
        if not np.all(np.isfinite(ev)) or np.any(ev < 0):
            raise InvalidInputError("eigenvalues must be finite and non-negative")
        if np.any(np.diff(ev) < 0):
            ev = np.sort(ev)
        ev.setflags(write=False)
        object.__setattr__(self, "eigenvalues", ev)

    def __len__(self):
        return self.eigenvalues.size

    @property
    def positive(self):
        return self.eigenvalues[self.eigenvalues > 0]

    @classmethod
    def from_values(cls, values):
        ev = np.sort(np.asarray(values, dtype=np.float64).ravel())
        return cls(ev, ev.size, ev.size)


def esd(w):
    """Spectrum of ``w`` from its squared singular values.

    The matrix is transposed first when it has fewer rows than columns, so
    the spectrum always has ``min(rows, cols)`` entries. W^T W is never
    formed explicitly.
    """
    if not isinstance(w, WeightMatrix):
        w = WeightMatrix(w)
    a = w.values if w.rows >= w.cols else w.values.T
    try:
        s = np.linalg.svd(a, compute_uv=False)
    except np.linalg.LinAlgError as exc:
        raise NumericFailureError(f"SVD did not converge: {exc}") from exc
    if s.size and s[0] > 0:
        s = np.where(s < SVD_RELATIVE_FLOOR * s[0], 0.0, s)
    return Spectrum(np.sort(s * s), a.shape[0], a.shape[1])


def ecdf_at(values, x):
    """Right-continuous empirical CDF of ascending ``values`` evaluated at ``x``."""
    values = np.asarray(values, dtype=np.float64).ravel()
    if values.size == 0:
        raise InvalidInputError("ECDF of an empty sample")
    counts = np.searchsorted(values, x, side="right")
    return counts / values.size
