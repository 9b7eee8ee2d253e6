"""Per-epoch heavy-tail indicator, phase segmentation and the stop rule."""

import math
from dataclasses import dataclass, field, fields
from enum import Enum

import numpy as np

from .calibration import threshold_d_star
from .errors import DegenerateSampleError, InvalidInputError
from .powerlaw import DEFAULT_MIN_TAIL, fit_exponential, loglik_ratio, select_xmin
from .spectra import Spectrum

DEFAULT_C = 2.0
DEFAULT_MIN_TAIL_FRACTION = 0.5
DEFAULT_PATIENCE = 20


@dataclass(frozen=True)
class EpochRecord:
    """Fit summary for one checkpoint.

    ``indicator`` (``d_star - d_tilde``) and ``heavy_tailed``
    (``d_tilde <= d_star``) are derived, never passed in.
    """

    epoch: int
    alpha: float
    x_min: float
    n_tail: int
    d_tilde: float
    d_star: float
    r_exp: float
    p_value: float
    indicator: float = field(init=False)
    heavy_tailed: bool = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "indicator", self.d_star - self.d_tilde)
        object.__setattr__(self, "heavy_tailed", bool(self.d_tilde <= self.d_star))

    @classmethod
    def input_fields(cls):
        return [f.name for f in fields(cls) if f.init]


@dataclass(frozen=True)
class Trajectory:
    records: tuple
    model_label: str = ""

    def __post_init__(self):
        records = tuple(self.records)
        if not records:
            raise InvalidInputError("trajectory is empty")
        epochs = [r.epoch for r in records]
        if any(b <= a for a, b in zip(epochs, epochs[1:])):
            raise InvalidInputError("trajectory epochs must be strictly increasing")
        object.__setattr__(self, "records", records)

    def __len__(self):
        return len(self.records)

    @property
    def epochs(self):
        return np.array([r.epoch for r in self.records])

    def column(self, name):
        return np.array([getattr(r, name) for r in self.records], dtype=np.float64)


@dataclass(frozen=True)
class PhaseRules:
    """Thresholds for turning alpha/x_min curves into phase boundaries.

    window: records per rolling window.
    alpha_std_max: rolling std of alpha below which alpha counts as stable.
    alpha_ceiling: alpha must also sit below this value.
    xmin_slope_min: least-squares slope of x_min (per record) that counts as an upward trend.
    """

    window: int = 5
    alpha_std_max: float = 0.25
    alpha_ceiling: float = 3.0
    xmin_slope_min: float = 0.0

    def __post_init__(self):
        if int(self.window) < 2:
            raise InvalidInputError("window must be at least 2 records")


@dataclass(frozen=True)
class PhaseSegmentation:
    """Phase I covers epochs ``<= phase1_end``, phase II up to ``phase2_end``, phase III the rest."""

    phase1_end: int
    phase2_end: int
    rules: PhaseRules

    def phase_of(self, epoch):
        if epoch <= self.phase1_end:
            return 1
        if epoch <= self.phase2_end:
            return 2
        return 3


class StopMode(str, Enum):
    OFFLINE = "offline"
    ONLINE = "online"


@dataclass(frozen=True)
class StopDecision:
    stop_epoch: int
    peak_indicator: float
    mode: StopMode
    triggered: bool


def fit_spectrum(spectrum, min_tail=DEFAULT_MIN_TAIL, min_tail_fraction=DEFAULT_MIN_TAIL_FRACTION):
    """Power-law fit whose tail holds at least ``max(min_tail, ceil(min_tail_fraction * n_positive))`` values.

    ``d* = c / sqrt(n)`` shrinks slowly, so on short tails almost any smooth
    spectrum passes; requiring the tail to cover a fixed share of the
    spectrum keeps the verdict meaningful. ``min_tail_fraction=0`` gives the
    unrestricted cutoff scan.
    """
    if not isinstance(spectrum, Spectrum):
        spectrum = Spectrum.from_values(spectrum)
    n_pos = int(np.count_nonzero(spectrum.eigenvalues > 0))
    floor = max(int(min_tail), math.ceil(min_tail_fraction * n_pos))
    return select_xmin(spectrum, min(floor, n_pos) if n_pos >= min_tail else min_tail)


def evaluate_epoch(
    spectrum,
    c=DEFAULT_C,
    min_tail=DEFAULT_MIN_TAIL,
    epoch=0,
    min_tail_fraction=DEFAULT_MIN_TAIL_FRACTION,
):
    """Fit the spectral tail (see :func:`fit_spectrum`) and compute the heavy-tail indicator."""
    fit = fit_spectrum(spectrum, min_tail, min_tail_fraction)
    try:
        cmp = loglik_ratio(fit.tail, fit, fit_exponential(fit.tail))
        r_exp, p_value = cmp.r, cmp.p_value
    except DegenerateSampleError:
        r_exp, p_value = 0.0, 1.0
    return EpochRecord(
        epoch=int(epoch),
        alpha=fit.alpha,
        x_min=fit.x_min,
        n_tail=fit.n_tail,
        d_tilde=fit.ks_d,
        d_star=threshold_d_star(c, fit.n_tail),
        r_exp=r_exp,
        p_value=p_value,
    )


def stop_epoch(trajectory, mode=StopMode.OFFLINE, patience=DEFAULT_PATIENCE):
    """Epoch at which the heavy-tail indicator peaks.

    offline: global argmax (earliest on ties); triggered iff the peak is positive.
    online: records are read in order; the decision fires at the first record
    where the running maximum is positive and has not improved for
    ``patience`` consecutive records. ``patience=math.inf`` never fires.
    The stop epoch is the argmax seen so far (offline argmax if never fired).
    """
    mode = StopMode(mode)
    ind = trajectory.column("indicator")
    epochs = trajectory.epochs
    if mode is StopMode.OFFLINE:
        best = int(np.argmax(ind))
        return StopDecision(int(epochs[best]), float(ind[best]), mode, bool(ind[best] > 0))

    best, stale = 0, 0
    for i in range(len(ind)):
        if i > 0:
            if ind[i] > ind[best]:
                best, stale = i, 0
            else:
                stale += 1
        if ind[best] > 0 and stale >= patience:
            return StopDecision(int(epochs[best]), float(ind[best]), mode, True)
    return StopDecision(int(epochs[best]), float(ind[best]), mode, False)


def _rolling_slope(y, w):
    """Least-squares slope of each length-``w`` window, indexed by window end."""
    t = np.arange(w, dtype=np.float64)
    t -= t.mean()
    windows = np.lib.stride_tricks.sliding_window_view(y, w)
    return windows @ t / np.dot(t, t)


def classify_phases(trajectory, rules=None):
    """Split a trajectory into the three training phases.

    Phase I ends at the first record whose trailing window of alpha values
    has std below ``alpha_std_max`` and whose alpha is below
    ``alpha_ceiling``. Phase III starts at the first later record where the
    trailing-window slope of x_min exceeds ``xmin_slope_min`` and stays above
    it for ``window`` consecutive records. Boundaries that never occur are
    clamped to the last epoch. Windows count records, not epochs.
    """
    rules = rules or PhaseRules()
    w = int(rules.window)
    n = len(trajectory)
    if n < 2 * w:
        raise InvalidInputError(f"trajectory has {n} records; need at least {2 * w} for window {w}")
    epochs = trajectory.epochs
    alpha = trajectory.column("alpha")
    x_min = trajectory.column("x_min")
    last = n - 1

    std = np.lib.stride_tricks.sliding_window_view(alpha, w).std(axis=1)
    stable = (std < rules.alpha_std_max) & (alpha[w - 1:] < rules.alpha_ceiling)
    hits = np.flatnonzero(stable)
    p1 = int(hits[0]) + w - 1 if hits.size else last

    p3 = None
    rising = _rolling_slope(x_min, w) > rules.xmin_slope_min
    for k in range(max(p1 + 1, w - 1), n - w + 1):
        if np.all(rising[k - w + 1:k + 1]):
            p3 = k
            break
    p2 = p3 - 1 if p3 is not None else last
    return PhaseSegmentation(int(epochs[p1]), int(epochs[max(p2, p1)]), rules)
