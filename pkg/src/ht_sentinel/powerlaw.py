"""Continuous power-law tail fitting and model comparison.

The workflow follows the usual recipe for empirical power laws: scan every
observed value as a candidate lower cutoff ``x_min``, fit the exponent by
maximum likelihood on the values above it, keep the cutoff whose fit has the
smallest Kolmogorov-Smirnov distance, then compare the tail against
exponential and log-normal alternatives with a normalized likelihood-ratio
test. Goodness of fit comes from a semi-parametric bootstrap.

All computations on a tail go through the log-ratios ``ln(x / x_min)``, which
makes the exponent and the KS distance invariant under rescaling.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy import special

from .errors import (
    DegenerateSampleError,
    DomainError,
    InsufficientTailError,
    InvalidConfigError,
    InvalidInputError,
)
from .rng import substream, thread_count
from .spectra import Spectrum

DEFAULT_MIN_TAIL = 10
DEFAULT_SIGNIFICANCE = 0.1

# stream namespace for bootstrap replicates, disjoint from calibration cell ids
BOOTSTRAP_STREAM = 2**32 + 1

# candidate cutoffs evaluated together in scan_xmin
_SCAN_ROWS = 64


@dataclass(frozen=True, eq=False)
class TailSample:
    """Values at or above ``x_min``, kept in ascending order."""

    values: np.ndarray
    x_min: float

    def __post_init__(self):
        v = np.sort(np.asarray(self.values, dtype=np.float64).ravel())
        x_min = float(self.x_min)
        if not x_min > 0 or not math.isfinite(x_min):
            raise InvalidInputError(f"x_min must be positive and finite, got {x_min}")
        if v.size < 2:
            raise InvalidInputError(f"a tail needs at least 2 values, got {v.size}")
        if not np.all(np.isfinite(v)):
            raise InvalidInputError("tail values must be finite")
        if v[0] < x_min:
            raise InvalidInputError(f"tail value {v[0]} lies below x_min={x_min}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "x_min", x_min)

    @property
    def n_tail(self):
        return self.values.size

    def log_ratios(self):
        return np.log(self.values) - np.log(self.x_min)

    @classmethod
    def above(cls, values, x_min):
        """The sub-sample of ``values`` (a Spectrum or array) that is ``>= x_min``."""
        if isinstance(values, Spectrum):
            values = values.eigenvalues
        values = np.asarray(values, dtype=np.float64)
        return cls(values[values >= x_min], x_min)


@dataclass(frozen=True)
class PowerLawFit:
    alpha: float
    x_min: float
    n_tail: int
    ks_d: float
    log_likelihood: float
    tail: TailSample = field(default=None, repr=False, compare=False)

    def logpdf(self, x):
        return pl_logpdf(x, self.alpha, self.x_min)

    def cdf(self, x):
        return pl_cdf(x, self.alpha, self.x_min)


@dataclass(frozen=True)
class ExponentialFit:
    """Shifted exponential ``lam * exp(-lam * (x - x_min))`` on ``x >= x_min``."""

    lam: float
    x_min: float
    log_likelihood: float

    def logpdf(self, x):
        x = np.asarray(x, dtype=np.float64)
        return np.log(self.lam) - self.lam * (x - self.x_min)


@dataclass(frozen=True)
class LogNormalFit:
    """Log-normal with parameters estimated from untruncated moments of ``ln x``.

    ``logpdf`` renormalizes the density to ``[x_min, inf)`` so that it shares
    its support with the power law; the parameters themselves ignore the
    truncation, which is an approximation.
    """

    mu: float
    sigma: float
    x_min: float
    log_likelihood: float

    def logpdf(self, x):
        return _lognormal_logpdf(x, self.mu, self.sigma, self.x_min)


class Winner(str, Enum):
    POWER_LAW = "power_law"
    ALTERNATIVE = "alternative"
    UNDECIDED = "undecided"


@dataclass(frozen=True)
class ComparisonResult:
    r: float
    normalized_r: float
    p_value: float
    winner: Winner


@dataclass(frozen=True)
class GoodnessOfFit:
    p_value: float
    n_bootstrap: int
    observed_d: float
    replicate_d: np.ndarray = field(default=None, repr=False, compare=False)


def pl_logpdf(x, alpha, x_min):
    x = np.asarray(x, dtype=np.float64)
    return math.log(alpha - 1.0) - math.log(x_min) - alpha * (np.log(x) - math.log(x_min))


def pl_cdf(x, alpha, x_min):
    """CDF ``1 - (x / x_min)**(1 - alpha)`` of the continuous power law."""
    if not alpha > 1:
        raise DomainError(f"alpha must exceed 1, got {alpha}")
    x_arr = np.asarray(x, dtype=np.float64)
    if np.any(x_arr < x_min):
        raise DomainError(f"power-law CDF is defined for x >= x_min={x_min}")
    out = -np.expm1((1.0 - alpha) * (np.log(x_arr) - math.log(x_min)))
    return float(out) if out.ndim == 0 else out


def _alpha_from_logsum(n, log_sum):
    if not log_sum > 0:
        raise DegenerateSampleError("all tail values equal x_min; the exponent is undefined")
    return 1.0 + n / log_sum


def fit_alpha(tail):
    """Maximum-likelihood exponent ``1 + n / sum(ln(x_i / x_min))``."""
    return _alpha_from_logsum(tail.n_tail, float(np.sum(tail.log_ratios())))


def _ks_from_log_ratios(log_r, alpha):
    """KS distance for ascending log-ratios against the power law with ``alpha``.

    The supremum of |ECDF - F| is attained at a sample point, either at the
    top of the ECDF step (i/n) or just below it ((i-1)/n).
    """
    n = log_r.shape[-1]
    cdf = -np.expm1((1.0 - alpha) * log_r)
    i = np.arange(1, n + 1, dtype=np.float64)
    upper = np.max(i / n - cdf, axis=-1)
    lower = np.max(cdf - (i - 1) / n, axis=-1)
    return np.maximum(upper, lower)


def ks_distance(tail, alpha):
    if not alpha > 1:
        raise DomainError(f"alpha must exceed 1, got {alpha}")
    return float(_ks_from_log_ratios(tail.log_ratios(), alpha))


def _pl_loglik(n, log_sum, alpha, x_min):
    return n * math.log(alpha - 1.0) - n * math.log(x_min) - alpha * log_sum


def fit_tail(tail):
    """Power-law fit with the cutoff fixed at ``tail.x_min``."""
    log_r = tail.log_ratios()
    log_sum = float(np.sum(log_r))
    alpha = _alpha_from_logsum(tail.n_tail, log_sum)
    d = float(_ks_from_log_ratios(log_r, alpha))
    return PowerLawFit(
        alpha=alpha,
        x_min=tail.x_min,
        n_tail=tail.n_tail,
        ks_d=d,
        log_likelihood=_pl_loglik(tail.n_tail, log_sum, alpha, tail.x_min),
        tail=tail,
    )


def _positive_sorted(spectrum):
    if isinstance(spectrum, Spectrum):
        x = spectrum.eigenvalues
    else:
        x = np.sort(np.asarray(spectrum, dtype=np.float64).ravel())
    return x[x > 0]


def scan_xmin(values, min_tail=DEFAULT_MIN_TAIL):
    """Evaluate every admissible cutoff.

    Returns ``(x_min, alpha, d)`` arrays, one entry per distinct positive
    value that leaves at least ``min_tail`` points in the tail and a
    non-degenerate sample.
    """
    x = _positive_sorted(values)
    n_total = x.size
    if n_total < max(int(min_tail), 2):
        raise InsufficientTailError(
            f"need at least {max(int(min_tail), 2)} positive values, got {n_total}"
        )
    lx = np.log(x)
    starts = np.flatnonzero(np.r_[True, x[1:] != x[:-1]])
    starts = starts[n_total - starts >= max(int(min_tail), 2)]
    n = (n_total - starts).astype(np.float64)
    suffix = np.r_[np.cumsum(lx[::-1])[::-1], 0.0]
    log_sum = suffix[starts] - n * lx[starts]
    keep = log_sum > 0
    starts, n, log_sum = starts[keep], n[keep], log_sum[keep]
    alpha = 1.0 + n / log_sum
    d = np.empty(starts.size)
    j = np.arange(n_total, dtype=np.float64)
    # Candidates are processed in small row blocks over their own column
    # range, so the work stays close to the n^2 / 2 triangle. For a row with
    # tail size m the two one-sided gaps at point j are t + 1/m - F and F - t
    # (t = rank / m), whose maximum is |1 - h - t - S| + h with h = 1 / (2m)
    # and S = 1 - F the model survival function.
    for lo in range(0, starts.size, _SCAN_ROWS):
        rows = starts[lo:lo + _SCAN_ROWS]
        first = rows[0]
        m = n[lo:lo + _SCAN_ROWS, None]
        half = 0.5 / m
        slope = (1.0 - alpha[lo:lo + _SCAN_ROWS])[:, None]
        g = (1.0 - half + rows[:, None] / m) - j[None, first:] / m
        g -= np.exp(slope * (lx[None, first:] - lx[rows][:, None]))
        np.abs(g, out=g)
        width = rows[-1] - first
        if width:
            head = g[:, :width]
            head[j[None, first:rows[-1]] < rows[:, None]] = -np.inf
        d[lo:lo + _SCAN_ROWS] = g.max(axis=1) + half[:, 0]
    return x[starts], alpha, d


def select_xmin(spectrum, min_tail=DEFAULT_MIN_TAIL):
    """Power-law fit at the KS-optimal cutoff.

    Ties in the KS distance go to the smallest cutoff.
    """
    x_mins, _, d = scan_xmin(spectrum, min_tail)
    if d.size == 0:
        raise InsufficientTailError("no candidate cutoff leaves a non-degenerate tail")
    best = int(np.argmin(d))
    return fit_tail(TailSample.above(_positive_sorted(spectrum), x_mins[best]))


def fit_exponential(tail):
    """MLE rate ``1 / (mean(x) - x_min)`` of the shifted exponential."""
    excess = float(np.mean(tail.values)) - tail.x_min
    if not excess > 0:
        raise DegenerateSampleError("tail mean equals x_min; exponential rate is undefined")
    lam = 1.0 / excess
    n = tail.n_tail
    return ExponentialFit(lam=lam, x_min=tail.x_min, log_likelihood=n * math.log(lam) - lam * excess * n)


def _lognormal_logpdf(x, mu, sigma, x_min):
    x = np.asarray(x, dtype=np.float64)
    lx = np.log(x)
    log_norm = special.log_ndtr((mu - math.log(x_min)) / sigma)
    return (
        -lx
        - math.log(sigma)
        - 0.5 * math.log(2.0 * math.pi)
        - (lx - mu) ** 2 / (2.0 * sigma * sigma)
        - log_norm
    )


def fit_lognormal(tail):
    lx = np.log(tail.values)
    mu = float(np.mean(lx))
    sigma = float(np.std(lx))
    if not sigma > 0:
        raise DegenerateSampleError("all tail values are equal; log-normal sigma is zero")
    ll = float(np.sum(_lognormal_logpdf(tail.values, mu, sigma, tail.x_min)))
    return LogNormalFit(mu=mu, sigma=sigma, x_min=tail.x_min, log_likelihood=ll)


def loglik_ratio(tail, pl, alt, significance=DEFAULT_SIGNIFICANCE):
    """Normalized log-likelihood ratio test, power law against ``alt``.

    ``r > 0`` favours the power law. The p-value is two-sided, computed from
    ``r / (sigma * sqrt(n))`` where ``sigma`` is the (population) standard
    deviation of the pointwise log-likelihood differences.
    """
    diff = np.asarray(pl.logpdf(tail.values)) - np.asarray(alt.logpdf(tail.values))
    r = float(np.sum(diff))
    sigma = float(np.std(diff))
    n = tail.n_tail
    if not sigma > 0:
        return ComparisonResult(r=r, normalized_r=0.0, p_value=1.0, winner=Winner.UNDECIDED)
    z = r / (sigma * math.sqrt(n))
    p = float(special.erfc(abs(z) / math.sqrt(2.0)))
    return ComparisonResult(r=r, normalized_r=z, p_value=p, winner=classify_winner(r, p, significance))


def classify_winner(r, p_value, significance=DEFAULT_SIGNIFICANCE):
    if p_value < significance and r > 0:
        return Winner.POWER_LAW
    if p_value < significance and r < 0:
        return Winner.ALTERNATIVE
    return Winner.UNDECIDED


def _bootstrap_replicate(body, fit, seed, index, min_tail):
    from .calibration import sample_powerlaw

    rng = substream(seed, BOOTSTRAP_STREAM, index)
    parts = []
    if body.size:
        parts.append(body[rng.integers(0, body.size, size=body.size)])
    parts.append(sample_powerlaw(fit.alpha, fit.x_min, fit.n_tail, rng))
    try:
        return select_xmin(np.concatenate(parts), min_tail).ks_d
    except (InsufficientTailError, DegenerateSampleError):
        return math.inf


def bootstrap_pvalue(spectrum, fit, n_bootstrap=1000, seed=0, min_tail=DEFAULT_MIN_TAIL, workers=None):
    """Semi-parametric bootstrap p-value of a power-law fit.

    Each replicate keeps the body/tail split of the data: values below
    ``fit.x_min`` are resampled with replacement from the observed body, the
    ``fit.n_tail`` tail values are drawn from the fitted power law. The
    replicate is refitted from scratch (cutoff scan included) and its KS
    distance recorded. The p-value is the fraction of replicates whose
    distance is at least the observed one; values near 1 mean the power law
    is plausible.

    Replicate ``i`` uses stream ``(seed, BOOTSTRAP_STREAM, i)``, so the result
    does not depend on ``workers``.
    """
    if int(n_bootstrap) < 100:
        raise InvalidConfigError(f"n_bootstrap must be at least 100, got {n_bootstrap}")
    n_bootstrap = int(n_bootstrap)
    x = _positive_sorted(spectrum)
    body = x[x < fit.x_min]

    def run(i):
        return _bootstrap_replicate(body, fit, seed, i, min_tail)

    n_workers = thread_count(workers)
    if n_workers == 1:
        d = np.array([run(i) for i in range(n_bootstrap)])
    else:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            d = np.array(list(pool.map(run, range(n_bootstrap))))
    p = int(np.count_nonzero(d >= fit.ks_d)) / n_bootstrap
    return GoodnessOfFit(p_value=p, n_bootstrap=n_bootstrap, observed_d=fit.ks_d, replicate_d=d)
