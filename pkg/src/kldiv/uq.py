"""Subsampling confidence intervals and convergence-rate diagnostics.

Subsampling (Politis & Romano) re-estimates on many small row subsets drawn
*without replacement*, so replicates never contain repeated rows — which the
nearest-neighbour estimators reject — and approximates the sampling
distribution of tau_n * (theta_hat - theta) by the empirical distribution of
tau_b * (theta_star - theta_hat) over replicates.  Bootstrap resampling
(with replacement) is deliberately not offered.

Replicate r draws its rows from a private RNG stream derived from
(seed, r), so results do not depend on evaluation order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import Dataset, take_rows
from .errors import ConfigError, EstimationError, SubsamplingError
from .kld import KlEstimate

__all__ = [
    "SubsamplingConfig", "SubsampleDistribution", "subsample_distribution",
    "ci_from_distribution", "subsample_ci", "estimate_convergence_rate",
]


@dataclass(frozen=True)
class SubsamplingConfig:
    """Tuning knobs for :func:`subsample_ci`.

    Subsample sizes are ceil(n ** b_exponent) rows of x and
    ceil(m ** b_exponent) rows of y; deviations are scaled by
    tau_b = b_x ** rate_exponent and the interval by tau_n = n ** rate_exponent.
    A replicate whose estimator raises an estimation error is dropped and
    counted; the run aborts when more than `max_failure_frac` of the s
    replicates fail.
    """

    s: int = 1000
    b_exponent: float = 2.0 / 3.0
    rate_exponent: float = 0.5
    alpha: float = 0.05
    seed: int = 0
    max_failure_frac: float = 0.1

    def __post_init__(self):
        if not self.s >= 2:
            raise ConfigError(f"s must be at least 2, got {self.s}")
        if not 0.0 < self.b_exponent < 1.0:
            raise ConfigError(f"b_exponent must lie in (0, 1), got {self.b_exponent}")
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError(f"alpha must lie in (0, 1), got {self.alpha}")
        if not self.rate_exponent > 0.0:
            raise ConfigError(f"rate_exponent must be positive, got {self.rate_exponent}")
        if not 0.0 <= self.max_failure_frac < 1.0:
            raise ConfigError(
                f"max_failure_frac must lie in [0, 1), got {self.max_failure_frac}"
            )
        if not (isinstance(self.seed, (int, np.integer)) and self.seed >= 0):
            raise ConfigError(f"seed must be a non-negative integer, got {self.seed!r}")


@dataclass(frozen=True)
class SubsampleDistribution:
    """Scaled replicate deviations tau_b * (theta_star - theta_hat).

    `values` keeps one entry per successful replicate; `failures` counts the
    dropped ones, so failures + len(values) equals the configured s.
    """

    values: np.ndarray
    b_x: int
    b_y: int
    failures: int


def _estimate_value(est) -> float:
    return float(est.value) if isinstance(est, KlEstimate) else float(est)


def _replicate_deviations(x, y, estimator, theta_hat, b_x, b_y, s,
                          stream_keys, max_failure_frac):
    n, m = x.n_rows, y.n_rows
    values = []
    failures = 0
    for key in stream_keys:
        rng = np.random.default_rng(np.random.SeedSequence(key))
        rows_x = np.sort(rng.choice(n, size=b_x, replace=False))
        rows_y = np.sort(rng.choice(m, size=b_y, replace=False))
        try:
            est = estimator(take_rows(x, rows_x), take_rows(y, rows_y))
        except EstimationError:
            failures += 1
            continue
        values.append(_estimate_value(est) - theta_hat)
    if failures > max_failure_frac * s:
        raise SubsamplingError(
            f"{failures} of {s} subsample replicates failed "
            f"(threshold {max_failure_frac:.0%})", failures, s
        )
    return np.asarray(values, dtype=np.float64), failures


def subsample_distribution(x: Dataset, y: Dataset, estimator,
                           cfg: SubsamplingConfig,
                           theta_hat: float | None = None) -> SubsampleDistribution:
    """Replicate distribution underlying :func:`subsample_ci`.

    `estimator` is called as estimator(x_subset, y_subset) on Datasets and
    may return a :class:`~kldiv.kld.KlEstimate` or a plain float.  The full-
    data estimate is computed first (errors from it propagate unchanged)
    unless a precomputed `theta_hat` is passed in.
    """
    n, m = x.n_rows, y.n_rows
    b_x = math.ceil(n ** cfg.b_exponent)
    b_y = math.ceil(m ** cfg.b_exponent)
    if b_x < 2:
        raise ConfigError(
            f"subsample size b_x={b_x} < 2 (n={n}, b_exponent={cfg.b_exponent})"
        )
    if theta_hat is None:
        theta_hat = _estimate_value(estimator(x, y))
    tau_b = b_x ** cfg.rate_exponent
    keys = [(cfg.seed, r) for r in range(cfg.s)]
    deviations, failures = _replicate_deviations(
        x, y, estimator, theta_hat, b_x, b_y, cfg.s, keys, cfg.max_failure_frac
    )
    return SubsampleDistribution(tau_b * deviations, b_x, b_y, failures)


def ci_from_distribution(theta_hat: float, dist: SubsampleDistribution, n: int,
                         cfg: SubsamplingConfig) -> tuple[float, float]:
    """Turn a replicate distribution into a (1 - alpha) confidence interval.

    With q the empirical quantiles (linear interpolation between order
    statistics) of the scaled deviations and tau_n = n ** rate_exponent,

        CI = [theta_hat - q_{1 - alpha/2} / tau_n,  theta_hat - q_{alpha/2} / tau_n].
    """
    q_lo, q_hi = np.quantile(dist.values, [cfg.alpha / 2.0, 1.0 - cfg.alpha / 2.0])
    tau_n = n ** cfg.rate_exponent
    return (theta_hat - q_hi / tau_n, theta_hat - q_lo / tau_n)


def subsample_ci(x: Dataset, y: Dataset, estimator,
                 cfg: SubsamplingConfig) -> KlEstimate:
    """Point estimate with an asymptotic (1 - alpha) confidence interval."""
    est = estimator(x, y)
    theta_hat = _estimate_value(est)
    dist = subsample_distribution(x, y, estimator, cfg, theta_hat=theta_hat)
    ci = ci_from_distribution(theta_hat, dist, x.n_rows, cfg)
    if not isinstance(est, KlEstimate):
        est = KlEstimate(value=theta_hat, n=x.n_rows, m=y.n_rows, d=x.d)
    return est.with_ci(ci, 1.0 - cfg.alpha)


def estimate_convergence_rate(x: Dataset, y: Dataset, estimator, b_grid,
                              s: int, seed: int) -> float:
    """Empirical convergence-rate exponent of an estimator, via subsampling.

    For each subsample size b in `b_grid` (x gets b rows, y gets
    ceil(m * b / n) to keep the sample-size ratio stable), the IQR of the
    replicate deviations theta_star - theta_hat measures the estimator's
    spread at size b.  If the spread decays like b^(-beta), the least-squares
    slope of log(IQR) against log(b) is -beta; the negated slope is returned.
    """
    b_grid = [int(b) for b in b_grid]
    if len(b_grid) < 3:
        raise ConfigError(f"need at least 3 subsample sizes, got {len(b_grid)}")
    if any(b2 <= b1 for b1, b2 in zip(b_grid, b_grid[1:])):
        raise ConfigError(f"b_grid must be strictly increasing, got {b_grid}")
    n, m = x.n_rows, y.n_rows
    if b_grid[0] < 2 or b_grid[-1] > n:
        raise ConfigError(f"b_grid must lie within [2, n={n}], got {b_grid}")

    theta_hat = _estimate_value(estimator(x, y))
    log_b = []
    log_spread = []
    for b in b_grid:
        b_y = math.ceil(m * b / n)
        keys = [(seed, b, r) for r in range(s)]
        deviations, _ = _replicate_deviations(
            x, y, estimator, theta_hat, b, b_y, s, keys, 0.1
        )
        lo, hi = np.quantile(deviations, [0.25, 0.75])
        iqr = hi - lo
        if not iqr > 0.0:
            raise EstimationError(
                f"degenerate subsample distribution at b={b}: IQR is zero"
            )
        log_b.append(math.log(b))
        log_spread.append(math.log(iqr))
    slope = np.polyfit(log_b, log_spread, 1)[0]
    return float(-slope)
