"""KL divergence estimation for data with both continuous and discrete columns.

The divergence factors into a discrete part plus a weighted sum of
conditional continuous parts:

    D(p || q) = sum_key p(key) * D(p_c(. | key) || q_c(. | key))
                + sum_key p(key) * log(p(key) / q(key)),

where `key` ranges over combinations of the discrete column values.  Both
parts are estimated on the stratified samples: the combination frequencies by
relative counts, the conditional continuous divergences by the bias-reduced
nearest-neighbour estimator applied within each stratum.

Strata are identified by tuples of category *labels*, not raw integer codes:
two datasets loaded from separate files may encode the same label with
different codes, and estimation must pair strata by what the categories mean.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Dataset
from .errors import DataError, DivergenceInfiniteError, StratumError
from .kld import KlEstimate, _sum_sequential, kld_est_bc

__all__ = ["Stratification", "stratify", "kld_est_discrete", "kld_est_mixed"]


@dataclass(frozen=True)
class Stratification:
    """Alignment of two samples on their discrete-column combinations.

    `strata` lists, for every combination observed in x (in first-appearance
    order), the label tuple and the row indices carrying it in x and in y;
    `p_hat` and `q_hat` are the matching relative frequencies.  Combinations
    that occur only in y are not listed, so q_hat may sum to less than 1.
    """

    strata: tuple[tuple[tuple[str, ...], np.ndarray, np.ndarray], ...]
    p_hat: np.ndarray
    q_hat: np.ndarray

    @property
    def keys(self) -> tuple[tuple[str, ...], ...]:
        return tuple(key for key, _, _ in self.strata)


def _row_label_keys(ds: Dataset, name: str) -> list[tuple[str, ...]]:
    disc_pos = ds.discrete_positions()
    if disc_pos and ds.missing[:, disc_pos].any():
        raise DataError(f"sample {name} has missing values in discrete columns")
    cols = []
    for j in range(ds.d_discrete):
        labels = ds.category_labels[j]
        cols.append([labels[c] for c in ds.discrete[:, j]])
    if not cols:
        return [() for _ in range(ds.n_rows)]
    return list(zip(*cols))


def _check_schemas(x: Dataset, y: Dataset):
    if x.schema != y.schema:
        raise DataError(
            f"schema mismatch: x has {[(c.name, c.kind) for c in x.schema]}, "
            f"y has {[(c.name, c.kind) for c in y.schema]}"
        )


def stratify(x: Dataset, y: Dataset) -> Stratification:
    """Group both samples by their discrete-value combinations.

    Combinations are ordered by first appearance in x, which keeps the
    result independent of how categories happen to be coded.
    """
    _check_schemas(x, y)
    x_keys = _row_label_keys(x, "x")
    y_keys = _row_label_keys(y, "y")

    x_groups: dict[tuple[str, ...], list[int]] = {}
    for i, key in enumerate(x_keys):
        x_groups.setdefault(key, []).append(i)
    y_groups: dict[tuple[str, ...], list[int]] = {}
    for i, key in enumerate(y_keys):
        y_groups.setdefault(key, []).append(i)

    n = x.n_rows
    m = y.n_rows
    strata = []
    p_hat = []
    q_hat = []
    for key, rows in x_groups.items():
        y_rows = y_groups.get(key, [])
        strata.append((key, np.asarray(rows, dtype=np.intp),
                       np.asarray(y_rows, dtype=np.intp)))
        p_hat.append(len(rows) / n)
        q_hat.append(len(y_rows) / m)
    return Stratification(tuple(strata), np.asarray(p_hat), np.asarray(q_hat))


def kld_est_discrete(p_hat, q_hat, keys=None) -> float:
    """Plug-in divergence sum(p * log(p / q)) between two aligned pmfs, in nats.

    Zero p entries contribute zero regardless of q.  A positive p entry with
    q = 0 means the divergence is infinite and raises
    :class:`~kldiv.errors.DivergenceInfiniteError`; `keys`, when given, names
    the offending entry in that error.
    """
    p = np.asarray(p_hat, dtype=np.float64)
    q = np.asarray(q_hat, dtype=np.float64)
    if p.shape != q.shape or p.ndim != 1:
        raise DataError(f"pmf shape mismatch: {p.shape} vs {q.shape}")
    bad = (p > 0) & (q == 0)
    if bad.any():
        i = int(np.flatnonzero(bad)[0])
        raise DivergenceInfiniteError(keys[i] if keys is not None else i)
    pos = p > 0
    terms = np.zeros_like(p)
    terms[pos] = p[pos] * np.log(p[pos] / q[pos])
    return _sum_sequential(terms)


def kld_est_mixed(x: Dataset, y: Dataset) -> KlEstimate:
    """Estimate D(p || q) from complete samples with mixed column kinds.

    value = sum_strata p_hat(key) * kld_est_bc(x_cont | key, y_cont | key)
            + kld_est_discrete(p_hat, q_hat)

    Reduces exactly to :func:`~kldiv.kld.kld_est_bc` when there are no
    discrete columns and to :func:`kld_est_discrete` when there are no
    continuous ones.  Every combination observed in x must occur in y
    (otherwise the estimate is infinite), and must have at least two x rows
    for the within-stratum continuous estimator to be defined.
    """
    _check_schemas(x, y)
    if x.missing.any() or y.missing.any():
        raise DataError("kld_est_mixed requires complete data (no missing cells)")
    n, m, d = x.n_rows, y.n_rows, x.d

    if x.d_discrete == 0:
        return kld_est_bc(x.continuous, y.continuous)

    strat = stratify(x, y)
    # one upfront pass so size problems surface before any heavy estimation
    for key, x_rows, y_rows in strat.strata:
        if y_rows.size < 1:
            raise DivergenceInfiniteError(key)
        if x_rows.size < 2:
            raise StratumError(key, int(x_rows.size))

    disc_part = kld_est_discrete(strat.p_hat, strat.q_hat, keys=strat.keys)
    if x.d_continuous == 0:
        return KlEstimate(value=disc_part, n=n, m=m, d=d)

    terms = []
    for (key, x_rows, y_rows), p in zip(strat.strata, strat.p_hat):
        est = kld_est_bc(x.continuous[x_rows], y.continuous[y_rows])
        terms.append(p * est.value)
    return KlEstimate(value=_sum_sequential(terms) + disc_part, n=n, m=m, d=d)
