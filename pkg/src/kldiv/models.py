"""Covariate distribution models: margins, Gaussian, and copula variants.

Three surrogate models for a joint covariate distribution are supported:

* ``gaussdist`` — multivariate Gaussian on the original scale;
* ``indepcop``  — independent nonparametric margins (independence copula);
* ``gausscop``  — Gaussian copula over nonparametric margins.

Margins are Gaussian-kernel CDF mixtures with Silverman's bandwidth: strictly
increasing, smooth, and invertible by bisection, which is all the copula
pipeline needs from them.  Data mapped through its fitted margins lands on
the uniform scale; a Gaussian copula is fitted there via normal-score
correlations (pairwise-complete, so missing cells are tolerated).

Discrete columns are handled by a joint pmf over the observed category
combinations, with the continuous model fitted per combination when every
stratum is large enough and shared (independent of the discrete part)
otherwise.  Fitted models are immutable, sample deterministically from a
seed, and serialize to JSON.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import elementwise
from scipy.special import ndtr, ndtri

from .data import CONTINUOUS, ColumnSchema, Dataset, make_dataset, schema_from_json
from .errors import ConfigError, ModelError

__all__ = [
    "MarginModel", "GaussDist", "IndepCop", "GaussCop", "DiscreteBlock",
    "FittedModel", "MODEL_KINDS", "fit_margin", "fit_margins", "margin_cdf",
    "margin_quantile", "to_uniform", "fit_gauss_dist", "fit_indep_cop",
    "fit_gauss_cop", "fit_covariate_model", "sample_model",
    "marginalize_columns", "save_model", "load_model",
]

MODEL_KINDS = ("gaussdist", "indepcop", "gausscop")

# dedicated stream tag so model sampling never shares bits with the
# split/mcar streams derived from the same user seed
_STREAM_SAMPLE = 0x73616D70

# uniforms are kept strictly inside (0, 1) before quantile/normal-score maps
_U_TINY = 1e-15

_MODEL_FORMAT = "kldiv-model"
_MODEL_VERSION = 1


# ---------------------------------------------------------------------------
# margins
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MarginModel:
    """One-dimensional distribution model F(t) = mean_i Phi((t - v_i) / h).

    `values` are the sorted training observations, `h` the kernel bandwidth.
    F is strictly increasing and continuous on all of R; outputs destined for
    a copula are clamped into [u_min, u_max] = [1/(2n), 1 - 1/(2n)] so that
    normal scores stay finite.
    """

    values: np.ndarray
    h: float
    u_min: float
    u_max: float

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.ndim != 1 or vals.size < 2 or (np.diff(vals) < 0).any():
            raise ModelError("margin values must be a sorted 1-D array")
        vals = vals.copy()
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)
        if not self.h > 0:
            raise ModelError(f"bandwidth must be positive, got {self.h}")
        if not 0.0 < self.u_min < self.u_max < 1.0:
            raise ModelError(f"bad clamp bounds ({self.u_min}, {self.u_max})")

    @property
    def n(self) -> int:
        return self.values.size


def fit_margin(values, missing=None) -> MarginModel:
    """Fit a margin to the non-missing entries of `values`.

    Bandwidth is Silverman's rule on the available cases,
    h = 0.9 * min(sd, IQR/1.34) * n^(-1/5), floored at 1e-8 times the value
    range so the CDF stays strictly increasing even for clumpy data.
    """
    values = np.asarray(values, dtype=np.float64).reshape(-1)
    if missing is not None:
        values = values[~np.asarray(missing, dtype=bool).reshape(-1)]
    if not np.isfinite(values).all():
        raise ModelError("margin training values must be finite")
    n = values.size
    if n < 5:
        raise ModelError(f"need at least 5 values to fit a margin, got {n}")
    vals = np.sort(values)
    rng_width = vals[-1] - vals[0]
    if rng_width <= 0:
        raise ModelError("margin values have zero spread")
    sd = vals.std(ddof=1)
    q25, q75 = np.quantile(vals, [0.25, 0.75])
    h = 0.9 * min(sd, (q75 - q25) / 1.34) * n ** -0.2
    h = max(h, 1e-8 * rng_width)
    return MarginModel(vals, float(h), 1.0 / (2 * n), 1.0 - 1.0 / (2 * n))


def margin_cdf(margin: MarginModel, t):
    """Evaluate F(t); accepts scalars or arrays, unclamped output in (0, 1)."""
    t = np.asarray(t, dtype=np.float64)
    scalar = t.ndim == 0
    tt = np.atleast_1d(t).astype(np.float64).reshape(-1)
    vals = margin.values
    out = np.empty(tt.size)
    chunk = max(1, 2_000_000 // vals.size)
    for s in range(0, tt.size, chunk):
        block = tt[s:s + chunk, None]
        out[s:s + chunk] = ndtr((block - vals[None, :]) / margin.h).mean(axis=1)
    return float(out[0]) if scalar else out


def margin_quantile(margin: MarginModel, u):
    """Invert the margin CDF: the t with F(t) = u, for u in the open unit interval.

    Brackets each query between Gaussian-tail bounds, narrows through a
    4097-point grid of F evaluations shared by the whole batch, then runs a
    vectorized bracketing root finder to 1e-10 of the training range
    (inverse roundtrip well under 1e-8 on the uniform scale).
    """
    u = np.asarray(u, dtype=np.float64)
    scalar = u.ndim == 0
    uu = np.atleast_1d(u).astype(np.float64).reshape(-1)
    if not ((uu > 0.0) & (uu < 1.0)).all():
        raise ValueError("quantile argument must lie strictly inside (0, 1)")

    vals, h = margin.values, margin.h
    z = ndtri(uu)
    # F(t) <= Phi((t - min v)/h) and F(t) >= Phi((t - max v)/h), so these
    # bracket every quantile exactly
    lo = vals[0] + h * z
    hi = vals[-1] + h * z

    grid = np.linspace(lo.min(), hi.max(), 4097)
    grid_f = margin_cdf(margin, grid)
    j = np.clip(np.searchsorted(grid_f, uu, side="left"), 1, grid.size - 1)
    lo = np.maximum(lo, grid[j - 1])
    hi = np.minimum(hi, grid[j])

    tol = 1e-10 * (vals[-1] - vals[0])

    def offset(t, target):
        return margin_cdf(margin, np.ravel(t)).reshape(np.shape(t)) - target

    res = elementwise.find_root(
        offset, (lo, hi), args=(uu,),
        tolerances=dict(xatol=tol, xrtol=0.0, fatol=0.0, frtol=0.0),
    )
    out = np.asarray(res.x, dtype=np.float64)
    bad = np.nonzero(~np.atleast_1d(res.success))[0]
    for _ in range(80):  # bisection fallback; unused on healthy brackets
        if bad.size == 0:
            break
        mid = 0.5 * (lo[bad] + hi[bad])
        above = margin_cdf(margin, mid) >= uu[bad]
        hi[bad] = np.where(above, mid, hi[bad])
        lo[bad] = np.where(above, lo[bad], mid)
        out[bad] = 0.5 * (lo[bad] + hi[bad])
        bad = bad[hi[bad] - lo[bad] > tol]
    return float(out[0]) if scalar else out


def fit_margins(ds: Dataset) -> tuple[MarginModel, ...]:
    """Fit one margin per continuous column, on its available cases."""
    cont_pos = ds.continuous_positions()
    return tuple(
        fit_margin(ds.continuous[:, j], missing=ds.missing[:, pos])
        for j, pos in enumerate(cont_pos)
    )


def to_uniform(ds: Dataset, margins) -> np.ndarray:
    """Map the continuous columns through their margins onto the uniform scale.

    Returns an (n, d_c) matrix of clamped CDF values, NaN where the input
    cell is missing.
    """
    margins = tuple(margins)
    cont_pos = ds.continuous_positions()
    if len(margins) != len(cont_pos):
        raise ModelError(
            f"{len(margins)} margins supplied for {len(cont_pos)} continuous columns"
        )
    out = np.full((ds.n_rows, len(cont_pos)), np.nan)
    for j, pos in enumerate(cont_pos):
        seen = ~ds.missing[:, pos]
        if seen.any():
            f = margin_cdf(margins[j], ds.continuous[seen, j])
            out[seen, j] = np.clip(f, margins[j].u_min, margins[j].u_max)
    return out


# ---------------------------------------------------------------------------
# continuous model variants
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GaussDist:
    """Multivariate Gaussian on the original scale."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.atleast_1d(np.array(self.mean, dtype=np.float64, copy=True))
        cov = np.atleast_2d(np.array(self.cov, dtype=np.float64, copy=True))
        d = mean.shape[0]
        if cov.shape != (d, d):
            raise ModelError(f"covariance shape {cov.shape} does not match d={d}")
        mean.flags.writeable = False
        cov.flags.writeable = False
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)


@dataclass(frozen=True)
class IndepCop:
    """Independent margins (independence copula)."""

    margins: tuple[MarginModel, ...]

    def __post_init__(self):
        object.__setattr__(self, "margins", tuple(self.margins))


@dataclass(frozen=True)
class GaussCop:
    """Gaussian copula with nonparametric margins."""

    margins: tuple[MarginModel, ...]
    corr: np.ndarray

    def __post_init__(self):
        margins = tuple(self.margins)
        corr = np.atleast_2d(np.array(self.corr, dtype=np.float64, copy=True))
        d = len(margins)
        if corr.shape != (d, d):
            raise ModelError(f"correlation shape {corr.shape} does not match d={d}")
        corr.flags.writeable = False
        object.__setattr__(self, "margins", margins)
        object.__setattr__(self, "corr", corr)


@dataclass(frozen=True)
class DiscreteBlock:
    """Joint pmf over discrete label combinations, with continuous submodels.

    `stratum_models` is either a tuple of continuous variants parallel to
    `keys` (per-stratum fits) or None, meaning the continuous part lives in
    the owning FittedModel's shared variant, independent of the keys.
    """

    keys: tuple[tuple[str, ...], ...]
    pmf: np.ndarray
    stratum_models: tuple | None

    def __post_init__(self):
        keys = tuple(tuple(k) for k in self.keys)
        pmf = np.array(self.pmf, dtype=np.float64, copy=True)
        if pmf.shape != (len(keys),) or (pmf < 0).any():
            raise ModelError("pmf must be a non-negative vector matching keys")
        if keys and abs(pmf.sum() - 1.0) > 1e-9:
            raise ModelError(f"pmf sums to {pmf.sum()}, expected 1")
        if self.stratum_models is not None and len(self.stratum_models) != len(keys):
            raise ModelError("stratum_models must parallel keys")
        pmf.flags.writeable = False
        object.__setattr__(self, "keys", keys)
        object.__setattr__(self, "pmf", pmf)
        if self.stratum_models is not None:
            object.__setattr__(self, "stratum_models", tuple(self.stratum_models))


@dataclass(frozen=True)
class FittedModel:
    """A fitted covariate distribution: continuous variant + discrete block.

    Purely continuous data has `discrete_block = None`; purely discrete data
    has `variant = None`.  The schema and category label table of the
    training data ride along so samples come out as fully formed Datasets.
    """

    kind: str
    schema: tuple[ColumnSchema, ...]
    category_labels: tuple[tuple[str, ...], ...]
    variant: GaussDist | IndepCop | GaussCop | None
    discrete_block: DiscreteBlock | None

    def __post_init__(self):
        if self.kind not in MODEL_KINDS:
            raise ModelError(f"unknown model kind {self.kind!r}")
        object.__setattr__(self, "schema", tuple(self.schema))
        object.__setattr__(
            self, "category_labels",
            tuple(tuple(str(s) for s in col) for col in self.category_labels),
        )


# ---------------------------------------------------------------------------
# fitting
# ---------------------------------------------------------------------------

def _pd_floor(cov: np.ndarray, floor: float) -> np.ndarray:
    """Clip eigenvalues from below; exact no-op when already above the floor."""
    sym = (cov + cov.T) / 2.0
    w, v = np.linalg.eigh(sym)
    if w.min() >= floor:
        return cov
    fixed = (v * np.maximum(w, floor)) @ v.T
    return (fixed + fixed.T) / 2.0


def _fit_gauss_variant(X, miss, allow_missing) -> GaussDist:
    n, d = X.shape
    if miss.any():
        if not allow_missing:
            raise ModelError(
                "gaussdist requires complete data "
                "(pass allow_missing to fit on available cases)"
            )
        mean = np.array([X[~miss[:, j], j].mean() for j in range(d)])
        cov = np.empty((d, d))
        for i in range(d):
            seen = ~miss[:, i]
            if seen.sum() < 2:
                raise ModelError(f"continuous column {i} has fewer than 2 observed values")
            cov[i, i] = X[seen, i].var(ddof=1)
            for j in range(i + 1, d):
                both = seen & ~miss[:, j]
                if both.sum() < 3:
                    raise ModelError(
                        f"columns {i} and {j} share only {int(both.sum())} complete rows"
                    )
                cov[i, j] = cov[j, i] = np.cov(X[both, i], X[both, j], ddof=1)[0, 1]
    else:
        if n <= d:
            raise ModelError(f"need more rows than dimensions to fit a Gaussian ({n} <= {d})")
        mean = X.mean(axis=0)
        cov = np.atleast_2d(np.cov(X, rowvar=False, ddof=1))
    cov = _pd_floor(cov, 1e-10 * np.trace(cov) / d)
    return GaussDist(mean, cov)


def _fit_indep_variant(X, miss) -> IndepCop:
    return IndepCop(tuple(
        fit_margin(X[:, j], missing=miss[:, j]) for j in range(X.shape[1])
    ))


def _normal_scores(X, miss, margins):
    z = np.full(X.shape, np.nan)
    for j, margin in enumerate(margins):
        seen = ~miss[:, j]
        if seen.any():
            f = margin_cdf(margin, X[seen, j])
            z[seen, j] = ndtri(np.clip(f, margin.u_min, margin.u_max))
    return z


def _fit_gausscop_variant(X, miss, margins=None) -> GaussCop:
    d = X.shape[1]
    if margins is None:
        margins = tuple(fit_margin(X[:, j], missing=miss[:, j]) for j in range(d))
    else:
        margins = tuple(margins)
        if len(margins) != d:
            raise ModelError(f"{len(margins)} margins supplied for {d} columns")
    z = _normal_scores(X, miss, margins)
    corr = np.eye(d)
    for i in range(d):
        for j in range(i + 1, d):
            both = ~miss[:, i] & ~miss[:, j]
            if both.sum() < 3:
                raise ModelError(
                    f"columns {i} and {j} share only {int(both.sum())} complete rows"
                )
            r = np.corrcoef(z[both, i], z[both, j])[0, 1]
            if not np.isfinite(r):
                raise ModelError(f"degenerate normal scores in columns {i}, {j}")
            corr[i, j] = corr[j, i] = r
    repaired = _pd_floor(corr, 1e-6)
    if repaired is not corr:
        scale = np.sqrt(np.diag(repaired))
        repaired = repaired / np.outer(scale, scale)
        np.fill_diagonal(repaired, 1.0)
    return GaussCop(margins, repaired)


def _continuous_part(ds: Dataset, rows=None):
    cont_pos = ds.continuous_positions()
    X = ds.continuous
    miss = ds.missing[:, cont_pos] if cont_pos else np.zeros((ds.n_rows, 0), bool)
    if rows is not None:
        X, miss = X[rows], miss[rows]
    return X, miss


def _discrete_keys_available(ds: Dataset):
    """Label-tuple key per row, or None where the discrete part is incomplete."""
    disc_pos = ds.discrete_positions()
    ok = ~ds.missing[:, disc_pos].any(axis=1)
    keys = [None] * ds.n_rows
    labelled = [
        [ds.category_labels[j][c] if c >= 0 else None for c in ds.discrete[:, j]]
        for j in range(ds.d_discrete)
    ]
    for i in np.flatnonzero(ok):
        keys[i] = tuple(col[i] for col in labelled)
    return keys, ok


def _fit_variant_for(kind, X, miss, margins=None):
    if kind == "gaussdist":
        return _fit_gauss_variant(X, miss, allow_missing=False)
    if kind == "indepcop":
        return _fit_indep_variant(X, miss)
    return _fit_gausscop_variant(X, miss, margins)


def fit_covariate_model(ds: Dataset, kind: str, *, allow_missing_gaussdist=False,
                        margins=None) -> FittedModel:
    """Fit one of the named model kinds to a Dataset.

    gaussdist demands purely continuous, complete data (available-case
    fitting is an explicit opt-in); the copula kinds accept missing cells.
    With discrete columns present, the joint pmf of the label combinations
    is estimated from the rows whose discrete part is complete, and the
    continuous part is fitted per combination when every one has at least
    max(20, 5 d_c) rows, and once on all rows (independent of the discrete
    part) otherwise.
    """
    kind = str(kind).lower()
    if kind not in MODEL_KINDS:
        raise ConfigError(f"unknown model kind {kind!r}; choose from {MODEL_KINDS}")
    d_c = ds.d_continuous

    if ds.d_discrete == 0:
        if d_c == 0:
            raise ModelError("dataset has no columns to model")
        X, miss = _continuous_part(ds)
        if kind == "gaussdist":
            variant = _fit_gauss_variant(X, miss, allow_missing_gaussdist)
        else:
            variant = _fit_variant_for(kind, X, miss, margins)
        return FittedModel(kind, ds.schema, ds.category_labels, variant, None)

    if kind == "gaussdist":
        raise ModelError("gaussdist only applies to purely continuous data")
    if margins is not None:
        raise ModelError("explicit margins are only supported without discrete columns")

    keys, ok = _discrete_keys_available(ds)
    if not ok.any():
        raise ModelError("no rows with a complete discrete part")
    groups: dict[tuple, list[int]] = {}
    for i in np.flatnonzero(ok):
        groups.setdefault(keys[i], []).append(i)
    uniq = list(groups)
    counts = np.array([len(groups[k]) for k in uniq], dtype=np.float64)
    pmf = counts / counts.sum()

    if d_c == 0:
        block = DiscreteBlock(tuple(uniq), pmf, None)
        return FittedModel(kind, ds.schema, ds.category_labels, None, block)

    threshold = max(20, 5 * d_c)
    if all(len(groups[k]) >= threshold for k in uniq):
        per = []
        for k in uniq:
            X, miss = _continuous_part(ds, np.asarray(groups[k], dtype=np.intp))
            per.append(_fit_variant_for(kind, X, miss))
        block = DiscreteBlock(tuple(uniq), pmf, tuple(per))
        return FittedModel(kind, ds.schema, ds.category_labels, None, block)

    X, miss = _continuous_part(ds)
    shared = _fit_variant_for(kind, X, miss)
    block = DiscreteBlock(tuple(uniq), pmf, None)
    return FittedModel(kind, ds.schema, ds.category_labels, shared, block)


def fit_gauss_dist(ds: Dataset, *, allow_missing=False) -> FittedModel:
    """Gaussian fit: sample mean and covariance (ddof=1), eigenvalue-floored PD."""
    return fit_covariate_model(ds, "gaussdist", allow_missing_gaussdist=allow_missing)


def fit_indep_cop(ds: Dataset) -> FittedModel:
    return fit_covariate_model(ds, "indepcop")


def fit_gauss_cop(ds: Dataset, margins=None) -> FittedModel:
    """Gaussian copula fit via pairwise-complete normal-score correlation.

    `margins` may be pre-fitted (purely continuous data only); by default
    they are fitted on each column's available cases.
    """
    return fit_covariate_model(ds, "gausscop", margins=margins)


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------

def _sample_variant(variant, count, rng):
    if isinstance(variant, GaussDist):
        chol = np.linalg.cholesky(variant.cov)
        return variant.mean + rng.standard_normal((count, variant.mean.size)) @ chol.T
    if isinstance(variant, IndepCop):
        d = len(variant.margins)
        u = np.clip(rng.random((count, d)), _U_TINY, 1.0 - _U_TINY)
        cols = [margin_quantile(m, u[:, j]) for j, m in enumerate(variant.margins)]
        return np.column_stack(cols)
    if isinstance(variant, GaussCop):
        d = len(variant.margins)
        chol = np.linalg.cholesky(variant.corr)
        z = rng.standard_normal((count, d)) @ chol.T
        u = np.clip(ndtr(z), _U_TINY, 1.0 - _U_TINY)
        cols = [margin_quantile(m, u[:, j]) for j, m in enumerate(variant.margins)]
        return np.column_stack(cols)
    raise ModelError(f"cannot sample from {type(variant).__name__!r}")


def sample_model(model: FittedModel, n_sim: int, seed: int) -> Dataset:
    """Draw `n_sim` rows from a fitted model; complete, schema-shaped output.

    All randomness comes from one stream derived from (seed, sampling tag),
    so a fixed (model, n_sim, seed) triple reproduces the sample bit for bit.
    """
    if not (isinstance(n_sim, (int, np.integer)) and n_sim >= 1):
        raise ConfigError(f"n_sim must be a positive integer, got {n_sim!r}")
    if not (isinstance(seed, (int, np.integer)) and seed >= 0):
        raise ConfigError(f"seed must be a non-negative integer, got {seed!r}")
    rng = np.random.default_rng(np.random.SeedSequence((int(seed), _STREAM_SAMPLE)))

    d_c = sum(c.kind == CONTINUOUS for c in model.schema)
    block = model.discrete_block

    if block is None:
        if model.variant is None:
            raise ModelError("model has neither a continuous variant nor a discrete block")
        cont = _sample_variant(model.variant, n_sim, rng)
        return make_dataset(model.schema, continuous=cont)

    key_idx = rng.choice(len(block.keys), size=n_sim, p=block.pmf)
    if d_c == 0:
        cont = None
    elif block.stratum_models is not None:
        cont = np.empty((n_sim, d_c))
        for s, variant in enumerate(block.stratum_models):
            rows = np.flatnonzero(key_idx == s)
            if rows.size:
                cont[rows] = _sample_variant(variant, rows.size, rng)
    else:
        cont = _sample_variant(model.variant, n_sim, rng)

    code_of = [
        {label: c for c, label in enumerate(col)} for col in model.category_labels
    ]
    disc = np.empty((n_sim, len(code_of)), dtype=np.int64)
    for j in range(len(code_of)):
        col_codes = np.array([code_of[j][key[j]] for key in block.keys], dtype=np.int64)
        disc[:, j] = col_codes[key_idx]
    return make_dataset(model.schema, continuous=cont, discrete=disc,
                        category_labels=model.category_labels)


def marginalize_columns(ds: Dataset, keep) -> Dataset:
    """Project a dataset onto the named columns (schema order preserved).

    Dropping coordinates of a sample is exactly marginalization of the
    underlying distribution, so model samples can be compared against
    lower-dimensional data without refitting.
    """
    keep = list(keep)
    if not keep:
        raise ConfigError("keep must name at least one column")
    names = ds.names
    unknown = [k for k in keep if k not in names]
    if unknown:
        raise ConfigError(f"unknown column name(s) {unknown!r}; schema has {list(names)}")
    keep_set = set(keep)
    positions = [i for i, name in enumerate(names) if name in keep_set]

    cont_pos = ds.continuous_positions()
    disc_pos = ds.discrete_positions()
    cont_keep = [cont_pos.index(i) for i in positions if i in cont_pos]
    disc_keep = [disc_pos.index(i) for i in positions if i in disc_pos]

    return make_dataset(
        tuple(ds.schema[i] for i in positions),
        continuous=ds.continuous[:, cont_keep] if cont_keep else None,
        discrete=ds.discrete[:, disc_keep] if disc_keep else None,
        missing=ds.missing[:, positions],
        category_labels=tuple(ds.category_labels[j] for j in disc_keep),
    )


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def _margin_to_json(m: MarginModel):
    return {"values": m.values.tolist(), "h": m.h, "u_min": m.u_min, "u_max": m.u_max}


def _margin_from_json(obj):
    return MarginModel(np.asarray(obj["values"], dtype=np.float64),
                       float(obj["h"]), float(obj["u_min"]), float(obj["u_max"]))


def _variant_to_json(v):
    if v is None:
        return None
    if isinstance(v, GaussDist):
        return {"type": "gaussdist", "mean": v.mean.tolist(), "cov": v.cov.tolist()}
    if isinstance(v, IndepCop):
        return {"type": "indepcop", "margins": [_margin_to_json(m) for m in v.margins]}
    if isinstance(v, GaussCop):
        return {"type": "gausscop", "margins": [_margin_to_json(m) for m in v.margins],
                "corr": v.corr.tolist()}
    raise ModelError(f"cannot serialize {type(v).__name__!r}")


def _variant_from_json(obj):
    if obj is None:
        return None
    t = obj.get("type")
    if t == "gaussdist":
        return GaussDist(np.asarray(obj["mean"], dtype=np.float64),
                         np.asarray(obj["cov"], dtype=np.float64))
    if t == "indepcop":
        return IndepCop(tuple(_margin_from_json(m) for m in obj["margins"]))
    if t == "gausscop":
        return GaussCop(tuple(_margin_from_json(m) for m in obj["margins"]),
                        np.asarray(obj["corr"], dtype=np.float64))
    raise ConfigError(f"unknown variant type {t!r} in model file")


def save_model(model: FittedModel, path) -> None:
    """Write a fitted model as JSON; floats use shortest exact round-trip form."""
    block = model.discrete_block
    doc = {
        "format": _MODEL_FORMAT,
        "version": _MODEL_VERSION,
        "kind": model.kind,
        "schema": [{"name": c.name, "kind": c.kind} for c in model.schema],
        "category_labels": [list(col) for col in model.category_labels],
        "variant": _variant_to_json(model.variant),
        "discrete_block": None if block is None else {
            "keys": [list(k) for k in block.keys],
            "pmf": block.pmf.tolist(),
            "stratum_models": None if block.stratum_models is None
            else [_variant_to_json(v) for v in block.stratum_models],
        },
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def load_model(path) -> FittedModel:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if not isinstance(doc, dict) or doc.get("format") != _MODEL_FORMAT:
        raise ConfigError(f"{path}: not a {_MODEL_FORMAT} file")
    if doc.get("version") != _MODEL_VERSION:
        raise ConfigError(f"{path}: unsupported model file version {doc.get('version')!r}")
    schema = schema_from_json(doc["schema"])
    labels = tuple(tuple(col) for col in doc["category_labels"])
    raw = doc["discrete_block"]
    block = None
    if raw is not None:
        strata = raw["stratum_models"]
        block = DiscreteBlock(
            tuple(tuple(k) for k in raw["keys"]),
            np.asarray(raw["pmf"], dtype=np.float64),
            None if strata is None else tuple(_variant_from_json(v) for v in strata),
        )
    return FittedModel(doc["kind"], schema, labels,
                       _variant_from_json(doc["variant"]), block)
