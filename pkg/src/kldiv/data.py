"""Schema-tagged rectangular datasets with missingness.

A :class:`Dataset` holds continuous values and discrete category codes side by
side, in the column order given by its schema, together with a boolean mask
marking missing cells.  Values are immutable after construction; all
operations return new objects and are deterministic functions of their inputs
and an explicit seed.

Masked cells are stored with canonical placeholders (NaN for continuous
columns, -1 for discrete codes) so that row equality, deduplication and CSV
round-trips do not depend on whatever value a cell held before it was masked.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DataError

CONTINUOUS = "continuous"
DISCRETE = "discrete"

# Fixed per-purpose stream tags, so that different operations given the same
# user seed never consume the same underlying bit stream.
_STREAM_SPLIT = 0x73706C69
_STREAM_MCAR = 0x6D636172


@dataclass(frozen=True)
class ColumnSchema:
    """Name and kind of one column; kind is "continuous" or "discrete"."""

    name: str
    kind: str

    def __post_init__(self):
        if self.kind not in (CONTINUOUS, DISCRETE):
            raise ConfigError(
                f"column {self.name!r}: kind must be {CONTINUOUS!r} or {DISCRETE!r}, "
                f"got {self.kind!r}"
            )


def _validate_schema(schema):
    schema = tuple(schema)
    if not schema:
        raise ConfigError("schema must contain at least one column")
    names = [c.name for c in schema]
    if len(set(names)) != len(names):
        raise ConfigError(f"duplicate column names in schema: {names}")
    return schema


def schema_from_json(obj) -> tuple[ColumnSchema, ...]:
    """Build a schema from a decoded JSON list of {"name": ..., "kind": ...}."""
    if not isinstance(obj, list):
        raise ConfigError("schema JSON must be a list of {name, kind} objects")
    cols = []
    for entry in obj:
        if not isinstance(entry, dict) or set(entry) != {"name", "kind"}:
            raise ConfigError(f"bad schema entry: {entry!r}")
        cols.append(ColumnSchema(str(entry["name"]), str(entry["kind"])))
    return _validate_schema(cols)


@dataclass(frozen=True, eq=False)
class Dataset:
    """Immutable rectangular sample with continuous and discrete columns.

    Parameters
    ----------
    schema : sequence of ColumnSchema
        Column names and kinds, in column order.
    continuous : (n, d_c) float array
        Values of the continuous columns, in schema order restricted to
        continuous columns.
    discrete : (n, d_d) integer array
        Category codes of the discrete columns; code j of column c refers to
        ``category_labels[c][j]``.
    missing : (n, d) bool array
        Missingness mask over *all* columns, in schema order.
    category_labels : sequence of sequences of str
        Ordered label list per discrete column.
    """

    schema: tuple[ColumnSchema, ...]
    continuous: np.ndarray
    discrete: np.ndarray
    missing: np.ndarray
    category_labels: tuple[tuple[str, ...], ...] = field(default=())

    def __post_init__(self):
        schema = _validate_schema(self.schema)
        cont = np.array(self.continuous, dtype=np.float64, copy=True)
        disc = np.array(self.discrete, dtype=np.int64, copy=True)
        miss = np.array(self.missing, dtype=bool, copy=True)
        labels = tuple(tuple(str(s) for s in col) for col in self.category_labels)

        d_c = sum(c.kind == CONTINUOUS for c in schema)
        d_d = len(schema) - d_c
        if cont.ndim != 2 or disc.ndim != 2 or miss.ndim != 2:
            raise DataError("continuous, discrete and missing must be 2-D arrays")
        n = miss.shape[0]
        if cont.shape != (n, d_c) or disc.shape != (n, d_d) or miss.shape != (n, len(schema)):
            raise DataError(
                f"shape mismatch: continuous {cont.shape}, discrete {disc.shape}, "
                f"missing {miss.shape} for schema with d_c={d_c}, d_d={d_d}"
            )
        if len(labels) != d_d:
            raise DataError(f"need {d_d} label lists, got {len(labels)}")

        cont_pos = [i for i, c in enumerate(schema) if c.kind == CONTINUOUS]
        disc_pos = [i for i, c in enumerate(schema) if c.kind == DISCRETE]

        # canonical placeholders under the mask
        cont[miss[:, cont_pos]] = np.nan
        disc[miss[:, disc_pos]] = -1

        if not np.isfinite(cont[~miss[:, cont_pos]]).all():
            raise DataError("non-finite value in a non-missing continuous cell")
        for j, col in enumerate(disc_pos):
            codes = disc[~miss[:, col], j]
            if codes.size and (codes.min() < 0 or codes.max() >= len(labels[j])):
                raise DataError(
                    f"column {schema[col].name!r}: category code out of range"
                )

        for a in (cont, disc, miss):
            a.flags.writeable = False
        object.__setattr__(self, "schema", schema)
        object.__setattr__(self, "continuous", cont)
        object.__setattr__(self, "discrete", disc)
        object.__setattr__(self, "missing", miss)
        object.__setattr__(self, "category_labels", labels)

    # -- basic geometry -------------------------------------------------

    @property
    def n_rows(self) -> int:
        return self.missing.shape[0]

    @property
    def d(self) -> int:
        return len(self.schema)

    @property
    def d_continuous(self) -> int:
        return self.continuous.shape[1]

    @property
    def d_discrete(self) -> int:
        return self.discrete.shape[1]

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.schema)

    def continuous_positions(self) -> list[int]:
        """Schema positions of the continuous columns."""
        return [i for i, c in enumerate(self.schema) if c.kind == CONTINUOUS]

    def discrete_positions(self) -> list[int]:
        return [i for i, c in enumerate(self.schema) if c.kind == DISCRETE]

    def is_complete(self) -> bool:
        return not self.missing.any()


def make_dataset(schema, continuous=None, discrete=None, missing=None,
                 category_labels=()) -> Dataset:
    """Construct a :class:`Dataset`, filling in empty arrays and a false mask.

    `continuous` and `discrete` may be omitted when the schema has no columns
    of that kind; `missing` defaults to all-observed.
    """
    schema = _validate_schema(schema)
    d_c = sum(c.kind == CONTINUOUS for c in schema)
    d_d = len(schema) - d_c
    if continuous is None and discrete is None:
        raise DataError("at least one of continuous/discrete must be given")
    if continuous is None:
        n = np.asarray(discrete).shape[0]
        continuous = np.empty((n, 0))
    continuous = np.asarray(continuous, dtype=np.float64)
    if continuous.ndim == 1:
        continuous = continuous[:, None]
    n = continuous.shape[0]
    if discrete is None:
        discrete = np.empty((n, 0), dtype=np.int64)
    discrete = np.asarray(discrete, dtype=np.int64)
    if discrete.ndim == 1:
        discrete = discrete[:, None]
    if missing is None:
        missing = np.zeros((n, d_c + d_d), dtype=bool)
    return Dataset(schema, continuous, discrete, missing, tuple(category_labels))


def from_continuous(matrix, names=None) -> Dataset:
    """Wrap a plain (n, d) matrix as an all-continuous, complete Dataset."""
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.ndim == 1:
        matrix = matrix[:, None]
    d = matrix.shape[1]
    if names is None:
        names = [f"x{j}" for j in range(d)]
    schema = tuple(ColumnSchema(nm, CONTINUOUS) for nm in names)
    return make_dataset(schema, continuous=matrix)


def datasets_equal(a: Dataset, b: Dataset) -> bool:
    """Exact equality: same schema, labels, masks, codes and bit-equal values."""
    if a.schema != b.schema or a.category_labels != b.category_labels:
        return False
    if a.n_rows != b.n_rows:
        return False
    return (
        np.array_equal(a.missing, b.missing)
        and np.array_equal(a.discrete, b.discrete)
        and np.array_equal(a.continuous, b.continuous, equal_nan=True)
    )


# ---------------------------------------------------------------------------
# CSV ingestion / emission
# ---------------------------------------------------------------------------

def load_csv(path, schema, missing_token: str = "") -> Dataset:
    """Read a UTF-8, comma-separated file with a header row into a Dataset.

    The header must contain exactly the schema's column names (any order).
    Cells equal to `missing_token` are flagged missing.  Discrete labels are
    collected in first-appearance order, scanning rows top to bottom.
    """
    schema = _validate_schema(schema)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file (no header row)") from None
        rows = list(reader)

    names = [c.name for c in schema]
    if sorted(header) != sorted(names):
        raise DataError(
            f"{path}: header {header!r} does not match schema columns {names!r}"
        )
    col_of = {name: header.index(name) for name in names}

    n = len(rows)
    d = len(schema)
    cont_pos = [i for i, c in enumerate(schema) if c.kind == CONTINUOUS]
    disc_pos = [i for i, c in enumerate(schema) if c.kind == DISCRETE]
    cont = np.full((n, len(cont_pos)), np.nan)
    disc = np.full((n, len(disc_pos)), -1, dtype=np.int64)
    miss = np.zeros((n, d), dtype=bool)
    label_maps = [{} for _ in disc_pos]

    for i, row in enumerate(rows):
        if len(row) != len(header):
            raise DataError(f"{path}: row {i + 1} has {len(row)} cells, expected {len(header)}")
        for jc, pos in enumerate(cont_pos):
            cell = row[col_of[schema[pos].name]]
            if cell == missing_token:
                miss[i, pos] = True
                continue
            try:
                value = float(cell)
            except ValueError:
                raise DataError(
                    f"{path}: row {i + 1}, column {schema[pos].name!r}: "
                    f"cannot parse {cell!r} as a number"
                ) from None
            if not math.isfinite(value):
                raise DataError(
                    f"{path}: row {i + 1}, column {schema[pos].name!r}: "
                    f"non-finite value {cell!r}"
                )
            cont[i, jc] = value
        for jd, pos in enumerate(disc_pos):
            cell = row[col_of[schema[pos].name]]
            if cell == missing_token:
                miss[i, pos] = True
                continue
            codes = label_maps[jd]
            disc[i, jd] = codes.setdefault(cell, len(codes))

    labels = tuple(tuple(m.keys()) for m in label_maps)
    return Dataset(schema, cont, disc, miss, labels)


def write_csv(ds: Dataset, path, missing_token: str = "") -> None:
    """Emit a Dataset as CSV; continuous cells carry 17 significant digits,
    so re-loading reproduces them bit-identically."""
    cont_pos = ds.continuous_positions()
    disc_pos = ds.discrete_positions()
    kind_index = {}
    for jc, pos in enumerate(cont_pos):
        kind_index[pos] = (CONTINUOUS, jc)
    for jd, pos in enumerate(disc_pos):
        kind_index[pos] = (DISCRETE, jd)

    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(ds.names)
        for i in range(ds.n_rows):
            row = []
            for pos in range(ds.d):
                if ds.missing[i, pos]:
                    row.append(missing_token)
                    continue
                kind, j = kind_index[pos]
                if kind == CONTINUOUS:
                    row.append(format(ds.continuous[i, j], ".17g"))
                else:
                    row.append(ds.category_labels[j][ds.discrete[i, j]])
            writer.writerow(row)


# ---------------------------------------------------------------------------
# Row-level operations
# ---------------------------------------------------------------------------

def take_rows(ds: Dataset, indices) -> Dataset:
    """New Dataset containing `ds`'s rows at `indices`, in that order."""
    idx = np.asarray(indices, dtype=np.intp)
    return Dataset(ds.schema, ds.continuous[idx], ds.discrete[idx],
                   ds.missing[idx], ds.category_labels)


def _row_keys(ds: Dataset) -> np.ndarray:
    """One opaque byte key per row; equal keys == exactly equal rows.

    Continuous values are compared numerically (-0.0 folds onto +0.0, masked
    cells compare equal via the canonical NaN placeholder), codes and masks
    byte-wise.
    """
    cont = ds.continuous + 0.0  # folds -0.0 onto +0.0, keeps NaN canonical
    parts = [
        np.ascontiguousarray(cont).view(np.uint8).reshape(ds.n_rows, -1),
        np.ascontiguousarray(ds.discrete).view(np.uint8).reshape(ds.n_rows, -1),
        np.ascontiguousarray(ds.missing).view(np.uint8).reshape(ds.n_rows, -1),
    ]
    raw = np.ascontiguousarray(np.concatenate(parts, axis=1))
    return raw.view(np.dtype((np.void, raw.shape[1])))[:, 0]


def dedup_rows(ds: Dataset) -> Dataset:
    """Drop exact duplicate rows, keeping the first occurrence of each.

    Two rows are duplicates when their masks, codes and continuous values all
    coincide; rows differing only in the mask are kept apart.
    """
    if ds.n_rows == 0:
        return ds
    _, first = np.unique(_row_keys(ds), return_index=True)
    return take_rows(ds, np.sort(first))


def split_half(ds: Dataset, seed: int) -> tuple[Dataset, Dataset]:
    """Randomly partition the rows into (train, test).

    Train receives ceil(n/2) rows; both halves keep the original row order.
    The partition is a deterministic function of the seed.
    """
    n = ds.n_rows
    if n < 2:
        raise DataError(f"cannot split a dataset with {n} row(s)")
    rng = np.random.default_rng(np.random.SeedSequence((int(seed), _STREAM_SPLIT)))
    perm = rng.permutation(n)
    n_train = -(-n // 2)
    train_idx = np.sort(perm[:n_train])
    test_idx = np.sort(perm[n_train:])
    return take_rows(ds, train_idx), take_rows(ds, test_idx)


def inject_mcar(ds: Dataset, p: float, columns, seed: int) -> Dataset:
    """Flag each targeted cell missing independently with probability `p`.

    Cell (i, j) is decided by draw i of a stream derived from (seed, j), i.e.
    a pure function of (seed, column, row): injections into disjoint column
    sets commute exactly, and iteration order is irrelevant.  Already-missing
    cells stay missing.
    """
    if not 0.0 <= p <= 1.0:
        raise ConfigError(f"missing probability must be in [0, 1], got {p}")
    name_to_pos = {c.name: i for i, c in enumerate(ds.schema)}
    positions = []
    for name in columns:
        if name not in name_to_pos:
            raise ConfigError(f"unknown column {name!r}")
        positions.append(name_to_pos[name])

    mask = np.array(ds.missing, copy=True)
    for pos in sorted(set(positions)):
        rng = np.random.default_rng(
            np.random.SeedSequence((int(seed), _STREAM_MCAR, pos)))
        mask[:, pos] |= rng.random(ds.n_rows) < p
    return Dataset(ds.schema, ds.continuous, ds.discrete, mask, ds.category_labels)


def complete_fraction(ds: Dataset) -> float:
    """Fraction of rows with no missing cell."""
    if ds.n_rows == 0:
        return 1.0
    return float((~ds.missing.any(axis=1)).mean())
