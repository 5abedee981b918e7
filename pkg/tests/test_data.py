import os
import tempfile

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kldiv.data import (
    ColumnSchema,
    complete_fraction,
    datasets_equal,
    dedup_rows,
    from_continuous,
    inject_mcar,
    load_csv,
    make_dataset,
    schema_from_json,
    split_half,
    take_rows,
    write_csv,
)
from kldiv.errors import ConfigError, DataError

SCHEMA_MIXED = (
    ColumnSchema("sex", "discrete"),
    ColumnSchema("wt", "continuous"),
    ColumnSchema("crcl", "continuous"),
)


def mixed_ds(n=12, seed=0, missing=None):
    rng = np.random.default_rng(seed)
    codes = rng.integers(0, 2, (n, 1))
    codes[0, 0], codes[1, 0] = 0, 1  # label order survives a CSV roundtrip
    return make_dataset(
        SCHEMA_MIXED,
        continuous=rng.standard_normal((n, 2)),
        discrete=codes,
        missing=missing,
        category_labels=(("F", "M"),),
    )


class TestSchema:
    def test_from_json(self):
        schema = schema_from_json(
            [{"name": "a", "kind": "continuous"}, {"name": "b", "kind": "discrete"}]
        )
        assert schema == (ColumnSchema("a", "continuous"), ColumnSchema("b", "discrete"))

    def test_bad_kind(self):
        with pytest.raises(ConfigError):
            ColumnSchema("a", "categorical")

    def test_duplicate_names(self):
        with pytest.raises(ConfigError):
            make_dataset(
                (ColumnSchema("a", "continuous"), ColumnSchema("a", "continuous")),
                continuous=np.zeros((3, 2)),
            )

    def test_not_a_list(self):
        with pytest.raises(ConfigError):
            schema_from_json({"name": "a", "kind": "continuous"})


class TestDataset:
    def test_nonfinite_observed_cell_rejected(self):
        with pytest.raises(DataError):
            from_continuous([[0.0], [np.nan], [2.0]])

    def test_nan_fine_when_masked(self):
        miss = np.zeros((3, 1), dtype=bool)
        miss[1, 0] = True
        ds = make_dataset(
            (ColumnSchema("a", "continuous"),),
            continuous=[[0.0], [np.nan], [2.0]],
            missing=miss,
        )
        assert ds.n_rows == 3
        assert complete_fraction(ds) == pytest.approx(2 / 3)

    def test_code_out_of_range(self):
        with pytest.raises(DataError):
            make_dataset(
                (ColumnSchema("g", "discrete"),),
                discrete=[[0], [2]],
                category_labels=(("F", "M"),),
            )

    def test_arrays_read_only(self):
        ds = mixed_ds()
        with pytest.raises(ValueError):
            ds.continuous[0, 0] = 99.0
        with pytest.raises(ValueError):
            ds.missing[0, 0] = True

    def test_names_follow_schema_order(self):
        assert mixed_ds().names == ("sex", "wt", "crcl")


class TestCsv:
    def test_roundtrip_bit_identical(self, tmp_path):
        ds = mixed_ds(n=30, seed=1)
        path = tmp_path / "d.csv"
        write_csv(ds, path)
        again = load_csv(path, SCHEMA_MIXED)
        assert datasets_equal(ds, again)

    def test_header_order_insensitive(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("wt,sex,crcl\n70.5,F,90.0\n80.25,M,85.0\n")
        ds = load_csv(path, SCHEMA_MIXED)
        assert ds.names == ("sex", "wt", "crcl")
        assert ds.continuous[0, 0] == 70.5
        assert ds.category_labels == (("F", "M"),)

    def test_labels_in_first_appearance_order(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("sex,wt,crcl\nM,1.0,2.0\nF,3.0,4.0\nM,5.0,6.0\n")
        ds = load_csv(path, SCHEMA_MIXED)
        assert ds.category_labels == (("M", "F"),)
        assert ds.discrete[:, 0].tolist() == [0, 1, 0]

    def test_missing_token_roundtrip(self, tmp_path):
        miss = np.zeros((4, 3), dtype=bool)
        miss[1, 1] = True
        miss[2, 0] = True
        ds = mixed_ds(n=4, missing=miss)
        path = tmp_path / "d.csv"
        write_csv(ds, path, missing_token="NA")
        again = load_csv(path, SCHEMA_MIXED, missing_token="NA")
        assert datasets_equal(ds, again)

    def test_header_mismatch(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("sex,wt\nF,70\n")
        with pytest.raises(DataError):
            load_csv(path, SCHEMA_MIXED)

    def test_unparseable_cell(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("sex,wt,crcl\nF,seventy,90\n")
        with pytest.raises(DataError):
            load_csv(path, SCHEMA_MIXED)

    def test_empty_file(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("")
        with pytest.raises(DataError):
            load_csv(path, SCHEMA_MIXED)

    def test_ragged_row(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("sex,wt,crcl\nF,70\n")
        with pytest.raises(DataError):
            load_csv(path, SCHEMA_MIXED)

    @settings(max_examples=50, deadline=None)
    @given(
        st.lists(
            st.floats(allow_nan=False, allow_infinity=False, width=64),
            min_size=1,
            max_size=20,
        )
    )
    def test_float_cells_roundtrip_exactly(self, values):
        ds = from_continuous(np.asarray(values))
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, "v.csv")
            write_csv(ds, path)
            again = load_csv(path, ds.schema)
        assert np.array_equal(ds.continuous, again.continuous)


class TestDedup:
    def test_keeps_first_occurrence(self):
        ds = from_continuous([[1.0], [2.0], [1.0], [3.0], [2.0]])
        out = dedup_rows(ds)
        assert out.continuous[:, 0].tolist() == [1.0, 2.0, 3.0]

    def test_negative_zero_folded(self):
        out = dedup_rows(from_continuous([[0.0], [-0.0]]))
        assert out.n_rows == 1

    def test_row_identity_includes_discrete_and_mask(self):
        miss = np.zeros((3, 3), dtype=bool)
        miss[1, 1] = True
        ds = make_dataset(
            SCHEMA_MIXED,
            continuous=[[1.0, 2.0], [1.0, 2.0], [1.0, 2.0]],
            discrete=[[0], [0], [1]],
            missing=miss,
            category_labels=(("F", "M"),),
        )
        assert dedup_rows(ds).n_rows == 3

    def test_idempotent(self):
        ds = mixed_ds(n=25, seed=3)
        once = dedup_rows(ds)
        assert datasets_equal(once, dedup_rows(once))


class TestSplit:
    def test_sizes_and_disjointness(self):
        ds = mixed_ds(n=11, seed=2)
        train, test = split_half(ds, seed=5)
        assert train.n_rows == 6 and test.n_rows == 5
        seen = {tuple(row) for row in train.continuous} | {
            tuple(row) for row in test.continuous
        }
        assert len(seen) == 11

    def test_deterministic_and_seed_sensitive(self):
        ds = mixed_ds(n=40, seed=2)
        a1, b1 = split_half(ds, seed=5)
        a2, b2 = split_half(ds, seed=5)
        assert datasets_equal(a1, a2) and datasets_equal(b1, b2)
        a3, _ = split_half(ds, seed=6)
        assert not datasets_equal(a1, a3)

    def test_single_row_fails(self):
        with pytest.raises(DataError):
            split_half(from_continuous([[1.0]]), seed=0)


class TestMcar:
    def test_zero_probability_is_identity(self):
        ds = mixed_ds(n=20, seed=4)
        out = inject_mcar(ds, 0.0, ("wt", "crcl"), seed=9)
        assert datasets_equal(ds, out)

    def test_fraction_roughly_p(self):
        ds = mixed_ds(n=4000, seed=4)
        out = inject_mcar(ds, 0.3, ("wt",), seed=9)
        pos = ds.names.index("wt")
        frac = out.missing[:, pos].mean()
        assert abs(frac - 0.3) < 0.03
        assert not out.missing[:, ds.names.index("crcl")].any()
        assert not out.missing[:, ds.names.index("sex")].any()

    def test_nested_monotone_in_p(self):
        ds = mixed_ds(n=500, seed=4)
        lo = inject_mcar(ds, 0.1, ("wt", "sex"), seed=9)
        hi = inject_mcar(ds, 0.4, ("wt", "sex"), seed=9)
        assert (hi.missing | lo.missing == hi.missing).all()

    def test_existing_missingness_preserved(self):
        miss = np.zeros((30, 3), dtype=bool)
        miss[0, 1] = True
        ds = mixed_ds(n=30, seed=4, missing=miss)
        out = inject_mcar(ds, 0.5, ("crcl",), seed=1)
        assert out.missing[0, 1]

    def test_bad_probability(self):
        with pytest.raises(ConfigError):
            inject_mcar(mixed_ds(), 1.5, ("wt",), seed=0)

    def test_unknown_column(self):
        with pytest.raises(ConfigError):
            inject_mcar(mixed_ds(), 0.1, ("nope",), seed=0)


def test_take_rows_reorders_and_repeats():
    ds = from_continuous([[0.0], [1.0], [2.0]])
    out = take_rows(ds, [2, 0, 2])
    assert out.continuous[:, 0].tolist() == [2.0, 0.0, 2.0]
