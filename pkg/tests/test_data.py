import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_ts
from ymir.data import (
    TimeSeriesSet,
    impute_missing,
    load_labels_csv,
    load_timeseries_csv,
    save_timeseries_csv,
    sliding_windows,
)
from ymir.errors import (
    AlignmentError,
    DataError,
    ParseError,
    SizeError,
    StructureError,
)


def write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text)
    return path


class TestLoadCsv:
    def test_basic(self, tmp_path):
        path = write(tmp_path, "d.csv", "timestamp,cpu,mem\n0,1.5,2\n60,2.5,3\n120,3.5,4\n")
        ts = load_timeseries_csv(path)
        assert ts.length == 3 and ts.n_metrics == 2
        assert ts.metric_names == ("cpu", "mem")
        assert ts.spacing == 60
        np.testing.assert_array_equal(ts.values[:, 0], [1.5, 2.5, 3.5])

    def test_rows_sorted(self, tmp_path):
        path = write(tmp_path, "d.csv", "timestamp,a\n120,3\n0,1\n60,2\n")
        ts = load_timeseries_csv(path)
        np.testing.assert_array_equal(ts.timestamps, [0, 60, 120])
        np.testing.assert_array_equal(ts.values[:, 0], [1, 2, 3])

    def test_missing_cell_names_line(self, tmp_path):
        path = write(tmp_path, "d.csv", "timestamp,a,b\n0,1,2\n60,1\n120,1,2\n")
        with pytest.raises(ParseError, match="line 3"):
            load_timeseries_csv(path)

    def test_non_uniform_spacing(self, tmp_path):
        path = write(tmp_path, "d.csv", "timestamp,a\n0,1\n60,2\n130,3\n")
        with pytest.raises(StructureError, match="non-uniform spacing"):
            load_timeseries_csv(path)

    def test_empty_file(self, tmp_path):
        path = write(tmp_path, "d.csv", "")
        with pytest.raises(StructureError):
            load_timeseries_csv(path)

    def test_header_only(self, tmp_path):
        path = write(tmp_path, "d.csv", "timestamp,a\n")
        with pytest.raises(StructureError):
            load_timeseries_csv(path)

    def test_duplicate_timestamp(self, tmp_path):
        path = write(tmp_path, "d.csv", "timestamp,a\n0,1\n0,2\n")
        with pytest.raises(StructureError, match="duplicate"):
            load_timeseries_csv(path)

    def test_nan_token(self, tmp_path):
        path = write(tmp_path, "d.csv", "timestamp,a\n0,1\n60,NaN\n120,3\n")
        ts = load_timeseries_csv(path)
        assert np.isnan(ts.values[1, 0])

    def test_roundtrip_bit_exact(self, tmp_path, rng):
        values = rng.normal(size=(40, 3)) * np.pi
        ts = make_ts(values)
        path = tmp_path / "out.csv"
        save_timeseries_csv(path, ts)
        back = load_timeseries_csv(path)
        np.testing.assert_array_equal(back.timestamps, ts.timestamps)
        assert back.metric_names == ts.metric_names
        assert np.array_equal(back.values, ts.values)


class TestTimeSeriesSet:
    def test_rejects_inf(self):
        with pytest.raises(StructureError):
            make_ts([[1.0], [np.inf], [3.0]])

    def test_rejects_duplicate_names(self):
        with pytest.raises(StructureError):
            TimeSeriesSet(np.array([0, 60]), np.ones((2, 2)), ("a", "a"))

    def test_immutable(self):
        ts = make_ts([[1.0], [2.0]])
        with pytest.raises(ValueError):
            ts.values[0, 0] = 9.0


class TestImpute:
    def test_linear_interpolation(self):
        ts = make_ts([[1.0], [np.nan], [3.0]])
        out = impute_missing(ts)
        np.testing.assert_array_equal(out.values[:, 0], [1.0, 2.0, 3.0])

    def test_edge_fill(self):
        ts = make_ts([[np.nan], [5.0], [5.0]])
        out = impute_missing(ts)
        np.testing.assert_array_equal(out.values[:, 0], [5.0, 5.0, 5.0])

    def test_all_nan_column(self):
        ts = make_ts([[np.nan, 1.0], [np.nan, 2.0]])
        with pytest.raises(DataError, match="m0"):
            impute_missing(ts)

    @given(st.lists(st.one_of(st.floats(-1e6, 1e6), st.none()), min_size=2, max_size=30))
    @settings(max_examples=60, deadline=None)
    def test_idempotent_and_preserves_finite(self, cells):
        col = np.array([np.nan if c is None else c for c in cells], dtype=float)
        if not np.isfinite(col).any():
            return
        ts = make_ts(col[:, None])
        once = impute_missing(ts)
        twice = impute_missing(once)
        assert np.array_equal(once.values, twice.values)
        finite = np.isfinite(col)
        assert np.array_equal(once.values[finite, 0], col[finite])
        assert np.isfinite(once.values).all()


class TestSlidingWindows:
    def test_basic(self):
        wins = sliding_windows(5, 3, 1)
        assert [w.start for w in wins] == [0, 1, 2]
        assert [w.center for w in wins] == [1, 2, 3]

    def test_full_width(self):
        wins = sliding_windows(4, 4, 1)
        assert len(wins) == 1 and wins[0].center == 2

    def test_too_large(self):
        with pytest.raises(SizeError):
            sliding_windows(2, 3)

    def test_center_coverage_odd_window(self):
        # stride 1, odd w: centers cover w-1 .. T-1... centered at start+w//2
        w, T = 5, 12
        centers = [win.center for win in sliding_windows(T, w, 1)]
        assert centers == list(range(w // 2, T - w + 1 + w // 2))


class TestLabels:
    def test_sparse_alignment(self, tmp_path):
        ts = make_ts([[0.0], [1.0], [2.0]])
        path = write(tmp_path, "l.csv", "timestamp,label\n60,1\n")
        labels = load_labels_csv(path, ts)
        np.testing.assert_array_equal(labels.mask, [False, True, False])
        assert labels.labels[1] == 1
        assert labels.rho == pytest.approx(1 / 3)

    def test_empty_label_file(self, tmp_path):
        ts = make_ts([[0.0], [1.0], [2.0]])
        path = write(tmp_path, "l.csv", "timestamp,label\n")
        labels = load_labels_csv(path, ts)
        assert not labels.mask.any()

    def test_unknown_timestamp(self, tmp_path):
        ts = make_ts([[0.0], [1.0], [2.0]])
        path = write(tmp_path, "l.csv", "timestamp,label\n61,1\n")
        with pytest.raises(AlignmentError):
            load_labels_csv(path, ts)

    def test_bad_label_value(self, tmp_path):
        ts = make_ts([[0.0], [1.0]])
        path = write(tmp_path, "l.csv", "timestamp,label\n0,2\n")
        with pytest.raises(ParseError):
            load_labels_csv(path, ts)
