import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from igcl.errors import EmptySeries, MalformedCsv, MissingLabels, OutOfRange
from igcl.series import (EXCLUDED, SeriesFrame, encode_time_attributes, future_anomaly_targets, instance_normalize,
                         load_series_csv, make_segment, normalize_rows, write_series_csv)


def _write(tmp_path, text, name="s.csv"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_csv_roundtrip(tmp_path):
    rng = np.random.default_rng(1)
    frame = SeriesFrame(rng.normal(size=(3, 20)), 1000.0 + 60 * np.arange(20), (np.arange(20) % 7 == 0), ["a", "b", "c"])
    path = write_series_csv(frame, tmp_path / "x.csv")
    back = load_series_csv(path)
    np.testing.assert_array_equal(back.values, frame.values)
    np.testing.assert_array_equal(back.timestamps, frame.timestamps)
    np.testing.assert_array_equal(back.labels, frame.labels)
    assert back.names == ["a", "b", "c"]


def test_reserved_columns_and_comments(tmp_path):
    p = _write(tmp_path, "# note\nlabel,x,timestamp,y\n0,1.0,10,2\n1,1.5,20,3\n")
    f = load_series_csv(p)
    assert f.names == ["x", "y"]
    assert f.labels.tolist() == [0, 1]
    assert f.timestamps.tolist() == [10, 20]


def test_missing_reject_and_ffill(tmp_path):
    p = _write(tmp_path, "x,y\n1,2\n,3\nnan,4\n")
    with pytest.raises(MalformedCsv):
        load_series_csv(p)
    f = load_series_csv(p, missing="ffill")
    assert f.values[0].tolist() == [1, 1, 1]


def test_leading_gap_cannot_be_filled(tmp_path):
    with pytest.raises(MalformedCsv):
        load_series_csv(_write(tmp_path, "x,y\n,1\n2,3\n"), missing="ffill")


def test_empty_and_non_numeric(tmp_path):
    with pytest.raises(EmptySeries):
        load_series_csv(_write(tmp_path, "x,y\n"))
    with pytest.raises(MalformedCsv):
        load_series_csv(_write(tmp_path, "x\nabc\n", "b.csv"))


def test_segment_windows():
    frame = SeriesFrame(np.arange(30.0)[None])
    seg = make_segment(frame, t=20, h=3, b=5)
    assert seg.data.shape == (1, 8)
    assert seg.window(0).tolist() == [[17, 18, 19, 20]]
    assert seg.window(4).tolist() == [[13, 14, 15, 16]]
    assert seg.window_bounds(2) == (15, 18)
    with pytest.raises(OutOfRange):
        make_segment(frame, t=5, h=3, b=5)
    with pytest.raises(OutOfRange):
        make_segment(frame, t=30, h=3, b=5)


@given(st.lists(st.floats(-1e3, 1e3), min_size=2, max_size=40))
def test_normalize_rows_population_std(xs):
    x = np.array(xs)[None]
    out, mean, scale = normalize_rows(x)
    if np.std(x) <= 1e-5:
        assert np.all(out == 0)
        assert scale[0] == 1.0
    else:
        np.testing.assert_allclose(out.mean(), 0.0, atol=1e-9)
        np.testing.assert_allclose(np.sqrt(np.mean(out ** 2)), 1.0, rtol=1e-9)
        np.testing.assert_allclose(out * scale[:, None] + mean[:, None], x, atol=1e-9 * (1 + np.abs(x).max()))


def test_instance_normalize_denormalizes():
    frame = SeriesFrame(np.random.default_rng(0).normal(3, 2, size=(2, 50)))
    norm = instance_normalize(make_segment(frame, 49, 4, 10))
    np.testing.assert_allclose(norm.denormalize(), norm.segment.data)


def test_time_attributes_monday_midnight():
    # 2024-01-01 was a Monday
    enc = encode_time_attributes([1704067200.0, 1704067200.0 + 6 * 3600])
    np.testing.assert_allclose(enc[:, 0], [0, 1, 0, 1], atol=1e-12)
    np.testing.assert_allclose(enc[:2, 1], [1, 0], atol=1e-12)
    assert encode_time_attributes(None, 5).shape == (0, 5)


def _targets_oracle(labels, f, h):
    T = len(labels)
    out = []
    for t in range(T):
        if t + f > T - 1 or any(labels[max(0, t - h) : t + 1]):
            out.append(EXCLUDED)
        else:
            out.append(int(any(labels[t + 1 : t + f + 1])))
    return out


@settings(max_examples=200)
@given(st.lists(st.integers(0, 1), min_size=1, max_size=60), st.integers(1, 8), st.integers(0, 6))
def test_targets_match_loop_oracle(labels, f, h):
    assert future_anomaly_targets(labels, f, h).tolist() == _targets_oracle(labels, f, h)


def test_targets_need_labels():
    with pytest.raises(MissingLabels):
        future_anomaly_targets(SeriesFrame(np.zeros((1, 5))), 2)
