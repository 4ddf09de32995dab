import numpy as np
import pytest

from igcl.errors import ConfigError, OverlapError
from igcl.series import load_series_csv
from igcl.synth import (EventSpec, generate_normal_series, inject_precursor_events, load_event_specs, make_benchmark,
                        random_event_specs, write_benchmark)


def test_normal_series_is_deterministic():
    a = generate_normal_series(4, 500, seed=3)
    b = generate_normal_series(4, 500, seed=3)
    np.testing.assert_array_equal(a.values, b.values)
    assert not a.labels.any()
    assert not np.array_equal(a.values, generate_normal_series(4, 500, seed=4).values)


@pytest.mark.parametrize("kind", ["spike-train", "level-shift", "trend-ramp", "frequency-shift"])
def test_precursor_touches_only_affected_variables(kind):
    base = generate_normal_series(4, 300, seed=0)
    spec = EventSpec(onset=150, precursor_length=20, anomaly_length=10, variables=(1, 3), kind=kind, magnitude=1.0)
    out = inject_precursor_events(base, [spec], seed=0)
    diff = out.values - base.values
    assert np.all(diff[[0, 2]] == 0)
    assert np.any(diff[1, 130:150] != 0) and np.any(diff[3, 130:150] != 0)
    assert np.all(diff[:, :130] == 0) and np.all(diff[:, 160:] == 0)
    # labels cover the anomaly only; precursors stay unlabeled
    assert out.labels[150:160].all()
    assert out.labels.sum() == 10
    # anomaly perturbation is three times the precursor's scale
    assert np.abs(diff[1, 150:160]).max() == pytest.approx(3 * np.abs(diff[1, 130:150]).max())


def test_none_precursor_leaves_precursor_span_unchanged():
    base = generate_normal_series(2, 300, seed=0)
    spec = EventSpec(150, 20, 10, (0,), "none", 1.0)
    out = inject_precursor_events(base, [spec], seed=0)
    np.testing.assert_array_equal(out.values[:, :150], base.values[:, :150])
    assert np.any(out.values[0, 150:160] != base.values[0, 150:160])


def test_overlap_rejected():
    base = generate_normal_series(2, 300, seed=0)
    specs = [EventSpec(100, 10, 10, (0,), "level-shift", 1.0), EventSpec(115, 10, 10, (1,), "level-shift", 1.0)]
    with pytest.raises(OverlapError):
        inject_precursor_events(base, specs, seed=0)


@pytest.mark.parametrize("doc, field", [
    ({"onset": 5, "precursor_length": 10, "anomaly_length": 3, "variables": [0], "kind": "level-shift"}, "onset"),
    ({"onset": 50, "precursor_length": 10, "anomaly_length": 3, "variables": [9], "kind": "level-shift"}, "variables"),
    ({"onset": 50, "precursor_length": 10, "anomaly_length": 3, "variables": [0], "kind": "wobble"}, "kind"),
    ({"onset": 50, "precursor_length": 10, "anomaly_length": 3, "variables": [0], "kind": "none", "x": 1}, "x"),
])
def test_invalid_specs_name_the_field(doc, field):
    with pytest.raises(ConfigError) as info:
        for s in load_event_specs([doc]):
            s.validate(3, 200, "events[0]")
    assert field in str(info.value)


def test_random_specs_mix_subsets():
    specs = random_event_specs(5, 5000, 20, seed=1)
    sizes = {len(s.variables) for s in specs}
    assert sizes == {1, 2, 3}
    assert len(specs) == 20
    for s in specs:
        s.validate(5, 5000)


def test_write_benchmark(tmp_path):
    specs = random_event_specs(3, 1000, 4, seed=0)
    train, test = make_benchmark(3, 800, 1000, specs, seed=0)
    tr, te = write_benchmark(train, test, tmp_path)
    a, b = load_series_csv(tr), load_series_csv(te)
    assert a.labels is None and b.labels.sum() == sum(s.anomaly_length for s in specs)
    # the test split continues the training clock
    assert b.timestamps[0] - a.timestamps[-1] == 60
