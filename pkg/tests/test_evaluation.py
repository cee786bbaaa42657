import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from igesdse import evaluation
from igesdse.errors import DegenerateDenominator
from igesdse.scenario import RunArtifacts


def test_filter_coefficient_examples():
    truth = [1.0, 1.0]
    meas = [1.1, 0.9]
    assert evaluation.filter_coefficient(truth, meas, truth) == 0.0
    assert evaluation.filter_coefficient(meas, meas, truth) == 1.0
    assert evaluation.filter_coefficient([1.05, 0.95], meas, truth) == pytest.approx(0.25, abs=1e-12)


def test_total_variance_examples():
    assert evaluation.total_variance([1.0, 1.0], [1.0, 1.0]) == 0.0
    assert evaluation.total_variance([1.05, 0.95], [1.0, 1.0]) == pytest.approx(0.0025, abs=1e-15)
    truth = np.linspace(0, 1, 7)
    assert evaluation.total_variance(truth + 0.3, truth) == pytest.approx(0.09, abs=1e-15)


def test_guards():
    with pytest.raises(DegenerateDenominator):
        evaluation.filter_coefficient([1.0], [2.0], [2.0])
    with pytest.raises(ValueError):
        evaluation.filter_coefficient([], [], [])
    with pytest.raises(ValueError):
        evaluation.total_variance([1.0, 2.0], [1.0])


@settings(max_examples=50, deadline=None)
@given(st.floats(0.1, 100.0), st.integers(0, 2 ** 31))
def test_scale_equivariance(k, seed):
    rng = np.random.default_rng(seed)
    truth = rng.normal(size=20)
    meas = truth + rng.normal(size=20)
    est = truth + 0.3 * rng.normal(size=20)
    e1 = evaluation.filter_coefficient(est, meas, truth)
    e2 = evaluation.total_variance(est, truth)
    assert evaluation.filter_coefficient(k * est, k * meas, k * truth) == pytest.approx(e1, rel=1e-9)
    assert evaluation.total_variance(k * est, k * truth) == pytest.approx(k * k * e2, rel=1e-9)
    if e1 < 1:
        assert e2 <= evaluation.total_variance(meas, truth)


def artifacts(est, meas, truth, names=("a", "b", "c"), groups=("e", "pressure", "mass_flow")):
    return RunArtifacts(np.asarray(truth, float), np.asarray(meas, float), np.asarray(est, float),
                        names, groups, np.array([1.0, 10.0, 1.0]))


def test_channel_metrics_flags_and_normalization():
    truth = np.array([[1.0, 5.0, 1.0], [2.0, 5.0, 2.0], [3.0, 5.0, 3.0], [4.0, 5.0, 4.0]])
    meas = truth.copy()
    meas[:, 0] += 0.1
    meas[:, 1] += 1.0
    est = truth + 0.05
    m = evaluation.channel_metrics(artifacts(est, meas, truth), warmup=1)
    assert m[0].eps1 == pytest.approx(0.25) and m[0].flag == ""
    assert m[1].flag == "constant_truth"
    assert m[1].eps2 == pytest.approx(0.0025 / 100)
    assert math.isnan(m[2].eps1) and m[2].flag == "degenerate"
    raw = evaluation.channel_metrics(artifacts(est, meas, truth), warmup=1, normalized=False)
    assert raw[1].eps2 == pytest.approx(0.0025)


def test_perfect_run():
    truth = np.arange(12, dtype=float).reshape(4, 3)
    m = evaluation.channel_metrics(artifacts(truth, truth + 1, truth), warmup=0)
    assert all(x.eps1 == 0 and x.eps2 == 0 for x in m)


def test_group_summary_and_report():
    truth = np.arange(12, dtype=float).reshape(4, 3)
    art = artifacts(truth + 0.1, truth + 1, truth)
    s = evaluation.group_summary(evaluation.channel_metrics(art, warmup=0))
    assert list(s) == ["pressure", "mass_flow", "e"]
    assert s["e"]["count"] == 1
    assert [m.channel for m in evaluation.report(art, 0, groups=("e",))] == ["a"]


def test_metrics_csv_round_trip(tmp_path):
    rows = [evaluation.ChannelMetrics("x", "e", 0.1234567890123, 1e-7, ""),
            evaluation.ChannelMetrics("y", "f", math.nan, 0.5, "degenerate")]
    evaluation.write_metrics(tmp_path / "m.csv", rows)
    back = evaluation.read_metrics(tmp_path / "m.csv")
    assert back[0] == rows[0]
    assert math.isnan(back[1].eps1) and back[1].flag == "degenerate"
    assert (tmp_path / "m.csv").read_text().splitlines()[0] == "channel,group,eps1,eps2,flag"


def test_group_count_for_39_bus(iges_joint):
    groups = iges_joint.channel_groups
    assert sum(g in ("e", "f") for g in groups) == 78
