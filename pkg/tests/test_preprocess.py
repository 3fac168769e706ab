import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rulnet.cmapss_io import Trajectory, generate_synthetic
from rulnet.preprocess import (NormalizationStats, apply_normalizer, fit_normalizer,
                               gold_rul_test, gold_rul_train, label, prepare, split_by_engine)


def traj(values, unit=1):
    return Trajectory(unit, np.array(values, dtype=float))


def test_fit_min_max():
    stats = fit_normalizer([traj([[10.0], [20.0]]), traj([[30.0]], unit=2)])
    assert stats.per_feature_min.tolist() == [10.0]
    assert stats.per_feature_max.tolist() == [30.0]


def test_fit_constant_feature():
    stats = fit_normalizer([traj([[5.0], [5.0], [5.0]])])
    assert stats.per_feature_min[0] == stats.per_feature_max[0] == 5.0


def test_fit_empty():
    with pytest.raises(ValueError):
        fit_normalizer([])


def test_stats_invariant():
    with pytest.raises(ValueError):
        NormalizationStats(np.array([2.0]), np.array([1.0]))


def test_apply_endpoints_and_midpoint():
    stats = NormalizationStats(np.array([10.0, 5.0]), np.array([30.0, 5.0]))
    out = apply_normalizer(stats, traj([[10.0, 5.0], [30.0, 5.0], [20.0, 5.0]]))
    assert out.frames[:, 0].tolist() == [0.0, 1.0, 0.5]
    assert out.frames[:, 1].tolist() == [0.0, 0.0, 0.0]


def test_apply_dimension_mismatch():
    stats = NormalizationStats(np.zeros(2), np.ones(2))
    with pytest.raises(ValueError):
        apply_normalizer(stats, traj([[1.0, 2.0, 3.0]]))


def test_stats_json_round_trip():
    stats = NormalizationStats(np.array([0.1, -2.0]), np.array([0.3, 7.25]))
    assert NormalizationStats.from_json(stats.to_json()) == stats


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 4))
def test_fit_apply_in_unit_interval(seed, n_cond):
    bundle = generate_synthetic(3, 0, 5, 30, n_cond, seed)
    stats = fit_normalizer(bundle.train)
    for t in bundle.train:
        x = apply_normalizer(stats, t).frames
        assert x.min() >= 0.0 and x.max() <= 1.0


def test_gold_rul_figure_shape():
    g = gold_rul_train(250, 130)
    assert len(g) == 250
    assert np.all(g[:120] == 130)
    assert g[120] == 129 and g[-1] == 0
    assert np.all(np.diff(g[119:]) == -1)


def test_gold_rul_uncapped_and_boundary():
    assert gold_rul_train(100, 130).tolist() == list(range(99, -1, -1))
    g = gold_rul_train(131, 130)
    assert g[0] == 130 and g[1] == 129


def test_gold_rul_test_examples():
    assert gold_rul_test(20, 5, 130).tolist() == [24, 23, 22, 21, 20]
    assert gold_rul_test(145, 3, 130).tolist() == [130, 130, 130]
    assert gold_rul_test(0, 2).tolist() == [1, 0]


@given(st.integers(1, 600), st.integers(1, 300))
def test_gold_rul_properties(T, cap):
    g = gold_rul_train(T, cap)
    steps = np.diff(g)
    assert np.all((steps == 0) | (steps == -1))
    n_lead = max(T - cap, 0)
    assert np.all(g[:n_lead] == cap) and np.all(g[n_lead:] < cap)
    assert np.array_equal(gold_rul_test(0, T, cap), g)


def test_label_targets_exact():
    lt = label(Trajectory(3, np.zeros((200, 24))), cap=130)
    assert np.array_equal(lt.target, lt.gold_rul / 130)
    lt = label(Trajectory(3, np.zeros((5, 24)), true_rul_at_end=20), cap=125)
    assert lt.gold_rul.tolist() == [24, 23, 22, 21, 20]


def test_prepare_uses_given_cap():
    bundle = generate_synthetic(2, 0, 150, 160, 1, seed=0)
    stats = fit_normalizer(bundle.train)
    labeled = prepare(bundle.train, stats, cap=125)
    assert all(lt.gold_rul.max() == 125 for lt in labeled)


def _engines(n):
    return [Trajectory(u, np.zeros((2, 24))) for u in range(1, n + 1)]


def test_split_75_25():
    train, val = split_by_engine(_engines(100), 0.75, seed=0)
    assert (len(train), len(val)) == (75, 25)


def test_split_deterministic_and_partition():
    engines = _engines(37)
    a = split_by_engine(engines, 0.75, seed=9)
    b = split_by_engine(engines, 0.75, seed=9)
    assert [t.unit_id for t in a[0]] == [t.unit_id for t in b[0]]
    ids_train = {t.unit_id for t in a[0]}
    ids_val = {t.unit_id for t in a[1]}
    assert ids_train | ids_val == set(range(1, 38))
    assert not ids_train & ids_val


def test_split_preconditions():
    with pytest.raises(ValueError):
        split_by_engine(_engines(1), 0.75, 0)
    with pytest.raises(ValueError):
        split_by_engine(_engines(4), 1.0, 0)
