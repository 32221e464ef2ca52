import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from resilnet.errors import ConfigError, DomainError, StreamError
from resilnet.perception import (
    Perception,
    TimeSeriesBuffer,
    detect_outliers,
    normalize,
    preprocess,
    redundancy_vote,
)


def test_redundancy_vote():
    assert redundancy_vote([1.0, 100.0, 2.0]) == 2.0
    assert redundancy_vote([1.0, 3.0]) == 2.0
    with pytest.raises(DomainError):
        redundancy_vote([])


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-1e6, 1e6), min_size=3, max_size=9, unique=True))
def test_vote_survives_single_corrupted_replica(vals):
    # a minority of corrupted replicas cannot move the vote outside the honest range
    honest = vals[:-1]
    corrupted = honest + [1e12]
    v = redundancy_vote(corrupted)
    if len(honest) >= 2:
        assert min(honest) <= v <= max(honest)


def test_detect_outliers():
    window = [1.0, 1.1, 0.9, 1.0, 1.05, 0.95, 50.0]
    mask = detect_outliers(window)
    assert mask.tolist() == [False] * 6 + [True]
    assert not detect_outliers([1.0, 100.0]).any()


def test_normalize_is_unclipped():
    assert normalize(5.0, 0.0, 10.0) == 0.5
    assert normalize(20.0, 0.0, 10.0) == 2.0


def test_buffer_ring_order():
    buf = TimeSeriesBuffer(["a", "b"], window=3)
    for i in range(5):
        buf.append(np.array([i, -i], dtype=float), np.array([False, i == 4]))
    assert len(buf) == 3
    assert buf.series("a").tolist() == [2.0, 3.0, 4.0]
    assert buf.flags()[:, 1].tolist() == [False, False, True]
    with pytest.raises(StreamError):
        buf.series("zz")
    buf.shift(np.array([1.0, 0.0]))
    assert buf.series("a").tolist() == [3.0, 4.0, 5.0]


def _perception(n=2, window=20, refresh=1):
    ids = [f"s{i}" for i in range(n)]
    return Perception(ids, {s: (0.0, 10.0) for s in ids}, window, refresh)


def test_perception_substitutes_isolated_outlier():
    p = _perception()
    rng = np.random.default_rng(0)
    for _ in range(30):
        p.step(5.0 + 0.01 * rng.standard_normal((2, 3)))
    spike = np.full((2, 3), 5.0)
    spike[0] = 9.0
    clean, flags = p.step(spike)
    assert flags.tolist() == [True, False]
    assert clean[0] == pytest.approx(0.5, abs=0.01)
    # a sustained shift passes through on its second tick
    clean, flags = p.step(spike)
    assert clean[0] == pytest.approx(0.9)


def test_perception_replica_vote():
    p = _perception(n=1)
    clean, _ = p.step(np.array([[2.0, 2.0, 1000.0]]))
    assert clean[0] == pytest.approx(0.2)


def test_perception_config_errors():
    with pytest.raises(ConfigError):
        Perception(["a"], {}, 10)
    with pytest.raises(ConfigError):
        Perception(["a"], {"a": (1.0, 1.0)}, 10)
    with pytest.raises(ConfigError):
        TimeSeriesBuffer(["a"], 0)


def test_preprocess_mapping():
    p = _perception()
    out = preprocess({"s0": [1.0, 2.0, 3.0]}, p)
    assert out == {"s0": pytest.approx(0.2)}
    with pytest.raises(StreamError):
        preprocess({"zz": [1.0]}, p)
    with pytest.raises(DomainError):
        preprocess({"s0": []}, p)
