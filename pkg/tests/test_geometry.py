import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from mcasv.geometry import (
    ArrayGeometry, MicPairSet, build_paper_array, builtin_pair_set, pair_distance,
)


def test_default_array_positions(geom):
    assert geom.n_mics == 15
    assert geom.positions[0] == 0.0
    assert geom.positions[1] == pytest.approx(0.07, abs=1e-12)
    assert geom.positions[7] == pytest.approx(0.28, abs=1e-12)
    assert geom.positions[14] == pytest.approx(0.56, abs=1e-12)
    assert geom.sound_speed == 343.0 and geom.sample_rate == 16000


def test_default_array_symmetric_about_center(geom):
    for k in range(15):
        assert geom.positions[k] + geom.positions[14 - k] == pytest.approx(0.56, abs=1e-12)


def test_builtin_pair_sets():
    assert builtin_pair_set("v0").pairs == ((0, 7), (2, 7), (3, 11), (5, 9), (11, 5), (9, 3))
    v1 = builtin_pair_set("v1")
    assert len(v1) == 8 and v1.pairs[:2] == ((0, 2), (3, 5))
    v2 = builtin_pair_set("v2")
    assert len(v2) == 10 and v2.pairs[-2:] == ((8, 11), (13, 14))
    for name in ("v0", "v1", "v2"):
        builtin_pair_set(name).validate(15)


def test_unknown_pair_set():
    with pytest.raises(KeyError):
        builtin_pair_set("v3")


def test_pair_distance(geom):
    assert pair_distance(geom, (0, 7)) == pytest.approx(0.28, abs=1e-12)
    assert pair_distance(geom, (7, 8)) == pytest.approx(0.01, abs=1e-12)
    with pytest.raises(ValueError):
        pair_distance(geom, (7, 7))
    with pytest.raises(IndexError):
        pair_distance(geom, (0, 15))


@given(st.integers(0, 14), st.integers(0, 14))
def test_pair_distance_symmetric(i, j):
    g = build_paper_array()
    if i == j:
        return
    assert pair_distance(g, (i, j)) == pair_distance(g, (j, i))


@pytest.mark.parametrize("positions", [[0.0], [0.0, 0.0], [0.1, 0.05]])
def test_geometry_rejects_bad_layouts(positions):
    with pytest.raises(ValueError):
        ArrayGeometry(np.array(positions))


@pytest.mark.parametrize("pairs", [[(1, 1)], [(0, 1), (0, 1)], [(-1, 2)], []])
def test_pair_set_invariants(pairs):
    with pytest.raises(ValueError):
        MicPairSet("bad", pairs)


def test_pair_set_out_of_range():
    with pytest.raises(IndexError):
        MicPairSet("x", [(0, 15)]).validate(15)


def test_v0_channels():
    assert builtin_pair_set("v0").channels() == [0, 2, 3, 5, 7, 9, 11]


def test_geometry_json_roundtrip(tmp_path, geom):
    path = tmp_path / "geom.json"
    path.write_text(json.dumps({"spacings_cm": [7, 6, 5, 4, 3, 2, 1, 1, 2, 3, 4, 5, 6, 7],
                                "sound_speed": 343.0, "sample_rate": 16000}))
    loaded = ArrayGeometry.from_json(path)
    np.testing.assert_allclose(loaded.positions, geom.positions, atol=1e-15)
    again = ArrayGeometry.from_json(loaded.to_json())
    np.testing.assert_allclose(again.positions, geom.positions, atol=1e-12)
    assert ArrayGeometry.from_json("nula15") == geom


def test_delays_relative_to_mic0(geom):
    d = geom.delays(0.0)
    assert d[0] == 0.0
    assert d[14] == pytest.approx(0.56 / 343.0)
    np.testing.assert_allclose(geom.delays(90.0), 0.0, atol=1e-18)
