import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import FS, tone
from mcasv.dsp import MultiChannelSignal, MultiChannelSpectrogram, StftConfig, stft
from mcasv.geometry import MicPairSet, builtin_pair_set
from mcasv.simulator import spatialize
from mcasv.spatial import SourceAngleTrack, angle_feature, ipd, phase0, tpd

PAIR = MicPairSet("p", [(0, 1)])


def spec_of(*channels):
    return stft(MultiChannelSignal(np.stack(channels), FS))


def test_identical_channels_zero_ipd():
    x = np.random.default_rng(0).standard_normal(3000)
    spec = spec_of(*([x] * 15))
    pairs = builtin_pair_set("v2")
    assert np.all(ipd(spec, pairs, "raw") == 0)
    assert np.all(ipd(spec, pairs, "cos") == 1)
    assert np.all(ipd(spec, pairs, "sin") == 0)


def test_two_sample_delay_phase():
    x = tone(1000.0)
    y = np.concatenate([np.zeros(2), x[:-2]])
    raw = ipd(spec_of(x, y), PAIR, "raw")[0, 1:, 32]
    # Y_i / Y_j with j delayed by two samples: +2*pi*1000*2/16000
    expected = 2 * np.pi * 1000 * 2 / FS
    assert expected == pytest.approx(0.7854, abs=1e-4)
    np.testing.assert_allclose(raw, expected, atol=0.02)


def test_ipd_antisymmetry():
    rng = np.random.default_rng(1)
    spec = spec_of(*rng.standard_normal((2, 2000)))
    fwd = ipd(spec, MicPairSet("a", [(0, 1)]))
    rev = ipd(spec, MicPairSet("b", [(1, 0)]))
    nonpi = np.abs(fwd) < np.pi
    np.testing.assert_array_equal(fwd[nonpi], -rev[nonpi])
    np.testing.assert_array_equal(ipd(spec, MicPairSet("a", [(0, 1)]), "cos"),
                                  ipd(spec, MicPairSet("b", [(1, 0)]), "cos"))
    np.testing.assert_array_equal(ipd(spec, MicPairSet("a", [(0, 1)]), "sin")[nonpi],
                                  -ipd(spec, MicPairSet("b", [(1, 0)]), "sin")[nonpi])


def test_ipd_unit_circle_and_scale_invariance():
    rng = np.random.default_rng(2)
    x = rng.standard_normal((15, 2000))
    spec = stft(MultiChannelSignal(x, FS))
    pairs = builtin_pair_set("v0")
    c, s = ipd(spec, pairs, "cos"), ipd(spec, pairs, "sin")
    np.testing.assert_allclose(c**2 + s**2, 1.0, atol=1e-9)
    scaled = stft(MultiChannelSignal(3.7 * x, FS))
    np.testing.assert_allclose(ipd(scaled, pairs), ipd(spec, pairs), atol=1e-12)


def test_ipd_zero_bins_and_bad_kind():
    spec = spec_of(np.zeros(1000), np.random.default_rng(3).standard_normal(1000))
    assert np.all(ipd(spec, PAIR) == 0)
    with pytest.raises(ValueError):
        ipd(spec, PAIR, "tan")
    with pytest.raises(IndexError):
        ipd(spec, MicPairSet("x", [(0, 5)]))


def test_phase0():
    spec = spec_of(np.ones(1000))
    assert np.all(phase0(spec)[:, 0] == 0)
    assert np.allclose(phase0(spec_of(-np.ones(1000)))[:, 0], np.pi)
    y = stft(MultiChannelSignal(np.random.default_rng(4).standard_normal(1000), FS)).bins[0]
    np.testing.assert_array_equal(phase0(spec_of(np.random.default_rng(4).standard_normal(1000))),
                                  np.arctan2(y.imag, y.real))


def test_tpd_broadside_is_zero(geom):
    t = tpd(geom, builtin_pair_set("v1"), SourceAngleTrack.static(90.0, 4), 257)
    np.testing.assert_allclose(t, 0.0, atol=1e-12)


def test_tpd_closed_form(geom):
    # pair (0,1) spans 0.07 m; bin 32 is 1000 Hz. cos(theta) -> 1 as theta -> 0
    theta = 1e-6
    t = tpd(geom, MicPairSet("p", [(0, 1)]), SourceAngleTrack.static(theta, 1), 257)
    assert t[0, 0, 32] == pytest.approx(2 * np.pi * 1000 * 0.07 / 343, abs=1e-9)
    assert 2 * np.pi * 1000 * 0.07 / 343 == pytest.approx(1.2823, abs=1e-4)
    assert np.all(t[:, :, 0] == 0)


def test_tpd_frequency_linear(geom):
    t = tpd(geom, builtin_pair_set("v2"), SourceAngleTrack.static(37.0, 3), 257)
    k = np.arange(1, 129)
    np.testing.assert_array_equal(t[:, :, 2 * k], 2 * t[:, :, k])


@pytest.mark.parametrize("bad", [0.0, 180.0, -5.0, 200.0, np.nan])
def test_angle_track_rejects_out_of_range(bad):
    with pytest.raises(ValueError):
        SourceAngleTrack.static(bad, 3)


def plane_wave_spectrum(geom, theta, n_frames):
    """Exact steering-vector spectrum of a unit plane wave, (15, frames, 257)."""
    tau = geom.delays(theta)
    f = np.arange(257) * FS / 512
    y = np.exp(-2j * np.pi * f[None, None, :] * tau[:, None, None])
    return MultiChannelSpectrogram(np.repeat(y, n_frames, axis=1), FS, StftConfig())


def test_af_when_ipd_equals_tpd(geom):
    pairs = builtin_pair_set("v0")
    track = SourceAngleTrack.static(60.0, 5)
    spec = plane_wave_spectrum(geom, 60.0, 5)
    np.testing.assert_allclose(np.cos(tpd(geom, pairs, track, 257) - ipd(spec, pairs)), 1.0,
                               atol=1e-9)
    np.testing.assert_allclose(angle_feature(spec, geom, pairs, track), 6.0, atol=1e-9)


def test_af_when_ipd_is_tpd_plus_pi(geom):
    # v0's pair graph is bipartite ({0,2,3,5} vs {7,9,11}); negating one side
    # adds pi to every pair's phase difference
    pairs = builtin_pair_set("v0")
    track = SourceAngleTrack.static(45.0, 4)
    spec = plane_wave_spectrum(geom, 45.0, 4)
    sign = np.ones(15)
    sign[[7, 9, 11]] = -1.0
    flipped = MultiChannelSpectrogram(spec.bins * sign[:, None, None], FS, StftConfig())
    np.testing.assert_allclose(angle_feature(flipped, geom, pairs, track), -6.0, atol=1e-9)


@pytest.mark.parametrize("theta", [30.0, 60.0, 120.0])
def test_af_plane_wave_tone(geom, theta):
    pairs = builtin_pair_set("v0")
    spec = stft(spatialize(tone(1000.0), theta, geom))
    af = angle_feature(spec, geom, pairs, SourceAngleTrack.static(theta, spec.n_frames))
    core = af[5:-5, 32]
    assert np.all(core >= 0.95 * len(pairs))


@settings(max_examples=40, deadline=None)
@given(st.floats(1.0, 179.0), st.integers(0, 2**32 - 1))
def test_af_bounded(theta, seed):
    from mcasv.geometry import build_paper_array
    g = build_paper_array()
    x = np.random.default_rng(seed).standard_normal((15, 800))
    spec = stft(MultiChannelSignal(x, FS))
    pairs = builtin_pair_set("v2")
    af = angle_feature(spec, g, pairs, SourceAngleTrack.static(theta, spec.n_frames))
    assert np.all(af <= len(pairs) + 1e-9) and np.all(af >= -len(pairs) - 1e-9)


def test_af_track_length_mismatch(geom):
    spec = stft(MultiChannelSignal(np.zeros((15, 1000)), FS))
    with pytest.raises(ValueError):
        angle_feature(spec, geom, builtin_pair_set("v0"), SourceAngleTrack.static(60.0, 2))


def test_af_silent_bins_use_zero_ipd(geom):
    spec = stft(MultiChannelSignal(np.zeros((15, 1000)), FS))
    pairs = builtin_pair_set("v0")
    track = SourceAngleTrack.static(70.0, spec.n_frames)
    np.testing.assert_allclose(angle_feature(spec, geom, pairs, track),
                               np.cos(tpd(geom, pairs, track, 257)).sum(axis=0))
