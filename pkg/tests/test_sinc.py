import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import FS, rel_err, tone
from mcasv.dsp import MultiChannelSignal, StftConfig, stft
from mcasv.sinc import (
    SincFilterBank, cutoff_gradients, materialize_filters, mult_chan_sinc, sinc_param_gradients,
)


def in_band_fraction(h, lo, hi, n_fft=4096):
    power = np.abs(np.fft.rfft(h, n_fft)) ** 2
    f = np.fft.rfftfreq(n_fft, 1 / FS)
    band = (f >= lo) & (f <= hi)
    return power[band].sum() / power.sum()


def test_equal_cutoffs_give_zero_filter():
    bank = SincFilterBank.from_cutoffs([0.0, 440.0, 8000.0], [0.0, 440.0, 8000.0])
    assert np.all(materialize_filters(bank) == 0.0)


def test_center_tap_before_window():
    bank = SincFilterBank.from_cutoffs([300.0], [3400.0])
    h = materialize_filters(bank)[0]
    centre = (bank.taps - 1) // 2
    assert bank.window()[centre] == 1.0
    assert h[centre] == pytest.approx(2 * (300.0 - 3400.0))


def test_telephone_band_energy():
    h = materialize_filters(SincFilterBank.from_cutoffs([300.0], [3400.0]))[0]
    assert in_band_fraction(h, 300.0, 3400.0) >= 0.85


def test_filters_even_symmetric():
    bank = SincFilterBank.tiled(257)
    h = materialize_filters(bank)
    np.testing.assert_array_equal(h, h[:, ::-1])


def test_tiled_initialisation():
    bank = SincFilterBank.tiled(257)
    lo, hi = bank.cutoffs()
    assert lo[0] == pytest.approx(30.0) and hi[-1] == pytest.approx(7600.0)
    width = hi - lo
    np.testing.assert_allclose(width, width[0])
    np.testing.assert_allclose(lo[1:] - lo[:-1], width[0] / 2)  # 50% overlap


@settings(max_examples=200)
@given(st.lists(st.floats(-1e6, 1e6), min_size=2, max_size=2))
def test_constraint_map_ordered_in_band(raw):
    bank = SincFilterBank([raw[0]], [raw[1]])
    lo, hi = bank.cutoffs()
    assert 0.0 <= lo[0] <= hi[0] <= FS / 2


def test_gradient_at_centre_tap():
    bank = SincFilterBank.from_cutoffs([500.0], [1500.0])
    centre = (bank.taps - 1) // 2
    g = np.zeros((1, bank.taps))
    g[0, centre] = 1.0
    d_low, d_high = cutoff_gradients(bank, g)
    assert d_low[0] == pytest.approx(2.0) and d_high[0] == pytest.approx(-2.0)


def test_zero_upstream_gradient():
    bank = SincFilterBank.tiled(16)
    for g in sinc_param_gradients(bank, np.zeros((16, bank.taps))):
        assert np.all(g == 0)


def fd_cutoff_gradients(bank, upstream, h=1e-3):
    lo, hi = bank.cutoffs()
    out = []
    for which in (0, 1):
        grad = np.zeros(bank.n_filters)
        for i in range(bank.n_filters):
            vals = []
            for step in (h, -h):
                l2, h2 = lo.copy(), hi.copy()
                (l2 if which == 0 else h2)[i] += step
                vals.append(np.sum(upstream * materialize_filters(bank, l2, h2)))
            grad[i] = (vals[0] - vals[1]) / (2 * h)
        out.append(grad)
    return out


def random_bank(rng, n):
    lo = rng.uniform(20.0, 6000.0, n)
    hi = lo + rng.uniform(50.0, 1800.0, n)
    return SincFilterBank.from_cutoffs(lo, hi, FS, 101)


def test_cutoff_gradients_match_finite_differences():
    rng = np.random.default_rng(0)
    bank = random_bank(rng, 20)
    upstream = rng.standard_normal((20, bank.taps))
    analytic = cutoff_gradients(bank, upstream)
    numeric = fd_cutoff_gradients(bank, upstream)
    for a, n in zip(analytic, numeric):
        assert rel_err(a, n) < 1e-5


def test_raw_parameter_gradients_chain_rule():
    rng = np.random.default_rng(1)
    a = rng.uniform(100, 3000, 5) * rng.choice([-1, 1], 5)
    b = rng.uniform(100, 2000, 5) * rng.choice([-1, 1], 5)
    bank = SincFilterBank(a, b, FS, 63)
    up = rng.standard_normal((5, 63))
    _, _, g_a, g_b = sinc_param_gradients(bank, up)
    h = 1e-3
    for k in range(5):
        for vec, g in ((a, g_a), (b, g_b)):
            plus, minus = vec.copy(), vec.copy()
            plus[k] += h
            minus[k] -= h
            def loss(v):
                args = (v, b) if vec is a else (a, v)
                return np.sum(up * materialize_filters(SincFilterBank(*args, FS, 63)))
            assert g[k] == pytest.approx((loss(plus) - loss(minus)) / (2 * h), rel=1e-5)


def test_gradient_shape_checked():
    with pytest.raises(ValueError):
        cutoff_gradients(SincFilterBank.tiled(4), np.zeros((4, 3)))


def test_mult_chan_sinc_zero_signal():
    bank = SincFilterBank.tiled(257)
    out = mult_chan_sinc(MultiChannelSignal(np.zeros((3, 4000)), FS), bank, [0, 2])
    assert out.shape == (2, (4000 - 400) // 160 + 1, 257)
    np.testing.assert_array_equal(out, np.log(1e-10))


def test_mult_chan_sinc_frame_count_matches_stft():
    x = np.random.default_rng(2).standard_normal((2, 5321))
    sig = MultiChannelSignal(x, FS)
    out = mult_chan_sinc(sig, SincFilterBank.tiled(32), [0, 1])
    assert out.shape[1] == stft(sig).n_frames


def test_mult_chan_sinc_in_band_vs_out_of_band():
    bank = SincFilterBank.from_cutoffs([800.0], [1200.0])
    sig = MultiChannelSignal(np.stack([tone(1000.0), tone(6000.0)]), FS)
    out = mult_chan_sinc(sig, bank, [0, 1])
    core = slice(3, -3)
    assert np.all(out[0, core, 0] - out[1, core, 0] >= 2.3)


def test_mult_chan_sinc_preconditions():
    bank = SincFilterBank.tiled(8)
    with pytest.raises(ValueError):
        mult_chan_sinc(MultiChannelSignal(np.zeros(200), FS), bank, [0])
    with pytest.raises(IndexError):
        mult_chan_sinc(MultiChannelSignal(np.zeros(1000), FS), bank, [1])
    with pytest.raises(ValueError):
        SincFilterBank([1.0], [1.0], FS, 250)
