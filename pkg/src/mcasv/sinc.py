"""Parametric sinc band-pass filterbank applied per microphone channel.

Each filter is ``2 f_lo sinc(2 pi f_lo t) - 2 f_hi sinc(2 pi f_hi t)`` with
``t`` in seconds, times a Hamming window. Cutoffs come from unconstrained raw
parameters through ``f_lo = |a|``, ``f_hi = f_lo + |b|``, both clamped to
Nyquist, so any raw values give ordered, in-band cutoffs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve

from mcasv.dsp import LPS_EPS, MultiChannelSignal, StftConfig


@dataclass(frozen=True)
class SincFilterBank:
    raw_low: np.ndarray
    raw_band: np.ndarray
    sample_rate: int = 16000
    taps: int = 251

    def __post_init__(self):
        a = np.atleast_1d(np.asarray(self.raw_low, dtype=np.float64))
        b = np.atleast_1d(np.asarray(self.raw_band, dtype=np.float64))
        if a.shape != b.shape or a.ndim != 1:
            raise ValueError("raw_low and raw_band must be equal-length vectors")
        if self.taps % 2 == 0 or self.taps < 3:
            raise ValueError("tap count must be odd and at least 3")
        object.__setattr__(self, "raw_low", a)
        object.__setattr__(self, "raw_band", b)

    @classmethod
    def from_cutoffs(cls, f_low, f_high, sample_rate=16000, taps=251) -> "SincFilterBank":
        f_low = np.asarray(f_low, dtype=np.float64)
        f_high = np.asarray(f_high, dtype=np.float64)
        if np.any(f_low < 0) or np.any(f_high < f_low):
            raise ValueError("cutoffs must satisfy 0 <= f_low <= f_high")
        return cls(f_low, f_high - f_low, sample_rate, taps)

    @classmethod
    def tiled(cls, n_filters=257, sample_rate=16000, taps=251, fmin=30.0, fmax=7600.0):
        """Equal-width bands tiling [fmin, fmax] with 50% overlap."""
        width = 2.0 * (fmax - fmin) / (n_filters + 1)
        lows = fmin + 0.5 * width * np.arange(n_filters)
        return cls.from_cutoffs(lows, lows + width, sample_rate, taps)

    @property
    def n_filters(self) -> int:
        return self.raw_low.size

    @property
    def nyquist(self) -> float:
        return self.sample_rate / 2.0

    def cutoffs(self) -> tuple[np.ndarray, np.ndarray]:
        f_low = np.minimum(np.abs(self.raw_low), self.nyquist)
        f_high = np.minimum(f_low + np.abs(self.raw_band), self.nyquist)
        return f_low, f_high

    def tap_times(self) -> np.ndarray:
        half = (self.taps - 1) // 2
        return np.arange(-half, half + 1) / self.sample_rate

    def window(self) -> np.ndarray:
        return np.hamming(self.taps)


def _sinc_term(f: np.ndarray, t: np.ndarray) -> np.ndarray:
    # 2 f sinc(2 pi f t) with sinc(x) = sin(x)/x; numpy's sinc is normalized
    return 2.0 * f[:, None] * np.sinc(2.0 * f[:, None] * t[None, :])


def materialize_filters(bank: SincFilterBank, f_low=None, f_high=None) -> np.ndarray:
    """Windowed filters, shape (n_filters, taps)."""
    if f_low is None or f_high is None:
        f_low, f_high = bank.cutoffs()
    t = bank.tap_times()
    raw = _sinc_term(np.asarray(f_low, float), t) - _sinc_term(np.asarray(f_high, float), t)
    return raw * bank.window()[None, :]


def cutoff_gradients(bank: SincFilterBank, upstream_grad: np.ndarray):
    """Gradients of sum(upstream_grad * filters) w.r.t. (f_low, f_high) per filter."""
    g = np.asarray(upstream_grad, dtype=np.float64)
    if g.shape != (bank.n_filters, bank.taps):
        raise ValueError(f"upstream gradient must be {(bank.n_filters, bank.taps)}, got {g.shape}")
    f_low, f_high = bank.cutoffs()
    t = bank.tap_times()
    w = bank.window()
    d_low = 2.0 * np.cos(2.0 * np.pi * f_low[:, None] * t[None, :]) * w
    d_high = -2.0 * np.cos(2.0 * np.pi * f_high[:, None] * t[None, :]) * w
    return (g * d_low).sum(axis=1), (g * d_high).sum(axis=1)


def sinc_param_gradients(bank: SincFilterBank, upstream_grad: np.ndarray):
    """Gradients w.r.t. the cutoffs and, through the constraint map, the raw parameters.

    Returns ``(grad_f_low, grad_f_high, grad_raw_low, grad_raw_band)``. Clamped
    cutoffs pass no gradient; ``|.|`` uses sign(0) = 0.
    """
    g_low, g_high = cutoff_gradients(bank, upstream_grad)
    a, b = bank.raw_low, bank.raw_band
    nyq = bank.nyquist
    low_free = np.abs(a) < nyq
    high_free = np.minimum(np.abs(a), nyq) + np.abs(b) < nyq
    g_high_eff = np.where(high_free, g_high, 0.0)
    g_a = np.sign(a) * np.where(low_free, g_low + g_high_eff, 0.0)
    g_b = np.sign(b) * g_high_eff
    return g_low, g_high, g_a, g_b


def pool_frames(x: np.ndarray, win: int, hop: int) -> np.ndarray:
    """Mean over framed windows of the last axis, (..., n_frames)."""
    n = x.shape[-1]
    n_frames = (n - win) // hop + 1
    csum = np.concatenate([np.zeros(x.shape[:-1] + (1,)), np.cumsum(x, axis=-1)], axis=-1)
    starts = np.arange(n_frames) * hop
    return (csum[..., starts + win] - csum[..., starts]) / win


def mult_chan_sinc(sig: MultiChannelSignal, bank: SincFilterBank, channels,
                   cfg: StftConfig = StftConfig(), floor_eps: float = LPS_EPS) -> np.ndarray:
    """Per-channel sinc features on the STFT frame grid, (n_channels, frames, n_filters).

    Each filter output is rectified, mean-pooled over the analysis window and
    log-compressed.
    """
    fs = sig.sample_rate
    if fs != bank.sample_rate:
        raise ValueError("signal and filterbank sample rates differ")
    if len(sig) < bank.taps:
        raise ValueError(f"signal of {len(sig)} samples is shorter than the {bank.taps}-tap filters")
    win, hop = cfg.win_length(fs), cfg.hop_length(fs)
    if len(sig) < win:
        raise ValueError("signal is shorter than one analysis window")
    filters = materialize_filters(bank)
    half = (bank.taps - 1) // 2
    planes = []
    for m in channels:
        if not 0 <= m < sig.n_channels:
            raise IndexError(f"channel {m} out of range for {sig.n_channels} channels")
        # centred ("same") slice of the full convolution, one row per filter
        y = fftconvolve(filters, sig.samples[m][None, :], axes=-1)[:, half : half + len(sig)]
        # fftconvolve leaves ~1e-12 residue on silent input; keep exact zeros exact
        if not np.any(sig.samples[m]):
            y = np.zeros_like(y)
        planes.append(np.log(pool_frames(np.abs(y), win, hop).T + floor_eps))
    return np.stack(planes)
