"""Framing, STFT, log spectra, mel filterbank and fractional delay.

All transforms use an unnormalized forward DFT, no pre-emphasis and no
dithering, so outputs are bit-deterministic for a given input.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import get_window

LPS_EPS = 1e-10


@dataclass(frozen=True)
class MultiChannelSignal:
    samples: np.ndarray  # (channels, n_samples)
    sample_rate: int

    def __post_init__(self):
        x = np.asarray(self.samples, dtype=np.float64)
        if x.ndim == 1:
            x = x[None, :]
        if x.ndim != 2:
            raise ValueError("samples must be (channels, n_samples)")
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")
        object.__setattr__(self, "samples", x)

    @property
    def n_channels(self) -> int:
        return self.samples.shape[0]

    def __len__(self) -> int:
        return self.samples.shape[1]

    def channel(self, m: int) -> np.ndarray:
        return self.samples[m]


@dataclass(frozen=True)
class StftConfig:
    dft_size: int = 512
    window_ms: float = 25.0
    hop_ms: float = 10.0
    window_kind: str = "hann"

    def win_length(self, sample_rate: int) -> int:
        return int(round(self.window_ms * sample_rate / 1000.0))

    def hop_length(self, sample_rate: int) -> int:
        return int(round(self.hop_ms * sample_rate / 1000.0))

    @property
    def n_bins(self) -> int:
        return self.dft_size // 2 + 1

    def validate(self, sample_rate: int) -> None:
        win, hop = self.win_length(sample_rate), self.hop_length(sample_rate)
        if self.window_kind not in ("hann", "hamming"):
            raise ValueError(f"unsupported window {self.window_kind!r}")
        if not 0 < win <= self.dft_size:
            raise ValueError(f"window of {win} samples does not fit a {self.dft_size}-point DFT")
        if not 0 < hop <= win:
            raise ValueError("hop must be positive and no longer than the window")

    def window(self, sample_rate: int) -> np.ndarray:
        # periodic (DFT-even) window
        return get_window(self.window_kind, self.win_length(sample_rate), fftbins=True)

    def n_frames(self, n_samples: int, sample_rate: int) -> int:
        win, hop = self.win_length(sample_rate), self.hop_length(sample_rate)
        if n_samples < win:
            return 0
        return (n_samples - win) // hop + 1

    def bin_frequencies(self, sample_rate: int) -> np.ndarray:
        return np.arange(self.n_bins) * sample_rate / self.dft_size


@dataclass(frozen=True)
class MultiChannelSpectrogram:
    bins: np.ndarray  # complex (channels, frames, n_bins)
    sample_rate: int
    config: StftConfig

    @property
    def n_channels(self) -> int:
        return self.bins.shape[0]

    @property
    def n_frames(self) -> int:
        return self.bins.shape[1]

    @property
    def n_bins(self) -> int:
        return self.bins.shape[2]

    @property
    def frame_times(self) -> np.ndarray:
        """Frame centers in seconds."""
        hop = self.config.hop_length(self.sample_rate)
        win = self.config.win_length(self.sample_rate)
        return (np.arange(self.n_frames) * hop + win / 2.0) / self.sample_rate

    @property
    def frequencies(self) -> np.ndarray:
        return self.config.bin_frequencies(self.sample_rate)


def frame_signal(x: np.ndarray, win: int, hop: int) -> np.ndarray:
    """Frames of the last axis, shape (..., n_frames, win). No padding."""
    n = x.shape[-1]
    if n < win:
        raise ValueError(f"signal of {n} samples is shorter than one {win}-sample window")
    n_frames = (n - win) // hop + 1
    view = np.lib.stride_tricks.sliding_window_view(x, win, axis=-1)
    return view[..., : (n_frames - 1) * hop + 1 : hop, :]


def stft(sig: MultiChannelSignal, cfg: StftConfig = StftConfig()) -> MultiChannelSpectrogram:
    fs = sig.sample_rate
    cfg.validate(fs)
    frames = frame_signal(sig.samples, cfg.win_length(fs), cfg.hop_length(fs))
    spec = np.fft.rfft(frames * cfg.window(fs), n=cfg.dft_size, axis=-1)
    return MultiChannelSpectrogram(spec, fs, cfg)


def _check_channel(spec: MultiChannelSpectrogram, channel: int) -> None:
    if not 0 <= channel < spec.n_channels:
        raise IndexError(f"channel {channel} out of range for {spec.n_channels} channels")


def log_power_spectrum(spec: MultiChannelSpectrogram, channel: int = 0,
                       floor_eps: float = LPS_EPS, log_base: str = "e") -> np.ndarray:
    """(frames, n_bins) log power; natural log unless ``log_base="10"``."""
    _check_channel(spec, channel)
    y = spec.bins[channel]
    power = y.real**2 + y.imag**2
    if log_base == "e":
        return np.log(power + floor_eps)
    if log_base == "10":
        return np.log10(power + floor_eps)
    raise ValueError(f"log_base must be 'e' or '10', got {log_base!r}")


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(n_mels: int, dft_size: int, sample_rate: int,
                   fmin: float = 20.0, fmax: float = 7600.0) -> np.ndarray:
    """Triangular filters on the mel scale, shape (n_mels, dft_size//2 + 1)."""
    if not 0 <= fmin < fmax <= sample_rate / 2:
        raise ValueError(f"invalid mel band edges [{fmin}, {fmax}] for {sample_rate} Hz")
    edges = mel_to_hz(np.linspace(hz_to_mel(fmin), hz_to_mel(fmax), n_mels + 2))
    freqs = np.arange(dft_size // 2 + 1) * sample_rate / dft_size
    lo, center, hi = edges[:-2, None], edges[1:-1, None], edges[2:, None]
    rising = (freqs - lo) / (center - lo)
    falling = (hi - freqs) / (hi - center)
    return np.maximum(0.0, np.minimum(rising, falling))


def mel_centers(n_mels: int, fmin: float = 20.0, fmax: float = 7600.0) -> np.ndarray:
    return mel_to_hz(np.linspace(hz_to_mel(fmin), hz_to_mel(fmax), n_mels + 2))[1:-1]


def log_mel_filterbank(spec: MultiChannelSpectrogram, channel: int = 0, n_mels: int = 80,
                       fmin: float = 20.0, fmax: float = 7600.0,
                       floor_eps: float = LPS_EPS) -> np.ndarray:
    _check_channel(spec, channel)
    fb = mel_filterbank(n_mels, spec.config.dft_size, spec.sample_rate, fmin, fmax)
    y = spec.bins[channel]
    return np.log((y.real**2 + y.imag**2) @ fb.T + floor_eps)


def fractional_delay(x: np.ndarray, delay: float, filter_half_len: int = 32) -> np.ndarray:
    """Delay ``x`` by a real number of samples with a windowed-sinc interpolator.

    Integer delays are exact shifts. Output keeps the input length; samples
    shifted in from outside the signal are zero.
    """
    x = np.asarray(x, dtype=np.float64)
    n = x.size
    if abs(delay) >= n:
        raise ValueError("delay must be shorter than the signal")
    if filter_half_len < 8:
        raise ValueError("filter_half_len must be at least 8 taps")
    whole = int(np.floor(delay))
    frac = delay - whole
    if frac == 0.0:
        kernel, offset = np.ones(1), 0
    else:
        # taps h[k] approximate sinc(k - frac) for k in [-L+1, L]
        k = np.arange(-filter_half_len + 1, filter_half_len + 1)
        u = k - frac
        # evaluate a Blackman window continuously, centered on the fractional point
        phase = (u + filter_half_len) / (2 * filter_half_len)
        win = 0.42 - 0.5 * np.cos(2 * np.pi * phase) + 0.08 * np.cos(4 * np.pi * phase)
        kernel = np.sinc(u) * win
        kernel /= kernel.sum()
        offset = -filter_half_len + 1
    full = np.convolve(x, kernel)
    # y[n] = sum_k h[k] x[n - whole - k]
    shift = whole + offset
    return _place(full, shift, n)


def _place(full: np.ndarray, shift: int, n: int) -> np.ndarray:
    """out[m] = full[m - shift] for 0 <= m - shift < len(full), else 0."""
    out = np.zeros(n)
    m0 = max(0, shift)
    m1 = min(n, shift + full.size)
    if m1 > m0:
        out[m0:m1] = full[m0 - shift : m1 - shift]
    return out
