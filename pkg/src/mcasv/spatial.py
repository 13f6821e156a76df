"""Phase-based spatial features: IPD, reference phase, TPD and angle features."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from mcasv.dsp import MultiChannelSpectrogram
from mcasv.geometry import ArrayGeometry, MicPairSet, pair_displacement

SOURCE_LABELS = ("target", "interference", "noise")


@dataclass(frozen=True)
class SourceAngleTrack:
    """Azimuth in degrees per STFT frame, strictly inside (0, 180)."""

    angles: np.ndarray
    label: str = "target"

    def __post_init__(self):
        a = np.atleast_1d(np.asarray(self.angles, dtype=np.float64))
        if a.ndim != 1:
            raise ValueError("angle track must be one angle per frame")
        if np.any(~np.isfinite(a)) or np.any(a <= 0.0) or np.any(a >= 180.0):
            raise ValueError("source angles must lie strictly inside (0, 180) degrees")
        if self.label not in SOURCE_LABELS:
            raise ValueError(f"unknown source label {self.label!r}")
        object.__setattr__(self, "angles", a)

    @classmethod
    def static(cls, angle: float, n_frames: int, label: str = "target") -> "SourceAngleTrack":
        return cls(np.full(n_frames, float(angle)), label)

    def __len__(self):
        return self.angles.size


def _cross_phase(yi: np.ndarray, yj: np.ndarray) -> np.ndarray:
    """angle(yi * conj(yj)) in (-pi, pi], exactly 0 if either side is zero.

    Real/imaginary parts are formed explicitly so identical inputs give an
    exactly zero imaginary part and swapped inputs an exactly negated one.
    """
    a, b, c, d = yi.real, yi.imag, yj.real, yj.imag
    # + 0.0 turns -0.0 into +0.0 so silent bins map to 0, not pi
    re = a * c + b * d + 0.0
    im = b * c - a * d + 0.0
    phase = np.arctan2(im, re)
    return np.where(phase == -np.pi, np.pi, phase)


def ipd(spec: MultiChannelSpectrogram, pairs: MicPairSet, kind: str = "raw") -> np.ndarray:
    """Phase of Y_i / Y_j per pair in (-pi, pi], shape (n_pairs, frames, bins).

    Computed as angle(Y_i * conj(Y_j)), which equals the ratio's phase and
    is 0 when either bin is exactly zero.
    """
    if kind not in ("raw", "cos", "sin"):
        raise ValueError(f"IPD kind must be raw, cos or sin; got {kind!r}")
    pairs.validate(spec.n_channels)
    y = spec.bins
    raw = _cross_phase(y[pairs.first], y[pairs.second])
    if kind == "cos":
        return np.cos(raw)
    if kind == "sin":
        return np.sin(raw)
    return raw


def phase0(spec: MultiChannelSpectrogram) -> np.ndarray:
    """Absolute phase of the first microphone, (frames, bins)."""
    y = spec.bins[0]
    return np.arctan2(y.imag + 0.0, y.real + 0.0)


def tpd(geom: ArrayGeometry, pairs: MicPairSet, angle: SourceAngleTrack, n_bins: int,
        dft_size: int | None = None) -> np.ndarray:
    """Theoretical plane-wave phase delay per pair, (n_pairs, frames, bins).

    TPD = 2*pi * f_hz * (pos_j - pos_i) * cos(theta_t) / c with
    f_hz = bin * f_s / dft_size. The pair offset is signed so that TPD tracks
    the orientation of the matching IPD.
    """
    if dft_size is None:
        dft_size = 2 * (n_bins - 1)
    f_hz = np.arange(n_bins) * geom.sample_rate / dft_size
    offsets = pair_displacement(geom, pairs)
    cos_t = np.cos(np.deg2rad(angle.angles))
    scale = 2.0 * np.pi / geom.sound_speed
    return scale * offsets[:, None, None] * cos_t[None, :, None] * f_hz[None, None, :]


def angle_feature(spec: MultiChannelSpectrogram, geom: ArrayGeometry, pairs: MicPairSet,
                  angle: SourceAngleTrack) -> np.ndarray:
    """Sum over pairs of cos(TPD - IPD), shape (frames, bins)."""
    if len(angle) != spec.n_frames:
        raise ValueError(f"angle track has {len(angle)} frames, spectrogram has {spec.n_frames}")
    if geom.sample_rate != spec.sample_rate:
        raise ValueError("geometry and spectrogram sample rates differ")
    phase = ipd(spec, pairs, "raw")
    target = tpd(geom, pairs, angle, spec.n_bins, spec.config.dft_size)
    return np.cos(target - phase).sum(axis=0)
