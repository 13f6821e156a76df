"""Multi-look fixed beamformer bank and directional power ratio (DPR)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from mcasv.dsp import MultiChannelSpectrogram, StftConfig
from mcasv.geometry import ArrayGeometry
from mcasv.spatial import SourceAngleTrack


@dataclass(frozen=True)
class BeamGrid:
    look_angles: np.ndarray  # (P,) degrees
    weights: np.ndarray  # complex (P, n_bins, M)

    def __post_init__(self):
        looks = np.asarray(self.look_angles, dtype=np.float64)
        if looks.size < 2:
            raise ValueError("beam grid needs at least two looks")
        if np.any(np.diff(looks) <= 0) or looks[0] <= 0 or looks[-1] >= 180:
            raise ValueError("look angles must increase strictly inside (0, 180)")
        if self.weights.shape[0] != looks.size:
            raise ValueError("one weight set per look angle is required")
        object.__setattr__(self, "look_angles", looks)

    @property
    def n_looks(self) -> int:
        return self.look_angles.size

    @property
    def n_bins(self) -> int:
        return self.weights.shape[1]

    def nearest_look(self, angles) -> np.ndarray:
        angles = np.asarray(angles, dtype=np.float64)
        return np.argmin(np.abs(angles[..., None] - self.look_angles), axis=-1)


def steering_vectors(geom: ArrayGeometry, angles_deg, n_bins: int, dft_size: int) -> np.ndarray:
    """Unit-modulus plane-wave responses, complex (len(angles), n_bins, M)."""
    f_hz = np.arange(n_bins) * geom.sample_rate / dft_size
    tau = np.stack([geom.delays(a) for a in np.atleast_1d(angles_deg)])  # (A, M)
    return np.exp(-2j * np.pi * f_hz[None, :, None] * tau[:, None, :])


def delay_and_sum_grid(geom: ArrayGeometry, n_looks: int = 10, cfg: StftConfig = StftConfig(),
                       span: tuple[float, float] = (0.0, 180.0)) -> BeamGrid:
    """Delay-and-sum beams at look angles placed at the centers of ``n_looks`` equal sectors."""
    if n_looks < 2:
        raise ValueError("need at least two looks")
    lo, hi = span
    if not 0.0 <= lo < hi <= 180.0:
        raise ValueError(f"invalid look span {span}")
    p = np.arange(1, n_looks + 1)
    looks = lo + (hi - lo) * (p - 0.5) / n_looks
    d = steering_vectors(geom, looks, cfg.n_bins, cfg.dft_size)
    return BeamGrid(looks, d / geom.n_mics)


def beam_powers(spec: MultiChannelSpectrogram, grid: BeamGrid) -> np.ndarray:
    """|w_f(theta_p)^H Y_tf|^2 for every look, (P, frames, bins)."""
    if grid.n_bins != spec.n_bins or grid.weights.shape[2] != spec.n_channels:
        raise ValueError(
            f"grid ({grid.n_bins} bins, {grid.weights.shape[2]} mics) does not match "
            f"spectrogram ({spec.n_bins} bins, {spec.n_channels} channels)"
        )
    out = np.einsum("pfm,mtf->ptf", np.conj(grid.weights), spec.bins)
    return out.real**2 + out.imag**2


def dpr_all(spec: MultiChannelSpectrogram, grid: BeamGrid) -> np.ndarray:
    """DPR for every look, (P, frames, bins). Bins with zero total power get 1/P."""
    power = beam_powers(spec, grid)
    total = power.sum(axis=0)
    safe = np.where(total > 0, total, 1.0)
    return np.where(total > 0, power / safe, 1.0 / grid.n_looks)


def dpr(spec: MultiChannelSpectrogram, grid: BeamGrid, angle: SourceAngleTrack) -> np.ndarray:
    """DPR plane at the look nearest the track angle in each frame, (frames, bins)."""
    if len(angle) != spec.n_frames:
        raise ValueError(f"angle track has {len(angle)} frames, spectrogram has {spec.n_frames}")
    ratios = dpr_all(spec, grid)
    look = grid.nearest_look(angle.angles)
    return ratios[look, np.arange(spec.n_frames), :]
