"""Far-field multi-channel mixture synthesis with SNR/SIR control.

Sources are spatialized as anechoic plane waves with fractional delays
relative to mic 0. Randomness comes from :mod:`mcasv.rng`.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.signal import fftconvolve

from mcasv.dsp import MultiChannelSignal, StftConfig, fractional_delay, frame_signal, stft
from mcasv.geometry import ArrayGeometry
from mcasv.rng import derive_seed, make_rng  # noqa: F401


def _check_angle(angle: float, closed: bool = False) -> None:
    ok = 0.0 <= angle <= 180.0 if closed else 0.0 < angle < 180.0
    if not ok:
        raise ValueError(f"source angle {angle} outside the (0, 180) degree half-plane")


@dataclass(frozen=True)
class MixSpec:
    snr_db: float | None = None
    sir_db: float | None = None
    p_tar: float = 0.15
    target_angle: float = 90.0
    interference_angle: float | None = None
    noise_angle: float | None = None
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.p_tar <= 1.0:
            raise ValueError("p_tar must be a probability")
        if self.snr_db is not None and not np.isfinite(self.snr_db):
            raise ValueError("snr_db must be finite")
        if self.sir_db is not None and not np.isfinite(self.sir_db):
            raise ValueError("sir_db must be finite")
        for a in (self.target_angle, self.interference_angle, self.noise_angle):
            if a is not None:
                _check_angle(a)


@dataclass
class SimulationOutput:
    mixture: MultiChannelSignal
    clean_reference: np.ndarray
    vad_labels: np.ndarray
    enhancement_target: np.ndarray
    manifest: dict = field(default_factory=dict)


def spatialize(src: np.ndarray, angle: float, geom: ArrayGeometry,
               impulse_responses: np.ndarray | None = None,
               filter_half_len: int = 32) -> MultiChannelSignal:
    """Plane wave from ``angle`` degrees; channel m is ``src`` delayed by tau_m * f_s.

    ``impulse_responses`` of shape (M, L) replaces the plane-wave model with a
    per-channel convolution when given. Endfire angles 0 and 180 are accepted.
    """
    _check_angle(angle, closed=True)
    src = np.asarray(src, dtype=np.float64)
    if impulse_responses is not None:
        irs = np.atleast_2d(impulse_responses)
        if irs.shape[0] != geom.n_mics:
            raise ValueError(f"need {geom.n_mics} impulse responses, got {irs.shape[0]}")
        out = fftconvolve(src[None, :], irs, axes=-1)[:, : src.size]
        return MultiChannelSignal(out, geom.sample_rate)
    delays = geom.delays(angle) * geom.sample_rate
    out = np.stack([src.copy() if d == 0.0 else fractional_delay(src, d, filter_half_len)
                    for d in delays])
    return MultiChannelSignal(out, geom.sample_rate)


def frame_energies(x: np.ndarray, cfg: StftConfig, sample_rate: int) -> np.ndarray:
    frames = frame_signal(np.asarray(x, dtype=np.float64), cfg.win_length(sample_rate),
                          cfg.hop_length(sample_rate))
    return (frames**2).sum(axis=-1)


def energy_vad_labels(clean: np.ndarray, cfg: StftConfig = StftConfig(), sample_rate: int = 16000,
                      threshold_db: float = 40.0) -> np.ndarray:
    """Frame is speech iff its energy in dB exceeds the loudest frame's minus ``threshold_db``."""
    energy = frame_energies(clean, cfg, sample_rate)
    if not np.any(energy > 0):
        return np.zeros(energy.size, dtype=bool)
    with np.errstate(divide="ignore"):
        level = 10.0 * np.log10(energy)
    return level > level.max() - threshold_db


def active_mask(clean: np.ndarray, cfg: StftConfig, sample_rate: int,
                threshold_db: float = 40.0) -> np.ndarray:
    """Sample mask covering every VAD-active frame."""
    labels = energy_vad_labels(clean, cfg, sample_rate, threshold_db)
    win, hop = cfg.win_length(sample_rate), cfg.hop_length(sample_rate)
    mask = np.zeros(np.asarray(clean).size, dtype=bool)
    for t in np.flatnonzero(labels):
        mask[t * hop : t * hop + win] = True
    return mask


def active_power(x: np.ndarray, mask: np.ndarray) -> float:
    return float(np.mean(np.asarray(x)[mask] ** 2)) if mask.any() else 0.0


def loop_to_length(x: np.ndarray, n: int) -> np.ndarray:
    x = np.atleast_2d(x)
    reps = -(-n // x.shape[1])
    return np.tile(x, (1, reps))[:, :n]


def fit_to_length(x: np.ndarray, n: int) -> np.ndarray:
    x = np.atleast_2d(x)
    if x.shape[1] >= n:
        return x[:, :n]
    return np.pad(x, ((0, 0), (0, n - x.shape[1])))


def draw_interference(seed: int, p_tar: float) -> bool:
    """Seeded Bernoulli(p_tar) draw deciding whether interference is mixed in."""
    return bool(make_rng(seed).random() < p_tar)


def level_gain(ref_power: float, other_power: float, ratio_db: float) -> float:
    """Gain g with 10 log10(ref / (g^2 other)) = ratio_db."""
    if other_power <= 0:
        raise ValueError("cannot level a silent component")
    return float(np.sqrt(ref_power / (other_power * 10.0 ** (ratio_db / 10.0))))


def mix(target: MultiChannelSignal, interference: MultiChannelSignal | None,
        noise: MultiChannelSignal | None, spec: MixSpec, cfg: StftConfig = StftConfig(),
        vad_threshold_db: float = 40.0) -> SimulationOutput:
    """Scale and sum spatialized components; levels are measured at mic 0 over active speech."""
    fs = target.sample_rate
    n = len(target)
    ref = target.samples[0]
    mask = active_mask(ref, cfg, fs, vad_threshold_db)
    p_target = active_power(ref, mask)
    if p_target <= 0:
        raise ValueError("target has no active speech; SNR/SIR cannot be set")

    mixture = target.samples.copy()
    gains = {}
    include = interference is not None and draw_interference(spec.seed, spec.p_tar)
    if include:
        if spec.sir_db is None:
            raise ValueError("interference drawn but no sir_db given")
        interf = fit_to_length(interference.samples, n)
        g = level_gain(p_target, active_power(interf[0], mask), spec.sir_db)
        mixture += g * interf
        gains["interference"] = g
    if noise is not None:
        if spec.snr_db is None:
            raise ValueError("noise given but no snr_db")
        nz = loop_to_length(noise.samples, n)
        g = level_gain(p_target, active_power(nz[0], mask), spec.snr_db)
        mixture += g * nz
        gains["noise"] = g

    clean = MultiChannelSignal(ref, fs)
    vad = energy_vad_labels(ref, cfg, fs, vad_threshold_db)
    enh = np.abs(stft(clean, cfg).bins[0])
    angles = {"target": spec.target_angle}
    if include:
        angles["interference"] = spec.interference_angle
    if noise is not None:
        angles["noise"] = spec.noise_angle
    manifest = {
        "angles": angles,
        "gains": gains,
        "seed": int(spec.seed),
        "interference_present": include,
        "snr_db": spec.snr_db if noise is not None else None,
        "sir_db": spec.sir_db if include else None,
    }
    return SimulationOutput(MultiChannelSignal(mixture, fs), ref.copy(), vad, enh, manifest)


def sample_angle(rng: np.random.Generator) -> float:
    while True:
        a = float(rng.uniform(0.0, 180.0))
        if 0.0 < a < 180.0:
            return a


def realized_ratio_db(reference: np.ndarray, component: np.ndarray, mask: np.ndarray) -> float:
    return 10.0 * np.log10(active_power(reference, mask) / active_power(component, mask))
