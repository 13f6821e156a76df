"""Config-driven feature assembly: compute named planes, concatenate along channels."""

from __future__ import annotations

import json
import re
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from mcasv.directional import delay_and_sum_grid, dpr
from mcasv.dsp import LPS_EPS, MultiChannelSignal, StftConfig, log_mel_filterbank, log_power_spectrum, stft
from mcasv.formats import FeatureStack
from mcasv.geometry import ArrayGeometry, build_paper_array, builtin_pair_set
from mcasv.sinc import SincFilterBank, mult_chan_sinc
from mcasv.spatial import SourceAngleTrack, angle_feature, ipd, phase0

_FEATURE_RE = re.compile(
    r"^(?:(?P<simple>fbank80|lps|phase0|multchansinc)"
    r"|(?P<ipd>cosipd|sinipd)\((?P<pairs>v[0-2])\)"
    r"|(?P<dir>dpr|af)\((?P<n>[12])\))$"
)


class UndefinedOnCleanError(ValueError):
    """A second-source feature was requested for a mixture with only the target."""

    def __init__(self, feature: str):
        super().__init__(
            f"undefined-on-clean: {feature} needs an interference or noise source angle, "
            "but the mixture has only the target"
        )
        self.feature = feature


@dataclass
class PipelineConfig:
    features: list = field(default_factory=lambda: ["lps", "cosipd(v0)", "dpr(1)", "af(1)"])
    stft: StftConfig = field(default_factory=StftConfig)
    # pair set for dpr/af steering and for multchansinc channel selection
    pairs: str = "v0"
    n_looks: int = 10
    look_span: tuple = (0.0, 180.0)
    n_mels: int = 80
    mel_fmin: float = 20.0
    mel_fmax: float = 7600.0
    lps_eps: float = LPS_EPS
    lps_log_base: str = "e"
    sinc_filters: int = 257
    sinc_taps: int = 251
    sinc_fmin: float = 30.0
    sinc_fmax: float = 7600.0
    normalize: bool = False

    def __post_init__(self):
        if isinstance(self.stft, dict):
            self.stft = StftConfig(**self.stft)
        self.look_span = tuple(self.look_span)
        self.features = list(self.features)
        if not self.features:
            raise ValueError("feature list is empty")
        if len(set(self.features)) != len(self.features):
            raise ValueError(f"duplicate feature identifiers in {self.features}")
        for name in self.features:
            if not _FEATURE_RE.match(name):
                raise ValueError(f"unknown feature identifier {name!r}")
        builtin_pair_set(self.pairs)
        widths = {self.plane_width(f) for f in self.features}
        if len(widths) > 1:
            raise ValueError(
                f"features {self.features} mix plane widths {sorted(widths)}; "
                "planes are concatenated without resampling"
            )

    def plane_width(self, name: str) -> int:
        if name == "fbank80":
            return self.n_mels
        if name == "multchansinc":
            return self.sinc_filters
        return self.stft.n_bins

    @classmethod
    def from_json(cls, doc) -> "PipelineConfig":
        if isinstance(doc, (str, Path)):
            doc = json.loads(Path(doc).read_text())
        return cls(**doc)

    def to_json(self) -> dict:
        d = asdict(self)
        d["look_span"] = list(self.look_span)
        return d


def _track(meta: dict, key: str, n_frames: int, label: str) -> SourceAngleTrack:
    return SourceAngleTrack.static(meta["angles"][key], n_frames, label)


def secondary_track(meta: dict, n_frames: int, feature: str) -> SourceAngleTrack:
    """Interference angle if present, else the noise-source angle."""
    angles = meta.get("angles", {})
    if angles.get("interference") is not None:
        return _track(meta, "interference", n_frames, "interference")
    if angles.get("noise") is not None:
        return _track(meta, "noise", n_frames, "noise")
    raise UndefinedOnCleanError(feature)


def run_pipeline(sig: MultiChannelSignal, meta: dict, cfg: PipelineConfig,
                 geom: ArrayGeometry | None = None) -> FeatureStack:
    """Compute ``cfg.features`` in order and stack them as planes."""
    geom = build_paper_array() if geom is None else geom
    if sig.sample_rate != geom.sample_rate:
        raise ValueError(f"signal rate {sig.sample_rate} differs from array rate {geom.sample_rate}")
    if sig.n_channels != geom.n_mics:
        raise ValueError(f"signal has {sig.n_channels} channels, array has {geom.n_mics} mics")
    # fail before any heavy computation
    for name in cfg.features:
        if name in ("dpr(2)", "af(2)"):
            secondary_track(meta, 1, name)

    spec = stft(sig, cfg.stft)
    T = spec.n_frames
    pairs = builtin_pair_set(cfg.pairs)
    stack = FeatureStack()
    grid = None

    for name in cfg.features:
        m = _FEATURE_RE.match(name)
        if name == "lps":
            stack.append("lps", log_power_spectrum(spec, 0, cfg.lps_eps, cfg.lps_log_base))
        elif name == "fbank80":
            stack.append("fbank80", log_mel_filterbank(spec, 0, cfg.n_mels, cfg.mel_fmin,
                                                       cfg.mel_fmax, cfg.lps_eps))
        elif name == "phase0":
            stack.append("phase0", phase0(spec))
        elif m.group("ipd"):
            kind = "cos" if m.group("ipd") == "cosipd" else "sin"
            ps = builtin_pair_set(m.group("pairs"))
            for (i, j), plane in zip(ps, ipd(spec, ps, kind)):
                stack.append(f"{name}[{i},{j}]", plane)
        elif m.group("dir"):
            tracks = [_track(meta, "target", T, "target")]
            if m.group("n") == "2":
                tracks.append(secondary_track(meta, T, name))
            for track in tracks:
                if m.group("dir") == "dpr":
                    if grid is None:
                        grid = delay_and_sum_grid(geom, cfg.n_looks, cfg.stft, cfg.look_span)
                    plane = dpr(spec, grid, track)
                else:
                    plane = angle_feature(spec, geom, pairs, track)
                stack.append(f"{m.group('dir')}:{track.label}", plane)
        elif name == "multchansinc":
            bank = SincFilterBank.tiled(cfg.sinc_filters, sig.sample_rate, cfg.sinc_taps,
                                        cfg.sinc_fmin, cfg.sinc_fmax)
            channels = pairs.channels()
            for ch, plane in zip(channels, mult_chan_sinc(sig, bank, channels, cfg.stft, cfg.lps_eps)):
                stack.append(f"multchansinc[{ch}]", plane)

    if cfg.normalize:
        stack = normalize_planes(stack)
    return stack


def normalize_planes(stack: FeatureStack, eps: float = 1e-8) -> FeatureStack:
    """Per-plane mean/variance normalization over frames and dims."""
    planes = []
    for p in stack.planes:
        p64 = p.astype(np.float64)
        planes.append((p64 - p64.mean()) / (p64.std() + eps))
    return FeatureStack(planes, list(stack.labels))


def bank_to_stack(bank: SincFilterBank) -> FeatureStack:
    """Filterbank parameters as one-frame planes for the MCFT container."""
    return FeatureStack(
        [bank.raw_low[None, :], bank.raw_band[None, :],
         np.array([[bank.sample_rate, bank.taps]], dtype=np.float64)],
        ["sinc_raw_low", "sinc_raw_band", "sinc_meta"],
    )


def bank_from_stack(stack: FeatureStack) -> SincFilterBank:
    sr, taps = stack.plane("sinc_meta")[0]
    return SincFilterBank(stack.plane("sinc_raw_low")[0].astype(np.float64),
                          stack.plane("sinc_raw_band")[0].astype(np.float64),
                          int(sr), int(taps))
