"""Non-neural building blocks for multi-channel speaker verification.

Feature extraction (spectral, spatial, directional, sinc), far-field array
simulation, loss algebra with triplet mining, and verification metrics.
"""

from mcasv.geometry import ArrayGeometry, MicPairSet, build_paper_array, builtin_pair_set
from mcasv.dsp import MultiChannelSignal, MultiChannelSpectrogram, StftConfig, stft

__all__ = [
    "ArrayGeometry",
    "MicPairSet",
    "build_paper_array",
    "builtin_pair_set",
    "MultiChannelSignal",
    "MultiChannelSpectrogram",
    "StftConfig",
    "stft",
]

__version__ = "0.1.0"
