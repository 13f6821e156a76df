"""Linear microphone array layout and named microphone-pair subsets."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

SOUND_SPEED = 343.0
SAMPLE_RATE = 16000

# 15-mic non-uniform linear array, inter-mic spacings in cm
NULA15_SPACINGS_CM = (7, 6, 5, 4, 3, 2, 1, 1, 2, 3, 4, 5, 6, 7)

_BUILTIN_PAIRS = {
    "v0": ((0, 7), (2, 7), (3, 11), (5, 9), (11, 5), (9, 3)),
    "v1": ((0, 2), (3, 5), (6, 8), (9, 11), (12, 14), (1, 4), (5, 8), (9, 12)),
    "v2": (
        (0, 1), (3, 6), (4, 8), (10, 14), (11, 13),
        (0, 4), (1, 3), (6, 10), (8, 11), (13, 14),
    ),
}


@dataclass(frozen=True, eq=False)
class ArrayGeometry:
    """Microphone positions along a line, in meters.

    Mic 0 is the phase reference for simulation and beam steering.
    """

    positions: np.ndarray
    sound_speed: float = SOUND_SPEED
    sample_rate: int = SAMPLE_RATE

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=np.float64)
        if pos.ndim != 1 or pos.size < 2:
            raise ValueError("array needs at least two microphones on a line")
        if np.any(np.diff(pos) <= 0):
            raise ValueError("microphone positions must be strictly increasing")
        if self.sound_speed <= 0 or self.sample_rate <= 0:
            raise ValueError("sound speed and sample rate must be positive")
        pos.setflags(write=False)
        object.__setattr__(self, "positions", pos)

    def __eq__(self, other):
        if not isinstance(other, ArrayGeometry):
            return NotImplemented
        return (np.array_equal(self.positions, other.positions)
                and self.sound_speed == other.sound_speed and self.sample_rate == other.sample_rate)

    def __hash__(self):
        return hash((self.positions.tobytes(), self.sound_speed, self.sample_rate))

    @property
    def n_mics(self) -> int:
        return self.positions.size

    @property
    def aperture(self) -> float:
        return float(self.positions[-1] - self.positions[0])

    def delays(self, angle_deg: float) -> np.ndarray:
        """Plane-wave arrival delays in seconds for each mic, relative to mic 0."""
        rel = self.positions - self.positions[0]
        return rel * np.cos(np.deg2rad(angle_deg)) / self.sound_speed

    @classmethod
    def from_spacings(cls, spacings_cm, sound_speed=SOUND_SPEED, sample_rate=SAMPLE_RATE):
        pos = np.concatenate([[0.0], np.cumsum(np.asarray(spacings_cm, dtype=np.float64))]) / 100.0
        return cls(pos, float(sound_speed), int(sample_rate))

    @classmethod
    def from_json(cls, doc: dict | str | Path) -> "ArrayGeometry":
        """Build from ``{"spacings_cm": [...], "sound_speed": 343.0, "sample_rate": 16000}``.

        ``doc`` may also be a preset name (``"nula15"``) or a path to a JSON file.
        """
        if isinstance(doc, (str, Path)):
            if str(doc) == "nula15":
                return build_paper_array()
            doc = json.loads(Path(doc).read_text())
        if "spacings_cm" not in doc:
            raise ValueError("geometry document needs 'spacings_cm'")
        return cls.from_spacings(
            doc["spacings_cm"],
            doc.get("sound_speed", SOUND_SPEED),
            doc.get("sample_rate", SAMPLE_RATE),
        )

    def to_json(self) -> dict:
        return {
            "spacings_cm": [round(float(s) * 100.0, 9) for s in np.diff(self.positions)],
            "sound_speed": self.sound_speed,
            "sample_rate": self.sample_rate,
        }


@dataclass(frozen=True)
class MicPairSet:
    name: str
    pairs: tuple = field(default_factory=tuple)

    def __post_init__(self):
        pairs = tuple((int(i), int(j)) for i, j in self.pairs)
        if not pairs:
            raise ValueError("pair set is empty")
        if len(set(pairs)) != len(pairs):
            raise ValueError(f"pair set {self.name!r} has duplicate pairs")
        for i, j in pairs:
            if i == j:
                raise ValueError(f"pair ({i}, {j}) pairs a mic with itself")
            if i < 0 or j < 0:
                raise ValueError(f"negative mic index in pair ({i}, {j})")
        object.__setattr__(self, "pairs", pairs)

    def __len__(self):
        return len(self.pairs)

    def __iter__(self):
        return iter(self.pairs)

    def validate(self, n_mics: int) -> None:
        for i, j in self.pairs:
            if i >= n_mics or j >= n_mics:
                raise IndexError(f"pair ({i}, {j}) out of range for {n_mics} mics")

    def channels(self) -> list[int]:
        """Sorted unique mic indices used by the pairs."""
        return sorted({m for pair in self.pairs for m in pair})

    @property
    def first(self) -> np.ndarray:
        return np.array([i for i, _ in self.pairs])

    @property
    def second(self) -> np.ndarray:
        return np.array([j for _, j in self.pairs])


def build_paper_array() -> ArrayGeometry:
    return ArrayGeometry.from_spacings(NULA15_SPACINGS_CM)


def builtin_pair_set(name: str) -> MicPairSet:
    try:
        pairs = _BUILTIN_PAIRS[name]
    except KeyError:
        raise KeyError(f"unknown pair set {name!r}; choose from {sorted(_BUILTIN_PAIRS)}") from None
    return MicPairSet(name, pairs)


def pair_distance(geom: ArrayGeometry, pair) -> float:
    i, j = pair
    if i == j:
        raise ValueError("pair distance needs two distinct mics")
    n = geom.n_mics
    if not (0 <= i < n and 0 <= j < n):
        raise IndexError(f"pair ({i}, {j}) out of range for {n} mics")
    return abs(float(geom.positions[j] - geom.positions[i]))


def pair_displacement(geom: ArrayGeometry, pairs: MicPairSet) -> np.ndarray:
    """Signed offsets pos[j] - pos[i] per pair; orientation matters for phase terms."""
    pairs.validate(geom.n_mics)
    return geom.positions[pairs.second] - geom.positions[pairs.first]
