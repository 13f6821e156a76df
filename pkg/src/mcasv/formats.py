"""Binary containers (MCFT feature stacks, MCEB embeddings) and WAV I/O.

MCFT, little-endian::

    b"MCFT" | u16 version=1 | u16 n_planes | u32 n_frames
    per plane: u8 label_len | label (UTF-8) | u16 width
    payload: float32, plane-major, frame-major within a plane

MCEB, little-endian::

    b"MCEB" | u16 version=1 | u32 n_rows | u16 width
    payload: float32 rows
    string table, per row: u16 len | speaker id (UTF-8) | u16 len | utterance id (UTF-8)
"""

from __future__ import annotations

import enum
import os
import struct
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.io import wavfile

MCFT_MAGIC = b"MCFT"
MCEB_MAGIC = b"MCEB"
VERSION = 1


class ErrorCode(enum.IntEnum):
    BAD_MAGIC = 1
    BAD_VERSION = 2
    TRUNCATED = 3
    DIMENSION_OVERFLOW = 4
    TRAILING_DATA = 5
    BAD_ENCODING = 6


class FormatError(Exception):
    code = None

    def __init__(self, message, path=None):
        self.path = None if path is None else str(path)
        where = f"{self.path}: " if self.path else ""
        super().__init__(f"{where}{message} [code {int(self.code)}]")


class MagicMismatchError(FormatError):
    code = ErrorCode.BAD_MAGIC


class VersionError(FormatError):
    code = ErrorCode.BAD_VERSION


class TruncationError(FormatError):
    code = ErrorCode.TRUNCATED


class DimensionOverflowError(FormatError):
    code = ErrorCode.DIMENSION_OVERFLOW


class TrailingDataError(FormatError):
    code = ErrorCode.TRAILING_DATA


class EncodingError(FormatError):
    code = ErrorCode.BAD_ENCODING


@dataclass
class FeatureStack:
    """Named feature planes sharing one frame axis; each plane is (frames, width)."""

    planes: list = field(default_factory=list)
    labels: list = field(default_factory=list)

    def __post_init__(self):
        self.planes = [np.asarray(p, dtype=np.float32) for p in self.planes]
        if len(self.planes) != len(self.labels):
            raise ValueError("one label per plane is required")
        frames = {p.shape[0] for p in self.planes}
        if any(p.ndim != 2 for p in self.planes) or len(frames) > 1:
            raise ValueError("planes must be 2-D and share a frame count")

    @property
    def n_frames(self) -> int:
        return self.planes[0].shape[0] if self.planes else 0

    @property
    def widths(self) -> list[int]:
        return [p.shape[1] for p in self.planes]

    def __len__(self):
        return len(self.planes)

    def append(self, label: str, plane) -> None:
        plane = np.asarray(plane, dtype=np.float32)
        if plane.ndim == 1:
            plane = plane[:, None]
        if self.planes and plane.shape[0] != self.n_frames:
            raise ValueError(f"plane {label!r} has {plane.shape[0]} frames, stack has {self.n_frames}")
        self.planes.append(plane)
        self.labels.append(label)

    def plane(self, label: str) -> np.ndarray:
        return self.planes[self.labels.index(label)]

    def as_array(self) -> np.ndarray:
        """(planes, frames, width); requires a uniform width."""
        if len(set(self.widths)) != 1:
            raise ValueError(f"mixed plane widths {sorted(set(self.widths))}")
        return np.stack(self.planes)


def _atomic_write(path, data: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def encode_feature_stack(stack: FeatureStack) -> bytes:
    if len(stack) > 0xFFFF:
        raise DimensionOverflowError(f"{len(stack)} planes exceed the u16 plane count")
    if stack.n_frames > 0xFFFFFFFF:
        raise DimensionOverflowError(f"{stack.n_frames} frames exceed the u32 frame count")
    parts = [MCFT_MAGIC, struct.pack("<HHI", VERSION, len(stack), stack.n_frames)]
    for label, plane in zip(stack.labels, stack.planes):
        raw = label.encode("utf-8")
        if len(raw) > 0xFF:
            raise DimensionOverflowError(f"label {label!r} longer than 255 bytes")
        if plane.shape[1] > 0xFFFF:
            raise DimensionOverflowError(f"plane {label!r} width {plane.shape[1]} exceeds u16")
        parts.append(struct.pack("<B", len(raw)) + raw + struct.pack("<H", plane.shape[1]))
    for plane in stack.planes:
        parts.append(np.ascontiguousarray(plane, dtype="<f4").tobytes())
    return b"".join(parts)


class _Reader:
    def __init__(self, data: bytes, path):
        self.data, self.pos, self.path = data, 0, path

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.data):
            raise TruncationError(
                f"truncated while reading {what}: need {n} bytes at offset {self.pos}, "
                f"file has {len(self.data)}", self.path)
        chunk = self.data[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt: str, what: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt), what))

    def text(self, n: int, what: str) -> str:
        raw = self.take(n, what)
        try:
            return raw.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise EncodingError(f"{what} is not valid UTF-8: {exc}", self.path) from None

    def finish(self) -> None:
        if self.pos != len(self.data):
            raise TrailingDataError(f"{len(self.data) - self.pos} unexpected trailing bytes", self.path)


def _check_header(r: _Reader, magic: bytes) -> None:
    got = r.take(4, "magic")
    if got != magic:
        raise MagicMismatchError(f"magic mismatch: expected {magic!r}, found {got!r}", r.path)
    (version,) = r.unpack("<H", "version")
    if version != VERSION:
        raise VersionError(f"unsupported version {version}", r.path)


def decode_feature_stack(data: bytes, path=None) -> FeatureStack:
    r = _Reader(data, path)
    _check_header(r, MCFT_MAGIC)
    n_planes, n_frames = r.unpack("<HI", "header")
    labels, widths = [], []
    for k in range(n_planes):
        (n,) = r.unpack("<B", f"plane {k} label length")
        labels.append(r.text(n, f"plane {k} label"))
        widths.append(r.unpack("<H", f"plane {k} width")[0])
    need = 4 * n_frames * sum(widths)
    if need > len(data) - r.pos:
        raise TruncationError(
            f"header declares {need} payload bytes but only {len(data) - r.pos} remain", path)
    planes = []
    for label, width in zip(labels, widths):
        buf = r.take(4 * n_frames * width, f"plane {label!r}")
        planes.append(np.frombuffer(buf, dtype="<f4").reshape(n_frames, width).astype(np.float32))
    r.finish()
    return FeatureStack(planes, labels)


def write_feature_file(stack: FeatureStack, path) -> None:
    _atomic_write(path, encode_feature_stack(stack))


def read_feature_file(path) -> FeatureStack:
    return decode_feature_stack(Path(path).read_bytes(), path)


@dataclass
class EmbeddingSet:
    vectors: np.ndarray  # (rows, width)
    speakers: list
    utterances: list

    def __post_init__(self):
        self.vectors = np.atleast_2d(np.asarray(self.vectors, dtype=np.float64))
        n = self.vectors.shape[0]
        if len(self.speakers) != n or len(self.utterances) != n:
            raise ValueError("one speaker id and one utterance id per row are required")
        if any(not s for s in self.speakers) or any(not u for u in self.utterances):
            raise ValueError("speaker and utterance ids must be nonempty")
        self.speakers = [str(s) for s in self.speakers]
        self.utterances = [str(u) for u in self.utterances]

    def __len__(self):
        return self.vectors.shape[0]

    @property
    def width(self) -> int:
        return self.vectors.shape[1]

    def index_of(self) -> dict:
        return {u: k for k, u in enumerate(self.utterances)}

    def subset(self, rows) -> "EmbeddingSet":
        rows = list(rows)
        return EmbeddingSet(self.vectors[rows], [self.speakers[k] for k in rows],
                            [self.utterances[k] for k in rows])


def encode_embeddings(emb: EmbeddingSet) -> bytes:
    rows, width = emb.vectors.shape
    if rows > 0xFFFFFFFF or width > 0xFFFF:
        raise DimensionOverflowError(f"embedding matrix {rows}x{width} exceeds header fields")
    parts = [MCEB_MAGIC, struct.pack("<HIH", VERSION, rows, width),
             np.ascontiguousarray(emb.vectors, dtype="<f4").tobytes()]
    for spk, utt in zip(emb.speakers, emb.utterances):
        for s in (spk, utt):
            raw = s.encode("utf-8")
            if len(raw) > 0xFFFF:
                raise DimensionOverflowError(f"id {s[:32]!r}... longer than 65535 bytes")
            parts.append(struct.pack("<H", len(raw)) + raw)
    return b"".join(parts)


def decode_embeddings(data: bytes, path=None) -> EmbeddingSet:
    r = _Reader(data, path)
    _check_header(r, MCEB_MAGIC)
    rows, width = r.unpack("<IH", "header")
    if 4 * rows * width > len(data) - r.pos:
        raise TruncationError(
            f"header declares {rows}x{width} floats but only {len(data) - r.pos} bytes remain", path)
    vectors = np.frombuffer(r.take(4 * rows * width, "vectors"), dtype="<f4").reshape(rows, width)
    speakers, utterances = [], []
    for k in range(rows):
        (n,) = r.unpack("<H", f"row {k} speaker length")
        speakers.append(r.text(n, f"row {k} speaker id"))
        (n,) = r.unpack("<H", f"row {k} utterance length")
        utterances.append(r.text(n, f"row {k} utterance id"))
    r.finish()
    return EmbeddingSet(vectors.astype(np.float32), speakers, utterances)


def write_embeddings(emb: EmbeddingSet, path) -> None:
    _atomic_write(path, encode_embeddings(emb))


def read_embeddings(path) -> EmbeddingSet:
    return decode_embeddings(Path(path).read_bytes(), path)


def read_wav(path, expected_rate: int | None = 16000):
    """Read PCM16 or float32 WAV as float64 (channels, samples) plus the sample rate."""
    rate, data = wavfile.read(path)
    if data.dtype == np.int16:
        x = data.astype(np.float64) / 32768.0
    elif data.dtype == np.float32:
        x = data.astype(np.float64)
    else:
        raise ValueError(f"{path}: unsupported WAV sample type {data.dtype}; use PCM16 or float32")
    if expected_rate is not None and rate != expected_rate:
        raise ValueError(f"{path}: sample rate {rate} Hz, expected {expected_rate} Hz")
    x = x[None, :] if x.ndim == 1 else x.T
    return np.ascontiguousarray(x), int(rate)


def write_wav(path, samples: np.ndarray, sample_rate: int) -> None:
    """Write (channels, samples) as float32 WAV, atomically."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    x = np.asarray(samples, dtype=np.float32)
    x = x[0] if x.shape[0] == 1 else x.T
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    os.close(fd)
    try:
        wavfile.write(tmp, sample_rate, x)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
