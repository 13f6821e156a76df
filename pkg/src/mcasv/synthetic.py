"""Synthetic tone-complex "speakers" for smoke tests and demos.

Each speaker has its own fundamental and harmonic amplitude profile; each
utterance jitters the fundamental slightly and draws a fresh syllable-like
on/off envelope, so utterances of one speaker share a spectral signature.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from mcasv.formats import write_wav
from mcasv.rng import derive_seed, make_rng


def speaker_profile(index: int, seed: int = 0, n_harmonics: int = 12):
    rng = make_rng(derive_seed(seed, 1000 + index))
    f0 = 110.0 * 2 ** (index * 5 / 12)  # a fourth apart, distinct up to ~8 speakers
    amps = rng.uniform(0.1, 1.0, n_harmonics) / np.arange(1, n_harmonics + 1)
    return f0, amps


def tone_utterance(f0, amps, rng, duration=1.0, sample_rate=16000) -> np.ndarray:
    n = int(round(duration * sample_rate))
    t = np.arange(n) / sample_rate
    f = f0 * (1 + 0.01 * rng.standard_normal())
    x = np.zeros(n)
    for h, a in enumerate(amps, 1):
        if h * f < 0.45 * sample_rate:
            x += a * np.sin(2 * np.pi * h * f * t + rng.uniform(0, 2 * np.pi))
    env = np.zeros(n)
    pos = int(rng.integers(800, 2400))
    while pos < n:
        length = int(rng.integers(2400, 4800))
        ramp = np.hanning(length)
        stop = min(n, pos + length)
        env[pos:stop] = ramp[: stop - pos]
        pos = stop + int(rng.integers(800, 2400))
    x *= env
    return 0.3 * x / np.max(np.abs(x))


def make_tone_corpus(out_dir, n_speakers=4, n_utterances=5, seed=0, duration=1.0,
                     snr_db: float | None = 20.0, sample_rate=16000,
                     angles: dict | None = None) -> Path:
    """Write mono WAVs plus a simulation manifest; returns the manifest path.

    ``angles`` pins source directions for every entry (default target 90,
    noise 30); pass ``{}`` to let the simulator draw them per utterance.
    """
    if angles is None:
        angles = {"target": 90.0, "noise": 30.0}
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    noise_name = None
    if snr_db is not None:
        noise = make_rng(derive_seed(seed, 999)).standard_normal(int(duration * sample_rate))
        noise_name = "noise.wav"
        write_wav(out / noise_name, 0.1 * noise[None], sample_rate)
    for s in range(n_speakers):
        f0, amps = speaker_profile(s, seed)
        for u in range(n_utterances):
            rng = make_rng(derive_seed(seed, s * 10_000 + u))
            uid = f"spk{s}-utt{u}"
            write_wav(out / f"{uid}.wav", tone_utterance(f0, amps, rng, duration, sample_rate)[None],
                      sample_rate)
            row = {"id": uid, "speaker": f"spk{s}", "target_wav": f"{uid}.wav"}
            if angles:
                row["angles"] = dict(angles)
            if noise_name:
                row.update({"noise_wav": noise_name, "snr_db": snr_db})
            rows.append(row)
    manifest = out / "manifest.jsonl"
    manifest.write_text("".join(json.dumps(r, sort_keys=True) + "\n" for r in rows))
    return manifest
