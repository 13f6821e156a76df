"""Per-utterance batch jobs behind the CLI: simulation, featurization, embedding."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from mcasv.dsp import MultiChannelSignal, StftConfig
from mcasv.formats import EmbeddingSet, FeatureStack, read_feature_file, read_wav, write_feature_file, write_wav
from mcasv.geometry import ArrayGeometry
from mcasv.pipeline import PipelineConfig, run_pipeline
from mcasv.rng import derive_seed, make_rng
from mcasv.simulator import MixSpec, mix, sample_angle, spatialize

RESERVED_KEYS = {"target_wav", "interference_wav", "noise_wav", "angles", "seed", "gains",
                 "snr_db", "sir_db", "p_tar"}


class ManifestError(ValueError):
    def __init__(self, path, line_no, message):
        super().__init__(f"{path}:{line_no}: {message}")
        self.path, self.line_no = str(path), line_no


def read_manifest(path) -> list[dict]:
    entries = []
    for k, line in enumerate(Path(path).read_text().splitlines(), 1):
        if not line.strip():
            continue
        try:
            entry = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ManifestError(path, k, f"invalid JSON: {exc.msg}") from None
        if not isinstance(entry, dict) or "id" not in entry:
            raise ManifestError(path, k, "entry must be an object with an 'id'")
        entry["_line"] = k
        entries.append(entry)
    ids = [e["id"] for e in entries]
    if len(set(ids)) != len(ids):
        raise ManifestError(path, 0, "duplicate utterance ids")
    return entries


def write_jsonl(path, rows) -> None:
    path = Path(path)
    tmp = path.with_name(f".{path.name}.tmp")
    tmp.write_text("".join(json.dumps(r, sort_keys=True) + "\n" for r in rows))
    tmp.replace(path)


def _resolve(base: Path, p: str) -> Path:
    q = Path(p)
    return q if q.is_absolute() else base / q


def _mono(path, expected_rate):
    x, rate = read_wav(path, expected_rate)
    return x[0], rate


def simulate_entry(entry: dict, index: int, global_seed: int, base: Path, out: Path,
                   geom: ArrayGeometry, p_tar: float, expected_rate, stft_cfg: StftConfig) -> dict:
    where = f"manifest line {entry.get('_line', '?')} (id {entry['id']})"
    try:
        if "target_wav" not in entry:
            raise ValueError("missing 'target_wav'")
        seed = int(entry["seed"]) if "seed" in entry else derive_seed(global_seed, index)
        angle_rng = make_rng(derive_seed(seed, 1))
        given = entry.get("angles", {})
        angles = {k: float(given[k]) if given.get(k) is not None else sample_angle(angle_rng)
                  for k in ("target", "interference", "noise")}

        src, rate = _mono(_resolve(base, entry["target_wav"]), expected_rate)
        if rate != geom.sample_rate:
            raise ValueError(f"sample rate {rate} differs from array rate {geom.sample_rate}")
        target = spatialize(src, angles["target"], geom)
        interference = noise = None
        if entry.get("interference_wav"):
            x, _ = _mono(_resolve(base, entry["interference_wav"]), rate)
            interference = spatialize(x, angles["interference"], geom)
        if entry.get("noise_wav"):
            x, _ = _mono(_resolve(base, entry["noise_wav"]), rate)
            noise = spatialize(x, angles["noise"], geom)
        spec = MixSpec(
            snr_db=entry.get("snr_db"), sir_db=entry.get("sir_db"),
            p_tar=float(entry.get("p_tar", p_tar)), target_angle=angles["target"],
            interference_angle=angles["interference"], noise_angle=angles["noise"], seed=seed,
        )
        sim = mix(target, interference, noise, spec, stft_cfg)
    except (ValueError, OSError) as exc:
        raise ValueError(f"{where}: {exc}") from None

    uid = entry["id"]
    write_wav(out / "wav" / f"{uid}.wav", sim.mixture.samples, rate)
    labels = FeatureStack([sim.vad_labels[:, None].astype(np.float32), sim.enhancement_target],
                          ["vad", "enh_target"])
    write_feature_file(labels, out / "labels" / f"{uid}.mcft")
    row = {k: v for k, v in entry.items() if k not in RESERVED_KEYS and not k.startswith("_")}
    row.update(sim.manifest)
    row.update({
        "target_wav": entry["target_wav"],
        "mixture_wav": f"wav/{uid}.wav",
        "labels": f"labels/{uid}.mcft",
    })
    if entry.get("interference_wav"):
        row["interference_wav"] = entry["interference_wav"]
    if entry.get("noise_wav"):
        row["noise_wav"] = entry["noise_wav"]
    return row


def featurize_entry(entry: dict, base: Path, out: Path, cfg: PipelineConfig,
                    geom: ArrayGeometry, expected_rate) -> dict:
    where = f"manifest line {entry.get('_line', '?')} (id {entry['id']})"
    try:
        if "mixture_wav" not in entry:
            raise ValueError("missing 'mixture_wav'")
        x, rate = read_wav(_resolve(base, entry["mixture_wav"]), expected_rate)
        stack = run_pipeline(MultiChannelSignal(x, rate), entry, cfg, geom)
    except (ValueError, OSError, KeyError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) else exc
        raise ValueError(f"{where}: {msg}") from None
    write_feature_file(stack, out / f"{entry['id']}.mcft")
    return {"id": entry["id"], "features": f"{entry['id']}.mcft",
            "speaker": entry.get("speaker", entry["id"])}


def random_projection_embedder(feature_dim: int, width: int = 512, seed: int = 0) -> np.ndarray:
    """Fixed Gaussian projection matrix (feature_dim, width)."""
    return make_rng(seed).standard_normal((feature_dim, width)) / np.sqrt(feature_dim)


def mean_feature_vector(stack: FeatureStack) -> np.ndarray:
    return np.concatenate([p.astype(np.float64).mean(axis=0) for p in stack.planes])


def embed_features(feature_paths, speakers, utterances, width=512, seed=0) -> EmbeddingSet:
    means = np.stack([mean_feature_vector(read_feature_file(p)) for p in feature_paths])
    means = means - means.mean(axis=0)
    proj = random_projection_embedder(means.shape[1], width, seed)
    return EmbeddingSet(means @ proj, list(speakers), list(utterances))
