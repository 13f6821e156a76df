"""Command-line front end.

Structured results go to stdout as JSON; diagnostics go to stderr. Exit
codes: 0 success, 1 selftest failure, 2 usage error, 3 data error.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from functools import partial
from pathlib import Path

import numpy as np

from mcasv import batch
from mcasv.dsp import StftConfig
from mcasv.evaluation import TrialFormatError, TrialList, cosine_score, eer, generate_trials, min_dcf, read_scores, write_scores
from mcasv.formats import FormatError, read_embeddings, write_embeddings
from mcasv.geometry import ArrayGeometry
from mcasv.objectives import TripletConfig, mine_hardest_batch, pk_sample
from mcasv.pipeline import PipelineConfig

EXIT_OK, EXIT_SELFTEST, EXIT_USAGE, EXIT_DATA = 0, 1, 2, 3


def _emit(obj) -> None:
    sys.stdout.write(json.dumps(obj, sort_keys=True) + "\n")


def _run_jobs(fn, items, jobs: int):
    if jobs <= 1:
        return [fn(*item) for item in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, *zip(*items)))


def _rate(args):
    return None if args.allow_any_rate else 16000


def cmd_simulate(args) -> int:
    manifest = Path(args.manifest)
    entries = batch.read_manifest(manifest)
    geom = ArrayGeometry.from_json(args.geometry)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    fn = partial(batch.simulate_entry, global_seed=args.seed, base=manifest.parent, out=out,
                 geom=geom, p_tar=args.p_tar, expected_rate=_rate(args), stft_cfg=StftConfig())
    rows = _run_jobs(fn, [(e, k) for k, e in enumerate(entries)], args.jobs)
    batch.write_jsonl(out / "sim.jsonl", rows)
    _emit({"simulated": len(rows), "manifest": str(out / "sim.jsonl")})
    return EXIT_OK


def cmd_featurize(args) -> int:
    manifest = Path(args.manifest)
    cfg = PipelineConfig.from_json(args.config)
    entries = batch.read_manifest(manifest)
    geom = ArrayGeometry.from_json(args.geometry)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    fn = partial(batch.featurize_entry, base=manifest.parent, out=out, cfg=cfg, geom=geom,
                 expected_rate=_rate(args))
    rows = _run_jobs(fn, [(e,) for e in entries], args.jobs)
    batch.write_jsonl(out / "features.jsonl", rows)
    _emit({"featurized": len(rows), "index": str(out / "features.jsonl")})
    return EXIT_OK


def cmd_embed(args) -> int:
    index = Path(args.features) / "features.jsonl"
    rows = batch.read_manifest(index)
    emb = batch.embed_features([index.parent / r["features"] for r in rows],
                               [r["speaker"] for r in rows], [r["id"] for r in rows],
                               args.dim, args.seed)
    write_embeddings(emb, args.out)
    _emit({"embedded": len(emb), "width": emb.width, "out": args.out})
    return EXIT_OK


def cmd_trials(args) -> int:
    emb = read_embeddings(args.embeddings)
    trials = generate_trials(emb, args.n, args.seed)
    trials.write(args.out)
    _emit({"trials": len(trials), "target": int(trials.labels.sum()), "out": args.out})
    return EXIT_OK


def cmd_mine(args) -> int:
    emb = read_embeddings(args.embeddings)
    cfg = TripletConfig(margin=args.margin, beta=args.beta, K=args.k, P_spk=args.p,
                        normalize=args.normalize)
    rows = pk_sample(emb.speakers, cfg.K, cfg.P_spk, args.seed)
    sub = emb.subset(rows)
    triples, loss, per_anchor = mine_hardest_batch(sub, cfg)
    for (a, p, n), value in zip(triples, per_anchor):
        _emit({"anchor": sub.utterances[a], "positive": sub.utterances[p],
               "negative": sub.utterances[n], "rows": [int(rows[a]), int(rows[p]), int(rows[n])],
               "loss": float(value)})
    _emit({"batch_loss": loss, "triples": len(triples)})
    return EXIT_OK


def cmd_score(args) -> int:
    trials = TrialList.read(args.trials)
    scores = cosine_score(trials, read_embeddings(args.embeddings))
    write_scores(args.out, trials, scores)
    _emit({"scored": len(trials), "out": args.out})
    return EXIT_OK


def cmd_evaluate(args) -> int:
    trials = TrialList.read(args.trials)
    scores = read_scores(args.scores, trials)
    _emit({"eer": eer(scores, trials), "min_dcf": min_dcf(scores, trials, args.p_target),
           "p_target": args.p_target, "trials": len(trials)})
    return EXIT_OK


def cmd_selftest(args) -> int:
    from mcasv.selftest import run_selftest

    results = run_selftest()
    for r in results:
        _emit(r)
    return EXIT_OK if all(r["pass"] for r in results) else EXIT_SELFTEST


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mcasv", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common_audio(p):
        p.add_argument("--geometry", default="nula15", help="preset name or geometry JSON path")
        p.add_argument("--jobs", type=int, default=1)
        p.add_argument("--allow-any-rate", action="store_true",
                       help="accept WAV files that are not 16 kHz")

    p = sub.add_parser("simulate", help="spatialize and mix sources from a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--p-tar", type=float, default=0.15)
    add_common_audio(p)
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("featurize", help="compute feature stacks for simulated mixtures")
    p.add_argument("--config", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    add_common_audio(p)
    p.set_defaults(fn=cmd_featurize)

    p = sub.add_parser("embed", help="stand-in embedder: random projection of mean features")
    p.add_argument("--features", required=True, help="featurize output directory")
    p.add_argument("--out", required=True)
    p.add_argument("--dim", type=int, default=512)
    p.add_argument("--seed", type=int, required=True)
    p.set_defaults(fn=cmd_embed)

    p = sub.add_parser("trials", help="generate a balanced trial list")
    p.add_argument("--embeddings", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--n", type=int, default=10000)
    p.add_argument("--seed", type=int, required=True)
    p.set_defaults(fn=cmd_trials)

    p = sub.add_parser("mine", help="PK-sample a batch and mine hardest triplets")
    p.add_argument("--embeddings", required=True)
    p.add_argument("--margin", type=float, default=0.0)
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--k", type=int, default=4)
    p.add_argument("--p", type=int, default=60)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--normalize", action="store_true", help="length-normalize embeddings first")
    p.set_defaults(fn=cmd_mine)

    p = sub.add_parser("score", help="cosine-score a trial list")
    p.add_argument("--trials", required=True)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_score)

    p = sub.add_parser("evaluate", help="EER and minDCF of scored trials")
    p.add_argument("--trials", required=True)
    p.add_argument("--scores", required=True)
    p.add_argument("--p-target", type=float, default=0.05)
    p.set_defaults(fn=cmd_evaluate)

    p = sub.add_parser("selftest", help="run the built-in analytic checks")
    p.set_defaults(fn=cmd_selftest)
    return parser


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        return args.fn(args)
    except (FormatError, TrialFormatError, batch.ManifestError, ValueError, KeyError,
            IndexError, OSError, json.JSONDecodeError, TypeError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"mcasv {args.command}: error: {msg}", file=sys.stderr)
        return EXIT_DATA


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
