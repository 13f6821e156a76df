"""Synthetic end-to-end run: corpus -> simulate -> featurize -> embed -> trials -> score -> evaluate.

    python3 scripts/run_end_to_end.py --work /tmp/mcasv-demo
"""

import argparse
import json
import sys
import time
from pathlib import Path

from mcasv.cli import run
from mcasv.synthetic import make_tone_corpus


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--work", default="e2e_work")
    ap.add_argument("--speakers", type=int, default=4)
    ap.add_argument("--utterances", type=int, default=5)
    ap.add_argument("--trials", type=int, default=100)
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--jobs", type=int, default=1)
    args = ap.parse_args()

    work = Path(args.work)
    t0 = time.time()
    manifest = make_tone_corpus(work / "corpus", args.speakers, args.utterances, seed=args.seed)
    cfg = work / "features.json"
    cfg.write_text(json.dumps({"features": ["lps", "cosipd(v0)", "dpr(1)", "af(1)"]}))
    steps = [
        ["simulate", "--manifest", str(manifest), "--out", str(work / "sim"), "--seed", str(args.seed),
         "--jobs", str(args.jobs)],
        ["featurize", "--config", str(cfg), "--manifest", str(work / "sim" / "sim.jsonl"),
         "--out", str(work / "feats"), "--jobs", str(args.jobs)],
        ["embed", "--features", str(work / "feats"), "--out", str(work / "emb.mceb"),
         "--seed", str(args.seed)],
        ["trials", "--embeddings", str(work / "emb.mceb"), "--out", str(work / "trials.txt"),
         "--n", str(args.trials), "--seed", str(args.seed)],
        ["score", "--trials", str(work / "trials.txt"), "--embeddings", str(work / "emb.mceb"),
         "--out", str(work / "scores.txt")],
        ["evaluate", "--trials", str(work / "trials.txt"), "--scores", str(work / "scores.txt")],
    ]
    for argv in steps:
        code = run(argv)
        if code:
            print(f"step {argv[0]} failed with exit {code}", file=sys.stderr)
            sys.exit(code)
    print(f"done in {time.time() - t0:.1f} s", file=sys.stderr)


if __name__ == "__main__":
    main()
