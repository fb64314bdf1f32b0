#!/usr/bin/env python3
"""Worker-count scaling experiment: benchmark the same corpus at several
thread counts and report words per second for each.

    python scripts/bench_scaling.py --threads 1 2 4 --sentences 400
"""

import argparse
import os
import sys
import tempfile
from pathlib import Path

for _var in ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "MKL_NUM_THREADS"):
    os.environ.setdefault(_var, "1")

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

import numpy as np  # noqa: E402

from localmt.bench import run_bench  # noqa: E402
from localmt.demo import build_demo_package  # noqa: E402
from localmt.pipeline import Engine, EngineConfig  # noqa: E402
from localmt.registry import ModelStore  # noqa: E402

WORDS = (
    "alpha beta gamma delta epsilon zeta eta theta iota kappa lambda mu "
    "word words sentence corpus model quick brown fox jumps lazy dog"
).split()


def make_corpus(path: Path, sentences: int, seed: int) -> None:
    rng = np.random.default_rng(seed)
    lines = []
    for _ in range(sentences):
        n = int(rng.integers(3, 9))
        lines.append(" ".join(WORDS[i] for i in rng.integers(0, len(WORDS), n)))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--threads", type=int, nargs="+", default=[1, 2, 4])
    parser.add_argument("--sentences", type=int, default=400)
    parser.add_argument("--max-batch-tokens", type=int, default=1024)
    parser.add_argument("--model", default=None, help="installed model id (default: fresh demo)")
    parser.add_argument("--data-dir", default=None)
    parser.add_argument("--input", default=None, help="corpus file, one sentence per line")
    parser.add_argument("--seed", type=int, default=7)
    args = parser.parse_args()

    workdir = Path(tempfile.mkdtemp(prefix="bench-scaling-"))
    if args.model and args.data_dir:
        store = ModelStore(args.data_dir)
        model_id = args.model
    else:
        archive = workdir / "demo.tar.gz"
        build_demo_package(archive, model_id="bench-demo", seed=args.seed)
        store = ModelStore(workdir / "data")
        model_id = store.import_archive(archive)

    corpus = Path(args.input) if args.input else workdir / "corpus.txt"
    if not args.input:
        make_corpus(corpus, args.sentences, args.seed)

    print(f"{'threads':>8} {'wps':>12} {'wall_s':>8} {'cpu_s':>8} {'load_s':>8}")
    baseline = None
    for threads in args.threads:
        config = EngineConfig(
            threads=threads, max_batch_tokens=args.max_batch_tokens, workspace_bytes=1 << 30
        )
        with Engine(config, store) as engine:
            report = run_bench(engine, model_id, corpus, pre_split=True)
        if baseline is None:
            baseline = report.wps
        print(
            f"{threads:>8} {report.wps:>12,.0f} {report.wall_seconds:>8.2f} "
            f"{report.cpu_seconds:>8.2f} {report.loaded_in_seconds:>8.3f}"
            f"   ({report.wps / baseline:.2f}x)"
        )
    return 0


if __name__ == "__main__":
    sys.exit(main())
