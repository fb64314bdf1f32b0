"""Words-per-second benchmark.

Measurement protocol: translate a small unrelated text first and discard it,
so one-time lazy initialization never pollutes the numbers; the timed region
then covers model loading plus batched translation of the corpus. With
pre-split input (one sentence per line), sentence splitting stays outside the
timed region. Words are whitespace-delimited source tokens, so absolute
numbers are comparable only within this tool.
"""

from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass
from pathlib import Path

from .errors import EngineBusyError
from .pipeline import Engine
from .textops import split_sentences

WARMUP_TEXT = "This short unrelated text warms the engine. Nothing here is timed."


@dataclass(frozen=True)
class BenchReport:
    wps: float
    wall_seconds: float
    cpu_seconds: float
    loaded_in_seconds: float
    words: int
    sentences: int
    threads: int

    def __post_init__(self) -> None:
        for name, value in asdict(self).items():
            if value < 0:
                raise ValueError(f"{name} must be non-negative")

    def to_json_line(self) -> str:
        return json.dumps(asdict(self), separators=(",", ":"))

    def format_text(self) -> str:
        return (
            f"{self.wps:,.0f} words/s | {self.words:,} words, {self.sentences:,} sentences | "
            f"wall {self.wall_seconds:.2f}s (load {self.loaded_in_seconds:.2f}s) | "
            f"cpu {self.cpu_seconds:.2f}s | {self.threads} threads"
        )


def run_bench(
    engine: Engine,
    model_id: str,
    input_path: str | Path,
    pre_split: bool = False,
    output_sink=None,
) -> BenchReport:
    """Benchmark one model over a corpus file. Refuses to run while the
    engine is serving other requests; translations are byte-identical to
    normal service-mode output."""
    if engine.active_requests > 0:
        raise EngineBusyError("engine is handling traffic; benchmark must run exclusively")
    text = Path(input_path).read_text(encoding="utf-8")

    if pre_split:
        lines = text.splitlines()
        words = sum(len(line.split()) for line in lines)
        sentence_count = len(lines)
    else:
        lines = None
        words = len(text.split())

    # warm-up: load, translate unrelated text, drop the loaded model so the
    # timed region below includes a cold load
    engine.translate_text(model_id, WARMUP_TEXT)
    engine.unload(model_id)

    wall0 = time.perf_counter()
    cpu0 = time.process_time()
    backend = engine.backend(model_id)
    loaded_in = time.perf_counter() - wall0
    output = engine.translate_text(model_id, text, pre_split_lines=lines)
    wall = time.perf_counter() - wall0
    cpu = time.process_time() - cpu0

    if output_sink is not None:
        output_sink(output)
    if not pre_split:
        sentence_count = len(split_sentences(text, backend.abbreviations).sentences)

    return BenchReport(
        wps=words / wall if wall > 0 else 0.0,
        wall_seconds=wall,
        cpu_seconds=cpu,
        loaded_in_seconds=loaded_in,
        words=words,
        sentences=sentence_count,
        threads=engine.config.threads,
    )
