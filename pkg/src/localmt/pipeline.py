"""Request orchestration: length-sorted batching over a worker pool,
engine auto-configuration from cores and RAM, and as-you-type supersession.

Ordering contract per session: delivered generations strictly increase and a
stale result is never delivered after a newer one. Batching, sentence order
restoration, and thread count never change the translated bytes; that falls
out of the model's exact batching behavior, so the pipeline only has to keep
sentence bookkeeping straight.
"""

from __future__ import annotations

import threading
from concurrent.futures import Future, ThreadPoolExecutor
from dataclasses import dataclass, field

from .errors import (
    InputValidationError,
    ModelNotFoundError,
    StaleGenerationError,
    TranslationCancelled,
)
from .model import Model, translate_batch
from .registry import ModelStore
from .shortlist import Shortlist, candidates as shortlist_candidates
from .textops import (
    Vocabulary,
    byte_fallback_vocabulary,
    default_abbreviations,
    split_sentences,
    reassemble,
)

GIB = 1 << 30

# batch-token bounds and the per-token workspace estimate used by auto_config
MIN_BATCH_TOKENS = 256
MAX_BATCH_TOKENS = 8192
TOKEN_COST_SAFETY = 8

COPY_MODEL_ID = "copy"
_COPY_MAX_SRC_LEN = 512


@dataclass(frozen=True)
class EngineConfig:
    threads: int
    max_batch_tokens: int
    workspace_bytes: int

    def __post_init__(self) -> None:
        if self.threads < 1:
            raise InputValidationError("threads must be >= 1")
        if self.max_batch_tokens < 1:
            raise InputValidationError("max_batch_tokens must be >= 1")


def auto_config(physical_cores: int, free_ram_bytes: int, model_config=None) -> EngineConfig:
    """Derive engine settings from the machine: all physical cores become
    workers; a quarter of free RAM (capped at 1 GiB) becomes workspace; the
    batch-token budget is workspace over an estimated per-token cost."""
    if physical_cores <= 0 or free_ram_bytes <= 0:
        raise InputValidationError("cores and RAM must be positive")
    emb_dim = model_config.emb_dim if model_config else 64
    layers = (model_config.enc_layers + model_config.dec_layers) if model_config else 4
    workspace = min(free_ram_bytes // 4, GIB)
    per_token_cost = 4 * emb_dim * layers * TOKEN_COST_SAFETY
    tokens = workspace // per_token_cost
    max_batch_tokens = int(min(max(tokens, MIN_BATCH_TOKENS), MAX_BATCH_TOKENS))
    return EngineConfig(
        threads=physical_cores,
        max_batch_tokens=max_batch_tokens,
        workspace_bytes=int(workspace),
    )


@dataclass(frozen=True)
class TranslationRequest:
    session_id: str
    generation: int
    model_id: str
    text: str
    threads_override: int | None = None
    max_batch_tokens_override: int | None = None


@dataclass(frozen=True)
class TranslationResult:
    status: str  # "ok" | "cancelled"
    text: str | None
    generation: int

    @property
    def ok(self) -> bool:
        return self.status == "ok"


# --- backends ---------------------------------------------------------------


class NeuralBackend:
    """Installed package wired for translation."""

    def __init__(self, model: Model, vocab_src: Vocabulary, vocab_trg: Vocabulary,
                 shortlist: Shortlist, abbreviations: frozenset[str] = frozenset()):
        cfg = model.config
        for vocab in (vocab_src, vocab_trg):
            if (vocab.pad_id, vocab.unk_id, vocab.eos_id) != (cfg.pad_id, cfg.unk_id, cfg.eos_id):
                raise InputValidationError("vocabulary special ids disagree with model config")
            if len(vocab) > cfg.vocab_size:
                raise InputValidationError("vocabulary larger than the model's embedding table")
        self.model = model
        self.vocab_src = vocab_src
        self.vocab_trg = vocab_trg
        self.shortlist = shortlist
        self.abbreviations = abbreviations
        self.max_src_len = cfg.max_src_len
        self.eos_id = cfg.eos_id

    def candidate_ids(self, source_ids) -> list[int]:
        cfg = self.model.config
        return shortlist_candidates(
            self.shortlist, sorted(source_ids), specials=[cfg.eos_id, cfg.unk_id]
        )

    def translate_ids(self, batch: list[list[int]], candidate_ids, cancelled) -> list[list[int]]:
        return translate_batch(self.model, batch, candidate_ids, cancelled=cancelled)


class CopyBackend:
    """Identity model: emits exactly the source ids plus a final eos. Exists
    so the full pipeline (splitting, batching, supersession, reassembly) can
    be exercised with a byte-exact expected output."""

    def __init__(self):
        self.vocab_src = byte_fallback_vocabulary()
        self.vocab_trg = self.vocab_src
        self.abbreviations = default_abbreviations("en")
        self.max_src_len = _COPY_MAX_SRC_LEN
        self.eos_id = self.vocab_src.eos_id

    def candidate_ids(self, source_ids) -> list[int]:
        return [self.vocab_src.unk_id, self.vocab_src.eos_id]

    def translate_ids(self, batch, candidate_ids, cancelled) -> list[list[int]]:
        if cancelled is not None and cancelled():
            raise TranslationCancelled("translation cancelled")
        return [list(ids) + [self.eos_id] for ids in batch]


# --- document translation ---------------------------------------------------


def _pack_batches(unit_lengths: list[int], max_batch_tokens: int) -> list[list[int]]:
    """Greedy packing of unit indices, shortest units first, each batch's
    token sum capped. Returns batches of indices into the unit list."""
    order = sorted(range(len(unit_lengths)), key=lambda i: (unit_lengths[i], i))
    batches: list[list[int]] = []
    current: list[int] = []
    current_tokens = 0
    for idx in order:
        n = unit_lengths[idx]
        if current and current_tokens + n > max_batch_tokens:
            batches.append(current)
            current = []
            current_tokens = 0
        current.append(idx)
        current_tokens += n
    if current:
        batches.append(current)
    return batches


def translate_document(
    backend,
    text: str,
    max_batch_tokens: int,
    pool: ThreadPoolExecutor | None = None,
    cancelled=None,
    pre_split_lines: list[str] | None = None,
) -> str:
    """Split, tokenize, batch by length, translate, restore order, detokenize,
    reassemble. Output is byte-identical to one-sentence-at-a-time processing.

    When pre_split_lines is given the splitter is skipped and each line is
    one sentence, joined by newlines on output (benchmark mode).
    """
    if pre_split_lines is not None:
        annotated = None
        sentences = pre_split_lines
    else:
        annotated = split_sentences(text, backend.abbreviations)
        sentences = list(annotated.sentences)

    # sentences longer than the model window are sub-split at token boundaries
    units: list[list[int]] = []
    owners: list[tuple[int, int]] = []  # (sentence index, chunk order)
    for si, sentence in enumerate(sentences):
        ids = backend.vocab_src.tokenize(sentence)
        chunks = [ids[i : i + backend.max_src_len] for i in range(0, len(ids), backend.max_src_len)] or [[]]
        for ci, chunk in enumerate(chunks):
            units.append(chunk)
            owners.append((si, ci))

    all_source_ids = set()
    for unit in units:
        all_source_ids.update(unit)
    candidate_ids = backend.candidate_ids(all_source_ids)

    budget = max(max_batch_tokens, backend.max_src_len)
    batches = _pack_batches([len(u) for u in units], budget)

    def run_batch(indices: list[int]) -> list[list[int]]:
        if cancelled is not None and cancelled():
            raise TranslationCancelled("translation cancelled")
        return backend.translate_ids([units[i] for i in indices], candidate_ids, cancelled)

    unit_outputs: list[list[int] | None] = [None] * len(units)
    if pool is not None and len(batches) > 1:
        # a settings change may retire the pool mid-request; batches that can
        # no longer be submitted just run inline, with identical results
        futures: list[tuple[list[int], Future]] = []
        inline: list[list[int]] = []
        for b in batches:
            try:
                futures.append((b, pool.submit(run_batch, b)))
            except RuntimeError:
                inline.append(b)
        try:
            for indices in inline:
                for i, out in zip(indices, run_batch(indices)):
                    unit_outputs[i] = out
            for indices, fut in futures:
                for i, out in zip(indices, fut.result()):
                    unit_outputs[i] = out
        except BaseException:
            for _, fut in futures:
                fut.cancel()
            raise
    else:
        for indices in batches:
            for i, out in zip(indices, run_batch(indices)):
                unit_outputs[i] = out

    # stitch chunk outputs back into sentences at the byte level so multi-byte
    # characters split across chunks survive
    per_sentence_bytes: list[list[bytes]] = [[] for _ in sentences]
    for (si, _ci), out in zip(owners, unit_outputs):
        ids = list(out)
        if ids and ids[-1] == backend.eos_id:
            ids.pop()
        per_sentence_bytes[si].append(backend.vocab_trg.detokenize_bytes(ids))
    translated = [
        b"".join(parts).decode("utf-8", errors="replace") for parts in per_sentence_bytes
    ]

    if annotated is None:
        return "\n".join(translated)
    return reassemble(annotated, translated)


# --- engine -------------------------------------------------------------------


@dataclass
class _Session:
    last_submitted: int | None = None
    last_delivered: int | None = None
    inflight: dict[int, threading.Event] = field(default_factory=dict)


class Engine:
    """Owns loaded models, the worker pool, and per-session ordering state."""

    def __init__(self, config: EngineConfig, store: ModelStore | None = None):
        self.config = config
        self.store = store
        self._backends: dict[str, object] = {}
        self._lock = threading.Lock()
        self._sessions: dict[str, _Session] = {}
        self._active = 0
        self._compute = ThreadPoolExecutor(
            max_workers=config.threads, thread_name_prefix="localmt-worker"
        )
        self._dispatch = ThreadPoolExecutor(
            max_workers=16, thread_name_prefix="localmt-request"
        )

    def close(self) -> None:
        self._dispatch.shutdown(wait=True)
        self._compute.shutdown(wait=True)

    def __enter__(self) -> "Engine":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    # --- configuration -----------------------------------------------------

    def update_config(self, threads: int | None = None, max_batch_tokens: int | None = None) -> None:
        new_threads = threads if threads is not None else self.config.threads
        new_tokens = max_batch_tokens if max_batch_tokens is not None else self.config.max_batch_tokens
        new = EngineConfig(
            threads=new_threads,
            max_batch_tokens=new_tokens,
            workspace_bytes=self.config.workspace_bytes,
        )
        with self._lock:
            if new.threads != self.config.threads:
                old = self._compute
                self._compute = ThreadPoolExecutor(
                    max_workers=new.threads, thread_name_prefix="localmt-worker"
                )
                old.shutdown(wait=False)
            self.config = new

    # --- model access --------------------------------------------------------

    def backend(self, model_id: str):
        with self._lock:
            cached = self._backends.get(model_id)
        if cached is not None:
            return cached
        if model_id == COPY_MODEL_ID:
            built = CopyBackend()
        elif self.store is None:
            raise ModelNotFoundError(f"no store configured; unknown model {model_id!r}")
        else:
            manifest, model, vocab_src, vocab_trg, sl = self.store.load_parts(model_id)
            built = NeuralBackend(
                model, vocab_src, vocab_trg, sl,
                abbreviations=default_abbreviations(manifest.src_lang),
            )
        with self._lock:
            return self._backends.setdefault(model_id, built)

    def register_backend(self, model_id: str, backend) -> None:
        """Expose an in-memory backend under an id (stubs, prebuilt models)."""
        with self._lock:
            self._backends[model_id] = backend

    def unload(self, model_id: str) -> None:
        with self._lock:
            self._backends.pop(model_id, None)

    @property
    def active_requests(self) -> int:
        with self._lock:
            return self._active

    def _track(self, delta: int) -> None:
        with self._lock:
            self._active += delta

    # --- synchronous translation ----------------------------------------------

    def translate_text(
        self,
        model_id: str,
        text: str,
        cancelled=None,
        threads_override: int | None = None,
        max_batch_tokens_override: int | None = None,
        pre_split_lines: list[str] | None = None,
    ) -> str:
        backend = self.backend(model_id)
        tokens = max_batch_tokens_override or self.config.max_batch_tokens
        self._track(1)
        try:
            if threads_override is not None and threads_override != self.config.threads:
                with ThreadPoolExecutor(max_workers=max(1, threads_override)) as pool:
                    return translate_document(
                        backend, text, tokens,
                        pool=pool if threads_override > 1 else None,
                        cancelled=cancelled, pre_split_lines=pre_split_lines,
                    )
            pool = self._compute if self.config.threads > 1 else None
            return translate_document(
                backend, text, tokens, pool=pool,
                cancelled=cancelled, pre_split_lines=pre_split_lines,
            )
        finally:
            self._track(-1)

    # --- supersession ------------------------------------------------------------

    def submit(self, request: TranslationRequest) -> Future:
        """Queue a session-scoped request. Any in-flight request of the same
        session with a lower generation is cancelled as soon as practicable;
        delivered generations strictly increase per session."""
        with self._lock:
            sess = self._sessions.setdefault(request.session_id, _Session())
            if sess.last_submitted is not None and request.generation <= sess.last_submitted:
                raise StaleGenerationError(
                    f"generation {request.generation} <= last submitted {sess.last_submitted}"
                )
            sess.last_submitted = request.generation
            for gen, event in sess.inflight.items():
                if gen < request.generation:
                    event.set()
            cancel_event = threading.Event()
            sess.inflight[request.generation] = cancel_event

        result: Future = Future()
        self._dispatch.submit(self._run_submitted, request, cancel_event, result)
        return result

    def _run_submitted(self, request: TranslationRequest, cancel_event: threading.Event, result: Future) -> None:
        text: str | None = None
        error: BaseException | None = None
        cancelled = cancel_event.is_set
        if not cancel_event.is_set():
            try:
                text = self.translate_text(
                    request.model_id,
                    request.text,
                    cancelled=cancelled,
                    threads_override=request.threads_override,
                    max_batch_tokens_override=request.max_batch_tokens_override,
                )
            except TranslationCancelled:
                text = None
            except BaseException as exc:  # delivered to the caller, not lost
                error = exc

        with self._lock:
            sess = self._sessions[request.session_id]
            sess.inflight.pop(request.generation, None)
            if error is not None:
                result.set_exception(error)
                return
            stale = (
                cancel_event.is_set()
                or text is None
                or (sess.last_delivered is not None and request.generation <= sess.last_delivered)
            )
            if stale:
                result.set_result(
                    TranslationResult(status="cancelled", text=None, generation=request.generation)
                )
            else:
                sess.last_delivered = request.generation
                result.set_result(
                    TranslationResult(status="ok", text=text, generation=request.generation)
                )
