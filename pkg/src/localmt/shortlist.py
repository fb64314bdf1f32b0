"""Lexical shortlist: per-source-token top-K target candidates unioned with
the top-F globally frequent targets, shrinking the output layer to the ids
that can plausibly appear."""

from __future__ import annotations

import struct
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import (
    BadMagicError,
    IdOutOfRangeError,
    InputValidationError,
    ShortlistFormatError,
    UnknownVersionError,
)

MAGIC = b"LSHL"
VERSION = 1


@dataclass(frozen=True)
class Shortlist:
    first_f: tuple[int, ...]                 # sorted, deduplicated
    per_source: dict[int, tuple[int, ...]]   # source id -> sorted target ids
    k: int
    vocab_size: int

    def __post_init__(self) -> None:
        if self.k < 0 or self.vocab_size <= 0:
            raise InputValidationError("k must be >= 0 and vocab_size > 0")
        if list(self.first_f) != sorted(set(self.first_f)):
            raise InputValidationError("first_f must be sorted and deduplicated")
        if any(not 0 <= t < self.vocab_size for t in self.first_f):
            raise InputValidationError("first_f id out of range")
        for s, targets in self.per_source.items():
            if not 0 <= s < self.vocab_size:
                raise InputValidationError(f"source id {s} out of range")
            if list(targets) != sorted(set(targets)):
                raise InputValidationError(f"targets of source {s} must be sorted unique")
            if len(targets) > self.k:
                raise InputValidationError(f"source {s} has more than k={self.k} targets")
            if any(not 0 <= t < self.vocab_size for t in targets):
                raise InputValidationError(f"target id out of range for source {s}")


def _normalize_counts(cooccurrence) -> dict[tuple[int, int], int]:
    if isinstance(cooccurrence, dict):
        items = cooccurrence.items()
        return {(int(s), int(t)): int(c) for (s, t), c in items}
    arr = np.asarray(cooccurrence)
    if arr.ndim == 2 and arr.shape[1] != 3:
        src, tgt = np.nonzero(arr)
        return {(int(s), int(t)): int(arr[s, t]) for s, t in zip(src, tgt)}
    out: dict[tuple[int, int], int] = {}
    for s, t, c in cooccurrence:
        out[(int(s), int(t))] = out.get((int(s), int(t)), 0) + int(c)
    return out


def build(cooccurrence, f: int, k: int, vocab_size: int) -> Shortlist:
    """Construct a shortlist from a source x target co-occurrence count table.

    first_f holds the f globally most frequent target ids (total count,
    ties to the lower id); each source keeps its top-k targets by count,
    zero-count pairs omitted. f and k above vocab_size are clamped with
    a warning.
    """
    if f < 0 or k < 0:
        raise InputValidationError("f and k must be >= 0")
    if vocab_size <= 0:
        raise InputValidationError("vocab_size must be > 0")
    if f > vocab_size:
        warnings.warn(f"f={f} exceeds vocab_size={vocab_size}; clamping", stacklevel=2)
        f = vocab_size
    if k > vocab_size:
        warnings.warn(f"k={k} exceeds vocab_size={vocab_size}; clamping", stacklevel=2)
        k = vocab_size

    counts = _normalize_counts(cooccurrence)
    totals = [0] * vocab_size
    by_source: dict[int, list[tuple[int, int]]] = {}
    for (s, t), c in counts.items():
        if c < 0:
            raise InputValidationError("counts must be >= 0")
        if not (0 <= s < vocab_size and 0 <= t < vocab_size):
            raise InputValidationError(f"count pair ({s}, {t}) out of range")
        if c == 0:
            continue
        totals[t] += c
        by_source.setdefault(s, []).append((t, c))

    first_f = tuple(sorted(sorted(range(vocab_size), key=lambda t: (-totals[t], t))[:f]))
    per_source = {}
    for s, pairs in by_source.items():
        top = sorted(pairs, key=lambda tc: (-tc[1], tc[0]))[:k]
        if top:
            per_source[s] = tuple(sorted(t for t, _ in top))
    return Shortlist(first_f=first_f, per_source=per_source, k=k, vocab_size=vocab_size)


def candidates(sl: Shortlist, source_tokens, specials) -> list[int]:
    """Sorted union of first_f, the per-source lists of every source token,
    and the caller's special ids. Unknown source ids contribute nothing."""
    out = set(sl.first_f)
    for s in source_tokens:
        s = int(s)
        if not 0 <= s < sl.vocab_size:
            raise InputValidationError(f"source token id {s} out of range")
        out.update(sl.per_source.get(s, ()))
    for sp in specials:
        sp = int(sp)
        if not 0 <= sp < sl.vocab_size:
            raise InputValidationError(f"special id {sp} out of range")
        out.add(sp)
    return sorted(out)


# --- binary format ----------------------------------------------------------
# magic "LSHL", version u32, vocab_size u32, f u32, k u32,
# first_f ids (u32 * f), entry count u32, then per entry:
# source id u32, list length u32, target ids (u32 * length). Little-endian.


def serialize(sl: Shortlist) -> bytes:
    parts = [
        MAGIC,
        struct.pack("<IIII", VERSION, sl.vocab_size, len(sl.first_f), sl.k),
        struct.pack(f"<{len(sl.first_f)}I", *sl.first_f),
        struct.pack("<I", len(sl.per_source)),
    ]
    for s in sorted(sl.per_source):
        targets = sl.per_source[s]
        parts.append(struct.pack(f"<II{len(targets)}I", s, len(targets), *targets))
    return b"".join(parts)


def deserialize(blob: bytes) -> Shortlist:
    view = memoryview(blob)

    def take(fmt: str, what: str):
        nonlocal offset
        size = struct.calcsize(fmt)
        if offset + size > len(view):
            raise ShortlistFormatError(f"blob ended inside {what}")
        vals = struct.unpack_from(fmt, view, offset)
        offset = offset + size
        return vals

    if len(view) < 4 or bytes(view[:4]) != MAGIC:
        raise BadMagicError("not a shortlist blob")
    offset = 4
    (version,) = take("<I", "version")
    if version != VERSION:
        raise UnknownVersionError(f"unsupported shortlist version {version}")
    vocab_size, f, k = take("<III", "header")
    if vocab_size == 0:
        raise ShortlistFormatError("vocab_size must be positive")
    first_f = take(f"<{f}I", "first_f ids")
    (entry_count,) = take("<I", "entry count")
    per_source = {}
    for _ in range(entry_count):
        s, length = take("<II", "entry header")
        targets = take(f"<{length}I", "entry targets")
        for t in targets:
            if t >= vocab_size:
                raise IdOutOfRangeError(f"target id {t} >= vocab_size {vocab_size}")
        if s >= vocab_size:
            raise IdOutOfRangeError(f"source id {s} >= vocab_size {vocab_size}")
        per_source[int(s)] = tuple(int(t) for t in targets)
    if offset != len(view):
        raise ShortlistFormatError(f"{len(view) - offset} trailing bytes")
    for t in first_f:
        if t >= vocab_size:
            raise IdOutOfRangeError(f"first_f id {t} >= vocab_size {vocab_size}")
    try:
        return Shortlist(
            first_f=tuple(int(t) for t in first_f),
            per_source=per_source,
            k=int(k),
            vocab_size=int(vocab_size),
        )
    except InputValidationError as exc:
        raise ShortlistFormatError(str(exc)) from exc
