"""Lossless sentence segmentation, format preservation, and reversible
byte-fallback subword tokenization.

Segmentation never loses a byte: the input decomposes into alternating gaps
and sentences whose concatenation reproduces it exactly. Tokenization is
greedy longest-match over a piece inventory that always contains all 256
single-byte pieces, so any byte string tokenizes and detokenizes to itself.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .errors import InputValidationError

_TOKEN_RE = re.compile(r"\S+")
_BYTE_PIECE_RE = re.compile(r"^<0x([0-9A-Fa-f]{2})>$")

SENTENCE_FINAL = ".?!"
OPENERS = "\"'([{«„“‘¿¡"

PAD_ID, UNK_ID, EOS_ID = 0, 1, 2
_RESERVED = 3


@dataclass(frozen=True)
class AnnotatedText:
    """Decomposition of a document into sentences and surrounding gaps.

    gaps has exactly one more entry than sentences; interleaving them
    (gap, sentence, gap, ..., sentence, gap) reproduces the source text
    byte for byte.
    """

    gaps: tuple[str, ...]
    sentences: tuple[str, ...]

    def __post_init__(self) -> None:
        if len(self.gaps) != len(self.sentences) + 1:
            raise InputValidationError("gaps must have exactly one more entry than sentences")

    @property
    def text(self) -> str:
        return reassemble(self, list(self.sentences))


def _is_single_initial(token: str) -> bool:
    return len(token) == 2 and token[1] == "." and token[0].isalpha() and token[0].isupper()


def split_sentences(text: str, abbreviations: frozenset[str] | set[str] = frozenset()) -> AnnotatedText:
    """Rule-based sentence segmentation that loses nothing.

    A boundary falls inside whitespace that follows a token ending in
    [.?!] when the next token starts with an uppercase letter or an
    opening quote/bracket - unless that token is a known abbreviation or
    a single uppercase initial. Whitespace containing two or more
    newlines always splits. Pathological text comes back as one sentence.
    """
    tokens = list(_TOKEN_RE.finditer(text))
    if not tokens:
        return AnnotatedText(gaps=(text,), sentences=())

    boundaries = []  # index i: split between tokens[i] and tokens[i+1]
    for i in range(len(tokens) - 1):
        gap = text[tokens[i].end() : tokens[i + 1].start()]
        if gap.count("\n") >= 2:
            boundaries.append(i)
            continue
        tok = tokens[i].group()
        if tok[-1] not in SENTENCE_FINAL:
            continue
        word = tok.lstrip(OPENERS)
        if tok in abbreviations or word in abbreviations:
            continue
        if _is_single_initial(word):
            continue
        nxt = tokens[i + 1].group()[0]
        if nxt.isupper() or nxt in OPENERS:
            boundaries.append(i)

    gaps = [text[: tokens[0].start()]]
    sentences = []
    start_tok = 0
    for b in boundaries:
        sentences.append(text[tokens[start_tok].start() : tokens[b].end()])
        gaps.append(text[tokens[b].end() : tokens[b + 1].start()])
        start_tok = b + 1
    sentences.append(text[tokens[start_tok].start() : tokens[-1].end()])
    gaps.append(text[tokens[-1].end() :])
    return AnnotatedText(gaps=tuple(gaps), sentences=tuple(sentences))


def reassemble(annotated: AnnotatedText, translated: list[str]) -> str:
    """Interleave the original gaps with translated sentences."""
    if len(translated) != len(annotated.sentences):
        raise InputValidationError(
            f"expected {len(annotated.sentences)} translated sentences, got {len(translated)}"
        )
    parts = [annotated.gaps[0]]
    for sentence, gap in zip(translated, annotated.gaps[1:]):
        parts.append(sentence)
        parts.append(gap)
    return "".join(parts)


# --- vocabulary and tokenization -------------------------------------------


class Vocabulary:
    """Subword piece inventory with single-byte fallback.

    Pieces are matched on their UTF-8 bytes; the first three ids are the
    pad/unk/eos markers fixed by the file format. All 256 single-byte
    pieces must be present so that any byte sequence is tokenizable.
    """

    def __init__(self, pieces: list[str]):
        if len(pieces) < _RESERVED:
            raise InputValidationError("vocabulary needs at least the three reserved pieces")
        if len(set(pieces)) != len(pieces):
            raise InputValidationError("vocabulary pieces must be unique")
        self.pieces = list(pieces)
        self.pad_id, self.unk_id, self.eos_id = PAD_ID, UNK_ID, EOS_ID
        self._piece_bytes: list[bytes | None] = []
        table: dict[bytes, int] = {}
        covered_bytes = set()
        for idx, piece in enumerate(pieces):
            if idx < _RESERVED:
                self._piece_bytes.append(piece.encode("utf-8"))
                continue  # markers are not matchable content
            m = _BYTE_PIECE_RE.match(piece)
            raw = bytes([int(m.group(1), 16)]) if m else piece.encode("utf-8")
            if not raw:
                raise InputValidationError(f"piece {idx} is empty")
            self._piece_bytes.append(raw)
            if len(raw) == 1:
                covered_bytes.add(raw[0])
            table.setdefault(raw, idx)
        if len(covered_bytes) != 256:
            raise InputValidationError(
                "vocabulary must contain all 256 single-byte fallback pieces"
            )
        self._table = table
        self._max_piece_len = max(len(b) for b in table)

    def __len__(self) -> int:
        return len(self.pieces)

    def tokenize_bytes(self, data: bytes) -> list[int]:
        ids = []
        table = self._table
        n = len(data)
        pos = 0
        while pos < n:
            for length in range(min(self._max_piece_len, n - pos), 0, -1):
                idx = table.get(data[pos : pos + length])
                if idx is not None:
                    ids.append(idx)
                    pos += length
                    break
        return ids

    def detokenize_bytes(self, ids: list[int]) -> bytes:
        out = []
        for i in ids:
            if not 0 <= i < len(self.pieces):
                raise InputValidationError(f"token id {i} out of range")
            out.append(self._piece_bytes[i])
        return b"".join(out)

    def tokenize(self, sentence: str) -> list[int]:
        return self.tokenize_bytes(sentence.encode("utf-8"))

    def detokenize(self, ids: list[int]) -> str:
        return self.detokenize_bytes(ids).decode("utf-8", errors="replace")


def byte_fallback_vocabulary(extra_pieces: list[str] = ()) -> Vocabulary:
    """Minimal complete inventory: three markers plus the 256 byte pieces."""
    pieces = ["<pad>", "<unk>", "</s>"]
    pieces += [f"<0x{b:02X}>" for b in range(256)]
    pieces += list(extra_pieces)
    return Vocabulary(pieces)


def save_vocabulary(vocab: Vocabulary, path: str | Path) -> None:
    for idx, piece in enumerate(vocab.pieces):
        if "\n" in piece or "\r" in piece:
            raise InputValidationError(f"piece {idx} contains a newline; not representable")
    Path(path).write_text("\n".join(vocab.pieces) + "\n", encoding="utf-8")


def load_vocabulary(path: str | Path) -> Vocabulary:
    content = Path(path).read_text(encoding="utf-8")
    if content.endswith("\n"):
        content = content[:-1]
    return Vocabulary(content.split("\n"))


# --- abbreviation lists -----------------------------------------------------


def _parse_abbreviations(text: str) -> frozenset[str]:
    entries = set()
    for line in text.splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            entries.add(line)
    return frozenset(entries)


def load_abbreviations(path: str | Path) -> frozenset[str]:
    """One abbreviation per line; blank lines and #-comments ignored."""
    return _parse_abbreviations(Path(path).read_text(encoding="utf-8"))


def default_abbreviations(lang: str = "en") -> frozenset[str]:
    """Shipped per-language abbreviation list; empty set for unknown languages."""
    ref = resources.files("localmt").joinpath(f"data/abbrev/{lang}.txt")
    if not ref.is_file():
        return frozenset()
    return _parse_abbreviations(ref.read_text(encoding="utf-8"))
