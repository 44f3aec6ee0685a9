"""Subword vocabulary training, segmentation and corpus subword counting.

The trainer samples a byte budget per input file, collects every substring of
every whitespace-delimited word (up to a length cap), and binary-searches the
frequency threshold whose surviving unit count lands nearest the requested
vocabulary size.  Single characters are always kept so segmentation of
sample-covered text can never fail; characters never seen in training fall
back to byte escape units.  Segmentation is greedy longest-match-first.

This is a self-contained stand-in for framework-internal wordpiece trainers:
it exposes the same knobs (target size, min_count, file byte budget) and its
counts feed the epoch arithmetic, but it is not a clone of any of them.
"""

from __future__ import annotations

import logging
import re
from collections import Counter
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .batching import CorpusStats

log = logging.getLogger(__name__)

DEFAULT_TARGET_SIZE = 32768
MAX_UNIT_LEN = 20

_ESCAPE_RE = re.compile(r"<0x([0-9A-F]{2})>")


@dataclass(frozen=True)
class SubwordVocab:
    """An ordered subword inventory with its training parameters."""

    units: tuple[str, ...]
    target_size: int
    min_count: int
    sample_bytes: int

    def __post_init__(self) -> None:
        if not self.units:
            raise ValueError("vocabulary has no units")
        if len(set(self.units)) != len(self.units):
            raise ValueError("duplicate units in vocabulary")

    @cached_property
    def _unit_set(self) -> frozenset[str]:
        return frozenset(self.units)

    @cached_property
    def _max_unit_len(self) -> int:
        return max(len(u) for u in self.units)

    def __len__(self) -> int:
        return len(self.units)

    def __contains__(self, unit: str) -> bool:
        return unit in self._unit_set


def sample_corpus(paths: Iterable, file_byte_budget: int) -> str:
    """Concatenate a per-file byte-budgeted prefix of lines from each input.

    Lines are consumed until their UTF-8 size (newline included) would exceed
    the file's budget.  A budget smaller than the first line still takes that
    line, with a warning, so the sample is never empty for non-empty inputs.
    """
    if file_byte_budget <= 0:
        raise ValueError(f"file_byte_budget must be > 0, got {file_byte_budget}")
    chunks: list[str] = []
    for path in paths:
        remaining = file_byte_budget
        took_any = False
        with open(path, encoding="utf-8") as f:
            for line in f:
                cost = len(line.encode("utf-8"))
                if cost > remaining:
                    if not took_any:
                        log.warning(
                            "%s: byte budget %d is smaller than the first line (%d bytes); "
                            "taking it anyway", path, file_byte_budget, cost,
                        )
                        chunks.append(line)
                    break
                chunks.append(line)
                remaining -= cost
                took_any = True
    return "".join(chunks)


def _substring_counts(word_counts: Counter, max_unit_len: int) -> Counter:
    counts: Counter = Counter()
    for word, c in word_counts.items():
        for i in range(len(word)):
            for j in range(i + 1, min(i + max_unit_len, len(word)) + 1):
                counts[word[i:j]] += c
    return counts


def train_vocab(
    sample: str, target_size: int = DEFAULT_TARGET_SIZE, max_unit_len: int = MAX_UNIT_LEN
) -> SubwordVocab:
    """Build a vocabulary of roughly ``target_size`` units from a text sample.

    Candidate units are all word substrings with frequency >= min_count plus
    every character seen; min_count is binary-searched so the unit count is
    nearest target_size (ties prefer the smaller min_count, i.e. the larger
    vocabulary).  A resulting min_count <= 2 is a symptom of training on too
    small a sample and is warned about.
    """
    if target_size < 1:
        raise ValueError(f"target_size must be >= 1, got {target_size}")
    words = Counter(sample.split())
    if not words:
        raise ValueError("empty training sample")
    counts = _substring_counts(words, max_unit_len)

    # Unit counts per candidate min_count, computed from the sorted frequency
    # arrays: substrings at or above the threshold plus characters below it.
    all_freqs = np.sort(np.fromiter(counts.values(), dtype=np.int64))
    char_freqs = np.sort([c for s, c in counts.items() if len(s) == 1])

    def vocab_size(min_count: int) -> int:
        above = len(all_freqs) - int(np.searchsorted(all_freqs, min_count, side="left"))
        chars_below = int(np.searchsorted(char_freqs, min_count, side="left"))
        return above + chars_below

    lo, hi = 1, int(all_freqs[-1]) + 1
    while lo < hi:  # smallest min_count whose vocab is not above target
        mid = (lo + hi) // 2
        if vocab_size(mid) <= target_size:
            hi = mid
        else:
            lo = mid + 1
    best = lo
    if best > 1 and abs(vocab_size(best - 1) - target_size) <= abs(vocab_size(best) - target_size):
        best = best - 1
    if best <= 2:
        log.warning(
            "chosen min_count=%d: the vocabulary is estimated from units seen only "
            "once or twice; consider a larger sample (bigger file byte budget)", best,
        )

    units = sorted(
        (s for s, c in counts.items() if c >= best or len(s) == 1),
        key=lambda s: (-counts[s], s),
    )
    return SubwordVocab(
        units=tuple(units),
        target_size=target_size,
        min_count=best,
        sample_bytes=len(sample.encode("utf-8")),
    )


def _segment_word(word: str, vocab: SubwordVocab) -> list[str]:
    unit_set = vocab._unit_set
    max_len = vocab._max_unit_len
    out: list[str] = []
    i = 0
    while i < len(word):
        for j in range(min(len(word), i + max_len), i, -1):
            if word[i:j] in unit_set:
                out.append(word[i:j])
                i = j
                break
        else:
            # character unknown to the vocab: emit one unit per UTF-8 byte
            out.extend(f"<0x{b:02X}>" for b in word[i].encode("utf-8"))
            i += 1
    return out


def segment(text: str, vocab: SubwordVocab) -> list[str]:
    """Greedy longest-match segmentation of each whitespace-delimited word.

    Concatenating the returned units (after decoding any byte escapes)
    reproduces each input word exactly; see ``decode_segments``.
    """
    out: list[str] = []
    for word in text.split():
        out.extend(_segment_word(word, vocab))
    return out


def decode_segments(segments: Sequence[str]) -> str:
    """Inverse of per-word segmentation: join units, decoding byte escapes.

    Escape-shaped units that were genuine text cannot be told apart from real
    escapes, so feed this only segmenter output.
    """
    raw = bytearray()
    for unit in segments:
        m = _ESCAPE_RE.fullmatch(unit)
        if m:
            raw.append(int(m.group(1), 16))
        else:
            raw.extend(unit.encode("utf-8"))
    return raw.decode("utf-8")


def count_corpus_subwords(
    pairs: Iterable[tuple[str, str]], vocab: SubwordVocab
) -> CorpusStats:
    """Corpus size in subwords: per pair, the longer side's segment count."""
    total = 0
    count = 0
    for src, tgt in pairs:
        total += max(len(segment(src, vocab)), len(segment(tgt, vocab)))
        count += 1
    return CorpusStats(total_subwords=total, pair_count=count)


def save_vocab(vocab: SubwordVocab, path) -> None:
    """Write one unit per line under a `# min_count=<n> target=<n>` header."""
    path = Path(path)
    lines = [f"# min_count={vocab.min_count} target={vocab.target_size}"]
    lines.extend(vocab.units)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_vocab(path) -> SubwordVocab:
    path = Path(path)
    lines = path.read_text(encoding="utf-8").split("\n")
    header = re.fullmatch(r"# min_count=(\d+) target=(\d+)", lines[0])
    if not header:
        raise ValueError(f"{path}: missing vocabulary header line")
    units = [line for line in lines[1:] if line]
    return SubwordVocab(
        units=tuple(units),
        target_size=int(header.group(2)),
        min_count=int(header.group(1)),
        sample_bytes=0,
    )
