"""Corpus BLEU with a fixed international tokenization.

The tokenizer splits punctuation and symbol characters from words by Unicode
category, with one carve-out: punctuation wedged between digits (as in
"1,000") stays attached.  The exact rule table is versioned in
docs/tokenization-rules.md and its version is embedded in every score
signature, so reported numbers stay comparable across runs.
"""

from __future__ import annotations

import math
import unicodedata
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

TOKENIZATION_VERSION = "intl-v1"


@dataclass(frozen=True)
class BleuConfig:
    max_ngram_order: int = 4
    case_insensitive: bool = True
    smoothing: str = "exponential"
    tokenization: str = "international"

    def __post_init__(self) -> None:
        if self.max_ngram_order < 1:
            raise ValueError(f"max_ngram_order must be >= 1, got {self.max_ngram_order}")
        if self.smoothing != "exponential":
            raise ValueError(f"unsupported smoothing {self.smoothing!r}")
        if self.tokenization != "international":
            raise ValueError(f"unsupported tokenization {self.tokenization!r}")

    @property
    def signature(self) -> str:
        parts = ["BLEU", f"case.{'lc' if self.case_insensitive else 'mixed'}", "numrefs.1",
                 "smooth.exp", f"tok.{TOKENIZATION_VERSION}"]
        if self.max_ngram_order != 4:
            parts.append(f"order.{self.max_ngram_order}")
        return "+".join(parts)


@dataclass(frozen=True)
class BleuResult:
    """Corpus score in [0, 100] plus the quantities it was computed from.

    ``per_order_precisions`` are percentages, one entry per n-gram order.
    """

    score: float
    per_order_precisions: tuple[float, ...]
    brevity_penalty: float
    hyp_length: int
    ref_length: int
    signature: str


def tokenize_international(text: str) -> list[str]:
    """Split a line into tokens by the versioned international rule table.

    Symbol characters (category S*) always become separate tokens.
    Punctuation (category P*) is detached from its neighbours unless every
    adjacent character is a digit (category N*), so "1,000" survives while
    "Hello," splits.  Whitespace runs collapse.
    """
    n = len(text)
    out: list[str] = []
    for i, ch in enumerate(text):
        major = unicodedata.category(ch)[0]
        if major == "S":
            out.append(f" {ch} ")
        elif major == "P":
            prev_numeric = i == 0 or unicodedata.category(text[i - 1])[0] == "N"
            next_numeric = i == n - 1 or unicodedata.category(text[i + 1])[0] == "N"
            if prev_numeric and next_numeric:
                out.append(ch)
            else:
                out.append(f" {ch} ")
        else:
            out.append(ch)
    return "".join(out).split()


def _ngram_counts(tokens: Sequence[str], order: int) -> Counter:
    return Counter(tuple(tokens[i : i + order]) for i in range(len(tokens) - order + 1))


def corpus_bleu(
    hypotheses: Sequence[str],
    references: Sequence[str],
    config: BleuConfig | None = None,
) -> BleuResult:
    """Single-reference corpus BLEU under the configured protocol.

    Clipped n-gram matches are aggregated over the whole corpus per order,
    combined by geometric mean and scaled by the brevity penalty
    exp(1 - ref/hyp) when the hypothesis side is shorter.  A zero-match order
    contributes 1 / (2**z * total) where z counts the zero-match orders seen
    so far (exponential smoothing).  An order with no hypothesis n-grams at
    all yields a score of 0.
    """
    config = config or BleuConfig()
    if len(hypotheses) != len(references):
        raise ValueError(
            f"corpus size mismatch: {len(hypotheses)} hypotheses vs {len(references)} references"
        )
    if not hypotheses:
        raise ValueError("empty corpus")

    order = config.max_ngram_order
    correct = [0] * order
    total = [0] * order
    hyp_len = 0
    ref_len = 0
    for hyp, ref in zip(hypotheses, references):
        if config.case_insensitive:
            hyp, ref = hyp.lower(), ref.lower()
        hyp_tokens = tokenize_international(hyp)
        ref_tokens = tokenize_international(ref)
        hyp_len += len(hyp_tokens)
        ref_len += len(ref_tokens)
        for n in range(1, order + 1):
            hyp_ngrams = _ngram_counts(hyp_tokens, n)
            if not hyp_ngrams:
                continue
            ref_ngrams = _ngram_counts(ref_tokens, n)
            total[n - 1] += max(len(hyp_tokens) - n + 1, 0)
            correct[n - 1] += sum(min(c, ref_ngrams[g]) for g, c in hyp_ngrams.items())

    if hyp_len == 0 or hyp_len >= ref_len:
        brevity_penalty = 1.0 if hyp_len else 0.0
    else:
        brevity_penalty = math.exp(1.0 - ref_len / hyp_len)

    precisions = [0.0] * order
    smooth = 1.0
    degenerate = False
    for n in range(order):
        if total[n] == 0:
            # no hypothesis n-grams of this order exist anywhere in the corpus
            degenerate = True
            break
        if correct[n] == 0:
            smooth *= 2.0
            precisions[n] = 100.0 / (smooth * total[n])
        else:
            precisions[n] = 100.0 * correct[n] / total[n]

    if degenerate:
        score = 0.0
    else:
        score = brevity_penalty * math.exp(
            sum(math.log(p / 100.0) for p in precisions) / order
        ) * 100.0

    return BleuResult(
        score=score,
        per_order_precisions=tuple(precisions),
        brevity_penalty=brevity_penalty,
        hyp_length=hyp_len,
        ref_length=ref_len,
        signature=config.signature,
    )


def _read_lines(path: Path) -> list[str]:
    text = path.read_text(encoding="utf-8")
    text = text.replace("\r\n", "\n").replace("\r", "\n")
    if text.endswith("\n"):
        text = text[:-1]
    return text.split("\n") if text else []


def score_translation_file(hyp_path, ref_path, config: BleuConfig | None = None) -> BleuResult:
    """Score one translation file against one reference file, line-aligned."""
    hyp_path, ref_path = Path(hyp_path), Path(ref_path)
    hyp_lines = _read_lines(hyp_path)
    ref_lines = _read_lines(ref_path)
    if len(hyp_lines) != len(ref_lines):
        raise ValueError(
            f"line count mismatch: {hyp_path} has {len(hyp_lines)} lines, "
            f"{ref_path} has {len(ref_lines)}"
        )
    return corpus_bleu(hyp_lines, ref_lines, config)
