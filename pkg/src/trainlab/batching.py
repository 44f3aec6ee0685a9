"""Token-budget batch planning and epoch/throughput arithmetic.

A sentence pair costs max(source, target) subwords.  Batches are packed
against a token budget counted over padded cost (bucket max length times the
number of pairs), so the budget approximates rather than equals the payload
subword count.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional, Sequence


@dataclass(frozen=True)
class SentencePair:
    """Subword lengths of one aligned sentence pair."""

    id: str
    src_len: int
    tgt_len: int

    def __post_init__(self) -> None:
        if self.src_len < 0 or self.tgt_len < 0:
            raise ValueError(f"pair {self.id!r}: negative length")
        if self.src_len == 0 and self.tgt_len == 0:
            raise ValueError(f"pair {self.id!r}: both sides empty")


@dataclass(frozen=True)
class CorpusStats:
    total_subwords: float
    pair_count: int


@dataclass(frozen=True)
class Batch:
    ids: tuple[str, ...]
    bucket_max_len: int
    padded_token_cost: int
    payload_token_cost: int
    over_budget: bool = False

    @property
    def padding_efficiency(self) -> float:
        return self.payload_token_cost / self.padded_token_cost


@dataclass(frozen=True)
class BatchPlan:
    batches: tuple[Batch, ...]
    excluded: tuple[str, ...] = ()


def pair_cost(pair: SentencePair) -> int:
    """Token cost of a pair: the longer of its two sides."""
    return max(pair.src_len, pair.tgt_len)


def corpus_stats(pairs: Iterable[SentencePair]) -> CorpusStats:
    """Sum of pair costs and pair count over a corpus."""
    total = 0
    count = 0
    for p in pairs:
        total += pair_cost(p)
        count += 1
    return CorpusStats(total_subwords=total, pair_count=count)


def filter_max_length(
    pairs: Sequence[SentencePair],
    max_length: Optional[int],
    batch_size: int,
) -> tuple[list[SentencePair], list[SentencePair]]:
    """Split pairs into (kept, excluded) by a per-side length threshold.

    A pair is excluded when either side exceeds the threshold.  When no
    max_length is given the batch size itself acts as the threshold, matching
    the trainer default.  Input order is preserved on both sides.
    """
    if batch_size <= 0:
        raise ValueError(f"batch_size must be > 0, got {batch_size}")
    if max_length is not None and max_length <= 0:
        raise ValueError(f"max_length must be > 0, got {max_length}")
    threshold = max_length if max_length is not None else batch_size
    kept: list[SentencePair] = []
    excluded: list[SentencePair] = []
    for p in pairs:
        if p.src_len > threshold or p.tgt_len > threshold:
            excluded.append(p)
        else:
            kept.append(p)
    return kept, excluded


def bucket_and_pack(
    pairs: Sequence[SentencePair],
    batch_size: int,
    excluded_ids: Sequence[str] = (),
) -> BatchPlan:
    """Pack length-filtered pairs into batches under a padded-token budget.

    Pairs are sorted by cost (ties keep input order) and cut greedily: a batch
    closes as soon as adding the next pair would push
    bucket_max_len * count over the budget.  A lone pair that by itself
    exceeds the budget becomes a singleton batch flagged over_budget rather
    than being dropped; dropping is filter_max_length's job.
    """
    if batch_size <= 0:
        raise ValueError(f"batch_size must be > 0, got {batch_size}")
    ordered = sorted(pairs, key=pair_cost)
    batches: list[Batch] = []
    current: list[SentencePair] = []
    current_max = 0

    def close() -> None:
        nonlocal current, current_max
        if not current:
            return
        padded = current_max * len(current)
        batches.append(
            Batch(
                ids=tuple(p.id for p in current),
                bucket_max_len=current_max,
                padded_token_cost=padded,
                payload_token_cost=sum(pair_cost(p) for p in current),
                over_budget=padded > batch_size,
            )
        )
        current = []
        current_max = 0

    for p in ordered:
        cost = pair_cost(p)
        new_max = max(current_max, cost)
        if current and new_max * (len(current) + 1) > batch_size:
            close()
            new_max = cost
        current.append(p)
        current_max = new_max
    close()
    return BatchPlan(batches=tuple(batches), excluded=tuple(excluded_ids))


def plan_batches(
    pairs: Sequence[SentencePair],
    batch_size: int,
    max_length: Optional[int] = None,
) -> BatchPlan:
    """Length-filter then pack, recording the excluded pair ids in the plan."""
    kept, excluded = filter_max_length(pairs, max_length, batch_size)
    return bucket_and_pack(kept, batch_size, excluded_ids=[p.id for p in excluded])


def steps_per_epoch(stats: CorpusStats, effective_batch: float) -> float:
    """Optimizer steps needed for one pass over the corpus (not rounded)."""
    if effective_batch <= 0:
        raise ValueError(f"effective_batch must be > 0, got {effective_batch}")
    return stats.total_subwords / effective_batch


def epochs_from_steps(steps: float, effective_batch: float, stats: CorpusStats) -> float:
    """Corpus passes completed after ``steps`` optimizer steps."""
    if effective_batch <= 0:
        raise ValueError(f"effective_batch must be > 0, got {effective_batch}")
    if stats.total_subwords <= 0:
        raise ValueError("corpus has no subwords")
    return steps * effective_batch / stats.total_subwords


def throughput(steps_per_hour: float, effective_batch: float) -> float:
    """Subwords digested per hour: computation speed times effective batch."""
    if steps_per_hour < 0 or effective_batch < 0:
        raise ValueError("throughput inputs must be non-negative")
    return steps_per_hour * effective_batch


def exclusion_stats(pairs: Sequence[SentencePair], thresholds: Sequence[int]) -> list[float]:
    """Percentage of pairs with either side longer than each threshold.

    Thresholds must be positive and strictly ascending; the resulting
    percentages are non-increasing.  An empty corpus is an error because 0%
    would be ambiguous.
    """
    if not pairs:
        raise ValueError("cannot compute exclusion percentages on an empty corpus")
    if not thresholds:
        return []
    if any(t <= 0 for t in thresholds):
        raise ValueError("thresholds must be positive")
    if any(b <= a for a, b in zip(thresholds, thresholds[1:])):
        raise ValueError("thresholds must be strictly ascending")
    n = len(pairs)
    return [
        100.0 * sum(1 for p in pairs if p.src_len > t or p.tgt_len > t) / n
        for t in thresholds
    ]
