"""Synthetic interaction corpora with planted sequential structure.

Items are arranged on a hidden ring; each user walks the ring, following the
planted successor with probability ``signal`` and jumping uniformly at random
otherwise. Optional ``reverse_noise`` swaps adjacent pairs after the walk,
which is exactly the kind of ordering noise the reverse factor is meant to
absorb. Generation is deterministic per seed and per user, so corpora are
reproducible regardless of how the user loop is scheduled.
"""
from __future__ import annotations

import random
from dataclasses import dataclass

from .domain import InteractionRecord

_RESAMPLE_RETRIES = 30


@dataclass(frozen=True)
class SynthConfig:
    n_users: int
    n_items: int
    seq_length_range: tuple[int, int] = (10, 30)
    signal: float = 0.8
    reverse_noise: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        lo, hi = self.seq_length_range
        if lo < 3 or hi < lo:
            raise ValueError(f"sequence length range must satisfy 3 <= min <= max, got {self.seq_length_range}")
        if not 0.0 <= self.signal <= 1.0:
            raise ValueError(f"signal must lie in [0, 1], got {self.signal}")
        if not 0.0 <= self.reverse_noise <= 1.0:
            raise ValueError(f"reverse_noise must lie in [0, 1], got {self.reverse_noise}")
        if self.n_users < 1 or self.n_items < 3:
            raise ValueError("need at least 1 user and 3 items")
        if self.n_items < lo:
            raise ValueError(f"catalog of {self.n_items} items cannot fill sequences of length {lo}")


def _item_label(idx: int, width: int) -> str:
    return f"i{idx:0{width}d}"


def _user_label(idx: int, width: int) -> str:
    return f"u{idx:0{width}d}"


def _walk(
    rng: random.Random, ring_next: list[int], n_items: int, length: int, signal: float
) -> list[int]:
    current = rng.randrange(n_items)
    seq = [current]
    used = {current}
    while len(seq) < length:
        nxt = -1
        if rng.random() < signal:
            candidate = ring_next[current]
            if candidate not in used:
                nxt = candidate
        if nxt < 0:
            for _ in range(_RESAMPLE_RETRIES):
                candidate = rng.randrange(n_items)
                if candidate not in used:
                    nxt = candidate
                    break
            else:
                break  # catalog effectively exhausted; truncate
        seq.append(nxt)
        used.add(nxt)
        current = nxt
    return seq


def generate(config: SynthConfig) -> list[InteractionRecord]:
    """Generate one corpus: per-user ring walks with uniform noise, adjacent
    swaps, and consecutive integer timestamps within each user.
    """
    ring_rng = random.Random(config.seed)
    order = list(range(config.n_items))
    ring_rng.shuffle(order)
    ring_next = [0] * config.n_items
    for pos, item in enumerate(order):
        ring_next[item] = order[(pos + 1) % config.n_items]

    item_width = len(str(config.n_items - 1))
    user_width = len(str(config.n_users - 1))
    lo, hi = config.seq_length_range
    records: list[InteractionRecord] = []
    for u in range(config.n_users):
        rng = random.Random(config.seed * 1_000_003 + u + 1)
        length = rng.randint(lo, min(hi, config.n_items))
        seq = _walk(rng, ring_next, config.n_items, length, config.signal)
        for j in range(len(seq) - 1):
            if rng.random() < config.reverse_noise:
                seq[j], seq[j + 1] = seq[j + 1], seq[j]
        user = _user_label(u, user_width)
        records.extend(
            InteractionRecord(user=user, item=_item_label(item, item_width), rating=5, timestamp=ts)
            for ts, item in enumerate(seq)
        )
    return records


def write_log(records: list[InteractionRecord], path: str, delimiter: str = "::") -> None:
    """Write records in the delimiter-separated layout the ingest side reads:
    user, item, rating, timestamp.
    """
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            rating = rec.rating if rec.rating is not None else ""
            fh.write(delimiter.join((rec.user, rec.item, str(rating), str(rec.timestamp))) + "\n")
