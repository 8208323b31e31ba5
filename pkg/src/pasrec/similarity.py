"""Count-based item-to-item similarity engine.

The whole similarity family is a fold over one sufficient statistic: for each
ordered item pair (i_from, i_to), the histogram of signed position gaps
p(i_to) - p(i_from) across users, plus user-set cardinalities. The corpus is
scanned once; every measure, at every hyperparameter setting, is then a cheap
aggregation over the per-pair histograms.

Measures:
  bis      users with gap in [-rho*ell, ell], over the user-set union
  pas_uni  users with gap in (h(k-t), ell], over the union (position-aware)
  pas      convex combination of the two indicators (lam=0 -> bis, lam=1 -> pas_uni)
  cosine   co-occurrence count over sqrt(|U_from| * |U_to|)
"""
from __future__ import annotations

import json
import logging
import math
from bisect import bisect_right
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from collections.abc import Sequence

from .domain import MEASURES, SimilarityParams, UserSequence

log = logging.getLogger(__name__)

RANK_CRITERIA = ("bis", "max_t")


@dataclass(frozen=True)
class PairStats:
    """Directed sufficient statistic for one ordered pair (i_from, i_to).

    gap_counts   users per signed gap p(i_to) - p(i_from), |gap| <= ell_max
    co_users     users containing both items, at any gap
    union_users  |U_from ∪ U_to|
    """

    gap_counts: dict[int, int]
    co_users: int
    union_users: int


def scale(x: float, scaling: str, w: float) -> float:
    """Threshold scaling h(x): h_a(x)=x, h_b(x)=x/w, h_c(x)=w*floor(x/w)."""
    if w <= 1.0:
        raise ValueError(f"scaling parameter w must be > 1, got {w}")
    if x < 0:
        raise ValueError(f"scaling argument must be non-negative, got {x}")
    if scaling == "h_a":
        return x
    if scaling == "h_b":
        return x / w
    if scaling == "h_c":
        return w * math.floor(x / w)
    raise ValueError(f"unknown scaling {scaling!r}")


def _combine(n_bis: int, n_uni: int, lam: float, union: int) -> float:
    # single shared expression so every code path is bit-identical
    return ((1.0 - lam) * n_bis + lam * n_uni) / union


def bis_similarity(pair: PairStats, ell: int, rho: float) -> float:
    """Bidirectional similarity: gap in [-rho*ell, ell], over the union."""
    if pair.union_users == 0:
        return 0.0
    lo = -rho * ell
    count = sum(c for g, c in pair.gap_counts.items() if lo <= g <= ell)
    return count / pair.union_users


def pas_uni_similarity(
    pair: PairStats, ell: int, k: int, t: int, scaling: str, w: float
) -> float:
    """Unidirectional position-aware similarity at window position t.

    Counts users with gap strictly above h(k - t) and at most ell.
    """
    if not 1 <= t <= k:
        raise ValueError(f"window position t={t} outside 1..{k}")
    if pair.union_users == 0:
        return 0.0
    threshold = scale(k - t, scaling, w)
    count = sum(c for g, c in pair.gap_counts.items() if threshold < g <= ell)
    return count / pair.union_users


def pas_similarity(pair: PairStats, params: SimilarityParams, t: int) -> float:
    """Position-aware similarity: (1-lam)*bis + lam*pas_uni, one division.

    Reduces bit-exactly to bis_similarity at lam=0 and to pas_uni_similarity
    at lam=1.
    """
    k = params.k
    if not 1 <= t <= k:
        raise ValueError(f"window position t={t} outside 1..{k}")
    if pair.union_users == 0:
        return 0.0
    lo = -params.rho * params.ell
    threshold = scale(k - t, params.scaling, params.w)
    n_bis = 0
    n_uni = 0
    for g, c in pair.gap_counts.items():
        if lo <= g <= params.ell:
            n_bis += c
        if threshold < g <= params.ell:
            n_uni += c
    return _combine(n_bis, n_uni, params.lam, pair.union_users)


def cosine_similarity(pair: PairStats, count_i: int, count_j: int) -> float:
    """Cosine over binary incidence: co_users / sqrt(count_i * count_j)."""
    if count_i == 0 or count_j == 0:
        return 0.0
    return pair.co_users / math.sqrt(count_i * count_j)


class PairStore:
    """Per-pair gap histograms and co-occurrence counts for a training corpus.

    Pairs are stored once per unordered pair under (a, b) with a < b in the
    interned index order (item identifiers sorted ascending); the stored gap
    is p(b) - p(a), so the directed view for (b -> a) is the negation.
    Histograms are restricted to |gap| <= ell_max; co-occurrence counts and
    per-item user counts are exact regardless of the band, which keeps the
    union denominators and the cosine baseline exact for every pair.
    """

    def __init__(
        self,
        items: tuple[str, ...],
        item_users: list[int],
        co: dict[tuple[int, int], int],
        gaps: dict[tuple[int, int], dict[int, int]],
        ell_max: int,
        n_sequences: int,
    ) -> None:
        self.items = items
        self.item_index = {item: idx for idx, item in enumerate(items)}
        self.item_users = item_users
        self.co = co
        self.gaps = gaps
        self.ell_max = ell_max
        self.n_sequences = n_sequences
        self._bis_numerator_cache: dict[tuple[int, float], dict[tuple[int, int], tuple[int, int]]] = {}
        self._uni_numerator_cache: dict[int, dict[tuple[int, int], tuple[int, int]]] = {}

    @property
    def n_items(self) -> int:
        return len(self.items)

    def user_count(self, item: str) -> int:
        idx = self.item_index.get(item)
        return 0 if idx is None else self.item_users[idx]

    def _union(self, a: int, b: int) -> int:
        key = (a, b) if a < b else (b, a)
        return self.item_users[a] + self.item_users[b] - self.co.get(key, 0)

    def pair_stats(self, i_from: str, i_to: str) -> PairStats:
        """Directed view for (i_from -> i_to); empty stats for unseen items."""
        a = self.item_index.get(i_from)
        b = self.item_index.get(i_to)
        if a is None or b is None or a == b:
            known = [x for x in (a, b) if x is not None]
            union = self.item_users[known[0]] if len(known) == 1 else 0
            return PairStats(gap_counts={}, co_users=0, union_users=union)
        key = (a, b) if a < b else (b, a)
        hist = self.gaps.get(key, {})
        if a < b:
            gap_counts = dict(hist)
        else:
            gap_counts = {-g: c for g, c in hist.items()}
        return PairStats(
            gap_counts=gap_counts,
            co_users=self.co.get(key, 0),
            union_users=self._union(a, b),
        )

    def bis_numerators(self, ell: int, rho: float) -> dict[tuple[int, int], tuple[int, int]]:
        """Per canonical pair (a, b): bidirectional numerators for both
        directions (a->b, b->a), computed in one pass and cached per (ell, rho).
        """
        cache_key = (ell, rho)
        cached = self._bis_numerator_cache.get(cache_key)
        if cached is not None:
            return cached
        lo = -rho * ell
        result: dict[tuple[int, int], tuple[int, int]] = {}
        for key, hist in self.gaps.items():
            fwd = 0
            rev = 0
            for g, c in hist.items():
                if lo <= g <= ell:
                    fwd += c
                if lo <= -g <= ell:
                    rev += c
            result[key] = (fwd, rev)
        self._bis_numerator_cache[cache_key] = result
        return result

    def uni_numerators_at_k(self, ell: int) -> dict[tuple[int, int], tuple[int, int]]:
        """Per canonical pair: position-aware numerators at t = k (threshold 0,
        i.e. gaps in (0, ell]) for both directions, cached per ell.
        """
        cached = self._uni_numerator_cache.get(ell)
        if cached is not None:
            return cached
        result: dict[tuple[int, int], tuple[int, int]] = {}
        for key, hist in self.gaps.items():
            fwd = 0
            rev = 0
            for g, c in hist.items():
                if 0 < g <= ell:
                    fwd += c
                elif 0 < -g <= ell:
                    rev += c
            result[key] = (fwd, rev)
        self._uni_numerator_cache[ell] = result
        return result


def _count_chunk(
    sequences: list[UserSequence], item_index: dict[str, int], ell_max: int
) -> tuple[dict[int, int], dict[tuple[int, int], int], dict[tuple[int, int], dict[int, int]]]:
    item_users: dict[int, int] = {}
    co: dict[tuple[int, int], int] = {}
    gaps: dict[tuple[int, int], dict[int, int]] = {}
    for seq in sequences:
        idxs = [item_index[item] for item in seq.items]
        for j, b in enumerate(idxs):
            item_users[b] = item_users.get(b, 0) + 1
            for d in range(1, j + 1):
                a = idxs[j - d]
                if a < b:
                    key, gap = (a, b), d
                else:
                    key, gap = (b, a), -d
                co[key] = co.get(key, 0) + 1
                if d <= ell_max:
                    hist = gaps.get(key)
                    if hist is None:
                        hist = gaps[key] = {}
                    hist[gap] = hist.get(gap, 0) + 1
    return item_users, co, gaps


def _chunked(seq: list, n_chunks: int) -> list[list]:
    size = math.ceil(len(seq) / n_chunks)
    return [seq[i : i + size] for i in range(0, len(seq), size)]


def count_pairs(
    sequences: Sequence[UserSequence], ell_max: int, workers: int = 1
) -> PairStore:
    """Scan the corpus once and build the pair-statistics store.

    The scan visits each within-user item pair once: the co-occurrence count
    is exact, the gap histogram is kept only for |gap| <= ell_max. With
    workers > 1 the user list is split into contiguous chunks counted
    independently and merged by integer addition, so the result is identical
    for any worker count.
    """
    if ell_max < 1:
        raise ValueError(f"ell_max must be >= 1, got {ell_max}")
    sequences = list(sequences)
    items = tuple(sorted({item for seq in sequences for item in seq.items}))
    item_index = {item: idx for idx, item in enumerate(items)}

    if workers > 1 and len(sequences) > 1:
        chunks = _chunked(sequences, workers)
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(
                pool.map(_count_chunk, chunks, [item_index] * len(chunks), [ell_max] * len(chunks))
            )
    else:
        parts = [_count_chunk(sequences, item_index, ell_max)]

    item_users = [0] * len(items)
    co: dict[tuple[int, int], int] = {}
    gaps: dict[tuple[int, int], dict[int, int]] = {}
    for part_users, part_co, part_gaps in parts:
        for idx, n in part_users.items():
            item_users[idx] += n
        for key, n in part_co.items():
            co[key] = co.get(key, 0) + n
        for key, hist in part_gaps.items():
            merged = gaps.get(key)
            if merged is None:
                gaps[key] = dict(hist)
            else:
                for g, c in hist.items():
                    merged[g] = merged.get(g, 0) + c

    log.info(
        "counted %d sequences: %d items, %d co-occurring pairs, %d within gap band %d",
        len(sequences), len(items), len(co), len(gaps), ell_max,
    )
    return PairStore(items, item_users, co, gaps, ell_max, len(sequences))


class NeighborIndex:
    """Per-item nearest neighbors with precomputed similarity values.

    Each entry is (neighbor_index, value, vector): ``value`` is the stored
    position-independent similarity (bidirectional for bis/pas/pas_uni,
    cosine for cosine) and ``vector`` holds the per-window-position values
    for t = 1..k (empty for position-independent measures).
    """

    FORMAT = "pasrec-index"
    VERSION = 1

    def __init__(
        self,
        measure: str,
        params: SimilarityParams,
        items: tuple[str, ...],
        entries: list[list[tuple[int, float, tuple[float, ...]]]],
        rank_by: str = "bis",
    ) -> None:
        self.measure = measure
        self.params = params
        self.items = items
        self.item_index = {item: idx for idx, item in enumerate(items)}
        self.entries = entries
        self.rank_by = rank_by
        self._maps: list[dict[int, tuple[float, tuple[float, ...]]]] | None = None
        self._reverse: dict[int, list[tuple[int, float, tuple[float, ...]]]] | None = None

    @property
    def neighbor_maps(self) -> list[dict[int, tuple[float, tuple[float, ...]]]]:
        if self._maps is None:
            self._maps = [
                {nbr: (value, vector) for nbr, value, vector in row} for row in self.entries
            ]
        return self._maps

    @property
    def reverse(self) -> dict[int, list[tuple[int, float, tuple[float, ...]]]]:
        """Inverted view: neighbor index -> [(target, value, vector), ...]."""
        if self._reverse is None:
            rev: dict[int, list[tuple[int, float, tuple[float, ...]]]] = {}
            for target, row in enumerate(self.entries):
                for nbr, value, vector in row:
                    rev.setdefault(nbr, []).append((target, value, vector))
            self._reverse = rev
        return self._reverse

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, NeighborIndex):
            return NotImplemented
        return (
            self.measure == other.measure
            and self.params == other.params
            and self.rank_by == other.rank_by
            and self.items == other.items
            and self.entries == other.entries
        )

    def save(self, path: str) -> None:
        params = self.params
        header = {
            "ell": params.ell, "rho": params.rho, "lam": params.lam,
            "scaling": params.scaling, "w": params.w, "n_neighbors": params.n_neighbors,
        }
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(f"#{self.FORMAT}\t{self.VERSION}\n")
            fh.write(f"#measure\t{self.measure}\n")
            fh.write(f"#rank_by\t{self.rank_by}\n")
            fh.write(f"#params\t{json.dumps(header, sort_keys=True)}\n")
            fh.write(f"#items\t{json.dumps(list(self.items))}\n")
            for target, row in enumerate(self.entries):
                for nbr, value, vector in row:
                    packed = ",".join(repr(v) for v in vector)
                    fh.write(f"{target}\t{nbr}\t{value!r}\t{packed}\n")

    @classmethod
    def load(cls, path: str) -> "NeighborIndex":
        with open(path, encoding="utf-8") as fh:
            magic = fh.readline().rstrip("\n").split("\t")
            if magic[0] != f"#{cls.FORMAT}" or int(magic[1]) != cls.VERSION:
                raise ValueError(f"{path}: not a {cls.FORMAT} v{cls.VERSION} artifact")
            measure = fh.readline().rstrip("\n").split("\t")[1]
            rank_by = fh.readline().rstrip("\n").split("\t")[1]
            raw_params = json.loads(fh.readline().rstrip("\n").split("\t", 1)[1])
            items = tuple(json.loads(fh.readline().rstrip("\n").split("\t", 1)[1]))
            params = SimilarityParams(**raw_params)
            entries: list[list[tuple[int, float, tuple[float, ...]]]] = [[] for _ in items]
            for line in fh:
                target_s, nbr_s, value_s, packed = line.rstrip("\n").split("\t")
                vector = tuple(float(v) for v in packed.split(",")) if packed else ()
                entries[int(target_s)].append((int(nbr_s), float(value_s), vector))
        return cls(measure, params, items, entries, rank_by=rank_by)


def _uni_numerators(hist_items: list[tuple[int, int]], params: SimilarityParams) -> list[int]:
    """Position-aware numerators for t = 1..k via prefix sums over positive gaps."""
    positive = sorted((g, c) for g, c in hist_items if 0 < g <= params.ell)
    gs = [g for g, _ in positive]
    prefix = [0]
    for _, c in positive:
        prefix.append(prefix[-1] + c)
    total = prefix[-1]
    out = []
    for t in range(1, params.k + 1):
        threshold = scale(params.k - t, params.scaling, params.w)
        out.append(total - prefix[bisect_right(gs, threshold)])
    return out


def build_neighbor_index(
    store: PairStore,
    params: SimilarityParams,
    measure: str,
    rank_by: str = "bis",
) -> NeighborIndex:
    """Select the top n_neighbors per item and precompute stored similarities.

    Candidates are the pairs the store observed: gap-band co-occurrences for
    the positional measures, any co-occurrence for cosine. Ranking is by the
    measure's position-independent criterion (bidirectional value for bis and
    pas, the t=k position-aware value for pas_uni, cosine for cosine;
    rank_by="max_t" switches pas to its t=k value). Ties break toward the
    smaller item identifier.
    """
    if measure not in MEASURES:
        raise ValueError(f"unknown measure {measure!r}, expected one of {MEASURES}")
    if rank_by not in RANK_CRITERIA:
        raise ValueError(f"unknown rank criterion {rank_by!r}")
    if store.ell_max < params.ell:
        raise ValueError(f"store gap band {store.ell_max} narrower than ell={params.ell}")

    n_items = store.n_items
    adjacency: list[list[int]] = [[] for _ in range(n_items)]
    pair_keys = store.co if measure == "cosine" else store.gaps
    for a, b in pair_keys:
        adjacency[b].append(a)
        adjacency[a].append(b)

    bis_nums = None if measure == "cosine" else store.bis_numerators(params.ell, params.rho)
    rank_needs_uni = measure == "pas_uni" or (measure == "pas" and rank_by == "max_t")
    uni_nums = store.uni_numerators_at_k(params.ell) if rank_needs_uni else None

    entries: list[list[tuple[int, float, tuple[float, ...]]]] = []
    for target in range(n_items):
        candidates = sorted(adjacency[target])
        scored: list[tuple[float, int]] = []
        for cand in candidates:
            key = (cand, target) if cand < target else (target, cand)
            union = store._union(cand, target)
            if measure == "cosine":
                co = store.co[key]
                score = co / math.sqrt(store.item_users[cand] * store.item_users[target])
            else:
                fwd, rev = bis_nums[key]
                n_bis = fwd if cand < target else rev
                if rank_needs_uni:
                    # pas_uni, or pas ranked by its largest (t = k) value
                    uni_fwd, uni_rev = uni_nums[key]
                    n_uni = uni_fwd if cand < target else uni_rev
                    lam = 1.0 if measure == "pas_uni" else params.lam
                    score = _combine(n_bis, n_uni, lam, union)
                else:
                    score = n_bis / union
            scored.append((score, cand))
        scored.sort(key=lambda pair: (-pair[0], pair[1]))
        top = scored[: params.n_neighbors]

        row: list[tuple[int, float, tuple[float, ...]]] = []
        for _, cand in top:
            key = (cand, target) if cand < target else (target, cand)
            union = store._union(cand, target)
            if measure == "cosine":
                value = store.co[key] / math.sqrt(store.item_users[cand] * store.item_users[target])
                vector: tuple[float, ...] = ()
            else:
                fwd, rev = bis_nums[key]
                n_bis = fwd if cand < target else rev
                value = n_bis / union
                if measure == "bis":
                    vector = ()
                else:
                    stats = store.pair_stats(store.items[cand], store.items[target])
                    lam = 1.0 if measure == "pas_uni" else params.lam
                    uni = _uni_numerators(list(stats.gap_counts.items()), params)
                    vector = tuple(_combine(n_bis, n, lam, union) for n in uni)
            row.append((cand, value, vector))
        entries.append(row)

    log.info(
        "built %s index: %d items, %d neighbor entries",
        measure, n_items, sum(len(row) for row in entries),
    )
    return NeighborIndex(measure, params, store.items, entries, rank_by=rank_by)


def average_uni_by_gap(
    store: PairStore, ell: int = 10, n_neighbors: int = 20, w: float = 2.0
) -> dict[str, list[float]]:
    """Average position-aware similarity per window gap G = k - t, by scaling.

    Neighbor sets are the top n_neighbors per item ranked at t = k, where the
    threshold h(0) = 0 makes the ranking identical for every scaling; the
    averages then show how fast each scaled variant decays as the query item
    sits further from the prediction point.
    """
    params = SimilarityParams(ell=ell, rho=0.2, lam=1.0, scaling="h_a", w=w,
                              n_neighbors=n_neighbors)
    index = build_neighbor_index(store, params, "pas_uni")
    pair_stats = [
        store.pair_stats(store.items[nbr], store.items[target])
        for target, row in enumerate(index.entries)
        for nbr, _value, _vector in row
    ]
    profile: dict[str, list[float]] = {}
    for scaling in ("h_a", "h_b", "h_c"):
        means = []
        for gap in range(ell):
            t = ell - gap
            values = [pas_uni_similarity(stats, ell, ell, t, scaling, w) for stats in pair_stats]
            means.append(math.fsum(values) / len(values) if values else 0.0)
        profile[scaling] = means
    return profile
