"""Lexical matching of answer windows against sampled-response windows."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from . import kernels
from .segmenter import WindowSpan

PoolEntry = tuple[int, WindowSpan]


@dataclass(frozen=True)
class Match:
    sample_index: int
    window: WindowSpan
    similarity: float


@dataclass(frozen=True)
class MatchSet:
    source: WindowSpan
    matches: tuple[Match, ...]

    @property
    def matched_sample_count(self) -> int:
        return len({m.sample_index for m in self.matches})

    def __len__(self) -> int:
        return len(self.matches)


def sequence_similarity(a: str, b: str) -> float:
    """Case-folded Ratcliff/Obershelp ratio ``2*M / (|a| + |b|)``."""
    return kernels.ratio(a.casefold(), b.casefold())


class MatchPool:
    """Sample windows with their case-folded texts computed once."""

    def __init__(self, pool: Sequence[PoolEntry]):
        self.entries = sorted(pool, key=lambda e: (e[0], e[1].start, e[1].end))
        self.folded = [win.text.casefold() for _, win in self.entries]

    def match(self, win: WindowSpan, threshold: float, cap: int = 1) -> MatchSet:
        sims = kernels.ratios(win.text.casefold(), self.folded) if self.folded else []
        per_sample: dict[int, list[Match]] = {}
        for (idx, cand), sim in zip(self.entries, sims):
            if sim > threshold:
                per_sample.setdefault(idx, []).append(Match(idx, cand, sim))
        kept = []
        for idx in sorted(per_sample):
            best = sorted(per_sample[idx], key=lambda m: (-m.similarity, m.window.start, m.window.end))
            kept.extend(best[:cap])
        kept.sort(key=lambda m: (m.sample_index, m.window.start, m.window.end))
        return MatchSet(win, tuple(kept))


def find_matches(
    win: WindowSpan, pool: Sequence[PoolEntry] | MatchPool, threshold: float, cap: int = 1
) -> MatchSet:
    """Pool entries whose similarity to ``win`` is strictly above ``threshold``.

    At most ``cap`` entries per sample survive, highest similarity first and
    earlier character start on ties.
    """
    if not isinstance(pool, MatchPool):
        pool = MatchPool(pool)
    return pool.match(win, threshold, cap)
