"""Turn scored windows into final hallucination spans.

Steps: boundary refinement (token snapping, local score-gradient search,
phrase and entity constraints), length-weighted merging of heavily
overlapping spans, then thresholding into hard and soft labels.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

from .datamodel import DetectionConfig, PredictionSet
from .segmenter import TokenizedText

PHRASE_CHARS = frozenset(
    ".,;:!?\"()[]{}«»“”„‟‹›「」『』（）【】《》〈〉"
    "。，、；：！？…"
    "،؛؟"
    "।॥"
)
_APOSTROPHES = frozenset("'’‘‚")


@dataclass(frozen=True)
class ScoredSpan:
    start: int
    end: int
    score: float
    origin_count: int = 1

    def __post_init__(self):
        if not self.start < self.end:
            raise ValueError(f"empty span ({self.start}, {self.end})")

    def __len__(self) -> int:
        return self.end - self.start


def is_phrase_char(text: str, i: int) -> bool:
    ch = text[i]
    if ch in PHRASE_CHARS:
        return True
    if ch in _APOSTROPHES:
        # an apostrophe inside a word (l'attrice, don't) is not a quote
        inside = 0 < i < len(text) - 1 and text[i - 1].isalnum() and text[i + 1].isalnum()
        return not inside
    return False


def crosses_phrase(text: str, p: int, q: int) -> bool:
    lo, hi = (p, q) if p <= q else (q, p)
    return any(is_phrase_char(text, i) for i in range(lo, hi))


def char_score_profile(length: int, windows: Iterable[tuple[int, int, float]]) -> list[float]:
    """Per-character maximum score over the windows covering it (0 if uncovered)."""
    prof = [0.0] * length
    for start, end, score in windows:
        for i in range(start, end):
            if score > prof[i]:
                prof[i] = score
    return prof


def _entity_like(tok: str) -> bool:
    if any(ch.isdigit() for ch in tok):
        return True
    for ch in tok:
        if ch.isalpha():
            return ch.isupper()
    return False


def entity_runs(tt: TokenizedText) -> list[int | None]:
    """Run id per token; consecutive entity-like tokens share an id.

    Entity-like means capitalized or digit-bearing. Phrase punctuation at a
    token edge ends the run.
    """
    text = tt.text
    ids: list[int | None] = []
    run = -1
    joinable = False
    for tok in tt.tokens:
        if not _entity_like(tok.text):
            ids.append(None)
            joinable = False
            continue
        if not (joinable and not is_phrase_char(text, tok.start)):
            run += 1
        ids.append(run)
        joinable = not is_phrase_char(text, tok.end - 1)
    return ids


class _Boundaries:
    """Token-boundary geometry of one text.

    Boundary ``b`` (0..n) sits between token ``b-1`` and token ``b``. As a
    start edge its character position is ``tokens[b].start``; as an end edge
    it is ``tokens[b-1].end``.
    """

    def __init__(self, tt: TokenizedText, char_scores: Sequence[float]):
        self.tt = tt
        self.toks = tt.tokens
        self.n = len(tt.tokens)
        self.runs = entity_runs(tt)
        # prefix sums make side means O(1)
        self.prefix = [0.0]
        for v in char_scores:
            self.prefix.append(self.prefix[-1] + v)

    def start_pos(self, b: int) -> int:
        return self.toks[b].start

    def end_pos(self, b: int) -> int:
        return self.toks[b - 1].end

    def splits_entity(self, b: int) -> bool:
        if b <= 0 or b >= self.n:
            return False
        left, right = self.runs[b - 1], self.runs[b]
        return left is not None and left == right

    def _mean(self, first: int, last: int) -> float | None:
        # mean char score over the hull of tokens[first..last-1]
        if first >= last:
            return None
        lo, hi = self.toks[first].start, self.toks[last - 1].end
        return (self.prefix[hi] - self.prefix[lo]) / (hi - lo)

    def gradient(self, b: int, width: int) -> float:
        left = self._mean(max(0, b - width), b)
        right = self._mean(b, min(self.n, b + width))
        if left is None or right is None:
            return 0.0
        return abs(left - right)

    def token_length(self, start: int, end: int) -> int:
        return sum(1 for t in self.toks if t.start < end and t.end > start)


def _snap(text: str, geo: _Boundaries, pos: int, is_start: bool) -> tuple[int | None, int]:
    """Snap a character edge to a token boundary.

    Returns ``(boundary index or None, char position)``; ``None`` means the
    edge could not move without crossing phrase punctuation and is left as is.
    """
    toks = geo.toks
    for k, tok in enumerate(toks):
        if is_start:
            if pos == tok.start:
                return k, pos
            if pos < tok.start:
                # in the gap before token k: trim whitespace
                return k, tok.start
            if tok.start < pos < tok.end:
                if not crosses_phrase(text, tok.start, pos):
                    return k, tok.start
                if k + 1 < geo.n and not crosses_phrase(text, pos, toks[k + 1].start):
                    return k + 1, toks[k + 1].start
                return None, pos
        else:
            if pos == tok.end:
                return k + 1, pos
            if tok.start < pos < tok.end:
                if not crosses_phrase(text, pos, tok.end):
                    return k + 1, tok.end
                if k > 0 and not crosses_phrase(text, toks[k - 1].end, pos):
                    return k, toks[k - 1].end
                return None, pos
            if pos <= tok.start:
                # in the gap after token k-1
                if k == 0:
                    return None, pos
                return k, toks[k - 1].end
    if is_start:
        return None, pos
    return (geo.n, toks[-1].end) if toks else (None, pos)


def _move_edge(text: str, geo: _Boundaries, b: int, is_start: bool, radius: int, limit: int) -> int:
    """Best boundary near ``b`` by local score gradient.

    ``limit`` keeps the span non-empty: start edges stay below it, end edges
    above it.
    """
    pos = geo.start_pos if is_start else geo.end_pos

    def allowed(c: int) -> bool:
        return c < limit if is_start else c > limit

    # entity atomicity: push a splitting edge outward to the run boundary
    step = -1 if is_start else 1
    while geo.splits_entity(b):
        nb = b + step
        if crosses_phrase(text, pos(b), pos(nb)):
            break
        b = nb

    width = max(radius, 1)
    candidates = [b]
    for direction in (-1, 1):
        c = b
        for _ in range(radius):
            nc = c + direction
            if is_start and not 0 <= nc < geo.n:
                break
            if not is_start and not 1 <= nc <= geo.n:
                break
            if crosses_phrase(text, pos(c), pos(nc)):
                break
            c = nc
            if allowed(c) and not geo.splits_entity(c):
                candidates.append(c)
    scored = [(geo.gradient(c, width), c) for c in candidates]
    best = max(g for g, _ in scored)
    if geo.gradient(b, width) >= best - 1e-12:
        return b
    winners = [c for g, c in scored if g >= best - 1e-12]
    return min(winners, key=lambda c: (abs(c - b), c))


def refine_boundaries(
    spans: Sequence[ScoredSpan],
    tt: TokenizedText,
    char_scores: Sequence[float],
    boundary_threshold: float,
    window_size: int,
) -> list[ScoredSpan]:
    """Align span edges to token, phrase and entity boundaries.

    Each edge is snapped outward to a token boundary, then moved within
    ``ceil(boundary_threshold * window_size)`` tokens to the boundary with the
    largest difference between the mean scores on either side. Edges never
    cross phrase punctuation and never split a run of capitalized or
    digit-bearing tokens. Spans that collapse are dropped.
    """
    if not tt.tokens:
        return []
    text = tt.text
    geo = _Boundaries(tt, char_scores)
    radius = math.ceil(boundary_threshold * window_size - 1e-12)
    out = []
    for span in spans:
        sb, spos = _snap(text, geo, span.start, True)
        eb, epos = _snap(text, geo, span.end, False)
        if sb is not None:
            limit = eb if eb is not None else geo.n
            sb = _move_edge(text, geo, sb, True, radius, limit)
            spos = geo.start_pos(sb)
        if eb is not None:
            limit = sb if sb is not None else -1
            eb = _move_edge(text, geo, eb, False, radius, limit)
            epos = geo.end_pos(eb)
        if spos < epos:
            out.append(ScoredSpan(spos, epos, span.score, span.origin_count))
    return out


def _overlap(a: tuple[int, int], b: tuple[int, int]) -> int:
    return max(0, min(a[1], b[1]) - max(a[0], b[0]))


def merge_overlapping(spans: Sequence[ScoredSpan], min_fraction: float = 0.5) -> list[ScoredSpan]:
    """Merge spans overlapping by at least half of the shorter one.

    A merged span covers the hull of its members and scores the
    length-weighted mean of the members' scores, using the members'
    pre-merge lengths. Merging repeats until no pair qualifies.
    """
    groups = [((s.start, s.end), [s]) for s in sorted(spans, key=lambda s: (s.start, s.end, -s.score))]
    changed = True
    while changed:
        changed = False
        for i in range(len(groups)):
            for j in range(i + 1, len(groups)):
                (a, ma), (b, mb) = groups[i], groups[j]
                shorter = min(a[1] - a[0], b[1] - b[0])
                if _overlap(a, b) >= min_fraction * shorter:
                    hull = (min(a[0], b[0]), max(a[1], b[1]))
                    groups[i] = (hull, ma + mb)
                    del groups[j]
                    changed = True
                    break
            if changed:
                break
    out = []
    for (start, end), members in groups:
        mass = sum(len(m) for m in members)
        score = sum(m.score * len(m) for m in members) / mass
        lo = min(m.score for m in members)
        hi = max(m.score for m in members)
        out.append(ScoredSpan(start, end, min(hi, max(lo, score)), sum(m.origin_count for m in members)))
    out.sort(key=lambda s: (s.start, s.end))
    return out


def _union(ranges: Iterable[tuple[int, int]]) -> list[tuple[int, int]]:
    out: list[list[int]] = []
    for s, e in sorted(ranges):
        if out and s <= out[-1][1]:
            out[-1][1] = max(out[-1][1], e)
        else:
            out.append([s, e])
    return [(s, e) for s, e in out]


def finalize(
    spans: Sequence[ScoredSpan],
    cfg: DetectionConfig,
    tt: TokenizedText,
    record_id: str | None = None,
    lang: str | None = None,
) -> PredictionSet:
    """Threshold spans into a :class:`PredictionSet`.

    Hard spans need a score strictly above ``score_threshold`` and at least
    ``min_span_length`` tokens. Soft spans are the per-character maximum over
    every hard candidate and every span scoring at least ``soft_floor``,
    emitted as maximal runs of equal probability.
    """
    geo = _Boundaries(tt, [0.0] * len(tt.text))
    hard_candidates = [
        s
        for s in spans
        if s.score > cfg.score_threshold and geo.token_length(s.start, s.end) >= cfg.min_span_length
    ]
    hard = _union((s.start, s.end) for s in hard_candidates)
    soft_sources = {(s.start, s.end, s.score) for s in hard_candidates}
    soft_sources.update((s.start, s.end, s.score) for s in spans if s.score >= cfg.soft_floor)
    prof = char_score_profile(len(tt.text), [(s, e, min(1.0, max(0.0, p))) for s, e, p in soft_sources])
    covered = [False] * len(tt.text)
    for s, e, _ in soft_sources:
        for i in range(s, e):
            covered[i] = True
    soft = []
    i = 0
    L = len(prof)
    while i < L:
        if not covered[i]:
            i += 1
            continue
        j = i + 1
        while j < L and covered[j] and prof[j] == prof[i]:
            j += 1
        soft.append((i, j, prof[i]))
        i = j
    return PredictionSet(record_id, tuple(hard), tuple(soft), lang)
