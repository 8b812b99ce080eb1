"""End-to-end detection for one record.

Split into a scoring stage, which depends on windowing, matching and
weights, and a span stage, which depends only on the score threshold,
minimum span length and boundary threshold. The tuner reuses the scoring
stage across grid points that differ only in span-stage parameters.
"""
from __future__ import annotations

from dataclasses import dataclass

from .datamodel import DetectionConfig, PredictionSet, Record, SampleSet
from .errors import ScoringError
from .matcher import MatchPool
from .refiner import ScoredSpan, char_score_profile, finalize, merge_overlapping, refine_boundaries
from .scorer import ComponentScores, EmbeddingProvider, embed_texts, score_window
from .segmenter import TokenizedText, enumerate_windows, segment_samples, tokenize

SCORING_FIELDS = ("window_size", "stride", "similarity_threshold", "alpha", "beta", "gamma", "match_cap")


@dataclass(frozen=True)
class RecordScores:
    record_id: str | None
    lang: str
    tokenized: TokenizedText
    windows: tuple[ComponentScores, ...]
    char_scores: tuple[float, ...]


def score_record(
    record: Record, samples: SampleSet, cfg: DetectionConfig, provider: EmbeddingProvider
) -> RecordScores:
    n = len(samples)
    if n == 0:
        raise ScoringError(f"record {record.id}: sample set is empty")
    tt = tokenize(record.model_output_text, record.lang)
    windows = enumerate_windows(tt, cfg.window_size, cfg.stride)
    pool = MatchPool(segment_samples(samples, record.lang, cfg.window_size, cfg.stride))
    matchsets = [pool.match(win, cfg.similarity_threshold, cfg.match_cap) for win in windows]
    texts = []
    for m in matchsets:
        if len(m) >= 2:
            texts.append(m.source.text)
            texts.extend(match.window.text for match in m.matches)
    vectors = embed_texts(texts, provider)
    scored = tuple(score_window(m, n, cfg, vectors=vectors) for m in matchsets)
    profile = char_score_profile(len(tt.text), [(s.window.start, s.window.end, s.score) for s in scored])
    return RecordScores(record.id, record.lang, tt, scored, tuple(profile))


def predict_from_scores(rs: RecordScores, cfg: DetectionConfig) -> PredictionSet:
    spans = [ScoredSpan(s.window.start, s.window.end, s.score) for s in rs.windows]
    detected = [s for s in spans if s.score > cfg.score_threshold]
    background = [s for s in spans if cfg.soft_floor <= s.score <= cfg.score_threshold]
    refined = refine_boundaries(detected, rs.tokenized, rs.char_scores, cfg.boundary_threshold, cfg.window_size)
    merged = merge_overlapping(refined)
    return finalize(merged + background, cfg, rs.tokenized, rs.record_id, rs.lang)


def detect(
    record: Record, samples: SampleSet, cfg: DetectionConfig, provider: EmbeddingProvider
) -> PredictionSet:
    return predict_from_scores(score_record(record, samples, cfg, provider), cfg)
