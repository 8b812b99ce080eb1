"""Character-level IoU and probability correlation, plus trivial baselines."""
from __future__ import annotations

import json
import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy import stats

from .datamodel import PredictionSet, Record, Span, SoftSpan
from .errors import MetricError


def _check(spans: Iterable[Sequence], length: int, record_id) -> None:
    for span in spans:
        start, end = span[0], span[1]
        if not 0 <= start <= end <= length:
            raise MetricError(record_id, f"span ({start}, {end}) outside text of length {length}")


def char_set(spans: Iterable[Span]) -> set[int]:
    out: set[int] = set()
    for start, end in spans:
        out.update(range(start, end))
    return out


def char_iou(pred: Sequence[Span], gold: Sequence[Span], length: int, record_id=None) -> float:
    """``|P & G| / |P | G|`` over covered character indices; 1.0 when both are empty."""
    _check(pred, length, record_id)
    _check(gold, length, record_id)
    p, g = char_set(pred), char_set(gold)
    union = len(p | g)
    if union == 0:
        return 1.0
    return len(p & g) / union


def char_probs(spans: Sequence[SoftSpan], length: int) -> np.ndarray:
    """Per-character probability: max over covering spans, 0 where uncovered."""
    vec = np.zeros(length)
    for start, end, prob in spans:
        if end > start:
            vec[start:end] = np.maximum(vec[start:end], prob)
    return vec


def char_correlation(
    pred: Sequence[SoftSpan],
    gold: Sequence[SoftSpan],
    length: int,
    method: str = "spearman",
    record_id=None,
) -> float | None:
    """Correlation of per-character probabilities, or ``None`` if either is constant."""
    _check(pred, length, record_id)
    _check(gold, length, record_id)
    p_hat, p = char_probs(pred, length), char_probs(gold, length)
    if length < 2 or np.ptp(p_hat) == 0 or np.ptp(p) == 0:
        return None
    if method == "spearman":
        rho = stats.spearmanr(p_hat, p).statistic
    elif method == "pearson":
        rho = stats.pearsonr(p_hat, p).statistic
    else:
        raise ValueError(f"unknown correlation method {method!r}")
    rho = float(rho)
    if not math.isfinite(rho):
        return None
    return max(-1.0, min(1.0, rho))


def baseline_mark_all(record: Record) -> PredictionSet:
    L = len(record.model_output_text)
    if L == 0:
        return PredictionSet(record.id, lang=record.lang)
    return PredictionSet(record.id, ((0, L),), ((0, L, 1.0),), record.lang)


def baseline_mark_none(record: Record) -> PredictionSet:
    return PredictionSet(record.id, lang=record.lang)


@dataclass(frozen=True)
class RecordScore:
    record_id: str | None
    lang: str
    iou: float
    cor: float | None

    @property
    def flags(self) -> list[str]:
        return ["cor_undefined"] if self.cor is None else []

    def to_json(self) -> str:
        return json.dumps(
            {
                "id": self.record_id,
                "lang": self.lang,
                "iou": self.iou,
                "cor": 0.0 if self.cor is None else self.cor,
                "flags": self.flags,
            },
            ensure_ascii=False,
        )


@dataclass(frozen=True)
class LanguageSummary:
    lang: str
    records: int
    mean_iou: float
    mean_cor: float
    cor_defined: int


@dataclass
class EvalReport:
    records: list[RecordScore] = field(default_factory=list)

    def by_language(self) -> dict[str, LanguageSummary]:
        grouped: dict[str, list[RecordScore]] = defaultdict(list)
        for r in self.records:
            grouped[r.lang].append(r)
        out = {}
        for lang in sorted(grouped):
            rows = grouped[lang]
            cors = [r.cor for r in rows if r.cor is not None]
            out[lang] = LanguageSummary(
                lang,
                len(rows),
                float(np.mean([r.iou for r in rows])),
                float(np.mean(cors)) if cors else 0.0,
                len(cors),
            )
        return out


def evaluate(
    preds: Sequence[PredictionSet], gold: Sequence[Record], method: str = "spearman"
) -> EvalReport:
    """Score aligned predictions against gold, in gold order.

    Raises :class:`MetricError` listing orphan ids on either side.
    """
    by_id = {p.record_id: p for p in preds}
    gold_ids = [g.id for g in gold]
    missing = [i for i in gold_ids if i not in by_id]
    extra = sorted(set(by_id) - set(gold_ids), key=str)
    if missing or extra:
        raise MetricError(
            None,
            f"id mismatch; missing predictions for {missing}, predictions without gold {extra}",
        )
    report = EvalReport()
    for rec in gold:
        p = by_id[rec.id]
        L = len(rec.model_output_text)
        report.records.append(
            RecordScore(
                rec.id,
                rec.lang,
                char_iou(p.hard_spans, rec.hard_labels, L, rec.id),
                char_correlation(p.soft_spans, rec.soft_labels, L, method, rec.id),
            )
        )
    return report


def render_summary(systems: dict[str, EvalReport]) -> str:
    """Plain-text table: one row per system, IoU and Cor columns per language."""
    langs = sorted({lang for rep in systems.values() for lang in rep.by_language()})
    name_w = max([len("System")] + [len(n) for n in systems])
    head1 = "Language".ljust(name_w) + "".join(f" | {lang:^15}" for lang in langs)
    head2 = "System".ljust(name_w) + "".join(f" | {'IoU':>7} {'Cor':>7}" for _ in langs)
    lines = [head1, head2, "-" * len(head2)]
    for name, rep in systems.items():
        summ = rep.by_language()
        cells = []
        for lang in langs:
            s = summ.get(lang)
            cells.append(f" | {s.mean_iou:7.4f} {s.mean_cor:7.4f}" if s else f" | {'-':>7} {'-':>7}")
        lines.append(name.ljust(name_w) + "".join(cells))
    return "\n".join(lines) + "\n"
