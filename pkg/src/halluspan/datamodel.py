"""Shared domain types and the line-delimited JSON record format.

Character offsets everywhere are Python string indices, i.e. Unicode code
points, start-inclusive and end-exclusive.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, fields, replace
from typing import Any, Iterable, Iterator

from .errors import ConfigError, RecordParseError, SpanValidationError

Span = tuple[int, int]
SoftSpan = tuple[int, int, float]


@dataclass(frozen=True)
class Record:
    lang: str
    model_output_text: str
    model_input: str = ""
    hard_labels: tuple[Span, ...] = ()
    soft_labels: tuple[SoftSpan, ...] = ()
    sample_texts: tuple[str, ...] | None = None
    id: str | None = None
    # False when the source line carried no label fields at all (test split)
    labeled: bool = True

    def __post_init__(self):
        validate_spans(self.hard_labels, len(self.model_output_text), "hard_labels")
        validate_soft_spans(self.soft_labels, len(self.model_output_text), "soft_labels")


@dataclass(frozen=True)
class DetectionConfig:
    """Every tunable knob of the detector.

    Window size, stride and minimum span length count tokens (whitespace
    tokens, or characters for Chinese).
    """

    window_size: int = 4
    stride: int = 2
    similarity_threshold: float = 0.4
    alpha: float = 0.4
    beta: float = 0.4
    gamma: float = 0.2
    score_threshold: float = 0.6
    min_span_length: int = 3
    boundary_threshold: float = 0.3
    sample_count: int = 20
    match_cap: int = 1
    soft_floor: float = 0.1

    def to_dict(self) -> dict[str, Any]:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "DetectionConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError([f"unknown config field(s): {', '.join(unknown)}"])
        return cls(**data)

    def with_overrides(self, **changes: Any) -> "DetectionConfig":
        return replace(self, **changes)


@dataclass(frozen=True)
class Provenance:
    endpoint: str = ""
    model: str = ""
    params: tuple[tuple[str, Any], ...] = ()
    downgraded: tuple[str, ...] = ()

    def to_dict(self) -> dict[str, Any]:
        return {
            "endpoint": self.endpoint,
            "model": self.model,
            "params": dict(self.params),
            "downgraded": list(self.downgraded),
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any] | None) -> "Provenance":
        data = data or {}
        return cls(
            endpoint=data.get("endpoint", ""),
            model=data.get("model", ""),
            params=tuple(sorted((data.get("params") or {}).items())),
            downgraded=tuple(data.get("downgraded") or ()),
        )


@dataclass(frozen=True)
class SampleSet:
    samples: tuple[str, ...]
    provenance: Provenance = field(default_factory=Provenance)

    def __len__(self) -> int:
        return len(self.samples)


@dataclass(frozen=True)
class PredictionSet:
    record_id: str | None
    hard_spans: tuple[Span, ...] = ()
    soft_spans: tuple[SoftSpan, ...] = ()
    lang: str | None = None

    def __post_init__(self):
        for name, spans in (("hard_spans", self.hard_spans), ("soft_spans", self.soft_spans)):
            prev_end = -1
            for idx, span in enumerate(spans):
                start, end = span[0], span[1]
                if not 0 <= start < end:
                    raise SpanValidationError(name, idx, f"invalid span ({start}, {end})")
                if start < prev_end:
                    raise SpanValidationError(name, idx, "spans overlap or are not sorted by start")
                prev_end = end
        for idx, (_, _, prob) in enumerate(self.soft_spans):
            if not 0.0 <= prob <= 1.0:
                raise SpanValidationError("soft_spans", idx, f"probability {prob} outside [0, 1]")
        for idx, (start, end) in enumerate(self.hard_spans):
            if not _covered(start, end, self.soft_spans):
                raise SpanValidationError("hard_spans", idx, "hard span not covered by soft spans")


def _covered(start: int, end: int, soft: Iterable[SoftSpan]) -> bool:
    pos = start
    for s, e, _ in soft:
        if s > pos:
            break
        if e > pos:
            pos = e
        if pos >= end:
            return True
    return pos >= end


def validate_spans(spans: Iterable[Span], length: int, name: str) -> None:
    for idx, (start, end) in enumerate(spans):
        if not 0 <= start < end <= length:
            raise SpanValidationError(
                name, idx, f"span ({start}, {end}) violates 0 <= start < end <= {length}"
            )


def validate_soft_spans(spans: Iterable[SoftSpan], length: int, name: str) -> None:
    spans = list(spans)
    validate_spans([(s, e) for s, e, _ in spans], length, name)
    for idx, (_, _, prob) in enumerate(spans):
        if not (isinstance(prob, (int, float)) and 0.0 <= prob <= 1.0):
            raise SpanValidationError(name, idx, f"probability {prob!r} outside [0, 1]")


def _byte_offset(text: str, char_pos: int) -> int:
    return len(text[:char_pos].encode("utf-8"))


def _loads(line: str | bytes) -> dict[str, Any]:
    if isinstance(line, bytes):
        try:
            line = line.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise RecordParseError(f"invalid UTF-8: {exc.reason}", exc.start) from exc
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise RecordParseError(exc.msg, _byte_offset(line, exc.pos)) from exc
    if not isinstance(obj, dict):
        raise RecordParseError("expected a JSON object", 0)
    return obj


def _pairs(raw: Any, name: str) -> tuple[Span, ...]:
    out = []
    for idx, item in enumerate(raw or ()):
        if not (isinstance(item, (list, tuple)) and len(item) == 2):
            raise SpanValidationError(name, idx, f"expected [start, end], got {item!r}")
        start, end = item
        if not (isinstance(start, int) and isinstance(end, int)):
            raise SpanValidationError(name, idx, "offsets must be integers")
        out.append((start, end))
    return tuple(out)


def _soft(raw: Any, name: str) -> tuple[SoftSpan, ...]:
    out = []
    for idx, item in enumerate(raw or ()):
        try:
            start, end, prob = item["start"], item["end"], item["prob"]
        except (TypeError, KeyError) as exc:
            raise SpanValidationError(name, idx, f"expected start/end/prob object, got {item!r}") from exc
        if not (isinstance(start, int) and isinstance(end, int)):
            raise SpanValidationError(name, idx, "offsets must be integers")
        out.append((start, end, float(prob)))
    return tuple(out)


def parse_record(line: str | bytes) -> Record:
    """Parse one JSON line into a :class:`Record`.

    Missing label fields become empty tuples so test-split records (no gold)
    flow through the same code as validation records.
    """
    obj = _loads(line)
    for key in ("lang", "model_output_text"):
        if not isinstance(obj.get(key), str):
            raise RecordParseError(f"missing or non-string field {key!r}", 0)
    samples = obj.get("sample_texts")
    rid = obj.get("id")
    return Record(
        lang=obj["lang"],
        model_output_text=obj["model_output_text"],
        model_input=obj.get("model_input") or "",
        hard_labels=_pairs(obj.get("hard_labels"), "hard_labels"),
        soft_labels=_soft(obj.get("soft_labels"), "soft_labels"),
        sample_texts=tuple(samples) if samples is not None else None,
        id=str(rid) if rid is not None else None,
        labeled="hard_labels" in obj or "soft_labels" in obj,
    )


def _dumps(obj: dict[str, Any]) -> str:
    return json.dumps(obj, ensure_ascii=False)


def serialize_record(record: Record) -> str:
    obj: dict[str, Any] = {}
    if record.id is not None:
        obj["id"] = record.id
    obj["lang"] = record.lang
    obj["model_input"] = record.model_input
    obj["model_output_text"] = record.model_output_text
    if record.labeled:
        obj["hard_labels"] = [list(s) for s in record.hard_labels]
        obj["soft_labels"] = [{"start": s, "end": e, "prob": p} for s, e, p in record.soft_labels]
    if record.sample_texts is not None:
        obj["sample_texts"] = list(record.sample_texts)
    return _dumps(obj)


def serialize_prediction(pred: PredictionSet) -> str:
    obj: dict[str, Any] = {"id": pred.record_id}
    if pred.lang is not None:
        obj["lang"] = pred.lang
    obj["hard_labels"] = [[s, e] for s, e in pred.hard_spans]
    obj["soft_labels"] = [{"start": s, "end": e, "prob": p} for s, e, p in pred.soft_spans]
    return _dumps(obj)


def parse_prediction(line: str | bytes) -> PredictionSet:
    obj = _loads(line)
    rid = obj.get("id")
    return PredictionSet(
        record_id=str(rid) if rid is not None else None,
        hard_spans=_pairs(obj.get("hard_labels"), "hard_labels"),
        soft_spans=_soft(obj.get("soft_labels"), "soft_labels"),
        lang=obj.get("lang"),
    )


def validate_config(cfg: DetectionConfig) -> DetectionConfig:
    """Return ``cfg`` unchanged, or raise :class:`ConfigError` listing every violation."""
    problems = []

    def positive_int(name):
        value = getattr(cfg, name)
        if not (isinstance(value, int) and not isinstance(value, bool) and value >= 1):
            problems.append(f"{name} must be a positive integer, got {value!r}")
            return False
        return True

    def unit(name):
        value = getattr(cfg, name)
        if not (isinstance(value, (int, float)) and 0.0 <= value <= 1.0):
            problems.append(f"{name} must lie in [0, 1], got {value!r}")

    ok_w = positive_int("window_size")
    ok_t = positive_int("stride")
    positive_int("min_span_length")
    positive_int("sample_count")
    positive_int("match_cap")
    for name in ("similarity_threshold", "score_threshold", "boundary_threshold", "soft_floor"):
        unit(name)
    weights_ok = True
    for name in ("alpha", "beta", "gamma"):
        value = getattr(cfg, name)
        if not (isinstance(value, (int, float)) and value >= 0.0 and math.isfinite(value)):
            problems.append(f"{name} must be a non-negative number, got {value!r}")
            weights_ok = False
    if ok_w and ok_t and cfg.stride > cfg.window_size:
        problems.append(f"stride ({cfg.stride}) must not exceed window_size ({cfg.window_size})")
    if weights_ok:
        total = cfg.alpha + cfg.beta + cfg.gamma
        if abs(total - 1.0) > 1e-9:
            problems.append(f"alpha + beta + gamma must equal 1, got {total!r}")
    if problems:
        raise ConfigError(problems)
    return cfg


def iter_jsonl(path) -> Iterator[tuple[int, str]]:
    """Yield ``(line number, line)`` for non-blank lines of a UTF-8 JSONL file."""
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if line.strip():
                yield lineno, line


def load_records(path) -> list[Record]:
    """Read a record file; records without an ``id`` get ``line-<n>``."""
    records = []
    for lineno, line in iter_jsonl(path):
        try:
            rec = parse_record(line)
        except RecordParseError as exc:
            raise RecordParseError(f"{path}:{lineno}: {exc.message}", exc.byte_offset) from exc
        except SpanValidationError as exc:
            raise SpanValidationError(exc.field, exc.index, f"{path}:{lineno}: {exc.detail}") from exc
        if rec.id is None:
            rec = replace(rec, id=f"line-{lineno}")
        records.append(rec)
    return records


def load_predictions(path) -> list[PredictionSet]:
    preds = []
    for lineno, line in iter_jsonl(path):
        pred = parse_prediction(line)
        if pred.record_id is None:
            pred = replace(pred, record_id=f"line-{lineno}")
        preds.append(pred)
    return preds


def write_lines(path, lines: Iterable[str]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for line in lines:
            fh.write(line)
            fh.write("\n")
