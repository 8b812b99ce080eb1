"""Exhaustive per-language grid search over detector hyperparameters."""
from __future__ import annotations

import itertools
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

from .datamodel import DetectionConfig, Record, SampleSet, iter_jsonl, validate_config
from .errors import ConfigError, TuningError
from .evaluator import EvalReport, evaluate
from .pipeline import SCORING_FIELDS, RecordScores, predict_from_scores, score_record
from .scorer import EmbeddingProvider


@dataclass(frozen=True)
class GridSpec:
    window_sizes: tuple[int, ...] = (3, 4, 5, 6, 7, 8)
    strides: tuple[int, ...] = (1, 2, 3, 4)
    score_thresholds: tuple[float, ...] = (0.4, 0.5, 0.6, 0.7)
    min_span_lengths: tuple[int, ...] = (2, 3, 4)
    boundary_thresholds: tuple[float, ...] = (0.2, 0.3, 0.4)
    # opt-in: (alpha, beta, gamma) triples; empty keeps the base weights
    weights: tuple[tuple[float, float, float], ...] = ()
    objective: str = "iou"  # "iou", "cor" or "mix"
    iou_weight: float = 0.5
    lang: str | None = None
    metric: str = "spearman"

    def configs(self, base: DetectionConfig) -> list[DetectionConfig]:
        """Every valid grid point, in canonical order; invalid (t > w) pairs are skipped."""
        weight_opts = self.weights or ((base.alpha, base.beta, base.gamma),)
        out = []
        for w, t, (a, b, g), lam, msl, bt in itertools.product(
            self.window_sizes,
            self.strides,
            weight_opts,
            self.score_thresholds,
            self.min_span_lengths,
            self.boundary_thresholds,
        ):
            cfg = replace(
                base,
                window_size=w,
                stride=t,
                alpha=a,
                beta=b,
                gamma=g,
                score_threshold=lam,
                min_span_length=msl,
                boundary_threshold=bt,
            )
            try:
                out.append(validate_config(cfg))
            except ConfigError:
                continue
        return out


@dataclass(frozen=True)
class GridResult:
    config: DetectionConfig
    objective: float
    mean_iou: float
    mean_cor: float
    order: int = field(default=0, compare=False)


def objective_value(report: EvalReport, grid: GridSpec) -> tuple[float, float, float]:
    rows = report.records
    ious = [r.iou for r in rows]
    cors = [r.cor for r in rows if r.cor is not None]
    mean_iou = sum(ious) / len(ious) if ious else 0.0
    mean_cor = sum(cors) / len(cors) if cors else 0.0
    if grid.objective == "iou":
        obj = mean_iou
    elif grid.objective == "cor":
        obj = mean_cor
    elif grid.objective == "mix":
        obj = grid.iou_weight * mean_iou + (1.0 - grid.iou_weight) * mean_cor
    else:
        raise TuningError(f"unknown objective {grid.objective!r}")
    return obj, mean_iou, mean_cor


def _rank_key(r: GridResult):
    c = r.config
    return (-r.objective, c.window_size, c.stride, -c.score_threshold, r.order)


def grid_search(
    records: Sequence[Record],
    samples: dict[str, SampleSet],
    grid: GridSpec,
    provider: EmbeddingProvider,
    base: DetectionConfig | None = None,
    jobs: int = 1,
) -> list[GridResult]:
    """Evaluate every grid point and return results best first.

    Ties go to smaller window, smaller stride, then larger threshold.
    Window scoring is computed once per distinct scoring configuration and
    shared by grid points that differ only in the span-stage parameters.
    """
    base = base or DetectionConfig()
    if grid.lang is not None:
        records = [r for r in records if r.lang == grid.lang]
    if not records:
        raise TuningError("no records to tune on")
    unlabeled = [r.id for r in records if not r.labeled]
    if unlabeled:
        raise TuningError(f"records lack gold labels: {unlabeled}")
    missing = [r.id for r in records if r.id not in samples]
    if missing:
        raise TuningError(f"records lack samples: {missing}")
    configs = grid.configs(base)
    if not configs:
        raise TuningError("grid has no valid configuration")

    def scoring_key(cfg):
        return tuple(getattr(cfg, f) for f in SCORING_FIELDS)

    distinct = list(dict.fromkeys(scoring_key(c) for c in configs))
    first_cfg = {}
    for c in configs:
        first_cfg.setdefault(scoring_key(c), c)

    def score_all(key) -> list[RecordScores]:
        cfg = first_cfg[key]
        return [score_record(r, samples[r.id], cfg, provider) for r in records]

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            scored = dict(zip(distinct, pool.map(score_all, distinct)))
    else:
        scored = {key: score_all(key) for key in distinct}

    def run(item):
        order, cfg = item
        preds = [predict_from_scores(rs, cfg) for rs in scored[scoring_key(cfg)]]
        obj, iou, cor = objective_value(evaluate(preds, records, grid.metric), grid)
        return GridResult(cfg, obj, iou, cor, order)

    items = list(enumerate(configs))
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(run, items))
    else:
        results = [run(it) for it in items]
    return sorted(results, key=_rank_key)


def config_line(lang: str, cfg: DetectionConfig, note: str = "", objective: float | None = None) -> str:
    obj = {"lang": lang, **cfg.to_dict()}
    if note:
        obj["note"] = note
    if objective is not None:
        obj["objective"] = objective
    return json.dumps(obj, ensure_ascii=False)


def load_config_file(path) -> dict[str, DetectionConfig]:
    """Read per-language configs written by the tuner (or by hand)."""
    out = {}
    for lineno, line in iter_jsonl(path):
        obj = json.loads(line)
        lang = obj.pop("lang", None)
        if lang is None:
            raise ConfigError([f"{path}:{lineno}: config line has no 'lang'"])
        obj.pop("note", None)
        obj.pop("objective", None)
        out[lang] = validate_config(DetectionConfig.from_dict(obj))
    return out


def render_leaderboard(best: dict[str, GridResult | tuple[DetectionConfig, str]]) -> str:
    """Table of chosen hyperparameters per language."""
    lines = [f"{'Language':<10} {'w':>3} {'t':>3} {'lambda':>7} {'MSL':>4} {'BT':>5}  note"]
    for lang in sorted(best):
        item = best[lang]
        if isinstance(item, GridResult):
            cfg, note = item.config, f"objective={item.objective:.4f}"
        else:
            cfg, note = item
        lines.append(
            f"{lang:<10} {cfg.window_size:>3} {cfg.stride:>3} {cfg.score_threshold:>7.2f} "
            f"{cfg.min_span_length:>4} {cfg.boundary_threshold:>5.2f}  {note}"
        )
    return "\n".join(lines) + "\n"
