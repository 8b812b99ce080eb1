"""Command-line entry point: ``halluspan {sample,detect,evaluate,tune}``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

from . import __version__
from .datamodel import (
    DetectionConfig,
    Record,
    SampleSet,
    load_predictions,
    load_records,
    serialize_prediction,
    validate_config,
    write_lines,
)
from .errors import (
    ConfigError,
    HalluspanError,
    MetricError,
    MissingSamplesError,
    ProviderError,
    RecordParseError,
    SamplerError,
    ScoringError,
    SpanValidationError,
    TuningError,
)
from .evaluator import baseline_mark_all, baseline_mark_none, evaluate, render_summary
from .languages import approximate_config
from .pipeline import detect
from .sampler import CompletionClient, SampleCache, SamplingProfile, generate_samples, load_offline_samples, sample_line
from .tuner import GridSpec, config_line, grid_search, load_config_file, render_leaderboard

log = logging.getLogger("halluspan")

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2
EXIT_BAD_INPUT = 3
EXIT_NO_SAMPLES = 4
EXIT_PROVIDER = 5
EXIT_ID_MISMATCH = 6
EXIT_SAMPLER = 7

UNTUNED_LANGS = ("ca", "cs", "eu", "fa")


class UsageError(Exception):
    pass


@dataclass(frozen=True)
class RunManifest:
    input: Path
    output: Path | None = None
    config: Path | None = None
    overrides: tuple[tuple[str, object], ...] = ()
    lang: str | None = None
    provider: str = "stub"
    samples: Path | None = None
    offline: bool = False
    cache_dir: Path | None = None
    jobs: int = 1

    def check(self) -> None:
        if self.offline and self.samples is None:
            raise UsageError("--offline needs --samples")
        if self.jobs < 1:
            raise UsageError("--jobs must be >= 1")

    @classmethod
    def from_args(cls, args) -> "RunManifest":
        return cls(
            input=Path(args.input),
            output=Path(args.output) if getattr(args, "output", None) else None,
            config=Path(args.config) if getattr(args, "config", None) else None,
            overrides=tuple(_parse_overrides(getattr(args, "set", None) or [])),
            lang=getattr(args, "lang", None),
            provider=getattr(args, "provider", "stub"),
            samples=Path(args.samples) if getattr(args, "samples", None) else None,
            offline=getattr(args, "offline", False),
            cache_dir=Path(args.cache_dir) if getattr(args, "cache_dir", None) else None,
            jobs=getattr(args, "jobs", 1),
        )


def _parse_overrides(items):
    for item in items:
        key, sep, raw = item.partition("=")
        if not sep:
            raise UsageError(f"--set expects key=value, got {item!r}")
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        yield key.strip(), value


def _make_provider(kind: str):
    from .scorer import RemoteEmbeddingProvider, StubEmbeddingProvider

    if kind == "stub":
        return StubEmbeddingProvider()
    return RemoteEmbeddingProvider()


def _configs_for(langs, manifest: RunManifest) -> dict[str, tuple[DetectionConfig, str]]:
    tuned = load_config_file(manifest.config) if manifest.config else {}
    out = {}
    for lang in sorted(set(langs)):
        cfg, note = approximate_config(lang, tuned)
        if manifest.overrides:
            try:
                cfg = replace(cfg, **dict(manifest.overrides))
            except TypeError as exc:
                raise ConfigError([str(exc)]) from exc
        out[lang] = (validate_config(cfg), note)
    return out


def _sampling_profile(args) -> SamplingProfile:
    overrides = {}
    for name in ("n", "model", "endpoint", "mode", "template"):
        value = getattr(args, name, None)
        if value is not None:
            overrides[name] = value
    return SamplingProfile.from_env(**overrides)


def _resolve_samples(records: list[Record], manifest: RunManifest, args) -> dict[str, SampleSet]:
    found: dict[str, SampleSet] = {}
    offline = load_offline_samples(manifest.samples) if manifest.samples else {}
    pending = []
    for rec in records:
        if rec.id in offline:
            found[rec.id] = offline[rec.id]
        elif rec.sample_texts is not None:
            found[rec.id] = SampleSet(tuple(rec.sample_texts))
        else:
            pending.append(rec)
    if pending and manifest.samples is None:
        profile = _sampling_profile(args)
        cache = SampleCache(manifest.cache_dir) if manifest.cache_dir else None
        try:
            client = CompletionClient(profile)
        except SamplerError:
            client = None  # cache-only; misses are reported per record below
        still = []
        for rec in pending:
            try:
                found[rec.id] = generate_samples(rec.model_input, profile, cache, client)
            except SamplerError:
                still.append(rec)
        pending = still
    if pending:
        raise MissingSamplesError([r.id for r in pending])
    return found


def _select(records, lang):
    return [r for r in records if lang is None or r.lang == lang]


def cmd_detect(args) -> int:
    manifest = RunManifest.from_args(args)
    manifest.check()
    if manifest.output is None:
        raise UsageError("detect needs --output")
    records = _select(load_records(manifest.input), manifest.lang)
    configs = _configs_for([r.lang for r in records], manifest)
    samples = _resolve_samples(records, manifest, args)
    provider = _make_provider(manifest.provider)

    def run(rec):
        try:
            return detect(rec, samples[rec.id], configs[rec.lang][0], provider), None
        except (ScoringError, ProviderError) as exc:
            return None, exc

    if manifest.jobs > 1:
        with ThreadPoolExecutor(max_workers=manifest.jobs) as pool:
            results = list(pool.map(run, records))
    else:
        results = [run(r) for r in records]
    failures = [(rec.id, err) for rec, (_, err) in zip(records, results) if err is not None]
    if failures:
        for rid, err in failures:
            print(f"error: record {rid}: {err}", file=sys.stderr)
        return EXIT_PROVIDER
    write_lines(manifest.output, (serialize_prediction(p) for p, _ in results))
    log.info("wrote %d predictions to %s", len(results), manifest.output)
    return EXIT_OK


def cmd_sample(args) -> int:
    manifest = RunManifest.from_args(args)
    if manifest.offline and manifest.cache_dir is None:
        raise UsageError("sample --offline needs --cache-dir")
    if manifest.output is None:
        raise UsageError("sample needs --output")
    records = _select(load_records(manifest.input), manifest.lang)
    profile = _sampling_profile(args)
    cache = SampleCache(manifest.cache_dir) if manifest.cache_dir else None
    client = None
    if not manifest.offline:
        # the client is created lazily so a fully warm cache needs no endpoint
        misses = [r for r in records if cache is None or cache.get(r.model_input, profile) is None]
        if misses:
            client = CompletionClient(profile)

    def run(rec):
        try:
            return generate_samples(rec.model_input, profile, cache, client), None
        except SamplerError as exc:
            return None, exc

    with ThreadPoolExecutor(max_workers=manifest.jobs) as pool:
        results = list(pool.map(run, records))
    failures = [(rec.id, err) for rec, (_, err) in zip(records, results) if err is not None]
    if failures:
        for rid, err in failures:
            print(f"error: record {rid}: {err}", file=sys.stderr)
        return EXIT_SAMPLER
    write_lines(manifest.output, (sample_line(rec.id, s) for rec, (s, _) in zip(records, results)))
    return EXIT_OK


def cmd_evaluate(args) -> int:
    preds = load_predictions(args.input)
    gold = _select(load_records(args.gold), args.lang)
    if args.lang is not None:
        wanted = {g.id for g in gold}
        preds = [p for p in preds if p.record_id in wanted]
    systems = {
        "Submission": evaluate(preds, gold, args.metric),
        "Baseline (mark none)": evaluate([baseline_mark_none(g) for g in gold], gold, args.metric),
        "Baseline (mark all)": evaluate([baseline_mark_all(g) for g in gold], gold, args.metric),
    }
    table = render_summary(systems)
    if args.output:
        out = Path(args.output)
        lines = []
        for name, rep in systems.items():
            for row in rep.records:
                obj = json.loads(row.to_json())
                lines.append(json.dumps({"system": name, **obj}, ensure_ascii=False))
        write_lines(out, lines)
        out.with_suffix(".summary.txt").write_text(table, encoding="utf-8")
    sys.stdout.write(table)
    return EXIT_OK


def cmd_tune(args) -> int:
    manifest = RunManifest.from_args(args)
    if manifest.samples is None:
        raise UsageError("tune needs --samples")
    if manifest.output is None:
        raise UsageError("tune needs --output")
    records = _select(load_records(manifest.input), manifest.lang)
    samples = load_offline_samples(manifest.samples)
    provider = _make_provider(manifest.provider)
    base = DetectionConfig(**dict(manifest.overrides)) if manifest.overrides else DetectionConfig()
    weights = tuple(tuple(float(x) for x in w.split(",")) for w in (args.weights or ()))
    if any(len(w) != 3 for w in weights):
        raise UsageError("--weights expects alpha,beta,gamma triples")
    best: dict[str, object] = {}
    lines = []
    for lang in sorted({r.lang for r in records}):
        grid = GridSpec(
            window_sizes=tuple(args.window_sizes),
            strides=tuple(args.strides),
            score_thresholds=tuple(args.thresholds),
            min_span_lengths=tuple(args.min_span_lengths),
            boundary_thresholds=tuple(args.boundary_thresholds),
            weights=weights if args.tune_weights else (),
            objective=args.objective,
            lang=lang,
            metric=args.metric,
        )
        ranked = grid_search(records, samples, grid, provider, base=base, jobs=manifest.jobs)
        best[lang] = ranked[0]
        lines.append(config_line(lang, ranked[0].config, f"tuned:{lang}", ranked[0].objective))
    tuned = {lang: r.config for lang, r in best.items()}
    for lang in args.approximate:
        if lang in tuned:
            continue
        cfg, note = approximate_config(lang, tuned)
        best[lang] = (cfg, note)
        lines.append(config_line(lang, cfg, note))
    write_lines(manifest.output, lines)
    sys.stdout.write(render_leaderboard(best))
    return EXIT_OK


def _add_common(p, *, output=True, samples=True, provider=True):
    p.add_argument("--input", required=True, help="input records (JSONL)")
    if output:
        p.add_argument("--output", help="output path")
    p.add_argument("--lang", help="only process records in this language")
    p.add_argument("--jobs", type=int, default=1, help="parallel workers (output order is fixed)")
    if samples:
        p.add_argument("--samples", help="offline samples file (JSONL of id + samples)")
        p.add_argument("--offline", action="store_true", help="never touch the network")
        p.add_argument("--cache-dir", help="sample cache directory")
    if provider:
        p.add_argument("--provider", choices=("remote", "stub"), default="stub")
    p.add_argument("--metric", choices=("spearman", "pearson"), default="spearman")


def _add_sampling(p):
    p.add_argument("--n", type=int, help="samples per query (default 20)")
    p.add_argument("--model", help="model id sent to the completion endpoint")
    p.add_argument("--endpoint", help="completion endpoint URL")
    p.add_argument("--mode", choices=("chat", "completion"))
    p.add_argument("--template", help="prompt template containing {query}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="halluspan", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample", help="draw sampled answers for each record")
    _add_common(p, provider=False)
    _add_sampling(p)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("detect", help="predict hallucination spans")
    _add_common(p)
    _add_sampling(p)
    p.add_argument("--config", help="per-language config file (JSONL)")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config field")
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("evaluate", help="score predictions against gold labels")
    _add_common(p, samples=False, provider=False)
    p.add_argument("--gold", required=True, help="gold records (JSONL)")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("tune", help="grid-search detector settings per language")
    _add_common(p)
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a base config field")
    p.add_argument("--window-sizes", type=int, nargs="+", default=[3, 4, 5, 6, 7, 8])
    p.add_argument("--strides", type=int, nargs="+", default=[1, 2, 3, 4])
    p.add_argument("--thresholds", type=float, nargs="+", default=[0.4, 0.5, 0.6, 0.7])
    p.add_argument("--min-span-lengths", type=int, nargs="+", default=[2, 3, 4])
    p.add_argument("--boundary-thresholds", type=float, nargs="+", default=[0.2, 0.3, 0.4])
    p.add_argument("--objective", choices=("iou", "cor", "mix"), default="iou")
    p.add_argument("--tune-weights", action="store_true", help="also search alpha,beta,gamma")
    p.add_argument("--weights", action="append", metavar="A,B,G", help="weight triple for --tune-weights")
    p.add_argument(
        "--approximate",
        nargs="*",
        default=list(UNTUNED_LANGS),
        metavar="LANG",
        help="languages without validation data that borrow the nearest tuned config",
    )
    p.set_defaults(func=cmd_tune)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (RecordParseError, SpanValidationError) as exc:
        print(f"malformed input: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT
    except MissingSamplesError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NO_SAMPLES
    except MetricError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ID_MISMATCH
    except ProviderError as exc:
        print(f"provider error: {exc}", file=sys.stderr)
        return EXIT_PROVIDER
    except SamplerError as exc:
        print(f"sampler error: {exc}", file=sys.stderr)
        return EXIT_SAMPLER
    except (TuningError, HalluspanError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILED
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT
