"""Completion-endpoint client producing sampled answers, with an on-disk cache."""
from __future__ import annotations

import hashlib
import json
import logging
import os
import tempfile
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

from .datamodel import Provenance, SampleSet, iter_jsonl
from .errors import SamplerError

log = logging.getLogger(__name__)

# parameters an endpoint may refuse; dropped (and recorded) instead of failing
OPTIONAL_PARAMS = ("top_k", "no_repeat_ngram_size")


@dataclass(frozen=True)
class SamplingProfile:
    temperature: float = 0.1
    top_p: float = 0.9
    top_k: int = 50
    max_tokens: int = 64
    n: int = 20
    no_repeat_ngram: int = 3
    model: str = "meta-llama/Llama-3.2-3B-Instruct"
    endpoint: str = ""
    mode: str = "chat"  # "chat" or "completion"
    template: str = "{query}"
    timeout: float = 60.0
    retries: int = 3

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"n must be >= 1, got {self.n}")
        if not self.temperature > 0:
            raise ValueError(f"temperature must be > 0, got {self.temperature}")
        if not 0 < self.top_p <= 1:
            raise ValueError(f"top_p must lie in (0, 1], got {self.top_p}")
        if self.mode not in ("chat", "completion"):
            raise ValueError(f"mode must be 'chat' or 'completion', got {self.mode!r}")

    def decoding_params(self) -> dict:
        return {
            "temperature": self.temperature,
            "top_p": self.top_p,
            "top_k": self.top_k,
            "max_tokens": self.max_tokens,
            "n": self.n,
            "no_repeat_ngram_size": self.no_repeat_ngram,
        }

    def fingerprint(self) -> str:
        """Hash of everything that changes what the endpoint would return."""
        key = {
            "model": self.model,
            "mode": self.mode,
            "template": self.template,
            **self.decoding_params(),
        }
        return hashlib.sha256(json.dumps(key, sort_keys=True).encode()).hexdigest()

    @classmethod
    def from_env(cls, **overrides) -> "SamplingProfile":
        env = {}
        if os.environ.get("HALLUSPAN_COMPLETION_URL"):
            env["endpoint"] = os.environ["HALLUSPAN_COMPLETION_URL"]
        if os.environ.get("HALLUSPAN_COMPLETION_MODEL"):
            env["model"] = os.environ["HALLUSPAN_COMPLETION_MODEL"]
        if os.environ.get("HALLUSPAN_COMPLETION_MODE"):
            env["mode"] = os.environ["HALLUSPAN_COMPLETION_MODE"]
        env.update(overrides)
        return cls(**env)


def query_hash(query: str) -> str:
    return hashlib.sha256(query.encode("utf-8")).hexdigest()


class SampleCache:
    """One JSONL file per (query, profile) pair, written atomically."""

    def __init__(self, directory):
        self.dir = Path(directory)

    def path(self, query: str, profile: SamplingProfile) -> Path:
        return self.dir / f"{query_hash(query)[:32]}-{profile.fingerprint()[:16]}.jsonl"

    def get(self, query: str, profile: SamplingProfile) -> SampleSet | None:
        p = self.path(query, profile)
        if not p.exists():
            return None
        with open(p, encoding="utf-8") as fh:
            entry = json.loads(fh.readline())
        if entry.get("query_sha256") != query_hash(query) or entry.get("fingerprint") != profile.fingerprint():
            return None
        return SampleSet(tuple(entry["samples"]), Provenance.from_dict(entry.get("provenance")))

    def put(self, query: str, profile: SamplingProfile, samples: SampleSet) -> None:
        self.dir.mkdir(parents=True, exist_ok=True)
        entry = {
            "query_sha256": query_hash(query),
            "fingerprint": profile.fingerprint(),
            "samples": list(samples.samples),
            "provenance": samples.provenance.to_dict(),
        }
        fd, tmp = tempfile.mkstemp(dir=self.dir, suffix=".tmp")
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as fh:
                fh.write(json.dumps(entry, ensure_ascii=False) + "\n")
            os.replace(tmp, self.path(query, profile))
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise


class CompletionClient:
    """Thin HTTP client for OpenAI-compatible chat or text completion endpoints."""

    def __init__(
        self,
        profile: SamplingProfile,
        token: str | None = None,
        client=None,
        sleep: Callable[[float], None] = time.sleep,
    ):
        import httpx

        if not profile.endpoint:
            raise SamplerError("no completion endpoint: set HALLUSPAN_COMPLETION_URL")
        self.profile = profile
        self.token = token if token is not None else os.environ.get("HALLUSPAN_COMPLETION_TOKEN")
        self._client = client or httpx.Client(timeout=profile.timeout)
        self._sleep = sleep
        self.calls = 0

    def _payload(self, query: str, params: dict) -> dict:
        prompt = self.profile.template.format(query=query)
        body = {"model": self.profile.model, **params}
        if self.profile.mode == "chat":
            body["messages"] = [{"role": "user", "content": prompt}]
        else:
            body["prompt"] = prompt
        return body

    def _rejected_param(self, resp, params: dict) -> str | None:
        if resp.status_code not in (400, 422):
            return None
        text = resp.text
        for name in OPTIONAL_PARAMS:
            if name in params and name in text:
                return name
        return None

    def complete(self, query: str) -> SampleSet:
        import httpx

        prof = self.profile
        params = prof.decoding_params()
        downgraded: list[str] = []
        headers = {"Authorization": f"Bearer {self.token}"} if self.token else {}
        attempts = 0
        while True:
            self.calls += 1
            try:
                resp = self._client.post(prof.endpoint, json=self._payload(query, params), headers=headers)
            except httpx.HTTPError as exc:
                attempts += 1
                if attempts > prof.retries:
                    raise SamplerError(f"completion request failed after {attempts} attempts: {exc}") from exc
                self._sleep(min(2.0**attempts, 30.0))
                continue
            if resp.status_code in (401, 403):
                raise SamplerError(f"completion endpoint refused credentials ({resp.status_code})")
            rejected = self._rejected_param(resp, params)
            if rejected is not None:
                log.warning("endpoint rejected %s; retrying without it", rejected)
                params.pop(rejected)
                downgraded.append(rejected)
                continue
            if resp.status_code == 429 or resp.status_code >= 500:
                attempts += 1
                if attempts > prof.retries:
                    raise SamplerError(f"completion endpoint returned {resp.status_code} after {attempts} attempts")
                self._sleep(min(2.0**attempts, 30.0))
                continue
            if resp.status_code >= 400:
                raise SamplerError(f"completion endpoint returned {resp.status_code}: {resp.text[:200]}")
            break
        try:
            choices = resp.json()["choices"]
        except (ValueError, KeyError, TypeError) as exc:
            raise SamplerError(f"malformed completion response: {exc}") from exc
        texts: dict[int, str] = {}
        for pos, choice in enumerate(choices):
            idx = choice.get("index", pos)
            content = choice.get("message", {}).get("content") if prof.mode == "chat" else choice.get("text")
            if isinstance(content, str) and 0 <= idx < prof.n:
                texts[idx] = content
        missing = tuple(i for i in range(prof.n) if i not in texts)
        if missing:
            raise SamplerError(
                f"endpoint returned {len(texts)} of {prof.n} completions; missing indices {list(missing)}",
                missing,
            )
        used = {k: v for k, v in sorted(params.items())}
        prov = Provenance(prof.endpoint, prof.model, tuple(used.items()), tuple(downgraded))
        return SampleSet(tuple(texts[i] for i in range(prof.n)), prov)


def generate_samples(
    query: str,
    profile: SamplingProfile,
    cache: SampleCache | None = None,
    client: CompletionClient | None = None,
) -> SampleSet:
    """Samples for ``query``: from the cache when present, else from the endpoint."""
    if cache is not None:
        hit = cache.get(query, profile)
        if hit is not None:
            return hit
    if client is None:
        raise SamplerError("cache miss and no completion client configured (offline mode?)")
    samples = client.complete(query)
    if cache is not None:
        cache.put(query, profile, samples)
    return samples


def load_offline_samples(path) -> dict[str, SampleSet]:
    """Read ``{"id": ..., "samples": [...]}`` lines into a map keyed by record id."""
    out: dict[str, SampleSet] = {}
    for lineno, line in iter_jsonl(path):
        try:
            obj = json.loads(line)
            rid = str(obj["id"])
            samples = obj["samples"]
        except (ValueError, KeyError, TypeError) as exc:
            raise SamplerError(f"{path}:{lineno}: bad sample entry ({exc})") from exc
        if not (isinstance(samples, list) and all(isinstance(s, str) for s in samples)):
            raise SamplerError(f"{path}:{lineno}: 'samples' must be a list of strings")
        if rid in out:
            raise SamplerError(f"{path}:{lineno}: duplicate record id {rid!r}")
        out[rid] = SampleSet(tuple(samples), Provenance.from_dict(obj.get("provenance")))
    return out


def sample_line(record_id: str, samples: SampleSet) -> str:
    return json.dumps(
        {"id": record_id, "samples": list(samples.samples), "provenance": samples.provenance.to_dict()},
        ensure_ascii=False,
    )
