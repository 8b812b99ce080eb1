"""Tokenization and sliding-window enumeration with exact character offsets."""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Sequence

from .datamodel import SampleSet
from .errors import ConfigError

_WORD = re.compile(r"\S+")
_CHAR = re.compile(r"\S")

# languages tokenized per character instead of per whitespace run
CHARACTER_LANGS = frozenset({"zh", "chinese"})


@dataclass(frozen=True)
class Token:
    text: str
    start: int
    end: int


@dataclass(frozen=True)
class TokenizedText:
    text: str
    tokens: tuple[Token, ...]

    def __len__(self) -> int:
        return len(self.tokens)


@dataclass(frozen=True)
class WindowSpan:
    first_token: int
    token_count: int
    start: int
    end: int
    text: str

    @property
    def token_end(self) -> int:
        return self.first_token + self.token_count


def is_character_lang(lang: str) -> bool:
    lang = (lang or "").lower()
    return lang in CHARACTER_LANGS or lang.startswith("zh-") or lang.startswith("zh_")


def tokenize(text: str, lang: str) -> TokenizedText:
    pattern = _CHAR if is_character_lang(lang) else _WORD
    tokens = tuple(Token(m.group(), m.start(), m.end()) for m in pattern.finditer(text))
    return TokenizedText(text, tokens)


def check_window_params(w: int, t: int) -> None:
    if not (isinstance(w, int) and w >= 1):
        raise ConfigError([f"window_size must be a positive integer, got {w!r}"])
    if not (isinstance(t, int) and 1 <= t <= w):
        raise ConfigError([f"stride must satisfy 1 <= stride <= window_size ({w}), got {t!r}"])


def enumerate_windows(tt: TokenizedText, w: int, t: int) -> list[WindowSpan]:
    """Windows of ``w`` tokens starting every ``t`` tokens; the last may be short."""
    check_window_params(w, t)
    toks = tt.tokens
    n = len(toks)
    out = []
    for first in range(0, n, t):
        last = min(first + w, n)
        start, end = toks[first].start, toks[last - 1].end
        out.append(WindowSpan(first, last - first, start, end, tt.text[start:end]))
    return out


def segment_samples(
    samples: SampleSet | Sequence[str], lang: str, w: int, t: int
) -> list[tuple[int, WindowSpan]]:
    texts = samples.samples if isinstance(samples, SampleSet) else samples
    check_window_params(w, t)
    pool = []
    for idx, text in enumerate(texts):
        for win in enumerate_windows(tokenize(text, lang), w, t):
            pool.append((idx, win))
    return pool
