"""Per-language detector defaults and the fallback for untuned languages."""
from __future__ import annotations

from .datamodel import DetectionConfig

# (window_size, stride, score_threshold, min_span_length, boundary_threshold)
_TUNED = {
    "ar": (4, 2, 0.6, 3, 0.3),
    "de": (4, 2, 0.6, 3, 0.3),
    "en": (5, 3, 0.5, 3, 0.3),
    "es": (4, 2, 0.6, 3, 0.3),
    "fi": (4, 3, 0.6, 3, 0.3),
    "fr": (4, 2, 0.6, 3, 0.3),
    "hi": (5, 2, 0.6, 3, 0.3),
    "it": (4, 2, 0.7, 3, 0.3),
    "sv": (4, 2, 0.5, 3, 0.3),
    "zh": (7, 3, 0.6, 3, 0.3),
}

# Languages without validation data borrow from the closest tuned language
# (family first, then script).
NEAREST = {
    "ca": ("es", "fr", "it"),
    "eu": ("es", "fr"),
    "cs": ("de", "fi", "sv"),
    "fa": ("ar", "hi"),
}

FALLBACK = "en"


def table_config(lang: str) -> DetectionConfig | None:
    row = _TUNED.get(lang)
    if row is None:
        return None
    w, t, lam, msl, bt = row
    return DetectionConfig(
        window_size=w, stride=t, score_threshold=lam, min_span_length=msl, boundary_threshold=bt
    )


def tuned_languages() -> tuple[str, ...]:
    return tuple(_TUNED)


def approximate_config(
    lang: str, tuned: dict[str, DetectionConfig] | None = None
) -> tuple[DetectionConfig, str]:
    """Config for ``lang`` plus a provenance note.

    Looks in ``tuned`` first, then the built-in table, then borrows from the
    nearest tuned language.
    """
    tuned = tuned or {}
    if lang in tuned:
        return tuned[lang], f"tuned:{lang}"
    cfg = table_config(lang)
    if cfg is not None:
        return cfg, f"default:{lang}"
    for donor in NEAREST.get(lang, ()) + (FALLBACK,):
        if donor in tuned:
            return tuned[donor], f"approximated from tuned:{donor}"
        cfg = table_config(donor)
        if cfg is not None:
            return cfg, f"approximated from default:{donor}"
    raise AssertionError("fallback language missing from table")
