"""Backend selection for the string-matching kernels.

The compiled extension is preferred; set ``HALLUSPAN_PURE_PYTHON=1`` to force
the pure-Python implementation.
"""
from __future__ import annotations

import os

from . import _pykernels

if os.environ.get("HALLUSPAN_PURE_PYTHON", "") not in ("", "0"):
    _impl = _pykernels
    BACKEND = "python"
else:
    try:
        from . import _speedups as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:
        _impl = _pykernels
        BACKEND = "python"

matched_size = _impl.matched_size
matched_sizes = _impl.matched_sizes
ratio = _impl.ratio
ratios = _impl.ratios


def available_backends() -> dict[str, object]:
    """Map of backend name to kernel module, for benchmarking and parity tests."""
    backends: dict[str, object] = {"python": _pykernels}
    try:
        from . import _speedups

        backends["cython"] = _speedups
    except ImportError:
        pass
    return backends
