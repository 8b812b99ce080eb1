"""Pure-Python Ratcliff/Obershelp kernels.

Used when the compiled ``_speedups`` module is unavailable. Results are
identical to the compiled path, tie-breaking included.
"""
from __future__ import annotations


def _longest_block(a: str, alo: int, ahi: int, b2j: dict[str, list[int]], blo: int, bhi: int):
    # j2len[j] = length of the common run ending at a[i-1], b[j]
    besti, bestj, best = alo, blo, 0
    j2len: dict[int, int] = {}
    for i in range(alo, ahi):
        newj2len: dict[int, int] = {}
        for j in b2j.get(a[i], ()):
            if j < blo:
                continue
            if j >= bhi:
                break
            k = newj2len[j] = j2len.get(j - 1, 0) + 1
            if k > best:
                besti, bestj, best = i - k + 1, j - k + 1, k
        j2len = newj2len
    return besti, bestj, best


def matched_size(a: str, b: str) -> int:
    """Total length of the Ratcliff/Obershelp matching blocks of ``a`` and ``b``."""
    if not a or not b:
        return 0
    b2j: dict[str, list[int]] = {}
    for j, ch in enumerate(b):
        b2j.setdefault(ch, []).append(j)
    total = 0
    stack = [(0, len(a), 0, len(b))]
    while stack:
        alo, ahi, blo, bhi = stack.pop()
        if alo >= ahi or blo >= bhi:
            continue
        i, j, k = _longest_block(a, alo, ahi, b2j, blo, bhi)
        if k:
            total += k
            stack.append((alo, i, blo, j))
            stack.append((i + k, ahi, j + k, bhi))
    return total


def matched_sizes(a: str, bs: list[str]) -> list[int]:
    return [matched_size(a, b) for b in bs]


def ratio(a: str, b: str) -> float:
    total = len(a) + len(b)
    if total == 0:
        return 1.0
    return 2.0 * matched_size(a, b) / total


def ratios(a: str, bs: list[str]) -> list[float]:
    return [ratio(a, b) for b in bs]
