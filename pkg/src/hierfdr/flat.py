"""Single-family multiplicity adjustments: Bonferroni, BH and BY.

All adjusters take a sequence of p-values and return adjusted values in the
input order.  The ``*_array`` kernels work along the last axis of an array of
any shape, so the simulation harness can adjust thousands of families in one
call; the list-based functions are thin wrappers over them.
"""

from __future__ import annotations

import math
from collections.abc import Iterable, Sequence

import numpy as np

from .errors import HierFdrError

METHODS = ("bonferroni", "bh", "by")


def _as_pvalues(pvals: Iterable[float]) -> np.ndarray:
    arr = np.asarray(list(pvals), dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise HierFdrError("p-value list must be non-empty")
    bad = ~((arr >= 0.0) & (arr <= 1.0))
    if bad.any():
        i = int(np.flatnonzero(bad)[0])
        raise HierFdrError(f"p-value at index {i} outside [0,1]: {arr[i]!r}")
    return arr


def bh_adjust_array(p: np.ndarray) -> np.ndarray:
    """Step-up BH adjusted p-values along the last axis.

    For sorted p-values, ``adj_(i) = min_{j >= i} m * p_(j) / j`` capped at 1.
    Uses a stable sort, so tied p-values get identical adjusted values.
    """
    p = np.asarray(p, dtype=float)
    m = p.shape[-1]
    order = np.argsort(p, axis=-1, kind="stable")
    ordered = np.take_along_axis(p, order, axis=-1)
    scaled = m * ordered / np.arange(1, m + 1)
    adj = np.minimum.accumulate(scaled[..., ::-1], axis=-1)[..., ::-1]
    # m * p / m can round one ulp below p; the exact value never is.
    adj = np.minimum(np.maximum(adj, ordered), 1.0)
    out = np.empty_like(adj)
    np.put_along_axis(out, order, adj, axis=-1)
    return out


def simes_array(p: np.ndarray) -> np.ndarray:
    """Simes combination ``min_i m * p_(i) / i`` along the last axis."""
    p = np.asarray(p, dtype=float)
    m = p.shape[-1]
    ordered = np.sort(p, axis=-1, kind="stable")
    return np.min(m * ordered / np.arange(1, m + 1), axis=-1)


def harmonic_number(m: int) -> float:
    """``c(m) = sum_{i=1..m} 1/i`` (the BY dependence penalty)."""
    return math.fsum(1.0 / i for i in range(1, m + 1))


def bonferroni_adjust(pvals: Sequence[float]) -> list[float]:
    """Bonferroni: ``min(1, m * p)``."""
    arr = _as_pvalues(pvals)
    return np.minimum(arr.size * arr, 1.0).tolist()


def bh_adjust(pvals: Sequence[float]) -> list[float]:
    """Benjamini-Hochberg adjusted p-values (q-values), in input order.

    Rejecting ``{i : adjusted[i] <= q}`` reproduces the BH step-up rejection
    set at level ``q`` for every ``q``.

    >>> bh_adjust([0.057, 0.15])
    [0.114, 0.15]
    """
    return bh_adjust_array(_as_pvalues(pvals)).tolist()


def by_adjust(pvals: Sequence[float]) -> list[float]:
    """Benjamini-Yekutieli adjusted p-values: BH scaled by ``c(m)``, capped at 1."""
    arr = _as_pvalues(pvals)
    c = harmonic_number(arr.size)
    return np.minimum(c * bh_adjust_array(arr), 1.0).tolist()


def adjust(pvals: Sequence[float], method: str) -> list[float]:
    if method == "bonferroni":
        return bonferroni_adjust(pvals)
    if method == "bh":
        return bh_adjust(pvals)
    if method == "by":
        return by_adjust(pvals)
    raise HierFdrError(f"unknown flat method {method!r}; expected one of {', '.join(METHODS)}")


def reject_at_level(adjusted: Sequence[float], q: float) -> set[int]:
    """Indices whose adjusted p-value is at most ``q`` (boundary included)."""
    if not 0.0 < q < 1.0:
        raise HierFdrError(f"q={q!r} outside (0, 1)")
    return {i for i, a in enumerate(adjusted) if a <= q}


def expected_false_discoveries(m: int, alpha: float) -> float:
    """Expected number of false rejections when all ``m`` nulls are tested unadjusted at ``alpha``."""
    if m < 0:
        raise HierFdrError(f"m must be non-negative, got {m}")
    if not 0.0 < alpha < 1.0:
        raise HierFdrError(f"alpha={alpha!r} outside (0, 1)")
    return m * alpha
