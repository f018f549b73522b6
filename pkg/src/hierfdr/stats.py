"""Numerical statistics: normal CDF/quantile, 2x2 chi-square, Welch t, FCR levels.

The normal CDF is ``0.5 * erfc(-z / sqrt(2))`` using the C library ``erfc``
(a rational/continued-fraction approximation with ~1e-16 relative error),
which keeps the upper tail accurate where ``1 - erf`` would cancel.  The
quantile is Wichura's AS241 rational approximation from
:class:`statistics.NormalDist`, followed by one Newton step against our CDF.
"""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass
from statistics import NormalDist

from scipy import special

from .errors import HierFdrError

_SQRT2 = math.sqrt(2.0)
_STD_NORMAL = NormalDist()


def normal_cdf(z: float) -> float:
    """Standard normal CDF, absolute error below 1e-12."""
    if not math.isfinite(z):
        raise HierFdrError(f"normal_cdf needs a finite argument, got {z!r}")
    return 0.5 * math.erfc(-z / _SQRT2)


def normal_sf(z: float) -> float:
    """Upper tail ``1 - normal_cdf(z)`` without cancellation."""
    return normal_cdf(-z)


def normal_quantile(p: float) -> float:
    """Inverse of :func:`normal_cdf` on the open interval (0, 1)."""
    if not 0.0 < p < 1.0:
        raise HierFdrError(f"normal_quantile needs p in (0, 1), got {p!r}")
    z = _STD_NORMAL.inv_cdf(p)
    density = math.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)
    if density > 0.0:
        z -= (normal_cdf(z) - p) / density
    return z


@dataclass(frozen=True)
class ContingencyTable2x2:
    """Counts with rows = adjusted significance (yes, no), cols = replicated (yes, no).

    ::

        [[a, b],
         [c, d]]
    """

    a: int
    b: int
    c: int
    d: int

    def __post_init__(self) -> None:
        for name in "abcd":
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, int) or v < 0:
                raise HierFdrError(f"cell {name} must be a non-negative integer, got {v!r}")
        if self.n < 1:
            raise HierFdrError("contingency table is empty")

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[int]]) -> ContingencyTable2x2:
        (a, b), (c, d) = rows
        return cls(int(a), int(b), int(c), int(d))

    @property
    def n(self) -> int:
        return self.a + self.b + self.c + self.d

    def rows(self) -> list[list[int]]:
        return [[self.a, self.b], [self.c, self.d]]

    def transpose(self) -> ContingencyTable2x2:
        return ContingencyTable2x2(self.a, self.c, self.b, self.d)


@dataclass(frozen=True)
class ChiSquareResult:
    statistic: float
    p: float
    df: int = 1


def chi_square_2x2(table: ContingencyTable2x2) -> ChiSquareResult:
    """Pearson chi-square for a 2x2 table, no continuity correction.

    The df=1 tail is ``2 * (1 - Phi(sqrt(x)))``.
    """
    rows = [table.a + table.b, table.c + table.d]
    cols = [table.a + table.c, table.b + table.d]
    if min(rows) == 0 or min(cols) == 0:
        raise HierFdrError(f"chi-square undefined with a zero marginal (rows={rows}, cols={cols})")
    n = table.n
    cells = table.rows()
    stat = math.fsum(
        (cells[i][j] - rows[i] * cols[j] / n) ** 2 / (rows[i] * cols[j] / n)
        for i in range(2) for j in range(2)
    )
    return ChiSquareResult(stat, min(1.0, 2.0 * normal_sf(math.sqrt(stat))))


@dataclass(frozen=True)
class GroupSummary:
    mean: float
    sd: float
    n: int
    median: float | None = None

    def __post_init__(self) -> None:
        if self.sd < 0 or not math.isfinite(self.sd):
            raise HierFdrError(f"sd must be finite and >= 0, got {self.sd!r}")
        if self.n < 2:
            raise HierFdrError(f"group needs n >= 2, got {self.n}")


@dataclass(frozen=True)
class WelchResult:
    t: float
    df: float
    p_two_sided: float


def t_sf(t: float, df: float) -> float:
    """Upper tail of Student's t with (possibly fractional) ``df``.

    Uses ``P(T > t) = I_x(df/2, 1/2) / 2`` with ``x = df / (df + t^2)`` for ``t >= 0``.
    """
    x = df / (df + t * t)
    tail = 0.5 * float(special.betainc(0.5 * df, 0.5, x))
    return tail if t >= 0 else 1.0 - tail


def welch_t(g1: GroupSummary, g2: GroupSummary) -> WelchResult:
    """Welch two-sample t-test from group summaries (Satterthwaite df)."""
    v1 = g1.sd ** 2 / g1.n
    v2 = g2.sd ** 2 / g2.n
    if v1 + v2 == 0.0:
        raise HierFdrError("Welch t undefined: both groups have zero sd")
    t = (g1.mean - g2.mean) / math.sqrt(v1 + v2)
    df = (v1 + v2) ** 2 / (v1 ** 2 / (g1.n - 1) + v2 ** 2 / (g2.n - 1))
    p = min(1.0, 2.0 * t_sf(abs(t), df))
    return WelchResult(t, df, p)


def fcr_level(m: int, r: int, q: float) -> float:
    """Confidence level ``1 - R q / m`` for FCR control over ``R`` selected of ``m``."""
    if not 0.0 < q < 1.0:
        raise HierFdrError(f"q={q!r} outside (0, 1)")
    if r < 1:
        raise HierFdrError("nothing selected: no intervals to construct")
    if r > m:
        raise HierFdrError(f"selected count R={r} exceeds m={m}")
    return 1.0 - r * q / m


@dataclass(frozen=True)
class SelectedIntervalSpec:
    estimate: float
    standard_error: float
    selected: bool = True

    def __post_init__(self) -> None:
        if not self.standard_error > 0:
            raise HierFdrError(f"standard error must be > 0, got {self.standard_error!r}")


@dataclass(frozen=True)
class Interval:
    index: int
    lower: float
    upper: float
    level: float


def fcr_intervals(specs: Sequence[SelectedIntervalSpec], q: float) -> list[Interval]:
    """FCR-adjusted marginal intervals for the selected specs.

    Each selected parameter gets ``estimate +- z_{1 - R q / (2 m)} * se``.
    """
    m = len(specs)
    r = sum(1 for s in specs if s.selected)
    level = fcr_level(m, r, q)
    z = normal_quantile(1.0 - r * q / (2.0 * m))
    return [Interval(i, s.estimate - z * s.standard_error, s.estimate + z * s.standard_error, level)
            for i, s in enumerate(specs) if s.selected]


def replication_outcome(p_orig: float, dir_orig: str, p_rep: float, dir_rep: str,
                        alpha: float = 0.05) -> bool:
    """Both p-values at most ``alpha`` with effects in the same direction."""
    for d in (dir_orig, dir_rep):
        if d not in ("positive", "negative"):
            raise HierFdrError(f"replication needs direction positive/negative, got {d!r}")
    if not 0.0 < alpha <= 1.0:
        raise HierFdrError(f"alpha={alpha!r} outside (0, 1]")
    return p_orig <= alpha and p_rep <= alpha and dir_orig == dir_rep
