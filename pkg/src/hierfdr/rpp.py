"""Replicability analysis of original/replication study pairs.

Input is a CSV with one row per original study::

    paper_id,field,evident_tests,original_p,adjusted_p,original_dir,
    replication_dir,replication_p,adjusted_any,excluded_reason

Rows with a non-empty ``excluded_reason`` are kept but set aside from the
analysis; their p-value fields may be blank.
"""

from __future__ import annotations

import csv
import io
import json
import math
import statistics
from collections.abc import Sequence
from dataclasses import dataclass
from fractions import Fraction
from typing import Any

from .errors import HierFdrError, RecordError
from .stats import (
    ContingencyTable2x2,
    GroupSummary,
    chi_square_2x2,
    replication_outcome,
    welch_t,
)

COLUMNS = ("paper_id", "field", "evident_tests", "original_p", "adjusted_p", "original_dir",
           "replication_dir", "replication_p", "adjusted_any", "excluded_reason")
FIELDS = ("cognitive", "social", "other")
GROUPINGS = ("field", "adjusted_any")
DEFAULT_ALPHA = 0.05

# Published 2x2 cells and the reported chi-square p.
PUBLISHED_TABLE = ContingencyTable2x2(31, 36, 1, 20)
PUBLISHED_CHI2_NOTE = (
    "note: the published caption gives chi2(df=1) = 11.9 with p < 0.0001; the df=1 tail "
    "of the recomputed statistic is the p shown above, so the published p-value "
    "does not follow from these counts"
)

_TRUE = {"true", "1", "yes", "y"}
_FALSE = {"false", "0", "no", "n", ""}


@dataclass(frozen=True)
class RppRecord:
    paper_id: str
    field: str
    evident_tests: int
    original_p: float | None
    adjusted_p: float | None
    original_dir: str
    replication_dir: str
    replication_p: float | None
    adjusted_any: bool
    excluded: str | None = None

    @property
    def included(self) -> bool:
        return self.excluded is None


def _prob(text: str, name: str, line: int, required: bool) -> float | None:
    text = text.strip()
    if not text:
        if required:
            raise RecordError(f"{name} is required", line)
        return None
    try:
        value = float(text)
    except ValueError:
        raise RecordError(f"{name} is not a number: {text!r}", line) from None
    if not (math.isfinite(value) and 0.0 <= value <= 1.0):
        raise RecordError(f"{name} outside [0,1]: {text}", line)
    return value


def ingest_records(document: str) -> list[RppRecord]:
    """Parse and validate the CSV; excluded rows are returned flagged."""
    reader = csv.reader(io.StringIO(document.lstrip("﻿")))
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise RecordError("missing header row", 1) from None
    if tuple(header) != COLUMNS:
        raise RecordError(f"header must be {','.join(COLUMNS)}", 1)
    records: list[RppRecord] = []
    seen: set[str] = set()
    for row in reader:
        line = reader.line_num
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(COLUMNS):
            raise RecordError(f"expected {len(COLUMNS)} fields, got {len(row)}", line)
        f = dict(zip(COLUMNS, (c.strip() for c in row)))
        if not f["paper_id"]:
            raise RecordError("empty paper_id", line)
        if f["paper_id"] in seen:
            raise RecordError(f"duplicate paper_id {f['paper_id']!r}", line)
        seen.add(f["paper_id"])
        if f["field"] not in FIELDS:
            raise RecordError(f"field must be one of {FIELDS}, got {f['field']!r}", line)
        try:
            evident = int(f["evident_tests"])
        except ValueError:
            raise RecordError(f"evident_tests is not an integer: {f['evident_tests']!r}", line) from None
        if evident < 1:
            raise RecordError("evident_tests must be >= 1", line)
        excluded = f["excluded_reason"] or None
        required = excluded is None
        orig = _prob(f["original_p"], "original_p", line, required)
        adj = _prob(f["adjusted_p"], "adjusted_p", line, required)
        rep = _prob(f["replication_p"], "replication_p", line, required)
        for key in ("original_dir", "replication_dir"):
            allowed = ("positive", "negative") if required else ("positive", "negative", "none", "")
            if f[key] not in allowed:
                raise RecordError(f"{key} must be positive or negative, got {f[key]!r}", line)
        if orig is not None and adj is not None and adj < orig:
            raise RecordError(f"adjusted_p {adj} is below original_p {orig}", line)
        flag = f["adjusted_any"].lower()
        if flag not in _TRUE | _FALSE:
            raise RecordError(f"adjusted_any must be true/false, got {f['adjusted_any']!r}", line)
        records.append(RppRecord(
            f["paper_id"], f["field"], evident, orig, adj,
            f["original_dir"] or "none", f["replication_dir"] or "none", rep,
            flag in _TRUE, excluded,
        ))
    return records


def analysis_set(records: Sequence[RppRecord]) -> list[RppRecord]:
    return [r for r in records if r.included]


def contingency(records: Sequence[RppRecord], alpha: float = DEFAULT_ALPHA) -> ContingencyTable2x2:
    """Rows: ``adjusted_p <= alpha``; columns: replicated at ``alpha``."""
    rows = analysis_set(records)
    if not rows:
        raise HierFdrError("analysis set is empty")
    cells = [[0, 0], [0, 0]]
    for r in rows:
        sig = r.adjusted_p <= alpha
        rep = replication_outcome(r.original_p, r.original_dir, r.replication_p, r.replication_dir, alpha)
        cells[0 if sig else 1][0 if rep else 1] += 1
    return ContingencyTable2x2.from_rows(cells)


@dataclass(frozen=True)
class HeadlineRates:
    """Exact rates; ``None`` where the denominator is zero.

    sensitivity: share of replicated results that were significant after adjustment.
    precision: share of significant results that replicated.
    miss_rate: share of non-significant results that nevertheless replicated.
    """

    sensitivity: Fraction | None
    precision: Fraction | None
    miss_rate: Fraction | None


def _ratio(num: int, den: int) -> Fraction | None:
    return Fraction(num, den) if den else None


def headline_rates(table: ContingencyTable2x2) -> HeadlineRates:
    return HeadlineRates(
        sensitivity=_ratio(table.a, table.a + table.c),
        precision=_ratio(table.a, table.a + table.b),
        miss_rate=_ratio(table.c, table.c + table.d),
    )


@dataclass(frozen=True)
class Descriptives:
    n: int
    mean: float
    median: float
    sd: float | None
    min: int
    max: int

    def to_dict(self) -> dict[str, Any]:
        return dict(n=self.n, mean=self.mean, median=self.median, sd=self.sd, min=self.min, max=self.max)


def describe(values: Sequence[int]) -> Descriptives:
    if not values:
        raise HierFdrError("no values to summarize")
    sd = statistics.stdev(values) if len(values) > 1 else None
    return Descriptives(len(values), statistics.fmean(values), float(statistics.median(values)),
                        sd, min(values), max(values))


@dataclass(frozen=True)
class MultiplicitySummary:
    overall: Descriptives
    group_by: str | None
    groups: dict[str, Descriptives]
    comparison: tuple[str, str] | None = None
    welch: Any = None  # stats.WelchResult
    notice: str | None = None


def _group_key(record: RppRecord, group_by: str) -> str:
    if group_by == "field":
        return record.field
    return "adjusted" if record.adjusted_any else "unadjusted"


def multiplicity_summary(records: Sequence[RppRecord], group_by: str | None = None,
                         compare: tuple[str, str] | None = None) -> MultiplicitySummary:
    """Descriptives of evident test counts, optionally per group with a Welch comparison.

    With ``group_by`` set, ``compare`` picks the two groups to contrast; when
    omitted and exactly two groups exist, those two are compared.  The Welch
    test runs on the raw counts.
    """
    rows = analysis_set(records)
    if not rows:
        raise HierFdrError("analysis set is empty")
    overall = describe([r.evident_tests for r in rows])
    if group_by is None:
        return MultiplicitySummary(overall, None, {})
    if group_by not in GROUPINGS:
        raise HierFdrError(f"unknown grouping {group_by!r}; expected one of {GROUPINGS}")
    buckets: dict[str, list[int]] = {}
    for r in rows:
        buckets.setdefault(_group_key(r, group_by), []).append(r.evident_tests)
    groups = {k: describe(v) for k, v in sorted(buckets.items())}
    if compare is None:
        if len(groups) != 2:
            return MultiplicitySummary(overall, group_by, groups, notice=(
                f"group comparison omitted: {len(groups)} group(s) present, need exactly 2"))
        compare = tuple(groups)  # type: ignore[assignment]
    for name in compare:
        if name not in groups:
            if name in FIELDS or name in ("adjusted", "unadjusted"):
                return MultiplicitySummary(overall, group_by, groups, notice=(
                    f"group comparison omitted: group {name!r} has no records"))
            raise HierFdrError(f"unknown group {name!r} for grouping {group_by!r}")
    g1, g2 = (groups[c] for c in compare)
    if g1.n < 2 or g2.n < 2 or (g1.sd == 0 and g2.sd == 0):
        return MultiplicitySummary(overall, group_by, groups, tuple(compare), None,
                                   "group comparison omitted: each group needs n >= 2 and some spread")
    result = welch_t(GroupSummary(g1.mean, g1.sd, g1.n, g1.median),
                     GroupSummary(g2.mean, g2.sd, g2.n, g2.median))
    return MultiplicitySummary(overall, group_by, groups, tuple(compare), result,
                               "Welch t on raw counts; a published t may use a transformed scale")


def _fmt_rate(x: Fraction | None) -> str:
    if x is None:
        return "n/a"
    return f"{x.numerator}/{x.denominator} = {float(x) * 100:.1f}%"


def _summaries(records: Sequence[RppRecord]) -> list[MultiplicitySummary]:
    rows = analysis_set(records)
    out = [multiplicity_summary(rows)]
    fields_present = {r.field for r in rows}
    compare = ("cognitive", "social") if {"cognitive", "social"} <= fields_present else None
    out.append(multiplicity_summary(rows, "field", compare))
    out.append(multiplicity_summary(rows, "adjusted_any", ("adjusted", "unadjusted")
                                    if len({r.adjusted_any for r in rows}) == 2 else None))
    return out


def report_data(records: Sequence[RppRecord], alpha: float = DEFAULT_ALPHA) -> dict[str, Any]:
    """Everything the report shows, as plain data."""
    if not 0.0 < alpha <= 1.0:
        raise HierFdrError(f"alpha={alpha!r} outside (0, 1]")
    rows = analysis_set(records)
    table = contingency(rows, alpha)
    rates = headline_rates(table)
    try:
        chi = chi_square_2x2(table)
        chi_doc: dict[str, Any] = {"statistic": chi.statistic, "df": chi.df, "p": chi.p}
    except HierFdrError as exc:
        chi_doc = {"statistic": None, "df": 1, "p": None, "notice": str(exc)}
    if table == PUBLISHED_TABLE:
        chi_doc["discrepancy"] = PUBLISHED_CHI2_NOTE

    summaries = []
    for s in _summaries(rows):
        entry: dict[str, Any] = {
            "group_by": s.group_by,
            "overall": s.overall.to_dict(),
            "groups": {k: v.to_dict() for k, v in s.groups.items()},
        }
        if s.welch is not None:
            entry["welch"] = {"groups": list(s.comparison), "t": s.welch.t, "df": s.welch.df,
                              "p": s.welch.p_two_sided}
        if s.notice:
            entry["notice"] = s.notice
        summaries.append(entry)

    def rate_doc(x: Fraction | None) -> dict[str, Any] | None:
        return None if x is None else {"fraction": f"{x.numerator}/{x.denominator}", "value": float(x)}

    return {
        "alpha": alpha,
        "records": len(records),
        "analysis_set": len(rows),
        "contingency": {"rows": ["adjusted p <= alpha", "adjusted p > alpha"],
                        "cols": ["replicated", "not replicated"], "table": table.rows()},
        "chi_square": chi_doc,
        "rates": {"sensitivity": rate_doc(rates.sensitivity), "precision": rate_doc(rates.precision),
                  "miss_rate": rate_doc(rates.miss_rate)},
        "multiplicity": summaries,
        "excluded": [{"paper_id": r.paper_id, "reason": r.excluded} for r in records if not r.included],
        "results": [{"paper_id": r.paper_id, "p": r.original_p, "p_adj": r.adjusted_p,
                     "replication_p": r.replication_p} for r in rows],
    }


def _fmt_desc(d: dict[str, Any]) -> str:
    sd = "n/a" if d["sd"] is None else f"{d['sd']:.1f}"
    return (f"N={d['n']} M={d['mean']:.1f} Md={d['median']:g} SD={sd} "
            f"min={d['min']} max={d['max']}")


def render_report(records: Sequence[RppRecord], alpha: float = DEFAULT_ALPHA, format: str = "text") -> str:
    """Text or JSON report; a pure function of ``(records, alpha)``."""
    data = report_data(records, alpha)
    if format == "json":
        return json.dumps(data, indent=2) + "\n"
    if format != "text":
        raise HierFdrError(f"unknown report format {format!r}")
    (a, b), (c, d) = data["contingency"]["table"]
    chi = data["chi_square"]
    lines = [
        f"replicability report (alpha = {alpha:g})",
        f"records: {data['records']}  analysis set: {data['analysis_set']}  "
        f"excluded: {len(data['excluded'])}",
        "",
        f"{'':<22}{'replicated':>12}{'not replicated':>16}{'total':>8}",
        f"{'p_adj <= alpha':<22}{a:>12}{b:>16}{a + b:>8}",
        f"{'p_adj > alpha':<22}{c:>12}{d:>16}{c + d:>8}",
        f"{'total':<22}{a + c:>12}{b + d:>16}{a + b + c + d:>8}",
        "",
    ]
    if chi["statistic"] is None:
        lines.append(f"chi2: {chi['notice']}")
    else:
        lines.append(f"chi2 = {chi['statistic']:.2f} (df = 1, N = {a + b + c + d}), p = {chi['p']:.2g}")
    if "discrepancy" in chi:
        lines.append(chi["discrepancy"])
    tbl = ContingencyTable2x2(a, b, c, d)
    rates = headline_rates(tbl)
    lines += [
        "",
        f"sensitivity = {_fmt_rate(rates.sensitivity)}  (replicated results significant after adjustment)",
        f"precision = {_fmt_rate(rates.precision)}  (significant results that replicated)",
        f"miss rate = {_fmt_rate(rates.miss_rate)}  (non-significant results that replicated)",
        "",
        "evident tests per paper",
    ]
    for s in data["multiplicity"]:
        if s["group_by"] is None:
            lines.append(f"  all: {_fmt_desc(s['overall'])}")
            continue
        lines.append(f"  by {s['group_by']}:")
        for name, g in s["groups"].items():
            lines.append(f"    {name}: {_fmt_desc(g)}")
        if "welch" in s:
            w = s["welch"]
            lines.append(f"    {w['groups'][0]} vs {w['groups'][1]}: t(df={w['df']:.1f}) = {w['t']:.2f}, "
                         f"p = {w['p']:.3g}")
        if "notice" in s:
            lines.append(f"    {s['notice']}")
    lines += ["", "results (p, p_adj, replication p)"]
    for r in data["results"]:
        lines.append(f"  {r['paper_id']}: p = {r['p']:.4g}, p_adj = {r['p_adj']:.4g}, "
                     f"replication p = {r['replication_p']:.4g}")
    if data["excluded"]:
        lines += ["", "excluded"]
        lines += [f"  {e['paper_id']}: {e['reason']}" for e in data["excluded"]]
    return "\n".join(lines) + "\n"
