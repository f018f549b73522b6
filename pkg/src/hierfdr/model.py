"""Hypotheses, families and hypothesis trees, with JSON/CSV (de)serialization.

A tree is an ordered list of root nodes (the root family); the children of
every node form one further testing family.  Trees are immutable once built.

JSON documents look like::

    {"q": 0.05, "nodes": [{"id": "A", "p": 0.0172, "direction": "positive",
                           "children": [...]}]}

CSV documents carry one row per node with columns ``path,id,p,direction``
(plus optional ``label`` and ``truth``), where ``path`` is the dot-separated
list of ancestor ids, empty for members of the root family.
"""

from __future__ import annotations

import csv
import io
import json
import math
from collections.abc import Iterator, Mapping, Sequence
from dataclasses import dataclass
from typing import TYPE_CHECKING, Any

from .errors import TreeFormatError

if TYPE_CHECKING:
    from .tree import AdjustmentResult

DIRECTIONS = ("positive", "negative", "none")
TRUTHS = ("null", "non-null", "unknown")
DEFAULT_Q = 0.05

# Keys written by serialize_results; accepted (and ignored) when parsing so
# that result documents can be read back as trees.
_RESULT_KEYS = frozenset(
    {"p_node", "p_adj", "rejected", "tested", "family_level", "selection_fraction"}
)
_NODE_KEYS = frozenset({"id", "p", "direction", "label", "truth", "children"})
_TOP_KEYS = frozenset({"q", "nodes", "method", "valid_at_q"})
_CSV_COLUMNS = ("path", "id", "p", "direction", "label", "truth")


@dataclass(frozen=True)
class Hypothesis:
    """A single tested hypothesis."""

    id: str
    p: float | None = None
    direction: str = "none"
    label: str = ""
    truth: str = "unknown"


@dataclass(frozen=True)
class Node:
    hypothesis: Hypothesis
    children: tuple[Node, ...] = ()

    @property
    def id(self) -> str:
        return self.hypothesis.id

    @property
    def p(self) -> float | None:
        return self.hypothesis.p

    @property
    def is_leaf(self) -> bool:
        return not self.children


@dataclass(frozen=True)
class HypothesisTree:
    """Rooted forest of hypotheses tested family by family at target level ``q``."""

    nodes: tuple[Node, ...]
    q: float = DEFAULT_Q

    def walk(self) -> Iterator[tuple[tuple[str, ...], Node]]:
        """Yield ``(ancestor_ids, node)`` in document (pre-)order without recursion."""
        stack: list[tuple[tuple[str, ...], Node]] = [((), n) for n in reversed(self.nodes)]
        while stack:
            ancestors, node = stack.pop()
            yield ancestors, node
            below = ancestors + (node.id,)
            stack.extend((below, c) for c in reversed(node.children))

    def iter_nodes(self) -> Iterator[Node]:
        for _, node in self.walk():
            yield node

    def leaves(self) -> list[Node]:
        return [n for n in self.iter_nodes() if n.is_leaf]

    def ids(self) -> list[str]:
        return [n.id for n in self.iter_nodes()]

    def __len__(self) -> int:
        return sum(1 for _ in self.walk())

    @property
    def is_flat(self) -> bool:
        return all(n.is_leaf for n in self.nodes)

    def leaf_family(self) -> HypothesisTree:
        """The pooled leaf set as a single flat family."""
        return HypothesisTree(tuple(Node(n.hypothesis) for n in self.leaves()), self.q)

    def get(self, node_id: str) -> Node:
        for node in self.iter_nodes():
            if node.id == node_id:
                return node
        raise KeyError(node_id)


@dataclass(frozen=True)
class Violation:
    kind: str
    path: str
    message: str

    def __str__(self) -> str:
        return f"{self.path}: {self.message}" if self.path else self.message


def _fmt_path(ancestors: Sequence[str], node_id: str) -> str:
    return "/".join([*ancestors, node_id])


def validate_tree(tree: HypothesisTree) -> list[Violation]:
    """Check every tree invariant; returns the violations found (empty if valid)."""
    out: list[Violation] = []
    if not isinstance(tree.q, (int, float)) or isinstance(tree.q, bool) or not 0 < tree.q < 1:
        out.append(Violation("bad-q", "", f"q={tree.q!r} outside (0, 1)"))
    if not tree.nodes:
        out.append(Violation("empty-tree", "", "tree has no nodes"))
        return out

    seen_ids: dict[str, str] = {}
    seen_objs: set[int] = set()
    order: list[tuple[str, Node]] = []
    stack: list[tuple[tuple[str, ...], Node]] = [((), n) for n in reversed(tree.nodes)]
    while stack:
        ancestors, node = stack.pop()
        path = _fmt_path(ancestors, node.id)
        if id(node) in seen_objs:
            # A shared Node object would end up in two families.
            out.append(Violation("shared-node", path, "node reachable from more than one parent"))
            continue
        seen_objs.add(id(node))
        h = node.hypothesis
        if node.id in ancestors:
            out.append(Violation("cycle", path, f"cycle detected: {node.id!r} is its own ancestor"))
            continue
        if node.id in seen_ids:
            out.append(
                Violation("duplicate-id", path, f"duplicate id {node.id!r} (first at {seen_ids[node.id]})")
            )
        else:
            seen_ids[node.id] = path
        if h.p is not None and not (isinstance(h.p, float | int) and 0.0 <= h.p <= 1.0):
            out.append(Violation("p-range", path, f"p outside [0,1]: {h.p!r}"))
        if h.direction not in DIRECTIONS:
            out.append(Violation("bad-direction", path, f"unknown direction {h.direction!r}"))
        if h.truth not in TRUTHS:
            out.append(Violation("bad-truth", path, f"unknown truth flag {h.truth!r}"))
        order.append((path, node))
        below = ancestors + (node.id,)
        stack.extend((below, c) for c in reversed(node.children))

    # p derivability, bottom-up over the pre-order list.
    derivable: dict[int, bool] = {}
    for path, node in reversed(order):
        ok = node.p is not None or any(derivable.get(id(c), False) for c in node.children)
        derivable[id(node)] = ok
        if not ok:
            out.append(Violation("no-p", path, "no p-value derivable (no own p and no child with one)"))
    return out


def check_tree(tree: HypothesisTree) -> HypothesisTree:
    """Raise :class:`TreeFormatError` on the first violation, else return ``tree``."""
    problems = validate_tree(tree)
    if problems:
        first = problems[0]
        raise TreeFormatError(first.message, first.path or None)
    return tree


# ---------------------------------------------------------------- parsing


def _parse_p(value: Any, where: str) -> float | None:
    if value is None:
        return None
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise TreeFormatError(f"p must be a number, got {value!r}", where)
    p = float(value)
    if not math.isfinite(p) or not 0.0 <= p <= 1.0:
        raise TreeFormatError(f"p outside [0,1]: {value!r}", where)
    return p


def _parse_csv_p(text: str, where: str) -> float | None:
    text = text.strip()
    if not text:
        return None
    try:
        value = float(text)
    except ValueError:
        raise TreeFormatError(f"p is not a number: {text!r}", where) from None
    return _parse_p(value, where)


def _parse_json(text: str) -> HypothesisTree:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise TreeFormatError(f"malformed JSON: {exc}") from None
    if not isinstance(doc, dict) or not isinstance(doc.get("nodes"), list):
        raise TreeFormatError('document must be an object with a "nodes" list')
    unknown = set(doc) - _TOP_KEYS
    if unknown:
        raise TreeFormatError(f"unknown top-level keys: {sorted(unknown)}")
    q = doc.get("q", DEFAULT_Q)
    if isinstance(q, bool) or not isinstance(q, (int, float)) or not 0 < q < 1:
        raise TreeFormatError(f"q={q!r} outside (0, 1)")

    # Pass 1 (pre-order, explicit stack): check every node and fix its id.
    order: list[tuple[dict, str, tuple[str, ...]]] = []
    work: list[tuple[Any, tuple[int, ...], tuple[str, ...]]] = [
        (raw, (i + 1,), ()) for i, raw in reversed(list(enumerate(doc["nodes"])))
    ]
    while work:
        raw, pos, ancestors = work.pop()
        if not isinstance(raw, dict):
            raise TreeFormatError(f"node must be an object, got {type(raw).__name__}",
                                  "/".join(ancestors) or None)
        node_id = raw.get("id")
        if node_id is None:
            node_id = ".".join(map(str, pos))
        where = _fmt_path(ancestors, str(node_id))
        if not isinstance(node_id, str) or not node_id:
            raise TreeFormatError(f"id must be a non-empty string, got {node_id!r}", where)
        extra = set(raw) - _NODE_KEYS - _RESULT_KEYS
        if extra:
            raise TreeFormatError(f"unknown node keys: {sorted(extra)}", where)
        if node_id in ancestors:
            raise TreeFormatError(f"cycle detected: {node_id!r} is its own ancestor", where)
        children = raw.get("children", [])
        if not isinstance(children, list):
            raise TreeFormatError("children must be a list", where)
        order.append((raw, node_id, ancestors))
        below = ancestors + (node_id,)
        work.extend((c, pos + (j + 1,), below) for j, c in reversed(list(enumerate(children))))

    # Pass 2 (reverse pre-order): children are built before their parent.
    built: dict[int, Node] = {}
    for raw, node_id, ancestors in reversed(order):
        where = _fmt_path(ancestors, node_id)
        direction = raw.get("direction", "none")
        if direction not in DIRECTIONS:
            raise TreeFormatError(f"unknown direction {direction!r}", where)
        truth = raw.get("truth", "unknown")
        if truth not in TRUTHS:
            raise TreeFormatError(f"unknown truth flag {truth!r}", where)
        label = raw.get("label", "")
        if not isinstance(label, str):
            raise TreeFormatError("label must be a string", where)
        hyp = Hypothesis(node_id, _parse_p(raw.get("p"), where), direction, label, truth)
        built[id(raw)] = Node(hyp, tuple(built.pop(id(c)) for c in raw.get("children", [])))
    nodes = tuple(built.pop(id(raw)) for raw in doc["nodes"])
    return check_tree(HypothesisTree(nodes, float(q)))


def _parse_csv(text: str, q: float) -> HypothesisTree:
    reader = csv.DictReader(io.StringIO(text.lstrip("﻿")))
    header = reader.fieldnames
    if not header:
        raise TreeFormatError("missing CSV header row")
    header = [h.strip() for h in header]
    reader.fieldnames = header
    for col in ("id", "p"):
        if col not in header:
            raise TreeFormatError(f"CSV header lacks required column {col!r}")
    if len(set(header)) != len(header):
        raise TreeFormatError("CSV header has duplicate columns")

    # full path -> (hypothesis, list of child full paths)
    entries: dict[str, tuple[Hypothesis, list[str]]] = {}
    roots: list[str] = []
    parent_of: list[tuple[str, str, str]] = []
    for row in reader:
        line = reader.line_num
        if None in row:
            raise TreeFormatError("row has more fields than the header", f"line {line}")
        node_id = (row.get("id") or "").strip()
        path = (row.get("path") or "").strip()
        where = f"line {line}"
        if not node_id:
            raise TreeFormatError("empty id", where)
        where = f"line {line} ({node_id})"
        ancestors = path.split(".") if path else []
        if node_id in ancestors:
            raise TreeFormatError(f"cycle detected: {node_id!r} is its own ancestor", where)
        direction = (row.get("direction") or "none").strip() or "none"
        if direction not in DIRECTIONS:
            raise TreeFormatError(f"unknown direction {direction!r}", where)
        truth = (row.get("truth") or "unknown").strip() or "unknown"
        if truth not in TRUTHS:
            raise TreeFormatError(f"unknown truth flag {truth!r}", where)
        hyp = Hypothesis(node_id, _parse_csv_p(row.get("p") or "", where), direction,
                         row.get("label") or "", truth)
        full = f"{path}.{node_id}" if path else node_id
        if full in entries:
            raise TreeFormatError(f"duplicate id {node_id!r} under path {path!r}", where)
        entries[full] = (hyp, [])
        if path:
            parent_of.append((full, path, where))
        else:
            roots.append(full)
    for full, path, where in parent_of:
        if path not in entries:
            raise TreeFormatError(f"parent path {path!r} not found", where)
        entries[path][1].append(full)

    # Materialize bottom-up: longer paths are always deeper.
    built: dict[str, Node] = {}
    for full in sorted(entries, key=lambda k: -k.count(".")):
        hyp, kids = entries[full]
        built[full] = Node(hyp, tuple(built[k] for k in kids))
    return check_tree(HypothesisTree(tuple(built[r] for r in roots), q))


def parse_tree(text: str, format: str = "json", q: float | None = None) -> HypothesisTree:
    """Parse and validate a hypothesis document.

    Args:
        text: Document contents.
        format: ``"json"`` or ``"csv"``.
        q: Level to attach to CSV trees (JSON documents carry their own ``q``);
            when given for JSON it overrides the document value.

    Raises:
        TreeFormatError: on malformed input or any tree invariant violation.
    """
    if format == "json":
        tree = _parse_json(text)
        if q is not None:
            tree = check_tree(HypothesisTree(tree.nodes, q))
        return tree
    if format == "csv":
        return _parse_csv(text, DEFAULT_Q if q is None else q)
    raise TreeFormatError(f"unknown format {format!r}")


def tree_from_pvalues(pvals: Sequence[float], q: float = DEFAULT_Q,
                      ids: Sequence[str] | None = None) -> HypothesisTree:
    """Build a single-family tree from a list of p-values (ids ``1``, ``2``, ...)."""
    ids = [str(i + 1) for i in range(len(pvals))] if ids is None else list(ids)
    nodes = tuple(Node(Hypothesis(i, float(p))) for i, p in zip(ids, pvals, strict=True))
    return check_tree(HypothesisTree(nodes, q))


# ---------------------------------------------------------- serialization


def _num(x: float | None) -> str:
    return "" if x is None else repr(float(x))


def _index_results(tree: HypothesisTree,
                   results: Sequence[AdjustmentResult] | Mapping[str, AdjustmentResult]
                   ) -> dict[str, AdjustmentResult]:
    if not tree.nodes:
        raise TreeFormatError("cannot serialize an empty tree")
    by_id = dict(results) if isinstance(results, Mapping) else {r.node_id: r for r in results}
    ids = set(tree.ids())
    unknown = [k for k in by_id if k not in ids]
    if unknown:
        raise TreeFormatError(f"results reference unknown node id(s): {', '.join(map(str, unknown))}")
    missing = [k for k in tree.ids() if k not in by_id]
    if missing:
        raise TreeFormatError(f"results missing node id(s): {', '.join(missing)}")
    return by_id


def serialize_results(tree: HypothesisTree,
                      results: Sequence[AdjustmentResult] | Mapping[str, AdjustmentResult],
                      format: str = "json", method: str | None = None) -> str:
    """Write the tree with raw and adjusted p-values side by side.

    The output parses back with :func:`parse_tree` to the same tree.
    """
    by_id = _index_results(tree, results)
    if format == "json":
        top: dict[str, Any] = {}
        if method is not None:
            top["method"] = method
        top["q"] = tree.q
        top["valid_at_q"] = tree.q
        top["nodes"] = []
        stack: list[tuple[Node, list]] = [(n, top["nodes"]) for n in reversed(tree.nodes)]
        while stack:
            node, sink = stack.pop()
            r = by_id[node.id]
            h = node.hypothesis
            entry: dict[str, Any] = {"id": h.id, "p": h.p, "direction": h.direction}
            if h.label:
                entry["label"] = h.label
            if h.truth != "unknown":
                entry["truth"] = h.truth
            entry.update(
                p_node=r.raw_p, p_adj=r.adjusted_p, rejected=r.rejected, tested=r.tested,
                family_level=r.family_level, selection_fraction=r.selection_fraction,
            )
            sink.append(entry)
            if node.children:
                entry["children"] = []
                stack.extend((c, entry["children"]) for c in reversed(node.children))
        return json.dumps(top, indent=2) + "\n"
    if format == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([*_CSV_COLUMNS, "p_node", "p_adj", "rejected", "tested",
                    "family_level", "selection_fraction"])
        for ancestors, node in tree.walk():
            r = by_id[node.id]
            h = node.hypothesis
            w.writerow([".".join(ancestors), h.id, _num(h.p), h.direction, h.label, h.truth,
                        _num(r.raw_p), _num(r.adjusted_p), str(r.rejected).lower(),
                        str(r.tested).lower(), _num(r.family_level), _num(r.selection_fraction)])
        return buf.getvalue()
    raise TreeFormatError(f"unknown format {format!r}")


def format_results_text(tree: HypothesisTree,
                        results: Sequence[AdjustmentResult] | Mapping[str, AdjustmentResult],
                        method: str) -> str:
    """Human-readable listing in the amended ``p = ..., p_adj = ...`` style."""
    by_id = _index_results(tree, results)
    lines = [f"method: {method}",
             f"adjusted p-values valid at q={tree.q:g}",
             ""]
    for ancestors, node in tree.walk():
        r = by_id[node.id]
        indent = "  " * len(ancestors)
        mark = "*" if r.rejected else " " if r.tested else "-"
        own = "" if node.p is not None else " (combined)"
        lines.append(f"{mark} {indent}{node.id}: p = {r.raw_p:.4g}{own}, p_adj = {r.adjusted_p:.4g}"
                     f"  [level {r.family_level:.4g}]")
    lines += ["", "* rejected   - not tested (ancestor not rejected)"]
    return "\n".join(lines) + "\n"
