"""Hierarchical FDR testing (TreeBH) on a tree of hypothesis families.

The root family is tested with BH at level ``q``.  The children of every
rejected node form a family tested with BH at ``q`` times the product of the
selection fractions ``R_A / m_A`` of all ancestor families, where ``R_A`` is
the number of rejections in family ``A`` and ``m_A`` its size.  Families below
a non-rejected node are never tested ("turned off").

A node without its own p-value is represented by the Simes combination of its
children's p-values.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .errors import HierFdrError, InvariantError
from .flat import adjust, bh_adjust_array, simes_array
from .model import HypothesisTree, Node, check_tree


@dataclass(frozen=True)
class AdjustmentResult:
    """Outcome for one node.

    ``family_level`` is the effective BH level of the node's family and
    ``selection_fraction`` the cumulative product of ancestor ``R/m`` ratios,
    so ``family_level == q * selection_fraction``.
    """

    node_id: str
    raw_p: float
    adjusted_p: float
    rejected: bool
    family_level: float
    tested: bool
    selection_fraction: float


def simes(pvals) -> float:
    """Simes combined p-value of a family."""
    arr = np.asarray(list(pvals), dtype=float)
    if arr.size == 0:
        raise HierFdrError("Simes combination of an empty family")
    return float(simes_array(arr))


def node_p_values(tree: HypothesisTree) -> dict[str, float]:
    """p-value for every node: its own if present, else Simes over its children.

    Children without a derivable p-value are skipped; a node with none at all
    raises :class:`HierFdrError`.
    """
    order = [node for node in tree.iter_nodes()]
    values: dict[str, float] = {}
    for node in reversed(order):
        if node.p is not None:
            values[node.id] = node.p
            continue
        kids = [values[c.id] for c in node.children if c.id in values]
        if kids:
            values[node.id] = simes(kids)
    missing = [n.id for n in order if n.id not in values]
    if missing:
        raise HierFdrError(f"no p-value derivable for node(s): {', '.join(missing)}")
    return values


def node_p(node: Node) -> float:
    """p-value of a single node (own value or Simes over its subtree)."""
    return node_p_values(HypothesisTree((node,)))[node.id]


def treebh(tree: HypothesisTree, q: float | None = None) -> list[AdjustmentResult]:
    """Run TreeBH; results are listed in document order.

    Adjusted p-value of a node: ``min(1, max(bh / selection_fraction,
    parent_adjusted))``, where ``bh`` is its within-family BH-adjusted value.
    These are valid relative to the selection fractions realized at ``q``.
    Families below non-rejected nodes are reported with ``tested=False`` and
    their selection fraction frozen at the parent's value.
    """
    q = tree.q if q is None else q
    if isinstance(q, bool) or not 0.0 < q < 1.0:
        raise HierFdrError(f"q={q!r} outside (0, 1)")
    check_tree(tree)
    pvals = node_p_values(tree)

    found: dict[str, AdjustmentResult] = {}
    # (family, selection fraction, parent's adjusted p, family is tested)
    queue: deque[tuple[tuple[Node, ...], float, float, bool]] = deque([(tree.nodes, 1.0, 0.0, True)])
    while queue:
        family, frac, parent_adj, tested = queue.popleft()
        raw = np.array([pvals[n.id] for n in family])
        within = bh_adjust_array(raw)
        level = q * frac
        rejected = tested & (within <= level)
        m = len(family)
        n_rej = int(rejected.sum())
        for node, p, w, rej in zip(family, raw.tolist(), within.tolist(), rejected.tolist()):
            adj = min(1.0, max(w / frac, parent_adj))
            found[node.id] = AdjustmentResult(node.id, p, adj, rej, level, tested, frac)
            if node.children:
                if rej:
                    queue.append((node.children, frac * (n_rej / m), adj, True))
                else:
                    queue.append((node.children, frac, adj, False))
    results = [found[node_id] for node_id in tree.ids()]
    check_results(tree, results, q)
    return results


def flat_results(tree: HypothesisTree, method: str, q: float | None = None) -> list[AdjustmentResult]:
    """Adjust a single-family tree with a flat method, in AdjustmentResult form."""
    q = tree.q if q is None else q
    if isinstance(q, bool) or not 0.0 < q < 1.0:
        raise HierFdrError(f"q={q!r} outside (0, 1)")
    if not tree.is_flat:
        raise HierFdrError(f"method {method!r} needs a single family; use leaf_family() or treebh")
    raw = [n.p for n in tree.nodes]
    adj = adjust(raw, method)
    return [AdjustmentResult(n.id, p, a, a <= q, q, True, 1.0)
            for n, p, a in zip(tree.nodes, raw, adj)]


def check_results(tree: HypothesisTree, results: list[AdjustmentResult], q: float) -> None:
    """Verify the structural guarantees of a TreeBH output."""
    by_id = {r.node_id: r for r in results}
    for ancestors, node in tree.walk():
        r = by_id[node.id]
        if r.rejected and not r.tested:
            raise InvariantError(f"{node.id}: rejected but not tested")
        if ancestors and r.rejected and not by_id[ancestors[-1]].rejected:
            raise InvariantError(f"{node.id}: rejected below a non-rejected parent")
        if not 0.0 < r.family_level <= q:
            raise InvariantError(f"{node.id}: family level {r.family_level} outside (0, q]")
        if r.adjusted_p < r.raw_p:
            raise InvariantError(f"{node.id}: adjusted p below raw p")


def turned_off_branches(tree: HypothesisTree, results: list[AdjustmentResult]) -> list[str]:
    """Ids of non-rejected nodes with children: their subtrees were never tested."""
    by_id = {r.node_id: r for r in results}
    return [n.id for n in tree.iter_nodes() if n.children and not by_id[n.id].rejected]


def treebh_regular(leaf_p: np.ndarray, q: float) -> tuple[np.ndarray, np.ndarray]:
    """TreeBH on a batch of regular trees given as an array of leaf p-values.

    ``leaf_p`` has shape ``(n, s1, ..., sd)``: ``n`` independent trees whose
    root family has ``s1`` members, each with ``s2`` children and so on.
    Internal nodes take Simes p-values.  Arithmetic mirrors :func:`treebh`
    operation for operation, so results agree exactly.

    Returns leaf-level ``(adjusted, rejected)`` arrays of the input shape.
    """
    leaf_p = np.asarray(leaf_p, dtype=float)
    depth = leaf_p.ndim - 1
    if depth < 1:
        raise HierFdrError("leaf_p needs a batch axis and at least one family axis")
    levels = [leaf_p]
    for _ in range(depth - 1):
        levels.append(simes_array(levels[-1]))
    levels.reverse()  # levels[k] has shape (n, s1, ..., s_{k+1})

    n = leaf_p.shape[0]
    frac = np.ones((n, 1))
    parent_adj = np.zeros((n, 1))
    tested = np.ones((n, 1), dtype=bool)
    adj = rejected = None
    for k, p in enumerate(levels):
        shape = p.shape
        frac = frac.reshape(shape[:-1] + (1,))
        parent_adj = parent_adj.reshape(shape[:-1] + (1,))
        tested = tested.reshape(shape[:-1] + (1,))
        within = bh_adjust_array(p)
        rejected = tested & (within <= q * frac)
        adj = np.minimum(1.0, np.maximum(within / frac, parent_adj))
        if k == depth - 1:
            break
        m = shape[-1]
        n_rej = rejected.sum(axis=-1, keepdims=True)
        frac = np.where(rejected, frac * (n_rej / m), frac)
        parent_adj = adj
        tested = rejected
    return adj, rejected
