import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hierfdr.errors import HierFdrError
from hierfdr.flat import bh_adjust, reject_at_level
from hierfdr.model import Hypothesis, HypothesisTree, Node, parse_tree, tree_from_pvalues
from hierfdr.tree import node_p, treebh, treebh_regular, turned_off_branches
from oracles import simes_bruteforce, treebh_oracle

GOSCHKE_TARGET = 0.0172 * 7 / 3


def nest(tree):
    """Plain nested dicts for the oracle."""
    def conv(n):
        return {"id": n.id, "p": n.p, "children": [conv(c) for c in n.children]}
    return [conv(n) for n in tree.nodes]


def build(layout, q=0.05):
    """layout: list of (id, p, children-layout)."""
    def conv(items):
        return tuple(Node(Hypothesis(i, p), conv(kids)) for i, p, kids in items)
    return HypothesisTree(conv(layout), q)


SMALL_TREE = build([
    ("r1", 0.001, [("c1", 0.004, []), ("c2", 0.8, [])]),
    ("r2", 0.5, [("d1", 0.01, [])]),
    ("r3", 0.9, [("e1", 0.02, []), ("e2", 0.03, [])]),
])


class TestNodeP:
    def test_own_value(self):
        assert node_p(Node(Hypothesis("x", 0.0172))) == 0.0172

    def test_single_child(self):
        assert node_p(Node(Hypothesis("x"), (Node(Hypothesis("a", 0.04)),))) == 0.04

    def test_simes_derived(self):
        kids = tuple(Node(Hypothesis(f"c{i}", p)) for i, p in enumerate([0.01, 0.04, 0.03]))
        expected = simes_bruteforce([0.01, 0.04, 0.03])
        assert expected == pytest.approx(0.03)
        assert node_p(Node(Hypothesis("x"), kids)) == pytest.approx(expected, abs=1e-15)

    def test_own_p_takes_precedence(self):
        node = Node(Hypothesis("x", 0.5), (Node(Hypothesis("a", 0.001)),))
        assert node_p(node) == 0.5

    def test_nothing_derivable(self):
        with pytest.raises(HierFdrError):
            node_p(Node(Hypothesis("x")))


class TestTreeBH:
    def test_goschke(self, goschke_text):
        results = {r.node_id: r for r in treebh(parse_tree(goschke_text))}
        assert all(results[a].rejected for a in ("A1", "A2", "A3"))
        target = results["A2.PMxComp"]
        assert target.adjusted_p == pytest.approx(GOSCHKE_TARGET, abs=1e-12)
        assert target.rejected and target.family_level == 0.05 and target.selection_fraction == 1.0

    def test_single_family_is_flat_bh(self):
        p = [0.01, 0.2, 0.03, 0.04, 0.9]
        results = treebh(tree_from_pvalues(p))
        assert [r.adjusted_p for r in results] == bh_adjust(p)
        assert {i for i, r in enumerate(results) if r.rejected} == reject_at_level(bh_adjust(p), 0.05)

    def test_derived_three_parent_example(self):
        res = {r.node_id: r for r in treebh(SMALL_TREE)}
        oracle = treebh_oracle(nest(SMALL_TREE), 0.05)
        assert [k for k in res if res[k].rejected] == ["r1", "c1"]
        assert res["c1"].family_level == pytest.approx(0.05 / 3)
        assert res["c1"].adjusted_p == pytest.approx(0.024, abs=1e-15)
        assert res["c2"].adjusted_p == 1.0
        for k, r in res.items():
            adj, rej, tested, level = oracle[k]
            assert (r.rejected, r.tested) == (rej, tested)
            assert r.adjusted_p == pytest.approx(adj, abs=1e-12)
            assert r.family_level == pytest.approx(level, abs=1e-15)
        assert not res["d1"].tested and not res["e1"].tested
        assert res["d1"].selection_fraction == 1.0

    def test_turned_off_branches(self, goschke_text):
        tree = parse_tree(goschke_text)
        assert turned_off_branches(tree, treebh(tree)) == []
        assert turned_off_branches(SMALL_TREE, treebh(SMALL_TREE)) == ["r2", "r3"]
        flat = tree_from_pvalues([0.01, 0.9])
        assert turned_off_branches(flat, treebh(flat)) == []

    def test_no_attenuation_when_all_parents_rejected(self, goschke_text):
        for r in treebh(parse_tree(goschke_text)):
            assert r.family_level == 0.05

    @pytest.mark.parametrize("q", [0.0, 1.0, 2.0])
    def test_bad_q(self, q):
        with pytest.raises(HierFdrError):
            treebh(tree_from_pvalues([0.1]), q)

    def test_deep_chain_does_not_recurse(self):
        node = Node(Hypothesis("leaf", 1e-9))
        for i in range(5000):
            node = Node(Hypothesis(f"n{i}"), (node,))
        results = treebh(HypothesisTree((node,)))
        assert len(results) == 5001 and all(r.rejected for r in results)


@st.composite
def random_trees(draw, max_depth=3):
    counter = iter(range(100_000))

    def family(depth):
        out = []
        for _ in range(draw(st.integers(1, 5))):
            kids = family(depth + 1) if depth < max_depth and draw(st.booleans()) else ()
            # Mix of strong and null-looking p-values so rejections happen.
            p = draw(st.one_of(st.floats(0, 0.01), st.floats(0, 1)))
            if kids and draw(st.booleans()):
                p = None
            out.append(Node(Hypothesis(f"n{next(counter)}", p), kids))
        return tuple(out)

    return HypothesisTree(family(0))


@settings(max_examples=300, deadline=None)
@given(random_trees(), st.floats(0.01, 0.3))
def test_matches_recursive_oracle(tree, q):
    oracle = treebh_oracle(nest(tree), q)
    for r in treebh(tree, q):
        adj, rej, tested, level = oracle[r.node_id]
        assert r.rejected == rej and r.tested == tested
        assert r.adjusted_p == pytest.approx(adj, rel=1e-9, abs=1e-15)
        assert r.family_level == pytest.approx(level, rel=1e-12)


@settings(max_examples=300, deadline=None)
@given(random_trees(), st.floats(0.01, 0.3))
def test_result_invariants(tree, q):
    results = treebh(tree, q)
    by_id = {r.node_id: r for r in results}
    for anc, node in tree.walk():
        r = by_id[node.id]
        assert not r.rejected or r.tested
        assert all(by_id[a].rejected for a in anc) or not r.rejected
        assert r.family_level == pytest.approx(q * r.selection_fraction, rel=1e-15)
        assert 0 < r.family_level <= q
        assert r.adjusted_p >= r.raw_p


@settings(max_examples=150, deadline=None)
@given(random_trees())
def test_monotone_in_q(tree):
    previous = set()
    for q in (0.01, 0.02, 0.05, 0.1, 0.2, 0.4):
        current = {r.node_id for r in treebh(tree, q) if r.rejected}
        assert previous <= current
        previous = current


@settings(max_examples=150, deadline=None)
@given(random_trees(), st.floats(0.02, 0.3))
def test_turn_off_containment(tree, q):
    results = {r.node_id: r for r in treebh(tree, q)}
    for node in tree.iter_nodes():
        r = results[node.id]
        if not (node.children and r.rejected):
            continue
        child_level = results[node.children[0].id].family_level
        branch = HypothesisTree(node.children)
        alone = {x.node_id: x.rejected for x in treebh(branch, child_level)}
        assert alone == {k: results[k].rejected for k in alone}


def test_one_level_equivalence_random():
    rng = np.random.default_rng(11)
    for _ in range(500):
        p = rng.random(int(rng.integers(1, 13))) ** 3
        res = treebh(tree_from_pvalues(p.tolist()))
        assert [r.adjusted_p for r in res] == bh_adjust(p.tolist())


@pytest.mark.parametrize("shape", [(4,), (3, 7), (2, 3, 4), (10, 10)])
def test_regular_kernel_matches_generic(shape):
    rng = np.random.default_rng(sum(shape))
    n = 60
    leaf = rng.random((n,) + shape) ** 4
    adj, rej = treebh_regular(leaf, 0.1)
    for i in range(n):
        def fam(prefix, values):
            if values.ndim == 1:
                return tuple(Node(Hypothesis(".".join(map(str, prefix + (j,))), float(v)))
                             for j, v in enumerate(values))
            return tuple(Node(Hypothesis(".".join(map(str, prefix + (j,)))), fam(prefix + (j,), v))
                         for j, v in enumerate(values))
        tree = HypothesisTree(fam((), leaf[i]))
        res = treebh(tree, 0.1)
        leaves = [r for r, node in zip(res, tree.iter_nodes()) if node.is_leaf]
        assert [r.adjusted_p for r in leaves] == adj[i].ravel().tolist()
        assert [r.rejected for r in leaves] == rej[i].ravel().tolist()
