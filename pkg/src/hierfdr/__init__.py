"""Multiplicity adjustment for families and trees of hypotheses."""

from .errors import HierFdrError, InvariantError, RecordError, TreeFormatError
from .flat import (
    bh_adjust,
    bonferroni_adjust,
    by_adjust,
    expected_false_discoveries,
    reject_at_level,
)
from .model import (
    Hypothesis,
    HypothesisTree,
    Node,
    parse_tree,
    serialize_results,
    tree_from_pvalues,
    validate_tree,
)
from .stats import (
    ContingencyTable2x2,
    GroupSummary,
    SelectedIntervalSpec,
    chi_square_2x2,
    fcr_intervals,
    fcr_level,
    normal_cdf,
    normal_quantile,
    replication_outcome,
    welch_t,
)
from .tree import AdjustmentResult, node_p, treebh, turned_off_branches

__all__ = [
    "AdjustmentResult", "ContingencyTable2x2", "GroupSummary", "HierFdrError", "Hypothesis",
    "HypothesisTree", "InvariantError", "Node", "RecordError", "SelectedIntervalSpec",
    "TreeFormatError", "bh_adjust", "bonferroni_adjust", "by_adjust", "chi_square_2x2",
    "expected_false_discoveries", "fcr_intervals", "fcr_level", "node_p", "normal_cdf",
    "normal_quantile", "parse_tree", "reject_at_level", "replication_outcome",
    "serialize_results", "tree_from_pvalues", "treebh", "turned_off_branches",
    "validate_tree", "welch_t",
]
