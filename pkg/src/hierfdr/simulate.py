"""Seeded Monte Carlo checks of FDR, power and replicability.

Generator model (a harness choice, not taken from any dataset):

* leaves of a regular tree of shape ``tree_shape`` are null or non-null;
  ``round(signal_fraction * n_leaves)`` of them are non-null, either packed
  into as few branches as possible (``clustered``) or spread uniformly
  (``scattered``);
* each study draws ``Z ~ N(0, 1)`` per leaf and reports the one-sided
  ``p = 1 - Phi(Z + effect)`` for non-nulls and ``1 - Phi(Z)`` (uniform) for
  nulls; non-null effects point in the positive direction, null directions
  are fair coin flips;
* internal nodes carry no p-value of their own (Simes combination applies).

Every replication draws from its own Philox stream keyed by ``seed`` with the
replication index and stream purpose written into the counter, so results do
not depend on how replications are spread over threads.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
from collections.abc import Mapping
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy.special import ndtr

from .errors import HierFdrError
from .flat import bh_adjust_array
from .model import Hypothesis, HypothesisTree, Node
from .stats import ContingencyTable2x2
from .tree import treebh_regular

METHODS = ("unadjusted", "bonferroni", "bh", "treebh")
CLUSTERING = ("clustered", "scattered")

_TRUTH_STREAM = 0
ORIGINAL_STUDY = 1
REPLICATION_STUDY = 2
_CHUNK = 512
_MASK64 = (1 << 64) - 1

GENERATOR_NOTE = (
    "generator (harness decision): one-sided z model, null p ~ U(0,1), "
    "non-null p = 1 - Phi(Z + effect), non-null direction positive, null direction random; "
    "internal nodes Simes-combined; FDR and power measured over leaves"
)


@dataclass(frozen=True)
class SimulationConfig:
    tree_shape: tuple[int, ...] = (3, 7)
    signal_fraction: float = 0.1
    clustering: str = "clustered"
    effect: float = 3.0
    q: float = 0.05
    replications: int = 1000
    seed: int = 0

    def __post_init__(self) -> None:
        shape = tuple(self.tree_shape)
        object.__setattr__(self, "tree_shape", shape)
        if not shape or any(isinstance(s, bool) or not isinstance(s, int) or s < 1 for s in shape):
            raise HierFdrError(f"tree_shape must be a non-empty list of sizes >= 1, got {list(shape)}")
        if not 0.0 <= self.signal_fraction < 1.0:
            raise HierFdrError(f"signal_fraction must lie in [0, 1), got {self.signal_fraction!r}")
        if self.clustering not in CLUSTERING:
            raise HierFdrError(f"clustering must be one of {CLUSTERING}, got {self.clustering!r}")
        if not (math.isfinite(self.effect) and self.effect >= 0.0):
            raise HierFdrError(f"effect must be finite and >= 0, got {self.effect!r}")
        if not 0.0 < self.q < 1.0:
            raise HierFdrError(f"q={self.q!r} outside (0, 1)")
        if isinstance(self.replications, bool) or not isinstance(self.replications, int) \
                or self.replications < 1:
            raise HierFdrError(f"replications must be an integer >= 1, got {self.replications!r}")
        if isinstance(self.seed, bool) or not isinstance(self.seed, int):
            raise HierFdrError(f"seed must be an integer, got {self.seed!r}")

    @property
    def n_leaves(self) -> int:
        return math.prod(self.tree_shape)

    @property
    def n_signals(self) -> int:
        return int(round(self.signal_fraction * self.n_leaves))

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any]) -> SimulationConfig:
        known = {f for f in cls.__dataclass_fields__}
        extra = set(doc) - known
        if extra:
            raise HierFdrError(f"unknown simulation config keys: {sorted(extra)}")
        kwargs = dict(doc)
        if "tree_shape" in kwargs:
            if not isinstance(kwargs["tree_shape"], list):
                raise HierFdrError("tree_shape must be a list of family sizes")
            kwargs["tree_shape"] = tuple(kwargs["tree_shape"])
        for key in ("signal_fraction", "effect", "q"):
            if key in kwargs and (isinstance(kwargs[key], bool)
                                  or not isinstance(kwargs[key], (int, float))):
                raise HierFdrError(f"{key} must be a number")
            if key in kwargs:
                kwargs[key] = float(kwargs[key])
        return cls(**kwargs)

    @classmethod
    def from_json(cls, text: str) -> SimulationConfig:
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise HierFdrError(f"malformed simulation config: {exc}") from None
        if not isinstance(doc, dict):
            raise HierFdrError("simulation config must be a JSON object")
        return cls.from_dict(doc)

    def to_dict(self) -> dict[str, Any]:
        return {
            "tree_shape": list(self.tree_shape),
            "signal_fraction": self.signal_fraction,
            "clustering": self.clustering,
            "effect": self.effect,
            "q": self.q,
            "replications": self.replications,
            "seed": self.seed,
        }


def substream(seed: int, rep_index: int, stream: int) -> np.random.Generator:
    """Independent generator for one (replication, purpose) pair."""
    bitgen = np.random.Philox(key=seed & _MASK64, counter=[0, 0, stream, rep_index])
    return np.random.Generator(bitgen)


def _truth_mask(config: SimulationConfig, rng: np.random.Generator) -> np.ndarray:
    n_leaves, k = config.n_leaves, config.n_signals
    truth = np.zeros(n_leaves, dtype=bool)
    if k == 0:
        return truth
    if config.clustering == "scattered" or len(config.tree_shape) == 1:
        truth[rng.permutation(n_leaves)[:k]] = True
        return truth
    # Shuffle blocks at every level independently per parent, then fill the
    # first k leaves of the shuffled order: signals occupy as few branches as possible.
    order = np.arange(n_leaves)
    prefix = 1
    for size in config.tree_shape:
        block = order.reshape(prefix, size, -1)
        perm = np.argsort(rng.random((prefix, size)), axis=1)
        order = np.take_along_axis(block, perm[:, :, None], axis=1).ravel()
        prefix *= size
    truth[order[:k]] = True
    return truth


def _draw_study(config: SimulationConfig, truth: np.ndarray, rng: np.random.Generator
                ) -> tuple[np.ndarray, np.ndarray]:
    z = rng.standard_normal(truth.size)
    coin = rng.random(truth.size) < 0.5
    p = ndtr(-(z + config.effect * truth))
    positive = truth | coin
    return p, positive


@dataclass
class Batch:
    """Leaf-level draws for replications ``[start, stop)``; arrays are ``(n, n_leaves)``."""

    truth: np.ndarray
    p: dict[int, np.ndarray]
    positive: dict[int, np.ndarray]


def draw_batch(config: SimulationConfig, start: int, stop: int,
               studies: tuple[int, ...] = (ORIGINAL_STUDY,)) -> Batch:
    n, n_leaves = stop - start, config.n_leaves
    truth = np.empty((n, n_leaves), dtype=bool)
    p = {s: np.empty((n, n_leaves)) for s in studies}
    positive = {s: np.empty((n, n_leaves), dtype=bool) for s in studies}
    for i, rep in enumerate(range(start, stop)):
        truth[i] = _truth_mask(config, substream(config.seed, rep, _TRUTH_STREAM))
        for s in studies:
            p[s][i], positive[s][i] = _draw_study(config, truth[i], substream(config.seed, rep, s))
    return Batch(truth, p, positive)


def generate_instance(config: SimulationConfig, rep_index: int,
                      study: int = ORIGINAL_STUDY) -> HypothesisTree:
    """One simulated study as a hypothesis tree.

    Ids are materialized paths (``"1.2"``); leaves carry p, direction and
    truth; internal nodes carry no p-value.  Deterministic in
    ``(config.seed, rep_index, study)``.
    """
    if rep_index < 0:
        raise HierFdrError("rep_index must be >= 0")
    batch = draw_batch(config, rep_index, rep_index + 1, (study,))
    p, positive, truth = batch.p[study][0].tolist(), batch.positive[study][0].tolist(), batch.truth[0].tolist()
    shape = config.tree_shape

    leaf = iter(range(config.n_leaves))

    def build_level(prefix: tuple[int, ...]) -> tuple[Node, ...]:
        # Depth equals len(tree_shape), which is a handful of levels.
        depth = len(prefix)
        out = []
        for j in range(shape[depth]):
            pos = prefix + (j + 1,)
            node_id = ".".join(map(str, pos))
            if depth == len(shape) - 1:
                i = next(leaf)
                hyp = Hypothesis(node_id, p[i], "positive" if positive[i] else "negative",
                                 truth="non-null" if truth[i] else "null")
                out.append(Node(hyp))
            else:
                out.append(Node(Hypothesis(node_id), build_level(pos)))
        return tuple(out)

    return HypothesisTree(build_level(()), config.q)


def _rejections(config: SimulationConfig, p: np.ndarray) -> dict[str, np.ndarray]:
    q, n_leaves = config.q, config.n_leaves
    _, tree_rej = treebh_regular(p.reshape((p.shape[0],) + config.tree_shape), q)
    return {
        "unadjusted": p <= q,
        "bonferroni": np.minimum(n_leaves * p, 1.0) <= q,
        "bh": bh_adjust_array(p) <= q,
        "treebh": tree_rej.reshape(p.shape),
    }


def _chunk_metrics(config: SimulationConfig, start: int, stop: int, replication: bool
                   ) -> dict[str, np.ndarray]:
    studies = (ORIGINAL_STUDY, REPLICATION_STUDY) if replication else (ORIGINAL_STUDY,)
    batch = draw_batch(config, start, stop, studies)
    p = batch.p[ORIGINAL_STUDY]
    truth = batch.truth
    n_signal = truth.sum(axis=1)
    out: dict[str, np.ndarray] = {}
    if replication:
        replicated = ((p <= config.q) & (batch.p[REPLICATION_STUDY] <= config.q)
                      & (batch.positive[ORIGINAL_STUDY] == batch.positive[REPLICATION_STUDY]))
    for method, rej in _rejections(config, p).items():
        total = rej.sum(axis=1)
        false = (rej & ~truth).sum(axis=1)
        out[f"{method}.rejections"] = total
        out[f"{method}.fdp"] = false / np.maximum(total, 1)
        with np.errstate(invalid="ignore", divide="ignore"):
            out[f"{method}.tpp"] = (rej & truth).sum(axis=1) / n_signal
        if replication:
            out[f"{method}.a"] = (rej & replicated).sum(axis=1)
            out[f"{method}.b"] = (rej & ~replicated).sum(axis=1)
            out[f"{method}.c"] = (~rej & replicated).sum(axis=1)
            out[f"{method}.d"] = (~rej & ~replicated).sum(axis=1)
    return out


def thread_count() -> int:
    """Worker threads for simulations, capped by ``HIERFDR_THREADS``."""
    n = os.cpu_count() or 1
    cap = os.environ.get("HIERFDR_THREADS")
    if cap:
        try:
            n = min(n, max(1, int(cap)))
        except ValueError:
            raise HierFdrError(f"HIERFDR_THREADS must be an integer, got {cap!r}") from None
    return n


@dataclass(frozen=True)
class Estimate:
    mean: float
    se: float | None

    def to_dict(self) -> dict[str, float | None]:
        return {"mean": self.mean, "se": self.se}


def _estimate(values: np.ndarray) -> Estimate:
    vals = values.tolist()
    n = len(vals)
    mean = math.fsum(vals) / n
    if n < 2:
        return Estimate(mean, None)
    var = math.fsum((v - mean) ** 2 for v in vals) / (n - 1)
    return Estimate(mean, math.sqrt(var / n))


def _ratio_terms(num: np.ndarray, den: np.ndarray) -> tuple[float, np.ndarray] | None:
    """Pooled ratio sum(num)/sum(den) and its per-replication linearization."""
    total = int(den.sum())
    if total == 0:
        return None
    ratio = int(num.sum()) / total
    return ratio, (num - ratio * den) / (total / den.size)


def _ratio_estimate(num: np.ndarray, den: np.ndarray) -> Estimate | None:
    terms = _ratio_terms(num, den)
    if terms is None:
        return None
    ratio, lin = terms
    spread = _estimate(lin)
    return Estimate(ratio, spread.se)


@dataclass(frozen=True)
class MethodSummary:
    fdr: Estimate
    power: Estimate | None
    mean_rejections: float
    replication_table: ContingencyTable2x2 | None = None
    replication_rate: Estimate | None = None

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "empirical_fdr": self.fdr.to_dict(),
            "power": None if self.power is None else self.power.to_dict(),
            "mean_rejections": self.mean_rejections,
        }
        if self.replication_table is not None:
            t = self.replication_table
            out["replication_table"] = t.rows()
            out["replication_rate"] = (None if self.replication_rate is None
                                       else self.replication_rate.to_dict())
        return out


@dataclass
class SimulationReport:
    config: SimulationConfig
    methods: dict[str, MethodSummary]
    per_rep: dict[str, np.ndarray] = field(repr=False, default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return {
            "generator": GENERATOR_NOTE,
            "config": self.config.to_dict(),
            "methods": {m: s.to_dict() for m, s in self.methods.items()},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def to_text(self) -> str:
        c = self.config
        lines = [
            "simulation report",
            GENERATOR_NOTE,
            f"shape={list(c.tree_shape)} leaves={c.n_leaves} signals={c.n_signals} "
            f"({c.clustering}) effect={c.effect:g} q={c.q:g} replications={c.replications} seed={c.seed}",
            "",
            f"{'method':<11} {'FDR':>8} {'(se)':>8} {'power':>8} {'(se)':>8} {'rejections':>10}",
        ]
        for name, s in self.methods.items():
            power = "n/a" if s.power is None else f"{s.power.mean:.4f}"
            power_se = "" if s.power is None or s.power.se is None else f"{s.power.se:.4f}"
            fdr_se = "" if s.fdr.se is None else f"{s.fdr.se:.4f}"
            lines.append(f"{name:<11} {s.fdr.mean:>8.4f} {fdr_se:>8} {power:>8} {power_se:>8}"
                         f" {s.mean_rejections:>10.3f}")
        if any(s.replication_table is not None for s in self.methods.values()):
            lines += ["", "replication (rows: significant yes/no; cols: replicated yes/no)"]
            for name, s in self.methods.items():
                t = s.replication_table
                rate = s.replication_rate
                rate_txt = "n/a" if rate is None else (
                    f"{rate.mean:.4f}" + ("" if rate.se is None else f" (se {rate.se:.4f})"))
                lines.append(f"{name:<11} [[{t.a}, {t.b}], [{t.c}, {t.d}]]  "
                             f"replication rate among significant = {rate_txt}")
        return "\n".join(lines) + "\n"

    def per_rep_csv(self) -> str:
        """Per-replication raw results, one row per replication, for external plotting."""
        keys = sorted(self.per_rep)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["rep", *keys])
        cols = [self.per_rep[k].tolist() for k in keys]
        for i in range(self.config.replications):
            w.writerow([i, *("" if isinstance(col[i], float) and math.isnan(col[i]) else repr(col[i])
                             for col in cols)])
        return buf.getvalue()


def _run(config: SimulationConfig, threads: int | None, replication: bool) -> SimulationReport:
    threads = thread_count() if threads is None else max(1, threads)
    bounds = [(s, min(s + _CHUNK, config.replications)) for s in range(0, config.replications, _CHUNK)]
    if threads == 1 or len(bounds) == 1:
        parts = [_chunk_metrics(config, a, b, replication) for a, b in bounds]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda ab: _chunk_metrics(config, ab[0], ab[1], replication), bounds))
    per_rep = {k: np.concatenate([part[k] for part in parts]) for k in parts[0]}

    methods: dict[str, MethodSummary] = {}
    for m in METHODS:
        power = None if config.n_signals == 0 else _estimate(per_rep[f"{m}.tpp"])
        summary = MethodSummary(
            fdr=_estimate(per_rep[f"{m}.fdp"]),
            power=power,
            mean_rejections=math.fsum(per_rep[f"{m}.rejections"].tolist()) / config.replications,
        )
        if replication:
            a, b, c, d = (per_rep[f"{m}.{x}"] for x in "abcd")
            table = ContingencyTable2x2(int(a.sum()), int(b.sum()), int(c.sum()), int(d.sum()))
            summary = MethodSummary(summary.fdr, summary.power, summary.mean_rejections,
                                    table, _ratio_estimate(a, a + b))
        methods[m] = summary
    return SimulationReport(config, methods, per_rep)


def run_fdr_experiment(config: SimulationConfig, threads: int | None = None) -> SimulationReport:
    """Empirical leaf-level FDR and power of each method over ``config.replications`` runs.

    FDP per run is ``false rejections / max(1, rejections)``; power is the
    rejected share of non-null leaves and is ``None`` when there are none.
    """
    return _run(config, threads, replication=False)


def run_replication_experiment(config: SimulationConfig, threads: int | None = None) -> SimulationReport:
    """Original + replication study pairs sharing truth flags.

    Each leaf is classified by whether the method rejects it in the original
    study and whether it replicates (both p <= q, same direction).  The
    report also carries the FDR/power figures of the original study.
    """
    return _run(config, threads, replication=True)


def replication_rate_difference(report: SimulationReport, method: str, baseline: str) -> Estimate:
    """Replication rate among ``method``-significant results minus the baseline's, with MC se."""
    try:
        a1, b1 = report.per_rep[f"{method}.a"], report.per_rep[f"{method}.b"]
        a2, b2 = report.per_rep[f"{baseline}.a"], report.per_rep[f"{baseline}.b"]
    except KeyError:
        raise HierFdrError("report has no replication data for these methods") from None
    t1, t2 = _ratio_terms(a1, a1 + b1), _ratio_terms(a2, a2 + b2)
    if t1 is None or t2 is None:
        raise HierFdrError("no significant results for one of the methods")
    diff = _estimate(t1[1] - t2[1])
    return Estimate(t1[0] - t2[0], diff.se)
