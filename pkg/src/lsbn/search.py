"""Greedy hill climbing over DAGs with edge addition, removal and reversal.

The score being minimised is ``dl_graph + sum of family scores``. Family scores
come from a :class:`FamilyScorer`, which relearns the local structure of a
family from scratch and caches the result by ``(node, sorted parents)``.
Because the total decomposes over families, a move is scored by rescoring
only the one or two families it touches.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import IntEnum
from typing import NamedTuple

import numpy as np

from .data import Dataset
from .errors import CyclicGraph, EmptyDataset
from .localfit import IMPROVE_EPS, canonical_mode, fit_family, learn_structure
from .mdl import FamilyScore, NetworkScore, dl_graph
from .model import BayesianNetwork, Dag, LocalStructure, topological_order

log = logging.getLogger(__name__)


class MoveKind(IntEnum):
    ADD = 0
    REMOVE = 1
    REVERSE = 2


class Move(NamedTuple):
    kind: MoveKind
    src: int
    dst: int

    def __str__(self) -> str:
        arrow = {MoveKind.ADD: "add", MoveKind.REMOVE: "remove", MoveKind.REVERSE: "reverse"}[self.kind]
        return f"{arrow}({self.src}->{self.dst})"

    def label(self, names) -> str:
        arrow = {MoveKind.ADD: "add", MoveKind.REMOVE: "remove", MoveKind.REVERSE: "reverse"}[self.kind]
        return f"{arrow}({names[self.src]}->{names[self.dst]})"


class FamilyScorer:
    """Learns and caches ``(local structure, score)`` per ``(node, parent set)``.

    ``objective.family_bits(node, parents, ls, fs)`` maps a learned family to
    the number of bits the search minimises; the default is the MDL total.
    """

    def __init__(self, ds: Dataset, mode: str, objective=None):
        self.ds = ds
        self.mode = canonical_mode(mode)
        self.objective = objective
        self.cache: dict[tuple[int, tuple[int, ...]], tuple[LocalStructure, FamilyScore, float]] = {}
        self.misses = 0

    def entry(self, node: int, parents) -> tuple[LocalStructure, FamilyScore, float]:
        key = (node, tuple(sorted(parents)))
        hit = self.cache.get(key)
        if hit is None:
            self.misses += 1
            ls, fs = learn_structure(self.ds, node, key[1], self.mode)
            bits = fs.total if self.objective is None else self.objective.family_bits(node, key[1], ls, fs)
            hit = (ls, fs, bits)
            self.cache[key] = hit
        return hit

    def bits(self, node: int, parents) -> float:
        return self.entry(node, parents)[2]


@dataclass
class SearchState:
    dag: Dag
    scorer: FamilyScorer
    total: float = field(init=False)

    def __post_init__(self):
        self.total = self.recompute_total()

    @property
    def n(self) -> int:
        return len(self.dag)

    def recompute_total(self) -> float:
        return dl_graph(self.dag, self.n) + sum(
            self.scorer.bits(i, self.dag.parents[i]) for i in range(self.n)
        )


def _reach(dag: Dag) -> list[int]:
    """Bitset of nodes reachable from each node (excluding itself unless on a cycle)."""
    order = topological_order(dag)
    n = len(dag)
    children = [[] for _ in range(n)]
    for i, ps in enumerate(dag.parents):
        for p in ps:
            children[p].append(i)
    reach = [0] * n
    for v in reversed(order):
        bits = 0
        for c in children[v]:
            bits |= (1 << c) | reach[c]
        reach[v] = bits
    return reach


def _reachable_without(dag: Dag, src: int, dst: int) -> bool:
    """Is ``dst`` reachable from ``src`` once the edge src->dst is dropped?"""
    n = len(dag)
    children = [[] for _ in range(n)]
    for i, ps in enumerate(dag.parents):
        for p in ps:
            if not (p == src and i == dst):
                children[p].append(i)
    stack, seen = [src], {src}
    while stack:
        v = stack.pop()
        for c in children[v]:
            if c == dst:
                return True
            if c not in seen:
                seen.add(c)
                stack.append(c)
    return False


def neighbor_moves(dag: Dag, max_parents: int | None = None) -> list[Move]:
    """Every legal add/remove/reverse move, ordered by (kind, src, dst)."""
    n = len(dag)
    reach = _reach(dag)
    moves: list[Move] = []
    for a in range(n):
        for b in range(n):
            if a == b or dag.has_edge(a, b) or dag.has_edge(b, a):
                continue
            if max_parents is not None and len(dag.parents[b]) >= max_parents:
                continue
            if (reach[b] >> a) & 1:
                continue
            moves.append(Move(MoveKind.ADD, a, b))
    for a, b in dag.edges():
        moves.append(Move(MoveKind.REMOVE, a, b))
    for a, b in dag.edges():
        if max_parents is not None and len(dag.parents[a]) >= max_parents:
            continue
        if not _reachable_without(dag, a, b):
            moves.append(Move(MoveKind.REVERSE, a, b))
    moves.sort()
    return moves


def apply_move(dag: Dag, move: Move) -> Dag:
    ps = [list(p) for p in dag.parents]
    a, b = move.src, move.dst
    if move.kind == MoveKind.ADD:
        if a in ps[b]:
            raise ValueError(f"edge {a}->{b} already present")
        ps[b].append(a)
    elif move.kind == MoveKind.REMOVE:
        ps[b].remove(a)
    else:
        ps[b].remove(a)
        ps[a].append(b)
    return Dag(tuple(tuple(sorted(p)) for p in ps))


def touched_families(dag: Dag, move: Move) -> dict[int, tuple[int, ...]]:
    """New parent sets of the families a move changes."""
    a, b = move.src, move.dst
    if move.kind == MoveKind.ADD:
        return {b: tuple(sorted(dag.parents[b] + (a,)))}
    if move.kind == MoveKind.REMOVE:
        return {b: tuple(p for p in dag.parents[b] if p != a)}
    return {
        b: tuple(p for p in dag.parents[b] if p != a),
        a: tuple(sorted(dag.parents[a] + (b,))),
    }


def score_move(state: SearchState, move: Move) -> float:
    """Change in total bits if ``move`` were applied (negative is better)."""
    dag = state.dag
    scorer = state.scorer
    n = state.n
    delta = 0.0
    for node, new_ps in touched_families(dag, move).items():
        delta += scorer.bits(node, new_ps) - scorer.bits(node, dag.parents[node])
    edges = {MoveKind.ADD: 1, MoveKind.REMOVE: -1, MoveKind.REVERSE: 0}[move.kind]
    if n > 1:
        delta += edges * math.log2(n)
    return delta


@dataclass(frozen=True)
class TraceStep:
    iteration: int
    move: Move
    delta: float
    total: float


@dataclass(frozen=True)
class SearchResult:
    network: BayesianNetwork
    score: NetworkScore
    objective_total: float
    trace: tuple[TraceStep, ...]
    dag: Dag
    mode: str


def hill_climb(
    ds: Dataset,
    mode: str = "table",
    max_parents: int | None = None,
    objective=None,
    start: Dag | None = None,
    max_iter: int | None = None,
) -> SearchResult:
    """Greedy search from the empty graph; stops when no move improves the score."""
    if ds.n_rows == 0:
        raise EmptyDataset("cannot learn a network from an empty dataset")
    mode = canonical_mode(mode)
    scorer = FamilyScorer(ds, mode, objective)
    state = SearchState(start or Dag.empty(len(ds.vars)), scorer)
    trace: list[TraceStep] = [TraceStep(0, None, 0.0, state.total)]
    it = 0
    while max_iter is None or it < max_iter:
        best, best_delta = None, -IMPROVE_EPS
        for mv in neighbor_moves(state.dag, max_parents):
            d = score_move(state, mv)
            if d < best_delta:
                best, best_delta = mv, d
        if best is None:
            break
        it += 1
        state.dag = apply_move(state.dag, best)
        state.total = state.recompute_total()
        trace.append(TraceStep(it, best, best_delta, state.total))
        log.debug("iteration %d: %s %.6f -> %.6f", it, best, best_delta, state.total)
    return finish(ds, state.dag, scorer, state.total, trace, mode)


def finish(ds: Dataset, dag: Dag, scorer: FamilyScorer, total: float, trace, mode: str) -> SearchResult:
    fams = []
    for i in range(len(dag)):
        ls, _, _ = scorer.entry(i, dag.parents[i])
        fams.append(fit_family(ds, i, dag.parents[i], ls))
    net = BayesianNetwork(ds.vars, dag, tuple(f.ls for f in fams), tuple(f.params for f in fams))
    score = NetworkScore(dl_graph(dag, len(dag)), tuple(f.score for f in fams))
    return SearchResult(net, score, total, tuple(trace), dag, mode)


def fit_structure(ds: Dataset, dag: Dag, mode: str) -> BayesianNetwork:
    """Relearn local structures and ML parameters for a fixed DAG."""
    scorer = FamilyScorer(ds, mode)
    return finish(ds, dag, scorer, math.nan, [], canonical_mode(mode)).network


def format_trace_tsv(result: SearchResult, names=None) -> str:
    lines = ["iteration\tmove\tdelta_bits\ttotal_bits"]
    for step in result.trace:
        if step.move is None:
            mv = "start"
        else:
            mv = step.move.label(names) if names is not None else str(step.move)
        lines.append(f"{step.iteration}\t{mv}\t{step.delta!r}\t{step.total!r}")
    return "\n".join(lines) + "\n"


def all_dags(n: int) -> list[Dag]:
    """Every DAG on ``n`` labelled nodes (brute force; small n only)."""
    pairs = [(a, b) for a in range(n) for b in range(a + 1, n)]
    out = []
    for states in np.ndindex(*([3] * len(pairs))):
        edges = []
        for (a, b), s in zip(pairs, states):
            if s == 1:
                edges.append((a, b))
            elif s == 2:
                edges.append((b, a))
        try:
            out.append(Dag.from_edges(n, edges))
        except CyclicGraph:
            continue
    return out
