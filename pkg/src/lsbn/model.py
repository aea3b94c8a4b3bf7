"""Variables, DAGs, CPT representations and the probability semantics of a network.

Values are stored as dense 0-based indices in declaration order. A parent
configuration is a tuple of value indices in the order of the node's parent
list; configurations are ordered lexicographically with the last parent
varying fastest, which also defines the configuration index used by
:class:`FullTable`.

Every local structure induces a partition of the parent configurations and
numbers its cells ``0 .. n_partitions - 1``:

* ``FullTable``: the configuration index itself.
* ``DefaultTable``: explicit rows in configuration order, then the default row.
* ``DecisionTree``: leaves in depth-first order, children visited by value.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterator, Sequence, Union

import numpy as np

from .errors import CyclicGraph, InvalidStructure

PROB_TOL = 1e-9


@dataclass(frozen=True)
class VariableTable:
    names: tuple[str, ...]
    values: tuple[tuple[str, ...], ...]

    def __post_init__(self):
        object.__setattr__(self, "names", tuple(self.names))
        object.__setattr__(self, "values", tuple(tuple(v) for v in self.values))
        if len(self.names) != len(self.values):
            raise InvalidStructure("names and value lists differ in length")
        if len(set(self.names)) != len(self.names):
            raise InvalidStructure("variable names must be unique")
        for name, vals in zip(self.names, self.values):
            if len(vals) < 2:
                raise InvalidStructure(f"variable {name!r} needs at least 2 values")
            if len(set(vals)) != len(vals):
                raise InvalidStructure(f"variable {name!r} has duplicate value names")

    @classmethod
    def from_pairs(cls, pairs: Sequence[tuple[str, Sequence[str]]]) -> "VariableTable":
        return cls(tuple(p[0] for p in pairs), tuple(tuple(p[1]) for p in pairs))

    @classmethod
    def binary(cls, names: Sequence[str]) -> "VariableTable":
        return cls(tuple(names), tuple(("0", "1") for _ in names))

    def __len__(self) -> int:
        return len(self.names)

    @cached_property
    def _lookup(self) -> dict[str, int]:
        return {n: i for i, n in enumerate(self.names)}

    @cached_property
    def cards(self) -> tuple[int, ...]:
        return tuple(len(v) for v in self.values)

    def index(self, name: str) -> int:
        try:
            return self._lookup[name]
        except KeyError:
            raise KeyError(f"unknown variable {name!r}") from None

    def card(self, i: int) -> int:
        return len(self.values[i])

    def value_index(self, var: int, value: str) -> int:
        try:
            return self.values[var].index(value)
        except ValueError:
            raise KeyError(f"unknown value {value!r} for {self.names[var]!r}") from None


@dataclass(frozen=True)
class Dag:
    parents: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        object.__setattr__(self, "parents", tuple(tuple(int(p) for p in ps) for ps in self.parents))
        n = len(self.parents)
        for i, ps in enumerate(self.parents):
            if i in ps:
                raise InvalidStructure(f"node {i} is its own parent")
            if len(set(ps)) != len(ps):
                raise InvalidStructure(f"duplicate parent for node {i}")
            if any(p < 0 or p >= n for p in ps):
                raise InvalidStructure(f"parent index out of range for node {i}")
        topological_order(self)

    @classmethod
    def empty(cls, n: int) -> "Dag":
        return cls(tuple(() for _ in range(n)))

    @classmethod
    def from_edges(cls, n: int, edges) -> "Dag":
        parents: list[list[int]] = [[] for _ in range(n)]
        for a, b in edges:
            parents[b].append(a)
        return cls(tuple(tuple(sorted(p)) for p in parents))

    def __len__(self) -> int:
        return len(self.parents)

    @property
    def n(self) -> int:
        return len(self.parents)

    def edges(self) -> list[tuple[int, int]]:
        return sorted((p, i) for i, ps in enumerate(self.parents) for p in ps)

    def has_edge(self, a: int, b: int) -> bool:
        return a in self.parents[b]

    def with_parents(self, node: int, parents: Sequence[int]) -> "Dag":
        ps = list(self.parents)
        ps[node] = tuple(parents)
        return Dag(tuple(ps))


def topological_order(dag: Dag) -> list[int]:
    """Kahn's algorithm; among ready nodes the lowest index goes first."""
    import heapq

    n = len(dag.parents)
    indeg = [len(ps) for ps in dag.parents]
    children: list[list[int]] = [[] for _ in range(n)]
    for i, ps in enumerate(dag.parents):
        for p in ps:
            children[p].append(i)
    ready = [i for i in range(n) if indeg[i] == 0]
    heapq.heapify(ready)
    order = []
    while ready:
        i = heapq.heappop(ready)
        order.append(i)
        for c in children[i]:
            indeg[c] -= 1
            if indeg[c] == 0:
                heapq.heappush(ready, c)
    if len(order) != n:
        raise CyclicGraph("graph contains a directed cycle")
    return order


# ---------------------------------------------------------------------------
# parent configurations


def config_strides(cards: Sequence[int]) -> tuple[int, ...]:
    strides = []
    s = 1
    for c in reversed(cards):
        strides.append(s)
        s *= c
    return tuple(reversed(strides))


def n_configs(cards: Sequence[int]) -> int:
    return math.prod(cards)


def config_index(config: Sequence[int], cards: Sequence[int]) -> int:
    idx = 0
    for v, c in zip(config, cards):
        if not 0 <= v < c:
            raise ValueError(f"value {v} out of range for cardinality {c}")
        idx = idx * c + int(v)
    return idx


def config_from_index(index: int, cards: Sequence[int]) -> tuple[int, ...]:
    out = []
    for c in reversed(cards):
        index, v = divmod(index, c)
        out.append(v)
    return tuple(reversed(out))


def iter_configs(cards: Sequence[int]) -> Iterator[tuple[int, ...]]:
    return itertools.product(*(range(c) for c in cards))


def config_indices(parent_values: np.ndarray, cards: Sequence[int]) -> np.ndarray:
    """Vectorised :func:`config_index` over the rows of an (N, k) array."""
    n = parent_values.shape[0]
    idx = np.zeros(n, dtype=np.int64)
    if math.prod(cards) >= 2**62:
        raise ValueError("parent configuration space too large for int64 indexing")
    for j, c in enumerate(cards):
        idx *= c
        idx += parent_values[:, j]
    return idx


# ---------------------------------------------------------------------------
# local structures


@dataclass(frozen=True)
class FullTable:
    parent_cards: tuple[int, ...]

    kind = "table"

    def __post_init__(self):
        object.__setattr__(self, "parent_cards", tuple(self.parent_cards))

    @property
    def n_partitions(self) -> int:
        return n_configs(self.parent_cards)

    def partition(self, config: Sequence[int]) -> int:
        return config_index(config, self.parent_cards)

    def partitions(self, parent_values: np.ndarray) -> np.ndarray:
        return config_indices(parent_values, self.parent_cards)


@dataclass(frozen=True)
class DefaultTable:
    """Explicit rows plus one default row shared by every unlisted configuration."""

    parent_cards: tuple[int, ...]
    rows: tuple[tuple[int, ...], ...]

    kind = "default"

    def __post_init__(self):
        cards = tuple(self.parent_cards)
        object.__setattr__(self, "parent_cards", cards)
        rows = [tuple(int(v) for v in r) for r in self.rows]
        for r in rows:
            if len(r) != len(cards):
                raise InvalidStructure("default-table row must assign every parent")
            config_index(r, cards)
        if len(set(rows)) != len(rows):
            raise InvalidStructure("default-table rows must be distinct")
        if len(rows) >= n_configs(cards) and n_configs(cards) > 0 and cards:
            raise InvalidStructure("every configuration is explicit; use a FullTable")
        if not cards and rows:
            raise InvalidStructure("a parentless default table has no explicit rows")
        rows.sort(key=lambda r: config_index(r, cards))
        object.__setattr__(self, "rows", tuple(rows))

    @property
    def k(self) -> int:
        return len(self.rows)

    @property
    def n_partitions(self) -> int:
        return len(self.rows) + 1

    @cached_property
    def _row_ids(self) -> dict[tuple[int, ...], int]:
        return {r: i for i, r in enumerate(self.rows)}

    @cached_property
    def _sorted_indices(self) -> np.ndarray:
        return np.array([config_index(r, self.parent_cards) for r in self.rows], dtype=np.int64)

    def partition(self, config: Sequence[int]) -> int:
        config_index(config, self.parent_cards)
        return self._row_ids.get(tuple(int(v) for v in config), len(self.rows))

    def partitions(self, parent_values: np.ndarray) -> np.ndarray:
        idx = config_indices(parent_values, self.parent_cards)
        keys = self._sorted_indices
        if keys.size == 0:
            return np.zeros(idx.shape[0], dtype=np.int64)
        pos = np.searchsorted(keys, idx)
        pos_c = np.minimum(pos, keys.size - 1)
        hit = keys[pos_c] == idx
        return np.where(hit, pos_c, keys.size).astype(np.int64)


@dataclass(frozen=True)
class Leaf:
    pass


@dataclass(frozen=True)
class Split:
    """Internal tree node testing parent ``var`` (a position in the parent list)."""

    var: int
    children: tuple["TreeNode", ...]


TreeNode = Union[Leaf, Split]


@dataclass(frozen=True)
class DecisionTree:
    parent_cards: tuple[int, ...]
    root: TreeNode = field(default_factory=Leaf)

    kind = "tree"

    def __post_init__(self):
        object.__setattr__(self, "parent_cards", tuple(self.parent_cards))
        self._check(self.root, frozenset())

    def _check(self, node: TreeNode, tested: frozenset):
        if isinstance(node, Leaf):
            return
        if not 0 <= node.var < len(self.parent_cards):
            raise InvalidStructure(f"tree tests unknown parent position {node.var}")
        if node.var in tested:
            raise InvalidStructure(f"parent {node.var} tested twice on one path")
        if len(node.children) != self.parent_cards[node.var]:
            raise InvalidStructure("internal node needs one child per value of its test")
        for ch in node.children:
            self._check(ch, tested | {node.var})

    @cached_property
    def _flat(self):
        # node arrays for vectorised descent; leaves numbered depth-first
        var, base, leaf_id, child_table = [], [], [], []

        def visit(node) -> int:
            me = len(var)
            var.append(-1)
            base.append(-1)
            leaf_id.append(-1)
            if isinstance(node, Leaf):
                leaf_id[me] = visit.leaves
                visit.leaves += 1
                return me
            var[me] = node.var
            start = len(child_table)
            base[me] = start
            child_table.extend([-1] * len(node.children))
            for v, ch in enumerate(node.children):
                child_table[start + v] = visit(ch)
            return me

        visit.leaves = 0
        visit(self.root)
        return (
            np.array(var, dtype=np.int64),
            np.array(base, dtype=np.int64),
            np.array(leaf_id, dtype=np.int64),
            np.array(child_table, dtype=np.int64),
            visit.leaves,
        )

    @property
    def n_partitions(self) -> int:
        return self._flat[4]

    n_leaves = n_partitions

    def partition(self, config: Sequence[int]) -> int:
        config_index(config, self.parent_cards)
        var, base, leaf_id, table, _ = self._flat
        cur = 0
        while var[cur] >= 0:
            cur = table[base[cur] + config[var[cur]]]
        return int(leaf_id[cur])

    def partitions(self, parent_values: np.ndarray) -> np.ndarray:
        var, base, leaf_id, table, _ = self._flat
        n = parent_values.shape[0]
        cur = np.zeros(n, dtype=np.int64)
        rows = np.arange(n)
        for _ in range(len(self.parent_cards) + 1):
            v = var[cur]
            inner = v >= 0
            if not inner.any():
                break
            r = rows[inner]
            cur[inner] = table[base[cur[inner]] + parent_values[r, v[inner]]]
        return leaf_id[cur]

    def depth(self) -> int:
        def d(node):
            return 0 if isinstance(node, Leaf) else 1 + max(d(c) for c in node.children)

        return d(self.root)


LocalStructure = Union[FullTable, DefaultTable, DecisionTree]


def partition_of(ls: LocalStructure, parent_config: Sequence[int]) -> int:
    return ls.partition(parent_config)


def single_partition(ls: LocalStructure) -> bool:
    return ls.n_partitions == 1


# ---------------------------------------------------------------------------
# networks


@dataclass(frozen=True)
class BayesianNetwork:
    vars: VariableTable
    dag: Dag
    locals: tuple
    params: tuple

    def __post_init__(self):
        n = len(self.vars)
        if len(self.dag) != n or len(self.locals) != n or len(self.params) != n:
            raise InvalidStructure("vars, dag, locals and params must all cover every node")
        frozen = []
        for i in range(n):
            ls = self.locals[i]
            pcards = tuple(self.vars.card(p) for p in self.dag.parents[i])
            if ls.parent_cards != pcards:
                raise InvalidStructure(f"local structure of {self.vars.names[i]!r} does not match its parents")
            theta = np.array(self.params[i], dtype=float)
            if theta.shape != (ls.n_partitions, self.vars.card(i)):
                raise InvalidStructure(
                    f"parameters of {self.vars.names[i]!r} have shape {theta.shape}, "
                    f"expected {(ls.n_partitions, self.vars.card(i))}"
                )
            if (theta < 0).any() or (theta > 1).any() or not np.isfinite(theta).all():
                raise InvalidStructure(f"parameters of {self.vars.names[i]!r} outside [0, 1]")
            if (np.abs(theta.sum(axis=1) - 1.0) > PROB_TOL).any():
                raise InvalidStructure(f"a distribution of {self.vars.names[i]!r} does not sum to 1")
            theta.setflags(write=False)
            frozen.append(theta)
        object.__setattr__(self, "locals", tuple(self.locals))
        object.__setattr__(self, "params", tuple(frozen))

    @property
    def n(self) -> int:
        return len(self.vars)

    @cached_property
    def order(self) -> list[int]:
        return topological_order(self.dag)

    def parent_config(self, node: int, u: Sequence[int]) -> tuple[int, ...]:
        return tuple(u[p] for p in self.dag.parents[node])


def conditional_dist(net: BayesianNetwork, node: int, parent_config: Sequence[int]) -> np.ndarray:
    return net.params[node][net.locals[node].partition(parent_config)]


def joint_log_prob(net: BayesianNetwork, u: Sequence[int]) -> float:
    """log2 P_B(u) as a product of the network's conditionals; ``-inf`` for impossible states."""
    total = 0.0
    for i in range(net.n):
        p = conditional_dist(net, i, net.parent_config(i, u))[u[i]]
        if p <= 0.0:
            return -math.inf
        total += math.log2(p)
    return total


def log_prob_rows(net: BayesianNetwork, rows: np.ndarray) -> np.ndarray:
    """Vectorised :func:`joint_log_prob` over an (N, n) array of value indices."""
    rows = np.asarray(rows)
    out = np.zeros(rows.shape[0])
    with np.errstate(divide="ignore"):
        for i in range(net.n):
            ps = net.dag.parents[i]
            part = net.locals[i].partitions(rows[:, ps]) if ps else np.zeros(rows.shape[0], dtype=np.int64)
            out += np.log2(net.params[i][part, rows[:, i]])
    return out


def actual_param_count(obj, child_card: int | None = None) -> int:
    """Free parameters: partitions times (child cardinality - 1).

    Accepts a whole network or a single ``(local_structure, child_card)`` pair.
    """
    if isinstance(obj, BayesianNetwork):
        return sum(obj.locals[i].n_partitions * (obj.vars.card(i) - 1) for i in range(obj.n))
    if child_card is None:
        raise TypeError("child_card is required for a single local structure")
    return obj.n_partitions * (child_card - 1)


def tabular_complexity(dag: Dag, vars: VariableTable) -> int:
    return sum(
        math.prod(vars.card(p) for p in dag.parents[i]) * (vars.card(i) - 1) for i in range(len(vars))
    )


def uniform_network(vars: VariableTable, dag: Dag | None = None) -> BayesianNetwork:
    dag = dag or Dag.empty(len(vars))
    locals_, params = [], []
    for i in range(len(vars)):
        ls = FullTable(tuple(vars.card(p) for p in dag.parents[i]))
        locals_.append(ls)
        params.append(np.full((ls.n_partitions, vars.card(i)), 1.0 / vars.card(i)))
    return BayesianNetwork(vars, dag, tuple(locals_), tuple(params))
