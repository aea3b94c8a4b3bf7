"""Description lengths, in bits, for graphs, CPT representations and data.

The per-parameter cost is ``0.5 * log2(N)``, taken as 0 when ``N <= 1``.
The description of the variable set itself is the same for every candidate
and is left out of all totals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .data import Dataset, FamilyCounts, family_counts
from .errors import EmptyDataset, KOutOfRange
from .model import BayesianNetwork, Dag, DecisionTree, DefaultTable, FullTable, Leaf, LocalStructure


@dataclass(frozen=True)
class FamilyScore:
    dl_structure: float
    dl_params: float
    dl_data: float

    @property
    def total(self) -> float:
        return self.dl_structure + self.dl_params + self.dl_data


@dataclass(frozen=True)
class NetworkScore:
    dl_graph: float
    families: tuple[FamilyScore, ...]

    @property
    def total(self) -> float:
        return self.dl_graph + sum(f.total for f in self.families)


def half_log2(n_rows: int) -> float:
    return 0.5 * math.log2(n_rows) if n_rows > 1 else 0.0


def param_bits(n_partitions: int, child_card: int, n_rows: int) -> float:
    return n_partitions * (child_card - 1) * half_log2(n_rows)


def log2_binomial(m: int, k: int) -> float:
    if not 0 <= k <= m:
        raise ValueError(f"binomial({m}, {k}) undefined")
    return float((gammaln(m + 1) - gammaln(k + 1) - gammaln(m - k + 1)) / math.log(2))


def dl_graph(dag: Dag, n: int | None = None) -> float:
    n = len(dag) if n is None else n
    if n <= 1:
        return 0.0
    return sum(1 + len(ps) for ps in dag.parents) * math.log2(n)


def dl_table_params(child_card: int, parent_cards, n_rows: int) -> float:
    return param_bits(math.prod(parent_cards), child_card, n_rows)


def dl_default_structure(child_card: int, parent_cards, k: int, n_rows: int) -> tuple[float, float]:
    """(book-keeping + row-selection bits, parameter bits) of a default table with ``k`` explicit rows."""
    m = math.prod(parent_cards)
    if not 0 <= k <= max(m - 1, 0):
        raise KOutOfRange(f"k={k} explicit rows outside [0, {m - 1}]")
    structure = math.log2(m) + log2_binomial(m, k)
    return structure, param_bits(k + 1, child_card, n_rows)


def dl_tree_structure(tree: DecisionTree | object, n_parents: int | None = None, depth: int = 0) -> float:
    """Bits for the tree shape: 1 per leaf, ``1 + log2(|parents| - depth)`` per test."""
    if isinstance(tree, DecisionTree):
        return dl_tree_structure(tree.root, len(tree.parent_cards), depth)
    if isinstance(tree, Leaf):
        return 1.0
    return (
        1.0
        + math.log2(n_parents - depth)
        + sum(dl_tree_structure(c, n_parents, depth + 1) for c in tree.children)
    )


def structure_bits(ls: LocalStructure) -> float:
    if isinstance(ls, FullTable):
        return 0.0
    if isinstance(ls, DefaultTable):
        m = math.prod(ls.parent_cards)
        return math.log2(m) + log2_binomial(m, ls.k)
    return dl_tree_structure(ls)


def nlogn_entropy(counts: np.ndarray) -> float:
    """Sum over rows of ``n_r * H(row)`` in bits, i.e. the ML code length of the data."""
    c = np.asarray(counts, dtype=float)
    if c.ndim == 1:
        c = c[None, :]
    row = c.sum(axis=1)
    pos = c > 0
    cell = np.where(pos, c * np.log2(np.where(pos, c, 1.0)), 0.0).sum()
    rpos = row > 0
    rows = np.where(rpos, row * np.log2(np.where(rpos, row, 1.0)), 0.0).sum()
    return max(float(rows - cell), 0.0)


def dl_data(counts, params) -> float:
    c = counts.counts if isinstance(counts, FamilyCounts) else np.asarray(counts)
    theta = np.asarray(params, dtype=float)
    used = c > 0
    if (theta[used] <= 0).any():
        return math.inf
    return float(-(c[used] * np.log2(theta[used])).sum())


def conditional_entropy(counts) -> float:
    c = counts.counts if isinstance(counts, FamilyCounts) else np.asarray(counts)
    n = c.sum()
    if n <= 0:
        raise EmptyDataset("conditional entropy needs at least one instance")
    return nlogn_entropy(c) / float(n)


def local_bits(ls: LocalStructure, child_card: int, n_rows: int) -> tuple[float, float]:
    """(structure bits, parameter bits) for a local structure."""
    return structure_bits(ls), param_bits(ls.n_partitions, child_card, n_rows)


def score_counts(counts: FamilyCounts, child_card: int, n_rows: int) -> FamilyScore:
    s, p = local_bits(counts.structure, child_card, n_rows)
    return FamilyScore(s, p, nlogn_entropy(counts.counts))


def family_score(ds: Dataset, child: int, parents, ls: LocalStructure | None = None) -> FamilyScore:
    """MDL family score with ML parameters for the given local structure."""
    fc = family_counts(ds, child, parents, ls)
    return score_counts(fc, ds.vars.card(child), ds.n_rows)


def network_score(ds: Dataset, net: BayesianNetwork) -> NetworkScore:
    fams = tuple(
        family_score(ds, i, net.dag.parents[i], net.locals[i]) for i in range(net.n)
    )
    return NetworkScore(dl_graph(net.dag, net.n), fams)


def score_rows(net_or_names, score: NetworkScore, kinds=None) -> list[tuple]:
    """Rows for the score report: node, representation, structure, params, data, total."""
    if isinstance(net_or_names, BayesianNetwork):
        names = net_or_names.vars.names
        kinds = [ls.kind for ls in net_or_names.locals]
    else:
        names = net_or_names
    rows = [
        (name, kind, f.dl_structure, f.dl_params, f.dl_data, f.total)
        for name, kind, f in zip(names, kinds, score.families)
    ]
    return rows


def format_score_tsv(net: BayesianNetwork, score: NetworkScore) -> str:
    lines = ["node\trepresentation\tdlStructure\tdlParams\tdlData\ttotal"]
    for row in score_rows(net, score):
        lines.append("\t".join([row[0], row[1]] + [repr(float(x)) for x in row[2:]]))
    lines.append(f"#graph\t-\t{score.dl_graph!r}\t-\t-\t{score.dl_graph!r}")
    lines.append(f"#total\t-\t-\t-\t-\t{score.total!r}")
    return "\n".join(lines) + "\n"
