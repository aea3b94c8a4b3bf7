"""Maximum-likelihood fitting and the two local-structure learners.

Both learners minimise the family MDL score: structure bits, plus
``0.5 * log2(N) * (card - 1)`` per partition, plus ``N * H(child | partition)``.
A change must gain more than ``IMPROVE_EPS`` bits to count as an improvement,
which keeps floating-point noise from driving greedy decisions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import Dataset, FamilyCounts, family_counts
from .mdl import FamilyScore, dl_tree_structure, half_log2, log2_binomial, score_counts
from .model import (
    DecisionTree,
    DefaultTable,
    FullTable,
    Leaf,
    LocalStructure,
    Split,
    config_from_index,
    config_indices,
)

IMPROVE_EPS = 1e-9
MODES = ("table", "default", "tree")
_ALIASES = {"tab": "table", "table": "table", "def": "default", "default": "default", "tree": "tree"}


def canonical_mode(mode: str) -> str:
    try:
        return _ALIASES[mode]
    except KeyError:
        raise ValueError(f"unknown mode {mode!r}; expected one of {MODES}") from None


@dataclass(frozen=True)
class FittedFamily:
    ls: LocalStructure
    params: np.ndarray
    score: FamilyScore


def fit_params(counts) -> np.ndarray:
    """Per-partition relative frequencies; partitions without data get the uniform vector."""
    c = np.asarray(counts.counts if isinstance(counts, FamilyCounts) else counts, dtype=float)
    tot = c.sum(axis=1, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        theta = np.where(tot > 0, c / np.where(tot > 0, tot, 1.0), 1.0 / c.shape[1])
    return theta


def _row_nh(m: np.ndarray) -> np.ndarray:
    """``n * H`` for each row of a count matrix."""
    m = np.asarray(m, dtype=float)
    row = m.sum(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        cell = np.where(m > 0, m * np.log2(m), 0.0).sum(axis=1)
        rows = np.where(row > 0, row * np.log2(row), 0.0)
    return np.maximum(rows - cell, 0.0)


def _nh(v: np.ndarray) -> float:
    return float(_row_nh(np.asarray(v)[None, :])[0])


class _Family:
    """Columns of one (child, parents) family, extracted once per learner call."""

    def __init__(self, x: np.ndarray, pv: np.ndarray, r: int, pcards: tuple[int, ...], n_rows: int):
        self.x = x.astype(np.int64, copy=False)
        self.pv = pv
        self.r = r
        self.pcards = pcards
        self.n_rows = n_rows
        self.leaf_param_bits = (r - 1) * half_log2(n_rows)

    @classmethod
    def from_dataset(cls, ds: Dataset, child: int, parents) -> "_Family":
        parents = tuple(parents)
        return cls(
            ds.rows[:, child],
            ds.rows[:, parents] if parents else np.zeros((ds.n_rows, 0), dtype=np.int64),
            ds.vars.card(child),
            tuple(ds.vars.card(p) for p in parents),
            ds.n_rows,
        )

    def observed_configs(self):
        """Sorted observed configuration indices and their (m, r) count matrix."""
        idx = config_indices(self.pv, self.pcards)
        uniq, inv = np.unique(idx, return_inverse=True)
        counts = np.bincount(inv.ravel() * self.r + self.x, minlength=uniq.size * self.r)
        return uniq, counts.reshape(uniq.size, self.r)


# ---------------------------------------------------------------------------
# full table


def _table(fam: _Family) -> tuple[FullTable, FamilyScore]:
    ls = FullTable(fam.pcards)
    if fam.x.size == 0:
        dl = 0.0
    elif fam.pcards:
        dl = float(_row_nh(fam.observed_configs()[1]).sum())
    else:
        dl = _nh(np.bincount(fam.x, minlength=fam.r))
    return ls, FamilyScore(0.0, ls.n_partitions * fam.leaf_param_bits, dl)


# ---------------------------------------------------------------------------
# default tables


def _default(fam: _Family) -> tuple[LocalStructure, FamilyScore]:
    if not fam.pcards:
        return _table(fam)
    m_all = math.prod(fam.pcards)
    book = math.log2(m_all)
    if fam.x.size == 0:
        return DefaultTable(fam.pcards, ()), FamilyScore(book, fam.leaf_param_bits, 0.0)
    uniq, counts = fam.observed_configs()
    row_nh = _row_nh(counts)
    explicit = np.zeros(uniq.size, dtype=bool)
    default = counts.sum(axis=0).astype(float)
    default_nh = _nh(default)
    k = 0
    while k + 1 <= m_all - 1:
        cand = np.flatnonzero(~explicit)
        if cand.size == 0:
            break
        rest = default[None, :] - counts[cand]
        delta = (
            log2_binomial(m_all, k + 1)
            - log2_binomial(m_all, k)
            + fam.leaf_param_bits
            + row_nh[cand]
            + _row_nh(rest)
            - default_nh
        )
        best = int(np.argmin(delta))
        if not delta[best] < -IMPROVE_EPS:
            break
        c = cand[best]
        explicit[c] = True
        default = default - counts[c]
        default_nh = _nh(default)
        k += 1
    rows = tuple(config_from_index(int(i), fam.pcards) for i in uniq[explicit])
    ls = DefaultTable(fam.pcards, rows)
    data = float(row_nh[explicit].sum()) + default_nh
    return ls, FamilyScore(book + log2_binomial(m_all, k), (k + 1) * fam.leaf_param_bits, data)


def learn_default_table(ds: Dataset, child: int, parents) -> FittedFamily:
    """Greedy default table: start from the default row alone and keep adding the
    observed configuration whose explicit row lowers the total most."""
    ls, _ = _default(_Family.from_dataset(ds, child, parents))
    return fit_family(ds, child, parents, ls)


# ---------------------------------------------------------------------------
# decision trees


def _split_rows(idx: np.ndarray, vals: np.ndarray, card: int) -> list[np.ndarray]:
    order = np.argsort(vals, kind="stable")
    bounds = np.concatenate(([0], np.cumsum(np.bincount(vals, minlength=card))))
    srt = idx[order]
    return [srt[bounds[v] : bounds[v + 1]] for v in range(card)]


def _grow(fam: _Family, idx: np.ndarray, depth: int, tested: frozenset, trim: bool):
    """Grow below one node; with ``trim`` also collapse subtrees bottom-up.

    Returns ``(node, cost)`` where cost is the subtree's structure + leaf
    parameter + data bits at this depth.
    """
    r = fam.r
    k = len(fam.pcards)
    xs = fam.x[idx]
    cnt = np.bincount(xs, minlength=r)
    leaf_data = _nh(cnt)
    leaf_cost = 1.0 + fam.leaf_param_bits + leaf_data
    n = idx.size
    if n == 0 or cnt.max() == n or len(tested) == k:
        return Leaf(), leaf_cost
    best_p, best_delta = -1, math.inf
    for p in range(k):
        if p in tested:
            continue
        cp = fam.pcards[p]
        joint = np.bincount(fam.pv[idx, p].astype(np.int64) * r + xs, minlength=cp * r).reshape(cp, r)
        delta = math.log2(k - depth) + cp + (cp - 1) * fam.leaf_param_bits + float(_row_nh(joint).sum()) - leaf_data
        if delta < best_delta:
            best_p, best_delta = p, delta
    parts = _split_rows(idx, fam.pv[idx, best_p].astype(np.int64), fam.pcards[best_p])
    children, cost = [], 1.0 + math.log2(k - depth)
    for sub in parts:
        node, c = _grow(fam, sub, depth + 1, tested | {best_p}, trim)
        children.append(node)
        cost += c
    if trim and cost >= leaf_cost - IMPROVE_EPS:
        return Leaf(), leaf_cost
    return Split(best_p, tuple(children)), cost


def _trim(fam: _Family, node, idx: np.ndarray, depth: int):
    cnt = np.bincount(fam.x[idx], minlength=fam.r)
    leaf_cost = 1.0 + fam.leaf_param_bits + _nh(cnt)
    if isinstance(node, Leaf):
        return node, leaf_cost
    k = len(fam.pcards)
    parts = _split_rows(idx, fam.pv[idx, node.var].astype(np.int64), fam.pcards[node.var])
    children, cost = [], 1.0 + math.log2(k - depth)
    for ch, sub in zip(node.children, parts):
        t, c = _trim(fam, ch, sub, depth + 1)
        children.append(t)
        cost += c
    if cost >= leaf_cost - IMPROVE_EPS:
        return Leaf(), leaf_cost
    return Split(node.var, tuple(children)), cost


def _tree(fam: _Family) -> tuple[LocalStructure, FamilyScore]:
    if not fam.pcards:
        return _table(fam)
    root, cost = _grow(fam, np.arange(fam.x.size), 0, frozenset(), trim=True)
    tree = DecisionTree(fam.pcards, root)
    # recompute the data term directly so the score carries no accumulated rounding
    part = tree.partitions(fam.pv)
    counts = np.bincount(part * fam.r + fam.x, minlength=tree.n_leaves * fam.r).reshape(-1, fam.r)
    return tree, FamilyScore(
        dl_tree_structure(tree), tree.n_leaves * fam.leaf_param_bits, float(_row_nh(counts).sum())
    )


def grow_tree(ds: Dataset, child: int, parents) -> DecisionTree:
    """Maximal tree: split every leaf on the parent giving the lowest family score
    until the leaf is empty, pure, or has no untested parents left."""
    fam = _Family.from_dataset(ds, child, parents)
    root, _ = _grow(fam, np.arange(ds.n_rows), 0, frozenset(), trim=False)
    return DecisionTree(fam.pcards, root)


def trim_tree(tree: DecisionTree, ds: Dataset, child: int, parents) -> DecisionTree:
    fam = _Family.from_dataset(ds, child, parents)
    if tree.parent_cards != fam.pcards:
        raise ValueError("tree does not match the family's parents")
    root, _ = _trim(fam, tree.root, np.arange(ds.n_rows), 0)
    return DecisionTree(fam.pcards, root)


# ---------------------------------------------------------------------------
# dispatch

_LEARNERS = {"table": _table, "default": _default, "tree": _tree}


def learn_structure(ds: Dataset, child: int, parents, mode: str) -> tuple[LocalStructure, FamilyScore]:
    """Learned local structure and its family score, without materialising parameters."""
    return _LEARNERS[canonical_mode(mode)](_Family.from_dataset(ds, child, parents))


def fit_family(ds: Dataset, child: int, parents, ls: LocalStructure) -> FittedFamily:
    fc = family_counts(ds, child, parents, ls)
    return FittedFamily(ls, fit_params(fc), score_counts(fc, ds.vars.card(child), ds.n_rows))


def learn_local(ds: Dataset, child: int, parents, mode: str) -> FittedFamily:
    ls, _ = learn_structure(ds, child, parents, mode)
    return fit_family(ds, child, parents, ls)
