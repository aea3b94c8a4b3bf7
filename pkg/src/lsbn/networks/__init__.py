"""Built-in target networks.

``alarm``
    The public ALARM monitoring network (37 variables), converted from its
    BIF description with ``tools/bif_to_json.py``.
``fig1``
    The four-node alarm/burglary/earthquake/sound network. Only the zero row
    (``S`` is never on while the alarm is unarmed) is part of the original
    example; every other number here is a made-up fixture value.
``tree8``
    An 8-variable synthetic network whose CPTs are decision trees. Each tree
    singles out one parent context; all its other leaves share a distribution.
"""

from __future__ import annotations

from importlib import resources

import numpy as np

from ..model import (
    BayesianNetwork,
    Dag,
    DecisionTree,
    DefaultTable,
    FullTable,
    Leaf,
    Split,
    VariableTable,
    iter_configs,
)
from ..netio import parse_network

# P(S=1) per (A, B, E); fixture values apart from the A=0 zeros
FIG1_S_ON = {
    (0, 0, 0): 0.0,
    (0, 0, 1): 0.0,
    (0, 1, 0): 0.0,
    (0, 1, 1): 0.0,
    (1, 0, 0): 0.25,
    (1, 0, 1): 0.6,
    (1, 1, 0): 0.9,
    (1, 1, 1): 0.9,
}
FIG1_ROOTS = {"A": 0.5, "B": 0.3, "E": 0.4}


def _bern(p: float) -> list[float]:
    return [1.0 - p, p]


def fig1_variables() -> VariableTable:
    return VariableTable.binary(["A", "B", "E", "S"])


def fig1_s_table() -> tuple[FullTable, np.ndarray]:
    ls = FullTable((2, 2, 2))
    return ls, np.array([_bern(FIG1_S_ON[c]) for c in iter_configs((2, 2, 2))])


def fig2a_default_table() -> tuple[DefaultTable, np.ndarray]:
    """Every A=1 configuration explicit; the A=0 block shares the default row."""
    rows = tuple(c for c in iter_configs((2, 2, 2)) if c[0] == 1)
    ls = DefaultTable((2, 2, 2), rows)
    theta = np.array([_bern(FIG1_S_ON[r]) for r in ls.rows] + [_bern(0.0)])
    return ls, theta


def fig2b_tree() -> tuple[DecisionTree, np.ndarray]:
    """Root tests A; under A=1 test B; under A=1, B=0 test E."""
    root = Split(0, (Leaf(), Split(1, (Split(2, (Leaf(), Leaf())), Leaf()))))
    ls = DecisionTree((2, 2, 2), root)
    theta = np.array([_bern(0.0), _bern(0.25), _bern(0.6), _bern(0.9)])
    return ls, theta


def fig1_network(cpt: str = "table") -> BayesianNetwork:
    vars = fig1_variables()
    dag = Dag(((), (), (), (0, 1, 2)))
    s = {"table": fig1_s_table, "default": fig2a_default_table, "tree": fig2b_tree}[cpt]()
    locals_ = [FullTable(()), FullTable(()), FullTable(()), s[0]]
    params = [np.array([_bern(FIG1_ROOTS[n])]) for n in "ABE"] + [s[1]]
    return BayesianNetwork(vars, dag, tuple(locals_), tuple(params))


def _chain(depth: int, pos: int = 0):
    """Tree testing parent positions ``pos..depth-1`` along the all-ones path."""
    if pos == depth:
        return Leaf()
    return Split(pos, (Leaf(), _chain(depth, pos + 1)))


def _tree8_spec():
    # (parents, tree over parent positions, P(X=1) per leaf in depth-first order).
    # Four independent roots feed three-parent families; each tree singles out
    # the all-ones context and every other leaf shares one distribution.
    return [
        ((), Leaf(), [0.5]),
        ((), Leaf(), [0.5]),
        ((), Leaf(), [0.5]),
        ((), Leaf(), [0.5]),
        ((0, 1, 2), _chain(3), [0.1, 0.1, 0.1, 0.9]),
        ((1, 2, 3), _chain(3), [0.85, 0.85, 0.85, 0.1]),
        ((0, 3, 4), _chain(3), [0.15, 0.15, 0.15, 0.9]),
        ((4, 5, 6), _chain(3), [0.8, 0.8, 0.8, 0.1]),
    ]


def tree8_network() -> BayesianNetwork:
    spec = _tree8_spec()
    vars = VariableTable.binary([f"X{i}" for i in range(len(spec))])
    parents, locals_, params = [], [], []
    for ps, root, leaves in spec:
        parents.append(ps)
        ls = DecisionTree(tuple(2 for _ in ps), root) if ps else FullTable(())
        locals_.append(ls)
        params.append(np.array([_bern(p) for p in leaves]))
    return BayesianNetwork(vars, Dag(tuple(parents)), tuple(locals_), tuple(params))


BUILTIN = ("alarm", "fig1", "tree8")


def load_builtin(name: str) -> BayesianNetwork:
    if name == "fig1":
        return fig1_network("tree")
    if name == "tree8":
        return tree8_network()
    if name == "alarm":
        text = resources.files(__name__).joinpath("alarm.json").read_text(encoding="utf-8")
        return parse_network(text)
    raise KeyError(f"no built-in network {name!r}; choose from {BUILTIN}")
