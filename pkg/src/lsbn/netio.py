"""Reading and writing networks as JSON documents.

Layout::

    {"variables": [{"name": "A", "values": ["0", "1"]}, ...],
     "nodes": [{"name": "S", "parents": ["A", "B"], "cpt": {...}}, ...]}

``cpt`` is one of

* ``{"type": "table", "rows": [{"config": [...], "dist": [...]}, ...]}``
* ``{"type": "default", "rows": [...], "default_dist": [...]}``
* ``{"type": "tree", "root": node}`` with ``node`` either ``{"leaf": [...]}``
  or ``{"test": parent, "children": {value: node, ...}}``.

Probabilities are written with ``repr`` so they round-trip exactly. On input
a distribution whose sum is within 1e-6 of 1 is renormalised (unless it is
already within rounding of 1); anything further off is rejected.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .errors import CyclicGraph, InvalidStructure, NetworkFormatError
from .model import (
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

RENORM_TOL = 1e-6
EXACT_TOL = 1e-12


def _dist(raw, card: int, node: str) -> np.ndarray:
    if not isinstance(raw, list) or len(raw) != card:
        raise NetworkFormatError(f"distribution must list {card} probabilities", node=node)
    try:
        d = np.array([float(x) for x in raw])
    except (TypeError, ValueError):
        raise NetworkFormatError("probabilities must be numbers", node=node) from None
    if not np.isfinite(d).all() or (d < 0).any():
        raise NetworkFormatError("probabilities must be finite and nonnegative", node=node)
    s = d.sum()
    if abs(s - 1.0) > RENORM_TOL:
        raise NetworkFormatError(f"distribution sums to {s!r}", node=node)
    # rounding-level deviations are left alone so that files round-trip exactly
    return d / s if abs(s - 1.0) > EXACT_TOL else d


def parse_variables(doc) -> VariableTable:
    if not isinstance(doc, dict) or "variables" not in doc:
        raise NetworkFormatError("document has no 'variables' list")
    try:
        pairs = [(str(v["name"]), [str(x) for x in v["values"]]) for v in doc["variables"]]
        return VariableTable.from_pairs(pairs)
    except (KeyError, TypeError) as exc:
        raise NetworkFormatError(f"malformed variables entry: {exc}") from None
    except InvalidStructure as exc:
        raise NetworkFormatError(str(exc)) from None


def _load_json(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise NetworkFormatError(exc.msg, line=exc.lineno) from None


def parse_network(text: str) -> BayesianNetwork:
    doc = _load_json(text)
    vars = parse_variables(doc)
    nodes = doc.get("nodes")
    if not isinstance(nodes, list):
        raise NetworkFormatError("document has no 'nodes' list")
    by_name = {}
    for entry in nodes:
        if not isinstance(entry, dict) or "name" not in entry:
            raise NetworkFormatError("node entry without a name")
        name = entry["name"]
        if name not in vars.names:
            raise NetworkFormatError("node is not a declared variable", node=name)
        if name in by_name:
            raise NetworkFormatError("node listed twice", node=name)
        by_name[name] = entry
    missing = [n for n in vars.names if n not in by_name]
    if missing:
        raise NetworkFormatError("variable has no CPT", node=missing[0])

    parents, locals_, params = [], [], []
    for i, name in enumerate(vars.names):
        entry = by_name[name]
        try:
            pidx = tuple(vars.index(p) for p in entry.get("parents", []))
        except KeyError as exc:
            raise NetworkFormatError(str(exc), node=name) from None
        parents.append(pidx)
        ls, theta = _parse_cpt(entry.get("cpt"), vars, i, pidx)
        locals_.append(ls)
        params.append(theta)
    try:
        dag = Dag(tuple(parents))
        return BayesianNetwork(vars, dag, tuple(locals_), tuple(params))
    except (InvalidStructure, CyclicGraph) as exc:
        raise NetworkFormatError(str(exc)) from None


def _parse_config(raw, vars: VariableTable, pidx, node: str) -> tuple[int, ...]:
    if not isinstance(raw, list) or len(raw) != len(pidx):
        raise NetworkFormatError("row config must give one value per parent", node=node)
    try:
        return tuple(vars.value_index(p, str(v)) for p, v in zip(pidx, raw))
    except KeyError as exc:
        raise NetworkFormatError(str(exc.args[0]), node=node) from None


def _parse_cpt(cpt, vars: VariableTable, i: int, pidx):
    name = vars.names[i]
    card = vars.card(i)
    pcards = tuple(vars.card(p) for p in pidx)
    if not isinstance(cpt, dict) or "type" not in cpt:
        raise NetworkFormatError("missing cpt", node=name)
    kind = cpt["type"]
    try:
        if kind == "table":
            ls = FullTable(pcards)
            theta = np.full((ls.n_partitions, card), np.nan)
            for row in cpt.get("rows", []):
                c = _parse_config(row.get("config"), vars, pidx, name)
                j = ls.partition(c)
                if not np.isnan(theta[j, 0]):
                    raise NetworkFormatError(f"duplicate row {row.get('config')}", node=name)
                theta[j] = _dist(row.get("dist"), card, name)
            if np.isnan(theta).any():
                raise NetworkFormatError("table does not cover every parent configuration", node=name)
            return ls, theta
        if kind == "default":
            rows, dists = [], []
            for row in cpt.get("rows", []):
                rows.append(_parse_config(row.get("config"), vars, pidx, name))
                dists.append(_dist(row.get("dist"), card, name))
            ls = DefaultTable(pcards, tuple(rows))
            theta = np.zeros((ls.n_partitions, card))
            for c, d in zip(rows, dists):
                theta[ls.partition(c)] = d
            theta[-1] = _dist(cpt.get("default_dist"), card, name)
            return ls, theta
        if kind == "tree":
            leaves: list[np.ndarray] = []
            root = _parse_tree(cpt.get("root"), vars, pidx, name, leaves)
            return DecisionTree(pcards, root), np.array(leaves).reshape(len(leaves), card)
    except InvalidStructure as exc:
        raise NetworkFormatError(str(exc), node=name) from None
    raise NetworkFormatError(f"unknown cpt type {kind!r}", node=name)


def _parse_tree(raw, vars, pidx, name, leaves):
    if not isinstance(raw, dict):
        raise NetworkFormatError("tree node must be an object", node=name)
    if "leaf" in raw:
        leaves.append(_dist(raw["leaf"], vars.card(vars.index(name)), name))
        return Leaf()
    test = raw.get("test")
    if test not in [vars.names[p] for p in pidx]:
        raise NetworkFormatError(f"tree tests {test!r}, which is not a parent", node=name)
    pos = [vars.names[p] for p in pidx].index(test)
    var = pidx[pos]
    children = raw.get("children")
    if not isinstance(children, dict) or set(children) != set(vars.values[var]):
        raise NetworkFormatError(f"test on {test!r} must have one child per value", node=name)
    subs = tuple(_parse_tree(children[v], vars, pidx, name, leaves) for v in vars.values[var])
    return Split(pos, subs)


def load_network(path) -> BayesianNetwork:
    return parse_network(Path(path).read_text(encoding="utf-8"))


def load_variables(path) -> VariableTable:
    """Variables from either a network file or a bare ``{"variables": [...]}`` schema."""
    return parse_variables(_load_json(Path(path).read_text(encoding="utf-8")))


# ---------------------------------------------------------------------------
# writing


def _num(p: float) -> float:
    p = float(p)
    if not math.isfinite(p):
        raise ValueError("non-finite probability")
    return p


def _dist_out(theta) -> list[float]:
    return [_num(p) for p in theta]


def network_to_dict(net: BayesianNetwork) -> dict:
    vars = net.vars
    nodes = []
    for i, name in enumerate(vars.names):
        pidx = net.dag.parents[i]
        ls = net.locals[i]
        theta = net.params[i]
        names = lambda cfg: [vars.values[p][v] for p, v in zip(pidx, cfg)]  # noqa: E731
        if isinstance(ls, FullTable):
            cpt = {
                "type": "table",
                "rows": [
                    {"config": names(c), "dist": _dist_out(theta[j])}
                    for j, c in enumerate(iter_configs(ls.parent_cards))
                ],
            }
        elif isinstance(ls, DefaultTable):
            cpt = {
                "type": "default",
                "rows": [{"config": names(r), "dist": _dist_out(theta[j])} for j, r in enumerate(ls.rows)],
                "default_dist": _dist_out(theta[-1]),
            }
        else:
            counter = iter(range(ls.n_partitions))

            def tree(node):
                if isinstance(node, Leaf):
                    return {"leaf": _dist_out(theta[next(counter)])}
                var = pidx[node.var]
                return {
                    "test": vars.names[var],
                    "children": {vars.values[var][v]: tree(ch) for v, ch in enumerate(node.children)},
                }

            cpt = {"type": "tree", "root": tree(ls.root)}
        nodes.append({"name": name, "parents": [vars.names[p] for p in pidx], "cpt": cpt})
    return {
        "variables": [{"name": n, "values": list(v)} for n, v in zip(vars.names, vars.values)],
        "nodes": nodes,
    }


def dump_network(net: BayesianNetwork) -> str:
    return json.dumps(network_to_dict(net), indent=1) + "\n"


def save_network(net: BayesianNetwork, path) -> None:
    Path(path).write_text(dump_network(net), encoding="utf-8")


def variables_to_dict(vars: VariableTable) -> dict:
    return {"variables": [{"name": n, "values": list(v)} for n, v in zip(vars.names, vars.values)]}


__all__ = [
    "parse_network",
    "load_network",
    "load_variables",
    "dump_network",
    "save_network",
    "network_to_dict",
    "variables_to_dict",
]
