"""Convert a BIF network file (e.g. the public Alarm network) to lsbn's JSON format.

Usage: python tools/bif_to_json.py alarm.bif src/lsbn/networks/alarm.json
"""

import re
import sys

import numpy as np

from lsbn.model import BayesianNetwork, Dag, FullTable, VariableTable, config_index
from lsbn.netio import save_network

VAR_RE = re.compile(r"variable\s+(\S+)\s*\{\s*type\s+discrete\s*\[\s*\d+\s*\]\s*\{([^}]*)\}", re.S)
PROB_RE = re.compile(r"probability\s*\(\s*([^|)]+?)\s*(?:\|\s*([^)]*))?\)\s*\{(.*?)\}", re.S)


def convert(text: str) -> BayesianNetwork:
    pairs = [(m.group(1), [v.strip() for v in m.group(2).split(",")]) for m in VAR_RE.finditer(text)]
    vars = VariableTable.from_pairs(pairs)
    parents = [()] * len(vars)
    params = [None] * len(vars)
    for m in PROB_RE.finditer(text):
        child = vars.index(m.group(1).strip())
        ps = tuple(vars.index(p.strip()) for p in m.group(2).split(",")) if m.group(2) else ()
        cards = tuple(vars.card(p) for p in ps)
        theta = np.zeros((int(np.prod(cards, dtype=np.int64)) if ps else 1, vars.card(child)))
        body = m.group(3)
        table = re.search(r"table\s+([^;]*);", body)
        if table:
            theta[0] = [float(x) for x in table.group(1).replace(",", " ").split()]
        for row in re.finditer(r"\(([^)]*)\)\s*([^;]*);", body):
            cfg = [vars.value_index(p, v.strip()) for p, v in zip(ps, row.group(1).split(","))]
            theta[config_index(cfg, cards)] = [float(x) for x in row.group(2).replace(",", " ").split()]
        theta /= theta.sum(axis=1, keepdims=True)
        parents[child] = ps
        params[child] = theta
    dag = Dag(tuple(parents))
    locals_ = tuple(FullTable(tuple(vars.card(p) for p in ps)) for ps in parents)
    return BayesianNetwork(vars, dag, locals_, tuple(params))


if __name__ == "__main__":
    net = convert(open(sys.argv[1], encoding="utf-8").read())
    save_network(net, sys.argv[2])
