import json

import numpy as np
import pytest

from lsbn.errors import NetworkFormatError
from lsbn.model import DecisionTree, DefaultTable, iter_configs
from lsbn.netio import dump_network, load_network, load_variables, parse_network, save_network
from lsbn.networks import fig1_network, load_builtin, tree8_network
from oracles import random_network


def _same(a, b):
    assert a.vars == b.vars and a.dag == b.dag and a.locals == b.locals
    for x, y in zip(a.params, b.params):
        assert np.array_equal(x, y)


@pytest.mark.parametrize("cpt", ["table", "default", "tree"])
def test_roundtrip_fig1(tmp_path, cpt):
    net = fig1_network(cpt)
    path = tmp_path / "n.json"
    save_network(net, path)
    _same(net, load_network(path))
    assert dump_network(load_network(path)) == path.read_text()


def test_roundtrip_random_is_exact(rng):
    for _ in range(20):
        net = random_network(rng, 5, kinds=("table", "default", "tree"))
        _same(net, parse_network(dump_network(net)))


def test_builtin_roundtrip():
    for net in (load_builtin("alarm"), tree8_network()):
        _same(net, parse_network(dump_network(net)))


def test_cpt_kinds_serialised():
    doc = json.loads(dump_network(fig1_network("tree")))
    s = doc["nodes"][3]
    assert s["parents"] == ["A", "B", "E"]
    assert s["cpt"]["type"] == "tree"
    assert s["cpt"]["root"]["test"] == "A"
    assert set(s["cpt"]["root"]["children"]) == {"0", "1"}
    doc = json.loads(dump_network(fig1_network("default")))
    assert doc["nodes"][3]["cpt"]["type"] == "default"
    assert doc["nodes"][3]["cpt"]["default_dist"] == [1.0, 0.0]


def _doc():
    return json.loads(dump_network(fig1_network("table")))


def test_renormalises_small_deviation():
    doc = _doc()
    doc["nodes"][0]["cpt"]["rows"][0]["dist"] = [0.5, 0.5000005]
    net = parse_network(json.dumps(doc))
    assert net.params[0].sum() == pytest.approx(1.0, abs=1e-15)


def test_rejects_large_deviation_naming_node():
    doc = _doc()
    doc["nodes"][3]["cpt"]["rows"][2]["dist"] = [0.5, 0.6]
    with pytest.raises(NetworkFormatError) as exc:
        parse_network(json.dumps(doc))
    assert exc.value.node == "S"
    assert "'S'" in str(exc.value)


def test_rejects_missing_rows_and_bad_values():
    doc = _doc()
    del doc["nodes"][3]["cpt"]["rows"][0]
    with pytest.raises(NetworkFormatError, match="S"):
        parse_network(json.dumps(doc))
    doc = _doc()
    doc["nodes"][3]["cpt"]["rows"][0]["config"][0] = "maybe"
    with pytest.raises(NetworkFormatError, match="S"):
        parse_network(json.dumps(doc))


def test_rejects_cycle_and_unknown_parent():
    doc = _doc()
    doc["nodes"][0]["parents"] = ["S"]
    doc["nodes"][0]["cpt"] = {"type": "table", "rows": [{"config": ["0"], "dist": [1, 0]}, {"config": ["1"], "dist": [1, 0]}]}
    with pytest.raises(NetworkFormatError):
        parse_network(json.dumps(doc))
    doc = _doc()
    doc["nodes"][0]["parents"] = ["Z"]
    with pytest.raises(NetworkFormatError, match="A"):
        parse_network(json.dumps(doc))


def test_syntax_error_reports_line():
    text = dump_network(fig1_network("table"))
    lines = text.splitlines()
    lines[5] = lines[5] + " ,,"
    with pytest.raises(NetworkFormatError) as exc:
        parse_network("\n".join(lines))
    assert exc.value.line == 6


def test_parsed_structures(tmp_path):
    net = parse_network(dump_network(fig1_network("default")))
    assert isinstance(net.locals[3], DefaultTable)
    assert net.locals[3].k == 4
    net = parse_network(dump_network(fig1_network("tree")))
    assert isinstance(net.locals[3], DecisionTree)
    assert [net.locals[3].partition(c) for c in iter_configs((2, 2, 2))] == [0, 0, 0, 0, 1, 2, 3, 3]


def test_load_variables_from_schema(tmp_path):
    p = tmp_path / "schema.json"
    p.write_text(json.dumps({"variables": [{"name": "X", "values": ["a", "b", "c"]}]}))
    vars = load_variables(p)
    assert vars.names == ("X",) and vars.cards == (3,)
