import json

import numpy as np
import pytest

from lsbn.cli import main
from lsbn.data import load_csv
from lsbn.netio import load_network, save_network
from lsbn.networks import fig1_network


@pytest.fixture
def fig1_file(tmp_path):
    path = tmp_path / "fig1.json"
    save_network(fig1_network("tree"), path)
    return path


def _run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_sample(tmp_path, capsys, fig1_file):
    out_csv = tmp_path / "d.csv"
    code, out, _ = _run(capsys, "sample", fig1_file, "-n", 50, "--seed", 1, "-o", out_csv)
    assert code == 0
    assert out.splitlines() == ["N\t50", "A\t2", "B\t2", "E\t2", "S\t2"]
    assert load_csv(out_csv, fig1_network().vars).n_rows == 50
    code, _, _ = _run(capsys, "sample", fig1_file, "-n", 0, "-o", out_csv)
    assert code == 0 and out_csv.read_text() == "A,B,E,S\n"


def test_sample_bad_network(tmp_path, capsys, fig1_file):
    doc = json.loads(fig1_file.read_text())
    doc["nodes"][3]["cpt"]["root"]["children"]["0"]["leaf"] = [0.2, 0.2]
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(doc))
    code, _, err = _run(capsys, "sample", bad, "-n", 5, "-o", tmp_path / "x.csv")
    assert code != 0
    assert err.startswith("error\tNetworkFormatError\t") and "'S'" in err


def test_learn(tmp_path, capsys, fig1_file):
    data = tmp_path / "d.csv"
    _run(capsys, "sample", fig1_file, "-n", 4000, "--seed", 2, "-o", data)
    out_net, trace = tmp_path / "l.json", tmp_path / "t.tsv"
    code, out, _ = _run(capsys, "learn", data, "--schema", fig1_file, "--mode", "tree", "-o", out_net, "--trace", trace)
    assert code == 0
    keys = [line.split("\t")[0] for line in out.splitlines()]
    assert keys == ["total_bits", "actual_params", "tabular_complexity"]
    net = load_network(out_net)
    doc = json.loads(out_net.read_text())
    assert doc["nodes"][3]["cpt"]["type"] == "tree"
    text = trace.read_text()
    assert "# mode=tree" in text and "iteration\tmove\tdelta_bits\ttotal_bits" in text
    assert net.vars == fig1_network().vars


def test_learn_independent_coins(tmp_path, capsys):
    schema = tmp_path / "coins.json"
    schema.write_text(json.dumps({"variables": [{"name": "X", "values": ["h", "t"]}, {"name": "Y", "values": ["h", "t"]}]}))
    r = np.random.default_rng(0)
    data = tmp_path / "coins.csv"
    data.write_text("X,Y\n" + "".join(f"{'ht'[a]},{'ht'[b]}\n" for a, b in r.integers(0, 2, (4000, 2))))
    out = tmp_path / "l.json"
    assert _run(capsys, "learn", data, "--schema", schema, "--mode", "table", "-o", out)[0] == 0
    assert all(n["parents"] == [] for n in json.loads(out.read_text())["nodes"])


def test_learn_empty_and_mismatch(tmp_path, capsys, fig1_file):
    empty = tmp_path / "e.csv"
    empty.write_text("A,B,E,S\n")
    code, _, err = _run(capsys, "learn", empty, "--schema", fig1_file, "-o", tmp_path / "o.json")
    assert code != 0 and "EmptyDataset" in err
    wrong = tmp_path / "w.csv"
    wrong.write_text("A,B,S,E\n0,0,0,0\n")
    code, _, err = _run(capsys, "learn", wrong, "--schema", fig1_file, "-o", tmp_path / "o.json")
    assert code != 0 and "SchemaMismatch" in err


def test_score_mdl_and_bde(tmp_path, capsys, fig1_file):
    data = tmp_path / "d.csv"
    _run(capsys, "sample", fig1_file, "-n", 1024, "--seed", 3, "-o", data)
    code, out, _ = _run(capsys, "score", data, fig1_file)
    assert code == 0
    rows = [l.split("\t") for l in out.splitlines() if not l.startswith("# ")]
    assert rows[0] == ["node", "representation", "dlStructure", "dlParams", "dlData", "total"]
    body = {r[0]: r for r in rows[1:]}
    # hand check of the parameter term: four leaves, binary child, N=1024
    assert float(body["S"][3]) == pytest.approx(4 * 0.5 * 10, abs=1e-6)
    assert float(body["#graph"][2]) == pytest.approx(14.0, abs=1e-6)
    code, out0, _ = _run(capsys, "score", data, fig1_file, "--score", "bde", "--ess", 0)
    assert code == 0
    bde = {l.split("\t")[0]: l.split("\t") for l in out0.splitlines() if not l.startswith("# ")}
    for node in "ABES":
        assert float(bde[node][3]) == pytest.approx(-float(body[node][4]), abs=1e-6)


def test_score_mismatched_variables(tmp_path, capsys, fig1_file):
    data = tmp_path / "d.csv"
    data.write_text("X,Y\n0,1\n")
    code, _, err = _run(capsys, "score", data, fig1_file)
    assert code != 0 and err.startswith("error\tSchemaMismatch")


def test_curve_and_mixed(tmp_path, capsys, fig1_file):
    out = tmp_path / "c.tsv"
    code, _, _ = _run(capsys, "curve", fig1_file, "--sizes", "500,1000", "--reps", 2, "--modes", "tree", "-o", out)
    assert code == 0
    body = [l for l in out.read_text().splitlines() if not l.startswith("#")]
    assert len(body) == 1 + 4
    agg = tmp_path / "c.agg.tsv"
    assert agg.exists() and "# sizes=500,1000" in agg.read_text()
    mixed = tmp_path / "m.tsv"
    code, _, _ = _run(capsys, "mixed", fig1_file, "--size", 300, "--reps", 1, "-o", mixed)
    assert code == 0
    body = [l.split("\t") for l in mixed.read_text().splitlines() if not l.startswith("#")]
    assert body[0] == ["structure\\params", "tab", "tree", "def"]
    assert [r[0] for r in body[1:]] == ["tab", "tree", "def"] and all(len(r) == 4 for r in body)


def test_config_precedence_and_validation(tmp_path, capsys, fig1_file):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"sizes": [300], "reps": 1, "modes": ["def"], "seed": 9}))
    out = tmp_path / "c.tsv"
    assert _run(capsys, "curve", fig1_file, "--config", cfg, "--seed", 4, "-o", out)[0] == 0
    text = out.read_text()
    assert "# seed=4" in text and "# modes=default" in text and "# sizes=300" in text
    cfg.write_text(json.dumps({"sizes": [300], "colour": "red"}))
    code, _, err = _run(capsys, "curve", fig1_file, "--config", cfg, "-o", out)
    assert code != 0 and "colour" in err
    code, _, err = _run(capsys, "curve", fig1_file, "--eps", 2, "-o", out)
    assert code != 0 and "eps" in err
    code, _, err = _run(capsys, "curve", fig1_file, "--modes", "forest", "-o", out)
    assert code != 0


def test_curve_failure_leaves_sentinel(tmp_path, capsys, fig1_file):
    out = tmp_path / "c.tsv"
    # exact KL forced above the enumeration cap fails after the header is written
    code, _, err = _run(
        capsys, "curve", fig1_file, "--sizes", "300", "--reps", 1, "--kl-method", "exact", "--exact-cap", 2, "-o", out
    )
    assert code != 0 and "StateSpaceTooLarge" in err
    assert out.read_text().splitlines()[-1].startswith("FAILED\t")


def test_builtin_reference(tmp_path, capsys):
    code, out, _ = _run(capsys, "sample", "builtin:tree8", "-n", 10, "-o", tmp_path / "t.csv")
    assert code == 0 and out.splitlines()[0] == "N\t10"
    code, _, err = _run(capsys, "sample", "builtin:nope", "-n", 10, "-o", tmp_path / "t.csv")
    assert code != 0
