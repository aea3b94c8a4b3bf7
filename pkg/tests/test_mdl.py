import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lsbn.data import Dataset, ancestral_sample
from lsbn.errors import EmptyDataset, KOutOfRange
from lsbn.localfit import fit_params
from lsbn.mdl import (
    conditional_entropy,
    dl_data,
    dl_default_structure,
    dl_graph,
    dl_table_params,
    dl_tree_structure,
    family_score,
    format_score_tsv,
    log2_binomial,
    network_score,
)
from lsbn.model import BayesianNetwork, Dag, DecisionTree, DefaultTable, FullTable, Leaf, Split, VariableTable
from lsbn.networks import fig1_network, fig2b_tree
from oracles import oracle_dl_graph, oracle_family_score, random_local, random_network


def test_dl_graph_examples():
    assert dl_graph(Dag.empty(4)) == 8.0
    assert dl_graph(Dag.from_edges(4, [(0, 1), (1, 2), (2, 3)])) == 14.0
    assert dl_graph(fig1_network().dag) == 14.0
    assert dl_graph(Dag.empty(1)) == 0.0


def test_dl_table_params_examples():
    assert dl_table_params(2, (2, 2, 2), 1024) == 40.0
    assert dl_table_params(2, (), 4) == 1.0
    assert dl_table_params(3, (3,), 1024) == 30.0
    assert dl_table_params(2, (2,), 1) == 0.0
    assert dl_table_params(2, (2,), 0) == 0.0


def test_dl_default_structure_examples():
    s, p = dl_default_structure(2, (2, 2, 2), 0, 1024)
    assert s + p == 8.0
    s, p = dl_default_structure(2, (2, 2, 2), 4, 1024)
    assert s + p == pytest.approx(3 + math.log2(70) + 25, abs=1e-9)
    assert s + p == pytest.approx(34.129, abs=1e-3)
    _, p = dl_default_structure(2, (2, 2, 2), 7, 1024)
    assert p == dl_table_params(2, (2, 2, 2), 1024)
    with pytest.raises(KOutOfRange):
        dl_default_structure(2, (2, 2, 2), 8, 1024)
    with pytest.raises(KOutOfRange):
        dl_default_structure(2, (2,), -1, 10)


def test_log2_binomial_matches_exact():
    for m in range(0, 60):
        for k in range(m + 1):
            assert log2_binomial(m, k) == pytest.approx(math.log2(math.comb(m, k)), abs=1e-9)
    assert math.isfinite(log2_binomial(10**6, 5 * 10**5))


def test_dl_tree_structure_examples():
    assert dl_tree_structure(DecisionTree((2, 2, 2), Leaf())) == 1.0
    tree, _ = fig2b_tree()
    # root A at depth 0, B at depth 1, E at depth 2, four leaves
    assert dl_tree_structure(tree) == pytest.approx(8 + math.log2(3), abs=1e-12)
    full = DecisionTree((2, 2), Split(0, (Split(1, (Leaf(), Leaf())), Split(1, (Leaf(), Leaf())))))
    assert dl_tree_structure(full) == 8.0


def test_dl_data_examples():
    assert dl_data(np.array([[0, 10]]), np.array([[0.0, 1.0]])) == 0.0
    assert dl_data(np.array([[30, 70]]), np.array([[0.3, 0.7]])) == pytest.approx(88.129, abs=1e-3)
    assert dl_data(np.array([[5, 3]]), np.array([[0.0, 1.0]])) == math.inf


def test_conditional_entropy_examples(rng):
    assert conditional_entropy(np.array([[0, 7], [9, 0]])) == 0.0
    assert conditional_entropy(np.array([[5, 5], [20, 20]])) == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(EmptyDataset):
        conditional_entropy(np.zeros((2, 2)))
    for _ in range(50):
        c = rng.integers(0, 30, size=(int(rng.integers(1, 6)), int(rng.integers(2, 5))))
        if c.sum() == 0:
            continue
        assert conditional_entropy(c) == pytest.approx(dl_data(c, fit_params(c)) / c.sum(), abs=1e-9)


def test_family_score_examples():
    vars = VariableTable.binary(["X"])
    ds = Dataset(vars, np.array([[0], [1]] * 512))
    fs = family_score(ds, 0, ())
    assert dl_graph(Dag.empty(1)) == 0.0
    assert (fs.dl_structure, fs.dl_params, fs.dl_data) == (0.0, 5.0, 1024.0)
    assert fs.total == 1029.0
    leaf = family_score(ds, 0, (), DecisionTree((), Leaf()))
    dft = family_score(ds, 0, (), DefaultTable((), ()))
    assert leaf.dl_params == dft.dl_params == fs.dl_params
    assert leaf.dl_data == dft.dl_data == fs.dl_data


def test_network_score_matches_oracle(rng):
    for _ in range(20):
        net = random_network(rng, 3, max_card=2, kinds=("table", "default", "tree"))
        ds = ancestral_sample(net, int(rng.integers(1, 600)), int(rng.integers(1 << 30)))
        score = network_score(ds, net)
        ref = oracle_dl_graph(net.dag)
        for i in range(3):
            ref += sum(oracle_family_score(ds.rows.tolist(), net.vars.cards, i, net.dag.parents[i], net.locals[i]))
        assert score.total == pytest.approx(ref, abs=1e-9)


def test_decomposability(rng):
    for _ in range(20):
        net = random_network(rng, 5, kinds=("table", "default", "tree"))
        ds = ancestral_sample(net, 500, int(rng.integers(1 << 30)))
        node = int(rng.integers(5))
        ps = net.dag.parents[node]
        alt = random_local(rng, "tree", [net.vars.card(p) for p in ps])
        a = network_score(ds, net)
        fs_new = family_score(ds, node, ps, alt)
        locals_ = list(net.locals)
        locals_[node] = alt
        params = list(net.params)
        params[node] = np.full((alt.n_partitions, net.vars.card(node)), 1.0 / net.vars.card(node))
        net2 = BayesianNetwork(net.vars, net.dag, tuple(locals_), tuple(params))
        b = network_score(ds, net2)
        assert b.total - a.total == pytest.approx(fs_new.total - a.families[node].total, abs=1e-9)


def test_dl_nonnegative_and_refinement_monotone(rng):
    net = fig1_network()
    ds = ancestral_sample(net, 3000, 2)
    chain = [
        DecisionTree((2, 2, 2), Leaf()),
        DecisionTree((2, 2, 2), Split(0, (Leaf(), Leaf()))),
        DecisionTree((2, 2, 2), Split(0, (Leaf(), Split(1, (Leaf(), Leaf()))))),
        fig2b_tree()[0],
        FullTable((2, 2, 2)),
    ]
    prev = math.inf
    for ls in chain:
        fs = family_score(ds, 3, (0, 1, 2), ls)
        assert min(fs.dl_structure, fs.dl_params, fs.dl_data) >= 0
        assert fs.dl_data <= prev + 1e-9
        prev = fs.dl_data


def test_empty_dataset_family_scores_zero():
    ds = Dataset(VariableTable.binary(["X", "Y"]), np.zeros((0, 2), dtype=int))
    fs = family_score(ds, 0, (1,))
    assert fs.dl_params == 0.0 and fs.dl_data == 0.0


def test_score_tsv_layout():
    net = fig1_network("tree")
    ds = ancestral_sample(net, 200, 1)
    text = format_score_tsv(net, network_score(ds, net))
    lines = text.splitlines()
    assert lines[0].split("\t") == ["node", "representation", "dlStructure", "dlParams", "dlData", "total"]
    assert lines[4].startswith("S\ttree\t")
    assert lines[-1].startswith("#total")
    assert float(lines[-1].split("\t")[-1]) == network_score(ds, net).total


@settings(max_examples=60, deadline=None)
@given(
    st.lists(st.lists(st.integers(0, 40), min_size=2, max_size=2), min_size=1, max_size=6).filter(
        lambda c: sum(map(sum, c)) > 0
    ),
    st.integers(0, 2**31),
)
def test_ml_params_minimise_dl_data(counts, seed):
    c = np.array(counts)
    theta = fit_params(c)
    best = dl_data(c, theta)
    r = np.random.default_rng(seed)
    for _ in range(20):
        other = r.dirichlet(np.ones(2), size=c.shape[0])
        assert dl_data(c, other) >= best - 1e-12
