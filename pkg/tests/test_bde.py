import math
import warnings

import numpy as np
import pytest

from lsbn.bde import (
    BDeObjective,
    PartitionPrior,
    PriorSpec,
    family_log_marginal,
    family_priors,
    log_posterior_score,
    partition_prior,
    sequential_log_marginal,
)
from lsbn.data import Dataset, ancestral_sample, family_counts, partition_column
from lsbn.mdl import network_score, structure_bits
from lsbn.model import (
    BayesianNetwork,
    Dag,
    DecisionTree,
    DefaultTable,
    FullTable,
    Leaf,
    Split,
    VariableTable,
)
from lsbn.networks import fig1_network, fig2a_default_table
from lsbn.search import FamilyScorer, Move, MoveKind, SearchState, hill_climb, score_move
from oracles import joint_table, random_local, random_network, sequential_marginal


def test_partition_prior_examples():
    vars = VariableTable.binary(["X", "A", "B", "C"])
    spec = PriorSpec.uniform(vars, 8.0)
    full = FullTable((2, 2, 2))
    pp = partition_prior(spec, 0, (1, 2, 3), full, 5)
    assert pp.pseudo_count == pytest.approx(1.0, abs=1e-12)
    assert pp.expected.tolist() == [0.5, 0.5]
    leaf = partition_prior(spec, 0, (1, 2, 3), DecisionTree((2, 2, 2), Leaf()), 0)
    assert leaf.pseudo_count == pytest.approx(8.0) and leaf.expected.tolist() == [0.5, 0.5]
    dt, _ = fig2a_default_table()
    pp = partition_prior(spec, 0, (1, 2, 3), dt, dt.k)
    assert pp.pseudo_count == pytest.approx(4.0, abs=1e-12)


def test_priors_match_bruteforce_joint(rng):
    for _ in range(10):
        net = random_network(rng, 5, kinds=("table", "tree"))
        joint = joint_table(net)
        spec = PriorSpec(net, 3.0)
        child = 4
        parents = tuple(sorted(int(p) for p in rng.choice(4, size=2, replace=False)))
        ls = random_local(rng, "default", [net.vars.card(p) for p in parents])
        pri = family_priors(spec, child, parents, ls)
        ref = np.zeros((ls.n_partitions, net.vars.card(child)))
        for u, p in joint.items():
            ref[ls.partition([u[q] for q in parents]), u[child]] += p
        for v, pp in enumerate(pri):
            assert np.allclose(pp.alpha, 3.0 * ref[v], atol=1e-12)


def test_coarsening_consistency():
    net = random_network(np.random.default_rng(5), 4, max_card=2, kinds=("table",))
    spec = PriorSpec(net, 5.0)
    coarse = DecisionTree((2, 2), Split(0, (Leaf(), Leaf())))
    fine = DecisionTree((2, 2), Split(0, (Leaf(), Split(1, (Leaf(), Leaf())))))
    c = family_priors(spec, 0, (1, 2), coarse)
    f = family_priors(spec, 0, (1, 2), fine)
    assert np.allclose(c[0].alpha, f[0].alpha, atol=1e-15)
    assert np.allclose(c[1].alpha, f[1].alpha + f[2].alpha, atol=1e-14)


def test_structure_independence():
    net = fig1_network()
    spec = PriorSpec(net, 10.0)
    # a tree leaf and a default row covering the same configuration get the same prior
    tree = DecisionTree((2, 2, 2), Split(0, (Leaf(), Split(1, (Split(2, (Leaf(), Leaf())), Leaf())))))
    dt = DefaultTable((2, 2, 2), ((1, 0, 1),))
    a = partition_prior(spec, 3, (0, 1, 2), tree, tree.partition((1, 0, 1)))
    b = partition_prior(spec, 3, (0, 1, 2), dt, dt.partition((1, 0, 1)))
    assert np.allclose(a.alpha, b.alpha, atol=0)


def test_zero_mass_partition():
    net = fig1_network("table")
    # prior where A is never 1
    params = list(net.params)
    params[0] = np.array([[1.0, 0.0]])
    prior = BayesianNetwork(net.vars, net.dag, net.locals, tuple(params))
    pri = family_priors(PriorSpec(prior, 4.0), 3, (0, 1, 2), FullTable((2, 2, 2)))
    assert pri[7].pseudo_count == 0.0 and pri[7].expected.tolist() == [0.5, 0.5]


def test_log_marginal_examples():
    prior = [PartitionPrior(np.array([0.5, 0.5]), 2.0)]
    assert family_log_marginal(np.array([[1, 1]]), prior) == math.log2(1 / 6)
    assert family_log_marginal(np.array([[0, 0]]), prior) == 0.0
    improper = [PartitionPrior(np.array([1.0, 0.0]), 2.0)]
    assert family_log_marginal(np.array([[1, 1]]), improper) == -math.inf


def test_log_marginal_matches_sequential_oracle(rng):
    for _ in range(40):
        net = random_network(rng, 4, kinds=("table", "default", "tree"))
        ds = ancestral_sample(net, int(rng.integers(0, 200)), int(rng.integers(1 << 30)))
        parents = net.dag.parents[3] or (0,)
        ls = random_local(rng, "tree", [net.vars.card(p) for p in parents])
        spec = PriorSpec(net, float(rng.uniform(0.5, 20)))
        pri = family_priors(spec, 3, parents, ls)
        fc = family_counts(ds, 3, parents, ls)
        cells = partition_column(ds, parents, ls)
        got = family_log_marginal(fc, pri)
        ref = sequential_marginal(ds.column(3).tolist(), cells.tolist(), [p.alpha.tolist() for p in pri])
        assert got == pytest.approx(ref, abs=1e-9) if math.isfinite(ref) else got == ref
        assert sequential_log_marginal(ds.column(3), cells, pri) == pytest.approx(ref, abs=1e-9)


def test_permutation_invariance(rng):
    net = fig1_network("table")
    ds = ancestral_sample(net, 300, 3)
    spec = PriorSpec.uniform(net.vars, 4.0)
    ls = FullTable((2, 2, 2))
    pri = family_priors(spec, 3, (0, 1, 2), ls)
    perm = rng.permutation(300)
    ds2 = Dataset(ds.vars, ds.rows[perm])
    a = sequential_log_marginal(ds.column(3), partition_column(ds, (0, 1, 2), ls), pri)
    b = sequential_log_marginal(ds2.column(3), partition_column(ds2, (0, 1, 2), ls), pri)
    assert a == pytest.approx(b, abs=1e-9)
    assert family_log_marginal(family_counts(ds, 3, (0, 1, 2), ls), pri) == pytest.approx(a, abs=1e-9)


def test_zero_ess_is_ml_code_length():
    net = fig1_network("tree")
    ds = ancestral_sample(net, 1000, 2)
    post = log_posterior_score(ds, net, PriorSpec.uniform(net.vars, 0.0))
    mdl = network_score(ds, net)
    for f, m in zip(post.families, mdl.families):
        assert f.log_marginal == pytest.approx(-m.dl_data, abs=1e-9)
        assert f.structure_bits == m.dl_structure


def test_posterior_decomposes():
    net = fig1_network("tree")
    ds = ancestral_sample(net, 500, 2)
    spec = PriorSpec.uniform(net.vars, 2.0)
    other = fig1_network("default")
    a = log_posterior_score(ds, net, spec)
    b = log_posterior_score(ds, other, spec)
    assert a.total - b.total == pytest.approx(a.families[3].log_score - b.families[3].log_score, abs=1e-9)
    fam = a.families[3]
    assert fam.log_score == fam.log_marginal - structure_bits(net.locals[3])


def test_bde_and_mdl_agree_on_dependent_pair():
    vars = VariableTable.binary(["X", "Y"])
    r = np.random.default_rng(0)
    x = r.integers(0, 2, 4000)
    y = np.where(r.random(4000) < 0.9, x, 1 - x)
    ds = Dataset(vars, np.column_stack([x, y]))
    add = Move(MoveKind.ADD, 0, 1)
    mdl = score_move(SearchState(Dag.empty(2), FamilyScorer(ds, "table")), add)
    bde = score_move(
        SearchState(Dag.empty(2), FamilyScorer(ds, "table", BDeObjective(ds, PriorSpec.uniform(vars, 1.0)))), add
    )
    # both objectives are minimised, so an improving add is negative for each
    assert mdl < 0 and bde < 0
    res = hill_climb(ds, "tree", objective=BDeObjective(ds, PriorSpec.uniform(vars, 1.0)))
    assert len(res.dag.edges()) == 1


def test_monte_carlo_fallback_warns_and_is_close():
    net = fig1_network("table")
    exact = family_priors(PriorSpec(net, 10.0), 3, (0, 1, 2), FullTable((2, 2, 2)))
    spec = PriorSpec(net, 10.0, enum_limit=2, mc_samples=200_000, mc_seed=1)
    with warnings.catch_warnings(record=True) as w:
        warnings.simplefilter("always")
        mc = family_priors(spec, 3, (0, 1, 2), FullTable((2, 2, 2)))
    assert any(issubclass(x.category, RuntimeWarning) for x in w)
    assert all(p.estimated for p in mc)
    for a, b in zip(exact, mc):
        assert b.pseudo_count == pytest.approx(a.pseudo_count, abs=0.05)
