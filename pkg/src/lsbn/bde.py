"""Dirichlet marginal likelihood for networks with local structure.

Priors come from a prior network ``B_p`` and an equivalent sample size ``N'``:
the cell ``v`` of a local structure over the parents of ``X`` gets a Dirichlet
with pseudo-counts ``N' * P_Bp(X = x, Gamma = v)``. The joint
``P_Bp(X, parents)`` is obtained by enumerating the ancestral closure of the
family in ``B_p`` when it is small enough, and by Monte-Carlo otherwise.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from .data import Dataset, FamilyCounts, family_counts, sample_columns
from .mdl import dl_graph, nlogn_entropy, structure_bits
from .model import BayesianNetwork, FullTable, LocalStructure, iter_configs, uniform_network

LN2 = math.log(2.0)
ENUM_LIMIT = 2**20
MC_SAMPLES = 10**6


@dataclass
class PriorSpec:
    prior_network: BayesianNetwork
    ess: float
    enum_limit: int = ENUM_LIMIT
    mc_samples: int = MC_SAMPLES
    mc_seed: int = 0
    _joint_cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if not self.ess >= 0 or not math.isfinite(self.ess):
            raise ValueError("equivalent sample size must be a finite number >= 0")

    @classmethod
    def uniform(cls, vars, ess: float, **kw) -> "PriorSpec":
        return cls(uniform_network(vars), ess, **kw)


@dataclass(frozen=True)
class PartitionPrior:
    expected: np.ndarray
    pseudo_count: float
    estimated: bool = False

    @property
    def alpha(self) -> np.ndarray:
        return self.pseudo_count * self.expected


def _ancestors(net: BayesianNetwork, nodes) -> list[int]:
    seen = set(nodes)
    stack = list(nodes)
    while stack:
        v = stack.pop()
        for p in net.dag.parents[v]:
            if p not in seen:
                seen.add(p)
                stack.append(p)
    return [i for i in net.order if i in seen]


def family_joint(spec: PriorSpec, child: int, parents) -> tuple[np.ndarray, bool]:
    """``P_Bp(parents = c, X = x)`` as an (||parents||, ||X||) array; flag is True for a Monte-Carlo estimate."""
    parents = tuple(parents)
    key = (child, parents)
    if key in spec._joint_cache:
        return spec._joint_cache[key]
    net = spec.prior_network
    closure = _ancestors(net, (child,) + parents)
    size = math.prod(net.vars.card(i) for i in closure)
    cards = net.vars.cards
    if size <= spec.enum_limit:
        axis = {v: j for j, v in enumerate(closure)}
        shape = [cards[v] for v in closure]
        grid = np.indices(shape, dtype=np.int64).reshape(len(closure), -1).T
        flat = np.ones(grid.shape[0])
        for v in closure:
            ps = net.dag.parents[v]
            cols = grid[:, [axis[p] for p in ps]]
            part = net.locals[v].partitions(cols) if ps else np.zeros(grid.shape[0], dtype=np.int64)
            flat *= net.params[v][part, grid[:, axis[v]]]
        keep = [axis[p] for p in parents] + [axis[child]]
        drop = tuple(j for j in range(len(closure)) if j not in keep)
        marg = flat.reshape(shape).sum(axis=drop) if drop else flat.reshape(shape)
        # axes of marg are in closure order; move them to parents..., child
        present = sorted(keep)
        marg = np.moveaxis(marg, [present.index(j) for j in keep], list(range(len(keep))))
        out = marg.reshape(-1, cards[child]), False
    else:
        cols = sample_columns(net, spec.mc_samples, spec.mc_seed)
        pc = tuple(cards[p] for p in parents)
        idx = FullTable(pc).partitions(cols[:, parents]) if parents else np.zeros(cols.shape[0], dtype=np.int64)
        r = cards[child]
        h = np.bincount(idx * r + cols[:, child], minlength=math.prod(pc) * r)
        out = (h.reshape(-1, r) / cols.shape[0]), True
        warnings.warn(
            f"prior marginal for family of node {child} estimated from {spec.mc_samples} samples",
            RuntimeWarning,
            stacklevel=2,
        )
    spec._joint_cache[key] = out
    return out


def family_priors(spec: PriorSpec, child: int, parents, ls: LocalStructure) -> list[PartitionPrior]:
    joint, est = family_joint(spec, child, parents)
    r = joint.shape[1]
    if parents:
        configs = np.array(list(iter_configs(ls.parent_cards)), dtype=np.int64)
        part = ls.partitions(configs)
    else:
        part = np.zeros(1, dtype=np.int64)
    cell = np.zeros((ls.n_partitions, r))
    np.add.at(cell, part, joint)
    priors = []
    for v in range(ls.n_partitions):
        mass = cell[v].sum()
        if mass > 0:
            priors.append(PartitionPrior(cell[v] / mass, spec.ess * mass, est))
        else:
            # zero prior mass: no pseudo-counts, uniform expectation
            priors.append(PartitionPrior(np.full(r, 1.0 / r), 0.0, est))
    return priors


def partition_prior(spec: PriorSpec, child: int, parents, ls: LocalStructure, partition: int) -> PartitionPrior:
    return family_priors(spec, child, parents, ls)[partition]


def family_log_marginal(counts, priors) -> float:
    """log2 of the Dirichlet-multinomial marginal likelihood of a family's counts.

    With every pseudo-count zero (``N' = 0``) the value is the ML code length
    negated, ``-N * H(X | Gamma)``.
    """
    c = np.asarray(counts.counts if isinstance(counts, FamilyCounts) else counts, dtype=float)
    if all(p.pseudo_count == 0 for p in priors):
        return -nlogn_entropy(c)
    total = 0.0
    for v, prior in enumerate(priors):
        n_v = c[v].sum()
        if n_v == 0:
            continue
        a = prior.alpha
        if prior.pseudo_count <= 0 or ((a <= 0) & (c[v] > 0)).any():
            return -math.inf
        used = a > 0
        total += gammaln(prior.pseudo_count) - gammaln(prior.pseudo_count + n_v)
        total += float((gammaln(a[used] + c[v][used]) - gammaln(a[used])).sum())
    return float(total / LN2)


def sequential_log_marginal(child_values, partitions, priors) -> float:
    """Same quantity by multiplying one-step predictive probabilities row by row."""
    seen: dict[int, np.ndarray] = {}
    total = 0.0
    for x, v in zip(child_values, partitions):
        prior = priors[v]
        s = seen.setdefault(v, np.zeros(prior.expected.size))
        num = prior.alpha[x] + s[x]
        den = prior.pseudo_count + s.sum()
        if num <= 0:
            return -math.inf
        total += math.log2(num / den)
        s[x] += 1
    return total


@dataclass(frozen=True)
class FamilyPosterior:
    structure_bits: float
    log_marginal: float

    @property
    def log_score(self) -> float:
        return self.log_marginal - self.structure_bits


@dataclass(frozen=True)
class PosteriorScore:
    dl_graph: float
    families: tuple[FamilyPosterior, ...]

    @property
    def total(self) -> float:
        return -self.dl_graph + sum(f.log_score for f in self.families)


def family_posterior(ds: Dataset, child: int, parents, ls: LocalStructure, spec: PriorSpec) -> FamilyPosterior:
    fc = family_counts(ds, child, parents, ls)
    return FamilyPosterior(structure_bits(ls), family_log_marginal(fc, family_priors(spec, child, parents, ls)))


def log_posterior_score(ds: Dataset, net: BayesianNetwork, spec: PriorSpec) -> PosteriorScore:
    """Unnormalised log2 posterior of (graph, local structures) given the data."""
    fams = tuple(
        family_posterior(ds, i, net.dag.parents[i], net.locals[i], spec) for i in range(net.n)
    )
    return PosteriorScore(dl_graph(net.dag, net.n), fams)


class BDeObjective:
    """Search objective: minus the family's log posterior contribution, in bits.

    Plugs into :class:`lsbn.search.FamilyScorer`; the local structure itself is
    still chosen by the MDL learner of the search mode.
    """

    def __init__(self, ds: Dataset, spec: PriorSpec):
        self.ds = ds
        self.spec = spec

    def family_bits(self, node, parents, ls, fs) -> float:
        return -family_posterior(self.ds, node, parents, ls, self.spec).log_score


def format_posterior_tsv(net: BayesianNetwork, score: PosteriorScore) -> str:
    lines = ["node\trepresentation\tstructurePrior\tlogMarginal\tlogScore"]
    for name, ls, f in zip(net.vars.names, net.locals, score.families):
        lines.append(f"{name}\t{ls.kind}\t{-f.structure_bits!r}\t{f.log_marginal!r}\t{f.log_score!r}")
    lines.append(f"#graph\t-\t{-score.dl_graph!r}\t-\t{-score.dl_graph!r}")
    lines.append(f"#total\t-\t-\t-\t{score.total!r}")
    return "\n".join(lines) + "\n"
