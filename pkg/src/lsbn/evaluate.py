"""Cross-entropy evaluation and the learning-curve / mixed-method experiments.

KL divergence is always measured from the generating network ``P`` to the
learned network ``Q`` in bits. Learned parameters can contain exact zeros, so
``Q`` is evaluated after mixing every distribution with the uniform one,
``(1 - eps) * theta + eps / card``. The smoothing happens only here; learned
structures and scores are untouched.

Every training set is drawn with a seed derived from ``(master seed, size,
rep)``, so the three learning procedures see the same data and any cell can
be recomputed on its own.
"""

from __future__ import annotations

import hashlib
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields
from typing import Callable, Iterable, Sequence

import numpy as np

from .data import ancestral_sample, sample_columns
from .errors import InfiniteSample, StateSpaceTooLarge
from .localfit import canonical_mode
from .model import BayesianNetwork, actual_param_count, log_prob_rows, tabular_complexity
from .search import fit_structure, hill_climb

DEFAULT_EPS = 1e-4
EXACT_CAP = 2**22
MC_SAMPLES = 10**6
_CHUNK = 1 << 18
MODE_LABELS = {"table": "tab", "tree": "tree", "default": "def"}


def derive_seed(*parts) -> int:
    """Stable 63-bit seed from any tuple of ints/strings."""
    h = hashlib.blake2b(":".join(str(p) for p in parts).encode(), digest_size=8)
    return int.from_bytes(h.digest(), "little") >> 1


def smooth_network(net: BayesianNetwork, eps: float = DEFAULT_EPS) -> BayesianNetwork:
    if eps == 0:
        return net
    params = tuple((1 - eps) * th + eps / th.shape[1] for th in net.params)
    return BayesianNetwork(net.vars, net.dag, net.locals, params)


def state_space(net: BayesianNetwork) -> int:
    return math.prod(net.vars.cards)


def kl_exact(p: BayesianNetwork, q: BayesianNetwork, cap: int = EXACT_CAP) -> float:
    if p.vars != q.vars:
        raise ValueError("networks are over different variables")
    total_states = state_space(p)
    if total_states > cap:
        raise StateSpaceTooLarge(f"{total_states} joint states exceed the enumeration cap {cap}")
    cards = p.vars.cards
    acc = 0.0
    for start in range(0, total_states, _CHUNK):
        flat = np.arange(start, min(start + _CHUNK, total_states))
        states = np.stack(np.unravel_index(flat, cards), axis=1)
        lp = log_prob_rows(p, states)
        lq = log_prob_rows(q, states)
        live = np.isfinite(lp)
        if (live & ~np.isfinite(lq)).any():
            return math.inf
        acc += float((np.exp2(lp[live]) * (lp[live] - lq[live])).sum())
    return max(acc, 0.0)


class MonteCarloKL:
    """Holds one sample from ``P`` and its log-probabilities for repeated use."""

    def __init__(self, p: BayesianNetwork, samples: int = MC_SAMPLES, seed: int = 0):
        self.p = p
        self.samples = samples
        self.seed = seed
        self.cols = sample_columns(p, samples, seed)
        self.log_p = log_prob_rows(p, self.cols)

    def __call__(self, q: BayesianNetwork) -> tuple[float, float]:
        lq = log_prob_rows(q, self.cols)
        if not np.isfinite(lq).all():
            bad = int(np.flatnonzero(~np.isfinite(lq))[0])
            raise InfiniteSample(f"sample {bad} has zero probability under the learned network")
        d = self.log_p - lq
        if d.size == 0:
            return math.nan, math.nan
        if (d == d[0]).all():
            return float(d[0]), 0.0
        se = float(d.std(ddof=1) / math.sqrt(d.size)) if d.size > 1 else math.inf
        return float(d.mean()), se


def kl_monte_carlo(p: BayesianNetwork, q: BayesianNetwork, samples: int = MC_SAMPLES, seed: int = 0):
    """(estimate, standard error) of KL(P || Q) from ancestral samples of ``P``."""
    return MonteCarloKL(p, samples, seed)(q)


@dataclass(frozen=True)
class EvalConfig:
    eps: float = DEFAULT_EPS
    kl_method: str = "auto"
    mc_samples: int = MC_SAMPLES
    exact_cap: int = EXACT_CAP
    max_parents: int | None = None
    workers: int = 1

    def method_for(self, target: BayesianNetwork) -> str:
        if self.kl_method == "auto":
            return "exact" if state_space(target) <= self.exact_cap else "mc"
        if self.kl_method not in ("exact", "mc"):
            raise ValueError(f"unknown kl method {self.kl_method!r}")
        return self.kl_method


@dataclass(frozen=True)
class EvalRecord:
    size: int
    rep: int
    mode: str
    seed: int
    kl: float
    kl_stderr: float
    kl_method: str
    scaled_error: float
    actual_params: int
    tabular_complexity: int
    edges: int
    epsilon: float
    wall_clock: float

    TSV_FIELDS = (
        "size", "rep", "mode", "seed", "kl", "kl_stderr", "kl_method", "scaled_error",
        "actual_params", "tabular_complexity", "edges", "epsilon",
    )

    def tsv(self) -> str:
        return "\t".join(_fmt(getattr(self, f)) for f in self.TSV_FIELDS)


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def scaled_error(kl: float, n: int) -> float:
    return kl * n / math.log2(n)


class _Evaluator:
    def __init__(self, target: BayesianNetwork, cfg: EvalConfig, master_seed: int):
        self.target = target
        self.cfg = cfg
        self.method = cfg.method_for(target)
        self._mc = None
        self.mc_seed = derive_seed(master_seed, "eval")

    def kl(self, learned: BayesianNetwork) -> tuple[float, float]:
        q = smooth_network(learned, self.cfg.eps)
        if self.method == "exact":
            return kl_exact(self.target, q, self.cfg.exact_cap), 0.0
        if self._mc is None:
            self._mc = MonteCarloKL(self.target, self.cfg.mc_samples, self.mc_seed)
        return self._mc(q)


_EVALUATORS: dict = {}


def _evaluator(target: BayesianNetwork, cfg: EvalConfig, master_seed: int) -> _Evaluator:
    # one reference sample per (target, config, seed) and process
    digest = hashlib.blake2b(digest_size=16)
    digest.update(repr((target.vars, target.dag, target.locals, cfg, master_seed)).encode())
    for th in target.params:
        digest.update(th.tobytes())
    key = digest.hexdigest()
    if key not in _EVALUATORS:
        _EVALUATORS.clear()
        _EVALUATORS[key] = _Evaluator(target, cfg, master_seed)
    return _EVALUATORS[key]


def _curve_cell(args):
    target, size, rep, modes, master_seed, cfg = args
    ev = _evaluator(target, cfg, master_seed)
    seed = derive_seed(master_seed, size, rep)
    ds = ancestral_sample(target, size, seed)
    out = []
    for mode in modes:
        t0 = time.perf_counter()
        res = hill_climb(ds, mode, max_parents=cfg.max_parents)
        elapsed = time.perf_counter() - t0
        kl, se = ev.kl(res.network)
        out.append(
            EvalRecord(
                size, rep, mode, seed, kl, se, ev.method, scaled_error(kl, size),
                actual_param_count(res.network), tabular_complexity(res.dag, target.vars),
                len(res.dag.edges()), cfg.eps, elapsed,
            )
        )
    return out


def _run(cells, fn, workers: int):
    if workers <= 1:
        for c in cells:
            yield fn(c)
        return
    with ProcessPoolExecutor(max_workers=workers) as pool:
        yield from pool.map(fn, cells)


def learning_curve(
    target: BayesianNetwork,
    sizes: Sequence[int],
    reps: int,
    modes: Sequence[str] = ("table", "default", "tree"),
    seed: int = 0,
    cfg: EvalConfig | None = None,
    on_record: Callable[[EvalRecord], None] | None = None,
) -> list[EvalRecord]:
    """Sample, learn and evaluate every (size, rep, mode) cell."""
    cfg = cfg or EvalConfig()
    modes = [canonical_mode(m) for m in modes]
    cells = [(target, n, r, modes, seed, cfg) for n in sizes for r in range(reps)]
    records = []
    for batch in _run(cells, _curve_cell, cfg.workers):
        for rec in batch:
            records.append(rec)
            if on_record is not None:
                on_record(rec)
    return records


def _quantiles(xs):
    a = np.asarray(xs, dtype=float)
    return tuple(float(v) for v in np.quantile(a, [0.25, 0.5, 0.75]))


AGG_FIELDS = (
    "size", "mode", "n", "median_scaled_error", "q1_scaled_error", "q3_scaled_error",
    "mean_scaled_error", "median_kl", "mean_kl", "median_actual_params", "median_tabular_complexity",
)


def aggregate(records: Iterable[EvalRecord]) -> list[dict]:
    groups: dict[tuple[int, str], list[EvalRecord]] = {}
    for r in records:
        groups.setdefault((r.size, r.mode), []).append(r)
    rows = []
    for (size, mode), rs in sorted(groups.items(), key=lambda kv: (kv[0][0], kv[0][1])):
        q1, med, q3 = _quantiles([r.scaled_error for r in rs])
        rows.append(
            {
                "size": size,
                "mode": mode,
                "n": len(rs),
                "median_scaled_error": med,
                "q1_scaled_error": q1,
                "q3_scaled_error": q3,
                "mean_scaled_error": float(np.mean([r.scaled_error for r in rs])),
                "median_kl": float(np.median([r.kl for r in rs])),
                "mean_kl": float(np.mean([r.kl for r in rs])),
                "median_actual_params": float(np.median([r.actual_params for r in rs])),
                "median_tabular_complexity": float(np.median([r.tabular_complexity for r in rs])),
            }
        )
    return rows


def format_records_tsv(records: Iterable[EvalRecord]) -> str:
    lines = ["\t".join(EvalRecord.TSV_FIELDS)] + [r.tsv() for r in records]
    return "\n".join(lines) + "\n"


def format_aggregate_tsv(rows: list[dict]) -> str:
    lines = ["\t".join(AGG_FIELDS)] + ["\t".join(_fmt(row[f]) for f in AGG_FIELDS) for row in rows]
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# mixed structure / parameter learning


@dataclass(frozen=True)
class MixedResult:
    size: int
    struct_modes: tuple[str, ...]
    param_modes: tuple[str, ...]
    per_rep: np.ndarray  # (reps, len(struct_modes), len(param_modes))

    @property
    def mean(self) -> np.ndarray:
        return self.per_rep.mean(axis=0)


def _mixed_cell(args):
    target, size, rep, struct_modes, param_modes, master_seed, cfg = args
    ev = _evaluator(target, cfg, master_seed)
    seed = derive_seed(master_seed, size, rep)
    ds = ancestral_sample(target, size, seed)
    out = np.zeros((len(struct_modes), len(param_modes)))
    for i, sm in enumerate(struct_modes):
        res = hill_climb(ds, sm, max_parents=cfg.max_parents)
        for j, pm in enumerate(param_modes):
            net = res.network if pm == sm else fit_structure(ds, res.dag, pm)
            out[i, j] = ev.kl(net)[0]
    return out


def mixed_experiment(
    target: BayesianNetwork,
    size: int,
    reps: int,
    struct_modes: Sequence[str] = ("table", "tree", "default"),
    param_modes: Sequence[str] = ("table", "tree", "default"),
    seed: int = 0,
    cfg: EvalConfig | None = None,
) -> MixedResult:
    """Learn the DAG with each row mode, refit local structure and parameters
    with each column mode on the frozen DAG, and record KL per repetition."""
    cfg = cfg or EvalConfig()
    sm = tuple(canonical_mode(m) for m in struct_modes)
    pm = tuple(canonical_mode(m) for m in param_modes)
    cells = [(target, size, r, sm, pm, seed, cfg) for r in range(reps)]
    per_rep = np.stack(list(_run(cells, _mixed_cell, cfg.workers)))
    return MixedResult(size, sm, pm, per_rep)


def format_mixed_tsv(result: MixedResult) -> str:
    head = ["structure\\params"] + [MODE_LABELS[m] for m in result.param_modes]
    lines = ["\t".join(head)]
    mean = result.mean
    for i, s in enumerate(result.struct_modes):
        lines.append("\t".join([MODE_LABELS[s]] + [repr(float(v)) for v in mean[i]]))
    return "\n".join(lines) + "\n"


def record_dict(rec: EvalRecord) -> dict:
    return {f.name: getattr(rec, f.name) for f in fields(rec)}


__all__ = [
    "EvalConfig",
    "EvalRecord",
    "MixedResult",
    "MonteCarloKL",
    "aggregate",
    "derive_seed",
    "kl_exact",
    "kl_monte_carlo",
    "learning_curve",
    "mixed_experiment",
    "smooth_network",
]
