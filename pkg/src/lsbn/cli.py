"""Command-line entry point: ``lsbn {sample,learn,score,curve,mixed}``.

Settings come from command-line flags, then an optional JSON ``--config``
file, then built-in defaults. The resolved settings are echoed as ``# key=value``
lines at the top of every TSV the command writes. Network arguments accept a
file path or ``builtin:NAME`` (``alarm``, ``fig1``, ``tree8``).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .bde import BDeObjective, PriorSpec, format_posterior_tsv, log_posterior_score
from .data import ancestral_sample, load_csv, save_csv
from .errors import LsbnError, SchemaMismatch
from .evaluate import (
    EvalConfig,
    aggregate,
    format_aggregate_tsv,
    format_mixed_tsv,
    learning_curve,
    mixed_experiment,
)
from .localfit import MODES, canonical_mode
from .mdl import format_score_tsv, network_score
from .model import BayesianNetwork, actual_param_count, tabular_complexity, uniform_network
from .netio import load_network, load_variables, save_network
from .networks import load_builtin
from .search import format_trace_tsv, hill_climb


class ConfigError(LsbnError):
    pass


def _int_list(text) -> list[int]:
    if isinstance(text, list):
        return [int(x) for x in text]
    return [int(x) for x in str(text).split(",") if x.strip()]


def _mode_list(text) -> list[str]:
    items = text if isinstance(text, list) else str(text).split(",")
    return [canonical_mode(x.strip()) for x in items if str(x).strip()]


def _opt_int(v):
    return None if v is None or v == "none" else int(v)


# name -> (default, converter, validator description, check)
SETTINGS = {
    "sample": {
        "n": (1000, int, lambda v: v >= 0, "n >= 0"),
        "seed": (0, int, lambda v: v >= 0, "seed >= 0"),
    },
    "learn": {
        "mode": ("table", canonical_mode, None, None),
        "max_parents": (None, _opt_int, lambda v: v is None or v >= 0, "max_parents >= 0"),
        "score": ("mdl", str, lambda v: v in ("mdl", "bde"), "score in {mdl, bde}"),
        "ess": (1.0, float, lambda v: v >= 0, "ess >= 0"),
    },
    "score": {
        "score": ("mdl", str, lambda v: v in ("mdl", "bde"), "score in {mdl, bde}"),
        "ess": (1.0, float, lambda v: v >= 0, "ess >= 0"),
        "enum_limit": (2**20, int, lambda v: v >= 1, "enum_limit >= 1"),
        "mc_samples": (10**6, int, lambda v: v >= 1, "mc_samples >= 1"),
    },
    "curve": {
        "sizes": ([500, 1000, 2000, 4000, 6000, 8000, 12000, 16000], _int_list, lambda v: all(x >= 2 for x in v) and v, "sizes >= 2"),
        "reps": (10, int, lambda v: v >= 1, "reps >= 1"),
        "modes": (list(MODES), _mode_list, lambda v: len(v) > 0, "at least one mode"),
        "seed": (0, int, lambda v: v >= 0, "seed >= 0"),
        "eps": (1e-4, float, lambda v: 0 <= v < 1, "0 <= eps < 1"),
        "kl_method": ("auto", str, lambda v: v in ("auto", "exact", "mc"), "kl_method in {auto, exact, mc}"),
        "mc_samples": (10**6, int, lambda v: v >= 2, "mc_samples >= 2"),
        "exact_cap": (2**22, int, lambda v: v >= 1, "exact_cap >= 1"),
        "max_parents": (None, _opt_int, lambda v: v is None or v >= 0, "max_parents >= 0"),
        "workers": (1, int, lambda v: v >= 1, "workers >= 1"),
    },
}
SETTINGS["mixed"] = {
    **{k: v for k, v in SETTINGS["curve"].items() if k not in ("sizes", "modes")},
    "size": (1000, int, lambda v: v >= 2, "size >= 2"),
    "struct_modes": (["table", "tree", "default"], _mode_list, lambda v: len(v) > 0, "at least one mode"),
    "param_modes": (["table", "tree", "default"], _mode_list, lambda v: len(v) > 0, "at least one mode"),
}


def resolve(command: str, args: argparse.Namespace) -> dict:
    spec = SETTINGS[command]
    values = {k: d for k, (d, *_rest) in spec.items()}
    if getattr(args, "config", None):
        try:
            doc = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file line {exc.lineno}: {exc.msg}") from None
        if not isinstance(doc, dict):
            raise ConfigError("config file must hold a JSON object")
        unknown = sorted(set(doc) - set(spec))
        if unknown:
            raise ConfigError(f"unknown config keys for {command}: {', '.join(unknown)}")
        values.update(doc)
    for k in spec:
        v = getattr(args, k, None)
        if v is not None:
            values[k] = v
    out = {}
    for k, (default, conv, check, desc) in spec.items():
        v = values[k]
        try:
            v = conv(v) if v is not None else None
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad value for {k}: {exc}") from None
        if check is not None and not check(v):
            raise ConfigError(f"{k}={v!r} violates {desc}")
        out[k] = v
    return out


def header(settings: dict) -> str:
    lines = [f"# lsbn {__version__}"]
    for k in sorted(settings):
        v = settings[k]
        if isinstance(v, list):
            v = ",".join(str(x) for x in v)
        lines.append(f"# {k}={v}")
    return "\n".join(lines) + "\n"


def read_network(ref: str) -> BayesianNetwork:
    if ref.startswith("builtin:"):
        return load_builtin(ref.split(":", 1)[1])
    return load_network(ref)


def read_variables(ref: str):
    if ref.startswith("builtin:"):
        return load_builtin(ref.split(":", 1)[1]).vars
    return load_variables(ref)


def _write(path, text: str) -> None:
    Path(path).write_text(text, encoding="utf-8", newline="")


# ---------------------------------------------------------------------------
# commands


def cmd_sample(args) -> int:
    s = resolve("sample", args)
    net = read_network(args.network)
    ds = ancestral_sample(net, s["n"], s["seed"])
    save_csv(ds, args.output)
    print(f"N\t{ds.n_rows}")
    for name, card in zip(net.vars.names, net.vars.cards):
        print(f"{name}\t{card}")
    return 0


def _prior(args, s, vars) -> PriorSpec:
    kw = {k: s[k] for k in ("enum_limit", "mc_samples") if k in s}
    if getattr(args, "prior", None):
        prior = read_network(args.prior)
        if prior.vars != vars:
            raise SchemaMismatch("prior network is over different variables")
        return PriorSpec(prior, s["ess"], **kw)
    return PriorSpec(uniform_network(vars), s["ess"], **kw)


def cmd_learn(args) -> int:
    s = resolve("learn", args)
    vars = read_variables(args.schema)
    ds = load_csv(args.data, vars)
    objective = BDeObjective(ds, _prior(args, s, vars)) if s["score"] == "bde" else None
    res = hill_climb(ds, s["mode"], max_parents=s["max_parents"], objective=objective)
    save_network(res.network, args.output)
    if args.trace:
        _write(args.trace, header(s) + format_trace_tsv(res, vars.names))
    print(f"total_bits\t{res.objective_total!r}")
    print(f"actual_params\t{actual_param_count(res.network)}")
    print(f"tabular_complexity\t{tabular_complexity(res.dag, vars)}")
    return 0


def cmd_score(args) -> int:
    s = resolve("score", args)
    net = read_network(args.network)
    ds = load_csv(args.data, net.vars)
    if s["score"] == "mdl":
        text = format_score_tsv(net, network_score(ds, net))
    else:
        text = format_posterior_tsv(net, log_posterior_score(ds, net, _prior(args, s, net.vars)))
    text = header(s) + text
    if args.output:
        _write(args.output, text)
    else:
        sys.stdout.write(text)
    return 0


def _eval_cfg(s) -> EvalConfig:
    return EvalConfig(
        eps=s["eps"],
        kl_method=s["kl_method"],
        mc_samples=s["mc_samples"],
        exact_cap=s["exact_cap"],
        max_parents=s["max_parents"],
        workers=s["workers"],
    )


def cmd_curve(args) -> int:
    s = resolve("curve", args)
    target = read_network(args.target)
    out = Path(args.output)
    agg_path = Path(args.aggregate) if args.aggregate else out.with_suffix(".agg.tsv")
    from .evaluate import EvalRecord

    with out.open("w", encoding="utf-8", newline="") as fh:
        fh.write(header(s) + "\t".join(EvalRecord.TSV_FIELDS) + "\n")
        fh.flush()

        def emit(rec):
            fh.write(rec.tsv() + "\n")
            fh.flush()

        try:
            records = learning_curve(target, s["sizes"], s["reps"], s["modes"], s["seed"], _eval_cfg(s), emit)
        except Exception as exc:
            fh.write(f"FAILED\t{type(exc).__name__}: {exc}\n")
            raise
    _write(agg_path, header(s) + format_aggregate_tsv(aggregate(records)))
    print(f"records\t{len(records)}")
    return 0


def cmd_mixed(args) -> int:
    s = resolve("mixed", args)
    target = read_network(args.target)
    try:
        res = mixed_experiment(
            target, s["size"], s["reps"], s["struct_modes"], s["param_modes"], s["seed"], _eval_cfg(s)
        )
    except Exception as exc:
        _write(args.output, header(s) + f"FAILED\t{type(exc).__name__}: {exc}\n")
        raise
    _write(args.output, header(s) + format_mixed_tsv(res))
    return 0


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lsbn", description="Bayesian network learning with local CPT structure")
    p.add_argument("--version", action="version", version=f"lsbn {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("sample", help="draw a dataset from a network")
    sp.add_argument("network", help="network JSON file or builtin:NAME")
    sp.add_argument("-n", type=int, help="rows to draw (default 1000)")
    sp.add_argument("--seed", type=int, help="sampling seed (default 0)")
    sp.add_argument("-o", "--output", required=True)
    sp.add_argument("--config", help="JSON file of settings; flags override it")
    sp.set_defaults(func=cmd_sample)

    sp = sub.add_parser("learn", help="learn a network from a CSV dataset")
    sp.add_argument("data")
    sp.add_argument("--schema", required=True, help="network or schema file declaring the variables")
    sp.add_argument("--mode", help="table | default | tree")
    sp.add_argument("--max-parents", dest="max_parents", help="parent cap per node (default none)")
    sp.add_argument("--score", help="mdl | bde")
    sp.add_argument("--prior", help="prior network for --score bde")
    sp.add_argument("--ess", type=float, help="equivalent sample size for --score bde (default 1)")
    sp.add_argument("-o", "--output", required=True)
    sp.add_argument("--trace", help="write the search trace TSV here")
    sp.add_argument("--config", help="JSON file of settings; flags override it")
    sp.set_defaults(func=cmd_learn)

    sp = sub.add_parser("score", help="score a network against a dataset")
    sp.add_argument("data")
    sp.add_argument("network")
    sp.add_argument("--score", help="mdl | bde")
    sp.add_argument("--prior", help="prior network for --score bde (default uniform)")
    sp.add_argument("--ess", type=float, help="equivalent sample size (default 1)")
    sp.add_argument("--enum-limit", dest="enum_limit", type=int, help="largest state space enumerated for pseudo-counts")
    sp.add_argument("--mc-samples", dest="mc_samples", type=int, help="samples when pseudo-counts are estimated")
    sp.add_argument("-o", "--output", help="TSV path (default stdout)")
    sp.add_argument("--config", help="JSON file of settings; flags override it")
    sp.set_defaults(func=cmd_score)

    for name, fn in (("curve", cmd_curve), ("mixed", cmd_mixed)):
        sp = sub.add_parser(name, help="learning-curve experiment" if name == "curve" else "mixed structure/parameter experiment")
        sp.add_argument("target", help="network JSON file or builtin:NAME")
        if name == "curve":
            sp.add_argument("--sizes", help="comma-separated sample sizes")
            sp.add_argument("--modes", help="comma-separated modes (default table,default,tree)")
            sp.add_argument("--aggregate", help="aggregate TSV path (default: OUTPUT with .agg.tsv)")
        else:
            sp.add_argument("--size", type=int, help="sample size (default 1000)")
            sp.add_argument("--struct-modes", dest="struct_modes")
            sp.add_argument("--param-modes", dest="param_modes")
        sp.add_argument("--reps", type=int, help="repetitions per size (default 10)")
        sp.add_argument("--seed", type=int, help="master seed (default 0)")
        sp.add_argument("--eps", type=float, help="smoothing mass for learned CPTs (default 1e-4)")
        sp.add_argument("--kl-method", dest="kl_method", help="auto | exact | mc")
        sp.add_argument("--mc-samples", dest="mc_samples", type=int, help="Monte Carlo KL samples (default 1e6)")
        sp.add_argument("--exact-cap", dest="exact_cap", type=int, help="largest joint enumerated exactly (default 2^22)")
        sp.add_argument("--max-parents", dest="max_parents", help="parent cap per node (default none)")
        sp.add_argument("--workers", type=int, help="worker processes (default 1)")
        sp.add_argument("-o", "--output", required=True)
        sp.add_argument("--config", help="JSON file of settings; flags override it")
        sp.set_defaults(func=fn)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (LsbnError, OSError, ValueError, KeyError) as exc:
        msg = str(exc).replace("\n", " ")
        print(f"error\t{type(exc).__name__}\t{msg}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
