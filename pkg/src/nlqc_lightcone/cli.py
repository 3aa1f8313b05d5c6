"""Command-line front end.

Exit codes: 0 success, 1 input error, 2 threshold or budget violation.
The default seed comes from ``NLQC_SEED`` (else 0).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import costmodel, teleport
from .circuit import CircuitError, ancestors, family, lightcone_volume, load_circuit, parents
from .engine import (
    RegisterBudgetError,
    load_run_config,
    make_input,
    run_spec,
    spec_from_config,
)

EXIT_OK, EXIT_INPUT, EXIT_VIOLATION = 0, 1, 2


class InputError(Exception):
    pass


def _default_seed() -> int:
    try:
        return int(os.environ.get("NLQC_SEED", "0"))
    except ValueError:
        raise InputError("NLQC_SEED must be an integer")


def _table(headers: Sequence[str], rows: Sequence[Sequence]) -> str:
    cells = [list(map(str, headers))] + [[_fmt(c) for c in r] for r in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(headers))]
    lines = ["  ".join(c.rjust(w) for c, w in zip(r, widths)) for r in cells]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines)


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


def _emit(args, payload: dict, text: str) -> None:
    if args.format == "json":
        print(json.dumps(payload, indent=2, sort_keys=True))
    else:
        print(text)


def _load(path: str):
    try:
        return load_circuit(path)
    except FileNotFoundError:
        raise InputError(f"no such file: {path}")


# subcommands ---------------------------------------------------------------

def cmd_analyze(args) -> int:
    cs = _load(args.circuit)
    rows, gates = [], []
    for g in cs.gates():
        pr, an, fm = parents(cs, g.id), ancestors(cs, g.id), family(cs, g.id)
        rows.append((str(g.id), ",".join(map(str, g.support)), g.k, len(pr), len(an), len(fm)))
        gates.append({"gate": [g.id.layer, g.id.index], "support": list(g.support), "k": g.k,
                      "parents": len(pr), "ancestors": len(an), "fm": len(fm)})
    V = lightcone_volume(cs)
    max_fm = max(len(family(cs, g.id)) for g in cs.gates())
    text = _table(("gate", "support", "k", "|pr|", "|anc|", "|fm|"), rows)
    text += f"\n\nn = {cs.n}  d = {cs.depth}  max |fm| = {max_fm}  V = {V}"
    _emit(args, {"n": cs.n, "d": cs.depth, "gates": gates, "max_fm": max_fm, "V": V}, text)
    return EXIT_OK


def _parse_geo(text: Optional[str]) -> Optional[costmodel.GeoParams]:
    if text is None:
        return None
    try:
        D, alpha = text.split(",")
        return costmodel.GeoParams(int(D), float(alpha))
    except ValueError as exc:
        raise InputError(f"--geo expects D,alpha: {exc}")


def cmd_cost(args) -> int:
    if (args.epsilon is None) == (args.ports is None):
        raise InputError("give exactly one of --epsilon and --ports")
    cs = _load(args.circuit)
    geo = _parse_geo(args.geo)
    target = costmodel.AccuracyTarget(args.epsilon) if args.epsilon is not None else None
    report = costmodel.cost_report(cs, N=args.ports, target=target, geo=geo)
    payload = report.to_dict()
    text = report.to_table()
    if args.k_class or args.d_class:
        if not (args.k_class and args.d_class):
            raise InputError("--k-class and --d-class go together")
        regime = costmodel.classify_regime(costmodel.ScalingClass(args.k_class),
                                           costmodel.ScalingClass(args.d_class), geo)
        payload["regime"] = regime
        text += f"\n{'regime':<22} {regime}"
    _emit(args, payload, text)
    return EXIT_OK


def cmd_simulate(args) -> int:
    try:
        cfg = load_run_config(args.config)
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read run config: {exc}")
    spec, N = spec_from_config(cfg, Path(cfg["_base_dir"]))
    seed = args.seed if args.seed is not None else int(cfg.get("seed", _default_seed()))
    inp_cfg = cfg.get("input", {})
    rng = np.random.default_rng(seed)
    state = make_input(spec.n_alice, spec.n_bob, int(inp_cfg.get("reference_qubits", 1)), rng,
                       inp_cfg.get("kind", "random"))
    backend = cfg.get("backend", "ideal")
    out = run_spec(spec, state, N, backend=backend, seed=seed, lazy=bool(cfg.get("lazy", True)))
    threshold = float(cfg.get("threshold", 0.0))
    payload = out.to_dict()
    payload["threshold"] = threshold
    budget_ok = out.budget is None or out.budget >= 2 or 2 * out.trace_distance <= out.budget
    payload["within_budget"] = budget_ok
    lines = [
        f"backend          {backend}",
        f"N                {N}",
        f"seed             {seed}",
        f"fidelity         {out.fidelity:.9f}",
        f"trace distance   {out.trace_distance:.9f}",
        f"error budget     {'-' if out.budget is None else f'{out.budget:.6g}'}",
        f"within budget    {budget_ok}",
        f"declared pairs   {out.resources_declared}",
        f"materialized     {out.resources_materialized}",
        f"ledger           {out.ledger.summary()['rounds']} round, "
        f"{out.ledger.summary()['pre_round']} pre-round messages",
    ]
    _emit(args, payload, "\n".join(lines))
    if out.fidelity < threshold:
        return EXIT_VIOLATION
    if args.strict and not budget_ok:
        return EXIT_VIOLATION
    return EXIT_OK


def cmd_compare(args) -> int:
    cs = _load(args.circuit)
    target = costmodel.AccuracyTarget(args.epsilon)
    N = costmodel.ports_required(cs, target)
    ours = costmodel.entanglement_cost(cs, N).E
    n_single = costmodel.whole_register_ports(cs.n, target)
    single = costmodel.whole_register_cost(cs.n, target)
    payload = {
        "n": cs.n, "epsilon": args.epsilon, "N": N, "E": int(ours), "log2_E": costmodel._log2(ours),
        "N_single": str(n_single), "E_single": single, "log2_E_single": costmodel._log2(single),
    }
    rows = [("light cone", N, ours, payload["log2_E"]),
            ("single gate", n_single, single, payload["log2_E_single"])]
    if args.t_count is not None or args.t_depth is not None:
        comp = costmodel.comparison_costs(cs.n, args.t_count or 0, args.t_depth or 0)
        payload["log2_T_count"] = comp["t_count"]
        payload["log2_T_depth"] = comp["t_depth"]
        if args.t_count is not None:
            rows.append(("T-count", "-", "-", comp["t_count"]))
        if args.t_depth is not None:
            rows.append(("T-depth", "-", "-", comp["t_depth"]))
    _emit(args, payload, _table(("protocol", "N", "pairs", "log2 pairs"), rows))
    return EXIT_OK


def _int_list(text: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t]
    except ValueError:
        raise InputError(f"expected comma-separated integers, got {text!r}")


def cmd_pbt_bench(args) -> int:
    rows, payload = [], []
    for N in _int_list(args.N_list):
        try:
            rep = teleport.pbt_bound_report(args.k, N, args.method)
        except teleport.IntractableError as exc:
            raise InputError(f"k={args.k}, N={N} rejected: {exc}")
        payload.append(rep.as_row())
        rows.append((rep.k, rep.N, rep.lower, rep.upper, rep.analytic_bound, rep.avg_fidelity))
    _emit(args, {"rows": payload},
          _table(("k", "N", "lower", "upper", "analytic_bound", "avg_fidelity"), rows))
    return EXIT_OK


# entry point -------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nlqc", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, func, help_text):
        sp = sub.add_parser(name, help=help_text)
        sp.add_argument("--format", choices=("table", "json"), default="table")
        sp.set_defaults(func=func)
        return sp

    sp = add("analyze", cmd_analyze, "parents, ancestors, families and light-cone volume")
    sp.add_argument("circuit")

    sp = add("cost", cmd_cost, "exact entanglement cost and bounds")
    sp.add_argument("circuit")
    sp.add_argument("--epsilon", type=float)
    sp.add_argument("--ports", type=int)
    sp.add_argument("--geo", help="D,alpha for the geometric-locality exponent")
    sp.add_argument("--k-class", choices=costmodel.SCALING_TAGS)
    sp.add_argument("--d-class", choices=costmodel.SCALING_TAGS)

    sp = add("simulate", cmd_simulate, "run the two-party protocol from a JSON run config")
    sp.add_argument("config")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--strict", action="store_true", help="exit 2 when the error budget is exceeded")

    sp = add("bk-compare", cmd_compare, "compare against the single-gate and T-gate protocols")
    sp.add_argument("circuit")
    sp.add_argument("--epsilon", type=float, required=True)
    sp.add_argument("--t-count", type=int)
    sp.add_argument("--t-depth", type=int)

    sp = add("pbt-bench", cmd_pbt_bench, "PBT channel distance to identity versus N")
    sp.add_argument("--k", type=int, default=1)
    sp.add_argument("--N-list", default="2,4,8,16")
    sp.add_argument("--method", default="auto", choices=("auto", "simulate", "operator", "spin"))
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (InputError, CircuitError, ValueError, KeyError, OSError, RegisterBudgetError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
