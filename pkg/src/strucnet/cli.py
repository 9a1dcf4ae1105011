"""Command-line front end: analyze, design, verify, gain, simulate.

Exit codes are a stable contract: 0 success, 1 parse/usage error, 2 system or
topology not generically observable, 3 structural impossibility, 4 gain
synthesis failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from .errors import (
    NoStabilizingGainFound,
    NotObservableError,
    ParseError,
    PlacementError,
    SRankDeficientError,
    StructuralError,
)
from .files import (
    SystemDescription,
    load_gain,
    load_system,
    load_topology,
    realize,
    save_gain,
    save_topology,
)
from .fusion import (
    FusionMode,
    design_main,
    design_output_fusion,
    design_state_fusion_full_srank,
    local_minimality_check,
    verify_topology,
)
from .numerics import GainSearchConfig, simulate_nke, spectral_radius, synthesize_gain
from .structure import (
    build_digraph,
    classify_agents,
    generic_observability,
    maximal_cover,
    s_rank,
    scc_decompose,
    stack_agent_outputs,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_UNOBSERVABLE = 2
EXIT_IMPOSSIBLE = 3
EXIT_NO_GAIN = 4


def _state_name(v: int) -> str:
    return f"x{v + 1}"


def _fmt_states(states) -> str:
    return "{" + ", ".join(_state_name(v) for v in sorted(states)) + "}"


def _default_seed(args) -> int | None:
    if getattr(args, "seed", None) is not None:
        return args.seed
    env = os.environ.get("STRUCNET_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError as exc:
            raise ParseError(f"STRUCNET_SEED must be an integer, got {env!r}") from exc
    return None


def _analysis(desc: SystemDescription):
    A_pat = desc.a_pattern()
    C_pats = desc.c_patterns()
    g = build_digraph(A_pat, C_pats)
    sccs = scc_decompose(g)
    report = generic_observability(A_pat, stack_agent_outputs(C_pats))
    cover = None
    classification = None
    if report.observable:
        cover = maximal_cover(A_pat, C_pats)
        classification = classify_agents(cover, g, C_pats)
    return A_pat, C_pats, g, sccs, report, cover, classification


def cmd_analyze(args) -> int:
    desc = load_system(args.system)
    A_pat, C_pats, g, sccs, report, cover, classification = _analysis(desc)
    srank_a = s_rank(A_pat)

    print(f"states: n = {desc.n} (reports are 1-indexed: x1 is file index 0)")
    print(f"agents: N = {len(desc.agents)} ({', '.join(desc.agents)})")
    print(f"S-rank(A) = {srank_a}")
    print(f"S-rank([A; C]) = {report.srank_stack} (deficiency {report.deficiency})")
    print("components:")
    for comp, kind in zip(sccs.components, sccs.kinds):
        print(f"  {kind.value:6s} {_fmt_states(comp)}")
    if cover is not None:
        print("cover:")
        for cyc, kind in zip(cover.cycles, cover.cycle_kinds):
            states = " ".join(_state_name(v) for v in cyc)
            print(f"  cycle ({states}) [{kind.value}]")
        for path in cover.ytopped_paths:
            states = " ".join(_state_name(v) for v in path.states)
            print(f"  path ({states} -> {path.agent})")
        print("agent types:")
        for verdict in classification.verdicts:
            flag = "crucial" if verdict.crucial else "non-crucial"
            print(f"  {verdict.agent}: {verdict.type.value} ({flag})")
        crucial = classification.crucial_agents()
        print(f"crucial agents: {', '.join(crucial) if crucial else '(none)'}")
    if report.condition_i_violations:
        print(f"states with no path to any output: {_fmt_states(report.condition_i_violations)}")
    print(f"observable: {'yes' if report.observable else 'no'}")

    if args.json:
        payload = {
            "n": desc.n,
            "agents": list(desc.agents),
            "srank_A": srank_a,
            "srank_stack": report.srank_stack,
            "deficiency": report.deficiency,
            "observable": report.observable,
            "condition_i_violations": sorted(report.condition_i_violations),
            "components": [
                {"states": sorted(comp), "kind": kind.value}
                for comp, kind in zip(sccs.components, sccs.kinds)
            ],
            "cover": None,
            "classification": None,
        }
        if cover is not None:
            payload["cover"] = {
                "cycles": [
                    {"states": list(cyc), "kind": kind.value}
                    for cyc, kind in zip(cover.cycles, cover.cycle_kinds)
                ],
                "paths": [
                    {"states": list(p.states), "output": p.output, "agent": p.agent}
                    for p in cover.ytopped_paths
                ],
            }
            payload["classification"] = {
                v.agent: {"type": v.type.value, "crucial": v.crucial}
                for v in classification.verdicts
            }
        Path(args.json).write_text(json.dumps(payload, indent=2) + "\n")
    return EXIT_OK if report.observable else EXIT_UNOBSERVABLE


def cmd_design(args) -> int:
    desc = load_system(args.system)
    A_pat, C_pats, g, sccs, report, cover, classification = _analysis(desc)
    if args.mode == "full-srank":
        topo = design_state_fusion_full_srank(A_pat, C_pats)
    else:
        if not report.observable:
            print("system is not generically observable; no topology can recover it",
                  file=sys.stderr)
            return EXIT_UNOBSERVABLE
        if args.mode == "output":
            topo = design_output_fusion(A_pat, C_pats, classification)
        else:
            topo = design_main(A_pat, C_pats, classification)
    save_topology(topo, args.out)
    print(f"mode: {topo.mode.value}")
    print(f"flow edges ({len(topo.flow_edges)}):")
    for u, v in sorted(topo.flow_edges):
        print(f"  {u} -> {v}")
    removable = local_minimality_check(A_pat, C_pats, topo)
    if removable:
        edges = ", ".join(f"{u}->{v}" for u, v in removable)
        print(f"individually removable edges: {edges}")
    else:
        print("locally minimal: no single edge can be removed")
    print(f"wrote {args.out}")
    return EXIT_OK


def _check_agent_agreement(desc: SystemDescription, topo) -> None:
    if tuple(desc.agents) != topo.agents:
        raise ParseError(
            f"system and topology disagree on agents: "
            f"{list(desc.agents)} vs {list(topo.agents)}"
        )


def cmd_verify(args) -> int:
    desc = load_system(args.system)
    topo = load_topology(args.topology)
    _check_agent_agreement(desc, topo)
    report = verify_topology(desc.a_pattern(), desc.c_patterns(), topo)
    Nn = len(desc.agents) * desc.n
    print(f"mode: {topo.mode.value}")
    print(f"structural rank: {report.srank_stack}/{Nn} (deficiency {report.deficiency})")
    for agent, viol in report.agent_violations.items():
        if viol:
            print(f"  agent {agent}: states with no path to any output {_fmt_states(viol)}")
    print(f"observable: {'yes' if report.observable else 'no'}")
    return EXIT_OK if report.observable else EXIT_UNOBSERVABLE


def cmd_gain(args) -> int:
    desc = load_system(args.system)
    topo = load_topology(args.topology)
    _check_agent_agreement(desc, topo)
    report = verify_topology(desc.a_pattern(), desc.c_patterns(), topo)
    if not report.observable:
        print("topology does not make the networked structure observable; "
              "no stabilizing gain exists", file=sys.stderr)
        return EXIT_NO_GAIN
    seed = _default_seed(args)
    base = seed if seed is not None else (desc.numeric.seed if desc.numeric else 0)
    system = realize(desc, topo, base)
    try:
        result = synthesize_gain(system, GainSearchConfig(seed=base, method=args.method))
    except NoStabilizingGainFound as exc:
        print(f"gain search failed: best spectral radius {exc.best_rho:.6g} "
              f"after {exc.iterations} evaluations", file=sys.stderr)
        return EXIT_NO_GAIN
    save_gain(topo.agents, result.gain, result.rho, result.method, base, args.out)
    print(f"method: {result.method} ({result.iterations} evaluations)")
    print(f"spectral radius of error dynamics: {result.rho:.6g}")
    print(f"wrote {args.out}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    desc = load_system(args.system)
    topo = load_topology(args.topology)
    _check_agent_agreement(desc, topo)
    agents, gain, meta = load_gain(args.gain)
    if agents != topo.agents:
        raise ParseError(
            f"gain and topology disagree on agents: {list(agents)} vs {list(topo.agents)}"
        )
    if gain.n != desc.n:
        raise ParseError(f"gain blocks are {gain.n}x{gain.n}, system has n = {desc.n}")
    realize_seed = meta.get("seed", desc.numeric.seed if desc.numeric else 0)
    system = realize(desc, topo, realize_seed)
    seed = _default_seed(args)
    sim_seed = seed if seed is not None else realize_seed
    num = desc.numeric
    trace = simulate_nke(
        system, gain, args.steps, sim_seed,
        x0_range=num.x0_range if num else (0.0, 3.0),
    )
    with open(args.out, "w", newline="") as fh:
        trace.to_csv(fh)
    half = trace.sq_errors[args.steps // 2:]
    print(f"simulated {args.steps} steps (seed {sim_seed})")
    for i, agent in enumerate(trace.agents):
        mean = float(np.mean(half[:, i]))
        last = float(trace.sq_errors[-1, i])
        flag = ""
        if not np.isfinite(mean) or last > 1e6:
            flag = "  DIVERGING"
        print(f"  agent {agent}: mean squared error (last half) = {mean:.6g}{flag}")
    print(f"wrote {args.out}")
    return EXIT_OK


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="strucnet",
        description="Structural observability analysis and topology design "
                    "for networked estimators",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="structural report for a system file")
    p.add_argument("system")
    p.add_argument("--json", help="also write the report as JSON to this path")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("design", help="synthesize a communication topology")
    p.add_argument("system")
    p.add_argument("--mode", choices=["output", "main", "full-srank"], required=True)
    p.add_argument("--out", required=True, help="topology JSON output path")
    p.set_defaults(func=cmd_design)

    p = sub.add_parser("verify", help="check a topology against a system")
    p.add_argument("system")
    p.add_argument("topology")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("gain", help="synthesize a stabilizing block-diagonal gain")
    p.add_argument("system")
    p.add_argument("topology")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--method", choices=["search", "lmi"], default="search")
    p.add_argument("--out", required=True, help="gain JSON output path")
    p.set_defaults(func=cmd_gain)

    p = sub.add_parser("simulate", help="run the networked estimator and export a trace")
    p.add_argument("system")
    p.add_argument("topology")
    p.add_argument("gain")
    p.add_argument("--steps", type=int, default=100)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True, help="trace CSV output path")
    p.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SRankDeficientError, PlacementError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IMPOSSIBLE
    except NotObservableError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_UNOBSERVABLE
    except (StructuralError, NoStabilizingGainFound) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NO_GAIN


if __name__ == "__main__":
    sys.exit(main())
