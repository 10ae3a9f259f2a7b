"""Command line entry point.

Exit status: 0 when the command's check passes, 1 when it runs but the check
fails (infeasible LMI, no consensus, failed audit), 2 for bad input
(unreadable or inconsistent config, disconnected graph, invalid edges).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig, apply_overrides, load, shipped
from .edge import EdgeSystem
from .errors import (ConfigError, Disconnected, Infeasible, LureconsError, NoneFeasible,
                     NonFiniteState, NumericalFailure)
from .graph import spectral_data
from .lmi import SynthesisProblem, analyze_fixed_gain, max_epsilon, solve
from .reproduce import (CONSENSUS_TOL, REPRODUCTIONS, Reproduction, _analysis_summary,
                        _sim_summary, _synthesis_summary, jsonable)
from .sim import simulate

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2


def _problem(cfg: RunConfig, spec) -> SynthesisProblem:
    cfg.require("agent", "sector", "synthesis")
    syn = cfg.synthesis
    problem_eps = syn.epsilon if syn.epsilon is not None else (syn.eps_range or [1e-3])[0]
    return SynthesisProblem(cfg.agents(), spec.lambda2, spec.lambdaN, cfg.bounds(), problem_eps, syn.variant)


def _resolve_epsilon(cfg: RunConfig, problem: SynthesisProblem) -> tuple[SynthesisProblem, dict]:
    """Use the configured decay rate, or search the configured range for the largest feasible one."""
    syn = cfg.synthesis
    if syn.epsilon is not None or not syn.eps_range:
        return problem, {}
    eps = max_epsilon(problem, tuple(syn.eps_range))
    return problem.with_epsilon(eps), {"epsilon_search": {"range": syn.eps_range, "max_feasible": eps}}


def cmd_spectrum(cfg: RunConfig, args) -> tuple[dict, int, dict]:
    mats = cfg.matrices()
    spec = spectral_data(mats)
    report = {"nodes": mats.graph.node_count, "edges": mats.graph.edges,
              "eigenvalues": spec.eigenvalues, "lambda2": spec.lambda2, "lambdaN": spec.lambdaN,
              "Gamma": np.diag(spec.Gamma), "spanning_tree": mats.graph.is_spanning_tree,
              "spectral_checks": spec.checks, "incidence": mats.incidence, "laplacian": mats.laplacian}
    return report, EXIT_OK, {}


def cmd_synthesize(cfg: RunConfig, args) -> tuple[dict, int, dict]:
    mats = cfg.matrices()
    spec = spectral_data(mats)
    problem, extra = _resolve_epsilon(cfg, _problem(cfg, spec))
    res = solve(problem)
    report = {"epsilon": problem.epsilon, **extra, **_synthesis_summary(res, spec.nonzero_eigenvalues)}
    ok = res.feasible and report["verify"]["passed"]
    report["passed"] = ok
    return report, EXIT_OK if ok else EXIT_FAIL, {}


def _config_gain(cfg: RunConfig) -> np.ndarray:
    K = cfg.gain()
    if K is None:
        raise ConfigError("synthesis.gain is required for this command")
    return K


def cmd_analyze(cfg: RunConfig, args) -> tuple[dict, int, dict]:
    mats = cfg.matrices()
    spec = spectral_data(mats)
    problem = _problem(cfg, spec)
    res = analyze_fixed_gain(_config_gain(cfg), problem, lambdas=spec.nonzero_eigenvalues)
    report = {"epsilon": problem.epsilon, **_analysis_summary(res)}
    report["passed"] = report["certified"]
    return report, EXIT_OK if report["passed"] else EXIT_FAIL, {}


def _simulate_gain(cfg: RunConfig, K, P, epsilon):
    mats = cfg.matrices()
    cfg.require("sector", "simulation")
    bank = cfg.bank(mats.graph.edge_count)
    system = EdgeSystem.build(mats, spectral_data(mats))
    trace = simulate(cfg.agents(), mats, K, bank, cfg.x0(), cfg.simulation.horizon,
                     cfg.simulation.step, P=P, system=system)
    summary = _sim_summary(trace, epsilon, P, bank)
    summary["consensus"] = summary["relative_consensus_error"] <= CONSENSUS_TOL
    return trace, summary


def cmd_simulate(cfg: RunConfig, args) -> tuple[dict, int, dict]:
    cfg.require("graph", "agent", "sector", "simulation")
    spec = spectral_data(cfg.matrices())
    K = cfg.gain()
    report: dict = {}
    P = None
    eps = cfg.synthesis.epsilon if cfg.synthesis is not None else None
    if K is None:
        problem, extra = _resolve_epsilon(cfg, _problem(cfg, spec))
        res = solve(problem).require()
        K, eps = res.K, problem.epsilon
        report.update(extra)
        report["synthesized_K"] = K
        P = res.certificate.P if res.certificate is not None and res.certificate.feasible else None
    elif eps is not None and cfg.sector is not None:
        cert = analyze_fixed_gain(K, _problem(cfg, spec))
        P = cert.P if cert.feasible else None
    report["K"] = K
    try:
        trace, summary = _simulate_gain(cfg, K, P, eps)
    except NonFiniteState as exc:
        report.update({"status": "diverged", "message": str(exc), "passed": False})
        traces = {"trace": exc.trace} if exc.trace is not None else {}
        return report, EXIT_FAIL, traces
    report["simulation"] = summary
    ok = summary["consensus"] and summary["constraints"]["limit_ok"] and summary["constraints"]["sector_ok"]
    report["passed"] = bool(ok)
    return report, EXIT_OK if ok else EXIT_FAIL, {"trace": trace}


def cmd_verify(cfg: RunConfig, args) -> tuple[dict, int, dict]:
    """Given a gain: certify it, simulate, and audit the decay.  Without one: synthesize and verify."""
    cfg.require("graph", "agent", "sector", "synthesis")
    mats = cfg.matrices()
    spec = spectral_data(mats)
    problem, extra = _resolve_epsilon(cfg, _problem(cfg, spec))
    K = cfg.gain()
    report: dict = {"epsilon": problem.epsilon, **extra}
    traces = {}
    if K is None:
        res = solve(problem)
        report["synthesis"] = _synthesis_summary(res, spec.nonzero_eigenvalues)
        ok = res.feasible and report["synthesis"]["verify"]["passed"]
        cert = res.certificate if res.feasible else None
        K = res.K
    else:
        cert = analyze_fixed_gain(K, problem, lambdas=spec.nonzero_eigenvalues)
        report["certificate"] = _analysis_summary(cert)
        ok = report["certificate"]["certified"]
    if ok and cfg.simulation is not None and cert is not None and cert.feasible:
        try:
            trace, summary = _simulate_gain(cfg, K, cert.P, problem.epsilon)
            report["simulation"] = summary
            traces["trace"] = trace
            ok = ok and summary["consensus"] and summary["lyapunov"]["passed"]
        except NonFiniteState as exc:
            report["simulation"] = {"status": "diverged", "message": str(exc)}
            ok = False
    report["passed"] = bool(ok)
    return report, EXIT_OK if ok else EXIT_FAIL, traces


COMMANDS = {"spectrum": cmd_spectrum, "synthesize": cmd_synthesize, "analyze": cmd_analyze,
            "simulate": cmd_simulate, "verify": cmd_verify}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML or JSON run configuration")
    common.add_argument("--out", help="output directory (overrides output.directory)")
    common.add_argument("--seed", type=int, help="seed for random uncertainty channels")
    common.add_argument("--eps", type=float, help="decay rate (overrides synthesis.epsilon)")
    common.add_argument("--step", type=float, help="integration step")
    common.add_argument("--horizon", type=float, help="simulation horizon")
    common.add_argument("--format", choices=["csv", "json"], help="write only this artifact format")
    common.add_argument("--every", type=int, default=1, help="keep every k-th sample in CSV traces")

    parser = argparse.ArgumentParser(prog="lurecons", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=COMMANDS[name].__doc__ or f"run {name}")
    rep = sub.add_parser("reproduce", parents=[common], help="rerun a bundled example")
    rep.add_argument("example", choices=sorted(REPRODUCTIONS))
    return parser


def _overrides(args) -> dict:
    return {"eps": args.eps, "step": args.step, "horizon": args.horizon, "seed": args.seed,
            "out": args.out, "format": args.format}


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "reproduce":
            cfg = load(args.config) if args.config else shipped(args.example)
            apply_overrides(cfg, _overrides(args))
            kw = {"seed": args.seed} if args.example == "oscillators-uncertain" else {}
            result = REPRODUCTIONS[args.example](cfg, **kw)
        else:
            if not args.config:
                raise ConfigError("--config is required")
            cfg = apply_overrides(load(args.config), _overrides(args))
            report, code, traces = COMMANDS[args.command](cfg, args)
            report = {"command": args.command, **report}
            result = Reproduction(args.command, report, traces)
    except Disconnected:
        print("error: graph not connected", file=sys.stderr)
        return EXIT_INPUT
    except (Infeasible, NoneFeasible, NumericalFailure) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except (ConfigError, LureconsError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    written = result.write(Path(cfg.output.directory), cfg.output.formats, max(1, args.every))
    summary = jsonable(result.report)
    print(json.dumps(summary, indent=2, sort_keys=True))
    for p in written:
        print(f"wrote {p}", file=sys.stderr)
    if args.command == "reproduce":
        return EXIT_OK if result.passed else EXIT_FAIL
    return code


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
