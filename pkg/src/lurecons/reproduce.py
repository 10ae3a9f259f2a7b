"""End-to-end reproductions of the robot and oscillator examples."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import RunConfig, shipped
from .edge import AgentDynamics
from .graph import spectral_data
from .lmi import (SynthesisProblem, analyze_fixed_gain, feasible_gain_interval, solve,
                  verify_synthesis)
from .robots import RobotTeam, simulate_robots
from .sector import ChannelBank, SectorBounds, bank_certificate
from .sim import constraint_audit, lyapunov_audit, simulate, write_csv

REFERENCE_ROBOT_GAIN = -0.1
REFERENCE_CONSTRAINED_GAIN = [[-2.3825, -20.6800]]
REFERENCE_UNCERTAIN_GAIN = [[-1.1309, -2.2191]]
REFERENCE_UNCERTAINTY_PAIR = (1.2789, 0.7946)
UNCERTAIN_DRAWS = 20
CONSENSUS_TOL = 1e-3


def jsonable(obj):
    """Recursively turn numpy values into plain JSON types (non-finite floats become strings)."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if np.isfinite(v) else str(v)
    return obj


@dataclass
class Reproduction:
    name: str
    report: dict
    traces: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return bool(self.report.get("passed"))

    def write(self, directory: str | Path, formats=("json", "csv"), every: int = 1) -> list[Path]:
        out = Path(directory)
        out.mkdir(parents=True, exist_ok=True)
        written = []
        if "json" in formats:
            p = out / f"{self.name}_report.json"
            p.write_text(json.dumps(jsonable(self.report), indent=2, sort_keys=True) + "\n")
            written.append(p)
        if "csv" in formats:
            for label, trace in self.traces.items():
                p = out / f"{self.name}_{label}.csv"
                if hasattr(trace, "rows"):
                    _write_rows(p, trace.columns(), trace.rows(every))
                else:
                    write_csv(trace, p, every)
                written.append(p)
        return written


def _write_rows(path: Path, columns, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([format(float(v), ".12g") for v in row])


def _analysis_summary(res) -> dict:
    return {"status": res.status, "K": res.K, "P": res.P, "Psi": res.Psi,
            "residuals": res.residuals, "max_residual": res.max_residual if res.feasible else None,
            "certified": res.feasible and res.max_residual <= 1e-7}


def _synthesis_summary(res, lambdas) -> dict:
    out = {"status": res.status, "variant": res.problem.variant, "solver": res.solver}
    if not res.feasible:
        return out
    ver = verify_synthesis(res, lambdas=lambdas)
    out.update({"K": res.K, "X": res.X, "Y": res.Y, "Z": res.Z, "W": res.W,
                "lmi_residuals": res.residuals,
                "verify": {"schur": ver.schur, "multiplier": ver.multiplier,
                           "multiplier_offdiag": ver.multiplier_offdiag, "passed": ver.passed},
                "certificate": _analysis_summary(res.certificate) if res.certificate else None})
    return out


def _sim_summary(trace, epsilon, P=None, bank=None) -> dict:
    out = {"final_consensus_error": float(trace.consensus_error[-1]),
           "initial_consensus_error": float(trace.consensus_error[0]),
           "relative_consensus_error": trace.relative_consensus_error(),
           "consensus": bool(trace.consensus_error[-1] <= CONSENSUS_TOL),
           "max_abs_z": float(np.max(np.abs(trace.z))),
           "max_abs_y": float(np.max(np.abs(trace.y)))}
    if P is not None:
        la = lyapunov_audit(trace, P, epsilon)
        out["lyapunov"] = {"passed": la.passed, "worst_ratio": la.worst_ratio,
                           "first_violation_time": la.first_violation_time}
    if bank is not None:
        ca = constraint_audit(trace, bank)
        out["constraints"] = {"limit_ok": ca.limit_ok, "sector_ok": ca.sector_ok,
                              "worst_sector_product": ca.worst_sector_product,
                              "max_abs_y": ca.max_abs_y}
    return out


def robot_interval_endpoint(epsilon: float, lambda2: float, sigma2: float) -> float:
    """Left end of the admissible gain interval ``(-eps / (lambda2 sigma2), 0)``."""
    return -epsilon / (lambda2 * sigma2)


def reproduce_robots(cfg: RunConfig | None = None) -> Reproduction:
    cfg = cfg or shipped("robots")
    cfg.require("graph", "sector", "synthesis", "simulation", "robot")
    mats = cfg.matrices()
    spec = spectral_data(mats)
    eps = cfg.synthesis.epsilon
    s1, s2 = cfg.sector.sigma1[0], cfg.sector.sigma2[0]
    k_ref = float(cfg.gain()[0, 0]) if cfg.gain() is not None else REFERENCE_ROBOT_GAIN

    # each axis is an independent scalar integrator, so the design is scalar
    axis = AgentDynamics(np.zeros((1, 1)), np.ones((1, 1)))
    problem = SynthesisProblem(axis, spec.lambda2, spec.lambdaN, SectorBounds.uniform(s1, s2, 1), eps)
    endpoint = robot_interval_endpoint(eps, spec.lambda2, s2)
    intervals = feasible_gain_interval(problem)
    in_lmi = any(lo <= k_ref <= hi for lo, hi in intervals)
    ours = solve(problem)
    cert = analyze_fixed_gain([[k_ref]], problem)

    bank = cfg.bank(mats.graph.edge_count)
    team = RobotTeam(mats, cfg.robot.r, k_ref * np.eye(2), bank)
    x0 = cfg.x0()
    trace = simulate_robots(team, x0, cfg.robot.theta0, cfg.simulation.horizon, cfg.simulation.step)
    alpha = max(cfg.sector.limits)
    beta = min(cfg.sector.operating_bounds) if cfg.sector.operating_bounds else np.inf
    max_y = float(np.max(np.abs(trace.y)))
    rel = trace.relative_consensus_error()
    report = {
        "lambda2": spec.lambda2, "epsilon": eps, "sigma1": s1, "sigma2": s2,
        "analytic_interval": [endpoint, 0.0],
        "reference_gain": k_ref,
        "reference_gain_in_analytic_interval": endpoint < k_ref < 0,
        "lmi_intervals": intervals,
        "reference_gain_in_lmi_interval": in_lmi,
        "reference_gain_certificate": _analysis_summary(cert),
        "synthesis": _synthesis_summary(ours, spec.nonzero_eigenvalues),
        "simulation": {"horizon": cfg.simulation.horizon, "step": cfg.simulation.step,
                       "final_consensus_error": float(trace.consensus_error[-1]),
                       "relative_consensus_error": rel,
                       "max_abs_exchanged": max_y, "alpha": alpha,
                       "max_abs_relative": float(np.max(np.abs(trace.z))), "operating_bound": beta},
    }
    report["passed"] = bool(endpoint < k_ref < 0 and in_lmi and cert.feasible
                            and rel <= CONSENSUS_TOL and max_y <= alpha + 1e-9)
    return Reproduction("robots", report, {"trace": trace})


def _oscillator_problem(cfg: RunConfig):
    mats = cfg.matrices()
    spec = spectral_data(mats)
    agents = cfg.agents()
    problem = SynthesisProblem(agents, spec.lambda2, spec.lambdaN, cfg.bounds(),
                               cfg.synthesis.epsilon, cfg.synthesis.variant)
    return mats, spec, agents, problem


def reproduce_oscillators_constrained(cfg: RunConfig | None = None, backend: str | None = None) -> Reproduction:
    cfg = cfg or shipped("oscillators-constrained")
    cfg.require("graph", "agent", "sector", "synthesis", "simulation")
    mats, spec, agents, problem = _oscillator_problem(cfg)
    ref_K = cfg.gain() if cfg.gain() is not None else np.array(REFERENCE_CONSTRAINED_GAIN)
    ours = solve(problem)
    ref_cert = analyze_fixed_gain(ref_K, problem)
    bank = cfg.bank(mats.graph.edge_count)
    x0 = cfg.x0()
    T, h = cfg.simulation.horizon, cfg.simulation.step
    alpha = max(cfg.sector.limits)
    report = {"lambda2": spec.lambda2, "lambdaN": spec.lambdaN, "epsilon": problem.epsilon,
              "sigma1": cfg.sector.sigma1, "sigma2": cfg.sector.sigma2, "alpha": alpha,
              "bank_certificate": bank_certificate(bank).passed,
              "synthesis": _synthesis_summary(ours, spec.nonzero_eigenvalues),
              "reference_gain_certificate": _analysis_summary(ref_cert)}
    traces = {}
    checks = [ours.feasible, ref_cert.feasible and ref_cert.max_residual <= 1e-7]
    gains = [("reference", ref_K, ref_cert)]
    if ours.feasible:
        gains.append(("ours", ours.K, ours.certificate))
    for label, K, certificate in gains:
        P = certificate.P if certificate is not None and certificate.feasible else None
        tr = simulate(agents, mats, K, bank, x0, T, h, P=P, backend=backend)
        summ = _sim_summary(tr, problem.epsilon, P, bank)
        report[f"simulation_{label}"] = summ
        traces[label] = tr
        checks += [summ["consensus"], summ["constraints"]["limit_ok"],
                   summ.get("lyapunov", {"passed": False})["passed"]]
    if not ours.feasible:
        checks.append(False)
    report["passed"] = bool(all(checks))
    return Reproduction("oscillators_constrained", report, traces)


def uncertainty_banks(M: int, bounds: SectorBounds, seed: int, draws: int = UNCERTAIN_DRAWS):
    """The documented pair (one gain per component, every edge) followed by seeded draws."""
    banks = [("reference_pair", ChannelBank.static_gains(M, REFERENCE_UNCERTAINTY_PAIR, bounds.n, bounds))]
    for k in range(1, draws):
        banks.append((f"seed_{seed + k}", ChannelBank.random_gains(M, bounds, seed + k)))
    return banks


def reproduce_oscillators_uncertain(cfg: RunConfig | None = None, seed: int | None = None,
                                    draws: int = UNCERTAIN_DRAWS, backend: str | None = None) -> Reproduction:
    cfg = cfg or shipped("oscillators-uncertain")
    cfg.require("graph", "agent", "sector", "synthesis", "simulation")
    mats, spec, agents, problem = _oscillator_problem(cfg)
    seed = cfg.sector.seed if seed is None else seed
    seed = 0 if seed is None else seed
    ref_K = cfg.gain() if cfg.gain() is not None else np.array(REFERENCE_UNCERTAIN_GAIN)
    ours = solve(problem)
    ref_cert = analyze_fixed_gain(ref_K, problem)
    report = {"lambda2": spec.lambda2, "lambdaN": spec.lambdaN, "epsilon": problem.epsilon,
              "sigma1": cfg.sector.sigma1, "sigma2": cfg.sector.sigma2, "seed": seed,
              "synthesis": _synthesis_summary(ours, spec.nonzero_eigenvalues),
              "reference_gain_certificate": _analysis_summary(ref_cert)}
    checks = [ours.feasible, ref_cert.feasible and ref_cert.max_residual <= 1e-7]
    gains = [("reference", ref_K, ref_cert)] + ([("ours", ours.K, ours.certificate)] if ours.feasible else [])
    x0 = cfg.x0()
    T, h = cfg.simulation.horizon, cfg.simulation.step
    traces = {}
    runs = []
    for label, bank in uncertainty_banks(mats.graph.edge_count, problem.bounds, seed, draws):
        gains_used = [c.gain for c in bank.channels]
        row = {"draw": label, "gains": gains_used, "bank_certificate": bank_certificate(bank).passed}
        for glabel, K, certificate in gains:
            P = certificate.P if certificate is not None and certificate.feasible else None
            tr = simulate(agents, mats, K, bank, x0, T, h, P=P, backend=backend)
            summ = _sim_summary(tr, problem.epsilon, P, bank)
            row[glabel] = summ
            checks += [summ["consensus"], summ["constraints"]["sector_ok"],
                       summ.get("lyapunov", {"passed": False})["passed"]]
            if label == "reference_pair":
                traces[glabel] = tr
        runs.append(row)
    if not ours.feasible:
        checks.append(False)
    report["runs"] = runs
    report["all_runs_consensus"] = all(r[g]["consensus"] for r in runs for g, _, _ in gains)
    report["passed"] = bool(all(checks))
    return Reproduction("oscillators_uncertain", report, traces)


REPRODUCTIONS = {
    "robots": reproduce_robots,
    "oscillators-constrained": reproduce_oscillators_constrained,
    "oscillators-uncertain": reproduce_oscillators_uncertain,
}
