"""Run configuration: one YAML (or JSON) document with named sections.

Matrices are row-major nested lists.  Every number is coerced to ``float``
on load, which also catches YAML's habit of reading ``1e-3`` as a string.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields
from importlib import resources
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from .errors import ConfigError, DimensionMismatch
from .graph import build_graph, graph_matrices
from .sector import ChannelBank, SectorBounds, SectorChannel

CHANNEL_KINDS = ("identity", "saturation", "static_gain", "random_gain", "table")


def _num(value, where: str) -> float:
    try:
        out = float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{where}: expected a number, got {value!r}") from None
    if math.isnan(out):
        raise ConfigError(f"{where}: NaN is not allowed")
    return out


def _vector(value, where: str) -> list[float]:
    if value is None:
        raise ConfigError(f"{where}: missing")
    if not isinstance(value, (list, tuple)):
        value = [value]
    return [_num(v, f"{where}[{i}]") for i, v in enumerate(value)]


def _matrix(value, where: str) -> list[list[float]]:
    if not isinstance(value, (list, tuple)) or not value:
        raise ConfigError(f"{where}: expected a non-empty list of rows")
    rows = [_vector(r, f"{where}[{i}]") for i, r in enumerate(value)]
    if len({len(r) for r in rows}) != 1:
        raise ConfigError(f"{where}: ragged rows")
    return rows


def _opt(fn, value, where):
    return None if value is None else fn(value, where)


@dataclass
class GraphSection:
    nodes: int
    edges: list[list[int]]

    @classmethod
    def from_dict(cls, d: dict) -> "GraphSection":
        try:
            nodes = int(d["nodes"])
            edges = [[int(a), int(b)] for a, b in d["edges"]]
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"graph section: {exc}") from None
        return cls(nodes, edges)


@dataclass
class AgentSection:
    A: list[list[float]]
    B: list[list[float]]

    @classmethod
    def from_dict(cls, d: dict) -> "AgentSection":
        return cls(_matrix(d.get("A"), "agent.A"), _matrix(d.get("B"), "agent.B"))


@dataclass
class SectorSection:
    sigma1: list[float]
    sigma2: list[float]
    kind: str = "identity"
    limits: list[float] | None = None
    operating_bounds: list[float] | None = None
    gains: list[float] | None = None
    seed: int | None = None
    table_x: list[float] | None = None
    table_y: list[float] | None = None

    @classmethod
    def from_dict(cls, d: dict) -> "SectorSection":
        kind = d.get("kind", "identity")
        if kind not in CHANNEL_KINDS:
            raise ConfigError(f"sector.kind must be one of {CHANNEL_KINDS}, got {kind!r}")
        seed = d.get("seed")
        return cls(_vector(d.get("sigma1"), "sector.sigma1"), _vector(d.get("sigma2"), "sector.sigma2"),
                   kind, _opt(_vector, d.get("limits"), "sector.limits"),
                   _opt(_vector, d.get("operating_bounds"), "sector.operating_bounds"),
                   _opt(_vector, d.get("gains"), "sector.gains"),
                   None if seed is None else int(seed),
                   _opt(_vector, d.get("table_x"), "sector.table_x"),
                   _opt(_vector, d.get("table_y"), "sector.table_y"))


@dataclass
class SynthesisSection:
    variant: str = "auto"
    epsilon: float | None = None
    eps_range: list[float] | None = None
    gain: list[list[float]] | None = None

    @classmethod
    def from_dict(cls, d: dict) -> "SynthesisSection":
        return cls(str(d.get("variant", "auto")), _opt(_num, d.get("epsilon"), "synthesis.epsilon"),
                   _opt(_vector, d.get("eps_range"), "synthesis.eps_range"),
                   _opt(_matrix, d.get("gain"), "synthesis.gain"))


@dataclass
class SimulationSection:
    x0: list[list[float]]
    horizon: float = 10.0
    step: float = 1e-3

    @classmethod
    def from_dict(cls, d: dict) -> "SimulationSection":
        return cls(_matrix(d.get("x0"), "simulation.x0"), _num(d.get("horizon", 10.0), "simulation.horizon"),
                   _num(d.get("step", 1e-3), "simulation.step"))


@dataclass
class OutputSection:
    directory: str = "out"
    formats: list[str] = field(default_factory=lambda: ["json", "csv"])

    @classmethod
    def from_dict(cls, d: dict) -> "OutputSection":
        fmts = d.get("formats", ["json", "csv"])
        fmts = [fmts] if isinstance(fmts, str) else list(fmts)
        bad = set(fmts) - {"json", "csv"}
        if bad:
            raise ConfigError(f"output.formats: unknown {sorted(bad)}")
        return cls(str(d.get("directory", "out")), fmts)


@dataclass
class RobotSection:
    """Only used by the robot reproduction: heading-point offset and initial headings."""

    r: float
    theta0: list[float]

    @classmethod
    def from_dict(cls, d: dict) -> "RobotSection":
        return cls(_num(d.get("r"), "robot.r"), _vector(d.get("theta0"), "robot.theta0"))


SECTIONS = {"graph": GraphSection, "agent": AgentSection, "sector": SectorSection,
            "synthesis": SynthesisSection, "simulation": SimulationSection,
            "output": OutputSection, "robot": RobotSection}


@dataclass
class RunConfig:
    graph: GraphSection | None = None
    agent: AgentSection | None = None
    sector: SectorSection | None = None
    synthesis: SynthesisSection | None = None
    simulation: SimulationSection | None = None
    output: OutputSection = field(default_factory=OutputSection)
    robot: RobotSection | None = None

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        if not isinstance(d, dict):
            raise ConfigError("config must be a mapping of sections")
        unknown = set(d) - set(SECTIONS)
        if unknown:
            raise ConfigError(f"unknown config sections: {sorted(unknown)}")
        kw = {}
        for name, section in SECTIONS.items():
            if d.get(name) is not None:
                if not isinstance(d[name], dict):
                    raise ConfigError(f"section {name!r} must be a mapping")
                kw[name] = section.from_dict(d[name])
        cfg = cls(**kw)
        cfg.validate()
        return cfg

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            val = getattr(self, f.name)
            if val is not None:
                out[f.name] = {k: v for k, v in asdict(val).items() if v is not None}
        return out

    def dumps(self, fmt: str = "yaml") -> str:
        if fmt == "json":
            return json.dumps(self.to_dict(), indent=2)
        return yaml.safe_dump(self.to_dict(), sort_keys=False)

    def require(self, *names: str) -> None:
        missing = [n for n in names if getattr(self, n) is None]
        if missing:
            raise ConfigError(f"config is missing section(s): {', '.join(missing)}")

    def validate(self) -> None:
        """Cross-section dimension checks; sections that are absent are skipped."""
        n = m = None
        if self.agent is not None:
            A, B = np.array(self.agent.A), np.array(self.agent.B)
            if A.shape[0] != A.shape[1]:
                raise DimensionMismatch(f"agent.A must be square, got {A.shape}")
            if B.shape[0] != A.shape[0]:
                raise DimensionMismatch(f"agent.B has {B.shape[0]} rows, A has {A.shape[0]}")
            n, m = B.shape
        if self.sector is not None:
            s = self.sector
            if len(s.sigma1) != len(s.sigma2):
                raise DimensionMismatch("sector.sigma1 and sector.sigma2 differ in length")
            if n is not None and len(s.sigma1) not in (1, n):
                raise DimensionMismatch(f"sector has {len(s.sigma1)} components, agents have n={n}")
        if self.synthesis is not None and self.synthesis.gain is not None and n is not None:
            if np.array(self.synthesis.gain).shape != (m, n):
                raise DimensionMismatch(f"synthesis.gain must be {m}x{n}")
        if self.simulation is not None and self.graph is not None:
            if len(self.simulation.x0) != self.graph.nodes:
                raise DimensionMismatch(f"simulation.x0 needs {self.graph.nodes} rows")
            if n is not None and len(self.simulation.x0[0]) != n:
                raise DimensionMismatch(f"simulation.x0 rows must have length n={n}")

    # builders -----------------------------------------------------------

    def network(self):
        self.require("graph")
        return build_graph(self.graph.nodes, self.graph.edges)

    def agents(self):
        from .edge import AgentDynamics
        self.require("agent")
        return AgentDynamics(np.array(self.agent.A), np.array(self.agent.B))

    def bounds(self) -> SectorBounds:
        self.require("sector", "agent")
        n = len(self.agent.A)
        s1, s2 = self.sector.sigma1, self.sector.sigma2
        if len(s1) == 1:
            s1, s2 = s1 * n, s2 * n
        return SectorBounds(tuple(s1), tuple(s2))

    def bank(self, M: int, seed: int | None = None) -> ChannelBank:
        bounds = self.bounds()
        s, n = self.sector, bounds.n
        if s.kind == "identity":
            return ChannelBank.identity(M, n, bounds)
        if s.kind == "saturation":
            if s.limits is None:
                raise ConfigError("sector.limits required for saturation channels")
            limits = s.limits * n if len(s.limits) == 1 else s.limits
            return ChannelBank.saturation(M, limits, s.operating_bounds, bounds)
        if s.kind == "static_gain":
            if s.gains is None:
                raise ConfigError("sector.gains required for static_gain channels")
            return ChannelBank.static_gains(M, s.gains, n, bounds)
        if s.kind == "random_gain":
            seed = s.seed if seed is None else seed
            return ChannelBank.random_gains(M, bounds, 0 if seed is None else seed)
        if s.table_x is None or s.table_y is None:
            raise ConfigError("sector.table_x and sector.table_y required for table channels")
        return ChannelBank([SectorChannel.table(s.table_x, s.table_y)] * (M * n), n, bounds)

    def x0(self) -> np.ndarray:
        self.require("simulation")
        return np.array(self.simulation.x0).ravel()

    def gain(self) -> np.ndarray | None:
        if self.synthesis is None or self.synthesis.gain is None:
            return None
        return np.array(self.synthesis.gain)

    def matrices(self):
        return graph_matrices(self.network())


def loads(text: str) -> RunConfig:
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse config: {exc}") from None
    return RunConfig.from_dict(data or {})


def load(path: str | Path) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return loads(text)


def shipped(name: str) -> RunConfig:
    """One of the configs bundled with the package (``robots``, ``oscillators-constrained``, ...)."""
    fname = name.replace("-", "_") + ".yaml"
    ref = resources.files("lurecons").joinpath("configs", fname)
    if not ref.is_file():
        raise ConfigError(f"no shipped config named {name!r}")
    return loads(ref.read_text())


def shipped_names() -> list[str]:
    root = resources.files("lurecons").joinpath("configs")
    return sorted(p.name[:-5].replace("_", "-") for p in root.iterdir() if p.name.endswith(".yaml"))


def apply_overrides(cfg: RunConfig, overrides: dict[str, Any]) -> RunConfig:
    """Apply CLI-level overrides (eps, step, horizon, seed, out) in place."""
    if overrides.get("eps") is not None:
        cfg.synthesis = cfg.synthesis or SynthesisSection()
        cfg.synthesis.epsilon = float(overrides["eps"])
    for key in ("step", "horizon"):
        if overrides.get(key) is not None:
            cfg.require("simulation")
            setattr(cfg.simulation, key, float(overrides[key]))
    if overrides.get("seed") is not None and cfg.sector is not None:
        cfg.sector.seed = int(overrides["seed"])
    if overrides.get("out") is not None:
        cfg.output.directory = str(overrides["out"])
    if overrides.get("format") is not None:
        cfg.output.formats = [overrides["format"]]
    return cfg
