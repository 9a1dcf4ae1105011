"""Declarative file formats: system descriptions, topologies, gains, traces.

All files are JSON with 0-indexed coordinates; human-facing reports elsewhere
render 1-indexed state names.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np

from .errors import ParseError
from .fusion import FusionMode, TopologyDesign
from .numerics import (
    GainMatrix,
    NumericSystem,
    instantiate,
    row_stochastic,
    spectral_radius,
)
from .patterns import SparsityPattern


@dataclass(frozen=True)
class NumericSpec:
    """Optional numeric section of a system description."""

    seed: int = 0
    rho_target: float | None = None
    V: float = 0.0
    R: float = 0.0
    x0_range: tuple[float, float] = (0.0, 3.0)


@dataclass(frozen=True)
class SystemDescription:
    """Declarative system: state-pattern coordinates plus per-agent output rows."""

    n: int
    a_coords: tuple[tuple[int, int], ...]
    agents: tuple[str, ...]
    c_coords: Mapping[str, tuple[tuple[int, int], ...]]
    c_rows: Mapping[str, int] = field(default_factory=dict)
    numeric: NumericSpec | None = None

    def a_pattern(self) -> SparsityPattern:
        return SparsityPattern.from_coords(self.n, self.n, self.a_coords)

    def c_patterns(self) -> dict[str, SparsityPattern]:
        pats = {}
        for agent in self.agents:
            coords = self.c_coords[agent]
            declared = self.c_rows.get(agent)
            rows = declared if declared is not None else (
                max((r for r, _ in coords), default=-1) + 1
            )
            pats[agent] = SparsityPattern.from_coords(rows, self.n, coords)
        return pats


def _expect(cond: bool, where: str, message: str) -> None:
    if not cond:
        raise ParseError(f"{where}: {message}")


def _coord_list(raw, where: str, rows: int | None, cols: int) -> tuple[tuple[int, int], ...]:
    _expect(isinstance(raw, list), where, "expected a list of [row, col] pairs")
    out = []
    for k, pair in enumerate(raw):
        loc = f"{where}[{k}]"
        _expect(
            isinstance(pair, list) and len(pair) == 2, loc, "expected a [row, col] pair"
        )
        r, c = pair
        _expect(isinstance(r, int) and isinstance(c, int), loc, "indices must be integers")
        _expect(r >= 0 and c >= 0, loc, "indices must be nonnegative")
        if rows is not None:
            _expect(r < rows, loc, f"row {r} out of bounds (< {rows})")
        _expect(c < cols, loc, f"column {c} out of bounds (< {cols})")
        out.append((r, c))
    return tuple(out)


def system_from_dict(data: dict) -> SystemDescription:
    _expect(isinstance(data, dict), "system", "expected a JSON object")
    _expect("n" in data, "system.n", "missing")
    n = data["n"]
    _expect(isinstance(n, int) and n >= 1, "system.n", "must be a positive integer")
    a_coords = _coord_list(data.get("A", []), "system.A", n, n)
    raw_agents = data.get("agents")
    _expect(isinstance(raw_agents, list) and raw_agents, "system.agents", "need at least one agent")
    ids: list[str] = []
    c_coords: dict[str, tuple[tuple[int, int], ...]] = {}
    c_rows: dict[str, int] = {}
    for k, entry in enumerate(raw_agents):
        where = f"system.agents[{k}]"
        _expect(isinstance(entry, dict), where, "expected an object")
        agent = entry.get("id")
        _expect(isinstance(agent, str) and agent, f"{where}.id", "must be a nonempty string")
        _expect(agent not in c_coords, f"{where}.id", f"duplicate agent id {agent!r}")
        coords = _coord_list(entry.get("C", []), f"{where}.C", None, n)
        ids.append(agent)
        c_coords[agent] = coords
        if "rows" in entry:
            rows = entry["rows"]
            _expect(isinstance(rows, int) and rows >= 0, f"{where}.rows", "must be a nonnegative integer")
            _expect(
                all(r < rows for r, _ in coords), f"{where}.rows",
                "smaller than a listed coordinate row",
            )
            c_rows[agent] = rows
    numeric = None
    if "numeric" in data and data["numeric"] is not None:
        raw = data["numeric"]
        _expect(isinstance(raw, dict), "system.numeric", "expected an object")
        seed = raw.get("seed", 0)
        _expect(isinstance(seed, int), "system.numeric.seed", "must be an integer")
        rho = raw.get("rho_target")
        if rho is not None:
            _expect(isinstance(rho, (int, float)) and rho > 0, "system.numeric.rho_target", "must be positive")
        V = raw.get("V", 0.0)
        _expect(isinstance(V, (int, float)) and V >= 0, "system.numeric.V", "must be nonnegative")
        R = raw.get("R", 0.0)
        _expect(isinstance(R, (int, float)) and R >= 0, "system.numeric.R", "must be nonnegative")
        x0 = raw.get("x0_range", [0.0, 3.0])
        _expect(
            isinstance(x0, list) and len(x0) == 2 and all(isinstance(v, (int, float)) for v in x0),
            "system.numeric.x0_range", "expected [lo, hi]",
        )
        numeric = NumericSpec(seed=seed, rho_target=rho, V=float(V), R=float(R),
                              x0_range=(float(x0[0]), float(x0[1])))
    return SystemDescription(
        n=n,
        a_coords=a_coords,
        agents=tuple(ids),
        c_coords=c_coords,
        c_rows=c_rows,
        numeric=numeric,
    )


def system_to_dict(desc: SystemDescription) -> dict:
    data: dict = {
        "n": desc.n,
        "A": [list(rc) for rc in desc.a_coords],
        "agents": [
            {"id": a, "C": [list(rc) for rc in desc.c_coords[a]],
             **({"rows": desc.c_rows[a]} if a in desc.c_rows else {})}
            for a in desc.agents
        ],
    }
    if desc.numeric is not None:
        num = desc.numeric
        data["numeric"] = {
            "seed": num.seed,
            "V": num.V,
            "R": num.R,
            "x0_range": list(num.x0_range),
        }
        if num.rho_target is not None:
            data["numeric"]["rho_target"] = num.rho_target
    return data


def load_system(path: str | Path) -> SystemDescription:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    except OSError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    return system_from_dict(data)


# ---------------------------------------------------------------------------
# topology files

_MODES = {m.value: m for m in FusionMode}


def topology_from_dict(data: dict) -> TopologyDesign:
    _expect(isinstance(data, dict), "topology", "expected a JSON object")
    agents = data.get("agents")
    _expect(
        isinstance(agents, list) and agents and all(isinstance(a, str) for a in agents),
        "topology.agents", "expected a list of agent ids",
    )
    mode = data.get("mode")
    _expect(mode in _MODES, "topology.mode", f"expected one of {sorted(_MODES)}")
    raw_edges = data.get("flow_edges", [])
    _expect(isinstance(raw_edges, list), "topology.flow_edges", "expected a list")
    known = set(agents)
    edges = set()
    for k, pair in enumerate(raw_edges):
        where = f"topology.flow_edges[{k}]"
        _expect(isinstance(pair, list) and len(pair) == 2, where, "expected [from, to]")
        u, v = pair
        _expect(u in known and v in known, where, f"unknown agent in edge [{u!r}, {v!r}]")
        _expect(u != v, where, "self edges are implied and must not be listed")
        edges.add((u, v))
    return TopologyDesign(tuple(agents), frozenset(edges), _MODES[mode])


def topology_to_dict(topo: TopologyDesign) -> dict:
    return {
        "agents": list(topo.agents),
        "flow_edges": [list(e) for e in sorted(topo.flow_edges)],
        "mode": topo.mode.value,
    }


def load_topology(path: str | Path) -> TopologyDesign:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    except OSError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    return topology_from_dict(data)


def save_topology(topo: TopologyDesign, path: str | Path) -> None:
    Path(path).write_text(json.dumps(topology_to_dict(topo), indent=2) + "\n")


# ---------------------------------------------------------------------------
# gain files

def gain_to_dict(agents: tuple[str, ...], gain: GainMatrix, rho: float,
                 method: str, seed: int) -> dict:
    return {
        "agents": list(agents),
        "blocks": {a: gain.blocks[i].tolist() for i, a in enumerate(agents)},
        "rho": rho,
        "method": method,
        "seed": seed,
    }


def gain_from_dict(data: dict) -> tuple[tuple[str, ...], GainMatrix, dict]:
    _expect(isinstance(data, dict), "gain", "expected a JSON object")
    agents = data.get("agents")
    _expect(
        isinstance(agents, list) and agents and all(isinstance(a, str) for a in agents),
        "gain.agents", "expected a list of agent ids",
    )
    blocks_raw = data.get("blocks")
    _expect(isinstance(blocks_raw, dict), "gain.blocks", "expected an object keyed by agent id")
    blocks = []
    for a in agents:
        _expect(a in blocks_raw, f"gain.blocks.{a}", "missing block")
        block = np.asarray(blocks_raw[a], dtype=float)
        _expect(block.ndim == 2 and block.shape[0] == block.shape[1],
                f"gain.blocks.{a}", "block must be a square matrix")
        blocks.append(block)
    meta = {k: data[k] for k in ("rho", "method", "seed") if k in data}
    return tuple(agents), GainMatrix(tuple(blocks)), meta


def load_gain(path: str | Path) -> tuple[tuple[str, ...], GainMatrix, dict]:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    except OSError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    return gain_from_dict(data)


def save_gain(agents: tuple[str, ...], gain: GainMatrix, rho: float, method: str,
              seed: int, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(gain_to_dict(agents, gain, rho, method, seed), indent=2) + "\n"
    )


# ---------------------------------------------------------------------------
# numeric realization

def realize(desc: SystemDescription, topo: TopologyDesign, seed: int | None = None) -> NumericSystem:
    """Instantiate concrete values for a system description on a topology.

    The A instantiation is rescaled to the requested spectral radius when the
    description asks for one. Output-fusion-only topologies get identity fusion
    weights (no state exchange) while keeping the measurement-sharing
    neighborhoods from the flow edges.
    """
    if tuple(desc.agents) != topo.agents:
        raise ParseError(
            f"system and topology disagree on agents: {desc.agents} vs {topo.agents}"
        )
    num = desc.numeric or NumericSpec()
    base_seed = num.seed if seed is None else seed
    A = instantiate(desc.a_pattern(), base_seed)
    if num.rho_target is not None:
        rho = spectral_radius(A)
        if rho <= 0:
            raise ParseError("cannot rescale: instantiated system matrix is nilpotent")
        A = A * (num.rho_target / rho)
    C = {
        agent: instantiate(pat, base_seed + 1 + i)
        for i, (agent, pat) in enumerate(desc.c_patterns().items())
    }
    N = topo.agent_count
    if topo.mode is FusionMode.OUTPUT:
        W = np.eye(N)
    else:
        W = row_stochastic(topo, base_seed + 997)
    hoods = topo.neighborhoods()
    return NumericSystem(
        agents=topo.agents,
        A=A,
        C=C,
        W=W,
        V=num.V,
        R={a: num.R for a in topo.agents},
        output_fusion=topo.mode is not FusionMode.STATE,
        sources={a: hoods[a] for a in topo.agents},
    )
