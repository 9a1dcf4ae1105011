"""Distributed-system construction and communication-topology design.

A flow edge (u, v) means agent v receives data from agent u, i.e. u is in v's
extended neighborhood and w_vu is a free nonzero. Designs return the flow
edges sufficient for the networked estimator's structure to be generically
observable in the requested fusion mode.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Mapping

from .errors import (
    DimensionError,
    NotObservableError,
    PlacementError,
    SRankDeficientError,
)
from .patterns import SparsityPattern, stack_patterns
from .structure import (
    AgentClassification,
    AgentType,
    ObservabilityReport,
    SccKind,
    build_digraph,
    generic_observability,
    scc_decompose,
)


class FusionMode(str, Enum):
    STATE = "state-fusion-only"
    OUTPUT = "output-fusion-only"
    COMBINED = "combined"


@dataclass(frozen=True)
class TopologyDesign:
    """Directed agent communication graph plus the fusion mode it targets."""

    agents: tuple[str, ...]
    flow_edges: frozenset[tuple[str, str]]
    mode: FusionMode

    def __post_init__(self):
        known = set(self.agents)
        if len(known) != len(self.agents):
            raise DimensionError("duplicate agent ids")
        for u, v in self.flow_edges:
            if u not in known or v not in known:
                raise DimensionError(f"flow edge ({u!r}, {v!r}) references unknown agent")
            if u == v:
                raise DimensionError(f"self flow edge on agent {u!r} (diagonal is implied)")

    @property
    def agent_count(self) -> int:
        return len(self.agents)

    @property
    def W_pattern(self) -> SparsityPattern:
        """Receiver-by-source pattern: w_vu free iff v receives from u or u = v."""
        idx = {a: i for i, a in enumerate(self.agents)}
        nz = {(i, i) for i in range(len(self.agents))}
        nz.update((idx[v], idx[u]) for (u, v) in self.flow_edges)
        return SparsityPattern(len(self.agents), len(self.agents), frozenset(nz))

    def neighborhoods(self) -> dict[str, tuple[str, ...]]:
        """Extended neighborhood per agent: itself plus its in-flow sources."""
        hood: dict[str, set[str]] = {a: {a} for a in self.agents}
        for u, v in self.flow_edges:
            hood[v].add(u)
        return {a: tuple(sorted(hood[a])) for a in self.agents}

    def without_edge(self, edge: tuple[str, str]) -> "TopologyDesign":
        return replace(self, flow_edges=self.flow_edges - {edge})

    def has_flow_path(self, src: str, dst: str) -> bool:
        if src == dst:
            return True
        out: dict[str, set[str]] = {a: set() for a in self.agents}
        for u, v in self.flow_edges:
            out[u].add(v)
        seen = {src}
        frontier = [src]
        while frontier:
            nxt = []
            for a in frontier:
                for b in out[a]:
                    if b == dst:
                        return True
                    if b not in seen:
                        seen.add(b)
                        nxt.append(b)
            frontier = nxt
        return False


def identity_topology(agents, mode: FusionMode = FusionMode.STATE) -> TopologyDesign:
    return TopologyDesign(tuple(agents), frozenset(), mode)


def complete_topology(agents, mode: FusionMode = FusionMode.COMBINED) -> TopologyDesign:
    agents = tuple(agents)
    edges = frozenset((u, v) for u in agents for v in agents if u != v)
    return TopologyDesign(agents, edges, mode)


@dataclass(frozen=True)
class DistributedPattern:
    """Structure of the networked pair: system = W kron A, output = block-diagonal."""

    system: SparsityPattern
    output: SparsityPattern
    mode: FusionMode


@dataclass(frozen=True)
class DistributedReport:
    """Observability verdict for the networked structure.

    Violations are global distributed-state indices; agent_violations maps each
    agent to the block-local states of its subsystem that cannot reach an output.
    """

    observable: bool
    condition_i_violations: frozenset[int]
    srank_stack: int
    deficiency: int
    agent_violations: Mapping[str, frozenset[int]] = field(default_factory=dict)

    def as_report(self) -> ObservabilityReport:
        return ObservabilityReport(
            self.observable,
            self.condition_i_violations,
            self.srank_stack,
            self.deficiency,
        )


# ---------------------------------------------------------------------------
# distributed pattern construction

def kron_pattern(W_pat: SparsityPattern, A_pat: SparsityPattern) -> SparsityPattern:
    """Kronecker product of two patterns: block (i, j) holds A's pattern iff w_ij is free."""
    N, n = W_pat.rows, A_pat.rows
    if W_pat.cols != N:
        raise DimensionError(f"W pattern must be square, got {W_pat.shape}")
    if A_pat.cols != n:
        raise DimensionError(f"A pattern must be square, got {A_pat.shape}")
    nz = set()
    for i, j in W_pat.nonzeros:
        for r, c in A_pat.nonzeros:
            nz.add((i * n + r, j * n + c))
    return SparsityPattern(N * n, N * n, frozenset(nz))


def build_dc(
    C_pats: Mapping[str, SparsityPattern],
    topo: TopologyDesign,
    output_fusion: bool,
) -> SparsityPattern:
    """Block-diagonal pattern of the innovation operator.

    Block i is the union over neighbors j (just i itself without output fusion)
    of the outer-product support of agent j's measurement rows.
    """
    if tuple(C_pats) != topo.agents:
        raise DimensionError(
            f"agent ids disagree: patterns {tuple(C_pats)} vs topology {topo.agents}"
        )
    n = next(iter(C_pats.values())).cols
    gram: dict[str, set[tuple[int, int]]] = {}
    for agent, pat in C_pats.items():
        if pat.cols != n:
            raise DimensionError(f"agent {agent!r} pattern has {pat.cols} columns, expected {n}")
        entries: set[tuple[int, int]] = set()
        for r in range(pat.rows):
            support = sorted(pat.row_support(r))
            entries.update((p, q) for p in support for q in support)
        gram[agent] = entries
    hoods = topo.neighborhoods()
    nz = set()
    for i, agent in enumerate(topo.agents):
        sources = hoods[agent] if output_fusion else (agent,)
        for j in sources:
            nz.update((i * n + p, i * n + q) for (p, q) in gram[j])
    N = topo.agent_count
    return SparsityPattern(N * n, N * n, frozenset(nz))


def build_distributed(
    A_pat: SparsityPattern,
    C_pats: Mapping[str, SparsityPattern],
    topo: TopologyDesign,
    output_fusion: bool,
    state_fusion: bool = True,
) -> DistributedPattern:
    W = topo.W_pattern if state_fusion else SparsityPattern.identity(topo.agent_count)
    if output_fusion and state_fusion:
        mode = FusionMode.COMBINED
    elif output_fusion:
        mode = FusionMode.OUTPUT
    else:
        mode = FusionMode.STATE
    return DistributedPattern(
        system=kron_pattern(W, A_pat),
        output=build_dc(C_pats, topo, output_fusion),
        mode=mode,
    )


# ---------------------------------------------------------------------------
# verification

def verify_distributed(
    A_pat: SparsityPattern,
    C_pats: Mapping[str, SparsityPattern],
    topo: TopologyDesign,
    output_fusion: bool,
    state_fusion: bool = True,
) -> DistributedReport:
    """Generic observability of the networked structure under the given fusion."""
    dist = build_distributed(A_pat, C_pats, topo, output_fusion, state_fusion)
    report = generic_observability(dist.system, dist.output)
    n = A_pat.rows
    per_agent = {
        agent: frozenset(
            v % n for v in report.condition_i_violations if v // n == i
        )
        for i, agent in enumerate(topo.agents)
    }
    return DistributedReport(
        observable=report.observable,
        condition_i_violations=report.condition_i_violations,
        srank_stack=report.srank_stack,
        deficiency=report.deficiency,
        agent_violations=per_agent,
    )


def verify_topology(
    A_pat: SparsityPattern,
    C_pats: Mapping[str, SparsityPattern],
    topo: TopologyDesign,
) -> DistributedReport:
    """Verify under the fusion semantics the topology was designed for.

    State-fusion-only excludes output exchange; output-fusion-only checks the
    subsystems without state exchange (identity state-fusion weights); combined
    uses both.
    """
    if topo.mode is FusionMode.STATE:
        return verify_distributed(A_pat, C_pats, topo, output_fusion=False)
    if topo.mode is FusionMode.OUTPUT:
        return verify_distributed(A_pat, C_pats, topo, output_fusion=True, state_fusion=False)
    return verify_distributed(A_pat, C_pats, topo, output_fusion=True)


# ---------------------------------------------------------------------------
# topology synthesis

def _measured_states(C_pats: Mapping[str, SparsityPattern]) -> dict[str, set[int]]:
    return {
        agent: {c for (_, c) in pat.nonzeros} for agent, pat in C_pats.items()
    }


def _connect_all_to_observers(
    agents: tuple[str, ...],
    requirement_groups: list[list[str]],
    edges: set[tuple[str, str]],
) -> None:
    """For each group of valid observer agents, give every agent a flow path to
    one of them, attaching through the lexicographically first already-connected
    agent. Mutates edges in place; deterministic."""
    for observers in requirement_groups:
        for u in sorted(agents):
            topo = TopologyDesign(agents, frozenset(edges), FusionMode.STATE)
            if any(topo.has_flow_path(u, j) for j in observers):
                continue
            candidates = sorted(
                v
                for v in agents
                if v != u and any(topo.has_flow_path(v, j) for j in observers)
            )
            edges.add((u, candidates[0]))


def design_state_fusion_full_srank(
    A_pat: SparsityPattern, C_pats: Mapping[str, SparsityPattern]
) -> TopologyDesign:
    """State-fusion topology for structurally full-rank system matrices.

    Every agent gets a directed flow path to an observer of each parent
    component. Requires the system matrix to be structurally full rank and every
    parent component to be measured by someone.
    """
    from .structure import s_rank

    n = A_pat.rows
    if s_rank(A_pat) < n:
        raise SRankDeficientError(
            "state fusion alone cannot recover observability for a structurally "
            "rank-deficient system matrix; use the combined design"
        )
    g = build_digraph(A_pat, C_pats)
    sccs = scc_decompose(g)
    measured = _measured_states(C_pats)
    agents = tuple(C_pats)
    groups = []
    for comp, kind in zip(sccs.components, sccs.kinds):
        if kind is not SccKind.PARENT:
            continue
        observers = sorted(a for a in agents if measured[a] & comp)
        if not observers:
            raise PlacementError(comp)
        groups.append(observers)
    edges: set[tuple[str, str]] = set()
    _connect_all_to_observers(agents, groups, edges)
    return TopologyDesign(agents, frozenset(edges), FusionMode.STATE)


def design_output_fusion(
    A_pat: SparsityPattern,
    C_pats: Mapping[str, SparsityPattern],
    classification: AgentClassification,
) -> TopologyDesign:
    """Output-fusion topology: crucial agents pairwise linked, and every
    non-crucial agent receives from every crucial agent."""
    agents = tuple(C_pats)
    crucial = [a for a in agents if classification[a].crucial]
    edges: set[tuple[str, str]] = set()
    for u in crucial:
        for v in agents:
            if v != u:
                edges.add((u, v))
    return TopologyDesign(agents, frozenset(edges), FusionMode.OUTPUT)


def design_main(
    A_pat: SparsityPattern,
    C_pats: Mapping[str, SparsityPattern],
    classification: AgentClassification,
) -> TopologyDesign:
    """Combined-fusion topology with locally minimal communication.

    Alpha agents broadcast to everyone; every agent gets a flow path to an
    observer of each parent component that lacks an alpha observer. Edges whose
    individual removal keeps the verified structure observable are then pruned,
    first in lexicographic order, until none remains.
    """
    agents = tuple(C_pats)
    alphas = [a for a in agents if classification[a].type is AgentType.ALPHA]
    edges: set[tuple[str, str]] = set()
    for a in alphas:
        edges.update((a, v) for v in agents if v != a)

    g = build_digraph(A_pat, C_pats)
    sccs = scc_decompose(g)
    measured = _measured_states(C_pats)
    groups = []
    for comp, kind in zip(sccs.components, sccs.kinds):
        if kind is not SccKind.PARENT:
            continue
        observers = sorted(a for a in agents if measured[a] & comp)
        if not observers:
            raise PlacementError(comp)
        if any(classification[a].type is AgentType.ALPHA for a in observers):
            continue  # the broadcast already delivers this component's measurement
        betas = [a for a in observers if classification[a].type is AgentType.BETA]
        groups.append(betas if betas else observers)
    _connect_all_to_observers(agents, groups, edges)

    topo = TopologyDesign(agents, frozenset(edges), FusionMode.COMBINED)
    while True:
        removable = local_minimality_check(A_pat, C_pats, topo)
        if not removable:
            return topo
        topo = topo.without_edge(removable[0])


def local_minimality_check(
    A_pat: SparsityPattern,
    C_pats: Mapping[str, SparsityPattern],
    topo: TopologyDesign,
) -> list[tuple[str, str]]:
    """Flow edges whose individual removal keeps the topology verified.

    An empty list certifies local minimality. The topology itself must verify.
    """
    if not verify_topology(A_pat, C_pats, topo).observable:
        raise NotObservableError("topology does not verify; minimality is undefined")
    removable = []
    for edge in sorted(topo.flow_edges):
        if verify_topology(A_pat, C_pats, topo.without_edge(edge)).observable:
            removable.append(edge)
    return removable
