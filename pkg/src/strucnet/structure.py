"""Structure-only (generic) analysis of a monitored linear system.

Everything here operates on sparsity patterns and the system digraph built from
them: strongly connected components, structural rank, generic observability,
and the disjoint cycle / output-terminated-path cover used to classify agents.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from enum import Enum
from itertools import combinations
from typing import Mapping

from .errors import DimensionError, NotObservableError
from .patterns import SparsityPattern, stack_patterns

# Improvement search over path-state subsets is exhaustive up to this many path
# states (certified optimal against brute force in tests); beyond it, subset
# size is capped and the cover is best-effort.
_EXHAUSTIVE_PATH_LIMIT = 14
_CAPPED_SUBSET_SIZE = 3


class SccKind(str, Enum):
    PARENT = "parent"
    CHILD = "child"


class CycleKind(str, Enum):
    PARENT = "parent"
    CHILD = "child"


class AgentType(str, Enum):
    ALPHA = "alpha"
    BETA = "beta"
    GAMMA = "gamma"
    UNMEASURING = "unmeasuring"


@dataclass(frozen=True)
class OutputVertex:
    """One output row y_r, tagged with the agent that owns it."""

    index: int
    agent: str
    local_row: int


@dataclass(frozen=True)
class SystemDigraph:
    """Digraph on state and output vertices.

    state_edges holds (src, dst) pairs: a_{dst,src} nonzero sends src -> dst.
    output_edges holds (state, output index) pairs. Output vertices have no
    outgoing edges by construction.
    """

    n: int
    outputs: tuple[OutputVertex, ...]
    state_edges: frozenset[tuple[int, int]]
    output_edges: frozenset[tuple[int, int]]

    @property
    def p(self) -> int:
        return len(self.outputs)

    def state_successors(self, v: int) -> list[int]:
        return sorted(w for (u, w) in self.state_edges if u == v)


@dataclass(frozen=True)
class SccDecomposition:
    """Partition of the state vertices into maximal strongly connected components.

    Components are ordered by smallest member. A component is a parent when no
    state edge leaves it for another component.
    """

    components: tuple[frozenset[int], ...]
    kinds: tuple[SccKind, ...]
    condensation_edges: frozenset[tuple[int, int]]

    def parents(self) -> list[frozenset[int]]:
        return [c for c, k in zip(self.components, self.kinds) if k is SccKind.PARENT]

    def component_of(self, v: int) -> int:
        for i, c in enumerate(self.components):
            if v in c:
                return i
        raise KeyError(v)


@dataclass(frozen=True)
class YToppedPath:
    """Simple state path terminating at an output vertex."""

    states: tuple[int, ...]
    output: int
    agent: str


@dataclass(frozen=True)
class CoverFamily:
    """Disjoint cycles plus output-terminated paths covering every state.

    Cycles are listed in traversal order, rotated to start at their smallest
    state, and sorted by that state; paths are sorted by head state.
    """

    cycles: tuple[tuple[int, ...], ...]
    cycle_kinds: tuple[CycleKind, ...]
    ytopped_paths: tuple[YToppedPath, ...]

    def cycle_states(self) -> frozenset[int]:
        return frozenset(v for cyc in self.cycles for v in cyc)

    def path_states(self) -> frozenset[int]:
        return frozenset(v for p in self.ytopped_paths for v in p.states)

    def parent_cycles(self) -> list[tuple[int, ...]]:
        return [c for c, k in zip(self.cycles, self.cycle_kinds) if k is CycleKind.PARENT]


@dataclass(frozen=True)
class AgentVerdict:
    agent: str
    type: AgentType
    crucial: bool
    witness: tuple


@dataclass(frozen=True)
class AgentClassification:
    verdicts: tuple[AgentVerdict, ...]
    cover: CoverFamily

    def __getitem__(self, agent: str) -> AgentVerdict:
        for v in self.verdicts:
            if v.agent == agent:
                return v
        raise KeyError(agent)

    def crucial_agents(self) -> list[str]:
        return [v.agent for v in self.verdicts if v.crucial]


@dataclass(frozen=True)
class ObservabilityReport:
    observable: bool
    condition_i_violations: frozenset[int]
    srank_stack: int
    deficiency: int


# ---------------------------------------------------------------------------
# digraph construction

def build_digraph(
    A_pat: SparsityPattern, C_pats: Mapping[str, SparsityPattern]
) -> SystemDigraph:
    """System digraph from the state pattern and one output pattern per agent."""
    n = A_pat.rows
    if A_pat.cols != n:
        raise DimensionError(f"state pattern must be square, got {A_pat.shape}")
    outputs: list[OutputVertex] = []
    output_edges: set[tuple[int, int]] = set()
    for agent, pat in C_pats.items():
        if pat.cols != n:
            raise DimensionError(
                f"agent {agent!r} output pattern has {pat.cols} columns, expected {n}"
            )
        for local in range(pat.rows):
            idx = len(outputs)
            outputs.append(OutputVertex(index=idx, agent=agent, local_row=local))
            for c in pat.row_support(local):
                output_edges.add((c, idx))
    state_edges = frozenset((j, i) for (i, j) in A_pat.nonzeros)
    return SystemDigraph(
        n=n,
        outputs=tuple(outputs),
        state_edges=state_edges,
        output_edges=frozenset(output_edges),
    )


def stack_agent_outputs(C_pats: Mapping[str, SparsityPattern]) -> SparsityPattern:
    """Stack per-agent output patterns into one global pattern (agent order)."""
    pats = list(C_pats.values())
    if not pats:
        raise DimensionError("no agents")
    return stack_patterns(*pats)


# ---------------------------------------------------------------------------
# strongly connected components

def scc_decompose(g: SystemDigraph) -> SccDecomposition:
    """Tarjan over the state vertices; iterative to keep deep graphs safe."""
    n = g.n
    adj: list[list[int]] = [[] for _ in range(n)]
    for u, w in sorted(g.state_edges):
        adj[u].append(w)

    index = [-1] * n
    low = [0] * n
    on_stack = [False] * n
    stack: list[int] = []
    counter = 0
    comp_id = [-1] * n
    comps: list[list[int]] = []

    for root in range(n):
        if index[root] != -1:
            continue
        work: list[tuple[int, int]] = [(root, 0)]
        while work:
            v, ei = work[-1]
            if ei == 0:
                index[v] = low[v] = counter
                counter += 1
                stack.append(v)
                on_stack[v] = True
            advanced = False
            while ei < len(adj[v]):
                w = adj[v][ei]
                ei += 1
                if index[w] == -1:
                    work[-1] = (v, ei)
                    work.append((w, 0))
                    advanced = True
                    break
                if on_stack[w]:
                    low[v] = min(low[v], index[w])
            if advanced:
                continue
            work.pop()
            if low[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack[w] = False
                    comp_id[w] = len(comps)
                    comp.append(w)
                    if w == v:
                        break
                comps.append(comp)
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[v])

    order = sorted(range(len(comps)), key=lambda i: min(comps[i]))
    rank = {old: new for new, old in enumerate(order)}
    components = tuple(frozenset(comps[i]) for i in order)
    cond_edges = frozenset(
        (rank[comp_id[u]], rank[comp_id[w]])
        for (u, w) in g.state_edges
        if comp_id[u] != comp_id[w]
    )
    has_out = {src for (src, _) in cond_edges}
    kinds = tuple(
        SccKind.CHILD if i in has_out else SccKind.PARENT
        for i in range(len(components))
    )
    return SccDecomposition(components, kinds, cond_edges)


# ---------------------------------------------------------------------------
# bipartite matching (columns of a pattern vs. its rows)

def _hopcroft_karp(adjacency: list[list[int]], n_cols: int) -> list[int]:
    """Maximum matching; adjacency[c] lists candidate rows in preference order.

    Returns the matched row per column (-1 when unmatched). Deterministic:
    columns in ascending order, rows in the listed order.
    """
    INF = float("inf")
    match_col = [-1] * n_cols
    match_row: dict[int, int] = {}
    dist: list[float] = [0.0] * n_cols

    def bfs() -> bool:
        q: deque[int] = deque()
        for c in range(n_cols):
            if match_col[c] == -1:
                dist[c] = 0
                q.append(c)
            else:
                dist[c] = INF
        found = INF
        while q:
            c = q.popleft()
            if dist[c] >= found:
                continue
            for r in adjacency[c]:
                other = match_row.get(r, -1)
                if other == -1:
                    found = min(found, dist[c] + 1)
                elif dist[other] == INF:
                    dist[other] = dist[c] + 1
                    q.append(other)
        return found != INF

    def dfs(c: int) -> bool:
        for r in adjacency[c]:
            other = match_row.get(r, -1)
            if other == -1 or (dist[other] == dist[c] + 1 and dfs(other)):
                match_col[c] = r
                match_row[r] = c
                return True
        dist[c] = INF
        return False

    while bfs():
        for c in range(n_cols):
            if match_col[c] == -1:
                dfs(c)
    return match_col


def s_rank(p: SparsityPattern) -> int:
    """Structural (generic) rank: maximum matching of the row-column bipartite graph."""
    col_rows: dict[int, list[int]] = {}
    for r, c in sorted(p.nonzeros):
        col_rows.setdefault(c, []).append(r)
    adjacency = [sorted(col_rows.get(c, [])) for c in range(p.cols)]
    match = _hopcroft_karp(adjacency, p.cols)
    return sum(1 for r in match if r != -1)


# ---------------------------------------------------------------------------
# generic observability

def condition_i_check(g: SystemDigraph) -> frozenset[int]:
    """States from which no output is reachable (reverse reachability from outputs)."""
    rev: list[list[int]] = [[] for _ in range(g.n)]
    for u, w in g.state_edges:
        rev[w].append(u)
    seeds = {s for (s, _) in g.output_edges}
    seen = set(seeds)
    q = deque(seeds)
    while q:
        v = q.popleft()
        for u in rev[v]:
            if u not in seen:
                seen.add(u)
                q.append(u)
    return frozenset(range(g.n)) - frozenset(seen)


def generic_observability(
    A_pat: SparsityPattern, C_pat: SparsityPattern
) -> ObservabilityReport:
    """Generic observability of the pair of patterns.

    Observable iff every state reaches an output in the system digraph and the
    stacked pattern has full structural column rank. C_pat may be any stacked
    output pattern with matching column count, including a square one.
    """
    n = A_pat.rows
    if A_pat.cols != n:
        raise DimensionError(f"state pattern must be square, got {A_pat.shape}")
    if C_pat.cols != n:
        raise DimensionError(
            f"output pattern has {C_pat.cols} columns, expected {n}"
        )
    g = build_digraph(A_pat, {"_stacked": C_pat})
    violations = condition_i_check(g)
    srank = s_rank(stack_patterns(A_pat, C_pat))
    return ObservabilityReport(
        observable=(not violations) and srank == n,
        condition_i_violations=violations,
        srank_stack=srank,
        deficiency=n - srank,
    )


# ---------------------------------------------------------------------------
# cover family

def _cycle_matching(
    A_cols: dict[int, list[int]], S: frozenset[int]
) -> dict[int, int] | None:
    """Perfect matching of columns S against state rows S: spanning cycles on S."""
    cols = sorted(S)
    adjacency = [[r for r in A_cols.get(c, []) if r in S] for c in cols]
    match = _hopcroft_karp(adjacency, len(cols))
    if any(r == -1 for r in match):
        return None
    return {c: r for c, r in zip(cols, match)}


def _path_matching(
    A_cols: dict[int, list[int]],
    C_cols: dict[int, list[int]],
    rest: frozenset[int],
    n: int,
) -> dict[int, int] | None:
    """Saturating matching of columns `rest` against their own state rows plus
    all output rows; output rows are offset by n."""
    cols = sorted(rest)
    adjacency = [
        [r for r in A_cols.get(c, []) if r in rest]
        + [n + r for r in C_cols.get(c, [])]
        for c in cols
    ]
    match = _hopcroft_karp(adjacency, len(cols))
    if any(r == -1 for r in match):
        return None
    return {c: r for c, r in zip(cols, match)}


def _decompose_successors(
    succ: dict[int, int], term: dict[int, int], n: int
) -> tuple[list[list[int]], list[tuple[list[int], int]]]:
    """Split a successor assignment into cycles and output-terminated paths.

    succ maps a state to its successor state; term maps a state to its output
    row. Every state appears in exactly one of the two maps; rows are used at
    most once, so the structure is a disjoint union of simple cycles and paths.
    """
    on_cycle: set[int] = set()
    visited: set[int] = set()
    cycles: list[list[int]] = []
    for s in range(n):
        if s in visited:
            continue
        chain: list[int] = []
        pos: dict[int, int] = {}
        cur: int | None = s
        while cur is not None and cur not in visited and cur not in pos:
            pos[cur] = len(chain)
            chain.append(cur)
            cur = succ.get(cur)
        if cur is not None and cur in pos:
            cyc = chain[pos[cur]:]
            cycles.append(cyc)
            on_cycle.update(cyc)
        visited.update(chain)

    has_pred = set(succ.values())
    paths: list[tuple[list[int], int]] = []
    for s in range(n):
        if s in on_cycle or s in has_pred:
            continue
        states = [s]
        while states[-1] in succ:
            states.append(succ[states[-1]])
        paths.append((states, term[states[-1]]))
    return cycles, paths


def _canonical_cover(
    cycles: list[list[int]],
    paths: list[tuple[list[int], int]],
    g: SystemDigraph,
) -> CoverFamily:
    canon_cycles = []
    for cyc in cycles:
        k = cyc.index(min(cyc))
        canon_cycles.append(tuple(cyc[k:] + cyc[:k]))
    canon_cycles.sort(key=lambda c: c[0])
    kinds = []
    for cyc in canon_cycles:
        members = set(cyc)
        leaves = any(u in members and w not in members for (u, w) in g.state_edges)
        kinds.append(CycleKind.CHILD if leaves else CycleKind.PARENT)
    ypaths = tuple(
        YToppedPath(states=tuple(states), output=out, agent=g.outputs[out].agent)
        for states, out in sorted(paths)
    )
    return CoverFamily(tuple(canon_cycles), tuple(kinds), ypaths)


def maximal_cover(
    A_pat: SparsityPattern, C_pats: Mapping[str, SparsityPattern]
) -> CoverFamily:
    """Disjoint cycle + output-terminated-path cover maximizing cycle-covered states.

    Starts from a column-saturating matching of the stacked pattern (state rows
    preferred) and grows the cycle-covered set by re-matching supersets drawn
    from the current path states. Small instances are searched exhaustively;
    large ones cap the subset size at 3 and are best-effort.
    """
    n = A_pat.rows
    g = build_digraph(A_pat, C_pats)
    C_stack = stack_agent_outputs(C_pats)
    report = generic_observability(A_pat, C_stack)
    if not report.observable:
        raise NotObservableError(
            f"cover requires a generically observable system "
            f"(stack rank {report.srank_stack}/{n}, "
            f"{len(report.condition_i_violations)} unreachable states)"
        )

    A_cols: dict[int, list[int]] = {}
    for r, c in sorted(A_pat.nonzeros):
        A_cols.setdefault(c, []).append(r)
    C_cols: dict[int, list[int]] = {}
    for r, c in sorted(C_stack.nonzeros):
        C_cols.setdefault(c, []).append(r)

    all_states = frozenset(range(n))

    # Full structural rank: one spanning disjoint cycle family covers everything.
    full = _cycle_matching(A_cols, all_states)
    if full is not None:
        succ = {c: r for c, r in full.items()}
        cycles, paths = _decompose_successors(succ, {}, n)
        return _canonical_cover(cycles, paths, g)

    adjacency = [
        [r for r in A_cols.get(c, [])] + [n + r for r in C_cols.get(c, [])]
        for c in range(n)
    ]
    match = _hopcroft_karp(adjacency, n)
    succ = {c: r for c, r in enumerate(match) if r < n}
    term = {c: r - n for c, r in enumerate(match) if r >= n}

    while True:
        cycles, paths = _decompose_successors(succ, term, n)
        covered = {v for cyc in cycles for v in cyc}
        path_states = sorted(v for states, _ in paths for v in states)
        if not path_states:
            break
        if len(path_states) <= _EXHAUSTIVE_PATH_LIMIT:
            max_t = len(path_states)
        else:
            max_t = _CAPPED_SUBSET_SIZE
        improved = False
        for t in range(1, max_t + 1):
            for extra in combinations(path_states, t):
                S = frozenset(covered) | frozenset(extra)
                cyc_match = _cycle_matching(A_cols, S)
                if cyc_match is None:
                    continue
                rest_match = _path_matching(A_cols, C_cols, all_states - S, n)
                if rest_match is None:
                    continue
                succ = dict(cyc_match)
                term = {}
                for c, r in rest_match.items():
                    if r < n:
                        succ[c] = r
                    else:
                        term[c] = r - n
                improved = True
                break
            if improved:
                break
        if not improved:
            break

    cycles, paths = _decompose_successors(succ, term, n)
    return _canonical_cover(cycles, paths, g)


# ---------------------------------------------------------------------------
# agent classification

def classify_agents(
    L: CoverFamily, g: SystemDigraph, C_pats: Mapping[str, SparsityPattern]
) -> AgentClassification:
    """Type each agent against the cover.

    An agent terminating one of the cover's paths into its own output is alpha;
    otherwise measuring a parent-cycle state makes it beta, and any remaining
    measurement makes it gamma. Agents whose measurements span categories take
    the strongest type (alpha > beta > gamma). Alpha and beta observations are
    the crucial ones.
    """
    parent_cycles = [
        (cyc, set(cyc))
        for cyc, kind in zip(L.cycles, L.cycle_kinds)
        if kind is CycleKind.PARENT
    ]
    verdicts = []
    for agent, pat in C_pats.items():
        measured = sorted({c for (_, c) in pat.nonzeros})
        if not measured:
            verdicts.append(
                AgentVerdict(agent=agent, type=AgentType.UNMEASURING, crucial=False, witness=())
            )
            continue
        alpha_paths = tuple(p for p in L.ytopped_paths if p.agent == agent)
        if alpha_paths:
            verdicts.append(
                AgentVerdict(agent=agent, type=AgentType.ALPHA, crucial=True, witness=alpha_paths)
            )
            continue
        beta_cycles = tuple(
            cyc for cyc, members in parent_cycles if any(m in members for m in measured)
        )
        if beta_cycles:
            verdicts.append(
                AgentVerdict(agent=agent, type=AgentType.BETA, crucial=True, witness=beta_cycles)
            )
            continue
        gamma_witness = tuple(
            cyc
            for cyc, kind in zip(L.cycles, L.cycle_kinds)
            if kind is CycleKind.CHILD and any(m in cyc for m in measured)
        )
        verdicts.append(
            AgentVerdict(agent=agent, type=AgentType.GAMMA, crucial=False, witness=gamma_witness)
        )
    return AgentClassification(tuple(verdicts), L)
