"""Independent oracles used only by the tests.

Everything here deliberately avoids the package's own graph and matching code:
matchings come from scipy's bipartite matcher, components from scipy's
connected_components, spectral radii from dense eigenvalues, and the cover
optimum from exhaustive subset search.
"""

from itertools import combinations

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components, maximum_bipartite_matching


def srank_oracle(pattern) -> int:
    dense = np.zeros(pattern.shape, dtype=int)
    for r, c in pattern.nonzeros:
        dense[r, c] = 1
    if not dense.any():
        return 0
    match = maximum_bipartite_matching(csr_matrix(dense), perm_type="column")
    return int((match >= 0).sum())


def scc_oracle(A_pattern) -> list[frozenset[int]]:
    n = A_pattern.rows
    adj = np.zeros((n, n), dtype=int)
    for i, j in A_pattern.nonzeros:
        adj[j, i] = 1  # a_ij nonzero sends x_j -> x_i
    _, labels = connected_components(csr_matrix(adj), directed=True, connection="strong")
    comps: dict[int, set[int]] = {}
    for v, l in enumerate(labels):
        comps.setdefault(int(l), set()).add(v)
    return sorted((frozenset(c) for c in comps.values()), key=min)


def eig_rho(M) -> float:
    M = np.asarray(M, dtype=float)
    if M.size == 0:
        return 0.0
    return float(np.max(np.abs(np.linalg.eigvals(M))))


def _saturable(cols: list[int], adjacency: dict[int, list[int]]) -> bool:
    """All columns matchable against their candidate rows (scipy matcher)."""
    if not cols:
        return True
    rows = sorted({r for c in cols for r in adjacency.get(c, [])})
    if len(rows) < len(cols):
        return False
    rmap = {r: k for k, r in enumerate(rows)}
    dense = np.zeros((len(rows), len(cols)), dtype=int)
    for k, c in enumerate(cols):
        for r in adjacency.get(c, []):
            dense[rmap[r], k] = 1
    match = maximum_bipartite_matching(csr_matrix(dense), perm_type="column")
    return int((match >= 0).sum()) == len(cols)


def cover_optimum_oracle(A_pattern, C_stack) -> int:
    """Maximum number of cycle-covered states over all disjoint cycle plus
    output-terminated-path covers, by exhaustive subset search."""
    n = A_pattern.rows
    a_cols: dict[int, list[int]] = {}
    for r, c in A_pattern.nonzeros:
        a_cols.setdefault(c, []).append(r)
    c_cols: dict[int, list[int]] = {}
    for r, c in C_stack.nonzeros:
        c_cols.setdefault(c, []).append(n + r)
    for size in range(n, -1, -1):
        for S in combinations(range(n), size):
            Sset = set(S)
            cyc_adj = {c: [r for r in a_cols.get(c, []) if r in Sset] for c in S}
            if not _saturable(list(S), cyc_adj):
                continue
            rest = [c for c in range(n) if c not in Sset]
            rest_adj = {
                c: [r for r in a_cols.get(c, []) if r not in Sset] + c_cols.get(c, [])
                for c in rest
            }
            if _saturable(rest, rest_adj):
                return size
    return 0


def reachability_oracle(A_pattern, C_stack) -> frozenset[int]:
    """States with no directed path to any output, via boolean matrix powers."""
    n = A_pattern.rows
    adj = np.zeros((n, n), dtype=bool)
    for i, j in A_pattern.nonzeros:
        adj[j, i] = True
    reach = adj.copy()
    np.fill_diagonal(reach, True)
    for _ in range(n):
        reach = reach | (reach @ adj)
    measured = np.zeros(n, dtype=bool)
    for _, c in C_stack.nonzeros:
        measured[c] = True
    ok = (reach & measured[None, :]).any(axis=1)
    return frozenset(int(v) for v in np.nonzero(~ok)[0])


def observability_oracle(A_pattern, C_stack) -> bool:
    from strucnet.patterns import stack_patterns

    if reachability_oracle(A_pattern, C_stack):
        return False
    return srank_oracle(stack_patterns(A_pattern, C_stack)) == A_pattern.rows
