"""Shared fixtures: the worked 7-state example and seeded random system generators."""

import numpy as np
import pytest

from strucnet import (
    FusionMode,
    NumericSpec,
    SparsityPattern,
    SystemDescription,
    TopologyDesign,
    generic_observability,
    s_rank,
    stack_agent_outputs,
)

# 7-state example: two-state loop feeding a chain into a three-state loop,
# plus a self-looped state; agents a, b, c measure x3, x5, x7 (1-indexed).
FIG2_A_COORDS = (
    (0, 1), (1, 0), (2, 1),
    (3, 2), (3, 4), (3, 5),
    (4, 3),
    (5, 3), (5, 4), (5, 6),
    (6, 6),
)
FIG2_MEASUREMENTS = {"a": 2, "b": 4, "c": 6}


@pytest.fixture
def fig2_A() -> SparsityPattern:
    return SparsityPattern.from_coords(7, 7, FIG2_A_COORDS)


@pytest.fixture
def fig2_C() -> dict[str, SparsityPattern]:
    return {
        agent: SparsityPattern.from_coords(1, 7, [(0, state)])
        for agent, state in FIG2_MEASUREMENTS.items()
    }


@pytest.fixture
def fig2_description() -> SystemDescription:
    return SystemDescription(
        n=7,
        a_coords=FIG2_A_COORDS,
        agents=("a", "b", "c"),
        c_coords={a: ((0, s),) for a, s in FIG2_MEASUREMENTS.items()},
        numeric=NumericSpec(seed=7, rho_target=1.08, V=0.05, R=0.2, x0_range=(0.0, 3.0)),
    )


@pytest.fixture
def w1_topology() -> TopologyDesign:
    return TopologyDesign(
        ("a", "b", "c"),
        frozenset({("a", "b"), ("b", "a"), ("a", "c"), ("b", "c")}),
        FusionMode.OUTPUT,
    )


@pytest.fixture
def w2_topology() -> TopologyDesign:
    return TopologyDesign(
        ("a", "b", "c"),
        frozenset({("a", "b"), ("a", "c"), ("c", "a")}),
        FusionMode.COMBINED,
    )


# ---------------------------------------------------------------------------
# seeded generators

def random_pattern(rng, n: int, density: float) -> SparsityPattern:
    mask = rng.random((n, n)) < density
    coords = [(int(i), int(j)) for i, j in zip(*np.nonzero(mask))]
    return SparsityPattern.from_coords(n, n, coords)


def unit_row_agents(
    rng, n: int, N: int, allowed: list[int] | None = None
) -> dict[str, SparsityPattern]:
    """One single-state measurement row per agent, distinct states; agents past
    the available states are unmeasuring."""
    pool = list(range(n)) if allowed is None else list(allowed)
    rng.shuffle(pool)
    pats = {}
    for i in range(N):
        name = f"g{i}"
        if i < len(pool):
            pats[name] = SparsityPattern.from_coords(1, n, [(0, pool[i])])
        else:
            pats[name] = SparsityPattern.from_coords(0, n, [])
    return pats


def random_observable_system(rng, n_max: int = 8, N_max: int = 4):
    """Rejection-sample a generically observable random system."""
    while True:
        n = int(rng.integers(2, n_max + 1))
        N = int(rng.integers(1, N_max + 1))
        density = (1.6 + 1.4 * rng.random()) / n
        A = random_pattern(rng, n, density)
        C = unit_row_agents(rng, n, N)
        if generic_observability(A, stack_agent_outputs(C)).observable:
            return A, C


def random_unmonitored_deficient_system(rng, n_max: int = 7, N_max: int = 4):
    """Structurally rank-deficient system whose deficiency witness is entirely
    unmeasured: two reserved states' columns share a single row, and no agent
    measures either of them. No agent is locally observable."""
    while True:
        n = int(rng.integers(3, n_max + 1))
        N = int(rng.integers(2, N_max + 1))
        A = random_pattern(rng, n, (1.5 + rng.random()) / n)
        p, q, r = (int(v) for v in rng.choice(n, size=3, replace=False))
        coords = {(i, j) for i, j in A.nonzeros if j not in (p, q)}
        coords.update({(r, p), (r, q)})
        A = SparsityPattern.from_coords(n, n, coords)
        if s_rank(A) >= n:
            continue
        C = unit_row_agents(rng, n, N, allowed=[v for v in range(n) if v not in (p, q)])
        if any(
            pat.rows and generic_observability(A, pat).observable for pat in C.values()
        ):
            continue
        return A, C
