"""Numeric realization of a designed structure: matrices, gains, simulation.

All randomness is drawn from one seeded generator per call; Gaussians come from
Box-Muller over that generator's uniforms, so identical seeds reproduce runs
bit for bit within this implementation.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import IO, Mapping

import numpy as np
from scipy.linalg import qr as _qr

from .errors import (
    DimensionError,
    NoStabilizingGainFound,
    StructuralError,
)
from .fusion import FusionMode, TopologyDesign
from .patterns import SparsityPattern

_STOCHASTIC_TOL = 1e-12


def _gaussian(rng: np.random.Generator, shape) -> np.ndarray:
    """Standard normals via Box-Muller from the generator's uniform stream."""
    m = int(np.prod(shape)) if shape else 1
    pairs = (m + 1) // 2
    u1 = np.maximum(rng.random(pairs), np.finfo(float).tiny)
    u2 = rng.random(pairs)
    radius = np.sqrt(-2.0 * np.log(u1))
    z = np.concatenate([radius * np.cos(2 * np.pi * u2), radius * np.sin(2 * np.pi * u2)])
    return z[:m].reshape(shape)


def instantiate(
    pattern: SparsityPattern,
    seed: int,
    magnitude_range: tuple[float, float] = (0.5, 2.0),
) -> np.ndarray:
    """Random real matrix whose support equals the pattern exactly.

    Magnitudes are uniform in the given range (bounded away from zero) with
    random signs; deterministic for a fixed seed.
    """
    lo, hi = magnitude_range
    if lo <= 0:
        raise ValueError("magnitude range must be bounded away from zero")
    rng = np.random.default_rng(seed)
    m = np.zeros(pattern.shape)
    for r, c in sorted(pattern.nonzeros):
        mag = lo + (hi - lo) * rng.random()
        sign = 1.0 if rng.random() < 0.5 else -1.0
        m[r, c] = sign * mag
    return m


def row_stochastic(topo: TopologyDesign, seed: int) -> np.ndarray:
    """Random row-stochastic fusion weights with support exactly the W pattern."""
    rng = np.random.default_rng(seed)
    N = topo.agent_count
    pat = topo.W_pattern
    W = np.zeros((N, N))
    for r, c in sorted(pat.nonzeros):
        W[r, c] = 0.5 + rng.random()
    W /= W.sum(axis=1, keepdims=True)
    return W


@dataclass(frozen=True)
class NumericSystem:
    """Concrete values on a designed structure.

    W rows must sum to one with a strictly positive diagonal. Measurement
    sharing follows `sources` (each agent's extended neighborhood, itself
    included); when omitted it is read off W's support. With output_fusion off
    the innovation uses only the agent's own measurements, whatever the sources.
    """

    agents: tuple[str, ...]
    A: np.ndarray
    C: Mapping[str, np.ndarray]
    W: np.ndarray
    V: float | np.ndarray
    R: Mapping[str, float]
    output_fusion: bool = True
    sources: Mapping[str, tuple[str, ...]] | None = None

    def __post_init__(self):
        n = self.A.shape[0]
        N = len(self.agents)
        if self.A.shape != (n, n):
            raise DimensionError(f"A must be square, got {self.A.shape}")
        if self.W.shape != (N, N):
            raise DimensionError(f"W must be {N}x{N}, got {self.W.shape}")
        if np.max(np.abs(self.W.sum(axis=1) - 1.0)) > _STOCHASTIC_TOL:
            raise ValueError("W rows must sum to 1")
        if np.any(np.diag(self.W) <= 0):
            raise ValueError("W diagonal must be strictly positive")
        for agent in self.agents:
            Ci = self.C[agent]
            if Ci.ndim != 2 or Ci.shape[1] != n:
                raise DimensionError(f"C[{agent!r}] must have {n} columns")
            if self.R[agent] < 0:
                raise ValueError(f"R[{agent!r}] must be nonnegative")
        if self.sources is not None:
            known = set(self.agents)
            for agent in self.agents:
                hood = self.sources[agent]
                if agent not in hood:
                    raise ValueError(f"agent {agent!r} missing from its own neighborhood")
                if not set(hood) <= known:
                    raise ValueError(f"unknown agent in neighborhood of {agent!r}")
        V = np.asarray(self.V)
        if V.ndim == 0:
            if V < 0:
                raise ValueError("V must be nonnegative")
        elif V.shape != (n, n):
            raise DimensionError(f"V must be scalar or {n}x{n}")

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def N(self) -> int:
        return len(self.agents)

    def neighborhoods(self) -> list[list[int]]:
        """Extended neighborhood (agent indices) per agent."""
        if not self.output_fusion:
            return [[i] for i in range(self.N)]
        if self.sources is not None:
            idx = {a: i for i, a in enumerate(self.agents)}
            return [sorted(idx[j] for j in self.sources[a]) for a in self.agents]
        return [sorted(np.nonzero(self.W[i])[0].tolist()) for i in range(self.N)]


@dataclass(frozen=True)
class GainMatrix:
    """Block-diagonal estimator gain, one n-by-n block per agent."""

    blocks: tuple[np.ndarray, ...]

    def __post_init__(self):
        n = self.blocks[0].shape[0]
        for b in self.blocks:
            if b.shape != (n, n):
                raise DimensionError("gain blocks must all be n x n")

    @property
    def n(self) -> int:
        return self.blocks[0].shape[0]

    @property
    def N(self) -> int:
        return len(self.blocks)

    @property
    def full(self) -> np.ndarray:
        N, n = self.N, self.n
        K = np.zeros((N * n, N * n))
        for i, b in enumerate(self.blocks):
            K[i * n:(i + 1) * n, i * n:(i + 1) * n] = b
        return K

    @classmethod
    def zero(cls, N: int, n: int) -> "GainMatrix":
        return cls(tuple(np.zeros((n, n)) for _ in range(N)))


@dataclass
class GainSearchState:
    """Iterate bookkeeping for gain synthesis; X and Y are only set on the LMI path."""

    t: int = 0
    best_rho: float = float("inf")
    X: np.ndarray | None = None
    Y: np.ndarray | None = None


@dataclass(frozen=True)
class GainSynthesis:
    gain: GainMatrix
    rho: float
    iterations: int
    method: str


@dataclass(frozen=True)
class GainSearchConfig:
    seed: int = 0
    margin: float = 1e-3
    method: str = "search"
    max_sweeps: int = 60
    restarts: int = 4
    initial_step: float = 0.5
    min_step: float = 1e-6
    search_tol: float = 1e-4
    lmi_max_iters: int = 500
    lmi_trace_eps: float = 1e-6


def numeric_dc(sys: NumericSystem) -> np.ndarray:
    """Block-diagonal innovation operator: per agent the summed measurement grams
    over its extended neighborhood."""
    n, N = sys.n, sys.N
    D = np.zeros((N * n, N * n))
    for i, hood in enumerate(sys.neighborhoods()):
        block = np.zeros((n, n))
        for j in hood:
            Cj = sys.C[sys.agents[j]]
            block += Cj.T @ Cj
        D[i * n:(i + 1) * n, i * n:(i + 1) * n] = block
    return D


def error_dynamics(sys: NumericSystem, K: GainMatrix) -> np.ndarray:
    """Closed-loop error propagation matrix of the networked estimator."""
    if K.n != sys.n or K.N != sys.N:
        raise DimensionError(
            f"gain blocks {K.N}x({K.n}x{K.n}) do not match system {sys.N}x({sys.n}x{sys.n})"
        )
    Phi = np.kron(sys.W, sys.A)
    return Phi - K.full @ numeric_dc(sys) @ Phi


def spectral_radius(M: np.ndarray, tol: float = 1e-9) -> float:
    """Spectral radius by repeated squaring of the (renormalized) matrix.

    Uses norm(M^(2^k))^(1/2^k) with the Frobenius norm, stopping once two
    successive estimates agree to the relative tolerance.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DimensionError(f"spectral radius needs a square matrix, got {M.shape}")
    if tol <= 0:
        raise ValueError("tol must be positive")
    if M.shape[0] == 0:
        return 0.0
    Q = M.copy()
    s = float(np.linalg.norm(Q))
    if s == 0.0:
        return 0.0
    Q /= s
    logp = np.log(s)
    est = np.exp(logp)
    for k in range(1, 64):
        Q = Q @ Q
        logp *= 2.0
        s = float(np.linalg.norm(Q))
        if s == 0.0:
            return 0.0
        Q /= s
        logp += np.log(s)
        new_est = float(np.exp(logp / 2.0**k))
        if abs(new_est - est) <= tol * max(new_est, np.finfo(float).tiny):
            return new_est
        est = new_est
    return est


def numeric_observability_rank(A: np.ndarray, C: np.ndarray) -> int:
    """Rank of the n-step observability matrix, by QR with column pivoting and a
    1e-9 relative diagonal threshold. The numeric twin of the structural test."""
    A = np.asarray(A, dtype=float)
    C = np.asarray(C, dtype=float)
    n = A.shape[0]
    block = C.T
    blocks = [block]
    for _ in range(n - 1):
        block = A.T @ block
        blocks.append(block)
    O = np.hstack(blocks)
    if not np.any(O):
        return 0
    r = _qr(O, mode="r", pivoting=True)[0]
    diag = np.abs(np.diag(r))
    if diag.size == 0 or diag[0] == 0.0:
        return 0
    return int(np.sum(diag > 1e-9 * diag[0]))


# ---------------------------------------------------------------------------
# gain synthesis

def _verify_structure(sys: NumericSystem):
    """Generic observability of the numeric system's own structure: W's support
    drives the state coupling, the neighborhoods drive the innovation blocks."""
    from .fusion import build_dc, kron_pattern
    from .structure import generic_observability

    A_pat = SparsityPattern.from_matrix(sys.A)
    C_pats = {a: SparsityPattern.from_matrix(sys.C[a]) for a in sys.agents}
    W_pat = SparsityPattern.from_matrix(sys.W)
    hood_edges = frozenset(
        (sys.agents[j], sys.agents[i])
        for i, hood in enumerate(sys.neighborhoods())
        for j in hood
        if j != i
    )
    dc_topo = TopologyDesign(sys.agents, hood_edges, FusionMode.COMBINED)
    system = kron_pattern(W_pat, A_pat)
    output = build_dc(C_pats, dc_topo, output_fusion=True)
    return generic_observability(system, output)


def _range_basis(S: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh(S)
    keep = vals > 1e-12 * max(float(vals.max()), 1.0)
    return vecs[:, keep]


def _assemble_gain(theta: np.ndarray, bases: list[np.ndarray], n: int) -> GainMatrix:
    blocks = []
    pos = 0
    for U in bases:
        r = U.shape[1]
        M = theta[pos:pos + n * r].reshape(n, r)
        pos += n * r
        blocks.append(M @ U.T)
    return GainMatrix(tuple(blocks))


def _search_gain(sys: NumericSystem, cfg: GainSearchConfig) -> GainSynthesis:
    n, N = sys.n, sys.N
    Phi = np.kron(sys.W, sys.A)
    Dc = numeric_dc(sys)
    bases = [_range_basis(Dc[i * n:(i + 1) * n, i * n:(i + 1) * n]) for i in range(N)]
    dim = sum(n * U.shape[1] for U in bases)
    target = 1.0 - cfg.margin
    state = GainSearchState()

    def objective(theta: np.ndarray) -> float:
        K = _assemble_gain(theta, bases, n)
        return spectral_radius(Phi - K.full @ Dc @ Phi, tol=cfg.search_tol)

    def finish(theta: np.ndarray) -> GainSynthesis:
        K = _assemble_gain(theta, bases, n)
        rho = spectral_radius(error_dynamics(sys, K))
        return GainSynthesis(gain=K, rho=rho, iterations=state.t, method="search")

    rho0 = spectral_radius(Phi)
    state.best_rho = rho0
    if rho0 < target:
        return GainSynthesis(GainMatrix.zero(N, n), rho0, 0, "search")
    if dim == 0:
        raise NoStabilizingGainFound(rho0, 0)

    # least-squares start: per block, collapse this block's row slice of the
    # closed loop as far as its own innovation operator allows
    theta_ls = np.zeros(dim)
    pos = 0
    for i, U in enumerate(bases):
        rows = slice(i * n, (i + 1) * n)
        P = Dc[rows, rows] @ Phi[rows, :]
        Ki = np.linalg.lstsq(P.T, Phi[rows, :].T, rcond=None)[0].T
        M = Ki @ U
        r = U.shape[1]
        theta_ls[pos:pos + n * r] = M.ravel()
        pos += n * r

    rng = np.random.default_rng(cfg.seed)
    candidates = [np.zeros(dim), theta_ls]
    candidates += [gamma * theta_ls for gamma in (0.25, 0.5, 0.75)]
    best_theta = None
    best_rho = np.inf
    for theta in candidates:
        rho = objective(theta)
        state.t += 1
        if rho < best_rho:
            best_rho, best_theta = rho, theta.copy()
    state.best_rho = min(state.best_rho, best_rho)
    if best_rho < target:
        return finish(best_theta)

    scale = max(1.0, float(np.max(np.abs(theta_ls))))
    for restart in range(cfg.restarts + 1):
        if restart == 0:
            theta = best_theta.copy()
        else:
            theta = best_theta + scale * 0.1 * _gaussian(rng, (dim,))
        f = objective(theta)
        state.t += 1
        step = cfg.initial_step * scale
        while step >= cfg.min_step:
            improved = False
            for idx in range(dim):
                for delta in (step, -step):
                    trial = theta.copy()
                    trial[idx] += delta
                    ft = objective(trial)
                    state.t += 1
                    if ft < f - 1e-12:
                        theta, f = trial, ft
                        improved = True
                        break
                if f < target:
                    break
            if f < best_rho:
                best_rho, best_theta = f, theta.copy()
                state.best_rho = best_rho
            if f < target:
                return finish(theta)
            if not improved:
                step *= 0.5
            if state.t > cfg.max_sweeps * dim * 2:
                break
        if best_rho < target:
            return finish(best_theta)

    # the loose in-search tolerance can overestimate; re-check before giving up
    final = finish(best_theta)
    if final.rho < target:
        return final
    raise NoStabilizingGainFound(best_rho, state.t)


def _lmi_gain(sys: NumericSystem, cfg: GainSearchConfig) -> GainSynthesis:
    """Cone-complementarity iteration on the stabilizing-gain matrix inequalities.

    Optional back-end; needs cvxpy. Alternates semidefinite solves of the
    linearized trace objective until the closed loop is a contraction or the
    trace objective bottoms out near twice the distributed dimension.
    """
    try:
        import cvxpy as cp
    except ImportError as exc:  # pragma: no cover
        raise StructuralError("the LMI back-end requires cvxpy") from exc

    n, N = sys.n, sys.N
    m = N * n
    Phi = np.kron(sys.W, sys.A)
    Dc = numeric_dc(sys)
    DPhi = Dc @ Phi

    X = cp.Variable((m, m), symmetric=True)
    Y = cp.Variable((m, m), symmetric=True)
    Kb = [cp.Variable((n, n)) for _ in range(N)]
    rows = []
    for i in range(N):
        block_row = [np.zeros((n, n))] * N
        block_row[i] = Kb[i]
        rows.append(block_row)
    K = cp.bmat(rows)
    Ahat = Phi - K @ DPhi
    eps = 1e-6
    constraints = [
        X >> eps * np.eye(m),
        Y >> eps * np.eye(m),
        cp.bmat([[X, Ahat.T], [Ahat, Y]]) >> eps * np.eye(2 * m),
        cp.bmat([[X, np.eye(m)], [np.eye(m), Y]]) >> 0,
    ]

    state = GainSearchState()
    prob = cp.Problem(cp.Minimize(0), constraints)
    prob.solve(solver=cp.SCS, verbose=False)
    if X.value is None:
        raise NoStabilizingGainFound(float("inf"), 0)
    Xt, Yt = X.value, Y.value
    best = (float("inf"), None)
    target = 1.0 - cfg.margin
    for t in range(1, cfg.lmi_max_iters + 1):
        state.t = t
        prob = cp.Problem(cp.Minimize(cp.trace(Yt @ X + Xt @ Y)), constraints)
        prob.solve(solver=cp.SCS, verbose=False)
        if X.value is None:
            break
        Xt, Yt = X.value, Y.value
        gain = GainMatrix(tuple(np.asarray(k.value) for k in Kb))
        rho = spectral_radius(error_dynamics(sys, gain))
        if rho < best[0]:
            best = (rho, gain)
        state.best_rho = best[0]
        state.X, state.Y = Xt, Yt
        if rho < target:
            return GainSynthesis(gain, rho, t, "lmi")
        if prob.value is not None and prob.value <= 2 * m + cfg.lmi_trace_eps:
            break
    if best[1] is not None and best[0] < target:
        return GainSynthesis(best[1], best[0], state.t, "lmi")
    raise NoStabilizingGainFound(best[0], state.t)


def synthesize_gain(sys: NumericSystem, config: GainSearchConfig | None = None) -> GainSynthesis:
    """Block-diagonal gain making the networked error dynamics a contraction.

    Fails fast with StructuralError when the structure is not generically
    observable (no stabilizing gain exists for generic values); raises
    NoStabilizingGainFound with the best spectral radius when the budget runs
    out. Deterministic for a fixed config seed.
    """
    cfg = config or GainSearchConfig()
    report = _verify_structure(sys)
    if not report.observable:
        raise StructuralError(
            f"networked structure is not generically observable "
            f"(structural rank {report.srank_stack}/{sys.N * sys.n}); "
            f"no stabilizing block-diagonal gain exists"
        )
    if cfg.method == "lmi":
        return _lmi_gain(sys, cfg)
    if cfg.method != "search":
        raise ValueError(f"unknown gain synthesis method {cfg.method!r}")
    return _search_gain(sys, cfg)


# ---------------------------------------------------------------------------
# simulation

@dataclass(frozen=True)
class SimulationTrace:
    """Per-step truth, per-agent estimates, and per-agent summed squared errors."""

    agents: tuple[str, ...]
    seed: int
    states: np.ndarray      # (T+1, n)
    estimates: np.ndarray   # (T+1, N, n)
    sq_errors: np.ndarray   # (T+1, N)

    @property
    def steps(self) -> int:
        return self.states.shape[0] - 1

    def to_csv(self, out: IO[str]) -> None:
        writer = csv.writer(out)
        writer.writerow(["step", "agent_id", "sq_error_sum"])
        for k in range(self.states.shape[0]):
            for i, agent in enumerate(self.agents):
                writer.writerow([k, agent, f"{self.sq_errors[k, i]:.9g}"])


def simulate_nke(
    sys: NumericSystem,
    K: GainMatrix,
    T: int,
    seed: int,
    x0_range: tuple[float, float] = (0.0, 3.0),
    init_estimates: str = "zero",
) -> SimulationTrace:
    """Run the networked estimator: neighbor fusion of predictions, then a local
    innovation update from the neighborhood's noisy measurements, once per
    dynamics step."""
    if T < 1:
        raise ValueError("T must be at least 1")
    if K.n != sys.n or K.N != sys.N:
        raise DimensionError("gain does not match system dimensions")
    n, N = sys.n, sys.N
    rng = np.random.default_rng(seed)
    lo, hi = x0_range
    x = lo + (hi - lo) * rng.random(n)
    if init_estimates == "truth":
        est = np.tile(x, (N, 1))
    elif init_estimates == "zero":
        est = np.zeros((N, n))
    else:
        raise ValueError(f"unknown estimate initialization {init_estimates!r}")

    V = np.asarray(sys.V, dtype=float)
    chol = None
    if V.ndim == 2 and np.any(V):
        chol = np.linalg.cholesky(V)

    hoods = sys.neighborhoods()
    states = np.empty((T + 1, n))
    estimates = np.empty((T + 1, N, n))
    states[0] = x
    estimates[0] = est

    for k in range(1, T + 1):
        z = _gaussian(rng, (n,))
        if chol is not None:
            noise = chol @ z
        elif V.ndim == 0:
            noise = np.sqrt(float(V)) * z
        else:
            noise = np.zeros(n)
        x = sys.A @ x + noise
        ys = {}
        for agent in sys.agents:
            Ci = sys.C[agent]
            r = np.sqrt(sys.R[agent]) * _gaussian(rng, (Ci.shape[0],)) if Ci.shape[0] else np.zeros(0)
            ys[agent] = Ci @ x + r
        preds = sys.W @ (est @ sys.A.T)
        new_est = np.empty_like(est)
        for i in range(N):
            innovation = np.zeros(n)
            for j in hoods[i]:
                Cj = sys.C[sys.agents[j]]
                innovation += Cj.T @ (ys[sys.agents[j]] - Cj @ preds[i])
            new_est[i] = preds[i] + K.blocks[i] @ innovation
        est = new_est
        states[k] = x
        estimates[k] = est

    errors = states[:, None, :] - estimates
    sq_errors = np.sum(errors**2, axis=2)
    return SimulationTrace(
        agents=sys.agents,
        seed=seed,
        states=states,
        estimates=estimates,
        sq_errors=sq_errors,
    )
