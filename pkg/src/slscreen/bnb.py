"""Branch-and-bound on the indicators z with perspective-relaxation node bounds."""

from __future__ import annotations

import heapq
import itertools
import math
import time
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import List, Optional

import numpy as np

from .data import Dataset
from .errors import BoundViolation, InfeasibleFixings, ProblemTooLarge
from .loss import curvature_bound
from .relaxations import (
    Fix,
    ProblemSpec,
    SolverConfig,
    VariableFixings,
    mip_objective,
    ridge_logistic,
    solve_relaxation,
)
from .screening import (
    ScreenReport,
    UpperBound,
    apply_rules,
    dual_certificate,
    round_upper_bound,
    screen,
)


class NodeSelection(str, Enum):
    BEST_BOUND = "best_bound"


class Branching(str, Enum):
    MOST_FRACTIONAL = "most_fractional"
    PSEUDOCOST = "pseudocost"


class MipStatus(str, Enum):
    OPTIMAL = "optimal"
    TIME_LIMIT = "time_limit"
    NODE_LIMIT = "node_limit"


@dataclass(frozen=True)
class BnbConfig:
    gap_tol: float = 1e-6
    integrality_tol: float = 1e-6
    node_selection: NodeSelection = NodeSelection.BEST_BOUND
    branching: Branching = Branching.MOST_FRACTIONAL
    time_limit: float = math.inf
    node_limit: Optional[int] = None
    screen_at_root: bool = False
    screen_at_nodes: bool = False
    relax: SolverConfig = SolverConfig()

    def __post_init__(self):
        if not (self.gap_tol > 0 and self.integrality_tol > 0):
            raise ValueError("tolerances must be positive")


@dataclass
class MipSolution:
    x: np.ndarray
    z: np.ndarray
    objective: float
    best_bound: float
    nodes_explored: int
    wall_time: float
    status: MipStatus
    relax_iterations: int = 0
    screen: Optional[ScreenReport] = field(default=None, repr=False)
    # brute force only: every support within eps of the optimum
    near_optimal_supports: Optional[List[tuple]] = field(default=None, repr=False)

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.z)

    def as_dict(self, timing: bool = True) -> dict:
        out = {
            "objective": self.objective,
            # -inf when a limit stopped the search before the root was solved
            "best_bound": self.best_bound if math.isfinite(self.best_bound) else None,
            "nodes_explored": self.nodes_explored,
            "relax_iterations": self.relax_iterations,
            "status": self.status.value,
            "support": self.support.tolist(),
            "x": self.x.tolist(),
        }
        if timing:
            out["wall_time"] = self.wall_time
        return out


def integrality_gap(eta_mip: float, eta_relax: float) -> float:
    """Relative gap in percent: 100 (eta_mip - eta_relax) / |eta_mip|."""
    if eta_relax > eta_mip + 1e-9 * max(1.0, abs(eta_mip)):
        raise BoundViolation(f"relaxation value {eta_relax!r} exceeds MIP value {eta_mip!r}")
    return max(0.0, 100.0 * (eta_mip - eta_relax) / max(abs(eta_mip), 1e-12))


# --------------------------------------------------------------------------- #
# brute force


def brute_force(d: Dataset, spec: ProblemSpec, eps: float = 1e-7, max_n: int = 20) -> MipSolution:
    """Enumerate every support (|S| <= k for CARD), fit each by Newton, keep the best."""
    if d.n > max_n:
        raise ProblemTooLarge(f"brute force limited to n <= {max_n}, got {d.n}")
    spec.check(d)
    t0 = time.perf_counter()
    top = d.n if spec.is_reg else spec.k
    results = []
    for size in range(top + 1):
        for sup in itertools.combinations(range(d.n), size):
            x, obj = ridge_logistic(d, spec.gamma, spec.convention, support=sup)
            if spec.is_reg:
                obj += spec.mu * size
            results.append((obj, sup, x))
    best = min(results, key=lambda r: r[0])
    near = [r[1] for r in results if r[0] <= best[0] + eps]
    z = np.zeros(d.n, dtype=np.int8)
    z[list(best[1])] = 1
    return MipSolution(best[2], z, best[0], best[0], len(results), time.perf_counter() - t0,
                       MipStatus.OPTIMAL, near_optimal_supports=near)


# --------------------------------------------------------------------------- #
# branch and bound


@dataclass(order=True)
class _Node:
    bound: float
    seq: int
    fix: VariableFixings = field(compare=False)
    x0: np.ndarray = field(compare=False)
    # branching record for pseudocost updates: (var, direction, fractional part, parent bound)
    origin: Optional[tuple] = field(compare=False, default=None)


class _Pseudocosts:
    """Per-variable average bound degradation per unit change, seeded by delta."""

    def __init__(self, seed_scores: np.ndarray):
        n = seed_scores.shape[0]
        self.sum = np.tile(seed_scores.reshape(-1, 1), (1, 2)).astype(float)
        self.cnt = np.ones((n, 2))

    def update(self, j, direction, frac, gain):
        if frac > 0:
            self.sum[j, direction] += max(gain, 0.0) / frac
            self.cnt[j, direction] += 1

    def pick(self, cand, z):
        est = self.sum[cand] / self.cnt[cand]
        down = est[:, 0] * z[cand]
        up = est[:, 1] * (1.0 - z[cand])
        score = np.maximum(down, 1e-12) * np.maximum(up, 1e-12)
        return int(cand[np.argmax(score)])


def _select_branch(z, fix, cfg, pcosts):
    free = np.flatnonzero(fix.free_mask)
    if free.size == 0:
        return None
    zf = z[free]
    frac = np.abs(zf - np.round(zf)) > cfg.integrality_tol
    cand = free[frac] if np.any(frac) else free
    if cfg.branching is Branching.PSEUDOCOST and pcosts is not None and np.any(frac):
        return pcosts.pick(cand, z)
    # most fractional, ties to the lower index
    return int(cand[np.argmin(np.abs(z[cand] - 0.5))])


def solve_bnb(d: Dataset, spec: ProblemSpec, initial_fixings: Optional[VariableFixings] = None,
              cfg: BnbConfig = BnbConfig(), incumbent: Optional[UpperBound] = None,
              x0=None) -> MipSolution:
    """Best-bound branch-and-bound; exact within cfg.gap_tol.

    With ``cfg.screen_at_root`` the root relaxation is screened first and the
    tree is searched over the remaining free features.
    """
    t0 = time.perf_counter()
    spec.check(d)
    fix0 = initial_fixings if initial_fixings is not None else VariableFixings.free(d.n)
    if not spec.is_reg and len(fix0.ones) > spec.k:
        raise InfeasibleFixings(f"{len(fix0.ones)} features fixed to one with k={spec.k}")
    lip = curvature_bound(d, spec.convention)
    deadline = t0 + cfg.time_limit
    report = None
    iters = 0

    inc_x, inc_z, inc_val = None, None, math.inf
    if incumbent is not None:
        inc_x, inc_z, inc_val = incumbent.x, incumbent.z, incumbent.value

    start = None if x0 is None else np.asarray(x0, dtype=np.float64)
    if cfg.screen_at_root and (spec.is_reg or spec.k < d.n):
        relax = solve_relaxation(d, spec, fix0, cfg.relax, x0=start, lip=lip)
        iters += relax.iterations
        report = screen(d, spec, cfg.relax, relax=relax)
        if report.upper.value < inc_val:
            inc_x, inc_z, inc_val = report.upper.x, report.upper.z, report.upper.value
        fix0 = report.result.fixings()
        start = relax.x

    pcosts = None
    counter = itertools.count()
    heap = [_Node(-math.inf, next(counter), fix0, np.zeros(d.n) if start is None else start)]
    closed_bound = math.inf
    nodes = 0
    status = MipStatus.OPTIMAL

    while heap:
        if heap[0].bound >= inc_val - cfg.gap_tol:
            closed_bound = min(closed_bound, heap[0].bound)
            break
        if time.perf_counter() > deadline:
            status = MipStatus.TIME_LIMIT
            break
        if cfg.node_limit is not None and nodes >= cfg.node_limit:
            status = MipStatus.NODE_LIMIT
            break
        node = heapq.heappop(heap)
        nodes += 1
        relax = solve_relaxation(d, spec, node.fix, cfg.relax, x0=node.x0, lip=lip)
        iters += relax.iterations
        cert = dual_certificate(relax, d, spec, require_converged=False)
        bound = max(node.bound, cert.lower_bound)
        if pcosts is None and cfg.branching is Branching.PSEUDOCOST:
            pcosts = _Pseudocosts(spec.gamma * cert.delta)
        if pcosts is not None and node.origin is not None:
            j, direction, frac, parent_bound = node.origin
            pcosts.update(j, direction, frac, bound - parent_bound)

        ub = round_upper_bound(relax, d, spec, refit=True)
        if ub.value < inc_val:
            inc_x, inc_z, inc_val = ub.x, ub.z, ub.value
        if bound >= inc_val - cfg.gap_tol:
            closed_bound = min(closed_bound, bound)
            continue

        fix = node.fix
        if cfg.screen_at_nodes:
            fix = apply_rules(cert, inc_val, spec).fixings()
        j = _select_branch(relax.z, fix, cfg, pcosts)
        if j is None:
            # every indicator fixed: the rounded point is this leaf's optimum
            closed_bound = min(closed_bound, max(bound, ub.value))
            continue
        zj = float(relax.z[j])
        heapq.heappush(heap, _Node(bound, next(counter), fix.with_fixed(j, Fix.ZERO), relax.x,
                                   (j, 0, zj, bound)))
        if spec.is_reg or len(fix.ones) < spec.k:
            heapq.heappush(heap, _Node(bound, next(counter), fix.with_fixed(j, Fix.ONE), relax.x,
                                       (j, 1, 1.0 - zj, bound)))

    open_bound = heap[0].bound if heap else math.inf
    best_bound = min(closed_bound, open_bound, inc_val)
    if inc_x is None:
        # no feasible point was produced (limits hit before the root finished)
        inc_z = np.zeros(d.n, dtype=np.int8)
        inc_x = np.zeros(d.n)
        inc_val = mip_objective(d, spec, inc_x, inc_z)
    return MipSolution(np.asarray(inc_x), np.asarray(inc_z, dtype=np.int8), float(inc_val),
                       float(best_bound), nodes, time.perf_counter() - t0, status, iters,
                       screen=report)


def solve_screened(d: Dataset, spec: ProblemSpec, cfg: BnbConfig = BnbConfig()) -> MipSolution:
    """relax -> certificate -> round -> screen -> branch-and-bound over the survivors."""
    return solve_bnb(d, spec, cfg=replace(cfg, screen_at_root=True))
