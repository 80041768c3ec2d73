"""Perspective and big-M continuous relaxations of the sparse logistic problems.

The indicator vector z is eliminated in closed form (reverse-Huber penalty for
REG, water-filling for CARD) and the remaining problem in x is solved by an
accelerated proximal gradient method.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum, IntEnum
from typing import Optional, Sequence

import numpy as np

from . import kernels
from .data import Dataset
from .errors import InfeasibleFixings
from .loss import LossConvention, curvature_bound


class ProblemKind(str, Enum):
    REG = "reg"
    CARD = "card"


@dataclass(frozen=True)
class ProblemSpec:
    """REG(gamma, mu) or CARD(gamma, k) under a loss normalization."""

    kind: ProblemKind
    gamma: float
    mu: Optional[float] = None
    k: Optional[int] = None
    convention: LossConvention = LossConvention.UNNORMALIZED

    def __post_init__(self):
        if not (self.gamma > 0 and math.isfinite(self.gamma)):
            raise ValueError("gamma must be positive")
        if self.kind is ProblemKind.REG:
            if self.mu is None or not self.mu >= 0:
                raise ValueError("REG needs mu > 0")
        else:
            if self.k is None or int(self.k) != self.k or self.k < 1:
                raise ValueError("CARD needs an integer k >= 1")

    @classmethod
    def reg(cls, gamma, mu, convention=LossConvention.UNNORMALIZED):
        return cls(ProblemKind.REG, float(gamma), mu=float(mu), convention=convention)

    @classmethod
    def card(cls, gamma, k, convention=LossConvention.UNNORMALIZED):
        return cls(ProblemKind.CARD, float(gamma), k=int(k), convention=convention)

    @property
    def is_reg(self) -> bool:
        return self.kind is ProblemKind.REG

    def check(self, d: Dataset) -> None:
        if not self.is_reg and self.k > d.n:
            raise ValueError(f"k={self.k} exceeds n={d.n}")

    def as_dict(self) -> dict:
        out = {"kind": self.kind.value, "gamma": self.gamma, "convention": self.convention.value}
        if self.is_reg:
            out["mu"] = self.mu
        else:
            out["k"] = self.k
        return out


class Fix(IntEnum):
    FREE = 0
    ZERO = 1
    ONE = 2


class VariableFixings:
    """Per-feature indicator status (Free / Zero / One)."""

    __slots__ = ("status",)

    def __init__(self, status: Sequence[int]):
        st = np.array(status, dtype=np.int8)
        if st.ndim != 1 or np.any((st < 0) | (st > 2)):
            raise ValueError("fixing status must be a 1-D array over {0, 1, 2}")
        st.setflags(write=False)
        self.status = st

    @classmethod
    def free(cls, n: int) -> "VariableFixings":
        return cls(np.zeros(n, dtype=np.int8))

    def __len__(self):
        return self.status.shape[0]

    def __eq__(self, other):
        return isinstance(other, VariableFixings) and np.array_equal(self.status, other.status)

    def __repr__(self):
        return f"VariableFixings(zero={self.zeros.tolist()}, one={self.ones.tolist()})"

    def with_fixed(self, j: int, value: Fix) -> "VariableFixings":
        st = self.status.copy()
        st[j] = value
        return VariableFixings(st)

    def merge(self, other: "VariableFixings") -> "VariableFixings":
        st = self.status.copy()
        clash = (st != Fix.FREE) & (other.status != Fix.FREE) & (st != other.status)
        if np.any(clash):
            raise InfeasibleFixings(f"conflicting fixings at {np.flatnonzero(clash).tolist()}")
        st[st == Fix.FREE] = other.status[st == Fix.FREE]
        return VariableFixings(st)

    @property
    def free_mask(self):
        return self.status == Fix.FREE

    @property
    def zeros(self):
        return np.flatnonzero(self.status == Fix.ZERO)

    @property
    def ones(self):
        return np.flatnonzero(self.status == Fix.ONE)

    @property
    def n_free(self) -> int:
        return int(np.count_nonzero(self.status == Fix.FREE))


class StepRule(str, Enum):
    FIXED = "fixed"
    BACKTRACKING = "backtracking"


@dataclass(frozen=True)
class SolverConfig:
    tol: float = 1e-8
    max_iters: int = 100_000
    step_rule: StepRule = StepRule.BACKTRACKING

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")


class SolverKind(str, Enum):
    PERSPECTIVE = "perspective"
    BIGM = "bigm"


@dataclass
class RelaxationSolution:
    x: np.ndarray
    z: np.ndarray
    objective: float
    iterations: int
    kkt_residual: float
    solver_kind: SolverKind
    converged: bool
    spec: ProblemSpec
    fixings: VariableFixings
    bigm: Optional[float] = None
    restarts: int = field(default=0, repr=False)


# --------------------------------------------------------------------------- #
# closed-form z elimination


def optimal_z_reg(x_abs, gamma: float, mu: float):
    """Minimizer of x^2/(gamma z) + mu z over z in [0, 1]: min(1, |x|/sqrt(gamma mu))."""
    x_abs = np.abs(np.asarray(x_abs, dtype=np.float64))
    if mu <= 0:
        z = (x_abs > 0).astype(np.float64)
    else:
        z = np.minimum(1.0, x_abs / math.sqrt(gamma * mu))
    return float(z) if z.ndim == 0 else z


def perspective_penalty_prox(v, step: float, gamma: float, mu: float):
    """Prox of step * min_z (x^2/(gamma z) + mu z); odd in v."""
    if not step > 0:
        raise ValueError("step must be positive")
    arr = np.atleast_1d(np.asarray(v, dtype=np.float64))
    out = kernels.reg_prox(arr, float(step), float(gamma), float(mu))
    return float(out[0]) if np.ndim(v) == 0 else out


def optimal_z_card(x, gamma: float, k: int, fixings: Optional[VariableFixings] = None) -> np.ndarray:
    """Water-filling minimizer of sum x_j^2/(gamma z_j) s.t. sum z <= k, z in [0,1].

    One-fixed coordinates take z = 1 and consume budget, Zero-fixed take z = 0.
    The result does not depend on gamma.
    """
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[0]
    fix = fixings if fixings is not None else VariableFixings.free(n)
    ones = fix.status == Fix.ONE
    budget = int(k) - int(ones.sum())
    if budget < 0:
        raise InfeasibleFixings(f"{int(ones.sum())} features fixed to one with k={k}")
    z = np.zeros(n)
    z[ones] = 1.0
    free = fix.free_mask
    z[free] = kernels.waterfill_z(np.abs(x[free]), budget)
    return z


def perspective_objective(d: Dataset, spec: ProblemSpec, x, z) -> float:
    """L(x) + (1/gamma) sum x_j^2/z_j (+ mu sum z_j), with 0/0 = 0 and x/0 = inf."""
    x = np.asarray(x, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    scale = spec.convention.scale(d.m)
    loss = float(kernels.loss_from_margin(d.a @ x, d.y, scale))
    pos = z > 0
    if np.any(x[~pos] != 0):
        return math.inf
    pen = float(np.sum(x[pos] ** 2 / z[pos])) / spec.gamma
    if spec.is_reg:
        pen += spec.mu * float(np.sum(z))
    return loss + pen


mip_objective = perspective_objective


def bigm_objective(d: Dataset, spec: ProblemSpec, x, z) -> float:
    x = np.asarray(x, dtype=np.float64)
    scale = spec.convention.scale(d.m)
    val = float(kernels.loss_from_margin(d.a @ x, d.y, scale)) + float(x @ x) / spec.gamma
    if spec.is_reg:
        val += spec.mu * float(np.sum(z))
    return val


# --------------------------------------------------------------------------- #
# solvers


def _working_set(d: Dataset, fix: VariableFixings):
    if len(fix) != d.n:
        raise ValueError(f"fixings have length {len(fix)}, dataset has n={d.n}")
    cols = np.flatnonzero(fix.status != Fix.ZERO)
    a_w = np.ascontiguousarray(d.a[:, cols])
    one = np.ascontiguousarray(fix.status[cols] == Fix.ONE)
    return cols, a_w, one


def _run_apg(d, spec, fix, cfg, kind, budget, bigm, x0, lip):
    cols, a_w, one = _working_set(d, fix)
    scale = spec.convention.scale(d.m)
    if lip is None:
        lip = curvature_bound(d, spec.convention)
    lip = max(lip, 1e-12)
    x_start = np.zeros(cols.shape[0]) if x0 is None else np.array(x0, dtype=np.float64)[cols]
    mu = spec.mu if spec.is_reg else 0.0
    xw, _, iters, resid, conv, restarts = kernels.apg(
        a_w, d.y, scale, np.ascontiguousarray(x_start), kind, one,
        spec.gamma, mu, budget, bigm, lip, cfg.tol, cfg.max_iters,
        cfg.step_rule is StepRule.BACKTRACKING,
    )
    x = np.zeros(d.n)
    x[cols] = xw
    return x, int(iters), float(resid), bool(conv), int(restarts)


def solve_reg_relaxation(d: Dataset, spec: ProblemSpec, fix: Optional[VariableFixings] = None,
                         cfg: SolverConfig = SolverConfig(), x0=None,
                         lip: Optional[float] = None) -> RelaxationSolution:
    """Perspective relaxation of REG under partial fixings."""
    if not spec.is_reg:
        raise ValueError("solve_reg_relaxation needs a REG problem")
    fix = fix if fix is not None else VariableFixings.free(d.n)
    x, iters, resid, conv, restarts = _run_apg(d, spec, fix, cfg, kernels.PERSP_REG, 0, 1.0, x0, lip)
    z = np.zeros(d.n)
    free = fix.free_mask
    z[free] = optimal_z_reg(np.abs(x[free]), spec.gamma, spec.mu)
    z[fix.status == Fix.ONE] = 1.0
    obj = perspective_objective(d, spec, x, z)
    return RelaxationSolution(x, z, obj, iters, resid, SolverKind.PERSPECTIVE, conv, spec, fix,
                              restarts=restarts)


def solve_card_relaxation(d: Dataset, spec: ProblemSpec, fix: Optional[VariableFixings] = None,
                          cfg: SolverConfig = SolverConfig(), x0=None,
                          lip: Optional[float] = None) -> RelaxationSolution:
    """Perspective relaxation of CARD under partial fixings."""
    if spec.is_reg:
        raise ValueError("solve_card_relaxation needs a CARD problem")
    spec.check(d)
    fix = fix if fix is not None else VariableFixings.free(d.n)
    budget = spec.k - len(fix.ones)
    if budget < 0:
        raise InfeasibleFixings(f"{len(fix.ones)} features fixed to one with k={spec.k}")
    x, iters, resid, conv, restarts = _run_apg(d, spec, fix, cfg, kernels.PERSP_CARD, budget, 1.0,
                                               x0, lip)
    z = optimal_z_card(x, spec.gamma, spec.k, fix)
    obj = perspective_objective(d, spec, x, z)
    return RelaxationSolution(x, z, obj, iters, resid, SolverKind.PERSPECTIVE, conv, spec, fix,
                              restarts=restarts)


def solve_relaxation(d: Dataset, spec: ProblemSpec, fix: Optional[VariableFixings] = None,
                     cfg: SolverConfig = SolverConfig(), x0=None,
                     lip: Optional[float] = None) -> RelaxationSolution:
    if spec.is_reg:
        return solve_reg_relaxation(d, spec, fix, cfg, x0, lip)
    return solve_card_relaxation(d, spec, fix, cfg, x0, lip)


def solve_bigm_relaxation(d: Dataset, spec: ProblemSpec, bigm: float,
                          fix: Optional[VariableFixings] = None,
                          cfg: SolverConfig = SolverConfig(), x0=None,
                          lip: Optional[float] = None) -> RelaxationSolution:
    """Continuous relaxation of the big-M formulation (-M z_j <= x_j <= M z_j).

    z is eliminated as |x_j|/M, leaving an elastic-net-type problem (REG) or an
    l1-ball constrained ridge problem (CARD); both keep the box |x_j| <= M.
    """
    if not bigm > 0:
        raise ValueError("big-M must be positive")
    fix = fix if fix is not None else VariableFixings.free(d.n)
    if spec.is_reg:
        kind, budget = kernels.BIGM_REG, 0
    else:
        spec.check(d)
        kind, budget = kernels.BIGM_CARD, spec.k - len(fix.ones)
        if budget < 0:
            raise InfeasibleFixings(f"{len(fix.ones)} features fixed to one with k={spec.k}")
    x, iters, resid, conv, restarts = _run_apg(d, spec, fix, cfg, kind, budget, float(bigm), x0, lip)
    z = np.minimum(np.abs(x) / bigm, 1.0)
    z[fix.status == Fix.ONE] = 1.0
    z[fix.status == Fix.ZERO] = 0.0
    obj = bigm_objective(d, spec, x, z)
    return RelaxationSolution(x, z, obj, iters, resid, SolverKind.BIGM, conv, spec, fix,
                              bigm=float(bigm), restarts=restarts)


def ridge_logistic(d: Dataset, gamma: float,
                   convention: LossConvention = LossConvention.UNNORMALIZED,
                   support=None, x0=None, tol: float = 1e-14):
    """Smooth ridge-logistic fit restricted to ``support`` (all features by default).

    Returns (x, objective) with x embedded in R^n. Uses Newton's method.
    """
    cols = np.arange(d.n) if support is None else np.asarray(sorted(support), dtype=np.int64)
    a_s = np.ascontiguousarray(d.a[:, cols])
    start = np.zeros(cols.shape[0]) if x0 is None else np.asarray(x0, dtype=np.float64)[cols]
    xs, obj, _, _ = kernels.newton_ridge(a_s, d.y, convention.scale(d.m), float(gamma),
                                         np.ascontiguousarray(start), tol, 100)
    x = np.zeros(d.n)
    x[cols] = xs
    return x, float(obj)


def choose_bigm(d: Dataset, spec: ProblemSpec) -> float:
    """Heuristic M = 2 ||x_ridge||_inf from the all-features ridge fit (1.0 if that is zero)."""
    x_ridge, _ = ridge_logistic(d, spec.gamma, spec.convention)
    m = 2.0 * float(np.max(np.abs(x_ridge)))
    return m if m > 0 else 1.0
