"""Fenchel-dual certificates, the rounding upper bound and safe screening rules.

Given a relaxation point x*, set g = -grad L(x*) = scale * A^T alpha and
p = gamma * g. With this p the inner minimization over x of
L(x) + p'x/gamma is attained exactly at x*, so

    REG:   L(x*) + g'x* + sum_j min(0, mu - gamma delta_j)
    CARD:  L(x*) + g'x* - gamma * (sum of the k largest delta_j)

with delta_j = g_j^2 / 4 are valid lower bounds on the relaxation value for
any x*, and equal to it at the optimum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np

from . import kernels
from .data import Dataset
from .errors import InternalContradiction, InvalidK, NonConvergedRelaxation
from .loss import LossConvention
from .relaxations import (
    Fix,
    ProblemSpec,
    RelaxationSolution,
    SolverConfig,
    VariableFixings,
    mip_objective,
    ridge_logistic,
    solve_relaxation,
)

EPS_SAFE = 1e-9


@dataclass
class DualCertificate:
    alpha: np.ndarray
    p: np.ndarray
    delta: np.ndarray
    dual_value: float
    primal_value: float
    tightness_gap: float
    fixings: VariableFixings

    @property
    def lower_bound(self) -> float:
        """The bound the screening rules use: the smaller of the primal and dual values."""
        return min(self.primal_value, self.dual_value)


@dataclass
class UpperBound:
    x: np.ndarray
    z: np.ndarray
    value: float
    refit: bool

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.z)


class ScreenStatus(str, Enum):
    FREE = "free"
    FIXED_ZERO = "fixed_zero"
    FIXED_ONE = "fixed_one"


_LABEL = {Fix.FREE: ScreenStatus.FREE, Fix.ZERO: ScreenStatus.FIXED_ZERO, Fix.ONE: ScreenStatus.FIXED_ONE}


@dataclass
class ScreenResult:
    status: np.ndarray  # int8 codes of Fix
    eta_relax: float
    eta_upper: float
    lhs_zero: np.ndarray
    lhs_one: np.ndarray
    delta_k: Optional[float] = None
    delta_k1: Optional[float] = None

    @property
    def n(self) -> int:
        return self.status.shape[0]

    @property
    def n_fixed_zero(self) -> int:
        return int(np.count_nonzero(self.status == Fix.ZERO))

    @property
    def n_fixed_one(self) -> int:
        return int(np.count_nonzero(self.status == Fix.ONE))

    @property
    def percent_screened(self) -> float:
        return 100.0 * (self.n_fixed_zero + self.n_fixed_one) / self.n

    @property
    def per_feature_margin(self) -> np.ndarray:
        """Largest rule left-hand side minus the upper bound; positive where a rule fired."""
        return np.maximum(self.lhs_zero, self.lhs_one) - self.eta_upper

    def fixings(self) -> VariableFixings:
        return VariableFixings(self.status)

    def labels(self) -> list:
        return [_LABEL[Fix(int(s))].value for s in self.status]

    def as_dict(self) -> dict:
        out = {
            "status": self.labels(),
            "fixed_zero": self.n_fixed_zero,
            "fixed_one": self.n_fixed_one,
            "percent_screened": self.percent_screened,
            "eta_relax": self.eta_relax,
            "eta_upper": self.eta_upper,
            "lhs_zero": self.lhs_zero.tolist(),
            "lhs_one": self.lhs_one.tolist(),
        }
        if self.delta_k is not None:
            out["delta_k"] = self.delta_k
            out["delta_k1"] = self.delta_k1
        return out


# --------------------------------------------------------------------------- #
# dual side


def _negative_gradient(x, d: Dataset, convention: LossConvention):
    ax = d.a @ x
    alpha = kernels.alpha_from_margin(ax, d.y)
    g = convention.scale(d.m) * (d.a.T @ alpha)
    loss = float(kernels.loss_from_margin(ax, d.y, convention.scale(d.m)))
    return loss, alpha, g


def _topk_sum(values: np.ndarray, k: int) -> float:
    if k <= 0 or values.size == 0:
        return 0.0
    if k >= values.size:
        return float(np.sum(values))
    return float(np.sum(np.partition(values, values.size - k)[values.size - k:]))


def eval_dual_reg(x_star, d: Dataset, gamma: float, mu: float,
                  convention: LossConvention = LossConvention.UNNORMALIZED,
                  fixings: Optional[VariableFixings] = None) -> float:
    """Dual value of the REG perspective relaxation at p = -gamma grad L(x*)."""
    x_star = np.asarray(x_star, dtype=np.float64)
    fix = fixings if fixings is not None else VariableFixings.free(d.n)
    loss, _, g = _negative_gradient(x_star, d, convention)
    coef = mu - gamma * g * g / 4.0
    free = fix.free_mask
    one = fix.status == Fix.ONE
    return (loss + float(g @ x_star) + float(np.sum(np.minimum(0.0, coef[free])))
            + float(np.sum(coef[one])))


def eval_dual_card(x_star, d: Dataset, gamma: float, k: int,
                   convention: LossConvention = LossConvention.UNNORMALIZED,
                   fixings: Optional[VariableFixings] = None) -> float:
    """Dual value of the CARD perspective relaxation at p = -gamma grad L(x*)."""
    x_star = np.asarray(x_star, dtype=np.float64)
    fix = fixings if fixings is not None else VariableFixings.free(d.n)
    loss, _, g = _negative_gradient(x_star, d, convention)
    delta = g * g / 4.0
    one = fix.status == Fix.ONE
    budget = int(k) - int(one.sum())
    z_part = float(np.sum(delta[one])) + _topk_sum(delta[fix.free_mask], budget)
    return loss + float(g @ x_star) - gamma * z_part


def dual_certificate(relax: RelaxationSolution, d: Dataset, spec: Optional[ProblemSpec] = None,
                     require_converged: bool = True) -> DualCertificate:
    spec = spec or relax.spec
    if require_converged and not relax.converged:
        raise NonConvergedRelaxation(
            f"relaxation stopped after {relax.iterations} iterations, residual {relax.kkt_residual:.3e}")
    _, alpha, g = _negative_gradient(relax.x, d, spec.convention)
    delta = g * g / 4.0
    if spec.is_reg:
        dual = eval_dual_reg(relax.x, d, spec.gamma, spec.mu, spec.convention, relax.fixings)
    else:
        dual = eval_dual_card(relax.x, d, spec.gamma, spec.k, spec.convention, relax.fixings)
    primal = relax.objective
    gap = abs(primal - dual) / max(1.0, abs(primal))
    return DualCertificate(alpha, spec.gamma * g, delta, dual, primal, gap, relax.fixings)


# --------------------------------------------------------------------------- #
# primal side


def round_upper_bound(relax: RelaxationSolution, d: Dataset, spec: Optional[ProblemSpec] = None,
                      refit: bool = True, fill_budget: Optional[bool] = None) -> UpperBound:
    """Round the relaxation z to a feasible support and evaluate the exact MIP objective.

    REG keeps z_j >= 0.5. CARD keeps the largest such z_j, at most k of them;
    with ``fill_budget`` (default: same as ``refit``) unused budget is filled
    with the next largest positive z_j, which cannot hurt a refitted support.
    """
    spec = spec or relax.spec
    fix = relax.fixings
    z_rel = relax.z
    if fill_budget is None:
        fill_budget = refit
    allowed = fix.status != Fix.ZERO
    cand = ((z_rel >= 0.5) & allowed) | (fix.status == Fix.ONE)
    if spec.is_reg:
        support = np.flatnonzero(cand)
    else:
        if fill_budget:
            cand |= (z_rel > 0.0) & allowed
        idx = np.flatnonzero(cand)
        # One-fixed first, then by decreasing z, ties to the lower index
        order = np.lexsort((idx, -z_rel[idx], fix.status[idx] != Fix.ONE))
        support = np.sort(idx[order][: min(spec.k, idx.size)])
    z = np.zeros(d.n, dtype=np.int8)
    z[support] = 1
    if refit:
        x, _ = ridge_logistic(d, spec.gamma, spec.convention, support=support, x0=relax.x)
    else:
        x = np.where(z == 1, relax.x, 0.0)
    value = mip_objective(d, spec, x, z)
    return UpperBound(x, z, value, refit)


# --------------------------------------------------------------------------- #
# rules


def _check_contradiction(fz, fo):
    both = fz & fo
    if np.any(both):
        raise InternalContradiction(
            f"both rules fired for features {np.flatnonzero(both).tolist()}; "
            "the upper bound lies below the relaxation bound")


def screen_reg(cert: DualCertificate, ub, gamma: float, mu: float,
               eps: float = EPS_SAFE) -> ScreenResult:
    """z_j = 0 if eta + mu - gamma delta_j > ub; z_j = 1 if eta - mu + gamma delta_j > ub."""
    eta = cert.lower_bound
    eta_bar = ub.value if isinstance(ub, UpperBound) else float(ub)
    lhs_zero = eta + mu - gamma * cert.delta
    lhs_one = eta - mu + gamma * cert.delta
    free = cert.fixings.free_mask
    fz = free & (lhs_zero > eta_bar + eps)
    fo = free & (lhs_one > eta_bar + eps)
    _check_contradiction(fz, fo)
    status = cert.fixings.status.copy()
    status[fz] = Fix.ZERO
    status[fo] = Fix.ONE
    return ScreenResult(status, eta, eta_bar, lhs_zero, lhs_one)


def kth_largest(values: np.ndarray, k: int) -> float:
    """k-th largest entry (1-based); 0.0 past the end."""
    if k <= 0:
        return math.inf
    if k > values.size:
        return 0.0
    return float(np.partition(values, values.size - k)[values.size - k])


def screen_card(cert: DualCertificate, ub, gamma: float, k: int,
                eps: float = EPS_SAFE) -> ScreenResult:
    """Cardinality rules on the free features, with the budget left after One-fixings."""
    n = cert.delta.shape[0]
    if k >= n:
        raise InvalidK(f"screening needs k < n, got k={k}, n={n}")
    eta = cert.lower_bound
    eta_bar = ub.value if isinstance(ub, UpperBound) else float(ub)
    fix = cert.fixings
    free = fix.free_mask
    budget = k - len(fix.ones)
    dfree = cert.delta[free]
    dk = kth_largest(dfree, budget)
    dk1 = kth_largest(dfree, budget + 1)
    delta = cert.delta
    lhs_zero = eta - gamma * (delta - dk)
    lhs_one = eta + gamma * (delta - dk1)
    fz = free & (delta <= dk1) & (lhs_zero > eta_bar + eps)
    fo = free & (delta >= dk) & (lhs_one > eta_bar + eps)
    if budget <= 0:
        fz, fo = free.copy(), np.zeros(n, dtype=bool)
    _check_contradiction(fz, fo)
    status = fix.status.copy()
    status[fz] = Fix.ZERO
    status[fo] = Fix.ONE
    return ScreenResult(status, eta, eta_bar, lhs_zero, lhs_one,
                        delta_k=dk if budget > 0 else None, delta_k1=dk1)


def apply_rules(cert: DualCertificate, ub, spec: ProblemSpec) -> ScreenResult:
    if spec.is_reg:
        return screen_reg(cert, ub, spec.gamma, spec.mu)
    return screen_card(cert, ub, spec.gamma, spec.k)


@dataclass
class ScreenReport:
    relax: RelaxationSolution
    cert: DualCertificate
    upper: UpperBound
    result: ScreenResult

    def as_dict(self) -> dict:
        out = self.result.as_dict()
        out.update({
            "eta_relax_primal": self.cert.primal_value,
            "eta_relax_dual": self.cert.dual_value,
            "tightness_gap": self.cert.tightness_gap,
            "relax_iterations": self.relax.iterations,
            "relax_converged": self.relax.converged,
            "upper_support": self.upper.support.tolist(),
            "delta": self.cert.delta.tolist(),
        })
        return out


def screen(d: Dataset, spec: ProblemSpec, cfg: SolverConfig = SolverConfig(),
           refit: bool = True, relax: Optional[RelaxationSolution] = None) -> ScreenReport:
    """relax -> certificate -> round -> rules."""
    spec.check(d)
    if relax is None:
        relax = solve_relaxation(d, spec, cfg=cfg)
    cert = dual_certificate(relax, d, spec)
    ub = round_upper_bound(relax, d, spec, refit=refit)
    return ScreenReport(relax, cert, ub, apply_rules(cert, ub, spec))
