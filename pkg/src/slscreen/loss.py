"""Logistic loss, its gradient, the per-observation weights alpha and a curvature bound."""

from __future__ import annotations

from enum import Enum

import numpy as np

from . import kernels
from .data import Dataset
from .errors import DimensionMismatch


class LossConvention(str, Enum):
    UNNORMALIZED = "unnormalized"  # sum over observations
    NORMALIZED = "normalized"  # mean over observations

    def scale(self, m: int) -> float:
        return 1.0 / m if self is LossConvention.NORMALIZED else 1.0


def _coef(x, d: Dataset) -> np.ndarray:
    x = np.ascontiguousarray(x, dtype=np.float64)
    if x.shape != (d.n,):
        raise DimensionMismatch(f"coefficient vector has shape {x.shape}, expected ({d.n},)")
    if not np.all(np.isfinite(x)):
        raise ValueError("coefficients must be finite")
    return x


def loss_value(x, d: Dataset, c: LossConvention = LossConvention.UNNORMALIZED) -> float:
    x = _coef(x, d)
    return float(kernels.loss_from_margin(d.a @ x, d.y, c.scale(d.m)))


def alpha_vector(x, d: Dataset) -> np.ndarray:
    """alpha_i = y_i / (1 + exp(y_i A_i x)), evaluated through a stable sigmoid."""
    x = _coef(x, d)
    return kernels.alpha_from_margin(d.a @ x, d.y)


def loss_gradient(x, d: Dataset, c: LossConvention = LossConvention.UNNORMALIZED) -> np.ndarray:
    return -c.scale(d.m) * (d.a.T @ alpha_vector(x, d))


def spectral_norm(a: np.ndarray, rtol: float = 1e-6, max_iters: int = 10_000, seed: int = 0) -> float:
    """Largest singular value by power iteration on A^T A."""
    m, n = a.shape
    if not np.any(a):
        return 0.0
    v = np.random.default_rng(seed).standard_normal(n)
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(max_iters):
        w = a.T @ (a @ v)
        lam_new = float(np.linalg.norm(w))
        if lam_new == 0.0:
            # start vector in the null space; restart on a new direction
            v = np.random.default_rng(seed + 1).standard_normal(n)
            v /= np.linalg.norm(v)
            continue
        v = w / lam_new
        if abs(lam_new - lam) <= 1e-3 * rtol * lam_new:
            lam = lam_new
            break
        lam = lam_new
    return float(np.sqrt(lam))


def curvature_bound(d: Dataset, c: LossConvention = LossConvention.UNNORMALIZED) -> float:
    """Upper bound scale * sigma_max(A)^2 / 4 on the loss Hessian spectrum."""
    sigma = spectral_norm(d.a)
    # the power estimate approaches sigma from below
    return c.scale(d.m) * (sigma * (1.0 + 1e-6)) ** 2 / 4.0
