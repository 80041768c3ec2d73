"""Hot loops: logistic primitives, penalty proxes and the first-order solver.

Everything here operates on plain float64 arrays so it compiles under numba
and also runs unmodified as numpy (see ``_jit``).

Penalty codes used by the solver:

    PERSP_REG   reverse-Huber penalty (z eliminated from x^2/(g z) + mu z)
    PERSP_CARD  min over {z in [0,1]^n, sum z <= B} of sum x^2/(g z)
    BIGM_REG    x^2/g + (mu/M)|x|, |x| <= M
    BIGM_CARD   x^2/g, sum|x| <= B M, |x| <= M
    RIDGE       x^2/g

``one`` marks coordinates whose indicator is fixed to 1; they always carry
x^2/g (+ mu for the REG kinds) and are excluded from the budget.
"""

import numpy as np

from ._jit import njit

PERSP_REG = 0
PERSP_CARD = 1
BIGM_REG = 2
BIGM_CARD = 3
RIDGE = 4


@njit
def softplus(t):
    return np.maximum(t, 0.0) + np.log1p(np.exp(-np.abs(t)))


@njit
def sigmoid(t):
    e = np.exp(-np.abs(t))
    return np.where(t >= 0.0, 1.0 / (1.0 + e), e / (1.0 + e))


@njit
def loss_from_margin(ax, y, scale):
    return scale * np.sum(softplus(-y * ax))


@njit
def alpha_from_margin(ax, y):
    return y * sigmoid(-y * ax)


@njit
def loss_remainder(ay, ad, y, scale):
    """L(y + d) - L(y) - grad L(y).d from margins ay = A y and ad = A d.

    Each term softplus(v + w) - softplus(v) - sigmoid(v) w is evaluated as
    log1p(sigmoid(v) expm1(w)) - sigmoid(v) w, which avoids the cancellation
    of the direct difference when d is small.
    """
    v = -y * ay
    w = -y * ad
    s = sigmoid(v)
    wc = np.minimum(w, 30.0)
    small = np.log1p(s * np.expm1(wc)) - s * wc
    direct = softplus(v + w) - softplus(v) - s * w
    return scale * np.sum(np.where(w <= 30.0, small, direct))


# --------------------------------------------------------------------------- #
# perspective REG penalty


@njit
def reg_penalty(x, gamma, mu):
    """Elementwise reverse-Huber value."""
    ax = np.abs(x)
    knot = np.sqrt(gamma * mu)
    return np.where(ax <= knot, 2.0 * ax * np.sqrt(mu / gamma), x * x / gamma + mu)


@njit
def reg_prox(v, step, gamma, mu):
    """Elementwise prox of step * reverse-Huber."""
    knot = np.sqrt(gamma * mu)
    av = np.abs(v)
    soft = av - 2.0 * step * np.sqrt(mu / gamma)
    quad = av / (1.0 + 2.0 * step / gamma)
    u = np.where(soft <= knot, np.maximum(soft, 0.0), quad)
    return np.sign(v) * u


# --------------------------------------------------------------------------- #
# cardinality budget (water-filling)


@njit
def waterfill_theta(ax, budget):
    """Level theta with sum(min(1, ax/theta)) == budget.

    Returns 0.0 when the budget is slack (every nonzero gets z = 1) and
    -1.0 when budget == 0.
    """
    if budget <= 0:
        return -1.0
    nnz = 0
    for v in ax:
        if v > 0.0:
            nnz += 1
    if nnz <= budget:
        return 0.0
    s = np.sort(ax)[::-1]
    tail = np.sum(s)
    theta = 0.0
    for r in range(budget):
        theta = tail / (budget - r)
        if s[r] <= theta:
            return theta
        tail -= s[r]
    return theta


@njit
def waterfill_z(ax, budget):
    theta = waterfill_theta(ax, budget)
    z = np.zeros(ax.shape[0])
    if theta < 0.0:
        return z
    for j in range(ax.shape[0]):
        if ax[j] > 0.0:
            z[j] = 1.0 if theta == 0.0 else min(1.0, ax[j] / theta)
    return z


@njit
def card_penalty(x, gamma, budget):
    """min over the budgeted box of sum x_j^2 / (gamma z_j); inf if infeasible."""
    ax = np.abs(x)
    theta = waterfill_theta(ax, budget)
    if theta < 0.0:
        if np.any(ax > 0.0):
            return np.inf
        return 0.0
    if theta == 0.0:
        return np.sum(x * x) / gamma
    tot = 0.0
    for v in ax:
        if v >= theta:
            tot += v * v
        else:
            tot += theta * v
    return tot / gamma


@njit
def card_prox(v, step, gamma, budget):
    """Prox of step * card_penalty.

    For fixed z the minimizer is u = v z / (z + a), a = 2 step / gamma, and
    the optimal z has the form clip(c |v| - a, 0, 1) with the scalar c set by
    bisection so that the budget is met.
    """
    n = v.shape[0]
    a = 2.0 * step / gamma
    if budget <= 0:
        return np.zeros(n)
    av = np.abs(v)
    nnz = 0
    vmin = np.inf
    for j in range(n):
        if av[j] > 0.0:
            nnz += 1
            vmin = min(vmin, av[j])
    if nnz <= budget:
        return v / (1.0 + a)
    lo = 0.0
    hi = (1.0 + a) / vmin
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        tot = np.sum(np.minimum(np.maximum(av * mid - a, 0.0), 1.0))
        if tot < budget:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-16 * hi:
            break
    c = 0.5 * (lo + hi)
    # exact solve on the active pattern found by bisection
    w = av * c - a
    n_one = 0
    s_mid = 0.0
    n_mid = 0
    for j in range(n):
        if w[j] >= 1.0:
            n_one += 1
        elif w[j] > 0.0:
            n_mid += 1
            s_mid += av[j]
    if n_mid > 0:
        c2 = (budget - n_one + a * n_mid) / s_mid
        w2 = av * c2 - a
        ok = True
        for j in range(n):
            if w[j] >= 1.0 and w2[j] < 1.0 - 1e-12:
                ok = False
            elif 0.0 < w[j] < 1.0 and (w2[j] < -1e-12 or w2[j] > 1.0 + 1e-12):
                ok = False
            elif w[j] <= 0.0 and w2[j] > 1e-12:
                ok = False
        if ok:
            c = c2
    z = np.minimum(np.maximum(av * c - a, 0.0), 1.0)
    return v * z / (z + a)


# --------------------------------------------------------------------------- #
# big-M pieces


@njit
def project_capped_l1(w, radius, cap):
    """Euclidean projection onto {u : sum|u| <= radius, |u_j| <= cap}."""
    aw = np.minimum(np.abs(w), cap)
    if np.sum(aw) <= radius:
        return np.sign(w) * aw
    if radius <= 0.0:
        return np.zeros(w.shape[0])
    av = np.abs(w)
    lo = 0.0
    hi = np.max(av)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        tot = np.sum(np.minimum(np.maximum(av - mid, 0.0), cap))
        if tot > radius:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-16 * max(hi, 1.0):
            break
    tau = 0.5 * (lo + hi)
    r = av - tau
    n_cap = 0
    n_mid = 0
    s_mid = 0.0
    for j in range(w.shape[0]):
        if r[j] >= cap:
            n_cap += 1
        elif r[j] > 0.0:
            n_mid += 1
            s_mid += av[j]
    if n_mid > 0:
        t2 = (n_cap * cap + s_mid - radius) / n_mid
        if t2 >= 0.0:
            tau = t2
    return np.sign(w) * np.minimum(np.maximum(av - tau, 0.0), cap)


# --------------------------------------------------------------------------- #
# generic penalty dispatch


@njit
def penalty_value(kind, x, one, gamma, mu, budget, bigm):
    free = ~one
    xo = x[one]
    base = np.sum(xo * xo) / gamma
    if kind == PERSP_REG:
        return np.sum(reg_penalty(x[free], gamma, mu)) + base + mu * xo.shape[0]
    if kind == PERSP_CARD:
        return card_penalty(x[free], gamma, budget) + base
    if kind == BIGM_REG:
        xf = x[free]
        return (np.sum(xf * xf) / gamma + mu / bigm * np.sum(np.abs(xf))
                + base + mu * xo.shape[0])
    return np.sum(x * x) / gamma


@njit
def penalty_prox(kind, v, step, one, gamma, mu, budget, bigm):
    a = 2.0 * step / gamma
    out = v / (1.0 + a)
    free = ~one
    if kind == PERSP_REG:
        out[free] = reg_prox(v[free], step, gamma, mu)
    elif kind == PERSP_CARD:
        out[free] = card_prox(v[free], step, gamma, budget)
    elif kind == BIGM_REG:
        vf = v[free]
        sh = np.maximum(np.abs(vf) - step * mu / bigm, 0.0) / (1.0 + a)
        out[free] = np.sign(vf) * np.minimum(sh, bigm)
        out[one] = np.sign(out[one]) * np.minimum(np.abs(out[one]), bigm)
    elif kind == BIGM_CARD:
        out[free] = project_capped_l1(out[free], budget * bigm, bigm)
        out[one] = np.sign(out[one]) * np.minimum(np.abs(out[one]), bigm)
    return out


# --------------------------------------------------------------------------- #
# accelerated proximal gradient


@njit
def apg(a_mat, y, scale, x0, kind, one, gamma, mu, budget, bigm,
        lip, tol, max_iters, backtrack):
    """Monotone accelerated proximal gradient with function-value restart.

    Stops when the gradient-mapping residual L ||x - prox(x - g/L)||_inf
    (L = lip) falls below tol * max(1, ||g||_inf). Returns
    (x, objective, iterations, residual, converged, n_restarts).
    """
    n = x0.shape[0]
    at = np.ascontiguousarray(a_mat.T)
    step = 1.0 / lip
    x = x0.copy()
    ax = a_mat @ x
    fx = loss_from_margin(ax, y, scale)
    obj = fx + penalty_value(kind, x, one, gamma, mu, budget, bigm)
    x_prev = x.copy()
    ax_prev = ax.copy()
    tk = 1.0
    beta = 0.0
    restarts = 0
    resid = np.inf
    converged = False
    it = 0
    if n == 0:
        return x, obj, 0, 0.0, True, 0
    while it < max_iters:
        it += 1
        yv = x + beta * (x - x_prev)
        ay = ax + beta * (ax - ax_prev)
        gy = -scale * (at @ alpha_from_margin(ay, y))
        if backtrack:
            step = min(step * 1.5, 1e6 / lip)
        while True:
            xn = penalty_prox(kind, yv - step * gy, step, one, gamma, mu, budget, bigm)
            d = xn - yv
            ad = a_mat @ d
            axn = ay + ad
            if not backtrack or step <= 1.0 / lip:
                break
            if loss_remainder(ay, ad, y, scale) <= np.dot(d, d) / (2.0 * step):
                break
            step = max(0.5 * step, 1.0 / lip)
        fxn = loss_from_margin(axn, y, scale)
        objn = fxn + penalty_value(kind, xn, one, gamma, mu, budget, bigm)
        # decreases below float resolution of the objective still count
        slack = 1e-13 * max(1.0, abs(obj))
        if objn > obj + slack and beta > 0.0:
            # restart from the last monotone iterate
            restarts += 1
            tk = 1.0
            beta = 0.0
            x_prev = x.copy()
            ax_prev = ax.copy()
            continue
        # here beta == 0 or the step decreased the objective; a plain
        # proximal-gradient step is monotone in exact arithmetic, so it is
        # taken even when rounding makes the objective tick up
        x_prev = x
        ax_prev = ax
        x = xn
        ax = axn
        obj = objn
        tk_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * tk * tk))
        beta = (tk - 1.0) / tk_next
        tk = tk_next
        # stationarity at the monotone iterate
        gx = -scale * (at @ alpha_from_margin(ax, y))
        # measured at the conservative step 1/lip whatever the line search chose
        xr = penalty_prox(kind, x - gx / lip, 1.0 / lip, one, gamma, mu, budget, bigm)
        resid = np.max(np.abs(x - xr)) * lip
        gmax = np.max(np.abs(gx))
        if resid <= tol * max(1.0, gmax):
            converged = True
            break
    return x, obj, it, resid, converged, restarts


# --------------------------------------------------------------------------- #
# smooth ridge-logistic via Newton


@njit
def ridge_objective(a_mat, y, scale, gamma, x):
    return loss_from_margin(a_mat @ x, y, scale) + np.dot(x, x) / gamma


@njit
def newton_ridge(a_mat, y, scale, gamma, x0, tol, max_iters):
    """Minimize scale * sum softplus(-y A x) + ||x||^2 / gamma.

    Stops when half the squared Newton decrement (an estimate of the
    suboptimality) drops below tol. Returns (x, objective, iterations, converged).
    """
    n = a_mat.shape[1]
    x = x0.copy()
    if n == 0:
        return x, loss_from_margin(np.zeros(a_mat.shape[0]), y, scale), 0, True
    ax = a_mat @ x
    f = loss_from_margin(ax, y, scale) + np.dot(x, x) / gamma
    eye = np.eye(n)
    for it in range(max_iters):
        alpha = alpha_from_margin(ax, y)
        g = -scale * (a_mat.T @ alpha) + 2.0 * x / gamma
        sig = np.abs(alpha)
        w = scale * sig * (1.0 - sig)
        h = a_mat.T @ (a_mat * w.reshape(-1, 1)) + (2.0 / gamma) * eye
        d = -np.linalg.solve(h, g)
        dec = -np.dot(g, d)
        if 0.5 * dec <= tol:
            return x, f, it, True
        t = 1.0
        ad = a_mat @ d
        while True:
            xn = x + t * d
            axn = ax + t * ad
            fn = loss_from_margin(axn, y, scale) + np.dot(xn, xn) / gamma
            if fn <= f - 0.25 * t * dec or t < 1e-12:
                break
            t *= 0.5
        if fn > f:
            return x, f, it, 0.5 * dec <= 1e3 * tol
        x = xn
        ax = a_mat @ x
        f = loss_from_margin(ax, y, scale) + np.dot(x, x) / gamma
    return x, f, max_iters, False
