"""Weighted sOT barycenter via diagonal scaling.

For J marginals b_j, interior simplex weights lambda_j and a shared cost,
the iteration alternates (all elementwise, K the Gibbs kernel):

    a      <- prod_j (K v_j)^{lambda_j}
    u_j    <- a ./ (K v_j)
    v_j    <- min{ b_j ./ (K^T u_j), exp(gamma/(lambda_j eps)) }

The geometric mean and the capped division are the closed-form KL proximal
maps of the equal-row-marginal constraint and of the per-marginal l1
penalty.  The log-domain variant iterates potentials with g_j capped at
gamma/lambda_j.  A final u refresh (recomputing a and u_j against the last
v_j) makes every returned plan's row sums equal to the returned barycenter
by construction.
"""

from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from .core import (
    CostMatrix,
    Marginal,
    SolverConfig,
    TransportPlan,
    as_cost,
    as_weights,
    gibbs_kernel,
)
from .sinkhorn import (
    _MAX_EXPONENT,
    _PLAN_CHECK,
    _capped_ratio,
    _lse_rows,
    _plans_settled,
    _potential_change,
)

__all__ = [
    "BarycenterProblem",
    "BarycenterResult",
    "solve_barycenter",
    "solve_barycenter_logdomain",
    "prox_kl_capped",
    "prox_geometric_mean",
    "resemblance",
]


@dataclass(frozen=True)
class BarycenterProblem:
    """J marginals with interior simplex weights and a shared cost."""

    marginals: List[np.ndarray]
    weights: np.ndarray
    cost: CostMatrix
    cfg: SolverConfig

    def __post_init__(self):
        bs = [as_weights(b) for b in self.marginals]
        if not bs:
            raise ValueError("need at least one marginal")
        lam = np.asarray(self.weights, dtype=float)
        if lam.shape != (len(bs),):
            raise ValueError("need one weight per marginal")
        if np.any(lam <= 0):
            raise ValueError(
                "weights must lie in the interior of the simplex; for a "
                "boundary weight use a small interior substitute (see the "
                "CLI --limit-weight option)"
            )
        if abs(lam.sum() - 1.0) > 1e-9:
            raise ValueError(f"weights must sum to 1, got {lam.sum():.12g}")
        C = as_cost(self.cost)
        m = C.shape[1]
        for j, b in enumerate(bs):
            if b.shape[0] != m:
                raise ValueError(
                    f"marginal {j} has length {b.shape[0]}, cost has {m} columns"
                )
        lam.setflags(write=False)
        object.__setattr__(self, "marginals", bs)
        object.__setattr__(self, "weights", lam)
        object.__setattr__(self, "cost", C)


@dataclass(frozen=True)
class BarycenterResult:
    """Barycenter, per-marginal plans and their transport costs <P_j, C>."""

    a: Marginal
    plans: List[TransportPlan]
    costs: List[float]
    scalings_u: List[np.ndarray]
    scalings_v: List[np.ndarray]
    iterations: int
    converged: bool
    potentials_f: Optional[List[np.ndarray]] = None
    potentials_g: Optional[List[np.ndarray]] = None

    def weighted_cost(self, lam) -> float:
        return float(np.dot(np.asarray(lam, dtype=float), self.costs))


def prox_kl_capped(q, bound, ratio: float) -> np.ndarray:
    """argmin_p KL(p|q) + ratio*||bound - p||_1 over [0, bound].

    Closed form: min{exp(ratio) * q, bound} elementwise, with the convention
    that q = 0 maps to 0.
    """
    q = np.asarray(q, dtype=float)
    bound = np.asarray(bound, dtype=float)
    with np.errstate(over="ignore", invalid="ignore"):
        scaled = q * np.exp(min(ratio, _MAX_EXPONENT))
    return np.where(q == 0, 0.0, np.minimum(scaled, bound))


def prox_geometric_mean(p_list, lam) -> np.ndarray:
    """Elementwise weighted geometric mean prod_j p_j^{lambda_j}.

    Entries where any p_j vanishes map to 0 (the limit convention 0^l = 0
    for l > 0), which keeps blocked grid points at exactly zero mass.
    """
    lam = np.asarray(lam, dtype=float)
    ps = [np.asarray(p, dtype=float) for p in p_list]
    if len(ps) != lam.shape[0]:
        raise ValueError("need one weight per vector")
    zero = np.zeros_like(ps[0], dtype=bool)
    for p in ps:
        zero = zero | (p == 0)
    with np.errstate(divide="ignore"):
        acc = sum(lj * np.log(np.where(p == 0, 1.0, p)) for lj, p in zip(lam, ps))
    return np.where(zero, 0.0, np.exp(acc))


def _plan_costs(plans, C):
    finite = ~C.blocked
    return [float(np.sum(P.matrix[finite] * C.entries[finite])) for P in plans]


def solve_barycenter(prob: BarycenterProblem) -> BarycenterResult:
    """Standard-domain diagonal scaling for the sOT barycenter."""
    cfg = prob.cfg
    if cfg.log_domain:
        raise ValueError("cfg.log_domain must be False for solve_barycenter")
    C = prob.cost
    lam = prob.weights
    bs = prob.marginals
    J = len(bs)
    n = C.shape[0]

    K = gibbs_kernel(C, cfg.epsilon)
    KT = np.ascontiguousarray(K.T)
    caps = [float(np.exp(min(cfg.gamma / (lj * cfg.epsilon), _MAX_EXPONENT)))
            for lj in lam]
    vs = [np.ones(C.shape[1]) for _ in range(J)]
    us = [np.ones(n) for _ in range(J)]
    a = np.ones(n)

    def u_half_sweep(vs):
        Kvs = [K @ v for v in vs]
        a = prox_geometric_mean(Kvs, lam)
        us = []
        for Kv in Kvs:
            u = np.zeros(n)
            np.divide(a, Kv, out=u, where=Kv > 0)
            us.append(u)
        return a, us

    def plans_of(us, vs):
        return [np.where(C.blocked, 0.0, u[:, None] * K * v[None, :])
                for u, v in zip(us, vs)]

    converged = False
    plans_prev = None
    it = 0
    for it in range(1, cfg.max_iter + 1):
        a_prev, us_prev, vs_prev = a, us, vs
        a, us = u_half_sweep(vs)
        vs = [_capped_ratio(b, KT @ u, cap)
              for b, u, cap in zip(bs, us, caps)]
        change = float(np.max(np.where(a == a_prev, 0.0, np.abs(a - a_prev)),
                              initial=0.0))
        for u, u_prev in zip(us, us_prev):
            change = max(change, _potential_change(u, u_prev, cfg.epsilon))
        for v, v_prev in zip(vs, vs_prev):
            change = max(change, _potential_change(v, v_prev, cfg.epsilon))
        if change < cfg.tol:
            converged = True
            break
        if it % _PLAN_CHECK == 0:
            plans = plans_of(us, vs)
            if plans_prev is not None and _plans_settled(plans, plans_prev):
                converged = True
                break
            plans_prev = plans

    # final refresh against the last v so that P_j 1 == a by construction
    a, us = u_half_sweep(vs)
    plans = [TransportPlan(P) for P in plans_of(us, vs)]
    return BarycenterResult(
        a=Marginal(a),
        plans=plans,
        costs=_plan_costs(plans, C),
        scalings_u=us,
        scalings_v=vs,
        iterations=it,
        converged=converged,
    )


def solve_barycenter_logdomain(prob: BarycenterProblem) -> BarycenterResult:
    """Log-domain diagonal scaling; usable at small epsilon.

    With r_j = eps*log(exp((f_j + g_j - C)/eps) 1) the rowwise log-sum-exp
    over unblocked entries, the updates are

        f_j <- sum_i lambda_i (r_i - f_i) - (r_j - f_j)
        g_j <- min{ eps log b_j - eps*log(exp((f_j + g_j - C)^T/eps) 1) + g_j,
                    gamma/lambda_j }
    """
    cfg = prob.cfg
    if not cfg.log_domain:
        raise ValueError(
            "cfg.log_domain must be True for solve_barycenter_logdomain")
    C = prob.cost
    lam = prob.weights
    bs = prob.marginals
    J = len(bs)
    n, m = C.shape
    eps = cfg.epsilon

    negC = np.where(C.blocked, -np.inf, -C.entries)
    with np.errstate(divide="ignore"):
        log_bs = [eps * np.log(b) for b in bs]
    b_zeros = [b == 0 for b in bs]
    g_caps = [cfg.gamma / lj for lj in lam]

    negCT = np.ascontiguousarray(negC.T)
    fs = [np.zeros(n) for _ in range(J)]
    gs = [np.zeros(m) for _ in range(J)]

    def plans_of(fs, gs):
        out = []
        for f, g in zip(fs, gs):
            P = np.exp((f[:, None] + g[None, :] + negC) / eps)
            out.append(np.where(C.blocked, 0.0, P))
        return out

    def f_half_sweep(gs):
        # s_j = eps*log(K v_j); the log-barycenter is their weighted sum.
        # the own-potential shift of the boxed update cancels exactly under
        # the max shift inside the LSE, so it is omitted.
        ss = [eps * _lse_rows((g[None, :] + negC) / eps) for g in gs]
        log_a = sum(lj * s for lj, s in zip(lam, ss))
        log_a[np.any([np.isneginf(s) for s in ss], axis=0)] = -np.inf
        new_fs = []
        for s in ss:
            with np.errstate(invalid="ignore"):
                f_new = log_a - s
            f_new[np.isneginf(log_a)] = -np.inf
            new_fs.append(f_new)
        return log_a, new_fs

    converged = False
    plans_prev = None
    it = 0
    for it in range(1, cfg.max_iter + 1):
        fs_prev, gs_prev = fs, gs
        _, fs = f_half_sweep(gs)
        new_gs = []
        for f, log_b, b_zero, g_cap in zip(fs, log_bs, b_zeros, g_caps):
            lse = eps * _lse_rows((f[None, :] + negCT) / eps)
            with np.errstate(invalid="ignore"):
                g_new = np.minimum(g_cap, log_b - lse)
            g_new[np.isneginf(lse)] = g_cap
            g_new[b_zero] = -np.inf
            new_gs.append(g_new)
        gs = new_gs
        change = 0.0
        for f, f_prev in zip(fs, fs_prev):
            change = max(change, float(np.max(
                np.where(f == f_prev, 0.0, np.abs(f - f_prev)), initial=0.0)))
        for g, g_prev in zip(gs, gs_prev):
            change = max(change, float(np.max(
                np.where(g == g_prev, 0.0, np.abs(g - g_prev)), initial=0.0)))
        if change < cfg.tol:
            converged = True
            break
        if it % _PLAN_CHECK == 0:
            plans = plans_of(fs, gs)
            if plans_prev is not None and _plans_settled(plans, plans_prev):
                converged = True
                break
            plans_prev = plans

    log_a, fs = f_half_sweep(gs)
    with np.errstate(over="ignore"):
        a = np.exp(log_a / eps)
        us = [np.exp(f / eps) for f in fs]
        vs = [np.exp(g / eps) for g in gs]

    plans = [TransportPlan(P) for P in plans_of(fs, gs)]
    return BarycenterResult(
        a=Marginal(a),
        plans=plans,
        costs=_plan_costs(plans, C),
        scalings_u=us,
        scalings_v=vs,
        iterations=it,
        converged=converged,
        potentials_f=fs,
        potentials_g=gs,
    )


def resemblance(a, target, ref1, ref2) -> float:
    """Shift-invariant relative L2 distance of ``a`` to ``target``.

    min_k ||target - circshift(a, k)||_2 normalized by
    min_k ||ref1 - circshift(ref2, k)||_2; zero means ``a`` equals the
    target up to a circular shift.
    """
    a = as_weights(a)
    target = as_weights(target)
    ref1 = as_weights(ref1)
    ref2 = as_weights(ref2)
    n = a.shape[0]
    if any(x.shape[0] != n for x in (target, ref1, ref2)):
        raise ValueError("all four vectors must have the same length")

    def min_shift_dist(x, y):
        return min(float(np.linalg.norm(x - np.roll(y, k))) for k in range(n + 1))

    denom = min_shift_dist(ref1, ref2)
    if denom == 0:
        raise ValueError("reference marginals coincide up to a shift")
    return min_shift_dist(target, a) / denom
