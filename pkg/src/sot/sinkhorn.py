"""Entropic sOT solver for a single pair of marginals.

The iteration is a generalized Sinkhorn scaling: starting from u = v = 1,

    u <- min{ exp(gamma/eps) * 1, a ./ (K v) }
    v <- min{ exp(gamma/eps) * 1, b ./ (K^T u) }

where K = exp(-C/eps) is the Gibbs kernel with hard zeros on the blocked
pattern.  The capped division is the closed-form KL proximal map of the
l1 penalty gamma * ||a - P 1||_1 restricted to [0, a].  The log-domain
variant iterates the potentials f = eps log u, g = eps log v with
max-shifted log-sum-exp reductions over the unblocked entries only.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import (
    CostMatrix,
    SolverConfig,
    SolverResult,
    TransportPlan,
    as_cost,
    as_weights,
    gibbs_kernel,
)

__all__ = [
    "solve_sot",
    "solve_sot_logdomain",
    "solve",
    "select_gamma",
    "GammaSelection",
    "transported_mass",
]

# exp(700) ~ 1e304: caps beyond this are clamped so scalings stay finite.
# In the standard domain a gamma above 700*eps therefore acts as 700*eps,
# which by the penalty equivalence changes nothing once both exceed the
# saturation threshold; the log-domain solvers cap the potentials at the
# exact gamma.
_MAX_EXPONENT = 700.0

# cadence of the plan-stationarity check that complements the potential
# criterion (runs with blocked mass can slide a vanishing scaling toward
# zero forever without moving the plan measurably)
_PLAN_CHECK = 10


def _plans_settled(new_plans, old_plans):
    """True when every plan is bit-identical to its window predecessor.

    Exact equality is the only local signal that cannot fire during slow
    geometric convergence; it catches runs whose plan has frozen while a
    blocked dual component keeps sliding.
    """
    return all(np.array_equal(P, Q) for P, Q in zip(new_plans, old_plans))


def _cap(gamma: float, epsilon: float) -> float:
    return float(np.exp(min(gamma / epsilon, _MAX_EXPONENT)))


def _capped_ratio(num, den, cap):
    """min(num/den, cap) with the 0-division convention den == 0 -> cap."""
    ratio = np.full_like(num, np.inf)
    np.divide(num, den, out=ratio, where=den > 0)
    return np.minimum(ratio, cap)


_TINY = float(np.finfo(float).tiny)


def _potential_change(new, old, epsilon):
    """Sup-norm change of eps*log(scalings) between sweeps.

    Bit-equal entries contribute 0, as do pairs that are both subnormal:
    below DBL_MIN the significand (hence the log) carries no precision, so
    their jitter is measurement noise, not movement of the iterate.
    """
    with np.errstate(divide="ignore", invalid="ignore"):
        delta = np.abs(epsilon * (np.log(new) - np.log(old)))
    settled = (new == old) | ((new < _TINY) & (old < _TINY))
    return float(np.max(np.where(settled, 0.0, delta), initial=0.0))


def _check_dims(a, b, C):
    n, m = C.shape
    if a.shape[0] != n or b.shape[0] != m:
        raise ValueError(
            f"marginal lengths ({a.shape[0]}, {b.shape[0]}) do not match "
            f"cost matrix shape {n}x{m}"
        )


def _finish(plan_matrix, C, u, v, iterations, converged, f=None, g=None):
    finite = ~C.blocked
    cost = float(np.sum(plan_matrix[finite] * C.entries[finite]))
    plan = TransportPlan(plan_matrix)
    return SolverResult(
        plan=plan,
        u=u,
        v=v,
        iterations=iterations,
        converged=converged,
        transported_mass=plan.total_mass,
        cost=cost,
        f=f,
        g=g,
    )


def solve_sot(a, b, C, cfg: SolverConfig,
              u0: Optional[np.ndarray] = None,
              v0: Optional[np.ndarray] = None) -> SolverResult:
    """Standard-domain generalized Sinkhorn for entropic sOT.

    Parameters
    ----------
    a, b : Marginal or array-like
        Nonnegative weight vectors (any totals).
    C : CostMatrix or array-like
        Cost with +inf on blocked couplings.
    cfg : SolverConfig with ``log_domain=False``.
    u0, v0 : optional warm-start scaling vectors.

    Returns
    -------
    SolverResult; ``converged=False`` flags hitting ``max_iter`` (not an
    error).  The plan is diag(u) K diag(v), bit-exactly zero on blocked
    entries.
    """
    if cfg.log_domain:
        raise ValueError("cfg.log_domain must be False for solve_sot")
    a = as_weights(a)
    b = as_weights(b)
    C = as_cost(C)
    _check_dims(a, b, C)

    K = gibbs_kernel(C, cfg.epsilon)
    KT = np.ascontiguousarray(K.T)
    cap = _cap(cfg.gamma, cfg.epsilon)
    u = np.ones_like(a) if u0 is None else np.asarray(u0, dtype=float).copy()
    v = np.ones_like(b) if v0 is None else np.asarray(v0, dtype=float).copy()

    def plan_of(u, v):
        return np.where(C.blocked, 0.0, u[:, None] * K * v[None, :])

    converged = False
    plan_prev = None
    it = 0
    for it in range(1, cfg.max_iter + 1):
        u_prev, v_prev = u, v
        u = _capped_ratio(a, K @ v, cap)
        v = _capped_ratio(b, KT @ u, cap)
        change = max(
            _potential_change(u, u_prev, cfg.epsilon),
            _potential_change(v, v_prev, cfg.epsilon),
        )
        if change < cfg.tol:
            converged = True
            break
        if it % _PLAN_CHECK == 0:
            plan = plan_of(u, v)
            if plan_prev is not None and _plans_settled([plan], [plan_prev]):
                converged = True
                break
            plan_prev = plan

    return _finish(plan_of(u, v), C, u, v, it, converged)


def _lse_rows(M):
    """Rowwise log-sum-exp, max-shifted; all -inf rows give -inf."""
    shift = np.max(M, axis=1)
    ok = np.isfinite(shift)
    out = np.full(M.shape[0], -np.inf)
    if np.any(ok):
        sub = M[ok] - shift[ok][:, None]
        out[ok] = shift[ok] + np.log(np.sum(np.exp(sub), axis=1))
    return out


def solve_sot_logdomain(a, b, C, cfg: SolverConfig,
                        f0: Optional[np.ndarray] = None,
                        g0: Optional[np.ndarray] = None) -> SolverResult:
    """Log-domain twin of ``solve_sot``.

    Iterates the potentials

        f <- min{ gamma, eps log a - eps log(exp((f + g - C)/eps) 1) + f }
        g <- min{ gamma, eps log b - eps log(exp((f + g - C)/eps)^T 1) + g }

    with blocked entries excluded from the reductions.  Identical to the
    standard-domain update in exact arithmetic; usable at eps too small for
    the kernel to be represented.
    """
    if not cfg.log_domain:
        raise ValueError("cfg.log_domain must be True for solve_sot_logdomain")
    a = as_weights(a)
    b = as_weights(b)
    C = as_cost(C)
    _check_dims(a, b, C)

    eps = cfg.epsilon
    # -inf on blocked entries keeps them out of every log-sum-exp.
    negC = np.where(C.blocked, -np.inf, -C.entries)
    with np.errstate(divide="ignore", invalid="ignore"):
        log_a = eps * np.log(a)
        log_b = eps * np.log(b)
    a_zero = a == 0
    b_zero = b == 0

    f = np.zeros_like(a) if f0 is None else np.asarray(f0, dtype=float).copy()
    g = np.zeros_like(b) if g0 is None else np.asarray(g0, dtype=float).copy()

    def half_update(other_pot, log_w, w_zero, M, cap):
        # eps*log(K (scaling)) via the shifted log-sum-exp; the own-potential
        # shift of the boxed update cancels exactly under the max shift, so
        # it is omitted (this also keeps zero-mass rows NaN-free)
        lse = eps * _lse_rows((other_pot[None, :] + M) / eps)
        with np.errstate(invalid="ignore"):
            new = np.minimum(cap, log_w - lse)
        new[np.isneginf(lse)] = cap
        new[w_zero] = -np.inf
        return new

    negCT = np.ascontiguousarray(negC.T)

    def plan_of(f, g):
        P = np.exp((f[:, None] + g[None, :] + negC) / eps)
        return np.where(C.blocked, 0.0, P)

    converged = False
    plan_prev = None
    it = 0
    for it in range(1, cfg.max_iter + 1):
        f_prev, g_prev = f, g
        f = half_update(g, log_a, a_zero, negC, cfg.gamma)
        g = half_update(f, log_b, b_zero, negCT, cfg.gamma)
        change = max(
            float(np.max(np.where(f == f_prev, 0.0, np.abs(f - f_prev)), initial=0.0)),
            float(np.max(np.where(g == g_prev, 0.0, np.abs(g - g_prev)), initial=0.0)),
        )
        if change < cfg.tol:
            converged = True
            break
        if it % _PLAN_CHECK == 0:
            plan = plan_of(f, g)
            if plan_prev is not None and _plans_settled([plan], [plan_prev]):
                converged = True
                break
            plan_prev = plan

    plan_matrix = plan_of(f, g)
    with np.errstate(over="ignore"):
        u = np.exp(f / eps)
        v = np.exp(g / eps)
    return _finish(plan_matrix, C, u, v, it, converged, f=f, g=g)


def solve(a, b, C, cfg: SolverConfig, **warm_start) -> SolverResult:
    """Dispatch to the standard or log-domain solver per ``cfg.log_domain``."""
    if cfg.log_domain:
        return solve_sot_logdomain(a, b, C, cfg, **warm_start)
    return solve_sot(a, b, C, cfg, **warm_start)


def transported_mass(P) -> float:
    """Total mass <P, 1> carried by a plan."""
    M = P.matrix if isinstance(P, TransportPlan) else np.asarray(P, dtype=float)
    return float(M.sum())


@dataclass(frozen=True)
class GammaSelection:
    """Outcome of the ascending-gamma saturation scan.

    ``result`` is the solver output at the selected gamma.
    ``saturated=False`` means no earlier schedule entry reproduced the
    final entry's mass and the last entry was returned as a fallback.
    """

    gamma: float
    trace: list
    saturated: bool
    result: SolverResult


def select_gamma(a, b, C, cfg: SolverConfig, schedule,
                 mass_tol: Optional[float] = None) -> GammaSelection:
    """Pick gamma as the start of the transported-mass plateau.

    Runs the solver for every entry of the ascending schedule and returns
    the first gamma whose transported mass already agrees with the final
    (largest) entry's mass within ``mass_tol`` (default 1e-4 * min total
    mass).  Matching against the final entry rather than the immediate
    neighbour keeps the scan robust when the mass-vs-gamma curve is a
    staircase (as happens for near-zero epsilon), where two consecutive
    small gammas can share an interior tread far below saturation.  The
    full ``(gamma, transported_mass)`` trace is returned for plotting.
    """
    schedule = [float(gst) for gst in schedule]
    if len(schedule) == 0:
        raise ValueError("gamma schedule must be nonempty")
    if any(y <= x for x, y in zip(schedule, schedule[1:])):
        raise ValueError("gamma schedule must be strictly ascending")
    a_w = as_weights(a)
    b_w = as_weights(b)
    if mass_tol is None:
        mass_tol = 1e-4 * min(a_w.sum(), b_w.sum())

    results = []
    for gamma_j in schedule:
        cfg_j = SolverConfig(
            epsilon=cfg.epsilon,
            gamma=gamma_j,
            max_iter=cfg.max_iter,
            tol=cfg.tol,
            log_domain=cfg.log_domain,
        )
        results.append(solve(a_w, b_w, C, cfg_j))
    trace = [(g, r.transported_mass) for g, r in zip(schedule, results)]

    reference = results[-1].transported_mass
    for j in range(len(schedule) - 1):
        if abs(results[j].transported_mass - reference) <= mass_tol:
            return GammaSelection(schedule[j], trace, True, results[j])
    return GammaSelection(schedule[-1], trace, False, results[-1])
