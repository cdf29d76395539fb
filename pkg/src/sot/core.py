"""Domain types and elementwise kernels shared by all solvers.

Conventions used throughout the package:

* marginals are nonnegative weight vectors, *not* necessarily normalized;
* cost matrices live in [0, +inf], with +inf marking blocked couplings;
* a transport plan is zero exactly where its cost is infinite;
* 0 log 0 = 0 and exp(-inf) = 0 everywhere.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

__all__ = [
    "Marginal",
    "CostMatrix",
    "TransportPlan",
    "SolverConfig",
    "SolverResult",
    "as_weights",
    "truncated_sq_cost",
    "grid_truncated_cost",
    "unit_grid",
    "gibbs_kernel",
    "kl_divergence",
    "entropy",
    "marginals",
    "discretized_gaussian",
    "discretized_indicator",
]


def _frozen_array(x, dtype=float, ndim=None):
    arr = np.array(x, dtype=dtype)
    if ndim is not None and arr.ndim != ndim:
        raise ValueError(f"expected a {ndim}-d array, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Marginal:
    """Nonnegative weight vector on discrete support points.

    ``weights`` carries the mass (any finite total, normalization is not
    required).  ``support`` optionally carries the point coordinates, shape
    ``(n,)`` or ``(n, d)``.
    """

    weights: np.ndarray
    support: Optional[np.ndarray] = None

    def __post_init__(self):
        w = _frozen_array(self.weights, ndim=1)
        if w.size == 0:
            raise ValueError("marginal must contain at least one weight")
        if not np.all(np.isfinite(w)):
            raise ValueError("marginal weights must be finite")
        if np.any(w < 0):
            raise ValueError("marginal weights must be nonnegative")
        object.__setattr__(self, "weights", w)
        if self.support is not None:
            s = _frozen_array(self.support)
            if s.shape[0] != w.shape[0]:
                raise ValueError(
                    f"support has {s.shape[0]} points but there are {w.shape[0]} weights"
                )
            object.__setattr__(self, "support", s)

    def __len__(self):
        return self.weights.shape[0]

    @property
    def total_mass(self) -> float:
        return float(self.weights.sum())


def as_weights(a) -> np.ndarray:
    """Coerce a Marginal or array-like into a 1-d nonnegative float array."""
    if isinstance(a, Marginal):
        return a.weights
    w = np.asarray(a, dtype=float)
    if w.ndim != 1:
        raise ValueError(f"expected a 1-d weight vector, got shape {w.shape}")
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise ValueError("weights must be finite and nonnegative")
    return w


@dataclass(frozen=True)
class CostMatrix:
    """n x m cost matrix over [0, +inf].

    ``blocked`` is the materialized infinity pattern (a boolean mask equal to
    ``isinf(entries)``), kept explicit so kernels can zero those positions
    bit-exactly instead of relying on floating-point underflow.
    """

    entries: np.ndarray
    blocked: np.ndarray = field(init=False)

    def __post_init__(self):
        c = _frozen_array(self.entries, ndim=2)
        if np.any(np.isnan(c)):
            raise ValueError("cost matrix must not contain NaN")
        blocked = np.isinf(c)
        if np.any(c[~blocked] < 0) or np.any(np.isneginf(c)):
            raise ValueError("finite cost entries must be nonnegative")
        blocked.setflags(write=False)
        object.__setattr__(self, "entries", c)
        object.__setattr__(self, "blocked", blocked)

    @property
    def shape(self):
        return self.entries.shape

    def inf_pattern(self):
        """The blocked positions as a set of ``(i, j)`` index pairs."""
        return set(zip(*np.nonzero(self.blocked)))


def as_cost(C) -> CostMatrix:
    return C if isinstance(C, CostMatrix) else CostMatrix(np.asarray(C, dtype=float))


@dataclass(frozen=True)
class TransportPlan:
    """Nonnegative n x m coupling, zero on the blocked pattern of its cost."""

    matrix: np.ndarray

    def __post_init__(self):
        p = _frozen_array(self.matrix, ndim=2)
        if np.any(np.isnan(p)) or np.any(p < 0) or np.any(np.isinf(p)):
            raise ValueError("plan entries must be finite and nonnegative")
        object.__setattr__(self, "matrix", p)

    @property
    def row_sums(self) -> np.ndarray:
        return self.matrix.sum(axis=1)

    @property
    def col_sums(self) -> np.ndarray:
        return self.matrix.sum(axis=0)

    @property
    def total_mass(self) -> float:
        return float(self.matrix.sum())


@dataclass(frozen=True)
class SolverConfig:
    """Controls for the scaling solvers.

    epsilon : entropy weight (> 0)
    gamma   : weight of the l1 penalty on blocked mass (> 0 unless a caller
              explicitly sweeps gamma = 0)
    max_iter: maximum number of full sweeps
    tol     : convergence threshold.  A run stops when the sup-norm change
              of the dual potentials (eps*log u, eps*log v) between sweeps
              drops below tol, or earlier if the plan becomes bit-stable
              across a ten-sweep window; the second criterion terminates
              runs whose plan has frozen while a blocked dual component
              keeps sliding toward -inf.
    log_domain : run the log-sum-exp stabilized iteration
    """

    epsilon: float
    gamma: float
    max_iter: int = 20000
    tol: float = 1e-9
    log_domain: bool = False

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.gamma < 0:
            raise ValueError("gamma must be nonnegative")
        if self.max_iter < 1:
            raise ValueError("max_iter must be a positive integer")
        if not self.tol > 0:
            raise ValueError("tol must be positive")


@dataclass(frozen=True)
class SolverResult:
    """Output of a single sOT solve.

    ``u``/``v`` are the diagonal scaling vectors; in the log domain they are
    exp(f/eps), exp(g/eps) and the potentials ``f``/``g`` are also stored.
    """

    plan: TransportPlan
    u: np.ndarray
    v: np.ndarray
    iterations: int
    converged: bool
    transported_mass: float
    cost: float
    f: Optional[np.ndarray] = None
    g: Optional[np.ndarray] = None


def unit_grid(n: int) -> np.ndarray:
    """n equispaced points i/n, i = 0..n-1, on [0, 1)."""
    if n < 1:
        raise ValueError("grid needs at least one point")
    return np.arange(n, dtype=float) / n


def truncated_sq_cost(x, y, c_cut: float) -> CostMatrix:
    """Squared Euclidean cost, blocked where the *distance* exceeds ``c_cut``.

    Entry (i, j) is |x_i - y_j|^2 when |x_i - y_j| <= c_cut and +inf
    otherwise.  Points may be scalars (shape ``(n,)``) or ``(n, d)`` arrays of
    matching dimension d.
    """
    if not c_cut > 0:
        raise ValueError("c_cut must be positive")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if y.ndim == 1:
        y = y[:, None]
    if x.ndim != 2 or y.ndim != 2 or x.shape[1] != y.shape[1]:
        raise ValueError(
            f"point dimensions do not match: {x.shape} vs {y.shape}"
        )
    diff = x[:, None, :] - y[None, :, :]
    sq = np.einsum("ijk,ijk->ij", diff, diff)
    dist = np.sqrt(sq)
    entries = np.where(dist <= c_cut, sq, np.inf)
    return CostMatrix(entries)


def grid_truncated_cost(n: int, c_cut: float) -> CostMatrix:
    """Truncated squared cost on the shared grid ``unit_grid(n)``.

    Same contract as ``truncated_sq_cost`` on that grid, but distances are
    formed from integer index differences so the cutoff comparison is exact
    at on-grid distances (e.g. |i-j|/n == c_cut).
    """
    if not c_cut > 0:
        raise ValueError("c_cut must be positive")
    idx = np.arange(n)
    dist = np.abs(idx[:, None] - idx[None, :]) / float(n)
    entries = np.where(dist <= c_cut, dist * dist, np.inf)
    return CostMatrix(entries)


def gibbs_kernel(C, epsilon: float) -> np.ndarray:
    """K = exp(-C/eps); exactly zero on the blocked pattern.

    Finite entries may still underflow to zero when C/eps is very large;
    that is the hazard the log-domain solvers exist for.
    """
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    C = as_cost(C)
    # exp(-inf) == 0.0 bit-exactly, so the pattern maps to hard zeros.
    return np.exp(-C.entries / epsilon)


def kl_divergence(P, Q) -> float:
    """KL(P|Q) = sum P log(P/Q) - P + Q, with 0 log 0 = 0.

    Returns +inf when P puts mass where Q is zero (infeasible reference),
    which is a signal rather than an error.
    """
    P = np.asarray(P, dtype=float)
    Q = np.asarray(Q, dtype=float)
    if P.shape != Q.shape:
        raise ValueError(f"shape mismatch: {P.shape} vs {Q.shape}")
    pos = P > 0
    if np.any(Q[pos] == 0):
        return float("inf")
    terms = np.zeros_like(P)
    terms[pos] = P[pos] * np.log(P[pos] / Q[pos])
    return float(terms.sum() - P.sum() + Q.sum())


def entropy(P) -> float:
    """H(P) = -sum P (log P - 1), with 0 log 0 = 0."""
    P = np.asarray(P, dtype=float)
    pos = P > 0
    terms = np.zeros_like(P)
    terms[pos] = P[pos] * (np.log(P[pos]) - 1.0)
    return float(-terms.sum())


def marginals(P):
    """Row and column sums of a plan."""
    M = P.matrix if isinstance(P, TransportPlan) else np.asarray(P, dtype=float)
    return M.sum(axis=1), M.sum(axis=0)


def discretized_gaussian(center: float, width: float, floor: float, n: int,
                         scale: float = 1.0) -> Marginal:
    """Floored Gaussian bump on ``unit_grid(n)``, normalized to total ``scale``.

    weights_i proportional to exp(-(x_i - center)^2 / width^2) + floor; the
    normalization constant is computed by direct summation.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if not width > 0:
        raise ValueError("width must be positive")
    x = unit_grid(n)
    raw = np.exp(-((x - center) ** 2) / width**2) + floor
    return Marginal(scale * raw / raw.sum(), support=x)


def discretized_indicator(lo: float, hi: float, floor: float, n: int,
                          scale: float = 1.0) -> Marginal:
    """Floored indicator of [lo, hi] on ``unit_grid(n)``, total mass ``scale``."""
    if not hi > lo:
        raise ValueError("need hi > lo")
    x = unit_grid(n)
    raw = np.where((x >= lo) & (x <= hi), 1.0, 0.0) + floor
    if raw.sum() == 0:
        raise ValueError("indicator support misses the grid and floor is zero")
    return Marginal(scale * raw / raw.sum(), support=x)
