"""Majorization-minimization with extrapolation for the penalized factorized problem.

For a fixed penalty ``rho`` the inner problem is

    min  f~(V) + rho * (||V||_F^2 - ||V||^2)   over V with unit-norm columns,

where ``||V||`` is the spectral norm. Each step linearizes the concave
``-rho ||V||^2`` through a rank-one subgradient ``Gamma``, majorizes ``f~``
with a quadratic of curvature ``L`` around an extrapolated point ``U``, and
solves the resulting problem in closed form by normalizing columns.
"""

from dataclasses import dataclass, field
import math
import time
from typing import List, Optional

import numpy as np

from .linalg import leading_singular_triple

__all__ = [
    "InnerConfig",
    "InnerTracePoint",
    "InnerResult",
    "LineSearchError",
    "column_norm_error",
    "choose_gamma",
    "mm_step",
    "nesterov_beta",
    "search_L",
    "inner_residual",
    "conjugate_neg_psi",
    "potential_theta",
    "solve_inner",
]

MANIFOLD_TOL = 1e-12
MAX_DOUBLINGS = 60


class LineSearchError(RuntimeError):
    """Raised when the descent-lemma search for ``L`` does not terminate."""


@dataclass(frozen=True)
class InnerConfig:
    """Loop controls for one inner solve.

    ``beta_mode`` is ``"nesterov"`` (uncapped accelerated extrapolation) or
    ``"zero"`` (plain MM, the setting under which the descent properties are
    guaranteed). ``k_max`` drops to ``kmax_rough`` while the incoming rank-one
    gap exceeds ``gap_switch``.
    """

    beta_mode: str = "nesterov"
    tau0: float = 0.005
    tau_min: float = 1e-5
    tau_decay: float = 0.995
    kmax_rough: int = 3
    kmax_fine: int = 3000
    gap_switch: float = 1.0
    record_trace: bool = False

    def __post_init__(self):
        if self.beta_mode not in ("nesterov", "zero"):
            raise ValueError(f"beta_mode must be 'nesterov' or 'zero', got {self.beta_mode!r}")
        if not self.tau_min > 0 or not self.tau0 >= self.tau_min:
            raise ValueError("need tau0 >= tau_min > 0")


@dataclass
class InnerTracePoint:
    """Diagnostics at iterate ``V^k`` of one inner solve.

    ``theta`` is the potential at ``(V^k, Gamma^{k-1}, V^{k-1})``; at ``k = 0``
    it is taken at ``(V^0, Gamma^0, V^0)``, which upper-bounds the first
    step's potential. ``residual`` is ``nan`` at ``k = 0``.
    """

    k: int
    f: float
    specnorm_sq: float
    merit: float
    residual: float
    theta: float
    L: float
    beta: float


@dataclass
class InnerResult:
    V: np.ndarray
    iterations: int
    L: float
    residual: float
    specnorm: float
    converged: bool
    timed_out: bool = False
    trace: List[InnerTracePoint] = field(default_factory=list)
    # quantities at the final V, reusable as the warm start of the next solve
    triple: Optional[object] = field(default=None, repr=False)
    f: float = math.nan
    grad: Optional[np.ndarray] = field(default=None, repr=False)

    def warm_start(self):
        return self.V, self.triple, self.f, self.grad


def column_norm_error(V):
    """Largest deviation of a column norm from one."""
    return float(np.max(np.abs(np.sqrt(np.einsum("ij,ij->j", V, V)) - 1.0)))


def _gamma_from_triple(V, triple):
    r = triple.right
    return -2.0 * np.outer(V @ r, r)


def choose_gamma(V):
    """Rank-one subgradient ``-2 V p1 p1^T`` of ``-||V||^2`` at ``V``.

    ``p1`` is a leading right singular vector of ``V``; any choice within a
    degenerate leading space is a valid subgradient.
    """
    V = np.asarray(V, dtype=np.float64)
    return _gamma_from_triple(V, leading_singular_triple(V))


def mm_step(U, Gamma, grad_U, L, rho):
    """Exact minimizer of the majorized subproblem over the oblique manifold.

    On the manifold the subproblem reduces to minimizing
    ``<grad_U + rho Gamma - L U, V>``, so each column of the answer is the
    normalized column of ``G = (L U - rho Gamma - grad_U) / (L + 2 rho)``;
    a zero column is replaced by the first unit vector.
    """
    G = (L * U - rho * Gamma - grad_U) / (L + 2.0 * rho)
    norms = np.sqrt(np.einsum("ij,ij->j", G, G))
    zero = norms == 0.0
    V = G / np.where(zero, 1.0, norms)
    if np.any(zero):
        V[:, zero] = 0.0
        V[0, zero] = 1.0
    return V


def nesterov_beta(t):
    """One step of the accelerated sequence: returns ``(beta, t_next)``."""
    if t < 1:
        raise ValueError("extrapolation scalar t must be at least 1")
    t_next = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
    return (t - 1.0) / t_next, t_next


def _descent_ok(f_next, f_U, grad_U, D, L):
    rhs = f_U + float(np.vdot(grad_U, D)) + 0.5 * L * float(np.vdot(D, D))
    return f_next <= rhs + 1e-12 * (1.0 + abs(f_U))


def _line_search(obj, U, rho, Gamma, L_init, f_U, grad_U, L_max=None):
    L = float(L_init)
    if not L > 0:
        raise ValueError("L_init must be positive")
    for _ in range(MAX_DOUBLINGS + 1):
        capped = L_max is not None and L >= L_max
        if capped:
            L = float(L_max)
        V_next = mm_step(U, Gamma, grad_U, L, rho)
        f_next, g_next = obj.value_grad(V_next)
        if capped or _descent_ok(f_next, f_U, grad_U, V_next - U, L):
            return L, V_next, f_next, g_next
        L *= 2.0
    raise LineSearchError(
        f"descent-lemma search failed after {MAX_DOUBLINGS} doublings (L={L:.3e}); "
        "the gradient oracle is probably inconsistent with the objective")


def search_L(obj, U, rho, Gamma, L_init, L_max=None):
    """Smallest ``L_init * 2**j`` passing the descent-lemma test at ``U``.

    Returns ``(L, V_next)`` with ``V_next = mm_step(U, Gamma, grad f~(U), L, rho)``.
    ``L_max`` optionally caps the search at a known global bound, which is
    accepted without testing.
    """
    f_U, grad_U = obj.value_grad(U)
    L, V_next, _, _ = _line_search(obj, U, rho, Gamma, L_init, f_U, grad_U, L_max)
    return L, V_next


def inner_residual(V_next, U, Gamma_next, Gamma, grad_next, grad_U, L, rho):
    """Frobenius norm of the stationarity defect of the step ``U -> V_next``."""
    R = grad_next - grad_U - L * (V_next - U) + rho * (Gamma_next - Gamma)
    return float(np.linalg.norm(R))


def conjugate_neg_psi(Gamma):
    """Conjugate of ``V -> ||V||^2`` at ``Gamma``: a quarter of the squared nuclear norm."""
    Gamma = np.asarray(Gamma, dtype=np.float64)
    if not np.any(Gamma):
        return 0.0
    # singular values directly: square roots of Gram eigenvalues would turn
    # round-off noise of size eps * s1^2 into spurious terms of size sqrt(eps) * s1
    svals = np.linalg.svd(Gamma, compute_uv=False)
    return 0.25 * float(svals.sum()) ** 2


def potential_theta(obj, V, Gamma, U, rho, gamma_const, L_lower, f_V=None):
    """Lyapunov potential of the inner method; ``inf`` off the manifold."""
    V = np.asarray(V, dtype=np.float64)
    if column_norm_error(V) > 1e-10:
        return math.inf
    if f_V is None:
        f_V = obj.value(V)
    D = V - U
    return (f_V + rho * float(np.vdot(V, V)) + rho * float(np.vdot(Gamma, V))
            + rho * conjugate_neg_psi(-Gamma)
            + 0.5 * gamma_const * L_lower * float(np.vdot(D, D)))


def _theta_fast(f_V, V, Gamma, U, rho, sigma_prev_sq, gamma_L):
    # Gamma is rank one with nuclear norm 2 * sigma_1(previous iterate).
    D = V - U
    return (f_V + rho * float(np.vdot(V, V)) + rho * float(np.vdot(Gamma, V))
            + rho * sigma_prev_sq + 0.5 * gamma_L * float(np.vdot(D, D)))


def solve_inner(obj, V_start, rho, cfg=InnerConfig(), *, L=None, L_init=None,
                L_max=None, eta=None, gamma_const=None, L_lower=None,
                deadline=None, warm=None):
    """Approximate stationary point of the penalized problem at ``rho``.

    Exactly one of ``L`` (fixed majorization constant) or ``L_init`` (start
    of a per-step descent-lemma search, optionally capped by ``L_max``) must
    be given. ``eta`` scales the residual test and defaults to
    ``obj.eta``. ``gamma_const`` and ``L_lower`` only enter the recorded
    potential values. ``warm`` is the tuple returned by
    :meth:`InnerResult.warm_start` of a previous solve ending at ``V_start``;
    it skips recomputing the singular triple and gradient there.
    """
    if (L is None) == (L_init is None):
        raise ValueError("give exactly one of L (fixed) or L_init (line search)")
    if not rho > 0:
        raise ValueError("rho must be positive")
    if warm is not None:
        V, triple, f_V, grad_V = warm
    else:
        V = np.array(V_start, dtype=np.float64)
        if column_norm_error(V) > 1e-10:
            raise ValueError("starting point does not have unit-norm columns")
        triple = leading_singular_triple(V)
        f_V, grad_V = obj.value_grad(V)
    p = V.shape[1]
    eta = obj.eta if eta is None else eta
    scale = max(1.0, eta)
    L_cur = float(L if L is not None else L_init)
    if L_lower is None:
        L_lower = L_cur
    if gamma_const is None:
        gamma_const = 0.0
    gamma_L = gamma_const * L_lower

    Gamma = _gamma_from_triple(V, triple)
    sig_sq = triple.sigma ** 2
    k_max = cfg.kmax_rough if p - sig_sq > cfg.gap_switch else cfg.kmax_fine

    V_prev = V
    t = 1.0
    tau = cfg.tau0
    trace = []
    if cfg.record_trace:
        merit = f_V - rho * sig_sq
        trace.append(InnerTracePoint(0, f_V, sig_sq, merit, math.nan,
                                     merit + rho * p, L_cur, 0.0))

    residual = math.inf
    converged = False
    timed_out = False
    k = 0
    while k < k_max:
        if deadline is not None and time.monotonic() > deadline:
            timed_out = True
            break
        if cfg.beta_mode == "nesterov":
            beta, t = nesterov_beta(t)
        else:
            beta = 0.0
        if beta != 0.0:
            U = V + beta * (V - V_prev)
            f_U, grad_U = obj.value_grad(U)
        else:
            U, f_U, grad_U = V, f_V, grad_V

        if L is not None:
            V_next = mm_step(U, Gamma, grad_U, L_cur, rho)
            f_next, grad_next = obj.value_grad(V_next)
        else:
            L_cur, V_next, f_next, grad_next = _line_search(
                obj, U, rho, Gamma, L_cur, f_U, grad_U, L_max)

        triple_next = leading_singular_triple(V_next)
        Gamma_next = _gamma_from_triple(V_next, triple_next)
        residual = inner_residual(V_next, U, Gamma_next, Gamma, grad_next, grad_U, L_cur, rho)
        sig_sq_next = triple_next.sigma ** 2
        if cfg.record_trace:
            theta = _theta_fast(f_next, V_next, Gamma, V, rho, sig_sq, gamma_L)
            trace.append(InnerTracePoint(k + 1, f_next, sig_sq_next,
                                         f_next - rho * sig_sq_next, residual,
                                         theta, L_cur, beta))

        V_prev, V = V, V_next
        f_V, grad_V = f_next, grad_next
        triple, Gamma, sig_sq = triple_next, Gamma_next, sig_sq_next
        k += 1
        if residual <= tau * scale:
            converged = True
            break
        tau = max(cfg.tau_min, cfg.tau_decay * tau)

    return InnerResult(V=V, iterations=k, L=L_cur, residual=residual,
                       specnorm=math.sqrt(sig_sq), converged=converged,
                       timed_out=timed_out, trace=trace,
                       triple=triple, f=f_V, grad=grad_V)
