"""Outer penalty loop, rank-one extraction and solution scoring."""

from dataclasses import dataclass, field
import math
import time
from typing import List, Optional

import numpy as np

from .dc_core import InnerConfig, solve_inner
from .linalg import frobenius_norm, leading_singular_triple, spectral_norm
from .model import lipschitz_estimate, objective_at_binary

__all__ = [
    "PenaltyConfig",
    "SolveReport",
    "default_m",
    "init_V0",
    "rank_one_gap",
    "extract_rank_one",
    "infeasibility",
    "round_binary",
    "theorem2_bound_trace",
    "alpha_f",
    "solve",
]


def default_m(p):
    """Factor rank ``max(min(50, round(p / 2)), 2)`` with halves rounded up."""
    return max(min(50, math.floor(p / 2 + 0.5)), 2)


@dataclass(frozen=True)
class PenaltyConfig:
    rho0: float = 1e-3
    sigma: float = 1.005
    eps: float = 1e-8
    rho_max: float = 1e6
    l_max: int = 10_000
    m: Optional[int] = None
    seed: int = 0
    beta_mode: str = "nesterov"
    time_limit: Optional[float] = None
    # fixed majorization constant is this multiple of ||C|| for linear objectives
    L_factor: float = 2.001
    inner: InnerConfig = field(default_factory=InnerConfig)
    record_inner_traces: bool = False
    l_star: int = 0
    r_star: Optional[int] = None

    def __post_init__(self):
        if not self.rho0 > 0:
            raise ValueError("rho0 must be positive")
        if not self.sigma > 1:
            raise ValueError("sigma must exceed 1")
        if not 0 < self.eps < 1:
            raise ValueError("eps must lie in (0, 1)")
        if not self.rho_max >= self.rho0:
            raise ValueError("rho_max must be at least rho0")
        if self.l_max < 0:
            raise ValueError("l_max must be nonnegative")
        if self.m is not None and self.m < 2:
            raise ValueError("m must be at least 2")
        if self.beta_mode not in ("nesterov", "zero"):
            raise ValueError(f"unknown beta_mode {self.beta_mode!r}")
        if not self.L_factor > 2:
            raise ValueError("L_factor must exceed 2 so that L stays above the Lipschitz constant")
        if self.time_limit is not None and not self.time_limit > 0:
            raise ValueError("time_limit must be positive")


@dataclass
class SolveReport:
    x: np.ndarray
    x_binary: np.ndarray
    obj: float
    obj_extracted: float
    f_final: float
    gap: Optional[float]
    infeas_inf: float
    infeas_two: float
    rank_one_gap: float
    outer_iters: int
    inner_iters: int
    rho_final: float
    rho_trace: np.ndarray
    specnorm_trace: np.ndarray
    bound_trace_term: float
    bound_rigorous: bool
    extraction_ratio: float
    wall_time: float
    exited_normally: bool
    exit_reason: str
    m: int
    p: int
    seed: int
    beta_mode: str
    inner_traces: List[list] = field(default_factory=list, repr=False)

    def solution(self, inst):
        """Decision variables of the original problem (signs or 0/1 values)."""
        return inst.to_binary(self.x_binary)


def init_V0(m, p, seed):
    """Standard-normal ``m x p`` matrix with columns scaled to unit norm."""
    if m < 2 or p < 1:
        raise ValueError("need m >= 2 and p >= 1")
    rng = np.random.default_rng(seed)
    V = rng.standard_normal((m, p))
    norms = np.linalg.norm(V, axis=0)
    zero = norms == 0.0
    V /= np.where(zero, 1.0, norms)
    if np.any(zero):
        V[:, zero] = 0.0
        V[0, zero] = 1.0
    return V


def rank_one_gap(V):
    """``||V||_F^2 - ||V||^2``, using ``||V||_F^2 = p`` on the manifold."""
    sigma = leading_singular_triple(V).sigma
    return max(V.shape[1] - sigma * sigma, 0.0)


def extract_rank_one(V, homogenized=False):
    """Rank-one vector ``sigma_1(V) p_1``; with ``homogenized`` its first entry is made nonnegative."""
    triple = leading_singular_triple(V)
    x = triple.sigma * triple.right
    if homogenized and x[0] < 0:
        x = -x
    return x


def infeasibility(x):
    """Return ``(max_j | |x_j| - 1 |, ||x o x - e||_2)``."""
    x = np.asarray(x, dtype=np.float64)
    if x.size == 0:
        return 0.0, 0.0
    return float(np.max(np.abs(np.abs(x) - 1.0))), float(np.linalg.norm(x * x - 1.0))


def round_binary(x, homogenized=False):
    """Componentwise sign with ``sign(0) = +1``; homogenized vectors are flipped to ``x[0] >= 0`` first."""
    x = np.asarray(x, dtype=np.float64)
    if homogenized and x.size and x[0] < 0:
        x = -x
    return np.where(x >= 0, 1.0, -1.0)


def theorem2_bound_trace(rho_trace, specnorm_trace, l_star, r_star, alpha, eps, p):
    """Objective-bound diagnostic of the penalty path.

    ``rho_trace[j]`` is the penalty of outer solve ``j`` and
    ``specnorm_trace[j]`` is ``||V^j||`` (so it has one more entry, starting
    at the initial point). Returns

        rho_lf ||V^lf||^2 - rho_l* p / r* + sum_{j=l*}^{lf-1} (rho_j - rho_{j+1}) ||V^{j+1}||^2 + alpha eps.

    The penalty after the last solve is never used, so ``rho_lf`` is taken
    equal to the last entry; the sum telescopes identically for any choice.
    """
    rho = np.asarray(rho_trace, dtype=np.float64)
    s = np.asarray(specnorm_trace, dtype=np.float64)
    lf = rho.shape[0]
    if s.shape[0] != lf + 1:
        raise ValueError("specnorm_trace must have exactly one more entry than rho_trace")
    if not 0 <= l_star <= lf:
        raise ValueError(f"l_star must lie in [0, {lf}]")
    if lf == 0:
        raise ValueError("empty penalty path")
    rho_ext = np.append(rho, rho[-1])
    j = np.arange(l_star, lf)
    middle = float(np.sum((rho_ext[j] - rho_ext[j + 1]) * s[j + 1] ** 2))
    return float(rho_ext[lf] * s[lf] ** 2 - rho_ext[l_star] * p / r_star + middle + alpha * eps)


def alpha_f(obj):
    """Lipschitz-type constant of ``f`` used by the bound diagnostic.

    ``||C||_F`` for a linear objective; for a two-factor product the bound
    ``p (||C1|| ||C2||_F + ||C1||_F ||C2||)`` on the gradient norm over the
    feasible set. Neither is claimed to be tight.
    """
    if obj.kind == "linear":
        return frobenius_norm(obj.C)
    C1, C2 = obj.factors[:2]
    return obj.p * (spectral_norm(C1) * frobenius_norm(C2) + frobenius_norm(C1) * spectral_norm(C2))


def _initial_L_guess(obj, V):
    # local curvature of f~ ignoring the cross term; the search doubles from here
    vals, _ = obj.inner_products(V)
    C1, C2 = obj.factors[:2]
    guess = 2.0 * (abs(vals[1]) * spectral_norm(C1) + abs(vals[0]) * spectral_norm(C2))
    return max(guess, 1e-8)


def solve(obj, inst, cfg=PenaltyConfig()):
    """Run the penalty path from a random start and score the rounded solution."""
    start = time.perf_counter()
    deadline = None if cfg.time_limit is None else time.monotonic() + cfg.time_limit
    p = obj.p
    m = cfg.m if cfg.m is not None else default_m(p)
    inner_cfg = cfg.inner
    if inner_cfg.beta_mode != cfg.beta_mode or inner_cfg.record_trace != cfg.record_inner_traces:
        inner_cfg = InnerConfig(**{**inner_cfg.__dict__, "beta_mode": cfg.beta_mode,
                                   "record_trace": cfg.record_inner_traces})

    lip = lipschitz_estimate(obj, p)
    eta = obj.eta
    V = init_V0(m, p, cfg.seed)
    if lip.exact:
        L_fixed = 0.5 * cfg.L_factor * lip.L_tilde
        L_kw = dict(L=L_fixed, L_lower=L_fixed,
                    gamma_const=0.5 * (L_fixed - lip.L_tilde) / (2.0 * L_fixed))
        L_search = None
    else:
        L_search = _initial_L_guess(obj, V)
        L_kw = {}

    rho = cfg.rho0
    rho_trace = []
    spec_trace = [leading_singular_triple(V).sigma]
    inner_traces = []
    warm = None
    inner_iters = 0
    exit_reason = "l_max"
    exited_normally = False
    gap = max(p - spec_trace[0] ** 2, 0.0)
    for _ in range(cfg.l_max + 1):
        if deadline is not None and time.monotonic() > deadline:
            exit_reason = "time_limit"
            break
        if L_search is not None:
            L_kw = dict(L_init=L_search, L_max=lip.L_tilde)
        res = solve_inner(obj, V, rho, inner_cfg, eta=eta, deadline=deadline,
                          warm=warm, **L_kw)
        warm = res.warm_start()
        if L_search is not None:
            L_search = max(0.5 * res.L, 1e-8)
        V = res.V
        inner_iters += res.iterations
        rho_trace.append(rho)
        spec_trace.append(res.specnorm)
        if cfg.record_inner_traces:
            inner_traces.append(res.trace)
        gap = max(p - res.specnorm ** 2, 0.0)
        if gap <= cfg.eps:
            exit_reason = "normal"
            exited_normally = True
            break
        if res.timed_out:
            exit_reason = "time_limit"
            break
        rho = min(cfg.sigma * rho, cfg.rho_max)

    triple = leading_singular_triple(V)
    x = triple.sigma * triple.right
    if inst.homogenized and x[0] < 0:
        x = -x
    x_bin = round_binary(x, inst.homogenized)
    infeas_inf, infeas_two = infeasibility(x)
    obj_rounded = objective_at_binary(inst, x_bin)
    obj_extracted = -obj.value_at(x) + inst.objective_offset
    gap_rel = None
    if inst.known_best is not None and inst.known_best != 0:
        gap_rel = (obj_rounded - inst.known_best) / abs(inst.known_best)
    r_star = cfg.r_star if cfg.r_star is not None else m
    bound = math.nan
    if rho_trace:
        l_star = min(cfg.l_star, len(rho_trace))
        bound = theorem2_bound_trace(rho_trace, spec_trace, l_star, r_star,
                                     alpha_f(obj), cfg.eps, p)

    return SolveReport(
        x=x, x_binary=x_bin, obj=obj_rounded, obj_extracted=obj_extracted,
        f_final=obj.value(V), gap=gap_rel, infeas_inf=infeas_inf, infeas_two=infeas_two,
        rank_one_gap=gap, outer_iters=len(rho_trace), inner_iters=inner_iters,
        rho_final=rho_trace[-1] if rho_trace else cfg.rho0,
        rho_trace=np.asarray(rho_trace), specnorm_trace=np.asarray(spec_trace),
        bound_trace_term=bound, bound_rigorous=cfg.beta_mode == "zero",
        extraction_ratio=triple.ratio, wall_time=time.perf_counter() - start,
        exited_normally=exited_normally, exit_reason=exit_reason, m=m, p=p,
        seed=cfg.seed, beta_mode=cfg.beta_mode, inner_traces=inner_traces)
