"""Independent checks: exhaustive enumeration, finite differences and the
structural identities the inner method relies on."""

from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from .dc_core import choose_gamma
from .linalg import leading_singular_triple

__all__ = [
    "BruteForceResult",
    "brute_force",
    "fd_gradient_check",
    "GammaCheck",
    "check_gamma",
    "DescentCheck",
    "check_descent",
    "SuiteResult",
    "random_ubqp_matrix",
    "random_maxcut_matrix",
    "run_tiny_exact",
    "run_invariants",
    "run_gradcheck",
]

MAX_BRUTE_FORCE_VARS = 24
_CHUNK_BITS = 16


@dataclass
class BruteForceResult:
    """Exact optimum of a small instance.

    ``argmax`` holds the free sign variables (``n_binary`` of them) of the
    lexicographically smallest maximizer, with ``-1 < +1``; ``x`` is the
    full sign vector including the homogenization coordinate when present.
    """

    opt_value: float
    argmax: np.ndarray
    x: np.ndarray
    evaluations: int


def _sign_block(start, count, nbits):
    k = np.arange(start, start + count, dtype=np.int64)[:, None]
    shifts = np.arange(nbits - 1, -1, -1, dtype=np.int64)[None, :]
    return ((k >> shifts) & 1) * 2.0 - 1.0


def brute_force(inst):
    """Enumerate every assignment of an instance with at most 24 binary variables."""
    nb = inst.n_binary
    if nb > MAX_BRUTE_FORCE_VARS:
        raise ValueError(f"{nb} binary variables is too many to enumerate "
                         f"(limit {MAX_BRUTE_FORCE_VARS})")
    obj = inst.objective
    mats = [Ci.toarray() for Ci in obj.factors]
    total = 1 << nb
    chunk = 1 << min(nb, _CHUNK_BITS)
    best_val = -np.inf
    best_x = None
    for start in range(0, total, chunk):
        S = _sign_block(start, min(chunk, total - start), nb)
        X = np.hstack([np.ones((S.shape[0], 1)), S]) if inst.homogenized else S
        terms = [np.einsum("ij,ij->i", X @ M, X) for M in mats]
        vals = -np.prod(terms, axis=0) + inst.objective_offset
        t = int(np.argmax(vals))
        # strict improvement keeps the earliest (lexicographically smallest) maximizer
        if vals[t] > best_val:
            best_val = float(vals[t])
            best_x = X[t].copy()
    free = best_x[1:] if inst.homogenized else best_x
    return BruteForceResult(opt_value=best_val, argmax=free.copy(), x=best_x,
                            evaluations=total)


def fd_gradient_check(obj, V, step=1e-6):
    """Largest ``|fd - grad| / (1 + |grad|)`` over all entries, by central differences."""
    if not step > 0:
        raise ValueError("step must be positive")
    V = np.array(V, dtype=np.float64)
    G = obj.grad(V)
    worst = 0.0
    for idx in np.ndindex(*V.shape):
        old = V[idx]
        V[idx] = old + step
        fp = obj.value(V)
        V[idx] = old - step
        fm = obj.value(V)
        V[idx] = old
        fd = (fp - fm) / (2.0 * step)
        worst = max(worst, abs(fd - G[idx]) / (1.0 + abs(G[idx])))
    return worst


@dataclass
class GammaCheck:
    passed: bool
    inner_rel_err: float
    fenchel_young_rel_err: float
    rank_ratio: float
    failures: List[str] = field(default_factory=list)


def check_gamma(V, tol=1e-9, rank_tol=1e-8):
    """Verify the subgradient identities of ``Gamma = choose_gamma(V)``.

    Checks ``<Gamma, V> = -2 ||V||^2``, that ``Gamma`` has rank one, and the
    Fenchel-Young equality ``-||V||^2 - ||Gamma||_*^2 / 4 = <Gamma, V>``.
    Failures are reported, never raised.
    """
    V = np.asarray(V, dtype=np.float64)
    Gamma = choose_gamma(V)
    sig2 = leading_singular_triple(V).sigma ** 2
    inner = float(np.vdot(Gamma, V))
    svals = np.linalg.svd(Gamma, compute_uv=False)
    conj = 0.25 * float(svals.sum()) ** 2
    scale = max(1.0, 2.0 * sig2)
    inner_err = abs(inner + 2.0 * sig2) / scale
    fy_err = abs((-sig2 - conj) - inner) / scale
    ratio = float(svals[1] / svals[0]) if svals.size > 1 and svals[0] > 0 else 0.0
    failures = []
    if inner_err > tol:
        failures.append(f"<Gamma,V> = {inner:.17g}, expected {-2 * sig2:.17g}")
    if fy_err > tol:
        failures.append(f"Fenchel-Young defect {fy_err:.3e}")
    if ratio > rank_tol:
        failures.append(f"Gamma not rank one: sigma2/sigma1 = {ratio:.3e}")
    return GammaCheck(not failures, inner_err, fy_err, ratio, failures)


@dataclass
class DescentCheck:
    passed: bool
    steps_checked: int
    first_violation: Optional[Tuple[int, str]] = None
    detail: str = ""


def check_descent(trace, rho=None, tol=1e-8):
    """Check that merit and potential never increase along an inner trace.

    Each consecutive pair must satisfy
    ``value[k+1] <= value[k] + tol * (1 + |value[k]|)``. Only meaningful for
    traces produced without extrapolation and with ``L`` above the Lipschitz
    constant. ``rho`` is accepted for symmetry with the trace producer and
    is not needed, since the trace stores penalized values directly.
    """
    for k in range(1, len(trace)):
        prev, cur = trace[k - 1], trace[k]
        for name in ("merit", "theta"):
            a, b = getattr(prev, name), getattr(cur, name)
            if b > a + tol * (1.0 + abs(a)):
                return DescentCheck(False, k, (cur.k, name),
                                    f"{name} rose from {a:.17g} to {b:.17g} at k={cur.k}")
    return DescentCheck(True, max(len(trace) - 1, 0))


# -- verification suites ----------------------------------------------------

@dataclass
class SuiteResult:
    """Outcome of a verification battery; ``lines`` is a per-case summary."""

    name: str
    passed: bool
    lines: List[str] = field(default_factory=list)
    stats: dict = field(default_factory=dict)


def random_ubqp_matrix(rng, n, low=-5.0, high=5.0):
    """Symmetric matrix with uniform upper-triangle entries mirrored below."""
    U = rng.uniform(low, high, (n, n))
    return np.triu(U) + np.triu(U, 1).T


def random_maxcut_matrix(rng, n, density=0.5):
    """Symmetric random graph with weights in {-1, 1} and zero diagonal."""
    mask = np.triu(rng.random((n, n)) < density, 1)
    W = np.where(mask, rng.choice([-1.0, 1.0], (n, n)), 0.0)
    return W + W.T


def run_tiny_exact(trials=30, seed=1, solver_seed=0, required=None, time_bar=1.0):
    """Solve random ubqp instances with ``n <= 12`` and compare against enumeration.

    A case fails outright if the rounded point is not binary-feasible, beats
    the exact optimum, or the solve takes longer than ``time_bar`` seconds. A
    merely suboptimal case is listed but only counts against ``required``
    (default: 90% of ``trials``, rounded up). ``stats["reports"]`` keeps the
    ``(SolveReport, optimum)`` pair of every case.
    """
    from .driver import PenaltyConfig, solve
    from .model import build_ubqp

    if required is None:
        required = -(-9 * trials // 10)
    rng = np.random.default_rng(seed)
    lines, hits, hard_fail, worst_time = [], 0, 0, 0.0
    reports = []
    for t in range(trials):
        n = int(rng.integers(2, 13))
        A = random_ubqp_matrix(rng, n)
        obj, inst = build_ubqp(A, name=f"tiny-{t}")
        rep = solve(obj, inst, PenaltyConfig(seed=solver_seed))
        best = brute_force(inst).opt_value
        reports.append((rep, best))
        z = rep.solution(inst)
        feasible = bool(np.all((z == 0) | (z == 1))) and z.shape == (n,)
        exact = abs(rep.obj - best) <= 1e-6 * (1.0 + abs(best))
        over = rep.obj > best + 1e-6 * (1.0 + abs(best))
        slow = rep.wall_time >= time_bar
        worst_time = max(worst_time, rep.wall_time)
        hits += exact
        status = "ok" if exact else "suboptimal"
        if not feasible or over or slow:
            hard_fail += 1
            status = "FAIL" + (" infeasible" if not feasible else "") + \
                     (" above-optimum" if over else "") + (" slow" if slow else "")
        lines.append(f"case {t:2d} n={n:2d} obj={rep.obj:.6f} opt={best:.6f} "
                     f"time={rep.wall_time:.3f}s infeas2={rep.infeas_two:.1e} {status}")
    passed = hard_fail == 0 and hits >= required
    lines.append(f"exact {hits}/{trials} (required {required}), hard failures {hard_fail}, "
                 f"slowest {worst_time:.3f}s")
    return SuiteResult("tiny-exact", passed, lines,
                       dict(hits=hits, trials=trials, hard_failures=hard_fail,
                            max_time=worst_time, reports=reports))


def run_invariants(trials=20, seed=2, gamma_trials=100, l_max=10_000):
    """Plain-MM descent checks on random linear instances plus Gamma certificates.

    Each descent case runs the penalty path with zero extrapolation and the
    fixed ``L`` above the Lipschitz constant, recording every inner trace of
    the whole penalty path. The 2-node max-cut is always included as case 0.
    """
    from .driver import PenaltyConfig, solve
    from .model import build_maxcut, build_ubqp

    rng = np.random.default_rng(seed)
    lines, failures = [], 0
    cfg = PenaltyConfig(beta_mode="zero", record_inner_traces=True, l_max=l_max)
    cases = [("two-node", build_maxcut(np.array([[0.0, 1.0], [1.0, 0.0]])))]
    for t in range(1, trials):
        n = int(rng.integers(2, 51))
        if t % 2:
            cases.append((f"ubqp-{t}", build_ubqp(random_ubqp_matrix(rng, n))))
        else:
            cases.append((f"maxcut-{t}", build_maxcut(random_maxcut_matrix(rng, n))))
    steps = 0
    for name, (obj, inst) in cases:
        rep = solve(obj, inst, cfg)
        bad = None
        for j, trace in enumerate(rep.inner_traces):
            chk = check_descent(trace)
            steps += chk.steps_checked
            if not chk.passed:
                bad = f"outer {j}: {chk.detail}"
                break
        if bad:
            failures += 1
        lines.append(f"descent {name:12s} p={inst.p:2d} outer={rep.outer_iters:3d} "
                     + ("FAIL " + bad if bad else "ok"))
    gamma_fail = 0
    for t in range(gamma_trials):
        m = int(rng.integers(2, 11))
        p = int(rng.integers(1, 41))
        V = rng.standard_normal((m, p))
        V /= np.linalg.norm(V, axis=0)
        chk = check_gamma(V)
        if not chk.passed:
            gamma_fail += 1
            lines.append(f"gamma case {t} m={m} p={p} FAIL " + "; ".join(chk.failures))
    lines.append(f"descent: {len(cases) - failures}/{len(cases)} cases, {steps} steps checked; "
                 f"gamma: {gamma_trials - gamma_fail}/{gamma_trials} pass")
    return SuiteResult("invariants", failures == 0 and gamma_fail == 0, lines,
                       dict(descent_failures=failures, gamma_failures=gamma_fail,
                            steps=steps))


def run_gradcheck(trials=20, seed=3, m=4, p=10, step=1e-6, bar=1e-5):
    """Finite-difference battery over linear and two-factor product objectives."""
    from .model import LinearObjective, ProductObjective

    rng = np.random.default_rng(seed)
    lines, worst = [], {}
    for kind in ("linear", "product"):
        worst[kind] = 0.0
        for _ in range(trials):
            if kind == "linear":
                obj = LinearObjective(random_ubqp_matrix(rng, p, -1.0, 1.0))
            else:
                obj = ProductObjective([random_ubqp_matrix(rng, p, -1.0, 1.0)
                                        for _ in range(2)])
            V = rng.standard_normal((m, p))
            V /= np.linalg.norm(V, axis=0)
            worst[kind] = max(worst[kind], fd_gradient_check(obj, V, step))
        ok = worst[kind] <= bar
        lines.append(f"{kind:8s} {trials} points, max rel err {worst[kind]:.2e} "
                     + ("ok" if ok else "FAIL"))
    return SuiteResult("gradcheck", all(v <= bar for v in worst.values()), lines, worst)
