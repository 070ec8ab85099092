"""Binary quadratic programs solved through a low-rank factorization with a
difference-of-convex exact penalty.

Typical use::

    from dcfac import build_maxcut, solve
    obj, inst = build_maxcut(W)
    report = solve(obj, inst)
    report.obj, report.solution(inst)
"""

from .dc_core import InnerConfig, InnerResult, InnerTracePoint, choose_gamma, mm_step, solve_inner
from .driver import PenaltyConfig, SolveReport, default_m, init_V0, solve
from .instances import (
    InstanceFormatError,
    gen_product_maxcut,
    gen_product_random,
    load_instance,
    parse_edgelist,
    parse_orlib,
    read_canonical,
    read_manifest,
    write_canonical,
)
from .linalg import leading_singular_triple, spectral_norm
from .model import (
    Instance,
    LinearObjective,
    ProductObjective,
    build_maxcut,
    build_product,
    build_ubqp,
    objective_at_binary,
)
from .oracle import brute_force, check_descent, check_gamma, fd_gradient_check

__version__ = "0.1.0"
