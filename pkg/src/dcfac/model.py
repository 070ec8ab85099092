"""Objective oracles and reformulations of binary programs.

Every supported problem is rewritten as minimizing ``f(X)`` over rank-one
matrices ``X = x x^T`` with ``x`` in ``{-1, 1}^p``. The solver only ever sees
``f~(V) = f(V^T V)`` and its gradient, provided by the objective classes
here. The reported objective of the original maximization problem is always
``-f(x x^T) + offset``.
"""

from dataclasses import dataclass, field
from math import prod
from typing import Optional

import numpy as np
import scipy.sparse as sp

from .linalg import as_sparse_sym, dense_times_sparse, frobenius_norm, spectral_norm

__all__ = [
    "LinearObjective",
    "ProductObjective",
    "LipschitzInfo",
    "Instance",
    "build_ubqp",
    "build_maxcut",
    "build_product",
    "f_value",
    "grad_ftilde",
    "lipschitz_estimate",
    "objective_at_binary",
]


# Below this size (or above this density) products use a dense copy of C.
_DENSE_MAX_DIM = 400
_DENSE_MIN_DENSITY = 0.25


def _product_operator(C):
    p = C.shape[0]
    if p <= _DENSE_MAX_DIM or C.nnz >= _DENSE_MIN_DENSITY * p * p:
        return C.toarray()
    return C


def _times(V, op):
    if isinstance(op, np.ndarray):
        return V @ op
    return dense_times_sparse(V, op)


def _check_cols(V, p):
    V = np.asarray(V, dtype=np.float64)
    if V.ndim != 2 or V.shape[1] != p:
        raise ValueError(f"expected a matrix with {p} columns, got shape {V.shape}")
    return V


class LinearObjective:
    """``f(X) = <C, X>`` for a sparse symmetric ``C``."""

    kind = "linear"

    def __init__(self, C):
        self.C = as_sparse_sym(C)
        self.p = self.C.shape[0]
        self._op = _product_operator(self.C)

    @property
    def factors(self):
        return (self.C,)

    def value_grad(self, V):
        """Return ``(f~(V), grad f~(V))`` sharing the single product ``V C``."""
        V = _check_cols(V, self.p)
        VC = _times(V, self._op)
        return float(np.vdot(V, VC)), 2.0 * VC

    def value(self, V):
        return self.value_grad(V)[0]

    def grad(self, V):
        return self.value_grad(V)[1]

    def value_at(self, x):
        """``f(x x^T)`` for a vector ``x``."""
        x = np.asarray(x, dtype=np.float64)
        return float(x @ (self.C @ x))

    @property
    def eta(self):
        """Scale used by the inner stopping test."""
        return frobenius_norm(self.C)


class ProductObjective:
    """``f(X) = prod_i <C_i, X>`` over a list of sparse symmetric factors.

    Values and gradients work for any number of factors; the Lipschitz
    estimate (and therefore the solver) is only available for two.
    """

    kind = "product"

    def __init__(self, factors):
        factors = [as_sparse_sym(Ci) for Ci in factors]
        if len(factors) < 2:
            raise ValueError("a product objective needs at least two factors")
        dims = {Ci.shape[0] for Ci in factors}
        if len(dims) != 1:
            raise ValueError(f"factor matrices disagree in dimension: {sorted(dims)}")
        self.factors = tuple(factors)
        self.p = dims.pop()
        self._ops = [_product_operator(Ci) for Ci in factors]

    def inner_products(self, V):
        """Return ``[<C_i, V^T V>]`` and the products ``[V C_i]``."""
        V = _check_cols(V, self.p)
        VCs = [_times(V, op) for op in self._ops]
        vals = [float(np.vdot(V, VCi)) for VCi in VCs]
        return vals, VCs

    def value_grad(self, V):
        vals, VCs = self.inner_products(V)
        g = np.zeros_like(VCs[0])
        for i, VCi in enumerate(VCs):
            coef = prod(vals[:i] + vals[i + 1:])
            if coef != 0.0:
                g += coef * VCi
        return prod(vals), 2.0 * g

    def value(self, V):
        return self.value_grad(V)[0]

    def grad(self, V):
        return self.value_grad(V)[1]

    def value_at(self, x):
        x = np.asarray(x, dtype=np.float64)
        return prod(float(x @ (Ci @ x)) for Ci in self.factors)

    @property
    def eta(self):
        return max(frobenius_norm(Ci) for Ci in self.factors)


def f_value(obj, V):
    """``f~(V) = f(V^T V)``."""
    return obj.value(V)


def grad_ftilde(obj, V):
    """Gradient of ``f~`` at ``V``: ``2 V grad f(V^T V)``."""
    return obj.grad(V)


@dataclass(frozen=True)
class LipschitzInfo:
    L_tilde: float
    exact: bool


def lipschitz_estimate(obj, p=None):
    """Lipschitz constant (or upper estimate) of ``grad f~`` on the oblique manifold.

    For a linear objective this is ``2 ||C||`` exactly. For a two-factor
    product the bound ``6 p (||C1|| ||C2||_F + ||C1||_F ||C2||)`` is returned;
    it is loose, and the solver refines it by line search.
    """
    p = obj.p if p is None else p
    if obj.kind == "linear":
        # a zero objective still needs a positive majorization constant
        return LipschitzInfo(L_tilde=max(2.0 * spectral_norm(obj.C), 1e-12), exact=True)
    if len(obj.factors) != 2:
        raise NotImplementedError("Lipschitz estimate is only available for two factors")
    C1, C2 = obj.factors
    bound = 6.0 * p * (spectral_norm(C1) * frobenius_norm(C2)
                       + frobenius_norm(C1) * spectral_norm(C2))
    return LipschitzInfo(L_tilde=max(bound, 1e-12), exact=False)


@dataclass
class Instance:
    """A binary program together with its factorized objective.

    ``kind`` is one of ``"maxcut"``, ``"ubqp"`` or ``"product"``. ``data``
    keeps the raw problem description (``W``, ``A`` or the list of
    ``(Q_i, c_i, a_i)`` triples) so the instance can be written back out.
    For homogenized kinds (ubqp and product) the first coordinate of ``x``
    is the constant-one variable.
    """

    kind: str
    data: object
    objective: object = field(repr=False)
    name: str = ""
    known_best: Optional[float] = None
    objective_offset: float = 0.0
    n_binary: int = 0
    sign_convention: str = "neg_f"
    meta: dict = field(default_factory=dict)

    @property
    def p(self):
        return self.objective.p

    @property
    def homogenized(self):
        return self.kind in ("ubqp", "product")

    def normalize_sign(self, x):
        x = np.asarray(x, dtype=np.float64)
        if self.homogenized and x[0] < 0:
            return -x
        return x

    def to_binary(self, x):
        """Recover the original decision variables from a sign vector.

        Max-cut returns the sign vector itself; ubqp and product return the
        ``{0, 1}`` vector ``(x[1:] + 1) / 2`` after fixing ``x[0] = 1``.
        """
        x = self.normalize_sign(x)
        if self.kind == "maxcut":
            return x.astype(int)
        return ((x[1:] + 1.0) / 2.0).astype(int)


def _symmetric_array(A, what):
    if sp.issparse(A):
        M = sp.csr_matrix(A, dtype=np.float64)
        D = M - M.T
        if D.nnz and abs(D).max() > 0:
            raise ValueError(f"{what} must be symmetric")
        return M
    A = np.atleast_2d(np.asarray(A, dtype=np.float64))
    if A.shape[0] != A.shape[1]:
        raise ValueError(f"{what} must be square, got {A.shape}")
    if not np.array_equal(A, A.T):
        raise ValueError(f"{what} must be symmetric")
    return A


def build_ubqp(A, *, symmetrize=False, name="", known_best=None):
    """Reformulate ``max z^T A z`` over ``{0, 1}^n``.

    With ``x = (1; 2z - e)`` the objective becomes ``-x^T C x + e^T A e / 4``
    where ``C = -1/4 [[0, e^T A], [A e, A]]`` has size ``n + 1``.
    """
    if symmetrize:
        A = np.asarray(A.toarray() if sp.issparse(A) else A, dtype=np.float64)
        A = 0.5 * (A + A.T)
    A = _symmetric_array(A, "A")
    n = A.shape[0]
    Ae = np.asarray(A @ np.ones(n)).ravel()
    offset = 0.25 * float(Ae.sum())
    C = -0.25 * sp.bmat([[None, sp.csr_matrix(Ae[None, :])],
                         [sp.csr_matrix(Ae[:, None]), sp.csr_matrix(A)]],
                        format="csr")
    obj = LinearObjective(C)
    inst = Instance(kind="ubqp", data=sp.csr_matrix(A), objective=obj, name=name,
                    known_best=known_best, objective_offset=offset, n_binary=n)
    return obj, inst


def build_maxcut(W, *, name="", known_best=None):
    """Reformulate max-cut with weights ``W`` using ``C = (W - Diag(W e)) / 4``."""
    W = _symmetric_array(W, "W")
    Wd = W.diagonal() if sp.issparse(W) else np.diag(W)
    if np.any(Wd != 0):
        raise ValueError("max-cut weight matrix must have a zero diagonal")
    n = W.shape[0]
    We = np.asarray(W @ np.ones(n)).ravel()
    C = 0.25 * (sp.csr_matrix(W) - sp.diags(We, format="csr"))
    obj = LinearObjective(C)
    inst = Instance(kind="maxcut", data=sp.csr_matrix(W), objective=obj, name=name,
                    known_best=known_best, objective_offset=0.0, n_binary=n)
    return obj, inst


def build_product(factors, *, name="", known_best=None, sign_convention="neg_f", meta=None):
    """Reformulate ``prod_i (x_i^T Q_i x_i + c_i^T x_i + a_i)`` over sign vectors.

    ``factors`` is a sequence of ``(Q_i, c_i, a_i)``. With
    ``X = (1; x_1; ...; x_q)(1; x_1; ...; x_q)^T`` each term equals
    ``<C_i, X>`` for ``C_i = [[a_i, b_i^T], [b_i, B_i]]``, where ``b_i``
    carries ``c_i / 2`` and ``B_i`` carries ``Q_i`` in the ``i``-th block.
    """
    factors = [(np.atleast_2d(np.asarray(Q, dtype=np.float64)),
                np.atleast_1d(np.asarray(c, dtype=np.float64)), float(a))
               for Q, c, a in factors]
    q = len(factors)
    if q < 2:
        raise ValueError("a product instance needs at least two factors")
    n = factors[0][0].shape[0]
    for i, (Q, c, _) in enumerate(factors):
        if Q.shape != (n, n) or c.shape != (n,):
            raise ValueError(
                f"factor {i}: expected Q of shape {(n, n)} and c of length {n}, "
                f"got {Q.shape} and {c.shape}")
        if not np.array_equal(Q, Q.T):
            raise ValueError(f"factor {i}: Q must be symmetric")
    p = n * q + 1
    mats = []
    for i, (Q, c, a) in enumerate(factors):
        lo = 1 + i * n
        Ci = sp.lil_matrix((p, p))
        Ci[0, 0] = a
        Ci[0, lo:lo + n] = c / 2.0
        Ci[lo:lo + n, 0] = (c / 2.0)[:, None]
        Ci[lo:lo + n, lo:lo + n] = Q
        mats.append(Ci.tocsr())
    obj = ProductObjective(mats)
    inst = Instance(kind="product", data=factors, objective=obj, name=name,
                    known_best=known_best, objective_offset=0.0, n_binary=n * q,
                    sign_convention=sign_convention, meta=dict(meta or {}))
    return obj, inst


def objective_at_binary(inst, x):
    """Objective of the original maximization problem at a sign vector."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (inst.p,):
        raise ValueError(f"expected a vector of length {inst.p}, got shape {x.shape}")
    if not np.all(np.abs(x) == 1.0):
        raise ValueError("objective_at_binary needs entries in {-1, 1}")
    x = inst.normalize_sign(x)
    return -inst.objective.value_at(x) + inst.objective_offset
