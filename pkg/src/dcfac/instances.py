"""Instance files and generators.

Three text formats are understood:

* edge lists (G-set / rudy output): ``n m`` then ``m`` lines ``i j w``;
* OR-Library UBQP collections: ``P`` then, per problem, ``n m`` and ``m``
  lines ``i j q``;
* the canonical JSON format written by :func:`write_canonical`, described
  in ``FORMATS.md``.

Indices are 1-based in every file and 0-based in memory. Lines starting
with ``#`` or ``%`` are comments.
"""

from dataclasses import dataclass
import json
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .linalg import spectral_norm
from .model import build_maxcut, build_product, build_ubqp

__all__ = [
    "InstanceFormatError",
    "EdgeList",
    "parse_edgelist",
    "format_edgelist",
    "parse_orlib",
    "format_orlib",
    "gen_product_random",
    "gen_product_maxcut",
    "read_canonical",
    "write_canonical",
    "load_instance",
    "read_manifest",
    "ManifestEntry",
    "SCHEMA_VERSION",
    "RNG_NAME",
]

SCHEMA_VERSION = 1
FORMAT_TAG = "dcfac-instance"
RNG_NAME = "numpy.random.PCG64"


class InstanceFormatError(ValueError):
    """A malformed instance file. ``line`` is 1-based when known."""

    def __init__(self, msg, line=None):
        self.line = line
        super().__init__(f"line {line}: {msg}" if line is not None else msg)


def _content_lines(text):
    for lineno, raw in enumerate(text.splitlines(), start=1):
        s = raw.strip()
        if not s or s[0] in "#%":
            continue
        yield lineno, s.split()


def _number(tok, lineno, what):
    try:
        return int(tok)
    except ValueError:
        pass
    try:
        return float(tok)
    except ValueError:
        raise InstanceFormatError(f"cannot read {what} from {tok!r}", lineno) from None


def _index(tok, lineno, n):
    try:
        i = int(tok)
    except ValueError:
        raise InstanceFormatError(f"index {tok!r} is not an integer", lineno) from None
    if not 1 <= i <= n:
        raise InstanceFormatError(f"index {i} out of range 1..{n}", lineno)
    return i - 1


@dataclass
class EdgeList:
    n: int
    i: np.ndarray
    j: np.ndarray
    w: np.ndarray

    @property
    def m(self):
        return len(self.w)

    def to_matrix(self):
        """Symmetric weight matrix; parallel edges are summed."""
        W = sp.coo_matrix((self.w, (self.i, self.j)), shape=(self.n, self.n)).tocsr()
        W = W + W.T
        W.sum_duplicates()
        W.eliminate_zeros()
        return W

    @classmethod
    def from_matrix(cls, W):
        U = sp.triu(sp.csr_matrix(W), k=1).tocoo()
        order = np.lexsort((U.col, U.row))
        return cls(W.shape[0], U.row[order], U.col[order], U.data[order].astype(np.float64))


def parse_edgelist(text):
    lines = _content_lines(text)
    try:
        lineno, head = next(lines)
    except StopIteration:
        raise InstanceFormatError("empty edge list") from None
    if len(head) < 2:
        raise InstanceFormatError("header must be 'n m'", lineno)
    n = _number(head[0], lineno, "n")
    m = _number(head[1], lineno, "m")
    if not isinstance(n, int) or not isinstance(m, int) or n < 1 or m < 0:
        raise InstanceFormatError("header must hold a positive n and nonnegative m", lineno)
    I, J, Wt = [], [], []
    for lineno, toks in lines:
        if len(toks) < 2:
            raise InstanceFormatError("edge line must be 'i j [w]'", lineno)
        a = _index(toks[0], lineno, n)
        b = _index(toks[1], lineno, n)
        if a == b:
            raise InstanceFormatError(f"self-loop at vertex {a + 1}", lineno)
        w = _number(toks[2], lineno, "weight") if len(toks) > 2 else 1
        I.append(a)
        J.append(b)
        Wt.append(float(w))
    if len(I) != m:
        raise InstanceFormatError(f"header announces {m} edges, found {len(I)}")
    return EdgeList(n, np.array(I, dtype=np.int64), np.array(J, dtype=np.int64),
                    np.array(Wt, dtype=np.float64))


def _fmt(v):
    v = float(v)
    return str(int(v)) if v.is_integer() else repr(v)


def format_edgelist(el):
    out = [f"{el.n} {el.m}"]
    out += [f"{a + 1} {b + 1} {_fmt(w)}" for a, b, w in zip(el.i, el.j, el.w)]
    return "\n".join(out) + "\n"


def parse_orlib(text):
    """Read an OR-Library style UBQP collection.

    Returns a list of ``(n, A)`` with ``A`` a symmetric CSR matrix. An entry
    ``i j q`` with ``i != j`` sets both ``A[i, j]`` and ``A[j, i]`` to ``q``, so
    ``z^T A z`` counts the pair twice; diagonal entries are taken as given.
    This is the convention under which the library's best values hold.
    """
    lines = _content_lines(text)
    try:
        lineno, head = next(lines)
    except StopIteration:
        raise InstanceFormatError("empty OR-Library file") from None
    count = _number(head[0], lineno, "problem count")
    if not isinstance(count, int) or count < 0:
        raise InstanceFormatError("problem count must be a nonnegative integer", lineno)
    problems = []
    for k in range(count):
        try:
            lineno, hdr = next(lines)
        except StopIteration:
            raise InstanceFormatError(f"file ends before problem {k + 1}") from None
        if len(hdr) < 2:
            raise InstanceFormatError("problem header must be 'n m'", lineno)
        n = _number(hdr[0], lineno, "n")
        m = _number(hdr[1], lineno, "m")
        if not isinstance(n, int) or not isinstance(m, int) or n < 1 or m < 0:
            raise InstanceFormatError("problem header must hold a positive n and nonnegative m",
                                      lineno)
        entries = {}
        for _ in range(m):
            try:
                lineno, toks = next(lines)
            except StopIteration:
                raise InstanceFormatError(f"problem {k + 1} is truncated") from None
            if len(toks) < 3:
                raise InstanceFormatError("entry line must be 'i j q'", lineno)
            a = _index(toks[0], lineno, n)
            b = _index(toks[1], lineno, n)
            q = float(_number(toks[2], lineno, "coefficient"))
            key = (min(a, b), max(a, b))
            entries[key] = entries.get(key, 0.0) + q
        rows, cols, vals = [], [], []
        for (a, b), q in entries.items():
            rows.append(a)
            cols.append(b)
            vals.append(q)
            if a != b:
                rows.append(b)
                cols.append(a)
                vals.append(q)
        A = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
        A.sort_indices()
        problems.append((n, A))
    return problems


def format_orlib(problems):
    out = [str(len(problems))]
    for n, A in problems:
        U = sp.triu(sp.csr_matrix(A)).tocoo()
        order = np.lexsort((U.col, U.row))
        out.append(f"{n} {len(order)}")
        out += [f"{U.row[t] + 1} {U.col[t] + 1} {_fmt(U.data[t])}" for t in order]
    return "\n".join(out) + "\n"


def _symmetric_normal(rng, l):
    # independent standard normals on and above the diagonal, mirrored below
    M = np.triu(rng.standard_normal((l, l)))
    return M + np.triu(M, 1).T


def gen_product_random(l, seed):
    """Random two-factor product of 0/1 quadratics.

    The instance maximizes ``-(x^T D1 x + w1)(y^T D2 y + w2)`` over
    ``x, y`` in ``{0, 1}^l`` where ``D_i = M_i / ||M_i||`` for symmetric
    standard-normal ``M_i`` and standard-normal ``w_i``.
    """
    if l < 1:
        raise ValueError("l must be at least 1")
    rng = np.random.default_rng(seed)
    factors = []
    raw = []
    for _ in range(2):
        M = _symmetric_normal(rng, l)
        omega = float(rng.standard_normal())
        D = M / spectral_norm(M)
        Q = 0.25 * D
        c = 2.0 * Q @ np.ones(l)
        a = float(np.ones(l) @ Q @ np.ones(l)) + omega
        factors.append((Q, c, a))
        raw.append((D, omega))
    _, inst = build_product(factors, name=f"product-random-l{l}-s{seed}",
                            meta={"family": "product-random", "l": l, "seed": seed,
                                  "rng": RNG_NAME})
    inst.meta["D"] = [D for D, _ in raw]
    inst.meta["omega"] = [w for _, w in raw]
    return inst


def _as_weight_matrix(W):
    if isinstance(W, EdgeList):
        return W.to_matrix()
    return sp.csr_matrix(W, dtype=np.float64)


def gen_product_maxcut(W1, W2, name=""):
    """Product of two normalized cut values.

    With ``Wbar_i = W_i / ||W_i||`` the instance maximizes
    ``cut(Wbar_1, x) * cut(Wbar_2, y)`` over sign vectors ``x, y``.
    """
    Ws = [_as_weight_matrix(W1), _as_weight_matrix(W2)]
    if Ws[0].shape != Ws[1].shape:
        raise ValueError(f"graphs differ in size: {Ws[0].shape[0]} vs {Ws[1].shape[0]}")
    l = Ws[0].shape[0]
    factors = []
    for i, W in enumerate(Ws, start=1):
        nrm = spectral_norm(W)
        Wbar = (W / nrm).toarray() if nrm > 0 else W.toarray()
        sign = (-1.0) ** i
        Q = 0.25 * sign * Wbar
        a = -0.25 * sign * float(Wbar.sum())
        factors.append((Q, np.zeros(l), a))
    _, inst = build_product(factors, name=name or "product-maxcut",
                            meta={"family": "product-maxcut", "l": l})
    return inst


# -- canonical format -------------------------------------------------------

def _upper_entries(A):
    U = sp.triu(sp.csr_matrix(A)).tocoo()
    order = np.lexsort((U.col, U.row))
    return [[int(U.row[t]) + 1, int(U.col[t]) + 1, float(U.data[t])] for t in order]


def _from_upper(entries, n, field):
    rows, cols, vals = [], [], []
    for e in entries:
        if not (isinstance(e, list) and len(e) == 3):
            raise InstanceFormatError(f"field '{field}': entries must be [i, j, value] triples")
        a, b, v = e
        if not (isinstance(a, int) and isinstance(b, int) and 1 <= a <= b <= n):
            raise InstanceFormatError(f"field '{field}': bad index pair {a}, {b}")
        if not isinstance(v, (int, float)):
            raise InstanceFormatError(f"field '{field}': non-numeric value {v!r}")
        rows.append(a - 1)
        cols.append(b - 1)
        vals.append(float(v))
        if a != b:
            rows.append(b - 1)
            cols.append(a - 1)
            vals.append(float(v))
    return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))


def write_canonical(inst, provenance=None):
    """Serialize an instance to canonical JSON text."""
    doc = {
        "format": FORMAT_TAG,
        "schema_version": SCHEMA_VERSION,
        "kind": inst.kind,
        "name": inst.name,
        "known_best": inst.known_best,
    }
    if inst.kind == "maxcut":
        W = inst.data
        doc["n"] = W.shape[0]
        doc["data"] = {"edges": [e for e in _upper_entries(W) if e[0] != e[1]]}
    elif inst.kind == "ubqp":
        A = inst.data
        doc["n"] = A.shape[0]
        doc["data"] = {"entries": _upper_entries(A)}
    elif inst.kind == "product":
        n = inst.data[0][0].shape[0]
        doc["n"] = n
        doc["data"] = {
            "sign_convention": inst.sign_convention,
            "factors": [{"Q": _upper_entries(Q), "c": [float(v) for v in c], "a": float(a)}
                        for Q, c, a in inst.data],
        }
    else:
        raise ValueError(f"unknown instance kind {inst.kind!r}")
    prov = dict(provenance or {})
    for key in ("family", "l", "seed", "rng"):
        if key in inst.meta and key not in prov:
            prov[key] = inst.meta[key]
    if prov:
        doc["provenance"] = prov
    return json.dumps(doc, sort_keys=True) + "\n"


def _require(doc, key, types, where="instance"):
    if key not in doc:
        raise InstanceFormatError(f"field '{key}' is missing from {where}")
    val = doc[key]
    if isinstance(val, bool) or not isinstance(val, types):
        raise InstanceFormatError(f"field '{key}' has the wrong type ({type(val).__name__})")
    return val


def read_canonical(text):
    """Parse canonical JSON text into an :class:`~dcfac.model.Instance`."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InstanceFormatError(f"not valid JSON: {exc.msg}", exc.lineno) from None
    if not isinstance(doc, dict):
        raise InstanceFormatError("top level must be an object")
    if doc.get("format") != FORMAT_TAG:
        raise InstanceFormatError(f"field 'format' must be {FORMAT_TAG!r}")
    version = _require(doc, "schema_version", int)
    if version != SCHEMA_VERSION:
        raise InstanceFormatError(f"field 'schema_version': unsupported version {version}")
    kind = _require(doc, "kind", str)
    n = _require(doc, "n", int)
    if n < 1:
        raise InstanceFormatError("field 'n' must be positive")
    name = doc.get("name", "")
    if not isinstance(name, str):
        raise InstanceFormatError("field 'name' must be a string")
    known_best = doc.get("known_best")
    if known_best is not None and (isinstance(known_best, bool)
                                   or not isinstance(known_best, (int, float))):
        raise InstanceFormatError("field 'known_best' must be a number or null")
    known_best = None if known_best is None else float(known_best)
    data = _require(doc, "data", dict)
    prov = doc.get("provenance", {})
    if not isinstance(prov, dict):
        raise InstanceFormatError("field 'provenance' must be an object")

    if kind == "maxcut":
        edges = _require(data, "edges", list, "data")
        W = _from_upper(edges, n, "data.edges")
        _, inst = build_maxcut(W, name=name, known_best=known_best)
    elif kind == "ubqp":
        entries = _require(data, "entries", list, "data")
        A = _from_upper(entries, n, "data.entries")
        _, inst = build_ubqp(A, name=name, known_best=known_best)
    elif kind == "product":
        raw = _require(data, "factors", list, "data")
        factors = []
        for t, fac in enumerate(raw):
            where = f"data.factors[{t}]"
            if not isinstance(fac, dict):
                raise InstanceFormatError(f"field '{where}' must be an object")
            Q = _from_upper(_require(fac, "Q", list, where), n, where + ".Q").toarray()
            c = _require(fac, "c", list, where)
            if len(c) != n or not all(isinstance(v, (int, float)) for v in c):
                raise InstanceFormatError(f"field '{where}.c' must hold {n} numbers")
            a = _require(fac, "a", (int, float), where)
            factors.append((Q, np.array(c, dtype=np.float64), float(a)))
        try:
            _, inst = build_product(factors, name=name, known_best=known_best,
                                    sign_convention=data.get("sign_convention", "neg_f"))
        except ValueError as exc:
            raise InstanceFormatError(f"field 'data.factors': {exc}") from None
    else:
        raise InstanceFormatError(f"field 'kind': unknown instance kind {kind!r}")
    inst.meta.update(prov)
    return inst


# -- loading by path --------------------------------------------------------

def load_instance(path, fmt, kind=None, known_best=None, name=None):
    """Load an instance file and build its objective.

    ``fmt`` is ``edgelist``, ``orlib`` or ``canonical``. An OR-Library path
    may carry a ``@k`` suffix selecting the ``k``-th problem (1-based,
    default first). ``kind`` must agree with the format when given.
    """
    path = str(path)
    index = 1
    if fmt == "orlib" and "@" in Path(path).name:
        path, _, sel = path.rpartition("@")
        index = int(sel)
    text = Path(path).read_text()
    stem = name or Path(path).stem + (f"@{index}" if fmt == "orlib" and index != 1 else "")
    if fmt == "edgelist":
        if kind not in (None, "maxcut"):
            raise ValueError(f"edge lists describe max-cut instances, not {kind!r}")
        W = parse_edgelist(text).to_matrix()
        _, inst = build_maxcut(W, name=stem, known_best=known_best)
    elif fmt == "orlib":
        if kind not in (None, "ubqp"):
            raise ValueError(f"OR-Library files describe ubqp instances, not {kind!r}")
        problems = parse_orlib(text)
        if not 1 <= index <= len(problems):
            raise ValueError(f"problem {index} requested, file holds {len(problems)}")
        _, inst = build_ubqp(problems[index - 1][1], name=stem, known_best=known_best)
    elif fmt == "canonical":
        inst = read_canonical(text)
        if kind is not None and kind != inst.kind:
            raise ValueError(f"file holds a {inst.kind} instance, not {kind!r}")
        if known_best is not None:
            inst.known_best = known_best
        if name:
            inst.name = name
        elif not inst.name:
            inst.name = stem
    else:
        raise ValueError(f"unknown format {fmt!r}")
    return inst


@dataclass
class ManifestEntry:
    path: str
    fmt: str
    kind: str
    known_best: object = None
    lineno: int = 0


def read_manifest(path):
    """Read a benchmark manifest of ``path, format, kind[, bval]`` lines.

    Relative paths are resolved against the manifest's directory.
    """
    base = Path(path).parent
    entries = []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        s = raw.strip()
        if not s or s[0] in "#%":
            continue
        parts = [t.strip() for t in s.split(",")]
        if len(parts) < 3 or len(parts) > 4:
            raise InstanceFormatError("manifest line must be 'path, format, kind[, bval]'", lineno)
        p, fmt, kind = parts[:3]
        bval = None
        if len(parts) == 4 and parts[3]:
            bval = float(_number(parts[3], lineno, "bval"))
        if not Path(p.split("@")[0] if fmt == "orlib" else p).is_absolute():
            p = str(base / p)
        entries.append(ManifestEntry(p, fmt, kind, bval, lineno))
    return entries
