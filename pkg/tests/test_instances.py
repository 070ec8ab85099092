import itertools
import json

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from dcfac.instances import (
    EdgeList,
    InstanceFormatError,
    format_edgelist,
    format_orlib,
    gen_product_maxcut,
    gen_product_random,
    load_instance,
    parse_edgelist,
    parse_orlib,
    read_canonical,
    read_manifest,
    write_canonical,
)
from dcfac.linalg import spectral_norm
from dcfac.model import build_maxcut, build_ubqp, objective_at_binary
from dcfac.oracle import brute_force, random_ubqp_matrix


def torus_graph(rows, cols, seed):
    """G11-like toroidal grid with +-1 weights."""
    rng = np.random.default_rng(seed)
    n = rows * cols
    W = sp.lil_matrix((n, n))
    for r in range(rows):
        for c in range(cols):
            v = r * cols + c
            for u in (((r + 1) % rows) * cols + c, r * cols + (c + 1) % cols):
                w = rng.choice([-1.0, 1.0])
                W[v, u] = W[u, v] = w
    return W.tocsr()


class TestEdgeList:
    def test_single_edge(self):
        el = parse_edgelist("2 1\n1 2 1")
        assert el.n == 2 and el.m == 1
        assert (el.i[0], el.j[0], el.w[0]) == (0, 1, 1.0)

    def test_triangle(self):
        W = parse_edgelist("3 3\n1 2 1\n2 3 1\n1 3 1").to_matrix().toarray()
        assert np.array_equal(W, np.ones((3, 3)) - np.eye(3))

    def test_index_out_of_range(self):
        with pytest.raises(InstanceFormatError, match="line 2"):
            parse_edgelist("2 1\n1 3 1")

    @pytest.mark.parametrize("text", ["", "2\n", "2 1\n1 x 1", "2 1\n1 1 1", "2 2\n1 2 1",
                                      "2 1\n1 2 abc", "0 0\n"])
    def test_malformed(self, text):
        with pytest.raises(InstanceFormatError):
            parse_edgelist(text)

    def test_comments_duplicates_and_default_weight(self):
        text = "# header\n% more\n3 3\n1 2 2.5\n2 1 0.5\n2 3\n"
        W = parse_edgelist(text).to_matrix().toarray()
        assert W[0, 1] == W[1, 0] == 3.0
        assert W[1, 2] == 1.0

    def test_round_trip(self):
        W = torus_graph(4, 5, 0)
        el = EdgeList.from_matrix(W)
        again = parse_edgelist(format_edgelist(el)).to_matrix()
        assert (again != W).nnz == 0

    @settings(max_examples=20, deadline=None)
    @given(seed=st.integers(0, 2**31), n=st.integers(2, 15))
    def test_parsed_graph_builds(self, seed, n):
        rng = np.random.default_rng(seed)
        pairs = [(a, b) for a in range(n) for b in range(a + 1, n) if rng.random() < 0.4]
        text = f"{n} {len(pairs)}\n" + "".join(f"{a + 1} {b + 1} {rng.integers(-3, 4)}\n"
                                               for a, b in pairs)
        W = parse_edgelist(text).to_matrix()
        assert (W != W.T).nnz == 0
        assert not np.any(W.diagonal())
        build_maxcut(W)


class TestOrlib:
    def test_scalar(self):
        ((n, A),) = parse_orlib("1\n1 1\n1 1 5")
        assert n == 1 and A.toarray().tolist() == [[5.0]]

    def test_mirror_rule(self):
        ((_, A),) = parse_orlib("1\n2 2\n1 1 1\n1 2 3")
        assert A.toarray().tolist() == [[1.0, 3.0], [3.0, 0.0]]

    def test_two_problems_in_order(self):
        probs = parse_orlib("2\n1 1\n1 1 5\n2 1\n2 2 -1\n")
        assert [n for n, _ in probs] == [1, 2]
        assert probs[1][1].toarray().tolist() == [[0.0, 0.0], [0.0, -1.0]]

    def test_empty_and_truncated(self):
        assert parse_orlib("0\n") == []
        with pytest.raises(InstanceFormatError):
            parse_orlib("1\n2 2\n1 1 1\n")
        with pytest.raises(InstanceFormatError):
            parse_orlib("2\n1 1\n1 1 5\n")

    def test_library_convention_objective(self):
        # z^T A z counts an off-diagonal pair twice
        ((_, A),) = parse_orlib("1\n2 3\n1 1 1\n2 2 1\n1 2 -3")
        _, inst = build_ubqp(A)
        assert brute_force(inst).opt_value == pytest.approx(1.0)
        assert objective_at_binary(inst, np.ones(3)) == pytest.approx(1 + 1 - 6)

    @settings(max_examples=20, deadline=None)
    @given(seed=st.integers(0, 2**31), n=st.integers(1, 12))
    def test_round_trip(self, seed, n):
        A = sp.csr_matrix(np.round(random_ubqp_matrix(np.random.default_rng(seed), n)))
        ((_, B),) = parse_orlib(format_orlib([(n, A)]))
        assert np.array_equal(B.toarray(), A.toarray())


class TestProductGenerators:
    def test_random_deterministic(self):
        a, b = gen_product_random(4, 11), gen_product_random(4, 11)
        assert write_canonical(a) == write_canonical(b)
        assert write_canonical(a) != write_canonical(gen_product_random(4, 12))

    def test_random_normalized(self):
        inst = gen_product_random(6, 3)
        for D in inst.meta["D"]:
            assert spectral_norm(D) == pytest.approx(1.0, abs=1e-8)
        assert inst.p == 13 and inst.n_binary == 12

    def test_random_recipe(self):
        l = 2
        inst = gen_product_random(l, 5)
        D, omega = inst.meta["D"], inst.meta["omega"]
        best = -np.inf
        for bits in itertools.product([0, 1], repeat=2 * l):
            x, y = np.array(bits[:l], float), np.array(bits[l:], float)
            val = -(x @ D[0] @ x + omega[0]) * (y @ D[1] @ y + omega[1])
            best = max(best, val)
        assert brute_force(inst).opt_value == pytest.approx(best, abs=1e-12)
        assert brute_force(inst).evaluations == 16

    def test_maxcut_sign_identity(self):
        W = np.array([[0.0, 1.0], [1.0, 0.0]])
        inst = gen_product_maxcut(W, W)
        Wbar = W / spectral_norm(W)
        for s in itertools.product([-1.0, 1.0], repeat=4):
            x, y = np.array(s[:2]), np.array(s[2:])
            cut = lambda v: 0.25 * float(np.sum(Wbar * (1 - np.outer(v, v))))
            full = np.concatenate([[1.0], x, y])
            assert objective_at_binary(inst, full) == pytest.approx(cut(x) * cut(y), abs=1e-10)

    def test_maxcut_zero_graphs(self):
        Z = np.zeros((3, 3))
        inst = gen_product_maxcut(Z, Z)
        assert brute_force(inst).opt_value == 0.0

    def test_maxcut_mismatch(self):
        with pytest.raises(ValueError):
            gen_product_maxcut(np.zeros((2, 2)), np.zeros((3, 3)))

    def test_maxcut_from_edgelists(self):
        el = parse_edgelist("3 3\n1 2 1\n2 3 1\n1 3 1")
        inst = gen_product_maxcut(el, el)
        # both triangles cut 2 edges at best; normalized by ||W|| = 2
        assert brute_force(inst).opt_value == pytest.approx(1.0)


class TestCanonical:
    def test_round_trip_g11_sized(self):
        _, inst = build_maxcut(torus_graph(50, 16, 1), name="torus800", known_best=564.0)
        text = write_canonical(inst)
        again = read_canonical(text)
        assert write_canonical(again) == text
        assert (again.data != inst.data).nnz == 0
        assert again.known_best == 564.0 and again.name == "torus800"

    @pytest.mark.parametrize("make", [
        lambda: build_ubqp(random_ubqp_matrix(np.random.default_rng(0), 5), name="u")[1],
        lambda: gen_product_random(3, 2),
    ])
    def test_round_trip_other_kinds(self, make):
        inst = make()
        text = write_canonical(inst)
        again = read_canonical(text)
        assert write_canonical(again) == text
        x = np.random.default_rng(1).choice([-1.0, 1.0], inst.p)
        assert objective_at_binary(again, x) == objective_at_binary(inst, x)

    def test_known_best_omitted(self):
        _, inst = build_maxcut(np.array([[0.0, 1.0], [1.0, 0.0]]))
        doc = json.loads(write_canonical(inst))
        del doc["known_best"]
        assert read_canonical(json.dumps(doc)).known_best is None

    @pytest.mark.parametrize("field,value", [
        ("schema_version", 99), ("kind", "tsp"), ("n", "two"), ("format", "other"),
        ("known_best", "high"), ("data", []),
    ])
    def test_corrupted_field_named(self, field, value):
        _, inst = build_maxcut(np.array([[0.0, 1.0], [1.0, 0.0]]))
        doc = json.loads(write_canonical(inst))
        doc[field] = value
        with pytest.raises(InstanceFormatError, match=field):
            read_canonical(json.dumps(doc))

    def test_bad_entries(self):
        _, inst = build_maxcut(np.array([[0.0, 1.0], [1.0, 0.0]]))
        doc = json.loads(write_canonical(inst))
        doc["data"]["edges"] = [[1, 5, 1.0]]
        with pytest.raises(InstanceFormatError, match="data.edges"):
            read_canonical(json.dumps(doc))
        with pytest.raises(InstanceFormatError):
            read_canonical("{not json")

    def test_floats_survive_exactly(self):
        A = np.array([[0.1 + 0.2, 1 / 3], [1 / 3, -2.5e-17]])
        _, inst = build_ubqp(A)
        again = read_canonical(write_canonical(inst))
        assert np.array_equal(again.data.toarray(), A)


class TestLoading:
    def test_load_formats(self, tmp_path):
        (tmp_path / "g.txt").write_text("2 1\n1 2 1\n")
        (tmp_path / "b.txt").write_text("2\n1 1\n1 1 5\n2 1\n1 2 -1\n")
        inst = load_instance(tmp_path / "g.txt", "edgelist", known_best=1.0)
        assert inst.kind == "maxcut" and inst.name == "g" and inst.known_best == 1.0
        second = load_instance(f"{tmp_path / 'b.txt'}@2", "orlib", kind="ubqp")
        assert second.n_binary == 2 and second.name == "b@2"
        (tmp_path / "c.json").write_text(write_canonical(gen_product_random(2, 7)))
        prod = load_instance(tmp_path / "c.json", "canonical", kind="product")
        assert prod.kind == "product"

    def test_load_errors(self, tmp_path):
        (tmp_path / "g.txt").write_text("2 1\n1 2 1\n")
        with pytest.raises(ValueError):
            load_instance(tmp_path / "g.txt", "edgelist", kind="ubqp")
        with pytest.raises(ValueError):
            load_instance(tmp_path / "g.txt", "mps")
        with pytest.raises(OSError):
            load_instance(tmp_path / "none.txt", "edgelist")

    def test_manifest(self, tmp_path):
        (tmp_path / "m.txt").write_text("# comment\ng.txt, edgelist, maxcut, 564\n"
                                        "/abs/b.txt@3, orlib, ubqp\n")
        entries = read_manifest(tmp_path / "m.txt")
        assert entries[0].path == str(tmp_path / "g.txt") and entries[0].known_best == 564
        assert entries[1].path == "/abs/b.txt@3" and entries[1].known_best is None
        (tmp_path / "bad.txt").write_text("only, two\n")
        with pytest.raises(InstanceFormatError, match="line 1"):
            read_manifest(tmp_path / "bad.txt")
