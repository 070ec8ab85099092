import csv
import io
import json

import numpy as np
import pytest

from dcfac.cli import BENCH_HEADER, main
from dcfac.instances import read_canonical
from dcfac.oracle import check_descent


@pytest.fixture
def files(tmp_path):
    (tmp_path / "two.txt").write_text("2 1\n1 2 1\n")
    (tmp_path / "tri.txt").write_text("3 3\n1 2 1\n2 3 1\n1 3 1\n")
    (tmp_path / "small.txt").write_text("1\n3 4\n1 1 2\n2 2 -1\n1 3 3\n2 3 -2\n")
    (tmp_path / "unequal.txt").write_text("3 1\n1 2 1\n")
    return tmp_path


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


class TestSolve:
    def test_two_node(self, files, capsys):
        code, out, _ = run(capsys, "solve", "--instance", files / "two.txt", "--format",
                           "edgelist", "--kind", "maxcut", "--bval", "1", "--emit-x")
        assert code == 0
        doc = json.loads(out)
        assert doc["obj"] == 1.0 and doc["gap_percent"] == 0.0
        assert doc["exited_normally"] and doc["format"] == "dcfac-report"
        assert sorted(doc["x_binary"]) == [-1, 1]
        assert doc["wall_time"] > 0

    def test_orlib_to_file(self, files, capsys):
        out = files / "r.json"
        code, stdout, _ = run(capsys, "solve", "--instance", files / "small.txt", "--format",
                              "orlib", "--kind", "ubqp", "--out", out, "--emit-x")
        assert code == 0 and stdout == ""
        doc = json.loads(out.read_text())
        z = np.array(doc["solution"])
        A = np.array([[2, 0, 3], [0, -1, -2], [3, -2, 0]], float)
        assert doc["obj"] == pytest.approx(z @ A @ z)

    def test_missing_file(self, files, capsys):
        code, _, err = run(capsys, "solve", "--instance", files / "nope.txt", "--format",
                           "edgelist", "--kind", "maxcut")
        assert code == 1 and "error" in err

    @pytest.mark.parametrize("argv", [
        ["solve", "--format", "edgelist", "--kind", "maxcut"],
        ["solve", "--instance", "x", "--format", "xml", "--kind", "maxcut"],
        ["solve", "--instance", "x", "--format", "edgelist", "--kind", "maxcut", "--sigma", "abc"],
        ["frobnicate"],
        [],
    ])
    def test_bad_flags_exit_1(self, argv, capsys):
        with pytest.raises(SystemExit) as exc:
            main(argv)
        assert exc.value.code == 1

    def test_invalid_config_exit_1(self, files, capsys):
        code, _, err = run(capsys, "solve", "--instance", files / "two.txt", "--format",
                           "edgelist", "--kind", "maxcut", "--sigma", "0.5")
        assert code == 1 and "sigma" in err

    def test_kind_mismatch_exit_1(self, files, capsys):
        code, _, _ = run(capsys, "solve", "--instance", files / "two.txt", "--format",
                         "edgelist", "--kind", "ubqp")
        assert code == 1

    def test_lmax_exit_2(self, files, capsys):
        code, out, _ = run(capsys, "solve", "--instance", files / "tri.txt", "--format",
                           "edgelist", "--kind", "maxcut", "--lmax", "1")
        assert code == 2
        assert json.loads(out)["exit_reason"] == "l_max"

    def test_time_limit_exit_2(self, files, capsys):
        code, out, _ = run(capsys, "solve", "--instance", files / "tri.txt", "--format",
                           "edgelist", "--kind", "maxcut", "--time-limit", "1e-9")
        assert code == 2 and json.loads(out)["exit_reason"] == "time_limit"

    def test_beta_zero_trace(self, files, capsys):
        code, out, _ = run(capsys, "solve", "--instance", files / "tri.txt", "--format",
                           "edgelist", "--kind", "maxcut", "--beta", "zero", "--trace")
        assert code == 0
        doc = json.loads(out)
        assert doc["beta_mode"] == "zero" and doc["bound_rigorous"]
        assert doc["inner_traces"]

        class P:
            def __init__(self, d):
                self.__dict__.update(d)

        for trace in doc["inner_traces"]:
            assert check_descent([P(pt) for pt in trace]).passed

    def test_deterministic_no_timing(self, files, capsys):
        argv = ["solve", "--instance", files / "tri.txt", "--format", "edgelist",
                "--kind", "maxcut", "--seed", "5", "--no-timing", "--emit-x"]
        _, a, _ = run(capsys, *argv)
        _, b, _ = run(capsys, *argv)
        assert a == b and json.loads(a)["wall_time"] is None

    def test_seed_env(self, files, capsys, monkeypatch):
        argv = ["solve", "--instance", files / "tri.txt", "--format", "edgelist",
                "--kind", "maxcut", "--no-timing"]
        monkeypatch.setenv("DCFAC_SEED", "42")
        _, out, _ = run(capsys, *argv)
        assert json.loads(out)["seed"] == 42
        _, out, _ = run(capsys, *argv, "--seed", "3")
        assert json.loads(out)["seed"] == 3

    def test_pretty(self, files, capsys):
        code, out, _ = run(capsys, "solve", "--instance", files / "two.txt", "--format",
                           "edgelist", "--kind", "maxcut", "--pretty")
        assert code == 0 and "objective" in out and not out.startswith("{")


class TestBench:
    def _manifest(self, files):
        m = files / "manifest.txt"
        m.write_text("two.txt, edgelist, maxcut, 1\ntri.txt, edgelist, maxcut, 2\n"
                     "missing.txt, edgelist, maxcut, 5\nsmall.txt, orlib, ubqp\n")
        return m

    def test_header_golden(self):
        assert ",".join(BENCH_HEADER) == \
            "name,n,bval,obj,gap_percent,time_s,infeas_inf,normal_exit,note"

    def test_rows_and_failures(self, files, capsys):
        out = files / "bench.csv"
        code, _, _ = run(capsys, "bench", "--manifest", self._manifest(files), "--out", out)
        assert code == 0
        rows = list(csv.DictReader(io.StringIO(out.read_text())))
        assert [r["name"] for r in rows] == ["two", "tri", "missing", "small"]
        assert rows[0]["obj"] == "1.0" and rows[0]["gap_percent"] == "0.0"
        assert rows[1]["obj"] == "2.0" and rows[1]["normal_exit"] == "1"
        assert rows[2]["obj"] == "" and "FileNotFoundError" in rows[2]["note"]
        assert rows[3]["gap_percent"] == "" and rows[3]["bval"] == ""
        assert float(rows[0]["time_s"]) > 0

    def test_parallel_matches_serial(self, files, capsys):
        m = self._manifest(files)
        run(capsys, "bench", "--manifest", m, "--jobs", "1", "--no-timing", "--out", files / "a.csv")
        run(capsys, "bench", "--manifest", m, "--jobs", "8", "--no-timing", "--out", files / "b.csv")
        assert (files / "a.csv").read_bytes() == (files / "b.csv").read_bytes()

    def test_bad_manifest(self, files, capsys):
        (files / "bad.txt").write_text("just-a-path\n")
        code, _, err = run(capsys, "bench", "--manifest", files / "bad.txt")
        assert code == 1 and "line 1" in err

    def test_jobs_validated(self, files, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["bench", "--manifest", str(self._manifest(files)), "--jobs", "0"])
        assert exc.value.code == 1


class TestVerify:
    def test_gradcheck(self, capsys):
        code, out, _ = run(capsys, "verify", "--suite", "gradcheck")
        assert code == 0 and "gradcheck: PASS" in out

    def test_invariants_small(self, capsys):
        code, out, _ = run(capsys, "verify", "--suite", "invariants", "--trials", "3")
        assert code == 0 and "two-node" in out

    def test_tiny_exact_small(self, capsys):
        code, out, _ = run(capsys, "verify", "--suite", "tiny-exact", "--trials", "5")
        assert "exact" in out and code in (0, 1)


class TestGen:
    def test_product_random_deterministic(self, files, capsys):
        a, b = files / "a.json", files / "b.json"
        assert run(capsys, "gen", "--family", "product-random", "--l", "2", "--seed", "7",
                   "--out", a)[0] == 0
        run(capsys, "gen", "--family", "product-random", "--l", "2", "--seed", "7", "--out", b)
        assert a.read_bytes() == b.read_bytes()
        inst = read_canonical(a.read_text())
        assert inst.kind == "product" and inst.n_binary == 4
        assert json.loads(a.read_text())["provenance"]["seed"] == 7

    def test_product_maxcut(self, files, capsys):
        out = files / "pm.json"
        code, _, _ = run(capsys, "gen", "--family", "product-maxcut", "--w1", files / "tri.txt",
                         "--w2", files / "tri.txt", "--out", out)
        assert code == 0 and read_canonical(out.read_text()).p == 7

    def test_product_maxcut_mismatch(self, files, capsys):
        code, _, err = run(capsys, "gen", "--family", "product-maxcut", "--w1", files / "tri.txt",
                           "--w2", files / "two.txt")
        assert code == 1 and "differ" in err

    def test_missing_l(self, capsys):
        code, _, _ = run(capsys, "gen", "--family", "product-random")
        assert code == 1
