import io
import json
import math

import numpy as np
import pytest

from covbound.cli import main, parse_range
from covbound.errors import CovboundError


def run(*argv):
    out = io.StringIO()
    code = main([str(a) for a in argv], out=out)
    return code, out.getvalue()


@pytest.fixture
def id5(tmp_path):
    path = tmp_path / "id5.csv"
    path.write_text("\n".join(",".join("1" if i == j else "0" for j in range(5)) for i in range(5)))
    return path


class TestBound:
    def test_chi_square(self):
        code, text = run("bound", "--spectrum", "1", "--theta", 2, "--n", 100, "--format", "json")
        assert code == 0
        rows = {r["equation"]: r for r in json.loads(text)}
        assert rows["eq15"]["deviation"] == pytest.approx(math.sqrt(0.08) + 0.04, rel=1e-15)
        assert rows["eq15"]["prob_budget"] == pytest.approx(math.exp(-2), rel=1e-15)
        assert len(rows) == 6

    def test_delta_per_equation(self, id5):
        code, text = run("bound", "--matrix", id5, "--delta", 0.05, "--n", 200, "--format", "json")
        rows = {r["equation"]: r for r in json.loads(text)}
        assert rows["eq15"]["theta"] == pytest.approx(math.log(100), rel=1e-15)
        assert rows["eq17"]["theta"] == pytest.approx(math.log(200), rel=1e-15)
        assert all(r["prob_budget"] == pytest.approx(0.05) for r in rows.values())

    def test_theta_zero(self):
        code, text = run("bound", "--spectrum", "3,2,1", "--theta", 0, "--n", 10, "--format", "json")
        rows = json.loads(text)
        assert all(r["deviation"] == 0 and r["vacuous"] for r in rows)

    def test_subset_and_ell(self):
        code, text = run("bound", "--spectrum", "4,2,2", "--theta", 1, "--n", 100, "--ell", 2,
                         "--equations", "eq18", "--format", "json")
        (row,) = json.loads(text)
        assert row["deviation"] == pytest.approx(math.sqrt(0.24) + 0.08, rel=1e-15)

    def test_table_nine_digits(self):
        code, text = run("bound", "--spectrum", "1", "--theta", 2, "--n", 100, "--equations", "eq15")
        assert "0.322842712" in text and "0.3228427125" not in text

    def test_csv(self):
        code, text = run("bound", "--spectrum", "1", "--theta", 2, "--n", 100, "--format", "csv")
        lines = text.strip().splitlines()
        assert lines[0].startswith("equation,ell,theta")
        assert len(lines) == 7

    @pytest.mark.parametrize(
        "argv",
        [
            ("bound", "--spectrum", "1", "--theta", 1, "--delta", 0.1, "--n", 3),
            ("bound", "--spectrum", "1", "--n", 3),
            ("bound", "--spectrum", "1", "--matrix", "x.csv", "--theta", 1, "--n", 3),
            ("bound", "--spectrum", "1", "--theta", -1, "--n", 3),
            ("bound", "--spectrum", "0,0", "--theta", 1, "--n", 3),
            ("bound", "--spectrum", "1,0", "--theta", 1, "--n", 3, "--ell", 2),
            ("bound", "--matrix", "/nonexistent.csv", "--theta", 1, "--n", 3),
            ("bound", "--spectrum", "1", "--theta", 1, "--n", 3, "--equations", "eq99"),
        ],
    )
    def test_usage_errors(self, argv, capsys):
        code, text = run(*argv)
        assert code == 2 and text == ""
        assert "error" in capsys.readouterr().err


class TestPlan:
    def test_inverse(self):
        code, text = run("plan", "--spectrum", "1", "--theta", 2, "--eps-rel", 0.322843,
                         "--equations", "eq15", "--format", "json")
        (row,) = json.loads(text)
        assert code == 0 and row["n"] == 100 and row["minimal"]

    def test_large_eps(self):
        theta, r = 2.0, 1.0
        eps = math.sqrt(2 * theta * (r + 1)) + 2 * theta * r
        code, text = run("plan", "--spectrum", "1", "--theta", theta, "--eps-rel", eps,
                         "--equations", "eq15", "--format", "json")
        assert json.loads(text)[0]["n"] == 1

    def test_doubling(self):
        ns = []
        for eps in (0.1, 0.2, 0.4):
            _, text = run("plan", "--spectrum", "3,2,1", "--delta", 0.05, "--eps-rel", eps, "--format", "json")
            ns.append([r["n"] for r in json.loads(text)])
        for a, b in zip(ns, ns[1:]):
            assert all(y <= x for x, y in zip(a, b))

    def test_bad_eps(self):
        assert run("plan", "--spectrum", "1", "--theta", 2, "--eps-rel", 0)[0] == 2


class TestVerify:
    def test_identity_grid(self, id5):
        code, text = run("verify", "--matrix", id5, "--n", 200, "--trials", 10_000, "--seed", 42,
                         "--format", "json")
        rows = json.loads(text)
        assert code == 0
        assert {r["verdict"] for r in rows} <= {"CONSISTENT", "VACUOUS"}

    def test_same_seed_byte_identical(self):
        argv = ("verify", "--spectrum", "2,1", "--n", 20, "--trials", 500, "--seed", 9, "--format", "csv")
        assert run(*argv) == run(*argv)

    def test_one_trial(self):
        code, text = run("verify", "--spectrum", "1,1", "--n", 5, "--trials", 1, "--format", "json")
        assert code == 0
        assert all(r["verdict"] != "VIOLATED" for r in json.loads(text))

    def test_json_round_trip(self):
        _, text = run("verify", "--spectrum", "1", "--n", 4, "--trials", 300, "--theta", "1,2",
                      "--format", "json")
        rows = json.loads(text)
        assert json.loads(json.dumps(rows)) == rows
        assert len(rows) == 2 * 6

    def test_bad_seed(self):
        assert run("verify", "--spectrum", "1", "--n", 4, "--seed", -1)[0] == 2

    def test_threads_env(self, monkeypatch):
        argv = ("verify", "--spectrum", "2,1", "--n", 5, "--trials", 5000, "--seed", 1, "--format", "csv")
        monkeypatch.setenv("COVBOUND_THREADS", "1")
        serial = run(*argv)
        monkeypatch.setenv("COVBOUND_THREADS", "4")
        assert run(*argv) == serial


class TestOracle:
    def test_default_passes(self):
        code, text = run("oracle", "--p", "2..5", "--dim", 2, "--seed", 7, "--format", "json")
        rows = json.loads(text)
        assert code == 0 and all(r["pass"] for r in rows)
        xcx = next(r for r in rows if r.get("name") == "E[XCX]")
        assert xcx["terms"] == [{"coeff": 2, "chain": 3, "loops": []}, {"coeff": 1, "chain": 1, "loops": [2]}]
        raw2 = next(r for r in rows if r["check"] == "bernstein" and r["p"] == 2 and r["kind"] == "raw")
        assert abs(raw2["min_eig_of_slack"]) <= 1e-8 * raw2["dominator_norm"]

    def test_explicit_matrix(self):
        code, _ = run("oracle", "--p", "2..3", "--spectrum", "1,0")
        assert code == 0

    def test_table_output(self):
        code, text = run("oracle", "--p", "2", "--dim", 1)
        assert code == 0 and "closed_form" in text and "bernstein" in text

    @pytest.mark.parametrize("p", ["0..3", "2..9", "x"])
    def test_bad_range(self, p):
        assert run("oracle", "--p", p)[0] == 2

    def test_parse_range(self):
        assert parse_range("2..4") == [2, 3, 4]
        assert parse_range("3") == [3]
        with pytest.raises(CovboundError):
            parse_range("5..2")

    def test_failed_certificate_exit_code(self, monkeypatch):
        import covbound.cli as cli

        real = cli.oracle_checks
        monkeypatch.setattr(cli, "oracle_checks", lambda ps, C: real(ps, C) + [{"check": "x", "pass": False}])
        assert run("oracle", "--p", "2")[0] == 3
