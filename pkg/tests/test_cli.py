import json
import os
import subprocess
import sys

import pytest

from starbracket.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


class TestCorrection:
    def test_n2(self, capsys):
        code, out, _ = run(capsys, "correction", "--n", "2")
        assert code == 0
        assert out.splitlines()[0] == "H_qm - H = (hbar^2/8)*(1/u - 3)"
        assert "(det g - 3) = 0: exact" in out

    def test_json(self, capsys):
        code, out, _ = run(capsys, "correction", "--n", "4", "--json")
        data = json.loads(out)
        assert code == 0 and data["schemaVersion"] == 1 and data["passed"]
        assert data["closedForm"] == "(hbar^2/8)*(1/u - 13)"

    def test_bad_n(self, capsys):
        code, _, err = run(capsys, "correction", "--n", "0")
        assert code == 2 and "error" in err


class TestSpectrum:
    def test_s2(self, capsys):
        code, out, _ = run(capsys, "spectrum", "--n", "2", "--lmax", "3")
        assert code == 0
        assert [line.split("E=")[1] for line in out.splitlines()] == ["0", "hbar^2", "3*hbar^2", "6*hbar^2"]

    def test_s3_j(self, capsys):
        _, out, _ = run(capsys, "spectrum", "--n", "3", "--lmax", "2")
        assert out.splitlines()[1] == "l=1  j=1/2  E=(3/2)*hbar^2"

    def test_json(self, capsys):
        _, out, _ = run(capsys, "spectrum", "--n", "2", "--lmax", "1", "--json")
        assert json.loads(out)["levels"][1] == {"l": 1, "energy": "hbar^2"}


class TestBracket:
    def test_star(self, capsys):
        code, out, _ = run(capsys, "bracket", "--kind", "star", "--n", "1", "--expr", "x1", "--expr", "p1")
        assert code == 0 and out.strip() == "x1*p1 + (1/2)*i*hbar"

    def test_leading_minus(self, capsys):
        code, out, _ = run(capsys, "bracket", "--kind", "pb", "--expr", "-s*p2", "--expr", "s*p1")
        assert code == 0 and out.strip() == "x1*p2 - x2*p1"

    def test_cnb(self, capsys):
        code, out, _ = run(capsys, "bracket", "--kind", "cnb", "--expr", "x1", "--expr", "p1", "--expr", "x2", "--expr", "p2")
        assert out.strip() == "1"

    def test_db(self, capsys):
        code, out, _ = run(capsys, "bracket", "--kind", "db", "--expr", "x1", "--expr", "p1", "--expr", "-s*p2", "--expr", "s*p1")
        assert code == 0 and out.strip() == "-x2*p1/(x1*p2 - x2*p1)"

    def test_json(self, capsys):
        _, out, _ = run(capsys, "bracket", "--kind", "mb", "--json", "--expr", "x1", "--expr", "p1")
        data = json.loads(out)
        assert data["schemaVersion"] == 1 and data["text"] == "1"

    def test_parse_error(self, capsys):
        code, _, err = run(capsys, "bracket", "--kind", "pb", "--expr", "x1^(-1)", "--expr", "p1")
        assert code == 2 and "line 1, column 4" in err

    def test_arity_error(self, capsys):
        code, _, _ = run(capsys, "bracket", "--kind", "pb", "--expr", "x1")
        assert code == 2

    def test_bad_kind(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["bracket", "--kind", "xx", "--expr", "x1"])
        assert exc.value.code == 2


class TestEval:
    def test_exact(self, capsys):
        code, out, _ = run(capsys, "eval", "--n", "2", "--expr", "s*p1", "--at", "x1=3/5,p1=1")
        assert code == 0 and out.strip() == "(4/5)"

    def test_hbar(self, capsys):
        _, out, _ = run(capsys, "eval", "--n", "1", "--expr", "i*hbar + x1", "--at", "x1=1/2", "--hbar", "1/3")
        assert out.strip() == "(1/2 + (1/3)*i)"

    def test_float(self, capsys):
        _, out, _ = run(capsys, "eval", "--n", "1", "--expr", "s", "--at", "x1=1/2", "--float")
        assert abs(float(out) - 0.75**0.5) < 1e-15

    @pytest.mark.parametrize(
        "argv",
        [
            ["eval", "--expr", "s", "--at", "x1=1/2"],
            ["eval", "--expr", "1/u", "--at", "x1=1"],
            ["eval", "--expr", "x1", "--at", "x1=2"],
            ["eval", "--expr", "x1", "--at", "q7=1"],
            ["eval", "--expr", "x1", "--at", "x1"],
            ["eval", "--expr", "x1", "--at", "x1=abc"],
        ],
    )
    def test_errors(self, capsys, argv):
        code, _, err = run(capsys, *argv)
        assert code == 2 and err.startswith("starbracket: error")


class TestVerify:
    def test_pass_and_out(self, capsys, tmp_path):
        target = tmp_path / "report.json"
        code, out, _ = run(capsys, "verify", "--suite", "corrections", "--n", "3", "--json", "--out", str(target))
        assert code == 0
        data = json.loads(out)
        assert data["passed"] and data["schemaVersion"] == 1
        assert json.loads(target.read_text()) == data

    def test_deterministic(self, capsys):
        _, a, _ = run(capsys, "verify", "--suite", "collapse", "--seed", "7")
        _, b, _ = run(capsys, "verify", "--suite", "collapse", "--seed", "7")
        assert a == b and "result: PASS" in a

    def test_degree_option(self, capsys):
        code, out, _ = run(capsys, "verify", "--suite", "cnb_leibniz", "--degree", "2", "--json")
        assert code == 0 and json.loads(out)["degree"] == 2

    def test_usage_error(self, capsys):
        code, _, _ = run(capsys, "verify", "--suite", "traces", "--n", "1")
        assert code == 2

    def test_failure_exit_code(self, capsys, monkeypatch):
        from starbracket import verify

        def broken(n, policy, rec):
            from starbracket.ring import Context, PhaseExpr

            ctx = Context(n)
            rec.equal("x=p", "deliberately false", PhaseExpr.x(ctx, 1), PhaseExpr.p(ctx, 1))

        monkeypatch.setitem(verify.SUITES, "spectra", (broken, None))
        code, out, _ = run(capsys, "verify", "--suite", "spectra")
        assert code == 1 and "first failing residual (x=p): x1 - p1" in out


def test_module_entry_point():
    res = subprocess.run(
        [sys.executable, "-m", "starbracket", "spectrum", "--n", "2", "--lmax", "1"],
        capture_output=True,
        text=True,
        env=dict(os.environ),
    )
    assert res.returncode == 0 and res.stdout.splitlines()[-1] == "l=1  E=hbar^2"


def test_missing_command():
    with pytest.raises(SystemExit) as exc:
        main([])
    assert exc.value.code == 2


def test_eval_repeated_at(capsys):
    assert main(["eval", "--n", "1", "--expr", "s*p1", "--at", "x1=3/5", "--at", "p1=2"]) == 0
    assert capsys.readouterr().out.strip() == "(8/5)"
