import json

import numpy as np
import pytest

from plankton_qso.cli import main

TENTH = [arg for i in range(1, 13) for arg in (f"--a{i}", "0.1")]


def with_rates(**over):
    args = []
    for i in range(1, 13):
        args += [f"--a{i}", str(over.get(f"a{i}", 0.1))]
    return args


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


class TestValidate:
    def test_valid(self, capsys):
        code, out, _ = run(capsys, "validate", *TENTH)
        assert code == 0 and json.loads(out)["valid"]

    def test_invalid_lists_violation(self, capsys):
        code, out, _ = run(capsys, "validate", *with_rates(a2=0.6, a4=0.5))
        assert code == 1
        assert json.loads(out)["violations"] == ["a2+a4≤1"]

    def test_missing_key(self, capsys, tmp_path):
        doc = {f"a{i}": 0.1 for i in range(1, 13)}
        del doc["a7"]
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps(doc))
        code, _, err = run(capsys, "validate", "--config", str(cfg))
        assert code == 2 and "a7" in err

    def test_malformed_json_has_line_number(self, capsys, tmp_path):
        cfg = tmp_path / "c.json"
        cfg.write_text('{\n  "a1": 0.1,\n  "a2" 0.1\n}\n')
        code, _, err = run(capsys, "validate", "--config", str(cfg))
        assert code == 2 and ":3:" in err

    def test_unknown_config_key(self, capsys, tmp_path):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({"a13": 1}))
        assert run(capsys, "validate", "--config", str(cfg))[0] == 2

    def test_command_line_overrides_config(self, capsys, tmp_path):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({f"a{i}": "0.1" for i in range(1, 13)} | {"a2": 0.95}))
        assert run(capsys, "validate", "--config", str(cfg))[0] == 1
        assert run(capsys, "validate", "--config", str(cfg), "--a2", "0.2")[0] == 0

    def test_unparsable_rate(self, capsys):
        assert run(capsys, "validate", *with_rates(a3="x"))[0] == 2

    def test_unknown_subcommand(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["explode"])
        assert exc.value.code == 2


class TestFixedPoints:
    def test_lambda2_present(self, capsys, tmp_path):
        out = tmp_path / "fp.json"
        code, _, _ = run(capsys, "fixed-points", *with_rates(a11=0.4, a12=0.2), "--out", str(out))
        assert code == 0
        doc = json.loads(out.read_text())
        pts = [fp["coordinates"] for fp in doc["fixed_points"] if fp["family"] == "Lambda2"]
        np.testing.assert_allclose(pts, [[0, 0, 0, 0.5, 0, 0.5]])
        assert all(fp["residual"] <= 1e-10 for fp in doc["fixed_points"])

    def test_lambda2_absent(self, capsys):
        code, out, _ = run(capsys, "fixed-points", *with_rates(a11=0.1, a12=0.4))
        assert code == 0
        assert "Lambda2" not in {fp["family"] for fp in json.loads(out)["fixed_points"]}

    def test_invalid_rates(self, capsys):
        assert run(capsys, "fixed-points", *with_rates(a8=0.6, a9=0.6))[0] == 1


class TestStability:
    def test_report(self, capsys):
        code, out, _ = run(capsys, "stability", *with_rates(a11=0.4, a12=0.2))
        doc = json.loads(out)
        assert code == 0
        lam2 = [e for e in doc["fixed_points"] if e["family"] == "Lambda2"]
        assert lam2[0]["classification"] == "NonHyperbolic"
        assert doc["vertices"]["fixed"] == [False, False, False, False, True, True]


class TestSimulate:
    def test_bacteria_example(self, capsys, tmp_path):
        out = tmp_path / "t.csv"
        code, verdict, _ = run(
            capsys, "simulate", *with_rates(a11=0.4, a12=0.2), "--x0", "0,0,0,0.9,0,0.1", "--out", str(out)
        )
        assert code == 0
        v = json.loads(verdict)
        np.testing.assert_allclose(v["limit"], [0, 0, 0, 0.5, 0, 0.5], atol=1e-6)
        lines = out.read_text().splitlines()
        assert lines[0] == "n,x1,x2,x3,x4,x5,x6,step_norm"

    def test_no_dim_example(self, capsys):
        code, out, err = run(capsys, "simulate", *with_rates(a4=0.5), "--x0", "0.5,0,0,0,0.5,0")
        assert code == 0
        assert out.startswith("n,x1")  # CSV on stdout, verdict on stderr
        np.testing.assert_allclose(json.loads(err)["limit"], [0, 0, 0, 0, 1, 0], atol=1e-12)

    def test_fixed_start(self, capsys):
        code, out, _ = run(capsys, "simulate", *TENTH, "--x0", "0,0,0,0,1,0", "--format", "structured")
        doc = json.loads(out)
        assert code == 0 and doc["verdict"]["converged"]
        assert doc["verdict"]["iterations_used"] <= 10

    def test_off_simplex(self, capsys):
        assert run(capsys, "simulate", *TENTH, "--x0", "0.5,0.6,0,0,0,0")[0] == 1

    def test_x0_from_config(self, capsys, tmp_path):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({f"a{i}": 0.1 for i in range(1, 13)} | {"x0": [0, 0, 0, 0, 1, 0], "max_iter": 5}))
        code, out, _ = run(capsys, "simulate", "--config", str(cfg), "--format", "structured")
        assert code == 0 and json.loads(out)["x0"] == [0, 0, 0, 0, 1, 0]

    @pytest.mark.parametrize("x0", ["0,0,1", "a,b,c,d,e,f", None])
    def test_bad_x0(self, capsys, x0):
        argv = ["simulate", *TENTH] + ([] if x0 is None else ["--x0", x0])
        assert run(capsys, *argv)[0] == 2

    def test_output_is_deterministic(self, capsys, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        for path in (a, b):
            run(capsys, "simulate", *TENTH, "--x0", "0.1,0.2,0.3,0.1,0.2,0.1", "--out", str(path))
        assert a.read_bytes() == b.read_bytes()


class TestVerify:
    def test_proved_target_passes(self, capsys, tmp_path):
        out = tmp_path / "r.json"
        code, _, _ = run(capsys, "verify", "--target", "Prop51", "--draws", "10", "--points", "2", "--out", str(out))
        assert code == 0
        assert json.loads(out.read_text())["match_rate"] == 1.0

    def test_conjecture_reports_rate(self, capsys):
        code, out, _ = run(capsys, "conjecture", "--target", "Conjecture2", "--draws", "10", "--points", "2")
        assert code == 0
        assert 0.0 <= json.loads(out)["match_rate"] <= 1.0

    def test_injected_wrong_prediction_fails(self, capsys):
        code, _, err = run(
            capsys, "verify", "--target", "Prop52", "--draws", "5", "--points", "2", "--inject-wrong-prediction"
        )
        assert code == 1 and "rerun: plankton-qso simulate" in err

    def test_conjecture_alias_rejects_proved_target(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["conjecture", "--target", "Prop51"])
        assert exc.value.code == 2

    def test_target_required(self, capsys):
        assert run(capsys, "verify")[0] == 2

    def test_zero_draws_rejected(self, capsys):
        assert run(capsys, "verify", "--target", "Prop51", "--draws", "0")[0] == 2

    def test_bad_variant(self, capsys):
        assert run(capsys, "verify", "--target", "Prop52", "--variant", "up")[0] == 2

    def test_counterexample_rerun_reproduces(self, capsys, tmp_path):
        code, out, _ = run(
            capsys, "verify", "--target", "Prop52", "--draws", "1", "--points", "1", "--seed", "9",
            "--inject-wrong-prediction",
        )
        ce = json.loads(out)["counterexamples"][0]
        cfg = tmp_path / "rerun.json"
        cfg.write_text(json.dumps(ce["config"]))
        code, out, _ = run(capsys, "simulate", "--config", str(cfg), "--format", "structured")
        assert code == 0
        assert json.loads(out)["verdict"]["limit"] == ce["observed_limit"]
