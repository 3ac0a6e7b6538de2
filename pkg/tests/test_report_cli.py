import json

import numpy as np
import pytest

from orthant_ruin import build_model, build_reflection
from orthant_ruin.cli import main
from orthant_ruin.config import load_config, parse_config
from orthant_ruin.exceptions import DimensionMismatch, InvalidConfig
from orthant_ruin.report import (INCONCLUSIVE, INCONSISTENT, CONSISTENT, Settings, build_claims_report,
                                 capital_sweep, dumps, p_to_z, table_csv, verdict)

CL1 = {"mode": "cl_network", "d": 1, "premium_rates": [1.25], "arrival_rates": [1.0],
       "claims": {"family": "exponential", "mean": 1.0}}
QUIET2 = {"mode": "renewal_network", "d": 2, "premium_rates": [1.0, 1.0], "routing": [0.5, 0.5],
          "interarrival": {"family": "deterministic", "delta": 1.0}, "claims": {"family": "deterministic", "size": 0}}


def write(tmp_path, doc, name="run.json"):
    doc = {**doc, "output": {"dir": str(tmp_path / "out"), **doc.get("output", {})}}
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


def small(model, P=((0.0,),), a=(0.0,), **extra):
    return {"matrix": {"P": [list(r) for r in P]}, "model": model, "initial_capital": list(a),
            "horizon": 200, "n_paths": 2000, "seed": 3, "step_cap": 2000, "kmax": 3, "identity_horizon": 3,
            **extra}


def test_verdict_bands():
    assert verdict(3.9) == CONSISTENT and verdict(-6.5) == INCONSISTENT and verdict(5) == INCONCLUSIVE
    assert verdict(float("nan")) == INCONCLUSIVE
    assert p_to_z(0.05) == pytest.approx(1.959964, abs=1e-6)


def test_dumps_formatting():
    text = dumps({"b": 0.1, "a": [1, np.float64(2.5), None, True, float("inf")], "c": np.int64(3)})
    assert text.index('"b"') < text.index('"a"')
    assert "0.10000000000000001" in text and "Infinity" in text
    back = json.loads(text)
    assert back["b"] == 0.1 and back["a"][1:4] == [2.5, None, True] and back["c"] == 3


def test_table_csv_line_endings():
    text = table_csv([{"k": 1, "x": 0.5}], ["k", "x"])
    assert text == "k,x\n1,0.5\n"


def test_config_defaults_and_errors(tmp_path):
    cfg = parse_config({"matrix": {"P": [[0]]}, "model": CL1})
    assert cfg.settings.n_paths == 100_000 and cfg.initial_capital.tolist() == [0.0]
    with pytest.raises(InvalidConfig):
        parse_config({"matrix": {"P": [[0]]}, "model": CL1, "colour": "blue"})
    with pytest.raises(InvalidConfig):
        parse_config({"matrix": {"P": [[0]]}, "model": {**CL1, "premium": 1}})
    with pytest.raises(DimensionMismatch):
        parse_config({"matrix": {"P": [[0, 0], [0, 0]]}, "model": CL1})
    with pytest.raises(DimensionMismatch):
        parse_config({"matrix": {"P": [[0]]}, "model": CL1, "initial_capital": [1, 2]})
    with pytest.raises(InvalidConfig):
        parse_config({"matrix": {"P": [[0]]}, "model": CL1, "verdict_thresholds": {"consistent": 7}})
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(InvalidConfig):
        load_config(str(bad))


def test_validate_command(tmp_path, capsys):
    assert main(["validate", write(tmp_path, small(CL1))]) == 0
    out = json.loads(capsys.readouterr().out)
    assert all(out["hypotheses"][h]["status"] == "holds" for h in ("H1", "H2", "H3", "H6", "H7", "H8"))
    assert out["matrix"]["h2_column"] == 1

    assert main(["validate", write(tmp_path, small(QUIET2, P=((0, 1), (1, 0)), a=(0, 0)))]) == 1
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "SpectralRadiusNotLessThanOne"

    poor = {**CL1, "premium_rates": [0.9], "strict": True}
    assert main(["validate", write(tmp_path, small(poor))]) == 1
    assert json.loads(capsys.readouterr().err)["error"] == "NetProfitViolated"


def test_simulate_path_command(tmp_path, capsys):
    P = ((0, 0.5), (0.5, 0))
    model = {**CL1, "d": 2, "premium_rates": [1.5, 1.5], "arrival_rates": [1, 1]}
    dump = tmp_path / "paths"
    assert main(["simulate-path", write(tmp_path, small(model, P=P, a=(0, 0))), "--n", "6", "--dump", str(dump)]) == 0
    assert (dump / "primal_path.csv").read_text().count("\n") == 8
    assert (dump / "dual_path.csv").read_text().startswith("k,uhat_1,uhat_2,")
    verdict_doc = json.loads((dump / "duality_verdict.json").read_text())
    assert verdict_doc["n"] == 6 and "ss_equivalence" in verdict_doc["checks"]
    assert json.loads(capsys.readouterr().out)["n"] == 6


def test_duality_check_command(capsys):
    assert main(["duality-check", "--instances", "0"]) == 0
    assert json.loads(capsys.readouterr().out)["instances"] == 0
    assert main(["duality-check", "--instances", "500", "--dmax", "1"]) == 0
    capsys.readouterr()
    # oblique reflection in d >= 2 produces counterexamples to the reverse direction
    assert main(["duality-check", "--instances", "4000", "--seed", "1"]) == 2
    out = json.loads(capsys.readouterr().out)
    assert out["total_failures"] > 0 and out["first_counterexample"]["d"] >= 2


def test_estimate_command_outputs(tmp_path, capsys):
    cfg = write(tmp_path, small(CL1))
    assert main(["estimate", cfg, "--method", "all", "--sweep", "0:4:2", "--out", str(tmp_path / "a")]) == 0
    verdicts = json.loads(capsys.readouterr().out)["verdicts"]
    assert verdicts["storage_entry_strictly_between_0_and_1"] == CONSISTENT
    files = {p.name for p in (tmp_path / "a").iterdir()}
    assert files == {"claims_report.json", "per_horizon_identity.csv", "sigma_bd_survival.csv",
                     "capital_sweep.csv", "run_metadata.json"}
    sweep = np.genfromtxt(tmp_path / "a" / "capital_sweep.csv", delimiter=",", names=True)
    assert list(sweep["t"]) == [0, 2, 4]
    assert np.all(np.diff(sweep["direct"]) <= 0)
    report = json.loads((tmp_path / "a" / "claims_report.json").read_text())
    assert report["estimates"]["direct"]["ss_ruin"]["value"] == pytest.approx(0.8, abs=0.05)
    assert report["estimates"]["storage"]["estimate"]["value"] == pytest.approx(1 / 2.25, abs=0.05)
    assert "timestamp" not in json.dumps(report) and "n_jobs" not in json.dumps(report)


def test_estimate_is_byte_identical_across_workers(tmp_path, capsys):
    cfg = write(tmp_path, small(CL1, n_paths=3000))
    outs = []
    for jobs in ("1", "2"):
        out = tmp_path / f"j{jobs}"
        assert main(["estimate", cfg, "--n-jobs", jobs, "--out", str(out)]) == 0
        outs.append({n: (out / n).read_bytes() for n in ("claims_report.json", "per_horizon_identity.csv",
                                                          "sigma_bd_survival.csv")})
    capsys.readouterr()
    assert outs[0] == outs[1]


def test_estimate_quiet_model_is_all_zero(tmp_path, capsys):
    cfg = write(tmp_path, small(QUIET2, P=((0, 0.5), (0.5, 0)), a=(0, 0)))
    assert main(["estimate", cfg, "--method", "direct", "--out", str(tmp_path / "q")]) == 0
    capsys.readouterr()
    report = json.loads((tmp_path / "q" / "claims_report.json").read_text())
    assert all(e["value"] == 0 for e in report["estimates"]["direct"].values())
    assert report["estimates"]["p_hat"]["value"] == 0


def test_estimate_exit_code_on_identity_rejection(tmp_path, capsys):
    # a vanishing threshold turns any sampling noise into a rejection
    cfg = write(tmp_path, small(CL1, verdict_thresholds={"consistent": 1e-9, "inconsistent": 6}))
    assert main(["estimate", cfg, "--method", "direct", "--out", str(tmp_path / "z")]) == 3
    capsys.readouterr()


def test_estimate_config_error(tmp_path, capsys):
    assert main(["estimate", str(tmp_path / "missing.json")]) == 1
    assert json.loads(capsys.readouterr().err)["error"] == "InvalidConfig"


def test_bad_sweep_is_rejected(tmp_path):
    with pytest.raises(SystemExit):
        main(["estimate", write(tmp_path, small(CL1)), "--sweep", "4:0:1"])


def test_capital_sweep_direct():
    model, _ = build_model(CL1, build_reflection([[0.0]]))
    rows = capital_sweep(model, [0, 1, 3], Settings(horizon=100, n_paths=1000, step_cap=1000))
    assert [r["t"] for r in rows] == [0, 1, 3]
    assert rows[0]["direct"] >= rows[1]["direct"] >= rows[2]["direct"]


def test_report_structure():
    model, hyp = build_model(CL1, build_reflection([[0.0]]))
    s = Settings(horizon=100, n_paths=2000, step_cap=1000, kmax=2, identity_horizon=2)
    report = build_claims_report(model, hyp, [0.0], s)
    ids = [c["id"] for c in report.claims]
    assert "ruin_equals_storage_entry" in ids and "sigma_bd_geometric_k1" in ids
    assert all(set(c) >= {"id", "statement", "lhs", "rhs", "z", "verdict"} for c in report.claims)
    assert len(report.identity_table) == 2 and len(report.sigma_bd_table) == 2
    assert report.to_json() == report.to_json()
