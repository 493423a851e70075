import json
from pathlib import Path

import pytest

from zoomctl.cli import main
from zoomctl.config import ConfigError, build_experiment, load_config, parse_config_text

GOOD_CFG = """
# comment line
A.kind = gaussian
A.mean = 1.0
A.stddev = 0.5
W.kind = gaussian
W.mean = 0.0
W.stddev = 1.0
P = 2.0
L = 8
M0 = 0.1
K = 8.0
c = 0.2
policy = adaptive_fixed_rate
horizon = 1200
trials = 150
seed = 7
alpha = 4.5
"""


@pytest.fixture
def cfg_file(tmp_path):
    path = tmp_path / "good.cfg"
    path.write_text(GOOD_CFG)
    return path


# --- config parsing -------------------------------------------------------------

def test_parse_and_build(cfg_file):
    cfg = load_config(cfg_file)
    assert cfg.params.L == 8
    assert cfg.horizon == 1200
    assert cfg.a_spec.kind == "gaussian"
    assert cfg.policy.kind == "adaptive_fixed_rate"


def test_unknown_key_reports_line_number():
    with pytest.raises(ConfigError) as err:
        parse_config_text("A.kind = gaussian\nbogus = 1\n")
    assert err.value.line == 2
    assert "bogus" in str(err.value)


def test_duplicate_key_rejected():
    with pytest.raises(ConfigError, match="duplicate"):
        parse_config_text("P = 2\nP = 3\n")


def test_missing_strategy_keys_for_adaptive():
    text = GOOD_CFG.replace("K = 8.0\n", "")
    with pytest.raises(ConfigError, match="requires strategy keys: K"):
        build_experiment(parse_config_text(text))


def test_oracle_policy_needs_no_strategy_block():
    text = """
A.kind = gaussian
A.mean = 1.0
A.stddev = 0.5
W.kind = gaussian
W.mean = 0.0
W.stddev = 1.0
policy = zero_control
horizon = 100
trials = 10
seed = 1
"""
    cfg = build_experiment(parse_config_text(text))
    assert cfg.policy.kind == "zero_control"


def test_unstabilizable_gain_rejected():
    text = GOOD_CFG.replace("A.stddev = 0.5", "A.stddev = 1.1")
    with pytest.raises(ConfigError, match="not second-moment stabilizable"):
        build_experiment(parse_config_text(text))


def test_mismatched_family_parameter_rejected():
    text = GOOD_CFG.replace("A.mean = 1.0", "A.mean = 1.0\nA.dof = 5.0")
    with pytest.raises(ConfigError, match="does not apply"):
        build_experiment(parse_config_text(text))


def test_overrides(cfg_file):
    cfg = load_config(cfg_file, ["L=16", "trials=3"])
    assert cfg.params.L == 16
    assert cfg.trials == 3
    with pytest.raises(ConfigError, match="unknown key"):
        load_config(cfg_file, ["nope=1"])


def test_range_key_only_for_static(cfg_file):
    with pytest.raises(ConfigError, match="static_quantizer only"):
        load_config(cfg_file, ["policy.range=5.0"])
    cfg = load_config(cfg_file, ["policy=static_quantizer", "policy.range=5.0"])
    assert cfg.static_range() == 5.0


# --- CLI end to end -------------------------------------------------------------

def test_cli_rate():
    assert main(["rate", "8"]) == 0
    assert main(["rate", "0"]) == 1


def test_cli_simulate_writes_outputs(tmp_path, cfg_file, capsys):
    out = tmp_path / "out"
    code = main(
        ["simulate", str(cfg_file), "--out", str(out), "--keep-traces", "2",
         "--set", "horizon=1100", "--set", "trials=60"]
    )
    assert code == 0  # stable config
    assert (out / "summary.json").exists()
    assert (out / "curve.csv").exists()
    assert (out / "trace_0000.csv").exists()
    assert (out / "trace_0001.csv").exists()
    payload = json.loads((out / "summary.json").read_text())
    assert payload["verdict"] == "stable"
    assert payload["config"]["horizon"] == 1100


def test_cli_simulate_keep_traces_zero(tmp_path, cfg_file):
    out = tmp_path / "out0"
    main(["simulate", str(cfg_file), "--out", str(out),
          "--set", "horizon=1100", "--set", "trials=30"])
    assert not list(out.glob("trace_*.csv"))


def test_cli_simulate_reruns_byte_identical(tmp_path, cfg_file):
    outs = []
    for name in ("r1", "r2"):
        out = tmp_path / name
        main(["simulate", str(cfg_file), "--out", str(out),
              "--set", "horizon=1100", "--set", "trials=40"])
        outs.append(out)
    for fname in ("summary.json", "curve.csv"):
        assert (outs[0] / fname).read_bytes() == (outs[1] / fname).read_bytes()


def test_cli_simulate_config_error(tmp_path):
    bad = tmp_path / "bad.cfg"
    bad.write_text(GOOD_CFG.replace("A.stddev = 0.5", "A.stddev = 1.1"))
    assert main(["simulate", str(bad), "--out", str(tmp_path / "o")]) == 1
    missing = tmp_path / "nope.cfg"
    assert main(["simulate", str(missing), "--out", str(tmp_path / "o")]) == 1


def test_cli_feasibility_exit_codes(tmp_path, cfg_file):
    # coarse codebook: negative drift margin -> exit 2
    assert main(["feasibility", str(cfg_file)]) == 2
    ref = Path("configs/reference.cfg")
    assert main(["feasibility", str(ref)]) == 0
    # alpha at the boundary of the tail analysis -> exit 1
    assert main(["feasibility", str(cfg_file), "--set", "alpha=4.0"]) == 1
    bad = tmp_path / "bad.cfg"
    bad.write_text(GOOD_CFG.replace("A.stddev = 0.5", "A.stddev = 1.1"))
    assert main(["feasibility", str(bad)]) == 1


def test_cli_feasibility_prints_table_and_json(cfg_file, capsys):
    main(["feasibility", str(cfg_file)])
    out = capsys.readouterr().out
    assert "margin_drift" in out
    assert '"ok": false' in out


def test_cli_sweep(tmp_path, cfg_file, capsys):
    out = tmp_path / "sw"
    code = main(
        ["sweep", str(cfg_file), "--dim", "L", "--values", "1,2,8",
         "--out", str(out), "--set", "trials=3", "--set", "horizon=60"]
    )
    assert code == 0
    lines = (out / "sweep.csv").read_text().splitlines()
    assert lines[0].startswith("# config:")
    rows = [line.split(",") for line in lines[2:]]
    assert [r[2] for r in rows] == ["2", "3", "5"]


def test_cli_sweep_bad_inputs(tmp_path, cfg_file):
    assert main(["sweep", str(cfg_file), "--dim", "Z", "--values", "1", "--out", str(tmp_path)]) == 1
    assert main(["sweep", str(cfg_file), "--dim", "P", "--values", "", "--out", str(tmp_path)]) == 1
    assert main(["sweep", str(cfg_file), "--dim", "P", "--values", "a,b", "--out", str(tmp_path)]) == 1


def test_cli_verify_structural_checks(cfg_file, capsys):
    code = main(
        ["verify", str(cfg_file), "--checks",
         "tracker_equality,containment,domination,oracle_match",
         "--set", "trials=200", "--set", "horizon=600", "--set", "seed=20240"]
    )
    out = capsys.readouterr().out
    assert "tracker_equality" in out and "PASS" in out
    assert code == 0


def test_cli_verify_drift_insufficient_trials(cfg_file):
    code = main(["verify", str(cfg_file), "--checks", "drift", "--set", "trials=50"])
    assert code == 1


def test_cli_verify_corrupted_trace(tmp_path, cfg_file, capsys):
    out = tmp_path / "sim"
    main(["simulate", str(cfg_file), "--out", str(out), "--keep-traces", "1",
          "--set", "horizon=1100", "--set", "trials=5"])
    trace_path = out / "trace_0000.csv"
    lines = trace_path.read_text().splitlines()
    # corrupt the tracker column of step 40 (field index 4 = M)
    parts = lines[41].split(",")
    parts[4] = repr(float(parts[4]) * 1.5)
    lines[41] = ",".join(parts)
    trace_path.write_text("\n".join(lines) + "\n")
    code = main(["verify", str(cfg_file), "--checks", "tracker_equality",
                 "--trace-file", str(trace_path)])
    outtxt = capsys.readouterr().out
    assert code == 2
    assert "first divergent index 40" in outtxt


def test_cli_verify_reports_written(tmp_path, cfg_file):
    out = tmp_path / "rep"
    main(["verify", str(cfg_file), "--checks", "drift,domination", "--out", str(out),
          "--set", "trials=150", "--set", "horizon=900"])
    for name in ("drift_report", "domination_report"):
        assert (out / f"{name}.json").exists()
        assert (out / f"{name}.csv").exists()
    dom_lines = (out / "domination_report.csv").read_text().splitlines()
    assert dom_lines[0] == "trace,n0,abs_x,N,ok"
    assert len(dom_lines) > 100


def test_cli_verify_unknown_check(cfg_file):
    assert main(["verify", str(cfg_file), "--checks", "nonsense"]) == 1
