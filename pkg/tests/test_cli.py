"""Config loading/validation, CLI subcommands, exit codes, reproducibility."""

import hashlib
import json
import os

import pytest

from opinion_lab.cli import main
from opinion_lab.config import ConfigError, load_config

SCENARIOS = os.path.join(os.path.dirname(__file__), "..", "scenarios")


def write(tmp_path, text, name="cfg.yaml"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


MINIMAL = """
name: mini
kernel: {family: hegselmann_krause, r: 0.2}
n: 24
integrator: {method: rk4, dt: 0.05, t_end: 2.0, record_every: 5}
diagnostics:
  - {name: moment_monotone_k1}
  - {name: mean_conserved}
"""


def test_load_minimal_config_fills_defaults(tmp_path):
    cfg = load_config(write(tmp_path, MINIMAL))
    assert cfg.name == "mini"
    assert cfg.kernel.family == "hegselmann_krause"
    assert cfg.integrator.clamp_to_box is True
    assert cfg.rng_seed == 0
    assert len(cfg.diagnostics) == 2


def test_negative_radius_rejected(tmp_path):
    path = write(tmp_path, MINIMAL.replace("r: 0.2", "r: -0.1"))
    with pytest.raises(ConfigError, match="radius must be positive"):
        load_config(path)


def test_unknown_check_lists_known_checks(tmp_path):
    path = write(tmp_path, MINIMAL + "  - {name: moment_monotone_k7}\n")
    with pytest.raises(ConfigError, match="moment_monotone_k6"):
        load_config(path)


def test_parse_error_reports_location(tmp_path):
    path = write(tmp_path, "kernel: {family: hegselmann_krause\n  r: 0.2\n")
    with pytest.raises(ConfigError, match="line"):
        load_config(path)


def test_all_errors_collected(tmp_path):
    bad = """
name: broken
kernel: {family: nope}
n: 1
integrator: {method: rk4, dt: -0.1, t_end: 2.0}
diagnostics: [{name: mystery_check}]
"""
    with pytest.raises(ConfigError) as exc:
        load_config(write(tmp_path, bad))
    msgs = "\n".join(exc.value.errors)
    assert "unknown kernel family" in msgs
    assert "n:" in msgs
    assert "integrator:" in msgs
    assert "mystery_check" in msgs
    assert len(exc.value.errors) >= 4


def test_out_of_range_profile_rejected(tmp_path):
    path = write(tmp_path, MINIMAL + "initial_profile: {kind: expression, expr: '2*alpha'}\n")
    with pytest.raises(ConfigError, match="outside"):
        load_config(path)


def _hash_dir(path):
    out = {}
    for name in sorted(os.listdir(path)):
        if name.endswith(".csv"):
            with open(os.path.join(path, name), "rb") as fh:
                out[name] = hashlib.sha256(fh.read()).hexdigest()
    return out


def test_simulate_exit_zero_and_artifacts(tmp_path):
    cfg = write(tmp_path, MINIMAL)
    out = str(tmp_path / "run")
    assert main(["simulate", cfg, "--output", out, "--threads", "1"]) == 0
    for name in ("trajectory.csv", "summary.csv", "report.json", "run_meta.json"):
        assert os.path.exists(os.path.join(out, name)), name
    with open(os.path.join(out, "report.json")) as fh:
        rep = json.load(fh)
    assert rep["overall_pass"] is True
    assert all("theory_ref" in c for c in rep["checks"])
    with open(os.path.join(out, "run_meta.json")) as fh:
        meta = json.load(fh)
    assert meta["config"]["kernel"]["family"] == "hegselmann_krause"


def test_simulate_reproducible_and_thread_invariant(tmp_path):
    cfg = write(tmp_path, MINIMAL)
    outs = []
    for i, threads in enumerate(("1", "1", "2")):
        out = str(tmp_path / f"run{i}")
        assert main(["simulate", cfg, "--output", out, "--threads", threads]) == 0
        outs.append(_hash_dir(out))
    assert outs[0] == outs[1] == outs[2]


def test_three_block_scenario_fails_convergence_check():
    out = "/tmp/opinion_lab_test_three_block"
    code = main(["simulate", os.path.join(SCENARIOS, "three_block.yaml"),
                 "--output", out, "--threads", "1"])
    assert code == 2
    with open(os.path.join(out, "report.json")) as fh:
        rep = json.load(fh)
    failed = {c["name"] for c in rep["checks"] if not c["pass"]}
    assert failed == {"w1_converged"}


def test_check_override_tightens_tolerance(tmp_path):
    cfg = write(tmp_path, MINIMAL)
    out = str(tmp_path / "tight")
    # an absurdly tight tolerance on a passing check forces failure
    code = main(["simulate", cfg, "--output", out, "--threads", "1",
                 "--check", "mean_conserved=1e-30"])
    assert code == 2


def test_unknown_check_override_exits_one_with_partial(tmp_path):
    cfg = write(tmp_path, MINIMAL)
    out = str(tmp_path / "crash")
    code = main(["simulate", cfg, "--output", out, "--threads", "1",
                 "--check", "bogus_check=1"])
    assert code == 1
    assert os.path.exists(os.path.join(out, "trajectory.csv.partial"))
    assert not os.path.exists(os.path.join(out, "report.json"))


def test_nan_kernel_exits_one(tmp_path):
    cfg = write(tmp_path, """
name: nan_kernel
kernel: {family: custom_expression, expr: "nan", w_bound: 1.0}
n: 8
integrator: {method: explicit_euler, dt: 0.1, t_end: 1.0}
""")
    out = str(tmp_path / "nan")
    assert main(["simulate", cfg, "--output", out, "--threads", "1"]) == 1


def test_unwritable_output_dir_exits_one(tmp_path):
    blocker = tmp_path / "afile"
    blocker.write_text("not a directory")
    cfg = write(tmp_path, MINIMAL)
    code = main(["simulate", cfg, "--output", str(blocker / "sub"),
                 "--threads", "1"])
    assert code == 1


def test_invalid_config_exits_one(tmp_path):
    path = write(tmp_path, MINIMAL.replace("r: 0.2", "r: -0.5"))
    assert main(["simulate", path]) == 1


def test_counterexample_subcommand(tmp_path):
    out = str(tmp_path / "cx")
    code = main(["counterexample", "--n-interval", "400", "--t-end", "20",
                 "--verify-time", "5.0", "--output", out])
    assert code == 0
    with open(os.path.join(out, "counterexample_report.json")) as fh:
        rep = json.load(fh)
    assert rep["uniformity_ok"] and rep["cluster_gap_ok"]
    assert rep["verify_max_abs_error"]["5.0"] < 0.02
    assert os.path.exists(os.path.join(out, "trajectory.csv"))


def test_picard_check_subcommand(tmp_path):
    out = str(tmp_path / "pc")
    code = main(["picard-check", os.path.join(SCENARIOS, "picard_gauss.yaml"),
                 "--output", out, "--threads", "1"])
    assert code == 0
    with open(os.path.join(out, "picard_report.json")) as fh:
        rep = json.load(fh)
    assert rep["sup_distance_to_rk4"] < 1e-6
    assert len(rep["windows"]) == 12
    assert all(w["converged"] for w in rep["windows"])


def test_report_subcommand(tmp_path, capsys):
    cfg = write(tmp_path, MINIMAL)
    out = str(tmp_path / "rep")
    main(["simulate", cfg, "--output", out, "--threads", "1"])
    capsys.readouterr()
    assert main(["report", out]) == 0
    text = capsys.readouterr().out
    assert "mean_conserved" in text and "PASS" in text
    assert main(["report", str(tmp_path / "nowhere")]) == 1


def test_env_var_thread_fallback(tmp_path, monkeypatch):
    monkeypatch.setenv("OPINION_LAB_THREADS", "2")
    cfg = write(tmp_path, MINIMAL)
    out = str(tmp_path / "env")
    assert main(["simulate", cfg, "--output", out]) == 0


def test_bundled_scenarios_load():
    for name in ("hk_baseline", "gaussian_decay", "ring_sensing",
                 "typed_confidence", "unequal_radii", "three_block",
                 "picard_gauss"):
        cfg = load_config(os.path.join(SCENARIOS, f"{name}.yaml"))
        assert cfg.kernel is not None
