import json

import pytest

from cbogames.cli import main
from cbogames.config import parse_config

FAST = ["--params.t_end", "1.0", "--params.dt", "0.05"]


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_gamma_prints_half(capsys):
    code, out, _ = run(capsys, "gamma", "--q", "8", "--p", "2", "--pm", "1")
    assert code == 0 and out.strip() == "0.5"


def test_gamma_domain_error(capsys):
    code, out, err = run(capsys, "gamma", "--q", "3", "--p", "2", "--pm", "1")
    assert code == 1 and out == "" and len(err.strip().splitlines()) == 1


def test_selftest_passes(capsys):
    code, out, _ = run(capsys, "selftest")
    assert code == 0 and "FAIL" not in out


def test_unknown_key_exit_one(capsys, tmp_path):
    code, _, err = run(capsys, "variance-decay", "--params.lamda", "1",
                       "--output.directory", str(tmp_path))
    assert code == 1 and "params.lambda" in err and len(err.strip().splitlines()) == 1


def test_variance_decay_with_config_file(capsys, tmp_path):
    cfg = tmp_path / "decay.ini"
    out_dir = tmp_path / "out"
    cfg.write_text(f"experiment = variance-decay\n[game]\nname = decoupled-quadratic\n"
                   f"[particles]\nN = 30\n[seeds]\ncount = 2\n"
                   f"[output]\ndirectory = {out_dir}\nformats = csv, json\n")
    code, out, _ = run(capsys, "variance-decay", "--config", str(cfg), *FAST)
    report = json.loads((out_dir / "report.json").read_text())
    assert code == (0 if report["passed"] else 2)
    header = (out_dir / "v_trace.csv").read_text().splitlines()[0]
    assert header == "time,V_1,V_2,V_total"
    assert not (out_dir / "v_trace.png").exists()
    # the echoed config parses back to the same run configuration
    echoed = parse_config(report["config"]["run_config"])
    assert echoed == parse_config(cfg, {"params.t_end": "1.0", "params.dt": "0.05"})


def test_gate_failure_exit_two(capsys, tmp_path):
    code, out, _ = run(capsys, "variance-decay", "--particles.N", "1", "--params.sigma", "0",
                       "--seeds.count", "1", "--output.directory", str(tmp_path), *FAST)
    assert code == 2 and "FAIL decay_slope" in out


def test_byte_identical_reruns(capsys, tmp_path):
    args = ["mf-rate", "--particles.n_list", "4,8,16", "--particles.n_ref", "64",
            "--seeds.count", "2", "--output.formats", "csv", *FAST]
    run(capsys, *args, "--output.directory", str(tmp_path / "a"))
    run(capsys, *args, "--output.directory", str(tmp_path / "b"), "--workers", "4")
    a = (tmp_path / "a" / "mf_rate.csv").read_bytes()
    assert a == (tmp_path / "b" / "mf_rate.csv").read_bytes()
    assert a.splitlines()[0] == b"N,gap,gap_stderr"


def test_iid_csv_header(capsys, tmp_path):
    run(capsys, "iid-consensus", "--particles.n_list", "10,100,1000", "--analysis.trials", "5",
        "--output.directory", str(tmp_path), "--output.formats", "csv")
    assert (tmp_path / "iid.csv").read_text().splitlines()[0] == "N,err,err_stderr"


@pytest.mark.parametrize("exp,extra,png", [
    ("simulate", ["--particles.N", "10"], "consensus.png"),
    ("stability-probe", ["--analysis.trials", "50"], "stability.png"),
    ("moment-monitor", ["--particles.N", "10", "--seeds.count", "1"], "moments.png"),
])
def test_experiments_write_outputs(capsys, tmp_path, exp, extra, png):
    code, out, _ = run(capsys, exp, *extra, *FAST, "--output.directory", str(tmp_path))
    assert code in (0, 2)
    assert (tmp_path / "report.json").exists() and (tmp_path / png).exists()
    assert ("PASS" in out) or ("FAIL" in out)


def test_keys_listing(capsys):
    code, out, _ = run(capsys, "keys")
    assert code == 0 and "params.lambda" in out
