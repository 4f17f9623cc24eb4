import json
import subprocess
import sys

import pytest

from biquadric.cli import COMMANDS, build_parser, main, read_config_file


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_count_m3_example(capsys):
    code, out, _ = run(["count", "m3", "--s", "7", "--x", "1,1,1,1,1,1,-1", "--p", "1"], capsys)
    assert code == 0
    doc = json.loads(out)
    assert doc["schema_version"] == 1 and doc["rows"][0]["value"] == 25


def test_unknown_flag_exits_64(capsys):
    code, _, err = run(["count", "m3", "--x", "1,-1", "--p", "2", "--bogus"], capsys)
    assert code == 64 and "usage" in err


def test_unknown_subcommand_exits_64(capsys):
    assert run(["count", "m9"], capsys)[0] == 64
    assert run([], capsys)[0] == 64


def test_no_prefix_abbreviation(capsys):
    assert run(["count", "m3", "--x", "1,-1", "--p", "2", "--se", "1"], capsys)[0] == 64


def test_missing_option_exits_64(capsys):
    assert run(["count", "m3", "--x", "1,-1"], capsys)[0] == 64


def test_precondition_exits_2(capsys):
    assert run(["count", "m3", "--s", "2", "--x", "1,1,1", "--p", "3"], capsys)[0] == 2
    assert run(["density", "sigma", "--x", "1,0,-1,1,1"], capsys)[0] == 2


def test_budget_exits_3(capsys):
    code, _, err = run(["count", "m3", "--x", "1,1,-1", "--p", "100000", "--memory-budget", "1000"], capsys)
    assert code == 3 and "budget" in err
    assert run(["count", "m3", "--x", "1,1,-1", "--p", "50", "--p-cap", "10"], capsys)[0] == 3
    assert run(["arith", "psi", "--q", "6", "--s", "7"], capsys)[0] == 3


def test_config_file_and_override(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# comment\ns = 7\nx = 1,1,1,1,1,1,-1\np = 2\nformat = csv\n", encoding="utf-8")
    code, out, _ = run(["count", "m3", "--config", str(cfg)], capsys)
    assert code == 0 and out.splitlines()[1].endswith(",2,529")
    code, out, _ = run(["count", "m3", "--config", str(cfg), "--p", "1"], capsys)
    assert out.splitlines()[1].endswith(",1,25")


def test_config_unknown_key(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("colour = blue\n", encoding="utf-8")
    assert run(["count", "m3", "--config", str(cfg), "--x", "1,-1", "--p", "1"], capsys)[0] == 64


def test_read_config_file(tmp_path):
    p = tmp_path / "c.cfg"
    p.write_text("--q-cap = 1e5\nseed=9 # trailing\n", encoding="utf-8")
    assert read_config_file(str(p)) == {"q_cap": "1e5", "seed": "9"}


def test_csv_output_file(tmp_path, capsys):
    out = tmp_path / "o.csv"
    code, stdout, _ = run(["density", "slice", "--w", "1,4", "--format", "csv", "--out", str(out)], capsys)
    assert code == 0 and stdout == ""
    assert out.read_bytes() == b"schema_version,w,rational,radicand,value\n1,1 4,1/2,17,2.0615528128088303\n"


def test_scientific_height(capsys):
    code, out, _ = run(["count", "global", "--s", "7", "--B", "1e3"], capsys)
    assert code == 0 and json.loads(out)["rows"][0]["value"] == 13596352


def test_dry_run_computes_nothing(capsys):
    code, out, _ = run(["count", "global", "--s", "7", "--B", "1e9", "--dry-run"], capsys)
    row = json.loads(out)["rows"][0]
    assert code == 0 and "estimate_max_table" in row and "value" not in row


@pytest.mark.parametrize("group,leaf", [(g, l) for g, ls in COMMANDS.items() for l in ls])
def test_every_leaf_has_dry_run(group, leaf, capsys):
    code, out, _ = run([group, leaf, "--s", "7", "--dry-run"], capsys)
    assert code in (0, 64)
    if code == 0:
        assert json.loads(out)["rows"][0]["command"] == f"{group} {leaf}"


def test_help_documents_csv(capsys):
    with pytest.raises(SystemExit):
        build_parser().parse_args(["count", "m3", "--help"])
    assert "schema_version" in capsys.readouterr().out


def test_byte_identical_across_threads(capsys):
    argv = ["report", "asymptotic", "--s", "7", "--B-grid", "100,1000", "--seed", "5"]
    _, a, _ = run(argv + ["--threads", "1"], capsys)
    _, b, _ = run(argv + ["--threads", "2"], capsys)
    assert a == b


def test_byte_identical_monte_carlo(capsys):
    argv = ["constants", "tau", "--s", "5", "--sigma-m", "5", "--rho-m", "8", "--replicates", "3", "--seed", "11"]
    _, a, _ = run(argv, capsys)
    _, b, _ = run(argv + ["--threads", "2"], capsys)
    assert a == b and json.loads(a)["rows"][0]["route"] == "sigma"


def test_env_thread_default(monkeypatch, capsys):
    monkeypatch.setenv("BIQUADRIC_THREADS", "2")
    code, out, _ = run(["count", "global", "--s", "5", "--B", "100", "--dry-run"], capsys)
    assert json.loads(out)["rows"][0]["threads"] == 2


def test_constants_peyre(capsys):
    code, out, _ = run(["constants", "peyre", "--s", "7"], capsys)
    row = json.loads(out)["rows"][0]
    assert code == 0 and row["c_peyre"] > 0 and row["relative_gap"] < 1e-6
    assert {"zeta_s", "zeta_s1", "tau", "sigma_product"} <= set(row)


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "biquadric", "arith", "psi", "--q", "4", "--s", "2",
                          "--mode", "both", "--format", "csv"], capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.splitlines()[1] == "1,4,2,96,96"


def test_verify_tau_crosscheck_small(capsys):
    code, out, _ = run(["verify", "tau-crosscheck", "--s", "5", "--tol", "0.05", "--sigma-m", "7",
                        "--rho-m", "10", "--replicates", "4"], capsys)
    row = json.loads(out)["rows"][0]
    assert code == 0 and row["relative_difference"] < 0.05 and set(row) >= {"sigma_side", "rho_side"}
