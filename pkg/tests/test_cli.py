import json
import subprocess
import sys

import pytest

from iginue import cli
from iginue import finite_kernel as fk


def run(argv, capsys):
    code = cli.main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def csv_body(out):
    return [line for line in out.splitlines() if not line.startswith("#")]


# --- parsing helpers -------------------------------------------------------


@pytest.mark.parametrize("text, value", [("1", 1), ("-2.5", -2.5), ("0.3+0.2i", 0.3 + 0.2j),
                                         ("-1-4i", -1 - 4j), ("2j", 2j), ("i", 1j), ("1e-3-2e-2i", 1e-3 - 2e-2j)])
def test_parse_complex(text, value):
    assert cli.parse_complex(text) == value


def test_parse_complex_rejects_garbage():
    with pytest.raises(Exception):
        cli.parse_complex("one")


def test_complex_round_trip():
    for z in (0.1 + 0.2j, -3.3e-9 - 1j, 7.0):
        assert cli.parse_complex(cli.format_complex(z)) == complex(z)


def test_parse_tolerance():
    assert cli.parse_tolerance("mc_sigmas=4") == ("mc_sigmas", 4.0)


# --- exit codes ------------------------------------------------------------


def test_eval_kernel_success(capsys):
    code, out, _ = run(["eval-kernel", "--N", "8", "--alpha", "1", "--lambda", "0.5+0.2i",
                        "--points", "1-0.3i,-0.2+0.9i"], capsys)
    assert code == cli.EXIT_OK
    rows = csv_body(out)
    assert rows[0].startswith("quantity,")
    d11 = [r for r in rows if r.startswith("D11")][0].split(",")
    exact = fk.D11(3, fk.ModelParams(8, 1.0), [0.5 + 0.2j, 1 - 0.3j, -0.2 + 0.9j])
    assert float(d11[7]) == pytest.approx(exact.real, rel=1e-12)


def test_eval_kernel_single_point_example(capsys):
    code, out, _ = run(["eval-kernel", "--N", "2", "--alpha", "0", "--lambda", "1"], capsys)
    assert code == 0
    d11 = [r for r in csv_body(out) if r.startswith("D11")][0].split(",")
    assert float(d11[7]) == pytest.approx(3 * 2.718281828459045 ** -1, rel=1e-14)


@pytest.mark.parametrize("argv", [
    ["eval-kernel", "--N", "8", "--lambda", "0.5", "--points", "0.5"],
    ["eval-kernel", "--N", "1", "--lambda", "0.5"],
    ["eval-kernel", "--N", "8", "--alpha", "0.5", "--lambda", "-1", "--points", "0.3"],
    ["eval-limit", "--regime", "bulk", "--b", "1", "--p", "0.5"],
    ["eval-limit", "--regime", "singular", "--b", "0"],
    ["selftest", "--criteria", "12"],
    ["eval-kernel", "--N", "8", "--lambda", "0.5", "--tol", "no_such_entry=1"],
    ["eval-kernel", "--N", "8", "--lambda", "oops"],
    ["curves", "--figure", "7"],
])
def test_validation_errors(argv, capsys):
    code, out, err = run(argv, capsys)
    assert code == cli.EXIT_VALIDATION
    assert out == ""
    assert err.strip()


def test_error_message_names_operation_and_inputs(capsys):
    _, _, err = run(["eval-kernel", "--N", "8", "--lambda", "0.5", "--points", "0.5"], capsys)
    assert "finite_kernel.D11" in err and "N=8" in err


def test_numerical_failure_exit_code(capsys):
    # a tiny retry budget of eigen-residual tolerance makes every replica fail
    code, out, err = run(["mc-overlap", "--N", "6", "--replicas", "3", "--workers", "1",
                          "--tol", "eig_residual=1e-300"], capsys)
    assert code == cli.EXIT_NUMERICAL
    assert "montecarlo" in err


# --- config echo and replay ------------------------------------------------


def test_config_echo_is_first_line(capsys):
    code, out, _ = run(["eval-limit", "--regime", "singular", "--b", "1", "--chi", "1",
                        "--points", "0.3+0.2i", "--format", "jsonl"], capsys)
    assert code == 0
    lines = [json.loads(x) for x in out.splitlines()]
    cfg = lines[0]["config"]
    assert cfg["regime"] == "singular" and cfg["tolerances"]["coincidence_delta"] == 1e-4
    psi = [x for x in lines[1:] if x["quantity"] == "psi11"][0]
    assert psi["re_value"] == pytest.approx(0.36787944117144233, rel=1e-15)


def test_tolerance_override_is_echoed(capsys):
    _, out, _ = run(["curves", "--figure", "F", "--steps", "2", "--tol", "edge_h_fd=1e-7"], capsys)
    cfg = json.loads(out.splitlines()[0][len("# config: "):])
    assert cfg["tolerances"]["edge_h_fd"] == 1e-7


@pytest.mark.parametrize("argv", [
    ["eval-kernel", "--N", "12", "--alpha", "2", "--lambda", "-1.1-0.4i", "--points", "0.3-0.9i"],
    ["eval-limit", "--regime", "weak", "--rho", "2", "--chi", "0.1", "--points", "-0.2+0.3i,0.4"],
    ["curves", "--figure", "3", "--grid", "4", "--extent", "1"],
    ["mc-overlap", "--N", "5", "--alpha", "1", "--replicas", "20", "--workers", "1", "--seed", "3",
     "--format", "jsonl", "--lambda", "1", "--lambda2", "-1", "--h", "0.5", "--exact"],
    ["converge", "--regime", "singular", "--b", "2", "--Ns", "20,40", "--quantity", "psi11"],
])
def test_replay_is_byte_identical(argv, tmp_path, capsys):
    first = tmp_path / "first.out"
    second = tmp_path / "second.out"
    assert cli.main(argv + ["--output", str(first)]) == 0
    assert cli.main(["replay", str(first), "--output", str(second)]) == 0
    capsys.readouterr()
    assert first.read_bytes() == second.read_bytes()


def test_mc_output_ignores_worker_count(tmp_path, capsys):
    base = ["mc-overlap", "--N", "6", "--replicas", "24", "--seed", "4", "--format", "jsonl"]
    a, b = tmp_path / "a", tmp_path / "b"
    assert cli.main(base + ["--workers", "1", "-o", str(a)]) == 0
    assert cli.main(base + ["--workers", "2", "-o", str(b)]) == 0
    capsys.readouterr()
    body = lambda p: p.read_text().splitlines()[1:]  # noqa: E731
    assert body(a) == body(b)


def test_mc_csv_rows(capsys):
    code, out, _ = run(["mc-overlap", "--N", "4", "--replicas", "3", "--workers", "1", "--format", "csv"], capsys)
    assert code == 0
    rows = csv_body(out)
    assert rows[0] == "replica,eig_index,re_z,im_z,O11_eig,O11_prod"
    assert len(rows) == 1 + 12


# --- curves and selftest ---------------------------------------------------


def test_curves_figure2(capsys):
    code, out, _ = run(["curves", "--figure", "2", "--steps", "8"], capsys)
    assert code == 0
    rows = csv_body(out)
    assert rows[0] == "regime,function,param,re_arg,im_arg,re_val,im_val"
    assert len(rows) == 1 + 7 * 9


def test_selftest_single_criterion(capsys):
    code, out, _ = run(["selftest", "--criteria", "9"], capsys)
    assert code == 0
    assert "# [PASS] criterion 9" in out
    assert [r for r in csv_body(out) if r.startswith("9,")]


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "iginue", "curves", "--figure", "E", "--steps", "2"],
                         capture_output=True, text=True, check=False)
    assert res.returncode == 0
    assert res.stdout.startswith("# config: ")


def test_version(capsys):
    code, out, _ = run(["--version"], capsys)
    assert code == 0 and out.strip()


def test_negative_complex_values_are_accepted(capsys):
    code, out, _ = run(["eval-limit", "--regime", "bulk", "--b", "1", "--p", "-1.1-0.2i",
                        "--chi", "-0.1", "--points", "-0.3+0.1i"], capsys)
    assert code == 0
    cfg = json.loads(out.splitlines()[0][len("# config: "):])
    assert cfg["p"] == "-1.1-0.2i" and cfg["points"] == ["-0.3+0.1i"]
