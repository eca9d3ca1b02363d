import csv
import io
import json
import math

import pytest

from springsim.cli import build_parser, main


@pytest.fixture
def files(tmp_path):
    one = tmp_path / "one_mass.json"
    one.write_text('{"masses": [1.0], "springs": [[1, 1, 1.0]]}')
    tri = tmp_path / "tri.json"
    tri.write_text('{"masses": [1, 2, 1.5], "springs": [[1, 2, 1.0], [2, 3, 0.5], [1, 1, 0.7]]}')
    xx = tmp_path / "xx.json"
    xx.write_text('{"q": 2, "gates": [["X", 1], ["X", 1]]}')
    bad = tmp_path / "bad.json"
    bad.write_text('{"q": 2, "gates": [["H"], ["H"]]}')
    return {"one": str(one), "tri": str(tri), "xx": str(xx), "bad": str(bad)}


def run(capsys, argv):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def test_simulate_single_mass(files, capsys):
    code, out, _ = run(capsys, ["simulate", "--network", files["one"], "--t", "3.14159",
                                "--backend", "exact"])
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert float(rows[-1]["x_1"]) == pytest.approx(math.cos(3.14159), abs=1e-12)


def test_simulate_backends(files, capsys):
    for backend in ("verlet", "hamiltonian"):
        code, out, _ = run(capsys, ["simulate", "--network", files["tri"], "--t", "2",
                                    "--backend", backend, "--samples", "4"])
        assert code == 0
        assert len(out.splitlines()) == 5
    code, _, err = run(capsys, ["simulate", "--network", files["tri"], "--t", "2", "--backend", "qpe"])
    assert code == 2 and "eps_pe" in err


def test_glued_trees_reduced(capsys):
    code, out, _ = run(capsys, ["glued-trees", "--n", "20", "--mode", "reduced", "--tmax", "80"])
    assert code == 0
    rows = [(float(r["t"]), float(r["exit_velocity_sq"])) for r in csv.DictReader(io.StringIO(out))]
    assert max(v for t, v in rows if 30 <= t <= 50) > 0.05


def test_glued_trees_solve_and_cap(capsys):
    code, out, _ = run(capsys, ["glued-trees", "--n", "3", "--mode", "solve", "--seed", "2"])
    assert code == 0 and json.loads(out)["correct"]
    code, _, err = run(capsys, ["glued-trees", "--n", "12", "--mode", "full"])
    assert code == 3 and err


def test_bqp_subcommands(files, capsys):
    code, out, _ = run(capsys, ["bqp", "perfect-chain", "--L", "10"])
    assert code == 0 and json.loads(out)["inequality_ok"] is True
    code, out, _ = run(capsys, ["bqp", "compile", "--circuit", files["xx"]])
    payload = json.loads(out)
    assert code == 0 and payload["checks"]["diagonal_four"]
    assert len(payload["network"]["masses"]) == 24
    code, out, _ = run(capsys, ["bqp", "run", "--circuit", files["xx"], "--t", "7.7"])
    assert code == 0 and json.loads(out)["identity_residual"] < 1e-8
    code, _, _ = run(capsys, ["bqp", "decide", "--circuit", files["xx"], "--times", "7.7",
                              "--yes-threshold", "0.5", "--no-threshold", "1e-6"])
    assert code == 4
    code, _, err = run(capsys, ["bqp", "compile", "--circuit", files["bad"]])
    assert code == 2 and "consecutive" in err


def test_blockenc_verify(files, capsys):
    code, out, _ = run(capsys, ["blockenc", "verify", "--network", files["tri"], "--r", "5"])
    payload = json.loads(out)
    assert code == 0 and payload["within_4x"]
    assert payload["error_H"] <= payload["error_B"] + 1e-12


def test_estimate(files, capsys):
    argv = ["estimate", "kinetic", "--network", files["tri"], "--subset", "1,2", "--t", "1",
            "--seed", "4"]
    code, out, _ = run(capsys, argv)
    assert code == 0
    again = run(capsys, argv)[1]
    assert out == again
    code, out, _ = run(capsys, ["estimate", "potential", "--network", files["tri"],
                                "--subset", "1-2,1-1", "--t", "1"])
    assert code == 0 and json.loads(out)["quantity"] == "U_V/E"
    code, _, _ = run(capsys, ["estimate", "potential", "--network", files["tri"], "--subset", "x"])
    assert code == 2


def test_determinism(files, capsys):
    argv = ["simulate", "--network", files["tri"], "--t", "5", "--samples", "3"]
    assert run(capsys, argv)[1] == run(capsys, argv)[1]


def test_output_file(files, tmp_path, capsys):
    out_path = tmp_path / "pc.json"
    code, out, _ = run(capsys, ["bqp", "perfect-chain", "--L", "2", "--out", str(out_path)])
    assert code == 0 and out == ""
    assert json.loads(out_path.read_text())["persymmetric"]


def test_bad_inputs(files, capsys):
    assert run(capsys, ["simulate", "--network", "/nonexistent.json", "--t", "1"])[0] == 2
    assert run(capsys, ["simulate", "--network", files["one"], "--t", "1", "--x0", "1,2"])[0] == 2
    with pytest.raises(SystemExit) as exc:
        main(["simulate", "--network", files["one"], "--t", "1", "--bogus"])
    assert exc.value.code == 2


@pytest.mark.parametrize("argv", [["simulate"], ["glued-trees"], ["bqp", "run"], ["bqp", "compile"],
                                  ["bqp", "perfect-chain"], ["bqp", "decide"], ["blockenc", "verify"],
                                  ["estimate", "kinetic"], ["estimate", "potential"]])
def test_help_lists_flags(argv, capsys):
    with pytest.raises(SystemExit) as exc:
        build_parser().parse_args(argv + ["--help"])
    assert exc.value.code == 0
    assert "--seed" in capsys.readouterr().out
