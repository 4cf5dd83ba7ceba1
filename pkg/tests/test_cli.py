"""Tests for the command-line front end."""

import json

import pytest

from nskd.boxcore import CanonicalLayout
from nskd.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def test_lp_certify_two_boxes(capsys):
    code, out, _ = run(capsys, "lp", "certify", "--n", "2", "--epsilon", "1/10")
    assert code == 0
    assert "bound: 4/25 (0.16)" in out
    assert "certificate: VERIFIED" in out


def test_lp_certify_factorwise(capsys):
    code, out, _ = run(capsys, "lp", "certify", "--n", "3", "--epsilon", "1/10", "--u", "010")
    assert code == 0
    assert "bound: 8/125 (0.064)" in out


def test_lp_certify_five_boxes_factorwise(capsys, tmp_path):
    out_file = tmp_path / "cert.json"
    code, out, _ = run(capsys, "lp", "certify", "--n", "5", "--epsilon", "1/10", "--out", str(out_file))
    assert code == 0
    assert "bound: 32/3125" in out
    assert "certificate: VERIFIED" in out
    data = json.loads(out_file.read_text(encoding="utf-8"))
    assert "lambda" not in data
    assert len(data["factors"]) == 5


def test_lp_solve_single_box(capsys, tmp_path):
    dump = tmp_path / "lp.json"
    code, out, _ = run(capsys, "lp", "solve", "--epsilon", "0.05", "--dump", str(dump))
    assert code == 0
    assert "optimum: 1/5 (0.2)" in out
    assert json.loads(dump.read_text(encoding="utf-8"))["vars"] == 16


def test_keyrate_boundary(capsys):
    code, out, _ = run(capsys, "keyrate", "--epsilon", "0.25", "--delta", "0")
    assert code == 0
    assert "rate: 0\n" in out
    assert "feasible: no" in out


def test_attack_single_local_box(capsys):
    code, _, err = run(capsys, "attack", "single", "--epsilon", "0.3")
    assert code == 1
    assert "epsilon exceeds 1/4: box is local" in err


def test_attack_single(capsys, tmp_path):
    out_file = tmp_path / "partition.json"
    code, out, _ = run(capsys, "attack", "single", "--epsilon", "1/10", "--out", str(out_file))
    assert code == 0
    assert "distance: 1/5 (0.2)" in out
    assert len(json.loads(out_file.read_text(encoding="utf-8"))["elements"]) == 9


def test_attack_collective(capsys):
    code, out, _ = run(capsys, "attack", "collective", "--epsilon", "3/20", "--n", "2", "--no-expand")
    assert code == 0
    assert "at least one local: 1 (1)" in out
    assert "known fraction: 1/2 (0.5)" in out


def test_attack_product(capsys):
    code, out, _ = run(capsys, "attack", "product", "--epsilon", "1/10", "1/10")
    assert code == 0
    assert "distance: 2/25 (0.08)" in out


def test_box_make_and_validate(capsys, tmp_path):
    path = tmp_path / "box.json"
    assert run(capsys, "box", "make", "--kind", "isotropic", "--epsilon", "1/10", "--out", str(path))[0] == 0
    code, out, _ = run(capsys, "box", "validate", "--box", str(path))
    assert code == 0
    assert "non-signaling: yes" in out
    assert "chsh error: 1/10 (0.1)" in out


def test_box_validate_signaling_file(capsys, tmp_path):
    probs = ["1/2" if y[0] == u[0] else "0/1" for _, x, y, u, v in CanonicalLayout(1).positions()]
    path = tmp_path / "signaling.json"
    path.write_text(json.dumps({"n_pairs": 1, "arithmetic": "rational", "probs": probs}), encoding="utf-8")
    code, out, _ = run(capsys, "box", "validate", "--box", str(path))
    assert code == 1
    assert "interface A0 signals" in out


def test_box_depolarize_and_local(capsys, tmp_path):
    quantum = tmp_path / "quantum.json"
    run(capsys, "box", "make", "--kind", "quantum", "--out", str(quantum))
    code, out, _ = run(capsys, "box", "depolarize", "--box", str(quantum))
    assert code == 0
    assert json.loads(out)["probs"][0] == "13/32"
    code, out, _ = run(capsys, "box", "local", "--box", str(quantum))
    assert code == 0
    assert "local: no" in out


def test_box_make_prints_json(capsys):
    code, out, _ = run(capsys, "box", "make", "--kind", "deterministic", "--strategy", "0", "1", "1", "0")
    assert code == 0
    assert json.loads(out)["probs"][0] == "0/1"


def test_missing_box_file(capsys, tmp_path):
    code, _, err = run(capsys, "box", "validate", "--box", str(tmp_path / "nope.json"))
    assert code == 1
    assert "not found" in err


def test_unknown_subcommand_exits_with_usage():
    with pytest.raises(SystemExit) as excinfo:
        main(["frobnicate"])
    assert excinfo.value.code == 2


def test_bad_rational_flag():
    with pytest.raises(SystemExit) as excinfo:
        main(["keyrate", "--epsilon", "x/y", "--delta", "0"])
    assert excinfo.value.code == 2


@pytest.mark.parametrize("value", ["inf", "-Infinity", "nan", "1e999999999"])
def test_non_finite_rational_flag(value):
    with pytest.raises(SystemExit) as excinfo:
        main(["keyrate", "--epsilon", value, "--delta", "0"])
    assert excinfo.value.code == 2


def test_format_is_checked_per_command(capsys):
    with pytest.raises(SystemExit) as excinfo:
        main(["lp", "solve", "--epsilon", "1/10", "--format", "csv"])
    assert excinfo.value.code == 2
    code, out, _ = run(capsys, "region", "--steps", "2", "--format", "json")
    assert code == 0
    assert json.loads(out)[0]["delta"] == 0


@pytest.mark.parametrize("argv, construct", [
    (["box", "make", "--help"], "PR"),
    (["lp", "certify", "--help"], "dual certificate"),
    (["attack", "collective", "--help"], "local box"),
    (["protocol", "run", "--help"], "key agreement"),
])
def test_help_names_construct(capsys, argv, construct):
    with pytest.raises(SystemExit) as excinfo:
        main(argv)
    assert excinfo.value.code == 0
    assert construct in capsys.readouterr().out


def test_region_output_is_deterministic(capsys):
    first = run(capsys, "region", "--steps", "5")[1]
    second = run(capsys, "region", "--steps", "5")[1]
    assert first == second
    lines = first.splitlines()
    assert lines[0] == "delta,epsilon,rate,feasible,epsilon_max"
    assert len(lines) == 26


def test_region_curve_json(capsys):
    code, out, _ = run(capsys, "region", "--curve", "--steps", "3", "--format", "json")
    assert code == 0
    rows = json.loads(out)
    assert [round(r["p_noise"], 12) for r in rows] == [0.0, 0.05, 0.1]


def test_protocol_run_is_deterministic(capsys, tmp_path):
    outputs = []
    for name in ("a.json", "b.json"):
        path = tmp_path / name
        code, out, _ = run(capsys, "protocol", "run", "--n", "16", "--k", "2048", "--seed", "3",
                           "--out", str(path))
        assert code == 0
        assert "status: ok" in out
        assert "keys agree: yes" in out
        outputs.append(path.read_bytes())
    assert outputs[0] == outputs[1]


def test_protocol_run_from_config(capsys, tmp_path):
    config = tmp_path / "config.json"
    config.write_text(json.dumps({"n": 16, "k": 512, "seed": 1,
                                  "source": {"kind": "isotropic", "epsilon": 0.3}}), encoding="utf-8")
    code, out, _ = run(capsys, "protocol", "run", "--config", str(config))
    assert code == 0
    assert "status: aborted (outside feasible region)" in out


def test_protocol_run_needs_length(capsys):
    code, _, err = run(capsys, "protocol", "run", "--k", "10")
    assert code == 1
    assert "needs 'n'" in err
