import json
import math

import pytest

from orliczkit import cli
from orliczkit.errors import ConfigError
from orliczkit.scenario import demo_scenarios, load_scenario, parse_scenario


def run(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_demo_scenarios_all_parse():
    names = demo_scenarios()
    for expected in ("five_atoms", "same_phi", "example_a_mult_decay", "example_a_mult_growth",
                     "example_a_composition", "example_b", "identity_interval", "bad_piecewise"):
        assert expected in names
    for name in names:
        sc = load_scenario(name)
        assert sc.commentary


def test_report_five_atoms(tmp_path, capsys):
    out = tmp_path / "r.json"
    code, text, _ = run(capsys, "report", "--scenario", "five_atoms", "--out", str(out))
    assert code == 0
    rep = json.loads(out.read_text())
    assert rep["schema"] == 1
    assert rep["compact"] == "compact"
    assert rep["beta"] == {"forall": 0.0, "exists": 0.0}
    assert "Cor 4.4" in rep["rules"]["reasons"][0]
    assert rep["oracle"]["label"] == "empirical lower bound"
    assert {"version", "generated"} <= set(rep["meta"])
    assert "compact: compact" in text


def test_report_to_stdout_without_out(capsys):
    code, text, _ = run(capsys, "report", "--scenario", "five_atoms")
    assert code == 0
    body = json.loads(text[text.index("{"):])
    assert body["scenario"] == "five_atoms"


def test_essnorm_same_phi(tmp_path, capsys):
    out = tmp_path / "e.json"
    code, _, _ = run(capsys, "essnorm", "--scenario", "same_phi", "--out", str(out))
    rep = json.loads(out.read_text())
    assert code == 0
    assert rep["beta"]["forall"] == pytest.approx(1.0, abs=1e-3)
    assert rep["beta"]["exists"] == pytest.approx(1.0, abs=1e-3)


def test_infinity_is_encoded_as_string(tmp_path, capsys):
    out = tmp_path / "e.json"
    run(capsys, "essnorm", "--scenario", "example_a_mult_decay", "--out", str(out))
    text = out.read_text()
    assert '"exists": "+inf"' in text
    assert "Infinity" not in text


def test_validate_bad_piecewise(capsys):
    code, text, _ = run(capsys, "validate", "--scenario", "bad_piecewise")
    assert code == 2
    assert "midpoint_convex failed" in text


def test_validate_good_scenario(capsys):
    code, text, _ = run(capsys, "validate", "--scenario", "same_phi")
    assert code == 0 and "valid: True" in text


def test_norm_subcommand(capsys):
    code, text, _ = run(capsys, "norm", "--scenario", "same_phi", "--function", "1/j")
    assert code == 0
    val = float(text.split("N_phi1(1/j) = ")[1].split()[0])
    assert val == pytest.approx(math.sqrt(math.pi ** 2 / 12), rel=1e-5)


def test_norm_per_channel_function(capsys):
    code, text, _ = run(capsys, "norm", "--scenario", "example_b", "--function",
                        '{"interval": "t", "atoms": "1/j^2"}')
    assert code == 0 and "N_phi2" in text


def test_config_error_exit_code_and_line(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{\n  "phi1": {"kind": "power", "p": 2},\n  "phi2": {"kind": "power", "p": 0.5},\n'
                   '  "space": {"atoms": [{"w": 1}]},\n  "operator": {"op": "mult", "u": "1"}\n}\n')
    code, _, err = run(capsys, "compact", "--scenario", str(bad))
    assert code == 2
    assert "line 3" in err and "phi2" in err


def test_json_syntax_error_has_line_and_col(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{\n  "phi1": ,\n}')
    code, _, err = run(capsys, "compact", "--scenario", str(bad))
    assert code == 2 and "line 2 col" in err


def test_missing_file(capsys):
    code, _, err = run(capsys, "compact", "--scenario", "/nonexistent/x.json")
    assert code == 2 and "not found" in err


def test_expression_error_is_config_error(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"phi1": {"kind": "power", "p": 2}, "phi2": {"kind": "power", "p": 2},
                               "space": {"atoms": [{"w": 1}]},
                               "operator": {"op": "mult", "u": "1 +* j"}}))
    code, _, err = run(capsys, "bounded", "--scenario", str(bad))
    assert code == 2 and "operator" in err


def test_convergence_error_exit_code(monkeypatch, capsys):
    from orliczkit.errors import ConvergenceError

    def boom(*a, **k):
        raise ConvergenceError("did not converge")

    monkeypatch.setattr(cli, "boundedness_certificate", boom)
    code, _, err = run(capsys, "bounded", "--scenario", "five_atoms")
    assert code == 3 and "did not converge" in err


def test_unknown_top_level_field():
    with pytest.raises(ConfigError, match="unknown"):
        parse_scenario({"phi1": {}, "phi2": {}, "space": {}, "operator": {}, "colour": 1})


def test_flags_override_options(tmp_path, capsys):
    out = tmp_path / "o.json"
    run(capsys, "oracle", "--scenario", "five_atoms", "--seed", "5", "--samples", "20",
        "--keep", "2", "--keep", "4", "--out", str(out))
    rep = json.loads(out.read_text())
    assert rep["oracle"]["settings"]["seed"] == 5
    assert sorted(rep["oracle"]["truncation_distance"]) == ["2", "4"]


def test_every_verdict_names_a_rule(tmp_path, capsys):
    for name in ("five_atoms", "same_phi", "identity_interval", "example_a_mult_growth"):
        out = tmp_path / f"{name}.json"
        run(capsys, "compact", "--scenario", name, "--out", str(out))
        rep = json.loads(out.read_text())
        reason = rep["rules"]["reasons"][0]
        assert rep["rules"]["compact"]
        assert any(tag in reason for tag in ("Cor ", "Thm ", "unbounded"))


def test_jsonable():
    assert cli.jsonable({"a": (1, float("inf")), "b": float("-inf"), "c": float("nan")}) == \
        {"a": [1, "+inf"], "b": "-inf", "c": "nan"}
