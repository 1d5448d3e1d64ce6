from __future__ import annotations

import json
import shutil
import subprocess
import sys


from pce.cli import main
from pce.experiment import DEFAULT_FIXTURES, DEFAULT_SPEC, REFERENCE_JUDGMENTS

from conftest import golden


def norm(text: str) -> str:
    return " ".join(text.split())


def run(capsys, *argv):
    code = main(list(map(str, argv)))
    out, err = capsys.readouterr()
    return code, out, err


# --- compile / lint ------------------------------------------------------------------------


def test_compile_unit_c(capsys):
    code, out, _ = run(capsys, "compile", "--spec", DEFAULT_SPEC, "--unit", "C")
    assert code == 0
    assert len(out.strip().splitlines()) == 8
    assert norm(out) == norm(golden("unit_c_prompt.txt"))


def test_compile_unit_a_to_file(capsys, tmp_path):
    target = tmp_path / "a.txt"
    code, out, _ = run(capsys, "compile", "--unit", "A", "--out", target)
    assert code == 0 and out == ""
    assert norm(target.read_text()) == norm(golden("unit_a_prompt.txt"))


def test_compile_missing_spec(capsys, tmp_path):
    code, _, err = run(capsys, "compile", "--spec", tmp_path / "nope.json", "--unit", "A")
    assert code == 2
    assert "cannot read spec" in err


def test_compile_malformed_spec(capsys, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{}", encoding="utf-8")
    assert run(capsys, "compile", "--spec", bad, "--unit", "A")[0] == 2


def test_usage_errors(capsys):
    assert run(capsys, "compile", "--unit", "Z")[0] == 2
    assert run(capsys)[0] == 2
    assert run(capsys, "--help")[0] == 0


def test_lint_recorded_prompt(capsys, tmp_path):
    path = tmp_path / "p.txt"
    path.write_text(golden("recorded_c_prompt.txt"), encoding="utf-8")
    code, out, err = run(capsys, "lint", path)
    assert code == 0
    assert out.count("L4") == 1 and "step 8" in out
    assert "0 error(s), 1 warning(s)" in err


def test_lint_errors_exit_one(capsys, tmp_path):
    path = tmp_path / "p.txt"
    path.write_text("1) ACT as a;\n3) ASK b", encoding="utf-8")
    code, out, _ = run(capsys, "lint", path)
    assert code == 1 and "L1" in out


# --- run / extract / score / report ------------------------------------------------------------


def test_run_replay_to_stdout(capsys):
    code, out, _ = run(capsys, "run", "--unit", "B", "--backend", "replay", "--fixtures", DEFAULT_FIXTURES)
    assert code == 0
    data = json.loads(out)
    assert [m["role"] for m in data["messages"]] == ["user", "assistant", "user", "assistant"]


def test_run_live_without_endpoint_is_usage_error(capsys):
    assert run(capsys, "run", "--unit", "A", "--backend", "live")[0] == 2


def test_run_protocol_failure_exits_one(capsys, tmp_path):
    fixtures = tmp_path / "fx"
    fixtures.mkdir()
    reply = json.loads((DEFAULT_FIXTURES / "unit_a.json").read_text())["replies"][0]
    (fixtures / "b.json").write_text(json.dumps({"id": "b", "unit": "B", "replies": [reply]}))
    code, _, err = run(capsys, "run", "--unit", "B", "--fixtures", fixtures)
    assert code == 1 and "ProtocolError" in err


def test_pipeline_through_files(capsys, tmp_path):
    tdir, cdir, rdir = tmp_path / "t", tmp_path / "c", tmp_path / "r"
    for unit in "ABC":
        assert run(capsys, "run", "--unit", unit, "--out", tdir)[0] == 0
    transcripts = sorted(tdir.glob("*.json"))
    assert len(transcripts) == 3

    code, out, _ = run(capsys, "extract", transcripts[0])
    assert code == 0
    extracted = json.loads(out)
    assert extracted["distinct_meals"] == 4
    assert extracted["items_sum"] == "$45"

    code, _, _ = run(capsys, "score", *transcripts, "--manual-from", REFERENCE_JUDGMENTS, "--out", cdir)
    assert code == 0
    cards = sorted(cdir.glob("*.json"))
    assert len(cards) == 3

    code, out, err = run(capsys, "report", *cards, "--out", rdir)
    assert code == 0
    assert "B=C > A" in err
    report = json.loads((rdir / "report.json").read_text())
    assert report["totals"] == {"A": 16, "B": 21, "C": 21}
    assert (rdir / "charts" / "overall.svg").exists()


def test_score_without_manual_leaves_pending(capsys, tmp_path):
    run(capsys, "run", "--unit", "A", "--out", tmp_path)
    code, out, _ = run(capsys, "score", tmp_path / "recorded-a.json")
    assert code == 0
    card = json.loads(out)[0]
    assert card["judgments"]["2.A"]["source"] == "pending"
    assert card["judgments"]["3.B"]["level"] == 2


def test_report_on_pending_cards_fails(capsys, tmp_path):
    run(capsys, "run", "--unit", "A", "--out", tmp_path)
    run(capsys, "score", tmp_path / "recorded-a.json", "--out", tmp_path / "cards")
    code, _, err = run(capsys, "report", tmp_path / "cards" / "unit_A.json")
    assert code == 1 and "missing" in err


def test_extract_plain_text(capsys, tmp_path):
    path = tmp_path / "reply.txt"
    path.write_text("## Monday\n- Lunch: Salad\n", encoding="utf-8")
    code, out, _ = run(capsys, "extract", path)
    assert code == 0
    data = json.loads(out)
    assert data["shopping_list"] is None and data["distinct_meals"] == 1


def test_extract_without_meals_fails(capsys, tmp_path):
    path = tmp_path / "reply.txt"
    path.write_text("nothing here", encoding="utf-8")
    assert run(capsys, "extract", path)[0] == 1


# --- experiment ------------------------------------------------------------------------------------


def test_experiment_with_reference_judgments(capsys, tmp_path):
    code, out, _ = run(capsys, "experiment", "--out", tmp_path, "--manual-from", REFERENCE_JUDGMENTS)
    assert code == 0
    assert "totals: A=16, B=21, C=21" in out
    assert "ranking: B=C > A" in out
    assert len(list((tmp_path / "transcripts").glob("*.json"))) == 3
    assert (tmp_path / "report.csv").exists()
    assert len(list((tmp_path / "charts").glob("*.svg"))) == 5


def test_experiment_pending_without_judgments(capsys, tmp_path):
    code, out, _ = run(capsys, "experiment", "--out", tmp_path)
    assert code == 0
    assert out.count("pending: 1.A, 2.A, 2.B, 3.A, 4.B") == 3
    assert not (tmp_path / "report.json").exists()
    card = json.loads((tmp_path / "cards" / "unit_B.json").read_text())
    assert card["judgments"]["1.A"]["source"] == "pending"


def test_experiment_single_unit(capsys, tmp_path):
    code, out, _ = run(capsys, "experiment", "--unit", "A", "--out", tmp_path)
    assert code == 0
    assert len(list((tmp_path / "transcripts").glob("*.json"))) == 1
    assert len(list((tmp_path / "cards").glob("*.json"))) == 1


def test_experiment_missing_fixture_is_config_error(capsys, tmp_path):
    fixtures = tmp_path / "fx"
    fixtures.mkdir()
    shutil.copy(DEFAULT_FIXTURES / "unit_a.json", fixtures)
    code, _, err = run(capsys, "experiment", "--fixtures", fixtures, "--out", tmp_path / "out")
    assert code == 2
    assert "unit(s) B, C" in err


def test_experiment_isolates_unit_failures(capsys, tmp_path):
    fixtures = tmp_path / "fx"
    shutil.copytree(DEFAULT_FIXTURES, fixtures)
    broken = json.loads((fixtures / "unit_b.json").read_text())
    broken["replies"] = broken["replies"][:1]
    (fixtures / "unit_b.json").write_text(json.dumps(broken))
    code, out, err = run(capsys, "experiment", "--fixtures", fixtures, "--out", tmp_path / "out")
    assert code == 1
    assert "unit B failed" in err
    assert "unit A:" in out and "unit C:" in out


def test_experiment_config_paths_are_relative(capsys, tmp_path):
    shutil.copytree(DEFAULT_FIXTURES, tmp_path / "fixtures")
    shutil.copy(DEFAULT_SPEC, tmp_path / "spec.json")
    shutil.copy(REFERENCE_JUDGMENTS, tmp_path / "judgments.json")
    config = {
        "spec": "spec.json",
        "units": ["B", "C"],
        "backend": {"kind": "replay", "fixtures": "fixtures"},
        "output_dir": "out",
        "manual_judgments": "judgments.json",
    }
    (tmp_path / "exp.json").write_text(json.dumps(config))
    code, out, _ = run(capsys, "experiment", "--config", tmp_path / "exp.json")
    assert code == 0
    assert "totals: B=21, C=21" in out
    assert (tmp_path / "out" / "report.json").exists()


def test_experiment_bad_config(capsys, tmp_path):
    path = tmp_path / "exp.json"
    path.write_text(json.dumps({"spec": "x.json", "backend": {"kind": "carrier-pigeon"}}))
    assert run(capsys, "experiment", "--config", path, "--out", tmp_path)[0] == 2
    path.write_text("{")
    assert run(capsys, "experiment", "--config", path, "--out", tmp_path)[0] == 2


def test_experiment_interactive_rating(monkeypatch, capsys, tmp_path):
    answers = iter(["3", "meets it"] * 20)
    monkeypatch.setattr("builtins.input", lambda prompt="": next(answers))
    code, out, _ = run(capsys, "experiment", "--unit", "A", "--rate", "--out", tmp_path)
    assert code == 0
    assert "unit A: complete" in out
    assert (tmp_path / "report.json").exists()


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "pce", "compile", "--unit", "A"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert proc.stdout.startswith("Create a meal plan")
