import json
import subprocess
import sys

import pytest

from ktsharp.cli import main
from ktsharp.compiler import compile_formula
from ktsharp.runtime import save_model


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_eval_dyck(capsys, corpus):
    assert run(capsys, "eval", corpus / "dyck1.kt", "(()())") == (0, "true\n", "")
    assert run(capsys, "eval", corpus / "dyck1.kt", "())(")[1] == "false\n"
    assert run(capsys, "eval", corpus / "dyck1.crasp", "(())")[1] == "true\n"
    assert run(capsys, "eval", corpus / "dyck1.lm", ")(")[1] == "false\n"


def test_eval_positions(capsys, corpus):
    code, out, _ = run(capsys, "eval", corpus / "dyck1.kt", "()", "--positions")
    assert out == "false true\n"


def test_diff_exhaustive(capsys, corpus):
    code, out, _ = run(capsys, "diff", corpus / "dyck1.kt", "--exhaustive", 8)
    assert code == 0
    assert out.splitlines()[-1] == "0 disagreements"


def test_diff_random_with_json(capsys, corpus, tmp_path):
    path = tmp_path / "report.json"
    code, out, _ = run(capsys, "diff", corpus / "anbncn.crasp", "--random", 50, "--max-len", 30,
                       "--seed", 3, "--json", path)
    assert code == 0 and "0 disagreements" in out
    assert json.loads(path.read_text())["strings_tested"] == 50


def test_diff_reports_counterexample(capsys, corpus, tmp_path, dyck):
    m = compile_formula(dyck, ("(", ")"))
    m.blocks[-1].ffn[-1][0][:] = 0.0
    save_model(m, tmp_path / "bad.json")
    code, out, _ = run(capsys, "diff", corpus / "dyck1.kt", "--exhaustive", 4,
                       "--model", tmp_path / "bad.json")
    assert code == 1 and "counterexample" in out


def test_compile_and_run(capsys, corpus, tmp_path):
    model = tmp_path / "model.json"
    code, out, _ = run(capsys, "compile", corpus / "dyck1.kt", "-o", model)
    assert code == 0 and "2 blocks" in out
    assert run(capsys, "run", model, ")(") == (0, "false\n", "")
    assert run(capsys, "run", model, "(())()") == (0, "true\n", "")


def test_compile_program_with_report(capsys, corpus, tmp_path):
    code, out, _ = run(capsys, "compile", corpus / "dyck1.crasp", "-o", tmp_path / "m.json",
                       "--report", "-")
    assert code == 0 and "modal depth: 2" in out


def test_translate(capsys, corpus):
    code, out, _ = run(capsys, "translate", corpus / "dyck1.kt", "--to", "crasp")
    assert code == 0 and out.startswith("alphabet: ( )")
    code, out, _ = run(capsys, "translate", corpus / "dyck1.crasp", "--to", "kt")
    assert code == 0 and "#[" in out


def test_parse(capsys, corpus):
    code, out, _ = run(capsys, "parse", corpus / "dyck1.kt")
    assert code == 0 and "# modal depth 2" in out


def test_decode(capsys, corpus):
    code, out, _ = run(capsys, "decode", corpus / "dyck1.lm", "--prompt", "((", "--max-steps", 6,
                       "--tie-break", "()EOS")
    assert code == 0 and out.splitlines() == ["((((((", "# stopped: max_steps"]
    code, out, _ = run(capsys, "decode", corpus / "dyck1.lm", "--prompt", "()",
                       "--tie-break", "EOS,(,)")
    assert out.splitlines() == ["()", "# stopped: eos"]


@pytest.mark.parametrize("argv", [
    ["eval", "missing.kt", "ab"],
    ["eval", "{corpus}/dyck1.kt", ""],
    ["decode", "{corpus}/dyck1.kt", "--prompt", "("],
    ["run", "{corpus}/dyck1.kt", "()"],
])
def test_errors_exit_2(capsys, corpus, argv):
    code, _, err = run(capsys, *[a.format(corpus=corpus) for a in argv])
    assert code == 2 and err.startswith("ktsharp: error:")


def test_syntax_error_exit_2(capsys, tmp_path):
    bad = tmp_path / "bad.kt"
    bad.write_text("alphabet: a b\n#[Q_a <= 1\n")
    code, _, err = run(capsys, "parse", bad)
    assert code == 2 and "line 2" in err


def test_usage_error_exit_2(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 2


def test_module_entry_point(corpus):
    proc = subprocess.run([sys.executable, "-m", "ktsharp", "eval", str(corpus / "hello.kt"),
                           "hello"], capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout == "true\n"
