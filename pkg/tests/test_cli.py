import csv
import io
import json

import jsonschema
import pytest

from mfloop.cli import main
from mfloop.config import load_config, shipped_configs, validate_file
from mfloop.report import REPORT_FILES, load_schema

SHIPPED = shipped_configs()


def write(path, text):
    path.write_text(text)
    return path


def test_shipped_configs_listed():
    assert {"forrester_pair", "forrester_hf_only", "eh_analogue", "stochastic_micro",
            "custom_three_level"} <= set(SHIPPED)


@pytest.mark.parametrize("name", sorted(SHIPPED))
def test_shipped_configs_valid(name, capsys):
    assert validate_file(SHIPPED[name]) == (load_config(SHIPPED[name]), [])
    assert main(["validate", str(SHIPPED[name])]) == 0


def test_negative_budget_diagnostic(tmp_path, capsys):
    text = SHIPPED["eh_analogue"].read_text().replace("B = 30.0", "B = -5.0")
    cfg, diags = validate_file(write(tmp_path / "c.toml", text))
    assert cfg is None and len(diags) == 1
    assert diags[0].key == "budget.B"
    assert main(["validate", str(tmp_path / "c.toml")]) == 2
    assert "budget.B" in capsys.readouterr().out


def test_bridge_count_diagnostic(tmp_path):
    problem = (SHIPPED["custom_three_level"].parent / "problems" / "three_level.toml").read_text()
    start = problem.index("[[bridges]]")
    stop = problem.index("[[bridges]]", start + 1)
    broken = write(tmp_path / "p.toml", problem[:start] + problem[stop:])
    _, diags = validate_file(broken)
    assert [d.key for d in diags] == ["problem.bridges"]


def test_parse_error_has_position(tmp_path):
    bad = write(tmp_path / "bad.toml", 'schema_version = 1\nname = "x"\n[budget\nT = 1\n')
    _, diags = validate_file(bad)
    assert len(diags) == 1 and diags[0].line == 3 and diags[0].column is not None
    assert "line 3" in str(diags[0])


def test_unknown_and_missing_keys(tmp_path):
    text = SHIPPED["eh_analogue"].read_text().replace("n_init = 3", "n_init = 3\nbogus = 1")
    _, diags = validate_file(write(tmp_path / "u.toml", text))
    assert [d.key for d in diags] == ["campaign.bogus"]
    text = SHIPPED["eh_analogue"].read_text().replace('benchmark = "eh_analogue"', 'benchmark = "nope"')
    _, diags = validate_file(write(tmp_path / "m.toml", text))
    assert [d.key for d in diags] == ["problem.benchmark"]


def test_schema_version_required(tmp_path):
    text = SHIPPED["eh_analogue"].read_text().replace("schema_version = 1\n", "")
    _, diags = validate_file(write(tmp_path / "v.toml", text))
    assert any(d.key == "schema_version" for d in diags)


def test_run_report_files(tmp_path, capsys):
    out = tmp_path / "eh"
    assert main(["run", str(SHIPPED["eh_analogue"]), "-o", str(out)]) == 0
    assert "best:" in capsys.readouterr().out
    for f in REPORT_FILES:
        assert (out / f).exists()
    rows = list(csv.reader(io.StringIO((out / "observations.csv").read_text(), newline="")))
    assert rows[0][:3] == ["iteration", "task_id", "level"]
    assert len(rows) == 11
    assert (out / "observations.csv").read_bytes().count(b"\r\n") == 11
    jsonschema.validate(json.loads((out / "report.json").read_text()), load_schema("report"))
    jsonschema.validate(json.loads((out / "summary.json").read_text()), load_schema("summary"))
    grid = list(csv.reader(io.StringIO((out / "surface_grid.csv").read_text(), newline="")))
    assert len(grid) == 1 + 41 * 41
    # report subcommand regenerates the same files
    before = {f: (out / f).read_bytes() for f in REPORT_FILES}
    assert main(["report", str(out)]) == 0
    assert before == {f: (out / f).read_bytes() for f in REPORT_FILES}


def test_stop_and_resume_cli(tmp_path, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    cfg = str(SHIPPED["forrester_pair"])
    assert main(["run", cfg, "-o", str(a)]) == 0
    assert main(["run", cfg, "-o", str(b), "--stop-after", "1"]) == 0
    assert "resume" in capsys.readouterr().out
    assert main(["resume", str(b)]) == 0
    assert (a / "report.json").read_bytes() == (b / "report.json").read_bytes()


def test_integrity_errors(tmp_path, capsys):
    (tmp_path / "empty").mkdir()
    assert main(["report", str(tmp_path / "empty")]) == 4
    assert "checkpoints" in capsys.readouterr().err
    assert main(["report", str(tmp_path / "missing")]) == 4
    assert main(["resume", str(tmp_path / "empty")]) == 4


def test_invalid_run_exit_code(tmp_path):
    bad = write(tmp_path / "b.toml", "schema_version = 1\n")
    assert main(["run", str(bad), "-o", str(tmp_path / "o")]) == 2


def test_failed_campaign_exit_code(tmp_path):
    problem = write(tmp_path / "walled.toml", """
name = "walled"
direction = "maximize"
[domain]
lower = [0.0]
upper = [1.0]
[[levels]]
name = "only"
cost = { base = 1.0, walltime = 1.0 }
model = { kind = "polynomial", terms = [{ coef = 1.0, powers = [1] }] }
hidden = { A = [[1.0]], b = [-1.0] }
""")
    cfg = write(tmp_path / "c.toml", """
schema_version = 1
name = "walled"
[problem]
file = "walled.toml"
[campaign]
n_init = 3
iterations = 2
[budget]
T = 100.0
B = 10.0
""")
    assert main(["validate", str(problem)]) == 0
    assert main(["run", str(cfg), "-o", str(tmp_path / "o")]) == 3


def test_default_output_dir(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("MFLOOP_OUTPUT_DIR", str(tmp_path / "runs"))
    assert main(["run", str(SHIPPED["forrester_hf_only"])]) == 0
    assert (tmp_path / "runs" / "forrester_hf_only" / "report.json").exists()


def test_bench_list(capsys):
    assert main(["bench-list"]) == 0
    out = capsys.readouterr().out
    assert "forrester_pair" in out and "eh_analogue" in out and "stochastic_micro" in out
