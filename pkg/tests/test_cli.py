from __future__ import annotations

import json

import pytest

from dockmine import __version__
from dockmine.cli import main
from conftest import RULE_FIXTURES
from synth import PIP_EXPECTED, pip_corpus
from tables import SHARED_SUBSET

PIP_EXAMPLE = "FROM python:3.7\nWORKDIR /app\nCOPY requirements.txt .\nRUN pip install --no-cache-dir -r requirements.txt\n"


@pytest.fixture
def pip_file(tmp_path):
    path = tmp_path / "Dockerfile"
    path.write_text(PIP_EXAMPLE)
    return path


def test_parse_ast_listing(pip_file, capsys):
    assert main(["parse", str(pip_file)]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert [line.split("\t")[1] for line in lines] == ["FROM", "WORKDIR", "COPY", "RUN"]
    start_end, _, fields = lines[0].split("\t")
    assert start_end == "1-1" and json.loads(fields)["tag"] == "3.7"


def test_parse_dump_ir(pip_file, capsys):
    assert main(["parse", str(pip_file), "--dump-ir"]) == 0
    toks = [line.split("\t")[2] for line in capsys.readouterr().out.splitlines()]
    assert toks[0] == "FROM-IMAGE-[python]-TAG-[SPECIFIC]"
    assert toks[-5:] == ["SC-[pip]", "SC-[pip]-ARG-[install]", "SC-[pip]-ARG-[--no-cache-dir]",
                         "SC-[pip]-ARG-[-r]", "SC-[pip]-ARG-[FILE-PIP-REQUIREMENT.TXT]"]


def test_parse_errors(tmp_path, capsys):
    assert main(["parse", str(tmp_path / "missing")]) == 2
    bad = tmp_path / "Dockerfile"
    bad.write_text("FROM a\nRUN echo 'x\n")
    assert main(["parse", str(bad)]) == 2
    assert "dockmine:" in capsys.readouterr().err


def _write_corpus(root, files):
    for rel, text in files:
        p = root / rel
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_text(text)
    return root


def test_mine_report(tmp_path):
    root = _write_corpus(tmp_path / "corpus", pip_corpus())
    out = tmp_path / "report.json"
    assert main(["mine", str(root), "--out", str(out), "--jobs", "1"]) == 0
    rep = json.loads(out.read_text())
    assert rep["min_support"] == 0.4 and rep["max_len"] == 12
    (pip,) = [g for g in rep["groups"] if g["command"] == "pip"]
    assert any(all(t in p["tokens"] for t in PIP_EXPECTED) for p in pip["patterns"])


def test_mine_single_file_support_one(tmp_path, capsys):
    root = _write_corpus(tmp_path / "c", [("Dockerfile", "FROM a:1\nRUN rm -rf /tmp/x\n")])
    assert main(["mine", str(root), "--jobs", "1"]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["groups"] and all(p["support"] == 1.0 for g in rep["groups"] for p in g["patterns"])


def test_mine_errors(tmp_path):
    assert main(["mine", str(tmp_path), "--min-support", "1.01"]) == 2
    assert main(["mine", str(tmp_path), "--min-support", "0"]) == 2
    assert main(["mine", str(tmp_path)]) == 2  # no eligible files
    assert main(["mine", str(tmp_path / "nope")]) == 2


def test_check_bad_and_good(capsys):
    assert main(["check", str(RULE_FIXTURES / "02_bad.Dockerfile"), "--jobs", "1"]) == 1
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == 1 and "[MANDATORY] rule 2 " in lines[0]
    assert main(["check", str(RULE_FIXTURES / "02_good.Dockerfile"), "--jobs", "1"]) == 0
    assert capsys.readouterr().out == ""


def test_check_encouraged_only_exits_zero(capsys):
    assert main(["check", str(RULE_FIXTURES / "03_bad.Dockerfile"), "--jobs", "1"]) == 0
    assert "[ENCOURAGED] rule 3 " in capsys.readouterr().out


def test_check_only_and_records(capsys):
    code = main(["check", str(RULE_FIXTURES), "--only", ",".join(map(str, SHARED_SUBSET)),
                 "--format", "records", "--jobs", "1"])
    assert code == 1
    recs = [json.loads(line) for line in capsys.readouterr().out.splitlines()]
    assert {r["rule_id"] for r in recs} == set(SHARED_SUBSET)
    assert all(set(r) == {"file", "line_start", "line_end", "rule_id", "level", "message"} for r in recs)
    assert all(r["file"].endswith("_bad.Dockerfile") for r in recs)


def test_check_parallel_is_deterministic(capsys):
    main(["check", str(RULE_FIXTURES), "--jobs", "1"])
    serial = capsys.readouterr().out
    main(["check", str(RULE_FIXTURES), "--jobs", "2"])
    assert capsys.readouterr().out == serial


def test_check_errors(tmp_path, capsys):
    assert main(["check", str(tmp_path / "missing")]) == 2
    bad_rules = tmp_path / "r.yaml"
    bad_rules.write_text("rules: [{id: 1}]\n")
    assert main(["check", str(RULE_FIXTURES / "02_bad.Dockerfile"), "--rules", str(bad_rules)]) == 2
    assert main(["check", str(RULE_FIXTURES), "--only", "x"]) == 2


def test_version(capsys):
    assert main(["--version"]) == 0
    assert capsys.readouterr().out.strip() == f"dockmine {__version__} (rule catalog 1.0)"
