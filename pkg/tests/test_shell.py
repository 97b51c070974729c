from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dockmine.shell import (
    AssignStatement,
    CallStatement,
    ShellSyntaxError,
    classify_tokens,
    parse_shell,
    tokenize,
)


def _calls(script):
    return [(c.command, c.args) for c in parse_shell(script).calls]


def test_apt_get_install_argument():
    assert _calls("apt-get install unzip") == [("apt-get", ["install", "unzip"])]


def test_unzip_as_command():
    assert _calls("unzip example.zip") == [("unzip", ["example.zip"])]


def test_empty_script():
    ast = parse_shell("")
    assert ast.statements == [] and not ast.has_control_flow


def test_two_calls_in_order():
    # hand-built expected AST (same shape a reference shell parser reports)
    assert _calls("wget https://a.com/f.zip && unzip f.zip") == [
        ("wget", ["https://a.com/f.zip"]),
        ("unzip", ["f.zip"]),
    ]


def test_quotes_and_escapes():
    assert _calls("echo 'a b' \"c $HOME d\" e\\ f") == [("echo", ["a b", "c $HOME d", "e f"])]


def test_command_substitution_is_one_argument():
    ((cmd, args),) = _calls('echo $(dpkg --print-architecture | tr a b) `uname -m`')
    assert cmd == "echo" and len(args) == 2


def test_assignments_and_redirections():
    ast = parse_shell("A=1 B=2 make >/dev/null 2>&1")
    assert [type(s) for s in ast.statements] == [AssignStatement, AssignStatement, CallStatement]
    call = ast.calls[0]
    assert call.command == "make" and call.args == []
    assert call.redirections == [(">", "/dev/null"), ("2>&", "1")]


def test_connectors_and_subshell_flattening():
    assert [c for c, _ in _calls("a || b; c | d & e\n(f; g) && { h; }")] == list("abcdefgh")


@pytest.mark.parametrize("script", ["if true; then a; fi", "for x in 1 2; do b; done",
                                    "while false; do c; done", "until x; do y; done",
                                    "case $A in a) d ;; esac"])
def test_control_flow_flag(script):
    assert parse_shell(script).has_control_flow


def test_case_patterns_not_calls():
    ast = parse_shell("case $A in\n  x|y) echo one ;;\n  *) echo two ;;\nesac")
    assert [c.command for c in ast.calls] == ["echo", "echo"]


@pytest.mark.parametrize("script", ["echo 'x", 'echo "x', "echo $(ls", "echo `ls", "echo >"])
def test_shell_syntax_errors(script):
    with pytest.raises(ShellSyntaxError):
        parse_shell(script)


# Wrapper peeling up to depth 3, hand-labelled expectations.
WRAPPED = [
    ("sudo rm -rf /tmp/x", ("rm", ["-rf", "/tmp/x"])),
    ("sudo -u app pip install x", ("pip", ["install", "x"])),
    ("env A=1 B=2 make all", ("make", ["all"])),
    ("nice -n 5 tar -xf a.tar", ("tar", ["-xf", "a.tar"])),
    ("time ls", ("ls", [])),
    ("xargs -I{} rm {}", ("rm", ["{}"])),
    ("xargs -n 1 echo", ("echo", [])),
    ("sudo env X=1 apt-get update", ("apt-get", ["update"])),
    ("sudo -E nice -n 2 env A=b pip install -r r.txt", ("pip", ["install", "-r", "r.txt"])),
    ("sudo -u app env X=1 nice -n 5 pip install x", ("pip", ["install", "x"])),
    ("sudo", ("sudo", [])),
    ("ls", ("ls", [])),
]


@pytest.mark.parametrize("script,expected", WRAPPED)
def test_classify_tokens_wrappers(script, expected):
    (stmt,) = parse_shell(script).calls
    assert classify_tokens(stmt) == expected


# ---------------------------------------------------------------------------
# properties
# ---------------------------------------------------------------------------

_plain = st.text(alphabet="abcxyz0129-_./=", min_size=1, max_size=6)
_quoted = _plain.map(lambda w: f"'{w} {w}'") | _plain.map(lambda w: f'"{w}"')
_word = _plain | _quoted
_cmd = st.lists(_word, min_size=1, max_size=4).map(" ".join).filter(
    lambda s: not s.split()[0][0] in "'\"" and "=" not in s.split()[0])
_connector = st.sampled_from([" && ", " || ", "; ", " | ", "\n"])


@given(st.lists(_cmd, min_size=1, max_size=6), st.data())
@settings(max_examples=150, deadline=None)
def test_statement_count_matches_connectors(cmds, data):
    script = cmds[0]
    for c in cmds[1:]:
        script += data.draw(_connector) + c
    assert len(parse_shell(script).calls) == len(cmds)


@given(st.lists(_cmd, min_size=1, max_size=5).map(" && ".join))
@settings(max_examples=150, deadline=None)
def test_quoted_region_fixpoint(script):
    raws = [t.raw for t in tokenize(script)]
    assert [t.raw for t in tokenize(" ".join(raws))] == raws
    assert _calls(" ".join(raws)) == _calls(script)


@given(st.lists(_cmd, min_size=0, max_size=4).map("; ".join), _cmd)
@settings(max_examples=100, deadline=None)
def test_control_flow_monotone(script, body):
    with_if = (script + "; " if script else "") + f"if {body}; then {body}; fi"
    assert parse_shell(with_if).has_control_flow
