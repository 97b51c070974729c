from __future__ import annotations

import re

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dockmine.dockerfile import parse_dockerfile
from dockmine.ir import (
    SHELL_ARG,
    SHELL_CMD,
    SUBSTITUTION_TABLE,
    VOCABULARY,
    dump_ir,
    parse_and_substitute,
    parse_shell_token,
    substitute,
    to_ir,
)
from tables import QUOTED_EXAMPLES, SUBSTITUTION_ROWS


def _ir(text):
    return parse_and_substitute(text).ir.texts


def _run_tokens(script):
    return [t for t in _ir(f"FROM a\nRUN {script}\n") if t.startswith("SC-")]


def test_table_has_35_rows():
    assert len(SUBSTITUTION_TABLE) == 35
    assert [r.category for r in SUBSTITUTION_TABLE].count("FILE") == 18


@pytest.mark.parametrize("row,raw,expected", SUBSTITUTION_ROWS)
def test_every_table_row(row, raw, expected):
    assert substitute(raw) == expected
    # the example really exercises the row it is listed under
    rep = SUBSTITUTION_TABLE[row - 1].replacement
    if "[" in rep:
        assert expected[0].startswith(rep.split("[")[0])
    else:
        assert rep in expected


@pytest.mark.parametrize("raw,expected", QUOTED_EXAMPLES)
def test_quoted_examples(raw, expected):
    assert substitute(raw) == expected


@pytest.mark.parametrize("raw", ["--no-cache-dir", "-r", "-", "--prefix"])
def test_flags_pass_through(raw):
    assert substitute(raw) == [raw]


@pytest.mark.parametrize("raw,expected", [
    ("curl", ["curl"]),
    ("cache", ["cache"]),
    ("numpy==1.2", ["PATH-NORMAL"]),
    ("$HOME", ["VAR-REF"]),
    ("${APP_DIR}/bin", ["PATH-NORMAL"]),
    ("node-v${NODE_VERSION}.tar.gz", ["FILE-TAR-GZ"]),
    ("$(uname -m)", ["CMD-SUBST"]),
    ("https://x.org/dl?file=a.zip", ["URL-PROTOCOL-HTTPS"]),
    ("pip-requirements.txt", ["FILE-PIP-REQUIREMENT.TXT"]),
    ("/usr/src/app/requirements-dev.txt", ["FILE-PIP-REQUIREMENT.TXT"]),
    ("/var/lib/apt/lists/", ["PATH-APT-LIST"]),
    ("/tmp/*.deb", ["PATH-NORMAL"]),
])
def test_more_substitutions(raw, expected):
    assert substitute(raw) == expected


def test_pip_line_with_flags():
    assert _run_tokens("pip install --no-cache-dir -r requirements.txt") == [
        "SC-[pip]", "SC-[pip]-ARG-[install]", "SC-[pip]-ARG-[--no-cache-dir]",
        "SC-[pip]-ARG-[-r]", "SC-[pip]-ARG-[FILE-PIP-REQUIREMENT.TXT]",
    ]


def test_from_tag_abstraction():
    assert _ir("FROM python:3.7-slim\n") == ["FROM-IMAGE-[python]-TAG-[SPECIFIC]"]
    assert _ir("FROM python\n") == ["FROM-IMAGE-[python]-TAG-[LATEST]"]
    assert _ir("FROM python:latest\n") == ["FROM-IMAGE-[python]-TAG-[LATEST]"]
    assert _ir("FROM python@sha256:abc\n") == ["FROM-IMAGE-[python]-TAG-[SPECIFIC]"]


def test_empty_ast():
    assert _ir("# nothing\n") == []


def _row_oracle(raw: str) -> list[str]:
    """Apply each table row independently and keep the most specific hit."""
    hits = []
    for row in SUBSTITUTION_TABLE:
        if row.category in ("PATH", "FILE") and re.search(row.pattern, raw.lower()):
            hits.append(row)
    return [max(hits, key=lambda r: r.priority).replacement] if hits else [raw]


def test_rm_rf_var_cache_yum():
    assert _row_oracle("/var/cache/yum") == ["PATH-VAR-CACHE-YUM"]
    assert _run_tokens("rm -rf /var/cache/yum") == [
        "SC-[rm]", "SC-[rm]-ARG-[-r]", "SC-[rm]-ARG-[-f]", f"SC-[rm]-ARG-[{_row_oracle('/var/cache/yum')[0]}]",
    ]


@pytest.mark.parametrize("spelling", ["rm -rf x/", "rm -fr x/", "rm -r -f x/", "rm -f -r x/"])
def test_flag_explosion_order_is_canonical(spelling):
    assert _run_tokens(spelling) == ["SC-[rm]", "SC-[rm]-ARG-[-r]", "SC-[rm]-ARG-[-f]",
                                     "SC-[rm]-ARG-[PATH-NORMAL]"]


def test_value_flag_bundles():
    # value flag last: exploded, value flag kept in last position
    assert _run_tokens("tar -xzf a.tar.gz") == [
        "SC-[tar]", "SC-[tar]-ARG-[-z]", "SC-[tar]-ARG-[-x]", "SC-[tar]-ARG-[-f]", "SC-[tar]-ARG-[FILE-TAR-GZ]"]
    # value flag in the middle: bundle stays whole
    assert _run_tokens("tar -xfz a.tar") == ["SC-[tar]", "SC-[tar]-ARG-[-xfz]", "SC-[tar]-ARG-[FILE-TAR]"]


def test_long_flag_with_value():
    assert _run_tokens("./configure --prefix=/usr/local") == [
        "SC-[configure]", "SC-[configure]-ARG-[--prefix]", "SC-[configure]-ARG-[PATH-NORMAL]"]


def test_wrapper_peeled_and_pip3_aliased():
    assert _run_tokens("sudo -H pip3 install x")[:2] == ["SC-[pip]", "SC-[pip]-ARG-[install]"]


def test_declarations_healthcheck_onbuild_emit_nothing():
    text = "FROM a:1\nLABEL x=y\nMAINTAINER me\nHEALTHCHECK CMD curl -f http://x/\nONBUILD RUN make\n"
    assert _ir(text) == ["FROM-IMAGE-[a]-TAG-[SPECIFIC]"]


def test_multistage_is_one_sequence_and_copy_from():
    toks = _ir("FROM golang:1 AS b\nRUN go build\nFROM scratch\nCOPY --from=b /out /out\n")
    assert toks[0].startswith("FROM-IMAGE-[golang]")
    assert "FROM-IMAGE-[scratch]-TAG-[LATEST]" in toks
    assert toks[-4:] == ["COPY", "COPY-ARG-[--from]", "COPY-ARG-[PATH-NORMAL]", "COPY-ARG-[PATH-NORMAL]"]


def test_expose_user_verbatim():
    assert _ir("FROM a\nEXPOSE 8080/tcp\nUSER app\n")[1:] == [
        "EXPOSE", "EXPOSE-ARG-[8080/tcp]", "USER", "USER-ARG-[app]"]


def test_dump_format():
    pd = parse_and_substitute("FROM a:1\nRUN pip install x\n")
    lines = dump_ir(pd.ir).splitlines()
    assert lines[0] == "0\tDockerInstr\tFROM-IMAGE-[a]-TAG-[SPECIFIC]\t1:1"
    assert lines[2] == "2\tShellCmd\tSC-[pip]\t2:5"
    assert lines[3] == "3\tShellArg\tSC-[pip]-ARG-[install]\t2:9"


def test_to_ir_direct():
    ast = parse_dockerfile("FROM a\n")
    assert [t.text for t in to_ir(ast, {}).tokens] == ["FROM-IMAGE-[a]-TAG-[LATEST]"]


# ---------------------------------------------------------------------------
# properties
# ---------------------------------------------------------------------------

_canonical = st.sampled_from(sorted(VOCABULARY) + ["URL-PROTOCOL-S3", "URL-PROTOCOL-HKPS"])


@given(_canonical)
def test_substitution_idempotent(tok):
    assert substitute(tok) == [tok]


_path_piece = st.text(alphabet="abcxyz019_-", min_size=1, max_size=6)


@given(st.lists(_path_piece, max_size=3), st.lists(_path_piece, max_size=3))
def test_specificity_longest_prefix_wins(before, after):
    for long, short, expect in [("var/cache/yum", "var/cache/", "PATH-VAR-CACHE-YUM")]:
        raw = "/" + "/".join(before + [long] + after)
        assert substitute(raw) == [expect]
        assert long.startswith(short.rstrip("/"))
    raw = "/" + "/".join(before + ["var/lib/apt/lists"] + after)
    assert substitute(raw) == ["PATH-APT-LIST"]


_arg = st.text(alphabet="abcz019-_./~*$&|;\\'\" ", min_size=1, max_size=10)
_cmdname = st.sampled_from(["rm", "pip", "tar", "curl", "apt-get", "ls", "sudo"])


@st.composite
def scripts(draw):
    parts = []
    for _ in range(draw(st.integers(1, 4))):
        args = draw(st.lists(st.sampled_from(["-rf", "-y", "--x=1", "a.zip", "/var/lib/apt/lists/*",
                                              "'q w'", "https://a/b.tar.gz", "$V", "x"]), max_size=4))
        parts.append(" ".join([draw(_cmdname)] + args))
    return draw(st.sampled_from([" && ", "; ", " | "])).join(parts)


@given(scripts())
@settings(max_examples=150, deadline=None)
def test_ir_invariants(script):
    text = f"FROM a\nRUN {script}\n"
    first = parse_and_substitute(text).ir
    second = parse_and_substitute(text).ir
    assert dump_ir(first) == dump_ir(second)  # determinism
    seen_cmds: list[str] = []
    for tok in first.tokens:
        for bad in ("&&", "\\", ";", "|"):
            assert bad not in tok.text
        if tok.kind == SHELL_CMD:
            seen_cmds.append(parse_shell_token(tok.text)[0])
        elif tok.kind == SHELL_ARG:
            cmd, arg = parse_shell_token(tok.text)
            assert arg is not None
            assert seen_cmds and seen_cmds[-1] == cmd  # ownership coherence
    assert first.commands_present == set(seen_cmds)
