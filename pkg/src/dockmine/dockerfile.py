"""Instruction-level Dockerfile parser.

Follows the buildkit frontend conventions: comments are dropped, backslash
continuations are folded into one logical instruction, keywords are
case-insensitive, and the ``escape`` parser directive selects the
continuation character.
"""

from __future__ import annotations

import bisect
import json
import re
from dataclasses import dataclass, field, replace
from typing import Optional

KEYWORDS = (
    "FROM", "RUN", "COPY", "ADD", "ENV", "ARG", "WORKDIR", "EXPOSE", "USER",
    "CMD", "ENTRYPOINT", "VOLUME", "SHELL", "ONBUILD", "HEALTHCHECK",
    "STOPSIGNAL", "LABEL", "MAINTAINER",
)
DECLARATIONS = frozenset({"LABEL", "MAINTAINER"})

# Instructions whose arguments may be a JSON list.
EXEC_CAPABLE = frozenset({"RUN", "CMD", "ENTRYPOINT", "SHELL", "VOLUME", "COPY", "ADD"})
# Instructions whose shell-form argument is kept as one raw string.
SHELL_BODY = frozenset({"RUN", "CMD", "ENTRYPOINT"})
# Instructions that accept leading --flag[=value] options.
FLAGGED = frozenset({"FROM", "RUN", "COPY", "ADD", "HEALTHCHECK"})

SHELL_FORM = "shell-form"
EXEC_FORM = "exec-form"

_DIRECTIVE_RE = re.compile(r"^#\s*([A-Za-z][A-Za-z0-9_-]*)\s*=\s*(.*?)\s*$")
_HEREDOC_RE = re.compile(r"(?<!<)<<(?!<)-?\s*[\"']?[A-Za-z_][A-Za-z0-9_]*")
_EXEC_START_RE = re.compile(r"^\[\s*([\"'\]])")


class DockerfileSyntaxError(ValueError):
    """Raised when a Dockerfile cannot be parsed; the file is rejected whole."""

    def __init__(self, line: int, reason: str, source_name: str = ""):
        self.line = line
        self.reason = reason
        self.source_name = source_name
        where = f"{source_name}:{line}" if source_name else f"line {line}"
        super().__init__(f"{where}: {reason}")


@dataclass
class Instruction:
    keyword: str
    form: str
    args: list[str]
    flags: list[tuple[str, Optional[str]]] = field(default_factory=list)
    line_span: tuple[int, int] = (0, 0)
    raw: str = ""  # argument text after flags, continuations folded
    image: Optional[str] = None
    tag: Optional[str] = None
    digest: Optional[str] = None
    alias: Optional[str] = None
    child: Optional["Instruction"] = None  # ONBUILD / HEALTHCHECK CMD payload
    # (offset into raw, line, column) for every folded physical line segment
    segments: list[tuple[int, int, int]] = field(default_factory=list, repr=False, compare=False)

    def locate(self, offset: int) -> tuple[int, int]:
        """Map a character offset in ``raw`` back to a 1-based (line, column)."""
        if not self.segments:
            return (self.line_span[0], 1)
        starts = [s[0] for s in self.segments]
        i = max(bisect.bisect_right(starts, offset) - 1, 0)
        seg_off, line, col = self.segments[i]
        return (line, col + max(offset - seg_off, 0))

    def to_text(self) -> str:
        parts = [self.keyword]
        for name, value in self.flags:
            parts.append(f"--{name}" if value is None else f"--{name}={value}")
        if self.child is not None:
            parts.append(self.child.to_text())
        elif self.form == EXEC_FORM:
            parts.append(json.dumps(self.args))
        elif self.raw:
            parts.append(self.raw)
        return " ".join(parts)


@dataclass
class DockerfileAst:
    instructions: list[Instruction]
    source_name: str = ""
    escape: str = "\\"
    notes: list[str] = field(default_factory=list, compare=False)

    def to_text(self) -> str:
        return "\n".join(i.to_text() for i in self.instructions) + "\n"


def split_words(text: str, line: int, escape: str = "\\") -> list[str]:
    """Split on whitespace, keeping quoted regions (and their quotes) intact."""
    words: list[str] = []
    cur: list[str] = []
    quote = None
    i = 0
    while i < len(text):
        ch = text[i]
        if quote:
            cur.append(ch)
            if ch == escape and quote == '"' and i + 1 < len(text):
                cur.append(text[i + 1])
                i += 1
            elif ch == quote:
                quote = None
        elif ch in "\"'":
            quote = ch
            cur.append(ch)
        elif ch == escape and i + 1 < len(text):
            cur.append(ch)
            cur.append(text[i + 1])
            i += 1
        elif ch.isspace():
            if cur:
                words.append("".join(cur))
                cur = []
        else:
            cur.append(ch)
        i += 1
    if quote:
        raise DockerfileSyntaxError(line, f"unterminated quote ({quote})")
    if cur:
        words.append("".join(cur))
    return words


def unquote(word: str) -> str:
    """Strip one level of shell-style quoting from a Dockerfile word."""
    out = []
    quote = None
    i = 0
    while i < len(word):
        ch = word[i]
        if quote:
            if ch == quote:
                quote = None
            elif ch == "\\" and quote == '"' and i + 1 < len(word) and word[i + 1] in '"\\$`':
                out.append(word[i + 1])
                i += 1
            else:
                out.append(ch)
        elif ch in "\"'":
            quote = ch
        else:
            out.append(ch)
        i += 1
    return "".join(out)


def _read_directives(lines: list[str], ast: DockerfileAst) -> int:
    """Consume leading parser directives; return the index of the first other line."""
    seen: set[str] = set()
    for idx, line in enumerate(lines):
        m = _DIRECTIVE_RE.match(line.strip())
        if not m or not line.lstrip().startswith("#"):
            return idx
        name, value = m.group(1).lower(), m.group(2)
        if name in seen:
            return idx
        seen.add(name)
        if name == "escape":
            if value not in ("\\", "`"):
                raise DockerfileSyntaxError(idx + 1, f"invalid escape directive {value!r}", ast.source_name)
            ast.escape = value
        else:
            ast.notes.append(f"line {idx + 1}: parser directive {name!r} ignored")
    return len(lines)


def _logical_lines(lines: list[str], start: int, escape: str):
    """Yield (text, first_line, last_line, segments) for each logical instruction."""
    buf: list[str] = []
    segs: list[tuple[int, int, int]] = []
    first = last = 0
    length = 0
    for idx in range(start, len(lines)):
        lineno = idx + 1
        line = lines[idx]
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            # blank and comment lines vanish, even inside a continuation
            continue
        if not buf:
            first = lineno
            body = line.lstrip()
            col = len(line) - len(body) + 1
        else:
            body = line
            col = 1
        rstripped = body.rstrip()
        continued = rstripped.endswith(escape)
        if continued:
            body = rstripped[:-1]
        segs.append((length, lineno, col))
        last = lineno
        buf.append(body)
        length += len(body)
        if not continued:
            yield "".join(buf), first, lineno, segs
            buf, segs, length = [], [], 0
    if buf:
        yield "".join(buf), first, last, segs


def _take_flags(rest: str, lineno: int) -> tuple[list[tuple[str, Optional[str]]], str, int]:
    flags = []
    consumed = 0
    while rest.startswith("--"):
        m = re.match(r"--([A-Za-z][A-Za-z0-9-]*)(?:=(\S*))?(\s+|$)", rest)
        if not m:
            raise DockerfileSyntaxError(lineno, f"malformed flag near {rest[:20]!r}")
        flags.append((m.group(1), m.group(2)))
        consumed += m.end()
        rest = rest[m.end():]
    return flags, rest, consumed


def _parse_from(inst: Instruction, escape: str) -> None:
    lineno = inst.line_span[0]
    words = split_words(inst.raw, lineno, escape)
    if not words:
        raise DockerfileSyntaxError(lineno, "FROM requires an image")
    if len(words) == 3 and words[1].lower() == "as":
        inst.alias = words[2]
    elif len(words) != 1:
        raise DockerfileSyntaxError(lineno, "FROM expects '<image>[:<tag>] [AS <name>]'")
    ref = words[0]
    if "@" in ref:
        ref, inst.digest = ref.split("@", 1)
    slash = ref.rfind("/")
    colon = ref.rfind(":")
    if colon > slash:
        ref, inst.tag = ref[:colon], ref[colon + 1:]
    if not ref:
        raise DockerfileSyntaxError(lineno, "FROM requires an image")
    inst.image = ref
    inst.args = words


def _rebase(segs, shift: int) -> list[tuple[int, int, int]]:
    out: list[tuple[int, int, int]] = []
    for off, ln, col in segs:
        rel = off - shift
        if rel <= 0:
            out = [(0, ln, col - rel)]
        else:
            out.append((rel, ln, col))
    return out


def _build(keyword_raw: str, rest: str, first: int, last: int, segs, rest_offset: int,
           escape: str, source_name: str) -> Instruction:
    keyword = keyword_raw.upper()
    if keyword not in KEYWORDS:
        raise DockerfileSyntaxError(first, f"unknown instruction {keyword_raw!r}", source_name)
    flags: list[tuple[str, Optional[str]]] = []
    if keyword in FLAGGED:
        flags, rest, consumed = _take_flags(rest, first)
        rest_offset += consumed
    if keyword in ("RUN", "COPY", "ADD") and _HEREDOC_RE.search(rest):
        raise DockerfileSyntaxError(first, "heredocs are not supported", source_name)
    inst = Instruction(keyword=keyword, form=SHELL_FORM, args=[], flags=flags,
                       line_span=(first, last), raw=rest)
    inst.segments = _rebase(segs, rest_offset)

    if keyword == "FROM":
        _parse_from(inst, escape)
    elif keyword in ("ONBUILD", "HEALTHCHECK"):
        m = re.match(r"(\S+)\s*(.*)$", rest)
        if keyword == "HEALTHCHECK" and m and m.group(1).upper() == "NONE":
            inst.args = ["NONE"]
        elif m:
            sub_kw = m.group(1)
            if keyword == "ONBUILD" and sub_kw.upper() in ("ONBUILD", "FROM", "MAINTAINER"):
                raise DockerfileSyntaxError(first, f"{sub_kw.upper()} is not allowed in ONBUILD", source_name)
            if keyword == "HEALTHCHECK" and sub_kw.upper() != "CMD":
                raise DockerfileSyntaxError(first, "HEALTHCHECK expects CMD or NONE", source_name)
            inst.child = _build(sub_kw, m.group(2), first, last, [(0, first, 1)], 0, escape, source_name)
            inst.child.segments = []
            inst.args = [m.group(1)] + inst.child.args
        else:
            raise DockerfileSyntaxError(first, f"{keyword} requires an argument", source_name)
    elif keyword in EXEC_CAPABLE and _EXEC_START_RE.match(rest):
        try:
            parsed = json.loads(rest)
        except json.JSONDecodeError:
            raise DockerfileSyntaxError(first, "malformed exec-form list", source_name) from None
        if not isinstance(parsed, list) or not all(isinstance(a, str) for a in parsed):
            raise DockerfileSyntaxError(first, "exec-form must be a list of strings", source_name)
        inst.form = EXEC_FORM
        inst.args = parsed
    elif keyword in SHELL_BODY:
        inst.args = [rest] if rest else []
    else:
        try:
            inst.args = split_words(rest, first, escape)
        except DockerfileSyntaxError as exc:
            raise DockerfileSyntaxError(first, exc.reason, source_name) from None
    return inst


def parse_dockerfile(text: str, source_name: str = "") -> DockerfileAst:
    """Parse Dockerfile text into a :class:`DockerfileAst`.

    Raises :class:`DockerfileSyntaxError` for unknown keywords, a FROM without
    an image, malformed exec-form lists, unterminated quotes and heredocs.
    """
    text = text.replace("\r\n", "\n").replace("\r", "\n")
    if text.startswith("﻿"):
        text = text[1:]
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    ast = DockerfileAst(instructions=[], source_name=source_name)
    start = _read_directives(lines, ast)
    for logical, first, last, segs in _logical_lines(lines, start, ast.escape):
        m = re.match(r"\s*(\S+)(\s*)", logical)
        rest = logical[m.end():].rstrip()
        inst = _build(m.group(1), rest, first, last, segs, m.end(), ast.escape, source_name)
        ast.instructions.append(inst)
    return ast


def strip_declarations(ast: DockerfileAst) -> DockerfileAst:
    """Drop LABEL and MAINTAINER instructions, keeping everything else in order."""
    kept = [i for i in ast.instructions if i.keyword not in DECLARATIONS]
    return replace(ast, instructions=kept)
