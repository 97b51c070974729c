"""A small POSIX-ish shell parser for the script behind a RUN instruction.

Only what the IR needs is modelled: word splitting with quotes, escapes and
substitutions, statement connectors, leading assignments and redirections.
Compound commands (``if``, ``for``, ``while``, ``until``, ``case``, subshells,
brace groups) are flattened into the surrounding statement list and reported
through ``ShellAst.has_control_flow``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Union


class ShellSyntaxError(ValueError):
    def __init__(self, position: int, reason: str):
        self.position = position
        self.reason = reason
        super().__init__(f"offset {position}: {reason}")


@dataclass(frozen=True)
class Token:
    kind: str  # "word" or "op"
    raw: str
    value: str
    pos: int


@dataclass
class AssignStatement:
    name: str
    value: str
    position: int = field(default=0, compare=False)


@dataclass
class CallStatement:
    command: str
    args: list[str] = field(default_factory=list)
    redirections: list[tuple[str, str]] = field(default_factory=list)
    position: int = field(default=0, compare=False)
    arg_positions: list[int] = field(default_factory=list, compare=False, repr=False)


Statement = Union[AssignStatement, CallStatement]


@dataclass
class ShellAst:
    statements: list[Statement] = field(default_factory=list)
    has_control_flow: bool = False

    @property
    def calls(self) -> list[CallStatement]:
        return [s for s in self.statements if isinstance(s, CallStatement)]


SEPARATORS = frozenset({"&&", "||", ";", "|", "|&", "&", "\n", ";;", "(", ")"})
REDIRECTS = ("<<<", "<<-", "&>>", ">>", "<<", ">&", "<&", "&>", ">|", "<>", "<", ">")
_OPERATORS = ("&&", "||", ";;", "|&") + REDIRECTS + ("&", "|", ";", "(", ")")

CONTROL_OPENERS = frozenset({"if", "elif", "while", "until"})
CONTROL_MARKERS = frozenset({"then", "else", "do", "{", "!", "fi", "done", "}", "esac"})

_ASSIGN_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*(\[[^\]]*\])?\+?=")


# ---------------------------------------------------------------------------
# Tokenizer
# ---------------------------------------------------------------------------

def _scan_parens(s: str, i: int, start: int) -> int:
    """``s[i]`` follows an opening ``$(``; return the index after the matching ``)``."""
    depth = 1
    while i < len(s):
        ch = s[i]
        if ch == "\\":
            i += 2
            continue
        if ch == "'":
            j = s.find("'", i + 1)
            if j < 0:
                raise ShellSyntaxError(i, "unterminated single quote")
            i = j + 1
            continue
        if ch == '"':
            i = _scan_double(s, i + 1, None)
            continue
        if ch == "`":
            i = _scan_backtick(s, i + 1, i)
            continue
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
            if depth == 0:
                return i + 1
        i += 1
    raise ShellSyntaxError(start, "unbalanced command substitution")


def _scan_braces(s: str, i: int, start: int) -> int:
    depth = 1
    while i < len(s):
        ch = s[i]
        if ch == "\\":
            i += 2
            continue
        if ch == "{":
            depth += 1
        elif ch == "}":
            depth -= 1
            if depth == 0:
                return i + 1
        i += 1
    raise ShellSyntaxError(start, "unbalanced parameter expansion")


def _scan_backtick(s: str, i: int, start: int) -> int:
    while i < len(s):
        if s[i] == "\\":
            i += 2
            continue
        if s[i] == "`":
            return i + 1
        i += 1
    raise ShellSyntaxError(start, "unterminated backtick substitution")


def _scan_dollar(s: str, i: int) -> int:
    """``s[i] == '$'``; return the end of the expansion (or i + 1)."""
    if s.startswith("$(", i):
        return _scan_parens(s, i + 2, i)
    if s.startswith("${", i):
        return _scan_braces(s, i + 2, i)
    return i + 1


def _scan_double(s: str, i: int, out: list[str] | None) -> int:
    """``s[i-1] == '"'``; return index after the closing quote, appending the value to ``out``."""
    start = i - 1
    while i < len(s):
        ch = s[i]
        if ch == '"':
            return i + 1
        if ch == "\\" and i + 1 < len(s):
            nxt = s[i + 1]
            if out is not None:
                out.append(nxt if nxt in '"\\$`' else ch + nxt)
            i += 2
            continue
        if ch == "$":
            j = _scan_dollar(s, i)
            if out is not None:
                out.append(s[i:j])
            i = j
            continue
        if ch == "`":
            j = _scan_backtick(s, i + 1, i)
            if out is not None:
                out.append(s[i:j])
            i = j
            continue
        if out is not None:
            out.append(ch)
        i += 1
    raise ShellSyntaxError(start, "unterminated double quote")


def _read_word(s: str, i: int) -> tuple[int, str]:
    """Read one word starting at ``i``; return (end, unquoted value)."""
    out: list[str] = []
    while i < len(s):
        ch = s[i]
        if ch in " \t\n" or ch in "&|;<>()":
            break
        if ch == "'":
            j = s.find("'", i + 1)
            if j < 0:
                raise ShellSyntaxError(i, "unterminated single quote")
            out.append(s[i + 1:j])
            i = j + 1
        elif ch == '"':
            i = _scan_double(s, i + 1, out)
        elif ch == "\\":
            if i + 1 < len(s):
                if s[i + 1] != "\n":
                    out.append(s[i + 1])
                i += 2
            else:
                out.append(ch)
                i += 1
        elif ch == "$":
            j = _scan_dollar(s, i)
            out.append(s[i:j])
            i = j
        elif ch == "`":
            j = _scan_backtick(s, i + 1, i)
            out.append(s[i:j])
            i = j
        else:
            out.append(ch)
            i += 1
    return i, "".join(out)


def tokenize(script: str) -> list[Token]:
    """Split a script into word and operator tokens."""
    tokens: list[Token] = []
    i = 0
    n = len(script)
    while i < n:
        ch = script[i]
        if ch in " \t\r":
            i += 1
            continue
        if ch == "\\" and i + 1 < n and script[i + 1] == "\n":
            i += 2
            continue
        if ch == "\n":
            tokens.append(Token("op", "\n", "\n", i))
            i += 1
            continue
        if ch == "#":
            j = script.find("\n", i)
            i = n if j < 0 else j
            continue
        op = next((o for o in _OPERATORS if script.startswith(o, i)), None)
        if op is not None:
            tokens.append(Token("op", op, op, i))
            i += len(op)
            continue
        end, value = _read_word(script, i)
        raw = script[i:end]
        # an all-digit word glued to a redirection is its file descriptor
        if raw.isdigit() and end < n and script[end] in "<>":
            op = next(o for o in REDIRECTS if script.startswith(o, end))
            tokens.append(Token("op", raw + op, raw + op, i))
            i = end + len(op)
            continue
        tokens.append(Token("word", raw, value, i))
        i = end
    return tokens


# ---------------------------------------------------------------------------
# Statement parser
# ---------------------------------------------------------------------------

class _Builder:
    def __init__(self) -> None:
        self.statements: list[Statement] = []
        self.control = False
        self._reset()

    def _reset(self) -> None:
        self.command: Token | None = None
        self.args: list[Token] = []
        self.redirs: list[tuple[str, str]] = []

    @property
    def at_command_start(self) -> bool:
        return self.command is None

    def flush(self) -> None:
        if self.command is not None:
            self.statements.append(CallStatement(
                command=self.command.value,
                args=[t.value for t in self.args],
                redirections=self.redirs,
                position=self.command.pos,
                arg_positions=[t.pos for t in self.args],
            ))
        self._reset()


def _is_case_pattern(tokens: list[Token], j: int) -> int:
    """Return the index after ``pattern)`` starting at ``j``, or -1."""
    if j < len(tokens) and tokens[j].kind == "op" and tokens[j].raw == "(":
        j += 1
    if j >= len(tokens) or tokens[j].kind != "word":
        return -1
    j += 1
    while j < len(tokens):
        t = tokens[j]
        if t.kind == "op" and t.raw == ")":
            return j + 1
        if t.kind == "op" and t.raw == "|" and j + 1 < len(tokens) and tokens[j + 1].kind == "word":
            j += 2
            continue
        return -1
    return -1


def parse_shell(script: str) -> ShellAst:
    """Parse a RUN script into ordered assignment and call statements.

    Raises :class:`ShellSyntaxError` on unterminated quotes, unbalanced
    substitutions and dangling redirections.
    """
    tokens = tokenize(script)
    b = _Builder()
    case_depth = 0
    i = 0
    while i < len(tokens):
        tok = tokens[i]
        if tok.kind == "op":
            if tok.raw in SEPARATORS:
                b.flush()
                i += 1
                continue
            # redirection
            if i + 1 >= len(tokens) or tokens[i + 1].kind != "word":
                raise ShellSyntaxError(tok.pos, f"redirection {tok.raw!r} without target")
            b.redirs.append((tok.raw, tokens[i + 1].value))
            i += 2
            continue

        if b.at_command_start:
            word = tok.raw
            if case_depth and word != "esac":
                end = _is_case_pattern(tokens, i)
                if end > 0:
                    i = end
                    continue
            if word in CONTROL_OPENERS:
                b.control = True
                i += 1
                continue
            if word in CONTROL_MARKERS:
                if word == "esac" and case_depth:
                    case_depth -= 1
                i += 1
                continue
            if word in ("for", "select"):
                b.control = True
                i += 1
                while i < len(tokens):
                    t = tokens[i]
                    if t.kind == "op" and t.raw in (";", "\n"):
                        break
                    if t.kind == "word" and t.raw == "do":
                        break
                    i += 1
                continue
            if word == "case":
                b.control = True
                i += 1
                while i < len(tokens) and not (tokens[i].kind == "word" and tokens[i].raw == "in"):
                    i += 1
                i += 1
                case_depth += 1
                continue
            if word == "function":
                i += 2
                continue
            if _ASSIGN_RE.match(word):
                name, _, value = tok.value.partition("=")
                b.statements.append(AssignStatement(name.rstrip("+"), value, tok.pos))
                i += 1
                continue
            b.command = tok
        else:
            b.args.append(tok)
        i += 1
    b.flush()
    return ShellAst(statements=b.statements, has_control_flow=b.control)


# ---------------------------------------------------------------------------
# Command/parameter classification
# ---------------------------------------------------------------------------

WRAPPERS = ("sudo", "xargs", "env", "nice", "time")

# short options of each wrapper that consume the following word
_WRAPPER_VALUE_FLAGS = {
    "sudo": set("ugpCDrtUT"),
    "xargs": set("InPLdEsa"),
    "env": set("uCS"),
    "nice": set("n"),
    "time": set("fo"),
}
_WRAPPER_VALUE_LONG = {
    "sudo": {"--user", "--group", "--prompt", "--chdir", "--host", "--role", "--type", "--other-user"},
    "xargs": {"--replace", "--max-args", "--max-procs", "--max-lines", "--delimiter", "--eof", "--arg-file"},
    "env": {"--unset", "--chdir", "--split-string"},
    "nice": {"--adjustment"},
    "time": {"--format", "--output"},
}


def _peel(command: str, args: list[str]) -> int | None:
    """For a wrapper call, return the index of the wrapped command in ``args``."""
    if command not in WRAPPERS:
        return None
    value_flags = _WRAPPER_VALUE_FLAGS[command]
    value_long = _WRAPPER_VALUE_LONG[command]
    i = 0
    while i < len(args):
        a = args[i]
        if a == "--":
            i += 1
            break
        if a.startswith("--"):
            i += 1 if "=" in a or a not in value_long else 2
            continue
        if a.startswith("-") and len(a) > 1:
            # -u root: value in next word; -uroot: value attached
            if a[-1] in value_flags and len(a) == 2 and not a[1:].isdigit():
                i += 2
            else:
                i += 1
            continue
        if command == "env" and "=" in a:
            i += 1
            continue
        break
    return i if i < len(args) else None


def effective_call(stmt: CallStatement) -> tuple[str, list[str], int, list[int]]:
    """Peel wrapper commands; return (command, args, command_position, arg_positions)."""
    command = stmt.command
    args = list(stmt.args)
    positions = list(stmt.arg_positions) or [stmt.position] * len(args)
    cmd_pos = stmt.position
    while True:
        idx = _peel(command, args)
        if idx is None:
            return command, args, cmd_pos, positions
        command, cmd_pos = args[idx], positions[idx]
        args, positions = args[idx + 1:], positions[idx + 1:]


def classify_tokens(stmt: CallStatement) -> tuple[str, list[str]]:
    """Split a call into its effective command and parameter list."""
    command, args, _, _ = effective_call(stmt)
    return command, args
