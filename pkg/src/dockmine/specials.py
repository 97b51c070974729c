"""Handlers for rules that are not expressible as token-order constraints.

A handler receives the parsed file and returns ``(line_span, message)``
pairs, one per finding.
"""

from __future__ import annotations

from typing import Callable

from .dockerfile import EXEC_FORM, unquote
from .ir import ParsedDockerfile, canonical_command
from .shell import effective_call

Finding = tuple[tuple[int, int], str]
Handler = Callable[[ParsedDockerfile], list[Finding]]

HANDLERS: dict[str, Handler] = {}

_LONG_SET_OPTIONS = {"errexit": "e", "nounset": "u", "xtrace": "x"}
ROOT_USERS = frozenset({"root", "0"})


def register_handler(name: str) -> Callable[[Handler], Handler]:
    def deco(fn: Handler) -> Handler:
        HANDLERS[name] = fn
        return fn
    return deco


def set_flags(args: list[str]) -> set[str]:
    """Single-letter options enabled by one ``set`` call."""
    flags: set[str] = set()
    it = iter(args)
    for arg in it:
        if arg == "-o":
            name = next(it, "")
            if name in _LONG_SET_OPTIONS:
                flags.add(_LONG_SET_OPTIONS[name])
        elif arg.startswith("-") and not arg.startswith("--"):
            letters = arg[1:]
            flags.update(letters.replace("o", ""))
            if letters.endswith("o"):
                name = next(it, "")
                if name in _LONG_SET_OPTIONS:
                    flags.add(_LONG_SET_OPTIONS[name])
    return flags


@register_handler("set-eux")
def check_set_eux(parsed: ParsedDockerfile) -> list[Finding]:
    out: list[Finding] = []
    for index, shell in sorted(parsed.shells.items()):
        enabled: set[str] = set()  # options accumulate across set calls
        for stmt in shell.calls:
            command, args, _, _ = effective_call(stmt)
            if canonical_command(command) == "set":
                enabled |= set_flags(args)
        if not {"e", "u", "x"} <= enabled:
            inst = parsed.ast.instructions[index]
            out.append((inst.line_span, "RUN script has no set -eux call"))
    return out


def _user_name(raw: str) -> str:
    return unquote(raw).split(":", 1)[0].strip()


def _last_user_check(parsed: ParsedDockerfile, commands: frozenset[str], what: str) -> list[Finding]:
    last_call = None
    for index, shell in parsed.shells.items():
        for stmt in shell.calls:
            command, _, _, _ = effective_call(stmt)
            if canonical_command(command) in commands:
                last_call = max(last_call if last_call is not None else -1, index)
    for index, inst in enumerate(parsed.ast.instructions):
        if inst.keyword == "RUN" and inst.form == EXEC_FORM and inst.args:
            if canonical_command(inst.args[0]) in commands:
                last_call = max(last_call if last_call is not None else -1, index)
    if last_call is None:
        return []
    final_user = None
    for index, inst in enumerate(parsed.ast.instructions):
        if index > last_call and inst.keyword == "USER" and inst.args:
            final_user = _user_name(inst.args[0])
    span = parsed.ast.instructions[last_call].line_span
    if final_user is None:
        return [(span, f"{what} is not followed by a USER instruction")]
    if final_user in ROOT_USERS:
        return [(span, f"last USER after {what} is {final_user}")]
    return []


@register_handler("useradd-not-root")
def check_useradd_not_root(parsed: ParsedDockerfile) -> list[Finding]:
    return _last_user_check(parsed, frozenset({"useradd", "adduser"}), "user creation")


@register_handler("groupadd-not-root")
def check_groupadd_not_root(parsed: ParsedDockerfile) -> list[Finding]:
    return _last_user_check(parsed, frozenset({"groupadd", "addgroup"}), "group creation")
