"""Abstract token sequence built from a parsed Dockerfile.

Every shell call becomes ``SC-[cmd]`` followed by one ``SC-[cmd]-ARG-[x]``
token per argument; Docker instructions become ``KEYWORD`` followed by
``KEYWORD-ARG-[x]`` tokens. Concrete URLs, paths, file names and literals are
abstracted through :data:`SUBSTITUTION_TABLE`.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Optional

from .dockerfile import (
    EXEC_FORM,
    DockerfileAst,
    DockerfileSyntaxError,
    Instruction,
    parse_dockerfile,
    split_words,
    strip_declarations,
    unquote,
)
from .shell import ShellAst, ShellSyntaxError, effective_call, parse_shell

DOCKER_INSTR = "DockerInstr"
SHELL_CMD = "ShellCmd"
SHELL_ARG = "ShellArg"

VAR_REF = "VAR-REF"
CMD_SUBST = "CMD-SUBST"


@dataclass(frozen=True)
class SubstitutionRule:
    pattern: str
    category: str  # URL, PATH, FILE or Other
    replacement: str
    priority: int


# Higher priority wins. Within FILE, exact names beat extensions and longer
# extensions beat their suffixes; within PATH, longer prefixes win.
SUBSTITUTION_TABLE: tuple[SubstitutionRule, ...] = (
    SubstitutionRule(r"^http://", "URL", "URL-PROTOCOL-HTTP", 30),
    SubstitutionRule(r"^https://", "URL", "URL-PROTOCOL-HTTPS", 30),
    SubstitutionRule(r"^ftp://", "URL", "URL-PROTOCOL-FTP", 30),
    SubstitutionRule(r"^git://", "URL", "URL-PROTOCOL-GIT", 30),
    SubstitutionRule(r"\.git/?$", "URL", "URL-PROTOCOL-GIT", 25),
    SubstitutionRule(r"^(\w+)://", "URL", "URL-PROTOCOL-[PROTOCOL]", 20),

    SubstitutionRule(r"var/cache/yum", "PATH", "PATH-VAR-CACHE-YUM", 58),
    SubstitutionRule(r"var/cache(/|$)", "PATH", "PATH-VAR-CACHE", 56),
    SubstitutionRule(r"var/lib/apt/lists", "PATH", "PATH-APT-LIST", 59),
    SubstitutionRule(r"(^|/)src(/|$)", "PATH", "PATH-SRC-DIR", 53),
    SubstitutionRule(r"(^\.|/\.?)cache(/|$)", "PATH", "PATH-DOT-CACHE", 54),
    SubstitutionRule(r"^~", "PATH", "PATH-NORMAL", 52),
    SubstitutionRule(r"\.", "PATH", "PATH-NORMAL", 51),
    SubstitutionRule(r"/", "PATH", "PATH-NORMAL", 50),

    SubstitutionRule(r"\.gem$", "FILE", "FILE-GEM", 80),
    SubstitutionRule(r"\.asc$", "FILE", "FILE-ASC", 80),
    SubstitutionRule(r"\.tar\.gz$", "FILE", "FILE-TAR-GZ", 82),
    SubstitutionRule(r"\.tar\.bz2$", "FILE", "FILE-TAR-BZ2", 82),
    SubstitutionRule(r"\.tar$", "FILE", "FILE-TAR", 81),
    SubstitutionRule(r"\.zip$", "FILE", "FILE-ZIP", 80),
    SubstitutionRule(r"\.jar$", "FILE", "FILE-JAVA-JAR", 80),
    SubstitutionRule(r"\.sh$", "FILE", "FILE-SHELL-SCRIPT", 80),
    SubstitutionRule(r"\.crt$", "FILE", "FILE-TLS-CERT", 80),
    SubstitutionRule(r"\.pem$", "FILE", "FILE-TLS-CERT", 80),
    SubstitutionRule(r"\.key$", "FILE", "FILE-KEY", 80),
    SubstitutionRule(r"^go\.sum$", "FILE", "FILE-GO-SUM", 90),
    SubstitutionRule(r"^go\.mod$", "FILE", "FILE-GO-MOD", 90),
    SubstitutionRule(r"^cargo\.toml$", "FILE", "FILE-Rust-CARGO-TOME", 90),
    SubstitutionRule(r"^yarn\.lock$", "FILE", "FILE-YARN-YARN.LOCK", 90),
    SubstitutionRule(r"^package\.json$", "FILE", "FILE-NPM-PACKAGE.JSON", 90),
    SubstitutionRule(r"^cmakelists\.txt$", "FILE", "FILE-CMAKEFILEM", 90),
    SubstitutionRule(r"requirements?.*\.txt$", "FILE", "FILE-PIP-REQUIREMENT.TXT", 90),

    SubstitutionRule(r"^(t|T)rue$", "Other", "TRUE", 10),
    SubstitutionRule(r"^(f|F)alse$", "Other", "FALSE", 10),
    SubstitutionRule(r"^\*$", "Other", "GLOB-STAR", 10),
)


def _by_category(category: str) -> list[tuple[re.Pattern, SubstitutionRule]]:
    rules = sorted((r for r in SUBSTITUTION_TABLE if r.category == category),
                   key=lambda r: -r.priority)
    return [(re.compile(r.pattern), r) for r in rules]


_URL_RULES = _by_category("URL")
_PATH_RULES = _by_category("PATH")
_FILE_RULES = _by_category("FILE")
_OTHER_RULES = _by_category("Other")

VOCABULARY = frozenset(
    r.replacement for r in SUBSTITUTION_TABLE if "[" not in r.replacement
) | {VAR_REF, CMD_SUBST}
_DYNAMIC_PROTOCOL_RE = re.compile(r"^URL-PROTOCOL-[A-Z0-9+.-]+$")

_SCHEME_RE = re.compile(r"^(\w+)://")
_SCP_GIT_RE = re.compile(r"^[\w.-]+@[\w.-]+:")
_EXPANSION_RE = re.compile(
    r"\$\((?:[^()]|\([^()]*\))*\)|`[^`]*`|\$\{[^}]*\}|\$[A-Za-z_][A-Za-z0-9_]*|\$[0-9@*#?$!-]"
)


def _mask_expansions(text: str) -> str:
    def repl(m: re.Match) -> str:
        s = m.group(0)
        return CMD_SUBST if s.startswith("$(") or s.startswith("`") else VAR_REF
    return _EXPANSION_RE.sub(repl, text)


def _sanitize(text: str) -> str:
    """Drop connector and escape symbols and collapse whitespace."""
    text = text.replace("&&", "")
    text = re.sub(r"[\\;|]", "", text)
    return " ".join(text.split())


def _file_token(text: str) -> Optional[str]:
    name = text.rstrip("/").rsplit("/", 1)[-1].lower()
    for rx, rule in _FILE_RULES:
        if rx.search(name):
            return rule.replacement
    return None


def _url_tokens(text: str) -> Optional[list[str]]:
    scheme = _SCHEME_RE.match(text)
    if scheme is None and not _SCP_GIT_RE.match(text) and not (
        text.endswith(".git") and "/" in text
    ):
        return None
    if scheme is None:
        return ["URL-PROTOCOL-GIT"]
    proto = None
    for rx, rule in _URL_RULES:
        if rule.pattern.startswith("^") and rx.match(text.lower()):
            proto = rule.replacement
            break
    if proto == "URL-PROTOCOL-[PROTOCOL]":
        proto = "URL-PROTOCOL-" + scheme.group(1).upper()
    path = re.split(r"[?#]", text[scheme.end():], maxsplit=1)[0]
    out = [proto]
    if "/" in path:
        ftoken = _file_token(path)
        if ftoken:
            out.append(ftoken)
    return out


def is_canonical(text: str) -> bool:
    return text in VOCABULARY or bool(_DYNAMIC_PROTOCOL_RE.match(text))


def substitute(raw: str) -> list[str]:
    """Abstract one argument into canonical token texts.

    Flags pass through untouched; a URL may yield a protocol token followed
    by a file-type token; anything else yields at most one token.
    """
    if raw == "":
        return []
    if is_canonical(raw) or raw.startswith("-"):
        return [raw]
    text = _mask_expansions(raw)
    if text in (VAR_REF, CMD_SUBST):
        return [text]
    url = _url_tokens(text)
    if url is not None:
        return url
    for rx, rule in _OTHER_RULES:
        if rx.match(text):
            return [rule.replacement]
    ftoken = _file_token(text)
    if ftoken:
        return [ftoken]
    for rx, rule in _PATH_RULES:
        if rx.search(text):
            return [rule.replacement]
    clean = _sanitize(text)
    return [clean] if clean else []


# ---------------------------------------------------------------------------
# IR data
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class IrToken:
    kind: str
    text: str
    origin: tuple[int, int]
    instruction: int = field(default=-1, compare=False)


@dataclass(frozen=True)
class RunSlice:
    start: int  # token index range [start, end) of one RUN's shell tokens
    end: int
    instruction: int
    line_span: tuple[int, int]


@dataclass
class IrSequence:
    tokens: list[IrToken]
    source_name: str = ""
    run_slices: list[RunSlice] = field(default_factory=list)

    @property
    def texts(self) -> list[str]:
        return [t.text for t in self.tokens]

    @property
    def commands_present(self) -> set[str]:
        out = set()
        for t in self.tokens:
            if t.kind == SHELL_CMD:
                out.add(parse_shell_token(t.text)[0])
        return out

    def __len__(self) -> int:
        return len(self.tokens)


_SHELL_TOKEN_RE = re.compile(r"^SC-\[([^\]]*)\](?:-ARG-\[(.*)\])?$", re.S)


def parse_shell_token(text: str) -> tuple[Optional[str], Optional[str]]:
    """Return (command, argument) for SC tokens; (None, None) otherwise."""
    m = _SHELL_TOKEN_RE.match(text)
    if not m:
        return None, None
    return m.group(1), m.group(2)


def shell_cmd_token(cmd: str) -> str:
    return f"SC-[{cmd}]"


def shell_arg_token(cmd: str, arg: str) -> str:
    return f"SC-[{cmd}]-ARG-[{arg}]"


# ---------------------------------------------------------------------------
# Argument canonicalisation
# ---------------------------------------------------------------------------

# Short options that consume a value, per command. Bundles ending in one of
# these are exploded with the value flag kept last; bundles with one in the
# middle stay whole.
VALUE_FLAGS: dict[str, str] = {
    "curl": "oudXAeHxTmwKbcErYyzFhQ",
    "wget": "OoPaiTUetQwBY",
    "tar": "fCTXbgKNVH",
    "git": "Cc",
    "apt-get": "ot",
    "apt": "ot",
    "pip": "rcetib",
    "unzip": "dx",
    "useradd": "ugGdsckefKpb",
    "adduser": "ugGhsDk",
    "groupadd": "gKp",
    "addgroup": "g",
    "ssh-keygen": "tbfCNnOsIVzZm",
    "mkdir": "m",
    "cp": "tS",
    "mv": "tS",
    "ln": "St",
    "sed": "ef",
    "gpg": "ourk",
    "set": "o",
    "chmod": "",
    "docker": "fte",
    "npm": "",
    "yum": "cdex",
    "dnf": "cdex",
    "rpm": "Dr",
    "make": "CfIjlo",
    "go": "o",
    "java": "",
    "mvn": "fsPDTbl",
    "sh": "co",
    "bash": "co",
}

_BUNDLE_RE = re.compile(r"^-[A-Za-z]+$")


def canonical_command(word: str) -> str:
    masked = _mask_expansions(word)
    name = masked.rstrip("/").rsplit("/", 1)[-1] or masked
    if re.fullmatch(r"pip[23](\.\d+)?", name):
        name = "pip"
    return _sanitize(name) or "?"


def _arg_items(cmd: str, args: list[str], positions: list[int]) -> list[tuple[str, bool, int]]:
    """Expand arguments into (text, is_switch, position) triples."""
    vflags = VALUE_FLAGS.get(cmd, "")
    items: list[tuple[str, bool, int]] = []
    for arg, pos in zip(args, positions):
        if arg.startswith("--") and len(arg) > 2:
            name, eq, val = arg.partition("=")
            items.append((_sanitize(name), False, pos))
            if eq:
                items.extend((t, False, pos) for t in substitute(unquote(val)))
        elif _BUNDLE_RE.match(arg):
            letters = arg[1:]
            value_at = [i for i, c in enumerate(letters) if c in vflags]
            if not value_at:
                items.extend((f"-{c}", True, pos) for c in letters)
            elif value_at == [len(letters) - 1]:
                items.extend((f"-{c}", True, pos) for c in letters[:-1])
                items.append((f"-{letters[-1]}", False, pos))
            else:
                items.append((arg, False, pos))
        else:
            items.extend((t, False, pos) for t in substitute(arg))
    return _sort_switch_runs(items)


def _sort_switch_runs(items: list[tuple[str, bool, int]]) -> list[tuple[str, bool, int]]:
    # Adjacent single-letter switches form an unordered set; emit them in a
    # fixed (reverse lexicographic) order so "-rf", "-fr" and "-r -f" agree.
    out: list[tuple[str, bool, int]] = []
    run: list[tuple[str, bool, int]] = []

    def drain() -> None:
        if run:
            run.sort(key=lambda it: (it[0][1].lower(), it[0][1]), reverse=True)
            # a repeated switch carries no extra information
            seen = set()
            for it in run:
                if it[0] not in seen:
                    seen.add(it[0])
                    out.append(it)
            run.clear()

    for it in items:
        if it[1]:
            run.append(it)
        else:
            drain()
            out.append(it)
    drain()
    return out


# ---------------------------------------------------------------------------
# Emission
# ---------------------------------------------------------------------------

VERBATIM_INSTRUCTIONS = frozenset({"EXPOSE", "STOPSIGNAL", "USER"})
SILENT_INSTRUCTIONS = frozenset({"ONBUILD", "HEALTHCHECK", "LABEL", "MAINTAINER"})


def _from_token(inst: Instruction) -> str:
    image = _sanitize(_mask_expansions(inst.image or "")) or "?"
    tag = (inst.tag or "").lower()
    specific = inst.digest is not None or (tag != "" and tag != "latest")
    return f"FROM-IMAGE-[{image}]-TAG-[{'SPECIFIC' if specific else 'LATEST'}]"


def _docker_arg_texts(inst: Instruction) -> list[str]:
    kw = inst.keyword
    out: list[str] = [f"--{name}" for name, _ in inst.flags]
    if inst.form == EXEC_FORM:
        words = inst.args
    elif kw in ("CMD", "ENTRYPOINT"):
        words = [unquote(w) for w in _split_plain(inst.raw)]
    else:
        words = [unquote(w) for w in inst.args]

    if kw in VERBATIM_INSTRUCTIONS:
        out.extend(_sanitize(w) for w in words if _sanitize(w))
    elif kw in ("ENV", "ARG"):
        if kw == "ENV" and words and "=" not in words[0]:
            # legacy form: ENV NAME value with spaces
            out.append(_sanitize(words[0]))
            if len(words) > 1:
                out.extend(substitute(" ".join(words[1:])))
        else:
            for w in words:
                name, eq, val = w.partition("=")
                out.append(_sanitize(name))
                if eq:
                    out.extend(substitute(val))
    else:
        for w in words:
            out.extend(substitute(w))
    return [t for t in out if t]


def _split_plain(text: str) -> list[str]:
    try:
        return split_words(text, 0)
    except DockerfileSyntaxError:
        return text.split()


def _emit_call(tokens: list[IrToken], inst: Instruction, index: int,
               command: str, args: list[str], cmd_pos: int, positions: list[int]) -> None:
    cmd = canonical_command(command)
    tokens.append(IrToken(SHELL_CMD, shell_cmd_token(cmd), inst.locate(cmd_pos), index))
    for text, _, pos in _arg_items(cmd, args, positions):
        tokens.append(IrToken(SHELL_ARG, shell_arg_token(cmd, text), inst.locate(pos), index))


def to_ir(ast: DockerfileAst, shells: dict[int, ShellAst]) -> IrSequence:
    """Lower a declaration-stripped AST plus per-RUN shell ASTs to an IR sequence.

    ``shells`` maps the index of each shell-form RUN in ``ast.instructions``
    to its parsed script.
    """
    tokens: list[IrToken] = []
    slices: list[RunSlice] = []
    for index, inst in enumerate(ast.instructions):
        kw = inst.keyword
        origin = (inst.line_span[0], 1)
        if kw in SILENT_INSTRUCTIONS:
            continue
        if kw == "FROM":
            tokens.append(IrToken(DOCKER_INSTR, _from_token(inst), origin, index))
            continue
        tokens.append(IrToken(DOCKER_INSTR, kw, origin, index))
        if kw == "RUN":
            for name, _ in inst.flags:
                tokens.append(IrToken(DOCKER_INSTR, f"RUN-ARG-[--{name}]", origin, index))
            start = len(tokens)
            if inst.form == EXEC_FORM:
                if inst.args:
                    _emit_call(tokens, inst, index, inst.args[0], inst.args[1:], 0,
                               [0] * (len(inst.args) - 1))
            else:
                shell = shells.get(index)
                if shell is None:
                    raise ValueError(f"no shell AST for RUN at line {inst.line_span[0]}")
                for stmt in shell.calls:
                    command, args, cmd_pos, positions = effective_call(stmt)
                    _emit_call(tokens, inst, index, command, args, cmd_pos, positions)
            slices.append(RunSlice(start, len(tokens), index, inst.line_span))
            continue
        for text in _docker_arg_texts(inst):
            tokens.append(IrToken(DOCKER_INSTR, f"{kw}-ARG-[{text}]", origin, index))
    return IrSequence(tokens=tokens, source_name=ast.source_name, run_slices=slices)


def dump_ir(seq: IrSequence) -> str:
    """One token per line: ``index<TAB>kind<TAB>text<TAB>line:col``."""
    return "".join(
        f"{i}\t{t.kind}\t{t.text}\t{t.origin[0]}:{t.origin[1]}\n"
        for i, t in enumerate(seq.tokens)
    )


# ---------------------------------------------------------------------------
# Whole-file pipeline
# ---------------------------------------------------------------------------

@dataclass
class ParsedDockerfile:
    ast: DockerfileAst  # declarations already stripped
    shells: dict[int, ShellAst]
    ir: IrSequence

    @property
    def has_control_flow(self) -> bool:
        return any(s.has_control_flow for s in self.shells.values())

    @property
    def has_run(self) -> bool:
        return any(i.keyword == "RUN" for i in self.ast.instructions)


def parse_and_substitute(text: str, source_name: str = "") -> ParsedDockerfile:
    """Run all three parsing phases; any syntax error rejects the whole file."""
    ast = strip_declarations(parse_dockerfile(text, source_name))
    shells: dict[int, ShellAst] = {}
    for index, inst in enumerate(ast.instructions):
        if inst.keyword == "RUN" and inst.form != EXEC_FORM:
            try:
                shells[index] = parse_shell(inst.raw)
            except ShellSyntaxError as exc:
                line, _ = inst.locate(exc.position)
                raise DockerfileSyntaxError(line, exc.reason, source_name) from None
    return ParsedDockerfile(ast=ast, shells=shells, ir=to_ir(ast, shells))
