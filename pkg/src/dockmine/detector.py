"""Rule checking over IR sequences.

Each rule kind has its own checker. A matcher occurrence is a window
``(start, end)`` of token indices (inclusive) in which the matcher's tokens
appear in order. "After" a window means strictly after its end and "before"
means strictly before its start.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .dockerfile import DockerfileSyntaxError
from .ir import IrSequence, ParsedDockerfile, parse_and_substitute
from .rules import (
    DISJ_IMPLIES,
    IMPLIES,
    MANDATORY,
    SANDWICH,
    SPECIAL,
    WITHIN_RUN,
    Matcher,
    Rule,
    RuleCatalog,
    UnknownHandler,
)
from .specials import HANDLERS

Window = tuple[int, int]


@dataclass(frozen=True)
class Violation:
    rule_id: int
    rule_name: str
    level: str
    location: tuple[int, int]
    message: str
    file: str = ""

    @property
    def line(self) -> int:
        return self.location[0]


@dataclass
class CheckResult:
    source_name: str
    violations: list[Violation] = field(default_factory=list)
    error: Optional[DockerfileSyntaxError] = None

    @property
    def ok(self) -> bool:
        return self.error is None

    @property
    def has_mandatory(self) -> bool:
        return any(v.level == MANDATORY for v in self.violations)


# ---------------------------------------------------------------------------
# Matcher occurrences
# ---------------------------------------------------------------------------

def _earliest_end(m: Matcher, toks: Sequence[str], lo: int, hi: int, upto: int) -> Optional[int]:
    """Index just past the greedy left match of m.tokens[:upto] in [lo, hi)."""
    i = 0
    pos = lo
    while i < upto:
        while pos < hi and not m.hits(i, toks[pos]):
            pos += 1
        if pos >= hi:
            return None
        i += 1
        pos += 1
    return pos


def _latest_start(m: Matcher, toks: Sequence[str], lo: int, end: int) -> Optional[int]:
    """Greatest start of a match of ``m`` whose last token sits at ``end``."""
    i = len(m) - 2
    pos = end - 1
    start = end
    while i >= 0:
        while pos >= lo and not m.hits(i, toks[pos]):
            pos -= 1
        if pos < lo:
            return None
        start = pos
        i -= 1
        pos -= 1
    return start


def occurs(m: Matcher, toks: Sequence[str], lo: int, hi: int) -> bool:
    return hi > lo and _earliest_end(m, toks, lo, hi, len(m)) is not None


def last_occurrence(m: Matcher, toks: Sequence[str], lo: int, hi: int) -> Optional[Window]:
    """Rightmost-compact window: greatest end, then greatest start."""
    after_prefix = _earliest_end(m, toks, lo, hi, len(m) - 1)
    if after_prefix is None:
        return None
    last = len(m) - 1
    for end in range(hi - 1, after_prefix - 1, -1):
        if m.hits(last, toks[end]):
            start = _latest_start(m, toks, lo, end)
            return (start, end)
    return None


def first_occurrence(m: Matcher, toks: Sequence[str], lo: int, hi: int) -> Optional[Window]:
    """Leftmost-compact window: least end, then greatest start."""
    stop = _earliest_end(m, toks, lo, hi, len(m))
    if stop is None:
        return None
    end = stop - 1
    return (_latest_start(m, toks, lo, end), end)


def _last_among(ms: Sequence[Matcher], toks, lo, hi) -> Optional[Window]:
    best = None
    for m in ms:
        w = last_occurrence(m, toks, lo, hi)
        if w is not None and (best is None or (w[1], w[0]) > (best[1], best[0])):
            best = w
    return best


# ---------------------------------------------------------------------------
# Kind checkers. Each returns the windows that triggered a violation.
# ---------------------------------------------------------------------------

def implies_windows(toks: Sequence[str], rule: Rule, lo: int = 0, hi: Optional[int] = None) -> list[Window]:
    hi = len(toks) if hi is None else hi
    p, q = rule.p[0], rule.q[0]
    found: list[Window] = []
    end = hi
    # Walk P occurrences right to left; each one needs Q before the next P.
    while True:
        w = last_occurrence(p, toks, lo, end)
        if w is None:
            break
        if not occurs(q, toks, w[1] + 1, end):
            found.append(w)
        end = w[0]
    found.reverse()
    return found


def disj_implies_windows(toks: Sequence[str], rule: Rule, lo: int = 0, hi: Optional[int] = None) -> list[Window]:
    hi = len(toks) if hi is None else hi
    w = _last_among(rule.p, toks, lo, hi)
    if w is None:
        return []
    if any(occurs(q, toks, w[1] + 1, hi) for q in rule.q):
        return []
    return [w]


def sandwich_windows(toks: Sequence[str], rule: Rule, lo: int = 0, hi: Optional[int] = None) -> list[Window]:
    hi = len(toks) if hi is None else hi
    p, q, r = rule.p[0], rule.q[0], rule.r
    found: list[Window] = []
    pos = lo
    while pos < hi:
        w = first_occurrence(q, toks, pos, hi)
        if w is None:
            break
        if not (occurs(p, toks, lo, w[0]) and occurs(r, toks, w[1] + 1, hi)):
            found.append(w)
        pos = w[1] + 1
    return found


_CHECKERS = {
    IMPLIES: implies_windows,
    DISJ_IMPLIES: disj_implies_windows,
    SANDWICH: sandwich_windows,
}


def _ranges(seq: IrSequence, rule: Rule) -> list[tuple[int, int]]:
    if rule.within == WITHIN_RUN:
        return [(s.start, s.end) for s in seq.run_slices]
    return [(0, len(seq.tokens))]


def _span(seq: IrSequence, w: Window) -> tuple[int, int]:
    lines = [seq.tokens[i].origin[0] for i in range(w[0], w[1] + 1)]
    return (min(lines), max(lines))


def _message(rule: Rule) -> str:
    if rule.kind == IMPLIES:
        return f"expected {' '.join(rule.q[0].tokens)} after {' '.join(rule.p[0].tokens)}"
    if rule.kind == DISJ_IMPLIES:
        return "none of the expected follow-up steps appears after the last trigger"
    return f"{' '.join(rule.q[0].tokens)} needs {' '.join(rule.p[0].tokens)} before and " \
           f"{' '.join(rule.r.tokens)} after"


def check_rule(seq: IrSequence, rule: Rule) -> list[Violation]:
    checker = _CHECKERS[rule.kind]
    toks = seq.texts
    out = []
    for lo, hi in _ranges(seq, rule):
        for w in checker(toks, rule, lo, hi):
            out.append(Violation(rule.id, rule.name, rule.level, _span(seq, w),
                                 _message(rule), seq.source_name))
    return out


def check_implies(seq: IrSequence, rule: Rule) -> list[Violation]:
    return check_rule(seq, rule)


def check_disj_implies(seq: IrSequence, rule: Rule) -> list[Violation]:
    return check_rule(seq, rule)


def check_sandwich(seq: IrSequence, rule: Rule) -> list[Violation]:
    return check_rule(seq, rule)


def run_special(parsed: ParsedDockerfile, rule: Rule) -> list[Violation]:
    handler = HANDLERS.get(rule.special_handler or "")
    if handler is None:
        raise UnknownHandler(rule.special_handler or "")
    return [Violation(rule.id, rule.name, rule.level, span, msg, parsed.ir.source_name)
            for span, msg in handler(parsed)]


def check_parsed(parsed: ParsedDockerfile, catalog: RuleCatalog) -> list[Violation]:
    out: list[Violation] = []
    for rule in catalog.rules:
        if rule.kind == SPECIAL:
            out.extend(run_special(parsed, rule))
        else:
            out.extend(check_rule(parsed.ir, rule))
    out.sort(key=lambda v: (v.location[0], v.rule_id, v.location[1]))
    return out


def check_file(source: str, catalog: RuleCatalog, source_name: str = "") -> CheckResult:
    try:
        parsed = parse_and_substitute(source, source_name)
    except DockerfileSyntaxError as exc:
        return CheckResult(source_name, error=exc)
    return CheckResult(source_name, check_parsed(parsed, catalog))


# ---------------------------------------------------------------------------
# Reporting
# ---------------------------------------------------------------------------

def format_text(v: Violation) -> str:
    return f"{v.file}:{v.location[0]}: [{v.level}] rule {v.rule_id} {v.rule_name}: {v.message}"


def format_record(v: Violation) -> str:
    return json.dumps({
        "file": v.file,
        "line_start": v.location[0],
        "line_end": v.location[1],
        "rule_id": v.rule_id,
        "level": v.level,
        "message": v.message,
    }, sort_keys=False)
