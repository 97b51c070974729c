"""Sequential pattern mining over IR token sequences.

Sequences are grouped by shell command (a file lands in every group whose
command it uses), each group is mined with PrefixSpan, reduced to maximal
patterns and finally pruned of patterns whose (command, arguments) tuples are
incomplete.
"""

from __future__ import annotations

import logging
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Optional, Sequence

from .ir import IrSequence, parse_shell_token

log = logging.getLogger(__name__)

DEFAULT_MIN_SUPPORT = Fraction(2, 5)
DEFAULT_MAX_LEN = 12


class EmptyDatabase(ValueError):
    pass


class ZeroAntecedentSupport(ValueError):
    pass


@dataclass
class SequenceDatabase:
    group_command: str
    sequences: list[tuple[str, ...]]
    names: list[str] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.sequences)


@dataclass(frozen=True)
class SequentialPattern:
    tokens: tuple[str, ...]
    support_count: int
    db_size: int

    @property
    def support_fraction(self) -> Fraction:
        return Fraction(self.support_count, self.db_size)


@dataclass(frozen=True)
class PatternStats:
    support: Fraction
    confidence: Fraction
    lift: Fraction


def _as_tokens(seq) -> tuple[str, ...]:
    if isinstance(seq, IrSequence):
        return tuple(seq.texts)
    return tuple(seq)


def group_by_command(corpus: Sequence[IrSequence]) -> dict[str, SequenceDatabase]:
    groups: dict[str, SequenceDatabase] = {}
    for seq in corpus:
        toks = _as_tokens(seq)
        for cmd in sorted(seq.commands_present):
            db = groups.setdefault(cmd, SequenceDatabase(cmd, []))
            db.sequences.append(toks)
            db.names.append(seq.source_name)
    return dict(sorted(groups.items()))


def is_subsequence(needle: Sequence[str], hay: Sequence[str]) -> bool:
    it = iter(hay)
    return all(tok in it for tok in needle)


def _to_fraction(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, float):
        return Fraction(value).limit_denominator(10**6)
    return Fraction(value)


def prefixspan(db, min_support=DEFAULT_MIN_SUPPORT,
               max_len: Optional[int] = DEFAULT_MAX_LEN) -> list[SequentialPattern]:
    """All patterns whose sequence-level support fraction is >= min_support.

    Projected databases are lists of (sequence index, offset) pairs into the
    original sequences rather than copies of suffixes.
    """
    seqs = db.sequences if isinstance(db, SequenceDatabase) else [tuple(s) for s in db]
    n = len(seqs)
    if n == 0:
        raise EmptyDatabase("sequence database is empty")
    threshold = _to_fraction(min_support)
    if not 0 < threshold <= 1:
        raise ValueError(f"min_support must be in (0, 1], got {min_support}")
    # smallest integer count c with c / n >= threshold
    min_count = -((-threshold.numerator * n) // threshold.denominator)
    min_count = max(min_count, 1)

    out: list[SequentialPattern] = []

    def grow(prefix: tuple[str, ...], projected: list[tuple[int, int]]) -> None:
        if max_len is not None and len(prefix) >= max_len:
            return
        # first occurrence of each item in every projected suffix
        first: dict[str, dict[int, int]] = defaultdict(dict)
        for sid, off in projected:
            seq = seqs[sid]
            seen = first
            for pos in range(off, len(seq)):
                tok = seq[pos]
                if sid not in seen[tok]:
                    seen[tok][sid] = pos + 1
        for tok in sorted(first):
            hits = first[tok]
            if len(hits) < min_count:
                continue
            pattern = prefix + (tok,)
            out.append(SequentialPattern(pattern, len(hits), n))
            grow(pattern, sorted(hits.items()))

    grow((), [(i, 0) for i in range(n)])
    return out


def maximal(patterns: Iterable[SequentialPattern]) -> list[SequentialPattern]:
    """Keep patterns that are not a proper subsequence of another pattern."""
    unique: dict[tuple[str, ...], SequentialPattern] = {}
    for p in patterns:
        unique.setdefault(p.tokens, p)

    # A full frequent set is closed under taking subsequences, so a pattern
    # has a proper supersequence in it iff it is one deletion away from a
    # longer member. That check is linear in the input size.
    dominated: set[tuple[str, ...]] = set()
    closed = True
    for toks in unique:
        if len(toks) < 2:
            continue
        for i in range(len(toks)):
            sub = toks[:i] + toks[i + 1:]
            if sub in unique:
                dominated.add(sub)
            else:
                closed = False
    if closed:
        return sort_patterns(p for t, p in unique.items() if t not in dominated)

    ordered = sorted(unique.values(), key=lambda p: (-len(p.tokens), p.tokens))
    kept: list[SequentialPattern] = []
    for p in ordered:
        # any superset is at least as long, so it is already in ``kept`` or is
        # itself a subsequence of something kept (transitivity)
        if not any(len(k.tokens) > len(p.tokens) and is_subsequence(p.tokens, k.tokens)
                   for k in kept):
            kept.append(p)
    return sort_patterns(kept)


def is_tuple_complete(tokens: Sequence[str]) -> bool:
    """Every command token has an argument before the next command and every
    argument token has its command token earlier in the pattern."""
    seen_cmds: set[str] = set()
    open_cmd: Optional[str] = None
    for tok in tokens:
        cmd, arg = parse_shell_token(tok)
        if cmd is None:
            continue  # Docker instruction tokens are exempt
        if arg is None:
            if open_cmd is not None:
                return False
            open_cmd = cmd
            seen_cmds.add(cmd)
        else:
            if cmd not in seen_cmds:
                return False
            if open_cmd == cmd:
                open_cmd = None
    return open_cmd is None


def prune_incomplete(patterns: Iterable[SequentialPattern]) -> list[SequentialPattern]:
    return [p for p in patterns if is_tuple_complete(p.tokens)]


def _count_followed(db_seqs, antecedent: Sequence[str], consequent: Sequence[str]) -> tuple[int, int]:
    """(sequences containing antecedent, those with consequent after it)."""
    with_a = with_both = 0
    for seq in db_seqs:
        end = _earliest_end(antecedent, seq)
        if end is None:
            continue
        with_a += 1
        if is_subsequence(consequent, seq[end:]):
            with_both += 1
    return with_a, with_both


def _earliest_end(needle: Sequence[str], hay: Sequence[str]) -> Optional[int]:
    i = 0
    for pos, tok in enumerate(hay):
        if i == len(needle):
            break
        if tok == needle[i]:
            i += 1
            if i == len(needle):
                return pos + 1
    return 0 if not needle else None


def rule_stats(antecedent: Sequence[str], consequent: Sequence[str], db) -> PatternStats:
    seqs = db.sequences if isinstance(db, SequenceDatabase) else [tuple(s) for s in db]
    if not antecedent:
        raise ValueError("antecedent must be nonempty")
    n = len(seqs)
    with_a, with_both = _count_followed(seqs, antecedent, consequent)
    if with_a == 0:
        raise ZeroAntecedentSupport(f"no sequence contains {list(antecedent)}")
    support = Fraction(with_both, n)
    confidence = Fraction(with_both, with_a)
    q_support = Fraction(sum(1 for s in seqs if is_subsequence(consequent, s)), n)
    lift = confidence / q_support if q_support > 0 else Fraction(0)
    return PatternStats(support, confidence, lift)


def sort_patterns(patterns: Iterable[SequentialPattern]) -> list[SequentialPattern]:
    return sorted(patterns, key=lambda p: (p.tokens, len(p.tokens)))


@dataclass
class GroupResult:
    command: str
    db_size: int
    n_frequent: int = 0
    n_maximal: int = 0
    patterns: list[tuple[SequentialPattern, Optional[PatternStats]]] = field(default_factory=list)
    error: Optional[str] = None


def mine_group(db: SequenceDatabase, min_support=DEFAULT_MIN_SUPPORT,
               max_len: Optional[int] = DEFAULT_MAX_LEN) -> GroupResult:
    result = GroupResult(db.group_command, len(db))
    frequent = prefixspan(db, min_support, max_len)
    top = maximal(frequent)
    kept = prune_incomplete(top)
    result.n_frequent, result.n_maximal = len(frequent), len(top)
    for p in kept:
        stats = None
        if len(p.tokens) >= 2:
            stats = rule_stats(p.tokens[:-1], p.tokens[-1:], db)
        result.patterns.append((p, stats))
    return result


def _mine_group_safe(args) -> GroupResult:
    db, min_support, max_len = args
    try:
        return mine_group(db, min_support, max_len)
    except Exception as exc:  # isolate one group's failure from the rest
        log.warning("mining group %s failed: %s", db.group_command, exc)
        return GroupResult(db.group_command, len(db), error=f"{type(exc).__name__}: {exc}")


def mine(corpus: Sequence[IrSequence], min_support=DEFAULT_MIN_SUPPORT,
         max_len: Optional[int] = DEFAULT_MAX_LEN, jobs: int = 1) -> dict[str, GroupResult]:
    groups = group_by_command(corpus)
    work = [(db, min_support, max_len) for db in groups.values()]
    if jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_mine_group_safe, work))
    else:
        results = [_mine_group_safe(w) for w in work]
    return {r.command: r for r in results}


def report(results: dict[str, GroupResult], min_support=DEFAULT_MIN_SUPPORT,
           max_len: Optional[int] = DEFAULT_MAX_LEN) -> dict:
    """JSON-ready mining report with stable ordering."""
    def num(x: Fraction) -> float:
        return round(float(x), 6)

    groups = []
    for cmd in sorted(results):
        r = results[cmd]
        entry = {
            "command": cmd,
            "db_size": r.db_size,
            "n_frequent": r.n_frequent,
            "n_maximal": r.n_maximal,
            "patterns": [],
        }
        if r.error:
            entry["error"] = r.error
        for p, st in r.patterns:
            rec = {"tokens": list(p.tokens), "support_count": p.support_count,
                   "support": num(p.support_fraction)}
            if st is not None:
                rec["confidence"] = num(st.confidence)
                rec["lift"] = num(st.lift)
            entry["patterns"].append(rec)
        groups.append(entry)
    return {"min_support": num(_to_fraction(min_support)), "max_len": max_len, "groups": groups}
