"""Rule model, YAML rule loader and the built-in catalog."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional, Union

import yaml

IMPLIES = "implies"
DISJ_IMPLIES = "disj_implies"
SANDWICH = "sandwich"
SPECIAL = "special"
KINDS = (IMPLIES, DISJ_IMPLIES, SANDWICH, SPECIAL)

MANDATORY = "MANDATORY"
ENCOURAGED = "ENCOURAGED"
LEVELS = (MANDATORY, ENCOURAGED)

WITHIN_FILE = "file"
WITHIN_RUN = "run"

WILDCARD = "ANY"

_RULE_KEYS = frozenset({"id", "name", "level", "type", "within", "p", "q", "r",
                        "handler", "confidence", "lift"})
_TOP_KEYS = frozenset({"rules", "version"})

# Rules 1-34 are the semantic rules; the syntactic ones follow.
SEMANTIC_IDS = range(1, 35)
SYNTACTIC_IDS = range(35, 54)


class SchemaError(ValueError):
    def __init__(self, path: str, reason: str):
        super().__init__(f"{path}: {reason}")
        self.path = path
        self.reason = reason


class DuplicateRuleId(ValueError):
    def __init__(self, rule_id: int):
        super().__init__(f"duplicate rule id {rule_id}")
        self.rule_id = rule_id


class UnknownHandler(ValueError):
    def __init__(self, name: str):
        super().__init__(f"unknown special handler {name!r}")
        self.name = name


def _compile_token(text: str):
    """A literal string, or a compiled regex when the token uses ``ANY``."""
    if text == WILDCARD:
        return re.compile(r".*", re.S)
    if "[ANY]" in text:
        parts = text.split("[ANY]")
        return re.compile(r"\[[^\[\]]*\]".join(re.escape(p) for p in parts), re.S)
    return text


@dataclass(frozen=True)
class Matcher:
    tokens: tuple[str, ...]
    _compiled: tuple = field(default=(), init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if not self.tokens:
            raise ValueError("matcher needs at least one token")
        object.__setattr__(self, "_compiled", tuple(_compile_token(t) for t in self.tokens))

    def __len__(self) -> int:
        return len(self.tokens)

    def hits(self, i: int, text: str) -> bool:
        pat = self._compiled[i]
        if isinstance(pat, str):
            return pat == text
        return pat.fullmatch(text) is not None


@dataclass(frozen=True)
class Rule:
    id: int
    name: str
    kind: str
    level: str
    p: tuple[Matcher, ...] = ()
    q: tuple[Matcher, ...] = ()
    r: Optional[Matcher] = None
    special_handler: Optional[str] = None
    within: str = WITHIN_FILE
    confidence: Optional[float] = None
    lift: Optional[float] = None

    @property
    def description(self) -> str:
        return self.name


@dataclass(frozen=True)
class RuleCatalog:
    rules: tuple[Rule, ...]
    version: str = ""

    def __len__(self) -> int:
        return len(self.rules)

    def by_id(self, rule_id: int) -> Rule:
        for rule in self.rules:
            if rule.id == rule_id:
                return rule
        raise KeyError(rule_id)

    def only(self, ids) -> "RuleCatalog":
        wanted = set(ids)
        return RuleCatalog(tuple(r for r in self.rules if r.id in wanted), self.version)


# ---------------------------------------------------------------------------
# Loading
# ---------------------------------------------------------------------------

def _token_list(value, path: str) -> tuple[str, ...]:
    if not isinstance(value, list) or not value:
        raise SchemaError(path, "expected a nonempty list of tokens")
    for i, tok in enumerate(value):
        if not isinstance(tok, str) or not tok:
            raise SchemaError(f"{path}[{i}]", "token must be a nonempty string")
    return tuple(value)


def _matcher_list(value, path: str) -> tuple[Matcher, ...]:
    if not isinstance(value, list) or not value:
        raise SchemaError(path, "expected a nonempty list of matchers")
    return tuple(Matcher(_token_list(m, f"{path}[{i}]")) for i, m in enumerate(value))


def _number(value, path: str, upper: Optional[float] = None) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SchemaError(path, "expected a number")
    if value < 0 or (upper is not None and value > upper):
        raise SchemaError(path, f"out of range: {value}")
    return float(value)


def _parse_rule(raw, path: str, handlers) -> Rule:
    if not isinstance(raw, dict):
        raise SchemaError(path, "rule must be a mapping")
    unknown = set(raw) - _RULE_KEYS
    if unknown:
        raise SchemaError(path, f"unknown field(s): {', '.join(sorted(map(str, unknown)))}")
    for key in ("id", "name", "level", "type"):
        if key not in raw:
            raise SchemaError(path, f"missing field {key!r}")
    rid = raw["id"]
    if isinstance(rid, bool) or not isinstance(rid, int):
        raise SchemaError(f"{path}.id", "must be an integer")
    if not isinstance(raw["name"], str) or not raw["name"].strip():
        raise SchemaError(f"{path}.name", "must be a nonempty string")
    level, kind = raw["level"], raw["type"]
    if level not in LEVELS:
        raise SchemaError(f"{path}.level", f"must be one of {', '.join(LEVELS)}")
    if kind not in KINDS:
        raise SchemaError(f"{path}.type", f"must be one of {', '.join(KINDS)}")
    within = raw.get("within", WITHIN_FILE)
    if within not in (WITHIN_FILE, WITHIN_RUN):
        raise SchemaError(f"{path}.within", "must be 'file' or 'run'")

    p = q = ()
    r = None
    handler = None
    if kind == SPECIAL:
        for key in ("p", "q", "r"):
            if key in raw:
                raise SchemaError(f"{path}.{key}", "not allowed on special rules")
        handler = raw.get("handler")
        if not isinstance(handler, str) or not handler:
            raise SchemaError(f"{path}.handler", "special rules need a handler name")
        if handler not in handlers:
            raise UnknownHandler(handler)
    else:
        if "handler" in raw:
            raise SchemaError(f"{path}.handler", "only allowed on special rules")
        for key in ("p", "q"):
            if key not in raw:
                raise SchemaError(path, f"missing field {key!r}")
        p = _matcher_list(raw["p"], f"{path}.p")
        q = _matcher_list(raw["q"], f"{path}.q")
        if kind in (IMPLIES, SANDWICH):
            if len(p) != 1:
                raise SchemaError(f"{path}.p", f"{kind} takes exactly one matcher")
            if len(q) != 1:
                raise SchemaError(f"{path}.q", f"{kind} takes exactly one matcher")
        if kind == SANDWICH:
            if "r" not in raw:
                raise SchemaError(path, "sandwich rules need 'r'")
            r = Matcher(_token_list(raw["r"], f"{path}.r"))
        elif "r" in raw:
            raise SchemaError(f"{path}.r", "only allowed on sandwich rules")

    conf = _number(raw["confidence"], f"{path}.confidence", 1.0) if "confidence" in raw else None
    lift = _number(raw["lift"], f"{path}.lift") if "lift" in raw else None
    return Rule(id=rid, name=raw["name"].strip(), kind=kind, level=level, p=p, q=q, r=r,
                special_handler=handler, within=within, confidence=conf, lift=lift)


def parse_catalog(data, handlers=None) -> RuleCatalog:
    from .specials import HANDLERS

    handlers = HANDLERS if handlers is None else handlers
    if not isinstance(data, dict):
        raise SchemaError("$", "top level must be a mapping")
    unknown = set(data) - _TOP_KEYS
    if unknown:
        raise SchemaError("$", f"unknown field(s): {', '.join(sorted(map(str, unknown)))}")
    rules_raw = data.get("rules")
    if not isinstance(rules_raw, list):
        raise SchemaError("$.rules", "expected a list")
    version = data.get("version", "")
    if not isinstance(version, (str, int, float)) or isinstance(version, bool):
        raise SchemaError("$.version", "must be a string")
    rules: list[Rule] = []
    seen: set[int] = set()
    for i, raw in enumerate(rules_raw):
        rule = _parse_rule(raw, f"$.rules[{i}]", handlers)
        if rule.id in seen:
            raise DuplicateRuleId(rule.id)
        seen.add(rule.id)
        rules.append(rule)
    return RuleCatalog(tuple(rules), str(version))


def load_rules(source: Union[str, Path]) -> RuleCatalog:
    """Load a catalog from a path, or from YAML text when ``source`` is a str
    that does not name an existing file."""
    if isinstance(source, Path) or (isinstance(source, str) and "\n" not in source
                                    and Path(source).is_file()):
        text = Path(source).read_text(encoding="utf-8")
    else:
        text = source
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise SchemaError("$", f"invalid YAML: {exc}") from None
    return parse_catalog(data)


def catalog_to_data(catalog: RuleCatalog) -> dict:
    out = []
    for rule in catalog.rules:
        rec: dict = {"id": rule.id, "name": rule.name, "level": rule.level, "type": rule.kind}
        if rule.within != WITHIN_FILE:
            rec["within"] = rule.within
        if rule.kind == SPECIAL:
            rec["handler"] = rule.special_handler
        else:
            rec["p"] = [list(m.tokens) for m in rule.p]
            rec["q"] = [list(m.tokens) for m in rule.q]
            if rule.r is not None:
                rec["r"] = list(rule.r.tokens)
        if rule.confidence is not None:
            rec["confidence"] = rule.confidence
        if rule.lift is not None:
            rec["lift"] = rule.lift
        out.append(rec)
    return {"version": catalog.version, "rules": out}


def dump_rules(catalog: RuleCatalog) -> str:
    return yaml.safe_dump(catalog_to_data(catalog), sort_keys=False, width=120)


_BUILTIN: Optional[RuleCatalog] = None


def builtin_catalog() -> RuleCatalog:
    global _BUILTIN
    if _BUILTIN is None:
        text = resources.files("dockmine").joinpath("data/builtin_rules.yaml").read_text("utf-8")
        _BUILTIN = load_rules(text)
    return _BUILTIN
