"""Local corpus ingestion, quality filtering and file-level scoring."""

from __future__ import annotations

import hashlib
import json
import logging
import os
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Mapping, Optional, Union

from .dockerfile import DockerfileSyntaxError
from .ir import ParsedDockerfile, parse_and_substitute

log = logging.getLogger(__name__)

MIN_LINES = 4


class KeyMismatch(ValueError):
    def __init__(self, missing: set, extra: set):
        super().__init__(f"file sets differ: {len(missing)} only in annotations, "
                         f"{len(extra)} only in predictions")
        self.missing = missing
        self.extra = extra


def is_dockerfile_name(name: str) -> bool:
    return name == "Dockerfile" or name.endswith(".Dockerfile")


def find_dockerfiles(root: Union[str, Path]) -> list[Path]:
    root = Path(root)
    if root.is_file():
        return [root]
    found = []
    for dirpath, dirnames, filenames in os.walk(root):
        dirnames.sort()
        for name in sorted(filenames):
            if is_dockerfile_name(name):
                found.append(Path(dirpath) / name)
    return sorted(found)


def normalize(text: str) -> str:
    text = text.replace("\r\n", "\n").replace("\r", "\n")
    return "\n".join(line.rstrip() for line in text.split("\n"))


def content_hash(text: str) -> str:
    return hashlib.sha256(normalize(text).encode("utf-8")).hexdigest()


@dataclass
class CorpusEntry:
    path: str
    content_hash: str
    line_count: int
    has_run: bool
    has_control_flow: bool
    parse_ok: bool
    reasons: list[str] = field(default_factory=list)
    parsed: Optional[ParsedDockerfile] = field(default=None, repr=False, compare=False)

    @property
    def gold_eligible(self) -> bool:
        return not self.reasons

    def manifest_record(self) -> dict:
        return {"path": self.path, "hash": self.content_hash,
                "gold_eligible": self.gold_eligible, "reasons": list(self.reasons)}


def make_entry(path: str, text: str) -> CorpusEntry:
    line_count = sum(1 for line in normalize(text).split("\n") if line.strip())
    parsed = None
    try:
        parsed = parse_and_substitute(text, path)
    except DockerfileSyntaxError as exc:
        log.info("%s: %s", path, exc)
    has_run = bool(parsed and parsed.has_run)
    has_cf = bool(parsed and parsed.has_control_flow)
    reasons = []
    if parsed is None:
        reasons.append("syntax-error")
    if has_cf:
        reasons.append("control-flow")
    if parsed is not None and line_count < MIN_LINES and not has_run:
        reasons.append("too-small")
    return CorpusEntry(path, content_hash(text), line_count, has_run, has_cf,
                       parsed is not None, reasons, parsed)


def ingest(root: Union[str, Path]) -> list[CorpusEntry]:
    """Collect Dockerfiles under ``root``; later duplicates (by normalized
    content) are dropped in favour of the first path in sorted order."""
    entries: list[CorpusEntry] = []
    seen: set[str] = set()
    for path in find_dockerfiles(root):
        try:
            text = path.read_text(encoding="utf-8")
        except (OSError, UnicodeDecodeError) as exc:
            log.warning("skipping %s: %s", path, exc)
            continue
        digest = content_hash(text)
        if digest in seen:
            continue
        seen.add(digest)
        entries.append(make_entry(str(path), text))
    return entries


def write_manifest(entries: Iterable[CorpusEntry], fh) -> None:
    for e in entries:
        fh.write(json.dumps(e.manifest_record()) + "\n")


def read_annotations(path: Union[str, Path]) -> dict[str, bool]:
    out: dict[str, bool] = {}
    for n, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        name, sep, flag = line.rpartition("\t")
        if not sep or flag.strip() not in ("0", "1"):
            raise ValueError(f"{path}:{n}: expected '<path>\\t<0|1>'")
        out[name] = flag.strip() == "1"
    return out


def write_annotations(labels: Mapping[str, bool], fh) -> None:
    for name in sorted(labels):
        fh.write(f"{name}\t{int(bool(labels[name]))}\n")


@dataclass(frozen=True)
class EvalReport:
    tp: int
    fp: int
    tn: int
    fn: int

    @staticmethod
    def _ratio(num: int, den: int) -> Fraction:
        return Fraction(num, den) if den else Fraction(0)

    @property
    def precision(self) -> Fraction:
        return self._ratio(self.tp, self.tp + self.fp)

    @property
    def recall(self) -> Fraction:
        return self._ratio(self.tp, self.tp + self.fn)

    @property
    def f_measure(self) -> Fraction:
        p, r = self.precision, self.recall
        return 2 * p * r / (p + r) if p + r else Fraction(0)

    def as_dict(self) -> dict:
        d = asdict(self)
        d.update(precision=float(self.precision), recall=float(self.recall),
                 f_measure=float(self.f_measure))
        return d


def evaluate(predictions: Mapping[str, bool], annotations: Mapping[str, bool]) -> EvalReport:
    pk, ak = set(predictions), set(annotations)
    if pk != ak:
        raise KeyMismatch(ak - pk, pk - ak)
    tp = fp = tn = fn = 0
    for name in ak:
        pred, gold = bool(predictions[name]), bool(annotations[name])
        if pred and gold:
            tp += 1
        elif pred:
            fp += 1
        elif gold:
            fn += 1
        else:
            tn += 1
    return EvalReport(tp, fp, tn, fn)
