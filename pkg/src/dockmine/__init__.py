"""Dockerfile rule mining and violation detection."""

from __future__ import annotations

__version__ = "0.1.0"

from .detector import CheckResult, Violation, check_file
from .dockerfile import DockerfileSyntaxError, parse_dockerfile, strip_declarations
from .ir import parse_and_substitute, substitute, to_ir
from .miner import maximal, mine, prefixspan, prune_incomplete, rule_stats
from .rules import builtin_catalog, load_rules
from .shell import parse_shell

__all__ = [
    "CheckResult", "DockerfileSyntaxError", "Violation", "builtin_catalog", "check_file",
    "load_rules", "maximal", "mine", "parse_and_substitute", "parse_dockerfile", "parse_shell",
    "prefixspan", "prune_incomplete", "rule_stats", "strip_declarations", "substitute", "to_ir",
]
