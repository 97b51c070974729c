from __future__ import annotations

from pathlib import Path

import pytest

FIXTURES = Path(__file__).parent / "fixtures"
RULE_FIXTURES = FIXTURES / "rules"


@pytest.fixture(scope="session")
def catalog():
    from dockmine.rules import builtin_catalog
    return builtin_catalog()


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES
