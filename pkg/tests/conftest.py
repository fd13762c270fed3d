from __future__ import annotations

import pytest

from glottokit.wordlist import parse_database

_ACCEPTANCE: list[tuple[str, bool, str]] = []


@pytest.fixture
def record_criterion():
    """Register one acceptance line; printed in the terminal summary."""

    def record(name: str, passed: bool, detail: str = "") -> bool:
        _ACCEPTANCE.append((name, bool(passed), detail))
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, passed, detail in _ACCEPTANCE:
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {name}  {detail}")


ROMANCE_TSV = """\
# tiny hand-made fixture
language\titem_id\tgloss\tform\tcognate_class
Latin\twater\twater\taqua\tA
Latin\tdog\tdog\tcanis\tB
Latin\tsun\tsun\tsol\tC
Spanish\twater\twater\tagua\tA
Spanish\tdog\tdog\tperro\tD
Spanish\tsun\tsun\tsol\tC
French\twater\twater\teau\tA
French\tdog\tdog\tchien\tB
French\tsun\tsun\tsoleil\tC
Italian\twater\twater\tacqua\tA
Italian\tdog\tdog\tcane\tB
Italian\tsun\tsun\tsole\tC
"""

ROMANCE_META = """\
family_name=mini-romance
language.Latin.role=proto
language.Spanish.tags=western
language.French.tags=western
language.Italian.tags=eastern
"""


@pytest.fixture
def romance():
    return parse_database(ROMANCE_TSV, metadata=ROMANCE_META)


@pytest.fixture
def romance_files(tmp_path):
    db = tmp_path / "romance.tsv"
    db.write_text(ROMANCE_TSV, encoding="utf-8")
    (tmp_path / "romance.meta").write_text(ROMANCE_META, encoding="utf-8")
    return db
