from pathlib import Path

import pytest

from fsmscg import parse_fsm

FIXTURES = Path(__file__).parent / "fixtures"
FSM_DIR = FIXTURES / "fsm"


def fsm_fixture_paths() -> list[Path]:
    return sorted(FSM_DIR.rglob("*.json"))


@pytest.fixture
def nft_mint():
    return parse_fsm((FSM_DIR / "nft_mint.json").read_bytes())


@pytest.fixture
def escrow():
    return parse_fsm((FSM_DIR / "escrow.json").read_bytes())


ACCEPTANCE: list[str] = []


def verdict(criterion: str, ok: bool, detail: str) -> None:
    """Record a PASS/FAIL line for the end-of-run summary, then assert."""
    ACCEPTANCE.append(f"{'PASS' if ok else 'FAIL'}  {criterion}: {detail}")
    assert ok, detail


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
