import pytest

# criterion number -> list of (part, passed, detail)
ACCEPTANCE = {}
CRITERIA = {
    1: "gradients match central differences",
    2: "exactly satisfied constraints give zero penalty",
    3: "Shapley axioms and linear closed form",
    4: "loss weight normalization",
    5: "missingness study (OR scenario)",
    6: "single-feature noise study (SRC scenario)",
    7: "confounder sign recovery (SRC scenario)",
    8: "rerun from lock file is byte-identical",
    9: "metric hand cases",
}


@pytest.fixture
def record():
    """Record one part of an acceptance criterion, then assert it."""

    def _record(number, part, passed, detail=""):
        ACCEPTANCE.setdefault(number, []).append((part, bool(passed), detail))
        assert passed, f"criterion {number} ({part}) failed: {detail}"

    return _record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        parts = ACCEPTANCE[number]
        ok = all(p for _, p, _ in parts)
        tr.write_line(f"{'PASS' if ok else 'FAIL'}  criterion {number}: {CRITERIA.get(number, '')}")
        for part, passed, detail in parts:
            tr.write_line(f"        {'ok  ' if passed else 'FAIL'} {part}: {detail}")
