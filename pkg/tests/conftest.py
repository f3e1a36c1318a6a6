import pytest

from srmg.dd import build_hierarchy, hierarchy_from_fine_shape

# criterion id -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture(scope="session")
def small_hier():
    """4x2x2 ranks, 32x16x16 fine grid, one SR-capable level above the transition."""
    return build_hierarchy((4, 2, 2), pN0V=4, K=1)


@pytest.fixture
def serial_hier():
    def make(shape, K=0):
        return hierarchy_from_fine_shape(shape, (1, 1, 1), K)
    return make
