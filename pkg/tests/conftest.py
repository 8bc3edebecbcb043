import pytest

from rank1.conjugator import build_plan
from rank1.sequences import SequencePair
from rank1.tower import ConstructionParams, build_schedule

# criterion number -> (passed, detail), filled by test_acceptance
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


@pytest.fixture
def record():
    def _record(number: int, passed: bool, detail: str):
        ACCEPTANCE[number] = (bool(passed), detail)
    return _record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}")


@pytest.fixture(scope="session")
def cubic():
    return SequencePair.squares_cubes()


@pytest.fixture(scope="session")
def mild():
    return SequencePair.mild()


@pytest.fixture(scope="session")
def cubic_minimal3(cubic):
    """h = [1, 4, 521]."""
    return build_schedule(ConstructionParams(spacer_margin="minimal"), cubic, 3)


@pytest.fixture(scope="session")
def mild3(mild):
    """h = [1, 11, 666], small enough for index enumeration."""
    return build_schedule(ConstructionParams(), mild, 3)


@pytest.fixture(scope="session")
def mild3_plan(mild3, mild):
    return build_plan(mild3, mild)


@pytest.fixture(scope="session")
def cubic4(cubic):
    return build_schedule(ConstructionParams(), cubic, 4)


@pytest.fixture(scope="session")
def cubic4_plan(cubic4, cubic):
    return build_plan(cubic4, cubic)
