import numpy as np
import pytest

from synth import make_corpus

from codesig.pipeline import read_indexed


def naive_dft(x):
    """O(N^2) DFT straight from the definition, reducing k*t mod N for accurate phases."""
    x = np.asarray(x, dtype=np.float64)
    n = len(x)
    kt = np.outer(np.arange(n), np.arange(n)) % n
    return np.exp(-2j * np.pi * kt / n) @ x


@pytest.fixture(scope="session")
def synthetic(tmp_path_factory):
    """10 classes x 20 weak files plus 30 clean files, written once per session."""
    root = tmp_path_factory.mktemp("synthetic")
    index = make_corpus(root, classes=10, per_class=20, clean=30)
    return root, index, read_indexed(index, root)


@pytest.fixture
def rng():
    return np.random.default_rng(20101)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if rep.when == "call" or (rep.when == "setup" and rep.failed):
        item.stash[_OUTCOME] = rep.outcome


_OUTCOME = pytest.StashKey[str]()
_ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def criterion(request):
    """Records one acceptance criterion; a PASS/FAIL line is printed at session end."""
    yield
    status = "PASS" if request.node.stash.get(_OUTCOME, "failed") == "passed" else "FAIL"
    _ACCEPTANCE_LINES.append(f"[{status}] {request.node.name}: {request.node.function.__doc__.strip()}")


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
