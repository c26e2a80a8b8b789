import pytest

from support import invoke_cli
from swapmix.fixtures import build_adversarial_fixture, build_symbolic_fixture

ACCEPTANCE_RESULTS: dict[str, str] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if item.module.__name__ == "test_acceptance":
        # skips surface at setup; pass/fail at call
        if rep.when == "call" or (rep.when == "setup" and rep.outcome == "skipped"):
            ACCEPTANCE_RESULTS[item.name] = rep.outcome


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    label = {"passed": "PASS", "failed": "FAIL", "skipped": "SKIP"}
    terminalreporter.section("acceptance criteria")
    for name, outcome in ACCEPTANCE_RESULTS.items():
        terminalreporter.write_line(f"{label.get(outcome, outcome.upper())}  {name}")


@pytest.fixture(scope="session")
def symbolic_root(tmp_path_factory):
    """Full annotation fixture: 24 images, 192 questions, encoded features."""
    root = tmp_path_factory.mktemp("symbolic")
    build_symbolic_fixture(root)
    return root


@pytest.fixture(scope="session")
def small_symbolic_root(tmp_path_factory):
    root = tmp_path_factory.mktemp("symbolic_small")
    build_symbolic_fixture(root, n_images=4)
    return root


@pytest.fixture(scope="session")
def adversarial_root(tmp_path_factory):
    """Detector-feature fixture where the baseline provably flips answers."""
    root = tmp_path_factory.mktemp("adversarial")
    build_adversarial_fixture(root)
    return root


@pytest.fixture()
def cli_invoke():
    return invoke_cli
