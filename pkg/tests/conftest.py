import pytest

from twinsync.config import RunConfig

# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES = []


def small_config(*overrides):
    """Short episodes and few of them: for tests of plumbing, not of learning quality."""
    base = [
        "sim.episode_ms=2000",
        "agent.n_episodes=20",
        "agent.select_window=10",
        "agent.select_every=5",
        "agent.n_validation=2",
        "eval.n_episodes=3",
        "sweep.n_episodes=2",
    ]
    return RunConfig.from_dict({}, base + list(overrides))


@pytest.fixture
def small_cfg():
    return small_config()


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
