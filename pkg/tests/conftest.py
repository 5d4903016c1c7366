import numpy as np
import pytest

from uerw.camera import study_pose


@pytest.fixture(scope="session")
def skeleton():
    from uerw.kinematics import load_skeleton

    return load_skeleton()


@pytest.fixture(scope="session")
def cameras():
    return {k: study_pose(k, (0.0, 0.0, 1.4)) for k in ("frontal", "offset")}


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    lines = []
    for key in ("passed", "failed"):
        for rep in terminalreporter.stats.get(key, []):
            if rep.when != "call":
                continue
            lines += [v for k, v in getattr(rep, "user_properties", []) if k == "acceptance"]
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
