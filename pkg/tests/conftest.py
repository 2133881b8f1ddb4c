import numpy as np
import pytest

import boxcascade as bc
from boxcascade import backend

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    # compile / import both backends once so timed tests measure the science
    law = bc.uniform_stick()
    for name in ("numba", "numpy"):
        with backend.use(name):
            env = bc.build_environment(law, 1)
            occ = bc.throw_balls(env, 4096, ball_seed=1)
            bc.heights_multi(occ, [2, 3])
            bc.saturation(occ, 1)
            bc.generation_stats(occ, 3)
            occ.count_of((0, 1))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(20260808)
