import sys
import time
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from surselect.cli import RunConfig, summarize  # noqa: E402
from surselect.synthetic import generate_synthetic  # noqa: E402

BENCHMARK = dict(N=500, q=5, p=10, true_support=(0, 1, 2), signal=1.0, noise=0.2, seed=0)
BENCHMARK_RUN = dict(n_iter=1500, burn_in=500, thin=1, kappa=(0.125,), replicates=10_000,
                     seed=0)


@pytest.fixture(scope="session")
def benchmark():
    """Seeded synthetic benchmark: one chain, summarised in both modes."""
    t0 = time.perf_counter()
    data, truth = generate_synthetic(**BENCHMARK)
    rand = summarize(data, RunConfig(mode="random", **BENCHMARK_RUN))
    fixed = summarize(data, RunConfig(mode="fixed", **BENCHMARK_RUN), draws=rand.draws)
    return dict(data=data, truth=truth, random=rand, fixed=fixed,
                seconds=time.perf_counter() - t0)


_ACCEPTANCE = []


@pytest.fixture
def acceptance():
    """Record one acceptance line: ``record(name, passed, detail, seconds)``."""
    def record(name, passed, detail, seconds, status=None):
        status = status or ("PASS" if passed else "FAIL")
        line = f"{status} {name}: {detail} [{seconds:.2f}s]"
        _ACCEPTANCE.append(line)
        print(line)
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE:
            terminalreporter.write_line(line)
