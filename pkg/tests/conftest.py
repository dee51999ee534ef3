import time

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from oneshot_vos.protocol import PARENT_CONFIG, base_weights, train_parent
from oneshot_vos.synthvid import make_benchmark

settings.register_profile(
    "default", deadline=None, max_examples=60,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large])
settings.load_profile("default")

BENCH_SEED = 7


@pytest.fixture(scope="session")
def bench():
    """The benchmark the acceptance criteria run on: 16 train, 8 val sequences."""
    return make_benchmark(BENCH_SEED, 16, 8)


@pytest.fixture(scope="session")
def base():
    return base_weights(PARENT_CONFIG.seed)


TIMINGS: dict[str, float] = {}


@pytest.fixture(scope="session")
def parent(bench, base):
    t0 = time.perf_counter()
    out = train_parent(bench.train, PARENT_CONFIG, 1.0, base)
    TIMINGS["parent"] = time.perf_counter() - t0
    return out


@pytest.fixture(scope="session")
def tiny_bench():
    return make_benchmark(3, 2, 2, frame_size=16, num_frames=6)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE_CRITERIA = 11


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    if mod is None:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n in range(1, ACCEPTANCE_CRITERIA + 1):
        if n in mod.RESULTS:
            ok, detail = mod.RESULTS[n]
            tr.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
        else:
            tr.write_line(f"criterion {n:2d}: FAIL  (did not run to completion)")
