import numpy as np
import pytest

from tilestream.manifest import ChunkTables, VideoManifest
from tilestream.sim.traces import ViewpointTrace
from tilestream.tiling import build_layout, fixed_grid_layout


def toy_manifest(chunks=10, seed=0, K=20, uniform=False):
    """Random but valid manifest without rendering frames.

    With ``uniform`` every cell scores ``10 * level`` dB and costs
    ``100 * 2**(level-1)`` bytes.
    """
    rng = np.random.default_rng(seed)
    tables = []
    for _ in range(chunks):
        if uniform:
            of = np.broadcast_to(10.0 * np.arange(6), (12, 24, 6)).copy()
            sizes = np.broadcast_to(np.r_[0, 100 * 2 ** np.arange(5)], (12, 24, 6)).astype(np.int64)
            plain = of.copy()
        else:
            of = np.zeros((12, 24, 6))
            of[..., 1:] = np.cumsum(rng.uniform(2, 15, (12, 24, 5)), axis=2) + 20
            plain = of - rng.uniform(0, 5, (12, 24, 6))
            plain[..., 0] = 0
            plain = np.maximum.accumulate(np.maximum(plain, 0), axis=2)
            sizes = np.zeros((12, 24, 6), dtype=np.int64)
            sizes[..., 1:] = np.cumsum(rng.integers(50, 400, (12, 24, 5)), axis=2)
        tables.append(ChunkTables(of, plain, sizes.copy()))
    layout = fixed_grid_layout() if uniform else build_layout(rng.random((12, 24)), K)
    m = VideoManifest(f"toy-{seed}", 1.0, layout, tables)
    m.validate()
    return m


def static_viewpoint(duration, yaw=0.0, pitch=0.0, rate_hz=30.0):
    t = np.arange(0, duration + 1.0 / rate_hz, 1.0 / rate_hz)
    return ViewpointTrace(t, np.full(t.size, yaw), np.full(t.size, pitch))


@pytest.fixture
def toy():
    return toy_manifest()


_criteria = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, name): numbered acceptance criterion")


def pytest_runtest_logreport(report):
    if report.when == "call" or report.outcome != "passed":
        marks = getattr(report, "criterion", None)
        if marks:
            prev = _criteria.get(marks, ("PASS", 0.0))
            ok = prev[0] == "PASS" and report.outcome == "passed"
            _criteria[marks] = ("PASS" if ok else "FAIL", prev[1] + report.duration)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    m = item.get_closest_marker("criterion")
    if m:
        outcome.get_result().criterion = tuple(m.args)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for (n, name), (status, secs) in sorted(_criteria.items()):
        terminalreporter.write_line(f"criterion {n:>2} {status}  {name} ({secs:.1f} s)")
