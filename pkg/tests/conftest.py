from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from ermbounds.curve import RevenueCurve, concave_hull_curve, load_curve

settings.register_profile("default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

DATA = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def k45_curve() -> RevenueCurve:
    return load_curve(DATA / "n80_k45.json")


@pytest.fixture(scope="session")
def k15_curve() -> RevenueCurve:
    return load_curve(DATA / "n80_k15.json")


unit = st.floats(0.0, 1.0, allow_nan=False)


@st.composite
def hull_curves(draw, max_points: int = 6) -> RevenueCurve:
    """Least concave majorant of random points, normalised to peak value 1."""
    inner = draw(st.lists(st.tuples(unit, unit), min_size=0, max_size=max_points))
    r0, r1 = draw(unit), draw(unit)
    peak = draw(st.tuples(st.floats(0.0, 1.0), st.just(1.0)))
    return concave_hull_curve([(0.0, r0), (1.0, r1), peak, *inner])


def random_hull_curve(rng: np.random.Generator, points: int = 6, peak: float | None = None) -> RevenueCurve:
    """Random hull curve whose maximum 1 is attained only at ``peak`` (random if None).

    Every other point has value in [0, 1), so the hull stays below 1 elsewhere.
    """
    p = rng.random() if peak is None else peak
    pts = [(0.0, rng.random()), (1.0, rng.random()), (p, 1.0), *zip(rng.random(points), rng.random(points))]
    return concave_hull_curve(pts)


# --- acceptance summary ---------------------------------------------------------

_CRITERIA: dict[int, tuple[str, str, float]] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    num, desc = mark.args
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        status = "SKIP" if rep.skipped else "PASS" if rep.passed else "FAIL"
        _CRITERIA[num] = (desc, status, rep.duration)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_CRITERIA):
        desc, status, secs = _CRITERIA[num]
        terminalreporter.write_line(f"criterion {num:>2}: {status}  {desc} ({secs:.1f}s)")
