import json
import random
from pathlib import Path

import pytest

from cdtw import PolygonalCurve

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def frozen():
    return json.loads((FIXTURES / "frozen.json").read_text())


@pytest.fixture
def fixture_path():
    return lambda name: str(FIXTURES / name)


def random_curve(rng: random.Random, n: int, box: float = 10.0) -> PolygonalCurve:
    pts = [(rng.uniform(0, box), rng.uniform(0, box))]
    while len(pts) < n + 1:
        p = (rng.uniform(0, box), rng.uniform(0, box))
        if abs(p[0] - pts[-1][0]) + abs(p[1] - pts[-1][1]) > 1e-3 * box:
            pts.append(p)
    return PolygonalCurve(pts)
