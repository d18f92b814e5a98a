import os
import sys

import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

sys.path.insert(0, os.path.dirname(__file__))

from lll_lab.csp import build_instance  # noqa: E402

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow, HealthCheck.filter_too_much])
settings.load_profile("default")


@pytest.fixture
def edge_csp():
    """Two fair bits with the pair (1, 1) forbidden."""
    return build_instance({"variables": [{"domain": ["0", "1"]}] * 2,
                           "constraints": [{"scope": [0, 1], "forbidden": [1, 1]}]})


@pytest.fixture
def path_csp():
    """Three fair bits on a path, no two adjacent ones."""
    return build_instance({"variables": [{"domain": ["0", "1"]}] * 3,
                           "constraints": [{"scope": [0, 1], "forbidden": [1, 1]},
                                           {"scope": [1, 2], "forbidden": [1, 1]}]})


@st.composite
def small_csps(draw, max_n=5, max_q=3, max_m=4, max_k=3):
    """Small instances with rational weights; may be unsatisfiable."""
    n = draw(st.integers(2, max_n))
    q = draw(st.integers(2, max_q))
    variables = []
    for _ in range(n):
        parts = draw(st.lists(st.integers(1, 6), min_size=q, max_size=q))
        tot = sum(parts)
        variables.append({"domain": [str(a) for a in range(q)], "weights": [x / tot for x in parts]})
    m = draw(st.integers(0, max_m))
    cons = []
    for _ in range(m):
        k = draw(st.integers(1, min(max_k, n)))
        scope = draw(st.lists(st.integers(0, n - 1), min_size=k, max_size=k, unique=True))
        forb = draw(st.lists(st.integers(0, q - 1), min_size=k, max_size=k))
        cons.append({"scope": scope, "forbidden": forb})
    return build_instance({"variables": variables, "constraints": cons})


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod and mod.RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(mod.RESULTS):
            terminalreporter.write_line(mod.RESULTS[n])
