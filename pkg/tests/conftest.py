"""Shared fixtures: known Weierstrass-Kronecker factors of the example pencils."""

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


def wk_index3(lam):
    """P_k, Q_k and the canonical pair (N_k, I) for the index-3 example."""
    l = lam
    P = np.array([[l + 1, -1, -l - l * l - 1], [0, 1, -l - 1], [0, 0, 1]], dtype=complex)
    Q = np.array([[1 / (l + 1), 0, 0], [0, 1 / (l + 1), 1 / (l + 1)], [0, 0, 1]], dtype=complex)
    return P, Q, np.diag([1.0, 1.0], 1), np.eye(3)


def wk_index1(lam):
    l = complex(lam)
    e = np.sqrt(l * l + 8 * l)
    P = np.array(
        [[(l - e) / (4 * l), 1, 0], [(l + e) / (4 * l), 1, 0], [0, 1 / (1 - l), 1 / (l - 1)]]
    )
    Q = np.array(
        [
            [4 * l / ((l + e) * e), -4 * l / ((l - e) * e), 0],
            [-l / e, l / e, 0],
            [-l / (e * (l - 1)), l / (e * (l - 1)), 1],
        ]
    )
    return P, Q, np.diag([1.0, 1.0, 0.0]), np.diag([2 * l / (-l - e), 2 * l / (-l + e), 1])


def wk_coil(lam):
    l = complex(lam)
    w = np.sqrt(1 - l)
    P = np.array(
        [
            [-1j / w, -1j * w / l, 1, -1],
            [1j / w, 1j * w / l, 1, -1],
            [0, 0, 1, -1 / l],
            [1 / l, 0, 0, 0],
        ]
    )
    Q = np.array(
        [
            [1 / (2 * (1 - l)), 1 / (2 * (1 - l)), 0, -l / (1 - l)],
            [l / (2 * (1 - l)), l / (2 * (1 - l)), 0, -l / (1 - l)],
            [-1j * l / (2 * w**3), 1j * l / (2 * w**3), -l / (1 - l), 0],
            [-1j * l * l / (2 * w**3), 1j * l * l / (2 * w**3), -l / (1 - l), 0],
        ]
    )
    N = np.zeros((4, 4))
    N[0, 0] = N[1, 1] = N[2, 3] = 1.0
    return P, Q, N, np.diag([-1j * l / w, 1j * l / w, 1, 1])


WK_FIXTURES = {
    "index3-btcs": (wk_index3, 3),
    "radau-index1-inhomog": (wk_index1, 1),
    "coil": (wk_coil, 2),
}


@pytest.fixture(params=sorted(WK_FIXTURES))
def wk_family(request):
    fn, nu = WK_FIXTURES[request.param]
    return request.param, fn, nu


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for num in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[num])
