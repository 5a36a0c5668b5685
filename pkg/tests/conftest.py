import numpy as np
import pytest

from cdalab.kse import KseParams, KseSolver


@pytest.fixture(scope="session")
def kse_params() -> KseParams:
    return KseParams()


@pytest.fixture(scope="session")
def spun_kse_coeffs(kse_params) -> np.ndarray:
    """Reference state 100 time units onto the attractor; shared by the unit
    tests that need a realistic chaotic field."""
    solver = KseSolver(kse_params)
    solver.spin_up(100.0)
    return solver.coeffs.copy()
