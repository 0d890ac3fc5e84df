import numpy as np
import pytest

from optoring.model import uniform_ring_params
from optoring.ring import RingParams

# Lines recorded by the acceptance suite, echoed at the end of the session.
ACCEPTANCE_LINES = []

MAIN = dict(L=8, phi=2 * np.pi / 8, g=2e-3, alpha_magnitude=10.0, gamma_c=0.1,
            gamma_m=1e-3, nbar=100.0)


def main_ring(delta_tilde=-1.2, J=0.2, **changes) -> RingParams:
    kw = dict(MAIN, delta_tilde=delta_tilde, J=J)
    kw.update(changes)
    return RingParams(**kw)


@pytest.fixture
def ring_main():
    return main_ring()


@pytest.fixture
def model_main():
    return uniform_ring_params(8, g=2e-3, alpha_magnitude=10.0, delta_tilde=-1.2, J=0.2,
                               gamma_c=0.1, gamma_m=1e-3, nbar=100.0, phi=2 * np.pi / 8)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
