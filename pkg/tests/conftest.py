import numpy as np
import pytest

from kinksim.equilibria import kink_state, zigzag_state
from kinksim.kink import pn_landscape
from kinksim.model import TrapModel
from kinksim.modes import identify_kink_modes, normal_modes

PAPER_FREQS_HZ = (38.2e3, 232.3e3, 293.0e3)
N_IONS = 34


@pytest.fixture(scope="session")
def trap():
    return TrapModel.from_frequencies(PAPER_FREQS_HZ)


@pytest.fixture(scope="session")
def units(trap):
    return trap.units_for()


@pytest.fixture(scope="session")
def zigzag34(trap):
    return zigzag_state(N_IONS, trap)


@pytest.fixture(scope="session")
def kink34(trap, zigzag34):
    return kink_state(N_IONS, trap, charge=1, zigzag=zigzag34)


@pytest.fixture(scope="session")
def zigzag_spectrum(trap, zigzag34):
    return normal_modes(zigzag34, trap)


@pytest.fixture(scope="session")
def kink_spectrum(trap, kink34):
    return normal_modes(kink34, trap)


@pytest.fixture(scope="session")
def kink_report(trap, kink34, kink_spectrum, zigzag_spectrum):
    return identify_kink_modes(
        kink_spectrum, zigzag_spectrum, kink34.configuration, trap
    )


@pytest.fixture(scope="session")
def pn_symmetric(trap):
    return pn_landscape(trap, N_IONS, charge=1)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20260808)
