import numpy as np
import pytest

from nwl.kernel import build_kernel, kernel_derivative
from nwl.solver import continue_branch, profile_at_ratio
from nwl.spectral import PeriodicGrid
from nwl.symbols import Symbol, SymbolKind, whitham


def oscillatory_symbol():
    """Non-CM symbol whose kernel has a bump near x = 1 (negative control)."""
    return Symbol(SymbolKind.INHOMOGENEOUS, -np.inf, "oscillatory",
                  lambda k: np.exp(-0.1 * k) * (1.0 + 0.9 * np.cos(k)))


@pytest.fixture(scope="session")
def whitham_branch_256():
    return continue_branch(whitham(), 0.9, n=256)


@pytest.fixture(scope="session")
def whitham_branch_1024():
    return continue_branch(whitham(), 0.995, n=1024)


@pytest.fixture(scope="session")
def mid_wave_512():
    br = continue_branch(whitham(), 0.6, n=512)
    return profile_at_ratio(br, 0.5)


@pytest.fixture(scope="session")
def small_wave_256(whitham_branch_256):
    return whitham_branch_256.profiles[2]


@pytest.fixture(scope="session")
def whitham_fine_kernel():
    g = PeriodicGrid(16384)
    return build_kernel(whitham(), g, 10**6), kernel_derivative(whitham(), g, 10**6)
