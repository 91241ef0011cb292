import numpy as np
import pytest

from lshaped.instance import gen_random, tiny_inventory
from lshaped.oracle import exact_sample_set


@pytest.fixture(scope="session")
def tiny():
    return tiny_inventory()


@pytest.fixture(scope="session")
def tiny_full(tiny):
    return exact_sample_set(tiny)


def tiny_f(x: float) -> float:
    """Closed-form objective of the tiny inventory instance."""
    return 1.1 * x - min(x, 1.0) - min(x, 2.0)


def make_test_instance(seed: int):
    """Deterministic family of small bounded instances (n<=8, |S|<=30)."""
    return gen_random(
        seed,
        n=2 + seed % 5,
        r_rows=2 + seed % 3,
        l_extra=2 + seed % 2,
        n_scenarios=4 + (seed * 7) % 27,
        stochastic_q=seed % 3 == 0,
        stochastic_t=seed % 4 == 0,
    )


def box_grid(lb, ub, per_axis: int):
    """Uniform grid over a box, as an array of points."""
    axes = [np.linspace(lo, hi, per_axis) for lo, hi in zip(lb, ub)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)
