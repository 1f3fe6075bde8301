"""Shared fixtures for the hamming-forge test suite"""

from pathlib import Path

import numpy as np
import pytest

from hamming_forge.circuits.circuit_engine import AND, OR, CircuitBuilder, all_edges
from hamming_forge.core.set_family import SetFamily, full_mask, subsets_of_size

FIXTURES = Path(__file__).resolve().parent.parent / 'fixtures'


def random_family(rng: np.random.Generator, n: int, m: int, size: int = None) -> SetFamily:
    """Non-empty random family of m-subsets of [n]"""
    space = list(subsets_of_size(full_mask(n), m))
    if size is None:
        size = int(rng.integers(1, len(space) + 1))
    picks = rng.choice(len(space), size=min(size, len(space)), replace=False)
    return SetFamily(n, m, tuple(space[int(i)] for i in picks))


def random_circuit(rng: np.random.Generator, n: int, gates: int, negative_rate: float = 0.0):
    """Random fan-in two circuit over [n] whose root is the last gate"""
    builder = CircuitBuilder(n)
    edges = all_edges(n)
    ids = []
    for _ in range(3):
        edge = edges[int(rng.integers(len(edges)))]
        ids.append(builder.leaf(edge, positive=bool(rng.random() >= negative_rate)))
    for _ in range(gates):
        if rng.random() < 0.3:
            edge = edges[int(rng.integers(len(edges)))]
            ids.append(builder.leaf(edge, positive=bool(rng.random() >= negative_rate)))
        a, b = (ids[int(i)] for i in rng.choice(len(ids), size=2, replace=False))
        ids.append(builder.gate(AND if rng.random() < 0.5 else OR, a, b))
    return builder.build(ids[-1])


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture
def example1() -> SetFamily:
    """n=7, m=3, U = {{1,2,3},{1,4,6}}"""
    return SetFamily.from_sets(7, 3, [[1, 2, 3], [1, 4, 6]])


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240611)
