"""Tests for the sunflower finders"""

import math

import pytest

from conftest import FIXTURES, random_family
from hamming_forge.core.set_family import SetFamily, popcount, read_family_file, sparsity, to_mask
from hamming_forge.errors import MalformedInput, PreconditionViolation
from hamming_forge.processors.generator_search import find_generator
from hamming_forge.processors.sunflower_finder import (
    NotFound, Sunflower, erdos_rado_bound, find_sunflower_er, find_sunflower_small_core,
    sunflower_from_dict, sunflower_to_dict, verify_sunflower
)


def masks(*sets):
    return tuple(to_mask(s) for s in sets)


@pytest.fixture
def pair_rooted() -> SetFamily:
    return read_family_file(str(FIXTURES / 'pair_rooted_family.json'))


class TestVerify:
    def test_valid_sunflower(self, example1):
        F = Sunflower(to_mask([1]), masks([2, 3], [4, 6]))
        assert verify_sunflower(F, example1)
        assert F.members == example1.members

    def test_rejections(self, example1):
        assert not verify_sunflower(Sunflower(to_mask([1]), masks([2, 3])), example1)
        assert not verify_sunflower(Sunflower(to_mask([1]), masks([2, 3], [2, 4])), example1)
        assert not verify_sunflower(Sunflower(to_mask([1]), masks([2, 3], [4, 5])), example1)
        assert not verify_sunflower(Sunflower(to_mask([1, 2]), masks([3], [1, 4])), example1)


def test_erdos_rado_bound():
    assert erdos_rado_bound(3, 3) == 48
    assert erdos_rado_bound(1, 2) == 1


class TestErdosRado:
    def test_disjoint_singletons(self):
        U = read_family_file(str(FIXTURES / 'disjoint_singletons_family.json'))
        F = find_sunflower_er(U, 3)
        assert F == Sunflower(0, masks([1], [2], [3]))

    def test_pair_rooted_family(self, pair_rooted):
        F = find_sunflower_er(pair_rooted, 3)
        assert F.core == to_mask([1, 2])
        assert F.petals == masks([3], [4], [5])
        assert verify_sunflower(F, pair_rooted)

    def test_example1_with_two_petals(self, example1):
        F = find_sunflower_er(example1, 2)
        assert F == Sunflower(to_mask([1]), masks([2, 3], [4, 6]))

    def test_exhaustive_search_recovers_where_greedy_fails(self):
        U = SetFamily.from_sets(6, 2, [[1, 2], [1, 3], [2, 4], [5, 6]])
        F = find_sunflower_er(U, 3)
        assert F == Sunflower(0, masks([1, 3], [2, 4], [5, 6]))

    def test_not_found(self):
        U = SetFamily.from_sets(6, 2, [[1, 2], [1, 3], [2, 4], [3, 5]])
        result = find_sunflower_er(U, 3)
        assert isinstance(result, NotFound)
        assert 'exhaustive' in result.reason
        assert isinstance(find_sunflower_er(U, 5), NotFound)

    def test_families_above_the_bound_always_hold_one(self, rng):
        for _ in range(500):
            m = int(rng.integers(1, 4))
            delta = int(rng.integers(2, 4))
            bound = erdos_rado_bound(m, delta)
            n = int(rng.integers(max(m + 1, 8), 13))
            space = math.comb(n, m)
            assert space > bound
            U = random_family(rng, n, m, size=int(rng.integers(bound + 1, min(space, bound + 40) + 1)))
            F = find_sunflower_er(U, delta)
            assert isinstance(F, Sunflower)
            assert len(F.petals) == delta
            assert verify_sunflower(F, U)

    def test_delta_must_be_at_least_two(self, example1):
        with pytest.raises(PreconditionViolation):
            find_sunflower_er(example1, 1)


class TestSmallCore:
    def test_pair_rooted_family(self, pair_rooted):
        F = find_sunflower_small_core(pair_rooted, 3, 4, 1.0, rate=1.2)
        assert F == Sunflower(to_mask([1, 2]), masks([3], [5], [7]))
        assert verify_sunflower(F, pair_rooted)

    def test_core_respects_the_generator_size_bound(self, rng):
        rate = 1.2
        for _ in range(30):
            n = int(rng.integers(10, 13))
            a, b = sorted(int(v) for v in rng.choice(n, size=2, replace=False) + 1)
            U = SetFamily.from_sets(n, 3, [[a, b, x] for x in range(1, n + 1) if x not in (a, b)])
            F = find_sunflower_small_core(U, 3, 4, 1.0, rate=rate)
            assert isinstance(F, Sunflower)
            assert F.core == to_mask([a, b])
            assert popcount(F.core) <= sparsity(U) / rate + 1e-9
            assert verify_sunflower(F, U)

        for _ in range(30):
            U = random_family(rng, 12, 2, size=int(rng.integers(10, 67)))
            generator, _ = find_generator(U, 4, 1.0, rate=rate)
            assert popcount(generator.g) <= generator.size_bound + 1e-9
            F = find_sunflower_small_core(U, 3, 4, 1.0, rate=rate)
            if isinstance(F, Sunflower):
                assert F.core == generator.g
                assert verify_sunflower(F, U)
            else:
                assert F.generator.g == generator.g

    def test_default_rate_reports_the_empty_generator(self, pair_rooted):
        # eps' l / lambda = 1 <= m^2, so Phase I is skipped
        result = find_sunflower_small_core(pair_rooted, 3, 4, 1.0)
        assert isinstance(result, NotFound)
        assert result.reason == "fewer than 3 disjoint valid sets"
        assert result.generator.g == 0
        assert result.generator.size_bound == math.inf
        assert not result.generator.maximal
        assert find_sunflower_er(pair_rooted, 3) == Sunflower(to_mask([1, 2]), masks([3], [4], [5]))

    def test_full_family_has_an_empty_core(self):
        U = SetFamily.full(12, 2)
        F = find_sunflower_small_core(U, 3, 4, 1.0)
        assert F == Sunflower(0, masks([1, 2], [5, 6], [9, 10]))

    def test_sets_that_do_not_fit(self, example1):
        result = find_sunflower_small_core(example1, 3, 5, 1.0)
        assert isinstance(result, NotFound)
        assert result.generator is not None
        assert 'generator' in sunflower_to_dict(result)

    def test_node_budget(self, pair_rooted):
        result = find_sunflower_small_core(pair_rooted, 3, 4, 1.0, rate=1.2, node_budget=1)
        assert isinstance(result, NotFound)
        assert result.reason == "node budget exhausted"

    def test_delta_must_be_at_least_two(self, example1):
        with pytest.raises(PreconditionViolation):
            find_sunflower_small_core(example1, 0, 5, 1.0)


class TestSerialization:
    def test_to_dict_and_back(self, example1):
        F = find_sunflower_er(example1, 2)
        data = sunflower_to_dict(F)
        assert data == {'found': True, 'core': [1], 'petals': [[2, 3], [4, 6]]}
        assert sunflower_from_dict(data) == F

    def test_bad_dict(self):
        with pytest.raises(MalformedInput):
            sunflower_from_dict({'core': [1]})
        with pytest.raises(MalformedInput):
            sunflower_from_dict({'core': [0], 'petals': [[1]]})
