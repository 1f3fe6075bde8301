#!/usr/bin/python3
"""
Sunflower Finder
Erdos-Rado recursion with an exhaustive fallback, and the small-core construction from an extension generator
"""

import math
import logging
from dataclasses import dataclass
from typing import Dict, List, Any, Optional, Tuple, Union

from hamming_forge.config import FORGE_CONFIG
from hamming_forge.core.set_family import (
    SetFamily, elements, format_set, full_mask, popcount, subsets_of_size, to_mask
)
from hamming_forge.errors import MalformedInput, PreconditionViolation
from hamming_forge.processors.generator_search import GeneratorResult, find_generator

logger = logging.getLogger(__name__)

EXHAUSTIVE_MAX_N = 12


@dataclass(frozen=True)
class Sunflower:
    core: int
    petals: Tuple[int, ...]

    @property
    def members(self) -> Tuple[int, ...]:
        return tuple(self.core | petal for petal in self.petals)


@dataclass(frozen=True)
class NotFound:
    reason: str
    generator: Optional[GeneratorResult] = None


SunflowerSearch = Union[Sunflower, NotFound]


def verify_sunflower(F: Sunflower, U: SetFamily) -> bool:
    if len(F.petals) < 2:
        return False
    seen = 0
    for petal in F.petals:
        if petal == 0 or petal & F.core or petal & seen:
            return False
        seen |= petal
    sizes = {popcount(member) for member in F.members}
    if len(sizes) != 1:
        return False
    return all(member in U for member in F.members)


def erdos_rado_bound(m: int, delta: int) -> int:
    """(delta - 1)^m m!; more members than this forces a delta-sunflower"""
    return (delta - 1) ** m * math.factorial(m)


def _greedy_disjoint(sets: List[int]) -> List[int]:
    chosen, used = [], 0
    for s in sets:
        if s and s & used == 0:
            chosen.append(s)
            used |= s
    return chosen


def _erdos_rado(sets: List[int], delta: int, core: int) -> Optional[Sunflower]:
    if len(sets) < delta:
        return None
    disjoint = _greedy_disjoint(sets)
    if len(disjoint) >= delta:
        return Sunflower(core, tuple(disjoint[:delta]))

    counts: Dict[int, int] = {}
    for s in sets:
        for e in elements(s):
            counts[e] = counts.get(e, 0) + 1
    if not counts:
        return None
    # most frequent element, least element on ties
    x = min(counts, key=lambda e: (-counts[e], e))
    bit = 1 << (x - 1)
    link = [s & ~bit for s in sets if s & bit]
    return _erdos_rado(link, delta, core | bit)


def _disjoint_petals(petals: List[int], delta: int, budget: List[int]) -> Optional[List[int]]:
    chosen: List[int] = []

    def search(start: int, used: int) -> bool:
        if len(chosen) == delta:
            return True
        for index in range(start, len(petals)):
            budget[0] -= 1
            if budget[0] < 0:
                return False
            petal = petals[index]
            if petal & used:
                continue
            chosen.append(petal)
            if search(index + 1, used | petal):
                return True
            chosen.pop()
        return False

    return list(chosen) if search(0, 0) else None


def _exhaustive(U: SetFamily, delta: int, node_budget: int) -> Optional[Sunflower]:
    budget = [node_budget]
    cores = sorted({c for s in U for size in range(U.m) for c in subsets_of_size(s, size)},
                   key=lambda c: (popcount(c), elements(c)))
    for core in cores:
        petals = [s & ~core for s in U if s & core == core]
        if len(petals) < delta:
            continue
        found = _disjoint_petals(petals, delta, budget)
        if found:
            return Sunflower(core, tuple(found))
        if budget[0] < 0:
            break
    return None


def find_sunflower_er(U: SetFamily, delta: int, node_budget: Optional[int] = None) -> SunflowerSearch:
    """Erdos-Rado recursion; exhaustive search over cores when it fails and n is small"""
    if delta < 2:
        raise PreconditionViolation(f"delta must be >= 2, got {delta}")
    if U.size < delta:
        return NotFound(f"family has {U.size} members, fewer than delta={delta}")

    found = _erdos_rado(list(U.members), delta, 0)
    if found is not None:
        logger.info(f"Erdos-Rado sunflower with core {format_set(found.core)}")
        return found

    if U.n <= EXHAUSTIVE_MAX_N:
        found = _exhaustive(U, delta, node_budget or FORGE_CONFIG['node_budget'])
        if found is not None:
            logger.info(f"Exhaustive sunflower with core {format_set(found.core)}")
            return found
        return NotFound("no sunflower found by recursion or exhaustive search")
    return NotFound("recursion failed above the exhaustive-search size")


def _disjoint_valid_sets(U: SetFamily, g: int, size: int, delta: int,
                         node_budget: int) -> Tuple[Optional[List[Tuple[int, int]]], bool]:
    """Lexicographic-first delta pairwise disjoint valid sets, each with a witness having a nonempty petal"""
    pool = full_mask(U.n) & ~g
    candidates = []
    for y in subsets_of_size(pool, size):
        witness = _petal_witness(U, g, y)
        if witness is not None:
            candidates.append((y, witness))

    chosen: List[Tuple[int, int]] = []
    budget = [node_budget]

    def search(start: int, used: int) -> bool:
        if len(chosen) == delta:
            return True
        for index in range(start, len(candidates)):
            budget[0] -= 1
            if budget[0] < 0:
                return False
            y, witness = candidates[index]
            if y & used:
                continue
            chosen.append((y, witness))
            if search(index + 1, used | y):
                return True
            chosen.pop()
        return False

    found = search(0, 0)
    return (list(chosen) if found else None), budget[0] < 0


def _petal_witness(U: SetFamily, g: int, y: int) -> Optional[int]:
    span = g | y
    for s in U:
        if s & g == g and s & ~span == 0 and s != g:
            return s
    return None


def find_sunflower_small_core(U: SetFamily, delta: int, l: int, lam: float,
                              rate: Optional[float] = None,
                              node_budget: Optional[int] = None,
                              cap: Optional[int] = None) -> SunflowerSearch:
    """Sunflower whose core is an extension generator g of U"""
    if delta < 2:
        raise PreconditionViolation(f"delta must be >= 2, got {delta}")

    generator, _ = find_generator(U, l, lam, rate=rate, cap=cap)
    g = generator.g
    size = l - popcount(g)
    if size < 1 or delta * size > U.n - popcount(g):
        return NotFound(f"{delta} disjoint ({size})-sets do not fit outside g={format_set(g)}", generator)

    chosen, exhausted = _disjoint_valid_sets(U, g, size, delta, node_budget or FORGE_CONFIG['node_budget'])
    if chosen is None:
        reason = "node budget exhausted" if exhausted else f"fewer than {delta} disjoint valid sets"
        return NotFound(reason, generator)

    petals = [witness & ~g for _, witness in chosen]
    result = Sunflower(g, tuple(petals))
    assert verify_sunflower(result, U), "petals from disjoint valid sets must not collide"
    logger.info(f"Small-core sunflower with core {format_set(g)} and {len(petals)} petals")
    return result


def sunflower_to_dict(F: SunflowerSearch) -> Dict[str, Any]:
    if isinstance(F, NotFound):
        data: Dict[str, Any] = {'found': False, 'reason': F.reason}
        if F.generator is not None:
            data['generator'] = F.generator.to_dict()
        return data
    return {
        'found': True,
        'core': list(elements(F.core)),
        'petals': [list(elements(p)) for p in F.petals],
    }


def sunflower_from_dict(data: Dict[str, Any]) -> Sunflower:
    try:
        core = to_mask(data['core'])
        petals = tuple(to_mask(p) for p in data['petals'])
    except (KeyError, TypeError, PreconditionViolation) as e:
        raise MalformedInput(f"Sunflower needs a core list and a petals list of lists: {e}")
    return Sunflower(core, petals)
