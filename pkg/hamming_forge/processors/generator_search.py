#!/usr/bin/python3
"""
Generator Search - extension generators of set families
Phase I greedy construction of a maximal generator g, Phase II length boosting and valid-set accounting
"""

import math
import logging
from dataclasses import dataclass, asdict, replace
from typing import Dict, List, Any, Optional, Tuple

import numpy as np
from scipy import stats

from hamming_forge.config import FORGE_CONFIG, check_cap, tolerance
from hamming_forge.core.binom_engine import exact_binom, ln_big
from hamming_forge.core.set_family import (
    SetFamily, elements, format_set, full_mask, popcount, relabel_map,
    restrict, sparsity, subsets_of_size, to_mask
)
from hamming_forge.errors import EmptyFamily, PreconditionViolation

logger = logging.getLogger(__name__)

RNG_NAME = 'PCG64'
CONFIDENCE_LEVEL = 0.99


@dataclass(frozen=True)
class GeneratorResult:
    g: int
    r: float
    kappa_U: float
    kappa_Ug_hat: float
    size_bound: float
    maximal: bool
    l0: int = 0
    generator_size_limit: float = math.inf
    phase1_skipped: bool = False

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data['g'] = list(elements(self.g))
        return data


@dataclass(frozen=True)
class ValidityReport:
    l: int
    valid_count: int
    total_count: int
    complement_sparsity: float
    exact: bool
    sample_size: Optional[int] = None
    seed: Optional[int] = None
    estimate: Optional[float] = None
    ci_low: Optional[float] = None
    ci_high: Optional[float] = None
    population: Optional[int] = None
    rng: Optional[str] = None
    augmented: bool = False
    witness_sound: Optional[bool] = None
    lambda_target: Optional[float] = None
    success: Optional[bool] = None
    history: Optional[Tuple[float, ...]] = None
    monotone: Optional[bool] = None

    def to_dict(self) -> Dict[str, Any]:
        data = {k: v for k, v in asdict(self).items() if v is not None}
        data['mode'] = 'exact' if self.exact else 'sampled'
        if self.history is not None:
            data['history'] = list(self.history)
        return data


def count_sparsity(valid: int, total: int) -> float:
    """-ln(1 - valid/total); +inf when every set is valid"""
    if valid >= total:
        return math.inf
    if valid == 0:
        return 0.0
    return ln_big(total) - ln_big(total - valid)


def _kappa_hat(U: SetFamily, g: int) -> Optional[float]:
    try:
        return sparsity(restrict(U, g))
    except EmptyFamily:
        return None


def _admissible(kappa_hat: Optional[float], kappa_U: float, r: float, size: int) -> bool:
    return kappa_hat is not None and kappa_hat <= kappa_U - r * size + tolerance()


def phase1_find_generator(U: SetFamily, l0: int, rate: Optional[float] = None) -> GeneratorResult:
    """Greedy maximal g with kappa(U_g hat) <= kappa(U) - r |g|"""
    if U.size == 0:
        raise EmptyFamily("Phase I needs a non-empty family")
    if U.m < 1:
        raise PreconditionViolation("Phase I needs m >= 1")
    if rate is None:
        if not U.m * U.m < l0 <= U.n:
            raise PreconditionViolation(f"Phase I needs m^2 < l0 <= n, got m={U.m}, l0={l0}, n={U.n}")
        r = math.log(l0 / (U.m * U.m))
    else:
        if rate <= 0:
            raise PreconditionViolation(f"Explicit rate must be positive, got {rate}")
        r = rate

    kappa_U = sparsity(U)
    g = 0
    kappa_g = kappa_U
    ground = full_mask(U.n)

    while True:
        best = None
        for x in elements(ground & ~g):
            candidate = g | (1 << (x - 1))
            kappa_hat = _kappa_hat(U, candidate)
            if not _admissible(kappa_hat, kappa_U, r, popcount(candidate)):
                continue
            weight = restrict(U, candidate).size
            # strictly larger wins, so the least element keeps ties
            if best is None or weight > best[0]:
                best = (weight, candidate, kappa_hat)
        if best is None:
            break
        _, g, kappa_g = best
        logger.debug(f"Phase I grew g to {format_set(g)}, kappa hat {kappa_g:.6f}")

    maximal = not any(
        _admissible(_kappa_hat(U, g | (1 << (x - 1))), kappa_U, r, popcount(g) + 1)
        for x in elements(ground & ~g)
    )
    logger.info(f"Phase I generator {format_set(g)} (r={r:.6f}, kappa(U)={kappa_U:.6f})")
    return GeneratorResult(
        g=g,
        r=r,
        kappa_U=kappa_U,
        kappa_Ug_hat=kappa_g,
        size_bound=kappa_U / r,
        maximal=maximal,
        l0=l0
    )


def generated_members(U: SetFamily, g: int) -> List[int]:
    """U_g: the members containing g, in family order"""
    return [s for s in U if s & g == g]


def witness_for(U: SetFamily, g: int, y: int) -> Optional[int]:
    """Least s in U with g inside s inside g | y"""
    span = g | y
    for s in U:
        if s & g == g and s & ~span == 0:
            return s
    return None


def _sample_sets(pool: int, size: int, budget: int, seed: int) -> List[int]:
    rng = np.random.default_rng(seed)
    pool_elements = np.array(elements(pool), dtype=np.int64)
    draws = []
    for _ in range(budget):
        chosen = rng.choice(pool_elements, size=size, replace=False) if size else []
        draws.append(to_mask(int(e) for e in chosen))
    return draws


def _confidence_interval(hits: int, trials: int) -> Tuple[float, float]:
    interval = stats.binomtest(hits, trials).proportion_ci(confidence_level=CONFIDENCE_LEVEL)
    return float(interval.low), float(interval.high)


def _count(U: SetFamily, g: int, pool: int, size: int, mode: str, budget: int, seed: int,
           cap: Optional[int], audit: bool) -> Dict[str, Any]:
    members = generated_members(U, g)
    population = exact_binom(popcount(pool), size)
    sound = True

    def is_valid(y: int) -> bool:
        nonlocal sound
        span = g | y
        hit = any(s & ~span == 0 for s in members)
        if hit and audit:
            witness = witness_for(U, g, y)
            sound = sound and witness is not None and witness & g == g and witness & ~span == 0
        return hit

    if mode == 'exact':
        check_cap(f"valid sets of {format_set(g)}", population, cap)
        valid = sum(1 for y in subsets_of_size(pool, size) if is_valid(y))
        return {'valid': valid, 'total': population, 'population': population, 'sound': sound}
    if mode == 'sampled':
        if budget < 1:
            raise PreconditionViolation(f"Sample budget must be positive, got {budget}")
        hits = sum(1 for y in _sample_sets(pool, size, budget, seed) if is_valid(y))
        low, high = _confidence_interval(hits, budget)
        return {'valid': hits, 'total': budget, 'population': population, 'sound': sound,
                'ci': (low, high)}
    raise PreconditionViolation(f"Unknown validity mode {mode!r}")


def _report(l: int, counted: Dict[str, Any], mode: str, budget: int, seed: int,
            augmented: bool = False, audit: bool = False) -> ValidityReport:
    sampled = mode == 'sampled'
    return ValidityReport(
        l=l,
        valid_count=counted['valid'],
        total_count=counted['total'],
        complement_sparsity=count_sparsity(counted['valid'], counted['total']),
        exact=not sampled,
        sample_size=budget if sampled else None,
        seed=seed if sampled else None,
        estimate=counted['valid'] / counted['total'] if sampled else None,
        ci_low=counted['ci'][0] if sampled else None,
        ci_high=counted['ci'][1] if sampled else None,
        population=counted['population'],
        rng=RNG_NAME if sampled else None,
        augmented=augmented,
        witness_sound=counted['sound'] if audit else None
    )


def validity_report(U: SetFamily, g: int, l: int, mode: str = 'exact', budget: int = 4096,
                    seed: int = 0, cap: Optional[int] = None) -> ValidityReport:
    """Count y in C([n] minus g, l - |g|) whose union with g contains a member of U_g"""
    if not popcount(g) <= U.m <= l <= U.n:
        raise PreconditionViolation(f"Need |g| <= m <= l <= n, got |g|={popcount(g)}, m={U.m}, l={l}, n={U.n}")
    pool = full_mask(U.n) & ~g
    counted = _count(U, g, pool, l - popcount(g), mode, budget, seed, cap, audit=False)
    return _report(l, counted, mode, budget, seed)


def phase2_boost(U: SetFamily, g: int, l0: int, i: int, mode: str = 'exact', budget: int = 4096,
                 seed: int = 0, cap: Optional[int] = None) -> ValidityReport:
    """Validity at length |g| + i (l0 - |g|), with the complement sparsity of every step before it"""
    size = popcount(g)
    if i < 1:
        raise PreconditionViolation(f"Boost step must be >= 1, got {i}")
    if l0 < max(size, U.m):
        raise PreconditionViolation(f"l0={l0} is shorter than the members")
    if i * (l0 - size) > U.n - size:
        raise PreconditionViolation(f"Length overflow: {i} * ({l0} - {size}) exceeds {U.n - size}")

    history = []
    report = None
    for step in range(1, i + 1):
        report = validity_report(U, g, size + step * (l0 - size), mode, budget, seed, cap)
        history.append(report.complement_sparsity)
    monotone = all(later >= earlier - tolerance() for earlier, later in zip(history, history[1:]))
    if not monotone:
        logger.warning(f"Phase II complement sparsity is not monotone for g={format_set(g)}: {history}")
    return replace(report, history=tuple(history), monotone=monotone)


def phase2_sparse_slice(U1: SetFamily, b: int) -> Tuple[int, float, SetFamily]:
    """A slice T_j = {t minus b : |t minus b| = j} with kappa(T_j) <= kappa(U1), over [n] minus b"""
    if b & ~full_mask(U1.n):
        raise PreconditionViolation(f"{format_set(b)} is not a subset of [{U1.n}]")
    if any(t & ~b == 0 for t in U1):
        raise PreconditionViolation(f"{format_set(b)} contains a member of the family")

    mapping = relabel_map(U1.n, b)
    ground = U1.n - popcount(b)
    best = None
    for j in range(1, U1.m + 1):
        if j > ground:
            break
        slice_ = {to_mask(mapping[e] for e in elements(t & ~b)) for t in U1 if popcount(t & ~b) == j}
        if not slice_:
            continue
        T_j = SetFamily(ground, j, tuple(slice_))
        kappa = sparsity(T_j)
        if best is None or kappa < best[1]:
            best = (j, kappa, T_j)
    if best is None:
        raise EmptyFamily("Every slice is empty")
    return best


def configured_l0(l: int, lambda_target: float, epsilon_prime: Optional[float] = None) -> int:
    """l0 = min(l, floor(eps' l / lambda))"""
    if lambda_target <= 0:
        raise PreconditionViolation(f"lambda must be positive, got {lambda_target}")
    eps = FORGE_CONFIG['epsilon_prime'] if epsilon_prime is None else epsilon_prime
    return min(l, math.floor(eps * l / lambda_target))


def generator_size_bound(U: SetFamily, l: int, lam: float, epsilon_prime: Optional[float] = None) -> float:
    """kappa(U) / ln(eps l / (m^2 lam)) with eps = eps'^2; +inf when the log is not positive"""
    eps_prime = FORGE_CONFIG['epsilon_prime'] if epsilon_prime is None else epsilon_prime
    ratio = eps_prime * eps_prime * l / (U.m * U.m * lam)
    if ratio <= 1:
        return math.inf
    return sparsity(U) / math.log(ratio)


def find_generator(U: SetFamily, l: int, lambda_target: float, rate: Optional[float] = None,
                   mode: str = 'exact', budget: int = 4096, seed: int = 0,
                   epsilon_prime: Optional[float] = None,
                   cap: Optional[int] = None) -> Tuple[GeneratorResult, ValidityReport]:
    """Phase I at the configured l0, then validity of l-sets over [n] that may meet g"""
    if not U.m <= l <= U.n:
        raise PreconditionViolation(f"Need m <= l <= n, got m={U.m}, l={l}, n={U.n}")
    l0 = configured_l0(l, lambda_target, epsilon_prime)
    generator_size_limit = generator_size_bound(U, l, lambda_target, epsilon_prime)

    if rate is None and l0 <= U.m * U.m:
        r = math.log(l0 / (U.m * U.m)) if l0 > 0 else -math.inf
        generator = GeneratorResult(
            g=0, r=r, kappa_U=sparsity(U), kappa_Ug_hat=sparsity(U),
            size_bound=math.inf, maximal=False, l0=l0, generator_size_limit=generator_size_limit,
            phase1_skipped=True
        )
        logger.info(f"l0={l0} <= m^2={U.m * U.m}: reporting the empty generator")
    else:
        generator = replace(phase1_find_generator(U, l0, rate), generator_size_limit=generator_size_limit)

    counted = _count(U, generator.g, full_mask(U.n), l, mode, budget, seed, cap, audit=True)
    report = _report(l, counted, mode, budget, seed, augmented=True, audit=True)
    success = report.complement_sparsity >= lambda_target
    return generator, replace(report, lambda_target=lambda_target, success=success)
