#!/usr/bin/python3
"""
Binomial Engine - exact binomial arithmetic, logarithmic approximations and bound checks
Exact big-integer evaluation with high-precision logs, the S(x) series, and calibrated error constants
"""

import math
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, asdict
from decimal import Decimal, Context, ROUND_CEILING
from functools import lru_cache
from typing import Dict, List, Any, Optional, Tuple

from hamming_forge.config import FORGE_CONFIG, constant_value, tolerance
from hamming_forge.errors import PreconditionViolation

logger = logging.getLogger(__name__)

MANTISSA_BITS = 96

_context = Context(prec=FORGE_CONFIG['ln_precision_digits'])
_LN2 = _context.ln(Decimal(2))


@dataclass(frozen=True)
class ApproxReport:
    """Exact value against an approximation and the inequality bound it is checked with"""
    exact: float
    approx: float
    abs_error: float
    bound: float
    holds: bool
    lower: Optional[float] = None
    upper: Optional[float] = None

    def to_dict(self) -> Dict[str, Any]:
        return {k: v for k, v in asdict(self).items() if v is not None}


def exact_binom(p: int, q: int) -> int:
    """C(p, q), zero outside 0 <= q <= p"""
    if p < 0 or q < 0 or q > p:
        return 0
    return math.comb(p, q)


def ln_big(x: int) -> float:
    """Natural log of a positive exact integer, good to about 1e-15 relative"""
    if x <= 0:
        raise PreconditionViolation(f"ln_big needs a positive integer, got {x}")
    shift = max(0, x.bit_length() - MANTISSA_BITS)
    mantissa = Decimal(x >> shift)
    value = _context.ln(mantissa)
    if shift:
        value = _context.add(value, _context.multiply(Decimal(shift), _LN2))
    return float(value)


@lru_cache(maxsize=1 << 16)
def ln_binom(p: int, q: int) -> float:
    value = exact_binom(p, q)
    if value == 0:
        raise PreconditionViolation(f"ln C({p},{q}) is undefined: the coefficient is zero")
    return ln_big(value)


def check_identity_basic1(p: int, q: int, r: int) -> bool:
    """C(p,r) C(p-r,q-r) == C(p,q) C(q,r)"""
    return exact_binom(p, r) * exact_binom(p - r, q - r) == exact_binom(p, q) * exact_binom(q, r)


def check_identity_vandermonde(p: int, r: int, q: int) -> bool:
    """sum_j C(p-r, j) C(r, q-j) == C(p, q)"""
    if not 0 <= r <= p:
        raise PreconditionViolation(f"Vandermonde needs 0 <= r <= p, got p={p}, r={r}")
    total = sum(exact_binom(p - r, j) * exact_binom(r, q - j) for j in range(0, max(q, 0) + 1))
    return total == exact_binom(p, q)


def s_function(x: float, tol: float = 1e-12) -> float:
    """Series sum_{j>=1} x^j / (j (j+1)), cut once the geometric tail bound drops below tol"""
    if not 0.0 < x < 1.0:
        raise PreconditionViolation(f"S(x) needs 0 < x < 1, got {x}")
    if tol <= 0:
        raise PreconditionViolation(f"tol must be positive, got {tol}")

    total = 0.0
    power = x
    j = 1
    while True:
        total += power / (j * (j + 1))
        power *= x
        # power is now x^(j+1)
        if power / ((j + 1) * (1.0 - x)) < tol:
            break
        j += 1
    return total


def s_closed_form(x: float) -> float:
    """S(x) = 1 + (1-x) ln(1-x) / x"""
    if not 0.0 < x < 1.0:
        raise PreconditionViolation(f"S(x) needs 0 < x < 1, got {x}")
    return 1.0 + (1.0 - x) * math.log1p(-x) / x


def _approx_value(p: int, q: int) -> float:
    x = q / p
    head = q * (math.log(p / q) + 1.0 - s_closed_form(x))
    return head + 0.5 * math.log(p / (2.0 * math.pi * q * (p - q)))


def approx_ln_binom(p: int, q: int, K: Optional[float] = None) -> ApproxReport:
    """ln C(p,q) against its entropy-style approximation, bound K / min(q, p-q)"""
    if not 0 < q < p:
        raise PreconditionViolation(f"approx_ln_binom needs 0 < q < p, got p={p}, q={q}")
    if K is None:
        K = constant_value('K')

    exact = ln_binom(p, q)
    approx = _approx_value(p, q)
    abs_error = abs(exact - approx)
    bound = K / min(q, p - q)
    return ApproxReport(exact, approx, abs_error, bound, abs_error <= bound + tolerance())


def check_lemma_basic2(n: int, m: int, l: int) -> ApproxReport:
    """Sandwich l ln(1 - m/(n-l)) <= ln C(n-m,l) - ln C(n,l) <= -lm/n"""
    if m < 0 or l < 1 or m > n or l > n or l + m >= n:
        raise PreconditionViolation(f"basic2 needs m, l in [n] and l + m < n, got n={n}, m={m}, l={l}")

    gap = ln_binom(n - m, l) - ln_binom(n, l)
    lower = l * math.log1p(-m / (n - l))
    upper = -l * m / n
    tol = tolerance()
    holds = lower - tol <= gap <= upper + tol
    return ApproxReport(
        exact=gap,
        approx=upper,
        abs_error=abs(gap - upper),
        bound=upper - lower,
        holds=holds,
        lower=lower,
        upper=upper
    )


def basic3_slack(l: int, m: int, j: int) -> float:
    """Left side minus the constant-free right side of the basic3 inequality"""
    if m < 1 or not 1 <= j <= m or m * m > l:
        raise PreconditionViolation(f"basic3 needs m >= 1, j in [m], m^2 <= l; got l={l}, m={m}, j={j}")

    left = ln_binom(l - m, m - j) + ln_binom(m, j)
    right = ln_binom(l, m) - j * math.log(j * l / (m * m)) + j + math.log(j)
    return left - right


def check_lemma_basic3(l: int, m: int, j: int, K: Optional[float] = None) -> bool:
    if K is None:
        K = constant_value('K_basic3')
    return basic3_slack(l, m, j) <= K + tolerance()


def round_half_even(numerator: int, denominator: int) -> int:
    """Nearest integer to numerator/denominator with ties to even, in exact arithmetic"""
    quotient, remainder = divmod(numerator, denominator)
    twice = 2 * remainder
    if twice > denominator or (twice == denominator and quotient % 2 == 1):
        quotient += 1
    return quotient


def proportional_parts(p: int, q: int, r: int) -> Tuple[int, int]:
    return round_half_even(r * p, p + q), round_half_even(r * q, p + q)


def check_proportional(p: int, q: int, r: int, K_prime: Optional[float] = None) -> ApproxReport:
    """ln C(p+q, r) split into proportional parts, bound K' ln(p+q)"""
    if p < 1 or q < 1 or r < 0 or r > p + q:
        raise PreconditionViolation(f"proportional split needs p, q >= 1 and 0 <= r <= p+q, got {p},{q},{r}")
    if K_prime is None:
        K_prime = constant_value('K_prime')

    a, b = proportional_parts(p, q, r)
    exact = ln_binom(p + q, r)
    approx = ln_binom(p, a) + ln_binom(q, b)
    abs_error = abs(exact - approx)
    bound = K_prime * ln_big(p + q)
    return ApproxReport(exact, approx, abs_error, bound, abs_error <= bound + tolerance())


def check_complement_taylor(lam: float) -> ApproxReport:
    """-ln(1 - e^-lam) lies in [e^-lam, e^-lam + e^-2lam] for lam >= 1"""
    if lam < 1:
        raise PreconditionViolation(f"complement Taylor bound needs lam >= 1, got {lam}")
    x = math.exp(-lam)
    value = -math.log1p(-x)
    tol = tolerance()
    return ApproxReport(
        exact=value,
        approx=x,
        abs_error=abs(value - x),
        bound=x * x,
        holds=x - tol <= value <= x + x * x + tol,
        lower=x,
        upper=x + x * x
    )


# Calibration sweeps

def _better(candidate: Tuple[float, Tuple[int, ...]], best: Tuple[float, Tuple[int, ...]]) -> bool:
    if best is None:
        return True
    return candidate[0] > best[0] or (candidate[0] == best[0] and candidate[1] < best[1])


def _approx_sweep_rows(rows: List[int]) -> Tuple[float, Tuple[int, int]]:
    """Max of |error| * min(q, p-q) over the given rows, via the row recurrence"""
    best = None
    for p in rows:
        c = 1
        for q in range(1, p // 2 + 1):
            c = c * (p - q + 1) // q
            scaled = abs(ln_big(c) - _approx_value(p, q)) * q
            if _better((scaled, (p, q)), best):
                best = (scaled, (p, q))
    return best


@lru_cache(maxsize=4)
def _ln_table(n_max: int) -> Tuple[Tuple[float, ...], ...]:
    rows = []
    for n in range(n_max + 1):
        c = 1
        row = [0.0]
        for r in range(1, n + 1):
            c = c * (n - r + 1) // r
            row.append(ln_big(c))
        rows.append(tuple(row))
    return tuple(rows)


def _proportional_sweep_rows(args: Tuple[List[int], int]) -> Tuple[float, Tuple[int, int, int]]:
    rows, q_max = args
    table = _ln_table(max(rows) + q_max)
    best = None
    for p in rows:
        for q in range(1, q_max + 1):
            s = p + q
            log_s = table[s][1]
            for r in range(0, s + 1):
                a = round_half_even(r * p, s)
                b = round_half_even(r * q, s)
                ratio = abs(table[s][r] - table[p][a] - table[q][b]) / log_s
                if _better((ratio, (p, q, r)), best):
                    best = (ratio, (p, q, r))
    return best


def _basic3_sweep(l_max: int) -> Tuple[float, Tuple[int, int, int]]:
    best = None
    for l in range(1, l_max + 1):
        for m in range(1, math.isqrt(l) + 1):
            for j in range(1, m + 1):
                slack = basic3_slack(l, m, j)
                if _better((slack, (l, m, j)), best):
                    best = (slack, (l, m, j))
    return best


def _partition(first: int, last: int, jobs: int) -> List[List[int]]:
    parts = [list(range(first + i, last + 1, jobs)) for i in range(jobs)]
    return [part for part in parts if part]


def _merge(results: List[Tuple[float, Tuple[int, ...]]]) -> Tuple[float, Tuple[int, ...]]:
    best = None
    for result in results:
        if result is not None and _better(result, best):
            best = result
    return best


def _round_up(value: float) -> float:
    return float(Decimal(repr(value)).quantize(Decimal('0.000001'), rounding=ROUND_CEILING))


def _entry(observed: Tuple[float, Tuple[int, ...]], sweep_range: Dict[str, int]) -> Dict[str, Any]:
    return {
        'value': _round_up(observed[0]),
        'observed_max': observed[0],
        'argmax': list(observed[1]),
        'sweep_range': sweep_range,
    }


def calibrate_constants(p_max: int = 2000, basic3_l_max: int = 400,
                        proportional_max: int = 200, jobs: int = 1) -> Dict[str, Any]:
    """Run the three calibration sweeps and return constants-file entries"""
    if p_max < 2 or basic3_l_max < 1 or proportional_max < 1 or jobs < 1:
        raise PreconditionViolation("calibration ranges and jobs must be positive (p_max >= 2)")

    approx_parts = _partition(2, p_max, jobs)
    proportional_jobs = [(rows, proportional_max) for rows in _partition(1, proportional_max, jobs)]

    if jobs == 1:
        approx_results = [_approx_sweep_rows(rows) for rows in approx_parts]
        proportional_results = [_proportional_sweep_rows(args) for args in proportional_jobs]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            approx_results = list(pool.map(_approx_sweep_rows, approx_parts))
            proportional_results = list(pool.map(_proportional_sweep_rows, proportional_jobs))

    approx_best = _merge(approx_results)
    logger.info(f"K sweep done: max {approx_best[0]:.12g} at {approx_best[1]}")
    proportional_best = _merge(proportional_results)
    logger.info(f"K_prime sweep done: max {proportional_best[0]:.12g} at {proportional_best[1]}")
    basic3_best = _basic3_sweep(basic3_l_max)
    logger.info(f"K_basic3 sweep done: max {basic3_best[0]:.12g} at {basic3_best[1]}")

    return {
        'K': _entry(approx_best, {'p_max': p_max}),
        'K_prime': _entry(proportional_best, {'p_max': proportional_max, 'q_max': proportional_max}),
        'K_basic3': _entry(basic3_best, {'l_max': basic3_l_max}),
    }


# Identity suites behind the `identities` command

def identity_suites(pq_max: int = 20, pascal_max: int = 64, basic2_max: int = 60,
                    basic3_max: int = 400, approx_max: int = 2000,
                    proportional_max: int = 60, inject_fault: bool = False) -> List[Dict[str, Any]]:
    """Run every exhaustive identity and bound suite, one summary dict per suite"""
    suites = []

    def record(name: str, sweep: str, checked: int, failures: List[Any]):
        suites.append({
            'suite': name,
            'range': sweep,
            'checked': checked,
            'failures': len(failures),
            'first_failure': failures[0] if failures else None,
        })
        logger.debug(f"suite {name}: {checked} checked, {len(failures)} failures")

    checked, failures = 0, []
    for p in range(pascal_max + 1):
        for q in range(1, p + 1):
            checked += 1
            if exact_binom(p, q) != exact_binom(p - 1, q - 1) + exact_binom(p - 1, q):
                failures.append([p, q])
    record('pascal', f"0 < q <= p <= {pascal_max}", checked, failures)

    checked, failures = 0, []
    for p in range(pq_max + 1):
        for q in range(pq_max + 1):
            for r in range(pq_max + 1):
                checked += 1
                ok = check_identity_basic1(p, q, r)
                if inject_fault and (p, q, r) == (7, 5, 3):
                    ok = not ok
                if not ok:
                    failures.append([p, q, r])
    record('basic1', f"p, q, r in [0, {pq_max}]", checked, failures)

    checked, failures = 0, []
    for p in range(pq_max + 1):
        for r in range(p + 1):
            for q in range(pq_max + 1):
                checked += 1
                if not check_identity_vandermonde(p, r, q):
                    failures.append([p, r, q])
    record('vandermonde', f"0 <= r <= p <= {pq_max}, q <= {pq_max}", checked, failures)

    checked, failures = 0, []
    for n in range(2, basic2_max + 1):
        for m in range(0, n):
            for l in range(1, n - m):
                checked += 1
                if not check_lemma_basic2(n, m, l).holds:
                    failures.append([n, m, l])
    record('basic2', f"n <= {basic2_max}", checked, failures)

    checked, failures = 0, []
    for l in range(1, basic3_max + 1):
        for m in range(1, math.isqrt(l) + 1):
            for j in range(1, m + 1):
                checked += 1
                if not check_lemma_basic3(l, m, j):
                    failures.append([l, m, j])
    record('basic3', f"l <= {basic3_max}, m^2 <= l, j in [m]", checked, failures)

    checked, failures = 0, []
    for p in range(2, approx_max + 1):
        for q in range(1, p // 2 + 1):
            checked += 1
            if not approx_ln_binom(p, q).holds:
                failures.append([p, q])
    record('approx_ln_binom', f"0 < q <= p/2, p <= {approx_max}", checked, failures)

    checked, failures = 0, []
    for p in range(1, proportional_max + 1):
        for q in range(1, proportional_max + 1):
            for r in range(0, p + q + 1):
                checked += 1
                if not check_proportional(p, q, r).holds:
                    failures.append([p, q, r])
    record('proportional', f"p, q <= {proportional_max}, r <= p+q", checked, failures)

    return suites
