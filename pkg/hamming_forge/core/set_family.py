#!/usr/bin/python3
"""
Set Family - families of m-subsets of [n] and their sparsity algebra
Subsets are int bitmasks (bit i-1 holds element i); families are immutable and kept in lexicographic order
"""

import json
import logging
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations
from pathlib import Path
from typing import Dict, List, Any, Iterable, Iterator, Optional, Tuple

from hamming_forge.config import check_cap, tolerance
from hamming_forge.core.binom_engine import exact_binom, ln_big, ln_binom
from hamming_forge.errors import EmptyFamily, FullFamily, MalformedInput, PreconditionViolation

logger = logging.getLogger(__name__)


# Subset helpers

def to_mask(elements: Iterable[int]) -> int:
    mask = 0
    for element in elements:
        if element < 1:
            raise PreconditionViolation(f"Elements are positive integers, got {element}")
        mask |= 1 << (element - 1)
    return mask


def elements(mask: int) -> Tuple[int, ...]:
    """Sorted elements of a bitmask subset"""
    result = []
    index = 1
    while mask:
        if mask & 1:
            result.append(index)
        mask >>= 1
        index += 1
    return tuple(result)


def set_key(mask: int) -> Tuple[int, ...]:
    """Lexicographic sort key of a subset"""
    return elements(mask)


def popcount(mask: int) -> int:
    return bin(mask).count('1')


def full_mask(n: int) -> int:
    return (1 << n) - 1


def subsets_of_size(pool: int, size: int) -> Iterator[int]:
    """All size-subsets of the pool mask, in lexicographic order"""
    if size < 0:
        return
    for combo in combinations(elements(pool), size):
        yield to_mask(combo)


def format_set(mask: int) -> str:
    return '{' + ','.join(str(e) for e in elements(mask)) + '}'


def log_fraction(value: Fraction) -> float:
    """ln of a positive exact rational"""
    if value <= 0:
        raise PreconditionViolation(f"log of non-positive value {value}")
    return ln_big(value.numerator) - ln_big(value.denominator)


@dataclass(frozen=True)
class SetFamily:
    """A deduplicated family of m-subsets of [n]"""
    n: int
    m: int
    members: Tuple[int, ...] = ()

    def __post_init__(self):
        if self.n < 1:
            raise PreconditionViolation(f"Ground set size must be >= 1, got {self.n}")
        if not 0 <= self.m <= self.n:
            raise PreconditionViolation(f"Member size {self.m} outside [0, {self.n}]")
        ordered = tuple(sorted(set(self.members), key=set_key))
        if len(ordered) != len(self.members):
            raise PreconditionViolation("Family members must be distinct")
        limit = full_mask(self.n)
        for member in ordered:
            if member & ~limit or popcount(member) != self.m:
                raise PreconditionViolation(
                    f"Member {format_set(member)} is not an {self.m}-subset of [{self.n}]")
        object.__setattr__(self, 'members', ordered)

    @classmethod
    def from_sets(cls, n: int, m: int, sets: Iterable[Iterable[int]]) -> 'SetFamily':
        return cls(n, m, tuple(to_mask(s) for s in sets))

    @classmethod
    def full(cls, n: int, m: int, cap: Optional[int] = None) -> 'SetFamily':
        check_cap(f"C([{n}],{m})", exact_binom(n, m), cap)
        return cls(n, m, tuple(subsets_of_size(full_mask(n), m)))

    @property
    def size(self) -> int:
        return len(self.members)

    @property
    def space_size(self) -> int:
        """C(n, m), the size of the full family"""
        return exact_binom(self.n, self.m)

    def __len__(self) -> int:
        return len(self.members)

    def __iter__(self) -> Iterator[int]:
        return iter(self.members)

    def __contains__(self, mask: int) -> bool:
        return mask in self._lookup

    @property
    def _lookup(self) -> frozenset:
        cached = self.__dict__.get('_lookup_cache')
        if cached is None:
            cached = frozenset(self.members)
            object.__setattr__(self, '_lookup_cache', cached)
        return cached

    def as_lists(self) -> List[List[int]]:
        return [list(elements(member)) for member in self.members]

    def is_full(self) -> bool:
        return self.size == self.space_size


# Sparsity algebra

def sparsity(U: SetFamily) -> float:
    """kappa(U) = ln C(n,m) - ln |U|"""
    if U.size == 0:
        raise EmptyFamily("Sparsity of an empty family is undefined")
    if U.is_full():
        return 0.0
    return ln_binom(U.n, U.m) - ln_big(U.size)


def complement_sparsity(U: SetFamily) -> float:
    """-ln(1 - |U|/C(n,m)), computed from exact counts"""
    total = U.space_size
    if U.size == total:
        raise FullFamily("Complement sparsity of the full family is undefined")
    if U.size == 0:
        return 0.0
    return ln_big(total) - ln_big(total - U.size)


def complement(U: SetFamily, cap: Optional[int] = None) -> SetFamily:
    check_cap(f"complement in C([{U.n}],{U.m})", U.space_size, cap)
    return SetFamily(U.n, U.m, tuple(s for s in subsets_of_size(full_mask(U.n), U.m) if s not in U))


def extend(U: SetFamily, l: int, cap: Optional[int] = None) -> SetFamily:
    """Ext(U, l): the l-sets containing some member of U"""
    if not 0 <= l <= U.n:
        raise PreconditionViolation(f"Extension length {l} outside [0, {U.n}]")
    if l < U.m:
        return SetFamily(U.n, l, ())
    if l == U.m:
        return U

    predicted = min(exact_binom(U.n, l), U.size * exact_binom(U.n - U.m, l - U.m))
    check_cap(f"Ext(U,{l})", predicted, cap)

    ground = full_mask(U.n)
    found = set()
    for s in U:
        for extra in subsets_of_size(ground & ~s, l - U.m):
            found.add(s | extra)
    return SetFamily(U.n, l, tuple(found))


@dataclass(frozen=True)
class MarkStats:
    mark_count: int
    double_mark_count: int
    kappa_M: float
    kappa_D_total: float
    kappa_D_proper: float

    def to_dict(self) -> Dict[str, Any]:
        return {
            'mark_count': self.mark_count,
            'double_mark_count': self.double_mark_count,
            'kappa_M': self.kappa_M,
            'kappa_D_total': self.kappa_D_total,
            'kappa_D_proper': self.kappa_D_proper,
        }


def _check_length(U: SetFamily, l: int):
    if not U.m <= l <= U.n:
        raise PreconditionViolation(f"Need m <= l <= n, got m={U.m}, l={l}, n={U.n}")
    if U.size == 0:
        raise EmptyFamily("Marks of an empty family are undefined")


def double_mark_count(U: SetFamily, l: int, cap: Optional[int] = None) -> int:
    """Ordered pairs (t, t') of members with an l-set d containing t and t', counted with d"""
    check_cap("double marks", U.size * U.size, cap)
    total = 0
    for t in U:
        for t_other in U:
            union = popcount(t | t_other)
            total += exact_binom(U.n - union, l - union)
    return total


def mark_stats(U: SetFamily, l: int, cap: Optional[int] = None) -> MarkStats:
    _check_length(U, l)

    marks = U.size * exact_binom(U.n - U.m, l - U.m)
    doubles = double_mark_count(U, l, cap)
    whole = exact_binom(U.n, l) * exact_binom(l, U.m)

    kappa_M = log_fraction(Fraction(whole, marks))
    kappa_D_total = log_fraction(Fraction(whole * exact_binom(l, U.m), doubles))
    return MarkStats(
        mark_count=marks,
        double_mark_count=doubles,
        kappa_M=kappa_M,
        kappa_D_total=kappa_D_total,
        kappa_D_proper=kappa_D_total - sparsity(U)
    )


def check_lemma1(U: SetFamily, l: int, cap: Optional[int] = None) -> bool:
    """kappa(U) <= kappa(D) <= 2 kappa(U) - kappa(Ext(U, l))"""
    stats = mark_stats(U, l, cap)
    kappa_U = sparsity(U)
    kappa_ext = sparsity(extend(U, l, cap))
    tol = tolerance()
    return kappa_U - tol <= stats.kappa_D_total <= 2 * kappa_U - kappa_ext + tol


def check_generating_bound(U: SetFamily, l: int, cap: Optional[int] = None) -> bool:
    """kappa(U) <= ln C(l, m) + kappa(Ext(U, l))"""
    _check_length(U, l)
    return sparsity(U) <= ln_binom(l, U.m) + sparsity(extend(U, l, cap)) + tolerance()


def check_extension_density(U: SetFamily, l: int, cap: Optional[int] = None) -> bool:
    """kappa(Ext(U, l)) <= kappa(U) - kappa_D(proper)"""
    stats = mark_stats(U, l, cap)
    return sparsity(extend(U, l, cap)) <= sparsity(U) - stats.kappa_D_proper + tolerance()


# Spheres

def sphere_subfamily(U: SetFamily, t: int, j: int) -> SetFamily:
    """Members t' of U with |t' minus t| = j"""
    if popcount(t) != U.m or t & ~full_mask(U.n):
        raise PreconditionViolation(f"Sphere center {format_set(t)} is not an {U.m}-subset of [{U.n}]")
    if not 0 <= j <= U.m:
        raise PreconditionViolation(f"Sphere radius {j} outside [0, {U.m}]")
    return SetFamily(U.n, U.m, tuple(s for s in U if popcount(s & ~t) == j))


def sphere_capacity(n: int, m: int, j: int) -> int:
    """Size of the full sphere of radius j around an m-set"""
    return exact_binom(n - m, j) * exact_binom(m, m - j)


def sphere_sparsity(U: SetFamily, t: int, j: int) -> float:
    sphere = sphere_subfamily(U, t, j)
    if sphere.size == 0:
        raise EmptyFamily(f"Sphere of radius {j} around {format_set(t)} is empty")
    return log_fraction(Fraction(sphere_capacity(U.n, U.m, j), sphere.size))


def kappa_S(U: SetFamily, l: int, cap: Optional[int] = None) -> float:
    """Average sparsity of the sphere sub-families, weighted as in the double-mark count"""
    _check_length(U, l)
    check_cap("sphere sums", U.size * U.size, cap)

    weighted = Fraction(0)
    for t in U:
        radii: Dict[int, int] = {}
        for t_other in U:
            radius = popcount(t_other & ~t)
            radii[radius] = radii.get(radius, 0) + 1
        for radius, count in radii.items():
            weighted += Fraction(exact_binom(l - U.m, radius) * count, exact_binom(U.n - U.m, radius))
    return log_fraction(Fraction(U.size * exact_binom(l, U.m)) / weighted)


def check_kappaS_equals_kappaD(U: SetFamily, l: int, cap: Optional[int] = None) -> bool:
    return abs(kappa_S(U, l, cap) - mark_stats(U, l, cap).kappa_D_proper) <= tolerance()


# Space-augmenting extension

def augment_space(U: SetFamily, extra: int, cap: Optional[int] = None) -> SetFamily:
    """The (m + extra)-extension of U inside [n + extra], the new elements being n+1 .. n+extra"""
    if extra < 0:
        raise PreconditionViolation(f"Number of added elements must be >= 0, got {extra}")
    if extra == 0:
        return U
    grown = SetFamily(U.n + extra, U.m, U.members)
    return extend(grown, U.m + extra, cap)


def check_augment_complement(U: SetFamily, extra: int, cap: Optional[int] = None) -> bool:
    """The majority side keeps its sparsity: kappa(complement V) >= kappa(complement U)"""
    V = augment_space(U, extra, cap)
    if U.is_full():
        return V.is_full()
    return complement_sparsity(V) >= complement_sparsity(U) - tolerance()


def augment_sparsity_floor(U: SetFamily, extra: int) -> float:
    """Guaranteed lower bound on kappa(V) from counting marks in the grown space"""
    n_grown = U.n + extra
    return (sparsity(U) + ln_binom(n_grown, U.m) - ln_binom(U.n, U.m)
            - ln_binom(U.m + extra, U.m))


# Restriction to a fixed subset

def restrict(U: SetFamily, g: int) -> SetFamily:
    """The family {s minus g : g inside s} over [n] minus g, relabeled onto [n - |g|]"""
    size = popcount(g)
    if g & ~full_mask(U.n):
        raise PreconditionViolation(f"{format_set(g)} is not a subset of [{U.n}]")
    if size > U.m:
        return SetFamily(max(U.n - size, 1), 0, ())
    if size == U.n:
        return SetFamily(1, 0, (0,) if g in U else ())
    mapping = relabel_map(U.n, g)
    members = []
    for s in U:
        if s & g == g:
            members.append(to_mask(mapping[e] for e in elements(s & ~g)))
    return SetFamily(U.n - size, U.m - size, tuple(members))


def relabel_map(n: int, g: int) -> Dict[int, int]:
    """Order-preserving map from [n] minus g onto [n - |g|]"""
    remaining = [e for e in range(1, n + 1) if not g >> (e - 1) & 1]
    return {e: i + 1 for i, e in enumerate(remaining)}


def lift(mask: int, n: int, g: int) -> int:
    """Map a relabeled subset back into [n] minus g"""
    inverse = {v: k for k, v in relabel_map(n, g).items()}
    return to_mask(inverse[e] for e in elements(mask))


# Splits

@dataclass(frozen=True)
class Split:
    """Ordered tuple of pairwise disjoint parts"""
    parts: Tuple[int, ...]

    @property
    def cards(self) -> Tuple[int, ...]:
        return tuple(popcount(part) for part in self.parts)

    @property
    def union(self) -> int:
        result = 0
        for part in self.parts:
            result |= part
        return result

    def as_lists(self) -> List[List[int]]:
        return [list(elements(part)) for part in self.parts]


def ordered_partitions(pool: int, cards: List[int]) -> Iterator[Tuple[int, ...]]:
    if not cards:
        yield ()
        return
    for part in subsets_of_size(pool, cards[0]):
        for rest in ordered_partitions(pool & ~part, cards[1:]):
            yield (part,) + rest


def multinomial(cards: List[int]) -> int:
    total, result = 0, 1
    for c in cards:
        total += c
        result *= exact_binom(total, c)
    return result


def all_splits(U: SetFamily, cards: List[int], cap: Optional[int] = None) -> List[Split]:
    """Every ordered split of every member into parts of the given cardinalities"""
    if any(c < 1 for c in cards) or sum(cards) != U.m:
        raise PreconditionViolation(f"Split cardinalities {cards} must be positive and sum to m={U.m}")
    check_cap("splits", U.size * multinomial(cards), cap)
    return [Split(parts) for s in U for parts in ordered_partitions(s, list(cards))]


def split_space_size(n: int, cards: List[int]) -> int:
    """N = prod_j C(n - sum of earlier cards, c_j)"""
    used, result = 0, 1
    for c in cards:
        result *= exact_binom(n - used, c)
        used += c
    return result


def split_sparsity(U: SetFamily, cards: List[int], cap: Optional[int] = None) -> float:
    """kappa(W) for the family W of all splits of U"""
    W = all_splits(U, cards, cap)
    if not W:
        raise EmptyFamily("No splits of an empty family")
    return log_fraction(Fraction(split_space_size(U.n, cards), len(W)))


# Family files

def family_to_dict(U: SetFamily) -> Dict[str, Any]:
    return {'n': U.n, 'm': U.m, 'sets': U.as_lists()}


def family_from_dict(data: Dict[str, Any]) -> SetFamily:
    try:
        n, m, sets = int(data['n']), int(data['m']), data['sets']
    except (KeyError, TypeError, ValueError) as e:
        raise MalformedInput(f"Family needs integer n, m and a list of sets: {e}")
    if not isinstance(sets, list):
        raise MalformedInput("Family 'sets' must be a list")

    masks = []
    seen = set()
    for entry in sets:
        if not isinstance(entry, list) or not all(isinstance(e, int) for e in entry):
            raise MalformedInput(f"Bad set entry {entry!r}")
        if len(set(entry)) != len(entry) or len(entry) != m:
            raise MalformedInput(f"Set {entry} does not have {m} distinct elements")
        if any(e < 1 or e > n for e in entry):
            raise MalformedInput(f"Set {entry} is not inside [{n}]")
        mask = to_mask(entry)
        if mask in seen:
            raise MalformedInput(f"Duplicate set {sorted(entry)}")
        seen.add(mask)
        masks.append(mask)
    try:
        return SetFamily(n, m, tuple(masks))
    except PreconditionViolation as e:
        raise MalformedInput(str(e))


def read_family_file(path: str) -> SetFamily:
    try:
        with open(path, 'r') as f:
            data = json.load(f)
    except FileNotFoundError:
        raise MalformedInput(f"Family file not found: {path}")
    except json.JSONDecodeError as e:
        raise MalformedInput(f"Family file {path} is not valid JSON: {e}")
    family = family_from_dict(data)
    logger.debug(f"Loaded family of {family.size} {family.m}-sets over [{family.n}] from {path}")
    return family


def write_family_file(U: SetFamily, path: str):
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w') as f:
        json.dump(family_to_dict(U), f, indent=2)
        f.write('\n')
