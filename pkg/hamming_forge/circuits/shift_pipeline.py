#!/usr/bin/python3
"""
Shift Pipeline - shift analysis of monotone CLIQUE circuits
CliqueGenerators, quadruples, valid splits, BlockedEdges, LocalShift and the audits run on every attempt
"""

import math
import logging
from collections import defaultdict
from itertools import combinations
from dataclasses import dataclass, field, asdict
from typing import Dict, List, Any, Optional, FrozenSet, Tuple

import numpy as np

from hamming_forge.circuits.circuit_engine import (
    AND, LEAF, Circuit, Edge, Term, all_edges, clique_edge_mask, cliques_generated_at, dnf,
    edge_key, in_dnf, mask_edges, max_clique_size, term_edges, term_to_list, verify_counterexample
)
from hamming_forge.config import check_cap, enumeration_cap
from hamming_forge.core.binom_engine import exact_binom
from hamming_forge.core.set_family import (
    SetFamily, elements, format_set, full_mask, ordered_partitions, popcount, set_key,
    subsets_of_size, to_mask
)
from hamming_forge.errors import (
    AuditFailure, ChainPropertyViolation, MalformedInput, NoCliquelessBlock, NoRootTerm,
    NoValidSplit, PreconditionViolation, ResidualQ, ShiftFailure
)
from hamming_forge.processors.generator_search import count_sparsity, find_generator

logger = logging.getLogger(__name__)

SPLIT_ENUMERATION_LIMIT = 10**5
SPLIT_DRAWS_PER_REQUEST = 50
PASS, FAIL, NOT_APPLICABLE = 'pass', 'fail', 'n/a'


@dataclass(frozen=True)
class ShiftConfig:
    n: int
    k: int
    q: int
    l: int
    z_block_size: int
    r_block: int
    lambda_c: float
    candidate_budget: int = 5000
    seed: int = 0
    generator_lambda: float = 1.0
    generator_rate: Optional[float] = 0.35
    split_count: int = 64

    def __post_init__(self):
        if self.n < 2 or self.q < 1 or self.n % self.q:
            raise PreconditionViolation(f"q={self.q} must divide n={self.n}")
        if self.l != self.n // self.q:
            raise PreconditionViolation(f"l must equal n/q = {self.n // self.q}, got {self.l}")
        if not 2 <= self.k <= self.n:
            raise PreconditionViolation(f"k must lie in [2, n], got {self.k}")
        if not 0 <= self.z_block_size <= exact_binom(self.l, 2):
            raise PreconditionViolation(f"z_block_size must lie in [0, C(l,2)], got {self.z_block_size}")
        if self.r_block < 2:
            raise PreconditionViolation(f"r_block must be >= 2, got {self.r_block}")
        if self.lambda_c < 0 or self.generator_lambda <= 0:
            raise PreconditionViolation("lambda_c must be >= 0 and generator_lambda > 0")
        if self.generator_rate is not None and self.generator_rate <= 0:
            raise PreconditionViolation(f"generator_rate must be positive, got {self.generator_rate}")
        if self.candidate_budget < 1 or self.split_count < 1:
            raise PreconditionViolation("candidate_budget and split_count must be positive")

    @property
    def forces_clique_free(self) -> bool:
        """(r_block - 1) q < k: a term avoiding z cannot hold a k-clique"""
        return (self.r_block - 1) * self.q < self.k

    @property
    def generator_length(self) -> int:
        return max(self.l, self.k)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'ShiftConfig':
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise MalformedInput(f"Unknown shift config keys: {sorted(unknown)}")
        values = dict(data)
        try:
            if 'l' not in values:
                values['l'] = int(values['n']) // int(values['q'])
            return cls(**values)
        except KeyError as e:
            raise MalformedInput(f"Shift config is missing {e}")
        except (TypeError, PreconditionViolation) as e:
            raise MalformedInput(f"Bad shift config: {e}")

    @classmethod
    def asymptotic_preset(cls, n: int, epsilon: float, **overrides) -> 'ShiftConfig':
        """k = n^(1/4), q = n^(5 eps) (rounded down to a divisor of n), L = n^(11/6), r = n^(1/5), lambda_c = n^eps"""
        if n < 16 or not 0 < epsilon < 0.2:
            raise PreconditionViolation("The asymptotic preset needs n >= 16 and 0 < epsilon < 0.2")
        q = max(1, math.floor(n ** (5 * epsilon)))
        while n % q:
            q -= 1
        l = n // q
        values = dict(
            n=n,
            k=math.floor(n ** 0.25),
            q=q,
            l=l,
            z_block_size=min(math.floor(n ** (11 / 6)), exact_binom(l, 2)),
            r_block=max(2, math.ceil(n ** 0.2)),
            lambda_c=n ** epsilon,
        )
        values.update(overrides)
        return cls(**values)


@dataclass
class NodeGenInfo:
    node: int
    generators: List[int]
    error_cliques: FrozenSet[int]
    generated: Tuple[int, ...]
    reports: List[Dict[str, Any]] = field(default_factory=list)

    def __post_init__(self):
        self.generated_set = frozenset(self.generated)
        self.non_error = tuple(c for c in self.generated if c not in self.error_cliques)


@dataclass(frozen=True)
class Quadruple:
    g: int
    g1: int
    g2: int
    node: int
    witness: int = field(default=0, compare=False, hash=False)

    def key(self) -> Tuple[Any, ...]:
        return (self.node, set_key(self.g), set_key(self.g1), set_key(self.g2))

    def __str__(self) -> str:
        return f"({format_set(self.g)},{format_set(self.g1)},{format_set(self.g2)},{self.node})"


class QuadrupleSet:
    """The quadruples of one circuit with the cliques each one is incident to"""

    def __init__(self, incidence: Dict[Quadruple, Tuple[int, ...]]):
        self.incidence = incidence
        self.quadruples = sorted(incidence, key=Quadruple.key)
        self._by_node: Dict[int, List[Quadruple]] = defaultdict(list)
        self._by_node_g: Dict[Tuple[int, int], List[Quadruple]] = defaultdict(list)
        for sigma in self.quadruples:
            self._by_node[sigma.node].append(sigma)
            self._by_node_g[(sigma.node, sigma.g)].append(sigma)
        self._incident_sets = {sigma: frozenset(cliques) for sigma, cliques in incidence.items()}

    def __len__(self) -> int:
        return len(self.quadruples)

    def __iter__(self):
        return iter(self.quadruples)

    def at_node(self, node: int) -> List[Quadruple]:
        return self._by_node.get(node, [])

    def at(self, node: int, g: int) -> List[Quadruple]:
        return self._by_node_g.get((node, g), [])

    def is_incident(self, sigma: Quadruple, clique: int) -> bool:
        return clique in self._incident_sets.get(sigma, ())

    def least_incident(self, node: int, g: int, clique: int) -> Optional[Quadruple]:
        for sigma in self.at(node, g):
            if self.is_incident(sigma, clique):
                return sigma
        return None


@dataclass
class ShiftState:
    split: Tuple[int, ...]
    z_blocks: List[int] = field(default_factory=list)
    y_choice: Dict[Quadruple, int] = field(default_factory=dict)
    f_choice: Dict[Quadruple, Quadruple] = field(default_factory=dict)
    c_choice: Dict[Quadruple, int] = field(default_factory=dict)
    Q_trace: List[int] = field(default_factory=list)

    @property
    def z(self) -> int:
        mask = 0
        for block in self.z_blocks:
            mask |= block
        return mask


@dataclass
class ShiftOutcome:
    status: str
    config: Dict[str, Any]
    term: Optional[Term] = None
    z: int = 0
    split: Tuple[int, ...] = ()
    Q_trace: List[int] = field(default_factory=list)
    failure_stage: Optional[str] = None
    reason: Optional[str] = None
    detail: Optional[str] = None
    audits: Dict[str, str] = field(default_factory=dict)
    attempts: int = 0
    failure_counts: Dict[str, int] = field(default_factory=dict)
    quadruples: int = 0

    @property
    def success(self) -> bool:
        return self.status == 'success'

    def to_dict(self) -> Dict[str, Any]:
        data = {
            'status': self.status,
            'config': self.config,
            'z': [[e.u, e.v] for e in sorted(mask_edges(self.z))],
            'split': [list(elements(part)) for part in self.split],
            'Q_trace': list(self.Q_trace),
            'audits': dict(sorted(self.audits.items())),
            'attempts': self.attempts,
            'quadruples': self.quadruples,
        }
        if self.term is not None:
            data['term'] = term_to_list(self.term)
        if self.status != 'success':
            data['failure_stage'] = self.failure_stage
            data['reason'] = self.reason
            data['detail'] = self.detail
            data['failure_counts'] = dict(sorted(self.failure_counts.items()))
        return data


# CliqueGenerators

def clique_generators(C: Circuit, cfg: ShiftConfig, cap: Optional[int] = None) -> Dict[int, NodeGenInfo]:
    """Generators and error cliques per node, children before parents"""
    if not C.monotone:
        raise PreconditionViolation("CliqueGenerators runs on monotone circuits only")
    if C.n != cfg.n:
        raise PreconditionViolation(f"Circuit is over [{C.n}] but the config says n={cfg.n}")

    threshold = exact_binom(cfg.n, cfg.k) * math.exp(-cfg.lambda_c)
    info: Dict[int, NodeGenInfo] = {}

    for node_id in C.bottom_up():
        node = C.nodes[node_id]
        generated = cliques_generated_at(C, node_id, cfg.k, cap)
        inherited = set()
        for child in node.children:
            inherited |= info[child].error_cliques
        remaining = [c for c in generated if c not in inherited]
        generators: List[int] = []
        reports: List[Dict[str, Any]] = []

        if node.kind == LEAF:
            if remaining and len(remaining) >= threshold:
                generators.append(node.literal.edge.vertices)
                remaining = []
        else:
            while remaining and len(remaining) >= threshold:
                family = SetFamily(cfg.n, cfg.k, tuple(remaining))
                generator, validity = find_generator(
                    family, cfg.generator_length, cfg.generator_lambda,
                    rate=cfg.generator_rate, cap=cap
                )
                g = generator.g
                generators.append(g)
                reports.append({
                    'g': list(elements(g)),
                    'covered': sum(1 for c in remaining if c & g == g),
                    'complement_sparsity': validity.complement_sparsity,
                    'success': validity.success,
                })
                remaining = [c for c in remaining if c & g != g]

        info[node_id] = NodeGenInfo(
            node=node_id,
            generators=generators,
            error_cliques=frozenset(inherited) | frozenset(remaining),
            generated=generated,
            reports=reports
        )
        logger.debug(f"node {node_id}: {len(generators)} generators, "
                     f"{len(info[node_id].error_cliques)} error cliques")

    logger.info(f"CliqueGenerators done over {len(info)} nodes (threshold {threshold:.6g})")
    return info


# Quadruples

def build_Q0(C: Circuit, info: Dict[int, NodeGenInfo]) -> QuadrupleSet:
    """Every quadruple (g, g1, g2, node) incident to some non-error clique"""
    incidence: Dict[Quadruple, set] = defaultdict(set)
    for node_id in C.bottom_up():
        node = C.nodes[node_id]
        here = info[node_id]
        for c in here.non_error:
            for g in here.generators:
                if c & g != g:
                    continue
                if node.kind == LEAF:
                    incidence[Quadruple(g, g, g, node_id)].add(c)
                elif node.kind == AND:
                    left, right = (info[child] for child in node.children)
                    for g1 in left.generators:
                        if c & g1 != g1:
                            continue
                        for g2 in right.generators:
                            if c & g2 == g2:
                                incidence[Quadruple(g, g1, g2, node_id)].add(c)
                else:
                    for child in node.children:
                        below = info[child]
                        if c not in below.generated_set:
                            continue
                        for g1 in below.generators:
                            if c & g1 == g1:
                                incidence[Quadruple(g, g1, g1, node_id)].add(c)

    ordered: Dict[Quadruple, Tuple[int, ...]] = {}
    for sigma, cliques in incidence.items():
        cliques = tuple(sorted(cliques, key=elements))
        ordered[Quadruple(sigma.g, sigma.g1, sigma.g2, sigma.node, witness=cliques[0])] = cliques
    Q0 = QuadrupleSet(ordered)
    logger.info(f"Built {len(Q0)} quadruples")
    return Q0


def audit_q0_coverage(info: Dict[int, NodeGenInfo], Q0: QuadrupleSet) -> bool:
    """Every non-error clique c with a generator g inside it has a quadruple (g, ., ., node) incident to c"""
    for node_id, here in info.items():
        for c in here.non_error:
            for g in here.generators:
                if c & g == g and Q0.least_incident(node_id, g, c) is None:
                    logger.debug(f"node {node_id}: no quadruple for g={format_set(g)}, c={format_set(c)}")
                    return False
    return True


def d_sigma(sigma: Quadruple) -> int:
    """Edge set C(g1 | g2, 2) minus C(g, 2)"""
    return clique_edge_mask(sigma.g1 | sigma.g2) & ~clique_edge_mask(sigma.g)


# Splits

def split_is_valid(info: Dict[int, NodeGenInfo], y: int) -> bool:
    """Every generator g at every node has a non-error clique c with g inside c inside g | y"""
    for here in info.values():
        for g in here.generators:
            span = g | y
            if not any(c & g == g and c & ~span == 0 for c in here.non_error):
                return False
    return True


def _split_count(cfg: ShiftConfig) -> int:
    return math.factorial(cfg.n) // (math.factorial(cfg.l) ** cfg.q)


def build_splits(info: Dict[int, NodeGenInfo], cfg: ShiftConfig, count: Optional[int] = None,
                 cap: Optional[int] = None) -> List[Tuple[int, ...]]:
    """Up to count seeded ordered splits of [n] into q blocks of size l, each block valid"""
    wanted = cfg.split_count if count is None else count
    rng = np.random.default_rng(cfg.seed)
    total = _split_count(cfg)
    valid_block: Dict[int, bool] = {}

    def accept(split: Tuple[int, ...]) -> bool:
        for part in split:
            if part not in valid_block:
                valid_block[part] = split_is_valid(info, part)
            if not valid_block[part]:
                return False
        return True

    chosen: List[Tuple[int, ...]] = []
    if total <= min(SPLIT_ENUMERATION_LIMIT, enumeration_cap(cap)):
        every = list(ordered_partitions(full_mask(cfg.n), [cfg.l] * cfg.q))
        for index in rng.permutation(len(every)):
            split = every[int(index)]
            if accept(split):
                chosen.append(split)
                if len(chosen) == wanted:
                    break
    else:
        seen = set()
        for _ in range(wanted * SPLIT_DRAWS_PER_REQUEST):
            order = rng.permutation(cfg.n) + 1
            split = tuple(to_mask(int(v) for v in order[j * cfg.l:(j + 1) * cfg.l]) for j in range(cfg.q))
            if split in seen:
                continue
            seen.add(split)
            if accept(split):
                chosen.append(split)
                if len(chosen) == wanted:
                    break
    logger.info(f"{len(chosen)} valid splits selected out of {total} ordered splits")
    return chosen


def split_family_report(info: Dict[int, NodeGenInfo], cfg: ShiftConfig,
                        cap: Optional[int] = None) -> Dict[str, Any]:
    """Exact count of ordered splits whose blocks are all valid"""
    total = _split_count(cfg)
    check_cap("ordered splits", total, cap)
    block_ok: Dict[int, bool] = {}
    valid = 0
    for split in ordered_partitions(full_mask(cfg.n), [cfg.l] * cfg.q):
        ok = True
        for part in split:
            if part not in block_ok:
                block_ok[part] = split_is_valid(info, part)
            ok = ok and block_ok[part]
        valid += ok
    return {
        'valid': valid,
        'total': total,
        'complement_sparsity': count_sparsity(valid, total),
    }


# Blocked edges

def cliqueless_block_family(y: int, L: int, r: int, budget: int, seed: int,
                            cap: Optional[int] = None) -> List[int]:
    """L-edge sets z inside C(y, 2) whose removal leaves no r-clique in y"""
    block_edges = [Edge(u, v) for u, v in combinations(elements(y), 2)]
    if L > len(block_edges):
        raise PreconditionViolation(f"L={L} exceeds the {len(block_edges)} edges inside {format_set(y)}")
    cliques = [clique_edge_mask(c) for c in subsets_of_size(y, r)]
    bits = [e.bit for e in block_edges]

    def qualifies(z: int) -> bool:
        return all(z & cm for cm in cliques)

    total = exact_binom(len(bits), L)
    found = []
    if total <= min(budget, enumeration_cap(cap)):
        for combo in _combinations_masks(bits, L):
            if qualifies(combo):
                found.append(combo)
    else:
        rng = np.random.default_rng(seed)
        seen = set()
        for _ in range(budget):
            picks = rng.choice(len(bits), size=L, replace=False)
            z = 0
            for index in picks:
                z |= bits[int(index)]
            if z in seen:
                continue
            seen.add(z)
            if qualifies(z):
                found.append(z)
    return sorted(found, key=edge_key)


def _combinations_masks(bits: List[int], size: int):
    for combo in combinations(bits, size):
        mask = 0
        for bit in combo:
            mask |= bit
        yield mask


def cliqueless_fraction(y_size: int, L: int, r: int) -> Dict[str, Any]:
    """Exact fraction of L-edge removals leaving no r-clique, with the union-bound estimate"""
    y = full_mask(y_size)
    edge_total = exact_binom(y_size, 2)
    if L > edge_total:
        raise PreconditionViolation(f"L={L} exceeds C({y_size},2)")
    qualifying = len(cliqueless_block_family(y, L, r, exact_binom(edge_total, L), 0))
    total = exact_binom(edge_total, L)
    clique_edges = exact_binom(r, 2)
    # an r-clique survives when z misses all of its edges
    bad_bound = exact_binom(y_size, r) * exact_binom(edge_total - clique_edges, L)
    return {
        'qualifying': qualifying,
        'total': total,
        'fraction': qualifying / total,
        'union_bound': max(0.0, 1 - bad_bound / total),
        'majority': 2 * qualifying > total,
    }


def _choose_f(Q0: QuadrupleSet, info: Dict[int, NodeGenInfo], sigma: Quadruple,
              y: int) -> Optional[Tuple[Quadruple, int]]:
    """Least non-error clique c with g inside c inside g | y, then the least quadruple of the same g incident to it"""
    span = sigma.g | y
    for c in info[sigma.node].non_error:
        if c & sigma.g == sigma.g and c & ~span == 0:
            star = Q0.least_incident(sigma.node, sigma.g, c)
            if star is not None:
                return star, c
    return None


def blocked_edges(C: Circuit, info: Dict[int, NodeGenInfo], Q0: QuadrupleSet,
                  split: Tuple[int, ...], cfg: ShiftConfig, cap: Optional[int] = None) -> ShiftState:
    """Pick one z-block per part of the split, assigning each quadruple a part and an f-image"""
    if len(split) != cfg.q or any(popcount(part) != cfg.l for part in split):
        raise PreconditionViolation(f"Split must have {cfg.q} parts of size {cfg.l}")
    union = 0
    for part in split:
        if part & union:
            raise PreconditionViolation("Split parts must be pairwise disjoint")
        union |= part
    if union != full_mask(cfg.n):
        raise PreconditionViolation("Split parts must cover [n]")

    state = ShiftState(split=tuple(split))
    remaining = list(Q0)
    state.Q_trace.append(len(remaining))

    for j, y in enumerate(split):
        images: Dict[Quadruple, Tuple[Quadruple, int]] = {}
        by_key: Dict[Tuple[int, int], Tuple[Quadruple, int]] = {}
        for sigma in remaining:
            key = (sigma.node, sigma.g)
            if key not in by_key:
                chosen = _choose_f(Q0, info, sigma, y)
                if chosen is None:
                    raise NoValidSplit(f"no clique for {sigma} inside g | y_{j + 1}", state)
                by_key[key] = chosen
            images[sigma] = by_key[key]
        d_sets = {sigma: d_sigma(images[sigma][0]) for sigma in remaining}

        candidates = cliqueless_block_family(y, cfg.z_block_size, cfg.r_block,
                                             cfg.candidate_budget, cfg.seed + j, cap)
        if not candidates:
            raise NoCliquelessBlock(f"no cliqueless z-block for y_{j + 1}={format_set(y)}", state)

        best = min(candidates, key=lambda z: (sum(1 for sigma in remaining if d_sets[sigma] & z), edge_key(z)))
        still = []
        for sigma in remaining:
            if d_sets[sigma] & best:
                still.append(sigma)
            else:
                state.y_choice[sigma] = j
                state.f_choice[sigma], state.c_choice[sigma] = images[sigma]
        remaining = still
        state.z_blocks.append(best)
        state.Q_trace.append(len(remaining))
        logger.debug(f"step {j + 1}: {len(remaining)} quadruples left")

    if remaining:
        raise ResidualQ(f"{len(remaining)} quadruples left after step {cfg.q}, first {remaining[0]}", state)
    return state


# Local shift

def _child_quadruple(Q0: QuadrupleSet, child: int, g: int, clique: int) -> Optional[Quadruple]:
    preferred = Q0.least_incident(child, g, clique)
    if preferred is not None:
        return preferred
    options = Q0.at(child, g)
    return options[0] if options else None


def local_shift(C: Circuit, info: Dict[int, NodeGenInfo], Q0: QuadrupleSet,
                state: ShiftState) -> Dict[Quadruple, Term]:
    """Term t(sigma) for every quadruple, children before parents"""
    terms: Dict[Quadruple, Term] = {}
    for node_id in C.bottom_up():
        node = C.nodes[node_id]
        for sigma in Q0.at_node(node_id):
            if node.kind == LEAF:
                terms[sigma] = frozenset([node.literal])
                continue
            star, clique = state.f_choice[sigma], state.c_choice[sigma]
            if node.kind == AND:
                parts = []
                for child, g_child in zip(node.children, (star.g1, star.g2)):
                    below = _child_quadruple(Q0, child, g_child, clique)
                    if below is None:
                        raise ChainPropertyViolation(f"no quadruple at node {child} with g={format_set(g_child)} "
                                                     f"below {sigma}", state)
                    parts.append(terms[below])
                terms[sigma] = parts[0] | parts[1]
            else:
                below = None
                for child in node.children:
                    here = info[child]
                    if star.g1 in here.generators and clique in here.generated_set:
                        below = _child_quadruple(Q0, child, star.g1, clique)
                        if below is not None:
                            break
                if below is None:
                    raise ChainPropertyViolation(f"no generating child quadruple below {sigma}", state)
                terms[sigma] = terms[below]
    return terms


# Audits

def phi_edges(state: ShiftState) -> int:
    """Union of d(f(sigma)) over all assigned quadruples"""
    mask = 0
    for star in state.f_choice.values():
        mask |= d_sigma(star)
    return mask


def audit_disjointness(Q0: QuadrupleSet, terms: Dict[Quadruple, Term], state: ShiftState) -> bool:
    """t(sigma) minus C(g,2) lies in Phi and misses z"""
    phi, z = phi_edges(state), state.z
    for sigma in Q0:
        outside = term_edges(terms[sigma]) & ~clique_edge_mask(sigma.g)
        if outside & ~phi or outside & z:
            return False
    return True


def audit_independence(Q0, state: ShiftState) -> bool:
    """Each d(f(sigma)) has an endpoint in y(sigma) on every edge and no edge inside another part"""
    for sigma in Q0:
        if sigma not in state.f_choice:
            continue
        j = state.y_choice[sigma]
        y = state.split[j]
        d = d_sigma(state.f_choice[sigma])
        for edge in mask_edges(d):
            if edge.vertices & y == 0:
                return False
        for other, part in enumerate(state.split):
            if other != j and d & clique_edge_mask(part):
                return False
    return True


def audit_convergence(state: ShiftState) -> bool:
    """Every step at least halves the quadruples left"""
    for before, after in zip(state.Q_trace, state.Q_trace[1:]):
        if before > 0 and 2 * after > before:
            return False
    return True


def audit_local_terms(C: Circuit, terms: Dict[Quadruple, Term], cap: Optional[int] = None) -> bool:
    """Every t(sigma) is a term of DNF(sigma's node)"""
    return all(in_dnf(C, sigma.node, t, cap) for sigma, t in terms.items())


def _verdict(ok: bool) -> str:
    return PASS if ok else FAIL


def _root_term(C: Circuit, Q0: QuadrupleSet, terms: Dict[Quadruple, Term], z: int,
               cap: Optional[int]) -> Term:
    """t(y) of the least root quadruple with g = {}; DNF(root) is scanned only when Q0 is empty"""
    rooted = Q0.at(C.root, 0)
    if rooted:
        return terms[rooted[0]]
    if len(Q0):
        raise NoRootTerm(f"{len(Q0)} quadruples but none at the root with g = {{}}")
    for t in dnf(C, C.root, cap):
        if term_edges(t) & z == 0:
            return t
    raise NoRootTerm("Q0 is empty and every root term meets z")


def _attempt(C: Circuit, cfg: ShiftConfig, info: Dict[int, NodeGenInfo], Q0: QuadrupleSet,
             split: Tuple[int, ...], cap: Optional[int]) -> ShiftOutcome:
    state = blocked_edges(C, info, Q0, split, cfg, cap)
    terms = local_shift(C, info, Q0, state)
    z = state.z
    term = _root_term(C, Q0, terms, z, cap)

    remaining_graph = [e for e in all_edges(cfg.n) if not e.bit & z]
    audits = {
        'term_in_dnf': _verdict(in_dnf(C, C.root, term, cap)),
        'term_disjoint': _verdict(term_edges(term) & z == 0),
        'local_terms': _verdict(audit_local_terms(C, terms, cap)),
        'disjointness': _verdict(audit_disjointness(Q0, terms, state)),
        'independence': _verdict(audit_independence(Q0, state)),
        'convergence': _verdict(audit_convergence(state)),
        'phi_disjoint': _verdict(phi_edges(state) & z == 0),
        'clique_bound': _verdict(max_clique_size(remaining_graph, cfg.n) <= (cfg.r_block - 1) * cfg.q),
        'counterexample': NOT_APPLICABLE,
    }
    if cfg.forces_clique_free:
        audits['counterexample'] = _verdict(verify_counterexample(C, term, cfg.k, cap))

    required = ('term_in_dnf', 'term_disjoint', 'local_terms', 'disjointness', 'phi_disjoint', 'clique_bound',
                'counterexample')
    failed = [name for name in required if audits[name] == FAIL]
    outcome = ShiftOutcome(
        status='success' if not failed else 'failure',
        config=cfg.to_dict(),
        term=term,
        z=z,
        split=state.split,
        Q_trace=list(state.Q_trace),
        audits=audits,
        quadruples=len(Q0)
    )
    if failed:
        raise AuditFailure(f"failed audits: {', '.join(failed)}", outcome)
    return outcome


def run_shift(C: Circuit, cfg: ShiftConfig, cap: Optional[int] = None) -> ShiftOutcome:
    """Try valid splits in seeded order until one yields an audited shift term"""
    if not C.monotone:
        raise PreconditionViolation("The shift pipeline runs on monotone circuits only")

    info = clique_generators(C, cfg, cap)
    Q0 = build_Q0(C, info)
    splits = build_splits(info, cfg, cfg.split_count, cap)
    failure_counts: Dict[str, int] = defaultdict(int)

    if not splits:
        return ShiftOutcome(
            status='failure', config=cfg.to_dict(), failure_stage=NoValidSplit.stage,
            reason=NoValidSplit.reason, detail="no split has every block valid",
            failure_counts={NoValidSplit.reason: 1}, quadruples=len(Q0)
        )

    last: Optional[ShiftFailure] = None
    for attempt, split in enumerate(splits, start=1):
        try:
            outcome = _attempt(C, cfg, info, Q0, split, cap)
        except ShiftFailure as failure:
            failure_counts[failure.reason] += 1
            last = failure
            logger.debug(f"attempt {attempt}: {failure}")
            continue
        outcome.attempts = attempt
        outcome.failure_counts = dict(failure_counts)
        logger.info(f"Shift succeeded on attempt {attempt}")
        return outcome

    logger.info(f"Shift failed on all {len(splits)} splits: {dict(failure_counts)}")
    outcome = ShiftOutcome(status='failure', config=cfg.to_dict(), quadruples=len(Q0))
    partial = last.state
    if isinstance(partial, ShiftOutcome):
        outcome.term, outcome.z, outcome.split = partial.term, partial.z, partial.split
        outcome.Q_trace, outcome.audits = partial.Q_trace, partial.audits
    elif isinstance(partial, ShiftState):
        outcome.z, outcome.split, outcome.Q_trace = partial.z, partial.split, list(partial.Q_trace)
    outcome.failure_stage = last.stage
    outcome.reason = last.reason
    outcome.detail = last.detail
    outcome.attempts = len(splits)
    outcome.failure_counts = dict(failure_counts)
    return outcome
