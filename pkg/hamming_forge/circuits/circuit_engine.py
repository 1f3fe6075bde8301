#!/usr/bin/python3
"""
Circuit Engine - De Morgan circuits over edge literals
Parsing, evaluation, memoized DNF expansion, generated cliques, derivation traces and CLIQUE_{n,k} builders
"""

import logging
from dataclasses import dataclass
from itertools import combinations
from pathlib import Path
from typing import Dict, List, Any, Optional, Iterable, FrozenSet, Tuple

import networkx as nx

from hamming_forge.config import check_cap, enumeration_cap
from hamming_forge.core.binom_engine import exact_binom
from hamming_forge.core.set_family import elements, full_mask, popcount, subsets_of_size, to_mask
from hamming_forge.errors import MalformedInput, PreconditionViolation, TooLarge

logger = logging.getLogger(__name__)

LEAF, AND, OR = 'LEAF', 'AND', 'OR'


@dataclass(frozen=True, order=True)
class Edge:
    u: int
    v: int

    def __post_init__(self):
        if not 0 < self.u < self.v:
            raise PreconditionViolation(f"Edge needs 0 < u < v, got ({self.u},{self.v})")

    @classmethod
    def of(cls, a: int, b: int) -> 'Edge':
        if a == b:
            raise PreconditionViolation(f"Edge endpoints must differ, got ({a},{b})")
        return cls(min(a, b), max(a, b))

    @property
    def index(self) -> int:
        """Colexicographic position, independent of n"""
        return (self.v - 1) * (self.v - 2) // 2 + self.u - 1

    @property
    def bit(self) -> int:
        return 1 << self.index

    @property
    def vertices(self) -> int:
        return (1 << (self.u - 1)) | (1 << (self.v - 1))

    def __str__(self) -> str:
        return f"{self.u}{self.v}" if self.v < 10 else f"({self.u},{self.v})"


@dataclass(frozen=True, order=True)
class Literal:
    edge: Edge
    positive: bool = True

    def __str__(self) -> str:
        return f"{'' if self.positive else '~'}X{self.edge}"


Term = FrozenSet[Literal]


def edge_from_index(index: int) -> Edge:
    v = 2
    while v * (v - 1) // 2 <= index:
        v += 1
    return Edge(index - (v - 1) * (v - 2) // 2 + 1, v)


def mask_edges(mask: int) -> List[Edge]:
    """Edges of an edge bitmask, in colexicographic order"""
    result = []
    index = 0
    while mask:
        if mask & 1:
            result.append(edge_from_index(index))
        mask >>= 1
        index += 1
    return result


def edges_mask(edges: Iterable[Edge]) -> int:
    mask = 0
    for edge in edges:
        mask |= edge.bit
    return mask


def clique_edge_mask(vertices: int) -> int:
    """Edge bitmask of C(c, 2) for a vertex bitmask c"""
    return edges_mask(Edge(u, v) for u, v in combinations(elements(vertices), 2))


def edge_key(mask: int) -> Tuple[Tuple[int, int], ...]:
    """Lexicographic sort key of an edge set"""
    return tuple(sorted((e.u, e.v) for e in mask_edges(mask)))


def all_edges(n: int) -> List[Edge]:
    return [Edge(u, v) for u, v in combinations(range(1, n + 1), 2)]


def positive_term(pairs: Iterable[Tuple[int, int]]) -> Term:
    return frozenset(Literal(Edge.of(a, b)) for a, b in pairs)


def term_key(t: Term) -> Tuple[Tuple[int, int, int], ...]:
    return tuple(sorted((lit.edge.u, lit.edge.v, 0 if lit.positive else 1) for lit in t))


def term_edges(t: Term) -> int:
    """Edge bitmask of the positive literals"""
    return edges_mask(lit.edge for lit in t if lit.positive)


def term_vertices(t: Term) -> int:
    mask = 0
    for lit in t:
        mask |= lit.edge.vertices
    return mask


def is_contradictory(t: Term) -> bool:
    positive = {lit.edge for lit in t if lit.positive}
    return any(not lit.positive and lit.edge in positive for lit in t)


def format_term(t: Term) -> str:
    return "{" + ",".join(str(lit) for lit in sorted(t)) + "}"


def term_to_list(t: Term) -> List[List[Any]]:
    return [[u, v, '+' if sign == 0 else '-'] for u, v, sign in term_key(t)]


@dataclass(frozen=True)
class Node:
    id: int
    kind: str
    children: Tuple[int, ...] = ()
    literal: Optional[Literal] = None


@dataclass(frozen=True)
class Assignment:
    """Truth assignment: present edges are true, every other edge of C([n],2) false"""
    n: int
    present: FrozenSet[Edge]

    @classmethod
    def from_pairs(cls, n: int, pairs: Iterable[Tuple[int, int]]) -> 'Assignment':
        return cls(n, frozenset(Edge.of(a, b) for a, b in pairs))

    @property
    def mask(self) -> int:
        return edges_mask(self.present)


class Circuit:
    """Fan-in two De Morgan circuit; node ids appear after their children"""

    def __init__(self, n: int, nodes: List[Node], root: int):
        if n < 2:
            raise PreconditionViolation(f"Circuits need n >= 2, got {n}")
        self.n = n
        self.nodes: Dict[int, Node] = {}
        for node in nodes:
            if node.id in self.nodes:
                raise MalformedInput(f"Duplicate node id {node.id}")
            if node.kind == LEAF:
                if node.literal is None or node.children:
                    raise MalformedInput(f"Leaf {node.id} needs a literal and no children")
                if node.literal.edge.v > n:
                    raise MalformedInput(f"Leaf {node.id} edge {node.literal.edge} is outside [{n}]")
            elif node.kind in (AND, OR):
                if len(node.children) != 2:
                    raise MalformedInput(f"Gate {node.id} needs exactly 2 children")
                for child in node.children:
                    if child == node.id:
                        raise MalformedInput(f"Cycle: node {node.id} feeds itself")
                    if child not in self.nodes:
                        raise MalformedInput(f"Node {node.id} references unknown or later node {child}")
            else:
                raise MalformedInput(f"Unknown node kind {node.kind!r}")
            self.nodes[node.id] = node
        if root not in self.nodes:
            raise MalformedInput(f"Unknown root {root}")
        self.root = root

        self._order = [node.id for node in nodes]
        self._dnf: Dict[int, FrozenSet[Term]] = {}
        self._generated: Dict[Tuple[int, int], Tuple[int, ...]] = {}
        self._bottom_up: Optional[List[int]] = None

    def __len__(self) -> int:
        return len(self.nodes)

    def node(self, node_id: int) -> Node:
        try:
            return self.nodes[node_id]
        except KeyError:
            raise PreconditionViolation(f"No node {node_id}")

    def subtree(self, node_id: int) -> List[int]:
        """Ids under node_id (inclusive), children before parents"""
        seen = set()
        stack = [node_id]
        while stack:
            current = stack.pop()
            if current in seen:
                continue
            seen.add(current)
            stack.extend(self.node(current).children)
        return [i for i in self._order if i in seen]

    def bottom_up(self) -> List[int]:
        """Nodes reachable from the root, children before parents"""
        if self._bottom_up is None:
            self._bottom_up = self.subtree(self.root)
        return self._bottom_up

    @property
    def monotone(self) -> bool:
        return all(self.nodes[i].literal.positive for i in self.bottom_up() if self.nodes[i].kind == LEAF)

    def leaves(self) -> List[int]:
        return [i for i in self.bottom_up() if self.nodes[i].kind == LEAF]


class CircuitBuilder:
    """Appends nodes with fresh ids in creation order"""

    def __init__(self, n: int):
        self.n = n
        self.nodes: List[Node] = []

    def _add(self, kind: str, children: Tuple[int, ...] = (), literal: Optional[Literal] = None) -> int:
        node_id = len(self.nodes) + 1
        self.nodes.append(Node(node_id, kind, children, literal))
        return node_id

    def leaf(self, edge: Edge, positive: bool = True) -> int:
        return self._add(LEAF, literal=Literal(edge, positive))

    def gate(self, kind: str, a: int, b: int) -> int:
        return self._add(kind, (a, b))

    def balanced(self, kind: str, ids: List[int]) -> int:
        if not ids:
            raise PreconditionViolation("Cannot combine an empty list of nodes")
        if len(ids) == 1:
            return ids[0]
        mid = (len(ids) + 1) // 2
        return self.gate(kind, self.balanced(kind, ids[:mid]), self.balanced(kind, ids[mid:]))

    def build(self, root: int) -> Circuit:
        return Circuit(self.n, self.nodes, root)


def _dnf_shaped(n: int, groups: List[List[Edge]]) -> Circuit:
    builder = CircuitBuilder(n)
    tops = []
    for edges in groups:
        tops.append(builder.balanced(AND, [builder.leaf(e) for e in edges]))
    return builder.build(builder.balanced(OR, tops))


def _check_clique_params(n: int, k: int, cap: Optional[int]):
    if not 2 <= k <= n:
        raise PreconditionViolation(f"CLIQUE needs 2 <= k <= n, got n={n}, k={k}")
    check_cap(f"CLIQUE_{{{n},{k}}} groups", exact_binom(n, k), cap)


def build_clique_circuit(n: int, k: int, cap: Optional[int] = None) -> Circuit:
    """Balanced OR over the k-cliques of balanced ANDs over their edges"""
    _check_clique_params(n, k, cap)
    groups = [[Edge(u, v) for u, v in combinations(c, 2)] for c in combinations(range(1, n + 1), k)]
    return _dnf_shaped(n, groups)


def mutilate_clique_circuit(n: int, k: int, clique: Iterable[int], kept_edges: Iterable[Tuple[int, int]],
                            cap: Optional[int] = None) -> Circuit:
    """Canonical CLIQUE_{n,k} circuit with one clique's AND-group cut down to kept_edges"""
    _check_clique_params(n, k, cap)
    target = tuple(sorted(clique))
    kept = sorted(Edge.of(a, b) for a, b in kept_edges)
    if len(target) != k or not kept:
        raise PreconditionViolation(f"Need a {k}-clique and at least one kept edge")
    groups = []
    for c in combinations(range(1, n + 1), k):
        groups.append(kept if c == target else [Edge(u, v) for u, v in combinations(c, 2)])
    return _dnf_shaped(n, groups)


# Evaluation

def _evaluate_mask(C: Circuit, present: int) -> bool:
    values: Dict[int, bool] = {}
    for node_id in C.bottom_up():
        node = C.nodes[node_id]
        if node.kind == LEAF:
            hit = bool(present & node.literal.edge.bit)
            values[node_id] = hit if node.literal.positive else not hit
        elif node.kind == AND:
            values[node_id] = values[node.children[0]] and values[node.children[1]]
        else:
            values[node_id] = values[node.children[0]] or values[node.children[1]]
    return values[C.root]


def evaluate(C: Circuit, S: Assignment) -> bool:
    return _evaluate_mask(C, S.mask)


def consistent(t: Term, S: Assignment) -> bool:
    """Every literal of t agrees with S"""
    return all((lit.edge in S.present) == lit.positive for lit in t)


# DNF

def _dnf_sets(C: Circuit, node_id: int, cap: Optional[int]) -> FrozenSet[Term]:
    limit = enumeration_cap(cap)
    for current in C.subtree(node_id):
        if current in C._dnf:
            continue
        node = C.nodes[current]
        if node.kind == LEAF:
            C._dnf[current] = frozenset([frozenset([node.literal])])
            continue
        left, right = (C._dnf[child] for child in node.children)
        if node.kind == AND:
            predicted = len(left) * len(right)
            if predicted > limit:
                raise TooLarge(f"DNF at AND node {current}", predicted, limit)
            C._dnf[current] = frozenset(a | b for a in left for b in right)
        else:
            predicted = len(left) + len(right)
            if predicted > limit:
                raise TooLarge(f"DNF at OR node {current}", predicted, limit)
            C._dnf[current] = left | right
    return C._dnf[node_id]


def dnf(C: Circuit, node_id: Optional[int] = None, cap: Optional[int] = None,
        drop_contradictory: bool = False) -> List[Term]:
    """DNF(node) as a sorted list of literal sets"""
    terms = _dnf_sets(C, C.root if node_id is None else node_id, cap)
    if drop_contradictory:
        terms = [t for t in terms if not is_contradictory(t)]
    return sorted(terms, key=term_key)


def in_dnf(C: Circuit, node_id: int, t: Term, cap: Optional[int] = None) -> bool:
    return frozenset(t) in _dnf_sets(C, node_id, cap)


def cliques_generated_at(C: Circuit, node_id: int, k: int, cap: Optional[int] = None) -> Tuple[int, ...]:
    """k-cliques c with an all-positive term of DNF(node) inside C(c, 2), in lexicographic order"""
    key = (node_id, k)
    if key in C._generated:
        return C._generated[key]
    if not 2 <= k <= C.n:
        raise PreconditionViolation(f"Clique size {k} outside [2, {C.n}]")

    ground = full_mask(C.n)
    found = set()
    for t in _dnf_sets(C, node_id, cap):
        if any(not lit.positive for lit in t):
            continue
        vertices = term_vertices(t)
        extra = k - popcount(vertices)
        if extra < 0:
            continue
        for more in subsets_of_size(ground & ~vertices, extra):
            found.add(vertices | more)
    result = tuple(sorted(found, key=elements))
    C._generated[key] = result
    return result


# Derivation traces

def minimal_term(C: Circuit, root_term: Term, cap: Optional[int] = None) -> Tuple[Term, Dict[int, Term]]:
    """A global term t0 inside root_term derived node by node, with the term chosen at each visited node"""
    target = frozenset(root_term)
    if not in_dnf(C, C.root, target, cap):
        raise PreconditionViolation(f"{format_term(target)} is not a term of DNF(root)")

    memo: Dict[int, Term] = {}
    choice: Dict[int, int] = {}

    def reaches(node_id: int) -> bool:
        return any(t <= target for t in _dnf_sets(C, node_id, cap))

    def derive(node_id: int) -> Term:
        if node_id in memo:
            return memo[node_id]
        node = C.nodes[node_id]
        if node.kind == LEAF:
            result = frozenset([node.literal])
        elif node.kind == AND:
            result = derive(node.children[0]) | derive(node.children[1])
        else:
            options = [(derive(child), child) for child in node.children if reaches(child)]
            result, choice[node_id] = min(options, key=lambda option: (len(option[0]), term_key(option[0])))
        memo[node_id] = result
        return result

    t0 = derive(C.root)

    trace: Dict[int, Term] = {}
    stack = [C.root]
    while stack:
        node_id = stack.pop()
        if node_id in trace:
            continue
        trace[node_id] = memo[node_id]
        node = C.nodes[node_id]
        if node.kind == AND:
            stack.extend(node.children)
        elif node.kind == OR:
            stack.append(choice[node_id])
    assert t0 <= target and in_dnf(C, C.root, t0, cap)
    return t0, trace


# Clique oracles

def _graph(edges: Iterable[Edge], n: int) -> nx.Graph:
    G = nx.Graph()
    G.add_nodes_from(range(1, n + 1))
    G.add_edges_from((e.u, e.v) for e in edges)
    return G


def max_clique_size(edges: Iterable[Edge], n: int) -> int:
    G = _graph(edges, n)
    return max((len(c) for c in nx.find_cliques(G)), default=0)


def has_clique(edges: Iterable[Edge], n: int, k: int) -> bool:
    return max_clique_size(edges, n) >= k


def assignment_from_term(t: Term, n: int) -> Assignment:
    """Exactly the positive edges of t are present"""
    return Assignment(n, frozenset(lit.edge for lit in t if lit.positive))


def verify_counterexample(C: Circuit, t: Term, k: int, cap: Optional[int] = None) -> bool:
    """t is a contradiction-free global term with no k-clique among its edges"""
    if not C.monotone:
        raise PreconditionViolation("Counterexamples are checked on monotone circuits only")
    t = frozenset(t)
    if is_contradictory(t) or not in_dnf(C, C.root, t, cap):
        return False
    S = assignment_from_term(t, C.n)
    if has_clique(S.present, C.n, k):
        return False
    # a term of DNF(root) always satisfies the circuit
    return evaluate(C, S)


def is_clique_function(C: Circuit, n: int, k: int, cap: Optional[int] = None) -> bool:
    """Exhaustive check of C against CLIQUE_{n,k} over all graphs on [n]"""
    edge_count = n * (n - 1) // 2
    check_cap(f"graphs on [{n}]", 2 ** edge_count, cap)
    clique_masks = [clique_edge_mask(to_mask(c)) for c in combinations(range(1, n + 1), k)]
    for present in range(2 ** edge_count):
        expected = any(present & cm == cm for cm in clique_masks)
        if _evaluate_mask(C, present) != expected:
            logger.debug(f"CLIQUE mismatch on edges {[str(e) for e in mask_edges(present)]}")
            return False
    return True


# Text format

def parse_circuit(text: str) -> Circuit:
    """Parse `<id> LEAF +|- u v`, `<id> AND a b`, `<id> OR a b`, `ROOT id` and an optional `N n` line"""
    nodes: List[Node] = []
    root = None
    n = None
    max_vertex = 0
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split('#', 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        try:
            if parts[0] == 'ROOT' and len(parts) == 2:
                root = int(parts[1])
            elif parts[0] == 'N' and len(parts) == 2:
                n = int(parts[1])
            elif len(parts) == 5 and parts[1] == LEAF and parts[2] in ('+', '-'):
                edge = Edge.of(int(parts[3]), int(parts[4]))
                max_vertex = max(max_vertex, edge.v)
                nodes.append(Node(int(parts[0]), LEAF, (), Literal(edge, parts[2] == '+')))
            elif len(parts) == 4 and parts[1] in (AND, OR):
                nodes.append(Node(int(parts[0]), parts[1], (int(parts[2]), int(parts[3]))))
            else:
                raise MalformedInput(f"line {number}: cannot parse {raw.strip()!r}")
        except (ValueError, PreconditionViolation) as e:
            if isinstance(e, MalformedInput):
                raise
            raise MalformedInput(f"line {number}: {e}")
    if root is None:
        raise MalformedInput("Circuit has no ROOT line")
    if n is None:
        n = max(max_vertex, 2)
    return Circuit(n, nodes, root)


def format_circuit(C: Circuit) -> str:
    lines = [f"N {C.n}"]
    for node_id in C._order:
        node = C.nodes[node_id]
        if node.kind == LEAF:
            sign = '+' if node.literal.positive else '-'
            lines.append(f"{node_id} LEAF {sign} {node.literal.edge.u} {node.literal.edge.v}")
        else:
            lines.append(f"{node_id} {node.kind} {node.children[0]} {node.children[1]}")
    lines.append(f"ROOT {C.root}")
    return '\n'.join(lines) + '\n'


def read_circuit_file(path: str) -> Circuit:
    try:
        text = Path(path).read_text()
    except FileNotFoundError:
        raise MalformedInput(f"Circuit file not found: {path}")
    circuit = parse_circuit(text)
    logger.debug(f"Loaded circuit with {len(circuit)} nodes over [{circuit.n}] from {path}")
    return circuit


def write_circuit_file(C: Circuit, path: str):
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(format_circuit(C))
