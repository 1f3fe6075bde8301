"""Tests for the shift pipeline on small CLIQUE circuits"""

import json
from dataclasses import replace

import pytest

from conftest import FIXTURES
from hamming_forge.circuits.circuit_engine import (
    AND, OR, CircuitBuilder, Edge, build_clique_circuit, clique_edge_mask, in_dnf, mask_edges, max_clique_size,
    positive_term, read_circuit_file, verify_counterexample
)
from hamming_forge.circuits.shift_pipeline import (
    NOT_APPLICABLE, PASS, NodeGenInfo, Quadruple, ShiftConfig, ShiftOutcome, ShiftState, _attempt, _root_term,
    audit_convergence, audit_disjointness, audit_independence, audit_local_terms, audit_q0_coverage,
    blocked_edges, build_Q0, build_splits, clique_generators, cliqueless_block_family, cliqueless_fraction,
    d_sigma, local_shift, run_shift, split_family_report, split_is_valid
)
from hamming_forge.core.set_family import full_mask, to_mask
from hamming_forge.errors import (
    ChainPropertyViolation, MalformedInput, NoRootTerm, NoValidSplit, PreconditionViolation
)


def load_config(name: str) -> ShiftConfig:
    return ShiftConfig.from_dict(json.loads((FIXTURES / name).read_text()))


@pytest.fixture
def clique_4_3():
    return read_circuit_file(str(FIXTURES / 'clique_4_3.circuit'))


@pytest.fixture
def mutilated_6_3():
    return read_circuit_file(str(FIXTURES / 'clique_6_3_mutilated.circuit'))


@pytest.fixture
def shared_edges_4_3():
    return read_circuit_file(str(FIXTURES / 'clique_4_3_shared_edges.circuit'))


@pytest.fixture
def blocking_config() -> ShiftConfig:
    return load_config('shift_clique_4_3.json')


@pytest.fixture
def large_lambda_config(blocking_config) -> ShiftConfig:
    return replace(blocking_config, lambda_c=10.0)


class TestConfig:
    def test_fixture_configs(self, blocking_config):
        assert (blocking_config.n, blocking_config.q, blocking_config.l) == (4, 2, 2)
        assert blocking_config.forces_clique_free
        assert not load_config('shift_clique_4_3_vacuous.json').forces_clique_free
        assert blocking_config.generator_length == 3

    def test_l_is_derived_when_missing(self):
        cfg = ShiftConfig.from_dict({'n': 6, 'k': 3, 'q': 2, 'z_block_size': 3, 'r_block': 2, 'lambda_c': 0})
        assert cfg.l == 3

    @pytest.mark.parametrize("changes", [
        {'q': 4},
        {'l': 3},
        {'k': 1},
        {'k': 5},
        {'z_block_size': 2},
        {'r_block': 1},
        {'lambda_c': -1.0},
        {'generator_lambda': 0.0},
        {'generator_rate': 0.0},
        {'split_count': 0},
    ])
    def test_invalid_values(self, changes):
        values = {'n': 4, 'k': 3, 'q': 2, 'l': 2, 'z_block_size': 1, 'r_block': 2, 'lambda_c': 0.0}
        values.update(changes)
        with pytest.raises(PreconditionViolation):
            ShiftConfig(**values)
        with pytest.raises(MalformedInput):
            ShiftConfig.from_dict(values)

    def test_unknown_and_missing_keys(self):
        with pytest.raises(MalformedInput):
            ShiftConfig.from_dict({'n': 4, 'k': 3, 'q': 2, 'z_block_size': 1, 'r_block': 2,
                                   'lambda_c': 0, 'colour': 'red'})
        with pytest.raises(MalformedInput):
            ShiftConfig.from_dict({'n': 4, 'k': 3})

    def test_asymptotic_preset(self):
        cfg = ShiftConfig.asymptotic_preset(64, 0.1)
        assert (cfg.q, cfg.l, cfg.k) == (8, 8, 2)
        assert cfg.z_block_size == 28
        assert cfg.r_block == 3
        assert cfg.lambda_c == pytest.approx(64 ** 0.1)
        assert ShiftConfig.asymptotic_preset(64, 0.1, seed=9).seed == 9
        with pytest.raises(PreconditionViolation):
            ShiftConfig.asymptotic_preset(15, 0.1)


class TestCliqueGenerators:
    def test_zero_lambda_makes_every_clique_an_error(self, clique_4_3, blocking_config):
        info = clique_generators(clique_4_3, blocking_config)
        assert all(not here.generators for here in info.values())
        assert len(info[clique_4_3.root].error_cliques) == 4
        assert info[clique_4_3.root].non_error == ()
        assert len(build_Q0(clique_4_3, info)) == 0

    def test_large_lambda(self, clique_4_3, large_lambda_config):
        info = clique_generators(clique_4_3, large_lambda_config)
        assert info[1].generators == [to_mask([1, 2])]
        assert info[1].error_cliques == frozenset()
        assert info[4].generators == [0]
        assert info[4].reports[0]['g'] == []
        assert info[4].reports[0]['covered'] == 1
        assert info[clique_4_3.root].generators == [0]

    def test_rejects_non_monotone_and_mismatched_circuits(self, blocking_config):
        builder = CircuitBuilder(4)
        C = builder.build(builder.leaf(Edge(1, 2), positive=False))
        with pytest.raises(PreconditionViolation):
            clique_generators(C, blocking_config)
        with pytest.raises(PreconditionViolation):
            clique_generators(build_clique_circuit(5, 3), blocking_config)


class TestQuadruples:
    def test_q0_at_large_lambda(self, clique_4_3, large_lambda_config):
        info = clique_generators(clique_4_3, large_lambda_config)
        Q0 = build_Q0(clique_4_3, info)
        leaf = Quadruple(to_mask([1, 2]), to_mask([1, 2]), to_mask([1, 2]), 1)
        assert leaf in Q0.incidence
        assert Q0.incidence[leaf] == (to_mask([1, 2, 3]), to_mask([1, 2, 4]))
        assert Quadruple(0, to_mask([1, 2]), to_mask([1, 3]), 4) in Q0.incidence
        assert Q0.at(clique_4_3.root, 0)
        assert audit_q0_coverage(info, Q0)
        assert [sigma.key() for sigma in Q0] == sorted(sigma.key() for sigma in Q0)

    def test_d_sigma(self):
        sigma = Quadruple(0, to_mask([1, 2]), to_mask([1, 3]), 4)
        assert d_sigma(sigma) == clique_edge_mask(to_mask([1, 2, 3]))
        assert d_sigma(Quadruple(to_mask([1, 2]), to_mask([1, 2]), to_mask([1, 2]), 1)) == 0


class TestSplits:
    def test_every_split_is_valid_without_generators(self, clique_4_3, blocking_config):
        info = clique_generators(clique_4_3, blocking_config)
        splits = build_splits(info, blocking_config)
        assert len(splits) == 6
        assert len(set(splits)) == 6
        assert split_family_report(info, blocking_config)['valid'] == 6

    def test_empty_generator_blocks_every_split(self, clique_4_3, large_lambda_config):
        info = clique_generators(clique_4_3, large_lambda_config)
        assert not split_is_valid(info, to_mask([1, 2]))
        assert build_splits(info, large_lambda_config) == []
        report = split_family_report(info, large_lambda_config)
        assert (report['valid'], report['total'], report['complement_sparsity']) == (0, 6, 0.0)

    def test_split_order_depends_on_the_seed_only(self, clique_4_3, blocking_config):
        info = clique_generators(clique_4_3, blocking_config)
        assert build_splits(info, blocking_config) == build_splits(info, blocking_config)
        assert build_splits(info, blocking_config, count=2) == build_splits(info, blocking_config)[:2]


class TestCliquelessBlocks:
    def test_four_vertices_need_a_perfect_matching(self):
        found = cliqueless_block_family(full_mask(4), 2, 3, budget=1000, seed=0)
        assert [sorted((e.u, e.v) for e in mask_edges(z)) for z in found] == [
            [(1, 2), (3, 4)], [(1, 3), (2, 4)], [(1, 4), (2, 3)]
        ]

    def test_pairs_need_every_edge(self):
        assert cliqueless_block_family(to_mask([2, 5, 6]), 3, 2, budget=10, seed=0) == [
            clique_edge_mask(to_mask([2, 5, 6]))
        ]

    def test_sampled_candidates_qualify(self):
        found = cliqueless_block_family(full_mask(6), 9, 3, budget=200, seed=4)
        assert found
        for z in found:
            assert bin(z).count('1') == 9
            rest = [e for e in mask_edges(clique_edge_mask(full_mask(6))) if not e.bit & z]
            assert max_clique_size(rest, 6) < 3

    def test_too_many_edges(self):
        with pytest.raises(PreconditionViolation):
            cliqueless_block_family(full_mask(3), 4, 2, budget=10, seed=0)

    def test_fraction(self):
        small = cliqueless_fraction(4, 2, 3)
        assert (small['qualifying'], small['total']) == (3, 15)
        assert small['union_bound'] == pytest.approx(0.2)
        assert not small['majority']
        assert cliqueless_fraction(4, 4, 3)['fraction'] == 1.0
        larger = cliqueless_fraction(6, 9, 3)
        assert larger['union_bound'] <= larger['fraction'] <= 1.0


class TestBlockedEdges:
    def test_trivial_blocks(self, clique_4_3, blocking_config):
        info = clique_generators(clique_4_3, blocking_config)
        Q0 = build_Q0(clique_4_3, info)
        split = (to_mask([1, 3]), to_mask([2, 4]))
        state = blocked_edges(clique_4_3, info, Q0, split, blocking_config)
        assert state.z_blocks == [Edge(1, 3).bit, Edge(2, 4).bit]
        assert state.Q_trace == [0, 0, 0]

    def test_invalid_split_carries_its_state(self, clique_4_3, large_lambda_config):
        info = clique_generators(clique_4_3, large_lambda_config)
        Q0 = build_Q0(clique_4_3, info)
        with pytest.raises(NoValidSplit) as caught:
            blocked_edges(clique_4_3, info, Q0, (to_mask([1, 2]), to_mask([3, 4])), large_lambda_config)
        assert isinstance(caught.value.state, ShiftState)
        assert caught.value.state.Q_trace == [len(Q0)]

    @pytest.mark.parametrize("split", [
        (to_mask([1, 2, 3]), to_mask([4])),
        (to_mask([1, 2]), to_mask([2, 3])),
        (to_mask([1, 2]),),
    ])
    def test_malformed_split(self, clique_4_3, blocking_config, split):
        info = clique_generators(clique_4_3, blocking_config)
        with pytest.raises(PreconditionViolation):
            blocked_edges(clique_4_3, info, build_Q0(clique_4_3, info), split, blocking_config)

    def test_convergence_audit(self):
        assert audit_convergence(ShiftState(split=(), Q_trace=[8, 4, 2, 0]))
        assert audit_convergence(ShiftState(split=(), Q_trace=[0, 0, 0]))
        assert not audit_convergence(ShiftState(split=(), Q_trace=[8, 5]))


class TestLocalShift:
    @pytest.fixture
    def two_leaf_and(self):
        builder = CircuitBuilder(4)
        a = builder.leaf(Edge(1, 2))
        b = builder.leaf(Edge(1, 3))
        C = builder.build(builder.gate(AND, a, b))
        triangle = to_mask([1, 2, 3])
        info = {
            a: NodeGenInfo(a, [to_mask([1, 2])], frozenset(), (triangle, to_mask([1, 2, 4]))),
            b: NodeGenInfo(b, [to_mask([1, 3])], frozenset(), (triangle, to_mask([1, 3, 4]))),
            C.root: NodeGenInfo(C.root, [to_mask([1])], frozenset(), (triangle,)),
        }
        top = Quadruple(to_mask([1]), to_mask([1, 2]), to_mask([1, 3]), C.root)
        return C, info, build_Q0(C, info), top

    def shifted_state(self, top, split):
        state = ShiftState(split=split, y_choice={top: 0})
        state.f_choice[top] = top
        state.c_choice[top] = to_mask([1, 2, 3])
        return state

    def test_q0_has_one_quadruple_per_node(self, two_leaf_and):
        C, info, Q0, top = two_leaf_and
        assert len(Q0) == 3
        assert Q0.at_node(C.root) == [top]
        assert audit_q0_coverage(info, Q0)

    def test_and_node_joins_child_terms(self, two_leaf_and):
        C, info, Q0, top = two_leaf_and
        state = self.shifted_state(top, (to_mask([2, 3]), to_mask([1, 4])))
        terms = local_shift(C, info, Q0, state)
        assert terms[top] == positive_term([(1, 2), (1, 3)])
        assert terms[Q0.at_node(1)[0]] == positive_term([(1, 2)])
        assert audit_disjointness(Q0, terms, state)
        state.z_blocks.append(Edge(1, 2).bit)
        assert not audit_disjointness(Q0, terms, state)

    def test_missing_child_quadruple(self, two_leaf_and):
        C, info, Q0, top = two_leaf_and
        state = self.shifted_state(top, (to_mask([2, 3]), to_mask([1, 4])))
        state.f_choice[top] = Quadruple(to_mask([1]), to_mask([1, 4]), to_mask([1, 3]), C.root)
        with pytest.raises(ChainPropertyViolation) as caught:
            local_shift(C, info, Q0, state)
        assert caught.value.state is state

    def test_independence(self, two_leaf_and):
        _, _, Q0, top = two_leaf_and
        assert audit_independence(Q0, self.shifted_state(top, (to_mask([2, 3]), to_mask([1, 4]))))
        assert not audit_independence(Q0, self.shifted_state(top, (to_mask([1, 4]), to_mask([2, 3]))))

    def test_local_terms_audit(self, two_leaf_and):
        C, info, Q0, top = two_leaf_and
        terms = local_shift(C, info, Q0, self.shifted_state(top, (to_mask([2, 3]), to_mask([1, 4]))))
        assert audit_local_terms(C, terms)
        terms[top] = positive_term([(1, 2)])
        assert not audit_local_terms(C, terms)


class TestSharedEdgeShift:
    """12 & (13 | 14) | 34 & (13 | 23): the root term comes from the root quadruple itself"""

    @pytest.fixture
    def shared_config(self) -> ShiftConfig:
        return load_config('shift_shared_edges_4_3.json')

    @pytest.fixture
    def left_half(self):
        builder = CircuitBuilder(4)
        e12 = builder.leaf(Edge(1, 2))
        either = builder.gate(OR, builder.leaf(Edge(1, 3)), builder.leaf(Edge(1, 4)))
        return builder.build(builder.gate(AND, e12, either))

    def test_generators(self, shared_edges_4_3, shared_config):
        info = clique_generators(shared_edges_4_3, shared_config)
        assert info[4].generators == [to_mask([1])]
        assert info[5].generators == [to_mask([1, 2])]
        assert info[9].generators == [to_mask([3])]
        assert info[10].generators == [to_mask([3, 4])]
        assert info[11].generators == [0]
        assert all(not here.error_cliques for here in info.values())

    def test_blocked_edges_then_local_shift(self, shared_edges_4_3, shared_config):
        C = shared_edges_4_3
        info = clique_generators(C, shared_config)
        Q0 = build_Q0(C, info)
        assert len(Q0) == 14
        assert audit_q0_coverage(info, Q0)
        state = blocked_edges(C, info, Q0, (full_mask(4),), shared_config)
        assert state.z == Edge(1, 4).bit | Edge(2, 3).bit
        assert state.Q_trace == [14, 0]

        terms = local_shift(C, info, Q0, state)
        assert set(terms) == set(Q0)
        assert audit_local_terms(C, terms)
        for sigma in Q0:
            assert in_dnf(C, sigma.node, terms[sigma])
        assert [terms[sigma] for sigma in Q0.at_node(10)] == [positive_term([(1, 3), (3, 4)])]
        assert {terms[sigma] for sigma in Q0.at_node(4)} == {positive_term([(1, 3)])}

        rooted = Q0.at(C.root, 0)
        assert len(rooted) == 2
        assert terms[rooted[0]] == positive_term([(1, 2), (1, 3)])
        assert audit_disjointness(Q0, terms, state)
        assert audit_independence(Q0, state)

    def test_root_term_comes_from_the_root_quadruple(self, shared_edges_4_3, shared_config):
        outcome = run_shift(shared_edges_4_3, shared_config)
        assert outcome.success
        assert outcome.attempts == 1
        assert outcome.quadruples == 14
        assert outcome.term == positive_term([(1, 2), (1, 3)])
        assert outcome.z == Edge(1, 4).bit | Edge(2, 3).bit
        assert outcome.Q_trace == [14, 0]
        assert outcome.audits['local_terms'] == PASS
        assert outcome.audits['counterexample'] == PASS
        assert all(verdict == PASS for verdict in outcome.audits.values())
        assert verify_counterexample(shared_edges_4_3, outcome.term, 3)

    def test_no_dnf_fallback_when_quadruples_exist(self, left_half, shared_config):
        info = clique_generators(left_half, shared_config)
        assert info[left_half.root].generators == [to_mask([1, 2])]
        Q0 = build_Q0(left_half, info)
        assert len(Q0) == 6
        assert not Q0.at(left_half.root, 0)
        state = blocked_edges(left_half, info, Q0, (full_mask(4),), shared_config)
        terms = local_shift(left_half, info, Q0, state)
        # DNF(root) holds {12, 13}, which misses z = {}
        assert in_dnf(left_half, left_half.root, positive_term([(1, 2), (1, 3)]))
        with pytest.raises(NoRootTerm):
            _root_term(left_half, Q0, terms, 0, None)

        outcome = run_shift(left_half, shared_config)
        assert not outcome.success
        assert outcome.reason == 'NoRootTerm'
        assert outcome.failure_counts == {'NoRootTerm': 1}

    def test_empty_q0_still_scans_the_root_dnf(self, mutilated_6_3):
        cfg = load_config('shift_mutilated_6_3.json')
        info = clique_generators(mutilated_6_3, cfg)
        Q0 = build_Q0(mutilated_6_3, info)
        assert len(Q0) == 0
        term = _root_term(mutilated_6_3, Q0, {}, 0, None)
        assert in_dnf(mutilated_6_3, mutilated_6_3.root, term)


class TestRunShift:
    def test_mutilated_circuit_yields_a_counterexample(self, mutilated_6_3):
        cfg = load_config('shift_mutilated_6_3.json')
        outcome = run_shift(mutilated_6_3, cfg)
        assert outcome.success
        assert outcome.term == positive_term([(1, 2), (1, 3)])
        assert outcome.audits['counterexample'] == PASS
        assert all(verdict != 'fail' for verdict in outcome.audits.values())
        assert outcome.quadruples == 0
        assert verify_counterexample(mutilated_6_3, outcome.term, 3)
        assert set(outcome.failure_counts) <= {'NoRootTerm'}
        assert outcome.attempts == sum(outcome.failure_counts.values()) + 1
        block = next(part for part in outcome.split if part & 1)
        assert not block & to_mask([2, 3])

    def test_mutilated_success_rate(self, mutilated_6_3):
        cfg = replace(load_config('shift_mutilated_6_3.json'), split_count=20)
        info = clique_generators(mutilated_6_3, cfg)
        Q0 = build_Q0(mutilated_6_3, info)
        splits = build_splits(info, cfg)
        assert len(splits) == 20
        successes = 0
        for split in splits:
            try:
                _attempt(mutilated_6_3, cfg, info, Q0, split, None)
            except NoRootTerm:
                continue
            successes += 1
        assert successes == 6

    def test_vacuous_blocks_succeed_without_a_counterexample(self, clique_4_3):
        outcome = run_shift(clique_4_3, load_config('shift_clique_4_3_vacuous.json'))
        assert outcome.success
        assert outcome.attempts == 1
        assert outcome.term == positive_term([(1, 2), (1, 3), (2, 3)])
        assert outcome.audits['counterexample'] == NOT_APPLICABLE
        assert outcome.z == 0

    def test_correct_circuit_never_succeeds(self, clique_4_3, blocking_config):
        for seed in range(50):
            outcome = run_shift(clique_4_3, replace(blocking_config, seed=seed))
            assert not outcome.success
            assert outcome.reason == 'NoRootTerm'
            assert outcome.failure_stage == 'root_term'
            assert outcome.failure_counts == {'NoRootTerm': 6}

    @pytest.mark.parametrize("lambda_c, rate", [(0.0, 0.35), (10.0, 0.35), (10.0, 0.01)])
    def test_correct_clique_6_3_never_succeeds(self, lambda_c, rate):
        C = build_clique_circuit(6, 3)
        cfg = ShiftConfig(n=6, k=3, q=2, l=3, z_block_size=3, r_block=2, lambda_c=lambda_c,
                          generator_rate=rate, split_count=20)
        outcome = run_shift(C, cfg)
        assert not outcome.success
        assert sum(outcome.failure_counts.values()) >= 1

    def test_large_lambda_has_no_valid_split(self, clique_4_3, large_lambda_config):
        outcome = run_shift(clique_4_3, large_lambda_config)
        assert outcome.reason == 'NoValidSplit'
        assert outcome.failure_stage == 'build_splits'
        assert outcome.quadruples > 0

    def test_outcome_is_deterministic(self, mutilated_6_3):
        cfg = load_config('shift_mutilated_6_3.json')
        assert run_shift(mutilated_6_3, cfg).to_dict() == run_shift(mutilated_6_3, cfg).to_dict()

    def test_outcome_dict(self, mutilated_6_3, clique_4_3, blocking_config):
        success = run_shift(mutilated_6_3, load_config('shift_mutilated_6_3.json')).to_dict()
        assert success['term'] == [[1, 2, '+'], [1, 3, '+']]
        assert 'reason' not in success
        assert len(success['z']) == 6
        assert sorted(v for part in success['split'] for v in part) == [1, 2, 3, 4, 5, 6]

        failure = run_shift(clique_4_3, blocking_config).to_dict()
        assert failure['reason'] == 'NoRootTerm'
        assert failure['failure_counts'] == {'NoRootTerm': 6}

    def test_non_monotone_circuit(self, blocking_config):
        builder = CircuitBuilder(4)
        C = builder.build(builder.leaf(Edge(1, 2), positive=False))
        with pytest.raises(PreconditionViolation):
            run_shift(C, blocking_config)

    def test_failure_outcome_type(self, clique_4_3, blocking_config):
        assert isinstance(run_shift(clique_4_3, blocking_config), ShiftOutcome)
