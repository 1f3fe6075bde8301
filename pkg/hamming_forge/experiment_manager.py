#!/usr/bin/python3
"""
Forge Experiment Manager - command-line driver for hamming-forge
Runs the identity suites, constant calibration, generator and sunflower searches, DNF listings and shift-pipeline experiments
"""

import sys
import json
import logging
import argparse
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path
from typing import Dict, List, Any, Optional, Tuple

from hamming_forge.circuits.circuit_engine import (
    cliques_generated_at, dnf, parse_circuit, read_circuit_file, term_to_list
)
from hamming_forge.circuits.shift_pipeline import ShiftConfig, run_shift
from hamming_forge.config import (
    FORGE_CONFIG, enumeration_cap, save_constants, set_cap_override, setup_logging
)
from hamming_forge.core.binom_engine import calibrate_constants, identity_suites
from hamming_forge.core.set_family import (
    complement_sparsity, elements, format_set, read_family_file, sparsity
)
from hamming_forge.errors import ForgeError, MalformedInput, PreconditionViolation
from hamming_forge.processors.generator_search import find_generator
from hamming_forge.processors.sunflower_finder import (
    NotFound, find_sunflower_er, find_sunflower_small_core, sunflower_to_dict, verify_sunflower
)
from hamming_forge.reports import (
    build_report, canonical_json, render_pairs, render_table, status_mark
)

logger = logging.getLogger(__name__)

EXIT_OK, EXIT_VIOLATION, EXIT_INPUT = 0, 1, 2

RATE_HELP = ("Explicit Phase I rate r. Without it r = ln(l0 / m^2) with l0 = floor(eps' l / lambda), "
             "and when l0 <= m^2 (always at the default eps' = 0.25 and l <= 4 m^2 lambda) Phase I is "
             "skipped: g = {} is reported with phase1_skipped = true")


def _shift_task(task: Tuple[str, Dict[str, Any], int, int]) -> Dict[str, Any]:
    """One shift run in a worker process"""
    circuit_text, config, seed, cap = task
    circuit = parse_circuit(circuit_text)
    cfg = replace(ShiftConfig.from_dict(config), seed=seed)
    return run_shift(circuit, cfg, cap).to_dict()


def _safe_kappa(fn, family) -> Optional[float]:
    try:
        return fn(family)
    except PreconditionViolation:
        return None


class ForgeManager:
    def __init__(self, seed: int = 0, jobs: int = 1, cap: Optional[int] = None):
        if jobs < 1:
            raise PreconditionViolation(f"--jobs must be >= 1, got {jobs}")
        self.seed = seed
        self.jobs = jobs
        self.cap = cap

    def global_config(self) -> Dict[str, Any]:
        return {
            'enumeration_cap': enumeration_cap(self.cap),
            'epsilon_prime': FORGE_CONFIG['epsilon_prime'],
            'node_budget': FORGE_CONFIG['node_budget'],
            'tolerance': FORGE_CONFIG['tolerance'],
        }

    def identities(self, pq_max: int = 20, pascal_max: int = 64, basic2_max: int = 60,
                   basic3_max: int = 400, approx_max: int = 2000, proportional_max: int = 60,
                   inject_fault: bool = False) -> Tuple[Dict[str, Any], int]:
        """Run every identity and bound suite"""
        suites = identity_suites(
            pq_max=pq_max, pascal_max=pascal_max, basic2_max=basic2_max,
            basic3_max=basic3_max, approx_max=approx_max,
            proportional_max=proportional_max, inject_fault=inject_fault
        )
        passed = all(suite['failures'] == 0 for suite in suites)
        config = dict(self.global_config(), pq_max=pq_max, pascal_max=pascal_max, basic2_max=basic2_max,
                      basic3_max=basic3_max, approx_max=approx_max, proportional_max=proportional_max,
                      inject_fault=inject_fault)
        report = build_report('identities', config, self.seed, {'passed': passed, 'suites': suites})
        return report, EXIT_OK if passed else EXIT_VIOLATION

    def calibrate(self, p_max: int = 2000, basic3_l_max: int = 400, proportional_max: int = 200,
                  save: bool = False, constants_file: Optional[str] = None) -> Tuple[Dict[str, Any], int]:
        """Sweep the three constants; optionally write them to the constants file"""
        constants = calibrate_constants(p_max=p_max, basic3_l_max=basic3_l_max,
                                        proportional_max=proportional_max, jobs=self.jobs)
        body: Dict[str, Any] = {'constants': constants}
        if save:
            body['saved_to'] = str(save_constants(constants, constants_file))
        config = dict(self.global_config(), p_max=p_max, basic3_l_max=basic3_l_max,
                      proportional_max=proportional_max)
        return build_report('binom-calibrate', config, self.seed, body), EXIT_OK

    def generator(self, family_file: str, l: int, lam: float, mode: str = 'exact', budget: int = 4096,
                  rate: Optional[float] = None, epsilon_prime: Optional[float] = None) -> Tuple[Dict[str, Any], int]:
        """Extension generator and validity report for a family file"""
        family = read_family_file(family_file)
        result, validity = find_generator(
            family, l, lam, rate=rate, mode=mode, budget=budget, seed=self.seed,
            epsilon_prime=epsilon_prime, cap=self.cap
        )
        body = {
            'family': {
                'n': family.n, 'm': family.m, 'size': family.size,
                'sparsity': _safe_kappa(sparsity, family),
                'complement_sparsity': _safe_kappa(complement_sparsity, family),
            },
            'generator': result.to_dict(),
            'validity': validity.to_dict(),
        }
        config = dict(self.global_config(), family_file=Path(family_file).name, l=l, lam=lam, mode=mode,
                      budget=budget, rate=rate,
                      epsilon_prime=FORGE_CONFIG['epsilon_prime'] if epsilon_prime is None else epsilon_prime)
        return build_report('generator', config, self.seed, body), EXIT_OK

    def sunflower(self, family_file: str, delta: int, method: str = 'er', l: Optional[int] = None,
                  lam: float = 1.0, rate: Optional[float] = None,
                  node_budget: Optional[int] = None) -> Tuple[Dict[str, Any], int]:
        """Erdos-Rado or small-core sunflower of a family file"""
        family = read_family_file(family_file)
        if delta < 2:
            raise PreconditionViolation(f"--delta must be >= 2, got {delta}")
        if method == 'er':
            found = find_sunflower_er(family, delta, node_budget)
        else:
            if l is None:
                raise PreconditionViolation("--l is required for the small-core method")
            found = find_sunflower_small_core(family, delta, l, lam, rate=rate,
                                              node_budget=node_budget, cap=self.cap)
        body = {'sunflower': sunflower_to_dict(found)}
        if not isinstance(found, NotFound):
            verified = verify_sunflower(found, family)
            if not verified:
                raise ForgeError(f"Sunflower with core {format_set(found.core)} failed verification")
            body['sunflower']['verified'] = verified
        config = dict(self.global_config(), family_file=Path(family_file).name, delta=delta, method=method,
                      l=l, lam=lam, rate=rate, node_budget=node_budget or FORGE_CONFIG['node_budget'])
        return build_report('sunflower', config, self.seed, body), EXIT_OK

    def dnf_listing(self, circuit_file: str, node: Optional[int] = None, k: Optional[int] = None,
                    drop_contradictory: bool = False) -> Tuple[Dict[str, Any], int]:
        """DNF of a node and, with k, the k-cliques it generates"""
        circuit = read_circuit_file(circuit_file)
        node_id = circuit.root if node is None else node
        circuit.node(node_id)
        terms = dnf(circuit, node_id, self.cap, drop_contradictory=drop_contradictory)
        body: Dict[str, Any] = {
            'node': node_id,
            'n': circuit.n,
            'monotone': circuit.monotone,
            'term_count': len(terms),
            'terms': [term_to_list(t) for t in terms],
        }
        if k is not None:
            body['k'] = k
            body['generated_cliques'] = [list(elements(c)) for c in cliques_generated_at(circuit, node_id, k, self.cap)]
        config = dict(self.global_config(), circuit_file=Path(circuit_file).name, node=node_id, k=k,
                      drop_contradictory=drop_contradictory)
        return build_report('dnf', config, self.seed, body), EXIT_OK

    def shift(self, circuit_file: str, config_file: str, seeds: Optional[List[int]] = None) -> Tuple[Dict[str, Any], int]:
        """Shift pipeline once per seed; failures are reported, not raised"""
        try:
            circuit_text = Path(circuit_file).read_text()
        except FileNotFoundError:
            raise MalformedInput(f"Circuit file not found: {circuit_file}")
        try:
            with open(config_file, 'r') as f:
                raw_config = json.load(f)
        except FileNotFoundError:
            raise MalformedInput(f"Shift config file not found: {config_file}")
        except json.JSONDecodeError as e:
            raise MalformedInput(f"Shift config {config_file} is not valid JSON: {e}")
        if not isinstance(raw_config, dict):
            raise MalformedInput("Shift config must be a JSON object")

        # validate both inputs before fanning out
        circuit = parse_circuit(circuit_text)
        base = ShiftConfig.from_dict(raw_config)
        if not circuit.monotone:
            raise PreconditionViolation("The shift pipeline runs on monotone circuits only")
        if circuit.n != base.n:
            raise PreconditionViolation(f"Circuit is over [{circuit.n}] but the config says n={base.n}")

        run_seeds = list(seeds) if seeds else [self.seed]
        cap = enumeration_cap(self.cap)
        tasks = [(circuit_text, base.to_dict(), seed, cap) for seed in run_seeds]
        if self.jobs > 1 and len(tasks) > 1:
            with ProcessPoolExecutor(max_workers=self.jobs) as pool:
                runs = list(pool.map(_shift_task, tasks))
        else:
            runs = [_shift_task(task) for task in tasks]

        for seed, run in zip(run_seeds, runs):
            run['seed'] = seed
            logger.info(f"seed {seed}: {run['status']}")

        successes = sum(1 for run in runs if run['status'] == 'success')
        counterexamples = sum(1 for run in runs if run['audits'].get('counterexample') == 'pass')
        reasons: Dict[str, int] = {}
        for run in runs:
            if run['status'] != 'success':
                reasons[run['reason']] = reasons.get(run['reason'], 0) + 1
        body = {
            'runs': runs,
            'aggregate': {
                'runs': len(runs),
                'successes': successes,
                'failures': len(runs) - successes,
                'verified_counterexamples': counterexamples,
                'failure_reasons': dict(sorted(reasons.items())),
            },
        }
        config = dict(self.global_config(), circuit_file=Path(circuit_file).name,
                      config_file=Path(config_file).name, shift=base.to_dict(), seeds=run_seeds)
        return build_report('shift', config, self.seed, body), EXIT_OK


# Human summaries

def render_summary(report: Dict[str, Any]) -> str:
    command = report['command']
    if command == 'identities':
        title = f"{status_mark(report['passed'])} Identity suites"
        return render_table(report['suites'], ['suite', 'range', 'checked', 'failures', 'first_failure'], title)

    if command == 'binom-calibrate':
        rows = [dict(name=name, **entry) for name, entry in sorted(report['constants'].items())]
        text = render_table(rows, ['name', 'value', 'observed_max', 'argmax', 'sweep_range'], "📊 Calibrated constants")
        if 'saved_to' in report:
            text += f"\n✅ Saved to {report['saved_to']}"
        return text

    if command == 'generator':
        generator, validity = report['generator'], report['validity']
        lines = [render_pairs(report['family'], "📋 Family")]
        lines.append(render_pairs({
            'g': format_set_list(generator['g']),
            'r': generator['r'],
            'kappa(U)': generator['kappa_U'],
            'kappa(U_g hat)': generator['kappa_Ug_hat'],
            'size bound': generator['size_bound'],
            'maximal': generator['maximal'],
            'Phase I': 'skipped (l0 <= m^2, pass --rate)' if generator['phase1_skipped'] else 'run',
        }, "🔧 Generator"))
        lines.append(render_pairs({
            'mode': validity['mode'],
            'valid': f"{validity['valid_count']}/{validity['total_count']}",
            'complement sparsity': validity['complement_sparsity'],
            'success': validity.get('success'),
        }, "📈 Validity"))
        return '\n\n'.join(lines)

    if command == 'sunflower':
        found = report['sunflower']
        if not found['found']:
            return f"❌ No sunflower: {found['reason']}"
        petals = ', '.join(format_set_list(p) for p in found['petals'])
        return f"✅ Sunflower with core {format_set_list(found['core'])} and petals {petals}"

    if command == 'dnf':
        header = f"📋 DNF of node {report['node']} ({report['term_count']} terms)"
        lines = [header] + [f"  • {_term_text(t)}" for t in report['terms']]
        if 'generated_cliques' in report:
            lines.append(f"\n🔧 {len(report['generated_cliques'])} generated {report['k']}-cliques")
            lines.extend(f"  • {format_set_list(c)}" for c in report['generated_cliques'])
        return '\n'.join(lines)

    if command == 'shift':
        rows = []
        for run in report['runs']:
            rows.append({
                'seed': run['seed'],
                'status': status_mark(run['status'] == 'success') + ' ' + run['status'],
                'stage': run.get('failure_stage'),
                'reason': run.get('reason'),
                'attempts': run['attempts'],
                'Q_trace': run['Q_trace'],
                'counterexample': run['audits'].get('counterexample'),
            })
        columns = ['seed', 'status', 'stage', 'reason', 'attempts', 'Q_trace', 'counterexample']
        return render_table(rows, columns, "🔬 Shift runs") + '\n\n' + render_pairs(report['aggregate'], "📊 Aggregate")

    return canonical_json(report)


def format_set_list(values: List[int]) -> str:
    return '{' + ','.join(str(v) for v in values) + '}'


def _term_text(term: List[List[Any]]) -> str:
    return '{' + ','.join(f"{'' if sign == '+' else '~'}X({u},{v})" for u, v, sign in term) + '}'


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='forge_manager',
        description="Hamming Forge - set-family toolkit and shift analysis of monotone CLIQUE circuits"
    )
    parser.add_argument('--json', action='store_true', help='Print the JSON report instead of a summary')
    parser.add_argument('--seed', type=int, default=0, help='Seed of every random choice (default 0)')
    parser.add_argument('--jobs', type=int, default=1, help='Worker processes for independent tasks')
    parser.add_argument('--cap', type=int, help='Enumeration cap (overrides HAMMING_FORGE_CAP)')
    parser.add_argument('--output', help='Also write the JSON report to this path')
    parser.add_argument('--verbose', action='store_true', help='Debug logging on stderr')
    parser.add_argument('--log-file', help='Also log to this file')

    subparsers = parser.add_subparsers(dest='command', help='Available commands')

    # Identity suites
    identities_parser = subparsers.add_parser('identities', help='Run the exhaustive identity and bound suites')
    identities_parser.add_argument('--pq-max', type=int, default=20, help='Range of p, q, r for the identities')
    identities_parser.add_argument('--pascal-max', type=int, default=64, help='Range of p for Pascal rule')
    identities_parser.add_argument('--basic2-max', type=int, default=60, help='Range of n for the ln-gap sandwich')
    identities_parser.add_argument('--basic3-max', type=int, default=400, help='Range of l for the ratio bound')
    identities_parser.add_argument('--approx-max', type=int, default=2000, help='Range of p for the approximation')
    identities_parser.add_argument('--proportional-max', type=int, default=60, help='Range of p, q for proportional splits')
    identities_parser.add_argument('--inject-fault', action='store_true', help='Flip one check to exercise the failure path')

    # Calibration
    calibrate_parser = subparsers.add_parser('binom-calibrate', help='Calibrate K, K_prime and K_basic3')
    calibrate_parser.add_argument('--p-max', type=int, default=2000, help='Sweep 2 <= q < p <= p-max')
    calibrate_parser.add_argument('--basic3-l-max', type=int, default=400, help='Sweep l <= value')
    calibrate_parser.add_argument('--proportional-max', type=int, default=200, help='Sweep p, q <= value')
    calibrate_parser.add_argument('--save', action='store_true', help='Write the constants file')
    calibrate_parser.add_argument('--constants-file', help='Constants file to write (default from config)')

    # Generator
    generator_parser = subparsers.add_parser('generator', help='Find an extension generator of a family file')
    generator_parser.add_argument('family_file', help='Family JSON file')
    generator_parser.add_argument('--l', type=int, required=True, help='Length of the valid sets')
    generator_parser.add_argument('--lambda', dest='lam', type=float, default=1.0, help='Target complement sparsity')
    generator_parser.add_argument('--mode', choices=['exact', 'sampled'], default='exact', help='Validity counting mode')
    generator_parser.add_argument('--budget', type=int, default=4096, help='Samples in sampled mode')
    generator_parser.add_argument('--rate', type=float, help=RATE_HELP)
    generator_parser.add_argument('--epsilon-prime', type=float, help='Override epsilon prime')

    # Sunflower
    sunflower_parser = subparsers.add_parser('sunflower', help='Find a sunflower in a family file')
    sunflower_parser.add_argument('family_file', help='Family JSON file')
    sunflower_parser.add_argument('--delta', type=int, required=True, help='Number of petals')
    sunflower_parser.add_argument('--method', choices=['er', 'small-core'], default='er', help='Search method')
    sunflower_parser.add_argument('--l', type=int, help='Valid-set length for the small-core method')
    sunflower_parser.add_argument('--lambda', dest='lam', type=float, default=1.0, help='Target sparsity for the generator')
    sunflower_parser.add_argument('--rate', type=float, help=RATE_HELP)
    sunflower_parser.add_argument('--node-budget', type=int, help='Backtracking budget')

    # DNF
    dnf_parser = subparsers.add_parser('dnf', help='List the DNF of a circuit node')
    dnf_parser.add_argument('circuit_file', help='Circuit text file')
    dnf_parser.add_argument('--node', type=int, help='Node id (default root)')
    dnf_parser.add_argument('--k', type=int, help='Also list the generated k-cliques')
    dnf_parser.add_argument('--drop-contradictory', action='store_true', help='Drop terms holding X and ~X')

    # Shift
    shift_parser = subparsers.add_parser('shift', help='Run the shift pipeline on a circuit')
    shift_parser.add_argument('circuit_file', help='Circuit text file')
    shift_parser.add_argument('config_file', help='Shift config JSON file')
    shift_parser.add_argument('--seeds', type=int, nargs='+', help='Run once per seed (default --seed)')

    return parser


def run_command(manager: ForgeManager, args: argparse.Namespace) -> Tuple[Dict[str, Any], int]:
    if args.command == 'identities':
        return manager.identities(args.pq_max, args.pascal_max, args.basic2_max, args.basic3_max,
                                  args.approx_max, args.proportional_max, args.inject_fault)
    elif args.command == 'binom-calibrate':
        return manager.calibrate(args.p_max, args.basic3_l_max, args.proportional_max,
                                 args.save, args.constants_file)
    elif args.command == 'generator':
        return manager.generator(args.family_file, args.l, args.lam, args.mode, args.budget,
                                 args.rate, args.epsilon_prime)
    elif args.command == 'sunflower':
        method = 'er' if args.method == 'er' else 'small_core'
        return manager.sunflower(args.family_file, args.delta, method, args.l, args.lam,
                                 args.rate, args.node_budget)
    elif args.command == 'dnf':
        return manager.dnf_listing(args.circuit_file, args.node, args.k, args.drop_contradictory)
    elif args.command == 'shift':
        return manager.shift(args.circuit_file, args.config_file, args.seeds)
    raise PreconditionViolation(f"Unknown command {args.command}")


def main(argv: Optional[List[str]] = None) -> int:
    """Main CLI interface"""
    parser = build_parser()
    args = parser.parse_args(argv)

    if not args.command:
        parser.print_help()
        return EXIT_INPUT

    setup_logging(args.verbose, args.log_file)

    try:
        set_cap_override(args.cap)
        manager = ForgeManager(seed=args.seed, jobs=args.jobs, cap=args.cap)
        report, code = run_command(manager, args)
    except (ForgeError, ValueError) as e:
        print(f"❌ {e}", file=sys.stderr)
        return EXIT_INPUT
    finally:
        set_cap_override(None)

    text = canonical_json(report)
    if args.output:
        Path(args.output).parent.mkdir(parents=True, exist_ok=True)
        Path(args.output).write_text(text + '\n')
        logger.info(f"Report written to {args.output}")
    print(text if args.json else render_summary(report))
    return code


if __name__ == "__main__":
    sys.exit(main())
