"""
Experiment driver: verification suites and the desk-scale experiments.

Reports go to --out (or stdout); status lines go to stderr.
"""
import argparse
import json
import math
import sys
import time
from dataclasses import asdict, dataclass, replace
from typing import Optional

import numpy as np
import pandas as pd

import verification
from bounds import binomial_confidence
from config import DATABASE_URL, DEFAULT_SEED, EXIT_CODES, FAR_STATE, SIZE_CAPS, TESTER_THRESHOLDS
from ensembles import EnsembleKind, EnsembleSpec, far_fraction_experiment, sample
from exceptions import ProdTestError, UsageError
from models import ExperimentReport, record_run
from protocol import (
    CopyScope,
    StateSource,
    empirical_tv,
    estimate_purity_single_copy,
    local_random_basis_strategy,
    make_mp_tester,
    mp_test,
    random_basis_strategy,
    tester_bias,
)
from qcore import DensityMatrix, PureState, basis_state, haar_state, rng_stream

COMMANDS = ('verify', 'mp-test', 'distinguish', 'far-fraction', 'purity')
PURITY_STATES = ('pure', 'half', 'maximally_mixed', 'haar_pure')
DISTINGUISH_ENSEMBLES = ('global_haar', 'bipartite_product_haar', 'multipartite_product_haar')

# Per-command defaults for flags left unset
DEFAULTS = {
    'verify': {},
    'mp-test': {'n': 3, 'd': 2, 'eps': 0.6, 'trials': 200},
    'distinguish': {'n': 1, 'd': 16, 'T': 2, 'trials': 1000},
    'far-fraction': {'n': 2, 'd': 6, 'eps': 0.5, 'trials': 10000},
    'purity': {'d': 4, 'eps': 0.1, 'delta': 0.1, 'trials': 100},
}


@dataclass
class RunConfig:
    command: str
    n: Optional[int] = None
    d: Optional[int] = None
    T: Optional[int] = None
    eps: Optional[float] = None
    delta: Optional[float] = None
    trials: Optional[int] = None
    seed: int = DEFAULT_SEED
    out_path: Optional[str] = None
    format: str = 'json'
    threads: int = 1
    quick: bool = False
    timing: bool = False
    inject_fault: bool = False
    db: Optional[str] = None
    ensemble: str = 'global_haar'
    scope: str = 'global'
    state: str = 'maximally_mixed'
    transcript: Optional[str] = None

    def with_defaults(self) -> 'RunConfig':
        filled = {k: v for k, v in DEFAULTS.get(self.command, {}).items() if getattr(self, k) is None}
        return replace(self, **filled)

    def validate(self):
        """Raise UsageError for anything outside the documented caps"""
        if self.command not in COMMANDS:
            raise UsageError(f"unknown command {self.command!r}")
        if self.seed < 0 or self.seed >= 2 ** 64:
            raise UsageError("seed must be a 64-bit unsigned integer")
        if self.format not in ('json', 'csv'):
            raise UsageError("format must be json or csv")
        if self.threads < 1:
            raise UsageError("threads must be at least 1")
        if self.trials is not None and self.trials < 1:
            raise UsageError("trials must be at least 1")
        if self.n is not None and self.n < 1 or self.d is not None and self.d < 1:
            raise UsageError("n and d must be positive")
        if self.T is not None and not 0 <= self.T <= SIZE_CAPS['brute_force_side']:
            raise UsageError(f"T must lie in 0..{SIZE_CAPS['brute_force_side']}")
        if self.command == 'mp-test':
            if self.n < 2 or self.d < 2 or self.d ** self.n > SIZE_CAPS['explicit_operator_dim'] * 16:
                raise UsageError("mp-test needs n >= 2, d >= 2 and d^n <= 4096")
            if not 0 < self.eps <= FAR_STATE['max_eps']:
                raise UsageError("eps must lie in (0, 1/sqrt 2]")
        if self.command == 'far-fraction':
            if self.n < 2 or self.n > SIZE_CAPS['cut_factors'] or self.d ** self.n > SIZE_CAPS['product_oracle_dim']:
                raise UsageError("far-fraction needs 2 <= n <= 20 and d^n <= 65536")
            if not 0 < self.eps < 1:
                raise UsageError("eps must lie in (0, 1)")
        if self.command == 'distinguish':
            if self.ensemble not in DISTINGUISH_ENSEMBLES:
                raise UsageError(f"ensemble must be one of {', '.join(DISTINGUISH_ENSEMBLES)}")
            if self.scope not in ('global', 'local'):
                raise UsageError("scope must be global or local")
            if self.ensemble != 'global_haar' and self.n < 2:
                raise UsageError("product ensembles need n >= 2")
            if self.d ** self.n > SIZE_CAPS['explicit_operator_dim'] * 16:
                raise UsageError("distinguish needs d^n <= 4096")
        if self.command == 'purity':
            if self.state not in PURITY_STATES:
                raise UsageError(f"state must be one of {', '.join(PURITY_STATES)}")
            if self.d < 2 or self.d > SIZE_CAPS['explicit_operator_dim']:
                raise UsageError("purity needs 2 <= d <= 256")
            if not 0 < self.eps < 1 or not 0 < self.delta < 1:
                raise UsageError("eps and delta must lie in (0, 1)")
        return self

    def to_dict(self):
        data = asdict(self)
        for key in ('out_path', 'db', 'transcript', 'threads', 'timing'):
            data.pop(key)
        return data


def _status(tag, message):
    print(f"[{tag}] {message}", file=sys.stderr)


def _report(config, report: ExperimentReport) -> ExperimentReport:
    return replace(report, command=config.command, seed=config.seed, config=config.to_dict())


def cmd_verify(config):
    suites = verification.run_all(config.seed, quick=config.quick, inject_fault=config.inject_fault,
                                  threads=config.threads)
    for suite in suites:
        tag = 'OK' if suite['status'] == 'ok' else 'FAIL'
        _status(tag, f"{suite['name']}: {suite['instances']} instances, min slack {suite['min_slack']}, "
                     f"{suite['status']}")
    passed = sum(s['status'] == 'ok' for s in suites)
    report = ExperimentReport(
        spec={'suites': len(suites), 'quick': config.quick, 'inject_fault': config.inject_fault},
        samples=sum(s['instances'] for s in suites),
        estimate=passed / len(suites),
        confidence_radius=0.0,
        extra={'suites': suites},
    )
    code = EXIT_CODES['ok'] if passed == len(suites) else EXIT_CODES['failure']
    return code, _report(config, report), [
        {k: s.get(k) for k in ('name', 'instances', 'min_slack', 'status')} for s in suites]


def cmd_mp_test(config):
    tester = make_mp_tester(config.eps)
    report = tester_bias(tester,
                         EnsembleSpec.multipartite_product_haar(config.n, config.d),
                         EnsembleSpec.far_from_mp(config.n, config.d, config.eps),
                         config.trials, rng_stream(config.seed, 0), threads=config.threads)
    accept_mp, accept_far = report.extra['accept_mp'], report.extra['accept_far']
    ok = accept_mp >= TESTER_THRESHOLDS['completeness'] and accept_far <= TESTER_THRESHOLDS['soundness']
    _status('OK' if ok else 'FAIL', f"accept(MP) = {accept_mp:.3f}, accept(far) = {accept_far:.3f}, "
                                    f"bias = {report.estimate:.3f}")

    if config.transcript:
        rng = rng_stream(config.seed, 1)
        source = StateSource(sample(EnsembleSpec.multipartite_product_haar(config.n, config.d), rng), record=True)
        mp_test(source, config.n, config.d, config.eps, rng)
        source.transcript().to_csv(config.transcript, index=False)
        _status('OK', f"Transcript written to {config.transcript}")

    rows = []
    for label in ('mp', 'far'):
        for trial, verdict in enumerate(report.extra[f'{label}_verdicts']):
            row = {'ensemble': label, 'trial': trial, 'verdict': verdict['verdict'],
                   'copies_used': verdict['copies_used']}
            row.update({f'estimate_{i}': e for i, e in enumerate(verdict['per_site_estimates'])})
            rows.append(row)
    code = EXIT_CODES['ok'] if ok else EXIT_CODES['failure']
    return code, _report(config, report), rows


def cmd_distinguish(config):
    rng = rng_stream(config.seed, 0)
    kind = EnsembleKind(config.ensemble)
    spec_a = EnsembleSpec(kind, config.n, config.d)
    spec_b = EnsembleSpec.maximally_mixed(config.n, config.d)
    if CopyScope(config.scope) == CopyScope.GLOBAL:
        strategy = random_basis_strategy(spec_a.dim, config.T, rng)
    else:
        strategy = local_random_basis_strategy(config.n, config.d, config.T, rng)
    report = empirical_tv(spec_a, spec_b, strategy, config.T, config.trials, rng)
    bound = sum(config.T * (config.T - 1) / (2.0 * config.d ** len(block)) for block in spec_a.parts)
    report.extra['bound'] = bound
    ok = report.estimate <= bound + report.confidence_radius + 1e-9
    _status('OK' if ok else 'WARN', f"TV = {report.estimate:.6f} +- {report.confidence_radius:.6f}, "
                                    f"bound T(T-1)/2d = {bound:.6f} ({report.extra['method']})")
    row = {'estimate': report.estimate, 'radius': report.confidence_radius, 'bound': bound,
           'method': report.extra['method']}
    return EXIT_CODES['ok'] if ok else EXIT_CODES['failure'], _report(config, report), [row]


def cmd_far_fraction(config):
    report = far_fraction_experiment(config.n, config.d, config.eps, config.trials, rng_stream(config.seed, 0))
    _status('OK', f"fraction within {config.eps} of a bipartite product state: "
                  f"{report.estimate:.4f} +- {report.confidence_radius:.4f}")
    rows = [dict(cut=' '.join(map(str, c['cut'])), **{k: v for k, v in c.items() if k != 'cut'})
            for c in report.extra['cuts']]
    return EXIT_CODES['ok'], _report(config, report), rows


def _purity_state(name, dim, rng):
    if name == 'pure':
        return basis_state([0], dim)
    if name == 'haar_pure':
        return haar_state(dim, rng)
    if name == 'half':
        diag = np.zeros(dim)
        diag[:2] = 0.5
        return DensityMatrix(np.diag(diag), dim, 1)
    return DensityMatrix.maximally_mixed(dim, 1)


def cmd_purity(config):
    rng = rng_stream(config.seed, 0)
    state = _purity_state(config.state, config.d, rng)
    truth = 1.0 if isinstance(state, PureState) else float(np.sum(np.abs(state.matrix) ** 2))
    rows = []
    for run in range(config.trials):
        estimate = estimate_purity_single_copy(StateSource(state), config.d, config.eps, config.delta, rng)
        rows.append({'run': run, 'value': estimate.value, 'raw_value': estimate.raw_value,
                     'copies_used': estimate.copies_used})
    values = np.array([r['value'] for r in rows])
    within = int(np.sum(np.abs(values - truth) <= config.eps))
    _, _, radius = binomial_confidence(within, config.trials)
    ok = within / config.trials + radius >= 1.0 - config.delta
    report = ExperimentReport(
        spec={'state': config.state, 'd': config.d, 'purity': truth},
        samples=config.trials,
        estimate=float(values.mean()),
        confidence_radius=float(values.std() / math.sqrt(config.trials)),
        extra={'fraction_within_eps': within / config.trials, 'fraction_radius': radius,
               'copies_per_run': rows[0]['copies_used'], 'eps': config.eps, 'delta': config.delta},
    )
    _status('OK' if ok else 'FAIL', f"purity {truth:.4f}: mean estimate {report.estimate:.4f}, "
                                    f"{within}/{config.trials} runs within eps")
    return EXIT_CODES['ok'] if ok else EXIT_CODES['failure'], _report(config, report), rows


HANDLERS = {
    'verify': cmd_verify,
    'mp-test': cmd_mp_test,
    'distinguish': cmd_distinguish,
    'far-fraction': cmd_far_fraction,
    'purity': cmd_purity,
}


def build_parser():
    parser = argparse.ArgumentParser(prog='prodtest', description='Single-copy product testing experiments')
    sub = parser.add_subparsers(dest='command', required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument('--n', type=int)
        p.add_argument('--d', type=int)
        p.add_argument('--T', type=int)
        p.add_argument('--eps', type=float)
        p.add_argument('--delta', type=float)
        p.add_argument('--trials', type=int)
        p.add_argument('--seed', type=int, default=DEFAULT_SEED)
        p.add_argument('--out', dest='out_path')
        p.add_argument('--format', choices=('json', 'csv'), default='json')
        p.add_argument('--threads', type=int, default=1)
        p.add_argument('--db', help='SQLAlchemy URL of the run ledger')
        p.add_argument('--timing', action='store_true', help='embed wall time in the report')
        if name == 'verify':
            p.add_argument('--quick', action='store_true')
            p.add_argument('--inject-fault', action='store_true')
        if name == 'distinguish':
            p.add_argument('--ensemble', choices=DISTINGUISH_ENSEMBLES, default='global_haar')
            p.add_argument('--scope', choices=('global', 'local'), default='global')
        if name == 'purity':
            p.add_argument('--state', choices=PURITY_STATES, default='maximally_mixed')
        if name == 'mp-test':
            p.add_argument('--transcript', help='CSV path for the measurement transcript of one MP run')
    return parser


def write_report(config, report: dict, rows):
    if config.format == 'csv':
        text = pd.DataFrame(rows).to_csv(index=False)
    else:
        text = json.dumps(report, indent=2, sort_keys=True) + '\n'
    if config.out_path:
        with open(config.out_path, 'w') as f:
            f.write(text)
        _status('OK', f"Report written to {config.out_path}")
    else:
        sys.stdout.write(text)


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:
        return EXIT_CODES['usage'] if e.code else EXIT_CODES['ok']
    try:
        config = RunConfig(**vars(args)).with_defaults().validate()
    except UsageError as e:
        _status('FAIL', f"usage: {e}")
        return EXIT_CODES['usage']

    _status('OK', f"{config.command} (seed {config.seed})")
    started = time.perf_counter()
    try:
        code, report, rows = HANDLERS[config.command](config)
    except ProdTestError as e:
        _status('FAIL', str(e))
        return EXIT_CODES['failure']
    if config.timing:
        report = replace(report, wall_time_ms=(time.perf_counter() - started) * 1000.0)
    data = report.to_dict()
    write_report(config, data, rows)

    url = config.db or DATABASE_URL
    if url:
        try:
            run_id = record_run(url, config.command, config.seed, code, config.to_dict(), data)
            _status('OK', f"Run recorded (id {run_id})")
        except Exception as e:
            _status('WARN', f"Run ledger unavailable: {e}")
    return code
