"""Command-line entry point: ``equivshrink {estimate,risk-curve,verify,regress}``.

Exit codes: 0 success, 1 a check failed, 2 usage or grammar error, 3 domain or numerical error.
"""

import argparse
import logging
import sys

import numpy as np

import equivshrink
from equivshrink import ConvergenceError
from equivshrink import DomainError
from equivshrink import ParseError
from equivshrink import blyth
from equivshrink import densities
from equivshrink import estimators
from equivshrink import helpers
from equivshrink import output
from equivshrink import priors
from equivshrink import regression
from equivshrink import results
from equivshrink import risk
from equivshrink.model import Observation
from equivshrink.model import ProblemDim


logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_USAGE = 2
EXIT_DOMAIN = 3

RULE_KINDS = ('natural', 'js', 'psi-alpha', 'simple-bayes', 'bayes')
RISK_COLUMNS = ('lambda', 'risk', 'std_err', 'n_reps', 'estimator')
LOG_FORMAT = '%(asctime)s %(name)s %(levelname)s %(message)s'


def split_rule_list(text):
    """Split ``js,psi-alpha:0,simple-bayes:0.25,0`` into rule specifications.

    A comma only starts a new rule when the next piece begins with a rule kind.
    """
    specs = []
    for piece in (text or '').split(','):
        piece = piece.strip()
        if not piece:
            raise ParseError('empty rule in %r' % text)
        if specs and piece.split(':', 1)[0] not in RULE_KINDS:
            specs[-1] += ',' + piece
        else:
            specs.append(piece)
    return specs


def _read_numbers(path):
    with open(path, encoding='utf-8') as handle:
        text = handle.read()
    return helpers.parse_float_list(text.replace('\n', ',').strip(', '), path)


def _dims(args):
    return ProblemDim(args.p, args.n)


def _rule(spec, dims, args):
    density = densities.parse_density(args.density, dims)
    return estimators.parse_rule(spec, dims, density, threads=args.threads)


def _resolve_seed(seed):
    if seed is not None:
        return seed
    generated = int(np.random.SeedSequence().generate_state(1, np.uint64)[0])
    logger.warning('no --seed given; using the generated seed %d', generated)
    return generated


def _emit(args, text):
    output.write(text, args.out, sys.stdout)


def _options(args, fmt=None):
    return output.OutputOptions(fmt=fmt or args.format, csv_meta=args.csv_meta)


def cmd_estimate(args):
    if args.x_file:
        x = _read_numbers(args.x_file)
    elif args.x:
        x = helpers.parse_float_list(args.x, '--x')
    else:
        raise ParseError('one of --x or --x-file is required')
    if args.u is not None:
        u = helpers.parse_float_list(args.u, '--u')
        obs = Observation(x, u=u)
        n = len(u)
    elif args.s is not None:
        obs = Observation(x, s=args.s)
        n = args.n
    else:
        raise ParseError('one of --s or --u is required')
    if n is None:
        raise ParseError('--n is required with --s')
    if args.p is not None and args.p != obs.p:
        raise DomainError('--p %d does not match the %d coordinates of x' % (args.p, obs.p))
    dims = ProblemDim(obs.p, n)
    rule = _rule(args.rule, dims, args)
    estimate = rule.apply(obs)
    w = float(helpers.squared_norm(obs.x)) / obs.s if obs.s > 0 else None
    psi = rule.psi_value(w) if w is not None else None
    rows = [
        {'index': index, 'x': float(value), 'estimate': float(shrunk), 'w': w, 'psi': psi,
         'factor': None if psi is None else 1.0 - psi}
        for index, (value, shrunk) in enumerate(zip(obs.x, estimate))]
    meta = output.build_meta(
        'estimate', {'rule': rule.name, 'p': dims.p, 'n': dims.n, 's': obs.s})
    _emit(args, output.render_table(
        rows, ('index', 'x', 'estimate', 'w', 'psi', 'factor'), meta, _options(args)))
    return EXIT_OK


def cmd_risk_curve(args):
    dims = _dims(args)
    specs = ([args.rule] if args.rule else []) + (
        split_rule_list(args.compare) if args.compare else [])
    if not specs:
        raise ParseError('give --rule, --compare or both')
    grid = helpers.parse_float_list(args.lambdas, '--lambdas')
    seed = _resolve_seed(args.seed)
    density = densities.parse_density(args.density, dims)
    rules = [estimators.parse_rule(spec, dims, density, threads=args.threads) for spec in specs]
    curves, differences = risk.risk_curves(
        rules, density, grid, args.n_reps, seed, args.threads)

    columns = list(RISK_COLUMNS)
    if len(rules) > 1:
        columns += ['difference', 'difference_std_err', 'unpaired_std_err', 'verdict']
    if args.check == 'minimax':
        columns.append('within_bound')
    failed = False
    rows = []
    for index, curve in enumerate(curves):
        report = results.MinimaxReport(curve, dims.p, risk.VERDICT_THRESHOLD)
        if args.check == 'minimax' and not report.passes:
            logger.warning('%s exceeds p + 3 SE at lambda %s', curve.estimator_id,
                           report.violations)
            failed = True
        for point_index, point in enumerate(curve):
            row = point.to_dict()
            if index and len(rules) > 1:
                diff = differences[index - 1][point_index]
                verdict = diff.verdict(risk.VERDICT_THRESHOLD)
                row.update({
                    'difference': diff.difference, 'difference_std_err': diff.std_err,
                    'unpaired_std_err': diff.unpaired_std_err, 'verdict': verdict})
                if args.check == 'dominance' and verdict == 'b_dominates':
                    failed = True
            if args.check == 'minimax':
                row['within_bound'] = point.lam not in report.violations
            rows.append(row)
    meta = output.build_meta('risk-curve', {
        'rules': [rule.name for rule in rules], 'density': density.name, 'p': dims.p,
        'n': dims.n, 'lambdas': grid, 'n_reps': args.n_reps, 'check': args.check,
        'block_size': equivshrink.MC_BLOCK_SIZE}, seed)
    _emit(args, output.render_table(rows, columns, meta, _options(args)))
    return EXIT_CHECK_FAILED if failed else EXIT_OK


def _verify_density(args, dims):
    density = densities.parse_density(args.density, dims)
    report = density.check_tail_assumption().to_dict()
    report['density'] = density.name
    report['passes'] = bool(report['satisfies_f31'])
    return report


def _verify_prior(args, dims):
    return blyth.assumption_report(priors.parse_prior(args.prior, dims.p))


def _verify_blyth(args, dims):
    return blyth.blyth_lemma_report(
        [int(value) for value in helpers.parse_float_list(args.i_values, '--i-values')],
        helpers.parse_float_list(args.lambdas, '--lambdas'),
        priors.PriorSpec.power(0.0, dims.p))


def _verify_convergence(args, dims):
    density = densities.parse_density(args.density, dims)
    prior = priors.parse_prior(args.prior, dims.p)
    report = blyth.psi_convergence_diagnostic(
        prior, density, helpers.parse_float_list(args.w_grid, '--w-grid'),
        [int(value) for value in helpers.parse_float_list(args.i_values, '--i-values')])
    report['passes'] = report['monotone']
    return report


_VERIFIERS = {
    'density': _verify_density,
    'prior': _verify_prior,
    'blyth': _verify_blyth,
    'convergence': _verify_convergence,
}


def cmd_verify(args):
    dims = _dims(args)
    scopes = ('density', 'prior', 'blyth') if args.scope == 'all' else (args.scope,)
    reports = {scope: _VERIFIERS[scope](args, dims) for scope in scopes}
    passes = all(report['passes'] for report in reports.values())
    for scope, report in sorted(reports.items()):
        logger.info('verify %s: %s', scope, 'pass' if report['passes'] else 'FAIL')
    meta = output.build_meta('verify', {
        'scope': args.scope, 'density': args.density, 'prior': args.prior, 'p': dims.p,
        'n': dims.n})
    _emit(args, output.render_report(
        {'checks': reports, 'passes': passes}, meta, _options(args, 'json')))
    return EXIT_OK if passes else EXIT_CHECK_FAILED


def cmd_regress(args):
    data = regression.read_csv(args.csv, args.response)
    canon = regression.canonicalize(data)
    rule = _rule(args.rule, canon.dims, args)
    factor = regression.shrinkage_factor(canon, rule)
    shrunk = regression.shrink_coefficients(canon, rule)
    rows = [
        {'predictor': name, 'beta_hat': float(beta), 'shrunk': float(value),
         't_value': float(t_value), 'r_squared': canon.r_squared, 'w': canon.w,
         'factor': factor}
        for name, beta, value, t_value in zip(
            data.names, canon.beta_hat, shrunk, canon.t_values)]
    meta = output.build_meta('regress', {
        'csv': args.csv, 'response': args.response, 'rule': rule.name, 'p': canon.dims.p,
        'n': canon.dims.n, 'ybar': canon.ybar, 's': canon.s})
    _emit(args, output.render_table(
        rows, ('predictor', 'beta_hat', 'shrunk', 't_value', 'r_squared', 'w', 'factor'),
        meta, _options(args)))
    return EXIT_OK


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--out', default=None, help='output file (default: stdout)')
    common.add_argument('--format', choices=('csv', 'json'), default='csv')
    common.add_argument(
        '--csv-meta', action='store_true', help='start CSV output with a # line of metadata')
    common.add_argument(
        '--threads', type=int, default=None,
        help='worker threads (default: EQUIVSHRINK_THREADS, 0 for one per CPU)')
    common.add_argument('--verbose', action='store_true', help='log at DEBUG level')
    common.add_argument('--density', default='gaussian', help='gaussian | gt:a[,b]')

    parser = argparse.ArgumentParser(
        prog='equivshrink', description='Equivariant shrinkage estimators and their risk.')
    parser.add_argument('--version', action='version', version=equivshrink.__version__)
    commands = parser.add_subparsers(dest='command', metavar='COMMAND')
    commands.required = True

    estimate = commands.add_parser(
        'estimate', parents=[common], help='apply a rule to one observation')
    estimate.add_argument('--rule', required=True)
    estimate.add_argument('--x', help='comma separated coordinates of x')
    estimate.add_argument('--x-file', help='file with the coordinates of x')
    estimate.add_argument('--s', type=float, help='||u||^2')
    estimate.add_argument('--u', help='comma separated residual vector')
    estimate.add_argument('--p', type=int)
    estimate.add_argument('--n', type=int)
    estimate.set_defaults(handler=cmd_estimate)

    curve = commands.add_parser(
        'risk-curve', parents=[common], help='Monte Carlo risk over a lambda grid')
    curve.add_argument('--rule')
    curve.add_argument('--compare', help='rules evaluated on the same draws')
    curve.add_argument('--p', type=int, required=True)
    curve.add_argument('--n', type=int, required=True)
    curve.add_argument('--lambdas', default='0,1,5,25,100')
    curve.add_argument('--n-reps', type=int, default=risk.DEFAULT_REPS)
    curve.add_argument('--seed', type=int)
    curve.add_argument('--check', choices=('none', 'minimax', 'dominance'), default='none')
    curve.set_defaults(handler=cmd_risk_curve)

    verify = commands.add_parser(
        'verify', parents=[common], help='check assumptions and the Blyth lemma suite')
    verify.add_argument(
        '--scope', choices=('density', 'prior', 'blyth', 'convergence', 'all'), default='all')
    verify.add_argument('--prior', default='power:0', help='power:A | strawderman:A,B,b')
    verify.add_argument('--p', type=int, default=5)
    verify.add_argument('--n', type=int, default=10)
    verify.add_argument('--i-values', default='1,10,100,1000')
    verify.add_argument(
        '--lambdas', default=','.join(helpers.format_float(lam)
                                      for lam in blyth.DEFAULT_LAMBDA_GRID))
    verify.add_argument('--w-grid', default='0.5,2,10,50,200')
    verify.set_defaults(handler=cmd_verify)

    regress = commands.add_parser(
        'regress', parents=[common], help='shrink regression coefficients')
    regress.add_argument('--csv', required=True)
    regress.add_argument('--response', required=True)
    regress.add_argument('--rule', default='natural')
    regress.set_defaults(handler=cmd_regress)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as error:
        return error.code
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING, format=LOG_FORMAT)
    try:
        return args.handler(args)
    except ParseError as error:
        sys.stderr.write('equivshrink %s: %s\n' % (args.command, error))
        return EXIT_USAGE
    except (DomainError, ConvergenceError) as error:
        sys.stderr.write('equivshrink %s: %s\n' % (args.command, error))
        return EXIT_DOMAIN
    except OSError as error:
        sys.stderr.write('equivshrink %s: %s: %s\n' % (
            args.command, error.filename or 'input', error.strerror or error))
        return EXIT_DOMAIN
