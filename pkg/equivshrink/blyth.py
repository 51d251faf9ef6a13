"""Assumption checks on priors and the numerical side of the Blyth argument.

Everything here produces evidence on finite grids, returned as JSON-serialisable dicts that
embed the grids they were computed on.
"""

import logging
import math

import numpy as np

from equivshrink import ConvergenceError
from equivshrink import DomainError
from equivshrink import helpers
from equivshrink import quadrature
from equivshrink.priors import BlythSequence
from equivshrink.priors import PriorSpec
from equivshrink.priors import StrawdermanPrior


logger = logging.getLogger(__name__)

DEFAULT_I_VALUES = (1, 10, 100, 1000)
DEFAULT_LAMBDA_GRID = tuple(np.concatenate(([0.0], np.geomspace(1e-3, 1e6, 28))))

# kappa is evaluated at 10^2 ... 10^8 to classify the tail of a prior.
TAIL_LAMBDAS = tuple(10.0 ** k for k in range(2, 9))
TAIL_TOLERANCE = 0.01

# Window near the origin on which the exponent of pi(lambda) ~ lambda^alpha is read off.
ORIGIN_LAMBDAS = (1e-8, 1e-7, 1e-6)

_KAPPA_GRID = np.geomspace(1e-8, 1e8, 33)
_DERIVATIVE_STEP = 1e-4


def h_value(seq, lam):
    if not isinstance(seq, BlythSequence):
        seq = BlythSequence(seq)
    value = seq.value(lam)
    return value if np.ndim(value) else float(value)


def h_derivative(seq, lam):
    if not isinstance(seq, BlythSequence):
        seq = BlythSequence(seq)
    value = seq.derivative(lam)
    return value if np.ndim(value) else float(value)


def kappa(prior, lam):
    """lambda pi'(lambda) / pi(lambda)."""
    log_pi = np.asarray(prior.log_pi(lam), dtype=float)
    if np.any(~np.isfinite(log_pi)):
        raise DomainError('pi must be positive and finite where kappa is evaluated')
    value = prior.kappa(lam)
    return value if np.ndim(value) else float(value)


def strawderman_prior_value(alpha, beta, b, lam, p, cfg=None, bar=False):
    """The Strawderman mixture by one adaptive quadrature in s = log(xi - b).

    With ``bar=True`` the mixture integral pibar(lambda) is returned, which is finite at
    lambda = 0 when b > 0; otherwise pi(lambda) = c_p lambda^(p/2-1) pibar(lambda) for
    lambda > 0.
    """
    # Validates the parameters, including divergence of the integral at infinity.
    StrawdermanPrior(alpha, beta, b, p)
    lam = float(lam)
    if lam < 0 or (lam == 0 and not bar):
        raise DomainError('pi(lambda) is evaluated for lambda > 0, got %r' % lam)
    if lam == 0 and b == 0 and alpha + 1.0 - 0.5 * p <= 0:
        return float('inf')

    def _log_integrand(s):
        log_xi = np.logaddexp(math.log(b), s) if b > 0 else s
        return (
            (alpha + 1.0) * s - 0.5 * p * (math.log(2 * math.pi) + log_xi)
            - lam * np.exp(-log_xi) / 2.0 + beta * np.logaddexp(0.0, log_xi))

    grid = np.linspace(-120.0, 120.0, 961)
    with np.errstate(over='ignore'):
        log_values = _log_integrand(grid)
    peak = grid[int(np.argmax(log_values))]
    shift = float(_log_integrand(peak))

    def _integrand(s):
        with np.errstate(over='ignore'):
            return math.exp(float(_log_integrand(s)) - shift)

    lower, _ = quadrature.integrate_1d(_integrand, -np.inf, peak, cfg)
    upper, _ = quadrature.integrate_1d(_integrand, peak, np.inf, cfg)
    log_bar = shift + math.log(lower + upper)
    if bar:
        return math.exp(log_bar)
    return math.exp(helpers.log_c_m(p) + (0.5 * p - 1.0) * math.log(lam) + log_bar)


def _origin_report(prior):
    lams = np.asarray(ORIGIN_LAMBDAS)
    log_pi = np.asarray(prior.log_pi(lams), dtype=float)
    alpha_hat = float((log_pi[-1] - log_pi[0]) / math.log(lams[-1] / lams[0]))
    nu = np.exp(log_pi - alpha_hat * np.log(lams))
    nu_log_derivative = np.asarray(prior.kappa(lams), dtype=float) - alpha_hat
    return {
        'alpha_hat': alpha_hat,
        'passes': bool(alpha_hat > -0.5),
        'nu_checks': {
            'lambda': lams.tolist(),
            'nu': nu.tolist(),
            'nu_at_origin': float(nu[0]),
            'lambda_nu_prime_over_nu': nu_log_derivative.tolist(),
        },
    }


def _classify_tail(kappas):
    """Helper to classify the tail of a prior from kappa at TAIL_LAMBDAS."""
    lams = np.asarray(TAIL_LAMBDAS)
    limit = float(kappas[-1])
    if -1.0 - TAIL_TOLERANCE <= limit <= -TAIL_TOLERANCE:
        return 'A31', limit
    magnitudes = np.abs(kappas)
    if abs(limit) < 0.1 and np.all(np.diff(magnitudes) <= 1e-12):
        if np.all(kappas < 0) and np.all(np.diff(kappas) > 0):
            return 'A321', limit
        if np.max(np.log(lams[lams >= 1e5]) * magnitudes[lams >= 1e5]) < 1.0:
            return 'A322', limit
    return 'fails', limit


def assumption_report(prior):
    """Grid evidence for the smoothness, origin and tail assumptions on a prior."""
    if not isinstance(prior, PriorSpec):
        raise DomainError('assumption_report needs a PriorSpec, got %r' % (prior,))
    try:
        kappas = np.asarray(prior.kappa(_KAPPA_GRID), dtype=float)
        smooth = bool(np.all(np.isfinite(kappas)))
    except DomainError:
        kappas, smooth = None, False
    origin = _origin_report(prior)
    tail_kappas = np.asarray(prior.kappa(np.asarray(TAIL_LAMBDAS)), dtype=float)
    classification, limit = _classify_tail(tail_kappas)
    mass = prior.mass()
    report = {
        'prior': prior.to_dict(),
        'A1': smooth,
        'A1_grid': {
            'lambda': _KAPPA_GRID.tolist(),
            'kappa': None if kappas is None else kappas.tolist(),
        },
        'A2': origin,
        'A3': {
            'classification': classification,
            'limit_estimate': limit,
            'lambda': list(TAIL_LAMBDAS),
            'kappa': tail_kappas.tolist(),
            'log_lambda_abs_kappa': (np.log(TAIL_LAMBDAS) * np.abs(tail_kappas)).tolist(),
        },
        'proper': bool(np.isfinite(mass)),
        'mass': mass if np.isfinite(mass) else None,
    }
    report['passes'] = smooth and origin['passes'] and classification != 'fails'
    logger.info('assumptions of %s: A1=%s A2=%s A3=%s', prior.name, smooth,
                origin['passes'], classification)
    return report


def psi_convergence_diagnostic(prior, density, w_grid, i_list=DEFAULT_I_VALUES, cfg=None):
    """|psi_{pi_i}(w) - psi_pi(w)| for the tapered priors pi_i = pi h_i^2.

    The deviations are expected to shrink as i grows; ``monotone`` allows for twice the
    achieved quadrature error between successive indices.
    """
    w_grid = [float(w) for w in w_grid]
    i_list = [int(i) for i in i_list]
    if not w_grid or not i_list:
        raise DomainError('the diagnostic needs at least one w and one index')
    base = [quadrature.posterior_integrals(w, density, prior, cfg) for w in w_grid]
    deviations = []
    tapered_psi = []
    noise = []
    for index in i_list:
        tapered = prior.tapered(index)
        row = [quadrature.posterior_integrals(w, density, tapered, cfg) for w in w_grid]
        tapered_psi.append([result.psi for result in row])
        deviations.append([abs(result.psi - ref.psi) for result, ref in zip(row, base)])
        noise.append([
            abs(result.psi) * result.achieved_error + abs(ref.psi) * ref.achieved_error
            for result, ref in zip(row, base)])
        logger.debug('tapered index %d: max deviation %.3g', index, max(deviations[-1]))
    deviations = np.asarray(deviations)
    noise = np.asarray(noise)
    monotone = bool(np.all(np.diff(deviations, axis=0) <= 2.0 * noise[1:]))
    return {
        'prior': prior.name,
        'density': density.name,
        'w': w_grid,
        'i': i_list,
        'psi': [ref.psi for ref in base],
        'psi_tapered': tapered_psi,
        'deviation': deviations.tolist(),
        'monotone': monotone,
    }


def _finite_difference(seq, lam):
    step = _DERIVATIVE_STEP * lam
    return float((seq.value(lam + step) - seq.value(lam - step)) / (2 * step))


def blyth_lemma_report(i_values=DEFAULT_I_VALUES, lambda_grid=DEFAULT_LAMBDA_GRID, prior=None):
    """Evaluate the facts about h_i and pi_i = pi h_i^2 used by the Blyth argument.

    ``prior`` defaults to the flat prior pi = 1 on R^3.
    """
    i_values = sorted(int(i) for i in i_values)
    lams = np.asarray(sorted(float(lam) for lam in lambda_grid))
    if not i_values or lams.size < 2:
        raise DomainError('the lemma report needs indices and at least two lambda values')
    prior = prior or PriorSpec.power(0.0, 3)
    sequences = [BlythSequence(i) for i in i_values]
    values = np.array([seq.value(lams) for seq in sequences])
    derivatives = np.array([seq.derivative(lams) for seq in sequences])
    far = BlythSequence(10 ** 300).value(lams)

    positive = lams[lams > 0]
    differences = np.array([
        [_finite_difference(seq, lam) for lam in positive] for seq in sequences])
    exact = derivatives[:, lams > 0]
    relative = np.abs(differences - exact) / np.maximum(np.abs(exact), 1e-300)

    log_pis = np.array([prior.tapered(i).log_pi(positive) for i in i_values])
    chain = bool(np.all(np.diff(log_pis, axis=0) >= -1e-12)
                 and np.all(log_pis <= prior.log_pi(positive) + 1e-12))

    masses = [prior.tapered(i).mass() for i in i_values]
    unit = np.geomspace(1e-12, 1.0, 400)
    unit_mass = float(helpers.trapezoid(prior.tapered(1).value(unit), unit))

    checks = {
        'h_at_zero_is_one': bool(np.all(values[:, lams == 0] == 1.0)),
        'h_in_unit_interval': bool(np.all((values >= 0) & (values <= 1))),
        'h_decreasing_in_lambda': bool(np.all(np.diff(values, axis=1) <= 0)),
        'h_increasing_in_i': bool(np.all(np.diff(values, axis=0) >= 0)),
        'h_tends_to_one': bool(np.all(far >= values[-1])),
        'h1_at_one_above_one_eighth': bool(BlythSequence(1).value(1.0) > 0.125),
        'derivative_bound': bool(np.all(
            np.abs(derivatives) <= BlythSequence.derivative_bound(lams) * (1 + 1e-12))),
        'derivative_below_five': bool(np.max(np.abs(derivatives)) < 5.0),
        'derivative_matches_differences': bool(np.max(relative) < 1e-6),
        'tapered_chain': chain,
        'tapered_mass_finite': bool(all(np.isfinite(mass) for mass in masses)),
        'tapered_unit_mass_positive': unit_mass > 0,
    }
    failed = sorted(name for name, passed in checks.items() if not passed)
    if failed:
        logger.warning('Blyth lemma checks failed: %s', ', '.join(failed))
    return {
        'i': i_values,
        'lambda': lams.tolist(),
        'prior': prior.name,
        'h': values.tolist(),
        'h_derivative': derivatives.tolist(),
        'h1_at_one': float(BlythSequence(1).value(1.0)),
        'max_abs_derivative': float(np.max(np.abs(derivatives))),
        'max_relative_difference_error': float(np.max(relative)),
        'tapered_masses': [mass if np.isfinite(mass) else None for mass in masses],
        'tapered_unit_mass': unit_mass,
        'checks': checks,
        'passes': not failed,
    }


def check_convergence(report):
    """Raise ConvergenceError when a psi convergence diagnostic is not monotone."""
    if not report['monotone']:
        worst = float(np.max(report['deviation']))
        raise ConvergenceError(
            'psi of the tapered priors does not approach psi of %s' % report['prior'],
            estimate=worst)
    return report
