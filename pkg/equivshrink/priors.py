"""Priors pi(lambda) on the maximal invariant and the tapering sequence h_i.

Every prior works with pibar(lambda) = c_p^(-1) lambda^(1-p/2) pi(lambda), the density of
mu = sqrt(eta) theta on R^p, because that is what enters the posterior integrals.
"""

import collections
import copy
import functools
import logging
import math
import numbers

import numpy as np
from scipy import interpolate
from scipy import special
from scipy import stats

from equivshrink import AssumptionError
from equivshrink import DomainError
from equivshrink import ParseError
from equivshrink import helpers


logger = logging.getLogger(__name__)

_LOG_2PI = math.log(2 * math.pi)

# Support of the Strawderman spline in log lambda; beyond it log pibar is extended linearly
# with the exact end slopes, which are the limits of the log-derivative.
_SPLINE_RANGE = (-80.0, 80.0)
_SPLINE_STEP = 1.0 / 16
_MIXTURE_STEP = 0.25

# Window in log lambda used for numerical masses.
_MASS_RANGE = (-100.0, 100.0)
_MASS_STEP = 1.0 / 16

# Relative step of the central differences in log lambda.
_LOG_DIFF_STEP = 1e-4


class BlythSequence(collections.namedtuple('BlythSequence', ('index',))):
    """h_i(lambda) = 1 - loglog(lambda + e) / loglog(lambda + e + i)."""

    def __new__(cls, index):
        if isinstance(index, bool) or not isinstance(index, numbers.Integral) or index < 1:
            raise DomainError('the sequence index must be a positive integer, got %r' % (index,))
        return tuple.__new__(cls, (int(index),))

    @staticmethod
    def _loglog(lam, shift):
        # log(log(lam + e + shift)) written so that lam = shift = 0 gives exactly 0.
        return np.log1p(np.log1p((lam + shift) / math.e))

    def value(self, lam):
        lam = _as_lambda(lam)
        # 1 - L/L_i = (L_i - L)/L_i, with L_i - L = log(log(lam+e+i) / log(lam+e)).
        log_e_shift = 1.0 + np.log1p(lam / math.e)
        gap = np.log1p(np.log1p(self.index / (lam + math.e)) / log_e_shift)
        return gap / self._loglog(lam, self.index)

    def log_value(self, lam):
        with np.errstate(divide='ignore'):
            return np.log(self.value(lam))

    def derivative(self, lam):
        lam = _as_lambda(lam)
        log_base = 1.0 + np.log1p(lam / math.e)
        log_shifted = np.log(lam + math.e + self.index)
        d_loglog = 1.0 / ((lam + math.e) * log_base)
        d_loglog_i = 1.0 / ((lam + math.e + self.index) * log_shifted)
        loglog_i = self._loglog(lam, self.index)
        return (-d_loglog + (1.0 - self.value(lam)) * d_loglog_i) / loglog_i

    @staticmethod
    def derivative_bound(lam):
        """Uniform bound over i of |h_i'(lambda)|."""
        lam = _as_lambda(lam)
        return 2.0 / (
            (lam + math.e) * (1.0 + np.log1p(lam / math.e)) * np.log(np.log(lam + math.e + 1)))


def _as_lambda(lam):
    lam = np.asarray(lam, dtype=float)
    if np.any(lam < 0) or np.any(np.isnan(lam)):
        raise DomainError('lambda must be nonnegative')
    return lam


class PriorSpec(object):
    """Base class of the priors pi(lambda); build them with the class methods."""

    kind = None

    def __init__(self, p):
        if isinstance(p, bool) or not isinstance(p, numbers.Integral) or p < 1:
            raise DomainError('p must be a positive integer, got %r' % (p,))
        self._p = int(p)
        self._log_scale = 0.0
        self._log_c_p = helpers.log_c_m(self._p)

    p = property(lambda self: self._p)

    @property
    def scale(self):
        return math.exp(self._log_scale)

    @property
    def params(self):
        return {}

    @property
    def name(self):
        return self.kind

    @classmethod
    def power(cls, alpha, p, verified=False):
        return PowerPrior(alpha, p, verified=verified)

    @classmethod
    def strawderman(cls, alpha, beta, b, p, verified=False):
        return StrawdermanPrior(alpha, beta, b, p, verified=verified)

    @classmethod
    def custom(cls, fn, p, derivative=None, name='custom'):
        return CustomPrior(fn, p, derivative=derivative, name=name)

    def tapered(self, index):
        """pi_i = pi h_i^2."""
        return TaperedPrior(self, index)

    def log_pi_bar_at_log(self, log_lam):
        raise NotImplementedError()

    def log_pi_bar(self, lam):
        lam = _as_lambda(lam)
        with np.errstate(divide='ignore'):
            return self.log_pi_bar_at_log(np.log(lam))

    def log_pi(self, lam):
        lam = _as_lambda(lam)
        with np.errstate(divide='ignore', invalid='ignore'):
            log_lam = np.log(lam)
            return self._log_c_p + (0.5 * self._p - 1.0) * log_lam + self.log_pi_bar_at_log(log_lam)

    def value(self, lam):
        return np.exp(self.log_pi(lam))

    def kappa(self, lam):
        """lambda pi'(lambda) / pi(lambda), by central differences in log lambda."""
        lam = self._positive_lambda(lam)
        log_lam = np.log(lam)
        upper = self.log_pi_bar_at_log(log_lam + _LOG_DIFF_STEP)
        lower = self.log_pi_bar_at_log(log_lam - _LOG_DIFF_STEP)
        return 0.5 * self._p - 1.0 + (upper - lower) / (2 * _LOG_DIFF_STEP)

    def origin_exponent(self):
        """Limit of d log pibar / d log lambda as lambda goes to zero."""
        log_lam = np.array([math.log(1e-12), math.log(1e-10)])
        values = self.log_pi_bar_at_log(log_lam)
        return float((values[1] - values[0]) / (log_lam[1] - log_lam[0]))

    def power_form(self):
        """(log C, gamma) when pibar(lambda) = C lambda^gamma exactly, else None."""
        return None

    def mass(self):
        """Integral of pi over [0, inf); inf when the prior is improper."""
        log_lam = np.arange(_MASS_RANGE[0], _MASS_RANGE[1] + 0.5 * _MASS_STEP, _MASS_STEP)
        with np.errstate(over='ignore'):
            log_values = self.log_pi(np.exp(log_lam)) + log_lam
        total = special.logsumexp(log_values)
        if max(log_values[0], log_values[-1]) - total > math.log(1e-10):
            return float('inf')
        return math.exp(total + math.log(_MASS_STEP))

    def is_proper(self):
        return np.isfinite(self.mass())

    def normalized(self):
        mass = self.mass()
        if not np.isfinite(mass):
            raise AssumptionError(
                '%s is improper and cannot be normalized' % self.name, details=self.params)
        clone = copy.copy(self)
        clone._log_scale = self._log_scale - math.log(mass)
        return clone

    def sample_lambda(self, rng, size):
        raise DomainError('sampling lambda is only available for proper Strawderman priors')

    def _positive_lambda(self, lam):
        lam = _as_lambda(lam)
        if np.any(lam <= 0):
            raise DomainError('kappa is defined for lambda > 0 only')
        return lam

    def to_dict(self):
        return {'kind': self.kind, 'p': self._p, 'scale': self.scale, 'params': self.params}

    def __repr__(self):
        params = ', '.join('%s=%r' % item for item in sorted(self.params.items()))
        return '%s(%s%sp=%d)' % (type(self).__name__, params, ', ' if params else '', self._p)


class PowerPrior(PriorSpec):
    """pi(lambda) = lambda^alpha."""

    kind = 'power'

    def __init__(self, alpha, p, verified=False):
        super(PowerPrior, self).__init__(p)
        alpha = float(alpha)
        if not alpha > -1:
            raise DomainError('a power prior needs alpha > -1, got %r' % alpha)
        if verified and not -0.5 < alpha <= 0:
            raise AssumptionError(
                'power priors satisfy the assumptions for -1/2 < alpha <= 0 only, got %r' % alpha,
                details={'alpha': alpha})
        self._alpha = alpha

    alpha = property(lambda self: self._alpha)

    @property
    def params(self):
        return {'alpha': self._alpha}

    @property
    def name(self):
        return 'power:%s' % helpers.format_float(self._alpha)

    def _gamma(self):
        return self._alpha + 1.0 - 0.5 * self._p

    def log_pi_bar_at_log(self, log_lam):
        return self._log_scale - self._log_c_p + self._gamma() * np.asarray(log_lam, dtype=float)

    def kappa(self, lam):
        return np.full_like(self._positive_lambda(lam), self._alpha)

    def origin_exponent(self):
        return self._gamma()

    def power_form(self):
        return self._log_scale - self._log_c_p, self._gamma()

    def mass(self):
        return float('inf')


class StrawdermanPrior(PriorSpec):
    """pi(lambda) = c_p lambda^(p/2-1) int_b^inf (2 pi xi)^(-p/2) e^(-lambda/2xi) (xi-b)^alpha
    (1+xi)^beta dxi, a scale mixture of normal priors on mu."""

    kind = 'strawderman'

    def __init__(self, alpha, beta, b, p, verified=False):
        super(StrawdermanPrior, self).__init__(p)
        alpha, beta, b = float(alpha), float(beta), float(b)
        if not alpha > -1:
            raise DomainError('a Strawderman prior needs alpha > -1, got %r' % alpha)
        if not b >= 0:
            raise DomainError('a Strawderman prior needs b >= 0, got %r' % b)
        if alpha + beta - 0.5 * p >= -1:
            raise AssumptionError(
                'the mixture integral diverges when alpha + beta - p/2 >= -1 '
                '(alpha=%g, beta=%g, p=%d)' % (alpha, beta, p),
                details={'alpha': alpha, 'beta': beta, 'p': p})
        if verified:
            if not -1 <= alpha + beta <= 0:
                raise AssumptionError(
                    'the assumptions need -1 <= alpha + beta <= 0, got %g' % (alpha + beta))
            if b == 0 and not alpha > -0.5:
                raise AssumptionError('with b = 0 the assumptions need alpha > -1/2')
        self._alpha = alpha
        self._beta = beta
        self._b = b
        self._tail_rate = 0.5 * p - 1.0 - alpha - beta
        high = _SPLINE_RANGE[1] + 45.0
        if b > 0:
            low = min(-high, math.log(b) - 45.0 / (alpha + 1.0))
        else:
            low = -high
        self._s_grid = np.arange(low, high + 0.5 * _MIXTURE_STEP, _MIXTURE_STEP)
        self._log_xi = np.logaddexp(math.log(b), self._s_grid) if b > 0 else self._s_grid
        self._log_base = (
            (alpha + 1.0) * self._s_grid - 0.5 * p * (_LOG_2PI + self._log_xi)
            + beta * np.logaddexp(0.0, self._log_xi))

    alpha = property(lambda self: self._alpha)
    beta = property(lambda self: self._beta)
    b = property(lambda self: self._b)

    @property
    def params(self):
        return {'alpha': self._alpha, 'beta': self._beta, 'b': self._b}

    @property
    def name(self):
        return 'strawderman:%s' % ','.join(
            helpers.format_float(value) for value in (self._alpha, self._beta, self._b))

    def _log_weights(self, extra_rate):
        # Trapezoid weights in s; the last node also carries the exponential tail beyond it.
        weights = np.full(self._s_grid.shape, _MIXTURE_STEP)
        weights[0] *= 0.5
        weights[-1] = 0.5 * _MIXTURE_STEP + 1.0 / (self._tail_rate + extra_rate)
        return np.log(weights)

    def _log_mixture(self, log_lam, inverse_power=0):
        """log of the mixture integral with an extra xi^(-inverse_power), at each log lambda."""
        log_lam = np.atleast_1d(np.asarray(log_lam, dtype=float))
        flat = log_lam.ravel()
        base = self._log_base + self._log_weights(inverse_power) - inverse_power * self._log_xi
        out = np.empty(flat.shape)
        chunk = 256
        with np.errstate(over='ignore'):
            for start in range(0, flat.shape[0], chunk):
                block = flat[start:start + chunk, np.newaxis]
                rows = base - np.exp(block - math.log(2.0) - self._log_xi)
                out[start:start + chunk] = special.logsumexp(rows, axis=1)
        return out.reshape(log_lam.shape)

    def log_pi_bar_direct(self, lam):
        """log pibar by direct quadrature of the mixture, defined at lambda = 0 as well."""
        lam = _as_lambda(lam)
        with np.errstate(divide='ignore'):
            log_lam = np.log(lam)
        out = self._log_scale + self._log_mixture(log_lam)
        if self._b == 0 and self.origin_exponent() < 0:
            out = np.where(lam == 0, np.inf, out)
        out = out.reshape(lam.shape)
        return out if lam.ndim else float(out)

    def log_pi_bar(self, lam):
        return self.log_pi_bar_direct(lam)

    def kappa_bar(self, lam):
        """lambda pibar'(lambda) / pibar(lambda) from the mixture representation."""
        lam = self._positive_lambda(lam)
        log_lam = np.log(lam)
        ratio = self._log_mixture(log_lam, inverse_power=1) - self._log_mixture(log_lam)
        out = -np.exp(log_lam - math.log(2.0) + ratio).reshape(lam.shape)
        return out if lam.ndim else float(out)

    def kappa(self, lam):
        return 0.5 * self._p - 1.0 + self.kappa_bar(lam)

    @functools.cached_property
    def _spline(self):
        log_lam = np.arange(
            _SPLINE_RANGE[0], _SPLINE_RANGE[1] + 0.5 * _SPLINE_STEP, _SPLINE_STEP)
        values = self._log_mixture(log_lam)
        slopes = -np.exp(
            log_lam - math.log(2.0) + self._log_mixture(log_lam, inverse_power=1) - values)
        logger.debug('tabulated %s on %d points', self.name, log_lam.shape[0])
        return (
            interpolate.CubicHermiteSpline(log_lam, values, slopes),
            (log_lam[0], values[0], slopes[0]), (log_lam[-1], values[-1], slopes[-1]))

    def log_pi_bar_at_log(self, log_lam):
        log_lam = np.asarray(log_lam, dtype=float)
        spline, (low, low_value, low_slope), (high, high_value, high_slope) = self._spline
        inside = spline(np.clip(log_lam, low, high))
        out = np.where(
            log_lam < low, low_value + low_slope * (log_lam - low),
            np.where(log_lam > high, high_value + high_slope * (log_lam - high), inside))
        return self._log_scale + out

    def origin_exponent(self):
        if self._b > 0:
            return 0.0
        return min(self._alpha + 1.0 - 0.5 * self._p, 0.0)

    def limit_kappa(self):
        """Limit of kappa(lambda) as lambda goes to infinity."""
        return self._alpha + self._beta

    def mass(self):
        rate = -self._alpha - self._beta - 1.0
        if rate <= 0:
            return float('inf')
        return math.exp(
            self._log_scale + (self._alpha + self._beta + 1.0) * math.log1p(self._b)
            + special.betaln(self._alpha + 1.0, rate))

    def sample_lambda(self, rng, size):
        """lambda = xi chi2_p with xi - b = (1 + b) BetaPrime(alpha + 1, -alpha - beta - 1)."""
        rate = -self._alpha - self._beta - 1.0
        if rate <= 0:
            raise AssumptionError('cannot sample from the improper prior %s' % self.name)
        mixing = stats.betaprime.rvs(self._alpha + 1.0, rate, size=size, random_state=rng)
        xi = self._b + (1.0 + self._b) * mixing
        return xi * rng.chisquare(self._p, size=size)


class CustomPrior(PriorSpec):
    """A user supplied pi(lambda), vectorised over numpy arrays."""

    kind = 'custom'

    def __init__(self, fn, p, derivative=None, name='custom'):
        super(CustomPrior, self).__init__(p)
        if not callable(fn):
            raise DomainError('a custom prior must be callable')
        self._fn = fn
        self._derivative = derivative
        self._name = name

    @property
    def name(self):
        return self._name

    def log_pi_bar_at_log(self, log_lam):
        log_lam = np.asarray(log_lam, dtype=float)
        with np.errstate(divide='ignore', over='ignore'):
            values = np.asarray(self._fn(np.exp(log_lam)), dtype=float)
            return (
                self._log_scale - self._log_c_p + (1.0 - 0.5 * self._p) * log_lam
                + np.log(values))

    def kappa(self, lam):
        lam = self._positive_lambda(lam)
        values = np.asarray(self._fn(lam), dtype=float)
        if np.any(values <= 0):
            raise DomainError('pi must be positive wherever kappa is evaluated')
        if self._derivative is None:
            return super(CustomPrior, self).kappa(lam)
        return lam * np.asarray(self._derivative(lam), dtype=float) / values


class TaperedPrior(PriorSpec):
    """pi_i(lambda) = pi(lambda) h_i(lambda)^2."""

    kind = 'tapered'

    def __init__(self, base, index):
        super(TaperedPrior, self).__init__(base.p)
        self._base = base
        self._sequence = BlythSequence(index)

    base = property(lambda self: self._base)
    sequence = property(lambda self: self._sequence)

    @property
    def params(self):
        return {'base': self._base.name, 'index': self._sequence.index}

    @property
    def name(self):
        return '%s*h_%d^2' % (self._base.name, self._sequence.index)

    def log_pi_bar_at_log(self, log_lam):
        log_lam = np.asarray(log_lam, dtype=float)
        with np.errstate(over='ignore'):
            lam = np.exp(log_lam)
        return (
            self._log_scale + self._base.log_pi_bar_at_log(log_lam)
            + 2.0 * self._sequence.log_value(lam))

    def kappa(self, lam):
        lam = self._positive_lambda(lam)
        return (
            self._base.kappa(lam)
            + 2.0 * lam * self._sequence.derivative(lam) / self._sequence.value(lam))

    def origin_exponent(self):
        return self._base.origin_exponent()


def parse_prior(spec, p):
    """Build a prior from the command-line grammar ``power:ALPHA | strawderman:A,B,b``."""
    spec = (spec or '').strip()
    kind, _, args = spec.partition(':')
    if kind == 'power':
        values = helpers.parse_float_list(args, 'power prior parameters')
        if len(values) != 1:
            raise ParseError('expected power:ALPHA, got %r' % spec)
        return PriorSpec.power(values[0], p)
    if kind == 'strawderman':
        values = helpers.parse_float_list(args, 'Strawderman prior parameters')
        if len(values) != 3:
            raise ParseError('expected strawderman:ALPHA,BETA,B, got %r' % spec)
        return PriorSpec.strawderman(values[0], values[1], values[2], p)
    raise ParseError('unknown prior %r (expected power:A or strawderman:A,B,b)' % spec)
