"""Spherically symmetric generators f on R^(p+n) with tail integrals and samplers."""

import collections
import functools
import logging
import math
import warnings

import numpy as np
from scipy import integrate
from scipy import special

from equivshrink import AssumptionError
from equivshrink import DomainError
from equivshrink import ParseError
from equivshrink import helpers
from equivshrink import quadrature
from equivshrink.model import LocationScale
from equivshrink.model import Observation
from equivshrink.model import ProblemDim


logger = logging.getLogger(__name__)

# Geometric grid on which the tail condition of t f'(t)/f(t) is sampled; the estimate is taken
# over the last decade.
TAIL_GRID = np.geomspace(1e2, 1e6, 41)
_TAIL_DECADE_START = 1e5

# Grid used to reject generators that are negative or blow up. Zeros are only rejected up to
# _POSITIVE_UP_TO, beyond which light tails underflow.
_POSITIVITY_GRID = np.concatenate(([0.0], np.geomspace(1e-6, 1e6, 61)))
_POSITIVE_UP_TO = 100.0


class TailReport(collections.namedtuple(
        'TailReport', ('limsup_estimate', 'satisfies_f31', 'satisfies_f32', 'indeterminate'))):

    def to_dict(self):
        return {
            'limsup_estimate': None if self.indeterminate else self.limsup_estimate,
            'satisfies_f31': self.satisfies_f31,
            'satisfies_f32': self.satisfies_f32,
            'indeterminate': self.indeterminate,
        }


class RadialDensity(object):
    """Base class of the generators f of a density eta^((p+n)/2) f(eta(||x-theta||^2+||u||^2)).

    Subclasses provide ``log_value`` and may override the closed forms of the tail integral,
    of the ratio F/f and of the log-derivative t f'(t)/f(t).
    """

    kind = None

    def __init__(self, dims):
        if not isinstance(dims, ProblemDim):
            dims = ProblemDim(*dims)
        self._dims = dims

    @property
    def dims(self):
        return self._dims

    @property
    def total(self):
        return self._dims.total

    @property
    def name(self):
        return self.kind

    def log_value(self, t):
        raise NotImplementedError()

    def value(self, t):
        return np.exp(self.log_value(_as_radius(t)))

    def tail_integral(self, t, cfg=None):
        """F(t) = 1/2 times the integral of f from t to infinity."""
        t = _as_scalar_radius(t)
        value, error = quadrature.integrate_1d(lambda s: float(self.value(s)), t, np.inf, cfg)
        logger.debug('tail integral of %s at t=%g: %g (+/- %.2g)', self.name, t, value, error)
        return 0.5 * value

    def f_ratio(self, t, cfg=None):
        t = _as_scalar_radius(t)
        return self.tail_integral(t, cfg) / float(self.value(t))

    def log_derivative_ratio(self, t):
        """t f'(t) / f(t) by central differences on log f."""
        t = _as_radius(t)
        step = 1e-5 * np.maximum(t, 1.0)
        lower = np.maximum(t - step, 0.0)
        upper = t + step
        return t * (self.log_value(upper) - self.log_value(lower)) / (upper - lower)

    def check_tail_assumption(self):
        ratios = np.asarray(self.log_derivative_ratio(TAIL_GRID), dtype=float)
        if not np.all(np.isfinite(ratios)):
            return TailReport(float('nan'), False, False, True)
        estimate = float(np.max(ratios[TAIL_GRID >= _TAIL_DECADE_START]))
        half_total = 0.5 * self.total
        return TailReport(
            estimate, estimate < -half_total - 2, estimate < -half_total - 3, False)

    def moments(self, cfg=None):
        """Return (mass, second moment): c_N int t^(N/2-1) f and c_N int t^(N/2) f."""
        half = 0.5 * self.total
        log_c = helpers.log_c_m(self.total)

        def _integral(power):
            # Integrate in log t so that the peak near t = N is resolved for any N.
            def _integrand(y):
                if y > 700:
                    return 0.0
                return math.exp(log_c + (power + 1.0) * y + float(self.log_value(math.exp(y))))
            peak = math.log(self.total)
            lower, _ = quadrature.integrate_1d(_integrand, -np.inf, peak, cfg)
            upper, _ = quadrature.integrate_1d(_integrand, peak, np.inf, cfg)
            return lower + upper

        return _integral(half - 1.0), _integral(half)

    def sample_spherical(self, rng, size, dim=None):
        """Draws V in R^dim with density f(||v||^2) (unit scale)."""
        raise NotImplementedError()

    def sample(self, loc, rng, size):
        """Draw ``size`` pairs (X, U) as arrays of shapes (size, p) and (size, n)."""
        if not isinstance(loc, LocationScale):
            raise DomainError('loc must be a LocationScale')
        if loc.theta.shape[0] != self._dims.p:
            raise DomainError(
                'theta has length %d, expected p=%d' % (loc.theta.shape[0], self._dims.p))
        draws = self.sample_spherical(rng, size) / math.sqrt(loc.eta)
        return loc.theta + draws[:, :self._dims.p], draws[:, self._dims.p:]

    def __repr__(self):
        return '%s(p=%d, n=%d)' % (type(self).__name__, self._dims.p, self._dims.n)


class Gaussian(RadialDensity):

    kind = 'gaussian'

    def log_value(self, t):
        return -0.5 * self.total * math.log(2 * math.pi) - 0.5 * np.asarray(t, dtype=float)

    def tail_integral(self, t, cfg=None):
        return float(self.value(_as_scalar_radius(t)))

    def f_ratio(self, t, cfg=None):
        _as_scalar_radius(t)
        return 1.0

    def log_derivative_ratio(self, t):
        return -0.5 * _as_radius(t)

    def sample_spherical(self, rng, size, dim=None):
        return rng.standard_normal((size, dim or self.total))


class GeneralizedT(RadialDensity):
    """Multivariate generalized Student t: an inverse-gamma(a/2, b/2) scale mixture of normals.

    ``b`` defaults to ``a - 2``, the only choice giving unit variance per coordinate.
    """

    kind = 'gt'

    def __init__(self, dims, a, b=None):
        super(GeneralizedT, self).__init__(dims)
        a = float(a)
        if not np.isfinite(a) or a <= 0:
            raise DomainError('generalized t needs a > 0, got a=%r' % a)
        if b is None:
            if a <= 2:
                raise DomainError(
                    'b must be given explicitly when a <= 2 (no unit-variance scale exists)',
                    details={'a': a})
            b = a - 2
        b = float(b)
        if not np.isfinite(b) or b <= 0:
            raise DomainError('generalized t needs b > 0, got b=%r' % b)
        self._a = a
        self._b = b
        self._unit_variance = np.isclose(b, a - 2, rtol=1e-12, atol=0.0)
        if not self._unit_variance:
            warnings.warn(
                'GeneralizedT(a=%g, b=%g) does not have unit coordinate variance; '
                'use b = a - 2 for the standard scaling' % (a, b), UserWarning, stacklevel=2)
        half = 0.5 * (self.total + a)
        self._exponent = half
        self._log_norm = (
            special.gammaln(half) - special.gammaln(0.5 * a)
            - 0.5 * self.total * math.log(math.pi * b))

    a = property(lambda self: self._a)
    b = property(lambda self: self._b)
    unit_variance = property(lambda self: self._unit_variance)

    @property
    def name(self):
        return 'gt:%s,%s' % (helpers.format_float(self._a), helpers.format_float(self._b))

    @property
    def metadata(self):
        return {'a': self._a, 'b': self._b, 'unit_variance': bool(self._unit_variance)}

    def log_value(self, t):
        return self._log_norm - self._exponent * np.log1p(np.asarray(t, dtype=float) / self._b)

    def tail_integral(self, t, cfg=None):
        t = _as_scalar_radius(t)
        shape = self.total + self._a - 2
        return math.exp(
            self._log_norm + math.log(self._b / shape)
            - 0.5 * shape * math.log1p(t / self._b))

    def f_ratio(self, t, cfg=None):
        t = _as_scalar_radius(t)
        return (self._b + t) / (self.total + self._a - 2)

    def log_derivative_ratio(self, t):
        t = _as_radius(t)
        return -self._exponent * t / (self._b + t)

    def sample_spherical(self, rng, size, dim=None):
        mixing = 0.5 * self._b / rng.gamma(0.5 * self._a, size=size)
        return np.sqrt(mixing)[:, np.newaxis] * rng.standard_normal((size, dim or self.total))

    def __repr__(self):
        return 'GeneralizedT(p=%d, n=%d, a=%g, b=%g)' % (
            self._dims.p, self._dims.n, self._a, self._b)


class CustomRadial(RadialDensity):
    """A user supplied generator; ``fn`` must be vectorised over numpy arrays."""

    kind = 'custom'

    def __init__(self, fn, dims, metadata=None, name='custom'):
        super(CustomRadial, self).__init__(dims)
        if not callable(fn):
            raise DomainError('a custom generator must be callable')
        self._fn = fn
        self._metadata = dict(metadata or {})
        self._name = name
        with np.errstate(all='ignore'):
            sampled = np.asarray(fn(_POSITIVITY_GRID), dtype=float)
        if sampled.shape != _POSITIVITY_GRID.shape:
            raise DomainError('a custom generator must be vectorised over numpy arrays')
        vanishes = np.any(sampled[_POSITIVITY_GRID <= _POSITIVE_UP_TO] <= 0)
        if not np.all(np.isfinite(sampled)) or np.any(sampled < 0) or vanishes:
            raise AssumptionError(
                'f must be positive and finite for every t >= 0',
                details={'grid': _POSITIVITY_GRID.tolist(), 'values': sampled.tolist()})

    @property
    def name(self):
        return self._name

    @property
    def metadata(self):
        return dict(self._metadata)

    def log_value(self, t):
        with np.errstate(divide='ignore'):
            return np.log(np.asarray(self._fn(np.asarray(t, dtype=float)), dtype=float))

    def value(self, t):
        return np.asarray(self._fn(_as_radius(t)), dtype=float)

    @functools.cached_property
    def _radial_inverse_cdf(self):
        # ||V||^2 has density c_N t^(N/2-1) f(t); tabulate its distribution in log t.
        log_t = np.linspace(-40.0, 40.0, 16001)
        log_density = 0.5 * self.total * log_t + self.log_value(np.exp(log_t))
        weights = np.exp(log_density - np.max(log_density))
        cdf = integrate.cumulative_trapezoid(weights, log_t, initial=0.0)
        cdf /= cdf[-1]
        keep = np.concatenate(([True], np.diff(cdf) > 0))
        logger.debug('tabulated radial distribution of %s on %d points', self.name, keep.sum())
        return cdf[keep], log_t[keep]

    def sample_spherical(self, rng, size, dim=None):
        if dim is not None and dim != self.total:
            raise DomainError(
                'a custom generator is only defined on R^%d, got dimension %d' % (self.total, dim))
        cdf, log_t = self._radial_inverse_cdf
        radius_sq = np.exp(np.interp(rng.random(size), cdf, log_t))
        direction = rng.standard_normal((size, self.total))
        direction /= np.linalg.norm(direction, axis=1, keepdims=True)
        return np.sqrt(radius_sq)[:, np.newaxis] * direction

    def __repr__(self):
        return 'CustomRadial(%s, p=%d, n=%d)' % (self._name, self._dims.p, self._dims.n)


def _as_radius(t):
    t = np.asarray(t, dtype=float)
    if np.any(t < 0) or np.any(np.isnan(t)):
        raise DomainError('the generator is only defined for t >= 0')
    return t


def _as_scalar_radius(t):
    t = float(t)
    if t < 0 or math.isnan(t):
        raise DomainError('the generator is only defined for t >= 0, got %r' % t)
    return t


def c_m(m):
    return helpers.c_m(m)


def density_value(density, t):
    return float(density.value(_as_scalar_radius(t)))


def tail_integral_F(density, t, cfg=None):
    return density.tail_integral(t, cfg)


def f_ratio(density, t, cfg=None):
    return density.f_ratio(t, cfg)


def check_tail_assumption(density):
    return density.check_tail_assumption()


def sample_observation(density, loc, rng):
    x, u = density.sample(loc, rng, 1)
    return Observation(x[0], u=u[0])


def parse_density(spec, dims):
    """Build a density from the command-line grammar ``gaussian | gt:a[,b]``."""
    spec = (spec or '').strip()
    if spec == 'gaussian':
        return Gaussian(dims)
    if spec.startswith('gt:'):
        values = helpers.parse_float_list(spec[3:], 'generalized t parameters')
        if len(values) not in (1, 2):
            raise ParseError('expected gt:a or gt:a,b, got %r' % spec)
        return GeneralizedT(dims, *values)
    raise ParseError('unknown density %r (expected gaussian or gt:a[,b])' % spec)
