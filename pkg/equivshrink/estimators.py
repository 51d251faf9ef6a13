"""The catalogue of shrinkage rules delta_psi = {1 - psi(W)} x."""

from concurrent import futures
import logging

import numpy as np
from scipy import interpolate

from equivshrink import ConvergenceError
from equivshrink import DomainError
from equivshrink import ParseError
from equivshrink import SingularityError
from equivshrink import helpers
from equivshrink import quadrature
from equivshrink.model import ProblemDim
from equivshrink.model import w_statistic


logger = logging.getLogger(__name__)

# Range and default size of the w grid on which numerically integrated rules are cached.
CACHE_RANGE = (1e-4, 1e6)
CACHE_SIZE = 256

# Relative interpolation error accepted by NumericBayes.validate_cache.
CACHE_TOLERANCE = 1e-4


def _as_dims(dims):
    if isinstance(dims, ProblemDim):
        return dims
    return ProblemDim(*dims)


def _as_w(w):
    w = np.asarray(w, dtype=float)
    if np.any(np.isnan(w)) or np.any(w < 0) or np.any(np.isinf(w)):
        raise DomainError('w must be finite and nonnegative')
    return w


class ShrinkageRule(object):
    """A rule psi: W -> shrinkage factor, applied as {1 - psi(||x||^2/s)} x.

    Build rules through the class methods; ``psi`` is vectorised over numpy arrays.
    """

    def __init__(self, kind, dims, psi_fn, name, params=None):
        self._kind = kind
        self._dims = dims
        self._psi_fn = psi_fn
        self._name = name
        self._params = dict(params or {})

    kind = property(lambda self: self._kind)
    dims = property(lambda self: self._dims)
    name = property(lambda self: self._name)

    @property
    def params(self):
        return dict(self._params)

    @classmethod
    def natural(cls, dims):
        return cls('natural', _as_dims(dims), np.zeros_like, 'natural')

    @classmethod
    def james_stein(cls, dims):
        dims = _as_dims(dims).require_shrinkage('James-Stein rules')
        constant = (dims.p - 2) / (dims.n + 2)

        def _psi(w):
            if np.any(w == 0):
                raise SingularityError(
                    'the James-Stein factor (p-2)/((n+2) w) is unbounded at w = 0')
            return constant / w

        return cls('js', dims, _psi, 'js', {'constant': constant})

    @classmethod
    def psi_alpha(cls, alpha, dims, cfg=None):
        dims = _as_dims(dims).require_shrinkage('psi_alpha rules')
        alpha = float(alpha)
        if not -0.5 < alpha <= 0:
            raise DomainError(
                'psi_alpha needs -1/2 < alpha <= 0, got %r' % alpha, details={'alpha': alpha})

        def _psi(w):
            return psi_alpha_values(w, alpha, dims, cfg)

        return cls(
            'psi-alpha', dims, _psi, 'psi-alpha:%s' % helpers.format_float(alpha),
            {'alpha': alpha})

    @classmethod
    def simple_bayes(cls, a, b, dims):
        dims = _as_dims(dims).require_shrinkage('simple Bayes rules')
        a, b = float(a), float(b)
        if not a > 0:
            raise DomainError('simple Bayes needs a > 0, got %r' % a, details={'a': a})
        if not b >= 0:
            raise DomainError('simple Bayes needs b >= 0, got %r' % b, details={'b': b})
        offset = (a + 1) * (b + 1)

        def _psi(w):
            return a / (w + offset)

        return cls(
            'simple-bayes', dims, _psi,
            'simple-bayes:%s,%s' % (helpers.format_float(a), helpers.format_float(b)),
            {'a': a, 'b': b})

    @classmethod
    def numeric_bayes(cls, prior, density, cfg=None, nu=-1.0, grid_size=CACHE_SIZE,
                      threads=None):
        return NumericBayes(prior, density, cfg, nu, grid_size, threads)

    @classmethod
    def custom(cls, fn, dims, name='custom'):
        dims = _as_dims(dims).require_shrinkage('custom rules')
        if not callable(fn):
            raise DomainError('a custom rule needs a callable psi')

        def _psi(w):
            return np.asarray(fn(w), dtype=float) * np.ones_like(w)

        return cls('custom', dims, _psi, name)

    def psi(self, w):
        w = _as_w(w)
        return self._psi_fn(w)

    def psi_value(self, w):
        return float(self.psi(float(w)))

    def apply(self, obs):
        if obs.p != self._dims.p:
            raise DomainError(
                'observation has p=%d but the rule was built for p=%d' % (obs.p, self._dims.p))
        return (1.0 - self.psi_value(w_statistic(obs))) * obs.x

    def apply_many(self, x, s):
        """Vectorised apply over rows of x (shape (m, p)) and s (shape (m,))."""
        w = helpers.squared_norm(x) / s
        return (1.0 - self.psi(w))[:, np.newaxis] * x

    def to_dict(self):
        return {'kind': self._kind, 'name': self._name, 'p': self._dims.p, 'n': self._dims.n,
                'params': self.params}

    def __repr__(self):
        return 'ShrinkageRule(%s, p=%d, n=%d)' % (self._name, self._dims.p, self._dims.n)


def psi_alpha_values(w, alpha, dims, cfg=None):
    """psi_alpha(w) = int t^(p/2-alpha-1) (1-t)^alpha (1+wt)^(-(p+n)/2-1) dt over the same
    integral with t^(p/2-alpha-2).

    With v = w/(1+w) both integrals become Beta-weighted integrals of polynomials in s,
    K_k = int s^(c_k-1) (1-s)^alpha (1-v s)^(n/2+1-k) ds, c_k = p/2-alpha-1+k, and
    psi_alpha(w) = K_1 / ((1+w) K_0). That form stays accurate for every w.
    """
    w = _as_w(w)
    p, n = dims
    flat = np.atleast_1d(w).ravel()
    v = flat / (1.0 + flat)
    shape = 0.5 * p - alpha - 1.0

    def _beta_integral(k):
        def _g(s):
            return (1.0 - np.outer(s, v)) ** (0.5 * n + 1 - k)
        return quadrature.integrate_beta_weighted(_g, alpha, cfg, beta=shape + k - 1.0)

    values = _beta_integral(1) / ((1.0 + flat) * _beta_integral(0))
    values = np.where(flat == 0, psi_alpha_at_zero(alpha, dims), values)
    return values.reshape(w.shape) if w.ndim else float(values[0])


def psi_alpha_at_zero(alpha, dims):
    """(p/2 - alpha - 1) / (p/2), the Beta-function limit of psi_alpha at w = 0."""
    return (0.5 * dims.p - alpha - 1.0) / (0.5 * dims.p)


def psi_zero(w, dims, cfg=None):
    """The alpha = 0 rule written with its original integrals, by adaptive quadrature.

    For w > 1 the integrals are taken in s = w t, where they are of order one; over [0, 1]
    they shrink like w^(-p/2) and the absolute tolerance would swamp them.
    """
    w = float(_as_w(w))
    dims = _as_dims(dims).require_shrinkage()
    p, n = dims
    exponent = -0.5 * (p + n) - 1.0
    if w == 0:
        return psi_alpha_at_zero(0.0, dims)
    if w <= 1:
        def _moment(power):
            value, _ = quadrature.integrate_1d(
                lambda t: t ** power * (1.0 + w * t) ** exponent, 0.0, 1.0, cfg)
            return value

        return _moment(0.5 * p - 1.0) / _moment(0.5 * p - 2.0)

    def _scaled_moment(power):
        value, _ = quadrature.integrate_1d(
            lambda s: s ** power * (1.0 + s) ** exponent, 0.0, w, cfg,
            points=[point for point in (1.0, 10.0, 100.0) if point < w])
        return value

    return _scaled_moment(0.5 * p - 1.0) / (w * _scaled_moment(0.5 * p - 2.0))


class NumericBayes(ShrinkageRule):
    """The Bayes equivariant rule psi_pi of a prior, from the posterior integrals.

    psi_pi is evaluated on a log-spaced w grid when the rule is built and interpolated by a
    monotone cubic in log w of g(w) = (1 + w) psi_pi(w). Below the grid psi_pi is
    interpolated linearly towards psi_pi(0); above it g is held constant.
    """

    def __init__(self, prior, density, cfg=None, nu=-1.0, grid_size=CACHE_SIZE, threads=None):
        dims = density.dims.require_shrinkage('numeric Bayes rules')
        if int(grid_size) < 4:
            raise DomainError('the cache needs at least 4 grid points, got %r' % (grid_size,))
        self._prior = prior
        self._density = density
        self._cfg = cfg or quadrature.DEFAULT_QUAD_CONFIG
        self._nu = float(nu)
        self._kernel = quadrature.posterior_kernel(density, prior, self._cfg, self._nu)
        name = 'bayes:%s' % prior.name
        if self._nu != -1.0:
            name += ';nu=%s' % helpers.format_float(self._nu)
        super(NumericBayes, self).__init__(
            'bayes', dims, self._interpolate, name,
            {'prior': prior.to_dict(), 'density': density.name, 'nu': self._nu})
        self._grid = np.geomspace(CACHE_RANGE[0], CACHE_RANGE[1], int(grid_size))
        self._build_cache(threads)

    prior = property(lambda self: self._prior)
    density = property(lambda self: self._density)
    nu = property(lambda self: self._nu)

    def _build_cache(self, threads):
        workers = helpers.resolve_threads(threads)
        logger.info('building the %s cache on %d points with %d workers',
                    self.name, self._grid.shape[0], workers)
        with futures.ThreadPoolExecutor(max_workers=workers) as executor:
            results = list(executor.map(self._kernel.integrals, self._grid))
        self._grid_psi = np.array([result.psi for result in results])
        self._grid_error = max(result.achieved_error for result in results)
        self._psi_at_zero = self._kernel.integrals(0.0).psi
        log_grid = np.log(self._grid)
        self._log_low, self._log_high = log_grid[0], log_grid[-1]
        self._spline = interpolate.PchipInterpolator(log_grid, (1.0 + self._grid) * self._grid_psi)
        logger.debug('%s cache: psi(0)=%.10g, worst achieved error %.3g',
                     self.name, self._psi_at_zero, self._grid_error)

    @property
    def grid(self):
        return self._grid.copy()

    @property
    def grid_psi(self):
        return self._grid_psi.copy()

    @property
    def psi_at_zero(self):
        return self._psi_at_zero

    def _interpolate(self, w):
        flat = np.atleast_1d(w).astype(float)
        out = np.empty_like(flat)
        low, high = self._grid[0], self._grid[-1]
        below = flat < low
        above = flat > high
        inside = ~(below | above)
        out[below] = self._psi_at_zero + (self._grid_psi[0] - self._psi_at_zero) * flat[below] / low
        out[above] = (1.0 + high) * self._grid_psi[-1] / (1.0 + flat[above])
        out[inside] = self._spline(np.log(flat[inside])) / (1.0 + flat[inside])
        return out.reshape(np.shape(w)) if np.ndim(w) else float(out[0])

    def direct(self, w):
        """psi_pi(w) straight from the posterior integrals, bypassing the cache."""
        return self._kernel.integrals(w).psi

    def integrals(self, w):
        return self._kernel.integrals(w)

    def validate_cache(self, n_points=50, seed=0, tolerance=CACHE_TOLERANCE):
        """Compare the cache with direct evaluation at log-uniform random w in the grid range."""
        rng = np.random.default_rng(seed)
        points = np.exp(rng.uniform(self._log_low, self._log_high, n_points))
        cached = self.psi(points)
        direct = np.array([self.direct(w) for w in points])
        errors = np.abs(cached - direct) / np.maximum(np.abs(direct), 1e-300)
        worst = float(np.max(errors))
        if worst > tolerance:
            raise ConvergenceError(
                'the %s cache is off by a relative %.3g at w=%g' % (
                    self.name, worst, points[int(np.argmax(errors))]),
                estimate=worst, error=tolerance)
        return {'points': points.tolist(), 'max_relative_error': worst}


def psi_value(rule, w):
    return rule.psi_value(w)


def apply_shrinkage(rule, obs):
    return rule.apply(obs)


def alpha_to_a(alpha, dims):
    dims = _as_dims(dims)
    alpha = float(alpha)
    if not alpha > -1:
        raise DomainError('alpha must be greater than -1, got %r' % alpha)
    return (0.5 * dims.total - alpha - 1.0) / (alpha + 1.0)


def a_to_alpha(a, dims):
    dims = _as_dims(dims)
    a = float(a)
    if not a > -1:
        raise DomainError('a must be greater than -1, got %r' % a)
    return (0.5 * dims.total - 1.0 - a) / (a + 1.0)


def minimax_a_range(dims):
    dims = _as_dims(dims).require_shrinkage()
    low = (dims.p - 2) / (dims.n + 2)
    return low, 2 * low


def minimax_alpha_lower_bound(dims):
    dims = _as_dims(dims).require_shrinkage()
    p, n = dims
    return -1.0 / (5.0 + 2.0 / (p - 2) + 3.0 * p / (n + 2))


def parse_rule(spec, dims, density=None, cfg=None, threads=None, grid_size=CACHE_SIZE):
    """Build a rule from ``natural | js | psi-alpha:A | simple-bayes:A,B | bayes:PRIOR``.

    The Bayes form accepts ``bayes:power:0``, ``bayes:prior=strawderman:1,-5,0`` and an
    optional ``;nu=NU`` suffix; it integrates against ``density`` (Gaussian by default).
    """
    from equivshrink import densities
    from equivshrink import priors

    dims = _as_dims(dims)
    spec = (spec or '').strip()
    kind, _, args = spec.partition(':')
    if kind == 'natural' and not args:
        return ShrinkageRule.natural(dims)
    if kind == 'js' and not args:
        return ShrinkageRule.james_stein(dims)
    if kind == 'psi-alpha':
        values = helpers.parse_float_list(args, 'psi-alpha parameter')
        if len(values) != 1:
            raise ParseError('expected psi-alpha:ALPHA, got %r' % spec)
        return ShrinkageRule.psi_alpha(values[0], dims, cfg)
    if kind == 'simple-bayes':
        values = helpers.parse_float_list(args, 'simple-bayes parameters')
        if len(values) != 2:
            raise ParseError('expected simple-bayes:A,B, got %r' % spec)
        return ShrinkageRule.simple_bayes(values[0], values[1], dims)
    if kind == 'bayes':
        prior_spec, _, extra = args.partition(';')
        if prior_spec.startswith('prior='):
            prior_spec = prior_spec[len('prior='):]
        nu = -1.0
        if extra:
            key, _, value = extra.partition('=')
            if key.strip() != 'nu':
                raise ParseError('unknown bayes option %r' % extra)
            nu = helpers.parse_float_list(value, 'nu')[0]
        prior = priors.parse_prior(prior_spec, dims.p)
        density = density or densities.Gaussian(dims)
        return ShrinkageRule.numeric_bayes(
            prior, density, cfg, nu=nu, grid_size=grid_size, threads=threads)
    raise ParseError(
        'unknown rule %r (expected natural, js, psi-alpha:A, simple-bayes:A,B or '
        'bayes:PRIOR)' % spec)


def _finite_or_raise(values, what):
    if not np.all(np.isfinite(values)):
        raise ConvergenceError('%s produced non-finite values' % what)
    return values


def check_unit_interval(rule, w_grid):
    """Evaluate psi on a grid and report whether it stays in [0, 1]."""
    values = _finite_or_raise(rule.psi(np.asarray(w_grid, dtype=float)), rule.name)
    return {
        'w': list(map(float, w_grid)),
        'psi': values.tolist(),
        'in_unit_interval': bool(np.all((values >= 0) & (values <= 1))),
        'min': float(np.min(values)),
        'max': float(np.max(values)),
    }
