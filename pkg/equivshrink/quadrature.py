"""Numerical integration: adaptive 1-D rules, Jacobi-weighted rules and the posterior integrals.

The posterior integrals M1(z, pi) and z^T M2(z, pi)/||z|| are reduced to three axes. With
z = (sqrt(w), 0, ..., 0) and theta = rho * omega, the angular part collapses onto the cosine c
between theta and z, and the precision eta is traded for t = eta * Q with
Q = 1 + w + rho^2 - 2 sqrt(w) rho c. The t axis then only sees r = rho^2 / Q:

    M1 = 2 c_{p-1} int rho^(p-1) int (1 - c^2)^((p-3)/2) Q^(-E-1) G(rho^2 / Q) dc drho,
    G(r) = int t^E f(t) pibar(t r) dt,        E = (2p + n)/2 + nu + 1.

G is tabulated once per (density, prior) as a spline in log r. The angular axis is integrated
with Gauss-Jacobi rules after the substitution u = 1 - c = kappa * expm1(x), which turns
Q into a0 * exp(x) and keeps the peak at theta = z resolvable for large w. The radial axis
is adaptive (``scipy.integrate.quad_vec``) on finite panels around rho = sqrt(w) plus the tail.
"""

import collections
import functools
import logging
import math

import numpy as np
from scipy import integrate
from scipy import interpolate
from scipy import special

from equivshrink import AssumptionError
from equivshrink import ConvergenceError
from equivshrink import DomainError
from equivshrink import helpers


logger = logging.getLogger(__name__)

_FIELDS = (
    'abs_tol', 'rel_tol', 'max_depth', 'eta_truncation', 'nodes_angular', 'nodes_radial',
)

# Step of the trapezoid rules in log t and log r.
_LOG_STEP = 1.0 / 16

# Range of log r covered by the G table; outside it log G is extrapolated linearly.
_LOG_R_RANGE = (-70.0, 40.0)

# The angular substitution is cut where the integrand has decayed by exp(-45).
_ANGULAR_DECAY = 45.0

# Distances from the radial peak at which the rho axis is split. Q = 1 + ||z - theta||^2
# gives the posterior a width of order one; beyond the last one the tail is integrated alone.
_RADIAL_BREAKS = (0.125, 0.5, 2.0, 8.0, 32.0)


class QuadConfig(collections.namedtuple('QuadConfig', _FIELDS)):
    """Tolerances and node counts of the integration engine.

    ``max_depth`` bounds the number of subintervals of the adaptive rules and
    ``eta_truncation`` is the half width, in log units, of the window on which the
    precision integral is evaluated.
    """

    def __new__(cls, abs_tol=1e-10, rel_tol=1e-8, max_depth=2000, eta_truncation=60.0,
                nodes_angular=64, nodes_radial=128):
        if not abs_tol > 0:
            raise DomainError('abs_tol must be positive, got %r' % (abs_tol,))
        if not rel_tol > 0:
            raise DomainError('rel_tol must be positive, got %r' % (rel_tol,))
        if int(max_depth) < 1:
            raise DomainError('max_depth must be at least 1, got %r' % (max_depth,))
        if not eta_truncation > 0:
            raise DomainError('eta_truncation must be positive, got %r' % (eta_truncation,))
        for name, value in (('nodes_angular', nodes_angular), ('nodes_radial', nodes_radial)):
            if int(value) < 2:
                raise DomainError('%s must be at least 2, got %r' % (name, value))
        return tuple.__new__(cls, (
            float(abs_tol), float(rel_tol), int(max_depth), float(eta_truncation),
            int(nodes_angular), int(nodes_radial)))

    def with_options(self, **kwargs):
        opts = self._asdict()
        opts.update(kwargs)
        return QuadConfig(**opts)


DEFAULT_QUAD_CONFIG = QuadConfig()


class PosteriorIntegrals(collections.namedtuple(
        'PosteriorIntegrals',
        ('w', 'm1', 'log_m1', 'm2_dot_z_over_norm', 'psi', 'achieved_error'))):
    """M1, z^T M2/||z|| and the Bayes shrinkage factor psi_pi at one value of w.

    ``achieved_error`` is relative to the larger of M1 and max(1, sqrt(w)) times the offset
    integral; ``psi`` is computed from the offset integral, not by subtracting ratios.
    """


def integrate_1d(fn, a, b, cfg=None, points=None):
    """Helper to run adaptive Gauss-Kronrod quadrature and fail loudly.

    Returns ``(value, error)``; raises ConvergenceError with the best estimate when the
    requested tolerance could not be reached.
    """
    cfg = cfg or DEFAULT_QUAD_CONFIG
    kwargs = {}
    if points is not None and np.isfinite(a) and np.isfinite(b):
        kwargs['points'] = points
    out = integrate.quad(
        fn, a, b, epsabs=cfg.abs_tol, epsrel=cfg.rel_tol, limit=cfg.max_depth,
        full_output=1, **kwargs)
    value, error = out[0], out[1]
    if len(out) > 3 or not np.isfinite(value):
        raise ConvergenceError(
            'adaptive quadrature on [%g, %g] did not converge: %s' % (
                a, b, out[3] if len(out) > 3 else 'non-finite value'),
            estimate=value, error=error)
    return value, error


@functools.lru_cache(maxsize=64)
def jacobi_rule(nodes, alpha, beta):
    """Gauss-Jacobi nodes and weights on [-1, 1] for the weight (1 - x)^alpha (1 + x)^beta."""
    x, weights = special.roots_jacobi(nodes, alpha, beta)
    x.setflags(write=False)
    weights.setflags(write=False)
    return x, weights


def integrate_beta_weighted(g, alpha, cfg=None, beta=0.0, method='jacobi', nodes=None):
    """Integral of g(t) t^beta (1 - t)^alpha over [0, 1].

    ``method='jacobi'`` applies a Gauss-Jacobi rule; g is then called once with the array of
    nodes and may return an array of shape (nodes,) or (nodes, m) for m integrals at once.
    ``method='adaptive'`` hands the algebraic weight to QUADPACK (QAWS) and calls g on scalars.
    """
    cfg = cfg or DEFAULT_QUAD_CONFIG
    alpha = float(alpha)
    beta = float(beta)
    if alpha <= -1 or beta <= -1:
        raise DomainError(
            'the weight t^beta (1-t)^alpha is integrable only for alpha, beta > -1, '
            'got alpha=%r, beta=%r' % (alpha, beta))
    if method == 'adaptive':
        out = integrate.quad(
            g, 0.0, 1.0, weight='alg', wvar=(beta, alpha), epsabs=cfg.abs_tol,
            epsrel=cfg.rel_tol, limit=cfg.max_depth, full_output=1)
        if len(out) > 3:
            raise ConvergenceError(
                'weighted quadrature did not converge: %s' % out[3],
                estimate=out[0], error=out[1])
        return out[0]
    if method != 'jacobi':
        raise DomainError('unknown integration method %r' % (method,))
    x, weights = jacobi_rule(nodes or cfg.nodes_radial, alpha, beta)
    t = 0.5 * (x + 1.0)
    values = np.asarray(g(t), dtype=float)
    return 2.0 ** (-alpha - beta - 1.0) * np.tensordot(weights, values, axes=(0, 0))


def _log_trapezoid(log_values, step, axis=-1):
    return special.logsumexp(log_values, axis=axis) + math.log(step)


class PosteriorKernel(object):
    """Precomputed pieces of the posterior integrals for one (density, prior, nu)."""

    def __init__(self, density, prior, cfg=None, nu=-1.0):
        cfg = cfg or DEFAULT_QUAD_CONFIG
        p, n = density.dims
        if prior.p != p:
            raise DomainError(
                'prior is defined for p=%d but the density for p=%d' % (prior.p, p))
        if p < 3:
            raise DomainError('posterior integrals need p >= 3, got p=%d' % p)
        local_alpha = prior.origin_exponent() + 0.5 * p - 1.0
        if local_alpha <= -0.5:
            raise AssumptionError(
                'prior behaves like lambda^%.4g at the origin; at most lambda^(-1/2) '
                'is allowed' % local_alpha, details={'alpha': local_alpha})
        self._density = density
        self._prior = prior
        self._cfg = cfg
        self._nu = float(nu)
        self._p = p
        self._k = 0.5 * (p - 3)
        self._exponent = 0.5 * (2 * p + n) + self._nu + 1.0
        origin = prior.origin_exponent()
        if self._exponent + 1.0 + origin <= 0:
            raise AssumptionError(
                'the precision integral diverges at zero for nu=%g' % self._nu,
                details={'nu': self._nu})
        self._log_surface = math.log(2.0) + helpers.log_c_m(p - 1)
        self._log_sphere_beta = special.betaln(0.5, self._k + 1.0)
        self._log_t = np.arange(
            -cfg.eta_truncation, cfg.eta_truncation + 0.5 * _LOG_STEP, _LOG_STEP)
        self._log_f_weight = (
            (self._exponent + 1.0) * self._log_t
            + np.asarray(density.log_value(np.exp(self._log_t)), dtype=float))
        self._build_log_g()
        # G(r e^-x) contributes e^(-slope x) along the angular axis, so the steepest slope of
        # log G on the whole table bounds the decay. Without decay the full range is used.
        decay = self._exponent - self._k + min(self._min_slope, 0.0)
        self._x_cut = _ANGULAR_DECAY / decay if decay > 0 else math.inf

    @property
    def exponent(self):
        return self._exponent

    nu = property(lambda self: self._nu)
    cfg = property(lambda self: self._cfg)

    def _check_window(self, rows):
        edges = np.maximum(rows[..., 0], rows[..., -1]) - special.logsumexp(rows, axis=-1)
        worst = float(np.max(edges))
        if worst > math.log(self._cfg.rel_tol) - math.log(1e3):
            raise ConvergenceError(
                'the precision integral has not decayed at the edges of the log window '
                '[-%g, %g]; increase eta_truncation or check the tail of f and pi' % (
                    self._cfg.eta_truncation, self._cfg.eta_truncation),
                estimate=None, error=math.exp(worst))

    def _build_log_g(self):
        power = self._prior.power_form()
        if power is not None:
            log_const, gamma = power
            rows = self._log_f_weight + gamma * self._log_t
            self._check_window(rows)
            self._power = (log_const + _log_trapezoid(rows, _LOG_STEP), gamma)
            self._spline = None
            self._min_slope = gamma
            return
        self._power = None
        log_r = np.arange(_LOG_R_RANGE[0], _LOG_R_RANGE[1] + 0.5 * _LOG_STEP, _LOG_STEP)
        log_g = np.empty_like(log_r)
        chunk = 128
        for start in range(0, log_r.shape[0], chunk):
            block = log_r[start:start + chunk, np.newaxis]
            rows = self._log_f_weight + self._prior.log_pi_bar_at_log(block + self._log_t)
            self._check_window(rows)
            log_g[start:start + chunk] = _log_trapezoid(rows, _LOG_STEP)
        self._spline = interpolate.CubicSpline(log_r, log_g)
        self._spline_slope = self._spline.derivative()
        self._ends = (
            (log_r[0], log_g[0], float(self._spline_slope(log_r[0]))),
            (log_r[-1], log_g[-1], float(self._spline_slope(log_r[-1]))))
        self._min_slope = float(np.min(self._spline_slope(log_r)))
        logger.debug(
            'tabulated log G for %r on %d points in log r', self._prior, log_r.shape[0])

    def log_g(self, log_r):
        """log G(r) as a function of log r."""
        log_r = np.asarray(log_r, dtype=float)
        if self._power is not None:
            return self._power[0] + self._power[1] * log_r
        (low, low_value, low_slope), (high, high_value, high_slope) = self._ends
        inside = np.clip(log_r, low, high)
        return np.where(
            log_r < low, low_value + low_slope * (log_r - low),
            np.where(
                log_r > high, high_value + high_slope * (log_r - high),
                self._spline(inside)))

    def kappa_g(self, log_r):
        """r G'(r) / G(r)."""
        log_r = np.asarray(log_r, dtype=float)
        if self._power is not None:
            return np.full_like(log_r, self._power[1])
        (low, _, low_slope), (high, _, high_slope) = self._ends
        return np.where(
            log_r < low, low_slope,
            np.where(log_r > high, high_slope, self._spline_slope(np.clip(log_r, low, high))))

    def _angular_terms(self, rho, sqrt_w):
        """Log integrand contributions of the angular rule and the offsets rho c - sqrt(w)."""
        k = self._k
        e1 = self._exponent + 1.0
        log_rho_sq = 2.0 * math.log(rho)
        a0 = 1.0 + (rho - sqrt_w) ** 2
        log_a0 = math.log(a0)
        spread = 2.0 * sqrt_w * rho
        if spread == 0.0 or a0 / spread > 1e300:
            log_terms = np.array([
                -e1 * log_a0 + float(self.log_g(log_rho_sq - log_a0)) + self._log_sphere_beta])
            return log_terms, np.array([-sqrt_w])
        log_kappa = log_a0 - math.log(spread)
        kappa = math.exp(log_kappa)
        span_max = math.log1p(2.0 / kappa)
        if span_max > self._x_cut:
            span = self._x_cut
            nodes, weights = jacobi_rule(self._cfg.nodes_angular, 0.0, k)
            x = 0.5 * span * (nodes + 1.0)
            log_rule = np.log(weights) + (k + 1.0) * math.log(0.5 * span)
            log_weight_fn = k * np.log(x)
        else:
            span = span_max
            nodes, weights = jacobi_rule(self._cfg.nodes_angular, k, k)
            x = 0.5 * span * (nodes + 1.0)
            log_rule = np.log(weights) + (2.0 * k + 1.0) * math.log(0.5 * span)
            log_weight_fn = k * (np.log(x) + np.log(span_max - x))
        log_expm1_x = np.log(np.expm1(x))
        log_two_minus_u = log_kappa + x + np.log(np.expm1(span_max - x))
        log_integrand = (
            k * (log_kappa + log_expm1_x + log_two_minus_u)
            - e1 * (log_a0 + x)
            + self.log_g(log_rho_sq - log_a0 - x)
            + log_kappa + x)
        u = kappa * np.expm1(x)
        return log_rule + log_integrand - log_weight_fn, rho * (1.0 - u) - sqrt_w

    def _log_reference(self, rho, sqrt_w):
        log_terms, _ = self._angular_terms(rho, sqrt_w)
        return special.logsumexp(log_terms) + (self._p - 1) * math.log(rho)

    def integrals(self, w):
        w = float(w)
        if not np.isfinite(w) or w < 0:
            raise DomainError('w must be a finite nonnegative number, got %r' % w)
        if w == 0:
            return self._integrals_at_origin()
        sqrt_w = math.sqrt(w)
        log_ref = self._log_reference(sqrt_w, sqrt_w)
        offset_scale = max(1.0, sqrt_w)
        p = self._p

        def _integrand(rho):
            if not 0.0 < rho < 1e100:
                return np.zeros(2)
            log_terms, offsets = self._angular_terms(rho, sqrt_w)
            terms = np.exp(log_terms + (p - 1) * math.log(rho) - log_ref)
            return np.array([terms.sum(), offset_scale * np.dot(terms, offsets)])

        values, error = self._radial_integral(_integrand, sqrt_w, 'at w=%g' % w)
        mass, offset = values
        psi = -offset / (offset_scale * sqrt_w * mass)
        log_m1 = self._log_surface + log_ref + math.log(mass)
        m1 = math.exp(log_m1)
        logger.debug('posterior integrals at w=%g: psi=%.12g', w, psi)
        return PosteriorIntegrals(
            w, m1, log_m1, m1 * (offset / (offset_scale * mass) + sqrt_w), psi, error)

    def _integrals_at_origin(self):
        """w = 0: psi from the first order expansion of the offset integral in sqrt(w)."""
        p = self._p
        e1 = self._exponent + 1.0

        def _log_radial(rho):
            log_q = math.log1p(rho * rho)
            log_r = 2.0 * math.log(rho) - log_q
            return (p - 1) * math.log(rho) - e1 * log_q + float(self.log_g(log_r)), log_r

        log_ref, _ = _log_radial(1.0)

        def _integrand(rho):
            if not 0.0 < rho < 1e100:
                return np.zeros(2)
            log_value, log_r = _log_radial(rho)
            value = math.exp(log_value - log_ref)
            slope = e1 + float(self.kappa_g(log_r))
            return np.array([value, value * rho * rho * slope / (1.0 + rho * rho)])

        values, error = self._radial_integral(_integrand, 0.0, 'at w=0')
        mass, first_order = values
        psi = 1.0 - 2.0 * first_order / (p * mass)
        log_m1 = self._log_surface + self._log_sphere_beta + log_ref + math.log(mass)
        return PosteriorIntegrals(0.0, math.exp(log_m1), log_m1, 0.0, psi, error)

    def _radial_integral(self, integrand, center, what):
        """Integrate over rho in [0, inf) around the posterior peak at rho = center.

        The peak has width of order one whatever w is, so the range is split into finite
        panels at fixed distances from it and only the far tail is mapped onto [0, 1].
        Returns the values and the error relative to their largest component.
        """
        cfg = self._cfg
        upper = center + _RADIAL_BREAKS[-1]
        candidates = {center} | {center + sign * step
                                 for step in _RADIAL_BREAKS for sign in (-1.0, 1.0)}
        points = sorted(point for point in candidates if 0.0 < point < upper)
        kwargs = {'epsabs': cfg.abs_tol, 'epsrel': cfg.rel_tol, 'norm': 'max',
                  'limit': cfg.max_depth, 'full_output': True}
        head, head_error, head_info = integrate.quad_vec(
            integrand, 0.0, upper, points=points, **kwargs)
        tail, tail_error, tail_info = integrate.quad_vec(integrand, upper, np.inf, **kwargs)
        values = head + tail
        error = float(head_error) + float(tail_error)
        scale = max(float(np.max(np.abs(values))), np.finfo(float).tiny)
        if not (head_info.success and tail_info.success) or not np.all(np.isfinite(values)):
            raise ConvergenceError(
                'radial integral %s did not converge: %s' % (
                    what, head_info.message if not head_info.success else tail_info.message),
                estimate=values.tolist(), error=error / scale)
        # Each panel set meets its own tolerance; the sum may at most double it.
        if error > 2.0 * max(cfg.abs_tol, cfg.rel_tol * scale):
            raise ConvergenceError(
                'radial integral %s reached a relative error of %.3g only' % (what, error / scale),
                estimate=values.tolist(), error=error / scale)
        logger.debug('radial integral %s: %d evaluations', what,
                     head_info.neval + tail_info.neval)
        return values, error / scale


@functools.lru_cache(maxsize=32)
def posterior_kernel(density, prior, cfg=None, nu=-1.0):
    return PosteriorKernel(density, prior, cfg or DEFAULT_QUAD_CONFIG, nu)


def posterior_integrals(w, density, prior, cfg=None, nu=-1.0):
    return posterior_kernel(density, prior, cfg or DEFAULT_QUAD_CONFIG, float(nu)).integrals(w)
