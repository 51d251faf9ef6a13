"""Independent oracles and switches shared by the test modules."""

import math
import os

import numpy as np
from scipy import integrate
from scipy import stats


# The acceptance simulations take minutes; they only run when this is set.
SLOW_TESTS = bool(os.getenv('EQUIVSHRINK_SLOW_TESTS'))

try:
    import hypothesis  # noqa
    _HAVE_HYPOTHESIS = True
except ImportError:
    _HAVE_HYPOTHESIS = False


def relative_error(value, expected):
    return abs(value - expected) / max(abs(expected), 1e-300)


def gt_mixture_density(t, a, b, total):
    """The generalized t generator as the inverse-gamma scale mixture of Gaussians."""
    peak = (t + b) / (total + a + 2.0)

    def _integrand(g):
        if g <= 0:
            return 0.0
        gaussian = math.exp(-0.5 * total * math.log(2 * math.pi * g) - t / (2 * g))
        return gaussian * stats.invgamma.pdf(g, 0.5 * a, scale=0.5 * b)

    lower, _ = integrate.quad(_integrand, 0.0, peak, epsabs=0.0, epsrel=1e-12, limit=200)
    upper, _ = integrate.quad(_integrand, peak, np.inf, epsabs=0.0, epsrel=1e-12, limit=200)
    return lower + upper


def half_tail_integral(fn, t):
    """F(t) = 1/2 int_t^inf f by plain adaptive quadrature."""
    value, _ = integrate.quad(fn, t, np.inf, epsabs=0.0, epsrel=1e-12, limit=200)
    return 0.5 * value


def psi_alpha_oracle(w, alpha, p, n):
    """psi_alpha(w) from its defining integrals over [0, 1]."""
    exponent = -0.5 * (p + n) - 1.0

    def _moment(power):
        value, _ = integrate.quad(
            lambda t: t ** power * (1.0 - t) ** alpha * (1.0 + w * t) ** exponent, 0.0, 1.0,
            epsabs=0.0, epsrel=1e-12, limit=200)
        return value

    return _moment(0.5 * p - alpha - 1.0) / _moment(0.5 * p - alpha - 2.0)


def simple_bayes_psi(w, a, b):
    return a / (w + (a + 1.0) * (b + 1.0))


def james_stein_risk_at_zero(p, n):
    """Exact Gaussian risk of James-Stein at theta = 0: p - n (p - 2) / (n + 2)."""
    return p - n * (p - 2.0) / (n + 2.0)


def random_observation(rng, p, n):
    x = rng.standard_normal(p) * rng.uniform(0.1, 10.0)
    u = rng.standard_normal(n) * rng.uniform(0.1, 10.0)
    return x, u
