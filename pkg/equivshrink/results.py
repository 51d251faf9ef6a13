import math

from equivshrink import DomainError


class RiskPoint(object):

    __slots__ = ('__lam', '__risk', '__std_err', '__n_reps', '__estimator_id', '__rejected')

    def __init__(self, lam, risk, std_err, n_reps, estimator_id, rejected=0):
        if lam < 0:
            raise DomainError('lambda must be nonnegative, got %r' % lam)
        self.__lam = float(lam)
        self.__risk = float(risk)
        self.__std_err = float(std_err)
        self.__n_reps = int(n_reps)
        self.__estimator_id = estimator_id
        self.__rejected = int(rejected)

    @property
    def lam(self):
        return self.__lam

    @property
    def risk(self):
        return self.__risk

    @property
    def std_err(self):
        return self.__std_err

    @property
    def n_reps(self):
        return self.__n_reps

    @property
    def estimator_id(self):
        return self.__estimator_id

    @property
    def rejected(self):
        """Draws discarded because W was zero or undefined."""
        return self.__rejected

    def to_dict(self):
        return {
            'lambda': self.__lam,
            'risk': self.__risk,
            'std_err': self.__std_err,
            'n_reps': self.__n_reps,
            'estimator': self.__estimator_id,
        }

    def __repr__(self):
        return 'RiskPoint(lambda=%r, risk=%r, std_err=%r, n_reps=%d, estimator=%r)' % (
            self.__lam, self.__risk, self.__std_err, self.__n_reps, self.__estimator_id)


class RiskCurve(object):

    __slots__ = ('__points', '__density_id', '__seed')

    def __init__(self, points, density_id, seed):
        points = list(points)
        if not points:
            raise DomainError('a risk curve needs at least one point')
        lams = [point.lam for point in points]
        if any(b <= a for a, b in zip(lams, lams[1:])):
            raise DomainError('the lambda grid of a risk curve must be strictly increasing')
        self.__points = tuple(points)
        self.__density_id = density_id
        self.__seed = seed

    @property
    def points(self):
        return self.__points

    @property
    def density_id(self):
        return self.__density_id

    @property
    def seed(self):
        return self.__seed

    @property
    def estimator_id(self):
        return self.__points[0].estimator_id

    @property
    def lambdas(self):
        return [point.lam for point in self.__points]

    @property
    def risks(self):
        return [point.risk for point in self.__points]

    @property
    def std_errs(self):
        return [point.std_err for point in self.__points]

    def rows(self):
        return [point.to_dict() for point in self.__points]

    def __len__(self):
        return len(self.__points)

    def __iter__(self):
        return iter(self.__points)


class PairedDifference(object):
    """Risk difference of two rules at one lambda, estimated on common draws."""

    __slots__ = ('__lam', '__difference', '__std_err', '__unpaired_std_err')

    def __init__(self, lam, difference, std_err, unpaired_std_err):
        self.__lam = float(lam)
        self.__difference = float(difference)
        self.__std_err = float(std_err)
        self.__unpaired_std_err = float(unpaired_std_err)

    @property
    def lam(self):
        return self.__lam

    @property
    def difference(self):
        return self.__difference

    @property
    def std_err(self):
        return self.__std_err

    @property
    def unpaired_std_err(self):
        """What the standard error would be with independent draws for the two rules."""
        return self.__unpaired_std_err

    def verdict(self, threshold=3.0):
        if self.__difference < -threshold * self.__std_err:
            return 'a_dominates'
        if self.__difference > threshold * self.__std_err:
            return 'b_dominates'
        return 'indistinguishable'


class DominanceReport(object):

    __slots__ = ('__curve_a', '__curve_b', '__differences', '__threshold')

    def __init__(self, curve_a, curve_b, differences, threshold=3.0):
        self.__curve_a = curve_a
        self.__curve_b = curve_b
        self.__differences = tuple(differences)
        self.__threshold = threshold

    @property
    def curve_a(self):
        return self.__curve_a

    @property
    def curve_b(self):
        return self.__curve_b

    @property
    def differences(self):
        return self.__differences

    @property
    def verdicts(self):
        return [diff.verdict(self.__threshold) for diff in self.__differences]

    def a_never_worse(self):
        """True when rule a is within the threshold of rule b or better at every lambda."""
        return all(verdict != 'b_dominates' for verdict in self.verdicts)

    def rows(self):
        return [
            {
                'lambda': diff.lam,
                'risk_a': a.risk,
                'std_err_a': a.std_err,
                'risk_b': b.risk,
                'std_err_b': b.std_err,
                'difference': diff.difference,
                'pooled_std_err': diff.std_err,
                'verdict': diff.verdict(self.__threshold),
            }
            for a, b, diff in zip(self.__curve_a, self.__curve_b, self.__differences)
        ]


class MinimaxReport(object):

    __slots__ = ('__curve', '__bound', '__threshold')

    def __init__(self, curve, bound, threshold=3.0):
        self.__curve = curve
        self.__bound = float(bound)
        self.__threshold = threshold

    @property
    def curve(self):
        return self.__curve

    @property
    def bound(self):
        return self.__bound

    @property
    def violations(self):
        return [
            point.lam for point in self.__curve
            if not point.risk <= self.__bound + self.__threshold * _finite(point.std_err)]

    @property
    def passes(self):
        return not self.violations

    def to_dict(self):
        return {
            'estimator': self.__curve.estimator_id,
            'bound': self.__bound,
            'passes': self.passes,
            'violations': self.violations,
            'points': self.__curve.rows(),
        }


def _finite(value):
    return 0.0 if math.isnan(value) else value
