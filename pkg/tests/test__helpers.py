import math
from unittest import TestCase

import numpy as np

import equivshrink
from equivshrink import DomainError
from equivshrink import ParseError
from equivshrink import helpers


class SurfaceConstantTest(TestCase):

    def test__small_dimensions(self):
        self.assertAlmostEqual(1.0, helpers.c_m(1), places=14)
        self.assertAlmostEqual(math.pi, helpers.c_m(2), places=14)
        self.assertAlmostEqual(2 * math.pi, helpers.c_m(3), places=13)

    def test__log_matches_value(self):
        for m in (1, 4, 15, 40):
            self.assertAlmostEqual(math.log(helpers.c_m(m)), helpers.log_c_m(m), places=12)

    def test__rejects_nonpositive(self):
        with self.assertRaises(DomainError):
            helpers.log_c_m(0)


class AsVectorTest(TestCase):

    def test__accepts_sequences(self):
        vector = helpers.as_vector([1, 2, 3], 'x', length=3)
        self.assertEqual((3,), vector.shape)
        self.assertEqual(vector.dtype, np.float64)

    def test__wrong_length(self):
        with self.assertRaises(DomainError) as context:
            helpers.as_vector([1, 2], 'x', length=3)
        self.assertEqual({'expected': 3, 'got': 2}, context.exception.details)

    def test__not_finite(self):
        with self.assertRaises(DomainError):
            helpers.as_vector([1, float('nan')])
        with self.assertRaises(DomainError):
            helpers.as_vector([[1, 2]])
        with self.assertRaises(DomainError):
            helpers.as_vector(['a'])


class OrthogonalTest(TestCase):

    def test__random_orthogonal_is_orthogonal(self):
        rng = np.random.default_rng(3)
        for dim in (1, 2, 5):
            helpers.check_orthogonal(helpers.random_orthogonal(dim, rng))

    def test__rejects_non_orthogonal(self):
        with self.assertRaises(DomainError) as context:
            helpers.check_orthogonal(np.array([[1.0, 0.1], [0.0, 1.0]]))
        self.assertGreater(context.exception.details['defect'], 1e-10)
        with self.assertRaises(DomainError):
            helpers.check_orthogonal(np.eye(3)[:2])


class CombineMomentsTest(TestCase):

    def test__matches_numpy(self):
        rng = np.random.default_rng(0)
        values = rng.standard_normal(1000)
        blocks = [
            (float(chunk.sum()), float(np.dot(chunk, chunk)), chunk.shape[0])
            for chunk in np.array_split(values, 7)]
        mean, std_err, count = helpers.combine_moments(blocks)
        self.assertEqual(1000, count)
        self.assertAlmostEqual(values.mean(), mean, places=12)
        self.assertAlmostEqual(values.std(ddof=1) / math.sqrt(1000), std_err, places=10)

    def test__order_does_not_matter(self):
        blocks = [(1.5, 3.0, 2), (10.25, 60.0, 3), (-4.0, 9.0, 4)]
        self.assertEqual(
            helpers.combine_moments(blocks), helpers.combine_moments(blocks[::-1]))

    def test__empty(self):
        with self.assertRaises(DomainError):
            helpers.combine_moments([(0.0, 0.0, 0)])

    def test__single_replication(self):
        mean, std_err, count = helpers.combine_moments([(2.0, 4.0, 1)])
        self.assertEqual((2.0, 1), (mean, count))
        self.assertTrue(math.isnan(std_err))


class ParseFloatListTest(TestCase):

    def test__parse(self):
        self.assertEqual([0.0, 1.0, 2.5], helpers.parse_float_list('0, 1,2.5'))

    def test__errors_are_parse_errors(self):
        for text in ('', '1,,2', 'a', None):
            with self.assertRaises(ParseError):
                helpers.parse_float_list(text)


class ResolveThreadsTest(TestCase):

    def test__explicit(self):
        self.assertEqual(3, helpers.resolve_threads(3))

    def test__zero_means_all_cpus(self):
        self.assertGreaterEqual(helpers.resolve_threads(0), 1)

    def test__default(self):
        self.assertGreaterEqual(helpers.resolve_threads(), 1)
        if equivshrink.DEFAULT_THREADS:
            self.assertEqual(equivshrink.DEFAULT_THREADS, helpers.resolve_threads())

    def test__negative(self):
        with self.assertRaises(DomainError):
            helpers.resolve_threads(-1)


class TrapezoidTest(TestCase):

    def test__version_gated_name(self):
        grid = np.linspace(0.0, 1.0, 101)
        self.assertAlmostEqual(0.5, helpers.trapezoid(grid, grid), places=12)

    def test__format_float_round_trips(self):
        for value in (0.1, 1 / 3.0, 2.5e-300, -1e22):
            self.assertEqual(value, float(helpers.format_float(value)))

    def test__format_float_is_short(self):
        self.assertEqual('-0.2', helpers.format_float(-0.2))
        self.assertEqual('0', helpers.format_float(0.0))
        self.assertEqual('1000000', helpers.format_float(1e6))
        self.assertEqual('1e-05', helpers.format_float(1e-5))
