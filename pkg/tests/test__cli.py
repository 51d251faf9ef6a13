import csv
import io
import json
import os
import tempfile
from unittest import TestCase
from unittest import mock

import numpy as np

import equivshrink
from equivshrink import ParseError
from equivshrink import ShrinkageRule
from equivshrink import cli
from equivshrink import regression


FIXTURE = os.path.join(os.path.dirname(__file__), 'fixtures', 'small_regression.csv')


class _CliTestCase(TestCase):

    def run_cli(self, *argv):
        """Run main() and return (exit code, stdout, stderr)."""
        stdout, stderr = io.StringIO(), io.StringIO()
        with mock.patch('sys.stdout', stdout), mock.patch('sys.stderr', stderr):
            code = cli.main(list(argv))
        return code, stdout.getvalue(), stderr.getvalue()

    def run_json(self, *argv):
        code, out, err = self.run_cli(*(argv + ('--format', 'json')))
        self.assertTrue(out, err)
        return code, json.loads(out)


class SplitRuleListTest(TestCase):

    def test__commas_inside_parameters(self):
        self.assertEqual(
            ['js', 'psi-alpha:0', 'simple-bayes:0.25,0', 'natural'],
            cli.split_rule_list('js, psi-alpha:0,simple-bayes:0.25,0,natural'))
        self.assertEqual(['bayes:strawderman:1,-5,0'],
                         cli.split_rule_list('bayes:strawderman:1,-5,0'))

    def test__errors(self):
        for text in ('', ',js', 'js,,natural', 'js, ,natural', 'js,', 'simple-bayes:0.25,,0'):
            with self.assertRaises(ParseError, msg=text):
                cli.split_rule_list(text)


class EstimateTest(_CliTestCase):

    def test__simple_bayes(self):
        code, out, _ = self.run_cli(
            'estimate', '--rule', 'simple-bayes:0.25,0', '--x', '1,2,0,0,0', '--s', '5',
            '--n', '10')
        self.assertEqual(0, code)
        rows = list(csv.DictReader(io.StringIO(out)))
        self.assertEqual(5, len(rows))
        self.assertEqual(['index', 'x', 'estimate', 'w', 'psi', 'factor'], list(rows[0]))
        self.assertAlmostEqual(8.0 / 9.0, float(rows[0]['estimate']), places=14)
        self.assertAlmostEqual(16.0 / 9.0, float(rows[1]['estimate']), places=14)
        self.assertEqual(0.0, float(rows[4]['estimate']))
        self.assertEqual(1.0, float(rows[0]['w']))
        self.assertAlmostEqual(1.0 / 9.0, float(rows[0]['psi']), places=15)

    def test__residual_vector(self):
        code, document = self.run_json(
            'estimate', '--rule', 'js', '--x', '1,2,0,0,0', '--u', '1,2,0,0,0,0,0,0,0,0')
        self.assertEqual(0, code)
        self.assertEqual({'rule': 'js', 'p': 5, 'n': 10, 's': 5.0}, document['meta']['params'])
        self.assertEqual(0.75, document['data'][0]['estimate'])

    def test__x_file(self):
        with tempfile.TemporaryDirectory() as directory:
            path = os.path.join(directory, 'x.txt')
            with open(path, 'w', encoding='utf-8') as handle:
                handle.write('1\n2\n0\n0\n0\n')
            code, document = self.run_json(
                'estimate', '--rule', 'natural', '--x-file', path, '--s', '5', '--n', '10')
        self.assertEqual(0, code)
        self.assertEqual([1.0, 2.0, 0.0, 0.0, 0.0],
                         [row['estimate'] for row in document['data']])

    def test__usage_errors(self):
        for argv in (('--rule', 'js', '--x', '1,2,3'),
                     ('--rule', 'js', '--x', '1,2,3', '--s', '1'),
                     ('--rule', 'js', '--s', '1', '--n', '4'),
                     ('--rule', 'stein', '--x', '1,2,3', '--s', '1', '--n', '4'),
                     ('--rule', 'js', '--x', '1,a,3', '--s', '1', '--n', '4'),
                     ('--x', '1,2,3', '--s', '1', '--n', '4')):
            code, _, err = self.run_cli('estimate', *argv)
            self.assertEqual(2, code, argv)
            self.assertTrue(err)

    def test__domain_errors(self):
        for argv in (('--rule', 'js', '--x', '0,0,0', '--s', '1', '--n', '4'),
                     ('--rule', 'js', '--x', '1,2', '--s', '1', '--n', '4'),
                     ('--rule', 'js', '--x', '1,2,3', '--s', '1', '--n', '4', '--p', '4'),
                     ('--rule', 'psi-alpha:-0.7', '--x', '1,2,3', '--s', '1', '--n', '4')):
            code, _, err = self.run_cli('estimate', *argv)
            self.assertEqual(3, code, argv)
            self.assertIn('equivshrink estimate: ', err)

    def test__output_file(self):
        with tempfile.TemporaryDirectory() as directory:
            path = os.path.join(directory, 'estimate.csv')
            code, out, _ = self.run_cli(
                'estimate', '--rule', 'natural', '--x', '1,2,3', '--s', '1', '--n', '4',
                '--out', path)
            self.assertEqual(0, code)
            self.assertEqual('', out)
            with open(path, encoding='utf-8') as handle:
                self.assertTrue(handle.read().startswith('index,x,estimate,w,psi,factor\n'))

    def test__unreadable_files(self):
        with tempfile.TemporaryDirectory() as directory:
            missing = os.path.join(directory, 'missing.txt')
            code, out, err = self.run_cli(
                'estimate', '--rule', 'natural', '--x-file', missing, '--s', '5', '--n', '10')
            self.assertEqual(3, code)
            self.assertEqual('', out)
            self.assertIn(missing, err)
            unwritable = os.path.join(directory, 'no-such-directory', 'estimate.csv')
            code, _, err = self.run_cli(
                'estimate', '--rule', 'natural', '--x', '1,2,3', '--s', '1', '--n', '4',
                '--out', unwritable)
            self.assertEqual(3, code)
            self.assertIn(unwritable, err)

    def test__csv_meta(self):
        code, out, _ = self.run_cli(
            'estimate', '--rule', 'js', '--x', '1,2,0,0,0', '--s', '5', '--n', '10',
            '--csv-meta')
        self.assertEqual(0, code)
        first, header = out.splitlines()[:2]
        self.assertTrue(first.startswith('# {'))
        meta = json.loads(first[2:])
        self.assertEqual('estimate', meta['command'])
        self.assertEqual({'rule': 'js', 'p': 5, 'n': 10, 's': 5.0}, meta['params'])
        self.assertEqual(equivshrink.__version__, meta['version'])
        self.assertEqual('index,x,estimate,w,psi,factor', header)
        plain = self.run_cli('estimate', '--rule', 'js', '--x', '1,2,0,0,0', '--s', '5',
                             '--n', '10')[1]
        self.assertEqual(out.splitlines()[1:], plain.splitlines())


class RiskCurveTest(_CliTestCase):

    base = ('risk-curve', '--p', '5', '--n', '10', '--lambdas', '0,1', '--n-reps', '200',
            '--seed', '7')

    def test__compare_on_common_draws(self):
        code, document = self.run_json(*(self.base + ('--rule', 'natural', '--compare', 'js')))
        self.assertEqual(0, code)
        rows = document['data']
        self.assertEqual(4, len(rows))
        self.assertEqual(['natural', 'natural', 'js', 'js'], [row['estimator'] for row in rows])
        self.assertNotIn('verdict', rows[0])
        for natural, stein in zip(rows[:2], rows[2:]):
            self.assertAlmostEqual(
                stein['risk'] - natural['risk'], stein['difference'], places=10)
            self.assertIn(stein['verdict'], ('a_dominates', 'b_dominates', 'indistinguishable'))
        meta = document['meta']
        self.assertEqual(7, meta['seed'])
        self.assertEqual(['natural', 'js'], meta['params']['rules'])
        self.assertEqual(equivshrink.MC_BLOCK_SIZE, meta['params']['block_size'])

    def test__reproducible(self):
        argv = self.base + ('--compare', 'js,simple-bayes:0.25,0')
        _, first = self.run_json(*argv)
        _, second = self.run_json(*(argv + ('--threads', '3')))
        self.assertEqual(first['data'], second['data'])
        self.assertEqual(['js', 'simple-bayes:0.25,0'], first['meta']['params']['rules'])

    def test__csv_columns(self):
        code, out, _ = self.run_cli(*(self.base + ('--rule', 'js', '--check', 'minimax')))
        self.assertIn(code, (0, 1))
        header = out.splitlines()[0]
        self.assertEqual('lambda,risk,std_err,n_reps,estimator,within_bound', header)

    def test__minimax_check(self):
        code, document = self.run_json(
            'risk-curve', '--p', '5', '--n', '10', '--lambdas', '0,1', '--n-reps', '5000',
            '--seed', '1', '--rule', 'simple-bayes:0.25,0', '--check', 'minimax')
        self.assertEqual(0, code)
        self.assertTrue(all(row['within_bound'] for row in document['data']))

    def test__dominance_check(self):
        code, _, _ = self.run_cli(
            'risk-curve', '--p', '5', '--n', '10', '--lambdas', '0', '--n-reps', '5000',
            '--seed', '1', '--rule', 'js', '--compare', 'natural', '--check', 'dominance')
        self.assertEqual(1, code)

    def test__errors(self):
        self.assertEqual(2, self.run_cli(*self.base)[0])
        self.assertEqual(2, self.run_cli(*(self.base + ('--rule', 'js', '--density', 't')))[0])
        self.assertEqual(2, self.run_cli(*(self.base + ('--rule', 'js', '--check', 'x')))[0])
        code, _, err = self.run_cli(
            'risk-curve', '--p', '5', '--n', '10', '--rule', 'js', '--n-reps', '10')
        self.assertEqual(3, code)
        self.assertIn('replications', err)
        self.assertEqual(3, self.run_cli(*(self.base + ('--rule', 'js', '--lambdas', '1,0')))[0])


class VerifyTest(_CliTestCase):

    def test__density(self):
        code, out, _ = self.run_cli('verify', '--scope', 'density')
        self.assertEqual(0, code)
        document = json.loads(out)
        self.assertTrue(document['data']['passes'])
        self.assertEqual('gaussian', document['data']['checks']['density']['density'])
        code, _, _ = self.run_cli('verify', '--scope', 'density', '--density', 'gt:3,1')
        self.assertEqual(1, code)

    def test__prior(self):
        code, out, _ = self.run_cli('verify', '--scope', 'prior', '--prior', 'power:-0.2')
        self.assertEqual(0, code)
        self.assertEqual('A31', json.loads(out)['data']['checks']['prior']['A3']['classification'])
        self.assertEqual(1, self.run_cli('verify', '--scope', 'prior', '--prior', 'power:-0.7')[0])
        self.assertEqual(2, self.run_cli('verify', '--scope', 'prior', '--prior', 'flat')[0])

    def test__blyth(self):
        code, out, _ = self.run_cli('verify', '--scope', 'blyth', '--i-values', '1,10')
        self.assertEqual(0, code)
        report = json.loads(out)['data']['checks']['blyth']
        self.assertTrue(report['passes'])
        self.assertEqual([1, 10], report['i'])

    def test__all(self):
        code, out, _ = self.run_cli('verify', '--i-values', '1,10')
        self.assertEqual(0, code)
        document = json.loads(out)
        self.assertEqual({'density', 'prior', 'blyth'}, set(document['data']['checks']))
        self.assertEqual('all', document['meta']['params']['scope'])


class RegressTest(_CliTestCase):

    def test__shrunk_coefficients(self):
        code, document = self.run_json(
            'regress', '--csv', FIXTURE, '--response', 'y', '--rule', 'simple-bayes:0.25,0')
        self.assertEqual(0, code)
        canon = regression.canonicalize(regression.read_csv(FIXTURE, 'y'))
        rule = ShrinkageRule.simple_bayes(0.25, 0.0, canon.dims)
        expected = regression.shrink_coefficients(canon, rule)
        rows = document['data']
        self.assertEqual(['z1', 'z2', 'z3'], [row['predictor'] for row in rows])
        np.testing.assert_allclose(expected, [row['shrunk'] for row in rows], rtol=1e-14)
        np.testing.assert_allclose(canon.beta_hat, [row['beta_hat'] for row in rows])
        self.assertEqual(6, document['meta']['params']['n'])

    def test__default_rule_is_natural(self):
        code, out, _ = self.run_cli('regress', '--csv', FIXTURE, '--response', 'y')
        self.assertEqual(0, code)
        rows = list(csv.DictReader(io.StringIO(out)))
        self.assertEqual([row['beta_hat'] for row in rows], [row['shrunk'] for row in rows])
        self.assertEqual(1.0, float(rows[0]['factor']))

    def test__errors(self):
        self.assertEqual(3, self.run_cli('regress', '--csv', FIXTURE, '--response', 'q')[0])
        code, _, _ = self.run_cli(
            'regress', '--csv', FIXTURE, '--response', 'y', '--rule', 'simple-bayes:1')
        self.assertEqual(2, code)
        with tempfile.TemporaryDirectory() as directory:
            missing = os.path.join(directory, 'missing.csv')
            code, _, err = self.run_cli('regress', '--csv', missing, '--response', 'y')
        self.assertEqual(3, code)
        self.assertIn(missing, err)


class ParserTest(_CliTestCase):

    def test__version(self):
        code, out, _ = self.run_cli('--version')
        self.assertEqual(0, code)
        self.assertEqual(equivshrink.__version__, out.strip())

    def test__command_required(self):
        code, _, err = self.run_cli()
        self.assertEqual(2, code)
        self.assertIn('usage', err)
