#!/usr/bin/env python3
#
# test_inference.py - Unittests for the debiased estimate, intervals and
# thresholding
#
# Copyright 2026 The ldpe developers
#
# This program is free software: you can redistribute it and/or modify
# it under the terms of the GNU Affero General Public License as
# published by the Free Software Foundation, either version 3 of the
# License, or (at your option) any later version.
#
# This program is distributed in the hope that it will be useful,
# but WITHOUT ANY WARRANTY; without even the implied warranty of
# MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
# GNU Affero General Public License for more details.
#
# You should have received a copy of the GNU Affero General Public License
# along with this program.  If not, see <http://www.gnu.org/licenses/>.

import json
import math
import os
import unittest

import numpy as np
from mock import patch
from scipy import stats

from helpers import random_design, random_problem, temp_home
from ldpe import inference, scaled_lasso, scores
from ldpe.errors import (DomainError, MalformedInput, NegativeVariance,
                         ScoreMismatch)
from ldpe.numerics import RngStream

Z975 = 1.959963984540054


def exact_init(beta, sigma=1.0):
    return scaled_lasso.InitialFit(np.array(beta, dtype=float), sigma,
                                   np.flatnonzero(beta), 0.1, 'exact')


def one_column_fit(beta_hat=1.0, sigma=1.0):
    """ Fit with p = 1 and z = x = ones(5) """
    z = np.ones((1, 5))
    return inference.LdpeFit(np.array([beta_hat]), np.array([0.0]), sigma,
                             np.array([math.sqrt(5) / 5]), np.array([0.0]),
                             np.array([True]), z, np.array([5.0]), 'h')


class LdpeEstimateTest(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.design, cls.y, cls.beta, cls.eps = random_problem(
            40, 60, seed=3, rho=0.3, support=(0, 10, 20), size=1.0,
            sigma=0.5)
        cls.scoreset = scores.build_all_scores(cls.design)

    def test_exact_init_without_noise(self):
        """ beta_init = beta and y = X beta leave beta unchanged """
        y = self.design.X.dot(self.beta)
        fit = inference.ldpe_estimate(self.design, y, self.scoreset,
                                      exact_init(self.beta))
        np.testing.assert_allclose(fit.beta_hat, self.beta, atol=1e-12)

    def test_one_step_formula(self):
        init = scaled_lasso.fit_scaled_lasso_lse(
            self.design, self.y, scaled_lasso.lambda_univ(40, 60))
        fit = inference.ldpe_estimate(self.design, self.y, self.scoreset,
                                      init)
        r = self.y - self.design.X.dot(init.beta_init)
        for j in (0, 7, 33):
            z = self.scoreset[j].z
            expected = init.beta_init[j] + z.dot(r) / z.dot(
                self.design.column(j))
            self.assertAlmostEqual(fit.beta_hat[j], expected, places=10)
        self.assertEqual(fit.sigma_hat, init.sigma_hat)

    def test_variance_diagonal(self):
        """ V_jj equals tau_j^2 """
        fit = inference.ldpe_estimate(self.design, self.y, self.scoreset,
                                      exact_init(self.beta))
        V = fit.V()
        np.testing.assert_allclose(np.diag(V), fit.tau ** 2, rtol=1e-10)
        np.testing.assert_allclose(V, V.T, atol=1e-14)
        self.assertGreater(np.linalg.eigvalsh(V).min(), -1e-10)
        np.testing.assert_allclose(fit.covariance_block([4, 9]),
                                   V[np.ix_([4, 9], [4, 9])], rtol=1e-12)

    def test_bias_bound_holds(self):
        init = scaled_lasso.fit_scaled_lasso_lse(
            self.design, self.y, scaled_lasso.lambda_univ(40, 60))
        fit = inference.ldpe_estimate(self.design, self.y, self.scoreset,
                                      init)
        remainder, bound, bad = inference.bias_bound_check(fit, self.beta,
                                                           self.eps)
        self.assertEqual(bad.size, 0)
        self.assertTrue(np.all(remainder <= bound + 1e-8))

    def test_other_design_rejected(self):
        other = random_design(40, 60, seed=4)
        with self.assertRaises(ScoreMismatch):
            inference.ldpe_estimate(other, self.y, self.scoreset,
                                    exact_init(self.beta))

    def test_wrong_number_of_scores(self):
        with self.assertRaises(DomainError):
            inference.ldpe_estimate(self.design, self.y,
                                    list(self.scoreset)[:10],
                                    exact_init(self.beta))

    def test_missing_score(self):
        """ A column without a score keeps its initial value """
        partial = list(self.scoreset)
        partial[5] = None
        init = exact_init(0.3 * np.ones(60))
        fit = inference.ldpe_estimate(self.design, self.y, partial, init)
        self.assertEqual(fit.beta_hat[5], 0.3)
        self.assertFalse(fit.valid[5])
        low, high = inference.coordinate_intervals(fit)
        self.assertTrue(np.isnan(low[5]) and np.isnan(high[5]))
        self.assertNotIn(5, inference.threshold_ldpe(fit).selected)
        with self.assertRaises(DomainError):
            inference.confidence_interval(fit, {5: 1.0})


class ProjectionEquivalenceTest(unittest.TestCase):
    def test_least_squares_for_any_init(self):
        """ Projection scores turn every initial estimate into OLS """
        settings = scores.ScoreSettings(method=scores.PROJECTION)
        for seed in range(20):
            p = 10 + seed % 11
            design, y, _, _ = random_problem(40, p, seed=seed, rho=0.4)
            scoreset = scores.build_all_scores(design, settings)
            ols = np.linalg.lstsq(design.X, y, rcond=None)[0]
            stream = RngStream(seed, 2)
            for b0 in (np.zeros(p), stream.normal(p)):
                fit = inference.ldpe_estimate(design, y, scoreset,
                                              exact_init(b0))
                np.testing.assert_allclose(fit.beta_hat, ols, atol=1e-8)


class IntervalTest(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.design, cls.y, cls.beta, _ = random_problem(
            30, 20, seed=5, rho=0.2, sigma=0.8)
        cls.fit, cls.scoreset, _ = inference.run_pipeline(cls.design, cls.y)

    def test_coordinate_half_width(self):
        est = inference.confidence_interval(self.fit, {3: 1.0})
        expected = Z975 * self.fit.sigma_hat * self.fit.tau[3]
        self.assertAlmostEqual(est.half_width, expected, delta=1e-6)
        self.assertAlmostEqual(est.point, self.fit.beta_hat[3])
        self.assertAlmostEqual(est.level, 0.95)
        low, high = inference.coordinate_intervals(self.fit)
        self.assertAlmostEqual(low[3], est.low)
        self.assertAlmostEqual(high[3], est.high)

    def test_contrast_variance(self):
        """ e_j - e_k uses the raw scores' cross term """
        est = inference.confidence_interval(self.fit, {2: 1.0, 6: -1.0})
        z2, z6 = self.scoreset[2].z, self.scoreset[6].z
        x2, x6 = self.design.column(2), self.design.column(6)
        w2, w6 = z2 / abs(z2.dot(x2)), z6 / abs(z6.dot(x6))
        var = (w2 - w6).dot(w2 - w6)
        expected = Z975 * self.fit.sigma_hat * math.sqrt(var)
        self.assertAlmostEqual(est.half_width, expected,
                               delta=1e-10 * expected)
        self.assertAlmostEqual(est.point,
                               self.fit.beta_hat[2] - self.fit.beta_hat[6])

    def test_dense_contrast(self):
        a = np.zeros(20)
        a[[1, 4]] = [0.5, 2.0]
        dense = inference.confidence_interval(self.fit, a)
        sparse = inference.confidence_interval(self.fit, {1: 0.5, 4: 2.0})
        self.assertAlmostEqual(dense.half_width, sparse.half_width)

    def test_bad_contrasts(self):
        with self.assertRaises(DomainError):
            inference.confidence_interval(self.fit, np.zeros(20))
        with self.assertRaises(DomainError):
            inference.confidence_interval(self.fit, np.ones(3))
        with self.assertRaises(DomainError):
            inference.confidence_interval(self.fit, {25: 1.0})

    def test_bad_level(self):
        for alpha in (0.0, 1.0, 1.5):
            with self.assertRaises(DomainError):
                inference.confidence_interval(self.fit, {0: 1.0}, alpha)

    def test_negative_variance(self):
        with patch.object(inference.LdpeFit, 'covariance_block',
                          return_value=np.array([[-1.0]])):
            with self.assertRaises(NegativeVariance):
                inference.confidence_interval(self.fit, {0: 1.0})

    def test_simultaneous(self):
        out = inference.simultaneous_intervals(self.fit, 0.05)
        self.assertEqual(len(out), 20)
        q = stats.norm.isf(0.05 / 40)
        for j, est in enumerate(out):
            self.assertAlmostEqual(est.half_width,
                                   q * self.fit.sigma_hat * self.fit.tau[j],
                                   delta=1e-8)

    def test_simultaneous_single_column(self):
        """ With p = 1 the Bonferroni interval is the plain one """
        fit = one_column_fit()
        plain = inference.confidence_interval(fit, {0: 1.0}, 0.05)
        joint = inference.simultaneous_intervals(fit, 0.05)[0]
        self.assertAlmostEqual(plain.half_width, joint.half_width,
                               places=12)

    def test_p_values(self):
        pv = inference.p_values(self.fit)
        self.assertTrue(np.all((pv >= 0) & (pv <= 1)))
        self.assertEqual(float(inference.p_values(one_column_fit(0.0))[0]),
                         1.0)


class ThresholdTest(unittest.TestCase):
    def test_soft_threshold_values(self):
        np.testing.assert_allclose(
            inference.soft_threshold([5.0, -1.0, -5.0, 2.0], 2.0),
            [3.0, 0.0, -3.0, 0.0])

    def test_hard_threshold_values(self):
        np.testing.assert_allclose(
            inference.hard_threshold([5.0, -1.0, -5.0, 2.0], 2.0),
            [5.0, 0.0, -5.0, 0.0])

    def test_selection_matches_thresholds(self):
        design, y, _, _ = random_problem(30, 20, seed=7, size=2.0,
                                         sigma=0.5)
        fit, _, _ = inference.run_pipeline(design, y)
        for mode in (inference.HARD, inference.SOFT):
            sel = inference.threshold_ldpe(fit, mode=mode)
            expected = np.flatnonzero(np.abs(fit.beta_hat) > sel.thresholds)
            np.testing.assert_array_equal(sel.selected, expected)
            self.assertLessEqual(
                np.max(np.abs(sel.estimates - fit.beta_hat)),
                np.max(sel.thresholds) + 1e-15)
        self.assertTrue({0, 1, 2} <= set(sel.selected.tolist()))
        q = stats.norm.isf(1 / 40.0)
        np.testing.assert_allclose(sel.thresholds,
                                   q * fit.sigma_hat * fit.tau, rtol=1e-8)

    def test_inflation_shrinks_selection(self):
        fit = one_column_fit(1.0)
        self.assertEqual(
            list(inference.threshold_ldpe(fit, alpha=0.05).selected), [0])
        sel = inference.threshold_ldpe(fit, alpha=0.05, c_n=100.0)
        self.assertEqual(len(sel.selected), 0)
        self.assertEqual(sel.estimates[0], 0.0)

    def test_bad_arguments(self):
        fit = one_column_fit()
        with self.assertRaises(DomainError):
            inference.threshold_ldpe(fit, c_n=-1.0)
        with self.assertRaises(DomainError):
            inference.threshold_ldpe(fit, mode='medium')


class PipelineTest(unittest.TestCase):
    def test_scale_equivariance(self):
        """ Scaling y scales the estimates and intervals, not the selection
        """
        for seed in range(10):
            design, y, _, _ = random_problem(25, 30, seed=seed, rho=0.2,
                                             size=1.5)
            scoreset = scores.build_all_scores(design)
            lam0 = scaled_lasso.lambda_univ(25, 30)
            init = scaled_lasso.fit_scaled_lasso_lse(design, y, lam0)
            base = inference.ldpe_estimate(design, y, scoreset, init)
            for c in (0.1, 10.0):
                init_c = scaled_lasso.fit_scaled_lasso_lse(design, c * y,
                                                           lam0)
                fit = inference.ldpe_estimate(design, c * y, scoreset,
                                              init_c)
                scale = c * np.max(np.abs(base.beta_hat))
                np.testing.assert_allclose(fit.beta_hat, c * base.beta_hat,
                                           rtol=1e-8, atol=1e-8 * scale)
                lo_b, hi_b = inference.coordinate_intervals(base)
                lo, hi = inference.coordinate_intervals(fit)
                np.testing.assert_allclose(hi - lo, c * (hi_b - lo_b),
                                           rtol=1e-8)
                np.testing.assert_array_equal(
                    inference.threshold_ldpe(fit).selected,
                    inference.threshold_ldpe(base).selected)

    def test_restricted_scores(self):
        design, y, beta, eps = random_problem(40, 30, seed=9, rho=0.6)
        settings = scores.ScoreSettings(method=scores.R_LDPE, m=4)
        fit, scoreset, init = inference.run_pipeline(design, y,
                                                     settings=settings)
        self.assertTrue(fit.valid.all())
        _, _, bad = inference.bias_bound_check(fit, beta, eps)
        self.assertEqual(bad.size, 0)

    def test_score_cache(self):
        design, y, _, _ = random_problem(30, 20, seed=2)
        with temp_home() as home:
            cache = scores.ScoreCache(os.path.join(home, 'cache.npz'))
            first, _, _ = inference.run_pipeline(design, y, cache=cache)
            self.assertTrue(os.path.exists(cache.path))
            with patch('ldpe.scores.build_all_scores') as build:
                second, _, _ = inference.run_pipeline(design, y, cache=cache)
                self.assertFalse(build.called)
        np.testing.assert_array_equal(first.beta_hat, second.beta_hat)


class FitOutputTest(unittest.TestCase):
    def setUp(self):
        design, y, _, _ = random_problem(30, 20, seed=1)
        self.fit, _, _ = inference.run_pipeline(design, y)
        self.scales = design.original_scales

    def test_csv_matches_json(self):
        with temp_home() as home:
            jpath = os.path.join(home, 'fit.json')
            cpath = os.path.join(home, 'fit.csv')
            inference.write_fit_json(self.fit, jpath, seed=3,
                                     original_scales=self.scales)
            inference.write_fit_csv(self.fit, cpath)
            with open(jpath) as f:
                doc = json.load(f)
            rows = inference.read_fit_csv(cpath)
        self.assertEqual(doc['p'], 20)
        self.assertEqual(doc['seed'], 3)
        self.assertEqual(len(rows), 20)
        for row, jrow in zip(rows, doc['per_coefficient']):
            for k in inference.CSV_HEADER:
                self.assertEqual(row[k], jrow[k])
            self.assertAlmostEqual(jrow['beta_hat_original'] *
                                   self.scales[row['j'] - 1],
                                   jrow['beta_hat'])

    def test_bad_csv(self):
        with temp_home() as home:
            path = os.path.join(home, 'bad.csv')
            with open(path, 'w') as f:
                f.write("a,b\n1,2\n")
            with self.assertRaises(MalformedInput):
                inference.read_fit_csv(path)
