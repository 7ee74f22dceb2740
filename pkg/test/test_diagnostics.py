#!/usr/bin/env python3
#
# test_diagnostics.py - Unittests for design diagnostics and the oracle
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

from itertools import combinations
import math
import unittest

import numpy as np

from helpers import (hadamard_design, random_design, random_problem,
                     reference_kappa)
from ldpe import diagnostics, numerics, simulation
from ldpe.errors import DegenerateOracle, DomainError, SizeError


def duplicated_design(n=20, p=6, seed=9):
    """ Column 4 is a copy of column 1 """
    design = random_design(n, p, seed=seed)
    design.X[:, 4] = design.X[:, 1]
    return design


class CompatibilityFactorTest(unittest.TestCase):
    def test_orthogonal_design(self):
        lower, upper = diagnostics.compatibility_factor(hadamard_design(),
                                                        [1, 2], 2.0)
        self.assertAlmostEqual(upper, 1.0, places=10)
        self.assertGreaterEqual(lower, 0.999)
        self.assertLessEqual(lower, upper)

    def test_duplicated_column(self):
        """ u = e_1 - e_4 lies in the cone and in the null space """
        _, upper = diagnostics.compatibility_factor(duplicated_design(), [1],
                                                    1.0)
        self.assertLess(upper, 1e-3)

    def test_against_reference(self):
        for seed in range(20):
            design = random_design(20, 8, seed=seed, rho=0.4)
            S = [seed % 8] if seed % 2 else [seed % 8, (seed + 3) % 8]
            lower, upper = diagnostics.compatibility_factor(design, S, 2.0)
            ref = reference_kappa(design.X, S, 2.0)
            self.assertLessEqual(lower, upper)
            self.assertAlmostEqual(upper, ref, delta=1e-3 * ref,
                                   msg="seed %d" % seed)
            self.assertLessEqual(lower, ref * (1 + 1e-3))

    def test_sampling_brackets_exact(self):
        design = random_design(20, 8, seed=3, rho=0.4)
        lower, upper = diagnostics.compatibility_factor(design, [2, 5], 2.0)
        s_low, s_up = diagnostics.compatibility_factor(
            design, [2, 5], 2.0, mode=diagnostics.SAMPLING, samples=5000,
            stream=numerics.RngStream(1, 0))
        self.assertEqual(s_low, 0.0)
        self.assertGreaterEqual(s_up, lower)

    def test_bad_arguments(self):
        design = random_design(20, 30, seed=1)
        with self.assertRaises(DomainError):
            diagnostics.compatibility_factor(design, [0], 0.5)
        with self.assertRaises(DomainError):
            diagnostics.compatibility_factor(design, [], 2.0)
        with self.assertRaises(DomainError):
            diagnostics.compatibility_factor(design, [30], 2.0)
        with self.assertRaises(SizeError):
            diagnostics.compatibility_factor(design, range(13), 2.0,
                                             mode=diagnostics.EXACT)


class SparseEigenvalueTest(unittest.TestCase):
    def test_orthogonal_design(self):
        lo, hi = diagnostics.sparse_eigenvalues(hadamard_design(), [0], 2)
        self.assertAlmostEqual(lo, 1.0, places=10)
        self.assertAlmostEqual(hi, 1.0, places=10)

    def test_duplicated_pair(self):
        lo, hi = diagnostics.sparse_eigenvalues(duplicated_design(), [0], 2)
        self.assertGreaterEqual(hi, 2.0 - 1e-10)
        self.assertLess(lo, 1e-10)

    def test_matches_enumeration(self):
        design = random_design(30, 8, seed=5, rho=0.5)
        G = design.gram()
        S, m = [2], 2
        pool = [k for k in range(8) if k not in S]
        lo, hi = np.inf, -np.inf
        for size in range(1, m + 1):
            for B in combinations(pool, size):
                B = list(B)
                lo = min(lo, np.linalg.eigvalsh(G[np.ix_(S + B, S + B)])[0])
                hi = max(hi, np.linalg.eigvalsh(G[np.ix_(B, B)])[-1])
        phi_minus, phi_plus = diagnostics.sparse_eigenvalues(design, S, m)
        self.assertAlmostEqual(phi_minus, lo, places=10)
        self.assertAlmostEqual(phi_plus, hi, places=10)

    def test_monotone_in_m(self):
        design = random_design(30, 8, seed=6, rho=0.5)
        values = [diagnostics.sparse_eigenvalues(design, [0, 1], m)
                  for m in (1, 2, 3, 4)]
        for (lo_a, hi_a), (lo_b, hi_b) in zip(values, values[1:]):
            self.assertLessEqual(lo_b, lo_a + 1e-12)
            self.assertGreaterEqual(hi_b, hi_a - 1e-12)

    def test_sampling_bounds(self):
        design = random_design(30, 8, seed=5, rho=0.5)
        lo, hi = diagnostics.sparse_eigenvalues(design, [2], 2)
        s_lo, s_hi = diagnostics.sparse_eigenvalues(
            design, [2], 2, mode=diagnostics.SAMPLING, samples=50)
        self.assertGreaterEqual(s_lo, lo - 1e-12)
        self.assertLessEqual(s_hi, hi + 1e-12)

    def test_enumeration_too_large(self):
        design = random_design(20, 40, seed=1)
        with self.assertRaises(SizeError):
            diagnostics.sparse_eigenvalues(design, [0], 8)
        with self.assertRaises(SizeError):
            diagnostics.sparse_eigenvalues(design, range(14), 3)

    def test_no_extra_columns(self):
        """ m = 0 leaves the smallest eigenvalue on S and phi_+ = 0 """
        lo, hi = diagnostics.sparse_eigenvalues(hadamard_design(), [0, 5], 0)
        self.assertAlmostEqual(lo, 1.0, places=10)
        self.assertEqual(hi, 0.0)
        lo, _ = diagnostics.sparse_eigenvalues(duplicated_design(), [1, 4], 0)
        self.assertLess(lo, 1e-10)
        design = random_design(30, 8, seed=6, rho=0.5)
        G = design.gram()
        lo, _ = diagnostics.sparse_eigenvalues(design, [0, 1, 3], 0)
        self.assertAlmostEqual(
            lo, np.linalg.eigvalsh(G[np.ix_([0, 1, 3], [0, 1, 3])])[0],
            places=10)
        lo_1, _ = diagnostics.sparse_eigenvalues(design, [0, 1, 3], 1)
        self.assertLessEqual(lo_1, lo + 1e-12)

    def test_bad_m(self):
        design = random_design(20, 6, seed=1)
        with self.assertRaises(DomainError):
            diagnostics.sparse_eigenvalues(design, [0], -1)
        with self.assertRaises(DomainError):
            diagnostics.sparse_eigenvalues(design, [0], 6)
        with self.assertRaises(DomainError):
            diagnostics.sparse_eigenvalues(design, [], 0)
        with self.assertRaises(DomainError):
            diagnostics.regularity_report(design, [0], m=0)


class ThresholdedGramTest(unittest.TestCase):
    def test_no_threshold_is_the_gram(self):
        design = random_design(50, 12, seed=2, rho=0.5)
        tg = diagnostics.thresholded_gram(design, 0.0)
        G = design.gram()
        np.testing.assert_allclose(tg.matrix.toarray(), G, atol=1e-12)
        ev = np.linalg.eigvalsh(G)
        self.assertAlmostEqual(tg.eig_min, ev[0], places=6)
        self.assertAlmostEqual(tg.eig_max, ev[-1], places=6)

    def test_threshold_above_one(self):
        """ The diagonal is thresholded too """
        tg = diagnostics.thresholded_gram(random_design(20, 6, seed=2), 1.5)
        self.assertEqual(tg.matrix.nnz, 0)
        self.assertEqual(tg.eigs, (0.0, 0.0))

    def test_lanczos_matches_dense(self):
        design = random_design(100, 250, seed=4, rho=0.6)
        tg = diagnostics.thresholded_gram(design, 0.2)
        dense = tg.matrix.toarray()
        G = design.gram()
        kept = np.abs(G) >= 0.2
        np.testing.assert_allclose(dense[kept], G[kept])
        self.assertTrue(np.all(dense[~kept] == 0))
        ev = np.linalg.eigvalsh(dense)
        self.assertAlmostEqual(tg.eig_min, ev[0], places=6)
        self.assertAlmostEqual(tg.eig_max, ev[-1], places=6)

    def test_conditions_by_hand(self):
        out = diagnostics.gram_conditions(1, 1.0, 0.05, 1.0, 1.0)
        self.assertTrue(out['all_hold'])
        self.assertTrue(out['kappa_bound_holds'])
        out = diagnostics.gram_conditions(1, 1.0, 0.2, 1.0, 1.0)
        self.assertFalse(out['compatibility'])
        self.assertFalse(out['kappa_bound_holds'])
        self.assertFalse(out['all_hold'])
        self.assertTrue(out['max_eig'])

    def test_zero_lower_constant(self):
        out = diagnostics.gram_conditions(1, 1.0, 0.1, 0.0, 1.0)
        self.assertFalse(out['min_eig'])
        self.assertFalse(out['sparse_eigen'])

    def test_negative_threshold(self):
        with self.assertRaises(DomainError):
            diagnostics.thresholded_gram(random_design(20, 6), -0.1)


class RegularityReportTest(unittest.TestCase):
    def test_report(self):
        design = hadamard_design()
        report = diagnostics.regularity_report(design, [0, 3], xi=2.0, m=2,
                                               lambda1=0.5)
        self.assertAlmostEqual(report.kappa_sq_upper, 1.0, places=8)
        self.assertAlmostEqual(report.phi_minus, 1.0, places=10)
        self.assertEqual(report.kappa_mode, diagnostics.EXACT)
        doc = report.to_dict()
        self.assertEqual(doc['S'], [1, 4])
        self.assertEqual(doc['lambda1'], 0.5)
        # identity after thresholding: c_* = c^* = 1, 2 * 0.5 * 9 > 1/2
        self.assertFalse(doc['conditions']['compatibility'])
        self.assertTrue(doc['conditions']['min_eig'])

    def test_default_lambda1(self):
        self.assertAlmostEqual(diagnostics.default_lambda1(100, 500),
                               4 * math.sqrt(math.log(500) / 100))


class OracleTest(unittest.TestCase):
    def test_neighbours(self):
        self.assertEqual(diagnostics.oracle_neighbours(0, 10), [0, 1, 2])
        self.assertEqual(diagnostics.oracle_neighbours(4, 10), [3, 4, 5])
        self.assertEqual(diagnostics.oracle_neighbours(9, 10), [7, 8, 9])
        with self.assertRaises(DomainError):
            diagnostics.oracle_neighbours(0, 2)

    def test_estimate_algebra(self):
        """ beta_o = beta_j + z^T eps / ||z||^2 """
        design, y, beta, eps = random_problem(50, 12, seed=8, rho=0.7,
                                              support=(3, 4, 9), size=2.0)
        for j in (0, 4, 11):
            b_o, s_o, z_norm = diagnostics.oracle_estimate(design, y, beta,
                                                           eps, j)
            rest = [k for k in diagnostics.oracle_neighbours(j, 12)
                    if k != j]
            z = numerics.project_residual(design.column(j), rest, design)
            self.assertAlmostEqual(z_norm, np.linalg.norm(z))
            self.assertAlmostEqual(b_o, beta[j] + z.dot(eps) / z_norm ** 2,
                                   places=10)
            self.assertLessEqual(s_o, np.linalg.norm(eps) / math.sqrt(50))

    def test_noiseless(self):
        design, _, beta, _ = random_problem(30, 10, seed=2, rho=0.5)
        y = design.X.dot(beta)
        b_o, s_o, _ = diagnostics.oracle_estimate(design, y, beta,
                                                  np.zeros(30), 1)
        self.assertAlmostEqual(b_o, beta[1], places=10)
        self.assertEqual(s_o, 0.0)

    def test_degenerate(self):
        design = random_design(30, 6, seed=4)
        X = design.X
        mix = X[:, 0] + X[:, 2]
        X[:, 1] = mix * math.sqrt(30) / np.linalg.norm(mix)
        with self.assertRaises(DegenerateOracle):
            diagnostics.oracle_estimate(design, np.ones(30), np.zeros(6),
                                        np.zeros(30), 1)

    def test_interval_and_threshold(self):
        low, high = diagnostics.oracle_interval(1.0, 2.0, 4.0)
        self.assertAlmostEqual(high - 1.0, 0.5 * 1.959963984540054)
        self.assertAlmostEqual(low + high, 2.0)
        self.assertAlmostEqual(diagnostics.oracle_threshold(2.0, 4.0, 20),
                               0.5 * numerics.normal_quantile(1 - 1 / 40.0))


class CappedSparsityTest(unittest.TestCase):
    def test_simulation_coefficients(self):
        for alpha, expected in ((2.0, 8.93), (1.0, 29.24)):
            beta = simulation.generate_beta(3000, alpha, 200)
            s = diagnostics.capped_l1_sparsity(beta, 1.0, 200, 3000)
            self.assertAlmostEqual(s, expected, delta=0.01)

    def test_bad_sigma(self):
        with self.assertRaises(DomainError):
            diagnostics.capped_l1_sparsity(np.ones(3), 0.0, 10, 3)
