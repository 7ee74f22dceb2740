#!/usr/bin/env python3
#
# test_numerics.py - Unittests for standardization, projections and
# normal quantiles
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

import unittest

import numpy as np
from scipy import stats

from helpers import random_design
from ldpe import numerics
from ldpe.errors import DomainError, ZeroColumn


class StandardizeTest(unittest.TestCase):
    def setUp(self):
        self.raw = numerics.RngStream(3, 0).normal((30, 7)) * np.arange(
            1, 8)

    def test_column_norms(self):
        """ Every standardized column has squared norm n """
        d = numerics.standardize_columns(self.raw)
        norms = np.einsum('ij,ij->j', d.X, d.X)
        np.testing.assert_allclose(norms, d.n, rtol=1e-12)

    def test_original_scales(self):
        """ Scales map the standardized columns back to the input """
        d = numerics.standardize_columns(self.raw)
        np.testing.assert_allclose(d.X * d.original_scales, self.raw,
                                   rtol=1e-12)

    def test_zero_column(self):
        self.raw[:, 4] = 0.0
        with self.assertRaises(ZeroColumn) as cm:
            numerics.standardize_columns(self.raw)
        self.assertEqual(cm.exception.j, 4)

    def test_constant_column_when_centering(self):
        """ A constant column only vanishes once centered """
        self.raw[:, 2] = 5.0
        numerics.standardize_columns(self.raw)
        with self.assertRaises(ZeroColumn):
            numerics.standardize_columns(self.raw, center=True)

    def test_centered_columns(self):
        d = numerics.standardize_columns(self.raw, center=True)
        np.testing.assert_allclose(d.X.mean(axis=0), 0, atol=1e-12)

    def test_non_finite(self):
        self.raw[0, 0] = np.nan
        with self.assertRaises(DomainError):
            numerics.standardize_columns(self.raw)

    def test_hash(self):
        """ Equal matrices share a hash, a changed entry does not """
        a = numerics.standardize_columns(self.raw)
        b = numerics.standardize_columns(self.raw.copy())
        self.assertEqual(a.hash, b.hash)
        self.raw[3, 3] += 1.0
        c = numerics.standardize_columns(self.raw)
        self.assertNotEqual(a.hash, c.hash)


class ProjectionTest(unittest.TestCase):
    def setUp(self):
        self.design = random_design(25, 8, seed=5)

    def test_residual_is_orthogonal(self):
        v = numerics.RngStream(1, 0).normal(25)
        r = numerics.project_residual(v, [1, 3, 6], self.design)
        corr = self.design.X[:, [1, 3, 6]].T.dot(r)
        np.testing.assert_allclose(corr, 0, atol=1e-10)

    def test_rank_deficient_basis(self):
        """ A repeated basis column does not change the projection """
        v = numerics.RngStream(1, 0).normal(25)
        once = numerics.project_residual(v, [2, 5], self.design)
        twice = numerics.project_residual(v, [2, 5, 2], self.design)
        np.testing.assert_allclose(once, twice, atol=1e-10)

    def test_empty_basis(self):
        v = np.arange(25, dtype=float)
        np.testing.assert_allclose(
            numerics.project_residual(v, [], self.design), v)

    def test_too_many_columns(self):
        d = random_design(5, 8, seed=1)
        with self.assertRaises(DomainError):
            numerics.project_residual(np.ones(5), range(5), d)


class NormalQuantileTest(unittest.TestCase):
    def test_two_sided_95(self):
        self.assertAlmostEqual(numerics.normal_quantile(0.975),
                               1.959963984540054, places=12)

    def test_symmetry(self):
        for q in (1e-8, 0.01, 0.3):
            self.assertAlmostEqual(numerics.normal_quantile(q),
                                   -numerics.normal_quantile(1 - q),
                                   places=9)

    def test_far_tail(self):
        """ Bonferroni level for p = 3000 """
        self.assertAlmostEqual(numerics.normal_quantile(1 - 1 / 6000.0),
                               stats.norm.isf(1 / 6000.0), places=9)

    def test_inverts_cdf(self):
        for q in (1e-10, 0.025, 0.5, 0.9, 1 - 1e-6):
            t = numerics.normal_quantile(q)
            self.assertAlmostEqual(float(numerics.normal_cdf(t)), q,
                                   places=14)

    def test_out_of_range(self):
        for q in (0.0, 1.0, -0.5, 2.0):
            with self.assertRaises(DomainError):
                numerics.normal_quantile(q)


class RngStreamTest(unittest.TestCase):
    def test_reproducible(self):
        a = numerics.RngStream(42, 7).normal(50)
        b = numerics.RngStream(42, 7).normal(50)
        np.testing.assert_array_equal(a, b)

    def test_streams_differ(self):
        a = numerics.RngStream(42, 7).normal(50)
        b = numerics.RngStream(42, 8).normal(50)
        c = numerics.RngStream(43, 7).normal(50)
        self.assertFalse(np.array_equal(a, b))
        self.assertFalse(np.array_equal(a, c))

    def test_gaussian_vector(self):
        v = numerics.gaussian_vector(numerics.RngStream(0, 0), 10)
        self.assertEqual(v.shape, (10,))
        with self.assertRaises(DomainError):
            numerics.gaussian_vector(numerics.RngStream(0, 0), 0)
