#!/usr/bin/env python3
# -*- mode: python; -*-
#
# setup.py - ldpe setuptools setup
#
# Copyright 2026 The ldpe developers
#
# This program is free software: you can redistribute it and/or modify
# it under the terms of the GNU Affero General Public License as
# published by the Free Software Foundation, either version 3 of the
# License, or (at your option) any later version.
#
# This package is distributed in the hope that it will be useful,
# but WITHOUT ANY WARRANTY; without even the implied warranty of
# MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
# GNU Affero General Public License for more details.
#
# You should have received a copy of the GNU Affero General Public License
# along with this program. If not, see <http://www.gnu.org/licenses/>.

"""
ldpe
====

Confidence intervals and tests for single coefficients and sparse
contrasts in linear regression with more variables than observations.
Each coefficient is estimated by a one step bias correction of the
scaled Lasso along a relaxed projection score, which gives approximately
Gaussian estimates with computable standard errors. A seeded simulation
harness and design diagnostics are included.

Documentation
-------------
Built from ``docs/`` with Sphinx.
"""

from setuptools import setup, find_packages

import os
import sys

import ldpe

REQUIREMENTS = [
    "numpy",
    "scipy",
    "PyYAML",
    "numba",
]

TEST_REQUIREMENTS = list(REQUIREMENTS)
TEST_REQUIREMENTS.extend(["mock", "nose"])

if sys.argv[-1] == 'clean':
    print("Cleaning up ...")
    os.system('rm -rf ldpe.egg-info build dist')
    sys.exit()

setup(name='ldpe',
      version=ldpe.__version__,
      description="Debiased low-dimensional projection inference for "
      "high-dimensional regression",
      long_description=__doc__,
      author='The ldpe developers',
      license="AGPLv3+",
      scripts=['bin/ldpe'],
      packages=find_packages(exclude=["test"]),
      install_requires=REQUIREMENTS,
      tests_require=TEST_REQUIREMENTS,
      test_suite='nose.collector',
      data_files=[
          ('share/ldpe', ['share/ldpe.yaml'])
          ],
      )
