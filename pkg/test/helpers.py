#
# helpers.py - Shared test fixtures and brute force references
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

import contextlib
import itertools
import os
import shutil
import sys
import tempfile

import numpy as np
from scipy import optimize

sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))

from ldpe import numerics  # noqa
from ldpe.lasso import lasso_objective  # noqa
from ldpe.simulation import generate_design  # noqa

FIXTURES = os.path.join(os.path.dirname(__file__), 'fixtures')
LONG_TESTS = os.environ.get('LDPE_LONG_TESTS', 0)


def fixture(name):
    return os.path.join(FIXTURES, name)


def random_design(n, p, seed=0, rho=0.0):
    """ Standardized AR(1) design drawn from a fixed stream """
    _, design = generate_design(n, p, rho, numerics.RngStream(seed, 0))
    return design


def random_problem(n, p, seed=0, rho=0.0, support=(0, 1, 2), size=1.0,
                   sigma=1.0):
    """ (design, y, beta, eps) with a few nonzero coefficients """
    design = random_design(n, p, seed, rho)
    beta = np.zeros(p)
    beta[list(support)] = size
    eps = sigma * numerics.RngStream(seed, 1).normal(n)
    return design, design.X.dot(beta) + eps, beta, eps


def hadamard_design():
    """ 8 x 8 Sylvester Hadamard matrix, orthogonal columns of norm^2 8 """
    M = np.loadtxt(fixture('hadamard8.csv'), delimiter=',')
    return numerics.standardize_columns(M)


def write_csv(path, M):
    M = np.asarray(M)
    np.savetxt(path, M.reshape(len(M), -1), delimiter=',', fmt='%.17g')


@contextlib.contextmanager
def temp_home():
    """ Point LDPE_HOME at a scratch directory """
    path = tempfile.mkdtemp(prefix='ldpe-test-')
    old = os.environ.get('LDPE_HOME')
    os.environ['LDPE_HOME'] = path
    try:
        yield path
    finally:
        if old is None:
            del os.environ['LDPE_HOME']
        else:
            os.environ['LDPE_HOME'] = old
        shutil.rmtree(path, ignore_errors=True)


def brute_force_lasso(A, y, lam):
    """ Lasso minimizer by enumerating sign patterns

    For every sign vector the stationarity equations are solved on its
    support; a candidate counts when its signs agree and the zero
    coordinates satisfy |a_k^T r| / n <= lam. Meant for q <= 6.
    """
    n, q = A.shape
    best, best_obj = np.zeros(q), lasso_objective(A, y, np.zeros(q), lam)
    for signs in itertools.product((-1.0, 0.0, 1.0), repeat=q):
        s = np.array(signs)
        S = np.flatnonzero(s)
        if not S.size:
            continue
        G = A[:, S].T.dot(A[:, S]) / n
        rhs = A[:, S].T.dot(y) / n - lam * s[S]
        try:
            bS = np.linalg.solve(G, rhs)
        except np.linalg.LinAlgError:
            continue
        if np.any(np.sign(bS) != s[S]):
            continue
        b = np.zeros(q)
        b[S] = bS
        grad = A.T.dot(y - A.dot(b)) / n
        off = np.setdiff1d(np.arange(q), S)
        if off.size and np.max(np.abs(grad[off])) > lam * (1 + 1e-9):
            continue
        obj = lasso_objective(A, y, b, lam)
        if obj < best_obj:
            best, best_obj = b, obj
    return best


def _cone_inner(X, S, uS, xi):
    """ min over ||w||_1 <= xi of ||X_S uS + X_Sc w||^2 / n, by SLSQP on
    the split w = a - b
    """
    n, p = X.shape
    Sc = np.setdiff1d(np.arange(p), S)
    c = X[:, S].dot(uS)
    if not Sc.size:
        return c.dot(c) / n
    B = np.hstack([X[:, Sc], -X[:, Sc]])

    def f(v):
        r = c + B.dot(v)
        return r.dot(r) / n

    def df(v):
        return 2.0 * B.T.dot(c + B.dot(v)) / n

    res = optimize.minimize(
        f, np.zeros(2 * Sc.size), jac=df, method='SLSQP',
        bounds=[(0, None)] * (2 * Sc.size),
        constraints=[{'type': 'ineq', 'fun': lambda v: xi - v.sum(),
                      'jac': lambda v: -np.ones_like(v)}],
        options={'ftol': 1e-15, 'maxiter': 1000})
    return min(res.fun, c.dot(c) / n)


def reference_kappa(X, S, xi):
    """ Squared compatibility factor for |S| <= 2 by a scalar search

    u_S runs over the segment s * (t, 1 - t) for each sign pattern; the
    inner minimum is convex in t, so a bounded scalar minimization finds
    the global value.
    """
    S = list(S)
    k = len(S)
    if k == 1:
        return k * _cone_inner(X, S, np.ones(1), xi)
    best = np.inf
    for s2 in (1.0, -1.0):
        def g(t):
            return _cone_inner(X, S, np.array([t, s2 * (1 - t)]), xi)
        res = optimize.minimize_scalar(g, bounds=(0, 1), method='bounded',
                                       options={'xatol': 1e-7})
        best = min(best, res.fun, g(0.0), g(1.0))
    return k * best
