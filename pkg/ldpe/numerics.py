#
# numerics.py - Dense numerical primitives
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

""" Column standardization, projections, normal quantiles and seeded
random streams.

Matrices are float64 ``numpy.ndarray`` objects indexed ``[row, col]``.
"""

import logging
import math

import numpy as np
from scipy import linalg
from scipy import special

from ldpe import utils
from ldpe.errors import DomainError, ZeroColumn

log = logging.getLogger('ldpe.numerics')

MASK64 = (1 << 64) - 1
RANK_TOL = 1e-10


def as_matrix(M):
    """ Validate a dense design matrix

    :param M: array-like, n x p
    :returns: float64 copy with at least one row and column
    :rtype: numpy.ndarray
    """
    M = np.array(M, dtype=float)
    if M.ndim == 1:
        M = M.reshape(-1, 1)
    if M.ndim != 2 or M.shape[0] < 1 or M.shape[1] < 1:
        raise DomainError("expected a non-empty 2-d matrix, got shape "
                          "{s}".format(s=M.shape))
    if not np.all(np.isfinite(M)):
        raise DomainError("matrix has non-finite entries")
    return M


class StandardizedDesign:
    """ Design with every column scaled to squared norm n

    :param X: standardized n x p matrix
    :param original_scales: pre-standardization column norms over sqrt(n)
    :param center: column means removed before scaling, or None
    """

    def __init__(self, X, original_scales, center=None):
        self.X = X
        self.original_scales = original_scales
        self.center = center
        self._hash = None
        self._gram = None

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def p(self):
        return self.X.shape[1]

    @property
    def hash(self):
        """ Content hash of the standardized matrix

        :rtype: str
        """
        if self._hash is None:
            self._hash = utils.content_hash(self.X)
        return self._hash

    def gram(self):
        """ X^T X / n, computed once

        :rtype: numpy.ndarray
        """
        if self._gram is None:
            self._gram = self.X.T.dot(self.X) / self.n
        return self._gram

    def column(self, j):
        return self.X[:, j]

    def without(self, j):
        """ Columns other than j, with the index map back to the design

        :returns: (n x (p-1) matrix, index array)
        :rtype: tuple
        """
        others = np.delete(np.arange(self.p), j)
        return self.X[:, others], others

    def __repr__(self):
        return "<StandardizedDesign n={n} p={p}>".format(n=self.n, p=self.p)


def standardize_columns(M, center=False):
    """ Scale every column of M to squared norm n

    .. code::

        design = numerics.standardize_columns(raw)
        assert abs(design.X[:, 0].dot(design.X[:, 0]) - design.n) < 1e-8

    :param M: n x p matrix
    :param bool center: subtract column means first (no intercept otherwise)
    :returns: the standardized design
    :rtype: StandardizedDesign
    :raises ZeroColumn: for an all-zero (or constant, when centering) column
    """
    M = as_matrix(M)
    n = M.shape[0]
    means = None
    if center:
        means = M.mean(axis=0)
        M = M - means
    norms = np.sqrt(np.einsum('ij,ij->j', M, M))
    zero = np.flatnonzero(norms == 0)
    if zero.size:
        raise ZeroColumn(int(zero[0]))
    X = M * (math.sqrt(n) / norms)
    return StandardizedDesign(X, norms / math.sqrt(n), center=means)


def _orthonormal_basis(B):
    """ Orthonormal basis of span(B) by column-pivoted QR """
    if B.shape[1] == 0:
        return B
    Q, R, _ = linalg.qr(B, mode='economic', pivoting=True)
    diag = np.abs(np.diag(R))
    if diag.size == 0 or diag[0] == 0:
        return Q[:, :0]
    rank = int(np.sum(diag > RANK_TOL * diag[0]))
    return Q[:, :rank]


def project_out(v, B):
    """ Residual of v (vector or matrix of columns) after projecting onto
    span(B)
    """
    Q = _orthonormal_basis(B)
    if Q.shape[1] == 0:
        return np.array(v, dtype=float, copy=True)
    return v - Q.dot(Q.T.dot(v))


def project_residual(v, basis_cols, design):
    """ v minus its orthogonal projection on {x_k : k in basis_cols}

    Rank deficiency in the basis is absorbed by the pivoted QR.

    :param v: vector of length n, or an n x k block projected column-wise
    :param basis_cols: column indices of the design
    :param design: StandardizedDesign
    :rtype: numpy.ndarray
    """
    basis_cols = list(basis_cols)
    if len(basis_cols) >= design.n:
        raise DomainError("cannot project on {k} >= n={n} columns".format(
            k=len(basis_cols), n=design.n))
    return project_out(np.asarray(v, dtype=float),
                       design.X[:, basis_cols])


def normal_cdf(x):
    """ Standard normal distribution function through erfc """
    return 0.5 * special.erfc(-np.asarray(x, dtype=float) / math.sqrt(2.0))


def normal_pdf(x):
    x = np.asarray(x, dtype=float)
    return np.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)


def normal_quantile(q):
    """ Inverse standard normal distribution function

    A rational approximation (``scipy.special.ndtri``) refined by one
    Newton step against the erfc based distribution function.

    :param float q: probability in (0, 1)
    :rtype: float
    """
    if not 0.0 < q < 1.0:
        raise DomainError("quantile level must lie in (0, 1), "
                          "got {q!r}".format(q=q))
    t = float(special.ndtri(q))
    if q > 0.5:
        # refine on the upper tail, where 1 - q keeps its precision
        t += (float(normal_cdf(-t)) - (1.0 - q)) / float(normal_pdf(t))
    else:
        t -= (float(normal_cdf(t)) - q) / float(normal_pdf(t))
    return t


class RngStream:
    """ Reproducible stream of random numbers

    Keyed by ``(master_seed, stream_id)`` through a counter based Philox
    generator, so replications drawn on different threads do not depend
    on scheduling.
    """

    def __init__(self, master_seed, stream_id=0):
        self.master_seed = int(master_seed) & MASK64
        self.stream_id = int(stream_id) & MASK64
        seq = np.random.SeedSequence(self.master_seed,
                                     spawn_key=(self.stream_id,))
        self.generator = np.random.Generator(np.random.Philox(seq))

    def normal(self, size):
        return self.generator.standard_normal(size)

    def uniform(self, size):
        return self.generator.random(size)

    def choice(self, a, size, replace=False):
        return self.generator.choice(a, size=size, replace=replace)

    def __repr__(self):
        return "<RngStream seed={s} stream={i}>".format(s=self.master_seed,
                                                       i=self.stream_id)


def gaussian_vector(stream, length):
    """ i.i.d. standard normal draws from a stream

    :param stream: RngStream
    :param int length: number of draws, >= 1
    :rtype: numpy.ndarray
    """
    if length < 1:
        raise DomainError("length must be >= 1")
    return stream.normal(length)


def design_matrix(design):
    """ The matrix behind a StandardizedDesign, or an array as given """
    if isinstance(design, StandardizedDesign):
        return design.X
    return np.asarray(design, dtype=float)
