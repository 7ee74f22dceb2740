#
# lasso.py - Coordinate descent Lasso and per-column Lasso paths
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

""" Lasso solver

Minimizes ``||y - A b||^2 / (2n) + lam * ||b||_1`` by cyclic coordinate
descent. Coordinates are visited in ascending index order over an active
set; every ``ACTIVE_SWEEPS`` active sweeps a full pass re-checks the zero
coordinates and admits those whose gradient exceeds the penalty.

The sweeps are compiled with numba. Given a :class:`Covariance` the
solver works on inner products alone (covariance updates) and touches
the n x q matrix only to form the final residual.
"""

from collections import namedtuple
import logging

from numba import njit
import numpy as np

from ldpe.errors import DomainError, DegenerateScore

log = logging.getLogger('ldpe.lasso')

TOL = 1e-8
KKT_TOL = 1e-6
MAX_SWEEPS = 100000
ACTIVE_SWEEPS = 10
GRID_SIZE = 100
GRID_RATIO = 1e-3
DEGENERATE = 1e-10
# squared column norms / n at or below this are projected-away columns
DEAD_COLUMN = 1e-20

KKTReport = namedtuple('KKTReport', ['stationarity', 'bound'])


class LassoSolution:
    """ Result of :func:`solve_lasso` """

    def __init__(self, coefficients, residual, lam, iterations, converged):
        self.coefficients = coefficients
        self.residual = residual
        self.lam = lam
        self.iterations = iterations
        self.converged = converged

    @property
    def support(self):
        return np.flatnonzero(self.coefficients)

    def __repr__(self):
        return ("<LassoSolution lambda={lam:.4g} nonzero={k} "
                "sweeps={it} converged={c}>".format(
                    lam=self.lam, k=len(self.support),
                    it=self.iterations, c=self.converged))


class Covariance:
    """ Inner products of the predictors and the response, divided by n

    The predictor block is read out of a larger Gram matrix, so the
    per-column paths of one design share its cached ``X^T X / n``.

    :param gram: Gram matrix of a design, divided by n
    :param index: design columns making up the predictors, in order
    :param corr: predictors^T response / n
    """

    def __init__(self, gram, index, corr):
        self.gram = gram
        self.index = np.asarray(index, dtype=np.int64)
        self.corr = np.asarray(corr, dtype=float)

    @classmethod
    def of_design(cls, design, response):
        """ All columns of a StandardizedDesign against a response """
        y = np.asarray(response, dtype=float)
        return cls(design.gram(), np.arange(design.p),
                   design.X.T.dot(y) / design.n)

    @classmethod
    def of_column(cls, design, j):
        """ Column j against the remaining columns, from the Gram alone """
        others = np.delete(np.arange(design.p), j)
        G = design.gram()
        return cls(G, others, G[others, j])

    def diagonal(self):
        return self.gram[self.index, self.index]

    def block(self, rows, cols):
        """ Gram entries of predictor rows against predictor cols """
        return np.ascontiguousarray(
            self.gram[np.ix_(self.index[rows], self.index[cols])])

    def gradient(self, b):
        """ predictors^T (response - predictors b) / n """
        nz = np.flatnonzero(b)
        if not nz.size:
            return self.corr.copy()
        return self.corr - self.block(slice(None), nz).dot(b[nz])


@njit(cache=True, nogil=True)
def _soft(x, t):
    if x > t:
        return x - t
    if x < -t:
        return x + t
    return 0.0


@njit(cache=True, nogil=True)
def _sweep(A, r, b, idx, col_sq, lam, n):
    """ One cyclic pass over idx; updates r and b in place

    :returns: largest absolute coefficient change
    """
    delta = 0.0
    rows = A.shape[0]
    for k in idx:
        old = b[k]
        acc = 0.0
        for i in range(rows):
            acc += A[i, k] * r[i]
        new = _soft(acc / n + col_sq[k] * old, lam) / col_sq[k]
        if new != old:
            step = new - old
            for i in range(rows):
                r[i] -= step * A[i, k]
            b[k] = new
            delta = max(delta, abs(step))
    return delta


@njit(cache=True, nogil=True)
def _gram_sweep(G, grad, b, lam):
    """ One cyclic pass with covariance updates over an active block

    G is the active block of the Gram matrix; grad and b are the active
    entries of the gradient and coefficients, updated in place.

    :returns: largest absolute coefficient change
    """
    delta = 0.0
    m = b.shape[0]
    for k in range(m):
        old = b[k]
        new = _soft(grad[k] + G[k, k] * old, lam) / G[k, k]
        if new != old:
            step = new - old
            for i in range(m):
                grad[i] -= step * G[i, k]
            b[k] = new
            delta = max(delta, abs(step))
    return delta


def _stationarity(grad, b, lam):
    nz = b != 0
    if not nz.any():
        return 0.0
    return float(np.max(np.abs(grad[nz] - lam * np.sign(b[nz]))))


def lasso_objective(predictors, response, b, lam):
    """ ||y - A b||^2 / (2n) + lam * ||b||_1 """
    r = response - predictors.dot(b)
    return r.dot(r) / (2.0 * len(response)) + lam * np.abs(b).sum()


def solve_lasso(predictors, response, lam, warm_start=None, tol=TOL,
                max_iters=MAX_SWEEPS, kkt_tol=KKT_TOL, covariance=None):
    """ Lasso by coordinate descent

    Non-convergence is not raised: the solution comes back with
    ``converged=False`` and a warning is logged.

    :param predictors: n x q matrix
    :param response: vector of length n
    :param float lam: penalty level, > 0
    :param warm_start: (optional) starting coefficients of length q
    :param float tol: stop when a sweep moves no coefficient more than this
    :param int max_iters: sweep cap
    :param float kkt_tol: required stationarity on the support
    :param covariance: (optional) :class:`Covariance` of these predictors
                       and response; switches to covariance updates
    :rtype: LassoSolution
    """
    if not lam > 0:
        raise DomainError("lambda must be positive, got {lam!r}".format(
            lam=lam))
    A = np.asfortranarray(predictors, dtype=float)
    y = np.asarray(response, dtype=float)
    n, q = A.shape
    if y.shape != (n,):
        raise DomainError("response has shape {s}, expected ({n},)".format(
            s=y.shape, n=n))
    if covariance is not None and covariance.index.shape != (q,):
        raise DomainError("covariance covers {k} predictors, expected "
                          "{q}".format(k=covariance.index.size, q=q))
    if covariance is None:
        col_sq = np.einsum('ij,ij->j', A, A) / n
    else:
        col_sq = covariance.diagonal()
    live = col_sq > DEAD_COLUMN
    if warm_start is None:
        b = np.zeros(q)
    else:
        b = np.array(warm_start, dtype=float)
        if b.shape != (q,):
            raise DomainError("warm start has shape {s}, expected "
                              "({q},)".format(s=b.shape, q=q))
        b[~live] = 0.0
    r = y - A.dot(b)
    active = np.flatnonzero(b)
    block = None
    sweeps = 0
    last_delta = float('inf')
    converged = False

    while True:
        if covariance is None:
            grad = A.T.dot(r) / n
        else:
            grad = covariance.gradient(b)
        violators = np.flatnonzero(live & (b == 0) & (np.abs(grad) > lam))
        if violators.size:
            active = np.union1d(active, violators)
            block = None
        elif last_delta <= tol and _stationarity(grad, b, lam) <= kkt_tol:
            converged = True
            break
        if sweeps >= max_iters:
            break
        if covariance is not None and block is None:
            block = covariance.block(active, active)
        b_active = b[active]
        g_active = grad[active]
        for _ in range(ACTIVE_SWEEPS):
            if covariance is None:
                last_delta = _sweep(A, r, b, active, col_sq, lam, n)
            else:
                last_delta = _gram_sweep(block, g_active, b_active, lam)
            sweeps += 1
            if last_delta <= tol or sweeps >= max_iters:
                break
        if covariance is not None:
            b[active] = b_active

    if not converged:
        log.warning("Lasso did not converge in {m} sweeps at "
                    "lambda={lam:.4g}".format(m=max_iters, lam=lam))
    r = y - A.dot(b)
    return LassoSolution(b, r, lam, sweeps, converged)


def verify_kkt(sol, predictors, response):
    """ Recompute both Karush-Kuhn-Tucker violations from scratch

    :returns: (stationarity, bound), the largest
              |a_k^T r / n - lam sign(b_k)| over the support and the largest
              excess of |a_k^T r / n| over lam; both nonnegative
    :rtype: KKTReport
    """
    A = np.asarray(predictors, dtype=float)
    b = np.asarray(sol.coefficients, dtype=float)
    r = np.asarray(response, dtype=float) - A.dot(b)
    grad = A.T.dot(r) / A.shape[0]
    bound = 0.0
    if grad.size:
        bound = max(float(np.max(np.abs(grad))) - sol.lam, 0.0)
    return KKTReport(_stationarity(grad, b, sol.lam), bound)


def lambda_max(predictors, response):
    """ Smallest penalty with an all-zero Lasso solution """
    A = np.asarray(predictors, dtype=float)
    if A.shape[1] == 0:
        return 0.0
    return float(np.max(np.abs(A.T.dot(response)))) / A.shape[0]


def lambda_grid(lam_max, size=GRID_SIZE, ratio=GRID_RATIO):
    """ Geometric grid from lam_max down to ratio * lam_max

    A vanishing lam_max (response orthogonal to every predictor) gets a
    nominal top of 1; every point then has the null solution.

    :rtype: numpy.ndarray
    """
    if size < 2:
        raise DomainError("grid needs at least two points")
    if not 0 < ratio < 1:
        raise DomainError("grid ratio must lie in (0, 1)")
    if lam_max <= 1e-12:
        lam_max = 1.0
    return np.geomspace(lam_max, lam_max * ratio, size)


class PathPoint:
    """ Lasso fit of the target column on the others at one penalty

    :param lam: penalty level
    :param gamma: coefficients on the other columns
    :param z: residual of the target column
    :param eta: bias factor, max_k |x_k^T z| / ||z||
    :param tau: noise factor, ||z|| / |x_j^T z|
    """

    def __init__(self, lam, gamma, z, z_norm, eta, tau, degenerate,
                 converged=True):
        self.lam = lam
        self.gamma = gamma
        self.z = z
        self.z_norm = z_norm
        self.eta = eta
        self.tau = tau
        self.degenerate = degenerate
        self.converged = converged

    def __repr__(self):
        return ("<PathPoint lambda={lam:.4g} eta={eta:.4g} tau={tau:.4g}"
                "{d}>".format(lam=self.lam, eta=self.eta, tau=self.tau,
                              d=" degenerate" if self.degenerate else ""))


def path_point(predictors, target, sol):
    """ Score quantities of a Lasso fit of target on predictors """
    n = len(target)
    z = sol.residual
    z_norm = float(np.linalg.norm(z))
    xz = float(target.dot(z))
    degenerate = abs(xz) < DEGENERATE * n or z_norm == 0.0
    if z_norm > 0 and predictors.shape[1]:
        eta = float(np.max(np.abs(predictors.T.dot(z)))) / z_norm
    elif z_norm > 0:
        eta = 0.0
    else:
        eta = float('inf')
    tau = float('inf') if degenerate else z_norm / abs(xz)
    return PathPoint(sol.lam, sol.coefficients, z, z_norm, eta, tau,
                     degenerate, sol.converged)


class LassoPath:
    """ Path of one column regressed on the rest, largest penalty first """

    def __init__(self, target_col, grid, points):
        self.target_col = target_col
        self.grid = grid
        self.points = points

    @property
    def etas(self):
        return np.array([pt.eta for pt in self.points])

    @property
    def taus(self):
        return np.array([pt.tau for pt in self.points])

    @property
    def z_norms(self):
        return np.array([pt.z_norm for pt in self.points])

    def usable(self):
        """ Indices of non-degenerate points """
        return [i for i, pt in enumerate(self.points) if not pt.degenerate]

    def errors(self):
        """ A DegenerateScore for every flagged point """
        return [DegenerateScore(self.target_col, pt.lam)
                for pt in self.points if pt.degenerate]

    def monotonicity_violations(self, tol=1e-8):
        """ Grid steps where eta or ||z|| grew as the penalty decreased

        Both are nondecreasing functions of the penalty along an exact
        Lasso path.

        :returns: list of (index, quantity, increase)
        """
        out = []
        pts = [pt for pt in self.points if np.isfinite(pt.eta)]
        for i in range(1, len(pts)):
            for name in ('eta', 'z_norm'):
                rise = getattr(pts[i], name) - getattr(pts[i - 1], name)
                if rise > tol:
                    out.append((i, name, rise))
        return out

    def __repr__(self):
        return "<LassoPath column={j} points={k}>".format(
            j=self.target_col, k=len(self.points))


def lasso_path(predictors, target, grid=None, target_col=None,
               grid_size=GRID_SIZE, grid_ratio=GRID_RATIO, tol=TOL,
               stop=None, covariance=None):
    """ Warm started Lasso path of target on predictors

    :param predictors: n x q matrix
    :param target: vector of length n
    :param grid: (optional) strictly decreasing positive penalties
    :param stop: (optional) called with the points computed so far; a
                 true result ends the path early
    :param covariance: (optional) :class:`Covariance` of predictors and
                       target, shared by every solve on the path
    :rtype: LassoPath
    """
    A = np.asfortranarray(predictors, dtype=float)
    target = np.asarray(target, dtype=float)
    if grid is None:
        grid = lambda_grid(lambda_max(A, target), grid_size, grid_ratio)
    else:
        grid = np.asarray(grid, dtype=float)
        if np.any(grid <= 0) or np.any(np.diff(grid) >= 0):
            raise DomainError("grid must be strictly decreasing and "
                              "positive")
    b = np.zeros(A.shape[1])
    points = []
    for lam in grid:
        sol = solve_lasso(A, target, lam, warm_start=b, tol=tol,
                          covariance=covariance)
        b = sol.coefficients
        pt = path_point(A, target, sol)
        if pt.degenerate:
            log.debug("Degenerate score for column {j} at lambda="
                      "{lam:.4g}".format(j=target_col, lam=lam))
        points.append(pt)
        if stop is not None and stop(points):
            break
    path = LassoPath(target_col, grid[:len(points)], points)
    bad = path.monotonicity_violations()
    if bad:
        log.debug("Column {j}: path not monotone at {b}".format(
            j=target_col, b=bad[:3]))
    return path


def lasso_path_for_column(design, j, grid=None, grid_size=GRID_SIZE,
                          grid_ratio=GRID_RATIO, stop=None):
    """ Lasso path of x_j on the remaining columns

    The default grid runs geometrically from max_{k != j} |x_k^T x_j| / n
    down three decades. Every solve runs on covariance updates drawn
    from the cached Gram matrix of the design.

    :param design: StandardizedDesign
    :param int j: target column
    :rtype: LassoPath
    """
    A, _ = design.without(j)
    covariance = Covariance.of_column(design, j)
    return lasso_path(A, design.column(j), grid=grid, target_col=j,
                      grid_size=grid_size, grid_ratio=grid_ratio,
                      stop=stop, covariance=covariance)
