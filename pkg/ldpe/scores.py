#
# scores.py - Score vectors for the low-dimensional projection estimator
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

""" Score vectors

A score z_j is a relaxed orthogonalization of x_j against the other
columns: the residual of a Lasso fit of x_j on X_{-j}. The penalty is
chosen along the column's Lasso path in two steps:

1. find a feasible bound eta* on the bias factor (the default
   sqrt(2 log p), or (1 + kappa1) times the smallest bias factor on the
   grid when the default is infeasible), take the largest penalty meeting
   it and record its noise factor tau*;
2. move to the smallest penalty whose noise factor stays within
   (1 + kappa0) tau*.
"""

import logging
import math

import numpy as np

from ldpe import lasso, utils
from ldpe.errors import AllDegenerate, DomainError, LdpeError
from ldpe.numerics import project_residual

log = logging.getLogger('ldpe.scores')

LDPE = 'ldpe'
R_LDPE = 'r-ldpe'
PROJECTION = 'projection'
METHODS = (LDPE, R_LDPE, PROJECTION)


def default_eta_star(p):
    """ sqrt(2 log p) """
    return math.sqrt(2.0 * math.log(p))


class ScoreSettings:
    """ Tuning of the score search

    :param method: ``ldpe``, ``r-ldpe`` or ``projection``
    :param eta_star: bias factor bound, sqrt(2 log p) when None
    :param kappa0: allowed relative increase of the noise factor, in [0, 1]
    :param kappa1: inflation of an infeasible bias bound, in (0, 1]
    :param m: number of columns projected out for ``r-ldpe``
    """

    def __init__(self, method=LDPE, eta_star=None, kappa0=0.25, kappa1=0.25,
                 m=4, grid_size=lasso.GRID_SIZE, grid_ratio=lasso.GRID_RATIO):
        if method not in METHODS:
            raise DomainError("unknown score method {m!r}".format(m=method))
        if not 0 <= kappa0 <= 1:
            raise DomainError("kappa0 must lie in [0, 1]")
        if not 0 < kappa1 <= 1:
            raise DomainError("kappa1 must lie in (0, 1]")
        self.method = method
        self.eta_star = eta_star
        self.kappa0 = kappa0
        self.kappa1 = kappa1
        self.m = m
        self.grid_size = grid_size
        self.grid_ratio = grid_ratio

    @classmethod
    def from_config(cls, config):
        """ Build from a :func:`ldpe.config.load_config` style dict """
        return cls(method=config.get('score_method', LDPE),
                   kappa0=float(config.get('kappa0', 0.25)),
                   kappa1=float(config.get('kappa1', 0.25)),
                   m=int(config.get('m', 4)),
                   grid_size=int(config.get('grid_size', lasso.GRID_SIZE)),
                   grid_ratio=float(config.get('grid_ratio',
                                               lasso.GRID_RATIO)))

    def key(self):
        """ Identity of the settings for cache lookups """
        return (self.method, self.eta_star, self.kappa0, self.kappa1,
                self.m if self.method == R_LDPE else None,
                self.grid_size, self.grid_ratio)

    def __repr__(self):
        return "<ScoreSettings {k}>".format(k=self.key())


class ScoreVector:
    """ Score z_j with its penalty, bias factor and noise factor

    ``eta_star`` is the bias bound actually used and
    ``eta_star_adjusted`` tells whether the default was infeasible.
    For restricted scores ``restricted_set`` holds the columns projected
    out and ``eta_projected`` the bias factor of the projected problem.
    """

    def __init__(self, j, z, lambda_j, eta_j, tau_j, eta_star,
                 eta_star_adjusted=False, restricted_set=None,
                 eta_projected=None, method=LDPE, design_hash=None):
        self.j = j
        self.z = z
        self.lambda_j = lambda_j
        self.eta_j = eta_j
        self.tau_j = tau_j
        self.eta_star = eta_star
        self.eta_star_adjusted = eta_star_adjusted
        self.restricted_set = restricted_set
        self.eta_projected = eta_projected
        self.method = method
        self.design_hash = design_hash

    def __repr__(self):
        return ("<ScoreVector j={j} lambda={lam:.4g} eta={eta:.4g} "
                "tau={tau:.4g}{a}>".format(
                    j=self.j, lam=self.lambda_j, eta=self.eta_j,
                    tau=self.tau_j,
                    a=" adjusted" if self.eta_star_adjusted else ""))


def bias_noise_factors(design, j, z):
    """ (eta_j, tau_j) of z against the columns of the design

    :rtype: tuple
    """
    X = design.X
    z_norm = float(np.linalg.norm(z))
    corr = X.T.dot(z)
    xz = abs(float(corr[j]))
    corr[j] = 0.0
    eta = float(np.max(np.abs(corr))) / z_norm if design.p > 1 else 0.0
    return eta, z_norm / xz


def select_on_path(path, eta_star, kappa0, kappa1):
    """ Two step penalty search on a Lasso path

    :returns: (chosen PathPoint, eta* used, adjusted flag)
    :raises AllDegenerate: when no point on the path is usable
    """
    usable = path.usable()
    if not usable:
        raise AllDegenerate(path.target_col)
    pts = path.points
    adjusted = False
    feasible = [i for i in usable if pts[i].eta <= eta_star]
    if not feasible:
        floor = min(pts[i].eta for i in usable)
        eta_star = (1.0 + kappa1) * floor
        adjusted = True
        log.warning("Column {j}: bias bound infeasible on the grid, raised "
                    "to {e:.4g} (grid floor lambda={lam:.4g})".format(
                        j=path.target_col, e=eta_star,
                        lam=path.grid[usable[-1]]))
        feasible = [i for i in usable if pts[i].eta <= eta_star]
    first = feasible[0]
    eta_star = pts[first].eta
    tau_star = pts[first].tau
    limit = (1.0 + kappa0) * tau_star
    second = [i for i in usable if pts[i].tau <= limit][-1]
    return pts[second], eta_star, adjusted


def band_stop(eta_star, kappa0):
    """ Path stop rule for the two step search

    Once a point meets the bias bound, the path ends at the first point
    whose noise factor exceeds (1 + kappa0) times the noise factor there.
    The noise factor never shrinks as the penalty decreases, so no later
    point could be chosen. Without a feasible point the whole grid is
    computed.
    """
    limit = []

    def stop(points):
        pt = points[-1]
        if pt.degenerate:
            return False
        if not limit:
            if pt.eta <= eta_star:
                limit.append((1.0 + kappa0) * pt.tau)
            return False
        return pt.tau > limit[0]
    return stop


def build_score(design, j, eta_star_default=None, kappa0=0.25, kappa1=0.25,
                grid=None, grid_size=lasso.GRID_SIZE,
                grid_ratio=lasso.GRID_RATIO):
    """ Score of column j from its Lasso path

    :param design: StandardizedDesign
    :param int j: column index
    :param float eta_star_default: bias bound, sqrt(2 log p) when None
    :rtype: ScoreVector
    :raises AllDegenerate: every grid point is degenerate
    """
    if eta_star_default is None:
        eta_star_default = default_eta_star(design.p)
    path = lasso.lasso_path_for_column(
        design, j, grid=grid, grid_size=grid_size, grid_ratio=grid_ratio,
        stop=band_stop(eta_star_default, kappa0))
    pt, eta_star, adjusted = select_on_path(path, eta_star_default,
                                            kappa0, kappa1)
    log.debug("Column {j}: lambda={lam:.4g} eta={eta:.4g} "
              "tau={tau:.4g}".format(j=j, lam=pt.lam, eta=pt.eta,
                                     tau=pt.tau))
    return ScoreVector(j, pt.z, pt.lam, pt.eta, pt.tau, eta_star,
                       eta_star_adjusted=adjusted, method=LDPE,
                       design_hash=design.hash)


def restricted_set(design, j, m):
    """ The m columns most correlated with x_j, ties by ascending index """
    corr = np.abs(design.X.T.dot(design.column(j)))
    corr[j] = -np.inf
    order = np.argsort(-corr, kind='stable')
    return np.sort(order[:m])


def build_restricted_score(design, j, m=4, settings=None):
    """ Score of column j after projecting out its m closest columns

    x_j and the other columns are projected onto the orthogonal complement
    of the m columns most correlated with x_j; the two step search runs on
    the projected problem and the reported bias and noise factors are
    recomputed against the original columns.

    :rtype: ScoreVector
    :raises AllDegenerate: e.g. when x_j lies in the span of the m columns
    """
    settings = settings or ScoreSettings(method=R_LDPE, m=m)
    if not 1 <= m < design.n - 1:
        raise DomainError("m must satisfy 1 <= m < n - 1, got {m}".format(
            m=m))
    K = restricted_set(design, j, m)
    others = np.delete(np.arange(design.p), j)
    target = project_residual(design.column(j), K, design)
    predictors = project_residual(design.X[:, others], K, design)
    eta_star = settings.eta_star
    if eta_star is None:
        eta_star = default_eta_star(design.p)
    path = lasso.lasso_path(predictors, target, target_col=j,
                            grid_size=settings.grid_size,
                            grid_ratio=settings.grid_ratio,
                            stop=band_stop(eta_star, settings.kappa0))
    pt, eta_star, adjusted = select_on_path(path, eta_star, settings.kappa0,
                                            settings.kappa1)
    eta, tau = bias_noise_factors(design, j, pt.z)
    log.debug("Column {j} restricted to {K}: eta={eta:.4g} (projected "
              "{pe:.4g}) tau={tau:.4g}".format(j=j, K=list(K), eta=eta,
                                               pe=pt.eta, tau=tau))
    return ScoreVector(j, pt.z, pt.lam, eta, tau, eta_star,
                       eta_star_adjusted=adjusted, restricted_set=K,
                       eta_projected=pt.eta, method=R_LDPE,
                       design_hash=design.hash)


def build_projection_score(design, j):
    """ Unrelaxed score z_j = x_j projected off every other column

    Only defined when the other columns leave room, p - 1 < n. The
    penalty is reported as 0.

    :rtype: ScoreVector
    """
    if design.p - 1 >= design.n:
        raise DomainError("projection scores need p <= n")
    others = np.delete(np.arange(design.p), j)
    z = project_residual(design.column(j), others, design)
    if abs(float(z.dot(design.column(j)))) < lasso.DEGENERATE * design.n:
        raise AllDegenerate(j)
    eta, tau = bias_noise_factors(design, j, z)
    return ScoreVector(j, z, 0.0, eta, tau, eta, method=PROJECTION,
                       design_hash=design.hash)


def score_for(design, j, settings):
    """ Dispatch on ``settings.method`` """
    if settings.method == R_LDPE:
        return build_restricted_score(design, j, settings.m, settings)
    if settings.method == PROJECTION:
        return build_projection_score(design, j)
    return build_score(design, j, settings.eta_star, settings.kappa0,
                       settings.kappa1, grid_size=settings.grid_size,
                       grid_ratio=settings.grid_ratio)


class ScoreSet:
    """ Scores of every column of one design

    ``scores[j]`` is None for a column whose score failed; the error is
    kept in ``errors[j]``.
    """

    def __init__(self, scores, errors, design_hash, settings):
        self.scores = scores
        self.errors = errors
        self.design_hash = design_hash
        self.settings = settings

    def __len__(self):
        return len(self.scores)

    def __iter__(self):
        return iter(self.scores)

    def __getitem__(self, j):
        return self.scores[j]

    @property
    def valid(self):
        return np.array([s is not None for s in self.scores])

    @property
    def etas(self):
        return np.array([np.nan if s is None else s.eta_j
                         for s in self.scores])

    @property
    def taus(self):
        return np.array([np.nan if s is None else s.tau_j
                         for s in self.scores])

    @property
    def adjusted(self):
        """ Columns whose default bias bound was infeasible """
        return [s.j for s in self.scores
                if s is not None and s.eta_star_adjusted]

    def __repr__(self):
        return "<ScoreSet p={p} failed={f} adjusted={a}>".format(
            p=len(self.scores), f=len(self.errors), a=len(self.adjusted))


def build_all_scores(design, settings=None, threads=1):
    """ Scores for every column

    Columns are independent, so they are spread over a worker pool; the
    result does not depend on the number of threads. Per-column failures
    are collected, not raised.

    :param design: StandardizedDesign
    :param settings: ScoreSettings
    :param int threads: worker count
    :rtype: ScoreSet
    """
    settings = settings or ScoreSettings()
    if settings.method == LDPE:
        design.gram()

    def _one(j):
        try:
            return score_for(design, j, settings)
        except LdpeError as e:
            return e

    results = utils.parallel_map(_one, range(design.p), threads)
    scores, errors = [], {}
    for j, res in enumerate(results):
        if isinstance(res, ScoreVector):
            scores.append(res)
        else:
            log.warning("No score for column {j}: {e}".format(j=j, e=res))
            scores.append(None)
            errors[j] = res
    out = ScoreSet(scores, errors, design.hash, settings)
    log.info("Built {p} scores ({m}): {f} failed, {a} adjusted".format(
        p=design.p, m=settings.method, f=len(errors),
        a=len(out.adjusted)))
    return out


class ScoreCache:
    """ Score vectors saved in a ``.npz`` file

    The file is keyed by the content hash of the standardized design and
    the score settings; a file written for anything else is ignored.
    """

    def __init__(self, path):
        self.path = path

    def save(self, scoreset):
        p = len(scoreset)
        n = next((s.z.size for s in scoreset if s is not None), 0)
        Z = np.full((p, n), np.nan)
        cols = {k: np.full(p, np.nan) for k in
                ('lambda_j', 'eta_j', 'tau_j', 'eta_star', 'eta_projected')}
        adjusted = np.zeros(p, dtype=bool)
        m = scoreset.settings.m if scoreset.settings.method == R_LDPE else 0
        restricted = np.full((p, m), -1, dtype=np.int64)
        for j, s in enumerate(scoreset):
            if s is None:
                continue
            Z[j] = s.z
            for k in cols:
                v = getattr(s, k)
                cols[k][j] = np.nan if v is None else v
            adjusted[j] = s.eta_star_adjusted
            if s.restricted_set is not None:
                restricted[j, :len(s.restricted_set)] = s.restricted_set
        with utils.atomic_write(self.path, 'wb') as f:
            np.savez(f, Z=Z, adjusted=adjusted, restricted=restricted,
                     design_hash=np.array(scoreset.design_hash),
                     settings=np.array(repr(scoreset.settings.key())),
                     **cols)
        log.info("Saved {p} scores to {f}".format(p=p, f=self.path))

    def load(self, design, settings):
        """ Scores for this design and settings, or None on a miss

        :rtype: ScoreSet
        """
        try:
            data = np.load(self.path, allow_pickle=False)
        except (IOError, OSError, ValueError):
            return None
        with data:
            if (str(data['design_hash']) != design.hash or
                    str(data['settings']) != repr(settings.key())):
                log.info("Score cache {f} is stale".format(f=self.path))
                return None
            scores, errors = [], {}
            for j in range(design.p):
                if np.isnan(data['tau_j'][j]):
                    scores.append(None)
                    errors[j] = AllDegenerate(j)
                    continue
                K = data['restricted'][j]
                K = K[K >= 0] if K.size else None
                eta_p = float(data['eta_projected'][j])
                scores.append(ScoreVector(
                    j, np.array(data['Z'][j]), float(data['lambda_j'][j]),
                    float(data['eta_j'][j]), float(data['tau_j'][j]),
                    float(data['eta_star'][j]),
                    eta_star_adjusted=bool(data['adjusted'][j]),
                    restricted_set=K,
                    eta_projected=None if np.isnan(eta_p) else eta_p,
                    method=settings.method, design_hash=design.hash))
        log.info("Loaded scores from {f}".format(f=self.path))
        return ScoreSet(scores, errors, design.hash, settings)
