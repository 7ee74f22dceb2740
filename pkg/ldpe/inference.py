#
# inference.py - Debiased estimates, covariance and intervals
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

""" Low-dimensional projection estimator

Every coefficient gets a one step correction of the initial estimate,

    beta_j = beta_init_j + z_j^T (y - X beta_init) / (z_j^T x_j),

whose noise part has covariance sigma^2 V with
V_jk = z_j^T z_k / (|z_j^T x_j| |z_k^T x_k|).
"""

import csv
import json
import logging
import math

import numpy as np

from ldpe import scaled_lasso, scores as score_builder, utils
from ldpe.errors import (DomainError, MalformedInput, NegativeVariance,
                         ScoreMismatch)
from ldpe.numerics import normal_cdf, normal_quantile

log = logging.getLogger('ldpe.inference')

FULL_V_LIMIT = 2000
PSD_TOL = 1e-10
BIAS_TOL = 1e-8
HARD = 'hard'
SOFT = 'soft'
CSV_HEADER = ['j', 'beta_init', 'beta_hat', 'tau', 'eta', 'ci_low',
              'ci_high']


class LdpeFit:
    """ Debiased estimate with everything needed for inference

    Columns without a score keep their initial estimate, have NaN tau and
    eta and ``valid[j]`` False; no interval is reported for them.
    """

    def __init__(self, beta_hat, beta_init, sigma_hat, tau, eta, valid,
                 Z, zx, design_hash, lambda0=None, method=None):
        self.beta_hat = beta_hat
        self.beta_init = beta_init
        self.sigma_hat = sigma_hat
        self.tau = tau
        self.eta = eta
        self.valid = valid
        self._Z = Z
        self._zx = zx
        self.design_hash = design_hash
        self.lambda0 = lambda0
        self.method = method
        self._V = None

    @property
    def p(self):
        return len(self.beta_hat)

    @property
    def n(self):
        return self._Z.shape[1]

    def covariance_block(self, idx):
        """ V restricted to the columns idx

        :param idx: column indices, all with a score
        :rtype: numpy.ndarray
        """
        idx = np.asarray(idx, dtype=int)
        missing = [int(j) for j in idx if not self.valid[j]]
        if missing:
            raise DomainError("no score for columns {m}".format(m=missing))
        W = self._Z[idx] / np.abs(self._zx[idx])[:, None]
        return W.dot(W.T)

    def V(self, force=False):
        """ Full p x p covariance, only for p <= 2000 unless forced """
        if self.p > FULL_V_LIMIT and not force:
            raise DomainError("full V for p={p} needs force=True".format(
                p=self.p))
        if self._V is None:
            W = np.zeros_like(self._Z)
            ok = self.valid
            W[ok] = self._Z[ok] / np.abs(self._zx[ok])[:, None]
            self._V = W.dot(W.T)
        return self._V

    def __repr__(self):
        return "<LdpeFit p={p} sigma={s:.4g} method={m}>".format(
            p=self.p, s=self.sigma_hat, m=self.method)


class IntervalEstimate:
    """ Interval point +/- half_width for the contrast a^T beta

    :param target: dict of column -> weight
    """

    def __init__(self, target, point, half_width, level):
        self.target = target
        self.point = point
        self.half_width = half_width
        self.level = level

    @property
    def low(self):
        return self.point - self.half_width

    @property
    def high(self):
        return self.point + self.half_width

    def covers(self, value):
        return self.low <= value <= self.high

    def __repr__(self):
        return "<IntervalEstimate {pt:.4g} +/- {hw:.4g} ({lv:.0%})>".format(
            pt=self.point, hw=self.half_width, lv=self.level)


class SelectionResult:
    def __init__(self, thresholds, selected, mode, estimates):
        self.thresholds = thresholds
        self.selected = selected
        self.mode = mode
        self.estimates = estimates

    def __repr__(self):
        return "<SelectionResult {m} selected={s}>".format(
            m=self.mode, s=list(self.selected))


def _as_scoreset(scores, design):
    if isinstance(scores, score_builder.ScoreSet):
        return scores
    scores = list(scores)
    return score_builder.ScoreSet(scores, {}, design.hash, None)


def ldpe_estimate(design, y, scores, init):
    """ Debiased estimate from scores and an initial fit

    :param design: StandardizedDesign
    :param y: response
    :param scores: ScoreSet, or a list with one ScoreVector (or None) per
                   column
    :param init: InitialFit on the same design and response
    :rtype: LdpeFit
    :raises ScoreMismatch: scores built on another design
    """
    scoreset = _as_scoreset(scores, design)
    if len(scoreset) != design.p:
        raise DomainError("expected {p} scores, got {k}".format(
            p=design.p, k=len(scoreset)))
    for s in scoreset:
        if s is not None and s.design_hash not in (None, design.hash):
            raise ScoreMismatch(design.hash, s.design_hash)
    X = design.X
    y = np.asarray(y, dtype=float)
    p, n = design.p, design.n
    valid = scoreset.valid
    Z = np.zeros((p, n))
    for s in scoreset:
        if s is not None:
            Z[s.j] = s.z
    zx = np.einsum('ij,ji->i', Z, X)
    residual = y - X.dot(init.beta_init)
    beta_hat = np.array(init.beta_init, dtype=float)
    beta_hat[valid] += Z[valid].dot(residual) / zx[valid]
    fit = LdpeFit(beta_hat, np.array(init.beta_init, dtype=float),
                  init.sigma_hat, scoreset.taus, scoreset.etas, valid, Z,
                  zx, design.hash, lambda0=init.lambda0, method=init.method)
    if not valid.all():
        log.warning("{k} coefficients have no score and no "
                    "interval".format(k=int((~valid).sum())))
    return fit


def _contrast(a, p):
    """ Normalize a contrast to (indices, weights) """
    if isinstance(a, dict):
        idx = np.array(sorted(a), dtype=int)
        w = np.array([a[j] for j in sorted(a)], dtype=float)
    else:
        a = np.asarray(a, dtype=float)
        if a.shape != (p,):
            raise DomainError("contrast has shape {s}, expected "
                              "({p},)".format(s=a.shape, p=p))
        idx = np.flatnonzero(a)
        w = a[idx]
    if idx.size == 0 or not np.any(w):
        raise DomainError("contrast must be nonzero")
    if idx.min() < 0 or idx.max() >= p:
        raise DomainError("contrast index out of range")
    return idx, w


def _check_level(alpha, upper=1.0):
    if not 0 < alpha < upper:
        raise DomainError("alpha must lie in (0, {u:g}), got "
                          "{a!r}".format(u=upper, a=alpha))


def confidence_interval(fit, a, alpha=0.05):
    """ Interval for a^T beta at level 1 - alpha

    Only the block of V on the support of a is formed.

    :param fit: LdpeFit
    :param a: contrast, a dict column -> weight or a dense vector
    :param float alpha: in (0, 1)
    :rtype: IntervalEstimate
    """
    _check_level(alpha)
    idx, w = _contrast(a, fit.p)
    var = float(w.dot(fit.covariance_block(idx)).dot(w))
    if var < -PSD_TOL:
        raise NegativeVariance(var)
    var = max(var, 0.0)
    point = float(w.dot(fit.beta_hat[idx]))
    half = fit.sigma_hat * normal_quantile(1 - alpha / 2) * math.sqrt(var)
    target = {int(j): float(v) for j, v in zip(idx, w)}
    return IntervalEstimate(target, point, half, 1 - alpha)


def coordinate_intervals(fit, alpha=0.05):
    """ (low, high) arrays of the per-coefficient intervals, NaN where a
    column has no score
    """
    _check_level(alpha)
    half = fit.sigma_hat * normal_quantile(1 - alpha / 2) * fit.tau
    return fit.beta_hat - half, fit.beta_hat + half


def simultaneous_intervals(fit, alpha=0.05):
    """ Bonferroni intervals for every coefficient with a score

    Each half width is sigma * tau_j * Phi^{-1}(1 - alpha / (2p)).

    :param float alpha: familywise level, in (0, 1]
    :returns: list of IntervalEstimate, one per valid column
    """
    if not 0 < alpha <= 1:
        raise DomainError("alpha must lie in (0, 1]")
    q = normal_quantile(1 - alpha / (2.0 * fit.p))
    out = []
    for j in np.flatnonzero(fit.valid):
        out.append(IntervalEstimate({int(j): 1.0}, float(fit.beta_hat[j]),
                                    fit.sigma_hat * fit.tau[j] * q,
                                    1 - alpha))
    return out


def soft_threshold(x, t):
    """ sgn(x) (|x| - t)_+ """
    x = np.asarray(x, dtype=float)
    return np.sign(x) * np.maximum(np.abs(x) - t, 0.0)


def hard_threshold(x, t):
    """ x 1{|x| > t} """
    x = np.asarray(x, dtype=float)
    return np.where(np.abs(x) > t, x, 0.0)


def threshold_ldpe(fit, alpha=1.0, mode=HARD, c_n=0.0):
    """ Thresholded estimate and selected set

    The thresholds are (1 + c_n) sigma tau_j Phi^{-1}(1 - alpha / (2p));
    ``alpha=1`` gives the plain Phi^{-1}(1 - 1/(2p)) threshold.

    :param str mode: ``hard`` or ``soft``
    :param float c_n: threshold inflation, >= 0
    :rtype: SelectionResult
    """
    _check_level(alpha, upper=2.0 * fit.p)
    if c_n < 0:
        raise DomainError("c_n must be nonnegative")
    if mode not in (HARD, SOFT):
        raise DomainError("mode must be hard or soft, got {m!r}".format(
            m=mode))
    q = normal_quantile(1 - alpha / (2.0 * fit.p))
    t = (1.0 + c_n) * fit.sigma_hat * fit.tau * q
    est = np.zeros(fit.p)
    ok = fit.valid
    rule = hard_threshold if mode == HARD else soft_threshold
    est[ok] = rule(fit.beta_hat[ok], t[ok])
    selected = np.flatnonzero(ok & (np.abs(fit.beta_hat) > np.where(
        ok, t, np.inf)))
    return SelectionResult(t, selected, mode, est)


def p_values(fit):
    """ Two sided p-values for beta_j = 0, NaN without a score """
    stat = np.abs(fit.beta_hat) / (fit.sigma_hat * fit.tau)
    return 2.0 * normal_cdf(-stat)


def bias_bound_check(fit, beta, eps, tol=BIAS_TOL):
    """ Compare the remainder of every coefficient with its bound

    With the true coefficients and noise known,

        |(beta_hat_j - beta_j) / tau_j - z_j^T eps / ||z_j||| <=
            eta_j ||beta_init - beta||_1

    holds exactly; only floating point slack ``tol`` is allowed.

    :returns: (remainders, bounds, violating columns); NaN and no check
              for columns without a score
    :rtype: tuple
    """
    beta = np.asarray(beta, dtype=float)
    ok = fit.valid
    Z = fit._Z[ok]
    norms = np.sqrt(np.einsum('ij,ij->i', Z, Z))
    remainder = np.full(fit.p, np.nan)
    remainder[ok] = np.abs((fit.beta_hat[ok] - beta[ok]) * fit._zx[ok] -
                           Z.dot(eps)) / norms
    bound = fit.eta * np.abs(fit.beta_init - beta).sum()
    bad = np.flatnonzero(ok & ~(remainder <= np.where(ok, bound, 0) + tol))
    if bad.size:
        log.error("Bias bound violated for columns {c}".format(
            c=bad.tolist()))
    return remainder, bound, bad


def run_pipeline(design, y, init_method=scaled_lasso.SCALED_LASSO_LSE,
                 lambda0=None, settings=None, threads=1, cache=None):
    """ Scores, initial fit and debiased estimate in one call

    :param lambda0: penalty level, the universal level when None
    :param cache: (optional) ScoreCache consulted before building scores
    :returns: (LdpeFit, ScoreSet, InitialFit)
    :rtype: tuple
    """
    settings = settings or score_builder.ScoreSettings()
    if lambda0 is None:
        lambda0 = scaled_lasso.lambda_univ(design.n, design.p)
    scoreset = cache.load(design, settings) if cache else None
    if scoreset is None:
        scoreset = score_builder.build_all_scores(design, settings, threads)
        if cache:
            cache.save(scoreset)
    init = scaled_lasso.initial_fit(design, y, lambda0, init_method)
    fit = ldpe_estimate(design, y, scoreset, init)
    log.info("Fitted {p} coefficients, sigma={s:.6g}, |S_init|={k}".format(
        p=design.p, s=init.sigma_hat, k=len(init.support)))
    return fit, scoreset, init


def _num(x):
    x = float(x)
    return x if math.isfinite(x) else None


def fit_rows(fit, alpha=0.05):
    """ One dict per coefficient, 1-based j, None for missing values """
    low, high = coordinate_intervals(fit, alpha)
    rows = []
    for j in range(fit.p):
        rows.append({'j': j + 1,
                     'beta_init': _num(fit.beta_init[j]),
                     'beta_hat': _num(fit.beta_hat[j]),
                     'tau': _num(fit.tau[j]),
                     'eta': _num(fit.eta[j]),
                     'ci_low': _num(low[j]),
                     'ci_high': _num(high[j])})
    return rows


def fit_to_dict(fit, alpha=0.05, seed=None, original_scales=None):
    """ JSON document of a fit

    With ``original_scales`` every coefficient also carries
    ``beta_hat_original``, the estimate in the unstandardized units.
    """
    rows = fit_rows(fit, alpha)
    if original_scales is not None:
        for row, s in zip(rows, original_scales):
            bh = row['beta_hat']
            row['beta_hat_original'] = None if bh is None else bh / s
    doc = {'n': fit.n, 'p': fit.p, 'lambda0': fit.lambda0,
           'sigma_hat': fit.sigma_hat, 'method': fit.method,
           'alpha': alpha, 'per_coefficient': rows,
           'design_hash': fit.design_hash}
    if seed is not None:
        doc['seed'] = seed
    return doc


def dump_fit_json(fit, f, alpha=0.05, seed=None, original_scales=None):
    json.dump(fit_to_dict(fit, alpha, seed, original_scales), f, indent=2,
              allow_nan=False)
    f.write('\n')


def dump_fit_csv(fit, f, alpha=0.05):
    """ One row per coefficient under the fixed CSV header """
    w = csv.writer(f, lineterminator='\n')
    w.writerow(CSV_HEADER)
    for row in fit_rows(fit, alpha):
        w.writerow([row['j']] + [
            '' if row[k] is None else utils.fmt(row[k])
            for k in CSV_HEADER[1:]])


def write_fit_json(fit, path, alpha=0.05, seed=None, original_scales=None):
    with utils.atomic_write(path) as f:
        dump_fit_json(fit, f, alpha, seed, original_scales)


def write_fit_csv(fit, path, alpha=0.05):
    with utils.atomic_write(path) as f:
        dump_fit_csv(fit, f, alpha)


def read_fit_csv(path):
    """ Parse a file written by :func:`write_fit_csv`

    :returns: list of row dicts, floats (None for empty fields)
    """
    rows = []
    with open(path) as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header != CSV_HEADER:
            raise MalformedInput("unexpected header {h}".format(h=header),
                                 path=path, row=1)
        for i, rec in enumerate(reader, start=2):
            if len(rec) != len(CSV_HEADER):
                raise MalformedInput("expected {k} fields".format(
                    k=len(CSV_HEADER)), path=path, row=i)
            row = {'j': int(rec[0])}
            for k, v in zip(CSV_HEADER[1:], rec[1:]):
                row[k] = float(v) if v else None
            rows.append(row)
    return rows
