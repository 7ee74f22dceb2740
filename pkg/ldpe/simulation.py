#
# simulation.py - Seeded Monte Carlo study of the estimators
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

""" Simulation harness

Gaussian AR(1) designs, decaying coefficient vectors with a few spikes,
and per-replication fits of every estimator under study. Replication
``r`` draws from ``RngStream(master_seed, r)``, so the output of a run
does not depend on how many threads it used.

.. code::

    setting = simulation.SimSetting.preset('A', scale='desk', seed=7)
    result = simulation.run_setting(setting, threads=4)
    simulation.write_outputs(result, 'out/A')
"""

import csv
import json
import logging
import math
import os
import time

import numpy as np
import yaml

from ldpe import diagnostics, inference, numerics, scaled_lasso, utils
from ldpe import scores as score_builder
from ldpe.errors import (DomainError, LdpeError, MalformedInput,
                         ReplicationFailure)

log = logging.getLogger('ldpe.simulation')

LASSO = 'lasso'
SCALED_LASSO = 'scaled_lasso'
SCALED_LASSO_LSE = 'scaled_lasso_lse'
ORACLE = 'oracle'
LDPE = 'ldpe'
R_LDPE = 'r_ldpe'
T_ORACLE = 't_oracle'
T_LDPE = 't_ldpe'
ESTIMATORS = (LASSO, SCALED_LASSO, SCALED_LASSO_LSE, ORACLE, LDPE, R_LDPE,
              T_ORACLE, T_LDPE)

LABELS = {
    LASSO: 'Lasso',
    SCALED_LASSO: 'scLasso',
    SCALED_LASSO_LSE: 'scLasso-LSE',
    ORACLE: 'oracle',
    LDPE: 'LDPE',
    R_LDPE: 'R-LDPE',
    T_ORACLE: 'T-oracle',
    T_LDPE: 'T-LDPE',
}

# estimators with confidence intervals
INTERVALS = (ORACLE, LDPE, R_LDPE)
POINT_ESTIMATES = (LASSO, SCALED_LASSO, SCALED_LASSO_LSE, ORACLE, LDPE,
                   R_LDPE)
LOSS_ESTIMATORS = (LASSO, SCALED_LASSO, SCALED_LASSO_LSE, T_ORACLE, T_LDPE)

# (alpha_decay, rho)
SETTINGS = {
    'A': (2.0, 0.2),
    'B': (1.0, 0.2),
    'C': (2.0, 0.8),
    'D': (1.0, 0.8),
}
# (n, p, reps)
SCALES = {
    'desk': (100, 500, 50),
    'full': (200, 3000, 100),
}
SPIKE_HEIGHT = 3.0
MAX_FAILURE_RATE = 0.05


class SimSetting:
    """ One simulation experiment

    :param str label: ``A`` to ``D`` or a free name
    :param int n: sample size
    :param int p: number of columns
    :param float rho: AR(1) correlation of adjacent columns, |rho| < 1
    :param float alpha_decay: decay exponent of the small coefficients
    :param int reps: replications
    :param int master_seed: seed of every replication stream
    :param float level: confidence level of the intervals
    :param estimators: subset of :data:`ESTIMATORS`
    :param bool null: all coefficients zero
    :param int m: columns projected out by the restricted scores
    """

    def __init__(self, label, n, p, rho, alpha_decay, reps=1, master_seed=0,
                 level=0.95, estimators=ESTIMATORS, null=False, m=4):
        if not abs(rho) < 1:
            raise DomainError("rho must lie in (-1, 1), got {r!r}".format(
                r=rho))
        if alpha_decay < 1:
            raise DomainError("alpha_decay must be >= 1")
        if n < 4 or p < 3:
            raise DomainError("need n >= 4 and p >= 3")
        if reps < 1:
            raise DomainError("reps must be >= 1")
        if not 0 < level < 1:
            raise DomainError("level must lie in (0, 1)")
        unknown = set(estimators) - set(ESTIMATORS)
        if unknown:
            raise DomainError("unknown estimators {u}".format(
                u=sorted(unknown)))
        self.label = label
        self.n = int(n)
        self.p = int(p)
        self.rho = float(rho)
        self.alpha_decay = float(alpha_decay)
        self.reps = int(reps)
        self.master_seed = int(master_seed)
        self.level = float(level)
        self.estimators = tuple(e for e in ESTIMATORS if e in estimators)
        self.null = bool(null)
        self.m = int(m)

    @classmethod
    def preset(cls, label, scale='desk', seed=0, **overrides):
        """ One of the four standard settings at a named scale

        :param str label: ``A``, ``B``, ``C`` or ``D``
        :param str scale: ``desk`` (100, 500, 50 reps) or ``full``
                          (200, 3000, 100 reps)
        """
        try:
            alpha_decay, rho = SETTINGS[label]
            n, p, reps = SCALES[scale]
        except KeyError:
            raise DomainError("unknown setting {label!r} at scale "
                              "{s!r}".format(label=label, s=scale))
        kw = dict(n=n, p=p, rho=rho, alpha_decay=alpha_decay, reps=reps,
                  master_seed=seed)
        kw.update(overrides)
        return cls(label, **kw)

    @classmethod
    def from_dict(cls, data):
        """ Build from a mapping; a ``setting`` key names a preset the
        other keys override
        """
        data = dict(data)
        base = data.pop('setting', None)
        scale = data.pop('scale', 'desk')
        if 'seed' in data:
            data['master_seed'] = data.pop('seed')
        try:
            if base is not None:
                return cls.preset(str(base), scale=scale,
                                  seed=data.pop('master_seed', 0), **data)
            return cls(str(data.pop('label', 'custom')), **data)
        except TypeError as e:
            raise DomainError("bad simulation setting: {e}".format(e=e))

    @classmethod
    def from_yaml(cls, path):
        try:
            with open(path) as f:
                data = yaml.safe_load(f)
        except (IOError, OSError) as e:
            raise MalformedInput("cannot read setting file: {e}".format(
                e=e), path=path)
        except yaml.YAMLError as e:
            raise MalformedInput("invalid YAML: {e}".format(e=e), path=path)
        if not isinstance(data, dict):
            raise MalformedInput("setting file must hold a mapping",
                                 path=path)
        return cls.from_dict(data)

    def to_dict(self):
        return {'label': self.label, 'n': self.n, 'p': self.p,
                'rho': self.rho, 'alpha_decay': self.alpha_decay,
                'reps': self.reps, 'master_seed': self.master_seed,
                'level': self.level, 'estimators': list(self.estimators),
                'null': self.null, 'm': self.m}

    def __repr__(self):
        return ("<SimSetting {label} n={n} p={p} rho={r} alpha={a} "
                "reps={k}>".format(label=self.label, n=self.n, p=self.p,
                                   r=self.rho, a=self.alpha_decay,
                                   k=self.reps))


class ReplicationRecord:
    """ Everything one replication produced

    ``estimates``, ``lows`` and ``highs`` map an estimator name to a
    length p vector; ``covered[e][j]`` is True iff beta_j lies in the
    interval of estimator e. ``elapsed`` is logged, never written out.
    """

    def __init__(self, rep_id):
        self.rep_id = rep_id
        self.estimates = {}
        self.lows = {}
        self.highs = {}
        self.covered = {}
        self.losses = {}
        self.sigmas = {}
        self.adjustments = 0
        self.missing_scores = 0
        self.bias_violations = 0
        self.max_eta = float('nan')
        self.false_selections = 0
        self.elapsed = 0.0

    def add(self, name, estimate, beta, sigma=None, low=None, high=None):
        self.estimates[name] = estimate
        self.losses[name] = float(np.linalg.norm(estimate - beta))
        if sigma is not None:
            self.sigmas[name] = float(sigma)
        if low is not None:
            self.lows[name] = low
            self.highs[name] = high
            # NaN endpoints never cover
            self.covered[name] = (low <= beta) & (beta <= high)

    def widths(self, name):
        return self.highs[name] - self.lows[name]

    def __repr__(self):
        return "<ReplicationRecord {r} estimators={e}>".format(
            r=self.rep_id, e=sorted(self.estimates))


class SimulationResult:
    def __init__(self, setting, beta, spikes, records, failures):
        self.setting = setting
        self.beta = beta
        self.spikes = spikes
        self.records = records
        self.failures = failures
        self.summary = summarize(setting, beta, spikes, records, failures)


def generate_design(n, p, rho, stream):
    """ Rows with covariance (rho^|j-k|) through the AR(1) recursion

    x_1 = z_1, x_j = rho x_{j-1} + sqrt(1 - rho^2) z_j along each row,
    then every column scaled to squared norm n.

    :param stream: RngStream
    :returns: (raw matrix, StandardizedDesign)
    :rtype: tuple
    """
    if not abs(rho) < 1:
        raise DomainError("rho must lie in (-1, 1), got {r!r}".format(r=rho))
    Z = stream.normal((n, p))
    raw = np.empty((n, p))
    raw[:, 0] = Z[:, 0]
    c = math.sqrt(1.0 - rho * rho)
    for j in range(1, p):
        raw[:, j] = rho * raw[:, j - 1] + c * Z[:, j]
    return raw, numerics.standardize_columns(raw)


def spike_indices(p):
    """ ceil(p/2) + k ceil(p/10) for k = 0, 1, ... up to p, 0-based

    For p = 3000 these are columns 1500, 1800, ..., 3000 counted from 1.
    """
    start, step = -(-p // 2), -(-p // 10)
    return np.arange(start, p + 1, step) - 1


def generate_beta(p, alpha_decay, n):
    """ 3 lambda_univ / j^alpha_decay with 3 lambda_univ at the spikes

    :rtype: numpy.ndarray
    """
    if p < 2:
        raise DomainError("p must be >= 2")
    height = SPIKE_HEIGHT * scaled_lasso.lambda_univ(n, p)
    beta = height / np.arange(1, p + 1, dtype=float) ** alpha_decay
    beta[spike_indices(p)] = height
    return beta


def _oracle_fits(design, y, beta, eps, level):
    """ Neighbour oracle estimates, intervals and thresholds of every
    column
    """
    p = design.p
    est = np.full(p, np.nan)
    sig = np.full(p, np.nan)
    znorm = np.full(p, np.nan)
    for j in range(p):
        est[j], sig[j], znorm[j] = diagnostics.oracle_estimate(
            design, y, beta, eps, j)
    q = numerics.normal_quantile(1.0 - (1.0 - level) / 2.0)
    half = sig / znorm * q
    threshold = sig / znorm * numerics.normal_quantile(1.0 - 0.5 / p)
    return est, est - half, est + half, threshold


def run_replication(setting, beta, rep_id, threads=1):
    """ One draw of the design and noise, and every requested fit

    :param setting: SimSetting
    :param beta: true coefficients
    :param int rep_id: replication number, also its stream id
    :param int threads: workers for the per-column scores
    :rtype: ReplicationRecord
    """
    started = time.time()
    est = set(setting.estimators)
    stream = numerics.RngStream(setting.master_seed, rep_id)
    _, design = generate_design(setting.n, setting.p, setting.rho, stream)
    eps = numerics.gaussian_vector(stream, setting.n)
    y = design.X.dot(beta) + eps
    lam = scaled_lasso.lambda_univ(setting.n, setting.p)
    alpha = 1.0 - setting.level
    rec = ReplicationRecord(rep_id)

    if LASSO in est:
        fit = scaled_lasso.fit_lasso(design, y, lam)
        rec.add(LASSO, fit.beta_init, beta, sigma=fit.sigma_hat)
    if SCALED_LASSO in est:
        fit = scaled_lasso.fit_scaled_lasso(design, y, lam)
        rec.add(SCALED_LASSO, fit.beta_init, beta, sigma=fit.sigma_hat)
    init = None
    if est & {SCALED_LASSO_LSE, LDPE, R_LDPE, T_LDPE}:
        init = scaled_lasso.fit_scaled_lasso_lse(design, y, lam)
        if SCALED_LASSO_LSE in est:
            rec.add(SCALED_LASSO_LSE, init.beta_init, beta,
                    sigma=init.sigma_hat)

    if est & {ORACLE, T_ORACLE}:
        b_o, low, high, t_o = _oracle_fits(design, y, beta, eps,
                                           setting.level)
        if ORACLE in est:
            rec.add(ORACLE, b_o, beta, low=low, high=high)
        if T_ORACLE in est:
            rec.add(T_ORACLE, inference.hard_threshold(b_o, t_o), beta)

    etas = []
    for name, method in ((LDPE, score_builder.LDPE),
                         (R_LDPE, score_builder.R_LDPE)):
        if name not in est and not (name == LDPE and T_LDPE in est):
            continue
        settings = score_builder.ScoreSettings(method=method, m=setting.m)
        scoreset = score_builder.build_all_scores(design, settings, threads)
        fit = inference.ldpe_estimate(design, y, scoreset, init)
        rec.adjustments += len(scoreset.adjusted)
        rec.missing_scores += int((~fit.valid).sum())
        _, _, bad = inference.bias_bound_check(fit, beta, eps)
        rec.bias_violations += int(bad.size)
        etas.append(np.nanmax(fit.eta) if fit.valid.any() else np.nan)
        if name in est:
            low, high = inference.coordinate_intervals(fit, alpha)
            rec.add(name, fit.beta_hat, beta, sigma=fit.sigma_hat,
                    low=low, high=high)
        if name == LDPE:
            thr = inference.threshold_ldpe(fit, alpha=1.0)
            if T_LDPE in est:
                rec.add(T_LDPE, thr.estimates, beta, sigma=fit.sigma_hat)
            familywise = inference.threshold_ldpe(fit, alpha=alpha)
            rec.false_selections = int(np.sum(
                beta[familywise.selected] == 0))
    if etas:
        rec.max_eta = float(np.nanmax(etas))
    rec.elapsed = time.time() - started
    log.info("Replication {r} done in {t:.1f}s".format(r=rep_id,
                                                       t=rec.elapsed))
    return rec


def run_setting(setting, threads=1):
    """ Run every replication of a setting and summarize

    Replications are spread over ``threads`` workers; a replication
    that raises is recorded and left out of the summaries. More than
    5% failures abort the run.

    :rtype: SimulationResult
    :raises ReplicationFailure: too many replications failed
    """
    if setting.null:
        beta = np.zeros(setting.p)
        spikes = np.array([], dtype=int)
    else:
        beta = generate_beta(setting.p, setting.alpha_decay, setting.n)
        spikes = spike_indices(setting.p)
    inner = threads if setting.reps == 1 else 1
    log.info("Running {s} on {t} threads".format(s=setting, t=threads))

    def _one(rep_id):
        try:
            return run_replication(setting, beta, rep_id, threads=inner)
        except (LdpeError, np.linalg.LinAlgError) as e:
            log.warning("Replication {r} failed: {e}".format(r=rep_id, e=e))
            return e

    results = utils.parallel_map(_one, range(setting.reps), threads)
    records, failures = [], []
    for rep_id, res in enumerate(results):
        if isinstance(res, ReplicationRecord):
            records.append(res)
        else:
            failures.append((rep_id, str(res)))
    if len(failures) > MAX_FAILURE_RATE * setting.reps:
        raise ReplicationFailure(len(failures), setting.reps)
    return SimulationResult(setting, beta, spikes, records, failures)


def _num(x):
    x = float(x)
    return x if math.isfinite(x) else None


def _error_summary(errors):
    errors = np.asarray(errors, dtype=float)
    if errors.size == 0:
        return {'bias': None, 'sd': None, 'median_abs': None}
    return {'bias': _num(errors.mean()),
            'sd': _num(errors.std(ddof=1)) if errors.size > 1 else None,
            'median_abs': _num(np.median(np.abs(errors)))}


def _loss_summary(losses):
    losses = np.asarray(losses, dtype=float)
    return {'mean': _num(losses.mean()),
            'sd': _num(losses.std(ddof=1)) if losses.size > 1 else None,
            'median': _num(np.median(losses))}


def _stack(records, attr, name):
    return np.array([getattr(r, attr)[name] for r in records])


def per_index_curves(result):
    """ Coverage frequency, median width ratio and efficiency by column

    :returns: dict of curve name -> estimator -> length p vector
    """
    records = result.records
    est = result.setting.estimators
    curves = {'coverage': {}, 'width_ratio': {}, 'efficiency': {}}
    if not records:
        return curves
    for name in INTERVALS:
        if name in est:
            curves['coverage'][name] = _stack(records, 'covered',
                                              name).mean(axis=0)
    if ORACLE not in est:
        return curves
    oracle_w = np.array([r.widths(ORACLE) for r in records])
    oracle_mse = ((_stack(records, 'estimates', ORACLE) -
                   result.beta) ** 2).mean(axis=0)
    for name in (LDPE, R_LDPE):
        if name not in est:
            continue
        w = np.array([r.widths(name) for r in records])
        curves['width_ratio'][name] = np.median(w / oracle_w, axis=0)
        mse = ((_stack(records, 'estimates', name) -
                result.beta) ** 2).mean(axis=0)
        curves['efficiency'][name] = oracle_mse / mse
    return curves


def summarize(setting, beta, spikes, records, failures):
    """ Summary tables of a run

    * ``max_beta_errors``: bias, sd and median absolute error of the
      estimates at the spikes, pooled and per spike
    * ``coverage``: mean coverage over all coefficients and at the spikes
    * ``width_ratio``: median over replications and coefficients of the
      interval width against the oracle's
    * ``mse_ratio``: median over coefficients of the oracle MSE over the
      estimator MSE
    * ``l2_loss``: mean, sd and median l2 loss
    * ``counters``: score adjustments, bias bound violations, largest
      bias factor, failures and the familywise false selection rate

    Replications enter in ``rep_id`` order.
    """
    records = sorted(records, key=lambda r: r.rep_id)
    est = setting.estimators
    out = {'replications': len(records), 'failed': len(failures)}

    errors = {}
    for name in POINT_ESTIMATES:
        if name not in est or not records:
            continue
        E = _stack(records, 'estimates', name)[:, spikes] - beta[spikes]
        errors[LABELS[name]] = dict(
            _error_summary(E.ravel()),
            per_index={str(int(j) + 1): _error_summary(E[:, k])
                       for k, j in enumerate(spikes)})
    out['max_beta_errors'] = errors

    coverage = {}
    for name in INTERVALS:
        if name not in est or not records:
            continue
        C = _stack(records, 'covered', name)
        coverage[LABELS[name]] = {
            'all': _num(C.mean()),
            'maximal': _num(C[:, spikes].mean()) if spikes.size else None}
    out['coverage'] = coverage

    widths, mse = {}, {}
    if ORACLE in est and records:
        oracle_w = np.array([r.widths(ORACLE) for r in records])
        oracle_mse = ((_stack(records, 'estimates', ORACLE) -
                       beta) ** 2).mean(axis=0)
        for name in (LDPE, R_LDPE):
            if name not in est:
                continue
            ratio = np.array([r.widths(name) for r in records]) / oracle_w
            widths[LABELS[name]] = {
                'all': _num(np.nanmedian(ratio)),
                'maximal': (_num(np.nanmedian(ratio[:, spikes]))
                            if spikes.size else None)}
            eff = oracle_mse / ((_stack(records, 'estimates', name) -
                                 beta) ** 2).mean(axis=0)
            mse[LABELS[name]] = {
                'all': _num(np.nanmedian(eff)),
                'maximal': (_num(np.nanmedian(eff[spikes]))
                            if spikes.size else None)}
    out['width_ratio'] = widths
    out['mse_ratio'] = mse

    out['l2_loss'] = {LABELS[name]: _loss_summary([r.losses[name]
                                                   for r in records])
                      for name in LOSS_ESTIMATORS
                      if name in est and records}

    eta = [r.max_eta for r in records if not math.isnan(r.max_eta)]
    out['counters'] = {
        'adjustments': sum(r.adjustments for r in records),
        'missing_scores': sum(r.missing_scores for r in records),
        'bias_violations': sum(r.bias_violations for r in records),
        'max_eta': _num(max(eta)) if eta else None,
        'failed_replications': [{'rep': rep, 'error': msg}
                                for rep, msg in failures],
        'familywise_false_selection_rate': (
            _num(np.mean([r.false_selections > 0 for r in records]))
            if records else None),
    }
    out['capped_l1_sparsity'] = diagnostics.capped_l1_sparsity(
        beta, 1.0, setting.n, setting.p)
    return out


def _csv_rows(summary):
    """ Long form (table, row, column, value) of the summary tables """
    for table in ('max_beta_errors', 'coverage', 'width_ratio', 'mse_ratio',
                  'l2_loss'):
        for column, stats in summary[table].items():
            for row, value in stats.items():
                if row == 'per_index':
                    continue
                yield [table, row, column, '' if value is None else
                       utils.fmt(value)]


def _write_curve(path, header, columns):
    with utils.atomic_write(path) as f:
        w = csv.writer(f, lineterminator='\n')
        w.writerow(header)
        for row in zip(*columns):
            w.writerow([row[0]] + ['' if not math.isfinite(v) else
                                   utils.fmt(v) for v in row[1:]])


def write_outputs(result, out_dir):
    """ Write the output directory of a run

    settings.json, replications.csv (one row per replication, spike and
    estimator), summary_tables.json, summary_tables.csv and the per
    column curves plotdata_coverage.csv, plotdata_widths.csv and
    plotdata_eff.csv. Contents depend only on the setting.
    """
    def join(name):
        return os.path.join(out_dir, name)

    with utils.atomic_write(join('settings.json')) as f:
        json.dump(result.setting.to_dict(), f, indent=2, sort_keys=True)
        f.write('\n')

    with utils.atomic_write(join('replications.csv')) as f:
        w = csv.writer(f, lineterminator='\n')
        w.writerow(['rep', 'j', 'estimator', 'truth', 'estimate', 'ci_low',
                    'ci_high', 'covered'])
        for r in sorted(result.records, key=lambda r: r.rep_id):
            for j in result.spikes:
                for name in result.setting.estimators:
                    low = r.lows.get(name)
                    row = [r.rep_id, int(j) + 1, name,
                           utils.fmt(result.beta[j]),
                           utils.fmt(r.estimates[name][j])]
                    if low is None:
                        row += ['', '', '']
                    else:
                        row += [utils.fmt(low[j]),
                                utils.fmt(r.highs[name][j]),
                                int(r.covered[name][j])]
                    w.writerow(row)

    with utils.atomic_write(join('summary_tables.json')) as f:
        json.dump(result.summary, f, indent=2, sort_keys=True,
                  allow_nan=False)
        f.write('\n')
    with utils.atomic_write(join('summary_tables.csv')) as f:
        w = csv.writer(f, lineterminator='\n')
        w.writerow(['table', 'row', 'column', 'value'])
        w.writerows(_csv_rows(result.summary))

    curves = per_index_curves(result)
    index = np.arange(1, result.setting.p + 1)
    for fname, key in (('plotdata_coverage.csv', 'coverage'),
                       ('plotdata_widths.csv', 'width_ratio'),
                       ('plotdata_eff.csv', 'efficiency')):
        names = sorted(curves[key], key=ESTIMATORS.index)
        _write_curve(join(fname),
                     ['j', 'beta'] + [LABELS[n] for n in names],
                     [index, result.beta] + [curves[key][n] for n in names])
    log.info("Wrote simulation output to {d}".format(d=out_dir))
