#
# cli.py - ldpe command line interface
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

""" Command line interface

Subcommands ``fit``, ``ci``, ``select``, ``scores``, ``simulate`` and
``diagnose``. Coefficient indices are 1-based on the command line and in
every output file.

Exit codes: 0 success, 2 malformed input or usage, 3 degenerate
response, 4 non-convergence or too many failed replications, 5 size
limits of exact enumeration exceeded.
"""

import argparse
import csv
import io
import json
import logging
import math
import os
import sys

import numpy as np

import ldpe
from ldpe import (config as ldpe_config, diagnostics, inference, numerics,
                  scaled_lasso, simulation, utils)
from ldpe import scores as score_builder
from ldpe.errors import (DegenerateResponse, DomainError, LdpeError,
                         MalformedInput, NoConvergence, ReplicationFailure,
                         SizeError, ZeroColumn)
from ldpe.log import setup_logger

log = logging.getLogger('ldpe.cli')

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DEGENERATE = 3
EXIT_FAILURE = 4
EXIT_SIZE = 5


def _position(text, offset, newline, comma):
    """ 1-based (row, col) of an offset into CSV text """
    start = text.rfind(newline, 0, offset) + 1
    return (text.count(newline, 0, start) + 1,
            text.count(comma, start, offset) + 1)


def read_matrix(path, header=False):
    """ Numeric CSV file as an n x p matrix

    :param bool header: skip the first line
    :raises MalformedInput: naming the 1-based row and column at fault
    """
    with open(path, 'rb') as f:
        data = f.read()
    try:
        text = data.decode('utf-8')
    except UnicodeDecodeError as e:
        row, col = _position(data, e.start, b'\n', b',')
        raise MalformedInput("not UTF-8 text", path=path, row=row, col=col)
    nul = text.find('\0')
    if nul >= 0:
        row, col = _position(text, nul, '\n', ',')
        raise MalformedInput("NUL byte", path=path, row=row, col=col)
    rows = []
    width = None
    reader = csv.reader(io.StringIO(text.lstrip('\ufeff'), newline=''))
    try:
        for i, rec in enumerate(reader, start=1):
            if header and i == 1:
                continue
            if not rec or all(not c.strip() for c in rec):
                continue
            if width is None:
                width = len(rec)
            elif len(rec) != width:
                raise MalformedInput("expected {w} fields, found {k}".format(
                    w=width, k=len(rec)), path=path, row=i)
            row = []
            for k, cell in enumerate(rec, start=1):
                try:
                    v = float(cell)
                except ValueError:
                    raise MalformedInput("not a number: {c!r}".format(
                        c=cell.strip()), path=path, row=i, col=k)
                if not math.isfinite(v):
                    raise MalformedInput("non-finite value", path=path,
                                         row=i, col=k)
                row.append(v)
            rows.append(row)
    except csv.Error as e:
        raise MalformedInput(str(e), path=path, row=reader.line_num)
    if not rows:
        raise MalformedInput("no data", path=path)
    return np.array(rows, dtype=float)


def read_response(path, n, header=False):
    """ Single column CSV file of n values """
    M = read_matrix(path, header)
    if M.shape[1] != 1:
        raise MalformedInput("response must have one column, found "
                             "{k}".format(k=M.shape[1]), path=path)
    if M.shape[0] != n:
        raise MalformedInput("response has {m} values, the design has {n} "
                             "rows".format(m=M.shape[0], n=n), path=path)
    return M[:, 0]


def _option(args, config, name):
    """ Command line value, else the configuration value """
    value = getattr(args, name, None)
    return config.get(name) if value is None else value


def resolve_lambda0(value, n, p, config):
    """ ``univ``, ``theory`` or a positive number """
    if value == 'univ':
        return scaled_lasso.lambda_univ(n, p)
    if value == 'theory':
        return scaled_lasso.lambda_theory(n, p, float(config['theory_a']),
                                          float(config['theory_eps']))
    try:
        lam = float(value)
    except (TypeError, ValueError):
        raise DomainError("lambda0 must be univ, theory or a number, got "
                          "{v!r}".format(v=value))
    if not lam > 0:
        raise DomainError("lambda0 must be positive")
    return lam


def _threads(args, config):
    value = args.threads or os.environ.get('LDPE_THREADS') or \
        config.get('threads')
    return utils.resolve_threads(value)


def load_data(args, config, response=True):
    """ (StandardizedDesign, y) from the positional file arguments """
    header = args.header or bool(config.get('header'))
    X = read_matrix(args.design, header)
    try:
        design = numerics.standardize_columns(
            X, center=args.center or bool(config.get('center')))
    except ZeroColumn as e:
        raise MalformedInput("column {j} is constant".format(j=e.j + 1),
                             path=args.design, col=e.j + 1)
    if not response:
        return design, None
    y = read_response(args.response, design.n, header)
    if design.center is not None:
        y = y - y.mean()
    return design, y


def _score_settings(args, config):
    return score_builder.ScoreSettings(
        method=_option(args, config, 'score_method'),
        kappa0=float(_option(args, config, 'kappa0')),
        kappa1=float(_option(args, config, 'kappa1')),
        m=int(_option(args, config, 'm')),
        grid_size=int(config['grid_size']),
        grid_ratio=float(config['grid_ratio']))


def _fit(args, config):
    design, y = load_data(args, config)
    lambda0 = resolve_lambda0(_option(args, config, 'lambda0'), design.n,
                              design.p, config)
    cache_path = _option(args, config, 'score_cache')
    cache = score_builder.ScoreCache(cache_path) if cache_path else None
    fit, scoreset, init = inference.run_pipeline(
        design, y, init_method=_option(args, config, 'init_method'),
        lambda0=lambda0, settings=_score_settings(args, config),
        threads=_threads(args, config), cache=cache)
    if not init.converged:
        raise NoConvergence(init.iterations, "scaled Lasso")
    return design, fit


def _emit_json(doc, out):
    if out:
        with utils.atomic_write(out) as f:
            json.dump(doc, f, indent=2, allow_nan=False)
            f.write('\n')
    else:
        json.dump(doc, sys.stdout, indent=2, allow_nan=False)
        sys.stdout.write('\n')


def _emit_csv(header, rows, out):
    def _write(f):
        w = csv.writer(f, lineterminator='\n')
        w.writerow(header)
        for row in rows:
            w.writerow(['' if v is None else
                        utils.fmt(v) if isinstance(v, float) else v
                        for v in row])
    if out:
        with utils.atomic_write(out) as f:
            _write(f)
    else:
        _write(sys.stdout)


def cmd_fit(args, config):
    """ Debiased estimates and per coefficient intervals """
    design, fit = _fit(args, config)
    alpha = float(_option(args, config, 'alpha'))
    if _option(args, config, 'format') == 'csv':
        if args.out:
            inference.write_fit_csv(fit, args.out, alpha)
        else:
            inference.dump_fit_csv(fit, sys.stdout, alpha)
        return EXIT_OK
    seed = int(_option(args, config, 'seed'))
    if args.out:
        inference.write_fit_json(fit, args.out, alpha, seed,
                                 design.original_scales)
    else:
        inference.dump_fit_json(fit, sys.stdout, alpha, seed,
                                design.original_scales)
    return EXIT_OK


def parse_contrast(text, p):
    """ ``"j:w,k:w"`` with 1-based indices into {j-1: w, k-1: w} """
    a = {}
    for tok in text.split(','):
        tok = tok.strip()
        if not tok:
            continue
        j, sep, w = tok.partition(':')
        if not sep:
            raise DomainError("contrast terms look like j:w, got "
                              "{t!r}".format(t=tok))
        idx = utils.parse_index_list(j, p)
        try:
            weight = float(w)
        except ValueError:
            raise DomainError("bad weight {w!r}".format(w=w))
        if len(idx) != 1:
            raise DomainError("bad index {j!r}".format(j=j))
        a[idx[0]] = a.get(idx[0], 0.0) + weight
    if not a:
        raise DomainError("empty contrast")
    return a


def _interval_doc(est):
    return {'target': {str(j + 1): w for j, w in sorted(est.target.items())},
            'point': est.point, 'half_width': est.half_width,
            'ci_low': est.low, 'ci_high': est.high, 'level': est.level}


def cmd_ci(args, config):
    """ Interval for a contrast, or Bonferroni intervals for all """
    design, fit = _fit(args, config)
    alpha = float(_option(args, config, 'alpha'))
    if args.simultaneous:
        intervals = inference.simultaneous_intervals(fit, alpha)
    elif args.contrast:
        intervals = [inference.confidence_interval(
            fit, parse_contrast(args.contrast, fit.p), alpha)]
    else:
        intervals = [inference.confidence_interval(fit, {int(j): 1.0},
                                                   alpha)
                     for j in np.flatnonzero(fit.valid)]
    docs = [_interval_doc(est) for est in intervals]
    if _option(args, config, 'format') == 'csv':
        header = ['target', 'point', 'half_width', 'ci_low', 'ci_high']
        rows = [[' '.join('{j}:{w}'.format(j=j, w=utils.fmt(w))
                          for j, w in d['target'].items()),
                 d['point'], d['half_width'], d['ci_low'], d['ci_high']]
                for d in docs]
        _emit_csv(header, rows, args.out)
    else:
        _emit_json({'alpha': alpha, 'simultaneous': bool(args.simultaneous),
                    'sigma_hat': fit.sigma_hat, 'intervals': docs}, args.out)
    return EXIT_OK


def cmd_select(args, config):
    """ Thresholded estimate and selected set """
    design, fit = _fit(args, config)
    alpha = 1.0 if args.alpha is None else args.alpha
    sel = inference.threshold_ldpe(fit, alpha=alpha, mode=args.mode,
                                   c_n=args.cn)
    chosen = set(int(j) for j in sel.selected)
    rows = [[j + 1, float(fit.beta_hat[j]), float(sel.thresholds[j]),
             float(sel.estimates[j]), int(j in chosen)]
            for j in range(fit.p)]
    for row in rows:
        row[2] = None if not math.isfinite(row[2]) else row[2]
    if _option(args, config, 'format') == 'csv':
        _emit_csv(['j', 'beta_hat', 'threshold', 'estimate', 'selected'],
                  rows, args.out)
    else:
        _emit_json({'mode': sel.mode, 'alpha': alpha, 'c_n': args.cn,
                    'selected': [j + 1 for j in sorted(chosen)],
                    'per_coefficient': [
                        dict(zip(('j', 'beta_hat', 'threshold', 'estimate',
                                  'selected'), row)) for row in rows]},
                   args.out)
    return EXIT_OK


def cmd_scores(args, config):
    """ Score summaries, optionally saved to a score cache """
    design, _ = load_data(args, config, response=False)
    settings = _score_settings(args, config)
    scoreset = score_builder.build_all_scores(design, settings,
                                              _threads(args, config))
    cache_path = _option(args, config, 'score_cache')
    if cache_path:
        score_builder.ScoreCache(cache_path).save(scoreset)
    rows = []
    for j, s in enumerate(scoreset):
        if s is None:
            rows.append([j + 1, None, None, None, None, None, ''])
            continue
        K = '' if s.restricted_set is None else ' '.join(
            str(int(k) + 1) for k in s.restricted_set)
        rows.append([j + 1, float(s.lambda_j), float(s.eta_j),
                     float(s.tau_j), float(s.eta_star),
                     int(s.eta_star_adjusted), K])
    header = ['j', 'lambda_j', 'eta_j', 'tau_j', 'eta_star', 'adjusted',
              'restricted_set']
    if _option(args, config, 'format') == 'csv':
        _emit_csv(header, rows, args.out)
    else:
        _emit_json({'method': settings.method, 'design_hash': design.hash,
                    'scores': [dict(zip(header, r)) for r in rows]},
                   args.out)
    return EXIT_OK


def cmd_simulate(args, config):
    """ Run one simulation setting into an output directory """
    seed = int(_option(args, config, 'seed'))
    overrides = {}
    if args.reps is not None:
        overrides['reps'] = args.reps
    if args.null:
        overrides['null'] = True
    if args.setting_file:
        setting = simulation.SimSetting.from_yaml(args.setting_file)
        if overrides:
            data = setting.to_dict()
            data.update(overrides)
            setting = simulation.SimSetting.from_dict(data)
    elif args.setting:
        setting = simulation.SimSetting.preset(
            args.setting, scale='full' if args.full else 'desk', seed=seed,
            m=int(_option(args, config, 'm')), **overrides)
    else:
        raise DomainError("give --setting or --setting-file")
    result = simulation.run_setting(setting, threads=_threads(args, config))
    simulation.write_outputs(result, args.out)
    counters = result.summary['counters']
    if counters['bias_violations']:
        log.error("{v} bias bound violations".format(
            v=counters['bias_violations']))
    return EXIT_OK


def cmd_diagnose(args, config):
    """ Regularity report of a design for a candidate set """
    design, _ = load_data(args, config, response=False)
    S = utils.parse_index_list(args.S, design.p)
    if not S:
        raise DomainError("--S must name at least one column")
    mode = diagnostics.SAMPLING if args.sampling else None
    report = diagnostics.regularity_report(
        design, S, xi=args.xi, m=args.m, lambda1=args.lambda1, s=args.s,
        kappa_mode=mode,
        eigen_mode=diagnostics.SAMPLING if args.sampling else
        diagnostics.EXACT,
        c_lower=args.c_lower, c_upper=args.c_upper,
        stream=numerics.RngStream(int(_option(args, config, 'seed')), 0))
    _emit_json(report.to_dict(), args.out)
    return EXIT_OK


def _common(parser):
    parser.add_argument('--config', metavar='FILE',
                        help="YAML configuration file")
    parser.add_argument('--threads', metavar='N',
                        help="worker threads or 'auto' (default "
                        "$LDPE_THREADS)")
    parser.add_argument('--seed', type=int, help="master seed")
    parser.add_argument('-o', '--out', metavar='PATH',
                        help="output file (stdout when omitted)")


def _data(parser, response=True):
    parser.add_argument('design', help="numeric CSV design matrix")
    if response:
        parser.add_argument('response', help="single column CSV response")
    parser.add_argument('--header', action='store_true', default=None,
                        help="skip one header line in the input files")
    parser.add_argument('--center', action='store_true', default=None,
                        help="center columns and response first")
    parser.add_argument('--format', choices=['json', 'csv'])


def _scoring(parser):
    parser.add_argument('--score', dest='score_method',
                        choices=score_builder.METHODS)
    parser.add_argument('--m', type=int,
                        help="columns projected out by r-ldpe")
    parser.add_argument('--kappa0', type=float)
    parser.add_argument('--kappa1', type=float)
    parser.add_argument('--score-cache', metavar='FILE',
                        help=".npz file of cached scores")


def _fitting(parser):
    _data(parser)
    _scoring(parser)
    parser.add_argument('--init', dest='init_method',
                        choices=['scaled-lasso', 'scaled-lasso-lse'])
    parser.add_argument('--lambda0',
                        help="univ, theory or a positive number")


def build_parser():
    parser = argparse.ArgumentParser(
        prog='ldpe',
        description="Debiased inference for high-dimensional linear "
        "regression")
    parser.add_argument('--version', action='version',
                        version='%(prog)s {v}'.format(v=ldpe.__version__))
    sub = parser.add_subparsers(dest='subcommand')

    p = sub.add_parser('fit', help="debiased estimates and intervals")
    _common(p)
    _fitting(p)
    p.add_argument('--alpha', type=float, help="1 - confidence level")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser('ci', help="contrast or simultaneous intervals")
    _common(p)
    _fitting(p)
    p.add_argument('--alpha', type=float)
    p.add_argument('--contrast', help="1-based terms j:w,k:w")
    p.add_argument('--simultaneous', action='store_true',
                   help="Bonferroni intervals for every coefficient")
    p.set_defaults(func=cmd_ci)

    p = sub.add_parser('select', help="thresholded estimates")
    _common(p)
    _fitting(p)
    p.add_argument('--alpha', type=float,
                   help="familywise level of the thresholds (default 1)")
    p.add_argument('--mode', choices=[inference.HARD, inference.SOFT],
                   default=inference.HARD)
    p.add_argument('--cn', type=float, default=0.0,
                   help="threshold inflation c_n >= 0")
    p.set_defaults(func=cmd_select)

    p = sub.add_parser('scores', help="score vectors of every column")
    _common(p)
    _data(p, response=False)
    _scoring(p)
    p.set_defaults(func=cmd_scores)

    p = sub.add_parser('simulate', help="run a simulation setting")
    _common(p)
    p.add_argument('--setting', choices=sorted(simulation.SETTINGS))
    p.add_argument('--setting-file', metavar='FILE',
                   help="YAML description of a custom setting")
    scale = p.add_mutually_exclusive_group()
    scale.add_argument('--desk', action='store_true',
                       help="n=100, p=500, 50 replications (default)")
    scale.add_argument('--full', action='store_true',
                       help="n=200, p=3000, 100 replications")
    p.add_argument('--reps', type=int)
    p.add_argument('--null', action='store_true',
                   help="all coefficients zero")
    p.add_argument('--m', type=int)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser('diagnose', help="design regularity report")
    _common(p)
    _data(p, response=False)
    p.add_argument('--S', required=True, help="1-based columns, e.g. 1,2")
    p.add_argument('--xi', type=float, default=2.0)
    p.add_argument('--m', type=int, default=2)
    p.add_argument('--lambda1', type=float,
                   help="Gram threshold (default 4 sqrt(log p / n))")
    p.add_argument('--s', type=float,
                   help="sparsity for the Gram conditions (default |S|)")
    p.add_argument('--c-lower', type=float)
    p.add_argument('--c-upper', type=float)
    p.add_argument('--sampling', action='store_true',
                   help="random search instead of exact enumeration")
    p.set_defaults(func=cmd_diagnose)
    return parser


def _fail(code, e):
    sys.stderr.write("ldpe: {e}\n".format(e=e))
    log.error("exit {c}: {e}".format(c=code, e=e))
    return code


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if not getattr(args, 'func', None):
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    setup_logger('ldpe')
    log.info("ldpe {v}: {a}".format(v=ldpe.__version__, a=vars(args)))
    try:
        config = ldpe_config.load_config(args.config)
        if args.subcommand == 'simulate' and not args.out:
            raise DomainError("simulate needs --out DIR")
        return args.func(args, config)
    except SizeError as e:
        return _fail(EXIT_SIZE, "{e} (try --sampling)".format(e=e))
    except DegenerateResponse as e:
        return _fail(EXIT_DEGENERATE, e)
    except (NoConvergence, ReplicationFailure) as e:
        return _fail(EXIT_FAILURE, e)
    except (MalformedInput, DomainError) as e:
        return _fail(EXIT_USAGE, e)
    except (IOError, OSError) as e:
        return _fail(EXIT_USAGE, e)
    except LdpeError as e:
        return _fail(EXIT_FAILURE, e)
