#
# scaled_lasso.py - Joint estimation of coefficients and noise level
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

""" Initial estimators: scaled Lasso, scaled Lasso with least squares
refit, and the plain Lasso at a fixed penalty.
"""

import logging
import math

import numpy as np
from scipy import linalg

from ldpe import lasso
from ldpe.errors import DomainError, DegenerateResponse
from ldpe.numerics import StandardizedDesign, design_matrix

log = logging.getLogger('ldpe.scaled_lasso')

SIGMA_TOL = 1e-7
MAX_OUTER = 50
COLLAPSE = 1e-12

SCALED_LASSO = 'scaled_lasso'
SCALED_LASSO_LSE = 'scaled_lasso_lse'
LASSO = 'lasso'


class InitialFit:
    """ Initial estimate of the coefficients and the noise level

    :param beta_init: coefficients, zero off ``support``
    :param sigma_hat: noise level estimate
    :param support: selected set of the scaled Lasso
    :param lambda0: penalty level the fit was computed with
    :param method: one of ``scaled_lasso``, ``scaled_lasso_lse``, ``lasso``
    :param refit_fallback: the least squares refit was skipped because the
                           selected set had n or more columns
    """

    def __init__(self, beta_init, sigma_hat, support, lambda0, method,
                 refit_fallback=False, converged=True, iterations=0):
        self.beta_init = beta_init
        self.sigma_hat = sigma_hat
        self.support = support
        self.lambda0 = lambda0
        self.method = method
        self.refit_fallback = refit_fallback
        self.converged = converged
        self.iterations = iterations

    def __repr__(self):
        return ("<InitialFit {m} sigma={s:.4g} |S|={k}{f}>".format(
            m=self.method, s=self.sigma_hat, k=len(self.support),
            f=" fallback" if self.refit_fallback else ""))


def lambda_univ(n, p):
    """ Universal penalty level sqrt((2/n) log p)

    :rtype: float
    """
    if n < 1:
        raise DomainError("n must be >= 1")
    if p < 2:
        raise DomainError("p must be >= 2 for the universal penalty")
    return math.sqrt(2.0 / n * math.log(p))


def lambda_theory(n, p, A=1.1, eps=1.0):
    """ Penalty A * sqrt((2/n) log(p/eps)) used by the error bounds """
    if n < 1 or A <= 0 or eps <= 0 or p / eps <= 1:
        raise DomainError("need n >= 1, A > 0 and p/eps > 1")
    return A * math.sqrt(2.0 / n * math.log(p / eps))


def scaled_lasso_objective(design, y, b, sigma, lambda0):
    """ ||y - Xb||^2 / (2 sigma n) + sigma / 2 + lambda0 ||b||_1 """
    X = design_matrix(design)
    r = y - X.dot(b)
    return (r.dot(r) / (2.0 * sigma * len(y)) + sigma / 2.0 +
            lambda0 * np.abs(b).sum())


def _covariance(design, y):
    """ Covariance updates from the Gram cache of a StandardizedDesign """
    if isinstance(design, StandardizedDesign) and \
            np.shape(y) == (design.n,):
        return lasso.Covariance.of_design(design, y)
    return None


def fit_scaled_lasso(design, y, lambda0, tol=SIGMA_TOL,
                     max_outer=MAX_OUTER):
    """ Scaled Lasso by alternating minimization

    Given sigma the coefficients solve the Lasso at penalty sigma*lambda0
    (warm started); given the coefficients sigma = ||y - Xb|| / sqrt(n).
    The loop starts from sigma = ||y|| / sqrt(n) and stops when sigma
    moves by at most ``tol`` relative. Coordinate descent tolerances are
    taken relative to the scale of y so the fit is scale equivariant.

    :param design: StandardizedDesign
    :param y: response, length n
    :param float lambda0: penalty level, > 0
    :rtype: InitialFit
    :raises DegenerateResponse: when the residual collapses to zero
    """
    if not lambda0 > 0:
        raise DomainError("lambda0 must be positive")
    X = design_matrix(design)
    y = np.asarray(y, dtype=float)
    n = X.shape[0]
    y_norm = float(np.linalg.norm(y))
    if y_norm == 0:
        raise DegenerateResponse(0.0)
    scale = y_norm / math.sqrt(n)
    sigma = scale
    covariance = _covariance(design, y)
    b = np.zeros(X.shape[1])
    converged = False
    it = 0
    for it in range(1, max_outer + 1):
        sol = lasso.solve_lasso(X, y, sigma * lambda0, warm_start=b,
                                tol=lasso.TOL * scale,
                                kkt_tol=lasso.KKT_TOL * scale,
                                covariance=covariance)
        b = sol.coefficients
        r_norm = float(np.linalg.norm(sol.residual))
        if r_norm < COLLAPSE * y_norm:
            raise DegenerateResponse(r_norm)
        new_sigma = r_norm / math.sqrt(n)
        change = abs(new_sigma - sigma) / sigma
        sigma = new_sigma
        log.debug("scaled Lasso iteration {i}: sigma={s:.8g} "
                  "|S|={k}".format(i=it, s=sigma, k=len(sol.support)))
        if change <= tol:
            converged = True
            break
    if not converged:
        log.warning("Scaled Lasso stopped after {m} outer iterations "
                    "without converging".format(m=max_outer))
    return InitialFit(b, sigma, np.flatnonzero(b), lambda0, SCALED_LASSO,
                      converged=converged, iterations=it)


def fit_scaled_lasso_lse(design, y, lambda0, **kwargs):
    """ Least squares refit on the scaled Lasso selected set

    With S the scaled Lasso support and |S| < n, the coefficients are the
    (minimum norm) least squares fit on the columns in S and
    sigma = ||y - Xb|| / sqrt(n - |S|). When |S| >= n the scaled Lasso fit
    is returned with ``refit_fallback`` set.

    :rtype: InitialFit
    """
    first = fit_scaled_lasso(design, y, lambda0, **kwargs)
    X = design_matrix(design)
    y = np.asarray(y, dtype=float)
    n = X.shape[0]
    S = first.support
    if len(S) >= n:
        log.warning("Selected set has {k} >= n={n} columns; keeping the "
                    "scaled Lasso fit".format(k=len(S), n=n))
        return InitialFit(first.beta_init, first.sigma_hat, S, lambda0,
                          SCALED_LASSO_LSE, refit_fallback=True,
                          converged=first.converged,
                          iterations=first.iterations)
    beta = np.zeros(X.shape[1])
    if len(S):
        coef, _, rank, _ = linalg.lstsq(X[:, S], y, lapack_driver='gelsd')
        beta[S] = coef
        if rank < len(S):
            log.debug("Refit block is rank deficient ({r} < {k})".format(
                r=rank, k=len(S)))
    r = y - X.dot(beta)
    sigma = float(np.linalg.norm(r)) / math.sqrt(n - len(S))
    return InitialFit(beta, sigma, S, lambda0, SCALED_LASSO_LSE,
                      converged=first.converged, iterations=first.iterations)


def fit_lasso(design, y, lam):
    """ Plain Lasso at a fixed penalty, with sigma = ||y - Xb|| / sqrt(n)

    :rtype: InitialFit
    """
    X = design_matrix(design)
    y = np.asarray(y, dtype=float)
    scale = max(float(np.linalg.norm(y)) / math.sqrt(len(y)), 1e-300)
    sol = lasso.solve_lasso(X, y, lam, tol=lasso.TOL * scale,
                            kkt_tol=lasso.KKT_TOL * scale,
                            covariance=_covariance(design, y))
    sigma = float(np.linalg.norm(sol.residual)) / math.sqrt(len(y))
    return InitialFit(sol.coefficients, sigma, sol.support, lam, LASSO,
                      converged=sol.converged, iterations=sol.iterations)


INITIAL_FITS = {
    SCALED_LASSO: fit_scaled_lasso,
    SCALED_LASSO_LSE: fit_scaled_lasso_lse,
}


def initial_fit(design, y, lambda0, method=SCALED_LASSO_LSE):
    """ Dispatch on the initial estimator name

    Accepts ``scaled-lasso`` style names as used on the command line.
    """
    key = method.replace('-', '_')
    try:
        fit = INITIAL_FITS[key]
    except KeyError:
        raise DomainError("unknown initial estimator {m!r}".format(m=method))
    return fit(design, y, lambda0)
