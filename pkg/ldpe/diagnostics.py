#
# diagnostics.py - Design regularity and simulation benchmarks
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

""" Design diagnostics

* compatibility factor kappa^2(xi, S) over the cone
  ||u_{S^c}||_1 <= xi ||u_S||_1,
* sparse eigenvalues phi_-(m, S) and phi_+(m, S),
* the thresholded Gram matrix with its extreme eigenvalues,

plus the neighbour-oracle estimator and the capped-l1 sparsity used by
the simulations.
"""

from itertools import combinations, product
import logging
import math

import numpy as np
from scipy import sparse
from scipy.sparse import linalg as splinalg
from scipy.special import comb

from ldpe import numerics
from ldpe.errors import DegenerateOracle, DomainError, SizeError
from ldpe.scaled_lasso import lambda_univ

log = logging.getLogger('ldpe.diagnostics')

EXACT_MAX_S = 12
EXACT_MAX_BLOCK = 16
EXACT_MAX_SUBSETS = 10 ** 6
KAPPA_SAMPLES = 10 ** 5
EIGEN_SAMPLES = 10 ** 4
DENSE_EIG_MAX = 200
REL_TOL = 1e-6
MAX_PG_ITERS = 5000
EXACT = 'exact'
SAMPLING = 'sampling'


class RegularityReport:
    """ Diagnostics of one design for a candidate set S """

    def __init__(self, S, xi, kappa_sq_lower, kappa_sq_upper, phi_minus,
                 phi_plus, m, thresholded_gram_eigs, lambda1,
                 kappa_mode=EXACT, eigen_mode=EXACT, conditions=None):
        self.S = S
        self.xi = xi
        self.kappa_sq_lower = kappa_sq_lower
        self.kappa_sq_upper = kappa_sq_upper
        self.phi_minus = phi_minus
        self.phi_plus = phi_plus
        self.m = m
        self.thresholded_gram_eigs = thresholded_gram_eigs
        self.lambda1 = lambda1
        self.kappa_mode = kappa_mode
        self.eigen_mode = eigen_mode
        self.conditions = conditions or {}

    def to_dict(self):
        """ JSON ready form, S 1-based """
        return {
            'S': [int(j) + 1 for j in self.S],
            'xi': self.xi,
            'kappa_sq_lower': self.kappa_sq_lower,
            'kappa_sq_upper': self.kappa_sq_upper,
            'kappa_mode': self.kappa_mode,
            'phi_minus': self.phi_minus,
            'phi_plus': self.phi_plus,
            'eigen_mode': self.eigen_mode,
            'm': self.m,
            'thresholded_gram_eigs': list(self.thresholded_gram_eigs),
            'lambda1': self.lambda1,
            'conditions': self.conditions,
        }

    def __repr__(self):
        return ("<RegularityReport |S|={k} kappa^2 in [{lo:.4g}, {hi:.4g}] "
                "phi=({pm:.4g}, {pp:.4g})>".format(
                    k=len(self.S), lo=self.kappa_sq_lower,
                    hi=self.kappa_sq_upper, pm=self.phi_minus,
                    pp=self.phi_plus))


def _check_set(S, p):
    S = sorted(set(int(j) for j in S))
    if S and (S[0] < 0 or S[-1] >= p):
        raise DomainError("index set out of range 0..{p}".format(p=p - 1))
    return S


def project_simplex(w, radius=1.0):
    """ Euclidean projection onto {v >= 0, sum(v) = radius} """
    u = np.sort(w)[::-1]
    css = np.cumsum(u) - radius
    ind = np.arange(1, len(w) + 1)
    cond = u - css / ind > 0
    rho = ind[cond][-1]
    theta = css[cond][-1] / rho
    return np.maximum(w - theta, 0.0)


def project_l1_ball(v, radius):
    """ Euclidean projection onto {||v||_1 <= radius} """
    if np.abs(v).sum() <= radius:
        return v
    return np.sign(v) * project_simplex(np.abs(v), radius)


def _cone_minimum(X, S, Sc, signs, xi, L):
    """ min ||Xu||^2 / n with signs^T u_S = 1, signs * u_S >= 0 and
    ||u_{S^c}||_1 <= xi, by accelerated projected gradient

    :returns: (objective, Frank-Wolfe duality gap)
    """
    n = X.shape[0]
    k = len(S)

    def objective(u):
        r = X.dot(u)
        return r.dot(r) / n

    def gradient(u):
        return 2.0 * X.T.dot(X.dot(u)) / n

    def project(u):
        out = np.empty_like(u)
        out[S] = signs * project_simplex(signs * u[S])
        out[Sc] = project_l1_ball(u[Sc], xi)
        return out

    u = np.zeros(X.shape[1])
    u[S] = signs / k
    y = u.copy()
    t = 1.0
    f = objective(u)
    gap = float('inf')
    for it in range(1, MAX_PG_ITERS + 1):
        u_new = project(y - gradient(y) / L)
        t_new = (1.0 + math.sqrt(1.0 + 4.0 * t * t)) / 2.0
        y = u_new + ((t - 1.0) / t_new) * (u_new - u)
        u, t = u_new, t_new
        if it % 10 == 0 or it == MAX_PG_ITERS:
            g = gradient(u)
            f = objective(u)
            # linear minimization over the product of simplex and l1 ball
            v = np.zeros_like(u)
            gs = signs * g[S]
            v[S[int(np.argmin(gs))]] = signs[int(np.argmin(gs))]
            if len(Sc):
                gc = g[Sc]
                kc = int(np.argmax(np.abs(gc)))
                v[Sc[kc]] = -xi * np.sign(gc[kc])
            gap = max(float(g.dot(u - v)), 0.0)
            if gap <= REL_TOL * f or gap <= 1e-14:
                break
    return f, gap


def _kappa_exact(X, S, xi):
    p = X.shape[1]
    S_arr = np.array(S)
    Sc = np.setdiff1d(np.arange(p), S_arr)
    L = 2.0 * np.linalg.norm(X, 2) ** 2 / X.shape[0]
    if L == 0:
        return 0.0, 0.0
    best, certified = float('inf'), float('inf')
    # f(u) = f(-u), so the first sign can stay positive
    for rest in product((1.0, -1.0), repeat=len(S) - 1):
        signs = np.array((1.0,) + rest)
        f, gap = _cone_minimum(X, S_arr, Sc, signs, xi, L)
        best = min(best, f)
        certified = min(certified, max(f - gap, 0.0))
    k = len(S)
    upper = k * best
    lower = min(upper / (1.0 + 1e-4), k * certified)
    return lower, upper


def _kappa_sampled(X, S, xi, samples, stream):
    n, p = X.shape
    k = len(S)
    Sc = np.setdiff1d(np.arange(p), S)
    best = float('inf')
    remaining = int(samples)
    while remaining > 0:
        b = min(remaining, 2000)
        remaining -= b
        U = np.zeros((b, p))
        US = stream.normal((b, k))
        l1 = np.abs(US).sum(axis=1)
        U[:, S] = US
        if len(Sc):
            W = stream.normal((b, len(Sc)))
            size = xi * l1 * stream.uniform(b)
            W *= (size / np.abs(W).sum(axis=1))[:, None]
            U[:, Sc] = W
        R = U.dot(X.T)
        vals = k * np.einsum('ij,ij->i', R, R) / (n * l1 * l1)
        best = min(best, float(vals.min()))
    return best


def compatibility_factor(design, S, xi, mode=None, samples=KAPPA_SAMPLES,
                         stream=None):
    """ Bracket for the squared compatibility factor kappa^2(xi, S)

    Exact mode (|S| <= 12) enumerates the sign patterns of u_S and solves
    each convex subproblem by projected gradient; the lower end is
    certified by the duality gap. Sampling mode evaluates random cone
    directions and can only give an upper bound, so its lower end is 0.

    :param design: StandardizedDesign
    :param S: column indices
    :param float xi: cone aperture, >= 1
    :param str mode: ``exact``, ``sampling`` or None to choose by |S|
    :returns: (lower, upper)
    :rtype: tuple
    """
    if xi < 1:
        raise DomainError("xi must be >= 1, got {x!r}".format(x=xi))
    X = numerics.design_matrix(design)
    S = _check_set(S, X.shape[1])
    if not S:
        raise DomainError("S must be nonempty")
    if mode is None:
        mode = EXACT if len(S) <= EXACT_MAX_S else SAMPLING
    if mode == EXACT:
        if len(S) > EXACT_MAX_S:
            raise SizeError("exact compatibility factor needs |S| <= "
                            "{m}".format(m=EXACT_MAX_S))
        lower, upper = _kappa_exact(X, S, xi)
    elif mode == SAMPLING:
        stream = stream or numerics.RngStream(0, 0)
        lower, upper = 0.0, _kappa_sampled(X, S, xi, samples, stream)
    else:
        raise DomainError("unknown mode {m!r}".format(m=mode))
    log.debug("kappa^2({xi}, S={S}) in [{lo:.6g}, {hi:.6g}] ({m})".format(
        xi=xi, S=S, lo=lower, hi=upper, m=mode))
    return lower, upper


def _extreme_eigs(G, blocks):
    """ (min of smallest, max of largest) eigenvalue over index blocks """
    lo, hi = float('inf'), -float('inf')
    for start in range(0, len(blocks), 10000):
        idx = blocks[start:start + 10000]
        ev = np.linalg.eigvalsh(G[idx[:, :, None], idx[:, None, :]])
        lo = min(lo, float(ev[:, 0].min()))
        hi = max(hi, float(ev[:, -1].max()))
    return lo, hi


def sparse_eigenvalues(design, S, m, mode=EXACT, samples=EIGEN_SAMPLES,
                       stream=None):
    """ phi_-(m, S) and phi_+(m, S)

    phi_- is the smallest eigenvalue of X_B^T X_B / n over B containing S
    with at most m extra columns; phi_+ the largest eigenvalue over B
    disjoint from S with |B| <= m. By eigenvalue interlacing both extremes
    are reached with exactly m extra columns, which is all that is
    enumerated. Sampling mode looks at random subsets instead, bounding
    phi_- from above and phi_+ from below. With m = 0, phi_- is the
    smallest eigenvalue on S itself and phi_+ is 0.

    :param int m: extra columns, 0 <= m <= p - |S|
    :returns: (phi_minus, phi_plus)
    :raises SizeError: exact enumeration out of bounds
    """
    X = numerics.design_matrix(design)
    n, p = X.shape
    S = _check_set(S, p)
    pool = np.setdiff1d(np.arange(p), S)
    if not 0 <= m <= len(pool):
        raise DomainError("m must lie in 0..{k}, got {m}".format(
            k=len(pool), m=m))
    if mode not in (EXACT, SAMPLING):
        raise DomainError("unknown mode {m!r}".format(m=mode))
    if m == 0:
        if not S:
            raise DomainError("m = 0 needs a non-empty S")
        XS = X[:, S]
        return float(np.linalg.eigvalsh(XS.T.dot(XS) / n)[0]), 0.0
    count = comb(len(pool), m, exact=True)
    if mode == EXACT and (len(S) + m > EXACT_MAX_BLOCK or
                          count > EXACT_MAX_SUBSETS):
        raise SizeError("enumerating {c} subsets with |S|+m={k} is out of "
                        "bounds; use sampling mode".format(c=count,
                                                            k=len(S) + m))
    if mode == EXACT:
        extra = np.array(list(combinations(pool, m)), dtype=int)
    else:
        stream = stream or numerics.RngStream(0, 0)
        extra = np.array([np.sort(stream.choice(pool, m))
                          for _ in range(int(samples))], dtype=int)
    extra = extra.reshape(-1, m)

    # Gram block on the columns that take part, indices remapped into it
    cols = np.union1d(np.unique(extra), S).astype(int)
    G = X[:, cols].T.dot(X[:, cols]) / n
    extra = np.searchsorted(cols, extra)
    base = np.searchsorted(cols, np.array(S, dtype=int))
    with_S = np.hstack([np.tile(base, (len(extra), 1)), extra])
    phi_minus, _ = _extreme_eigs(G, with_S)
    _, phi_plus = _extreme_eigs(G, extra)
    log.debug("sparse eigenvalues m={m}: ({lo:.6g}, {hi:.6g}) over {c} "
              "subsets ({mode})".format(m=m, lo=phi_minus, hi=phi_plus,
                                        c=len(extra), mode=mode))
    return phi_minus, phi_plus


class ThresholdedGram:
    """ Thresholded Gram matrix with its extreme eigenvalues """

    def __init__(self, matrix, eig_min, eig_max, lambda1, conditions=None):
        self.matrix = matrix
        self.eig_min = eig_min
        self.eig_max = eig_max
        self.lambda1 = lambda1
        self.conditions = conditions

    @property
    def eigs(self):
        return (self.eig_min, self.eig_max)


def thresholded_gram(design, lambda1, s=None, xi=None, c_lower=None,
                     c_upper=None):
    """ Entries x_j^T x_k / n kept where |x_j^T x_k / n| >= lambda1

    The rule applies to the diagonal as well, so lambda1 > 1 leaves the
    zero matrix. Extreme eigenvalues come from Lanczos iterations once p
    exceeds 200 and from a dense solver below that. Given a sparsity
    ``s`` and cone aperture ``xi`` the sufficient conditions of
    :func:`gram_conditions` are evaluated too.

    :rtype: ThresholdedGram
    """
    if lambda1 < 0:
        raise DomainError("lambda1 must be nonnegative")
    X = numerics.design_matrix(design)
    G = X.T.dot(X) / X.shape[0]
    G[np.abs(G) < lambda1] = 0.0
    M = sparse.csr_matrix(G)
    p = G.shape[0]
    if M.nnz == 0:
        lo = hi = 0.0
    elif p <= DENSE_EIG_MAX:
        ev = np.linalg.eigvalsh(G)
        lo, hi = float(ev[0]), float(ev[-1])
    else:
        v0 = np.ones(p) / math.sqrt(p)
        hi = float(splinalg.eigsh(M, k=1, which='LA', tol=1e-8, v0=v0,
                                  return_eigenvectors=False)[0])
        lo = float(splinalg.eigsh(M, k=1, which='SA', tol=1e-8, v0=v0,
                                  return_eigenvectors=False)[0])
    conditions = None
    if s is not None and xi is not None:
        conditions = gram_conditions(s, xi, lambda1, lo, hi, c_lower,
                                     c_upper)
    return ThresholdedGram(M, lo, hi, lambda1, conditions=conditions)


def gram_conditions(s, xi, lambda1, eig_min, eig_max, c_lower=None,
                    c_upper=None):
    """ Sufficient conditions for the compatibility and sparse eigenvalue
    requirements from the thresholded Gram matrix

    With c_* (``c_lower``) and c^* (``c_upper``) defaulting to the observed
    extreme eigenvalues:

    * ``min_eig``: phi_min >= c_*
    * ``compatibility``: s lambda1 (1 + xi)^2 <= c_* / 2
    * ``max_eig``: phi_max <= c^*
    * ``sparse_eigen``: s lambda1 (1 + K) + lambda1 <= c_* / 2 with
      K = 2 xi^2 (c^* / c_* + 1/2)

    The first two give kappa^2(xi, S) >= c_* / 2 for |S| <= s; all four
    give phi_-(m, S) >= c_* / 2 as well.

    :rtype: dict
    """
    c_lower = eig_min if c_lower is None else c_lower
    c_upper = eig_max if c_upper is None else c_upper
    out = {'c_lower': c_lower, 'c_upper': c_upper,
           'min_eig': eig_min >= c_lower and c_lower > 0,
           'compatibility': s * lambda1 * (1 + xi) ** 2 <= c_lower / 2.0,
           'max_eig': eig_max <= c_upper}
    if c_lower > 0:
        K = 2.0 * xi * xi * (c_upper / c_lower + 0.5)
        out['sparse_eigen'] = s * lambda1 * (1 + K) + lambda1 <= c_lower / 2
    else:
        out['sparse_eigen'] = False
    out['kappa_bound_holds'] = out['min_eig'] and out['compatibility']
    out['all_hold'] = all(out[k] for k in ('min_eig', 'compatibility',
                                          'max_eig', 'sparse_eigen'))
    return out


def default_lambda1(n, p, M0=4.0):
    """ M0 sqrt(log p / n) """
    return M0 * math.sqrt(math.log(p) / n)


def regularity_report(design, S, xi=2.0, m=2, lambda1=None, s=None,
                      kappa_mode=None, eigen_mode=EXACT, c_lower=None,
                      c_upper=None, stream=None):
    """ Every design diagnostic for one candidate set

    :rtype: RegularityReport
    """
    X = numerics.design_matrix(design)
    n, p = X.shape
    S = _check_set(S, p)
    if m < 1:
        raise DomainError("the report needs m >= 1, got {m}".format(m=m))
    if lambda1 is None:
        lambda1 = default_lambda1(n, p)
    if kappa_mode is None:
        kappa_mode = EXACT if len(S) <= EXACT_MAX_S else SAMPLING
    lo, hi = compatibility_factor(design, S, xi, mode=kappa_mode,
                                  stream=stream)
    phi_minus, phi_plus = sparse_eigenvalues(design, S, m, mode=eigen_mode,
                                             stream=stream)
    s = len(S) if s is None else s
    tg = thresholded_gram(design, lambda1, s=s, xi=xi, c_lower=c_lower,
                          c_upper=c_upper)
    return RegularityReport(S, xi, lo, hi, phi_minus, phi_plus, m, tg.eigs,
                            lambda1, kappa_mode=kappa_mode,
                            eigen_mode=eigen_mode, conditions=tg.conditions)


def oracle_neighbours(j, p):
    """ K_j = {j-1, j, j+1}, shifted inwards at the two ends """
    if p < 3:
        raise DomainError("the neighbour oracle needs p >= 3")
    start = min(max(j - 1, 0), p - 3)
    return [start, start + 1, start + 2]


def oracle_estimate(design, y, true_beta, true_eps, j):
    """ Least squares estimate of beta_j knowing every beta_k outside the
    three nearest columns

    :returns: (beta_o, sigma_o, z_o_norm)
    :rtype: tuple
    :raises DegenerateOracle: x_j lies in the span of its neighbours
    """
    X = design.X
    n = design.n
    if n <= 3:
        raise DomainError("the oracle needs n > 3")
    K = oracle_neighbours(j, design.p)
    rest = [k for k in K if k != j]
    z = numerics.project_residual(design.column(j), rest, design)
    z_norm = float(np.linalg.norm(z))
    if z_norm < 1e-10 * math.sqrt(n):
        raise DegenerateOracle(j)
    y_k = y - X.dot(true_beta) + X[:, K].dot(true_beta[K])
    beta_o = float(z.dot(y_k)) / (z_norm * z_norm)
    eps_perp = numerics.project_residual(true_eps, K, design)
    sigma_o = float(np.linalg.norm(eps_perp)) / math.sqrt(n)
    return beta_o, sigma_o, z_norm


def capped_l1_sparsity(beta, sigma, n, p):
    """ sum_j min(|beta_j| / (sigma lambda_univ), 1) """
    if not sigma > 0:
        raise DomainError("sigma must be positive")
    lam = lambda_univ(n, p)
    return float(np.minimum(np.abs(beta) / (sigma * lam), 1.0).sum())


def oracle_interval(beta_o, sigma_o, z_o_norm, alpha=0.05):
    """ beta_o -/+ sigma_o / ||z_o|| * Phi^{-1}(1 - alpha/2)

    :returns: (low, high)
    """
    half = sigma_o / z_o_norm * numerics.normal_quantile(1.0 - alpha / 2.0)
    return beta_o - half, beta_o + half


def oracle_threshold(sigma_o, z_o_norm, p):
    """ Hard threshold sigma_o / ||z_o|| * Phi^{-1}(1 - 1/(2p)) """
    return sigma_o / z_o_norm * numerics.normal_quantile(1.0 - 0.5 / p)
