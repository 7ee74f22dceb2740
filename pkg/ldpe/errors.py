#
# errors.py - Exceptions raised by ldpe
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

""" Exception hierarchy

Conditions that the library reports as flags on its result objects
(solver non-convergence, degenerate path points, refit fallback) are
only raised when a caller asks for a hard failure.
"""


class LdpeError(Exception):
    """ Base class of every ldpe error """


class DomainError(LdpeError, ValueError):
    """ An argument lies outside the domain of an operation """


class MalformedInput(LdpeError, ValueError):
    """ Input data could not be parsed

    :param str path: file being read
    :param int row: 1-based row, or None
    :param int col: 1-based column, or None
    """

    def __init__(self, message, path=None, row=None, col=None):
        self.path = path
        self.row = row
        self.col = col
        where = []
        if path is not None:
            where.append(str(path))
        if row is not None:
            where.append("row {r}".format(r=row))
        if col is not None:
            where.append("col {c}".format(c=col))
        if where:
            message = "{w}: {m}".format(w=", ".join(where), m=message)
        super().__init__(message)


class ZeroColumn(LdpeError):
    """ A design column has zero norm """

    def __init__(self, j):
        self.j = j
        super().__init__("column {j} has zero norm".format(j=j))


class NoConvergence(LdpeError):
    def __init__(self, max_iters, what="solver"):
        self.max_iters = max_iters
        super().__init__("{w} did not converge within {m} iterations".format(
            w=what, m=max_iters))


class DegenerateScore(LdpeError):
    """ |x_j^T z_j| fell below the degeneracy threshold """

    def __init__(self, j, lam):
        self.j = j
        self.lam = lam
        super().__init__("degenerate score for column {j} at "
                         "lambda={lam:.6g}".format(j=j, lam=lam))


class AllDegenerate(LdpeError):
    """ Every point on the lambda grid of column j is degenerate """

    def __init__(self, j):
        self.j = j
        super().__init__("every grid point is degenerate for "
                         "column {j}".format(j=j))


class DegenerateResponse(LdpeError):
    """ The residual collapsed to zero during the scaled Lasso """

    def __init__(self, residual_norm):
        self.residual_norm = residual_norm
        super().__init__("residual norm {r:.3g} collapsed; noise level "
                         "is not identifiable".format(r=residual_norm))


class ScoreMismatch(LdpeError):
    def __init__(self, expected, found):
        self.expected = expected
        self.found = found
        super().__init__("scores were built for design {f}, not "
                         "{e}".format(f=found[:12], e=expected[:12]))


class NegativeVariance(LdpeError):
    def __init__(self, variance):
        self.variance = variance
        super().__init__("contrast variance {v:.3g} is negative".format(
            v=variance))


class DegenerateOracle(LdpeError):
    def __init__(self, j):
        self.j = j
        super().__init__("oracle score for column {j} vanished".format(j=j))


class SizeError(LdpeError):
    """ Exact enumeration would exceed its bounds; use sampling mode """


class ReplicationFailure(LdpeError):
    """ Too many simulation replications failed """

    def __init__(self, failed, total):
        self.failed = failed
        self.total = total
        super().__init__("{f} of {t} replications failed".format(
            f=failed, t=total))
