# Copyright (C) 2024 txQKalman Developers
#
# Permission is hereby granted, free of charge, to any person obtaining
# a copy of this software and associated documentation files (the
# "Software"), to deal in the Software without restriction, including
# without limitation the rights to use, copy, modify, merge, publish,
# distribute, sublicense, and/or sell copies of the Software, and to
# permit persons to whom the Software is furnished to do so, subject to
# the following conditions:
#
# The above copyright notice and this permission notice shall be
# included in all copies or substantial portions of the Software.
#
# THE SOFTWARE IS PROVIDED "AS IS", WITHOUT WARRANTY OF ANY KIND,
# EXPRESS OR IMPLIED, INCLUDING BUT NOT LIMITED TO THE WARRANTIES OF
# MERCHANTABILITY, FITNESS FOR A PARTICULAR PURPOSE AND NONINFRINGEMENT.
# IN NO EVENT SHALL THE AUTHORS OR COPYRIGHT HOLDERS BE LIABLE FOR ANY
# CLAIM, DAMAGES OR OTHER LIABILITY, WHETHER IN AN ACTION OF CONTRACT,
# TORT OR OTHERWISE, ARISING FROM, OUT OF OR IN CONNECTION WITH THE
# SOFTWARE OR THE USE OR OTHER DEALINGS IN THE SOFTWARE.
"""
Dense complex matrix primitives.

Every matrix handled by txQKalman is a two-dimensional C{numpy} array of
dtype C{complex128}. Tolerances are relative to the Frobenius norm so that
the same thresholds work whatever value of hbar a model uses.
"""

import numpy as np
from scipy import linalg


HERMITIAN_TOLERANCE = 1e-10
PSD_TOLERANCE = 1e-10
HPD_TOLERANCE = 1e-12


class MatrixError(ValueError):
    """A matrix does not meet the precondition of an operation."""


class DimensionError(MatrixError):
    """Shapes do not conform."""


class NotPositiveDefiniteError(MatrixError):
    """A Hermitian matrix has an eigenvalue below the accepted floor."""

    def __init__(self, message, min_eigenvalue):
        super(NotPositiveDefiniteError, self).__init__(
            "%s (minimum eigenvalue %.6g)" % (message, min_eigenvalue))
        self.min_eigenvalue = min_eigenvalue


def as_matrix(value, rows=None, cols=None, name="matrix"):
    """Coerce C{value} to a finite two-dimensional complex array.

    Scalars become 1x1 matrices and vectors become columns.

    @param rows: Expected number of rows, or C{None} to accept any.
    @param cols: Expected number of columns, or C{None} to accept any.
    @raise DimensionError: If the shape does not match.
    @raise MatrixError: If an entry is NaN or infinite.
    """
    matrix = np.asarray(value, dtype=complex)
    if matrix.ndim == 0:
        matrix = matrix.reshape(1, 1)
    elif matrix.ndim == 1:
        matrix = matrix.reshape(-1, 1)
    elif matrix.ndim != 2:
        raise DimensionError("%s must be two-dimensional, got shape %s" %
                             (name, matrix.shape))
    if rows is not None and matrix.shape[0] != rows:
        raise DimensionError("%s must have %d rows, got %d" %
                             (name, rows, matrix.shape[0]))
    if cols is not None and matrix.shape[1] != cols:
        raise DimensionError("%s must have %d columns, got %d" %
                             (name, cols, matrix.shape[1]))
    if not np.all(np.isfinite(matrix)):
        raise MatrixError("%s has non-finite entries" % (name,))
    return matrix


def _require_square(matrix, name="matrix"):
    if matrix.shape[0] != matrix.shape[1]:
        raise DimensionError("%s must be square, got shape %s" %
                             (name, matrix.shape))


def norm(matrix):
    """Frobenius norm."""
    return float(np.linalg.norm(matrix))


def adjoint(matrix):
    """Conjugate transpose."""
    return np.conj(np.asarray(matrix, dtype=complex)).T


def symmetrize(matrix):
    """Return the Hermitian part C{(M + M+)/2}."""
    matrix = np.asarray(matrix, dtype=complex)
    return 0.5 * (matrix + adjoint(matrix))


def hermitian_residual(matrix):
    """Frobenius norm of C{M - M+}; zero iff C{M} is Hermitian."""
    matrix = as_matrix(matrix)
    _require_square(matrix)
    return norm(matrix - adjoint(matrix))


def min_eigenvalue_hermitian(matrix):
    """Smallest eigenvalue of the Hermitian part of C{matrix}."""
    matrix = as_matrix(matrix)
    _require_square(matrix)
    return float(linalg.eigvalsh(symmetrize(matrix))[0])


def solve_hpd(h, b):
    """Solve C{H X = B} for Hermitian positive definite C{H}.

    @raise NotPositiveDefiniteError: If the smallest eigenvalue of C{H} is
        not above C{1e-12 * |H|}.
    """
    h = as_matrix(h, name="H")
    _require_square(h, "H")
    b = np.asarray(b, dtype=complex)
    vector = b.ndim == 1
    b = as_matrix(b, rows=h.shape[0], name="B")
    h = symmetrize(h)
    smallest = min_eigenvalue_hermitian(h)
    if not smallest > HPD_TOLERANCE * norm(h):
        raise NotPositiveDefiniteError(
            "matrix is not positive definite", smallest)
    x = linalg.solve(h, b, assume_a="pos")
    if vector:
        return x[:, 0]
    return x


def clamp_psd(matrix, name="matrix"):
    """Return the Hermitian part of C{matrix} with small negative
    eigenvalues set to zero.

    Eigenvalues in C{[-1e-10 |H|, 0)} are discretization noise and are
    clamped; anything lower is an error.

    @raise NotPositiveDefiniteError: If C{matrix} is materially indefinite.
    """
    matrix = symmetrize(as_matrix(matrix, name=name))
    _require_square(matrix, name)
    values, vectors = linalg.eigh(matrix)
    if values.size and values[0] < -PSD_TOLERANCE * norm(matrix):
        raise NotPositiveDefiniteError(
            "%s is not positive semidefinite" % (name,), values[0])
    if values.size and values[0] >= 0:
        return matrix
    values = np.clip(values, 0.0, None)
    return symmetrize((vectors * values) @ adjoint(vectors))


def factor_psd(matrix):
    """Return a lower-triangular C{L} with C{L L+ = H}.

    The factor goes through the eigen-decomposition, so it also exists for
    singular C{H}, where a Cholesky factorization would fail. A QR step then
    brings it to lower-triangular form; rows of C{L} that belong to zero
    leading blocks of C{H} are exactly zero.

    @raise NotPositiveDefiniteError: If C{H} has an eigenvalue below
        C{-1e-10 |H|}.
    """
    matrix = as_matrix(matrix, name="H")
    _require_square(matrix, "H")
    matrix = symmetrize(matrix)
    values, vectors = linalg.eigh(matrix)
    if values.size and values[0] < -PSD_TOLERANCE * norm(matrix):
        raise NotPositiveDefiniteError(
            "matrix is not positive semidefinite", values[0])
    root = vectors * np.sqrt(np.clip(values, 0.0, None))
    # root root+ = H; with root+ = Q R we get H = R+ R, R+ lower triangular.
    r = linalg.qr(adjoint(root), mode="r")[0]
    return adjoint(r)


def psd_sqrt(matrix):
    """Hermitian positive semidefinite square root."""
    matrix = clamp_psd(matrix)
    values, vectors = linalg.eigh(matrix)
    root = (vectors * np.sqrt(np.clip(values, 0.0, None))) @ adjoint(vectors)
    return symmetrize(root)
