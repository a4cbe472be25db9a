"""Small dense linear algebra: partial-pivoting LU and the damped normal-equation solve.

Matrices and vectors are plain float64 numpy arrays. ``as_matrix`` and
``as_vector`` enforce shape and finiteness at module boundaries.
"""

import warnings

import numpy as np
import scipy.linalg
from scipy.linalg import LinAlgWarning

from .errors import DimensionMismatch, SingularMatrix

# pivots below this fraction of max |a_ij| count as zero
PIVOT_RTOL = 1e-12


def as_matrix(a):
    a = np.array(a, dtype=float)
    if a.ndim != 2:
        raise DimensionMismatch(f"expected a 2-D matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    return a


def as_vector(b):
    b = np.array(b, dtype=float)
    if b.ndim != 1:
        raise DimensionMismatch(f"expected a 1-D vector, got shape {b.shape}")
    if not np.all(np.isfinite(b)):
        raise ValueError("vector has non-finite entries")
    return b


def lu_factor(a):
    """Factor ``P a = L U`` with partial pivoting (LAPACK ``getrf``).

    Returns ``(lu, piv)`` in LAPACK's packed form. Raises SingularMatrix when
    any pivot is below ``1e-12`` times the largest entry of ``a``.
    """
    a = as_matrix(a)
    n, m = a.shape
    if n != m:
        raise DimensionMismatch(f"matrix must be square, got {n}x{m}")
    scale = np.max(np.abs(a)) if a.size else 0.0
    if scale == 0.0:
        raise SingularMatrix("matrix is identically zero")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(a, check_finite=False)
    pivots = np.abs(np.diag(lu))
    k = int(np.argmin(pivots))
    if pivots[k] < PIVOT_RTOL * scale:
        raise SingularMatrix(f"pivot {pivots[k]:.3e} at column {k} is numerically zero")
    return lu, piv


def lu_solve(a, b):
    """Solve ``a x = b`` by LU with partial pivoting.

    Raises SingularMatrix when a pivot drops below ``1e-12`` times the
    largest entry of ``a``, DimensionMismatch on bad shapes.
    """
    a = as_matrix(a)
    b = as_vector(b)
    if a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"matrix must be square, got {a.shape[0]}x{a.shape[1]}")
    if b.shape[0] != a.shape[0]:
        raise DimensionMismatch(f"rhs length {b.shape[0]} != matrix order {a.shape[0]}")
    return scipy.linalg.lu_solve(lu_factor(a), b, check_finite=False)


def solve_damped(jtj, mu, rhs):
    """Solve ``(jtj + mu I) x = rhs``."""
    jtj = as_matrix(jtj)
    if mu < 0:
        raise ValueError(f"damping must be nonnegative, got {mu}")
    n = jtj.shape[0]
    if jtj.shape[1] != n:
        raise DimensionMismatch(f"matrix must be square, got {jtj.shape}")
    return lu_solve(jtj + mu * np.eye(n), rhs)
