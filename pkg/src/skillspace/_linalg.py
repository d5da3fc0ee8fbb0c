import numpy as np
import scipy.linalg

from .errors import ConditioningError

RIDGE = 1e-8
# reciprocal condition number below which a matrix is treated as singular
RCOND_LIMIT = 1e-12


def regularized_inverse(r, ridge=RIDGE):
    """Inverse of a symmetric positive (semi)definite matrix.

    ``ridge * I`` is added when the Cholesky factorization fails or the
    matrix is numerically singular.
    """
    r = np.asarray(r, dtype=float)
    eye = np.eye(r.shape[0])
    for shift in (0.0, ridge):
        try:
            c, lower = scipy.linalg.cho_factor(r + shift * eye)
        except np.linalg.LinAlgError:
            continue
        d = np.diag(c)
        if d.min() ** 2 / d.max() ** 2 < RCOND_LIMIT:
            continue
        inv = scipy.linalg.cho_solve((c, lower), eye)
        if np.all(np.isfinite(inv)):
            return 0.5 * (inv + inv.T)
    raise ConditioningError("matrix is singular even after ridge regularization")


def regularized_solve(r, rhs, ridge=RIDGE):
    r = np.asarray(r, dtype=float)
    eye = np.eye(r.shape[0])
    for shift in (0.0, ridge):
        try:
            c, lower = scipy.linalg.cho_factor(r + shift * eye)
        except np.linalg.LinAlgError:
            continue
        d = np.diag(c)
        if d.min() ** 2 / d.max() ** 2 < RCOND_LIMIT:
            continue
        return scipy.linalg.cho_solve((c, lower), rhs)
    raise ConditioningError("matrix is singular even after ridge regularization")


def lstsq(a, y, rcond=1e-10):
    """Least squares through a pivoted QR factorization.

    Raises :class:`ConditioningError` if ``a`` is column rank deficient.
    """
    a = np.asarray(a, dtype=float)
    y = np.asarray(y, dtype=float)
    q, r, piv = scipy.linalg.qr(a, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    if diag.size == 0 or diag[-1] <= rcond * diag[0]:
        raise ConditioningError(
            f"design matrix of shape {a.shape} is rank deficient"
        )
    coef_p = scipy.linalg.solve_triangular(r, q.T @ y)
    coef = np.empty_like(coef_p)
    coef[piv] = coef_p
    return coef
