"""
Dense linear-algebra kernels and special functions
Cholesky-based SPD solves and log-determinants, plus log-gamma and digamma
evaluated by recurrence into their asymptotic series.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_solve, lapack

from config import SYMMETRY_TOL
from errors import DimensionError, DomainError, FactorizationError

HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)

# Arguments below these are shifted upward before the asymptotic series
_LOG_GAMMA_SHIFT = 12.0
_DIGAMMA_SHIFT = 10.0


def as_matrix(values, name='matrix'):
    """Return `values` as a finite 2-D float array"""
    arr = np.asarray(values, dtype=float)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} contains non-finite entries")
    return arr


def _cholesky_lower(arr):
    """Lower Cholesky factor; raises FactorizationError naming the failing minor"""
    if arr.shape[0] == 0:
        return arr.copy()
    factor, info = lapack.dpotrf(arr, lower=1, clean=1)
    if info > 0:
        raise FactorizationError(
            f"matrix is not positive definite: leading minor of order {info} failed", minor=info)
    if info < 0:
        raise FactorizationError(f"invalid argument {-info} passed to Cholesky factorization")
    return factor


@dataclass(frozen=True)
class SpdMatrix:
    """Symmetric positive-definite matrix with its lower Cholesky factor"""
    values: np.ndarray
    chol: np.ndarray = field(repr=False)

    @classmethod
    def from_array(cls, values, name='matrix', symmetry_tol=SYMMETRY_TOL):
        arr = as_matrix(values, name)
        if arr.shape[0] != arr.shape[1]:
            raise DimensionError(f"{name} must be square, got shape {arr.shape}")
        scale = max(np.max(np.abs(arr)), 1.0) if arr.size else 1.0
        if arr.size and np.max(np.abs(arr - arr.T)) > symmetry_tol * scale:
            raise FactorizationError(f"{name} is not symmetric")
        arr = 0.5 * (arr + arr.T)
        return cls(values=arr, chol=_cholesky_lower(arr))

    @classmethod
    def coerce(cls, values, name='matrix'):
        if isinstance(values, cls):
            return values
        return cls.from_array(values, name)

    @property
    def dim(self):
        return self.values.shape[0]

    def logdet(self):
        if self.dim == 0:
            return 0.0
        return 2.0 * float(np.sum(np.log(np.diag(self.chol))))

    def solve(self, rhs):
        rhs = np.asarray(rhs, dtype=float)
        if rhs.shape[0] != self.dim:
            raise DimensionError(
                f"cannot solve {self.dim}x{self.dim} system with right-hand side of shape {rhs.shape}")
        if self.dim == 0:
            return rhs.copy()
        return cho_solve((self.chol, True), rhs)

    def inverse(self):
        return self.solve(np.eye(self.dim))


def logdet_spd(M):
    """Natural log of det(M) for symmetric positive-definite M"""
    return SpdMatrix.coerce(M).logdet()


def solve_spd(M, B):
    """Solve M S = B for S, M symmetric positive definite"""
    return SpdMatrix.coerce(M).solve(B)


def _stirling_tail(x):
    r = 1.0 / x
    r2 = r * r
    return r * (1.0 / 12.0 - r2 * (1.0 / 360.0 - r2 * (1.0 / 1260.0
                - r2 * (1.0 / 1680.0 - r2 * (1.0 / 1188.0)))))


def log_gamma(x):
    """
    ln Gamma(x) for x > 0.

    Shifts x upward with Gamma(x+1) = x Gamma(x) until x >= 12, then applies
    the Stirling series through the x^-9 term.
    """
    x = float(x)
    if not x > 0.0 or not math.isfinite(x):
        raise DomainError(f"log_gamma requires x > 0, got {x}")
    shift = 0.0
    product = 1.0
    while x < _LOG_GAMMA_SHIFT:
        product *= x
        x += 1.0
    if product != 1.0:
        shift = math.log(product)
    return (x - 0.5) * math.log(x) - x + HALF_LOG_2PI + _stirling_tail(x) - shift


def log_gamma_ratio(x, a):
    """
    ln{Gamma(x - a) / Gamma(x)} without cancellation for large x.

    For x - a >= 12 the leading Stirling terms are combined analytically,
    (x - 1/2) log1p(-a/x) - a ln(x - a) + a, so the result keeps full
    relative precision even when both log-gammas are ~1e7.
    """
    x = float(x)
    a = float(a)
    if a == 0.0:
        return 0.0
    if not x - a > 0.0:
        raise DomainError(f"log_gamma_ratio requires x - a > 0, got x={x}, a={a}")
    y = x - a
    if y < _LOG_GAMMA_SHIFT or x < _LOG_GAMMA_SHIFT:
        return log_gamma(y) - log_gamma(x)
    return ((x - 0.5) * math.log1p(-a / x) - a * math.log(y) + a
            + _stirling_tail(y) - _stirling_tail(x))


def digamma(x):
    """
    psi(x) = d/dx ln Gamma(x) for x > 0.

    Upward recurrence psi(x) = psi(x+1) - 1/x until x >= 10, then
    psi(x) ~ ln x - 1/(2x) - 1/(12x^2) + 1/(120x^4) - 1/(252x^6).
    """
    x = float(x)
    if not x > 0.0 or not math.isfinite(x):
        raise DomainError(f"digamma requires x > 0, got {x}")
    value = 0.0
    while x < _DIGAMMA_SHIFT:
        value -= 1.0 / x
        x += 1.0
    r = 1.0 / x
    r2 = r * r
    value += math.log(x) - 0.5 * r
    value -= r2 * (1.0 / 12.0 - r2 * (1.0 / 120.0 - r2 * (1.0 / 252.0)))
    return value


def log_gamma_ratio_asymptotic(n_star, m):
    """Large-n* approximation of ln{Gamma(n* - m/2) / Gamma(n*)}"""
    if n_star <= 0:
        raise DomainError(f"n* must be positive, got {n_star}")
    return -0.5 * m * math.log(n_star) + math.log1p(m * (m + 2) / (8.0 * n_star))
