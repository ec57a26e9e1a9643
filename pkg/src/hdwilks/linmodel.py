"""Multivariate regression fits and Wilks' Lambda.

Model: ``x_i = B z_i + eps_i`` with ``x_i`` of dimension ``p`` and ``z_i`` of
dimension ``q``.  Rows of ``X`` (n x p) and ``Z`` (n x q) are observations.
The coefficient block under test is ``B1``, the first ``q1`` columns of ``B``.

All determinants are handled as log-determinants of triangular factors;
at ``p = 50`` the raw determinants are far outside double range.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .errors import DomainError, SingularCovarianceError, SingularDesignError

__all__ = [
    "RANK_TOL",
    "DesignDims",
    "Dataset",
    "FitResult",
    "WilksLambda",
    "fit_alternative",
    "fit_null",
    "block_a112",
    "wilks_lambda",
    "f_matrix",
    "f_matrix_eigenvalues",
    "log_det_psd",
]

RANK_TOL = 1e-10


@dataclass(frozen=True)
class DesignDims:
    """Dimensions ``(p, n, q, q1)`` of a regression test problem."""

    p: int
    n: int
    q: int
    q1: int

    def __post_init__(self):
        if self.p < 1:
            raise DomainError(f"p = {self.p} must be at least 1")
        if not 1 <= self.q1 <= self.q:
            raise DomainError(f"q1 = {self.q1} must satisfy 1 <= q1 <= q = {self.q}")
        if self.n < self.p + self.q:
            raise DomainError(f"n = {self.n} must be at least p + q = {self.p + self.q}")

    @property
    def q2(self) -> int:
        return self.q - self.q1

    @property
    def df_error(self) -> int:
        """Residual degrees of freedom ``n - q``."""
        return self.n - self.q

    @property
    def y1(self) -> float:
        return self.p / self.q1

    @property
    def y2(self) -> float:
        return self.p / (self.n - self.q)

    def as_dict(self) -> dict:
        return {"p": self.p, "n": self.n, "q": self.q, "q1": self.q1}


class Dataset:
    """Responses ``X`` (n x p) and regressors ``Z`` (n x q) split as ``q = q1 + q2``.

    Construction checks shapes and that ``Z`` has full column rank.
    """

    def __init__(self, X, Z, q1: int):
        X = np.array(X, dtype=float, ndmin=2, copy=True)
        Z = np.array(Z, dtype=float, ndmin=2, copy=True)
        if X.shape[0] != Z.shape[0]:
            raise DomainError(f"X has {X.shape[0]} rows but Z has {Z.shape[0]}")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(Z))):
            raise DomainError("X and Z must be finite (missing values are not supported)")
        self.X = X
        self.Z = Z
        self.X.setflags(write=False)
        self.Z.setflags(write=False)
        self.dims = DesignDims(p=X.shape[1], n=X.shape[0], q=Z.shape[1], q1=int(q1))
        _check_rank(Z, "Z")

    @property
    def Z1(self):
        return self.Z[:, : self.dims.q1]

    @property
    def Z2(self):
        return self.Z[:, self.dims.q1 :]

    def __repr__(self):
        d = self.dims
        return f"Dataset(p={d.p}, n={d.n}, q={d.q}, q1={d.q1})"


@dataclass(frozen=True)
class FitResult:
    """MLE of ``(B, Sigma)``; under the null, ``B_hat`` carries ``B1*`` in its first block."""

    B_hat: np.ndarray
    Sigma_hat: np.ndarray
    logdet_Sigma_hat: float


@dataclass(frozen=True)
class WilksLambda:
    log_lambda: float
    dims: DesignDims

    @property
    def value(self) -> float:
        return float(np.exp(self.log_lambda))


def _check_rank(M, name: str):
    if M.shape[1] == 0:
        return
    if M.shape[0] < M.shape[1]:
        raise SingularDesignError(f"{name} has fewer rows ({M.shape[0]}) than columns ({M.shape[1]})")
    sv = linalg.svd(M, compute_uv=False)
    if sv[0] == 0.0 or sv[-1] / sv[0] < RANK_TOL:
        raise SingularDesignError(
            f"singular design: {name} is rank deficient (condition ratio {sv[-1] / sv[0] if sv[0] else 0.0:.3g})"
        )


# Cholesky pivots below this fraction of the largest mean a condition
# number past 1e14: treated as singular rather than trusted.
PIVOT_TOL = 1e-7


def log_det_psd(S) -> float:
    """Log-determinant of a symmetric PSD matrix via Cholesky; ``-inf`` if numerically singular."""
    try:
        c, _ = linalg.cho_factor(S, lower=True, check_finite=False)
    except linalg.LinAlgError:
        return -np.inf
    diag = np.diag(c)
    if diag.size == 0:
        return 0.0
    if np.any(diag <= PIVOT_TOL * diag.max()):
        return -np.inf
    return float(2.0 * np.sum(np.log(diag)))


def _ols(Y, W):
    """Coefficients ``C`` (k x p) and residuals of ``Y ~ W C`` by QR."""
    q, r = linalg.qr(W, mode="economic", check_finite=False)
    coef = linalg.solve_triangular(r, q.T @ Y, check_finite=False)
    resid = Y - W @ coef
    return coef, resid


def _covariance(resid, n: int):
    S = resid.T @ resid / n
    return 0.5 * (S + S.T)


def fit_alternative(data: Dataset) -> FitResult:
    """Unrestricted MLE: ``B_hat = (sum x z')(sum z z')^-1``, ``Sigma_hat = RSS / n``."""
    coef, resid = _ols(data.X, data.Z)
    S = _covariance(resid, data.dims.n)
    return FitResult(B_hat=coef.T, Sigma_hat=S, logdet_Sigma_hat=log_det_psd(S))


def _as_b1star(data: Dataset, B1_star):
    d = data.dims
    if B1_star is None:
        return np.zeros((d.p, d.q1))
    B = np.array(B1_star, dtype=float, ndmin=2)
    if B.shape != (d.p, d.q1):
        raise DomainError(f"B1* must be {d.p} x {d.q1}, got {B.shape[0]} x {B.shape[1]}")
    return B


def fit_null(data: Dataset, B1_star=None) -> FitResult:
    """MLE under ``B1 = B1*``: regress ``x_i - B1* z_i1`` on ``z_i2`` alone.

    With ``q2 = 0`` no regression is done and ``Sigma_hat = sum y_i y_i' / n``.
    """
    d = data.dims
    B1 = _as_b1star(data, B1_star)
    Y = data.X - data.Z1 @ B1.T
    if d.q2 == 0:
        coef2 = np.zeros((0, d.p))
        resid = Y
    else:
        coef2, resid = _ols(Y, data.Z2)
    S = _covariance(resid, d.n)
    B_hat = np.hstack([B1, coef2.T])
    return FitResult(B_hat=B_hat, Sigma_hat=S, logdet_Sigma_hat=log_det_psd(S))


def block_a112(Z, q1: int):
    """Schur complement ``A11 - A12 A22^-1 A21`` of ``A = Z'Z``."""
    Z = np.asarray(Z, dtype=float)
    A = Z.T @ Z
    A11 = A[:q1, :q1]
    if Z.shape[1] == q1:
        return A11.copy()
    A12 = A[:q1, q1:]
    A22 = A[q1:, q1:]
    try:
        c = linalg.cho_factor(A22, lower=True)
    except linalg.LinAlgError as exc:
        raise SingularDesignError("singular design: A22 is not positive definite") from exc
    S = A11 - A12 @ linalg.cho_solve(c, A12.T)
    return 0.5 * (S + S.T)


def _require_nonsingular_sigma(d: DesignDims):
    if d.n - d.q < d.p:
        raise SingularCovarianceError(
            f"Sigma_hat is singular: n - q = {d.n - d.q} is smaller than p = {d.p}"
        )


def wilks_lambda(data: Dataset, B1_star=None) -> WilksLambda:
    """``log Lambda_n = log|Sigma_hat| - log|Sigma_hat_0|``."""
    d = data.dims
    _require_nonsingular_sigma(d)
    alt = fit_alternative(data)
    null = fit_null(data, B1_star)
    if not np.isfinite(alt.logdet_Sigma_hat):
        raise SingularCovarianceError("Sigma_hat is numerically singular")
    return WilksLambda(log_lambda=alt.logdet_Sigma_hat - null.logdet_Sigma_hat, dims=d)


def _f_parts(data: Dataset, B1_star):
    d = data.dims
    _require_nonsingular_sigma(d)
    alt = fit_alternative(data)
    delta = alt.B_hat[:, : d.q1] - _as_b1star(data, B1_star)
    A112 = block_a112(data.Z, d.q1)
    H = delta @ A112 @ delta.T
    W = d.n * alt.Sigma_hat
    return 0.5 * (H + H.T), W


def f_matrix(data: Dataset, B1_star=None):
    """``F = ((n-q)/q1) (n Sigma_hat)^-1 (B1_hat - B1*) A11:2 (B1_hat - B1*)'``."""
    d = data.dims
    H, W = _f_parts(data, B1_star)
    try:
        c = linalg.cho_factor(W, lower=True)
    except linalg.LinAlgError as exc:
        raise SingularCovarianceError("Sigma_hat is numerically singular") from exc
    return (d.df_error / d.q1) * linalg.cho_solve(c, H)


def f_matrix_eigenvalues(data: Dataset, B1_star=None):
    """Eigenvalues of the F-matrix, ascending, from the symmetric pencil ``(H, n Sigma_hat)``."""
    d = data.dims
    H, W = _f_parts(data, B1_star)
    lam = linalg.eigh(H, W, eigvals_only=True)
    return (d.df_error / d.q1) * lam
