"""Tests of ``H0: B1 = B1*`` and the high-dimensional MANOVA test.

Five procedures share one regression fit:

* ``lrt``  -- ``-n log Lambda`` against chi-square(p q1)
* ``bbc``  -- Bartlett-Box rescaling ``-k log Lambda``, ``k = n - q - (p - q1 + 1)/2``
* ``clrt`` -- the corrected statistic ``(-log Lambda - p F(f) - m(f)) / sqrt(v(f))``
* ``st1``, ``st2`` -- standardised least-squares distances of ``B1_hat`` from ``B1*``

All reject in the upper tail of their reference distribution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import linalg, stats

from .errors import DomainError, EstimationError, SingularCovarianceError, SingularDesignError
from .linmodel import (
    Dataset,
    DesignDims,
    _as_b1star,
    _covariance,
    _ols,
    _require_nonsingular_sigma,
    fit_null,
    log_det_psd,
)
from .rmt import AspectRatios, rmt_correction

__all__ = [
    "METHODS",
    "NORMAL_UPPER",
    "CHI_SQUARE",
    "SIGMA_MODES",
    "TestReport",
    "StParts",
    "clrt",
    "classical_lrt",
    "bbc",
    "bbc_factor",
    "st_statistic",
    "st_test",
    "run_tests",
    "manova_log_lambda",
    "manova_embedding",
    "manova_clrt",
    "classical_manova_lrt",
]

METHODS = ("lrt", "clrt", "bbc", "st1", "st2")
NORMAL_UPPER = "standard-normal-upper-tail"
CHI_SQUARE = "chi-square"
SIGMA_MODES = ("plugin", "debiased")


@dataclass(frozen=True)
class TestReport:
    """Outcome of one test.  ``reject`` is the decision at ``alpha``."""

    __test__ = False  # keep pytest from collecting this class

    method: str
    statistic: float
    reference: str
    df: int | None
    p_value: float
    alpha: float
    dims: DesignDims
    ratios: tuple[float, float] | None = None
    corrections: dict | None = None
    extra: dict = field(default_factory=dict)

    def reject_at(self, alpha: float) -> bool:
        return self.p_value < alpha

    @property
    def reject(self) -> bool:
        return self.reject_at(self.alpha)

    def to_dict(self) -> dict:
        out = {
            "method": self.method,
            "statistic": self.statistic,
            "reference": self.reference,
            "df": self.df,
            "p_value": self.p_value,
            "alpha": self.alpha,
            "reject": self.reject,
            "dims": self.dims.as_dict(),
            "ratios": None if self.ratios is None else {"y1": self.ratios[0], "y2": self.ratios[1]},
            "corrections": self.corrections,
        }
        if self.extra:
            out["extra"] = dict(self.extra)
        return out


@dataclass(frozen=True)
class StParts:
    """Pieces of a least-squares statistic ``Gamma = (M - EM) / sqrt(sigma2)``."""

    M: float
    EM: float
    sigma2: float
    beta_x: float
    beta_zk: float
    k: int
    tr_sigma: float
    tr_sigma2: float

    @property
    def gamma(self) -> float:
        return (self.M - self.EM) / math.sqrt(self.sigma2)


def _check_alpha(alpha: float):
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha = {alpha!r} must lie in (0, 1)")


def _normal_report(method, stat, alpha, dims, **kw) -> TestReport:
    return TestReport(method, float(stat), NORMAL_UPPER, None, float(stats.norm.sf(stat)), alpha, dims, **kw)


def _chi2_report(method, stat, df, alpha, dims, **kw) -> TestReport:
    return TestReport(method, float(stat), CHI_SQUARE, int(df), float(stats.chi2.sf(stat, df)), alpha, dims, **kw)


class _Analysis:
    """Fits shared by all five tests on one dataset."""

    def __init__(self, data: Dataset, B1_star):
        d = data.dims
        self.dims = d
        _require_nonsingular_sigma(d)
        coef, resid = _ols(data.X, data.Z)
        self.sigma_hat = _covariance(resid, d.n)
        B1 = _as_b1star(data, B1_star)
        self.delta = coef[: d.q1].T - B1
        ld_alt = log_det_psd(self.sigma_hat)
        if not np.isfinite(ld_alt):
            raise SingularCovarianceError("Sigma_hat is numerically singular")
        self.log_lambda = ld_alt - fit_null(data, B1).logdet_Sigma_hat
        # Z1 adjusted for Z2: its Gram matrix is the Schur complement A11:2
        if d.q2 == 0:
            self.z1_adj = data.Z1
        else:
            _, self.z1_adj = _ols(data.Z1, data.Z2)
        A = self.z1_adj.T @ self.z1_adj
        self.a112 = 0.5 * (A + A.T)
        self._eig = None

    def a112_eig(self):
        if self._eig is None:
            w, V = linalg.eigh(self.a112)
            if w[0] <= 0.0:
                raise SingularDesignError("singular design: A11:2 is not positive definite")
            self._eig = (w, V)
        return self._eig


def _clrt_parts(log_lambda: float, p: int, n1: int, n2: int, names=("q1", "n - q")):
    y = AspectRatios.from_dims(p, n1, n2, names)
    corr = rmt_correction(y)
    stat = (-log_lambda - p * corr.lsd_moment - corr.mean_m) / math.sqrt(corr.var_v)
    return stat, y, {"m": corr.mean_m, "v": corr.var_v, "Ff": corr.lsd_moment}


def _clrt(an: _Analysis, alpha: float) -> TestReport:
    d = an.dims
    stat, y, corr = _clrt_parts(an.log_lambda, d.p, d.q1, d.df_error)
    return _normal_report("clrt", stat, alpha, d, ratios=(y.y1, y.y2), corrections=corr,
                          extra={"log_lambda": an.log_lambda})


def _lrt(an: _Analysis, alpha: float) -> TestReport:
    d = an.dims
    return _chi2_report("lrt", -d.n * an.log_lambda, d.p * d.q1, alpha, d, extra={"log_lambda": an.log_lambda})


def bbc_factor(dims: DesignDims) -> float:
    """Bartlett-Box multiplier ``k = n - q - (p - q1 + 1)/2``."""
    return dims.n - dims.q - 0.5 * (dims.p - dims.q1 + 1)


def _bbc(an: _Analysis, alpha: float) -> TestReport:
    d = an.dims
    k = bbc_factor(d)
    return _chi2_report("bbc", -k * an.log_lambda, d.p * d.q1, alpha, d,
                        extra={"k": k, "log_lambda": an.log_lambda})


def _sigma_traces(an: _Analysis, sigma):
    """``(tr Sigma, tr Sigma^2)`` from a known matrix or a plug-in rule.

    Plug-in rules start from the unbiased ``S = n Sigma_hat / (n - q)``:
    ``"plugin"`` uses ``tr S`` and ``tr S^2``; ``"debiased"`` replaces the
    latter by ``N^2 / ((N-1)(N+2)) (tr S^2 - (tr S)^2 / N)`` with ``N = n - q``.
    """
    d = an.dims
    if isinstance(sigma, str):
        if sigma not in SIGMA_MODES:
            raise DomainError(f"unknown sigma mode {sigma!r}; expected one of {SIGMA_MODES} or a matrix")
        N = d.df_error
        S = an.sigma_hat * (d.n / N)
        tr1 = float(np.trace(S))
        tr2 = float(np.sum(S * S))
        if sigma == "debiased":
            if N < 2:
                raise EstimationError("debiased tr(Sigma^2) needs n - q >= 2")
            tr2 = N * N / ((N - 1.0) * (N + 2.0)) * (tr2 - tr1 * tr1 / N)
        if tr2 <= 0.0:
            raise EstimationError(f"plug-in estimate of tr(Sigma^2) is not positive ({tr2:.6g})")
        return tr1, tr2
    Sig = np.asarray(sigma, dtype=float)
    if Sig.shape != (d.p, d.p):
        raise DomainError(f"known Sigma must be {d.p} x {d.p}, got {Sig.shape}")
    return float(np.trace(Sig)), float(np.sum(Sig * Sig.T))


def _st_parts(an: _Analysis, k: int, sigma, beta_x: float) -> StParts:
    if k not in (1, 2):
        raise DomainError(f"k = {k!r} must be 1 or 2")
    w, V = an.a112_eig()
    tr1, tr2 = _sigma_traces(an, sigma)
    # Z_i^(k) = A11:2^{-(3-k)/2} (z_i1 - A12 A22^-1 z_i2), one row per observation
    zk = an.z1_adj @ (V * w ** (-(3 - k) / 2.0)) @ V.T
    beta_z = float(np.sum(np.sum(zk * zk, axis=1) ** 2))
    delta = an.delta
    if k == 1:
        M = float(np.sum(delta * delta))
        EM = tr1 * float(np.sum(1.0 / w))
        var = 2.0 * tr2 * float(np.sum(w**-2.0)) + beta_x * beta_z
    else:
        M = float(np.sum((delta @ an.a112) * delta))
        EM = an.dims.q1 * tr1
        var = 2.0 * an.dims.q1 * tr2 + beta_x * beta_z
    if var <= 0.0:
        raise EstimationError(f"variance of M_{k} is not positive ({var:.6g})")
    return StParts(M=M, EM=EM, sigma2=var, beta_x=float(beta_x), beta_zk=beta_z, k=k, tr_sigma=tr1, tr_sigma2=tr2)


def _st(an: _Analysis, k: int, sigma, alpha: float, beta_x: float = 0.0) -> TestReport:
    parts = _st_parts(an, k, sigma, beta_x)
    mode = sigma if isinstance(sigma, str) else "known"
    return _normal_report(f"st{k}", parts.gamma, alpha, an.dims,
                          extra={"M": parts.M, "EM": parts.EM, "sigma2": parts.sigma2, "sigma": mode})


def clrt(data: Dataset, B1_star=None, alpha: float = 0.05) -> TestReport:
    """Corrected likelihood-ratio test; needs ``p < q1`` and ``p < n - q``."""
    _check_alpha(alpha)
    d = data.dims
    # fail on the ratios before paying for the fit
    AspectRatios.from_dims(d.p, d.q1, d.df_error)
    return _clrt(_Analysis(data, B1_star), alpha)


def classical_lrt(data: Dataset, B1_star=None, alpha: float = 0.05) -> TestReport:
    _check_alpha(alpha)
    return _lrt(_Analysis(data, B1_star), alpha)


def bbc(data: Dataset, B1_star=None, alpha: float = 0.05) -> TestReport:
    _check_alpha(alpha)
    return _bbc(_Analysis(data, B1_star), alpha)


def st_statistic(data: Dataset, B1_star=None, k: int = 2, sigma="plugin", beta_x: float = 0.0) -> StParts:
    """Least-squares statistic ``M_{n,k}`` with its null mean and variance.

    ``sigma`` is either the known noise covariance or a plug-in mode
    (``"plugin"`` or ``"debiased"``).  ``beta_x`` is the fourth-moment excess
    ``E(eps'eps)^2 - (tr Sigma)^2 - 2 tr Sigma^2``, zero for Gaussian noise.
    """
    return _st_parts(_Analysis(data, B1_star), k, sigma, beta_x)


def st_test(data: Dataset, B1_star=None, k: int = 2, sigma="plugin", alpha: float = 0.05,
            beta_x: float = 0.0) -> TestReport:
    _check_alpha(alpha)
    return _st(_Analysis(data, B1_star), k, sigma, alpha, beta_x)


def run_tests(data: Dataset, B1_star=None, methods: Sequence[str] = METHODS, alpha: float = 0.05,
              sigma="plugin") -> dict[str, TestReport]:
    """Run several tests on one shared fit; returns reports keyed by method name."""
    _check_alpha(alpha)
    unknown = [m for m in methods if m not in METHODS]
    if unknown:
        raise DomainError(f"unknown test method(s) {unknown}; expected a subset of {METHODS}")
    an = _Analysis(data, B1_star)
    return {m: _run_one(an, m, alpha, sigma) for m in methods}


def _run_one(an: _Analysis, method: str, alpha: float, sigma) -> TestReport:
    if method == "clrt":
        return _clrt(an, alpha)
    if method == "lrt":
        return _lrt(an, alpha)
    if method == "bbc":
        return _bbc(an, alpha)
    return _st(an, int(method[-1]), sigma, alpha)


# --- multiple-sample significance test -------------------------------------------------


def _check_samples(samples):
    groups = [np.array(s, dtype=float, ndmin=2) for s in samples]
    if len(groups) < 2:
        raise DomainError("need at least two groups")
    p = groups[0].shape[1]
    for i, g in enumerate(groups):
        if g.shape[1] != p:
            raise DomainError(f"group {i} has {g.shape[1]} columns, expected {p}")
        if g.shape[0] < 1:
            raise DomainError(f"group {i} is empty")
        if not np.all(np.isfinite(g)):
            raise DomainError(f"group {i} contains non-finite values")
    n = sum(g.shape[0] for g in groups)
    dims = DesignDims(p=p, n=n, q=len(groups), q1=len(groups) - 1)
    return groups, dims


def manova_log_lambda(samples) -> float:
    """``log(|Sigma_hat| / |Sigma_hat_0|)`` from within-group and total scatter."""
    groups, d = _check_samples(samples)
    _require_nonsingular_sigma(d)
    X = np.vstack(groups)
    total = _covariance(X - X.mean(axis=0), d.n)
    within = _covariance(np.vstack([g - g.mean(axis=0) for g in groups]), d.n)
    return log_det_psd(within) - log_det_psd(total)


def manova_embedding(samples) -> Dataset:
    """Regression form of the q-group problem.

    Group ``i < q`` gets regressor ``e_i + e_q``, group ``q`` gets ``e_q``; the
    first ``q - 1`` coefficient columns are then ``mu_i - mu_q`` and the test
    becomes ``B1 = 0``.
    """
    groups, d = _check_samples(samples)
    rows = []
    for i, g in enumerate(groups):
        z = np.zeros(d.q)
        z[-1] = 1.0
        if i < d.q - 1:
            z[i] = 1.0
        rows.append(np.tile(z, (g.shape[0], 1)))
    return Dataset(np.vstack(groups), np.vstack(rows), q1=d.q - 1)


def manova_clrt(samples, alpha: float = 0.05) -> TestReport:
    """Corrected LRT for equality of ``q`` mean vectors; ratios ``p/(q-1)`` and ``p/(n-q)``."""
    _check_alpha(alpha)
    _, d = _check_samples(samples)
    AspectRatios.from_dims(d.p, d.q - 1, d.df_error, ("(q - 1)", "n - q"))
    ll = manova_log_lambda(samples)
    stat, y, corr = _clrt_parts(ll, d.p, d.q - 1, d.df_error, ("(q - 1)", "n - q"))
    return _normal_report("manova-clrt", stat, alpha, d, ratios=(y.y1, y.y2), corrections=corr,
                          extra={"log_lambda": ll})


def classical_manova_lrt(samples, alpha: float = 0.05) -> TestReport:
    """``-n log Lambda`` against chi-square(p (q - 1))."""
    _check_alpha(alpha)
    _, d = _check_samples(samples)
    ll = manova_log_lambda(samples)
    return _chi2_report("manova-lrt", -d.n * ll, d.p * (d.q - 1), alpha, d, extra={"log_lambda": ll})
