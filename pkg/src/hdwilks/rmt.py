"""Closed-form quantities for the limiting spectrum of a random Fisher matrix.

Everything here is parametrised by the two aspect ratios ``y1 = p/n1`` and
``y2 = p/n2`` of the Fisher matrix ``S1 S2^{-1}``.  The corrections used by
the corrected likelihood-ratio test are specialisations to the spectral
function ``f(x) = log(1 + (y2/y1) x)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, RatioDomainError

__all__ = [
    "MAX_Y2",
    "AspectRatios",
    "LsdSupport",
    "CdPair",
    "RmtCorrection",
    "lsd_support",
    "fisher_lsd_density",
    "solve_cd",
    "mean_correction",
    "variance_correction",
    "lsd_log_moment",
    "rmt_correction",
]

# The LSD density carries a (1 - y2)^-2 scale; past this the support edges
# run away and we refuse rather than extrapolate.
MAX_Y2 = 0.95


@dataclass(frozen=True)
class AspectRatios:
    """Dimension-to-degrees-of-freedom ratios ``(y1, y2)``, both in (0, 1)."""

    y1: float
    y2: float

    def __post_init__(self):
        y1, y2 = float(self.y1), float(self.y2)
        if not (math.isfinite(y1) and 0.0 < y1 < 1.0):
            raise RatioDomainError(f"y1 = {y1!r} must lie strictly inside (0, 1)")
        if not (math.isfinite(y2) and 0.0 < y2 < 1.0):
            raise RatioDomainError(f"y2 = {y2!r} must lie strictly inside (0, 1)")
        if y2 > MAX_Y2:
            raise RatioDomainError(f"y2 = {y2!r} exceeds the supported maximum {MAX_Y2}")
        object.__setattr__(self, "y1", y1)
        object.__setattr__(self, "y2", y2)

    @classmethod
    def from_dims(cls, p: int, n1: int, n2: int, names: tuple[str, str] = ("q1", "n - q")) -> AspectRatios:
        """Ratios ``(p/n1, p/n2)``; errors name the violated constraint using ``names``."""
        if p >= n1:
            raise RatioDomainError(f"y1 = p/{names[0]} = {p}/{n1} must be < 1 (need p < {names[0]})")
        if p >= n2:
            raise RatioDomainError(f"y2 = p/({names[1]}) = {p}/{n2} must be < 1 (need p < {names[1]})")
        return cls(p / n1, p / n2)


@dataclass(frozen=True)
class LsdSupport:
    h: float
    a: float
    b: float


@dataclass(frozen=True)
class CdPair:
    c: float
    d: float


@dataclass(frozen=True)
class RmtCorrection:
    """All correction terms of the corrected LRT for one pair of ratios."""

    ratios: AspectRatios
    support: LsdSupport
    cd: CdPair
    mean_m: float
    var_v: float
    lsd_moment: float


def _as_ratios(y) -> AspectRatios:
    if isinstance(y, AspectRatios):
        return y
    y1, y2 = y
    return AspectRatios(y1, y2)


def lsd_support(y: AspectRatios) -> LsdSupport:
    """Edge parameter ``h`` and support ``[a, b]`` of the Fisher LSD."""
    y = _as_ratios(y)
    h = math.sqrt(y.y1 + y.y2 - y.y1 * y.y2)
    s = 1.0 - y.y2
    return LsdSupport(h=h, a=((1.0 - h) / s) ** 2, b=((1.0 + h) / s) ** 2)


def fisher_lsd_density(x, y: AspectRatios):
    """Density of the limiting spectral distribution ``F_{y1,y2}``.

    Vectorised over ``x``; returns a float for scalar input.  Exactly zero
    outside ``[a, b]``.
    """
    y = _as_ratios(y)
    sup = lsd_support(y)
    xs = np.asarray(x, dtype=float)
    inside = (xs >= sup.a) & (xs <= sup.b)
    out = np.zeros_like(xs)
    xi = xs[inside]
    out[inside] = (
        (1.0 - y.y2)
        * np.sqrt(np.maximum((sup.b - xi) * (xi - sup.a), 0.0))
        / (2.0 * math.pi * xi * (y.y1 + y.y2 * xi))
    )
    if out.ndim == 0:
        return float(out)
    return out


def solve_cd(alpha: float, beta: float, y: AspectRatios) -> CdPair:
    """Solve ``c^2 + d^2 = alpha + beta (1+h^2)/(1-y2)^2``, ``cd = beta h/(1-y2)^2``, ``0 < d < c``.

    Uses ``(c + d)^2 = alpha + beta b`` and ``(c - d)^2 = alpha + beta a``.
    """
    if not (alpha > 0.0 and math.isfinite(alpha)):
        raise DomainError(f"alpha = {alpha!r} must be positive")
    if not (beta > 0.0 and math.isfinite(beta)):
        raise DomainError(f"beta = {beta!r} must be positive")
    sup = lsd_support(y)
    up = math.sqrt(alpha + beta * sup.b)
    lo = math.sqrt(alpha + beta * sup.a)
    c = 0.5 * (up + lo)
    # difference of square roots rewritten to avoid cancellation for small beta
    d = 0.5 * beta * (sup.b - sup.a) / (up + lo)
    return CdPair(c=c, d=d)


def _log_cd(y: AspectRatios) -> tuple[LsdSupport, CdPair]:
    y = _as_ratios(y)
    return lsd_support(y), solve_cd(1.0, y.y2 / y.y1, y)


def mean_correction(y: AspectRatios) -> float:
    """Limiting mean of ``-log Lambda - p F_{y1,y2}(f)`` for real Gaussian data."""
    y = _as_ratios(y)
    sup, cd = _log_cd(y)
    c, d, h = cd.c, cd.d, sup.h
    denom = c * h - y.y2 * d
    assert denom > 0.0, "c h - y2 d must be positive for admissible ratios"
    # c^2 - d^2 = sqrt(1 + beta a) sqrt(1 + beta b), accurate even when d ~ c
    c2_d2 = (c + d) * (c - d)
    return 0.5 * (math.log(c2_d2) + 2.0 * math.log(h) - 2.0 * math.log(denom))


def variance_correction(y: AspectRatios) -> float:
    """Limiting variance ``2 log(c^2 / (c^2 - d^2))``."""
    sup, cd = _log_cd(y)
    c, d = cd.c, cd.d
    return -2.0 * math.log1p(-(d / c) ** 2)


def lsd_log_moment(y: AspectRatios) -> float:
    """``F_{y1,y2}(f) = integral of log(1 + (y2/y1) x) against the Fisher LSD``."""
    y = _as_ratios(y)
    sup, cd = _log_cd(y)
    c, d, h = cd.c, cd.d, sup.h
    y1, y2 = y.y1, y.y2
    return (
        (y2 - 1.0) / y2 * math.log(c)
        + (y1 - 1.0) / y1 * math.log(c - d * h)
        + (y1 + y2) / (y1 * y2) * math.log((c * h - d * y2) / h)
    )


def rmt_correction(y: AspectRatios) -> RmtCorrection:
    """Bundle support, ``(c, d)`` and the three correction terms."""
    y = _as_ratios(y)
    sup, cd = _log_cd(y)
    return RmtCorrection(
        ratios=y,
        support=sup,
        cd=cd,
        mean_m=mean_correction(y),
        var_v=variance_correction(y),
        lsd_moment=lsd_log_moment(y),
    )
