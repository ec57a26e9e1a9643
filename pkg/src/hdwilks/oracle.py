"""Independent numerical checks of the closed-form Fisher-matrix corrections.

The quadrature and contour routines never call
:func:`hdwilks.rmt.lsd_log_moment`, :func:`~hdwilks.rmt.mean_correction` or
:func:`~hdwilks.rmt.variance_correction`; :func:`verify_grid` compares them
against those closed forms.  The LSD moment is recomputed by adaptive quadrature of the density, the
mean and variance by trapezoidal quadrature of their defining contour
integrals on the unit circle, extrapolated in the contour radius ``r -> 1+``.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import integrate, linalg, stats

from .errors import ConvergenceError
from .rmt import (
    AspectRatios,
    fisher_lsd_density,
    lsd_log_moment,
    lsd_support,
    mean_correction,
    variance_correction,
)
from .rng import DEFAULT_SEED, ROLE_WISHART_1, ROLE_WISHART_2, stream

__all__ = [
    "ContourSpec",
    "CltSummary",
    "quad_lsd_integral",
    "contour_mean_at",
    "contour_mean",
    "contour_variance_at",
    "contour_variance",
    "mc_clt_check",
    "sample_g_statistics",
    "richardson",
    "GRIDS",
    "GridCheck",
    "verify_point",
    "verify_grid",
]

_MAX_NODES = 1 << 22


@dataclass(frozen=True)
class ContourSpec:
    """Contour quadrature settings.

    ``r_values`` are the radii fed to the extrapolation; ``n_nodes`` is the
    starting node count, doubled until successive trapezoid sums agree to
    ``node_tol``.  Near ``y2 = 1`` a singularity approaches the unit circle
    and the error in ``r`` is only polynomial for ``r - 1`` well below 1e-2,
    hence the dense set of radii.
    """

    r_values: tuple[float, ...] = (1.01, 1.003, 1.001, 1.0003, 1.0001)
    n_nodes: int = 1024
    node_tol: float = 1e-13
    extrapolation_tol: float = 1e-5

    def __post_init__(self):
        if any(r <= 1.0 for r in self.r_values):
            raise ValueError("all contour radii must exceed 1")
        if self.n_nodes < 256:
            raise ValueError("n_nodes must be at least 256")
        if len(self.r_values) < 1:
            raise ValueError("need at least one radius")

    @property
    def richardson_levels(self) -> int:
        return len(self.r_values)


def _test_function(y: AspectRatios):
    ratio = y.y2 / y.y1
    return lambda x: np.log1p(ratio * x)


def quad_lsd_integral(y: AspectRatios, f=None, epsabs: float = 1e-12, max_error: float = 1e-8) -> float:
    """Integrate ``f`` against the Fisher LSD density by adaptive quadrature.

    The substitution ``x = a + (b - a) sin^2(theta)`` turns the two
    square-root edge singularities into a smooth integrand on [0, pi/2].
    ``f`` defaults to ``log(1 + (y2/y1) x)``; pass ``lambda x: 1.0`` for the
    total mass.
    """
    if not isinstance(y, AspectRatios):
        y = AspectRatios(*y)
    if f is None:
        f = _test_function(y)
    sup = lsd_support(y)
    width = sup.b - sup.a

    def integrand(theta):
        s, c = math.sin(theta), math.cos(theta)
        x = sup.a + width * s * s
        return f(x) * fisher_lsd_density(x, y) * 2.0 * width * s * c

    val, err, info = integrate.quad(
        integrand, 0.0, 0.5 * math.pi, epsabs=epsabs, epsrel=1e-13, limit=500, full_output=True
    )[:3]
    if err > max_error:
        raise ConvergenceError(f"LSD quadrature error estimate {err:.3g} exceeds {max_error:.3g}", achieved=err)
    return float(val)


@lru_cache(maxsize=16)
def _circle(n: int):
    """Node angles and the trig quantities reused by every integrand on ``n`` nodes."""
    theta = 2.0 * math.pi * np.arange(n) / n
    return theta, np.exp(1j * theta), np.cos(theta)


def _minus(theta, s_minus_1: float):
    """``zeta - s`` for ``zeta = exp(i theta)`` and real ``s`` close to 1, without cancellation."""
    return (-2.0 * np.sin(0.5 * theta) ** 2 - s_minus_1) + 1j * np.sin(theta)


def _plus(theta, s_minus_1: float):
    """``zeta + s`` for real ``s`` close to 1."""
    return (2.0 * np.cos(0.5 * theta) ** 2 + s_minus_1) + 1j * np.sin(theta)


def _g_on_circle(y: AspectRatios, cos_theta):
    """``f(z(zeta))`` on |zeta| = 1, where ``z = (1 + h^2 + 2 h Re zeta)/(1 - y2)^2``."""
    h = math.sqrt(y.y1 + y.y2 - y.y1 * y.y2)
    z = (1.0 + h * h + 2.0 * h * cos_theta) / (1.0 - y.y2) ** 2
    return np.log1p((y.y2 / y.y1) * z), h


def _converge(evaluate, n_start: int, tol: float):
    """Double the node count until two successive sums agree.

    ``evaluate(n)`` returns ``(value, abs_scale)``; ``abs_scale`` is the sum of
    absolute term magnitudes, which bounds the attainable rounding accuracy.
    """
    n = n_start
    prev, _ = evaluate(n)
    change = math.inf
    while 2 * n <= _MAX_NODES:
        n *= 2
        cur, scale = evaluate(n)
        change = abs(cur - prev)
        floor = 1e3 * np.finfo(float).eps * scale
        if change <= max(tol * max(1.0, abs(cur)), floor):
            return cur, n
        prev = cur
    raise ConvergenceError(f"trapezoid sums still moving at {n} nodes", achieved=change)


def _start_nodes(spec: ContourSpec, r: float) -> int:
    # the near pole at distance ~ (r - 1) makes the trapezoid error ~ r^-N
    need = 24.0 / (1.0 - 1.0 / r)
    return max(spec.n_nodes, 1 << int(math.ceil(math.log2(need))))


@lru_cache(maxsize=16)
def _mean_pole_kernel(n: int, r: float):
    theta, _, _ = _circle(n)
    inv_r_minus_1 = (1.0 - r) / r
    return 1.0 / _minus(theta, inv_r_minus_1) + 1.0 / _plus(theta, inv_r_minus_1)


def _mean_terms(y: AspectRatios, r: float, n_nodes: int):
    _, zeta, cos_t = _circle(n_nodes)
    g, h = _g_on_circle(y, cos_t)
    kernel = _mean_pole_kernel(n_nodes, r) - 2.0 / (zeta + y.y2 / h)
    # dzeta = i zeta dtheta; the i cancels against 1/(4 pi i)
    return g * kernel * zeta / (2.0 * n_nodes)


def contour_mean_at(y: AspectRatios, r: float, n_nodes: int) -> complex:
    """Trapezoidal value of the mean contour integral at a fixed radius ``r``.

    ``(1/(4 pi i)) oint g(zeta) [1/(zeta - 1/r) + 1/(zeta + 1/r) - 2/(zeta + y2/h)] dzeta``
    with ``g = f(z(zeta))``.
    """
    if not isinstance(y, AspectRatios):
        y = AspectRatios(*y)
    return complex(np.sum(_mean_terms(y, r, n_nodes)))


@lru_cache(maxsize=16)
def _variance_kernel(n: int, r: float):
    # zeta_j zeta_k / (zeta_j - r zeta_k)^2 = omega^l / (omega^l - r)^2 with l = j - k
    theta, zeta, _ = _circle(n)
    return zeta / _minus(theta, r - 1.0) ** 2


def _variance_terms(y: AspectRatios, r: float, n_nodes: int):
    _, _, cos_t = _circle(n_nodes)
    g, _ = _g_on_circle(y, cos_t)
    G = np.fft.rfft(g)
    # lag-l autocorrelation sum_k g_k g_{k+l}: the double sum regrouped by j - k
    autocorr = np.fft.irfft(G.real**2 + G.imag**2, n=n_nodes)
    # -(1/(2 pi^2)) (2 pi i / N)^2 = 2 / N^2
    return 2.0 * _variance_kernel(n_nodes, r) * autocorr / n_nodes**2


def contour_variance_at(y: AspectRatios, r: float, n_nodes: int, inner: str | None = None) -> complex:
    """Trapezoidal value of ``-(1/(2 pi^2)) oint oint g(z1) g(z2) / (z1 - r z2)^2 dz1 dz2``.

    On equispaced nodes the kernel depends only on the index difference of
    the two nodes.  By default the double sum is regrouped by that
    difference.  ``inner="zeta1"`` or ``"zeta2"`` instead forms the inner sums
    for every outer node explicitly (as one FFT convolution) and then sums
    over the outer variable.
    """
    if not isinstance(y, AspectRatios):
        y = AspectRatios(*y)
    if inner is None:
        return complex(np.sum(_variance_terms(y, r, n_nodes)))
    _, _, cos_t = _circle(n_nodes)
    g, _ = _g_on_circle(y, cos_t)
    kappa = _variance_kernel(n_nodes, r)
    G = np.fft.fft(g)
    if inner == "zeta1":
        # inner_k = sum_j g_j kappa_{j-k}
        inner_sums = np.fft.ifft(np.fft.fft(np.roll(kappa[::-1], 1)) * G)
    elif inner == "zeta2":
        # inner_j = sum_k g_k kappa_{j-k}
        inner_sums = np.fft.ifft(np.fft.fft(kappa) * G)
    else:
        raise ValueError("inner must be None, 'zeta1' or 'zeta2'")
    return complex(2.0 * np.sum(g * inner_sums) / n_nodes**2)


def richardson(hs, values) -> tuple[float, float]:
    """Polynomial extrapolation of ``values(h)`` to ``h = 0`` (Neville).

    Returns the extrapolated value and the change from the next-lower order,
    used as an error indicator.
    """
    hs = [float(h) for h in hs]
    tab = [complex(v) for v in values]
    n = len(tab)
    prev_best = tab[-1]
    for k in range(1, n):
        new = []
        for i in range(n - k):
            new.append((hs[i] * tab[i + 1] - hs[i + k] * tab[i]) / (hs[i] - hs[i + k]))
        if k == n - 1:
            prev_best = tab[-1]
        tab = new
    best = tab[0]
    return best, abs(best - prev_best)


def _extrapolate(terms, y: AspectRatios, spec: ContourSpec) -> float:
    def evaluate(r, n):
        t = terms(y, r, n)
        return complex(np.sum(t)), float(np.sum(np.abs(t)))

    vals = []
    for r in spec.r_values:
        v, _ = _converge(lambda n: evaluate(r, n), _start_nodes(spec, r), spec.node_tol)
        vals.append(v)
    best, err = richardson([r - 1.0 for r in spec.r_values], vals)
    if err > spec.extrapolation_tol:
        raise ConvergenceError(
            f"extrapolation in r unstable: last correction {err:.3g} exceeds {spec.extrapolation_tol:.3g}",
            achieved=err,
        )
    return float(best.real)


def contour_mean(y: AspectRatios, spec: ContourSpec | None = None) -> float:
    """Mean correction from its contour-integral definition."""
    if not isinstance(y, AspectRatios):
        y = AspectRatios(*y)
    return _extrapolate(_mean_terms, y, spec or ContourSpec())


def contour_variance(y: AspectRatios, spec: ContourSpec | None = None) -> float:
    """Variance correction from its double contour-integral definition."""
    if not isinstance(y, AspectRatios):
        y = AspectRatios(*y)
    return _extrapolate(_variance_terms, y, spec or ContourSpec())


@dataclass(frozen=True)
class CltSummary:
    """Outcome of a Monte Carlo check of the Fisher-matrix CLT.

    ``mean_err_in_se`` is ``|mean(G) - m| / sqrt(v / reps)``; ``var_ratio`` is
    the sample variance of ``G`` over ``v``; ``ks_distance`` compares
    ``(G - m)/sqrt(v)`` to N(0, 1).  With fewer than two replications the
    variance is undefined, ``insufficient_reps`` is set and the three
    figures are NaN.
    """

    p: int
    n1: int
    n2: int
    reps: int
    seed: int
    mean_m: float
    var_v: float
    sample_mean: float
    sample_var: float
    mean_err_in_se: float
    var_ratio: float
    ks_distance: float
    insufficient_reps: bool = False
    samples: np.ndarray = field(default=None, repr=False, compare=False)


def _one_g_statistic(p: int, n1: int, n2: int, seed: int, rep: int, centre: float) -> float:
    x1 = stream(seed, rep, ROLE_WISHART_1).standard_normal((p, n1))
    x2 = stream(seed, rep, ROLE_WISHART_2).standard_normal((p, n2))
    s1 = x1 @ x1.T / n1
    s2 = x2 @ x2.T / n2
    # eigenvalues of S1 S2^{-1} via the symmetric-definite pencil (S1, S2)
    lam = linalg.eigh(s1, s2, eigvals_only=True)
    return float(np.sum(np.log1p((n1 / n2) * lam)) - centre)


def sample_g_statistics(p: int, n1: int, n2: int, reps: int, seed: int, threads: int = 1) -> np.ndarray:
    """Draw ``reps`` values of ``G_n(f) = -log Lambda - p F_{y_n1, y_n2}(f)`` under Gaussian sampling."""
    y = AspectRatios.from_dims(p, n1, n2)
    centre = p * lsd_log_moment(y)
    work = lambda r: _one_g_statistic(p, n1, n2, seed, r, centre)  # noqa: E731
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return np.fromiter(pool.map(work, range(reps)), dtype=float, count=reps)
    return np.fromiter(map(work, range(reps)), dtype=float, count=reps)


def mc_clt_check(p: int, q1: int, n2: int, reps: int, seed: int = DEFAULT_SEED, threads: int = 1) -> CltSummary:
    """Check the null calibration of the corrected LRT by direct Fisher-matrix sampling.

    The centring ``p F(f)`` and the limits ``m(f)``, ``v(f)`` are the production
    closed forms; their agreement with independent quadratures is checked
    separately by :func:`quad_lsd_integral`, :func:`contour_mean` and
    :func:`contour_variance`.
    """
    if reps < 1:
        raise ValueError("reps must be at least 1")
    y = AspectRatios.from_dims(p, q1, n2)
    m, v = mean_correction(y), variance_correction(y)
    g = sample_g_statistics(p, q1, n2, reps, seed, threads)
    if reps < 2:
        nan = float("nan")
        return CltSummary(p, q1, n2, reps, seed, m, v, float(g[0]), nan, nan, nan, nan, True, g)
    mean = float(np.mean(g))
    var = float(np.var(g, ddof=1))
    ks = float(stats.kstest((g - m) / math.sqrt(v), "norm").statistic)
    return CltSummary(
        p, q1, n2, reps, seed, m, v, mean, var,
        mean_err_in_se=abs(mean - m) / math.sqrt(v / reps),
        var_ratio=var / v,
        ks_distance=ks,
        samples=g,
    )


# --- grid verification -----------------------------------------------------------------

GRIDS = {
    "coarse": tuple(round(0.1 * i, 10) for i in range(1, 10)),
    "fine": tuple(round(0.05 * i, 10) for i in range(1, 20)),
}


@dataclass(frozen=True)
class GridCheck:
    """Closed form vs oracle at one ``(y1, y2)``; errors are absolute."""

    y1: float
    y2: float
    moment_err: float
    mean_err: float
    var_err: float
    passed: bool
    message: str = ""


def verify_point(y1: float, y2: float, quad_tol: float = 1e-6, contour_tol: float = 1e-5,
                 spec: ContourSpec | None = None) -> GridCheck:
    y = AspectRatios(y1, y2)
    try:
        e1 = abs(quad_lsd_integral(y) - lsd_log_moment(y))
        e2 = abs(contour_mean(y, spec) - mean_correction(y))
        e3 = abs(contour_variance(y, spec) - variance_correction(y))
    except ConvergenceError as exc:
        nan = float("nan")
        return GridCheck(y1, y2, nan, nan, nan, False, str(exc))
    ok = e1 <= quad_tol and e2 <= contour_tol and e3 <= contour_tol
    return GridCheck(y1, y2, e1, e2, e3, ok)


def verify_grid(values=GRIDS["coarse"], quad_tol: float = 1e-6, contour_tol: float = 1e-5,
                spec: ContourSpec | None = None) -> list[GridCheck]:
    """Run :func:`verify_point` over the product grid ``values x values``."""
    return [verify_point(a, b, quad_tol, contour_tol, spec) for a in values for b in values]
