"""Monte Carlo size and power studies for the five regression tests.

Design: ``x_i = c0 D z_i1 + eps_i`` with ``D`` (p x q1) entries i.i.d. N(1, 1),
``z_i`` entries i.i.d. N(1, z_variance) and ``eps_i ~ N_p(0, C)``,
``C_ij = rho^|i-j|``.  The tested hypothesis is ``B1 = 0``, so ``c0 = 0`` gives
the realised size.

Replication ``r`` draws ``D``, ``Z`` and the noise from streams keyed only by
``(seed, r, role)``.  The same draws are reused along the ``c0`` grid, and
counts are summed per replication, so a table does not depend on the number
of worker threads.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import linalg

from .errors import DomainError, HdwError
from .linmodel import Dataset, DesignDims
from .rmt import AspectRatios
from .rng import DEFAULT_SEED, ROLE_B, ROLE_NOISE, ROLE_Z, stream
from .testkit import METHODS, SIGMA_MODES, _Analysis, _run_one

__all__ = [
    "SimConfig",
    "PowerTable",
    "ConfigError",
    "gen_noise_cov",
    "gen_replication",
    "run_power_study",
    "parse_config",
    "load_config",
    "write_table",
    "read_table",
    "format_table",
    "emit_figure_data",
    "read_figure_data",
]

ST_SIGMA_MODES = ("known",) + SIGMA_MODES


class ConfigError(HdwError, ValueError):
    """Malformed or incomplete simulation configuration."""


@dataclass(frozen=True)
class SimConfig:
    """One size/power study.

    ``st_sigma`` selects how the least-squares tests obtain ``tr Sigma`` and
    ``tr Sigma^2``: ``"plugin"`` (from the residual covariance, default),
    ``"debiased"`` or ``"known"`` (the true ``C``).
    """

    dims: DesignDims
    rho: float = 0.0
    c0_grid: tuple[float, ...] = (0.0,)
    reps: int = 1000
    seed: int = DEFAULT_SEED
    tests: tuple[str, ...] = METHODS
    alpha: float = 0.05
    st_sigma: str = "plugin"
    z_variance: float = 0.25

    def __post_init__(self):
        object.__setattr__(self, "c0_grid", tuple(float(c) for c in self.c0_grid))
        object.__setattr__(self, "tests", tuple(self.tests))
        if self.reps < 1:
            raise DomainError(f"reps = {self.reps} must be at least 1")
        if not 0.0 <= self.rho < 1.0:
            raise DomainError(f"rho = {self.rho} must lie in [0, 1)")
        if not 0.0 < self.alpha < 1.0:
            raise DomainError(f"alpha = {self.alpha} must lie in (0, 1)")
        g = self.c0_grid
        if not g or g[0] != 0.0 or any(b < a for a, b in zip(g, g[1:])):
            raise DomainError("c0_grid must be sorted ascending and start at 0")
        if not 0 <= self.seed < 2**64:
            raise DomainError(f"seed = {self.seed} must be a 64-bit unsigned integer")
        bad = [t for t in self.tests if t not in METHODS]
        if bad or len(set(self.tests)) != len(self.tests):
            raise DomainError(f"tests {list(self.tests)} must be distinct members of {METHODS}")
        if self.st_sigma not in ST_SIGMA_MODES:
            raise DomainError(f"st_sigma = {self.st_sigma!r} must be one of {ST_SIGMA_MODES}")
        if not self.z_variance > 0.0:
            raise DomainError(f"z_variance = {self.z_variance} must be positive")


@dataclass(frozen=True)
class PowerTable:
    """Rejection frequencies, one row per ``c0``.

    ``rates[test]`` is a tuple aligned with ``config.c0_grid``, or ``None``
    when that test could not be run; ``errors[test]`` then says why.
    """

    config: SimConfig
    rates: dict = field(default_factory=dict)
    errors: dict = field(default_factory=dict)

    def column(self, test: str):
        return self.rates[test]

    def rate(self, test: str, c0: float) -> float:
        col = self.rates[test]
        if col is None:
            raise KeyError(f"test {test!r} failed: {self.errors.get(test)}")
        return col[self.config.c0_grid.index(float(c0))]

    @property
    def sizes(self) -> dict:
        return {t: (None if col is None else col[0]) for t, col in self.rates.items()}


def gen_noise_cov(p: int, rho: float):
    """AR(1) correlation matrix ``C_ij = rho^|i-j|``."""
    if not 0.0 <= rho < 1.0:
        raise DomainError(f"rho = {rho} must lie in [0, 1)")
    if p < 1:
        raise DomainError(f"p = {p} must be at least 1")
    return linalg.toeplitz(rho ** np.arange(p, dtype=float))


def _noise_factor(cfg: SimConfig):
    C = gen_noise_cov(cfg.dims.p, cfg.rho)
    return C, linalg.cholesky(C, lower=True)


def _draws(cfg: SimConfig, rep: int, L):
    d = cfg.dims
    D = stream(cfg.seed, rep, ROLE_B).normal(1.0, 1.0, size=(d.p, d.q1))
    Z = stream(cfg.seed, rep, ROLE_Z).normal(1.0, math.sqrt(cfg.z_variance), size=(d.n, d.q))
    eps = stream(cfg.seed, rep, ROLE_NOISE).standard_normal((d.n, d.p)) @ L.T
    return D, Z, eps


def gen_replication(cfg: SimConfig, c0: float, rep_index: int):
    """Dataset of replication ``rep_index`` at scale ``c0`` and its null ``B1* = 0``."""
    _, L = _noise_factor(cfg)
    D, Z, eps = _draws(cfg, rep_index, L)
    X = c0 * (Z[:, : cfg.dims.q1] @ D.T) + eps
    return Dataset(X, Z, cfg.dims.q1), np.zeros((cfg.dims.p, cfg.dims.q1))


def _static_errors(cfg: SimConfig) -> dict:
    """Configuration problems detectable without simulating, keyed by test."""
    d = cfg.dims
    errors = {}
    if d.df_error < d.p:
        msg = f"Sigma_hat is singular: n - q = {d.df_error} is smaller than p = {d.p}"
        return {t: msg for t in cfg.tests}
    if "clrt" in cfg.tests:
        try:
            AspectRatios.from_dims(d.p, d.q1, d.df_error)
        except DomainError as exc:
            errors["clrt"] = str(exc)
    return errors


def _run_chunk(cfg: SimConfig, reps: range, tests, sigma, L):
    counts = np.zeros((len(cfg.c0_grid), len(tests)), dtype=np.int64)
    errors = {}
    q1 = cfg.dims.q1
    for r in reps:
        D, Z, eps = _draws(cfg, r, L)
        signal = Z[:, :q1] @ D.T
        for i, c0 in enumerate(cfg.c0_grid):
            try:
                an = _Analysis(Dataset(c0 * signal + eps, Z, q1), None)
            except HdwError as exc:
                for t in tests:
                    errors.setdefault(t, (r, str(exc)))
                continue
            for j, t in enumerate(tests):
                if t in errors:
                    continue
                try:
                    counts[i, j] += _run_one(an, t, cfg.alpha, sigma).p_value < cfg.alpha
                except HdwError as exc:
                    errors[t] = (r, str(exc))
    return counts, errors


def _split(reps: int, k: int) -> list[range]:
    bounds = np.linspace(0, reps, k + 1).round().astype(int)
    return [range(a, b) for a, b in zip(bounds, bounds[1:]) if b > a]


def run_power_study(
    cfg: SimConfig,
    threads: int = 1,
    progress: Callable[[int, int], None] | None = None,
) -> PowerTable:
    """Rejection frequency of every selected test at every ``c0``.

    A test that fails (bad ratios, non-positive variance estimate, ...) gets
    a ``None`` column and an entry in ``errors``; the others still run.
    """
    if threads < 1:
        raise DomainError(f"threads = {threads} must be at least 1")
    static = _static_errors(cfg)
    tests = [t for t in cfg.tests if t not in static]
    C, L = _noise_factor(cfg)
    sigma = C if cfg.st_sigma == "known" else cfg.st_sigma

    # small chunks keep progress reports frequent; the split does not affect results
    chunks = _split(cfg.reps, max(1, min(cfg.reps, 4 * threads, math.ceil(cfg.reps / 25))))
    counts = np.zeros((len(cfg.c0_grid), len(tests)), dtype=np.int64)
    found: dict = {}
    done = 0

    def absorb(res, n):
        nonlocal counts, done
        c, errs = res
        counts += c
        for t, (r, msg) in errs.items():
            if t not in found or r < found[t][0]:
                found[t] = (r, msg)
        done += n
        if progress is not None:
            progress(done, cfg.reps)

    if tests:
        if threads == 1:
            for ch in chunks:
                absorb(_run_chunk(cfg, ch, tests, sigma, L), len(ch))
        else:
            with ThreadPoolExecutor(max_workers=threads) as ex:
                futs = [(ex.submit(_run_chunk, cfg, ch, tests, sigma, L), len(ch)) for ch in chunks]
                for f, n in futs:
                    absorb(f.result(), n)

    rates, errors = {}, dict(static)
    for t in cfg.tests:
        if t in static:
            rates[t] = None
        elif t in found:
            rates[t] = None
            errors[t] = f"replication {found[t][0]}: {found[t][1]}"
        else:
            j = tests.index(t)
            rates[t] = tuple(float(c) / cfg.reps for c in counts[:, j])
    return PowerTable(config=cfg, rates=rates, errors=errors)


# --- configuration files ---------------------------------------------------------------

CONFIG_KEYS = ("p", "n", "q", "q1", "rho", "c0_grid", "reps", "seed", "tests", "alpha", "st_sigma", "z_variance")
_REQUIRED = ("p", "n", "q", "q1")


def _parse_grid(text: str) -> tuple[float, ...]:
    """``"0, 0.01, 0.02"`` or ``"start:stop:step"`` (inclusive of stop)."""
    text = text.strip()
    if ":" in text:
        a, b, s = (float(v) for v in text.split(":"))
        if s <= 0 or b < a:
            raise ConfigError(f"bad c0 range {text!r}")
        k = int(round((b - a) / s))
        return tuple(round(a + i * s, 12) for i in range(k + 1))
    return tuple(float(v) for v in text.split(",") if v.strip())


def _parse_tests(text: str) -> tuple[str, ...]:
    names = [v.strip().lower() for v in text.split(",") if v.strip()]
    if names == ["all"]:
        return METHODS
    return tuple(names)


def parse_config(text: str, source: str = "<string>") -> SimConfig:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    raw = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {line!r}")
        k, v = (s.strip() for s in line.split("=", 1))
        if k in raw:
            raise ConfigError(f"{source}:{lineno}: duplicate key {k!r}")
        raw[k] = v
    unknown = sorted(set(raw) - set(CONFIG_KEYS))
    if unknown:
        raise ConfigError(f"{source}: unknown key(s): {', '.join(unknown)} (known: {', '.join(CONFIG_KEYS)})")
    missing = [k for k in _REQUIRED if k not in raw]
    if missing:
        raise ConfigError(f"{source}: missing required key(s): {', '.join(missing)}")
    try:
        dims = DesignDims(*(int(raw[k]) for k in _REQUIRED))
        kw = {}
        for k, conv in (("rho", float), ("reps", int), ("seed", int), ("alpha", float), ("z_variance", float)):
            if k in raw:
                kw[k] = conv(raw[k])
        if "c0_grid" in raw:
            kw["c0_grid"] = _parse_grid(raw["c0_grid"])
        if "tests" in raw:
            kw["tests"] = _parse_tests(raw["tests"])
        if "st_sigma" in raw:
            kw["st_sigma"] = raw["st_sigma"]
        return SimConfig(dims=dims, **kw)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"{source}: {exc}") from exc


def load_config(path) -> SimConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise OSError(f"cannot read config {path}: {exc.strerror}") from exc
    return parse_config(text, source=str(path))


# --- table and figure files ------------------------------------------------------------


def _config_lines(cfg: SimConfig) -> list[str]:
    d = cfg.dims
    vals = {
        "p": d.p, "n": d.n, "q": d.q, "q1": d.q1,
        "rho": repr(cfg.rho),
        "c0_grid": ",".join(repr(c) for c in cfg.c0_grid),
        "reps": cfg.reps, "seed": cfg.seed,
        "tests": ",".join(cfg.tests),
        "alpha": repr(cfg.alpha),
        "st_sigma": cfg.st_sigma,
        "z_variance": repr(cfg.z_variance),
    }
    return [f"# {k} = {vals[k]}" for k in CONFIG_KEYS]


def _header(table: PowerTable, kind: str) -> list[str]:
    lines = [f"# hdwilks {kind}"] + _config_lines(table.config)
    for t in table.config.tests:
        if t in table.errors:
            msg = table.errors[t].replace("\n", " ")
            lines.append(f"# error.{t} = {msg}")
    return lines


def _split_header(text: str, source: str):
    meta, body = [], []
    for line in text.splitlines():
        (meta if line.startswith("#") else body).append(line)
    cfg_lines, errors = [], {}
    for m in meta[1:]:
        k, _, v = m[1:].partition("=")
        k, v = k.strip(), v.strip()
        if k.startswith("error."):
            errors[k[len("error."):]] = v
        else:
            cfg_lines.append(f"{k} = {v}")
    cfg = parse_config("\n".join(cfg_lines), source=source)
    return cfg, errors, [b for b in body if b.strip()]


def _fmt(x) -> str:
    return "NA" if x is None else repr(x)


def format_table(table: PowerTable) -> str:
    """CSV text: metadata comments, then ``c0,label,<tests...>`` rows."""
    cfg = table.config
    lines = _header(table, "power table")
    lines.append(",".join(["c0", "label", *cfg.tests]))
    for i, c0 in enumerate(cfg.c0_grid):
        label = "size" if c0 == 0.0 else "power"
        cells = [_fmt(None if table.rates[t] is None else table.rates[t][i]) for t in cfg.tests]
        lines.append(",".join([repr(c0), label, *cells]))
    return "\n".join(lines) + "\n"


def _write(path, text: str):
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror}") from exc


def _read(path) -> str:
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise OSError(f"cannot read {path}: {exc.strerror}") from exc


def write_table(table: PowerTable, path):
    _write(path, format_table(table))


def read_table(path) -> PowerTable:
    cfg, errors, body = _split_header(_read(path), str(path))
    cols = body[0].split(",")
    if cols[:2] != ["c0", "label"] or tuple(cols[2:]) != cfg.tests:
        raise ConfigError(f"{path}: unexpected column header {body[0]!r}")
    rows = [r.split(",") for r in body[1:]]
    if len(rows) != len(cfg.c0_grid):
        raise ConfigError(f"{path}: expected {len(cfg.c0_grid)} rows, found {len(rows)}")
    rates = {}
    for j, t in enumerate(cfg.tests):
        vals = [r[j + 2] for r in rows]
        rates[t] = None if all(v == "NA" for v in vals) else tuple(float(v) for v in vals)
    return PowerTable(config=cfg, rates=rates, errors=errors)


def emit_figure_data(table: PowerTable, path):
    """Long-format series ``test,c0,rejection_rate`` for external plotting."""
    lines = _header(table, "figure data")
    lines.append("test,c0,rejection_rate")
    for t in table.config.tests:
        col = table.rates.get(t)
        if col is None:
            continue
        lines.extend(f"{t},{c0!r},{v!r}" for c0, v in zip(table.config.c0_grid, col))
    _write(path, "\n".join(lines) + "\n")


def read_figure_data(path) -> PowerTable:
    cfg, errors, body = _split_header(_read(path), str(path))
    if not body or body[0] != "test,c0,rejection_rate":
        raise ConfigError(f"{path}: missing 'test,c0,rejection_rate' header")
    series: dict[str, dict[float, float]] = {}
    for line in body[1:]:
        t, c0, v = line.split(",")
        series.setdefault(t, {})[float(c0)] = float(v)
    rates = {}
    for t in cfg.tests:
        s = series.get(t)
        rates[t] = None if s is None else tuple(s[c] for c in cfg.c0_grid)
    return PowerTable(config=cfg, rates=rates, errors=errors)
