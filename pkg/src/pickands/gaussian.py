"""Centered Gaussian fields with stationary increments.

A field is described by its variance function ``sigma2(t) = Var W(t)`` with
``W(0) = 0``; the covariance follows as
``Cov(W(s), W(t)) = (sigma2(s) + sigma2(t) - sigma2(t - s)) / 2``.

Two samplers are provided. The circulant (Davies-Harte) sampler embeds the
increment autocovariance of a 1-d lattice into a circulant matrix and costs
``O(n log n)`` per path. The dense Cholesky sampler works for any point set in
d = 1 or 2 and serves as the independent reference.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np

from .errors import ConfigError, EmbeddingNotPSD, NotPSD
from .grid import GridSpec, is_multiple

EMBED_TOL = 1e-10
PSD_TOL = 1e-10
CHOLESKY_MAX_POINTS = 4096


@dataclass(frozen=True)
class Growth:
    """Local and global power-law bounds ``sigma2(t) <~ C * |t|^nu``."""

    nu0: float
    nuinf: float
    c0: float
    cinf: float

    def valid(self) -> bool:
        return 0 < self.nu0 <= 2 and 0 < self.nuinf <= 2 and self.c0 >= 0 and self.cinf >= 0


def _as_points(t) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    if t.ndim == 0:
        t = t[None]
    return t


class VarianceFunction:
    """Base class; subclasses implement ``__call__`` on arrays with trailing axis ``d``."""

    def __call__(self, t) -> np.ndarray:
        raise NotImplementedError

    def growth(self) -> Growth:
        raise NotImplementedError

    def describe(self) -> dict:
        raise NotImplementedError

    @property
    def is_zero(self) -> bool:
        return False


@dataclass(frozen=True)
class FBM(VarianceFunction):
    """``sigma2(t) = scale * |t|^(2 alpha)``, Hurst ``alpha`` in (0, 1]."""

    alpha: float
    scale: float = 1.0

    def __post_init__(self):
        if not 0 < self.alpha <= 1:
            raise ConfigError(f"Hurst parameter must lie in (0, 1], got {self.alpha}")
        if not self.scale > 0:
            raise ConfigError(f"scale must be positive, got {self.scale}")

    def __call__(self, t):
        r = np.linalg.norm(_as_points(t), axis=-1)
        return self.scale * r ** (2 * self.alpha)

    def growth(self):
        return Growth(2 * self.alpha, 2 * self.alpha, self.scale, self.scale)

    def describe(self):
        return {"kind": "fbm", "alpha": self.alpha, "scale": self.scale}


@dataclass(frozen=True)
class Linear(VarianceFunction):
    """Hurst-1 case ``W(t) = c <t, xi>``, so ``sigma2(t) = c^2 |t|^2``."""

    c: float

    def __post_init__(self):
        if not self.c > 0:
            raise ConfigError(f"c must be positive, got {self.c}")

    def __call__(self, t):
        r = np.linalg.norm(_as_points(t), axis=-1)
        return self.c**2 * r**2

    def growth(self):
        return Growth(2.0, 2.0, self.c**2, self.c**2)

    def describe(self):
        return {"kind": "linear", "c": self.c}


@dataclass(frozen=True)
class Sum(VarianceFunction):
    """Independent fields added."""

    first: VarianceFunction
    second: VarianceFunction

    def __call__(self, t):
        return self.first(t) + self.second(t)

    def growth(self):
        a, b = self.first.growth(), self.second.growth()
        nu0 = min(a.nu0, b.nu0)
        c0 = (a.c0 if a.nu0 == nu0 else 0.0) + (b.c0 if b.nu0 == nu0 else 0.0)
        nuinf = max(a.nuinf, b.nuinf)
        cinf = (a.cinf if a.nuinf == nuinf else 0.0) + (b.cinf if b.nuinf == nuinf else 0.0)
        return Growth(nu0, nuinf, c0, cinf)

    def describe(self):
        return {"kind": "sum", "first": self.first.describe(), "second": self.second.describe()}

    @property
    def is_zero(self):
        return self.first.is_zero and self.second.is_zero


@dataclass(frozen=True)
class Scaled(VarianceFunction):
    """``sigma2 = factor^2 * base``; a family member ``sigma_z = q(z) sigma`` has ``factor = q(z)``."""

    base: VarianceFunction
    factor: float

    def __post_init__(self):
        if self.factor < 0:
            raise ConfigError("scale factor must be non-negative")

    def __call__(self, t):
        return self.factor**2 * self.base(t)

    def growth(self):
        g = self.base.growth()
        f2 = self.factor**2
        return Growth(g.nu0, g.nuinf, f2 * g.c0, f2 * g.cinf)

    def describe(self):
        return {"kind": "scaled", "factor": self.factor, "base": self.base.describe()}

    @property
    def is_zero(self):
        return self.factor == 0 or self.base.is_zero


@dataclass(frozen=True)
class NormSphere(VarianceFunction):
    """``sigma2(t) = |t|^lam * r(t / |t|)`` with ``r >= 0`` on the unit sphere.

    ``r`` receives unit vectors with shape ``(..., d)``. In d = 1 the sphere is
    ``{-1, 1}`` and ``r`` must be even for the increments to be stationary.
    """

    lam: float
    r: Callable[[np.ndarray], np.ndarray]
    d: int = 1
    label: str = "r"

    def __post_init__(self):
        if not 0 < self.lam <= 2:
            raise ConfigError(f"lambda must lie in (0, 2], got {self.lam}")
        if self.d == 1:
            rp, rm = (float(np.asarray(self.r(np.array([[s]])))[0]) for s in (1.0, -1.0))
            if rp != rm:
                raise ConfigError("in d=1 the sphere function must satisfy r(1) == r(-1)")

    def __call__(self, t):
        t = _as_points(t)
        rad = np.linalg.norm(t, axis=-1)
        safe = np.where(rad > 0, rad, 1.0)
        u = t / safe[..., None]
        u = np.where((rad > 0)[..., None], u, np.eye(t.shape[-1])[0])
        val = rad**self.lam * np.asarray(self.r(u), dtype=float)
        if np.any(val < 0):
            raise ConfigError("sphere function must be non-negative")
        return np.where(rad > 0, val, 0.0)

    def _r_sup(self):
        if self.d == 1:
            u = np.array([[1.0], [-1.0]])
        else:
            ang = np.linspace(0, 2 * np.pi, 721)
            u = np.stack([np.cos(ang), np.sin(ang)], axis=1)
        return float(np.max(self.r(u)))

    def growth(self):
        c = self._r_sup()
        return Growth(self.lam, self.lam, c, c)

    def describe(self):
        return {"kind": "normsphere", "lam": self.lam, "r": self.label, "d": self.d}


def variance_at(vf: VarianceFunction, t) -> float:
    """``sigma2`` at a single point (a scalar is a 1-d point)."""
    return float(np.asarray(vf(_as_points(t))).reshape(-1)[0])


def covariance(vf: VarianceFunction, s, t) -> float:
    s, t = _as_points(s), _as_points(t)
    return 0.5 * (variance_at(vf, s) + variance_at(vf, t) - variance_at(vf, t - s))


def covariance_matrix(vf: VarianceFunction, points: np.ndarray) -> np.ndarray:
    points = np.asarray(points, dtype=float)
    if points.ndim == 1:
        points = points[:, None]
    v = vf(points)
    diff = points[:, None, :] - points[None, :, :]
    return 0.5 * (v[:, None] + v[None, :] - vf(diff))


# ---------------------------------------------------------------------------
# samples


@dataclass
class PathSample:
    points: np.ndarray
    values: np.ndarray
    kind: str = "gaussian"  # or "spectral"

    def __post_init__(self):
        if self.values.shape[-1] != len(self.points):
            raise ValueError("values length must equal point count")


# ---------------------------------------------------------------------------
# circulant embedding (d = 1)


def increment_autocovariance(vf: VarianceFunction, delta: float, m: int) -> np.ndarray:
    """Autocovariance ``gamma(j)``, ``j = 0..m``, of lattice increments ``W(k delta) - W((k-1) delta)``."""
    j = np.arange(m + 1, dtype=float)
    s = lambda x: vf(np.abs(x)[:, None] * delta)  # noqa: E731
    return 0.5 * (s(j + 1) + s(j - 1) - 2 * s(j))


@lru_cache(maxsize=64)
def _embedding_sqrt(vf: VarianceFunction, delta: float, m: int) -> np.ndarray:
    gamma = increment_autocovariance(vf, delta, m)
    row = np.concatenate([gamma, gamma[-2:0:-1]]) if m >= 1 else gamma
    lam = np.fft.fft(row).real
    top = max(float(np.max(np.abs(lam))), np.finfo(float).tiny)
    if lam.min() < -EMBED_TOL * top:
        raise EmbeddingNotPSD(
            f"circulant embedding has eigenvalue {lam.min():.3e} (max {top:.3e})"
        )
    lam = np.clip(lam, 0.0, None)
    return np.sqrt(lam / len(row))


def circulant_increments(vf: VarianceFunction, delta: float, m: int, rng: np.random.Generator, n: int) -> np.ndarray:
    """``n`` independent increment vectors of length ``m``.

    Each pair of paths consumes ``2 * 2m`` standard normals (real and imaginary
    parts of one complex vector); an odd ``n`` discards the last imaginary part.
    """
    if m == 0:
        return np.zeros((n, 0))
    root = _embedding_sqrt(vf, float(delta), int(m))
    size = root.shape[0]
    pairs = (n + 1) // 2
    z = rng.standard_normal((pairs, size)) + 1j * rng.standard_normal((pairs, size))
    y = np.fft.fft(root * z, axis=1)[:, :m]
    return np.concatenate([y.real, y.imag], axis=0)[:n] if pairs else np.zeros((0, m))


def _circulant_paths(vf, delta, lo, hi, rng, n):
    """Paths on lattice indices ``lo..hi`` (which must straddle 0), pinned at W(0) = 0."""
    m = hi - lo
    inc = circulant_increments(vf, delta, m, rng, n)
    path = np.concatenate([np.zeros((n, 1)), np.cumsum(inc, axis=1)], axis=1)
    return path - path[:, [-lo]]


def sample_path_circulant(vf: VarianceFunction, g: GridSpec, rng: np.random.Generator) -> PathSample:
    """One path on a 1-d lattice grid by circulant embedding of the increments."""
    return PathSample(g.points(), sample_paths(vf, g, rng, 1, method="circulant")[0])


# ---------------------------------------------------------------------------
# dense Cholesky


@lru_cache(maxsize=32)
def _dense_factor(vf: VarianceFunction, key: bytes, shape: tuple[int, int]):
    points = np.frombuffer(key, dtype=float).reshape(shape)
    var = vf(points)
    active = var > 0
    pts = points[active]
    if len(pts) == 0:
        return active, np.zeros((0, 0))
    c = covariance_matrix(vf, pts)
    try:
        return active, np.linalg.cholesky(c)
    except np.linalg.LinAlgError:
        pass
    w, v = np.linalg.eigh(c)
    tr = float(np.trace(c))
    if w.min() < -PSD_TOL * tr:
        raise NotPSD(f"covariance has eigenvalue {w.min():.3e} (trace {tr:.3e})")
    keep = w > PSD_TOL * tr * 1e-6
    return active, v[:, keep] * np.sqrt(w[keep])


def dense_paths(vf: VarianceFunction, points: np.ndarray, rng: np.random.Generator, n: int) -> np.ndarray:
    """``n`` exact draws at arbitrary points via a dense factorisation.

    Zero-variance points (the origin) are set to exactly 0.
    """
    points = np.ascontiguousarray(points, dtype=float)
    if points.ndim == 1:
        points = points[:, None]
    if len(points) > CHOLESKY_MAX_POINTS:
        raise ConfigError(f"dense sampler supports at most {CHOLESKY_MAX_POINTS} points")
    active, factor = _dense_factor(vf, points.tobytes(), points.shape)
    out = np.zeros((n, len(points)))
    if factor.size:
        out[:, active] = rng.standard_normal((n, factor.shape[1])) @ factor.T
    return out


def sample_path_cholesky(vf: VarianceFunction, points, rng: np.random.Generator) -> PathSample:
    points = np.asarray(points, dtype=float)
    if points.ndim == 1:
        points = points[:, None]
    return PathSample(points, dense_paths(vf, points, rng, 1)[0])


# ---------------------------------------------------------------------------
# dispatch


def _linear_paths(vf: Linear, points, rng, n):
    xi = rng.standard_normal((n, points.shape[1]))
    return vf.c * xi @ points.T


def sample_paths(vf: VarianceFunction, g: GridSpec, rng: np.random.Generator, n: int, method: str = "auto") -> np.ndarray:
    """``n`` paths on grid ``g``; returns shape ``(n, g.size)``.

    ``method``: ``auto``, ``circulant``, ``cholesky`` or ``rank`` (Linear only).
    ``auto`` uses ``rank`` for Linear, circulant in d = 1 when the origin lies on the
    lattice, and Cholesky otherwise. An embedding failure falls back to Cholesky.
    """
    if vf.is_zero:
        return np.zeros((n, g.size))
    if method == "auto":
        if isinstance(vf, Linear):
            method = "rank"
        elif g.d == 1 and is_multiple(g.anchor[0], g.delta):
            method = "circulant"
        else:
            method = "cholesky"
    if method == "rank":
        if not isinstance(vf, Linear):
            raise ConfigError("rank sampler needs a Linear variance function")
        return _linear_paths(vf, g.points(), rng, n)
    if method == "circulant":
        if g.d != 1:
            raise ConfigError("circulant sampler is 1-d only")
        if not is_multiple(g.anchor[0], g.delta):
            raise ConfigError("circulant sampler needs the origin on the lattice")
        lo, hi = g.index_range
        shift = int(round(g.anchor[0] / g.delta))
        a, b = lo + shift, hi + shift
        span_lo, span_hi = min(a, 0), max(b, 0)
        try:
            full = _circulant_paths(vf, g.delta, span_lo, span_hi, rng, n)
        except EmbeddingNotPSD:
            return dense_paths(vf, g.points(), rng, n)
        return full[:, a - span_lo : b - span_lo + 1]
    if method == "cholesky":
        return dense_paths(vf, g.points(), rng, n)
    raise ConfigError(f"unknown sampling method {method!r}")


# ---------------------------------------------------------------------------
# stationary fields (degenerate test cases)


class StationaryCovariance:
    variance: float

    def sample(self, points: np.ndarray, rng: np.random.Generator, n: int) -> np.ndarray:
        raise NotImplementedError

    def describe(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class CosineCovariance(StationaryCovariance):
    """Random-phase harmonic ``s (xi1 cos(w <t,e1>) + xi2 sin(w <t,e1>))``, period ``P``."""

    s: float = 1.0
    period: float = 5.0

    @property
    def variance(self):
        return self.s**2

    def sample(self, points, rng, n):
        x = np.asarray(points, dtype=float)[:, 0] * (2 * np.pi / self.period)
        xi = rng.standard_normal((n, 2))
        return self.s * (xi[:, :1] * np.cos(x) + xi[:, 1:] * np.sin(x))

    def describe(self):
        return {"kind": "cosine", "s": self.s, "period": self.period}


@dataclass(frozen=True)
class ExponentialCovariance(StationaryCovariance):
    """Ornstein-Uhlenbeck covariance ``s^2 exp(-|tau| / length)``."""

    s: float = 1.0
    length: float = 1.0

    @property
    def variance(self):
        return self.s**2

    def sample(self, points, rng, n):
        pts = np.asarray(points, dtype=float)
        diff = np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=-1)
        c = self.s**2 * np.exp(-diff / self.length)
        f = np.linalg.cholesky(c + 1e-12 * self.s**2 * np.eye(len(pts)))
        return rng.standard_normal((n, len(pts))) @ f.T

    def describe(self):
        return {"kind": "exponential", "s": self.s, "length": self.length}


def check_growth(vf: VarianceFunction) -> Growth:
    g = vf.growth()
    if not g.valid():
        raise ConfigError(f"growth exponents must lie in (0, 2]: {g}")
    return g


def log_growth_rate(vf: VarianceFunction, d: int = 1, r: float = 1e6) -> float:
    """``sigma2(t) / ln|t|`` at a large radius; compared against ``8 d`` as a positivity hint."""
    t = np.zeros((1, d))
    t[0, 0] = r
    return float(vf(t)[0] / math.log(r))
