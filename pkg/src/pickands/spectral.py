"""Non-negative mean-one spectral fields ``Z`` and their Monte Carlo sanity checks."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import gaussian as gs
from .errors import ConfigError, FamilyInvalid
from .grid import GridSpec, is_multiple
from .kernels import GaussianDensity, Kernel, NormalDensity
from .streams import map_blocks, mean_stderr


class SpectralField:
    d: int = 1
    # P(Z(0) > 0) = 1
    positive_at_origin: bool = True

    def sample(self, where, rng: np.random.Generator, n: int) -> np.ndarray:
        """``n`` draws at ``where`` (a GridSpec or an ``(m, d)`` point array); shape ``(n, m)``."""
        raise NotImplementedError

    def describe(self) -> dict:
        raise NotImplementedError


def _points(where) -> np.ndarray:
    if isinstance(where, GridSpec):
        return where.points()
    pts = np.asarray(where, dtype=float)
    return pts[:, None] if pts.ndim == 1 else pts


@dataclass(frozen=True)
class LogGaussian(SpectralField):
    """``Z(t) = exp(W(t) - sigma2(t)/2)`` for a stationary-increment Gaussian ``W``."""

    vf: gs.VarianceFunction
    d: int = 1
    method: str = "auto"

    def sample(self, where, rng, n):
        if isinstance(where, GridSpec):
            w = gs.sample_paths(self.vf, where, rng, n, method=self.method)
            pts = where.points()
        else:
            pts = _points(where)
            if isinstance(self.vf, gs.Linear):
                w = gs._linear_paths(self.vf, pts, rng, n)
            else:
                w = gs.dense_paths(self.vf, pts, rng, n)
        return np.exp(w - 0.5 * self.vf(pts))

    def describe(self):
        return {"field": "log_gaussian", "d": self.d, **self.vf.describe()}


@dataclass(frozen=True)
class KernelField(SpectralField):
    """``Z(t) = L(t - N) / p(N)`` with ``N ~ p``; exactly one variate per path."""

    kernel: Kernel = field(default_factory=GaussianDensity)
    density: NormalDensity = field(default_factory=NormalDensity)

    @property
    def positive_at_origin(self):
        return not self.kernel.compact

    def sample_shift(self, rng, n):
        return self.density.sample(rng, n)

    def evaluate(self, pts, shift):
        """Values at ``pts`` for given shifts ``N`` (shape ``(n,)``)."""
        x = pts[None, :, 0] - shift[:, None]
        return self.kernel(x) / self.density.pdf(shift)[:, None]

    def sample(self, where, rng, n):
        return self.evaluate(_points(where), self.sample_shift(rng, n))

    def sup_given_shift(self, shift):
        """Supremum over all of R for each drawn shift."""
        return self.kernel.sup / self.density.pdf(shift)

    def describe(self):
        return {"field": "kernel", **self.kernel.describe(), **self.density.describe()}


@dataclass(frozen=True)
class Bernoulli(SpectralField):
    """``Z(t) = V / p`` for all t, ``V ~ Bernoulli(p)``."""

    p: float = 0.5
    d: int = 1
    positive_at_origin: bool = field(default=False, init=False)

    def __post_init__(self):
        if not 0 < self.p < 1:
            raise ConfigError("Bernoulli p must lie in (0, 1)")

    def sample(self, where, rng, n):
        m = len(_points(where))
        v = (rng.random(n) < self.p).astype(float) / self.p
        return np.repeat(v[:, None], m, axis=1)

    def describe(self):
        return {"field": "bernoulli", "p": self.p, "d": self.d}


@dataclass(frozen=True)
class StationaryLogGaussian(SpectralField):
    """``Z(t) = exp(X(t) - Var X / 2)`` with ``X`` stationary Gaussian."""

    cov: gs.StationaryCovariance = field(default_factory=gs.CosineCovariance)
    d: int = 1

    def sample(self, where, rng, n):
        x = self.cov.sample(_points(where), rng, n)
        return np.exp(x - 0.5 * self.cov.variance)

    def describe(self):
        return {"field": "stationary_log_gaussian", "d": self.d, **self.cov.describe()}


@dataclass(frozen=True)
class Family:
    """Locally stationary family ``z -> Z_z = exp(W_z - sigma_z^2/2)``, ``z`` in [0, 1]."""

    member: Callable[[float], gs.VarianceFunction]
    label: str = "family"
    d: int = 1

    def at(self, z: float) -> LogGaussian:
        return LogGaussian(self.member(float(z)), d=self.d)

    def describe(self):
        return {"field": "family", "label": self.label, "d": self.d}


@dataclass(frozen=True)
class PolynomialScale:
    """``q(z) = sum_k coeffs[k] z^k``; ``abs`` is taken so the scale factor is non-negative."""

    coeffs: tuple[float, ...]

    def __call__(self, z):
        return abs(float(np.polynomial.polynomial.polyval(z, self.coeffs)))

    def __str__(self):
        return "+".join(f"{c:g}*z^{k}" for k, c in enumerate(self.coeffs))


def scaled_family(base: gs.VarianceFunction, q: PolynomialScale, d: int = 1) -> Family:
    """``sigma_z = q(z) * sigma``."""
    return Family(
        member=lambda z: gs.Scaled(base, q(z)),
        label=f"scaled[{q}]({base.describe()})",
        d=d,
    )


def check_family(fam: Family, nodes, eps: float = 1e-6, tol: float = 1e-3, probe=(0.1, 1.0, 10.0)):
    """Continuity in ``z`` (finite differences of ``sigma_z``) and growth bounds at each node.

    Returns per-node dicts with the continuity defect, growth metadata and the
    log-growth positivity hint. Raises FamilyInvalid on failure.
    """
    pts = np.zeros((len(probe), fam.d))
    pts[:, 0] = probe
    report = []
    for z in nodes:
        vf = fam.member(float(z))
        g = vf.growth()
        if vf.is_zero:
            g_ok = True
        else:
            g_ok = g.valid()
        if not g_ok:
            raise FamilyInvalid(f"growth exponents out of (0, 2] at z={z}: {g}")
        s = np.sqrt(vf(pts))
        defect = 0.0
        for w in (max(0.0, z - eps), min(1.0, z + eps)):
            sw = np.sqrt(fam.member(w)(pts))
            defect = max(defect, float(np.max(np.abs(sw - s) / (1.0 + s))))
        if defect > tol:
            raise FamilyInvalid(f"sigma_z is not continuous at z={z} (defect {defect:.3e})")
        rate = gs.log_growth_rate(vf, fam.d) if not vf.is_zero else 0.0
        report.append(
            {"z": float(z), "continuity_defect": defect, "growth": g, "degenerate": vf.is_zero,
             "log_growth": rate, "positivity_hint": rate > 8 * fam.d}
        )
    return report


def sample_spectral(spec: SpectralField, g, rng: np.random.Generator) -> gs.PathSample:
    vals = spec.sample(g, rng, 1)[0]
    return gs.PathSample(_points(g), vals, kind="spectral")


def check_mean_one(spec: SpectralField, points, reps: int, seed: int = 0, **kw) -> np.ndarray:
    """Per-point z-scores ``(mean - 1) / stderr`` of ``Z(t)``."""
    if reps < 1000:
        raise ConfigError("check_mean_one needs at least 1000 replications")
    pts = _points(points)
    vals = map_blocks(lambda rng, n: spec.sample(pts, rng, n), reps, seed, **kw)
    m = vals.mean(axis=0)
    se = vals.std(axis=0, ddof=1) / np.sqrt(reps)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(se > 0, (m - 1) / se, np.where(m == 1, 0.0, np.inf))
    return z


def check_shift_invariance(spec: SpectralField, K: float, c: float, delta: float, reps: int, seed: int = 0, **kw):
    """Compare ``E sup_{K∩δZ} Z(t + c)`` with ``E sup_{K∩δZ} Z(t)`` on shared paths (d = 1)."""
    base = GridSpec.box(K, delta).points()
    shifted = base + c
    if is_multiple(c, delta):
        lo, hi = min(0.0, c), max(K, K + c)
        g = GridSpec.box(hi - lo, delta, anchor=(lo,))
        off = int(round(-lo / delta))
        k = int(round(c / delta))
        nb = len(base)
        ib, ish = np.arange(nb) + off, np.arange(nb) + off + k

        def fn(rng, n):
            z = spec.sample(g, rng, n)
            return z[:, ish].max(axis=1), z[:, ib].max(axis=1)
    else:
        pts = np.concatenate([base, shifted])
        nb = len(base)

        def fn(rng, n):
            z = spec.sample(pts, rng, n)
            return z[:, nb:].max(axis=1), z[:, :nb].max(axis=1)

    a, b = map_blocks(fn, reps, seed, **kw)
    ea, sa = mean_stderr(a)
    eb, sb = mean_stderr(b)
    md, sd = mean_stderr(a - b)
    z = md / sd if sd > 0 else 0.0
    return {"shifted": ea, "shifted_stderr": sa, "base": eb, "base_stderr": sb, "z": float(z)}
