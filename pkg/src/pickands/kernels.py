"""Deterministic kernels ``L >= 0`` with unit integral, and sampling densities ``p > 0``.

Kernels are one-dimensional. Each exposes its supremum, mode, an effective
support box (tail mass outside below ``1e-15``) and the abscissae where it is
not smooth, which the quadrature routines use as breakpoints.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .errors import ConfigError, InvalidKernel

NORMALISATION_TOL = 1e-8
_SQRT2PI = math.sqrt(2 * math.pi)


class Kernel:
    d = 1
    sup: float
    mode: float | None = None
    support: tuple[float, float]
    breakpoints: tuple[float, ...] = ()
    compact: bool = False

    def __call__(self, x) -> np.ndarray:
        raise NotImplementedError

    def tail_mass(self, lo: float, hi: float) -> float:
        """Mass of ``L`` outside ``[lo, hi]``."""
        raise NotImplementedError

    def describe(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class GaussianDensity(Kernel):
    sup: float = field(default=1 / _SQRT2PI, init=False)
    mode: float = field(default=0.0, init=False)
    support: tuple = field(default=(-9.0, 9.0), init=False)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return np.exp(-0.5 * x * x) / _SQRT2PI

    def tail_mass(self, lo, hi):
        return float(stats.norm.cdf(lo) + stats.norm.sf(hi))

    def describe(self):
        return {"kernel": "gaussian"}


@dataclass(frozen=True)
class IndicatorUnit(Kernel):
    """``L = 1_[0, 1]``."""

    sup: float = field(default=1.0, init=False)
    support: tuple = field(default=(0.0, 1.0), init=False)
    breakpoints: tuple = field(default=(0.0, 1.0), init=False)
    compact: bool = field(default=True, init=False)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return ((x >= 0.0) & (x <= 1.0)).astype(float)

    def tail_mass(self, lo, hi):
        inside = max(0.0, min(1.0, hi) - max(0.0, lo))
        return 1.0 - inside

    def describe(self):
        return {"kernel": "indicator"}


@dataclass(frozen=True)
class Laplace(Kernel):
    sup: float = field(default=0.5, init=False)
    mode: float = field(default=0.0, init=False)
    support: tuple = field(default=(-40.0, 40.0), init=False)
    breakpoints: tuple = field(default=(0.0,), init=False)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return 0.5 * np.exp(-np.abs(x))

    def tail_mass(self, lo, hi):
        left = 0.5 * math.exp(lo) if lo < 0 else 1 - 0.5 * math.exp(-lo)
        right = 0.5 * math.exp(-hi) if hi > 0 else 1 - 0.5 * math.exp(hi)
        return float(left + right)

    def describe(self):
        return {"kernel": "laplace"}


class Tabulated(Kernel):
    """Piecewise-linear kernel through uniform knots, zero outside them."""

    compact = True

    def __init__(self, xs, ys, label: str = "tabulated"):
        xs = np.asarray(xs, dtype=float)
        ys = np.asarray(ys, dtype=float)
        if xs.ndim != 1 or xs.shape != ys.shape or len(xs) < 2:
            raise InvalidKernel("tabulated kernel needs matching 1-d abscissae and values")
        steps = np.diff(xs)
        if np.any(steps <= 0) or np.ptp(steps) > 1e-9 * max(1.0, abs(steps[0])):
            raise InvalidKernel("tabulated kernel abscissae must be uniform and increasing")
        if np.any(ys < 0):
            raise InvalidKernel("kernel values must be non-negative")
        mass = float(np.trapezoid(ys, xs))
        if abs(mass - 1) > NORMALISATION_TOL:
            raise InvalidKernel(f"kernel integrates to {mass:.10f}, expected 1")
        self.xs, self.ys, self.label = xs, ys, label
        self.sup = float(ys.max())
        self.mode = float(xs[int(ys.argmax())])
        self.support = (float(xs[0]), float(xs[-1]))
        self.breakpoints = tuple(xs)

    @classmethod
    def from_csv(cls, path):
        xs, ys = [], []
        with open(path, newline="") as fh:
            for row in csv.reader(fh):
                if not row or row[0].lstrip().startswith("#"):
                    continue
                try:
                    x, y = float(row[0]), float(row[1])
                except ValueError:
                    continue  # header line
                xs.append(x)
                ys.append(y)
        return cls(xs, ys, label=str(path))

    def __call__(self, x):
        return np.interp(np.asarray(x, dtype=float), self.xs, self.ys, left=0.0, right=0.0)

    def tail_mass(self, lo, hi):
        inside = np.clip(self.xs, lo, hi)
        return float(max(0.0, 1.0 - np.trapezoid(self(inside), inside)))

    def describe(self):
        return {"kernel": "tabulated", "source": self.label}

    def __hash__(self):
        return hash((self.label, self.xs.tobytes(), self.ys.tobytes()))

    def __eq__(self, other):
        return (
            isinstance(other, Tabulated)
            and np.array_equal(self.xs, other.xs)
            and np.array_equal(self.ys, other.ys)
        )


KERNELS = {"gaussian": GaussianDensity, "indicator": IndicatorUnit, "laplace": Laplace}


def kernel_by_name(name: str) -> Kernel:
    try:
        return KERNELS[name]()
    except KeyError:
        if name.endswith(".csv"):
            return Tabulated.from_csv(name)
        raise ConfigError(f"unknown kernel {name!r}; choose from {sorted(KERNELS)} or a .csv path")


@dataclass(frozen=True)
class NormalDensity:
    """Sampling density ``p`` for the kernel shift: ``N(loc, scale^2)``."""

    scale: float = 1.0
    loc: float = 0.0

    def pdf(self, x):
        z = (np.asarray(x, dtype=float) - self.loc) / self.scale
        return np.exp(-0.5 * z * z) / (_SQRT2PI * self.scale)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return self.loc + self.scale * rng.standard_normal(n)

    def min_on(self, lo: float, hi: float) -> float:
        far = lo if abs(lo - self.loc) > abs(hi - self.loc) else hi
        return float(self.pdf(far))

    def describe(self):
        return {"density": "normal", "scale": self.scale, "loc": self.loc}
