"""Regular lattices ``[0, T]^d ∩ δZ^d`` and symmetric windows ``[-R, R]^d ∩ δZ^d``.

Points are always built as ``anchor + delta * k`` from integer index vectors,
never by accumulating floating sums.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError, GridOverflow

DEFAULT_POINT_CAP = 10**8
_RATIO_TOL = 1e-9


def steps_within(length: float, delta: float) -> int:
    """Number of whole ``delta`` steps that fit in ``length`` (floor with tolerance)."""
    if delta <= 0:
        raise ConfigError(f"delta must be positive, got {delta}")
    if length < 0:
        raise ConfigError(f"length must be non-negative, got {length}")
    ratio = length / delta
    k = math.floor(ratio + _RATIO_TOL)
    return max(k, 0)


def is_multiple(x: float, h: float, tol: float = _RATIO_TOL) -> bool:
    if h <= 0:
        return False
    r = x / h
    return abs(r - round(r)) <= tol * max(1.0, abs(r))


@dataclass(frozen=True)
class GridSpec:
    """Box grid (``horizon`` set) or symmetric window grid (``radius`` set)."""

    d: int
    delta: float
    horizon: float | None = None
    radius: float | None = None
    anchor: tuple[float, ...] | None = None
    cap: int = field(default=DEFAULT_POINT_CAP, compare=False)

    def __post_init__(self):
        if self.d not in (1, 2):
            raise ConfigError(f"dimension must be 1 or 2, got {self.d}")
        if not self.delta > 0:
            raise ConfigError(f"delta must be positive, got {self.delta}")
        if (self.horizon is None) == (self.radius is None):
            raise ConfigError("exactly one of horizon or radius must be given")
        if self.horizon is not None and not self.horizon > 0:
            raise ConfigError(f"horizon must be positive, got {self.horizon}")
        if self.radius is not None and not self.radius > 0:
            raise ConfigError(f"radius must be positive, got {self.radius}")
        anchor = (0.0,) * self.d if self.anchor is None else tuple(float(a) for a in self.anchor)
        if len(anchor) != self.d:
            raise ConfigError("anchor length must equal d")
        object.__setattr__(self, "anchor", anchor)

    @classmethod
    def box(cls, T: float, delta: float, d: int = 1, anchor=None, cap: int = DEFAULT_POINT_CAP):
        return cls(d=d, delta=delta, horizon=T, anchor=anchor, cap=cap)

    @classmethod
    def window(cls, R: float, delta: float, d: int = 1, cap: int = DEFAULT_POINT_CAP):
        return cls(d=d, delta=delta, radius=R, cap=cap)

    @property
    def is_window(self) -> bool:
        return self.radius is not None

    @property
    def index_range(self) -> tuple[int, int]:
        """Inclusive integer index range per axis."""
        if self.is_window:
            m = steps_within(self.radius, self.delta)
            return -m, m
        return 0, steps_within(self.horizon, self.delta)

    @property
    def points_per_axis(self) -> int:
        lo, hi = self.index_range
        return hi - lo + 1

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.points_per_axis,) * self.d

    @property
    def size(self) -> int:
        return self.points_per_axis**self.d

    def indices(self) -> np.ndarray:
        """Integer index vectors, shape ``(size, d)``, lexicographic order."""
        if self.size > self.cap:
            raise GridOverflow(f"grid has {self.size} points, cap is {self.cap}")
        lo, hi = self.index_range
        axis = np.arange(lo, hi + 1, dtype=np.int64)
        if self.d == 1:
            return axis[:, None]
        mesh = np.meshgrid(*([axis] * self.d), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def points(self) -> np.ndarray:
        return np.asarray(self.anchor) + self.delta * self.indices()

    def shifted(self, c) -> "GridSpec":
        c = np.broadcast_to(np.asarray(c, dtype=float), (self.d,))
        return replace(self, anchor=tuple(np.asarray(self.anchor) + c))

    def origin_index(self) -> int | None:
        """Flat position of the origin, or None when it is not a grid point."""
        lo, hi = self.index_range
        k = []
        for a in self.anchor:
            if not is_multiple(-a, self.delta):
                return None
            ki = int(round(-a / self.delta))
            if not lo <= ki <= hi:
                return None
            k.append(ki - lo)
        n = self.points_per_axis
        flat = 0
        for ki in k:
            flat = flat * n + ki
        return flat


def enumerate_points(g: GridSpec) -> np.ndarray:
    """All grid points as an ``(n, d)`` array in lexicographic order."""
    return g.points()


def window_points(R: float, delta: float, d: int = 1, cap: int = DEFAULT_POINT_CAP) -> np.ndarray:
    """Points of ``[-R, R]^d ∩ δZ^d``; always contains the origin."""
    return GridSpec.window(R, delta, d, cap=cap).points()


def subgrid_mask(g: GridSpec, step: int) -> np.ndarray:
    """Boolean mask over ``g``'s points selecting indices that are multiples of ``step``.

    Indices are taken relative to the origin, so the sub-lattice is ``(step*delta)Z^d``
    intersected with the grid.
    """
    idx = g.indices() + np.round(np.asarray(g.anchor) / g.delta).astype(np.int64)
    return np.all(idx % step == 0, axis=1)
