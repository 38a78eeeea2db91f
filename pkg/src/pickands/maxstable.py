"""Max-stable fields ``Y(t) = max_i Z^(i)(t) / Gamma_i`` on finite grids.

Three stopping rules are available:

* ``exact_kernel`` -- kernel fields. On a finite grid the law of ``Y`` depends on
  the shift density ``p`` only through ``∫ max_i L(t_i - x) / x_i dx``, so the
  shift is drawn uniformly on the range ``[lo, hi]`` that can reach the grid.
  Spectral values are then bounded by ``sup L (hi - lo)``. For kernels without
  compact support the range is the effective support and the neglected tail
  mass is reported as the residual.
* ``exact_normalized`` -- box grids. The spectral field is replaced by
  ``V(t) = n Z(0) Z(t - tau) / sum_l Z(t_l - tau)`` with ``tau`` uniform on the
  grid, which has the same finite-dimensional max-moments on the grid. For
  log-Gaussian fields ``Z(0) = 1`` so ``V <= n``, an exact bound.
* ``threshold`` -- bound taken as a pilot quantile of ``max_grid Z``; the
  reported residual bound estimates the expected number of missed spawns.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .errors import ConfigError, SpawnCapExceeded
from .estimators import _shifted_mesh_values, mesh_maxima
from .grid import GridSpec
from .spectral import KernelField, LogGaussian, SpectralField, _points
from .streams import DEFAULT_BLOCK, TAG_MAXSTABLE, TAG_PILOT, derive, map_blocks, mean_stderr


@dataclass
class MaxStableSample:
    points: np.ndarray
    Y: np.ndarray  # (sims, m)
    spawn_count: np.ndarray  # (sims,)
    residual_bias_bound: float
    stopping: str
    meta: dict = field(default_factory=dict)


def _spectral_draw(spec, g: GridSpec, mode: str):
    """Function ``(rng, n) -> (n, m)`` drawing spectral values on the grid."""
    pts = g.points() if isinstance(g, GridSpec) else _points(g)
    if mode == "exact_normalized":
        n_pts = g.size
        box = GridSpec.box(_box_T(g), g.delta, g.d)

        def draw(rng, n):
            z0, zm = _shifted_mesh_values(spec, box, rng, n)
            total = zm.sum(axis=1)
            scale = np.divide(n_pts * z0, total, out=np.zeros_like(total), where=total > 0)
            return zm * scale[:, None]
        return draw
    if mode == "exact_kernel":
        lo, hi = _shift_range(spec, pts)

        def draw(rng, n):
            shift = rng.uniform(lo, hi, n)
            return spec.kernel(pts[None, :, 0] - shift[:, None]) * (hi - lo)
        return draw
    return lambda rng, n: spec.sample(pts, rng, n)


def _box_T(g: GridSpec) -> float:
    return (g.points_per_axis - 1) * g.delta


def _shift_range(spec: KernelField, pts: np.ndarray):
    a, b = spec.kernel.support
    return float(pts[:, 0].min() - b), float(pts[:, 0].max() - a)


def resolve_stopping(spec, g, stopping: str) -> str:
    if stopping != "auto":
        return stopping
    if isinstance(spec, KernelField):
        return "exact_kernel"
    if isinstance(spec, LogGaussian) and isinstance(g, GridSpec) and not g.is_window:
        return "exact_normalized"
    return "threshold"


def _run(draw, bound, rng, n, max_spawn, m):
    gam = np.zeros(n)
    Y = np.zeros((n, m))
    spawns = np.zeros(n, dtype=np.int64)
    active = np.arange(n)
    while active.size:
        gam[active] += rng.standard_exponential(active.size)
        Y[active] = np.maximum(Y[active], draw(rng, active.size) / gam[active, None])
        spawns[active] += 1
        ymin = Y[active].min(axis=1)
        done = (ymin > 0) & (bound / gam[active] < ymin)
        done |= spawns[active] >= max_spawn
        active = active[~done]
    return Y, spawns, gam


def simulate_Y(
    spec: SpectralField,
    g,
    sims: int,
    seed: int = 0,
    *,
    stopping: str = "auto",
    q: float = 0.9999,
    max_spawn: int = 100_000,
    pilot: int = 20_000,
    on_cap: str = "raise",
    block: int = DEFAULT_BLOCK,
    workers=None,
) -> MaxStableSample:
    """Simulate ``sims`` independent copies of ``Y`` on grid ``g`` (GridSpec or point array)."""
    mode = resolve_stopping(spec, g, stopping)
    pts = g.points() if isinstance(g, GridSpec) else _points(g)
    m = len(pts)
    if mode not in ("exact_kernel", "exact_normalized", "threshold"):
        raise ConfigError(f"unknown stopping rule {stopping!r}")
    if mode == "exact_kernel":
        if not isinstance(spec, KernelField) or getattr(spec, "d", 1) != 1:
            raise ConfigError("exact_kernel stopping needs a one-dimensional kernel field")
        lo, hi = _shift_range(spec, pts)
        bound = spec.kernel.sup * (hi - lo)
    elif mode == "exact_normalized":
        if not isinstance(spec, LogGaussian) or not isinstance(g, GridSpec) or g.is_window:
            raise ConfigError("exact_normalized stopping needs a log-Gaussian field on a box grid")
        bound = float(m)
    draw = _spectral_draw(spec, g, mode)
    pilot_max = None
    if mode == "threshold":
        pilot_max = draw(derive(seed, TAG_PILOT, 0), pilot).max(axis=1)
        bound = float(np.quantile(pilot_max, q))

    Y, spawns, gam = map_blocks(lambda rng, n: _run(draw, bound, rng, n, max_spawn, m),
                                sims, seed, tag=TAG_MAXSTABLE, block=block, workers=workers)
    capped = spawns >= max_spawn
    residual = 0.0
    if mode == "exact_kernel" and not spec.kernel.compact:
        residual = float(spec.kernel.tail_mass(*spec.kernel.support) * len(pts))
    if mode == "threshold":
        # expected number of later spawns that would still raise the minimum
        ymin = Y.min(axis=1)
        excess = np.maximum(pilot_max[None, :] / np.maximum(ymin, 1e-300)[:, None] - gam[:, None], 0.0)
        residual = float(excess.mean())
    if capped.any():
        residual = max(residual, float(capped.mean()))
    sample = MaxStableSample(pts, Y, spawns, residual, mode,
                             {"bound": bound, "capped": int(capped.sum())})
    if capped.any() and on_cap == "raise":
        raise SpawnCapExceeded(f"{int(capped.sum())} simulations hit the spawn cap {max_spawn}", sample)
    return sample


def trace_Y(spec: SpectralField, points, spawns: int, seed: int = 0):
    """History of a single simulation: ``Gamma`` (spawns,) and running ``Y`` (spawns, m)."""
    rng = derive(seed, TAG_MAXSTABLE, 0)
    pts = _points(points)
    gam = np.cumsum(rng.standard_exponential(spawns))
    z = spec.sample(pts, rng, spawns)
    return gam, np.maximum.accumulate(z / gam[:, None], axis=0)


def fidi_cdf(spec: SpectralField, points, x, reps: int, seed: int = 0, **kw):
    """``P(Y(t_i) <= x_i for all i) = exp(-E max_i Z(t_i) / x_i)`` via spectral draws only.

    Returns ``(value, stderr)`` with a delta-method stderr.
    """
    if reps < 1000:
        raise ConfigError("fidi_cdf needs at least 1000 replications")
    pts = _points(points)
    x = np.broadcast_to(np.asarray(x, dtype=float), (len(pts),))
    if np.any(x <= 0):
        raise ConfigError("thresholds must be positive")
    vals = map_blocks(lambda rng, n: (spec.sample(pts, rng, n) / x).max(axis=1),
                      reps, seed, tag=TAG_MAXSTABLE, **kw)
    mu, se = mean_stderr(vals)
    p = math.exp(-mu)
    return p, p * se


def cdf_estimate(sample: MaxStableSample, x, cols=None):
    """Empirical ``P(Y <= x)`` jointly over ``cols`` with binomial stderr."""
    Y = sample.Y if cols is None else sample.Y[:, cols]
    ind = np.all(Y <= x, axis=1)
    p = float(ind.mean())
    return p, math.sqrt(max(p * (1 - p), 0.0) / len(ind))


def frechet_ks(sample: MaxStableSample, col: int = 0) -> float:
    """Kolmogorov-Smirnov distance of ``Y[:, col]`` to the unit Frechet law."""
    return float(stats.kstest(sample.Y[:, col], lambda y: np.exp(-1 / np.maximum(y, 1e-300))).statistic)


def max_stability_check(sample: MaxStableSample, m: float, x: float, col: int = 0) -> dict:
    """Compare ``P(Y <= x)^m`` with ``P(m Y <= x)`` on the same simulations."""
    y = sample.Y[:, col]
    a = (y <= x).astype(float)
    b = (y <= x / m).astype(float)
    n = len(y)
    p1, p2 = a.mean(), b.mean()
    diff = p1**m - p2
    grad = np.array([m * p1 ** (m - 1), -1.0])
    cov = np.cov(np.stack([a, b])) / n
    se = float(np.sqrt(max(grad @ cov @ grad, 0.0)))
    z = diff / se if se > 0 else (0.0 if diff == 0 else math.inf)
    return {"lhs": p1**m, "rhs": p2, "diff": diff, "stderr": se, "z": float(z)}


def extremal_index(
    spec: SpectralField,
    delta: float,
    T: float,
    reps: int,
    seed: int = 0,
    *,
    r: float = 1.0,
    sims: int | None = None,
    R: float = 10.0,
    estimator: str = "dy",
    stopping: str = "auto",
    block: int = DEFAULT_BLOCK,
    workers=None,
) -> dict:
    """``theta = delta^d H^delta`` and the finite-grid identity gap.

    The gap compares ``-log P(max_grid Y <= r T^d)`` from simulated ``Y`` with
    ``E[max_grid Z] / (r T^d)`` from spectral draws; both estimate the same
    number exactly on a finite grid.
    """
    from .estimators import DYConfig, estimate_H_direct, estimate_H_dy

    if not delta > 0:
        raise ConfigError("extremal index needs delta > 0")
    d = getattr(spec, "d", 1)
    if estimator == "dy":
        H = estimate_H_dy(spec, DYConfig(delta=delta, eta=delta, R=R, h=delta, d=d), reps, seed,
                          block=block, workers=workers)
    else:
        H = estimate_H_direct(spec, T, delta, reps, seed, block=block, workers=workers)
    theta, theta_se = delta**d * H.estimate, delta**d * H.stderr

    g = GridSpec.box(T, delta, d)
    level = r * T**d
    full = np.ones(g.size, dtype=bool)
    zmax = map_blocks(lambda rng, n: mesh_maxima(spec, g, [full], rng, n)[:, 0],
                      reps, seed + 1, tag=TAG_MAXSTABLE, block=block, workers=workers)
    ez, ez_se = mean_stderr(zmax)
    ys = simulate_Y(spec, g, sims or reps, seed + 2, stopping=stopping, block=block, workers=workers)
    p, p_se = cdf_estimate(ys, level)
    lhs = -math.log(p) if p > 0 else math.inf
    lhs_se = p_se / p if p > 0 else math.inf
    rhs, rhs_se = ez / level, ez_se / level
    gap = abs(lhs - rhs)
    comb = math.hypot(lhs_se, rhs_se)
    return {"theta": theta, "theta_stderr": theta_se, "H": H.estimate, "H_stderr": H.stderr,
            "identity_gap": gap, "gap_stderr": comb, "lhs": lhs, "rhs": rhs,
            "residual_bias_bound": ys.residual_bias_bound, "stopping": ys.stopping}


# ---------------------------------------------------------------------------
# stationarity through the tilt identity


def tilt_identity_check(
    spec: SpectralField,
    h: float,
    functional: str = "point_ratio",
    reps: int = 100_000,
    seed: int = 0,
    *,
    s: float = 1.0,
    R: float = 5.0,
    mesh: float = 0.05,
    block: int = DEFAULT_BLOCK,
    workers=None,
) -> dict:
    """``E[Z(h) F(Z)]`` against ``E[Z(0) F(B^h Z)]`` with ``B^h Z(.) = Z(. - h)`` (d = 1).

    ``functional`` is ``point_ratio`` (``F(f) = f(s)/f(0)``, 0/0 -> 0) or
    ``sup_sum`` (``F(f) = max_W f / sum_W f`` over ``W = [-R, R] ∩ mesh Z``).
    Both sides are evaluated on the same paths, so the z-score is paired.
    """
    if functional == "point_ratio":
        pts = np.array([0.0, h, s, -h, s - h])

        def fn(rng, n):
            z = spec.sample(pts, rng, n)
            f1 = np.divide(z[:, 2], z[:, 0], out=np.zeros(n), where=z[:, 0] > 0)
            f2 = np.divide(z[:, 4], z[:, 3], out=np.zeros(n), where=z[:, 3] > 0)
            return z[:, 1] * f1, z[:, 0] * f2
    elif functional == "sup_sum":
        k = h / mesh
        if abs(k - round(k)) > 1e-9:
            raise ConfigError("shift h must be a multiple of the mesh")
        k = int(round(k))
        m = int(round(R / mesh))
        big = GridSpec.window((m + abs(k)) * mesh, mesh)
        c = m + abs(k)
        base = np.arange(c - m, c + m + 1)
        shifted = base - k
        o, ih = c, c + k

        def fn(rng, n):
            z = spec.sample(big, rng, n)
            w, ws = z[:, base], z[:, shifted]
            f1 = np.divide(w.max(axis=1), w.sum(axis=1), out=np.zeros(n), where=w.sum(axis=1) > 0)
            f2 = np.divide(ws.max(axis=1), ws.sum(axis=1), out=np.zeros(n), where=ws.sum(axis=1) > 0)
            return z[:, ih] * f1, z[:, o] * f2
    else:
        raise ConfigError(f"unknown functional {functional!r}")
    lhs, rhs = map_blocks(fn, reps, seed, tag=TAG_MAXSTABLE, block=block, workers=workers)
    a, sa = mean_stderr(lhs)
    b, sb = mean_stderr(rhs)
    md, sd = mean_stderr(lhs - rhs)
    z = md / sd if sd > 0 else 0.0
    return {"lhs": a, "lhs_stderr": sa, "rhs": b, "rhs_stderr": sb, "z": float(z)}
