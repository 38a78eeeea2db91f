"""Monte Carlo estimators of Pickands-type constants.

Three routes are implemented:

* ``estimate_H_direct`` -- ``T^-d E[max over [0,T]^d ∩ δZ^d of Z]`` at a single
  horizon. The ``plain`` method averages the maximum of fresh paths. The default
  ``normalized`` method uses the shift identity
  ``E[max_S Z] = n E[Z(0) max_{t in S} Z(t - tau) / sum_{t in M} Z(t - tau)]``
  with ``tau`` uniform on a mesh ``M ⊇ S`` of ``n`` points, which is bounded by
  ``n Z(0)`` and therefore usable for fields whose maxima are heavy tailed.
* ``estimate_H_dy`` -- ``E[Z(0) sup_{δ-lattice} Z / S_η(Z)]`` on a truncation
  window ``[-R, R]^d``.
* ``estimate_family_H`` -- Gauss-Legendre integral over ``z`` of per-member
  constants with common random numbers across nodes.

Continuum quantities (``delta = 0``) are approximated on a simulation mesh ``h``.
"""
from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass, field

import numpy as np

from . import kernel_quad
from .errors import ConfigError, DivergenceSuspected
from .grid import GridSpec, is_multiple, subgrid_mask
from .spectral import Family, KernelField, SpectralField, check_family
from .streams import DEFAULT_BLOCK, TAG_MAIN, map_blocks, mean_stderr

DIVERGENCE_GROWTH = 0.10
LAPS_TOL = 0.01


def fingerprint(payload: dict) -> str:
    blob = json.dumps(payload, sort_keys=True, default=str, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass
class EstimateResult:
    estimate: float
    stderr: float
    reps: int
    elapsed: float
    fingerprint: str
    meta: dict = field(default_factory=dict)

    def __iter__(self):
        yield self.estimate
        yield self.stderr


@dataclass(frozen=True)
class DYConfig:
    """Settings for the ratio estimator.

    ``delta`` is the lattice of the supremum and ``eta`` the lattice of the
    normalising sum (0 means the mesh Riemann sum). ``h`` is the simulation mesh;
    nonzero ``delta`` and ``eta`` must be multiples of it. Supported regimes are
    ``delta = eta = 0``, ``delta = 0 < eta`` and ``eta = k * delta`` with ``k >= 1``.
    """

    delta: float = 0.0
    eta: float = 0.0
    R: float = 10.0
    h: float = 0.01
    d: int = 1

    def __post_init__(self):
        if self.delta < 0 or self.eta < 0:
            raise ConfigError("delta and eta must be non-negative")
        if not self.R > 0 or not self.h > 0:
            raise ConfigError("R and h must be positive")
        for name, v in (("delta", self.delta), ("eta", self.eta)):
            if v > 0 and (v < self.h * (1 - 1e-12) or not is_multiple(v, self.h)):
                raise ConfigError(f"{name}={v} must be a positive multiple of the mesh h={self.h}")
        if self.delta > 0 and self.eta == 0:
            raise ConfigError("delta > 0 with eta = 0 is not a supported regime; use eta = k*delta")
        if self.delta > 0 and self.eta > 0 and not is_multiple(self.eta, self.delta):
            raise ConfigError("eta must be an integer multiple of delta when both are positive")
        if not is_multiple(self.R, self.h):
            raise ConfigError("R must be a multiple of h")

    @property
    def matched(self) -> bool:
        return self.delta == self.eta

    def step(self, v: float) -> int:
        return max(1, int(round(v / self.h))) if v > 0 else 1

    def describe(self) -> dict:
        return {"delta": self.delta, "eta": self.eta, "R": self.R, "h": self.h, "d": self.d}


def _describe(spec) -> dict:
    return spec.describe() if hasattr(spec, "describe") else {"spec": repr(spec)}


def _result(values, payload, t0, meta=None) -> EstimateResult:
    m, se = mean_stderr(values)
    return EstimateResult(m, se, int(len(values)), time.perf_counter() - t0, fingerprint(payload), meta or {})


# ---------------------------------------------------------------------------
# direct estimator


def _shifted_mesh_values(spec: SpectralField, mesh: GridSpec, rng, n):
    """Values ``Z(t - tau)`` over mesh points ``t`` with ``tau`` uniform on the mesh.

    Returns ``(z0, zm)``; ``z0 = Z(0)`` has shape ``(n,)`` and ``zm`` has shape
    ``(n, mesh.size)``. One path on the difference window ``M - M`` is drawn per
    replication, followed by the ``tau`` index.
    """
    na, d = mesh.points_per_axis, mesh.d
    win = GridSpec.window((na - 1) * mesh.delta, mesh.delta, d)
    zw = spec.sample(win, rng, n)
    tau = rng.integers(0, na, size=(n, d))
    start = na - 1 - tau
    if d == 1:
        idx = start[:, :1] + np.arange(na)
        return zw[:, na - 1], np.take_along_axis(zw, idx, axis=1)
    w = 2 * na - 1
    zw3 = zw.reshape(n, w, w)
    view = np.lib.stride_tricks.sliding_window_view(zw3, (na, na), axis=(1, 2))
    zm = view[np.arange(n), start[:, 0], start[:, 1]].reshape(n, na * na)
    return zw3[:, na - 1, na - 1], zm


def _normalized_maxima(z0, zm, masks):
    """Per-replication ``n Z(0) max_S / sum_M`` for each subset mask; shape ``(n, len(masks))``."""
    total = zm.sum(axis=1)
    scale = np.zeros_like(total)
    np.divide(zm.shape[1] * z0, total, out=scale, where=total > 0)
    return np.stack([zm[:, m].max(axis=1) * scale for m in masks], axis=1)


def mesh_maxima(spec: SpectralField, mesh: GridSpec, masks, rng, n, method: str = "normalized"):
    """Per-replication unbiased draws of ``max over subset`` for nested subsets of a box mesh."""
    if method == "normalized":
        z0, zm = _shifted_mesh_values(spec, mesh, rng, n)
        return _normalized_maxima(z0, zm, masks)
    if method == "plain":
        zm = spec.sample(mesh, rng, n)
        return np.stack([zm[:, m].max(axis=1) for m in masks], axis=1)
    raise ConfigError(f"unknown direct method {method!r}")


def estimate_H_direct(
    spec: SpectralField,
    T: float,
    delta: float,
    reps: int,
    seed: int = 0,
    *,
    d: int | None = None,
    method: str = "normalized",
    continuum_proxy: bool = False,
    block: int = DEFAULT_BLOCK,
    workers=None,
    progress=None,
) -> EstimateResult:
    """``T^-d E[max over [0,T]^d ∩ δZ^d of Z]``, an upper-biased proxy for ``H^δ``."""
    if reps < 100:
        raise ConfigError("direct estimator needs at least 100 replications")
    t0 = time.perf_counter()
    d = d or getattr(spec, "d", 1)
    mesh = GridSpec.box(T, delta, d)
    full = np.ones(mesh.size, dtype=bool)
    vals = map_blocks(
        lambda rng, n: mesh_maxima(spec, mesh, [full], rng, n, method)[:, 0] / T**d,
        reps, seed, tag=TAG_MAIN, block=block, workers=workers, progress=progress,
    )
    payload = {"op": "direct", "spec": _describe(spec), "T": T, "delta": delta, "d": d,
               "method": method, "reps": reps, "seed": seed, "block": block}
    return _result(vals, payload, t0, {"method": method, "points": mesh.size,
                                       "continuum_proxy": continuum_proxy})


# ---------------------------------------------------------------------------
# ratio estimator E[Z(0) sup Z / S_eta(Z)]


class _Window:
    """Precomputed masks for the ratio estimator on ``[-R, R]^d ∩ hZ^d``."""

    def __init__(self, cfg: DYConfig, R: float | None = None):
        R = cfg.R if R is None else R
        self.grid = GridSpec.window(R, cfg.h, cfg.d)
        self.points = self.grid.points()
        self.origin = self.grid.origin_index()
        self.sup_mask = subgrid_mask(self.grid, cfg.step(cfg.delta))
        self.sum_mask = subgrid_mask(self.grid, cfg.step(cfg.eta))
        self.weight = (cfg.eta if cfg.eta > 0 else cfg.h) ** cfg.d
        radius = np.max(np.abs(self.points), axis=1)
        self.nested = [radius <= R / 4 + 1e-9 * R, radius <= R / 2 + 1e-9 * R]
        # residue classes of the eta lattice, restricted to shifts on the delta lattice
        k = cfg.step(cfg.eta)
        idx = self.grid.indices()
        self.residues = None
        if not cfg.matched and cfg.eta > 0:
            res = np.mod(idx, k)
            label = res[:, 0] if cfg.d == 1 else res[:, 0] * k + res[:, 1]
            sstep = cfg.step(cfg.delta)
            keep = np.all(np.mod(np.arange(k)[:, None].repeat(cfg.d, 1), sstep) == 0, axis=1)
            classes = np.arange(k)[keep] if cfg.d == 1 else np.array(
                [a * k + b for a in np.arange(k)[keep] for b in np.arange(k)[keep]])
            onehot = (label[:, None] == classes[None, :]).astype(float)
            self.residues = onehot


def _ratios(z, win: _Window, restrict=None):
    sup_m, sum_m = win.sup_mask, win.sum_mask
    if restrict is not None:
        sup_m, sum_m = sup_m & restrict, sum_m & restrict
    z0 = z[:, win.origin]
    num = z0 * z[:, sup_m].max(axis=1)
    den = win.weight * z[:, sum_m].sum(axis=1)
    out = np.zeros_like(num)
    np.divide(num, den, out=out, where=den > 0)
    return out


def _laps_violation(z, win: _Window):
    """``Z(0)``-weighted indicator that some shifted eta-lattice sum vanishes."""
    z0 = z[:, win.origin]
    if win.residues is None:
        return np.zeros_like(z0)
    sums = z @ win.residues
    return z0 * np.any(sums <= 0, axis=1)


def estimate_H_dy(
    spec: SpectralField,
    cfg: DYConfig,
    reps: int,
    seed: int = 0,
    *,
    method: str = "mc",
    check_divergence: bool = True,
    block: int = DEFAULT_BLOCK,
    workers=None,
    progress=None,
) -> EstimateResult:
    """``E[Z(0) sup_{δ} Z / S_η(Z)]`` over the window ``[-R, R]^d``.

    ``method="quadrature"`` integrates over the kernel shift instead of sampling it
    (KernelField only). Raises DivergenceSuspected when the estimate grows by more
    than 10% at each doubling ``R/4 -> R/2 -> R`` of the window, or when the
    normalising sum over a shifted eta-lattice vanishes on more than 1% of the
    ``Z(0)``-weighted mass (only checked for ``delta != eta``).
    """
    t0 = time.perf_counter()
    payload = {"op": "dy", "spec": _describe(spec), **cfg.describe(), "reps": reps,
               "seed": seed, "block": block, "method": method}
    if method == "quadrature":
        if not isinstance(spec, KernelField):
            raise ConfigError("quadrature route needs a kernel field")
        out = kernel_quad.kernel_dy_quadrature(spec.kernel, cfg.delta, cfg.eta, cfg.R, cfg.h,
                                               check=check_divergence)
        return EstimateResult(out["value"], 0.0, 0, time.perf_counter() - t0, fingerprint(payload),
                              {"method": method, "laps_violation": out["laps_violation"]})
    if method != "mc":
        raise ConfigError(f"unknown ratio method {method!r}")
    if spec.d != cfg.d:
        raise ConfigError("field dimension and config dimension differ")
    win = _Window(cfg)

    def fn(rng, n):
        z = spec.sample(win.grid, rng, n)
        cols = [_ratios(z, win)]
        cols += [_ratios(z, win, m) for m in win.nested]
        cols.append(_laps_violation(z, win))
        cols.append(z[:, win.origin])
        return np.stack(cols, axis=1)

    vals = map_blocks(fn, reps, seed, tag=TAG_MAIN, block=block, workers=workers, progress=progress)
    est, quarter, half = vals[:, 0], vals[:, 1], vals[:, 2]
    laps = float(vals[:, 3].sum() / max(vals[:, 4].sum(), np.finfo(float).tiny))
    checkpoints = [float(quarter.mean()), float(half.mean()), float(est.mean())]
    meta = {"method": method, "checkpoints": checkpoints, "laps_violation": laps,
            "points": win.grid.size}
    if check_divergence:
        a, b, c = checkpoints
        if a > 0 and b > (1 + DIVERGENCE_GROWTH) * a and c > (1 + DIVERGENCE_GROWTH) * b:
            raise DivergenceSuspected(f"ratio estimate keeps growing with the window: {checkpoints}")
        if laps > LAPS_TOL:
            raise DivergenceSuspected(
                f"shifted eta-lattice sums vanish on {laps:.1%} of the tilted mass; "
                f"the ratio formula does not apply for eta={cfg.eta}, delta={cfg.delta}"
            )
    return _result(est, payload, t0, meta)


# ---------------------------------------------------------------------------
# continuity sweep


@dataclass
class SweepResult:
    rows: list  # (delta, EstimateResult)
    gaps: list
    gap_stderr: list
    paths_monotone: bool
    diagnosis: str

    @property
    def deltas(self):
        return [r[0] for r in self.rows]

    @property
    def estimates(self):
        return [r[1].estimate for r in self.rows]


def _check_deltas(deltas, h):
    deltas = [float(x) for x in deltas]
    if any(b >= a for a, b in zip(deltas, deltas[1:])):
        raise ConfigError("deltas must be strictly decreasing")
    for x in deltas:
        if not is_multiple(x, h) or x < h * (1 - 1e-12):
            raise ConfigError(f"delta={x} is not a multiple of the mesh h={h}")
    return deltas


def continuity_sweep(
    spec: SpectralField,
    deltas,
    reps: int,
    seed: int = 0,
    *,
    estimator: str = "dy",
    T: float = 20.0,
    R: float = 20.0,
    h: float | None = None,
    eta: str | float = "matched",
    direct_method: str = "normalized",
    block: int = DEFAULT_BLOCK,
    workers=None,
    progress=None,
) -> SweepResult:
    """Estimates at decreasing ``delta`` from common random numbers.

    All rows reuse the same paths on the finest mesh ``h`` (default: the last
    delta), so maxima at coarser ``delta`` are maxima over subsets and the
    per-path maxima are nondecreasing as ``delta`` decreases.
    """
    t0 = time.perf_counter()
    h = float(h or min(deltas))
    deltas = _check_deltas(deltas, h)
    d = getattr(spec, "d", 1)
    if estimator == "direct":
        mesh = GridSpec.box(T, h, d)
        masks = [subgrid_mask(mesh, int(round(x / h))) for x in deltas]

        def fn(rng, n):
            if direct_method == "normalized":
                z0, zm = _shifted_mesh_values(spec, mesh, rng, n)
                total = zm.sum(axis=1)
                scale = np.zeros_like(total)
                np.divide(zm.shape[1] * z0, total, out=scale, where=total > 0)
                maxima = np.stack([zm[:, m].max(axis=1) for m in masks], axis=1)
                return maxima * scale[:, None] / T**d, maxima
            zm = spec.sample(mesh, rng, n)
            maxima = np.stack([zm[:, m].max(axis=1) for m in masks], axis=1)
            return maxima / T**d, maxima
    elif estimator == "dy":
        cfgs = []
        for x in deltas:
            e = x if eta == "matched" else float(eta)
            cfgs.append(DYConfig(delta=x, eta=e, R=R, h=h, d=d))
        wins = [_Window(c) for c in cfgs]
        base = wins[0]

        def fn(rng, n):
            z = spec.sample(base.grid, rng, n)
            est = np.stack([_ratios(z, w) for w in wins], axis=1)
            maxima = np.stack([z[:, w.sup_mask].max(axis=1) for w in wins], axis=1)
            return est, maxima
    else:
        raise ConfigError(f"unknown estimator {estimator!r}")

    est, maxima = map_blocks(fn, reps, seed, tag=TAG_MAIN, block=block, workers=workers, progress=progress)
    monotone = bool(np.all(np.diff(maxima, axis=1) >= 0))
    elapsed = time.perf_counter() - t0
    rows = []
    for i, x in enumerate(deltas):
        payload = {"op": "sweep", "estimator": estimator, "spec": _describe(spec), "delta": x,
                   "deltas": deltas, "T": T, "R": R, "h": h, "eta": eta, "reps": reps,
                   "seed": seed, "block": block, "direct_method": direct_method}
        m, se = mean_stderr(est[:, i])
        rows.append((x, EstimateResult(m, se, reps, elapsed, fingerprint(payload),
                                       {"estimator": estimator})))
    diffs = np.diff(est, axis=1)
    gaps = [float(abs(v)) for v in diffs.mean(axis=0)]
    gap_se = [float(v) for v in diffs.std(axis=0, ddof=1) / np.sqrt(reps)]
    nonincreasing = all(b <= a for a, b in zip(gaps, gaps[1:]))
    converged = nonincreasing and bool(gaps) and gaps[-1] <= 3 * gap_se[-1]
    return SweepResult(rows, gaps, gap_se, monotone, "converged" if converged else "not-converged")


# ---------------------------------------------------------------------------
# locally stationary family


def _clone(rng: np.random.Generator) -> np.random.Generator:
    g = np.random.Generator(type(rng.bit_generator)())
    g.bit_generator.state = rng.bit_generator.state
    return g


def _legendre_tail(values: np.ndarray, nodes01: np.ndarray) -> float:
    """Magnitude of the top Legendre coefficient of the node interpolant (smoothness proxy)."""
    if len(values) < 2:
        return 0.0
    coef = np.polynomial.legendre.legfit(2 * nodes01 - 1, values, len(values) - 1)
    return float(abs(coef[-1]))


def estimate_family_H(
    fam: Family,
    delta: float,
    reps: int,
    seed: int = 0,
    *,
    nodes: int = 4,
    estimator: str = "dy",
    R: float = 10.0,
    h: float = 0.01,
    T: float = 20.0,
    block: int = DEFAULT_BLOCK,
    workers=None,
    progress=None,
) -> EstimateResult:
    """``int_0^1 H^δ_{Z_z} dz`` by ``nodes``-point Gauss-Legendre in ``z``.

    Every node reuses the same random stream per block, and the weighted sum is
    formed per replication so the reported stderr accounts for the induced
    correlation. Nodes where ``sigma_z ≡ 0`` (``Z_z ≡ 1``) contribute 0.
    """
    t0 = time.perf_counter()
    x, w = np.polynomial.legendre.leggauss(nodes)
    z_nodes, weights = (x + 1) / 2, w / 2
    report = check_family(fam, z_nodes)
    members = [fam.at(z) for z in z_nodes]
    degenerate = [r["degenerate"] for r in report]
    d = fam.d
    if estimator == "dy":
        # a positive delta only needs the delta lattice itself
        cfg = DYConfig(delta=delta, eta=delta, R=R, h=delta if delta > 0 else h, d=d)
        win = _Window(cfg)

        def one(member, rng, n):
            return _ratios(member.sample(win.grid, rng, n), win)
    elif estimator == "direct":
        mesh = GridSpec.box(T, delta if delta > 0 else h, d)
        full = np.ones(mesh.size, dtype=bool)

        def one(member, rng, n):
            return mesh_maxima(member, mesh, [full], rng, n)[:, 0] / T**d
    else:
        raise ConfigError(f"unknown estimator {estimator!r}")

    def fn(rng, n):
        cols = []
        for member, deg in zip(members, degenerate):
            cols.append(np.zeros(n) if deg else one(member, _clone(rng), n))
        return np.stack(cols, axis=1)

    per = map_blocks(fn, reps, seed, tag=TAG_MAIN, block=block, workers=workers, progress=progress)
    combined = per @ weights
    m, se_mc = mean_stderr(combined)
    node_means = per.mean(axis=0)
    quad_err = _legendre_tail(node_means, z_nodes)
    payload = {"op": "family", "spec": _describe(fam), "delta": delta, "nodes": nodes,
               "estimator": estimator, "R": R, "h": h, "T": T, "reps": reps, "seed": seed, "block": block}
    meta = {"nodes": z_nodes.tolist(), "weights": weights.tolist(), "node_estimates": node_means.tolist(),
            "mc_stderr": se_mc, "quadrature_error": quad_err, "degenerate_nodes": degenerate,
            "positivity_hint": [r["positivity_hint"] for r in report]}
    return EstimateResult(m, float(np.hypot(se_mc, quad_err)), reps, time.perf_counter() - t0,
                          fingerprint(payload), meta)


# ---------------------------------------------------------------------------
# subadditivity


def subadditivity_check(
    spec: SpectralField,
    T1: float,
    T2: float,
    delta: float,
    reps: int,
    seed: int = 0,
    *,
    method: str = "normalized",
    block: int = DEFAULT_BLOCK,
    workers=None,
) -> dict:
    """``a(T1 + T2) <= a(T1) + a(T2)`` with ``a(T) = E max over [0,T] ∩ δZ`` (d = 1).

    The three maxima come from one path on ``[0, T1 + T2]``; ``a(T2)`` is read off
    the block ``[T1, T1 + T2]``, so the inequality holds path by path.
    """
    if getattr(spec, "d", 1) != 1:
        raise ConfigError("subadditivity check is one-dimensional")
    if not is_multiple(T1, delta):
        raise ConfigError("T1 must be a multiple of delta")
    mesh = GridSpec.box(T1 + T2, delta)
    t = mesh.points()[:, 0]
    eps = 1e-9 * max(1.0, T1 + T2)
    masks = [t <= T1 + eps, t >= T1 - eps, np.ones_like(t, dtype=bool)]
    vals = map_blocks(lambda rng, n: mesh_maxima(spec, mesh, masks, rng, n, method),
                      reps, seed, tag=TAG_MAIN, block=block, workers=workers)
    a1, s1 = mean_stderr(vals[:, 0])
    a2, s2 = mean_stderr(vals[:, 1])
    a12, s12 = mean_stderr(vals[:, 2])
    slack = vals[:, 0] + vals[:, 1] - vals[:, 2]
    ms, ss = mean_stderr(slack)
    z = ms / ss if ss > 0 else (0.0 if ms == 0 else np.inf)
    return {"a_T1": a1, "a_T2": a2, "a_T1T2": a12, "stderr": (s1, s2, s12),
            "slack": ms, "slack_stderr": ss, "z": float(z), "min_path_slack": float(slack.min())}
