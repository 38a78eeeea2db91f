"""Deterministic quadrature for kernel spectral fields ``Z(t) = L(t - N) / p(N)``.

For these fields every expectation over ``N`` is an integral against Lebesgue
measure, so Pickands-type constants reduce to one-dimensional integrals of
suprema and lattice sums of shifted copies of ``L``.
"""
from __future__ import annotations

import math

import numpy as np
from scipy.ndimage import maximum_filter1d

from .errors import ConfigError, DivergenceSuspected, InvalidKernel, NonIntegrable
from .kernels import Kernel

GL_NODES = 16
TAIL_TOL = 1e-12


def _gauss_legendre(pieces: np.ndarray, n: int = GL_NODES):
    """Nodes and weights of composite ``n``-point Gauss-Legendre over consecutive breakpoints."""
    x, w = np.polynomial.legendre.leggauss(n)
    a, b = pieces[:-1, None], pieces[1:, None]
    half = 0.5 * (b - a)
    return ((a + b) / 2 + half * x).ravel(), (half * w).ravel()


def _residues(points, period: float, lo: float, hi: float) -> list[float]:
    """Residues in ``[lo, hi)`` of ``points`` modulo ``period``."""
    out = []
    for p in points:
        r = math.fmod(p - lo, period)
        if r < 0:
            r += period
        out.append(lo + r)
    return out


def _cell_pieces(L: Kernel, delta: float) -> np.ndarray:
    """Breakpoints in ``[0, delta]`` where ``u -> max_m L(m delta + u)`` may fail to be smooth."""
    marks = list(L.breakpoints)
    if L.mode is not None:
        marks += [L.mode, L.mode + delta / 2]
    cuts = [0.0, delta] + _residues(marks, delta, 0.0, delta)
    return np.unique(np.round(np.asarray(cuts) / delta, 12)) * delta


def _check_tails(L: Kernel, tol: float):
    mass = L.tail_mass(*L.support)
    if mass > tol:
        raise NonIntegrable(f"kernel mass {mass:.2e} outside the integration box {L.support}")


def _discrete_cover(L: Kernel, delta: float, T: float) -> float:
    """``∫ max_{k=0..K} L(z - k delta) dz`` with ``K = floor(T / delta)``."""
    K = int(math.floor(T / delta + 1e-9))
    a, b = L.support
    m_lo, m_hi = int(math.floor(a / delta)) - 1, int(math.ceil(b / delta)) + 1
    m = np.arange(m_lo, m_hi + 1)
    u, w = _gauss_legendre(_cell_pieces(L, delta))
    total = 0.0
    size = K + 1
    for ui, wi in zip(u, w):
        v = L(m * delta + ui)
        padded = np.concatenate([np.zeros(K), v, np.zeros(K)])
        # window [i - K, i] over the padded sequence
        g = maximum_filter1d(padded, size=size, mode="constant", cval=0.0, origin=(size - 1) // 2)
        total += wi * float(g[K:].sum())
    return total


def kernel_constant(L: Kernel, delta: float, T: float, *, tol: float = 1e-7, max_level: int = 14,
                    start_level: int = 0) -> dict:
    """``T^-1 ∫ sup_{t in [0,T] ∩ δZ} L(z - t) dz`` (d = 1).

    ``delta = 0`` is reached by dyadic refinement ``2^-n`` until successive
    values change by less than ``tol``; the sequence is returned in ``levels``.
    For a unimodal kernel the finite-``T`` continuum value is ``sup L + 1/T``.
    """
    if T <= 0:
        raise ConfigError("T must be positive")
    if delta < 0:
        raise ConfigError("delta must be non-negative")
    _check_tails(L, 1e-10)
    if delta > 0:
        return {"value": float(_discrete_cover(L, delta, T) / T), "levels": [], "converged": True}
    levels = []
    prev = None
    for n in range(start_level, max_level + 1):
        step = 2.0 ** -n
        val = float(_discrete_cover(L, step, T) / T)
        levels.append((step, val))
        if prev is not None and abs(val - prev) < tol:
            return {"value": val, "levels": levels, "converged": True}
        prev = val
    return {"value": levels[-1][1], "levels": levels, "converged": False}


def lattice_sum(L: Kernel, eta: float, s: np.ndarray) -> np.ndarray:
    """``sum_{k in Z} L(k eta + s)`` over the kernel support."""
    a, b = L.support
    s = np.asarray(s, dtype=float)
    k = np.arange(int(math.floor((a - s.max()) / eta)) - 1, int(math.ceil((b - s.min()) / eta)) + 2)
    return L(k[None, :] * eta + s[:, None]).sum(axis=1)


def fubini_identity(L: Kernel, eta: float, nodes: int = 20) -> float:
    """``∫ L(s) / (eta sum_{t in eta Z} L(t + s)) ds``.

    Equals 1 for every ``eta > 0`` for which the periodic sum
    ``sum_k L(s + k eta)`` is positive for all ``s``; otherwise InvalidKernel.
    """
    if not eta > 0:
        raise ConfigError("eta must be positive")
    _check_tails(L, 1e-10)
    a, b = L.support
    cuts = list(np.arange(a, b, eta)) + [b]
    cuts += [p for r in _residues(L.breakpoints, eta, a, a + eta) for p in np.arange(r, b, eta)]
    pieces = np.unique(np.clip(cuts, a, b))
    s, w = _gauss_legendre(pieces, nodes)
    # the identity needs the eta-periodic sum to be positive on a whole period
    period = a + (np.arange(4096) + 0.5) * (eta / 4096)
    if np.any(lattice_sum(L, eta, period) <= 0):
        raise InvalidKernel(f"the eta-lattice sum of the kernel vanishes somewhere (eta={eta})")
    num = L(s)
    den = eta * lattice_sum(L, eta, s)
    ratio = np.divide(num, den, out=np.zeros_like(num), where=den > 0)
    return float(w @ ratio)


def kernel_dy_quadrature(L: Kernel, delta: float, eta: float, R: float, h: float, *,
                         refine: int = 16, check: bool = True, laps_tol: float = 0.01,
                         chunk: int = 1024) -> dict:
    """Ratio functional ``E[Z(0) sup_δ Z / S_η(Z)]`` for a kernel field, integrated over the shift.

    Writing ``s = -N`` the expectation becomes
    ``∫ L(s) sup_{t in δ-grid ∩ [-R,R]} L(t + s) / S_η(s) ds`` with ``S_η`` the
    weighted lattice sum (Riemann sum on mesh ``h`` when ``eta = 0``). The shift
    integral uses a midpoint rule of spacing ``h / refine``. When ``delta != eta``
    the shifted eta-lattice sums are checked for zeros (see ``estimate_H_dy``).
    """
    if delta > 0 and eta == 0:
        raise ConfigError("delta > 0 with eta = 0 is not a supported regime")
    a, b = L.support
    mesh_t = np.arange(-int(round(R / h)), int(round(R / h)) + 1) * h
    ksup = max(1, int(round(delta / h))) if delta > 0 else 1
    keta = max(1, int(round(eta / h))) if eta > 0 else 1
    idx = np.arange(len(mesh_t)) - int(round(R / h))
    sup_mask = np.mod(idx, ksup) == 0
    sum_mask = np.mod(idx, keta) == 0
    weight = eta if eta > 0 else h
    ds = h / refine
    n = int(math.ceil((b - a) / ds))
    s_all = a + (np.arange(n) + 0.5) * ds
    value = viol = mass = 0.0
    check_laps = check and eta > 0 and delta != eta
    for i in range(0, n, chunk):
        s = s_all[i:i + chunk]
        l0 = L(s)
        vals = L(mesh_t[None, :] + s[:, None])
        sup = vals[:, sup_mask].max(axis=1)
        den = weight * vals[:, sum_mask].sum(axis=1)
        term = np.divide(l0 * sup, den, out=np.zeros_like(l0), where=den > 0)
        value += ds * term.sum()
        if check_laps:
            res = np.mod(idx, keta)
            shifts = np.arange(0, keta, ksup)
            sums = np.stack([vals[:, res == r].sum(axis=1) for r in shifts], axis=1)
            viol += ds * float(l0 @ np.any(sums <= 0, axis=1))
            mass += ds * float(l0.sum())
    frac = viol / mass if mass > 0 else 0.0
    if check_laps and frac > laps_tol:
        raise DivergenceSuspected(
            f"shifted eta-lattice sums vanish on {frac:.1%} of the tilted mass (eta={eta}, delta={delta})"
        )
    return {"value": float(value), "laps_violation": frac}


def indicator_coverage(delta: float, T: float) -> float:
    """Lebesgue measure of ``∪_{t in [0,T] ∩ δZ} [t, t+1]`` by a closed formula."""
    if delta <= 0:
        return T + 1.0
    K = int(math.floor(T / delta + 1e-9))
    return K * min(delta, 1.0) + 1.0
