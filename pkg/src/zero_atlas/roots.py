"""All zeros of a truncated random function, with residual certificates."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.spatial import cKDTree
from scipy.special import gammaln

from . import _kernels
from .io import csv_table, fmt_float
from .sampler import RandomFunctionInstance, ZeroFunctionError, deterministic_instance

MAX_ITERS = 500
STEP_TOL = 1e-13
RESIDUAL_TOL = 1e-10
# roots of multiplicity m only resolve to ~eps**(1/m); 1e-6 separates true
# double roots from the closest simple pairs of the random ensembles
CLUSTER_TOL = 1e-6


class RootFindingError(RuntimeError):
    def __init__(self, msg, partial: Optional["ZeroSet"] = None):
        super().__init__(msg)
        self.partial = partial


@dataclass(eq=False)
class ZeroSet:
    """Zeros (location, multiplicity, residual) of one realization.

    ``outside`` flags zeros beyond ``window_radius``; they are kept so that
    ``multiplicity.sum() + origin_multiplicity == degree``.
    """

    zeros: np.ndarray
    multiplicity: np.ndarray
    residual: np.ndarray
    degree: int
    window_radius: float
    origin_multiplicity: int = 0
    seed: Optional[int] = None
    iterations: int = 0
    flags: List[str] = field(default_factory=list)

    @property
    def outside(self) -> np.ndarray:
        return np.abs(self.zeros) > self.window_radius

    @property
    def inside(self) -> np.ndarray:
        return ~self.outside

    def count_in_disk(self, r: float) -> int:
        """Zeros (with multiplicity, origin included) in the open disk ``D_r``."""
        inn = np.abs(self.zeros) < r
        return int(self.multiplicity[inn].sum()) + self.origin_multiplicity

    def count_in_window(self) -> int:
        return int(self.multiplicity[self.inside].sum()) + self.origin_multiplicity

    def expanded(self, window_only: bool = False) -> np.ndarray:
        """Zeros repeated by multiplicity, origin zeros included."""
        keep = self.inside if window_only else np.ones(len(self.zeros), bool)
        pts = np.repeat(self.zeros[keep], self.multiplicity[keep])
        return np.concatenate([np.zeros(self.origin_multiplicity, complex), pts])

    @property
    def max_residual(self) -> float:
        return float(self.residual.max()) if self.residual.size else 0.0

    def to_csv(self) -> str:
        """``re, im, multiplicity, residual`` rows under a ``key=value`` header line."""
        head = (
            f"degree={self.degree},window={fmt_float(self.window_radius)},"
            f"origin_multiplicity={self.origin_multiplicity},seed={self.seed}"
        )
        rows = zip(self.zeros.real, self.zeros.imag, self.multiplicity, self.residual)
        return csv_table(["re", "im", "multiplicity", "residual"], rows, [head])


def newton_polygon_radii(L: np.ndarray) -> np.ndarray:
    """One radius per root from the upper hull of ``(k, log|c_k|)``."""
    k = np.nonzero(np.isfinite(L))[0]
    y = L[k]
    hull: List[int] = []
    for i in range(len(k)):
        while len(hull) >= 2:
            a, b = hull[-2], hull[-1]
            # drop b if it lies on or below the chord a -> i
            if (y[b] - y[a]) * (k[i] - k[a]) <= (y[i] - y[a]) * (k[b] - k[a]):
                hull.pop()
            else:
                break
        hull.append(i)
    radii = []
    for a, b in zip(hull[:-1], hull[1:]):
        cnt = int(k[b] - k[a])
        radii.extend([math.exp((y[a] - y[b]) / cnt)] * cnt)
    return np.asarray(radii)


def _initial_guesses(L: np.ndarray) -> np.ndarray:
    radii = newton_polygon_radii(L)
    out = np.empty(len(radii), dtype=complex)
    i = 0
    e = 0
    while i < len(radii):
        j = i
        while j < len(radii) and radii[j] == radii[i]:
            j += 1
        m = j - i
        # offset breaks symmetry with real axis and between circles
        off = 0.4 + 0.9 * e
        ang = off + 2.0 * math.pi * np.arange(m) / m
        out[i:j] = radii[i] * np.exp(1j * ang)
        i = j
        e += 1
    return out


def _strip(L, ph):
    fin = np.isfinite(L)
    if not fin.any():
        raise ZeroFunctionError("identically zero input")
    idx = np.nonzero(fin)[0]
    lo, hi = int(idx[0]), int(idx[-1])
    return lo, np.ascontiguousarray(L[lo : hi + 1]), np.ascontiguousarray(ph[lo : hi + 1])


def _cluster(z: np.ndarray, tol: float):
    """Union of roots closer than ``tol * max(|z_i|, |z_j|)``."""
    n = len(z)
    parent = np.arange(n)

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    if n > 1:
        scale = max(float(np.abs(z).max()), 1e-300)
        tree = cKDTree(np.column_stack([z.real, z.imag]))
        for i, j in sorted(tree.query_pairs(tol * scale)):
            if abs(z[i] - z[j]) <= tol * max(abs(z[i]), abs(z[j])):
                ri, rj = find(i), find(j)
                if ri != rj:
                    parent[max(ri, rj)] = min(ri, rj)
    roots = np.array([find(i) for i in range(n)], dtype=int)
    labels, inv = np.unique(roots, return_inverse=True)
    centers = np.array([z[inv == g].mean() for g in range(len(labels))])
    mult = np.bincount(inv)
    return centers, mult


def _falling_weights(L, order: int) -> np.ndarray:
    """``L_k + log k(k-1)...(k-order+1)``, so the series becomes ``z^order G^(order)``."""
    k = np.arange(L.size, dtype=float)
    with np.errstate(invalid="ignore"):
        w = np.where(
            k >= order, gammaln(k + 1.0) - gammaln(np.maximum(k - order, 0) + 1.0), -np.inf
        )
    return np.ascontiguousarray(L + w)


def _newton_ratio(La, ph, z, m):
    """``G^{(m-1)}(z) / (z G^{(m)}(z))`` as ``(log modulus, complex ratio)``."""
    lg, ang = _kernels.newton_pair_many(La, ph, np.log(np.abs(z)), np.angle(z), float(m))
    with np.errstate(over="ignore"):
        return lg, np.exp(lg) * np.exp(1j * ang)


def _polish_and_residuals(L, ph, z, mult, steps: int = 4):
    """Residuals ``|G^{(m-1)}(z)| / (|z| |G^{(m)}(z)|)`` from log-domain sums.

    Clusters of size ``m > 1`` are first moved by Newton steps on
    ``G^{(m-1)}``, which has a simple zero there.
    """
    z = z.copy()
    out = np.empty(len(z))
    for m in np.unique(mult):
        m = int(m)
        La = _falling_weights(L, m - 1)
        sel = np.nonzero(mult == m)[0]
        if m > 1:
            for _ in range(steps):
                _, ratio = _newton_ratio(La, ph, z[sel], m)
                z[sel] = z[sel] * (1.0 - ratio)
        lg, _ = _newton_ratio(La, ph, z[sel], m)
        out[sel] = np.exp(lg)
    return z, out


def find_roots_log(
    L,
    ph,
    window_radius: float = math.inf,
    seed: Optional[int] = None,
    continuous_noise: bool = False,
    max_iters: int = MAX_ITERS,
    residual_tol: float = RESIDUAL_TOL,
    cluster_tol: float = CLUSTER_TOL,
) -> ZeroSet:
    """Zeros of ``sum exp(L_k) e^{i ph_k} z^k``."""
    L = np.asarray(L, dtype=float)
    ph = np.asarray(ph, dtype=float)
    degree = len(L) - 1
    origin, Ls, phs = _strip(L, ph)
    K = len(Ls) - 1
    flags: List[str] = []
    if K == 0:
        return ZeroSet(np.zeros(0, complex), np.zeros(0, int), np.zeros(0), degree,
                       window_radius, origin, seed, 0, flags)
    # center the coefficient log-magnitudes: z = c w with |c_0| = |c_K| c^K
    log_c = (Ls[0] - Ls[-1]) / K
    Lw = Ls + log_c * np.arange(K + 1)
    Lw = Lw - 0.5 * (Lw.max() + Lw[np.isfinite(Lw)].min())
    if K == 1:
        w = np.array([-np.exp(Lw[0] - Lw[1]) * np.exp(1j * (phs[0] - phs[1]))])
        iters, conv = 0, np.array([True])
    else:
        w = _initial_guesses(Lw)
        iters, conv = _kernels.aberth(Lw, phs, w, max_iters, STEP_TOL)
    z = w * math.exp(log_c)
    centers, mult = _cluster(z, cluster_tol)
    centers, res = _polish_and_residuals(Ls, phs, centers, mult)
    if np.any(mult > 1) and continuous_noise:
        flags.append(f"multiple roots under continuous noise: {int((mult > 1).sum())} clusters")
    if np.any(res > residual_tol):
        flags.append(f"residual above {residual_tol:g}: {int((res > residual_tol).sum())} zeros")
    order = np.lexsort((centers.imag, centers.real, np.abs(centers)))
    zs = ZeroSet(centers[order], mult[order], res[order], degree, window_radius,
                 origin, seed, int(iters), flags)
    if not conv.all():
        raise RootFindingError(
            f"no convergence after {max_iters} iterations ({int((~conv).sum())} roots)", zs
        )
    return zs


def find_roots(inst: RandomFunctionInstance, **kw) -> ZeroSet:
    """Zeros of the realization ``inst``, outside-window zeros flagged."""
    if inst.degree < 1:
        raise ValueError("degree must be >= 1")
    cont = inst.noise is not None and inst.noise.kind != "rademacher"
    return find_roots_log(inst.log_mag, inst.phase, inst.window_radius, inst.seed,
                          continuous_noise=cont, **kw)


def find_roots_coefficients(coeffs, window_radius: float = math.inf, **kw) -> ZeroSet:
    inst = deterministic_instance(coeffs, window_radius=window_radius)
    return find_roots_log(inst.log_mag, inst.phase, window_radius, **kw)


def _circle_values(L, ph, r, N):
    """``G(r e^{2 pi i j/N}) / max term`` via FFT, ``N >= len(L)``."""
    lr = math.log(r)
    a = L + lr * np.arange(L.size)
    M = a[np.isfinite(a)].max()
    c = np.zeros(N, dtype=complex)
    c[: L.size] = np.exp(a - M) * np.exp(1j * ph)
    # G(zeta_j) = sum c_k zeta_j^k = N * ifft(c)_j
    return N * np.fft.ifft(c), c[: L.size]


def _winding(L, ph, r):
    K = L.size - 1
    N = 1 << int(math.ceil(math.log2(max(8 * (K + 1), 256))))
    vals, c = _circle_values(L, ph, r, N)
    theta = 2.0 * math.pi * np.arange(N + 1) / N
    vals = np.append(vals, vals[0])
    floor_ = 1e-9 * np.abs(c).sum()
    if np.min(np.abs(vals)) < floor_:
        return None
    total = 0.0
    stack = [(theta[j], theta[j + 1], vals[j], vals[j + 1]) for j in range(N)]
    budget = 200_000
    while stack:
        t0, t1, v0, v1 = stack.pop()
        d = np.angle(v1 / v0)
        if abs(d) > math.pi / 4:
            budget -= 1
            if budget < 0 or t1 - t0 < 1e-13:
                return None
            tm = 0.5 * (t0 + t1)
            vm = _kernels.horner(c, np.exp(1j * tm))[0]
            if abs(vm) < floor_:
                return None
            stack.append((t0, tm, v0, vm))
            stack.append((tm, t1, vm, v1))
        else:
            total += d
    return total / (2.0 * math.pi)


def count_zeros_in_disk(inst, r: float, max_jitter: int = 8) -> int:
    """Winding number of ``G`` along ``|z| = r`` (argument principle).

    Phase increments are refined until each is below ``pi/4``; the circle is
    jittered when a zero sits on it or the winding is not near an integer.
    """
    if isinstance(inst, RandomFunctionInstance):
        L, ph = inst.log_mag, inst.phase
    else:
        L, ph = inst
    L = np.asarray(L, dtype=float)
    ph = np.asarray(ph, dtype=float)
    if not np.any(np.isfinite(L)):
        raise ZeroFunctionError("identically zero input")
    rr = float(r)
    for attempt in range(max_jitter + 1):
        w = _winding(L, ph, rr)
        if w is not None and abs(w - round(w)) < 0.1:
            return int(round(w))
        rr = r * (1.0 + 1e-5 * (attempt + 1) * (-1) ** attempt)
    raise RootFindingError(f"winding at r={r} not integral: zero on the circle suspected")


def companion_roots(coeffs) -> np.ndarray:
    """Eigenvalues of the companion matrix (small-degree oracle)."""
    c = np.asarray(coeffs, dtype=complex)
    return np.roots(c[::-1])


def match_roots(a, b) -> np.ndarray:
    """Distances between optimally matched roots of two equal-size sets."""
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    if a.shape != b.shape:
        raise ValueError("root sets differ in size")
    cost = np.abs(a[:, None] - b[None, :])
    i, j = linear_sum_assignment(cost)
    return cost[i, j]
