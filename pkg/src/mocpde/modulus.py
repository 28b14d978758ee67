"""Modulus of continuity of a grid function by exhaustive pair enumeration.

    omega(s) = sup{ (u(x) - u(y))/2 : |x - y| = 2s }

All node pairs are visited, grouped by their offset vector: on a torus each
offset is a cyclic shift of the whole array (distance by minimal image), on a
Neumann rectangle it is the overlap of two shifted slices (plain Euclidean
distance).  Each offset has a single distance, so the per-offset maximum is
exact and binning only merges whole offsets.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import MocPdeError
from .solver import GridField

# relative rounding used to merge equal distances in exact mode
_DIST_DECIMALS = 12


@dataclass
class ModulusCurve:
    """omega per distance group.

    ``s_values`` are bin centres (binned mode) or the exact half-distances
    (exact mode, ``bins=None``).  ``s_lo``/``s_hi`` are the smallest and
    largest pair half-distance in each group; ``counts`` are ordered pair
    counts.  Empty bins hold NaN in ``omega`` and are skipped by comparisons.
    """

    s_values: np.ndarray
    omega: np.ndarray
    t: float
    metric: str
    counts: np.ndarray
    s_lo: np.ndarray
    s_hi: np.ndarray
    bins: int | None = None
    s_max: float = math.nan

    @property
    def occupied(self):
        return self.counts > 0

    def to_csv(self, path):
        np.savetxt(path, np.column_stack([self.s_values, self.omega]), delimiter=",",
                   header="s,omega", comments="", fmt="%.17g")


def _offset_maxima_torus(u, spacing):
    """(half-distance, max |du|/2, ordered pair count) per offset class {k, -k}."""
    if u.ndim == 1:
        N = u.shape[0]
        (h,) = spacing
        ext = np.concatenate([u, u])
        win = sliding_window_view(ext, N)[: N // 2 + 1]  # win[j][a] = u[(a + j) % N]
        m = np.abs(win - u[None, :]).max(axis=1)
        j = np.arange(N // 2 + 1)
        d = h * np.minimum(j, N - j)
        weight = np.where((j > 0) & (2 * j < N), 2, 1)
        return d / 2, m / 2, N * weight
    N1, N2 = u.shape
    h1, h2 = spacing
    ext = np.concatenate([u, u], axis=1)
    win = sliding_window_view(ext, N2, axis=1)[:, :N2, :]  # win[a, j, b] = u[a, (b + j) % N2]
    j = np.arange(N2)
    dj = h2 * np.minimum(j, N2 - j)
    out_d, out_m, out_c = [], [], []
    for i in range(N1 // 2 + 1):
        shifted = np.roll(u, -i, axis=0)  # shifted[a, b] = u[(a + i) % N1, b]
        m = np.abs(win - shifted[:, None, :]).max(axis=(0, 2))
        di = h1 * min(i, N1 - i)
        out_d.append(np.hypot(di, dj))
        out_m.append(m)
        # rows 0 < i < N1/2 also stand for the offsets (-i, -j), which are not enumerated
        out_c.append(np.full(N2, N1 * N2 * (2 if 0 < 2 * i < N1 else 1)))
    d = np.concatenate(out_d)
    m = np.concatenate(out_m)
    return d / 2, m / 2, np.concatenate(out_c)


def _offset_maxima_box(u, spacing):
    if u.ndim == 1:
        N = u.shape[0]
        (h,) = spacing
        d, m, c = [], [], []
        for i in range(N):
            d.append(h * i)
            m.append(np.abs(u[i:] - u[: N - i]).max())
            c.append(2 * (N - i) if i else N)
        return np.array(d) / 2, np.array(m) / 2, np.array(c)
    N1, N2 = u.shape
    h1, h2 = spacing
    d, m, c = [], [], []
    for i in range(N1):
        A, B = u[i:], u[: N1 - i]
        for j in range(-(N2 - 1), N2):
            if i == 0 and j < 0:
                continue  # (0, -j) pairs are the (0, j) pairs reversed
            if j >= 0:
                diff = A[:, j:] - B[:, : N2 - j]
            else:
                diff = A[:, : N2 + j] - B[:, -j:]
            d.append(math.hypot(h1 * i, h2 * j))
            m.append(np.abs(diff).max())
            c.append(diff.size * (1 if (i, j) == (0, 0) else 2))
    return np.array(d) / 2, np.array(m) / 2, np.array(c)


def half_diameter(field: GridField, metric):
    if metric == "torus":
        return 0.5 * math.sqrt(sum((L / 2) ** 2 for L in field.extent))
    return 0.5 * math.sqrt(sum(L * L for L in field.extent))


def compute_moc(field: GridField, bins=None, metric=None) -> ModulusCurve:
    """Modulus of continuity of ``field``.

    ``bins=None`` keeps every distinct pair distance as its own entry (exact
    mode); an integer ``bins >= 2`` groups half-distances into bins of width
    s_max/bins, s_max being half the domain diameter in the metric.  The
    metric defaults to the torus for periodic fields and Euclidean otherwise.
    The zero offset (x = y) is excluded.
    """
    if field.values.size < 2:
        raise MocPdeError("compute_moc needs at least 2 nodes")
    metric = metric or ("torus" if field.boundary == "periodic" else "euclidean")
    if metric not in ("torus", "euclidean"):
        raise MocPdeError(f"unknown metric {metric!r}")
    if bins is not None and bins < 2:
        raise MocPdeError("bins >= 2 required")
    if metric == "torus":
        s, m, c = _offset_maxima_torus(field.values, field.spacing)
    else:
        s, m, c = _offset_maxima_box(field.values, field.spacing)
    keep = s > 0
    s, m, c = s[keep], m[keep], c[keep]
    s_max = half_diameter(field, metric)

    if bins is None:
        key = np.round(s / s_max, _DIST_DECIMALS)
        uniq, inv = np.unique(key, return_inverse=True)
        k, nb = inv, uniq.size
    else:
        k = np.minimum((s / (s_max / bins)).astype(int), bins - 1)
        nb = bins
    omega = np.full(nb, -np.inf)
    np.maximum.at(omega, k, m)
    counts = np.zeros(nb, dtype=np.int64)
    np.add.at(counts, k, c)
    s_lo = np.full(nb, np.inf)
    np.minimum.at(s_lo, k, s)
    s_hi = np.full(nb, -np.inf)
    np.maximum.at(s_hi, k, s)
    empty = counts == 0
    omega[empty] = s_lo[empty] = s_hi[empty] = np.nan
    if bins is None:
        centres = s_lo.copy()
    else:
        centres = (np.arange(bins) + 0.5) * (s_max / bins)
    return ModulusCurve(centres, omega, field.t, metric, counts, s_lo, s_hi, bins, s_max)


@dataclass
class BoundReport:
    ok: bool
    worst_bin: int
    worst_excess: float
    worst_s: float

    def to_dict(self):
        return {"ok": self.ok, "worst_bin": self.worst_bin, "worst_excess": self.worst_excess,
                "worst_s": self.worst_s}


def is_bounded_by(curve: ModulusCurve, profile, tol=0.0, min_count=0) -> BoundReport:
    """Check omega <= profile(s) + tol on occupied groups.

    The profile is evaluated at the smallest pair half-distance in each group,
    which for a nondecreasing profile is the conservative choice.  ``tol`` may
    be a number or a callable of the profile value (e.g. ``lambda p: 0.05*p + 0.01``).
    Groups with fewer than ``min_count`` pairs are ignored.
    """
    occ = np.flatnonzero(curve.occupied & (curve.counts >= min_count))
    if occ.size == 0:
        return BoundReport(True, -1, -math.inf, math.nan)
    s = curve.s_lo[occ]
    bound = np.asarray(profile(s), dtype=float) * np.ones_like(s)
    slack = np.asarray(tol(bound) if callable(tol) else tol, dtype=float) * np.ones_like(s)
    excess = curve.omega[occ] - bound - slack
    w = int(np.argmax(excess))
    return BoundReport(bool(excess[w] <= 0), int(occ[w]), float(excess[w]), float(s[w]))
