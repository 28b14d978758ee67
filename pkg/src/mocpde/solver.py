"""Explicit monotone finite differences for u_t + F(t, x, u, Du, D^2u) = 0.

Grids are 1D or 2D, either periodic tori or intervals/rectangles with a
homogeneous Neumann condition imposed by even ghost reflection (u_{-1} = u_1).

Second-order terms are discretized so that the update is nondecreasing in
every neighbouring value under the CFL limit:

* Pucci-type operators use the rotated four-direction stencil: second
  differences along the axes and the two diagonals, and M^+ is approximated by
  the larger of the two orthogonal frames, each contributing
  Lam (d)^+ + lam (d)^- per direction (M^- takes the smaller, roles swapped).
* Matrix coefficients tr(A D^2u) with A = [[a, b], [b, c]] are split as
  (a - |b|) u_xx + (c - |b|) u_yy + |b| (u_xx +- 2 u_xy + u_yy), the last
  term being twice a diagonal second difference.  This is monotone when A is
  diagonally dominant.
* First-order drift terms are upwinded.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import CFLError, MocPdeError, SolverError
from .operators import P_ZERO, OperatorKind, OperatorSpec, diffusivity

SAFETY = 1.1
DEFAULT_CAP = 1e3
BOUNDARIES = ("periodic", "neumann")


@dataclass
class GridField:
    """Nodal values of u on a uniform grid.

    Periodic axes of length L carry N nodes at origin + k L/N; Neumann axes
    carry N nodes at origin + k L/(N-1), both end points included.
    """

    extent: tuple
    values: np.ndarray
    boundary: str = "periodic"
    t: float = 0.0
    origin: tuple | None = None

    def __post_init__(self):
        self.values = np.array(self.values, dtype=float)
        self.extent = tuple(float(e) for e in np.atleast_1d(self.extent))
        if self.values.ndim not in (1, 2):
            raise MocPdeError(f"grids are 1D or 2D, got values of shape {self.values.shape}")
        if len(self.extent) != self.values.ndim:
            raise MocPdeError(f"extent {self.extent} does not match values of shape {self.values.shape}")
        if any(e <= 0 for e in self.extent):
            raise MocPdeError("extents must be positive")
        if self.boundary not in BOUNDARIES:
            raise MocPdeError(f"boundary must be one of {BOUNDARIES}, got {self.boundary!r}")
        if min(self.values.shape) < 2:
            raise MocPdeError("need at least 2 nodes per axis")
        if not np.all(np.isfinite(self.values)):
            raise MocPdeError("field values must be finite")
        self.origin = (0.0,) * self.dim if self.origin is None else tuple(float(o) for o in self.origin)
        self.t = float(self.t)

    @property
    def dim(self):
        return self.values.ndim

    @property
    def nodes(self):
        return self.values.shape

    @property
    def spacing(self):
        shift = 0 if self.boundary == "periodic" else 1
        return tuple(L / (N - shift) for L, N in zip(self.extent, self.nodes))

    def axes(self):
        return [o + h * np.arange(N) for o, h, N in zip(self.origin, self.spacing, self.nodes)]

    def coords(self):
        """Coordinate arrays (ij indexing), one per axis."""
        return np.meshgrid(*self.axes(), indexing="ij")

    def points(self):
        return np.stack([c.ravel() for c in self.coords()], axis=1)

    def with_values(self, values, t=None):
        return GridField(self.extent, values, self.boundary, self.t if t is None else t, self.origin)

    def mean(self):
        """Discrete mean; Neumann axes use trapezoid weights, which the scheme conserves."""
        u = self.values
        if self.boundary == "periodic":
            return float(u.mean())
        w = np.ones(1)
        for N in self.nodes:
            wk = np.ones(N)
            wk[0] = wk[-1] = 0.5
            w = np.multiply.outer(w, wk) if w.size > 1 else wk
        return float(np.sum(w * u) / np.sum(w))

    def oscillation(self):
        return float(self.values.max() - self.values.min())


def grid(extent, nodes, boundary="periodic", origin=None, fn=None, t=0.0):
    """A GridField with values fn(*coords) (zeros when fn is None)."""
    extent = tuple(np.atleast_1d(extent).astype(float))
    nodes = tuple(int(n) for n in np.atleast_1d(nodes))
    g = GridField(extent, np.zeros(nodes), boundary, t, origin)
    if fn is not None:
        g.values = np.array(np.broadcast_to(fn(*g.coords()), nodes), dtype=float)
        if not np.all(np.isfinite(g.values)):
            raise MocPdeError("initial data must be finite")
    return g


@dataclass
class Trajectory:
    snapshots: list = field(default_factory=list)
    dt_history: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    @property
    def times(self):
        return [s.t for s in self.snapshots]

    @property
    def final(self):
        return self.snapshots[-1]

    def append(self, snap):
        if self.snapshots and not snap.t > self.snapshots[-1].t:
            raise MocPdeError("trajectory times must be strictly increasing")
        self.snapshots.append(snap)


# ---------------------------------------------------------------------------
# discrete derivatives


def _pad(u, boundary):
    return np.pad(u, 1, mode="wrap" if boundary == "periodic" else "reflect")


class _Stencil:
    """All first and second differences of a padded array."""

    def __init__(self, u, spacing, boundary, need_diagonals):
        U = _pad(u, boundary)
        self.dim = u.ndim
        if self.dim == 1:
            (h,) = spacing
            c, xp, xm = U[1:-1], U[2:], U[:-2]
            self.grad = [(xp - xm) / (2 * h)]
            self.fwd = [(xp - c) / h]
            self.bwd = [(c - xm) / h]
            self.axis2 = [(xp - 2 * c + xm) / (h * h)]
            return
        hx, hy = spacing
        c = U[1:-1, 1:-1]
        xp, xm, yp, ym = U[2:, 1:-1], U[:-2, 1:-1], U[1:-1, 2:], U[1:-1, :-2]
        self.grad = [(xp - xm) / (2 * hx), (yp - ym) / (2 * hy)]
        self.fwd = [(xp - c) / hx, (yp - c) / hy]
        self.bwd = [(c - xm) / hx, (c - ym) / hy]
        self.axis2 = [(xp - 2 * c + xm) / (hx * hx), (yp - 2 * c + ym) / (hy * hy)]
        if need_diagonals:
            if not math.isclose(hx, hy, rel_tol=1e-12):
                raise MocPdeError("diagonal stencils need equal spacing on both axes")
            # second differences along (1, 1)/sqrt2 and (1, -1)/sqrt2, step h sqrt2
            self.diag_pp = (U[2:, 2:] - 2 * c + U[:-2, :-2]) / (2 * hx * hx)
            self.diag_pm = (U[2:, :-2] - 2 * c + U[:-2, 2:]) / (2 * hx * hx)

    def grad_norm(self):
        return np.sqrt(sum(g * g for g in self.grad))


def gradient_sup(field: GridField) -> float:
    """max over nodes of the central-difference gradient norm."""
    if min(field.nodes) < 3:
        raise MocPdeError("gradient_sup needs at least 3 nodes per axis")
    st = _Stencil(field.values, field.spacing, field.boundary, False)
    return float(st.grad_norm().max())


def _trace_A(a, b, c, st):
    """Monotone tr(A D^2u) for A = [[a, b], [b, c]] (2D) or a u_xx (1D)."""
    if st.dim == 1:
        return a * st.axis2[0]
    ab = np.abs(b)
    mixed = np.where(b >= 0, st.diag_pp, st.diag_pm)
    return (a - ab) * st.axis2[0] + (c - ab) * st.axis2[1] + 2 * ab * mixed


def _pucci_stencil(st, lam, Lam, sign):
    hi, lo = (Lam, lam) if sign == "plus" else (lam, Lam)

    def G(d):
        return hi * np.maximum(d, 0.0) + lo * np.minimum(d, 0.0)

    if st.dim == 1:
        return G(st.axis2[0])
    axes = G(st.axis2[0]) + G(st.axis2[1])
    diag = G(st.diag_pp) + G(st.diag_pm)
    return np.maximum(axes, diag) if sign == "plus" else np.minimum(axes, diag)


def _clamp(w, cap):
    w = np.asarray(w, dtype=float)
    if cap is None:
        return w
    return np.minimum(np.nan_to_num(w, nan=cap, posinf=cap), cap)


def _power_weight(prm, q):
    gamma, scale = prm.get("gamma", 0.0), prm.get("scale", 1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        g = scale * q ** gamma
    if gamma == 0:
        g = np.full_like(q, scale)
    return g


# ---------------------------------------------------------------------------
# the stepper


_PUCCI_LIKE = (OperatorKind.PUCCI_PLUS, OperatorKind.PUCCI_MINUS,
               OperatorKind.GRADIENT_SCALED_PUCCI, OperatorKind.PROPER_X_INDEPENDENT)


class Stepper:
    """Time stepping for one operator on one grid geometry.

    Coefficients that depend on x alone (drift W, source h, x_term) are
    evaluated once at construction.  ``cap`` clamps gradient-dependent
    diffusivities (and hence the CFL bound); ``None`` disables clamping.
    """

    def __init__(self, field0: GridField, op: OperatorSpec, cap=DEFAULT_CAP):
        self.op = op
        self.cap = cap
        self.spacing = field0.spacing
        self.boundary = field0.boundary
        self.dim = field0.dim
        kind, prm = op.kind, op.params
        self.need_diag = self.dim == 2 and kind is not OperatorKind.LINEAR_ELLIPTIC
        pts = field0.points()
        shape = field0.nodes
        self.W = self.h = self.x_term = None
        if kind is OperatorKind.LINEAR_ELLIPTIC:
            self.W = np.array([np.asarray(prm["W"](x), dtype=float) for x in pts]).reshape(*shape, self.dim)
            self.h = np.array([float(prm["h"](x)) for x in pts]).reshape(shape)
            self.V = float(prm.get("V", 0.0))
        elif kind is OperatorKind.GRADIENT_SCALED_PUCCI and prm.get("L", 0.0):
            self.x_term = np.array([float(prm["x_term"](x)) for x in pts]).reshape(shape)

    def _stencil(self, u):
        return _Stencil(u, self.spacing, self.boundary, self.need_diag)

    # -- CFL ---------------------------------------------------------------

    def cfl_limit(self, field: GridField, st=None) -> float:
        st = st or self._stencil(field.values)
        op = self.op
        inv_h2 = sum(2.0 / (h * h) for h in self.spacing)
        if op.kind is OperatorKind.LINEAR_ELLIPTIC:
            rate = inv_h2
            rate += sum(np.abs(self.W[..., k]).max() / h for k, h in enumerate(self.spacing))
            rate += abs(self.V)
            return 1.0 / (SAFETY * rate)
        q = st.grad_norm()
        lam_max = float(np.max(_clamp(diffusivity(op, q, field.t), self.cap)))
        if not math.isfinite(lam_max):
            raise CFLError("diffusivity is unbounded on this field; set a finite cap or pass dt explicitly")
        if lam_max <= 0:
            return math.inf
        return 1.0 / (SAFETY * lam_max * inv_h2)

    # -- F_h -----------------------------------------------------------------

    def discrete_F(self, field: GridField, st=None):
        """Nodal values of the discrete operator F_h[u]."""
        st = st or self._stencil(field.values)
        op, prm, t, u = self.op, self.op.params, field.t, field.values
        kind = op.kind
        if kind is OperatorKind.LINEAR_ELLIPTIC:
            lap = sum(st.axis2)
            drift = sum(np.maximum(self.W[..., k], 0) * st.fwd[k] + np.minimum(self.W[..., k], 0) * st.bwd[k]
                        for k in range(self.dim))
            return -lap - drift - self.V * u - self.h
        if kind is OperatorKind.QUASILINEAR_ISOTROPIC:
            q = st.grad_norm()
            with np.errstate(divide="ignore", invalid="ignore"):
                alpha = _clamp(np.broadcast_to(prm["alpha"](q), q.shape), self.cap)
                beta = _clamp(np.broadcast_to(prm["beta"](q), q.shape), self.cap)
            if self.dim == 1:
                return -_trace_A(alpha, None, None, st)
            small = q < P_ZERO
            safe = np.where(small, 1.0, q)
            e1 = np.where(small, 1.0, st.grad[0] / safe)
            e2 = np.where(small, 0.0, st.grad[1] / safe)
            d = alpha - beta
            return -_trace_A(beta + d * e1 * e1, d * e1 * e2, beta + d * e2 * e2, st)
        if kind in (OperatorKind.PUCCI_PLUS, OperatorKind.PUCCI_MINUS):
            sign = "plus" if kind is OperatorKind.PUCCI_PLUS else "minus"
            return -_pucci_stencil(st, prm["lam"], prm["Lam"], sign)
        if kind is OperatorKind.GRADIENT_SCALED_PUCCI:
            g = _clamp(_power_weight(prm, st.grad_norm()), None if self.cap is None else self.cap / prm["Lam"])
            val = -g * _pucci_stencil(st, prm["lam"], prm["Lam"], prm.get("sign", "plus"))
            if self.x_term is not None:
                val = val + prm["L"] * self.x_term
            if prm.get("K", 0.0):
                val = val - prm["K"] * np.vectorize(prm["r_term"], otypes=[float])(u)
            return val
        if kind is OperatorKind.PROPER_X_INDEPENDENT:
            q = st.grad_norm()
            w = _clamp(np.broadcast_to(prm["weight"](q), q.shape), None if self.cap is None else self.cap / prm["Lam"])
            val = -w * _pucci_stencil(st, prm["lam"], prm["Lam"], "minus")
            if prm.get("c", 0.0):
                val = val + prm["c"] * np.vectorize(prm["r_term"], otypes=[float])(u)
            return val
        if kind is OperatorKind.GRADIENT_DIFFUSION_MATRIX:
            P = np.stack(st.grad, axis=-1)
            A = np.asarray(prm["A"](P, t), dtype=float)
            if A.shape != P.shape + (self.dim,):
                flat = P.reshape(-1, self.dim)
                A = np.array([prm["A"](p, t) for p in flat]).reshape(P.shape + (self.dim,))
            if self.dim == 1:
                return -_trace_A(A[..., 0, 0], None, None, st)
            return -_trace_A(A[..., 0, 0], 0.5 * (A[..., 0, 1] + A[..., 1, 0]), A[..., 1, 1], st)
        raise MocPdeError(f"unknown operator kind {kind}")

    def step(self, field: GridField, dt: float, check_cfl=True) -> GridField:
        st = self._stencil(field.values)
        if dt <= 0:
            raise MocPdeError(f"dt must be positive, got {dt}")
        if check_cfl:
            limit = self.cfl_limit(field, st)
            if dt > limit * (1 + 1e-12):
                raise CFLError(f"dt = {dt:.6g} exceeds the CFL limit {limit:.6g}")
        new = field.values - dt * self.discrete_F(field, st)
        bad = ~np.isfinite(new)
        if bad.any():
            idx = tuple(int(i) for i in np.argwhere(bad)[0])
            raise SolverError(f"non-finite value at node {idx} after stepping to t = {field.t + dt:.6g}", idx)
        out = GridField.__new__(GridField)
        out.extent, out.values, out.boundary = field.extent, new, field.boundary
        out.t, out.origin = field.t + dt, field.origin
        return out


def cfl_limit(field: GridField, op: OperatorSpec, cap=DEFAULT_CAP) -> float:
    """h^2 / (2 dim Lam_max sigma) with sigma = 1.1 (equal spacing), Lam_max over the field's gradients."""
    return Stepper(field, op, cap).cfl_limit(field)


def step(field: GridField, op: OperatorSpec, dt: float, cap=DEFAULT_CAP) -> GridField:
    """One explicit Euler step u <- u - dt F_h[u]; raises CFLError before stepping if dt is too large."""
    return Stepper(field, op, cap).step(field, dt)


def solve(field0: GridField, op: OperatorSpec, t_end: float, output_times=(), cap=DEFAULT_CAP,
          dt=None, max_steps=10_000_000) -> Trajectory:
    """Evolve to t_end, landing exactly on every requested output time.

    The trajectory holds a snapshot at each output time in (t0, t_end] and
    always the final state.  ``dt`` fixes a step size (still checked against
    the CFL limit); otherwise each step uses the current CFL limit.
    """
    t0 = field0.t
    if not t_end > t0:
        raise MocPdeError(f"t_end = {t_end} must exceed the initial time {t0}")
    targets = sorted({float(t) for t in output_times})
    for t in targets:
        if not t0 < t <= t_end:
            raise MocPdeError(f"output time {t} outside ({t0}, {t_end}]")
    if not targets or targets[-1] < t_end:
        targets.append(float(t_end))
    stepper = Stepper(field0, op, cap)
    traj = Trajectory(meta=dict(operator=op.name or op.kind.value, cap=cap, boundary=field0.boundary,
                                extent=list(field0.extent), nodes=list(field0.nodes),
                                origin=list(field0.origin), t0=t0))
    cur = field0
    steps = 0
    for target in targets:
        while cur.t < target:
            st = stepper._stencil(cur.values)
            limit = stepper.cfl_limit(cur, st)
            h = limit if dt is None else dt
            if dt is not None and dt > limit * (1 + 1e-12):
                raise CFLError(f"dt = {dt:.6g} exceeds the CFL limit {limit:.6g}")
            remaining = target - cur.t
            if h >= remaining or remaining - h < 1e-12 * max(1.0, abs(target)):
                h = remaining
            cur = stepper.step(cur, h, check_cfl=False)
            traj.dt_history.append(h)
            if h == remaining:
                cur.t = target
            steps += 1
            if steps > max_steps:
                raise SolverError(f"exceeded {max_steps} steps before t = {target}")
        traj.append(cur)
    return traj


# ---------------------------------------------------------------------------
# persistence


def _time_name(t):
    return f"t_{t:.10g}.csv"


def save_trajectory(traj: Trajectory, directory):
    """Write t_<time>.csv files (header x1[,x2],u) and meta.json into ``directory``."""
    os.makedirs(directory, exist_ok=True)
    files = []
    for snap in traj.snapshots:
        cols = [c.ravel() for c in snap.coords()] + [snap.values.ravel()]
        header = ",".join([f"x{k + 1}" for k in range(snap.dim)] + ["u"])
        name = _time_name(snap.t)
        np.savetxt(os.path.join(directory, name), np.column_stack(cols), delimiter=",",
                   header=header, comments="", fmt="%.17g")
        files.append(name)
    first = traj.snapshots[0]
    meta = dict(traj.meta, dim=first.dim, extent=list(first.extent), nodes=list(first.nodes),
                boundary=first.boundary, origin=list(first.origin), times=traj.times, files=files,
                steps=len(traj.dt_history), dt_history=traj.dt_history)
    with open(os.path.join(directory, "meta.json"), "w") as fh:
        json.dump(meta, fh, indent=1)
    return files


def load_field_csv(path, extent, nodes, boundary, origin=None, t=0.0):
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return GridField(tuple(extent), data[:, -1].reshape(tuple(nodes)), boundary, t, origin)


def load_trajectory(directory) -> Trajectory:
    with open(os.path.join(directory, "meta.json")) as fh:
        meta = json.load(fh)
    traj = Trajectory(dt_history=meta.get("dt_history", []), meta=meta)
    for name, t in zip(meta["files"], meta["times"]):
        traj.append(load_field_csv(os.path.join(directory, name), meta["extent"], meta["nodes"],
                                   meta["boundary"], meta.get("origin"), t))
    return traj
