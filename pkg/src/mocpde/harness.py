"""Experiments: evolve u, extract its modulus, and compare with a 1D target.

A configuration names an operator pair, a grid, initial data, snapshot times,
a comparison target and optional gradient-bound checks.  Reports are plain
dicts ready for JSON; identical configs give identical reports.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import HypothesisError, MocPdeError
from .modulus import compute_moc, is_bounded_by
from .onedim import (erf_gradient_bound, erf_profile, plaplace_gradient_bound, plaplace_profile,
                     solve_1d)
from .operators import OneDimKind, OneDimOp, get_pair
from .solver import DEFAULT_CAP, GridField, Trajectory, gradient_sup, grid, load_field_csv, solve

GENERATORS = ("sin-mode", "square-wave", "random-bounded", "csv")
TARGETS = ("erf", "plaplace", "solve1d", "initial")
BOUND_KINDS = ("erf-gradient", "p-gradient", "mcf-exp")


@dataclass
class ExperimentConfig:
    """JSON-serializable experiment description.

    pair: catalog name; overrides: numeric parameters for the pair factory.
    grid: {"extent": [...], "nodes": [...], "boundary": "periodic"|"neumann"}.
    initial: {"kind": generator, "M": oscillation, ...generator options}.
    target: {"kind": "erf", "M": .., "lam": ..} | {"kind": "plaplace", "p": .., "M": ..}
            | {"kind": "solve1d", "f": pair name, "phi0": "const:M", "S": .., "nodes": ..}
            | {"kind": "initial"} (the initial modulus, constant in time).
    bounds: list of {"kind": "erf-gradient"|"p-gradient"|"mcf-exp", ...params}.
    tolerance: omega <= target (1 + rel) + abs.
    """

    pair: str = "heat"
    overrides: dict = field(default_factory=dict)
    grid: dict = field(default_factory=lambda: {"extent": [2 * math.pi], "nodes": [256], "boundary": "periodic"})
    initial: dict = field(default_factory=lambda: {"kind": "sin-mode", "M": 2.0})
    t_end: float | None = None
    snapshots: list = field(default_factory=lambda: [0.1])
    target: dict | None = None
    bounds: list = field(default_factory=list)
    rel_tol: float = 0.05
    abs_tol: float = 0.01
    bound_tol: float = 0.0
    bins: int | None = None
    seed: int = 0
    cap: float | None = DEFAULT_CAP
    min_count: int = 0

    def __post_init__(self):
        if not self.snapshots:
            raise MocPdeError("at least one snapshot time is required")
        self.snapshots = sorted(float(t) for t in self.snapshots)
        if self.t_end is None:
            self.t_end = self.snapshots[-1]
        if self.snapshots[0] <= 0 or self.snapshots[-1] > self.t_end:
            raise MocPdeError("snapshot times must lie in (0, t_end]")
        if self.initial.get("kind") not in GENERATORS:
            raise MocPdeError(f"initial kind must be one of {GENERATORS}")
        if self.target is not None and self.target.get("kind") not in TARGETS:
            raise MocPdeError(f"target kind must be one of {TARGETS}")
        for b in self.bounds:
            if b.get("kind") not in BOUND_KINDS:
                raise MocPdeError(f"bound kind must be one of {BOUND_KINDS}")

    @classmethod
    def from_dict(cls, obj):
        known = set(cls.__dataclass_fields__)
        extra = set(obj) - known
        if extra:
            raise MocPdeError(f"unknown config fields: {sorted(extra)}")
        return cls(**obj)

    @classmethod
    def from_json(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self):
        return asdict(self)

    @property
    def M(self):
        return float(self.initial.get("M", 2.0))


# ---------------------------------------------------------------------------
# initial data


def make_grid(spec) -> GridField:
    extent = spec.get("extent", [2 * math.pi])
    nodes = spec.get("nodes", [256])
    boundary = spec.get("boundary", "periodic")
    return grid(extent, nodes, boundary, spec.get("origin"))


def initial_field(cfg: ExperimentConfig) -> GridField:
    """u0 per the generator; every generator has oscillation exactly M (or less for csv)."""
    g = make_grid(cfg.grid)
    spec = cfg.initial
    kind, M = spec["kind"], cfg.M
    X = g.coords()
    axis = int(spec.get("axis", 0))
    k = float(spec.get("mode", 1))
    L = g.extent[axis]
    phase = 2 * math.pi * k * (X[axis] - g.origin[axis]) / L
    if kind == "sin-mode":
        g.values = 0.5 * M * np.sin(phase)
    elif kind == "square-wave":
        g.values = 0.5 * M * np.sign(np.round(np.sin(phase), 12))
    elif kind == "random-bounded":
        rng = np.random.default_rng(spec.get("seed", cfg.seed))
        blocks = spec.get("blocks", 8)
        blocks = [blocks] * g.dim if np.isscalar(blocks) else list(blocks)
        cells = rng.uniform(-1.0, 1.0, size=blocks)
        idx = tuple(np.minimum((np.arange(N) * b) // N, b - 1) for N, b in zip(g.nodes, blocks))
        v = cells[np.ix_(*idx)]
        lo, hi = v.min(), v.max()
        if hi == lo:
            raise MocPdeError("random-bounded data came out constant; use more blocks")
        g.values = M * (v - lo) / (hi - lo) - 0.5 * M
    elif kind == "csv":
        loaded = load_field_csv(spec["path"], g.extent, g.nodes, g.boundary, g.origin)
        g.values = loaded.values
    return g


# ---------------------------------------------------------------------------
# targets


class _Target:
    """phi(s, t) for the comparison, plus its initial trace phi(s, 0)."""

    def __init__(self, cfg: ExperimentConfig, u0: GridField):
        spec = dict(cfg.target or {"kind": "erf"})
        self.kind = spec["kind"]
        self.M = float(spec.get("M", cfg.M))
        self.spec = spec
        if self.kind == "initial":
            curve = compute_moc(u0, cfg.bins)
            occ = curve.occupied
            s = curve.s_lo[occ]
            w = np.maximum.accumulate(curve.omega[occ])
            self._s, self._w = np.concatenate([[0.0], s]), np.concatenate([[0.0], w])
        elif self.kind == "solve1d":
            f = _one_dim(spec["f"], spec.get("overrides", {}))
            M = float(str(spec.get("phi0", f"const:{self.M}")).split(":", 1)[1])
            self.M = M
            diam = max(u0.extent) * math.sqrt(u0.dim)
            S = float(spec.get("S", max(10.0, 2 * diam)))
            traj = solve_1d(f, lambda s: np.full_like(s, M / 2), S, spec.get("left_bc", "auto"),
                            "neumann_zero", cfg.t_end, int(spec.get("nodes", 801)), cfg.snapshots, cfg.cap)
            self._profiles = {round(p.t, 12): p for p in traj.snapshots}

    def initial(self, s):
        s = np.asarray(s, dtype=float)
        if self.kind == "initial":
            return np.interp(s, self._s, self._w)
        return np.where(s > 0, self.M / 2, 0.0)

    def __call__(self, s, t):
        s = np.asarray(s, dtype=float)
        if self.kind == "erf":
            return erf_profile(self.M, s, t, float(self.spec.get("lam", 1.0)))
        if self.kind == "plaplace":
            return plaplace_profile(float(self.spec["p"]), self.M, s, t)
        if self.kind == "initial":
            return np.interp(s, self._s, self._w)
        prof = self._profiles[round(t, 12)]
        return np.interp(s, prof.s_grid, prof.phi)


def _one_dim(name, overrides):
    if name == "zero":
        return OneDimOp(OneDimKind.ZERO, {}, "zero")
    return get_pair(name, **overrides)[1]


# ---------------------------------------------------------------------------
# reports


def _clean(x):
    """Floats made JSON-safe (inf/nan become strings)."""
    if isinstance(x, dict):
        return {k: _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else str(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


@dataclass
class VerifyReport:
    ok: bool
    comparisons: list = field(default_factory=list)
    gradient: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def worst_excess(self):
        return max((c["worst_excess"] for c in self.comparisons), default=-math.inf)

    def to_dict(self):
        return _clean(asdict(self))


def run_trajectory(cfg: ExperimentConfig, u0=None) -> Trajectory:
    F, _ = get_pair(cfg.pair, **cfg.overrides)
    u0 = initial_field(cfg) if u0 is None else u0
    return solve(u0, F, cfg.t_end, cfg.snapshots, cap=cfg.cap)


def run_comparison(cfg: ExperimentConfig):
    """Solve, then check omega(., t) <= phi(., t)(1 + rel) + abs at every snapshot.

    The initial modulus must be dominated by the target's initial trace
    (checked first, HypothesisError otherwise).  Returns (report, trajectory).
    """
    u0 = initial_field(cfg)
    target = _Target(cfg, u0)
    omega0 = compute_moc(u0, cfg.bins)
    hyp = is_bounded_by(omega0, target.initial, 1e-12)
    if not hyp.ok:
        raise HypothesisError(
            f"target does not dominate the initial modulus (excess {hyp.worst_excess:.3g} at s = {hyp.worst_s:.4g})")
    traj = run_trajectory(cfg, u0)
    rows = []
    for snap in traj.snapshots:
        if not any(math.isclose(snap.t, t, rel_tol=0, abs_tol=1e-12) for t in cfg.snapshots):
            continue
        curve = compute_moc(snap, cfg.bins)
        rep = is_bounded_by(curve, lambda s, t=snap.t: target(s, t),
                            lambda b: cfg.rel_tol * b + cfg.abs_tol, cfg.min_count)
        rows.append(dict(t=snap.t, **rep.to_dict(), osc=snap.oscillation()))
    grads = []
    for b in cfg.bounds:
        grads.extend(check_gradient_bounds(traj, b["kind"], {**b, "M": b.get("M", cfg.M)},
                                           cfg.bound_tol)["rows"])
    ok = all(r["ok"] for r in rows) and all(g["ok"] for g in grads)
    meta = dict(config=cfg.to_dict(), steps=len(traj.dt_history), hypothesis_excess=hyp.worst_excess,
                target=target.kind, M=target.M)
    return VerifyReport(ok, rows, grads, meta), traj


def gradient_bound(kind, t, params):
    M = float(params.get("M", 2.0))
    if kind == "erf-gradient":
        return erf_gradient_bound(M, t, float(params.get("lam", 1.0)))
    if kind == "p-gradient":
        return plaplace_gradient_bound(float(params["p"]), M, t)
    if kind == "mcf-exp":
        return math.exp(2 * M * M / t)
    raise MocPdeError(f"unknown bound kind {kind!r}")


def check_gradient_bounds(traj: Trajectory, kind, params, tol=0.0):
    """measured/bound per snapshot; mcf-exp compares 1 + |Du|^2 with exp(2M^2/t)."""
    rows = []
    for snap in traj.snapshots:
        if snap.t <= 0:
            raise MocPdeError("gradient bounds need snapshots at t > 0")
        g = gradient_sup(snap)
        bound = gradient_bound(kind, snap.t, params)
        measured = 1 + g * g if kind == "mcf-exp" else g
        ratio = measured / bound
        rows.append(dict(kind=kind, t=snap.t, measured=measured, bound=bound, ratio=ratio,
                         ok=bool(ratio <= 1 + tol)))
    return {"ok": all(r["ok"] for r in rows), "rows": rows}


def run_sharpness(cfg: ExperimentConfig, floor=0.05):
    """sup over s of omega_measured / phi_target per snapshot, for square-wave data.

    Only half-distances where the target exceeds ``floor`` M/2 enter the ratio.
    """
    if cfg.initial.get("kind") != "square-wave":
        raise MocPdeError("sharpness runs need square-wave initial data")
    u0 = initial_field(cfg)
    target = _Target(cfg, u0)
    traj = run_trajectory(cfg, u0)
    rows = []
    for snap in traj.snapshots:
        curve = compute_moc(snap, cfg.bins)
        occ = curve.occupied
        s = curve.s_lo[occ]
        phi = np.asarray(target(s, snap.t), dtype=float)
        keep = phi > floor * target.M / 2
        ratio = curve.omega[occ][keep] / phi[keep]
        rows.append(dict(t=snap.t, sup_ratio=float(ratio.max()), points=int(keep.sum())))
    sups = [r["sup_ratio"] for r in rows]
    return _clean(dict(max_ratio=max(sups), min_ratio=min(sups), snapshots=rows,
                       config=cfg.to_dict())), traj

