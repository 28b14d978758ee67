"""Fully nonlinear operators F(t, x, r, p, X) and their 1D partners f(t, s, phi, phi', phi'').

An equation u_t + F(t, x, u, Du, D^2u) = 0 is paired with a one-dimensional
operator f such that the modulus of continuity of u is a subsolution of
phi_t + f(t, s, phi, phi', phi'') = 0.  This module holds descriptors for both
sides, exact pointwise evaluators, and the built-in catalog of pairs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable

import numpy as np

from .errors import DimensionError, DomainError, MocPdeError, SymmetryError

SYM_TOL = 1e-12
# |p| below this is treated as the p = 0 branch and excluded from SC sampling
P_ZERO = 1e-8


class OperatorKind(str, Enum):
    LINEAR_ELLIPTIC = "linear-elliptic"
    QUASILINEAR_ISOTROPIC = "quasilinear-isotropic"
    PUCCI_MINUS = "pucci-minus"
    PUCCI_PLUS = "pucci-plus"
    GRADIENT_SCALED_PUCCI = "gradient-scaled-pucci"
    PROPER_X_INDEPENDENT = "proper-x-independent"
    GRADIENT_DIFFUSION_MATRIX = "gradient-diffusion-matrix"


class OneDimKind(str, Enum):
    LINEAR_1D = "linear-1d"
    QUASILINEAR_1D = "quasilinear-1d"
    ZERO = "zero"
    CURVATURE_1D = "curvature-1d"


@dataclass(frozen=True)
class OperatorSpec:
    """Descriptor of F.  ``params`` keys depend on ``kind``:

    linear-elliptic        W, V, h, omega_h, K
    quasilinear-isotropic  alpha, beta              (callables of |p|)
    pucci-plus/minus       lam, Lam
    gradient-scaled-pucci  lam, Lam, sign, gamma, scale, L, x_term, K, r_term
    proper-x-independent   lam, Lam, weight, c, r_term
    gradient-diffusion-matrix  A (p, t) -> matrix, alpha (R, t), Lam (p, t) bound

    ``cap`` limits gradient-dependent diffusivities in the explicit solvers.
    """

    kind: OperatorKind
    params: dict = field(default_factory=dict)
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "kind", OperatorKind(self.kind))
        if self.kind in (OperatorKind.PUCCI_MINUS, OperatorKind.PUCCI_PLUS,
                         OperatorKind.GRADIENT_SCALED_PUCCI,
                         OperatorKind.PROPER_X_INDEPENDENT):
            lam, Lam = self.params["lam"], self.params["Lam"]
            if not 0 < lam <= Lam:
                raise MocPdeError(f"ellipticity constants need 0 < lambda <= Lambda, got {lam}, {Lam}")


@dataclass(frozen=True)
class OneDimOp:
    """Descriptor of f.  ``params`` keys depend on ``kind``:

    linear-1d      lam (float or callable (q, t)), drift, V, K, L, omega_h
                   f = -lam phi'' - drift |phi'| - (V + K) phi - L s - omega_h(s)
    quasilinear-1d alpha (q, t)              f = -alpha(|phi'|, t) phi''
    zero                                     f = 0
    curvature-1d   alpha (q), beta (q), kappa, n
                   f = -alpha(phi') phi'' + (n-1) T_kappa(s) phi' beta(phi')
    """

    kind: OneDimKind
    params: dict = field(default_factory=dict)
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "kind", OneDimKind(self.kind))


@dataclass(frozen=True)
class Jet1D:
    t: float
    s: float
    phi: float
    dphi: float
    d2phi: float

    def validate(self):
        if not self.s > 0:
            raise DomainError(f"jet needs s > 0, got {self.s}")
        if not self.phi > 0:
            raise DomainError(f"jet needs phi > 0, got {self.phi}")
        if self.t < 0:
            raise DomainError(f"jet needs t >= 0, got {self.t}")


# ---------------------------------------------------------------------------
# building blocks


def pucci_plus(X, lam, Lam):
    e = np.linalg.eigvalsh(X)
    return Lam * e[e > 0].sum() + lam * e[e < 0].sum()


def pucci_minus(X, lam, Lam):
    e = np.linalg.eigvalsh(X)
    return lam * e[e > 0].sum() + Lam * e[e < 0].sum()


def t_kappa(kappa, t):
    """Curvature comparison function: sqrt(k) tan(sqrt(k) t), 0, or -sqrt(-k) tanh(sqrt(-k) t)."""
    if kappa > 0:
        r = math.sqrt(kappa)
        if t >= math.pi / (2 * r):
            raise DomainError(f"T_kappa pole: t = {t} >= pi/(2 sqrt(kappa)) = {math.pi / (2 * r)}")
        return r * math.tan(r * t)
    if kappa == 0:
        return 0.0
    r = math.sqrt(-kappa)
    return -r * math.tanh(r * t)


def _coef(c, q, t):
    return c(q, t) if callable(c) else c


def _check_args(x, p, X):
    x = np.atleast_1d(np.asarray(x, dtype=float))
    p = np.atleast_1d(np.asarray(p, dtype=float))
    X = np.atleast_2d(np.asarray(X, dtype=float))
    n = x.shape[0]
    if p.shape != (n,) or X.shape != (n, n):
        raise DimensionError(f"inconsistent dimensions: x {x.shape}, p {p.shape}, X {X.shape}")
    if n > 1:
        asym = np.abs(X - X.T).max()
        if asym > SYM_TOL * max(1.0, np.abs(X).max()):
            raise SymmetryError(f"X is not symmetric (max asymmetry {asym:.3g})")
    return x, p, X


def eval_F(op: OperatorSpec, t, x, r, p, X) -> float:
    """Evaluate F(t, x, r, p, X) exactly (eigendecomposition for Pucci terms)."""
    x, p, X = _check_args(x, p, X)
    kind, prm = op.kind, op.params
    n = x.shape[0]
    if kind is OperatorKind.LINEAR_ELLIPTIC:
        W = np.asarray(prm["W"](x), dtype=float)
        return float(-np.trace(X) - W @ p - prm["V"] * r - prm["h"](x))
    if kind is OperatorKind.QUASILINEAR_ISOTROPIC:
        q = float(np.linalg.norm(p))
        if q < P_ZERO:
            # fixed direction e1 at p = 0
            e = np.zeros(n)
            e[0] = 1.0
        else:
            e = p / q
        a, b = prm["alpha"](q), prm["beta"](q)
        Xee = float(e @ X @ e)
        return float(-(a * Xee + b * (np.trace(X) - Xee)))
    if kind is OperatorKind.PUCCI_PLUS:
        return float(-pucci_plus(X, prm["lam"], prm["Lam"]))
    if kind is OperatorKind.PUCCI_MINUS:
        return float(-pucci_minus(X, prm["lam"], prm["Lam"]))
    if kind is OperatorKind.GRADIENT_SCALED_PUCCI:
        q = float(np.linalg.norm(p))
        pucci = pucci_plus if prm.get("sign", "plus") == "plus" else pucci_minus
        g = prm.get("scale", 1.0) * q ** prm.get("gamma", 0.0) if q > 0 else _zero_gradient_weight(prm)
        val = -g * pucci(X, prm["lam"], prm["Lam"])
        val += prm.get("L", 0.0) * prm["x_term"](x) if prm.get("L", 0.0) else 0.0
        val -= prm.get("K", 0.0) * prm["r_term"](r) if prm.get("K", 0.0) else 0.0
        return float(val)
    if kind is OperatorKind.PROPER_X_INDEPENDENT:
        q = float(np.linalg.norm(p))
        val = -prm["weight"](q) * pucci_minus(X, prm["lam"], prm["Lam"])
        return float(val + prm.get("c", 0.0) * prm["r_term"](r))
    if kind is OperatorKind.GRADIENT_DIFFUSION_MATRIX:
        A = np.asarray(prm["A"](p, t), dtype=float)
        return float(-np.sum(A * X))
    raise MocPdeError(f"unknown operator kind {kind}")


def _zero_gradient_weight(prm):
    gamma = prm.get("gamma", 0.0)
    if gamma > 0:
        return 0.0
    if gamma == 0:
        return prm.get("scale", 1.0)
    return math.inf


def f_values(od: OneDimOp, t, s, phi, dphi, d2phi):
    """Vectorized f without jet validation (used by the 1D solver on whole grids)."""
    kind, prm = od.kind, od.params
    s = np.asarray(s, dtype=float)
    q = np.abs(dphi)
    if kind is OneDimKind.ZERO:
        return np.zeros(np.broadcast(s, phi, dphi, d2phi).shape)
    if kind is OneDimKind.LINEAR_1D:
        val = -_coef(prm.get("lam", 1.0), q, t) * d2phi
        val = val - prm.get("drift", 0.0) * q
        val = val - (prm.get("V", 0.0) + prm.get("K", 0.0)) * phi
        val = val - prm.get("L", 0.0) * s
        if prm.get("omega_h") is not None:
            val = val - prm["omega_h"](s)
        return val
    if kind is OneDimKind.QUASILINEAR_1D:
        return -prm["alpha"](q, t) * d2phi
    if kind is OneDimKind.CURVATURE_1D:
        kappa, n = prm["kappa"], prm["n"]
        T = np.vectorize(lambda si: t_kappa(kappa, si), otypes=[float])(s)
        return -prm["alpha"](dphi) * d2phi + (n - 1) * T * dphi * prm["beta"](dphi)
    raise MocPdeError(f"unknown 1D kind {kind}")


def eval_f(od: OneDimOp, jet: Jet1D) -> float:
    jet.validate()
    return float(f_values(od, jet.t, jet.s, jet.phi, jet.dphi, jet.d2phi))


def diffusivity(op, q, t):
    """Upper ellipticity bound of F as a function of gradient norm (array q).

    Used for CFL limits; returns an array broadcast against q.
    """
    q = np.asarray(q, dtype=float)
    kind, prm = op.kind, op.params
    with np.errstate(divide="ignore", invalid="ignore"):
        if kind is OperatorKind.LINEAR_ELLIPTIC:
            return np.ones_like(q)
        if kind is OperatorKind.QUASILINEAR_ISOTROPIC:
            a = np.broadcast_to(prm["alpha"](q), q.shape)
            b = np.broadcast_to(prm["beta"](q), q.shape)
            return np.maximum(a, b)
        if kind in (OperatorKind.PUCCI_PLUS, OperatorKind.PUCCI_MINUS):
            return np.full_like(q, prm["Lam"])
        if kind is OperatorKind.GRADIENT_SCALED_PUCCI:
            g = prm.get("scale", 1.0) * q ** prm.get("gamma", 0.0)
            return g * prm["Lam"]
        if kind is OperatorKind.PROPER_X_INDEPENDENT:
            return np.broadcast_to(prm["weight"](q), q.shape) * prm["Lam"]
        if kind is OperatorKind.GRADIENT_DIFFUSION_MATRIX:
            bound = prm.get("Lam")
            if bound is None:
                raise MocPdeError("gradient-diffusion-matrix needs an upper bound 'Lam' (R, t) for CFL")
            return np.broadcast_to(bound(q, t), q.shape)
    raise MocPdeError(f"unknown operator kind {kind}")


def diffusivity_1d(od: OneDimOp, q, t):
    q = np.asarray(q, dtype=float)
    prm = od.params
    with np.errstate(divide="ignore", invalid="ignore"):
        if od.kind is OneDimKind.ZERO:
            return np.zeros_like(q)
        if od.kind is OneDimKind.LINEAR_1D:
            return np.broadcast_to(_coef(prm.get("lam", 1.0), q, t), q.shape)
        if od.kind is OneDimKind.QUASILINEAR_1D:
            return np.broadcast_to(prm["alpha"](q, t), q.shape)
        if od.kind is OneDimKind.CURVATURE_1D:
            return np.broadcast_to(prm["alpha"](q), q.shape)
    raise MocPdeError(f"unknown 1D kind {od.kind}")


# ---------------------------------------------------------------------------
# sampled sup norms and moduli of coefficient functions


def estimate_sup_norm(W, box, n, samples=10_000, seed=0):
    """sup |W(x)| over a box, estimated from uniform samples (an underestimate)."""
    rng = np.random.default_rng(seed)
    lo, hi = box
    pts = rng.uniform(lo, hi, size=(samples, n))
    return float(max(np.linalg.norm(W(x)) for x in pts))


class SampledModulus:
    """Nondecreasing modulus of h built by brute-force pairwise sup on sample points.

    omega(s) >= sup{|h(x) - h(y)|/2 : |x - y| <= 2s} over the sample set.  Built
    once at construction; calls afterwards only read the arrays.
    """

    def __init__(self, h, box, n, points=1500, bins=200, seed=0):
        rng = np.random.default_rng(seed)
        lo, hi = box
        pts = rng.uniform(lo, hi, size=(points, n))
        vals = np.array([h(x) for x in pts], dtype=float)
        d = np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=-1) / 2
        dv = np.abs(vals[:, None] - vals[None, :]) / 2
        self.s_max = math.sqrt(n) * (hi - lo) / 2
        edges = np.linspace(0.0, self.s_max, bins + 1)
        k = np.minimum(np.searchsorted(edges, d.ravel(), side="right") - 1, bins - 1)
        best = np.zeros(bins)
        np.maximum.at(best, k, dv.ravel())
        self.edges = edges
        # value on [edges[k], edges[k+1]) covers every pair with distance below edges[k+1]
        self.values = np.maximum.accumulate(best)

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        k = np.clip(np.searchsorted(self.edges, s, side="right") - 1, 0, len(self.values) - 1)
        out = self.values[k]
        out = np.where(s <= 0, 0.0, out)
        return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# catalog


BOX = (-math.pi, math.pi)


def _W_default(x):
    W = np.zeros_like(x)
    W[0] = math.sin(x[0])
    if x.shape[0] > 1:
        W[1] = math.cos(x[1])
    return W


def _zero_vec(x):
    return np.zeros_like(x)


def _zero_scalar(x):
    return 0.0


def _sin_first(x):
    return math.sin(x[0])


def _one(q, *_):
    return np.ones_like(np.asarray(q, dtype=float)) if np.ndim(q) else 1.0


def _power_law(coef, expo):
    def fn(q, *_):
        with np.errstate(divide="ignore"):
            return coef * np.asarray(q, dtype=float) ** expo
    return fn


def _mcf_alpha(q, *_):
    return 1.0 / (1.0 + np.asarray(q, dtype=float) ** 2)


def heat_pair():
    F = OperatorSpec(OperatorKind.LINEAR_ELLIPTIC,
                     dict(W=_zero_vec, V=0.0, h=_zero_scalar, omega_h=None, K=0.0), "heat")
    f = OneDimOp(OneDimKind.LINEAR_1D, dict(lam=1.0), "heat-1d")
    return F, f


def linear_elliptic_pair(V=0.5, K=None, n=2):
    """-tr X - <W, p> - V r - h with W = (sin x1, cos x2), h = sin x1.

    K defaults to the exact sup |W| = sqrt(2); omega_h(s) = min(s, 1) is exact
    for h = sin x1 since |sin a - sin b| <= 2 |sin((a-b)/2)|.
    """
    if K is None:
        K = math.sqrt(2.0)
    omega_h = lambda s: np.minimum(np.asarray(s, dtype=float), 1.0)
    F = OperatorSpec(OperatorKind.LINEAR_ELLIPTIC,
                     dict(W=_W_default, V=V, h=_sin_first, omega_h=omega_h, K=K), "linear-elliptic")
    f = OneDimOp(OneDimKind.LINEAR_1D, dict(lam=1.0, drift=K, V=V, omega_h=omega_h), "linear-1d")
    return F, f


def quasilinear_pair(p=3.0):
    """p-Laplacian -div(|Du|^{p-2} Du): alpha = (p-1) q^{p-2}, beta = q^{p-2}."""
    alpha, beta = _power_law(p - 1.0, p - 2.0), _power_law(1.0, p - 2.0)
    F = OperatorSpec(OperatorKind.QUASILINEAR_ISOTROPIC, dict(alpha=alpha, beta=beta),
                     f"quasilinear-isotropic[p={p:g}]")
    f = OneDimOp(OneDimKind.QUASILINEAR_1D, dict(alpha=alpha), "quasilinear-1d")
    return F, f


def pucci_pair(lam=1.0, Lam=2.0, sign="plus"):
    kind = OperatorKind.PUCCI_PLUS if sign == "plus" else OperatorKind.PUCCI_MINUS
    F = OperatorSpec(kind, dict(lam=lam, Lam=Lam), f"pucci-{sign}")
    f = OneDimOp(OneDimKind.LINEAR_1D, dict(lam=lam), "linear-1d")
    return F, f


def proper_pair(lam=1.0, Lam=2.0, c=0.5):
    """x-independent proper operator -M^-(X)/(1+|p|^2) + c arctan(r)."""
    F = OperatorSpec(OperatorKind.PROPER_X_INDEPENDENT,
                     dict(lam=lam, Lam=Lam, weight=_mcf_alpha, c=c, r_term=math.atan), "proper")
    return F, OneDimOp(OneDimKind.ZERO, {}, "zero")


def lipschitz_pair(p=3.0, lam=1.0, Lam=2.0, L=1.0, K=0.5):
    """-(p-1)|p|^{p-2} M^+(X) - K tanh(r) + L sin(x1).

    Ellipticity lambda(q) = (p-1) q^{p-2} lam; x-Lipschitz L; r-Lipschitz K.
    """
    F = OperatorSpec(OperatorKind.GRADIENT_SCALED_PUCCI,
                     dict(lam=lam, Lam=Lam, sign="plus", gamma=p - 2.0, scale=p - 1.0,
                          L=L, x_term=_sin_first, K=K, r_term=math.tanh),
                     f"lipschitz-general[p={p:g}]")
    f = OneDimOp(OneDimKind.LINEAR_1D, dict(lam=_power_law((p - 1.0) * lam, p - 2.0), K=K, L=L),
                 "lipschitz-1d")
    return F, f


def mcf_pair():
    F = OperatorSpec(OperatorKind.QUASILINEAR_ISOTROPIC, dict(alpha=_mcf_alpha, beta=_one),
                     "graphical-mcf")
    f = OneDimOp(OneDimKind.QUASILINEAR_1D, dict(alpha=_mcf_alpha), "mcf-1d")
    return F, f


def _gdm_A(p, t):
    # accepts a single gradient (n,) or a stack (..., n)
    p = np.asarray(p, dtype=float)
    pp = p[..., :, None] * p[..., None, :]
    denom = 1.0 + np.sum(p * p, axis=-1)[..., None, None]
    return (1.0 + t / 2) * (np.eye(p.shape[-1]) + pp / denom)


def _gdm_alpha(R, t):
    R2 = np.asarray(R, dtype=float) ** 2
    return (1.0 + t / 2) * (1.0 + R2 / (1.0 + R2))


def gradient_matrix_pair():
    """A(p, t) = (1 + t/2)(I + p p^T/(1+|p|^2)); alpha(R, t) = (1 + t/2)(1 + R^2/(1+R^2)).

    p is an eigenvector of A, so alpha equals the directional ellipticity
    1/(e^T A^{-1} e) that the structure condition actually needs.
    """
    F = OperatorSpec(OperatorKind.GRADIENT_DIFFUSION_MATRIX,
                     dict(A=_gdm_A, alpha=_gdm_alpha, Lam=_gdm_alpha), "gradient-diffusion-matrix")
    f = OneDimOp(OneDimKind.QUASILINEAR_1D, dict(alpha=_gdm_alpha), "gdm-1d")
    return F, f


BUILTIN_NAMES = (
    "linear-elliptic",
    "quasilinear-isotropic",
    "pucci-plus",
    "proper",
    "lipschitz-general",
    "graphical-mcf",
    "gradient-diffusion-matrix",
)

_FACTORIES: dict[str, Callable] = {
    "linear-elliptic": linear_elliptic_pair,
    "quasilinear-isotropic": quasilinear_pair,
    "p-laplacian": quasilinear_pair,
    "pucci-plus": lambda lam=1.0, Lam=2.0: pucci_pair(lam, Lam, "plus"),
    "pucci-minus": lambda lam=1.0, Lam=2.0: pucci_pair(lam, Lam, "minus"),
    "proper": proper_pair,
    "proper-x-independent": proper_pair,
    "lipschitz-general": lipschitz_pair,
    "gradient-scaled-pucci": lipschitz_pair,
    "graphical-mcf": mcf_pair,
    "gradient-diffusion-matrix": gradient_matrix_pair,
    "heat": heat_pair,
}

# JSON field names -> factory keyword names
_JSON_ALIASES = {"lambda": "lam", "Lambda": "Lam"}


def pair_names():
    return sorted(_FACTORIES)


def get_pair(name, **overrides):
    """Return (F, f) for a catalog name, with numeric parameter overrides."""
    try:
        factory = _FACTORIES[name]
    except KeyError:
        raise MocPdeError(f"unknown operator pair {name!r}; known: {', '.join(pair_names())}") from None
    kwargs = {_JSON_ALIASES.get(k, k): v for k, v in overrides.items()}
    try:
        return factory(**kwargs)
    except TypeError as exc:
        raise MocPdeError(f"bad parameters for {name!r}: {exc}") from None


def pair_from_json(obj):
    """``{"kind": "pucci-plus", "lambda": 1.0, "Lambda": 2.0}`` -> (F, f).

    ``"pair"`` is accepted as a synonym for ``"kind"``.
    """
    obj = dict(obj)
    name = obj.pop("kind", None) or obj.pop("pair", None)
    if name is None:
        raise MocPdeError("operator JSON needs a 'kind' (or 'pair') field")
    return get_pair(name, **obj)


def builtin_pairs():
    """The seven catalog pairs with default parameters, as (name, F, f)."""
    return [(name, *get_pair(name)) for name in BUILTIN_NAMES]
