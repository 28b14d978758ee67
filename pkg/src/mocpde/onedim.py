"""The one-dimensional comparison equation phi_t + f(t, s, phi, phi', phi'') = 0.

Contents: an explicit solver on [0, S], the erf profile of the heat flow, the
self-similar p-Laplacian profile built from F_p and R_p, a finite-difference
residual oracle for that profile, the curvature function T_kappa, the
divergence integral B(a) = int_0^a s lambda(s) ds, and the curvature operator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, optimize, special

from .errors import CFLError, DomainError, MocPdeError
from .operators import OneDimKind, OneDimOp, diffusivity_1d, f_values, t_kappa
from .solver import DEFAULT_CAP, SAFETY

__all__ = [
    "Profile1D", "solve_1d", "is_odd_compatible", "erf_profile", "erf_gradient_bound",
    "fp", "fp_infinity", "r_p", "plaplace_profile", "plaplace_gradient_bound",
    "printed_plaplace_profile", "residual_oracle", "calibrate_r_p", "t_kappa",
    "b_integral", "diverges_heuristic", "curvature_f",
]

LEFT_BCS = ("odd_reflection", "dirichlet_zero", "auto")
RIGHT_BCS = ("neumann_zero", "dirichlet_value")


@dataclass
class Profile1D:
    s_grid: np.ndarray
    phi: np.ndarray
    t: float
    left_bc: str
    right_bc: str


@dataclass
class Trajectory1D:
    snapshots: list = field(default_factory=list)
    dt_history: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    @property
    def final(self):
        return self.snapshots[-1]

    @property
    def times(self):
        return [p.t for p in self.snapshots]


def is_odd_compatible(f: OneDimOp, samples=200, seed=0, tol=1e-10):
    """Sampled check of f(t, -s, -phi, phi', -phi'') = -f(t, s, phi, phi', phi'').

    This is the identity that lets the odd extension phi(-s) = -phi(s) solve
    the same equation on s < 0.
    """
    rng = np.random.default_rng(seed)
    t = rng.uniform(0, 1, samples)
    s = rng.uniform(0.01, 1.0, samples)
    phi = rng.uniform(0.01, 2.0, samples)
    d1 = rng.uniform(-2.0, 2.0, samples)
    d2 = rng.uniform(-2.0, 2.0, samples)
    for i in range(samples):
        try:
            a = f_values(f, t[i], s[i], phi[i], d1[i], d2[i])
            b = f_values(f, t[i], -s[i], -phi[i], d1[i], -d2[i])
        except (DomainError, ValueError):
            return False
        if not abs(a + b) <= tol * (1 + abs(a)):
            return False
    return True


def _cfl_1d(f, q, t, h, cap):
    lam = np.asarray(diffusivity_1d(f, q, t), dtype=float)
    if cap is not None:
        lam = np.minimum(np.nan_to_num(lam, nan=cap, posinf=cap), cap)
    lam_max = float(np.max(lam)) if lam.size else 0.0
    if not math.isfinite(lam_max):
        raise CFLError("diffusivity is unbounded (degenerate at phi' = 0); pass cap=<finite value>")
    lam_max = max(lam_max, 0.0)
    return math.inf if lam_max == 0 else h * h / (2 * lam_max * SAFETY), lam


def solve_1d(f: OneDimOp, phi0, S, left_bc="auto", right_bc="neumann_zero", t_end=1.0,
             nodes=401, output_times=(), cap=DEFAULT_CAP, right_value=None) -> Trajectory1D:
    """Explicit Euler for phi_t + f = 0 on nodes s_k = k S/(nodes-1).

    left_bc: 'odd_reflection' (the odd extension; needs f odd-compatible),
    'dirichlet_zero' (phi(0) = 0), or 'auto' (odd reflection when the sampled
    odd-compatibility check passes).  Both pin phi(0, t) = 0.
    right_bc: 'neumann_zero' (ghost phi_{N} = phi_{N-2}) or 'dirichlet_value'
    (phi(S) held at ``right_value``, default phi0(S)).

    The diffusion coefficient is clamped at ``cap`` in both the update and the
    CFL limit; with ``cap=None`` an unbounded coefficient raises CFLError.
    ``phi0`` is a callable of s or an array of nodal values.
    """
    if nodes < 16:
        raise MocPdeError("solve_1d needs nodes >= 16")
    if left_bc not in LEFT_BCS:
        raise MocPdeError(f"left_bc must be one of {LEFT_BCS}")
    if right_bc not in RIGHT_BCS:
        raise MocPdeError(f"right_bc must be one of {RIGHT_BCS}")
    if not t_end > 0:
        raise MocPdeError("t_end must be positive")
    if left_bc == "auto":
        left_bc = "odd_reflection" if is_odd_compatible(f) else "dirichlet_zero"
    elif left_bc == "odd_reflection" and not is_odd_compatible(f):
        raise MocPdeError(f"{f.name or f.kind.value} is not odd-compatible; use left_bc='dirichlet_zero'")
    s = np.linspace(0.0, S, nodes)
    h = s[1] - s[0]
    phi = np.array(phi0(s) if callable(phi0) else phi0, dtype=float) * np.ones(nodes)
    phi[0] = 0.0
    if right_bc == "dirichlet_value":
        right_value = phi[-1] if right_value is None else float(right_value)
        phi[-1] = right_value
    targets = sorted({float(t) for t in output_times if 0 < t <= t_end})
    if not targets or targets[-1] < t_end:
        targets.append(float(t_end))
    traj = Trajectory1D(meta=dict(f=f.name or f.kind.value, S=S, nodes=nodes, left_bc=left_bc,
                                  right_bc=right_bc, cap=cap))
    t = 0.0
    for target in targets:
        while t < target:
            ext = np.empty(nodes + 2)
            ext[1:-1] = phi
            ext[0] = -phi[1]
            ext[-1] = phi[-2] if right_bc == "neumann_zero" else 2 * phi[-1] - phi[-2]
            d1 = (ext[2:] - ext[:-2]) / (2 * h)
            d2 = (ext[2:] - 2 * phi + ext[:-2]) / (h * h)
            dt, lam = _cfl_1d(f, np.abs(d1), t, h, cap)
            remaining = target - t
            if dt >= remaining or remaining - dt < 1e-12 * max(1.0, target):
                dt = remaining
            with np.errstate(divide="ignore", invalid="ignore"):
                rate = f_values(f, t, s, phi, d1, d2)
            if cap is not None and f.kind is OneDimKind.QUASILINEAR_1D:
                # clamped diffusion in place of the raw coefficient
                rate = -np.broadcast_to(lam, d2.shape) * d2
            new = phi - dt * rate
            new[0] = 0.0
            if right_bc == "dirichlet_value":
                new[-1] = right_value
            if not np.all(np.isfinite(new)):
                k = int(np.argmax(~np.isfinite(new)))
                raise MocPdeError(f"non-finite value at s = {s[k]:.6g}, t = {t + dt:.6g}")
            phi = new
            t = target if dt == remaining else t + dt
            traj.dt_history.append(dt)
        traj.snapshots.append(Profile1D(s, phi.copy(), t, left_bc, right_bc))
    return traj


# ---------------------------------------------------------------------------
# erf profile


def erf_profile(M, s, t, lam=1.0):
    """(M/2) erf(s / (2 sqrt(lam t))), the heat flow of the odd square wave of height M/2."""
    if not t > 0:
        raise DomainError(f"erf_profile needs t > 0, got {t}")
    return 0.5 * M * special.erf(np.asarray(s, dtype=float) / (2 * math.sqrt(lam * t)))


def erf_gradient_bound(M, t, lam=1.0):
    """Slope of the erf profile at s = 0: M / (2 sqrt(pi lam t))."""
    if not t > 0:
        raise DomainError(f"gradient bound needs t > 0, got {t}")
    return M / (2 * math.sqrt(math.pi * lam * t))


# ---------------------------------------------------------------------------
# p-Laplacian self-similar profile


def _check_p(p):
    if not (p > 1 and math.isfinite(p)):
        raise MocPdeError(f"exponent must satisfy 1 < p < inf, got {p}")


def fp_infinity(p):
    """lim F_p(z) as z -> infinity, from Beta-function closed forms.

    p > 2: int_0^1 (1 - s^2)^a ds, a = 1/(p-2); p = 2: sqrt(pi)/2;
    p < 2: int_0^inf (1 + s^2)^{-b} ds, b = 1/(2-p) > 1.
    """
    _check_p(p)
    if p == 2:
        return math.sqrt(math.pi) / 2
    if p > 2:
        a = 1.0 / (p - 2)
        return math.sqrt(math.pi) / 2 * math.exp(math.lgamma(a + 1) - math.lgamma(a + 1.5))
    b = 1.0 / (2 - p)
    return math.sqrt(math.pi) / 2 * math.exp(math.lgamma(b - 0.5) - math.lgamma(b))


def _fp_scalar(p, z):
    if z < 0:
        return -_fp_scalar(p, -z)
    if z == 0:
        return 0.0
    if p == 2:
        return math.sqrt(math.pi) / 2 * math.erf(z)
    if p > 2:
        a = 1.0 / (p - 2)
        if z >= 1:
            return fp_infinity(p)
        # s = sin(theta) removes the endpoint singularity of (1 - s^2)^a
        val, _ = integrate.quad(lambda th: math.cos(th) ** (2 * a + 1), 0.0, math.asin(z),
                                epsabs=1e-13, epsrel=1e-12, limit=200)
        return val
    b = 1.0 / (2 - p)
    if math.isinf(z):
        return fp_infinity(p)
    # s = tan(theta) maps [0, inf) onto [0, pi/2) with integrand cos^{2b-2}
    val, _ = integrate.quad(lambda th: math.cos(th) ** (2 * b - 2), 0.0, math.atan(z),
                            epsabs=1e-13, epsrel=1e-12, limit=200)
    return val


def fp(p, z):
    """F_p(z) = int_0^z g_p(s) ds with g_p = (1+s^2)^{1/(p-2)}, e^{-s^2}, (1-s^2)_+^{1/(p-2)}."""
    _check_p(p)
    z = np.asarray(z, dtype=float)
    out = np.vectorize(lambda zz: _fp_scalar(p, zz), otypes=[float])(z)
    return out if out.ndim else float(out)


def r_p(p):
    """Scale constant R_p.

    p < 2: (2p(p-1)/(2-p))^{1/p} (2F_p(inf))^{(2-p)/p}; p = 2: 2;
    p > 2: (2p(p-1)/(p-2))^{1/p} (2F_p(inf))^{(2-p)/p}.
    """
    _check_p(p)
    if p == 2:
        return 2.0
    return (2 * p * (p - 1) / abs(p - 2)) ** (1 / p) * (2 * fp_infinity(p)) ** ((2 - p) / p)


def _scale(p, M, t, R=None):
    R = r_p(p) if R is None else R
    return R * abs(M) ** ((p - 2) / p) * t ** (1 / p)


def plaplace_profile(p, M, s, t, R=None):
    """Self-similar solution of phi_t = (p-1)|phi'|^{p-2} phi'' with phi(0) = 0, phi(inf) = M/2.

    phi = (M/2) F_p(z)/F_p(inf) with z = s / (R_p M^{(p-2)/p} t^{1/p}).  For
    M = 2 the similarity variable is s/(R_p t^{1/p}) exactly; the M-power
    accounts for the equation not being invariant under u -> cu when p != 2.
    """
    _check_p(p)
    if not t > 0:
        raise DomainError(f"plaplace_profile needs t > 0, got {t}")
    z = np.asarray(s, dtype=float) / _scale(p, M, t, R)
    return 0.5 * M * np.asarray(fp(p, z)) / fp_infinity(p)


def printed_plaplace_profile(p, M, s, t):
    """(M/2)(1/(2F_p(inf))) F_p(s/(t^{1/p} R_p)), kept for comparison with plaplace_profile.

    It tends to M/4 rather than M/2 and solves the equation only when M = 2.
    """
    _check_p(p)
    z = np.asarray(s, dtype=float) / (t ** (1 / p) * r_p(p))
    return 0.5 * M * np.asarray(fp(p, z)) / (2 * fp_infinity(p))


def plaplace_gradient_bound(p, M, t):
    """sup_s phi'(s, t) for the profile: M^{2/p} / (2 R_p F_p(inf) t^{1/p})."""
    _check_p(p)
    return abs(M) ** (2 / p) / (2 * r_p(p) * fp_infinity(p) * t ** (1 / p))


def _fd_weights():
    # fourth-order central first and second derivative stencils on offsets -2..2
    d1 = np.array([1, -8, 0, 8, -1]) / 12.0
    d2 = np.array([-1, 16, -30, 16, -1]) / 12.0
    return d1, d2


def _profile_fn(p, M, R, scheme):
    if scheme == "printed":
        return lambda s, t: printed_plaplace_profile(p, M, s, t)
    return lambda s, t: plaplace_profile(p, M, s, t, R)


def residual_oracle(p, M, s_values, t_values, R=None, step=None, scheme="calibrated", min_slope=1e-3):
    """max |phi_t - (p-1)|phi'|^{p-2} phi''| / max |phi_t| by fourth-order finite differences.

    Points with |phi'| < ``min_slope`` or (for p > 2) within a few steps of
    the free boundary s = (scale) are skipped.  ``scheme='printed'`` evaluates
    the literal printed closed form instead of the calibrated one.
    """
    _check_p(p)
    phi = _profile_fn(p, M, R, scheme)
    d1w, d2w = _fd_weights()
    offs = np.arange(-2, 3)
    res, rates = [], []
    for t in np.atleast_1d(t_values):
        c = _scale(p, M, t, R)
        hs = step if step is not None else 1e-3 * c
        ht = step if step is not None else 1e-3 * t
        for s in np.atleast_1d(s_values):
            if s - 2 * hs <= 0:
                continue
            if p > 2 and s + 3 * hs >= c:
                continue
            vs = phi(s + offs * hs, t)
            vt = np.array([phi(s, t + k * ht) for k in offs], dtype=float)
            ds = float(d1w @ vs) / hs
            dss = float(d2w @ vs) / hs ** 2
            dt = float(d1w @ vt) / ht
            if abs(ds) < min_slope:
                continue
            res.append(dt - (p - 1) * abs(ds) ** (p - 2) * dss)
            rates.append(dt)
    if not res:
        raise MocPdeError("no admissible residual sample points")
    return float(np.max(np.abs(res)) / np.max(np.abs(rates)))


def _default_residual_points(p, M=2.0, t=(0.5, 1.0, 2.0)):
    c = _scale(p, M, 1.0)
    s = np.linspace(0.05, 0.95, 19) * (c if p > 2 else 3 * c)
    return s, np.array(t)


def calibrate_r_p(p, M=2.0, bracket=None):
    """Fit the scale constant by minimizing the residual oracle over R.

    Independent of the closed form for R_p: only F_p and the equation enter.
    """
    _check_p(p)
    guess = r_p(p)
    lo, hi = bracket or (0.5 * guess, 2.0 * guess)
    s_unit = np.linspace(0.1, 0.9, 9)

    def loss(R):
        c = R * abs(M) ** ((p - 2) / p)
        s = s_unit * (c if p > 2 else 3 * c)
        return residual_oracle(p, M, s, [1.0], R=R)

    out = optimize.minimize_scalar(loss, bounds=(lo, hi), method="bounded",
                                   options=dict(xatol=1e-9 * guess))
    return float(out.x)


# ---------------------------------------------------------------------------
# divergence integral


def b_integral(lam, a):
    """B(a) = int_0^a s lambda(s) ds by adaptive quadrature."""
    if a < 0:
        raise MocPdeError("b_integral needs a >= 0")
    probe = np.linspace(0.0, a, 65)
    vals = np.array([lam(x) for x in probe], dtype=float)
    if np.any(vals < 0):
        raise MocPdeError("lambda must be nonnegative")
    val, _ = integrate.quad(lambda x: x * lam(x), 0.0, a, epsabs=1e-12, epsrel=1e-12, limit=500)
    return float(val)


def diverges_heuristic(lam, a_max=2.0 ** 20, tail=4, increment=0.1, ratio=0.75):
    """Classify B(a) as 'diverges', 'bounded' or 'inconclusive' on the ladder a = 1, 2, 4, ..., a_max.

    The increments B(2a) - B(a) are inspected on the last ``tail`` doublings:
    all at least ``increment`` -> diverges; all decaying by at least ``ratio``
    per doubling (or negligible) -> bounded.
    """
    ladder = [1.0]
    while ladder[-1] * 2 <= a_max:
        ladder.append(ladder[-1] * 2)
    if len(ladder) < tail + 2:
        raise MocPdeError("a_max too small for the doubling ladder")
    B = [b_integral(lam, ladder[0])]
    for lo, hi in zip(ladder[:-1], ladder[1:]):
        val, _ = integrate.quad(lambda x: x * lam(x), lo, hi, epsabs=1e-14, epsrel=1e-12, limit=500)
        B.append(B[-1] + val)
    inc = np.diff(B)[-tail:]
    if np.all(inc >= increment):
        verdict = "diverges"
    elif np.all((inc[1:] <= ratio * inc[:-1]) | (inc[1:] < 1e-12)):
        verdict = "bounded"
    else:
        verdict = "inconclusive"
    return verdict


# ---------------------------------------------------------------------------
# curvature operator


def curvature_f(alpha, beta, kappa, n) -> OneDimOp:
    """f = -alpha(phi') phi'' + (n-1) T_kappa(s) phi' beta(phi')."""
    if int(n) != n or n < 2:
        raise MocPdeError("curvature operator needs an integer dimension n >= 2")
    return OneDimOp(OneDimKind.CURVATURE_1D, dict(alpha=alpha, beta=beta, kappa=float(kappa), n=int(n)),
                    f"curvature[kappa={kappa:g},n={n}]")

