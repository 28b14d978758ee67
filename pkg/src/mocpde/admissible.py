"""Tuples (x, y, v, r, X, Y) admissible for the doubled-variable Hessian constraint.

The constraint is diag(X, -Y) <= D^2_{x,y} 2 phi(|x - y|/2), whose right-hand
side is the block matrix M = [[P, -P], [-P, P]] with
P = (phi''/2) e e^T + (phi'/(2s)) (I - e e^T) and e = (x - y)/|x - y|.

Sampling is batched: the generator for block b of a seeded stream is
``default_rng([seed, b])``, so results depend only on the seed and the fixed
block size, never on scheduling.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
import scipy.linalg

from .errors import DomainError, MocPdeError
from .operators import BOX, P_ZERO, Jet1D

ADMISSIBLE_RTOL = 1e-9
TIGHT_RTOL = 1e-10
BLOCK = 256


@dataclass(frozen=True)
class BlockHessian:
    n: int
    P: np.ndarray
    M: np.ndarray


@dataclass
class AdmissibleTuple:
    x: np.ndarray
    y: np.ndarray
    v: float
    r: float
    X: np.ndarray
    Y: np.ndarray
    jet: Jet1D
    mode: str = "interior"
    # True when boundary mode could not tighten and fell back to an interior tuple
    fallback: bool = False

    @property
    def e(self):
        d = self.x - self.y
        return d / np.linalg.norm(d)

    def to_dict(self):
        return {
            "x": self.x.tolist(), "y": self.y.tolist(), "v": self.v, "r": self.r,
            "X": self.X.tolist(), "Y": self.Y.tolist(), "jet": asdict(self.jet),
            "mode": self.mode, "fallback": self.fallback,
        }


def block_hessian(jet: Jet1D, e, n: int) -> BlockHessian:
    e = np.asarray(e, dtype=float).reshape(n)
    norm = np.linalg.norm(e)
    if norm == 0:
        raise MocPdeError("direction vector must be nonzero")
    if not jet.s > 0:
        raise DomainError(f"block Hessian needs s > 0, got {jet.s}")
    e = e / norm
    ee = np.outer(e, e)
    P = 0.5 * jet.d2phi * ee + jet.dphi / (2 * jet.s) * (np.eye(n) - ee)
    M = np.empty((2 * n, 2 * n))
    M[:n, :n] = M[n:, n:] = P
    M[:n, n:] = M[n:, :n] = -P
    return BlockHessian(n, P, M)


def constraint_matrix(bh: BlockHessian, X, Y):
    """M - diag(X, -Y); PSD exactly when (X, Y) is admissible."""
    n = bh.n
    A = bh.M.copy()
    A[:n, :n] -= X
    A[n:, n:] += Y
    return A


def min_gap(bh: BlockHessian, X, Y) -> float:
    return float(np.linalg.eigvalsh(constraint_matrix(bh, X, Y))[0])


def _m_norm(P):
    # eigenvalues of M are 0 and twice those of P
    w = np.linalg.eigvalsh(P)
    return 2 * max(-w[0], w[-1])


def is_admissible(t: AdmissibleTuple, rtol=ADMISSIBLE_RTOL) -> bool:
    bh = block_hessian(t.jet, t.x - t.y, len(t.x))
    return min_gap(bh, t.X, t.Y) >= -rtol * (1 + _m_norm(bh.P))


# ---------------------------------------------------------------------------
# jets


def sample_jets(rng, count, s_range=(0.01, 0.9 * math.pi), grad_sign="nonneg", t_range=(0.0, 1.0)):
    """Draw jets from phi = a atan(b s), phi = a s - b s^2, or phi = a s^2.

    The first two are increasing concave; the convex family gives phi'' > 0.
    With ``grad_sign="any"`` the quadratic family is also sampled on its
    decreasing branch (phi' < 0, phi still positive).  Jets with
    |phi'| < P_ZERO are redrawn.
    """
    if grad_sign not in ("nonneg", "any"):
        raise MocPdeError(f"grad_sign must be 'nonneg' or 'any', got {grad_sign!r}")
    out = []
    while len(out) < count:
        m = count - len(out)
        s = rng.uniform(*s_range, size=m)
        t = rng.uniform(*t_range, size=m)
        a = rng.uniform(0.1, 3.0, size=m)
        b = rng.uniform(0.1, 3.0, size=m)
        w = rng.uniform(0.05, 3.0, size=m)
        u = rng.uniform(0.05, 0.95, size=m)
        k = rng.integers(3 if grad_sign == "nonneg" else 4, size=m)
        bs = b * s
        which = [k == 0, k == 1, k == 2]
        phi = np.select(which, [a * np.arctan(bs), s * w + b * s * s, a * s * s], u * b * s * s)
        dphi = np.select(which, [a * b / (1 + bs * bs), w, 2 * a * s], b * s * (u - 1))
        d2phi = np.select(which, [-2 * a * b ** 3 * s / (1 + bs * bs) ** 2, -2 * b, 2 * a], -2 * b)
        for i in range(m):
            if abs(dphi[i]) >= P_ZERO:
                out.append(Jet1D(float(t[i]), float(s[i]), float(phi[i]), float(dphi[i]), float(d2phi[i])))
    return out


def sample_jet(rng, s_range=(0.01, 0.9 * math.pi), grad_sign="nonneg", t_range=(0.0, 1.0)) -> Jet1D:
    return sample_jets(rng, 1, s_range, grad_sign, t_range)[0]


def random_unit(rng, n):
    while True:
        e = rng.standard_normal(n)
        norm = np.linalg.norm(e)
        if norm > 1e-6:
            return e / norm


# ---------------------------------------------------------------------------
# tightening


def tighten(bh: BlockHessian, X, Y, D1, D2, gap_rtol=TIGHT_RTOL):
    """Largest tau >= 0 keeping (X + tau D1, Y - tau D2) admissible.

    D1, D2 must be PSD.  With A = M - diag(X, -Y) = L L^T and B = diag(D1, D2),
    the exact answer is 1/mu for mu the top eigenvalue of L^{-1} B L^{-T}.
    That value is accepted when |min-eig(A - tau B)| <= gap_rtol (1 + |M|),
    since rounding can leave it a hair negative; otherwise bisection pins it down.
    Returns None when A is not positive definite or B constrains nothing.
    """
    n = bh.n
    A = constraint_matrix(bh, X, Y)
    B = np.zeros((2 * n, 2 * n))
    B[:n, :n] = D1
    B[n:, n:] = D2
    tol = gap_rtol * (1 + _m_norm(bh.P))
    try:
        L = np.linalg.cholesky(A)
    except np.linalg.LinAlgError:
        return None
    C = scipy.linalg.solve_triangular(L, B, lower=True)
    C = scipy.linalg.solve_triangular(L, C.T, lower=True)
    mu = np.linalg.eigvalsh(0.5 * (C + C.T))[-1]
    if not np.isfinite(mu) or mu <= 0:
        return None

    def g(tau):
        return np.linalg.eigvalsh(A - tau * B)[0]

    tau_star = 1.0 / mu
    if abs(g(tau_star)) <= tol:
        return tau_star
    lo, hi = tau_star * (1 - 1e-8), tau_star * (1 + 1e-8)
    if g(lo) < 0:
        lo = 0.0
    while g(hi) >= 0:
        hi *= 2
        if hi > 1e12 * (1 + tau_star):
            return None
    for _ in range(200):
        if g(lo) <= tol:
            break
        mid = 0.5 * (lo + hi)
        if g(mid) >= 0:
            lo = mid
        else:
            hi = mid
    return lo


# ---------------------------------------------------------------------------
# batched sampling


def _sym(A):
    return 0.5 * (A + np.swapaxes(A, -1, -2))


def _random_symmetric(rng, m, n, rho):
    A = rng.uniform(-1.0, 1.0, size=(m, n, n)) * rho[:, None, None]
    return np.triu(A) + np.swapaxes(np.triu(A, 1), -1, -2)


def _interior_batch(rng, norm_P, n):
    m = norm_P.shape[0]
    rho = 1.0 + 2 * norm_P
    R = _random_symmetric(rng, m, n, rho)
    S = _random_symmetric(rng, m, n, rho)
    # Frobenius norms bound spectral norms, so M - diag(X, -Y) has a positive margin
    c = np.maximum(np.linalg.norm(R, axis=(1, 2)), np.linalg.norm(S, axis=(1, 2))) + 2 * norm_P
    c += 0.1 * rho * rng.uniform(0.01, 1.0, size=m)
    eye = np.eye(n)
    return R - c[:, None, None] * eye, S + c[:, None, None] * eye


def _schur_start_batch(rng, E, w, P):
    """Interior pairs near the extremal face, via M - diag(X, -Y) = [[a, -P], [-P, b]].

    For a > 0 this is PSD iff b >= P a^{-1} P, so X = P - a and
    Y = P a^{-1} P + c - P with c > 0 is admissible.  a is drawn around |P| in a
    slightly rotated eigenframe of P; the trace bound is attained at a = |P|, c = 0.
    """
    m, n = E.shape
    eye = np.eye(n)
    # Householder frame whose first column is e
    v = E.copy()
    v[:, 0] -= 1.0
    vv = np.einsum("bi,bi->b", v, v)
    flat = vv < 1e-24
    Q = eye - 2.0 * np.einsum("bi,bj->bij", v, v) / np.where(flat, 1.0, vv)[:, None, None]
    Q[flat] = eye
    scale = 1.0 + np.abs(w).max(axis=1)
    sigma = rng.uniform(0.02, 1.0, size=m)
    K = rng.standard_normal((m, n, n)) * (0.3 * sigma)[:, None, None]
    K = K - np.swapaxes(K, 1, 2)
    # the Cayley transform of a skew matrix is a rotation
    Q = Q @ np.linalg.solve(eye - K, eye + K)
    diag = np.abs(w) * np.exp(sigma[:, None] * rng.standard_normal((m, n)))
    diag += 1e-3 * scale[:, None] * rng.uniform(0.1, 1.0, size=(m, n))
    Qt = np.swapaxes(Q, 1, 2)
    a = (Q * diag[:, None, :]) @ Qt
    a_inv = (Q / diag[:, None, :]) @ Qt
    G = rng.standard_normal((m, n, n))
    c = (1e-2 * scale * rng.uniform(0.01, 1.0, size=m) / n)[:, None, None] * (G @ np.swapaxes(G, 1, 2))
    c += (1e-6 * scale)[:, None, None] * eye
    return P - a, _sym(P @ a_inv @ P + c - P)


def _psd_directions(rng, m, n):
    out = []
    for _ in range(2):
        G = rng.standard_normal((m, n, n))
        k = rng.integers(1, n + 1, size=m)
        G *= (np.arange(n)[None, :] < k[:, None])[:, None, :]
        out.append(G @ np.swapaxes(G, 1, 2))
    return out


def _tighten_batch(P, M, X, Y, D1, D2):
    m, n = X.shape[0], X.shape[1]
    A = M.copy()
    A[:, :n, :n] -= X
    A[:, n:, n:] += Y
    B = np.zeros_like(A)
    B[:, :n, :n] = D1
    B[:, n:, n:] = D2
    wP = np.linalg.eigvalsh(P)
    tol = TIGHT_RTOL * (1 + 2 * np.maximum(-wP[:, 0], wP[:, -1]))
    tau = np.full(m, np.nan)
    pd = np.linalg.eigvalsh(A)[:, 0] > 0
    idx = np.flatnonzero(pd)
    if idx.size:
        try:
            L = np.linalg.cholesky(A[idx])
            Linv = np.linalg.solve(L, np.eye(2 * n))
            C = _sym(Linv @ B[idx] @ np.swapaxes(Linv, 1, 2))
            mu = np.linalg.eigvalsh(C)[:, -1]
            with np.errstate(divide="ignore", invalid="ignore"):
                t_star = np.where(mu > 0, 1.0 / mu, np.nan)
            g = np.linalg.eigvalsh(A[idx] - np.nan_to_num(t_star)[:, None, None] * B[idx])[:, 0]
            good = np.isfinite(t_star) & (np.abs(g) <= tol[idx])
            tau[idx[good]] = t_star[good]
        except np.linalg.LinAlgError:
            pass
    # the rare leftovers go through the scalar bisection
    for i in np.flatnonzero(pd & ~np.isfinite(tau)):
        t = tighten(BlockHessian(n, P[i], M[i]), X[i], Y[i], D1[i], D2[i])
        if t is not None:
            tau[i] = t
    return tau


def sample_batch(rng, jets, n, modes, box=BOX, directions=None):
    """Admissible tuples for a list of jets; ``modes[i]`` is 'interior' or 'boundary'.

    interior: X = R - cI, Y = S + cI with random symmetric R, S
    (|entries| <= 1 + |M|) and c large enough for strictly positive slack.
    boundary: start from an interior pair near the extremal face and move
    along a random PSD direction diag(D1, D2) until the constraint is active.
    Points are placed uniformly in ``box`` (per coordinate) with x - y = 2 s e.
    """
    m = len(jets)
    if m == 0:
        return []
    if n < 1:
        raise MocPdeError("dimension n >= 1 required")
    for jet in jets:
        jet.validate()
    modes = list(modes)
    for mode in modes:
        if mode not in ("interior", "boundary"):
            raise MocPdeError(f"unknown sampling mode {mode!r}")
    s = np.array([j.s for j in jets])
    if np.any(s <= 0):
        raise DomainError("admissible tuples need s > 0")
    phi = np.array([j.phi for j in jets])
    dphi = np.array([j.dphi for j in jets])
    d2phi = np.array([j.d2phi for j in jets])

    if directions is None:
        E = rng.standard_normal((m, n))
        E[np.linalg.norm(E, axis=1) < 1e-6, 0] = 1.0
    else:
        E = np.array(directions, dtype=float).reshape(m, n)
        if np.any(np.linalg.norm(E, axis=1) == 0):
            raise MocPdeError("direction vector must be nonzero")
    E /= np.linalg.norm(E, axis=1)[:, None]

    lo, hi = box
    half = s[:, None] * np.abs(E)
    if np.any(2 * half > hi - lo):
        raise DomainError(f"s = {s.max()} does not fit in the sample box {box}")
    mid = lo + half + (hi - lo - 2 * half) * rng.uniform(size=(m, n))
    x = mid + s[:, None] * E
    y = mid - s[:, None] * E
    r = rng.uniform(-1.0, 1.0, size=m)
    v = r + 2 * phi

    eye = np.eye(n)
    ee = np.einsum("bi,bj->bij", E, E)
    P = (0.5 * d2phi)[:, None, None] * ee + (dphi / (2 * s))[:, None, None] * (eye - ee)
    M = np.empty((m, 2 * n, 2 * n))
    M[:, :n, :n] = M[:, n:, n:] = P
    M[:, :n, n:] = M[:, n:, :n] = -P
    w = np.repeat((dphi / (2 * s))[:, None], n, axis=1)
    w[:, 0] = 0.5 * d2phi
    norm_P = np.abs(w).max(axis=1)

    X, Y = _interior_batch(rng, norm_P, n)
    fallback = np.zeros(m, dtype=bool)
    bnd = np.array([mode == "boundary" for mode in modes])
    if bnd.any():
        bi = np.flatnonzero(bnd)
        Xb, Yb = _schur_start_batch(rng, E[bi], w[bi], P[bi])
        D1, D2 = _psd_directions(rng, bi.size, n)
        tau = _tighten_batch(P[bi], M[bi], Xb, Yb, D1, D2)
        ok = np.isfinite(tau)
        t = np.where(ok, tau, 0.0)[:, None, None]
        X[bi[ok]] = (Xb + t * D1)[ok]
        Y[bi[ok]] = (Yb - t * D2)[ok]
        fallback[bi[~ok]] = True

    return [AdmissibleTuple(x[i], y[i], float(v[i]), float(r[i]), X[i], Y[i], jets[i],
                            str(modes[i]), bool(fallback[i])) for i in range(m)]


def sample_admissible(jet: Jet1D, n: int, seed: int, mode="interior", box=BOX, e=None) -> AdmissibleTuple:
    """Draw one admissible tuple at the given jet (see ``sample_batch``)."""
    rng = np.random.default_rng(seed)
    return sample_batch(rng, [jet], n, [mode], box, None if e is None else [e])[0]


def sample_tuples(count, n, seed, mode="mixed", box=BOX, grad_sign="nonneg", jet_filter=None):
    """Yield ``count`` admissible tuples at random jets, in seeded blocks of ``BLOCK``.

    ``mode='mixed'`` picks interior or boundary with probability 1/2 each.
    ``jet_filter`` rejects jets, which are then redrawn from the same stream.
    """
    if mode not in ("mixed", "interior", "boundary"):
        raise MocPdeError(f"unknown sampling mode {mode!r}")
    s_hi = 0.9 * (box[1] - box[0]) / 2
    done = b = 0
    while done < count:
        rng = np.random.default_rng([seed, b])
        m = min(BLOCK, count - done)
        jets = []
        for _ in range(1000):
            cand = sample_jets(rng, m - len(jets), (0.01, s_hi), grad_sign)
            jets.extend(j for j in cand if jet_filter is None or jet_filter(j))
            if len(jets) == m:
                break
        else:
            raise MocPdeError("jet_filter rejects almost every sampled jet")
        if mode == "mixed":
            modes = np.where(rng.random(m) < 0.5, "interior", "boundary")
        else:
            modes = [mode] * m
        yield from sample_batch(rng, jets, n, modes, box)
        done += m
        b += 1


@dataclass(frozen=True)
class TraceReport:
    x_le_y: bool
    trace_ok: bool
    slack: float
    max_eig: float


def check_trace_inequality(t: AdmissibleTuple, tol=1e-8) -> TraceReport:
    """Check X <= Y and tr(X - Y) <= 2 phi'' on an admissible tuple."""
    D = t.X - t.Y
    lam_max = float(np.linalg.eigvalsh(D)[-1])
    slack = 2 * t.jet.d2phi - float(np.trace(D))
    return TraceReport(lam_max <= tol, slack >= -tol, slack, lam_max)
