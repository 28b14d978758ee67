import math

import numpy as np
import pytest

from mocpde.errors import CFLError, MocPdeError, SolverError
from mocpde.operators import BUILTIN_NAMES, OperatorKind, OperatorSpec, get_pair
from mocpde.solver import (GridField, Stepper, cfl_limit, gradient_sup, grid, load_trajectory, save_trajectory,
                           solve, step)

TWO_PI = 2 * math.pi


def _sin_field(N, dim=1):
    if dim == 1:
        return grid(TWO_PI, N, fn=np.sin)
    return grid((TWO_PI, TWO_PI), (N, N), fn=lambda x, y: np.sin(x))


def test_grid_spacing_invariants():
    g = grid(TWO_PI, 64)
    assert g.spacing[0] * 64 == pytest.approx(TWO_PI)
    n = grid((1.0, 2.0), (11, 21), boundary="neumann")
    assert n.spacing == pytest.approx((0.1, 0.1))
    assert n.axes()[1][-1] == pytest.approx(2.0)
    with pytest.raises(MocPdeError):
        GridField((1.0,), [0.0, np.nan])
    with pytest.raises(MocPdeError):
        GridField((1.0,), [0.0, 1.0], boundary="dirichlet")


def test_heat_sin_mode_half():
    F, _ = get_pair("heat")
    traj = solve(_sin_field(256), F, 0.5)
    exact = math.exp(-0.5) * np.sin(traj.final.axes()[0])
    assert np.abs(traj.final.values - exact).max() <= 1e-3
    assert traj.times == [0.5]


def test_heat_sin_mode_unit_time_with_outputs():
    F, _ = get_pair("heat")
    traj = solve(_sin_field(128), F, 1.0, output_times=[0.25, 0.5])
    assert traj.times == [0.25, 0.5, 1.0]
    assert traj.final.values.max() == pytest.approx(math.exp(-1.0), abs=1e-3)


@pytest.mark.parametrize("name", BUILTIN_NAMES)
@pytest.mark.parametrize("dim", [1, 2])
def test_constant_field_is_stationary(name, dim):
    overrides = {"proper": dict(c=0.0), "lipschitz-general": dict(L=0.0, K=0.0)}.get(name, {})
    if name == "linear-elliptic":
        overrides = dict(V=0.0)
    F, _ = get_pair(name, **overrides)
    if name == "linear-elliptic":
        F = OperatorSpec(F.kind, dict(F.params, h=lambda x: 0.0))
    nodes = 16 if dim == 1 else (16, 16)
    extent = TWO_PI if dim == 1 else (TWO_PI, TWO_PI)
    g = grid(extent, nodes, fn=lambda *x: 0 * x[0] + 0.7)
    traj = solve(g, F, 0.05)
    assert np.abs(traj.final.values - 0.7).max() <= 1e-14


def test_cfl_examples():
    heat, _ = get_pair("heat")
    g1 = grid(1.0, 10)
    assert g1.spacing[0] == pytest.approx(0.1)
    assert cfl_limit(g1, heat) == pytest.approx(0.01 / 2.2)
    pucci, _ = get_pair("pucci-plus", lam=1.0, Lam=2.0)
    g2 = grid((1.0, 1.0), (10, 10), fn=lambda x, y: np.sin(x))
    assert cfl_limit(g2, pucci) == pytest.approx(0.01 / (2 * 2 * 2 * 1.1))
    mcf, _ = get_pair("graphical-mcf")
    g3 = grid((1.0, 1.0), (10, 10), fn=lambda x, y: np.sin(6 * x) + y)
    assert cfl_limit(g3, mcf) <= cfl_limit(g3, heat) * (1 + 1e-12)
    assert cfl_limit(grid((1.0, 1.0), (10, 10)), mcf) == pytest.approx(cfl_limit(g3, heat))


def test_cfl_violation_raises_before_stepping():
    F, _ = get_pair("heat")
    g = _sin_field(64)
    with pytest.raises(CFLError):
        step(g, F, 2 * cfl_limit(g, F))
    with pytest.raises(CFLError):
        solve(g, F, 0.1, dt=2 * cfl_limit(g, F))


def test_unbounded_diffusivity_needs_cap():
    F, _ = get_pair("quasilinear-isotropic", p=1.5)
    g = grid(TWO_PI, 64, fn=lambda x: np.where(np.abs(x - math.pi) < 1, 1.0, 0.0))
    assert math.isfinite(cfl_limit(g, F))
    with pytest.raises(CFLError):
        Stepper(g, F, cap=None).cfl_limit(g)


def test_nan_reported_with_location():
    bad = OperatorSpec(OperatorKind.QUASILINEAR_ISOTROPIC,
                       dict(alpha=lambda q: np.where(q > 0.5, np.nan, 1.0), beta=lambda q: 1.0 + 0 * q))
    g = grid(TWO_PI, 32, fn=np.sin)
    with pytest.raises(SolverError) as info:
        Stepper(g, bad, cap=None).step(g, 1e-4, check_cfl=False)
    assert info.value.location is not None


@pytest.mark.parametrize("name", ["heat", "pucci-plus"])
def test_discrete_comparison_principle(name):
    F, _ = get_pair(name)
    rng = np.random.default_rng(0)
    for _ in range(20):
        coeffs = rng.standard_normal(3)
        u0 = grid((TWO_PI, TWO_PI), (24, 24),
                  fn=lambda x, y: coeffs[0] * np.sin(x) + coeffs[1] * np.cos(2 * y) + coeffs[2] * np.sin(x + y))
        bump = np.abs(rng.standard_normal(u0.nodes)) * (rng.random(u0.nodes) < 0.3)
        v0 = u0.with_values(u0.values + bump)
        # equal step sizes for both runs: take the smaller CFL limit
        dt = min(cfl_limit(u0, F), cfl_limit(v0, F))
        tu = solve(u0, F, 0.2, output_times=[0.1], dt=dt)
        tv = solve(v0, F, 0.2, output_times=[0.1], dt=dt)
        for a, b in zip(tu.snapshots, tv.snapshots):
            assert np.all(a.values <= b.values + 1e-12)


def test_neumann_heat_conserves_mean():
    F, _ = get_pair("heat")
    g = grid((math.pi, math.pi), (48, 48), boundary="neumann",
             fn=lambda x, y: np.cos(x) * np.cos(2 * y) + np.where(x + y < 1.5, 1.0, 0.0))
    m0 = g.mean()
    traj = solve(g, F, 0.3, output_times=[0.1, 0.2])
    for snap in traj.snapshots:
        assert abs(snap.mean() - m0) <= 1e-10 * max(1.0, abs(m0))


def test_neumann_reflection_preserves_cosine_mode():
    F, _ = get_pair("heat")
    g = grid(math.pi, 129, boundary="neumann", fn=np.cos)
    traj = solve(g, F, 0.5)
    assert np.abs(traj.final.values - math.exp(-0.5) * np.cos(g.axes()[0])).max() < 1e-3


def test_heat_convergence_order():
    F, _ = get_pair("heat")
    errs = []
    for N in (32, 64):
        traj = solve(_sin_field(N), F, 0.5)
        errs.append(np.abs(traj.final.values - math.exp(-0.5) * np.sin(traj.final.axes()[0])).max())
    assert errs[0] / errs[1] >= 3.7
    assert math.log2(errs[0] / errs[1]) >= 1.9


def test_pucci_self_convergence():
    # successive differences of a sin-mode run contract by at least 4 under refinement
    F, _ = get_pair("pucci-plus", lam=1.0, Lam=2.0)
    runs = {N: solve(_sin_field(N, 2), F, 0.05).final.values for N in (32, 128, 256)}
    coarse = lambda N: runs[N][:: N // 32, :: N // 32]
    d_coarse = np.abs(coarse(128) - runs[32]).max()
    d_fine = np.abs(coarse(256) - coarse(128)).max()
    assert d_fine * 4 <= d_coarse
    assert d_fine < 1e-4


def test_pucci_decay_rates_by_sign_region():
    # on sin x1 the scheme uses Lam where u is convex (u < 0) and lam where concave
    F, _ = get_pair("pucci-plus", lam=1.0, Lam=2.0)
    tr = solve(_sin_field(64, 2), F, 0.1)
    u = tr.final.values[:, 0]
    assert u.max() == pytest.approx(math.exp(-0.1), abs=5e-3)
    assert u.min() == pytest.approx(-math.exp(-0.2), abs=5e-3)


def test_proper_oscillation_nonincreasing():
    F, _ = get_pair("proper", c=0.0)
    rng = np.random.default_rng(1)
    u0 = grid((TWO_PI, TWO_PI), (32, 32)).with_values(rng.uniform(-1, 1, (32, 32)))
    traj = solve(u0, F, 0.2, output_times=np.linspace(0.02, 0.2, 10))
    osc = [u0.oscillation()] + [s.oscillation() for s in traj.snapshots]
    assert all(b <= a + 1e-12 for a, b in zip(osc, osc[1:]))


def test_proper_with_zeroth_order_term_stays_bounded():
    F, _ = get_pair("proper")
    u0 = _sin_field(32, 2)
    traj = solve(u0, F, 0.2)
    assert traj.final.oscillation() <= u0.oscillation() + 1e-12


def test_gradient_sup_examples():
    assert gradient_sup(_sin_field(1024)) == pytest.approx(1.0, abs=1e-4)
    assert gradient_sup(grid((1.0, 1.0), (8, 8))) == 0.0
    # |sin x| has slopes +-1 away from the kinks; the central difference at nodes near a kink stays below 1
    vals = [gradient_sup(grid(TWO_PI, N, fn=lambda x: np.abs(np.sin(x)))) for N in (1024, 4096)]
    assert vals[1] == pytest.approx(1.0, abs=1e-3)
    assert abs(vals[1] - vals[0]) < 1e-3


def test_solve_requires_forward_time():
    F, _ = get_pair("heat")
    with pytest.raises(MocPdeError):
        solve(_sin_field(16), F, 0.0)
    with pytest.raises(MocPdeError):
        solve(_sin_field(16), F, 1.0, output_times=[2.0])


def test_trajectory_round_trip(tmp_path):
    F, _ = get_pair("heat")
    g = grid((TWO_PI, math.pi), (16, 9), boundary="neumann", fn=lambda x, y: np.cos(x) + np.cos(y))
    traj = solve(g, F, 0.2, output_times=[0.1])
    files = save_trajectory(traj, tmp_path / "run")
    assert files == ["t_0.1.csv", "t_0.2.csv"]
    header = (tmp_path / "run" / "t_0.1.csv").read_text().splitlines()[0]
    assert header == "x1,x2,u"
    back = load_trajectory(tmp_path / "run")
    assert back.times == traj.times
    for a, b in zip(back.snapshots, traj.snapshots):
        assert np.array_equal(a.values, b.values)
        assert a.spacing == b.spacing
    assert len(back.dt_history) == len(traj.dt_history)
