import numpy as np
import pytest

from mocpde.errors import EvaluationError, MocPdeError
from mocpde.operators import BUILTIN_NAMES, OneDimKind, OneDimOp, OperatorKind, OperatorSpec, get_pair
from mocpde.structure import check_all_builtin, check_pair, sc_sides


@pytest.mark.parametrize("n", [1, 2, 3])
def test_heat_has_no_violations(n):
    F, f = get_pair("heat")
    rep = check_pair(F, f, n, 1000, seed=n)
    assert rep.ok and rep.samples == 1000
    assert rep.worst_slack >= -1e-8


@pytest.mark.parametrize("n", [1, 2, 3])
def test_mismatched_pair_is_caught(n):
    # heat paired with a 1D operator twice as diffusive cannot satisfy the condition
    F, _ = get_pair("heat")
    f = OneDimOp(OneDimKind.LINEAR_1D, dict(lam=2.0))
    concave = lambda jet: jet.d2phi < 0
    rep = check_pair(F, f, n, 300, seed=1, mode="boundary", jet_filter=concave)
    assert len(rep.violations) > 100
    v = rep.violations[0]
    assert v.lhs > v.rhs
    assert "tuple" in v.to_dict()


def test_proper_pair():
    F, f = get_pair("proper")
    for n in (2, 3):
        assert check_pair(F, f, n, 1000, seed=7).ok


@pytest.mark.parametrize("name", BUILTIN_NAMES)
def test_builtin_pairs_small_run(name):
    F, f = get_pair(name)
    assert check_pair(F, f, 2, 400, seed=3).ok


def test_samples_must_be_positive():
    F, f = get_pair("heat")
    with pytest.raises(MocPdeError):
        check_pair(F, f, 2, 0)
    with pytest.raises(MocPdeError):
        check_all_builtin(0)


def test_determinism():
    F, _ = get_pair("heat")
    f = OneDimOp(OneDimKind.LINEAR_1D, dict(lam=2.0))
    a = check_pair(F, f, 2, 500, seed=4)
    b = check_pair(F, f, 2, 500, seed=4)
    assert [v.index for v in a.violations] == [v.index for v in b.violations]
    assert a.worst_slack == b.worst_slack


def test_violation_count_monotone_in_tol():
    F, _ = get_pair("heat")
    f = OneDimOp(OneDimKind.LINEAR_1D, dict(lam=1.2))
    counts = [len(check_pair(F, f, 2, 500, seed=2, tol=tol).violations) for tol in (0.0, 1e-2, 1e-1, 1.0)]
    assert counts == sorted(counts, reverse=True)
    assert counts[0] > 0


def test_evaluation_error_carries_tuple():
    def boom(q):
        raise FloatingPointError("bad")

    F = OperatorSpec(OperatorKind.QUASILINEAR_ISOTROPIC, dict(alpha=boom, beta=boom))
    with pytest.raises(EvaluationError) as info:
        check_pair(F, OneDimOp(OneDimKind.ZERO), 2, 10)
    assert info.value.sample is not None


def test_sc_sides_heat_tight_tuple():
    # heat with X = Y + 2 phi'' e e^T has lhs = rhs identically
    from mocpde.admissible import AdmissibleTuple
    from mocpde.operators import Jet1D

    jet = Jet1D(0.0, 0.5, 1.0, 1.0, -0.3)
    e = np.array([1.0, 0.0])
    Y = np.diag([0.4, -1.0])
    X = Y + 2 * jet.d2phi * np.outer(e, e)
    tup = AdmissibleTuple(np.array([0.5, 0.0]), np.array([-0.5, 0.0]), 2.0, 0.0, X, Y, jet)
    F, f = get_pair("heat")
    lhs, rhs = sc_sides(F, f, tup, 0.0)
    assert lhs == pytest.approx(rhs, abs=1e-14)
    assert rhs == pytest.approx(-0.6)


def test_check_all_builtin_aggregates():
    reps = check_all_builtin(240, seed=1)
    assert set(reps) == set(BUILTIN_NAMES)
    assert all(r.ok for r in reps.values())
    pieces = reps["quasilinear-isotropic"].config["pieces"]
    assert {p["p"] for p in pieces} == {1.5, 2.0, 3.0, 4.0}
    assert {p["n"] for p in pieces} == {2, 3}
