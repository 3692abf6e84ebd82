import csv
import io
import math
import warnings

import numpy as np
import pytest

import oracles
from algflow.analysis import (
    TimeGrid,
    density_search,
    density_witness,
    detect_homogeneous,
    detect_periodic,
    ea_duration_e8,
    limit_algebra,
    limit_search,
    scan_property,
    split_associativity_duration,
    split_commutativity_duration,
    stochasticity_closure_sweep,
)
from algflow.cubic import StochasticityKind, check_algebra_property, check_stochastic
from algflow.families import AFamilySpec, canonical_flows, eval_flow, make_flow, make_flow_tA, make_flow_tE
from algflow.functions import Const, Exp, Poly, Product, Recip, Sin

CANON = canonical_flows()
GRID = TimeGrid(0.0, 4.0, 0.0, 6.0, 9, 11)
QGRID = TimeGrid(0.0, 4.0, 0.0, 6.0, 9, 11, require_gap=True)


# --------------------------------------------------------------------------
# grids and diagrams
# --------------------------------------------------------------------------


def test_grid_admissibility():
    g = TimeGrid(0, 2, 0, 2, 3, 3)
    assert g.admissible.tolist() == [[True, True, True], [False, True, True], [False, False, True]]
    q = TimeGrid(0, 2, 0, 2, 3, 3, require_gap=True)
    assert q.admissible.tolist() == [[False, True, True], [False, False, True], [False, False, False]]
    assert TimeGrid.parse("0,1,2,3,4,5") == TimeGrid(0, 1, 2, 3, 4, 5)
    with pytest.raises(ValueError):
        TimeGrid.parse("0,1,2")
    with pytest.raises(ValueError):
        TimeGrid(1, 0, 0, 1, 2, 2)
    with pytest.raises(ValueError):
        TimeGrid(0, 1, 0, 1, 0, 2)


def test_scan_equals_direct_predicate():
    spec = CANON["E9"]
    d = scan_property(spec, "Commutative", GRID, 1e-9)
    for a, b, s, t in GRID.cells():
        assert d.holds[a, b] == int(check_algebra_property(eval_flow(spec, s, t), "Commutative", 1e-9))
    k = scan_property(CANON["E2"], StochasticityKind.K, QGRID)
    for a, b, s, t in QGRID.cells():
        assert k.holds[a, b] == int(check_stochastic(eval_flow(CANON["E2"], s, t), "K"))


def test_scan_rejects_qsp_without_gap():
    with pytest.raises(ValueError, match="require_gap"):
        scan_property(CANON["E2"], "Baric", GRID)
    with pytest.raises(ValueError, match="unknown property"):
        scan_property(CANON["E9"], "Nilpotent", GRID)


def test_undefined_cells():
    spec = make_flow("E8", psi=Poly((1.0, -0.5)), kappa11=0.0, kappa21=0.0)
    # psi is checked on a fixed validation grid; t = 2 is not on it
    g = TimeGrid(0.0, 2.0, 0.0, 4.0, 5, 5)
    d = scan_property(spec, "Baric", g)
    assert d.n_undefined > 0
    assert "undefined" in d.to_csv()


def test_csv_layout():
    g = TimeGrid(0.0, 1.0, 0.0, 1.0, 2, 3)
    d = scan_property(CANON["E9"], "EvolutionAlgebra", g)
    rows = list(csv.reader(io.StringIO(d.to_csv())))
    assert rows[0] == ["s", "t", "holds"]
    pairs = [(float(s), float(t)) for s, t, _ in rows[1:]]
    assert pairs == [(0, 0), (0, 0.5), (0, 1), (1, 1)]
    doc = d.to_json()
    assert doc["grid"]["n_t"] == 3 and doc["counts"]["false"] == 4


def test_scan_is_independent_of_workers():
    d1 = scan_property(CANON["E7"], "Commutative", GRID, 1e-2, workers=1)
    d4 = scan_property(CANON["E7"], "Commutative", GRID, 1e-2, workers=4)
    assert d1.to_csv() == d4.to_csv()


# --------------------------------------------------------------------------
# property durations
# --------------------------------------------------------------------------


@pytest.mark.parametrize("name", ["E2", "E3", "E4", "E5", "E6"])
def test_qsp_flows_are_baric_and_never_evolution(name):
    assert scan_property(CANON[name], "Baric", QGRID).all_true()
    assert scan_property(CANON[name], "EvolutionAlgebra", QGRID).all_false()
    assert scan_property(CANON[name], "Commutative", QGRID).all_true()


@pytest.mark.parametrize("name", ["E8", "E9", "E10", "TA", "TE"])
def test_two_dimensional_flows_are_not_baric(name):
    assert scan_property(CANON[name], "Baric", GRID).all_false()


def test_e9_commutativity_criterion():
    assert scan_property(make_flow("E9", a=0.7, b=0.2, c=0.3, d=-0.2), "Commutative", GRID).all_true()
    assert scan_property(make_flow("E9", a=0.5, b=0.2, c=0.3, d=-0.2), "Commutative", GRID).all_false()
    assert scan_property(CANON["E9"], "Commutative", GRID).all_false()


def test_rotation_pair_commutes_at_three_quarter_turns():
    step = 0.01
    g = TimeGrid(0.0, 1.0, 0.0, 8.0, 3, 801)
    d = scan_property(CANON["E7"], "Commutative", g, tol=step)
    assert d.n_true > 0
    for s, t in d.true_cells():
        h = t - s - 0.75 * math.pi
        assert abs(h - math.pi * round(h / math.pi)) <= step
    # every branch 3pi/4 + pi n inside the window is hit for each s
    for s in g.s_values:
        hits = {round((t - s - 0.75 * math.pi) / math.pi) for ss, t in d.true_cells() if ss == s}
        want = {n for n in range(-1, 4) if 0 <= 0.75 * math.pi + math.pi * n <= 8.0 - s}
        assert hits == want


def test_e8_evolution_duration():
    psi = Exp(1.0)
    g = TimeGrid(0.0, 3.0, 0.0, 4.0, 10, 10)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        full = ea_duration_e8(psi, Recip(Product((Const(2.0), psi))), Const(0.0), g)
    assert full.all_true()
    spec = make_flow("E8", psi=psi, kappa11=Recip(Product((Const(2.0), psi))), kappa21=0.0)
    assert full.agrees_with(scan_property(spec, "EvolutionAlgebra", g))
    assert ea_duration_e8(psi, Const(0.1), Const(0.5), g).all_false()


def test_e8_evolution_duration_periodic_kappa():
    psi = Exp(1.0)
    g = TimeGrid(0.0, 2 * math.pi, 0.0, 2 * math.pi, 9, 9)
    d = ea_duration_e8(psi, Recip(Product((Const(2.0), psi))), Sin(), g)
    spec = make_flow("E8", psi=psi, kappa11=Recip(Product((Const(2.0), psi))), kappa21=Sin())
    assert d.agrees_with(scan_property(spec, "EvolutionAlgebra", g))
    rows = {round(s / math.pi, 6) for s, _ in d.true_cells()}
    assert rows == {0.0, 1.0, 2.0}


def test_split_durations_agree_with_generic():
    fam = CANON["TA"].params["afamily"]
    g = TimeGrid(0.0, 2.0, 0.0, 2.0, 10, 10)
    for w in ((0.5, 0.5), (0.2, 0.8)):
        for spec in (make_flow_tA(fam, w), make_flow_tE(fam, w)):
            a = split_associativity_duration(spec, g)
            assert a.agrees_with(scan_property(spec, "Associative", g))
            assert a.n_true == 10          # exactly the diagonal s = t
            c = split_commutativity_duration(spec, g)
            assert c.agrees_with(scan_property(spec, "Commutative", g))


def test_symmetric_split_is_commutative():
    # beta_ijk = w_j a_ik + delta_ijk symmetric in (i, j) for a diagonal family
    fam = AFamilySpec(((Exp(1.0), Const(0.0)), (Const(0.0), Exp(1.0))))
    delta = np.zeros((2, 2, 2))
    # w = (1/2, 1/2): beta_0jk = a_0k/2, beta_1jk = a_1k/2; symmetrize via delta
    delta[0, 1, 1], delta[0, 0, 1] = 0.5, -0.5
    delta[1, 0, 0], delta[1, 1, 0] = 0.5, -0.5
    spec = make_flow_tA(fam, (0.5, 0.5), delta)
    g = TimeGrid(0.0, 1.0, 0.0, 1.0, 4, 4)
    # at s = 0 the diagonal entries equal 1 and the table is symmetric
    d = split_commutativity_duration(spec, g)
    assert d.agrees_with(scan_property(spec, "Commutative", g))
    assert {s for s, _ in d.true_cells()} == {0.0}


# --------------------------------------------------------------------------
# limits, homogeneity, periodicity
# --------------------------------------------------------------------------


def test_limits():
    M = limit_algebra(CANON["E2"], 0.0, 64, 1e-5)
    assert np.allclose(M[:, :, 0], 0, atol=1e-6) and np.allclose(M[:, :, 1], 1, atol=1e-6)
    M = limit_algebra(make_flow("E4", epsilon=0.25, x1=0.2, x2=0.3), 0.0, 64, 1e-5)
    assert np.allclose(M[:, :, 2], 1, atol=1e-6)
    assert limit_algebra(CANON["E9"], 0.0, 64, 1e-5) is None
    res = limit_search(CANON["E3"], 0.0, 64, 1e-5)
    assert res.deltas == (1, 2, 4, 8, 16, 32, 64)
    assert np.allclose(res.limit[:, :, 1], 1, atol=1e-6)
    assert sup_bound(res)


def sup_bound(res):
    return res.distances[-1] <= 2 * res.tol


def test_limit_preconditions():
    with pytest.raises(ValueError):
        limit_algebra(CANON["E2"], 1.0, 3.0)
    # a strict tolerance is not met at this horizon
    assert limit_algebra(CANON["E2"], 0.0, 64, 1e-9) is None


def test_constant_flow_limit():
    spec = make_flow_tA(AFamilySpec.identity(2), (0.5, 0.5))
    M = limit_algebra(spec, 0.0, 8, 1e-12)
    assert np.array_equal(M, eval_flow(spec, 0, 0))


def test_homogeneous_and_periodic():
    g = TimeGrid(0.0, 3.0, 0.0, 5.0, 7, 7)
    assert detect_homogeneous(CANON["E9"], g)
    assert detect_periodic(CANON["E9"], g) == 2 * math.pi
    assert detect_periodic(CANON["E9"], g, candidates=[1.0, 4 * math.pi]) == 4 * math.pi
    spec = make_flow("E8", psi=Exp(1.0), kappa11=Poly((0.1, 0.3)), kappa21=Sin())
    assert not detect_homogeneous(spec, g)
    assert detect_periodic(spec, g) is None
    const = make_flow_tA(AFamilySpec.identity(2), (0.5, 0.5))
    assert detect_periodic(const, g, candidates=[0.3]) == 0.3
    assert detect_homogeneous(const, g)


def test_e8_homogeneity_direct_pairs():
    spec = make_flow("E8", psi=Exp(1.0), kappa11=Poly((0.1, 0.3)), kappa21=Const(0.2))
    assert np.max(np.abs(eval_flow(spec, 0, 1) - eval_flow(spec, 1, 2))) > 1e-3


# --------------------------------------------------------------------------
# density
# --------------------------------------------------------------------------


def test_density_oracle():
    n = next(k for k in range(1, 1001) if abs(math.sin(k)) < 1e-4)
    assert density_search(0.0, 1e-4, 1000) == n == 355
    assert density_search(math.sin(1.0), 1e-12, 10) == 1
    assert density_search(1.0, 0.01, 10**5) is not None
    assert density_search(0.0, 1e-9, 1000) is None
    with pytest.raises(ValueError):
        density_search(1.5, 0.1, 10)
    with pytest.raises(ValueError):
        density_search(0.5, 0.0, 10)


def test_density_witness_bound():
    w = density_witness(0.3, 0.01, 10**5, CANON["E9"])
    assert w.sin_error < 0.01
    assert w.matrix_distance <= w.bound_constant * max(w.sin_error, w.cos_error) + 1e-15
    assert w.bound_constant == pytest.approx(2.2)
    with pytest.raises(ValueError):
        density_witness(0.3, 0.01, 100, CANON["E8"])


# --------------------------------------------------------------------------
# closure sweep
# --------------------------------------------------------------------------


@pytest.mark.parametrize("kind", list(StochasticityKind))
def test_samplers_produce_the_kind(kind):
    from algflow.analysis import _random_stochastic

    rng = np.random.default_rng(0)
    for m in (1, 2, 3):
        for _ in range(20):
            assert check_stochastic(_random_stochastic(rng, kind, m), kind)


def test_closure_known_cases():
    r = stochasticity_closure_sweep("K", "C", 200, seed=1)
    assert r.fraction == 1.0 and r.witness is None
    r = stochasticity_closure_sweep("K", "D", 200, seed=1, m=2)
    assert r.fraction < 1.0
    A, B = r.witness
    assert not check_stochastic(oracles.mul_d(A, B), "K")
    for kind in StochasticityKind:
        for rule in "CDE":
            assert stochasticity_closure_sweep(kind, rule, 20, seed=2, m=1).fraction == 1.0


def test_closure_reproducible():
    a = stochasticity_closure_sweep("Pair13", "E", 50, seed=7).to_json()
    b = stochasticity_closure_sweep("Pair13", "E", 50, seed=7).to_json()
    assert a == b
    with pytest.raises(ValueError):
        stochasticity_closure_sweep("K", "C", 0)
