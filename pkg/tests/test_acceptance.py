"""Acceptance suite: one group of tests per criterion, at the stated tolerances.

A summary line per criterion is printed at the end of the run.
"""
import json
import math

import numpy as np
import pytest

import oracles
from algflow.analysis import (
    TimeGrid,
    density_search,
    ea_duration_e8,
    limit_algebra,
    scan_property,
    split_associativity_duration,
)
from algflow.cli import main
from algflow.cubic import check_algebra_property, collapse, layer, mul_c, mul_d, mul_e, multiply
from algflow.families import (
    admissible_triples,
    canonical_flows,
    kc_residual,
    make_flow,
    make_flow_tA,
    qsp_residual_A,
    qsp_residual_B,
    trajectory,
)
from algflow.functions import Const, Exp, Product, Recip

CANON = canonical_flows()
criterion = pytest.mark.criterion


# -- 1 ----------------------------------------------------------------------


@criterion(1)
def test_c1_products_match_loop_oracles():
    rng = np.random.default_rng(101)
    pairs = {"C": (mul_c, oracles.mul_c), "D": (mul_d, oracles.mul_d), "E": (mul_e, oracles.mul_e)}
    for _ in range(100):
        m = int(rng.integers(2, 4))
        A, B = rng.normal(size=(2, m, m, m))
        for fast, slow in pairs.values():
            want = slow(A, B)
            scale = slow(np.abs(A), np.abs(B))     # sum of |terms| per entry
            assert np.all(np.abs(fast(A, B) - want) <= 1e-14 * scale + 1e-300)


@criterion(1)
def test_c1_products_associative():
    rng = np.random.default_rng(102)
    for _ in range(100):
        m = int(rng.integers(2, 4))
        A, B, C = rng.normal(size=(3, m, m, m))
        for rule in "CDE":
            lhs = multiply(multiply(A, B, rule), C, rule)
            rhs = multiply(A, multiply(B, C, rule), rule)
            assert np.max(np.abs(lhs - rhs)) <= 1e-10


# -- 2 ----------------------------------------------------------------------


@criterion(2)
def test_c2_reduction_homomorphisms():
    rng = np.random.default_rng(103)
    for _ in range(100):
        m = int(rng.integers(2, 4))
        A, B = rng.normal(size=(2, m, m, m))
        for j in range(m):
            assert np.max(np.abs(layer(mul_c(A, B), j) - layer(A, j) @ layer(B, j))) <= 1e-12
        assert np.max(np.abs(collapse(mul_d(A, B)) - collapse(A) @ collapse(B))) <= 1e-12
        assert np.max(np.abs(collapse(mul_e(A, B)) - collapse(A) @ collapse(B))) <= 1e-12


# -- 3 ----------------------------------------------------------------------


@criterion(3)
@pytest.mark.parametrize("name", sorted(CANON, key=lambda k: (len(k), k)))
def test_c3_kc_residuals(name):
    spec = CANON[name]
    worst = max(kc_residual(spec, *tr) for tr in admissible_triples(spec, 100, seed=0))
    assert worst <= 1e-9, f"{name} under rule {spec.rule}: max residual {worst:.3e}"


# -- 4 ----------------------------------------------------------------------


def _maxima(name):
    spec = CANON[name]
    triples = admissible_triples(spec, 100, seed=0)
    return (
        max(qsp_residual_A(spec, None, *tr) for tr in triples),
        max(qsp_residual_B(spec, None, *tr) for tr in triples),
    )


@criterion(4)
@pytest.mark.parametrize("name", ["E2", "E3"])
def test_c4_both_types(name):
    a, b = _maxima(name)
    assert a <= 1e-9 and b <= 1e-9


@criterion(4)
def test_c4_e4_type_a_only():
    a, b = _maxima("E4")
    assert b > 1e-6, f"type-B witness {b:.3e}"
    assert a <= 1e-9, f"type-A max residual {a:.3e}"


@criterion(4)
def test_c4_e5_type_b_only():
    a, b = _maxima("E5")
    assert b <= 1e-9, f"type-B max residual {b:.3e}"
    assert a > 1e-6, f"type-A witness {a:.3e}"


# -- 5 ----------------------------------------------------------------------


@criterion(5)
@pytest.mark.parametrize("eps", [0.0, 0.25, 0.5])
def test_c5_trajectories(eps):
    for x in (0.3, 0.8, 1.0):
        e2 = make_flow("E2", epsilon=eps, x=x)
        e3 = make_flow("E3", epsilon=eps, x=x)
        for t in range(1, 11):
            assert abs(trajectory(e2, None, t)[0] - (1 - 2 * eps) ** t * x) <= 1e-12
            assert abs(trajectory(e3, None, t)[0] - eps**t * x / (t + 1)) <= 1e-12


# -- 6 ----------------------------------------------------------------------

LIMIT_TOL = 1e-5


@criterion(6)
def test_c6_limits():
    M = limit_algebra(make_flow("E2", epsilon=0.25, x=0.5), 0.0, 64, LIMIT_TOL)
    assert M is not None
    assert np.max(np.abs(M[:, :, 1] - 1)) <= 1e-6 and np.max(np.abs(M[:, :, 0])) <= 1e-6
    M = limit_algebra(make_flow("E4", epsilon=0.25, x1=0.3, x2=0.3), 0.0, 64, LIMIT_TOL)
    assert M is not None
    assert np.max(np.abs(M[:, :, 2] - 1)) <= 1e-6
    assert limit_algebra(CANON["E9"], 0.0, 64, LIMIT_TOL) is None


# -- 7 ----------------------------------------------------------------------

GRID20 = TimeGrid(0.0, 5.0, 0.0, 8.0, 20, 20)
QGRID20 = TimeGrid(0.0, 5.0, 0.0, 8.0, 20, 20, require_gap=True)


@criterion(7)
@pytest.mark.parametrize("name", ["E2", "E3", "E4", "E5", "E6"])
def test_c7_baric_qsp(name):
    assert scan_property(CANON[name], "Baric", QGRID20).all_true()


@criterion(7)
@pytest.mark.parametrize("name", ["E8", "E9", "E10", "TA", "TE"])
def test_c7_not_baric(name):
    assert CANON[name].dim == 2
    assert scan_property(CANON[name], "Baric", GRID20).all_false()


# -- 8 ----------------------------------------------------------------------


@criterion(8)
def test_c8_e9_commutativity_branches():
    yes = make_flow("E9", a=0.2, b=-0.4, c=0.8, d=0.4)      # a = 1 - c, b = -d
    assert scan_property(yes, "Commutative", GRID20).all_true()
    for spec in (CANON["E9"], make_flow("E9", a=0.2, b=-0.4, c=0.7, d=0.4)):
        assert scan_property(spec, "Commutative", GRID20).all_false()


@criterion(8)
def test_c8_rotation_pair():
    step = 0.01
    grid = TimeGrid(0.0, 2.0, 0.0, 10.0, 5, 1001)
    d = scan_property(CANON["E7"], "Commutative", grid, tol=step)
    assert d.n_true > 0
    for s, t in d.true_cells():
        h = t - s - 0.75 * math.pi
        assert abs(h - math.pi * round(h / math.pi)) <= step


# -- 9 ----------------------------------------------------------------------


@criterion(9)
@pytest.mark.parametrize("name", ["E2", "E3", "E4", "E5", "E6"])
def test_c9_qsp_never_evolution(name):
    assert scan_property(CANON[name], "EvolutionAlgebra", QGRID20).all_false()


@criterion(9)
def test_c9_e8_duration():
    psi = Exp(1.0)
    k11 = Recip(Product((Const(2.0), psi)))
    d = ea_duration_e8(psi, k11, Const(0.0), GRID20)
    assert d.all_true()
    generic = scan_property(make_flow("E8", psi=psi, kappa11=k11, kappa21=0.0), "EvolutionAlgebra", GRID20)
    assert d.agrees_with(generic)


# -- 10 ---------------------------------------------------------------------


@criterion(10)
@pytest.mark.parametrize("weights", [(0.5, 0.5), (0.2, 0.8)])
def test_c10_generic_vs_split(weights):
    spec = make_flow_tA(CANON["TA"].params["afamily"], weights)
    grid = TimeGrid(0.0, 2.0, 0.0, 2.0, 10, 10)
    special = split_associativity_duration(spec, grid)
    assert special.agrees_with(scan_property(spec, "Associative", grid))
    assert 0 < special.n_true < special.n_cells


@criterion(10)
def test_c10_one_dimensional():
    rng = np.random.default_rng(104)
    for v in rng.normal(scale=100.0, size=100):
        assert check_algebra_property(np.full((1, 1, 1), v), "Associative")


# -- 11 ---------------------------------------------------------------------


@criterion(11)
def test_c11_density():
    assert density_search(0.0, 1e-4, 1000) == 355
    for target in np.linspace(-1.0, 1.0, 20):
        n = density_search(float(target), 0.01, 10**5)
        assert n is not None and abs(math.sin(n) - target) < 0.01


# -- 12 ---------------------------------------------------------------------

_PSI = {"psi": {"fn": "exp", "rate": 1.0}, "kappa11": {"fn": "const", "value": 0.1}, "kappa21": {"fn": "const", "value": 0.2}}
COMMANDS = {
    "verify": {"family": "E8", "params": _PSI, "triples": 40},
    "scan": {"family": "E7", "params": {"first": {"kind": "rotation"}, "second": {"kind": "rotation", "transpose": True}},
             "property": "Commutative", "grid": "0,2,0,10,10,60", "tol": 0.05},
    "limit": {"family": "E2", "params": {"epsilon": 0.25, "x": 0.5}},
    "density": {"family": "E9", "params": {"a": 0.2, "b": -0.4, "c": 0.8, "d": 1.4}, "target": 0.3, "n_max": 100000, "tol": 0.001},
    "qsp-check": {"family": "E3", "params": {"epsilon": 0.5, "x": 0.5}, "triples": 40},
    "sweep": {"kind": "Pair23", "rule": "E", "trials": 300, "m": 3},
}


@criterion(12)
@pytest.mark.parametrize("command", sorted(COMMANDS))
def test_c12_artifacts_byte_identical(command, tmp_path, monkeypatch, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps(COMMANDS[command]))
    blobs = []
    for n, threads in enumerate(["1", "1", "4"]):
        monkeypatch.setenv("ALGFLOW_THREADS", threads)
        out = tmp_path / f"out{n}"
        code = main([command, "--config", str(cfg), "--seed", "5", "--out", str(out)])
        capsys.readouterr()
        assert code in (0, 1)
        blobs.append(out.read_bytes())
    assert blobs[0] == blobs[1] == blobs[2]
