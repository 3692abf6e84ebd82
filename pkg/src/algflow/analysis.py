"""Time-dependent behaviour of algebraic properties along a flow.

The algebra of a flow changes with the time pair ``(s, t)``.  The tools here
rasterize where a property holds over a grid of the triangle ``0 <= s <= t``
(a *property diagram*), look for limit algebras as ``t - s`` grows, test
homogeneity and periodicity, search integer times approximating a target
phase of the periodic rotation family, and probe which stochasticity kinds
survive which products.
"""
from __future__ import annotations

import io
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .cubic import (
    AlgebraProperty,
    StochasticityKind,
    check_algebra_property,
    check_stochastic,
    cubic_to_json,
    multiply,
    sup_distance,
)
from .families import (
    GAP_SLACK,
    FlowDomainError,
    FlowSpec,
    SingularFlowError,
    eval_flow,
    make_flow,
    ta_beta,
    te_gamma,
)
from .functions import DescriptorError, FunctionDescriptor

__all__ = [
    "ClosureReport",
    "DensityWitness",
    "LimitSearch",
    "PropertyDiagram",
    "TimeGrid",
    "density_search",
    "density_witness",
    "detect_homogeneous",
    "detect_periodic",
    "ea_duration_e8",
    "limit_algebra",
    "limit_search",
    "scan_property",
    "split_associativity_duration",
    "split_commutativity_duration",
    "stochasticity_closure_sweep",
]

HOLDS, FAILS, UNDEFINED = 1, 0, -1
_EVAL_ERRORS = (FlowDomainError, SingularFlowError, DescriptorError)


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _map(fn: Callable, items: Sequence, workers: int | None) -> list:
    if not workers or workers <= 1 or len(items) < 2:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


# --------------------------------------------------------------------------
# grids and diagrams
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class TimeGrid:
    """Rectangular grid of ``(s, t)`` pairs clipped to ``s <= t``.

    With ``require_gap`` only cells with ``t - s >= 1`` are admissible, which
    is what quadratic stochastic processes need.
    """

    s_min: float
    s_max: float
    t_min: float
    t_max: float
    n_s: int
    n_t: int
    require_gap: bool = False

    def __post_init__(self):
        if self.n_s < 1 or self.n_t < 1:
            raise ValueError("grid needs at least one point per axis")
        if self.s_min < 0 or self.s_min > self.s_max or self.t_min > self.t_max:
            raise ValueError("grid needs 0 <= s_min <= s_max and t_min <= t_max")

    @classmethod
    def parse(cls, text: str, require_gap: bool = False) -> "TimeGrid":
        """Parse ``"s0,s1,t0,t1,ns,nt"``."""
        parts = [p.strip() for p in str(text).split(",")]
        if len(parts) != 6:
            raise ValueError(f"grid needs six comma-separated values, got {text!r}")
        s0, s1, t0, t1 = (float(p) for p in parts[:4])
        return cls(s0, s1, t0, t1, int(parts[4]), int(parts[5]), require_gap)

    @property
    def s_values(self) -> np.ndarray:
        return np.linspace(self.s_min, self.s_max, self.n_s)

    @property
    def t_values(self) -> np.ndarray:
        return np.linspace(self.t_min, self.t_max, self.n_t)

    @property
    def admissible(self) -> np.ndarray:
        s = self.s_values[:, None]
        t = self.t_values[None, :]
        mask = t >= s
        if self.require_gap:
            mask &= (t - s) >= 1.0 - GAP_SLACK
        return mask

    def cells(self) -> list[tuple[int, int, float, float]]:
        """Admissible cells as ``(i_s, i_t, s, t)`` in s-outer, t-inner order."""
        sv, tv, mask = self.s_values, self.t_values, self.admissible
        return [
            (a, b, float(sv[a]), float(tv[b]))
            for a in range(self.n_s)
            for b in range(self.n_t)
            if mask[a, b]
        ]

    def to_json(self) -> dict:
        return {
            "s_min": self.s_min, "s_max": self.s_max,
            "t_min": self.t_min, "t_max": self.t_max,
            "n_s": self.n_s, "n_t": self.n_t,
            "require_gap": self.require_gap,
        }


@dataclass(frozen=True, eq=False)
class PropertyDiagram:
    """Raster of where a property holds.

    ``holds[i_s, i_t]`` is 1 (holds), 0 (fails) or -1 (the flow could not be
    evaluated there); entries outside ``grid.admissible`` carry no meaning.
    """

    grid: TimeGrid
    prop: str
    tol: float
    holds: np.ndarray = field(repr=False)

    def _values(self) -> np.ndarray:
        return self.holds[self.grid.admissible]

    @property
    def n_cells(self) -> int:
        return int(self.grid.admissible.sum())

    @property
    def n_true(self) -> int:
        return int(np.sum(self._values() == HOLDS))

    @property
    def n_false(self) -> int:
        return int(np.sum(self._values() == FAILS))

    @property
    def n_undefined(self) -> int:
        return int(np.sum(self._values() == UNDEFINED))

    def all_true(self) -> bool:
        return self.n_cells > 0 and self.n_true == self.n_cells

    def all_false(self) -> bool:
        return self.n_cells > 0 and self.n_false == self.n_cells

    def true_cells(self) -> list[tuple[float, float]]:
        return [(s, t) for a, b, s, t in self.grid.cells() if self.holds[a, b] == HOLDS]

    def agrees_with(self, other: "PropertyDiagram") -> bool:
        mask = self.grid.admissible
        return self.grid == other.grid and np.array_equal(self.holds[mask], other.holds[mask])

    def to_csv(self) -> str:
        """``s,t,holds`` rows in s-outer, t-inner order; ``holds`` is 0, 1 or ``undefined``."""
        buf = io.StringIO()
        buf.write("s,t,holds\n")
        for a, b, s, t in self.grid.cells():
            v = self.holds[a, b]
            buf.write(f"{_fmt(s)},{_fmt(t)},{'undefined' if v == UNDEFINED else int(v)}\n")
        return buf.getvalue()

    def to_json(self) -> dict:
        return {
            "property": self.prop,
            "tol": self.tol,
            "grid": self.grid.to_json(),
            "counts": {"true": self.n_true, "false": self.n_false, "undefined": self.n_undefined},
            "cells": [
                [s, t, None if self.holds[a, b] == UNDEFINED else int(self.holds[a, b])]
                for a, b, s, t in self.grid.cells()
            ],
        }


def _predicate(prop) -> tuple[str, Callable[[np.ndarray, float], bool]]:
    if isinstance(prop, AlgebraProperty):
        return prop.value, lambda M, tol: check_algebra_property(M, prop, tol)
    if isinstance(prop, StochasticityKind):
        return prop.value, lambda M, tol: check_stochastic(M, prop, tol)
    try:
        return _predicate(AlgebraProperty(prop))
    except ValueError:
        pass
    try:
        return _predicate(StochasticityKind(prop))
    except ValueError:
        names = [p.value for p in AlgebraProperty] + [k.value for k in StochasticityKind]
        raise ValueError(f"unknown property {prop!r}; expected one of {names}") from None


def _raster(grid: TimeGrid, cell_fn: Callable[[float, float], bool], workers: int | None) -> np.ndarray:
    cells = grid.cells()

    def run(cell):
        _, _, s, t = cell
        try:
            return HOLDS if cell_fn(s, t) else FAILS
        except _EVAL_ERRORS:
            return UNDEFINED

    values = _map(run, cells, workers)
    holds = np.full((grid.n_s, grid.n_t), FAILS, dtype=np.int8)
    for (a, b, _, _), v in zip(cells, values):
        holds[a, b] = v
    return holds


def _check_grid(spec: FlowSpec, grid: TimeGrid) -> None:
    if spec.qsp and not grid.require_gap:
        raise ValueError("QSP flows need a grid with require_gap=True (t - s >= 1)")


def scan_property(spec: FlowSpec, prop, grid: TimeGrid, tol: float = 1e-9, workers: int | None = None) -> PropertyDiagram:
    """Evaluate a property predicate on every admissible grid cell.

    ``prop`` is an :class:`AlgebraProperty` or a :class:`StochasticityKind`
    (or the name of one).  Cells where the flow cannot be evaluated are
    recorded as undefined.  ``workers`` > 1 evaluates cells on a thread pool;
    the result does not depend on it.
    """
    _check_grid(spec, grid)
    name, pred = _predicate(prop)
    holds = _raster(grid, lambda s, t: pred(eval_flow(spec, s, t), tol), workers)
    return PropertyDiagram(grid, name, tol, holds)


# --------------------------------------------------------------------------
# limits, homogeneity, periodicity
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class LimitSearch:
    s0: float
    deltas: tuple[float, ...]
    distances: tuple[float, ...]
    tol: float
    limit: np.ndarray | None = field(repr=False)

    def to_json(self) -> dict:
        return {
            "s0": self.s0,
            "deltas": list(self.deltas),
            "distances": list(self.distances),
            "tol": self.tol,
            "metric": "entrywise sup-distance",
            "limit": None if self.limit is None else cubic_to_json(self.limit),
        }


def limit_search(spec: FlowSpec, s0: float, horizon: float, tol: float = 1e-9) -> LimitSearch:
    """Follow ``M[s0, s0 + d]`` for ``d = 1, 2, 4, ... <= horizon``.

    A limit is declared when the last two successive sup-distances are both
    below ``tol``; it is the matrix at the largest ``d``.
    """
    if horizon <= s0 + 2:
        raise ValueError("horizon must exceed s0 + 2")
    deltas, mats = [], []
    d = 1.0
    while d <= horizon:
        deltas.append(d)
        mats.append(eval_flow(spec, s0, s0 + d))
        d *= 2.0
    dists = tuple(sup_distance(a, b) for a, b in zip(mats, mats[1:]))
    converged = len(dists) >= 2 and dists[-1] < tol and dists[-2] < tol
    return LimitSearch(float(s0), tuple(deltas), dists, tol, mats[-1] if converged else None)


def limit_algebra(spec: FlowSpec, s0: float = 0.0, horizon: float = 64.0, tol: float = 1e-9) -> np.ndarray | None:
    """Structural constants of the limit algebra as ``t - s`` grows, or ``None``."""
    return limit_search(spec, s0, horizon, tol).limit


def detect_homogeneous(spec: FlowSpec, grid: TimeGrid, tol: float = 1e-9) -> bool:
    """Whether ``M[s, t]`` depends on ``t - s`` only.

    Every admissible cell is compared with the pair of equal gap starting at
    ``grid.s_min``.  Cells that cannot be evaluated are skipped.
    """
    _check_grid(spec, grid)
    s_ref = grid.s_min
    worst = 0.0
    for _, _, s, t in grid.cells():
        try:
            d = sup_distance(eval_flow(spec, s, t), eval_flow(spec, s_ref, s_ref + (t - s)))
        except _EVAL_ERRORS:
            continue
        worst = max(worst, d)
    return worst <= tol


def detect_periodic(spec: FlowSpec, grid: TimeGrid, candidates: Iterable[float] = (), tol: float = 1e-9) -> float | None:
    """First nonzero period ``P`` (user candidates, then pi and 2 pi) with
    ``M[s, t + P] = M[s, t]`` on every admissible grid cell."""
    _check_grid(spec, grid)
    seen = []
    for p in list(candidates) + [math.pi, 2 * math.pi]:
        p = float(p)
        if p == 0 or p in seen:
            continue
        seen.append(p)
        ok = True
        for _, _, s, t in grid.cells():
            if t + p < s:
                continue
            try:
                d = sup_distance(eval_flow(spec, s, t + p), eval_flow(spec, s, t))
            except _EVAL_ERRORS:
                continue
            if d > tol:
                ok = False
                break
        if ok:
            return p
    return None


# --------------------------------------------------------------------------
# density of integer times for the periodic family
# --------------------------------------------------------------------------


def density_search(target: float, tol: float, n_max: int) -> int | None:
    """Smallest integer ``1 <= n <= n_max`` with ``|sin(n) - target| < tol``."""
    if not -1.0 <= target <= 1.0:
        raise ValueError("target must lie in [-1, 1]")
    if tol <= 0:
        raise ValueError("tol must be positive")
    chunk = 1 << 16
    for start in range(1, int(n_max) + 1, chunk):
        n = np.arange(start, min(start + chunk, int(n_max) + 1), dtype=np.float64)
        hit = np.flatnonzero(np.abs(np.sin(n) - target) < tol)
        if hit.size:
            return int(n[hit[0]])
    return None


@dataclass(frozen=True)
class DensityWitness:
    target: float
    tol: float
    n: int | None
    sin_error: float | None
    cos_error: float | None = None
    matrix_distance: float | None = None
    bound_constant: float | None = None

    def to_json(self) -> dict:
        return dict(self.__dict__)


def density_witness(target: float, tol: float, n_max: int, spec: FlowSpec | None = None) -> DensityWitness:
    """:func:`density_search` plus, for a rotation-family spec, how close
    ``M[n]`` is to the algebra with ``sin = target``.

    The reference algebra takes ``cos = sign(cos n) * sqrt(1 - target**2)``.
    Entries are ``alpha cos + beta sin``, so the matrix distance is at most
    ``bound_constant * max(sin_error, cos_error)``.
    """
    n = density_search(target, tol, n_max)
    if n is None:
        return DensityWitness(target, tol, None, None)
    sin_err = abs(math.sin(n) - target)
    if spec is None:
        return DensityWitness(target, tol, n, sin_err)
    if spec.family != "E9":
        raise ValueError("matrix distances are only defined for the E9 family")
    p = spec.params
    a, b, c, d = p["a"], p["b"], p["c"], p["d"]
    cos_ref = math.copysign(math.sqrt(max(0.0, 1.0 - target * target)), math.cos(n))
    ref = _e9_at(a, b, c, d, cos_ref, target)
    dist = sup_distance(eval_flow(spec, 0.0, float(n)), ref)
    C = max(abs(a) + abs(b), abs(1 - a) + abs(b), abs(c) + abs(d), abs(c) + abs(1 - d))
    return DensityWitness(target, tol, n, sin_err, abs(math.cos(n) - cos_ref), dist, C)


def _e9_at(a, b, c, d, co, si) -> np.ndarray:
    M = np.empty((2, 2, 2))
    M[0, 0] = (a * co - b * si, b * co + a * si)
    M[0, 1] = ((1 - a) * co + b * si, -b * co + (1 - a) * si)
    M[1, 0] = (c * co - d * si, d * co + c * si)
    M[1, 1] = (-c * co - (1 - d) * si, (1 - d) * co - c * si)
    return M


# --------------------------------------------------------------------------
# closure of stochasticity under products
# --------------------------------------------------------------------------


def _random_stochastic(rng: np.random.Generator, kind: StochasticityKind, m: int) -> np.ndarray:
    if kind is StochasticityKind.K:
        return rng.dirichlet(np.ones(m), size=(m, m))
    if kind is StochasticityKind.TWICE:
        # 1/m^2 plus a scaled doubly-centred perturbation keeps all row sums
        # (over (j,k)) at 1 and column sums (over i) at 1/m
        R = rng.uniform(-1.0, 1.0, size=(m, m * m))
        E = R - R.mean(axis=1, keepdims=True) - R.mean(axis=0, keepdims=True) + R.mean()
        scale = np.max(np.abs(E))
        alpha = 0.0 if scale == 0 else rng.uniform(0.1, 0.99) / (m * m * scale)
        return (1.0 / (m * m) + alpha * E).reshape(m, m, m)
    D = rng.dirichlet(np.ones(m * m), size=m).reshape(m, m, m)
    if kind is StochasticityKind.PAIR12:
        return D.transpose(1, 2, 0)      # D[k, i, j] -> P[i, j, k]
    if kind is StochasticityKind.PAIR13:
        return D.transpose(1, 0, 2)      # D[j, i, k] -> P[i, j, k]
    return D                             # D[i, j, k]


@dataclass(frozen=True, eq=False)
class ClosureReport:
    kind: str
    rule: str
    m: int
    trials: int
    seed: int
    tol: float
    fraction: float
    witness: tuple[np.ndarray, np.ndarray] | None = field(repr=False)

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "rule": self.rule,
            "m": self.m,
            "trials": self.trials,
            "seed": self.seed,
            "tol": self.tol,
            "generator": "numpy PCG64 via default_rng(seed)",
            "fraction": self.fraction,
            "witness": None if self.witness is None else [cubic_to_json(w) for w in self.witness],
        }


def stochasticity_closure_sweep(kind, rule: str, trials: int, seed: int = 0, m: int = 2, tol: float = 1e-9) -> ClosureReport:
    """Fraction of products of random ``kind``-stochastic pairs that stay ``kind``-stochastic.

    ``trials`` pairs are drawn with ``numpy.random.default_rng(seed)``; the
    first failing pair is kept as a witness.
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    if m < 1:
        raise ValueError("m must be at least 1")
    kind = StochasticityKind(kind)
    rng = np.random.default_rng(seed)
    kept, witness = 0, None
    for _ in range(trials):
        A = _random_stochastic(rng, kind, m)
        B = _random_stochastic(rng, kind, m)
        if check_stochastic(multiply(A, B, rule), kind, tol):
            kept += 1
        elif witness is None:
            witness = (A, B)
    return ClosureReport(kind.value, str(rule).upper(), m, trials, int(seed), tol, kept / trials, witness)


# --------------------------------------------------------------------------
# family-specific durations
# --------------------------------------------------------------------------


def ea_duration_e8(
    psi: FunctionDescriptor,
    kappa11: FunctionDescriptor,
    kappa21: FunctionDescriptor,
    grid: TimeGrid,
    tol: float = 1e-9,
    workers: int | None = None,
) -> PropertyDiagram:
    """Evolution-algebra duration of the Psi-kappa family: ``kappa21(s) = 0``
    and ``1 / (2 Psi(s)) - kappa11(s) = 0`` within ``tol``.

    The raster is compared with a generic :func:`scan_property`; a
    disagreement raises a :class:`RuntimeWarning`.
    """
    spec = make_flow("E8", psi=psi, kappa11=kappa11, kappa21=kappa21)

    def cell(s, t):
        ps = psi(s)
        if abs(ps) <= 1e-12:
            raise SingularFlowError(f"psi vanishes at s={s!r}")
        return abs(kappa21(s)) <= tol and abs(0.5 / ps - kappa11(s)) <= tol

    diagram = PropertyDiagram(grid, "EvolutionAlgebra", tol, _raster(grid, cell, workers))
    generic = scan_property(spec, AlgebraProperty.EVOLUTION, grid, tol, workers)
    if not diagram.agrees_with(generic):
        mask = grid.admissible
        n = int(np.sum(diagram.holds[mask] != generic.holds[mask]))
        warnings.warn(f"EA duration disagrees with the generic scan on {n} cells", RuntimeWarning, stacklevel=2)
    return diagram


def _split_tables(spec: FlowSpec, s: float, t: float):
    fam = spec.params["afamily"]
    if spec.family == "TA":
        return ta_beta(spec, s), fam.inverse(t)
    if spec.family == "TE":
        return fam.matrix(s), te_gamma(spec, t)
    raise ValueError("split durations need a TA or TE flow")


def split_commutativity_duration(spec: FlowSpec, grid: TimeGrid, tol: float = 1e-9, workers: int | None = None) -> PropertyDiagram:
    """Cells where ``beta(s)`` (TA) or ``gamma(t)`` (TE) is symmetric in its first two indices."""

    def cell(s, t):
        if s > t:
            raise FlowDomainError("s > t")
        table = _split_tables(spec, s, t)[0 if spec.family == "TA" else 1]
        return float(np.max(np.abs(table - table.transpose(1, 0, 2)))) <= tol

    return PropertyDiagram(grid, "Commutative", tol, _raster(grid, cell, workers))


def split_associativity_duration(spec: FlowSpec, grid: TimeGrid, tol: float = 1e-9, workers: int | None = None) -> PropertyDiagram:
    """Cells where the split-coefficient associativity condition vanishes.

    TA: ``sum_{p,r} (beta_ijp beta_rkq - beta_irq beta_jkp) b_pr(t) = 0``.
    TE: ``sum_{r,q} (a_rq(s) gamma_pjr gamma_qkl - a_jq(s) gamma_prl gamma_qkr) = 0``.
    """

    def cell(s, t):
        if s > t:
            raise FlowDomainError("s > t")
        if spec.family == "TA":
            beta, b = _split_tables(spec, s, t)
            X = np.einsum("ijp,rkq,pr->ijkq", beta, beta, b) - np.einsum("irq,jkp,pr->ijkq", beta, beta, b)
        else:
            a, gamma = _split_tables(spec, s, t)
            X = np.einsum("rq,pjr,qkl->pjkl", a, gamma, gamma) - np.einsum("jq,prl,qkr->pjkl", a, gamma, gamma)
        return float(np.max(np.abs(X))) <= tol

    return PropertyDiagram(grid, "Associative", tol, _raster(grid, cell, workers))
