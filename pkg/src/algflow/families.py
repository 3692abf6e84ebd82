r"""
Two-time flows of algebras
==========================

A flow is a family ``(s, t) -> M[s, t]`` of cubic matrices, ``0 <= s <= t``,
obeying the Kolmogorov-Chapman (KC) equation

    M[s, t] = M[s, tau] * M[tau, t]     for all s < tau < t

under a fixed product (rule C, D or E from :mod:`algflow.cubic`).  Flows built
from quadratic stochastic processes (QSPs) instead obey one of two quadratic
analogues, type A or type B, which involve the population trajectory
``x(t)``; their :attr:`FlowSpec.rule` is then ``"A"`` or ``"B"``.

Built-in families are addressed by short tags used in JSON configs:

====== ======================================================== ==== ====
tag    matrix                                                   rule qsp
====== ======================================================== ==== ====
E2     two-type QSP, ``x1(t) = (1-2 eps)^t x``                  A    yes
E3     two-type QSP, ``x1(t) = eps^t x / (t+1)``                A    yes
E4     three-type QSP, state term taken at ``t+1``              A    yes
E5     three-type QSP, state term taken at ``t``                B    yes
E6     ``P_ijk = a_k(t)`` for a stochastic vector ``a(t)``      C    yes
E7     two square KC solutions stacked as middle layers         C    no
E8     ``Psi(t) * kappa(s)`` family with rotation-free collapse D    no
E9     periodic, homogeneous family with rotation collapse     D    no
E10    ``gamma(t) / Psi(s)`` family                             E    no
TA     ``sum_k beta_ijk(s) b_kr(t)`` from an invertible family   D    no
TE     ``sum_k a_ik(s) gamma_kjr(t)`` from an invertible family  E    no
====== ======================================================== ==== ====
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping, Sequence

import numpy as np
from scipy.linalg import solve_triangular

from .cubic import as_distribution, multiply
from .functions import (
    VALIDATION_TIMES,
    Const,
    DescriptorError,
    Exp,
    FunctionDescriptor,
    Poly,
    descriptor,
)

__all__ = [
    "AFamilySpec",
    "Conjugation",
    "ConstRow",
    "FlowDomainError",
    "FlowSpec",
    "Rotation",
    "SingularFlowError",
    "SpecError",
    "SquareFlowSpec",
    "admissible_triples",
    "canonical_flows",
    "eval_flow",
    "initial_state",
    "kc_residual",
    "make_flow",
    "make_flow_tA",
    "make_flow_tE",
    "qsp_residual_A",
    "qsp_residual_B",
    "square_from_json",
    "ta_beta",
    "te_gamma",
    "trajectory",
]

COND_LIMIT = 1e12
PIVOT_GUARD = 1e-12
GAP_SLACK = 1e-12
CUBIC_RULES = ("C", "D", "E")
QSP_RULES = ("A", "B")


class SpecError(ValueError):
    """Invalid flow specification; ``field`` names the offending parameter."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


class FlowDomainError(ValueError):
    """Times outside the domain of a flow (``s > t``, or QSP gap below one)."""


class SingularFlowError(ValueError):
    """A normalizing function vanishes or a matrix family is not invertible."""


# --------------------------------------------------------------------------
# invertible matrix families
# --------------------------------------------------------------------------

_FORMS = ("general", "upper", "lower")


def _adjugate_inverse(A: np.ndarray) -> np.ndarray:
    m = A.shape[0]
    if m == 1:
        return np.array([[1.0 / A[0, 0]]])
    if m == 2:
        (a, b), (c, d) = A
        return np.array([[d, -b], [-c, a]]) / (a * d - b * c)
    cof = np.empty((3, 3))
    for i in range(3):
        for j in range(3):
            minor = np.delete(np.delete(A, i, axis=0), j, axis=1)
            cof[i, j] = (-1) ** (i + j) * (minor[0, 0] * minor[1, 1] - minor[0, 1] * minor[1, 0])
    det = float(A[0] @ cof[0])
    return cof.T / det


@dataclass(frozen=True)
class AFamilySpec:
    """A family ``t -> A(t)`` of invertible ``m x m`` matrices.

    ``entries[i][k]`` is the descriptor of ``a_ik(t)``.  For the triangular
    forms the entries outside the triangle must be zero constants (``None``
    is accepted for them) and invertibility means a diagonal bounded away
    from zero.  The general form is inverted in closed form for ``m <= 3`` and
    by LU with partial pivoting otherwise, behind a condition-number guard.
    """

    entries: tuple[tuple[FunctionDescriptor, ...], ...]
    form: str = "general"

    def __post_init__(self):
        form = str(self.form).lower()
        if form not in _FORMS:
            raise SpecError("afamily.form", f"expected one of {_FORMS}, got {self.form!r}")
        rows = list(self.entries)
        m = len(rows)
        if m < 1 or any(len(r) != m for r in rows):
            raise SpecError("afamily.entries", "must be a non-empty square grid")
        parsed = []
        for i, row in enumerate(rows):
            prow = []
            for k, e in enumerate(row):
                outside = (form == "upper" and i > k) or (form == "lower" and i < k)
                if e is None:
                    if not outside:
                        raise SpecError(f"afamily.entries[{i}][{k}]", "missing descriptor")
                    e = Const(0.0)
                try:
                    d = descriptor(e)
                except DescriptorError as exc:
                    raise SpecError(f"afamily.entries[{i}][{k}]", str(exc)) from None
                if outside and d != Const(0.0):
                    raise SpecError(f"afamily.entries[{i}][{k}]", f"must be zero for {form}-triangular form")
                prow.append(d)
            parsed.append(tuple(prow))
        object.__setattr__(self, "entries", tuple(parsed))
        object.__setattr__(self, "form", form)

    @property
    def dim(self) -> int:
        return len(self.entries)

    def matrix(self, t: float) -> np.ndarray:
        return np.array([[f(t) for f in row] for row in self.entries], dtype=float)

    def inverse(self, t: float) -> np.ndarray:
        """``A(t)^{-1}``; raises :class:`SingularFlowError` if not safely invertible."""
        A = self.matrix(t)
        m = self.dim
        if not np.all(np.isfinite(A)):
            raise SingularFlowError(f"matrix family is not finite at t={t!r}")
        if self.form != "general":
            diag = np.abs(np.diag(A))
            if diag.min() <= PIVOT_GUARD:
                raise SingularFlowError(f"triangular family has a vanishing diagonal entry at t={t!r}")
            return solve_triangular(A, np.eye(m), lower=self.form == "lower")
        cond = np.linalg.cond(A)
        if not np.isfinite(cond) or cond > COND_LIMIT:
            raise SingularFlowError(f"matrix family is ill-conditioned at t={t!r} (cond={cond:.3g})")
        if m <= 3:
            return _adjugate_inverse(A)
        return np.linalg.inv(A)

    def validate(self, times: Sequence[float] = VALIDATION_TIMES) -> None:
        for t in times:
            try:
                self.inverse(t)
            except DescriptorError as exc:
                raise SpecError("afamily", f"cannot evaluate at t={t!r}: {exc}") from None
            except SingularFlowError as exc:
                raise SpecError("afamily", str(exc)) from None

    def to_json(self) -> dict:
        return {
            "dim": self.dim,
            "form": self.form,
            "entries": [[f.to_json() for f in row] for row in self.entries],
        }

    @classmethod
    def from_json(cls, doc: Mapping) -> "AFamilySpec":
        if isinstance(doc, AFamilySpec):
            return doc
        if not isinstance(doc, Mapping) or "entries" not in doc:
            raise SpecError("afamily", "expected an object with 'entries'")
        entries = doc["entries"]
        if "dim" in doc and len(entries) != int(doc["dim"]):
            raise SpecError("afamily.dim", f"dim {doc['dim']} does not match {len(entries)} rows")
        return cls(tuple(tuple(row) for row in entries), doc.get("form", "general"))

    @classmethod
    def identity(cls, m: int) -> "AFamilySpec":
        return cls(tuple(tuple(Const(1.0 if i == k else 0.0) for k in range(m)) for i in range(m)))


# --------------------------------------------------------------------------
# square KC solutions
# --------------------------------------------------------------------------


class SquareFlowSpec:
    """Base for families ``(s, t) -> Q[s, t]`` with ``Q[s,t] = Q[s,tau] Q[tau,t]``."""

    kind: str = ""

    @property
    def dim(self) -> int:  # pragma: no cover - abstract
        raise NotImplementedError

    def matrix(self, s: float, t: float) -> np.ndarray:  # pragma: no cover - abstract
        raise NotImplementedError

    def to_json(self) -> dict:  # pragma: no cover - abstract
        raise NotImplementedError


@dataclass(frozen=True)
class Rotation(SquareFlowSpec):
    """``[[cos h, sin h], [-sin h, cos h]]`` with ``h = t - s``, or its transpose."""

    transpose: bool = False
    kind = "rotation"

    @property
    def dim(self):
        return 2

    def matrix(self, s, t):
        h = t - s
        c, sn = math.cos(h), math.sin(h)
        if self.transpose:
            return np.array([[c, -sn], [sn, c]])
        return np.array([[c, sn], [-sn, c]])

    def to_json(self):
        return {"kind": self.kind, "transpose": bool(self.transpose)}


@dataclass(frozen=True)
class Conjugation(SquareFlowSpec):
    """``A(s) A(t)^{-1}`` for an invertible family ``A``."""

    afamily: AFamilySpec
    kind = "conjugation"

    def __post_init__(self):
        object.__setattr__(self, "afamily", AFamilySpec.from_json(self.afamily))
        self.afamily.validate()

    @property
    def dim(self):
        return self.afamily.dim

    def matrix(self, s, t):
        return self.afamily.matrix(s) @ self.afamily.inverse(t)

    def to_json(self):
        return {"kind": self.kind, "afamily": self.afamily.to_json()}


@dataclass(frozen=True)
class ConstRow(SquareFlowSpec):
    """Every row equals the stochastic vector ``a(t)``: ``q_il = a_l(t)``."""

    a: tuple[FunctionDescriptor, ...]
    kind = "const_row"

    def __post_init__(self):
        object.__setattr__(self, "a", _stochastic_vector(self.a, "a"))

    @property
    def dim(self):
        return len(self.a)

    def matrix(self, s, t):
        row = np.array([f(t) for f in self.a])
        return np.tile(row, (len(self.a), 1))

    def to_json(self):
        return {"kind": self.kind, "a": [f.to_json() for f in self.a]}


def square_from_json(doc) -> SquareFlowSpec:
    if isinstance(doc, SquareFlowSpec):
        return doc
    if not isinstance(doc, Mapping):
        raise SpecError("square", f"expected an object, got {doc!r}")
    kind = doc.get("kind")
    if kind == "rotation":
        return Rotation(bool(doc.get("transpose", False)))
    if kind == "conjugation":
        return Conjugation(AFamilySpec.from_json(doc.get("afamily")))
    if kind == "const_row":
        return ConstRow(tuple(doc.get("a", ())))
    raise SpecError("square.kind", f"unknown square flow kind {kind!r}")


def _stochastic_vector(values, name: str) -> tuple[FunctionDescriptor, ...]:
    try:
        fs = tuple(descriptor(v) for v in values)
    except (DescriptorError, TypeError) as exc:
        raise SpecError(name, str(exc)) from None
    if not fs:
        raise SpecError(name, "needs at least one component")
    for t in VALIDATION_TIMES:
        try:
            vals = [f(t) for f in fs]
        except DescriptorError as exc:
            raise SpecError(name, f"cannot evaluate at t={t!r}: {exc}") from None
        if min(vals) < -1e-12 or abs(math.fsum(vals) - 1.0) > 1e-12:
            raise SpecError(name, f"is not a probability vector at t={t!r}: {vals}")
    return fs


# --------------------------------------------------------------------------
# family registry
# --------------------------------------------------------------------------


def _num(params: Mapping, key: str, lo: float | None = None, hi: float | None = None) -> float:
    if key not in params:
        raise SpecError(f"params.{key}", "missing")
    v = params[key]
    if isinstance(v, bool) or not isinstance(v, (int, float, np.floating, np.integer)):
        raise SpecError(f"params.{key}", f"must be a number, got {v!r}")
    v = float(v)
    if not math.isfinite(v):
        raise SpecError(f"params.{key}", "must be finite")
    if (lo is not None and v < lo) or (hi is not None and v > hi):
        raise SpecError(f"params.{key}", f"{v!r} outside [{lo}, {hi}]")
    return v


def _desc(params: Mapping, key: str) -> FunctionDescriptor:
    if key not in params:
        raise SpecError(f"params.{key}", "missing")
    try:
        return descriptor(params[key])
    except DescriptorError as exc:
        raise SpecError(f"params.{key}", str(exc)) from None


def _nonzero_on_grid(f: FunctionDescriptor, key: str) -> None:
    for t in VALIDATION_TIMES:
        try:
            v = f(t)
        except DescriptorError as exc:
            raise SpecError(f"params.{key}", f"cannot evaluate at t={t!r}: {exc}") from None
        if abs(v) <= PIVOT_GUARD:
            raise SpecError(f"params.{key}", f"vanishes at t={t!r}")


@dataclass(frozen=True)
class _Family:
    tag: str
    rule: str
    qsp: bool
    parse: Callable[[Mapping], dict]
    dump: Callable[[Mapping], dict]
    evaluate: Callable[[Mapping, float, float], np.ndarray]
    dim: Callable[[Mapping], int]
    initial: Callable[[Mapping], np.ndarray] | None = None


_FAMILIES: dict[str, _Family] = {}


def _register(fam: _Family) -> None:
    _FAMILIES[fam.tag] = fam


def _dump_floats(params):
    return {k: float(v) for k, v in params.items()}


# two-type QSPs ------------------------------------------------------------


def _parse_binary(lo_eps, hi_eps):
    def parse(p):
        return {"epsilon": _num(p, "epsilon", lo_eps, hi_eps), "x": _num(p, "x", 0.0, 1.0)}

    return parse


def _eval_e2(p, s, t):
    # The x-only entry P_{22,1} carries the factor (1-2eps)^s, as the
    # corresponding entry of E3 does; without it neither QSP type holds.
    eps, x = p["epsilon"], p["x"]
    h = t - s
    lam = 1.0 - 2.0 * eps
    half = 2.0 ** (h - 1.0)
    D = lam**h / half
    K = half - 1.0
    q = lam**s
    P = np.empty((2, 2, 2))
    P[0, 0, 0] = D * (K * q * x + 1.0)
    P[0, 1, 0] = P[1, 0, 0] = D * (K * q * x + 0.5)
    P[1, 1, 0] = D * K * q * x
    P[:, :, 1] = 1.0 - P[:, :, 0]
    return P


def _eval_e3(p, s, t):
    eps, x = p["epsilon"], p["x"]
    h = t - s
    half = 2.0 ** (h - 1.0)
    K = half - 1.0
    f = eps**h / half * (s + 1.0) / (t + 1.0)
    g = K * eps**s / (s + 1.0) * x
    P = np.empty((2, 2, 2))
    P[0, 0, 0] = f * (g + 1.0)
    P[0, 1, 0] = P[1, 0, 0] = f * (g + 0.5)
    P[1, 1, 0] = K / half * eps**t / (t + 1.0) * x
    P[:, :, 1] = 1.0 - P[:, :, 0]
    return P


def _initial_binary(p):
    return np.array([p["x"], 1.0 - p["x"]])


_register(_Family("E2", "A", True, _parse_binary(0.0, 0.5), _dump_floats, _eval_e2, lambda p: 2, _initial_binary))
_register(_Family("E3", "A", True, _parse_binary(0.0, 1.0), _dump_floats, _eval_e3, lambda p: 2, _initial_binary))


# three-type QSPs ----------------------------------------------------------

# weights of eps^{t-s} in P_{ij,1} and P_{ij,2}
_W1 = np.array([[2.0, 1.0, 1.0], [1.0, 0.0, 0.0], [1.0, 0.0, 0.0]])
_W2 = np.array([[0.0, 1.0, 0.0], [1.0, 2.0, 1.0], [0.0, 1.0, 0.0]])


def _parse_ternary(p):
    out = {
        "epsilon": _num(p, "epsilon", 0.0, 0.5),
        "x1": _num(p, "x1", 0.0, 1.0),
        "x2": _num(p, "x2", 0.0, 1.0),
    }
    if out["x1"] + out["x2"] > 1.0:
        raise SpecError("params.x2", "x1 + x2 must not exceed 1")
    return out


def _ternary(shift):
    def evaluate(p, s, t):
        eps = p["epsilon"]
        h = t - s
        half = 2.0 ** (h - 1.0)
        D = (half - 1.0) / half
        grow = (2.0 * eps) ** (t + shift)
        e = eps**h
        P = np.empty((3, 3, 3))
        P[:, :, 0] = e * _W1 + D * grow * p["x1"]
        P[:, :, 1] = e * _W2 + D * grow * p["x2"]
        P[:, :, 2] = 1.0 - P[:, :, 0] - P[:, :, 1]
        return P

    return evaluate


def _initial_ternary(p):
    return np.array([p["x1"], p["x2"], 1.0 - p["x1"] - p["x2"]])


_register(_Family("E4", "A", True, _parse_ternary, _dump_floats, _ternary(1.0), lambda p: 3, _initial_ternary))
_register(_Family("E5", "B", True, _parse_ternary, _dump_floats, _ternary(0.0), lambda p: 3, _initial_ternary))


# constant-row QSP ---------------------------------------------------------


def _parse_e6(p):
    if "a" not in p or not isinstance(p["a"], (list, tuple)):
        raise SpecError("params.a", "must be a list of descriptors")
    return {"a": _stochastic_vector(p["a"], "params.a")}


def _eval_e6(p, s, t):
    row = np.array([f(t) for f in p["a"]])
    m = row.size
    return np.broadcast_to(row, (m, m, m)).copy()


_register(
    _Family(
        "E6", "C", True, _parse_e6,
        lambda p: {"a": [f.to_json() for f in p["a"]]},
        _eval_e6,
        lambda p: len(p["a"]),
        lambda p: np.full(len(p["a"]), 1.0 / len(p["a"])),
    )
)


# stacked square solutions (rule C) ----------------------------------------


def _parse_e7(p):
    out = {}
    for key in ("first", "second"):
        if key not in p:
            raise SpecError(f"params.{key}", "missing")
        try:
            sq = square_from_json(p[key])
        except SpecError as exc:
            raise SpecError(f"params.{key}.{exc.field}", str(exc).split(": ", 1)[-1]) from None
        if sq.dim != 2:
            raise SpecError(f"params.{key}", "square flows must be 2 x 2")
        out[key] = sq
    return out


def _eval_e7(p, s, t):
    M = np.empty((2, 2, 2))
    M[:, 0, :] = p["first"].matrix(s, t)
    M[:, 1, :] = p["second"].matrix(s, t)
    return M


_register(
    _Family(
        "E7", "C", False, _parse_e7,
        lambda p: {"first": p["first"].to_json(), "second": p["second"].to_json()},
        _eval_e7,
        lambda p: 2,
    )
)


# Psi-kappa family (rule D) and Psi-gamma family (rule E) -------------------


def _parse_psi(names):
    def parse(p):
        out = {"psi": _desc(p, "psi")}
        _nonzero_on_grid(out["psi"], "psi")
        for n in names:
            out[n] = _desc(p, n)
        return out

    return parse


def _dump_desc(p):
    return {k: f.to_json() for k, f in p.items()}


def _psi_at(p, s):
    v = p["psi"](s)
    if abs(v) <= PIVOT_GUARD:
        raise SingularFlowError(f"psi vanishes at s={s!r}")
    return v


def _eval_e8(p, s, t):
    inv2 = 0.5 / _psi_at(p, s)
    psi_t = p["psi"](t)
    k11, k21 = p["kappa11"](s), p["kappa21"](s)
    M = np.empty((2, 2, 2))
    M[0, 0, 0], M[1, 0, 0] = k11, k21
    M[0, 1, 0], M[1, 1, 0] = inv2 - k11, -inv2 - k21
    M[:, :, 1] = -M[:, :, 0]
    return psi_t * M


def _eval_e10(p, s, t):
    psi_s = _psi_at(p, s)
    half = 0.5 * p["psi"](t)
    g11, g12 = p["gamma11"](t), p["gamma12"](t)
    G = np.array([[g11, g12], [half - g11, -g12 - half]])
    M = np.empty((2, 2, 2))
    M[0] = G
    M[1] = -G
    return M / psi_s


_register(_Family("E8", "D", False, _parse_psi(("kappa11", "kappa21")), _dump_desc, _eval_e8, lambda p: 2))
_register(_Family("E10", "E", False, _parse_psi(("gamma11", "gamma12")), _dump_desc, _eval_e10, lambda p: 2))


# periodic rotation family (rule D) -----------------------------------------


def _parse_e9(p):
    return {k: _num(p, k) for k in ("a", "b", "c", "d")}


def _eval_e9(p, s, t):
    a, b, c, d = p["a"], p["b"], p["c"], p["d"]
    h = t - s
    co, si = math.cos(h), math.sin(h)
    M = np.empty((2, 2, 2))
    M[0, 0] = (a * co - b * si, b * co + a * si)
    M[0, 1] = ((1 - a) * co + b * si, -b * co + (1 - a) * si)
    M[1, 0] = (c * co - d * si, d * co + c * si)
    M[1, 1] = (-c * co - (1 - d) * si, (1 - d) * co - c * si)
    return M


_register(_Family("E9", "D", False, _parse_e9, _dump_floats, _eval_e9, lambda p: 2))


# invertible-family constructions -------------------------------------------


def _parse_split(tag):
    def parse(p):
        if "afamily" not in p:
            raise SpecError("params.afamily", "missing")
        try:
            fam = AFamilySpec.from_json(p["afamily"])
        except SpecError as exc:
            raise SpecError(f"params.{exc.field}", str(exc).split(": ", 1)[-1]) from None
        m = fam.dim
        try:
            fam.validate()
        except SpecError as exc:
            raise SpecError(f"params.{exc.field}", str(exc).split(": ", 1)[-1]) from None
        w = p.get("weights")
        if not isinstance(w, (list, tuple, np.ndarray)) or len(w) != m:
            raise SpecError("params.weights", f"must be a list of {m} numbers")
        try:
            w = tuple(float(v) for v in w)
        except (TypeError, ValueError):
            raise SpecError("params.weights", "must be numbers") from None
        if not all(math.isfinite(v) for v in w) or abs(math.fsum(w) - 1.0) > 1e-12:
            raise SpecError("params.weights", f"must be finite and sum to 1, got sum {math.fsum(w)!r}")
        delta = p.get("perturbation")
        if delta is not None:
            arr = np.asarray(delta, dtype=float)
            if arr.shape != (m, m, m) or not np.all(np.isfinite(arr)):
                raise SpecError("params.perturbation", f"must be a finite {m}x{m}x{m} table")
            if np.max(np.abs(arr.sum(axis=1))) > 1e-12:
                raise SpecError("params.perturbation", "sums over the middle index must vanish")
            delta = tuple(tuple(tuple(float(v) for v in row) for row in plane) for plane in arr)
        out = {"afamily": fam, "weights": w, "perturbation": delta}
        _verify_split(tag, out)
        return out

    return parse


def _split(p, mat: np.ndarray) -> np.ndarray:
    # weighted split over the middle index: w_j * mat_ik (+ delta_ijk)
    w = np.asarray(p["weights"])
    out = w[None, :, None] * mat[:, None, :]
    if p["perturbation"] is not None:
        out = out + np.asarray(p["perturbation"])
    return out


def _verify_split(tag, p):
    fam = p["afamily"]
    for t in VALIDATION_TIMES[::7]:
        target = fam.matrix(t) if tag == "TA" else fam.inverse(t)
        tbl = _split(p, target)
        err = np.abs(tbl.sum(axis=1) - target)
        if np.any(err > 1e-10 * np.maximum(1.0, np.abs(target))):
            raise SpecError("params.weights", f"split constraint violated at t={t!r}")


def _dump_split(p):
    out = {"afamily": p["afamily"].to_json(), "weights": list(p["weights"])}
    if p["perturbation"] is not None:
        out["perturbation"] = [[list(r) for r in plane] for plane in p["perturbation"]]
    return out


def _eval_ta(p, s, t):
    beta = _split(p, p["afamily"].matrix(s))
    return np.einsum("ijk,kr->ijr", beta, p["afamily"].inverse(t))


def _eval_te(p, s, t):
    gamma = _split(p, p["afamily"].inverse(t))
    return np.einsum("ik,kjr->ijr", p["afamily"].matrix(s), gamma)


_register(_Family("TA", "D", False, _parse_split("TA"), _dump_split, _eval_ta, lambda p: p["afamily"].dim))
_register(_Family("TE", "E", False, _parse_split("TE"), _dump_split, _eval_te, lambda p: p["afamily"].dim))


# --------------------------------------------------------------------------
# FlowSpec
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class FlowSpec:
    """Immutable description of a built-in flow family plus its parameters.

    ``params`` may hold JSON-style values (numbers, descriptor mappings) or
    already-built objects; they are validated and normalized on construction.
    ``rule`` defaults to the family's own KC rule and ``qsp`` to whether the
    family is a quadratic stochastic process.  ``"A"``/``"B"`` rules are only
    meaningful for QSP specs.
    """

    family: str
    params: Mapping[str, Any] = field(default_factory=dict)
    rule: str | None = None
    qsp: bool | None = None

    def __post_init__(self):
        fam = _FAMILIES.get(self.family)
        if fam is None:
            raise SpecError("family", f"unknown family tag {self.family!r}; known: {sorted(_FAMILIES)}")
        if not isinstance(self.params, Mapping):
            raise SpecError("params", "must be an object")
        object.__setattr__(self, "params", fam.parse(self.params))
        qsp = fam.qsp if self.qsp is None else self.qsp
        if not isinstance(qsp, (bool, np.bool_)):
            raise SpecError("qsp", f"must be a boolean, got {qsp!r}")
        if qsp and not fam.qsp:
            raise SpecError("qsp", f"family {self.family} is not a quadratic stochastic process")
        object.__setattr__(self, "qsp", bool(qsp))
        rule = fam.rule if self.rule is None else str(self.rule).upper()
        allowed = CUBIC_RULES + (QSP_RULES if self.qsp else ())
        if rule not in allowed:
            raise SpecError("rule", f"expected one of {allowed}, got {self.rule!r}")
        object.__setattr__(self, "rule", rule)

    @property
    def dim(self) -> int:
        return _FAMILIES[self.family].dim(self.params)

    def with_rule(self, rule: str) -> "FlowSpec":
        return FlowSpec(self.family, self.params, rule, self.qsp)

    def to_json(self) -> dict:
        return {
            "family": self.family,
            "rule": self.rule,
            "qsp": self.qsp,
            "params": _FAMILIES[self.family].dump(self.params),
        }

    @classmethod
    def from_json(cls, doc: Mapping) -> "FlowSpec":
        if not isinstance(doc, Mapping):
            raise SpecError("spec", "must be a JSON object")
        if "family" not in doc:
            raise SpecError("family", "missing")
        return cls(doc["family"], doc.get("params", {}), doc.get("rule"), doc.get("qsp"))


def make_flow(family: str, rule: str | None = None, qsp: bool | None = None, **params) -> FlowSpec:
    """Keyword-style constructor, e.g. ``make_flow("E9", a=0.2, b=-0.4, c=0.8, d=1.4)``."""
    return FlowSpec(family, params, rule, qsp)


def make_flow_tA(afamily: AFamilySpec, weights, perturbation=None) -> FlowSpec:
    """Rule-D flow ``c_ijr(s,t) = sum_k beta_ijk(s) b_kr(t)`` with ``B(t) = A(t)^{-1}``.

    ``beta_ijk(s) = w_j a_ik(s) + delta_ijk`` so that ``sum_j beta_ijk = a_ik``
    holds identically; ``perturbation`` (``delta``) must have vanishing sums
    over its middle index.
    """
    return FlowSpec("TA", {"afamily": afamily, "weights": weights, "perturbation": perturbation})


def make_flow_tE(afamily: AFamilySpec, weights, perturbation=None) -> FlowSpec:
    """Rule-E flow ``c_ijr(s,t) = sum_k a_ik(s) gamma_kjr(t)``, ``gamma_kjr = w_j b_kr + delta``."""
    return FlowSpec("TE", {"afamily": afamily, "weights": weights, "perturbation": perturbation})


def ta_beta(spec: FlowSpec, s: float) -> np.ndarray:
    """The coefficient table ``beta_ijk(s)`` of a TA flow."""
    if spec.family != "TA":
        raise ValueError("ta_beta needs a TA flow")
    return _split(spec.params, spec.params["afamily"].matrix(s))


def te_gamma(spec: FlowSpec, t: float) -> np.ndarray:
    """The coefficient table ``gamma_ijk(t)`` of a TE flow."""
    if spec.family != "TE":
        raise ValueError("te_gamma needs a TE flow")
    return _split(spec.params, spec.params["afamily"].inverse(t))


# --------------------------------------------------------------------------
# evaluation and residuals
# --------------------------------------------------------------------------


def _raw(spec: FlowSpec, s: float, t: float) -> np.ndarray:
    M = _FAMILIES[spec.family].evaluate(spec.params, float(s), float(t))
    if not np.all(np.isfinite(M)):
        raise SingularFlowError(f"{spec.family} is not finite at (s, t) = ({s!r}, {t!r})")
    return M


def eval_flow(spec: FlowSpec, s: float, t: float) -> np.ndarray:
    """Structural constants ``M[s, t]`` of the flow.

    Raises
    ------
    FlowDomainError
        If ``s < 0``, ``t < s``, or the spec is a QSP and ``t - s < 1``.
    SingularFlowError, DescriptorError
        If a normalizing function vanishes or the matrix family is singular.
    """
    s, t = float(s), float(t)
    if s < 0 or t < s:
        raise FlowDomainError(f"need 0 <= s <= t, got s={s!r}, t={t!r}")
    if spec.qsp and t - s < 1.0 - GAP_SLACK:
        raise FlowDomainError(f"QSP flows need t - s >= 1, got {t - s!r}")
    return _raw(spec, s, t)


def initial_state(spec: FlowSpec) -> np.ndarray:
    """Initial distribution ``x(0)`` carried by a QSP spec (uniform when the family has none)."""
    fam = _FAMILIES[spec.family]
    if not spec.qsp or fam.initial is None:
        raise ValueError(f"{spec.family} spec is not a quadratic stochastic process")
    return fam.initial(spec.params)


def _x0(spec: FlowSpec, x0) -> np.ndarray:
    x = initial_state(spec) if x0 is None else as_distribution(x0)
    if x.size != spec.dim:
        raise ValueError(f"initial distribution has {x.size} weights, flow has dim {spec.dim}")
    return x


def _state(spec: FlowSpec, x0: np.ndarray, t: float) -> np.ndarray:
    # For 0 < t < 1 this uses the closed-form matrix outside the QSP domain;
    # the quadratic image is still the population state there.
    if t == 0:
        return x0
    return np.einsum("ijk,i,j->k", _raw(spec, 0.0, t), x0, x0)


def trajectory(spec: FlowSpec, x0=None, t: float = 1.0) -> np.ndarray:
    """Population state ``x_k(t) = sum_ij P[0,t]_{ij,k} x_i(0) x_j(0)`` for ``t >= 1``.

    ``x0`` defaults to the initial distribution stored in the spec.
    """
    if not spec.qsp:
        raise ValueError(f"{spec.family} spec is not a quadratic stochastic process")
    if t < 1.0 - GAP_SLACK:
        raise FlowDomainError(f"trajectory is defined for t >= 1, got {t!r}")
    x = _x0(spec, x0)
    return np.einsum("ijk,i,j->k", eval_flow(spec, 0.0, t), x, x)


def _qsp_triple(spec, s, r, t):
    if not spec.qsp:
        raise ValueError(f"{spec.family} spec is not a quadratic stochastic process")
    if s < 0 or r - s < 1.0 - GAP_SLACK or t - r < 1.0 - GAP_SLACK:
        raise FlowDomainError(f"need r - s >= 1 and t - r >= 1, got ({s!r}, {r!r}, {t!r})")


def qsp_residual_A(spec: FlowSpec, x0=None, s: float = 0.0, r: float = 1.0, t: float = 2.0) -> float:
    """``max |P[s,t]_{ij,k} - sum_{m,l} P[s,r]_{ij,m} P[r,t]_{ml,k} x_l(r)|``."""
    _qsp_triple(spec, s, r, t)
    x = _x0(spec, x0)
    xr = _state(spec, x, r)
    rhs = np.einsum("ijm,mlk,l->ijk", eval_flow(spec, s, r), eval_flow(spec, r, t), xr)
    return float(np.max(np.abs(eval_flow(spec, s, t) - rhs)))


def qsp_residual_B(spec: FlowSpec, x0=None, s: float = 0.0, r: float = 1.0, t: float = 2.0) -> float:
    """``max |P[s,t]_{ij,k} - sum P[s,r]_{im,l} P[s,r]_{jg,h} P[r,t]_{lh,k} x_m(s) x_g(s)|``."""
    _qsp_triple(spec, s, r, t)
    x = _x0(spec, x0)
    xs = _state(spec, x, s)
    first = eval_flow(spec, s, r)
    mixed = np.einsum("iml,m->il", first, xs)          # sum_m P[s,r]_{im,l} x_m(s)
    rhs = np.einsum("il,jh,lhk->ijk", mixed, mixed, eval_flow(spec, r, t))
    return float(np.max(np.abs(eval_flow(spec, s, t) - rhs)))


def kc_residual(spec: FlowSpec, s: float, tau: float, t: float, rule: str | None = None) -> float:
    """Max-abs entry of ``M[s,t] - M[s,tau] * M[tau,t]`` under the spec's rule.

    ``rule`` overrides ``spec.rule``.  For the QSP rules ``"A"``/``"B"`` the
    quadratic residual is returned, with the spec's own initial distribution.
    """
    rule = spec.rule if rule is None else str(rule).upper()
    if not 0 <= s < tau < t:
        raise FlowDomainError(f"need 0 <= s < tau < t, got ({s!r}, {tau!r}, {t!r})")
    if rule == "A":
        return qsp_residual_A(spec, None, s, tau, t)
    if rule == "B":
        return qsp_residual_B(spec, None, s, tau, t)
    prod = multiply(eval_flow(spec, s, tau), eval_flow(spec, tau, t), rule)
    return float(np.max(np.abs(eval_flow(spec, s, t) - prod)))


def admissible_triples(spec: FlowSpec, n: int, seed: int = 0, horizon: float = 5.0) -> list[tuple[float, float, float]]:
    """``n`` pseudo-random triples ``s < tau < t`` inside the spec's domain.

    QSP specs get gaps ``tau - s`` and ``t - tau`` in ``[1, 1 + horizon/2]``;
    other specs get three sorted uniforms on ``[0, horizon]``.  Generated by
    ``numpy.random.default_rng(seed)``.
    """
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < n:
        if spec.qsp:
            s, g1, g2 = rng.uniform([0.0, 1.0, 1.0], [horizon, 1.0 + horizon / 2, 1.0 + horizon / 2])
            out.append((float(s), float(s + g1), float(s + g1 + g2)))
        else:
            s, tau, t = np.sort(rng.uniform(0.0, horizon, 3))
            if s < tau < t:
                out.append((float(s), float(tau), float(t)))
    return out


def canonical_flows() -> dict[str, FlowSpec]:
    """One representative spec per built-in family (the parameters used in tests)."""
    upper = AFamilySpec(((Exp(1.0), Poly((0.0, 1.0))), (None, Exp(2.0))), "upper")
    return {
        "E2": make_flow("E2", epsilon=0.25, x=0.5),
        "E3": make_flow("E3", epsilon=0.5, x=0.5),
        "E4": make_flow("E4", epsilon=0.25, x1=0.3, x2=0.3),
        "E5": make_flow("E5", epsilon=0.25, x1=0.3, x2=0.3),
        "E6": make_flow("E6", a=[0.3, 0.7]),
        "E7": make_flow("E7", first=Rotation(), second=Rotation(transpose=True)),
        "E8": make_flow("E8", psi=Exp(1.0), kappa11=0.1, kappa21=0.2),
        "E9": make_flow("E9", a=0.2, b=-0.4, c=0.8, d=1.4),
        "E10": make_flow("E10", psi=Exp(1.0), gamma11=0.1, gamma12=0.2),
        "TA": make_flow_tA(upper, (0.5, 0.5)),
        "TE": make_flow_tE(upper, (0.5, 0.5)),
    }
