r"""
Cubic matrices of structural constants
======================================

An ``m``-dimensional algebra with basis :math:`e_1,\dots,e_m` is fixed by its
structural constants :math:`e_i e_j = \sum_k c_{ijk} e_k`.  Here a cubic matrix
is a plain ``(m, m, m)`` float ndarray indexed ``[i, j, k]``; square matrices
are ``(m, m)`` ndarrays.  All Python-side indices are 0-based.  Formulas in
docstrings use the usual 1-based notation.

Products
--------
Three associative products on unit cubic matrices ``(i,j,k)(l,n,r)``, all
requiring ``k == l``:

* rule C keeps ``(i,j,r)`` when also ``j == n``
* rule D keeps ``(i,j,r)``
* rule E keeps ``(i,n,r)``

plus the general rule landing in ``(i, j o n, r)`` for an associative
operation ``o`` on the index set.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

__all__ = [
    "AlgebraProperty",
    "AssocOp",
    "DEFAULT_CONSERVATION_TOL",
    "DEFAULT_TOL",
    "StochasticityKind",
    "algebra_product",
    "associator_defect",
    "as_cubic",
    "as_distribution",
    "as_square",
    "check_algebra_property",
    "check_stochastic",
    "collapse",
    "cubic_from_json",
    "cubic_to_json",
    "layer",
    "mul_c",
    "mul_d",
    "mul_e",
    "mul_general",
    "multiply",
    "qso_apply",
    "square_from_json",
    "square_to_json",
    "sup_distance",
]

DEFAULT_TOL = 1e-9
DEFAULT_CONSERVATION_TOL = 1e-12


class StochasticityKind(str, enum.Enum):
    """Kinds of stochasticity for a cubic matrix ``p``.

    ``K``: ``sum_k p_ijk = 1`` for every ``(i, j)``.
    ``Pair12``/``Pair13``/``Pair23``: the sum over the two named indices is 1
    for every value of the remaining one.
    ``Twice``: ``Pair23`` and additionally ``sum_i p_ijk = 1/m`` for all ``(j, k)``.
    """

    K = "K"
    PAIR12 = "Pair12"
    PAIR13 = "Pair13"
    PAIR23 = "Pair23"
    TWICE = "Twice"


class AlgebraProperty(str, enum.Enum):
    COMMUTATIVE = "Commutative"
    ASSOCIATIVE = "Associative"
    BARIC = "Baric"
    EVOLUTION = "EvolutionAlgebra"


# --------------------------------------------------------------------------
# validation and interchange
# --------------------------------------------------------------------------


def as_cubic(M) -> np.ndarray:
    """Return ``M`` as a float ``(m, m, m)`` array, validating shape and finiteness."""
    arr = np.asarray(M, dtype=float)
    if arr.ndim != 3 or not (arr.shape[0] == arr.shape[1] == arr.shape[2]) or arr.shape[0] < 1:
        raise ValueError(f"cubic matrix must have shape (m, m, m) with m >= 1, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("cubic matrix has non-finite entries")
    return arr


def as_square(M) -> np.ndarray:
    arr = np.asarray(M, dtype=float)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1] or arr.shape[0] < 1:
        raise ValueError(f"square matrix must have shape (m, m) with m >= 1, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("square matrix has non-finite entries")
    return arr


def as_distribution(x, tol: float = DEFAULT_CONSERVATION_TOL) -> np.ndarray:
    """Validate a point of the simplex: nonnegative weights summing to one."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 1 or arr.size < 1:
        raise ValueError("distribution must be a non-empty vector")
    if not np.all(np.isfinite(arr)):
        raise ValueError("distribution has non-finite entries")
    if arr.min() < -tol:
        raise ValueError(f"distribution has negative weight {arr.min()!r}")
    if abs(arr.sum() - 1.0) > tol:
        raise ValueError(f"distribution weights sum to {arr.sum()!r}, not 1")
    return arr


def _check_pair(A, B) -> tuple[np.ndarray, np.ndarray]:
    A = as_cubic(A)
    B = as_cubic(B)
    if A.shape != B.shape:
        raise ValueError(f"dimension mismatch: {A.shape[0]} vs {B.shape[0]}")
    return A, B


def cubic_to_json(M) -> dict:
    """Serialize as ``{"dim": m, "entries": [...]}``, entries row-major with k fastest."""
    M = as_cubic(M)
    return {"dim": int(M.shape[0]), "entries": [float(v) for v in M.ravel(order="C")]}


def cubic_from_json(doc: Mapping) -> np.ndarray:
    m = int(doc["dim"])
    entries = list(doc["entries"])
    if m < 1 or len(entries) != m**3:
        raise ValueError(f"expected {m**3} entries for dim {m}, got {len(entries)}")
    return as_cubic(np.array(entries, dtype=float).reshape(m, m, m))


def square_to_json(M) -> dict:
    M = as_square(M)
    return {"dim": int(M.shape[0]), "entries": [float(v) for v in M.ravel(order="C")]}


def square_from_json(doc: Mapping) -> np.ndarray:
    m = int(doc["dim"])
    entries = list(doc["entries"])
    if m < 1 or len(entries) != m**2:
        raise ValueError(f"expected {m**2} entries for dim {m}, got {len(entries)}")
    return as_square(np.array(entries, dtype=float).reshape(m, m))


def sup_distance(A, B) -> float:
    """Entrywise sup-distance between two arrays of equal shape."""
    return float(np.max(np.abs(np.asarray(A, dtype=float) - np.asarray(B, dtype=float))))


# --------------------------------------------------------------------------
# products
# --------------------------------------------------------------------------


def mul_c(A, B) -> np.ndarray:
    r"""Rule C product, :math:`c_{ijr} = \sum_k a_{ijk} b_{kjr}`.

    Each middle-index layer multiplies independently as a square matrix.

    Examples
    --------
    >>> import numpy as np
    >>> A = np.zeros((2, 2, 2)); A[0, 0, 1] = 1   # unit (1,1,2)
    >>> B = np.zeros((2, 2, 2)); B[1, 0, 0] = 1   # unit (2,1,1)
    >>> np.argwhere(mul_c(A, B)).tolist()
    [[0, 0, 0]]
    """
    A, B = _check_pair(A, B)
    return np.einsum("ijk,kjr->ijr", A, B)


def mul_d(A, B) -> np.ndarray:
    r"""Rule D product, :math:`c_{ijr} = \sum_{k,n} a_{ijk} b_{knr}`."""
    A, B = _check_pair(A, B)
    return np.einsum("ijk,kr->ijr", A, B.sum(axis=1))


def mul_e(A, B) -> np.ndarray:
    r"""Rule E product, :math:`c_{inr} = \sum_{j,k} a_{ijk} b_{knr}`."""
    A, B = _check_pair(A, B)
    return np.einsum("ik,knr->inr", A.sum(axis=1), B)


@dataclass(frozen=True, eq=False)
class AssocOp:
    """Associative binary operation on ``{0, ..., m-1}`` given by its table.

    ``table[j, n]`` is ``j o n``.  Associativity is checked on construction.
    Use :meth:`from_one_based` for tables written with 1-based labels.
    """

    table: np.ndarray = field(repr=False)

    def __post_init__(self):
        t = np.asarray(self.table)
        if t.ndim != 2 or t.shape[0] != t.shape[1] or t.shape[0] < 1:
            raise ValueError(f"operation table must be (m, m), got {t.shape}")
        if not np.issubdtype(t.dtype, np.integer):
            if not np.all(np.equal(np.mod(t, 1), 0)):
                raise ValueError("operation table must hold integer labels")
        t = t.astype(np.intp)
        m = t.shape[0]
        if t.min() < 0 or t.max() >= m:
            raise ValueError(f"operation values must lie in 0..{m - 1}")
        # (j o n) o p == j o (n o p) for all triples
        left = t[t, :]                      # left[j, n, p] = (j o n) o p
        right = t[:, t]                     # right[j, n, p] = j o (n o p)
        bad = np.argwhere(left != right)
        if bad.size:
            j, n, p = bad[0]
            raise ValueError(f"operation is not associative at (j, n, p) = ({j}, {n}, {p})")
        t.setflags(write=False)
        object.__setattr__(self, "table", t)

    @property
    def dim(self) -> int:
        return self.table.shape[0]

    @classmethod
    def from_one_based(cls, table: Sequence[Sequence[int]]) -> "AssocOp":
        return cls(np.asarray(table, dtype=np.intp) - 1)

    def to_one_based(self) -> list[list[int]]:
        return (self.table + 1).tolist()

    @classmethod
    def left(cls, m: int) -> "AssocOp":
        """``j o n = j``; the general product then coincides with rule D."""
        return cls(np.repeat(np.arange(m)[:, None], m, axis=1))

    @classmethod
    def right(cls, m: int) -> "AssocOp":
        """``j o n = n``; the general product then coincides with rule E."""
        return cls(np.repeat(np.arange(m)[None, :], m, axis=0))

    @classmethod
    def constant(cls, m: int, value: int = 0) -> "AssocOp":
        return cls(np.full((m, m), value, dtype=np.intp))

    def __eq__(self, other):
        return isinstance(other, AssocOp) and np.array_equal(self.table, other.table)

    def __hash__(self):
        return hash(self.table.tobytes())


def mul_general(A, B, op: AssocOp) -> np.ndarray:
    r"""General product: :math:`(i,j,k)(l,n,r) = \delta_{kl}\,(i, j\circ n, r)`.

    Contributions :math:`\sum_k a_{ijk} b_{knr}` are accumulated into middle
    index ``op(j, n)``.
    """
    A, B = _check_pair(A, B)
    if op.dim != A.shape[0]:
        raise ValueError(f"operation acts on {op.dim} labels, matrices have dim {A.shape[0]}")
    m = A.shape[0]
    pair = np.einsum("ijk,knr->ijnr", A, B)
    out = np.zeros_like(A)
    # fixed (j, n) order keeps accumulation bitwise reproducible
    for j in range(m):
        for n in range(m):
            out[:, op.table[j, n], :] += pair[:, j, n, :]
    return out


_RULES = {"C": mul_c, "D": mul_d, "E": mul_e}


def multiply(A, B, rule: str) -> np.ndarray:
    """Dispatch to :func:`mul_c`, :func:`mul_d` or :func:`mul_e` by rule letter."""
    try:
        fn = _RULES[str(rule).upper()]
    except KeyError:
        raise ValueError(f"unknown multiplication rule {rule!r}; expected C, D or E") from None
    return fn(A, B)


# --------------------------------------------------------------------------
# reductions to square matrices
# --------------------------------------------------------------------------


def layer(M, j: int) -> np.ndarray:
    """The ``j``-th layer ``(c_ijk)_{i,k}`` at fixed middle index (0-based ``j``)."""
    M = as_cubic(M)
    m = M.shape[0]
    if not 0 <= j < m:
        raise IndexError(f"layer index {j} out of range for dim {m}")
    return M[:, j, :].copy()


def collapse(M) -> np.ndarray:
    """Middle-index sum ``cbar_ik = sum_j c_ijk``."""
    return as_cubic(M).sum(axis=1)


# --------------------------------------------------------------------------
# predicates and operators
# --------------------------------------------------------------------------


def check_stochastic(M, kind: StochasticityKind | str, tol: float = DEFAULT_TOL) -> bool:
    """Nonnegativity (up to ``-tol``) plus the sum conditions of ``kind``."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    M = as_cubic(M)
    kind = StochasticityKind(kind)
    m = M.shape[0]
    if M.min() < -tol:
        return False

    def near(sums, target):
        return bool(np.max(np.abs(sums - target)) <= tol)

    if kind is StochasticityKind.K:
        return near(M.sum(axis=2), 1.0)
    if kind is StochasticityKind.PAIR12:
        return near(M.sum(axis=(0, 1)), 1.0)
    if kind is StochasticityKind.PAIR13:
        return near(M.sum(axis=(0, 2)), 1.0)
    pair23 = near(M.sum(axis=(1, 2)), 1.0)
    if kind is StochasticityKind.PAIR23:
        return pair23
    return pair23 and near(M.sum(axis=0), 1.0 / m)


def algebra_product(M, u, v) -> np.ndarray:
    """Bilinear product ``w_k = sum_ij u_i v_j c_ijk`` of two algebra elements."""
    M = as_cubic(M)
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    m = M.shape[0]
    if u.shape != (m,) or v.shape != (m,):
        raise ValueError(f"vectors must have shape ({m},)")
    return np.einsum("i,j,ijk->k", u, v, M)


def qso_apply(M, x, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Quadratic stochastic operator ``x'_k = sum_ij p_ijk x_i x_j``.

    Raises
    ------
    ValueError
        If ``M`` is not K-stochastic and symmetric in ``(i, j)`` within ``tol``,
        or ``x`` is not on the simplex.
    """
    M = as_cubic(M)
    x = as_distribution(x)
    if x.size != M.shape[0]:
        raise ValueError(f"distribution has {x.size} weights, matrix has dim {M.shape[0]}")
    if not check_stochastic(M, StochasticityKind.K, tol):
        raise ValueError("matrix is not stochastic over the last index")
    if np.max(np.abs(M - M.transpose(1, 0, 2))) > tol:
        raise ValueError("matrix is not symmetric in its first two indices")
    return np.einsum("ijk,i,j->k", M, x, x)


def _commutator_defect(M: np.ndarray) -> float:
    return float(np.max(np.abs(M - M.transpose(1, 0, 2))))


def associator_defect(M) -> float:
    """``max |sum_r c_ijr c_rkl - sum_r c_irl c_jkr|`` over all ``(i, j, k, l)``."""
    M = as_cubic(M)
    lhs = np.einsum("ijr,rkl->ijkl", M, M)   # (e_i e_j) e_k
    rhs = np.einsum("irl,jkr->ijkl", M, M)   # e_i (e_j e_k)
    return float(np.max(np.abs(lhs - rhs)))


def check_algebra_property(M, prop: AlgebraProperty | str, tol: float = DEFAULT_TOL) -> bool:
    """Decide an algebraic property of the algebra with structural constants ``M``.

    Baric uses the symmetric-constants-with-unit-row-sums criterion, and the
    evolution-algebra test only looks at the given basis.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    M = as_cubic(M)
    prop = AlgebraProperty(prop)
    if prop is AlgebraProperty.COMMUTATIVE:
        return _commutator_defect(M) <= tol
    if prop is AlgebraProperty.ASSOCIATIVE:
        return associator_defect(M) <= tol
    if prop is AlgebraProperty.BARIC:
        return _commutator_defect(M) <= tol and float(np.max(np.abs(M.sum(axis=2) - 1.0))) <= tol
    off = ~np.eye(M.shape[0], dtype=bool)
    if not off.any():
        return True
    return float(np.max(np.abs(M[off]))) <= tol
