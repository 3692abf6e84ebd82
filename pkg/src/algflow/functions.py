"""Serializable elementary functions of time.

Flow families take parameter *functions* of time (a normalizing function,
free coefficient functions, entries of an invertible matrix family).  These
are described by small immutable expression trees that evaluate at a float
``t`` and round-trip through JSON as nested tagged objects, e.g.
``{"fn": "exp", "rate": 1.0}``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

__all__ = [
    "Const",
    "Cos",
    "DescriptorError",
    "Exp",
    "FunctionDescriptor",
    "Geom",
    "Poly",
    "Product",
    "Recip",
    "Sin",
    "Sum",
    "VALIDATION_TIMES",
    "descriptor",
    "descriptor_from_json",
]

RECIP_GUARD = 1e-12

# 0 plus 63 log-spaced points on [1e-2, 100]
VALIDATION_TIMES: tuple[float, ...] = (0.0,) + tuple(float(v) for v in np.geomspace(1e-2, 100.0, 63))


class DescriptorError(ValueError):
    """A descriptor cannot be evaluated (singular reciprocal, bad parameters)."""


class FunctionDescriptor:
    """Base class; subclasses are frozen dataclasses implementing ``__call__``."""

    tag: str = ""

    def __call__(self, t: float) -> float:  # pragma: no cover - abstract
        raise NotImplementedError

    def to_json(self) -> dict:  # pragma: no cover - abstract
        raise NotImplementedError

    def __add__(self, other):
        return Sum((self, descriptor(other)))

    def __radd__(self, other):
        return Sum((descriptor(other), self))

    def __mul__(self, other):
        return Product((self, descriptor(other)))

    def __rmul__(self, other):
        return Product((descriptor(other), self))

    def __neg__(self):
        return Product((Const(-1.0), self))


def _float(x, name: str) -> float:
    try:
        v = float(x)
    except (TypeError, ValueError):
        raise DescriptorError(f"{name} must be a number, got {x!r}") from None
    if not math.isfinite(v):
        raise DescriptorError(f"{name} must be finite")
    return v


@dataclass(frozen=True)
class Const(FunctionDescriptor):
    value: float
    tag = "const"

    def __post_init__(self):
        object.__setattr__(self, "value", _float(self.value, "const value"))

    def __call__(self, t):
        return self.value

    def to_json(self):
        return {"fn": self.tag, "value": self.value}


@dataclass(frozen=True)
class Poly(FunctionDescriptor):
    """Polynomial with coefficients in ascending powers: ``c0 + c1 t + ...``."""

    coeffs: tuple[float, ...]
    tag = "poly"

    def __post_init__(self):
        cs = tuple(_float(c, "poly coefficient") for c in self.coeffs)
        if not cs:
            raise DescriptorError("poly needs at least one coefficient")
        object.__setattr__(self, "coeffs", cs)

    def __call__(self, t):
        acc = 0.0
        for c in reversed(self.coeffs):
            acc = acc * t + c
        return acc

    def to_json(self):
        return {"fn": self.tag, "coeffs": list(self.coeffs)}


@dataclass(frozen=True)
class Exp(FunctionDescriptor):
    """``exp(rate * t)``."""

    rate: float
    tag = "exp"

    def __post_init__(self):
        object.__setattr__(self, "rate", _float(self.rate, "exp rate"))

    def __call__(self, t):
        return math.exp(self.rate * t)

    def to_json(self):
        return {"fn": self.tag, "rate": self.rate}


@dataclass(frozen=True)
class Geom(FunctionDescriptor):
    """``base ** t`` with ``base > 0``."""

    base: float
    tag = "geom"

    def __post_init__(self):
        b = _float(self.base, "geom base")
        if b <= 0:
            raise DescriptorError("geom base must be positive")
        object.__setattr__(self, "base", b)

    def __call__(self, t):
        return self.base**t

    def to_json(self):
        return {"fn": self.tag, "base": self.base}


@dataclass(frozen=True)
class Sin(FunctionDescriptor):
    """``sin(omega * t + phi)``."""

    omega: float = 1.0
    phi: float = 0.0
    tag = "sin"

    def __post_init__(self):
        object.__setattr__(self, "omega", _float(self.omega, "omega"))
        object.__setattr__(self, "phi", _float(self.phi, "phi"))

    def __call__(self, t):
        return math.sin(self.omega * t + self.phi)

    def to_json(self):
        return {"fn": self.tag, "omega": self.omega, "phi": self.phi}


@dataclass(frozen=True)
class Cos(FunctionDescriptor):
    """``cos(omega * t + phi)``."""

    omega: float = 1.0
    phi: float = 0.0
    tag = "cos"

    def __post_init__(self):
        object.__setattr__(self, "omega", _float(self.omega, "omega"))
        object.__setattr__(self, "phi", _float(self.phi, "phi"))

    def __call__(self, t):
        return math.cos(self.omega * t + self.phi)

    def to_json(self):
        return {"fn": self.tag, "omega": self.omega, "phi": self.phi}


@dataclass(frozen=True)
class Recip(FunctionDescriptor):
    """``1 / inner(t)``; evaluation fails where ``|inner(t)| <= 1e-12``."""

    inner: FunctionDescriptor
    tag = "recip"

    def __post_init__(self):
        object.__setattr__(self, "inner", descriptor(self.inner))

    def __call__(self, t):
        v = self.inner(t)
        if abs(v) <= RECIP_GUARD:
            raise DescriptorError(f"reciprocal of {v!r} at t={t!r}")
        return 1.0 / v

    def to_json(self):
        return {"fn": self.tag, "inner": self.inner.to_json()}


@dataclass(frozen=True)
class Sum(FunctionDescriptor):
    terms: tuple[FunctionDescriptor, ...]
    tag = "sum"

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(descriptor(f) for f in self.terms))

    def __call__(self, t):
        return math.fsum(f(t) for f in self.terms)

    def to_json(self):
        return {"fn": self.tag, "terms": [f.to_json() for f in self.terms]}


@dataclass(frozen=True)
class Product(FunctionDescriptor):
    factors: tuple[FunctionDescriptor, ...]
    tag = "product"

    def __post_init__(self):
        object.__setattr__(self, "factors", tuple(descriptor(f) for f in self.factors))

    def __call__(self, t):
        acc = 1.0
        for f in self.factors:
            acc *= f(t)
        return acc

    def to_json(self):
        return {"fn": self.tag, "factors": [f.to_json() for f in self.factors]}


def descriptor(value) -> FunctionDescriptor:
    """Coerce numbers to :class:`Const` and JSON mappings to descriptors."""
    if isinstance(value, FunctionDescriptor):
        return value
    if isinstance(value, Mapping):
        return descriptor_from_json(value)
    if isinstance(value, (int, float, np.floating, np.integer)) and not isinstance(value, bool):
        return Const(float(value))
    raise DescriptorError(f"cannot interpret {value!r} as a function of time")


def _list(doc: Mapping, key: str) -> Sequence:
    v = doc.get(key)
    if not isinstance(v, (list, tuple)):
        raise DescriptorError(f"descriptor field {key!r} must be a list")
    return v


def descriptor_from_json(doc: Mapping) -> FunctionDescriptor:
    if not isinstance(doc, Mapping) or "fn" not in doc:
        raise DescriptorError(f"descriptor must be an object with an 'fn' tag, got {doc!r}")
    tag = doc["fn"]
    try:
        if tag == "const":
            return Const(doc["value"])
        if tag == "poly":
            return Poly(tuple(_list(doc, "coeffs")))
        if tag == "exp":
            return Exp(doc["rate"])
        if tag == "geom":
            return Geom(doc["base"])
        if tag == "sin":
            return Sin(doc.get("omega", 1.0), doc.get("phi", 0.0))
        if tag == "cos":
            return Cos(doc.get("omega", 1.0), doc.get("phi", 0.0))
        if tag == "recip":
            return Recip(descriptor_from_json(doc["inner"]))
        if tag == "sum":
            return Sum(tuple(descriptor_from_json(d) for d in _list(doc, "terms")))
        if tag == "product":
            return Product(tuple(descriptor_from_json(d) for d in _list(doc, "factors")))
    except KeyError as exc:
        raise DescriptorError(f"descriptor {tag!r} is missing field {exc.args[0]!r}") from None
    raise DescriptorError(f"unknown descriptor tag {tag!r}")
