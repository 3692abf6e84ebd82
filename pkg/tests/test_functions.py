import json
import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from algflow.functions import (
    VALIDATION_TIMES,
    Const,
    Cos,
    DescriptorError,
    Exp,
    Geom,
    Poly,
    Product,
    Recip,
    Sin,
    Sum,
    descriptor,
    descriptor_from_json,
)

times = st.floats(0, 20, allow_nan=False)


@given(times)
def test_elementary_values(t):
    assert Const(2.5)(t) == 2.5
    assert Poly((1.0, -2.0, 0.5))(t) == pytest.approx(1 - 2 * t + 0.5 * t * t, rel=1e-12, abs=1e-12)
    assert Exp(0.3)(t) == math.exp(0.3 * t)
    assert Geom(2.0)(t) == pytest.approx(2.0**t, rel=1e-15)
    assert Sin(2.0, 0.1)(t) == math.sin(2 * t + 0.1)
    assert Cos()(t) == math.cos(t)


def test_composites_and_operator_sugar():
    f = Exp(1.0) * 2 + Sin()
    assert isinstance(f, Sum)
    assert f(0.5) == pytest.approx(2 * math.exp(0.5) + math.sin(0.5))
    g = 3 * Poly((0.0, 1.0))
    assert isinstance(g, Product) and g(2.0) == 6.0
    assert (-Const(4.0))(1.0) == -4.0
    assert (1 + Const(1.0))(0.0) == 2.0


def test_recip_guard():
    half_inv = Recip(Product((Const(2.0), Exp(1.0))))
    assert half_inv(0.0) == 0.5
    with pytest.raises(DescriptorError, match="reciprocal"):
        Recip(Sin())(0.0)


def test_invalid_parameters():
    with pytest.raises(DescriptorError):
        Geom(0.0)
    with pytest.raises(DescriptorError):
        Const(float("nan"))
    with pytest.raises(DescriptorError):
        Poly(())
    with pytest.raises(DescriptorError):
        descriptor("exp")
    with pytest.raises(DescriptorError):
        descriptor(True)


@pytest.mark.parametrize(
    "doc",
    [
        {"fn": "nope"},
        {"value": 1.0},
        {"fn": "exp"},
        {"fn": "poly", "coeffs": 3},
        {"fn": "sum", "terms": [{"fn": "const"}]},
    ],
)
def test_malformed_json_descriptors(doc):
    with pytest.raises(DescriptorError):
        descriptor_from_json(doc)


def _trees():
    leaves = st.one_of(
        st.builds(Const, st.floats(-5, 5)),
        st.builds(lambda cs: Poly(tuple(cs)), st.lists(st.floats(-3, 3), min_size=1, max_size=4)),
        st.builds(Exp, st.floats(-2, 2)),
        st.builds(Geom, st.floats(0.1, 4)),
        st.builds(Sin, st.floats(-3, 3), st.floats(-3, 3)),
        st.builds(Cos, st.floats(-3, 3), st.floats(-3, 3)),
    )
    return st.recursive(
        leaves,
        lambda inner: st.one_of(
            st.builds(lambda xs: Sum(tuple(xs)), st.lists(inner, min_size=1, max_size=3)),
            st.builds(lambda xs: Product(tuple(xs)), st.lists(inner, min_size=1, max_size=3)),
            st.builds(Recip, inner),
        ),
        max_leaves=6,
    )


@given(_trees())
def test_json_round_trip_is_exact(f):
    back = descriptor_from_json(json.loads(json.dumps(f.to_json())))
    assert back == f
    assert back.to_json() == f.to_json()


def test_validation_times():
    assert VALIDATION_TIMES[0] == 0.0
    assert len(VALIDATION_TIMES) == 64
    assert VALIDATION_TIMES[1] == pytest.approx(1e-2) and VALIDATION_TIMES[-1] == pytest.approx(100.0)
