from __future__ import annotations

from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from ffskit.numberfield import (
    FieldValidationError,
    NumberField,
    isolate_real_roots,
    poly_discriminant,
    poly_gcd,
    poly_resultant,
    rationals,
    real_quadratic_golden,
)

QQ = rationals()
GOLD = real_quadratic_golden()
PHI = GOLD.element([0, 1])


def test_poly_resultant_and_discriminant():
    # disc(x^2 - x - 1) = 5, disc(x^2 - 2) = 8
    assert poly_discriminant((Fraction(-1), Fraction(-1), Fraction(1))) == 5
    assert poly_discriminant((Fraction(-2), Fraction(0), Fraction(1))) == 8
    # res(x - 2, x - 3) = 2 - 3... res(f, g) = prod f-roots of g = g(2) = -1
    assert poly_resultant((Fraction(-2), Fraction(1)), (Fraction(-3), Fraction(1))) == -1


def test_isolate_real_roots_ordering():
    # (x^2 - 2)(x^2 - 3) has roots -sqrt3 < -sqrt2 < sqrt2 < sqrt3
    p = (Fraction(6), Fraction(0), Fraction(-5), Fraction(0), Fraction(1))
    ivs = isolate_real_roots(p)
    assert len(ivs) == 4
    for (_, h1), (l2, _) in zip(ivs, ivs[1:]):
        assert h1 <= l2


def test_validation_rejects_bad_fields():
    with pytest.raises(FieldValidationError):
        NumberField([1, 0, 1])  # x^2 + 1 not totally real
    with pytest.raises(FieldValidationError):
        NumberField([-1, 0, 1])  # x^2 - 1 reducible
    with pytest.raises(FieldValidationError):
        NumberField([-2, 0, 2])  # not monic
    with pytest.raises(FieldValidationError):
        NumberField([-1, -1, 1], integral_basis=[["1", "0"], ["0", "1/2"]])
    with pytest.raises(FieldValidationError):
        # isolators out of order
        NumberField([-1, -1, 1], isolators=[["1", "2"], ["-1", "0"]])
    with pytest.raises(FieldValidationError):
        # isolator containing both roots
        NumberField([-1, -1, 1], isolators=[["-2", "2"], ["1", "2"]])


def test_nonmaximal_but_closed_order_is_accepted():
    # Z + 2*phi*Z is multiplicatively closed; the trace form must still match
    f = NumberField([-1, -1, 1], integral_basis=[["1", "0"], ["0", "2"]])
    assert f.trace(f.element([0, 1])) == 2  # trace of 2*phi


def test_rational_field_basics():
    five = QQ.coerce(5)
    assert QQ.trace(five) == 5
    assert QQ.norm(five) == 5
    assert (five * five).coords == (Fraction(25),)
    assert QQ.embed(five, 1, Fraction(1, 1000)) == (Fraction(5), Fraction(5))
    assert QQ.sign_at(QQ.coerce(-3), 1) == -1
    assert QQ.is_totally_positive(QQ.coerce(2))
    assert not QQ.is_totally_positive(QQ.zero())
    assert QQ.is_totally_nonnegative(QQ.zero())


def test_golden_trace_norm():
    assert GOLD.trace(PHI) == 1
    assert GOLD.norm(PHI) == -1
    assert GOLD.trace(PHI * PHI) == 3
    assert GOLD.trace_gram() == ((Fraction(2), Fraction(1)), (Fraction(1), Fraction(3)))
    # cross-check trace and norm against the hand-rolled oracle on a few elements
    for a, b in [(1, 0), (0, 1), (2, -3), (-1, 4), (7, 7)]:
        x = GOLD.element([a, b])
        assert GOLD.trace(x) == oracles.phi_trace((a, b))
        assert GOLD.norm(x) == oracles.phi_norm((a, b))


def test_golden_multiplication_matches_oracle():
    for a, b, c, d in [(1, 2, 3, 4), (0, 1, 0, 1), (-2, 5, 7, -3)]:
        x = GOLD.element([a, b])
        y = GOLD.element([c, d])
        assert (x * y).coords == tuple(
            map(Fraction, oracles.phi_mul((a, b), (c, d)))
        )


def test_embeddings_increasing_and_tight():
    eps = Fraction(1, 10**12)
    lo1, hi1 = GOLD.embed(PHI, 1, eps)
    lo2, hi2 = GOLD.embed(PHI, 2, eps)
    assert hi1 - lo1 < eps and hi2 - lo2 < eps
    assert hi1 < lo2  # embedding 1 is the smaller root
    # (1 - sqrt5)/2 ~ -0.6180..., (1 + sqrt5)/2 ~ 1.6180...
    assert abs((lo1 + hi1) / 2 + Fraction(6180, 10000)) < Fraction(1, 1000)
    assert abs((lo2 + hi2) / 2 - Fraction(16180, 10000)) < Fraction(1, 1000)
    # each interval straddles a genuine root of the minimal polynomial
    from ffskit.numberfield import count_real_roots

    assert count_real_roots(GOLD.min_poly, lo1 - eps, hi1 + eps) == 1
    assert count_real_roots(GOLD.min_poly, lo2 - eps, hi2 + eps) == 1
    # interval arithmetic respects exact rational translation
    lo, hi = GOLD.embed(PHI + 1, 2, eps)
    assert abs(lo - (lo2 + 1)) < 2 * eps


def test_signs_and_total_positivity():
    assert GOLD.signs(PHI) == (-1, 1)
    assert GOLD.signs(PHI * PHI) == (1, 1)
    assert GOLD.sign_at(GOLD.zero(), 1) == 0
    assert GOLD.is_totally_positive(PHI * PHI)
    assert not GOLD.is_totally_positive(PHI)
    assert GOLD.is_totally_nonnegative(PHI * PHI)
    # 2 - phi = (3 - sqrt5)/2 and its conjugate (3 + sqrt5)/2: totally positive
    assert GOLD.is_totally_positive(GOLD.coerce(2) - PHI)
    for a, b in [(1, 1), (3, -1), (-1, 1), (0, 2), (5, -2)]:
        x = GOLD.element([a, b])
        assert GOLD.is_totally_nonnegative(x) == oracles.phi_is_totally_nonneg((a, b))


def test_inverse_and_division():
    inv = PHI.inverse()
    assert (PHI * inv) == GOLD.one()
    assert inv == PHI - 1  # 1/phi = phi - 1
    with pytest.raises(ZeroDivisionError):
        GOLD.zero().inverse()
    assert (GOLD.one() / PHI) == inv


def test_inverse_different_golden():
    d1, d2 = GOLD.inverse_different()
    b1, b2 = GOLD.one(), PHI
    assert GOLD.trace(d1 * b1) == 1 and GOLD.trace(d1 * b2) == 0
    assert GOLD.trace(d2 * b1) == 0 and GOLD.trace(d2 * b2) == 1
    # d2 = (2 phi - 1)/5 = 1/sqrt5
    assert d2.coords == (Fraction(-1, 5), Fraction(2, 5))
    assert (d2 * d2).coords == (Fraction(1, 5), Fraction(0))


def test_inverse_different_rationals():
    (d1,) = QQ.inverse_different()
    assert d1 == QQ.one()


def test_quadratic_conjugation():
    tau = GOLD.quadratic_conjugation
    assert tau(PHI) == GOLD.one() - PHI
    for a, b in [(1, 2), (0, 1), (-3, 5)]:
        x = GOLD.element([a, b])
        assert tau(tau(x)) == x
        assert GOLD.coerce(GOLD.trace(x)) == x + tau(x)
        assert GOLD.coerce(GOLD.norm(x)) == x * tau(x)


def test_coordinate_bound_certifies_boxes():
    elems = [GOLD.one(), PHI]
    rho = GOLD.coordinate_bound(elems)
    assert rho > 0
    eps = Fraction(1, 10**6)
    for coords in [(3, -2), (0, 5), (-7, 1)]:
        x = GOLD.element(coords)
        h = Fraction(0)
        for j in (1, 2):
            lo, hi = GOLD.embed(x, j, eps)
            h = max(h, abs(lo), abs(hi))
        for c in coords:
            assert abs(Fraction(c)) <= rho * h


def test_json_roundtrip():
    data = GOLD.to_json_dict()
    again = NumberField.from_json_dict(data)
    assert again == GOLD
    assert again.trace(again.element([0, 1])) == 1


@settings(max_examples=60, deadline=None)
@given(
    st.lists(st.integers(-30, 30), min_size=2, max_size=2),
    st.lists(st.integers(-30, 30), min_size=2, max_size=2),
    st.lists(st.integers(-30, 30), min_size=2, max_size=2),
)
def test_field_axioms_golden(ac, bc, cc):
    a, b, c = GOLD.element(ac), GOLD.element(bc), GOLD.element(cc)
    assert (a + b) * c == a * c + b * c
    assert a * (b * c) == (a * b) * c
    assert a * b == b * a
    assert GOLD.trace(a + b) == GOLD.trace(a) + GOLD.trace(b)
    assert GOLD.norm(a * b) == GOLD.norm(a) * GOLD.norm(b)
    if not a.is_zero():
        assert a * a.inverse() == GOLD.one()


@settings(max_examples=30, deadline=None)
@given(st.integers(-100, 100), st.integers(1, 50))
def test_rational_field_matches_fractions(num, den):
    q = Fraction(num, den)
    x = QQ.coerce(q)
    assert QQ.trace(x) == q
    assert QQ.norm(x) == q
    assert QQ.sign_at(x, 1) == (0 if q == 0 else (1 if q > 0 else -1))
