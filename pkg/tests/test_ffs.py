from __future__ import annotations

import random
from fractions import Fraction

import pytest

import oracles
from ffskit.ffs import (
    FormalSeries,
    GaussianRationalRing,
    InconclusiveTruncation,
    RationalRing,
    ideal_membership,
    is_symmetric,
    lambda_,
    multiply,
    symmetrize,
)
from ffskit.numberfield import rationals, real_quadratic_golden
from ffskit.symcone import ConeLattice, SymMatF

QQ = rationals()
GOLD = real_quadratic_golden()
RAT = RationalRing()
CONE1 = ConeLattice(QQ, 1, nu=1)
CONE2 = ConeLattice(QQ, 2, nu=1)


def mat1(v):
    return SymMatF(QQ, [[v]])


def series1(bound, data):
    coeffs = {mat1(k): Fraction(v) for k, v in data.items()}
    return FormalSeries(CONE1, bound, RAT, coeffs)


def test_series_validation():
    with pytest.raises(ValueError):
        series1(3, {5: 1})  # beyond bound
    with pytest.raises(ValueError):
        FormalSeries(CONE1, 3, RAT, {mat1(Fraction(1, 2)): Fraction(1)})
    with pytest.raises(ValueError):
        FormalSeries(CONE1, 3, RAT, {mat1(-1): Fraction(1)})
    f = series1(3, {1: 1, 2: 0})
    assert f.support() == (mat1(1),)  # zero coefficients pruned
    assert f.coefficient(mat1(2)) == 0


def test_multiply_rank1_is_power_series_product():
    # (1 + q + q^2 + q^3) * (1 - q) = 1 - q^4, truncated at height 3
    f = series1(3, {0: 1, 1: 1, 2: 1, 3: 1})
    g = series1(3, {0: 1, 1: -1})
    h = multiply(f, g)
    assert h.constant_term == 1
    assert h.support() == ()
    # (1 + q)^2 = 1 + 2q + q^2
    f2 = series1(5, {0: 1, 1: 1})
    sq = multiply(f2, f2)
    assert sq.constant_term == 1
    assert sq.coefficient(mat1(1)) == 2
    assert sq.coefficient(mat1(2)) == 1


def test_multiply_truncates_at_min_bound():
    f = series1(10, {i: 1 for i in range(0, 11)})
    g = series1(4, {0: 1})
    h = multiply(f, g)
    assert h.height_bound == 4
    assert len(h.support()) == 4


def test_unit_is_identity():
    one = FormalSeries.unit(CONE2, 5, RAT)
    t = SymMatF(QQ, [[1, Fraction(1, 2)], [Fraction(1, 2), 2]])
    f = FormalSeries(CONE2, 5, RAT, {t: Fraction(7), SymMatF.zero(QQ, 2): Fraction(2)})
    assert multiply(one, f) == f
    assert multiply(f, one) == f


def test_ring_axioms_spot():
    rng = random.Random(1)
    pts = [SymMatF.zero(QQ, 1)] + [mat1(k) for k in range(1, 7)]

    def rand_series():
        return FormalSeries(
            CONE1, 6, RAT, {p: Fraction(rng.randint(-4, 4)) for p in rng.sample(pts, 4)}
        )

    for _ in range(20):
        a, b, c = rand_series(), rand_series(), rand_series()
        assert multiply(a, b) == multiply(b, a)
        assert multiply(multiply(a, b), c) == multiply(a, multiply(b, c))
        assert multiply(a, b + c) == multiply(a, b) + multiply(a, c)


def test_gaussian_ring():
    ring = GaussianRationalRing()
    i = (Fraction(0), Fraction(1))
    assert ring.mul(i, i) == ring.neg(ring.one())
    f = FormalSeries(CONE1, 2, ring, {mat1(1): i})
    sq = multiply(f, f)
    assert sq.coefficient(mat1(2)) == ring.neg(ring.one())


def test_lambda_rank1_is_height():
    for k in range(1, 9):
        assert lambda_(CONE1, mat1(k)) == k
        assert lambda_(CONE1, mat1(k)) == oracles.naive_lambda_q(((Fraction(k),),))


def test_lambda_rank2_spec_value():
    t = SymMatF(QQ, [[1, Fraction(1, 2)], [Fraction(1, 2), 1]])
    assert lambda_(CONE2, t) == 1
    eye = SymMatF(QQ, [[1, 0], [0, 1]])
    assert lambda_(CONE2, eye) == 2
    # [[2,1],[1,2]] = diag(1,0) + diag(0,1) + the rank-one all-ones matrix
    two = SymMatF(QQ, [[2, 1], [1, 2]])
    assert lambda_(CONE2, two) == 3


def test_lambda_rank2_matches_oracle():
    for t in CONE2.enumerate_cone(4):
        rows = tuple(tuple(e.coords[0] for e in row) for row in t.rows)
        assert lambda_(CONE2, t) == oracles.naive_lambda_q(rows)


def test_lambda_golden():
    cone = ConeLattice(GOLD, 1, nu=1)
    # 1 = (2 + phi)/5 + (3 - phi)/5, both totally positive dual points of trace 1
    one = SymMatF(GOLD, [[GOLD.one()]])
    assert lambda_(cone, one) == 2
    # phi^2 has trace 3 but only admits one nontrivial split: via (2 + phi)/5
    phi2 = SymMatF(GOLD, [[GOLD.element([1, 1])]])
    assert lambda_(cone, phi2) == 2
    with pytest.raises(ValueError):
        lambda_(cone, SymMatF(GOLD, [[GOLD.element([0, 1])]]))  # phi outside cone


def test_lambda_rejects_non_lattice():
    with pytest.raises(ValueError):
        lambda_(CONE1, mat1(Fraction(1, 2)))
    with pytest.raises(ValueError):
        lambda_(CONE1, SymMatF.zero(QQ, 1))


def test_ideal_membership_basic():
    # q + ... with nonzero constant term is in no ideal power
    f = series1(6, {0: 1, 1: 1})
    assert not ideal_membership(f, 1)
    g = series1(6, {1: 1})
    assert ideal_membership(g, 1)
    assert not ideal_membership(g, 2)
    # q^2 has lambda = 2: in I^2 but not I^3
    h = series1(6, {2: 1})
    assert ideal_membership(h, 1)
    assert ideal_membership(h, 2)
    assert not ideal_membership(h, 3)


def test_ideal_membership_products():
    # products of k ideal elements always satisfy the length-k vanishing test
    rng = random.Random(5)
    for _ in range(10):
        ks = [rng.randint(1, 3) for _ in range(3)]
        fs = [
            series1(9, {k: 1, k + rng.randint(1, 2): rng.randint(-3, 3)}) for k in ks
        ]
        prod = fs[0]
        for f in fs[1:]:
            prod = multiply(prod, f)
        assert ideal_membership(prod, 3)


def test_ideal_membership_truncation_guard():
    f = series1(2, {1: 1})
    with pytest.raises(InconclusiveTruncation):
        ideal_membership(f, 5)


def test_symmetrize_and_is_symmetric():
    shear = [[1, 1], [0, 1]]
    t = SymMatF(QQ, [[0, 0], [0, 1]])
    f = FormalSeries(CONE2, 5, RAT, {t: Fraction(3)})
    g, complete = symmetrize(f, [shear])
    assert not complete  # orbit leaves the ball
    assert g.coefficient(t) == 3
    onez = SymMatF(QQ, [[1, 1], [1, 1]])
    assert g.coefficient(onez) == 3
    assert is_symmetric(g, [shear])
    assert not is_symmetric(f, [shear])
    # constant terms ride along unchanged
    f2 = f + FormalSeries.unit(CONE2, 5, RAT)
    g2, _ = symmetrize(f2, [shear])
    assert g2.constant_term == 1


def test_symmetrize_sums_orbit_weights():
    shear = [[1, 1], [0, 1]]
    t = SymMatF(QQ, [[0, 0], [0, 1]])
    onez = SymMatF(QQ, [[1, 1], [1, 1]])
    f = FormalSeries(CONE2, 5, RAT, {t: Fraction(3), onez: Fraction(4)})
    g, _ = symmetrize(f, [shear])
    assert g.coefficient(t) == 7
    assert g.coefficient(onez) == 7


def test_symmetrize_complete_orbit():
    # swapping the two coordinates is a finite group; orbits close inside the ball
    swap = [[0, 1], [1, 0]]
    t = SymMatF(QQ, [[1, 0], [0, 2]])
    f = FormalSeries(CONE2, 5, RAT, {t: Fraction(1)})
    g, complete = symmetrize(f, [swap])
    assert complete
    t2 = SymMatF(QQ, [[2, 0], [0, 1]])
    assert g.coefficient(t2) == 1
    assert is_symmetric(g, [swap])


def test_series_file_round_trip():
    from ffskit.ffs import series_from_json_lines, series_to_json_lines

    f = series1(6, {1: "1/2", 2: 3, 5: -4}) + FormalSeries.unit(CONE1, 6, RAT)
    lines = series_to_json_lines(f)
    # header carries the cone data; term lines are height-sorted
    assert '"ring":"rational"' in lines[0]
    assert len(lines) == 1 + 4
    back = series_from_json_lines(lines)
    assert back == f
    assert series_to_json_lines(back) == lines

    gauss = GaussianRationalRing()
    g = FormalSeries(CONE1, 3, gauss, {mat1(1): (Fraction(1), Fraction(-2))})
    assert series_from_json_lines(series_to_json_lines(g)) == g

    with pytest.raises(ValueError):
        series_from_json_lines([])
    with pytest.raises(ValueError):
        series_from_json_lines(lines[:1] + [lines[1], lines[1]])
