"""Even quadratic lattices over a totally real field and their theta series.

A lattice is the free module O_F^rank with a totally positive-definite even
Gram matrix.  Representation numbers are computed exactly: vectors are
enumerated with a Fincke-Pohst search on the integer trace form (rational
LDL decomposition, LLL preconditioning, exact square-root floor bounds) and
then filtered by exact field equalities.  Theta series land in the formal
series ring; numeric evaluation is the only place floating point appears, and
it always reports a certified tail bound alongside the value.
"""
from __future__ import annotations

import itertools
import os
from fractions import Fraction

from . import _linalg
from .ffs import FormalSeries, RationalRing, multiply
from .numberfield import FieldElem, NumberField
from .symcone import ConeLattice, SymMatF, is_totally_psd

_RAT = RationalRing()


def _default_dps() -> int:
    return int(os.environ.get("FFSKIT_PRECISION", "50"))


class QuadLattice:
    """O_F^rank with an even totally positive-definite Gram matrix.

    gram[i][k] = (e_i, e_k) with diagonal entries in 2 O_F and off-diagonal
    entries in O_F; the quadratic form is Q(x) = (x, x)/2.
    """

    def __init__(self, field: NumberField, gram):
        self.field = field
        self.gram = SymMatF(field, gram)
        self.rank = self.gram.n
        d = field.degree
        for i in range(self.rank):
            for k in range(self.rank):
                e = self.gram.entry(i, k)
                if i == k:
                    e = e / 2
                if any(c.denominator != 1 for c in e.coords):
                    raise ValueError("Gram matrix must be even and integral over O_F")
        from .symcone import is_totally_pd

        if not is_totally_pd(self.gram):
            raise ValueError("Gram matrix must be totally positive definite")
        self.dim = self.rank * d
        # Z-basis pairing: P[(i,s),(k,t)] = b_s b_t (e_i, e_k), an element of O_F
        basis = [
            field.element([1 if r == s else 0 for r in range(d)]) for s in range(d)
        ]
        self._pair_field: list[list[FieldElem]] = []
        for i in range(self.rank):
            for s in range(d):
                row = []
                for k in range(self.rank):
                    for t in range(d):
                        row.append(basis[s] * basis[t] * self.gram.entry(i, k))
                self._pair_field.append(row)
        # integer trace form: A = tr(P), positive definite of size rank * degree
        self.trace_gram = _linalg.to_mat(
            [[field.trace(x) for x in row] for row in self._pair_field]
        )
        if any(c.denominator != 1 for row in self.trace_gram for c in row):
            raise AssertionError("trace form must be integral")
        if not _linalg.leading_minors_positive(self.trace_gram):
            raise AssertionError("trace form must be positive definite")
        self._lll_u = _linalg.lll_gram(self.trace_gram)
        self._trace_gram_inv = _linalg.inv_fraction(self.trace_gram)
        # per-coordinate pairing tables: _pair_coord[c][i][k] is the c-th field
        # coordinate of _pair_field[i][k]; ints whenever integral, so that the
        # theta inner loop runs on machine integers
        self._pair_coord = []
        for c in range(d):
            tbl = []
            for i in range(self.dim):
                row = []
                for k in range(self.dim):
                    x = self._pair_field[i][k].coords[c]
                    row.append(int(x) if x.denominator == 1 else x)
                tbl.append(tuple(row))
            self._pair_coord.append(tuple(tbl))
        self._shell_cache: dict = {}
        self._pair_cache: dict = {}

    # --- field-level pairing on integer coordinate vectors --------------------------

    def pairing(self, z, w) -> FieldElem:
        """(x, y) in F for lattice vectors with coordinate tuples z, w."""
        acc = self.field.zero()
        for i, zi in enumerate(z):
            if zi == 0:
                continue
            row = self._pair_field[i]
            for k, wk in enumerate(w):
                if wk == 0:
                    continue
                acc = acc + row[k] * (zi * wk)
        return acc

    def quad_value(self, z) -> FieldElem:
        return self.pairing(z, z) / 2

    def trace_quad(self, z) -> Fraction:
        """tr_{F/Q} Q(x) = z^T A z / 2 for integer coordinates z."""
        acc = Fraction(0)
        for i, zi in enumerate(z):
            if zi == 0:
                continue
            row = self.trace_gram[i]
            for k, wk in enumerate(z):
                if wk:
                    acc += row[k] * zi * wk
        return acc / 2

    # --- vector enumeration ------------------------------------------------------------

    def vectors_with_trace_norm_at_most(self, bound, center=None):
        """All lattice coordinate vectors z (plus the rational center, if any)
        with (z + center)^T A (z + center) <= bound; exact."""
        bound = Fraction(bound)
        if bound < 0:
            return []
        return _fp_enumerate(self.trace_gram, self._lll_u, bound, center)

    # --- representation numbers ----------------------------------------------------------

    def representation_number(self, t: SymMatF, mu=None, strict: bool = False) -> int:
        """Number of tuples (x_1 .. x_n) in mu + L^n with (x_a, x_b) = 2 t_ab.

        mu is an optional tuple of n dual-coset representatives, each given by
        its rational coordinates in the Z-basis (as produced by
        discriminant_group); omitted means the zero coset.  Non-PSD targets
        count zero tuples; with strict=True they raise instead.
        """
        if t.field != self.field:
            raise ValueError("matrix lives over a different field")
        mus = _normalize_cosets(self, t.n, mu)
        if not is_totally_psd(t):
            if strict:
                raise ValueError("target matrix is not totally positive semidefinite")
            return 0
        return self._count_tuples(t, mus)

    def _shell(self, taa: FieldElem, center):
        """All coset vectors with quadratic value exactly taa (memoized)."""
        key = (taa.coords, center)
        hit = self._shell_cache.get(key)
        if hit is not None:
            return hit
        goal = self.field.trace(taa)
        shell = []
        if not (center is None and goal.denominator != 1):
            for z in self.vectors_with_trace_norm_at_most(2 * goal, center=center):
                zi = tuple(int(c) if c.denominator == 1 else c for c in z)
                if self.trace_quad(zi) == goal and self.quad_value(zi) == taa:
                    shell.append(zi)
        self._shell_cache[key] = shell
        return shell

    def _pairing_cached(self, z, w) -> FieldElem:
        key = (z, w)
        p = self._pair_cache.get(key)
        if p is None:
            p = self.pairing(z, w)
            self._pair_cache[key] = p
        return p

    def _count_tuples(self, t: SymMatF, mus) -> int:
        """Exact tuple count by shell filtering; the target need not be PSD
        (unrealizable targets simply count zero)."""
        n = t.n
        cand: list[list[tuple]] = []
        for a in range(n):
            shell = self._shell(t.entry(a, a), None if mus is None else mus[a])
            if not shell:
                return 0
            cand.append(shell)
        count = 0
        chosen: list[tuple] = []

        def dfs(a):
            nonlocal count
            if a == n:
                count += 1
                return
            goals = [t.entry(b, a) * 2 for b in range(a)]
            for z in cand[a]:
                ok = True
                for b in range(a):
                    if self._pairing_cached(chosen[b], z) != goals[b]:
                        ok = False
                        break
                if ok:
                    chosen.append(z)
                    dfs(a + 1)
                    chosen.pop()

        dfs(0)
        return count

    # --- structure -----------------------------------------------------------------------

    def discriminant_group(self, rep_cap: int = 512):
        """Invariant factors of the dual quotient, via the Smith form of the
        trace Gram matrix; coset representatives are listed when the group
        order stays within rep_cap."""
        u, dmat, v = _linalg.smith_normal_form(
            [[int(x) for x in row] for row in self.trace_gram]
        )
        nn = self.dim
        divisors = [dmat[i][i] for i in range(nn)]
        order = 1
        for x in divisors:
            order *= x
        factors = tuple(x for x in divisors if x > 1)
        reps = None
        if order <= rep_cap:
            uinv = _linalg.inv_fraction(_linalg.to_mat(u))
            reps = []
            ranges = [range(x) for x in divisors]
            for w in itertools.product(*ranges):
                x = _linalg.mat_vec(uinv, [Fraction(c) for c in w])
                mu = _linalg.mat_vec(self._trace_gram_inv, x)
                reps.append(tuple(mu))
        return {"invariant_factors": factors, "order": order, "coset_reps": reps}

    def to_json_dict(self) -> dict:
        return {
            "field": self.field.to_json_dict(),
            "gram": [
                [[str(c) for c in self.gram.entry(i, k).coords] for k in range(self.rank)]
                for i in range(self.rank)
            ],
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "QuadLattice":
        field = NumberField.from_json_dict(data["field"])
        gram = [
            [field.element([Fraction(c) for c in ent]) for ent in row]
            for row in data["gram"]
        ]
        return cls(field, gram)


def direct_sum(l0: QuadLattice, l1: QuadLattice) -> QuadLattice:
    if l0.field != l1.field:
        raise ValueError("summands live over different fields")
    field = l0.field
    n0, n1 = l0.rank, l1.rank
    z = field.zero()
    rows = []
    for i in range(n0 + n1):
        row = []
        for k in range(n0 + n1):
            if i < n0 and k < n0:
                row.append(l0.gram.entry(i, k))
            elif i >= n0 and k >= n0:
                row.append(l1.gram.entry(i - n0, k - n0))
            else:
                row.append(z)
        rows.append(row)
    return QuadLattice(field, rows)


# --- Fincke-Pohst ---------------------------------------------------------------------------

def _ldl(a: _linalg.Mat):
    n = len(a)
    L = [[Fraction(1 if i == j else 0) for j in range(n)] for i in range(n)]
    D = [Fraction(0)] * n
    for j in range(n):
        D[j] = a[j][j] - sum(L[j][k] * L[j][k] * D[k] for k in range(j))
        if D[j] <= 0:
            raise ValueError("matrix is not positive definite")
        for i in range(j + 1, n):
            L[i][j] = (a[i][j] - sum(L[i][k] * L[j][k] * D[k] for k in range(j))) / D[j]
    return L, D


def _fp_enumerate(a: _linalg.Mat, u, bound: Fraction, center=None):
    """All w = z + center (z integral) with w^T a w <= bound.

    u is an integer unimodular row transform making u a u^T reduced; the
    search runs in the reduced coordinates and maps back, so w = u^T y with
    y ranging over (Z^n + reduced center).
    """
    n = len(a)
    um = _linalg.to_mat(u)
    a_red = _linalg.mat_mul(_linalg.mat_mul(um, a), _linalg.transpose(um))
    if center is None:
        mu = [Fraction(0)] * n
    else:
        # w = u^T (y + mu) with u^T mu = center
        mu = list(_linalg.solve_fraction(_linalg.transpose(um), [Fraction(c) for c in center]))
    L, D = _ldl(a_red)
    ut = _linalg.transpose(um)
    out = []
    w = [Fraction(0)] * n

    def dfs(i, rem):
        if i < 0:
            vec = _linalg.mat_vec(ut, w)
            out.append(vec)
            return
        c = sum(L[j][i] * w[j] for j in range(i + 1, n))
        # D[i] * (w_i + c)^2 <= rem
        s = rem / D[i]
        lo = _linalg.ceil_minus_sqrt(-mu[i] - c, s)
        hi = _linalg.floor_plus_sqrt(-mu[i] - c, s)
        for y in range(lo, hi + 1):
            w[i] = y + mu[i]
            used = D[i] * (w[i] + c) ** 2
            dfs(i - 1, rem - used)
        w[i] = Fraction(0)

    dfs(n - 1, bound)
    return out


# --- theta series ------------------------------------------------------------------------------

def _normalize_cosets(lat: QuadLattice, genus: int, mu):
    """One rational coordinate vector per column, or None for the zero coset.

    Vectors whose coordinates are all integral describe the trivial coset and
    collapse back to None (the all-integer fast path)."""
    if mu is None:
        return None
    vecs = []
    integral = True
    for v in mu:
        w = tuple(Fraction(c) for c in v)
        if len(w) != lat.dim:
            raise ValueError("coset vectors need one coordinate per Z-basis vector")
        integral = integral and all(c.denominator == 1 for c in w)
        vecs.append(w)
    if len(vecs) != genus:
        raise ValueError("need exactly one coset vector per column")
    return None if integral else tuple(vecs)


def _validate_level(lat: QuadLattice, nu: int, cosets=None):
    """Check that every arising coefficient matrix lands on the level-nu cone
    lattice, by testing the finite generator set of pairing values."""
    field = lat.field
    d = field.degree
    basis = [field.element([1 if r == s else 0 for r in range(d)]) for s in range(d)]
    gens = []
    vecs = [tuple(1 if i == j else 0 for i in range(lat.dim)) for j in range(lat.dim)]
    if cosets:
        vecs = vecs + [tuple(Fraction(c) for c in mu) for mu in cosets]
    for z in vecs:
        gens.append(lat.quad_value(z))
    for z, w in itertools.combinations(vecs, 2):
        gens.append(lat.pairing(z, w))
    for g in gens:
        for b in basis:
            if field.trace(g * b * nu).denominator != 1:
                raise ValueError(
                    "lattice pairings are not integral at this level; "
                    "theta coefficients would fall outside the cone lattice"
                )


def theta_expansion(
    lat: QuadLattice, genus: int, height_bound, nu: int = 1, mu=None
) -> FormalSeries:
    """The genus-n theta series of the lattice, truncated at the height bound.

    Coefficient at T counts tuples (x_1 .. x_n) in mu + L^n with
    (x_a, x_b) = 2 T_ab; with the zero coset the constant term is 1.  mu is a
    tuple of n dual-coset coordinate vectors (see representation_number).
    Raises when the pairing values arising from the lattice and the cosets are
    not integral at level nu.

    The search works on coordinate vectors: each candidate carries its image
    under the per-field-coordinate pairing tables, so a Gram entry of a tuple
    costs one dot product per coordinate instead of field arithmetic, and the
    matrices themselves are only built once per distinct value.
    """
    if not isinstance(genus, int) or genus < 1:
        raise ValueError("genus must be a positive integer")
    bound = Fraction(height_bound)
    mus = _normalize_cosets(lat, genus, mu)
    _validate_level(lat, nu, cosets=mus)
    cone = ConeLattice(lat.field, genus, nu)
    field = lat.field
    dim = lat.dim
    tables = lat._pair_coord
    idx = range(dim)

    def shell(center):
        out = []
        for z in lat.vectors_with_trace_norm_at_most(2 * bound, center=center):
            zi = tuple(int(c) if c.denominator == 1 else c for c in z)
            pz = tuple(
                tuple(sum(row[k] * zi[k] for k in idx if zi[k]) for row in tbl)
                for tbl in tables
            )
            qz = tuple(sum(pc[i] * zi[i] for i in idx if zi[i]) for pc in pz)
            out.append((lat.trace_quad(zi), zi, pz, qz))
        out.sort(key=lambda p: (p[0], p[1]))
        return out

    if mus is None:
        cand = [shell(None)] * genus
    else:
        cache: dict[tuple, list] = {}
        cand = []
        for center in mus:
            if center not in cache:
                cache[center] = shell(center)
            cand.append(cache[center])

    buckets: dict[tuple, int] = {}
    chosen: list = []
    keyparts: list = []

    def dfs(a, budget):
        if a == genus:
            key = tuple(keyparts)
            buckets[key] = buckets.get(key, 0) + 1
            return
        for trq, zi, pz, qz in cand[a]:
            if trq > budget:
                break
            part = []
            for zb in chosen:
                part.append(
                    tuple(sum(pc[i] * zb[i] for i in idx if zb[i]) for pc in pz)
                )
            part.append(qz)
            keyparts.append(tuple(part))
            chosen.append(zi)
            dfs(a + 1, budget - trq)
            chosen.pop()
            keyparts.pop()

    dfs(0, bound)
    half = Fraction(1, 2)
    out: dict[SymMatF, Fraction] = {}
    for key, cnt in buckets.items():
        rows = [[None] * genus for _ in range(genus)]
        for a in range(genus):
            for b in range(a + 1):
                e = field.element([c * half for c in key[a][b]])
                rows[a][b] = e
                rows[b][a] = e
        out[SymMatF(field, rows)] = Fraction(cnt)
    return FormalSeries(cone, bound, _RAT, out)


def theta_coefficient_growth(lat: QuadLattice, genus: int):
    """A callable h -> certified upper bound on the total theta coefficient
    mass at height exactly h (used for numeric tail estimates)."""
    gamma = max(lat._trace_gram_inv[i][i] for i in range(lat.dim))

    def growth(h: Fraction) -> int:
        per_vec = 2 * _linalg.floor_sqrt_fraction(2 * Fraction(h) * gamma) + 3
        return per_vec ** (lat.dim * genus)

    return growth


def check_orthogonal_sum_factorization(
    l0: QuadLattice, l1: QuadLattice, genus: int, height_bound, nu: int = 1
) -> bool:
    """Theta of an orthogonal direct sum equals the product of the theta
    series of the summands, coefficient by coefficient up to the bound."""
    lsum = direct_sum(l0, l1)
    lhs = theta_expansion(lsum, genus, height_bound, nu)
    rhs = multiply(
        theta_expansion(l0, genus, height_bound, nu),
        theta_expansion(l1, genus, height_bound, nu),
    )
    return lhs == rhs


def check_diagonal_restriction(lat: QuadLattice, t1: SymMatF, t2: SymMatF) -> bool:
    """Summing representation numbers of block matrices [[t1, X], [X^T, t2]]
    over all admissible off-diagonal blocks X recovers the product of the two
    representation numbers.

    Each entry of X is half a pairing value, so it lies in (1/2) O_F, and in a
    totally PSD block the 2x2 minor through entry x gives sigma_j(x)^2 <=
    sigma_j(t1_ii t2_kk) at every place; summing places yields the exact
    rational bound tr(x^2) <= tr(t1_ii t2_kk), searched by Fincke-Pohst on the
    trace form of the field basis.  Minors inside t1 or t2 are fixed across
    the grid, so only the mixed minors are retested per block."""
    field = lat.field
    if t1.field != field or t2.field != field:
        raise ValueError("matrices live over a different field")
    n1, n2 = t1.n, t2.n
    if not (is_totally_psd(t1) and is_totally_psd(t2)):
        # a PSD completion needs PSD diagonal blocks: the block sum is empty
        return lat.representation_number(t1) * lat.representation_number(t2) == 0
    diag_prods: dict[tuple[int, int], FieldElem] = {}
    entry_cands: dict[tuple[int, int], list] = {}
    for i in range(n1):
        for k in range(n2):
            prod = t1.entry(i, i) * t2.entry(k, k)
            diag_prods[(i, k)] = prod
            entry_cands[(i, k)] = _half_integral_candidates(field, field.trace(prod))
    big_mixed = [
        idx
        for size in range(3, n1 + n2 + 1)
        for idx in itertools.combinations(range(n1 + n2), size)
        if any(j < n1 for j in idx) and any(j >= n1 for j in idx)
    ]
    total = 0
    keys = list(entry_cands)
    for choice in itertools.product(*[entry_cands[k] for k in keys]):
        # each off-diagonal entry sits in one 2x2 mixed minor; test those first
        ok = True
        for key, (x, xsq) in zip(keys, choice):
            if not _tnn_cached(field, diag_prods[key] - xsq):
                ok = False
                break
        if not ok:
            continue
        xmap = {key: x for key, (x, _) in zip(keys, choice)}
        rows = []
        for i in range(n1 + n2):
            row = []
            for k in range(n1 + n2):
                if i < n1 and k < n1:
                    row.append(t1.entry(i, k))
                elif i >= n1 and k >= n1:
                    row.append(t2.entry(i - n1, k - n1))
                elif i < n1:
                    row.append(xmap[(i, k - n1)])
                else:
                    row.append(xmap[(k, i - n1)])
            rows.append(row)
        block = SymMatF(field, rows)
        if all(
            _tnn_cached(field, block.principal_minor_det(idx)) for idx in big_mixed
        ):
            total += lat._count_tuples(block, None)
    return total == lat.representation_number(t1) * lat.representation_number(t2)


_TNN_CACHE: dict = {}


def _tnn_cached(field: NumberField, e: FieldElem) -> bool:
    key = (field, e.coords)
    v = _TNN_CACHE.get(key)
    if v is None:
        v = field.is_totally_nonnegative(e)
        _TNN_CACHE[key] = v
    return v


_HALF_CANDS: dict = {}
_BASIS_FORM: dict = {}


def _half_integral_candidates(field: NumberField, bound: Fraction) -> list:
    """(x, x^2) for every x in (1/2) O_F with tr(x^2) <= bound."""
    key = (field, bound)
    hit = _HALF_CANDS.get(key)
    if hit is not None:
        return hit
    form = _BASIS_FORM.get(field)
    if form is None:
        d = field.degree
        basis = [
            field.element([1 if r == s else 0 for r in range(d)]) for s in range(d)
        ]
        bgram = _linalg.to_mat([[field.trace(x * y) for y in basis] for x in basis])
        form = (basis, bgram, _linalg.lll_gram(bgram))
        _BASIS_FORM[field] = form
    basis, bgram, bu = form
    vals = []
    if bound >= 0:
        for c in _fp_enumerate(bgram, bu, 4 * Fraction(bound)):
            x = field.zero()
            for cs, b in zip(c, basis):
                if cs:
                    x = x + b * cs
            x = x / 2
            vals.append((x, x * x))
    _HALF_CANDS[key] = vals
    return vals


# --- numeric evaluation -------------------------------------------------------------------------

class TauPoint:
    """One complex symmetric n x n matrix per real embedding, with exact
    rational real and imaginary parts; imaginary parts must be PD."""

    def __init__(self, parts):
        self.parts = []
        for re, im in parts:
            rem = _linalg.to_mat(re)
            imm = _linalg.to_mat(im)
            if rem != _linalg.transpose(rem) or imm != _linalg.transpose(imm):
                raise ValueError("tau matrices must be symmetric")
            if not _linalg.leading_minors_positive(imm):
                raise ValueError("imaginary parts must be positive definite")
            self.parts.append((rem, imm))
        self.n = len(self.parts[0][0])

    def translate(self, beta_parts) -> "TauPoint":
        """tau -> tau + beta for rational symmetric beta (one per embedding)."""
        out = []
        for (re, im), b in zip(self.parts, beta_parts):
            out.append((_linalg.mat_add(re, _linalg.to_mat(b)), im))
        return TauPoint(out)

    @classmethod
    def from_json_dict(cls, data: dict) -> "TauPoint":
        parts = []
        for item in data["tau"]:
            re = [[Fraction(x) for x in row] for row in item["re"]]
            im = [[Fraction(x) for x in row] for row in item["im"]]
            parts.append((re, im))
        return cls(parts)

    def to_json_dict(self) -> dict:
        return {
            "tau": [
                {
                    "re": [[str(x) for x in row] for row in re],
                    "im": [[str(x) for x in row] for row in im],
                }
                for re, im in self.parts
            ]
        }


def _embed_matrix(field: NumberField, t: SymMatF, j: int, eps: Fraction):
    """Rational midpoint matrix for sigma_j(T), certified within eps."""
    out = []
    for row in t.rows:
        mids = []
        for e in row:
            lo, hi = field.embed(e, j, eps)
            mids.append((lo + hi) / 2)
        out.append(tuple(mids))
    return tuple(out)


def _exponent_trace(sigma_t, re, im):
    """tr(sigma_j(T) tau_j) as (real, imag) exact rationals."""
    n = len(sigma_t)
    re_acc = Fraction(0)
    im_acc = Fraction(0)
    for i in range(n):
        for k in range(n):
            re_acc += sigma_t[i][k] * re[k][i]
            im_acc += sigma_t[i][k] * im[k][i]
    return re_acc, im_acc


def _min_imag_eigen_lower(tau: TauPoint) -> Fraction:
    """A positive rational lower bound for the smallest eigenvalue among all
    imaginary parts, certified by exact Sylvester tests."""
    n = tau.n
    lam = Fraction(1)
    while True:
        shift = _linalg.mat_scale(_linalg.identity(n), -lam)
        if all(
            _linalg.leading_minors_positive(_linalg.mat_add(im, shift))
            for _, im in tau.parts
        ):
            return lam
        lam /= 2


def numeric_eval(f: FormalSeries, tau: TauPoint, dps: int | None = None, growth=None):
    """Evaluate the series at tau; returns (value, tail_bound).

    value ~ sum over stored T of a(T) e(sum_j tr(sigma_j(T) tau_j)); the tail
    bound dominates the discarded part of the series, assuming coefficients
    beyond the bound obey the growth model: `growth(h)` bounds the total
    coefficient mass at height h (default: the largest stored coefficient
    magnitude times a lattice-point count bound for the cone).
    """
    import mpmath

    dps = dps or _default_dps()
    field = f.cone.field
    d = field.degree
    if len(tau.parts) != d:
        raise ValueError("need one tau matrix per real embedding")
    if tau.n != f.cone.n:
        raise ValueError("tau size must match the cone size")
    eps = Fraction(1, 10 ** (dps + 15))
    with mpmath.workdps(dps + 10):
        total = mpmath.mpc(0)
        for t, a in f.items_sorted():
            re_acc = Fraction(0)
            im_acc = Fraction(0)
            for j in range(1, d + 1):
                sig = _embed_matrix(field, t, j, eps)
                r, i = _exponent_trace(sig, tau.parts[j - 1][0], tau.parts[j - 1][1])
                re_acc += r
                im_acc += i
            # e(x + iy) = exp(2 pi i x) exp(-2 pi y)
            phase = mpmath.expjpi(2 * mpmath.mpf(re_acc.numerator) / re_acc.denominator) if re_acc else mpmath.mpc(1)
            mag = mpmath.exp(-2 * mpmath.pi * mpmath.mpf(im_acc.numerator) / im_acc.denominator)
            coeff = _coeff_to_mpc(f.ring, a)
            total += coeff * phase * mag
        tail = _tail_bound(f, tau, growth)
        return +total, tail


def _coeff_to_mpc(ring, a):
    import mpmath

    if isinstance(a, tuple):
        return mpmath.mpc(
            mpmath.mpf(a[0].numerator) / a[0].denominator,
            mpmath.mpf(a[1].numerator) / a[1].denominator,
        )
    return mpmath.mpf(a.numerator) / a.denominator


def _coeff_abs_bound(ring, a) -> Fraction:
    if isinstance(a, tuple):
        return abs(a[0]) + abs(a[1])
    return abs(a)


def _tail_bound(f: FormalSeries, tau: TauPoint, growth):
    """Upper bound for the series mass beyond the stored height bound."""
    import mpmath

    cone = f.cone
    lam = _min_imag_eigen_lower(tau)
    nu = cone.nu
    if growth is None:
        mass = max(
            (_coeff_abs_bound(f.ring, a) for a in f.coeffs.values()), default=Fraction(0)
        )
        if mass == 0:
            mass = Fraction(1)
        rho = max(cone._rho("diag"), cone._rho("off"))
        dim = cone.field.degree * cone.n * (cone.n + 1) // 2

        def growth(h):
            return mass * (2 * rho * h + 3) ** dim

    c = 2 * mpmath.pi * lam.numerator / lam.denominator
    step = Fraction(1, nu)
    h = f.height_bound + step
    total = mpmath.mpf(0)
    # sum terms explicitly until the term ratio certifies a geometric tail
    q = mpmath.exp(-c * float(step) / 2)
    for _ in range(100000):
        g = growth(h)
        gh = mpmath.mpf(g.numerator) / g.denominator if isinstance(g, Fraction) else mpmath.mpf(g)
        term = gh * mpmath.exp(-c * mpmath.mpf(h.numerator) / h.denominator)
        hn = h + step
        gnext = growth(hn)
        gnext = mpmath.mpf(gnext.numerator) / gnext.denominator if isinstance(gnext, Fraction) else mpmath.mpf(gnext)
        ratio = (gnext / gh) * mpmath.exp(-c * float(step)) if gh > 0 else mpmath.mpf(0)
        if ratio <= q:
            # remaining tail dominated by geometric series with ratio q
            total += term / (1 - q)
            return total * mpmath.mpf("1.000001")
        total += term
        h = hn
    raise RuntimeError("tail bound failed to converge")


def _q_power(field: NumberField, t: SymMatF, tau: TauPoint, dps: int):
    """e(sum_j tr(sigma_j(T) tau_j)) at the requested precision."""
    import mpmath

    eps = Fraction(1, 10 ** (dps + 15))
    re_acc = Fraction(0)
    im_acc = Fraction(0)
    for j in range(1, field.degree + 1):
        sig = _embed_matrix(field, t, j, eps)
        r, i = _exponent_trace(sig, tau.parts[j - 1][0], tau.parts[j - 1][1])
        re_acc += r
        im_acc += i
    with mpmath.workdps(dps + 10):
        phase = mpmath.expjpi(2 * mpmath.mpf(re_acc.numerator) / re_acc.denominator)
        mag = mpmath.exp(-2 * mpmath.pi * mpmath.mpf(im_acc.numerator) / im_acc.denominator)
        return +(phase * mag)


def whittaker_factor(
    field: NumberField, t: SymMatF, tau: TauPoint, weight_m: int, dps: int | None = None
):
    """Product over real places of det(Im tau_j)^((m+2)/4) e(tr(sigma_j(T) tau_j)).

    Normalized so that dividing by the product of the determinant powers
    recovers the plain exponential q^T; all powers use the principal branch on
    positive reals."""
    import mpmath

    dps = dps or _default_dps()
    d = field.degree
    if len(tau.parts) != d:
        raise ValueError("need one tau matrix per real embedding")
    eps = Fraction(1, 10 ** (dps + 15))
    expo = mpmath.mpf(weight_m + 2) / 4
    with mpmath.workdps(dps + 10):
        out = mpmath.mpc(1)
        for j in range(1, d + 1):
            re, im = tau.parts[j - 1]
            det = _linalg.det_fraction(im)
            detf = mpmath.mpf(det.numerator) / det.denominator
            sig = _embed_matrix(field, t, j, eps)
            r, i = _exponent_trace(sig, re, im)
            phase = mpmath.expjpi(2 * mpmath.mpf(r.numerator) / r.denominator)
            mag = mpmath.exp(-2 * mpmath.pi * mpmath.mpf(i.numerator) / i.denominator)
            out *= mpmath.power(detf, expo) * phase * mag
        return +out


def norm_det_imag(tau: TauPoint):
    """Product over places of det(Im tau_j), an exact rational."""
    out = Fraction(1)
    for _, im in tau.parts:
        out *= _linalg.det_fraction(im)
    return out
