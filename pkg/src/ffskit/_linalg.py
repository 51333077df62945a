"""Exact linear algebra helpers over Fraction and over the integers.

Everything in here is pure and deterministic; matrices are tuples of tuples.
"""
from __future__ import annotations

from fractions import Fraction
from math import isqrt

Mat = tuple[tuple[Fraction, ...], ...]


def to_mat(rows) -> Mat:
    return tuple(tuple(Fraction(x) for x in row) for row in rows)


def identity(n: int) -> Mat:
    return tuple(tuple(Fraction(1 if i == j else 0) for j in range(n)) for i in range(n))


def transpose(m: Mat) -> Mat:
    return tuple(zip(*m))


def mat_mul(a: Mat, b: Mat) -> Mat:
    bt = transpose(b)
    return tuple(tuple(sum(x * y for x, y in zip(row, col)) for col in bt) for row in a)


def mat_vec(a: Mat, v) -> tuple[Fraction, ...]:
    return tuple(sum(x * y for x, y in zip(row, v)) for row in a)


def mat_add(a: Mat, b: Mat) -> Mat:
    return tuple(tuple(x + y for x, y in zip(ra, rb)) for ra, rb in zip(a, b))


def mat_scale(a: Mat, c) -> Mat:
    c = Fraction(c)
    return tuple(tuple(c * x for x in row) for row in a)


def det_fraction(m: Mat) -> Fraction:
    n = len(m)
    a = [list(row) for row in m]
    det = Fraction(1)
    for col in range(n):
        pivot = next((r for r in range(col, n) if a[r][col] != 0), None)
        if pivot is None:
            return Fraction(0)
        if pivot != col:
            a[col], a[pivot] = a[pivot], a[col]
            det = -det
        det *= a[col][col]
        inv = 1 / a[col][col]
        for r in range(col + 1, n):
            if a[r][col] != 0:
                factor = a[r][col] * inv
                for c in range(col, n):
                    a[r][c] -= factor * a[col][c]
    return det


def inv_fraction(m: Mat) -> Mat:
    n = len(m)
    a = [list(row) + [Fraction(1 if i == j else 0) for j in range(n)] for i, row in enumerate(m)]
    for col in range(n):
        pivot = next((r for r in range(col, n) if a[r][col] != 0), None)
        if pivot is None:
            raise ZeroDivisionError("singular matrix")
        a[col], a[pivot] = a[pivot], a[col]
        inv = 1 / a[col][col]
        a[col] = [x * inv for x in a[col]]
        for r in range(n):
            if r != col and a[r][col] != 0:
                factor = a[r][col]
                a[r] = [x - factor * y for x, y in zip(a[r], a[col])]
    return tuple(tuple(row[n:]) for row in a)


def solve_fraction(a: Mat, b) -> tuple[Fraction, ...]:
    """Solve a @ x = b for square invertible a."""
    return mat_vec(inv_fraction(a), b)


def rref_fraction(rows) -> tuple[Mat, tuple[int, ...]]:
    """Reduced row echelon form; returns (nonzero rows, pivot columns)."""
    a = [list(map(Fraction, row)) for row in rows]
    nrows = len(a)
    ncols = len(a[0]) if a else 0
    pivots = []
    r = 0
    for c in range(ncols):
        pivot = next((i for i in range(r, nrows) if a[i][c] != 0), None)
        if pivot is None:
            continue
        a[r], a[pivot] = a[pivot], a[r]
        inv = 1 / a[r][c]
        a[r] = [x * inv for x in a[r]]
        for i in range(nrows):
            if i != r and a[i][c] != 0:
                f = a[i][c]
                a[i] = [x - f * y for x, y in zip(a[i], a[r])]
        pivots.append(c)
        r += 1
        if r == nrows:
            break
    return tuple(tuple(row) for row in a[:r]), tuple(pivots)


def kernel_fraction(m: Mat) -> Mat:
    """Basis (rows) of the right kernel of m."""
    if not m:
        return ()
    ncols = len(m[0])
    red, pivots = rref_fraction(m)
    free = [c for c in range(ncols) if c not in pivots]
    basis = []
    for f in free:
        v = [Fraction(0)] * ncols
        v[f] = Fraction(1)
        for r, p in enumerate(pivots):
            v[p] = -red[r][f]
        basis.append(tuple(v))
    return tuple(basis)


def leading_minors_positive(m: Mat) -> bool:
    """Sylvester test: all leading principal minors > 0 (rational symmetric PD)."""
    n = len(m)
    return all(det_fraction(tuple(row[: k + 1] for row in m[: k + 1])) > 0 for k in range(n))


# --- integer Smith normal form -------------------------------------------------

def smith_normal_form(a) -> tuple[list[list[int]], list[list[int]], list[list[int]]]:
    """Return (u, d, v) with u @ a @ v = d diagonal, d_i | d_{i+1}, u, v unimodular."""
    a = [list(map(int, row)) for row in a]
    nr, nc = len(a), len(a[0])
    u = [[int(i == j) for j in range(nr)] for i in range(nr)]
    v = [[int(i == j) for j in range(nc)] for i in range(nc)]

    def swap_rows(i, j):
        a[i], a[j] = a[j], a[i]
        u[i], u[j] = u[j], u[i]

    def swap_cols(i, j):
        for row in a:
            row[i], row[j] = row[j], row[i]
        for row in v:
            row[i], row[j] = row[j], row[i]

    def add_row(i, j, q):  # row_i += q * row_j
        a[i] = [x + q * y for x, y in zip(a[i], a[j])]
        u[i] = [x + q * y for x, y in zip(u[i], u[j])]

    def add_col(i, j, q):  # col_i += q * col_j
        for row in a:
            row[i] += q * row[j]
        for row in v:
            row[i] += q * row[j]

    def neg_row(i):
        a[i] = [-x for x in a[i]]
        u[i] = [-x for x in u[i]]

    t = 0
    while t < min(nr, nc):
        # move a minimal-magnitude nonzero entry of the trailing block to (t, t)
        best = None
        for i in range(t, nr):
            for j in range(t, nc):
                if a[i][j] != 0 and (best is None or abs(a[i][j]) < abs(a[best[0]][best[1]])):
                    best = (i, j)
        if best is None:
            break
        swap_rows(t, best[0])
        swap_cols(t, best[1])
        if a[t][t] < 0:
            neg_row(t)
        # reduce row/column t; a nonzero remainder becomes a strictly smaller pivot
        dirty = False
        for i in range(t + 1, nr):
            if a[i][t] != 0:
                add_row(i, t, -(a[i][t] // a[t][t]))
                if a[i][t] != 0:
                    dirty = True
        for j in range(t + 1, nc):
            if a[t][j] != 0:
                add_col(j, t, -(a[t][j] // a[t][t]))
                if a[t][j] != 0:
                    dirty = True
        if dirty:
            continue
        # make the pivot divide the whole trailing block
        stray = None
        for i in range(t + 1, nr):
            for j in range(t + 1, nc):
                if a[i][j] % a[t][t] != 0:
                    stray = i
                    break
            if stray is not None:
                break
        if stray is not None:
            add_row(t, stray, 1)
            continue
        t += 1
    return u, a, v


# --- sqrt helpers ---------------------------------------------------------------

def floor_sqrt_fraction(q: Fraction) -> int:
    """floor(sqrt(q)) for q >= 0."""
    if q < 0:
        raise ValueError("negative argument")
    return isqrt(q.numerator * q.denominator) // q.denominator


def floor_plus_sqrt(c: Fraction, s: Fraction) -> int:
    """Largest integer t with t <= c + sqrt(s), exactly (s >= 0)."""
    if s < 0:
        raise ValueError("negative radicand")
    t = int(c) + floor_sqrt_fraction(s) + 2
    while not _le_c_plus_sqrt(t, c, s):
        t -= 1
    return t


def ceil_minus_sqrt(c: Fraction, s: Fraction) -> int:
    """Smallest integer t with t >= c - sqrt(s), exactly (s >= 0)."""
    return -floor_plus_sqrt(-c, s)


def _le_c_plus_sqrt(t: int, c: Fraction, s: Fraction) -> bool:
    # t <= c + sqrt(s)  <=>  t - c <= sqrt(s)
    diff = t - c
    if diff <= 0:
        return True
    return diff * diff <= s


# --- LLL on an exact Gram matrix ------------------------------------------------

def lll_gram(gram: Mat, delta: Fraction = Fraction(3, 4)) -> list[list[int]]:
    """Lattice reduction working directly on a rational PD Gram matrix.

    Returns an integer unimodular transform u (list of rows) such that
    u @ gram @ u^T is LLL-reduced.
    """
    n = len(gram)
    u = [[int(i == j) for j in range(n)] for i in range(n)]

    def ip(i, j):
        # inner product of current basis rows i, j under gram
        return sum(u[i][s] * gram[s][t] * u[j][t] for s in range(n) for t in range(n))

    def gso():
        mu = [[Fraction(0)] * n for _ in range(n)]
        b2 = [Fraction(0)] * n
        for i in range(n):
            b2[i] = ip(i, i)
            for j in range(i):
                mu[i][j] = (ip(i, j) - sum(mu[i][t] * mu[j][t] * b2[t] for t in range(j))) / b2[j]
                b2[i] -= mu[i][j] ** 2 * b2[j]
        return mu, b2

    mu, b2 = gso()
    k = 1
    while k < n:
        for j in range(k - 1, -1, -1):
            q = mu[k][j]
            r = (q.numerator * 2 + q.denominator) // (2 * q.denominator)  # round half up
            if r != 0:
                u[k] = [x - r * y for x, y in zip(u[k], u[j])]
                mu, b2 = gso()
        if b2[k] >= (delta - mu[k][k - 1] ** 2) * b2[k - 1]:
            k += 1
        else:
            u[k], u[k - 1] = u[k - 1], u[k]
            mu, b2 = gso()
            k = max(k - 1, 1)
    return u
