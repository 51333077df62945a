"""Independent brute-force oracles, written before the library code they check.

Frozen: nothing here imports the package under test.  Everything is direct
enumeration or direct summation with exact Fraction arithmetic (mpmath only
for the one analytic sum).  Scope is deliberately tiny fixtures: the rational
field, the golden-ratio real quadratic field, matrix sizes n <= 2.
"""
from __future__ import annotations

import itertools
from fractions import Fraction

# --- the golden-ratio quadratic order, hand-rolled --------------------------------
# elements are pairs (a, b) meaning a + b*phi with phi^2 = phi + 1


def phi_mul(x, y):
    a, b = x
    c, d = y
    return (a * c + b * d, a * d + b * c + b * d)


def phi_add(x, y):
    return (x[0] + y[0], x[1] + y[1])


def phi_trace(x):
    # tr(1) = 2, tr(phi) = 1
    return 2 * x[0] + x[1]


def phi_norm(x):
    # N(a + b*phi) = a^2 + a*b - b^2
    a, b = x
    return a * a + a * b - b * b


def phi_is_totally_nonneg(x):
    """a + b*phi >= 0 under both square roots of 5 (exact)."""
    a, b = x
    # sigma(a + b phi) = a + b(1 +- sqrt5)/2; sign of 2a + b +- b*sqrt5
    for sgn in (1, -1):
        u, v = 2 * a + b, sgn * b  # test u + v*sqrt5 >= 0
        if u >= 0 and v >= 0:
            continue
        if u < 0 and v <= 0:
            return False
        if u < 0 and v > 0:
            if u * u >= 5 * v * v:
                return False
        if u >= 0 and v < 0:
            if u * u < 5 * v * v:
                return False
    return True


# --- naive cone enumeration over the rationals -------------------------------------
# symmetric n x n, diagonal in Z>=0, off-diagonal in (1/2)Z, positive semidefinite,
# trace <= bound; returned as nested tuples of Fractions


def naive_cone_points_q(n, bound):
    bound = Fraction(bound)
    pts = []
    if n == 1:
        t = 1
        while t <= bound:
            pts.append(((Fraction(t),),))
            t += 1
        return pts
    if n != 2:
        raise ValueError("oracle only covers n in {1, 2}")
    t11 = 0
    while t11 <= bound:
        t22 = 0
        while t11 + t22 <= bound:
            if t11 or t22:
                # 4 b^2 <= 4 t11 t22, b a half-integer: (2b)^2 <= 4 t11 t22
                mb = 0
                while (mb + 1) * (mb + 1) <= 4 * t11 * t22:
                    mb += 1
                for twob in range(-mb, mb + 1):
                    b = Fraction(twob, 2)
                    pts.append(
                        (
                            (Fraction(t11), b),
                            (b, Fraction(t22)),
                        )
                    )
            t22 += 1
        t11 += 1
    return pts


def naive_lambda_q(t, bound_cache={}):
    """Longest decomposition of t into a sum of naive cone points (F = Q)."""
    n = len(t)
    key = tuple(map(tuple, t))
    memo = bound_cache.setdefault(n, {})
    if key in memo:
        return memo[key]
    height = sum(t[i][i] for i in range(n))
    best = 0
    for p in naive_cone_points_q(n, height):
        rem = tuple(
            tuple(t[i][j] - p[i][j] for j in range(n)) for i in range(n)
        )
        if all(x == 0 for row in rem for x in row):
            cand = 1
        else:
            if not _naive_psd(rem):
                continue
            if not _naive_in_halfint(rem):
                continue
            cand = 1 + naive_lambda_q(rem, bound_cache)
        if cand > best:
            best = cand
    memo[key] = best
    return best


def _naive_psd(t):
    n = len(t)
    if n == 1:
        return t[0][0] >= 0
    return t[0][0] >= 0 and t[1][1] >= 0 and t[0][0] * t[1][1] - t[0][1] ** 2 >= 0


def _naive_in_halfint(t):
    n = len(t)
    for i in range(n):
        if Fraction(t[i][i]).denominator != 1:
            return False
        for j in range(i + 1, n):
            if Fraction(2 * t[i][j]).denominator != 1:
                return False
    return True


# --- naive representation numbers ----------------------------------------------------


def naive_rep_count_z(gram, target_t):
    """# of x in Z^r with (1/2) x^T gram x == t, by direct box search."""
    r = len(gram)
    t = Fraction(target_t)
    if t < 0:
        return 0
    if t == 0:
        return 1
    # x^T gram x = 2t and x_i^2 <= 2t * (gram^-1)_ii
    ginv = _frac_inv(gram)
    bounds = []
    for i in range(r):
        cap = 2 * t * ginv[i][i]
        m = 0
        while (m + 1) * (m + 1) <= cap:
            m += 1
        bounds.append(m)
    count = 0
    for x in itertools.product(*[range(-m, m + 1) for m in bounds]):
        q = sum(gram[i][j] * x[i] * x[j] for i in range(r) for j in range(r))
        if q == 2 * t:
            count += 1
    return count


def naive_rep_count_golden_rank1(target):
    """# of x in Z[phi] with x^2 == target (pair (a, b)), gram = (2)."""
    ta, tb = target
    # tr(x^2) = 2a^2 + 2ab + 3b^2 (must equal 2*ta + tb)
    goal = 2 * ta + tb
    if goal < 0:
        return 0
    count = 0
    m = int(goal) + 2
    for a in range(-m, m + 1):
        for b in range(-m, m + 1):
            if 2 * a * a + 2 * a * b + 3 * b * b > goal:
                continue
            if phi_mul((a, b), (a, b)) == (ta, tb):
                count += 1
    return count


def _frac_inv(m):
    n = len(m)
    aug = [[Fraction(m[i][j]) for j in range(n)] + [Fraction(1 if k == i else 0) for k in range(n)] for i in range(n)]
    for col in range(n):
        piv = next(r for r in range(col, n) if aug[r][col] != 0)
        aug[col], aug[piv] = aug[piv], aug[col]
        pv = aug[col][col]
        aug[col] = [x / pv for x in aug[col]]
        for r in range(n):
            if r != col and aug[r][col]:
                f = aug[r][col]
                aug[r] = [x - f * y for x, y in zip(aug[r], aug[col])]
    return [row[n:] for row in aug]


# --- direct theta value at tau = i ---------------------------------------------------


def direct_theta_z2_at_i(dps=40):
    """Sum over Z of exp(-2 pi x^2): the rank-1 even lattice with gram (2) at tau = i."""
    import mpmath

    with mpmath.workdps(dps):
        total = mpmath.mpf(1)
        x = 1
        while True:
            term = 2 * mpmath.exp(-2 * mpmath.pi * x * x)
            total += term
            if term < mpmath.mpf(10) ** (-dps):
                break
            x += 1
        return +total
