"""Independent brute-force oracles for scalar designs.

Everything here works from closed-form scalar formulas plus grid search and
bisection, never touching the SDP machinery under test.
"""

import math


def scalar_care(a: float, b: float, q: float, r: float):
    """Stabilizing scalar Riccati solution and gain."""
    p = r * (a + math.sqrt(a * a + b * b * q / r)) / (b * b)
    k = -b * p / r
    assert a + b * k < 0
    return p, k


def _cost_certificate(a, b, q, r, s):
    # closed-loop pole s = a + b k, k = (s - a)/b
    k = (s - a) / b
    return (q + r * k * k) / (-2.0 * s)


def scalar_p1_oracle(a, b, c, q, r, v, lam, grid=4001, bisect_iters=200):
    """Best scalar gain for the average-visibility metric under the budget.

    J1(s) = c^2 v / (-2 s) strictly improves as the closed-loop pole s moves
    left, so the optimum sits where the budget binds; found by grid search
    over s and bisection on the boundary.
    """
    p_star, k_star = scalar_care(a, b, q, r)
    s_star = a + b * k_star
    budget = p_star + lam

    # generous left end: quadratic growth of the certificate guarantees
    # infeasibility far enough out
    s_lo = s_star
    while _cost_certificate(a, b, q, r, s_lo) <= budget:
        s_lo *= 2.0
    best = s_star
    prev = s_star
    for i in range(grid):
        s = s_star + (s_lo - s_star) * (i / (grid - 1))
        if _cost_certificate(a, b, q, r, s) <= budget:
            best, prev = s, s
        else:
            # refine the boundary between the last feasible point and here
            hi, lo = prev, s
            for _ in range(bisect_iters):
                mid = 0.5 * (hi + lo)
                if _cost_certificate(a, b, q, r, mid) <= budget:
                    hi = mid
                else:
                    lo = mid
            best = hi
            break
    k = (best - a) / b
    j1 = c * c * v / (-2.0 * best)
    return k, j1


def scalar_p2_oracle(a, b, c, q, r, v, lam, eps):
    """Best scalar gain for the inverse metric; same binding pole, new value."""
    k, _ = scalar_p1_oracle(a, b, c, q, r, v, lam)
    s = a + b * k
    j2 = 2.0 * s / ((c * c + eps) * v)
    return k, j2
