"""Exact rational renewal arithmetic, used as an oracle for the float paths.

Everything is kept over a common denominator so the recursions run on
Python integers without gcd reductions.
"""

from __future__ import annotations

import math
from fractions import Fraction

EXACT_HORIZON_LIMIT = 512


def ssrw_pmf_exact(n: int) -> list[Fraction]:
    """[P(tau_1 = k) for k = 1..n] = C(2k, k) / ((2k - 1) 4**k)."""
    return [Fraction(math.comb(2 * k, k), (2 * k - 1) * 4**k) for k in range(1, n + 1)]


def exact_pmf(law, n: int | None = None) -> list[Fraction]:
    """Exact table of a rational law (horizon at most 512)."""
    n = law.horizon if n is None else n
    if n > EXACT_HORIZON_LIMIT:
        raise ValueError(f"exact mode limited to horizon <= {EXACT_HORIZON_LIMIT}")
    if law.kind == "ssrw":
        return ssrw_pmf_exact(n)
    if law.kind == "geometric":
        p = Fraction(law.params["p"])
        return [p * (1 - p) ** (k - 1) for k in range(1, n + 1)]
    if law.kind == "deterministic":
        return [Fraction(1)] + [Fraction(0)] * (n - 1)
    if law.kind == "custom" and law.params.get("exact") is not None:
        table = [Fraction(v) for v in law.params["exact"]]
        return (table + [Fraction(0)] * n)[:n]
    raise ValueError(f"no exact rational form for law kind {law.kind!r}")


def _common_denominator(values) -> int:
    return math.lcm(*(Fraction(v).denominator for v in values)) if values else 1


def exact_mass_function(pmf, n: int) -> list[Fraction]:
    """u_0..u_n of u_m = sum_k f_k u_{m-k} with f = pmf[0], pmf[1], ... = f_1, f_2, ..."""
    f = [Fraction(v) for v in pmf[:n]]
    den = _common_denominator(f)
    a = [int(v * den) for v in f]
    support = [(k, a[k - 1]) for k in range(1, len(a) + 1) if a[k - 1]]
    # u_m = A_m / den**m
    A = [1]
    for m in range(1, n + 1):
        tot = 0
        for k, ak in support:
            if k > m:
                break
            tot += ak * A[m - k] * den ** (k - 1)
        A.append(tot)
    return [Fraction(A[m], den**m) for m in range(n + 1)]


def exact_invert_mass(w) -> list[Fraction]:
    """g_1..g_n with g_m = w_m - sum_{k<m} g_k w_{m-k}; returned with g_0 = 0."""
    w = [Fraction(v) for v in w]
    if w[0] != 1:
        raise ValueError("w_0 must equal 1")
    g = [Fraction(0)] * len(w)
    for m in range(1, len(w)):
        g[m] = w[m] - sum(g[k] * w[m - k] for k in range(1, m))
    return g
