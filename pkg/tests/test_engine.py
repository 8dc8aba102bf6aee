import math
import warnings
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from renewal_intersection import (
    MassFunction,
    SlowVaryDesc,
    build_reg_varying,
    deterministic_law,
    from_pmf,
    geometric_law,
    increment,
    invert_mass,
    mass_function,
    ssrw_return_law,
)
from renewal_intersection._kernels import compensated_cumsum
from renewal_intersection.engine import ClippedMassWarning, banded_convolution, relaxed_solve
from renewal_intersection.exact import exact_invert_mass, exact_mass_function, ssrw_pmf_exact


def _naive_recursion(rhs, ker, sign):
    x = np.zeros(len(rhs))
    for n in range(len(rhs)):
        x[n] = rhs[n] + sign * math.fsum(x[k] * ker[n - k] for k in range(n))
    return x


@pytest.mark.parametrize("n", [1, 5, 256, 257, 1000])
@pytest.mark.parametrize("banded", [False, True])
def test_relaxed_solve_matches_recursion(n, banded):
    rng = np.random.default_rng(n)
    rhs = rng.random(n) * 0.1
    ker = rng.random(n) / n
    want = _naive_recursion(rhs, ker, 1.0)
    for method in ("naive", "fft"):
        got = relaxed_solve(rhs, ker, 1.0, method, banded=banded, leaf=16)
        np.testing.assert_allclose(got, want, rtol=1e-12, atol=1e-15)


def test_relaxed_solve_bad_method():
    with pytest.raises(ValueError):
        relaxed_solve([1.0], [0.0], method="magic")


def test_banded_convolution_matches_numpy():
    rng = np.random.default_rng(3)
    src = rng.random(300)
    ker = rng.random(600)
    full = np.convolve(src, np.r_[0.0, ker[1:]])
    np.testing.assert_allclose(banded_convolution(src, ker, 150, 600), full[150:600], rtol=1e-12)


def test_geometric_mass_constant():
    m = mass_function(geometric_law(0.3, 4096), 4096)
    assert np.max(np.abs(m.u[1:] - 0.3)) < 1e-12
    assert m.u[0] == 1.0


def test_ssrw_mass_binomial():
    m = mass_function(ssrw_return_law(2**12), 2**12)
    assert m.u[1] == pytest.approx(0.5, abs=1e-15)
    assert m.u[2] == pytest.approx(0.375, abs=1e-15)
    k = np.arange(1, 31)
    exact = np.array([math.comb(2 * j, j) / 4**j for j in k])
    assert np.max(np.abs(m.u[k] - exact)) < 1e-12


def test_deterministic_mass():
    m = mass_function(deterministic_law(100), 100)
    np.testing.assert_array_equal(m.u, np.ones(101))
    assert increment(m, 1) == 0.0


def test_mass_function_invariants():
    law = build_reg_varying(0.4, horizon=2**12)
    m = mass_function(law, 2**12)
    assert m.u[0] == 1.0
    assert np.all((m.u >= 0) & (m.u <= 1))
    assert np.all(np.diff(m.U) >= 0)
    np.testing.assert_allclose(m.U, np.cumsum(m.u), rtol=1e-12)
    f = law.pmf
    for n in (1, 17, 1000, 4096):
        resid = m.u[n] - math.fsum(f[1 : n + 1] * m.u[n - 1 :: -1][:n])
        assert abs(resid) < 1e-9


def test_mass_function_horizon_errors():
    law = geometric_law(0.5, 64)
    with pytest.raises(ValueError, match="horizon"):
        mass_function(law, 65)
    with pytest.raises(ValueError):
        mass_function(law, 10, method="other")


def test_transient_mass_total():
    for defect in (0.3, 0.5):
        law = build_reg_varying(1.5, horizon=2**16, defect=defect)
        m = mass_function(law, 2**16)
        # beyond the table u_n ~ f_n / defect^2
        total = m.U[-1] + (law.tail(2**16) - defect) / defect**2
        assert total == pytest.approx(1 / defect, rel=0.02)


@pytest.mark.parametrize("make", [
    lambda: ssrw_return_law(2**12),
    lambda: build_reg_varying(0.7, horizon=2**12),
    lambda: build_reg_varying(2.5, horizon=2**12),
    lambda: build_reg_varying(1.5, horizon=2**12, defect=0.3),
    lambda: geometric_law(0.4, 2**12),
])
def test_fft_agrees_with_naive(make):
    law = make()
    a = mass_function(law, 2**12, "naive").u
    b = mass_function(law, 2**12, "fft").u
    assert np.max(np.abs(a - b) / np.abs(a)) < 1e-10


def test_increment():
    m = mass_function(geometric_law(0.5, 64), 64)
    assert all(increment(m, n) < 1e-15 for n in range(2, 65))
    assert increment(m, 1) == pytest.approx(0.5)
    assert m.increment(1) == increment(m, 1)
    ms = mass_function(ssrw_return_law(8), 8)
    assert increment(ms, 2) == pytest.approx(0.125, abs=1e-15)
    with pytest.raises(ValueError):
        increment(m, 0)


@pytest.mark.filterwarnings("ignore::renewal_intersection.engine.ClippedMassWarning")
def test_invert_geometric_product():
    p, q, N = 0.5, 0.3, 1000
    w = np.full(N + 1, p * q)
    w[0] = 1.0
    for form in ("auto", "direct", "tail"):
        g, G = invert_mass(w, form=form)
        n = np.arange(1, N + 1)
        assert np.max(np.abs(g[1:] - p * q * (1 - p * q) ** (n - 1))) < 1e-12
        assert np.max(np.abs(G[n] - (1 - p * q) ** n)) < 1e-12


def test_invert_ssrw_pair_small():
    u = np.array([math.comb(2 * k, k) / 4**k for k in range(9)])
    g, G = invert_mass(u * u, method="naive")
    assert g[1] == pytest.approx(0.25, abs=1e-15)
    assert g[2] == pytest.approx(5 / 64, abs=1e-15)
    ex = exact_invert_mass([Fraction(math.comb(2 * k, k), 4**k) ** 2 for k in range(9)])
    np.testing.assert_allclose(g, [float(x) for x in ex], atol=1e-15)


def test_invert_errors():
    with pytest.raises(ValueError, match="w_0"):
        invert_mass(np.array([0.5, 0.2]))
    with pytest.raises(ValueError, match="not a renewal mass function"):
        invert_mass(np.array([1.0, 0.1, 0.9, 0.0]))
    with pytest.raises(ValueError):
        invert_mass(np.array([1.0, 0.5]), form="sideways")


def test_invert_clips_tiny_noise():
    w = np.array([1.0, 0.5, 0.25 - 1e-9])
    with pytest.warns(ClippedMassWarning):
        g, G = invert_mass(w, method="naive", form="direct")
    assert np.all(g >= 0)


def test_tail_is_one_minus_cumulative():
    law = build_reg_varying(0.8, horizon=2**10)
    m = mass_function(law, 2**10)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ClippedMassWarning)
        g, G = invert_mass(m.u, form="direct")
    np.testing.assert_array_equal(G[1:], 1.0 - compensated_cumsum(g)[1:])
    assert abs(math.fsum(g) + G[-1] - 1.0) < 1e-9


def test_round_trip_single_law():
    law = build_reg_varying(0.6, horizon=2**12)
    m = mass_function(law, 2**12)
    g, _ = invert_mass(m.u)
    assert np.max(np.abs(g[1:] - law.pmf[1:])) < 1e-9


def test_exact_mass_oracle_ssrw():
    u = exact_mass_function(ssrw_pmf_exact(20), 20)
    assert all(u[k] == Fraction(math.comb(2 * k, k), 4**k) for k in range(21))


def test_mass_function_from_values():
    m = MassFunction.from_values(np.array([1.0, 0.5, 0.5]), "product", "naive")
    assert m.U[-1] == 2.0
    assert m.du[1] == -0.5


def dyadic_laws(max_len=64):
    """Sparse finitely supported laws with dyadic masses and f_1 > 0."""

    @st.composite
    def make(draw):
        length = draw(st.integers(1, max_len))
        k = draw(st.integers(1, 6))
        support = sorted(set([1] + draw(st.lists(st.integers(1, length), max_size=k))))
        weights = [draw(st.integers(1, 16)) for _ in support]
        defect = draw(st.integers(0, 8))
        den = 2 ** (int(math.log2(sum(weights) + defect)) + 1)
        pmf = [Fraction(0)] * length
        for s, wgt in zip(support, weights):
            pmf[s - 1] = Fraction(wgt, den)
        if defect == 0:
            pmf[0] += 1 - sum(pmf)
        return pmf

    return make()


@settings(max_examples=60, deadline=None)
@given(pmf=dyadic_laws())
def test_mass_and_round_trip_against_exact(pmf):
    law = from_pmf(pmf)
    N = law.horizon
    exact_u = [float(x) for x in exact_mass_function(pmf, N)]
    for method in ("naive", "fft"):
        m = mass_function(law, N, method)
        np.testing.assert_allclose(m.u, exact_u, rtol=1e-10, atol=1e-13)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ClippedMassWarning)
            g, G = invert_mass(m.u, method)
        assert np.max(np.abs(g[1:] - law.pmf[1:])) < 1e-9
        assert np.all(np.diff(G) <= 1e-12)


@settings(max_examples=30, deadline=None)
@given(alpha=st.floats(0.1, 3.0), n=st.integers(300, 1200))
def test_mass_bounds_property(alpha, n):
    law = build_reg_varying(alpha, SlowVaryDesc(), max(n, 16))
    m = mass_function(law, n)
    assert m.u[0] == 1.0
    assert np.all(m.u >= -1e-15) and np.all(m.u <= 1 + 1e-12)
    assert np.all(np.diff(m.U) > 0)
