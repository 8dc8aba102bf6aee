import csv
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from renewal_intersection import (
    build_reg_varying,
    deterministic_law,
    geometric_law,
    mass_function,
    ssrw_return_law,
)
from renewal_intersection.asymptotics import (
    CASES,
    AsymptoticReport,
    InapplicableCase,
    compare,
    coupling_bound_check,
    de_haan_slope,
    finite_mean_correction,
    geometric_grid,
    renewal_mass_asym,
    rho_pmf_asym,
    rho_tail_asym,
    special_constant,
    stretch_check,
    tiedown_ratio,
)
from renewal_intersection.intersect import build


def test_geometric_grid():
    np.testing.assert_array_equal(geometric_grid(1, 16), [1, 2, 4, 8, 16])
    np.testing.assert_array_equal(geometric_grid(1000, 10**6, 10), [1000, 10**4, 10**5, 10**6])
    with pytest.raises(ValueError):
        geometric_grid(0, 10)


def test_renewal_mass_ssrw():
    law = ssrw_return_law(10**4)
    m = mass_function(law, 10**4)
    n = 10**4
    assert renewal_mass_asym(law, n) == pytest.approx(1 / math.sqrt(math.pi * n), rel=1e-12)
    assert m.u[n] * math.sqrt(math.pi * n) == pytest.approx(1.0, abs=0.01)


def test_renewal_mass_branches():
    assert renewal_mass_asym(geometric_law(0.5, 64), 10) == 0.5
    law = build_reg_varying(1.5, horizon=2**14)
    assert renewal_mass_asym(law, 100) == pytest.approx(1 / law.mean)
    d = build_reg_varying(1.5, horizon=2**14, defect=0.3)
    assert renewal_mass_asym(d, 100) == pytest.approx(d.pmf[100] / 0.09)
    one = build_reg_varying(1.0, horizon=2**12)
    assert renewal_mass_asym(one, 1000) == pytest.approx(1 / one.truncated_mean(1000))


def test_renewal_mass_report_alpha15():
    law = build_reg_varying(1.5, horizon=2**16)
    rep = compare(law, "renewal-mass", geometric_grid(2**7, 2**16))
    assert rep.trend_ok
    assert abs(rep.final_ratio - 1) < 0.01


def test_rho_tail_transient_raises(transient_pair):
    with pytest.raises(InapplicableCase, match="rho_pmf_asym"):
        rho_tail_asym(transient_pair, 100)


def test_light_tails_raise():
    model = build(geometric_law(0.5, 64), geometric_law(0.5, 64), 64)
    with pytest.raises(InapplicableCase):
        rho_tail_asym(model, 10)


def test_ssrw_pair_tail_log_rate(ssrw_pair):
    rows = [ssrw_pair.rho_tail[n] * math.log(n) / math.pi for n in (10**3, 10**4, 10**5, 10**6)]
    dev = [abs(r - 1) for r in rows]
    assert dev[-1] < dev[0]
    rep = compare(ssrw_pair, "rho-tail", geometric_grid(10**3, 10**6, 10))
    assert rep.trend_ok


def test_jain_pruitt_value(ssrw_pair):
    rep = compare(ssrw_pair, "jain-pruitt", [1000])
    assert rep.asymptotic[0] == pytest.approx(6.584e-5, rel=1e-3)


def test_alpha07_formulas(pair07):
    n = 5000
    a = 0.4
    psi = pair07.w[n] * n**0.6
    assert rho_tail_asym(pair07, n) == pytest.approx(math.sin(math.pi * a) / math.pi / psi * n**-a)
    assert rho_pmf_asym(pair07, n) == pytest.approx(
        a * math.sin(math.pi * a) / math.pi / psi * n ** -(1 + a))


def test_tail_pmf_consistency(pair07):
    n, k = 10**5, 200
    slope = (rho_tail_asym(pair07, n - k) - rho_tail_asym(pair07, n + k)) / (2 * k)
    assert slope == pytest.approx(rho_pmf_asym(pair07, n), rel=0.05)


def test_finite_mean_tail_form(pair_15_25):
    tau, sigma = pair_15_25.tau, pair_15_25.sigma
    n = 1000
    want = sigma.mean * tau.tail(n) + tau.mean * sigma.tail(n)
    assert rho_tail_asym(pair_15_25, n) == pytest.approx(want)
    frenk = rho_tail_asym(pair_15_25, n, frenk_form=True)
    assert frenk == pytest.approx(sigma.mean * tau.tail(n)
                                  + tau.mean * 0.5 / 1.5 * sigma.tail(n))
    rep = compare(pair_15_25, "rho-tail", geometric_grid(10**3, 10**5, 10))
    assert abs(rep.final_ratio - 1) < 0.15


def test_special_constants():
    assert special_constant("gatga01", 0.7, 0.7) == pytest.approx(3.7265, abs=1e-4)
    assert special_constant("case2", 0.5, 0.5) == pytest.approx(1 / (4 * math.pi**2))
    assert special_constant("ga01-tga-gt1", 0.5, 2.0) == 1.0
    with pytest.raises(ValueError):
        special_constant("gatga01", 0.3, 0.4)
    with pytest.raises(ValueError):
        special_constant("nope", 0.5, 0.5)


def test_gatga01_constant_vanishes_at_boundary():
    eps = [0.1, 0.01, 0.001, 1e-4]
    vals = [special_constant("gatga01", 0.5, 0.5 + e) for e in eps]
    assert all(b < a for a, b in zip(vals, vals[1:]))
    assert vals[-1] < 1e-6


@settings(max_examples=100, deadline=None)
@given(a=st.floats(0.05, 0.95), b=st.floats(0.05, 0.95))
def test_gatga01_symmetric(a, b):
    if a + b <= 1.0 + 1e-9:
        return
    c = special_constant("gatga01", a, b)
    assert c > 0
    assert c == pytest.approx(special_constant("gatga01", b, a), rel=1e-14)


def test_finite_mean_correction_geometric():
    law = geometric_law(0.4, 256)
    m = mass_function(law, 256)
    for n in (5, 50, 200):
        rog, frenk = finite_mean_correction(law, n)
        assert abs(m.u[n] - 1 / law.mean) < 1e-9
        assert rog == pytest.approx(0.4 * 0.6 ** (n + 1), rel=1e-12)
        assert frenk == 0.0
    with pytest.raises(ValueError):
        finite_mean_correction(ssrw_return_law(64), 10)


def test_frenk_rogozin(law25, mass25):
    rep = compare(mass25, "frenk", geometric_grid(10**3, 10**5, 10))
    assert rep.trend_ok
    rog, frenk = finite_mean_correction(law25, 10**5)
    assert rog / frenk == pytest.approx(1.0, rel=0.05)


def test_de_haan_alpha_one():
    law = build_reg_varying(1.0, horizon=2**20)
    m = mass_function(law, 2**20)
    fit = de_haan_slope(m, [2, 4, 8], [10**3, 10**4, 10**5])
    assert fit.r2[-1] > 0.99
    assert not fit.degenerate
    dev = np.abs(fit.ell_ratio - 1)
    assert dev[-1] < dev[0]
    assert fit.ell_over_phi is not None


def test_de_haan_geometric_degenerate():
    m = mass_function(geometric_law(0.5, 256), 256)
    fit = de_haan_slope(m, [2, 4], [10, 20])
    assert fit.degenerate
    with pytest.raises(ValueError):
        de_haan_slope(m, [1.0], [10])
    with pytest.raises(ValueError):
        de_haan_slope(m, [4], [100])


def test_coupling_ssrw(ssrw_pair):
    chk = coupling_bound_check(ssrw_pair.mass_tau, ssrw_pair, geometric_grid(100, 10**5))
    assert math.isfinite(chk.c1_hat) and chk.c1_hat > 0
    assert chk.stable


def test_coupling_alpha25(mass25, pair25):
    chk = coupling_bound_check(mass25, pair25, geometric_grid(100, 10**5))
    assert chk.stable
    sups = list(chk.decade_sups.values())
    assert max(sups) / min(sups) <= 2.0
    # u_n P(rho_1 > n) is of order P(tau_1 > n)
    assert np.ptp(np.log(chk.rhs_over_tail)) < math.log(4)


def test_coupling_geometric():
    law = geometric_law(0.5, 128)
    m = mass_function(law, 128)
    model = build((law, m), (law, m), 128)
    chk = coupling_bound_check(m, model, [1, 2, 4, 8, 16])
    assert np.all(chk.ratio[1:] < 1e-12)
    assert chk.c1_hat == chk.ratio[0]


def test_stretch_geometric():
    N = 4096
    model = build(geometric_law(0.1, N), geometric_law(0.1, N), N)
    res = stretch_check(model, 2000, 2, 0.1)
    assert res.holds and res.within_window


def test_stretch_ssrw(ssrw_pair):
    res = stretch_check(ssrw_pair, 10**4, 10, 0.1)
    assert res.holds
    zero = stretch_check(ssrw_pair, 10**4, 0, 0.1)
    assert zero.holds and zero.slack > 0
    with pytest.raises(ValueError):
        stretch_check(ssrw_pair, 10, 11, 0.1)


def test_tiedown_oracles():
    g = tiedown_ratio(geometric_law(0.3, 200), 100)
    np.testing.assert_allclose(g.ratios, 1.0, rtol=1e-12)
    d = tiedown_ratio(deterministic_law(200), 100)
    assert d.ratio == 1.0 and d.argmax == 100


def test_tiedown_ssrw():
    law = ssrw_return_law(2 * 10**3)
    r1 = tiedown_ratio(law, 10**2).ratio
    r2 = tiedown_ratio(law, 10**3).ratio
    assert math.isfinite(r1) and math.isfinite(r2)
    assert max(r1, r2) / min(r1, r2) < 2


def test_tiedown_brute_force():
    law = build_reg_varying(0.6, horizon=64)
    m = mass_function(law, 64)
    n = 20
    res = tiedown_ratio(law, n, m)
    for mm in (0, 7, 20):
        s = n - mm
        num = sum(law.pmf[j + s] * m.u[n - j] for j in range(1, n + 1)) / law.tails[s]
        assert res.ratios[mm] == pytest.approx(num / m.u[2 * n], rel=1e-12)


def test_compare_geometric_exact(tmp_path):
    model = build(geometric_law(0.5, 64), geometric_law(0.3, 64), 64)
    rep = compare(model, "geometric-exact", geometric_grid(1, 64))
    assert rep.exact_match and rep.trend_ok
    assert np.max(np.abs(rep.ratio - 1)) < 1e-9
    rep.to_csv(tmp_path / "r.csv")
    rep.to_json(tmp_path / "r.json")
    header = next(csv.reader(open(tmp_path / "r.csv")))
    assert header == ["n", "exact", "asymptotic", "ratio", "abs_err", "rel_err"]
    assert set(json.loads((tmp_path / "r.json").read_text())) == {
        "case_id", "final_ratio", "trend_ok", "fitted_constants"}


def test_compare_errors(pair07):
    with pytest.raises(InapplicableCase):
        compare(pair07, "unknown", [10])
    with pytest.raises(InapplicableCase):
        compare(pair07, "jain-pruitt", [10])
    with pytest.raises(InapplicableCase):
        compare(pair07, "transient", [10])
    with pytest.raises(InapplicableCase):
        compare(ssrw_return_law(64), "rho-tail", [10])
    with pytest.raises(ValueError):
        compare(pair07, "rho-tail", [2**18])


def test_report_validation():
    with pytest.raises(ValueError):
        AsymptoticReport("x", np.array([2, 1]), np.ones(2), np.ones(2))
    with pytest.raises(InapplicableCase):
        AsymptoticReport("x", np.array([1, 2]), np.ones(2), np.array([1.0, 0.0]))


def test_ga01_tga_gt1():
    N = 2**14
    model = build(build_reg_varying(0.6, horizon=N), build_reg_varying(1.5, horizon=N), N)
    rep = compare(model, "ga01-tga-gt1", geometric_grid(2**8, N))
    assert rep.trend_ok


def test_case2_ssrw(ssrw_pair):
    rep = compare(ssrw_pair, "case2", geometric_grid(2**10, 2**20))
    assert rep.trend_ok


def test_gatga01_pair(pair07):
    rep = compare(pair07, "gatga01", geometric_grid(2**10, 2**17))
    assert rep.trend_ok


@pytest.mark.parametrize("name", ["ssrw_pair", "pair07", "pair_15_25", "transient_pair"])
def test_branch_totality_and_positivity(name, request):
    model = request.getfixturevalue(name)
    for n in (10, 1000, model.N):
        assert rho_pmf_asym(model, n) > 0
        if model.recurrent:
            assert rho_tail_asym(model, n) > 0


def test_case_registry():
    assert {"jain-pruitt", "geometric-exact", "frenk", "rogozin", "transient"} <= set(CASES)
