"""Closed-form asymptotics for renewal and intersection quantities, and
harnesses comparing them against the exact finite-horizon values.

Slowly varying factors of rho are always taken numerically from the model,
psi*(n) = w_n n^theta*, never from closed-form algebra.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._io import write_csv, write_json
from .engine import MassFunction, mass_function
from .intersect import IntersectionModel
from .laws import GapLaw

__all__ = [
    "AsymptoticReport",
    "CASES",
    "geometric_grid",
    "renewal_mass_asym",
    "rho_tail_asym",
    "rho_pmf_asym",
    "special_constant",
    "finite_mean_correction",
    "de_haan_slope",
    "coupling_bound_check",
    "stretch_check",
    "tiedown_ratio",
    "compare",
]


class InapplicableCase(ValueError):
    """The requested asymptotic does not apply to the given law or model."""


def geometric_grid(start: int, stop: int, ratio: float = 2.0) -> np.ndarray:
    """Sorted distinct integers start, start*ratio, ... not exceeding stop."""
    if start < 1 or stop < start or ratio <= 1:
        raise ValueError("grid needs 1 <= start <= stop and ratio > 1")
    k = int(math.floor(math.log(stop / start) / math.log(ratio) + 1e-9))
    pts = np.round(start * ratio ** np.arange(k + 1)).astype(np.int64)
    return np.unique(np.clip(pts, start, stop))


# ---------------------------------------------------------------- renewal mass


def renewal_mass_asym(law: GapLaw, n: int) -> float:
    """Leading asymptotic of P(n in tau), branch chosen by the law's class."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if not law.recurrent:
        return law.pmf_at(n) / law.defect**2
    if law.finite_mean:
        return 1.0 / law.mean
    a = law.alpha
    if a >= 1.0:
        return 1.0 / _truncated_mean(law, n)
    if a > 0.0:
        return a * math.sin(math.pi * a) / math.pi * n ** -(1.0 - a) / law.phi_full(n)
    return law.pmf_at(n) / law.tail(n) ** 2


def _truncated_mean(law: GapLaw, n: int) -> float:
    if n <= law.horizon:
        return law.truncated_mean(n)
    raise ValueError(f"truncated mean needs n <= horizon {law.horizon}")


def _mean_or_truncated(law: GapLaw, n: int) -> float:
    return law.mean if law.finite_mean else _truncated_mean(law, n)


# ---------------------------------------------------------------- rho_1 law


def _psi(model: IntersectionModel, n: int) -> float:
    return float(model.w[n]) * n**model.theta_star


def _psi_sum(model: IntersectionModel, n: int) -> float:
    # sum_{j=1}^n psi*(j)/j
    j = np.arange(1, n + 1, dtype=float)
    return math.fsum(model.w[1 : n + 1] * j ** (model.theta_star - 1.0))


def _check_model_n(model: IntersectionModel, n: int) -> None:
    if not 1 <= n <= model.N:
        raise ValueError(f"n={n} outside [1, {model.N}]")


def _light_tail_guard(model: IntersectionModel) -> None:
    if not math.isfinite(model.alpha_star):
        raise InapplicableCase("light-tailed marginals: no regularly varying asymptotic")


def rho_tail_asym(model: IntersectionModel, n: int, frenk_form: bool = False) -> float:
    """Asymptotic of P(rho_1 > n) for recurrent rho.

    ``frenk_form`` selects the two-term variant mu~ r_n + mu (a-1)/(a~-1) r~_n,
    valid when 1 < alpha <= alpha~.
    """
    if not model.recurrent:
        raise InapplicableCase("rho is transient: use rho_pmf_asym transient branch")
    _light_tail_guard(model)
    _check_model_n(model, n)
    a = model.alpha_star
    if 0.0 < a < 1.0:
        return math.sin(math.pi * a) / math.pi / _psi(model, n) * n**-a
    if a == 0.0:
        return 1.0 / _psi_sum(model, n)
    tau, sigma = model.tau, model.sigma
    if frenk_form:
        if not 1.0 < tau.alpha <= sigma.alpha:
            raise InapplicableCase("Frenk form needs 1 < alpha <= alpha~")
        return (sigma.mean * tau.tail(n)
                + tau.mean * (tau.alpha - 1.0) / (sigma.alpha - 1.0) * sigma.tail(n))
    return (_mean_or_truncated(sigma, n) * tau.tail(n)
            + _mean_or_truncated(tau, n) * sigma.tail(n))


def rho_pmf_asym(model: IntersectionModel, n: int) -> float:
    """Asymptotic of P(rho_1 = n), transient or recurrent."""
    _check_model_n(model, n)
    if not model.recurrent:
        if not math.isfinite(model.e_abs_rho):
            raise InapplicableCase("E|rho| is not finite")
        return float(model.w[n]) / model.e_abs_rho**2
    _light_tail_guard(model)
    a = model.alpha_star
    if 0.0 < a < 1.0:
        return a * math.sin(math.pi * a) / math.pi / _psi(model, n) * n ** -(1.0 + a)
    if a == 0.0:
        return _psi(model, n) / n / _psi_sum(model, n) ** 2
    tau, sigma = model.tau, model.sigma
    return (_mean_or_truncated(sigma, n) * tau.pmf_at(n)
            + _mean_or_truncated(tau, n) * sigma.pmf_at(n))


def special_constant(case: str, alpha: float, alpha_tilde: float) -> float:
    """Constants of the explicit subcases.

    ``"gatga01"``: alpha, alpha~ in (0,1) with alpha + alpha~ > 1.
    ``"case2"``: alpha, alpha~ in (0,1) with alpha + alpha~ = 1.
    ``"ga01-tga-gt1"``: alpha in (0,1), alpha~ >= 1 (unit constant).
    """
    a, at = sorted((float(alpha), float(alpha_tilde)))
    if case == "gatga01":
        if not (0 < a < 1 and 0 < at < 1 and a + at > 1):
            raise ValueError("c_{a,a~} needs a, a~ in (0,1) and a + a~ > 1")
        s = a + at - 1.0
        return (math.pi * s * math.sin(math.pi * s)
                / (a * at * math.sin(math.pi * a) * math.sin(math.pi * at)))
    if case == "case2":
        if not (0 < a < 1 and 0 < at < 1 and abs(a + at - 1.0) < 1e-12):
            raise ValueError("c' needs a, a~ in (0,1) and a + a~ = 1")
        return a * at * math.sin(math.pi * a) * math.sin(math.pi * at) / math.pi**2
    if case == "ga01-tga-gt1":
        if not (0 < a < 1 and at >= 1):
            raise ValueError("case needs a in (0,1) and a~ >= 1")
        return 1.0
    raise ValueError(f"unknown special constant {case!r}")


# ---------------------------------------------------------------- corrections


def finite_mean_correction(law: GapLaw, n: int) -> tuple[float, float]:
    """Predicted u_n - 1/mu: (Rogozin tail-sum form, Frenk n r_n form)."""
    if not (law.recurrent and law.finite_mean):
        raise ValueError("finite-mean correction needs a recurrent law with finite mean")
    mu2 = law.mean**2
    rogozin = law.tail_sum(n) / mu2
    if math.isinf(law.alpha):
        frenk = 0.0
    elif law.alpha > 1.0:
        frenk = n * law.tail(n) / (mu2 * (law.alpha - 1.0))
    else:
        raise ValueError("Frenk form needs alpha > 1")
    return rogozin, frenk


@dataclass
class DeHaanFit:
    """Per-n least-squares fit of u_{floor(lambda n)} - u_n = ell_n log(lambda)."""

    n: np.ndarray
    lambdas: np.ndarray
    ell_hat: np.ndarray
    r2: np.ndarray
    degenerate: bool
    ell_over_phi: np.ndarray | None = None

    @property
    def ell_ratio(self) -> np.ndarray:
        """ell_hat at successive grid points, later over earlier."""
        return self.ell_hat[1:] / self.ell_hat[:-1]


def de_haan_slope(u: MassFunction, lambda_grid, n_grid) -> DeHaanFit:
    """Fit the de Haan auxiliary sequence through the origin for each n."""
    lam = np.asarray(lambda_grid, dtype=float)
    ns = np.asarray(n_grid, dtype=np.int64)
    if lam.size < 1 or np.any(lam <= 1) or ns.size < 1 or np.any(ns < 1):
        raise ValueError("degenerate grid: need lambdas > 1 and n >= 1")
    if int(np.floor(lam.max() * ns.max())) > u.N:
        raise ValueError("grid reaches past the mass function")
    x = np.log(lam)
    ell = np.empty(ns.size)
    r2 = np.empty(ns.size)
    for i, n in enumerate(ns):
        y = u.u[np.floor(lam * n).astype(np.int64)] - u.u[n]
        sxx = float(x @ x)
        ell[i] = float(x @ y) / sxx
        ss_tot = float(y @ y)
        ss_res = float(((y - ell[i] * x) ** 2).sum())
        r2[i] = 1.0 - ss_res / ss_tot if ss_tot > 0 else math.nan
    degenerate = bool(np.all(ell == 0))
    ell_over_phi = None
    if isinstance(u.source, GapLaw) and u.source.kind in ("reg_varying", "ssrw"):
        ell_over_phi = ell / u.source.phi_full(ns.astype(float))
    return DeHaanFit(ns, lam, ell, r2, degenerate, ell_over_phi)


# ---------------------------------------------------------------- inequalities


@dataclass
class CouplingCheck:
    """c1 estimates |u_n - u_{n-1}| / (u_n P(rho_1 > n)) on a grid."""

    n: np.ndarray
    ratio: np.ndarray
    c1_hat: float
    half_ratio: float
    stable: bool
    decade_sups: dict
    rhs_over_tail: np.ndarray


def coupling_bound_check(u: MassFunction, model: IntersectionModel, n_grid) -> CouplingCheck:
    """Fitted constant of the coupling bound for a law intersected with itself."""
    ns = np.asarray(n_grid, dtype=np.int64)
    if ns.size < 2 or ns.min() < 1 or ns.max() > min(u.N, model.N):
        raise ValueError("grid must lie in [1, N] and have at least two points")
    G = model.rho_tail[ns]
    rhs = u.u[ns] * G
    ratio = np.abs(u.du[ns]) / rhs
    half = ns.size // 2
    lo_sup, hi_sup = float(ratio[:half].max()), float(ratio[half:].max())
    if lo_sup > 0:
        half_ratio = hi_sup / lo_sup
    else:
        half_ratio = 0.0 if hi_sup == 0 else math.inf
    decades: dict = {}
    for n, r in zip(ns.tolist(), ratio.tolist()):
        d = int(math.floor(math.log10(n)))
        decades[d] = max(decades.get(d, 0.0), r)
    law = u.source if isinstance(u.source, GapLaw) else None
    if law is not None:
        tails = np.array([law.tail(int(n)) for n in ns])
    else:
        tails = np.full(ns.size, np.nan)
    with np.errstate(divide="ignore", invalid="ignore"):
        rhs_over_tail = rhs / tails
    return CouplingCheck(ns, ratio, float(ratio.max()), half_ratio, half_ratio <= 2.0,
                         decades, rhs_over_tail)


@dataclass
class StretchResult:
    holds: bool
    slack: float
    lower_slack: float
    upper_slack: float
    within_window: bool


def stretch_check(model: IntersectionModel, n: int, k: int, delta: float,
                  eps: float | None = None) -> StretchResult:
    """Check (1-d) g_{n-k} - d v_n <= g_n <= (1+d) g_{n+k} + d v_n on the exact g.

    Slacks are relative to g_n; ``within_window`` tells whether k < eps n
    (default eps = delta**3).  Violations are returned, not raised.
    """
    if not (0 <= k <= n and n + k <= model.N):
        raise ValueError("need 0 <= k <= n and n + k <= N")
    g, v = model.rho_pmf, model.v
    lower = g[n] - ((1.0 - delta) * g[n - k] - delta * v[n])
    upper = (1.0 + delta) * g[n + k] + delta * v[n] - g[n]
    scale = g[n] if g[n] > 0 else 1.0
    lo, hi = float(lower / scale), float(upper / scale)
    eps = delta**3 if eps is None else eps
    return StretchResult(lo >= 0 and hi >= 0, min(lo, hi), lo, hi, bool(k < eps * n))


@dataclass
class TiedownResult:
    n: int
    ratio: float
    argmax: int
    ratios: np.ndarray


def tiedown_ratio(law: GapLaw, n: int, mass: MassFunction | None = None,
                  block: int = 512) -> TiedownResult:
    """max over m of P(2n in tau | X_n = m) / P(2n in tau), X_n the last renewal <= n.

    Given X_n = m the next gap exceeds s = n - m, so the conditional equals
    sum_{j=1}^n f_{j+s} u_{n-j} / r_s.  Values of m with P(X_n = m) = 0 are
    skipped.
    """
    if n < 1 or 2 * n > law.horizon:
        raise ValueError(f"need 1 <= n and 2n <= horizon {law.horizon}")
    if mass is None:
        mass = mass_function(law, 2 * n)
    if mass.N < 2 * n:
        raise ValueError("mass function must reach 2n")
    u = mass.u
    f = np.asarray(law.pmf[1 : 2 * n + 1])
    windows = np.lib.stride_tricks.sliding_window_view(f, n)  # row s: f_{s+1..s+n}
    rev_u = u[n - 1 :: -1][:n]  # u_{n-1}, ..., u_0
    S = np.empty(n + 1)
    for a in range(0, n + 1, block):
        b = min(a + block, n + 1)
        S[a:b] = np.ascontiguousarray(windows[a:b]) @ rev_u
    s = np.arange(n + 1)
    m = n - s
    r = np.asarray(law.tails[: n + 1])
    possible = (u[m] > 0) & (r > 0)
    if not possible.any() or u[2 * n] <= 0:
        raise ValueError("zero denominator in tie-down ratio")
    ratios = np.full(n + 1, np.nan)
    ratios[possible] = S[possible] / r[possible] / u[2 * n]
    # index by m rather than s
    ratios = ratios[::-1]
    idx = int(np.nanargmax(ratios))
    return TiedownResult(n, float(ratios[idx]), idx, ratios)


# ---------------------------------------------------------------- reports


@dataclass
class AsymptoticReport:
    """Exact vs asymptotic values of one case on a geometric n-grid."""

    case_id: str
    n: np.ndarray
    exact: np.ndarray
    asymptotic: np.ndarray
    fitted_constants: dict = field(default_factory=dict)
    ell_hat: np.ndarray | None = None

    def __post_init__(self):
        if np.any(np.diff(self.n) <= 0):
            raise ValueError("report rows must be sorted by n")
        r = self.ratio
        if not np.all(np.isfinite(r) & (r > 0)):
            raise InapplicableCase(f"{self.case_id}: ratios not finite and positive")

    @property
    def ratio(self) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            return self.exact / self.asymptotic

    @property
    def abs_err(self) -> np.ndarray:
        return np.abs(self.exact - self.asymptotic)

    @property
    def rel_err(self) -> np.ndarray:
        return self.abs_err / np.abs(self.asymptotic)

    @property
    def final_ratio(self) -> float:
        return float(self.ratio[-1])

    @property
    def exact_match(self) -> bool:
        return bool(np.max(np.abs(self.ratio - 1.0)) <= 1e-9)

    @property
    def trend_ok(self) -> bool:
        """|ratio - 1| smaller at the top of the grid than at the bottom."""
        r = self.ratio
        return self.exact_match or bool(abs(r[-1] - 1.0) < abs(r[0] - 1.0))

    def verdict(self) -> dict:
        return {
            "case_id": self.case_id,
            "final_ratio": self.final_ratio,
            "trend_ok": self.trend_ok,
            "fitted_constants": self.fitted_constants,
        }

    def to_csv(self, path) -> None:
        write_csv(path, ["n", "exact", "asymptotic", "ratio", "abs_err", "rel_err"],
                  [self.n.tolist(), self.exact, self.asymptotic, self.ratio, self.abs_err,
                   self.rel_err])

    def to_json(self, path) -> None:
        write_json(path, self.verdict())


def _need_model(obj, case_id) -> IntersectionModel:
    if not isinstance(obj, IntersectionModel):
        raise InapplicableCase(f"case {case_id} needs an intersection model")
    return obj


def _need_law(obj, case_id) -> tuple[GapLaw, MassFunction | None]:
    if isinstance(obj, GapLaw):
        return obj, None
    if isinstance(obj, MassFunction) and isinstance(obj.source, GapLaw):
        return obj.source, obj
    raise InapplicableCase(f"case {case_id} needs a single law")


def _law_mass(obj, case_id, nmax):
    law, mass = _need_law(obj, case_id)
    if mass is None or mass.N < nmax:
        mass = mass_function(law, nmax)
    return law, mass


def _case_jain_pruitt(obj, ns):
    model = _need_model(obj, "jain-pruitt")
    if not (model.tau.kind == "ssrw" and model.sigma.kind == "ssrw"):
        raise InapplicableCase("jain-pruitt needs two SSRW laws")
    nf = ns.astype(float)
    return model.rho_pmf[ns], math.pi / (nf * np.log(nf) ** 2), {}


def _case_geometric_exact(obj, ns):
    model = _need_model(obj, "geometric-exact")
    if not (model.tau.kind == "geometric" and model.sigma.kind == "geometric"):
        raise InapplicableCase("geometric-exact needs two geometric laws")
    pq = model.tau.params["p"] * model.sigma.params["p"]
    return model.rho_pmf[ns], pq * (1.0 - pq) ** (ns - 1.0), {"pq": pq}


def _case_renewal_mass(obj, ns):
    law, mass = _law_mass(obj, "renewal-mass", int(ns.max()))
    asym = np.array([renewal_mass_asym(law, int(n)) for n in ns])
    return mass.u[ns], asym, {}


def _case_rho_tail(obj, ns, frenk_form=False):
    model = _need_model(obj, "rho-tail")
    asym = np.array([rho_tail_asym(model, int(n), frenk_form) for n in ns])
    return model.rho_tail[ns], asym, {"alpha_star": model.alpha_star}


def _case_rho_pmf(obj, ns):
    model = _need_model(obj, "rho-pmf")
    asym = np.array([rho_pmf_asym(model, int(n)) for n in ns])
    return model.rho_pmf[ns], asym, {"alpha_star": model.alpha_star}


def _case_transient(obj, ns):
    model = _need_model(obj, "transient")
    if model.recurrent:
        raise InapplicableCase("transient case needs a transient intersection")
    exact, asym, _ = _case_rho_pmf(model, ns)
    return exact, asym, {"e_abs_rho": model.e_abs_rho}


def _case_gatga01(obj, ns):
    model = _need_model(obj, "gatga01")
    a, at = model.tau.alpha, model.sigma.alpha
    c = special_constant("gatga01", a, at)
    nf = ns.astype(float)
    asym = c * model.tau.phi_full(nf) * model.sigma.phi_full(nf) * nf ** -(a + at)
    return model.rho_pmf[ns], asym, {"c": c}


def _case_case2(obj, ns):
    model = _need_model(obj, "case2")
    a, at = model.tau.alpha, model.sigma.alpha
    cp = special_constant("case2", a, at)
    k = np.arange(1, int(ns.max()) + 1, dtype=float)
    pp = model.tau.phi_full(k) * model.sigma.phi_full(k)
    partial = np.cumsum(1.0 / (k * pp))
    asym = partial[ns - 1] ** -2 / (ns * pp[ns - 1]) / cp
    return model.rho_pmf[ns], asym, {"c_prime": cp}


def _case_ga01_tga_gt1(obj, ns):
    model = _need_model(obj, "ga01-tga-gt1")
    if not model.recurrent:
        raise InapplicableCase("ga01-tga-gt1 needs a recurrent intersection")
    special_constant("ga01-tga-gt1", model.tau.alpha, model.sigma.alpha)
    sigma = model.sigma
    asym = np.array([_mean_or_truncated(sigma, int(n)) * model.tau.pmf_at(int(n)) for n in ns])
    return model.rho_pmf[ns], asym, {}


def _finite_mean_law(obj, case_id, ns):
    law, mass = _law_mass(obj, case_id, int(ns.max()))
    if not (law.recurrent and law.finite_mean) or math.isinf(law.alpha):
        raise InapplicableCase(f"{case_id} needs a heavy-tailed law with finite mean")
    exact = mass.u[ns] - 1.0 / law.mean
    preds = np.array([finite_mean_correction(law, int(n)) for n in ns])
    return law, exact, preds


def _case_frenk(obj, ns):
    law, exact, preds = _finite_mean_law(obj, "frenk", ns)
    extra = {"mu": law.mean, "rogozin_over_frenk": float(preds[-1, 0] / preds[-1, 1])}
    return exact, preds[:, 1], extra


def _case_rogozin(obj, ns):
    law, exact, preds = _finite_mean_law(obj, "rogozin", ns)
    return exact, preds[:, 0], {"mu": law.mean}


CASES = {
    "jain-pruitt": _case_jain_pruitt,
    "geometric-exact": _case_geometric_exact,
    "renewal-mass": _case_renewal_mass,
    "rho-tail": _case_rho_tail,
    "rho-tail-frenk": lambda obj, ns: _case_rho_tail(obj, ns, frenk_form=True),
    "rho-pmf": _case_rho_pmf,
    "transient": _case_transient,
    "gatga01": _case_gatga01,
    "case2": _case_case2,
    "ga01-tga-gt1": _case_ga01_tga_gt1,
    "frenk": _case_frenk,
    "rogozin": _case_rogozin,
}


def compare(obj, case_id: str, n_grid) -> AsymptoticReport:
    """Exact vs asymptotic report for ``case_id`` on ``n_grid``.

    ``obj`` is an IntersectionModel for the rho cases and a GapLaw (or its
    MassFunction) for renewal-mass, frenk and rogozin.
    """
    if case_id not in CASES:
        raise InapplicableCase(f"unknown case {case_id!r}")
    ns = np.asarray(n_grid, dtype=np.int64)
    if ns.size == 0 or ns.min() < 1:
        raise ValueError("grid must be nonempty with n >= 1")
    if isinstance(obj, IntersectionModel) and ns.max() > obj.N:
        raise ValueError(f"grid exceeds model horizon {obj.N}")
    exact, asym, consts = CASES[case_id](obj, ns)
    return AsymptoticReport(case_id, ns, np.asarray(exact, float), np.asarray(asym, float),
                            consts)
