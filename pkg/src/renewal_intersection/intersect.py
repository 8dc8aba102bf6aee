"""The intersection rho = tau ∩ sigma of two independent renewal processes.

P(n in rho) = P(n in tau) P(n in sigma) is computed exactly from the two
mass functions; the law of rho_1 follows by inverting the renewal equation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from ._io import write_csv, write_json
from ._kernels import compensated_cumsum
from .engine import MassFunction, invert_mass_counted, mass_function
from .laws import GapLaw

__all__ = ["Classification", "IntersectionModel", "classify", "build", "psi_star_eval",
           "u_star", "v_eval", "mass_exponent"]


@dataclass(frozen=True)
class Classification:
    """Recurrence of rho with its exponents.

    ``case`` names the criterion that decided recurrence: ``"transient-marginal"``,
    ``"i"`` (strict exponent inequality), ``"ii"``, ``"iii"`` or ``"partial-sums"``.
    """

    recurrent: bool
    theta_star: float
    alpha_star: float
    heuristic: bool = False
    case: str = "i"

    def to_dict(self) -> dict:
        def num(x):
            return x if math.isfinite(x) else None

        return {
            "recurrent": self.recurrent,
            "theta_star": num(self.theta_star),
            "alpha_star": num(self.alpha_star),
            "heuristic": self.heuristic,
            "case": self.case,
        }


def mass_exponent(alpha: float, recurrent: bool) -> float:
    """Power decay exponent of P(n in tau) for a law with tail index alpha."""
    if recurrent:
        return 1.0 - min(alpha, 1.0)
    return 1.0 + alpha


def _log_power(phi) -> float | None:
    return None if phi is None else float(phi.power)


def _boundary_divergent(alpha, alpha_t, phi, phi_t, partial_sums) -> tuple[bool, bool, str]:
    """Decide the theta* = 1 boundary.  Returns (recurrent, heuristic, case)."""
    a, at = _log_power(phi), _log_power(phi_t)
    if 0 < alpha < 1 and a is not None and at is not None:
        # sum 1/(n phi phi~) with phi phi~ ~ log^(a + a~)
        return a + at <= 1.0, False, "ii"
    if alpha == 0 and alpha_t == 1 and a is not None and at is not None:
        # phi / (n r^2 mu~_n) ~ 1 / (n log^b): r_n ~ log^(a+1), mu~_n ~ log^max(a~+1, 0)
        b = a + 2.0 + max(at + 1.0, 0.0)
        return b <= 1.0, False, "iii"
    if partial_sums is None:
        raise ValueError("boundary case needs slowly varying descriptors or partial sums")
    return _partial_sum_growth(partial_sums), True, "partial-sums"


def _partial_sum_growth(U) -> bool:
    """Does U_n diverge, judged from its last two octaves?

    Terms ~ 1/(n log(n)^b) give octave increments ~ log(n)^-b; b is read off
    the two increments and the series called divergent iff b <= 1.
    """
    U = np.asarray(U, dtype=float)
    N = len(U) - 1
    if N < 64:
        return True
    n1, n2 = N // 4, N // 2
    inc_lo = U[n2] - U[n1]
    inc_hi = U[N] - U[n2]
    if inc_hi <= 0:
        return False
    if inc_hi >= inc_lo:
        return True
    b = -math.log(inc_hi / inc_lo) / math.log(math.log(n2) / math.log(n1))
    return bool(b <= 1.0)


def classify(alpha: float, alpha_tilde: float, recurrent: bool = True,
             recurrent_tilde: bool = True, phi=None, phi_tilde=None,
             partial_sums=None) -> Classification:
    """Recurrence of rho, theta* and alpha*, with alpha <= alpha~ enforced.

    ``phi``/``phi_tilde`` are the slowly varying descriptors; boundary cases
    fall back to the growth of ``partial_sums`` (the renewal function of rho)
    and are flagged as heuristic.
    """
    if alpha > alpha_tilde:
        alpha, alpha_tilde = alpha_tilde, alpha
        recurrent, recurrent_tilde = recurrent_tilde, recurrent
        phi, phi_tilde = phi_tilde, phi
    theta = mass_exponent(alpha, recurrent) + mass_exponent(alpha_tilde, recurrent_tilde)
    if not (recurrent and recurrent_tilde):
        return Classification(False, theta, theta - 1.0, False, "transient-marginal")
    if theta < 1.0:
        is_rec, heuristic, case = True, False, "i"
    elif theta > 1.0:
        is_rec, heuristic, case = False, False, "i"
    else:
        is_rec, heuristic, case = _boundary_divergent(alpha, alpha_tilde, phi, phi_tilde,
                                                      partial_sums)
    if not is_rec:
        return Classification(False, theta, theta - 1.0, heuristic, case)
    alpha_star = alpha if alpha >= 1.0 else 1.0 - theta
    return Classification(True, theta, alpha_star, heuristic, case)


@dataclass(frozen=True, eq=False)
class IntersectionModel:
    """Exact finite-horizon description of rho = tau ∩ sigma on 0..N.

    ``tau`` has the smaller tail index; ``swapped`` records whether the
    inputs were exchanged to arrange that.
    """

    tau: GapLaw
    sigma: GapLaw
    mass_tau: MassFunction
    mass_sigma: MassFunction
    w: np.ndarray
    dw: np.ndarray
    classification: Classification
    rho_pmf: np.ndarray
    rho_tail: np.ndarray
    U_star: np.ndarray
    v: np.ndarray
    e_abs_rho: float
    swapped: bool = False
    n_clipped: int = 0
    meta: dict = field(default_factory=dict)

    @property
    def N(self) -> int:
        return len(self.w) - 1

    @property
    def recurrent(self) -> bool:
        return self.classification.recurrent

    @property
    def theta_star(self) -> float:
        return self.classification.theta_star

    @property
    def alpha_star(self) -> float:
        return self.classification.alpha_star

    @property
    def psi_star(self) -> np.ndarray:
        """psi*(n) = w_n n^theta* on 0..N (nan where theta* is infinite)."""
        n = np.arange(self.N + 1, dtype=float)
        if not math.isfinite(self.theta_star):
            return np.full(self.N + 1, np.nan)
        with np.errstate(divide="ignore"):
            out = self.w * n**self.theta_star
        out[0] = self.w[0]
        return out

    def rho_mean(self) -> float:
        """E[rho_1] from the exact table, with a regular-variation tail estimate."""
        if not self.recurrent:
            return math.inf
        G = self.rho_tail
        head = math.fsum(G[: self.N])
        a = self.alpha_star
        if not math.isfinite(a):
            return head + _geometric_continuation(G)
        if a <= 1.0:
            return math.inf
        return head + G[-1] * self.N / (a - 1.0)

    def summary(self) -> dict:
        d = self.classification.to_dict()
        d["swapped"] = self.swapped
        d["N"] = self.N
        d["e_abs_rho"] = self.e_abs_rho if math.isfinite(self.e_abs_rho) else None
        d["clipped"] = self.n_clipped
        return d

    def to_csv(self, path) -> None:
        n = np.arange(self.N + 1)
        write_csv(path, ["n", "w", "g", "G", "v", "psi_star"],
                  [n.tolist(), self.w, self.rho_pmf, self.rho_tail, self.v, self.psi_star])

    def summary_json(self, path) -> None:
        write_json(path, self.summary())


def _as_law_and_mass(x, N: int, method: str, cache: dict):
    if isinstance(x, tuple):
        law, mass = x
    else:
        law, mass = x, None
    if mass is None:
        key = id(law)
        if key not in cache:
            cache[key] = mass_function(law, N, method)
        mass = cache[key]
    if mass.N < N:
        raise ValueError(f"mass function has length {mass.N} < N={N}")
    return law, mass


def _geometric_continuation(x: np.ndarray) -> float:
    """sum_{k>=N} x_k for a geometrically decaying tail, from the last octave."""
    N = len(x) - 1
    if x[-1] < 1e-13 or N < 2:
        return float(x[-1])
    ratio = (x[-1] / x[N // 2]) ** (1.0 / (N - N // 2))
    return float(x[-1] / (1.0 - ratio)) if ratio < 1 else math.inf


def _transient_total(w: np.ndarray, theta: float) -> float:
    """sum_{n>=0} w_n with a power-law tail beyond the table."""
    N = len(w) - 1
    head = math.fsum(w)
    if not math.isfinite(theta):
        return head + _geometric_continuation(w) - w[-1]
    if theta <= 1.0:
        return math.inf
    return float(head + w[-1] * N**theta * float(special.zeta(theta, N + 1)))


def build(tau, sigma, N: int, method: str = "fft") -> IntersectionModel:
    """Build the model from two laws (or ``(law, MassFunction)`` pairs)."""
    cache: dict = {}
    law_a, mass_a = _as_law_and_mass(tau, N, method, cache)
    law_b, mass_b = _as_law_and_mass(sigma, N, method, cache)
    swapped = law_a.alpha > law_b.alpha
    if swapped:
        law_a, law_b, mass_a, mass_b = law_b, law_a, mass_b, mass_a

    u, ut = mass_a.u[: N + 1], mass_b.u[: N + 1]
    du, dut = mass_a.du[: N + 1], mass_b.du[: N + 1]
    w = u * ut
    w[0] = 1.0
    dw = np.empty(N + 1)
    dw[0] = 1.0
    dw[1:] = du[1:] * ut[1:] + u[:-1] * dut[1:]
    U_star = compensated_cumsum(w)

    cls = classify(law_a.alpha, law_b.alpha, law_a.recurrent, law_b.recurrent,
                   law_a.phi if law_a.kind in ("reg_varying", "ssrw") else None,
                   law_b.phi if law_b.kind in ("reg_varying", "ssrw") else None,
                   partial_sums=U_star)

    g, G, n_clipped, _ = invert_mass_counted(w, method, "tail" if cls.recurrent else "direct",
                                             dw=dw)

    v = G**2 * w
    e_abs = math.inf if cls.recurrent else _transient_total(w, cls.theta_star)
    for arr in (w, dw, g, G, U_star, v):
        arr.setflags(write=False)
    return IntersectionModel(law_a, law_b, mass_a, mass_b, w, dw, cls, g, G, U_star, v,
                             e_abs, swapped, n_clipped, {"method": method})


def _check_n(model: IntersectionModel, n: int) -> int:
    if not 0 <= n <= model.N:
        raise ValueError(f"n={n} outside [0, {model.N}]")
    return int(n)


def psi_star_eval(model: IntersectionModel, n: int) -> float:
    n = _check_n(model, n)
    return float(model.w[n] * n**model.theta_star) if n else 1.0


def u_star(model: IntersectionModel, n: int) -> float:
    return float(model.U_star[_check_n(model, n)])


def v_eval(model: IntersectionModel, n: int) -> float:
    return float(model.v[_check_n(model, n)])
