"""Inter-arrival laws of discrete renewal processes.

A law is stored as a finite probability table ``pmf[1..horizon]`` together
with the exact tail ``P(tau_1 > n)`` on the same range and an analytic
continuation of the tail past the horizon.  Regularly varying laws follow

    P(tau_1 = n) = scale * phi(n) * n**-(1 + alpha)        for every n >= 1,

where ``scale`` is the single constant making the total mass (including the
defect ``P(tau_1 = inf)``) equal to one.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import reduce
from pathlib import Path

import numpy as np
from scipy import integrate, special

__all__ = [
    "SlowVaryDesc",
    "GapLaw",
    "build_reg_varying",
    "ssrw_return_law",
    "geometric_law",
    "deterministic_law",
    "from_pmf",
    "law_from_dict",
    "load_law",
]

# explicit terms summed past a table edge before switching to the integral
_EXPLICIT_TAIL_TERMS = 4096


@dataclass(frozen=True)
class SlowVaryDesc:
    """Slowly varying factor ``const * log(n + e) ** power``.

    ``power == 0`` gives a constant, ``const == 1`` a pure log power and
    anything else their product.
    """

    const: float = 1.0
    power: float = 0.0

    def __post_init__(self):
        if not (self.const > 0 and math.isfinite(self.const)):
            raise ValueError("slowly varying constant must be positive and finite")
        if not math.isfinite(self.power):
            raise ValueError("log power must be finite")

    @property
    def kind(self) -> str:
        if self.power == 0:
            return "constant"
        if self.const == 1:
            return "log_power"
        return "product"

    def __call__(self, n):
        n = np.asarray(n, dtype=float)
        if self.power == 0:
            out = np.full(n.shape, self.const)
        else:
            out = self.const * np.log(n + math.e) ** self.power
        return out if out.ndim else float(out)

    def to_dict(self) -> dict:
        kind = self.kind
        if kind == "constant":
            param = self.const
        elif kind == "log_power":
            param = self.power
        else:
            param = [self.const, self.power]
        return {"kind": kind, "param": param}

    @classmethod
    def from_dict(cls, d: dict) -> "SlowVaryDesc":
        kind, param = d["kind"], d["param"]
        if kind == "constant":
            return cls(const=float(param))
        if kind == "log_power":
            return cls(power=float(param))
        if kind == "product":
            return cls(const=float(param[0]), power=float(param[1]))
        raise ValueError(f"unknown slowly varying kind {kind!r}")


def _log_power_integral(phi: SlowVaryDesc, s: float, x0: float) -> float:
    """Integral of phi(x) x**-s over [x0, inf), s >= 1."""
    c, a = phi.const, phi.power
    if s == 1.0:
        # y = log(x + e); the leading piece integrates in closed form
        y0 = math.log(x0 + math.e)
        lead = y0 ** (a + 1) / (-a - 1)
        # e / (e^y - e) = 1 / expm1(y - 1)
        rest, _ = integrate.quad(
            lambda y: y**a / math.expm1(y - 1.0) if y < 700.0 else 0.0, y0, np.inf,
            epsabs=0.0, epsrel=1e-12, limit=200,
        )
        return c * (lead + rest)
    t0 = math.log(x0)
    val, _ = integrate.quad(
        lambda t: (t + math.log1p(math.exp(1.0 - t))) ** a * math.exp((1.0 - s) * (t - t0)),
        t0, np.inf, epsabs=0.0, epsrel=1e-12, limit=200,
    )
    return c * val * math.exp((1.0 - s) * t0)


def _phi_power_sum(phi: SlowVaryDesc, s: float, n: int) -> float:
    """sum_{k > n} phi(k) k**-s  (s > 1, or s == 1 with power < -1)."""
    if phi.power == 0:
        return phi.const * float(special.zeta(s, n + 1))
    k = np.arange(n + 1, n + 1 + _EXPLICIT_TAIL_TERMS, dtype=float)
    head = math.fsum(phi(k) * k**-s)
    return head + _log_power_integral(phi, s, n + _EXPLICIT_TAIL_TERMS + 0.5)


def _summable(alpha: float, phi: SlowVaryDesc, s_shift: float = 1.0) -> bool:
    s = alpha + s_shift
    return s > 1 or (s == 1 and phi.power < -1)


@dataclass(frozen=True, eq=False)
class GapLaw:
    """Law of a renewal gap tau_1 on {1, 2, ...} U {inf}.

    ``pmf[k]`` and ``tails[k]`` are defined for k = 0..horizon with
    ``pmf[0] = 0`` and ``tails[0] = 1``.  ``tails`` includes the defect.
    ``alpha = inf`` marks light-tailed oracle laws.
    """

    kind: str
    pmf: np.ndarray
    tails: np.ndarray
    alpha: float
    phi: SlowVaryDesc
    defect: float = 0.0
    scale: float = 1.0
    mean: float = math.inf
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        for arr in (self.pmf, self.tails):
            arr.setflags(write=False)
        if self.pmf.shape != self.tails.shape or self.pmf.ndim != 1:
            raise ValueError("pmf and tails must be 1-D arrays of equal length")
        if np.any(self.pmf < 0):
            raise ValueError("negative probability in pmf table")
        if not 0.0 <= self.defect < 1.0:
            raise ValueError("defect must lie in [0, 1)")
        support = np.flatnonzero(self.pmf)
        if support.size == 0:
            raise ValueError("law has no mass on the table range")
        if reduce(math.gcd, support.tolist()) != 1:
            raise ValueError("periodic law: gcd of the support must be 1")

    @property
    def horizon(self) -> int:
        return len(self.pmf) - 1

    @property
    def recurrent(self) -> bool:
        return self.defect == 0.0

    @property
    def finite_mean(self) -> bool:
        return math.isfinite(self.mean)

    def phi_full(self, n):
        """The slowly varying factor of P(tau_1 = n) including the scale."""
        return self.scale * self.phi(n)

    def pmf_at(self, n: int) -> float:
        if n < 1:
            return 0.0
        if n <= self.horizon:
            return float(self.pmf[n])
        if self.kind == "reg_varying":
            return self.scale * self.phi(n) * n ** -(1.0 + self.alpha)
        if self.kind == "ssrw":
            return self.tail(n - 1) / (2.0 * n)
        if self.kind == "geometric":
            p = self.params["p"]
            return p * (1.0 - p) ** (n - 1)
        return 0.0

    def tail(self, n: int) -> float:
        """P(tau_1 > n), including the defect, for any n >= 0."""
        if n < 0:
            raise ValueError("n must be nonnegative")
        if n <= self.horizon:
            return float(self.tails[n])
        if self.kind == "reg_varying":
            return self.defect + self.scale * _phi_power_sum(self.phi, 1.0 + self.alpha, n)
        if self.kind == "ssrw":
            return float(special.beta(n + 0.5, 0.5)) / math.pi
        if self.kind == "geometric":
            return (1.0 - self.params["p"]) ** n
        return self.defect

    def truncated_mean(self, n: int) -> float:
        """E[tau_1 ^ n] = sum_{k<=n} k f_k + n P(tau_1 > n)."""
        if not 1 <= n <= self.horizon:
            raise ValueError(f"n={n} outside table range [1, {self.horizon}]")
        k = np.arange(1, n + 1)
        return math.fsum(k * self.pmf[1 : n + 1]) + n * float(self.tails[n])

    def truncated_means(self, n_max: int) -> np.ndarray:
        """Array of mu_n for n = 0..n_max, via mu_n = sum_{k<n} P(tau_1 > k)."""
        if n_max > self.horizon:
            raise ValueError(f"n_max={n_max} exceeds horizon {self.horizon}")
        out = np.zeros(n_max + 1)
        out[1:] = np.cumsum(self.tails[:n_max])
        return out

    def tail_sum(self, n: int) -> float:
        """sum_{k > n} P(tau_1 > k); finite only for finite-mean laws."""
        if not self.finite_mean:
            raise ValueError("tail sum diverges: infinite mean")
        if self.kind == "geometric":
            p = self.params["p"]
            return (1.0 - p) ** (n + 1) / p
        h = self.horizon
        if n >= h:
            return self._tail_sum_beyond(n)
        return math.fsum(self.tails[n + 1 :]) + self._tail_sum_beyond(h)

    def _tail_sum_beyond(self, m: int) -> float:
        # sum_{k>m} P(tau_1 > k) = sum_{j>m} (j - m - 1) f_j
        if self.kind != "reg_varying":
            return 0.0
        s = 1.0 + self.alpha
        return self.scale * (
            _phi_power_sum(self.phi, s - 1.0, m) - (m + 1) * _phi_power_sum(self.phi, s, m)
        )

    def to_dict(self, include_pmf: bool | None = None) -> dict:
        d = {
            "kind": self.kind,
            "alpha": self.alpha if math.isfinite(self.alpha) else None,
            "phi": self.phi.to_dict(),
            "defect": self.defect,
            "horizon": self.horizon,
        }
        d.update({k: v for k, v in self.params.items() if k != "exact"})
        if include_pmf is None:
            include_pmf = self.kind == "custom"
        if include_pmf:
            d["pmf"] = self.pmf[1:].tolist()
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    def save(self, path) -> None:
        from ._io import atomic_write_text

        atomic_write_text(path, self.to_json() + "\n")

    def describe(self) -> str:
        if self.kind == "reg_varying":
            return f"reg_varying(alpha={self.alpha:g}, defect={self.defect:g})"
        if self.kind == "geometric":
            return f"geometric({self.params['p']:g})"
        return self.kind


def _check_horizon(horizon: int, minimum: int) -> int:
    if int(horizon) != horizon or horizon < minimum:
        raise ValueError(f"horizon must be an integer >= {minimum}")
    return int(horizon)


def build_reg_varying(
    alpha: float,
    phi: SlowVaryDesc | None = None,
    horizon: int = 2**16,
    defect: float = 0.0,
) -> GapLaw:
    """Law with P(tau_1 = n) = scale * phi(n) * n**-(1+alpha), n >= 1."""
    phi = SlowVaryDesc() if phi is None else phi
    alpha = float(alpha)
    if not alpha >= 0 or not math.isfinite(alpha):
        raise ValueError("alpha must be a finite number >= 0")
    if not 0.0 <= defect < 1.0:
        raise ValueError("defect must lie in [0, 1)")
    horizon = _check_horizon(horizon, 16)
    s = 1.0 + alpha
    if not _summable(alpha, phi):
        raise ValueError("tail not summable: alpha = 0 needs log power < -1")

    k = np.arange(1, horizon + 1, dtype=float)
    h = phi(k) * k**-s
    beyond = _phi_power_sum(phi, s, horizon)
    scale = (1.0 - defect) / (math.fsum(h) + beyond)

    pmf = np.zeros(horizon + 1)
    pmf[1:] = scale * h
    suffix = np.zeros(horizon + 1)
    suffix[:-1] = np.cumsum(h[::-1])[::-1]
    tails = defect + scale * (suffix + beyond)
    tails[0] = 1.0

    mean = math.inf
    if defect == 0.0 and _summable(alpha, phi, s_shift=0.0):
        if phi.power == 0:
            mean = scale * phi.const * float(special.zeta(alpha, 1))
        else:
            mean = scale * (math.fsum(k * h) + _phi_power_sum(phi, alpha, horizon))
    return GapLaw("reg_varying", pmf, tails, alpha, phi, defect, scale, mean)


def ssrw_return_law(horizon: int) -> GapLaw:
    """Return times {n : S_2n = 0} of the simple symmetric walk on Z.

    P(tau_1 = k) = C(2k, k) / ((2k - 1) 4**k) and P(tau_1 > k) = C(2k, k) 4**-k.
    """
    horizon = _check_horizon(horizon, 2)
    k = np.arange(1, horizon + 1, dtype=float)
    tails = np.empty(horizon + 1)
    tails[0] = 1.0
    tails[1:] = np.cumprod((2 * k - 1) / (2 * k))
    pmf = np.zeros(horizon + 1)
    pmf[1:] = tails[:-1] / (2 * k)
    phi = SlowVaryDesc(const=1.0 / (2.0 * math.sqrt(math.pi)))
    return GapLaw("ssrw", pmf, tails, 0.5, phi)


def geometric_law(p: float, horizon: int = 1024) -> GapLaw:
    """P(tau_1 = k) = p (1 - p)**(k - 1)."""
    if not 0.0 < p < 1.0:
        raise ValueError("p must lie in (0, 1)")
    horizon = _check_horizon(horizon, 1)
    k = np.arange(horizon + 1, dtype=float)
    tails = (1.0 - p) ** k
    pmf = np.zeros(horizon + 1)
    pmf[1:] = p * tails[:-1]
    return GapLaw("geometric", pmf, tails, math.inf, SlowVaryDesc(), mean=1.0 / p,
                  params={"p": float(p)})


def deterministic_law(horizon: int = 1024) -> GapLaw:
    """Unit gaps: tau = {0, 1, 2, ...}."""
    horizon = _check_horizon(horizon, 1)
    pmf = np.zeros(horizon + 1)
    pmf[1] = 1.0
    tails = np.zeros(horizon + 1)
    tails[0] = 1.0
    return GapLaw("deterministic", pmf, tails, math.inf, SlowVaryDesc(), mean=1.0)


def from_pmf(pmf, horizon: int | None = None) -> GapLaw:
    """Finitely supported law from ``pmf = [P(tau_1=1), P(tau_1=2), ...]``.

    Entries may be Fractions, in which case the exact values are kept for
    the rational oracle.  Missing mass becomes the defect.
    """
    from fractions import Fraction

    values = list(pmf)
    exact = values if all(isinstance(v, (Fraction, int)) for v in values) else None
    horizon = len(values) if horizon is None else _check_horizon(horizon, len(values))
    table = np.zeros(horizon + 1)
    table[1 : len(values) + 1] = [float(v) for v in values]
    total = float(sum(exact)) if exact is not None else math.fsum(table)
    if total > 1.0 + 1e-12:
        raise ValueError("pmf sums to more than one")
    defect = max(0.0, 1.0 - total)
    if defect < 1e-15:
        defect = 0.0
    suffix = np.zeros(horizon + 1)
    suffix[:-1] = np.cumsum(table[1:][::-1])[::-1]
    tails = defect + suffix
    tails[0] = 1.0
    mean = math.inf
    if defect == 0.0:
        mean = math.fsum(np.arange(horizon + 1) * table)
    params = {"exact": exact} if exact is not None else {}
    return GapLaw("custom", table, tails, math.inf, SlowVaryDesc(), defect, 1.0, mean, params)


def law_from_dict(d: dict, horizon: int | None = None) -> GapLaw:
    """Rebuild a law from its JSON form; ``horizon`` overrides the stored one."""
    kind = d["kind"]
    h = int(d.get("horizon", 1024) if horizon is None else horizon)
    if kind == "reg_varying":
        phi = SlowVaryDesc.from_dict(d["phi"])
        return build_reg_varying(d["alpha"], phi, h, d.get("defect", 0.0))
    if kind == "ssrw":
        return ssrw_return_law(h)
    if kind == "geometric":
        return geometric_law(d["p"], h)
    if kind == "deterministic":
        return deterministic_law(h)
    if kind == "custom":
        return from_pmf(d["pmf"], max(h, len(d["pmf"])))
    raise ValueError(f"unknown law kind {kind!r}")


def load_law(path, horizon: int | None = None) -> GapLaw:
    return law_from_dict(json.loads(Path(path).read_text()), horizon)
