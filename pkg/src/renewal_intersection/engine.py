"""Exact renewal mass functions: the renewal equation forward and inverted.

All solvers reduce to one online recursion

    x_n = rhs_n + sign * sum_{k=0}^{n-1} x_k ker_{n-k}

where x_n depends on all earlier x.  ``naive`` evaluates it term by term
with compensated sums (O(N^2)); ``fft`` uses the divide-and-conquer
relaxed product (O(N log^2 N)): once x[lo:mid] is known its whole
contribution to x[mid:hi] is added with one FFT.

FFT round-off is absolute, of order eps * |operands|, so the forms are
chosen to keep operands comparable to the outputs:

* proper laws are solved for the increments d_n = u_n - u_{n-1}, whose
  generating function is 1 / R(z) with R the tail series;
* for a recurrent product sequence w, the tail G_n = P(rho_1 > n) solves
  the analogous equation with kernel w_n - w_{n-1};
* decaying positive sequences (defective laws) use the plain form, with the
  leftmost block of every level split into dyadic index bands.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import fft as sfft

from ._io import write_csv
from ._kernels import compensated_cumsum, solve_leaf
from .laws import GapLaw

__all__ = [
    "MassFunction",
    "ClippedMassWarning",
    "relaxed_solve",
    "mass_function",
    "invert_mass",
    "invert_mass_counted",
    "increment",
    "looks_recurrent",
]

METHODS = ("naive", "fft")
LEAF_SIZE = 256
# below this band length np.convolve beats an FFT
_DIRECT_CONV = 64
CLIP_TOLERANCE = 1e-6
# rounding can push a computed u_n a few ulps above 1
_W_SLACK = 1e-12


class ClippedMassWarning(UserWarning):
    """Small negative probabilities from round-off were set to zero."""


def _two_sum_into(hi: np.ndarray, lo: np.ndarray, values: np.ndarray) -> None:
    s = hi + values
    bp = s - hi
    lo += (hi - (s - bp)) + (values - bp)
    hi[:] = s


def _bands(start: int, stop: int):
    a = start
    if a == 0:
        yield 0, 1
        a = 1
    while a < stop:
        b = min(2 * a, stop)
        yield a, b
        a = b


def _linear_conv(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if min(len(a), len(b)) <= _DIRECT_CONV:
        return np.convolve(a, b)
    size = len(a) + len(b) - 1
    nfft = sfft.next_fast_len(size, real=True)
    return sfft.irfft(sfft.rfft(a, nfft) * sfft.rfft(b, nfft), nfft)[:size]


def banded_convolution(src: np.ndarray, ker: np.ndarray, out_lo: int, out_hi: int) -> np.ndarray:
    """sum_k src_k ker_{n-k} for n in [out_lo, out_hi), ker_0 ignored.

    Both operands are cut into dyadic index bands and every band pair is
    convolved separately, so the round-off of each piece is relative to
    that piece's own magnitude.
    """
    hi = np.zeros(out_hi - out_lo)
    lo = np.zeros(out_hi - out_lo)
    for a0, a1 in _bands(0, len(src)):
        for b0, b1 in _bands(1, len(ker)):
            n0 = max(a0 + b0, out_lo)
            n1 = min(a1 + b1 - 1, out_hi)
            if n0 >= n1:
                continue
            piece = _linear_conv(src[a0:a1], ker[b0:b1])
            _two_sum_into(
                hi[n0 - out_lo : n1 - out_lo],
                lo[n0 - out_lo : n1 - out_lo],
                piece[n0 - a0 - b0 : n1 - a0 - b0],
            )
    return hi + lo


def relaxed_solve(rhs, ker, sign: float = 1.0, method: str = "fft", banded: bool = False,
                  leaf: int = LEAF_SIZE) -> np.ndarray:
    """Solve x_n = rhs_n + sign * sum_{k<n} x_k ker_{n-k} for n = 0..len(rhs)-1."""
    if method not in METHODS:
        raise ValueError(f"method must be one of {METHODS}")
    rhs = np.asarray(rhs, dtype=float)
    n_out = len(rhs)
    size = 1 << max(0, (n_out - 1).bit_length())
    x = np.zeros(size)
    acc_hi = np.zeros(size)
    acc_lo = np.zeros(size)
    r = np.zeros(size)
    r[:n_out] = rhs
    k = np.zeros(size)
    m = min(len(ker), size)
    k[:m] = np.asarray(ker, dtype=float)[:m]
    sign = float(sign)

    if method == "naive" or size <= leaf:
        solve_leaf(x, acc_hi, acc_lo, r, k, sign, 0, n_out)
        return x[:n_out]

    kernel_fft = {}

    def solve(lo: int, hi: int) -> None:
        if lo >= n_out:
            return
        if hi - lo <= leaf:
            solve_leaf(x, acc_hi, acc_lo, r, k, sign, lo, min(hi, n_out))
            return
        mid = (lo + hi) // 2
        solve(lo, mid)
        if mid < n_out:
            s = hi - lo
            if banded and lo == 0:
                conv = banded_convolution(x[:mid], k[:s], mid, hi)
            else:
                kf = kernel_fft.get(s)
                if kf is None:
                    kf = kernel_fft[s] = sfft.rfft(k[:s])
                src = np.zeros(s)
                src[: mid - lo] = x[lo:mid]
                # circular length s: wrap-around only pollutes outputs below mid
                conv = sfft.irfft(sfft.rfft(src) * kf, s)[mid - lo :]
            _two_sum_into(acc_hi[mid:hi], acc_lo[mid:hi], conv)
        solve(mid, hi)

    solve(0, size)
    return x[:n_out]


@dataclass(frozen=True, eq=False)
class MassFunction:
    """u_n = P(n in tau) for n = 0..N, with U_n = sum_{k<=n} u_k.

    ``du[n] = u_n - u_{n-1}`` (``du[0] = 1``) is kept at full relative
    accuracy, which differencing ``u`` would not give for finite-mean laws.
    """

    u: np.ndarray
    U: np.ndarray
    du: np.ndarray
    source: object
    method: str

    def __post_init__(self):
        for arr in (self.u, self.U, self.du):
            arr.setflags(write=False)

    @property
    def N(self) -> int:
        return len(self.u) - 1

    def increment(self, n: int) -> float:
        return increment(self, n)

    def to_csv(self, path) -> None:
        n = np.arange(self.N + 1)
        write_csv(path, ["n", "u", "U"], [n.tolist(), self.u, self.U])

    @classmethod
    def from_increments(cls, du: np.ndarray, source, method: str) -> "MassFunction":
        # absolute round-off can leave tiny u_n a few ulps outside [0, 1]
        u = np.clip(compensated_cumsum(np.asarray(du, dtype=float)), 0.0, 1.0)
        return cls(u, compensated_cumsum(u), np.asarray(du, dtype=float), source, method)

    @classmethod
    def from_values(cls, u: np.ndarray, source, method: str) -> "MassFunction":
        u = np.asarray(u, dtype=float)
        du = np.empty_like(u)
        du[0] = u[0]
        du[1:] = np.diff(u)
        return cls(u, compensated_cumsum(u), du, source, method)


def mass_function(law: GapLaw, N: int, method: str = "fft") -> MassFunction:
    """Renewal mass function u_0..u_N of ``law``."""
    if method not in METHODS:
        raise ValueError(f"method must be one of {METHODS}")
    if N > law.horizon:
        raise ValueError(f"N={N} exceeds the law's horizon {law.horizon}")
    if N < 0:
        raise ValueError("N must be nonnegative")
    e0 = np.zeros(N + 1)
    e0[0] = 1.0
    if method == "fft" and law.recurrent:
        # sum_{k=0}^n r_k d_{n-k} = [n == 0]
        du = relaxed_solve(e0, law.tails[: N + 1], -1.0, "fft")
        return MassFunction.from_increments(du, law, method)
    u = relaxed_solve(e0, law.pmf[: N + 1], 1.0, method, banded=True)
    return MassFunction.from_values(u, law, method)


def looks_recurrent(w: np.ndarray) -> bool:
    """Heuristic: does w decay no faster than 1/n over the last octave?"""
    N = len(w) - 1
    if N < 8:
        return bool(w[-1] > 0)
    return bool(w[N] >= 0.45 * w[N // 2])


def _tail_from_pmf(g: np.ndarray) -> np.ndarray:
    G = 1.0 - compensated_cumsum(g)
    G[0] = 1.0
    return G


def invert_mass(w, method: str = "fft", form: str = "auto", dw=None):
    """Recover (g, G) with g_n = P(rho_1 = n), G_n = P(rho_1 > n) from w_n = P(n in rho).

    ``form="direct"`` runs g_n = w_n - sum_{k<n} g_k w_{n-k};
    ``form="tail"`` solves for G with kernel dw_n = w_n - w_{n-1}
    (pass ``dw`` when it is known more accurately than by differencing).
    ``auto`` picks the tail form for recurrent-looking w.
    Negative noise above -1e-6 is clipped with a ``ClippedMassWarning``.
    """
    g, G, n_clip, worst = invert_mass_counted(w, method, form, dw)
    if n_clip:
        warnings.warn(f"clipped {n_clip} negative entries (min {worst:.3g})", ClippedMassWarning,
                      stacklevel=2)
    return g, G


def invert_mass_counted(w, method: str = "fft", form: str = "auto", dw=None):
    """``invert_mass`` returning ``(g, G, n_clipped, min_g)`` instead of warning."""
    w = np.asarray(w, dtype=float)
    if w.ndim != 1 or len(w) < 1:
        raise ValueError("w must be a nonempty 1-D array")
    if w[0] != 1.0:
        raise ValueError("w_0 must equal 1")
    if np.any(w < 0) or np.any(w > 1.0 + _W_SLACK):
        raise ValueError("w must lie in [0, 1]")
    if form == "auto":
        form = "tail" if looks_recurrent(w) else "direct"
    if form not in ("direct", "tail"):
        raise ValueError("form must be 'auto', 'direct' or 'tail'")

    if form == "tail":
        if dw is None:
            dw = np.empty_like(w)
            dw[0] = 1.0
            dw[1:] = np.diff(w)
        e0 = np.zeros_like(w)
        e0[0] = 1.0
        G = relaxed_solve(e0, dw, -1.0, method)
        g = np.zeros_like(w)
        g[1:] = G[:-1] - G[1:]
    else:
        rhs = w.copy()
        rhs[0] = 0.0
        g = relaxed_solve(rhs, w, -1.0, method, banded=True)
        g[0] = 0.0
        G = None

    return _clip(g, G)


def _clip(g: np.ndarray, G):
    worst = float(g.min())
    if worst < -CLIP_TOLERANCE:
        n_bad = int(np.argmin(g))
        raise ValueError(f"not a renewal mass function: g_{n_bad} = {worst:.3g}")
    n_clip = int(np.count_nonzero(g < 0))
    if n_clip:
        g = np.maximum(g, 0.0)
    G = _tail_from_pmf(g) if G is None else np.maximum(G, 0.0)
    return g, G, n_clip, worst


def increment(mass: MassFunction, n: int) -> float:
    """|u_n - u_{n-1}|."""
    if not 1 <= n <= mass.N:
        raise ValueError(f"n={n} outside [1, {mass.N}]")
    return abs(float(mass.du[n]))
