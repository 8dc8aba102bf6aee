"""Monte Carlo oracle for the intersection of two renewal processes.

Runs are grouped into fixed-size batches.  Batch ``i`` draws from its own
Philox stream seeded by ``SeedSequence(seed, spawn_key=(i,))`` and returns
integer tallies, so results are bit-identical for any number of workers.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from ._io import json_text, write_json
from .laws import GapLaw

__all__ = [
    "SimEstimate",
    "GapSampler",
    "INFINITE_GAP",
    "CENSORED",
    "sample_gap",
    "simulate_rho1",
    "hitting_index",
    "estimate_rho_tail",
    "estimate_rho_mean",
    "estimate_hitting_mean",
    "coupled_increment",
    "batch_rng",
    "wilson_interval",
]

INFINITE_GAP = np.int64(2**62)
CENSORED = -1
BATCH_SIZE = 1 << 16
Z95 = 1.959963984540054


@dataclass(frozen=True)
class SimEstimate:
    """Point estimate with a 95% confidence interval."""

    statistic: str
    n: int | None
    value: float
    ci_low: float
    ci_high: float
    samples: int
    censored: int
    seed: int

    def __post_init__(self):
        if not self.ci_low <= self.value <= self.ci_high:
            raise ValueError("estimate outside its confidence interval")

    def to_dict(self) -> dict:
        return asdict(self)


def wilson_interval(successes: int, trials: int, z: float = Z95) -> tuple[float, float]:
    if trials <= 0:
        return 0.0, 1.0
    p = successes / trials
    denom = 1.0 + z * z / trials
    center = (p + z * z / (2 * trials)) / denom
    half = z / denom * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials))
    return min(max(0.0, center - half), p), max(min(1.0, center + half), p)


def _mean_interval(s1: int, s2: int, count: int, z: float = Z95) -> tuple[float, float, float]:
    mean = s1 / count
    var = (s2 - s1 * s1 / count) / (count - 1) if count > 1 else 0.0
    half = z * math.sqrt(max(var, 0.0) / count)
    return mean, mean - half, mean + half


def batch_rng(seed: int, batch: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(batch,))))


class GapSampler:
    """Inverse-CDF sampler over the law's table with a continuation past it.

    Past the horizon: geometric laws stay memoryless, regularly varying laws
    use the frozen power law r_x = p_inf + (r_h - p_inf) (x/h)^-alpha (a log
    power when alpha = 0), and gaps are infinite with probability p_inf.
    """

    def __init__(self, law: GapLaw):
        self.law = law
        self._neg_tails = -np.asarray(law.tails)
        self._h = law.horizon
        self._r_h = float(law.tails[-1])
        self.geometric_p = law.params["p"] if law.kind == "geometric" else None

    def from_uniform(self, v: np.ndarray) -> np.ndarray:
        """Gaps for v in (0, 1]: the least k with P(tau_1 > k) < v."""
        k = np.searchsorted(self._neg_tails, -v, side="right").astype(np.int64)
        beyond = k > self._h
        if beyond.any():
            k[beyond] = self._continue(v[beyond])
        return k

    def _continue(self, v: np.ndarray) -> np.ndarray:
        law, h, r_h = self.law, self._h, self._r_h
        out = np.full(v.shape, INFINITE_GAP, dtype=np.int64)
        finite = v > law.defect
        if not finite.any():
            return out
        vf = v[finite]
        if self.geometric_p is not None:
            x = np.floor(np.log(vf) / math.log1p(-self.geometric_p)) + 1.0
        elif law.alpha > 0 and math.isfinite(law.alpha):
            x = np.ceil(h * ((vf - law.defect) / (r_h - law.defect)) ** (-1.0 / law.alpha))
        elif law.alpha == 0:
            a1 = law.phi.power + 1.0
            y0 = math.log(h + math.e)
            y = y0 * ((vf - law.defect) / (r_h - law.defect)) ** (1.0 / a1)
            with np.errstate(over="ignore"):
                x = np.ceil(np.exp(np.minimum(y, 700.0)) - math.e)
        else:
            return out
        x = np.clip(x, h + 1, float(INFINITE_GAP))
        out[finite] = x.astype(np.int64)
        return out

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        return self.from_uniform(1.0 - rng.random(size))


def sample_gap(law: GapLaw, rng: np.random.Generator, size=None):
    """One gap (or an array of gaps); ``INFINITE_GAP`` marks tau_1 = inf."""
    out = GapSampler(law).sample(rng, 1 if size is None else size)
    return int(out[0]) if size is None else out


def _merge(samp_a: GapSampler, samp_b: GapSampler, runs: int, horizon: int,
           rng: np.random.Generator, start_b: int = 0, jump_b: bool = False, tally=None):
    """Lockstep two-pointer merge of tau (from 0) and sigma (from ``start_b``).

    Returns (rho_1, K) per run with ``CENSORED`` when no common point lies
    in [1, horizon]; K counts tau renewals up to rho_1.  ``tally(idx, pos,
    which)`` sees every new renewal position of tau (0) or sigma (1).
    """
    rho = np.full(runs, CENSORED, dtype=np.int64)
    K = np.full(runs, CENSORED, dtype=np.int64)
    idx = np.arange(runs)
    t = np.zeros(runs, dtype=np.int64)
    k = np.zeros(runs, dtype=np.int64)
    if start_b == 0:
        t = samp_a.sample(rng, runs)
        s = samp_b.sample(rng, runs)
        k += 1
    else:
        s = np.full(runs, start_b, dtype=np.int64)
        if tally is not None:
            tally(idx, s, 1)
    if tally is not None and start_b == 0:
        tally(idx, t, 0)
        tally(idx, s, 1)
    while idx.size:
        met = (t == s) & (t > 0) & (t <= horizon)
        done = met | (np.minimum(t, s) > horizon)
        if done.any():
            rho[idx[met]] = t[met]
            K[idx[met]] = k[met]
            keep = ~done
            idx, t, s, k = idx[keep], t[keep], s[keep], k[keep]
            if not idx.size:
                break
        lag_a = t < s
        v = 1.0 - rng.random(idx.size)
        ia = np.flatnonzero(lag_a)
        ib = np.flatnonzero(~lag_a)
        if ia.size:
            t[ia] = np.minimum(t[ia] + samp_a.from_uniform(v[ia]), INFINITE_GAP)
            k[ia] += 1
            if tally is not None:
                tally(idx[ia], t[ia], 0)
        if ib.size:
            if jump_b:
                # memoryless sigma: hit the leader with prob p, else overshoot it
                p = samp_b.geometric_p
                lead = t[ib]
                hit = v[ib] < p
                over = np.minimum(lead + samp_b.sample(rng, ib.size), INFINITE_GAP)
                s[ib] = np.where(hit, lead, over)
            else:
                s[ib] = np.minimum(s[ib] + samp_b.from_uniform(v[ib]), INFINITE_GAP)
                if tally is not None:
                    tally(idx[ib], s[ib], 1)
    return rho, K


def _run_batches(fn, runs: int, seed: int, workers: int, batch_size: int):
    sizes = [min(batch_size, runs - i) for i in range(0, runs, batch_size)]
    jobs = [(b, n) for b, n in enumerate(sizes)]
    if workers <= 1:
        return [fn(batch_rng(seed, b), n) for b, n in jobs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda job: fn(batch_rng(seed, job[0]), job[1]), jobs))


def simulate_rho1(tau_law: GapLaw, sigma_law: GapLaw, horizon: int,
                  rng: np.random.Generator, runs: int = 1):
    """rho_1 for ``runs`` independent pairs; ``CENSORED`` beyond ``horizon``."""
    sa, sb = GapSampler(tau_law), GapSampler(sigma_law)
    rho, _ = _merge(sa, sb, runs, horizon, rng, jump_b=sb.geometric_p is not None)
    return int(rho[0]) if runs == 1 else rho


def hitting_index(tau_law: GapLaw, sigma_law: GapLaw, horizon: int,
                  rng: np.random.Generator, runs: int = 1):
    """K = min{k >= 1 : tau_k in sigma}; ``CENSORED`` if tau_K > horizon."""
    sa, sb = GapSampler(tau_law), GapSampler(sigma_law)
    _, K = _merge(sa, sb, runs, horizon, rng, jump_b=sb.geometric_p is not None)
    return int(K[0]) if runs == 1 else K


def estimate_rho_tail(tau_law: GapLaw, sigma_law: GapLaw, n_grid, runs: int, seed: int,
                      workers: int = 1, batch_size: int = BATCH_SIZE) -> list[SimEstimate]:
    """P(rho_1 > n) on ``n_grid``; runs censored at max(n_grid) count as > n."""
    ns = np.asarray(sorted(set(int(n) for n in n_grid)), dtype=np.int64)
    horizon = int(ns[-1])
    sa, sb = GapSampler(tau_law), GapSampler(sigma_law)
    jump = sb.geometric_p is not None

    def batch(rng, size):
        rho, _ = _merge(sa, sb, size, horizon, rng, jump_b=jump)
        rho = np.where(rho == CENSORED, horizon + 1, rho)
        counts = size - np.searchsorted(np.sort(rho), ns, side="right")
        return counts, int(np.count_nonzero(rho > horizon))

    parts = _run_batches(batch, runs, seed, workers, batch_size)
    counts = sum(p[0] for p in parts)
    censored = sum(p[1] for p in parts)
    out = []
    for n, c in zip(ns.tolist(), counts.tolist()):
        lo, hi = wilson_interval(c, runs)
        out.append(SimEstimate("rho_tail", n, c / runs, lo, hi, runs, censored, seed))
    return out


def _mean_estimate(name, values_fn, runs, seed, workers, batch_size):
    def batch(rng, size):
        x = values_fn(rng, size)
        ok = x[x != CENSORED]
        return int(ok.sum()), int((ok * ok).sum()), int(ok.size)

    parts = _run_batches(batch, runs, seed, workers, batch_size)
    s1 = sum(p[0] for p in parts)
    s2 = sum(p[1] for p in parts)
    m = sum(p[2] for p in parts)
    if m == 0:
        raise ValueError("every run was censored")
    mean, lo, hi = _mean_interval(s1, s2, m)
    return SimEstimate(name, None, mean, lo, hi, runs, runs - m, seed)


def estimate_rho_mean(tau_law: GapLaw, sigma_law: GapLaw, horizon: int, runs: int, seed: int,
                      workers: int = 1, batch_size: int = BATCH_SIZE) -> SimEstimate:
    """E[rho_1] over uncensored runs; the censored count is reported."""
    return _mean_estimate(
        "rho_mean", lambda rng, size: simulate_rho1(tau_law, sigma_law, horizon, rng, size),
        runs, seed, workers, batch_size)


def estimate_hitting_mean(tau_law: GapLaw, sigma_law: GapLaw, horizon: int, runs: int,
                          seed: int, workers: int = 1,
                          batch_size: int = BATCH_SIZE) -> SimEstimate:
    """E[K] over uncensored runs."""
    return _mean_estimate(
        "hitting_index", lambda rng, size: hitting_index(tau_law, sigma_law, horizon, rng, size),
        runs, seed, workers, batch_size)


@dataclass(frozen=True)
class CoupledIncrement:
    """Coupling bound P(n in tau, rho_1 > n) + P(n in sigma, rho_1 > n) and the
    signed difference estimating u_n - u_{n-1}, for tau from 0 and sigma from 1."""

    bound: list
    difference: list


def _has_adjacent_support(law: GapLaw) -> bool:
    f = np.asarray(law.pmf)
    return bool(np.any((f[1:-1] > 0) & (f[2:] > 0)))


def coupled_increment(law: GapLaw, n_grid, runs: int, seed: int, workers: int = 1,
                      batch_size: int = BATCH_SIZE) -> CoupledIncrement:
    """Estimate the coupling bound on |u_n - u_{n-1}| on ``n_grid``."""
    if not law.recurrent:
        raise ValueError("coupled increment needs a recurrent law")
    if not _has_adjacent_support(law):
        raise ValueError("coupling needs k0 with P(tau_1 = k0) P(tau_1 = k0 + 1) > 0; "
                         "copies started at 0 and 1 never meet")
    ns = np.asarray(sorted(set(int(n) for n in n_grid)), dtype=np.int64)
    horizon = int(ns[-1])
    samp = GapSampler(law)

    def batch(rng, size):
        hits = np.zeros((2, size, ns.size), dtype=bool)

        def tally(idx, pos, which):
            j = np.searchsorted(ns, pos)
            ok = j < ns.size
            ok[ok] = ns[j[ok]] == pos[ok]
            hits[which, idx[ok], j[ok]] = True

        rho, _ = _merge(samp, samp, size, horizon, rng, start_b=1, tally=tally)
        # keep only visits strictly before the meeting point
        before = (rho[:, None] == CENSORED) | (ns[None, :] < rho[:, None])
        hits &= before[None]
        return hits[0].sum(axis=0), hits[1].sum(axis=0)

    parts = _run_batches(batch, runs, seed, workers, batch_size)
    a = sum(p[0] for p in parts)
    b = sum(p[1] for p in parts)
    bound, diff = [], []
    for n, ca, cb in zip(ns.tolist(), a.tolist(), b.tolist()):
        c = ca + cb  # the two events are disjoint
        lo, hi = wilson_interval(c, runs)
        bound.append(SimEstimate("coupled_bound", n, c / runs, lo, hi, runs, 0, seed))
        # I_tau - I_sigma takes values in {-1, 0, 1}
        mean, dlo, dhi = _mean_interval(ca - cb, ca + cb, runs)
        diff.append(SimEstimate("coupled_difference", n, mean, dlo, dhi, runs, 0, seed))
    return CoupledIncrement(bound, diff)


def estimates_json(estimates) -> str:
    return json_text([e.to_dict() for e in estimates])


def write_estimates(path, estimates) -> None:
    write_json(path, [e.to_dict() for e in estimates])
