"""Self-normalized concentration bounds and their Monte Carlo check.

Each bound is a threshold formula with a claimed tail mass. The suite draws
replications from heavy-tailed generators, pairs every deviation with the
threshold computed from the same replication (the variance proxies are random)
and compares the tail frequency with the claimed mass through a Wilson
interval.

Normalization: S and V̂ are per-sample averages, S = max_k (1/N) sum_j g_k(xi_j)
and V̂ = (1/N) E[max_k sum_j (g_k(xi_j) - g_k(eta_j))^2 | xi]. With this choice
the threshold sqrt(2(1+t)V̂/N) specializes, for a single function, to the
self-normalized bound.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np
from scipy import stats

from . import streams
from .entropy_localization import a1_functional, box_spec
from .noise import NoiseLaw, pareto_moment, student_t_abs_moment

Z95 = float(stats.norm.ppf(0.975))
GHOSTS = 64
CONTROL_REPS = 100_000
FAMILIES = ("panchenko", "self-normalized", "uniform-deviation", "lower-tail")


@dataclass(frozen=True)
class TailBound:
    name: str
    threshold: float
    claimed: float
    inputs: dict = field(default_factory=dict)


def panchenko_threshold(V_hat: float, N: int, t: float) -> TailBound:
    """sqrt(2(1+t)V̂/N) with tail 2e^-t on each side of S - E[S]."""
    if V_hat < 0 or N < 1 or t <= 0:
        raise ValueError("need V_hat >= 0, N >= 1 and t > 0")
    thr = math.sqrt(2 * (1 + t) * V_hat / N)
    return TailBound("panchenko", thr, 2 * math.exp(-t), {"V_hat": V_hat, "N": N, "t": t})


def self_normalized_threshold(samples, mean: float, variance: float, t: float) -> TailBound:
    """sqrt(2(1+t)/N (P̂+P)[g - Pg]^2) for the deviation (P̂ - P)g.

    ``mean`` is Pg and ``variance`` is P[g - Pg]^2.
    """
    g = np.asarray(samples, float)
    if t <= 0 or variance < 0 or not math.isfinite(variance):
        raise ValueError("need t > 0 and a finite second moment")
    N = g.size
    proxy = float(np.mean((g - mean) ** 2)) + variance
    thr = math.sqrt(2 * (1 + t) / N * proxy)
    return TailBound("self-normalized", thr, 2 * math.exp(-t),
                     {"N": N, "t": t, "proxy": proxy, "deviation": float(g.mean() - mean)})


def uniform_deviation_threshold(a1: float, L_hat: float, L: float, N: int, t: float) -> TailBound:
    """2 A1 sqrt((1+t)(L̂^2 + L^2)/N); ``L_hat`` and ``L`` are the root mean squares of the envelope."""
    if min(a1, L_hat, L) < 0 or N < 1 or t <= 0:
        raise ValueError("ingredients must be nonnegative, N >= 1, t > 0")
    thr = 2 * a1 * math.sqrt((1 + t) * (L_hat ** 2 + L ** 2) / N)
    return TailBound("uniform-deviation", thr, 2 * math.exp(-t),
                     {"a1": a1, "L_hat": L_hat, "L": L, "N": N, "t": t})


def lower_tail_exponent(mean_z: float, moment_za: float, a: float, eps: float) -> float:
    """Per-sample exponent (1 - 1/a)(eps EZ)^(a/(a-1)) / E[Z^a]^(1/(a-1)) from the optimized theta."""
    if not 1 < a <= 2:
        raise ValueError("a must lie in (1, 2]")
    if mean_z <= 0 or eps <= 0:
        raise ValueError("need E[Z] > 0 and eps > 0")
    if moment_za < mean_z ** a * (1 - 1e-12):
        raise ValueError("E[Z^a] must be at least E[Z]^a")
    return (1 - 1 / a) * (eps * mean_z) ** (a / (a - 1)) / moment_za ** (1 / (a - 1))


def lower_tail_probability_bound(mean_z: float, moment_za: float, a: float, eps: float, N: int) -> float:
    """Bound on P{mean of N copies <= (1 - eps) E[Z]} for nonnegative Z."""
    if N < 1:
        raise ValueError("N must be positive")
    return math.exp(-lower_tail_exponent(mean_z, moment_za, a, eps) * N)


def lower_tail_stated_exponent(mean_z: float, moment_za: float, a: float, eps: float) -> float:
    """The exponent as displayed in the lemma's statement: eps enters as eps^((a-1)/a)."""
    return (a - 1) / a * eps ** ((a - 1) / a) * (mean_z ** a / moment_za) ** (1 / (a - 1))


def lower_tail_discrepancy(mean_z: float, moment_za: float, a: float, eps: float) -> dict:
    """Compare the displayed exponent with the one the proof derives."""
    proof = lower_tail_exponent(mean_z, moment_za, a, eps)
    shown = lower_tail_stated_exponent(mean_z, moment_za, a, eps)
    return {"proof_exponent": proof, "stated_exponent": shown,
            "agree": math.isclose(proof, shown, rel_tol=1e-12, abs_tol=0.0)}


# -- Monte Carlo frequency ----------------------------------------------------

def wilson_interval(successes: int, trials: int, z: float = Z95) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if trials <= 0:
        raise ValueError("trials must be positive")
    p = successes / trials
    den = 1 + z * z / trials
    centre = (p + z * z / (2 * trials)) / den
    half = z * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / den
    lo = 0.0 if successes == 0 else max(0.0, centre - half)     # exact ends, no cancellation
    hi = 1.0 if successes == trials else min(1.0, centre + half)
    return lo, hi


@dataclass(frozen=True)
class TailFrequency:
    frequency: float
    count: int
    replications: int
    wilson_lo: float
    wilson_hi: float


def empirical_tail_frequency(generator: Callable[[int], tuple[float, float]],
                             replications: int) -> TailFrequency:
    """Fraction of replications whose deviation reaches the paired threshold.

    ``generator(r)`` returns (deviation, threshold) for replication r and must
    draw its randomness from a stream keyed by r.
    """
    if replications < 100:
        raise ValueError("need at least 100 replications")
    hits = 0
    for r in range(replications):
        dev, thr = generator(r)
        hits += int(dev >= thr)
    lo, hi = wilson_interval(hits, replications)
    return TailFrequency(hits / replications, hits, replications, lo, hi)


def frequency_from_pairs(deviations, thresholds) -> TailFrequency:
    dev = np.asarray(deviations, float)
    thr = np.asarray(thresholds, float)
    hits = int(np.sum(dev >= thr))
    n = dev.size
    lo, hi = wilson_interval(hits, n)
    return TailFrequency(hits / n, hits, n, lo, hi)


# -- generators ---------------------------------------------------------------

@dataclass(frozen=True)
class Generator:
    """Raw heavy-tailed variate with exact low-order moments."""

    name: str
    law: NoiseLaw
    code: int

    def draw(self, rng, shape) -> np.ndarray:
        return self.law._raw(rng, shape)

    @property
    def mean(self) -> float:
        return pareto_moment(self.law.tail_index, 1) if self.law.family == "pareto" else 0.0

    @property
    def second(self) -> float:
        if self.law.family == "pareto":
            return pareto_moment(self.law.tail_index, 2)
        return self.law.dof / (self.law.dof - 2)

    @property
    def variance(self) -> float:
        return self.second - self.mean ** 2

    def abs_moment(self, k: float) -> float:
        if self.law.family == "pareto":
            return pareto_moment(self.law.tail_index, k)
        return student_t_abs_moment(self.law.dof, k)


def default_generators() -> list[Generator]:
    return [generator_from_name(f"pareto-{a}") for a in (3, 4, 5, 6)] + \
        [generator_from_name(f"student_t-{v}") for v in (5, 8, 12)]


def generator_from_name(name: str) -> Generator:
    """``pareto-<tail index>`` or ``student_t-<dof>``; the stream code encodes both."""
    fam, _, par = name.partition("-")
    try:
        v = float(par)
    except ValueError:
        raise ValueError(f"unknown generator {name!r}") from None
    if fam == "pareto":
        return Generator(name, NoiseLaw("pareto", tail_index=v), 1000 + round(v * 10))
    if fam == "student_t":
        return Generator(name, NoiseLaw("student_t", dof=v), 2000 + round(v * 10))
    raise ValueError(f"unknown generator {name!r}")


# -- per-family replications --------------------------------------------------

FAMILY_CODE = {f: k for k, f in enumerate(FAMILIES)}


def _rng(seed, family, gen: Generator, rep, stream_id=streams.SCENARIOS):
    return streams.stream(seed, stream_id, FAMILY_CODE[family], gen.code, rep)


def panchenko_replications(gen: Generator, N: int, reps: int, seed: int, K: int = 4,
                           ghosts: int = GHOSTS) -> dict:
    """Per replication: S, the ghost estimate of V̂ and its standard error.

    The family is the K coordinate maps of a K-variate sample with i.i.d.
    coordinates; E[S] comes from an independent control run.
    """
    S = np.empty(reps)
    V = np.empty(reps)
    V_se = np.empty(reps)
    for r in range(reps):
        x = gen.draw(_rng(seed, "panchenko", gen, r), (N, K))
        S[r] = np.max(x.mean(axis=0))
        eta = gen.draw(_rng(seed, "panchenko", gen, r, streams.GHOST), (ghosts, N, K))
        vals = np.max(np.sum((x[None] - eta) ** 2, axis=1), axis=1) / N
        V[r] = vals.mean()
        V_se[r] = vals.std(ddof=1) / math.sqrt(ghosts)
    ES = panchenko_mean(gen, N, seed, K)
    return {"S": S, "V_hat": V, "V_se": V_se, "ES": ES}


def panchenko_mean(gen: Generator, N: int, seed: int, K: int = 4, reps: int = CONTROL_REPS,
                   chunk: int = 5000) -> float:
    rng = streams.stream(seed, streams.CONTROL, FAMILY_CODE["panchenko"], gen.code, N)
    total = 0.0
    done = 0
    while done < reps:
        n = min(chunk, reps - done)
        total += float(np.max(gen.draw(rng, (n, N, K)).mean(axis=1), axis=1).sum())
        done += n
    return total / reps


def self_normalized_replications(gen: Generator, N: int, reps: int, seed: int) -> dict:
    dev = np.empty(reps)
    proxy = np.empty(reps)
    for r in range(reps):
        g = gen.draw(_rng(seed, "self-normalized", gen, r), N)
        dev[r] = g.mean() - gen.mean
        proxy[r] = np.mean((g - gen.mean) ** 2) + gen.variance
    return {"dev": dev, "proxy": proxy}


def uniform_deviation_replications(gen: Generator, N: int, reps: int, seed: int) -> dict:
    """G(x, xi) = xi_1 x^2 + xi_2 x on M = [0, 1] with reference point y = 0.

    The sup over x of (P̂ - P)[G(x) - G(0)] = a x^2 + b x is exact (endpoints
    and the stationary point), and so is the one for (P - P̂).
    """
    up = np.empty(reps)
    down = np.empty(reps)
    lhat = np.empty(reps)
    for r in range(reps):
        xi = gen.draw(_rng(seed, "uniform-deviation", gen, r), (N, 2))
        a, b = xi.mean(axis=0) - gen.mean
        up[r] = _sup_quadratic(a, b)
        down[r] = _sup_quadratic(-a, -b)
        L = 2 * np.abs(xi[:, 0]) + np.abs(xi[:, 1])
        lhat[r] = math.sqrt(np.mean(L ** 2))
    m1, m2 = gen.abs_moment(1), gen.second
    L_pop = math.sqrt(5 * m2 + 4 * m1 * m1)       # E(2|xi_1| + |xi_2|)^2
    a1 = a1_functional(box_spec([0.0], [1.0])).value
    return {"up": up, "down": down, "L_hat": lhat, "L": L_pop, "a1": a1}


def _sup_quadratic(a: float, b: float) -> float:
    cands = [0.0, a + b]
    if a < 0:
        x = -b / (2 * a)
        if 0 < x < 1:
            cands.append(a * x * x + b * x)
    return max(cands)


def lower_tail_replications(gen: Generator, N: int, reps: int, seed: int) -> dict:
    """Means of N copies of Z = |xi| (nonnegative)."""
    means = np.empty(reps)
    for r in range(reps):
        means[r] = np.mean(np.abs(gen.draw(_rng(seed, "lower-tail", gen, r), N)))
    return {"means": means, "EZ": gen.abs_moment(1)}


def lower_tail_eps(gen: Generator, a: float, N: int, t: float) -> float:
    """eps at which the lower-tail bound equals e^-t."""
    mz, mza = gen.abs_moment(1), gen.abs_moment(a)
    return (t / ((1 - 1 / a) * N)) ** ((a - 1) / a) * mza ** (1 / a) / mz


# -- the suite ----------------------------------------------------------------

def _row(family, side, gen, N, t_or_eps, thr, freq: TailFrequency, claimed, **extra) -> dict:
    thr = np.atleast_1d(np.asarray(thr, float))
    row = {"family": family if side is None else f"{family}/{side}", "generator": gen.name,
           "N": N, "t_or_eps": float(t_or_eps), "threshold_mean": float(thr.mean()),
           "threshold_min": float(thr.min()), "threshold_max": float(thr.max()),
           "frequency": freq.frequency, "wilson_lo": freq.wilson_lo, "wilson_hi": freq.wilson_hi,
           "claimed": float(claimed), "passed": bool(freq.wilson_lo <= claimed)}
    row.update(extra)
    return row


def family_rows(family: str, gen: Generator, N: int, reps: int, seed: int,
                ts: Iterable[float] = (1.0, 2.0, 3.0), a_values: Iterable[float] = (2.0, 1.5)) -> list[dict]:
    """CSV rows of one (family, generator) cell over the t grid."""
    ts = list(ts)
    rows = []
    if family == "panchenko":
        d = panchenko_replications(gen, N, reps, seed)
        for t in ts:
            thr = np.sqrt(2 * (1 + t) * d["V_hat"] / N)
            for side, dev in (("upper", d["S"] - d["ES"]), ("lower", d["ES"] - d["S"])):
                rows.append(_row(family, side, gen, N, t, thr, frequency_from_pairs(dev, thr),
                                 2 * math.exp(-t), ghost_se_max=float(d["V_se"].max())))
    elif family == "self-normalized":
        d = self_normalized_replications(gen, N, reps, seed)
        for t in ts:
            thr = np.sqrt(2 * (1 + t) / N * d["proxy"])
            for side, dev in (("upper", d["dev"]), ("lower", -d["dev"])):
                rows.append(_row(family, side, gen, N, t, thr, frequency_from_pairs(dev, thr),
                                 2 * math.exp(-t)))
    elif family == "uniform-deviation":
        d = uniform_deviation_replications(gen, N, reps, seed)
        for t in ts:
            thr = 2 * d["a1"] * np.sqrt((1 + t) * (d["L_hat"] ** 2 + d["L"] ** 2) / N)
            for side, dev in (("upper", d["up"]), ("lower", d["down"])):
                rows.append(_row(family, side, gen, N, t, thr, frequency_from_pairs(dev, thr),
                                 2 * math.exp(-t)))
    elif family == "lower-tail":
        d = lower_tail_replications(gen, N, reps, seed)
        EZ = d["EZ"]
        for a in a_values:
            for t in ts:
                eps = lower_tail_eps(gen, a, N, t)
                claimed = lower_tail_probability_bound(EZ, gen.abs_moment(a), a, eps, N)
                # event {mean <= (1 - eps) EZ} written as deviation >= threshold
                freq = frequency_from_pairs(EZ - d["means"], np.full(reps, eps * EZ))
                rows.append(_row(family, f"a={a:g}", gen, N, eps, eps * EZ, freq, claimed,
                                 t=t))
    else:
        raise ValueError(f"unknown family {family!r}")
    return rows


def run_suite(generators=None, families=FAMILIES, N: int = 50, replications: int = 2000,
              seed: int = 0, ts=(1.0, 2.0, 3.0)) -> list[dict]:
    """All (family, generator, t) cells in a fixed order."""
    if replications < 100:
        raise ValueError("need at least 100 replications")
    gens = default_generators() if generators is None else list(generators)
    rows = []
    for fam in families:
        for g in gens:
            rows += family_rows(fam, g, N, replications, seed, ts)
    return rows
