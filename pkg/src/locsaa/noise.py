"""Heavy-tailed noise laws with their moments.

Two derived variates are used by every synthetic instance:

* a nonnegative multiplier ``M`` with ``E[M] = 1`` (scales the convex part of a
  loss, so each scenario loss stays convex), and
* a centred additive variate ``W`` with unit variance (tilts the loss linearly).

Moments are exact where a closed form exists and use adaptive quadrature on the
density otherwise; either way they are deterministic.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate, special, stats


def student_t_abs_moment(dof: float, k: float) -> float:
    """E|T|^k for a Student-t variate with ``dof`` degrees of freedom (needs dof > k)."""
    if not dof > k:
        raise ValueError(f"E|T|^{k} is infinite for dof={dof}")
    lg = (special.gammaln((k + 1) / 2) + special.gammaln((dof - k) / 2)
          - special.gammaln(dof / 2))
    return float(dof ** (k / 2) * math.exp(lg) / math.sqrt(math.pi))


def pareto_moment(alpha: float, k: float) -> float:
    """E[P^k] for a classical Pareto(alpha) with unit scale (needs alpha > k)."""
    if not alpha > k:
        raise ValueError(f"E[P^{k}] is infinite for tail index {alpha}")
    return alpha / (alpha - k)


@dataclass(frozen=True)
class NoiseLaw:
    """Heavy-tailed law used for scenario noise.

    family: ``"pareto"`` (classical Pareto with unit scale and ``tail_index``),
    ``"student_t"`` (``dof`` degrees of freedom) or ``"none"`` (degenerate).
    """

    family: str
    tail_index: float | None = None
    dof: float | None = None

    def __post_init__(self):
        if self.family == "pareto":
            if self.tail_index is None or self.tail_index <= 2:
                raise ValueError("pareto noise needs tail_index > 2 (finite variance)")
        elif self.family == "student_t":
            if self.dof is None or self.dof <= 2:
                raise ValueError("student_t noise needs dof > 2 (finite variance)")
        elif self.family != "none":
            raise ValueError(f"unknown noise family {self.family!r}")

    @property
    def moment_limit(self) -> float:
        """Supremum of the moment orders that are finite."""
        if self.family == "pareto":
            return float(self.tail_index)
        if self.family == "student_t":
            return float(self.dof)
        return math.inf

    # -- raw draws ---------------------------------------------------------
    def _raw(self, rng: np.random.Generator, size) -> np.ndarray:
        if self.family == "pareto":
            return 1.0 + rng.pareto(self.tail_index, size=size)
        if self.family == "student_t":
            return rng.standard_t(self.dof, size=size)
        return np.zeros(size)

    def _raw_mean_sd(self) -> tuple[float, float]:
        if self.family == "pareto":
            a = self.tail_index
            mu = pareto_moment(a, 1)
            return mu, math.sqrt(pareto_moment(a, 2) - mu * mu)
        if self.family == "student_t":
            return 0.0, math.sqrt(self.dof / (self.dof - 2))
        return 0.0, 1.0

    def multiplier(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """Nonnegative variates with mean one."""
        if self.family == "pareto":
            return self._raw(rng, n) / pareto_moment(self.tail_index, 1)
        if self.family == "student_t":
            return np.abs(self._raw(rng, n)) / student_t_abs_moment(self.dof, 1)
        self._raw(rng, n)
        return np.ones(n)

    def additive(self, rng: np.random.Generator, shape) -> np.ndarray:
        """Centred unit-variance variates."""
        mu, sd = self._raw_mean_sd()
        return (self._raw(rng, shape) - mu) / sd

    # -- moments -----------------------------------------------------------
    def multiplier_moment(self, k: float) -> float:
        """E[M^k]."""
        if self.family == "pareto":
            return pareto_moment(self.tail_index, k) / pareto_moment(self.tail_index, 1) ** k
        if self.family == "student_t":
            return student_t_abs_moment(self.dof, k) / student_t_abs_moment(self.dof, 1) ** k
        return 1.0

    def additive_abs_moment(self, k: float) -> float:
        """E|W|^k."""
        return _additive_abs_moment(self.family, self.tail_index, self.dof, float(k))

    def additive_moment(self, k: int) -> float:
        """E[W^k] for an integer k (signed)."""
        if k % 2 == 0:
            return self.additive_abs_moment(k)
        if self.family in ("student_t", "none"):
            return 0.0
        return _additive_signed_moment(self.tail_index, int(k))


@lru_cache(maxsize=None)
def _additive_abs_moment(family, tail_index, dof, k):
    if family == "none":
        return 0.0 if k > 0 else 1.0
    if family == "student_t":
        return student_t_abs_moment(dof, k) / (dof / (dof - 2)) ** (k / 2)
    law = NoiseLaw(family, tail_index=tail_index)
    mu, sd = law._raw_mean_sd()
    if k == 1:
        # E|P - mu| = 2 E(P - mu)_+ = 2 mu^(1-a)/(a-1)
        return 2 * mu ** (1 - tail_index) / (tail_index - 1) / sd
    if k == 2:
        return 1.0
    if not tail_index > k:
        raise ValueError(f"E|W|^{k} is infinite for tail index {tail_index}")
    dist = stats.pareto(tail_index)
    lo, _ = integrate.quad(lambda p: abs(p - mu) ** k * dist.pdf(p), 1, mu)
    hi, _ = integrate.quad(lambda p: (p - mu) ** k * dist.pdf(p), mu, np.inf, limit=200)
    return (lo + hi) / sd ** k


@lru_cache(maxsize=None)
def _additive_signed_moment(tail_index, k):
    if not tail_index > k:
        raise ValueError(f"E[W^{k}] is infinite for tail index {tail_index}")
    law = NoiseLaw("pareto", tail_index=tail_index)
    mu, sd = law._raw_mean_sd()
    # binomial expansion of E(P - mu)^k with exact raw moments
    total = sum(math.comb(k, j) * pareto_moment(tail_index, j) * (-mu) ** (k - j)
                for j in range(k + 1))
    return total / sd ** k


def noise_from_descriptor(desc: dict) -> NoiseLaw:
    family = desc.get("family", "none")
    return NoiseLaw(family, tail_index=desc.get("tail_index"), dof=desc.get("dof"))
