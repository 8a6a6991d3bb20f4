"""Deterministic deviation quantities and the perturbation conditions C0-C3.

The perturbed program replaces every f_i by a convex F̂_i (usually a sample
average) and relaxes the constraints to F̂_i <= eps_hat. Everything here is a
deterministic statement about the pair (f, F̂): the deviations are evaluated
exactly at points and as sampled suprema over localized level sets, the
conditions are checked with a Lipschitz slack that upper-bounds the sampling
error, and the implied inclusion is tested by searching the empirical
near-optimal set for a point that violates the target.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.stats import qmc

from . import solver
from .entropy_localization import (SetSpec, bisect_level, level_set_spec, localized_set_spec,
                                   ray_boundary, sublevel_boundary)
from .problem_core import (InfeasibleRelaxation, MissingIngredient, NoConstraints,
                           PopulationOracle, ProblemError, ScenarioSet, StochasticProgram, _rows)

# Inclusion tolerance: the empirical set is shrunk by this (scaled) amount and a
# counterexample must violate its target by more than it.
TOL = 1e-7
MIN_BUDGET = 1000
SUP_KINDS = ("fixed", "D0", "Di")
COROLLARIES = ("exterior-MR", "interior-SCQ", "interior-solution")


class PremiseInvalid(ProblemError):
    """Witness preconditions of a theorem are violated."""


# -- the perturbed program ----------------------------------------------------

@dataclass(frozen=True, eq=False)
class EmpiricalModel:
    """Perturbed losses F̂_0..F̂_m on Y with the constraint relaxation eps_hat."""

    hard_set: object
    functions: tuple
    lipschitz: tuple
    relaxation: float = 0.0

    @property
    def m(self) -> int:
        return len(self.functions) - 1

    @property
    def dimension(self) -> int:
        return self.hard_set.dimension

    def value(self, i: int, X) -> np.ndarray:
        return np.asarray(self.functions[i](_rows(X)), float)

    def objective(self, X) -> np.ndarray:
        return self.value(0, X)

    def constraint_max(self, X) -> np.ndarray:
        X = _rows(X)
        if self.m == 0:
            return np.full(len(X), -np.inf)
        return np.max(np.stack([self.value(i, X) for i in range(1, self.m + 1)]), axis=0)

    def violation(self):
        """Convex function that is <= 0 exactly on the relaxed constraints (None if m = 0)."""
        if self.m == 0:
            return None
        return lambda X: self.constraint_max(X) - self.relaxation

    def feasible(self, X, tol: float = 0.0) -> np.ndarray:
        X = _rows(X)
        return self.hard_set.contains(X) & (self.constraint_max(X) <= self.relaxation + tol)

    def with_relaxation(self, relaxation: float) -> "EmpiricalModel":
        return EmpiricalModel(self.hard_set, self.functions, self.lipschitz, float(relaxation))


def empirical_model(program: StochasticProgram, sample: ScenarioSet) -> EmpiricalModel:
    """Sample-average losses of ``program`` over ``sample``."""
    fns = tuple((lambda X, i=i: program.empirical(i, X, sample)) for i in range(program.m + 1))
    lips = tuple(program.empirical_lipschitz(i, sample) for i in range(program.m + 1))
    return EmpiricalModel(program.hard_set, fns, lips, program.relaxation)


def deterministic_model(program: StochasticProgram, functions, lipschitz=None,
                        relaxation: float | None = None) -> EmpiricalModel:
    """Wrap arbitrary convex perturbations F̂_i (vectorized callables).

    Missing Lipschitz constants are estimated from difference quotients on a
    grid over Y.
    """
    functions = tuple(functions)
    if len(functions) != program.m + 1:
        raise ProblemError("need one perturbed function per loss")
    if lipschitz is None:
        lipschitz = tuple(_grid_lipschitz(program.hard_set, fn) for fn in functions)
    relax = program.relaxation if relaxation is None else relaxation
    return EmpiricalModel(program.hard_set, functions, tuple(float(v) for v in lipschitz),
                          float(relax))


def _grid_lipschitz(hard, fn, per_axis: int = 41) -> float:
    lo, hi = hard.bounding_box
    pitch = float((hi - lo).max()) / (per_axis - 1)
    P = solver.grid_points(lo, hi, pitch)
    v = np.asarray(fn(P), float)
    d = P.shape[1]
    shape = tuple(int(round((h - l) / pitch)) + 1 for l, h in zip(lo, hi))
    V = v.reshape(shape)
    best = 0.0
    for ax in range(d):
        step = (hi[ax] - lo[ax]) / (shape[ax] - 1)
        best = max(best, float(np.max(np.abs(np.diff(V, axis=ax)))) / step)
    return best * math.sqrt(d)


def as_model(program: StochasticProgram, sample) -> EmpiricalModel:
    if isinstance(sample, EmpiricalModel):
        return sample
    if isinstance(sample, ScenarioSet):
        return empirical_model(program, sample)
    raise TypeError("sample must be a ScenarioSet or an EmpiricalModel")


def empirical_minimum(model: EmpiricalModel) -> tuple[float, np.ndarray]:
    """min of F̂_0 over X̂ = {x in Y : F̂_i(x) <= eps_hat} and a minimizer."""
    hard = model.hard_set
    lo, hi = hard.bounding_box
    d = model.dimension
    mesh = float((hi - lo).max()) / (400 if d == 1 else 60 if d == 2 else 16)
    return solver.minimize_convex(model.objective, lambda X: model.feasible(X), (lo, hi), mesh,
                                  violation=model.violation(), hard=hard)


# -- pointwise deviations -----------------------------------------------------

@dataclass
class SupResult:
    """Sampled supremum of a deviation integrand over a localized set."""

    kind: str
    label: str
    value: float                # 0 v (max over samples)
    witness: np.ndarray | None
    evaluated: int
    slack: float                # Lipschitz bound on the sampling error
    empty: bool = False

    @property
    def upper(self) -> float:
        """Conservative value: the sampled max plus the slack (still clipped at 0)."""
        return max(0.0, self.raw + self.slack) if not self.empty else 0.0

    raw: float = -math.inf      # unclipped sampled max


@dataclass
class DeviationReport:
    delta: float                # δ̂(y, x)
    Delta: float                # Δ̂(y, x)
    delta_i: np.ndarray         # δ̂_i(x), i = 1..m
    Delta_i: np.ndarray         # Δ̂_i(x)
    sups: dict = field(default_factory=dict)
    evaluated: int = 2


def deviation_quantities(oracle: PopulationOracle, program: StochasticProgram, sample, x, y
                         ) -> DeviationReport:
    """Positive and negative parts of the pairwise objective deviation and of each constraint at x."""
    model = as_model(program, sample)
    x = np.atleast_1d(np.asarray(x, float))
    y = np.atleast_1d(np.asarray(y, float))
    P = np.stack([y, x])
    fh = model.objective(P)
    f = oracle.objective(P)
    raw = float((fh[0] - fh[1]) - (f[0] - f[1]))
    di = np.array([float(model.value(i, x)[0] - oracle.value(i, x)[0])
                   for i in range(1, model.m + 1)])
    return DeviationReport(max(0.0, raw), max(0.0, -raw), np.maximum(di, 0.0),
                           np.maximum(-di, 0.0))


# -- sampled suprema ----------------------------------------------------------

def nested_directions(d: int, budget: int) -> np.ndarray:
    """Ray directions whose set only grows with the budget.

    2-D fans use a power-of-two count (a larger fan contains the smaller one);
    higher dimensions take a prefix of one fixed random sequence.
    """
    if d == 1:
        return np.array([[-1.0], [1.0]])
    if d == 2:
        count = 1 << max(3, math.ceil(math.log2(budget)))
        ang = 2 * np.pi * np.arange(count) / count
        return np.stack([np.cos(ang), np.sin(ang)], axis=1)
    v = np.random.default_rng(20240611).standard_normal((budget, d))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def _rejection_points(spec: SetSpec, budget: int) -> np.ndarray:
    d = spec.dimension
    lo, hi = spec.center - spec.radius, spec.center + spec.radius
    if spec.radius == 0:
        return np.empty((0, d))
    H = qmc.Halton(d, scramble=False).random(budget + 1)[1:]
    P = lo + H * (hi - lo)
    return P[np.asarray(spec.member(P), bool)]


def _fan_spacing(P: np.ndarray, closed: bool) -> float:
    if len(P) < 2:
        return 0.0
    Q = np.vstack([P, P[:1]]) if closed else P
    return float(np.max(np.linalg.norm(np.diff(Q, axis=0), axis=1)))


def sample_set(spec: SetSpec, budget: int) -> tuple[np.ndarray, float]:
    """Points of a localized set in deterministic order, plus their spacing.

    The spacing is zero when the set is known exactly (finite sets, 1-D).
    """
    d = spec.dimension
    base = np.empty((0, d)) if spec.points is None else np.asarray(spec.points, float).reshape(-1, d)
    if spec.finite:
        return base, 0.0
    rays = np.empty((0, d))
    spacing = _fan_spacing(base, d == 2)
    if spec.anchor is not None and spec.region is not None:
        dirs = nested_directions(d, budget)
        smax = 2 * spec.radius + float(np.linalg.norm(spec.anchor - spec.center)) + 1e-12
        if spec.level_fn is None:
            rays = sublevel_boundary(spec.region, spec.anchor, dirs, smax)
            spacing = _fan_spacing(rays, True) if d == 2 else 2 * _nn_spacing(rays)
        elif float(spec.level_fn(spec.anchor[None, :])[0]) < spec.level:
            anchor = _interior_anchor(spec, smax) if d == 2 else spec.anchor
            ends, reach = _fan_crossings(spec.region, spec.level_fn, spec.level, anchor,
                                         dirs, smax)
            rays = ends[reach]
            if d == 2:
                nxt = np.roll(np.arange(len(dirs)), -1)
                pair = reach | reach[nxt]
                gaps = np.linalg.norm(ends - ends[nxt], axis=1)
                spacing = float(np.max(gaps[pair])) if pair.any() else 0.0
            else:
                spacing = 2 * _nn_spacing(rays)
    extra = _rejection_points(spec, budget)
    return np.vstack([base, rays, extra]), spacing


def _interior_anchor(spec: SetSpec, smax: float) -> np.ndarray:
    """Pull the anchor toward the middle of the region while g stays below the level.

    Minimizers of g tend to sit on the region's boundary; from there half of
    the rays leave the region at once and the fan spacing degrades.
    """
    a = spec.anchor
    bd = sublevel_boundary(spec.region, a, nested_directions(2, 64), smax)
    c = bd.mean(axis=0)
    for w in (0.5, 0.25, 0.1, 0.03, 0.01, 0.001):
        z = a + w * (c - a)
        if spec.region(z[None, :])[0] and float(spec.level_fn(z[None, :])[0]) < spec.level:
            return z
    return a


def _fan_crossings(region, g, level, anchor, dirs, smax, iters: int = 64):
    """Per ray: the level crossing where the ray reaches the level, else the region exit."""
    anchor = np.asarray(anchor, float)
    s_r = ray_boundary(region, anchor, dirs, smax, iters)
    ends = anchor + s_r[:, None] * dirs
    reach = np.asarray(g(ends)) >= level
    if reach.any():
        ends[reach] = bisect_level(g, level, anchor, dirs[reach], s_r[reach], iters)
    return ends, reach


def _nn_spacing(P):
    if len(P) < 2:
        return 0.0
    D = np.linalg.norm(P[:, None, :] - P[None, :, :], axis=2)
    np.fill_diagonal(D, np.inf)
    return float(np.max(D.min(axis=1)))


def sup_deviation(oracle: PopulationOracle, program: StochasticProgram, sample, spec: SetSpec,
                  kind: str, budget: int = 1024, x_ref=None, t: float | None = None) -> SupResult:
    """Sampled sup of a deviation integrand over ``spec`` with its witness.

    kind ``fixed``: t - [F̂(x) - F̂(x_ref)] over the level set of the objective;
    ``D0``: Δ̂(z, x_ref) = [f(z) - f(x_ref)] - [F̂(z) - F̂(x_ref)];
    ``Di``: level - F̂_i(z) with i and level taken from the set.
    The reported value is 0 v (max over the samples); ``slack`` is the
    integrand's Lipschitz constant times the sample spacing.
    """
    if kind not in SUP_KINDS:
        raise ProblemError(f"unknown deviation kind {kind!r}")
    if budget < MIN_BUDGET:
        raise ValueError(f"budget must be at least {MIN_BUDGET}")
    model = as_model(program, sample)
    P, spacing = sample_set(spec, budget)
    if len(P) == 0:
        return SupResult(kind, spec.label, 0.0, None, 0, 0.0, empty=True)
    if kind in ("fixed", "D0"):
        if x_ref is None:
            raise ProblemError("this deviation needs a reference point")
        xr = np.atleast_1d(np.asarray(x_ref, float))[None, :]
        dF = model.objective(P) - model.objective(xr)[0]
        if kind == "fixed":
            if t is None:
                raise ProblemError("the fixed-constraint deviation needs t")
            vals = t - dF
            lip = model.lipschitz[0]
        else:
            vals = (oracle.objective(P) - oracle.objective(xr)[0]) - dF
            lip = model.lipschitz[0] + oracle.lipschitz(0)
    else:
        i = spec.index
        vals = spec.level - model.value(i, P)
        lip = model.lipschitz[i]
    k = int(np.argmax(vals))
    raw = float(vals[k])
    return SupResult(kind, spec.label, max(0.0, raw), P[k].copy(), len(P), lip * spacing,
                     raw=raw)


def deviation_set(oracle: PopulationOracle, model: EmpiricalModel, kind: str, eps: float,
                  gamma: float = 0.0, y=None, t1: float | None = None, i: int = 0,
                  budget: int = 1024, min_gamma: float | None = None) -> SetSpec:
    """Localized set behind a deviation quantity.

    ``fixed``: {x in X : f(x) = f* + eps};
    ``D0``: {z in X_gamma cap X̂^y_t1 : f(z) = min_{X_gamma} f + eps};
    ``Di``: {z in X_gamma cap X̂^y_t1 : f(z) <= min_{X_gamma} f + eps, f_i(z) = gamma}.
    """
    program = oracle.program
    if kind == "fixed":
        return localized_set_spec(oracle, program, "X*0", gamma=eps, budget=budget)
    y = np.atleast_1d(np.asarray(y, float))
    fmin = oracle.min_over(gamma)[0] if min_gamma is None else min_gamma
    top_hat = float(model.objective(y)[0]) + t1
    f = oracle.objective

    def restricted(X):
        X = _rows(X)
        return (oracle.feasible(X, gamma) & model.feasible(X)
                & (model.objective(X) <= top_hat))

    hints = [oracle.x_star, y]
    if kind == "D0":
        return level_set_spec("D0", gamma, restricted, f, fmin + eps, program.hard_set, hints,
                              budget, oracle.eta)
    region = lambda X: restricted(X) & (f(X) <= fmin + eps)
    return level_set_spec("Di", gamma, region, lambda X, i=i: oracle.value(i, X), gamma,
                          program.hard_set, hints, budget, oracle.eta, index=i)


# -- targets and the inclusion search -----------------------------------------

@dataclass(frozen=True, eq=False)
class Target:
    """A set described by a convex violation function (<= 0 inside)."""

    label: str
    violation: Callable
    params: dict = field(default_factory=dict)


def near_optimal_target(oracle: PopulationOracle, t: float) -> Target:
    """X*_t = {x in X : f(x) <= f* + t}."""
    fs = oracle.f_star
    viol = lambda X: np.maximum(oracle.objective(X) - fs - t, oracle.constraint_max(X))
    return Target("X*_t", viol, {"t": t, "f_star": fs})


def relaxed_target(oracle: PopulationOracle, gamma: float, s: float,
                   min_gamma: float | None = None) -> Target:
    """(X_gamma)*_s = {x in X_gamma : f(x) <= min_{X_gamma} f + s}."""
    fmin = oracle.min_over(gamma)[0] if min_gamma is None else min_gamma
    viol = lambda X: np.maximum(oracle.objective(X) - fmin - s, oracle.constraint_max(X) - gamma)
    return Target("(X_gamma)*_s", viol, {"gamma": gamma, "s": s, "min_gamma": fmin})


def exterior_target(oracle: PopulationOracle, eps_hat: float, regularity: float | None = None) -> Target:
    """{x : dist(x, X) <= 3 c eps_hat and f(x) <= f* + 3 eps_hat}."""
    c = oracle.regularity if regularity is None else regularity
    if c is None:
        raise MissingIngredient("metric-regularity constant is required")
    fs = oracle.f_star
    viol = lambda X: np.maximum(oracle.dist(X) - 3 * c * eps_hat,
                                oracle.objective(X) - fs - 3 * eps_hat)
    return Target("X+3c eps B", viol, {"eps_hat": eps_hat, "regularity": c, "f_star": fs})


@dataclass
class InclusionResult:
    holds: bool
    witness: np.ndarray | None
    max_violation: float
    evaluated: int
    fhat_star: float | None
    tolerance: float

    def __bool__(self):
        return self.holds


def inclusion_check(oracle: PopulationOracle, program: StochasticProgram, sample, t1: float,
                    target: Target, budget: int = 1024) -> InclusionResult:
    """Search X̂*_t1 for a point violating ``target``.

    The violation is convex, so its max over the convex set X̂*_t1 sits on the
    boundary: the set is probed along ray fans from the empirical minimizer and
    from the centroid of the first fan, plus grid points inside it. The set is
    shrunk by TOL (scaled) to absorb the solver error on the empirical optimum.
    """
    model = as_model(program, sample)
    try:
        fh, xh = empirical_minimum(model)
    except solver.NoFeasiblePoint:
        return InclusionResult(True, None, -math.inf, 0, None, 0.0)
    tau = TOL * max(1.0, abs(fh))
    level = fh + t1 - tau
    region = lambda X: model.feasible(X) & (model.objective(X) <= level)
    hard = program.hard_set
    d = program.dimension
    dirs = nested_directions(d, budget)
    smax = hard.farthest_distance(xh)
    pts = [xh[None, :], sublevel_boundary(region, xh, dirs, smax)]
    centroid = pts[1].mean(axis=0)
    if region(centroid[None, :])[0]:
        pts.append(sublevel_boundary(region, centroid, dirs, hard.farthest_distance(centroid)))
    if d <= 3:
        lo, hi = hard.bounding_box
        per_axis = {1: 2001, 2: 65, 3: 17}[d]
        G = solver.grid_points(lo, hi, float((hi - lo).max()) / (per_axis - 1))
        pts.append(G[region(G)])
    P = np.vstack(pts)
    v = np.asarray(target.violation(P), float)
    k = int(np.argmax(v))
    tol = TOL * max(1.0, abs(oracle.f_star))
    bad = float(v[k]) > tol
    return InclusionResult(not bad, P[k].copy() if bad else None, float(v[k]), len(P), fh, tol)


# -- condition reports --------------------------------------------------------

@dataclass(frozen=True)
class ConditionParameters:
    t: float
    t0: float
    t1: float
    t2: float
    gamma: float
    x_star: np.ndarray
    y_star: np.ndarray


@dataclass
class ConditionReport:
    """Verdict of one condition bundle; ``status`` is holds, fails or premise-invalid."""

    which: str
    status: str
    flags: dict = field(default_factory=dict)           # conservative (with slack)
    flags_sampled: dict = field(default_factory=dict)   # sampled sups only
    sups: dict = field(default_factory=dict)
    pointwise: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)
    target: Target | None = None
    t1: float | None = None
    conclusion: InclusionResult | None = None
    reason: str = ""
    instance: str = ""

    @property
    def premises_hold(self) -> bool:
        return self.status == "holds"

    def to_record(self) -> dict:
        """Flat record for CSV output."""
        rec = {"instance": self.instance, "which": self.which, "status": self.status,
               "reason": self.reason}
        for k, v in self.params.items():
            rec[f"param_{k}"] = _plain(v)
        for k, v in self.flags.items():
            rec[f"flag_{k}"] = bool(v)
        for k, s in self.sups.items():
            rec[f"sup_{k}"] = s.value
            rec[f"slack_{k}"] = s.slack
            rec[f"witness_{k}"] = _plain(s.witness)
        for k, v in self.pointwise.items():
            rec[f"point_{k}"] = _plain(v)
        c = self.conclusion
        rec["conclusion"] = None if c is None else bool(c.holds)
        rec["max_violation"] = None if c is None else c.max_violation
        rec["counterexample"] = None if c is None else _plain(c.witness)
        return rec


def _plain(v):
    if v is None:
        return None
    if isinstance(v, np.ndarray):
        return json.dumps([float(a) for a in v.ravel()])
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    return v


def _finish(report: ConditionReport, oracle, program, sample, budget, test_conclusion):
    report.status = "holds" if all(report.flags.values()) else "fails"
    if report.status == "holds" and test_conclusion and report.target is not None:
        report.conclusion = inclusion_check(oracle, program, sample, report.t1, report.target,
                                            budget)
    return report


def check_c0(oracle: PopulationOracle, program: StochasticProgram, sample, x_star, t: float,
             t1: float, budget: int = 1024, test_conclusion: bool = True) -> ConditionReport:
    """Fixed constraints: does t1 <= t - Δ̂(x*|t) hold, and then is X̂*_t1 inside X*_t?"""
    if t <= 0:
        raise ProblemError("t must be positive")
    if program.m != 0:
        raise ProblemError("C0 applies to fixed constraints (m = 0)")
    if t1 < 0:
        raise ProblemError("t1 must be nonnegative")
    model = as_model(program, sample)
    x_star = np.atleast_1d(np.asarray(x_star, float))
    spec = deviation_set(oracle, model, "fixed", t, budget=budget)
    sup = sup_deviation(oracle, program, model, spec, "fixed", budget, x_ref=x_star, t=t)
    rep = ConditionReport("C0", "", params={"t": t, "t1": t1}, sups={"Delta_fixed": sup},
                          target=near_optimal_target(oracle, t), t1=t1,
                          instance=program.name)
    rep.flags_sampled["C0"] = t1 <= t - sup.value
    rep.flags["C0"] = t1 <= t - sup.upper
    return _finish(rep, oracle, program, model, budget, test_conclusion)


def _witness_problems(oracle, model, p: ConditionParameters, min_gamma: float) -> list[str]:
    probs = []
    if p.t0 < 0 or p.t2 < 0:
        probs.append("t0 and t2 must be nonnegative")
    if not p.t1 > 0:
        probs.append("t1 must be positive")
    if p.t < p.t0:
        probs.append("t must be at least t0")
    if p.gamma < 0:
        probs.append("gamma must be nonnegative")
    tiny = 1e-12 * max(1.0, abs(oracle.f_star))
    xs, ys = p.x_star[None, :], p.y_star[None, :]
    hard = oracle.program.hard_set
    if not (hard.contains(xs)[0] and oracle.constraint_max(xs)[0] <= p.gamma + tiny
            and oracle.objective(xs)[0] <= min_gamma + p.t2 + tiny):
        probs.append("x* is not in (X_gamma)*_t2")
    if not (hard.contains(ys)[0] and oracle.constraint_max(ys)[0] <= p.gamma + tiny):
        probs.append("y* is not in X_gamma")
    elif not oracle.objective(ys)[0] <= oracle.objective(xs)[0] + p.t0 + tiny:
        probs.append("f(y*) exceeds f(x*) + t0")
    for i in range(1, model.m + 1):
        if not oracle.value(i, ys)[0] < model.relaxation:
            probs.append(f"f_{i}(y*) is not below eps_hat")
    return probs


def check_c1_c2_c3(oracle: PopulationOracle, program: StochasticProgram, sample,
                   params: ConditionParameters, budget: int = 1024,
                   test_conclusion: bool = True) -> ConditionReport:
    """Perturbed constraints: conditions C1, C2, C3 and the inclusion in (X_gamma)*_{t+t2}."""
    if program.m == 0:
        raise NoConstraints("C1-C3 need at least one stochastic constraint")
    model = as_model(program, sample)
    p = ConditionParameters(float(params.t), float(params.t0), float(params.t1), float(params.t2),
                            float(params.gamma), np.atleast_1d(np.asarray(params.x_star, float)),
                            np.atleast_1d(np.asarray(params.y_star, float)))
    names = {"t": p.t, "t0": p.t0, "t1": p.t1, "t2": p.t2, "gamma": p.gamma,
             "eps_hat": model.relaxation}
    rep = ConditionReport("C1-C3", "", params=names, instance=program.name, t1=p.t1)
    try:
        min_gamma = oracle.min_over(p.gamma)[0]
    except InfeasibleRelaxation:
        rep.status, rep.reason = "premise-invalid", "X_gamma is empty"
        return rep
    probs = _witness_problems(oracle, model, p, min_gamma)
    if probs:
        rep.status, rep.reason = "premise-invalid", "; ".join(probs)
        return rep
    return _theorem_two(rep, oracle, program, model, p, min_gamma, budget, test_conclusion)


def _theorem_two(rep, oracle, program, model, p, min_gamma, budget, test_conclusion):
    eh = model.relaxation
    dev = deviation_quantities(oracle, program, model, p.x_star, p.y_star)
    level = p.t + p.t2
    s0 = sup_deviation(oracle, program, model,
                       deviation_set(oracle, model, "D0", level, p.gamma, p.y_star, p.t1,
                                     budget=budget, min_gamma=min_gamma),
                       "D0", budget, x_ref=p.x_star)
    rep.sups["Delta_0"] = s0
    rep.pointwise["delta"] = dev.delta
    rhs = p.t - p.t0 - dev.delta
    rep.flags_sampled["C1"] = p.t1 <= rhs - s0.value
    rep.flags["C1"] = p.t1 <= rhs - s0.upper
    dev_y = deviation_quantities(oracle, program, model, p.y_star, p.y_star)
    for i in range(1, model.m + 1):
        si = sup_deviation(oracle, program, model,
                           deviation_set(oracle, model, "Di", level, p.gamma, p.y_star, p.t1, i=i,
                                         budget=budget, min_gamma=min_gamma),
                           "Di", budget)
        rep.sups[f"Delta_{i}"] = si
        rep.flags_sampled[f"C2_{i}"] = si.value <= p.gamma - eh
        rep.flags[f"C2_{i}"] = si.upper <= p.gamma - eh
        fi = float(oracle.value(i, p.y_star)[0])
        rep.pointwise[f"delta_{i}"] = float(dev_y.delta_i[i - 1])
        ok = dev_y.delta_i[i - 1] < eh - fi
        rep.flags_sampled[f"C3_{i}"] = rep.flags[f"C3_{i}"] = bool(ok)
    rep.target = relaxed_target(oracle, p.gamma, level, min_gamma)
    return _finish(rep, oracle, program, model, budget, test_conclusion)


def corollary_one_parameters(oracle: PopulationOracle, eps_hat: float) -> ConditionParameters:
    """Theorem-two parameters that reproduce the exterior corollary."""
    g = 3 * eps_hat
    fmin = oracle.min_over(g)[0]
    # relaxing can only lower the optimum; clip solver noise
    t2 = max(0.0, float(oracle.f_star - fmin))
    return ConditionParameters(t=g, t0=0.0, t1=eps_hat, t2=t2, gamma=g, x_star=oracle.x_star,
                               y_star=oracle.x_star)


def check_corollary(oracle: PopulationOracle, program: StochasticProgram, sample, which: str,
                    eps: float, budget: int = 1024, test_conclusion: bool = True) -> ConditionReport:
    """Premise bundle of one corollary and, when it holds, its conclusion.

    ``eps`` is eps_hat for the exterior case (it overrides the relaxation)
    and the tolerance eps for the two interior cases (the relaxation of
    ``sample``/``program`` is eps_hat there).
    """
    if which not in COROLLARIES:
        raise ProblemError(f"unknown corollary {which!r}")
    if program.m == 0:
        raise NoConstraints("the corollaries need stochastic constraints")
    model = as_model(program, sample)
    rep = ConditionReport(which, "", instance=program.name)
    x_star = oracle.x_star
    if which == "exterior-MR":
        model = model.with_relaxation(eps)
        rep.params = {"eps_hat": eps}
        problems = []
        if not eps > 0:
            problems.append("eps_hat must be positive")
        if oracle.regularity is None:
            problems.append("metric-regularity constant is missing")
        if oracle.projector is None:
            problems.append("projection oracle is missing")
        if problems:
            rep.status, rep.reason = "premise-invalid", "; ".join(problems)
            return rep
        g = 3 * eps
        rep.params["regularity"] = oracle.regularity
        s0 = sup_deviation(oracle, program, model,
                           localized_set_spec(oracle, program, "XX*0", gamma=g, budget=budget),
                           "D0", budget, x_ref=x_star)
        rep.sups["Delta_0"] = s0
        rep.flags_sampled["sup0"] = s0.value <= 2 * eps
        rep.flags["sup0"] = s0.upper <= 2 * eps
        for i in range(1, program.m + 1):
            si = sup_deviation(oracle, program, model,
                               localized_set_spec(oracle, program, "XX*i", i=i, gamma=g,
                                                  budget=budget), "Di", budget)
            rep.sups[f"Delta_{i}"] = si
            rep.flags_sampled[f"sup{i}"] = si.value <= 2 * eps
            rep.flags[f"sup{i}"] = si.upper <= 2 * eps
        _pointwise_constraints(rep, oracle, program, model, x_star, eps)
        rep.target = exterior_target(oracle, eps)
        rep.t1 = eps
        return _finish(rep, oracle, program, model, budget, test_conclusion)

    eh = model.relaxation
    rep.params = {"eps": eps, "eps_hat": eh}
    problems = [] if eps > 0 else ["eps must be positive"]
    if not eh >= -eps:
        problems.append("eps_hat must be at least -eps")
    if which == "interior-SCQ":
        slack = oracle.slater_slack_value
        if slack is None or slack <= 0:
            problems.append("no Slater point")
        elif eps > slack / 2:
            problems.append("eps exceeds half the Slater slack")
        if problems:
            rep.status, rep.reason = "premise-invalid", "; ".join(problems)
            return rep
        try:
            fy, y_star = oracle.min_over(-2 * eps)
        except InfeasibleRelaxation:
            rep.status, rep.reason = "premise-invalid", "interior-relaxation-infeasible"
            return rep
        gap2 = max(0.0, fy - oracle.f_star)
        rep.params["gap"] = gap2
        dev = deviation_quantities(oracle, program, model, x_star, y_star)
        rep.pointwise["delta"] = dev.delta
        s0 = sup_deviation(oracle, program, model,
                           localized_set_spec(oracle, program, "XG*0", gamma=2 * eps,
                                              gap_gamma=gap2, budget=budget),
                           "D0", budget, x_ref=x_star)
        kind_i, kw = "XG*i", {"gap_gamma": gap2}
        target = near_optimal_target(oracle, 2 * eps + gap2)
    else:
        y_star = x_star
        interior = -float(oracle.constraint_max(y_star)[0])
        rep.params["interior_slack"] = interior
        if not interior > 0:
            problems.append("the solution is not interior")
        elif eps > interior / 2:
            problems.append("eps exceeds half the interior slack")
        if problems:
            rep.status, rep.reason = "premise-invalid", "; ".join(problems)
            return rep
        rep.pointwise["delta"] = 0.0
        s0 = sup_deviation(oracle, program, model,
                           localized_set_spec(oracle, program, "X*0", gamma=2 * eps, budget=budget),
                           "D0", budget, x_ref=y_star)
        kind_i, kw = "X*i", {}
        target = near_optimal_target(oracle, 2 * eps)
    rep.sups["Delta_0"] = s0
    lhs = rep.pointwise["delta"]
    rep.flags_sampled["sup0"] = lhs + s0.value <= eps
    rep.flags["sup0"] = lhs + s0.upper <= eps
    for i in range(1, program.m + 1):
        si = sup_deviation(oracle, program, model,
                           localized_set_spec(oracle, program, kind_i, i=i, gamma=2 * eps,
                                              budget=budget, **kw), "Di", budget)
        rep.sups[f"Delta_{i}"] = si
        rep.flags_sampled[f"sup{i}"] = si.value <= -eh
        rep.flags[f"sup{i}"] = si.upper <= -eh
    _pointwise_constraints(rep, oracle, program, model, y_star, eps)
    rep.target = target
    rep.t1 = eps
    return _finish(rep, oracle, program, model, budget, test_conclusion)


def _pointwise_constraints(rep, oracle, program, model, point, bound):
    dev = deviation_quantities(oracle, program, model, point, point)
    for i in range(1, program.m + 1):
        v = float(dev.delta_i[i - 1])
        rep.pointwise[f"delta_{i}"] = v
        rep.flags_sampled[f"point{i}"] = rep.flags[f"point{i}"] = v < bound
