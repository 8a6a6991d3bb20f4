"""Exact and empirical convex programs with ground-truth oracles.

A synthetic loss has the scenario form

    F_i(x, xi) = M_i(xi) * g_i(x) + s_i * <W_i(xi), x>

where ``g_i`` is a deterministic convex base function, ``M_i >= 0`` is a
heavy-tailed multiplier with mean one (or identically one) and ``W_i`` is a
centred unit-variance heavy-tailed vector. Hence ``f_i = g_i`` in closed form,
each ``F_i(., xi)`` is convex, and ``F_i`` is Lipschitz on ``Y`` with envelope
``M_i * Lip(g_i) + s_i * ||W_i||_1``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from . import solver, streams
from .noise import NoiseLaw, noise_from_descriptor

SCHEMA_VERSION = 1


class ProblemError(ValueError):
    pass


class InfeasibleRelaxation(ProblemError):
    """X_gamma (or X_{-gamma}) is empty."""


class NoInformation(ProblemError):
    """Every probe was feasible; no regularity information."""


class NoConstraints(ProblemError):
    """Slater slack requested for a program without constraints."""


class MissingIngredient(ProblemError):
    pass


def _rows(x) -> np.ndarray:
    x = np.asarray(x, float)
    return x[None, :] if x.ndim == 1 else x


# -- hard set -----------------------------------------------------------------

@dataclass(frozen=True)
class HardSet:
    """Box (``radius`` is the half-width) or Euclidean ball."""

    kind: str
    center: np.ndarray
    radius: float

    def __post_init__(self):
        if self.kind not in ("box", "ball"):
            raise ProblemError(f"hard set kind must be box or ball, got {self.kind!r}")
        object.__setattr__(self, "center", np.atleast_1d(np.asarray(self.center, float)))
        if self.radius <= 0:
            raise ProblemError("hard set radius must be positive")

    @property
    def dimension(self) -> int:
        return self.center.size

    @property
    def diameter(self) -> float:
        if self.kind == "box":
            return 2 * self.radius * math.sqrt(self.dimension)
        return 2 * self.radius

    @property
    def bounding_ball(self) -> tuple[np.ndarray, float]:
        return self.center, self.diameter / 2

    @property
    def bounding_box(self) -> tuple[np.ndarray, np.ndarray]:
        return self.center - self.radius, self.center + self.radius

    def contains(self, X, tol: float = 1e-12) -> np.ndarray:
        X = _rows(X)
        if self.kind == "box":
            return np.all(np.abs(X - self.center) <= self.radius + tol, axis=1)
        return np.linalg.norm(X - self.center, axis=1) <= self.radius + tol

    def project(self, X):
        X = np.asarray(X, float)
        if self.kind == "box":
            return np.clip(X, self.center - self.radius, self.center + self.radius)
        diff = X - self.center
        n = np.linalg.norm(diff, axis=-1, keepdims=True)
        factor = np.where(n > self.radius, self.radius / np.maximum(n, 1e-300), 1.0)
        return self.center + diff * factor

    def farthest_distance(self, point) -> float:
        """max over Y of ||x - point||."""
        p = np.asarray(point, float)
        if self.kind == "box":
            return float(np.linalg.norm(np.abs(p - self.center) + self.radius))
        return float(np.linalg.norm(p - self.center) + self.radius)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "center": self.center.tolist(), "radius": self.radius}


# -- losses -------------------------------------------------------------------

FAMILIES = ("affine", "norm", "quadratic", "max-affine")


@dataclass(frozen=True)
class Loss:
    """Base function g(x) = intercept + <linear, x> + weight * h(x).

    h is 0 (affine), ||x - center|| (norm), ||x - center||^2 (quadratic) or
    max_k <p_k, x> + q_k (max-affine, rows of ``pieces`` are [p_k, q_k]).
    """

    family: str
    linear: np.ndarray
    intercept: float = 0.0
    weight: float = 0.0
    center: np.ndarray | None = None
    pieces: np.ndarray | None = None
    multiplicative: bool = True
    additive_scale: float = 0.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ProblemError(f"unknown loss family {self.family!r}")
        object.__setattr__(self, "linear", np.atleast_1d(np.asarray(self.linear, float)))
        d = self.linear.size
        if self.weight < 0:
            raise ProblemError("curvature weight must be nonnegative (convexity)")
        if self.family in ("norm", "quadratic"):
            c = np.zeros(d) if self.center is None else np.atleast_1d(np.asarray(self.center, float))
            object.__setattr__(self, "center", c)
        if self.family == "max-affine":
            if self.pieces is None:
                raise ProblemError("max-affine loss needs pieces")
            object.__setattr__(self, "pieces", np.atleast_2d(np.asarray(self.pieces, float)))
        if self.additive_scale < 0:
            raise ProblemError("additive noise scale must be nonnegative")

    @property
    def dimension(self) -> int:
        return self.linear.size

    def curvature(self, X) -> np.ndarray:
        X = _rows(X)
        if self.family == "affine":
            return np.zeros(len(X))
        if self.family == "norm":
            return np.linalg.norm(X - self.center, axis=1)
        if self.family == "quadratic":
            diff = X - self.center
            return np.einsum("ij,ij->i", diff, diff)
        P = self.pieces
        return np.max(X @ P[:, :-1].T + P[:, -1], axis=1)

    def curvature_subgradient(self, x) -> np.ndarray:
        x = np.asarray(x, float)
        if self.family == "affine":
            return np.zeros_like(x)
        if self.family == "norm":
            diff = x - self.center
            n = np.linalg.norm(diff)
            return diff / n if n > 0 else np.zeros_like(x)
        if self.family == "quadratic":
            return 2 * (x - self.center)
        P = self.pieces
        k = int(np.argmax(P[:, :-1] @ x + P[:, -1]))
        return P[k, :-1].copy()

    def base(self, X) -> np.ndarray:
        X = _rows(X)
        return self.intercept + X @ self.linear + self.weight * self.curvature(X)

    def base_subgradient(self, x) -> np.ndarray:
        return self.linear + self.weight * self.curvature_subgradient(x)

    def base_lipschitz(self, hard: HardSet) -> float:
        lip = float(np.linalg.norm(self.linear))
        if self.family == "norm":
            lip += self.weight
        elif self.family == "quadratic":
            lip += self.weight * 2 * hard.farthest_distance(self.center)
        elif self.family == "max-affine":
            lip += self.weight * float(np.max(np.linalg.norm(self.pieces[:, :-1], axis=1)))
        return lip

    def simple_pieces(self, level: float):
        """Describe {g <= level} as halfspaces/balls, or None if not of that form.

        Returns a list of ("half", a, b) meaning <a, x> <= b and ("ball", c, r).
        """
        rhs = level - self.intercept
        if self.family == "affine" or self.weight == 0:
            if not np.any(self.linear):
                return [] if rhs >= 0 else None
            return [("half", self.linear.copy(), rhs)]
        if np.any(self.linear):
            return None
        if self.family == "norm":
            return [("ball", self.center.copy(), rhs / self.weight)] if rhs >= 0 else None
        if self.family == "quadratic":
            return [("ball", self.center.copy(), math.sqrt(rhs / self.weight))] if rhs >= 0 else None
        P = self.pieces
        return [("half", P[k, :-1].copy(), rhs / self.weight - P[k, -1]) for k in range(len(P))]

    def to_dict(self) -> dict:
        out = {"family": self.family, "linear": self.linear.tolist(), "intercept": self.intercept,
               "weight": self.weight, "multiplicative": self.multiplicative,
               "additive_scale": self.additive_scale}
        if self.center is not None:
            out["center"] = self.center.tolist()
        if self.pieces is not None:
            out["pieces"] = self.pieces.tolist()
        return out

    @classmethod
    def from_dict(cls, spec: dict, d: int, default_scale: float) -> "Loss":
        return cls(
            family=spec["family"],
            linear=spec.get("linear", [0.0] * d),
            intercept=float(spec.get("intercept", 0.0)),
            weight=float(spec.get("weight", 0.0)),
            center=spec.get("center"),
            pieces=spec.get("pieces"),
            multiplicative=bool(spec.get("multiplicative", True)),
            additive_scale=float(spec.get("additive_scale", default_scale)),
        )


# -- scenarios ----------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ScenarioSet:
    """Ordered i.i.d. sample; row j holds the noise variates of scenario j.

    ``lineage`` is (experiment seed, stream id, trial index); regenerating from
    it reproduces the array bit for bit.
    """

    scenarios: np.ndarray
    lineage: tuple = ()

    def __post_init__(self):
        arr = np.asarray(self.scenarios, float)
        if arr.ndim != 2 or arr.shape[0] < 1:
            raise ProblemError("a scenario set needs N >= 1 rows")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "scenarios", arr)
        object.__setattr__(self, "_means", arr.mean(axis=0))

    @property
    def N(self) -> int:
        return self.scenarios.shape[0]

    @property
    def column_means(self) -> np.ndarray:
        return self._means


# -- the program --------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class StochasticProgram:
    hard_set: HardSet
    losses: tuple
    noise: NoiseLaw
    relaxation: float = 0.0
    strong_convexity: float | None = None
    name: str = "instance"

    def __post_init__(self):
        d = self.hard_set.dimension
        if d < 1:
            raise ProblemError("dimension must be >= 1")
        for loss in self.losses:
            if loss.dimension != d:
                raise ProblemError("loss dimension does not match the hard set")
        object.__setattr__(self, "losses", tuple(self.losses))
        object.__setattr__(self, "_lips", tuple(l.base_lipschitz(self.hard_set) for l in self.losses))

    @property
    def dimension(self) -> int:
        return self.hard_set.dimension

    @property
    def m(self) -> int:
        return len(self.losses) - 1

    @property
    def width(self) -> int:
        """Number of noise columns per scenario."""
        return (self.m + 1) * (self.dimension + 1)

    def with_relaxation(self, relaxation: float) -> "StochasticProgram":
        return StochasticProgram(self.hard_set, self.losses, self.noise, float(relaxation),
                                 self.strong_convexity, self.name)

    def _check(self, i):
        if not 0 <= i <= self.m:
            raise IndexError(f"loss index {i} out of range 0..{self.m}")

    def _columns(self, i, scen):
        scen = np.asarray(scen, float)
        k = i * (self.dimension + 1)
        loss = self.losses[i]
        M = scen[..., k] if loss.multiplicative else np.ones(scen.shape[:-1])
        W = scen[..., k + 1:k + 1 + self.dimension] * loss.additive_scale
        return M, W

    def draw(self, rng: np.random.Generator, n: int) -> np.ndarray:
        d = self.dimension
        out = np.empty((n, self.width))
        for i in range(self.m + 1):
            k = i * (d + 1)
            out[:, k] = self.noise.multiplier(rng, n)
            out[:, k + 1:k + 1 + d] = self.noise.additive(rng, (n, d))
        return out

    def sample(self, n: int, seed: int, trial: int = 0, stream_id: int = streams.SCENARIOS) -> ScenarioSet:
        rng = streams.stream(seed, stream_id, trial)
        return ScenarioSet(self.draw(rng, n), (int(seed), int(stream_id), int(trial)))

    def regenerate(self, sample: ScenarioSet) -> ScenarioSet:
        seed, stream_id, trial = sample.lineage
        return self.sample(sample.N, seed, trial, stream_id)

    # scenario-wise evaluation
    def scenario_values(self, i: int, X, scenarios) -> np.ndarray:
        """F_i(x_k, xi_j) as an array of shape (k, N)."""
        self._check(i)
        X = _rows(X)
        M, W = self._columns(i, scenarios)
        return np.outer(self.losses[i].base(X), M) + X @ W.T

    def scenario_subgradients(self, i: int, x, scenarios) -> np.ndarray:
        self._check(i)
        M, W = self._columns(i, scenarios)
        return np.outer(M, self.losses[i].base_subgradient(x)) + W

    def lipschitz_envelope(self, i: int, scenarios) -> np.ndarray:
        self._check(i)
        M, W = self._columns(i, scenarios)
        return M * self._lips[i] + np.abs(W).sum(axis=-1)

    # empirical averages
    def empirical(self, i: int, X, sample: ScenarioSet) -> np.ndarray:
        self._check(i)
        X = _rows(X)
        M, W = self._columns(i, sample.column_means)
        return M * self.losses[i].base(X) + X @ W

    def empirical_subgradient(self, i: int, x, sample: ScenarioSet) -> np.ndarray:
        self._check(i)
        M, W = self._columns(i, sample.column_means)
        return M * self.losses[i].base_subgradient(x) + W

    def empirical_lipschitz(self, i: int, sample: ScenarioSet) -> float:
        """Lipschitz constant of F̂_i on Y (mean of the envelope)."""
        return float(np.mean(self.lipschitz_envelope(i, sample.scenarios)))

    def population_lipschitz(self, i: int) -> float:
        """Lipschitz constant of f_i on Y."""
        return self._lips[i]

    # population moments (closed form)
    def envelope_moment(self, i: int, k: int) -> float:
        """E[L_i(xi)^k] for the envelope M*Lip + s*||W||_1, k in {1, 2, 4}."""
        loss = self.losses[i]
        lip, s, d = self._lips[i], loss.additive_scale, self.dimension
        law = self.noise
        mm = (lambda r: law.multiplier_moment(r)) if loss.multiplicative else (lambda r: 1.0)
        if s == 0 or law.family == "none":
            return lip ** k * mm(k)
        # moments of S = ||W||_1 (sum of d i.i.d. |W|) by folding coordinates
        w = [1.0] + [law.additive_abs_moment(r) for r in range(1, k + 1)]
        sm = [1.0] + [0.0] * k
        for _ in range(d):
            sm = [sum(math.comb(r, j) * sm[j] * w[r - j] for j in range(r + 1)) for r in range(k + 1)]
        return sum(math.comb(k, j) * lip ** j * mm(j) * s ** (k - j) * sm[k - j]
                   for j in range(k + 1))

    def variance(self, i: int, X) -> np.ndarray:
        """sigma_i^2(x) = P[F_i(x) - f_i(x)]^2 in closed form."""
        loss = self.losses[i]
        X = _rows(X)
        g = loss.base(X)
        var_m = (self.noise.multiplier_moment(2) - 1.0) if loss.multiplicative else 0.0
        if self.noise.family == "none":
            var_m = 0.0
        add = 0.0 if self.noise.family == "none" else loss.additive_scale ** 2
        return var_m * g ** 2 + add * np.einsum("ij,ij->i", X, X)

    def difference_variance(self, i: int, y, x) -> float:
        """P[F_i(y)-F_i(x) - (f_i(y)-f_i(x))]^2 in closed form."""
        loss = self.losses[i]
        y, x = np.asarray(y, float), np.asarray(x, float)
        dg = float(loss.base(y)[0] - loss.base(x)[0])
        if self.noise.family == "none":
            return 0.0
        var_m = (self.noise.multiplier_moment(2) - 1.0) if loss.multiplicative else 0.0
        return var_m * dg ** 2 + loss.additive_scale ** 2 * float((y - x) @ (y - x))

    def to_descriptor(self) -> dict:
        noise = {"family": self.noise.family}
        if self.noise.tail_index is not None:
            noise["tail_index"] = self.noise.tail_index
        if self.noise.dof is not None:
            noise["dof"] = self.noise.dof
        return {
            "schema_version": SCHEMA_VERSION,
            "name": self.name,
            "dimension": self.dimension,
            "m": self.m,
            "hard_set": self.hard_set.to_dict(),
            "loss_family": self.losses[0].family,
            "noise": noise,
            "relaxation": self.relaxation,
            "strong_convexity": self.strong_convexity,
            "objective": self.losses[0].to_dict(),
            "constraints": [l.to_dict() for l in self.losses[1:]],
        }


def empirical_value(program: StochasticProgram, sample: ScenarioSet, i: int, x) -> float:
    """(1/N) sum_j F_i(x, xi_j)."""
    x = np.atleast_1d(np.asarray(x, float))
    if x.shape != (program.dimension,):
        raise ProblemError(f"x must have dimension {program.dimension}")
    if not program.hard_set.contains(x)[0]:
        raise ProblemError("x lies outside the hard set Y")
    program._check(i)
    return float(program.empirical(i, x, sample)[0])


def load_descriptor(source) -> dict:
    """Read an instance descriptor from a path or accept a dict."""
    if isinstance(source, dict):
        return source
    return json.loads(Path(source).read_text())


def program_from_descriptor(source) -> StochasticProgram:
    desc = load_descriptor(source)
    if desc.get("schema_version") != SCHEMA_VERSION:
        raise ProblemError(f"unsupported schema_version {desc.get('schema_version')!r}")
    d = int(desc["dimension"])
    hs = desc["hard_set"]
    center = hs.get("center", [0.0] * d)
    hard = HardSet(hs["kind"], center, float(hs["radius"]))
    if hard.dimension != d:
        raise ProblemError("hard_set center does not match dimension")
    noise_spec = desc.get("noise", {"family": "none"})
    law = noise_from_descriptor(noise_spec)
    scale = float(noise_spec.get("scale", 0.0))
    obj = dict(desc["objective"])
    obj.setdefault("family", desc.get("loss_family"))
    losses = [Loss.from_dict(obj, d, scale)]
    losses += [Loss.from_dict(c, d, scale) for c in desc.get("constraints", [])]
    if len(losses) - 1 != int(desc.get("m", len(losses) - 1)):
        raise ProblemError("m does not match the number of constraints")
    sc = desc.get("strong_convexity")
    if sc is None and losses[0].family == "quadratic" and losses[0].weight > 0:
        sc = 2 * losses[0].weight
    return StochasticProgram(hard, tuple(losses), law, float(desc.get("relaxation", 0.0)),
                             None if sc is None else float(sc), desc.get("name", "instance"))


# -- population oracle --------------------------------------------------------

def _dykstra(points, pieces, hard: HardSet, iters: int = 3000, tol: float = 1e-13):
    """Project rows of ``points`` onto Y intersected with halfspaces/balls."""
    X = np.array(points, float, ndmin=2)
    sets = [("hard", None, None)] + list(pieces)
    incr = [np.zeros_like(X) for _ in sets]

    def proj(kind, a, b, Z):
        if kind == "hard":
            return hard.project(Z)
        if kind == "half":
            viol = Z @ a - b
            return Z - np.maximum(viol, 0)[:, None] * a / (a @ a)
        diff = Z - a
        n = np.linalg.norm(diff, axis=1, keepdims=True)
        return a + diff * np.where(n > b, b / np.maximum(n, 1e-300), 1.0)

    for _ in range(iters):
        prev = X
        for k, (kind, a, b) in enumerate(sets):
            Z = X + incr[k]
            Xn = proj(kind, a, b, Z)
            incr[k] = Z - Xn
            X = Xn
        if np.max(np.abs(X - prev)) < tol:
            break
    return X


@dataclass(frozen=True, eq=False)
class PopulationOracle:
    """Ground truth for a synthetic program: f_i in closed form plus derived facts."""

    program: StochasticProgram
    f_star: float
    x_star: np.ndarray
    regularity: float | None = None
    slater_point: np.ndarray | None = None
    slater_slack_value: float | None = None
    projector: Callable | None = None
    mesh: float = 0.02

    @property
    def m(self) -> int:
        return self.program.m

    @property
    def eta(self) -> float:
        """Equality tolerance for level sets."""
        return 1e-6 * max(1.0, abs(self.f_star))

    def value(self, i: int, X) -> np.ndarray:
        return self.program.losses[i].base(X)

    def objective(self, X) -> np.ndarray:
        return self.value(0, X)

    def constraint_max(self, X) -> np.ndarray:
        X = _rows(X)
        if self.m == 0:
            return np.full(len(X), -np.inf)
        return np.max(np.stack([self.value(i, X) for i in range(1, self.m + 1)]), axis=0)

    def feasible(self, X, gamma: float = 0.0, tol: float = 0.0) -> np.ndarray:
        X = _rows(X)
        return self.program.hard_set.contains(X) & (self.constraint_max(X) <= gamma + tol)

    def project(self, X) -> np.ndarray:
        if self.projector is None:
            raise MissingIngredient("no projection oracle for this instance")
        return self.projector(_rows(X))

    def dist(self, X) -> np.ndarray:
        X = _rows(X)
        return np.linalg.norm(X - self.project(X), axis=1)

    def min_over(self, gamma: float) -> tuple[float, np.ndarray]:
        """min of f over X_gamma and a minimizer (raises if X_gamma is empty)."""
        return _min_over(self.program, gamma, self.mesh)

    def lipschitz(self, i: int = 0) -> float:
        return self.program.population_lipschitz(i)

    @classmethod
    def from_program(cls, program: StochasticProgram, mesh: float = 0.02,
                     regularity_probes: int | None = None) -> "PopulationOracle":
        f_star, x_star = _min_over(program, 0.0, mesh)
        projector = _make_projector(program)
        slater_pt, slack = None, None
        if program.m > 0:
            cmax = lambda X: np.max(np.stack([program.losses[i].base(X)
                                              for i in range(1, program.m + 1)]), axis=0)
            v, slater_pt = solver.minimize_convex(cmax, program.hard_set.contains,
                                                  program.hard_set.bounding_box, mesh,
                                                  hard=program.hard_set)
            slack = -v
            if slack <= 0:
                slater_pt, slack = None, None
        oracle = cls(program, f_star, x_star, None, slater_pt, slack, projector, mesh)
        if projector is not None and program.m > 0:
            probes = _regularity_probes(program, regularity_probes)
            try:
                est = _refine_regularity(oracle, probes, metric_regularity_estimate(oracle, probes))
                oracle = cls(program, f_star, x_star, est, slater_pt, slack, projector, mesh)
            except NoInformation:
                pass
        return oracle

    def with_regularity(self, value: float) -> "PopulationOracle":
        return PopulationOracle(self.program, self.f_star, self.x_star, value, self.slater_point,
                                self.slater_slack_value, self.projector, self.mesh)


def _regularity_probes(program, pitch=None):
    lo, hi = program.hard_set.bounding_box
    if pitch is None:
        pitch = (hi - lo).max() / (2000 if program.dimension == 1 else 60)
    pts = solver.grid_points(lo, hi, pitch)
    return pts[program.hard_set.contains(pts)]


def _ratio(oracle, P):
    res = np.maximum(oracle.constraint_max(P), 0.0)
    out = np.zeros(len(P))
    mask = (res > 1e-12) & oracle.program.hard_set.contains(P)
    if mask.any():
        out[mask] = oracle.dist(P[mask]) / res[mask]
    return out


def _refine_regularity(oracle, probes, estimate, starts=5, rounds=24):
    """Raise a probe estimate of the regularity constant by local search.

    In one dimension the ratio dist/residual is largest next to the ends of X
    (the residual is convex and vanishes there), so it is evaluated a hair
    outside each end. In two dimensions the best probes are improved by a
    compass search with halving steps.
    """
    program = oracle.program
    P = _rows(probes)
    if program.dimension == 1:
        lo, hi = program.hard_set.bounding_box
        a, b = _interval_1d(program, 0.0)
        h = 1e-9 * float(hi[0] - lo[0])
        ends = np.array([[a - h], [b + h]])
        return max(estimate, float(np.max(_ratio(oracle, ends))))
    r = _ratio(oracle, P)
    top = P[np.argsort(-r, kind="stable")[:starts]]
    vals = _ratio(oracle, top)
    lo, hi = program.hard_set.bounding_box
    step = float((hi - lo).max()) / 60
    ang = np.linspace(0, 2 * np.pi, 8, endpoint=False)
    dirs = np.stack([np.cos(ang), np.sin(ang)], axis=1)
    for _ in range(rounds):
        cand = (top[:, None, :] + step * dirs[None, :, :]).reshape(-1, 2)
        cv = _ratio(oracle, cand).reshape(len(top), len(dirs))
        k = np.argmax(cv, axis=1)
        better = cv[np.arange(len(top)), k] > vals
        top = np.where(better[:, None], cand.reshape(len(top), len(dirs), 2)[np.arange(len(top)), k], top)
        vals = np.maximum(vals, cv[np.arange(len(top)), k])
        step /= 2
    return max(estimate, float(vals.max()))


def _make_projector(program: StochasticProgram):
    d, hard = program.dimension, program.hard_set
    if program.m == 0:
        return hard.project
    if d == 1:
        lo, hi = _interval_1d(program, 0.0)
        return lambda X: np.clip(_rows(X), lo, hi)
    pieces = []
    for loss in program.losses[1:]:
        p = loss.simple_pieces(0.0)
        if p is None:
            return None
        pieces += p
    return lambda X: _dykstra(X, pieces, hard)


def _interval_1d(program, gamma):
    hard = program.hard_set
    member = lambda X: _relaxed_member(program, X, gamma)
    lo, hi = hard.bounding_box
    g = solver.brute_force_min(lambda X: np.max(np.stack([program.losses[i].base(X) for i in range(1, program.m + 1)]), axis=0),
                               hard.contains, (lo, hi), (hi[0] - lo[0]) / 400)
    x0 = g.argmins[0]
    if not member(x0[None, :])[0]:
        v, x0 = solver.minimize_convex(
            lambda X: np.max(np.stack([program.losses[i].base(X) for i in range(1, program.m + 1)]), axis=0),
            hard.contains, (lo, hi))
        if v > gamma:
            raise InfeasibleRelaxation(f"X_gamma is empty for gamma={gamma}")
    left = x0[0] - solver._bisect_boundary(member, x0, np.array([-1.0]), x0[0] - lo[0], 200)
    right = x0[0] + solver._bisect_boundary(member, x0, np.array([1.0]), hi[0] - x0[0], 200)
    return left, right


def _relaxed_member(program, X, gamma):
    X = _rows(X)
    ok = program.hard_set.contains(X)
    for i in range(1, program.m + 1):
        ok &= program.losses[i].base(X) <= gamma
    return ok


def _constraint_violation(program, gamma):
    if program.m == 0:
        return None
    return lambda X: np.max(np.stack([program.losses[i].base(X)
                                      for i in range(1, program.m + 1)]), axis=0) - gamma


def _min_over(program, gamma, mesh):
    member = lambda X: _relaxed_member(program, X, gamma)
    try:
        return solver.minimize_convex(program.losses[0].base, member,
                                      program.hard_set.bounding_box, mesh,
                                      violation=_constraint_violation(program, gamma),
                                      hard=program.hard_set)
    except solver.NoFeasiblePoint:
        if program.m > 0 and program.dimension == 1:
            lo, hi = _interval_1d(program, gamma)
            return solver.minimize_convex(program.losses[0].base,
                                          lambda X: (X[:, 0] >= lo) & (X[:, 0] <= hi),
                                          (np.array([lo]), np.array([hi])), (hi - lo) / 50 or 1.0)
        raise InfeasibleRelaxation(f"X_gamma is empty for gamma={gamma}") from None


def feasibility_residual(oracle: PopulationOracle, x, gamma: float = 0.0) -> float:
    """max_i [f_i(x) - gamma]_+ (zero iff x is in X_gamma)."""
    x = np.atleast_1d(np.asarray(x, float))
    if not oracle.program.hard_set.contains(x)[0]:
        raise ProblemError("x lies outside the hard set Y")
    if oracle.m == 0:
        return 0.0
    return max(0.0, float(oracle.constraint_max(x)[0]) - gamma)


def near_optimal_membership(oracle: PopulationOracle, x, eps: float, gamma: float = 0.0) -> bool:
    """x in X_gamma and f(x) <= min over X_gamma of f + eps."""
    if eps < 0:
        raise ProblemError("eps must be nonnegative")
    x = np.atleast_1d(np.asarray(x, float))
    if gamma == 0.0:
        fmin = oracle.f_star
    else:
        fmin, _ = oracle.min_over(gamma)
    if feasibility_residual(oracle, x, gamma) > 0:
        return False
    return bool(oracle.objective(x)[0] <= fmin + eps)


def metric_regularity_estimate(oracle: PopulationOracle, probes) -> float:
    """max over infeasible probes of dist(x, X) / max_i [f_i(x)]_+ (a lower bound on c)."""
    P = _rows(probes)
    res = np.maximum(oracle.constraint_max(P), 0.0)
    mask = res > 1e-12
    if not mask.any():
        raise NoInformation("all probes are feasible")
    dist = oracle.dist(P[mask])
    return float(np.max(dist / res[mask]))


def slater_slack(oracle: PopulationOracle, xbar) -> float:
    """min_i [-f_i(xbar)]."""
    if oracle.m == 0:
        raise NoConstraints("slater slack needs at least one constraint")
    xbar = np.atleast_1d(np.asarray(xbar, float))
    if not oracle.program.hard_set.contains(xbar)[0]:
        raise ProblemError("xbar lies outside the hard set Y")
    return float(-oracle.constraint_max(xbar)[0])


def gap(oracle: PopulationOracle, gamma: float) -> float:
    """min over X_{-gamma} of f, minus f*."""
    if gamma <= 0:
        raise ProblemError("gap needs gamma > 0")
    try:
        v, _ = oracle.min_over(-gamma)
    except InfeasibleRelaxation as exc:
        raise InfeasibleRelaxation("interior-relaxation-infeasible") from exc
    return max(0.0, v - oracle.f_star)
