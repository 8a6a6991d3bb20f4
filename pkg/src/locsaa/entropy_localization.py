"""Metric entropy, the dyadic chaining functional A1, localized sets and variance proxies.

Localized sets are level sets ``{x in region : g(x) = level}`` of a convex
function inside a convex region (or plain sublevel sets). They are sampled by
bisection along rays from an anchor where ``g < level``: on each ray the region
is an interval and ``g`` crosses the level at most once, so in one dimension the
sample is the exact set and in two or three dimensions it is a dense boundary
sample.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import solver
from .problem_core import (MissingIngredient, PopulationOracle, ProblemError, StochasticProgram,
                           gap as gap_value)

GRID_CELL_CAP = 1_000_000
KINDS = ("X*0", "X*i", "XX*0", "XX*i", "XG*0", "XG*i", "X*eps")


class EmptyLocalizedSet(ProblemError):
    """A localized set without any accepted point."""


@dataclass(frozen=True, eq=False)
class SetSpec:
    """Localized set: membership oracle, bounding ball, anchor and sampled points.

    ``label`` is one of ``KINDS``: ``X*0``/``X*i`` are the active level sets of
    the objective/constraint i inside X, ``XX*`` the same inside the inflated
    set (X + c*gamma*B) cap Y, ``XG*`` the level sets shifted by gap(gamma), and
    ``X*eps`` the plain near-optimal set. ``points`` holds samples from the
    set; ``finite`` marks that they are the whole set.
    """

    label: str
    gamma: float
    member: Callable
    center: np.ndarray
    radius: float
    dimension: int
    anchor: np.ndarray | None = None
    points: np.ndarray | None = None
    finite: bool = False
    index: int = 0
    level: float | None = None
    level_fn: Callable | None = None
    region: Callable | None = None
    meta: dict = field(default_factory=dict)

    @property
    def diameter(self) -> float:
        return 2.0 * self.radius

    @property
    def empty(self) -> bool:
        return self.points is not None and len(self.points) == 0 and self.finite


def ball_spec(center, radius: float, label: str = "ball") -> SetSpec:
    """Closed Euclidean ball as a full-dimensional SetSpec."""
    c = np.atleast_1d(np.asarray(center, float))
    member = lambda X: np.linalg.norm(np.atleast_2d(X) - c, axis=1) <= radius * (1 + 1e-12)
    return SetSpec(label, 0.0, member, c, float(radius), c.size, anchor=c)


def box_spec(lo, hi, label: str = "box") -> SetSpec:
    lo = np.atleast_1d(np.asarray(lo, float))
    hi = np.atleast_1d(np.asarray(hi, float))
    c = (lo + hi) / 2
    member = lambda X: np.all((np.atleast_2d(X) >= lo - 1e-12) & (np.atleast_2d(X) <= hi + 1e-12), axis=1)
    return SetSpec(label, 0.0, member, c, float(np.linalg.norm(hi - lo) / 2), c.size, anchor=c)


def finite_spec(points, label: str = "points") -> SetSpec:
    """A finite point set (exact entropy at every scale)."""
    P = np.atleast_2d(np.asarray(points, float))
    center, radius = _enclosing_ball(P)
    member = lambda X: np.array([np.any(np.all(np.isclose(P, x, atol=1e-12), axis=1))
                                 for x in np.atleast_2d(X)], bool)
    return SetSpec(label, 0.0, member, center, radius, P.shape[1],
                   anchor=P[0] if len(P) else None, points=P, finite=True)


def _enclosing_ball(P: np.ndarray) -> tuple[np.ndarray, float]:
    if len(P) == 0:
        return np.zeros(P.shape[1] if P.ndim == 2 else 1), 0.0
    lo, hi = P.min(axis=0), P.max(axis=0)
    c = (lo + hi) / 2
    if P.shape[1] == 1:
        return c, float((hi - lo)[0] / 2)
    return c, float(np.max(np.linalg.norm(P - c, axis=1)))


# -- ray machinery ------------------------------------------------------------

def ray_directions(d: int, count: int) -> np.ndarray:
    """Deterministic unit directions: +-1 in 1-D, a uniform fan in 2-D, a Fibonacci sphere in 3-D."""
    if d == 1:
        return np.array([[-1.0], [1.0]])
    if d == 2:
        ang = np.linspace(0.0, 2 * np.pi, max(count, 8), endpoint=False)
        return np.stack([np.cos(ang), np.sin(ang)], axis=1)
    if d == 3:
        k = np.arange(count) + 0.5
        phi = np.arccos(1 - 2 * k / count)
        th = np.pi * (1 + 5 ** 0.5) * k
        return np.stack([np.cos(th) * np.sin(phi), np.sin(th) * np.sin(phi), np.cos(phi)], axis=1)
    rng = np.random.default_rng(12345)
    v = rng.standard_normal((count, d))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def ray_boundary(region, anchor, dirs, smax: float, iters: int = 64) -> np.ndarray:
    """Per direction, the largest step s in [0, smax] with anchor + s*u in the region."""
    anchor = np.asarray(anchor, float)
    lo = np.zeros(len(dirs))
    hi = np.full(len(dirs), float(smax))
    full = np.asarray(region(anchor + hi[:, None] * dirs), bool)
    lo[full] = hi[full]
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        ok = np.asarray(region(anchor + mid[:, None] * dirs), bool)
        lo = np.where(ok, mid, lo)
        hi = np.where(ok, hi, mid)
    return lo


def level_crossings(region, g, level: float, anchor, dirs, smax: float, iters: int = 64,
                    tol: float = 0.0) -> np.ndarray:
    """Points of {x in region : g(x) = level} met by rays from an anchor with g(anchor) < level.

    A ray whose region exit has g within ``tol`` of the level counts as
    reaching it: when the level set lies on the region's boundary the exit
    point found by bisection sits just inside, below the level.
    """
    anchor = np.asarray(anchor, float)
    s_r = ray_boundary(region, anchor, dirs, smax, iters)
    ends = anchor + s_r[:, None] * dirs
    reach = np.asarray(g(ends)) >= level - tol
    if not reach.any():
        return np.empty((0, anchor.size))
    return bisect_level(g, level, anchor, dirs[reach], s_r[reach], iters)


def bisect_level(g, level: float, anchor, dirs, s_r, iters: int = 64) -> np.ndarray:
    """Per ray, the point in [0, s_r] closest to where g reaches ``level``."""
    anchor = np.asarray(anchor, float)
    lo = np.zeros(len(dirs))
    hi = np.asarray(s_r, float).copy()
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        above = np.asarray(g(anchor + mid[:, None] * dirs)) >= level
        lo = np.where(above, lo, mid)
        hi = np.where(above, mid, hi)
    p_lo = anchor + lo[:, None] * dirs
    p_hi = anchor + hi[:, None] * dirs
    g_lo, g_hi = np.asarray(g(p_lo)), np.asarray(g(p_hi))
    # the upper endpoint stays inside the region (it never exceeds s_r)
    pick = np.abs(g_hi - level) <= np.abs(g_lo - level)
    return np.where(pick[:, None], p_hi, p_lo)


def sublevel_boundary(region, anchor, dirs, smax: float, iters: int = 64) -> np.ndarray:
    """Boundary points of a convex region along rays from an interior anchor."""
    s_r = ray_boundary(region, anchor, dirs, smax, iters)
    return np.asarray(anchor, float) + s_r[:, None] * dirs


def find_anchor(region, g, hard, hints=(), mesh: float | None = None):
    """A region point with small g: best of the hints, a coarse grid, then a convex refinement."""
    d = hard.dimension
    cands = [np.atleast_1d(np.asarray(h, float)) for h in hints if h is not None]
    best, best_v = None, math.inf
    if cands:
        C = np.stack(cands)
        ok = np.asarray(region(C), bool)
        if ok.any():
            v = np.asarray(g(C))
            v = np.where(ok, v, np.inf)
            k = int(np.argmin(v))
            best, best_v = C[k], float(v[k])
    if d <= 3:
        lo, hi = hard.bounding_box
        step = mesh or float((hi - lo).max()) / (400 if d == 1 else 40 if d == 2 else 12)
        try:
            val, x = solver.minimize_convex(g, lambda X: np.asarray(region(X), bool), (lo, hi), step,
                                            zoom=3)
            if val < best_v:
                best, best_v = x, val
        except solver.NoFeasiblePoint:
            pass
    return best, best_v


# -- localized set construction ----------------------------------------------

def sample_level_set(region, g, level, hard, hints, budget: int, eta: float):
    """Sample {x in region : |g(x) - level| <= eta}.

    Returns (points, anchor, finite); ``finite`` is True in one dimension where
    the two ray crossings are the whole set.
    """
    d = hard.dimension
    anchor, g_anchor = find_anchor(region, g, hard, hints)
    if anchor is None:
        return np.empty((0, d)), None, True
    if g_anchor >= level - eta:
        if abs(g_anchor - level) <= eta:
            return anchor[None, :], anchor, d == 1
        return np.empty((0, d)), anchor, True
    dirs = ray_directions(d, budget)
    pts = level_crossings(region, g, level, anchor, dirs, hard.farthest_distance(anchor), tol=eta)
    if d == 1 and len(pts) == 2 and np.allclose(pts[0], pts[1], rtol=0, atol=1e-14):
        pts = pts[:1]
    return pts, anchor, d == 1


def level_set_spec(label, gamma, region, g, level, hard, hints=(), budget=1024, eta=1e-6,
                   index=0) -> SetSpec:
    """SetSpec for {x in region : g(x) = level} bounded by Y's ball (exact in 1-D)."""
    pts, anchor, finite = sample_level_set(region, g, level, hard, hints, budget, eta)
    member = lambda X: np.asarray(region(X), bool) & (np.abs(np.asarray(g(X)) - level) <= eta)
    if hard.dimension == 1:
        center, rad = _enclosing_ball(pts)
    else:
        center, rad = hard.bounding_ball
    return SetSpec(label, float(gamma), member, np.asarray(center, float), float(rad),
                   hard.dimension, anchor=anchor, points=pts, finite=finite, index=index,
                   level=level, level_fn=g, region=region, meta={"budget": budget})


def localized_set_spec(oracle: PopulationOracle, program: StochasticProgram, kind: str,
                       i: int = 0, gamma: float = 0.0, budget: int = 1024,
                       strong_convexity: float | None = None, regularity: float | None = None,
                       gap_gamma: float | None = None, hints=()) -> SetSpec:
    """Build the SetSpec for one of the localized sets.

    ``regularity`` overrides the oracle's metric-regularity constant for the
    inflated (``XX*``) kinds; ``gap_gamma`` overrides gap(gamma) for ``XG*``.
    """
    if kind not in KINDS:
        raise ProblemError(f"unknown localized set kind {kind!r}")
    hard = program.hard_set
    d = program.dimension
    eta = oracle.eta
    fstar = oracle.f_star
    f = oracle.objective
    mu = program.strong_convexity if strong_convexity is None else strong_convexity
    if kind.endswith("i") and not 1 <= i <= program.m:
        raise ProblemError(f"constraint index {i} out of range")

    if kind.startswith("XX"):
        c = oracle.regularity if regularity is None else regularity
        if c is None:
            raise MissingIngredient("metric-regularity constant is required for inflated sets")
        if oracle.projector is None:
            raise MissingIngredient("projection oracle is required for inflated sets")
        radius = c * gamma
        base_region = lambda X: hard.contains(X) & (oracle.dist(X) <= radius + 1e-12)
    else:
        base_region = lambda X: oracle.feasible(X)

    shift = 0.0
    if kind.startswith("XG"):
        shift = gap_value(oracle, gamma) if gap_gamma is None else gap_gamma
    top = fstar + gamma + shift

    if kind in ("X*0", "XX*0", "XG*0"):
        region, g, level = base_region, f, top
    elif kind == "X*eps":
        region, g, level = (lambda X: base_region(X) & (f(X) <= top)), None, top
    else:
        region = lambda X: base_region(X) & (f(X) <= top)
        g = lambda X: oracle.value(i, X)
        level = gamma if kind == "XX*i" else 0.0

    if g is None:
        anchor = oracle.x_star
        dirs = ray_directions(d, budget)
        pts = sublevel_boundary(region, anchor, dirs, hard.farthest_distance(anchor))
        pts = np.vstack([anchor[None, :], pts])
        member = region
        finite = False
    else:
        pts, anchor, finite = sample_level_set(region, g, level, hard, [oracle.x_star, *hints],
                                               budget, eta)
        member = lambda X: np.asarray(region(X), bool) & (np.abs(np.asarray(g(X)) - level) <= eta)
    # bounding ball
    if d == 1:
        center, rad = _enclosing_ball(pts)
    else:
        center, rad = hard.bounding_ball
        if mu and kind[:2] in ("X*", "XG"):
            r_sc = math.sqrt(2 * max(top - fstar, 0.0) / mu)
            if r_sc < rad:
                center, rad = oracle.x_star, r_sc
    return SetSpec(kind, float(gamma), member, np.asarray(center, float), float(rad), d,
                   anchor=None if anchor is None else np.asarray(anchor, float),
                   points=pts, finite=finite, index=i, level=level, level_fn=g, region=region,
                   meta={"shift": shift, "budget": budget})


# -- entropy ------------------------------------------------------------------

def _volumetric(d: int, D: float, theta: float) -> float:
    return d * math.log1p(2 * D / theta)


def _greedy_points(P: np.ndarray, theta: float) -> int:
    kept = []
    for p in P:
        if not kept or np.min(np.linalg.norm(np.asarray(kept) - p, axis=1)) > theta:
            kept.append(p)
    return len(kept)


def _greedy_grid(spec: SetSpec, theta: float) -> int | None:
    d = spec.dimension
    lo = spec.center - spec.radius
    hi = spec.center + spec.radius
    pitch = theta / 10
    counts = [max(2, int(math.ceil((h - l) / pitch - 1e-12)) + 1) for l, h in zip(lo, hi)]
    if math.prod(counts) > GRID_CELL_CAP:
        return None
    axes = [np.linspace(l, h, c) for l, h, c in zip(lo, hi, counts)]
    steps = np.array([(h - l) / (c - 1) for l, h, c in zip(lo, hi, counts)])
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    inside = np.linalg.norm(pts - spec.center, axis=1) <= spec.radius * (1 + 1e-12)
    avail = np.zeros(len(pts), bool)
    if inside.any():
        avail[inside] = np.asarray(spec.member(pts[inside]), bool)
    if not avail.any():
        return 0
    # offsets of cells within distance theta of a kept cell
    r = [int(math.ceil(theta / s)) + 1 for s in steps]
    grids = np.meshgrid(*[np.arange(-k, k + 1) for k in r], indexing="ij")
    offs = np.stack([g.ravel() for g in grids], axis=1)
    offs = offs[np.sqrt(((offs * steps) ** 2).sum(axis=1)) <= theta]
    shape = np.array(counts)
    pos, count = 0, 0
    total = len(avail)
    while pos < total:
        nxt = int(np.argmax(avail[pos:]))
        idx = pos + nxt
        if not avail[idx]:
            break
        count += 1
        coord = np.array(np.unravel_index(idx, counts))
        nb = coord + offs
        ok = np.all((nb >= 0) & (nb < shape), axis=1)
        avail[np.ravel_multi_index(nb[ok].T, counts)] = False
        pos = idx + 1
    return count


def _entropy(spec: SetSpec, theta: float, method: str) -> tuple[float, bool]:
    """(value, exact) where exact is False when exact-greedy fell back to the volumetric bound."""
    D = spec.diameter
    if method == "volumetric-bound":
        return (0.0 if D == 0 else _volumetric(spec.dimension, D, theta)), True
    if method != "exact-greedy":
        raise ValueError(f"unknown entropy method {method!r}")
    if spec.dimension > 3:
        raise ValueError("exact-greedy entropy is limited to d <= 3")
    if spec.points is not None and (spec.finite or spec.level_fn is not None):
        P = spec.points
        if len(P) == 0:
            raise EmptyLocalizedSet("entropy of an empty set")
        if not spec.finite:
            spacing = _pool_spacing(P)
            if theta < 2 * spacing:
                return _volumetric(spec.dimension, D, theta), False
        return math.log(_greedy_points(P, theta)), True
    n = _greedy_grid(spec, theta)
    if n is None:
        return _volumetric(spec.dimension, D, theta), False
    if n == 0:
        raise EmptyLocalizedSet("entropy of an empty set")
    return math.log(n), True


def _pool_spacing(P: np.ndarray) -> float:
    if len(P) < 2:
        return 0.0
    # consecutive samples along the ray fan
    steps = np.linalg.norm(np.diff(np.vstack([P, P[:1]]), axis=0), axis=1)
    return float(np.max(steps))


def packing_entropy(spec: SetSpec, theta: float, method: str = "volumetric-bound") -> float:
    """ln of the theta-packing number (pairwise distances > theta) or its volumetric bound."""
    if theta <= 0:
        raise ValueError("theta must be positive")
    return _entropy(spec, theta, method)[0]


@dataclass(frozen=True)
class A1Result:
    value: float
    terms: int
    remainder_bound: float
    method: str
    fallback_scales: int = 0
    empty: bool = False

    def __float__(self):
        return self.value


def a1_functional(spec: SetSpec, method: str = "volumetric-bound", tol: float = 1e-9,
                  max_terms: int = 2000) -> A1Result:
    """sum_{i>=1} (3D/2^i)(B_i + 1), B_i = sqrt(H(D/2^i) + H(D/2^(i-1)) + ln(i(i+1))).

    Summation stops at the first K where the geometric tail majorant
    4 * (3D/2^K)(sqrt(2d(K+2)) + sqrt(2 ln(K+1)) + 1) drops below tol times the
    partial sum.
    """
    if not 0 < tol <= 1e-3:
        raise ValueError("tolerance must lie in (0, 1e-3]")
    D = spec.diameter
    d = spec.dimension
    if D == 0:
        return A1Result(0.0, 0, 0.0, method)
    try:
        h_prev, ok = _entropy(spec, D, method)
    except EmptyLocalizedSet:
        return A1Result(0.0, 0, 0.0, method, empty=True)
    fallbacks = int(not ok)
    total = 0.0
    tail = math.inf
    for i in range(1, max_terms + 1):
        h_cur, ok = _entropy(spec, D / 2 ** i, method)
        fallbacks += int(not ok)
        b = math.sqrt(h_cur + h_prev + math.log(i * (i + 1)))
        total += 3 * D / 2 ** i * (b + 1)
        tail = 4 * 3 * D / 2 ** i * (math.sqrt(2 * d * (i + 2)) + math.sqrt(2 * math.log(i + 1)) + 1)
        if tail <= tol * total:
            return A1Result(total, i, tail, method, fallbacks)
        h_prev = h_cur
    raise AssertionError("A1 tail majorant did not converge")


def a1_direct_sum(D: float, d: int, terms: int) -> float:
    """Plain partial sum of the volumetric A1 series (independent oracle)."""
    i = np.arange(1, terms + 1, dtype=float)
    h = lambda k: d * np.logaddexp(0.0, (k + 1) * math.log(2.0))   # d ln(1 + 2^(k+1))
    b = np.sqrt(h(i) + h(i - 1) + np.log(i) + np.log1p(i))
    return float(np.sum(np.ldexp(3.0 * D, -i.astype(int)) * (b + 1)))


# -- variance proxies ---------------------------------------------------------

@dataclass(frozen=True)
class VarianceProxyReport:
    sigma2: np.ndarray          # sigma_i^2(x), i = 0..m
    sigma_hat2: np.ndarray      # sigma-hat_i^2(x)
    v0_sq: float                # v_0^2(y, x)
    vI_sq: float                # v_I^2(x)
    sigma0_hat: float           # A1(Z) sqrt(Lhat_0^2 + L_0^2)
    sigmaI_hat: float           # sup_i A1(set_i) sqrt(Lhat_i^2 + L_i^2)
    L_sq: np.ndarray            # L_i^2 = P Lip_i^2
    L_hat_sq: np.ndarray        # P-hat Lip_i^2
    a1_values: tuple = ()


def pointwise_variances(program: StochasticProgram, sample, x) -> tuple[np.ndarray, np.ndarray]:
    """(sigma_i^2(x), sigma-hat_i^2(x)) for every loss index; sigma-hat centres at f_i(x)."""
    x = np.atleast_1d(np.asarray(x, float))
    pop = np.array([program.variance(i, x)[0] for i in range(program.m + 1)])
    emp = np.array([np.mean((program.scenario_values(i, x, sample.scenarios)[0]
                             - program.losses[i].base(x)[0]) ** 2) for i in range(program.m + 1)])
    return pop, emp


def v_I(program, sample, x) -> float:
    """sqrt(sup_i (sigma-hat_i^2 + sigma_i^2)) over constraints."""
    if program.m == 0:
        return 0.0
    pop, emp = pointwise_variances(program, sample, x)
    return math.sqrt(float(np.max(pop[1:] + emp[1:])))


def v_0(program, sample, y, x) -> float:
    y = np.atleast_1d(np.asarray(y, float))
    x = np.atleast_1d(np.asarray(x, float))
    diff = (program.scenario_values(0, y, sample.scenarios)[0]
            - program.scenario_values(0, x, sample.scenarios)[0]
            - (program.losses[0].base(y)[0] - program.losses[0].base(x)[0]))
    return math.sqrt(program.difference_variance(0, y, x) + float(np.mean(diff ** 2)))


def lipschitz_moduli(program, sample) -> tuple[np.ndarray, np.ndarray]:
    """(L_i^2, Lhat_i^2) for the envelope of each loss."""
    L = np.array([program.envelope_moment(i, 2) for i in range(program.m + 1)])
    Lh = np.array([np.mean(program.lipschitz_envelope(i, sample.scenarios) ** 2)
                   for i in range(program.m + 1)])
    return L, Lh


def variance_proxies(program, sample, oracle, x, y, sets, gamma: float = 0.0,
                     method: str = "volumetric-bound", tol: float = 1e-9) -> VarianceProxyReport:
    """All variance-type quantities at (x, y) with A1 evaluated on ``sets``.

    ``sets[0]`` localizes the objective; ``sets[1:]`` the constraints in order.
    """
    if program.m >= 1 and len(sets) < program.m + 1:
        raise ProblemError("one set per constraint is required for the constraint proxy")
    pop, emp = pointwise_variances(program, sample, x)
    L, Lh = lipschitz_moduli(program, sample)
    a1s = tuple(a1_functional(s, method, tol).value for s in sets)
    s0 = a1s[0] * math.sqrt(Lh[0] + L[0]) if a1s else 0.0
    sI = max((a1s[i] * math.sqrt(Lh[i] + L[i]) for i in range(1, program.m + 1)), default=0.0)
    vI = float(np.max(pop[1:] + emp[1:])) if program.m else 0.0
    return VarianceProxyReport(pop, emp, v_0(program, sample, y, x) ** 2, vI, s0, sI, L, Lh, a1s)


def sufficient_sample_size(q: float, rho: float, eps: float, L0_sq: float, centered_qnorm: float,
                           a1: float, c_q: float | None = None) -> int:
    """ceil(max{(3/rho)^(1/(q-1)), 4 C_q (1 + ln(3/rho)) / eps^2}),
    C_q = [L0^2 + c_q ||Lip0^2 - L0^2||_q] A1^2 with c_q = 2q by default."""
    return sample_size_branches(q, rho, eps, L0_sq, centered_qnorm, a1, c_q)[0]


def sample_size_branches(q, rho, eps, L0_sq, centered_qnorm, a1, c_q=None):
    """(N, branch one, branch two)."""
    if not q > 1:
        raise ValueError("q must exceed 1")
    if not 0 < rho <= 1:
        raise ValueError("rho must lie in (0, 1]")
    if not eps > 0:
        raise ValueError("eps must be positive")
    cq = 2 * q if c_q is None else c_q
    Cq = (L0_sq + cq * centered_qnorm) * a1 ** 2
    b1 = (3 / rho) ** (1 / (q - 1))
    b2 = 4 * Cq * (1 + math.log(3 / rho)) / eps ** 2
    return int(math.ceil(max(b1, b2))), b1, b2


def envelope_centered_norm(program: StochasticProgram, i: int, q: float,
                           control_draws: int = 200_000, seed: int = 0) -> tuple[float, bool]:
    """||Lip_i^2 - L_i^2||_q; exact for q = 2, otherwise a control-sample estimate (flag False)."""
    if q == 2:
        m2 = program.envelope_moment(i, 2)
        m4 = program.envelope_moment(i, 4)
        return math.sqrt(max(m4 - m2 * m2, 0.0)), True
    from . import streams
    rng = streams.stream(seed, streams.CONTROL, i)
    scen = program.draw(rng, control_draws)
    env2 = program.lipschitz_envelope(i, scen) ** 2
    return float(np.mean(np.abs(env2 - program.envelope_moment(i, 2)) ** q) ** (1 / q)), False
