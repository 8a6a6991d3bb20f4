"""Solvers for the empirical and exact programs.

* ``brute_force_min`` scans a grid (d <= 3) and is the independent oracle for
  everything else.
* ``minimize_convex`` refines a grid minimum by zooming (exact interval
  search in one dimension).
* ``solve_saa`` is a switching subgradient method for the SAA program.
* ``project_weighted_l1`` / ``linear_min_weighted_l1`` / ``solve_lasso``
  handle the weighted l1 ball used by the LASSO experiment.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

MAX_GRID_POINTS = 4_000_000


class SolverError(RuntimeError):
    pass


class NoFeasiblePoint(SolverError):
    pass


@dataclass
class SolveResult:
    x: np.ndarray
    value: float
    residual: float
    certificate: float
    iterations: int
    converged: bool
    info: dict = field(default_factory=dict)


@dataclass
class GridMin:
    value: float
    argmins: np.ndarray
    error_bound: float
    mesh: float
    scanned: int


def grid_points(lo, hi, mesh: float) -> np.ndarray:
    """Tensor grid over the box [lo, hi] with pitch at most ``mesh`` (endpoints included)."""
    lo = np.atleast_1d(np.asarray(lo, float))
    hi = np.atleast_1d(np.asarray(hi, float))
    counts = [max(2, int(math.ceil((h - l) / mesh - 1e-12)) + 1) for l, h in zip(lo, hi)]
    if math.prod(counts) > MAX_GRID_POINTS:
        raise SolverError(f"grid with {math.prod(counts)} points exceeds the cap")
    axes = [np.linspace(l, h, c) for l, h, c in zip(lo, hi, counts)]
    mesh_grid = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.ravel() for g in mesh_grid], axis=1)


def brute_force_min(objective, member, box, mesh: float, lipschitz: float | None = None,
                    eta: float | None = None) -> GridMin:
    """Exhaustive grid scan of ``objective`` over grid points accepted by ``member``.

    ``objective`` and ``member`` take an array of points with shape (k, d).
    Returns the minimum, all grid argmins within ``eta`` of it, and the error
    bound ``lipschitz * mesh * sqrt(d)`` (infinite when no Lipschitz constant is
    given).
    """
    lo, hi = box
    lo = np.atleast_1d(np.asarray(lo, float))
    if lo.size > 3:
        raise SolverError("brute force is limited to d <= 3")
    if mesh <= 0:
        raise ValueError("mesh must be positive")
    pts = grid_points(lo, hi, mesh)
    ok = np.asarray(member(pts), bool)
    if not ok.any():
        raise NoFeasiblePoint("no feasible grid point")
    pts = pts[ok]
    vals = np.asarray(objective(pts), float)
    best = float(vals.min())
    if eta is None:
        eta = 1e-6 * max(1.0, abs(best))
    err = math.inf if lipschitz is None else lipschitz * mesh * math.sqrt(lo.size)
    return GridMin(best, pts[vals <= best + eta], err, mesh, int(ok.sum()))


def _bisect_boundary(member, inside, direction, smax, iters=80):
    """Largest s in [0, smax] with inside + s*direction accepted (convex set)."""
    a, b = 0.0, smax
    if member((inside + b * direction)[None, :])[0]:
        return b
    for _ in range(iters):
        c = 0.5 * (a + b)
        if member((inside + c * direction)[None, :])[0]:
            a = c
        else:
            b = c
    return a


def minimize_convex(objective, member, box, mesh: float = 0.02, zoom: int = 5,
                    violation=None, hard=None) -> tuple[float, np.ndarray]:
    """Minimize a convex function over a convex set inside ``box``.

    One dimension: the feasible interval is found by bisection and a bounded
    Brent search runs on it. Two dimensions with a hard set given: the set is
    ``hard`` intersected with ``{violation <= 0}`` and the exact slice method
    of ``slice_minimize`` is used. Otherwise: grid scan followed by ``zoom``
    rounds of local refinement (pitch /10 each round).
    """
    lo, hi = (np.atleast_1d(np.asarray(v, float)) for v in box)
    d = lo.size
    if d == 2 and hard is not None:
        return slice_minimize(objective, hard, violation)
    coarse = brute_force_min(objective, member, (lo, hi), mesh)
    x0 = coarse.argmins[0]
    if d == 1:
        width = float(hi[0] - lo[0])
        left = x0[0] - _bisect_boundary(member, x0, np.array([-1.0]), x0[0] - lo[0])
        right = x0[0] + _bisect_boundary(member, x0, np.array([1.0]), hi[0] - x0[0])
        f = lambda s: float(objective(np.array([[s]]))[0])
        cands = [left, right, x0[0]]
        if right - left > 1e-14 * max(1.0, width):
            res = optimize.minimize_scalar(f, bounds=(left, right), method="bounded",
                                           options={"xatol": 1e-13 * max(1.0, width)})
            cands.append(float(res.x))
        vals = [f(c) for c in cands]
        k = int(np.argmin(vals))
        return vals[k], np.array([cands[k]])
    best_x, best_v = x0, coarse.value
    h = mesh
    for _ in range(zoom):
        sub_lo = np.maximum(lo, best_x - 2 * h)
        sub_hi = np.minimum(hi, best_x + 2 * h)
        h = h / 10
        try:
            fine = brute_force_min(objective, member, (sub_lo, sub_hi), h)
        except NoFeasiblePoint:
            break
        if fine.value <= best_v:
            best_v, best_x = fine.value, fine.argmins[0]
    return float(best_v), best_x


def golden_section(fun, lo, hi, iters: int = 60):
    """Row-wise golden-section search of a convex function on [lo, hi].

    ``fun`` maps an array of abscissae to values. Returns (argmin, min); the
    interval endpoints are among the candidates so boundary minima are exact.
    """
    a, b = np.array(lo, float), np.array(hi, float)
    r = 0.6180339887498949
    c, e = b - r * (b - a), a + r * (b - a)
    fc, fe = fun(c), fun(e)
    for _ in range(iters):
        left = fc <= fe
        b = np.where(left, e, b)
        a = np.where(left, a, c)
        nc = np.where(left, b - r * (b - a), e)
        ne = np.where(left, c, a + r * (b - a))
        fn = fun(np.where(left, nc, ne))
        fc, fe = np.where(left, fn, fe), np.where(left, fc, fn)
        c, e = nc, ne
    cands = np.stack([c, e, np.asarray(lo, float), np.asarray(hi, float)])
    vals = np.stack([fc, fe, fun(cands[2]), fun(cands[3])])
    k = np.argmin(vals, axis=0)
    idx = np.arange(cands.shape[1])
    return cands[k, idx], vals[k, idx]


def _bisect_level(fun, inside, outside, iters: int = 60):
    """Row-wise bisection between points with fun <= 0 (inside) and fun > 0."""
    a, b = np.array(inside, float), np.array(outside, float)
    for _ in range(iters):
        mid = 0.5 * (a + b)
        ok = fun(mid) <= 0
        a = np.where(ok, mid, a)
        b = np.where(ok, b, mid)
    return a


def _hard_slices(hard, x1):
    """x2-range of the line {x1 = const} inside a box or ball (nan when missed)."""
    c, r = hard.center, hard.radius
    if hard.kind == "box":
        ok = np.abs(x1 - c[0]) <= r
        lo = np.full_like(x1, c[1] - r)
        hi = np.full_like(x1, c[1] + r)
    else:
        h2 = r * r - (x1 - c[0]) ** 2
        ok = h2 >= 0
        h = np.sqrt(np.maximum(h2, 0.0))
        lo, hi = c[1] - h, c[1] + h
    return np.where(ok, lo, np.nan), np.where(ok, hi, np.nan)


def _line_solve(objective, violation, hard, x1):
    lo, hi = _hard_slices(hard, x1)
    valid = ~np.isnan(lo)
    lo, hi = np.where(valid, lo, 0.0), np.where(valid, hi, 0.0)
    pts = lambda t: np.stack([x1, t], axis=1)
    if violation is None:
        left, right = lo, hi
        psi = np.where(valid, 0.0, np.inf)
    else:
        v = lambda t: np.asarray(violation(pts(t)), float)
        t0, psi = golden_section(v, lo, hi)
        psi = np.where(valid, psi, np.inf)
        left = np.where(v(lo) <= 0, lo, _bisect_level(v, t0, lo))
        right = np.where(v(hi) <= 0, hi, _bisect_level(v, t0, hi))
    feas = psi <= 0
    t, phi = golden_section(lambda t: np.asarray(objective(pts(t)), float), left, right)
    return np.where(feas, phi, np.inf), t, psi


def slice_minimize(objective, hard, violation=None, lines: int = 33, rtol: float = 1e-12):
    """Minimize a convex function over a 2-D hard set cut by ``{violation <= 0}``.

    phi(x1) = min over the slice {x1 = const} is convex in x1 (infinite where
    the slice is infeasible) and so is psi(x1) = min of the violation on the
    slice. Each slice is solved by golden-section and bisection; the x1 window
    shrinks to the bracket of the best grid line, which contains a minimizer by
    convexity (of phi once a feasible line is seen, of psi before).
    """
    lo1 = hard.center[0] - hard.radius
    hi1 = hard.center[0] + hard.radius
    a, b = lo1, hi1
    best_v, best_x = math.inf, None
    while True:
        x1 = np.linspace(a, b, lines)
        phi, t, psi = _line_solve(objective, violation, hard, x1)
        if np.isfinite(phi).any():
            k = int(np.argmin(phi))
            if phi[k] < best_v:
                best_v, best_x = float(phi[k]), np.array([x1[k], t[k]])
        else:
            k = int(np.argmin(psi))
        h = (b - a) / (lines - 1)
        a, b = max(lo1, x1[k] - h), min(hi1, x1[k] + h)
        if b - a <= rtol * (hi1 - lo1):
            break
    if best_x is None:
        raise NoFeasiblePoint("no feasible slice")
    return best_v, best_x


# -- weighted l1 ball ---------------------------------------------------------

def project_weighted_l1(point, weights, radius: float) -> np.ndarray:
    """Euclidean projection onto {x : sum_l w_l |x_l| <= radius}.

    Soft-thresholding x_l = sign(v_l) max(|v_l| - lam*w_l, 0) with the
    multiplier lam located by a scan over the sorted breakpoints |v_l|/w_l.
    """
    v = np.asarray(point, float)
    w = np.asarray(weights, float)
    if np.any(w <= 0) or radius <= 0:
        raise ValueError("weights and radius must be positive")
    a = np.abs(v)
    if float(w @ a) <= radius:
        return v.copy()
    ratio = a / w
    order = np.argsort(-ratio, kind="stable")
    wa = np.cumsum((w * a)[order])
    ww = np.cumsum((w * w)[order])
    lam_k = (wa - radius) / ww
    r_sorted = ratio[order]
    nxt = np.append(r_sorted[1:], 0.0)
    valid = (lam_k < r_sorted) & (lam_k >= nxt)
    k = int(np.argmax(valid)) if valid.any() else len(v) - 1
    lam = max(float(lam_k[k]), 0.0)
    return np.sign(v) * np.maximum(a - lam * w, 0.0)


def linear_min_weighted_l1(gradient, weights, radius: float) -> np.ndarray:
    """Vertex of the weighted l1 ball minimizing <gradient, v>; lowest index wins ties."""
    g = np.asarray(gradient, float)
    w = np.asarray(weights, float)
    out = np.zeros_like(g)
    scores = np.abs(g) / w
    j = int(np.argmax(scores))
    if scores[j] == 0:
        return out
    out[j] = -radius * np.sign(g[j]) / w[j]
    return out


def frank_wolfe_quadratic(Q, b, const: float, weights, radius: float, tol: float = 1e-9,
                          budget: int = 100_000) -> SolveResult:
    """Minimize x'Qx - 2b'x + const over the weighted l1 ball.

    Pairwise Frank-Wolfe: the iterate is kept as a convex combination of the
    2d ball vertices; each step moves weight from the worst active vertex to
    the LMO vertex with an exact line search. Feasible by construction.
    """
    Q = np.asarray(Q, float)
    b = np.asarray(b, float)
    w = np.asarray(weights, float)
    d = b.size
    scale = radius / w                      # vertex magnitudes
    # weights over vertices: [+e_0..+e_{d-1}, -e_0..-e_{d-1}]
    alpha = np.zeros(2 * d)
    g0 = -2 * b
    j0 = int(np.argmax(np.abs(g0) / w))
    alpha[j0 if g0[j0] <= 0 else d + j0] = 1.0
    x = scale * (alpha[:d] - alpha[d:])
    Qx = Q @ x
    gap = math.inf
    it = 0
    for it in range(1, budget + 1):
        grad = 2 * (Qx - b)
        lin = np.concatenate([grad * scale, -grad * scale])   # <grad, vertex>
        s = int(np.argmin(lin))
        gap = float(grad @ x - lin[s])
        if gap <= tol:
            break
        active = np.flatnonzero(alpha > 0)
        a = int(active[np.argmax(lin[active])])
        if a == s:
            break
        js, ja = s % d, a % d
        ds = scale[js] * (1 if s < d else -1)
        da = scale[ja] * (1 if a < d else -1)
        # direction = vertex_s - vertex_a
        dirv_dot_grad = lin[s] - lin[a]
        Qdir = Q[:, js] * ds - Q[:, ja] * da
        curv = Qdir[js] * ds - Qdir[ja] * da
        gmax = alpha[a]
        step = gmax if curv <= 0 else min(gmax, -dirv_dot_grad / (2 * curv))
        if step <= 0:
            break
        alpha[s] += step
        alpha[a] -= step
        if alpha[a] < 1e-15:
            alpha[a] = 0.0
        x = scale * (alpha[:d] - alpha[d:])
        Qx = Qx + step * Qdir
        if it % 200 == 0:
            Qx = Q @ x                       # limit drift of the running product
    value = float(x @ Q @ x - 2 * b @ x + const)
    return SolveResult(x, value, max(0.0, float(w @ np.abs(x)) - radius), gap, it,
                       gap <= tol)


def solve_lasso(dataset, weights, radius: float, tol: float = 1e-9, budget: int = 100_000) -> SolveResult:
    """Least squares over {sum_l w_l |x_l| <= radius} via Frank-Wolfe."""
    X = np.asarray(dataset.design, float)
    y = np.asarray(dataset.response, float)
    n = X.shape[0]
    Q = X.T @ X / n
    b = X.T @ y / n
    return frank_wolfe_quadratic(Q, b, float(y @ y) / n, weights, radius, tol, budget)


# -- switching subgradient for the SAA program --------------------------------

def solve_saa(program, sample, tol_opt: float = 1e-3, tol_feas: float = 1e-6,
              budget: int = 200_000, lower_bound: float | None = None,
              grid_mesh: float = 0.01, x0=None) -> SolveResult:
    """Switching subgradient method for min F0 s.t. F_i <= relaxation over Y.

    If the current point violates a constraint by more than ``tol_feas`` the
    step follows that constraint's subgradient (Polyak step, the target level
    is known), otherwise the objective's. Objective steps are Polyak steps when
    a lower bound is available and D/(L sqrt(k+1)) otherwise. The returned
    point is the better of the step-weighted average of productive iterates and
    the best productive iterate. For d <= 3 the lower bound defaults to a grid
    scan minus its Lipschitz error bound.
    """
    hard = program.hard_set
    d, m = program.dimension, program.m
    eps = program.relaxation
    lips = [float(np.mean(program.lipschitz_envelope(i, sample.scenarios))) for i in range(m + 1)]
    diam = hard.diameter

    def resid(x):
        if m == 0:
            return 0.0
        vals = [program.empirical(i, x[None, :], sample)[0] - eps for i in range(1, m + 1)]
        return max(0.0, max(vals))

    if lower_bound is None and d <= 3:
        member = lambda P: hard.contains(P) & _emp_feasible(program, sample, P, tol_feas)
        try:
            gm = brute_force_min(lambda P: program.empirical(0, P, sample), member,
                                 hard.bounding_box, grid_mesh, lipschitz=lips[0])
            lower_bound = gm.value - gm.error_bound
        except NoFeasiblePoint:
            lower_bound = None
    x = hard.center.copy() if x0 is None else np.asarray(x0, float).copy()
    avg = np.zeros(d)
    wsum = 0.0
    best_x, best_v = None, math.inf
    it = 0
    stationary = False
    f0 = lambda z: float(program.empirical(0, z[None, :], sample)[0])
    for it in range(1, budget + 1):
        viol_i, viol = 0, 0.0
        for i in range(1, m + 1):
            v = float(program.empirical(i, x[None, :], sample)[0]) - eps
            if v > viol:
                viol_i, viol = i, v
        if viol > tol_feas:
            g = program.empirical_subgradient(viol_i, x, sample)
            gn = float(g @ g)
            if gn == 0:
                break
            x = hard.project(x - (viol + tol_feas / 2) / gn * g)
            continue
        val = f0(x)
        if val < best_v:
            best_v, best_x = val, x.copy()
        g = program.empirical_subgradient(0, x, sample)
        gn2 = float(g @ g)
        if gn2 == 0:
            break
        if lower_bound is not None:
            step = max(val - lower_bound, 0.0) / gn2
            if step == 0:
                break
        else:
            step = diam / (math.sqrt(gn2) * math.sqrt(it))
        avg += step * x
        wsum += step
        if lower_bound is not None and it % 50 == 0 and best_v - lower_bound <= tol_opt:
            break
        x_new = hard.project(x - step * g)
        if np.array_equal(x_new, x):
            # a projected subgradient step that goes nowhere: -g is normal to Y at a feasible x
            stationary = True
            best_x, best_v = x.copy(), val
            break
        x = x_new
    cands = []
    if best_x is not None:
        cands.append(best_x)
    if wsum > 0:
        cands.append(avg / wsum)
    if not cands:
        return SolveResult(x, f0(x), resid(x), math.inf, it, False)
    scored = [(f0(c) if resid(c) <= tol_feas else math.inf, k) for k, c in enumerate(cands)]
    _, k = min(scored)
    xh = cands[k]
    value, r = f0(xh), resid(xh)
    cert = math.inf if lower_bound is None else max(0.0, value - lower_bound)
    if stationary and k == 0:
        cert = 0.0
    return SolveResult(xh, value, r, cert, it, cert <= tol_opt and r <= tol_feas,
                       {"lower_bound": lower_bound})


def _emp_feasible(program, sample, P, tol=0.0):
    ok = np.ones(len(P), bool)
    for i in range(1, program.m + 1):
        ok &= program.empirical(i, P, sample) <= program.relaxation + tol
    return ok
