"""Heavy-tailed LASSO persistence experiment.

Rows are x = A z with z i.i.d. standardized Student-t, so Sigma = A A'. The
response is y = <x_true, x> + w with independent heavy-tailed noise w. The SAA
estimator minimizes the empirical squared loss over the weighted l1 ball
{||D̂3 x||_1 <= R}; the target x* minimizes the population risk over
{||D3 x||_1 <= (1+alpha) R}.

Population ingredients are exact for diagonal mixing (closed-form moments of
the t law, cumulants for the sixth moment of the noise epsilon). For a general
mixing matrix D3 is estimated from a control run and flagged as such.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache, partial
from itertools import combinations, product

import numpy as np

from . import streams
from .concentration import wilson_interval
from .noise import student_t_abs_moment
from .solver import frank_wolfe_quadratic

CONTROL_DRAWS = 100_000
TRIAL_COLUMNS = ("trial", "d", "N", "R", "delta", "alpha", "norm_ok", "diag_ok", "grad_ok",
                 "quad_ok", "feasible_ok", "excess_risk", "bound_shape", "solver_iters")


class ZeroDiagonal(UserWarning):
    """A design column vanished, so its D_q entry is zero."""


class LassoPreconditionError(ValueError):
    pass


# -- standardized Student-t moments ------------------------------------------

def std_t_moment(dof: float, k: int) -> float:
    """E[Z^k] for Z = T sqrt((dof-2)/dof); zero for odd k."""
    if k % 2:
        return 0.0
    return student_t_abs_moment(dof, k) * ((dof - 2) / dof) ** (k / 2)


def std_t_abs_moment(dof: float, k: float) -> float:
    return student_t_abs_moment(dof, k) * ((dof - 2) / dof) ** (k / 2)


def _even_cumulants(m2, m4, m6):
    """Cumulants 2, 4, 6 of a symmetric variable from its even moments."""
    return m2, m4 - 3 * m2 ** 2, m6 - 15 * m4 * m2 + 30 * m2 ** 3


def sixth_moment_of_sum(coef, dof: float, noise_scale: float, noise_dof: float | None) -> float:
    """E[(w + sum_k coef_k z_k)^6] for independent symmetric summands."""
    m = [std_t_moment(dof, k) for k in (2, 4, 6)]
    k2, k4, k6 = _even_cumulants(*m)
    c = np.asarray(coef, float)
    K2 = k2 * np.sum(c ** 2)
    K4 = k4 * np.sum(c ** 4)
    K6 = k6 * np.sum(c ** 6)
    if noise_scale > 0:
        if noise_dof is None:
            n2, n4, n6 = 1.0, 0.0, 0.0
        else:
            n2, n4, n6 = _even_cumulants(*(std_t_moment(noise_dof, k) for k in (2, 4, 6)))
        K2 += n2 * noise_scale ** 2
        K4 += n4 * noise_scale ** 4
        K6 += n6 * noise_scale ** 6
    return float(K6 + 15 * K4 * K2 + 15 * K2 ** 3)


# -- data ----------------------------------------------------------------------

@dataclass(frozen=True)
class DesignLaw:
    """Generator descriptor: rows A z with z standardized t(dof), noise scale * t(noise_dof)."""

    mixing: np.ndarray
    dof: float
    x_true: np.ndarray
    noise_scale: float = 1.0
    noise_dof: float | None = 12.0       # None: Gaussian noise
    q: float = 9.0

    @property
    def d(self) -> int:
        return self.mixing.shape[0]

    @property
    def sigma(self) -> np.ndarray:
        return self.mixing @ self.mixing.T

    @property
    def diagonal_mixing(self) -> bool:
        A = self.mixing
        return bool(np.all(A == np.diag(np.diag(A))))

    def rows(self, rng, n: int) -> np.ndarray:
        z = rng.standard_t(self.dof, size=(n, self.d)) * math.sqrt((self.dof - 2) / self.dof)
        return z @ self.mixing.T

    def noise(self, rng, n: int) -> np.ndarray:
        if self.noise_scale == 0:
            return np.zeros(n)
        if self.noise_dof is None:
            return self.noise_scale * rng.standard_normal(n)
        v = self.noise_dof
        return self.noise_scale * rng.standard_t(v, size=n) * math.sqrt((v - 2) / v)


@dataclass(frozen=True)
class RegressionDataset:
    design: np.ndarray
    response: np.ndarray
    noise: np.ndarray
    law: DesignLaw
    lineage: tuple
    q: float

    @property
    def N(self) -> int:
        return self.design.shape[0]


def design_law(d: int, dof: float = 12.0, mixing=None, x_true=None, noise_scale: float = 1.0,
               noise_dof: float | None = 12.0, q: float = 9.0, sparsity: int = 5) -> DesignLaw:
    """Validated law; rejects tails too heavy for the q-th moment."""
    if not dof > q:
        raise LassoPreconditionError(f"dof={dof} must exceed q={q} for finite q-th moments")
    if noise_dof is not None and not noise_dof > 6:
        raise LassoPreconditionError("noise needs a finite sixth moment (dof > 6)")
    A = np.eye(d) if mixing is None else np.asarray(mixing, float)
    if A.shape != (d, d) or np.linalg.matrix_rank(A) < d:
        raise LassoPreconditionError("mixing matrix must be square and full rank")
    if x_true is None:
        x_true = np.zeros(d)
        x_true[:min(sparsity, d)] = 1.0
    return DesignLaw(A, float(dof), np.asarray(x_true, float), float(noise_scale),
                     None if noise_dof is None else float(noise_dof), float(q))


def generate_design(law: DesignLaw, N: int, seed: int, *keys: int) -> RegressionDataset:
    """N rows and responses from the stream (seed, *keys)."""
    if N < 1:
        raise ValueError("N must be positive")
    rng = streams.stream(seed, *keys)
    X = law.rows(rng, N)
    w = law.noise(rng, N)
    return RegressionDataset(X, X @ law.x_true + w, w, law, (seed, *keys), law.q)


def diag_matrices(design, q: float = 3) -> np.ndarray:
    """Entries (mean_j |x_j[l]|^q)^(1/q) of the empirical D_q."""
    X = np.atleast_2d(np.asarray(design, float))
    out = np.mean(np.abs(X) ** q, axis=0) ** (1.0 / q)
    if np.any(out == 0):
        warnings.warn(f"zero column(s) {np.flatnonzero(out == 0).tolist()}: D_q not positive",
                      ZeroDiagonal, stacklevel=2)
    return out


def population_diag(law: DesignLaw, q: float = 3, seed: int = 0) -> tuple[np.ndarray, bool]:
    """Population D_q; exact for diagonal mixing, else a control-run estimate (flag False)."""
    if law.diagonal_mixing:
        return np.abs(np.diag(law.mixing)) * std_t_abs_moment(law.dof, q) ** (1 / q), True
    rng = streams.stream(seed, streams.CONTROL, 0)
    return diag_matrices(law.rows(rng, CONTROL_DRAWS), q), False


def small_ball_estimate(law: DesignLaw, u: float, directions: int = 64, draws: int = 20_000,
                        seed: int = 0) -> float:
    """min over sampled unit v of the fraction of draws with |<v,x>| > u sqrt(v'Sigma v)."""
    if u <= 0:
        raise ValueError("u must be positive")
    rng = streams.stream(seed, streams.PROBES, 0)
    V = rng.standard_normal((directions, law.d))
    V /= np.linalg.norm(V, axis=1, keepdims=True)
    S = law.sigma
    scale = np.einsum("ij,jk,ik->i", V, S, V)
    ok = scale > 1e-14 * np.trace(S)
    if not ok.all():
        warnings.warn(f"{int((~ok).sum())} direction(s) skipped: Sigma is singular there",
                      stacklevel=2)
    X = law.rows(streams.stream(seed, streams.PROBES, 1), draws)
    frac = np.mean(np.abs(X @ V[ok].T) > u * np.sqrt(scale[ok]), axis=0)
    return float(frac.min())


# -- instance ----------------------------------------------------------------

@dataclass
class LassoInstance:
    """Population side of one (law, N, R, delta, C0) setting."""

    law: DesignLaw
    R: float
    delta: float
    alpha: float
    C0: float
    N: int
    D3: np.ndarray
    D3_exact: bool
    x_star: np.ndarray
    gap: float
    constants: dict = field(default_factory=dict)

    @property
    def sigma(self) -> np.ndarray:
        return self.law.sigma

    @property
    def log_term(self) -> float:
        return math.log(self.law.d / self.delta)

    @property
    def cross_moment(self) -> np.ndarray:
        """P[eps x] = Sigma (x_true - x*) since the noise is independent of x."""
        return self.sigma @ (self.law.x_true - self.x_star)

    @property
    def eps_sixth(self) -> float:
        c = self.law.mixing.T @ (self.law.x_true - self.x_star)
        return sixth_moment_of_sum(c, self.law.dof, self.law.noise_scale, self.law.noise_dof)

    def risk(self, x) -> float:
        """f(x) = (x - x_true)' Sigma (x - x_true) + E w^2."""
        h = np.asarray(x, float) - self.law.x_true
        return float(h @ self.sigma @ h + self.law.noise_scale ** 2)

    def residuals(self, data: RegressionDataset) -> np.ndarray:
        return data.response - data.design @ self.x_star


def minimum_sample_size(q: float, delta: float) -> float:
    """(1/delta)^(1/(q/6 - 1))."""
    if q <= 6:
        return math.inf
    return (1 / delta) ** (1 / (q / 6 - 1))


def alpha_of(C0: float, d: int, delta: float, N: int) -> float:
    return C0 * math.sqrt(math.log(d / delta) / N)


def build_instance(law: DesignLaw, N: int, R: float, delta: float, C0: float,
                   constants: dict | None = None, seed: int = 0, tol: float = 1e-10) -> LassoInstance:
    """Compute alpha and x* by Frank-Wolfe on the population quadratic."""
    if not 0 < delta < 1 or R <= 0:
        raise ValueError("need delta in (0,1) and R > 0")
    alpha = alpha_of(C0, law.d, delta, N)
    D3, exact = population_diag(law, 3, seed)
    S = law.sigma
    b = S @ law.x_true
    const = float(law.x_true @ b) + law.noise_scale ** 2
    res = frank_wolfe_quadratic(S, b, const, D3, (1 + alpha) * R, tol=tol, budget=500_000)
    if not res.converged:
        raise RuntimeError(f"population solve stopped at gap {res.certificate:.3g}")
    return LassoInstance(law, R, delta, alpha, C0, N, D3, exact, res.x, res.certificate,
                         dict(constants or {}))


# -- identities and inequalities ---------------------------------------------

def excess_risk(inst: LassoInstance, x_hat) -> float:
    """<h, Sigma h> - 2 <P eps x, h> with h = x_hat - x*."""
    h = np.asarray(x_hat, float) - inst.x_star
    return float(h @ inst.sigma @ h - 2 * inst.cross_moment @ h)


def direct_excess_risk(inst: LassoInstance, x_hat) -> float:
    return inst.risk(x_hat) - inst.risk(inst.x_star)


def inequality_violations(inst: LassoInstance, data: RegressionDataset, count: int = 10_000,
                          seed: int = 0, rtol: float = 1e-9) -> dict:
    """Count failures of the risk identity and the three D3 bounds on random x."""
    rng = streams.stream(seed, streams.PROBES, 2)
    d = inst.law.d
    X = rng.standard_normal((count, d)) * rng.exponential(1.0, (count, 1))
    sparse = rng.random(count) < 0.5
    X[sparse] *= rng.random((int(sparse.sum()), d)) < 0.2
    S, Sh = inst.sigma, data.design.T @ data.design / data.N
    D3, D3h = inst.D3, diag_matrices(data.design, 3)
    quad = np.einsum("ij,jk,ik->i", X, S, X)
    quad_h = np.einsum("ij,jk,ik->i", X, Sh, X)
    l1 = np.abs(X) @ D3
    l1h = np.abs(X) @ D3h
    cross = X @ inst.cross_moment
    e6 = inst.eps_sixth ** (1 / 6)
    pts = inst.x_star + X
    ident = np.array([excess_risk(inst, p) - direct_excess_risk(inst, p) for p in pts[:256]])
    scale = 1 + np.abs(quad[:256])
    return {
        "sigma_bound": int(np.sum(quad > l1 ** 2 * (1 + rtol))),
        "sigma_hat_bound": int(np.sum(quad_h > l1h ** 2 * (1 + rtol))),
        "cross_bound": int(np.sum(cross > e6 * l1 * (1 + rtol) + 1e-12)),
        "identity": int(np.sum(np.abs(ident) > 1e-9 * scale)),
        "probes": count,
    }


def y_star(inst: LassoInstance) -> np.ndarray:
    """((1 - alpha)/(1 + alpha)) x*."""
    return (1 - inst.alpha) / (1 + inst.alpha) * inst.x_star


# -- events ------------------------------------------------------------------

@dataclass(frozen=True)
class SparseProbes:
    """+-1 combinations of at most s canonical vectors, one per sign class.

    ``index`` is padded with d (a zero coordinate) for probes with fewer than
    s nonzeros.
    """

    index: np.ndarray
    signs: np.ndarray
    d: int

    def dense(self) -> np.ndarray:
        V = np.zeros((len(self.index), self.d + 1))
        np.put_along_axis(V, self.index, self.signs, axis=1)
        return V[:, :self.d]

    def quadratic(self, M) -> np.ndarray:
        """v'Mv for every probe."""
        Mp = np.zeros((self.d + 1, self.d + 1))
        Mp[:self.d, :self.d] = M
        out = np.zeros(len(self.index))
        s = self.index.shape[1]
        for a in range(s):
            for b in range(s):
                out += self.signs[:, a] * self.signs[:, b] * Mp[self.index[:, a], self.index[:, b]]
        return out

    def weighted_l1(self, w) -> np.ndarray:
        wp = np.append(np.asarray(w, float), 0.0)
        return wp[self.index].sum(axis=1)


def sparse_probes(d: int, s_max: int = 3) -> SparseProbes:
    idx, sig = [], []
    for s in range(1, s_max + 1):
        for comb in combinations(range(d), s):
            for signs in product((1.0, -1.0), repeat=s - 1):
                idx.append(comb + (d,) * (s_max - s))
                sig.append((1.0,) + signs + (0.0,) * (s_max - s))
    return SparseProbes(np.array(idx, dtype=np.intp), np.array(sig), d)


@dataclass(frozen=True)
class EventReport:
    norm_ok: bool
    diag_ok: bool
    grad_ok: bool
    quad_ok: bool
    margins: dict
    required: dict            # smallest constant that makes each event hold

    @property
    def all_ok(self) -> bool:
        return self.norm_ok and self.diag_ok and self.grad_ok and self.quad_ok


def event_indicators(inst: LassoInstance, data: RegressionDataset, budget: int = 256,
                     probes: np.ndarray | None = None, seed: int = 0) -> EventReport:
    """Norm, Diag, Grad and Quad with their worst margins.

    Quad is evaluated on ``budget`` random directions plus the sparse probes,
    each rescaled to ||D̂3 v||_1 = 5R, the largest scale at which the event is
    used when bounding the optimality gap.
    """
    if inst.x_star is None:
        raise LassoPreconditionError("x* missing")
    a, R, N = inst.alpha, inst.R, data.N
    X = data.design
    D3h = diag_matrices(X, 3)
    lg = inst.log_term
    c = inst.constants
    req = {}
    # Norm
    lhs = float(D3h @ np.abs(inst.x_star))
    norm_m = (1 + a) ** 2 * R - lhs
    # Diag
    emp3, pop3 = D3h ** 3, inst.D3 ** 3
    diag_m = float(np.min(emp3 - pop3 / (1 + a) ** 3))
    ratio = float(np.max(pop3 / emp3))
    req["alpha_diag"] = max(ratio ** (1 / 3) - 1, 0.0)
    req["alpha_norm"] = max(math.sqrt(lhs / R) - 1, 0.0)
    # Grad
    eps = inst.residuals(data)
    emp_cross = X.T @ eps / N
    grad_lhs = float(np.max(np.abs(inst.cross_moment - emp_cross) / D3h))
    six = (inst.eps_sixth + float(np.mean(eps ** 6))) ** (1 / 6)
    grad_unit = math.sqrt(lg / N) * six
    req["C2"] = grad_lhs / grad_unit
    grad_m = c.get("C2", math.inf) * grad_unit - grad_lhs
    # Quad, on probes rescaled to ||D̂3 v||_1 = 5R
    rng = streams.stream(*data.lineage, streams.PROBES)
    V = rng.standard_normal((budget, inst.law.d))
    if probes is None:
        probes = sparse_probes(inst.law.d, 3)
    phi = c.get("phi", 0.5)
    M = X.T @ X / N - phi * inst.sigma
    deficit = np.concatenate([
        -np.einsum("ij,jk,ik->i", V, M, V) * (5 * R / (np.abs(V) @ D3h)) ** 2,
        -probes.quadratic(M) * (5 * R / probes.weighted_l1(D3h)) ** 2])
    lin = lg / N * 5 * R
    worst = float(np.max(deficit))
    req["C3"] = max(worst / lin, 0.0)
    quad_m = c.get("C3", math.inf) * lin - worst
    margins = {"norm": norm_m, "diag": diag_m, "grad": grad_m, "quad": quad_m}
    return EventReport(norm_m >= 0, diag_m >= 0, grad_m >= 0, quad_m >= 0, margins, req)


# -- trials ------------------------------------------------------------------

def bound_shape(inst: LassoInstance, data: RegressionDataset) -> float:
    """((P + P̂) eps^6)^(1/6) R sqrt(ln(d/delta)/N) + R^2 ln(d/delta)/N."""
    eps = inst.residuals(data)
    six = (inst.eps_sixth + float(np.mean(eps ** 6))) ** (1 / 6)
    lg = inst.log_term
    return six * inst.R * math.sqrt(lg / data.N) + inst.R ** 2 * lg / data.N


def run_trial(inst: LassoInstance, seed: int, trial: int, stream_id: int = streams.SCENARIOS,
              budget: int = 256, probes=None, tol: float = 1e-9) -> dict:
    """One persistence trial as a CSV row."""
    data = generate_design(inst.law, inst.N, seed, stream_id, inst.N, trial)
    D3h = diag_matrices(data.design, 3)
    X, y = data.design, data.response
    n = data.N
    res = frank_wolfe_quadratic(X.T @ X / n, X.T @ y / n, float(y @ y) / n, D3h, inst.R,
                                tol=tol, budget=200_000)
    ev = event_indicators(inst, data, budget, probes)
    feas = float(inst.D3 @ np.abs(res.x)) <= (1 + inst.alpha) * inst.R * (1 + 1e-12)
    return {"trial": trial, "d": inst.law.d, "N": n, "R": inst.R, "delta": inst.delta,
            "alpha": inst.alpha, "norm_ok": ev.norm_ok, "diag_ok": ev.diag_ok,
            "grad_ok": ev.grad_ok, "quad_ok": ev.quad_ok, "feasible_ok": bool(feas),
            "excess_risk": excess_risk(inst, res.x), "bound_shape": bound_shape(inst, data),
            "solver_iters": res.iterations, "converged": bool(res.converged),
            "_required": ev.required}


@dataclass(frozen=True)
class LassoConfig:
    d: int = 50
    N_schedule: tuple = (500, 2000, 8000)
    delta: float = 0.1
    dof: float = 12.0
    q: float = 9.0
    noise_scale: float = 1.0
    noise_dof: float | None = 12.0
    sparsity: int = 5
    radius_ratio: float = 0.5        # R = radius_ratio * ||D3 x_true||_1
    trials: int = 400
    pilot: int = 200
    seed: int = 0
    budget: int = 256
    small_ball_u: float = 1.0


def _law(cfg: LassoConfig) -> DesignLaw:
    return design_law(cfg.d, cfg.dof, noise_scale=cfg.noise_scale, noise_dof=cfg.noise_dof,
                      q=cfg.q, sparsity=cfg.sparsity)


def _allowed_failures(n: int, delta: float) -> int:
    return int(math.floor(n * delta / 8))


def _quantile_from_top(values, k: int) -> float:
    """Smallest constant exceeded by at most k of the values."""
    v = np.sort(np.asarray(values, float))[::-1]
    return float(v[k]) if k < v.size else 0.0


@lru_cache(maxsize=16)
def _cached_instance(cfg: LassoConfig, N: int, C0: float, consts: tuple) -> LassoInstance:
    c = dict(consts)
    return build_instance(_law(cfg), N, c["R"], cfg.delta, C0, c, cfg.seed)


@lru_cache(maxsize=4)
def _cached_probes(d: int) -> SparseProbes:
    return sparse_probes(d, 3)


def pilot_requirement(cfg: LassoConfig, C0: float, consts: tuple, unit: tuple) -> dict:
    """Required constants of one pilot trial; ``unit`` is (N, trial)."""
    N, t = unit
    inst = _cached_instance(cfg, N, C0, consts)
    return run_trial(inst, cfg.seed, t, streams.PILOT, cfg.budget, _cached_probes(cfg.d))["_required"]


def persistence_trial(cfg: LassoConfig, consts: tuple, unit: tuple) -> dict:
    """One fresh persistence trial; ``unit`` is (N, trial)."""
    N, t = unit
    inst = _cached_instance(cfg, N, dict(consts)["C0"], consts)
    row = run_trial(inst, cfg.seed, t, streams.SCENARIOS, cfg.budget, _cached_probes(cfg.d))
    row.pop("_required")
    return row


def calibrate(cfg: LassoConfig, rounds: int = 3, map_fn=map) -> dict:
    """Pilot-based constants: C0, C2, C3 and phi.

    phi = min(1, u^2 p̂ / 2) from the small-ball estimate. C0 is iterated
    because x* (hence Norm) depends on alpha. Each constant is the smallest
    value with at most floor(pilot * delta / 8) pilot failures, maximized over
    the N schedule. ``map_fn`` maps a picklable function over (N, trial) units.
    """
    law = _law(cfg)
    D3, _ = population_diag(law, 3, cfg.seed)
    R = cfg.radius_ratio * float(D3 @ np.abs(law.x_true))
    p_hat = small_ball_estimate(law, cfg.small_ball_u, seed=cfg.seed)
    phi = min(1.0, cfg.small_ball_u ** 2 * p_hat / 2)
    k = _allowed_failures(cfg.pilot, cfg.delta)
    base = (("R", R), ("phi", phi))
    units = [(N, t) for N in cfg.N_schedule for t in range(cfg.pilot)]
    C0 = 1.0
    consts = {}
    for _ in range(rounds):
        reqs = list(map_fn(partial(pilot_requirement, cfg, C0, base), units))
        C0_need, C2_need, C3_need = [], [], []
        for j, N in enumerate(cfg.N_schedule):
            block = reqs[j * cfg.pilot:(j + 1) * cfg.pilot]
            unit = math.sqrt(math.log(law.d / cfg.delta) / N)
            need_alpha = [max(r["alpha_diag"], r["alpha_norm"]) for r in block]
            C0_need.append(_quantile_from_top(need_alpha, k) / unit)
            C2_need.append(_quantile_from_top([r["C2"] for r in block], k))
            C3_need.append(_quantile_from_top([r["C3"] for r in block], k))
        new_C0 = max(C0_need)
        consts = {"C0": new_C0, "C2": max(C2_need), "C3": max(C3_need), "phi": phi,
                  "p_hat": p_hat, "R": R}
        if math.isclose(new_C0, C0, rel_tol=1e-3):
            break
        C0 = new_C0
    return consts


def constants_key(consts: dict) -> tuple:
    return tuple(sorted((k, float(v)) for k, v in consts.items()))


def persistence_experiment(cfg: LassoConfig, constants: dict | None = None, map_fn=map) -> dict:
    """Calibrate (unless constants are given), then run fresh trials per N."""
    consts = calibrate(cfg, map_fn=map_fn) if constants is None else dict(constants)
    key = constants_key(consts)
    notes = []
    for N in cfg.N_schedule:
        inst = _cached_instance(cfg, N, consts["C0"], key)
        n_min = minimum_sample_size(cfg.q, cfg.delta)
        notes.append({"N": N, "alpha": inst.alpha, "alpha_ok": inst.alpha <= 0.5,
                      "N_min": n_min, "N_ok": N >= n_min})
    units = [(N, t) for N in cfg.N_schedule for t in range(cfg.trials)]
    rows = list(map_fn(partial(persistence_trial, cfg, key), units))
    return {"rows": rows, "constants": consts, "preconditions": notes,
            "summary": summarize(rows, cfg.delta)}


def summarize(rows: list[dict], delta: float) -> list[dict]:
    """Per-N frequencies with Wilson intervals, and the median excess risk."""
    out = []
    for N in sorted({r["N"] for r in rows}):
        sub = [r for r in rows if r["N"] == N and r.get("converged", True)]
        n = len(sub)
        rec = {"N": N, "trials": n,
               "nonconverged": sum(1 for r in rows if r["N"] == N) - n,
               "median_excess_risk": float(np.median([r["excess_risk"] for r in sub]))}
        for key in ("norm_ok", "diag_ok", "grad_ok", "quad_ok", "feasible_ok"):
            held = sum(bool(r[key]) for r in sub)
            lo, hi = wilson_interval(n - held, n)
            rec[key] = held / n
            rec[key + "_fail_lo"] = lo
        rec["feasibility_pass"] = rec["feasible_ok_fail_lo"] <= delta
        out.append(rec)
    return out


def loglog_slope(Ns, values) -> float:
    """Least-squares slope of log(values) against log(N)."""
    return float(np.polyfit(np.log(np.asarray(Ns, float)), np.log(np.asarray(values, float)), 1)[0])
