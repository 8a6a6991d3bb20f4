"""Per-trial work units of the experiment kinds.

Coverage kinds draw one scenario set, set the relaxation by the chosen policy,
record whether the high-probability premise on eps_hat held, and test the
inclusion the corresponding deviation inequality claims. Soundness trials draw
a random low-dimensional instance and run one deterministic condition check.

Every unit is a pure function of (context, unit key): randomness comes from
streams keyed by the master seed and the unit key only.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import perturbation as pt
from . import streams
from .entropy_localization import (a1_functional, ball_spec, lipschitz_moduli, localized_set_spec,
                                   v_0, v_I)
from .solver import SolverError
from .problem_core import (InfeasibleRelaxation, PopulationOracle, ProblemError, StochasticProgram,
                           gap, program_from_descriptor)

SAFETY = 1.05
COVERAGE_KINDS = ("fixed-set-coverage", "exterior-mr-coverage", "interior-scq-coverage",
                  "interior-solution-coverage")
# union-bound constant C in ln(C m / rho) and the factor in front of sigma-hat
THEOREM_CONSTANTS = {
    "fixed-set-coverage": (3, 2.0),
    "exterior-mr-coverage": (9, 2.0),
    "interior-scq-coverage": (11, 4.0),
    "interior-solution-coverage": (9, 4.0),
}
COVERAGE_COLUMNS = ("trial", "N", "eps", "eps_hat", "sigma_hat", "threshold", "a1_objective",
                    "a1_constraints", "L_hat0_sq", "premise_ok", "conclusion_ok",
                    "max_violation", "status")
SOUNDNESS_COLUMNS = ("trial", "d", "m", "N", "check", "status", "premises_hold", "conclusion",
                     "max_violation", "counterexample", "reason", "instance")


@dataclass(frozen=True)
class CoverageContext:
    kind: str
    program: StochasticProgram
    oracle: PopulationOracle
    rho: float
    policy: str
    eps: float | None
    eps_hat: float | None
    budget: int
    seed: int


def coverage_context(kind, descriptor, rho, policy, eps, eps_hat, budget, seed) -> CoverageContext:
    program = program_from_descriptor(descriptor)
    oracle = PopulationOracle.from_program(program)
    if kind != "fixed-set-coverage" and program.m == 0:
        raise ProblemError(f"{kind} needs an instance with stochastic constraints")
    if kind == "fixed-set-coverage" and program.m != 0:
        raise ProblemError("fixed-set-coverage needs an instance without stochastic constraints")
    return CoverageContext(kind, program, oracle, rho, policy, eps, eps_hat, budget, seed)


# -- variance proxies ---------------------------------------------------------

@lru_cache(maxsize=4096)
def _a1_cached(ctx_id: int, kind: str, i: int, gamma: float, gap_gamma: float | None) -> float:
    ctx = _CONTEXTS[ctx_id]
    spec = localized_set_spec(ctx.oracle, ctx.program, kind, i=i, gamma=gamma,
                              budget=ctx.budget, gap_gamma=gap_gamma)
    return a1_functional(spec).value


_CONTEXTS: dict[int, CoverageContext] = {}


def _a1(ctx, kind, i, gamma, gap_gamma=None) -> float:
    _CONTEXTS[id(ctx)] = ctx
    return _a1_cached(id(ctx), kind, i, float(gamma), gap_gamma)


def trial_statistics(ctx: CoverageContext, sample, y_star=None) -> dict:
    """Sample quantities that do not depend on the localization level."""
    program, oracle = ctx.program, ctx.oracle
    L, Lh = lipschitz_moduli(program, sample)
    stats = {"scale": np.sqrt(L + Lh), "L_hat0_sq": float(Lh[0]), "pointwise": []}
    if ctx.kind != "fixed-set-coverage":
        # z in the statements is any point of X; x* is used
        stats["pointwise"].append(v_I(program, sample, oracle.x_star))
        if ctx.kind != "exterior-mr-coverage":
            stats["pointwise"].append(v_I(program, sample, y_star))
        if ctx.kind == "interior-scq-coverage":
            stats["pointwise"].append(v_0(program, sample, y_star, oracle.x_star))
    return stats


LOCALIZED_SETS = {"fixed-set-coverage": ("X*0", None), "exterior-mr-coverage": ("XX*0", "XX*i"),
                  "interior-scq-coverage": ("XG*0", "XG*i"),
                  "interior-solution-coverage": ("X*0", "X*i")}


def sigma_hat(ctx: CoverageContext, stats: dict, level: float, gap_gamma=None) -> dict:
    """The statement's sigma-hat at localization level ``level`` for the context's kind."""
    scale = stats["scale"]
    set0, seti = LOCALIZED_SETS[ctx.kind]
    a0 = _a1(ctx, set0, 0, level, gap_gamma)
    parts = [a0 * scale[0], *stats["pointwise"]]
    ai = [0.0]
    if seti is not None:
        ai = [_a1(ctx, seti, i, level, gap_gamma) for i in range(1, ctx.program.m + 1)]
        parts.append(max(a * s for a, s in zip(ai, scale[1:])))
    return {"sigma": float(max(parts)), "a1_objective": a0, "a1_constraints": max(ai),
            "L_hat0_sq": stats["L_hat0_sq"]}


def _threshold_factor(ctx, N) -> float:
    C, factor = THEOREM_CONSTANTS[ctx.kind]
    m = max(ctx.program.m, 1)
    return factor * math.sqrt(1 + math.log(C * m / ctx.rho)) / math.sqrt(N)


def self_consistent_eps_hat(ctx, stats, N, level_of, iters: int = 60):
    """Smallest eps_hat > 0 (to bisection accuracy) with eps_hat >= SAFETY * threshold(eps_hat).

    The threshold depends on eps_hat through the localized sets. The value
    computed with a ball around the whole hard set bounds it from above and
    gives the upper bracket. Below the returned value the premise fails.
    """
    k = _threshold_factor(ctx, N)

    def excess(e):
        s = sigma_hat(ctx, stats, level_of(e))
        return e - SAFETY * k * s["sigma"], s

    hard = ctx.program.hard_set
    a_full = a1_functional(ball_spec(hard.center, hard.diameter / 2)).value
    full = max([a_full * float(np.max(stats["scale"])), *stats["pointwise"]])
    lo_e, hi_e = 0.0, SAFETY * k * full + 1e-12
    exc, info = excess(hi_e)
    while exc < 0:          # defensive: widen until the premise holds
        hi_e *= 2
        exc, info = excess(hi_e)
    for _ in range(iters):
        if hi_e - lo_e <= 1e-9 * hi_e:
            break
        mid = 0.5 * (lo_e + hi_e)
        e, s = excess(mid)
        if e >= 0:
            hi_e, info = mid, s
        else:
            lo_e = mid
    return hi_e, info, k * info["sigma"]


def coverage_trial(ctx: CoverageContext, N: int, trial: int, key: int) -> dict:
    """One scenario set and the claimed inclusion."""
    program, oracle = ctx.program, ctx.oracle
    sample = program.sample(N, ctx.seed, key, streams.SCENARIOS)
    kind = ctx.kind
    row = {"trial": trial, "N": N, "eps": ctx.eps}
    if kind in ("fixed-set-coverage", "exterior-mr-coverage"):
        mult = 2.0 if kind == "fixed-set-coverage" else 3.0
        stats = trial_statistics(ctx, sample)
        if ctx.policy == "paper-formula":
            eh, info, thr = self_consistent_eps_hat(ctx, stats, N, lambda e: mult * e)
        else:
            eh = ctx.eps_hat
            info = sigma_hat(ctx, stats, mult * eh)
            thr = _threshold_factor(ctx, N) * info["sigma"]
        premise = eh >= thr
        if kind == "fixed-set-coverage":
            target, t1, prog = pt.near_optimal_target(oracle, 2 * eh), eh, program
        else:
            target, t1 = pt.exterior_target(oracle, eh), eh
            prog = program.with_relaxation(eh)
    else:
        eps = ctx.eps
        if kind == "interior-scq-coverage":
            _, y_star = oracle.min_over(-2 * eps)
            g2 = gap(oracle, 2 * eps)
            target = pt.near_optimal_target(oracle, 2 * eps + g2)
        else:
            y_star, g2 = oracle.x_star, None
            target = pt.near_optimal_target(oracle, 2 * eps)
        stats = trial_statistics(ctx, sample, y_star)
        info = sigma_hat(ctx, stats, 2 * eps, gap_gamma=g2)
        thr = _threshold_factor(ctx, N) * info["sigma"]
        eh = -SAFETY * thr if ctx.policy == "paper-formula" else ctx.eps_hat
        premise = thr <= -eh <= eps
        t1, prog = eps, program.with_relaxation(eh)
    res = pt.inclusion_check(oracle, prog, sample, t1, target, ctx.budget)
    row.update({"eps_hat": eh, "sigma_hat": info["sigma"], "threshold": thr,
                "a1_objective": info["a1_objective"], "a1_constraints": info["a1_constraints"],
                "L_hat0_sq": info["L_hat0_sq"], "premise_ok": bool(premise),
                "conclusion_ok": bool(res.holds), "max_violation": res.max_violation,
                "status": "ok"})
    return row


# -- soundness ----------------------------------------------------------------

NOISES = ({"family": "pareto", "tail_index": 3.5}, {"family": "pareto", "tail_index": 4.5},
          {"family": "pareto", "tail_index": 6.0}, {"family": "student_t", "dof": 5.0},
          {"family": "student_t", "dof": 8.0})
SAMPLE_SIZES = (10, 50, 200, 1000, 5000, 20000)


def random_descriptor(rng: np.random.Generator, d: int, m: int, name: str,
                      interior: bool = False) -> dict:
    """Random convex instance on the unit box or ball with m strictly feasible constraints.

    With ``interior`` the objective is a centred quadratic or norm whose
    centre is the point the constraints keep strictly feasible, so the
    solution is interior.
    """
    hard = {"kind": str(rng.choice(["box", "ball"])), "center": [0.0] * d, "radius": 1.0}
    fam = str(rng.choice(["quadratic", "norm"] if interior else
                         ["quadratic", "norm", "affine", "max-affine"]))
    obj = {"family": fam, "linear": (0.0 if interior else 0.5) * rng.standard_normal(d),
           "intercept": float(rng.uniform(-1, 1))}
    obj["linear"] = obj["linear"].tolist()
    p = rng.uniform(-0.5, 0.5, d)
    if fam in ("quadratic", "norm"):
        obj["weight"] = float(rng.uniform(0.5, 2.0))
        obj["center"] = (p if interior else rng.uniform(-1.2, 1.2, d)).tolist()
    elif fam == "max-affine":
        obj["weight"] = 1.0
        obj["pieces"] = np.hstack([rng.standard_normal((3, d)), rng.uniform(-0.5, 0.5, (3, 1))]).tolist()
    else:
        obj["linear"] = rng.standard_normal(d).tolist()
    cons = []
    for _ in range(m):
        if rng.random() < 0.6:
            a = rng.standard_normal(d)
            margin = rng.uniform(0.05, 0.6)
            cons.append({"family": "affine", "linear": a.tolist(),
                         "intercept": float(-(a @ p) - margin)})
        else:
            c = p + rng.uniform(-0.6, 0.6, d)
            r = float(np.linalg.norm(c - p)) + rng.uniform(0.1, 0.6)
            cons.append({"family": "quadratic", "weight": 1.0, "center": c.tolist(),
                         "linear": [0.0] * d, "intercept": -r * r})
    noise = dict(NOISES[int(rng.integers(len(NOISES)))])
    noise["scale"] = float(rng.uniform(0.05, 0.5))
    return {"schema_version": 1, "name": name, "dimension": d, "m": m, "hard_set": hard,
            "loss_family": fam, "noise": noise, "objective": obj, "constraints": cons}


def soundness_trial(seed: int, trial: int, share_2d: float = 0.2, budget: int = 1024) -> dict:
    """Random instance, random sample size and one premise/conclusion check."""
    rng = streams.stream(seed, streams.INSTANCE, trial)
    d = 2 if rng.random() < share_2d else 1
    m = int(rng.integers(0, 3))
    check = "C0" if m == 0 else ("C1-C3", *pt.COROLLARIES)[trial % 4]
    desc = random_descriptor(rng, d, m, f"random-{trial}", interior=check == "interior-solution")
    N = int(SAMPLE_SIZES[int(rng.integers(len(SAMPLE_SIZES)))])
    row = {"trial": trial, "d": d, "m": m, "N": N, "instance": desc["name"]}
    try:
        program = program_from_descriptor(desc)
        oracle = PopulationOracle.from_program(program)
        sample = program.sample(N, seed, trial, streams.SCENARIOS)
        scale = float(np.ptp(oracle.objective(_probe_grid(program)))) or 1.0
        u = rng.uniform(0.02, 0.4)
        # most tolerances respect the corollaries' slack caps; the rest probe premise-invalid paths
        capped = rng.random() < 0.8
        if m == 0:
            t = u * scale
            rep = pt.check_c0(oracle, program, sample, oracle.x_star, t,
                              t * rng.uniform(0.1, 1.0), budget)
        else:
            if check == "C1-C3":
                eh = u * 0.3 * scale
                params = pt.corollary_one_parameters(oracle, eh)
                rep = pt.check_c1_c2_c3(oracle, program.with_relaxation(eh), sample, params, budget)
            elif check == "exterior-MR":
                rep = pt.check_corollary(oracle, program, sample, check, u * 0.3 * scale, budget)
            else:
                eps = u * 0.3 * scale
                if capped:
                    slack = (oracle.slater_slack_value if check == "interior-SCQ"
                             else -float(oracle.constraint_max(oracle.x_star)[0]))
                    if slack is not None and slack > 0:
                        eps = min(eps, 0.5 * slack)
                eh = -eps * rng.uniform(0.0, 1.0)
                rep = pt.check_corollary(oracle, program.with_relaxation(eh), sample, check, eps,
                                         budget)
        c = rep.conclusion
        row.update({"check": check, "status": rep.status, "premises_hold": rep.premises_hold,
                    "conclusion": None if c is None else bool(c.holds),
                    "max_violation": None if c is None else c.max_violation,
                    "counterexample": None if c is None or c.witness is None
                    else pt._plain(c.witness), "reason": rep.reason})
    except (ProblemError, InfeasibleRelaxation, SolverError) as exc:
        row.update({"check": check, "status": "premise-invalid", "premises_hold": False,
                    "conclusion": None, "max_violation": None, "counterexample": None,
                    "reason": f"{type(exc).__name__}: {exc}"})
    return row


def _probe_grid(program):
    from .solver import grid_points
    lo, hi = program.hard_set.bounding_box
    G = grid_points(lo, hi, float((hi - lo).max()) / (40 if program.dimension == 1 else 10))
    return G[program.hard_set.contains(G)]
