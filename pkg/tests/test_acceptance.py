"""Acceptance suite: one test per criterion, each printing a single PASS/FAIL line.

The Monte Carlo criteria run the shipped reference configs in full, so this
file dominates the wall time of ``pytest``.
"""
import dataclasses
import json
import math

import numpy as np

from locsaa import concentration as conc
from locsaa import harness, lasso, solver, streams
from locsaa.entropy_localization import (a1_direct_sum, a1_functional, ball_spec, box_spec,
                                         finite_spec, localized_set_spec, packing_entropy,
                                         variance_proxies)
from locsaa.problem_core import PopulationOracle, program_from_descriptor

COVERAGE_CONFIGS = ("fixed-set-coverage", "exterior-mr-coverage", "interior-scq-coverage",
                    "interior-solution-coverage")
SHIPPED = (*COVERAGE_CONFIGS, "perturbation-soundness", "concentration-suite", "lasso-persistence")


def report(capsys, n: int, ok: bool, detail: str):
    with capsys.disabled():
        print(f"\ncriterion {n}: {'PASS' if ok else 'FAIL'} ({detail})")


def run_shipped(name, tmp_path, workers=1, cfg=None):
    cfg = cfg or harness.load_config(name)
    return harness.run_experiment(cfg, str(tmp_path / name), workers=workers)


def load_instance(name):
    desc = json.loads(harness.resolve_instance(name).read_text())
    program = program_from_descriptor(desc)
    return program, PopulationOracle.from_program(program)


# -- 1: perturbation soundness -------------------------------------------------

def test_criterion_1_perturbation_soundness(tmp_path, capsys):
    res = run_shipped("perturbation-soundness", tmp_path)
    total = next(r for r in res["summary"] if r["check"] == "all")
    ok = total["instances"] >= 1000 and total["counterexamples"] == 0 and total["errors"] == 0
    report(capsys, 1, ok, f"{total['instances']} instances, {total['premises_held']} premises held, "
                          f"{total['counterexamples']} counterexamples, {total['errors']} errors, "
                          f"{res['wall_time_s']:.0f} s")
    assert ok


# -- 2: coverage ---------------------------------------------------------------

def test_criterion_2_coverage(tmp_path, capsys):
    parts, ok = [], True
    for name in COVERAGE_CONFIGS:
        res = run_shipped(name, tmp_path)
        for row in res["summary"]:
            ok &= bool(row["pass"]) and row["trials"] >= 100
            parts.append(f"{name} N={row['N']}: {row.get('held')}/{row['trials']} held, "
                         f"fail Wilson lo {row.get('fail_wilson_lo', float('nan')):.3f}")
    report(capsys, 2, ok, "; ".join(parts))
    assert ok


# -- 3: concentration ----------------------------------------------------------

def test_criterion_3_concentration(tmp_path, capsys):
    res = run_shipped("concentration-suite", tmp_path)
    cells = sum(r["cells"] for r in res["summary"])
    bad = sum(r["violating_cells"] for r in res["summary"])
    families = {r["family"].split("/")[0] for r in res["summary"]}

    rng = np.random.default_rng(3)
    worst = 0.0
    for _ in range(1000):
        ez, eps, N = rng.uniform(0.05, 5), rng.uniform(1e-3, 2), int(rng.integers(1, 10_000))
        ez2 = ez ** 2 * rng.uniform(1, 20)
        closed = math.exp(-eps ** 2 * ez ** 2 * N / (2 * ez2))
        got = conc.lower_tail_probability_bound(ez, ez2, 2.0, eps, N)
        worst = max(worst, abs(got - closed) / max(closed, 1e-300))
    ok = bad == 0 and len(families) == 4 and worst <= 1e-12
    report(capsys, 3, ok, f"{len(families)} families, {bad}/{cells} violating cells, "
                          f"a=2 closed form max rel error {worst:.1e}")
    assert ok


# -- 4: localization payoff ----------------------------------------------------

def test_criterion_4_localization_payoff(capsys):
    program, oracle = load_instance("strongly-convex-2d")
    full = box_spec(*program.hard_set.bounding_box)
    D = full.diameter
    sample = program.sample(2000, 20261016)
    x = oracle.x_star
    full_sigma = variance_proxies(program, sample, oracle, x, x, [full]).sigma0_hat
    ratios = {}
    for eps in (1e-3, 1e-2, 0.025 * D, 0.05 * D):
        loc = localized_set_spec(oracle, program, "X*0", gamma=2 * eps)
        ratios[eps] = variance_proxies(program, sample, oracle, x, x, [loc]).sigma0_hat / full_sigma
    ok = all(r <= 0.2 for r in ratios.values())
    report(capsys, 4, ok, ", ".join(f"eps={e:.4g}: ratio {r:.4f}" for e, r in ratios.items()))
    assert ok


# -- 5: entropy and A1 ---------------------------------------------------------

def _entropy_sets():
    rng = np.random.default_rng(5)
    sets = [ball_spec([0.0], 1.0), ball_spec([0.3, -0.1], 0.7), box_spec([0.0, 0.0], [1.0, 0.5]),
            box_spec([-1.0], [2.0])]
    sets += [finite_spec(rng.uniform(-1, 1, (40, 2))), finite_spec(rng.uniform(0, 1, (25, 1)))]
    return sets


def test_criterion_5_entropy_and_a1(capsys):
    sets = _entropy_sets()
    cases = [(s, s.diameter * f) for s in sets
             for f in (1.0, 0.5, 0.3, 0.2, 0.12, 0.08, 0.05, 0.03, 0.02)][:50]
    order_fail = sum(packing_entropy(s, th, "exact-greedy") >
                     packing_entropy(s, th, "volumetric-bound") * (1 + 1e-12) + 1e-12
                     for s, th in cases)

    rng = np.random.default_rng(6)
    trunc_fail, worst = 0, 0.0
    for _ in range(20):
        d, r = int(rng.integers(1, 4)), float(rng.uniform(0.01, 50))
        res = a1_functional(ball_spec(np.zeros(d), r))
        err = abs(a1_direct_sum(2 * r, d, 200) - res.value)
        worst = max(worst, err / res.remainder_bound)
        trunc_fail += err > res.remainder_bound

    scale_err = 0.0
    for c in rng.uniform(0.01, 100, 20):
        for make in (lambda k: ball_spec([0.0, 0.0], k), lambda k: box_spec([0.0], [k])):
            base = a1_functional(make(1.0)).value
            scaled = a1_functional(make(c)).value
            scale_err = max(scale_err, abs(scaled - c * base) / (c * base))
    ok = len(cases) == 50 and order_fail == 0 and trunc_fail == 0 and scale_err <= 1e-12
    report(capsys, 5, ok, f"ordering failures {order_fail}/{len(cases)}, truncation failures "
                          f"{trunc_fail}/20 (worst error/majorant {worst:.2e}), "
                          f"scale rel error {scale_err:.1e}")
    assert ok


# -- 6: LASSO persistence ------------------------------------------------------

def test_criterion_6_lasso(tmp_path, capsys):
    cfg = harness.load_config("lasso-persistence")
    res = run_shipped("lasso-persistence", tmp_path, cfg=cfg)
    summary = res["summary"]
    lc = harness._lasso_config(cfg)
    key = lasso.constants_key(res["extras"]["constants"])
    violations = 0
    for N in cfg.N_schedule:
        inst = lasso._cached_instance(lc, N, dict(key)["C0"], key)
        for t in range(3):
            data = lasso.generate_design(inst.law, N, cfg.seed, streams.SCENARIOS, N, t)
            v = lasso.inequality_violations(inst, data, count=2000)
            violations += v["sigma_bound"] + v["sigma_hat_bound"] + v["cross_bound"] + v["identity"]
    slope = summary[0]["loglog_slope"]
    feas = all(r["feasibility_pass"] for r in summary)
    ok = (feas and violations == 0 and -1.1 <= slope <= -0.35 and lc.d == 50 and
          all(r["trials"] >= 400 for r in summary))
    medians = ", ".join(f"N={r['N']}: {r['median_excess_risk']:.4f}" for r in summary)
    report(capsys, 6, ok, f"feasibility {'ok' if feas else 'failed'}, {violations} inequality "
                          f"violations, medians {medians}, slope {slope:.3f}, "
                          f"{res['wall_time_s']:.0f} s")
    assert ok


# -- 7: solver correctness -----------------------------------------------------

def _saa_versus_grid(name):
    program, _ = load_instance(name)
    sample = program.sample(200, 20261016, 7)
    tol = 1e-4
    res = solver.solve_saa(program, sample, tol_opt=tol)
    lo, hi = program.hard_set.bounding_box
    mesh = 1e-4 if program.dimension == 1 else 2e-3
    member = lambda P: np.all([program.empirical(i, P, sample) <= program.relaxation
                               for i in range(1, program.m + 1)], axis=0) \
        if program.m else np.ones(len(P), bool)
    gm = solver.brute_force_min(lambda P: program.empirical(0, P, sample), member, (lo, hi), mesh,
                                lipschitz=program.empirical_lipschitz(0, sample))
    return gm.value - gm.error_bound - tol <= res.value <= gm.value + tol


def _projection_kkt(p, w, r) -> bool:
    P = solver.project_weighted_l1(p, w, r)
    scale = 1 + np.abs(p).max()
    if w @ np.abs(p) <= r:
        return np.allclose(P, p, atol=1e-12 * scale)
    if abs(w @ np.abs(P) - r) > 1e-9 * r or np.any(P * p < 0):
        return False
    nz = np.abs(P) > 0
    if not nz.any():
        return False
    lam = (np.abs(p[nz]) - np.abs(P[nz])) / w[nz]
    lam0 = lam.mean()
    if lam0 < -1e-9 * scale or np.ptp(lam) > 1e-8 * scale:
        return False
    return bool(np.all(np.abs(p[~nz]) <= lam0 * w[~nz] + 1e-8 * scale))


def _lmo_enumeration(g, w, r) -> bool:
    s = solver.linear_min_weighted_l1(g, w, r)
    d = len(g)
    vertices = np.vstack([np.diag(r / w), -np.diag(r / w)])
    best = (vertices @ g).min()
    is_vertex = np.any(np.all(np.isclose(vertices, s, rtol=0, atol=1e-12 * r), axis=1))
    return abs(g @ s - best) <= 1e-12 * (1 + np.abs(g).max() * r) and is_vertex and d == len(s)


def test_criterion_7_solver(capsys):
    fixtures = ("analytic-1d", "boundary-1d", "interior-1d", "strongly-convex-2d")
    saa_fail = [n for n in fixtures if not _saa_versus_grid(n)]
    rng = np.random.default_rng(7)
    proj_fail = lmo_fail = 0
    for k in range(10_000):
        d = int(rng.integers(1, 9))
        p = rng.normal(0, rng.uniform(0.1, 5), d)
        if k % 5 == 0:
            p[rng.random(d) < 0.3] = 0.0
        w = rng.uniform(0.1, 5, d)
        r = float(rng.uniform(0.05, 5))
        proj_fail += not _projection_kkt(p, w, r)
        g = p + (rng.normal(size=d) if k % 7 == 0 else 0.0)
        if np.any(g):
            lmo_fail += not _lmo_enumeration(g, w, r)
    ok = not saa_fail and proj_fail == 0 and lmo_fail == 0
    report(capsys, 7, ok, f"SAA vs grid on {len(fixtures)} fixtures, failures {saa_fail or 'none'}; "
                          f"projection KKT failures {proj_fail}/10000; "
                          f"LMO enumeration failures {lmo_fail}/10000")
    assert ok


# -- 8: reproducibility --------------------------------------------------------

def _capped(name):
    cfg = harness.load_config(name)
    if name in COVERAGE_CONFIGS:
        return dataclasses.replace(cfg, trials=4)
    if name == "perturbation-soundness":
        return dataclasses.replace(cfg, trials=12)
    if name == "concentration-suite":
        return dataclasses.replace(cfg, trials=100)
    return dataclasses.replace(cfg, trials=3, options={**cfg.options, "pilot": 12})


def test_criterion_8_reproducibility(tmp_path, capsys):
    differing = []
    for name in SHIPPED:
        cfg = _capped(name)
        blobs = []
        for w in (1, 4, 8):
            res = harness.run_experiment(cfg, str(tmp_path / f"{name}-{w}"), workers=w)
            blobs.append((res["output"] / "trials.csv").read_bytes())
        if any(b != blobs[0] for b in blobs[1:]):
            differing.append(name)
    ok = not differing
    report(capsys, 8, ok, f"{len(SHIPPED)} shipped configs at 1/4/8 workers (trial counts capped), "
                          f"differing: {differing or 'none'}")
    assert ok
