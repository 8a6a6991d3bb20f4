from types import SimpleNamespace

import numpy as np
import pytest

from locsaa import solver
from locsaa.problem_core import PopulationOracle

from conftest import build, scenarios


def _ones(program, n=1):
    return scenarios(program, np.ones(n))


# -- weighted l1 primitives ----------------------------------------------------

def test_projection_interior_point_is_fixed():
    p = np.array([0.2, -0.3])
    np.testing.assert_allclose(solver.project_weighted_l1(p, [1.0, 1.0], 1.0), p)


@pytest.mark.parametrize("point,expected", [((2.0, 0.0), (1.0, 0.0)), ((1.0, 1.0), (0.5, 0.5))])
def test_projection_examples(point, expected):
    out = solver.project_weighted_l1(np.array(point), np.ones(2), 1.0)
    np.testing.assert_allclose(out, expected, atol=1e-12)


def test_projection_matches_constrained_least_squares():
    rng = np.random.default_rng(3)
    for _ in range(20):
        p = rng.normal(0, 2, 3)
        w = rng.uniform(0.5, 2, 3)
        P = solver.project_weighted_l1(p, w, 1.0)
        assert w @ np.abs(P) <= 1.0 + 1e-12
        # no random feasible point is closer
        V = rng.normal(0, 1, (2000, 3))
        V /= np.maximum(1.0, (np.abs(V) @ w))[:, None]
        assert np.linalg.norm(P - p) <= np.linalg.norm(V - p, axis=1).min() + 1e-12


def test_lmo_example():
    out = solver.linear_min_weighted_l1(np.array([3.0, -1.0]), np.array([1.0, 2.0]), 2.0)
    np.testing.assert_allclose(out, [-2.0, 0.0])


def test_lmo_zero_gradient():
    np.testing.assert_array_equal(solver.linear_min_weighted_l1(np.zeros(3), np.ones(3), 1.0),
                                  np.zeros(3))


def test_lmo_scale_invariant():
    g, w = np.array([0.5, -2.0, 1.0]), np.array([1.0, 3.0, 0.5])
    a = solver.linear_min_weighted_l1(g, w, 1.5)
    np.testing.assert_array_equal(a, solver.linear_min_weighted_l1(7.0 * g, w, 1.5))


def test_lmo_ties_take_lowest_index():
    out = solver.linear_min_weighted_l1(np.array([1.0, -1.0]), np.ones(2), 1.0)
    np.testing.assert_array_equal(out, [-1.0, 0.0])


# -- brute force ---------------------------------------------------------------

def test_brute_force_norm_on_box():
    gm = solver.brute_force_min(lambda P: np.sum(P * P, axis=1), lambda P: np.ones(len(P), bool),
                                (np.array([-1.0, -1.0]), np.array([1.0, 1.0])), 0.01)
    assert gm.value == pytest.approx(0.0, abs=1e-20)
    np.testing.assert_allclose(gm.argmins[0], [0.0, 0.0], atol=1e-12)


def test_brute_force_line():
    gm = solver.brute_force_min(lambda P: P[:, 0], lambda P: np.ones(len(P), bool),
                                (np.array([0.0]), np.array([1.0])), 0.01)
    assert gm.value == 0.0


def test_brute_force_quadratic_vs_closed_form():
    rng = np.random.default_rng(0)
    for _ in range(5):
        c = rng.uniform(-0.5, 0.5, 2)
        A = rng.normal(size=(2, 2))
        H = A @ A.T + 0.5 * np.eye(2)
        f = lambda P: np.einsum("ij,jk,ik->i", P - c, H, P - c)
        mesh = 0.02
        L = 2 * np.linalg.norm(H, 2) * 2 * np.sqrt(2)      # gradient bound on [-1, 1]^2
        gm = solver.brute_force_min(f, lambda P: np.ones(len(P), bool),
                                    (-np.ones(2), np.ones(2)), mesh, lipschitz=L)
        assert abs(gm.value - 0.0) <= gm.error_bound


def test_brute_force_no_feasible_point():
    with pytest.raises(solver.NoFeasiblePoint):
        solver.brute_force_min(lambda P: P[:, 0], lambda P: np.zeros(len(P), bool),
                               (np.array([0.0]), np.array([1.0])), 0.1)


# -- SAA -----------------------------------------------------------------------

def test_solve_saa_monotone_line(line_program):
    program, _ = line_program
    res = solver.solve_saa(program, _ones(program), tol_opt=1e-4)
    assert res.x[0] == pytest.approx(0.0, abs=1e-3)
    assert res.converged


def test_solve_saa_norm_on_ball():
    program, _ = build(2, {"family": "quadratic", "weight": 1.0, "center": [0.0, 0.0]},
                       hard=("ball", 0.0, 1.0))
    res = solver.solve_saa(program, _ones(program), tol_opt=1e-6)
    np.testing.assert_allclose(res.x, [0.0, 0.0], atol=2e-3)


@pytest.mark.parametrize("seed", range(4))
def test_solve_saa_piecewise_affine_vs_grid(seed):
    rng = np.random.default_rng(seed)
    pieces = np.hstack([rng.normal(size=(3, 2)), rng.uniform(-0.3, 0.3, (3, 1))])
    a = rng.normal(size=2)
    program, oracle = build(2, {"family": "max-affine", "weight": 1.0, "pieces": pieces.tolist()},
                            [{"family": "affine", "linear": a.tolist(),
                              "intercept": float(-(a @ [0.5, 0.5]) - 0.1)}])
    sample = _ones(program)
    tol = 1e-3
    res = solver.solve_saa(program, sample, tol_opt=tol)
    assert res.residual <= 1e-6
    mesh = 0.002
    L = float(np.abs(pieces[:, :2]).sum(axis=1).max())
    member = lambda P: (program.empirical(1, P, sample) <= 0.0)
    gm = solver.brute_force_min(lambda P: program.empirical(0, P, sample), member,
                                program.hard_set.bounding_box, mesh, lipschitz=L)
    assert res.value <= gm.value + tol
    assert res.value >= gm.value - gm.error_bound - tol


# -- LASSO ---------------------------------------------------------------------

def test_solve_lasso_zero_response():
    X = np.random.default_rng(0).normal(size=(50, 3))
    res = solver.solve_lasso(SimpleNamespace(design=X, response=np.zeros(50)), np.ones(3), 1.0)
    np.testing.assert_allclose(res.x, 0.0, atol=1e-9)
    assert res.value == pytest.approx(0.0, abs=1e-12)


def test_solve_lasso_recovers_interior_least_squares():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(200, 2))
    beta = np.array([0.3, -0.2])
    y = X @ beta + 0.1 * rng.normal(size=200)
    ls = np.linalg.solve(X.T @ X, X.T @ y)
    res = solver.solve_lasso(SimpleNamespace(design=X, response=y), np.ones(2), 5.0, tol=1e-12)
    np.testing.assert_allclose(res.x, ls, atol=1e-5)
    assert res.converged


def test_solve_lasso_feasible_on_active_ball():
    rng = np.random.default_rng(2)
    X = rng.normal(size=(100, 10))
    y = X @ rng.normal(size=10)
    w = rng.uniform(0.5, 2.0, 10)
    res = solver.solve_lasso(SimpleNamespace(design=X, response=y), w, 0.5, tol=1e-8)
    assert w @ np.abs(res.x) <= 0.5 + 1e-12
