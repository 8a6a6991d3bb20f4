"""Property tests for the invariants that hold for every input."""
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra import numpy as hnp

from locsaa import concentration as conc
from locsaa import harness, perturbation as pt, solver
from locsaa.entropy_localization import a1_functional, ball_spec, box_spec, sample_size_branches

from conftest import build

finite = st.floats(-50, 50, allow_nan=False, allow_infinity=False)
vec3 = hnp.arrays(np.float64, 3, elements=finite)
weights3 = hnp.arrays(np.float64, 3, elements=st.floats(0.1, 10))
radius = st.floats(0.05, 20)


# -- weighted l1 ball ----------------------------------------------------------

@given(vec3, weights3, radius)
def test_projection_feasible_and_idempotent(p, w, r):
    P = solver.project_weighted_l1(p, w, r)
    assert w @ np.abs(P) <= r * (1 + 1e-12) + 1e-12
    np.testing.assert_allclose(solver.project_weighted_l1(P, w, r), P, atol=1e-9 * (1 + r))


@given(vec3, vec3, weights3, radius)
def test_projection_nonexpansive(a, b, w, r):
    Pa, Pb = solver.project_weighted_l1(a, w, r), solver.project_weighted_l1(b, w, r)
    assert np.linalg.norm(Pa - Pb) <= np.linalg.norm(a - b) + 1e-9


@given(vec3, weights3, radius, st.integers(0, 2 ** 32 - 1))
def test_lmo_beats_feasible_points(g, w, r, seed):
    s = solver.linear_min_weighted_l1(g, w, r)
    assert w @ np.abs(s) <= r * (1 + 1e-12)
    V = np.random.default_rng(seed).standard_normal((200, 3))
    V *= r / np.maximum(np.abs(V) @ w, 1e-300)[:, None]          # on the sphere of the ball
    assert g @ s <= (V @ g).min() + 1e-9 * (1 + np.abs(g).sum() * r)


# -- deviations ----------------------------------------------------------------

_program, _oracle = build(1, {"family": "quadratic", "weight": 1.0, "center": [0.3]},
                          [{"family": "affine", "linear": [1.0], "intercept": -0.8}])


@given(st.floats(-1, 1), st.floats(-1, 1), st.floats(0, 1), st.floats(0, 1))
def test_positive_part_algebra(a, b, x, y):
    model = pt.deterministic_model(_program, [lambda X: (X[:, 0] - 0.3) ** 2 + a * X[:, 0],
                                              lambda X: X[:, 0] - 0.8 + b],
                                   lipschitz=(3.0, 1.0))
    dev = pt.deviation_quantities(_oracle, _program, model, [x], [y])
    raw = (model.objective(np.array([[y]]))[0] - model.objective(np.array([[x]]))[0]) - \
        (_oracle.objective(np.array([[y]]))[0] - _oracle.objective(np.array([[x]]))[0])
    assert dev.delta >= 0 and dev.Delta >= 0
    assert dev.delta * dev.Delta == 0
    assert dev.delta - dev.Delta == pytest.approx(raw, abs=1e-12)
    assert dev.delta_i[0] * dev.Delta_i[0] == 0
    assert dev.delta_i[0] - dev.Delta_i[0] == pytest.approx(b, abs=1e-12)


_program2, _oracle2 = build(2, {"family": "quadratic", "weight": 1.0, "center": [0.4, 0.5]})


@settings(max_examples=15, deadline=None)
@given(st.floats(-1, 1), st.floats(-1, 1), st.floats(0.02, 0.3))
def test_sup_deviation_monotone_in_budget(a, b, t):
    model = pt.deterministic_model(
        _program2, [lambda X: _oracle2.objective(X) + a * X[:, 0] * X[:, 1] + b * X[:, 1]])
    spec = pt.deviation_set(_oracle2, model, "fixed", t)
    vals = [pt.sup_deviation(_oracle2, _program2, model, spec, "fixed", n,
                             x_ref=_oracle2.x_star, t=t).value for n in (1000, 2000, 4000)]
    assert vals[0] <= vals[1] <= vals[2]


@settings(max_examples=20, deadline=None)
@given(st.floats(0.0, 2.0))
def test_c0_monotone_in_perturbation_size(scale):
    program, oracle = build(1, {"family": "affine", "linear": [1.0]})
    t, t1 = 0.2, 0.05

    def held(s):
        model = pt.deterministic_model(program, [lambda X: X[:, 0] * (1 - s)], lipschitz=(abs(1 - s),))
        return pt.check_c0(oracle, program, model, [0.0], t, t1, test_conclusion=False).flags["C0"]

    # Δ̂(x*|t) = t s grows with s, so a larger perturbation never restores C0
    if not held(scale):
        assert not held(scale * 1.5 + 0.01)


# -- entropy -------------------------------------------------------------------

@settings(max_examples=25, deadline=None)
@given(st.floats(0.01, 100), st.integers(1, 3))
def test_a1_scale_equivariance(c, d):
    base = a1_functional(ball_spec(np.zeros(d), 1.0)).value
    scaled = a1_functional(ball_spec(np.zeros(d), c)).value
    assert scaled == pytest.approx(c * base, rel=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.1, 5), st.floats(0.1, 5))
def test_a1_monotone_under_inclusion(a, b):
    small, big = sorted((a, b))
    A = a1_functional(box_spec([0.0, 0.0], [small, small])).value
    B = a1_functional(box_spec([0.0, 0.0], [big, big])).value
    assert A <= B * (1 + 1e-12)


@given(st.floats(1.5, 20), st.floats(1e-10, 0.5), st.floats(1e-3, 10), st.floats(0, 10),
       st.floats(0, 10), st.floats(0, 10))
def test_sample_size_monotone_in_rho_and_eps(q, rho, eps, L, qn, a1):
    N, b1, b2 = sample_size_branches(q, rho, eps, L, qn, a1)
    N_rho, *_ = sample_size_branches(q, rho / 2, eps, L, qn, a1)
    N_eps, *_ = sample_size_branches(q, rho, eps / 2, L, qn, a1)
    assert N == math.ceil(max(b1, b2))
    assert N_rho >= N and N_eps >= N


# -- concentration -------------------------------------------------------------

@given(st.integers(1, 5000), st.data())
def test_wilson_interval_contains_estimate(n, data):
    k = data.draw(st.integers(0, n))
    lo, hi = conc.wilson_interval(k, n)
    assert 0 <= lo <= k / n <= hi <= 1


@given(st.floats(0.1, 5), st.floats(1.01, 2), st.floats(1e-3, 2), st.integers(1, 10_000),
       st.floats(1, 10))
def test_lower_tail_bound_monotone(ez, a, eps, N, ratio):
    mza = ez ** a * ratio
    b = conc.lower_tail_probability_bound(ez, mza, a, eps, N)
    assert 0 <= b <= 1
    assert conc.lower_tail_probability_bound(ez, mza, a, eps, N + 1) <= b
    assert conc.lower_tail_probability_bound(ez, mza, a, eps * 1.1, N) <= b


@given(st.floats(0, 100), st.integers(1, 10 ** 6), st.floats(0.01, 20))
def test_panchenko_threshold_formula(v, n, t):
    tb = conc.panchenko_threshold(v, n, t)
    assert tb.threshold == pytest.approx(math.sqrt(2 * (1 + t) * v / n))
    assert 0 < tb.claimed <= 2


# -- harness -------------------------------------------------------------------

@given(st.lists(st.booleans(), min_size=1, max_size=600), st.floats(0.01, 0.5))
def test_coverage_counts(verdicts, rho):
    row = harness.coverage(verdicts, rho)
    assert row["held"] <= row["trials"] == len(verdicts)
    assert row["coverage"] == row["held"] / row["trials"]
    assert row["wilson_lo"] <= row["coverage"] <= row["wilson_hi"]


@given(st.one_of(st.floats(allow_nan=False), st.integers(-10 ** 12, 10 ** 12), st.booleans(),
                 st.none()))
def test_csv_cells_round_trip(v):
    back = harness._parse_cell(harness._cell(v))
    if isinstance(v, float):
        assert back == v and isinstance(back, float)
    else:
        assert back == v and type(back) is type(v)
