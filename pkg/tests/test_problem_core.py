import math

import numpy as np
import pytest

from locsaa.problem_core import (HardSet, InfeasibleRelaxation, NoInformation, ProblemError,
                                 empirical_value, feasibility_residual, gap,
                                 metric_regularity_estimate, near_optimal_membership,
                                 program_from_descriptor, slater_slack)

from conftest import build, descriptor, scenarios


def test_empirical_value_of_constant_loss():
    program, _ = build(1, {"family": "affine", "linear": [0.0], "intercept": 3.5})
    sample = program.sample(7, seed=1)
    assert empirical_value(program, sample, 0, [0.2]) == pytest.approx(3.5, abs=0)


def test_empirical_value_of_random_norm_loss():
    program, _ = build(2, {"family": "norm", "weight": 1.0, "center": [0.0, 0.0]},
                       hard=("box", 0.0, 2.0))
    sample = scenarios(program, [1.0, 3.0])
    assert empirical_value(program, sample, 0, [1.0, 0.0]) == pytest.approx(2.0, rel=1e-15)


def test_empirical_value_of_squared_difference():
    # (xi - x)^2 over xi in {0, 2} equals x^2 + 2 + x * W with W in {0, -4}
    program, _ = build(1, {"family": "quadratic", "weight": 1.0, "center": [0.0], "intercept": 2.0},
                       hard=("box", 0.0, 2.0), noise={"family": "none", "scale": 1.0})
    sample = scenarios(program, [1.0, 1.0], additive=[[[0.0], [-4.0]]])
    assert empirical_value(program, sample, 0, [1.0]) == pytest.approx(1.0, rel=1e-15)


def test_empirical_value_rejects_bad_index_and_dimension():
    program, _ = build(1, {"family": "affine", "linear": [1.0]})
    sample = program.sample(3, seed=0)
    with pytest.raises(IndexError):
        empirical_value(program, sample, 1, [0.0])
    with pytest.raises(ProblemError):
        empirical_value(program, sample, 0, [0.0, 1.0])


@pytest.fixture
def halfline():
    """f1(x) = x - 1 on Y = [-3, 3]."""
    return build(1, {"family": "affine", "linear": [0.0]}, [{"family": "affine", "linear": [1.0],
                                                             "intercept": -1.0}],
                 hard=("box", 0.0, 3.0))[1]


def test_feasibility_residual_examples(halfline):
    assert feasibility_residual(halfline, [0.0], 0.0) == 0.0
    assert feasibility_residual(halfline, [2.0], 0.0) == pytest.approx(1.0)
    assert feasibility_residual(halfline, [0.75], -0.5) == pytest.approx(0.25)


def test_near_optimal_membership_examples(line_program):
    _, oracle = line_program
    assert near_optimal_membership(oracle, oracle.x_star, 0.0, 0.0)
    assert not near_optimal_membership(oracle, [0.3], 0.2, 0.0)
    assert near_optimal_membership(oracle, [0.3], 0.5, 0.0)


def _unit_square():
    cons = [{"family": "affine", "linear": [1.0, 0.0], "intercept": -1.0},
            {"family": "affine", "linear": [-1.0, 0.0]},
            {"family": "affine", "linear": [0.0, 1.0], "intercept": -1.0},
            {"family": "affine", "linear": [0.0, -1.0]}]
    return build(2, {"family": "affine", "linear": [1.0, 1.0]}, cons, hard=("box", 0.5, 2.5))[1]


def test_metric_regularity_on_unit_square():
    oracle = _unit_square()
    assert metric_regularity_estimate(oracle, [[2.0, 0.5]]) == pytest.approx(1.0, rel=1e-9)


def test_metric_regularity_skips_interior_probes():
    oracle = _unit_square()
    with pytest.raises(NoInformation):
        metric_regularity_estimate(oracle, [[0.5, 0.5]])
    both = metric_regularity_estimate(oracle, [[0.5, 0.5], [2.0, 0.5]])
    assert both == pytest.approx(1.0, rel=1e-9)


def test_metric_regularity_on_unit_ball():
    oracle = build(2, {"family": "affine", "linear": [1.0, 0.0]},
                   [{"family": "norm", "weight": 1.0, "center": [0.0, 0.0], "intercept": -1.0}],
                   hard=("box", 0.0, 3.0))[1]
    assert metric_regularity_estimate(oracle, [[2.0, 0.0]]) == pytest.approx(1.0, rel=1e-6)


def test_slater_slack_examples():
    ball = build(2, {"family": "affine", "linear": [1.0, 0.0]},
                 [{"family": "norm", "weight": 1.0, "center": [0.0, 0.0], "intercept": -1.0}],
                 hard=("box", 0.0, 3.0))[1]
    assert slater_slack(ball, [0.0, 0.0]) == pytest.approx(1.0)
    two = build(1, {"family": "affine", "linear": [1.0]},
                [{"family": "affine", "linear": [1.0], "intercept": -1.0},
                 {"family": "affine", "linear": [-1.0]}], hard=("box", 0.0, 3.0))[1]
    assert slater_slack(two, [0.25]) == pytest.approx(0.25)
    assert slater_slack(two, [1.0]) == pytest.approx(0.0, abs=1e-15)


def test_gap_examples():
    oracle = build(1, {"family": "affine", "linear": [1.0]}, [{"family": "affine", "linear": [-1.0]}],
                   hard=("box", 0.0, 3.0))[1]
    assert gap(oracle, 0.3) == pytest.approx(0.3, abs=1e-9)
    interior = build(1, {"family": "quadratic", "weight": 1.0, "center": [0.0]},
                     [{"family": "affine", "linear": [1.0], "intercept": -1.0}],
                     hard=("box", 0.0, 3.0))[1]
    assert gap(interior, 0.5) == pytest.approx(0.0, abs=1e-12)
    for g in (0.05, 0.1, 0.7):
        assert gap(interior, g) >= 0.0


def test_gap_beyond_slater_slack_is_infeasible():
    oracle = build(1, {"family": "affine", "linear": [1.0]},
                   [{"family": "affine", "linear": [1.0], "intercept": -0.5}],
                   hard=("box", 0.0, 1.0))[1]
    with pytest.raises(InfeasibleRelaxation):
        gap(oracle, 5.0)


def test_descriptor_round_trip():
    desc = descriptor(2, {"family": "quadratic", "weight": 2.0, "center": [0.1, -0.2]},
                      [{"family": "affine", "linear": [1.0, 1.0], "intercept": -0.5}],
                      noise={"family": "pareto", "tail_index": 4.5, "scale": 0.5})
    program = program_from_descriptor(desc)
    again = program_from_descriptor(program.to_descriptor())
    X = np.array([[0.2, 0.3], [0.9, 0.1]])
    for i in range(2):
        np.testing.assert_array_equal(program.losses[i].base(X), again.losses[i].base(X))
    s1, s2 = program.sample(5, 3, 1), again.sample(5, 3, 1)
    np.testing.assert_array_equal(s1.scenarios, s2.scenarios)


def test_hard_set_rejects_bad_radius():
    with pytest.raises(ProblemError):
        HardSet("box", [0.0], -1.0)


def test_pareto_tail_index_below_two_is_rejected():
    with pytest.raises((ProblemError, ValueError)):
        program_from_descriptor(descriptor(1, {"family": "affine", "linear": [1.0]},
                                           noise={"family": "pareto", "tail_index": 1.5}))


def test_population_moments_match_sample():
    program, _ = build(1, {"family": "quadratic", "weight": 1.0, "center": [0.3]},
                       noise={"family": "pareto", "tail_index": 6.0, "scale": 0.3})
    s = program.sample(400_000, seed=5)
    x = np.array([[0.8]])
    emp = program.scenario_values(0, x, s.scenarios)[0]
    assert emp.mean() == pytest.approx(program.losses[0].base(x)[0], rel=5e-3)
    assert emp.var() == pytest.approx(program.variance(0, x)[0], rel=5e-2)
    env = program.lipschitz_envelope(0, s.scenarios)
    assert np.mean(env ** 2) == pytest.approx(program.envelope_moment(0, 2), rel=2e-2)
    assert math.isfinite(program.envelope_moment(0, 4))
