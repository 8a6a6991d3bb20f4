import numpy as np
import pytest

from locsaa.problem_core import PopulationOracle, ScenarioSet, program_from_descriptor


def descriptor(d, objective, constraints=(), hard=("box", 0.5, 0.5), noise=None, **extra):
    """Small descriptor builder; ``hard`` is (kind, center, radius) with a scalar center."""
    kind, c, r = hard
    desc = {"schema_version": 1, "name": extra.pop("name", "fixture"), "dimension": d,
            "m": len(constraints), "hard_set": {"kind": kind, "center": [c] * d, "radius": r},
            "objective": dict(objective), "constraints": [dict(g) for g in constraints],
            "noise": noise or {"family": "none"}}
    desc.update(extra)
    return desc


def build(d, objective, constraints=(), hard=("box", 0.5, 0.5), noise=None, **extra):
    program = program_from_descriptor(descriptor(d, objective, constraints, hard, noise, **extra))
    return program, PopulationOracle.from_program(program)


def scenarios(program, multipliers, additive=None):
    """Explicit scenario set: one multiplier and d additive columns per loss."""
    M = np.atleast_2d(np.asarray(multipliers, float))
    if M.shape[0] == 1 and program.m > 0:
        M = np.repeat(M, program.m + 1, axis=0)
    n, d = M.shape[1], program.dimension
    out = np.zeros((n, program.width))
    for i in range(program.m + 1):
        k = i * (d + 1)
        out[:, k] = M[i]
        if additive is not None:
            out[:, k + 1:k + 1 + d] = np.asarray(additive, float)[i]
    return ScenarioSet(out, (0, 0, 0))


@pytest.fixture
def line_program():
    """f(x) = x on [0, 1] without noise."""
    return build(1, {"family": "affine", "linear": [1.0]})
