"""Experiment runner: config validation, seeded parallel trials, summaries and reports.

A run turns one config file into ``trials.csv`` (one row per work unit,
byte-identical for every worker count), ``summary.csv`` (recomputable from
the trials, see ``verify_run``), ``manifest.json`` (config echo, code
fingerprint, wall times) and ``plotdata/*.csv`` in long format.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
import platform
import re
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import lru_cache, partial
from importlib import resources
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from . import __version__
from . import concentration as conc
from . import experiments as ex
from . import lasso
from .concentration import wilson_interval
from .entropy_localization import (a1_functional, envelope_centered_norm, localized_set_spec,
                                   sample_size_branches)
from .problem_core import PopulationOracle, ProblemError, load_descriptor, program_from_descriptor

SCHEMA_VERSION = 1
KINDS = (*ex.COVERAGE_KINDS, "perturbation-soundness", "concentration-suite", "lasso-persistence")
EPS_POLICIES = ("paper-formula", "fixed")
MIN_COVERAGE_TRIALS = 100
LOW_POWER = 100
EXIT_OK, EXIT_CONFIG, EXIT_ACCEPTANCE = 0, 2, 3


class ConfigError(ValueError):
    """Invalid config; the message starts with ``file:line:``."""

    def __init__(self, path, line: int, message: str):
        super().__init__(f"{path}:{line}: {message}")
        self.path, self.line, self.message = str(path), line, message


# -- configuration ------------------------------------------------------------

@dataclass
class ExperimentConfig:
    kind: str
    trials: int
    seed: int = 0
    workers: int = 1
    output: str = ""
    instance: str | None = None
    N_schedule: tuple = ()
    rho: float | None = None
    delta: float | None = None
    eps_policy: str = "paper-formula"
    eps: float | None = None
    eps_hat: float | None = None
    budget: int = 1000
    options: dict = field(default_factory=dict)
    source: str = "<config>"
    schema_version: int = SCHEMA_VERSION

    def echo(self) -> dict:
        out = asdict(self)
        out["N_schedule"] = list(self.N_schedule)
        out.pop("source")
        return out


_FIELDS = {
    "schema_version": int, "kind": str, "instance": str, "N_schedule": list, "rho": float,
    "delta": float, "eps_policy": str, "eps": float, "eps_hat": float, "trials": int,
    "seed": int, "workers": int, "output": str, "budget": int, "options": dict,
}


def _line_of(text: str, key: str) -> int:
    m = re.search(r'"%s"\s*:' % re.escape(key), text)
    return text.count("\n", 0, m.start()) + 1 if m else 1


def packaged_path(kind: str, name: str) -> Path | None:
    """Path of a shipped instance descriptor or config, or None."""
    base = resources.files("locsaa") / "data" / kind
    p = base / (name if name.endswith(".json") else name + ".json")
    return Path(str(p)) if p.is_file() else None


def resolve_instance(ref: str, relative_to: Path | None = None) -> Path | None:
    p = Path(ref)
    for cand in ([relative_to / p] if relative_to is not None and not p.is_absolute() else []) + [p]:
        if cand.is_file():
            return cand
    return packaged_path("instances", ref)


def parse_config(text: str, source="<config>") -> ExperimentConfig:
    """Validate a JSON config; every error names the offending line."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(source, exc.lineno, f"not valid JSON: {exc.msg}") from None
    if not isinstance(raw, dict):
        raise ConfigError(source, 1, "top level must be an object")

    def fail(key, msg):
        raise ConfigError(source, _line_of(text, key), msg)

    for key, value in raw.items():
        if key not in _FIELDS:
            fail(key, f"unknown key {key!r}")
        want = _FIELDS[key]
        ok = isinstance(value, want) and not (want is int and isinstance(value, bool))
        if want is float:
            ok = isinstance(value, (int, float)) and not isinstance(value, bool)
        if key in ("eps", "eps_hat", "rho", "delta", "instance") and value is None:
            ok = True
        if not ok:
            fail(key, f"{key} must be of type {want.__name__}")
    for key in ("schema_version", "kind", "trials"):
        if key not in raw:
            raise ConfigError(source, 1, f"missing required key {key!r}")
    if raw["schema_version"] != SCHEMA_VERSION:
        fail("schema_version", f"unsupported schema_version {raw['schema_version']} "
                               f"(expected {SCHEMA_VERSION})")
    kind = raw["kind"]
    if kind not in KINDS:
        fail("kind", f"unknown kind {kind!r}; expected one of {', '.join(KINDS)}")
    cfg = ExperimentConfig(kind=kind, trials=raw["trials"], source=str(source))
    for key in ("seed", "workers", "output", "instance", "rho", "delta", "eps_policy", "eps",
                "eps_hat", "budget", "options"):
        if key in raw:
            setattr(cfg, key, raw[key])
    if not 0 <= cfg.seed < 2 ** 64:
        fail("seed", "seed must be a 64-bit unsigned integer")
    if cfg.workers < 1:
        fail("workers", "workers must be at least 1")
    if cfg.budget < 1:
        fail("budget", "budget must be positive")
    if cfg.trials < 1:
        fail("trials", "trials must be positive")
    Ns = raw.get("N_schedule", [])
    if not all(isinstance(n, int) and not isinstance(n, bool) and n > 0 for n in Ns):
        fail("N_schedule", "N_schedule entries must be positive integers")
    if any(b <= a for a, b in zip(Ns, Ns[1:])):
        fail("N_schedule", "N_schedule must be strictly increasing")
    cfg.N_schedule = tuple(Ns)
    if not cfg.output:
        stem = Path(str(source)).stem if source != "<config>" else kind
        cfg.output = os.path.join("runs", stem)

    if kind in ex.COVERAGE_KINDS:
        if cfg.trials < MIN_COVERAGE_TRIALS:
            fail("trials", f"coverage kinds need trials >= {MIN_COVERAGE_TRIALS}")
        if not cfg.N_schedule:
            fail("N_schedule" if "N_schedule" in raw else "kind", "coverage kinds need an N_schedule")
        if cfg.instance is None:
            fail("kind", "coverage kinds need an instance")
        if cfg.rho is None or not 0 < cfg.rho < 1:
            fail("rho" if "rho" in raw else "kind", "rho must lie in (0, 1)")
        if cfg.eps_policy not in EPS_POLICIES:
            fail("eps_policy", f"eps_policy must be one of {', '.join(EPS_POLICIES)}")
        interior = kind in ("interior-scq-coverage", "interior-solution-coverage")
        if interior and (cfg.eps is None or cfg.eps <= 0):
            fail("eps" if "eps" in raw else "kind", "interior kinds need a positive eps")
        if cfg.eps_policy == "fixed":
            if cfg.eps_hat is None:
                fail("eps_policy", "the fixed policy needs eps_hat")
            if not interior and cfg.eps_hat <= 0:
                fail("eps_hat", "eps_hat must be positive for this kind")
            if interior and cfg.eps_hat > 0:
                fail("eps_hat", "eps_hat must be nonpositive for interior kinds")
    if kind == "lasso-persistence":
        if cfg.delta is None or not 0 < cfg.delta < 1:
            fail("delta" if "delta" in raw else "kind", "delta must lie in (0, 1)")
        if len(cfg.N_schedule) < 2:
            fail("N_schedule" if "N_schedule" in raw else "kind",
                 "lasso-persistence needs at least two sample sizes")
        bad = set(cfg.options) - set(lasso.LassoConfig.__dataclass_fields__)
        if bad:
            fail("options", f"unknown lasso options {sorted(bad)}")
    if kind == "concentration-suite":
        if cfg.trials < MIN_COVERAGE_TRIALS:
            fail("trials", f"concentration-suite needs trials >= {MIN_COVERAGE_TRIALS}")
        if not cfg.N_schedule:
            cfg.N_schedule = (50,)
        for g in cfg.options.get("generators", []):
            try:
                conc.generator_from_name(g)
            except ValueError as exc:
                fail("options", str(exc))
        for fam in cfg.options.get("families", conc.FAMILIES):
            if fam not in conc.FAMILIES:
                fail("options", f"unknown family {fam!r}")
    if kind == "perturbation-soundness":
        share = cfg.options.get("share_2d", 0.2)
        if not 0 <= share <= 1:
            fail("options", "share_2d must lie in [0, 1]")

    if cfg.instance is not None:
        where = Path(str(source)).parent if source != "<config>" else None
        path = resolve_instance(cfg.instance, where)
        if path is None:
            fail("instance", f"instance descriptor {cfg.instance!r} not found")
        try:
            load_descriptor(path)
            desc = program_from_descriptor(path)
        except (ProblemError, ValueError, KeyError) as exc:
            fail("instance", f"invalid instance descriptor {path}: {exc}")
        if kind == "fixed-set-coverage" and desc.m != 0:
            fail("instance", "fixed-set-coverage needs an instance without stochastic constraints")
        if kind in ex.COVERAGE_KINDS and kind != "fixed-set-coverage" and desc.m == 0:
            fail("instance", f"{kind} needs an instance with stochastic constraints")
        cfg.instance = str(path)
    return cfg


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    if not path.is_file():
        alt = packaged_path("configs", str(path))
        if alt is None:
            raise ConfigError(path, 1, "config file not found")
        path = alt
    return parse_config(path.read_text(), path)


# -- worker plumbing ----------------------------------------------------------

_LIMITS = None


def _init_worker():
    global _LIMITS
    _LIMITS = threadpool_limits(1)


@lru_cache(maxsize=8)
def _context(kind, descriptor_text, rho, policy, eps, eps_hat, budget, seed):
    return ex.coverage_context(kind, json.loads(descriptor_text), rho, policy, eps, eps_hat,
                               budget, seed)


def _guarded(fn, unit):
    try:
        return fn(unit)
    except Exception as exc:          # recorded per unit; the run continues
        return {"status": f"error: {type(exc).__name__}: {exc}"}


def coverage_unit(args: tuple, unit: tuple) -> dict:
    ctx = _context(*args)
    N, trial, key = unit
    return ex.coverage_trial(ctx, N, trial, key)


def soundness_unit(seed: int, share_2d: float, budget: int, trial: int) -> dict:
    return ex.soundness_trial(seed, trial, share_2d, budget)


def concentration_unit(seed: int, reps: int, ts: tuple, unit: tuple) -> list[dict]:
    family, gname, N = unit
    return conc.family_rows(family, conc.generator_from_name(gname), N, reps, seed, ts)


class Runner:
    """Ordered map over work units, inline for one worker, else a process pool."""

    def __init__(self, workers: int = 1):
        self.workers = workers
        self._pool = None

    def __enter__(self):
        if self.workers > 1:
            self._pool = ProcessPoolExecutor(self.workers, initializer=_init_worker)
            self._limits = None
        else:
            self._limits = threadpool_limits(1)
        return self

    def __exit__(self, *exc):
        if self._pool is not None:
            self._pool.shutdown()
        if self._limits is not None:
            self._limits.unregister()

    def map(self, fn, units):
        units = list(units)
        if self._pool is None:
            return [fn(u) for u in units]
        # chunks of one let idle workers pick up the next unit; map keeps input order
        return list(self._pool.map(fn, units, chunksize=1))


# -- statistics ---------------------------------------------------------------

def coverage(verdicts, rho: float) -> dict:
    """Frequency of True verdicts, its Wilson interval and the pass flag."""
    v = [bool(x) for x in verdicts]
    n = len(v)
    if n == 0:
        raise ValueError("coverage needs at least one verdict")
    held = sum(v)
    lo, hi = wilson_interval(held, n)
    fail_lo, _ = wilson_interval(n - held, n)
    return {"trials": n, "held": held, "coverage": held / n, "wilson_lo": lo, "wilson_hi": hi,
            "fail_wilson_lo": fail_lo, "pass": fail_lo <= rho, "low_power": n < LOW_POWER}


def _mean(rows, key):
    vals = [float(r[key]) for r in rows if r.get(key) is not None]
    return math.fsum(vals) / len(vals) if vals else None


def summarize(kind: str, rows: list[dict], cfg: ExperimentConfig) -> list[dict]:
    """Summary rows; a pure function of the trial rows and the config."""
    if kind in ex.COVERAGE_KINDS:
        out = []
        for N in cfg.N_schedule:
            cell = [r for r in rows if r["N"] == N]
            ok = [r for r in cell if r["status"] == "ok"]
            rec = {"kind": kind, "N": N, "trials": len(cell), "errors": len(cell) - len(ok)}
            if ok:
                cov = coverage([r["conclusion_ok"] for r in ok], cfg.rho)
                prem = sum(bool(r["premise_ok"]) for r in ok)
                rec.update({"run": cov["trials"], "held": cov["held"], "premise_held": prem,
                            "coverage": cov["coverage"], "wilson_lo": cov["wilson_lo"],
                            "wilson_hi": cov["wilson_hi"], "fail_wilson_lo": cov["fail_wilson_lo"],
                            "premise_frequency": prem / len(ok),
                            "held_given_premise": sum(bool(r["conclusion_ok"]) for r in ok
                                                      if r["premise_ok"]),
                            "mean_eps_hat": _mean(ok, "eps_hat"),
                            "mean_sigma_hat": _mean(ok, "sigma_hat"),
                            "mean_threshold": _mean(ok, "threshold"),
                            "mean_a1_objective": _mean(ok, "a1_objective"),
                            "mean_a1_constraints": _mean(ok, "a1_constraints"),
                            "low_power": cov["low_power"], "pass": cov["pass"]})
            else:
                rec.update({"run": 0, "pass": False})
            out.append(rec)
        return out
    if kind == "perturbation-soundness":
        out = []
        for check in ("C0", "C1-C3", "exterior-MR", "interior-SCQ", "interior-solution", "all"):
            sub = rows if check == "all" else [r for r in rows if r["check"] == check]
            held = [r for r in sub if r["premises_hold"]]
            bad = [r for r in held if r["conclusion"] is False]
            out.append({"check": check, "instances": len(sub), "premises_held": len(held),
                        "conclusions_verified": sum(r["conclusion"] is True for r in held),
                        "counterexamples": len(bad),
                        "premise_invalid": sum(r["status"] == "premise-invalid" for r in sub),
                        "errors": sum(str(r["status"]).startswith("error") for r in sub),
                        "pass": not bad})
        return out
    if kind == "concentration-suite":
        out = []
        for fam in sorted({r["family"] for r in rows}):
            sub = [r for r in rows if r["family"] == fam]
            bad = sum(not r["passed"] for r in sub)
            out.append({"family": fam, "cells": len(sub), "violating_cells": bad,
                        "max_frequency_minus_claimed": max(float(r["frequency"]) - float(r["claimed"])
                                                           for r in sub),
                        "pass": bad == 0})
        return out
    if kind == "lasso-persistence":
        delta = cfg.delta
        out = lasso.summarize([r for r in rows if r.get("status", "ok") == "ok"], delta)
        slope = lasso.loglog_slope([r["N"] for r in out], [r["median_excess_risk"] for r in out])
        for r in out:
            r["loglog_slope"] = slope
            r["slope_ok"] = -1.1 <= slope <= -0.35
            r["pass"] = bool(r["feasibility_pass"] and r["slope_ok"])
        return out
    raise ValueError(kind)


# -- CSV ----------------------------------------------------------------------

def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "True" if v else "False"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return str(v)


def write_csv(path, rows: list[dict], columns=None) -> str:
    if columns is None:
        columns = []
        for r in rows:
            columns.extend(k for k in r if k not in columns)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_cell(r.get(c)) for c in columns])
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text)
    return text


def _parse_cell(s: str):
    if s == "":
        return None
    if s in ("True", "False"):
        return s == "True"
    try:
        return int(s)
    except ValueError:
        pass
    try:
        return float(s)
    except ValueError:
        return s


def read_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return [{k: _parse_cell(v) for k, v in row.items()} for row in csv.DictReader(fh)]


# -- running --------------------------------------------------------------------

def code_fingerprint() -> str:
    h = hashlib.sha256()
    root = Path(__file__).parent
    for p in sorted(root.rglob("*.py")):
        h.update(p.relative_to(root).as_posix().encode())
        h.update(p.read_bytes())
    return h.hexdigest()[:16]


def _lasso_config(cfg: ExperimentConfig) -> lasso.LassoConfig:
    opts = dict(cfg.options)
    return lasso.LassoConfig(N_schedule=tuple(cfg.N_schedule), delta=cfg.delta, trials=cfg.trials,
                             seed=cfg.seed, **opts)


def execute(cfg: ExperimentConfig, workers: int | None = None) -> dict:
    """Run every work unit; returns rows, summary, extras and timings."""
    workers = cfg.workers if workers is None else workers
    t0 = time.perf_counter()
    extras = {}
    with Runner(workers) as runner:
        if cfg.kind in ex.COVERAGE_KINDS:
            desc = json.dumps(load_descriptor(cfg.instance), sort_keys=True)
            args = (cfg.kind, desc, cfg.rho, cfg.eps_policy, cfg.eps, cfg.eps_hat, cfg.budget,
                    cfg.seed)
            units, key = [], 0
            for N in cfg.N_schedule:
                for t in range(cfg.trials):
                    units.append((N, t, key))
                    key += 1
            fn = partial(_guarded, partial(coverage_unit, args))
            rows = runner.map(fn, units)
            for u, r in zip(units, rows):
                if "trial" not in r:
                    r.update({"trial": u[1], "N": u[0]})
            columns = ("kind", *ex.COVERAGE_COLUMNS)
            for r in rows:
                r["kind"] = cfg.kind
        elif cfg.kind == "perturbation-soundness":
            share = float(cfg.options.get("share_2d", 0.2))
            fn = partial(_guarded, partial(soundness_unit, cfg.seed, share, cfg.budget))
            rows = runner.map(fn, range(cfg.trials))
            for t, r in enumerate(rows):
                r.setdefault("trial", t)
                r.setdefault("check", "none")
                r.setdefault("premises_hold", False)
                r.setdefault("conclusion", None)
            columns = ex.SOUNDNESS_COLUMNS
        elif cfg.kind == "concentration-suite":
            gens = cfg.options.get("generators") or [g.name for g in conc.default_generators()]
            fams = cfg.options.get("families") or list(conc.FAMILIES)
            ts = tuple(cfg.options.get("ts", (1.0, 2.0, 3.0)))
            units = [(f, g, N) for f in fams for g in gens for N in cfg.N_schedule]
            cells = runner.map(partial(concentration_unit, cfg.seed, cfg.trials, ts), units)
            rows = [r for cell in cells for r in cell]
            columns = None
        elif cfg.kind == "lasso-persistence":
            lc = _lasso_config(cfg)
            out = lasso.persistence_experiment(lc, map_fn=runner.map)
            rows = out["rows"]
            for r in rows:
                r["status"] = "ok" if r.get("converged", True) else "not-converged"
            extras = {"constants": out["constants"], "preconditions": out["preconditions"]}
            columns = (*lasso.TRIAL_COLUMNS, "converged", "status")
        else:  # pragma: no cover - parse_config rejects unknown kinds
            raise ValueError(cfg.kind)
    wall = time.perf_counter() - t0
    return {"rows": rows, "columns": columns, "summary": summarize(cfg.kind, rows, cfg),
            "extras": extras, "wall_time_s": wall, "workers": workers}


def plot_rows(kind: str, summary: list[dict]) -> dict[str, list[dict]]:
    if kind in ex.COVERAGE_KINDS:
        return {"coverage": [{"x": r["N"], "y": r.get("coverage"), "series": s}
                             for r in summary
                             for s in ("coverage",)] +
                            [{"x": r["N"], "y": r.get("premise_frequency"), "series": "premise"}
                             for r in summary]}
    if kind == "lasso-persistence":
        return {"excess_risk": [{"x": r["N"], "y": r["median_excess_risk"], "series": "median"}
                                for r in summary]}
    if kind == "concentration-suite":
        return {"violations": [{"x": r["family"], "y": r["violating_cells"], "series": "cells"}
                               for r in summary]}
    return {}


def run_experiment(cfg: ExperimentConfig, output: str | None = None,
                   workers: int | None = None) -> dict:
    """Execute and write trials.csv, summary.csv, manifest.json and plotdata."""
    res = execute(cfg, workers)
    out = Path(output or cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(out / "trials.csv", res["rows"], res["columns"])
    write_csv(out / "summary.csv", res["summary"])
    plots = plot_rows(cfg.kind, res["summary"])
    if plots:
        (out / "plotdata").mkdir(exist_ok=True)
        for name, rows in plots.items():
            write_csv(out / "plotdata" / f"{name}.csv", rows, ("x", "y", "series"))
    manifest = {
        "config": cfg.echo(), "source": cfg.source, "version": __version__,
        "code_fingerprint": code_fingerprint(), "python": platform.python_version(),
        "numpy": np.__version__, "workers": res["workers"],
        "wall_time_s": res["wall_time_s"], "units": len(res["rows"]),
        "trials_sha256": hashlib.sha256((out / "trials.csv").read_bytes()).hexdigest(),
        "all_pass": all(bool(r["pass"]) for r in res["summary"]),
        **res["extras"],
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, default=_json_default) + "\n")
    res["output"] = out
    res["all_pass"] = manifest["all_pass"]
    return res


def _json_default(v):
    if isinstance(v, (np.floating, np.integer, np.bool_)):
        return v.item()
    if isinstance(v, np.ndarray):
        return v.tolist()
    raise TypeError(type(v))


def verify_run(run_dir) -> tuple[bool, list[str]]:
    """Recompute summary.csv from trials.csv and the config echo in the manifest."""
    run_dir = Path(run_dir)
    manifest = json.loads((run_dir / "manifest.json").read_text())
    echo = dict(manifest["config"])
    echo["N_schedule"] = tuple(echo["N_schedule"])
    cfg = ExperimentConfig(**echo, source=manifest.get("source", "<config>"))
    rows = read_csv(run_dir / "trials.csv")
    problems = []
    digest = hashlib.sha256((run_dir / "trials.csv").read_bytes()).hexdigest()
    if digest != manifest.get("trials_sha256"):
        problems.append("trials.csv does not match the checksum in manifest.json")
    expected = write_csv(None, summarize(cfg.kind, rows, cfg))
    actual = (run_dir / "summary.csv").read_text()
    if expected != actual:
        exp_lines, act_lines = expected.splitlines(), actual.splitlines()
        for i, (a, b) in enumerate(zip(exp_lines, act_lines)):
            if a != b:
                problems.append(f"summary.csv line {i + 1}: expected {a!r}, found {b!r}")
        if len(exp_lines) != len(act_lines):
            problems.append(f"summary.csv has {len(act_lines)} lines, expected {len(exp_lines)}")
    return not problems, problems


# -- sample-size table --------------------------------------------------------

def sample_size_table(q_grid, rho_grid, eps_grid, instance) -> list[dict]:
    """Sufficient N for fixed constraints on a grid, with the binding branch.

    ``instance`` is a descriptor reference or a program. Population inputs
    are L_0^2, ||Lip_0^2 - L_0^2||_q and A1 of the active level set X*_{0,2 eps}.
    """
    if not (len(q_grid) and len(rho_grid) and len(eps_grid)):
        raise ValueError("grids must be nonempty")
    program = instance
    if not hasattr(instance, "losses"):
        path = resolve_instance(str(instance))
        if path is None:
            raise ProblemError(f"instance {instance!r} not found")
        program = program_from_descriptor(path)
    oracle = PopulationOracle.from_program(program)
    L0_sq = program.envelope_moment(0, 2)
    a1 = {e: a1_functional(localized_set_spec(oracle, program, "X*0", gamma=2 * e)).value
          for e in eps_grid}
    out = []
    for q in q_grid:
        qn, exact = envelope_centered_norm(program, 0, q)
        for rho in rho_grid:
            for e in eps_grid:
                N, b1, b2 = sample_size_branches(q, rho, e, L0_sq, qn, a1[e])
                out.append({"q": q, "rho": rho, "eps": e, "N": N, "branch_1": b1, "branch_2": b2,
                            "binding": "1" if b1 >= b2 else "2", "a1": a1[e],
                            "L0_sq": L0_sq, "centered_qnorm": qn, "qnorm_exact": exact})
    return out
