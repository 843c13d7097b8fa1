import math

import numpy as np
import pytest

from zonoise import harness
from zonoise.harness import (
    MalnQuery,
    TrialSpec,
    compare_with_theory,
    default_params,
    exhaustive_grid_policy,
    measure_maln,
    run_trial,
)
from zonoise.oracles import NoisyOracle
from zonoise.problems import ClassParams, Interval, make_instance


def grid_query(algo="grid1d", policy="exhaustive", **kw):
    kw.setdefault("trials", 20)
    return MalnQuery(algo, default_params(algo, "pwl", 1), 0.1, family="pwl", policy=policy, **kw)


def test_run_trial_is_deterministic():
    p = default_params("simplex", "cone", 2)
    spec = TrialSpec("simplex", "cone", p, 0.5, "uniform", 0.1, 42)
    assert run_trial(spec) == run_trial(spec)


def test_measure_maln_is_deterministic():
    a = measure_maln(grid_query(policy="uniform", seed=3)).to_dict()
    b = measure_maln(grid_query(policy="uniform", seed=3)).to_dict()
    assert a == b


def test_jobs_do_not_change_result():
    q = grid_query(policy="uniform", seed=5, trials=8)
    assert measure_maln(q, jobs=1).to_dict() == measure_maln(q, jobs=2).to_dict()


@pytest.mark.parametrize("algo,floor", [("grid1d", 7 / 16), ("grid1d-coarse", 3 / 8)])
def test_exhaustive_grid_break_is_above_guaranteed_floor(algo, floor):
    # best grid gap <= M step / 2 and the adversary moves the answer by at most 2 delta
    r = measure_maln(grid_query(algo))
    assert r.status == "bracketed" and r.tier == "exhaustive-grid"
    assert r.delta_lo >= (floor - 0.01) * 0.1
    assert r.delta_hi - r.delta_lo <= 0.01 * 0.1 + 1e-15
    assert r.violations == 0


@pytest.mark.parametrize("delta,expected", [(0.0495, 0.0875), (0.0505, 0.1125)])
def test_exhaustive_grid_policy_is_worst_case(delta, expected):
    # grid step 0.025 and minimizer midway between two grid points: grid gaps are
    # 0.0125 + 0.025 k; a point with gap g is selectable iff g < 0.0125 + 2 delta
    inst = make_instance("cone", ClassParams(n=1, M=1.0, R=1.0, mu=1.0), Interval(0.0, 1.0), seed=0, minimizer=(0.5125,))
    o = NoisyOracle(inst, exhaustive_grid_policy(inst, 1.0, 0.1, delta))
    r = harness.run_algorithm("grid1d", o, inst.params, 0.1)
    assert inst.gap(np.asarray(r.x)) == pytest.approx(expected, abs=1e-12)


def test_not_bracketed_when_upper_is_safe():
    r = measure_maln(grid_query(policy="uniform", delta_max=0.02))
    assert r.status == "not-bracketed" and r.delta_lo == 0.02 and r.delta_hi is None


def test_infeasible_status(monkeypatch):
    monkeypatch.setattr(harness, "_probe", lambda q, d, pool: (0.5, 1.0))
    r = measure_maln(grid_query())
    assert r.status == "infeasible" and r.delta_lo == 0.0 and len(r.curve) == 1


def test_count_violations():
    assert harness._count_violations([(0.0, 1.0, 0), (0.1, 0.8, 0), (0.2, 0.9, 0)]) == 1
    assert harness._count_violations([(0.0, 1.0, 0), (0.1, 0.9, 0)]) == 0


def test_curve_csv_and_theory():
    r = measure_maln(grid_query(trials=5))
    lines = r.curve_csv().split("\r\n")
    assert lines[0].startswith("delta,")
    assert r.theory_bound == pytest.approx(0.1)  # n = 1: eps / n wins
    row = compare_with_theory(r, "lip-convex", r.query.params, 0.1)
    assert row["caveat"] == "asymptotic-in-n" and math.isclose(row["ratio"], r.delta_lo / row["theory_bound"])
    with pytest.raises(ValueError, match="n ="):
        compare_with_theory(r, "lip-convex", ClassParams(n=2, M=1.0, R=1.0), 0.1)
    with pytest.raises(ValueError, match="epsilon"):
        compare_with_theory(r, "lip-convex", r.query.params, 0.2)


def test_query_validation():
    p = default_params("grid1d", "pwl", 1)
    with pytest.raises(ValueError, match="algorithm"):
        MalnQuery("nope", p, 0.1)
    with pytest.raises(ValueError, match="policy"):
        MalnQuery("grid1d", p, 0.1, policy="nope")
    with pytest.raises(ValueError, match="threshold"):
        MalnQuery("grid1d", p, 0.1, threshold=0.0)
