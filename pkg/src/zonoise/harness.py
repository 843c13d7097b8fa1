"""Empirical noise-tolerance measurement: bisection on the noise level and comparison with the theory."""
from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .bounds import noise_bound
from .grid import Grid1DConfig, SimplexSearchConfig, grid_search_1d, grid_search_separable, simplex_grid_search
from .oracles import AdversarialBatch, AdversarialPlanted, AdversarialSign, NoisyOracle, UniformBounded, Zero, worst_selectable
from .problems import Ball, Box, ClassParams, Interval, Simplex, make_instance
from .reductions import restart_solve, schedule_lipschitz_sg

ALGORITHMS = ("grid1d", "grid1d-coarse", "separable", "separable-coarse", "simplex", "simplex-unpruned", "restart")
POLICIES = ("zero", "uniform", "uniform-quenched", "sign", "batch", "exhaustive")

# default feasible set and instance family per algorithm
DEFAULT_FAMILY = {
    "grid1d": "cone",
    "grid1d-coarse": "cone",
    "separable": "separable-pwl",
    "separable-coarse": "separable-pwl",
    "simplex": "cone",
    "simplex-unpruned": "cone",
    "restart": "quadratic",
}


def default_set(algo: str, n: int):
    if algo.startswith("grid1d"):
        return Interval(0.0, 1.0)
    if algo.startswith("separable"):
        return Box.cube(n)
    if algo.startswith("simplex"):
        return Simplex.corner(n)
    if algo == "restart":
        return Ball(tuple([0.0] * n), 1.0)
    raise ValueError(f"unknown algorithm {algo!r}; choose from {', '.join(ALGORITHMS)}")


def default_params(algo: str, family: str, n: int, M: float = 1.0, mu: Optional[float] = None) -> ClassParams:
    """Class constants that fit the default set: ``R`` is its diameter."""
    S = default_set(algo, n)
    R = S.diameter()
    if family == "cone":
        return ClassParams(n=n, M=M, R=R, mu=M if mu is None else mu, nu=1.0)
    if family == "quadratic":
        mu = 1.0 if mu is None else mu
        return ClassParams(n=n, M=max(M, mu * R), R=R, L=mu, mu=mu, nu=2.0)
    return ClassParams(n=n, M=M, R=R)


@dataclass(frozen=True)
class TrialSpec:
    """Everything one run needs; rebuilt inside a worker process."""

    algo: str
    family: str
    params: ClassParams
    epsilon: float
    policy: str
    delta: float
    seed: int


def run_algorithm(algo: str, oracle, params: ClassParams, epsilon: float, seed: int = 0):
    if algo == "grid1d":
        return grid_search_1d(oracle, params.M, epsilon, safety_factor=2)
    if algo == "grid1d-coarse":
        return grid_search_1d(oracle, params.M, epsilon, safety_factor=1)
    if algo == "separable":
        return grid_search_separable(oracle, params.M, epsilon, safety_factor=2)
    if algo == "separable-coarse":
        return grid_search_separable(oracle, params.M, epsilon, safety_factor=1)
    if algo in ("simplex", "simplex-unpruned"):
        mu = params.mu if params.mu > 0 else params.M
        cfg = SimplexSearchConfig(epsilon=epsilon, mu=mu, nu=params.nu, edge_pruning=algo == "simplex")
        return simplex_grid_search(oracle, params, cfg=cfg)
    if algo == "restart":
        return restart_solve(oracle, schedule_lipschitz_sg(params, epsilon), seed=seed)
    raise ValueError(f"unknown algorithm {algo!r}; choose from {', '.join(ALGORITHMS)}")


def exhaustive_grid_policy(instance, M: float, epsilon: float, delta: float, safety_factor: int = 2) -> AdversarialPlanted:
    """Worst planted noise against the 1-D grid search on ``instance``.

    Grid point ``j`` can be made the answer iff ``v_j - delta`` beats every
    other ``v_i + delta`` under lowest-index tie breaking. Among those the one
    with the largest true gap gets ``-delta``; every other point gets ``+delta``.
    """
    cfg = Grid1DConfig.for_accuracy(instance.set, M, epsilon, safety_factor)
    pts = cfg.points
    v = instance.objective(pts[:, None])
    target = worst_selectable(v, delta, v - instance.optimum)
    return AdversarialPlanted(delta, suppressed=(pts[target],), default=1)


def make_policy(name: str, delta: float, seed: int, epsilon: float, instance=None, algo: str = "", M: float = 1.0):
    if name == "zero" or delta == 0:
        return Zero()
    if name == "uniform":
        return UniformBounded(delta, seed=seed)
    if name == "uniform-quenched":
        return UniformBounded(delta, seed=seed, quenched=True)
    if name == "sign":
        return AdversarialSign(delta, threshold=epsilon)
    if name == "batch":
        return AdversarialBatch(delta)
    if name == "exhaustive":
        # enumerable probe set only on 1-D grids; the sign adversary stands in elsewhere
        if algo.startswith("grid1d"):
            return exhaustive_grid_policy(instance, M, epsilon, delta, 1 if algo == "grid1d-coarse" else 2)
        return AdversarialSign(delta, threshold=epsilon)
    raise ValueError(f"unknown noise policy {name!r}; choose from {', '.join(POLICIES)}")


def adversary_tier(policy: str, algo: str) -> str:
    if policy == "exhaustive":
        return "exhaustive-grid" if algo.startswith("grid1d") else "sign"
    return policy


def run_trial(spec: TrialSpec) -> tuple:
    """Return ``(gap, calls)`` of one seeded run."""
    S = default_set(spec.algo, spec.params.n)
    rng = np.random.default_rng(spec.seed)
    inst_seed, noise_seed, algo_seed = (int(v) for v in rng.integers(0, 2**31, size=3))
    inst = make_instance(spec.family, spec.params, S, seed=inst_seed)
    policy = make_policy(spec.policy, spec.delta, noise_seed, spec.epsilon, inst, spec.algo, spec.params.M)
    oracle = NoisyOracle(inst, policy)
    rep = run_algorithm(spec.algo, oracle, inst.params, spec.epsilon, algo_seed)
    return inst.gap(np.asarray(rep.x)), rep.calls


# --------------------------------------------------------------------------
# bisection


@dataclass(frozen=True)
class MalnQuery:
    algo: str
    params: ClassParams
    epsilon: float
    family: Optional[str] = None
    policy: str = "uniform"
    trials: int = 50
    threshold: float = 0.9
    delta_max: Optional[float] = None  # default: epsilon
    tol: float = 0.01  # relative to delta_max
    seed: int = 0
    theory_class: str = "lip-convex"

    def __post_init__(self):
        if self.algo not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algo!r}; choose from {', '.join(ALGORITHMS)}")
        if self.policy not in POLICIES:
            raise ValueError(f"unknown noise policy {self.policy!r}; choose from {', '.join(POLICIES)}")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not 0 < self.threshold <= 1:
            raise ValueError("threshold must lie in (0, 1]")
        if self.delta_max is not None and not self.delta_max > 0:
            raise ValueError("delta_max must be > 0")
        if not self.tol > 0:
            raise ValueError("tol must be > 0")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be > 0")

    @property
    def instance_family(self) -> str:
        return self.family or DEFAULT_FAMILY[self.algo]

    @property
    def upper(self) -> float:
        return self.delta_max if self.delta_max is not None else self.epsilon

    def to_dict(self) -> dict:
        d = asdict(self)
        d["params"] = self.params.to_dict()
        d["family"] = self.instance_family
        d["delta_max"] = self.upper
        return d


@dataclass
class MalnReport:
    query: MalnQuery
    status: str  # "bracketed", "infeasible" or "not-bracketed"
    delta_lo: float
    delta_hi: Optional[float]
    curve: list = field(default_factory=list)  # (delta, success rate, worst gap)
    violations: int = 0
    tier: str = ""
    theory_bound: Optional[float] = None
    theory_branch: Optional[str] = None
    ratio: Optional[float] = None

    def to_dict(self) -> dict:
        return {
            "query": self.query.to_dict(),
            "status": self.status,
            "delta_lo": self.delta_lo,
            "delta_hi": self.delta_hi,
            "curve": [{"delta": d, "success_rate": r, "worst_gap": g} for d, r, g in self.curve],
            "monotonicity_violations": self.violations,
            "adversary_tier": self.tier,
            "theory_bound": self.theory_bound,
            "theory_branch": self.theory_branch,
            "ratio": self.ratio,
        }

    def curve_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\r\n")
        w.writerow(["delta", "success_rate", "worst_gap"])
        for d, r, g in sorted(self.curve):
            w.writerow([repr(d), repr(r), repr(g)])
        return buf.getvalue()


def _probe(query: MalnQuery, delta: float, pool) -> tuple:
    ss = np.random.SeedSequence(query.seed)
    # the same trial seeds at every delta: common random numbers across probes
    seeds = [int(s.generate_state(1)[0]) for s in ss.spawn(query.trials)]
    specs = [
        TrialSpec(query.algo, query.instance_family, query.params, query.epsilon, query.policy, delta, s)
        for s in seeds
    ]
    results = list(pool.map(run_trial, specs)) if pool is not None else [run_trial(s) for s in specs]
    gaps = np.array([g for g, _ in results])
    ok = gaps <= query.epsilon * (1 + 1e-12)
    return float(ok.mean()), float(gaps.max())


def _count_violations(curve: list) -> int:
    pts = sorted(curve)
    return sum(1 for i in range(len(pts)) for j in range(i + 1, len(pts)) if pts[i][1] < pts[j][1])


def measure_maln(query: MalnQuery, jobs: int = 1) -> MalnReport:
    """Bisect on the noise level for the largest ``delta`` with success rate at least ``threshold``.

    Success of a run means true gap at most ``epsilon``. Probes share trial
    seeds, so the result only depends on the query.
    """
    pool = ProcessPoolExecutor(max_workers=jobs) if jobs > 1 else None
    try:
        curve = []

        def probe(delta):
            rate, worst = _probe(query, delta, pool)
            curve.append((delta, rate, worst))
            return rate

        tier = adversary_tier(query.policy, query.algo)
        if probe(0.0) < query.threshold:
            rep = MalnReport(query, "infeasible", 0.0, 0.0, curve, 0, tier)
            return _attach_theory(rep)
        hi = query.upper
        if probe(hi) >= query.threshold:
            rep = MalnReport(query, "not-bracketed", hi, None, curve, _count_violations(curve), tier)
            return _attach_theory(rep)
        lo = 0.0
        step = query.tol * query.upper
        while hi - lo > step:
            mid = 0.5 * (lo + hi)
            if probe(mid) >= query.threshold:
                lo = mid
            else:
                hi = mid
        rep = MalnReport(query, "bracketed", lo, hi, curve, _count_violations(curve), tier)
        return _attach_theory(rep)
    finally:
        if pool is not None:
            pool.shutdown()


def _attach_theory(rep: MalnReport) -> MalnReport:
    q = rep.query
    try:
        b = noise_bound(q.theory_class, q.params, q.epsilon)
    except ValueError:
        return rep
    rep.theory_bound = b.value
    rep.theory_branch = b.branch
    rep.ratio = rep.delta_lo / b.value
    return rep


def compare_with_theory(report: MalnReport, cls: str, params: ClassParams, epsilon: float) -> dict:
    """One comparison row. It states an ordering only, never tightness."""
    if params.n != report.query.params.n:
        raise ValueError(f"report is for n = {report.query.params.n}, params say n = {params.n}")
    if not math.isclose(epsilon, report.query.epsilon):
        raise ValueError(f"report is for epsilon = {report.query.epsilon}, got {epsilon}")
    b = noise_bound(cls, params, epsilon)
    return {
        "class": cls,
        "n": params.n,
        "epsilon": epsilon,
        "empirical_lo": report.delta_lo,
        "empirical_hi": report.delta_hi,
        "theory_bound": b.value,
        "dominant_branch": b.branch,
        "ratio": report.delta_lo / b.value,
        "caveat": "asymptotic-in-n",
    }
