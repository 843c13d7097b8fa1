"""Grid-search algorithms: 1-D, coordinate-wise on boxes, and nested search over a simplex."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .problems import (
    Array,
    Box,
    ClassParams,
    Interval,
    Simplex,
    coordwise_lipschitz,
    to_cartesian_batch,
)


@dataclass
class SolveReport:
    algo: str
    x: list
    value: float
    calls: int
    per_level_calls: list = field(default_factory=list)
    flags: list = field(default_factory=list)
    eps: Optional[float] = None
    delta: Optional[float] = None
    seed: Optional[int] = None
    gap: Optional[float] = None
    extra: dict = field(default_factory=dict)

    def attach_gap(self, instance) -> "SolveReport":
        """Fill ``gap`` from the instance's stored optimum (harness side, not seen by the solver)."""
        self.gap = instance.gap(np.asarray(self.x))
        return self

    def to_dict(self) -> dict:
        return {
            "algo": self.algo,
            "seed": self.seed,
            "eps": self.eps,
            "delta": self.delta,
            "gap": self.gap,
            "calls": self.calls,
            "per_level_calls": list(self.per_level_calls),
            "flags": list(self.flags),
            "x": [float(v) for v in self.x],
            "value": float(self.value),
        }


# --------------------------------------------------------------------------
# 1-D grids


def grid_points(a: float, b: float, step: float) -> Array:
    """``{a, a + step, ..., a + floor((b - a)/step) step, b}`` without a near-duplicate of ``b``."""
    if b < a:
        raise ValueError(f"empty interval [{a}, {b}]")
    if not step > 0:
        raise ValueError(f"grid step must be > 0, got {step}")
    span = b - a
    if span <= 1e-15 * max(1.0, abs(a), abs(b)):
        return np.array([a])
    k = int(math.floor(span / step))
    pts = a + step * np.arange(k + 1)
    pts = pts[pts < b - 1e-12 * max(span, step)]
    return np.append(pts, b)


@dataclass(frozen=True)
class Grid1DConfig:
    """Step ``Delta`` on ``[a, b]``; ``safety_factor`` 1 gives ``eps/(2M)``, 2 gives ``eps/(4M)``."""

    interval: Interval
    step: float
    safety_factor: int = 2

    def __post_init__(self):
        if self.safety_factor not in (1, 2):
            raise ValueError("safety_factor must be 1 or 2")
        if not self.step > 0:
            raise ValueError("step must be > 0")
        if self.step > self.interval.length:
            raise ValueError(f"step {self.step} exceeds the interval length {self.interval.length}")

    @classmethod
    def for_accuracy(cls, interval: Interval, M: float, eps: float, safety_factor: int = 2) -> "Grid1DConfig":
        step = min(eps / (2 * safety_factor * M), interval.length)
        return cls(interval, step, safety_factor)

    @property
    def points(self) -> Array:
        return grid_points(self.interval.a, self.interval.b, self.step)

    def admissible_delta(self, eps: float) -> float:
        """Noise level the mode is designed for: ``eps/2`` in coarse mode, ``eps/4`` in safety mode."""
        return eps / (2 * self.safety_factor)


def grid_search_1d(oracle, M: float, epsilon: float, cfg: Optional[Grid1DConfig] = None, *, safety_factor: int = 2) -> SolveReport:
    """Return the grid point with the smallest noisy value (lowest index on ties).

    The true gap of the answer is at most ``M * step + 2 * delta``.
    """
    if cfg is None:
        S = oracle.instance.set
        if not isinstance(S, Interval):
            raise ValueError("grid_search_1d needs an Interval feasible set")
        cfg = Grid1DConfig.for_accuracy(S, M, epsilon, safety_factor)
    pts = cfg.points
    start = oracle.calls
    values = oracle.evaluate_batch(pts[:, None])
    i = int(np.argmin(values))
    flags = []
    if oracle.delta > cfg.admissible_delta(epsilon) * (1 + 1e-12):
        flags.append("out-of-theory:delta")
    return SolveReport(
        algo="grid1d" if cfg.safety_factor == 2 else "grid1d-coarse",
        x=[float(pts[i])],
        value=float(values[i]),
        calls=oracle.calls - start,
        per_level_calls=[len(pts)],
        flags=flags,
        eps=epsilon,
        delta=oracle.delta,
        extra={"step": cfg.step, "index": i, "guarantee": M * cfg.step + 2 * oracle.delta},
    )


def grid_search_separable(oracle, M: float, epsilon: float, set: Optional[Box] = None, *, safety_factor: int = 2) -> SolveReport:
    """Solve one coordinate at a time on a box, freezing each coordinate at its 1-D answer.

    Every coordinate gets a 1-D grid of step ``eps / (2 s n M)``; unsolved
    coordinates sit at the box centre.
    """
    S = set if set is not None else oracle.instance.set
    if not isinstance(S, Box):
        raise ValueError("grid_search_separable needs a Box feasible set")
    if safety_factor not in (1, 2):
        raise ValueError("safety_factor must be 1 or 2")
    n = S.dim
    step = epsilon / (2 * safety_factor * n * M)
    x = S.center()
    start = oracle.calls
    counts = []
    value = math.nan
    for i, iv in enumerate(S.intervals):
        ts = grid_points(iv.a, iv.b, min(step, iv.length))
        X = np.repeat(x[None, :], len(ts), axis=0)
        X[:, i] = ts
        vals = oracle.evaluate_batch(X)
        k = int(np.argmin(vals))
        x[i] = ts[k]
        value = float(vals[k])
        counts.append(len(ts))
    flags = []
    if oracle.delta > epsilon / (2 * safety_factor * n) * (1 + 1e-12):
        flags.append("out-of-theory:delta")
    return SolveReport(
        algo="separable" if safety_factor == 2 else "separable-coarse",
        x=x.tolist(),
        value=value,
        calls=oracle.calls - start,
        per_level_calls=counts,
        flags=flags,
        eps=epsilon,
        delta=oracle.delta,
        extra={"step": step},
    )


# --------------------------------------------------------------------------
# simplex


def probe_budget(N: int, n: int) -> int:
    """Worst-case probe count ``binom(N + n + 1, n)`` of the unlocalized nested search."""
    if N < 0 or n < 1 or int(N) != N or int(n) != n:
        raise ValueError("N must be a non-negative and n a positive integer")
    return math.comb(int(N) + int(n) + 1, int(n))


def localized_probe_estimate(n: int, M: float, mu: float, eps: float, const: float = 1.0) -> float:
    """``(n+1) M / eps * max(1, M/mu)^(n-1) * const`` for the pruned, localized search."""
    return (n + 1) * M / eps * max(1.0, M / mu) ** (n - 1) * const


@dataclass(frozen=True)
class SimplexSearchConfig:
    epsilon: float
    mu: float
    nu: float = 1.0
    edge_pruning: bool = True
    localize: bool = True
    shrink_first: bool = False

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be > 0")
        if not self.mu > 0:
            raise ValueError("localization needs mu > 0")
        if not self.nu >= 1:
            raise ValueError("nu must be >= 1")

    def delta_cap(self, n: int) -> float:
        return self.epsilon / (n + 1)

    def level_accuracy(self, n: int) -> float:
        return self.epsilon / (n + 1)

    def noise_budget(self, level: int, n: int) -> float:
        """Noise allowance of nesting level ``level`` (1 = innermost)."""
        return level * self.epsilon / (n + 1)

    def localization_length(self, n: int) -> float:
        """``2^(2 + 1/nu) (eps / (mu (n+1)))^(1/nu)``."""
        return 2 ** (2 + 1 / self.nu) * (self.epsilon / (self.mu * (n + 1))) ** (1 / self.nu)

    def prune_threshold(self, n: int) -> float:
        return 2 * self.epsilon / (self.mu * (n + 1))


def simplex_grid_search(
    oracle,
    params: ClassParams,
    set: Optional[Simplex] = None,
    epsilon: Optional[float] = None,
    cfg: Optional[SimplexSearchConfig] = None,
) -> SolveReport:
    """Nested grid search in barycentric coordinates.

    ``alpha_n`` is the outermost variable and ``alpha_1`` the innermost. Level
    ``j`` uses the step ``eps / ((n+1) M_j)`` with ``M_j`` the coordinate-wise
    Lipschitz constant. After the first probe of a level, the next inner
    subproblem is searched on a window of the localization length centred at
    the previous inner answer (translated along the current coordinate). With
    ``edge_pruning`` a probe whose leftover length is at most
    ``2 eps / (mu (n+1))`` costs one evaluation at the centroid of what is left.
    """
    S = set if set is not None else oracle.instance.set
    if not isinstance(S, Simplex):
        raise ValueError("simplex_grid_search needs a Simplex feasible set")
    if cfg is None:
        if epsilon is None:
            raise ValueError("give epsilon or a SimplexSearchConfig")
        cfg = SimplexSearchConfig(epsilon=epsilon, mu=params.mu if params.mu > 0 else params.M, nu=params.nu)
    eps = cfg.epsilon
    n = S.n
    flags: list[str] = []
    if oracle.delta > cfg.delta_cap(n) * (1 + 1e-12):
        flags.append("out-of-theory:delta")
    if not S.is_unit_apex_form():
        flags.append("not-unit-apex-form")
    pruning = cfg.edge_pruning
    if pruning and cfg.nu != 1:
        pruning = False
        flags.append("warning:pruning-disabled-nu!=1")

    edge_norms = np.linalg.norm(S.edges, axis=1)
    steps = eps / ((n + 1) * coordwise_lipschitz(S, params.M))
    window = cfg.localization_length(n) / edge_norms
    thr = cfg.prune_threshold(n)

    probes = [0] * n
    pruned = [0]
    warm_dists: list[float] = []
    alpha = np.zeros(n)
    start = oracle.calls

    def solve(j, lo, hi, R, warm):
        # level j (0-based, 0 = alpha_1) on [lo, hi]; R = 1 - sum of outer alphas
        ts = grid_points(lo, hi, steps[j])
        probes[j] += len(ts)
        if j == 0:
            A = np.repeat(alpha[None, :], len(ts), axis=0)
            A[:, 0] = ts
            vals = oracle.evaluate_batch(to_cartesian_batch(S, A))
            i = int(np.argmin(vals))
            return float(vals[i]), np.array([ts[i]])
        best_val, best_sol = math.inf, None
        prev = None
        prev_t = None
        for k, t in enumerate(ts):
            rem = max(R - t, 0.0)
            alpha[j] = t
            if pruning and rem <= thr:
                # leftover shrinks with t, so every later probe of this level is pruned too
                tail = ts[k:]
                rems = np.maximum(R - tail, 0.0)
                A = np.repeat(alpha[None, :], len(tail), axis=0)
                A[:, j] = tail
                A[:, :j] = (rems / (j + 1))[:, None]
                vals = oracle.evaluate_batch(to_cartesian_batch(S, A))
                pruned[0] += len(tail)
                for t2, v2, a2 in zip(tail, vals, A):
                    if prev_t is not None:
                        warm_dists.append(abs(t2 - prev_t) * edge_norms[j])
                    if v2 < best_val:
                        best_val, best_sol = float(v2), a2[: j + 1].copy()
                    prev, prev_t = a2[:j].copy(), t2
                break
            if prev is not None and cfg.localize:
                centre = prev[j - 1]
                sub_warm = prev
            elif prev is None and cfg.shrink_first and warm is not None:
                centre = warm[j - 1]
                sub_warm = warm
            else:
                centre = None
                sub_warm = None
            if centre is None:
                lo2, hi2 = 0.0, rem
            else:
                lo2 = max(0.0, centre - window[j - 1] / 2)
                hi2 = min(rem, centre + window[j - 1] / 2)
                if lo2 > hi2:
                    lo2 = hi2 = min(max(centre, 0.0), rem)
            val, inner = solve(j - 1, lo2, hi2, rem, sub_warm)
            alpha[j] = t
            if prev_t is not None:
                warm_dists.append(abs(t - prev_t) * edge_norms[j])
            if val < best_val:
                best_val, best_sol = val, np.append(inner, t)
            prev, prev_t = inner, t
        return best_val, best_sol

    value, sol = solve(n - 1, 0.0, 1.0, 1.0, None)
    x = to_cartesian_batch(S, sol[None, :])[0]
    calls = oracle.calls - start
    return SolveReport(
        algo="simplex",
        x=x.tolist(),
        value=value,
        calls=calls,
        per_level_calls=probes,
        flags=flags,
        eps=eps,
        delta=oracle.delta,
        extra={
            "alphas": sol.tolist(),
            "pruned": pruned[0],
            "leaf_probes": probes[0],
            "noise_budget": [cfg.noise_budget(j, n) for j in range(1, n + 1)],
            "max_warm_start_distance": max(warm_dists, default=0.0),
            "steps": steps.tolist(),
        },
    )
