"""Restart schedules for strongly-growing problems and a two-point zeroth-order base solver."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .grid import SolveReport
from .problems import ClassParams, Simplex

# --------------------------------------------------------------------------
# schedules


@dataclass(frozen=True)
class RestartEntry:
    k: int
    regime: int
    delta_k: float
    N_k: float
    eps_k: float
    distance: float  # deterministic bound on the distance to x* used for this restart


@dataclass(frozen=True)
class RestartSchedule:
    case: str  # "lip-sg" or "smooth-sg"
    entries: tuple
    k_total: int
    alpha: float  # failure probability of one restart
    split: float  # gamma (Lipschitz case) or alpha (smooth case)
    params: ClassParams
    epsilon: float

    @property
    def repetitions(self) -> int:
        return repetitions_for(self.alpha)

    def to_rows(self) -> list[dict]:
        return [
            {"k": e.k, "regime": e.regime, "delta_k": e.delta_k, "N_k": e.N_k, "eps_k": e.eps_k}
            for e in self.entries
        ]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=["k", "regime", "delta_k", "N_k", "eps_k"], lineterminator="\r\n")
        w.writeheader()
        for row in self.to_rows():
            w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {
            "case": self.case,
            "k_total": self.k_total,
            "alpha": self.alpha,
            "split": self.split,
            "repetitions": self.repetitions,
            "epsilon": self.epsilon,
            "params": self.params.to_dict(),
            "entries": self.to_rows(),
        }


def repetitions_for(alpha: float) -> int:
    """``ceil(log2(1/alpha))``, at least 1."""
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    return max(1, math.ceil(math.log2(1 / alpha) - 1e-12))


def restart_count(mu: float, R: float, nu: float, epsilon: float) -> int:
    """``ceil(log2(mu R^nu / eps)) - 1``, never below 1."""
    raw = math.log2(mu * R**nu / epsilon)
    return max(1, math.ceil(raw - 1e-12) - 1)


def distance_bound(R: float, nu: float, k: int) -> float:
    """``2^(-k/nu) R``: the distance bound the closed-form noise levels of restart ``k`` are built on."""
    return 2.0 ** (-k / nu) * R


def _check(params: ClassParams, epsilon: float, split: float, alpha: float, need_L: bool):
    if not params.mu > 0:
        raise ValueError("restart schedules need mu > 0")
    if math.isinf(params.nu):
        raise ValueError("restart schedules are undefined for nu = inf")
    if not epsilon > 0:
        raise ValueError("epsilon must be > 0")
    if not 0 < split < 1:
        raise ValueError(f"split factor must lie in (0, 1), got {split}")
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    if need_L and params.L is None:
        raise ValueError("the smooth schedule needs L")


def schedule_lipschitz_sg(
    params: ClassParams, epsilon: float, gamma: float = 0.5, alpha: float = 0.5, *, beta: Optional[float] = None
) -> RestartSchedule:
    """Per-restart ``(delta_k, N_k, eps_k)`` for M-Lipschitz (mu, nu)-strongly-growing problems.

    Regime 1 holds when ``d^(nu-1) >= 4 M / (mu sqrt(n))``. Passing ``beta``
    sets ``alpha = beta / k_total``.
    """
    n, M, R, mu, nu = params.n, params.M, params.R, params.mu, params.nu
    _check(params, epsilon, gamma, alpha if beta is None else 0.5, need_L=False)
    K = restart_count(mu, R, nu, epsilon)
    if beta is not None:
        alpha = beta / K
        _check(params, epsilon, gamma, alpha, need_L=False)
    entries = []
    for k in range(1, K + 1):
        d = distance_bound(R, nu, k)
        eps_k = mu / 4 * 2.0**-k * R**nu
        if nu == 1:
            regime = 1 if n >= 16 * M**2 / mu**2 else 2
        else:
            regime = 1 if d ** (nu - 1) >= 4 * M / (mu * math.sqrt(n)) else 2
        if regime == 1:
            delta = 2.0 ** (-k * (2 - 1 / nu)) * gamma**2 * mu**2 * R ** (2 * nu - 1) / (16 * math.sqrt(n) * M)
        else:
            delta = 2.0**-k * gamma * mu * R**nu / (4 * n)
        N = M**2 * d**2 / ((1 - gamma) ** 2 * eps_k**2)
        entries.append(RestartEntry(k, regime, delta, N, eps_k, d))
    return RestartSchedule("lip-sg", tuple(entries), K, alpha, gamma, params, epsilon)


def schedule_smooth_sg(
    params: ClassParams, epsilon: float, alpha: float = 0.5, *, beta: Optional[float] = None
) -> RestartSchedule:
    """Per-restart ``(delta_k, N_k, eps_k)`` for L-smooth (mu, nu)-strongly-growing problems.

    ``alpha`` is both the noise/iteration split and the failure probability of
    one restart. Regime 1 holds when ``eps_k >= L d^2 / n^(3/2)``; for ``nu < 2``
    the regime-2 restarts come first.
    """
    n, R, mu, nu, L = params.n, params.R, params.mu, params.nu, params.L
    _check(params, epsilon, alpha, alpha, need_L=True)
    K = restart_count(mu, R, nu, epsilon)
    if beta is not None:
        alpha = beta / K
        _check(params, epsilon, alpha, alpha, need_L=True)
    entries = []
    for k in range(1, K + 1):
        d = distance_bound(R, nu, k)
        eps_k = mu / 4 * 2.0**-k * R**nu
        regime = 1 if eps_k >= L * d**2 / n**1.5 else 2
        if regime == 1:
            delta = 2.0 ** (-k * (1.5 - 1 / nu)) * math.sqrt(alpha**3 * mu**3 / (math.sqrt(n) * L)) * R ** (1.5 * nu - 1) / 8
        else:
            delta = 2.0**-k * alpha * mu * R**nu / (4 * n)
        N = math.sqrt(L * d**2 / ((1 - alpha) * eps_k))
        entries.append(RestartEntry(k, regime, delta, N, eps_k, d))
    return RestartSchedule("smooth-sg", tuple(entries), K, alpha, alpha, params, epsilon)


def delta_from_triple(case: str, regime: int, eps_k: float, d: float, params: ClassParams, split: float) -> float:
    """Noise level written through ``(eps_k, d)`` instead of the restart index."""
    n = params.n
    if case == "lip-sg":
        if regime == 1:
            return split**2 * eps_k**2 / (math.sqrt(n) * params.M * d)
        return split * eps_k / n
    if regime == 1:
        return math.sqrt(split**3 * eps_k**3 / (math.sqrt(n) * params.L * d**2))
    return split * eps_k / n


# --------------------------------------------------------------------------
# base solver


@dataclass(frozen=True)
class BaseSolverConfig:
    """Projected two-point method ``x <- P(x - h g)`` with ``g = n (F(x + tau u) - F(x - tau u)) / (2 tau) u``.

    The step is ``h = step_scale * R / (M sqrt(n N))``, or ``step_scale / (n L)``
    when the smoothness constant ``L`` is given. ``N`` counts iterates;
    the answer is the average of ``x_0 .. x_{N-1}``, so ``N = 1`` returns the
    projected start.
    """

    N: int
    tau: float
    M: float
    R: float
    step_scale: float = 1.0
    x0: Optional[tuple] = None
    L: Optional[float] = None

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 1:
            raise ValueError(f"N must be an integer >= 1, got {self.N}")
        if not self.tau > 0:
            raise ValueError(f"tau must be > 0, got {self.tau}")
        if not (self.M > 0 and self.R > 0 and self.step_scale > 0):
            raise ValueError("M, R and step_scale must be > 0")


def _projector(S):
    if isinstance(S, Simplex) and not S.has_orthonormal_edges():
        raise ValueError("Euclidean projection is only available for simplices with orthonormal edges")
    if not hasattr(S, "project"):
        raise ValueError(f"cannot project onto {type(S).__name__}")
    return S.project


def base_solver(oracle, set=None, config: Optional[BaseSolverConfig] = None, seed: int = 0) -> SolveReport:
    """Run the projected two-point method and return the averaged iterate."""
    if config is None:
        raise ValueError("base_solver needs a BaseSolverConfig")
    S = set if set is not None else oracle.instance.set
    project = _projector(S)
    n = S.dim
    rng = np.random.default_rng(seed)
    x = project(np.asarray(config.x0 if config.x0 is not None else S.center(), dtype=float))
    if config.L is not None:
        h = config.step_scale / (n * config.L)
    else:
        h = config.step_scale * config.R / (config.M * math.sqrt(n * config.N))
    tau = config.tau
    start = oracle.calls
    total = x.copy()
    U = rng.standard_normal((config.N - 1, n))
    U /= np.linalg.norm(U, axis=1, keepdims=True)
    for u in U:
        fp, fm = oracle.evaluate_batch(np.stack([x + tau * u, x - tau * u]), strict=False)
        g = n * (fp - fm) / (2 * tau) * u
        x = project(x - h * g)
        total += x
    xbar = total / config.N
    return SolveReport(
        algo="zo-two-point",
        x=xbar.tolist(),
        value=math.nan,
        calls=oracle.calls - start,
        per_level_calls=[oracle.calls - start],
        delta=oracle.delta,
        seed=seed,
        extra={"N": config.N, "step": h, "tau": tau},
    )


# --------------------------------------------------------------------------
# restarts


def restart_solve(
    oracle,
    schedule: RestartSchedule,
    base_cfg: Optional[BaseSolverConfig] = None,
    seed: int = 0,
    *,
    max_iters: int = 10**6,
) -> SolveReport:
    """Run the restarts of ``schedule``; each restart is repeated from the same start.

    Restart ``k`` starts from the previous answer with distance bound
    ``2^(-(k-1)/nu) R``, runs ``ceil(N_k)`` iterations with ``tau = eps_k / (2 M)``
    and keeps the repetition whose output has the smallest noisy value.
    ``base_cfg`` supplies ``step_scale`` and the starting point.

    Smooth schedules count iterations of an accelerated method; the stand-in
    is not accelerated and needs ``n N_k^2`` two-point iterations for the same
    accuracy, which is what it gets, with the smooth step ``1 / (n L)``.
    """
    params = schedule.params
    S = oracle.instance.set
    _projector(S)
    x = np.asarray(base_cfg.x0 if base_cfg is not None and base_cfg.x0 is not None else S.center(), dtype=float)
    x = S.project(x)
    step_scale = base_cfg.step_scale if base_cfg is not None else 1.0
    reps = schedule.repetitions
    seeds = np.random.SeedSequence(seed).spawn(schedule.k_total * reps)
    start = oracle.calls
    flags: list[str] = []
    points = [x.tolist()]
    per_restart = []
    chosen_values = []
    for i, e in enumerate(schedule.entries):
        if oracle.delta > e.delta_k * (1 + 1e-12):
            flags.append(f"out-of-theory:delta@k={e.k}")
        N = math.ceil(e.N_k - 1e-9)
        if schedule.case == "smooth-sg":
            N = math.ceil(params.n * e.N_k**2 - 1e-9)
        if N > max_iters:
            flags.append(f"iteration-cap@k={e.k}")
            N = max_iters
        start_R = distance_bound(params.R, params.nu, e.k - 1)
        cfg = BaseSolverConfig(
            N=max(1, N),
            tau=e.eps_k / (2 * params.M),
            M=params.M,
            R=start_R,
            step_scale=step_scale,
            x0=tuple(x),
            L=params.L if schedule.case == "smooth-sg" else None,
        )
        c0 = oracle.calls
        best_x, best_v = None, math.inf
        for r in range(reps):
            rep_seed = int(seeds[i * reps + r].generate_state(1)[0])
            out = np.asarray(base_solver(oracle, S, cfg, rep_seed).x)
            v = oracle.evaluate(out, strict=False)
            if v < best_v:
                best_x, best_v = out, v
        x = best_x
        points.append(x.tolist())
        chosen_values.append(best_v)
        per_restart.append(oracle.calls - c0)
    return SolveReport(
        algo=f"restart-{schedule.case}",
        x=x.tolist(),
        value=chosen_values[-1],
        calls=oracle.calls - start,
        per_level_calls=per_restart,
        flags=flags,
        eps=schedule.epsilon,
        delta=oracle.delta,
        seed=seed,
        extra={"restart_points": points, "repetitions": reps, "k_total": schedule.k_total},
    )
