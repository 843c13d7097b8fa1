"""Noisy zeroth-order oracles: noise policies, the regularization wrapper and ball smoothing."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import IO, Optional

import numpy as np

from .problems import Array, ProblemInstance, regularize_instance, uniform_in_ball

# --------------------------------------------------------------------------
# noise policies


@dataclass(frozen=True)
class Zero:
    delta: float = 0.0

    def make_source(self):
        return lambda X, fX, inst: np.zeros(len(X))


@dataclass(frozen=True)
class UniformBounded:
    """``xi ~ U[-delta, delta]``.

    With ``quenched=True`` the noise is a fixed function of the query point
    (hash of its coordinates and the seed), so two runs that probe the same
    point see the same value no matter how many calls came before.
    """

    delta: float
    seed: int = 0
    quenched: bool = False

    def __post_init__(self):
        if self.delta < 0:
            raise ValueError(f"delta must be >= 0, got {self.delta}")

    def make_source(self):
        if self.quenched:
            return lambda X, fX, inst: self.delta * (2.0 * _hash_uniform(X, self.seed) - 1.0)
        rng = np.random.default_rng(self.seed)
        return lambda X, fX, inst: rng.uniform(-self.delta, self.delta, size=len(X))


@dataclass(frozen=True)
class AdversarialSign:
    """Ground-truth adversary: ``+delta`` where the true gap is at most ``threshold``, ``-delta`` elsewhere.

    Near-optimal points look worse and poor points look better.
    """

    delta: float
    threshold: float = 0.0

    def make_source(self):
        def src(X, fX, inst: ProblemInstance):
            return np.where(fX - inst.optimum <= self.threshold, self.delta, -self.delta)

        return src


@dataclass(frozen=True)
class AdversarialPlanted:
    """Deterministic planted noise: ``+delta`` on ``boosted`` points, ``-delta`` on ``suppressed`` ones, 0 elsewhere.

    ``default`` sets the noise sign (-1, 0 or +1) for points in neither list.
    """

    delta: float
    boosted: tuple = ()
    suppressed: tuple = ()
    default: int = 0
    atol: float = 1e-12

    def __post_init__(self):
        object.__setattr__(self, "boosted", _as_points(self.boosted))
        object.__setattr__(self, "suppressed", _as_points(self.suppressed))
        if self.default not in (-1, 0, 1):
            raise ValueError("default must be -1, 0 or +1")

    def make_source(self):
        B = np.array(self.boosted, dtype=float) if self.boosted else None
        S = np.array(self.suppressed, dtype=float) if self.suppressed else None

        def hits(X, P):
            if P is None:
                return np.zeros(len(X), dtype=bool)
            d = np.abs(X[:, None, :] - P[None, :, :]).max(axis=-1)
            return (d <= self.atol).any(axis=1)

        def src(X, fX, inst):
            out = np.full(len(X), float(self.default) * self.delta)
            out[hits(X, B)] = self.delta
            out[hits(X, S)] = -self.delta
            return out

        return src


@dataclass(frozen=True)
class AdversarialBatch:
    """Adaptive worst case against argmin selection, decided per query batch.

    Inside every batch the point with the largest true gap that can still be
    made the batch argmin (lowest index wins ties) gets ``-delta``, the rest
    ``+delta``. A 1-D grid search queries one batch, so there this is the
    exhaustive adversary; a nested search gets dragged away from ``x*`` level
    by level. The same point may see different noise in different batches.
    """

    delta: float

    def make_source(self):
        def src(X, fX, inst: ProblemInstance):
            out = np.full(len(X), self.delta)
            out[worst_selectable(fX, self.delta, fX - inst.optimum)] = -self.delta
            return out

        return src


def worst_selectable(values: Array, delta: float, score: Array) -> int:
    """Index maximizing ``score`` among points that ``-delta``/``+delta`` noise can make the argmin."""
    v = np.asarray(values, dtype=float)
    pre = np.minimum.accumulate(np.concatenate([[np.inf], v[:-1]]))
    suf = np.minimum.accumulate(np.concatenate([v[1:], [np.inf]])[::-1])[::-1]
    ok = (v - delta < pre + delta) & (v - delta <= suf + delta)
    return int(np.argmax(np.where(ok, score, -np.inf)))


NoisePolicy = (Zero, UniformBounded, AdversarialSign, AdversarialPlanted, AdversarialBatch)


def _as_points(pts) -> tuple:
    return tuple(tuple(float(v) for v in np.atleast_1d(np.asarray(p, dtype=float))) for p in pts)


def _splitmix64(z: np.ndarray) -> np.ndarray:
    z = z + np.uint64(0x9E3779B97F4A7C15)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


def _hash_uniform(X: Array, seed: int) -> Array:
    """Uniform [0, 1) value determined by the bits of each row of ``X`` and ``seed``."""
    X = np.ascontiguousarray(X, dtype=np.float64) + 0.0  # folds -0.0 into 0.0
    bits = X.view(np.uint64).reshape(X.shape)
    with np.errstate(over="ignore"):
        mix = _splitmix64(np.arange(1, X.shape[1] + 1, dtype=np.uint64) + np.uint64(seed & 0xFFFFFFFF) * np.uint64(0x100000001B3))
        h = (_splitmix64(bits) * (mix | np.uint64(1))).sum(axis=1, dtype=np.uint64)
        h = _splitmix64(h ^ mix[0])
    return (h >> np.uint64(11)).astype(np.float64) * 2.0**-53


# --------------------------------------------------------------------------
# oracles


class NoisyOracle:
    """Returns ``f(x) + xi`` with ``|xi| <= delta``; counts every evaluation.

    One algorithm run owns one oracle. ``log`` receives one JSON line per
    evaluation: ``{t, x, value, cumulative_calls}``.
    """

    def __init__(self, instance: ProblemInstance, policy=None, log: Optional[IO[str]] = None):
        self.instance = instance
        self.policy = policy if policy is not None else Zero()
        self.calls = 0
        self.log = log
        self._noise = self.policy.make_source()

    @property
    def delta(self) -> float:
        return float(self.policy.delta)

    @property
    def dim(self) -> int:
        return self.instance.set.dim

    def evaluate(self, x, strict: bool = True) -> float:
        return float(self.evaluate_batch(np.asarray(x, dtype=float)[None, :], strict)[0])

    def evaluate_batch(self, X, strict: bool = True) -> Array:
        """Evaluate rows of ``X``. ``strict=False`` allows points outside the feasible set."""
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.dim:
            raise ValueError(f"expected points of shape (k, {self.dim}), got {X.shape}")
        if strict:
            inside = self.instance.set.contains(X)
            if not np.all(inside):
                bad = X[~inside][0]
                raise ValueError(f"query point {bad.tolist()} lies outside the feasible set")
        fX = np.asarray(self.instance.objective(X), dtype=float)
        xi = self._noise(X, fX, self.instance)
        values = fX + xi
        self._record(X, values)
        return values

    def _record(self, X, values):
        start = self.calls
        self.calls += len(X)
        if self.log is not None:
            for i, (x, v) in enumerate(zip(X, values)):
                t = start + i + 1
                self.log.write(
                    json.dumps({"t": t, "x": x.tolist(), "value": float(v), "cumulative_calls": t}) + "\n"
                )


class RegularizedOracle(NoisyOracle):
    """``O_f(x) = O_g(x) + mu/2 |x - x*|^nu`` on top of an existing oracle.

    Noise comes from ``base`` untouched, so the bound ``delta`` is preserved exactly.
    """

    def __init__(self, base: NoisyOracle, mu: float, nu: float):
        self.base = base
        self.instance = regularize_instance(base.instance, mu, nu)
        self.policy = base.policy
        self.calls = 0
        self.log = None
        self.mu = mu
        self.nu = nu
        self._xstar = np.asarray(self.instance.minimizer)

    def evaluate_batch(self, X, strict: bool = True) -> Array:
        X = np.asarray(X, dtype=float)
        values = self.base.evaluate_batch(X, strict)
        self.calls += len(X)
        return values + 0.5 * self.mu * np.linalg.norm(X - self._xstar, axis=-1) ** self.nu


def regularized_oracle(base: NoisyOracle, mu: float, nu: float) -> RegularizedOracle:
    if base.instance.minimizer is None:
        raise ValueError("the regularized oracle needs the minimizer x* of the base instance")
    return RegularizedOracle(base, mu, nu)


# --------------------------------------------------------------------------
# Monte-Carlo ball smoothing


def _exact(v) -> Fraction:
    if isinstance(v, (int, Fraction)):
        return Fraction(v)
    return Fraction(repr(float(v)))


def mc_sample_count(n: int, T: int, M: float, c1c2: float, beta: float, delta: float) -> int:
    """Samples per smoothed evaluation: ``ceil(n^2 T M^2 (c1 c2)^2 / (beta delta^2) + 1/beta) + 1``.

    Evaluated in exact rational arithmetic on the decimal values of the inputs.
    """
    if delta == 0:
        raise ValueError("delta = 0 needs infinitely many samples")
    if not (0 < beta < 1):
        raise ValueError(f"beta must lie in (0, 1), got {beta}")
    for name, v in (("n", n), ("T", T), ("M", M), ("c1c2", c1c2), ("delta", delta)):
        if not v > 0:
            raise ValueError(f"{name} must be > 0, got {v}")
    n_, T_, M_, c_, b_, d_ = map(_exact, (n, T, M, c1c2, beta, delta))
    value = n_**2 * T_ * M_**2 * c_**2 / (b_ * d_**2) + 1 / b_
    return math.ceil(value) + 1


@dataclass(frozen=True)
class SmoothingOracleConfig:
    """``gamma`` is the smoothing radius (``eps / (2 M)``); ``samples`` the Monte-Carlo size."""

    gamma: float
    samples: int
    T: int = 1
    beta: float = 0.5
    c1c2: float = 1.0
    target_delta: Optional[float] = None
    chunk: int = 1 << 18

    def __post_init__(self):
        if self.gamma < 0:
            raise ValueError(f"gamma must be >= 0, got {self.gamma}")
        if self.samples < 1:
            raise ValueError("samples must be a positive integer")

    @classmethod
    def for_accuracy(cls, eps: float, M: float, samples: int, **kw) -> "SmoothingOracleConfig":
        return cls(gamma=eps / (2 * M), samples=samples, **kw)


class SmoothingOracle:
    """Monte-Carlo estimate ``theta(x)`` of ``E_e g(x + gamma e)``, ``e`` uniform in the unit ball.

    Each evaluation spends ``samples`` calls of the base oracle. Sample points may
    leave the feasible set; the objective is evaluated there by its formula.
    """

    def __init__(self, base: NoisyOracle, cfg: SmoothingOracleConfig, seed: int = 0):
        self.base = base
        self.cfg = cfg
        self.instance = base.instance
        self.calls = 0
        self._rng = np.random.default_rng(seed)
        self.flags: list[str] = []
        n = base.dim
        target = cfg.target_delta if cfg.target_delta is not None else base.delta
        if target > 0:
            self.required_samples = mc_sample_count(n, cfg.T, base.instance.params.M, cfg.c1c2, cfg.beta, target)
            if cfg.samples < self.required_samples:
                self.flags.append("below-sample-count")
        else:
            self.required_samples = None
            self.flags.append("sample-count-unbounded")

    @property
    def delta(self) -> float:
        return self.base.delta

    @property
    def smoothness_constant(self) -> float:
        """``L = 2 sqrt(n) M^2 / eps`` with ``eps = 2 M gamma``."""
        M = self.instance.params.M
        return math.sqrt(self.base.dim) * M / self.cfg.gamma if self.cfg.gamma > 0 else math.inf

    @property
    def approximation_bound(self) -> float:
        """``sup |f_smooth - g| <= eps / 2 = M gamma``."""
        return self.instance.params.M * self.cfg.gamma

    def evaluate(self, x, strict: bool = True) -> float:
        x = np.asarray(x, dtype=float).reshape(-1)
        if strict and not bool(self.instance.set.contains(x)):
            raise ValueError(f"query point {x.tolist()} lies outside the feasible set")
        n = x.size
        total = 0.0
        left = self.cfg.samples
        while left > 0:
            k = min(left, self.cfg.chunk)
            pts = x + self.cfg.gamma * uniform_in_ball(self._rng, k, n)
            total += float(self.base.evaluate_batch(pts, strict=False).sum())
            left -= k
        self.calls += 1
        return total / self.cfg.samples

    def evaluate_batch(self, X, strict: bool = True) -> Array:
        return np.array([self.evaluate(x, strict) for x in np.asarray(X, dtype=float)])


def smoothing_oracle(base: NoisyOracle, cfg: SmoothingOracleConfig, seed: int = 0) -> SmoothingOracle:
    return SmoothingOracle(base, cfg, seed)
