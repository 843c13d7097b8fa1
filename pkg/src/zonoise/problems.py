"""Function classes, feasible sets and synthetic test problems with known minimizers."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Callable, Optional, Sequence, Union

import numpy as np
from numpy.typing import NDArray

Array = NDArray[np.float64]

INF = math.inf
_TOL = 1e-12

FAMILIES = ("cone", "quadratic", "pwl", "separable-pwl")


@dataclass(frozen=True)
class ClassParams:
    """Constants of a function class.

    ``L`` is optional (only smooth classes need it). ``nu`` may be ``math.inf``.
    """

    n: int
    M: float
    R: float
    L: Optional[float] = None
    mu: float = 0.0
    nu: float = 1.0

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"n must be a positive integer, got {self.n}")
        if not self.M > 0:
            raise ValueError(f"M must be > 0, got {self.M}")
        if not self.R > 0:
            raise ValueError(f"R must be > 0, got {self.R}")
        if self.L is not None and not self.L > 0:
            raise ValueError(f"L must be > 0 when given, got {self.L}")
        if self.mu < 0:
            raise ValueError(f"mu must be >= 0, got {self.mu}")
        if not self.nu >= 1:
            raise ValueError(f"nu must lie in [1, inf], got {self.nu}")
        if self.mu > 0 and self.nu == 1 and not self.M > self.mu / 2:
            raise ValueError(
                f"a (mu, 1)-strongly-growing M-Lipschitz function needs M > mu/2 "
                f"(M={self.M}, mu={self.mu})"
            )

    @property
    def inv_nu(self) -> float:
        return 0.0 if math.isinf(self.nu) else 1.0 / self.nu

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "M": self.M,
            "R": self.R,
            "L": self.L,
            "mu": self.mu,
            "nu": "inf" if math.isinf(self.nu) else self.nu,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ClassParams":
        nu = d.get("nu", 1.0)
        nu = INF if nu in ("inf", "Infinity") else float(nu)
        L = d.get("L")
        return cls(
            n=int(d["n"]),
            M=float(d["M"]),
            R=float(d["R"]),
            L=None if L is None else float(L),
            mu=float(d.get("mu", 0.0)),
            nu=nu,
        )


# --------------------------------------------------------------------------
# feasible sets


@dataclass(frozen=True)
class Interval:
    a: float
    b: float

    def __post_init__(self):
        if not self.a < self.b:
            raise ValueError(f"empty or degenerate interval [{self.a}, {self.b}]")

    @property
    def dim(self) -> int:
        return 1

    @property
    def length(self) -> float:
        return self.b - self.a

    def center(self) -> Array:
        return np.array([(self.a + self.b) / 2])

    def contains(self, x, tol: float = 1e-9) -> NDArray[np.bool_]:
        x = np.asarray(x, dtype=float)
        t = x[..., 0]
        return (t >= self.a - tol) & (t <= self.b + tol)

    def project(self, x) -> Array:
        return np.clip(np.asarray(x, dtype=float), self.a, self.b)

    def sample(self, rng: np.random.Generator, size: int) -> Array:
        return rng.uniform(self.a, self.b, size=(size, 1))

    def farthest_distance(self, point) -> float:
        t = float(np.asarray(point, dtype=float).reshape(-1)[0])
        return max(abs(t - self.a), abs(self.b - t))

    def diameter(self) -> float:
        return self.length

    def to_dict(self) -> dict:
        return {"type": "interval", "a": self.a, "b": self.b}


@dataclass(frozen=True)
class Box:
    intervals: tuple

    def __post_init__(self):
        ivs = tuple(iv if isinstance(iv, Interval) else Interval(*iv) for iv in self.intervals)
        if not ivs:
            raise ValueError("a box needs at least one interval")
        object.__setattr__(self, "intervals", ivs)

    @classmethod
    def cube(cls, n: int, a: float = -1.0, b: float = 1.0) -> "Box":
        return cls(tuple(Interval(a, b) for _ in range(n)))

    @property
    def dim(self) -> int:
        return len(self.intervals)

    @property
    def lower(self) -> Array:
        return np.array([iv.a for iv in self.intervals])

    @property
    def upper(self) -> Array:
        return np.array([iv.b for iv in self.intervals])

    def center(self) -> Array:
        return (self.lower + self.upper) / 2

    def contains(self, x, tol: float = 1e-9) -> NDArray[np.bool_]:
        x = np.asarray(x, dtype=float)
        return np.all((x >= self.lower - tol) & (x <= self.upper + tol), axis=-1)

    def project(self, x) -> Array:
        return np.clip(np.asarray(x, dtype=float), self.lower, self.upper)

    def sample(self, rng: np.random.Generator, size: int) -> Array:
        return rng.uniform(self.lower, self.upper, size=(size, self.dim))

    def farthest_distance(self, point) -> float:
        p = np.asarray(point, dtype=float)
        far = np.maximum(np.abs(p - self.lower), np.abs(self.upper - p))
        return float(np.linalg.norm(far))

    def diameter(self) -> float:
        return float(np.linalg.norm(self.upper - self.lower))

    def to_dict(self) -> dict:
        return {"type": "box", "intervals": [[iv.a, iv.b] for iv in self.intervals]}


@dataclass(frozen=True)
class Ball:
    center_point: tuple
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center_point", tuple(float(c) for c in self.center_point))
        if not self.radius > 0:
            raise ValueError(f"ball radius must be > 0, got {self.radius}")

    @property
    def dim(self) -> int:
        return len(self.center_point)

    def center(self) -> Array:
        return np.array(self.center_point)

    def contains(self, x, tol: float = 1e-9) -> NDArray[np.bool_]:
        x = np.asarray(x, dtype=float)
        return np.linalg.norm(x - self.center(), axis=-1) <= self.radius + tol

    def project(self, x) -> Array:
        x = np.asarray(x, dtype=float)
        c = self.center()
        d = x - c
        r = np.linalg.norm(d, axis=-1, keepdims=True)
        scale = np.where(r > self.radius, self.radius / np.maximum(r, 1e-300), 1.0)
        return c + d * scale

    def sample(self, rng: np.random.Generator, size: int) -> Array:
        return self.center() + self.radius * uniform_in_ball(rng, size, self.dim)

    def farthest_distance(self, point) -> float:
        return float(np.linalg.norm(np.asarray(point, dtype=float) - self.center()) + self.radius)

    def diameter(self) -> float:
        return 2 * self.radius

    def to_dict(self) -> dict:
        return {"type": "ball", "center": list(self.center_point), "radius": self.radius}


@dataclass(frozen=True)
class Simplex:
    """Simplex spanned by ``vertices`` (shape ``(n+1, d)``), last vertex is the apex ``p_{n+1}``."""

    vertices: tuple

    def __post_init__(self):
        V = np.asarray(self.vertices, dtype=float)
        if V.ndim != 2 or V.shape[0] < 2:
            raise ValueError("a simplex needs an (n+1, d) array of vertices with n >= 1")
        edges = V[:-1] - V[-1]
        if np.linalg.matrix_rank(edges, tol=1e-10) != V.shape[0] - 1:
            raise ValueError("simplex vertices are not affinely independent")
        object.__setattr__(self, "vertices", tuple(tuple(map(float, v)) for v in V))

    @classmethod
    def corner(cls, n: int) -> "Simplex":
        """``conv{e_1, ..., e_n, 0}`` in R^n: unit vertex norms, apex at the origin."""
        return cls(tuple(map(tuple, np.vstack([np.eye(n), np.zeros(n)]))))

    @cached_property
    def V(self) -> Array:
        V = np.asarray(self.vertices, dtype=float)
        V.flags.writeable = False
        return V

    @property
    def n(self) -> int:
        return len(self.vertices) - 1

    @property
    def dim(self) -> int:
        return len(self.vertices[0])

    @cached_property
    def edges(self) -> Array:
        E = self.V[:-1] - self.V[-1]
        E.flags.writeable = False
        return E

    @cached_property
    def _orthonormal(self) -> bool:
        E = self.edges
        return bool(np.allclose(E @ E.T, np.eye(self.n), atol=1e-12))

    def is_unit_apex_form(self, tol: float = 1e-9) -> bool:
        """True when ``|p_i| = 1`` for i <= n and ``p_{n+1} = 0``."""
        V = self.V
        return bool(
            np.allclose(np.linalg.norm(V[:-1], axis=1), 1.0, atol=tol)
            and np.allclose(V[-1], 0.0, atol=tol)
        )

    def has_orthonormal_edges(self) -> bool:
        return self._orthonormal

    def center(self) -> Array:
        return self.V.mean(axis=0)

    def barycentric(self, x) -> Array:
        """Least-squares recovery of ``alpha_1..alpha_n`` from cartesian points."""
        x = np.asarray(x, dtype=float)
        if self._orthonormal:
            return (x - self.V[-1]) @ self.edges.T
        rhs = (x - self.V[-1]).reshape(-1, self.dim).T
        sol, *_ = np.linalg.lstsq(self.edges.T, rhs, rcond=None)
        return sol.T.reshape(x.shape[:-1] + (self.n,))

    def contains(self, x, tol: float = 1e-9) -> NDArray[np.bool_]:
        x = np.asarray(x, dtype=float)
        alphas = self.barycentric(x)
        inside = np.all(alphas >= -tol, axis=-1) & (alphas.sum(axis=-1) <= 1 + tol)
        if self.dim == self.n:
            return inside
        resid = np.abs(alphas @ self.edges + self.V[-1] - x).max(axis=-1)
        return inside & (resid <= tol * max(1.0, float(np.abs(self.V).max())))

    def project(self, x) -> Array:
        if not self.has_orthonormal_edges():
            raise ValueError("Euclidean projection is only implemented for simplices with orthonormal edges")
        x = np.asarray(x, dtype=float)
        a = (x - self.V[-1]) @ self.edges.T
        return project_capped_simplex(a) @ self.edges + self.V[-1]

    def sample(self, rng: np.random.Generator, size: int) -> Array:
        w = rng.dirichlet(np.ones(self.n + 1), size=size)
        return w @ self.V

    def farthest_distance(self, point) -> float:
        p = np.asarray(point, dtype=float)
        return float(np.linalg.norm(self.V - p, axis=1).max())

    def diameter(self) -> float:
        V = self.V
        return float(np.linalg.norm(V[:, None, :] - V[None, :, :], axis=-1).max())

    def to_dict(self) -> dict:
        return {"type": "simplex", "vertices": [list(v) for v in self.vertices]}


FeasibleSet = Union[Interval, Box, Ball, Simplex]


def set_from_dict(d: dict) -> FeasibleSet:
    kind = d["type"]
    if kind == "interval":
        return Interval(float(d["a"]), float(d["b"]))
    if kind == "box":
        return Box(tuple(Interval(float(a), float(b)) for a, b in d["intervals"]))
    if kind == "ball":
        return Ball(tuple(d["center"]), float(d["radius"]))
    if kind == "simplex":
        return Simplex(tuple(tuple(v) for v in d["vertices"]))
    raise ValueError(f"unknown feasible set type {kind!r}")


def project_capped_simplex(a: Array) -> Array:
    """Project rows of ``a`` onto ``{alpha >= 0, sum(alpha) <= 1}``."""
    a = np.atleast_2d(np.asarray(a, dtype=float))
    out = np.maximum(a, 0.0)
    over = out.sum(axis=1) > 1
    if np.any(over):
        v = a[over]
        u = -np.sort(-v, axis=1)
        css = np.cumsum(u, axis=1) - 1
        k = np.arange(1, v.shape[1] + 1)
        cond = u - css / k > 0
        rho = cond.shape[1] - 1 - np.argmax(cond[:, ::-1], axis=1)
        theta = css[np.arange(len(v)), rho] / (rho + 1)
        out[over] = np.maximum(v - theta[:, None], 0.0)
    return out


def uniform_in_ball(rng: np.random.Generator, size: int, dim: int) -> Array:
    """Uniform samples from the unit ball: normalized Gaussian direction, radius ``U**(1/dim)``."""
    g = rng.standard_normal((size, dim))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    r = rng.random(size) ** (1.0 / dim)
    return g * r[:, None]


# --------------------------------------------------------------------------
# barycentric coordinates


@dataclass(frozen=True)
class BarycentricPoint:
    alphas: tuple

    def __post_init__(self):
        a = np.asarray(self.alphas, dtype=float).reshape(-1)
        if np.any(a < -_TOL) or a.sum() > 1 + _TOL:
            raise ValueError(f"invalid barycentric coordinates {a.tolist()}: need alpha_i >= 0 and sum <= 1")
        object.__setattr__(self, "alphas", tuple(map(float, a)))

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.alphas, dtype=dtype)


def to_cartesian(simplex: Simplex, alphas) -> Array:
    """``x(alpha) = sum_i alpha_i p_i + (1 - sum_i alpha_i) p_{n+1}``."""
    if not isinstance(alphas, BarycentricPoint):
        alphas = BarycentricPoint(tuple(np.asarray(alphas, dtype=float).reshape(-1)))
    a = np.asarray(alphas.alphas)
    if a.size != simplex.n:
        raise ValueError(f"expected {simplex.n} barycentric coordinates, got {a.size}")
    V = simplex.V
    return a @ V[:-1] + (1.0 - a.sum()) * V[-1]


def to_cartesian_batch(simplex: Simplex, alphas: Array) -> Array:
    """Unchecked vectorised ``to_cartesian`` for internal use."""
    V = simplex.V
    return alphas @ V[:-1] + (1.0 - alphas.sum(axis=-1, keepdims=True)) * V[-1]


def coordwise_lipschitz(simplex: Simplex, M: float) -> Array:
    """Lipschitz constant of ``alpha -> f(x(alpha))`` along each barycentric coordinate."""
    return M * np.linalg.norm(simplex.edges, axis=1)


# --------------------------------------------------------------------------
# problem instances


@dataclass(frozen=True)
class ProblemInstance:
    """Objective on a feasible set with its minimizer stored by construction.

    ``objective`` maps arrays of shape ``(..., d)`` to shape ``(...)`` and is
    defined on all of R^d, not just on ``set``.
    """

    objective: Callable[[Array], Array]
    set: FeasibleSet
    params: ClassParams
    minimizer: Optional[Array]
    optimum: float
    description: dict = field(default_factory=dict, compare=False)

    def __call__(self, x) -> Array:
        return self.objective(np.asarray(x, dtype=float))

    def gap(self, x) -> float:
        return float(self.objective(np.asarray(x, dtype=float))) - self.optimum

    def to_dict(self) -> dict:
        if not self.description:
            raise ValueError("instance was not built by make_instance and cannot be serialized")
        return dict(self.description)


def _cone(M: float, xstar: Array):
    def f(x):
        return M * np.linalg.norm(x - xstar, axis=-1)

    return f


def _power_regularizer(mu: float, nu: float, xstar: Array):
    def r(x):
        return 0.5 * mu * np.linalg.norm(x - xstar, axis=-1) ** nu

    return r


def _quadratic(mu: float, xstar: Array):
    def f(x):
        d = x - xstar
        return 0.5 * mu * np.einsum("...i,...i->...", d, d)

    return f


@dataclass(frozen=True)
class MaxAffine:
    """``t -> max_j (slopes[j] * t + intercepts[j])``, a convex piecewise-linear function."""

    slopes: Array
    intercepts: Array

    def __call__(self, t: Array) -> Array:
        t = np.asarray(t, dtype=float)
        return np.max(t[..., None] * self.slopes + self.intercepts, axis=-1)

    def argmin(self, a: float, b: float) -> float:
        """Exact minimizer on ``[a, b]``: the minimum sits at an endpoint or a crossing of two pieces."""
        cands = [a, b]
        s, c = self.slopes, self.intercepts
        k = len(s)
        for i in range(k):
            for j in range(i + 1, k):
                if s[i] != s[j]:
                    t = (c[j] - c[i]) / (s[i] - s[j])
                    if a < t < b:
                        cands.append(t)
        cands = np.array(cands)
        vals = self(cands)
        return float(cands[np.argmin(vals)])


def random_max_affine(rng: np.random.Generator, slope_bound: float, a: float, b: float, pieces: int = 8) -> MaxAffine:
    """Seeded max of ``pieces`` affine functions with slopes clipped to ``[-slope_bound, slope_bound]``.

    One piece falls and one rises so that the minimum is usually interior.
    """
    if pieces < 2:
        raise ValueError(f"need at least 2 pieces, got {pieces}")
    slopes = np.clip(rng.uniform(-1.2, 1.2, size=pieces) * slope_bound, -slope_bound, slope_bound)
    slopes[0] = -abs(slopes[0]) - 0.05 * slope_bound
    slopes[1] = abs(slopes[1]) + 0.05 * slope_bound
    slopes = np.clip(slopes, -slope_bound, slope_bound)
    # each piece passes through a random anchor point (t_j, v_j)
    anchors = rng.uniform(a, b, size=pieces)
    levels = rng.uniform(0.0, 0.5, size=pieces) * slope_bound * (b - a)
    intercepts = levels - slopes * anchors
    return MaxAffine(slopes, intercepts)


def _random_point(rng: np.random.Generator, S: FeasibleSet) -> Array:
    return S.sample(rng, 1)[0]


def make_instance(
    kind: str,
    params: ClassParams,
    set: FeasibleSet,
    seed: int = 0,
    *,
    minimizer: Optional[Sequence[float]] = None,
    pieces: int = 8,
) -> ProblemInstance:
    """Build a test problem of a given family whose class constants are exactly ``params``.

    Families: ``cone`` (``M |x - x*|``, needs ``mu = M, nu = 1``), ``quadratic``
    (``mu/2 |x - x*|^2``, needs ``L = mu, nu = 2``), ``pwl`` (seeded max-affine on an
    interval, ``mu = 0``) and ``separable-pwl`` (sum of per-coordinate max-affine
    functions on a box, each ``M/sqrt(n)``-Lipschitz so the sum is ``M``-Lipschitz).
    """
    if kind not in FAMILIES:
        raise ValueError(f"unknown instance family {kind!r}; expected one of {FAMILIES}")
    if params.n != set.dim and not (isinstance(set, Simplex) and params.n in (set.n, set.dim)):
        raise ValueError(f"params.n = {params.n} does not match the set dimension {set.dim}")
    rng = np.random.default_rng(seed)
    desc = {
        "kind": kind,
        "params": params.to_dict(),
        "seed": int(seed),
        "set": set.to_dict(),
        "pieces": pieces,
    }
    if minimizer is not None:
        desc["minimizer"] = [float(v) for v in minimizer]

    if kind == "cone":
        if params.mu != params.M or params.nu != 1:
            raise ValueError(f"kind 'cone' needs mu = M and nu = 1 (got mu={params.mu}, M={params.M}, nu={params.nu})")
        xstar = _placed_minimizer(rng, set, minimizer)
        _check_radius(params, set, xstar)
        return ProblemInstance(_cone(params.M, xstar), set, params, xstar, 0.0, desc)

    if kind == "quadratic":
        if params.nu != 2 or not params.mu > 0:
            raise ValueError(f"kind 'quadratic' needs mu > 0 and nu = 2 (got mu={params.mu}, nu={params.nu})")
        if params.L is not None and params.L != params.mu:
            raise ValueError(f"kind 'quadratic' has L = mu; got L={params.L}, mu={params.mu}")
        xstar = _placed_minimizer(rng, set, minimizer)
        _check_radius(params, set, xstar)
        reach = set.farthest_distance(xstar)
        if params.mu * reach > params.M * (1 + 1e-12):
            raise ValueError(
                f"quadratic with mu={params.mu} is only {params.mu * reach:.6g}-Lipschitz on this set; M={params.M} is too small"
            )
        params = replace(params, L=params.mu)
        return ProblemInstance(_quadratic(params.mu, xstar), set, params, xstar, 0.0, desc)

    if kind == "pwl":
        if not isinstance(set, Interval):
            raise ValueError("kind 'pwl' lives on an Interval")
        if params.mu != 0:
            raise ValueError("kind 'pwl' makes no strong-growth claim; use mu = 0")
        if minimizer is not None:
            raise ValueError("kind 'pwl' places its minimizer from the seed")
        g = random_max_affine(rng, params.M, set.a, set.b, pieces)
        t = g.argmin(set.a, set.b)
        xstar = np.array([t])
        _check_radius(params, set, xstar)

        def f(x, g=g):
            return g(x[..., 0])

        return ProblemInstance(f, set, params, xstar, float(g(np.array(t))), desc)

    # separable-pwl
    if not isinstance(set, Box):
        raise ValueError("kind 'separable-pwl' lives on a Box")
    if params.mu != 0:
        raise ValueError("kind 'separable-pwl' makes no strong-growth claim; use mu = 0")
    if minimizer is not None:
        raise ValueError("kind 'separable-pwl' places its minimizer from the seed")
    slope = params.M / math.sqrt(set.dim)
    parts = [random_max_affine(rng, slope, iv.a, iv.b, pieces) for iv in set.intervals]
    xstar = np.array([g.argmin(iv.a, iv.b) for g, iv in zip(parts, set.intervals)])
    _check_radius(params, set, xstar)

    def fsep(x, parts=tuple(parts)):
        return sum(g(x[..., i]) for i, g in enumerate(parts))

    return ProblemInstance(fsep, set, params, xstar, float(fsep(xstar)), desc)


def _placed_minimizer(rng, S: FeasibleSet, minimizer) -> Array:
    if minimizer is None:
        return _random_point(rng, S)
    x = np.asarray(minimizer, dtype=float).reshape(-1)
    if x.shape != (S.dim,) or not bool(S.contains(x)):
        raise ValueError(f"requested minimizer {x.tolist()} is not a point of the feasible set")
    return x


def _check_radius(params: ClassParams, S: FeasibleSet, xstar: Array) -> None:
    reach = S.farthest_distance(xstar)
    if reach > params.R * (1 + 1e-12):
        raise ValueError(
            f"R={params.R} does not bound the distance from the minimizer to the set ({reach:.6g})"
        )


def instance_from_dict(d: dict) -> ProblemInstance:
    """Rebuild an instance from its JSON description (bit-exact replay)."""
    inst = make_instance(
        d["kind"],
        ClassParams.from_dict(d["params"]),
        set_from_dict(d["set"]),
        int(d["seed"]),
        minimizer=d.get("minimizer"),
        pieces=int(d.get("pieces", 8)),
    )
    reg = d.get("regularizer")
    if reg is not None:
        inst = regularize_instance(inst, float(reg["mu"]), float(reg["nu"]))
    return inst


def regularize_instance(inst: ProblemInstance, mu: float, nu: float) -> ProblemInstance:
    """``f(x) = g(x) + mu/2 |x - x*|^nu`` with the same minimizer and optimum as ``g``."""
    if inst.minimizer is None:
        raise ValueError("regularization needs a known minimizer x*")
    if mu < 0 or not nu >= 1:
        raise ValueError(f"need mu >= 0 and nu >= 1, got mu={mu}, nu={nu}")
    xstar = np.asarray(inst.minimizer)
    base = inst.objective
    reg = _power_regularizer(mu, nu, xstar)

    def f(x):
        return base(x) + reg(x)

    reach = inst.set.farthest_distance(xstar)
    # Lipschitz constant grows by the regularizer's slope on the set
    extra = 0.5 * mu * nu * reach ** (nu - 1) if mu > 0 else 0.0
    params = replace(inst.params, M=inst.params.M + extra, mu=mu, nu=nu)
    desc = dict(inst.description)
    if desc:
        desc["regularizer"] = {"mu": mu, "nu": nu}
    return ProblemInstance(f, inst.set, params, xstar, inst.optimum, desc)
