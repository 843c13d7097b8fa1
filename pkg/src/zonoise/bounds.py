"""Upper bounds on the maximum admissible noise level for four convex function classes."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Union

from .problems import ClassParams

CLASSES = ("lip-convex", "lip-sg", "smooth-convex", "smooth-sg")

# constants each class needs besides n and epsilon
REQUIRED = {
    "lip-convex": ("M", "R"),
    "lip-sg": ("M", "mu", "nu"),
    "smooth-convex": ("L", "R"),
    "smooth-sg": ("L", "mu", "nu"),
}


RATE_TERMS = {
    "lip-convex": "eps^2/(sqrt(n) M R)",
    "lip-sg": "mu^(1/nu) eps^(2-1/nu)/(sqrt(n) M)",
    "smooth-convex": "eps^(3/2)/(n^(1/4) sqrt(L) R)",
    "smooth-sg": "mu^(1/nu) eps^(3/2-1/nu)/(n^(1/4) sqrt(L))",
}
DIM_TERM = "eps/n"


class MissingConstant(ValueError):
    def __init__(self, name: str, cls: str):
        super().__init__(f"class {cls} needs the constant {name}")
        self.name = name


@dataclass(frozen=True)
class NoiseBound:
    value: float
    branch: str  # formula of the winning term of the max
    rate_term: float
    dim_term: float
    cls: str

    def to_dict(self) -> dict:
        return {
            "class": self.cls,
            "bound": self.value,
            "branch": self.branch,
            "rate_term": self.rate_term,
            "dim_term": self.dim_term,
        }


def _get(params, name):
    if isinstance(params, Mapping):
        v = params.get(name)
    else:
        v = getattr(params, name, None)
    if name == "mu" and v is not None and v == 0:
        return None
    return v


def noise_bound(cls: str, params: Union[ClassParams, Mapping], epsilon: float) -> NoiseBound:
    """Noise bound of the class at accuracy ``epsilon`` and the branch of the max that wins.

    ``params`` may be a ``ClassParams`` or a plain mapping holding only the
    constants the class needs. Ties go to the ``eps/n`` branch.
    """
    if cls not in CLASSES:
        raise ValueError(f"unknown class {cls!r}; choose from {', '.join(CLASSES)}")
    if not epsilon > 0:
        raise ValueError(f"epsilon must be > 0, got {epsilon}")
    n = _get(params, "n")
    if n is None:
        raise MissingConstant("n", cls)
    c = {}
    for name in REQUIRED[cls]:
        v = _get(params, name)
        if v is None:
            raise MissingConstant(name, cls)
        c[name] = float(v)
    n = int(n)
    eps = float(epsilon)
    inv_nu = 0.0 if math.isinf(c.get("nu", 1.0)) else 1.0 / c.get("nu", 1.0)

    if cls == "lip-convex":
        rate = eps**2 / (math.sqrt(n) * c["M"] * c["R"])
    elif cls == "lip-sg":
        rate = c["mu"] ** inv_nu * eps ** (2 - inv_nu) / (math.sqrt(n) * c["M"])
    elif cls == "smooth-convex":
        rate = eps**1.5 / (n**0.25 * math.sqrt(c["L"]) * c["R"])
    else:
        rate = c["mu"] ** inv_nu * eps ** (1.5 - inv_nu) / (n**0.25 * math.sqrt(c["L"]))
    dim = eps / n
    if rate > dim:
        return NoiseBound(rate, RATE_TERMS[cls], rate, dim, cls)
    return NoiseBound(dim, DIM_TERM, rate, dim, cls)
