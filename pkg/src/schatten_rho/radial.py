"""Radial test functions ``f(x) = psi(|x - y|^2)`` and their derivatives.

Two profile families are supported, both bounded with bounded derivatives
of every order on ``[0, inf)``:

* ``constant``: ``psi(r) = a``
* ``gauss_bump``: ``psi(r) = a exp(-r / sigma)``

For ``u = x - y`` and ``r = |u|^2`` the gradient is ``2 psi'(r) u`` and the
Hessian is ``2 psi'(r) I + 4 psi''(r) u u^T``, whose spectrum is
``2 psi'(r)`` with multiplicity ``d - 1`` plus ``2 psi'(r) + 4 psi''(r) r``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Any

import numpy as np
from scipy.optimize import minimize_scalar

from .operators import SymOperator, check_exponent

CONSTANT = "constant"
GAUSS_BUMP = "gauss_bump"


@dataclass(frozen=True)
class RadialProfile:
    family: str
    a: float = 1.0
    sigma: float = 1.0

    def __post_init__(self):
        if self.family not in (CONSTANT, GAUSS_BUMP):
            raise ValueError(f"unknown profile family {self.family!r}")
        if not (math.isfinite(self.a) and math.isfinite(self.sigma)) or self.sigma <= 0:
            raise ValueError("profile needs finite amplitude and sigma > 0")

    @property
    def is_constant(self) -> bool:
        return self.family == CONSTANT or self.a == 0.0

    def psi(self, r):
        if self.family == CONSTANT:
            return self.a + 0.0 * np.asarray(r, dtype=float)
        return self.a * np.exp(-np.asarray(r, dtype=float) / self.sigma)

    def dpsi(self, r):
        if self.family == CONSTANT:
            return 0.0 * np.asarray(r, dtype=float)
        return -(self.a / self.sigma) * np.exp(-np.asarray(r, dtype=float) / self.sigma)

    def d2psi(self, r):
        if self.family == CONSTANT:
            return 0.0 * np.asarray(r, dtype=float)
        return (self.a / self.sigma**2) * np.exp(-np.asarray(r, dtype=float) / self.sigma)

    def with_amplitude(self, a: float) -> "RadialProfile":
        return replace(self, a=float(a))

    def to_json(self) -> dict[str, Any]:
        return {"family": self.family, "a": self.a, "sigma": self.sigma}

    @classmethod
    def from_json(cls, obj: dict[str, Any]) -> "RadialProfile":
        return cls(obj["family"], float(obj.get("a", 1.0)), float(obj.get("sigma", 1.0)))


@dataclass(frozen=True)
class RadialFunction:
    center: np.ndarray
    profile: RadialProfile

    def __post_init__(self):
        c = np.array(self.center, dtype=float)
        if c.ndim != 1 or c.size == 0 or not np.all(np.isfinite(c)):
            raise ValueError("center must be a finite nonempty vector")
        c.setflags(write=False)
        object.__setattr__(self, "center", c)

    @property
    def dim(self) -> int:
        return self.center.size

    def offset(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.dim:
            raise ValueError(f"point of length {x.shape[-1]} does not match dimension {self.dim}")
        return x - self.center

    def __call__(self, x):
        u = self.offset(x)
        return self.profile.psi(np.sum(u * u, axis=-1))

    def padded(self, dim: int) -> "RadialFunction":
        return RadialFunction(_pad(self.center, dim), self.profile)

    def scaled(self, factor: float) -> "RadialFunction":
        return RadialFunction(self.center, self.profile.with_amplitude(self.profile.a * factor))

    def to_json(self) -> dict[str, Any]:
        return {"center": self.center.tolist(), "profile": self.profile.to_json()}

    @classmethod
    def from_json(cls, obj: dict[str, Any]) -> "RadialFunction":
        return cls(obj["center"], RadialProfile.from_json(obj["profile"]))


def _pad(v, dim: int) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.size > dim:
        raise ValueError(f"cannot embed a length-{v.size} vector into dimension {dim}")
    return np.concatenate([v, np.zeros(dim - v.size)])


def evaluate(f: RadialFunction, x) -> float:
    return float(f(x))


def gradient(f: RadialFunction, x) -> np.ndarray:
    u = f.offset(x)
    return 2.0 * float(f.profile.dpsi(u @ u)) * u


def hessian_from_derivatives(d1: float, d2: float, u) -> SymOperator:
    """Hessian of ``x -> psi(|x - y|^2)`` given ``psi'(r)``, ``psi''(r)`` and ``u = x - y``."""
    return SymOperator.scalar_plus_rank_one(2.0 * d1, 4.0 * d2, u)


def hessian_operator(f: RadialFunction, x) -> SymOperator:
    u = f.offset(x)
    r = float(u @ u)
    return hessian_from_derivatives(float(f.profile.dpsi(r)), float(f.profile.d2psi(r)), u)


def _two_point_norm(c, top, dim: int, p: float):
    """Schatten-p norm of the spectrum ``{c (x dim-1), top}``; vectorized in c, top."""
    c = np.abs(np.asarray(c, dtype=float))
    top = np.abs(np.asarray(top, dtype=float))
    if dim == 1:
        return top
    if math.isinf(p):
        return np.maximum(c, top)
    with np.errstate(divide="ignore"):
        log_sum = np.logaddexp(math.log(dim - 1) + p * np.log(c), p * np.log(top))
    return np.exp(log_sum / p)


def hessian_schatten_norm(f: RadialFunction, x, p: float, dim: int | None = None) -> float:
    """Closed-form ``|D^2 f(x)|_p``; ``dim`` larger than ``f.dim`` zero-pads ``x`` and the center."""
    p = check_exponent(p)
    if dim is not None and dim != f.dim:
        f = f.padded(dim)
        x = _pad(x, dim)
    u = f.offset(x)
    r = float(u @ u)
    c = 2.0 * float(f.profile.dpsi(r))
    top = c + 4.0 * float(f.profile.d2psi(r)) * r
    return float(_two_point_norm(c, top, f.dim, p))


def schatten_growth_profile(f: RadialFunction, x_offset, p: float, dims) -> list[tuple[int, float]]:
    """``(d, |D^2 f(y + offset)|_p)`` for each truncation dimension ``d``."""
    p = check_exponent(p)
    dims = [int(d) for d in dims]
    if len(dims) < 3:
        raise ValueError("growth profile needs at least 3 dimensions")
    if any(b <= a for a, b in zip(dims, dims[1:])):
        raise ValueError("dims must be strictly increasing")
    rows = []
    for d in dims:
        g = f.padded(d)
        rows.append((d, hessian_schatten_norm(g, g.center + _pad(x_offset, d), p)))
    return rows


def growth_exponent(rows) -> float:
    """Least-squares log-log slope over the last half of ``rows``; NaN if any norm is zero."""
    tail = rows[len(rows) // 2 :]
    d = np.array([r[0] for r in tail], dtype=float)
    v = np.array([r[1] for r in tail], dtype=float)
    if np.any(v <= 0):
        return float("nan")
    slope, _ = np.polyfit(np.log(d), np.log(v), 1)
    return float(slope)


# -- F_p constraint ------------------------------------------------------------


def constraint_at(profile: RadialProfile, r, p: float, dim: int):
    """``|Df(x)|_op + |D^2 f(x)|_p`` as a function of ``r = |x - y|^2``."""
    r = np.asarray(r, dtype=float)
    d1 = profile.dpsi(r)
    c = 2.0 * d1
    top = c + 4.0 * profile.d2psi(r) * r
    return 2.0 * np.abs(d1) * np.sqrt(r) + _two_point_norm(c, top, dim, p)


_T_GRID = np.concatenate([[0.0], np.geomspace(1e-8, 80.0, 4000)])


def constraint_supremum(profile: RadialProfile, p: float, dim: int) -> tuple[float, float]:
    """Analytic ``sup_x (|Df(x)|_op + |D^2 f(x)|_p)`` and the maximizing ``r``.

    The supremum reduces to one variable ``t = r / sigma``; a log-spaced scan
    brackets the maximum, then golden-section search refines it.
    """
    p = check_exponent(p)
    if profile.is_constant:
        return 0.0, 0.0
    sigma = profile.sigma

    def h(t):
        return constraint_at(profile, sigma * np.asarray(t), p, dim)

    vals = h(_T_GRID)
    k = int(np.argmax(vals))
    if k == 0:
        return float(vals[0]), 0.0
    if k == _T_GRID.size - 1:
        return float(vals[k]), float(sigma * _T_GRID[k])
    lo, mid, hi = _T_GRID[k - 1], _T_GRID[k], _T_GRID[k + 1]
    res = minimize_scalar(lambda t: -float(h(t)), bracket=(lo, mid, hi), method="golden", tol=1e-10)
    t_best, v_best = float(res.x), -float(res.fun)
    if not (lo <= t_best <= hi) or v_best < vals[k]:
        t_best, v_best = float(mid), float(vals[k])
    return v_best, sigma * t_best


def normalized(f: RadialFunction, p: float, dim: int | None = None) -> RadialFunction:
    """Rescale ``f`` so its ``F_p`` constraint value in dimension ``dim`` is exactly 1."""
    sup, _ = constraint_supremum(f.profile, p, f.dim if dim is None else dim)
    if sup == 0.0:
        raise ValueError("constant profiles cannot be normalized")
    return f.scaled(1.0 / sup)
