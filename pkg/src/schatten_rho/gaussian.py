"""Gaussian measures on the truncated Hilbert space."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Any

import numpy as np

from .operators import (
    DIAGONAL,
    EXACT_TOL,
    SCALAR_PLUS_RANK_ONE,
    OperatorError,
    SymOperator,
    operator_sqrt,
    spectral_decompose,
)
from .rng import blocked_draw


class UnsupportedMeasureError(ValueError):
    """Raised when an operation needs a centered measure and gets a shifted one."""


@dataclass(frozen=True)
class GaussianMeasure:
    mean: np.ndarray
    covariance: SymOperator

    def __post_init__(self):
        mean = np.array(self.mean, dtype=float)
        if mean.ndim != 1 or not np.all(np.isfinite(mean)):
            raise OperatorError("mean must be a finite 1-d vector")
        if mean.size != self.covariance.dim:
            raise OperatorError(f"mean has length {mean.size} but covariance has dim {self.covariance.dim}")
        mean.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        # validates positive semidefiniteness
        object.__setattr__(self, "_root", operator_sqrt(self.covariance))

    @classmethod
    def centered(cls, covariance: SymOperator) -> "GaussianMeasure":
        return cls(np.zeros(covariance.dim), covariance)

    @classmethod
    def point_mass(cls, dim: int, at=None) -> "GaussianMeasure":
        mean = np.zeros(dim) if at is None else at
        return cls(mean, SymOperator.zeros(dim))

    @property
    def dim(self) -> int:
        return self.mean.size

    @property
    def sqrt_covariance(self) -> SymOperator:
        return self._root

    def is_centered(self) -> bool:
        return bool(np.all(np.abs(self.mean) <= EXACT_TOL))

    def padded(self, dim: int) -> "GaussianMeasure":
        mean = np.concatenate([self.mean, np.zeros(dim - self.dim)])
        return GaussianMeasure(mean, self.covariance.padded(dim))

    def to_json(self) -> dict[str, Any]:
        return {"mean": self.mean.tolist(), "covariance": self.covariance.to_json()}

    @classmethod
    def from_json(cls, obj: dict[str, Any]) -> "GaussianMeasure":
        return cls(obj["mean"], SymOperator.from_json(obj["covariance"]))

    @cached_property
    def measure_id(self) -> str:
        blob = json.dumps(self.to_json(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


@dataclass(frozen=True)
class SampleBatch:
    count: int
    dim: int
    values: np.ndarray
    seed: int
    measure_id: str

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow([f"x{i}" for i in range(self.dim)])
        for row in self.values:
            writer.writerow([repr(float(v)) for v in row])
        return buf.getvalue()


def sample(G: GaussianMeasure, count: int, seed: int, workers: int = 1) -> SampleBatch:
    """Draw ``count`` rows ``mean + sqrt(S) z`` with ``z`` standard normal."""
    root = G.sqrt_covariance
    d = G.dim

    def draw(rng, size):
        z = rng.standard_normal((size, d))
        return G.mean + root.apply(z)

    values = blocked_draw(count, seed, (0,), draw, workers=workers)
    return SampleBatch(int(count), d, values, int(seed), G.measure_id)


def _spectral_shift(G: GaussianMeasure, center) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Group the law of ``X - center`` by covariance eigenvalue.

    Returns ``(lam, mult, shift_sq)``: for each distinct eigenvalue, its
    multiplicity and the squared norm of the projected shift ``mean - center``
    on that eigenspace.
    """
    shift = G.mean if center is None else G.mean - np.asarray(center, dtype=float)
    if shift.shape != (G.dim,):
        raise OperatorError(f"center must have length {G.dim}")
    cov = G.covariance
    if cov.kind == DIAGONAL:
        lam, inverse = np.unique(cov.diag, return_inverse=True)
        mult = np.bincount(inverse, minlength=lam.size)
        shift_sq = np.bincount(inverse, weights=shift**2, minlength=lam.size)
        return lam, mult, shift_sq
    if cov.kind == SCALAR_PLUS_RANK_ONE:
        c, beta, u = cov.rank_one_parts
        r = float(u @ u)
        total = float(shift @ shift)
        if r == 0.0:
            return np.array([c]), np.array([G.dim]), np.array([total])
        along = float(shift @ u) ** 2 / r
        if G.dim == 1:
            return np.array([c + beta * r]), np.array([1]), np.array([along])
        return (
            np.array([c, c + beta * r]),
            np.array([G.dim - 1, 1]),
            np.array([max(total - along, 0.0), along]),
        )
    dec = spectral_decompose(cov)
    proj = dec.eigenvectors.T @ shift
    return np.clip(dec.eigenvalues, 0.0, None), np.ones(G.dim, dtype=int), proj**2


def sq_dist_samples(G: GaussianMeasure, count: int, seed: int, center=None, workers: int = 1) -> np.ndarray:
    """Exact draws of ``|X - center|^2`` for ``X ~ G``.

    In the covariance eigenbasis the squared distance is a weighted sum of
    (noncentral) chi-square variables, one per distinct eigenvalue, which
    keeps high-dimensional diagonal measures cheap.
    """
    lam, mult, shift_sq = _spectral_shift(G, center)
    const = float(np.sum(shift_sq[lam <= 0.0]))
    live = [(float(l), int(m), float(s)) for l, m, s in zip(lam, mult, shift_sq) if l > 0.0]

    def draw(rng, size):
        out = np.full(size, const)
        for l, m, s in live:
            if s == 0.0:
                out += l * rng.chisquare(m, size)
            else:
                out += l * rng.noncentral_chisquare(m, s / l, size)
        return out

    return blocked_draw(count, seed, (1,), draw, workers=workers)


def second_moment(G: GaussianMeasure) -> float:
    """``E |X|^2 = Tr S + |mean|^2``."""
    return G.covariance.trace() + float(G.mean @ G.mean)


def counterexample_measure(n: int, d: int | None = None) -> GaussianMeasure:
    """Law of ``sum_{i<=n} g_i n^{-1/2} e_i`` embedded in ``R^d``."""
    n = int(n)
    d = n if d is None else int(d)
    if n < 1:
        raise OperatorError(f"n must be positive, got {n}")
    if d < n:
        raise OperatorError(f"truncation dimension {d} is smaller than n = {n}")
    diag = np.zeros(d)
    diag[:n] = 1.0 / n
    return GaussianMeasure.centered(SymOperator.diagonal(diag))


def radial_exp_moment(G: GaussianMeasure, s: float, center=None) -> float:
    """Closed form of ``E exp(-s |X - center|^2)`` for ``s >= 0``.

    Per eigenvalue ``lam`` with projected shift ``mu``:
    ``(1 + 2 s lam)^(-1/2) exp(-s mu^2 / (1 + 2 s lam))``.
    """
    if s < 0:
        raise ValueError("s must be nonnegative")
    lam, mult, shift_sq = _spectral_shift(G, center)
    denom = 1.0 + 2.0 * s * np.clip(lam, 0.0, None)
    log_val = -0.5 * float(np.sum(mult * np.log1p(2.0 * s * np.clip(lam, 0.0, None))))
    log_val -= s * float(np.sum(shift_sq / denom))
    return math.exp(log_val)


def exp_neg_sqnorm(G: GaussianMeasure) -> float:
    """Exact ``E exp(-|X|^2)`` for a centered Gaussian."""
    if not G.is_centered():
        raise UnsupportedMeasureError("exp_neg_sqnorm requires a centered measure")
    return radial_exp_moment(G, 1.0)
