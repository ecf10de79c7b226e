"""Self-adjoint operators on a finite truncation of a separable Hilbert space.

An operator lives on ``R^d`` with the standard basis playing the role of an
orthonormal basis ``{e_i}``.  Three storage forms are supported:

* ``dense``: a symmetric ``d x d`` array,
* ``diagonal``: the diagonal entries only,
* ``scalar_plus_rank_one``: ``c I + beta u u^T``.

The structured forms have closed-form spectra which every operation uses
directly; converting to ``dense`` always yields the same answers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any

import numpy as np

# Global tolerances.
EXACT_TOL = 1e-12
SPECTRAL_TOL = 1e-10
DERIVED_TOL = 1e-9

DENSE = "dense"
DIAGONAL = "diagonal"
SCALAR_PLUS_RANK_ONE = "scalar_plus_rank_one"
_KINDS = (DENSE, DIAGONAL, SCALAR_PLUS_RANK_ONE)


class OperatorError(ValueError):
    """Malformed operator or incompatible operands."""


class InvalidExponentError(OperatorError):
    pass


class NotPSDError(OperatorError):
    pass


class AsymmetryError(OperatorError):
    pass


def _finite_array(values, ndim: int, what: str) -> np.ndarray:
    arr = np.array(values, dtype=float)
    if arr.ndim != ndim:
        raise OperatorError(f"{what} must be {ndim}-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise OperatorError(f"{what} has non-finite entries")
    arr.setflags(write=False)
    return arr


def check_exponent(p: float) -> float:
    p = float(p)
    if math.isnan(p) or p < 1:
        raise InvalidExponentError(f"Schatten exponent must lie in [1, inf], got {p}")
    return p


class SymOperator:
    """Immutable self-adjoint operator on ``R^dim``.

    Use the constructors :meth:`dense`, :meth:`diagonal`,
    :meth:`scalar_plus_rank_one`, :meth:`identity` and :meth:`zeros`.
    """

    __slots__ = ("dim", "kind", "_matrix", "_diag", "_c", "_beta", "_u")

    def __init__(self, dim: int, kind: str, *, matrix=None, diag=None, c=0.0, beta=0.0, u=None):
        if kind not in _KINDS:
            raise OperatorError(f"unknown operator repr {kind!r}")
        if int(dim) < 1:
            raise OperatorError(f"dimension must be positive, got {dim}")
        self.dim = int(dim)
        self.kind = kind
        self._matrix = matrix
        self._diag = diag
        self._c = float(c)
        self._beta = float(beta)
        self._u = u

    # -- constructors -----------------------------------------------------

    @classmethod
    def dense(cls, matrix) -> "SymOperator":
        m = _finite_array(matrix, 2, "dense matrix")
        d = m.shape[0]
        if m.shape != (d, d):
            raise OperatorError(f"dense matrix must be square, got shape {m.shape}")
        slack = EXACT_TOL * np.maximum(1.0, np.abs(m))
        if np.any(np.abs(m - m.T) > slack):
            raise AsymmetryError("dense matrix is not symmetric")
        return cls(d, DENSE, matrix=m)

    @classmethod
    def diagonal(cls, entries) -> "SymOperator":
        diag = _finite_array(entries, 1, "diagonal")
        if diag.size == 0:
            raise OperatorError("diagonal must be nonempty")
        return cls(diag.size, DIAGONAL, diag=diag)

    @classmethod
    def scalar_plus_rank_one(cls, c: float, beta: float, u) -> "SymOperator":
        """``c I + beta u u^T``."""
        vec = _finite_array(u, 1, "rank-one vector")
        if vec.size == 0:
            raise OperatorError("rank-one vector must be nonempty")
        if not (math.isfinite(c) and math.isfinite(beta)):
            raise OperatorError("scalar coefficients must be finite")
        return cls(vec.size, SCALAR_PLUS_RANK_ONE, c=c, beta=beta, u=vec)

    @classmethod
    def identity(cls, dim: int, scale: float = 1.0) -> "SymOperator":
        return cls.diagonal(np.full(int(dim), float(scale)))

    @classmethod
    def zeros(cls, dim: int) -> "SymOperator":
        return cls.diagonal(np.zeros(int(dim)))

    # -- views ------------------------------------------------------------

    @property
    def diag(self) -> np.ndarray:
        if self.kind != DIAGONAL:
            raise OperatorError("diag is only defined for diagonal operators")
        return self._diag

    @property
    def rank_one_parts(self) -> tuple[float, float, np.ndarray]:
        if self.kind != SCALAR_PLUS_RANK_ONE:
            raise OperatorError("not a scalar-plus-rank-one operator")
        return self._c, self._beta, self._u

    def to_dense(self) -> np.ndarray:
        if self.kind == DENSE:
            return self._matrix.copy()
        if self.kind == DIAGONAL:
            return np.diag(self._diag)
        return self._c * np.eye(self.dim) + self._beta * np.outer(self._u, self._u)

    def as_dense(self) -> "SymOperator":
        return SymOperator.dense(self.to_dense())

    def eigenvalues(self) -> np.ndarray:
        """Eigenvalues sorted in descending order."""
        if self.kind == DIAGONAL:
            return np.sort(self._diag)[::-1]
        if self.kind == SCALAR_PLUS_RANK_ONE:
            vals, mult = self.spectrum_groups()
            return np.sort(np.repeat(vals, mult))[::-1]
        return np.linalg.eigvalsh(self._matrix)[::-1]

    def spectrum_groups(self) -> tuple[np.ndarray, np.ndarray]:
        """Eigenvalues with multiplicities, without expanding repeated values.

        Only the structured reprs benefit; dense operators return every
        eigenvalue with multiplicity one.
        """
        if self.kind == SCALAR_PLUS_RANK_ONE:
            r = float(self._u @ self._u)
            if self.dim == 1:
                return np.array([self._c + self._beta * r]), np.array([1])
            return np.array([self._c, self._c + self._beta * r]), np.array([self.dim - 1, 1])
        if self.kind == DIAGONAL:
            vals, counts = np.unique(self._diag, return_counts=True)
            return vals, counts
        vals = self.eigenvalues()
        return vals, np.ones(vals.size, dtype=int)

    def apply(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.dim:
            raise OperatorError(f"vector of length {x.shape[-1]} does not match dim {self.dim}")
        if self.kind == DENSE:
            return x @ self._matrix
        if self.kind == DIAGONAL:
            return x * self._diag
        return self._c * x + self._beta * np.multiply.outer(x @ self._u, self._u)

    def trace(self) -> float:
        if self.kind == DIAGONAL:
            return float(np.sum(self._diag))
        if self.kind == SCALAR_PLUS_RANK_ONE:
            return self._c * self.dim + self._beta * float(self._u @ self._u)
        return float(np.trace(self._matrix))

    # -- arithmetic -------------------------------------------------------

    def _check_dim(self, other: "SymOperator") -> None:
        if self.dim != other.dim:
            raise OperatorError(f"dimension mismatch: {self.dim} vs {other.dim}")

    def __add__(self, other: "SymOperator") -> "SymOperator":
        self._check_dim(other)
        if self.kind == DIAGONAL and other.kind == DIAGONAL:
            return SymOperator.diagonal(self._diag + other._diag)
        return SymOperator.dense(self.to_dense() + other.to_dense())

    def __neg__(self) -> "SymOperator":
        return self.scaled(-1.0)

    def __sub__(self, other: "SymOperator") -> "SymOperator":
        return self + (-other)

    def scaled(self, factor: float) -> "SymOperator":
        factor = float(factor)
        if self.kind == DIAGONAL:
            return SymOperator.diagonal(factor * self._diag)
        if self.kind == SCALAR_PLUS_RANK_ONE:
            return SymOperator.scalar_plus_rank_one(factor * self._c, factor * self._beta, self._u)
        return SymOperator.dense(factor * self._matrix)

    def padded(self, dim: int) -> "SymOperator":
        """Embed into ``R^dim`` by acting as zero on the new coordinates."""
        if dim < self.dim:
            raise OperatorError(f"cannot pad dimension {self.dim} down to {dim}")
        if dim == self.dim:
            return self
        if self.kind == DIAGONAL:
            return SymOperator.diagonal(np.concatenate([self._diag, np.zeros(dim - self.dim)]))
        m = np.zeros((dim, dim))
        m[: self.dim, : self.dim] = self.to_dense()
        return SymOperator.dense(m)

    def __repr__(self) -> str:
        return f"SymOperator(dim={self.dim}, kind={self.kind!r})"

    # -- serialization ----------------------------------------------------

    def to_json(self) -> dict[str, Any]:
        if self.kind == DENSE:
            data: Any = self._matrix.tolist()
        elif self.kind == DIAGONAL:
            data = self._diag.tolist()
        else:
            data = {"c": self._c, "beta": self._beta, "u": self._u.tolist()}
        return {"dim": self.dim, "repr": self.kind, "data": data}

    @classmethod
    def from_json(cls, obj: dict[str, Any]) -> "SymOperator":
        try:
            dim, kind, data = int(obj["dim"]), obj["repr"], obj["data"]
        except (KeyError, TypeError, ValueError) as exc:
            raise OperatorError(f"malformed operator JSON: {exc}") from exc
        if kind == DENSE:
            arr = np.asarray(data, dtype=float)
            if arr.ndim == 1:
                arr = arr.reshape(dim, dim)
            op = cls.dense(arr)
        elif kind == DIAGONAL:
            op = cls.diagonal(data)
        elif kind == SCALAR_PLUS_RANK_ONE:
            op = cls.scalar_plus_rank_one(float(data["c"]), float(data["beta"]), data["u"])
        else:
            raise OperatorError(f"unknown operator repr {kind!r}")
        if op.dim != dim:
            raise OperatorError(f"declared dim {dim} does not match data dim {op.dim}")
        return op


@dataclass(frozen=True)
class SpectralDecomposition:
    eigenvalues: np.ndarray  # descending
    eigenvectors: np.ndarray  # orthonormal columns

    def reconstruct(self) -> np.ndarray:
        v = self.eigenvectors
        return (v * self.eigenvalues) @ v.T


def _householder_basis(u: np.ndarray) -> np.ndarray:
    """Orthogonal matrix whose first column is ``u / |u|``."""
    d = u.size
    unit = u / np.linalg.norm(u)
    e1 = np.zeros(d)
    e1[0] = 1.0
    # reflect e1 onto unit; choose the sign that avoids cancellation
    if unit[0] > 0:
        v = e1 + unit
        h = np.eye(d) - 2.0 * np.outer(v, v) / (v @ v)
        return -h
    v = e1 - unit
    if v @ v == 0.0:
        return np.eye(d)
    return np.eye(d) - 2.0 * np.outer(v, v) / (v @ v)


def spectral_decompose(A: SymOperator) -> SpectralDecomposition:
    """Eigen-decomposition with eigenvalues in descending order."""
    if A.kind == DIAGONAL:
        order = np.argsort(-A.diag, kind="stable")
        return SpectralDecomposition(A.diag[order].copy(), np.eye(A.dim)[:, order])
    if A.kind == SCALAR_PLUS_RANK_ONE:
        c, beta, u = A.rank_one_parts
        r = float(u @ u)
        if r == 0.0:
            return SpectralDecomposition(np.full(A.dim, c), np.eye(A.dim))
        q = _householder_basis(u)
        vals = np.full(A.dim, c)
        vals[0] = c + beta * r
        order = np.argsort(-vals, kind="stable")
        return SpectralDecomposition(vals[order], q[:, order])
    vals, vecs = np.linalg.eigh(A.to_dense())
    return SpectralDecomposition(vals[::-1].copy(), vecs[:, ::-1].copy())


def _schatten_from_groups(values: np.ndarray, mult: np.ndarray, p: float) -> float:
    mags = np.abs(values)
    top = float(mags.max()) if mags.size else 0.0
    if top == 0.0:
        return 0.0
    if math.isinf(p):
        return top
    # factor out the largest magnitude so large p cannot overflow
    return top * float(np.sum(mult * (mags / top) ** p)) ** (1.0 / p)


def schatten_norm(A: SymOperator, p: float) -> float:
    """``(sum |lambda_n|^p)^(1/p)``, or the largest ``|lambda_n|`` for ``p = inf``."""
    p = check_exponent(p)
    if A.kind == DIAGONAL and not math.isinf(p):
        return _schatten_from_groups(A.diag, np.ones(A.dim), p)
    vals, mult = A.spectrum_groups()
    return _schatten_from_groups(vals, mult, p)


def operator_sqrt(A: SymOperator) -> SymOperator:
    """The positive semidefinite square root.

    Eigenvalues within ``1e-10 * |A|_op`` of zero are clamped; anything more
    negative raises :class:`NotPSDError`.
    """
    vals, _ = A.spectrum_groups()
    scale = float(np.max(np.abs(vals)))
    floor = -SPECTRAL_TOL * scale
    if vals.min() < floor:
        raise NotPSDError(f"operator has eigenvalue {vals.min():.3e} below {floor:.3e}")

    if A.kind == DIAGONAL:
        return SymOperator.diagonal(np.sqrt(np.clip(A.diag, 0.0, None)))
    if A.kind == SCALAR_PLUS_RANK_ONE:
        c, beta, u = A.rank_one_parts
        r = float(u @ u)
        sc = math.sqrt(max(c, 0.0))
        if r == 0.0:
            return SymOperator.scalar_plus_rank_one(sc, 0.0, u)
        top = math.sqrt(max(c + beta * r, 0.0))
        if A.dim == 1:
            sc = 0.0
        return SymOperator.scalar_plus_rank_one(sc, (top - sc) / r, u)
    dec = spectral_decompose(A)
    lam = np.sqrt(np.clip(dec.eigenvalues, 0.0, None))
    v = dec.eigenvectors
    root = (v * lam) @ v.T
    return SymOperator.dense(0.5 * (root + root.T))


def hs_inner(A: SymOperator, B: SymOperator) -> float:
    """Hilbert-Schmidt inner product ``sum_i <A e_i, B e_i>``."""
    A._check_dim(B)
    if A.kind == DIAGONAL and B.kind == DIAGONAL:
        return float(A.diag @ B.diag)
    if A.kind == SCALAR_PLUS_RANK_ONE and B.kind != SCALAR_PLUS_RANK_ONE:
        A, B = B, A
    if B.kind == SCALAR_PLUS_RANK_ONE:
        # <M, cI + beta u u^T> = c Tr M + beta u^T M u
        c, beta, u = B.rank_one_parts
        return c * A.trace() + beta * float(u @ A.apply(u))
    return float(np.sum(A.to_dense() * B.to_dense()))


# -- bilinear forms and tensors ----------------------------------------------


@dataclass(frozen=True)
class BilinearForm:
    """``phi(x, y) = sum_ij x_i values[i, j] y_j``."""

    values: np.ndarray

    def __post_init__(self):
        vals = _finite_array(self.values, 2, "bilinear form values")
        if vals.shape[0] != vals.shape[1]:
            raise OperatorError(f"bilinear form must be square, got {vals.shape}")
        object.__setattr__(self, "values", vals)

    @property
    def dim(self) -> int:
        return self.values.shape[0]

    @property
    def symmetric(self) -> bool:
        v = self.values
        return bool(np.all(np.abs(v - v.T) <= EXACT_TOL * np.maximum(1.0, np.abs(v))))

    def __call__(self, x, y) -> float:
        return float(np.asarray(x, dtype=float) @ self.values @ np.asarray(y, dtype=float))

    @classmethod
    def from_operator(cls, A: SymOperator) -> "BilinearForm":
        """The form ``(x, y) -> <A x, y>``."""
        return cls(A.to_dense())

    def norm_estimate(self, power_steps: int = 1000, n_random: int = 200, seed: int = 0) -> float:
        """Lower estimate of ``sup_{|x|=|y|=1} |phi(x, y)|``.

        Power iteration on ``M^T M`` gives a near-top right singular vector;
        random unit pairs are added for good measure.  Each candidate is a
        genuine evaluation of the form on unit vectors, so the estimate
        never exceeds the true norm beyond rounding.
        """
        m = self.values
        rng = np.random.default_rng(seed)
        best = 0.0
        v = rng.standard_normal(self.dim)
        v /= np.linalg.norm(v)
        for _ in range(power_steps):
            w = m.T @ (m @ v)
            nrm = np.linalg.norm(w)
            if nrm == 0.0:
                break
            v = w / nrm
        mv = m @ v
        if np.linalg.norm(mv) > 0:
            best = abs(self(mv / np.linalg.norm(mv), v))
        xs = rng.standard_normal((n_random, self.dim))
        ys = rng.standard_normal((n_random, self.dim))
        xs /= np.linalg.norm(xs, axis=1, keepdims=True)
        ys /= np.linalg.norm(ys, axis=1, keepdims=True)
        sampled = np.abs(np.einsum("ki,ij,kj->k", xs, m, ys))
        return max(best, float(sampled.max()))


def form_to_operator(phi: BilinearForm) -> SymOperator:
    """The unique operator ``A`` with ``phi(x, y) = <A x, y>``."""
    if not phi.symmetric:
        raise AsymmetryError("bilinear form is not symmetric")
    # <A x, y> = y^T A x, so A is the transpose of the coefficient matrix
    return SymOperator.dense(phi.values.T)


@dataclass(frozen=True)
class TensorVector:
    """Element of ``K (x) K`` flattened row-major: ``entries[i * dim + j]``."""

    dim: int
    entries: np.ndarray
    symmetric: bool

    def norm(self) -> float:
        return float(np.linalg.norm(self.entries))

    def as_matrix(self) -> np.ndarray:
        return self.entries.reshape(self.dim, self.dim)

    def pair(self, x, y) -> float:
        """``<H, x (x) y>`` with the convention that matches ``<A x, y>``."""
        return float(np.asarray(y, dtype=float) @ self.as_matrix() @ np.asarray(x, dtype=float))


def operator_to_tensor(A) -> TensorVector:
    if isinstance(A, SymOperator):
        m = A.to_dense()
    else:
        m = _finite_array(A, 2, "operator matrix")
        if m.shape[0] != m.shape[1]:
            raise OperatorError(f"operator matrix must be square, got {m.shape}")
    sym = bool(np.all(np.abs(m - m.T) <= EXACT_TOL * np.maximum(1.0, np.abs(m))))
    return TensorVector(m.shape[0], m.reshape(-1).copy(), sym)
