"""Degenerate cometric fields and pointwise linear algebra.

A sub-semi-Riemannian manifold is described here by its *cometric field*: a
symmetric n-by-n matrix of polynomial entries ``g^{jk}(x)`` that at every
point has rank exactly ``m < n`` (the distribution rank) and signature with
``index`` negative and ``m - index`` positive eigenvalues.  The image of the
cometric is the horizontal distribution; its kernel is the annihilator
space of covectors that vanish on horizontal vectors.

Covectors and tangent vectors are plain length-n float arrays.  They are
semantically distinct (covectors pair with vectors; the cometric maps
covectors to vectors) and the function signatures below keep the two roles
explicit by argument name.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from ssgeo import expr as ex
from ssgeo.backends import MonomialPack, pure

__all__ = [
    "CausalKind",
    "CausalClass",
    "CometricField",
    "FieldDefinitionError",
    "RankError",
    "NonHorizontalError",
    "apply_cometric",
    "cometric_matrix",
    "annihilator_basis",
    "horizontal_basis",
    "causal_character",
    "metric_from_cometric",
    "kernel_projector",
    "signature_at",
    "transform_linear",
    "translate",
    "load_field",
]

#: Relative singular-value cutoff for rank decisions.
RANK_CUTOFF = 1e-10

#: Default tolerance on the causal scalar <g xi, xi>.
CAUSAL_TOL = 1e-9


class FieldDefinitionError(ValueError):
    """A field definition violates the format or its declared invariants."""


class RankError(ValueError):
    """Pointwise rank of the cometric disagrees with the declared rank."""


class NonHorizontalError(ValueError):
    """A vector expected in the horizontal space is too far from it."""


class CausalKind(Enum):
    TIMELIKE = "timelike"
    NULL = "null"
    SPACELIKE = "spacelike"
    ANNIHILATOR = "annihilator"


@dataclass(frozen=True)
class CausalClass:
    """Causal classification of a covector plus the scalar that produced it."""

    kind: CausalKind
    scalar: float


@dataclass(frozen=True)
class CometricField:
    """Symmetric polynomial cometric with declared rank and index.

    ``entries[j][k]`` is the expression for ``g^{j+1,k+1}``; the (j, k) and
    (k, j) slots hold the identical tree object, so symmetry is structural.
    Instances are immutable and hashable; derivative tables and the numeric
    pack are computed lazily and cached.
    """

    dim: int
    rank: int
    index: int
    entries: tuple[tuple[ex.Expression, ...], ...]

    @classmethod
    def from_entries(
        cls,
        dim: int,
        rank: int,
        index: int,
        upper: Mapping[tuple[int, int], ex.Expression | str],
    ) -> CometricField:
        """Build a field from upper-triangle entries ``{(j, k): expr}``.

        Keys are 1-based with ``j <= k``; unlisted entries are zero.  String
        values are parsed with the expression grammar.
        """
        if not isinstance(dim, int) or dim < 3:
            raise FieldDefinitionError(f"dim must be an integer >= 3, got {dim!r}")
        if not isinstance(rank, int) or not 1 < rank < dim:
            raise FieldDefinitionError(
                f"rank must satisfy 1 < rank < dim, got rank={rank!r} dim={dim}"
            )
        if not isinstance(index, int) or not 0 <= index <= rank:
            raise FieldDefinitionError(
                f"index must satisfy 0 <= index <= rank, got {index!r}"
            )
        grid: list[list[ex.Expression]] = [
            [ex.Const(0.0)] * dim for _ in range(dim)
        ]
        for (j, k), value in upper.items():
            if not (1 <= j <= dim and 1 <= k <= dim):
                raise FieldDefinitionError(f"entry index ({j},{k}) outside 1..{dim}")
            if j > k:
                raise FieldDefinitionError(
                    f"entry ({j},{k}) is below the diagonal; list only j <= k "
                    "(symmetry is implied)"
                )
            tree = ex.parse(value, dim) if isinstance(value, str) else value
            grid[j - 1][k - 1] = tree
            grid[k - 1][j - 1] = tree
        return cls(dim, rank, index, tuple(tuple(row) for row in grid))

    # -- lazy symbolic tables ------------------------------------------------

    @cached_property
    def monomials(self) -> tuple[tuple[ex.Monomials, ...], ...]:
        """Entries in monomial form."""
        return tuple(
            tuple(ex.to_monomials(e, self.dim) for e in row) for row in self.entries
        )

    @cached_property
    def derivative1(self) -> tuple:
        """``derivative1[p][j][k]`` = d g^{jk} / d x^{p+1}, monomial form."""
        return tuple(
            tuple(
                tuple(ex.poly_diff(self.monomials[j][k], p + 1) for k in range(self.dim))
                for j in range(self.dim)
            )
            for p in range(self.dim)
        )

    @cached_property
    def derivative2(self) -> tuple:
        """``derivative2[p][q][j][k]`` = second partial, monomial form."""
        return tuple(
            tuple(
                tuple(
                    tuple(
                        ex.poly_diff(self.derivative1[p][j][k], q + 1)
                        for k in range(self.dim)
                    )
                    for j in range(self.dim)
                )
                for q in range(self.dim)
            )
            for p in range(self.dim)
        )

    @cached_property
    def pack(self) -> MonomialPack:
        """Deduplicated flat pack of all entries and derivatives."""
        n = self.dim
        polys: list[ex.Monomials] = []
        ids: dict[tuple, int] = {}

        def intern(poly: ex.Monomials) -> int:
            key = tuple(sorted(poly.items()))
            if key not in ids:
                ids[key] = len(polys)
                polys.append(poly)
            return ids[key]

        g_index = np.array(
            [[intern(self.monomials[j][k]) for k in range(n)] for j in range(n)],
            dtype=np.int32,
        )
        dg_index = np.array(
            [
                [[intern(self.derivative1[p][j][k]) for k in range(n)] for j in range(n)]
                for p in range(n)
            ],
            dtype=np.int32,
        )
        d2g_index = np.array(
            [
                [
                    [
                        [intern(self.derivative2[p][q][j][k]) for k in range(n)]
                        for j in range(n)
                    ]
                    for q in range(n)
                ]
                for p in range(n)
            ],
            dtype=np.int32,
        )
        coeffs: list[float] = []
        powers: list[tuple[int, ...]] = []
        starts = [0]
        for poly in polys:
            for key in sorted(poly):
                coeffs.append(poly[key])
                powers.append(key)
            starts.append(len(coeffs))
        return MonomialPack(
            dim=n,
            coeffs=np.array(coeffs, dtype=np.float64),
            powers=np.array(powers, dtype=np.uint8).reshape(len(coeffs), n),
            starts=np.array(starts, dtype=np.int32),
            g_index=g_index,
            dg_index=dg_index,
            d2g_index=d2g_index,
        )


# ---------------------------------------------------------------------------
# Pointwise operations.
# ---------------------------------------------------------------------------


def _check_point(field: CometricField, x: Sequence[float]) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (field.dim,):
        raise ValueError(f"point has shape {x.shape}, expected ({field.dim},)")
    return x


def cometric_matrix(field: CometricField, x: Sequence[float]) -> np.ndarray:
    """The symmetric matrix ``g(x)``."""
    x = _check_point(field, x)
    return pure.cometric(field.pack, x[None, :])[0]


def cometric_gradient(field: CometricField, x: Sequence[float]) -> np.ndarray:
    """All first derivatives at ``x``: shape (n, n, n), indexed [p, j, k]."""
    x = _check_point(field, x)
    return pure.cometric_gradient(field.pack, x[None, :])[0]


def cometric_hessian(field: CometricField, x: Sequence[float]) -> np.ndarray:
    """All second derivatives at ``x``: shape (n, n, n, n), [p, q, j, k]."""
    x = _check_point(field, x)
    return pure.cometric_hessian(field.pack, x[None, :])[0]


def apply_cometric(
    field: CometricField, x: Sequence[float], xi: Sequence[float]
) -> np.ndarray:
    """The horizontal tangent vector ``v^k = g^{kj}(x) xi_j``."""
    x = _check_point(field, x)
    xi = np.asarray(xi, dtype=np.float64)
    if xi.shape != (field.dim,):
        raise ValueError(f"covector has shape {xi.shape}, expected ({field.dim},)")
    return cometric_matrix(field, x) @ xi


def _rank_split(field: CometricField, x: Sequence[float]):
    g = cometric_matrix(field, x)
    u, s, vh = np.linalg.svd(g)
    cutoff = RANK_CUTOFF * (s[0] if s.size else 0.0)
    rank = int(np.sum(s > cutoff))
    if rank != field.rank:
        raise RankError(
            f"cometric has numerical rank {rank} at {np.asarray(x).tolist()}, "
            f"inconsistent with declared rank {field.rank}"
        )
    return u, s, vh, rank


def annihilator_basis(field: CometricField, x: Sequence[float]) -> np.ndarray:
    """Orthonormal basis of ker g(x) as rows: shape (n - m, n)."""
    _, _, vh, rank = _rank_split(field, x)
    return vh[rank:]


def horizontal_basis(field: CometricField, x: Sequence[float]) -> np.ndarray:
    """Orthonormal basis of the column space of g(x) as rows: shape (m, n)."""
    u, _, _, rank = _rank_split(field, x)
    return u[:, :rank].T


def kernel_projector(field: CometricField, x: Sequence[float]) -> np.ndarray:
    """Orthogonal projector onto ker g(x); smooth in x since the rank is
    constant, so ``x -> P(x) v0`` is a smooth annihilator section."""
    rows = annihilator_basis(field, x)
    return rows.T @ rows


def signature_at(field: CometricField, x: Sequence[float]) -> tuple[int, int, int]:
    """Eigenvalue sign counts of g(x): (negative, positive, zero)."""
    eigenvalues = np.linalg.eigvalsh(cometric_matrix(field, x))
    cutoff = RANK_CUTOFF * max(np.max(np.abs(eigenvalues)), 1e-300)
    neg = int(np.sum(eigenvalues < -cutoff))
    pos = int(np.sum(eigenvalues > cutoff))
    return neg, pos, field.dim - neg - pos


def causal_character(
    field: CometricField,
    x: Sequence[float],
    xi: Sequence[float],
    tol: float = CAUSAL_TOL,
) -> CausalClass:
    """Classify a covector by the sign of ``<g(x) xi, xi>``.

    Annihilators (``|g xi|`` below ``tol * |xi|``) are split off before the
    timelike/null/spacelike trichotomy on the scalar.
    """
    if tol <= 0:
        raise ValueError(f"tol must be positive, got {tol}")
    xi = np.asarray(xi, dtype=np.float64)
    v = apply_cometric(field, x, xi)
    scalar = float(v @ xi)
    if np.linalg.norm(v) <= tol * np.linalg.norm(xi):
        return CausalClass(CausalKind.ANNIHILATOR, scalar)
    if abs(scalar) <= tol:
        return CausalClass(CausalKind.NULL, scalar)
    if scalar < 0:
        return CausalClass(CausalKind.TIMELIKE, scalar)
    return CausalClass(CausalKind.SPACELIKE, scalar)


def metric_from_cometric(
    field: CometricField,
    x: Sequence[float],
    v: Sequence[float],
    w: Sequence[float],
    tol: float = 1e-8,
) -> float:
    """The horizontal metric ``Q(v, w)`` recovered from the cometric.

    Solves ``g(x) xi = v`` in the least-squares sense and returns
    ``<w, xi>``; the value does not depend on the representative ``xi``
    because ``w`` lies in the image of ``g``.  Raises
    :class:`NonHorizontalError` when either argument is farther than
    ``tol`` (relative) from the horizontal space.
    """
    g = cometric_matrix(field, x)
    v = np.asarray(v, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    xi, *_ = np.linalg.lstsq(g, v, rcond=None)
    if np.linalg.norm(g @ xi - v) > tol * max(1.0, np.linalg.norm(v)):
        raise NonHorizontalError(f"first argument is not horizontal at {x}")
    mu, *_ = np.linalg.lstsq(g, w, rcond=None)
    if np.linalg.norm(g @ mu - w) > tol * max(1.0, np.linalg.norm(w)):
        raise NonHorizontalError(f"second argument is not horizontal at {x}")
    return float(w @ xi)


# ---------------------------------------------------------------------------
# Coordinate changes (used for adapted bases and covariance tests).
# ---------------------------------------------------------------------------


def transform_linear(field: CometricField, matrix: np.ndarray) -> CometricField:
    """Push the field through the linear change ``y = matrix @ x``.

    The cometric transforms by congruence, ``g_y(y) = L g_x(L^{-1} y) L^T``,
    which preserves rank and index.
    """
    L = np.asarray(matrix, dtype=np.float64)
    n = field.dim
    if L.shape != (n, n):
        raise ValueError(f"matrix has shape {L.shape}, expected ({n},{n})")
    Linv = np.linalg.inv(L)
    substituted = [
        [
            ex.poly_affine_substitute(field.monomials[p][q], Linv, np.zeros(n))
            for q in range(n)
        ]
        for p in range(n)
    ]
    grid: dict[tuple[int, int], ex.Expression] = {}
    for j in range(n):
        for k in range(j, n):
            acc: ex.Monomials = {}
            for p in range(n):
                for q in range(n):
                    w = L[j, p] * L[k, q]
                    if w != 0.0:
                        acc = ex.poly_add(acc, substituted[p][q], w)
            grid[(j + 1, k + 1)] = ex.from_monomials(acc, n)
    return CometricField.from_entries(n, field.rank, field.index, grid)


def translate(field: CometricField, origin: Sequence[float]) -> CometricField:
    """Shift coordinates so that ``origin`` becomes the zero point.

    In the new coordinates ``y = x - origin`` the entries are
    ``g_y(y) = g_x(y + origin)``; covector components are unchanged.
    """
    shift = np.asarray(origin, dtype=np.float64)
    n = field.dim
    if shift.shape != (n,):
        raise ValueError(f"origin has shape {shift.shape}, expected ({n},)")
    identity = np.eye(n)
    grid: dict[tuple[int, int], ex.Expression] = {}
    for j in range(n):
        for k in range(j, n):
            moved = ex.poly_affine_substitute(field.monomials[j][k], identity, shift)
            grid[(j + 1, k + 1)] = ex.from_monomials(moved, n)
    return CometricField.from_entries(n, field.rank, field.index, grid)


# ---------------------------------------------------------------------------
# JSON definition files.
# ---------------------------------------------------------------------------


def field_from_dict(data: Mapping) -> CometricField:
    """Build a field from the definition-file structure.

    Expected shape::

        { "dim": n, "rank": m, "index": nu,
          "entries": [ { "j": int, "k": int, "expr": str }, ... ] }

    Unlisted entries are zero; ``j > k`` is rejected since symmetry is
    implied.  The declared rank and signature are probed at the origin.
    """
    try:
        dim = data["dim"]
        rank = data["rank"]
        index = data["index"]
        raw_entries = data["entries"]
    except KeyError as missing:
        raise FieldDefinitionError(f"missing key {missing} in field definition")
    upper: dict[tuple[int, int], str] = {}
    for position, item in enumerate(raw_entries):
        try:
            j, k, source = item["j"], item["k"], item["expr"]
        except (KeyError, TypeError):
            raise FieldDefinitionError(
                f"entry #{position} must be an object with keys j, k, expr"
            )
        if (j, k) in upper:
            raise FieldDefinitionError(f"duplicate entry ({j},{k})")
        upper[(j, k)] = source
    field = CometricField.from_entries(dim, rank, index, upper)
    neg, pos, zero = signature_at(field, np.zeros(dim))
    if (neg, pos, zero) != (index, rank - index, dim - rank):
        raise FieldDefinitionError(
            f"signature at the origin is ({neg} negative, {pos} positive, "
            f"{zero} zero); declared (index={index}, rank={rank}, dim={dim})"
        )
    return field


def load_field(path: str | Path) -> CometricField:
    """Load a field definition from a JSON file."""
    with open(path, "r", encoding="utf-8") as handle:
        return field_from_dict(json.load(handle))
