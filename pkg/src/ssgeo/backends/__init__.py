"""Numeric evaluation backends.

A cometric field compiles its entries and their first and second symbolic
derivatives into a flat :class:`MonomialPack` — one shared coefficient/
exponent table plus index maps — that backends evaluate without touching
expression trees.  Two interchangeable backends exist:

* ``pure``     — vectorized NumPy; always available.
* ``compiled`` — a Cython extension evaluating the same pack in C loops;
  built automatically when a C compiler is present.

Selection: the ``SSGEO_BACKEND`` environment variable (``pure``,
``compiled`` or ``auto``) or the ``name`` argument of :func:`get_backend`.
``auto`` (the default) prefers the compiled extension and silently falls
back to NumPy.  Both backends implement ``rk4_flow`` with identical
semantics; ``benchmarks/bench_backends.py`` compares their throughput.
"""
from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

__all__ = ["MonomialPack", "get_backend", "active_backend_name"]


@dataclass(frozen=True)
class MonomialPack:
    """Flattened polynomial data for one cometric field.

    ``coeffs``/``powers`` hold every monomial term of every distinct
    polynomial; polynomial ``p`` owns the contiguous term range
    ``starts[p]:starts[p+1]`` (an empty range is the zero polynomial).
    The index arrays map tensor slots to polynomial ids:

    * ``g_index[j, k]``          — entry g^{jk}
    * ``dg_index[p, j, k]``      — first derivative  d g^{jk} / d x^p
    * ``d2g_index[p, q, j, k]``  — second derivative d2 g^{jk} / (d x^p d x^q)
    """

    dim: int
    coeffs: np.ndarray
    powers: np.ndarray
    starts: np.ndarray
    g_index: np.ndarray
    dg_index: np.ndarray
    d2g_index: np.ndarray

    def __post_init__(self) -> None:
        # Dense (terms x polys) matrix folding coefficients into segment
        # sums: poly values = monomials @ select.  Sizes are small (the
        # built-in models stay under a few hundred terms).
        nterms = self.coeffs.shape[0]
        npolys = self.starts.shape[0] - 1
        select = np.zeros((nterms, npolys))
        for p in range(npolys):
            lo, hi = self.starts[p], self.starts[p + 1]
            select[lo:hi, p] = self.coeffs[lo:hi]
        object.__setattr__(self, "_select", select)

    @property
    def select(self) -> np.ndarray:
        return self._select  # type: ignore[attr-defined]


def get_backend(name: str | None = None):
    """Return the backend module selected by ``name`` or ``SSGEO_BACKEND``."""
    choice = name or os.environ.get("SSGEO_BACKEND", "auto")
    if choice == "pure":
        from ssgeo.backends import pure

        return pure
    if choice == "compiled":
        from ssgeo.backends import _speedups  # raises ImportError if not built

        return _speedups
    if choice == "auto":
        try:
            from ssgeo.backends import _speedups

            return _speedups
        except ImportError:
            from ssgeo.backends import pure

            return pure
    raise ValueError(f"unknown backend {choice!r} (expected pure, compiled or auto)")


def active_backend_name() -> str:
    """Name of the backend :func:`get_backend` resolves to by default."""
    backend = get_backend()
    return "compiled" if backend.__name__.endswith("_speedups") else "pure"
