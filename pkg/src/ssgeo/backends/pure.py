"""Pure NumPy backend: batched pack evaluation and the RK4 flow kernel.

All functions take points as ``(batch, dim)`` arrays and stay vectorized
across the batch; the classical fixed-step fourth-order Runge-Kutta loop
is the only Python-level iteration.
"""
from __future__ import annotations

import numpy as np

from ssgeo.backends import MonomialPack


def eval_polys(pack: MonomialPack, points: np.ndarray) -> np.ndarray:
    """Evaluate every distinct polynomial at each point: ``(B, P)``."""
    points = np.asarray(points, dtype=np.float64)
    monomials = np.prod(points[:, None, :] ** pack.powers[None, :, :], axis=2)
    return monomials @ pack.select


def cometric(pack: MonomialPack, points: np.ndarray) -> np.ndarray:
    """Cometric matrices g(x): ``(B, n, n)``."""
    return eval_polys(pack, points)[:, pack.g_index]


def cometric_gradient(pack: MonomialPack, points: np.ndarray) -> np.ndarray:
    """First derivatives d_p g^{jk}: ``(B, n, n, n)`` indexed ``[p, j, k]``."""
    return eval_polys(pack, points)[:, pack.dg_index]


def cometric_hessian(pack: MonomialPack, points: np.ndarray) -> np.ndarray:
    """Second derivatives: ``(B, n, n, n, n)`` indexed ``[p, q, j, k]``."""
    return eval_polys(pack, points)[:, pack.d2g_index]


def hamiltonian_rhs(
    pack: MonomialPack, points: np.ndarray, covectors: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Right-hand side of the Hamiltonian system for a batch of states.

    ``xdot^k = g^{kj} xi_j`` and ``xidot_p = -1/2 (d_p g^{jk}) xi_j xi_k``.
    """
    values = eval_polys(pack, points)
    g = values[:, pack.g_index]
    dg = values[:, pack.dg_index]
    xdot = np.einsum("bjk,bk->bj", g, covectors)
    xidot = -0.5 * np.einsum("bpjk,bj,bk->bp", dg, covectors, covectors)
    return xdot, xidot


def rk4_flow(
    pack: MonomialPack,
    x0: np.ndarray,
    xi0: np.ndarray,
    t_end: float,
    nsteps: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Integrate the Hamiltonian system with fixed-step classical RK4.

    Returns histories ``(B, nsteps+1, n)`` for points and covectors with
    samples at ``t_i = i * t_end / nsteps``.  No blow-up policing happens
    here; non-finite values simply propagate and callers truncate.
    """
    x = np.array(x0, dtype=np.float64, copy=True)
    xi = np.array(xi0, dtype=np.float64, copy=True)
    batch, dim = x.shape
    xs = np.empty((batch, nsteps + 1, dim))
    xis = np.empty((batch, nsteps + 1, dim))
    xs[:, 0] = x
    xis[:, 0] = xi
    h = t_end / nsteps
    with np.errstate(over="ignore", invalid="ignore"):
        for i in range(nsteps):
            k1x, k1xi = hamiltonian_rhs(pack, x, xi)
            k2x, k2xi = hamiltonian_rhs(pack, x + 0.5 * h * k1x, xi + 0.5 * h * k1xi)
            k3x, k3xi = hamiltonian_rhs(pack, x + 0.5 * h * k2x, xi + 0.5 * h * k2xi)
            k4x, k4xi = hamiltonian_rhs(pack, x + h * k3x, xi + h * k3xi)
            x = x + (h / 6.0) * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
            xi = xi + (h / 6.0) * (k1xi + 2.0 * k2xi + 2.0 * k3xi + k4xi)
            xs[:, i + 1] = x
            xis[:, i + 1] = xi
    return xs, xis
