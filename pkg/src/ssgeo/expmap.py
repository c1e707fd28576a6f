"""Exponential map of normal extremals: values, Taylor expansion, Jacobian.

``exp_p(u)`` is the endpoint at time 1 of the extremal launched from ``p``
with initial covector ``u``.  Around an annihilator direction the map is
never a local diffeomorphism (annihilators are fixed points), so the
interesting question is quantitative: how non-degenerate is the Jacobian
``W = d exp_p(u)`` away from the kernel?  This module provides

* the order-3 Taylor expansion of ``exp_p`` in ``u`` (``taylor_coefficients``
  / ``taylor_exp``), whose first two coefficients are the cometric and minus
  the Christoffel tensor;
* the exact Jacobian ``W`` by integrating the variational (linearized)
  Hamiltonian system, cross-checkable against central finite differences;
* the leading-order model ``W~`` of ``W`` in a basis adapted to ``g(p)``,
  whose determinant is an explicitly homogeneous polynomial of degree
  ``2(n-m)`` in ``u``; and
* a calibrated local-diffeomorphism test comparing ``|det W~|`` against
  ``|<g u, u>|^(n-m)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ssgeo.backends import pure
from ssgeo.christoffel import christoffel_at
from ssgeo.field import (
    CausalKind,
    CometricField,
    NonHorizontalError,
    RankError,
    causal_character,
    cometric_matrix,
    metric_from_cometric,
    transform_linear,
    translate,
)
from ssgeo.flow import BLOWUP_BOUND, BlowUpError, integrate_extremal

__all__ = [
    "ExpansionCoefficients",
    "ExpJacobianBlocks",
    "adapted_basis",
    "calibrated_delta",
    "exp",
    "exp_jacobian",
    "gauss_lemma_check",
    "local_diffeo_test",
    "taylor_coefficients",
    "taylor_exp",
]

#: Relative eigenvalue cutoff separating the kernel of ``g(p)`` from the
#: nondegenerate part when building the adapted basis.
ADAPTED_RANK_CUTOFF = 1e-10

#: Central-difference step for the finite-difference Jacobian is
#: ``FD_STEP_SCALE * max(1, |u|)``.
FD_STEP_SCALE = 1e-6

#: The diffeomorphism-test floor is calibrated as the minimum of
#: ``|det W~(u)| / |<gu,u>|^(n-m)`` over this many random unit covectors
#: with ``|<gu,u>|`` above the scalar cut, then divided by the margin.
CALIBRATION_DRAWS = 500
CALIBRATION_SCALAR_MIN = 0.1
CALIBRATION_SEED = 0
DIFFEO_MARGIN = 10.0

_INTEGRATION_T_END = 1.0


@dataclass(frozen=True, eq=False)
class ExpansionCoefficients:
    """Taylor coefficients of ``u -> exp_p(u)`` at ``u = 0``, through order 3.

    With the factorial convention ``exp_p(u)^k = p^k + sum_r gamma_r(u,..,u)/r!``
    the coefficients are ``gamma1 = g(p)``, ``gamma2 = -Gamma(p)`` and a
    third-order tensor obtained from one more derivative of the Hamiltonian
    system; ``gamma2`` and ``gamma3`` are symmetric in their trailing indices.
    """

    base_point: np.ndarray
    gamma1: np.ndarray
    gamma2: np.ndarray
    gamma3: np.ndarray


@dataclass(frozen=True, eq=False)
class ExpJacobianBlocks:
    """The Jacobian ``W = d exp_p(u)`` and its adapted-basis anatomy.

    ``W`` is expressed in the original coordinates.  ``basis`` is the linear
    change ``y = basis @ x`` under which ``g(p)`` becomes
    ``diag(epsilon, 0)``; the blocks ``A`` (m x m), ``B`` (m x (n-m)),
    ``C`` ((n-m) x m) and ``D`` split ``basis @ W @ basis.T`` along the
    horizontal/vertical decomposition.  ``w_tilde`` keeps only the leading
    orders of each block (built from the Christoffel tensor in the adapted
    coordinates, not from the integrated ``W``), and ``det_w_tilde`` is its
    determinant, homogeneous of degree ``2(n-m)`` in ``u``.
    """

    u: np.ndarray
    W: np.ndarray
    basis: np.ndarray
    epsilon: np.ndarray
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    w_tilde: np.ndarray
    det_w_tilde: float


# ---------------------------------------------------------------------------
# Taylor expansion.
# ---------------------------------------------------------------------------


def _check_vectors(
    field: CometricField, *vectors: Sequence[float]
) -> tuple[np.ndarray, ...]:
    out = []
    for vec in vectors:
        arr = np.asarray(vec, dtype=np.float64)
        if arr.shape != (field.dim,):
            raise ValueError(f"vector has shape {arr.shape}, expected ({field.dim},)")
        out.append(arr)
    return tuple(out)


def taylor_coefficients(field: CometricField, p: Sequence[float]) -> ExpansionCoefficients:
    """Order-3 expansion of the exponential map at ``p``.

    The coefficients follow the recursion ``gamma_{r+1} = sym(g dgamma_r
    - (r/2) gamma_r dg)`` over the trailing indices, evaluated numerically
    from the cometric and its first two derivatives at ``p``.
    """
    (p,) = _check_vectors(field, p)
    g = cometric_matrix(field, p)
    dg = pure.cometric_gradient(field.pack, p[None, :])[0]
    d2g = pure.cometric_hessian(field.pack, p[None, :])[0]

    # gamma2^{kab} = sym_ab(g^{qb} d_q g^{ka}) - 1/2 g^{kq} d_q g^{ab}; the
    # symmetrized expression coincides with -Gamma^{kab}.
    half = np.einsum("qb,qka->kab", g, dg)
    gamma2 = 0.5 * (half + half.transpose(0, 2, 1))
    gamma2 -= 0.5 * np.einsum("kq,qab->kab", g, dg)

    # d_s gamma2^{kab}, expanded through the product rule.
    t1 = np.einsum("sqb,qka->skab", dg, dg)
    t2 = np.einsum("qb,sqka->skab", g, d2g)
    t5 = np.einsum("skq,qab->skab", dg, dg)
    t6 = np.einsum("kq,sqab->skab", g, d2g)
    dgamma2 = 0.5 * (t1 + t2 + t1.transpose(0, 1, 3, 2) + t2.transpose(0, 1, 3, 2))
    dgamma2 -= 0.5 * (t5 + t6)

    raw = np.einsum("sc,skab->kabc", g, dgamma2)
    raw -= np.einsum("kaq,qbc->kabc", gamma2, dg)
    gamma3 = sum(
        raw.transpose(perm)
        for perm in (
            (0, 1, 2, 3),
            (0, 1, 3, 2),
            (0, 2, 1, 3),
            (0, 2, 3, 1),
            (0, 3, 1, 2),
            (0, 3, 2, 1),
        )
    ) / 6.0
    return ExpansionCoefficients(p, g, gamma2, gamma3)


def taylor_exp(coeffs: ExpansionCoefficients, u: Sequence[float]) -> np.ndarray:
    """Evaluate the order-3 polynomial approximation of ``exp_p(u)``."""
    u = np.asarray(u, dtype=np.float64)
    n = coeffs.base_point.shape[0]
    if u.shape != (n,):
        raise ValueError(f"covector has shape {u.shape}, expected ({n},)")
    out = coeffs.base_point + coeffs.gamma1 @ u
    out = out + 0.5 * np.einsum("kab,a,b->k", coeffs.gamma2, u, u)
    out = out + np.einsum("kabc,a,b,c->k", coeffs.gamma3, u, u, u) / 6.0
    return out


# ---------------------------------------------------------------------------
# Exponential map and its Jacobian.
# ---------------------------------------------------------------------------


def exp(
    field: CometricField,
    p: Sequence[float],
    u: Sequence[float],
    *,
    step: float = 1e-3,
) -> np.ndarray:
    """Endpoint at time 1 of the extremal with initial covector ``u``.

    Raises :class:`~ssgeo.flow.BlowUpError` when the extremal leaves the
    integration domain before time 1 (``u`` outside the maximal domain).
    """
    trajectory = integrate_extremal(field, p, u, _INTEGRATION_T_END, step=step)
    return trajectory.xs[-1].copy()


def _steps_for(step: float) -> int:
    if not (step > 0.0):
        raise ValueError(f"step must be positive, got {step}")
    return max(1, int(np.ceil(_INTEGRATION_T_END / step - 1e-9)))


def _variational_jacobian(
    field: CometricField, p: np.ndarray, u: np.ndarray, nsteps: int
) -> np.ndarray:
    """Integrate the linearized Hamiltonian system for all n covector seeds.

    The sensitivity blocks obey ``ddx^k = d_s g^{kj} xi_j dx^s + g^{kj} dxi_j``
    and ``dxi_k = -1/2 d_s d_k g^{pq} xi_p xi_q dx^s - d_k g^{pq} xi_p dxi_q``
    with ``dx(0) = 0`` and ``dxi(0) = I``; ``W`` is ``dx`` at time 1.
    """
    pack = field.pack
    n = field.dim

    def rhs(x, xi, dx, dxi):
        values = pure.eval_polys(pack, x[None, :])[0]
        g = values[pack.g_index]
        dg = values[pack.dg_index]
        d2g = values[pack.d2g_index]
        xdot = g @ xi
        xidot = -0.5 * np.einsum("jpq,p,q->j", dg, xi, xi)
        dxdot = np.einsum("skj,j,sc->kc", dg, xi, dx) + g @ dxi
        dxidot = -0.5 * np.einsum("skpq,p,q,sc->kc", d2g, xi, xi, dx)
        dxidot -= np.einsum("kpq,p,qc->kc", dg, xi, dxi)
        return xdot, xidot, dxdot, dxidot

    x = p.copy()
    xi = u.copy()
    dx = np.zeros((n, n))
    dxi = np.eye(n)
    h = _INTEGRATION_T_END / nsteps
    with np.errstate(over="ignore", invalid="ignore"):
        for i in range(nsteps):
            k1 = rhs(x, xi, dx, dxi)
            k2 = rhs(*(s + 0.5 * h * k for s, k in zip((x, xi, dx, dxi), k1)))
            k3 = rhs(*(s + 0.5 * h * k for s, k in zip((x, xi, dx, dxi), k2)))
            k4 = rhs(*(s + h * k for s, k in zip((x, xi, dx, dxi), k3)))
            x, xi, dx, dxi = (
                s + (h / 6.0) * (a + 2.0 * b + 2.0 * c + d)
                for s, a, b, c, d in zip((x, xi, dx, dxi), k1, k2, k3, k4)
            )
            bad = not (
                np.all(np.isfinite(x))
                and np.all(np.isfinite(dx))
                and np.max(np.abs(x)) < BLOWUP_BOUND
            )
            if bad:
                raise BlowUpError(
                    "variational system blew up before time 1", i * h
                )
    return dx


def _finite_difference_jacobian(
    field: CometricField, p: np.ndarray, u: np.ndarray, nsteps: int
) -> np.ndarray:
    n = field.dim
    h = FD_STEP_SCALE * max(1.0, float(np.linalg.norm(u)))
    seeds = np.concatenate([u + h * np.eye(n), u - h * np.eye(n)], axis=0)
    starts = np.broadcast_to(p, (2 * n, n))
    xs, _ = pure.rk4_flow(field.pack, starts, seeds, _INTEGRATION_T_END, nsteps)
    with np.errstate(invalid="ignore"):
        good = np.all(np.isfinite(xs), axis=(0, 2))
        good &= np.max(np.abs(xs), axis=(0, 2)) < BLOWUP_BOUND
    if not np.all(good):
        last_valid = (int(np.argmin(good)) - 1) * _INTEGRATION_T_END / nsteps
        raise BlowUpError(
            "finite-difference probe blew up before time 1", last_valid
        )
    finals = xs[:, -1, :]
    return (finals[:n] - finals[n:]).T / (2.0 * h)


def adapted_basis(field: CometricField, p: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
    """Linear change ``y = S x`` turning ``g(p)`` into ``diag(epsilon, 0)``.

    Returns ``(S, epsilon)`` where ``epsilon`` lists ``index`` entries of -1
    followed by ``rank - index`` entries of +1.  Eigenvectors are ordered
    negative/positive/kernel, pivot-sorted and sign-normalized inside each
    group so the construction is deterministic (and exactly the identity
    when ``g(p)`` is already ``diag(epsilon, 0)``).
    """
    (p,) = _check_vectors(field, p)
    g0 = cometric_matrix(field, p)
    lam, vec = np.linalg.eigh(g0)
    cutoff = ADAPTED_RANK_CUTOFF * float(np.max(np.abs(lam)))
    if cutoff == 0.0:
        raise RankError("cometric vanishes; no adapted basis")
    groups = [
        np.nonzero(lam < -cutoff)[0],
        np.nonzero(lam > cutoff)[0],
        np.nonzero(np.abs(lam) <= cutoff)[0],
    ]
    counts = (
        field.index,
        field.rank - field.index,
        field.dim - field.rank,
    )
    if tuple(len(grp) for grp in groups) != counts:
        raise RankError(
            f"eigenvalue signs {tuple(len(g) for g in groups)} do not match "
            f"the declared signature {counts}"
        )
    columns = []
    scales = []
    for grp in groups:
        pivots = [int(np.argmax(np.abs(vec[:, j]))) for j in grp]
        for _, j in sorted(zip(pivots, grp)):
            col = vec[:, j]
            if col[int(np.argmax(np.abs(col)))] < 0:
                col = -col
            columns.append(col)
            scales.append(1.0 if abs(lam[j]) <= cutoff else 1.0 / np.sqrt(abs(lam[j])))
    S = np.array(columns) * np.array(scales)[:, None]
    epsilon = np.concatenate([-np.ones(counts[0]), np.ones(counts[1])])
    return S, epsilon


# Adapted Christoffel tensors and calibrated floors, keyed by the identity of
# the field and the base point; values retain the field so ids stay pinned.
_ADAPTED_CACHE: dict = {}
_DELTA_CACHE: dict = {}


def _adapted_frame(
    field: CometricField, p: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``(S, epsilon, Gamma')`` with ``Gamma'`` at the adapted origin."""
    key = (id(field), p.tobytes())
    hit = _ADAPTED_CACHE.get(key)
    if hit is not None:
        return hit[1], hit[2], hit[3]
    S, epsilon = adapted_basis(field, p)
    adapted = transform_linear(translate(field, p), S)
    gamma = christoffel_at(adapted, np.zeros(field.dim)).gamma
    _ADAPTED_CACHE[key] = (field, S, epsilon, gamma)
    return S, epsilon, gamma


def _tilde_matrix(
    epsilon: np.ndarray, gamma: np.ndarray, u_adapted: np.ndarray
) -> np.ndarray:
    """Leading-order model of the adapted Jacobian.

    ``A = diag(epsilon)``, ``B/C`` are the linear Christoffel contractions and
    ``D^{ab} = (1/3) e_j B^{jb} B^{ja} + e_j B^{jb} C^{aj}``; discarded error
    terms are O(|u|), O(|u|^2), O(|u|^3) blockwise.
    """
    m = epsilon.shape[0]
    B = -np.einsum("abp,p->ab", gamma[:m, m:, :], u_adapted)
    C = -np.einsum("abp,p->ab", gamma[m:, :m, :], u_adapted)
    D = np.einsum("j,jb,ja->ab", epsilon, B, B) / 3.0
    D += np.einsum("j,jb,aj->ab", epsilon, B, C)
    return np.block([[np.diag(epsilon), B], [C, D]])


def exp_jacobian(
    field: CometricField,
    p: Sequence[float],
    u: Sequence[float],
    method: str = "variational",
    *,
    step: float = 1e-3,
) -> ExpJacobianBlocks:
    """Jacobian ``W^{kj} = d exp_p(u)^k / du_j`` with adapted-basis blocks.

    ``method`` selects the linearized-flow integration (default) or a
    central finite-difference probe of the plain flow; the two agree to
    about 1e-5 and the second exists to cross-check the first.
    """
    p, u = _check_vectors(field, p, u)
    nsteps = _steps_for(step)
    if method == "variational":
        W = _variational_jacobian(field, p, u, nsteps)
    elif method == "finite-difference":
        W = _finite_difference_jacobian(field, p, u, nsteps)
    else:
        raise ValueError(f"unknown method {method!r}")

    S, epsilon, gamma = _adapted_frame(field, p)
    m = field.rank
    u_adapted = np.linalg.solve(S.T, u)
    W_adapted = S @ W @ S.T
    w_tilde = _tilde_matrix(epsilon, gamma, u_adapted)
    return ExpJacobianBlocks(
        u=u,
        W=W,
        basis=S,
        epsilon=epsilon,
        A=W_adapted[:m, :m],
        B=W_adapted[:m, m:],
        C=W_adapted[m:, :m],
        D=W_adapted[m:, m:],
        w_tilde=w_tilde,
        det_w_tilde=float(np.linalg.det(w_tilde)),
    )


# ---------------------------------------------------------------------------
# Local-diffeomorphism test.
# ---------------------------------------------------------------------------


def calibrated_delta(field: CometricField, p: Sequence[float]) -> float:
    """Empirical floor of ``|det W~(u)| / |<gu,u>|^(n-m)`` over unit ``u``.

    Sampled once per (field, point) with a fixed seed over
    ``CALIBRATION_DRAWS`` unit covectors whose cometric scalar clears
    ``CALIBRATION_SCALAR_MIN``, then cached; the diffeomorphism test uses
    this value divided by ``DIFFEO_MARGIN``.
    """
    (p,) = _check_vectors(field, p)
    key = (id(field), p.tobytes())
    hit = _DELTA_CACHE.get(key)
    if hit is not None:
        return hit[1]
    S, epsilon, gamma = _adapted_frame(field, p)
    g0 = cometric_matrix(field, p)
    n, m = field.dim, field.rank
    rng = np.random.default_rng(CALIBRATION_SEED)
    floor = np.inf
    accepted = 0
    attempts = 0
    while accepted < CALIBRATION_DRAWS:
        attempts += 1
        if attempts > 200 * CALIBRATION_DRAWS:
            raise ValueError(
                "cometric scalar rarely clears the calibration cut; "
                "cannot calibrate the diffeomorphism floor"
            )
        vec = rng.normal(size=n)
        vec /= np.linalg.norm(vec)
        scalar = float(vec @ g0 @ vec)
        if abs(scalar) <= CALIBRATION_SCALAR_MIN:
            continue
        accepted += 1
        w_tilde = _tilde_matrix(epsilon, gamma, np.linalg.solve(S.T, vec))
        ratio = abs(np.linalg.det(w_tilde)) / abs(scalar) ** (n - m)
        floor = min(floor, ratio)
    _DELTA_CACHE[key] = (field, float(floor))
    return float(floor)


def local_diffeo_test(
    field: CometricField, p: Sequence[float], u: Sequence[float]
) -> tuple[float, bool]:
    """Decide whether ``exp_p`` is locally diffeomorphic around direction ``u``.

    Returns ``(det W~(u), verdict)``; the verdict compares ``|det W~|``
    against the calibrated multiple of ``|<gu,u>|^(n-m)`` and is ``False``
    outright for null or annihilator ``u`` (where the bound degenerates).
    """
    p, u = _check_vectors(field, p, u)
    S, epsilon, gamma = _adapted_frame(field, p)
    w_tilde = _tilde_matrix(epsilon, gamma, np.linalg.solve(S.T, u))
    det = float(np.linalg.det(w_tilde))
    character = causal_character(field, p, u)
    if character.kind in (CausalKind.NULL, CausalKind.ANNIHILATOR):
        return det, False
    delta = calibrated_delta(field, p) / DIFFEO_MARGIN
    bound = delta * abs(character.scalar) ** (field.dim - field.rank)
    return det, bool(abs(det) > 0.0 and abs(det) >= bound)


# ---------------------------------------------------------------------------
# Gauss lemma.
# ---------------------------------------------------------------------------


def gauss_lemma_check(
    field: CometricField,
    p: Sequence[float],
    u: Sequence[float],
    w: Sequence[float],
    *,
    step: float = 1e-3,
) -> float:
    """Residual of the Gauss lemma at ``(p, u)`` probed against ``w``.

    Always checks ``<g_p u, w> = <W w, xi(1)>`` where ``xi(1)`` is the
    cotangent lift of ``t -> exp_p(tu)`` at time 1 and ``W = d exp_p(u)``
    (the radial vector is taken to be ``u`` itself).  When ``W w`` is
    horizontal at the endpoint (within 1e-7) the metric form
    ``<g_p u, w> = Q(W w, W u)`` is checked as well and the larger residual
    is returned.
    """
    p, u, w = _check_vectors(field, p, u, w)
    blocks = exp_jacobian(field, p, u, step=step)
    trajectory = integrate_extremal(field, p, u, _INTEGRATION_T_END, step=step)
    endpoint = trajectory.xs[-1]
    xi_final = trajectory.xis[-1]
    lhs = float(u @ cometric_matrix(field, p) @ w)
    image = blocks.W @ w
    residual = abs(lhs - float(image @ xi_final))
    try:
        q_form = metric_from_cometric(
            field, endpoint, image, blocks.W @ u, tol=1e-7
        )
    except NonHorizontalError:
        return residual
    return max(residual, abs(lhs - q_form))
