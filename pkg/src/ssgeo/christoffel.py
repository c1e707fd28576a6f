"""Raised-index Christoffel tensor and bracket-generation test.

For a degenerate cometric the usual Levi-Civita symbols are unavailable,
but the combination

    Gamma^{kpq} = 1/2 (g^{kj} d_j g^{pq} - g^{pj} d_j g^{kq} - g^{qj} d_j g^{kp})

still produces a well-defined horizontal vector Gamma(xi, v) once the
second covector slot is restricted to annihilators; the value then depends
on xi only through its class modulo annihilators.  The same contraction
measures bracket generation: the distribution is 2-step bracket generating
at x exactly when v -> Gamma(xi, v) is injective on the annihilator space
for the chosen covector xi.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ssgeo import expr as ex
from ssgeo.field import (
    CometricField,
    annihilator_basis,
    cometric_gradient,
    cometric_matrix,
    horizontal_basis,
)

__all__ = [
    "ChristoffelTensor",
    "NotAnnihilatorError",
    "christoffel_at",
    "gamma_contract",
    "bracket_form",
    "sym_covariant_derivative",
    "is_two_step_generator",
]

#: Default relative tolerance for "is an annihilator" preconditions.
ANNIHILATOR_TOL = 1e-8


class NotAnnihilatorError(ValueError):
    """A covector required to annihilate the horizontal space does not."""


@dataclass(frozen=True, eq=False)
class ChristoffelTensor:
    """The tensor Gamma^{kpq} at a base point, with g(x) kept alongside.

    ``gamma[k, p, q]`` is symmetric in (p, q); the cometric matrix is
    retained so contractions can check their annihilator preconditions
    without re-evaluating the field.
    """

    x: np.ndarray
    gamma: np.ndarray
    cometric: np.ndarray


def _require_annihilator(
    g: np.ndarray, v: np.ndarray, tol: float, label: str
) -> None:
    image = np.linalg.norm(g @ v)
    if image > tol * max(np.linalg.norm(v), 1e-300):
        raise NotAnnihilatorError(
            f"{label} is not an annihilator: |g v| = {image:.3e} "
            f"exceeds {tol:.0e} * |v|"
        )


def christoffel_at(field: CometricField, x: Sequence[float]) -> ChristoffelTensor:
    """Evaluate Gamma^{kpq} at a point from symbolic derivatives of g."""
    x = np.asarray(x, dtype=np.float64)
    g = cometric_matrix(field, x)
    dg = cometric_gradient(field, x)  # [j, p, q] = d_j g^{pq}
    gamma = 0.5 * (
        np.einsum("kj,jpq->kpq", g, dg)
        - np.einsum("pj,jkq->kpq", g, dg)
        - np.einsum("qj,jkp->kpq", g, dg)
    )
    return ChristoffelTensor(x=x, gamma=gamma, cometric=g)


def gamma_contract(
    tensor: ChristoffelTensor,
    xi: Sequence[float],
    v: Sequence[float],
    tol: float = ANNIHILATOR_TOL,
) -> np.ndarray:
    """The horizontal vector Gamma^k(xi, v) = Gamma^{kpq} xi_p v_q.

    ``v`` must annihilate the horizontal space at the base point; the
    result is then independent of annihilator shifts of ``xi``.
    """
    xi = np.asarray(xi, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    _require_annihilator(tensor.cometric, v, tol, "second argument")
    return np.einsum("kpq,p,q->k", tensor.gamma, xi, v)


def bracket_form(
    field: CometricField,
    x: Sequence[float],
    xi: Sequence[float],
    eta: Sequence[float],
    v: Sequence[float],
    tol: float = ANNIHILATOR_TOL,
) -> float:
    """The pairing <[g xi, g eta], v> of the frame bracket with ``v``.

    Evaluated from the coordinate formula
    ``(g^{jp} d_j g^{rq} - g^{jq} d_j g^{rp}) xi_p eta_q v_r``, which equals
    the honest Lie bracket of the vector fields ``g xi`` and ``g eta``
    (for constant-component covectors) paired with the annihilator ``v``.
    Antisymmetric in (xi, eta); equals ``2 <Gamma(eta, v), xi>`` and
    ``-2 <Gamma(xi, v), eta>``.
    """
    x = np.asarray(x, dtype=np.float64)
    xi = np.asarray(xi, dtype=np.float64)
    eta = np.asarray(eta, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    g = cometric_matrix(field, x)
    _require_annihilator(g, v, tol, "third covector")
    dg = cometric_gradient(field, x)
    return float(
        np.einsum("jp,jrq,p,q,r->", g, dg, xi, eta, v)
        - np.einsum("jq,jrp,p,q,r->", g, dg, xi, eta, v)
    )


def sym_covariant_derivative(
    field: CometricField,
    x: Sequence[float],
    components: Sequence[ex.Expression | str],
) -> np.ndarray:
    """The symmetrized covariant derivative of a tangent field Y.

    ``(nabla_sym Y)^{kq} = g^{kj} d_j Y^q + g^{qj} d_j Y^k - Y^j d_j g^{kq}``
    evaluated at ``x`` with symbolic derivatives of the components.  For
    ``Y = g xi`` with constant xi, contracting the result with an
    annihilator v gives ``2 Gamma(xi, v)``.
    """
    n = field.dim
    if len(components) != n:
        raise ValueError(f"expected {n} components, got {len(components)}")
    trees = [
        ex.parse(c, n) if isinstance(c, str) else c for c in components
    ]
    x = np.asarray(x, dtype=np.float64)
    g = cometric_matrix(field, x)
    dg = cometric_gradient(field, x)
    values = np.array([ex.evaluate(tree, x) for tree in trees])
    jac = np.array(
        [[ex.evaluate(ex.differentiate(tree, j + 1), x) for tree in trees] for j in range(n)]
    )  # jac[j, q] = d_j Y^q
    raised = g @ jac  # (k, q) = g^{kj} d_j Y^q
    return raised + raised.T - np.einsum("j,jkq->kq", values, dg)


def is_two_step_generator(
    field: CometricField,
    x: Sequence[float],
    xi: Sequence[float],
    tol: float = 1e-9,
) -> tuple[bool, float]:
    """Whether v -> Gamma(xi, v) is injective on the annihilator space.

    The map is expressed in orthonormal annihilator and horizontal bases;
    returns the injectivity verdict (smallest singular value above
    ``tol`` relative to the largest) together with that smallest singular
    value, so callers may apply a stricter criterion.
    """
    x = np.asarray(x, dtype=np.float64)
    xi = np.asarray(xi, dtype=np.float64)
    tensor = christoffel_at(field, x)
    if np.linalg.norm(tensor.cometric @ xi) <= ANNIHILATOR_TOL * np.linalg.norm(xi):
        raise ValueError(
            "xi is an annihilator; the generation test needs a covector "
            "that is nonzero modulo annihilators"
        )
    kernel_rows = annihilator_basis(field, x)
    horizontal_rows = horizontal_basis(field, x)
    images = np.array(
        [gamma_contract(tensor, xi, v) for v in kernel_rows]
    )  # (n-m, n)
    matrix = horizontal_rows @ images.T  # (m, n-m)
    singular = np.linalg.svd(matrix, compute_uv=False)
    if singular.size == 0:
        return False, 0.0
    largest = float(singular.max())
    smallest = float(singular.min())
    full_rank = singular.size == kernel_rows.shape[0] and largest > 0.0 and (
        smallest > tol * largest
    )
    return bool(full_rank), smallest
