"""Built-in homogeneous models and their closed-form extremals.

Two group models ship with the library:

``heisenberg-lorentz``
    The 3-dimensional Heisenberg group with horizontal frames
    ``X = d/dx + (y/2) d/dz``, ``Y = d/dy - (x/2) d/dz`` and the indefinite
    product ``Q(X, X) = -1``, ``Q(Y, Y) = 1``.

``quaternion-h-type``
    The 7-dimensional quaternion H-type group: four horizontal frames over a
    3-dimensional center, with signature (2, 2) on the horizontal space.
    The frames are ``X_a = d/dx_a + (1/2) (J^b^T x)_a d/dz_b`` for the three
    complex structures ``J^1, J^2, J^3`` written below, which reproduce the
    commutators ``[X_1, X_2] = -Z_1``, ``[X_1, X_3] = Z_3``, ... of the
    quaternion relations.

For the quaternion model the normal extremals through the origin admit
closed-form complex-exponential expressions parameterized by the initial
horizontal velocity and the three vertical first integrals ``theta``;
:class:`QuaternionExtremalParams` packages the derived constants and
:func:`quaternion_closed_form_extremal` evaluates the curves.  These serve
as independent oracles for the numerical integrator.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import Sequence

import numpy as np

from ssgeo import expr as ex
from ssgeo.field import CometricField

__all__ = [
    "MODEL_IDS",
    "GroupElement",
    "QuaternionExtremalParams",
    "InternalConsistencyError",
    "heisenberg_lorentz",
    "quaternion_group",
    "get_model",
    "frame_fields",
    "frame_at",
    "group_element",
    "element_coords",
    "group_multiply",
    "quaternion_theta_matrix",
    "quaternion_initial_covector",
    "quaternion_closed_form_extremal",
    "quaternion_znorm_closed_form",
    "homogeneous_norm",
    "QUATERNION_J",
    "QUATERNION_EPSILON",
]

HEISENBERG = "heisenberg-lorentz"
QUATERNION = "quaternion-h-type"
MODEL_IDS = (HEISENBERG, QUATERNION)

#: Signs of the horizontal frames in the quaternion cometric.
QUATERNION_EPSILON = np.array([-1.0, -1.0, 1.0, 1.0])

#: The three skew 4x4 structure matrices; [X_a, X_b] = J^beta_{ab} Z_beta.
QUATERNION_J = np.array(
    [
        [[0, -1, 0, 0], [1, 0, 0, 0], [0, 0, 0, -1], [0, 0, 1, 0]],
        [[0, 0, 0, 1], [0, 0, 1, 0], [0, -1, 0, 0], [-1, 0, 0, 0]],
        [[0, 0, 1, 0], [0, 0, 0, -1], [-1, 0, 0, 0], [0, 1, 0, 0]],
    ],
    dtype=np.float64,
)

#: Flat horizontal metric of the quaternion model, Q = diag(-1,-1,1,1).
QUATERNION_Q = np.diag(QUATERNION_EPSILON)

#: Threshold below which the closed-form parameterization degenerates.
MIN_ABS_K = 1e-6

#: Imaginary residue (relative) above which a "real" output is rejected.
RESIDUE_TOL = 1e-8


class InternalConsistencyError(RuntimeError):
    """A quantity that must be real carries a non-negligible imaginary part."""


# ---------------------------------------------------------------------------
# Model fields.
# ---------------------------------------------------------------------------


def _frame_monomials(model_id: str) -> list[list[ex.Monomials]]:
    """Frame vector fields as per-component monomial dictionaries."""
    if model_id == HEISENBERG:
        zero3 = (0, 0, 0)
        return [
            [{zero3: 1.0}, {}, {(0, 1, 0): 0.5}],
            [{}, {zero3: 1.0}, {(1, 0, 0): -0.5}],
        ]
    if model_id == QUATERNION:
        zero7 = (0,) * 7
        frames: list[list[ex.Monomials]] = []
        for a in range(4):
            components: list[ex.Monomials] = [{} for _ in range(7)]
            components[a] = {zero7: 1.0}
            for beta in range(3):
                for b in range(4):
                    weight = 0.5 * QUATERNION_J[beta][b, a]
                    if weight != 0.0:
                        key = tuple(1 if i == b else 0 for i in range(7))
                        components[4 + beta][key] = (
                            components[4 + beta].get(key, 0.0) + weight
                        )
            frames.append(components)
        return frames
    raise ValueError(f"unknown model id {model_id!r}; expected one of {MODEL_IDS}")


def _field_from_frames(
    frames: list[list[ex.Monomials]], signs: Sequence[float], dim: int, index: int
) -> CometricField:
    """Assemble g^{jk} = sum_a signs[a] X_a^j X_a^k from frame monomials."""
    upper: dict[tuple[int, int], ex.Expression] = {}
    for j in range(dim):
        for k in range(j, dim):
            acc: ex.Monomials = {}
            for sign, frame in zip(signs, frames):
                acc = ex.poly_add(acc, ex.poly_mul(frame[j], frame[k]), sign)
            upper[(j + 1, k + 1)] = ex.from_monomials(acc, dim)
    return CometricField.from_entries(dim, len(frames), index, upper)


@lru_cache(maxsize=None)
def heisenberg_lorentz() -> CometricField:
    """The Lorentzian Heisenberg model (n=3, m=2, index 1)."""
    return _field_from_frames(_frame_monomials(HEISENBERG), (-1.0, 1.0), 3, 1)


@lru_cache(maxsize=None)
def quaternion_group() -> CometricField:
    """The quaternion H-type model (n=7, m=4, index 2)."""
    return _field_from_frames(
        _frame_monomials(QUATERNION), QUATERNION_EPSILON, 7, 2
    )


def get_model(model_id: str) -> CometricField:
    """Look up a built-in model by its identifier."""
    if model_id == HEISENBERG:
        return heisenberg_lorentz()
    if model_id == QUATERNION:
        return quaternion_group()
    raise ValueError(f"unknown model id {model_id!r}; expected one of {MODEL_IDS}")


@lru_cache(maxsize=None)
def frame_fields(model_id: str) -> tuple[tuple[ex.Expression, ...], ...]:
    """The horizontal frame fields as tuples of component expressions."""
    dim = 3 if model_id == HEISENBERG else 7
    return tuple(
        tuple(ex.from_monomials(component, dim) for component in frame)
        for frame in _frame_monomials(model_id)
    )


def frame_at(model_id: str, x: Sequence[float]) -> np.ndarray:
    """Frame vectors evaluated at a point, one per row: shape (m, n)."""
    x = np.asarray(x, dtype=np.float64)
    return np.array(
        [
            [ex.evaluate(component, x) for component in frame]
            for frame in frame_fields(model_id)
        ]
    )


# ---------------------------------------------------------------------------
# Group structure.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GroupElement:
    """A point of a model group, split into horizontal and center parts."""

    x: tuple[float, ...]
    z: tuple[float, ...]


def group_element(model_id: str, coords: Sequence[float]) -> GroupElement:
    """Split flat coordinates into a group element for the given model."""
    coords = tuple(float(c) for c in coords)
    m = 2 if model_id == HEISENBERG else 4
    n = 3 if model_id == HEISENBERG else 7
    if model_id not in MODEL_IDS:
        raise ValueError(f"unknown model id {model_id!r}; expected one of {MODEL_IDS}")
    if len(coords) != n:
        raise ValueError(f"expected {n} coordinates for {model_id}, got {len(coords)}")
    return GroupElement(coords[:m], coords[m:])


def element_coords(element: GroupElement) -> np.ndarray:
    """Flat coordinate array of a group element."""
    return np.array(element.x + element.z, dtype=np.float64)


def group_multiply(model_id: str, left: GroupElement, right: GroupElement) -> GroupElement:
    """Group law; the center picks up half the horizontal symplectic form."""
    x1 = np.asarray(left.x, dtype=np.float64)
    x2 = np.asarray(right.x, dtype=np.float64)
    z1 = np.asarray(left.z, dtype=np.float64)
    z2 = np.asarray(right.z, dtype=np.float64)
    if model_id == HEISENBERG:
        twist = 0.5 * (x1[1] * x2[0] - x1[0] * x2[1])
        return GroupElement(tuple(x1 + x2), (float(z1[0] + z2[0] + twist),))
    if model_id == QUATERNION:
        twist = 0.5 * np.einsum("bja,j,a->b", QUATERNION_J, x1, x2)
        return GroupElement(tuple(x1 + x2), tuple(z1 + z2 + twist))
    raise ValueError(f"unknown model id {model_id!r}; expected one of {MODEL_IDS}")


def left_translation(model_id: str, left: Sequence[float], point: Sequence[float]) -> np.ndarray:
    """Coordinates of ``left * point`` (both given as flat coordinates)."""
    product = group_multiply(
        model_id, group_element(model_id, left), group_element(model_id, point)
    )
    return element_coords(product)


# ---------------------------------------------------------------------------
# Closed-form extremals of the quaternion model.
# ---------------------------------------------------------------------------


def quaternion_theta_matrix(theta: Sequence[float]) -> np.ndarray:
    """The 4x4 matrix A with x-double-dot = A x-dot along an extremal.

    A is skew with respect to Q = diag(-1,-1,1,1): QA + A^T Q = 0, and its
    eigenvalues are {a, -a, conj(a), -conj(a)} with a = |k| + i theta_1,
    k = theta_2 + i theta_3.
    """
    t1, t2, t3 = (float(v) for v in theta)
    return np.array(
        [
            [0.0, -t1, t3, t2],
            [t1, 0.0, t2, -t3],
            [t3, t2, 0.0, t1],
            [t2, -t3, -t1, 0.0],
        ]
    )


@dataclass(frozen=True)
class QuaternionExtremalParams:
    """Constants of a closed-form quaternion extremal through the origin.

    Built from the initial horizontal velocity and the vertical first
    integrals; the derived complex constants c1..c4 drive the exponential
    formulas.  Requires |k| = |(theta_2, theta_3)| above :data:`MIN_ABS_K`.
    """

    xdot0: tuple[float, float, float, float]
    theta: tuple[float, float, float]

    def __post_init__(self) -> None:
        if len(self.xdot0) != 4 or len(self.theta) != 3:
            raise ValueError("expected 4 velocity components and 3 theta values")
        if self.abs_k < MIN_ABS_K:
            raise ValueError(
                f"|k| = {self.abs_k:.3e} below {MIN_ABS_K}; the closed form "
                "degenerates -- use the numerical integrator"
            )

    @classmethod
    def from_initial_data(
        cls, xdot0: Sequence[float], theta: Sequence[float]
    ) -> QuaternionExtremalParams:
        return cls(tuple(float(v) for v in xdot0), tuple(float(v) for v in theta))

    @property
    def k(self) -> complex:
        return complex(self.theta[1], self.theta[2])

    @property
    def abs_k(self) -> float:
        return float(np.hypot(self.theta[1], self.theta[2]))

    @property
    def a(self) -> complex:
        return complex(self.abs_k, self.theta[0])

    @cached_property
    def w1(self) -> complex:
        return (self.k / self.abs_k) * complex(self.xdot0[0], self.xdot0[1])

    @cached_property
    def w2(self) -> complex:
        return complex(self.xdot0[3], self.xdot0[2])

    @cached_property
    def c(self) -> tuple[complex, complex, complex, complex]:
        k, r, a = self.k, self.abs_k, self.a
        kb, ab = np.conj(k), np.conj(a)
        v12 = complex(self.xdot0[0], self.xdot0[1])
        v43 = complex(self.xdot0[3], self.xdot0[2])
        c1 = (k * v12 + r * v43) / (4j * a * k * r)
        c2 = (-kb * np.conj(v12) + r * np.conj(v43)) / (4j * a * kb * r)
        c3 = (kb * np.conj(v12) + r * np.conj(v43)) / (4j * ab * kb * r)
        c4 = (-k * v12 + r * v43) / (4j * ab * k * r)
        return (complex(c1), complex(c2), complex(c3), complex(c4))

    @property
    def c1(self) -> complex:
        return self.c[0]

    @property
    def c2(self) -> complex:
        return self.c[1]

    @property
    def c3(self) -> complex:
        return self.c[2]

    @property
    def c4(self) -> complex:
        return self.c[3]


def quaternion_initial_covector(params: QuaternionExtremalParams) -> np.ndarray:
    """Initial covector at the origin reproducing (xdot0, theta).

    At x = 0 the Hamiltonian system gives xdot = diag(-1,-1,1,1) xi_h and
    constant vertical components, so xi = (-xdot1, -xdot2, xdot3, xdot4,
    theta1, theta2, theta3).
    """
    v = params.xdot0
    return np.array(
        [-v[0], -v[1], v[2], v[3], params.theta[0], params.theta[1], params.theta[2]]
    )


def _real_part(values: np.ndarray, label: str) -> np.ndarray:
    scale = max(1.0, float(np.max(np.abs(values.real))))
    residue = float(np.max(np.abs(values.imag)))
    if residue > RESIDUE_TOL * scale:
        raise InternalConsistencyError(
            f"{label} should be real; imaginary residue {residue:.3e} "
            f"exceeds {RESIDUE_TOL:.0e} (relative)"
        )
    return values.real


def quaternion_closed_form_extremal(
    params: QuaternionExtremalParams, t: float | Sequence[float]
) -> tuple[np.ndarray, np.ndarray]:
    """Closed-form extremal through the origin at parameter value(s) ``t``.

    Returns ``(x, z)`` with shapes (..., 4) and (..., 3) matching the shape
    of ``t``.  The formulas are complex-exponential combinations whose
    imaginary parts must cancel; a residue above tolerance raises
    :class:`InternalConsistencyError`.
    """
    t = np.asarray(t, dtype=np.float64)
    c1, c2, c3, c4 = params.c
    k, r, a = params.k, params.abs_k, params.a
    kb, ab = np.conj(k), np.conj(a)
    t1, t2, t3 = params.theta

    up = np.exp(a * t)
    down = np.exp(-a * t)
    upb = np.exp(ab * t)
    downb = np.exp(-ab * t)

    x1 = 1j * r * (c1 * up + c2 * down + c3 * upb + c4 * downb) - 1j * r * (
        c1 + c2 + c3 + c4
    )
    x2 = r * (c1 * up - c2 * down - c3 * upb + c4 * downb) - r * (c1 - c2 - c3 + c4)
    x3 = (
        c1 * k * up
        + c2 * kb * down
        - c3 * kb * upb
        - c4 * k * downb
        - (c1 * k + c2 * kb - c3 * kb - c4 * k)
    )
    x4 = 1j * (c1 * k * up - c2 * kb * down + c3 * kb * upb - c4 * k * downb) - 1j * (
        c1 * k - c2 * kb + c3 * kb - c4 * k
    )

    c12, c34, c13, c24 = c1 * c2, c3 * c4, c1 * c3, c2 * c4
    z1 = (
        2j
        * r**2
        * (
            -2.0 * (c12 * a - c34 * ab) * t
            + c12 * (up - down)
            - c34 * (upb - downb)
        )
    )
    commuting = (
        -2.0 * (c12 * a + c34 * ab) * t + c12 * (up - down) + c34 * (upb - downb)
    )
    growing = c13 * np.exp(2 * r * t) + c24 * np.exp(-2 * r * t) - c13 - c24
    oscillating = c13 * up + c24 * down - c13 * upb - c24 * downb
    z2 = 2 * t2 * r * commuting + 2 * t1 * t3 * growing + 2j * t3 * r * oscillating
    z3 = 2 * t3 * r * commuting - 2 * t1 * t2 * growing - 2j * t2 * r * oscillating

    x = _real_part(np.stack([x1, x2, x3, x4], axis=-1), "x(t)")
    z = _real_part(np.stack([z1, z2, z3], axis=-1), "z(t)")
    return x, z


def quaternion_znorm_closed_form(
    params: QuaternionExtremalParams, t: float | Sequence[float]
) -> float | np.ndarray:
    """The squared center norm z1^2 + z2^2 + z3^2 along the closed form.

    Evaluates the single-formula expression in |k|, theta_1 and the real
    products of the c-constants, avoiding the coordinate formulas entirely.
    """
    t = np.asarray(t, dtype=np.float64)
    c1, c2, c3, c4 = params.c
    r, t1 = params.abs_k, params.theta[0]
    c13 = _real_part(np.asarray(c1 * c3), "c1*c3")
    c24 = _real_part(np.asarray(c2 * c4), "c2*c4")
    product = _real_part(np.asarray(c1 * c2 * c3 * c4), "c1*c2*c3*c4")
    first = (
        16.0
        * r**2
        * (c13 * np.exp(r * t) - c24 * np.exp(-r * t)) ** 2
        * (t1 * np.sinh(r * t) - r * np.sin(t1 * t)) ** 2
    )
    second = (
        64.0
        * r**4
        * product
        * (
            (r * t - np.sinh(r * t) * np.cos(t1 * t)) ** 2
            + (t1 * t - np.cosh(r * t) * np.sin(t1 * t)) ** 2
        )
    )
    value = first + second
    return float(value) if value.ndim == 0 else value


def homogeneous_norm(
    model_id: str, x: Sequence[float], z: Sequence[float]
) -> float:
    """Anisotropic group norm ||(x, z)|| of the quaternion model.

    The fourth power is the square of the indefinite horizontal quadratic
    form plus the squared Euclidean norm of the center part.
    """
    if model_id != QUATERNION:
        raise ValueError(f"homogeneous norm is defined for {QUATERNION!r} only")
    x = np.asarray(x, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    quad = float(x @ (QUATERNION_EPSILON * x))
    return float((quad**2 + float(z @ z)) ** 0.25)
