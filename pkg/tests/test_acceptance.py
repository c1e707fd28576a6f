"""Acceptance suite: the library's advertised numerical guarantees.

Each test pins one end-to-end guarantee at full sample counts and
tolerances — closed-form oracle equivalence, conservation laws, Taylor
and Jacobian identities, the Gauss lemma, generator detection, the
quaternion-model algebra, annihilator fixed points, and the sampled
longest-curve property.  Everything runs on fresh seeded generators, so
failures reproduce deterministically.
"""
from __future__ import annotations

import time

import numpy as np
import pytest

from ssgeo import expmap
from ssgeo.christoffel import bracket_form, christoffel_at, gamma_contract, is_two_step_generator
from ssgeo.field import (
    annihilator_basis,
    causal_character,
    cometric_matrix,
    field_from_dict,
)
from ssgeo.flow import integrate_extremal
from ssgeo.models import (
    MODEL_IDS,
    QUATERNION_Q,
    QuaternionExtremalParams,
    get_model,
    quaternion_closed_form_extremal,
    quaternion_initial_covector,
    quaternion_theta_matrix,
    quaternion_znorm_closed_form,
)
from ssgeo.verify import longest_curve_gap

SEED = 42


def models():
    return [get_model(model_id) for model_id in sorted(MODEL_IDS)]


def random_quaternion_params(rng) -> QuaternionExtremalParams:
    while True:
        xdot0 = rng.uniform(-1, 1, size=4)
        theta = rng.uniform(-1, 1, size=3)
        if np.hypot(theta[1], theta[2]) > 0.1:
            return QuaternionExtremalParams.from_initial_data(xdot0, theta)


def test_quaternion_integrator_matches_closed_form():
    rng = np.random.default_rng(SEED)
    field = get_model("quaternion-h-type")
    start = time.perf_counter()
    worst = 0.0
    for _ in range(50):
        params = random_quaternion_params(rng)
        xi0 = quaternion_initial_covector(params)
        trajectory = integrate_extremal(field, np.zeros(7), xi0, 1.0, step=1e-3)
        xs, zs = quaternion_closed_form_extremal(params, trajectory.ts)
        reference = np.concatenate([xs, zs], axis=1)
        worst = max(worst, float(np.max(np.abs(trajectory.xs - reference))))
    elapsed = time.perf_counter() - start
    assert worst <= 1e-6
    assert elapsed <= 10.0


def test_hamiltonian_conserved_along_extremals():
    rng = np.random.default_rng(SEED + 1)
    for field in models():
        worst = 0.0
        for _ in range(50):
            xi0 = rng.normal(size=field.dim)
            trajectory = integrate_extremal(
                field, np.zeros(field.dim), xi0, 1.0, step=1e-3
            )
            worst = max(worst, float(np.max(np.abs(trajectory.hs - trajectory.h0))))
        assert worst <= 1e-9


def test_taylor_coefficients_match_cometric_and_christoffel():
    rng = np.random.default_rng(SEED + 2)
    for field in models():
        for _ in range(20):
            p = rng.normal(scale=0.5, size=field.dim)
            coeffs = expmap.taylor_coefficients(field, p)
            assert np.max(np.abs(coeffs.gamma1 - cometric_matrix(field, p))) <= 1e-12
            assert np.max(np.abs(coeffs.gamma2 + christoffel_at(field, p).gamma)) <= 1e-12


def test_taylor_remainder_shrinks_fourteenfold_per_halving():
    rng = np.random.default_rng(SEED + 3)
    for field in models():
        for _ in range(3):
            p = rng.normal(scale=0.3, size=field.dim)
            coeffs = expmap.taylor_coefficients(field, p)
            u = rng.normal(size=field.dim)
            u /= np.linalg.norm(u)
            errors = [
                np.linalg.norm(
                    expmap.exp(field, p, s * u) - expmap.taylor_exp(coeffs, s * u)
                )
                for s in (1e-1, 5e-2, 2.5e-2)
            ]
            assert errors[0] / errors[1] >= 14.0
            assert errors[1] / errors[2] >= 14.0


def test_jacobian_determinant_homogeneity():
    rng = np.random.default_rng(SEED + 4)
    for field in models():
        exponent = 2 * (field.dim - field.rank)
        origin = np.zeros(field.dim)
        for _ in range(2):
            u = rng.normal(size=field.dim)
            if abs(causal_character(field, origin, u).scalar) < 0.05:
                u[0] += 0.5  # step off the null cone
            base = expmap.exp_jacobian(field, origin, u).det_w_tilde
            for s in (0.5, 2.0, 3.0):
                scaled = expmap.exp_jacobian(field, origin, s * u).det_w_tilde
                assert scaled / base == pytest.approx(s**exponent, rel=1e-8)


def test_gauss_lemma_residual():
    rng = np.random.default_rng(SEED + 5)
    for field in models():
        worst = 0.0
        for _ in range(50):
            p = rng.uniform(-0.3, 0.3, size=field.dim)
            u = rng.normal(size=field.dim)
            w = rng.normal(size=field.dim)
            worst = max(worst, expmap.gauss_lemma_check(field, p, u, w, step=2e-3))
        assert worst <= 1e-6


def _random_annihilator(rng, field, x):
    rows = annihilator_basis(field, x)
    return rng.normal(size=rows.shape[0]) @ rows


@pytest.mark.xfail(
    strict=True,
    reason=(
        "antisymmetry of <[g xi, g eta], v> in (xi, eta) forces the pairing "
        "to equal -2<Gamma(xi,v),eta> (equivalently +2<Gamma(eta,v),xi>); "
        "the +2<Gamma(xi,v),eta> form checked here has the arguments swapped "
        "and the finite-difference oracle below confirms the sign"
    ),
)
def test_bracket_pairing_against_first_argument():
    rng = np.random.default_rng(SEED + 6)
    worst = 0.0
    for field in models():
        for _ in range(100):
            x = rng.normal(scale=0.5, size=field.dim)
            xi = rng.normal(size=field.dim)
            eta = rng.normal(size=field.dim)
            v = _random_annihilator(rng, field, x)
            lhs = bracket_form(field, x, xi, eta, v)
            tensor = christoffel_at(field, x)
            worst = max(worst, abs(lhs - 2.0 * float(gamma_contract(tensor, xi, v) @ eta)))
    assert worst <= 1e-9


def test_bracket_pairing_against_second_argument_and_fd_oracle():
    rng = np.random.default_rng(SEED + 6)
    h = 1e-6
    worst_identity = 0.0
    worst_oracle = 0.0
    for field in models():
        for _ in range(100):
            x = rng.normal(scale=0.5, size=field.dim)
            xi = rng.normal(size=field.dim)
            eta = rng.normal(size=field.dim)
            v = _random_annihilator(rng, field, x)
            lhs = bracket_form(field, x, xi, eta, v)
            tensor = christoffel_at(field, x)
            rhs = 2.0 * float(gamma_contract(tensor, eta, v) @ xi)
            assert rhs == pytest.approx(
                -2.0 * float(gamma_contract(tensor, xi, v) @ eta), abs=1e-9
            )
            worst_identity = max(worst_identity, abs(lhs - rhs))
            # Honest Lie bracket of the frame fields g xi and g eta by
            # central differences of the cometric.
            bracket = np.zeros(field.dim)
            g = cometric_matrix(field, x)
            for j in range(field.dim):
                step = np.zeros(field.dim)
                step[j] = h
                dg_j = (cometric_matrix(field, x + step) - cometric_matrix(field, x - step)) / (2 * h)
                bracket += (g @ xi)[j] * (dg_j @ eta) - (g @ eta)[j] * (dg_j @ xi)
            worst_oracle = max(worst_oracle, abs(lhs - float(bracket @ v)))
    assert worst_identity <= 1e-9
    assert worst_oracle <= 1e-8


CONSTANT_FIXTURE = {
    "dim": 3,
    "rank": 2,
    "index": 1,
    "entries": [
        {"j": 1, "k": 1, "expr": "-1"},
        {"j": 2, "k": 2, "expr": "1"},
    ],
}


def test_two_step_generator_detection():
    rng = np.random.default_rng(SEED + 7)
    for field in models():
        for _ in range(100):
            xi = rng.normal(size=field.dim)
            generating, smallest = is_two_step_generator(field, np.zeros(field.dim), xi)
            assert generating, f"smallest singular value {smallest}"
    flat = field_from_dict(CONSTANT_FIXTURE)
    generating, smallest = is_two_step_generator(flat, np.zeros(3), np.array([1.0, 0.0, 0.0]))
    assert not generating
    assert smallest == 0.0


def test_quaternion_algebra_identities():
    rng = np.random.default_rng(SEED + 8)
    # Frame matrix: Q-skewness exact, eigenvalues {a, -a, conj a, -conj a}.
    for _ in range(100):
        theta = rng.normal(size=3)
        A = quaternion_theta_matrix(theta)
        assert np.max(np.abs(QUATERNION_Q @ A + A.T @ QUATERNION_Q)) <= 1e-14
        a = np.hypot(theta[1], theta[2]) + 1j * theta[0]
        for value in (a, -a, np.conj(a), -np.conj(a)):
            assert abs(np.linalg.det(A - value * np.eye(4))) <= 1e-9
    ts = np.linspace(0.0, 1.0, 201)
    for _ in range(20):
        params = random_quaternion_params(rng)
        c1, c2, c3, c4 = params.c
        assert abs(c1 * c2 - np.conj(c3 * c4)) <= 1e-10
        assert (c1 * c3).real <= 1e-10 and abs((c1 * c3).imag) <= 1e-10
        assert (c2 * c4).real <= 1e-10 and abs((c2 * c4).imag) <= 1e-10
        _, zs = quaternion_closed_form_extremal(params, ts)
        coordinate = np.sum(zs * zs, axis=1)
        closed = quaternion_znorm_closed_form(params, ts)
        scale = max(1e-30, float(np.max(np.abs(coordinate))))
        assert float(np.max(np.abs(closed - coordinate))) / scale <= 1e-8


def test_annihilators_are_exponential_fixed_points():
    rng = np.random.default_rng(SEED + 9)
    for field in models():
        for _ in range(20):
            p = rng.normal(scale=0.5, size=field.dim)
            v = _random_annihilator(rng, field, p)
            assert np.linalg.norm(expmap.exp(field, p, v) - p) <= 1e-12


def test_no_sampled_timelike_perturbation_beats_extremal():
    gap = longest_curve_gap(SEED + 10, draws=100)
    assert gap <= 1e-6
