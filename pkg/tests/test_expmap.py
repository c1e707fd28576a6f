"""Tests for the exponential map, its Taylor expansion, and the Jacobian."""
from __future__ import annotations

import numpy as np
import pytest

from ssgeo import expmap
from ssgeo.christoffel import christoffel_at
from ssgeo.field import (
    CometricField,
    RankError,
    annihilator_basis,
    cometric_gradient,
    cometric_matrix,
)
from ssgeo.flow import BlowUpError, integrate_extremal
from ssgeo.models import frame_at, heisenberg_lorentz, quaternion_group


def both_models():
    return [("heisenberg", heisenberg_lorentz()), ("quaternion", quaternion_group())]


def constant_field() -> CometricField:
    return CometricField.from_entries(
        3, 2, 1, {(1, 1): "-1", (2, 2): "1"}
    )


def quartic_field() -> CometricField:
    return CometricField.from_entries(
        3, 2, 0, {(1, 1): "1 + x1*x1*x1*x1", (2, 2): "1"}
    )


# ---------------------------------------------------------------------------
# Taylor coefficients.
# ---------------------------------------------------------------------------


def test_gamma1_is_cometric_and_gamma2_is_minus_christoffel():
    rng = np.random.default_rng(41)
    for _, field in both_models():
        for _ in range(5):
            p = rng.normal(scale=0.5, size=field.dim)
            coeffs = expmap.taylor_coefficients(field, p)
            assert np.max(np.abs(coeffs.gamma1 - cometric_matrix(field, p))) == 0.0
            gamma = christoffel_at(field, p).gamma
            assert np.max(np.abs(coeffs.gamma2 + gamma)) <= 1e-12


def test_constant_cometric_has_vanishing_higher_coefficients():
    coeffs = expmap.taylor_coefficients(constant_field(), np.array([0.3, -0.1, 2.0]))
    assert np.all(coeffs.gamma2 == 0.0)
    assert np.all(coeffs.gamma3 == 0.0)


def test_gamma3_totally_symmetric_in_trailing_indices():
    rng = np.random.default_rng(42)
    for _, field in both_models():
        p = rng.normal(scale=0.4, size=field.dim)
        g3 = expmap.taylor_coefficients(field, p).gamma3
        for perm in ((0, 1, 3, 2), (0, 2, 1, 3), (0, 3, 2, 1), (0, 2, 3, 1)):
            assert np.max(np.abs(g3 - g3.transpose(perm))) <= 1e-15


def test_gamma3_vertical_block_vanishes_at_adapted_origin():
    # With g(0) = diag(eps, 0) every gamma3 component whose three trailing
    # indices all point along the kernel must vanish identically.
    for _, field in both_models():
        m = field.rank
        g3 = expmap.taylor_coefficients(field, np.zeros(field.dim)).gamma3
        assert np.max(np.abs(g3[m:, m:, m:, m:])) == 0.0


def test_gamma3_closed_form_oracle_at_origin():
    # Independent evaluation of the vertical-vertical-horizontal-horizontal
    # block from the Christoffel tensor and its finite-difference derivative:
    # gamma3^{ab,cd} = (1/3)(G^{a,c,j} dg^{b,d}/dx^j + G^{a,d,j} dg^{c,b}/dx^j
    #                   - eps_d dG^{a,b,c}/dx^d - eps_c dG^{a,b,d}/dx^c).
    step = 1e-5
    for _, field in both_models():
        n, m = field.dim, field.rank
        origin = np.zeros(n)
        eps = np.array([-1.0] * field.index + [1.0] * (field.rank - field.index))
        gamma = christoffel_at(field, origin).gamma
        dg = cometric_gradient(field, origin)
        dgamma = np.empty((n, n, n, n))
        for j in range(n):
            offset = step * np.eye(n)[j]
            dgamma[j] = (
                christoffel_at(field, offset).gamma
                - christoffel_at(field, -offset).gamma
            ) / (2.0 * step)
        g3 = expmap.taylor_coefficients(field, origin).gamma3
        for alpha in range(m, n):
            for beta in range(m, n):
                for a in range(m):
                    for b in range(m):
                        oracle = (
                            gamma[alpha, a] @ dg[:, beta, b]
                            + gamma[alpha, b] @ dg[:, a, beta]
                            - eps[b] * dgamma[b, alpha, beta, a]
                            - eps[a] * dgamma[a, alpha, beta, b]
                        ) / 3.0
                        assert abs(g3[alpha, beta, a, b] - oracle) <= 1e-8


def test_truncated_vertical_block_matches_taylor_quadratic_form():
    # The quadratic vertical block of the truncated Jacobian is exactly half
    # of the gamma3 quadratic form; the two are computed by disjoint paths.
    rng = np.random.default_rng(43)
    for _, field in both_models():
        n, m = field.dim, field.rank
        origin = np.zeros(n)
        g3 = expmap.taylor_coefficients(field, origin).gamma3
        for _ in range(3):
            u = rng.normal(size=n)
            blocks = expmap.exp_jacobian(field, origin, u, step=0.25)
            quad = 0.5 * np.einsum("kjab,a,b->kj", g3[m:, m:], u, u)
            assert np.max(np.abs(blocks.w_tilde[m:, m:] - quad)) <= 1e-13


def test_taylor_exp_at_zero_and_first_order():
    field = heisenberg_lorentz()
    p = np.array([0.7, -0.2, 1.5])
    coeffs = expmap.taylor_coefficients(field, p)
    assert np.array_equal(expmap.taylor_exp(coeffs, np.zeros(3)), p)
    # g(p) dx = -X(p): the first-order response to a dx covector is the
    # negated timelike frame vector.
    X = frame_at("heisenberg-lorentz", p)[0]
    assert np.max(np.abs(coeffs.gamma1 @ np.eye(3)[0] + X)) <= 1e-15


def test_taylor_remainder_shrinks_at_fourth_order():
    rng = np.random.default_rng(44)
    for _, field in both_models():
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


# ---------------------------------------------------------------------------
# Exponential map values.
# ---------------------------------------------------------------------------


def test_exp_fixes_base_point_at_zero_and_annihilators():
    rng = np.random.default_rng(45)
    for _, field in both_models():
        p = rng.normal(scale=0.4, size=field.dim)
        assert np.max(np.abs(expmap.exp(field, p, np.zeros(field.dim)) - p)) == 0.0
        kernel = annihilator_basis(field, p)
        for _ in range(5):
            v = rng.normal(size=kernel.shape[0]) @ kernel
            assert np.max(np.abs(expmap.exp(field, p, v) - p)) <= 1e-12


def test_exp_homogeneity_matches_time_scaling():
    rng = np.random.default_rng(46)
    for _, field in both_models():
        p = rng.normal(scale=0.3, size=field.dim)
        for _ in range(3):
            u = rng.normal(size=field.dim)
            s = rng.uniform(0.1, 1.0)
            endpoint = expmap.exp(field, p, s * u)
            trajectory = integrate_extremal(field, p, u, float(s), step=1e-3)
            assert np.linalg.norm(endpoint - trajectory.xs[-1]) <= 1e-8


def test_exp_blow_up_propagates():
    field = quartic_field()
    with pytest.raises(BlowUpError):
        expmap.exp(field, [1.0, 0.0, 0.0], [3.0, 0.0, 0.0])
    for method in ("variational", "finite-difference"):
        with pytest.raises(BlowUpError):
            expmap.exp_jacobian(field, [1.0, 0.0, 0.0], [3.0, 0.0, 0.0], method)


# ---------------------------------------------------------------------------
# Jacobian.
# ---------------------------------------------------------------------------


def test_jacobian_at_zero_covector():
    rng = np.random.default_rng(47)
    for _, field in both_models():
        n, m = field.dim, field.rank
        p = rng.normal(scale=0.3, size=n)
        blocks = expmap.exp_jacobian(field, p, np.zeros(n))
        assert np.max(np.abs(blocks.W - cometric_matrix(field, p))) <= 1e-12
        assert np.max(np.abs(blocks.A - np.diag(blocks.epsilon))) <= 1e-12
        assert np.max(np.abs(blocks.B)) <= 1e-12
        assert np.max(np.abs(blocks.C)) <= 1e-12
        assert np.max(np.abs(blocks.D)) <= 1e-12
        for v in annihilator_basis(field, p):
            assert np.linalg.norm(blocks.W @ v) <= 1e-12


def test_jacobian_block_leading_orders():
    rng = np.random.default_rng(48)
    for _, field in both_models():
        n, m = field.dim, field.rank
        p = rng.normal(scale=0.2, size=n)
        u = rng.normal(size=n)
        a_errors, b_errors = [], []
        for s in (2e-2, 1e-2):
            blocks = expmap.exp_jacobian(field, p, s * u, step=2e-3)
            a_errors.append(np.max(np.abs(blocks.A - np.diag(blocks.epsilon))))
            b_errors.append(np.max(np.abs(blocks.B - blocks.w_tilde[:m, m:])))
        assert a_errors[0] / a_errors[1] >= 1.8  # O(|u|)
        assert b_errors[0] / b_errors[1] >= 3.0  # O(|u|^2)


def test_variational_and_finite_difference_jacobians_agree():
    rng = np.random.default_rng(49)
    for _, field in both_models():
        for _ in range(3):
            p = rng.normal(scale=0.3, size=field.dim)
            u = rng.normal(size=field.dim)
            variational = expmap.exp_jacobian(field, p, u, "variational", step=5e-3)
            probed = expmap.exp_jacobian(field, p, u, "finite-difference", step=5e-3)
            assert np.max(np.abs(variational.W - probed.W)) <= 1e-5


def test_unknown_jacobian_method_rejected():
    field = heisenberg_lorentz()
    with pytest.raises(ValueError, match="unknown method"):
        expmap.exp_jacobian(field, np.zeros(3), np.zeros(3), "symbolic")


def test_adapted_basis_diagonalizes_and_validates_signature():
    rng = np.random.default_rng(50)
    for _, field in both_models():
        p = rng.normal(scale=0.4, size=field.dim)
        S, epsilon = expmap.adapted_basis(field, p)
        target = np.zeros((field.dim, field.dim))
        target[: field.rank, : field.rank] = np.diag(epsilon)
        transformed = S @ cometric_matrix(field, p) @ S.T
        assert np.max(np.abs(transformed - target)) <= 1e-12
    # identity at the model origins, exactly
    for _, field in both_models():
        S, _ = expmap.adapted_basis(field, np.zeros(field.dim))
        assert np.array_equal(S, np.eye(field.dim))
    # a point where the eigenvalue signs contradict the declared signature
    degenerate = CometricField.from_entries(
        3, 2, 0, {(1, 1): "x1*x1", (2, 2): "1"}
    )
    with pytest.raises(RankError):
        expmap.adapted_basis(degenerate, np.zeros(3))


# ---------------------------------------------------------------------------
# Truncated determinant and the diffeomorphism test.
# ---------------------------------------------------------------------------


def test_truncated_determinant_scaling():
    rng = np.random.default_rng(51)
    for _, field in both_models():
        degree = 2 * (field.dim - field.rank)
        p = rng.normal(scale=0.2, size=field.dim)
        u = rng.normal(size=field.dim)
        det_u, _ = expmap.local_diffeo_test(field, p, u)
        for s in (0.5, 2.0, 3.0):
            det_su, _ = expmap.local_diffeo_test(field, p, s * u)
            assert det_su == pytest.approx(s**degree * det_u, rel=1e-8)


def test_truncated_determinant_reduced_identity():
    # |det W~| equals the determinant of the sign-weighted quadratic form
    # (1/3) B~^T diag(eps) B~ after eliminating the C~ row block.
    rng = np.random.default_rng(52)
    for _, field in both_models():
        m = field.rank
        p = rng.normal(scale=0.3, size=field.dim)
        for _ in range(5):
            u = rng.normal(size=field.dim)
            blocks = expmap.exp_jacobian(field, p, u, step=0.25)
            B = blocks.w_tilde[:m, m:]
            reduced = np.linalg.det(B.T @ np.diag(blocks.epsilon) @ B / 3.0)
            assert abs(blocks.det_w_tilde) == pytest.approx(
                abs(reduced), rel=1e-9, abs=1e-15
            )


def test_heisenberg_truncated_determinant_frozen():
    field = heisenberg_lorentz()
    origin = np.zeros(3)
    det, verdict = expmap.local_diffeo_test(field, origin, np.array([1.0, 0.0, 0.0]))
    assert det == pytest.approx(-1.0 / 12.0, abs=1e-15)
    assert verdict
    rng = np.random.default_rng(53)
    for _ in range(5):
        u = rng.normal(size=3)
        det, _ = expmap.local_diffeo_test(field, origin, u)
        assert det == pytest.approx(-(u[0] ** 2 - u[1] ** 2) / 12.0, abs=1e-14)


def test_constant_cometric_truncated_determinant_vanishes():
    field = constant_field()
    rng = np.random.default_rng(54)
    for _ in range(5):
        det, verdict = expmap.local_diffeo_test(field, np.zeros(3), rng.normal(size=3))
        assert det == 0.0
        assert not verdict


def test_full_determinant_approaches_truncated():
    # det W - det W~ = O(|u|^{2(n-m)+1}): the quotient by that power must not
    # grow as u shrinks.
    rng = np.random.default_rng(55)
    for _, field in both_models():
        degree = 2 * (field.dim - field.rank) + 1
        p = rng.normal(scale=0.2, size=field.dim)
        u = rng.normal(size=field.dim)
        quotients = []
        for s in (1e-1, 5e-2, 2.5e-2):
            blocks = expmap.exp_jacobian(field, p, s * u, step=2e-3)
            adapted = np.block(
                [[blocks.A, blocks.B], [blocks.C, blocks.D]]
            )
            quotients.append(
                (np.linalg.det(adapted) - blocks.det_w_tilde) / s**degree
            )
        assert abs(quotients[2]) <= 1.5 * abs(quotients[0]) + 1e-9


def test_calibrated_delta_frozen_values():
    heis = expmap.calibrated_delta(heisenberg_lorentz(), np.zeros(3))
    # On this model |det W~| / |<gu,u>| is identically 1/12, so the sampled
    # floor is seed-independent.
    assert heis == pytest.approx(1.0 / 12.0, abs=1e-12)
    quat = expmap.calibrated_delta(quaternion_group(), np.zeros(7))
    assert quat == pytest.approx(5.801137346993902e-4, rel=1e-9)
    assert quat > 1.0 / 1728.0 - 1e-6
    # cached: the second call returns the identical float
    assert expmap.calibrated_delta(quaternion_group(), np.zeros(7)) == quat


def test_local_diffeo_verdicts_on_heisenberg():
    field = heisenberg_lorentz()
    origin = np.zeros(3)
    _, timelike = expmap.local_diffeo_test(field, origin, np.array([1.0, 0.0, 0.0]))
    assert timelike
    _, spacelike = expmap.local_diffeo_test(field, origin, np.array([0.0, 1.0, 0.4]))
    assert spacelike
    det, null = expmap.local_diffeo_test(field, origin, np.array([1.0, 1.0, 0.0]))
    assert not null
    assert det == pytest.approx(0.0, abs=1e-15)
    _, annihilator = expmap.local_diffeo_test(field, origin, np.array([0.0, 0.0, 2.0]))
    assert not annihilator


# ---------------------------------------------------------------------------
# Gauss lemma.
# ---------------------------------------------------------------------------


def test_gauss_lemma_radial_probe_equals_twice_hamiltonian():
    rng = np.random.default_rng(56)
    for _, field in both_models():
        p = rng.normal(scale=0.3, size=field.dim)
        u = 0.8 * rng.normal(size=field.dim)
        residual = expmap.gauss_lemma_check(field, p, u, u, step=2e-3)
        assert residual <= 1e-7
        scalar = float(u @ cometric_matrix(field, p) @ u)
        trajectory = integrate_extremal(field, p, u, 1.0, step=2e-3)
        assert scalar == pytest.approx(2.0 * trajectory.hs[0], abs=1e-12)


def test_gauss_lemma_annihilator_probe():
    rng = np.random.default_rng(57)
    for _, field in both_models():
        p = rng.normal(scale=0.3, size=field.dim)
        u = 0.8 * rng.normal(size=field.dim)
        w = annihilator_basis(field, p)[0]
        assert float(u @ cometric_matrix(field, p) @ w) == pytest.approx(0.0, abs=1e-15)
        assert expmap.gauss_lemma_check(field, p, u, w, step=2e-3) <= 1e-7


def test_gauss_lemma_random_probes():
    rng = np.random.default_rng(58)
    for _, field in both_models():
        p = rng.normal(scale=0.3, size=field.dim)
        u = 0.8 * rng.normal(size=field.dim)
        for _ in range(3):
            w = rng.normal(size=field.dim)
            assert expmap.gauss_lemma_check(field, p, u, w, step=2e-3) <= 1e-6
