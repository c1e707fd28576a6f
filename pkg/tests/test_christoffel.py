"""Tests for the Christoffel tensor and bracket-generation machinery."""
from __future__ import annotations

import numpy as np
import pytest

from ssgeo import expr as ex
from ssgeo.christoffel import (
    NotAnnihilatorError,
    bracket_form,
    christoffel_at,
    gamma_contract,
    is_two_step_generator,
    sym_covariant_derivative,
)
from ssgeo.field import (
    CometricField,
    annihilator_basis,
    cometric_gradient,
    cometric_matrix,
    kernel_projector,
)
from ssgeo.models import heisenberg_lorentz, quaternion_group


def constant_field() -> CometricField:
    return CometricField.from_entries(3, 2, 1, {(1, 1): "-1", (2, 2): "1"})


def covector_field_expressions(field: CometricField, xi: np.ndarray):
    """Components of the vector field x -> g(x) xi as expressions."""
    components = []
    for k in range(field.dim):
        acc: ex.Monomials = {}
        for j in range(field.dim):
            acc = ex.poly_add(acc, field.monomials[k][j], float(xi[j]))
        components.append(ex.from_monomials(acc, field.dim))
    return components


def fd_lie_bracket_paired(field, x, xi, eta, v, h=1e-6) -> float:
    """<[g xi, g eta], v> via central differences of the vector fields."""
    n = field.dim

    def vf(point, covector):
        return cometric_matrix(field, point) @ covector

    jac_xi = np.zeros((n, n))
    jac_eta = np.zeros((n, n))
    for j in range(n):
        step = np.zeros(n)
        step[j] = h
        jac_xi[:, j] = (vf(x + step, xi) - vf(x - step, xi)) / (2 * h)
        jac_eta[:, j] = (vf(x + step, eta) - vf(x - step, eta)) / (2 * h)
    bracket = jac_eta @ vf(x, xi) - jac_xi @ vf(x, eta)
    return float(bracket @ v)


def test_constant_field_has_zero_tensor():
    tensor = christoffel_at(constant_field(), [0.3, -0.8, 1.5])
    assert np.array_equal(tensor.gamma, np.zeros((3, 3, 3)))


def test_heisenberg_origin_values():
    gamma = christoffel_at(heisenberg_lorentz(), np.zeros(3)).gamma
    expected = np.zeros((3, 3, 3))
    expected[0, 1, 2] = expected[0, 2, 1] = 0.5
    expected[1, 0, 2] = expected[1, 2, 0] = -0.5
    assert np.allclose(gamma, expected, atol=1e-15)


def test_symmetry_in_last_two_indices():
    rng = np.random.default_rng(40)
    field = quaternion_group()
    for _ in range(20):
        gamma = christoffel_at(field, rng.uniform(-2, 2, 7)).gamma
        assert np.allclose(gamma, np.swapaxes(gamma, 1, 2), atol=1e-14)


def test_contract_requires_annihilator():
    tensor = christoffel_at(heisenberg_lorentz(), np.zeros(3))
    with pytest.raises(NotAnnihilatorError):
        gamma_contract(tensor, [1.0, 0.0, 0.0], [1.0, 0.0, 0.0])


def test_contract_heisenberg_example():
    tensor = christoffel_at(heisenberg_lorentz(), np.zeros(3))
    value = gamma_contract(tensor, [1.0, 0.0, 0.0], [0.0, 0.0, 1.0])
    assert np.allclose(value, [0.0, -0.5, 0.0], atol=1e-15)


def test_contract_ignores_annihilator_shifts():
    tensor = christoffel_at(heisenberg_lorentz(), np.zeros(3))
    omega = np.array([0.0, 0.0, 1.0])
    base = gamma_contract(tensor, [1.0, 0.0, 0.0], omega)
    shifted = gamma_contract(tensor, np.array([1.0, 0.0, 0.0]) + 3.0 * omega, omega)
    assert np.allclose(base, shifted, atol=1e-12)


def test_contract_zero_for_constant_field():
    tensor = christoffel_at(constant_field(), [1.0, 2.0, 3.0])
    assert np.array_equal(
        gamma_contract(tensor, [1.0, -2.0, 0.5], [0.0, 0.0, 1.0]), np.zeros(3)
    )


def test_contract_horizontality():
    """<Gamma(xi, v), w> = 0 for every annihilator w."""
    rng = np.random.default_rng(42)
    for field in (heisenberg_lorentz(), quaternion_group()):
        n = field.dim
        for _ in range(100):
            x = rng.uniform(-2, 2, n)
            tensor = christoffel_at(field, x)
            kernel = annihilator_basis(field, x)
            xi = rng.uniform(-1, 1, n)
            v = kernel.T @ rng.uniform(-1, 1, kernel.shape[0])
            image = gamma_contract(tensor, xi, v)
            for w in kernel:
                assert abs(float(image @ w)) <= 1e-10


def test_bracket_form_heisenberg_example():
    """<[g dx, g dy], dz> at the origin is +1: [g dx, g dy] = [-X, Y] = d/dz.
    The finite-difference bracket oracle pins the sign."""
    field = heisenberg_lorentz()
    x = np.zeros(3)
    dx, dy, dz = np.eye(3)
    value = bracket_form(field, x, dx, dy, dz)
    assert value == pytest.approx(1.0, abs=1e-14)
    assert fd_lie_bracket_paired(field, x, dx, dy, dz) == pytest.approx(
        value, abs=1e-9
    )
    assert bracket_form(field, x, dy, dx, dz) == pytest.approx(-1.0, abs=1e-14)


def test_bracket_form_constant_field():
    rng = np.random.default_rng(44)
    field = constant_field()
    for _ in range(10):
        value = bracket_form(
            field,
            rng.uniform(-2, 2, 3),
            rng.uniform(-1, 1, 3),
            rng.uniform(-1, 1, 3),
            [0.0, 0.0, rng.uniform(0.5, 2.0)],
        )
        assert value == 0.0


def test_bracket_form_requires_annihilator():
    with pytest.raises(NotAnnihilatorError):
        bracket_form(
            heisenberg_lorentz(), np.zeros(3), np.eye(3)[0], np.eye(3)[1], np.eye(3)[0]
        )


def test_bracket_gamma_identity():
    """<[g xi, g eta], v> = 2 <Gamma(eta, v), xi> = -2 <Gamma(xi, v), eta>."""
    rng = np.random.default_rng(46)
    for field in (heisenberg_lorentz(), quaternion_group()):
        n = field.dim
        for _ in range(100):
            x = rng.uniform(-2, 2, n)
            tensor = christoffel_at(field, x)
            kernel = annihilator_basis(field, x)
            xi = rng.uniform(-1, 1, n)
            eta = rng.uniform(-1, 1, n)
            v = kernel.T @ rng.uniform(-1, 1, kernel.shape[0])
            lhs = bracket_form(field, x, xi, eta, v)
            via_eta = 2.0 * float(gamma_contract(tensor, eta, v) @ xi)
            via_xi = -2.0 * float(gamma_contract(tensor, xi, v) @ eta)
            scale = max(1.0, abs(lhs))
            assert abs(lhs - via_eta) <= 1e-9 * scale
            assert abs(lhs - via_xi) <= 1e-9 * scale


def test_bracket_form_matches_fd_oracle():
    rng = np.random.default_rng(48)
    for field in (heisenberg_lorentz(), quaternion_group()):
        n = field.dim
        for _ in range(25):
            x = rng.uniform(-1, 1, n)
            kernel = annihilator_basis(field, x)
            xi = rng.uniform(-1, 1, n)
            eta = rng.uniform(-1, 1, n)
            v = kernel.T @ rng.uniform(-1, 1, kernel.shape[0])
            direct = bracket_form(field, x, xi, eta, v)
            oracle = fd_lie_bracket_paired(field, x, xi, eta, v)
            assert abs(direct - oracle) <= 1e-8 * max(1.0, abs(direct))


def test_bracket_form_antisymmetric():
    rng = np.random.default_rng(50)
    field = quaternion_group()
    for _ in range(20):
        x = rng.uniform(-1, 1, 7)
        kernel = annihilator_basis(field, x)
        xi, eta = rng.uniform(-1, 1, (2, 7))
        v = kernel.T @ rng.uniform(-1, 1, 3)
        forward = bracket_form(field, x, xi, eta, v)
        backward = bracket_form(field, x, eta, xi, v)
        assert forward == pytest.approx(-backward, abs=1e-12)


# -- symmetrized covariant derivative ------------------------------------------


def test_sym_derivative_constant_everything():
    result = sym_covariant_derivative(
        constant_field(), [0.5, 0.5, 0.5], ["2", "-3", "1"]
    )
    assert np.array_equal(result, np.zeros((3, 3)))


def test_sym_derivative_heisenberg_contraction():
    field = heisenberg_lorentz()
    components = covector_field_expressions(field, np.array([1.0, 0.0, 0.0]))
    result = sym_covariant_derivative(field, np.zeros(3), components)
    contracted = result @ np.array([0.0, 0.0, 1.0])
    assert np.allclose(contracted, [0.0, -1.0, 0.0], atol=1e-14)


def test_sym_derivative_symmetry():
    rng = np.random.default_rng(52)
    field = quaternion_group()
    components = covector_field_expressions(field, rng.uniform(-1, 1, 7))
    for _ in range(20):
        result = sym_covariant_derivative(field, rng.uniform(-2, 2, 7), components)
        assert np.allclose(result, result.T, atol=1e-13)


def test_sym_derivative_equals_twice_gamma():
    """(nabla_sym g xi)^{kq} v_q = 2 Gamma^k(xi, v) for annihilators v."""
    rng = np.random.default_rng(54)
    for field in (heisenberg_lorentz(), quaternion_group()):
        n = field.dim
        xi = rng.uniform(-1, 1, n)
        components = covector_field_expressions(field, xi)
        for _ in range(10):
            x = rng.uniform(-1.5, 1.5, n)
            kernel = annihilator_basis(field, x)
            v = kernel.T @ rng.uniform(-1, 1, kernel.shape[0])
            lhs = sym_covariant_derivative(field, x, components) @ v
            rhs = 2.0 * gamma_contract(christoffel_at(field, x), xi, v)
            assert np.allclose(lhs, rhs, atol=1e-10)


def test_sym_derivative_component_count():
    with pytest.raises(ValueError, match="expected 3 components"):
        sym_covariant_derivative(constant_field(), np.zeros(3), ["1", "2"])


# -- two-step generation --------------------------------------------------------


def test_two_step_heisenberg():
    ok, smallest = is_two_step_generator(
        heisenberg_lorentz(), np.zeros(3), [1.0, 0.0, 0.0]
    )
    assert ok and smallest > 0.1


def test_two_step_quaternion():
    ok, smallest = is_two_step_generator(
        quaternion_group(), np.zeros(7), np.eye(7)[0]
    )
    assert ok and smallest > 0.1


def test_two_step_constant_field_always_false():
    rng = np.random.default_rng(56)
    for _ in range(5):
        xi = np.array([rng.uniform(0.5, 1.0), rng.uniform(-1, 1), 0.0])
        ok, smallest = is_two_step_generator(constant_field(), np.zeros(3), xi)
        assert not ok and smallest == 0.0


def test_two_step_rejects_annihilator_covector():
    with pytest.raises(ValueError, match="annihilator"):
        is_two_step_generator(heisenberg_lorentz(), np.zeros(3), [0.0, 0.0, 1.0])


# -- coordinate covariance -------------------------------------------------------


class QuadraticChange:
    """y = x + B(x, x) with symmetric coefficients; invertible near 0."""

    def __init__(self, coefficients: np.ndarray):
        self.b = 0.5 * (coefficients + np.swapaxes(coefficients, 1, 2))

    def forward(self, x: np.ndarray) -> np.ndarray:
        return x + np.einsum("kij,i,j->k", self.b, x, x)

    def jacobian(self, x: np.ndarray) -> np.ndarray:
        return np.eye(x.size) + 2.0 * np.einsum("kij,i->kj", self.b, x)

    def inverse(self, y: np.ndarray) -> np.ndarray:
        x = y.copy()
        for _ in range(50):
            residual = self.forward(x) - y
            if np.linalg.norm(residual) < 1e-15:
                break
            x = x - np.linalg.solve(self.jacobian(x), residual)
        return x


def transformed_gamma_contract(field, change, y0, xi_new, v_new, h=1e-5):
    """Gamma-tilde(xi, v) at y0 for the pushed-forward cometric, computed
    from finite differences of g-tilde(y) = J g J^T."""
    n = field.dim

    def g_new(y):
        x = change.inverse(y)
        J = change.jacobian(x)
        return J @ cometric_matrix(field, x) @ J.T

    g0 = g_new(y0)
    dg = np.zeros((n, n, n))
    for j in range(n):
        step = np.zeros(n)
        step[j] = h
        dg[j] = (g_new(y0 + step) - g_new(y0 - step)) / (2 * h)
    gamma = 0.5 * (
        np.einsum("kj,jpq->kpq", g0, dg)
        - np.einsum("pj,jkq->kpq", g0, dg)
        - np.einsum("qj,jkp->kpq", g0, dg)
    )
    return np.einsum("kpq,p,q->k", gamma, xi_new, v_new)


@pytest.mark.parametrize("model", ["heisenberg", "quaternion"])
def test_gamma_contract_is_coordinate_covariant(model):
    """Under y = x + B(x,x), contracted values push forward by the Jacobian
    while covectors pull back, despite Gamma itself not being a tensor."""
    field = heisenberg_lorentz() if model == "heisenberg" else quaternion_group()
    n = field.dim
    rng = np.random.default_rng(58 if model == "heisenberg" else 59)
    rounds = 20 if model == "heisenberg" else 5
    for _ in range(rounds):
        change = QuadraticChange(rng.uniform(-0.1, 0.1, (n, n, n)))
        x0 = rng.uniform(-0.2, 0.2, n)
        y0 = change.forward(x0)
        J = change.jacobian(x0)
        kernel = annihilator_basis(field, x0)
        v = kernel.T @ rng.uniform(-1, 1, kernel.shape[0])
        xi_new = rng.uniform(-1, 1, n)
        xi = J.T @ xi_new
        v_new = np.linalg.solve(J.T, v)
        lhs = transformed_gamma_contract(field, change, y0, xi_new, v_new)
        rhs = J @ gamma_contract(christoffel_at(field, x0), xi, v)
        assert np.allclose(lhs, rhs, atol=1e-7), f"covariance broken: {lhs} vs {rhs}"


def test_annihilator_section_derivative_lemma():
    """g^{jk} d_p v_k = -(d_p g^{jk}) v_k for smooth annihilator sections."""
    rng = np.random.default_rng(60)
    h = 1e-5
    for field in (heisenberg_lorentz(), quaternion_group()):
        n = field.dim
        for _ in range(10):
            x = rng.uniform(-1, 1, n)
            kernel = annihilator_basis(field, x)
            v0 = kernel.T @ rng.uniform(-1, 1, kernel.shape[0])

            def section(point):
                return kernel_projector(field, point) @ v0

            g = cometric_matrix(field, x)
            dg = cometric_gradient(field, x)
            for p in range(n):
                step = np.zeros(n)
                step[p] = h
                dv = (section(x + step) - section(x - step)) / (2 * h)
                lhs = g @ dv
                rhs = -dg[p] @ v0
                assert np.allclose(lhs, rhs, atol=1e-7)
