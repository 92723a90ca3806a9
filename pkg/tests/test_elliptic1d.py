from __future__ import annotations

import json

import numpy as np
import pytest
import scipy.integrate
from hypothesis import given, settings
from hypothesis import strategies as st

from cauchylab.elliptic1d import (
    CoefficientFunction,
    EllipticityError,
    OperatorSpec1D,
    apply,
    bump_section,
    calderon_projector,
    cauchy_data_space,
    family_sweep_1d,
    formal_adjoint,
    greens_identity_residual,
    greens_matrix,
    kernel_basis,
    minimal_kernel_check,
    oblique_calderon,
    orthogonal_decomposition_check,
    poly_section,
    principal_symbol,
    random_elliptic_spec,
    skew_diagonal_formula,
    trace,
)
from cauchylab.subspace import InnerSpace, Subspace, gap_hat

NEG_LAPLACE = OperatorSpec1D.scalar([0.0], [0.0], [-1.0])


def test_apply_examples():
    d2 = OperatorSpec1D.scalar([0.0], [0.0], [1.0])
    u = poly_section([[0.0], [0.0], [1.0]])
    assert apply(d2, u, 0.3)[0] == pytest.approx(2.0)
    A = OperatorSpec1D.scalar([1.0], [0.0], [-1.0])
    sin = lambda x, j: np.pi**j * np.sin(np.pi * x + j * np.pi / 2)
    assert apply(A, sin, 0.5)[0] == pytest.approx(np.pi**2 + 1, rel=1e-14)
    mult = OperatorSpec1D.scalar([2.0, 3.0], [0.0], [1.0])
    assert apply(mult, lambda x, j: [5.0] if j == 0 else [0.0], 1.0)[0] == pytest.approx(25.0)


def test_formal_adjoint_examples():
    D = OperatorSpec1D.scalar([0.0], [1.0])
    Dt = formal_adjoint(D)
    assert Dt.coeffs[1].equals(CoefficientFunction.constant([[-1.0]]))
    assert Dt.coeffs[0].equals(CoefficientFunction.zeros((1, 1)))
    # a(x) d/dx with a = 2 + 1j x  ->  -conj(a) d/dx - conj(a)'
    aD = OperatorSpec1D.scalar([0.0], [2.0, 1j])
    t = formal_adjoint(aD)
    assert t.coeffs[1].equals(CoefficientFunction(np.array([-2.0, 1j]).reshape(2, 1, 1)))
    assert t.coeffs[0].equals(CoefficientFunction(np.array([1j]).reshape(1, 1, 1)))
    L = formal_adjoint(NEG_LAPLACE)
    for a, b in zip(L.coeffs, NEG_LAPLACE.coeffs):
        assert a.equals(b)


def test_adjoint_is_involution(rng):
    for _ in range(50):
        A = random_elliptic_spec(rng, int(rng.integers(1, 4)), int(rng.integers(1, 3)), degree=3)
        Att = formal_adjoint(formal_adjoint(A))
        for a, b in zip(A.coeffs, Att.coeffs):
            assert a.equals(b, tol=1e-12)


def test_adjoint_by_quadrature_on_bumps(rng):
    A = random_elliptic_spec(rng, 3, 2)
    u = bump_section(rng.standard_normal((2, 2)), 3)
    v = bump_section(rng.standard_normal((3, 2)), 3)
    At = formal_adjoint(A)
    f = lambda x: np.vdot(v(x), apply(A, u, x)) - np.vdot(apply(At, v, x), u(x))
    val = scipy.integrate.quad(lambda x: f(x).real, 0, 1, epsabs=1e-13)[0]
    val += 1j * scipy.integrate.quad(lambda x: f(x).imag, 0, 1, epsabs=1e-13)[0]
    assert abs(val) < 1e-10
    assert np.allclose(trace(u, 3), 0.0)


def test_principal_symbol_examples():
    assert principal_symbol(NEG_LAPLACE, 0.2, 1.0)[0, 0] == pytest.approx(1.0)
    assert principal_symbol(NEG_LAPLACE, 0.2, 0.0)[0, 0] == 0
    D = OperatorSpec1D.scalar([0.0], [1.0])
    assert principal_symbol(D, 0.0, 1.0)[0, 0] == pytest.approx(1j)


def test_greens_matrix_laplacian():
    J = greens_matrix(NEG_LAPLACE)
    target = np.array([[0, 1], [-1, 0]])
    assert np.allclose(J.at0, target) and np.allclose(J.at1, target)
    for end in (0, 1):
        for k in range(2):
            assert np.allclose(J.block(end, k, 1 - k), skew_diagonal_formula(NEG_LAPLACE, end, k))
    assert J.adjusted is J


def test_greens_matrix_first_order():
    # d/dx: J = -a at 0 and +a at 1; the -i d/dx variant gives i*a and -i*a
    D = OperatorSpec1D.scalar([0.0], [1.0])
    J = greens_matrix(D)
    assert J.at0[0, 0] == pytest.approx(-1.0) and J.at1[0, 0] == pytest.approx(1.0)
    a1 = 2.5
    Di = OperatorSpec1D.scalar([0.0], [-1j * a1])
    J = greens_matrix(Di)
    assert J.at0[0, 0] == pytest.approx(1j * a1) and J.at1[0, 0] == pytest.approx(-1j * a1)
    for end in (0, 1):
        assert np.allclose(J.block(end, 0, 0), skew_diagonal_formula(Di, end, 0))


def by_parts_boundary(A, u, v):
    """Boundary term straight from integration by parts, in raw derivatives."""
    total = 0.0
    for j in range(1, A.d + 1):
        w = CoefficientFunction(_matvec_poly(A.coeffs[j].conj_transpose(), v))
        for l in range(j):
            for x, sgn in ((1.0, 1.0), (0.0, -1.0)):
                total += sgn * (-1) ** l * np.vdot(w.derivative(l)(x), u.derivative(j - 1 - l)(x))
    return total


def _matvec_poly(M, v):
    P = M.coeffs.shape[0] + v.coeffs.shape[0] - 1
    out = np.zeros((P, M.coeffs.shape[1]), dtype=complex)
    for a in range(M.coeffs.shape[0]):
        for b in range(v.coeffs.shape[0]):
            out[a + b] += M.coeffs[a] @ v.coeffs[b]
    return out


def test_greens_matrix_matches_by_parts_oracle(rng):
    for _ in range(30):
        d, m = int(rng.integers(1, 4)), int(rng.integers(1, 3))
        A = random_elliptic_spec(rng, d, m)
        u = poly_section(rng.standard_normal((4, m)) + 1j * rng.standard_normal((4, m)))
        v = poly_section(rng.standard_normal((4, m)))
        J = greens_matrix(A).full()
        assert np.vdot(trace(v, d), J @ trace(u, d)) == pytest.approx(by_parts_boundary(A, u, v), abs=1e-10)


def test_greens_structure_random(rng):
    for _ in range(100):
        d, m = int(rng.integers(1, 4)), int(rng.integers(1, 3))
        A = random_elliptic_spec(rng, d, m)
        J = greens_matrix(A)
        for end in (0, 1):
            for k in range(d):
                for j in range(d):
                    if k + j > d - 1:
                        assert np.all(J.block(end, k, j) == 0)
                assert np.max(np.abs(J.block(end, k, d - 1 - k) - skew_diagonal_formula(A, end, k))) < 1e-10


def test_greens_identity_examples(rng):
    x = poly_section([[0.0], [1.0]])
    one = poly_section([[1.0]])
    assert greens_identity_residual(NEG_LAPLACE, x, one) < 1e-12
    A = random_elliptic_spec(rng, 2, 2)
    u = bump_section(rng.standard_normal((2, 2)), 2)
    v = bump_section(rng.standard_normal((2, 2)), 2)
    assert greens_identity_residual(A, u, v) < 1e-12


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), d=st.integers(1, 3), m=st.integers(1, 2), deg=st.integers(0, 5))
def test_greens_identity_random(seed, d, m, deg):
    rng = np.random.default_rng(seed)
    A = random_elliptic_spec(rng, d, m)
    u = poly_section(rng.standard_normal((deg + 1, m)) + 1j * rng.standard_normal((deg + 1, m)))
    v = poly_section(rng.standard_normal((deg + 1, m)) + 1j * rng.standard_normal((deg + 1, m)))
    assert greens_identity_residual(A, u, v) <= 1e-9


def test_ellipticity_rejected():
    with pytest.raises(EllipticityError):
        OperatorSpec1D.scalar([1.0], [0.0], [0.0, 1.0])  # a_2 = x vanishes at 0


def test_kernel_basis_examples():
    B = kernel_basis(NEG_LAPLACE, n_points=11)
    vals = B.values()[:, 0, :]
    assert np.allclose(vals[:, 0], 1.0, atol=1e-10) and np.allclose(vals[:, 1], B.x, atol=1e-10)
    A = OperatorSpec1D.scalar([-np.pi**2], [0.0], [-1.0])
    vals = kernel_basis(A, n_points=11).values()[:, 0, :]
    xs = np.linspace(0, 1, 11)
    assert np.allclose(vals[:, 0], np.cos(np.pi * xs), atol=1e-9)
    assert np.allclose(vals[:, 1], np.sin(np.pi * xs) / np.pi, atol=1e-9)
    c = 1.7
    E = OperatorSpec1D.scalar([c], [1.0])
    vals = kernel_basis(E, n_points=11).values()[:, 0, 0]
    assert np.allclose(vals, np.exp(-c * xs), rtol=1e-9)


def test_cauchy_data_space_examples():
    X = InnerSpace.standard(4)
    L = cauchy_data_space(NEG_LAPLACE)
    assert L.rank == 2
    assert gap_hat(L, Subspace.span(X, np.array([[1, 0, 1, 0], [0, 1, 1, -1]]).T)) < 1e-10
    A = OperatorSpec1D.scalar([-np.pi**2], [0.0], [-1.0])
    ref = Subspace.span(X, np.array([[1, 0, -1, 0], [0, np.pi, 0, np.pi]]).T)
    assert gap_hat(cauchy_data_space(A), ref) < 1e-9


def test_calderon_projector_laplacian():
    C = calderon_projector(NEG_LAPLACE)
    T = np.array([[1, 0, 1, 0], [0, 1, 1, -1]], dtype=float).T
    P = T @ np.linalg.solve(T.T @ T, T.T)
    assert np.allclose(C.table, P, atol=1e-10)
    assert C.is_selfadjoint() and C.idempotency_error() < 1e-12
    assert gap_hat(C.image(), cauchy_data_space(NEG_LAPLACE)) < 1e-12
    O = oblique_calderon(NEG_LAPLACE)
    assert gap_hat(O.image(), C.image()) < 1e-12


def test_decomposition_examples(rng):
    r = orthogonal_decomposition_check(NEG_LAPLACE)
    assert r.passed and (r.dim_cauchy, r.dim_dual) == (2, 2)
    r = orthogonal_decomposition_check(OperatorSpec1D.scalar([0.8], [1.0]))
    assert r.passed and r.total_dim == 2
    for _ in range(20):
        A = random_elliptic_spec(rng, int(rng.integers(1, 4)), int(rng.integers(1, 3)))
        assert orthogonal_decomposition_check(A).passed


def test_minimal_kernel(rng):
    assert minimal_kernel_check(NEG_LAPLACE) == 0
    assert minimal_kernel_check(OperatorSpec1D.scalar([2.0], [1.0])) == 0
    assert minimal_kernel_check(random_elliptic_spec(rng, 3, 2)) == 0


def test_spec_roundtrip(rng):
    A = random_elliptic_spec(rng, 2, 2)
    data = json.loads(json.dumps(A.to_dict()))
    B = OperatorSpec1D.from_dict(data)
    for a, b in zip(A.coeffs, B.coeffs):
        assert a.equals(b)
    with pytest.raises(ValueError):
        OperatorSpec1D.from_dict({"d": 1, "m": 1, "coeffs": [[[[1.0]]], [[[1.0, 0.0]]]]})


def test_sweep_constant_and_laplace_shift():
    rep = family_sweep_1d(lambda b: NEG_LAPLACE, 0.0, [0.1, 0.2])
    assert np.all(rep.projector_distance < 1e-14) and np.all(rep.coefficient_distance == 0)
    fam = lambda b: OperatorSpec1D.scalar([b], [0.0], [-1.0])
    grid = [0.001, 0.01, 0.1, 1.0]
    rep = family_sweep_1d(fam, 0.0, grid)
    assert rep.converges and rep.estimate_holds
    assert np.all(rep.projector_distance <= rep.lipschitz * np.array(grid) * (1 + 1e-12))
    assert rep.coefficient_distance == pytest.approx(grid)


def test_sweep_through_dirichlet_eigenvalue():
    b0 = np.pi**2
    fam = lambda b: OperatorSpec1D.scalar([-b], [0.0], [-1.0])
    grid = b0 + np.array([-0.1, -0.01, -0.001, 0.001, 0.01, 0.1])
    rep = family_sweep_1d(fam, b0, grid)
    assert rep.converges and rep.estimate_holds
    assert np.max(rep.projector_distance[[2, 3]]) < 1e-3
