from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cauchylab.subspace import (
    InnerSpace,
    Projector,
    Subspace,
    SubspaceError,
    family_continuity_experiment,
    gamma,
    gap_delta,
    gap_hat,
    graph_intersection_gap,
    intersect,
    neubauer_gamma_bound,
    orthogonal_projector,
    orthogonalize_projector,
    projector_gap_vs_norm,
    projector_norm_estimate,
    subspace_sum,
    surjection_gap_comparison,
)

import oracles

E2 = InnerSpace.standard(2)
E3 = InnerSpace.standard(3)


def line(theta, space=E2):
    return Subspace.span(space, [np.cos(theta), np.sin(theta)])


def test_inner_space_rejects_bad_gram():
    with pytest.raises(SubspaceError):
        InnerSpace(np.array([[1.0, 2.0], [0.0, 1.0]]))
    with pytest.raises(SubspaceError):
        InnerSpace(np.diag([1.0, -1.0]))


def test_weighted_norm_matches_gram(rng):
    G = oracles.random_gram(4, rng)
    X = InnerSpace(G)
    u = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    assert X.norm(u) == pytest.approx(np.sqrt(np.vdot(u, G @ u).real), rel=1e-12)
    T = rng.standard_normal((4, 4))
    v = rng.standard_normal(4)
    assert X.inner(T @ u, v) == pytest.approx(X.inner(u, X.adjoint(T) @ v), rel=1e-10)


def test_subspace_orthonormal_in_weighted_space(rng):
    G = oracles.random_gram(5, rng)
    X = InnerSpace(G)
    M = Subspace.span(X, rng.standard_normal((5, 3)))
    assert M.rank == 3
    assert np.allclose(M.basis.conj().T @ G @ M.basis, np.eye(3), atol=1e-12)
    with pytest.raises(SubspaceError):
        Subspace(X, np.eye(5)[:, :2] * 3.0)


def test_gap_of_zero_and_identity():
    N = line(0.3)
    assert gap_delta(Subspace.zero(E2), N) == 0.0
    assert gap_delta(N, N) == pytest.approx(0.0, abs=1e-15)


def test_gap_example_against_sampling():
    M = Subspace.span(E2, [1.0, 0.0])
    N = Subspace.span(E2, [1.0, 1.0])
    expected = oracles.sampled_delta(M.basis, N.basis, oracles.circle_points(M.basis))
    assert gap_delta(M, N) == pytest.approx(np.sqrt(2) / 2, abs=1e-12)
    assert expected == pytest.approx(np.sqrt(2) / 2, abs=1e-12)


@pytest.mark.parametrize("theta", [np.pi / 12, np.pi / 6, np.pi / 4])
def test_lines_at_angle(theta):
    M, N = line(0.0), line(theta)
    pts = oracles.circle_points(M.basis)
    assert gap_hat(M, N) == pytest.approx(np.sin(theta), abs=1e-10)
    assert gamma(M, N) == pytest.approx(np.sin(theta), abs=1e-10)
    assert oracles.sampled_gamma(M.basis, N.basis, np.zeros((2, 0)), pts) == pytest.approx(
        np.sin(theta), abs=1e-10
    )


def test_gap_hat_superspace():
    M = Subspace.span(E3, np.eye(3)[:, :1])
    N = Subspace.span(E3, np.eye(3)[:, :2])
    assert gap_delta(M, N) == pytest.approx(0.0, abs=1e-15)
    assert gap_hat(M, N) == pytest.approx(1.0)
    assert gap_hat(N, M) == gap_hat(M, N)


def test_gamma_contained_and_zero():
    M = Subspace.span(E3, np.eye(3)[:, :1])
    N = Subspace.span(E3, np.eye(3)[:, :2])
    assert gamma(M, N) == 1.0
    assert gamma(Subspace.zero(E3), N) == 1.0


def test_gamma_three_dim_example(rng):
    M = Subspace.span(E3, np.eye(3)[:, :2])
    N = Subspace.span(E3, np.stack([[0, 1, 0], [1, 0, 1]], axis=1))
    I = intersect(M, N)
    assert I.rank == 1
    pts = oracles.circle_points(M.basis, 40001)
    oracle = oracles.sampled_gamma(M.basis, N.basis, I.basis, pts)
    assert gamma(M, N) == pytest.approx(np.sqrt(2) / 2, abs=1e-12)
    assert oracle == pytest.approx(np.sqrt(2) / 2, abs=1e-6)


def test_sum_and_intersect_examples():
    e = np.eye(3)
    M = Subspace.span(E3, e[:, :2])
    N = Subspace.span(E3, e[:, 1:])
    I = intersect(M, N)
    assert I.rank == 1
    assert gap_hat(I, Subspace.span(E3, e[:, 1])) < 1e-12
    assert subspace_sum(M, N).rank == 3
    a, b = Subspace.span(E3, e[:, 0]), Subspace.span(E3, e[:, 1])
    assert subspace_sum(a, b).rank == 2 and intersect(a, b).rank == 0
    assert gap_hat(intersect(M, M), M) < 1e-12
    with pytest.raises(SubspaceError):
        intersect(M, N, tol=0.0)


def test_mismatched_spaces_raise():
    with pytest.raises(SubspaceError):
        gap_delta(line(0.1), Subspace.span(E3, [1, 0, 0]))


def random_subspace(space, r, rng):
    return Subspace.span(space, rng.standard_normal((space.dim, r)) + 1j * rng.standard_normal((space.dim, r)))


@settings(max_examples=60, deadline=None)
@given(
    seed=st.integers(0, 2**32 - 1),
    n=st.integers(2, 8),
    data=st.data(),
)
def test_dimension_identity_with_planted_intersection(seed, n, data):
    rng = np.random.default_rng(seed)
    k = data.draw(st.integers(0, n - 1))
    a = data.draw(st.integers(0, n - k))
    b = data.draw(st.integers(0, n - k - a))
    X = InnerSpace(oracles.random_gram(n, rng))
    Z = rng.standard_normal((n, k + a + b))
    M = Subspace.span(X, Z[:, : k + a])
    N = Subspace.span(X, np.hstack([Z[:, :k], Z[:, k + a :]]))
    I, S = intersect(M, N), subspace_sum(M, N)
    assert I.rank == k
    assert S.rank + I.rank == M.rank + N.rank
    if k:
        assert gap_hat(I, Subspace.span(X, Z[:, :k])) < 1e-8


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(2, 7))
def test_gap_properties(seed, n):
    rng = np.random.default_rng(seed)
    X = InnerSpace(oracles.random_gram(n, rng))
    M = random_subspace(X, rng.integers(0, n + 1), rng)
    N = random_subspace(X, rng.integers(0, n + 1), rng)
    d = gap_hat(M, N)
    assert 0.0 <= d <= 1.0
    assert d == gap_hat(N, M)
    g = gamma(M, N)
    assert 0.0 < g <= 1.0


def test_gap_matches_sphere_sampling_complex(rng):
    X = InnerSpace.standard(4)
    M = random_subspace(X, 2, rng)
    N = random_subspace(X, 2, rng)
    pts = oracles.sample_sphere(M.basis, 20000, rng)
    sampled = oracles.sampled_delta(M.basis, N.basis, pts)
    assert sampled <= gap_delta(M, N) + 1e-12
    assert sampled >= gap_delta(M, N) - 1e-2


def test_orthogonalize_examples():
    C = Projector(E2, np.array([[1.0, 1.0], [0.0, 0.0]]))
    out = orthogonalize_projector(C).table
    assert np.allclose(out, [[1, 0], [0, 0]], atol=1e-14)
    assert np.allclose(orthogonalize_projector(Projector(E2, np.zeros((2, 2)))).table, 0)
    P = orthogonal_projector(line(0.4))
    assert np.allclose(orthogonalize_projector(P).table, P.table, atol=1e-14)


def test_projector_rejects_non_idempotent():
    with pytest.raises(SubspaceError):
        Projector(E2, np.array([[1.0, 0.0], [0.0, 0.5]]))


@pytest.mark.parametrize("weighted", [False, True])
def test_orthogonalize_identities(weighted, rng):
    for _ in range(40):
        n = int(rng.integers(2, 10))
        X = InnerSpace(oracles.random_gram(n, rng)) if weighted else InnerSpace.standard(n)
        C = Projector(X, oracles.random_idempotent(n, int(rng.integers(0, n + 1)), rng))
        O = orthogonalize_projector(C)
        T, P = O.table, C.table
        assert X.operator_norm(T @ T - T) < 1e-9
        assert X.operator_norm(P @ T - T) < 1e-9
        assert X.operator_norm(T @ P - P) < 1e-9
        assert O.is_selfadjoint()
        assert gap_hat(O.image(), C.image()) < 1e-9
        assert np.max(np.abs(T - oracles.orthogonal_projector_lstsq(P, X.gram))) < 1e-8


@pytest.mark.parametrize("theta0,theta", [(0.0, 0.3), (0.5, 0.45), (1.0, 2.5)])
def test_projector_gap_vs_norm_lines(theta0, theta):
    P, Q = orthogonal_projector(line(theta)), orthogonal_projector(line(theta0))
    g, n = projector_gap_vs_norm(P, Q)
    assert g == pytest.approx(abs(np.sin(theta - theta0)), abs=1e-12)
    assert n == pytest.approx(abs(np.sin(theta - theta0)), abs=1e-12)


def test_projector_gap_vs_norm_random(rng):
    for _ in range(50):
        n = int(rng.integers(2, 13))
        X = InnerSpace(oracles.random_gram(n, rng))
        P = Projector(X, oracles.random_idempotent(n, int(rng.integers(0, n + 1)), rng))
        Q = Projector(X, oracles.random_idempotent(n, int(rng.integers(0, n + 1)), rng))
        g, d = projector_gap_vs_norm(P, Q)
        assert g <= d + 1e-9
    P = Projector(X, oracles.random_idempotent(n, 1, rng))
    g, d = projector_gap_vs_norm(P, P)
    assert d == 0.0 and g < 1e-14


def test_projector_norm_estimate_oblique():
    P0 = Projector(E2, np.array([[1.0, 0.0], [0.0, 0.0]]))
    assert projector_norm_estimate(P0, P0) == 0.0
    for eps in [0.1, 0.01]:
        # image span(e1), kernel span((-eps... , 1)) tilted slightly
        Pb = Projector(E2, np.array([[1.0, eps], [0.0, 0.0]]))
        lhs = E2.operator_norm(Pb.table - P0.table)
        rhs = projector_norm_estimate(Pb, P0)
        assert lhs <= rhs
        assert np.isfinite(rhs)


def test_projector_norm_estimate_random(rng):
    for _ in range(200):
        n = int(rng.integers(2, 13))
        X = InnerSpace(oracles.random_gram(n, rng)) if rng.random() < 0.5 else InnerSpace.standard(n)
        r = int(rng.integers(0, n + 1))
        P0 = oracles.random_idempotent(n, r, rng)
        Pb = Projector(X, oracles.random_idempotent(n, r, rng))
        lhs = X.operator_norm(Pb.table - P0)
        assert lhs <= projector_norm_estimate(Pb, Projector(X, P0)) * (1 + 1e-12)


def test_neubauer_bound():
    assert neubauer_gamma_bound(0.7, 0.0, 0.0) == 0.7
    # 1 - 0.1*1 - 0.1 - 0.1 = 0.7
    assert neubauer_gamma_bound(1.0, 0.1, 0.1) == pytest.approx(0.7 / 1.1, abs=1e-15)
    assert neubauer_gamma_bound(0.2, 0.3, 0.0) is None
    with pytest.raises(ValueError):
        neubauer_gamma_bound(-1.0, 0.0, 0.0)


def test_neubauer_bound_holds_on_perturbed_projectors(rng):
    for _ in range(100):
        n = int(rng.integers(2, 8))
        r = int(rng.integers(1, n))
        S = np.eye(n) + 0.3 * rng.standard_normal((n, n))
        D = np.diag([1.0] * r + [0.0] * (n - r))
        P0 = Projector(E := InnerSpace.standard(n), S @ D @ np.linalg.inv(S))
        S2 = S + 0.01 * rng.standard_normal((n, n))
        Pb = Projector(E, S2 @ D @ np.linalg.inv(S2))
        g0 = gamma(P0.image(), P0.kernel())
        d1 = gap_delta(P0.image(), Pb.image())
        d2 = gap_delta(P0.kernel(), Pb.kernel())
        bound = neubauer_gamma_bound(g0, d1, d2)
        if bound is not None:
            assert gamma(Pb.image(), Pb.kernel()) >= bound - 1e-12


def test_surjection_identity_and_equal():
    M, N = line(0.1), line(0.7)
    res = surjection_gap_comparison(np.eye(2), M, N)
    assert res.cbar == pytest.approx(1.0) and res.c == pytest.approx(1.0)
    assert res.delta_MN == pytest.approx(res.delta_pMpN)
    res = surjection_gap_comparison(np.eye(2), M, M)
    assert res.delta_MN < 1e-15 and res.delta_pMpN < 1e-15


def test_surjection_sandwich_random(rng):
    for _ in range(200):
        n = int(rng.integers(2, 7))
        q = int(rng.integers(1, n))
        p = rng.standard_normal((q, n)) + 1j * rng.standard_normal((q, n))
        X = InnerSpace(oracles.random_gram(n, rng)) if rng.random() < 0.5 else InnerSpace.standard(n)
        ker = np.linalg.svd(p)[2][q:].conj().T
        rM = int(rng.integers(0, q + 1))
        rN = int(rng.integers(0, q + 1))
        M = Subspace.span(X, np.hstack([ker, rng.standard_normal((n, rM))]))
        N = Subspace.span(X, np.hstack([ker, rng.standard_normal((n, rN))]))
        cbar, c, dMN, dp = surjection_gap_comparison(p, M, N)
        assert cbar * dMN <= dp + 1e-10
        assert dp <= c * dMN + 1e-10


def test_surjection_scalar_multiple():
    # a uniform scaling moves no subspace, so both constants must be 1
    M, N = line(0.1), line(0.9)
    cbar, c, dMN, dp = surjection_gap_comparison(2.0 * np.eye(2), M, N)
    assert cbar == pytest.approx(1.0) and c == pytest.approx(1.0)
    assert dp == pytest.approx(dMN)


def test_surjection_precondition():
    p = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
    M = Subspace.span(E3, [1.0, 0.0, 0.0])
    with pytest.raises(SubspaceError):
        surjection_gap_comparison(p, M, M)


def rotating_planes(b):
    c, s = np.cos(b), np.sin(b)
    common = np.array([1.0, 0.0, 0.0])
    M = Subspace.span(E3, np.stack([common, [0.0, c, s]], axis=1))
    N = Subspace.span(E3, np.stack([common, [0.0, c, -s + 1.0]], axis=1))
    return M, N


def test_family_constant():
    M0 = Subspace.span(E3, np.eye(3)[:, :2])
    rep = family_continuity_experiment(lambda b: (M0, M0), 0.0, [0.1, 0.2])
    assert np.all(rep.gap_intersection == 0) and np.all(rep.gap_sum == 0)
    assert rep.constant_dimension


def test_family_rotating_planes_linear():
    b0 = 0.0
    grid = np.array([-0.1, -0.01, -0.001, 0.001, 0.01, 0.1])
    rep = family_continuity_experiment(rotating_planes, b0, grid)
    assert rep.constant_dimension
    assert rep.intersection_converges and rep.sum_converges
    gaps = np.maximum(rep.gap_intersection, rep.gap_sum)
    assert np.all(gaps <= 2.0 * np.abs(grid - b0) + 1e-12)


def jumping_family(b):
    M = Subspace.span(E3, np.eye(3)[:, :2])
    N = Subspace.span(E3, [1.0, 0.0, b])
    return M, N


def test_family_jumping_intersection():
    rep = family_continuity_experiment(jumping_family, 0.0, [1e-3, 1e-2, 1e-1])
    assert not rep.constant_dimension
    assert not rep.intersection_converges
    with pytest.raises(ValueError):
        family_continuity_experiment(jumping_family, 0.0, [0.1, 0.05])


def test_graph_intersection_random(rng):
    n, q = 5, 4
    A0 = rng.standard_normal((q, n))
    A0[:, -1] = 0.0
    A0[-1, :] = 0.0  # rank 3 operator
    E = rng.standard_normal((q, n))
    Y = InnerSpace.standard(q)
    img = Subspace.span(Y, A0)
    W = img.orthogonal_complement()
    grid = np.array([1e-3, 1e-2, 1e-1])
    rep = graph_intersection_gap(lambda b: A0 + b * E, W, 0.0, grid)
    assert rep.converges
    assert np.all(rep.gap <= 50 * grid)


def test_graph_intersection_trivial_and_error(rng):
    A = rng.standard_normal((3, 3))
    Y = InnerSpace.standard(3)
    rep = graph_intersection_gap(lambda b: A, Subspace.zero(Y), 0.0, [0.1, 0.2])
    assert np.all(rep.gap == 0.0)
    with pytest.raises(SubspaceError):
        graph_intersection_gap(lambda b: A, Subspace.whole(Y), 0.0, [0.1])
