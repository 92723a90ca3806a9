from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cauchylab.scale import (
    FourierScale,
    ScaleOperator,
    ScaleSection,
    continuity_transfer_experiment,
    dual_norm,
    duality_check,
    homogenizer,
    interpolation_check,
    norm_s,
    operator_norm,
    pairing,
    phi_multiplier,
    random_hermitian,
    vector_interpolation_check,
    within,
)


@settings(max_examples=100, deadline=None)
@given(
    s=st.floats(-4, 4),
    t=st.floats(-4, 4),
    k=st.integers(-64, 64),
)
def test_weight_laws(s, t, k):
    w = FourierScale.weight
    assert w(0.0, k) == 1.0
    assert w(s, k) * w(-s, k) == pytest.approx(1.0, rel=1e-13)
    assert w(s, k) * w(t, k) == pytest.approx(w(s + t, k), rel=1e-13)


def test_phi_multiplier_examples():
    sc = FourierScale(3)
    assert np.allclose(phi_multiplier(sc, 0.0).table, np.eye(sc.size))
    assert phi_multiplier(sc, 2.0).table[sc.index(1), sc.index(1)] == pytest.approx(2.0)
    prod = phi_multiplier(sc, -2.0) @ phi_multiplier(sc, 2.0)
    assert np.allclose(prod.table, np.eye(sc.size), atol=1e-14)


def test_homogenizer_examples():
    sc1 = FourierScale(4, fiber=1)
    assert np.allclose(homogenizer(sc1, 1).table, np.eye(sc1.size))
    sc = FourierScale(3, fiber=2)
    H = homogenizer(sc, 2).table
    i0 = sc.index(0)
    assert np.allclose(H[i0 : i0 + 2, i0 : i0 + 2], np.eye(2))
    i2 = sc.index(2)
    assert np.allclose(np.diag(H)[i2 : i2 + 2], [5**0.25, 5**-0.25])
    Hinv = homogenizer(sc, 2, inverse=True)
    assert np.allclose((homogenizer(sc, 2) @ Hinv).table, np.eye(sc.size))
    with pytest.raises(ValueError):
        homogenizer(FourierScale(2, fiber=3), 2)


def test_homogenizer_jets_in_fiber_blocks():
    # order 3 with two components per jet: blocks (j=0: 2 comps, j=1: 2, j=2: 2)
    sc = FourierScale(1, fiber=6)
    diag = np.diag(homogenizer(sc, 3).table).real
    i1 = sc.index(1)
    assert np.allclose(diag[i1 : i1 + 6], [2**0.5, 2**0.5, 1, 1, 2**-0.5, 2**-0.5])


def test_norm_examples():
    sc = FourierScale(2)
    u0 = ScaleSection.single_mode(sc, 0)
    for s in (-3.0, 0.0, 1.7):
        assert norm_s(u0, s) == pytest.approx(1.0)
    assert norm_s(ScaleSection.single_mode(sc, 1), 1.0) == pytest.approx(np.sqrt(2))
    assert pairing(u0, ScaleSection.single_mode(sc, 1), 0.5) == 0


def test_pairing_is_dual_norm(rng):
    sc = FourierScale(6, fiber=2)
    u = ScaleSection(sc, rng.standard_normal(sc.size) + 1j * rng.standard_normal(sc.size))
    for s in (-1.5, 0.0, 2.0):
        assert dual_norm(u, s) == pytest.approx(norm_s(u, s), rel=1e-13)
        for _ in range(20):
            v = ScaleSection(sc, rng.standard_normal(sc.size))
            assert abs(pairing(u, v, s)) <= norm_s(u, s) * norm_s(v, -s) * (1 + 1e-13)


def test_operator_norm_examples():
    sc = FourierScale(2)
    assert operator_norm(ScaleOperator(sc, np.eye(sc.size)), 1.3) == pytest.approx(1.0)
    D = np.diag(np.arange(1.0, sc.size + 1))
    for s in (-2.0, 0.0, 2.0):
        assert operator_norm(ScaleOperator(sc, D), s) == pytest.approx(sc.size)
    C = np.zeros((sc.size, sc.size))
    C[sc.index(1), sc.index(0)] = 1.0
    for s in (0.0, 0.5, 1.0, 3.0):
        assert operator_norm(ScaleOperator(sc, C), s) == pytest.approx(2 ** (s / 2), rel=1e-14)


def test_duality_examples(rng):
    sc = FourierScale(5, fiber=2)
    I = ScaleOperator(sc, np.eye(sc.size), True)
    assert duality_check(I, 2.0) == pytest.approx((1.0, 1.0))
    T = random_hermitian(sc, rng)
    a, b = duality_check(T, 1.5)
    assert a == pytest.approx(b, rel=1e-10)
    with pytest.raises(ValueError):
        duality_check(ScaleOperator(sc, rng.standard_normal((sc.size, sc.size))), 1.0)


def test_non_hermitian_flag_rejected(rng):
    sc = FourierScale(1)
    with pytest.raises(ValueError):
        ScaleOperator(sc, rng.standard_normal((3, 3)), selfadjoint_at_0=True)


def test_interpolation_examples(rng):
    sc = FourierScale(3)
    D = ScaleOperator(sc, np.diag(rng.standard_normal(sc.size)))
    lhs, rhs = interpolation_check(D, -1.0, 0.2, 1.0)
    assert lhs == pytest.approx(rhs, rel=1e-13)
    C = np.zeros((sc.size, sc.size))
    C[sc.index(1), sc.index(0)] = 1.0
    lhs, rhs = interpolation_check(ScaleOperator(sc, C), -1.0, 0.0, 1.0)
    assert lhs == pytest.approx(rhs, rel=1e-13)
    for _ in range(200):
        T = ScaleOperator(sc, rng.standard_normal((sc.size, sc.size)) + 1j * rng.standard_normal((sc.size, sc.size)))
        lhs, rhs = interpolation_check(T, -1.0, 0.0, 1.0)
        assert within(lhs, rhs)
    with pytest.raises(ValueError):
        interpolation_check(T, 1.0, 0.0, 2.0)


def test_vector_interpolation_examples():
    sc = FourierScale(3)
    u = ScaleSection.single_mode(sc, 2, 3.0)
    lhs, rhs = vector_interpolation_check(u, -1.0, 0.3, 2.0)
    assert lhs == pytest.approx(rhs, rel=1e-13)
    u2 = ScaleSection(sc, ScaleSection.single_mode(sc, 0).flat + ScaleSection.single_mode(sc, 3).flat)
    lhs, rhs = vector_interpolation_check(u2, -1.0, 0.0, 1.0)
    assert lhs < rhs - 1e-3
    assert vector_interpolation_check(ScaleSection(sc, np.zeros(sc.size)), -1, 0, 1) == (0.0, 0.0)


def test_submultiplicative(rng):
    sc = FourierScale(4, fiber=2)
    for _ in range(20):
        A = ScaleOperator(sc, rng.standard_normal((sc.size, sc.size)))
        B = ScaleOperator(sc, rng.standard_normal((sc.size, sc.size)))
        s = rng.uniform(-2, 2)
        assert operator_norm(A @ B, s) <= operator_norm(A, s) * operator_norm(B, s) * (1 + 1e-12)


def test_continuity_transfer(rng):
    sc = FourierScale(4)
    T0 = random_hermitian(sc, rng)
    H = random_hermitian(sc, rng)
    const = continuity_transfer_experiment(lambda b: T0, 0.0, [0.1, 0.2], 1.0)
    assert np.all(const.norms == 0.0)
    fam = lambda b: ScaleOperator(sc, T0.table + b * H.table, True)
    grid = [0.001, 0.01, 0.1]
    rep = continuity_transfer_experiment(fam, 0.0, grid, 1.5)
    assert rep.bounded and rep.selfadjoint
    assert np.all(rep.duality_gap <= 1e-10 * rep.norms[:, -1])
    # linear in b at every level
    assert np.allclose(rep.norms / np.array(grid)[:, None], rep.norms[0] / grid[0], rtol=1e-10)


def test_continuity_transfer_without_flag(rng):
    sc = FourierScale(3)
    E = rng.standard_normal((sc.size, sc.size))
    fam = lambda b: ScaleOperator(sc, b * E)
    rep = continuity_transfer_experiment(fam, 0.0, [0.01, 0.1], 2.0)
    assert not rep.selfadjoint
    assert rep.bounded  # interpolation holds for any operator
    assert np.any(rep.duality_gap > 1e-6)  # duality is only reported
