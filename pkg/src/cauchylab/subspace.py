"""Subspace geometry in finite-dimensional weighted inner-product spaces.

Every subspace is stored through a basis that is orthonormal for the ambient
Hermitian form ``<u, v> = v^H G u``. Writing ``G = R^H R`` (Cholesky), the map
``x -> R x`` is an isometry onto standard C^n, so all gaps, angular distances
and operator norms reduce to singular values of matrices in those Euclidean
coordinates.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np
import scipy.linalg

DEFAULT_TOL = 1e-8
IDEMPOTENCY_TOL = 1e-9


class SubspaceError(ValueError):
    """Raised on mismatched ambient spaces or violated preconditions."""


@dataclass(frozen=True, eq=False)
class InnerSpace:
    """C^n with the Hermitian form given by a positive-definite Gram matrix."""

    gram: np.ndarray
    label: str = ""
    _factor: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        g = np.array(self.gram, dtype=np.complex128)
        if g.ndim != 2 or g.shape[0] != g.shape[1] or g.shape[0] == 0:
            raise SubspaceError("gram must be a non-empty square matrix")
        scale = max(1.0, float(np.max(np.abs(g))))
        if np.max(np.abs(g - g.conj().T)) > 1e-12 * scale:
            raise SubspaceError("gram is not Hermitian")
        g = 0.5 * (g + g.conj().T)
        if np.linalg.eigvalsh(g)[0] <= 0.0:
            raise SubspaceError("gram is not positive definite")
        object.__setattr__(self, "gram", g)
        # gram = R^H R with R upper triangular
        object.__setattr__(self, "_factor", np.linalg.cholesky(g).conj().T)

    @classmethod
    def standard(cls, dim: int, label: str = "standard") -> "InnerSpace":
        return cls(np.eye(dim), label)

    @property
    def dim(self) -> int:
        return self.gram.shape[0]

    @property
    def factor(self) -> np.ndarray:
        return self._factor

    def inner(self, u, v) -> complex:
        return complex(np.vdot(v, self.gram @ u))

    def norm(self, u) -> float:
        return float(np.linalg.norm(self._factor @ u))

    def to_euclid(self, x: np.ndarray) -> np.ndarray:
        return self._factor @ x

    def from_euclid(self, y: np.ndarray) -> np.ndarray:
        return scipy.linalg.solve_triangular(self._factor, y, lower=False)

    def adjoint(self, T: np.ndarray) -> np.ndarray:
        """Adjoint of ``T`` for this inner product: ``G^{-1} T^H G``."""
        return np.linalg.solve(self.gram, T.conj().T @ self.gram)

    def euclid_operator(self, T: np.ndarray) -> np.ndarray:
        """``R T R^{-1}``: the matrix of ``T`` in orthonormal coordinates."""
        return self._factor @ scipy.linalg.solve_triangular(self._factor.T, T.T, lower=True).T

    def operator_norm(self, T: np.ndarray) -> float:
        return float(np.linalg.norm(self.euclid_operator(np.asarray(T, dtype=np.complex128)), 2))

    def compatible(self, other: "InnerSpace") -> bool:
        return self is other or (
            self.dim == other.dim and np.array_equal(self.gram, other.gram)
        )


def _orthonormal_columns(Y: np.ndarray, tol: float, ref: float | None = None) -> np.ndarray:
    """Orthonormal basis of the column space of ``Y`` (SVD cutoff ``tol * ref``)."""
    if Y.shape[1] == 0:
        return np.zeros((Y.shape[0], 0), dtype=np.complex128)
    U, s, _ = np.linalg.svd(Y, full_matrices=False)
    scale = s[0] if ref is None else max(ref, s[0])
    if s.size == 0 or scale == 0.0:
        return np.zeros((Y.shape[0], 0), dtype=np.complex128)
    r = int(np.sum(s > tol * scale))
    return U[:, :r]


def null_space_euclid(T: np.ndarray, tol: float = DEFAULT_TOL, ref: float | None = None) -> np.ndarray:
    """Orthonormal basis of ``ker T``.

    Singular values at most ``tol * ref`` count as zero; ``ref`` defaults to
    the largest singular value of ``T``. Pass the norm of the operator that
    ``T`` was derived from when ``T`` itself may be pure rounding noise.
    """
    n = T.shape[1]
    if T.shape[0] == 0:
        return np.eye(n, dtype=np.complex128)
    _, s, Vh = np.linalg.svd(T, full_matrices=True)
    scale = s[0] if ref is None else max(ref, s[0] if s.size else 0.0)
    if s.size == 0 or scale == 0.0:
        return np.eye(n, dtype=np.complex128)
    r = int(np.sum(s > tol * scale))
    return Vh[r:].conj().T


@dataclass(frozen=True, eq=False)
class Subspace:
    """Linear subspace given by a basis orthonormal in ``space``."""

    space: InnerSpace
    basis: np.ndarray

    def __post_init__(self):
        B = np.array(self.basis, dtype=np.complex128).reshape(self.space.dim, -1)
        object.__setattr__(self, "basis", B)
        if B.shape[1]:
            gram = B.conj().T @ self.space.gram @ B
            if np.max(np.abs(gram - np.eye(B.shape[1]))) > 1e-10:
                raise SubspaceError("basis is not orthonormal in the ambient inner product")

    @classmethod
    def span(cls, space: InnerSpace, vectors, tol: float = DEFAULT_TOL, ref: float | None = None) -> "Subspace":
        """Column span of ``vectors``; ``ref`` fixes the scale of the rank cutoff."""
        V = np.asarray(vectors, dtype=np.complex128).reshape(space.dim, -1)
        Q = _orthonormal_columns(space.to_euclid(V), tol, ref)
        return cls._from_euclid(space, Q)

    @classmethod
    def _from_euclid(cls, space: InnerSpace, Q: np.ndarray) -> "Subspace":
        return cls(space, space.from_euclid(Q))

    @classmethod
    def zero(cls, space: InnerSpace) -> "Subspace":
        return cls(space, np.zeros((space.dim, 0)))

    @classmethod
    def whole(cls, space: InnerSpace) -> "Subspace":
        return cls._from_euclid(space, np.eye(space.dim, dtype=np.complex128))

    @property
    def rank(self) -> int:
        return self.basis.shape[1]

    @property
    def euclid(self) -> np.ndarray:
        return self.space.to_euclid(self.basis)

    def projector(self) -> np.ndarray:
        """Orthogonal projector onto the subspace, as a matrix in original coordinates."""
        return self.basis @ self.basis.conj().T @ self.space.gram

    def orthogonal_complement(self) -> "Subspace":
        Y = self.euclid
        Q = null_space_euclid(Y.conj().T) if Y.shape[1] else np.eye(self.space.dim, dtype=np.complex128)
        return Subspace._from_euclid(self.space, Q)


def _check_same(M: Subspace, N: Subspace):
    if not M.space.compatible(N.space):
        raise SubspaceError("subspaces live in different ambient spaces")


def _residual(Y: np.ndarray, Q: np.ndarray) -> np.ndarray:
    """``(I - Q Q^H) Y`` for orthonormal ``Q`` (Euclidean coordinates)."""
    if Q.shape[1] == 0:
        return Y
    return Y - Q @ (Q.conj().T @ Y)


def gap_delta(M: Subspace, N: Subspace) -> float:
    """One-sided gap: sup over the unit sphere of M of the distance to N."""
    _check_same(M, N)
    if M.rank == 0:
        return 0.0
    R = _residual(M.euclid, N.euclid)
    return min(1.0, float(np.linalg.norm(R, 2)))


def gap_hat(M: Subspace, N: Subspace) -> float:
    return max(gap_delta(M, N), gap_delta(N, M))


class PrincipalPairs(NamedTuple):
    cosines: np.ndarray
    sines: np.ndarray
    left: np.ndarray  # principal vectors in M (Euclidean coordinates)
    right: np.ndarray  # principal vectors in N (Euclidean coordinates)


def principal_pairs(M: Subspace, N: Subspace) -> PrincipalPairs:
    """Principal vectors of (M, N) with cosines and accurately computed sines.

    ``right`` holds all ``rank N`` right singular vectors; those beyond
    ``min(rank M, rank N)`` have cosine 0. Sines are measured directly as
    distances to the opposite subspace, which keeps small angles accurate.
    """
    _check_same(M, N)
    YM, YN = M.euclid, N.euclid
    C = YM.conj().T @ YN
    U, s, Vh = np.linalg.svd(C, full_matrices=True)
    k = min(M.rank, N.rank)
    left = YM @ U[:, :k]
    right = YN @ Vh.conj().T
    cos = np.zeros(N.rank)
    cos[:k] = np.clip(s[:k], 0.0, 1.0)
    sines = np.linalg.norm(_residual(right, YM), axis=0) if N.rank else np.zeros(0)
    return PrincipalPairs(cos, np.clip(sines, 0.0, 1.0), left, right)


def intersect(M: Subspace, N: Subspace, tol: float = DEFAULT_TOL) -> Subspace:
    """M ∩ N: span of principal pairs whose angle has sine at most ``tol``."""
    if tol <= 0:
        raise SubspaceError("tol must be positive")
    return _sum_and_intersection(M, N, tol)[1]


def subspace_sum(M: Subspace, N: Subspace, tol: float = DEFAULT_TOL) -> Subspace:
    """M + N, with directions of N within angle ``asin(tol)`` of M discarded."""
    if tol <= 0:
        raise SubspaceError("tol must be positive")
    return _sum_and_intersection(M, N, tol)[0]


def _sum_and_intersection(M: Subspace, N: Subspace, tol: float) -> tuple[Subspace, Subspace]:
    _check_same(M, N)
    space = M.space
    if M.rank == 0 or N.rank == 0:
        zero = Subspace.zero(space)
        return (N if M.rank == 0 else M), zero
    pp = principal_pairs(M, N)
    k = min(M.rank, N.rank)
    common = np.flatnonzero(pp.sines[:k] <= tol)
    fresh = np.flatnonzero(pp.sines > tol)
    YM = M.euclid
    extra = _residual(pp.right[:, fresh], YM)
    if fresh.size:
        extra = extra / pp.sines[fresh]
        # residuals of principal vectors are mutually orthogonal; re-orthonormalize for roundoff
        extra = np.linalg.qr(extra)[0]
    sum_q = np.hstack([YM, extra])
    int_q = pp.left[:, common]
    total, inter = Subspace._from_euclid(space, sum_q), Subspace._from_euclid(space, int_q)
    if total.rank + inter.rank != M.rank + N.rank:
        raise SubspaceError("dimension identity violated after thresholding (ill-conditioned pair)")
    return total, inter


def gamma(M: Subspace, N: Subspace, tol: float = DEFAULT_TOL) -> float:
    """Angular distance: inf over u in M \\ N of dist(u, N) / dist(u, M ∩ N).

    Returns 1 when M ⊆ N. Otherwise the infimum is the smallest singular value
    of ``(I - P_N)`` restricted to the complement of M ∩ N inside M, since
    ``dist(u, N) = dist(u - P_{M∩N} u, N)``.
    """
    _check_same(M, N)
    if gap_delta(M, N) <= tol:
        return 1.0
    inter = intersect(M, N, tol)
    YM = M.euclid
    Z = _residual(YM, inter.euclid)
    Z = _orthonormal_columns(Z, tol)[:, : M.rank - inter.rank]
    s = np.linalg.svd(_residual(Z, N.euclid), compute_uv=False)
    return float(np.clip(s[-1], 0.0, 1.0))


@dataclass(frozen=True, eq=False)
class Projector:
    """Idempotent operator on an :class:`InnerSpace`."""

    space: InnerSpace
    table: np.ndarray
    tol: float = IDEMPOTENCY_TOL

    def __post_init__(self):
        P = np.array(self.table, dtype=np.complex128)
        if P.shape != (self.space.dim, self.space.dim):
            raise SubspaceError("projector table has the wrong shape")
        object.__setattr__(self, "table", P)
        err = self.idempotency_error()
        # rounding in P @ P grows with the square of the norm of an oblique projector
        if err > self.tol * max(1.0, self.space.operator_norm(P)) ** 2:
            raise SubspaceError(f"table is not idempotent (||P^2 - P|| = {err:.3e})")

    def idempotency_error(self) -> float:
        return self.space.operator_norm(self.table @ self.table - self.table)

    def norm(self) -> float:
        return self.space.operator_norm(self.table)

    def image(self, tol: float = DEFAULT_TOL) -> Subspace:
        return Subspace.span(self.space, self.table, tol)

    def kernel(self, tol: float = DEFAULT_TOL) -> Subspace:
        return Subspace.span(self.space, np.eye(self.space.dim) - self.table, tol)

    def is_selfadjoint(self, tol: float = 1e-9) -> bool:
        T = self.table
        return self.space.operator_norm(T - self.space.adjoint(T)) <= tol * max(1.0, self.norm())


def orthogonal_projector(M: Subspace) -> Projector:
    return Projector(M.space, M.projector())


def orthogonalize_projector(C: Projector) -> Projector:
    """Self-adjoint idempotent with the image of ``C``.

    Evaluates ``C C^t (C C^t + (I - C^t)(I - C))^{-1}`` where ``^t`` is the
    adjoint in the ambient inner product.
    """
    space = C.space
    P = C.table
    if C.idempotency_error() > C.tol * max(1.0, C.norm()) ** 2:
        raise SubspaceError("input is not idempotent")
    I = np.eye(space.dim)
    Pt = space.adjoint(P)
    CCt = P @ Pt
    normalizer = CCt + (I - Pt) @ (I - P)
    if np.linalg.cond(space.euclid_operator(normalizer)) > 1e14:
        raise SubspaceError("normalizing operator is singular; input violates idempotency")
    # X @ normalizer = CCt  <=>  normalizer^T X^T = CCt^T
    out = np.linalg.solve(normalizer.T, CCt.T).T
    return Projector(space, out)


def operator_distance(P: Projector, Q: Projector) -> float:
    if not P.space.compatible(Q.space):
        raise SubspaceError("projectors act on different spaces")
    return P.space.operator_norm(P.table - Q.table)


def projector_gap_vs_norm(P: Projector, Q: Projector, tol: float = DEFAULT_TOL) -> tuple[float, float]:
    """Return ``(gap_hat(im P, im Q), ||P - Q||)``; the first never exceeds the second."""
    dist = operator_distance(P, Q)
    g = gap_hat(P.image(tol), Q.image(tol))
    if g > dist + 1e-9:
        raise AssertionError(f"gap {g:.6e} exceeds operator distance {dist:.6e}")
    return g, dist


def projector_norm_estimate(Pb: Projector, Pb0: Projector, tol: float = DEFAULT_TOL) -> float:
    """Upper bound for ``||P_b - P_b0||`` from gaps of images and kernels.

    ``(||P_b0|| + 1)(d1 + d2)(1/gamma(im P_b, ker P_b) + 1/gamma(ker P_b, im P_b))``
    with ``d1 = delta(im P_b, im P_b0)`` and ``d2 = delta(ker P_b, ker P_b0)``.
    """
    if not Pb.space.compatible(Pb0.space):
        raise SubspaceError("projectors act on different spaces")
    im_b, ker_b = Pb.image(tol), Pb.kernel(tol)
    d1 = gap_delta(im_b, Pb0.image(tol))
    d2 = gap_delta(ker_b, Pb0.kernel(tol))
    g1 = gamma(im_b, ker_b, tol)
    g2 = gamma(ker_b, im_b, tol)
    if g1 <= 0.0 or g2 <= 0.0:
        raise SubspaceError("degenerate angular distance between image and kernel")
    return (Pb0.norm() + 1.0) * (d1 + d2) * (1.0 / g1 + 1.0 / g2)


def neubauer_gamma_bound(gamma0: float, delta1: float, delta2: float) -> float | None:
    """Lower bound for gamma(im P_b, ker P_b) from data at b0, or None if vacuous."""
    for v in (gamma0, delta1, delta2):
        if not np.isfinite(v) or v < 0:
            raise ValueError("inputs must be finite and non-negative")
    numerator = gamma0 - delta1 * gamma0 - delta1 - delta2
    if numerator <= 0:
        return None
    return numerator / (1.0 + delta2)


class SurjectionComparison(NamedTuple):
    cbar: float
    c: float
    delta_MN: float
    delta_pMpN: float


def surjection_gap_comparison(
    p: np.ndarray,
    M: Subspace,
    N: Subspace,
    codomain: InnerSpace | None = None,
    tol: float = DEFAULT_TOL,
) -> SurjectionComparison:
    """Compare ``delta(M, N)`` with ``delta(p M, p N)`` for surjective ``p``.

    The constants are ratios of the extremal singular values of the induced
    bijection ``X / ker p -> Y`` (realized on the orthogonal complement of
    ``ker p``): ``cbar = s_min / s_max`` and ``c = s_max / s_min``, so that
    ``cbar * delta(M, N) <= delta(pM, pN) <= c * delta(M, N)``.
    """
    _check_same(M, N)
    X = M.space
    p = np.asarray(p, dtype=np.complex128)
    Y = codomain if codomain is not None else InnerSpace.standard(p.shape[0])
    if p.shape != (Y.dim, X.dim):
        raise SubspaceError("map shape does not match domain and codomain")
    # p in Euclidean coordinates of both spaces
    pe = Y.to_euclid(p) @ np.linalg.inv(X.factor)
    s = np.linalg.svd(pe, compute_uv=False)
    if s.size == 0 or s[0] == 0 or int(np.sum(s > tol * s[0])) < Y.dim:
        raise SubspaceError("map is not surjective")
    kernel = Subspace._from_euclid(X, null_space_euclid(pe, tol))
    if gap_delta(kernel, M) > tol or gap_delta(kernel, N) > tol:
        raise SubspaceError("ker p is not contained in both subspaces")
    smax, smin = float(s[0]), float(s[Y.dim - 1])
    pM = Subspace.span(Y, p @ M.basis, tol, ref=smax)
    pN = Subspace.span(Y, p @ N.basis, tol, ref=smax)
    return SurjectionComparison(smin / smax, smax / smin, gap_delta(M, N), gap_delta(pM, pN))


@dataclass(frozen=True)
class FamilySample:
    parameter: float
    items: tuple


def check_increasing(parameters: Sequence[float]) -> np.ndarray:
    b = np.asarray(parameters, dtype=float)
    if b.ndim != 1 or b.size == 0 or np.any(np.diff(b) <= 0):
        raise ValueError("parameter values must be strictly increasing")
    return b


def monotone_to_zero(offsets, values, final_tol: float, slack: float = 1e-12) -> bool:
    """True if ``values`` approach 0 monotonically as ``b -> b0`` from each side.

    ``offsets`` are signed ``b - b0``. On each side, values must not increase
    as the offset shrinks, and the value closest to ``b0`` must be at most
    ``final_tol``.
    """
    off = np.asarray(offsets, dtype=float)
    v = np.asarray(values, dtype=float)
    for side in (off < 0, off > 0):
        if not np.any(side):
            continue
        order = np.argsort(-np.abs(off[side]), kind="stable")
        w = v[side][order]
        if np.any(np.diff(w) > slack * np.maximum(1.0, w[:-1])) or w[-1] > final_tol:
            return False
    at = v[off == 0]
    return bool(np.all(at <= final_tol))


@dataclass
class FamilyReport:
    b0: float
    parameters: np.ndarray
    intersection_dims: np.ndarray
    gap_intersection: np.ndarray
    gap_sum: np.ndarray
    constant_dimension: bool
    intersection_converges: bool
    sum_converges: bool

    def rows(self):
        for i, b in enumerate(self.parameters):
            yield (
                float(b),
                abs(float(b) - self.b0),
                int(self.intersection_dims[i]),
                float(self.gap_intersection[i]),
                float(self.gap_sum[i]),
            )


def family_continuity_experiment(
    family: Callable[[float], tuple[Subspace, Subspace]],
    b0: float,
    parameters: Sequence[float],
    tol: float = DEFAULT_TOL,
    final_tol: float = 1e-2,
) -> FamilyReport:
    """Track ``M_b ∩ N_b`` and ``M_b + N_b`` against their values at ``b0``.

    A jump of ``dim(M_b ∩ N_b)`` is recorded in the report (``constant_dimension``
    false, typically with a non-converging intersection gap) rather than raised.
    """
    b = check_increasing(parameters)
    M0, N0 = family(b0)
    I0, S0 = intersect(M0, N0, tol), subspace_sum(M0, N0, tol)
    dims, gi, gs = [], [], []
    for bi in b:
        M, N = family(float(bi))
        I, S = intersect(M, N, tol), subspace_sum(M, N, tol)
        dims.append(I.rank)
        gi.append(gap_hat(I, I0))
        gs.append(gap_hat(S, S0))
    dims = np.array(dims)
    dist = b - b0
    return FamilyReport(
        b0=float(b0),
        parameters=b,
        intersection_dims=dims,
        gap_intersection=np.array(gi),
        gap_sum=np.array(gs),
        constant_dimension=bool(np.all(dims == I0.rank)),
        intersection_converges=monotone_to_zero(dist, gi, final_tol),
        sum_converges=monotone_to_zero(dist, gs, final_tol),
    )


def preimage(A: np.ndarray, W: Subspace, domain: InnerSpace, tol: float = DEFAULT_TOL) -> Subspace:
    """``A^{-1}(W) = {x : A x in W}`` as the kernel of ``(I - P_W) A``."""
    Y = W.space
    Ae = Y.to_euclid(np.asarray(A, dtype=np.complex128)) @ np.linalg.inv(domain.factor)
    T = Y.to_euclid(A - W.projector() @ A) @ np.linalg.inv(domain.factor)
    ref = float(np.linalg.norm(Ae, 2)) if Ae.size else 0.0
    return Subspace._from_euclid(domain, null_space_euclid(T, tol, ref=ref))


def kernel_of(A: np.ndarray, domain: InnerSpace, codomain: InnerSpace, tol: float = DEFAULT_TOL) -> Subspace:
    T = codomain.to_euclid(np.asarray(A, dtype=np.complex128)) @ np.linalg.inv(domain.factor)
    return Subspace._from_euclid(domain, null_space_euclid(T, tol))


@dataclass
class GraphIntersectionReport:
    b0: float
    parameters: np.ndarray
    gap: np.ndarray
    kernel_gap: np.ndarray
    converges: bool


def graph_intersection_gap(
    family: Callable[[float], np.ndarray],
    W: Subspace,
    b0: float,
    parameters: Sequence[float],
    domain: InnerSpace | None = None,
    tol: float = DEFAULT_TOL,
    final_tol: float = 1e-2,
) -> GraphIntersectionReport:
    """``gap_hat(ker A_b0, A_b^{-1}(W))`` along a parameter grid.

    Requires ``image(A_b0)`` and ``W`` to be complementary in the codomain.
    ``kernel_gap`` records ``gap_hat(ker A_b0, ker A_b)`` for comparison; it
    may fail to converge when the kernel dimension jumps.
    """
    b = check_increasing(parameters)
    Y = W.space
    A0 = np.asarray(family(b0), dtype=np.complex128)
    X = domain if domain is not None else InnerSpace.standard(A0.shape[1])
    if A0.shape != (Y.dim, X.dim):
        raise SubspaceError("operator shape does not match the spaces")
    image0 = Subspace.span(Y, A0, tol)
    if intersect(image0, W, tol).rank != 0 or subspace_sum(image0, W, tol).rank != Y.dim:
        raise SubspaceError("image(A_b0) and W are not complementary")
    ker0 = kernel_of(A0, X, Y, tol)
    gaps, kgaps = [], []
    for bi in b:
        Ab = np.asarray(family(float(bi)), dtype=np.complex128)
        gaps.append(gap_hat(ker0, preimage(Ab, W, X, tol)))
        kgaps.append(gap_hat(ker0, kernel_of(Ab, X, Y, tol)))
    gaps = np.array(gaps)
    return GraphIntersectionReport(
        b0=float(b0),
        parameters=b,
        gap=gaps,
        kernel_gap=np.array(kgaps),
        converges=monotone_to_zero(b - b0, gaps, final_tol),
    )
