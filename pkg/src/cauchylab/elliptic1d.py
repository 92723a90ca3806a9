"""Boundary apparatus for elliptic ODE systems on [0, 1].

An operator ``A = sum_j a_j(x) d^j/dx^j`` of order ``d`` acts on ``C^m``-valued
functions; the ``a_j`` are matrix polynomials, so adjoints, Green matrices and
quadrature are exact and every residual isolates integrator error.

Boundary jets use the inward normal: ``gamma^p = u^{(p)}(0)`` at ``x = 0`` and
``gamma^p = (-1)^p u^{(p)}(1)`` at ``x = 1``. A boundary jet vector has length
``2 d m``: the ``d`` jets at 0 (each ``m`` components), then the ``d`` jets at 1.

The boundary of [0, 1] is two points, so the boundary Laplacian vanishes and
the homogenizer is the identity: adjusted objects coincide with plain ones.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import comb
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial import polynomial as npoly

from . import _backend
from .kernels import STATUS_OK, integrate_linear
from .subspace import (
    InnerSpace,
    Projector,
    Subspace,
    gap_hat,
    monotone_to_zero,
    orthogonalize_projector,
    projector_norm_estimate,
)

RTOL = 1e-11
ATOL = 1e-11
ELLIPTICITY_COND_MAX = 1e12


class EllipticityError(ValueError):
    """Leading coefficient singular (or numerically so) somewhere on [0, 1]."""


class IntegrationError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class CoefficientFunction:
    """Polynomial ``sum_p c[p] x^p`` with array-valued coefficients ``c[p]``.

    Used for both ``m x m`` operator coefficients and ``C^m``-valued test
    sections (trailing shape ``(m,)``).
    """

    coeffs: np.ndarray

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=np.complex128)
        if c.ndim < 1 or c.shape[0] == 0:
            raise ValueError("need at least one polynomial coefficient")
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def constant(cls, value) -> "CoefficientFunction":
        return cls(np.asarray(value, dtype=np.complex128)[None])

    @classmethod
    def zeros(cls, shape) -> "CoefficientFunction":
        return cls(np.zeros((1, *shape), dtype=np.complex128))

    @property
    def degree(self) -> int:
        return self.coeffs.shape[0] - 1

    @property
    def value_shape(self) -> tuple:
        return self.coeffs.shape[1:]

    def __call__(self, x: float) -> np.ndarray:
        out = self.coeffs[-1].copy()
        for c in self.coeffs[-2::-1]:
            out = out * x + c
        return out

    def derivative(self, n: int = 1) -> "CoefficientFunction":
        if n == 0:
            return self
        if n > self.degree:
            return CoefficientFunction.zeros(self.value_shape)
        return CoefficientFunction(npoly.polyder(self.coeffs, n, axis=0))

    def conj_transpose(self) -> "CoefficientFunction":
        return CoefficientFunction(np.conj(np.swapaxes(self.coeffs, -1, -2)))

    def padded(self, n_terms: int) -> np.ndarray:
        out = np.zeros((n_terms, *self.value_shape), dtype=np.complex128)
        out[: self.coeffs.shape[0]] = self.coeffs
        return out

    def __add__(self, other: "CoefficientFunction") -> "CoefficientFunction":
        n = max(self.coeffs.shape[0], other.coeffs.shape[0])
        return CoefficientFunction(self.padded(n) + other.padded(n))

    def scaled(self, factor: complex) -> "CoefficientFunction":
        return CoefficientFunction(self.coeffs * factor)

    def trimmed(self) -> "CoefficientFunction":
        c = self.coeffs
        nz = [p for p in range(c.shape[0]) if np.any(c[p] != 0)]
        return CoefficientFunction(c[: (nz[-1] + 1) if nz else 1])

    def equals(self, other: "CoefficientFunction", tol: float = 0.0) -> bool:
        n = max(self.coeffs.shape[0], other.coeffs.shape[0])
        return bool(np.max(np.abs(self.padded(n) - other.padded(n))) <= tol)


@dataclass(frozen=True, eq=False)
class OperatorSpec1D:
    """``A = sum_{j=0}^{d} a_j(x) (d/dx)^j`` on ``C^m``-valued functions."""

    d: int
    m: int
    coeffs: tuple
    check_ellipticity: bool = True
    leading_condition: float = field(init=False, default=np.nan)

    def __post_init__(self):
        if self.d < 1 or self.m < 1:
            raise ValueError("need d >= 1 and m >= 1")
        cs = tuple(
            c if isinstance(c, CoefficientFunction) else CoefficientFunction(c) for c in self.coeffs
        )
        if len(cs) != self.d + 1:
            raise ValueError("need exactly d + 1 coefficients a_0..a_d")
        for c in cs:
            if c.value_shape != (self.m, self.m):
                raise ValueError("coefficients must be m x m matrix polynomials")
        object.__setattr__(self, "coeffs", cs)
        if self.check_ellipticity:
            xs = np.linspace(0.0, 1.0, 65)
            cond = max(np.linalg.cond(cs[self.d](x)) for x in xs)
            object.__setattr__(self, "leading_condition", float(cond))
            if not np.isfinite(cond) or cond > ELLIPTICITY_COND_MAX:
                raise EllipticityError(f"leading coefficient is singular on [0,1] (cond {cond:.3e})")

    @classmethod
    def scalar(cls, *coeffs) -> "OperatorSpec1D":
        """Scalar operator from polynomial coefficient lists of ``a_0..a_d``."""
        return cls(
            len(coeffs) - 1,
            1,
            tuple(CoefficientFunction(np.asarray(c, dtype=complex).reshape(-1, 1, 1)) for c in coeffs),
        )

    @property
    def max_terms(self) -> int:
        return max(c.coeffs.shape[0] for c in self.coeffs)

    def coefficient_table(self) -> np.ndarray:
        """Array of shape ``(d+1, P, m, m)`` used by the integrator."""
        P = self.max_terms
        return np.stack([c.padded(P) for c in self.coeffs])

    def to_dict(self) -> dict:
        def enc(z):
            return [float(z.real), float(z.imag)]

        return {
            "d": self.d,
            "m": self.m,
            "coeffs": [
                [[[enc(z) for z in row] for row in mat] for mat in c.coeffs] for c in self.coeffs
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "OperatorSpec1D":
        try:
            d, m = int(data["d"]), int(data["m"])
            raw = data["coeffs"]
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"operator spec needs integer keys d, m and a coeffs table: {exc}") from exc
        cs = []
        for j, poly in enumerate(raw):
            arr = np.asarray(poly, dtype=float)
            if arr.ndim != 4 or arr.shape[1:] != (m, m, 2):
                raise ValueError(f"coeffs[{j}] must have shape (terms, {m}, {m}, 2) of [re, im] pairs")
            cs.append(CoefficientFunction(arr[..., 0] + 1j * arr[..., 1]))
        return cls(d, m, tuple(cs))

    def distance(self, other: "OperatorSpec1D", samples: int = 65) -> float:
        """``max_j sup_x ||a_j(x) - a'_j(x)||_2`` on a uniform grid of [0, 1]."""
        if (self.d, self.m) != (other.d, other.m):
            raise ValueError("operators differ in order or fiber dimension")
        xs = np.linspace(0.0, 1.0, samples)
        return max(
            float(np.linalg.norm(a(x) - b(x), 2)) for a, b in zip(self.coeffs, other.coeffs) for x in xs
        )


Section = Callable[[float, int], np.ndarray]


def poly_section(coeffs) -> CoefficientFunction:
    """``C^m``-valued polynomial test section with coefficient rows ``coeffs[p]``."""
    c = np.asarray(coeffs, dtype=np.complex128)
    return CoefficientFunction(c.reshape(c.shape[0], -1))


def _derivative(u, x: float, j: int) -> np.ndarray:
    if isinstance(u, CoefficientFunction):
        return np.atleast_1d(u.derivative(j)(x))
    return np.atleast_1d(np.asarray(u(x, j), dtype=np.complex128))


def apply(A: OperatorSpec1D, u, x: float) -> np.ndarray:
    """``(A u)(x) = sum_j a_j(x) u^{(j)}(x)``.

    ``u`` is a :class:`CoefficientFunction` section or a callable ``u(x, j)``
    returning the ``j``-th derivative.
    """
    return sum(A.coeffs[j](x) @ _derivative(u, x, j) for j in range(A.d + 1))


def formal_adjoint(A: OperatorSpec1D) -> OperatorSpec1D:
    """``A^t v = sum_j (-1)^j (a_j^H v)^{(j)}`` expanded by Leibniz.

    Coefficient ``i`` of the result is ``sum_{j >= i} (-1)^j C(j, i) (a_j^H)^{(j-i)}``.
    """
    out = []
    for i in range(A.d + 1):
        acc = CoefficientFunction.zeros((A.m, A.m))
        for j in range(i, A.d + 1):
            term = A.coeffs[j].conj_transpose().derivative(j - i).scaled((-1) ** j * comb(j, i))
            acc = acc + term
        out.append(acc.trimmed())
    return OperatorSpec1D(A.d, A.m, tuple(out), check_ellipticity=A.check_ellipticity)


def principal_symbol(A: OperatorSpec1D, x: float, xi: float) -> np.ndarray:
    """``sigma_d(A)(x, xi) = a_d(x) (i xi)^d``."""
    return A.coeffs[A.d](x) * (1j * xi) ** A.d


@dataclass
class GreensMatrix:
    """Per-endpoint ``d x d`` blocks of ``m x m`` entries, flattened to ``dm x dm``.

    ``at0[q*m:(q+1)*m, p*m:(p+1)*m]`` pairs the jet ``gamma^p`` of ``u`` with the
    jet ``gamma^q`` of ``v``.
    """

    d: int
    m: int
    at0: np.ndarray
    at1: np.ndarray

    def block(self, endpoint: int, k: int, j: int) -> np.ndarray:
        T = self.at0 if endpoint == 0 else self.at1
        m = self.m
        return T[k * m : (k + 1) * m, j * m : (j + 1) * m]

    def full(self) -> np.ndarray:
        """Block-diagonal form acting on full boundary jet vectors (length 2dm)."""
        n = self.d * self.m
        J = np.zeros((2 * n, 2 * n), dtype=np.complex128)
        J[:n, :n] = self.at0
        J[n:, n:] = self.at1
        return J

    @property
    def adjusted(self) -> "GreensMatrix":
        # trivial boundary scale in 1D: the adjusted form is the plain one
        return self


def _boundary_form(A: OperatorSpec1D, x: float) -> np.ndarray:
    """``M(x)`` with ``[(Au,v) - (u,A^t v)] = B(1) - B(0)``, ``B = sum (M_qp u^(p), v^(q))``."""
    d, m = A.d, A.m
    M = np.zeros((d * m, d * m), dtype=np.complex128)
    for p in range(d):
        for q in range(d - p):
            acc = np.zeros((m, m), dtype=np.complex128)
            for j in range(p + q + 1, d + 1):
                l = j - 1 - p
                acc += (-1) ** l * comb(l, q) * A.coeffs[j].derivative(l - q)(x)
            M[q * m : (q + 1) * m, p * m : (p + 1) * m] = acc
    return M


def jet_signs(d: int, m: int) -> np.ndarray:
    """``(-1)^p`` per entry of a jet vector at x = 1 (inward normal ``-d/dx``)."""
    return np.repeat((-1.0) ** np.arange(d), m)


def greens_matrix(A: OperatorSpec1D) -> GreensMatrix:
    """Green's form ``J`` in inward-normal jet coordinates at both endpoints."""
    S = jet_signs(A.d, A.m)
    J0 = -_boundary_form(A, 0.0)
    J1 = S[:, None] * _boundary_form(A, 1.0) * S[None, :]
    return GreensMatrix(A.d, A.m, J0, J1)


def skew_diagonal_formula(A: OperatorSpec1D, endpoint: int, k: int) -> np.ndarray:
    """``i^d (-1)^{d-1-k} sigma_d(A)(nu)`` with ``nu = +1`` at 0 and ``-1`` at 1."""
    xi = 1.0 if endpoint == 0 else -1.0
    x = float(endpoint)
    return (1j) ** A.d * (-1) ** (A.d - 1 - k) * principal_symbol(A, x, xi)


def trace(u, d: int) -> np.ndarray:
    """Inward boundary jets ``rho^d u`` of a section (length ``2dm``)."""
    left = [_derivative(u, 0.0, p) for p in range(d)]
    right = [(-1) ** p * _derivative(u, 1.0, p) for p in range(d)]
    return np.concatenate(left + right)


def _quadrature_nodes(n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def l2_inner(f, g, n_nodes: int) -> complex:
    """``int_0^1 g(x)^H f(x) dx`` by Gauss-Legendre; ``f``, ``g`` map x to vectors."""
    xs, ws = _quadrature_nodes(n_nodes)
    return complex(sum(w * np.vdot(g(x), f(x)) for x, w in zip(xs, ws)))


def greens_identity_residual(A: OperatorSpec1D, u: CoefficientFunction, v: CoefficientFunction) -> float:
    """``|(Au, v) - (u, A^t v) - (J rho u, rho v)|`` with exact polynomial quadrature."""
    At = formal_adjoint(A)
    deg = max(c.degree for c in A.coeffs) + max(c.degree for c in At.coeffs) + u.degree + v.degree
    n = deg // 2 + 2
    lhs = l2_inner(lambda x: apply(A, u, x), lambda x: _derivative(v, x, 0), n)
    rhs = l2_inner(lambda x: _derivative(u, x, 0), lambda x: apply(At, v, x), n)
    J = greens_matrix(A).full()
    boundary = np.vdot(trace(v, A.d), J @ trace(u, A.d))
    return float(abs(lhs - rhs - boundary))


def bump_section(coeffs, d: int) -> CoefficientFunction:
    """Polynomial section times ``x^{d} (1-x)^{d}``: all jets below order d vanish at both ends."""
    base = poly_section(coeffs)
    bump = npoly.polypow([0.0, 1.0], d)
    bump = npoly.polymul(bump, npoly.polypow([1.0, -1.0], d))
    out = np.zeros((base.coeffs.shape[0] + bump.size - 1, base.coeffs.shape[1]), dtype=np.complex128)
    for i in range(base.coeffs.shape[1]):
        out[:, i] = npoly.polymul(base.coeffs[:, i], bump)
    return CoefficientFunction(out)


@dataclass
class KernelBasis:
    """Fundamental solutions of ``Au = 0`` started from the canonical jets at 0.

    ``jets[i, :, c]`` is the jet ``(u, u', ..., u^{(d-1)})`` of trajectory ``c``
    at ``x[i]``; ``x`` always contains both endpoints.
    """

    d: int
    m: int
    x: np.ndarray
    jets: np.ndarray
    steps: int

    @property
    def at0(self) -> np.ndarray:
        return self.jets[0]

    @property
    def at1(self) -> np.ndarray:
        return self.jets[-1]

    def values(self) -> np.ndarray:
        """``u(x)`` for every trajectory: shape ``(len(x), m, dm)``."""
        return self.jets[:, : self.m, :]


def kernel_basis(A: OperatorSpec1D, n_points: int = 2, rtol: float = RTOL, atol: float = ATOL) -> KernelBasis:
    """All ``dm`` solutions of ``Au = 0`` by shooting from ``x = 0``."""
    n = A.d * A.m
    xs = np.linspace(0.0, 1.0, max(2, n_points))
    Y, steps, status = integrate_linear(A.coefficient_table(), A.d, A.m, 0.0, np.eye(n), xs, rtol, atol)
    if status != STATUS_OK:
        raise IntegrationError(f"integrator failed with status {status} after {steps} steps")
    return KernelBasis(A.d, A.m, xs, Y, steps)


def boundary_space(d: int, m: int) -> InnerSpace:
    """``C^{2dm}`` with the two-point L^2 inner product (standard form)."""
    return InnerSpace.standard(2 * d * m, label=f"boundary jets d={d} m={m}")


def trace_matrix(A: OperatorSpec1D, basis: KernelBasis | None = None) -> np.ndarray:
    """``rho^d`` applied to every kernel trajectory: shape ``(2dm, dm)``."""
    basis = basis if basis is not None else kernel_basis(A)
    S = jet_signs(A.d, A.m)
    return np.vstack([basis.at0, S[:, None] * basis.at1])


def cauchy_data_space(A: OperatorSpec1D) -> Subspace:
    """``Lambda(A)``: boundary jets of all solutions; dimension ``dm``."""
    T = trace_matrix(A)
    L = Subspace.span(boundary_space(A.d, A.m), T)
    if L.rank != A.d * A.m:
        raise IntegrationError(f"Cauchy data space has dimension {L.rank}, expected {A.d * A.m}")
    return L


def oblique_calderon(A: OperatorSpec1D) -> Projector:
    """Idempotent with image ``Lambda(A)`` and kernel ``{0} + C^{dm}``.

    A jet pair ``(a, b)`` goes to ``(a, Phi a)`` where ``Phi`` maps left jets of
    a solution to its right jets.
    """
    n = A.d * A.m
    B = kernel_basis(A)
    Phi = jet_signs(A.d, A.m)[:, None] * B.at1 @ np.linalg.inv(B.at0)
    C = np.zeros((2 * n, 2 * n), dtype=np.complex128)
    C[:n, :n] = np.eye(n)
    C[n:, :n] = Phi
    return Projector(boundary_space(A.d, A.m), C)


def calderon_projector(A: OperatorSpec1D) -> Projector:
    """Orthogonalized Calderon projection: self-adjoint idempotent onto ``Lambda(A)``."""
    return orthogonalize_projector(oblique_calderon(A))


@dataclass
class DecompositionReport:
    dim_cauchy: int
    dim_dual: int
    total_dim: int
    orthogonality: float  # largest |cos| between Lambda(A) and J^t Lambda(A^t)
    kernel_gap: float  # gap between ker C^ort(A) and J^t Lambda(A^t)
    adjusted_equals_plain: bool = True
    orthogonality_tol: float = 1e-9
    gap_tol: float = 1e-8

    @property
    def passed(self) -> bool:
        return (
            self.orthogonality <= self.orthogonality_tol
            and self.dim_cauchy + self.dim_dual == self.total_dim
            and self.kernel_gap <= self.gap_tol
        )


def orthogonal_decomposition_check(A: OperatorSpec1D) -> DecompositionReport:
    """Check ``Lambda(A) (+)^perp J^t Lambda(A^t) = C^{2dm}`` and ``ker C^ort(A) = J^t Lambda(A^t)``."""
    X = boundary_space(A.d, A.m)
    L = cauchy_data_space(A)
    Ld = cauchy_data_space(formal_adjoint(A))
    Jt = X.adjoint(greens_matrix(A).full())
    dual = Subspace.span(X, Jt @ Ld.basis)
    cos = np.linalg.norm(L.euclid.conj().T @ dual.euclid, 2) if L.rank and dual.rank else 0.0
    C = calderon_projector(A)
    return DecompositionReport(
        dim_cauchy=L.rank,
        dim_dual=dual.rank,
        total_dim=X.dim,
        orthogonality=float(cos),
        kernel_gap=gap_hat(C.kernel(), dual),
    )


def minimal_kernel_check(A: OperatorSpec1D, tol: float = 1e-10) -> int:
    """Dimension of solutions with vanishing jets at both endpoints (always 0).

    Also integrates from the zero jet and asserts the trajectory stays below ``tol``.
    """
    n = A.d * A.m
    xs = np.linspace(0.0, 1.0, 5)
    Y, _, status = integrate_linear(A.coefficient_table(), A.d, A.m, 0.0, np.zeros((n, 1)), xs)
    if status != STATUS_OK or np.max(np.abs(Y)) > tol:
        raise AssertionError("zero initial jet did not produce the zero solution")
    s = np.linalg.svd(trace_matrix(A), compute_uv=False)
    return int(n - np.sum(s > 1e-8 * s[0]))


@dataclass
class SweepReport:
    b0: float
    parameters: np.ndarray
    coefficient_distance: np.ndarray
    gap: np.ndarray
    projector_distance: np.ndarray
    estimate: np.ndarray
    estimate_holds: bool
    lipschitz: float
    converges: bool

    def rows(self):
        for i, b in enumerate(self.parameters):
            yield (
                float(b),
                float(self.coefficient_distance[i]),
                float(self.gap[i]),
                float(self.projector_distance[i]),
                float(self.estimate[i]),
            )


def family_sweep_1d(
    family: Callable[[float], OperatorSpec1D],
    b0: float,
    parameters: Sequence[float],
    final_tol: float = 1e-2,
) -> SweepReport:
    """Distances of ``Lambda(A_b)`` and ``C^ort(A_b)`` from their values at ``b0``.

    ``lipschitz`` is the smallest ``L`` with ``||C^ort_b - C^ort_b0|| <= L |b - b0|``
    on the grid (points with ``b = b0`` excluded).
    """
    b = np.asarray(parameters, dtype=float)
    if b.ndim != 1 or b.size == 0 or np.any(np.diff(b) <= 0):
        raise ValueError("parameter values must be strictly increasing")
    A0 = family(b0)
    L0, C0 = cauchy_data_space(A0), calderon_projector(A0)

    def sample(bi):
        Ab = family(float(bi))
        Lb, Cb = cauchy_data_space(Ab), calderon_projector(Ab)
        dist = Cb.space.operator_norm(Cb.table - C0.table)
        return A0.distance(Ab), gap_hat(Lb, L0), dist, projector_norm_estimate(Cb, C0)

    rows = np.array(_backend.parallel_map(sample, b), dtype=float).reshape(-1, 4)
    coef, gaps, dists, est = rows.T
    off = np.abs(b - b0) > 0
    lip = float(np.max(dists[off] / np.abs(b - b0)[off])) if np.any(off) else 0.0
    return SweepReport(
        b0=float(b0),
        parameters=b,
        coefficient_distance=coef,
        gap=gaps,
        projector_distance=dists,
        estimate=est,
        estimate_holds=bool(np.all(dists <= est * (1 + 1e-12) + 1e-14)),
        lipschitz=lip,
        converges=monotone_to_zero(b - b0, dists, final_tol, slack=1e-9)
        and monotone_to_zero(b - b0, gaps, final_tol, slack=1e-9),
    )


def random_elliptic_spec(rng: np.random.Generator, d: int, m: int, degree: int = 2, scale: float = 1.0) -> OperatorSpec1D:
    """Random operator with well-conditioned leading coefficient ``I + small``."""
    cs = []
    for j in range(d + 1):
        c = scale * (rng.standard_normal((degree + 1, m, m)) + 1j * rng.standard_normal((degree + 1, m, m)))
        if j == d:
            c *= 0.15
            c[0] += np.eye(m) * (1.0 if rng.random() < 0.5 else -1.0)
        cs.append(CoefficientFunction(c))
    return OperatorSpec1D(d, m, tuple(cs))
