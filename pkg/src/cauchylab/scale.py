"""Truncated Sobolev scales on the circle.

Sections of a trivial ``C^fiber`` bundle over S^1 are stored by their Fourier
coefficients for modes ``-K..K``. The generator ``Phi = (Delta + 1)^{1/2}``
acts on mode ``k`` by ``(1 + k^2)^{1/2}``, so the ``H^s`` norm is the weighted
l^2 norm with weight ``(1 + k^2)^s``. Operators are dense tables over the
flattened (mode, fiber) index, mode-major.

On the truncation every statement about order-0 operators is an exact
finite-dimensional statement: ``||T||_s`` is the largest singular value of
``D_s T D_s^{-1}`` with ``D_s = diag((1 + k^2)^{s/2})``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

HERMITIAN_TOL = 1e-12
# relative rounding allowance for inequalities that hold with constant 1
ROUNDING_SLACK = 1e-12


@dataclass(frozen=True)
class FourierScale:
    """Modes ``-K..K`` with ``fiber`` components each."""

    K: int
    fiber: int = 1

    def __post_init__(self):
        if self.K < 0 or self.fiber < 1:
            raise ValueError("need K >= 0 and fiber >= 1")

    @property
    def modes(self) -> np.ndarray:
        return np.arange(-self.K, self.K + 1)

    @property
    def size(self) -> int:
        return (2 * self.K + 1) * self.fiber

    @staticmethod
    def weight(s: float, k) -> np.ndarray | float:
        """H^s weight ``(1 + k^2)^s`` of mode ``k``."""
        return (1.0 + np.asarray(k, dtype=float) ** 2) ** s

    def flat_modes(self) -> np.ndarray:
        return np.repeat(self.modes, self.fiber)

    def diag(self, s: float) -> np.ndarray:
        """Entries of ``D_s``: ``(1 + k^2)^{s/2}`` per flattened index."""
        return self.weight(0.5 * s, self.flat_modes())

    def index(self, k: int, component: int = 0) -> int:
        if abs(k) > self.K or not 0 <= component < self.fiber:
            raise IndexError("mode or component out of range")
        return (k + self.K) * self.fiber + component


@dataclass(frozen=True, eq=False)
class ScaleSection:
    """Fourier coefficients, shape ``(2K+1, fiber)``."""

    scale: FourierScale
    coefficients: np.ndarray

    def __post_init__(self):
        c = np.array(self.coefficients, dtype=np.complex128)
        if c.size != self.scale.size:
            raise ValueError("coefficient count does not match the scale")
        object.__setattr__(self, "coefficients", c.reshape(2 * self.scale.K + 1, self.scale.fiber))

    @classmethod
    def single_mode(cls, scale: FourierScale, k: int, value=1.0, component: int = 0) -> "ScaleSection":
        c = np.zeros(scale.size, dtype=np.complex128)
        c[scale.index(k, component)] = value
        return cls(scale, c)

    @property
    def flat(self) -> np.ndarray:
        return self.coefficients.ravel()


@dataclass(frozen=True, eq=False)
class ScaleOperator:
    """Dense operator on the truncated scale."""

    scale: FourierScale
    table: np.ndarray
    selfadjoint_at_0: bool = False

    def __post_init__(self):
        T = np.array(self.table, dtype=np.complex128)
        if T.shape != (self.scale.size, self.scale.size):
            raise ValueError("table shape does not match the scale")
        object.__setattr__(self, "table", T)
        if self.selfadjoint_at_0:
            ref = max(1.0, float(np.max(np.abs(T))))
            if np.max(np.abs(T - T.conj().T)) > HERMITIAN_TOL * ref:
                raise ValueError("operator flagged self-adjoint at level 0 is not Hermitian")

    def __matmul__(self, other: "ScaleOperator") -> "ScaleOperator":
        _same_scale(self.scale, other.scale)
        return ScaleOperator(self.scale, self.table @ other.table)

    def __sub__(self, other: "ScaleOperator") -> "ScaleOperator":
        _same_scale(self.scale, other.scale)
        flag = self.selfadjoint_at_0 and other.selfadjoint_at_0
        return ScaleOperator(self.scale, self.table - other.table, flag)

    def apply(self, u: ScaleSection) -> ScaleSection:
        _same_scale(self.scale, u.scale)
        return ScaleSection(self.scale, self.table @ u.flat)

    def inverse(self) -> "ScaleOperator":
        return ScaleOperator(self.scale, np.linalg.inv(self.table), self.selfadjoint_at_0)


def _same_scale(a: FourierScale, b: FourierScale):
    if a != b:
        raise ValueError("objects live on different scales")


def phi_multiplier(scale: FourierScale, s: float) -> ScaleOperator:
    """``Phi^s``: multiply mode ``k`` by ``(1 + k^2)^{s/2}``."""
    return ScaleOperator(scale, np.diag(scale.diag(s)), selfadjoint_at_0=True)


def homogenizer(scale: FourierScale, d: int, inverse: bool = False) -> ScaleOperator:
    """``Phi_d = diag(Phi^{(d-1)/2}, ..., Phi^{(1-d)/2})`` across ``d`` jet blocks.

    The fiber of ``scale`` is split into ``d`` equal jet blocks; jet ``j``
    of mode ``k`` is multiplied by ``(1 + k^2)^{(d-1-2j)/4}``.
    """
    if d < 1 or scale.fiber % d:
        raise ValueError("fiber must be a positive multiple of the order d")
    per_jet = scale.fiber // d
    jets = np.arange(scale.fiber) // per_jet
    exponent = (d - 1 - 2 * jets) / 4.0
    k2 = 1.0 + scale.modes.astype(float) ** 2
    factors = (k2[:, None] ** exponent[None, :]).ravel()
    if inverse:
        factors = 1.0 / factors
    return ScaleOperator(scale, np.diag(factors), selfadjoint_at_0=True)


def norm_s(u: ScaleSection, s: float) -> float:
    """``||u||_s = (sum_k (1 + k^2)^s |c_k|^2)^{1/2}``."""
    return float(np.linalg.norm(u.scale.diag(s) * u.flat))


def pairing(u: ScaleSection, v: ScaleSection, s: float = 0.0) -> complex:
    """L^2 pairing ``sum_k c_k(u) conj(c_k(v))``, read as ``H^s x H^{-s} -> C``.

    The value does not depend on ``s``; the argument only documents the
    levels at which ``u`` and ``v`` are measured.
    """
    _same_scale(u.scale, v.scale)
    return complex(np.vdot(v.flat, u.flat))


def dual_norm(u: ScaleSection, s: float) -> float:
    """``sup_v |pairing(u, v)| / ||v||_{-s}``, attained at ``v = D_{2s} u``."""
    v = ScaleSection(u.scale, u.scale.diag(2.0 * s) * u.flat)
    nv = norm_s(v, -s)
    return 0.0 if nv == 0.0 else abs(pairing(u, v, s)) / nv


def operator_norm(T: ScaleOperator, s: float) -> float:
    """``||T||_{s,s}``: largest singular value of ``D_s T D_s^{-1}``."""
    D = T.scale.diag(s)
    return float(np.linalg.norm((D[:, None] * T.table) / D[None, :], 2))


def duality_check(T: ScaleOperator, t: float) -> tuple[float, float]:
    """Return ``(||T||_{-t}, ||T||_t)``; equal when ``T`` is self-adjoint at level 0."""
    if not T.selfadjoint_at_0:
        raise ValueError("duality requires an operator flagged self-adjoint at level 0")
    if t < 0:
        raise ValueError("t must be non-negative")
    return operator_norm(T, -t), operator_norm(T, t)


def _theta(s0: float, s: float, s1: float) -> float:
    if not s0 < s < s1:
        raise ValueError("need s0 < s < s1")
    return (s - s0) / (s1 - s0)


def interpolation_check(T: ScaleOperator, s0: float, s: float, s1: float) -> tuple[float, float]:
    """``(||T||_s, ||T||_{s1}^theta ||T||_{s0}^{1-theta})`` with ``theta = (s-s0)/(s1-s0)``."""
    th = _theta(s0, s, s1)
    lhs = operator_norm(T, s)
    rhs = operator_norm(T, s1) ** th * operator_norm(T, s0) ** (1.0 - th)
    return lhs, rhs


def vector_interpolation_check(u: ScaleSection, s0: float, s: float, s1: float) -> tuple[float, float]:
    """``(||u||_s, ||u||_{s1}^{1-theta} ||u||_{s0}^theta)`` with ``theta = (s1-s)/(s1-s0)``."""
    th = 1.0 - _theta(s0, s, s1)
    return norm_s(u, s), norm_s(u, s1) ** (1.0 - th) * norm_s(u, s0) ** th


def within(lhs: float, rhs: float, slack: float = ROUNDING_SLACK) -> bool:
    """``lhs <= rhs`` up to a relative rounding allowance."""
    return lhs <= rhs * (1.0 + slack)


@dataclass
class ContinuityTransferReport:
    b0: float
    t: float
    parameters: np.ndarray
    s_grid: np.ndarray
    norms: np.ndarray  # shape (len(parameters), len(s_grid))
    bounds: np.ndarray  # interpolation of the endpoint columns
    duality_gap: np.ndarray  # | ||D||_{-t} - ||D||_t | per parameter
    selfadjoint: bool
    bounded: bool = field(default=False)

    def rows(self):
        for i, b in enumerate(self.parameters):
            for j, s in enumerate(self.s_grid):
                yield float(b), float(s), float(self.norms[i, j]), float(self.bounds[i, j])


def continuity_transfer_experiment(
    family: Callable[[float], ScaleOperator],
    b0: float,
    parameters: Sequence[float],
    t: float,
    n_s: int = 9,
) -> ContinuityTransferReport:
    """Tabulate ``||T_b - T_b0||_s`` for ``s`` on an even grid of ``[-t, t]``.

    Each interior column is compared with the interpolation of the endpoint
    columns. The duality gap at ``+-t`` is recorded for every parameter; it is
    guaranteed to vanish only when the family is flagged self-adjoint at 0.
    """
    if t <= 0 or n_s < 2:
        raise ValueError("need t > 0 and at least two grid levels")
    b = np.asarray(parameters, dtype=float)
    if b.ndim != 1 or np.any(np.diff(b) <= 0):
        raise ValueError("parameter values must be strictly increasing")
    s_grid = np.linspace(-t, t, n_s)
    T0 = family(b0)
    norms = np.zeros((b.size, n_s))
    bounds = np.zeros_like(norms)
    dual = np.zeros(b.size)
    selfadjoint = T0.selfadjoint_at_0
    for i, bi in enumerate(b):
        Tb = family(float(bi))
        selfadjoint = selfadjoint and Tb.selfadjoint_at_0
        D = Tb - T0
        norms[i] = [operator_norm(D, s) for s in s_grid]
        lo, hi = norms[i, 0], norms[i, -1]
        theta = (s_grid + t) / (2.0 * t)
        bounds[i] = hi**theta * lo ** (1.0 - theta)
        dual[i] = abs(lo - hi)
    bounded = bool(np.all(norms <= bounds * (1.0 + ROUNDING_SLACK)))
    return ContinuityTransferReport(b0, t, b, s_grid, norms, bounds, dual, bool(selfadjoint), bounded)


def random_hermitian(scale: FourierScale, rng: np.random.Generator, decay: float = 0.0) -> ScaleOperator:
    """Random Hermitian operator; ``decay`` damps entries by ``(1+|k-l|)^{-decay}``."""
    n = scale.size
    A = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    if decay:
        k = scale.flat_modes()
        A = A / (1.0 + np.abs(k[:, None] - k[None, :])) ** decay
    return ScaleOperator(scale, 0.5 * (A + A.conj().T), selfadjoint_at_0=True)
