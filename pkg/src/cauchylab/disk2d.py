"""Radial operators ``A_b = -Delta + V(r) - b`` on the unit disk, mode by mode.

With ``u(r, theta) = u_k(r) e^{i k theta}`` the equation decouples into radial
ODEs. Writing ``u_k = r^{|k|} w`` removes the coordinate singularity:

    -r w'' - (2|k| + 1) w' + r (V(r) - b) w = 0,   w(0) = 1,

which has polynomial coefficients and is integrated from ``r = eps`` with a
two-term Frobenius start. The boundary of the disk is the unit circle, where
the inward normal is ``-d/dr``; the homogenized Cauchy datum of mode ``k`` is
the line spanned by ``((1+k^2)^{1/4} u, -(1+k^2)^{-1/4} u')`` at ``r = 1``.

On mode ``k`` the ``H^s`` inner product is ``(1+k^2)^s`` times the standard
one, for both jet components after homogenization. Orthogonal projectors and
per-mode gaps are therefore independent of ``s``; the code still evaluates
them in the weighted geometry so this is checked rather than assumed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.optimize

from . import _backend
from .kernels import STATUS_OK, integrate_linear
from .scale import FourierScale
from .subspace import InnerSpace, Subspace, gap_hat

EPS = 1e-6
RTOL = 1e-11
ATOL = 1e-11
# |lambda| above this is reported as a pole of the DtN map
POLE_THRESHOLD = 1e9
# block difference of a tail mode |k| > K is at most TAIL_CONSTANT |b - b'| / (K+1)^2
TAIL_CONSTANT = 0.5


class RadialSolveError(RuntimeError):
    pass


@dataclass(frozen=True)
class RadialOperatorSpec:
    """``-Delta + V(r) - b`` with ``V = sum_p V[p] r^p`` and modes ``|k| <= K``."""

    V: tuple = (0.0,)
    b: float = 0.0
    K: int = 10

    def __post_init__(self):
        V = tuple(complex(v) if np.iscomplexobj(v) else float(v) for v in np.atleast_1d(self.V))
        object.__setattr__(self, "V", V if V else (0.0,))
        if self.K < 0:
            raise ValueError("K must be non-negative")

    @property
    def selfadjoint(self) -> bool:
        return all(np.isreal(v) for v in self.V)

    def shifted(self, b: float) -> "RadialOperatorSpec":
        return RadialOperatorSpec(self.V, float(b), self.K)

    @property
    def modes(self) -> np.ndarray:
        return np.arange(-self.K, self.K + 1)


@dataclass(frozen=True)
class RadialSolution:
    k: int
    u1: float
    du1: float  # outward radial derivative at r = 1
    steps: int


def _radial_table(V: Sequence[complex], b: float, k: int) -> np.ndarray:
    k = abs(k)
    P = max(len(V) + 1, 2)
    c = np.zeros((3, P, 1, 1), dtype=np.complex128)
    # a0 = r (V(r) - b)
    c[0, 1, 0, 0] = V[0] - b
    for p in range(1, len(V)):
        c[0, p + 1, 0, 0] = V[p]
    c[1, 0, 0, 0] = -(2 * k + 1)
    c[2, 1, 0, 0] = -1.0
    return c


def radial_solution(k: int, V: Sequence[complex] = (0.0,), b: float = 0.0, rtol: float = RTOL, atol: float = ATOL) -> RadialSolution:
    """Regular solution ``u = r^{|k|} w`` with ``w(0) = 1``: returns ``u(1)``, ``u'(1)``."""
    V = tuple(V) if len(V) else (0.0,)
    kk = abs(int(k))
    v1 = V[1] if len(V) > 1 else 0.0
    c2 = (V[0] - b) / (4.0 * (kk + 1))
    c3 = v1 / (3.0 * (2 * kk + 3))
    y0 = np.array([[1.0 + c2 * EPS**2 + c3 * EPS**3], [2.0 * c2 * EPS + 3.0 * c3 * EPS**2]])
    Y, steps, status = integrate_linear(_radial_table(V, b, kk), 2, 1, EPS, y0, np.array([1.0]), rtol, atol)
    if status != STATUS_OK:
        raise RadialSolveError(f"mode {k}: integrator status {status} after {steps} steps")
    w, dw = Y[0, 0, 0], Y[0, 1, 0]
    u1, du1 = w, kk * w + dw
    if abs(u1) < 1e-13 and abs(du1) < 1e-13:
        raise RadialSolveError(f"mode {k}: trivial boundary data")
    if np.all(np.isreal(V)):
        u1, du1 = u1.real, du1.real
    return RadialSolution(int(k), u1, du1, int(steps))


def homogenized_line(k: int, u1: complex, du1: complex) -> np.ndarray:
    """Unit vector along ``((1+k^2)^{1/4} u, -(1+k^2)^{-1/4} u')``."""
    q = (1.0 + float(k) ** 2) ** 0.25
    v = np.array([q * u1, -du1 / q], dtype=np.complex128)
    return v / np.linalg.norm(v)


@dataclass(frozen=True, eq=False)
class ModeModel:
    k: int
    dtn: float  # outward DtN value; inf at a pole
    pole: bool
    line: np.ndarray
    u1: complex
    du1: complex


def mode_model(k: int, sol: RadialSolution) -> ModeModel:
    u, du = sol.u1, sol.du1
    pole = abs(du) >= POLE_THRESHOLD * abs(u)
    if pole:
        return ModeModel(k, np.inf, True, np.array([0.0, 1.0], dtype=np.complex128), u, du)
    return ModeModel(k, du / u, False, homogenized_line(k, u, du), u, du)


def dtn_map(spec: RadialOperatorSpec) -> list[ModeModel]:
    """Mode models for ``k = -K..K``; each ``|k|`` is solved once (radial symmetry)."""
    sols = _backend.parallel_map(lambda k: radial_solution(k, spec.V, spec.b), range(spec.K + 1))
    return [mode_model(int(k), sols[abs(int(k))]) for k in spec.modes]


def mode_space(k: int, s: float) -> InnerSpace:
    """Homogenized boundary data of mode ``k`` with the ``H^s`` inner product."""
    w = FourierScale.weight(s, k)
    return InnerSpace(np.eye(2) * w, label=f"mode {k}, s={s}")


@dataclass
class CalderonBlocks:
    """Per-mode orthogonal projectors onto the homogenized Cauchy lines."""

    spec: RadialOperatorSpec
    s: float
    modes: np.ndarray
    blocks: np.ndarray  # (2K+1, 2, 2)
    models: list = field(repr=False, default_factory=list)
    tail_constant: float = TAIL_CONSTANT

    def tail_bound(self, other: "CalderonBlocks") -> float:
        """Bound for the sup over modes ``|k| > K`` of the block difference.

        From ``d lambda_k / db ~ -1/(2|k|)`` and the slope ``~1/(2|k|)`` of the
        line angle in ``lambda``; the constant is checked numerically for
        ``V = 0`` in the test-suite.
        """
        return self.tail_constant * abs(self.spec.b - other.spec.b) / (self.spec.K + 1) ** 2

    def block(self, k: int) -> np.ndarray:
        return self.blocks[int(k) + self.spec.K]

    def __sub__(self, other: "CalderonBlocks") -> np.ndarray:
        if self.spec.K != other.spec.K:
            raise ValueError("block sets have different cutoffs")
        return self.blocks - other.blocks


def calderon_blocks(spec: RadialOperatorSpec, s: float = 0.0, models: list | None = None) -> CalderonBlocks:
    """``C^ort_s`` restricted to the truncated modes, one 2x2 block per mode."""
    models = models if models is not None else dtn_map(spec)
    blocks = np.zeros((len(models), 2, 2), dtype=np.complex128)
    for i, mm in enumerate(models):
        X = mode_space(mm.k, s)
        blocks[i] = Subspace.span(X, mm.line).projector()
    return CalderonBlocks(spec, float(s), spec.modes.copy(), blocks, models)


def operator_norm_s_blockdiag(diff: np.ndarray, s: float, modes: Sequence[int] | None = None) -> float:
    """``||Delta C||_{s,s}`` for block-diagonal ``Delta C``: sup of weighted block norms."""
    diff = np.asarray(diff)
    n = diff.shape[0]
    modes = np.arange(-(n // 2), n // 2 + 1) if modes is None else np.asarray(modes)
    best = 0.0
    for k, B in zip(modes, diff):
        w = FourierScale.weight(0.5 * s, k)
        best = max(best, float(np.linalg.norm((w * B) / w, 2)))
    return best


def gap_s(a: RadialOperatorSpec | list, b: RadialOperatorSpec | list, s: float) -> float:
    """Gap between truncated Cauchy data spaces in ``H^s``: sup of per-mode line gaps."""
    ma = a if isinstance(a, list) else dtn_map(a)
    mb = b if isinstance(b, list) else dtn_map(b)
    if [m.k for m in ma] != [m.k for m in mb]:
        raise ValueError("mode sets differ")
    best = 0.0
    for x, y in zip(ma, mb):
        X = mode_space(x.k, s)
        best = max(best, gap_hat(Subspace.span(X, x.line), Subspace.span(X, y.line)))
    return best


def dirichlet_value(k: int, V: Sequence[complex], b: float, rtol: float = 1e-13) -> float:
    """``u_k(1; b)`` for the normalized regular solution; zero exactly at Dirichlet eigenvalues."""
    return float(np.real(radial_solution(k, V, b, rtol=rtol, atol=1e-14).u1))


def locate_pole(k: int, V: Sequence[complex], bracket: tuple[float, float], xtol: float = 1e-13) -> float:
    """Dirichlet eigenvalue of mode ``k`` inside ``bracket`` (sign change of ``u_k(1)``)."""
    lo, hi = bracket
    flo, fhi = dirichlet_value(k, V, lo), dirichlet_value(k, V, hi)
    if flo * fhi > 0:
        raise ValueError("bracket does not enclose a sign change of u(1)")
    return float(scipy.optimize.brentq(lambda b: dirichlet_value(k, V, b), lo, hi, xtol=xtol, rtol=4 * np.finfo(float).eps))


@dataclass
class CrossingReport:
    V: tuple
    K: int
    pole_mode: int
    b0: float
    s_list: tuple
    offsets: np.ndarray  # b - b0 as requested (exact)
    parameters: np.ndarray
    norms: np.ndarray  # (n_b, n_s)
    gaps: np.ndarray  # (n_b, n_s)
    pole_flags: np.ndarray  # pole flag of the pole mode at each b
    dtn_pole_mode: np.ndarray  # lambda_{k0}(b)
    pole_block_distance: np.ndarray  # ||C_{k0}(b) - proj onto (0,1)||
    tail_bounds: np.ndarray

    @property
    def s_spread(self) -> float:
        return float(np.max(np.ptp(self.norms, axis=1))) if self.norms.size else 0.0

    def rows(self):
        for i, b in enumerate(self.parameters):
            for j, s in enumerate(self.s_list):
                yield float(b), float(s), float(self.norms[i, j]), float(self.gaps[i, j]), int(self.pole_flags[i])


def eigenvalue_crossing_experiment(
    V: Sequence[float] = (0.0,),
    bracket: tuple[float, float] = (5.0, 6.5),
    pole_mode: int = 0,
    K: int = 20,
    s_list: Sequence[float] = (-1.0, 0.0, 1.0),
    offsets: Sequence[float] = (-0.1, -0.01, -0.001, 0.001, 0.01, 0.1),
    b0: float | None = None,
) -> CrossingReport:
    """Distance of ``C^ort_s(A - bI)`` from ``C^ort_s(A - b0 I)`` across a Dirichlet eigenvalue.

    ``b0`` is located by the pole detector inside ``bracket`` unless given.
    The grid is ``b0 + offsets``.
    """
    V = tuple(V)
    if b0 is None:
        b0 = locate_pole(pole_mode, V, bracket)
    offsets = np.asarray(offsets, dtype=float)
    if np.any(np.diff(offsets) <= 0):
        raise ValueError("offsets must be strictly increasing")
    bs = b0 + offsets
    base = RadialOperatorSpec(V, b0, K)
    m0 = dtn_map(base)
    ref = {s: calderon_blocks(base, s, m0) for s in s_list}
    target = np.array([[0, 0], [0, 1]], dtype=np.complex128)
    norms = np.zeros((bs.size, len(s_list)))
    gaps = np.zeros_like(norms)
    flags = np.zeros(bs.size, dtype=int)
    lam = np.zeros(bs.size)
    pole_dist = np.zeros(bs.size)
    tails = np.zeros(bs.size)
    for i, b in enumerate(bs):
        spec = base.shifted(b)
        mb = dtn_map(spec)
        idx = pole_mode + K
        flags[i] = int(mb[idx].pole)
        lam[i] = float(np.real(mb[idx].dtn))
        for j, s in enumerate(s_list):
            blk = calderon_blocks(spec, s, mb)
            norms[i, j] = operator_norm_s_blockdiag(blk - ref[s], s, spec.modes)
            gaps[i, j] = gap_s(mb, m0, s)
            if j == 0:
                pole_dist[i] = float(np.linalg.norm(blk.block(pole_mode) - target, 2))
                tails[i] = blk.tail_bound(ref[s])
    return CrossingReport(V, K, pole_mode, float(b0), tuple(float(s) for s in s_list), offsets, bs, norms, gaps, flags, lam, pole_dist, tails)
