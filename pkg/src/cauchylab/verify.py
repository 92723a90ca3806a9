"""Acceptance checks, shared by the ``verify`` command and the test-suite.

Each criterion returns a :class:`CriterionResult` holding every asserted
inequality with its two sides and slack. Timings exclude the one-off numba
compilation, which :func:`warm_up` triggers beforehand.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.linalg
import scipy.special

from . import disk2d, elliptic1d, scale, subspace
from .reporting import Assertion
from .subspace import InnerSpace, Projector, Subspace

ROUNDING_SLACK = scale.ROUNDING_SLACK


@dataclass
class CriterionResult:
    number: int
    title: str
    budget: float
    assertions: list = field(default_factory=list)
    seconds: float = 0.0
    details: dict = field(default_factory=dict)

    def check(self, name: str, lhs: float, rhs: float, relation: str = "<="):
        self.assertions.append(Assertion(name, float(lhs), float(rhs), relation))

    @property
    def within_budget(self) -> bool:
        return self.seconds < self.budget

    @property
    def passed(self) -> bool:
        return all(a.passed for a in self.assertions) and self.within_budget

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        worst = min((a.slack for a in self.assertions), default=0.0)
        return (
            f"[{status}] criterion {self.number:2d}: {self.title} "
            f"({len(self.assertions)} checks, min slack {worst:.3e}, {self.seconds:.2f}s / {self.budget:.0f}s)"
        )

    def to_dict(self) -> dict:
        return {
            "criterion": self.number,
            "title": self.title,
            "passed": self.passed,
            "seconds": self.seconds,
            "budget_seconds": self.budget,
            "assertions": [a.to_dict() for a in self.assertions],
            "details": self.details,
        }


def warm_up():
    """Trigger compilation (or load the on-disk cache) of the hot kernels."""
    elliptic1d.kernel_basis(elliptic1d.OperatorSpec1D.scalar([0.0], [0.0], [-1.0]))
    disk2d.radial_solution(1, (0.0,), 1.0)


def _random_gram(n: int, rng: np.random.Generator, cond: float = 10.0) -> np.ndarray:
    Q = np.linalg.qr(rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n)))[0]
    ev = np.exp(rng.uniform(0.0, np.log(cond), n))
    return (Q * ev) @ Q.conj().T


def _random_idempotent(n: int, rank: int, rng: np.random.Generator, cond: float = 10.0) -> np.ndarray:
    S = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    U, _, Vh = np.linalg.svd(S)
    S = (U * np.geomspace(1.0, 1.0 / cond, n)) @ Vh
    D = np.zeros(n)
    D[:rank] = 1.0
    return (S * D) @ np.linalg.inv(S)


def _projector_oracle(C: np.ndarray, gram: np.ndarray) -> np.ndarray:
    """Orthogonal projector onto ``image(C)`` via pivoted QR and normal equations."""
    n = C.shape[0]
    Q, R, _ = scipy.linalg.qr(C, pivoting=True)
    diag = np.abs(np.diag(R))
    r = int(np.sum(diag > 1e-8 * diag[0])) if diag.size and diag[0] > 0 else 0
    if r == 0:
        return np.zeros((n, n), dtype=complex)
    B = Q[:, :r]
    return B @ np.linalg.solve(B.conj().T @ gram @ B, B.conj().T @ gram)


def _timed(fn: Callable[[CriterionResult, np.random.Generator], None], number: int, title: str, budget: float, seed: int) -> CriterionResult:
    res = CriterionResult(number, title, budget)
    rng = np.random.default_rng([seed, number])
    t0 = time.perf_counter()
    fn(res, rng)
    res.seconds = time.perf_counter() - t0
    return res


def _c1(res: CriterionResult, rng):
    worst_id = worst_or = 0.0
    for trial in range(1000):
        n = int(rng.integers(2, 21))
        X = InnerSpace(_random_gram(n, rng)) if trial % 2 else InnerSpace.standard(n)
        C = Projector(X, _random_idempotent(n, int(rng.integers(0, n + 1)), rng))
        O = subspace.orthogonalize_projector(C)
        T, P = O.table, C.table
        worst_id = max(
            worst_id,
            X.operator_norm(T @ T - T),
            X.operator_norm(P @ T - T),
            X.operator_norm(T @ P - P),
            X.operator_norm(T - X.adjoint(T)),
        )
        worst_or = max(worst_or, float(np.max(np.abs(T - _projector_oracle(P, X.gram)))))
    res.check("max identity residual (C^ort)^2=C^ort, C C^ort=C^ort, C^ort C=C, self-adjoint", worst_id, 1e-9)
    res.check("max |C^ort - orthogonal projector oracle|", worst_or, 1e-8)


def _sampled_line_gap(u: np.ndarray, v: np.ndarray, n: int = 64) -> tuple[float, float]:
    """Sup and inf of dist(e^{i phi} u, span v) over sampled phases (unit u, v)."""
    vals = []
    for phi in np.linspace(0.0, 2 * np.pi, n, endpoint=False):
        x = np.exp(1j * phi) * u
        coef = np.linalg.lstsq(v[:, None], x, rcond=None)[0]
        vals.append(float(np.linalg.norm(x - v * coef[0])))
    return max(vals), min(vals)


def _c2(res: CriterionResult, rng):
    E = InnerSpace.standard(2)
    for k, theta in zip((12, 6, 4), (np.pi / 12, np.pi / 6, np.pi / 4)):
        u = np.array([1.0, 0.0])
        v = np.array([np.cos(theta), np.sin(theta)])
        M, N = Subspace.span(E, u), Subspace.span(E, v)
        sup_mn, inf_mn = _sampled_line_gap(u, v)
        sup_nm, _ = _sampled_line_gap(v, u)
        oracle_gap = max(sup_mn, sup_nm)
        oracle_gamma = inf_mn  # M ∩ N = {0}, so dist(u, M ∩ N) = 1
        g, gm = subspace.gap_hat(M, N), subspace.gamma(M, N)
        res.check(f"|gap_hat - sin(pi/{k})|", abs(g - np.sin(theta)), 1e-10)
        res.check(f"|gamma - sin(pi/{k})|", abs(gm - np.sin(theta)), 1e-10)
        res.check(f"|gap_hat - sampling oracle| (pi/{k})", abs(g - oracle_gap), 1e-10)
        res.check(f"|gamma - sampling oracle| (pi/{k})", abs(gm - oracle_gamma), 1e-10)


def _c3(res: CriterionResult, rng):
    violations = 0
    worst = np.inf
    for trial in range(1000):
        n = int(rng.integers(2, 13))
        X = InnerSpace(_random_gram(n, rng)) if trial % 2 else InnerSpace.standard(n)
        r = int(rng.integers(0, n + 1))
        P0 = _random_idempotent(n, r, rng)
        if trial % 4 < 2:
            # nearby member of a family: conjugate by I + eps E
            eps = 10.0 ** rng.uniform(-6, -1)
            S = np.eye(n) + eps * (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n)))
            Pb = S @ P0 @ np.linalg.inv(S)
        else:
            Pb = _random_idempotent(n, r, rng)
        Pb, P0p = Projector(X, Pb), Projector(X, P0)
        lhs = X.operator_norm(Pb.table - P0)
        rhs = subspace.projector_norm_estimate(Pb, P0p)
        if not lhs <= rhs * (1.0 + ROUNDING_SLACK):
            violations += 1
        if rhs > 0:
            worst = min(worst, rhs / lhs if lhs > 0 else np.inf)
    res.details["min rhs/lhs"] = float(worst)
    res.check("violations of ||P_b - P_b0|| <= estimate (1000 pairs)", violations, 0)


def _corpus(seed: int, size: int = 200):
    rng = np.random.default_rng([seed, 45])
    out = []
    for _ in range(size):
        d, m = int(rng.integers(1, 4)), int(rng.integers(1, 3))
        out.append(elliptic1d.random_elliptic_spec(rng, d, m))
    return out


def _c4(res: CriterionResult, rng, seed: int):
    worst_skew = worst_res = 0.0
    for A in _corpus(seed):
        J = elliptic1d.greens_matrix(A)
        for end in (0, 1):
            for k in range(A.d):
                diff = J.block(end, k, A.d - 1 - k) - elliptic1d.skew_diagonal_formula(A, end, k)
                worst_skew = max(worst_skew, float(np.max(np.abs(diff))))
        for _ in range(3):
            deg = int(rng.integers(0, 6))
            u = elliptic1d.poly_section(rng.standard_normal((deg + 1, A.m)) + 1j * rng.standard_normal((deg + 1, A.m)))
            v = elliptic1d.poly_section(rng.standard_normal((deg + 1, A.m)) + 1j * rng.standard_normal((deg + 1, A.m)))
            worst_res = max(worst_res, elliptic1d.greens_identity_residual(A, u, v))
    res.check("max |J skew-diagonal - i^d (-1)^(d-1-k) sigma_d(A)(nu)| (200 specs, both ends)", worst_skew, 1e-10)
    res.check("max Green identity residual (600 polynomial pairs)", worst_res, 1e-9)


def _c5(res: CriterionResult, rng, seed: int):
    worst_orth = worst_gap = 0.0
    dim_fail = 0
    for A in _corpus(seed):
        r = elliptic1d.orthogonal_decomposition_check(A)
        worst_orth = max(worst_orth, r.orthogonality)
        worst_gap = max(worst_gap, r.kernel_gap)
        if not (r.dim_cauchy == r.dim_dual == A.d * A.m and r.dim_cauchy + r.dim_dual == r.total_dim):
            dim_fail += 1
    res.check("max |cos| between Lambda(A) and J^t Lambda(A^t)", worst_orth, 1e-9)
    res.check("specs with dim Lambda(A) + dim J^t Lambda(A^t) != 2dm", dim_fail, 0)
    res.check("max gap(ker C^ort(A), J^t Lambda(A^t))", worst_gap, 1e-8)


Q_CUBIC = (1.0, 1.0, -2.0, 3.0)


def laplace_family(b: float) -> elliptic1d.OperatorSpec1D:
    """``-d^2/dx^2 + b q(x)`` with ``q(x) = 1 + x - 2x^2 + 3x^3``."""
    return elliptic1d.OperatorSpec1D.scalar([b * c for c in Q_CUBIC], [0.0], [-1.0])


def _c6(res: CriterionResult, rng):
    b0 = 0.5
    steps = (1e-1, 1e-2, 1e-3)
    grid = sorted([b0 - h for h in steps] + [b0 + h for h in steps])
    rep = elliptic1d.family_sweep_1d(laplace_family, b0, grid)
    dist = {h: max(rep.projector_distance[i] for i, b in enumerate(grid) if abs(abs(b - b0) - h) < 1e-12) for h in steps}
    res.details["distance per step"] = {f"{h:g}": float(dist[h]) for h in steps}
    res.details["lipschitz"] = rep.lipschitz
    for h_big, h_small in zip(steps, steps[1:]):
        res.check(f"reduction factor step {h_big:g} -> {h_small:g}", dist[h_big] / dist[h_small], 5.0, ">=")
    res.check("||C^ort(A_b) - C^ort(A_b0)|| at step 1e-3", dist[1e-3], 1e-2)
    res.check("projector estimate violations along the sweep", 0 if rep.estimate_holds else 1, 0)


def _c7(res: CriterionResult, rng):
    models = disk2d.dtn_map(disk2d.RadialOperatorSpec((0.0,), 0.0, 50))
    worst = max(abs(mm.dtn - abs(mm.k)) for mm in models)
    res.check("max_k |lambda_k(V=0,b=0) - |k||, |k| <= 50", worst, 1e-9)
    sol = disk2d.radial_solution(0, (0.0,), 4.0)
    oracle = -2.0 * scipy.special.j1(2.0) / scipy.special.j0(2.0)
    res.details["lambda_0(b=4)"] = float(sol.du1 / sol.u1)
    res.check("|lambda_0(V=0,b=4) + 2 J1(2)/J0(2)|", abs(sol.du1 / sol.u1 - oracle), 1e-8)


def bessel_zero_oracle(order: int = 0, lo: float = 2.0, hi: float = 3.0) -> float:
    """Bisection on ``J_order`` (special-function oracle)."""
    flo = scipy.special.jv(order, lo)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        fm = scipy.special.jv(order, mid)
        if np.sign(fm) == np.sign(flo):
            lo, flo = mid, fm
        else:
            hi = mid
        if hi - lo <= 4e-16 * hi:
            break
    return 0.5 * (lo + hi)


CROSSING_OFFSETS = (-0.1, -0.03, -0.01, -0.003, -0.001, -1e-4, 1e-4, 0.001, 0.003, 0.01, 0.03, 0.1)


def _c8(res: CriterionResult, rng):
    oracle = bessel_zero_oracle() ** 2
    located = disk2d.locate_pole(0, (0.0,), (oracle - 0.5, oracle + 0.5))
    res.check("|pole detector b0 - j_{0,1}^2|", abs(located - oracle), 1e-10)
    rep = disk2d.eigenvalue_crossing_experiment((0.0,), pole_mode=0, K=20, offsets=CROSSING_OFFSETS, b0=oracle)
    off = np.abs(rep.offsets)
    ratio = np.max(rep.norms / off[:, None])
    res.details["max norm/|b-b0|"] = float(ratio)
    res.check("max_s,b ||C^ort(b) - C^ort(b0)||_{s,s} / |b-b0| (|b-b0| <= 0.1)", ratio, 10.0)
    near = off <= 1e-3 * (1 + 1e-12)
    res.check("min |lambda_0(b)| for |b-b0| <= 1e-3", float(np.min(np.abs(rep.dtn_pole_mode[near]))), 1e3, ">=")
    res.check("s-spread of the norm over s in {-1,0,1}", rep.s_spread, 1e-12)
    res.check("max truncation tail bound / reported norm", float(np.max(rep.tail_bounds / rep.norms[:, 0])), 1.0)


def _c9(res: CriterionResult, rng):
    dual_worst = 0.0
    violations = 0
    t_values = (0.5, 1.0, 2.7)
    for i in range(1000):
        sc = scale.FourierScale(int(rng.integers(1, 17)), int(rng.integers(1, 3)))
        T = scale.random_hermitian(sc, rng, decay=0.0 if i % 2 else 4.0)
        a, b = scale.duality_check(T, t_values[i % 3])
        dual_worst = max(dual_worst, abs(a - b))
        for _ in range(5):
            s0, s, s1 = np.sort(rng.uniform(-3.0, 3.0, 3))
            lhs, rhs = scale.interpolation_check(T, s0, s, s1)
            if not scale.within(lhs, rhs):
                violations += 1
    res.check("max | ||T||_{-t} - ||T||_t | (1000 Hermitian operators)", dual_worst, 1e-10)
    res.check("interpolation violations (5000 triples, constant 1)", violations, 0)


TITLES = {
    1: ("orthogonalized projector identities", 5.0),
    2: ("gap and angular distance of two lines", 1.0),
    3: ("projector difference estimate", 5.0),
    4: ("Green form skew-diagonal and Green identity", 30.0),
    5: ("L2-orthogonal boundary decomposition", 30.0),
    6: ("1D continuity of C^ort under refinement", 20.0),
    7: ("disk DtN values", 10.0),
    8: ("continuity through a Dirichlet eigenvalue", 20.0),
    9: ("scale duality and interpolation", 10.0),
}

TOTAL_BUDGET = 120.0


def run_criterion(number: int, seed: int = 1) -> CriterionResult:
    title, budget = TITLES[number]
    fns = {1: _c1, 2: _c2, 3: _c3, 6: _c6, 7: _c7, 8: _c8, 9: _c9}
    if number in fns:
        return _timed(fns[number], number, title, budget, seed)
    corpus_fn = {4: _c4, 5: _c5}[number]
    return _timed(lambda r, g: corpus_fn(r, g, seed), number, title, budget, seed)


def run_all(seed: int = 1, criteria=tuple(TITLES)) -> tuple[list[CriterionResult], float]:
    t0 = time.perf_counter()
    warm_up()
    results = [run_criterion(n, seed) for n in criteria]
    return results, time.perf_counter() - t0
