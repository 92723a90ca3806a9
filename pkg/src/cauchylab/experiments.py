"""Experiment orchestration: one runner per config kind.

Every runner returns a :class:`Report`. :func:`write_report` serializes it as
CSV tables, a JSON summary and optional SVG plots. CSV content depends only on
``(config, seed)``; wall-clock timings go to the JSON summary alone.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _backend, disk2d, elliptic1d, kernels, scale, subspace, verify
from .reporting import Assertion, ExperimentConfig, Table, log, plot_lines, write_csv, write_json
from .subspace import InnerSpace, Projector, Subspace


@dataclass
class Plot:
    name: str
    table: str
    x: str
    y: str
    group: str | None = None
    xlabel: str = ""
    ylabel: str = ""


@dataclass
class Report:
    config: ExperimentConfig
    tables: list = field(default_factory=list)
    assertions: list = field(default_factory=list)
    plots: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    seconds: float = 0.0

    def check(self, name: str, lhs: float, rhs: float, relation: str = "<="):
        self.assertions.append(Assertion(name, float(lhs), float(rhs), relation))

    @property
    def passed(self) -> bool:
        return all(a.passed for a in self.assertions) and self.summary.get("within_budget", True)

    def table(self, name: str) -> Table:
        for t in self.tables:
            if t.name == name:
                return t
        raise KeyError(name)


def _rng(config: ExperimentConfig) -> np.random.Generator:
    return np.random.default_rng(config.seed)


def run_subspace_random(config: ExperimentConfig) -> Report:
    p = config.params
    if not 1 <= p["dim_min"] <= p["dim_max"]:
        raise ValueError("need 1 <= dim_min <= dim_max")
    rep = Report(config)
    rng = _rng(config)
    tab = Table(
        "projectors",
        ("trial", "dim", "rank", "gram", "identity_residual", "oracle_error", "norm_distance", "estimate", "gap"),
    )
    worst_id = worst_or = 0.0
    violations = gap_violations = 0
    for trial in range(p["trials"]):
        n = int(rng.integers(p["dim_min"], p["dim_max"] + 1))
        gram = trial % 2 == 1
        X = InnerSpace(verify._random_gram(n, rng)) if gram else InnerSpace.standard(n)
        r = int(rng.integers(0, n + 1))
        P0 = verify._random_idempotent(n, r, rng)
        eps = 10.0 ** rng.uniform(-6, -1)
        S = np.eye(n) + eps * (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n)))
        C0, Cb = Projector(X, P0), Projector(X, S @ P0 @ np.linalg.inv(S))
        O = subspace.orthogonalize_projector(C0)
        T = O.table
        ident = max(
            X.operator_norm(T @ T - T),
            X.operator_norm(P0 @ T - T),
            X.operator_norm(T @ P0 - P0),
            X.operator_norm(T - X.adjoint(T)),
        )
        orc = float(np.max(np.abs(T - verify._projector_oracle(P0, X.gram))))
        dist = X.operator_norm(Cb.table - P0)
        est = subspace.projector_norm_estimate(Cb, C0)
        Ob = subspace.orthogonalize_projector(Cb)
        gap, odist = subspace.gap_hat(Ob.image(), O.image()), subspace.operator_distance(Ob, O)
        worst_id, worst_or = max(worst_id, ident), max(worst_or, orc)
        violations += not dist <= est * (1.0 + scale.ROUNDING_SLACK)
        gap_violations += not gap <= odist + 1e-9
        tab.add(trial, n, r, int(gram), ident, orc, dist, est, gap)
    rep.tables.append(tab)
    rep.check("max C^ort identity residual", worst_id, 1e-9)
    rep.check("max |C^ort - projector oracle|", worst_or, 1e-8)
    rep.check("projector estimate violations", violations, 0)
    rep.check("gap_hat(image) > ||P^ort_b - P^ort_0|| violations", gap_violations, 0)

    # a continuous family with a common direction: intersection dimension stays 1
    n = max(p["dim_max"], 4)
    X = InnerSpace(verify._random_gram(n, rng))
    common = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    YM = np.column_stack([common, rng.standard_normal(n)])
    YN = np.column_stack([common, rng.standard_normal(n)])
    E = rng.standard_normal((n, n))

    def family(b):
        S = np.eye(n) + b * E
        return Subspace.span(X, S @ YM), Subspace.span(X, S @ YN)

    grid = sorted({-float(h) for h in p["family_grid"]} | {float(h) for h in p["family_grid"]})
    fam = subspace.family_continuity_experiment(family, 0.0, grid)
    ftab = Table("family", ("b", "offset", "intersection_dim", "gap_intersection", "gap_sum"))
    for row in fam.rows():
        ftab.add(*row)
    rep.tables.append(ftab)
    rep.check("intersection dimension jumps", int(not fam.constant_dimension), 0)
    rep.check("intersection gap not monotone to zero", int(not fam.intersection_converges), 0)
    rep.check("sum gap not monotone to zero", int(not fam.sum_converges), 0)
    rep.plots.append(Plot("family_gap_intersection", "family", "b", "gap_intersection", None, "b", "gap(M_b ∩ N_b, M_0 ∩ N_0)"))
    rep.plots.append(Plot("family_gap_sum", "family", "b", "gap_sum", None, "b", "gap(M_b + N_b, M_0 + N_0)"))
    return rep


def run_scale_random(config: ExperimentConfig) -> Report:
    p = config.params
    if p["K_max"] < 0 or p["fiber_max"] < 1:
        raise ValueError("need K_max >= 0 and fiber_max >= 1")
    if any(t < 0 for t in p["t_list"]) or not p["t_list"]:
        raise ValueError("t_list must be a non-empty list of non-negative values")
    rep = Report(config)
    rng = _rng(config)
    dtab = Table("duality", ("operator", "K", "fiber", "decay", "t", "norm_minus_t", "norm_t", "abs_difference"))
    itab = Table("interpolation", ("operator", "s0", "s", "s1", "lhs", "rhs"))
    worst = 0.0
    violations = 0
    for i in range(p["operators"]):
        sc = scale.FourierScale(int(rng.integers(0, p["K_max"] + 1)), int(rng.integers(1, p["fiber_max"] + 1)))
        decay = 0.0 if i % 2 else 4.0
        T = scale.random_hermitian(sc, rng, decay=decay)
        t = float(p["t_list"][i % len(p["t_list"])])
        a, b = scale.duality_check(T, t)
        worst = max(worst, abs(a - b))
        dtab.add(i, sc.K, sc.fiber, decay, t, a, b, abs(a - b))
        for _ in range(p["triples"]):
            s0, s, s1 = np.sort(rng.uniform(-3.0, 3.0, 3))
            lhs, rhs = scale.interpolation_check(T, float(s0), float(s), float(s1))
            violations += not scale.within(lhs, rhs)
            itab.add(i, float(s0), float(s), float(s1), lhs, rhs)
    rep.tables += [dtab, itab]
    rep.check("max | ||T||_{-t} - ||T||_t |", worst, 1e-10)
    rep.check("interpolation violations (constant 1)", violations, 0)

    sc = scale.FourierScale(min(p["K_max"], 8), 1)
    T0 = scale.random_hermitian(sc, rng, decay=2.0)
    H = scale.random_hermitian(sc, rng, decay=2.0)

    def family(b):
        return scale.ScaleOperator(sc, T0.table + b * H.table, True)

    grid = sorted({-float(h) for h in p["transfer_grid"]} | {float(h) for h in p["transfer_grid"]})
    tr = scale.continuity_transfer_experiment(family, 0.0, grid, float(p["transfer_t"]))
    ttab = Table("transfer", ("b", "s", "norm_distance", "interpolation_bound"))
    for row in tr.rows():
        ttab.add(*row)
    rep.tables.append(ttab)
    rep.check("transfer columns above interpolation bound", int(not tr.bounded), 0)
    rep.check("max transfer duality gap", float(np.max(tr.duality_gap)), 1e-10)
    rep.plots.append(Plot("transfer_norm", "transfer", "b", "norm_distance", "s", "b", "||T_b - T_0||_s"))
    return rep


def sweep_family(params: dict):
    """``b -> A + b Q`` from the ``coeffs`` and ``q`` config tables."""
    base = elliptic1d.OperatorSpec1D.from_dict({"d": params["d"], "m": params["m"], "coeffs": params["coeffs"]})
    m = base.m
    q = params["q"]
    if len(q) > base.d + 1:
        raise ValueError(f"q has {len(q)} coefficients but the operator has order {base.d}")
    pert = []
    for j, poly in enumerate(q):
        arr = np.asarray(poly, dtype=float)
        if arr.ndim != 4 or arr.shape[1:] != (m, m, 2):
            raise ValueError(f"q[{j}] must have shape (terms, {m}, {m}, 2) of [re, im] pairs")
        pert.append(elliptic1d.CoefficientFunction(arr[..., 0] + 1j * arr[..., 1]))

    def family(b: float) -> elliptic1d.OperatorSpec1D:
        cs = list(base.coeffs)
        for j, c in enumerate(pert):
            cs[j] = cs[j] + c.scaled(b)
        return elliptic1d.OperatorSpec1D(base.d, m, tuple(cs))

    return family


def run_sweep_1d(config: ExperimentConfig) -> Report:
    p = config.params
    steps = sorted((float(h) for h in p["steps"]), reverse=True)
    if not steps or steps[-1] <= 0:
        raise ValueError("steps must be a non-empty list of positive values")
    rep = Report(config)
    family = sweep_family(p)
    b0 = float(p["b0"])
    grid = sorted({b0 - h for h in steps} | {b0 + h for h in steps})
    sw = elliptic1d.family_sweep_1d(family, b0, grid, final_tol=p["final_tol"])
    tab = Table("sweep", ("b", "offset", "coefficient_distance", "gap", "norm_distance", "estimate"))
    for row, off in zip(sw.rows(), np.asarray(grid) - b0):
        b, coef, gap, dist, est = row
        tab.add(b, float(off), coef, gap, dist, est)
    rep.tables.append(tab)
    per_step = {}
    for h in steps:
        sel = np.isclose(np.abs(sw.parameters - b0), h, rtol=1e-9, atol=0.0)
        per_step[h] = float(np.max(sw.projector_distance[sel]))
    for big, small in zip(steps, steps[1:]):
        rep.check(f"reduction factor step {big:g} -> {small:g}", per_step[big] / per_step[small], p["refinement_factor"], ">=")
    rep.check(f"||C^ort(A_b) - C^ort(A_b0)|| at step {steps[-1]:g}", per_step[steps[-1]], p["final_tol"])
    rep.check("norm and gap columns not monotone to zero", int(not sw.converges), 0)
    rep.check("projector estimate violations", int(not sw.estimate_holds), 0)
    rep.summary["lipschitz"] = sw.lipschitz
    rep.plots.append(Plot("sweep_norm_distance", "sweep", "b", "norm_distance", None, "b", "||C^ort(A_b) - C^ort(A_b0)||"))
    rep.plots.append(Plot("sweep_gap", "sweep", "b", "gap", None, "b", "gap(Λ(A_b), Λ(A_b0))"))
    return rep


def run_disk_crossing(config: ExperimentConfig) -> Report:
    p = config.params
    if p["K"] < abs(p["pole_mode"]):
        raise ValueError("K must be at least |pole_mode|")
    rep = Report(config)
    hw = float(p["bracket_halfwidth"])
    b = float(p["b"])
    b0 = None if hw > 0 else b
    cr = disk2d.eigenvalue_crossing_experiment(
        V=p["V"],
        bracket=(b - hw, b + hw),
        pole_mode=p["pole_mode"],
        K=p["K"],
        s_list=p["s_list"],
        offsets=sorted(float(g) for g in p["grid"]),
        b0=b0,
    )
    tab = Table("crossing", ("b", "s", "norm_distance", "gap", "pole_mode_flag"))
    for row in cr.rows():
        tab.add(*row)
    rep.tables.append(tab)
    off = np.abs(cr.offsets)
    nz = off > 0
    ratio = float(np.max(cr.norms[nz] / off[nz, None])) if np.any(nz) else 0.0
    rep.summary.update(b0=cr.b0, max_norm_over_offset=ratio, min_abs_dtn_pole_mode=float(np.min(np.abs(cr.dtn_pole_mode))))
    rep.check("max ||C^ort(b) - C^ort(b0)||_{s,s} / |b - b0|", ratio, p["lipschitz_budget"])
    rep.check("s-spread of the norm", cr.s_spread, 1e-12)
    rep.check("max truncation tail bound / reported norm", float(np.max(cr.tail_bounds[nz] / cr.norms[nz, 0])) if np.any(nz) else 0.0, 1.0)
    rep.plots.append(Plot("crossing_norm_distance", "crossing", "b", "norm_distance", "s", "b", "||C^ort(b) - C^ort(b0)||_{s,s}"))
    rep.plots.append(Plot("crossing_gap", "crossing", "b", "gap", "s", "b", "gap_s"))
    return rep


def run_verify_all(config: ExperimentConfig) -> Report:
    crit = config.params["criteria"]
    bad = [c for c in crit if c not in verify.TITLES]
    if bad:
        raise ValueError(f"unknown criteria {bad}; known: {sorted(verify.TITLES)}")
    rep = Report(config)
    results, total = verify.run_all(config.seed, tuple(crit))
    tab = Table("criteria", ("criterion", "check", "lhs", "relation", "rhs", "slack", "passed"))
    for r in results:
        for a in r.assertions:
            tab.add(r.number, a.name, a.lhs, a.relation, a.rhs, a.slack, a.passed)
            rep.assertions.append(Assertion(f"criterion {r.number}: {a.name}", a.lhs, a.rhs, a.relation))
    rep.tables.append(tab)
    rep.summary["criteria"] = [r.to_dict() for r in results]
    rep.summary["lines"] = [r.line() for r in results]
    rep.summary["total_seconds"] = total
    rep.summary["total_budget_seconds"] = verify.TOTAL_BUDGET
    rep.summary["within_budget"] = bool(all(r.within_budget for r in results) and total < verify.TOTAL_BUDGET)
    return rep


RUNNERS = {
    "subspace-random": run_subspace_random,
    "scale-random": run_scale_random,
    "sweep-1d": run_sweep_1d,
    "disk-crossing": run_disk_crossing,
    "verify-all": run_verify_all,
}


def run(config: ExperimentConfig) -> Report:
    t0 = time.perf_counter()
    rep = RUNNERS[config.kind](config)
    rep.seconds = time.perf_counter() - t0
    return rep


def _plot(rep: Report, spec: Plot, out: Path, log_scale: bool) -> Path | None:
    tab = rep.table(spec.table)
    xs, ys = tab.column(spec.x), tab.column(spec.y)
    if spec.group is None:
        series = [(spec.y, xs, ys)]
    else:
        gs = tab.column(spec.group)
        series = []
        for g in dict.fromkeys(gs):
            sel = [i for i, v in enumerate(gs) if v == g]
            series.append((f"{spec.group}={g:g}", [xs[i] for i in sel], [ys[i] for i in sel]))
    title = f"{rep.config.kind}: {spec.y} (seed {rep.config.seed})"
    return plot_lines(out / f"{spec.name}.svg", series, spec.xlabel or spec.x, spec.ylabel or spec.y, title, log_scale, rep.config.seed)


def _max_residuals(rep: Report) -> dict:
    out = {}
    for a in rep.assertions:
        if a.relation == "<=":
            out[a.name] = a.lhs
    return out


def write_report(rep: Report, out: Path, plots: bool = True, log_scale: bool = False) -> list[Path]:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    header = {"kind": rep.config.kind, "seed": rep.config.seed}
    files = []
    for tab in rep.tables:
        files.append(write_csv(tab, out / f"{tab.name}.csv", header | {"table": tab.name}))
    if plots:
        for spec in rep.plots:
            path = _plot(rep, spec, out, log_scale)
            if path is not None:
                files.append(path)
    summary = {
        "kind": rep.config.kind,
        "seed": rep.config.seed,
        "config": rep.config.to_dict(),
        "backend": kernels.BACKEND,
        "threads": _backend.thread_count(),
        "passed": rep.passed,
        "seconds": rep.seconds,
        "assertions": [a.to_dict() for a in rep.assertions],
        "max_residuals": _max_residuals(rep),
        "tables": [t.name for t in rep.tables],
        **rep.summary,
    }
    files.append(write_json(summary, out / "summary.json"))
    log.info("wrote %d files to %s", len(files), out)
    return files
