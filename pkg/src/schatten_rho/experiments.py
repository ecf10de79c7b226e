"""Experiment runners that assemble the library into self-checking tables.

Every runner returns an :class:`ExperimentTable`.  Rows recompute their
closed-form columns independently and record any mismatch in
``table.failures``; an empty list means every invariant held.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from .distances import (
    _num,
    bogachev_diagnostics,
    conjugate,
    interpolation_check,
    rho_infty_witness,
    rho_lower_bound,
    schatten_bound,
)
from .gaussian import (
    GaussianMeasure,
    counterexample_measure,
    exp_neg_sqnorm,
    second_moment,
    sq_dist_samples,
)
from .operators import SymOperator, schatten_norm
from .radial import (
    CONSTANT,
    GAUSS_BUMP,
    RadialFunction,
    RadialProfile,
    growth_exponent,
    normalized,
    schatten_growth_profile,
)
from .rng import derive_seed

EXPERIMENTS = ("counterexample", "radial-growth", "bounds", "rho-lower", "interp-check")

CLOSED_FORM_TOL = 1e-12
MC_SIGMAS = 4.0


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    experiment: str
    p: float = 2.0
    ns: list[int] | None = None
    dims: list[int] | None = None
    mc_samples: int = 100_000
    seed: int = 0
    output: str | None = None
    format: str = "csv"
    dim_pad: int = 0
    workers: int = 1
    profile: str = GAUSS_BUMP
    amplitude: float = 1.0
    sigma: float = 1.0
    offset: float = 0.0
    budget: int = 200
    method: str = "exact"

    def validate(self) -> "ExperimentConfig":
        errors = []
        if self.experiment not in EXPERIMENTS:
            errors.append(f"experiment: unknown experiment {self.experiment!r}")
        if not (math.isinf(self.p) or self.p >= 1):
            errors.append(f"p: must lie in [1, inf], got {self.p}")
        for name in ("ns", "dims"):
            values = getattr(self, name)
            if values is None:
                continue
            if not values:
                errors.append(f"{name}: must be nonempty")
            elif any(int(v) != v or v < 1 for v in values):
                errors.append(f"{name}: entries must be positive integers")
            elif any(b <= a for a, b in zip(values, values[1:])):
                errors.append(f"{name}: must be strictly increasing")
        if self.mc_samples < 1000:
            errors.append(f"samples: must be at least 1000, got {self.mc_samples}")
        if self.format not in ("csv", "json"):
            errors.append(f"format: must be csv or json, got {self.format!r}")
        if self.dim_pad < 0:
            errors.append("dim_pad: must be nonnegative")
        if self.workers < 1:
            errors.append("workers: must be at least 1")
        if self.profile not in (CONSTANT, GAUSS_BUMP):
            errors.append(f"profile: must be constant or gauss_bump, got {self.profile!r}")
        if not self.sigma > 0:
            errors.append("sigma: must be positive")
        if self.budget < 1:
            errors.append("budget: must be at least 1")
        if self.method not in ("exact", "mc"):
            errors.append(f"method: must be exact or mc, got {self.method!r}")
        if self.experiment == "radial-growth" and self.dims is not None and len(self.dims) < 3:
            errors.append("dims: radial-growth needs at least 3 dimensions")
        if errors:
            raise ConfigError("\n".join(errors))
        return self


@dataclass
class ExperimentTable:
    experiment: str
    columns: list[str]
    rows: list[dict[str, Any]] = field(default_factory=list)
    meta: dict[str, Any] = field(default_factory=dict)
    failures: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures

    def column(self, name: str) -> list:
        return [row[name] for row in self.rows]

    def to_json(self) -> str:
        obj = {
            "experiment": self.experiment,
            "meta": {k: _jsonable(v) for k, v in self.meta.items()},
            "columns": self.columns,
            "rows": [{c: _jsonable(row[c]) for c in self.columns} for row in self.rows],
            "failures": self.failures,
        }
        return json.dumps(obj, indent=2) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.columns)
        for row in self.rows:
            writer.writerow([_csv_cell(row[c]) for c in self.columns])
        return buf.getvalue()

    def render(self, fmt: str) -> str:
        return self.to_json() if fmt == "json" else self.to_csv()


def _jsonable(v):
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return "nan" if math.isnan(v) else _num(v)
    return v


def _csv_cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        # repr round-trips IEEE-754 doubles exactly
        return repr(float(v))
    return str(v)


def _map_rows(fn: Callable, items, workers: int) -> list:
    if workers > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def _close(name: str, got: float, want: float, failures: list, label: str, tol: float = CLOSED_FORM_TOL):
    if not abs(got - want) <= tol:
        failures.append(f"{label}: {name} = {got!r}, expected {want!r} (tol {tol:g})")


def _collect(table: ExperimentTable, results) -> ExperimentTable:
    for row, fails in results:
        table.rows.append(row)
        table.failures.extend(fails)
    return table


# -- counterexample sweep --------------------------------------------------------


def expected_schatten_q(n: int, q: float) -> float:
    """``|S_n|_q`` for the counterexample covariance: ``n^(1/q - 1)``, or ``1/n`` at ``q = inf``."""
    if math.isinf(q):
        return 1.0 / n
    return n ** (1.0 / q - 1.0)


def expected_exp_witness(n: int) -> float:
    return (1.0 + 2.0 / n) ** (-n / 2.0)


def run_counterexample(cfg: ExperimentConfig) -> ExperimentTable:
    ns = cfg.ns or [1, 10, 100, 1000, 10000]
    pair = conjugate(cfg.p)
    q = pair.q
    columns = [
        "n", "d", "q", "schatten_q_norm", "rho_p_upper", "sqrt_hs_gap", "op_gap",
        "second_moment", "exp_witness_exact", "exp_witness_mc", "mc_stderr",
    ]  # fmt: skip
    table = ExperimentTable("counterexample", columns)
    vanishing = q > 1.0
    table.meta = {
        "p": pair.p,
        "q": q,
        "mc_samples": cfg.mc_samples,
        "seed": cfg.seed,
        "dim_pad": cfg.dim_pad,
        "bound_vanishes": vanishing,
        "note": (
            "upper bound 1/2 |S_n|_q -> 0 while sqrt_hs_gap stays 1"
            if vanishing
            else "q = 1: |S_n|_1 = 1 for every n, the upper bound does not vanish"
        ),
    }

    def row(n: int):
        d = n + cfg.dim_pad
        label = f"n={n}"
        G = counterexample_measure(n, d)
        Z = GaussianMeasure.point_mass(d)
        norm_q = schatten_norm(G.covariance, q)
        upper = schatten_bound(G, Z, cfg.p)
        diag = bogachev_diagnostics(G, Z)
        exact = exp_neg_sqnorm(G)
        sq = sq_dist_samples(G, cfg.mc_samples, derive_seed(cfg.seed, n), workers=cfg.workers)
        vals = np.exp(-sq)
        mc, se = float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(vals.size))

        fails: list[str] = []
        want_norm = 1.0 if q == 1.0 else expected_schatten_q(n, q)
        _close("schatten_q_norm", norm_q, want_norm, fails, label)
        _close("rho_p_upper", upper, 0.5 * want_norm, fails, label)
        _close("sqrt_hs_gap", diag.sqrt_hs_gap, 1.0, fails, label)
        _close("op_gap", diag.op_gap, 1.0 / n, fails, label)
        _close("second_moment", second_moment(G), 1.0, fails, label)
        _close("exp_witness_exact", exact, expected_exp_witness(n), fails, label)
        if abs(mc - exact) > MC_SIGMAS * se:
            fails.append(f"{label}: exp_witness_mc {mc!r} is more than {MC_SIGMAS} sigma from {exact!r}")
        return {
            "n": n, "d": d, "q": q, "schatten_q_norm": norm_q, "rho_p_upper": upper,
            "sqrt_hs_gap": diag.sqrt_hs_gap, "op_gap": diag.op_gap, "second_moment": second_moment(G),
            "exp_witness_exact": exact, "exp_witness_mc": mc, "mc_stderr": se,
        }, fails  # fmt: skip

    return _collect(table, _map_rows(row, ns, cfg.workers))


# -- radial growth ---------------------------------------------------------------


def run_radial_growth(cfg: ExperimentConfig) -> ExperimentTable:
    dims = cfg.dims or [2**k for k in range(4, 13)]
    prof = RadialProfile(cfg.profile, cfg.amplitude, cfg.sigma)
    f = RadialFunction(np.zeros(1), prof)
    rows = schatten_growth_profile(f, [cfg.offset], cfg.p, dims)
    table = ExperimentTable("radial-growth", ["d", "hessian_schatten_norm"])
    table.rows = [{"d": d, "hessian_schatten_norm": v} for d, v in rows]
    slope = growth_exponent(rows)
    target = 0.0 if math.isinf(cfg.p) else 1.0 / cfg.p
    table.meta = {
        "p": cfg.p,
        "profile": prof.to_json(),
        "offset": cfg.offset,
        "slope": slope,
        "expected_slope": target,
    }
    norms = [v for _, v in rows]
    if prof.is_constant:
        if any(v != 0.0 for v in norms):
            table.failures.append("constant profile produced a nonzero Hessian norm")
    elif math.isinf(cfg.p):
        if abs(slope) > 0.01:
            table.failures.append(f"p=inf slope {slope!r} is not within 0.01 of 0")
        if max(norms) - min(norms) > 1e-10 * max(1.0, max(norms)):
            table.failures.append("p=inf Hessian norm is not constant in d")
    else:
        if abs(slope - target) > 0.05:
            table.failures.append(f"slope {slope!r} is not within 0.05 of 1/p = {target!r}")
        if any(b <= a for a, b in zip(norms, norms[1:])):
            table.failures.append("Hessian norm is not strictly increasing in d")
    return table


# -- bounds and diagnostics -----------------------------------------------------


def run_bounds(cfg: ExperimentConfig) -> ExperimentTable:
    ns = cfg.ns or [1, 10, 100, 1000]
    q = conjugate(cfg.p).q
    columns = ["pair", "n", "d", "q", "upper_bound", "sqrt_hs_gap", "op_gap", "second_moment_gap"]
    table = ExperimentTable("bounds", columns, meta={"p": cfg.p, "q": q, "dim_pad": cfg.dim_pad})

    def row(n: int):
        d = n + cfg.dim_pad
        G = counterexample_measure(n, d)
        Z = GaussianMeasure.point_mass(d)
        out, fails = [], []
        for name, (A, B) in (("counterexample_vs_zero", (G, Z)), ("identical", (G, G))):
            upper = schatten_bound(A, B, cfg.p)
            diag = bogachev_diagnostics(A, B)
            out.append({
                "pair": name, "n": n, "d": d, "q": q, "upper_bound": upper,
                "sqrt_hs_gap": diag.sqrt_hs_gap, "op_gap": diag.op_gap,
                "second_moment_gap": diag.second_moment_gap,
            })  # fmt: skip
        label = f"n={n}"
        want = 1.0 if q == 1.0 else expected_schatten_q(n, q)
        _close("upper_bound", out[0]["upper_bound"], 0.5 * want, fails, label)
        _close("sqrt_hs_gap", out[0]["sqrt_hs_gap"], 1.0, fails, label)
        _close("op_gap", out[0]["op_gap"], 1.0 / n, fails, label)
        _close("second_moment_gap", out[0]["second_moment_gap"], 1.0, fails, label)
        for key in ("upper_bound", "sqrt_hs_gap", "op_gap", "second_moment_gap"):
            if out[1][key] != 0.0:
                fails.append(f"{label}: identical pair has nonzero {key}")
        return out, fails

    for rows, fails in _map_rows(row, ns, cfg.workers):
        table.rows.extend(rows)
        table.failures.extend(fails)
    return table


def infty_witness_function(dim: int, sigma: float = 1.0) -> RadialFunction:
    """Gaussian bump at the origin normalized to the unit ball of ``F_inf``."""
    return normalized(RadialFunction(np.zeros(dim), RadialProfile(GAUSS_BUMP, 1.0, sigma)), math.inf)


def run_rho_lower(cfg: ExperimentConfig) -> ExperimentTable:
    ns = cfg.ns or [4, 64, 1024]
    q = conjugate(cfg.p).q
    columns = [
        "n", "d", "upper_bound", "lower_value", "lower_stderr", "lower_certified",
        "witness_sigma", "witness_amplitude", "constraint_value", "envelope_ok",
        "infty_witness_gap", "infty_witness_stderr",
    ]  # fmt: skip
    table = ExperimentTable(
        "rho-lower", columns, meta={"p": cfg.p, "q": q, "method": cfg.method, "budget": cfg.budget}
    )

    def row(n: int):
        d = n + cfg.dim_pad
        G = counterexample_measure(n, d)
        Z = GaussianMeasure.point_mass(d)
        upper = schatten_bound(G, Z, cfg.p)
        cert = rho_lower_bound(
            G, Z, cfg.p, optimizer_budget=cfg.budget, mc_samples=cfg.mc_samples,
            seed=derive_seed(cfg.seed, n), method=cfg.method, workers=cfg.workers,
        )  # fmt: skip
        wit = rho_infty_witness(
            G, Z, infty_witness_function(d), cfg.mc_samples, derive_seed(cfg.seed, n, 1), cfg.workers
        )
        envelope = cert.value - 3.0 * cert.mc_stderr <= upper + CLOSED_FORM_TOL
        fails = []
        if not envelope:
            fails.append(f"n={n}: lower bound {cert.value!r} exceeds upper bound {upper!r}")
        if cert.constraint_value > 1.0 + 1e-9:
            fails.append(f"n={n}: witness constraint value {cert.constraint_value!r} exceeds 1")
        return {
            "n": n, "d": d, "upper_bound": upper, "lower_value": cert.value,
            "lower_stderr": cert.mc_stderr, "lower_certified": cert.certified,
            "witness_sigma": cert.witness.profile.sigma, "witness_amplitude": cert.witness.profile.a,
            "constraint_value": cert.constraint_value, "envelope_ok": envelope,
            "infty_witness_gap": wit.value, "infty_witness_stderr": wit.stderr,
        }, fails  # fmt: skip

    return _collect(table, _map_rows(row, ns, cfg.workers))


# -- interpolation identity ------------------------------------------------------


INTERP_REL_TOL = 0.05


def interp_pair(d: int) -> tuple[GaussianMeasure, GaussianMeasure]:
    """Diagonal test pair: ``S_1 = diag(linspace(1, 1/4, d))``, ``S_2 = S_1 / 4``."""
    s1 = np.linspace(1.0, 0.25, d) if d > 1 else np.ones(1)
    return (
        GaussianMeasure.centered(SymOperator.diagonal(s1)),
        GaussianMeasure.centered(SymOperator.diagonal(s1 / 4.0)),
    )


def run_interp_check(cfg: ExperimentConfig) -> ExperimentTable:
    dims = cfg.dims or [1, 3]
    columns = ["d", "lhs", "rhs", "lhs_stderr", "rhs_stderr", "rel_error", "ok"]
    table = ExperimentTable(
        "interp-check", columns, meta={"t_nodes": 16, "mc_samples": cfg.mc_samples, "tol": INTERP_REL_TOL}
    )
    prof = RadialProfile(cfg.profile, cfg.amplitude, cfg.sigma)

    def row(d: int):
        G1, G2 = interp_pair(d)
        f = RadialFunction(np.zeros(d), prof)
        res = interpolation_check(f, G1, G2, 16, cfg.mc_samples, derive_seed(cfg.seed, d), cfg.workers)
        ok = res.rel_error <= INTERP_REL_TOL
        fails = [] if ok else [f"d={d}: relative error {res.rel_error!r} exceeds {INTERP_REL_TOL}"]
        return {
            "d": d, "lhs": res.lhs, "rhs": res.rhs, "lhs_stderr": res.lhs_stderr,
            "rhs_stderr": res.rhs_stderr, "rel_error": res.rel_error, "ok": ok,
        }, fails  # fmt: skip

    return _collect(table, _map_rows(row, dims, cfg.workers))


RUNNERS: dict[str, Callable[[ExperimentConfig], ExperimentTable]] = {
    "counterexample": run_counterexample,
    "radial-growth": run_radial_growth,
    "bounds": run_bounds,
    "rho-lower": run_rho_lower,
    "interp-check": run_interp_check,
}


def run(cfg: ExperimentConfig) -> ExperimentTable:
    return RUNNERS[cfg.validate().experiment](cfg)
