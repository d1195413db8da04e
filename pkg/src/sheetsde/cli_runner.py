"""Experiment orchestration and the command-line interface.

Every subcommand builds an ExperimentConfig, dispatches through run(), and
prints one ResultRecord as JSON to stdout.  Records carry the seed, a schema
version, the resolved inputs, and a pass verdict (null when the command has
no quantitative check).  Re-running an identical config reproduces all
stochastic outputs bit for bit; wall time is the only varying field.

Exit codes: 0 pass (or nothing to check), 2 quantitative-check failure,
1 usage or runtime error.
"""

from __future__ import annotations

import csv
import json
import math
import sys
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import click
import numpy as np

from . import __version__
from .brownian_sheet import (
    CSV_FLOAT_FORMAT,
    cameron_martin_shift,
    cumulative_values,
    derive_seed,
    export_csv,
    keyed_generator,
    sample,
)
from .estimate_lab import bump_factor, davie_bound, direct_expectation, verify_identity
from .ibp_engine import PermutationSpec, crossing_set, expand, term_to_dict, uniform_spec
from .integrators import simplex_dirichlet_oracle, simplex_singular_integral
from .plane_geometry import GridPartition, geometric_grid, uniform_grid
from .sde_plane import (
    constant_drift,
    euler_weak_expectation,
    girsanov_weak_expectation,
    malliavin_solve,
    sign_drift,
    solve_euler,
    solve_picard,
    tanh_drift,
    zero_drift,
)
from .shuffle_combinatorics import (
    NABLA_KINDS,
    SPLIT_KINDS,
    RegionDescriptor,
    enumerate_block_increasing,
    partition_report,
)

SCHEMA_VERSION = "1"

SUBCOMMANDS = (
    "sample-sheet",
    "expand-ibp",
    "verify-ibp",
    "verify-bound",
    "verify-shuffle",
    "simplex-gamma",
    "solve-sde",
    "malliavin-check",
    "girsanov-check",
)


class ConfigError(ValueError):
    """Invalid experiment configuration; message names the offending field."""

    def __init__(self, field_name: str, message: str) -> None:
        self.field_name = field_name
        super().__init__(f"{field_name}: {message}")


@dataclass(frozen=True)
class ExperimentConfig:
    """One subcommand invocation: name plus its resolved parameter map."""

    subcommand: str
    params: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.subcommand not in SUBCOMMANDS:
            raise ConfigError("subcommand", f"unknown subcommand {self.subcommand!r}")


@dataclass(frozen=True)
class ResultRecord:
    """Structured outcome of one experiment run."""

    command: str
    seed: int
    inputs: dict
    outputs: dict
    passed: Optional[bool]
    wall_time_s: float
    schema_version: str = SCHEMA_VERSION
    artifact_version: str = __version__

    def to_json(self) -> str:
        record = {
            "schema_version": self.schema_version,
            "artifact_version": self.artifact_version,
            "command": self.command,
            "seed": self.seed,
            "inputs": self.inputs,
            "outputs": self.outputs,
            "pass": self.passed,
            "wall_time_s": self.wall_time_s,
        }
        return json.dumps(record, indent=2)

    @property
    def exit_code(self) -> int:
        return 0 if self.passed in (True, None) else 2


# ---------------------------------------------------------------------------
# parameter parsing
# ---------------------------------------------------------------------------


def _parse_int_tuple(name: str, value) -> tuple[int, ...]:
    if isinstance(value, (list, tuple)):
        items = value
    else:
        items = str(value).split(",")
    try:
        return tuple(int(v) for v in items)
    except (TypeError, ValueError):
        raise ConfigError(name, f"expected comma-separated integers, got {value!r}")


def _parse_count(name: str, value, minimum: int = 1) -> int:
    try:
        count = int(float(value))
    except (TypeError, ValueError):
        raise ConfigError(name, f"expected a count, got {value!r}")
    if count < minimum:
        raise ConfigError(name, f"must be >= {minimum}, got {count}")
    return count


def _parse_float(name: str, value) -> float:
    try:
        return float(value)
    except (TypeError, ValueError):
        raise ConfigError(name, f"expected a number, got {value!r}")


def _parse_grid_shape(name: str, value) -> tuple[int, int]:
    parts = str(value).lower().split("x")
    if len(parts) != 2:
        raise ConfigError(name, f"expected ROWSxCOLS like 64x64, got {value!r}")
    try:
        ns, nt = int(parts[0]), int(parts[1])
    except ValueError:
        raise ConfigError(name, f"expected ROWSxCOLS like 64x64, got {value!r}")
    if ns < 1 or nt < 1:
        raise ConfigError(name, "grid must have at least one cell per axis")
    return ns, nt


def _build_grid(params: dict, default_shape: str = "16x16") -> GridPartition:
    ns, nt = _parse_grid_shape("grid", params.get("grid") or default_shape)
    horizon = _parse_float("horizon", params.get("horizon", 1.0))
    if horizon <= 0.0:
        raise ConfigError("horizon", "must be positive")
    if params.get("geometric"):
        return geometric_grid(ns, nt, horizon, horizon)
    return uniform_grid(ns, nt, horizon, horizon)


_DRIFT_NAMES = ("zero", "const", "sign", "tanh")


def _build_drift(params: dict, dim: int):
    name = str(params.get("drift", "tanh"))
    if name == "zero":
        return zero_drift(dim)
    if name == "const":
        return constant_drift(_parse_float("level", params.get("level", 1.0)), dim)
    if name == "sign":
        return sign_drift(dim)
    if name == "tanh":
        return tanh_drift(
            _parse_float("amplitude", params.get("amplitude", 1.0)),
            _parse_float("rate", params.get("rate", 1.0)),
            dim,
        )
    raise ConfigError("drift", f"expected one of {_DRIFT_NAMES}, got {name!r}")


_PHI_NAMES = ("tanh", "cos", "square")


def _build_phi(params: dict):
    name = str(params.get("phi", "tanh"))
    if name == "tanh":
        return lambda x: np.tanh(x[..., 0])
    if name == "cos":
        return lambda x: np.cos(x[..., 0])
    if name == "square":
        return lambda x: np.minimum(x[..., 0] ** 2, 1e6)
    raise ConfigError("phi", f"expected one of {_PHI_NAMES}, got {name!r}")


def _build_factor(params: dict):
    return bump_factor(
        scale=_parse_float("bump_scale", params.get("bump_scale", 1.0)),
        width=_parse_float("bump_width", params.get("bump_width", 2.5)),
        center=_parse_float("bump_center", params.get("bump_center", 0.25)),
    )


def _spec_from_params(params: dict) -> PermutationSpec:
    if not params.get("sigma"):
        raise ConfigError("sigma", "required")
    sigma = _parse_int_tuple("sigma", params["sigma"])
    n = len(sigma)
    if sorted(sigma) != list(range(1, n + 1)):
        raise ConfigError("sigma", f"not a permutation of 1..{n}: {sigma}")
    if params.get("s_times") or params.get("t_times"):
        s_times = tuple(float(v) for v in str(params.get("s_times", "")).split(",") if v)
        t_times = tuple(float(v) for v in str(params.get("t_times", "")).split(",") if v)
        if len(s_times) != n or len(t_times) != n:
            raise ConfigError("s_times", f"need {n} values in each of s_times and t_times")
        return PermutationSpec(n, sigma, s_times, t_times)
    grid = _build_grid(params, default_shape=f"{n}x{n}")
    if grid.n_s < n or grid.n_t < n:
        raise ConfigError("grid", f"needs at least {n} cells per axis for n={n}")
    return PermutationSpec(n, sigma, tuple(grid.s_knots[1:n + 1]), tuple(grid.t_knots[1:n + 1]))


def _estimate_dict(est) -> dict:
    return {"mean": est.mean, "std_error": est.std_error, "n_samples": est.n_samples}


# ---------------------------------------------------------------------------
# subcommand handlers: params -> (outputs, passed)
# ---------------------------------------------------------------------------


def _run_sample_sheet(params: dict) -> tuple[dict, Optional[bool]]:
    grid = _build_grid(params, default_shape="8x8")
    dim = _parse_count("dim", params.get("dim", 1))
    seed = _parse_count("seed", params.get("seed", 0), minimum=0)
    sheet = sample(grid, dim=dim, seed=seed)
    vals = cumulative_values(sheet.increments)
    out = params.get("out")
    if out:
        export_csv(sheet, out)
    terminal = [float(v) for v in vals[-1, -1]]
    return {
        "n_s": grid.n_s,
        "n_t": grid.n_t,
        "dim": dim,
        "sup_abs_value": float(np.abs(vals).max()),
        "terminal_value": terminal,
        "csv_path": out or None,
    }, None


def _run_expand_ibp(params: dict) -> tuple[dict, Optional[bool]]:
    spec = _spec_from_params(params)
    terms = expand(spec)
    J = crossing_set(spec)
    term_dicts = [term_to_dict(t) for t in terms]
    out = params.get("out")
    if out:
        with open(out, "w") as fh:
            json.dump(term_dicts, fh, indent=2)
    return {
        "n": spec.n,
        "sigma": list(spec.sigma),
        "crossing_rows": list(J.members),
        "n_terms": len(terms),
        "terms": term_dicts,
        "terms_path": out or None,
    }, None


def _run_verify_ibp(params: dict) -> tuple[dict, Optional[bool]]:
    spec = _spec_from_params(params)
    if params.get("n") is not None and int(params["n"]) != spec.n:
        raise ConfigError("n", f"n={params['n']} disagrees with sigma of length {spec.n}")
    factor = _build_factor(params)
    method = str(params.get("method", "mc"))
    if method not in ("mc", "quadrature"):
        raise ConfigError("method", f"expected mc or quadrature, got {method!r}")
    seed = _parse_count("seed", params.get("seed", 0), minimum=0)
    if method == "quadrature":
        budget = _parse_count("nodes", params.get("nodes", 30))
    else:
        budget = _parse_count("samples", params.get("samples", 200_000))
    report = verify_identity(
        spec, factor, method=method, budget=budget, seed=seed,
        quad_rel_tol=_parse_float("rel_tol", params.get("rel_tol", 1e-6)),
        se_width=_parse_float("se_width", params.get("se_width", 4.0)),
    )
    outputs = {
        "sigma": list(spec.sigma),
        "method": method,
        "direct": _estimate_dict(report.direct),
        "ibp": _estimate_dict(report.ibp),
        "bound": report.bound,
        "identity_gap": report.identity_gap,
        "identity_tol": report.identity_tol,
        "identity_ok": report.identity_ok,
        "bound_ok": report.bound_ok,
    }
    return outputs, report.passed


def _run_verify_bound(params: dict) -> tuple[dict, Optional[bool]]:
    trials = _parse_count("trials", params.get("trials", 50))
    n_set = _parse_int_tuple("n_set", params.get("n_set", "2,3"))
    samples = _parse_count("samples", params.get("samples", 100_000))
    seed = _parse_count("seed", params.get("seed", 0), minimum=0)
    allowed = _parse_count("allowed_failures", params.get("allowed_failures", 1), minimum=0)
    factor = _build_factor(params)
    rng = keyed_generator(seed)
    violations = []
    for trial in range(trials):
        n = int(rng.choice(n_set))
        sigma = tuple(int(v) for v in rng.permutation(n) + 1)
        s_times = tuple(np.sort(rng.uniform(0.05, 1.0, n)))
        t_times = tuple(np.sort(rng.uniform(0.05, 1.0, n)))
        spec = PermutationSpec(n, sigma, s_times, t_times)
        est = direct_expectation(spec, factor, "mc", samples, derive_seed(seed, trial + 1))
        bound = davie_bound(spec, factor.sup_norm)
        if abs(est.mean) + 4.0 * est.std_error > bound:
            violations.append({
                "trial": trial, "n": n, "sigma": list(sigma),
                "estimate": est.mean, "std_error": est.std_error, "bound": bound,
            })
    passed = len(violations) <= allowed
    return {
        "trials": trials,
        "n_set": list(n_set),
        "violations": violations,
        "n_violations": len(violations),
        "allowed_failures": allowed,
    }, passed


def _run_verify_shuffle(params: dict) -> tuple[dict, Optional[bool]]:
    kind = str(params.get("kind", "nabla"))
    if kind not in NABLA_KINDS + SPLIT_KINDS:
        raise ConfigError("kind", f"expected one of {NABLA_KINDS + SPLIT_KINDS}, got {kind!r}")
    m = _parse_count("m", params.get("m", 2))
    k = _parse_count("k", params.get("k", 1))
    n = _parse_count("n", params.get("n", 0), minimum=0)
    samples = _parse_count("samples", params.get("samples", 100_000))
    seed = _parse_count("seed", params.get("seed", 0), minimum=0)
    if kind in NABLA_KINDS:
        region = RegionDescriptor(kind, k)
    else:
        if n < 1:
            raise ConfigError("n", f"kind {kind} needs n >= 1")
        mids = {"s_mid": 0.5, "t_mid": 0.5}
        region = RegionDescriptor(kind, k, n, **mids)
    report = partition_report(region, m, samples, seed)
    family = enumerate_block_increasing(m, k)
    outputs = {
        "kind": kind,
        "m": m,
        "k": k,
        "n": n,
        "n_samples": samples,
        "n_cells": report.n_cells,
        "family_count": len(family.members),
        "expected_family_count": family.expected_count,
        "uncovered": report.uncovered,
        "multiply_covered": report.multiply_covered,
        "locate_mismatches": report.locate_mismatches,
    }
    passed = report.ok and len(family.members) == family.expected_count
    return outputs, passed


def _run_simplex_gamma(params: dict) -> tuple[dict, Optional[bool]]:
    n = _parse_count("n", params.get("n", 1))
    lower = _parse_float("lower", params.get("lower", 0.0))
    upper = _parse_float("upper", params.get("upper", 1.0))
    samples = _parse_count("mc_samples", params.get("mc_samples", 1_000_000))
    seed = _parse_count("seed", params.get("seed", 0), minimum=0)
    closed = simplex_singular_integral(n, lower, upper)
    oracle = simplex_dirichlet_oracle(n, lower, upper, samples, seed)
    z = abs(closed - oracle.mean) / oracle.std_error
    return {
        "n": n,
        "lower": lower,
        "upper": upper,
        "closed_form": closed,
        "oracle": _estimate_dict(oracle),
        "z_score": z,
    }, bool(z <= 4.0)


def _run_solve_sde(params: dict) -> tuple[dict, Optional[bool]]:
    grid = _build_grid(params, default_shape="16x16")
    dim = _parse_count("dim", params.get("dim", 1))
    seed = _parse_count("seed", params.get("seed", 0), minimum=0)
    x0 = _parse_float("x0", params.get("x0", 0.0))
    drift = _build_drift(params, dim)
    scheme = str(params.get("scheme", "euler"))
    sheet = sample(grid, dim=dim, seed=seed)
    sweeps = None
    if scheme == "euler":
        sol = solve_euler(grid, drift, x0, sheet)
    elif scheme == "picard":
        sol, sweeps = solve_picard(grid, drift, x0, sheet)
    else:
        raise ConfigError("scheme", f"expected euler or picard, got {scheme!r}")
    out = params.get("out")
    if out:
        _write_field_csv(out, grid, sol.values)
    return {
        "scheme": scheme,
        "drift": str(params.get("drift", "tanh")),
        "sweeps": sweeps,
        "terminal_value": [float(v) for v in sol.values[-1, -1]],
        "sup_abs_value": float(np.abs(sol.values).max()),
        "csv_path": out or None,
    }, None


def _write_field_csv(path: str, grid: GridPartition, values: np.ndarray) -> None:
    dim = values.shape[-1]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["i", "j", "s", "t"] + [f"x{c}" for c in range(dim)])
        for i in range(grid.n_s + 1):
            for j in range(grid.n_t + 1):
                row = [i, j, CSV_FLOAT_FORMAT % grid.s_knots[i], CSV_FLOAT_FORMAT % grid.t_knots[j]]
                row += [CSV_FLOAT_FORMAT % v for v in values[i, j]]
                writer.writerow(row)


def _run_malliavin_check(params: dict) -> tuple[dict, Optional[bool]]:
    grid = _build_grid(params, default_shape="32x32")
    seed = _parse_count("seed", params.get("seed", 0), minimum=0)
    x0 = _parse_float("x0", params.get("x0", 0.0))
    eps = _parse_float("eps", params.get("eps", 1e-4))
    tol = _parse_float("tolerance", params.get("tolerance", 1e-2))
    drift = _build_drift(params, 1)
    drift.require_jacobian()
    sheet = sample(grid, dim=1, seed=seed)
    sol = solve_euler(grid, drift, x0, sheet)

    s = np.asarray(grid.s_knots)
    t = np.asarray(grid.t_knots)
    hdot = (np.cos(2.1 * s[1:])[:, None] * np.sin(1.7 * t[1:] + 0.3)[None, :])[:, :, None]
    up = solve_euler(grid, drift, x0, cameron_martin_shift(sheet, hdot, eps))
    dn = solve_euler(grid, drift, x0, cameron_martin_shift(sheet, hdot, -eps))
    fd = float((up.values[-1, -1, 0] - dn.values[-1, -1, 0]) / (2.0 * eps))

    areas = np.outer(grid.s_gaps(), grid.t_gaps())
    predicted = 0.0
    for a in range(grid.n_s):
        for b in range(grid.n_t):
            deriv = malliavin_solve(grid, drift, sol, base=(a + 1, b + 1))
            predicted += float(deriv.values[-1, -1, 0, 0]) * hdot[a, b, 0] * areas[a, b]
    rel_err = abs(predicted - fd) / max(abs(fd), 1e-300)
    return {
        "grid": f"{grid.n_s}x{grid.n_t}",
        "eps": eps,
        "finite_difference": fd,
        "predicted": predicted,
        "rel_err": rel_err,
        "tolerance": tol,
    }, bool(rel_err <= tol)


def _run_girsanov_check(params: dict) -> tuple[dict, Optional[bool]]:
    grid = _build_grid(params, default_shape="64x64")
    seed = _parse_count("seed", params.get("seed", 0), minimum=0)
    samples = _parse_count("samples", params.get("samples", 100_000))
    x0 = _parse_float("x0", params.get("x0", 0.0))
    width = _parse_float("se_width", params.get("se_width", 4.0))
    drift = _build_drift(params, 1)
    phi = _build_phi(params)

    girsanov = girsanov_weak_expectation(phi, drift, x0, grid, samples, seed)
    euler = euler_weak_expectation(phi, drift, x0, grid, samples, derive_seed(seed, 0xE0))
    gap_se = abs(girsanov.mean - euler.mean) / max(
        math.hypot(girsanov.std_error, euler.std_error), 1e-300
    )
    ones = lambda x: np.ones(x.shape[:-1])
    weight = girsanov_weak_expectation(ones, drift, x0, grid, samples, derive_seed(seed, 0xA1))
    weight_z = abs(weight.mean - 1.0) / max(weight.std_error, 1e-300)
    passed = bool(gap_se <= width and weight_z <= width)
    return {
        "drift": str(params.get("drift", "tanh")),
        "phi": str(params.get("phi", "tanh")),
        "girsanov": _estimate_dict(girsanov),
        "euler": _estimate_dict(euler),
        "gap_se": gap_se,
        "mean_weight": _estimate_dict(weight),
        "weight_z": weight_z,
    }, passed


_RUNNERS: dict[str, Callable[[dict], tuple[dict, Optional[bool]]]] = {
    "sample-sheet": _run_sample_sheet,
    "expand-ibp": _run_expand_ibp,
    "verify-ibp": _run_verify_ibp,
    "verify-bound": _run_verify_bound,
    "verify-shuffle": _run_verify_shuffle,
    "simplex-gamma": _run_simplex_gamma,
    "solve-sde": _run_solve_sde,
    "malliavin-check": _run_malliavin_check,
    "girsanov-check": _run_girsanov_check,
}


def run(config: ExperimentConfig) -> ResultRecord:
    """Validate and execute one experiment, returning its record."""
    handler = _RUNNERS[config.subcommand]
    seed = _parse_count("seed", config.params.get("seed", 0), minimum=0)
    start = time.perf_counter()
    outputs, passed = handler(dict(config.params))
    wall = time.perf_counter() - start
    inputs = {k: v for k, v in sorted(config.params.items()) if v is not None}
    return ResultRecord(config.subcommand, seed, inputs, outputs, passed, wall)


# ---------------------------------------------------------------------------
# click layer
# ---------------------------------------------------------------------------


def _load_config_file(path: Optional[str]) -> dict:
    if not path:
        return {}
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError("config", f"cannot read {path}: {exc}")
    except json.JSONDecodeError as exc:
        raise ConfigError("config", f"invalid JSON in {path}: {exc}")
    if not isinstance(data, dict):
        raise ConfigError("config", "config file must hold a JSON object")
    return data


def _resolve_params(ctx: click.Context, kwargs: dict) -> dict:
    """Overlay config-file values onto parameters left at their defaults."""
    file_values = _load_config_file(kwargs.pop("config", None))
    params = dict(kwargs)
    for key, value in file_values.items():
        if key not in params:
            params[key] = value
            continue
        source = ctx.get_parameter_source(key)
        if source is not None and source.name != "COMMANDLINE":
            params[key] = value
    return params


def _emit(ctx: click.Context, subcommand: str, kwargs: dict) -> int:
    params = _resolve_params(ctx, kwargs)
    record = run(ExperimentConfig(subcommand, params))
    click.echo(record.to_json())
    return record.exit_code


def _common(fn):
    fn = click.option("--config", type=click.Path(), default=None,
                      help="JSON file with parameter defaults; flags override.")(fn)
    fn = click.option("--seed", default=0, envvar="SHEETSDE_SEED", show_default=True,
                      help="Base seed; SHEETSDE_SEED supplies the default.")(fn)
    return fn


def _grid_opts(fn, default="16x16"):
    fn = click.option("--grid", default=default, show_default=default is not None,
                      help="Cells per axis, ROWSxCOLS.")(fn)
    fn = click.option("--horizon", default=1.0, show_default=True,
                      help="Upper time bound of both axes.")(fn)
    fn = click.option("--geometric", is_flag=True, default=False,
                      help="Geometrically graded knots instead of uniform.")(fn)
    return fn


def _bump_opts(fn):
    fn = click.option("--bump-scale", default=1.0, show_default=True)(fn)
    fn = click.option("--bump-width", default=2.5, show_default=True)(fn)
    fn = click.option("--bump-center", default=0.25, show_default=True)(fn)
    return fn


@click.group(name="sheetsde")
@click.version_option(version=__version__)
def cli() -> None:
    """Brownian-sheet SDE toolkit: sheet sampling, rectangle-selection

    integration-by-parts verification, shuffle partitions, and the
    two-parameter solver with Malliavin and Girsanov checks.
    """


@cli.command("sample-sheet")
@click.pass_context
@_common
@click.option("--dim", default=1, show_default=True)
@click.option("--out", type=click.Path(), default=None, help="CSV path for the increments.")
def sample_sheet_cmd(ctx, **kwargs):
    """Draw one sheet sample; optionally export increments as CSV."""
    return _emit(ctx, "sample-sheet", kwargs)


sample_sheet_cmd = _grid_opts(sample_sheet_cmd, default="8x8")


@cli.command("expand-ibp")
@click.pass_context
@_common
@click.option("--sigma", default=None, help="Permutation, comma separated, e.g. 2,1,3 (required).")
@click.option("--s-times", default=None, help="Optional comma-separated s times.")
@click.option("--t-times", default=None, help="Optional comma-separated t times.")
@click.option("--out", type=click.Path(), default=None, help="JSON path for the term list.")
def expand_ibp_cmd(ctx, **kwargs):
    """Emit the signed term list of the rectangle-selection expansion."""
    return _emit(ctx, "expand-ibp", kwargs)


@cli.command("verify-ibp")
@click.pass_context
@_common
@click.option("--n", default=None, type=int, help="Redundant check of len(sigma).")
@click.option("--sigma", default=None, help="Permutation, comma separated (required).")
@click.option("--samples", default="200000", show_default=True, help="MC samples (accepts 1e6).")
@click.option("--method", default="mc", show_default=True, type=click.Choice(["mc", "quadrature"]))
@click.option("--nodes", default=30, show_default=True, help="Quadrature nodes per dimension.")
@click.option("--rel-tol", default=1e-6, show_default=True)
@click.option("--se-width", default=4.0, show_default=True)
def verify_ibp_cmd(ctx, **kwargs):
    """Check direct vs expanded expectation and the product bound."""
    return _emit(ctx, "verify-ibp", kwargs)


verify_ibp_cmd = _grid_opts(verify_ibp_cmd, default=None)
verify_ibp_cmd = _bump_opts(verify_ibp_cmd)


@cli.command("verify-bound")
@click.pass_context
@_common
@click.option("--trials", default=50, show_default=True)
@click.option("--n-set", default="2,3", show_default=True, help="Candidate n values.")
@click.option("--samples", default="100000", show_default=True)
@click.option("--allowed-failures", default=1, show_default=True)
def verify_bound_cmd(ctx, **kwargs):
    """Random-configuration domination sweep of the product bound."""
    return _emit(ctx, "verify-bound", kwargs)


verify_bound_cmd = _bump_opts(verify_bound_cmd)


@cli.command("verify-shuffle")
@click.pass_context
@_common
@click.option("--kind", default="nabla", show_default=True,
              type=click.Choice(list(NABLA_KINDS + SPLIT_KINDS)))
@click.option("--m", default=2, show_default=True, help="Number of product blocks.")
@click.option("--k", default=1, show_default=True, help="Points per block (upper group).")
@click.option("--n", default=0, show_default=True, help="Lower-group size for split kinds.")
@click.option("--samples", default="100000", show_default=True)
def verify_shuffle_cmd(ctx, **kwargs):
    """Sampled partition scan of a product order-region."""
    return _emit(ctx, "verify-shuffle", kwargs)


@cli.command("simplex-gamma")
@click.pass_context
@_common
@click.option("--n", default=1, show_default=True)
@click.option("--lower", default=0.0, show_default=True)
@click.option("--upper", default=1.0, show_default=True)
@click.option("--mc-samples", default="1000000", show_default=True)
def simplex_gamma_cmd(ctx, **kwargs):
    """Closed-form singular simplex integral vs its sampling oracle."""
    return _emit(ctx, "simplex-gamma", kwargs)


@cli.command("solve-sde")
@click.pass_context
@_common
@click.option("--drift", default="tanh", show_default=True, type=click.Choice(list(_DRIFT_NAMES)))
@click.option("--x0", default=0.0, show_default=True)
@click.option("--dim", default=1, show_default=True)
@click.option("--scheme", default="euler", show_default=True, type=click.Choice(["euler", "picard"]))
@click.option("--amplitude", default=1.0, show_default=True, help="tanh drift amplitude.")
@click.option("--rate", default=1.0, show_default=True, help="tanh drift rate.")
@click.option("--level", default=1.0, show_default=True, help="const drift level.")
@click.option("--out", type=click.Path(), default=None, help="CSV path for the solution field.")
def solve_sde_cmd(ctx, **kwargs):
    """Solve one realization of the sheet-driven SDE on a grid."""
    return _emit(ctx, "solve-sde", kwargs)


solve_sde_cmd = _grid_opts(solve_sde_cmd)


@cli.command("malliavin-check")
@click.pass_context
@_common
@click.option("--drift", default="tanh", show_default=True, type=click.Choice(list(_DRIFT_NAMES)))
@click.option("--x0", default=0.0, show_default=True)
@click.option("--eps", default=1e-4, show_default=True)
@click.option("--tolerance", default=1e-2, show_default=True)
@click.option("--amplitude", default=1.0, show_default=True)
@click.option("--rate", default=1.0, show_default=True)
@click.option("--level", default=1.0, show_default=True)
def malliavin_check_cmd(ctx, **kwargs):
    """Directional-derivative identity under a drift shift of the sheet."""
    return _emit(ctx, "malliavin-check", kwargs)


malliavin_check_cmd = _grid_opts(malliavin_check_cmd, default="32x32")


@cli.command("girsanov-check")
@click.pass_context
@_common
@click.option("--drift", default="tanh", show_default=True, type=click.Choice(list(_DRIFT_NAMES)))
@click.option("--phi", default="tanh", show_default=True, type=click.Choice(list(_PHI_NAMES)))
@click.option("--x0", default=0.0, show_default=True)
@click.option("--samples", default="100000", show_default=True)
@click.option("--se-width", default=4.0, show_default=True)
@click.option("--amplitude", default=1.0, show_default=True)
@click.option("--rate", default=1.0, show_default=True)
@click.option("--level", default=1.0, show_default=True)
def girsanov_check_cmd(ctx, **kwargs):
    """Two-estimator agreement of the weak solution and E[weight] = 1."""
    return _emit(ctx, "girsanov-check", kwargs)


girsanov_check_cmd = _grid_opts(girsanov_check_cmd, default="64x64")


def main(argv: Optional[list] = None) -> int:
    try:
        rv = cli.main(args=argv, standalone_mode=False)
    except click.exceptions.Exit as exc:
        return int(exc.exit_code)
    except click.UsageError as exc:
        exc.show(file=sys.stderr)
        return 1
    except click.ClickException as exc:
        exc.show(file=sys.stderr)
        return 1
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        return 1
    except ConfigError as exc:
        click.echo(f"error: {exc}", err=True)
        return 1
    except Exception as exc:
        click.echo(f"error: {type(exc).__name__}: {exc}", err=True)
        return 1
    return int(rv) if isinstance(rv, int) else 0


if __name__ == "__main__":
    sys.exit(main())
