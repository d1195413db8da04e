"""Numerical verification of the rectangle-selection expansion.

Provides the two independent routes to the same expectation: the direct
evaluation of E[prod b'(sheet at the scheme points)] over the span cells,
and the expanded form with undifferentiated drift factors and Hermite
weights; plus the Davie-type product bound and the integrated Gamma-function
corollary checks.

Both routes integrate over independent cell variables.  On the expansion
side the substitution cells of crossing rows are handled by sampling the
substituted coordinates: the raw variable of the substitution cell is the
kernel argument z[tau] - z[gamma], so drift arguments add the gamma
variable back wherever a substitution cell appears.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .brownian_sheet import derive_seed, keyed_generator
from .ibp_engine import (
    IbpTerm,
    PermutationSpec,
    crossing_set,
    expand,
    span,
    spec_variances,
)
from .integrators import (
    DEFAULT_C1,
    GammaBound,
    McEstimate,
    TimeWindow,
    corollary_rhs,
    gauss_hermite,
    monte_carlo,
)
from .kernels import DEFAULT_C0
from .plane_geometry import Cell


# ---------------------------------------------------------------------------
# scalar drift factors
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DriftScalarFactor:
    """Scalar bounded drift b with derivative and sup norm, vectorized."""

    name: str
    b: callable
    b_prime: callable
    sup_norm: float


def bump_factor(scale: float = 1.0, width: float = 1.0, center: float = 0.0) -> DriftScalarFactor:
    """Smooth compactly supported bump scale * exp(1 / (((x-c)/w)^2 - 1)).

    Supported on (c - w, c + w) with maximum scale / e at the center.  The
    derivative underflows to zero before the rational prefactor can
    overflow, so plain masked evaluation is stable.
    """
    if width <= 0.0:
        raise ValueError("width must be positive")

    def b(x):
        x = np.asarray(x, dtype=float)
        u = (x - center) / width
        inside = np.abs(u) < 1.0
        out = np.zeros_like(u)
        with np.errstate(divide="ignore", over="ignore", under="ignore"):
            t = np.where(inside, u * u - 1.0, -1.0)
            out = np.where(inside, scale * np.exp(1.0 / t), 0.0)
        return out

    def b_prime(x):
        x = np.asarray(x, dtype=float)
        u = (x - center) / width
        inside = np.abs(u) < 1.0
        with np.errstate(divide="ignore", over="ignore", under="ignore"):
            t = np.where(inside, u * u - 1.0, -1.0)
            val = np.where(inside, scale * np.exp(1.0 / t), 0.0)
            pref = np.where(inside, -2.0 * u / (width * t * t), 0.0)
        return pref * val

    return DriftScalarFactor("bump", b, b_prime, scale / math.e)


# ---------------------------------------------------------------------------
# integrand assembly
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class _SpanData:
    cells: tuple[Cell, ...]
    index: dict[Cell, int]
    variances: np.ndarray
    direct_args: np.ndarray  # (n, ncells) 0/1, staircase rectangles per row


def _span_data(spec: PermutationSpec) -> _SpanData:
    cells = span(spec)
    index = {c: i for i, c in enumerate(cells)}
    variances = spec_variances(spec, cells)
    n = spec.n
    direct_args = np.zeros((n, len(cells)))
    for i in range(1, n + 1):
        for c in cells:
            if c.row <= i and c.col <= spec.sigma_of(i):
                direct_args[i - 1, index[c]] = 1.0
    return _SpanData(cells, index, variances, direct_args)


def _direct_integrand(spec: PermutationSpec, factor: DriftScalarFactor, data: _SpanData):
    coeffs = data.direct_args

    def f(x: np.ndarray) -> np.ndarray:
        w = x @ coeffs.T  # (m, n) sheet values at the scheme points
        return np.prod(factor.b_prime(w), axis=-1)

    return f


def _term_integrand(spec: PermutationSpec, term: IbpTerm, factor: DriftScalarFactor,
                    data: _SpanData, reduce_variance: bool = False):
    """Integrand of one expansion term in the raw (substituted) variables.

    With reduce_variance the exactly-mean-zero control b(0)^n * prod(weights)
    is subtracted (the gradient cells are distinct independent coordinates,
    so the weight product integrates to zero against any constant) and the
    evaluation is antithetic in x; both transformations are unbiased.
    """
    n = spec.n
    ncells = len(data.cells)
    tau_to_gamma = {
        Cell(i, term.tau[i]): data.index[Cell(i, term.gamma[i - 1])] for i in term.tau
    }
    coeffs = np.zeros((n, ncells))
    for i, args in enumerate(term.b_arg_sets):
        for c in args:
            coeffs[i, data.index[c]] += 1.0
            if c in tau_to_gamma:
                coeffs[i, tau_to_gamma[c]] += 1.0

    b_idx = np.array([data.index[c] for c in term.b_cells])
    b_var = data.variances[b_idx]
    b0n = float(factor.b(np.zeros(1))[0]) ** n

    def raw(x: np.ndarray) -> np.ndarray:
        args = x @ coeffs.T
        vals = np.prod(factor.b(args), axis=-1)
        weights = np.prod(-x[:, b_idx] / b_var, axis=-1)
        if reduce_variance:
            vals = vals - b0n
        return vals * weights

    if not reduce_variance:
        return raw

    def f(x: np.ndarray) -> np.ndarray:
        return 0.5 * (raw(x) + raw(-x))

    return f


def _gaussian_sampler(variances: np.ndarray):
    std = np.sqrt(variances)

    def sampler(rng: np.random.Generator, size: int) -> np.ndarray:
        return rng.standard_normal((size, std.shape[0])) * std

    return sampler


# ---------------------------------------------------------------------------
# the two expectation routes
# ---------------------------------------------------------------------------

METHODS = ("mc", "quadrature")


def direct_expectation(spec: PermutationSpec, factor: DriftScalarFactor,
                       method: str = "mc", budget: int = 100_000, seed: int = 0) -> McEstimate:
    """E[prod_i b'(W at (s_i, t_sigma(i)))] over independent span increments."""
    if method not in METHODS:
        raise ValueError(f"method must be one of {METHODS}")
    data = _span_data(spec)
    f = _direct_integrand(spec, factor, data)
    if method == "quadrature":
        val = gauss_hermite(f, dims=len(data.cells), nodes_per_dim=budget,
                            variances=data.variances)
        return McEstimate(val, 0.0, budget ** len(data.cells), None)
    return monte_carlo(f, _gaussian_sampler(data.variances), budget, seed)


def ibp_expectation(spec: PermutationSpec, factor: DriftScalarFactor,
                    budget: int = 100_000, seed: int = 0, method: str = "mc",
                    reduce_variance: bool = True) -> McEstimate:
    """Signed sum of the expansion terms; independent seed stream per term.

    Standard errors of the terms combine by root sum of squares.  Monte
    Carlo terms use the unbiased control-variate and antithetic reduction
    by default; quadrature ignores the flag.
    """
    if method not in METHODS:
        raise ValueError(f"method must be one of {METHODS}")
    data = _span_data(spec)
    terms = expand(spec)
    total = 0.0
    var_sum = 0.0
    n_used = 0
    for idx, term in enumerate(terms):
        if method == "quadrature":
            f = _term_integrand(spec, term, factor, data)
            val = gauss_hermite(f, dims=len(data.cells), nodes_per_dim=budget,
                                variances=data.variances)
            est = McEstimate(val, 0.0, budget ** len(data.cells), None)
        else:
            f = _term_integrand(spec, term, factor, data, reduce_variance=reduce_variance)
            est = monte_carlo(f, _gaussian_sampler(data.variances), budget,
                              derive_seed(seed, 0x5EED + idx))
        total += term.sign * est.mean
        var_sum += est.std_error ** 2
        n_used += est.n_samples
    return McEstimate(total, math.sqrt(var_sum), n_used, seed if method == "mc" else None)


def davie_bound(spec: PermutationSpec, sup_norm: float, c0: float = DEFAULT_C0) -> float:
    """Product bound (c0 ||b||)^n / prod sqrt(gap_s gap_t), gaps from the origin."""
    if sup_norm < 0.0:
        raise ValueError("sup_norm must be nonnegative")
    s = (0.0,) + spec.s_times
    t = (0.0,) + spec.t_times
    log_val = spec.n * math.log(c0)
    if sup_norm == 0.0:
        return 0.0
    log_val += spec.n * math.log(sup_norm)
    for i in range(1, spec.n + 1):
        log_val -= 0.5 * (math.log(s[i] - s[i - 1]) + math.log(t[i] - t[i - 1]))
    return math.exp(log_val)


@dataclass(frozen=True)
class IdentityReport:
    """Direct vs expanded estimate and the product bound for one scheme."""

    spec_sigma: tuple[int, ...]
    direct: McEstimate
    ibp: McEstimate
    bound: float
    identity_gap: float
    identity_tol: float
    identity_ok: bool
    bound_ok: bool

    @property
    def passed(self) -> bool:
        return self.identity_ok and self.bound_ok


def verify_identity(spec: PermutationSpec, factor: DriftScalarFactor,
                    method: str = "mc", budget: int = 200_000, seed: int = 0,
                    quad_rel_tol: float = 1e-6, se_width: float = 4.0) -> IdentityReport:
    direct = direct_expectation(spec, factor, method, budget, seed)
    ibp = ibp_expectation(spec, factor, budget, seed=derive_seed(seed, 0xA17), method=method)
    bound = davie_bound(spec, factor.sup_norm)
    gap = abs(direct.mean - ibp.mean)
    if method == "quadrature":
        scale = max(abs(direct.mean), abs(ibp.mean), 1e-300)
        tol = quad_rel_tol * scale
    else:
        tol = se_width * math.hypot(direct.std_error, ibp.std_error)
    identity_ok = gap <= tol
    bound_ok = abs(ibp.mean) + se_width * ibp.std_error <= bound
    return IdentityReport(spec.sigma, direct, ibp, bound, gap, tol, identity_ok, bound_ok)


# ---------------------------------------------------------------------------
# integrated corollary checks
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CorollaryReport:
    n: int
    lhs: McEstimate
    rhs: GammaBound
    ratio: float
    passed: bool


def corollary_check(n: int, window: TimeWindow, factor: DriftScalarFactor,
                    budget: int = 200, seed: int = 0, c1: float = DEFAULT_C1,
                    inner_nodes: int = 16) -> CorollaryReport:
    """Window integral of |E[prod b']| over chain configurations vs the bound.

    Outer Monte Carlo over the time simplex (both coordinates sorted,
    identity pairing); inner deterministic quadrature of the expectation.
    Only n <= 2 is supported: the identity pairing spans n^2 cells and the
    inner quadrature is tensorized.
    """
    if n < 1 or n > 2:
        raise ValueError("corollary_check supports n in {1, 2}")
    for bound_name in ("r", "s", "u", "t"):
        if getattr(window, bound_name) is None:
            raise ValueError(f"window bound {bound_name} required")
    if not (window.r < window.s and window.u < window.t):
        raise ValueError("window must satisfy r < s and u < t")

    rng = keyed_generator(seed)
    sigma = tuple(range(1, n + 1))
    vals = np.empty(budget)
    for it in range(budget):
        s_times = np.sort(rng.uniform(window.r, window.s, size=n))
        t_times = np.sort(rng.uniform(window.u, window.t, size=n))
        spec = PermutationSpec(n, sigma, tuple(s_times), tuple(t_times))
        est = direct_expectation(spec, factor, "quadrature", inner_nodes)
        vals[it] = abs(est.mean)

    volume = ((window.s - window.r) * (window.t - window.u) / math.factorial(n) ** 2) ** n
    mean = float(vals.mean()) * volume
    se = float(vals.std(ddof=1)) / math.sqrt(budget) * volume
    lhs = McEstimate(mean, se, budget, seed)
    rhs = corollary_rhs("mD", n, 0, factor.sup_norm, window, c1)
    ratio = lhs.mean / rhs.value if rhs.value > 0 else math.inf
    return CorollaryReport(n, lhs, rhs, ratio, lhs.mean <= rhs.value)


def corollary_scaling_slope(n: int, factor: DriftScalarFactor, budget: int = 300,
                            seed: int = 0, base_side: float = 0.25,
                            n_windows: int = 3, inner_nodes: int = 16) -> float:
    """Measured area-exponent of the window integral under side-halving.

    For smooth drift with b'(0) != 0 the integrand tends to a constant on
    shrinking windows anchored at the origin, so the integral scales like
    area^n.  Log-log regression over halving windows; the same seed is
    reused across windows so the outer configurations are common random
    numbers and the sampling noise largely cancels in the slope.
    """
    if n_windows < 2:
        raise ValueError("need at least two windows for a slope")
    log_area = []
    log_lhs = []
    for level in range(n_windows):
        side = base_side / 2.0 ** level
        window = TimeWindow(r=0.0, s=side, u=0.0, t=side)
        rep = corollary_check(n, window, factor, budget, seed, inner_nodes=inner_nodes)
        log_area.append(2.0 * math.log(side))
        log_lhs.append(math.log(rep.lhs.mean))
    return float(np.polyfit(log_area, log_lhs, 1)[0])
