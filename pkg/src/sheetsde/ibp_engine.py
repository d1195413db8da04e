"""Rectangle-selection integration-by-parts expansion.

Setting: n evaluation points (s_i, t_sigma(i)) with strictly increasing times
s_1 < ... < s_n and t_1 < ... < t_n and a permutation sigma pairing rows with
columns.  The expectation of a product of drift gradients evaluated at the
sheet values of these points is rewritten, one integration by parts per row,
as a signed sum over subsets K of the crossing rows.  Each summand is an
integral over the span cells of a product of n undifferentiated drift factors,
one-dimensional Gaussian kernels (one per cell), and n kernel-gradient
factors whose cells form a system with pairwise distinct rows and columns.

Cell (i, j) of the scheme corresponds to the rectangle
(s_{i-1}, s_i] x (t_{j-1}, t_j] and carries the increment variable z[i][j];
kernel variances are the rectangle areas.  A crossing row i (one dominated by
a later point in both coordinates) contributes two special cells: the
selection cell (i, gamma_i) and the substitution cell (i, tau_i), whose
kernel argument is z[i][tau_i] shifted by -z[i][gamma_i].  Non-crossing rows
contribute a single gradient cell (i, gamma_i).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import permutations
from typing import Iterator, Optional, Sequence

import numpy as np

from .plane_geometry import Cell, DegenerateGridError, MIN_KNOT_GAP


class EmptySelectionError(RuntimeError):
    """Internal hard error: a selection pool emptied out.

    The shift lemmas guarantee this never happens for valid input; reaching
    it indicates a bug, not a user error.
    """


@dataclass(frozen=True)
class PermutationSpec:
    """Points (s_i, t_sigma(i)), i = 1..n, with strictly increasing times."""

    n: int
    sigma: tuple[int, ...]
    s_times: tuple[float, ...]
    t_times: tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "sigma", tuple(int(v) for v in self.sigma))
        object.__setattr__(self, "s_times", tuple(float(v) for v in self.s_times))
        object.__setattr__(self, "t_times", tuple(float(v) for v in self.t_times))
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if sorted(self.sigma) != list(range(1, self.n + 1)):
            raise ValueError(f"sigma must be a permutation of 1..{self.n}, got {self.sigma}")
        for name, times in (("s_times", self.s_times), ("t_times", self.t_times)):
            if len(times) != self.n:
                raise ValueError(f"{name} must have length n = {self.n}")
            prev = 0.0  # implicit origin time
            for v in times:
                if v - prev <= MIN_KNOT_GAP:
                    raise DegenerateGridError(
                        f"{name} must be strictly increasing from 0 with gaps > {MIN_KNOT_GAP:g}"
                    )
                prev = v

    def sigma_of(self, i: int) -> int:
        return self.sigma[i - 1]


def uniform_spec(sigma: Sequence[int], horizon: float = 1.0) -> PermutationSpec:
    """Spec with equally spaced times on (0, horizon]."""
    n = len(sigma)
    times = tuple(horizon * (i + 1) / n for i in range(n))
    return PermutationSpec(n, tuple(sigma), times, times)


@dataclass(frozen=True)
class CrossingSet:
    """Rows strictly dominated in both coordinates by a later point."""

    members: tuple[int, ...]

    @property
    def q(self) -> int:
        return len(self.members)


def crossing_set(spec: PermutationSpec) -> CrossingSet:
    members = []
    for i in range(1, spec.n + 1):
        si = spec.sigma_of(i)
        if any(spec.sigma_of(k) > si for k in range(i + 1, spec.n + 1)):
            members.append(i)
    return CrossingSet(tuple(members))


def span(spec: PermutationSpec) -> tuple[Cell, ...]:
    """Union of the staircase rectangles {1..i} x {1..sigma(i)}, row-major."""
    cells = []
    max_later = 0
    col_limit = [0] * (spec.n + 1)
    for i in range(spec.n, 0, -1):
        max_later = max(max_later, spec.sigma_of(i))
        col_limit[i] = max_later
    for i in range(1, spec.n + 1):
        for j in range(1, col_limit[i] + 1):
            cells.append(Cell(i, j))
    return tuple(cells)


def spec_variances(spec: PermutationSpec, cells: Sequence[Cell]) -> np.ndarray:
    """Rectangle areas (kernel variances) for the given cells."""
    s = (0.0,) + spec.s_times
    t = (0.0,) + spec.t_times
    return np.array([(s[c.row] - s[c.row - 1]) * (t[c.col] - t[c.col - 1]) for c in cells])


@dataclass(frozen=True)
class GammaTauAssignment:
    """Selection columns gamma (all rows) and substitution columns tau (crossing rows)."""

    K: frozenset[int]
    gamma: dict[int, int]
    tau: dict[int, int]


@dataclass(frozen=True)
class ShiftCheck:
    K: frozenset[int]
    row: int
    role: str  # "gamma" or "tau"
    pool: tuple[int, ...]
    excluded: tuple[int, ...]
    chosen: Optional[int]

    @property
    def ok(self) -> bool:
        return self.chosen is not None


@dataclass(frozen=True)
class ShiftLemmaReport:
    checks: tuple[ShiftCheck, ...]

    @property
    def ok(self) -> bool:
        return all(c.ok for c in self.checks)

    @property
    def failures(self) -> tuple[ShiftCheck, ...]:
        return tuple(c for c in self.checks if not c.ok)


def _select_columns(
    spec: PermutationSpec,
    K: frozenset[int],
    log: Optional[list[ShiftCheck]] = None,
) -> GammaTauAssignment:
    """Run the staged gamma/tau selection for one crossing subset K.

    Stage r handles the r-th crossing row.  The exclusions at each stage are
    the gamma columns already fixed for crossing rows in K and the tau
    columns already fixed for crossing rows outside K; non-crossing rows are
    then assigned their selection column against the final exclusion set.
    """
    J = crossing_set(spec).members
    if not K <= set(J):
        raise ValueError(f"K = {set(K)} must be a subset of the crossing set {set(J)}")
    gamma: dict[int, int] = {}
    tau: dict[int, int] = {}

    def exclusions(stage_rows: Sequence[int]) -> set[int]:
        out = set()
        for j in stage_rows:
            out.add(gamma[j] if j in K else tau[j])
        return out

    def pick(row: int, role: str, pool: set[int], excl: set[int],
             maximize: bool, bound: int) -> int:
        if maximize:
            candidates = [c for c in pool if c <= bound and c not in excl]
        else:
            candidates = [c for c in pool if c >= bound and c not in excl]
        chosen = (max(candidates) if maximize else min(candidates)) if candidates else None
        if log is not None:
            log.append(ShiftCheck(K, row, role, tuple(sorted(pool)),
                                  tuple(sorted(excl)), chosen))
        if chosen is None:
            raise EmptySelectionError(
                f"no admissible {role} column for row {row}, sigma={spec.sigma}, K={sorted(K)}"
            )
        return chosen

    for r, i in enumerate(J):
        prior = J[:r]
        excl = exclusions(prior)
        sigma_pool = {spec.sigma_of(j) for j in J[: r + 1]}
        shift_pool = {spec.sigma_of(j) + 1 for j in J[: r + 1]}
        gamma[i] = pick(i, "gamma", sigma_pool, excl, True, spec.sigma_of(i))
        tau[i] = pick(i, "tau", shift_pool, excl, False, spec.sigma_of(i) + 1)

    final_excl = exclusions(J)
    sigma_J = {spec.sigma_of(j) for j in J}
    for i in range(1, spec.n + 1):
        if i in gamma:
            continue
        pool = sigma_J | {spec.sigma_of(i)}
        gamma[i] = pick(i, "gamma", pool, final_excl, True, spec.sigma_of(i))

    return GammaTauAssignment(K, gamma, tau)


def gamma_tau(spec: PermutationSpec, K: frozenset[int] | set[int]) -> GammaTauAssignment:
    return _select_columns(spec, frozenset(K))


def assert_shift_lemmas(spec: PermutationSpec, K: Optional[frozenset[int]] = None) -> ShiftLemmaReport:
    """Diagnostic: record every selection pool and whether it was nonempty.

    Runs the selection for one subset K, or for every subset of the crossing
    set when K is None.  Never raises; empty pools are reported as failed
    checks instead.
    """
    checks: list[ShiftCheck] = []
    subsets = [frozenset(K)] if K is not None else list(_crossing_subsets(spec))
    for sub in subsets:
        log: list[ShiftCheck] = []
        try:
            _select_columns(spec, sub, log)
        except EmptySelectionError:
            pass
        checks.extend(log)
    return ShiftLemmaReport(tuple(checks))


def _crossing_subsets(spec: PermutationSpec) -> Iterator[frozenset[int]]:
    """Subsets of the crossing set, full set first, empty set last."""
    J = crossing_set(spec).members
    q = len(J)
    for mask in range(2 ** q - 1, -1, -1):
        yield frozenset(J[m] for m in range(q) if mask & (1 << (q - 1 - m)))


@dataclass(frozen=True)
class CellFactor:
    """Kernel factor of one cell: density (E) or gradient (B).

    The kernel argument is z[cell] - z[shift] when shift is set (substitution
    cells of crossing rows), otherwise z[cell].
    """

    cell: Cell
    kind: str  # "E" or "B"
    shift: Optional[Cell] = None


@dataclass(frozen=True)
class IbpTerm:
    """One summand of the expansion over a crossing subset K."""

    K: frozenset[int]
    sign: int
    gamma: tuple[int, ...]  # selection column per row, index i-1
    tau: dict[int, int]  # substitution column per crossing row
    factors: tuple[CellFactor, ...]  # one per integration cell, row-major
    b_arg_sets: tuple[frozenset[Cell], ...]  # drift argument cells per row

    def __post_init__(self) -> None:
        b_cells = self.b_cells
        n = len(self.gamma)
        if len(b_cells) != n:
            raise ValueError(f"expected {n} gradient cells, got {len(b_cells)}")
        rows = [c.row for c in b_cells]
        cols = [c.col for c in b_cells]
        if len(set(rows)) != n or len(set(cols)) != n:
            raise ValueError(
                f"gradient cells must have pairwise distinct rows and columns, got {b_cells}"
            )
        if self.sign not in (-1, 1):
            raise ValueError("sign must be +1 or -1")

    @property
    def b_cells(self) -> tuple[Cell, ...]:
        return tuple(f.cell for f in self.factors if f.kind == "B")

    @property
    def cells(self) -> tuple[Cell, ...]:
        return tuple(f.cell for f in self.factors)


def expand(spec: PermutationSpec) -> tuple[IbpTerm, ...]:
    """All 2^q expansion terms, K ordered from the full crossing set down to empty.

    The sign of the K term is (-1)^{#K} * (-1)^{n - q}: each of the n row
    integrations by parts contributes a minus sign, and splitting the
    derivative of a kernel pair on a crossing row flips the sign of the
    branch that moves the gradient to the substitution cell.
    """
    J = crossing_set(spec).members
    q = len(J)
    n = spec.n
    span_cells = span(spec)
    terms = []
    for K in _crossing_subsets(spec):
        assignment = _select_columns(spec, K)
        gamma = assignment.gamma
        tau = assignment.tau

        special: dict[Cell, CellFactor] = {}
        for i in J:
            g_cell = Cell(i, gamma[i])
            t_cell = Cell(i, tau[i])
            if i in K:
                special[g_cell] = CellFactor(g_cell, "B")
                special[t_cell] = CellFactor(t_cell, "E", shift=g_cell)
            else:
                special[g_cell] = CellFactor(g_cell, "E")
                special[t_cell] = CellFactor(t_cell, "B", shift=g_cell)
        for i in range(1, n + 1):
            if i in J:
                continue
            g_cell = Cell(i, gamma[i])
            special[g_cell] = CellFactor(g_cell, "B")

        missing = [c for c in special if c not in span_cells]
        if missing:
            raise EmptySelectionError(
                f"selection left the span: {missing} for sigma={spec.sigma}, K={sorted(K)}"
            )
        factors = tuple(special.get(c, CellFactor(c, "E")) for c in span_cells)

        selected = frozenset(Cell(j, gamma[j]) for j in J)
        args = []
        for i in range(1, n + 1):
            lam = {Cell(k, l) for k in range(1, i + 1) for l in range(1, spec.sigma_of(i) + 1)}
            args.append(frozenset(lam - selected) | {Cell(i, gamma[i])})

        sign = (-1) ** len(K) * (-1) ** (n - q)
        terms.append(
            IbpTerm(
                K=K,
                sign=sign,
                gamma=tuple(gamma[i] for i in range(1, n + 1)),
                tau=dict(tau),
                factors=factors,
                b_arg_sets=tuple(args),
            )
        )
    return tuple(terms)


@dataclass(frozen=True)
class OrientationPoint:
    """Initial per-row view before shifts: IBP cell and substitution cell."""

    row: int
    ibp_cell: Cell
    substitution_cell: Optional[Cell]


def orientation_points(spec: PermutationSpec) -> tuple[OrientationPoint, ...]:
    J = set(crossing_set(spec).members)
    out = []
    for i in range(1, spec.n + 1):
        si = spec.sigma_of(i)
        sub = Cell(i, si + 1) if i in J else None
        out.append(OrientationPoint(i, Cell(i, si), sub))
    return tuple(out)


def term_to_dict(term: IbpTerm) -> dict:
    """JSON-ready view: K, sign, gradient cells, density cells, drift arguments."""
    return {
        "K": sorted(term.K),
        "sign": term.sign,
        "B_cells": [[c.row, c.col] for c in term.b_cells],
        "E_cells": [[f.cell.row, f.cell.col] for f in term.factors if f.kind == "E"],
        "b_arg_sets": [
            sorted([c.row, c.col] for c in args) for args in term.b_arg_sets
        ],
    }


def all_permutation_specs(n: int, horizon: float = 1.0) -> Iterator[PermutationSpec]:
    """Uniform-time specs for every permutation of {1..n}."""
    for sig in permutations(range(1, n + 1)):
        yield uniform_spec(sig, horizon)
