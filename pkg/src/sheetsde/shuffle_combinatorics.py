"""Shuffle families and the cell partitions of product order-regions.

Two constructions are provided.

Blockwise-increasing permutation families partition the m-fold product of a
chain region (k points ordered decreasingly in both coordinates between two
corner points) into cells indexed by a pair of family members: one member
ranks the s-coordinates, the other the t-coordinates, rank 1 being the
largest.  Within every block the ranks increase along the block positions,
which is automatic for points of the product region.

Split-index families handle regions whose points are ordered in one
coordinate across all blocks while the other coordinate splits into an upper
and a lower group per block.  The groups carry fixed token numbers
xi(i, j) = j + i(k+n) and zeta(i, j) = k + j + i(k+n); a cell is indexed by
two token assignments (ascending coordinate gets ascending token, which
makes tokens decrease along each block) together with one blockwise
increasing permutation for the totally ordered coordinate.

Members are represented as tuples over global 1-based positions: entry p-1
is the rank (or token) assigned to position p.  Position p belongs to block
(p-1) // arity at in-block slot (p-1) % arity + 1.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from math import factorial
from typing import Optional, Sequence

import numpy as np

from .brownian_sheet import keyed_generator
from .plane_geometry import PlanePoint

#: members are enumerated only while m * (k + n) stays at or below this
ENUMERATION_LIMIT = 12


class NotInProductError(ValueError):
    """The supplied points do not lie in the m-fold product region."""


class DegenerateTiesError(ValueError):
    """Coordinate ties make the cell of the points ill-defined."""


# ---------------------------------------------------------------------------
# families
# ---------------------------------------------------------------------------


def _block_partitions(values: tuple[int, ...], block_size: int):
    """All splits of `values` into consecutive blocks of fixed size, as tuples."""
    if not values:
        yield ()
        return
    for head in combinations(values, block_size):
        rest = tuple(v for v in values if v not in head)
        for tail in _block_partitions(rest, block_size):
            yield (head,) + tail


def _guard_enumeration(total: int) -> None:
    if total > ENUMERATION_LIMIT:
        raise ValueError(
            f"enumeration limited to {ENUMERATION_LIMIT} positions, got {total}"
        )


@dataclass(frozen=True)
class BlockIncreasingFamily:
    """Permutations of {1..mk} increasing along each of the m blocks."""

    m: int
    k: int
    members: tuple[tuple[int, ...], ...]

    @property
    def expected_count(self) -> int:
        return factorial(self.m * self.k) // factorial(self.k) ** self.m


def enumerate_block_increasing(m: int, k: int) -> BlockIncreasingFamily:
    if m < 1 or k < 1:
        raise ValueError("need m >= 1 and k >= 1")
    total = m * k
    _guard_enumeration(total)
    members = []
    for blocks in _block_partitions(tuple(range(1, total + 1)), k):
        member = []
        for block in blocks:
            member.extend(sorted(block))  # increasing along the block
        members.append(tuple(member))
    return BlockIncreasingFamily(m, k, tuple(members))


def xi_token(i: int, j: int, k: int, n: int) -> int:
    """Token of upper-group slot j (1..k) in block i (0-based)."""
    return j + i * (k + n)


def zeta_token(i: int, j: int, k: int, n: int) -> int:
    """Token of lower-group slot j (1..n) in block i (0-based)."""
    return k + j + i * (k + n)


@dataclass(frozen=True)
class SplitIndexFamily:
    """Assignments of the group tokens, decreasing along each block.

    Members map group positions (in block-major order) to tokens; ascending
    coordinate order receives ascending tokens, hence within a block the
    token decreases as the in-block slot j increases.
    """

    m: int
    group_size: int
    tokens: tuple[int, ...]
    members: tuple[tuple[int, ...], ...]

    @property
    def expected_count(self) -> int:
        return factorial(self.m * self.group_size) // factorial(self.group_size) ** self.m


def enumerate_split_family(m: int, k: int, n: int, group: str) -> SplitIndexFamily:
    """Family for the xi (upper, size k) or zeta (lower, size n) group."""
    if group not in ("xi", "zeta"):
        raise ValueError("group must be 'xi' or 'zeta'")
    size = k if group == "xi" else n
    if m < 1 or size < 1:
        raise ValueError("need m >= 1 and a positive group size")
    _guard_enumeration(m * size)
    if group == "xi":
        tokens = tuple(xi_token(i, j, k, n) for i in range(m) for j in range(1, k + 1))
    else:
        tokens = tuple(zeta_token(i, j, k, n) for i in range(m) for j in range(1, n + 1))
    members = []
    for blocks in _block_partitions(tokens, size):
        member = []
        for block in blocks:
            member.extend(sorted(block, reverse=True))  # decreasing along the block
        members.append(tuple(member))
    return SplitIndexFamily(m, size, tokens, tuple(members))


# ---------------------------------------------------------------------------
# regions
# ---------------------------------------------------------------------------

NABLA_KINDS = ("nabla", "nabla_tilde")
SPLIT_KINDS = ("lambda", "lambda_tilde", "delta", "delta_tilde")


@dataclass(frozen=True)
class RegionDescriptor:
    """Order region with bounds (s_low, s_mid, s_high) x (t_low, t_mid, t_high).

    nabla kinds: k points, both coordinate chains descending in the slot
    index, inside (s_low, s_high) x (t_low, t_high); the mid entries are
    unused.  Split kinds: k + n points; for `lambda`/`delta` the s-chain
    splits at s_mid (slots 1..k above, k+1..k+n below) and the t-chain is
    total; `delta` additionally requires the slot-k t-coordinate to exceed
    t_mid.  The tilde variants swap the roles of s and t.
    """

    kind: str
    k: int
    n: int = 0
    s_low: float = 0.0
    s_mid: Optional[float] = None
    s_high: float = 1.0
    t_low: float = 0.0
    t_mid: Optional[float] = None
    t_high: float = 1.0

    def __post_init__(self) -> None:
        if self.kind not in NABLA_KINDS + SPLIT_KINDS:
            raise ValueError(f"unknown region kind {self.kind!r}")
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if not self.s_low < self.s_high or not self.t_low < self.t_high:
            raise ValueError("bounds must be increasing")
        if self.kind in NABLA_KINDS:
            if self.n != 0:
                raise ValueError(f"{self.kind} has a single group, n must be 0")
        else:
            if self.n < 1:
                raise ValueError(f"{self.kind} needs n >= 1")
            split_mid = self.s_mid if self.kind in ("lambda", "delta") else self.t_mid
            if split_mid is None:
                raise ValueError(f"{self.kind} needs the split coordinate's mid bound")
            if self.kind in ("lambda", "delta"):
                if not self.s_low < self.s_mid < self.s_high:
                    raise ValueError("need s_low < s_mid < s_high")
            else:
                if not self.t_low < self.t_mid < self.t_high:
                    raise ValueError("need t_low < t_mid < t_high")
            if self.kind == "delta" and self.t_mid is None:
                raise ValueError("delta needs t_mid for its extra constraint")
            if self.kind == "delta_tilde" and self.s_mid is None:
                raise ValueError("delta_tilde needs s_mid for its extra constraint")

    @property
    def arity(self) -> int:
        return self.k if self.kind in NABLA_KINDS else self.k + self.n


def _chain_desc(x: np.ndarray, low: float, high: float) -> np.ndarray:
    """Rows whose entries descend strictly and stay inside (low, high)."""
    ok = (x[..., -1] > low) & (x[..., 0] < high)
    if x.shape[-1] > 1:
        ok &= np.all(x[..., 1:] < x[..., :-1], axis=-1)
    return ok


def membership(region: RegionDescriptor, points: Sequence[PlanePoint]) -> bool:
    """Exact chain test for one block of points in slot order."""
    if len(points) != region.arity:
        raise ValueError(f"expected {region.arity} points, got {len(points)}")
    s = np.array([[p.s for p in points]])
    t = np.array([[p.t for p in points]])
    return bool(membership_batch(region, s, t)[0])


def membership_batch(region: RegionDescriptor, s: np.ndarray, t: np.ndarray) -> np.ndarray:
    """Vectorized membership; s and t have shape (N, arity) in slot order."""
    k, n = region.k, region.n
    if region.kind in NABLA_KINDS:
        return _chain_desc(s, region.s_low, region.s_high) & _chain_desc(
            t, region.t_low, region.t_high
        )
    if region.kind in ("lambda", "delta"):
        ok = (
            _chain_desc(s[:, :k], region.s_mid, region.s_high)
            & _chain_desc(s[:, k:], region.s_low, region.s_mid)
            & _chain_desc(t, region.t_low, region.t_high)
        )
        if region.kind == "delta":
            ok &= t[:, k - 1] > region.t_mid
        return ok
    # lambda_tilde / delta_tilde: roles of s and t swap
    ok = (
        _chain_desc(t[:, :k], region.t_mid, region.t_high)
        & _chain_desc(t[:, k:], region.t_low, region.t_mid)
        & _chain_desc(s, region.s_low, region.s_high)
    )
    if region.kind == "delta_tilde":
        ok &= s[:, k - 1] > region.s_mid
    return ok


def _sorted_desc(rng: np.random.Generator, size: tuple[int, int], low: float, high: float) -> np.ndarray:
    u = rng.uniform(low, high, size=size)
    u.sort(axis=1)
    return u[:, ::-1]


def sample_region_batch(region: RegionDescriptor, n_samples: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Uniform draws from the region; returns (s, t) of shape (N, arity).

    Chain groups are sampled as sorted uniforms (uniform on the order
    simplex); the delta kinds reject against their extra constraint.
    """
    rng = keyed_generator(seed)
    k, n = region.k, region.n
    out_s = np.empty((0, region.arity))
    out_t = np.empty((0, region.arity))
    need = n_samples
    while need > 0:
        batch = max(need, 128)
        if region.kind in NABLA_KINDS:
            s = _sorted_desc(rng, (batch, k), region.s_low, region.s_high)
            t = _sorted_desc(rng, (batch, k), region.t_low, region.t_high)
        elif region.kind in ("lambda", "delta"):
            s = np.concatenate(
                [
                    _sorted_desc(rng, (batch, k), region.s_mid, region.s_high),
                    _sorted_desc(rng, (batch, n), region.s_low, region.s_mid),
                ],
                axis=1,
            )
            t = _sorted_desc(rng, (batch, k + n), region.t_low, region.t_high)
        else:
            s = _sorted_desc(rng, (batch, k + n), region.s_low, region.s_high)
            t = np.concatenate(
                [
                    _sorted_desc(rng, (batch, k), region.t_mid, region.t_high),
                    _sorted_desc(rng, (batch, n), region.t_low, region.t_mid),
                ],
                axis=1,
            )
        keep = membership_batch(region, s, t)
        s, t = s[keep], t[keep]
        take = min(need, s.shape[0])
        out_s = np.concatenate([out_s, s[:take]])
        out_t = np.concatenate([out_t, t[:take]])
        need -= take
    return out_s, out_t


def sample_region(region: RegionDescriptor, seed: int) -> tuple[PlanePoint, ...]:
    s, t = sample_region_batch(region, 1, seed)
    return tuple(PlanePoint(float(a), float(b)) for a, b in zip(s[0], t[0]))


def sample_product_batch(region: RegionDescriptor, m: int, n_samples: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """m independent blocks per sample; shape (N, m * arity), block-major."""
    parts = [sample_region_batch(region, n_samples, seed + 1000003 * i) for i in range(m)]
    return (
        np.concatenate([p[0] for p in parts], axis=1),
        np.concatenate([p[1] for p in parts], axis=1),
    )


# ---------------------------------------------------------------------------
# locating cells
# ---------------------------------------------------------------------------


def _ranks_desc(x: np.ndarray) -> np.ndarray:
    """Descending ranks per row: 1 for the largest entry."""
    order = np.argsort(-x, axis=1, kind="stable")
    ranks = np.empty_like(order)
    np.put_along_axis(ranks, order, np.arange(1, x.shape[1] + 1)[None, :].repeat(x.shape[0], axis=0), axis=1)
    return ranks


def _check_ties(*arrays: np.ndarray) -> np.ndarray:
    """Rows having any tied coordinates."""
    tied = np.zeros(arrays[0].shape[0], dtype=bool)
    for x in arrays:
        srt = np.sort(x, axis=1)
        tied |= np.any(np.diff(srt, axis=1) == 0.0, axis=1)
    return tied


def _product_membership(region: RegionDescriptor, m: int, s: np.ndarray, t: np.ndarray) -> np.ndarray:
    a = region.arity
    ok = np.ones(s.shape[0], dtype=bool)
    for b in range(m):
        ok &= membership_batch(region, s[:, b * a : (b + 1) * a], t[:, b * a : (b + 1) * a])
    return ok


def locate_cell_batch(region: RegionDescriptor, m: int, s: np.ndarray, t: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Descending-rank label pair for product points of a nabla-kind region.

    Returns (sigma, gamma) of shape (N, m*k).  Raises on ties or points
    outside the product region.
    """
    if region.kind not in NABLA_KINDS:
        raise ValueError("locate_cell_batch applies to the single-group region kinds")
    if np.any(_check_ties(s, t)):
        raise DegenerateTiesError("tied coordinates")
    if not np.all(_product_membership(region, m, s, t)):
        raise NotInProductError("points outside the product region")
    sigma = _ranks_desc(s)
    gamma = _ranks_desc(t)
    return sigma, gamma


def locate_cell(m: int, k: int, points: Sequence[PlanePoint],
                region: Optional[RegionDescriptor] = None) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """Cell of one product point: blockwise-increasing rank pair (sigma, gamma)."""
    if region is None:
        region = RegionDescriptor("nabla", k)
    if len(points) != m * k:
        raise ValueError(f"expected {m * k} points, got {len(points)}")
    s = np.array([[p.s for p in points]])
    t = np.array([[p.t for p in points]])
    sigma, gamma = locate_cell_batch(region, m, s, t)
    sig, gam = tuple(int(v) for v in sigma[0]), tuple(int(v) for v in gamma[0])
    for member, name in ((sig, "sigma"), (gam, "gamma")):
        if not _is_block_increasing(member, m, k):
            raise AssertionError(f"{name} rank labels not blockwise increasing: {member}")
    return sig, gam


def _is_block_increasing(member: tuple[int, ...], m: int, size: int) -> bool:
    for i in range(m):
        block = member[i * size : (i + 1) * size]
        if any(block[j + 1] <= block[j] for j in range(size - 1)):
            return False
    return True


def _tokens_by_coordinate(tokens: np.ndarray, coords: np.ndarray) -> np.ndarray:
    """Assign sorted tokens in ascending coordinate order, rowwise.

    coords has shape (N, g); returns (N, g) where column p holds the token
    given to position p.
    """
    order = np.argsort(coords, axis=1, kind="stable")  # ascending coordinate
    out = np.empty(coords.shape, dtype=int)
    sorted_tokens = np.broadcast_to(np.sort(tokens), coords.shape)
    np.put_along_axis(out, order, sorted_tokens, axis=1)
    return out


def locate_cell_split_batch(region: RegionDescriptor, m: int, s: np.ndarray, t: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Token assignments (pi, rho) and rank labels sigma for split regions.

    pi covers the upper-group positions (slots 1..k of each block), rho the
    lower-group positions; sigma ranks the totally ordered coordinate over
    all positions, descending.
    """
    if region.kind not in SPLIT_KINDS:
        raise ValueError("locate_cell_split_batch applies to the split region kinds")
    if np.any(_check_ties(s, t)):
        raise DegenerateTiesError("tied coordinates")
    if not np.all(_product_membership(region, m, s, t)):
        raise NotInProductError("points outside the product region")
    k, n = region.k, region.n
    a = k + n
    upper_cols = np.concatenate([np.arange(b * a, b * a + k) for b in range(m)])
    lower_cols = np.concatenate([np.arange(b * a + k, (b + 1) * a) for b in range(m)])
    xi_tokens = np.array([xi_token(i, j, k, n) for i in range(m) for j in range(1, k + 1)])
    zeta_tokens = np.array([zeta_token(i, j, k, n) for i in range(m) for j in range(1, n + 1)])
    # the split coordinate is s for lambda/delta, t for the tilde kinds
    split = s if region.kind in ("lambda", "delta") else t
    total = t if region.kind in ("lambda", "delta") else s
    pi = _tokens_by_coordinate(xi_tokens, split[:, upper_cols])
    rho = _tokens_by_coordinate(zeta_tokens, split[:, lower_cols])
    sigma = _ranks_desc(total)
    return pi, rho, sigma


def locate_cell_split(m: int, k: int, n: int, points: Sequence[PlanePoint],
                      region: Optional[RegionDescriptor] = None) -> tuple[tuple[int, ...], tuple[int, ...], tuple[int, ...]]:
    """Cell of one split-region product point: (pi, rho, sigma).

    pi and rho are token tuples over the upper/lower group positions in
    block-major order; sigma is the blockwise-increasing rank tuple of the
    totally ordered coordinate.
    """
    if region is None:
        region = RegionDescriptor("lambda", k, n, s_mid=0.5)
    if len(points) != m * (k + n):
        raise ValueError(f"expected {m * (k + n)} points, got {len(points)}")
    s = np.array([[p.s for p in points]])
    t = np.array([[p.t for p in points]])
    pi, rho, sigma = locate_cell_split_batch(region, m, s, t)
    pi_t = tuple(int(v) for v in pi[0])
    rho_t = tuple(int(v) for v in rho[0])
    sig_t = tuple(int(v) for v in sigma[0])
    # tokens must decrease along each block (ascending coordinate, ascending token)
    for member, size in ((pi_t, k), (rho_t, n)):
        for i in range(m):
            block = member[i * size : (i + 1) * size]
            if any(block[j + 1] >= block[j] for j in range(size - 1)):
                raise AssertionError(f"token labels not blockwise decreasing: {member}")
    if not _is_block_increasing(sig_t, m, k + n):
        raise AssertionError(f"sigma rank labels not blockwise increasing: {sig_t}")
    return pi_t, rho_t, sig_t


# ---------------------------------------------------------------------------
# cell predicates (independent of locate; used by the partition scans)
# ---------------------------------------------------------------------------


def _inverse_permutation(member: Sequence[int]) -> np.ndarray:
    inv = np.empty(len(member), dtype=int)
    for pos, val in enumerate(member):
        inv[val - 1] = pos
    return inv


def cell_membership_batch(region: RegionDescriptor, m: int, sigma: Sequence[int],
                          gamma: Sequence[int], s: np.ndarray, t: np.ndarray) -> np.ndarray:
    """Paired-chain predicate of one (sigma, gamma) cell of a nabla product.

    The cell requires the points (s at rank p of sigma, t at rank p of gamma)
    to form a strictly descending chain in both coordinates inside the
    region's box.
    """
    if region.kind not in NABLA_KINDS:
        raise ValueError("cell predicate applies to the single-group region kinds")
    inv_sig = _inverse_permutation(sigma)
    inv_gam = _inverse_permutation(gamma)
    s_chain = s[:, inv_sig]
    t_chain = t[:, inv_gam]
    return _chain_desc(s_chain, region.s_low, region.s_high) & _chain_desc(
        t_chain, region.t_low, region.t_high
    )


def cell_membership_split_batch(region: RegionDescriptor, m: int, pi: Sequence[int],
                                rho: Sequence[int], sigma: Sequence[int],
                                s: np.ndarray, t: np.ndarray) -> np.ndarray:
    """Chain predicate of one (pi, rho, sigma) cell of a split product region."""
    if region.kind not in SPLIT_KINDS:
        raise ValueError("split cell predicate applies to the split region kinds")
    k, n = region.k, region.n
    a = k + n
    upper_cols = np.concatenate([np.arange(b * a, b * a + k) for b in range(m)])
    lower_cols = np.concatenate([np.arange(b * a + k, (b + 1) * a) for b in range(m)])
    split = s if region.kind in ("lambda", "delta") else t
    total = t if region.kind in ("lambda", "delta") else s
    if region.kind in ("lambda", "delta"):
        split_low, split_mid, split_high = region.s_low, region.s_mid, region.s_high
        total_low, total_high = region.t_low, region.t_high
    else:
        split_low, split_mid, split_high = region.t_low, region.t_mid, region.t_high
        total_low, total_high = region.s_low, region.s_high

    # ascending token = ascending coordinate, so the coordinate read in
    # descending token order must descend
    def group_ok(cols: np.ndarray, member: Sequence[int], low: float, high: float) -> np.ndarray:
        token_order = np.argsort(-np.asarray(member), kind="stable")
        chain = split[:, cols[token_order]]
        return _chain_desc(chain, low, high)

    # the delta kinds' extra constraint is a property of the region, shared
    # by all cells, so the cell predicate only tests the chains
    ok = group_ok(upper_cols, pi, split_mid, split_high)
    ok &= group_ok(lower_cols, rho, split_low, split_mid)
    inv_sig = _inverse_permutation(sigma)
    ok &= _chain_desc(total[:, inv_sig], total_low, total_high)
    return ok


# ---------------------------------------------------------------------------
# partition scan and the product-of-integrals identity
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PartitionReport:
    """Outcome of a sampled partition scan over a product region.

    For every sampled product point the report counts how many cells claim
    it and whether the located cell is the claiming one.  A valid partition
    has zero uncovered, multiply covered, and mismatched samples.
    """

    kind: str
    m: int
    k: int
    n: int
    n_samples: int
    n_cells: int
    uncovered: int
    multiply_covered: int
    locate_mismatches: int

    @property
    def ok(self) -> bool:
        return self.uncovered == 0 and self.multiply_covered == 0 and self.locate_mismatches == 0


def _enumerate_cells(region: RegionDescriptor, m: int) -> list[tuple]:
    if region.kind in NABLA_KINDS:
        fam = enumerate_block_increasing(m, region.k).members
        return [(sig, gam) for sig in fam for gam in fam]
    xi_fam = enumerate_split_family(m, region.k, region.n, "xi").members
    zeta_fam = enumerate_split_family(m, region.k, region.n, "zeta").members
    sig_fam = enumerate_block_increasing(m, region.k + region.n).members
    return [(pi, rho, sig) for pi in xi_fam for rho in zeta_fam for sig in sig_fam]


def partition_report(region: RegionDescriptor, m: int, n_samples: int, seed: int) -> PartitionReport:
    """Sample the product region and scan every cell's predicate.

    Checks that the cells cover each sample exactly once and that the
    located cell is the covering one.
    """
    s, t = sample_product_batch(region, m, n_samples, seed)
    cells = _enumerate_cells(region, m)
    cell_index = {cell: ci for ci, cell in enumerate(cells)}
    if region.kind in NABLA_KINDS:
        sig, gam = locate_cell_batch(region, m, s, t)
        located = np.array([
            cell_index.get((tuple(map(int, a)), tuple(map(int, b))), -1)
            for a, b in zip(sig, gam)
        ])
    else:
        pi, rho, sig = locate_cell_split_batch(region, m, s, t)
        located = np.array([
            cell_index.get((tuple(map(int, a)), tuple(map(int, b)), tuple(map(int, c))), -1)
            for a, b, c in zip(pi, rho, sig)
        ])
    hits = np.zeros(n_samples, dtype=int)
    claimed = np.full(n_samples, -1, dtype=int)
    for ci, cell in enumerate(cells):
        if region.kind in NABLA_KINDS:
            mask = cell_membership_batch(region, m, cell[0], cell[1], s, t)
        else:
            mask = cell_membership_split_batch(region, m, cell[0], cell[1], cell[2], s, t)
        hits += mask
        claimed[mask] = ci
    uncovered = int(np.sum(hits == 0))
    multiple = int(np.sum(hits > 1))
    mismatches = int(np.sum((hits == 1) & (claimed != located)))
    return PartitionReport(region.kind, m, region.k, region.n, n_samples, len(cells),
                           uncovered, multiple, mismatches)


@dataclass(frozen=True)
class ProductIdentityReport:
    """Squared single-block integral vs the sum of per-cell integrals."""

    k: int
    lhs: float
    lhs_se: float
    rhs: float
    rhs_se: float
    n_cells: int

    @property
    def gap_se(self) -> float:
        return abs(self.lhs - self.rhs) / max(np.hypot(self.lhs_se, self.rhs_se), 1e-300)

    def within(self, se_width: float = 4.0) -> bool:
        return self.gap_se <= se_width


def _cell_sampler(region: RegionDescriptor, sigma: Sequence[int], gamma: Sequence[int],
                  n_samples: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Uniform draws from one (sigma, gamma) cell of the two-block product.

    The cell factors into a product of two order simplices: the s-chain read
    through sigma descends, independently the t-chain through gamma.  Sorted
    uniforms realize each chain exactly, no rejection.
    """
    size = len(sigma)
    s_chain = _sorted_desc(rng, (n_samples, size), region.s_low, region.s_high)
    t_chain = _sorted_desc(rng, (n_samples, size), region.t_low, region.t_high)
    s = np.empty((n_samples, size))
    t = np.empty((n_samples, size))
    for pos in range(size):
        s[:, pos] = s_chain[:, sigma[pos] - 1]
        t[:, pos] = t_chain[:, gamma[pos] - 1]
    return s, t


def product_identity_check(k: int, slot_functions: Sequence, budget: int = 1_000_000,
                           seed: int = 0, s_high: float = 1.0, t_high: float = 1.0) -> ProductIdentityReport:
    """Monte Carlo check that the squared block integral equals the cell sum.

    slot_functions supplies one vectorized f_j(s, t) per in-block slot; both
    blocks of the product carry the same functions, so the left side is the
    square of a single k-point chain integral, estimated independently of
    the per-cell estimates on the right.
    """
    if len(slot_functions) != k:
        raise ValueError(f"need {k} slot functions, got {len(slot_functions)}")
    region = RegionDescriptor("nabla", k, s_high=s_high, t_high=t_high)
    block_vol = (s_high ** k / factorial(k)) * (t_high ** k / factorial(k))

    s, t = sample_region_batch(region, budget, seed)
    vals = np.ones(budget)
    for j, f in enumerate(slot_functions):
        vals *= f(s[:, j], t[:, j])
    single = float(vals.mean()) * block_vol
    single_se = float(vals.std(ddof=1)) / np.sqrt(budget) * block_vol
    lhs = single ** 2
    lhs_se = 2.0 * abs(single) * single_se  # delta method

    fam = enumerate_block_increasing(2, k).members
    cells = [(sig, gam) for sig in fam for gam in fam]
    per_cell = max(budget // len(cells), 2)
    cell_vol = (s_high ** (2 * k) / factorial(2 * k)) * (t_high ** (2 * k) / factorial(2 * k))
    rng = keyed_generator(seed ^ 0x9E3779B9)
    rhs = 0.0
    rhs_var = 0.0
    for sigma, gamma in cells:
        cs, ct = _cell_sampler(region, sigma, gamma, per_cell, rng)
        cv = np.ones(per_cell)
        for pos in range(2 * k):
            f = slot_functions[pos % k]
            cv *= f(cs[:, pos], ct[:, pos])
        rhs += float(cv.mean()) * cell_vol
        rhs_var += (float(cv.std(ddof=1)) / np.sqrt(per_cell) * cell_vol) ** 2
    return ProductIdentityReport(k, lhs, lhs_se, rhs, float(np.sqrt(rhs_var)), len(cells))
