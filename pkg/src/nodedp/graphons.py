"""Step graphons, random-graph samplers, and L2-type distances.

Matrix norms are normalized: ||A||_2 = sqrt(sum A_ij^2 / n^2), so that an
n x n matrix embedded as an n-equal-block step function on [0,1]^2 has the
same norm as the function.  All distances reported by the minimizers here
are permutation/equipartition minimizations, i.e. upper bounds on the
measure-preserving infimum (exact for equal-block comparisons up to the
permutation class).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterator, NamedTuple

import numpy as np

from .errors import ResourceLimitError
from .graphs import LabeledGraph
from .rng import substream

# -- block matrices and step graphons -----------------------------------------


def _as_symmetric(values) -> np.ndarray:
    vals = np.array(values, dtype=float)
    if vals.ndim != 2 or vals.shape[0] != vals.shape[1]:
        raise ValueError("block matrix must be square")
    if not np.allclose(vals, vals.T, atol=1e-12):
        raise ValueError("block matrix must be symmetric")
    if (vals < -1e-12).any():
        raise ValueError("block matrix entries must be nonnegative")
    vals = np.maximum((vals + vals.T) / 2.0, 0.0)
    vals.flags.writeable = False
    return vals


@dataclass(frozen=True)
class BlockMatrix:
    """Symmetric nonnegative k x k matrix of connection values."""

    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _as_symmetric(self.values))

    @property
    def k(self) -> int:
        return self.values.shape[0]

    def to_text(self) -> str:
        rows = [" ".join(f"{v:.17g}" for v in row) for row in self.values]
        return f"{self.k}\n" + "\n".join(rows) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "BlockMatrix":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        k = int(lines[0])
        vals = [[float(x) for x in ln.split()] for ln in lines[1 : k + 1]]
        return cls(np.array(vals))


@dataclass(frozen=True)
class StepGraphon:
    """Step function on [0,1]^2 with interval blocks.

    boundaries: 0 = t_0 < t_1 < ... < t_k = 1
    values: symmetric k x k matrix; W(x, y) = values[c(x), c(y)] where c(x)
    is the block whose half-open interval [t_c, t_{c+1}) contains x (x = 1
    falls in the last block).
    """

    boundaries: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        bnd = np.array(self.boundaries, dtype=float)
        if bnd.ndim != 1 or bnd.size < 2:
            raise ValueError("boundaries must be a 1-d array with >= 2 entries")
        if not (abs(bnd[0]) < 1e-12 and abs(bnd[-1] - 1.0) < 1e-12):
            raise ValueError("boundaries must start at 0 and end at 1")
        if not (np.diff(bnd) > 0).all():
            raise ValueError("boundaries must be strictly increasing")
        bnd = bnd.copy()
        bnd[0], bnd[-1] = 0.0, 1.0
        bnd.flags.writeable = False
        vals = _as_symmetric(self.values)
        if vals.shape[0] != bnd.size - 1:
            raise ValueError("values size must match number of blocks")
        object.__setattr__(self, "boundaries", bnd)
        object.__setattr__(self, "values", vals)

    @classmethod
    def equal_blocks(cls, values) -> "StepGraphon":
        vals = _as_symmetric(values)
        k = vals.shape[0]
        return cls(np.linspace(0.0, 1.0, k + 1), vals)

    @property
    def k(self) -> int:
        return self.values.shape[0]

    @property
    def block_lengths(self) -> np.ndarray:
        return np.diff(self.boundaries)

    @property
    def max_value(self) -> float:
        return float(self.values.max())

    def block_of(self, x) -> np.ndarray:
        idx = np.searchsorted(self.boundaries, np.asarray(x, dtype=float), side="right") - 1
        return np.clip(idx, 0, self.k - 1)

    def evaluate(self, x, y) -> np.ndarray:
        bx, by = self.block_of(x), self.block_of(y)
        return self.values[bx, by]

    def integral(self) -> float:
        lens = self.block_lengths
        return float(lens @ self.values @ lens)

    def to_text(self) -> str:
        head = f"{self.k}\n" + " ".join(f"{b:.17g}" for b in self.boundaries) + "\n"
        rows = [" ".join(f"{v:.17g}" for v in row) for row in self.values]
        return head + "\n".join(rows) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "StepGraphon":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        k = int(lines[0])
        bnd = np.array([float(x) for x in lines[1].split()])
        vals = [[float(x) for x in ln.split()] for ln in lines[2 : k + 2]]
        return cls(bnd, np.array(vals))


def two_clique_graphon(q: float) -> StepGraphon:
    """Two-block 0/1 graphon with diagonal blocks of sizes q and 1-q.

    Samples are unions of two cliques; the density is q^2 + (1-q)^2.
    """
    if not 0.0 < q < 1.0:
        raise ValueError("q must lie strictly between 0 and 1")
    return StepGraphon(np.array([0.0, q, 1.0]), np.array([[1.0, 0.0], [0.0, 1.0]]))


def step_l2_distance(w1: StepGraphon, w2: StepGraphon) -> float:
    """Exact L2([0,1]^2) distance of two step graphons via common refinement."""
    cuts = np.unique(np.concatenate([w1.boundaries, w2.boundaries]))
    lens = np.diff(cuts)
    mids = (cuts[:-1] + cuts[1:]) / 2.0
    b1, b2 = w1.block_of(mids), w2.block_of(mids)
    v1 = w1.values[np.ix_(b1, b1)]
    v2 = w2.values[np.ix_(b2, b2)]
    return math.sqrt(float(np.einsum("i,j,ij->", lens, lens, (v1 - v2) ** 2)))


# -- normalized matrix norms ---------------------------------------------------


def normalized_l2(a, b) -> float:
    """||a - b||_2 under the 1/n^2 normalization."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    n = a.shape[0]
    return math.sqrt(float(((a - b) ** 2).sum()) / n**2)


# -- equipartitions ------------------------------------------------------------


def canonical_sizes(n: int, k: int) -> list[int]:
    """Class sizes ceil(n/k) for the first n mod k classes, floor(n/k) after."""
    if not 1 <= k <= n:
        raise ValueError("need 1 <= k <= n")
    q, r = divmod(n, k)
    return [q + 1] * r + [q] * (k - r)


@dataclass(frozen=True)
class Equipartition:
    """Assignment [n] -> [k] with every class within 1 of n/k."""

    assignment: np.ndarray

    def __post_init__(self):
        a = np.array(self.assignment, dtype=int)
        if a.ndim != 1:
            raise ValueError("assignment must be one-dimensional")
        k = int(a.max()) + 1 if a.size else 0
        sizes = np.bincount(a, minlength=k)
        n = a.size
        if any(abs(s - n / k) >= 1 for s in sizes):
            raise ValueError("class sizes must be within 1 of n/k")
        a.flags.writeable = False
        object.__setattr__(self, "assignment", a)

    @property
    def n(self) -> int:
        return self.assignment.size

    @property
    def k(self) -> int:
        return int(self.assignment.max()) + 1

    @property
    def sizes(self) -> np.ndarray:
        return np.bincount(self.assignment, minlength=self.k)

    def onehot(self) -> np.ndarray:
        out = np.zeros((self.n, self.k))
        out[np.arange(self.n), self.assignment] = 1.0
        return out


def equipartition_count(n: int, k: int) -> int:
    """Number of assignments with the canonical size profile."""
    sizes = canonical_sizes(n, k)
    count = math.factorial(n)
    for s in sizes:
        count //= math.factorial(s)
    return count


def enumerate_equipartitions(n: int, k: int) -> Iterator[np.ndarray]:
    """Canonical-profile assignments in lexicographic order of the vector."""
    sizes = canonical_sizes(n, k)

    def rec(prefix: list[int], remaining: list[int]) -> Iterator[np.ndarray]:
        if len(prefix) == n:
            yield np.array(prefix, dtype=int)
            return
        for c in range(k):
            if remaining[c] > 0:
                remaining[c] -= 1
                prefix.append(c)
                yield from rec(prefix, remaining)
                prefix.pop()
                remaining[c] += 1

    yield from rec([], list(sizes))


def block_average(q_matrix, pi: Equipartition) -> BlockMatrix:
    """Per-block mean matrix B(pi) of an n x n matrix."""
    q = np.asarray(q_matrix, dtype=float)
    o = pi.onehot()
    sizes = pi.sizes.astype(float)
    sums = o.T @ q @ o
    return BlockMatrix(sums / np.outer(sizes, sizes))


def block_average_grid(q_matrix, pi: Equipartition, n: int) -> BlockMatrix:
    """B(pi) with every entry floored to a multiple of 1/n."""
    b = block_average(q_matrix, pi)
    return BlockMatrix(np.floor(b.values * n + 1e-9) / n)


# -- permutation / equipartition minimized distances ---------------------------


def delta2_hat_blocks(b1: BlockMatrix, b2: BlockMatrix, max_k: int = 8) -> float:
    """min over simultaneous row/column permutations of ||b1^s - b2||_2."""
    if b1.k != b2.k:
        raise ValueError("block counts differ")
    if b1.k > max_k:
        raise ResourceLimitError(f"permutation search limited to k <= {max_k}")
    best = math.inf
    v2 = b2.values
    for perm in itertools.permutations(range(b1.k)):
        p = list(perm)
        v1 = b1.values[np.ix_(p, p)]
        best = min(best, normalized_l2(v1, v2))
    return best


class DeltaFit(NamedTuple):
    value: float
    exact: bool  # False means the value is a best-of-restarts upper bound


def _fit_error(b_vals: np.ndarray, q: np.ndarray, assignment: np.ndarray) -> float:
    expanded = b_vals[np.ix_(assignment, assignment)]
    return normalized_l2(expanded, q)


def delta2_hat_fit(
    b: BlockMatrix,
    q_matrix,
    budget: int = 10**7,
    restarts: int = 20,
    rng: np.random.Generator | None = None,
) -> DeltaFit:
    """min over k-equipartitions pi of ||b_pi - q||_2.

    Exact enumeration when the equipartition count fits the budget; otherwise
    a best-of-restarts swap hill-climb, flagged as an upper bound.
    """
    q = np.asarray(q_matrix, dtype=float)
    n = q.shape[0]
    k = b.k
    if k > n:
        raise ValueError("need k <= n")
    if equipartition_count(n, k) <= budget:
        best = math.inf
        for assignment in enumerate_equipartitions(n, k):
            best = min(best, _fit_error(b.values, q, assignment))
        return DeltaFit(best, True)
    rng = rng if rng is not None else substream(0, "delta2-hat-fit")
    sizes = canonical_sizes(n, k)
    base = np.repeat(np.arange(k), sizes)
    best = math.inf
    for _ in range(restarts):
        assignment = rng.permutation(base)
        current = _fit_error(b.values, q, assignment)
        improved = True
        while improved:
            improved = False
            for i in range(n):
                for j in range(i + 1, n):
                    if assignment[i] == assignment[j]:
                        continue
                    assignment[i], assignment[j] = assignment[j], assignment[i]
                    trial = _fit_error(b.values, q, assignment)
                    if trial < current - 1e-15:
                        current = trial
                        improved = True
                    else:
                        assignment[i], assignment[j] = assignment[j], assignment[i]
        best = min(best, current)
    return DeltaFit(best, False)


# -- agnostic and sampling errors ----------------------------------------------


def _overlap_matrix(lengths: np.ndarray, cuts: np.ndarray) -> np.ndarray:
    """Mass of each ordered cell falling in each [cuts[a], cuts[a+1]) class."""
    starts = np.concatenate([[0.0], np.cumsum(lengths)])[:-1]
    ends = starts + lengths
    lo = np.maximum(starts[:, None], cuts[None, :-1])
    hi = np.minimum(ends[:, None], cuts[None, 1:])
    return np.maximum(hi - lo, 0.0)


def agnostic_error(w: StepGraphon, k: int, max_blocks: int = 6) -> float:
    """Distance from w to the best equal-block k-block approximation.

    Minimizes over reorderings of w's blocks followed by mass-1/k interval
    cuts, with class values set to conditional means.  This searches all
    partitions of [0,1] into k sets of measure 1/k that respect block
    contiguity up to reordering, so the result is an upper bound on the
    unrestricted agnostic error and exact whenever an optimal partition has
    that form (in particular whenever the cuts align with w's boundaries).
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if w.k > max_blocks:
        raise ResourceLimitError(f"agnostic error limited to {max_blocks} blocks")
    lens = w.block_lengths
    vals = w.values
    cuts = np.linspace(0.0, 1.0, k + 1)
    best = math.inf
    for perm in itertools.permutations(range(w.k)):
        p = list(perm)
        mu = _overlap_matrix(lens[p], cuts)  # k_w x k masses
        v = vals[np.ix_(p, p)]
        mean_v2 = float(np.einsum("ia,jb,ij->", mu, mu, v**2))
        b = (k * k) * np.einsum("ia,jb,ij->ab", mu, mu, v)
        err2 = mean_v2 - float((b**2).sum()) / k**2
        best = min(best, max(err2, 0.0))
    return math.sqrt(best)


# -- W-random samples ----------------------------------------------------------


@dataclass(frozen=True)
class WRandomSample:
    """A graph drawn from G_n(rho * W) together with its latent structure."""

    graph: LabeledGraph
    labels: np.ndarray
    edge_probabilities: np.ndarray  # rho * W(x_i, x_j), zero diagonal
    rho: float


def sample_w_random(
    w: StepGraphon, rho: float, n: int, rng: np.random.Generator
) -> WRandomSample:
    """n uniform labels; edge (i,j) present independently w.p. rho*W(x_i,x_j)."""
    if rho * w.max_value > 1.0 + 1e-12:
        raise ValueError(f"rho * sup W = {rho * w.max_value:.6g} exceeds 1")
    if rho < 0:
        raise ValueError("rho must be nonnegative")
    labels = rng.random(n)
    probs = rho * w.evaluate(labels[:, None], labels[None, :])
    np.fill_diagonal(probs, 0.0)
    iu = np.triu_indices(n, 1)
    adj = np.zeros((n, n), dtype=bool)
    adj[iu] = rng.random(len(iu[0])) < probs[iu]
    probs.flags.writeable = False
    labels.flags.writeable = False
    return WRandomSample(LabeledGraph(adj | adj.T), labels, probs, rho)


def sampling_error(sample: WRandomSample, w: StepGraphon) -> float:
    """Label-aligned L2 distance between the edge-probability step function
    (diagonal filled from W) and w itself.

    Vertices are placed on the 1/n grid in increasing label order; the
    result is an upper bound on the permutation-minimized distance, and is
    exact for step graphons once the alignment is fixed.
    """
    xs = np.sort(sample.labels)
    n = xs.size
    m = w.evaluate(xs[:, None], xs[None, :])
    mu = _overlap_matrix(np.full(n, 1.0 / n), w.boundaries)  # n x k_w masses
    v = w.values
    # per grid cell: (m - cell mean of W)^2 + cell variance of W
    cell_means = mu @ v @ mu.T * n**2
    cell_var = np.maximum(mu @ (v**2) @ mu.T * n**2 - cell_means**2, 0.0)
    err2 = float(np.mean((m - cell_means) ** 2 + cell_var))
    return math.sqrt(err2)


# -- G(n,p), G(n,m) and the rewired coupling model ------------------------------


def _graph_from_slots(n: int, slots: np.ndarray) -> LabeledGraph:
    iu = np.triu_indices(n, 1)
    adj = np.zeros((n, n), dtype=bool)
    adj[iu[0][slots], iu[1][slots]] = True
    return LabeledGraph(adj | adj.T)


def sample_gnp(n: int, p: float, rng: np.random.Generator) -> LabeledGraph:
    """Erdos-Renyi graph: each edge independently present with probability p."""
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    iu = np.triu_indices(n, 1)
    adj = np.zeros((n, n), dtype=bool)
    adj[iu] = rng.random(len(iu[0])) < p
    return LabeledGraph(adj | adj.T)


def sample_gnm(n: int, m: int, rng: np.random.Generator) -> LabeledGraph:
    """Uniform graph with exactly m edges."""
    nslots = n * (n - 1) // 2
    if not 0 <= m <= nslots:
        raise ValueError(f"m={m} out of range [0, {nslots}]")
    slots = rng.choice(nslots, size=m, replace=False)
    return _graph_from_slots(n, slots)


def sample_gnm_rewired_coupled(
    n: int, m: int, k: int, rng: np.random.Generator
) -> tuple[LabeledGraph, LabeledGraph]:
    """Stage-one G(n, m+k) sample and the graph after deleting min(deg, k)
    uniformly chosen edges at a uniformly chosen vertex."""
    if k < 0:
        raise ValueError("k must be nonnegative")
    stage1 = sample_gnm(n, m + k, rng)
    v = int(rng.integers(n))
    nbrs = stage1.neighbors(v)
    drop = rng.choice(nbrs, size=min(len(nbrs), k), replace=False) if len(nbrs) else []
    adj = stage1.adjacency.copy()
    for u in drop:
        adj[v, u] = adj[u, v] = False
    return stage1, LabeledGraph(adj)


def sample_gnm_rewired(n: int, m: int, k: int, rng: np.random.Generator) -> LabeledGraph:
    return sample_gnm_rewired_coupled(n, m, k, rng)[1]


def rewired_model_pmf(g0: LabeledGraph, m: int, k: int) -> float:
    """Exact probability that the rewired model with parameters (m, k) outputs g0.

    Stage one is uniform over graphs with m+k edges; deleting j = m+k-e(g0)
    edges at the chosen vertex yields g0.  For j = k the count of compatible
    stage-one graphs per vertex v is C(n-1-d(v), k), each reached with
    probability 1/(n C(d(v)+k, k)); for j < k the chosen vertex loses its
    whole neighborhood, so only vertices isolated in g0 contribute, each via
    C(n-1, j) stage-one graphs reached with probability 1/n.
    """
    n = g0.n
    nslots = n * (n - 1) // 2
    if k < 0 or m < 0 or m + k > nslots:
        raise ValueError("invalid (m, k) for this graph order")
    e0 = g0.edge_count
    if not m <= e0 <= m + k:
        raise ValueError(
            f"graph has {e0} edges, outside the reachable range [{m}, {m + k}]"
        )
    j = m + k - e0
    degs = g0.degrees
    if j == k:
        total = sum(
            math.comb(n - 1 - int(d), k) / math.comb(int(d) + k, k) for d in degs
        )
    else:
        isolated = int((degs == 0).sum())
        total = isolated * math.comb(n - 1, j)
    return total / (n * math.comb(nslots, m + k))
