"""Noise mechanisms, piecewise-exponential output densities, and the
inf-convolution extension operator.

Continuous mechanisms here release a value in [0,1] whose density is
proportional to exp(shape(q)) for a piecewise-linear shape; that family is
closed under the operations the extension needs (shifting by a constant and
pointwise minimum in log space) and admits closed-form normalization, CDF
and inverse CDF, so sampling is deterministic given a stream.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.special import logsumexp

from .errors import ResourceLimitError


def _check_epsilon(epsilon: float) -> float:
    eps = float(epsilon)
    if not (eps > 0 and math.isfinite(eps)):
        raise ValueError(f"epsilon must be a positive finite real, got {epsilon!r}")
    return eps


# -- Laplace -------------------------------------------------------------------


def sample_laplace(scale: float, rng: np.random.Generator, size=None):
    """Laplace(0, scale) via inverse CDF, so replay from a stream is exact."""
    if not scale > 0:
        raise ValueError("scale must be positive")
    u = rng.random(size) - 0.5
    return -scale * np.sign(u) * np.log1p(-2.0 * np.abs(u))


@dataclass(frozen=True)
class LaplaceDensity:
    """Law of center + Laplace(scale) on the whole real line."""

    center: float
    scale: float

    def log_pdf(self, x):
        x = np.asarray(x, dtype=float)
        return -np.abs(x - self.center) / self.scale - math.log(2.0 * self.scale)

    def sample(self, rng: np.random.Generator, size=None):
        return self.center + sample_laplace(self.scale, rng, size)


# -- finite-output mechanisms ----------------------------------------------------


class FiniteMechanism:
    """Distribution over a finite candidate list, normalized in log space."""

    def __init__(self, candidates: Sequence, log_weights) -> None:
        if len(candidates) == 0:
            raise ValueError("candidate list must be nonempty")
        lw = np.asarray(log_weights, dtype=float)
        if lw.shape != (len(candidates),):
            raise ValueError("one log weight per candidate required")
        if not np.isfinite(lw).all():
            raise ValueError("log weights must be finite")
        self.candidates = list(candidates)
        log_probs = lw - logsumexp(lw)
        probs = np.exp(log_probs)
        residue = probs.sum()  # 1 +- a few ulps per candidate after exp()
        self.log_probs = log_probs - math.log(residue)
        probs = probs / residue
        total = probs.sum()
        if abs(total - 1.0) > 1e-12:
            raise AssertionError(f"normalization drift: sum(probs) = {total!r}")
        self._cum = np.cumsum(probs)
        self._cum[-1] = 1.0

    def probabilities(self) -> np.ndarray:
        return np.exp(self.log_probs)

    def sample_index(self, rng: np.random.Generator) -> int:
        return int(np.searchsorted(self._cum, rng.random(), side="right"))

    def sample(self, rng: np.random.Generator):
        return self.candidates[self.sample_index(rng)]

    def sample_indices(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return np.searchsorted(self._cum, rng.random(size), side="right")


def exponential_mechanism_distribution(
    candidates: Sequence, scores, coefficient: float
) -> FiniteMechanism:
    """P(c) proportional to exp(coefficient * score(c))."""
    s = np.asarray(scores, dtype=float)
    if len(candidates) == 0:
        raise ValueError("candidate list must be nonempty")
    if not np.isfinite(s).all():
        raise ValueError("scores must be finite")
    if not (math.isfinite(coefficient) and coefficient >= 0):
        raise ValueError("coefficient must be a finite nonnegative real")
    return FiniteMechanism(candidates, coefficient * s)


def exponential_mechanism(
    candidates: Sequence,
    score: Callable,
    coefficient: float,
    rng: np.random.Generator,
):
    """Sample a candidate with probability proportional to exp(coef * score).

    The caller supplies the calibrated coefficient (for Score with
    sensitivity D and budget eps, eps / (4 D) makes the draw eps/2-DP).
    """
    scores = [score(c) for c in candidates]
    return exponential_mechanism_distribution(candidates, scores, coefficient).sample(rng)


# -- piecewise-linear log shapes -------------------------------------------------


class PiecewiseLinear:
    """Continuous piecewise-linear function: linear between sorted knots."""

    __slots__ = ("xs", "ys")

    def __init__(self, xs, ys) -> None:
        xs = np.asarray(xs, dtype=float)
        ys = np.asarray(ys, dtype=float)
        if xs.ndim != 1 or xs.shape != ys.shape or xs.size < 2:
            raise ValueError("need matching 1-d knot arrays with >= 2 knots")
        if not (np.diff(xs) > 0).all():
            raise ValueError("knots must be strictly increasing")
        self.xs = xs
        self.ys = ys

    def __call__(self, q):
        return np.interp(q, self.xs, self.ys)

    @property
    def lo(self) -> float:
        return float(self.xs[0])

    @property
    def hi(self) -> float:
        return float(self.xs[-1])

    def shift(self, c: float) -> "PiecewiseLinear":
        return PiecewiseLinear(self.xs, self.ys + c)


def _min2(f: PiecewiseLinear, g: PiecewiseLinear) -> PiecewiseLinear:
    if abs(f.lo - g.lo) > 1e-12 or abs(f.hi - g.hi) > 1e-12:
        raise ValueError("domains must agree")
    knots = np.unique(np.concatenate([f.xs, g.xs]))
    fk, gk = f(knots), g(knots)
    extra = []
    for i in range(knots.size - 1):
        d0 = fk[i] - gk[i]
        d1 = fk[i + 1] - gk[i + 1]
        if d0 * d1 < 0:  # strict sign change: one interior crossing
            t = d0 / (d0 - d1)
            extra.append(knots[i] + t * (knots[i + 1] - knots[i]))
    if extra:
        knots = np.unique(np.concatenate([knots, np.array(extra)]))
    return PiecewiseLinear(knots, np.minimum(f(knots), g(knots)))


def piecewise_min(funcs: Sequence[PiecewiseLinear]) -> PiecewiseLinear:
    """Pointwise minimum of piecewise-linear functions on a shared domain."""
    if not funcs:
        raise ValueError("need at least one function")
    out = funcs[0]
    for f in funcs[1:]:
        out = _min2(out, f)
    return out


def _log_e1m(d: np.ndarray) -> np.ndarray:
    """log((exp(d) - 1) / d) elementwise, stable for any real d (0 -> 0)."""
    d = np.asarray(d, dtype=float)
    out = np.empty_like(d)
    small = np.abs(d) < 1e-9
    out[small] = d[small] / 2.0
    pos = (~small) & (d > 0)
    big = pos & (d > 700)
    mid = pos & ~big
    out[mid] = np.log(np.expm1(d[mid])) - np.log(d[mid])
    out[big] = d[big] - np.log(d[big])
    neg = (~small) & (d < 0)
    out[neg] = np.log(-np.expm1(d[neg])) - np.log(-d[neg])
    return out


class PiecewiseExpDensity:
    """Probability density on [lo, hi] proportional to exp(shape(q)).

    The normalizer, CDF and inverse CDF come from the closed-form integral
    of exp over each linear piece; no quadrature or rejection anywhere.
    """

    def __init__(self, shape: PiecewiseLinear) -> None:
        self.shape = shape
        top = float(shape.ys.max())
        h = shape.ys - top  # work in a shifted scale where exp() never overflows
        w = np.diff(shape.xs)
        d = np.diff(h)
        log_pieces = h[:-1] + np.log(w) + _log_e1m(d)
        log_total = float(logsumexp(log_pieces))
        self.log_normalizer = log_total + top
        self._h0 = h[:-1] - log_total  # shifted so piece masses sum to one
        self._beta = d / w
        self._cum = np.concatenate([[0.0], np.cumsum(np.exp(log_pieces - log_total))])
        self._cum[-1] = 1.0

    @property
    def lo(self) -> float:
        return self.shape.lo

    @property
    def hi(self) -> float:
        return self.shape.hi

    def log_pdf(self, q):
        return self.shape(q) - self.log_normalizer

    def pdf(self, q):
        return np.exp(self.log_pdf(q))

    evaluate = pdf

    def cdf(self, q):
        q = np.asarray(q, dtype=float)
        idx = np.clip(np.searchsorted(self.shape.xs, q, side="right") - 1, 0, len(self._h0) - 1)
        t = np.clip(q - self.shape.xs[idx], 0.0, None)
        beta = self._beta[idx]
        part = np.where(
            np.abs(beta * t) < 1e-12,
            np.exp(self._h0[idx]) * t,
            np.exp(self._h0[idx]) * np.expm1(beta * t) / np.where(beta == 0, 1.0, beta),
        )
        return np.clip(self._cum[idx] + part, 0.0, 1.0)

    def inverse_cdf(self, u):
        u = np.asarray(u, dtype=float)
        scalar = u.ndim == 0
        u = np.atleast_1d(np.clip(u, 0.0, 1.0))
        idx = np.clip(np.searchsorted(self._cum, u, side="right") - 1, 0, len(self._h0) - 1)
        tau = u - self._cum[idx]  # remaining mass inside the piece
        beta = self._beta[idx]
        scaled = tau * np.exp(-self._h0[idx])
        with np.errstate(divide="ignore", invalid="ignore"):
            t = np.where(
                np.abs(beta) < 1e-14,
                scaled,
                np.log1p(np.maximum(beta * scaled, -1.0 + 1e-300)) / np.where(beta == 0, 1.0, beta),
            )
        widths = np.diff(self.shape.xs)[idx]
        x = self.shape.xs[idx] + np.clip(t, 0.0, widths)
        return float(x[0]) if scalar else x

    def sample(self, rng: np.random.Generator, size=None):
        return self.inverse_cdf(rng.random(size))


# -- concrete density families ---------------------------------------------------


def truncation_rate(n: int, rho: float) -> float:
    """r_n = n^{3/2} / (max(sqrt(rho), sqrt(log n / n)) * sqrt(log n))."""
    if n < 3:
        raise ValueError("n must be at least 3")
    if not 0 < rho <= 1:
        raise ValueError("rho must lie in (0, 1]")
    logn = math.log(n)
    return n**1.5 / (max(math.sqrt(rho), math.sqrt(logn / n)) * math.sqrt(logn))


def truncated_laplace_density(
    center: float, epsilon: float, C: float, rho: float, n: int
) -> PiecewiseExpDensity:
    """Density on [0,1] proportional to
    exp(-(eps/2) * (1/(8C)) * min(r_n * |center - q|, n)).

    The clipped penalty keeps the worst-case log ratio between two centers
    bounded by the same clipped function of their distance, which is what
    calibrates this mechanism to vertex-rewiring distance on homogeneous
    graphs.
    """
    eps = _check_epsilon(epsilon)
    if not C > 48:
        raise ValueError(f"C must exceed 48, got {C}")
    if n < 3:
        raise ValueError("n must be at least 3 (log n degenerate below)")
    if not 0.0 <= center <= 1.0:
        raise ValueError("center must lie in [0, 1]")
    rate = truncation_rate(n, rho)
    radius = n / rate
    coef = eps / (16.0 * C)  # (eps/2) * 1/(8C)
    knots = {0.0, 1.0, center, center - radius, center + radius}
    xs = np.array(sorted(x for x in knots if 0.0 <= x <= 1.0))
    ys = -coef * np.minimum(rate * np.abs(xs - center), float(n))
    return PiecewiseExpDensity(PiecewiseLinear(xs, ys))


def unit_laplace_density(center: float, scale: float) -> PiecewiseExpDensity:
    """Laplace(center, scale) restricted to [0,1] and renormalized."""
    if not 0.0 <= center <= 1.0:
        raise ValueError("center must lie in [0, 1]")
    if not scale > 0:
        raise ValueError("scale must be positive")
    knots = np.array(sorted({0.0, 1.0, float(center)}))
    return PiecewiseExpDensity(PiecewiseLinear(knots, -np.abs(knots - center) / scale))


# -- generic extension and audits --------------------------------------------------


@dataclass(frozen=True)
class MetricSpaceOracle:
    """Enumerable input space with a metric and a hypothesis-set predicate."""

    points: Sequence
    distance: Callable[[object, object], float]
    contains: Callable[[object], bool] = field(default=lambda _: True)


def extend_mechanism(
    space: MetricSpaceOracle,
    base_density: Callable[[object], PiecewiseExpDensity],
    epsilon: float,
    budget: int = 10**5,
    promise_in_h: bool = False,
) -> Callable[[object], PiecewiseExpDensity]:
    """Extend an epsilon-DP-on-H mechanism to the whole space at 2*epsilon.

    The extended density at input D is proportional to
        inf over D' in H of exp(epsilon * d(D, D')) * f_{D'},
    renormalized.  On H the infimum is attained at D' = D (that is exactly
    the DP inequality for the base), so the extension reproduces the base
    there; everywhere it satisfies the 2*epsilon ratio bound.

    In promise mode the base runs directly and the result is DP only on H.
    """
    eps = _check_epsilon(epsilon)
    points = list(space.points)
    h_points = [p for p in points if space.contains(p)]
    if not h_points:
        raise ValueError("hypothesis set H is empty")
    if promise_in_h:
        return base_density
    if len(points) * len(h_points) > budget:
        raise ResourceLimitError(
            f"{len(points)} x {len(h_points)} exact extension exceeds budget "
            f"{budget}; rerun with promise_in_h=True (DP only on H)"
        )
    log_shapes = []
    for p in h_points:
        dens = base_density(p)
        log_shapes.append(dens.shape.shift(-dens.log_normalizer))
    cache: dict = {}

    def extended(d_input) -> PiecewiseExpDensity:
        if d_input in cache:
            return cache[d_input]
        shifted = [
            log_shapes[j].shift(eps * space.distance(d_input, h_points[j]))
            for j in range(len(h_points))
        ]
        dens = PiecewiseExpDensity(piecewise_min(shifted))
        cache[d_input] = dens
        return dens

    return extended


def dp_audit_densities(
    space: MetricSpaceOracle,
    mechanism: Callable[[object], object],
    epsilon: float,
    grid,
    budget: int = 10**8,
) -> float:
    """Max over ordered point pairs and grid points of
    log f_D - log f_{D'} - epsilon * d(D, D').

    A nonpositive return (within tolerance) certifies epsilon-DP on the grid.
    Density objects must expose log_pdf.
    """
    eps = _check_epsilon(epsilon)
    points = list(space.points)
    grid = np.asarray(grid, dtype=float)
    if len(points) ** 2 * grid.size > budget:
        raise ResourceLimitError("audit grid exceeds budget")
    logs = np.stack([np.asarray(mechanism(p).log_pdf(grid)) for p in points])
    worst = -math.inf
    for i in range(len(points)):
        for j in range(len(points)):
            if i == j:
                continue
            gap = float((logs[i] - logs[j]).max()) - eps * space.distance(
                points[i], points[j]
            )
            worst = max(worst, gap)
    return worst
