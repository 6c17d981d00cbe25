"""Density-weighted volume on a bounded universe box.

The measure is Lebesgue measure weighted by a nonnegative piecewise-constant
density on a dyadic grid of the universe.  Box values are exact: the scalar
path runs in rational arithmetic so that additivity over dyadic splits holds
with zero error, and the batch path is plain float for the hot loops.  Balls
get closed-form volumes under uniform density; everything else goes through
adaptive subdivision with a certified error bound.
"""

from __future__ import annotations

import csv
import heapq
import json
import math
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Sequence, Union

import numpy as np

from .errors import MalformedShape, OutOfUniverse, ToleranceUnreachable
from .geometry import Ball, Box, Cube, MorseSet, NormKind, Star2D, norm

_ADAPTIVE_CELL_BUDGET = 500_000


@dataclass(frozen=True)
class MeasureValue:
    value: float
    error_bound: float = 0.0

    def __post_init__(self):
        if self.value < 0 or self.error_bound < 0:
            raise ValueError("measure values and error bounds are nonnegative")

    @property
    def upper(self) -> float:
        return self.value + self.error_bound


class RadonMeasure:
    """Nonnegative density on a dyadic grid over a universe box.

    values has shape (2^level,) * dim in C order; cell (i_0, ..., i_{d-1})
    covers the product of [lo_k + i_k * step_k, lo_k + (i_k + 1) * step_k].
    """

    def __init__(self, universe: Box, level: int, values: np.ndarray):
        if level < 0:
            raise ValueError("grid level must be >= 0")
        side = 2 ** level
        values = np.asarray(values, dtype=float).reshape((side,) * universe.dim)
        if values.min() < 0:
            raise ValueError("density must be nonnegative")
        if not np.isfinite(values).all():
            raise ValueError("density must be finite")
        self.universe = universe
        self.level = level
        self.values = values
        self.values.setflags(write=False)
        self.uniform = bool(values.max() == values.min())
        self.w0 = float(values.flat[0])
        self.total = measure_box(self, universe).value

    @property
    def dim(self) -> int:
        return self.universe.dim

    @staticmethod
    def unit(universe: Box) -> "RadonMeasure":
        return RadonMeasure(universe, 0, np.ones((1,) * universe.dim))

    @staticmethod
    def from_grid(universe: Box, level: int, values: Sequence[float]) -> "RadonMeasure":
        return RadonMeasure(universe, level, np.asarray(values, dtype=float))

    @staticmethod
    def from_file(universe: Box, path: str | Path) -> "RadonMeasure":
        """Load {level, values[]} from a .json file, or a .csv whose first
        row is `level,<L>` followed by one density value per row."""
        path = Path(path)
        if path.suffix.lower() == ".json":
            blob = json.loads(path.read_text())
            return RadonMeasure.from_grid(universe, int(blob["level"]), blob["values"])
        with path.open(newline="") as fh:
            rows = [r for r in csv.reader(fh) if r]
        if not rows or rows[0][0].strip().lower() != "level":
            raise ValueError("csv grid must start with a 'level,<L>' row")
        level = int(rows[0][1])
        values = [float(c) for row in rows[1:] for c in row]
        return RadonMeasure.from_grid(universe, level, values)


def _axis_overlaps_exact(mu: RadonMeasure, axis: int, lo: float, hi: float):
    """Per-slab overlap lengths of [lo, hi] along one axis, as Fractions."""
    a = Fraction(mu.universe.lo[axis])
    b = Fraction(mu.universe.hi[axis])
    side = 2 ** mu.level
    step = (b - a) / side
    lo_f, hi_f = Fraction(lo), Fraction(hi)
    out = []
    for i in range(side):
        s0 = a + i * step
        s1 = s0 + step
        seg = min(hi_f, s1) - max(lo_f, s0)
        out.append(seg if seg > 0 else Fraction(0))
    return out


def measure_box_exact(mu: RadonMeasure, b: Box) -> Fraction:
    """The box measure in exact rational arithmetic.

    Exactness makes additivity over dyadic splits an identity rather than a
    tolerance check.
    """
    if b.dim != mu.dim:
        raise OutOfUniverse("box dimension mismatch")
    if not mu.universe.contains_box(b):
        raise OutOfUniverse(f"box {b} escapes the universe {mu.universe}")
    per_axis = [_axis_overlaps_exact(mu, k, b.lo[k], b.hi[k]) for k in range(b.dim)]
    total = Fraction(0)
    it = np.ndindex(mu.values.shape)
    for idx in it:
        w = mu.values[idx]
        if w == 0.0:
            continue
        v = Fraction(float(w))
        for k, i in enumerate(idx):
            v *= per_axis[k][i]
            if v == 0:
                break
        total += v
    return total


def measure_box(mu: RadonMeasure, b: Box) -> MeasureValue:
    """Exact measure of a box inside the universe (error_bound 0)."""
    if mu.uniform:
        if b.dim != mu.dim:
            raise OutOfUniverse("box dimension mismatch")
        if not mu.universe.contains_box(b):
            raise OutOfUniverse(f"box {b} escapes the universe {mu.universe}")
        return MeasureValue(mu.w0 * b.volume(), 0.0)
    return MeasureValue(float(measure_box_exact(mu, b)), 0.0)


def measure_box_clipped(mu: RadonMeasure, b: Box) -> MeasureValue:
    """Measure of b intersected with the universe; 0 when disjoint."""
    inter = mu.universe.intersect(b)
    if inter is None:
        return MeasureValue(0.0, 0.0)
    return measure_box(mu, inter)


def measure_box_batch(mu: RadonMeasure, los: np.ndarray, his: np.ndarray) -> np.ndarray:
    """Float fast path: measures of N boxes given as (N, d) corner arrays.

    Boxes must already lie inside the universe (not rechecked here).
    """
    los = np.atleast_2d(np.asarray(los, dtype=float))
    his = np.atleast_2d(np.asarray(his, dtype=float))
    if mu.uniform:
        return mu.w0 * np.prod(his - los, axis=1)
    out = np.empty(len(los))
    for i, (lo, hi) in enumerate(zip(los, his)):
        out[i] = _measure_box_float(mu, lo, hi)
    return out


def _measure_box_float(mu: RadonMeasure, lo: Sequence[float], hi: Sequence[float]) -> float:
    side = 2 ** mu.level
    axes = []
    for k in range(mu.dim):
        edges = np.linspace(mu.universe.lo[k], mu.universe.hi[k], side + 1)
        seg = np.minimum(hi[k], edges[1:]) - np.maximum(lo[k], edges[:-1])
        axes.append(np.maximum(seg, 0.0))
    if mu.dim == 1:
        return float(np.dot(mu.values, axes[0]))
    if mu.dim == 2:
        return float(np.einsum("ij,i,j->", mu.values, axes[0], axes[1]))
    return float(np.einsum("ijk,i,j,k->", mu.values, axes[0], axes[1], axes[2]))


def ball_volume(kind: NormKind, dim: int, r: float) -> float:
    """Lebesgue volume of the radius-r ball in the given norm."""
    if r <= 0:
        return 0.0
    if kind is NormKind.INF:
        return (2.0 * r) ** dim
    if kind is NormKind.ONE:
        return (2.0 * r) ** dim / math.factorial(dim)
    if dim == 1:
        return 2.0 * r
    if dim == 2:
        return math.pi * r * r
    if dim == 3:
        return 4.0 * math.pi * r ** 3 / 3.0
    raise ValueError("dim must be in {1, 2, 3}")


# --------------------------------------------------------------------------
# adaptive subdivision for non-box shapes

_IN, _OUT, _SPLIT = 0, 1, 2


def _classify_ball(lo, hi, tag, r, kind):
    near = [min(max(t, a), b) - t for t, a, b in zip(tag, lo, hi)]
    if norm(near, kind) > r:
        return _OUT
    far = [max(abs(a - t), abs(b - t)) for t, a, b in zip(tag, lo, hi)]
    if norm(far, kind) <= r:
        return _IN
    return _SPLIT


def _segment_hits_box(p, q, lo, hi) -> bool:
    """Liang-Barsky clip: does segment pq meet the closed box?"""
    t0, t1 = 0.0, 1.0
    for k in range(len(lo)):
        d = q[k] - p[k]
        if d == 0.0:
            if p[k] < lo[k] or p[k] > hi[k]:
                return False
            continue
        ta = (lo[k] - p[k]) / d
        tb = (hi[k] - p[k]) / d
        if ta > tb:
            ta, tb = tb, ta
        t0 = max(t0, ta)
        t1 = min(t1, tb)
        if t0 > t1:
            return False
    return True


def _classify_star(lo, hi, s: MorseSet):
    shape = s.shape
    tag = s.tag
    corners = [(lo[0], lo[1]), (hi[0], lo[1]), (lo[0], hi[1]), (hi[0], hi[1])]
    inside = [s.contains(c) for c in corners]
    verts = [(tag[0] + v[0], tag[1] + v[1]) for v in shape.vertices]
    edge_hit = any(
        _segment_hits_box(verts[i], verts[(i + 1) % len(verts)], lo, hi)
        for i in range(len(verts)))
    if all(inside) and not edge_hit:
        return _IN
    if not any(inside) and not edge_hit:
        vert_in = any(lo[0] <= vx <= hi[0] and lo[1] <= vy <= hi[1] for vx, vy in verts)
        return _SPLIT if vert_in else _OUT
    return _SPLIT


def measure_morse_set(mu: RadonMeasure, s: MorseSet, tol: float = 1e-9) -> MeasureValue:
    """Measure of a tagged set: exact where closed forms exist, otherwise
    adaptive subdivision certified to error_bound <= tol."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    bb = s.bounding_box()
    if not mu.universe.contains_box(bb):
        raise OutOfUniverse("set escapes the universe")
    shape = s.shape
    if isinstance(shape, Cube):
        return measure_box(mu, bb)
    if isinstance(shape, Ball):
        if shape.norm is NormKind.INF:
            return measure_box(mu, bb)
        if mu.uniform:
            return MeasureValue(mu.w0 * ball_volume(shape.norm, s.dim(), shape.radius), 0.0)
        classify = lambda lo, hi: _classify_ball(lo, hi, s.tag, shape.radius, shape.norm)
    elif isinstance(shape, Star2D):
        classify = lambda lo, hi: _classify_star(lo, hi, s)
    else:
        raise MalformedShape(f"unknown shape {shape!r}")
    return _adaptive_measure(mu, bb, classify, tol)


def _adaptive_measure(mu: RadonMeasure, bb: Box, classify, tol: float) -> MeasureValue:
    inside = 0.0
    straddle = 0.0
    heap: list = []
    counter = 0

    def push(box: Box):
        nonlocal inside, straddle, counter
        m = float(measure_box_batch(mu, [box.lo], [box.hi])[0])
        cls = classify(box.lo, box.hi)
        if cls == _IN:
            inside += m
        elif cls == _SPLIT and m > 0:
            heapq.heappush(heap, (-m, counter, box))
            counter += 1
            straddle += m

    push(bb)
    cells = 1
    while straddle > 2.0 * tol:
        if not heap:
            break
        if cells > _ADAPTIVE_CELL_BUDGET:
            raise ToleranceUnreachable(
                f"subdivision budget exhausted at straddle mass {straddle:.3e}")
        m, _, box = heapq.heappop(heap)
        straddle -= -m
        for child in box.split():
            push(child)
        cells += 2 ** bb.dim
    return MeasureValue(inside + 0.5 * straddle, 0.5 * straddle)


# --------------------------------------------------------------------------
# spatial shells

def _ball_cap_volume(mu: RadonMeasure, R: float, domain_norm: NormKind) -> float:
    """mu(B(0, R) intersected with the universe); upper-bounded when the
    adaptive fallback is needed."""
    if R <= 0:
        return 0.0
    d = mu.dim
    origin = (0.0,) * d
    corner_dists = [norm(c, domain_norm) for c in _box_corners(mu.universe)]
    if max(corner_dists) <= R and mu.universe.contains_point(origin):
        return mu.total
    if domain_norm is NormKind.INF or d == 1:
        bb = Box(tuple(-R for _ in range(d)), tuple(R for _ in range(d)))
        return measure_box_clipped(mu, bb).value
    ball_bb = Box((-R,) * d, (R,) * d)
    if mu.uniform and mu.universe.contains_box(ball_bb):
        return mu.w0 * ball_volume(domain_norm, d, R)
    inter = mu.universe.intersect(ball_bb)
    if inter is None:
        return 0.0
    classify = lambda lo, hi: _classify_ball(lo, hi, origin, R, domain_norm)
    mv = _adaptive_measure(mu, inter, classify, 1e-6)
    return mv.upper


def _box_corners(b: Box):
    pts = [()]
    for a, c in zip(b.lo, b.hi):
        pts = [p + (v,) for p in pts for v in (a, c)]
    return pts


def annulus_measure(mu: RadonMeasure, n: int, domain_norm: NormKind) -> float:
    """Measure inside the universe of the shell B(0, n+1) minus B(0, n-2);
    the inner ball is empty for n <= 2."""
    if n < 1:
        raise ValueError("shell index starts at 1")
    outer = _ball_cap_volume(mu, float(n + 1), domain_norm)
    inner = _ball_cap_volume(mu, float(n - 2), domain_norm) if n > 2 else 0.0
    return max(outer - inner, 0.0)
