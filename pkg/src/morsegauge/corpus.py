"""Integrand library with exact oracles.

Each entry is a vector-valued function on a bounded universe box together
with everything the pipeline needs in certified form: closed-form box
integrals, absolute integrals, mean-deviation certificates for centered
cubes, declared jump pieces with their one-sided values, and the
absolute-continuity modulus.

Conventions that the rest of the package leans on:

* functions vanish off the universe, and the reference measure is zero
  there, so every integral identity below is stated for boxes clipped to
  the universe;
* oracle values are plain Lebesgue integrals; callers weight by the
  (uniform) density themselves;
* tags are cell centers, so deviation certificates are issued for centered
  cubes and remain valid under clipping by the universe (each certificate
  below bounds the one-sided means separately where that matters).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import MalformedShape
from .geometry import Box, NormKind, norm, norm_batch


@dataclass(frozen=True)
class DiscPiece:
    """One declared jump piece: a degenerate box with its one-sided value."""

    region: Box
    value: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "value", np.asarray(self.value, dtype=float))


class CorpusFunction:
    """Base class; subclasses fill in oracles and certificates."""

    name: str = ""
    dim_in: int = 1
    dim_out: int = 1
    universe: Box = Box((0.0,), (1.0,))
    sup_norm: float = 0.0
    lipschitz: float | None = None
    # mass of the (vanishing) extension outside the universe
    tail_abs: float = 0.0
    aligned_depth: int = 0

    def __init__(self, y_norm: NormKind = NormKind.TWO):
        self.y_norm = y_norm

    # -- evaluation ---------------------------------------------------------

    def eval(self, x) -> np.ndarray:
        return self.eval_batch(np.atleast_2d(np.asarray(x, dtype=float)))[0]

    def eval_batch(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def ynorm(self, v) -> float:
        return norm(np.atleast_1d(np.asarray(v, dtype=float)), self.y_norm)

    def ynorm_rows(self, V: np.ndarray) -> np.ndarray:
        return norm_batch(np.atleast_2d(np.asarray(V, dtype=float)), self.y_norm)

    # -- exact oracles ------------------------------------------------------

    def exact_integral(self, b: Box) -> np.ndarray:
        lo, hi = np.asarray(b.lo, dtype=float), np.asarray(b.hi, dtype=float)
        return self.integral_batch(lo[None, :], hi[None, :])[0]

    def exact_abs_integral(self, b: Box) -> float:
        lo, hi = np.asarray(b.lo, dtype=float), np.asarray(b.hi, dtype=float)
        return float(self.abs_integral_batch(lo[None, :], hi[None, :])[0])

    def integral_batch(self, los: np.ndarray, his: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def abs_integral_batch(self, los: np.ndarray, his: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def abs_total(self) -> float:
        return self.exact_abs_integral(self.universe)

    def dev_integral_batch(self, los, his, V) -> tuple[np.ndarray, np.ndarray]:
        """Per-box integral of ||f - v||_Y with a certified error split.

        Returns (values, error_bounds); truth lies in [v - e, v + e]
        component-wise.  For entries without a closed form the boxes must be
        centered on their tags (the pipeline's only use).
        """
        raise NotImplementedError

    def dev_integral_for_tags(self, los, his, tags, V) -> tuple[np.ndarray, np.ndarray]:
        """Deviation integrals for windows that may be clipped off-center
        around their tags.  Entries with window-shape-free oracles inherit
        the plain batch path."""
        return self.dev_integral_batch(los, his, V)

    # -- jump metadata ------------------------------------------------------

    def discontinuities(self) -> list[DiscPiece]:
        return []

    def on_discontinuity_batch(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return np.zeros(len(X), dtype=bool)

    def on_discontinuity(self, x) -> bool:
        return bool(self.on_discontinuity_batch(np.atleast_2d(np.asarray(x, float)))[0])

    def dist_inf_batch(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return np.full(len(X), np.inf)

    def discontinuity_distance(self, x) -> float:
        """Distance to the declared jump set; the universe diameter stands
        in for infinity when the set is empty."""
        d = float(self.dist_inf_batch(np.atleast_2d(np.asarray(x, float)))[0])
        if math.isinf(d):
            return max(b - a for a, b in zip(self.universe.lo, self.universe.hi))
        return d

    def remark_points(self) -> list[tuple[float, ...]]:
        """Declared points whose own value disagrees with the a.e. limit of
        ||f|| (recorded as metadata; no operation consumes them)."""
        return []

    # -- certificates -------------------------------------------------------

    def certified_halfside_batch(self, X: np.ndarray, budgets: np.ndarray) -> np.ndarray:
        """Largest h per point such that every centered cube of half-side
        <= h (clipped to the universe or not) has mean ||f - f(x)|| within
        the budget.  Zero at declared jumps."""
        raise NotImplementedError

    def norm_certified_halfside_batch(self, X: np.ndarray, budgets: np.ndarray) -> np.ndarray:
        """Same certificate for the scalar map x -> ||f(x)||_Y."""
        raise NotImplementedError

    def sup_dev_halfside_batch(self, X: np.ndarray, eta: float) -> np.ndarray:
        """Largest h with sup ||f - f(x)|| <= eta over the centered cube."""
        raise NotImplementedError

    def bad_fraction_limit(self, x, eta: float) -> float:
        """Limiting volume fraction of {||f - f(x)|| > eta} in small centered
        cubes at x; 0 wherever sup_dev_halfside is positive."""
        X = np.atleast_2d(np.asarray(x, dtype=float))
        if float(self.sup_dev_halfside_batch(X, eta)[0]) > 0:
            return 0.0
        return 1.0

    # -- concentration ------------------------------------------------------

    def worst_abs_concentration(self, m: float, w0: float = 1.0) -> float:
        """sup of the weighted integral of ||f|| over sets of measure <= m
        under the uniform density w0."""
        if m <= 0:
            return 0.0
        if not math.isfinite(self.sup_norm):
            raise NotImplementedError("unbounded entries override this")
        return self.sup_norm * m  # mass scales out: w0 * M * (m / w0)

    def ac_modulus(self, eps: float, w0: float = 1.0) -> float:
        """gamma such that mu(E) < gamma forces the mu-integral of ||f||
        over E below eps."""
        if eps <= 0:
            raise ValueError("eps must be positive")
        if self.sup_norm == 0.0:
            vol = self.universe.volume() * w0
            return vol if vol > 0 else 1.0
        if not math.isfinite(self.sup_norm):
            raise NotImplementedError("unbounded entries override this")
        return eps / self.sup_norm

    def shell_bound(self, n: int) -> float:
        """sup of ||f|| on the Euclidean shell n-1 <= |x| < n (0 when the
        shell misses the universe)."""
        if n < 1:
            raise ValueError("shell index starts at 1")
        corners = [()]
        for a, b in zip(self.universe.lo, self.universe.hi):
            corners = [c + (v,) for c in corners for v in (a, b)]
        rmax = max(norm(c, NormKind.TWO) for c in corners)
        rmin = norm([min(max(0.0, a), b) for a, b in
                     zip(self.universe.lo, self.universe.hi)], NormKind.TWO)
        if rmin >= n or rmax < n - 1:
            return 0.0
        return self.sup_norm

    def piece_structure(self):
        """list of (Box, value) pairs for piecewise-constant entries, else
        None."""
        return None

    def metadata(self) -> dict:
        return {
            "name": self.name,
            "dim_in": self.dim_in,
            "dim_out": self.dim_out,
            "universe": {"lo": list(self.universe.lo), "hi": list(self.universe.hi)},
            "y_norm": self.y_norm.value,
            "sup_norm": self.sup_norm if math.isfinite(self.sup_norm) else "inf",
            "lipschitz": self.lipschitz,
            "tail_abs": self.tail_abs,
            "jump_pieces": len(self.discontinuities()),
        }


def _overlap_1d(los, his, a, b):
    return np.clip(np.minimum(his, b) - np.maximum(los, a), 0.0, None)


class _PiecewiseConstant(CorpusFunction):
    """Shared machinery for piecewise-constant entries.

    Subclasses define _pieces (list of (Box, value)) and the jump set.
    """

    def __init__(self, y_norm: NormKind = NormKind.TWO):
        super().__init__(y_norm)
        self._pieces = self._build_pieces()

    def _build_pieces(self):
        raise NotImplementedError

    def piece_structure(self):
        return list(self._pieces)

    def integral_batch(self, los, his):
        los = np.atleast_2d(los); his = np.atleast_2d(his)
        out = np.zeros((len(los), self.dim_out))
        for box, val in self._pieces:
            ov = np.ones(len(los))
            for k in range(self.dim_in):
                ov = ov * _overlap_1d(los[:, k], his[:, k], box.lo[k], box.hi[k])
            out += ov[:, None] * np.asarray(val, dtype=float)[None, :]
        return out

    def abs_integral_batch(self, los, his):
        los = np.atleast_2d(los); his = np.atleast_2d(his)
        out = np.zeros(len(los))
        for box, val in self._pieces:
            ov = np.ones(len(los))
            for k in range(self.dim_in):
                ov = ov * _overlap_1d(los[:, k], his[:, k], box.lo[k], box.hi[k])
            out += ov * self.ynorm(val)
        return out

    def dev_integral_batch(self, los, his, V):
        los = np.atleast_2d(los); his = np.atleast_2d(his)
        V = np.atleast_2d(np.asarray(V, dtype=float))
        out = np.zeros(len(los))
        for box, val in self._pieces:
            ov = np.ones(len(los))
            for k in range(self.dim_in):
                ov = ov * _overlap_1d(los[:, k], his[:, k], box.lo[k], box.hi[k])
            dev = self.ynorm_rows(np.asarray(val, dtype=float)[None, :] - V)
            out += ov * dev
        return out, np.zeros(len(los))

    def certified_halfside_batch(self, X, budgets):
        # zero deviation up to the jump set, at any scale
        return self.dist_inf_batch(X)

    def sup_dev_halfside_batch(self, X, eta):
        d = self.dist_inf_batch(X)
        span = self._value_span()
        if eta >= span:
            return np.full(len(np.atleast_2d(X)), np.inf)
        return d

    def _value_span(self) -> float:
        vals = [val for _, val in self._pieces]
        return max(self.ynorm(np.asarray(a) - np.asarray(b))
                   for a in vals for b in vals)

    def norm_certified_halfside_batch(self, X, budgets):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        norms = {round(self.ynorm(v), 12) for _, v in self._pieces}
        if len(norms) == 1:
            # ||f|| is a.e. constant; points with a deviating declared value
            # are remark points, not ||f||-Lebesgue points of their own value
            base = norms.pop()
            FX = self.eval_batch(X)
            own = self.ynorm_rows(FX)
            out = np.full(len(X), np.inf)
            out[np.abs(own - base) > 1e-12] = 0.0
            return out
        return self.dist_inf_batch(X)

    def bad_fraction_limit(self, x, eta: float) -> float:
        x = np.asarray(x, dtype=float).reshape(-1)
        fx = self.eval(x)
        if eta >= self._value_span():
            return 0.0
        h = 2.0 ** -30
        lo = np.maximum(x - h, self.universe.lo)
        hi = np.minimum(x + h, self.universe.hi)
        vol = float(np.prod(hi - lo))
        bad = 0.0
        for box, val in self._pieces:
            if self.ynorm(np.asarray(val) - fx) > eta:
                ov = 1.0
                for k in range(self.dim_in):
                    ov *= max(0.0, min(hi[k], box.hi[k]) - max(lo[k], box.lo[k]))
                bad += ov
        return bad / vol if vol > 0 else 1.0


# --------------------------------------------------------------------------
# entries

class ConstantFn(CorpusFunction):
    """f == (0.6, -0.8) on [0, 1]."""

    name = "constant"
    dim_in = 1
    dim_out = 2
    universe = Box((0.0,), (1.0,))
    value = (0.6, -0.8)
    lipschitz = 0.0
    aligned_depth = 0

    def __init__(self, y_norm: NormKind = NormKind.TWO):
        super().__init__(y_norm)
        self.sup_norm = self.ynorm(self.value)

    def eval_batch(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return np.tile(np.asarray(self.value, dtype=float), (len(X), 1))

    def integral_batch(self, los, his):
        los = np.atleast_2d(los); his = np.atleast_2d(his)
        lens = (his - los).prod(axis=1)
        return lens[:, None] * np.asarray(self.value, dtype=float)[None, :]

    def abs_integral_batch(self, los, his):
        los = np.atleast_2d(los); his = np.atleast_2d(his)
        return (his - los).prod(axis=1) * self.sup_norm

    def dev_integral_batch(self, los, his, V):
        los = np.atleast_2d(los); his = np.atleast_2d(his)
        V = np.atleast_2d(np.asarray(V, dtype=float))
        dev = self.ynorm_rows(np.asarray(self.value, dtype=float)[None, :] - V)
        return (his - los).prod(axis=1) * dev, np.zeros(len(los))

    def certified_halfside_batch(self, X, budgets):
        return np.full(len(np.atleast_2d(X)), np.inf)

    def norm_certified_halfside_batch(self, X, budgets):
        return np.full(len(np.atleast_2d(X)), np.inf)

    def sup_dev_halfside_batch(self, X, eta):
        return np.full(len(np.atleast_2d(X)), np.inf)

    def piece_structure(self):
        return [(self.universe, np.asarray(self.value, dtype=float))]


class Linear1Fn(CorpusFunction):
    """f(x) = x on [0, 1], scalar."""

    name = "linear1"
    dim_in = 1
    dim_out = 1
    universe = Box((0.0,), (1.0,))
    sup_norm = 1.0
    lipschitz = 1.0
    aligned_depth = 0

    def eval_batch(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return X[:, :1].copy()

    def integral_batch(self, los, his):
        los = np.atleast_2d(los); his = np.atleast_2d(his)
        return 0.5 * (his[:, :1] ** 2 - los[:, :1] ** 2)

    def abs_integral_batch(self, los, his):
        # x >= 0 on the universe
        los = np.atleast_2d(los); his = np.atleast_2d(his)
        return 0.5 * (his[:, 0] ** 2 - los[:, 0] ** 2)

    def dev_integral_batch(self, los, his, V):
        los = np.atleast_2d(los)[:, 0]; his = np.atleast_2d(his)[:, 0]
        v = np.atleast_2d(np.asarray(V, dtype=float))[:, 0]
        c = np.clip(v, los, his)
        vals = 0.5 * ((his - c) ** 2 + (c - los) ** 2) \
            + (c - v) * ((his - c) - (c - los))
        return np.abs(vals), np.zeros(len(los))

    def certified_halfside_batch(self, X, budgets):
        # mean |y - x| over any window [x-h1, x+h2], h_i <= h, is <= h/2
        return 2.0 * np.asarray(budgets, dtype=float) * np.ones(len(np.atleast_2d(X)))

    def norm_certified_halfside_batch(self, X, budgets):
        return self.certified_halfside_batch(X, budgets)

    def sup_dev_halfside_batch(self, X, eta):
        return np.full(len(np.atleast_2d(X)), float(eta))


class Step2Fn(_PiecewiseConstant):
    """f = (1,0) on [0, 0.5), (0,1) on [0.5, 1]; the jump value is the
    right-hand one."""

    name = "step2"
    dim_in = 1
    dim_out = 2
    universe = Box((0.0,), (1.0,))
    sup_norm = 1.0
    cut = 0.5
    jump_value = (0.0, 1.0)
    aligned_depth = 1

    def _build_pieces(self):
        return [(Box((0.0,), (self.cut,)), np.array([1.0, 0.0])),
                (Box((self.cut,), (1.0,)), np.array([0.0, 1.0]))]

    def eval_batch(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        out = np.zeros((len(X), 2))
        left = X[:, 0] < self.cut
        out[left] = [1.0, 0.0]
        out[~left] = [0.0, 1.0]
        out[X[:, 0] == self.cut] = np.asarray(self.jump_value, dtype=float)
        return out

    def discontinuities(self):
        return [DiscPiece(Box((self.cut,), (self.cut,)),
                          np.asarray(self.jump_value, dtype=float))]

    def on_discontinuity_batch(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return X[:, 0] == self.cut

    def dist_inf_batch(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return np.abs(X[:, 0] - self.cut)


class Step2AvgFn(Step2Fn):
    """step2 with the averaged value at the jump; 0.5 becomes a point where
    ||f|| is a.e. constant but ||f(0.5)|| disagrees."""

    name = "step2_avg"
    jump_value = (0.5, 0.5)

    def remark_points(self):
        return [(self.cut,)]


class Sign1Fn(_PiecewiseConstant):
    """f(x) = sign(x) on [-1, 1] with f(0) = 1; ||f|| is constant."""

    name = "sign1"
    dim_in = 1
    dim_out = 1
    universe = Box((-1.0,), (1.0,))
    sup_norm = 1.0
    aligned_depth = 1

    def _build_pieces(self):
        return [(Box((-1.0,), (0.0,)), np.array([-1.0])),
                (Box((0.0,), (1.0,)), np.array([1.0]))]

    def eval_batch(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return np.where(X[:, :1] >= 0.0, 1.0, -1.0)

    def discontinuities(self):
        return [DiscPiece(Box((0.0,), (0.0,)), np.array([1.0]))]

    def on_discontinuity_batch(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return X[:, 0] == 0.0

    def dist_inf_batch(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return np.abs(X[:, 0])


class Checker2DFn(_PiecewiseConstant):
    """4x4 checkerboard on [0,1]^2 with values (i+j) mod 2, scalar output.

    Jump pieces are the interior grid segments between cell crossings; the
    declared value on each segment is the upper/right cell's (the same rule
    eval uses).
    """

    name = "checker2d"
    dim_in = 2
    dim_out = 1
    universe = Box((0.0, 0.0), (1.0, 1.0))
    sup_norm = 1.0
    grid = 4
    aligned_depth = 2

    def _build_pieces(self):
        g = self.grid
        out = []
        for i in range(g):
            for j in range(g):
                val = float((i + j) % 2)
                out.append((Box((i / g, j / g), ((i + 1) / g, (j + 1) / g)),
                            np.array([val])))
        return out

    def _cell_index(self, coords: np.ndarray) -> np.ndarray:
        return np.minimum(self.grid - 1, np.floor(self.grid * coords)).astype(int)

    def eval_batch(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        i = self._cell_index(X[:, 0])
        j = self._cell_index(X[:, 1])
        return (((i + j) % 2).astype(float))[:, None]

    def discontinuities(self):
        g = self.grid
        pieces = []
        for axis in range(2):
            for line in range(1, g):
                c = line / g
                for seg in range(g):
                    a, b = seg / g, (seg + 1) / g
                    if axis == 0:
                        region = Box((c, a), (c, b))
                        probe = (c, 0.5 * (a + b))
                    else:
                        region = Box((a, c), (b, c))
                        probe = (0.5 * (a + b), c)
                    pieces.append(DiscPiece(region, self.eval(probe)))
        return pieces

    def on_discontinuity_batch(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        g = self.grid
        hit = np.zeros(len(X), dtype=bool)
        for line in range(1, g):
            c = line / g
            hit |= (X[:, 0] == c) | (X[:, 1] == c)
        inside = np.ones(len(X), dtype=bool)
        for k in range(2):
            inside &= (X[:, k] >= 0.0) & (X[:, k] <= 1.0)
        return hit & inside

    def dist_inf_batch(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        g = self.grid
        lines = np.array([line / g for line in range(1, g)])
        d0 = np.abs(X[:, 0][:, None] - lines[None, :]).min(axis=1)
        d1 = np.abs(X[:, 1][:, None] - lines[None, :]).min(axis=1)
        return np.minimum(d0, d1)


class Lipschitz2DFn(CorpusFunction):
    """f(x, y) = amp * sin(pi x) * sin(pi y) on [0,1]^2, scalar."""

    name = "lipschitz2d"
    dim_in = 2
    dim_out = 1
    universe = Box((0.0, 0.0), (1.0, 1.0))
    amp = 0.1

    def __init__(self, y_norm: NormKind = NormKind.TWO):
        super().__init__(y_norm)
        self.sup_norm = self.amp
        self.lipschitz = self.amp * math.pi  # |grad f|_2 peaks at amp*pi

    def eval_batch(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return (self.amp * np.sin(np.pi * X[:, 0]) * np.sin(np.pi * X[:, 1]))[:, None]

    def integral_batch(self, los, his):
        los = np.atleast_2d(los); his = np.atleast_2d(his)
        cx = np.cos(np.pi * los[:, 0]) - np.cos(np.pi * his[:, 0])
        cy = np.cos(np.pi * los[:, 1]) - np.cos(np.pi * his[:, 1])
        return (self.amp / math.pi ** 2 * cx * cy)[:, None]

    def abs_integral_batch(self, los, his):
        # f >= 0 on the universe
        return self.integral_batch(los, his)[:, 0]

    def dev_integral_batch(self, los, his, V):
        """Centered boxes only: interval certificate from the gradient
        bound, sharpened from below by the exact signed integral."""
        los = np.atleast_2d(np.asarray(los, dtype=float))
        his = np.atleast_2d(np.asarray(his, dtype=float))
        V = np.atleast_2d(np.asarray(V, dtype=float))[:, 0]
        centers = 0.5 * (los + his)
        h = 0.5 * (his - los).max(axis=1)
        vol = (his - los).prod(axis=1)
        coef, beta = self._mean_dev_coefficients(centers)
        upper = (coef * h + beta * h * h) * vol
        signed = np.abs(self.integral_batch(los, his)[:, 0] - V * vol)
        upper = np.maximum(upper, signed)
        return 0.5 * (upper + signed), 0.5 * (upper - signed)

    def dev_integral_for_tags(self, los, his, tags, V):
        los = np.atleast_2d(np.asarray(los, dtype=float))
        his = np.atleast_2d(np.asarray(his, dtype=float))
        tags = np.atleast_2d(np.asarray(tags, dtype=float))
        V = np.atleast_2d(np.asarray(V, dtype=float))[:, 0]
        centers = 0.5 * (los + his)
        widths = his - los
        centered = (np.abs(centers - tags).max(axis=1) <= 1e-14) \
            & (np.abs(widths[:, 0] - widths[:, 1]) <= 1e-14)
        vals = np.empty(len(los))
        errs = np.empty(len(los))
        if centered.any():
            v, e = self.dev_integral_batch(los[centered], his[centered],
                                           V[centered, None])
            vals[centered] = v
            errs[centered] = e
        rest = ~centered
        if rest.any():
            # clipped window: the global gradient bound holds pointwise
            far = np.maximum(np.abs(los[rest] - tags[rest]),
                             np.abs(his[rest] - tags[rest]))
            reach = np.sqrt((far * far).sum(axis=1))
            vol = widths[rest].prod(axis=1)
            upper = self.amp * math.pi * reach * vol
            signed = np.abs(self.integral_batch(los[rest], his[rest])[:, 0]
                            - V[rest] * vol)
            upper = np.maximum(upper, signed)
            vals[rest] = 0.5 * (upper + signed)
            errs[rest] = 0.5 * (upper - signed)
        return vals, errs

    def _gradient_parts(self, X):
        gx = np.abs(np.cos(np.pi * X[:, 0]) * np.sin(np.pi * X[:, 1]))
        gy = np.abs(np.sin(np.pi * X[:, 0]) * np.cos(np.pi * X[:, 1]))
        a = self.amp * math.pi * np.maximum(gx, gy)
        b = self.amp * math.pi * np.minimum(gx, gy)
        return a, b

    def _mean_dev_coefficients(self, X):
        # mean of |g . q| over the centered cube is coef * h exactly;
        # the Hessian remainder contributes at most beta * h^2 to the mean
        a, b = self._gradient_parts(X)
        coef = np.where(a > 0, 0.5 * (a + np.divide(b * b, 3.0 * a,
                        out=np.zeros_like(a), where=a > 0)), 0.0)
        beta = (2.0 / 3.0) * self.amp * math.pi ** 2
        return coef, beta

    def certified_halfside_batch(self, X, budgets):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        budgets = np.asarray(budgets, dtype=float) * np.ones(len(X))
        coef, beta = self._mean_dev_coefficients(X)
        h_int = 2.0 * budgets / (coef + np.sqrt(coef * coef + 4.0 * beta * budgets))
        # near the boundary the window clips; fall back to the sup bound,
        # which holds for any sub-window
        crude = budgets / (math.sqrt(2.0) * self.amp * math.pi)
        bdist = np.minimum(
            (X - np.asarray(self.universe.lo)).min(axis=1),
            (np.asarray(self.universe.hi) - X).min(axis=1))
        return np.where(bdist >= h_int, h_int, np.minimum(h_int, np.maximum(crude, 0.0)))

    def norm_certified_halfside_batch(self, X, budgets):
        # |f| = f on the universe
        return self.certified_halfside_batch(X, budgets)

    def sup_dev_halfside_batch(self, X, eta):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return np.full(len(X), float(eta) / (math.sqrt(2.0) * self.amp * math.pi))


class Spike1Fn(CorpusFunction):
    """f(x) = |x|^(-1/2) on [-1,1] away from 0, f(0) = 0; integrable but
    unbounded, scalar."""

    name = "spike1"
    dim_in = 1
    dim_out = 1
    universe = Box((-1.0,), (1.0,))
    sup_norm = math.inf
    aligned_depth = 1

    def eval_batch(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        x = X[:, 0]
        out = np.zeros(len(x))
        nz = x != 0.0
        out[nz] = 1.0 / np.sqrt(np.abs(x[nz]))
        return out[:, None]

    @staticmethod
    def _anti(t):
        # antiderivative of sign(t)/sqrt(|t|)
        return 2.0 * np.sign(t) * np.sqrt(np.abs(t))

    def integral_batch(self, los, his):
        los = np.atleast_2d(los)[:, 0]; his = np.atleast_2d(his)[:, 0]
        return (self._anti(his) - self._anti(los))[:, None]

    def abs_integral_batch(self, los, his):
        a = np.atleast_2d(los)[:, 0]; b = np.atleast_2d(his)[:, 0]
        sa = 2.0 * np.sqrt(np.abs(a)); sb = 2.0 * np.sqrt(np.abs(b))
        same_side = np.abs(sb - sa)
        straddle = sa + sb
        return np.where((a < 0) & (b > 0), straddle, same_side)

    def dev_integral_batch(self, los, his, V):
        """Exact for boxes on one side of the singularity."""
        a = np.atleast_2d(los)[:, 0]; b = np.atleast_2d(his)[:, 0]
        v = np.atleast_2d(np.asarray(V, dtype=float))[:, 0]
        if np.any((a < 0) & (b > 0)):
            raise MalformedShape("deviation oracle needs one-sided boxes")
        aa = np.minimum(np.abs(a), np.abs(b))
        bb = np.maximum(np.abs(a), np.abs(b))
        with np.errstate(divide="ignore"):
            cross = np.where(v > 0, 1.0 / (v * v), np.inf)
        c = np.clip(cross, aa, bb)
        left = 2.0 * np.sqrt(c) - 2.0 * np.sqrt(aa) - v * (c - aa)
        right = v * (bb - c) - (2.0 * np.sqrt(bb) - 2.0 * np.sqrt(c))
        return left + right, np.zeros(len(a))

    def discontinuities(self):
        return [DiscPiece(Box((0.0,), (0.0,)), np.array([0.0]))]

    def on_discontinuity_batch(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return X[:, 0] == 0.0

    def dist_inf_batch(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return np.abs(X[:, 0])

    def certified_halfside_batch(self, X, budgets):
        """Solve the one-sided mean bound 2/(sqrt(x)+sqrt(x-h)) - 1/sqrt(x)
        <= budget for h; the left-of-tag mean dominates every clipped or
        centered window, so the certificate survives clipping."""
        x = np.abs(np.atleast_2d(np.asarray(X, dtype=float))[:, 0])
        budgets = np.asarray(budgets, dtype=float) * np.ones(len(x))
        out = np.zeros(len(x))
        pos = x > 0
        xp = x[pos]; bp = budgets[pos]
        s = 2.0 / (bp + 1.0 / np.sqrt(xp)) - np.sqrt(xp)
        h = np.where(s <= 0, 0.5 * xp, xp - s * s)
        out[pos] = np.minimum(np.maximum(h, 0.0), 0.5 * xp)
        return out

    def norm_certified_halfside_batch(self, X, budgets):
        return self.certified_halfside_batch(X, budgets)

    def sup_dev_halfside_batch(self, X, eta):
        x = np.abs(np.atleast_2d(np.asarray(X, dtype=float))[:, 0])
        out = np.zeros(len(x))
        pos = x > 0
        xp = x[pos]
        h = xp - 1.0 / (eta + 1.0 / np.sqrt(xp)) ** 2
        out[pos] = np.minimum(np.maximum(h, 0.0), 0.5 * xp)
        return out

    def worst_abs_concentration(self, m: float, w0: float = 1.0) -> float:
        # the worst set of Lebesgue measure m hugs the singularity
        if m <= 0:
            return 0.0
        leb = min(m / w0, self.universe.volume())
        return w0 * 2.0 * math.sqrt(2.0 * leb)

    def ac_modulus(self, eps: float, w0: float = 1.0) -> float:
        if eps <= 0:
            raise ValueError("eps must be positive")
        # invert w0 * 2 sqrt(2 leb) = eps, then convert back to mu-measure
        leb = (eps / (2.0 * w0)) ** 2 / 2.0
        return w0 * leb

    def shell_bound(self, n: int) -> float:
        if n == 1:
            return math.inf
        if n == 2:
            return 1.0  # |x| = 1 only
        return 0.0

    def bad_fraction_limit(self, x, eta: float) -> float:
        x = np.asarray(x, dtype=float).reshape(-1)
        if x[0] != 0.0:
            return 0.0
        return 1.0  # every small window is mostly far above eta


_REGISTRY = {
    cls.name: cls
    for cls in (ConstantFn, Linear1Fn, Step2Fn, Step2AvgFn, Sign1Fn,
                Checker2DFn, Lipschitz2DFn, Spike1Fn)
}

MANDATORY = ("constant", "linear1", "step2", "checker2d", "lipschitz2d", "spike1")


def corpus_names() -> list[str]:
    return sorted(_REGISTRY)


def corpus_function(name: str, y_norm: NormKind = NormKind.TWO) -> CorpusFunction:
    if name not in _REGISTRY:
        raise KeyError(f"no corpus entry named {name!r} (have {corpus_names()})")
    return _REGISTRY[name](y_norm=y_norm)
