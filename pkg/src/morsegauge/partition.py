"""Gauge-fine tagged families over a box universe.

The dyadic sieve keeps a frontier of equal-level cells, emits the ones whose
circumradius about the center already fits under the gauge, and splits the
rest.  Emitted cells are sorted into canonical depth-first lexicographic
order via interleaved-bit keys; the keys double as an exact interior
disjointness certificate, since a dyadic cell owns a contiguous key range.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DepthExceeded, ResidualStuck
from .geometry import Box, Gauge, MorseSet, NormKind, make_ball, make_cube, norm_batch, norm_ratio
from .measure import RadonMeasure, ball_volume, measure_box_batch

_CHILD_OFFSETS = {d: np.array(np.meshgrid(*([[0, 1]] * d), indexing="ij"),
                              dtype=np.int64).reshape(d, -1).T
                  for d in (1, 2, 3)}


def _key_depth_cap(dim: int) -> int:
    return 62 // dim


def _morton_keys(level: int, idx: np.ndarray, dim: int) -> np.ndarray:
    """Depth-first lexicographic sort keys, axis 0 most significant within
    each level digit."""
    cap = _key_depth_cap(dim)
    if level > cap:
        raise ValueError(f"level {level} exceeds the {cap}-level key range")
    keys = np.zeros(len(idx), dtype=np.int64)
    for j in range(1, level + 1):
        digit = np.zeros(len(idx), dtype=np.int64)
        for k in range(dim):
            digit |= ((idx[:, k] >> (level - j)) & 1) << (dim - 1 - k)
        keys |= digit << (dim * (cap - j))
    return keys


def _key_spans(levels: np.ndarray, dim: int) -> np.ndarray:
    cap = _key_depth_cap(dim)
    return np.int64(1) << (dim * (cap - levels.astype(np.int64)))


@dataclass(frozen=True)
class SieveParams:
    eta: float
    max_depth: int = 24
    tag_rule: str = "center"

    def __post_init__(self):
        if self.eta <= 0:
            raise ValueError("eta must be positive")
        if self.max_depth < 0:
            raise ValueError("max_depth must be nonnegative")
        if self.tag_rule != "center":
            raise ValueError(f"unknown tag rule {self.tag_rule!r}")


@dataclass
class TaggedFamily:
    """Finitely many interior-disjoint tagged sets plus the uncovered rest.

    Cube families derive box corners from (level, index) against the
    universe; sabotage hooks that edit geometry directly must clear
    `dyadic`, which downgrades disjointness checking to the geometric
    sweep.
    """

    kind: str
    universe: Box
    domain_norm: NormKind
    levels: np.ndarray
    indices: np.ndarray
    tags: np.ndarray
    halfsides: np.ndarray
    keys: np.ndarray
    residual_measure: float
    residual_los: np.ndarray
    residual_his: np.ndarray
    warnings: list[str] = field(default_factory=list)
    dyadic: bool = True
    _los: np.ndarray | None = None
    _his: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.tags)

    @property
    def dim(self) -> int:
        return self.universe.dim

    def _derive_corners(self):
        lo = np.asarray(self.universe.lo)
        side = np.asarray(self.universe.hi) - lo
        step = side[None, :] * (2.0 ** -self.levels.astype(float))[:, None]
        self._los = lo[None, :] + self.indices * step
        self._his = lo[None, :] + (self.indices + 1) * step

    @property
    def los(self) -> np.ndarray:
        if self._los is None:
            if self.kind == "cube":
                self._derive_corners()
            else:
                self._los = self.tags - self.halfsides[:, None]
        return self._los

    @property
    def his(self) -> np.ndarray:
        if self._his is None:
            if self.kind == "cube":
                self._derive_corners()
            else:
                self._his = self.tags + self.halfsides[:, None]
        return self._his

    def measures(self, mu: RadonMeasure) -> np.ndarray:
        if self.kind == "cube":
            return measure_box_batch(mu, self.los, self.his)
        if mu.uniform:
            return mu.w0 * ball_volume(self.domain_norm, self.dim, 1.0) \
                * self.halfsides ** self.dim
        from .measure import measure_morse_set
        return np.array([measure_morse_set(mu, s).value for _, s in self.cells()])

    def depth_histogram(self) -> dict[int, int]:
        if len(self.levels) == 0:
            return {}
        counts = np.bincount(self.levels)
        return {int(k): int(v) for k, v in enumerate(counts) if v}

    def cells(self):
        """Materialize (tag, set) pairs; meant for small families and tests."""
        out = []
        for i in range(len(self)):
            tag = tuple(float(c) for c in self.tags[i])
            if self.kind == "cube":
                out.append((tag, make_cube(tag, float(self.halfsides[i]),
                                           domain_norm=self.domain_norm)))
            else:
                out.append((tag, make_ball(tag, float(self.halfsides[i]),
                                           ball_norm=self.domain_norm,
                                           domain_norm=self.domain_norm)))
        return out

    def replace_geometry(self, los: np.ndarray, his: np.ndarray,
                         tags: np.ndarray) -> "TaggedFamily":
        """Copy with explicit corners, dropping the dyadic fast path."""
        fam = TaggedFamily(kind=self.kind, universe=self.universe,
                           domain_norm=self.domain_norm,
                           levels=self.levels.copy(), indices=self.indices.copy(),
                           tags=np.array(tags, dtype=float),
                           halfsides=self.halfsides.copy(), keys=self.keys.copy(),
                           residual_measure=self.residual_measure,
                           residual_los=self.residual_los,
                           residual_his=self.residual_his,
                           warnings=list(self.warnings), dyadic=False)
        fam._los = np.array(los, dtype=float)
        fam._his = np.array(his, dtype=float)
        return fam


def _require_square(omega: Box):
    side = np.asarray(omega.hi) - np.asarray(omega.lo)
    if not np.all(side == side[0]):
        raise ValueError("dyadic sieve needs a square universe")


def _circumradius_about_tags(los, his, tags, domain_norm) -> np.ndarray:
    far = np.maximum(his - tags, tags - los)
    return norm_batch(far, domain_norm)


def dyadic_sieve(omega: Box, g: Gauge, mu: RadonMeasure, p: SieveParams,
                 domain_norm: NormKind = NormKind.TWO) -> TaggedFamily:
    """Level-synchronous refinement until the uncovered measure drops to eta.

    A cell is emitted once halfside * m(inf -> domain_norm) <= delta(center),
    non-strict, and the same test holds one level down at every child
    center; the extra look-ahead keeps one-step refinements of the output
    fine even where the gauge dips sharply.  Everything else splits into
    its 2^d children.  DepthExceeded carries a sample of the stuck cells
    with their gauge values.
    """
    _require_square(omega)
    dim = omega.dim
    uni_lo = np.asarray(omega.lo)
    side = float(omega.hi[0] - omega.lo[0])
    ratio = norm_ratio(NormKind.INF, domain_norm, dim)
    offsets = _CHILD_OFFSETS[dim]

    level = 0
    active = np.zeros((1, dim), dtype=np.int64)
    got_levels, got_idx, got_keys = [], [], []
    total = float(mu.total)

    while True:
        scale = side * 2.0 ** -level
        if len(active) == 0:
            residual = 0.0
        elif mu.uniform:
            residual = mu.w0 * scale ** dim * len(active)
        else:
            a_lo = uni_lo[None, :] + active * scale
            residual = float(measure_box_batch(mu, a_lo, a_lo + scale).sum())
        if residual <= p.eta or len(active) == 0:
            res_lo = uni_lo[None, :] + active * scale
            res_hi = res_lo + scale
            break
        if level > p.max_depth:
            a_lo = uni_lo[None, :] + active * scale
            centers = a_lo + 0.5 * scale
            deltas = g.delta_batch(centers[:8])
            stuck = [{"lo": [float(v) for v in a_lo[i]],
                      "hi": [float(v) for v in a_lo[i] + scale],
                      "delta": float(deltas[i]),
                      "needed": float(0.5 * scale * ratio)}
                     for i in range(min(8, len(active)))]
            raise DepthExceeded(
                f"residual {residual:.3e} > eta {p.eta:.3e} at depth "
                f"{p.max_depth} ({len(active)} cells stuck)", stuck=stuck)

        centers = uni_lo[None, :] + (active + 0.5) * scale
        deltas = g.delta_batch(centers)
        fine = (0.5 * scale * ratio) <= deltas
        if fine.any():
            signs = 2.0 * offsets - 1.0
            kids = centers[fine][:, None, :] + 0.25 * scale * signs[None, :, :]
            kid_d = g.delta_batch(kids.reshape(-1, dim)) \
                .reshape(-1, len(offsets)).min(axis=1)
            ok = (0.25 * scale * ratio) <= kid_d
            fine[np.nonzero(fine)[0][~ok]] = False
        if fine.any():
            emitted = active[fine]
            got_levels.append(np.full(len(emitted), level, dtype=np.int32))
            got_idx.append(emitted)
            got_keys.append(_morton_keys(level, emitted, dim))
        coarse = active[~fine]
        if len(coarse):
            active = (coarse[:, None, :] * 2 + offsets[None, :, :]) \
                .reshape(-1, dim)
        else:
            active = np.empty((0, dim), dtype=np.int64)
        level += 1

    if got_levels:
        levels = np.concatenate(got_levels)
        indices = np.concatenate(got_idx)
        keys = np.concatenate(got_keys)
        order = np.argsort(keys, kind="stable")
        levels, indices, keys = levels[order], indices[order], keys[order]
    else:
        levels = np.empty(0, dtype=np.int32)
        indices = np.empty((0, dim), dtype=np.int64)
        keys = np.empty(0, dtype=np.int64)

    step = side * (2.0 ** -levels.astype(float))
    tags = uni_lo[None, :] + (indices + 0.5) * step[:, None]
    halfsides = 0.5 * step
    fam = TaggedFamily(kind="cube", universe=omega, domain_norm=domain_norm,
                       levels=levels, indices=indices, tags=tags,
                       halfsides=halfsides, keys=keys,
                       residual_measure=float(residual),
                       residual_los=res_lo, residual_his=res_hi)
    if total and fam.residual_measure > total:
        fam.warnings.append("residual exceeds total measure; check density")
    return fam


def vitali_ball_pack(omega: Box, g: Gauge, mu: RadonMeasure, p: SieveParams,
                     domain_norm: NormKind = NormKind.TWO,
                     max_balls: int = 4096) -> TaggedFamily:
    """Greedy disjoint gauge-fine balls until the residual drops to eta.

    Candidates are dyadic cell centers by increasing level; each takes the
    largest radius allowed by the gauge, the universe walls, and the balls
    already placed.  Exhausting the candidate budget leaves a ResidualStuck
    warning on the family rather than failing.
    """
    _require_square(omega)
    dim = omega.dim
    uni_lo = np.asarray(omega.lo)
    uni_hi = np.asarray(omega.hi)
    side = float(omega.hi[0] - omega.lo[0])
    unit_vol = ball_volume(domain_norm, dim, 1.0)
    if not mu.uniform:
        raise ValueError("ball packing implemented for uniform densities")

    total = float(mu.total)
    centers, radii, keys = [], [], []
    covered = 0.0
    stuck = False
    for level in range(p.max_depth + 1):
        if total - covered <= p.eta:
            break
        scale = side * 2.0 ** -level
        grid = np.arange(2 ** level, dtype=np.int64)
        mesh = np.array(np.meshgrid(*([grid] * dim), indexing="ij"),
                        dtype=np.int64).reshape(dim, -1).T
        cand_keys = _morton_keys(level, mesh, dim)
        order = np.argsort(cand_keys, kind="stable")
        mesh = mesh[order]
        cand_keys = cand_keys[order]
        cents = uni_lo[None, :] + (mesh + 0.5) * scale
        deltas = g.delta_batch(cents)
        walls = np.minimum(cents - uni_lo[None, :],
                           uni_hi[None, :] - cents).min(axis=1)
        viable = np.minimum(deltas, walls) >= 0.25 * scale
        cents, deltas, cand_keys = cents[viable], deltas[viable], cand_keys[viable]
        placed = np.array(centers) if centers else np.empty((0, dim))
        placed_r = np.array(radii) if radii else np.empty(0)
        for i in range(len(cents)):
            if total - covered <= p.eta:
                break
            x = cents[i]
            wall = float(np.minimum(x - uni_lo, uni_hi - x).min())
            r = min(float(deltas[i]), wall)
            if len(placed):
                gaps = norm_batch(placed - x[None, :], domain_norm) - placed_r
                r = min(r, float(gaps.min()))
            if r < 0.25 * scale:
                continue
            centers.append(tuple(float(c) for c in x))
            radii.append(r)
            keys.append(int(cand_keys[i]))
            placed = np.vstack([placed, x[None, :]])
            placed_r = np.append(placed_r, r)
            covered += mu.w0 * unit_vol * r ** dim
            if len(centers) >= max_balls:
                stuck = True
                break
        if stuck:
            break

    residual = total - covered
    tags = np.array(centers) if centers else np.empty((0, dim))
    fam = TaggedFamily(kind="ball", universe=omega, domain_norm=domain_norm,
                       levels=np.zeros(len(centers), dtype=np.int32),
                       indices=np.zeros((len(centers), dim), dtype=np.int64),
                       tags=tags,
                       halfsides=np.array(radii) if radii else np.empty(0),
                       keys=np.array(keys, dtype=np.int64),
                       residual_measure=float(residual),
                       residual_los=np.empty((0, dim)),
                       residual_his=np.empty((0, dim)),
                       dyadic=False)
    if residual > p.eta:
        import warnings as _w
        msg = (f"ball packing stalled at residual {residual:.3e} "
               f"(eta {p.eta:.3e})")
        fam.warnings.append(msg)
        _w.warn(msg, ResidualStuck)
    return fam


def _geometric_disjoint(los: np.ndarray, his: np.ndarray) -> bool:
    """Interior disjointness by plane sweep along axis 0."""
    n = len(los)
    order = np.argsort(los[:, 0], kind="stable")
    active: list[int] = []
    for oi in order:
        lo0 = los[oi, 0]
        active = [j for j in active if his[j, 0] > lo0]
        for j in active:
            if np.all(np.maximum(los[oi], los[j]) < np.minimum(his[oi], his[j])):
                return False
        active.append(oi)
    return True


def _balls_disjoint(tags: np.ndarray, radii: np.ndarray,
                    domain_norm: NormKind) -> bool:
    n = len(tags)
    for i in range(n):
        gaps = norm_batch(tags[i + 1:] - tags[i][None, :], domain_norm)
        if np.any(gaps < radii[i + 1:] + radii[i] - 1e-15):
            return False
    return True


def verify_family(fam: TaggedFamily, g: Gauge, mu: RadonMeasure, eta: float,
                  report: dict | None = None) -> bool:
    """Recheck every family invariant from scratch.

    Fineness (circumradius about the tag under the gauge, non-strict), tags
    inside each set's inner ball, interior disjointness, containment in the
    universe, and measure balance against mu to 1e-9 relative.
    """
    notes = report if report is not None else {}

    def fail(reason: str) -> bool:
        notes["reason"] = reason
        return False

    los, his, tags = fam.los, fam.his, fam.tags
    if len(fam):
        uni_lo = np.asarray(fam.universe.lo)
        uni_hi = np.asarray(fam.universe.hi)
        if np.any(los < uni_lo - 1e-12) or np.any(his > uni_hi + 1e-12):
            return fail("cell escapes the universe")
        if fam.kind == "cube":
            clean = fam.dyadic
            if clean:
                lo_ref = np.asarray(fam.universe.lo)
                side_ref = np.asarray(fam.universe.hi) - lo_ref
                step = side_ref[None, :] \
                    * (2.0 ** -fam.levels.astype(float))[:, None]
                clean = bool(np.array_equal(lo_ref[None, :] + fam.indices * step, los)
                             and np.array_equal(
                                 lo_ref[None, :] + (fam.indices + 1) * step, his))
            if clean:
                order = np.argsort(fam.keys, kind="stable")
                k = fam.keys[order]
                ends = k + _key_spans(fam.levels[order], fam.dim)
                if np.any(k[1:] < ends[:-1]):
                    return fail("interior overlap (key ranges collide)")
            else:
                if not _geometric_disjoint(los, his):
                    return fail("interior overlap (geometric sweep)")
        else:
            if not _balls_disjoint(tags, fam.halfsides, fam.domain_norm):
                return fail("ball interiors overlap")

        deltas = g.delta_batch(tags)
        if fam.kind == "cube":
            circ = _circumradius_about_tags(los, his, tags, fam.domain_norm)
            inner = norm_batch(tags - 0.5 * (los + his), fam.domain_norm)
            half = 0.5 * (his - los).min(axis=1)
            if np.any(inner > half + 1e-15):
                return fail("tag outside the inner ball of its cell")
        else:
            circ = fam.halfsides
        if np.any(circ > deltas):
            worst = int(np.argmax(circ - deltas))
            return fail(f"fineness violated at tag {tuple(tags[worst])}: "
                        f"circumradius {circ[worst]} > delta {deltas[worst]}")

    measures = fam.measures(mu) if len(fam) else np.empty(0)
    balance = float(measures.sum()) + fam.residual_measure
    total = float(mu.total)
    tol = 1e-9 * max(1.0, abs(total))
    if abs(balance - total) > tol:
        return fail(f"measure balance off: {balance} vs {total}")
    if fam.residual_measure > eta * (1 + 1e-12) + 1e-15:
        return fail(f"residual {fam.residual_measure} above eta {eta}")
    notes["cells"] = len(fam)
    notes["residual"] = fam.residual_measure
    return True


def refine_family(fam: TaggedFamily, fraction: float,
                  rng: np.random.Generator) -> TaggedFamily:
    """Split a random subset of cube cells into their dyadic children.

    Used to vary trials; the result covers the same region, so verification
    and every approximation bound are re-run against it unchanged.
    """
    if fam.kind != "cube" or not fam.dyadic:
        raise ValueError("refinement needs a dyadic cube family")
    n = len(fam)
    if n == 0:
        return fam
    count = max(1, int(round(fraction * n)))
    chosen = np.zeros(n, dtype=bool)
    chosen[rng.choice(n, size=min(count, n), replace=False)] = True

    dim = fam.dim
    offsets = _CHILD_OFFSETS[dim]
    keep_lv, keep_ix = fam.levels[~chosen], fam.indices[~chosen]
    split_lv, split_ix = fam.levels[chosen], fam.indices[chosen]
    child_ix = (split_ix[:, None, :] * 2 + offsets[None, :, :]).reshape(-1, dim)
    child_lv = np.repeat(split_lv + 1, 2 ** dim)

    levels = np.concatenate([keep_lv, child_lv]).astype(np.int32)
    indices = np.concatenate([keep_ix, child_ix])
    keys = np.empty(len(levels), dtype=np.int64)
    for lv in np.unique(levels):
        mask = levels == lv
        keys[mask] = _morton_keys(int(lv), indices[mask], dim)
    order = np.argsort(keys, kind="stable")

    lo = np.asarray(fam.universe.lo)
    side = np.asarray(fam.universe.hi) - lo
    step = side[None, :] * (2.0 ** -levels.astype(float))[:, None]
    tags = lo[None, :] + (indices + 0.5) * step
    halfsides = 0.5 * step[:, 0]
    return TaggedFamily(kind="cube", universe=fam.universe,
                        domain_norm=fam.domain_norm,
                        levels=levels[order], indices=indices[order],
                        tags=tags[order], halfsides=halfsides[order],
                        keys=keys[order],
                        residual_measure=fam.residual_measure,
                        residual_los=fam.residual_los,
                        residual_his=fam.residual_his,
                        warnings=list(fam.warnings))


def random_dyadic_partition(omega: Box, rng: np.random.Generator,
                            max_level: int = 5, stop_prob: float = 0.35,
                            domain_norm: NormKind = NormKind.TWO) -> TaggedFamily:
    """Full cover (residual 0) with randomly varied cell depths."""
    _require_square(omega)
    dim = omega.dim
    offsets = _CHILD_OFFSETS[dim]
    level = 0
    active = np.zeros((1, dim), dtype=np.int64)
    got_lv, got_ix = [], []
    while len(active):
        if level >= max_level:
            emit = np.ones(len(active), dtype=bool)
        else:
            emit = rng.random(len(active)) < stop_prob
        if emit.any():
            got_lv.append(np.full(int(emit.sum()), level, dtype=np.int32))
            got_ix.append(active[emit])
        rest = active[~emit]
        active = (rest[:, None, :] * 2 + offsets[None, :, :]).reshape(-1, dim) \
            if len(rest) else np.empty((0, dim), dtype=np.int64)
        level += 1

    levels = np.concatenate(got_lv)
    indices = np.concatenate(got_ix)
    keys = np.empty(len(levels), dtype=np.int64)
    for lv in np.unique(levels):
        mask = levels == lv
        keys[mask] = _morton_keys(int(lv), indices[mask], dim)
    order = np.argsort(keys, kind="stable")
    levels, indices, keys = levels[order], indices[order], keys[order]

    lo = np.asarray(omega.lo)
    side = np.asarray(omega.hi) - lo
    step = side[None, :] * (2.0 ** -levels.astype(float))[:, None]
    tags = lo[None, :] + (indices + 0.5) * step
    return TaggedFamily(kind="cube", universe=omega, domain_norm=domain_norm,
                        levels=levels, indices=indices, tags=tags,
                        halfsides=0.5 * step[:, 0], keys=keys,
                        residual_measure=0.0,
                        residual_los=np.empty((0, dim)),
                        residual_his=np.empty((0, dim)))


# --------------------------------------------------------------------------
# falsification hooks

def sabotage_overlap(fam: TaggedFamily, rng: np.random.Generator) -> TaggedFamily:
    """Shift one interior cell by a third of its width; neighbors overlap."""
    if len(fam) < 2:
        raise ValueError("need at least two cells to create an overlap")
    i = int(rng.integers(len(fam)))
    los = fam.los.copy()
    his = fam.his.copy()
    tags = fam.tags.copy()
    shift = (his[i, 0] - los[i, 0]) / 3.0
    direction = 1.0 if his[i, 0] + shift <= fam.universe.hi[0] else -1.0
    los[i, 0] += direction * shift
    his[i, 0] += direction * shift
    tags[i, 0] += direction * shift
    out = fam.replace_geometry(los, his, tags)
    out.warnings.append("sabotage: overlap-cells")
    return out


def sabotage_offcenter(fam: TaggedFamily, rng: np.random.Generator) -> TaggedFamily:
    """Move a few tags outside their cells' inner balls."""
    if len(fam) == 0:
        raise ValueError("empty family")
    tags = fam.tags.copy()
    count = min(3, len(fam))
    idx = rng.choice(len(fam), size=count, replace=False)
    for i in idx:
        tags[i, 0] += 1.2 * fam.halfsides[i]
    out = fam.replace_geometry(fam.los.copy(), fam.his.copy(), tags)
    out.warnings.append("sabotage: offcenter-tags")
    return out
