"""Acceptance gate: end-to-end checks the package must pass, one printed
pass/fail line per criterion (run with -s to see them on success).

1. accuracy chain on the six mandatory integrands at eps 0.1 and 0.01,
   five trials each, under a five-minute budget
2. chain inequalities on every report from criterion 1, 1e-9 relative
3. gauge soundness sweeps at ten thousand probes per integrand
4. set-function bounds: local gap, family mass, reconstruction
5. compact continuity sets with a positive-separation modulus on ten
   thousand sampled pairs
6. oracle integrity: closed forms vs adaptive quadrature on random boxes,
   exact dyadic additivity of grid measures
7. falsification: every sabotage mode is caught by a verifier
"""

import math
import time

import numpy as np
import pytest

from morsegauge.analysis import lusin_compact_set
from morsegauge.cli import main as cli_main
from morsegauge.corpus import MANDATORY, corpus_function, corpus_names
from morsegauge.gauge import GaugeBuildParams, build_gauge, soundness_sweep
from morsegauge.geometry import Box
from morsegauge.measure import RadonMeasure, measure_box_exact
from morsegauge.quadrature import adaptive_box_quadrature
from morsegauge.riemann import verify_corollary, verify_theorem

EPS_GRID = (0.1, 0.01)
TRIALS = 5
TIME_BUDGET_S = 300.0
SWEEP_PROBES = 10_000
PAIR_SAMPLES = 10_000
BOXES_PER_FN = 100


def _line(ok: bool, text: str) -> None:
    print(f"[{'PASS' if ok else 'FAIL'}] {text}", flush=True)
    assert ok, text


@pytest.fixture(scope="module")
def theorem_reports():
    t0 = time.monotonic()
    out = {}
    for name in MANDATORY:
        f = corpus_function(name)
        mu = RadonMeasure.unit(f.universe)
        for eps in EPS_GRID:
            out[(name, eps)] = verify_theorem(f, mu, eps, trials=TRIALS,
                                              seed=0)
    return out, time.monotonic() - t0


def test_criterion_1_theorem_suite(theorem_reports):
    reports, elapsed = theorem_reports
    n = sum(len(v) for v in reports.values())
    failures = [r for v in reports.values() for r in v if not r.ok()]
    worst_l1 = max(r.l1_total for v in reports.values() for r in v)
    worst_local = max(r.local_error_sum for v in reports.values() for r in v)
    worst_trunc = max(r.truncation_error / (3 * r.eps)
                      for v in reports.values() for r in v)
    ok = (not failures and n == len(MANDATORY) * len(EPS_GRID) * TRIALS
          and elapsed <= TIME_BUDGET_S)
    _line(ok, f"criterion 1: theorem suite, {n - len(failures)}/{n} reports "
              f"ok, worst l1_total {worst_l1:.4g}, worst local "
              f"{worst_local:.4g}, worst truncation/3eps {worst_trunc:.3f}, "
              f"elapsed {elapsed:.1f}s (budget {TIME_BUDGET_S:.0f}s)")


def test_criterion_2_chain_inequalities(theorem_reports):
    reports, _ = theorem_reports
    rel = 1e-9
    checked = 0
    bad = []
    for (name, eps), batch in reports.items():
        f = corpus_function(name)
        for r in batch:
            l1p = r.l1_partition + r.l1_partition_error
            gap = f.ynorm(np.asarray(r.exact) - np.asarray(r.simple))
            slack = r.residual_abs + r.tail_abs
            if not r.local_error_sum <= l1p * (1 + rel) + 1e-15:
                bad.append((name, eps, r.trial, "local"))
            if not gap - slack <= l1p * (1 + rel) + 1e-15:
                bad.append((name, eps, r.trial, "gap"))
            checked += 1
    _line(not bad, f"criterion 2: chain inequalities on {checked} reports "
                   f"at 1e-9 relative, {len(bad)} violations")


def test_criterion_3_gauge_soundness():
    total_probes = 0
    total_viol = 0
    worst_ratio = 0.0
    for name in MANDATORY:
        f = corpus_function(name)
        mu = RadonMeasure.unit(f.universe)
        for eps in EPS_GRID:
            p = GaugeBuildParams(eps=eps)
            g = build_gauge(f, mu, p)
            rep = soundness_sweep(f, g, mu, p, n_probes=SWEEP_PROBES, seed=0)
            total_probes += rep.probes + rep.a_probes
            total_viol += len(rep.violations)
            worst_ratio = max(worst_ratio, rep.max_budget_ratio)
    _line(total_viol == 0,
          f"criterion 3: gauge soundness, {total_probes} probes over "
          f"{len(MANDATORY) * len(EPS_GRID)} gauges, {total_viol} "
          f"violations, max budget ratio {worst_ratio:.3f}")


def test_criterion_4_set_function_suite():
    eps = 0.1
    bad = []
    worst_gap = 0.0
    worst_recon = 0.0
    for name in MANDATORY:
        f = corpus_function(name)
        mu = RadonMeasure.unit(f.universe)
        rep = verify_corollary(f, mu, eps, seed=0, n_random=20)
        if not rep.ok():
            bad.append(name)
        worst_gap = max(worst_gap, rep.riemann_gap)
        worst_recon = max(worst_recon, rep.reconstruction_gap)
    _line(not bad,
          f"criterion 4: set-function bounds at eps {eps} on "
          f"{len(MANDATORY)} integrands with 20 random families each, "
          f"worst local gap {worst_gap:.4g}, worst reconstruction "
          f"{worst_recon:.4g}")


def test_criterion_5_compact_continuity_sets():
    rng = np.random.default_rng(7)
    bad = []
    for name in ("step2", "checker2d"):
        f = corpus_function(name)
        mu = RadonMeasure.unit(f.universe)
        for eps in EPS_GRID:
            K = lusin_compact_set(f, f.universe, eps, mu)
            if not (K.omitted_measure < eps and K.separation > 0):
                bad.append((name, eps, "certificates"))
                continue
            vols = np.array([b.volume() for b in K.pieces])
            prob = vols / vols.sum()
            los = np.array([b.lo for b in K.pieces])
            his = np.array([b.hi for b in K.pieces])

            def sample(n):
                idx = rng.choice(len(vols), size=n, p=prob)
                u = rng.uniform(size=(n, f.dim_in))
                return los[idx] + u * (his[idx] - los[idx])

            X, Y = sample(PAIR_SAMPLES), sample(PAIR_SAMPLES)
            diff = f.ynorm_rows(f.eval_batch(X) - f.eval_batch(Y))
            dist = np.abs(X - Y).max(axis=1)
            viol = int(((diff > 0) & (dist < K.separation * (1 - 1e-12))).sum())
            if viol:
                bad.append((name, eps, f"{viol} modulus violations"))
    _line(not bad,
          f"criterion 5: continuity sets for step2/checker2d at eps "
          f"{EPS_GRID}, omitted < eps, separation positive, modulus clean "
          f"on {PAIR_SAMPLES} pairs each{'' if not bad else ': ' + repr(bad)}")


def test_criterion_6_oracle_integrity():
    rng = np.random.default_rng(13)
    names = corpus_names()
    mismatches = 0
    boxes = 0
    for name in names:
        f = corpus_function(name)
        lo = np.asarray(f.universe.lo)
        hi = np.asarray(f.universe.hi)
        for _ in range(BOXES_PER_FN):
            if name == "spike1":
                # quadrature stays off the non-integrable lattice point
                a = np.array([rng.uniform(0.01, 0.9)])
                b = np.array([rng.uniform(a[0] + 0.01, 1.0)])
                if rng.uniform() < 0.5:
                    a, b = -b, -a
            else:
                a = rng.uniform(lo, hi)
                b = rng.uniform(a, hi)
                b = np.maximum(b, a + 1e-3)
                b = np.minimum(b, hi)
            want = f.integral_batch(a[None], b[None])[0]
            val, err = adaptive_box_quadrature(f.eval_batch, a, b, f.dim_out,
                                               tol=5e-3, max_cells=20_000,
                                               strict=False)
            boxes += 1
            if not np.all(np.abs(val - want) <= err + 1e-9):
                mismatches += 1

    # exact additivity of grid measures under dyadic splits
    split_checks = 0
    split_bad = 0
    for dim, level in ((1, 3), (2, 2)):
        uni = Box((0.0,) * dim, (1.0,) * dim)
        vals = rng.uniform(0.5, 2.0, size=(2 ** level) ** dim)
        mu = RadonMeasure.from_grid(uni, level, list(vals))
        for _ in range(50):
            l = int(rng.integers(1, 5))
            cells = 2 ** l
            i = rng.integers(0, cells - 1, size=dim)
            a = i / cells
            b = (i + 2) / cells
            axis = int(rng.integers(dim))
            mid_hi = b.copy()
            mid_hi[axis] = (i[axis] + 1) / cells
            mid_lo = a.copy()
            mid_lo[axis] = (i[axis] + 1) / cells
            whole = measure_box_exact(mu, Box(tuple(a), tuple(b)))
            parts = (measure_box_exact(mu, Box(tuple(a), tuple(mid_hi)))
                     + measure_box_exact(mu, Box(tuple(mid_lo), tuple(b))))
            split_checks += 1
            if whole != parts:
                split_bad += 1
    ok = mismatches == 0 and split_bad == 0
    _line(ok, f"criterion 6: oracle integrity, {boxes} quadrature boxes "
              f"({mismatches} outside certified bounds), {split_checks} "
              f"dyadic splits ({split_bad} inexact)")


def test_criterion_7_falsification(tmp_path, capsys):
    modes = ("inflate-delta", "overlap-cells", "offcenter-tags")
    caught = []
    for mode in modes:
        code = cli_main(["run-theorem", "--fn", "linear1", "--eps", "0.1",
                         "--trials", "1", "--sabotage", mode,
                         "--out", str(tmp_path / mode)])
        err = capsys.readouterr().err
        caught.append(code == 2 and "BOUND VIOLATED" in err)
    with capsys.disabled():
        _line(all(caught),
              "criterion 7: falsification, "
              + ", ".join(f"{m} {'caught' if c else 'MISSED'}"
                          for m, c in zip(modes, caught)))
