"""Oracle integrity for the bundled integrand corpus.

Every closed-form oracle (signed integral, absolute integral, deviation
integral, halfside certificates, concentration bounds) is checked against
an independent route: brute midpoint sums in 1-d, the adaptive quadrature
engine in 2-d, and direct sampling for the certificates.
"""

import json
import math

import numpy as np
import pytest

from conftest import brute_mean_dev
from morsegauge.corpus import MANDATORY, corpus_function, corpus_names
from morsegauge.geometry import NormKind
from morsegauge.quadrature import adaptive_box_quadrature

ALL_NAMES = corpus_names()


def random_window(f, rng, margin=0.0):
    lo = np.asarray(f.universe.lo)
    hi = np.asarray(f.universe.hi)
    a = rng.uniform(lo + margin, hi - margin)
    b = rng.uniform(a, hi - margin)
    width = np.maximum(b - a, 1e-3)
    return a, np.minimum(a + width, hi)


# ---------------------------------------------------------------------------
# registry
# ---------------------------------------------------------------------------

def test_registry_contents():
    assert set(MANDATORY) <= set(ALL_NAMES)
    assert len(ALL_NAMES) == 8
    with pytest.raises(KeyError):
        corpus_function("no_such_entry")


def test_y_norm_is_plumbed_through():
    f = corpus_function("constant", y_norm=NormKind.ONE)
    assert f.sup_norm == pytest.approx(1.4)  # |0.6| + |0.8|
    f2 = corpus_function("constant", y_norm=NormKind.TWO)
    assert f2.sup_norm == pytest.approx(1.0)


# ---------------------------------------------------------------------------
# frozen spot values
# ---------------------------------------------------------------------------

def test_eval_spot_values():
    lin = corpus_function("linear1")
    assert lin.eval((0.25,))[0] == 0.25
    step = corpus_function("step2")
    assert tuple(step.eval((0.25,))) == (1.0, 0.0)
    assert tuple(step.eval((0.75,))) == (0.0, 1.0)
    assert tuple(step.eval((0.5,))) == (0.0, 1.0)  # right-hand value at the cut
    assert tuple(corpus_function("step2_avg").eval((0.5,))) == (0.5, 0.5)
    sign = corpus_function("sign1")
    assert sign.eval((0.0,))[0] == 1.0
    assert sign.eval((-0.5,))[0] == -1.0
    check = corpus_function("checker2d")
    assert check.eval((0.1, 0.1))[0] == 0.0
    assert check.eval((0.3, 0.1))[0] == 1.0
    lip = corpus_function("lipschitz2d")
    assert lip.eval((0.5, 0.5))[0] == pytest.approx(lip.amp)
    spike = corpus_function("spike1")
    assert spike.eval((0.25,))[0] == 2.0
    assert spike.eval((0.0,))[0] == 0.0


def test_abs_totals():
    assert corpus_function("linear1").abs_total() == pytest.approx(0.5)
    assert corpus_function("spike1").abs_total() == pytest.approx(4.0)
    assert corpus_function("sign1").abs_total() == pytest.approx(2.0)
    assert corpus_function("constant").abs_total() == pytest.approx(1.0)
    assert corpus_function("checker2d").abs_total() == pytest.approx(0.5)
    # int of amp sin(pi x) sin(pi y) = amp (2/pi)^2
    assert corpus_function("lipschitz2d").abs_total() == pytest.approx(0.1 * 4 / math.pi ** 2)


def test_eval_batch_matches_eval(rng):
    for name in ALL_NAMES:
        f = corpus_function(name)
        lo = np.asarray(f.universe.lo)
        hi = np.asarray(f.universe.hi)
        X = rng.uniform(lo, hi, size=(40, f.dim_in))
        got = f.eval_batch(X)
        want = np.stack([f.eval(x) for x in X])
        assert np.array_equal(got, want), name


# ---------------------------------------------------------------------------
# signed-integral oracles vs independent routes
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("name", ALL_NAMES)
def test_integral_oracle_vs_quadrature(name, rng):
    f = corpus_function(name)
    for _ in range(6):
        if name == "spike1":
            # one-sided windows keep quadrature off the singular point
            a = np.array([rng.uniform(0.02, 0.8)])
            b = np.array([rng.uniform(a[0] + 0.05, 1.0)])
        else:
            a, b = random_window(f, rng)
        want = f.integral_batch(a[None], b[None])[0]
        val, err = adaptive_box_quadrature(f.eval_batch, a, b, f.dim_out,
                                           tol=5e-3, strict=False)
        assert np.all(np.abs(val - want) <= err + 1e-9), (name, a, b)


@pytest.mark.parametrize("name", ALL_NAMES)
def test_integral_additivity_exact(name, rng):
    f = corpus_function(name)
    for _ in range(10):
        a, b = random_window(f, rng)
        axis = int(rng.integers(f.dim_in))
        mid = 0.5 * (a[axis] + b[axis])
        b1 = b.copy(); b1[axis] = mid
        a2 = a.copy(); a2[axis] = mid
        whole = f.integral_batch(a[None], b[None])[0]
        parts = f.integral_batch(a[None], b1[None])[0] + f.integral_batch(a2[None], b[None])[0]
        assert np.allclose(whole, parts, rtol=1e-12, atol=1e-14), name
        w_abs = f.abs_integral_batch(a[None], b[None])[0]
        p_abs = f.abs_integral_batch(a[None], b1[None])[0] + f.abs_integral_batch(a2[None], b[None])[0]
        assert np.isclose(w_abs, p_abs, rtol=1e-12, atol=1e-14), name


def test_norm_of_integral_below_abs_integral(rng):
    for name in ALL_NAMES:
        f = corpus_function(name)
        for _ in range(5):
            a, b = random_window(f, rng)
            signed = f.integral_batch(a[None], b[None])[0]
            absn = f.abs_integral_batch(a[None], b[None])[0]
            assert f.ynorm(signed) <= absn * (1 + 1e-12) + 1e-15, name


# ---------------------------------------------------------------------------
# deviation oracles
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("name", ["linear1", "step2", "sign1", "constant"])
def test_dev_integral_vs_brute_1d(name, rng):
    f = corpus_function(name)
    for _ in range(8):
        a, b = random_window(f, rng)
        v = f.eval(rng.uniform(f.universe.lo, f.universe.hi))
        v = v + rng.normal(scale=0.3, size=v.shape)
        got, err = f.dev_integral_batch(a[None], b[None], v[None])
        want = brute_mean_dev(f, a, b, v)
        assert abs(got[0] - want) <= err[0] + 2e-4, name


def test_dev_integral_spike_one_sided(rng):
    f = corpus_function("spike1")
    for _ in range(8):
        a = rng.uniform(0.05, 0.8)
        b = rng.uniform(a + 0.05, 1.0)
        v = np.array([rng.uniform(0.0, 3.0)])
        got, err = f.dev_integral_batch(np.array([[a]]), np.array([[b]]), v[None])
        want = brute_mean_dev(f, (a,), (b,), v)
        assert abs(got[0] - want) <= err[0] + 2e-4


def test_dev_integral_lipschitz_encloses_truth(rng):
    f = corpus_function("lipschitz2d")
    for _ in range(6):
        c = rng.uniform(0.1, 0.9, size=2)
        h = rng.uniform(0.01, min(c.min(), (1 - c).min()))
        a, b = c - h, c + h
        v = f.eval(c)
        got, err = f.dev_integral_batch(a[None], b[None], v[None])
        # midpoint lattice estimate of the true deviation integral
        n = 81
        g = np.linspace(0, 1, n, endpoint=False) + 0.5 / n
        XY = np.stack(np.meshgrid(a[0] + 2 * h * g, a[1] + 2 * h * g), axis=-1).reshape(-1, 2)
        want = np.abs(f.eval_batch(XY)[:, 0] - v[0]).mean() * (2 * h) ** 2
        assert want <= got[0] + err[0] + 1e-6
        assert got[0] - err[0] <= want + 1e-6


def test_dev_integral_zero_at_own_value():
    f = corpus_function("step2")
    a, b = np.array([0.0]), np.array([0.5])
    got, err = f.dev_integral_batch(a[None], b[None], np.array([[1.0, 0.0]]))
    assert got[0] == 0.0 and err[0] == 0.0


# ---------------------------------------------------------------------------
# halfside certificates, checked by sampling
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("name", ["linear1", "step2", "checker2d", "spike1", "lipschitz2d"])
def test_certified_halfside_is_sound(name, rng):
    f = corpus_function(name)
    lo = np.asarray(f.universe.lo)
    hi = np.asarray(f.universe.hi)
    X = rng.uniform(lo, hi, size=(30, f.dim_in))
    X = X[~f.on_discontinuity_batch(X)]
    if name == "spike1":
        # keep the midpoint check numerically honest near the singularity
        X = X[np.abs(X[:, 0]) >= 0.05]
    budgets = rng.uniform(0.001, 0.2, size=len(X))
    hs = f.certified_halfside_batch(X, budgets)
    assert np.all(hs >= 0)
    for x, bud, h in zip(X, budgets, hs):
        if not (0 < h < math.inf):
            continue
        a = np.maximum(x - h, lo)
        b = np.minimum(x + h, hi)
        want = None
        if f.dim_in == 1:
            want = brute_mean_dev(f, a, b, f.eval(x)) / (b - a).prod()
        else:
            n = 41
            g = np.linspace(0, 1, n, endpoint=False) + 0.5 / n
            XY = np.stack(np.meshgrid(a[0] + (b[0] - a[0]) * g,
                                      a[1] + (b[1] - a[1]) * g), axis=-1).reshape(-1, 2)
            want = f.ynorm_rows(f.eval_batch(XY) - f.eval(x)[None, :]).mean()
        assert want <= bud * (1 + 1e-6) + 5e-4, (name, x, bud, h)


def test_certified_halfside_zero_on_jumps():
    step = corpus_function("step2")
    assert step.certified_halfside_batch(np.array([[0.5]]), np.array([0.1]))[0] == 0.0
    spike = corpus_function("spike1")
    assert spike.certified_halfside_batch(np.array([[0.0]]), np.array([0.1]))[0] == 0.0


def test_sup_dev_halfside_is_sound(rng):
    for name in ("step2", "lipschitz2d", "spike1"):
        f = corpus_function(name)
        lo = np.asarray(f.universe.lo)
        hi = np.asarray(f.universe.hi)
        X = rng.uniform(lo, hi, size=(20, f.dim_in))
        X = X[~f.on_discontinuity_batch(X)]
        eta = 0.05
        hs = f.sup_dev_halfside_batch(X, eta)
        for x, h in zip(X, hs):
            if not (0 < h < math.inf):
                continue
            a = np.maximum(x - h, lo)
            b = np.minimum(x + h, hi)
            P = rng.uniform(a, b, size=(200, f.dim_in))
            devs = f.ynorm_rows(f.eval_batch(P) - f.eval(x)[None, :])
            assert devs.max() <= eta * (1 + 1e-9), (name, x, h)


def test_bad_fraction_limits():
    assert corpus_function("step2").bad_fraction_limit((0.5,), 0.1) == pytest.approx(0.5)
    assert corpus_function("spike1").bad_fraction_limit((0.0,), 0.1) == 1.0
    assert corpus_function("step2").bad_fraction_limit((0.25,), 0.1) == 0.0
    # eta above the value span: nothing is ever bad
    assert corpus_function("step2").bad_fraction_limit((0.5,), 2.0) == 0.0


# ---------------------------------------------------------------------------
# concentration and absolute continuity
# ---------------------------------------------------------------------------

def test_worst_abs_concentration_frozen():
    spike = corpus_function("spike1")
    assert spike.worst_abs_concentration(0.02) == pytest.approx(2 * math.sqrt(0.04))
    lin = corpus_function("linear1")
    assert lin.worst_abs_concentration(0.25) == pytest.approx(0.25)  # sup 1 times m


def test_worst_abs_concentration_dominates_windows(rng):
    for name in ALL_NAMES:
        f = corpus_function(name)
        for _ in range(6):
            a, b = random_window(f, rng)
            m = float(np.prod(b - a))
            got = f.abs_integral_batch(a[None], b[None])[0]
            assert got <= f.worst_abs_concentration(m) * (1 + 1e-12) + 1e-15, name


def test_ac_modulus_frozen_and_consistent():
    spike = corpus_function("spike1")
    assert spike.ac_modulus(0.1) == pytest.approx(0.1 ** 2 / 8)
    lin = corpus_function("linear1")
    assert lin.ac_modulus(0.1) == pytest.approx(0.1)
    for name in ALL_NAMES:
        f = corpus_function(name)
        for eps in (0.5, 0.1, 0.01):
            gamma = f.ac_modulus(eps)
            assert gamma > 0
            assert f.worst_abs_concentration(gamma) <= eps * (1 + 1e-12), name


def test_ac_modulus_scales_with_density():
    spike = corpus_function("spike1")
    # doubling the density halves the allowed mu-measure budget twice over:
    # leb shrinks by 4, mu = w0 * leb by 2
    assert spike.ac_modulus(0.1, w0=2.0) == pytest.approx(spike.ac_modulus(0.1) / 2.0)


def test_shell_bounds():
    spike = corpus_function("spike1")
    assert spike.shell_bound(1) == math.inf
    assert spike.shell_bound(2) == 1.0
    assert spike.shell_bound(3) == 0.0
    lin = corpus_function("linear1")
    assert lin.shell_bound(1) == 1.0
    assert lin.shell_bound(3) == 0.0
    with pytest.raises(ValueError):
        lin.shell_bound(0)


# ---------------------------------------------------------------------------
# discontinuity bookkeeping
# ---------------------------------------------------------------------------

def test_discontinuity_flags():
    step = corpus_function("step2")
    assert step.on_discontinuity((0.5,))
    assert not step.on_discontinuity((0.499,))
    assert step.discontinuity_distance((0.3,)) == pytest.approx(0.2)
    check = corpus_function("checker2d")
    assert check.on_discontinuity((0.25, 0.6))
    assert check.on_discontinuity((0.1, 0.75))
    assert not check.on_discontinuity((0.1, 0.1))
    assert check.discontinuity_distance((0.1, 0.1)) == pytest.approx(0.15)
    assert corpus_function("lipschitz2d").discontinuities() == []


def test_checker_discontinuity_pieces_carry_eval_values():
    check = corpus_function("checker2d")
    pieces = check.discontinuities()
    assert len(pieces) == 24  # 2 axes x 3 lines x 4 segments
    for p in pieces:
        c = p.region.center()
        assert np.array_equal(p.value, check.eval(c))


def test_remark_points():
    assert corpus_function("step2_avg").remark_points() == [(0.5,)]
    assert corpus_function("step2").remark_points() == []


# ---------------------------------------------------------------------------
# structure and metadata
# ---------------------------------------------------------------------------

def test_piece_structures():
    assert len(corpus_function("step2").piece_structure()) == 2
    assert len(corpus_function("checker2d").piece_structure()) == 16
    assert len(corpus_function("constant").piece_structure()) == 1
    assert corpus_function("lipschitz2d").piece_structure() is None
    assert corpus_function("spike1").piece_structure() is None


def test_metadata_serializes():
    for name in ALL_NAMES:
        blob = json.dumps(corpus_function(name).metadata())
        assert name in blob
