import numpy as np
import pytest

from morsegauge.measure import RadonMeasure


@pytest.fixture
def rng():
    return np.random.default_rng(20260817)


def unit_measure(f):
    return RadonMeasure.unit(f.universe)


def brute_mean_dev(f, lo, hi, v, n=20001):
    """Midpoint-rule deviation integral, independent of every oracle.

    Only trustworthy for 1-d integrands away from the singular point; the
    2-d entries get their independent check from adaptive quadrature.
    """
    lo, hi = float(lo[0]), float(hi[0])
    xs = np.linspace(lo, hi, n, endpoint=False) + (hi - lo) / (2 * n)
    vals = f.eval_batch(xs[:, None])
    devs = f.ynorm_rows(vals - np.asarray(v)[None, :])
    return float(devs.mean() * (hi - lo))
