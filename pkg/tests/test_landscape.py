"""Stationary points and lower bound of the pointwise energy landscape.

Expected values are frozen from independent scalar oracles: the nonzero
critical branch of the logarithmic landscape satisfies s = tanh(c s) with
c = (alpha/2 + theta0/eps) * eps/theta ... reduced here to the two fixed
point equations s = tanh(2.25 s) (coupled branch) and s = tanh(2 s)
(pure-mixing branch) for the figure-2 parameter set, solved by bisection.
"""

import math

import numpy as np
import pytest
from scipy.optimize import brentq

from lcemul.energy import (
    PhysParams,
    energy_lower_bound_E0,
    find_landscape_minima,
    g_tilde_value,
)


def bisect_tanh_root(c):
    return brentq(lambda s: s - math.tanh(c * s), 0.3, 0.999999999, xtol=1e-14)


def closest(points, s, w):
    return min(points, key=lambda q: (q.s - s) ** 2 + (q.w - w) ** 2)


def test_fig2_minima(fig2_params):
    sbar = bisect_tanh_root(2.25)          # 0.97549582...
    sch = bisect_tanh_root(2.0)            # 0.95750402...
    assert sbar == pytest.approx(0.9754958257, abs=1e-9)
    assert sch == pytest.approx(0.9575040241, abs=1e-9)

    pts = find_landscape_minima(fig2_params, (-1.0, 1.0, 0.0, 1.5))
    mins = [q for q in pts if q.kind == "min"]
    glob = closest(mins, sbar, math.sqrt(sbar))
    assert glob.s == pytest.approx(sbar, abs=1e-6)
    assert glob.w == pytest.approx(math.sqrt(sbar), abs=1e-6)
    loc = closest(mins, -sch, 0.0)
    assert loc.s == pytest.approx(-sch, abs=1e-6)
    assert loc.w == pytest.approx(0.0, abs=1e-9)
    # the global minimum is the coupled branch
    assert glob.value < loc.value
    # (+s_CH, 0) continues into w > 0, so it is a saddle
    saddles = [q for q in pts if q.kind == "saddle"]
    sad = closest(saddles, sch, 0.0)
    assert sad.s == pytest.approx(sch, abs=1e-6)


def test_benchmark_region_minimum(bench_params):
    pts = find_landscape_minima(bench_params, (0.5, 1.0, 0.0, 2.0))
    mins = [q for q in pts if q.kind == "min"]
    assert len(mins) == 1
    q = mins[0]
    assert q.s == pytest.approx(1.0, abs=1e-9)
    assert q.w == pytest.approx(math.sqrt(0.5), abs=1e-9)
    assert q.on_boundary
    assert q.value == pytest.approx(-0.625, abs=1e-12)


def test_alpha_zero_minima_on_axis():
    p = PhysParams(alpha=0.0)
    pts = find_landscape_minima(p, (-0.5, 1.5, 0.0, 1.0))
    for q in pts:
        if q.kind == "min":
            assert q.w == pytest.approx(0.0, abs=1e-9)


def test_e0_restricted(bench_params):
    e0 = energy_lower_bound_E0(bench_params, (0.0, 1.0, 0.0, 2.0))
    assert e0 == pytest.approx(-0.625, abs=1e-6)


def test_e0_unrestricted(bench_params):
    # stationary branch: 20 s (s - 1) = 2.5  =>  s = (1 + sqrt(1.5)) / 2
    s_star = (1.0 + math.sqrt(1.5)) / 2.0
    assert 20 * s_star * (s_star - 1) == pytest.approx(2.5, abs=1e-12)
    w_star = math.sqrt(s_star - 0.5)
    expect = g_tilde_value(s_star, w_star, bench_params)
    assert expect == pytest.approx(-0.78125, abs=1e-12)
    e0 = energy_lower_bound_E0(bench_params, (-0.5, 2.0, 0.0, 2.0))
    assert e0 == pytest.approx(-0.78125, abs=1e-9)
    pts = find_landscape_minima(bench_params, (-0.5, 2.0, 0.0, 2.0))
    glob = min((q for q in pts if q.kind == "min"), key=lambda q: q.value)
    assert glob.s == pytest.approx(s_star, abs=1e-8)
    assert glob.w == pytest.approx(w_star, abs=1e-8)


def test_e0_nonnegative_when_uncoupled():
    p = PhysParams(alpha=0.0, beta=0.0)
    assert energy_lower_bound_E0(p, (0.0, 1.0, 0.0, 1.0)) == pytest.approx(0.0, abs=1e-12)


def test_g_above_e0_and_minima_hessian(fig2_params):
    region = (-1.0, 1.0, 0.0, 1.5)
    e0 = energy_lower_bound_E0(fig2_params, region)
    from lcemul.energy import g_value

    rng = np.random.default_rng(0)
    s = rng.uniform(-0.999, 0.999, 300)
    w = rng.uniform(0.0, 1.5, 300)
    assert np.all(g_value(s, w, fig2_params) >= e0 - 1e-10)

    from lcemul.energy import _landscape_funcs

    _, _, _, hess = _landscape_funcs(fig2_params)
    for q in find_landscape_minima(fig2_params, region):
        if q.kind != "min":
            continue
        eigs = np.linalg.eigvalsh(hess(q.s, max(q.w, 0.0)))
        assert eigs[0] >= -1e-8


def test_empty_region_no_points(bench_params):
    # no stationary point inside a small off-branch window: empty, not an error
    pts = find_landscape_minima(bench_params, (0.15, 0.3, 0.5, 0.8), scan=64)
    interior = [q for q in pts if not q.on_boundary]
    assert interior == []
