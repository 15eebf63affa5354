import math

import numpy as np
import pytest

from lcemul.energy import (
    AnchoringForm,
    PhysParams,
    Potential,
    PotentialDomainError,
    State,
    chemical_potential,
    free_energy,
    g_tilde_value,
    g_value,
    mixing_deriv,
    molecular_field,
    potential_deriv,
    potential_value,
)
from lcemul.grid import Grid2D, ScalarField, VectorField2, grad_arrays

from conftest import drop_state


def fh_params(**kw):
    return PhysParams(potential=Potential.FLORY_HUGGINS, **kw)


# ---------------------------------------------------------------------------
# potentials

def test_fh_symmetry_and_endpoint():
    p = fh_params(theta_fh=1.5, theta0_fh=3.0)
    assert potential_value(0.0, p) == 0.0
    assert potential_deriv(0.0, p) == 0.0
    # endpoint limit Theta ln2 - Theta0/2, approached from inside
    limit = p.theta_fh * math.log(2.0) - 0.5 * p.theta0_fh
    assert potential_value(1.0 - 1e-13, p) == pytest.approx(limit, abs=1e-10)


def test_fh_domain_error():
    p = fh_params()
    for bad in (1.0, -1.0, 1.5):
        with pytest.raises(PotentialDomainError):
            potential_value(bad, p)
        with pytest.raises(PotentialDomainError):
            potential_deriv(bad, p)
    arr = np.array([0.0, 0.5, 1.01])
    with pytest.raises(PotentialDomainError):
        potential_value(arr, p)


def test_quartic_values():
    p = PhysParams(eps=0.1)
    assert potential_value(0.5, p) == pytest.approx(1.0 / (16 * p.eps), rel=1e-14)
    assert potential_value(0.0, p) == 0.0
    assert potential_value(1.0, p) == 0.0


def test_fh_convex_part_nonnegative():
    # F = Psi + Theta0/2 s^2 has F'' = Theta/(1-s^2) >= 0
    p = fh_params(theta_fh=1.5, theta0_fh=3.0)
    s = np.linspace(-0.999, 0.999, 101)
    fpp = p.theta_fh / (1.0 - s * s)
    assert np.all(fpp >= 0.0)


# ---------------------------------------------------------------------------
# free energy

def test_free_energy_zero_state(bench_params):
    g = Grid2D(16, 16)
    st = State(0.0, ScalarField.zeros(g), VectorField2.zeros(g))
    eb = free_energy(st, bench_params)
    for val in (eb.e_mix, eb.e_pol, eb.e_anch, eb.e_gamma, eb.e_kin, eb.e_total):
        assert val == 0.0


def test_free_energy_homogeneous_value(bench_params):
    # phi = 1, |d|^2 = 1 - phi_cr: density is -alpha (1 - phi_cr)^2 / 4
    g = Grid2D(16, 16, 2.0, 2.0)
    st = State(0.0, ScalarField.full(g, 1.0),
               VectorField2.constant(g, 0.0, math.sqrt(0.5)))
    eb = free_energy(st, bench_params)
    assert eb.e_total / g.measure == pytest.approx(-0.625, abs=1e-13)
    assert eb.e_anch == 0.0 and eb.e_gamma == 0.0


def test_free_energy_breakdown_sums(bench_params):
    g = Grid2D(24, 24)
    st = drop_state(g, width=0.05)
    eb = free_energy(st, bench_params)
    assert eb.e_total == eb.e_mix + eb.e_pol + eb.e_anch + eb.e_gamma + eb.e_kin
    assert eb.e_anch >= 0.0 and eb.e_gamma >= 0.0


def test_free_energy_against_brute_force(bench_params):
    # independent density-sum oracle, written from the definition, on the
    # full-size benchmark initial state
    g = Grid2D(128, 128, 2.0, 2.0)
    st = drop_state(g)
    p = bench_params
    phi, dx_, dy_ = st.phi.values, st.d.x, st.d.y
    gpx, gpy = grad_arrays(phi, g)
    gdx = grad_arrays(dx_, g)
    gdy = grad_arrays(dy_, g)
    total = 0.0
    for j in range(g.ny):
        for i in range(g.nx):
            grad2 = gpx[j, i] ** 2 + gpy[j, i] ** 2
            d2 = dx_[j, i] ** 2 + dy_[j, i] ** 2
            gd = gpx[j, i] * dx_[j, i] + gpy[j, i] * dy_[j, i]
            dens = 0.5 * p.eps * grad2
            dens += phi[j, i] ** 2 * (1 - phi[j, i]) ** 2 / p.eps
            dens += 0.5 * p.kappa * (gdx[0][j, i] ** 2 + gdx[1][j, i] ** 2
                                     + gdy[0][j, i] ** 2 + gdy[1][j, i] ** 2)
            dens += 0.25 * p.alpha * d2 * d2 - 0.5 * p.alpha * (phi[j, i] - p.phi_cr) * d2
            dens += 0.5 * p.beta * gd * gd
            total += dens
    total *= g.hx * g.hy
    eb = free_energy(st, p)
    assert eb.e_total == pytest.approx(total, rel=1e-12)


def test_free_energy_dominates_landscape_bound(bench_params):
    # E_total >= |Omega| E0 for states whose values lie in the scanned region
    # (gradient and anchoring densities are nonnegative)
    from lcemul.energy import energy_lower_bound_E0
    from lcemul.verify import band_limited_field

    g = Grid2D(32, 32, 2.0, 2.0)
    e0 = energy_lower_bound_E0(bench_params, (0.0, 1.0, 0.0, 2.0))
    rng_seeds = range(4)
    for seed in rng_seeds:
        phi = 0.5 + 0.5 * band_limited_field(g, seed)
        dx_ = 0.9 * band_limited_field(g, seed + 10)
        dy_ = 0.9 * band_limited_field(g, seed + 20)
        st = State(0.0, ScalarField(g, np.clip(phi, 0.0, 1.0)),
                   VectorField2(g, dx_, dy_))
        eb = free_energy(st, bench_params)
        assert eb.e_total - g.measure * e0 >= -1e-10 * abs(eb.e_total)


# ---------------------------------------------------------------------------
# variational derivatives

def test_mu_constant_fields(bench_params):
    g = Grid2D(16, 16)
    for c in (0.2, 0.8):
        mu = chemical_potential(ScalarField.full(g, c), VectorField2.zeros(g), bench_params)
        assert np.allclose(mu.values, mixing_deriv(c, bench_params), atol=1e-13)


def test_mu_vanishes_at_landscape_critical_point(bench_params):
    # interior critical point of the quartic landscape (s beyond 1)
    from lcemul.energy import find_landscape_minima

    pts = [q for q in find_landscape_minima(bench_params, (-0.5, 2.0, 0.0, 2.0))
           if q.kind == "min" and not q.on_boundary and q.w > 0]
    assert pts, "expected an interior minimum"
    s, w = pts[0].s, pts[0].w
    g = Grid2D(16, 16)
    mu = chemical_potential(ScalarField.full(g, s), VectorField2.constant(g, 0.0, w),
                            bench_params)
    assert np.max(np.abs(mu.values)) < 1e-9


def test_h_stationary_magnitude(bench_params):
    # |d|^2 = phi - phi_cr homogeneous: h = 0
    g = Grid2D(16, 16)
    phi_c = 0.9
    w = math.sqrt(phi_c - bench_params.phi_cr)
    h = molecular_field(ScalarField.full(g, phi_c), VectorField2.constant(g, 0.0, w),
                        bench_params)
    assert np.max(np.abs(h.x)) < 1e-13 and np.max(np.abs(h.y)) < 1e-13


def test_h_direct_value(bench_params):
    g = Grid2D(16, 16)
    h = molecular_field(ScalarField.full(g, 1.0), VectorField2.constant(g, 0.0, 0.95),
                        bench_params)
    assert np.allclose(h.x, 0.0, atol=1e-14)
    assert np.allclose(h.y, 3.82375, atol=1e-12)


@pytest.mark.parametrize("potential", [Potential.QUARTIC, Potential.FLORY_HUGGINS])
@pytest.mark.parametrize("gamma", [0.0, 1e-3])
def test_gradient_consistency(potential, gamma):
    from lcemul.verify import gradient_check, random_smooth_state

    p = PhysParams(potential=potential, gamma=gamma)
    g = Grid2D(32, 32, 2.0, 2.0)
    for seed in range(3):
        st = random_smooth_state(g, p, seed)
        rmu, rh = gradient_check(st, p, direction_seed=seed)
        assert rmu.passed, rmu.details
        assert rh.passed, rh.details


def test_isotropic_discrete_anchoring_mu():
    # mu anchoring term becomes -beta div(|d|^2 grad phi); h is unchanged
    g = Grid2D(24, 24, 2.0, 2.0)
    from lcemul.grid import div_arrays

    p_iso = PhysParams(anchoring_form=AnchoringForm.ISOTROPIC_DISCRETE)
    st = drop_state(g, width=0.05, d0=(0.3, 0.8))
    mu_iso = chemical_potential(st.phi, st.d, p_iso)
    p_none = PhysParams(beta=0.0)
    mu_base = chemical_potential(st.phi, st.d, p_none)
    gpx, gpy = grad_arrays(st.phi.values, g)
    absd2 = st.d.x ** 2 + st.d.y ** 2
    expected = mu_base.values - p_iso.beta * div_arrays(absd2 * gpx, absd2 * gpy, g)
    assert np.max(np.abs(mu_iso.values - expected)) < 1e-12
    h_iso = molecular_field(st.phi, st.d, p_iso)
    h_tens = molecular_field(st.phi, st.d, PhysParams())
    assert np.array_equal(h_iso.x, h_tens.x) and np.array_equal(h_iso.y, h_tens.y)


# ---------------------------------------------------------------------------
# reduced landscape values

def test_g_collapses_at_w0(fig2_params):
    p = fig2_params
    for s in (-0.7, 0.0, 0.9):
        psi = potential_value(s, p)
        assert g_value(s, 0.0, p) == pytest.approx(psi / p.eps, rel=1e-13, abs=1e-13)


def test_g_tilde_value(bench_params):
    assert g_tilde_value(1.0, math.sqrt(0.5), bench_params) == pytest.approx(-0.625, abs=1e-13)


def test_g_fig2_origin(fig2_params):
    assert g_value(0.0, 0.0, fig2_params) == 0.0


def test_g_domain(fig2_params):
    with pytest.raises(PotentialDomainError):
        g_value(1.2, 0.5, fig2_params)
    # closed interval allowed
    val = g_value(1.0, 0.5, fig2_params)
    assert math.isfinite(val)
