import math

import pytest
from scipy.integrate import solve_ivp

from lcemul.analysis import lp_decay_envelope
from lcemul.energy import PhysParams, Potential
from lcemul.grid import Grid2D, ScalarField, VectorField2
from lcemul.verify import (
    ConfigurationError,
    HomogeneousRelaxationProblem,
    convergence_order,
    default_suite,
    gradient_check,
    homogeneous_oracle,
    random_smooth_state,
    stress_identity_order,
    stress_identity_residual,
)


def ode_oracle(r0, phi_c, p, t):
    lam = p.alpha * (phi_c - p.phi_cr)
    sol = solve_ivp(lambda _t, r: [lam * r[0] - p.alpha * r[0] ** 3],
                    (0.0, t), [r0], rtol=1e-12, atol=1e-14)
    return float(sol.y[0, -1])


def test_gradient_check_passes_both_potentials():
    g = Grid2D(32, 32, 2.0, 2.0)
    for pot in (Potential.QUARTIC, Potential.FLORY_HUGGINS):
        p = PhysParams(potential=pot)
        st = random_smooth_state(g, p, 42)
        rmu, rh = gradient_check(st, p, direction_seed=42)
        assert rmu.passed and rh.passed


def test_gradient_check_zero_direction_degenerate():
    # a zero perturbation makes both pairing and difference vanish; the
    # comparison itself is then exact by construction
    g = Grid2D(16, 16)
    p = PhysParams()
    st = random_smooth_state(g, p, 0)
    from lcemul.energy import chemical_potential
    from lcemul.grid import inner_product

    mu = chemical_potential(st.phi, st.d, p)
    zero = ScalarField.zeros(g)
    assert inner_product(mu, zero) == 0.0


def test_gradient_check_reproducible():
    g = Grid2D(24, 24)
    p = PhysParams()
    st = random_smooth_state(g, p, 5)
    r1 = gradient_check(st, p, direction_seed=5)
    r2 = gradient_check(random_smooth_state(g, p, 5), p, direction_seed=5)
    assert r1[0].measured == r2[0].measured
    assert r1[1].measured == r2[1].measured


def test_stress_identity_constant_fields():
    g = Grid2D(24, 24)
    res = stress_identity_residual(ScalarField.full(g, 0.4),
                                   VectorField2.constant(g, 0.1, 0.2), PhysParams())
    assert res.measured < 1e-13


def test_stress_identity_refinement_ratios(bench_params):
    norms = []
    for n in (64, 128, 256):
        g = Grid2D(n, n, 2.0, 2.0)
        from lcemul.verify import _trig_test_fields

        phi, d = _trig_test_fields(g)
        res = stress_identity_residual(phi, d, bench_params)
        norms.append(res.measured)
        assert res.passed  # projection never increases the residual
    for a, b in zip(norms, norms[1:]):
        assert 3.6 < a / b < 4.4


def test_stress_identity_order_with_gamma():
    res = stress_identity_order(PhysParams(gamma=0.05), sizes=(64, 128, 256))
    assert res.passed
    assert res.measured == pytest.approx(2.0, abs=0.4)


def test_stress_projection_reduces_residual(bench_params):
    from lcemul.verify import band_limited_field

    g = Grid2D(48, 48, 2.0, 2.0)
    rng_fields = [(0.4 * band_limited_field(g, s), 0.6 * band_limited_field(g, s + 50),
                   0.5 * band_limited_field(g, s + 90)) for s in range(4)]
    for fphi, fdx, fdy in rng_fields:
        res = stress_identity_residual(ScalarField(g, 0.5 + fphi),
                                       VectorField2(g, fdx, fdy), bench_params)
        assert res.measured <= res.tolerance * (1 + 1e-12)


def test_homogeneous_oracle_fixed_point(bench_params):
    rinf = math.sqrt(1.0 - bench_params.phi_cr)
    for t in (0.0, 0.1, 5.0):
        assert homogeneous_oracle(rinf, 1.0, bench_params, t) == pytest.approx(rinf, rel=1e-12)


def test_homogeneous_oracle_reference_value(bench_params):
    val = homogeneous_oracle(0.95, 1.0, bench_params, 0.1)
    assert val == pytest.approx(0.773391789338969, abs=1e-12)


def test_homogeneous_oracle_long_time_limit(bench_params):
    assert homogeneous_oracle(0.95, 1.0, bench_params, 1e6) == pytest.approx(
        math.sqrt(0.5), rel=1e-12)
    # decaying branch: phi below phi_cr drives |d| to zero
    assert homogeneous_oracle(0.95, 0.2, bench_params, 1e6) == 0.0


@pytest.mark.parametrize("r0,phi_c,t", [
    (0.95, 1.0, 0.1),    # growth branch toward sqrt(0.5)
    (0.3, 1.0, 0.2),     # approach from below
    (0.8, 0.2, 0.3),     # lambda < 0, decaying branch
    (0.8, 0.5, 0.7),     # lambda = 0, algebraic decay
])
def test_homogeneous_oracle_vs_adaptive_integration(bench_params, r0, phi_c, t):
    closed = homogeneous_oracle(r0, phi_c, bench_params, t)
    assert closed == pytest.approx(ode_oracle(r0, phi_c, bench_params, t), abs=1e-9)


def test_simulated_homogeneous_respects_envelope(bench_params):
    # discrete |d(t)|_2^2 never exceeds the Gronwall envelope at p = 2
    from lcemul.dynamics import NumParams, step_theta
    from lcemul.energy import State, chemical_potential, molecular_field
    from lcemul.grid import integrate

    g = Grid2D(8, 8, 2.0, 2.0)
    p = bench_params
    phi = ScalarField.full(g, 1.0)
    d = VectorField2.constant(g, 0.0, 0.95)
    st = State(0.0, phi, d, mu=chemical_potential(phi, d, p),
               h=molecular_field(phi, d, p))
    np_ = NumParams(dt=1e-3)
    d0_l2sq = integrate(ScalarField(g, st.d.x ** 2 + st.d.y ** 2))
    for k in range(1, 201):
        st = step_theta(st, None, p, np_).new_state
        l2sq = integrate(ScalarField(g, st.d.x ** 2 + st.d.y ** 2))
        env = lp_decay_envelope(d0_l2sq, 2, p.alpha, p.phi_cr, g.measure, st.t)
        assert l2sq <= env + 1e-8


def test_convergence_order_theta_half(bench_params):
    res = convergence_order(HomogeneousRelaxationProblem(bench_params, theta=0.5),
                            (4e-3, 2e-3, 1e-3, 5e-4))
    assert res.passed
    assert res.measured == pytest.approx(2.0, abs=0.2)


def test_convergence_order_theta_one(bench_params):
    res = convergence_order(HomogeneousRelaxationProblem(bench_params, theta=1.0),
                            (4e-3, 2e-3, 1e-3, 5e-4))
    assert res.passed
    assert res.measured == pytest.approx(1.0, abs=0.2)


def test_convergence_order_needs_three_points(bench_params):
    with pytest.raises(ConfigurationError):
        convergence_order(HomogeneousRelaxationProblem(bench_params), (1e-3,))


def test_default_suite_oracle_group():
    results = default_suite("oracle")
    assert results and all(r.passed for r in results)
    with pytest.raises(ConfigurationError):
        default_suite("bogus")
