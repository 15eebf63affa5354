"""Independent oracles and identity checks.

Everything here deliberately avoids the solver's code paths: gradient
checks difference the energy functional directly, the stress identity is
assembled from the public operators term by term, and the homogeneous
relaxation oracle is a closed-form solution of the reduced ODE.  All
checks are seeded and reproduce bit-identically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from lcemul.energy import (
    PhysParams,
    Potential,
    State,
    chemical_potential,
    free_energy,
    mixing_density,
    molecular_field,
)
from lcemul.flow import project_divergence_free
from lcemul.grid import (
    Grid2D,
    ScalarField,
    VectorField2,
    ddx,
    ddy,
    grad_arrays,
    inner_product,
    l2_norm,
)

__all__ = [
    "OracleResult",
    "ConfigurationError",
    "band_limited_field",
    "random_smooth_state",
    "gradient_check",
    "stress_identity_residual",
    "stress_identity_order",
    "homogeneous_oracle",
    "HomogeneousRelaxationProblem",
    "convergence_order",
    "default_suite",
]


class ConfigurationError(ValueError):
    """An oracle was invoked with an unusable configuration."""


@dataclass
class OracleResult:
    name: str
    measured: float
    expected: float
    tolerance: float
    passed: bool
    details: str = ""


def band_limited_field(grid: Grid2D, seed: int, kmax: int = 3, amp: float = 1.0) -> np.ndarray:
    """Random real trigonometric polynomial with |k|_inf <= kmax, max-norm amp."""
    rng = np.random.default_rng(seed)
    X, Y = grid.meshgrid()
    f = np.zeros(grid.shape)
    for kx in range(-kmax, kmax + 1):
        for ky in range(0, kmax + 1):
            if kx == 0 and ky == 0:
                continue
            c, s = rng.standard_normal(2) / (1.0 + kx * kx + ky * ky)
            phase = 2.0 * np.pi * (kx * X / grid.lx + ky * Y / grid.ly)
            f += c * np.cos(phase) + s * np.sin(phase)
    m = np.max(np.abs(f))
    return f * (amp / m) if m > 0 else f


def random_smooth_state(grid: Grid2D, p: PhysParams, seed: int) -> State:
    """Band-limited random state; phi kept within +-0.9 so both potentials apply."""
    phi = 0.9 * band_limited_field(grid, seed, amp=1.0)
    if p.potential is Potential.QUARTIC:
        phi = 0.5 + 0.45 * band_limited_field(grid, seed, amp=1.0)
    dx_ = 0.8 * band_limited_field(grid, seed + 101, amp=1.0)
    dy_ = 0.8 * band_limited_field(grid, seed + 202, amp=1.0)
    return State(0.0, ScalarField(grid, phi), VectorField2(grid, dx_, dy_))


def _energy_of(phi_vals, d, grid, p, flow=None):
    return free_energy(State(0.0, ScalarField(grid, phi_vals), d, flow=flow), p).e_total


def gradient_check(state: State, p: PhysParams, direction_seed: int = 0,
                   rel_tol: float = 1e-6) -> tuple[OracleResult, OracleResult]:
    """<mu, dphi> and <h, dd> against central differences of the energy."""
    g = state.grid
    dphi = band_limited_field(g, 1000 + direction_seed, amp=1.0)
    ddx_ = band_limited_field(g, 2000 + direction_seed, amp=1.0)
    ddy_ = band_limited_field(g, 3000 + direction_seed, amp=1.0)

    mu = chemical_potential(state.phi, state.d, p)
    h = molecular_field(state.phi, state.d, p)
    lhs_mu = inner_product(mu, ScalarField(g, dphi))
    lhs_h = inner_product(h, VectorField2(g, ddx_, ddy_))

    # cube-root-of-epsilon step: optimal for a central difference, where the
    # truncation error is O(step^2) against an O(eps/step) round-off term
    scale = 1.0 + float(np.max(np.abs(state.phi.values)))
    step = np.finfo(float).eps ** (1.0 / 3.0) * scale
    ep = _energy_of(state.phi.values + step * dphi, state.d, g, p)
    em = _energy_of(state.phi.values - step * dphi, state.d, g, p)
    fd_mu = (ep - em) / (2.0 * step)

    dplus = VectorField2(g, state.d.x + step * ddx_, state.d.y + step * ddy_)
    dminus = VectorField2(g, state.d.x - step * ddx_, state.d.y - step * ddy_)
    ep = _energy_of(state.phi.values, dplus, g, p)
    em = _energy_of(state.phi.values, dminus, g, p)
    fd_h = (ep - em) / (2.0 * step)

    def result(name, lhs, fd):
        denom = max(abs(lhs), abs(fd), 1e-14)
        rel = abs(lhs - fd) / denom
        return OracleResult(
            name=name, measured=lhs, expected=fd, tolerance=rel_tol,
            passed=rel < rel_tol,
            details=f"relative error {rel:.3e} (central difference step {step:.3e})",
        )

    return result("gradient_check_mu", lhs_mu, fd_mu), result("gradient_check_h", lhs_h, fd_h)


# ---------------------------------------------------------------------------
# stress identity

def _div_tensor(txx, txy, tyx, tyy, grid):
    """Row-wise divergence of a 2x2 tensor field, (div T)_i = D_j T_ij."""
    fx = ddx(txx, grid.hx) + ddy(txy, grid.hy)
    fy = ddx(tyx, grid.hx) + ddy(tyy, grid.hy)
    return fx, fy


def stress_identity_residual(phi: ScalarField, d: VectorField2, p: PhysParams) -> OracleResult:
    """Residual of the stress-divergence identity on one grid.

    Compares L = -eps div(grad phi x grad phi) - gamma div(|grad phi|^2
    grad phi x grad phi) - kappa div(grad d . grad d) - beta div((d.grad
    phi) grad phi x d) against R = grad(-energy density) + mu grad phi +
    (grad d)^T h.  Both are second-order discretizations of equal
    continuum quantities, so the residual is O(h^2); the Leray projection
    must not increase it (it removes the gradient part).  The order is
    assessed by stress_identity_order.
    """
    g = phi.grid
    gpx, gpy = grad_arrays(phi.values, g)
    grad2 = gpx * gpx + gpy * gpy
    gd = gpx * d.x + gpy * d.y

    coef = p.eps + p.gamma * grad2
    lx, ly = _div_tensor(coef * gpx * gpx, coef * gpx * gpy,
                         coef * gpy * gpx, coef * gpy * gpy, g)
    lx, ly = -lx, -ly

    gdxx, gdxy = grad_arrays(d.x, g)   # (d/dx d_x, d/dy d_x)
    gdyx, gdyy = grad_arrays(d.y, g)
    # (grad d . grad d)_{ij} = sum_k (d_i d_k)(d_j d_k)
    txx = gdxx * gdxx + gdyx * gdyx
    txy = gdxx * gdxy + gdyx * gdyy
    tyy = gdxy * gdxy + gdyy * gdyy
    fx, fy = _div_tensor(txx, txy, txy, tyy, g)
    lx -= p.kappa * fx
    ly -= p.kappa * fy

    if p.beta != 0.0:
        fx, fy = _div_tensor(gd * gpx * d.x, gd * gpx * d.y,
                             gd * gpy * d.x, gd * gpy * d.y, g)
        lx -= p.beta * fx
        ly -= p.beta * fy

    absd2 = d.x * d.x + d.y * d.y
    dens = (
        0.5 * p.eps * grad2
        + mixing_density(phi.values, p)
        + 0.25 * p.gamma * grad2 * grad2
        + 0.5 * p.kappa * (gdxx ** 2 + gdxy ** 2 + gdyx ** 2 + gdyy ** 2)
        + 0.25 * p.alpha * absd2 * absd2
        - 0.5 * p.alpha * (phi.values - p.phi_cr) * absd2
        + 0.5 * p.beta * gd * gd
    )
    mu = chemical_potential(phi, d, p)
    h = molecular_field(phi, d, p)
    # ((grad d)^T h)_i = (d_i d_k) h_k
    rx = -ddx(dens, g.hx) + mu.values * gpx + gdxx * h.x + gdyx * h.y
    ry = -ddy(dens, g.hy) + mu.values * gpy + gdxy * h.x + gdyy * h.y

    diff = VectorField2(g, lx - rx, ly - ry)
    plain = l2_norm(diff)
    projected = l2_norm(project_divergence_free(diff))
    return OracleResult(
        name="stress_identity_residual",
        measured=projected,
        expected=0.0,
        tolerance=plain,
        passed=projected <= plain * (1.0 + 1e-12),
        details=f"projected {projected:.6e}, plain {plain:.6e}, grid {g.nx}x{g.ny}",
    )


def _trig_test_fields(grid: Grid2D):
    X, Y = grid.meshgrid()
    kx = 2.0 * np.pi / grid.lx
    ky = 2.0 * np.pi / grid.ly
    phi = ScalarField(grid, 0.4 * np.sin(kx * X) * np.cos(ky * Y) + 0.1 * np.cos(kx * X))
    d = VectorField2(grid,
                     0.7 * np.cos(kx * X) * np.sin(ky * Y),
                     0.6 * np.sin(kx * X) + 0.2 * np.cos(ky * Y))
    return phi, d


def stress_identity_order(p: PhysParams, sizes=(64, 128, 256),
                          order_tol: float = 0.4) -> OracleResult:
    """Convergence order of the stress-identity residual under refinement."""
    norms = []
    hs = []
    for n in sizes:
        g = Grid2D(n, n, 2.0, 2.0)
        phi, d = _trig_test_fields(g)
        res = stress_identity_residual(phi, d, p)
        norms.append(res.measured)
        hs.append(g.hx)
    slope = float(np.polyfit(np.log(hs), np.log(norms), 1)[0])
    return OracleResult(
        name="stress_identity_order",
        measured=slope,
        expected=2.0,
        tolerance=order_tol,
        passed=abs(slope - 2.0) <= order_tol,
        details=f"projected residuals {['%.3e' % v for v in norms]} on grids {list(sizes)}",
    )


# ---------------------------------------------------------------------------
# homogeneous relaxation oracle

def homogeneous_oracle(r0: float, phi_const: float, p: PhysParams, t: float) -> float:
    """|d|(t) for the spatially homogeneous reduction d' = -(alpha|d|^2
    - alpha(phi - phi_cr)) d.

    In y = r^2 this is a Bernoulli equation with solution
    1/y(t) = (1/y0 - alpha/lambda) e^{-2 lambda t} + alpha/lambda,
    lambda = alpha (phi_const - phi_cr); the lambda = 0 limit is
    y = y0 / (1 + 2 alpha y0 t).  Valid for either sign of lambda.
    """
    if t < 0.0:
        raise ValueError("t must be nonnegative")
    if r0 == 0.0:
        return 0.0
    y0 = r0 * r0
    lam = p.alpha * (phi_const - p.phi_cr)
    if lam == 0.0:
        return math.sqrt(y0 / (1.0 + 2.0 * p.alpha * y0 * t))
    decay = math.exp(-2.0 * lam * t) if -2.0 * lam * t < 700.0 else math.inf
    inv_y = (1.0 / y0 - p.alpha / lam) * decay + p.alpha / lam
    if not math.isfinite(inv_y) or inv_y <= 0.0:
        # lambda < 0 with huge t underflows to the decayed state
        return 0.0 if lam < 0.0 else math.sqrt(lam / p.alpha)
    return math.sqrt(1.0 / inv_y)


@dataclass
class HomogeneousRelaxationProblem:
    """Homogeneous (phi const, d = (0, r)) relaxation run for order studies."""

    p: PhysParams
    r0: float = 0.95
    phi_const: float = 1.0
    t_final: float = 0.1
    theta: float = 0.5
    grid_n: int = 8

    @property
    def order(self) -> float:
        return 2.0 if self.theta == 0.5 else 1.0

    def exact(self) -> float:
        return homogeneous_oracle(self.r0, self.phi_const, self.p, self.t_final)

    def error(self, dt: float) -> float:
        from lcemul.dynamics import NumParams, step_theta

        g = Grid2D(self.grid_n, self.grid_n, 2.0, 2.0)
        st = State(0.0, ScalarField.full(g, self.phi_const),
                   VectorField2.constant(g, 0.0, self.r0))
        n_steps = round(self.t_final / dt)
        if abs(n_steps * dt - self.t_final) > 1e-12 * self.t_final:
            raise ConfigurationError(f"dt {dt} does not divide t_final {self.t_final}")
        np_ = NumParams(dt=dt, theta=self.theta)
        for _ in range(n_steps):
            st = step_theta(st, None, self.p, np_).new_state
        r_num = float(np.hypot(st.d.x, st.d.y).max())
        return abs(r_num - self.exact())


def convergence_order(problem, dt_list, order_tol: float = 0.2) -> OracleResult:
    """Least-squares slope of log error vs log dt against the scheme order."""
    if len(dt_list) < 3:
        raise ConfigurationError("need at least 3 dt values for an order fit")
    errors = [problem.error(dt) for dt in dt_list]
    slope = float(np.polyfit(np.log(dt_list), np.log(errors), 1)[0])
    expected = problem.order
    return OracleResult(
        name=f"convergence_order_theta_{problem.theta}",
        measured=slope,
        expected=expected,
        tolerance=order_tol,
        passed=abs(slope - expected) <= order_tol,
        details=f"errors {['%.3e' % e for e in errors]} at dt {list(dt_list)}",
    )


# ---------------------------------------------------------------------------
# suite driver (used by the CLI)

def default_suite(which: str = "all") -> list[OracleResult]:
    """Run the named verification group(s); 'all' runs everything."""
    results: list[OracleResult] = []
    run_gradient = which in ("all", "gradient")
    run_stress = which in ("all", "stress")
    run_oracle = which in ("all", "oracle")
    run_order = which in ("all", "order")
    if which not in ("all", "gradient", "stress", "oracle", "order"):
        raise ConfigurationError(f"unknown verification group '{which}'")

    if run_gradient:
        g = Grid2D(48, 48, 2.0, 2.0)
        for pot in (Potential.QUARTIC, Potential.FLORY_HUGGINS):
            p = PhysParams(potential=pot, gamma=1e-3)
            for seed in range(3):
                st = random_smooth_state(g, p, seed)
                rmu, rh = gradient_check(st, p, direction_seed=seed)
                rmu.name += f"_{pot.value}_seed{seed}"
                rh.name += f"_{pot.value}_seed{seed}"
                results.extend([rmu, rh])

    if run_stress:
        results.append(stress_identity_order(PhysParams()))
        results.append(stress_identity_order(PhysParams(gamma=0.05)))

    if run_oracle:
        from scipy.integrate import solve_ivp

        p = PhysParams()
        for (r0, phic, t) in ((0.95, 1.0, 0.1), (0.5, 0.2, 0.3), (0.7, 0.5, 0.5)):
            closed = homogeneous_oracle(r0, phic, p, t)
            lam = p.alpha * (phic - p.phi_cr)
            sol = solve_ivp(lambda _t, r: [lam * r[0] - p.alpha * r[0] ** 3],
                            (0.0, t), [r0], rtol=1e-12, atol=1e-14)
            ode = float(sol.y[0, -1])
            results.append(OracleResult(
                name=f"homogeneous_oracle_r0_{r0}_phi_{phic}",
                measured=closed,
                expected=ode,
                tolerance=1e-9,
                passed=abs(closed - ode) <= 1e-9,
                details="closed form vs adaptive ODE integration",
            ))

    if run_order:
        p = PhysParams()
        dts = (4e-3, 2e-3, 1e-3, 5e-4)
        results.append(convergence_order(HomogeneousRelaxationProblem(p, theta=0.5), dts))
        results.append(convergence_order(HomogeneousRelaxationProblem(p, theta=1.0), dts))

    return results
