"""Theta-method time stepping for the coupled (phi, mu, d, h) system.

One step solves the nonlinear system

    (phi' - phi)/dt + div(phib u) = lap((1-th) mu + th mu')
    mu' = chemical_potential(phi', d') + (delta/dt)(phi' - phi)
    (d' - d)/dt + (u.grad) db = -((1-th) h + th h')
    h' = molecular_field(phi', d')

(primes = new time level, bars = theta averages) by a monolithic Newton
iteration in which mu' and h' are eliminated exactly, leaving (phi', d').
The Jacobian is applied matrix-free (analytic linearization by default,
directional finite differences as an option) and preconditioned by the
constant-coefficient part of the operator inverted per Fourier mode: a
3x3 block built from eps, kappa, the mean potential curvature and the
mean polarization.

Convergence is measured on the dt-scaled update residual (the equations
above multiplied by dt), whose float64 round-off floor sits well below the
default tolerance; the 1/dt form would bottom out near 1e-8 because it
contains a fourth-order difference of an O(1) field.  GMRES is run with an
inexact-Newton forcing term (the tolerance needed to land the next Newton
residual at newton_tol), floored at linsolve_tol.

Mass conservation: the discrete equations conserve the mean of phi exactly
in exact arithmetic (the Laplacian and divergence stencils integrate to
zero); after each Newton solve the leftover mean error (at most the solver
tolerance) is removed by a constant shift so the conservation holds to
round-off over arbitrarily many steps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.fft as sfft
from scipy.sparse.linalg import LinearOperator, gmres

from lcemul import _kernels as K
from lcemul.diagnostics import DiagnosticsRow
from lcemul.energy import (
    AnchoringForm,
    PhysParams,
    Potential,
    PotentialDomainError,
    State,
    chemical_potential,
    free_energy,
    molecular_field,
)
from lcemul.grid import (
    Grid2D,
    ScalarField,
    VectorField2,
    ddx,
    ddy,
    div_arrays,
    grad_arrays,
    lap_array,
)

__all__ = [
    "NumParams",
    "StepOutcome",
    "RunSummary",
    "NonConvergenceError",
    "SolverError",
    "Residual",
    "residual",
    "step_theta",
    "run_to_equilibrium",
    "energy_rate",
]


@dataclass
class NumParams:
    """Time-stepping and solver settings."""

    dt: float = 1e-4
    theta: float = 0.5
    newton_tol: float = 1e-10
    newton_max_iters: int = 50
    linsolve_tol: float = 1e-12
    energy_rate_tol: float = 1e-6
    max_steps: int = 1_000_000
    snapshot_every: int = 0
    #: "analytic" applies the exact linearization matrix-free; "fd" uses the
    #: directional finite difference of the residual (noisier, kept for
    #: cross-checks).
    jacobian: str = "analytic"

    def __post_init__(self):
        if not self.dt > 0.0:
            raise ValueError("dt must be positive")
        if not 0.0 <= self.theta <= 1.0:
            raise ValueError("theta must lie in [0, 1]")
        if self.newton_tol < 0.0 or self.linsolve_tol <= 0.0 or self.energy_rate_tol <= 0.0:
            raise ValueError("tolerances must be positive")
        if self.max_steps < 1 or self.newton_max_iters < 0:
            raise ValueError("iteration counts must be positive")
        if self.jacobian not in ("analytic", "fd"):
            raise ValueError("jacobian must be 'analytic' or 'fd'")


class NonConvergenceError(RuntimeError):
    """Newton failed to reach the residual tolerance; the step may be retried
    with a smaller dt."""

    def __init__(self, iters: int, residual_norm: float):
        self.iters = iters
        self.residual_norm = residual_norm
        super().__init__(
            f"Newton did not converge: {iters} iterations, residual {residual_norm:.3e}"
        )


class SolverError(RuntimeError):
    """Stepper gave up after exhausting the dt-halving retry policy."""


@dataclass
class StepOutcome:
    new_state: State
    newton_iters: int
    residual_norm: float
    energy_before: float
    energy_after: float
    dissipation_estimate: float


@dataclass
class RunSummary:
    final_state: State
    steps: int
    stop_reason: str  # "energy_rate" | "max_steps"
    e_initial: float
    e_final: float
    last_row: DiagnosticsRow | None = None


@dataclass
class Residual:
    """The four residual blocks of the weak-discrete system (1/dt form)."""

    phi: ScalarField
    mu: ScalarField
    d: VectorField2
    h: VectorField2


def energy_rate(e_prev: float, e_curr: float) -> float:
    """Relative per-step energy change, (e_curr - e_prev)/e_prev.

    Falls back to the absolute difference when e_prev = 0.
    """
    if e_prev == 0.0:
        return e_curr - e_prev
    return (e_curr - e_prev) / e_prev


# ---------------------------------------------------------------------------
# nonlinear system for one step

class _ThetaSystem:
    """Kernel-backed scaled residual / JVP / preconditioner for one step.

    The object is reusable across steps on a fixed (grid, params) pair:
    call set_step for the step size and velocity, then set_previous for the
    previous time level.
    """

    def __init__(self, grid: Grid2D, p: PhysParams, np_: NumParams):
        self.grid = grid
        self.p = p
        self.np_ = np_
        self.th = np_.theta
        self.pot = K.POT_QUARTIC if p.potential is Potential.QUARTIC else K.POT_FH
        self.anch_iso = p.anchoring_form is AnchoringForm.ISOTROPIC_DISCRETE
        shp = grid.shape
        padded = (grid.ny + 4, grid.nx + 4)
        plain_names = ("gpx", "gpy", "gd", "absd2", "grad2", "hxf", "hyf", "w2",
                       "gvx", "gvy", "de", "hxl", "hyl", "rphi", "rdx", "rdy")
        pad_names = ("phi_p", "dx_p", "dy_p", "Gx_p", "Gy_p", "mu_p",
                     "vphi_p", "ex_p", "ey_p", "Fx_p", "Fy_p", "mul_p")
        self.buf = {n: np.empty(shp) for n in plain_names}
        self.buf.update({n: np.empty(padded) for n in pad_names})
        sx, sy = grid.diff_symbols_rfft()
        self._lam = sx * sx + sy * sy  # = -laplacian symbol >= 0
        self._sx, self._sy = sx, sy
        self._fd_base = None

    def set_step(self, u: VectorField2 | None, dt: float):
        self.dt = dt
        self.deltadt = self.p.delta / dt if self.p.delta > 0.0 else 0.0
        self.has_u = u is not None
        if self.has_u:
            self.ux, self.uy = np.ascontiguousarray(u.x), np.ascontiguousarray(u.y)
            g = self.grid
            self.ux_p = np.empty((g.ny + 4, g.nx + 4))
            self.uy_p = np.empty((g.ny + 4, g.nx + 4))
            K.copy_in(self.ux_p, self.ux)
            K.copy_in(self.uy_p, self.uy)
        else:
            # kernels branch on has_u before touching the padded velocity
            self.ux_p = self.uy_p = np.zeros((1, 1))

    # -- previous level --------------------------------------------------
    def set_previous(self, phi_n, dx_n, dy_n, mu_n, hx_n, hy_n):
        g, dt, th = self.grid, self.dt, self.th
        self.phi_n = np.ascontiguousarray(phi_n)
        self.dx_n = np.ascontiguousarray(dx_n)
        self.dy_n = np.ascontiguousarray(dy_n)
        self.rhs_phi = -dt * (1.0 - th) * lap_array(mu_n, g)
        self.rhs_dx = dt * (1.0 - th) * hx_n
        self.rhs_dy = dt * (1.0 - th) * hy_n
        if self.has_u:
            ux, uy = self.ux, self.uy
            self.rhs_phi = self.rhs_phi + dt * (1.0 - th) * div_arrays(phi_n * ux, phi_n * uy, g)
            self.rhs_dx = self.rhs_dx + dt * (1.0 - th) * (ux * ddx(dx_n, g.hx) + uy * ddy(dx_n, g.hy))
            self.rhs_dy = self.rhs_dy + dt * (1.0 - th) * (ux * ddx(dy_n, g.hx) + uy * ddy(dy_n, g.hy))
        self.rhs_phi = np.ascontiguousarray(self.rhs_phi)
        self.rhs_dx = np.ascontiguousarray(self.rhs_dx)
        self.rhs_dy = np.ascontiguousarray(self.rhs_dy)

    # -- packing -----------------------------------------------------------
    def pack(self, a, b, c):
        return np.concatenate([a.ravel(), b.ravel(), c.ravel()])

    def unpack(self, z):
        n = self.grid.ny * self.grid.nx
        shp = self.grid.shape
        return z[:n].reshape(shp), z[n:2 * n].reshape(shp), z[2 * n:].reshape(shp)

    def norm(self, r) -> float:
        return math.sqrt(self.grid.hx * self.grid.hy * float(np.dot(r, r)))

    # -- physics -----------------------------------------------------------
    def mu_h(self, phi, dx_, dy_):
        """Fill buffers mu/hxf/hyf for the candidate fields; returns views.

        The returned mu is the interior view of a padded buffer; callers
        that persist it must copy.
        """
        g, p, b = self.grid, self.p, self.buf
        K.copy_in(b["phi_p"], np.ascontiguousarray(phi))
        K.copy_in(b["dx_p"], np.ascontiguousarray(dx_))
        K.copy_in(b["dy_p"], np.ascontiguousarray(dy_))
        K.stage_flux(b["phi_p"], b["dx_p"], b["dy_p"], g.hx, g.hy, p.eps, p.gamma,
                     p.beta, self.anch_iso, b["gpx"], b["gpy"], b["gd"], b["absd2"],
                     b["grad2"], b["Gx_p"], b["Gy_p"])
        K.stage_mu_h(b["phi_p"], b["dx_p"], b["dy_p"], self.phi_n, b["Gx_p"], b["Gy_p"],
                     b["gpx"], b["gpy"], b["gd"], b["absd2"], g.hx, g.hy, p.eps,
                     p.alpha, p.beta, p.kappa, p.phi_cr, self.deltadt,
                     self.pot, p.theta_fh, p.theta0_fh, b["mu_p"], b["hxf"], b["hyf"])
        return b["mu_p"][2:-2, 2:-2], b["hxf"], b["hyf"]

    def residual(self, z):
        g, b = self.grid, self.buf
        phi, dx_, dy_ = self.unpack(z)
        self.mu_h(phi, dx_, dy_)
        K.stage_residual(b["phi_p"], b["dx_p"], b["dy_p"], self.phi_n, self.dx_n,
                         self.dy_n, b["mu_p"], b["hxf"], b["hyf"],
                         self.rhs_phi, self.rhs_dx, self.rhs_dy, g.hx, g.hy,
                         self.dt, self.th, self.has_u, self.ux_p, self.uy_p,
                         b["rphi"], b["rdx"], b["rdy"])
        return self.pack(b["rphi"], b["rdx"], b["rdy"])

    # -- linearization -------------------------------------------------------
    def freeze(self, z):
        """Fix the linearization point: coefficient fields + their means.

        Fills phi_p/dx_p/dy_p and the pointwise coefficient buffers, which
        stay valid during the Krylov solve (the next residual call
        overwrites them, after which freeze runs again).
        """
        g, p, b = self.grid, self.p, self.buf
        phi, dx_, dy_ = self.unpack(z)
        self.zphi = np.ascontiguousarray(phi)
        K.copy_in(b["phi_p"], self.zphi)
        K.copy_in(b["dx_p"], np.ascontiguousarray(dx_))
        K.copy_in(b["dy_p"], np.ascontiguousarray(dy_))
        K.stage_flux(b["phi_p"], b["dx_p"], b["dy_p"], g.hx, g.hy, p.eps, p.gamma,
                     p.beta, self.anch_iso, b["gpx"], b["gpy"], b["gd"], b["absd2"],
                     b["grad2"], b["Gx_p"], b["Gy_p"])
        K.wpp_field(self.zphi, self.pot, p.eps, p.theta_fh, p.theta0_fh, b["w2"])
        if not np.all(np.isfinite(b["w2"])):
            raise PotentialDomainError("phi left the admissible range during Newton")
        self.means = {
            "w2": float(np.mean(b["w2"])),
            "d2": float(np.mean(b["absd2"])),
            "dx": float(np.mean(dx_)),
            "dy": float(np.mean(dy_)),
            "phi": float(np.mean(self.zphi)),
            "g2": float(np.mean(b["grad2"])),
        }
        if self.np_.jacobian == "fd":
            self._fd_base = (z.copy(), self.residual(z))

    def jvp(self, v):
        if self.np_.jacobian == "fd":
            z0, r0 = self._fd_base
            vn = float(np.linalg.norm(v))
            if vn == 0.0:
                return np.zeros_like(v)
            sigma = math.sqrt(np.finfo(float).eps) * (1.0 + float(np.linalg.norm(z0))) / vn
            return (self.residual(z0 + sigma * v) - r0) / sigma
        g, p, b = self.grid, self.p, self.buf
        vphi, ex, ey = self.unpack(v)
        K.copy_in(b["vphi_p"], np.ascontiguousarray(vphi))
        K.copy_in(b["ex_p"], np.ascontiguousarray(ex))
        K.copy_in(b["ey_p"], np.ascontiguousarray(ey))
        K.stage_jvp_flux(b["vphi_p"], b["ex_p"], b["ey_p"], b["dx_p"], b["dy_p"],
                         b["gpx"], b["gpy"], b["gd"], b["absd2"], b["grad2"],
                         g.hx, g.hy, p.eps, p.gamma, p.beta, self.anch_iso,
                         b["gvx"], b["gvy"], b["de"], b["Fx_p"], b["Fy_p"])
        K.stage_jvp_mu_h(b["vphi_p"], b["ex_p"], b["ey_p"], self.zphi, b["dx_p"], b["dy_p"],
                         b["Fx_p"], b["Fy_p"], b["gvx"], b["gvy"], b["de"],
                         b["gpx"], b["gpy"], b["gd"], b["absd2"], b["w2"], g.hx, g.hy,
                         p.alpha, p.beta, p.kappa, p.phi_cr, self.deltadt,
                         b["mul_p"], b["hxl"], b["hyl"])
        K.stage_jvp_assemble(b["vphi_p"], b["ex_p"], b["ey_p"], b["mul_p"], b["hxl"],
                             b["hyl"], g.hx, g.hy, self.dt, self.th,
                             self.has_u, self.ux_p, self.uy_p,
                             b["rphi"], b["rdx"], b["rdy"])
        return self.pack(b["rphi"], b["rdx"], b["rdy"])

    def preconditioner(self) -> LinearOperator:
        """Constant-coefficient spectral preconditioner.

        The stiffness sits in the phi block (fourth-order operator); it is
        inverted exactly per Fourier mode using the mean coefficients (eps,
        gamma |grad phi|^2, potential curvature, anchoring via mean d).  At
        the step sizes of interest the d block is a near-identity Helmholtz
        operator and is preconditioned by its scalar zero-mode factor.
        """
        g, p, dt, th = self.grid, self.p, self.dt, self.th
        m = self.means
        sx, sy, lam = self._sx, self._sy, self._lam

        c2m = max(m["w2"], 0.0)
        coef_e = p.eps + (p.gamma * m["g2"] if p.gamma > 0.0 else 0.0)
        pmu = coef_e * lam + c2m
        if p.beta != 0.0:
            if self.anch_iso:
                pmu = pmu + p.beta * m["d2"] * lam
            else:
                pmu = pmu + p.beta * (sx * m["dx"] + sy * m["dy"]) ** 2
        if self.deltadt != 0.0:
            pmu = pmu + self.deltadt
        invA = 1.0 / (1.0 + dt * th * lam * pmu)

        c0m = p.alpha * m["d2"] - p.alpha * (m["phi"] - p.phi_cr)
        inv_d = 1.0 / max(1.0 + dt * th * c0m, 0.1)

        ny, nx = g.shape
        n = ny * nx

        def apply(vec):
            phihat = sfft.rfft2(vec[:n].reshape(ny, nx))
            phihat *= invA
            out = np.empty_like(vec)
            out[:n] = sfft.irfft2(phihat, s=(ny, nx)).reshape(-1)
            np.multiply(vec[n:], inv_d, out=out[n:])
            return out

        return LinearOperator((3 * n, 3 * n), matvec=apply, dtype=np.float64)


# ---------------------------------------------------------------------------
# public operations

def _consistent_mu_h(state: State, p: PhysParams):
    mu = state.mu if state.mu is not None else chemical_potential(state.phi, state.d, p)
    h = state.h if state.h is not None else molecular_field(state.phi, state.d, p)
    return mu, h


def residual(state_n: State, candidate: State, u: VectorField2 | None,
             p: PhysParams, np_: NumParams) -> Residual:
    """The four residual blocks of the weak-discrete step, in the 1/dt form.

    The candidate carries its own (mu, h); when absent they are derived from
    (phi, d), which makes the mu/h blocks vanish identically.  Built from
    the public numpy operators (reference path; the solver uses the fused
    kernels, which agree to round-off).
    """
    g = state_n.grid
    if candidate.grid != g:
        raise ValueError("candidate lives on a different grid")
    dt, th = np_.dt, np_.theta
    mu_n, h_n = _consistent_mu_h(state_n, p)

    def mu_of(phi, dvec):
        mu = chemical_potential(phi, dvec, p).values
        if p.delta > 0.0:
            mu = mu + (p.delta / dt) * (phi.values - state_n.phi.values)
        return mu

    mu_def = mu_of(candidate.phi, candidate.d)
    h_def = molecular_field(candidate.phi, candidate.d, p)
    mu1 = candidate.mu.values if candidate.mu is not None else mu_def
    hx1 = candidate.h.x if candidate.h is not None else h_def.x
    hy1 = candidate.h.y if candidate.h is not None else h_def.y

    phi1, dx1, dy1 = candidate.phi.values, candidate.d.x, candidate.d.y
    r_phi = (phi1 - state_n.phi.values) / dt - lap_array((1.0 - th) * mu_n.values + th * mu1, g)
    r_dx = (dx1 - state_n.d.x) / dt + (1.0 - th) * h_n.x + th * hx1
    r_dy = (dy1 - state_n.d.y) / dt + (1.0 - th) * h_n.y + th * hy1
    if u is not None:
        phib = (1.0 - th) * state_n.phi.values + th * phi1
        dbx = (1.0 - th) * state_n.d.x + th * dx1
        dby = (1.0 - th) * state_n.d.y + th * dy1
        r_phi = r_phi + div_arrays(phib * u.x, phib * u.y, g)
        r_dx = r_dx + u.x * ddx(dbx, g.hx) + u.y * ddy(dbx, g.hy)
        r_dy = r_dy + u.x * ddx(dby, g.hx) + u.y * ddy(dby, g.hy)
    return Residual(
        phi=ScalarField(g, r_phi),
        mu=ScalarField(g, mu1 - mu_def),
        d=VectorField2(g, r_dx, r_dy),
        h=VectorField2(g, hx1 - h_def.x, hy1 - h_def.y),
    )


def _newton(sys_: _ThetaSystem, z0, np_: NumParams):
    z = z0.copy()
    rnorm = math.inf
    rnorm_before_solve = None
    iters = 0
    for k in range(np_.newton_max_iters + 1):
        try:
            r = sys_.residual(z)
        except PotentialDomainError:
            raise NonConvergenceError(k, math.inf)
        rnorm = sys_.norm(r)
        iters = k
        if not math.isfinite(rnorm):
            raise NonConvergenceError(k, rnorm)
        if rnorm_before_solve is not None and rnorm_before_solve > 0.0:
            # observed contraction constant of the nonlinear remainder; the
            # system object keeps it across steps as a forcing-term guide
            sys_._quad = rnorm / rnorm_before_solve ** 2
        if rnorm <= np_.newton_tol:
            return z, iters, rnorm
        if k == np_.newton_max_iters:
            break
        try:
            sys_.freeze(z)
        except PotentialDomainError:
            raise NonConvergenceError(k, rnorm)
        # inexact-Newton forcing: aim the linear part of the next residual at
        # newton_tol, but no deeper than the expected quadratic remainder;
        # floored at linsolve_tol
        rtol = max(np_.linsolve_tol, 0.1 * np_.newton_tol / rnorm)
        quad = getattr(sys_, "_quad", None)
        if quad is not None:
            rtol = max(rtol, min(1e-2, 0.3 * quad * rnorm))
        rtol = min(1e-2, rtol)
        op = LinearOperator((z.size, z.size), matvec=sys_.jvp, dtype=np.float64)
        sol, _info = gmres(op, -r, rtol=rtol, atol=0.0,
                           restart=60, maxiter=3, M=sys_.preconditioner())
        if not np.all(np.isfinite(sol)):
            raise NonConvergenceError(k, rnorm)
        z = z + sol
        rnorm_before_solve = rnorm
    raise NonConvergenceError(iters, rnorm)


def step_theta(state_n: State, u: VectorField2 | None, p: PhysParams,
               np_: NumParams, dt: float | None = None,
               predictor: State | None = None,
               energy_before: float | None = None,
               _system: _ThetaSystem | None = None) -> StepOutcome:
    """Advance one step of size dt (default np_.dt) with frozen velocity u.

    Raises NonConvergenceError when Newton stalls; the caller may halve dt
    and retry (run_to_equilibrium does, up to 5 times).
    """
    g = state_n.grid
    dt = np_.dt if dt is None else float(dt)
    mu_n, h_n = _consistent_mu_h(state_n, p)

    sys_ = _system if _system is not None else _ThetaSystem(g, p, np_)
    sys_.set_step(u, dt)
    sys_.set_previous(state_n.phi.values, state_n.d.x, state_n.d.y,
                      mu_n.values, h_n.x, h_n.y)
    src = predictor if predictor is not None else state_n
    z0 = sys_.pack(src.phi.values, src.d.x, src.d.y)
    z, iters, rnorm = _newton(sys_, z0, np_)

    phi1, dx1, dy1 = (np.ascontiguousarray(a) for a in sys_.unpack(z))
    # restore the conserved mean exactly (shift is within solver tolerance)
    phi1 += np.mean(state_n.phi.values) - np.mean(phi1)
    mu1, hx1, hy1 = (a.copy() for a in sys_.mu_h(phi1, dx1, dy1))

    new_state = State(
        t=state_n.t + dt,
        phi=ScalarField(g, phi1),
        d=VectorField2(g, dx1, dy1),
        mu=ScalarField(g, mu1),
        h=VectorField2(g, hx1, hy1),
        flow=state_n.flow,
    )
    e_before = free_energy(state_n, p).e_total if energy_before is None else energy_before
    breakdown = free_energy(new_state, p)
    e_after = breakdown.e_total

    th = np_.theta
    mu_bar = (1.0 - th) * mu_n.values + th * mu1
    hx_bar = (1.0 - th) * h_n.x + th * hx1
    hy_bar = (1.0 - th) * h_n.y + th * hy1
    gmx, gmy = grad_arrays(mu_bar, g)
    hxy = g.hx * g.hy
    dissipation = dt * hxy * float(
        np.sum(gmx * gmx + gmy * gmy) + np.sum(hx_bar * hx_bar + hy_bar * hy_bar)
    )
    out = StepOutcome(
        new_state=new_state,
        newton_iters=iters,
        residual_norm=rnorm,
        energy_before=e_before,
        energy_after=e_after,
        dissipation_estimate=dissipation,
    )
    out.energy_breakdown = breakdown
    return out


def _ensure_derived(state: State, p: PhysParams) -> State:
    if state.mu is not None and state.h is not None:
        return state
    mu, h = _consistent_mu_h(state, p)
    return State(t=state.t, phi=state.phi, d=state.d, mu=mu, h=h, flow=state.flow)


def run_to_equilibrium(initial: State, p: PhysParams, np_: NumParams,
                       on_row=None, on_state=None) -> RunSummary:
    """Step until the relative per-step energy change drops below tolerance.

    Stops when |E_{n+1} - E_n| / |E_n| < np_.energy_rate_tol (absolute
    difference when E_n = 0) or after np_.max_steps.  Emits one
    DiagnosticsRow per accepted step through on_row; on_state(step, state)
    is called after every accepted step (snapshot hooks).

    On Newton failure the step is retried with dt/2, up to 5 halvings,
    after which SolverError is raised.  Accepted retries advance time by
    the reduced dt; the next step returns to the nominal dt.
    """
    state = _ensure_derived(initial, p)
    flow_enabled = state.flow is not None
    if flow_enabled:
        from lcemul import flow as flow_mod

    e_prev = free_energy(state, p).e_total
    e_initial = e_prev
    prev_state: State | None = None
    prev_dt = None
    last_row = None
    stop_reason = "max_steps"
    steps_done = 0
    system = _ThetaSystem(state.grid, p, np_)

    for step in range(1, np_.max_steps + 1):
        u = state.flow.u if flow_enabled else None
        dt_try = np_.dt
        outcome = None
        for attempt in range(6):
            predictor = None
            if prev_state is not None:
                # linear extrapolation in time as the Newton starting guess
                fac = dt_try / prev_dt
                predictor = State(
                    t=state.t,
                    phi=ScalarField(state.grid, state.phi.values + fac * (state.phi.values - prev_state.phi.values)),
                    d=VectorField2(state.grid, state.d.x + fac * (state.d.x - prev_state.d.x),
                                   state.d.y + fac * (state.d.y - prev_state.d.y)),
                )
            try:
                outcome = step_theta(state, u, p, np_, dt=dt_try,
                                     predictor=predictor, energy_before=e_prev,
                                     _system=system)
                break
            except NonConvergenceError as err:
                if attempt == 5:
                    raise SolverError(
                        f"step {step}: Newton failed after 5 dt halvings ({err})"
                    ) from err
                dt_try *= 0.5
        new_state = outcome.new_state

        if flow_enabled:
            new_state = flow_mod.advance_flow(state, new_state, p, np_, dt_try)
            eb = free_energy(new_state, p)
        else:
            eb = outcome.energy_breakdown
        e_curr = eb.e_total
        rate = energy_rate(e_prev, e_curr)

        if on_row is not None:
            from lcemul.analysis import monitor_bounds

            frag = monitor_bounds(new_state)
            last_row = DiagnosticsRow(
                step=step,
                t=new_state.t,
                e_mix=eb.e_mix,
                e_pol=eb.e_pol,
                e_anch=eb.e_anch,
                e_gamma=eb.e_gamma,
                e_kin=eb.e_kin,
                e_total=eb.e_total,
                energy_rate=rate,
                mass=frag.mass,
                max_abs_d=frag.max_abs_d,
                newton_iters=outcome.newton_iters,
                residual_norm=outcome.residual_norm,
                dissipation_estimate=outcome.dissipation_estimate,
            )
            on_row(last_row)
        if on_state is not None:
            on_state(step, new_state)

        prev_state, prev_dt = state, dt_try
        state = new_state
        e_prev_old = e_prev
        e_prev = e_curr
        steps_done = step

        denom = abs(e_prev_old)
        converged = (abs(e_curr - e_prev_old) < np_.energy_rate_tol * denom) if denom > 0.0 \
            else (abs(e_curr - e_prev_old) < np_.energy_rate_tol)
        if converged:
            stop_reason = "energy_rate"
            break

    return RunSummary(
        final_state=state,
        steps=steps_done,
        stop_reason=stop_reason,
        e_initial=e_initial,
        e_final=e_prev,
        last_row=last_row,
    )
