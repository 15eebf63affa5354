"""Incompressible velocity coupling.

The momentum step is semi-implicit: the constant-coefficient viscous part
(coefficient nu_star) is treated implicitly per Fourier mode, advection and
the variable-viscosity correction div((nu(phi) - nu_star) Du) explicitly,
followed by a Leray projection.  With the symmetric-gradient convention
Du = (grad u + grad u^T)/2, the constant-viscosity operator acts on
solenoidal fields as (nu/2) lap u, so the implicit factor per mode is
1/(1 + dt (nu_star/2) |sigma|) with sigma the discrete Laplacian symbol.

The projection removes the discrete-gradient part: it is built from the
Fourier symbols of the centered difference operators, so the centered
divergence of a projected field vanishes to round-off.  Modes on which the
centered difference is blind (Nyquist lines) are left untouched; they are
both discretely solenoidal and discrete gradients, and band-limited fields
do not populate them.

The pressure is never solved for; a generalized-pressure diagnostic is
reconstructed from the projection for output only.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
import scipy.fft as sfft

from lcemul.energy import PhysParams, State
from lcemul.grid import Grid2D, ScalarField, VectorField2, ddx, ddy

__all__ = [
    "FlowState",
    "CFLError",
    "nu_of_phi",
    "coupling_force",
    "project_divergence_free",
    "momentum_step",
    "advance_flow",
]


class CFLError(RuntimeError):
    """Explicit advection would be unstable; reduce dt."""


@dataclass
class FlowState:
    u: VectorField2
    p_star: ScalarField | None = None


def nu_of_phi(p: PhysParams, phi_values: np.ndarray) -> np.ndarray:
    """Bounded smooth viscosity profile between nu_star and nu_star_upper.

    Smoothstep in phi over [0, 1]; constant when the bounds coincide.
    """
    if p.nu_star_upper == p.nu_star:
        return np.full_like(phi_values, p.nu_star)
    t = np.clip(phi_values, 0.0, 1.0)
    s = t * t * (3.0 - 2.0 * t)
    return p.nu_star + (p.nu_star_upper - p.nu_star) * s


def coupling_force(phi: ScalarField, mu: ScalarField, d: VectorField2,
                   h: VectorField2) -> VectorField2:
    """Phase/polarization force on the fluid: mu grad phi + (grad d)^T h."""
    g = phi.grid
    gpx = ddx(phi.values, g.hx)
    gpy = ddy(phi.values, g.hy)
    fx = mu.values * gpx + ddx(d.x, g.hx) * h.x + ddx(d.y, g.hx) * h.y
    fy = mu.values * gpy + ddy(d.x, g.hy) * h.x + ddy(d.y, g.hy) * h.y
    return VectorField2(g, fx, fy)


def _leray_hats(grid: Grid2D):
    kx, ky = grid.diff_symbols_rfft()
    k2 = kx * kx + ky * ky
    k2_safe = np.where(k2 > 0.0, k2, 1.0)
    return kx, ky, k2, k2_safe


def project_divergence_free(v: VectorField2, return_potential: bool = False):
    """Leray projection w.r.t. the centered-difference divergence.

    Idempotent; preserves the mean; kills discrete gradient fields.  When
    return_potential is set, also returns the scalar q with v = P v + grad q.
    """
    g = v.grid
    kx, ky, k2, k2_safe = _leray_hats(g)
    vxh = sfft.rfft2(v.x)
    vyh = sfft.rfft2(v.y)
    # div(v)-hat = i(kx vxh + ky vyh); the i cancels in the correction
    q = (kx * vxh + ky * vyh) / k2_safe
    q = np.where(k2 > 0.0, q, 0.0)
    ux = sfft.irfft2(vxh - kx * q, s=g.shape)
    uy = sfft.irfft2(vyh - ky * q, s=g.shape)
    proj = VectorField2(g, ux, uy)
    if not return_potential:
        return proj
    pot = sfft.irfft2(-1j * q, s=g.shape)
    return proj, ScalarField(g, pot)


def momentum_step(flow: FlowState, phi: ScalarField, force: VectorField2,
                  p: PhysParams, np_, dt: float | None = None) -> FlowState:
    """One semi-implicit momentum step with frozen phase fields.

    Explicit: advection, variable-viscosity correction, force (all made
    mean-free, conserving the mean velocity exactly); implicit: the
    nu_star/2 Laplacian; then the Leray projection.
    """
    g = phi.grid
    dt = np_.dt if dt is None else float(dt)
    u = flow.u
    umax = float(np.max(np.abs(u.x))) / g.hx + float(np.max(np.abs(u.y))) / g.hy
    if umax * dt > 0.5:
        raise CFLError(f"advective CFL {umax * dt:.3f} > 0.5; reduce dt")

    ax = u.x * ddx(u.x, g.hx) + u.y * ddy(u.x, g.hy)
    ay = u.x * ddx(u.y, g.hx) + u.y * ddy(u.y, g.hy)
    gx_ = force.x - ax
    gy_ = force.y - ay
    if p.nu_star_upper != p.nu_star:
        dev = nu_of_phi(p, phi.values) - p.nu_star
        dxx = ddx(u.x, g.hx)
        dyy = ddy(u.y, g.hy)
        dxy = 0.5 * (ddy(u.x, g.hy) + ddx(u.y, g.hx))
        gx_ = gx_ + ddx(dev * dxx, g.hx) + ddy(dev * dxy, g.hy)
        gy_ = gy_ + ddx(dev * dxy, g.hx) + ddy(dev * dyy, g.hy)
    # the continuum increment is a divergence (mean-free); remove the O(h^2)
    # discretization leftover so the mean velocity is conserved exactly
    gx_ = gx_ - np.mean(gx_)
    gy_ = gy_ - np.mean(gy_)

    sx, sy = g.diff_symbols_rfft()
    lam = sx * sx + sy * sy
    fac = 1.0 / (1.0 + dt * 0.5 * p.nu_star * lam)
    vx = sfft.irfft2(fac * sfft.rfft2(u.x + dt * gx_), s=g.shape)
    vy = sfft.irfft2(fac * sfft.rfft2(u.y + dt * gy_), s=g.shape)

    proj, pot = project_divergence_free(VectorField2(g, vx, vy), return_potential=True)
    p_star = ScalarField(g, pot.values / dt)
    return FlowState(u=proj, p_star=p_star)


def advance_flow(state_old: State, state_new: State, p: PhysParams, np_,
                 dt: float) -> State:
    """Momentum substep of the coupled scheme.

    The force is assembled from the theta-averaged phase fields so the work
    it does on the fluid matches the energy the transport terms move out of
    the free energy up to O(dt^2) per step.
    """
    th = np_.theta
    g = state_old.grid

    def avg(a, b):
        return (1.0 - th) * a + th * b

    phib = ScalarField(g, avg(state_old.phi.values, state_new.phi.values))
    mub = ScalarField(g, avg(state_old.mu.values, state_new.mu.values))
    db = VectorField2(g, avg(state_old.d.x, state_new.d.x), avg(state_old.d.y, state_new.d.y))
    hb = VectorField2(g, avg(state_old.h.x, state_new.h.x), avg(state_old.h.y, state_new.h.y))
    force = coupling_force(phib, mub, db, hb)
    new_flow = momentum_step(state_old.flow, phib, force, p, np_, dt=dt)
    return replace(state_new, flow=new_flow)
