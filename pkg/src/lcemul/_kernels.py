"""Fused stencil kernels for the time stepper (numba, serial, cache-compiled).

These mirror the operator compositions in :mod:`lcemul.grid` and
:mod:`lcemul.energy` (centered first differences, Laplacian = div o grad)
on raw arrays.  Fields that are read at neighbor offsets live in padded
buffers of shape (ny+4, nx+4) whose 2-cell ghost frame holds the periodic
images; interior loops are then branch-free and vectorize.  They are an
implementation detail of the Newton solver; the public operators remain
the numpy reference and the test suite checks the two paths agree to
round-off.

The logarithmic potential cannot raise from inside a kernel: out-of-range
phi produces NaNs which the Newton driver detects and converts into a
non-convergence error.
"""

from __future__ import annotations

import math

from numba import njit

POT_QUARTIC = 0
POT_FH = 1


@njit(cache=True, inline="always")
def _wp(s, pot, eps, th, th0):
    """Derivative of the mixing density."""
    if pot == POT_QUARTIC:
        return 2.0 * s * (1.0 - s) * (1.0 - 2.0 * s) / eps
    if s <= -1.0 or s >= 1.0:
        return math.nan
    return (th * math.atanh(s) - th0 * s) / eps


@njit(cache=True, inline="always")
def _wpp(s, pot, eps, th, th0):
    if pot == POT_QUARTIC:
        return (2.0 - 12.0 * s + 12.0 * s * s) / eps
    if s <= -1.0 or s >= 1.0:
        return math.nan
    return (th / (1.0 - s * s) - th0) / eps


@njit(cache=True)
def fill_ghosts(a):
    """Periodic 2-cell ghost frame for a padded (ny+4, nx+4) buffer."""
    ny = a.shape[0] - 4
    nx = a.shape[1] - 4
    for i in range(2, nx + 2):
        a[0, i] = a[ny, i]
        a[1, i] = a[ny + 1, i]
        a[ny + 2, i] = a[2, i]
        a[ny + 3, i] = a[3, i]
    for j in range(ny + 4):
        a[j, 0] = a[j, nx]
        a[j, 1] = a[j, nx + 1]
        a[j, nx + 2] = a[j, 2]
        a[j, nx + 3] = a[j, 3]


@njit(cache=True)
def copy_in(dst, src):
    """Copy a (ny, nx) field into a padded buffer and fill its ghosts."""
    ny, nx = src.shape
    for j in range(ny):
        for i in range(nx):
            dst[j + 2, i + 2] = src[j, i]
    fill_ghosts(dst)


@njit(cache=True)
def stage_flux(phi_p, dx_p, dy_p, hx, hy, eps, gamma, beta, anch_iso,
               gpx, gpy, gd, absd2, grad2, gx_p, gy_p):
    """Gradient of phi and the flux whose divergence enters mu.

    gx/gy = (eps + gamma |grad phi|^2) grad phi + anchoring flux (padded
    outputs, ghosts filled here).
    """
    ny = phi_p.shape[0] - 4
    nx = phi_p.shape[1] - 4
    cx = 1.0 / (2.0 * hx)
    cy = 1.0 / (2.0 * hy)
    for j in range(ny):
        J = j + 2
        for i in range(nx):
            I = i + 2
            px = (phi_p[J, I + 1] - phi_p[J, I - 1]) * cx
            py = (phi_p[J + 1, I] - phi_p[J - 1, I]) * cy
            dxv = dx_p[J, I]
            dyv = dy_p[J, I]
            g2 = px * px + py * py
            a2 = dxv * dxv + dyv * dyv
            gdv = px * dxv + py * dyv
            coef = eps + gamma * g2
            if anch_iso:
                fx = coef * px + beta * a2 * px
                fy = coef * py + beta * a2 * py
            else:
                fx = coef * px + beta * gdv * dxv
                fy = coef * py + beta * gdv * dyv
            gpx[j, i] = px
            gpy[j, i] = py
            gd[j, i] = gdv
            absd2[j, i] = a2
            grad2[j, i] = g2
            gx_p[J, I] = fx
            gy_p[J, I] = fy
    fill_ghosts(gx_p)
    fill_ghosts(gy_p)


@njit(cache=True)
def stage_mu_h(phi_p, dx_p, dy_p, phin, gx_p, gy_p, gpx, gpy, gd, absd2,
               hx, hy, eps, alpha, beta, kappa, phi_cr, deltadt,
               pot, th, th0, mu_p, hx_out, hy_out):
    """mu = -div(flux) + W'(phi) - alpha/2 |d|^2 + (delta/dt)(phi - phin);
    h = -kappa lap d + alpha(|d|^2 - (phi - phi_cr)) d + beta (d.grad phi) grad phi.

    mu is written padded (ghosts filled); h is pointwise output.
    """
    ny = phi_p.shape[0] - 4
    nx = phi_p.shape[1] - 4
    cx = 1.0 / (2.0 * hx)
    cy = 1.0 / (2.0 * hy)
    qx = 1.0 / (4.0 * hx * hx)
    qy = 1.0 / (4.0 * hy * hy)
    for j in range(ny):
        J = j + 2
        for i in range(nx):
            I = i + 2
            divf = (gx_p[J, I + 1] - gx_p[J, I - 1]) * cx + (gy_p[J + 1, I] - gy_p[J - 1, I]) * cy
            phiv = phi_p[J, I]
            m = -divf + _wp(phiv, pot, eps, th, th0) - 0.5 * alpha * absd2[j, i]
            if deltadt != 0.0:
                m += deltadt * (phiv - phin[j, i])
            mu_p[J, I] = m
            dxv = dx_p[J, I]
            dyv = dy_p[J, I]
            lapdx = ((dx_p[J, I + 2] - dxv) - (dxv - dx_p[J, I - 2])) * qx \
                + ((dx_p[J + 2, I] - dxv) - (dxv - dx_p[J - 2, I])) * qy
            lapdy = ((dy_p[J, I + 2] - dyv) - (dyv - dy_p[J, I - 2])) * qx \
                + ((dy_p[J + 2, I] - dyv) - (dyv - dy_p[J - 2, I])) * qy
            coef = alpha * (absd2[j, i] - (phiv - phi_cr))
            bg = beta * gd[j, i]
            hx_out[j, i] = -kappa * lapdx + coef * dxv + bg * gpx[j, i]
            hy_out[j, i] = -kappa * lapdy + coef * dyv + bg * gpy[j, i]
    fill_ghosts(mu_p)


@njit(cache=True)
def stage_residual(phi_p, dx_p, dy_p, phin, dxn, dyn, mu_p, hx_f, hy_f,
                   rhs_phi, rhs_dx, rhs_dy, hx, hy, dt, theta,
                   has_u, ux_p, uy_p, rphi, rdx, rdy):
    """Scaled residual: field - previous + explicit rhs + dt*theta*(implicit parts)."""
    ny = phi_p.shape[0] - 4
    nx = phi_p.shape[1] - 4
    cx = 1.0 / (2.0 * hx)
    cy = 1.0 / (2.0 * hy)
    qx = 1.0 / (4.0 * hx * hx)
    qy = 1.0 / (4.0 * hy * hy)
    dth = dt * theta
    for j in range(ny):
        J = j + 2
        for i in range(nx):
            I = i + 2
            muv = mu_p[J, I]
            lapmu = ((mu_p[J, I + 2] - muv) - (muv - mu_p[J, I - 2])) * qx \
                + ((mu_p[J + 2, I] - muv) - (muv - mu_p[J - 2, I])) * qy
            rp = phi_p[J, I] - phin[j, i] + rhs_phi[j, i] - dth * lapmu
            rx = dx_p[J, I] - dxn[j, i] + rhs_dx[j, i] + dth * hx_f[j, i]
            ry = dy_p[J, I] - dyn[j, i] + rhs_dy[j, i] + dth * hy_f[j, i]
            if has_u:
                divpu = ((phi_p[J, I + 1] * ux_p[J, I + 1] - phi_p[J, I - 1] * ux_p[J, I - 1]) * cx
                         + (phi_p[J + 1, I] * uy_p[J + 1, I] - phi_p[J - 1, I] * uy_p[J - 1, I]) * cy)
                rp += dth * divpu
                rx += dth * (ux_p[J, I] * (dx_p[J, I + 1] - dx_p[J, I - 1]) * cx
                             + uy_p[J, I] * (dx_p[J + 1, I] - dx_p[J - 1, I]) * cy)
                ry += dth * (ux_p[J, I] * (dy_p[J, I + 1] - dy_p[J, I - 1]) * cx
                             + uy_p[J, I] * (dy_p[J + 1, I] - dy_p[J - 1, I]) * cy)
            rphi[j, i] = rp
            rdx[j, i] = rx
            rdy[j, i] = ry


@njit(cache=True)
def stage_jvp_flux(vphi_p, ex_p, ey_p, dx_p, dy_p, gpx, gpy, gd, absd2, grad2,
                   hx, hy, eps, gamma, beta, anch_iso,
                   gvx, gvy, de, fx_p, fy_p):
    """Linearized flux for the mu equation at the frozen state (padded out)."""
    ny = vphi_p.shape[0] - 4
    nx = vphi_p.shape[1] - 4
    cx = 1.0 / (2.0 * hx)
    cy = 1.0 / (2.0 * hy)
    for j in range(ny):
        J = j + 2
        for i in range(nx):
            I = i + 2
            vx = (vphi_p[J, I + 1] - vphi_p[J, I - 1]) * cx
            vy = (vphi_p[J + 1, I] - vphi_p[J - 1, I]) * cy
            exv = ex_p[J, I]
            eyv = ey_p[J, I]
            dxv = dx_p[J, I]
            dyv = dy_p[J, I]
            dev = dxv * exv + dyv * eyv
            coef = eps + gamma * grad2[j, i]
            fx = coef * vx
            fy = coef * vy
            if gamma != 0.0:
                gg = gpx[j, i] * vx + gpy[j, i] * vy
                fx += 2.0 * gamma * gg * gpx[j, i]
                fy += 2.0 * gamma * gg * gpy[j, i]
            if anch_iso:
                fx += beta * (2.0 * dev * gpx[j, i] + absd2[j, i] * vx)
                fy += beta * (2.0 * dev * gpy[j, i] + absd2[j, i] * vy)
            else:
                gl = vx * dxv + vy * dyv + gpx[j, i] * exv + gpy[j, i] * eyv
                fx += beta * (gl * dxv + gd[j, i] * exv)
                fy += beta * (gl * dyv + gd[j, i] * eyv)
            gvx[j, i] = vx
            gvy[j, i] = vy
            de[j, i] = dev
            fx_p[J, I] = fx
            fy_p[J, I] = fy
    fill_ghosts(fx_p)
    fill_ghosts(fy_p)


@njit(cache=True)
def stage_jvp_mu_h(vphi_p, ex_p, ey_p, phi_frozen, dx_p, dy_p, fx_p, fy_p,
                   gvx, gvy, de, gpx, gpy, gd, absd2, w2, hx, hy,
                   alpha, beta, kappa, phi_cr, deltadt,
                   mul_p, hxl, hyl):
    ny = vphi_p.shape[0] - 4
    nx = vphi_p.shape[1] - 4
    cx = 1.0 / (2.0 * hx)
    cy = 1.0 / (2.0 * hy)
    qx = 1.0 / (4.0 * hx * hx)
    qy = 1.0 / (4.0 * hy * hy)
    for j in range(ny):
        J = j + 2
        for i in range(nx):
            I = i + 2
            divf = (fx_p[J, I + 1] - fx_p[J, I - 1]) * cx + (fy_p[J + 1, I] - fy_p[J - 1, I]) * cy
            vph = vphi_p[J, I]
            m = -divf + w2[j, i] * vph - alpha * de[j, i]
            if deltadt != 0.0:
                m += deltadt * vph
            mul_p[J, I] = m
            exv = ex_p[J, I]
            eyv = ey_p[J, I]
            lapex = ((ex_p[J, I + 2] - exv) - (exv - ex_p[J, I - 2])) * qx \
                + ((ex_p[J + 2, I] - exv) - (exv - ex_p[J - 2, I])) * qy
            lapey = ((ey_p[J, I + 2] - eyv) - (eyv - ey_p[J, I - 2])) * qx \
                + ((ey_p[J + 2, I] - eyv) - (eyv - ey_p[J - 2, I])) * qy
            coef = alpha * (absd2[j, i] - (phi_frozen[j, i] - phi_cr))
            dxv = dx_p[J, I]
            dyv = dy_p[J, I]
            hxv = -kappa * lapex + coef * exv + 2.0 * alpha * de[j, i] * dxv - alpha * vph * dxv
            hyv = -kappa * lapey + coef * eyv + 2.0 * alpha * de[j, i] * dyv - alpha * vph * dyv
            if beta != 0.0:
                egp = exv * gpx[j, i] + eyv * gpy[j, i]
                dgv = dxv * gvx[j, i] + dyv * gvy[j, i]
                hxv += beta * ((egp + dgv) * gpx[j, i] + gd[j, i] * gvx[j, i])
                hyv += beta * ((egp + dgv) * gpy[j, i] + gd[j, i] * gvy[j, i])
            hxl[j, i] = hxv
            hyl[j, i] = hyv
    fill_ghosts(mul_p)


@njit(cache=True)
def stage_jvp_assemble(vphi_p, ex_p, ey_p, mul_p, hxl, hyl, hx, hy, dt, theta,
                       has_u, ux_p, uy_p, rphi, rdx, rdy):
    ny = vphi_p.shape[0] - 4
    nx = vphi_p.shape[1] - 4
    cx = 1.0 / (2.0 * hx)
    cy = 1.0 / (2.0 * hy)
    qx = 1.0 / (4.0 * hx * hx)
    qy = 1.0 / (4.0 * hy * hy)
    dth = dt * theta
    for j in range(ny):
        J = j + 2
        for i in range(nx):
            I = i + 2
            muv = mul_p[J, I]
            lapmu = ((mul_p[J, I + 2] - muv) - (muv - mul_p[J, I - 2])) * qx \
                + ((mul_p[J + 2, I] - muv) - (muv - mul_p[J - 2, I])) * qy
            rp = vphi_p[J, I] - dth * lapmu
            rx = ex_p[J, I] + dth * hxl[j, i]
            ry = ey_p[J, I] + dth * hyl[j, i]
            if has_u:
                divpu = ((vphi_p[J, I + 1] * ux_p[J, I + 1] - vphi_p[J, I - 1] * ux_p[J, I - 1]) * cx
                         + (vphi_p[J + 1, I] * uy_p[J + 1, I] - vphi_p[J - 1, I] * uy_p[J - 1, I]) * cy)
                rp += dth * divpu
                rx += dth * (ux_p[J, I] * (ex_p[J, I + 1] - ex_p[J, I - 1]) * cx
                             + uy_p[J, I] * (ex_p[J + 1, I] - ex_p[J - 1, I]) * cy)
                ry += dth * (ux_p[J, I] * (ey_p[J, I + 1] - ey_p[J, I - 1]) * cx
                             + uy_p[J, I] * (ey_p[J + 1, I] - ey_p[J - 1, I]) * cy)
            rphi[j, i] = rp
            rdx[j, i] = rx
            rdy[j, i] = ry


@njit(cache=True)
def wpp_field(phi, pot, eps, th, th0, out):
    ny, nx = phi.shape
    for j in range(ny):
        for i in range(nx):
            out[j, i] = _wpp(phi[j, i], pot, eps, th, th0)


@njit(cache=True)
def precond_modes(hat, S, q, denom, beta1, beta2, mdx, mdy, r):
    """In-place per-mode solve of the 3x3 constant-coefficient block."""
    ny, nxr = S.shape
    for j in range(ny):
        for i in range(nxr):
            fh = hat[0, j, i]
            gx = hat[1, j, i]
            gy = hat[2, j, i]
            dg = mdx * gx + mdy * gy
            xh = (fh - beta1[j, i] * (dg / denom[j, i])) / S[j, i]
            g1x = gx - beta2 * mdx * xh
            g1y = gy - beta2 * mdy * xh
            corr = (r * (mdx * g1x + mdy * g1y)) / (q[j, i] * denom[j, i])
            hat[0, j, i] = xh
            hat[1, j, i] = g1x / q[j, i] - corr * mdx
            hat[2, j, i] = g1y / q[j, i] - corr * mdy
