"""Free energy of the emulsion model and its variational derivatives.

The free energy density is

    e(phi, d) =  eps/2 |grad phi|^2 + W(phi)
               + gamma/4 |grad phi|^4
               + kappa/2 |grad d|^2 + alpha/4 |d|^4
               - alpha/2 (phi - phi_cr) |d|^2
               + beta/2 |grad phi . d|^2

where W is the mixing density: Psi(phi)/eps for the logarithmic
(Flory-Huggins) potential, or the quartic well phi^2(1-phi)^2/eps whose
minima sit at 0 and 1.  The chemical potential mu and the molecular field
h are the exact discrete variational derivatives of the discrete energy,
so <mu, v> and <h, e> match directional finite differences of
``free_energy`` to round-off for the tensorial anchoring form.

The module also provides the reduced landscape g(s, w) obtained by
evaluating the pointwise part of the density at |grad phi| = 0, |d| = w,
together with a scan/polish stationary-point finder and the lower bound
E0 = min g used by the well-posedness condition.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from lcemul.grid import (
    Grid2D,
    ScalarField,
    VectorField2,
    div_arrays,
    grad_arrays,
    inner_product,
    lap_array,
)

__all__ = [
    "Potential",
    "AnchoringForm",
    "PhysParams",
    "State",
    "EnergyBreakdown",
    "PotentialDomainError",
    "potential_value",
    "potential_deriv",
    "free_energy",
    "chemical_potential",
    "molecular_field",
    "g_value",
    "g_tilde_value",
    "StationaryPoint",
    "find_landscape_minima",
    "energy_lower_bound_E0",
]

# Clamp distance from the logarithmic singularities used by diagnostics
# (free_energy); solver-facing evaluations raise instead.
_FH_CLAMP = 1.0 - 1e-12


class PotentialDomainError(ValueError):
    """phi left the physical range of the logarithmic potential."""


class Potential(enum.Enum):
    FLORY_HUGGINS = "flory_huggins"
    QUARTIC = "quartic"


class AnchoringForm(enum.Enum):
    #: continuous form: mu gets -beta div((grad phi . d) d)
    TENSORIAL = "tensorial"
    #: reproduction of the discrete variant: mu gets -beta div(|d|^2 grad phi)
    ISOTROPIC_DISCRETE = "isotropic_discrete"


@dataclass
class PhysParams:
    """Physical parameters of the model.

    ``nu_star <= nu(s) <= nu_star_upper`` bounds the viscosity profile used
    by the flow module; with equal bounds the viscosity is constant.
    """

    eps: float = 0.1
    alpha: float = 10.0
    beta: float = 1.0
    kappa: float = 0.1
    gamma: float = 0.0
    delta: float = 0.0
    phi_cr: float = 0.5
    theta_fh: float = 1.5
    theta0_fh: float = 3.0
    potential: Potential = Potential.QUARTIC
    anchoring_form: AnchoringForm = AnchoringForm.TENSORIAL
    rho: float = 1.0
    nu_star: float = 1.0
    nu_star_upper: float = 1.0

    def __post_init__(self):
        if isinstance(self.potential, str):
            self.potential = Potential(self.potential)
        if isinstance(self.anchoring_form, str):
            self.anchoring_form = AnchoringForm(self.anchoring_form)
        if not self.eps > 0.0:
            raise ValueError("eps must be positive")
        if not self.kappa > 0.0:
            raise ValueError("kappa must be positive")
        if self.alpha < 0.0 or self.beta < 0.0:
            raise ValueError("alpha and beta must be nonnegative")
        if self.gamma < 0.0 or self.delta < 0.0:
            raise ValueError("gamma and delta must be nonnegative")
        if not -1.0 < self.phi_cr < 1.0:
            raise ValueError("phi_cr must lie in (-1, 1)")
        if not 0.0 <= self.theta_fh < self.theta0_fh:
            raise ValueError("need 0 <= theta_fh < theta0_fh")
        if self.rho != 1.0:
            raise ValueError("the model is formulated for matched density rho = 1")
        if not 0.0 < self.nu_star <= self.nu_star_upper:
            raise ValueError("need 0 < nu_star <= nu_star_upper")


@dataclass
class State:
    """Simulation state (t, phi, d) with optionally cached (mu, h) and flow."""

    t: float
    phi: ScalarField
    d: VectorField2
    mu: ScalarField | None = None
    h: VectorField2 | None = None
    flow: "object | None" = None  # lcemul.flow.FlowState when flow is enabled

    def __post_init__(self):
        grids = [self.phi.grid, self.d.grid]
        if self.mu is not None:
            grids.append(self.mu.grid)
        if self.h is not None:
            grids.append(self.h.grid)
        if self.flow is not None:
            grids.append(self.flow.u.grid)
        if any(g != grids[0] for g in grids):
            raise ValueError("state fields live on different grids")

    @property
    def grid(self) -> Grid2D:
        return self.phi.grid


@dataclass
class EnergyBreakdown:
    e_mix: float
    e_pol: float
    e_anch: float
    e_gamma: float
    e_kin: float
    e_total: float = field(default=None)  # derived, always the exact sum

    def __post_init__(self):
        self.e_total = self.e_mix + self.e_pol + self.e_anch + self.e_gamma + self.e_kin


# ---------------------------------------------------------------------------
# potentials

def _fh_psi_closed(s, theta, theta0):
    """Flory-Huggins Psi on the closed interval [-1, 1] (finite endpoint limits)."""
    s = np.asarray(s, dtype=np.float64)
    one_p = 1.0 + s
    one_m = 1.0 - s
    # x*log(x) with the 0*log(0) = 0 limit
    ent = np.where(one_p > 0.0, one_p * np.log(np.maximum(one_p, 1e-300)), 0.0)
    ent = ent + np.where(one_m > 0.0, one_m * np.log(np.maximum(one_m, 1e-300)), 0.0)
    return 0.5 * theta * ent - 0.5 * theta0 * s * s


def _fh_check_open(s):
    if np.any(np.abs(s) >= 1.0):
        raise PotentialDomainError("phi reached |phi| >= 1; Flory-Huggins potential undefined")


def potential_value(s, p: PhysParams):
    """Mixing potential: Psi(s) for Flory-Huggins, s^2(1-s)^2/eps for quartic.

    Note the quartic carries the 1/eps weight itself while the logarithmic
    potential enters the energy as Psi(phi)/eps.
    """
    s = np.asarray(s, dtype=np.float64)
    if p.potential is Potential.FLORY_HUGGINS:
        _fh_check_open(s)
        out = _fh_psi_closed(s, p.theta_fh, p.theta0_fh)
    else:
        out = s * s * (1.0 - s) ** 2 / p.eps
    return float(out) if out.ndim == 0 else out


def potential_deriv(s, p: PhysParams):
    s = np.asarray(s, dtype=np.float64)
    if p.potential is Potential.FLORY_HUGGINS:
        _fh_check_open(s)
        out = p.theta_fh * np.arctanh(s) - p.theta0_fh * s
    else:
        out = 2.0 * s * (1.0 - s) * (1.0 - 2.0 * s) / p.eps
    return float(out) if out.ndim == 0 else out


def potential_deriv2(s, p: PhysParams):
    s = np.asarray(s, dtype=np.float64)
    if p.potential is Potential.FLORY_HUGGINS:
        _fh_check_open(s)
        out = p.theta_fh / (1.0 - s * s) - p.theta0_fh
    else:
        out = (2.0 - 12.0 * s + 12.0 * s * s) / p.eps
    return float(out) if out.ndim == 0 else out


def mixing_density(s, p: PhysParams, clamped: bool = False):
    """Mixing term of the energy density: Psi(s)/eps or the quartic well."""
    if p.potential is Potential.FLORY_HUGGINS:
        s = np.asarray(s, dtype=np.float64)
        if clamped:
            s = np.clip(s, -_FH_CLAMP, _FH_CLAMP)
        else:
            _fh_check_open(s)
        out = _fh_psi_closed(s, p.theta_fh, p.theta0_fh) / p.eps
        return float(out) if out.ndim == 0 else out
    return potential_value(s, p)


def mixing_deriv(s, p: PhysParams):
    """d/ds of the mixing density (Psi'/eps or the quartic derivative)."""
    if p.potential is Potential.FLORY_HUGGINS:
        return potential_deriv(s, p) / p.eps
    return potential_deriv(s, p)


def mixing_deriv2(s, p: PhysParams):
    if p.potential is Potential.FLORY_HUGGINS:
        return potential_deriv2(s, p) / p.eps
    return potential_deriv2(s, p)


# ---------------------------------------------------------------------------
# functionals and variational derivatives

def free_energy(state: State, p: PhysParams) -> EnergyBreakdown:
    """Quadrature of the energy densities, split by physical origin.

    This is the diagnostics surface: for the logarithmic potential the
    mixing density is evaluated with phi clamped away from +-1 so that a
    slightly out-of-range field still yields a finite report.  The solver
    paths (chemical_potential/molecular_field) raise instead.
    """
    grid = state.grid
    hxy = grid.hx * grid.hy
    phi = state.phi.values
    dx_, dy_ = state.d.x, state.d.y

    gphix, gphiy = grad_arrays(phi, grid)
    grad2 = gphix * gphix + gphiy * gphiy
    e_mix = hxy * float(np.sum(0.5 * p.eps * grad2 + mixing_density(phi, p, clamped=True)))

    e_gamma = hxy * float(np.sum(0.25 * p.gamma * grad2 * grad2)) if p.gamma > 0.0 else 0.0

    gdxx, gdxy = grad_arrays(dx_, grid)
    gdyx, gdyy = grad_arrays(dy_, grid)
    graded2 = gdxx * gdxx + gdxy * gdxy + gdyx * gdyx + gdyy * gdyy
    absd2 = dx_ * dx_ + dy_ * dy_
    e_pol = hxy * float(
        np.sum(
            0.5 * p.kappa * graded2
            + 0.25 * p.alpha * absd2 * absd2
            - 0.5 * p.alpha * (phi - p.phi_cr) * absd2
        )
    )

    gd = gphix * dx_ + gphiy * dy_
    e_anch = hxy * float(np.sum(0.5 * p.beta * gd * gd))

    e_kin = 0.0
    if state.flow is not None:
        u = state.flow.u
        e_kin = hxy * float(np.sum(0.5 * (u.x * u.x + u.y * u.y)))

    return EnergyBreakdown(e_mix=e_mix, e_pol=e_pol, e_anch=e_anch, e_gamma=e_gamma, e_kin=e_kin)


def chemical_potential(phi: ScalarField, d: VectorField2, p: PhysParams) -> ScalarField:
    """mu = delta E / delta phi (without the viscous-regularization term).

    mu = -div((eps + gamma |grad phi|^2) grad phi) + W'(phi)
         - alpha/2 |d|^2 - beta * anchoring term,

    with the anchoring term div((grad phi . d) d) in the tensorial form and
    div(|d|^2 grad phi) in the isotropic-discrete form.
    """
    grid = phi.grid
    ph = phi.values
    gphix, gphiy = grad_arrays(ph, grid)
    if p.gamma > 0.0:
        coef = p.eps + p.gamma * (gphix * gphix + gphiy * gphiy)
    else:
        coef = p.eps
    mu = -div_arrays(coef * gphix, coef * gphiy, grid)
    mu = mu + mixing_deriv(ph, p)
    absd2 = d.x * d.x + d.y * d.y
    mu = mu - 0.5 * p.alpha * absd2
    if p.beta != 0.0:
        if p.anchoring_form is AnchoringForm.TENSORIAL:
            gd = gphix * d.x + gphiy * d.y
            mu = mu - p.beta * div_arrays(gd * d.x, gd * d.y, grid)
        else:
            mu = mu - p.beta * div_arrays(absd2 * gphix, absd2 * gphiy, grid)
    return ScalarField(grid, mu)


def molecular_field(phi: ScalarField, d: VectorField2, p: PhysParams) -> VectorField2:
    """h = delta E / delta d = -kappa lap d + alpha |d|^2 d - alpha (phi - phi_cr) d
    + beta (d . grad phi) grad phi.

    The evolution convention is d_t d + (u.grad) d = -h.
    """
    grid = phi.grid
    absd2 = d.x * d.x + d.y * d.y
    coef = p.alpha * (absd2 - (phi.values - p.phi_cr))
    hx = -p.kappa * lap_array(d.x, grid) + coef * d.x
    hy = -p.kappa * lap_array(d.y, grid) + coef * d.y
    if p.beta != 0.0:
        gphix, gphiy = grad_arrays(phi.values, grid)
        gd = gphix * d.x + gphiy * d.y
        hx = hx + p.beta * gd * gphix
        hy = hy + p.beta * gd * gphiy
    return VectorField2(grid, hx, hy)


def energy_gradient_pairing(state: State, p: PhysParams, dphi: ScalarField, dd: VectorField2) -> float:
    """<mu, dphi> + <h, dd> for the state's derived fields (convenience)."""
    mu = chemical_potential(state.phi, state.d, p)
    h = molecular_field(state.phi, state.d, p)
    return inner_product(mu, dphi) + inner_product(h, dd)


# ---------------------------------------------------------------------------
# reduced landscape

def g_value(s, w, p: PhysParams):
    """Pointwise energy landscape with the logarithmic mixing density.

    g(s, w) = Psi(s)/eps - alpha/2 (s - phi_cr) w^2 + alpha/4 w^4, defined
    for |s| <= 1 (finite limits at the endpoints) and w >= 0 (w plays the
    role of |d|).
    """
    s = np.asarray(s, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    if np.any(np.abs(s) > 1.0):
        raise PotentialDomainError("g is defined for s in [-1, 1]")
    out = (
        _fh_psi_closed(s, p.theta_fh, p.theta0_fh) / p.eps
        - 0.5 * p.alpha * (s - p.phi_cr) * w * w
        + 0.25 * p.alpha * w ** 4
    )
    return float(out) if out.ndim == 0 else out


def g_tilde_value(s, w, p: PhysParams):
    """Pointwise landscape with the quartic mixing density s^2(1-s)^2/eps."""
    s = np.asarray(s, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    out = (
        s * s * (1.0 - s) ** 2 / p.eps
        - 0.5 * p.alpha * (s - p.phi_cr) * w * w
        + 0.25 * p.alpha * w ** 4
    )
    return float(out) if out.ndim == 0 else out


@dataclass
class StationaryPoint:
    s: float
    w: float
    value: float
    kind: str  # "min" | "saddle" | "max"
    on_boundary: bool = False


def _landscape_funcs(p: PhysParams):
    """(g, ds g, dw g, Hessian entries) for the selected potential."""
    if p.potential is Potential.FLORY_HUGGINS:
        gfun = lambda s, w: g_value(s, w, p)
        wprime = lambda s: potential_deriv(s, p) / p.eps
        wsecond = lambda s: potential_deriv2(s, p) / p.eps
    else:
        gfun = lambda s, w: g_tilde_value(s, w, p)
        wprime = lambda s: potential_deriv(s, p)
        wsecond = lambda s: potential_deriv2(s, p)

    def gs(s, w):
        return wprime(s) - 0.5 * p.alpha * w * w

    def gw(s, w):
        return -p.alpha * (s - p.phi_cr) * w + p.alpha * w ** 3

    def hess(s, w):
        return np.array(
            [
                [wsecond(s), -p.alpha * w],
                [-p.alpha * w, -p.alpha * (s - p.phi_cr) + 3.0 * p.alpha * w * w],
            ]
        )

    return gfun, gs, gw, hess


def _polish(seed, bounds, gfun, gs, gw, hess, tol=1e-12, max_iter=200):
    """Active-set Newton polish of a stationary-point seed inside a rectangle.

    Returns (s, w, active) or None when the iteration leaves the region or
    fails to reach |projected gradient| <= tol.
    """
    (smin, smax, wmin, wmax) = bounds
    s, w = seed
    active_s = active_w = 0  # -1 lower bound, +1 upper bound, 0 free
    for _ in range(max_iter):
        grad = np.array([gs(s, w), gw(s, w)])
        # activate constraints when sitting on a bound with an outward push
        if active_s == 0:
            if s <= smin + 1e-14 and grad[0] > 0.0:
                active_s = -1
            elif s >= smax - 1e-14 and grad[0] < 0.0:
                active_s = +1
        if active_w == 0:
            if w <= wmin + 1e-14 and grad[1] > 0.0:
                active_w = -1
            elif w >= wmax - 1e-14 and grad[1] < 0.0:
                active_w = +1
        proj = grad.copy()
        if active_s:
            proj[0] = 0.0
        if active_w:
            proj[1] = 0.0
        scale = 1.0 + abs(gfun(s, w))
        if np.max(np.abs(proj)) <= tol * scale:
            return s, w, (active_s, active_w)
        H = hess(s, w)
        try:
            if active_s and active_w:
                return s, w, (active_s, active_w)
            if active_s:
                dw = -proj[1] / H[1, 1]
                ds = 0.0
            elif active_w:
                ds = -proj[0] / H[0, 0]
                dw = 0.0
            else:
                ds, dw = np.linalg.solve(H, -proj)
        except (np.linalg.LinAlgError, ZeroDivisionError, FloatingPointError):
            return None
        if not (np.isfinite(ds) and np.isfinite(dw)):
            return None
        s = min(max(s + ds, smin), smax)
        w = min(max(w + dw, wmin), wmax)
    return None


def find_landscape_minima(p: PhysParams, region, scan: int = 512) -> list[StationaryPoint]:
    """Scan + Newton-polish the stationary points of the landscape in a region.

    ``region`` is (smin, smax, wmin, wmax).  Interior stationary points are
    classified by the Hessian; points pinned to the region boundary are
    reported as constrained minima when the tangential curvature is
    nonnegative.  Returns points sorted by value; duplicates merged.
    """
    smin, smax, wmin, wmax = (float(v) for v in region)
    if not (smax > smin and wmax > wmin and wmin >= 0.0):
        raise ValueError("region must satisfy smin < smax, 0 <= wmin < wmax")
    if p.potential is Potential.FLORY_HUGGINS:
        margin = 1e-9
        smin, smax = max(smin, -1.0 + margin), min(smax, 1.0 - margin)
        if smax <= smin:
            return []
    bounds = (smin, smax, wmin, wmax)

    gfun, gs, gw, hess = _landscape_funcs(p)
    s_ax = np.linspace(smin, smax, scan)
    w_ax = np.linspace(wmin, wmax, scan)
    S, W = np.meshgrid(s_ax, w_ax)
    G = gfun(S, W)
    GS = gs(S, W)
    GW = gw(S, W)
    grad2 = GS * GS + GW * GW

    def local_minima_mask(A):
        m = np.ones_like(A, dtype=bool)
        m[1:, :] &= A[1:, :] <= A[:-1, :]
        m[:-1, :] &= A[:-1, :] <= A[1:, :]
        m[:, 1:] &= A[:, 1:] <= A[:, :-1]
        m[:, :-1] &= A[:, :-1] <= A[:, 1:]
        return m

    seeds = set()
    for mask in (local_minima_mask(G), local_minima_mask(grad2)):
        jj, ii = np.nonzero(mask)
        for j, i in zip(jj.tolist(), ii.tolist()):
            seeds.add((float(S[j, i]), float(W[j, i])))

    points: list[StationaryPoint] = []
    for seed in sorted(seeds):
        res = _polish(seed, bounds, gfun, gs, gw, hess)
        if res is None:
            continue
        s, w, (act_s, act_w) = res
        on_boundary = bool(act_s or act_w)
        H = hess(s, w)
        if not on_boundary:
            eigs = np.linalg.eigvalsh(H)
            tol = 1e-9 * (1.0 + np.max(np.abs(H)))
            if eigs[0] > tol:
                kind = "min"
            elif eigs[1] < -tol:
                kind = "max"
            else:
                kind = "saddle"
        else:
            # constrained point: require nonnegative curvature along the free
            # directions to call it a minimum, otherwise drop it
            curv_ok = True
            if not act_s:
                curv_ok &= H[0, 0] >= -1e-9 * (1.0 + abs(H[0, 0]))
            if not act_w:
                curv_ok &= H[1, 1] >= -1e-9 * (1.0 + abs(H[1, 1]))
            if not curv_ok:
                continue
            kind = "min"
        points.append(StationaryPoint(s=s, w=w, value=float(gfun(s, w)), kind=kind, on_boundary=on_boundary))

    # dedupe on a tolerance proportional to the region size
    tol_s = 3e-6 * (smax - smin)
    tol_w = 3e-6 * (wmax - wmin)
    unique: list[StationaryPoint] = []
    for pt in sorted(points, key=lambda q: q.value):
        if all(abs(pt.s - q.s) > tol_s or abs(pt.w - q.w) > tol_w for q in unique):
            unique.append(pt)
    return unique


def energy_lower_bound_E0(p: PhysParams, region, scan: int = 512) -> float:
    """E0 = min of the landscape over the region (scan floor + polished points)."""
    smin, smax, wmin, wmax = (float(v) for v in region)
    if p.potential is Potential.FLORY_HUGGINS:
        margin = 1e-9
        smin, smax = max(smin, -1.0 + margin), min(smax, 1.0 - margin)
    gfun, _, _, _ = _landscape_funcs(p)
    s_ax = np.linspace(smin, smax, scan)
    w_ax = np.linspace(wmin, wmax, scan)
    S, W = np.meshgrid(s_ax, w_ax)
    best = float(np.min(gfun(S, W)))
    for pt in find_landscape_minima(p, (smin, smax, wmin, wmax), scan=scan):
        best = min(best, pt.value)
    return best
