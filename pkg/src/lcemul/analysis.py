"""Parameter-condition evaluation and a-priori bound monitors.

The global-existence condition compares the smaller of the two elastic
constants (eps, kappa) against the anchoring strength beta, weighted by an
interpolation constant and the a-priori sup bound D_inf on |d|:

    branch A (any dimension):  min(eps, kappa) > 3^(3/4) beta C^2 D_inf^(3/2)
    branch B (2-D only):       min(eps, kappa) > 3^(3/4) beta C~^2 D_inf
                               * sqrt(E_tot(0) - |Omega| E0) / (eps kappa)^(1/4)

The interpolation constants C (W^{1,4} vs L^inf/H^2 interpolation) and C~
(L^4 vs L^2/H^1, Ladyzhenskaya) are not available in closed form; this
module estimates them by maximizing the corresponding Rayleigh ratios over
a deterministic candidate family, and the condition checker accepts
user-supplied values.  The |Omega| E0 shift uses the actual grid measure
rather than the (2pi)^n of the analysis domain; the report flags this
generalization.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from lcemul.energy import PhysParams, State
from lcemul.grid import Grid2D, grad_arrays, integrate, lap_array, max_abs

__all__ = [
    "ConditionReport",
    "BoundsFragment",
    "d_infinity_bound",
    "lp_decay_envelope",
    "check_wellposedness",
    "estimate_gn_constant",
    "estimate_lady_constant",
    "monitor_bounds",
    "level_set_extents",
]

_THREE_34 = 3.0 ** 0.75


class EnergyInconsistencyError(ValueError):
    """Initial energy below the landscape lower bound |Omega| * E0."""


@dataclass
class ConditionReport:
    """Outcome of the parameter condition, with the inputs it was judged on."""

    n: int
    min_eps_kappa: float
    d_inf: float
    e0: float
    c_gn: float
    c_lady: float
    branch_a_threshold: float
    branch_b_threshold: float
    holds_a: bool
    holds_b: bool
    e_tot0: float
    #: value of c_gn at which branch A flips for these parameters (inf if beta=0)
    c_gn_flip: float = math.inf
    #: the |Omega| E0 shift uses the grid measure, not (2pi)^n
    measure_generalized: bool = True


def d_infinity_bound(d0_max: float, phi_cr: float) -> float:
    """Sup-norm bound D_inf = max(|d_0|_inf, sqrt(1 - phi_cr)) valid for all time."""
    if not -1.0 < phi_cr < 1.0:
        raise ValueError("phi_cr must lie in (-1, 1)")
    if d0_max < 0.0:
        raise ValueError("d0_max must be nonnegative")
    return max(d0_max, math.sqrt(1.0 - phi_cr))


def lp_decay_envelope(d0_lp_p: float, pnorm: float, alpha: float, phi_cr: float,
                      area: float, t: float) -> float:
    """Gronwall envelope for |d(t)|_p^p.

    |d(t)|_p^p <= |d0|_p^p e^{-2 alpha (1-phi_cr) t}
                 + (1-phi_cr)^{p/2} |Omega| (1 - e^{-2 alpha (1-phi_cr) t})
    """
    if pnorm < 2.0:
        raise ValueError("envelope holds for p >= 2")
    if t < 0.0:
        raise ValueError("t must be nonnegative")
    rate = 2.0 * alpha * (1.0 - phi_cr)
    decay = math.exp(-rate * t)
    return d0_lp_p * decay + (1.0 - phi_cr) ** (pnorm / 2.0) * area * (1.0 - decay)


def check_wellposedness(p: PhysParams, e_tot0: float, d_inf: float, c_gn: float,
                        c_lady: float, e0: float, area: float, n: int = 2) -> ConditionReport:
    """Evaluate both branches of the parameter condition.

    Branch A applies in dimensions 2 and 3; branch B only in 2-D and also
    involves the shifted initial energy e_tot0 - area*e0, which must be
    nonnegative (it is an upper bound for the energy for all time).
    """
    if c_gn < 0.0 or c_lady < 0.0:
        raise ValueError("interpolation constants must be nonnegative")
    if d_inf < math.sqrt(1.0 - p.phi_cr) * (1.0 - 1e-12):
        raise ValueError(
            f"d_inf = {d_inf} is below sqrt(1 - phi_cr); use d_infinity_bound")
    shifted = e_tot0 - area * e0
    if shifted < 0.0:
        raise EnergyInconsistencyError(
            f"initial energy {e_tot0} lies below the lower bound {area * e0}"
        )
    mek = min(p.eps, p.kappa)
    thr_a = _THREE_34 * p.beta * c_gn ** 2 * d_inf ** 1.5
    thr_b = (
        _THREE_34 * p.beta * c_lady ** 2 * d_inf
        * math.sqrt(shifted) / (p.eps ** 0.25 * p.kappa ** 0.25)
    )
    if p.beta > 0.0:
        flip = math.sqrt(mek / (_THREE_34 * p.beta * d_inf ** 1.5)) if d_inf > 0.0 else math.inf
    else:
        flip = math.inf
    return ConditionReport(
        n=n,
        min_eps_kappa=mek,
        d_inf=d_inf,
        e0=e0,
        c_gn=c_gn,
        c_lady=c_lady,
        branch_a_threshold=thr_a,
        branch_b_threshold=thr_b,
        holds_a=mek > thr_a,
        holds_b=(n == 2) and (mek > thr_b),
        e_tot0=e_tot0,
        c_gn_flip=flip,
    )


# ---------------------------------------------------------------------------
# interpolation-constant estimators
#
# Both estimators maximize a Rayleigh ratio over a deterministic stream of
# band-limited candidates (constants, single modes, periodic bumps, random
# trigonometric polynomials) followed by a monotone random-ascent polish.
# Candidates are defined as functions of (x, y), not of the grid, so the
# estimates are stable under refinement.  They are lower estimates of the
# true constants, not certified bounds.

_KMAX = 6  # band limit of the candidate family


def _norms(grid: Grid2D, f: np.ndarray):
    hxy = grid.hx * grid.hy
    gx, gy = grad_arrays(f, grid)
    l2sq = hxy * float(np.sum(f * f))
    l4_4 = hxy * float(np.sum(f ** 4))
    grad2 = gx * gx + gy * gy
    h1 = math.sqrt(l2sq + hxy * float(np.sum(grad2)))
    lap = lap_array(f, grid)
    h2 = math.sqrt(l2sq + hxy * float(np.sum(lap * lap)))
    w14 = (l4_4 + hxy * float(np.sum(grad2 * grad2))) ** 0.25
    linf = float(np.max(np.abs(f)))
    return {
        "l2": math.sqrt(l2sq),
        "l4": l4_4 ** 0.25,
        "h1": h1,
        "h2": h2,
        "w14": w14,
        "linf": linf,
    }


def gn_ratio(grid: Grid2D, f: np.ndarray) -> float:
    """|f|_{W^{1,4}} / (|f|_inf^{1/2} |f|_{H^2}^{1/2}); equals 1 for constants."""
    n = _norms(grid, f)
    denom = math.sqrt(n["linf"] * n["h2"])
    return n["w14"] / denom if denom > 0.0 else 0.0


def lady_ratio(grid: Grid2D, f: np.ndarray) -> float:
    """|f|_{L^4} / (|f|_{L^2}^{1/2} |f|_{H^1}^{1/2})."""
    n = _norms(grid, f)
    denom = math.sqrt(n["l2"] * n["h1"])
    return n["l4"] / denom if denom > 0.0 else 0.0


def _trig_poly(grid: Grid2D, coeffs_cos: np.ndarray, coeffs_sin: np.ndarray) -> np.ndarray:
    """Real band-limited field from (2K+1)x(K+1) coefficient tables."""
    X, Y = grid.meshgrid()
    f = np.zeros(grid.shape)
    kxs = range(-_KMAX, _KMAX + 1)
    kys = range(0, _KMAX + 1)
    for a, kx in enumerate(kxs):
        for b, ky in enumerate(kys):
            phase = 2.0 * np.pi * (kx * X / grid.lx + ky * Y / grid.ly)
            f += coeffs_cos[a, b] * np.cos(phase) + coeffs_sin[a, b] * np.sin(phase)
    return f


def _candidate(grid: Grid2D, index: int, seed: int) -> np.ndarray:
    X, Y = grid.meshgrid()
    if index == 0:
        return np.ones(grid.shape)
    if index == 1:
        return np.sin(2.0 * np.pi * X / grid.lx)
    if index == 2:
        return np.sin(2.0 * np.pi * X / grid.lx) * np.cos(2.0 * np.pi * Y / grid.ly)
    if 3 <= index <= 8:
        # periodic bumps of decreasing width; sharpest still resolved at kmax
        b = (2.0, 4.0, 8.0, 12.0, 18.0, 24.0)[index - 3]
        cx = np.cos(2.0 * np.pi * X / grid.lx)
        cy = np.cos(2.0 * np.pi * Y / grid.ly)
        return np.exp(b * (0.5 * cx + 0.5 * cy - 1.0))
    rng = np.random.default_rng(seed * 1_000_003 + index)
    shape = (2 * _KMAX + 1, _KMAX + 1)
    decay = 1.0 / (1.0 + np.add.outer(np.abs(np.arange(-_KMAX, _KMAX + 1)), np.arange(_KMAX + 1)) ** 2)
    return _trig_poly(grid, rng.standard_normal(shape) * decay, rng.standard_normal(shape) * decay)


def _estimate(grid: Grid2D, ratio, n_samples: int, seed: int, n_ascent: int) -> float:
    best_val = -math.inf
    best_f = None
    for idx in range(n_samples):
        f = _candidate(grid, idx, seed)
        r = ratio(grid, f)
        if r > best_val:
            best_val, best_f = r, f
    # monotone random ascent in the band-limited coefficient space
    rng = np.random.default_rng(seed * 7_777_777 + 13)
    step = 0.2
    f = best_f.copy()
    scale = float(np.max(np.abs(f))) or 1.0
    for it in range(n_ascent):
        shape = (2 * _KMAX + 1, _KMAX + 1)
        pert = _trig_poly(grid, rng.standard_normal(shape), rng.standard_normal(shape))
        pnorm = float(np.max(np.abs(pert))) or 1.0
        cand = f + step * scale * pert / pnorm
        r = ratio(grid, cand)
        if r > best_val:
            best_val, f = r, cand
        else:
            step *= 0.85
            if step < 1e-4:
                break
    return best_val


def estimate_gn_constant(grid: Grid2D, n_samples: int = 24, seed: int = 0,
                         n_ascent: int = 60) -> float:
    """Lower estimate of the W^{1,4} interpolation constant on this domain."""
    return _estimate(grid, gn_ratio, n_samples, seed, n_ascent)


def estimate_lady_constant(grid: Grid2D, n_samples: int = 24, seed: int = 0,
                           n_ascent: int = 60) -> float:
    """Lower estimate of the Ladyzhenskaya constant on this domain."""
    return _estimate(grid, lady_ratio, n_samples, seed, n_ascent)


# ---------------------------------------------------------------------------
# runtime monitors

def level_set_extents(field, level: float = 0.5) -> tuple[float, float]:
    """Bounding extents of the sublevel region {field < level}.

    Along every grid row the crossings of the level are located by linear
    interpolation and the widest span is taken as the x-extent; columns
    give the y-extent.  A direction in which the region spans the whole
    period (no crossings but sublevel values present) reports the full
    domain length.  Returns (0, 0) when the region is empty.
    """
    g = field.grid
    vals = field.values
    if not np.any(vals < level):
        return 0.0, 0.0

    def max_span(lines, coords, h, length):
        best = 0.0
        n = lines.shape[1]
        for line in lines:
            below = line < level
            if not below.any():
                continue
            crossings = []
            for i in range(n):
                a = line[i]
                b = line[(i + 1) % n]
                if (a - level) * (b - level) < 0.0:
                    crossings.append(coords[i] + h * (level - a) / (b - a))
            if len(crossings) < 2:
                best = max(best, length)  # spans the whole period
            else:
                best = max(best, max(crossings) - min(crossings))
        return best

    x, y = g.axes()
    ext_x = max_span(vals, x, g.hx, g.lx)
    ext_y = max_span(vals.T, y, g.hy, g.ly)
    return ext_x, ext_y


@dataclass
class BoundsFragment:
    max_abs_d: float
    mass: float
    d_bound_exceeded: bool
    mass_drift_exceeded: bool


def monitor_bounds(state: State, report: ConditionReport | None = None,
                   mass0: float | None = None, d_tol: float = 0.01,
                   mass_tol: float = 1e-8) -> BoundsFragment:
    """Per-step invariant monitor: sup |d| against D_inf and mass against mass0.

    The d-bound tolerance is absolute (default 0.01): the quartic potential
    does not enforce phi <= 1 pointwise, so the sup bound hypothesis only
    holds approximately; excursions are flagged, not fatal.
    """
    md = max_abs(state.d)
    mass = integrate(state.phi)
    d_exceeded = False
    if report is not None:
        d_exceeded = md > report.d_inf + d_tol
    mass_exceeded = False
    if mass0 is not None:
        mass_exceeded = abs(mass - mass0) > mass_tol * max(1.0, abs(mass0))
    return BoundsFragment(
        max_abs_d=md,
        mass=mass,
        d_bound_exceeded=d_exceeded,
        mass_drift_exceeded=mass_exceeded,
    )
