"""Time integration of the profile equation for rotationally symmetric flows.

The radius profile F(z, t) of a metric dz^2 + F^2 g_{S^2} evolves, in
arclength coordinates anchored at the reference point q (kept at z = 0), by

    F_t = F_zz - (1 - F_z^2)/F - 2 F_z J(z),    J(z) = int_0^z F_zz/F dz'.

The integrator is Lagrangian: grid nodes are material points with velocity
zdot = 2 J(z), and the radius carried along a node obeys
fdot = F_zz - (1 - F_z^2)/F.  This moves the nonlocal transport term into
the node kinematics and lets the tips of a capped profile ride along as
ordinary boundary nodes: their radius is pinned at zero (the smooth-cap
limit of fdot), the slope there is fixed to +-1, and the integrand F_zz/F
-- finite at a smooth cap -- is filled in at the rows nearest each tip
from the fitted local cap model.

Time stepping is classical RK4 under the parabolic bound
dt = min(dt_max, cfl_safety * h_min^2 / 2).  A step producing an invalid
profile is retried with halved dt; five consecutive halvings raise
StiffnessError.  Loss of concavity is recorded as a warning, never an error.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.interpolate import PchipInterpolator

from .finitediff import gradient, second_derivative
from .geometry import (
    TOL_CONCAVITY,
    InvalidProfileError,
    Profile,
    TipNotResolvedError,
    tip_cubic_coefficient,
    tip_window_size,
)

MAX_HALVINGS = 5
MAX_WARNINGS = 50
GRADING_MAX = 4.0     # tip spacing on the graded mesh = interior spacing / 4
GRADING_F_REF = 0.25  # grading engages where F drops below this fraction of r_max

HISTORY_HEADER = "t,r_max,d_tip_left,d_tip_right,R_tip_left,R_tip_right"


class StiffnessError(RuntimeError):
    """Time step rejected repeatedly; the profile is too rough to advance."""


class SingularProfileError(RuntimeError):
    """The radius vanishes where the evolution equation divides by it."""


class HistoryRecord(NamedTuple):
    t: float
    r_max: float
    d_tip_left: float
    d_tip_right: float
    R_tip_left: float
    R_tip_right: float


@dataclass(frozen=True)
class StepControl:
    dt_max: float
    cfl_safety: float = 0.8
    regrid_threshold: float = 2.0

    def __post_init__(self):
        if not self.dt_max > 0.0:
            raise ValueError("dt_max must be positive")
        if not 0.0 < self.cfl_safety < 1.0:
            raise ValueError("cfl_safety must lie in (0, 1)")
        if not self.regrid_threshold > 1.0:
            raise ValueError("regrid_threshold must exceed 1")


@dataclass(frozen=True)
class FlowState:
    """A profile at a moment of flow time, plus the trajectory bookkeeping.

    ``mesh_ref`` is the mesh-distortion measure at the last regrid (0 until
    first measured); regridding triggers when the current distortion exceeds
    regrid_threshold times this reference.
    """

    profile: Profile
    t: float
    history: tuple = ()
    warnings: tuple = ()
    n_regrids: int = 0
    mesh_ref: float = 0.0

    def __post_init__(self):
        if not self.t < 0.0:
            raise ValueError("flow time must be negative")
        _anchor_index(self.profile.z_grid)


def _anchor_index(z: np.ndarray) -> int:
    i = int(np.argmin(np.abs(z)))
    if abs(z[i]) > 1e-9 * (z[-1] - z[0]):
        raise ValueError("grid must contain the reference point z = 0")
    return i


def _model_weight(s: np.ndarray) -> np.ndarray:
    """Blend weight across a tip window: 1 on the inner half, smooth to 0."""
    u = np.clip(2.0 * s / s[-1] - 1.0, 0.0, 1.0)
    return (1.0 - u) ** 2 * (1.0 + 2.0 * u)


def _fill_tip_integrand(z: np.ndarray, f: np.ndarray, g: np.ndarray) -> None:
    """Blend g = F_zz/F into the cap model across each tip-fit window.

    With F(s) = s + a3 s^3 the integrand is 6 a3 / (1 + a3 s^2).  Where the
    radius is comparable to the grid spacing, reading F_zz/F off the stencils
    couples node velocities to value noise at strength 1/h^3 -- an unstable
    feedback between near-tip panel widths and radii -- so the inner half of
    the window uses the fitted model alone.  The handover to the stencil
    value over the outer half is smooth: a hard switch would act as a
    persistent differential-velocity seam in the node motion, and the mesh
    would crease there.
    """
    half = 0.5 * (z[-1] - z[0])
    a3, _ = tip_cubic_coefficient(z, f, "left")
    s = z - z[0]
    m = tip_window_size(s, half)
    w = _model_weight(s[:m])
    g[0] = 6.0 * a3
    g[1:m] = w[1:] * (6.0 * a3 / (1.0 + a3 * s[1:m] ** 2)) + (1.0 - w[1:]) * g[1:m]
    a3, _ = tip_cubic_coefficient(z, f, "right")
    s = z[-1] - z
    m = tip_window_size(s[::-1], half)
    w = _model_weight(s[::-1][:m])[::-1]
    g[-1] = 6.0 * a3
    g[-m:-1] = w[:-1] * (6.0 * a3 / (1.0 + a3 * s[-m:-1] ** 2)) \
        + (1.0 - w[:-1]) * g[-m:-1]


def _rates(z, f, capped, i_anchor):
    """Material node velocities (zdot, fdot) and the slope array."""
    if capped:
        if np.any(f[1:-1] <= 0.0):
            raise SingularProfileError("radius vanished at an interior node")
    elif np.any(f <= 0.0):
        raise SingularProfileError("radius vanished at a grid node")
    fz = gradient(z, f)
    fzz = second_derivative(z, f)
    if capped:
        fz[0], fz[-1] = 1.0, -1.0
        g = np.empty_like(f)
        g[1:-1] = fzz[1:-1] / f[1:-1]
        _fill_tip_integrand(z, f, g)
        fdot = np.zeros_like(f)
        fdot[1:-1] = fzz[1:-1] - (1.0 - fz[1:-1] ** 2) / f[1:-1]
    else:
        g = fzz / f
        fdot = fzz - (1.0 - fz**2) / f
    integral = cumulative_trapezoid(g, z, initial=0.0)
    integral -= integral[i_anchor]
    return 2.0 * integral, fdot, fz


def rhs(profile: Profile, form: str = "raw") -> np.ndarray:
    """Time derivative of F at fixed z on the profile's grid.

    ``raw`` evaluates F_zz - (1 - F_z^2)/F - 2 F_z int_0^z F_zz/F dz' with
    trapezoidal quadrature anchored at z = 0.  ``parts`` evaluates the
    equivalent F_zz - (1 + F_z^2)/F + 2 F_z (F_z(0)/F(0) - int_0^z (F_z/F)^2),
    defined only where F > 0; the two agree to quadrature accuracy on smooth
    positive profiles.  At the tips of a capped profile the one-sided limit
    -zdot * F_z is returned, with F_z = +-1 and zdot the tip velocity.
    """
    z, f = profile.z_grid, profile.f_values
    i0 = _anchor_index(z)
    if form == "raw":
        zdot, fdot, fz = _rates(z, f, profile.capped, i0)
        return fdot - zdot * fz
    if form != "parts":
        raise ValueError("form must be 'raw' or 'parts'")
    if np.any(f <= 0.0):
        raise SingularProfileError("integrated-by-parts form needs F > 0 everywhere")
    fz = gradient(z, f)
    fzz = second_derivative(z, f)
    integral = cumulative_trapezoid((fz / f) ** 2, z, initial=0.0)
    integral -= integral[i0]
    return fzz - (1.0 + fz**2) / f + 2.0 * fz * (fz[i0] / f[i0] - integral)


def material_velocity(profile: Profile, z: float) -> float:
    """Velocity 2 int_0^z F_zz/F dz' of the material point at position z."""
    zg, f = profile.z_grid, profile.f_values
    if not zg[0] <= z <= zg[-1]:
        raise ValueError("z outside the profile's grid")
    i0 = _anchor_index(zg)
    lo = min(i0, int(np.searchsorted(zg, z, side="right")) - 1)
    hi = max(i0, int(np.searchsorted(zg, z, side="left")))
    bad = f[lo : hi + 1] <= 0.0
    if profile.capped:  # tips carry a finite, extrapolated integrand
        if lo == 0:
            bad[0] = False
        if hi == zg.size - 1:
            bad[-1] = False
    if np.any(bad):
        raise SingularProfileError("radius vanishes along the integration path")
    with np.errstate(divide="ignore", invalid="ignore"):
        g = second_derivative(zg, f) / f
    if profile.capped:
        _fill_tip_integrand(zg, f, g)
    integral = cumulative_trapezoid(g[lo : hi + 1], zg[lo : hi + 1], initial=0.0)
    integral -= integral[i0 - lo]
    return float(np.interp(z, zg[lo : hi + 1], 2.0 * integral))


# -- stepping -----------------------------------------------------------------


def _attempt(z, f, capped, i0, dt):
    k1z, k1f, _ = _rates(z, f, capped, i0)
    k2z, k2f, _ = _rates(z + 0.5 * dt * k1z, f + 0.5 * dt * k1f, capped, i0)
    k3z, k3f, _ = _rates(z + 0.5 * dt * k2z, f + 0.5 * dt * k2f, capped, i0)
    k4z, k4f, _ = _rates(z + dt * k3z, f + dt * k3f, capped, i0)
    w = dt / 6.0
    return (z + w * (k1z + 2.0 * k2z + 2.0 * k3z + k4z),
            f + w * (k1f + 2.0 * k2f + 2.0 * k3f + k4f))


def _clip_chords(z, f) -> float:
    """Clip chords to the slope bound, one pass from each end.

    Returns the largest slope excess removed.  Transients that graze the
    bound by O(h^2) are projected back onto it; anything larger signals a
    profile that genuinely wants slope > 1 and is the caller's problem.
    """
    h = np.diff(z)
    if np.all(np.abs(np.diff(f)) <= h):
        return 0.0
    worst = 0.0
    for k in range(1, f.size):
        lim = f[k - 1] + h[k - 1]
        if f[k] > lim:
            worst = max(worst, (f[k] - lim) / h[k - 1])
            f[k] = lim
    for k in range(f.size - 1, 0, -1):
        lim = f[k] + h[k - 1]
        if f[k - 1] > lim:
            worst = max(worst, (f[k - 1] - lim) / h[k - 1])
            f[k - 1] = lim
    return worst


def _project_caps(z, f) -> None:
    """Re-impose the fitted cap model on the row nearest each tip.

    The tip panel's slope margin is only O(|a3| h^2); the row next to a tip
    evaluates (1 - F_z^2)/F where F_z differs from 1 by that same order, so
    stencil-level noise there can push the chord past the slope bound.  With
    the row re-evaluated from the window fit after every step, the tip
    panel's chord is 1 + a3 h^2 by construction and the noise cannot
    compound.  The replacement differs from the dynamical value by the fit
    residual, below the scheme's truncation order.
    """
    a3, _ = tip_cubic_coefficient(z, f, "left")
    s = z[1] - z[0]
    f[1] = s + a3 * s**3
    a3, _ = tip_cubic_coefficient(z, f, "right")
    s = z[-1] - z[-2]
    f[-2] = s + a3 * s**3


def _valid_candidate(z, f, capped):
    if not (np.all(np.isfinite(z)) and np.all(np.isfinite(f))):
        return None
    if not np.all(np.diff(z) > 0.0):
        return None
    if not capped and np.any(f <= 0.0):
        return None
    try:
        return Profile(z, f, capped=capped)
    except InvalidProfileError:
        return None


def _advance(z, f, capped, i0, t, dt):
    """One accepted RK4 step, halving dt on rejection.

    Returns (profile, t_new, dt_used).
    """
    for _ in range(MAX_HALVINGS + 1):
        try:
            with np.errstate(all="ignore"):
                zc, fc = _attempt(z, f, capped, i0, dt)
        except SingularProfileError:
            dt *= 0.5
            continue
        if np.all(np.isfinite(zc)) and np.all(np.isfinite(fc)) \
                and np.all(np.diff(zc) > 0.0):
            if capped:
                _project_caps(zc, fc)
            if _clip_chords(zc, fc) > 0.01:
                dt *= 0.5
                continue
        candidate = _valid_candidate(zc, fc, capped)
        if candidate is not None:
            return candidate, t + dt, dt
        dt *= 0.5
    raise StiffnessError(f"step at t = {t:g} rejected after {MAX_HALVINGS} halvings")


def _tip_curvature(profile: Profile, side: str) -> float:
    try:
        a3, _ = tip_cubic_coefficient(profile.z_grid, profile.f_values, side)
    except TipNotResolvedError:
        return float("nan")
    return -36.0 * a3


def _record(profile: Profile, t: float) -> HistoryRecord:
    if profile.capped:
        r_left = _tip_curvature(profile, "left")
        r_right = _tip_curvature(profile, "right")
    else:
        r_left = r_right = float("nan")
    return HistoryRecord(t, profile.r_max, profile.d_tip_left,
                         profile.d_tip_right, r_left, r_right)


# -- regridding ---------------------------------------------------------------


def _target_density(f: np.ndarray, r_max: float) -> np.ndarray:
    return 1.0 / np.clip(f / (GRADING_F_REF * r_max), 1.0 / GRADING_MAX, 1.0)


def _distortion(z: np.ndarray, f: np.ndarray) -> float:
    """Spread of h_i * density over the mesh; 1 on the graded target mesh."""
    w = _target_density(f, float(np.max(f)))
    hw = np.diff(z) * 0.5 * (w[1:] + w[:-1])
    return float(np.max(hw) / np.min(hw))


def regrid(profile: Profile, n: int | None = None) -> Profile:
    """Resample onto the graded mesh equidistributing the tip-weighted density.

    Node spacing is proportional to clip(F / (0.25 r_max), 1/4, 1), so tip
    neighbourhoods end up about four times finer than the interior.  Values
    move by monotone cubic interpolation; the endpoints are kept exactly and
    the node nearest the origin is snapped to the reference point z = 0.
    """
    z, f = profile.z_grid, profile.f_values
    if n is None:
        n = z.size
    interp = PchipInterpolator(z, f)
    # equidistribute on a fine auxiliary mesh: inverting the mass function
    # sampled only at the source nodes kinks the new spacing wherever the
    # source mesh is coarse, and spacing jumps feed first-order stencil error
    z_aux = np.linspace(z[0], z[-1], max(4 * z.size, 1025))
    f_aux = np.clip(interp(z_aux), 0.0, None)
    w = _target_density(f_aux, profile.r_max)
    mass = cumulative_trapezoid(w, z_aux, initial=0.0)
    zn = np.interp(np.linspace(0.0, mass[-1], n), mass, z_aux)
    zn[0], zn[-1] = z[0], z[-1]
    zn[int(np.argmin(np.abs(zn)))] = 0.0
    fn = interp(zn)
    if profile.capped:
        fn[0] = fn[-1] = 0.0
        # Blend the fitted cap model over each tip-fit window: the monotone
        # interpolant overshoots slope 1 by O(h^2) right at a tip, and its
        # error near a coarsely resolved cap can exceed the cap's own slope
        # margin, so the rows nearest a tip must come from the model.  The
        # handover is smooth because a hard splice would plant a value kink
        # -- a curvature spike -- at the junction.
        half = 0.5 * (zn[-1] - zn[0])
        a3, _ = tip_cubic_coefficient(z, f, "left")
        s = zn - zn[0]
        m = tip_window_size(s, half)
        wgt = _model_weight(s[:m])
        fn[1:m] = wgt[1:] * (s[1:m] + a3 * s[1:m] ** 3) + (1.0 - wgt[1:]) * fn[1:m]
        a3, _ = tip_cubic_coefficient(z, f, "right")
        s = zn[-1] - zn
        m = tip_window_size(s[::-1], half)
        wgt = _model_weight(s[::-1][:m])[::-1]
        fn[-m:-1] = wgt[:-1] * (s[-m:-1] + a3 * s[-m:-1] ** 3) \
            + (1.0 - wgt[:-1]) * fn[-m:-1]
    # clip any remaining overshoot to the slope bound
    _clip_chords(zn, fn)
    return Profile(zn, fn, capped=profile.capped)


def _maybe_regrid(profile, ctl, n_regrids, mesh_ref):
    dist = _distortion(profile.z_grid, profile.f_values)
    if mesh_ref == 0.0:
        mesh_ref = dist
    if dist > ctl.regrid_threshold * mesh_ref:
        profile = regrid(profile)
        n_regrids += 1
        mesh_ref = _distortion(profile.z_grid, profile.f_values)
    return profile, n_regrids, mesh_ref


def _concavity_note(profile: Profile, t: float) -> str | None:
    # Skip the two rows nearest each cap: the tip fit already vouches for
    # them, and their stencil noise would mask a real interior inflection.
    margin = 2 if profile.capped else 0
    defect = profile.concavity_defect(margin)
    if defect > TOL_CONCAVITY:
        return f"concavity defect {defect:.3e} at t = {t:.6g}"
    return None


def step(state: FlowState, ctl: StepControl) -> FlowState:
    """One accepted RK4 step under the CFL bound (see module docstring)."""
    profile, n_regrids, mesh_ref = _maybe_regrid(
        state.profile, ctl, state.n_regrids, state.mesh_ref)
    z, f = profile.z_grid, profile.f_values
    i0 = _anchor_index(z)
    h_min = float(np.min(np.diff(z)))
    dt = min(ctl.dt_max, 0.5 * ctl.cfl_safety * h_min**2)
    if state.t + dt >= 0.0:
        raise ValueError("step would cross t = 0; reduce dt_max or stop earlier")
    candidate, t_new, _ = _advance(z, f, profile.capped, i0, state.t, dt)
    warnings = state.warnings
    note = _concavity_note(candidate, t_new)
    if note is not None and len(warnings) <= MAX_WARNINGS:
        if len(warnings) == MAX_WARNINGS:
            note = "further concavity warnings suppressed"
        warnings = warnings + (note,)
    return FlowState(candidate, t_new,
                     state.history + (_record(candidate, t_new),),
                     warnings, n_regrids, mesh_ref)


def evolve(state: FlowState, ctl: StepControl, t_end: float, *,
           snapshot_times: Sequence[float] = ()) -> tuple[FlowState, list[tuple[float, Profile]]]:
    """Advance to t_end, recording one history row per accepted step.

    Snapshot times are landed on exactly (the step is shortened to hit them);
    the returned list pairs each requested time with the profile there.
    """
    if not state.t <= t_end < 0.0:
        raise ValueError("need t <= t_end < 0")
    snaps = sorted(float(s) for s in snapshot_times)
    if snaps and not (state.t <= snaps[0] and snaps[-1] <= t_end):
        raise ValueError("snapshot times must lie in [t, t_end]")
    out: list[tuple[float, Profile]] = []
    profile, t = state.profile, state.t
    records = list(state.history)
    warnings = list(state.warnings)
    n_regrids, mesh_ref = state.n_regrids, state.mesh_ref
    k = 0
    while k < len(snaps) and snaps[k] <= t:
        out.append((snaps[k], profile))
        k += 1
    while t < t_end:
        profile, n_regrids, mesh_ref = _maybe_regrid(profile, ctl, n_regrids, mesh_ref)
        z, f = profile.z_grid, profile.f_values
        i0 = _anchor_index(z)
        h_min = float(np.min(np.diff(z)))
        dt = min(ctl.dt_max, 0.5 * ctl.cfl_safety * h_min**2)
        target = snaps[k] if k < len(snaps) else t_end
        remaining = target - t
        landing = remaining <= dt
        if landing:
            dt = remaining
        elif remaining <= 2.0 * dt:
            # split the remainder over two steps so the landing step never
            # degenerates into a sliver (which would turn the history's
            # finite differences into roundoff noise)
            dt = 0.5 * remaining
        profile, t, dt_used = _advance(z, f, profile.capped, i0, t, dt)
        if landing and dt_used == dt:
            t = target
        records.append(_record(profile, t))
        note = _concavity_note(profile, t)
        if note is not None and len(warnings) <= MAX_WARNINGS:
            if len(warnings) == MAX_WARNINGS:
                note = "further concavity warnings suppressed"
            warnings.append(note)
        while k < len(snaps) and t >= snaps[k]:
            out.append((snaps[k], profile))
            k += 1
    final = FlowState(profile, t, tuple(records), tuple(warnings),
                      n_regrids, mesh_ref)
    return final, out


# -- diagnostics ----------------------------------------------------------------


def rmax_derivative_check(history: Sequence[HistoryRecord], tol: float = 1e-3):
    """Per-step values of -(1/2) d(r_max^2)/dt and the indices falling below 1 - tol."""
    if len(history) < 3:
        raise ValueError("need at least 3 history records")
    t = np.array([rec.t for rec in history])
    r2 = np.array([rec.r_max for rec in history]) ** 2
    values = -0.5 * np.diff(r2) / np.diff(t)
    return values, np.flatnonzero(values < 1.0 - tol)


def write_history(history: Sequence[HistoryRecord], path) -> None:
    data = np.array([tuple(rec) for rec in history], dtype=float)
    if data.size == 0:
        data = np.empty((0, 6))
    np.savetxt(path, data, delimiter=",", header=HISTORY_HEADER, comments="",
               fmt="%.17g")
