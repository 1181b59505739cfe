"""Composite closing profiles: parabolic interior glued onto soliton caps.

For t well in the past the profile is assembled from closed-form pieces,
all written through L = log(-t) and the cap scale lam = sqrt(L/(-t)):

    interior   F^2 = -2t - z^2/(2L) + ((-t)/L) * phi(|z|/sqrt(-t))
    caps       F(s) = B(lam s)/lam,  s = distance from the tip
    blend      quintic ramp in F^2 over the window BLEND_IN < lam*s < 0.6 L

phi fades the parabolic correction (-t)/L to zero between MID_PLATEAU and
MID_FADE widths of sqrt(-t).  With the correction gone, the interior piece
vanishes exactly at z = 2*sqrt((-t)L), so the caps are planted there with
tip curvature L/(-t) and the tip-distance and tip-curvature ratios against
those reference scales are 1 by construction.  B is the radius function of
the unit-curvature steady soliton; cap and interior square radii agree to
leading order (both ~ 2x/lam^2) across the blend window, where they are
merged by a smoothstep.  The leftover gap there is the log-growth of B^2
against the interior's -x^2/(2L) droop; it shrinks as -t grows, which is
what drives the flow residual of the composite toward zero.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.interpolate import CubicSpline

from .bryant import bryant_cap_profile
from .geometry import Profile

LOG_FLOOR = 5.0       # profiles are built only for log(-t) >= this
MID_PLATEAU = 3.0     # |z|/sqrt(-t) where the parabolic correction starts fading
MID_FADE = 4.0        # ... and where it is gone
BLEND_IN = 1.5        # pure cap below this value of x = lam*s
BLEND_OUT_RATE = 0.6  # pure interior beyond x = this*L (floor 3.5)
_CAP_SPAN = 16.0      # extent (in x) of the cached unit-cap fragment
_CAP_POINTS = 5657
_TIP_SPACING_X = 0.22  # tip grid spacing ~ this/(L*lam); tightens as -t grows

_UNIT_CAP_SQ = None


def _check_time(t: float) -> float:
    t = float(t)
    if not t < 0.0 or not math.log(-t) >= LOG_FLOOR:
        raise ValueError(f"need t <= -e^{LOG_FLOOR:.0f}, got {t!r}")
    return t


def log_scale(t: float) -> float:
    """L = log(-t), the slowly varying scale every piece is written through."""
    return math.log(-_check_time(t))


def tip_scale(t: float) -> float:
    """lam = sqrt(L/(-t)); tip curvature is lam^2 and the cap width ~ 1/lam."""
    return math.sqrt(log_scale(t) / -t)


def nominal_tip_distance(t: float) -> float:
    """2*sqrt((-t)L), where the corrected interior parabola closes up."""
    return 2.0 * math.sqrt(-t * log_scale(t))


def nominal_tip_curvature(t: float) -> float:
    """L/(-t), the scalar curvature planted at both tips."""
    return log_scale(t) / -t


def _smoothstep(u):
    u = np.clip(u, 0.0, 1.0)
    return u**3 * (10.0 + u * (6.0 * u - 15.0))


def parabolic_weight(rho):
    """phi: 1 on |z| <= MID_PLATEAU*sqrt(-t), 0 from MID_FADE on."""
    return 1.0 - _smoothstep((np.asarray(rho, dtype=float) - MID_PLATEAU)
                             / (MID_FADE - MID_PLATEAU))


def _unit_cap_sq() -> CubicSpline:
    # B^2 on [0, _CAP_SPAN]; the graded fragment grid is densest at the tip
    global _UNIT_CAP_SQ
    if _UNIT_CAP_SQ is None:
        frag = bryant_cap_profile(1.0, _CAP_POINTS, s_max=_CAP_SPAN)
        _UNIT_CAP_SQ = CubicSpline(frag.z_grid, frag.f_values**2)
    return _UNIT_CAP_SQ


def mid_radius_squared(z, t):
    """Interior piece: parabolic profile with its correction faded by phi."""
    t = _check_time(t)
    z = np.asarray(z, dtype=float)
    ell = log_scale(t)
    bump = (-t / ell) * parabolic_weight(np.abs(z) / math.sqrt(-t))
    return -2.0 * t - z * z / (2.0 * ell) + bump


def cap_radius_squared(s, t):
    """Cap piece as a function of distance s >= 0 from the tip point."""
    t = _check_time(t)
    lam = tip_scale(t)
    x = lam * np.asarray(s, dtype=float)
    if np.any(x < 0.0) or np.any(x > _CAP_SPAN):
        raise ValueError(f"cap piece only reaches {_CAP_SPAN}/lam from the tip")
    return _unit_cap_sq()(x) / lam**2


def oval_radius_squared(z, t):
    """Blended square radius of the composite profile, vanishing at |z| = z_tip.

    Points with |z| beyond the tips return 0.  Vectorized in z; scalar in,
    scalar out.
    """
    t = _check_time(t)
    z = np.asarray(z, dtype=float)
    scalar = z.ndim == 0
    az = np.abs(np.atleast_1d(z))
    lam = tip_scale(t)
    s = nominal_tip_distance(t) - az
    x = lam * s

    out = mid_radius_squared(az, t)
    near = x < BLEND_OUT
    if np.any(near):
        cap = _unit_cap_sq()(np.clip(x[near], 0.0, None)) / lam**2
        w = _smoothstep((x[near] - BLEND_IN) / (BLEND_OUT - BLEND_IN))
        out[near] = w * out[near] + (1.0 - w) * cap
    out[s <= 0.0] = 0.0
    return float(out[0]) if scalar else out


def _half_grid(t: float, n_half: int) -> np.ndarray:
    """Distances from the tip, 0 = tip to z_tip = centre, graded toward the tip.

    The first spacing is pinned near _TIP_SPACING_X/(L*lam), so the 16-row
    tip fit window spans a stretch of the cap variable that shrinks as -t
    grows and the fitted tip curvature tightens onto the planted one.
    """
    zn = nominal_tip_distance(t)
    ell = log_scale(t)
    a = min(1.0, max(0.15, n_half * _TIP_SPACING_X / (2.0 * ell**2)))
    u = np.linspace(0.0, 1.0, n_half + 1)
    return zn * (a * u + (1.0 - a) * u * u)


def oval_profile(t: float, n_half: int = 600) -> Profile:
    """Sampled composite profile at time t, mirror-symmetric and capped."""
    t = _check_time(t)
    if n_half < 32:
        raise ValueError("need at least 32 points per half")
    zn = nominal_tip_distance(t)
    s = _half_grid(t, n_half)
    z_half = zn - s                      # tip down to centre
    f = np.sqrt(oval_radius_squared(z_half, t))
    f[0] = 0.0
    z_full = np.concatenate([s - zn, (zn - s)[::-1][1:]])
    f_full = np.concatenate([f, f[::-1][1:]])
    return Profile(z_full, f_full, capped=True)


def oval_time_derivative(z, t, rel_step: float = 1e-7):
    """d/dt of the composite radius at fixed z, by a centred step in t.

    Meaningful only strictly inside the tips of the *later* time slice;
    rows beyond them land on the clipped zero radius.
    """
    t = _check_time(t)
    h = rel_step * -t
    f_late = np.sqrt(oval_radius_squared(z, t + h))
    f_early = np.sqrt(oval_radius_squared(z, t - h))
    return (f_late - f_early) / (2.0 * h)
