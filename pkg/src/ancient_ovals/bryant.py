"""Steady rotationally symmetric soliton warp function.

The metric dz^2 + B(z)^2 g_{S^2} of the Bryant soliton is encoded through
Phi(r) = B'(z)^2 evaluated at r = B(z), which satisfies

    Phi Phi'' - (1/2) Phi'^2 + r^{-2} (1 - Phi)(r Phi' + 2 Phi) = 0

with Phi(0) = 1, Phi strictly decreasing, and Phi ~ c0/r^2 far out.  Near
the tip Phi = 1 + b0 r^2 + O(r^4) with b0 < 0; b0 = -1/6 normalizes the tip
scalar curvature to 1.  Sectional curvatures are K_orb = (1 - Phi)/r^2 and
K_rad = -Phi'/(2r).

Integration is done in xi = log r for the deficit u = 1 - Phi, which is
positive and increasing, so both ends of the range are cancellation-free.
The stored solution carries a per-point defect: u_xixi is recovered from
the stored first derivative by high-order differencing on the uniform log
grid, independently of the integrator, and plugged back into the equation.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_trapezoid, simpson, solve_ivp
from scipy.interpolate import CubicHermiteSpline

from .geometry import Profile

R_START = 1e-3
R_END = 1e3
N_GRID = 2000

# Even-series coefficients of Phi at the tip for b0 = -1/6, derived by
# substituting 1 + sum a_k r^{2k} into the equation and matching orders.
# For general b0 the k-th coefficient scales by (-6 b0)^k.
_SERIES_REF = (-1.0 / 6.0, 1.0 / 90.0, -1.0 / 3780.0, -1.0 / 510300.0)


class BranchError(RuntimeError):
    """Integration left (0, 1): not the decaying branch."""


class NormalizationError(ValueError):
    """Operation requires the tip-curvature-1 normalization."""


def tip_series(b0: float) -> tuple[float, float, float, float]:
    """Coefficients a_1..a_4 of Phi = 1 + sum a_k r^{2k} near the tip."""
    if b0 >= 0.0:
        raise ValueError("b0 must be negative")
    lam = -6.0 * b0
    return tuple(c * lam ** (k + 1) for k, c in enumerate(_SERIES_REF))


@dataclass(frozen=True)
class BryantSolution:
    r_grid: np.ndarray        # increasing radii
    phi_values: np.ndarray    # Phi on r_grid
    b0: float                 # tip coefficient
    c0: float                 # fitted tail coefficient, Phi ~ c0/r^2
    z_of_r: np.ndarray        # arclength from the tip, dz = dr/sqrt(Phi)
    one_minus_phi: np.ndarray  # deficit u = 1 - Phi, exact near the tip
    du_dxi: np.ndarray        # du/d(log r) on the grid
    ode_residual: np.ndarray  # pointwise defect of the stored solution

    @property
    def k_orb(self) -> np.ndarray:
        return self.one_minus_phi / self.r_grid**2

    @property
    def k_rad(self) -> np.ndarray:
        # -Phi'/(2r) with Phi' = -u_xi / r
        return self.du_dxi / (2.0 * self.r_grid**2)

    @property
    def scalar_curvature(self) -> np.ndarray:
        return 2.0 * self.k_orb + 4.0 * self.k_rad

    def to_csv(self, path) -> None:
        data = np.column_stack(
            [self.r_grid, self.phi_values, self.z_of_r,
             self.k_orb, self.k_rad, self.scalar_curvature])
        np.savetxt(path, data, delimiter=",", comments="",
                   header="r,phi,z,k_orb,k_rad,R", fmt="%.17g")


def _rhs(xi, y):
    u, v = y
    q = 1.0 - u
    f = -0.5 * v * v + u * (2.0 - 2.0 * u - v)
    return [v, v + f / q]


def _jac(xi, y):
    u, v = y
    q = 1.0 - u
    f = -0.5 * v * v + u * (2.0 - 2.0 * u - v)
    return [[0.0, 1.0],
            [((2.0 - 4.0 * u - v) * q + f) / q**2, 1.0 - (v + u) / q]]


# 8th-order first-derivative stencil on a uniform grid
_D8 = np.array([1.0 / 280.0, -4.0 / 105.0, 0.2, -0.8, 0.0,
                0.8, -0.2, 4.0 / 105.0, -1.0 / 280.0])


def _deriv8(x, f):
    """High-order first derivative of samples on a uniform grid."""
    from .finitediff import fd_weights

    h = x[1] - x[0]
    out = np.empty_like(f)
    out[4:-4] = np.convolve(f, _D8[::-1], mode="valid") / h
    for i in range(4):
        out[i] = fd_weights(x[:9], x[i], 1) @ f[:9]
        out[-1 - i] = fd_weights(x[-9:], x[-1 - i], 1) @ f[-9:]
    return out


def solve_phi(b0: float, r_end: float = R_END) -> BryantSolution:
    """Integrate the warp equation outward from a series start at r = 1e-3.

    The state is (u, u_xi) in xi = log r.  Raises BranchError if Phi leaves
    (0, 1), and ValueError when r_end is too small for the tail regime
    (Phi(r_end) must come out below 0.05).
    """
    if b0 >= 0.0:
        raise ValueError("b0 must be negative")
    if r_end <= 100.0 * R_START:
        raise ValueError("r_end too small")

    a = np.asarray(tip_series(b0))
    k2 = np.array([2.0, 4.0, 6.0, 8.0])
    pw = R_START ** k2
    y0 = [-(a * pw).sum(), -(k2 * a * pw).sum()]

    def top(xi, y):  # Phi = 0
        return 1.0 - y[0]

    def bottom(xi, y):  # Phi = 1
        return y[0]

    top.terminal = bottom.terminal = True
    xs = np.linspace(np.log(R_START), np.log(r_end), N_GRID)
    # implicit solver: the linearization about the decaying branch is stiff
    # (fast mode ~ -2/Phi) once Phi is small
    sol = solve_ivp(_rhs, (xs[0], xs[-1]), y0, method="Radau", jac=_jac,
                    rtol=1e-10, atol=1e-15, t_eval=xs, events=[top, bottom])
    if sol.status == 1:
        raise BranchError("Phi left (0, 1) at finite radius")
    if not sol.success:
        raise RuntimeError(sol.message)

    u, v = sol.y
    r = np.exp(xs)
    phi = 1.0 - u
    if phi[-1] >= 0.05:
        raise ValueError("r_end too small: tail regime not reached")

    # defect: recover u_xixi independently of the integrator -- high-order
    # differencing of the stored u_xi, except near the tip where the 1/r^2
    # factor amplifies sample noise beyond use and the even series is exact
    # to ~1e-13, -- and plug the triple back into the r-form equation
    w = _deriv8(xs, v)
    ser = r <= 0.2
    w[ser] = -((r[ser, None] ** k2) * (k2**2 * a)).sum(axis=1)
    resid = np.abs((1.0 - u) * (v - w) - 0.5 * v * v
                   + u * (2.0 - 2.0 * u - v)) / r**2

    # tail coefficient: Phi = c0/r^2 + 2 c0^2/r^4 over the last decade,
    # c0 the only free parameter (fixed-point iteration on the linear part)
    m = r >= r[-1] / 10.0
    s2, s4 = r[m] ** -2.0, r[m] ** -4.0
    c0 = phi[-1] * r[-1] ** 2
    for _ in range(80):
        c0 = float(np.dot(phi[m] - 2.0 * c0**2 * s4, s2) / np.dot(s2, s2))

    # arclength: dz = dr/sqrt(Phi) = r dxi / sqrt(Phi), with the series
    # giving the piece below the first grid point.  Trapezoid alone leaves a
    # constant ~h^2/12 *relative* error in z, visible in tip-window fits, so
    # subtract the Euler-Maclaurin endpoint term using g' = g (1 + v/(2 Phi))
    g = r / np.sqrt(phi)
    gp = g * (1.0 + v / (2.0 * phi))
    h = xs[1] - xs[0]
    z0 = R_START - b0 * R_START**3 / 6.0
    z = z0 + cumulative_trapezoid(g, xs, initial=0.0) - h * h / 12.0 * (gp - gp[0])

    return BryantSolution(r, phi, float(b0), c0, z, u, v, resid)


@functools.lru_cache(maxsize=4)
def _normalized() -> BryantSolution:
    return solve_phi(-1.0 / 6.0)


def ray_ricci_integral(sol: BryantSolution, *,
                       allow_unnormalized: bool = False) -> float:
    """Integral of the radial Ricci curvature 2 K_rad over the tip ray.

    Evaluated as int v e^{-xi} / sqrt(Phi) dxi on the stored grid plus the
    analytic series piece below the first grid point and the c0/r^4 tail
    beyond the last.  Equals 1 for the normalized soliton and scales like
    sqrt of the tip curvature.
    """
    r_tip = -6.0 * sol.b0
    if not allow_unnormalized and abs(r_tip - 1.0) > 1e-3:
        raise NormalizationError("tip scalar curvature is not 1")
    xs = np.log(sol.r_grid)
    core = simpson(sol.du_dxi / (sol.r_grid * np.sqrt(sol.phi_values)), x=xs)
    tip = -2.0 * sol.b0 * sol.r_grid[0]
    tail = np.sqrt(sol.c0) / sol.r_grid[-1] ** 2
    return float(tip + core + tail)


def bryant_cap_profile(r_tip: float, n_points: int,
                       s_max: float | None = None) -> Profile:
    """Tip cap F(s) = B(lam s)/lam with lam = sqrt(r_tip).

    s is arclength from the tip; the cap carries tip scalar curvature r_tip
    and approaches sqrt(2 s / lam) far from the tip.  The grid is graded
    quadratically toward the tip.  Returned as an uncapped profile fragment
    (only the s = 0 end is a tip).
    """
    if r_tip <= 0.0:
        raise ValueError("r_tip must be positive")
    if n_points < 5:
        raise ValueError("need at least 5 points")
    base = _normalized()
    lam = np.sqrt(r_tip)
    s_full = base.z_of_r[-1] / lam
    if s_max is None:
        s_max = s_full
    elif not 0.0 < s_max <= s_full:
        raise ValueError("cap extent exceeds the solved range")
    # radius as a function of arclength, with the exact tip point prepended
    # and the exact slope dr/dz = sqrt(Phi) at every node (1 at the tip)
    warp = CubicHermiteSpline(
        np.concatenate([[0.0], base.z_of_r]),
        np.concatenate([[0.0], base.r_grid]),
        np.concatenate([[1.0], np.sqrt(base.phi_values)]))
    s = s_max * (np.arange(n_points) / (n_points - 1.0)) ** 2
    f = warp(lam * s) / lam
    f[0] = 0.0
    return Profile(s, f, capped=False)
