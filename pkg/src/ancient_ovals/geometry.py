"""Rotationally symmetric warped-product metrics dz^2 + F(z)^2 g_{S^2}.

The profile F determines every pointwise geometric quantity. Conventions:
z is signed arclength from a reference point q (the grid origin), tips are
the F = 0 endpoints, and the orbital/radial sectional curvatures are

    K_orb = (1 - F_z^2) / F^2,      K_rad = -F_zz / F,

with scalar curvature R = 2*K_orb + 4*K_rad.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .finitediff import fd_weights, gradient, second_derivative

TOL_SLOPE = 1e-6
TOL_CONCAVITY = 1e-8


class InvalidProfileError(ValueError):
    pass


class TipNotResolvedError(RuntimeError):
    pass


@dataclass(frozen=True)
class Profile:
    """Radius profile F sampled on a strictly increasing arclength grid.

    ``capped`` profiles close up at both ends (F = 0 exactly at the endpoints,
    slope approaching +-1); uncapped profiles represent open tubes such as the
    exact cylinder, where the endpoint rows are ordinary interior samples.
    """

    z_grid: np.ndarray
    f_values: np.ndarray
    capped: bool = True

    def __post_init__(self):
        object.__setattr__(self, "z_grid", np.asarray(self.z_grid, dtype=float))
        object.__setattr__(self, "f_values", np.asarray(self.f_values, dtype=float))
        self.validate()

    # -- invariants -----------------------------------------------------------

    def validate(self) -> None:
        z, f = self.z_grid, self.f_values
        if z.ndim != 1 or z.size < 5:
            raise InvalidProfileError("grid must be 1-D with at least 5 points")
        if f.shape != z.shape:
            raise InvalidProfileError("f_values and z_grid must have equal length")
        if not np.all(np.diff(z) > 0):
            raise InvalidProfileError("z_grid must be strictly increasing")
        if np.any(f < -TOL_SLOPE):
            raise InvalidProfileError("radii must be non-negative")
        if self.capped:
            if f[0] != 0.0 or f[-1] != 0.0:
                raise InvalidProfileError("capped profile must vanish exactly at both endpoints")
            if np.any(f[1:-1] <= 0.0):
                raise InvalidProfileError("radius vanishes at an interior grid point")
        slopes = np.diff(f) / np.diff(z)
        if np.max(np.abs(slopes)) > 1.0 + TOL_SLOPE:
            raise InvalidProfileError("discrete slope exceeds 1")

    def concavity_defect(self, margin: int = 0) -> float:
        """Largest positive discrete second difference (0 for concave profiles).

        `margin` drops that many extra rows at each end beyond the endpoints
        themselves; rows next to a cap carry O(h^2) stencil noise that would
        otherwise drown a genuine interior inflection. Returns 0.0 when the
        margins leave no interior rows.
        """
        d2 = second_derivative(self.z_grid, self.f_values)
        core = d2[1 + margin:d2.size - 1 - margin]
        if core.size == 0:
            return 0.0
        scale = max(1.0, float(np.max(self.f_values)))
        return float(np.max(core)) * scale

    # -- basic quantities -----------------------------------------------------

    @property
    def r_max(self) -> float:
        return float(np.max(self.f_values))

    @property
    def d_tip_left(self) -> float:
        return float(-self.z_grid[0])

    @property
    def d_tip_right(self) -> float:
        return float(self.z_grid[-1])

    def interp(self, z: np.ndarray) -> np.ndarray:
        from scipy.interpolate import PchipInterpolator

        return PchipInterpolator(self.z_grid, self.f_values)(z)

    # -- constructors ---------------------------------------------------------

    @staticmethod
    def cylinder(radius: float, half_length: float, n: int) -> "Profile":
        z = np.linspace(-half_length, half_length, n)
        return Profile(z, np.full(n, float(radius)), capped=False)

    @staticmethod
    def sphere(radius: float, n: int, q_offset: float = 0.0) -> "Profile":
        """Round sphere of radius r; q_offset shifts the reference point off the equator."""
        if abs(q_offset) >= radius * np.pi / 2:
            raise InvalidProfileError("reference point must lie strictly between the tips")
        z = np.linspace(-radius * np.pi / 2 - q_offset, radius * np.pi / 2 - q_offset, n)
        f = radius * np.cos((z + q_offset) / radius)
        f[0] = f[-1] = 0.0
        return Profile(z, f)

    # -- serialization --------------------------------------------------------

    def to_csv(self, path) -> None:
        data = np.column_stack([self.z_grid, self.f_values])
        header = "z,f"
        np.savetxt(path, data, delimiter=",", header=header, comments="", fmt="%.17g")

    @staticmethod
    def from_csv(path, capped: bool = True) -> "Profile":
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return Profile(data[:, 0], data[:, 1], capped=capped)


@dataclass(frozen=True)
class CurvatureField:
    """Pointwise curvatures on the profile's interior grid (tips excluded)."""

    z: np.ndarray
    k_orb: np.ndarray
    k_rad: np.ndarray
    R: np.ndarray = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "R", 2.0 * self.k_orb + 4.0 * self.k_rad)


def curvatures(profile: Profile) -> CurvatureField:
    """Sectional and scalar curvature at the interior grid points.

    K_orb = (1 - F_z^2)/F^2 and K_rad = -F_zz/F from centered second-order
    differences; R = 2 K_orb + 4 K_rad holds exactly by construction.
    """
    z, f = profile.z_grid, profile.f_values
    if z.size < 5:
        raise InvalidProfileError("too few interior points for curvature")
    # differentiate on the full grid first, so that after dropping the tip
    # rows (F = 0 there) every reported point carries a centered stencil
    fz = gradient(z, f)
    fzz = second_derivative(z, f)
    if profile.capped:
        z, f, fz, fzz = z[1:-1], f[1:-1], fz[1:-1], fzz[1:-1]
    k_orb = (1.0 - fz**2) / f**2
    k_rad = -fzz / f
    return CurvatureField(z, k_orb, k_rad)


def tip_scalar_curvature(profile: Profile, side: str) -> float:
    """Scalar curvature at a tip from the local model F(s) = s + a3*s^3.

    s is arclength from the tip; both sectional curvatures there equal -6*a3,
    so R_tip = -36*a3. The cubic coefficient is a least-squares fit over a
    window of min(16 points, 5% of the half-domain).
    """
    if not profile.capped:
        raise InvalidProfileError("tips exist only on capped profiles")
    a3, resid = tip_cubic_coefficient(profile.z_grid, profile.f_values, side)
    if resid > 0.05 * profile.r_max:
        raise TipNotResolvedError(f"cubic tip fit residual {resid:.3e} too large")
    return -36.0 * a3


def tip_window_size(s: np.ndarray, half: float) -> int:
    """Rows in the tip-fit window: min(16, rows within 5% of the half-domain),
    widened to 16 rows when the fraction holds fewer than 8. ``s`` is the
    increasing distance-from-tip array with s[0] = 0."""
    n_win = min(16, int(np.searchsorted(s, 0.05 * half)))
    if n_win < 8:
        n_win = min(16, s.size)
    return n_win


def tip_cubic_coefficient(z: np.ndarray, f: np.ndarray, side: str) -> tuple[float, float]:
    """Least-squares a3 of the tip model F(s) = s + a3*s^3 on raw arrays.

    Returns (a3, max residual) over the window of tip_window_size. Raises
    when even the widened window has fewer than 8 points.
    """
    if side == "left":
        s = z - z[0]
    elif side == "right":
        s = (z[-1] - z)[::-1]
        f = f[::-1]
    else:
        raise ValueError("side must be 'left' or 'right'")
    half = 0.5 * (z[-1] - z[0])
    n_win = tip_window_size(s, half)
    if n_win < 8:
        raise TipNotResolvedError("fewer than 8 grid points in the tip window")
    sw, fw = s[1:n_win], f[1:n_win]
    a3 = float(np.dot(sw**3, fw - sw) / np.dot(sw**3, sw**3))
    resid = float(np.max(np.abs(fw - sw - a3 * sw**3)))
    return a3, resid


def neck_quality(profile: Profile, z0: float, window: float) -> float:
    """Scaled C^2 distance of the profile from an exact cylinder around z0.

    Returns sup over |z - z0| <= window of |F/F(z0) - 1| + |F_z| + F(z0)*|F_zz|;
    zero iff the profile is exactly cylindrical there. Scale-free: invariant
    under (z, F) -> (lambda*z, lambda*F) with window scaled accordingly.
    """
    z, f = profile.z_grid, profile.f_values
    if z0 - window < z[0] or z0 + window > z[-1]:
        raise InvalidProfileError("neck window exits the profile domain")
    mask = np.abs(z - z0) <= window
    idx = np.nonzero(mask)[0]
    lo, hi = max(idx[0] - 2, 0), min(idx[-1] + 3, z.size)
    zw, fw = z[lo:hi], f[lo:hi]
    if np.any(fw <= 0):
        raise InvalidProfileError("radius vanishes inside the neck window")
    f0 = float(fd_weights(zw[np.argsort(np.abs(zw - z0))[:4]], z0, 0) @
               fw[np.argsort(np.abs(zw - z0))[:4]])
    fz = gradient(zw, fw)
    fzz = second_derivative(zw, fw)
    inwin = np.abs(zw - z0) <= window
    vals = np.abs(fw / f0 - 1.0) + np.abs(fz) + f0 * np.abs(fzz)
    return float(np.max(vals[inwin]))
