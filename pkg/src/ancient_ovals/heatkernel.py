"""Dirichlet heat kernel on [-1,1] and the caloric second-derivative bound.

The kernel is the method-of-images sum

    K_t(x,y) = (4 pi t)^{-1/2} [ sum_k e^{-(x-y+4k)^2/4t}
                               - sum_k e^{-(x+y+4k-2)^2/4t} ],

which vanishes at y = +-1 and is positive inside.  Truncating the sums at
|k| <= image_cutoff(t, tol) keeps the omitted Gaussian tail below tol, so
every evaluation here is certifiably accurate.  Derivatives are taken term
by term (each image is a Gaussian, so the differentiated sums truncate by
the same tail bound).

Four estimates of the kernel tie it to the cosine ground mode and to the
short-time boundary flux:

    (a)  K_1(0,y)              >= cos(pi y/2) / C,
    (b)  |d^2/dx^2 K_1(x,y)|_{x=0}|  <= C cos(pi y/2),
    (c)  -+ d/dy K_t(0,y)|_{y=+-1}  >= t^{-3/2} e^{-1/4t} / C,
    (d)  |d^2/dx^2 d/dy K_t|_{x=0,y=+-1}| <= C t^{-7/2} e^{-1/4t},

for t in (0,1].  `kernel_estimate_scan` measures the smallest admissible C
for each by a dense grid scan.  Combining them through the Green's
representation of a nonnegative caloric function h on [-1,1] x [-1,0]
bounds its curvature at the center of the top edge:

    |h_xx(0,0)| <= C mu^{-2} h(0,0) + C e^{-1/8mu} sup_{edges} h

for every mu in (0,1), where the edge sup runs over the lateral boundary.
`second_derivative_bound_check` evaluates both sides, with the constant
assembled from the scanned (a)-(d) the same way the inequality chain
composes them.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, NamedTuple, Sequence

import numpy as np
from scipy.integrate import quad

DEFAULT_TOL = 1e-14
T_MAX = 4.0
# int_0^inf t^{-7/2} e^{-1/(8t)} dt, the tail factor of the short-time cut
FLUX_TAIL_INTEGRAL = math.gamma(2.5) * 8.0**2.5


@dataclass(frozen=True)
class KernelConfig:
    """Image-sum truncation: tail below `tolerance` for the requested times."""

    image_cutoff: int
    tolerance: float = DEFAULT_TOL

    def __post_init__(self):
        if self.image_cutoff < 1:
            raise ValueError("need at least one image on each side")
        if not 0.0 < self.tolerance < 1.0:
            raise ValueError("tolerance must lie in (0,1)")


def config_for(t: float, tol: float = DEFAULT_TOL) -> KernelConfig:
    """Cutoff from the Gaussian tail bound: ceil(sqrt(t ln(1/tol))/2) + 2."""
    if not 0.0 < t <= T_MAX:
        raise ValueError(f"need 0 < t <= {T_MAX}")
    k = math.ceil(math.sqrt(t * math.log(1.0 / tol)) / 2.0) + 2
    return KernelConfig(k, tol)


def _check_point(x, y, t):
    if not 0.0 < t <= T_MAX:
        raise ValueError(f"need 0 < t <= {T_MAX}")
    if np.any(np.abs(x) > 1.0) or np.any(np.abs(y) > 1.0):
        raise ValueError("kernel arguments must lie in [-1,1]")


def kernel(x, y, t: float, config: KernelConfig | None = None) -> np.ndarray | float:
    """K_t(x,y); x and y broadcast, t is a scalar."""
    _check_point(x, y, t)
    cfg = config or config_for(t)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    acc = np.zeros(np.broadcast_shapes(x.shape, y.shape))
    for k in range(-cfg.image_cutoff, cfg.image_cutoff + 1):
        acc = acc + np.exp(-((x - y + 4.0 * k) ** 2) / (4.0 * t))
        acc = acc - np.exp(-((x + y + 4.0 * k - 2.0) ** 2) / (4.0 * t))
    out = acc / math.sqrt(4.0 * math.pi * t)
    return float(out) if out.ndim == 0 else out


def boundary_flux(x, t: float, side: int,
                  config: KernelConfig | None = None) -> np.ndarray | float:
    """dK_t/dy at y = side (+1 or -1).

    Both image families coincide on the boundary, so the flux is a single
    sum: dK/dy|_{y=s} = (4 pi t)^{-1/2} sum_k (c_k/t) e^{-c_k^2/4t} with
    c_k = x - s + 4k.  It is negative at s=+1 and positive at s=-1 (heat
    flows out), matching -dK/dy|_{y=1} >= t^{-3/2} e^{-1/4t} / C.
    """
    if side not in (1, -1):
        raise ValueError("side must be +1 or -1")
    _check_point(x, side, t)
    cfg = config or config_for(t)
    x = np.asarray(x, dtype=float)
    acc = np.zeros(x.shape)
    for k in range(-cfg.image_cutoff, cfg.image_cutoff + 1):
        c = x - side + 4.0 * k
        acc = acc + (c / t) * np.exp(-(c**2) / (4.0 * t))
    out = acc / math.sqrt(4.0 * math.pi * t)
    return float(out) if out.ndim == 0 else out


def _kernel_dxx(x, y, t: float, config: KernelConfig | None = None):
    """d^2K/dx^2, term-by-term (each image contributes (c^2/4t^2 - 1/2t) e^{-c^2/4t})."""
    _check_point(x, y, t)
    cfg = config or config_for(t)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    acc = np.zeros(np.broadcast_shapes(x.shape, y.shape))
    for k in range(-cfg.image_cutoff, cfg.image_cutoff + 1):
        a = x - y + 4.0 * k
        b = x + y + 4.0 * k - 2.0
        acc = acc + (a**2 / (4.0 * t**2) - 1.0 / (2.0 * t)) * np.exp(-(a**2) / (4.0 * t))
        acc = acc - (b**2 / (4.0 * t**2) - 1.0 / (2.0 * t)) * np.exp(-(b**2) / (4.0 * t))
    out = acc / math.sqrt(4.0 * math.pi * t)
    return float(out) if out.ndim == 0 else out


def _flux_dxx(x, t: float, side: int, config: KernelConfig | None = None):
    """d^2/dx^2 of the boundary flux: sum of (c^3/8t^3 - 3c/4t^2) e^{-c^2/4t}, doubled."""
    if side not in (1, -1):
        raise ValueError("side must be +1 or -1")
    _check_point(x, side, t)
    cfg = config or config_for(t)
    x = np.asarray(x, dtype=float)
    acc = np.zeros(x.shape)
    for k in range(-cfg.image_cutoff, cfg.image_cutoff + 1):
        c = x - side + 4.0 * k
        acc = acc + 2.0 * (c**3 / (8.0 * t**3) - 3.0 * c / (4.0 * t**2)) \
            * np.exp(-(c**2) / (4.0 * t))
    out = acc / math.sqrt(4.0 * math.pi * t)
    return float(out) if out.ndim == 0 else out


class EstimateScan(NamedTuple):
    """Smallest constants making the four kernel estimates hold on the scan grid."""

    kernel_lower: float     # K_1(0,y) vs cos(pi y/2), from below
    dxx_upper: float        # |K_xx(0,y)| at t=1 vs cos(pi y/2), from above
    flux_lower: float       # boundary flux vs t^{-3/2} e^{-1/4t}, from below
    flux_dxx_upper: float   # |flux_xx| vs t^{-7/2} e^{-1/4t}, from above
    rows: tuple

    @property
    def overall(self) -> float:
        return max(self.kernel_lower, self.dxx_upper,
                   self.flux_lower, self.flux_dxx_upper)


def kernel_estimate_scan(y_step: float = 1e-3,
                         t_grid: np.ndarray | None = None) -> EstimateScan:
    """Scan the four estimates over y in (-1,1) and t in (0,1].

    Returns the smallest admissible constant for each, together with the raw
    ratio rows (item, coordinate, ratio) for CSV export.  All four must come
    out finite and positive; the scan raises if a sign condition fails.
    """
    y = np.arange(-1.0 + y_step, 1.0 - 0.5 * y_step, y_step)
    if t_grid is None:
        t_grid = np.geomspace(0.005, 1.0, 400)
    cos_y = np.cos(0.5 * math.pi * y)
    rows = []

    k1 = kernel(0.0, y, 1.0)
    if np.any(k1 <= 0.0):
        raise ArithmeticError("kernel not positive on the scan grid")
    ratio_low = cos_y / k1
    rows += [("kernel_lower", float(yy), float(r)) for yy, r in zip(y, ratio_low)]
    c_low = float(np.max(ratio_low))

    kxx = _kernel_dxx(0.0, y, 1.0)
    ratio_dxx = np.abs(kxx) / cos_y
    rows += [("dxx_upper", float(yy), float(r)) for yy, r in zip(y, ratio_dxx)]
    c_dxx = float(np.max(ratio_dxx))

    ratios_flux = []
    ratios_fdxx = []
    for t in t_grid:
        envelope = t ** (-1.5) * math.exp(-1.0 / (4.0 * t))
        flux_out = min(-boundary_flux(0.0, t, 1), boundary_flux(0.0, t, -1))
        if flux_out <= 0.0:
            raise ArithmeticError("boundary flux has the wrong sign on the scan grid")
        ratios_flux.append(envelope / flux_out)
        rows.append(("flux_lower", float(t), ratios_flux[-1]))
        fdxx = max(abs(_flux_dxx(0.0, t, 1)), abs(_flux_dxx(0.0, t, -1)))
        ratios_fdxx.append(fdxx / (t ** (-3.5) * math.exp(-1.0 / (4.0 * t))))
        rows.append(("flux_dxx_upper", float(t), ratios_fdxx[-1]))
    c_flux = float(np.max(ratios_flux))
    c_fdxx = float(np.max(ratios_fdxx))

    return EstimateScan(c_low, c_dxx, c_flux, c_fdxx, tuple(rows))


_SCAN_CACHE: EstimateScan | None = None


def _default_scan() -> EstimateScan:
    global _SCAN_CACHE
    if _SCAN_CACHE is None:
        _SCAN_CACHE = kernel_estimate_scan()
    return _SCAN_CACHE


class RepresentationResult(NamedTuple):
    value: float              # h(x, 0)
    second_derivative: float  # h_xx(0, 0)


def representation_solve(initial: Callable[[float], float],
                         boundary_right: Callable[[float], float],
                         boundary_left: Callable[[float], float],
                         x: float = 0.0) -> RepresentationResult:
    """Evaluate a caloric function at the top of the rectangle from its data.

    For h with h_t = h_xx on [-1,1] x [-1,0], initial data h(y,-1) and
    lateral data h(+-1, s) for s in [-1,0],

        h(x,0) = int_{-1}^1 K_1(x,y) h(y,-1) dy
                 - int_0^1 h(1,-t)  dK_t/dy|_{y=1}  dt
                 + int_0^1 h(-1,-t) dK_t/dy|_{y=-1} dt,

    and h_xx(0,0) is the same formula with the kernels differentiated twice
    in x.  The time integrals are evaluated after substituting u = 1/t,
    which turns the essential e^{-1/4t} endpoint into plain exponential
    decay.  Mismatched corner data gets a warning but still evaluates.
    """
    if not -1.0 < x < 1.0:
        raise ValueError("evaluation point must be interior")
    for corner, a, b in [("right", initial(1.0), boundary_right(-1.0)),
                         ("left", initial(-1.0), boundary_left(-1.0))]:
        if abs(a - b) > 1e-8 * max(1.0, abs(a), abs(b)):
            warnings.warn(f"initial and {corner} boundary data disagree at the corner",
                          stacklevel=2)

    opts = dict(epsabs=1e-12, epsrel=1e-11, limit=200)
    value = quad(lambda yy: kernel(x, yy, 1.0) * initial(yy), -1.0, 1.0, **opts)[0]
    hxx = quad(lambda yy: _kernel_dxx(0.0, yy, 1.0) * initial(yy), -1.0, 1.0, **opts)[0]

    for side, data in ((1, boundary_right), (-1, boundary_left)):
        sign = -float(side)  # -(flux at y=+1) and +(flux at y=-1)

        def _time_term(u, deriv):
            t = 1.0 / u
            fl = _flux_dxx(0.0, t, side) if deriv else boundary_flux(x, t, side)
            return data(-t) * fl / u**2

        value += sign * quad(_time_term, 1.0, np.inf, args=(False,), **opts)[0]
        hxx += sign * quad(_time_term, 1.0, np.inf, args=(True,), **opts)[0]
    return RepresentationResult(float(value), float(hxx))


class BoundCheck(NamedTuple):
    mu: float
    lhs: float
    rhs: float
    passed: bool


def second_derivative_bound_check(initial: Callable[[float], float],
                                  boundary_right: Callable[[float], float],
                                  boundary_left: Callable[[float], float],
                                  mu: float,
                                  scan: EstimateScan | None = None) -> BoundCheck:
    """Check |h_xx(0,0)| <= C mu^{-2} h(0,0) + C e^{-1/8mu} sup_edges h.

    The constant composes the scanned estimates exactly as the inequality
    chain does: the initial integral costs kernel_lower * dxx_upper, the
    long-time flux piece costs flux_lower * flux_dxx_upper * mu^{-2}, and
    the short-time piece costs flux_dxx_upper times the universal tail
    integral of t^{-7/2} e^{-1/8t}.  Negative data is a precondition error
    (the bound only holds for nonnegative caloric functions).
    """
    if not 0.0 < mu < 1.0:
        raise ValueError("mu must lie in (0,1)")
    ys = np.linspace(-1.0, 1.0, 401)
    ts = np.linspace(-1.0, 0.0, 401)
    samples = ([initial(float(v)) for v in ys]
               + [boundary_right(float(v)) for v in ts]
               + [boundary_left(float(v)) for v in ts])
    if min(samples) < -1e-12:
        raise ValueError("data must be nonnegative")
    sup_edges = max(max(samples[401:]), 0.0)

    scan = scan or _default_scan()
    c = max(scan.kernel_lower * scan.dxx_upper + scan.flux_lower * scan.flux_dxx_upper,
            FLUX_TAIL_INTEGRAL * scan.flux_dxx_upper)
    rep = representation_solve(initial, boundary_right, boundary_left, x=0.0)
    lhs = abs(rep.second_derivative)
    rhs = c * mu**-2 * rep.value + c * math.exp(-1.0 / (8.0 * mu)) * sup_edges
    return BoundCheck(mu, lhs, rhs, bool(lhs <= rhs * (1.0 + 1e-9) + 1e-12))


def write_scan_rows(scan: EstimateScan, path) -> None:
    import csv

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["item", "t_or_y", "ratio"])
        for item, coord, ratio in scan.rows:
            writer.writerow([item, repr(float(coord)), repr(float(ratio))])


def write_bound_checks(checks: Sequence[BoundCheck], path) -> None:
    import csv

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["mu", "lhs", "rhs", "pass"])
        for c in checks:
            writer.writerow([repr(float(c.mu)), repr(float(c.lhs)),
                             repr(float(c.rhs)), str(bool(c.passed)).lower()])
