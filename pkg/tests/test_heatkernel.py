"""Tests for the interval heat kernel and the caloric curvature bound.

Oracles: the kernel's boundary zeros and x<->y symmetry are structural; the
semigroup identity is checked against adaptive-quadrature composition; the
representation formula is checked against closed-form caloric functions
(heat polynomials and separated eigenmodes, tests/_caloric.py).
"""

import math

import numpy as np
import pytest
from scipy.integrate import quad

from _caloric import draw_nonnegative_caloric
from ancient_ovals import heatkernel as hk


# -- kernel values ---------------------------------------------------------


def test_kernel_vanishes_on_the_boundary():
    xs = np.linspace(-1.0, 1.0, 41)
    for t in (0.01, 0.1, 1.0, 4.0):
        assert np.max(np.abs(hk.kernel(xs, 1.0, t))) <= 1e-12
        assert np.max(np.abs(hk.kernel(xs, -1.0, t))) <= 1e-12


def test_kernel_symmetric_in_x_and_y():
    pts = [(-0.7, 0.2), (0.3, 0.9), (0.0, -0.5), (0.99, -0.99)]
    for t in (0.05, 1.0, 4.0):
        for x, y in pts:
            assert abs(hk.kernel(x, y, t) - hk.kernel(y, x, t)) <= 1e-13


def test_kernel_positive_inside():
    ys = np.linspace(-0.999, 0.999, 301)
    for t in (0.01, 0.5, 1.0, 4.0):
        assert np.min(hk.kernel(0.0, ys, t)) > 0.0
        assert np.min(hk.kernel(0.73, ys, t)) > 0.0


def test_kernel_mass_dirichlet_loss():
    masses = []
    for t in (0.005, 0.1, 0.5, 1.0, 4.0):
        m = quad(lambda y: hk.kernel(0.0, y, t), -1.0, 1.0,
                 epsabs=1e-12, limit=200)[0]
        assert 0.0 < m <= 1.0 + 1e-9
        masses.append(m)
    assert masses[0] >= 1.0 - 1e-9          # no loss has reached the center yet
    assert all(a >= b for a, b in zip(masses, masses[1:]))  # mass only leaks out


def test_kernel_semigroup_property():
    cases = [(0.0, 0.0, 0.5, 0.5), (0.3, -0.4, 0.7, 1.1), (0.9, 0.2, 0.2, 0.1)]
    for x, y, t, s in cases:
        comp = quad(lambda w: hk.kernel(x, w, t) * hk.kernel(w, y, s),
                    -1.0, 1.0, epsabs=1e-13, limit=300)[0]
        assert abs(comp - hk.kernel(x, y, t + s)) <= 1e-8


def test_kernel_domain_validation():
    with pytest.raises(ValueError):
        hk.kernel(0.0, 0.0, 0.0)
    with pytest.raises(ValueError):
        hk.kernel(0.0, 0.0, -1.0)
    with pytest.raises(ValueError):
        hk.kernel(0.0, 0.0, 5.0)
    with pytest.raises(ValueError):
        hk.kernel(1.5, 0.0, 1.0)


def test_config_respects_tail_bound():
    cfg = hk.config_for(1.0)
    assert cfg.image_cutoff >= 1
    # adding more images must not change the value beyond the tolerance
    rich = hk.KernelConfig(cfg.image_cutoff + 4, cfg.tolerance)
    for (x, y, t) in [(0.0, 0.0, 1.0), (0.9, -0.8, 1.0)]:
        assert abs(hk.kernel(x, y, t, cfg) - hk.kernel(x, y, t, rich)) <= cfg.tolerance
    with pytest.raises(ValueError):
        hk.KernelConfig(0)


# -- boundary flux ---------------------------------------------------------


def test_flux_signs_heat_flows_out():
    for t in (0.01, 0.1, 1.0):
        assert -hk.boundary_flux(0.0, t, 1) > 0.0
        assert hk.boundary_flux(0.0, t, -1) > 0.0


def test_flux_tracks_short_time_envelope():
    ts = np.geomspace(0.01, 1.0, 120)
    ratios = [(-hk.boundary_flux(0.0, float(t), 1))
              / (t**-1.5 * math.exp(-1.0 / (4.0 * t))) for t in ts]
    assert min(ratios) >= 0.1
    assert max(ratios) <= 10.0


def test_flux_antisymmetric_at_center():
    for t in (0.02, 0.3, 1.0):
        out_r = -hk.boundary_flux(0.0, t, 1)
        out_l = hk.boundary_flux(0.0, t, -1)
        assert abs(out_r - out_l) <= 1e-13 * max(out_r, 1e-300)


def test_flux_is_kernel_derivative():
    # finite-difference cross-check of the analytic term-by-term derivative
    eps = 1e-6
    for t in (0.3, 1.0):
        for x in (-0.4, 0.0, 0.6):
            fd = (hk.kernel(x, 1.0, t) - hk.kernel(x, 1.0 - eps, t)) / eps
            assert hk.boundary_flux(x, t, 1) == pytest.approx(fd, rel=1e-5, abs=1e-9)


def test_flux_side_validation():
    with pytest.raises(ValueError):
        hk.boundary_flux(0.0, 1.0, 0)


# -- estimate scan -----------------------------------------------------------


@pytest.fixture(scope="module")
def scan():
    return hk.kernel_estimate_scan()


def test_scan_constants_finite_and_modest(scan):
    for c in (scan.kernel_lower, scan.dxx_upper, scan.flux_lower, scan.flux_dxx_upper):
        assert np.isfinite(c)
        assert 0.0 < c <= 1e3
    assert scan.overall == max(scan.kernel_lower, scan.dxx_upper,
                               scan.flux_lower, scan.flux_dxx_upper)


def test_scan_kernel_lower_bound_holds(scan):
    y = np.linspace(-0.999, 0.999, 999)
    lhs = hk.kernel(0.0, y, 1.0)
    assert np.all(lhs >= np.cos(0.5 * math.pi * y) / scan.kernel_lower - 1e-15)


def test_scan_dxx_vanishes_at_the_boundary_like_cosine(scan):
    # the y -> +-1 zeros of K_xx keep the ratio to cos(pi y/2) bounded
    rows = [(c, r) for item, c, r in scan.rows if item == "dxx_upper"]
    edge = [r for c, r in rows if abs(c) > 0.995]
    assert max(edge) <= scan.dxx_upper + 1e-12
    assert np.isfinite(max(edge))


def test_scan_rows_cover_all_items(scan):
    items = {row[0] for row in scan.rows}
    assert items == {"kernel_lower", "dxx_upper", "flux_lower", "flux_dxx_upper"}


def test_scan_csv_export(scan, tmp_path):
    path = tmp_path / "scan.csv"
    hk.write_scan_rows(scan, path)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "item,t_or_y,ratio"
    assert len(lines) == 1 + len(scan.rows)


# -- representation formula --------------------------------------------------


def test_representation_reproduces_constants():
    r = hk.representation_solve(lambda y: 1.0, lambda t: 1.0, lambda t: 1.0)
    assert r.value == pytest.approx(1.0, abs=1e-8)
    assert r.second_derivative == pytest.approx(0.0, abs=1e-8)


def test_representation_caloric_polynomial():
    def init(y):
        return y * y + 0.0 - 2.0 + 2.0  # h(y,-1) for h = x^2 + 2t + 2

    def lateral(t):
        return 1.0 + 2.0 * t + 2.0

    r = hk.representation_solve(init, lateral, lateral)
    assert r.value == pytest.approx(2.0, abs=1e-6)
    assert r.second_derivative == pytest.approx(2.0, abs=1e-6)
    off = hk.representation_solve(init, lateral, lateral, x=0.5)
    assert off.value == pytest.approx(2.25, abs=1e-6)


def test_representation_separated_modes():
    # pure initial-data reproduction: the lateral data of the modes vanish
    r = hk.representation_solve(
        lambda y: math.exp(math.pi**2 / 4.0) * math.cos(math.pi * y / 2.0),
        lambda t: 0.0, lambda t: 0.0)
    assert r.value == pytest.approx(1.0, abs=1e-8)
    assert r.second_derivative == pytest.approx(-math.pi**2 / 4.0, abs=1e-8)
    r = hk.representation_solve(lambda y: math.sin(math.pi * y),
                                lambda t: 0.0, lambda t: 0.0, x=0.3)
    assert r.value == pytest.approx(math.exp(-math.pi**2) * math.sin(0.3 * math.pi),
                                    abs=1e-8)


def test_representation_warns_on_corner_mismatch():
    with pytest.warns(UserWarning):
        r = hk.representation_solve(lambda y: 1.0, lambda t: 2.0, lambda t: 1.0)
    assert np.isfinite(r.value)


def test_representation_needs_interior_point():
    with pytest.raises(ValueError):
        hk.representation_solve(lambda y: 1.0, lambda t: 1.0, lambda t: 1.0, x=1.0)


def test_conservation_identity():
    # d/dt int K_t(x,y) h(y,-t) dy equals the two lateral flux terms
    x = 0.3

    def h(y, t):
        return y * y + 2.0 * t + 2.0

    def i_of(t):
        return quad(lambda y: hk.kernel(x, y, t) * h(y, -t), -1.0, 1.0,
                    epsabs=1e-12, limit=200)[0]

    for t in (0.25, 0.5, 1.0):
        d = 1e-4
        lhs = (i_of(t + d) - i_of(t - d)) / (2.0 * d)
        rhs = (h(1.0, -t) * hk.boundary_flux(x, t, 1)
               - h(-1.0, -t) * hk.boundary_flux(x, t, -1))
        assert lhs == pytest.approx(rhs, abs=1e-6)


# -- curvature bound ---------------------------------------------------------


def test_bound_trivial_for_constants():
    for mu in (0.05, 0.1, 0.3, 0.9):
        chk = hk.second_derivative_bound_check(lambda y: 1.0, lambda t: 1.0,
                                               lambda t: 1.0, mu)
        assert chk.passed
        assert chk.lhs == pytest.approx(0.0, abs=1e-8)
        assert chk.rhs > 0.0


def test_bound_for_caloric_polynomial():
    def init(y):
        return y * y  # h(y,-1) for h = x^2 + 2t + 2

    def lateral(t):
        return 1.0 + 2.0 * t + 2.0

    chk = hk.second_derivative_bound_check(init, lateral, lateral, mu=0.1)
    assert chk.passed
    assert chk.lhs == pytest.approx(2.0, abs=1e-6)
    assert chk.rhs >= chk.lhs


def test_bound_on_random_nonnegative_caloric_family():
    rng = np.random.default_rng(17)
    for _ in range(5):
        h, h00, hxx = draw_nonnegative_caloric(rng)
        rep = hk.representation_solve(lambda y: h(y, -1.0),
                                      lambda t: h(1.0, t), lambda t: h(-1.0, t))
        assert rep.value == pytest.approx(h00, abs=1e-8)
        assert rep.second_derivative == pytest.approx(hxx, abs=1e-6)
        for mu in (0.05, 0.3):
            chk = hk.second_derivative_bound_check(
                lambda y: h(y, -1.0), lambda t: h(1.0, t), lambda t: h(-1.0, t), mu)
            assert chk.passed


def test_bound_rejects_negative_data():
    with pytest.raises(ValueError):
        hk.second_derivative_bound_check(lambda y: -1.0, lambda t: 1.0,
                                         lambda t: 1.0, 0.1)


def test_bound_mu_validation():
    with pytest.raises(ValueError):
        hk.second_derivative_bound_check(lambda y: 1.0, lambda t: 1.0,
                                         lambda t: 1.0, 0.0)
    with pytest.raises(ValueError):
        hk.second_derivative_bound_check(lambda y: 1.0, lambda t: 1.0,
                                         lambda t: 1.0, 1.0)


def test_bound_check_csv(tmp_path):
    checks = [hk.second_derivative_bound_check(lambda y: 1.0, lambda t: 1.0,
                                               lambda t: 1.0, mu)
              for mu in (0.1, 0.3)]
    path = tmp_path / "bounds.csv"
    hk.write_bound_checks(checks, path)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "mu,lhs,rhs,pass"
    assert len(lines) == 3
    assert all(line.endswith("true") for line in lines[1:])
