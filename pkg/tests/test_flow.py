import numpy as np
import pytest

from ancient_ovals.flow import (
    FlowState,
    HISTORY_HEADER,
    SingularProfileError,
    StepControl,
    StiffnessError,
    evolve,
    material_velocity,
    regrid,
    rhs,
    rmax_derivative_check,
    step,
    write_history,
)
from ancient_ovals.geometry import Profile


def _sphere_exact(r0, t0, t):
    # shrinking round profile: r(t)^2 = r0^2 - 4(t - t0)
    return np.sqrt(r0 * r0 - 4.0 * (t - t0))


# ------------------------------------------------------------------ rhs forms

def test_rhs_cylinder_exact():
    # constant profile of radius r contracts at exactly -1/r on every node
    p = Profile.cylinder(3.0, 10.0, 201)
    assert np.max(np.abs(rhs(p) + 1.0 / 3.0)) < 1e-12


def test_rhs_sphere_closed_form():
    # r cos(z/r) moving by rdot = -2/r: F_t = rdot (cos(z/r) + (z/r) sin(z/r)).
    # Interior nodes are plain second-order stencils; the few rows inside each
    # tip-fit window lean on the local cubic model and sit near 1e-4.
    r, n = 20.0, 401
    p = Profile.sphere(r, n)
    z = p.z_grid
    exact = (-2.0 / r) * (np.cos(z / r) + (z / r) * np.sin(z / r))
    err = np.abs(rhs(p) - exact)
    assert np.max(err) < 5e-4
    interior = np.abs(z) <= 0.8 * (r * np.pi / 2)
    assert np.max(err[interior]) < 5e-6


def test_rhs_even_profile_gives_even_rhs():
    p = Profile.sphere(5.0, 301)
    v = rhs(p)
    assert np.max(np.abs(v - v[::-1])) < 1e-11


def test_rhs_two_forms_agree():
    # quadrature identity between the raw and integrated-by-parts forms;
    # trapezoid truncation dominates, so a fine grid is needed to see 1e-8
    z = np.linspace(-np.pi, np.pi, 20001)
    f = 2.0 - 0.3 * np.cosh(z / 2.0)
    p = Profile(z, f, capped=False)
    assert np.max(np.abs(rhs(p, "raw") - rhs(p, "parts"))) < 1e-8


def test_rhs_parts_rejects_vanishing_profile():
    with pytest.raises(SingularProfileError):
        rhs(Profile.sphere(5.0, 101), "parts")


def test_rhs_rejects_interior_zero():
    z = np.linspace(-2.0, 2.0, 81)
    p = Profile(z, np.minimum(0.9 * np.abs(z - 1.5), 1.2), capped=False)
    with pytest.raises(SingularProfileError):
        rhs(p)


def test_rhs_invalid_form():
    with pytest.raises(ValueError):
        rhs(Profile.cylinder(1.0, 2.0, 21), "spectral")


def test_rhs_requires_anchor_node():
    z = np.linspace(1.0, 3.0, 21)
    p = Profile(z, np.full(21, 2.0), capped=False)
    with pytest.raises(ValueError):
        rhs(p)


# --------------------------------------------------------- material velocity

def test_material_velocity_cylinder_is_zero():
    p = Profile.cylinder(2.0, 8.0, 101)
    assert material_velocity(p, 3.7) == pytest.approx(0.0, abs=1e-15)


def test_material_velocity_sphere():
    # uniform shrinking: z(t) scales with r(t), so zdot = z * rdot/r = -2z/r^2
    r = 20.0
    p = Profile.sphere(r, 4001)
    for zq in (r * np.pi / 4, r * np.pi / 2):
        assert material_velocity(p, zq) == pytest.approx(-2.0 * zq / r**2,
                                                         rel=1e-6)
    assert material_velocity(p, 0.0) == pytest.approx(0.0, abs=1e-12)


def test_material_velocity_outside_domain():
    p = Profile.cylinder(2.0, 8.0, 101)
    with pytest.raises(ValueError):
        material_velocity(p, 9.0)


def test_material_velocity_blocked_by_interior_zero():
    # the defining integral runs from the reference point; a zero on the way
    # makes it meaningless, while the near side stays computable
    z = np.linspace(-2.0, 2.0, 81)
    p = Profile(z, np.minimum(0.9 * np.abs(z - 1.5), 1.2), capped=False)
    assert np.isfinite(material_velocity(p, 1.0))
    with pytest.raises(SingularProfileError):
        material_velocity(p, 1.9)


# ------------------------------------------------------------- exact solutions

def test_cylinder_short_horizon_tracks_exact():
    st = FlowState(Profile.cylinder(np.sqrt(200.0), 25.0, 201), -100.0)
    fin, _ = evolve(st, StepControl(dt_max=0.05), -90.0)
    assert np.max(np.abs(fin.profile.f_values / np.sqrt(180.0) - 1.0)) < 1e-9
    vals, flags = rmax_derivative_check(fin.history)
    assert np.max(np.abs(vals - 1.0)) < 1e-9
    assert flags.size == 0


def test_sphere_conservation_short():
    st = FlowState(Profile.sphere(20.0, 201), -100.0)
    fin, _ = evolve(st, StepControl(dt_max=1.0), -95.0)
    dev = max(abs(r.r_max**2 + 4.0 * r.t) for r in fin.history)
    assert dev / 400.0 < 1e-4
    vals, flags = rmax_derivative_check(fin.history)
    assert np.max(np.abs(vals - 2.0)) < 1e-4
    assert flags.size == 0
    assert not fin.warnings


def test_sphere_spatial_convergence_order():
    errs = []
    for n in (101, 201, 401):
        st = FlowState(Profile.sphere(20.0, n), -100.0)
        fin, _ = evolve(st, StepControl(dt_max=1.0), -95.0)
        p = fin.profile
        exact = _sphere_exact(20.0, -100.0, fin.t) * np.cos(
            p.z_grid / _sphere_exact(20.0, -100.0, fin.t))
        errs.append(np.max(np.abs(p.f_values - exact)) / p.r_max)
    # measured 3.9e-5 / 1.0e-5 / 2.6e-6
    assert errs[0] < 1e-4
    assert errs[2] < 5e-6
    assert np.log2(errs[0] / errs[1]) > 1.9
    assert np.log2(errs[1] / errs[2]) > 1.9


def test_history_tip_fields_track_sphere():
    st = FlowState(Profile.sphere(20.0, 401), -100.0)
    fin, _ = evolve(st, StepControl(dt_max=1.0), -95.0)
    rec = fin.history[-1]
    r = _sphere_exact(20.0, -100.0, rec.t)
    assert rec.r_max == pytest.approx(r, rel=1e-6)
    assert rec.d_tip_left == pytest.approx(r * np.pi / 2, rel=1e-5)
    assert rec.d_tip_right == pytest.approx(r * np.pi / 2, rel=1e-5)
    assert rec.R_tip_left == pytest.approx(6.0 / r**2, rel=5e-3)
    assert rec.R_tip_right == pytest.approx(6.0 / r**2, rel=5e-3)
    ts = np.array([h.t for h in fin.history])
    assert np.all(np.diff(ts) > 0)


def test_step_preserves_anchor_and_caps():
    st = step(FlowState(Profile.sphere(5.0, 201), -10.0), StepControl(dt_max=1.0))
    p = st.profile
    assert p.f_values[0] == 0.0 and p.f_values[-1] == 0.0
    assert np.any(p.z_grid == 0.0)
    assert p.z_grid[-1] < 5.0 * np.pi / 2  # material nodes follow the shrink


# ----------------------------------------------------------- stepping control

def test_step_honors_dt_max():
    st = FlowState(Profile.cylinder(3.0, 10.0, 101), -10.0)
    out = step(st, StepControl(dt_max=1e-12))
    assert out.t == pytest.approx(-10.0 + 1e-12, abs=1e-15)


def test_step_refuses_nonnegative_time():
    st = FlowState(Profile.cylinder(3.0, 10.0, 101), -1e-13)
    with pytest.raises(ValueError):
        step(st, StepControl(dt_max=1.0))


def test_zigzag_profile_raises_stiffness():
    # sawtooth at amplitude comparable to the profile height cannot be stepped
    # stably at any of the retried sizes
    z = np.linspace(-0.05, 0.05, 11)
    f = 5e-4 + 2e-4 * (-1.0) ** np.arange(11)
    st = FlowState(Profile(z, f, capped=False), -1.0)
    with pytest.raises(StiffnessError):
        step(st, StepControl(dt_max=10.0))


def test_convex_profile_records_warning():
    z = np.linspace(-2.0, 2.0, 41)
    p = Profile(z, 2.0 + 0.3 * np.cosh(z / 2.0), capped=False)
    st = step(FlowState(p, -10.0), StepControl(dt_max=1e-5))
    assert len(st.warnings) == 1
    assert "concavity" in st.warnings[0]


def test_control_and_state_validation():
    with pytest.raises(ValueError):
        StepControl(dt_max=0.0)
    with pytest.raises(ValueError):
        StepControl(dt_max=1.0, cfl_safety=1.5)
    with pytest.raises(ValueError):
        StepControl(dt_max=1.0, regrid_threshold=1.0)
    with pytest.raises(ValueError):
        FlowState(Profile.cylinder(3.0, 10.0, 101), 1.0)
    z = np.linspace(1.0, 3.0, 21)
    with pytest.raises(ValueError):
        FlowState(Profile(z, np.full(21, 2.0), capped=False), -1.0)


# --------------------------------------------------------------------- evolve

def test_evolve_snapshots_land_exactly():
    st = FlowState(Profile.cylinder(3.0, 10.0, 101), -10.0)
    fin, snaps = evolve(st, StepControl(dt_max=0.01), -9.9,
                        snapshot_times=[-10.0, -9.95, -9.9])
    assert [s[0] for s in snaps] == [-10.0, -9.95, -9.9]
    assert all(isinstance(s[1], Profile) for s in snaps)
    assert fin.t == -9.9


def test_evolve_validates_arguments():
    st = FlowState(Profile.cylinder(3.0, 10.0, 101), -10.0)
    ctl = StepControl(dt_max=0.01)
    with pytest.raises(ValueError):
        evolve(st, ctl, -11.0)  # backward
    with pytest.raises(ValueError):
        evolve(st, ctl, 0.0)  # must stay ancient
    with pytest.raises(ValueError):
        evolve(st, ctl, -9.9, snapshot_times=[-20.0])


def test_rmax_derivative_check_needs_three_records():
    st = FlowState(Profile.cylinder(3.0, 10.0, 101), -10.0)
    with pytest.raises(ValueError):
        rmax_derivative_check(st.history)


def test_write_history_roundtrip(tmp_path):
    st = FlowState(Profile.cylinder(3.0, 10.0, 101), -10.0)
    fin, _ = evolve(st, StepControl(dt_max=0.01), -9.95)
    path = tmp_path / "hist.csv"
    write_history(fin.history, path)
    with open(path) as fh:
        assert fh.readline().strip() == HISTORY_HEADER
    arr = np.loadtxt(path, delimiter=",", skiprows=1)
    rec = fin.history[3]
    assert arr[3, 0] == rec.t and arr[3, 1] == rec.r_max


# --------------------------------------------------------------------- regrid

def test_regrid_sphere_mesh_quality():
    p = regrid(Profile.sphere(20.0, 401))
    z, f = p.z_grid, p.f_values
    h = np.diff(z)
    assert z.size == 401
    assert z[0] == -10.0 * np.pi and z[-1] == 10.0 * np.pi
    assert np.any(z == 0.0)
    assert f[0] == 0.0 and f[-1] == 0.0
    # grading packs tip cells four times tighter than the neck
    assert 0.24 < h[0] / np.max(h) < 0.26
    assert np.max(np.abs(f - 20.0 * np.cos(z / 20.0))) < 2e-4


def test_regrid_custom_size_and_uncapped():
    assert regrid(Profile.sphere(20.0, 401), 301).z_grid.size == 301
    p = regrid(Profile.cylinder(3.0, 10.0, 101))
    assert np.max(np.abs(p.f_values - 3.0)) < 1e-13
    assert np.max(np.abs(np.diff(p.z_grid) - 0.2)) < 1e-13


def test_step_triggers_regrid_on_distorted_mesh():
    # cubic-clustered nodes on a round profile: spacing varies ~100x, far past
    # any sane distortion budget, so the first step must rebuild the mesh
    u = np.linspace(-1.0, 1.0, 201)
    z = np.pi * u**3
    z[np.argmin(np.abs(z))] = 0.0
    base = Profile.sphere(2.0, 201)
    f = np.clip(base.interp(z), 0.0, None)
    f[0] = f[-1] = 0.0
    st = FlowState(Profile(z, f, capped=True), -100.0, mesh_ref=1.0)
    out = step(st, StepControl(dt_max=1.0))
    assert out.n_regrids == 1
    assert out.mesh_ref != 1.0
    assert np.any(out.profile.z_grid == 0.0)


def test_distorted_sphere_recovers_conservation():
    # same torture mesh evolved through the rebuild keeps d(r^2)/dt = -4
    u = np.linspace(-1.0, 1.0, 201)
    z = np.pi * u**3
    z[np.argmin(np.abs(z))] = 0.0
    base = Profile.sphere(2.0, 201)
    f = np.clip(base.interp(z), 0.0, None)
    f[0] = f[-1] = 0.0
    st = FlowState(Profile(z, f, capped=True), -100.0, mesh_ref=1.0)
    fin, _ = evolve(st, StepControl(dt_max=1.0), -99.9)
    r2 = fin.profile.r_max ** 2
    assert r2 + 4.0 * fin.t == pytest.approx(4.0 - 400.0, abs=2e-4)
    assert fin.n_regrids >= 1
