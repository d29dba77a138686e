"""Loss terms: PDE residual, source matching, boundary and interface penalties."""

import numpy as np
import pytest

from wavepinn import autodiff as ad
from wavepinn import field as fd
from wavepinn import network as nn
from wavepinn import physics as ph
from wavepinn.errors import ConfigurationError, DivergenceError, UsageError
from wavepinn.kernels import KernelSpec

K0 = 2.0 * np.pi


def constant_envelope_net(input_dim, values=(1.0, 0.0, 20.0)):
    cfg = nn.NetworkConfig(input_dim=input_dim, hidden_widths=(8, 8))
    net = nn.init_network(cfg, seed=0)
    net.layers = [(np.zeros_like(w), np.zeros_like(b)) for w, b in net.layers]
    net.heads = [(np.zeros_like(w), np.asarray(values, dtype=float)) for w, _ in net.heads]
    return net


def plane_wave_assembly(direction=(1.0, 0.0), role="incident", lo=(-1.0, -1.0), hi=(1.0, 1.0)):
    net = constant_envelope_net(len(direction))
    r = fd.NetworkRole(net, role, [KernelSpec("plane", direction=direction)])
    sd = fd.Subdomain(fd.Region(lo, hi), fd.MaterialSpec(), networks=[r])
    return fd.FieldAssembly([sd], k0=K0, clamp_gates=True)


def interior_points(n=9):
    xs = np.linspace(-0.9, 0.9, n)
    xx, yy = np.meshgrid(xs, xs, indexing="ij")
    return np.stack([xx.ravel(), yy.ravel()], axis=1)


# ------------------------------------------------------------ pde residual


def test_helmholtz_residual_of_linear_envelope_is_4k2():
    # E = x exp(-j k x): laplacian(E) + k^2 E = -2 j k exp(-j k x), so the
    # mean squared residual is exactly 4 k^2 regardless of the points
    tape = ad.Tape()
    pts = np.linspace(-1.0, 1.0, 41)[:, None]
    jets = ad.lift_points(tape, pts)
    a = jets  # envelope a(x) = x, width 1
    psi_re, psi_im = ad.cos(ad.scale(jets, K0)), ad.scale(ad.sin(ad.scale(jets, K0)), -1.0)
    e_re = ad.mul(a, psi_re)
    e_im = ad.mul(a, psi_im)
    r_re, r_im = ph.helmholtz_residual(e_re, e_im, K0)
    sq = ad.arr_add(ad.arr_square(r_re), ad.arr_square(r_im))
    assert ad.mean(sq).val == pytest.approx(4.0 * K0 * K0, rel=1e-10)


def test_unit_envelope_plane_carrier_has_zero_pde_loss():
    asm = plane_wave_assembly((0.6, 0.8))
    ev = fd.AssemblyEvaluator(asm, ad.Tape())
    loss = ph.pde_loss(ev, interior_points())
    assert loss.val < 1e-18


def test_pde_loss_uses_material_wavenumber():
    # unit-envelope free-space carrier inside kappa=4: residual is
    # ((2k)^2 - k^2) E, so mean |r|^2 = 9 k^4
    net = constant_envelope_net(2)
    r = fd.NetworkRole(net, "scattered", [KernelSpec("plane", direction=(1.0, 0.0))])
    sd = fd.Subdomain(
        fd.Region((-1.0, -1.0), (1.0, 1.0)), fd.MaterialSpec(kappa=4.0), networks=[r]
    )
    asm = fd.FieldAssembly([sd], k0=K0, clamp_gates=True)
    # wavenumber_ref 0 points at the same subdomain, so the carrier uses 2 k0
    ev = fd.AssemblyEvaluator(asm, ad.Tape())
    loss = ph.pde_loss(ev, interior_points())
    assert loss.val < 1e-16


def test_pde_loss_role_filter_and_validation():
    asm = plane_wave_assembly()
    ev = fd.AssemblyEvaluator(asm, ad.Tape())
    pts = interior_points()
    assert ph.pde_loss(ev, pts, target="inc").val < 1e-18
    # no scattered network anywhere: the restricted loss is an empty sum
    assert ph.pde_loss(ev, pts, target="sct").val == 0.0
    with pytest.raises(UsageError):
        ph.pde_loss(ev, pts, target="both")
    with pytest.raises(UsageError):
        ph.pde_loss(ev, np.array([[5.0, 5.0]]))


def test_pde_residual_values_match_pde_loss_mean():
    net = nn.init_network(nn.NetworkConfig(input_dim=2, hidden_widths=(8, 8)), seed=3)
    r = fd.NetworkRole(net, "scattered", [KernelSpec("plane", direction=(1.0, 0.0))])
    sd = fd.Subdomain(fd.Region((-1.0, -1.0), (1.0, 1.0)), fd.MaterialSpec(), networks=[r])
    asm = fd.FieldAssembly([sd], k0=K0)
    pts = interior_points()
    per_point = ph.pde_residual_values(asm, pts)
    ev = fd.AssemblyEvaluator(asm, ad.Tape())
    loss = ph.pde_loss(ev, pts)
    assert np.all(np.isfinite(per_point))
    assert per_point.mean() == pytest.approx(loss.val, rel=1e-12)


def test_pde_residual_values_nan_outside_and_in_pec():
    net = constant_envelope_net(2)
    r = fd.NetworkRole(net, "scattered", [KernelSpec("identity")])
    sds = [
        fd.Subdomain(fd.Region((-1.0, -1.0), (0.0, 1.0)), fd.MaterialSpec(), [r]),
        fd.Subdomain(
            fd.Region((0.0, -1.0), (1.0, 1.0)), fd.MaterialSpec(is_pec=True, kappa=0.0)
        ),
    ]
    asm = fd.FieldAssembly(sds, k0=K0)
    vals = ph.pde_residual_values(asm, np.array([[-0.5, 0.0], [0.5, 0.0], [3.0, 0.0]]))
    assert np.isfinite(vals[0])
    assert np.isnan(vals[1]) and np.isnan(vals[2])


# ----------------------------------------------------------------- sources


def test_source_spec_validation():
    with pytest.raises(ConfigurationError):
        ph.SourceSpec({"type": "blob"}, {"type": "constant"})
    with pytest.raises(ConfigurationError):
        ph.SourceSpec({"type": "point", "at": (0.0,)}, {"type": "ramp"})
    with pytest.raises(ConfigurationError):
        ph.SourceSpec(
            {"type": "line", "p0": (0.0, -1.0), "p1": (0.0, 1.0)},
            {"type": "gaussian", "width": 0.0},
        )


def test_line_sample_arclength_and_profiles():
    src = ph.SourceSpec(
        {"type": "line", "p0": (0.0, -2.0), "p1": (0.0, 2.0)},
        {"type": "tilted_gaussian", "width": 0.5, "phase_rate": 3.0},
    )
    pts, t = src.sample(5)
    assert np.allclose(pts[:, 1], [-2.0, -1.0, 0.0, 1.0, 2.0])
    assert np.allclose(t, [-2.0, -1.0, 0.0, 1.0, 2.0])
    re, im = src.profile_values(t)
    env = np.exp(-(t**2) / 0.25)
    assert np.allclose(re, env * np.cos(3.0 * t))
    assert np.allclose(im, -env * np.sin(3.0 * t))


def test_circle_and_sphere_samples_lie_on_the_geometry():
    circ = ph.SourceSpec(
        {"type": "circle", "center": (1.0, -1.0), "radius": 0.5}, {"type": "constant"}
    )
    pts, t = circ.sample(16)
    assert np.allclose(np.linalg.norm(pts - [1.0, -1.0], axis=1), 0.5)
    assert t[0] == 0.0 and t[-1] < 2.0 * np.pi * 0.5
    sph = ph.SourceSpec(
        {"type": "sphere", "center": (0.0, 0.0, 0.0), "radius": 2.0}, {"type": "constant"}
    )
    pts, _ = sph.sample(64)
    assert np.allclose(np.linalg.norm(pts, axis=1), 2.0)


def test_source_loss_of_zero_incident_field_is_mean_profile_power():
    # a subdomain without an incident network contributes the zero field, so
    # the loss reduces to the mean squared profile, computable directly
    sd = fd.Subdomain(fd.Region((-2.5, -2.5), (2.5, 2.5)), fd.MaterialSpec())
    asm = fd.FieldAssembly([sd], k0=K0)
    ev = fd.AssemblyEvaluator(asm, ad.Tape())
    src = ph.SourceSpec(
        {"type": "line", "p0": (0.0, -2.5), "p1": (0.0, 2.5)},
        {"type": "gaussian", "width": 0.2},
    )
    n = 1001
    loss = ph.source_loss(ev, src, n)
    t = np.linspace(-2.5, 2.5, n)
    expected = np.mean(np.exp(-2.0 * t**2 / 0.04))
    assert loss.val == pytest.approx(expected, rel=1e-12)


def test_source_loss_zero_when_incident_matches_profile():
    # constant-envelope plane carrier along +x is exactly exp(-j k x), which
    # equals 1 on the line x = 0
    asm = plane_wave_assembly((1.0, 0.0))
    ev = fd.AssemblyEvaluator(asm, ad.Tape())
    src = ph.SourceSpec(
        {"type": "line", "p0": (0.0, -0.9), "p1": (0.0, 0.9)},
        {"type": "constant", "re": 1.0, "im": 0.0},
    )
    assert ph.source_loss(ev, src, 101).val < 1e-24


def test_source_outside_domain_is_a_configuration_error():
    asm = plane_wave_assembly()
    ev = fd.AssemblyEvaluator(asm, ad.Tape())
    src = ph.SourceSpec({"type": "point", "at": (5.0, 0.0)}, {"type": "constant"})
    with pytest.raises(ConfigurationError):
        ph.source_loss(ev, src, 1)


# -------------------------------------------------------------- boundaries


def test_sommerfeld_outgoing_wave_is_residual_free():
    d = np.array([1.0, 0.0])
    asm = plane_wave_assembly(tuple(d))
    ev = fd.AssemblyEvaluator(asm, ad.Tape())
    ys = np.linspace(-0.9, 0.9, 21)
    pts = np.stack([np.ones_like(ys), ys], axis=1)
    normals = np.tile(d, (ys.size, 1))
    assert ph.sommerfeld_loss(ev, pts, normals).val < 1e-18


def test_sommerfeld_incoming_wave_pays_4k2():
    # on the face the carrier enters, d_n E = +j k E, so the residual is
    # 2 j k E with |E| = 1: the loss is exactly 4 k^2
    d = np.array([1.0, 0.0])
    asm = plane_wave_assembly(tuple(d))
    ev = fd.AssemblyEvaluator(asm, ad.Tape())
    ys = np.linspace(-0.9, 0.9, 21)
    pts = np.stack([-np.ones_like(ys), ys], axis=1)
    normals = np.tile(-d, (ys.size, 1))
    loss = ph.sommerfeld_loss(ev, pts, normals)
    assert loss.val == pytest.approx(4.0 * K0 * K0, rel=1e-12)


def test_radiation_sign_flips_the_convention():
    d = np.array([1.0, 0.0])
    asm = plane_wave_assembly(tuple(d))
    ev = fd.AssemblyEvaluator(asm, ad.Tape())
    ys = np.linspace(-0.9, 0.9, 21)
    pts = np.stack([np.ones_like(ys), ys], axis=1)
    normals = np.tile(d, (ys.size, 1))
    loss = ph.sommerfeld_loss(ev, pts, normals, radiation_sign=-1.0)
    assert loss.val == pytest.approx(4.0 * K0 * K0, rel=1e-12)


def test_pec_loss_is_mean_squared_total_field():
    asm = plane_wave_assembly((1.0, 0.0))
    ev = fd.AssemblyEvaluator(asm, ad.Tape())
    ys = np.linspace(-0.9, 0.9, 13)
    pts = np.stack([0.25 * np.ones_like(ys), ys], axis=1)
    # |E| = 1 on any unit-modulus carrier
    assert ph.pec_loss(ev, pts).val == pytest.approx(1.0, rel=1e-12)


def test_interface_loss_vanishes_for_a_continuous_field():
    net = constant_envelope_net(2)
    spec = KernelSpec("plane", direction=(1.0, 0.0))
    sds = [
        fd.Subdomain(
            fd.Region((-1.0, -1.0), (0.0, 1.0)),
            fd.MaterialSpec(),
            [fd.NetworkRole(net, "incident", [spec])],
        ),
        fd.Subdomain(
            fd.Region((0.0, -1.0), (1.0, 1.0)),
            fd.MaterialSpec(),
            [fd.NetworkRole(net, "incident", [spec])],
        ),
    ]
    asm = fd.FieldAssembly(sds, k0=K0, clamp_gates=True)
    ev = fd.AssemblyEvaluator(asm, ad.Tape())
    ys = np.linspace(-0.9, 0.9, 15)
    pts = np.stack([np.zeros_like(ys), ys], axis=1)
    normals = np.tile([1.0, 0.0], (ys.size, 1))
    # the one-sided offsets leave only an O(k delta)^2 phase mismatch
    assert ph.interface_loss(ev, pts, normals).val < 1e-6


def test_interface_loss_detects_a_jump():
    spec = KernelSpec("identity")
    sds = [
        fd.Subdomain(
            fd.Region((-1.0, -1.0), (0.0, 1.0)),
            fd.MaterialSpec(),
            [fd.NetworkRole(constant_envelope_net(2, (1.0, 0.0, 20.0)), "incident", [spec])],
        ),
        fd.Subdomain(
            fd.Region((0.0, -1.0), (1.0, 1.0)),
            fd.MaterialSpec(),
            [fd.NetworkRole(constant_envelope_net(2, (3.0, 0.0, 20.0)), "incident", [spec])],
        ),
    ]
    asm = fd.FieldAssembly(sds, k0=K0, clamp_gates=True)
    ev = fd.AssemblyEvaluator(asm, ad.Tape())
    ys = np.linspace(-0.9, 0.9, 15)
    pts = np.stack([np.zeros_like(ys), ys], axis=1)
    normals = np.tile([1.0, 0.0], (ys.size, 1))
    # value jump of 2, zero derivative jump: loss = 4 exactly
    assert ph.interface_loss(ev, pts, normals).val == pytest.approx(4.0, rel=1e-12)


def test_interface_points_must_straddle_the_domain():
    asm = plane_wave_assembly()
    ev = fd.AssemblyEvaluator(asm, ad.Tape())
    pts = np.array([[1.0, 0.0]])  # outer boundary: the plus side is outside
    normals = np.array([[1.0, 0.0]])
    with pytest.raises(ConfigurationError):
        ph.interface_loss(ev, pts, normals)


# ------------------------------------------------------------- aggregation


def scalar(tape, v):
    return ad.Scalar(tape, v)


def test_assemble_loss_weighted_arithmetic():
    tape = ad.Tape()
    components = {
        "src": scalar(tape, 0.5),
        "pde_inc": scalar(tape, 2.0),
        "pde_sct": scalar(tape, 1.0),
        "bc_abs": scalar(tape, 0.25),
    }
    weights = {"src": 10.0, "pde": 1.0, "bc": 4.0}
    total, br = ph.assemble_loss(tape, components, weights)
    assert total.val == pytest.approx(10.0 * 0.5 + 2.0 + 1.0 + 4.0 * 0.25)
    assert br.pde == pytest.approx(3.0)
    assert br.bc == pytest.approx(0.25)
    assert br.total == pytest.approx(total.val)
    assert br.as_dict()["bc_pec"] == 0.0


def test_assemble_loss_rejects_bad_input():
    tape = ad.Tape()
    with pytest.raises(UsageError):
        ph.assemble_loss(tape, {"pde_inc": scalar(tape, 1.0)}, {"pde": -1.0, "src": 1, "bc": 1})
    with pytest.raises(UsageError):
        ph.assemble_loss(tape, {"energy": scalar(tape, 1.0)}, {"src": 1, "pde": 1, "bc": 1})
    with pytest.raises(DivergenceError):
        ph.assemble_loss(
            tape, {"pde_inc": scalar(tape, float("nan"))}, {"src": 1, "pde": 1, "bc": 1}
        )


def test_grouped_mean_equals_global_mean_across_subdomains():
    # points split across two subdomains must average as one population
    net = nn.init_network(nn.NetworkConfig(input_dim=1, hidden_widths=(8,)), seed=5)
    spec = KernelSpec("identity")
    sds = [
        fd.Subdomain(
            fd.Region((0.0,), (1.0,)),
            fd.MaterialSpec(),
            [fd.NetworkRole(net, "scattered", [spec])],
        ),
        fd.Subdomain(
            fd.Region((1.0,), (2.0,)),
            fd.MaterialSpec(),
            [fd.NetworkRole(net, "scattered", [spec])],
        ),
    ]
    asm = fd.FieldAssembly(sds, k0=K0)
    pts = np.linspace(0.05, 1.95, 24)[:, None]
    ev = fd.AssemblyEvaluator(asm, ad.Tape())
    loss = ph.pde_loss(ev, pts)
    per_point = ph.pde_residual_values(asm, pts)
    assert loss.val == pytest.approx(per_point.mean(), rel=1e-12)


def test_empty_point_set_is_a_usage_error():
    asm = plane_wave_assembly()
    ev = fd.AssemblyEvaluator(asm, ad.Tape())
    with pytest.raises(UsageError):
        ph.sommerfeld_loss(ev, np.empty((0, 2)), np.empty((0, 2)))
