"""End-to-end acceptance criteria, one test per criterion (A1 - A10).

Each test asserts the full criterion, so the pytest -v PASSED/FAILED line
for test_aNN_* is the pass/fail verdict for that criterion. The slow
criteria (A2 - A5, A9) train presets at their calibrated budgets and check
their own wall-clock allowances; everything else runs in seconds.
"""

import time

import numpy as np
import pytest

from wavepinn import autodiff as ad
from wavepinn import kernels, network as nn, oracle, presets, reference, sampler, trainer
from wavepinn.config import build_problem
from wavepinn.errors import TotalInternalReflectionError


def _rel_l2(a, b):
    return np.linalg.norm(a - b) / np.linalg.norm(b)


def _train_preset(preset_id, budget=None, audit_every=0):
    cfg = presets.materialize(preset_id)
    problem = build_problem(cfg)
    t0 = time.monotonic()
    report = trainer.train(problem, budget=budget, audit_every=audit_every)
    return cfg, problem, report, time.monotonic() - t0


def _normalized_mse(cfg, problem):
    """Model vs the finite-difference reference, peak-normalized MSE over
    the valid-cell mask (PEC interiors and singular source balls excluded)."""
    ref = reference.reference_field(cfg, "fd2d")
    model = reference.model_field(problem.assembly, ref)
    mask = reference.comparison_mask(cfg, ref)
    return oracle.compare_fields(model, ref, mask=mask), model, mask


# -- A1: autodiff vs central finite differences -------------------------------


def _random_small_net(rng):
    dim = int(rng.integers(1, 4))
    widths = tuple(int(rng.integers(4, 8)) for _ in range(int(rng.integers(1, 3))))
    cfg = nn.NetworkConfig(
        input_dim=dim,
        hidden_widths=widths,
        omega0=float(rng.uniform(1.0, 4.0)),
        num_kernels=int(rng.integers(1, 3)),
    )
    return nn.init_network(cfg, seed=int(rng.integers(0, 2**31)))


def _taped_loss(net, pts):
    """Scalar touching value, gradient and Laplacian channels of every head."""
    tape = ad.Tape()
    outs = nn.forward(net, tape, ad.lift_points(tape, pts))
    scalars = []
    for a_re, a_im, logit in outs:
        r = ad.arr_add(ad.laplacian(a_re), ad.jet_value(a_im))
        scalars.append(ad.mean(ad.arr_square(r)))
        scalars.append(ad.mean(ad.arr_square(ad.jet_value(logit))))
    return ad.scalar_combine(scalars, [1.0] * len(scalars)), tape


def test_a01_autodiff_matches_central_differences():
    rng = np.random.default_rng(20260826)
    t0 = time.monotonic()
    h_grad, h_lap, h_par = 1e-5, 1e-4, 1e-5
    for _ in range(50):
        net = _random_small_net(rng)
        dim = net.config.input_dim
        pts = rng.uniform(-1.0, 1.0, size=(3, dim))

        def value(p):
            tape = ad.Tape()
            outs = nn.forward(net, tape, ad.lift_points(tape, p), detach=True)
            return outs[0][0].val[:, 0]

        tape = ad.Tape()
        a_re = nn.forward(net, tape, ad.lift_points(tape, pts))[0][0]
        grad_fd = np.empty((pts.shape[0], dim))
        lap_fd = np.zeros(pts.shape[0])
        for ax in range(dim):
            e = np.zeros(dim)
            e[ax] = 1.0
            up, dn = value(pts + h_grad * e), value(pts - h_grad * e)
            grad_fd[:, ax] = (up - dn) / (2.0 * h_grad)
            up, dn = value(pts + h_lap * e), value(pts - h_lap * e)
            lap_fd += (up - 2.0 * value(pts) + dn) / h_lap**2
        assert _rel_l2(a_re.grad[:, :, 0], grad_fd) < 1e-5
        assert _rel_l2(a_re.hess[:, :, 0].sum(axis=1), lap_fd) < 1e-5

        loss, tape = _taped_loss(net, pts)
        grads = tape.backward(loss)
        g_ad = np.concatenate([np.asarray(grads[p]).ravel() for p in tape.params])
        flat = nn.get_flat_parameters(net)
        g_fd = np.empty_like(flat)
        for i in range(flat.size):
            for sign in (1.0, -1.0):
                bumped = flat.copy()
                bumped[i] += sign * h_par
                nn.set_flat_parameters(net, bumped)
                if sign > 0:
                    up = _taped_loss(net, pts)[0].val
                else:
                    dn = _taped_loss(net, pts)[0].val
            g_fd[i] = (up - dn) / (2.0 * h_par)
        nn.set_flat_parameters(net, flat)
        assert _rel_l2(g_ad, g_fd) < 1e-4
    assert time.monotonic() - t0 < 10.0


# -- A2: 1D free space ---------------------------------------------------------


def test_a02_free_space_1d_matches_plane_wave():
    cfg, problem, report, elapsed = _train_preset("freespace1d_desk", budget=20000)
    assert report.iterations <= 20000
    x = np.linspace(cfg.domain_lo[0], cfg.domain_hi[0], 1001)[:, None]
    model = problem.assembly.total_values(x)
    exact = oracle.analytic_plane(problem.assembly.k0, [1.0], x)
    assert _rel_l2(model, exact) < 1e-2
    assert elapsed < 300.0


# -- A3: carrier decomposition vs identity-kernel ablation ----------------------


def test_a03_carrier_beats_identity_kernel_ablation():
    cfg_pe, prob_pe, rep_pe, t_pe = _train_preset("scenario1_desk")
    assert rep_pe.iterations <= 50000
    mse, _, _ = _normalized_mse(cfg_pe, prob_pe)
    # identity-kernel ablation: same seed and geometry, budget matched to the
    # iterations the carrier run actually consumed
    _, _, rep_vanilla, t_v = _train_preset("vanilla_ablation", budget=rep_pe.iterations)
    assert rep_pe.final.pde < 1e-1
    assert rep_vanilla.final.pde >= 5.0 * rep_pe.final.pde
    assert mse < 2e-2
    assert t_pe + t_v < 45 * 60.0


# -- A4: reflection off a PEC block ---------------------------------------------


def test_a04_reflection_preset_pec_and_field_accuracy():
    cfg, problem, report, elapsed = _train_preset("scenario6_desk")
    mse, model, mask = _normalized_mse(cfg, problem)
    peak = float(np.abs(model.values[mask]).max())
    e_pec = problem.assembly.total_values(problem.pec_points)
    pec_rms = float(np.sqrt(np.mean(np.abs(e_pec) ** 2)))
    assert pec_rms < 1e-2 * peak
    assert mse < 3e-2
    assert elapsed < 45 * 60.0


# -- A5: refraction across a dielectric interface --------------------------------


def test_a05_refraction_preset_interface_and_field_accuracy():
    from wavepinn.field import AssemblyEvaluator

    cfg, problem, report, elapsed = _train_preset("scenario9_desk")
    mse, model, mask = _normalized_mse(cfg, problem)
    peak = float(np.abs(model.values[mask]).max())

    asm = problem.assembly
    pts, nrm = problem.iface_points, problem.iface_normals
    delta = 1e-6 * asm.min_wavelength()
    tape = ad.Tape()
    evaluator = AssemblyEvaluator(asm, tape, bind=False)
    vals, derivs = [], []
    for sign in (1.0, -1.0):
        p = pts + sign * delta * nrm
        idx = asm.route_non_pec(p)
        e = np.zeros(p.shape[0], dtype=complex)
        dn = np.zeros(p.shape[0], dtype=complex)
        for i in range(len(asm.subdomains)):
            m = idx == i
            if not m.any():
                continue
            jets = ad.lift_points(tape, p[m])
            re, im = evaluator.subdomain_field(i, jets)
            e[m] = re.val[:, 0] + 1j * im.val[:, 0]
            g = re.grad[:, :, 0] + 1j * im.grad[:, :, 0]
            dn[m] = np.sum(g * nrm[m], axis=1)
        vals.append(e)
        derivs.append(dn)
    value_jump = float(np.sqrt(np.mean(np.abs(vals[0] - vals[1]) ** 2)))
    # the natural scale of a field derivative is peak * k
    deriv_jump = float(np.sqrt(np.mean(np.abs(derivs[0] - derivs[1]) ** 2)))
    assert value_jump < 1e-2 * peak
    assert deriv_jump < 1e-2 * peak * asm.k0
    assert mse < 3e-2
    assert elapsed < 60 * 60.0


# -- A6: kernel geometry ---------------------------------------------------------


def test_a06_snell_mirror_geometry():
    rng = np.random.default_rng(606)
    eps = np.finfo(float).eps
    for _ in range(100_000):
        dim = int(rng.integers(2, 4))
        n = rng.normal(size=dim)
        n /= np.linalg.norm(n)
        point = rng.uniform(-5.0, 5.0, dim)
        n1, n2 = rng.uniform(1.0, 3.0, 2)
        d_i = rng.normal(size=dim)
        d_i /= np.linalg.norm(d_i)
        if d_i @ n > 0:
            d_i = d_i - 2.0 * (d_i @ n) * n
        if abs(d_i @ n) < 1e-9:
            continue
        iface = kernels.InterfacePlane(point=tuple(point), normal=tuple(n), n1=n1, n2=n2)
        # radicand computed exactly as the transmitted-direction formula does
        d_perp = float(d_i @ n)
        d_par = d_i - d_perp * n
        eta = n1 / n2
        radicand = 1.0 - eta**2 * float(d_par @ d_par)
        if radicand < 0:
            with pytest.raises(TotalInternalReflectionError):
                kernels.snell_transmitted_direction(d_i, iface)
        else:
            d_t = kernels.snell_transmitted_direction(d_i, iface)
            assert abs(np.linalg.norm(d_t) - 1.0) <= 1e-12
            t_par = d_t - float(d_t @ n) * n
            assert np.linalg.norm(n1 * d_par - n2 * t_par) <= 1e-12

        # mirror involution: exact up to the roundoff of its four flops
        p = rng.uniform(-5.0, 5.0, dim)
        back = kernels.mirror_point(kernels.mirror_point(p, point, n), point, n)
        scale = max(1.0, np.abs(p).max(), np.abs(point).max())
        assert np.abs(back - p).max() <= 32.0 * eps * scale


# -- A7: residual-adaptive refinement invariants ---------------------------------


def _rows_sorted(a):
    return a[np.lexsort(a.T[::-1])]


def test_a07_rar_invariants_hold_over_randomized_calls():
    rng = np.random.default_rng(707)
    violations = 0
    for _ in range(1000):
        dim = int(rng.integers(1, 4))
        lo = rng.uniform(-2.0, 0.0, dim)
        hi = lo + rng.uniform(0.5, 2.0, dim)
        domain = sampler.DomainSampler(lo, hi)
        n_base = int(rng.integers(4, 32))
        capacity = n_base + int(rng.integers(1, 40))
        sset = sampler.init_samples(
            domain, n_base, seed=int(rng.integers(2**31)), capacity=capacity
        )
        coef = rng.normal(size=dim)
        freq = float(rng.uniform(1.0, 5.0))

        def residual_fn(p, coef=coef, freq=freq):
            return np.abs(np.sin(freq * (p @ coef))) + 0.01

        base_before = sset.base.copy()
        for _ in range(int(rng.integers(1, 4))):
            pool_size = int(rng.integers(4, 50))
            top_k = int(rng.integers(1, pool_size + 1))
            captured = []

            def observed(p):
                r = residual_fn(p)
                captured.append((p.copy(), r.copy()))
                return r

            old_adaptive = sset.adaptive.copy()
            sset = sampler.rar_refine(sset, observed, pool_size, top_k, domain)

            ok = len(sset) <= sset.capacity
            ok &= np.array_equal(sset.base, base_before)
            # sort oracle: kept adaptive points are the highest-residual
            # rows of (old adaptive + top-k of the candidate pool)
            pool, res = captured[0]
            order = np.argsort(res)[::-1][: min(top_k, res.size)]
            merged = np.concatenate([old_adaptive, pool[order]])
            merged_res = np.concatenate([residual_fn(old_adaptive), res[order]])
            room = sset.capacity - sset.base.shape[0]
            if merged.shape[0] > room:
                keep = np.argsort(merged_res)[::-1][:room]
                merged = merged[keep]
            ok &= np.array_equal(_rows_sorted(merged), _rows_sorted(sset.adaptive))
            violations += 0 if ok else 1
    assert violations == 0


# -- A8: adaptive loss weighting ---------------------------------------------------


def test_a08_weight_balancing_invariant_and_ema_closed_form():
    rng = np.random.default_rng(808)
    state = trainer.AdaptiveWeightState()
    for _ in range(200):
        norms = {name: float(rng.uniform(100.0, 1000.0)) for name in ("src", "pde", "bc")}
        weights = state.update(norms)
        prods = np.array([weights[n] * state.gbar[n] for n in norms])
        assert (prods.max() - prods.min()) / prods.max() < 1e-9

    # dyadic script: alpha = 0.5 and integer norms keep every intermediate
    # exactly representable, so the closed form must match bitwise
    state = trainer.AdaptiveWeightState(alpha=0.5)
    script = [
        {"a": float(rng.integers(1, 1000)), "b": float(rng.integers(1, 1000))}
        for _ in range(25)
    ]
    for t, norms in enumerate(script, start=1):
        state.update(norms)
        for name in norms:
            closed = 0.5 ** (t - 1) * script[0][name]
            closed += sum(0.5 ** (t - s) * 0.5 * script[s - 1][name] for s in range(2, t + 1))
            assert state.gbar[name] == closed


# -- A9: sub-network gradient detachment ---------------------------------------------


def test_a09_detachment_audited_for_100_steps():
    cfg = presets.materialize("scenario6_desk")
    problem = build_problem(cfg)
    tr = trainer.Trainer(problem)
    norms = tr.audit_detachment()
    assert norms == (0.0, 0.0)
    # run() re-audits every step and raises unless both cross-gradient
    # norms are exactly zero, so completing 100 steps is the criterion
    report = tr.run(budget=100, audit_every=1)
    assert report.iterations == 100


# -- A10: oracle self-validation -------------------------------------------------------


def test_a10_oracle_self_validation():
    k = 2.0 * np.pi

    x = np.linspace(0.0, 10.0, 201)
    fd = oracle.fd_solve_1d(x, np.full(x.size, k), left_value=1.0)
    exact = oracle.analytic_plane(k, [1.0], x[:, None])
    assert _rel_l2(fd.values, exact) < 1e-3

    x = np.linspace(0.0, 10.0, 2001)
    karr = np.where(x < 5.0, k, 2.0 * k)
    fd = oracle.fd_solve_1d(x, karr, left_value=1.0)
    t_num = oracle.transmission_from_profile(
        fd.values[(x > 1.0) & (x < 4.0)], fd.values[x > 6.0]
    )
    assert abs(t_num - 2.0 * k / (k + 2.0 * k)) < 1e-3

    # Wronskian J0 Y0' - J0' Y0 = 2/(pi x); derivatives by an 8th-order
    # stencil so its truncation error stays far below the 1e-9 target
    xs = np.linspace(0.5, 50.0, 4000)
    coeff = np.array([3.0, -32.0, 168.0, -672.0, 0.0, 672.0, -168.0, 32.0, -3.0]) / 840.0
    h = 8e-3

    def deriv(f, x):
        return sum(c * f(x + (i - 4) * h) for i, c in enumerate(coeff)) / h

    wron = oracle.bessel_j0(xs) * deriv(oracle.bessel_y0, xs)
    wron -= deriv(oracle.bessel_j0, xs) * oracle.bessel_y0(xs)
    assert np.abs(wron * (np.pi * xs / 2.0) - 1.0).max() < 1e-9

    errs = []
    for n in (41, 81):
        grid = oracle.make_grid((-1.0, -1.0), (1.0, 1.0), (n, n))
        exact2 = oracle.analytic_plane(k, [1.0, 0.0], grid.points()).reshape(n, n)
        bmask = np.zeros((n, n), bool)
        bmask[0, :] = bmask[-1, :] = bmask[:, 0] = bmask[:, -1] = True
        sol = oracle.fd_solve_2d(
            grid,
            np.full((n, n), k),
            dirichlet_mask=bmask,
            dirichlet_values=np.where(bmask, exact2, 0.0),
        )
        errs.append(_rel_l2(sol.values, exact2))
    assert 3.5 < errs[0] / errs[1] < 4.5
