"""Residuals and loss terms: Helmholtz PDE, source, Sommerfeld, PEC, interface.

Sign convention: time dependence e^{+j omega t} with outgoing carriers
e^{-j k r}. The absorbing (first-order Sommerfeld) condition is then
d_n E + j k E = 0, which an outgoing carrier satisfies exactly on a face
whose outward normal matches its direction. radiation_sign = -1 flips to
the opposite convention.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .errors import ConfigurationError, DivergenceError, UsageError
from .field import AssemblyEvaluator

INTERFACE_OFFSET_WAVELENGTHS = 1e-6


@dataclass
class LossBreakdown:
    src: float = 0.0
    pde_inc: float = 0.0
    pde_sct: float = 0.0
    bc_abs: float = 0.0
    bc_pec: float = 0.0
    bc_iface: float = 0.0
    total: float = 0.0

    @property
    def pde(self):
        return self.pde_inc + self.pde_sct

    @property
    def bc(self):
        return self.bc_abs + self.bc_pec + self.bc_iface

    def as_dict(self):
        return {
            "src": self.src,
            "pde_inc": self.pde_inc,
            "pde_sct": self.pde_sct,
            "bc_abs": self.bc_abs,
            "bc_pec": self.bc_pec,
            "bc_iface": self.bc_iface,
            "total": self.total,
        }


@dataclass(frozen=True)
class SourceSpec:
    """Excitation geometry plus a closed-form complex profile over it.

    geometry: {"type": "point"|"line"|"circle"|"sphere", ...}
    profile:  {"type": "constant"|"gaussian"|"tilted_gaussian", ...}
    Profiles over a line are functions of the signed arclength t measured
    from the segment midpoint.
    """

    geometry: dict
    profile: dict

    def __post_init__(self):
        gt = self.geometry.get("type")
        if gt not in ("point", "line", "circle", "sphere"):
            raise ConfigurationError(f"unknown source geometry {gt!r}")
        pt = self.profile.get("type")
        if pt not in ("constant", "gaussian", "tilted_gaussian"):
            raise ConfigurationError(f"unknown source profile {pt!r}")
        if pt in ("gaussian", "tilted_gaussian") and not self.profile.get("width", 0) > 0:
            raise ConfigurationError("gaussian profile width must be positive (finiteness)")

    @property
    def dim(self):
        g = self.geometry
        if g["type"] == "point":
            return len(np.atleast_1d(g["at"]))
        if g["type"] == "line":
            return len(g["p0"])
        return len(g["center"])

    def sample(self, n, rng=None):
        """Deterministic point set on the geometry; returns (points, t).

        t is the profile parameter (arclength for lines, None otherwise).
        """
        g = self.geometry
        if g["type"] == "point":
            pts = np.atleast_2d(np.asarray(g["at"], dtype=float))
            return pts, np.zeros(1)
        if g["type"] == "line":
            p0 = np.asarray(g["p0"], dtype=float)
            p1 = np.asarray(g["p1"], dtype=float)
            u = np.linspace(0.0, 1.0, n)
            pts = p0[None, :] + u[:, None] * (p1 - p0)[None, :]
            t = (u - 0.5) * np.linalg.norm(p1 - p0)
            return pts, t
        if g["type"] == "circle":
            c = np.asarray(g["center"], dtype=float)
            r = float(g["radius"])
            theta = np.linspace(0.0, 2.0 * np.pi, n, endpoint=False)
            pts = c[None, :] + r * np.stack([np.cos(theta), np.sin(theta)], axis=1)
            return pts, r * theta
        # sphere: Fibonacci lattice
        c = np.asarray(g["center"], dtype=float)
        r = float(g["radius"])
        i = np.arange(n) + 0.5
        phi = np.arccos(1.0 - 2.0 * i / n)
        golden = np.pi * (1.0 + np.sqrt(5.0))
        theta = golden * i
        pts = c[None, :] + r * np.stack(
            [np.sin(phi) * np.cos(theta), np.sin(phi) * np.sin(theta), np.cos(phi)], axis=1
        )
        return pts, np.zeros(n)

    def profile_values(self, t):
        """Complex profile (re, im) at parameter values t."""
        p = self.profile
        if p["type"] == "constant":
            re = np.full_like(np.asarray(t, dtype=float), float(p.get("re", 1.0)))
            im = np.full_like(re, float(p.get("im", 0.0)))
            return re, im
        w = float(p["width"])
        t0 = float(p.get("center", 0.0))
        env = np.exp(-((t - t0) ** 2) / w**2)
        if p["type"] == "gaussian":
            return env, np.zeros_like(env)
        rate = float(p["phase_rate"])
        return env * np.cos(rate * t), -env * np.sin(rate * t)


# ---------------------------------------------------------------------------


def helmholtz_residual(e_re: ad.Jet, e_im: ad.Jet, k: float):
    """r = laplacian(E) + k^2 E, separately for real and imaginary channels."""
    k2 = k * k
    r_re = ad.arr_add(ad.laplacian(e_re), ad.arr_scale(ad.jet_value(e_re), k2))
    r_im = ad.arr_add(ad.laplacian(e_im), ad.arr_scale(ad.jet_value(e_im), k2))
    return r_re, r_im


def _grouped_mean(tape, terms):
    """Combine per-group (Arr of squared residuals, n) into one global mean."""
    total = sum(n for _, n in terms)
    if total == 0:
        raise UsageError("empty point set")
    means = [ad.mean(arr) for arr, _ in terms]
    weights = [n / total for _, n in terms]
    return ad.scalar_combine(means, weights)


def pde_loss(evaluator: AssemblyEvaluator, points, target="tot"):
    """Mean squared Helmholtz residual with the local wavenumber k(x).

    target selects which networks the residual is applied to: "inc" and
    "sct" restrict to the corresponding roles, "tot" uses the full
    subdomain assembly.
    """
    if target not in ("inc", "sct", "tot"):
        raise UsageError(f"unknown pde target {target!r}")
    asm = evaluator.assembly
    pts = np.atleast_2d(points)
    idx = asm.route(pts)
    if np.any(idx < 0):
        raise UsageError("pde points must lie inside the domain")
    roles = None if target == "tot" else {"inc": ("incident",), "sct": ("scattered",)}[target]
    terms = []
    for i, sd in enumerate(asm.subdomains):
        mask = idx == i
        if not mask.any():
            continue
        if sd.material.is_pec:
            raise UsageError("pde points must avoid PEC interiors")
        if roles is not None and not any(r.role in roles for r in sd.networks):
            continue
        jets = ad.lift_points(evaluator.tape, pts[mask])
        e_re, e_im = evaluator.subdomain_field(i, jets, roles=roles)
        r_re, r_im = helmholtz_residual(e_re, e_im, asm.wavenumber_of(i))
        sq = ad.arr_add(ad.arr_square(r_re), ad.arr_square(r_im))
        terms.append((sq, int(mask.sum())))
    if not terms:
        return ad.Scalar(evaluator.tape, 0.0)
    return _grouped_mean(evaluator.tape, terms)


def pde_residual_values(assembly, points):
    """Per-point summed squared PDE residual over all networks (no adjoints).

    Used by residual-based refinement; points outside the domain or inside
    PEC regions get NaN (the sampler discards them).
    """
    pts = np.atleast_2d(points)
    out = np.full(pts.shape[0], np.nan)
    idx = assembly.route(pts)
    tape = ad.Tape()
    ev = AssemblyEvaluator(assembly, tape, bind=False)
    for i, sd in enumerate(assembly.subdomains):
        mask = idx == i
        if not mask.any() or sd.material.is_pec:
            continue
        jets = ad.lift_points(tape, pts[mask])
        k = assembly.wavenumber_of(i)
        acc = np.zeros(int(mask.sum()))
        for role in sd.networks:
            e_re, e_im = ev.network_field(role, jets, detach=True)
            r_re, r_im = helmholtz_residual(e_re, e_im, k)
            acc += r_re.val**2 + r_im.val**2
        out[mask] = acc
    return out


def source_loss(evaluator: AssemblyEvaluator, source: SourceSpec, n_src, rng=None):
    """Mean squared complex error between the incident field and the profile."""
    pts, t = source.sample(n_src, rng)
    re_target, im_target = source.profile_values(t)
    if not (np.all(np.isfinite(re_target)) and np.all(np.isfinite(im_target))):
        raise ConfigurationError("source profile must be finite over the geometry")
    asm = evaluator.assembly
    idx = asm.route_non_pec(pts)
    if np.any(idx < 0):
        raise ConfigurationError("source geometry lies outside the domain")
    terms = []
    for i in range(len(asm.subdomains)):
        mask = idx == i
        if not mask.any():
            continue
        jets = ad.lift_points(evaluator.tape, pts[mask])
        e_re, e_im = evaluator.subdomain_field(i, jets, roles=("incident",))
        d_re = ad.arr_sub(ad.jet_value(e_re), re_target[mask])
        d_im = ad.arr_sub(ad.jet_value(e_im), im_target[mask])
        sq = ad.arr_add(ad.arr_square(d_re), ad.arr_square(d_im))
        terms.append((sq, int(mask.sum())))
    return _grouped_mean(evaluator.tape, terms)


def sommerfeld_loss(evaluator: AssemblyEvaluator, points, normals, radiation_sign=1.0):
    """Mean |d_n E + sign * j k E|^2 on exterior boundary points.

    With the default sign (+1, e^{+j omega t} convention) an outgoing
    carrier e^{-j k d.x} leaving through a face of normal d is residual-free.
    """
    asm = evaluator.assembly
    pts = np.atleast_2d(points)
    normals = np.atleast_2d(normals)
    s = float(radiation_sign)
    idx = asm.route_non_pec(pts)
    if np.any(idx < 0):
        raise UsageError("boundary points must lie on the domain")
    terms = []
    for i in range(len(asm.subdomains)):
        mask = idx == i
        if not mask.any():
            continue
        k = asm.wavenumber_of(i)
        jets = ad.lift_points(evaluator.tape, pts[mask])
        e_re, e_im = evaluator.subdomain_field(i, jets, detach_incident=True)
        dn_re = ad.normal_derivative(e_re, normals[mask])
        dn_im = ad.normal_derivative(e_im, normals[mask])
        # j k E = -k E_im + j k E_re
        r_re = ad.arr_add(dn_re, ad.arr_scale(ad.jet_value(e_im), -s * k))
        r_im = ad.arr_add(dn_im, ad.arr_scale(ad.jet_value(e_re), s * k))
        sq = ad.arr_add(ad.arr_square(r_re), ad.arr_square(r_im))
        terms.append((sq, int(mask.sum())))
    return _grouped_mean(evaluator.tape, terms)


def pec_loss(evaluator: AssemblyEvaluator, points):
    """Mean |E_tot|^2 over PEC surface samples (incident detached)."""
    asm = evaluator.assembly
    pts = np.atleast_2d(points)
    idx = asm.route_non_pec(pts)
    if np.any(idx < 0):
        raise UsageError("PEC surface points must lie on the domain")
    terms = []
    for i in range(len(asm.subdomains)):
        mask = idx == i
        if not mask.any():
            continue
        jets = ad.lift_points(evaluator.tape, pts[mask])
        e_re, e_im = evaluator.subdomain_field(i, jets, detach_incident=True)
        sq = ad.arr_add(
            ad.arr_square(ad.jet_value(e_re)), ad.arr_square(ad.jet_value(e_im))
        )
        terms.append((sq, int(mask.sum())))
    return _grouped_mean(evaluator.tape, terms)


def interface_loss(evaluator: AssemblyEvaluator, points, normals):
    """Mean of |E- - E+|^2 + |d_n E- - d_n E+|^2 across a material interface.

    One-sided limits are taken at +-1e-6 * lambda_min offsets along the
    normal (oriented toward the minus/incident side).
    """
    asm = evaluator.assembly
    pts = np.atleast_2d(points)
    normals = np.atleast_2d(normals)
    delta = INTERFACE_OFFSET_WAVELENGTHS * asm.min_wavelength()
    minus_pts = pts + delta * normals
    plus_pts = pts - delta * normals
    idx_m = asm.route_non_pec(minus_pts)
    idx_p = asm.route_non_pec(plus_pts)
    if np.any(idx_m < 0) or np.any(idx_p < 0):
        raise ConfigurationError("interface points fall outside both subdomains")
    terms = []
    for im_ in range(len(asm.subdomains)):
        for ip in range(len(asm.subdomains)):
            mask = (idx_m == im_) & (idx_p == ip)
            if not mask.any():
                continue
            jm = ad.lift_points(evaluator.tape, minus_pts[mask])
            jp = ad.lift_points(evaluator.tape, plus_pts[mask])
            em_re, em_im = evaluator.subdomain_field(im_, jm, detach_incident=True)
            ep_re, ep_im = evaluator.subdomain_field(ip, jp, detach_incident=True)
            n_sub = normals[mask]
            d_re = ad.arr_sub(ad.jet_value(em_re), ad.jet_value(ep_re))
            d_im = ad.arr_sub(ad.jet_value(em_im), ad.jet_value(ep_im))
            dn_re = ad.arr_sub(
                ad.normal_derivative(em_re, n_sub), ad.normal_derivative(ep_re, n_sub)
            )
            dn_im = ad.arr_sub(
                ad.normal_derivative(em_im, n_sub), ad.normal_derivative(ep_im, n_sub)
            )
            sq = ad.arr_add(
                ad.arr_add(ad.arr_square(d_re), ad.arr_square(d_im)),
                ad.arr_add(ad.arr_square(dn_re), ad.arr_square(dn_im)),
            )
            terms.append((sq, int(mask.sum())))
    return _grouped_mean(evaluator.tape, terms)


def assemble_loss(tape, components, weights):
    """Weighted total: lambda_src L_src + lambda_pde L_pde + lambda_bc L_bc.

    components: dict of scalar nodes keyed by LossBreakdown field names
    (missing terms count as zero). Returns (total scalar node, LossBreakdown).
    """
    group = {
        "src": "src",
        "pde_inc": "pde",
        "pde_sct": "pde",
        "bc_abs": "bc",
        "bc_pec": "bc",
        "bc_iface": "bc",
    }
    for name, w in weights.items():
        if w < 0:
            raise UsageError(f"loss weight {name} must be positive")
    nodes, ws = [], []
    values = {}
    for name, node in components.items():
        if name not in group:
            raise UsageError(f"unknown loss component {name!r}")
        if not math.isfinite(node.val):
            raise DivergenceError(f"non-finite loss component {name!r}: {node.val}")
        nodes.append(node)
        ws.append(float(weights[group[name]]))
        values[name] = node.val
    total = ad.scalar_combine(nodes, ws)
    breakdown = LossBreakdown(
        **{k: values.get(k, 0.0) for k in group},
        total=total.val,
    )
    return total, breakdown
