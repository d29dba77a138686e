"""Scenario configuration: strict JSON schema, validation, problem assembly.

load_config parses and validates a scenario file, reporting every schema
violation at once. build_problem turns a validated config into the runtime
objects the trainer consumes (field assembly, sampler, boundary point sets).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field as dc_field

import numpy as np

from . import network as nn
from . import physics
from .errors import GeometryError, ValidationError
from .field import (
    FieldAssembly,
    MaterialSpec,
    NetworkRole,
    Region,
    Subdomain,
    wavenumber_from_frequency,
)
from .kernels import KernelSpec
from .sampler import DomainSampler

_AXES = "xyz"

_TOP_KEYS = {
    "name",
    "description",
    "dimension",
    "domain",
    "frequency",
    "wavenumber",
    "subdomains",
    "sources",
    "boundaries",
    "networks",
    "training",
    "radiation_sign",
    "vanilla_mode",
}
_SUBDOMAIN_KEYS = {"lo", "hi", "kappa", "mu_rel", "is_pec"}
_SOURCE_KEYS = {"geometry", "profile", "exclusion_radius"}
_BOUNDARY_KEYS = {"absorbing_faces", "pec_surfaces", "interfaces"}
_SURFACE_KEYS = {"axis", "value", "lo", "hi", "normal"}
_NETWORK_KEYS = {
    "role",
    "subdomain",
    "widths",
    "omega0",
    "kernels",
    "name",
    "incident_excluded_regions",
}
_KERNEL_KEYS = {"kind", "direction", "center", "wavenumber_ref"}
_TRAINING_KEYS = {
    "iterations",
    "lr",
    "weighting",
    "weights",
    "rar",
    "capacity",
    "n_pde",
    "n_bc",
    "n_src",
    "batch",
    "seed",
    "log_every",
    "checkpoint_every",
    "weight_update_every",
    "ema_alpha",
    "ema_eps",
    "divergence_threshold",
    "early_stop",
}
_RAR_KEYS = {"cadence", "pool", "top_k"}
_WEIGHT_KEYS = {"src", "pde", "bc"}


@dataclass
class ScenarioConfig:
    """Validated scenario description (geometry in meters)."""

    dimension: int
    domain_lo: tuple
    domain_hi: tuple
    k0: float
    subdomains: list  # raw dicts with defaults applied
    sources: list  # physics.SourceSpec
    source_exclusions: list  # (center, radius) sampler exclusions
    absorbing_faces: list  # face ids like "x-"
    pec_surfaces: list  # dicts {axis, value, lo, hi, normal}
    interfaces: list  # same shape
    networks: list  # raw dicts with defaults applied
    training: dict
    radiation_sign: float = 1.0
    vanilla_mode: bool = False
    name: str = ""


def _check_keys(got: dict, allowed: set, where: str, errs: list):
    for key in got:
        if key not in allowed:
            errs.append(f"{where}: unknown key {key!r}")


def _vec(value, dim, where, errs):
    try:
        v = [float(c) for c in value]
    except (TypeError, ValueError):
        errs.append(f"{where}: expected a numeric vector, got {value!r}")
        return None
    if len(v) != dim:
        errs.append(f"{where}: expected {dim} components, got {len(v)}")
        return None
    return tuple(v)


def load_config(path) -> ScenarioConfig:
    with open(path) as fh:
        data = json.load(fh)
    return parse_config(data)


def parse_config(data: dict) -> ScenarioConfig:
    """Validate a scenario dict; raises ValidationError listing every problem."""
    errs = []
    if not isinstance(data, dict):
        raise ValidationError(["top level must be a JSON object"])
    _check_keys(data, _TOP_KEYS, "top level", errs)

    dim = data.get("dimension")
    if dim not in (1, 2, 3):
        errs.append(f"dimension must be 1, 2 or 3, got {dim!r}")
        raise ValidationError(errs)

    dom = data.get("domain")
    lo = hi = None
    if not isinstance(dom, dict) or "lo" not in dom or "hi" not in dom:
        errs.append("domain must be an object with 'lo' and 'hi'")
    else:
        _check_keys(dom, {"lo", "hi"}, "domain", errs)
        lo = _vec(dom["lo"], dim, "domain.lo", errs)
        hi = _vec(dom["hi"], dim, "domain.hi", errs)
        if lo and hi and any(a >= b for a, b in zip(lo, hi)):
            errs.append(f"domain must have lo < hi per axis, got {lo} .. {hi}")

    has_f = "frequency" in data
    has_k = "wavenumber" in data
    k0 = None
    if has_f == has_k:
        errs.append("exactly one of 'frequency' or 'wavenumber' is required")
    elif has_f:
        if data["frequency"] <= 0:
            errs.append("frequency must be positive")
        else:
            k0 = wavenumber_from_frequency(float(data["frequency"]))
    else:
        if data["wavenumber"] <= 0:
            errs.append("wavenumber must be positive")
        else:
            k0 = float(data["wavenumber"])

    subs = data.get("subdomains")
    sub_cfgs = []
    if not isinstance(subs, list) or not subs:
        errs.append("subdomains must be a non-empty list")
        subs = []
    for i, sd in enumerate(subs):
        where = f"subdomains[{i}]"
        if not isinstance(sd, dict):
            errs.append(f"{where}: expected an object")
            continue
        _check_keys(sd, _SUBDOMAIN_KEYS, where, errs)
        slo = _vec(sd.get("lo", ()), dim, f"{where}.lo", errs)
        shi = _vec(sd.get("hi", ()), dim, f"{where}.hi", errs)
        cfg = {
            "lo": slo,
            "hi": shi,
            "kappa": float(sd.get("kappa", 1.0)),
            "mu_rel": float(sd.get("mu_rel", 1.0)),
            "is_pec": bool(sd.get("is_pec", False)),
        }
        if not cfg["is_pec"] and cfg["kappa"] < 1.0:
            errs.append(f"{where}: kappa must be >= 1 for dielectric regions")
        sub_cfgs.append(cfg)

    # overlap detection is a geometry error, reported separately after schema
    overlap = None
    regions = []
    for cfg in sub_cfgs:
        if cfg["lo"] and cfg["hi"] and all(a < b for a, b in zip(cfg["lo"], cfg["hi"])):
            regions.append(Region(cfg["lo"], cfg["hi"]))
        else:
            regions.append(None)
    for i in range(len(regions)):
        for j in range(i + 1, len(regions)):
            if regions[i] and regions[j] and regions[i].overlaps(regions[j]):
                overlap = (i, j)

    sources = []
    exclusions = []
    for i, src in enumerate(data.get("sources", [])):
        where = f"sources[{i}]"
        if not isinstance(src, dict):
            errs.append(f"{where}: expected an object")
            continue
        _check_keys(src, _SOURCE_KEYS, where, errs)
        try:
            spec = physics.SourceSpec(
                geometry=src.get("geometry", {}), profile=src.get("profile", {})
            )
        except Exception as exc:  # noqa: BLE001 - reported in the itemized list
            errs.append(f"{where}: {exc}")
            continue
        sources.append(spec)
        g = spec.geometry
        if "exclusion_radius" in src:
            center = g.get("at") or g.get("center") or g.get("p0")
            exclusions.append((tuple(center), float(src["exclusion_radius"])))
        elif g["type"] in ("circle", "sphere"):
            exclusions.append((tuple(g["center"]), 1.25 * float(g["radius"])))

    bnd = data.get("boundaries", {})
    absorbing = []
    pec_surfaces = []
    interfaces = []
    if not isinstance(bnd, dict):
        errs.append("boundaries must be an object")
    else:
        _check_keys(bnd, _BOUNDARY_KEYS, "boundaries", errs)
        faces = bnd.get("absorbing_faces", "all")
        all_faces = [f"{_AXES[a]}{s}" for a in range(dim) for s in "-+"]
        if faces == "all":
            absorbing = all_faces
        elif isinstance(faces, list):
            for f in faces:
                if f not in all_faces:
                    errs.append(f"boundaries.absorbing_faces: unknown face {f!r}")
                else:
                    absorbing.append(f)
        else:
            errs.append("boundaries.absorbing_faces must be 'all' or a list of faces")
        for listname, out in (("pec_surfaces", pec_surfaces), ("interfaces", interfaces)):
            for i, surf in enumerate(bnd.get(listname, [])):
                where = f"boundaries.{listname}[{i}]"
                if not isinstance(surf, dict):
                    errs.append(f"{where}: expected an object")
                    continue
                _check_keys(surf, _SURFACE_KEYS, where, errs)
                axis = surf.get("axis")
                if not isinstance(axis, int) or not 0 <= axis < dim:
                    errs.append(f"{where}: axis must be an int in [0, {dim})")
                    continue
                entry = {
                    "axis": axis,
                    "value": float(surf.get("value", 0.0)),
                    "lo": _vec(surf.get("lo", ()), dim - 1, f"{where}.lo", errs)
                    if dim > 1
                    else (),
                    "hi": _vec(surf.get("hi", ()), dim - 1, f"{where}.hi", errs)
                    if dim > 1
                    else (),
                    "normal": _vec(surf["normal"], dim, f"{where}.normal", errs)
                    if "normal" in surf
                    else None,
                }
                out.append(entry)

    networks = []
    for i, net in enumerate(data.get("networks", [])):
        where = f"networks[{i}]"
        if not isinstance(net, dict):
            errs.append(f"{where}: expected an object")
            continue
        _check_keys(net, _NETWORK_KEYS, where, errs)
        role = net.get("role")
        if role not in ("incident", "scattered"):
            errs.append(f"{where}: role must be 'incident' or 'scattered', got {role!r}")
        raw_idx = net.get("subdomain")
        sd_indices = raw_idx if isinstance(raw_idx, list) else [raw_idx]
        sd_idx = None
        for one in sd_indices:
            if not isinstance(one, int) or not 0 <= one < len(sub_cfgs):
                errs.append(f"{where}: subdomain must index into subdomains")
            elif sub_cfgs[one]["is_pec"]:
                errs.append(f"{where}: networks cannot live in a PEC subdomain")
            elif sd_idx is None:
                sd_idx = one
        widths = net.get("widths", [40, 120, 120, 120])
        kernels = []
        raw_kernels = net.get("kernels", [])
        if not raw_kernels:
            errs.append(f"{where}: at least one kernel is required")
        for j, kern in enumerate(raw_kernels):
            kwhere = f"{where}.kernels[{j}]"
            if not isinstance(kern, dict):
                errs.append(f"{kwhere}: expected an object")
                continue
            _check_keys(kern, _KERNEL_KEYS, kwhere, errs)
            ref = kern.get("wavenumber_ref", sd_idx if sd_idx is not None else 0)
            if not isinstance(ref, int) or not 0 <= ref < len(sub_cfgs):
                errs.append(f"{kwhere}: wavenumber_ref must index into subdomains")
                continue
            if sub_cfgs[ref]["is_pec"]:
                errs.append(f"{kwhere}: wavenumber_ref points at a PEC subdomain")
                continue
            try:
                spec = KernelSpec(
                    kind=kern.get("kind", "plane"),
                    direction=kern.get("direction"),
                    center=kern.get("center"),
                    wavenumber_ref=ref,
                )
            except Exception as exc:  # noqa: BLE001
                errs.append(f"{kwhere}: {exc}")
                continue
            if spec.dim is not None and spec.dim != dim:
                errs.append(f"{kwhere}: kernel geometry is {spec.dim}D in a {dim}D scenario")
                continue
            kernels.append(spec)
        excl = []
        for j, box in enumerate(net.get("incident_excluded_regions", [])):
            bwhere = f"{where}.incident_excluded_regions[{j}]"
            blo = _vec(box.get("lo", ()), dim, f"{bwhere}.lo", errs)
            bhi = _vec(box.get("hi", ()), dim, f"{bwhere}.hi", errs)
            if blo and bhi:
                excl.append({"lo": blo, "hi": bhi})
        networks.append(
            {
                "role": role,
                "subdomains": [i for i in sd_indices if isinstance(i, int)],
                "widths": tuple(int(w) for w in widths),
                "omega0": float(net.get("omega0", 30.0)),
                "kernels": kernels,
                "name": net.get("name", f"net{i}"),
                "incident_excluded_regions": excl,
            }
        )

    tr = data.get("training")
    if not isinstance(tr, dict):
        errs.append("training section is required")
        tr = {}
    _check_keys(tr, _TRAINING_KEYS, "training", errs)
    if "seed" not in tr:
        errs.append("training.seed is required (full determinism)")
    if "iterations" not in tr or int(tr.get("iterations", -1)) < 0:
        errs.append("training.iterations is required and must be >= 0")
    if "n_pde" not in tr or int(tr.get("n_pde", 0)) < 1:
        errs.append("training.n_pde is required and must be >= 1")
    if tr.get("weighting", "fixed") not in ("fixed", "adaptive"):
        errs.append("training.weighting must be 'fixed' or 'adaptive'")
    if "weights" in tr:
        _check_keys(tr["weights"], _WEIGHT_KEYS, "training.weights", errs)
    if "rar" in tr:
        _check_keys(tr["rar"], _RAR_KEYS, "training.rar", errs)
    if "capacity" in tr and "n_pde" in tr and int(tr["capacity"]) < int(tr["n_pde"]):
        errs.append("training.capacity must be >= training.n_pde")

    # PEC surfaces must coincide with a PEC subdomain face
    for i, surf in enumerate(pec_surfaces):
        ok = False
        for cfg in sub_cfgs:
            if not cfg["is_pec"] or not cfg["lo"] or not cfg["hi"]:
                continue
            a = surf["axis"]
            if (
                abs(surf["value"] - cfg["lo"][a]) < 1e-9
                or abs(surf["value"] - cfg["hi"][a]) < 1e-9
            ):
                ok = True
        if not ok:
            errs.append(
                f"boundaries.pec_surfaces[{i}]: surface does not lie on a PEC "
                "subdomain boundary"
            )

    if errs:
        raise ValidationError(errs)
    if overlap is not None:
        raise GeometryError(f"subdomains {overlap[0]} and {overlap[1]} overlap")

    training = dict(tr)
    training.setdefault("capacity", int(training["n_pde"]))
    vanilla = bool(data.get("vanilla_mode", False))
    if vanilla:
        for net in networks:
            net["kernels"] = [KernelSpec(kind="identity")]
    return ScenarioConfig(
        dimension=dim,
        domain_lo=lo,
        domain_hi=hi,
        k0=k0,
        subdomains=sub_cfgs,
        sources=sources,
        source_exclusions=exclusions,
        absorbing_faces=absorbing,
        pec_surfaces=pec_surfaces,
        interfaces=interfaces,
        networks=networks,
        training=training,
        radiation_sign=float(data.get("radiation_sign", 1.0)),
        vanilla_mode=vanilla,
        name=str(data.get("name", "")),
    )


# -- problem construction ------------------------------------------------------


@dataclass
class Problem:
    """Runtime objects for one scenario, ready for the trainer."""

    assembly: FieldAssembly
    domain: DomainSampler
    sources: list
    training: dict
    radiation_sign: float = 1.0
    abs_points: np.ndarray = None
    abs_normals: np.ndarray = None
    pec_points: np.ndarray = None
    pec_normals: np.ndarray = None
    iface_points: np.ndarray = None
    iface_normals: np.ndarray = None
    config: ScenarioConfig = None
    extras: dict = dc_field(default_factory=dict)


def _surface_points(cfg: ScenarioConfig, surf, n):
    """Midpoint samples over an axis-aligned rectangle {axis=value, lo..hi}."""
    dim = cfg.dimension
    a = surf["axis"]
    others = [d for d in range(dim) if d != a]
    if dim == 1:
        pts = np.array([[surf["value"]]])
    elif dim == 2:
        u = (np.arange(n) + 0.5) / n
        coords = surf["lo"][0] + u * (surf["hi"][0] - surf["lo"][0])
        pts = np.zeros((n, 2))
        pts[:, a] = surf["value"]
        pts[:, others[0]] = coords
    else:
        m = max(2, int(np.ceil(np.sqrt(n))))
        u = (np.arange(m) + 0.5) / m
        g0 = surf["lo"][0] + u * (surf["hi"][0] - surf["lo"][0])
        g1 = surf["lo"][1] + u * (surf["hi"][1] - surf["lo"][1])
        gx, gy = np.meshgrid(g0, g1)
        pts = np.zeros((gx.size, 3))
        pts[:, a] = surf["value"]
        pts[:, others[0]] = gx.ravel()
        pts[:, others[1]] = gy.ravel()
    return pts


def _face_points(cfg: ScenarioConfig, face, n, pec_regions):
    dim = cfg.dimension
    axis = _AXES.index(face[0])
    sign = 1.0 if face[1] == "+" else -1.0
    value = cfg.domain_hi[axis] if sign > 0 else cfg.domain_lo[axis]
    others = [d for d in range(dim) if d != axis]
    surf = {
        "axis": axis,
        "value": value,
        "lo": tuple(cfg.domain_lo[d] for d in others),
        "hi": tuple(cfg.domain_hi[d] for d in others),
    }
    pts = _surface_points(cfg, surf, n)
    keep = np.ones(pts.shape[0], dtype=bool)
    for region in pec_regions:
        keep &= ~region.contains(pts, tol=1e-9)
    pts = pts[keep]
    normals = np.zeros_like(pts)
    normals[:, axis] = sign
    return pts, normals


def _default_bc_count(cfg: ScenarioConfig, length, lam):
    n = cfg.training.get("n_bc")
    if n is not None:
        return int(n)
    return max(8, int(np.ceil(4.0 * length / lam)))


def build_problem(cfg: ScenarioConfig) -> Problem:
    """Instantiate networks, assembly, sampler and boundary point sets."""
    subdomains = []
    pec_regions = []
    for sd in cfg.subdomains:
        region = Region(sd["lo"], sd["hi"])
        mat = MaterialSpec(kappa=sd["kappa"], mu_rel=sd["mu_rel"], is_pec=sd["is_pec"])
        subdomains.append(Subdomain(region=region, material=mat))
        if sd["is_pec"]:
            pec_regions.append(region)

    seed = int(cfg.training["seed"])
    for i, net_cfg in enumerate(cfg.networks):
        conf = nn.NetworkConfig(
            input_dim=cfg.dimension,
            hidden_widths=net_cfg["widths"],
            omega0=net_cfg["omega0"],
            num_kernels=len(net_cfg["kernels"]),
            in_lo=tuple(cfg.domain_lo),
            in_hi=tuple(cfg.domain_hi),
        )
        net = nn.init_network(conf, seed=seed + i)
        for sd_idx in net_cfg["subdomains"]:
            role = NetworkRole(
                net=net,
                role=net_cfg["role"],
                kernels=net_cfg["kernels"],
                name=net_cfg["name"],
            )
            subdomains[sd_idx].networks.append(role)

    assembly = FieldAssembly(subdomains=subdomains, k0=cfg.k0, clamp_gates=cfg.vanilla_mode)
    lam = assembly.min_wavelength()

    exclusions = list(cfg.source_exclusions)
    for net_cfg in cfg.networks:
        for kern in net_cfg["kernels"]:
            if kern.kind == "spherical":
                c = np.asarray(kern.center)
                if np.all(c >= cfg.domain_lo) and np.all(c <= cfg.domain_hi):
                    exclusions.append((kern.center, lam / 100.0))
    extra_regions = [
        Region(box["lo"], box["hi"])
        for net_cfg in cfg.networks
        for box in net_cfg["incident_excluded_regions"]
    ]
    domain = DomainSampler(
        cfg.domain_lo,
        cfg.domain_hi,
        pec_regions=pec_regions + extra_regions,
        exclusions=exclusions,
    )

    def stack(pieces):
        if not pieces:
            return None, None
        return np.concatenate([p for p, _ in pieces]), np.concatenate([n for _, n in pieces])

    abs_pieces = []
    for face in cfg.absorbing_faces:
        axis = _AXES.index(face[0])
        others = [d for d in range(cfg.dimension) if d != axis]
        length = max(
            (cfg.domain_hi[d] - cfg.domain_lo[d] for d in others), default=lam
        )
        n = _default_bc_count(cfg, length, lam) if cfg.dimension > 1 else 1
        abs_pieces.append(_face_points(cfg, face, n, pec_regions))
    abs_points, abs_normals = stack(abs_pieces)

    pec_pieces = []
    for surf in cfg.pec_surfaces:
        length = _surface_length(cfg, surf, lam)
        pts = _surface_points(cfg, surf, _default_bc_count(cfg, length, lam))
        normal = surf["normal"]
        if normal is None:
            normal = _orient_away_from_pec(cfg, surf, pec_regions)
        normals = np.tile(np.asarray(normal, dtype=float), (pts.shape[0], 1))
        pec_pieces.append((pts, normals))
    pec_points, pec_normals = stack(pec_pieces)

    iface_pieces = []
    for surf in cfg.interfaces:
        length = _surface_length(cfg, surf, lam)
        pts = _surface_points(cfg, surf, _default_bc_count(cfg, length, lam))
        normal = surf["normal"]
        if normal is None:
            normal = _orient_toward_first(assembly, surf, cfg.dimension)
        normals = np.tile(np.asarray(normal, dtype=float), (pts.shape[0], 1))
        iface_pieces.append((pts, normals))
    iface_points, iface_normals = stack(iface_pieces)

    return Problem(
        assembly=assembly,
        domain=domain,
        sources=cfg.sources,
        training=dict(cfg.training),
        radiation_sign=cfg.radiation_sign,
        abs_points=abs_points,
        abs_normals=abs_normals,
        pec_points=pec_points,
        pec_normals=pec_normals,
        iface_points=iface_points,
        iface_normals=iface_normals,
        config=cfg,
    )


def _surface_length(cfg, surf, lam):
    if cfg.dimension == 1:
        return lam
    return max(b - a for a, b in zip(surf["lo"], surf["hi"]))


def _orient_away_from_pec(cfg, surf, pec_regions):
    """Axis-aligned unit normal pointing out of the PEC region."""
    a = surf["axis"]
    normal = np.zeros(cfg.dimension)
    probe = _surface_points(cfg, surf, 1)[0].copy()
    eps = 1e-9 + 1e-6 * (cfg.domain_hi[a] - cfg.domain_lo[a])
    probe[a] = surf["value"] + eps
    inside_plus = any(r.contains(probe[None, :])[0] for r in pec_regions)
    normal[a] = -1.0 if inside_plus else 1.0
    return normal


def _orient_toward_first(assembly, surf, dim):
    """Normal pointing toward the lower-index (incident-side) subdomain."""
    a = surf["axis"]
    normal = np.zeros(dim)
    normal[a] = 1.0
    probe = np.zeros(dim)
    others = [d for d in range(dim) if d != a]
    for j, d in enumerate(others):
        probe[d] = 0.5 * (surf["lo"][j] + surf["hi"][j])
    probe[a] = surf["value"]
    span = max(abs(v) for v in (surf["value"], 1.0))
    step = 1e-6 * span + 1e-9
    plus = probe.copy()
    plus[a] += step
    minus = probe.copy()
    minus[a] -= step
    i_plus = assembly.route(plus[None, :])[0]
    i_minus = assembly.route(minus[None, :])[0]
    if i_plus < 0 or i_minus < 0:
        raise GeometryError("interface does not separate two subdomains")
    if i_plus < i_minus:
        return tuple(normal)
    return tuple(-normal)
