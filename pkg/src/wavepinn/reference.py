"""Scenario-level reference fields and comparison masks.

Bridges scenario configs to the grid oracles: picks grid resolution, builds
the per-cell wavenumber map, turns sources into Dirichlet data, and produces
the validity mask used when scoring a trained model against the reference.
"""

from __future__ import annotations

import numpy as np

from . import oracle
from .errors import UsageError

POINTS_PER_WAVELENGTH = 24  # FD resolution against the shortest wavelength
SOURCE_MASK_FACTOR = 1.5  # comparison exclusion radius, in source radii


def _wavenumbers(cfg):
    ks = []
    for sd in cfg.subdomains:
        if sd["is_pec"]:
            ks.append(None)
        else:
            ks.append(cfg.k0 * float(np.sqrt(sd["kappa"] * sd["mu_rel"])))
    return ks


def _min_wavelength(cfg):
    kmax = max(k for k in _wavenumbers(cfg) if k is not None)
    return 2.0 * np.pi / kmax

def default_resolution(cfg):
    """Grid points per axis for an FD reference at POINTS_PER_WAVELENGTH."""
    lam = _min_wavelength(cfg)
    spans = [b - a for a, b in zip(cfg.domain_lo, cfg.domain_hi)]
    return [int(np.ceil(POINTS_PER_WAVELENGTH * s / lam)) + 1 for s in spans]


def _cell_index_map(cfg, grid):
    """Subdomain index per grid cell (smallest index wins on shared faces)."""
    pts = grid.points()
    idx = np.full(pts.shape[0], -1, dtype=int)
    for i in reversed(range(len(cfg.subdomains))):
        sd = cfg.subdomains[i]
        lo = np.asarray(sd["lo"]) - 1e-12
        hi = np.asarray(sd["hi"]) + 1e-12
        inside = np.all((pts >= lo) & (pts <= hi), axis=1)
        idx[inside] = i
    return idx.reshape(grid.values.shape)


def _k_map(cfg, grid):
    ks = _wavenumbers(cfg)
    idx = _cell_index_map(cfg, grid)
    kmap = np.zeros(grid.values.shape)
    pec = np.zeros(grid.values.shape, dtype=bool)
    for i, k in enumerate(ks):
        sel = idx == i
        if k is None:
            pec |= sel
        else:
            kmap[sel] = k
    kmap[kmap == 0.0] = cfg.k0  # outside-domain fallback, unused cells
    return kmap, pec


def _source_dirichlet(cfg, grid):
    """Dirichlet mask/values for each source on the FD grid."""
    ny_nx = grid.values.shape
    mask = np.zeros(ny_nx, dtype=bool)
    vals = np.zeros(ny_nx, dtype=complex)
    x, y = grid.axes()
    hx, hy = grid.spacing
    for src in cfg.sources:
        g = src.geometry
        if g["type"] == "line":
            p0 = np.asarray(g["p0"], dtype=float)
            p1 = np.asarray(g["p1"], dtype=float)
            axis = int(np.argmax(np.abs(p1 - p0)))  # the line's running axis
            if not np.allclose(np.delete(p0, axis), np.delete(p1, axis)):
                raise UsageError("FD reference supports axis-aligned line sources only")
            if axis == 1:
                ix = int(round((p0[0] - grid.origin[0]) / hx))
                t = y - 0.5 * (p0[1] + p1[1])
                re, im = src.profile_values(t)
                sel = (y >= min(p0[1], p1[1]) - 1e-12) & (y <= max(p0[1], p1[1]) + 1e-12)
                mask[sel, ix] = True
                vals[sel, ix] = re[sel] + 1j * im[sel]
            else:
                iy = int(round((p0[1] - grid.origin[1]) / hy))
                t = x - 0.5 * (p0[0] + p1[0])
                re, im = src.profile_values(t)
                sel = (x >= min(p0[0], p1[0]) - 1e-12) & (x <= max(p0[0], p1[0]) + 1e-12)
                mask[iy, sel] = True
                vals[iy, sel] = re[sel] + 1j * im[sel]
        elif g["type"] == "circle":
            c = np.asarray(g["center"], dtype=float)
            r0 = float(g["radius"])
            pts = grid.points()
            r = np.linalg.norm(pts - c, axis=1).reshape(ny_nx)
            h = max(hx, hy)
            ring = np.abs(r - r0) <= 0.5 * h * np.sqrt(2.0)
            re, im = src.profile_values(np.zeros(int(ring.sum())))
            mask |= ring
            # scale the profile to each staircase cell's actual radius so the
            # discrete ring emits the intended outgoing cylindrical wave
            k_src = cfg.k0
            radial = oracle.hankel0_2(k_src * r[ring]) / oracle.hankel0_2(k_src * r0)
            vals[ring] = (re + 1j * im) * radial
        else:
            raise UsageError(f"FD reference does not support {g['type']!r} sources")
    return mask, vals


def reference_field(cfg, kind, n=None):
    """Reference GridField for a scenario: analytic or finite differences."""
    if kind == "none":
        raise UsageError("this scenario ships without a grid reference")
    if cfg.dimension == 1:
        if isinstance(n, (list, tuple)):
            n = n[0]
        n = n or default_resolution(cfg)[0]
        x = np.linspace(cfg.domain_lo[0], cfg.domain_hi[0], n)
        if kind == "analytic":
            vals = oracle.analytic_plane(cfg.k0, [1.0], x[:, None])
            return oracle.GridField(vals, [x[0]], [x[1] - x[0]])
        if kind == "fd1d":
            ks = _wavenumbers(cfg)
            karr = np.full(n, ks[0])
            for sd, k in zip(cfg.subdomains, ks):
                if k is not None:
                    karr[(x >= sd["lo"][0] - 1e-12) & (x <= sd["hi"][0] + 1e-12)] = k
            return oracle.fd_solve_1d(x, karr, left_value=1.0)
        raise UsageError(f"unsupported 1D reference kind {kind!r}")
    if cfg.dimension != 2:
        raise UsageError("grid references exist for 1D and 2D scenarios only")

    counts = [n, n] if isinstance(n, int) else (n or default_resolution(cfg))
    grid = oracle.make_grid(cfg.domain_lo, cfg.domain_hi, counts)
    if kind == "analytic":
        src = cfg.sources[0]
        g = src.geometry
        if g["type"] != "circle":
            raise UsageError("2D analytic reference requires a ring source")
        pts = grid.points()
        vals = oracle.analytic_point_2d(cfg.k0, g["center"], pts, r0=g["radius"])
        grid.values = vals.reshape(grid.values.shape)
        return grid
    if kind != "fd2d":
        raise UsageError(f"unsupported 2D reference kind {kind!r}")
    kmap, pec = _k_map(cfg, grid)
    mask, vals = _source_dirichlet(cfg, grid)
    lam = _min_wavelength(cfg)
    sponge = int(np.ceil(1.5 * lam / min(grid.spacing)))
    return oracle.fd_solve_2d(
        grid,
        kmap,
        dirichlet_mask=mask,
        dirichlet_values=vals,
        pec_mask=pec,
        absorber_cells=sponge,
    )


def comparison_mask(cfg, grid):
    """Valid cells for model-vs-reference scoring: excludes PEC interiors,
    the neighborhood of singular ring/shell sources, and regions the model
    deliberately leaves unconstrained."""
    pts = grid.points()
    valid = np.ones(pts.shape[0], dtype=bool)
    for sd in cfg.subdomains:
        if not sd["is_pec"]:
            continue
        lo = np.asarray(sd["lo"]) - 1e-12
        hi = np.asarray(sd["hi"]) + 1e-12
        valid &= ~np.all((pts >= lo) & (pts <= hi), axis=1)
    for src in cfg.sources:
        g = src.geometry
        if g["type"] in ("circle", "sphere"):
            c = np.asarray(g["center"], dtype=float)
            r = SOURCE_MASK_FACTOR * float(g["radius"])
            valid &= np.linalg.norm(pts - c, axis=1) > r
    for net in cfg.networks:
        for box in net["incident_excluded_regions"]:
            lo = np.asarray(box["lo"]) - 1e-12
            hi = np.asarray(box["hi"]) + 1e-12
            valid &= ~np.all((pts >= lo) & (pts <= hi), axis=1)
    return valid.reshape(grid.values.shape)


def model_field(assembly, grid):
    """Model total field sampled on a GridField's points.

    Grid nodes landing exactly on a spherical carrier center are nudged by a
    tiny fraction of the cell spacing; the comparison mask excludes the
    surrounding ball anyway, so the nudge never reaches scored points.
    """
    pts = grid.points().copy()
    nudge = 1e-6 * float(np.min(grid.spacing))
    for sd in assembly.subdomains:
        for role in sd.networks:
            for spec in role.kernels:
                if spec.kind != "spherical":
                    continue
                d = np.linalg.norm(pts - np.asarray(spec.center), axis=1)
                hit = d < 1e-8
                if np.any(hit):
                    pts[hit, 0] += nudge
    vals = assembly.total_values(pts)
    return oracle.GridField(
        vals.reshape(grid.values.shape), grid.origin, grid.spacing
    )
