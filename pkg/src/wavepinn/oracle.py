"""Independent reference solutions: analytic fields and finite-difference solvers.

Everything here is deliberately decoupled from the autodiff/network stack so it
can serve as a cross-check on trained fields. The convention throughout is
exp(+j omega t) time dependence, so outgoing waves carry exp(-j k r) and the
outgoing cylindrical wave is the Hankel function of the second kind.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import DomainError, SolverError, UsageError


# -- grids and fields ---------------------------------------------------------


@dataclass
class GridField:
    """Complex field sampled on a uniform axis-aligned grid.

    values has shape (ny, nx) in 2D (row = y index) or (n,) in 1D.
    """

    values: np.ndarray
    origin: np.ndarray
    spacing: np.ndarray
    k_profile: np.ndarray = None  # wavenumber per cell, when known

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex)
        self.origin = np.atleast_1d(np.asarray(self.origin, dtype=float))
        self.spacing = np.atleast_1d(np.asarray(self.spacing, dtype=float))
        if self.values.ndim != self.origin.size:
            raise UsageError("grid origin dimension does not match values rank")

    @property
    def dim(self):
        return self.values.ndim

    def axes(self):
        if self.dim == 1:
            return (self.origin[0] + self.spacing[0] * np.arange(self.values.size),)
        ny, nx = self.values.shape
        x = self.origin[0] + self.spacing[0] * np.arange(nx)
        y = self.origin[1] + self.spacing[1] * np.arange(ny)
        return x, y

    def points(self):
        """Flattened (N, dim) coordinate array matching values.ravel()."""
        if self.dim == 1:
            return self.axes()[0][:, None]
        x, y = self.axes()
        gx, gy = np.meshgrid(x, y)
        return np.column_stack([gx.ravel(), gy.ravel()])


def make_grid(lo, hi, n):
    """Uniform grid covering [lo, hi] with n points per axis (int or per-axis)."""
    lo = np.atleast_1d(np.asarray(lo, dtype=float))
    hi = np.atleast_1d(np.asarray(hi, dtype=float))
    counts = np.broadcast_to(np.atleast_1d(n), lo.shape).astype(int)
    if np.any(counts < 2):
        raise UsageError("grids need at least 2 points per axis")
    spacing = (hi - lo) / (counts - 1)
    shape = (counts[0],) if lo.size == 1 else (counts[1], counts[0])
    return GridField(np.zeros(shape, dtype=complex), lo, spacing)


# -- special functions --------------------------------------------------------


_EULER_GAMMA = 0.5772156649015328606
_SERIES_SPLIT = 12.0
_SERIES_TERMS = 40


def _j0_series(x):
    # J0(x) = sum_m (-1)^m (x^2/4)^m / (m!)^2, accurate to ~1e-13 for |x| <= 8
    q = x * x / 4.0
    term = np.ones_like(x)
    acc = np.ones_like(x)
    for m in range(1, _SERIES_TERMS + 1):
        term = term * (-q) / (m * m)
        acc = acc + term
    return acc


def _y0_series(x):
    # Y0(x) = (2/pi)[(ln(x/2) + gamma) J0(x) + sum_m (-1)^{m+1} H_m (x^2/4)^m/(m!)^2]
    q = x * x / 4.0
    term = np.ones_like(x)
    harmonic = 0.0
    acc = np.zeros_like(x)
    for m in range(1, _SERIES_TERMS + 1):
        term = term * (-q) / (m * m)
        harmonic += 1.0 / m
        acc = acc - harmonic * term
    return (2.0 / np.pi) * ((np.log(x / 2.0) + _EULER_GAMMA) * _j0_series(x) + acc)


def _hankel1_asymptotic(x):
    # H0^(1)(x) ~ sqrt(2/(pi x)) e^{i(x - pi/4)} sum_k a_k (-i/x)^k with
    # a_0 = 1, a_k = a_{k-1} (2k-1)^2 / (8k); truncated at the smallest term.
    s = np.ones_like(x, dtype=complex)
    term = np.ones_like(x, dtype=complex)
    a = 1.0
    last = np.full_like(x, np.inf)
    stopped = np.zeros(x.shape, dtype=bool)
    for k in range(1, 30):
        a *= (2 * k - 1) ** 2 / (8.0 * k)
        term = term * (-1j / x)
        t = a * term
        mag = np.abs(t)
        stopped |= mag >= last
        if stopped.all():
            break
        s = s + np.where(stopped, 0.0, t)
        last = np.where(stopped, last, mag)
    return np.sqrt(2.0 / (np.pi * x)) * np.exp(1j * (x - np.pi / 4.0)) * s


def bessel_j0(x):
    """J0 via its power series for |x| <= 8 and the Hankel asymptotic beyond."""
    x = np.abs(np.asarray(x, dtype=float))
    scalar = x.ndim == 0
    x = np.atleast_1d(x)
    out = np.empty_like(x)
    small = x <= _SERIES_SPLIT
    if small.any():
        out[small] = _j0_series(x[small])
    if (~small).any():
        out[~small] = _hankel1_asymptotic(x[~small]).real
    return float(out[0]) if scalar else out


def bessel_y0(x):
    """Y0 via its power series for x <= 8 and the Hankel asymptotic beyond."""
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise DomainError("Y0 requires x > 0")
    scalar = x.ndim == 0
    x = np.atleast_1d(x)
    out = np.empty_like(x)
    small = x <= _SERIES_SPLIT
    if small.any():
        out[small] = _y0_series(x[small])
    if (~small).any():
        out[~small] = _hankel1_asymptotic(x[~small]).imag
    return float(out[0]) if scalar else out


def hankel0_2(x):
    """H0^(2)(x) = J0(x) - j Y0(x), the outgoing cylindrical wave factor."""
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise DomainError("H0^(2) requires x > 0")
    return bessel_j0(x) - 1j * bessel_y0(x)


# -- analytic fields ----------------------------------------------------------


def analytic_plane(k, direction, points):
    """Plane wave exp(-j k d.x) sampled at points (N, dim)."""
    d = np.asarray(direction, dtype=float)
    d = d / np.linalg.norm(d)
    phase = k * np.asarray(points, dtype=float) @ d
    return np.exp(-1j * phase)


def analytic_point_2d(k, center, points, r0=None):
    """Outgoing cylindrical wave H0^(2)(k r) about center.

    If r0 is given the field is normalized to 1 at radius r0 (matching a
    unit-amplitude circular source of that radius). Points at the center
    raise DomainError.
    """
    r = np.linalg.norm(np.asarray(points, dtype=float) - np.asarray(center), axis=-1)
    vals = hankel0_2(k * r)
    if r0 is not None:
        vals = vals / hankel0_2(k * r0)
    return vals


# -- 1D finite differences ----------------------------------------------------


def fd_solve_1d(x, k, left_value=1.0):
    """Solve u'' + k^2 u = 0 on the grid x with u(x[0]) = left_value and an
    absorbing condition u' + j k u = 0 at the right end.

    The tridiagonal stencil carries a dispersion-corrected mass coefficient
    (4/h^2) sin^2(k h / 2) so the discrete plane waves e^{+-j k x} propagate
    at exactly the continuum wavenumber, and the absorbing row is the
    one-sided discrete relation u_n = e^{-j k h} u_{n-1}, which is exactly
    transparent for the outgoing discrete wave. k may be a scalar or a
    per-node array (piecewise media). Returns GridField.
    """
    x = np.asarray(x, dtype=float)
    n = x.size
    if n < 3:
        raise UsageError("1D solve needs at least 3 grid points")
    h = x[1] - x[0]
    if not np.allclose(np.diff(x), h):
        raise UsageError("1D solve requires a uniform grid")
    karr = np.broadcast_to(np.asarray(k, dtype=complex), (n,))

    keff2 = (4.0 / h**2) * np.sin(karr * h / 2.0) ** 2
    main = np.full(n, -2.0 / h**2, dtype=complex) + keff2
    lower = np.full(n - 1, 1.0 / h**2, dtype=complex)
    upper = np.full(n - 1, 1.0 / h**2, dtype=complex)
    b = np.zeros(n, dtype=complex)

    main[0], upper[0], b[0] = 1.0, 0.0, left_value
    # exactly transparent one-sided row: u_n - e^{-j k h} u_{n-1} = 0
    main[-1] = 1.0
    lower[-1] = -np.exp(-1j * karr[-1] * h)
    b[-1] = 0.0

    A = sp.diags([lower, main, upper], [-1, 0, 1], format="csc")
    u = spla.spsolve(A, b)
    rel = np.linalg.norm(A @ u - b) / max(np.linalg.norm(b), 1e-300)
    if rel >= 1e-10:
        raise SolverError(f"1D tridiagonal residual {rel:.3e} exceeds 1e-10")
    return GridField(u, [x[0]], [h], k_profile=karr.real.copy())


def standing_wave_amplitudes(u):
    """Decompose |u| oscillation into (|A|, |B|) of A e^{-jkx} + B e^{+jkx}.

    The window should span at least half a wavelength.
    """
    mag = np.abs(np.asarray(u))
    hi, lo = mag.max(), mag.min()
    return (hi + lo) / 2.0, (hi - lo) / 2.0


def transmission_from_profile(u_left, u_right):
    """|t| estimated from samples left (standing) and right (purely outgoing)
    of an interface. Compare against 2 k1 / (k1 + k2)."""
    a, _ = standing_wave_amplitudes(u_left)
    if a == 0:
        raise UsageError("no incident wave detected on the left window")
    return float(np.mean(np.abs(u_right)) / a)


# -- 2D finite differences ----------------------------------------------------


def fd_solve_2d(
    grid: GridField,
    k_map,
    dirichlet_mask=None,
    dirichlet_values=None,
    pec_mask=None,
    absorbing=True,
    absorber_cells=0,
):
    """Solve the 2D Helmholtz problem on a uniform grid with a 5-point stencil.

    grid supplies the geometry (values are ignored). k_map is a scalar or an
    (ny, nx) array. Cells under dirichlet_mask are pinned to dirichlet_values.
    Cells under pec_mask are pinned to zero. Remaining outer-boundary cells
    get a first-order absorbing condition du/dn + j k u = 0 (one-sided) when
    absorbing is True, otherwise they must be covered by a Dirichlet mask.

    absorber_cells > 0 pads the grid outward by that many cells with a
    quadratically ramped complex wavenumber (a sponge band) before the
    one-sided row, which suppresses the oblique-incidence reflection of the
    first-order condition; the returned field is cropped to the input grid.
    Solved with a sparse direct factorization; the discrete residual is
    verified below 1e-8.
    """
    if grid.dim != 2:
        raise UsageError("fd_solve_2d expects a 2D grid")
    ny0, nx0 = grid.values.shape
    hx, hy = grid.spacing[0], grid.spacing[1]
    karr = np.broadcast_to(np.asarray(k_map, dtype=complex), (ny0, nx0))
    pm = (
        np.asarray(pec_mask, dtype=bool)
        if pec_mask is not None
        else np.zeros((ny0, nx0), dtype=bool)
    )
    dm = (
        np.asarray(dirichlet_mask, dtype=bool)
        if dirichlet_mask is not None
        else np.zeros((ny0, nx0), dtype=bool)
    )
    fvals = np.zeros((ny0, nx0), dtype=complex)
    fvals[dm] = np.asarray(dirichlet_values, dtype=complex)[dm] if np.ndim(
        dirichlet_values
    ) else dirichlet_values

    pad = int(absorber_cells)
    if pad > 0:
        if not absorbing:
            raise UsageError("absorber_cells requires absorbing=True")
        karr = np.pad(karr, pad, mode="edge")
        # PEC blocks that touch the grid edge continue through the sponge
        pm = np.pad(pm, pad, mode="edge")
        dm = np.pad(dm, pad, mode="constant")
        fvals = np.pad(fvals, pad, mode="constant")
        ny, nx = karr.shape
        iy, ix = np.meshgrid(np.arange(ny), np.arange(nx), indexing="ij")
        depth = np.maximum.reduce(
            [pad - iy, pad - ix, iy - (ny - 1 - pad), ix - (nx - 1 - pad)]
        )
        depth = np.clip(depth, 0, pad)
        sigma = 0.5 * (depth / pad) ** 2
        karr = karr * (1.0 - 1j * sigma)
    ny, nx = karr.shape
    fixed = pm | dm

    def idx(iy, ix):
        return iy * nx + ix

    rows, cols, data = [], [], []
    b = np.zeros(ny * nx, dtype=complex)

    def put(r, c, v):
        rows.append(r)
        cols.append(c)
        data.append(v)

    for iy in range(ny):
        for ix in range(nx):
            r = idx(iy, ix)
            if fixed[iy, ix]:
                put(r, r, 1.0)
                b[r] = fvals[iy, ix]
                continue
            on_x = ix == 0 or ix == nx - 1
            on_y = iy == 0 or iy == ny - 1
            if on_x or on_y:
                if not absorbing:
                    raise UsageError(
                        "boundary cell not covered by Dirichlet data and "
                        "absorbing=False"
                    )
                # one-sided du/dn + j k u = 0 toward the inward neighbor
                dx = 1 if ix == 0 else (-1 if ix == nx - 1 else 0)
                dy = 1 if iy == 0 else (-1 if iy == ny - 1 else 0)
                h = np.hypot(dx * hx, dy * hy)
                put(r, r, 1.0 / h + 1j * karr[iy, ix])
                put(r, idx(iy + dy, ix + dx), -1.0 / h)
                continue
            # interior 5-point row with an isotropic (angle-averaged)
            # dispersion correction: keff^2 = k^2 - k^4 (hx^2 + hy^2)/32
            k2 = karr[iy, ix] ** 2
            keff2 = k2 - k2 * k2 * (hx**2 + hy**2) / 32.0
            put(r, r, -2.0 / hx**2 - 2.0 / hy**2 + keff2)
            put(r, idx(iy, ix - 1), 1.0 / hx**2)
            put(r, idx(iy, ix + 1), 1.0 / hx**2)
            put(r, idx(iy - 1, ix), 1.0 / hy**2)
            put(r, idx(iy + 1, ix), 1.0 / hy**2)

    A = sp.csc_matrix(
        (np.asarray(data, dtype=complex), (rows, cols)), shape=(ny * nx, ny * nx)
    )
    try:
        lu = spla.splu(A)
        u = lu.solve(b)
    except RuntimeError as err:
        raise SolverError(f"sparse factorization failed: {err}") from err
    rel = np.linalg.norm(A @ u - b) / max(np.linalg.norm(b), 1e-300)
    if rel >= 1e-8:
        raise SolverError(f"2D discrete residual {rel:.3e} exceeds 1e-8")
    sol = u.reshape(ny, nx)
    kout = karr.real.copy()
    if pad > 0:
        sol = sol[pad:-pad, pad:-pad]
        kout = kout[pad:-pad, pad:-pad]
    return GridField(sol, grid.origin, grid.spacing, k_profile=kout)


# -- comparison ---------------------------------------------------------------


def compare_fields(a, b, mask=None):
    """Mean squared complex deviation between two fields after each is scaled
    to unit peak modulus over the valid cells. mask=True marks valid cells."""
    av = np.asarray(a.values if isinstance(a, GridField) else a, dtype=complex)
    bv = np.asarray(b.values if isinstance(b, GridField) else b, dtype=complex)
    if av.shape != bv.shape:
        raise UsageError(f"field shapes differ: {av.shape} vs {bv.shape}")
    if mask is None:
        mask = np.ones(av.shape, dtype=bool)
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        raise UsageError("comparison mask excludes every cell")
    av, bv = av[mask], bv[mask]
    pa, pb = np.abs(av).max(), np.abs(bv).max()
    if pa == 0 or pb == 0:
        raise UsageError("cannot normalize an identically-zero field")
    d = av / pa - bv / pb
    return float(np.mean(np.abs(d) ** 2))
