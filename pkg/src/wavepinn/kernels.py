"""Oscillatory carrier kernels and the geometry rules that parameterize them.

Carriers are unit-modulus complex exponentials: plane waves exp(-j k d.x)
and spherical waves exp(-j k |x - c|). The Identity kernel (constant 1)
reduces the assembly to a vanilla PINN. Helper geometry: Snell transmitted
directions, mirror images, and the paraxial virtual-center suggestion for
transmitted spherical carriers.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .errors import (
    ConfigurationError,
    GeometryError,
    SingularityError,
    TotalInternalReflectionError,
    UsageError,
)

log = logging.getLogger(__name__)

SINGULARITY_RADIUS = 1e-9  # hard evaluation guard around spherical centers


@dataclass(frozen=True)
class KernelSpec:
    kind: str  # "plane" | "spherical" | "identity"
    direction: tuple = None  # unit vector, plane waves
    center: tuple = None  # coordinates, spherical waves
    wavenumber_ref: int = 0  # index of the subdomain whose k applies

    def __post_init__(self):
        if self.kind not in ("plane", "spherical", "identity"):
            raise ConfigurationError(f"unknown kernel kind {self.kind!r}")
        if self.kind == "plane":
            if self.direction is None:
                raise ConfigurationError("plane kernel needs a direction")
            d = np.asarray(self.direction, dtype=float)
            norm = np.linalg.norm(d)
            if norm == 0:
                raise ConfigurationError("plane kernel direction must be nonzero")
            if abs(norm - 1.0) > 1e-12:
                log.info("normalizing kernel direction %s (norm %.6g)", self.direction, norm)
            object.__setattr__(self, "direction", tuple(d / norm))
        elif self.kind == "spherical":
            if self.center is None:
                raise ConfigurationError("spherical kernel needs a center")
            object.__setattr__(self, "center", tuple(float(c) for c in self.center))

    @property
    def dim(self):
        if self.kind == "plane":
            return len(self.direction)
        if self.kind == "spherical":
            return len(self.center)
        return None


def kernel_eval(spec: KernelSpec, k: float, point_jets: ad.Jet):
    """Evaluate a carrier on a lifted coordinate jet; returns (re, im) jets."""
    tape = point_jets.tape
    dim = point_jets.width
    if spec.kind == "identity":
        one = ad.const_jet(tape, np.ones(point_jets.n), dim)
        zero = ad.const_jet(tape, np.zeros(point_jets.n), dim)
        return one, zero
    if spec.dim != dim:
        raise UsageError(f"kernel dim {spec.dim} does not match point dim {dim}")
    if spec.kind == "plane":
        d = np.asarray(spec.direction)
        phase = ad.affine_const(point_jets, (k * d)[None, :])  # k d.x, width 1
    else:
        c = np.asarray(spec.center)
        r2 = np.sum((point_jets.val - c) ** 2, axis=1)
        if np.any(r2 <= SINGULARITY_RADIUS**2):
            raise SingularityError(
                f"spherical kernel evaluated within {SINGULARITY_RADIUS} of center {spec.center}"
            )
        diff = ad.affine_const(point_jets, np.eye(dim), -c)
        r = ad.sqrt(ad.sum_width(ad.mul(diff, diff)))
        phase = ad.scale(r, k)
    # exp(-j phase) = cos(phase) - j sin(phase)
    return ad.cos(phase), ad.scale(ad.sin(phase), -1.0)


@dataclass(frozen=True)
class InterfacePlane:
    point: tuple  # any point on the interface
    normal: tuple  # unit vector, oriented toward the incident side
    n1: float = 1.0  # refractive index, incident side
    n2: float = 1.0  # refractive index, transmitted side

    def __post_init__(self):
        n = np.asarray(self.normal, dtype=float)
        norm = np.linalg.norm(n)
        if norm == 0:
            raise ConfigurationError("interface normal must be nonzero")
        object.__setattr__(self, "normal", tuple(n / norm))
        object.__setattr__(self, "point", tuple(float(c) for c in self.point))
        if self.n1 <= 0 or self.n2 <= 0:
            raise ConfigurationError("refractive indices must be positive")


def snell_transmitted_direction(d_i, iface: InterfacePlane):
    """Transmitted unit direction across a flat interface.

    d_t = (n1/n2) d_par - n sqrt(1 - (n1/n2)^2 |d_par|^2) with tangential
    wavevector continuity n1 |d_i,par| = n2 |d_t,par|.
    """
    d_i = np.asarray(d_i, dtype=float)
    d_i = d_i / np.linalg.norm(d_i)
    n = np.asarray(iface.normal)
    d_perp = float(d_i @ n)
    if d_perp >= 0:
        raise UsageError("incident direction must point into the interface (d_i . n < 0)")
    d_par = d_i - d_perp * n
    eta = iface.n1 / iface.n2
    radicand = 1.0 - eta**2 * float(d_par @ d_par)
    if radicand < 0:
        raise TotalInternalReflectionError(
            f"total internal reflection: radicand {radicand:.3e} < 0"
        )
    return eta * d_par - n * np.sqrt(radicand)


def mirror_point(source, plane_point, plane_normal):
    """Reflect a point across a plane: p' = p - 2((p - q).n) n."""
    p = np.asarray(source, dtype=float)
    q = np.asarray(plane_point, dtype=float)
    n = np.asarray(plane_normal, dtype=float)
    n = n / np.linalg.norm(n)
    return p - 2.0 * float((p - q) @ n) * n


def paraxial_virtual_center(source, iface: InterfacePlane):
    """Suggested transmitted-wave kernel center: image depth scaled by n2/n1.

    The foot of the source on the interface, displaced away from the interface
    into the incident side by (n2/n1) times the source depth. Advisory only;
    scenario configs may carry explicit centers instead.
    """
    s = np.asarray(source, dtype=float)
    q = np.asarray(iface.point)
    n = np.asarray(iface.normal)
    depth = float((s - q) @ n)
    if depth == 0.0:
        raise GeometryError("source lies on the interface")
    if depth < 0.0:
        raise UsageError("source must lie on the incident side of the interface")
    foot = s - depth * n
    return foot + (iface.n2 / iface.n1) * depth * n
