"""Field assembly: carrier superposition, incident/scattered split, routing.

A FieldAssembly owns the subdomain partition (axis-aligned boxes with
materials) and, per subdomain, the sub-networks with their kernel lists.
The synthesized field in a subdomain is

    E(x) = sum_m gate_m(x) * A_m(x) * Psi_m(x)

summed over all networks attached to that subdomain. Regions without an
incident-role network get E_tot = E_sct alone; PEC regions host no network
and evaluate to the zero field.

Loss evaluation for one optimizer step goes through an AssemblyEvaluator,
which binds every network's parameters to the step tape exactly once, so
all loss terms share the same parameter nodes. Detached evaluations bind
parameters as constants instead (no adjoint flow, bitwise-equal values).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from . import network as nn
from .errors import ConfigurationError, GeometryError, UsageError
from .kernels import KernelSpec, kernel_eval

ROUTING_TOL = 1e-12

VACUUM_LIGHT_SPEED = 299792458.0


@dataclass(frozen=True)
class Region:
    """Axis-aligned box; +-inf bounds give half-spaces."""

    lo: tuple
    hi: tuple

    def __post_init__(self):
        lo = tuple(float(v) for v in self.lo)
        hi = tuple(float(v) for v in self.hi)
        if len(lo) != len(hi):
            raise ConfigurationError("region lo/hi must have the same dimension")
        if any(a >= b for a, b in zip(lo, hi)):
            raise ConfigurationError(f"degenerate region bounds {lo} .. {hi}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def dim(self):
        return len(self.lo)

    def contains(self, points, tol=ROUTING_TOL):
        pts = np.atleast_2d(points)
        lo = np.asarray(self.lo) - tol
        hi = np.asarray(self.hi) + tol
        return np.all((pts >= lo) & (pts <= hi), axis=1)

    def overlaps(self, other, tol=ROUTING_TOL):
        lo = np.maximum(self.lo, other.lo)
        hi = np.minimum(self.hi, other.hi)
        return bool(np.all(hi - lo > tol))


@dataclass(frozen=True)
class MaterialSpec:
    """Material constants; derived index n = sqrt(kappa mu_rel)."""

    kappa: float = 1.0
    mu_rel: float = 1.0
    is_pec: bool = False

    def __post_init__(self):
        if not self.is_pec and self.kappa < 1.0:
            raise ConfigurationError("dielectric constant must be >= 1 (or mark the region PEC)")
        if self.mu_rel <= 0:
            raise ConfigurationError("relative permeability must be positive")

    @property
    def refractive_index(self):
        return float(np.sqrt(self.kappa * self.mu_rel))

    def wavenumber(self, k0):
        if self.is_pec:
            raise UsageError("PEC regions carry no wavenumber")
        return float(k0 * self.refractive_index)


def wavenumber_from_frequency(frequency_hz):
    """Free-space k0 = 2 pi f / c."""
    return 2.0 * np.pi * frequency_hz / VACUUM_LIGHT_SPEED


@dataclass
class NetworkRole:
    net: nn.SubNetwork
    role: str  # "incident" | "scattered"
    kernels: list
    name: str = ""

    def __post_init__(self):
        if self.role not in ("incident", "scattered"):
            raise ConfigurationError(f"unknown network role {self.role!r}")
        if len(self.kernels) != self.net.config.num_kernels:
            raise ConfigurationError(
                f"network {self.name or self.role}: {len(self.kernels)} kernels for "
                f"num_kernels={self.net.config.num_kernels}"
            )


@dataclass
class Subdomain:
    region: Region
    material: MaterialSpec
    networks: list = field(default_factory=list)  # [NetworkRole]

    def __post_init__(self):
        if self.material.is_pec and self.networks:
            raise ConfigurationError("PEC regions host no network")


@dataclass
class FieldAssembly:
    subdomains: list
    k0: float
    clamp_gates: bool = False  # vanilla mode: gate forced to 1

    def __post_init__(self):
        dims = {sd.region.dim for sd in self.subdomains}
        if len(dims) != 1:
            raise ConfigurationError("all subdomains must share the spatial dimension")
        for i, a in enumerate(self.subdomains):
            for b in self.subdomains[i + 1 :]:
                if a.region.overlaps(b.region):
                    raise GeometryError("subdomain regions overlap")

    @property
    def dim(self):
        return self.subdomains[0].region.dim

    def all_networks(self):
        return [role for sd in self.subdomains for role in sd.networks]

    def unique_networks(self):
        """Network roles deduplicated by underlying net (a net may be shared
        across several subdomains, e.g. a box-decomposed air region)."""
        seen = set()
        out = []
        for role in self.all_networks():
            if id(role.net) not in seen:
                seen.add(id(role.net))
                out.append(role)
        return out

    def wavenumber_of(self, index):
        return self.subdomains[index].material.wavenumber(self.k0)

    def kernel_wavenumber(self, spec: KernelSpec):
        return self.subdomains[spec.wavenumber_ref].material.wavenumber(self.k0)

    def min_wavelength(self):
        ks = [
            sd.material.wavenumber(self.k0) for sd in self.subdomains if not sd.material.is_pec
        ]
        return 2.0 * np.pi / max(ks)

    def route(self, points):
        """Subdomain index per point; ties go to the smaller index; -1 outside."""
        pts = np.atleast_2d(points)
        idx = np.full(pts.shape[0], -1, dtype=int)
        for i in reversed(range(len(self.subdomains))):
            idx[self.subdomains[i].region.contains(pts)] = i
        return idx

    def route_non_pec(self, points):
        """Like route(), but boundary ties prefer the non-PEC side."""
        pts = np.atleast_2d(points)
        idx = self.route(pts)
        for j in np.nonzero(idx >= 0)[0]:
            if self.subdomains[idx[j]].material.is_pec:
                for i, sd in enumerate(self.subdomains):
                    if not sd.material.is_pec and sd.region.contains(pts[j : j + 1])[0]:
                        idx[j] = i
                        break
        return idx

    def total_values(self, points):
        """Complex field values on arbitrary points (grid evaluation)."""
        pts = np.atleast_2d(points)
        out = np.zeros(pts.shape[0], dtype=complex)
        idx = self.route(pts)
        for i in range(len(self.subdomains)):
            mask = idx == i
            if not mask.any() or self.subdomains[i].material.is_pec:
                continue
            ev = AssemblyEvaluator(self, ad.Tape(), bind=False)
            jets = ad.lift_points(ev.tape, pts[mask])
            re, im = ev.subdomain_field(i, jets)
            out[mask] = re.val[:, 0] + 1j * im.val[:, 0]
        return out


class AssemblyEvaluator:
    """Per-tape evaluation front end with a shared parameter binding cache."""

    def __init__(self, assembly: FieldAssembly, tape: ad.Tape, bind=True):
        self.assembly = assembly
        self.tape = tape
        self._bound = {}
        if bind:
            # fix parameter-node ordering up front for the trainer
            for role in assembly.unique_networks():
                self.bound(role.net)

    def bound(self, net: nn.SubNetwork, detach=False) -> nn.BoundNetwork:
        if detach:
            return nn.BoundNetwork(net, self.tape, detach=True)
        key = id(net)
        if key not in self._bound:
            self._bound[key] = nn.BoundNetwork(net, self.tape)
        return self._bound[key]

    def param_nodes(self):
        """Parameter nodes in canonical (network declaration) order."""
        nodes = []
        for role in self.assembly.unique_networks():
            b = self.bound(role.net)
            for wn, bn in b.layer_nodes:
                nodes.extend((wn, bn))
            for wn, bn in b.head_nodes:
                nodes.extend((wn, bn))
        return nodes

    def network_field(self, role: NetworkRole, point_jets, detach=False):
        outputs = self.bound(role.net, detach=detach).forward(point_jets)
        return synthesize_field(
            outputs,
            role.kernels,
            point_jets,
            self.assembly.kernel_wavenumber,
            clamp_gates=self.assembly.clamp_gates,
        )

    def subdomain_field(self, index, point_jets, detach_incident=False, roles=None):
        """Total complex field of one subdomain's networks at interior points.

        roles restricts to a subset ("incident"/"scattered"); detach_incident
        evaluates incident-role networks with constant parameters.
        """
        sd = self.assembly.subdomains[index]
        zero = None
        if sd.material.is_pec:
            zero = ad.const_jet(self.tape, np.zeros(point_jets.n), point_jets.width)
            return zero, zero
        parts = []
        # incident detachment only applies where a scattered network coexists;
        # a lone total-field network must still receive boundary gradients
        has_sct = any(r.role == "scattered" for r in sd.networks)
        for role in sd.networks:
            if roles is not None and role.role not in roles:
                continue
            detach = detach_incident and has_sct and role.role == "incident"
            parts.append(self.network_field(role, point_jets, detach=detach))
        if not parts:
            zero = ad.const_jet(self.tape, np.zeros(point_jets.n), point_jets.width)
            return zero, zero
        re, im = parts[0]
        for pre, pim in parts[1:]:
            re = ad.add(re, pre)
            im = ad.add(im, pim)
        return re, im


def synthesize_field(outputs, kernels, point_jets, k_of_kernel, clamp_gates=False):
    """Combine per-kernel envelope triples with their carriers.

    outputs: [(a_re, a_im, gate_logit)] width-1 jets, one triple per kernel.
    k_of_kernel: maps a KernelSpec to its wavenumber. Returns (re, im) jets.
    """
    if len(outputs) != len(kernels):
        raise UsageError("one output triple per kernel required")
    re_total = None
    im_total = None
    for (a_re, a_im, logit), spec in zip(outputs, kernels):
        k = 0.0 if spec.kind == "identity" else k_of_kernel(spec)
        psi_re, psi_im = kernel_eval(spec, k, point_jets)
        # complex product (a_re + j a_im)(psi_re + j psi_im)
        e_re = ad.sub(ad.mul(a_re, psi_re), ad.mul(a_im, psi_im))
        e_im = ad.add(ad.mul(a_re, psi_im), ad.mul(a_im, psi_re))
        if not clamp_gates:
            g = nn.gate(logit)
            e_re = ad.mul(g, e_re)
            e_im = ad.mul(g, e_im)
        re_total = e_re if re_total is None else ad.add(re_total, e_re)
        im_total = e_im if im_total is None else ad.add(im_total, e_im)
    return re_total, im_total


def detached_incident(evaluator: AssemblyEvaluator, index, point_jets):
    """Incident field with parameters treated as constants (no adjoints)."""
    return evaluator.subdomain_field(
        index, point_jets, detach_incident=True, roles=("incident",)
    )
