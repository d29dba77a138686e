"""wavepinn: physics-embedded neural solver for frequency-domain wave fields.

Networks learn smooth complex envelopes over known oscillatory carriers
(plane and spherical waves), trained against Helmholtz residuals, source
data and boundary conditions, with finite-difference and analytic oracles
for verification.
"""

from . import errors
from .config import Problem, ScenarioConfig, build_problem, load_config, parse_config
from .field import (
    AssemblyEvaluator,
    FieldAssembly,
    MaterialSpec,
    NetworkRole,
    Region,
    Subdomain,
    wavenumber_from_frequency,
)
from .kernels import (
    InterfacePlane,
    KernelSpec,
    mirror_point,
    paraxial_virtual_center,
    snell_transmitted_direction,
)
from .network import NetworkConfig, SubNetwork, init_network
from .oracle import GridField, compare_fields, fd_solve_1d, fd_solve_2d, make_grid
from .physics import LossBreakdown, SourceSpec
from .sampler import DomainSampler, SampleSet, init_samples, rar_refine
from .trainer import Trainer, TrainReport, train

__version__ = "0.1.0"

__all__ = [
    "AssemblyEvaluator",
    "DomainSampler",
    "FieldAssembly",
    "GridField",
    "InterfacePlane",
    "KernelSpec",
    "LossBreakdown",
    "MaterialSpec",
    "NetworkConfig",
    "NetworkRole",
    "Problem",
    "Region",
    "SampleSet",
    "ScenarioConfig",
    "SourceSpec",
    "SubNetwork",
    "Subdomain",
    "TrainReport",
    "Trainer",
    "build_problem",
    "compare_fields",
    "errors",
    "fd_solve_1d",
    "fd_solve_2d",
    "init_network",
    "init_samples",
    "load_config",
    "make_grid",
    "mirror_point",
    "paraxial_virtual_center",
    "parse_config",
    "rar_refine",
    "snell_transmitted_direction",
    "train",
    "wavenumber_from_frequency",
]
