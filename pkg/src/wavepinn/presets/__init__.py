"""Shipped scenario presets: desk-scale scenes a CPU can train in minutes.

Each preset is a JSON config under data/ plus a catalog entry naming the
reference oracle used to score it and the thresholds it is expected to meet.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources

from ..config import ScenarioConfig, parse_config
from ..errors import UsageError

import json


@dataclass(frozen=True)
class PresetEntry:
    id: str
    description: str
    config_path: str  # resource name under presets/data
    oracle: str  # "analytic" | "fd1d" | "fd2d" | "none"
    thresholds: dict = field(default_factory=dict)


_CATALOG = [
    PresetEntry(
        id="freespace1d_desk",
        description="1D free space over 10 wavelengths; unit drive at x=0, absorbing far end",
        config_path="freespace1d_desk.json",
        oracle="analytic",
        thresholds={"rel_l2": 1e-2},
    ),
    PresetEntry(
        id="scenario1_desk",
        description="2D free space, Gaussian aperture beam; plane + spherical kernels",
        config_path="scenario1_desk.json",
        oracle="fd2d",
        thresholds={"pde": 1e-1, "mse": 2e-2},
    ),
    PresetEntry(
        id="vanilla_ablation",
        description="scenario1_desk with carriers disabled (identity kernel)",
        config_path="vanilla_ablation.json",
        oracle="fd2d",
        thresholds={},
    ),
    PresetEntry(
        id="scenario3_desk",
        description="2D free space, constant ring source; single spherical kernel",
        config_path="scenario3_desk.json",
        oracle="analytic",
        thresholds={"mse": 2e-2},
    ),
    PresetEntry(
        id="scenario5_desk",
        description="2D diagonal beam onto a vertical mirror; two plane kernels",
        config_path="scenario5_desk.json",
        oracle="fd2d",
        thresholds={"mse": 3e-2},
    ),
    PresetEntry(
        id="scenario6_desk",
        description="2D ring source and mirror; image-source kernel",
        config_path="scenario6_desk.json",
        oracle="fd2d",
        thresholds={"mse": 3e-2, "pec_rms": 1e-2},
    ),
    PresetEntry(
        id="scenario9_desk",
        description="2D half-space refraction (kappa 9); virtual-source kernel",
        config_path="scenario9_desk.json",
        oracle="fd2d",
        thresholds={"mse": 3e-2, "iface_rms": 1e-2},
    ),
    PresetEntry(
        id="scenario11_desk",
        description="2D dielectric strip; reflection/standing/transmission kernels",
        config_path="scenario11_desk.json",
        oracle="fd2d",
        thresholds={"mse": 5e-2},
    ),
    PresetEntry(
        id="scenario4_desk3d",
        description="3D free space, spherical-shell source",
        config_path="scenario4_desk3d.json",
        oracle="none",
        thresholds={"pde": 1.0},
    ),
    PresetEntry(
        id="scenario8_desk3d",
        description="3D diffraction around a centered PEC cube",
        config_path="scenario8_desk3d.json",
        oracle="none",
        thresholds={"pde": 1.0},
    ),
    PresetEntry(
        id="scenario10_desk3d",
        description="3D half-space refraction (kappa 9)",
        config_path="scenario10_desk3d.json",
        oracle="none",
        thresholds={"pde": 1.0},
    ),
    PresetEntry(
        id="scenario12_desk3d",
        description="3D dielectric strip",
        config_path="scenario12_desk3d.json",
        oracle="none",
        thresholds={"pde": 1.0},
    ),
]


def list_presets():
    """Static catalog, keyed by preset id."""
    return {p.id: p for p in _CATALOG}


def preset_path(preset_id):
    """Filesystem path of a preset's JSON config."""
    entry = list_presets().get(preset_id)
    if entry is None:
        raise UsageError(f"unknown preset {preset_id!r}")
    return resources.files(__name__).joinpath("data", entry.config_path)


def materialize(preset_id) -> ScenarioConfig:
    """Load and validate a preset's config."""
    with preset_path(preset_id).open() as fh:
        return parse_config(json.load(fh))
