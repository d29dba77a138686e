"""Sinusoidal MLP sub-networks with per-kernel envelope heads.

Each sub-network maps coordinates to, for every carrier kernel m, a triple
(a_re, a_im, gate_logit): the complex envelope and a soft spatial gate.
The backbone uses sine activations; the first layer is frequency-scaled by
omega0 with the matching uniform initialization.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .errors import ConfigurationError, UsageError


@dataclass(frozen=True)
class NetworkConfig:
    input_dim: int
    hidden_widths: tuple = (40, 120, 120, 120)
    omega0: float = 30.0
    num_kernels: int = 1
    # optional input box mapped affinely to [-1, 1]^dim before the first
    # layer; sine frequencies are calibrated for unit-scale inputs, so this
    # keeps training behavior independent of the physical length unit
    in_lo: tuple = None
    in_hi: tuple = None

    def __post_init__(self):
        if self.input_dim not in (1, 2, 3):
            raise ConfigurationError(f"input_dim must be 1, 2 or 3, got {self.input_dim}")
        if not self.hidden_widths or any(w <= 0 for w in self.hidden_widths):
            raise ConfigurationError("hidden_widths must be a non-empty list of positive ints")
        if self.num_kernels < 1:
            raise ConfigurationError("num_kernels must be >= 1")
        if self.omega0 <= 0:
            raise ConfigurationError("omega0 must be positive")
        object.__setattr__(self, "hidden_widths", tuple(int(w) for w in self.hidden_widths))
        if (self.in_lo is None) != (self.in_hi is None):
            raise ConfigurationError("in_lo and in_hi must be given together")
        if self.in_lo is not None:
            lo = tuple(float(v) for v in self.in_lo)
            hi = tuple(float(v) for v in self.in_hi)
            if len(lo) != self.input_dim or len(hi) != self.input_dim:
                raise ConfigurationError("in_lo/in_hi length must match input_dim")
            if any(h <= l for l, h in zip(lo, hi)):
                raise ConfigurationError("in_hi must exceed in_lo on every axis")
            object.__setattr__(self, "in_lo", lo)
            object.__setattr__(self, "in_hi", hi)

    def param_count(self):
        """Analytic parameter count: backbone affines plus M head affines."""
        n = 0
        fan = self.input_dim
        for w in self.hidden_widths:
            n += fan * w + w
            fan = w
        n += self.num_kernels * (fan * 3 + 3)
        return n

    def hash(self):
        payload = json.dumps(
            [
                self.input_dim,
                list(self.hidden_widths),
                self.omega0,
                self.num_kernels,
                list(self.in_lo) if self.in_lo else None,
                list(self.in_hi) if self.in_hi else None,
            ]
        )
        return hashlib.sha256(payload.encode()).hexdigest()[:16]


@dataclass
class SubNetwork:
    config: NetworkConfig
    layers: list = field(default_factory=list)  # [(W, b)] numpy arrays
    heads: list = field(default_factory=list)  # per kernel (W, b), hidden -> 3
    seed: int = 0

    def parameter_arrays(self):
        out = []
        for w, b in self.layers:
            out.extend((w, b))
        for w, b in self.heads:
            out.extend((w, b))
        return out

    def parameter_count(self):
        return sum(a.size for a in self.parameter_arrays())


def init_network(config: NetworkConfig, seed: int) -> SubNetwork:
    """Deterministic sinusoidal-network initialization.

    First layer U(-1/fan_in, 1/fan_in) with a forward scale of omega0; hidden
    layers U(+-sqrt(6/fan_in)); heads likewise.
    """
    rng = np.random.default_rng(seed)
    net = SubNetwork(config=config, seed=seed)
    fan = config.input_dim
    for i, width in enumerate(config.hidden_widths):
        if i == 0:
            bound = 1.0 / fan
        else:
            bound = np.sqrt(6.0 / fan)
        w = rng.uniform(-bound, bound, size=(width, fan))
        b = rng.uniform(-bound, bound, size=width)
        net.layers.append((w, b))
        fan = width
    bound = np.sqrt(6.0 / fan)
    for _ in range(config.num_kernels):
        w = rng.uniform(-bound, bound, size=(3, fan))
        b = rng.uniform(-bound, bound, size=3)
        net.heads.append((w, b))
    return net


class BoundNetwork:
    """A SubNetwork whose parameters are registered on a tape.

    detach=True records parameters as plain constants, so no adjoint reaches
    them; values are computed through the identical code path either way.
    """

    def __init__(self, net: SubNetwork, tape: ad.Tape, detach: bool = False):
        self.net = net
        self.tape = tape
        self.detach = detach
        if not detach:
            self.layer_nodes = [
                (tape.param(w, f"W{i}"), tape.param(b, f"b{i}"))
                for i, (w, b) in enumerate(net.layers)
            ]
            self.head_nodes = [
                (tape.param(w, f"HW{m}"), tape.param(b, f"Hb{m}"))
                for m, (w, b) in enumerate(net.heads)
            ]

    def forward(self, point_jets: ad.Jet):
        """Evaluate on a lifted coordinate jet (width = input_dim).

        Returns a list of (a_re, a_im, gate_logit) width-1 jets per kernel.
        """
        cfg = self.net.config
        if point_jets.width != cfg.input_dim:
            raise UsageError(
                f"point dim {point_jets.width} does not match config input_dim {cfg.input_dim}"
            )
        h = point_jets
        if cfg.in_lo is not None:
            lo = np.asarray(cfg.in_lo)
            hi = np.asarray(cfg.in_hi)
            scale = 2.0 / (hi - lo)
            h = ad.affine_const(h, np.diag(scale), -lo * scale - 1.0)
        for i in range(len(self.net.layers)):
            if self.detach:
                w, b = self.net.layers[i]
                z = ad.affine_const(h, w, b)
            else:
                wn, bn = self.layer_nodes[i]
                z = ad.linear(h, wn, bn)
            if i == 0 and cfg.omega0 != 1.0:
                z = ad.scale(z, cfg.omega0)
            h = ad.sin(z)
        outputs = []
        for m in range(cfg.num_kernels):
            if self.detach:
                w, b = self.net.heads[m]
                o = ad.affine_const(h, w, b)
            else:
                wn, bn = self.head_nodes[m]
                o = ad.linear(h, wn, bn)
            outputs.append((ad.narrow(o, 0, 1), ad.narrow(o, 1, 1), ad.narrow(o, 2, 1)))
        return outputs


def forward(net: SubNetwork, tape: ad.Tape, point_jets: ad.Jet, detach: bool = False):
    return BoundNetwork(net, tape, detach=detach).forward(point_jets)


def gate(gate_logit: ad.Jet) -> ad.Jet:
    """Logistic squashing of the gate logit into (0, 1), derivatives included."""
    return ad.sigmoid(gate_logit)


# ---------------------------------------------------------------------------
# checkpoint format: JSON header + flat parameter list


def save_checkpoint(path, net: SubNetwork, iteration: int = 0):
    save_checkpoints(path, {"net": net}, iteration)


def save_checkpoints(path, nets: dict, iteration: int = 0):
    """Write one or more named networks to a JSON checkpoint."""
    payload = {"iteration": int(iteration), "networks": {}}
    for name, net in nets.items():
        flat = np.concatenate([a.ravel() for a in net.parameter_arrays()])
        payload["networks"][name] = {
            "config": {
                "input_dim": net.config.input_dim,
                "hidden_widths": list(net.config.hidden_widths),
                "omega0": net.config.omega0,
                "num_kernels": net.config.num_kernels,
                "in_lo": list(net.config.in_lo) if net.config.in_lo else None,
                "in_hi": list(net.config.in_hi) if net.config.in_hi else None,
            },
            "config_hash": net.config.hash(),
            "seed": net.seed,
            "params": flat.tolist(),
        }
    with open(path, "w") as fh:
        json.dump(payload, fh)


def load_checkpoints(path):
    with open(path) as fh:
        payload = json.load(fh)
    nets = {}
    for name, rec in payload["networks"].items():
        in_lo = rec["config"].get("in_lo")
        in_hi = rec["config"].get("in_hi")
        cfg = NetworkConfig(
            input_dim=rec["config"]["input_dim"],
            hidden_widths=tuple(rec["config"]["hidden_widths"]),
            omega0=rec["config"]["omega0"],
            num_kernels=rec["config"]["num_kernels"],
            in_lo=tuple(in_lo) if in_lo else None,
            in_hi=tuple(in_hi) if in_hi else None,
        )
        if cfg.hash() != rec["config_hash"]:
            raise ConfigurationError(f"checkpoint config hash mismatch for network {name!r}")
        net = init_network(cfg, seed=rec["seed"])
        flat = np.asarray(rec["params"], dtype=float)
        if flat.size != net.parameter_count():
            raise ConfigurationError(
                f"checkpoint for {name!r} has {flat.size} params, expected {net.parameter_count()}"
            )
        set_flat_parameters(net, flat)
        nets[name] = net
    return nets, payload["iteration"]


def load_checkpoint(path):
    nets, iteration = load_checkpoints(path)
    if len(nets) != 1:
        raise UsageError("checkpoint holds multiple networks; use load_checkpoints")
    return next(iter(nets.values())), iteration


def get_flat_parameters(net: SubNetwork):
    return np.concatenate([a.ravel() for a in net.parameter_arrays()])


def set_flat_parameters(net: SubNetwork, flat):
    o = 0
    for a in net.parameter_arrays():
        a[...] = np.asarray(flat[o : o + a.size]).reshape(a.shape)
        o += a.size
    if o != len(flat):
        raise UsageError("flat parameter vector length mismatch")
