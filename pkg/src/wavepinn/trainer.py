"""Optimization loop: Adam, fixed/adaptive loss weighting, RAR, checkpoints."""

from __future__ import annotations

import json
import logging
import os
import time
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from . import network as nn
from . import physics, sampler
from .errors import DivergenceError
from .field import AssemblyEvaluator

log = logging.getLogger(__name__)


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros(cls, n, **kw):
        return cls(m=np.zeros(n), v=np.zeros(n), **kw)


def adam_step(params, grads, state: AdamState):
    """Standard bias-corrected Adam update; returns the updated parameters."""
    if not np.all(np.isfinite(grads)):
        raise DivergenceError("non-finite gradient in adam_step")
    state.t += 1
    state.m = state.beta1 * state.m + (1.0 - state.beta1) * grads
    state.v = state.beta2 * state.v + (1.0 - state.beta2) * grads**2
    m_hat = state.m / (1.0 - state.beta1**state.t)
    v_hat = state.v / (1.0 - state.beta2**state.t)
    return params - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)


@dataclass
class AdaptiveWeightState:
    """Gradient-norm balancing with an EMA over per-term global L2 norms."""

    alpha: float = 0.9
    eps: float = 1e-8
    gbar: dict = field(default_factory=dict)
    weights: dict = field(default_factory=dict)

    def update(self, grad_norms: dict):
        return update_adaptive_weights(grad_norms, self)


def update_adaptive_weights(grad_norms: dict, state: AdaptiveWeightState):
    """EMA gradient-norm balancing:

    gbar_i <- alpha gbar_i + (1-alpha) G_i,  lambda_i = max_j G_j / (gbar_i + eps).
    """
    if all(g == 0.0 for g in grad_norms.values()):
        log.warning("all per-term gradient norms are zero; weights unchanged")
        return dict(state.weights)
    for name, g in grad_norms.items():
        if name in state.gbar:
            state.gbar[name] = state.alpha * state.gbar[name] + (1.0 - state.alpha) * g
        else:
            state.gbar[name] = g
    gmax = max(grad_norms.values())
    state.weights = {name: gmax / (state.gbar[name] + state.eps) for name in grad_norms}
    return dict(state.weights)


@dataclass
class TrainReport:
    final: physics.LossBreakdown
    iterations: int
    wallclock: float
    weights: dict
    mse_vs_oracle: float = None
    checkpoint_path: str = None
    history: list = field(default_factory=list)  # (iter, total, pde)


class Trainer:
    """Runs the optimization for a built Problem (see config.build_problem)."""

    def __init__(self, problem, out_dir=None):
        self.problem = problem
        self.out_dir = out_dir
        if out_dir is not None:
            os.makedirs(out_dir, exist_ok=True)
        tr = problem.training
        self.rng = np.random.default_rng(tr["seed"])
        self.batch = int(tr.get("batch", 1024))
        self.log_every = int(tr.get("log_every", 100))
        self.ckpt_every = int(tr.get("checkpoint_every", 5000))
        self.weight_every = int(tr.get("weight_update_every", 100))
        self.weight_mode = tr.get("weighting", "fixed")
        self.fixed_weights = dict(tr.get("weights", {"src": 1.0, "pde": 1.0, "bc": 1.0}))
        rar = tr.get("rar", {})
        self.rar_cadence = int(rar.get("cadence", 1000))
        self.rar_top_k = int(rar.get("top_k", max(1, int(0.05 * tr.get("capacity", tr["n_pde"])))))
        self.rar_pool = int(rar.get("pool", 10 * self.rar_top_k))
        self.adaptive_state = AdaptiveWeightState(
            alpha=float(tr.get("ema_alpha", 0.9)), eps=float(tr.get("ema_eps", 1e-8))
        )
        capacity = int(tr.get("capacity", tr["n_pde"]))
        self.samples = sampler.init_samples(
            problem.domain, tr["n_pde"], seed=tr["seed"], capacity=capacity
        )
        self._log_fh = None

    # -- loss assembly -------------------------------------------------------

    def _components(self, evaluator, pde_points):
        p = self.problem
        comps = {}
        if p.sources:
            nodes = [
                physics.source_loss(evaluator, src, p.training.get("n_src", 128))
                for src in p.sources
            ]
            comps["src"] = nodes[0] if len(nodes) == 1 else ad.scalar_combine(
                nodes, [1.0 / len(nodes)] * len(nodes)
            )
        roles = {r.role for r in p.assembly.all_networks()}
        if "incident" in roles:
            comps["pde_inc"] = physics.pde_loss(evaluator, pde_points, target="inc")
        if "scattered" in roles:
            comps["pde_sct"] = physics.pde_loss(evaluator, pde_points, target="sct")
        if p.abs_points is not None and len(p.abs_points):
            comps["bc_abs"] = physics.sommerfeld_loss(
                evaluator, p.abs_points, p.abs_normals, radiation_sign=p.radiation_sign
            )
        if p.pec_points is not None and len(p.pec_points):
            comps["bc_pec"] = physics.pec_loss(evaluator, p.pec_points)
        if p.iface_points is not None and len(p.iface_points):
            comps["bc_iface"] = physics.interface_loss(
                evaluator, p.iface_points, p.iface_normals
            )
        return comps

    def _grad_vector(self, evaluator, grads):
        return np.concatenate([grads[node].ravel() for node in evaluator.param_nodes()])

    def _term_norms(self, evaluator, comps):
        groups = {"src": [], "pde": [], "bc": []}
        for name, node in comps.items():
            groups[
                "src" if name == "src" else ("pde" if name.startswith("pde") else "bc")
            ].append(node)
        norms = {}
        for gname, nodes in groups.items():
            if not nodes:
                continue
            term = nodes[0] if len(nodes) == 1 else ad.scalar_combine(nodes, [1.0] * len(nodes))
            g = self._grad_vector(evaluator, evaluator.tape.backward(term))
            norms[gname] = float(np.linalg.norm(g))
        return norms

    def _minibatch(self):
        pts = self.samples.points()
        if pts.shape[0] <= self.batch:
            return pts
        sel = self.rng.choice(pts.shape[0], size=self.batch, replace=False)
        return pts[sel]

    # -- parameter plumbing ---------------------------------------------------

    def _get_flat(self):
        return np.concatenate(
            [nn.get_flat_parameters(r.net) for r in self.problem.assembly.unique_networks()]
        )

    def _set_flat(self, flat):
        o = 0
        for r in self.problem.assembly.unique_networks():
            n = r.net.parameter_count()
            nn.set_flat_parameters(r.net, flat[o : o + n])
            o += n

    def _checkpoint(self, iteration):
        if self.out_dir is None:
            return None
        import os

        path = os.path.join(self.out_dir, "checkpoint.json")
        nets = {
            r.name or f"net{i}": r.net
            for i, r in enumerate(self.problem.assembly.unique_networks())
        }
        nn.save_checkpoints(path, nets, iteration)
        return path

    def _log_row(self, row):
        if self.out_dir is None:
            return
        import os

        if self._log_fh is None:
            self._log_fh = open(os.path.join(self.out_dir, "train_log.jsonl"), "w")
        self._log_fh.write(json.dumps(row) + "\n")
        self._log_fh.flush()

    def audit_detachment(self, pde_points=None):
        """Assert the cross-gradient structure of the objective separation:

        grad_inc(L_pde_sct + L_bc) == 0 and grad_sct(L_src + L_pde_inc) == 0.
        Returns the two gradient norms (exactly 0.0 when the audit passes).
        """
        p = self.problem
        pts = pde_points if pde_points is not None else self._minibatch()
        tape = ad.Tape()
        evaluator = AssemblyEvaluator(p.assembly, tape)
        comps = self._components(evaluator, pts)
        inc_nodes, sct_nodes = [], []
        for role in p.assembly.unique_networks():
            b = evaluator.bound(role.net)
            nodes = [n for pair in (b.layer_nodes + b.head_nodes) for n in pair]
            (inc_nodes if role.role == "incident" else sct_nodes).append(nodes)
        sct_terms = [comps[k] for k in ("pde_sct", "bc_abs", "bc_pec", "bc_iface") if k in comps]
        inc_terms = [comps[k] for k in ("src", "pde_inc") if k in comps]
        norms = []
        for terms, foreign in ((sct_terms, inc_nodes), (inc_terms, sct_nodes)):
            if not terms or not foreign:
                norms.append(0.0)
                continue
            total = ad.scalar_combine(terms, [1.0] * len(terms))
            grads = tape.backward(total)
            s = 0.0
            for nodes in foreign:
                for node in nodes:
                    s += float(np.sum(grads[node] ** 2))
            norms.append(float(np.sqrt(s)))
        return tuple(norms)

    # -- main loop -------------------------------------------------------------

    def run(self, budget=None, early_stop=None, audit_every=0):
        p = self.problem
        tr = p.training
        budget = int(tr["iterations"] if budget is None else budget)
        if early_stop is None:
            early_stop = tr.get("early_stop")
        state = AdamState.zeros(self._get_flat().size, lr=float(tr.get("lr", 1e-3)))
        lr0 = state.lr
        weights = dict(self.fixed_weights)
        t0 = time.monotonic()
        history = []
        breakdown = None
        divergent_streak = 0
        divergence_cap = float(tr.get("divergence_threshold", 1e6))

        iteration = 0
        while iteration < budget or iteration == 0:
            pts = self._minibatch()
            tape = ad.Tape()
            evaluator = AssemblyEvaluator(p.assembly, tape)
            comps = self._components(evaluator, pts)

            if self.weight_mode == "adaptive" and iteration % self.weight_every == 0:
                norms = self._term_norms(evaluator, comps)
                weights = update_adaptive_weights(norms, self.adaptive_state) or weights
                missing = {g: 1.0 for g in ("src", "pde", "bc") if g not in weights}
                weights = {**missing, **weights}

            try:
                total, breakdown = physics.assemble_loss(tape, comps, weights)
            except DivergenceError as err:
                raise DivergenceError(f"at iteration {iteration}: {err}") from err

            if iteration == 0:
                history.append((0, breakdown.total, breakdown.pde))
                self._log_row(
                    {
                        "iter": 0,
                        **breakdown.as_dict(),
                        "lambda": weights,
                        "wallclock": time.monotonic() - t0,
                    }
                )
            if budget == 0:
                break

            grads = tape.backward(total)
            gvec = self._grad_vector(evaluator, grads)
            if not np.all(np.isfinite(gvec)):
                term = self._name_nonfinite_term(evaluator, comps)
                raise DivergenceError(
                    f"non-finite gradient at iteration {iteration} (term: {term})"
                )
            state.lr = lr0 * 0.5 ** int(4 * iteration // max(budget, 1))
            self._set_flat(adam_step(self._get_flat(), gvec, state))
            iteration += 1

            if breakdown.total > divergence_cap:
                divergent_streak += 1
                if divergent_streak >= 100:
                    raise DivergenceError(
                        f"total loss above {divergence_cap:g} for 100 consecutive steps "
                        f"(iteration {iteration}, total {breakdown.total:g})"
                    )
            else:
                divergent_streak = 0

            if audit_every and iteration % audit_every == 0:
                n_sct_from_inc, n_inc_from_sct = self.audit_detachment(pts)
                if n_sct_from_inc != 0.0 or n_inc_from_sct != 0.0:
                    raise AssertionError(
                        f"detachment violated: {n_sct_from_inc}, {n_inc_from_sct}"
                    )

            if iteration % self.log_every == 0 or iteration == budget:
                history.append((iteration, breakdown.total, breakdown.pde))
                self._log_row(
                    {
                        "iter": iteration,
                        **breakdown.as_dict(),
                        "lambda": weights,
                        "wallclock": time.monotonic() - t0,
                    }
                )
            if self.rar_cadence and iteration % self.rar_cadence == 0 and iteration < budget:
                sampler.rar_refine(
                    self.samples,
                    lambda q: physics.pde_residual_values(p.assembly, q),
                    self.rar_pool,
                    self.rar_top_k,
                    p.domain,
                )
            if self.ckpt_every and iteration % self.ckpt_every == 0:
                self._checkpoint(iteration)
            if early_stop is not None and iteration >= early_stop.get("min_iters", 0):
                metric = breakdown.pde if early_stop.get("metric", "pde") == "pde" else breakdown.total
                if metric < early_stop["threshold"]:
                    log.info("early stop at iteration %d (%s=%.3g)", iteration, early_stop.get("metric", "pde"), metric)
                    break

        path = self._checkpoint(iteration)
        if self._log_fh is not None:
            self._log_fh.close()
            self._log_fh = None
        return TrainReport(
            final=breakdown,
            iterations=iteration,
            wallclock=time.monotonic() - t0,
            weights=dict(weights),
            checkpoint_path=path,
            history=history,
        )

    def _name_nonfinite_term(self, evaluator, comps):
        for name, node in comps.items():
            g = self._grad_vector(evaluator, evaluator.tape.backward(node))
            if not np.all(np.isfinite(g)):
                return name
        return "unknown"


def train(problem, out_dir=None, budget=None, early_stop=None, audit_every=0):
    """Convenience wrapper: build a Trainer and run it."""
    return Trainer(problem, out_dir=out_dir).run(
        budget=budget, early_stop=early_stop, audit_every=audit_every
    )
