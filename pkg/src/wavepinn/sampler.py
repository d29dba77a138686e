"""Collocation-point management: stratified init and capacity-bounded RAR.

The sample set keeps an immutable base set (uniform coverage) and a mutable
adaptive set with per-point residuals. Refinement draws a dense candidate
pool, appends the top-k hardest candidates, and when the capacity bound
would be exceeded evicts the lowest-residual points from the adaptive set
only.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, UsageError

log = logging.getLogger(__name__)


class DomainSampler:
    """Draws valid interior points: inside the box, outside PEC regions and
    exclusion balls around spherical-kernel centers."""

    def __init__(self, lo, hi, pec_regions=(), exclusions=()):
        self.lo = np.asarray(lo, dtype=float)
        self.hi = np.asarray(hi, dtype=float)
        if self.lo.shape != self.hi.shape or np.any(self.lo >= self.hi):
            raise ConfigurationError("invalid domain bounds")
        self.pec_regions = list(pec_regions)  # Region objects
        self.exclusions = [(np.asarray(c, dtype=float), float(r)) for c, r in exclusions]

    @property
    def dim(self):
        return self.lo.size

    def valid(self, points):
        pts = np.atleast_2d(points)
        ok = np.all((pts >= self.lo) & (pts <= self.hi), axis=1)
        for region in self.pec_regions:
            ok &= ~region.contains(pts)
        for center, radius in self.exclusions:
            ok &= np.linalg.norm(pts - center, axis=1) > radius
        return ok

    def uniform(self, n, rng):
        """Rejection-sample n valid i.i.d. uniform points."""
        out = []
        have = 0
        for _ in range(1000):
            draw = rng.uniform(self.lo, self.hi, size=(max(n - have, 16), self.dim))
            draw = draw[self.valid(draw)]
            if draw.size:
                out.append(draw)
                have += draw.shape[0]
            if have >= n:
                break
        else:
            raise ConfigurationError("sampling region appears infeasible (all PEC?)")
        return np.concatenate(out)[:n] if out else np.empty((0, self.dim))

    def stratified(self, n, rng):
        """Jittered-grid points: one per cell of an n^(1/dim) grid, subsampled
        to exactly n, topped up with uniform draws if exclusions bite."""
        if n == 0:
            return np.empty((0, self.dim))
        m = int(np.ceil(n ** (1.0 / self.dim)))
        grid = np.stack(
            np.meshgrid(*[np.arange(m) for _ in range(self.dim)], indexing="ij"), axis=-1
        ).reshape(-1, self.dim)
        jitter = rng.uniform(0.0, 1.0, size=grid.shape)
        pts = self.lo + (grid + jitter) / m * (self.hi - self.lo)
        pts = pts[self.valid(pts)]
        if pts.shape[0] > n:
            sel = rng.permutation(pts.shape[0])[:n]
            pts = pts[sel]
        elif pts.shape[0] < n:
            extra = self.uniform(n - pts.shape[0], rng)
            pts = np.concatenate([pts, extra])
        return pts


@dataclass
class SampleSet:
    base: np.ndarray  # (Nb, D), immutable after init
    adaptive: np.ndarray  # (Na, D)
    residuals: np.ndarray  # (Na,), last-known residual per adaptive point
    capacity: int
    rng_seed: int
    rng: np.random.Generator = field(repr=False, default=None)

    def __post_init__(self):
        if self.rng is None:
            self.rng = np.random.default_rng(self.rng_seed)
        self.base.setflags(write=False)

    def __len__(self):
        return self.base.shape[0] + self.adaptive.shape[0]

    def points(self):
        if self.adaptive.shape[0] == 0:
            return self.base
        return np.concatenate([self.base, self.adaptive])

    def export_csv(self, path, residual_fn=None):
        pts = self.points()
        res = np.full(len(self), np.nan)
        res[self.base.shape[0] :] = self.residuals
        if residual_fn is not None:
            res = residual_fn(pts)
        dim = pts.shape[1]
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["x", "y", "z"][:dim] + ["residual"])
            for p, r in zip(pts, res):
                writer.writerow([f"{v:.17g}" for v in p] + [f"{r:.17g}"])


def init_samples(domain: DomainSampler, n_base, seed, capacity=None):
    """Deterministic stratified-uniform base set; empty adaptive set."""
    capacity = int(capacity if capacity is not None else max(n_base, 1))
    if n_base > capacity:
        raise ConfigurationError(f"n_base {n_base} exceeds capacity {capacity}")
    if n_base == 0:
        log.warning("init_samples called with n_base=0: empty base set")
    rng = np.random.default_rng(seed)
    base = domain.stratified(n_base, rng)
    return SampleSet(
        base=base,
        adaptive=np.empty((0, domain.dim)),
        residuals=np.empty(0),
        capacity=capacity,
        rng_seed=seed,
        rng=rng,
    )


def rar_refine(sset: SampleSet, residual_fn, pool_size, top_k, domain: DomainSampler):
    """One refinement step: append hard examples, evict the easiest.

    Candidate residuals are evaluated on a fresh uniform pool; non-finite
    candidates are discarded (logged). Stored adaptive residuals are
    refreshed before the swap so eviction uses current values.
    """
    if not (pool_size >= top_k >= 1):
        raise UsageError(f"need pool_size >= top_k >= 1, got {pool_size}, {top_k}")
    pool = domain.uniform(pool_size, sset.rng)
    res = np.asarray(residual_fn(pool), dtype=float)
    finite = np.isfinite(res)
    if not finite.all():
        log.info("rar_refine: discarded %d non-finite candidates", int((~finite).sum()))
        pool, res = pool[finite], res[finite]
    k = min(top_k, pool.shape[0])
    if k == 0:
        return sset
    order = np.argsort(res)[::-1]
    new_pts = pool[order[:k]]
    new_res = res[order[:k]]

    if sset.adaptive.shape[0]:
        old_res = np.asarray(residual_fn(sset.adaptive), dtype=float)
    else:
        old_res = sset.residuals
    merged_pts = np.concatenate([sset.adaptive, new_pts])
    merged_res = np.concatenate([old_res, new_res])
    room = sset.capacity - sset.base.shape[0]
    if merged_pts.shape[0] > room:
        # evict exactly the overflow count of lowest-residual adaptive points
        keep = np.sort(np.argsort(merged_res, kind="stable")[merged_pts.shape[0] - room :])
        merged_pts = merged_pts[keep]
        merged_res = merged_res[keep]
    sset.adaptive = merged_pts
    sset.residuals = merged_res
    return sset
