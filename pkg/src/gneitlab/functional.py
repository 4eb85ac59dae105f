"""Additive functionals Y(t) = int phi(B_x) dx over simulated windows.

The integral is a midpoint Riemann sum over the cell-centred grid.  Ensembles
of independent replicates are summarised by unbiased k-statistics with
leave-one-out jackknife standard errors.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import GneitlabError, HermiteOverflow, NonFinite, VarUndefined
from .fieldsim import CirculantSampler, GridSpec

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class FunctionalResult:
    t: float
    y_raw: float
    window_volume: float
    grid_cell_volume: float


def evaluate_functional(sample, phi, grid):
    """Midpoint Riemann sum h^d * sum_nodes phi(B_node) for one sample."""
    try:
        vals = np.asarray(phi(sample.values), dtype=float)
    except HermiteOverflow as exc:
        raise NonFinite(f"functional overflowed: {exc}") from exc
    mask = grid.mask
    if mask is not None:
        vals = vals[mask]
    if not np.all(np.isfinite(vals)):
        raise NonFinite("functional produced non-finite values")
    y = float(np.sum(vals)) * grid.cell_volume
    return FunctionalResult(grid.t, y, grid.n_active * grid.cell_volume, grid.cell_volume)


def _k_from_sums(n, s1, s2, s3, s4):
    """Fisher's unbiased k-statistics from power sums (arrays broadcast)."""
    with np.errstate(divide="ignore", invalid="ignore"):
        k2 = (n * s2 - s1**2) / (n * (n - 1))
        k3 = (n**2 * s3 - 3 * n * s2 * s1 + 2 * s1**3) / (n * (n - 1) * (n - 2))
        k4 = ((n**3 + n**2) * s4 - 4 * (n**2 + n) * s3 * s1 - 3 * (n**2 - n) * s2**2
              + 12 * n * s2 * s1**2 - 6 * s1**4) / (n * (n - 1) * (n - 2) * (n - 3))
    return k2, k3, k4


def k_statistics(y):
    """Return (k1, k2, k3, k4) of a sample; NaN where n is too small."""
    y = np.asarray(y, dtype=float)
    n = y.size
    m = y.mean()
    z = y - m
    sums = [np.sum(z**r) for r in (1, 2, 3, 4)]
    k2, k3, k4 = _k_from_sums(n, *sums)
    if n < 3:
        k3 = math.nan
    if n < 4:
        k4 = math.nan
    return float(m), float(k2), float(k3), float(k4)


def jackknife_kstats(y):
    """Point estimates and jackknife stderrs of k2, k3, k4 and the standardized ratios.

    Leave-one-out power sums are formed in O(n) from the centered data.
    Returns a dict name -> (estimate, stderr).
    """
    y = np.asarray(y, dtype=float)
    n = y.size
    if n < 2:
        raise VarUndefined("at least two replicates are needed for a variance")
    z = y - y.mean()
    pw = [z**r for r in (1, 2, 3, 4)]
    sums = [p.sum() for p in pw]
    full = _k_from_sums(n, *sums)
    loo = _k_from_sums(n - 1, *(s - p for s, p in zip(sums, pw)))

    def _pack(est, reps):
        if not np.all(np.isfinite(reps)):
            return float(est), math.nan
        dev = reps - reps.mean()
        return float(est), float(math.sqrt((n - 1) / n * np.sum(dev * dev)))

    out = {}
    min_n = {"k2": 3, "k3": 4, "k4": 5}
    for name, est, reps in zip(("k2", "k3", "k4"), full, loo):
        if n < min_n[name] - 1:
            out[name] = (math.nan, math.nan)
        elif n < min_n[name]:
            out[name] = (float(est), math.nan)
        else:
            out[name] = _pack(est, reps)
    with np.errstate(divide="ignore", invalid="ignore"):
        g3 = full[1] / full[0] ** 1.5
        g4 = full[2] / full[0] ** 2
        g3_loo = loo[1] / loo[0] ** 1.5
        g4_loo = loo[2] / loo[0] ** 2
    out["kappa3"] = _pack(g3, g3_loo) if n >= 4 else (float(g3), math.nan)
    out["kappa4"] = _pack(g4, g4_loo) if n >= 5 else (float(g4), math.nan)
    return out


@dataclass
class ReplicateEnsemble:
    """Replicates of Y(t) at a fixed t with their summary statistics.

    ``kappa3`` and ``kappa4`` are the standardized cumulants k3 / k2^{3/2}
    and k4 / k2^2; every ``*_se`` is a jackknife standard error.
    """

    results: list
    t: float
    master_seed: int
    method: str = "circulant"
    clipped_mass: float = 0.0
    assumption_violated: bool = False
    stats: dict = field(default_factory=dict)

    @property
    def n(self):
        return len(self.results)

    @property
    def y(self):
        return np.array([r.y_raw for r in self.results])

    @property
    def mean(self):
        return float(np.mean(self.y))

    @property
    def mean_se(self):
        return math.sqrt(self.var / self.n)

    @property
    def var(self):
        return self.stats["k2"][0]

    @property
    def var_se(self):
        return self.stats["k2"][1]

    @property
    def k_stats(self):
        return tuple(self.stats[k][0] for k in ("k2", "k3", "k4"))

    @property
    def kappa3(self):
        return self.stats["kappa3"]

    @property
    def kappa4(self):
        return self.stats["kappa4"]

    def standardized(self):
        """Replicates centred and scaled by the sample mean and k2."""
        return (self.y - self.mean) / math.sqrt(self.var)

    def summary(self):
        return {
            "t": self.t, "n": self.n, "master_seed": self.master_seed, "method": self.method,
            "clipped_mass": self.clipped_mass, "assumption_violated": self.assumption_violated,
            "mean": self.mean, "mean_se": self.mean_se,
            **{k: {"value": v[0], "stderr": v[1]} for k, v in sorted(self.stats.items())},
        }

    def write_csv(self, path, header_line=None):
        with open(path, "w", newline="") as fh:
            if header_line:
                fh.write(header_line + "\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["replicate", "t", "y_raw"])
            for i, r in enumerate(self.results):
                w.writerow([i, repr(float(r.t)), repr(r.y_raw)])

    def write_summary(self, path):
        with open(path, "w") as fh:
            json.dump(self.summary(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def default_threads():
    env = os.environ.get("GNEITING_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def _block_values(sampler, phi, grid, master_seed, b, start, stop):
    bs = sampler.block_size
    lo, hi = max(start, b * bs), min(stop, (b + 1) * bs)
    try:
        fields = sampler.sample_block(master_seed, b)[lo - b * bs:hi - b * bs]
    except GneitlabError as exc:
        raise type(exc)(f"replicate {lo}: {exc}") from exc
    vals = np.asarray(phi(fields), dtype=float)
    mask = grid.mask
    if mask is not None:
        vals = vals[:, mask]
    flat = vals.reshape(vals.shape[0], -1)
    if not np.all(np.isfinite(flat)):
        bad = lo + int(np.nonzero(~np.all(np.isfinite(flat), axis=1))[0][0])
        raise NonFinite(f"functional produced non-finite values in replicate {bad}")
    return flat.sum(axis=1) * grid.cell_volume


def ensemble_values(sampler, phi, grid, n_reps, master_seed, threads=None):
    """Y(t) for replicates 0..n_reps-1; identical for any thread count."""
    bs = sampler.block_size
    blocks = range(0, (n_reps - 1) // bs + 1)
    threads = threads or default_threads()
    if threads == 1 or len(blocks) == 1:
        parts = [_block_values(sampler, phi, grid, master_seed, b, 0, n_reps) for b in blocks]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(
                lambda b: _block_values(sampler, phi, grid, master_seed, b, 0, n_reps), blocks))
    return np.concatenate(parts)


def run_ensemble(C, window, t, phi, n_reps, master_seed, h=1.0, threads=None, sampler=None):
    """Simulate ``n_reps`` replicates of Y(t) and summarise them.

    A schedule violating the rate condition only triggers a warning and sets
    ``assumption_violated``.
    """
    from .geometry import rate_admissible

    if n_reps < 2:
        raise VarUndefined("n_reps must be at least 2 for a variance")
    violated = False
    f2 = getattr(C, "factor2", None)
    if f2 is not None and f2.rho is not None and f2.role == "factor2":
        if not rate_admissible(window.schedule, f2, window.d1):
            violated = True
            warnings.warn("window schedule does not satisfy the rate condition", stacklevel=2)
    if sampler is None:
        grid = GridSpec(window, t, h)
        sampler = CirculantSampler(C, grid)
    grid = sampler.grid
    y = ensemble_values(sampler, phi, grid, n_reps, master_seed, threads)
    results = [FunctionalResult(grid.t, float(v), grid.n_active * grid.cell_volume,
                                grid.cell_volume) for v in y]
    ens = ReplicateEnsemble(results, grid.t, master_seed, sampler.method, sampler.clipped_mass,
                            violated)
    ens.stats = jackknife_kstats(y)
    return ens
