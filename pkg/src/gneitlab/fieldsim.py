"""Gaussian field sampling on regular grids over t1 D1 x t2 D2.

Circulant embedding is the main engine: the covariance is wrapped onto a torus
of ``pad`` times the grid size per axis, its spectrum is taken by FFT, and one
complex FFT of weighted white noise yields two independent fields (real and
imaginary parts).  Small grids fall back to a dense Cholesky factor when the
embedding is not nonnegative definite.

Random streams are keyed by ``(master_seed, block_index)`` through a
counter-based Philox generator.  A block holds a fixed number of replicates
that depends on the grid only, so replicate ``i`` is the same array whatever
the number of worker threads.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.fft
from scipy import linalg

from .errors import EmbeddingFailed, InvalidParams

log = logging.getLogger(__name__)

N_CAP_DEFAULT = 2**22
EPS_CLIP_DEFAULT = 1e-3
CHOLESKY_MAX_NODES = 4096
PAD_FACTORS = (2, 4, 8)
# complex entries per sampling block, bounds memory at about 64 MB
_BLOCK_ENTRIES = 2**22


def philox_generator(master_seed, index):
    """Counter-based generator for substream ``index`` of ``master_seed``."""
    ss = np.random.SeedSequence([int(master_seed) & (2**64 - 1), int(index)])
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class GridSpec:
    """Cell-centred lattice of mesh ``h`` over the window scaled at ``t``.

    Axes are ordered as the d1 coordinates of the first block followed by the
    d2 coordinates of the second.  Ball bodies are sampled on their bounding
    box and restricted with ``mask``.
    """

    window: object
    t: float
    h: float = 1.0
    n_cap: int = N_CAP_DEFAULT
    node_counts: tuple = field(init=False)

    def __post_init__(self):
        if not self.t > 0 or not self.h > 0:
            raise InvalidParams("t and h must be positive")
        counts = []
        for body in self.window.bodies_at(self.t):
            counts.extend(max(1, int(round(s / self.h))) for s in body.sides)
        object.__setattr__(self, "node_counts", tuple(counts))
        if self.n_total > self.n_cap:
            raise InvalidParams(f"grid has {self.n_total} nodes, above the cap {self.n_cap}")

    @property
    def d1(self):
        return self.window.d1

    @property
    def dim(self):
        return len(self.node_counts)

    @property
    def n_total(self):
        return int(np.prod(self.node_counts))

    @property
    def cell_volume(self):
        return self.h**self.dim

    def axis_coords(self):
        out = []
        for body in self.window.bodies_at(self.t):
            lo = body.lower
            for i in range(body.dim):
                n = self.node_counts[len(out)]
                out.append(lo[i] + (np.arange(n) + 0.5) * self.h)
        return out

    @property
    def mask(self):
        """Boolean array of nodes inside the window (None when every node is)."""
        b1, b2 = self.window.bodies_at(self.t)
        if b1.is_box and b2.is_box:
            return None
        coords = np.meshgrid(*self.axis_coords(), indexing="ij")
        pts = np.stack(coords, axis=-1)
        return b1.contains(pts[..., :self.d1]) & b2.contains(pts[..., self.d1:])

    @property
    def n_active(self):
        m = self.mask
        return self.n_total if m is None else int(m.sum())

    def to_json(self):
        return {"window": self.window.to_json(), "t": self.t, "h": self.h,
                "node_counts": list(self.node_counts)}


def _lag_norms(shape, h, d1, wrap):
    """Block-wise Euclidean norms of lag vectors on a (possibly periodic) index grid."""
    axes = []
    for m in shape:
        j = np.arange(m)
        if wrap:
            j = np.minimum(j, m - j)
        axes.append(j * h)
    r1sq = 0.0
    r2sq = 0.0
    for i, a in enumerate(axes):
        sl = [None] * len(shape)
        sl[i] = slice(None)
        term = np.square(a)[tuple(sl)]
        if i < d1:
            r1sq = r1sq + term
        else:
            r2sq = r2sq + term
    full = np.zeros(shape)
    return np.sqrt(full + r1sq), np.sqrt(full + r2sq)


def _node_coordinates(grid):
    idx = np.indices(grid.node_counts).reshape(grid.dim, -1).T
    return idx * grid.h


@dataclass
class FieldSample:
    values: np.ndarray
    seed: int
    method: str
    replicate: int = 0
    clipped_mass: float = 0.0


class CirculantSampler:
    """Reusable sampler for one covariance and grid.

    Parameters
    ----------
    C : covariance model
        Anything with ``d1``, ``d2`` and ``evaluate(r1, r2)``.
    grid : GridSpec
    eps_clip : float
        Largest fraction of spectral mass that may be discarded by clipping.
    """

    def __init__(self, C, grid, eps_clip=EPS_CLIP_DEFAULT):
        if not getattr(C, "valid", True):
            raise InvalidParams("covariance is not certified valid", "validity")
        grid.window.check_dims(C)
        self.C = C
        self.grid = grid
        self.eps_clip = eps_clip
        self.clipped_mass = 0.0
        self.lambda_min = 0.0
        self.pad = None
        self._chol = None
        self._sqrt_lam = None
        self._setup()
        self.block_size = self._block_size()

    @property
    def method(self):
        return "cholesky" if self._chol is not None else "circulant"

    def _spectrum(self, pad):
        shape = tuple(pad * n if n > 1 else 1 for n in self.grid.node_counts)
        r1, r2 = _lag_norms(shape, self.grid.h, self.grid.d1, wrap=True)
        base = self.C.evaluate(r1, r2)
        lam = scipy.fft.fftn(base).real
        return shape, lam

    def _setup(self):
        lam = None
        for pad in PAD_FACTORS:
            shape, lam = self._spectrum(pad)
            lam_max = float(lam.max())
            self.lambda_min = float(lam.min())
            if self.lambda_min >= -1e-12 * lam_max:
                self._accept(shape, lam, pad)
                return
            log.debug("embedding with pad %d has lambda_min %.3e", pad, self.lambda_min)
        neg_mass = float(-lam[lam < 0].sum())
        mass = neg_mass / float(np.abs(lam).sum())
        if mass <= self.eps_clip:
            log.info("clipping negative embedding eigenvalues: discarded mass %.3e", mass)
            self.clipped_mass = mass
            self._accept(shape, lam, PAD_FACTORS[-1])
            return
        if self.grid.n_total <= CHOLESKY_MAX_NODES:
            log.info("circulant embedding failed (mass %.3e), using Cholesky", mass)
            self._setup_cholesky()
            return
        raise EmbeddingFailed(self.lambda_min, -self.eps_clip * float(lam.max()), mass)

    def _accept(self, shape, lam, pad):
        self.pad = pad
        self.shape = shape
        self._sqrt_lam = np.sqrt(np.clip(lam, 0.0, None) / lam.size)

    def _setup_cholesky(self):
        x = _node_coordinates(self.grid)
        d1 = self.grid.d1
        diff = x[:, None, :] - x[None, :, :]
        r1 = np.linalg.norm(diff[..., :d1], axis=-1)
        r2 = np.linalg.norm(diff[..., d1:], axis=-1)
        K = self.C.evaluate(r1, r2)
        try:
            self._chol = linalg.cholesky(K, lower=True)
        except linalg.LinAlgError:
            w, V = linalg.eigh(K)
            self.clipped_mass = float(-w[w < 0].sum() / np.abs(w).sum())
            self._chol = V * np.sqrt(np.clip(w, 0.0, None))

    def _block_size(self):
        """Replicates per random block; a function of the grid alone."""
        if self._chol is not None:
            return 64
        per_pair = int(np.prod(self.shape))
        return 2 * max(1, _BLOCK_ENTRIES // per_pair)

    def sample_block(self, master_seed, block_index, workers=1):
        """All replicates of one block, shape ``(block_size, *node_counts)``."""
        rng = philox_generator(master_seed, block_index)
        nc = self.grid.node_counts
        if self._chol is not None:
            z = rng.standard_normal((self.grid.n_total, self.block_size))
            return (self._chol @ z).T.reshape((self.block_size,) + nc)
        pairs = self.block_size // 2
        w = rng.standard_normal((pairs,) + self.shape) + 1j * rng.standard_normal(
            (pairs,) + self.shape)
        axes = tuple(range(1, len(self.shape) + 1))
        y = scipy.fft.fftn(w * self._sqrt_lam, axes=axes, workers=workers)
        crop = (slice(None),) + tuple(slice(0, n) for n in nc)
        y = y[crop]
        out = np.empty((self.block_size,) + nc)
        out[0::2] = y.real
        out[1::2] = y.imag
        return out

    def replicates(self, master_seed, start, stop, workers=1):
        """Replicates ``start..stop-1`` as one array (deterministic in the index)."""
        bs = self.block_size
        chunks = []
        for b in range(start // bs, (stop - 1) // bs + 1):
            block = self.sample_block(master_seed, b, workers)
            lo = max(start, b * bs) - b * bs
            hi = min(stop, (b + 1) * bs) - b * bs
            chunks.append(block[lo:hi])
        return np.concatenate(chunks, axis=0)

    def sample(self, seed, replicate=0):
        values = self.replicates(seed, replicate, replicate + 1)[0]
        return FieldSample(values, int(seed), self.method, replicate, self.clipped_mass)


def sample_field(C, grid, seed, eps_clip=EPS_CLIP_DEFAULT):
    """One realization of the field on ``grid``."""
    return CirculantSampler(C, grid, eps_clip).sample(seed)


def empirical_cov_check(C, grid, lags, n_reps, seed=0):
    """Compare empirical and theoretical covariances at integer lags.

    ``lags`` are index offsets per grid axis.  Returns rows
    ``(lag, theoretical, empirical, stderr)``; an off-grid lag raises
    InvalidParams.
    """
    nc = np.array(grid.node_counts)
    lags = [tuple(int(v) for v in lag) for lag in lags]
    for lag in lags:
        if len(lag) != grid.dim or np.any(np.abs(lag) >= nc):
            raise InvalidParams(f"lag {lag} is off-grid for node counts {tuple(nc)}")
    sampler = CirculantSampler(C, grid)
    rows = []
    vals = sampler.replicates(seed, 0, n_reps)
    for lag in lags:
        lag_a = np.array(lag)
        base = np.where(lag_a < 0, -lag_a, 0)
        other = base + lag_a
        a = vals[(slice(None),) + tuple(base)]
        b = vals[(slice(None),) + tuple(other)]
        prod = a * b
        x = lag_a * grid.h
        theo = float(C.evaluate(np.linalg.norm(x[:grid.d1]), np.linalg.norm(x[grid.d1:])))
        rows.append((lag, theo, float(prod.mean()), float(prod.std(ddof=1) / math.sqrt(n_reps))))
    return rows


def write_raw(path, sample, grid):
    """Dump a sample: one JSON header line, then little-endian float64 row-major values."""
    header = {"grid": grid.to_json(), "seed": sample.seed, "method": sample.method,
              "replicate": sample.replicate, "dtype": "<f8", "order": "C"}
    with open(path, "wb") as fh:
        fh.write((json.dumps(header, sort_keys=True) + "\n").encode())
        fh.write(np.ascontiguousarray(sample.values, dtype="<f8").tobytes())


def read_raw(path):
    with open(path, "rb") as fh:
        header = json.loads(fh.readline())
        data = np.frombuffer(fh.read(), dtype="<f8")
    return header, data.reshape(header["grid"]["node_counts"])
