"""Cyclic-product integrals of kernels over bodies and product windows.

For a kernel f and a body D the normalised coefficient is

    c_k(D; f) = int_{D^k} f(x1 - x2) ... f(xk - x1) dx / (int_{D^2} f(x1 - x2)^2 dx)^{k/2}.

Three engines are provided.

monte-carlo
    x1 is uniform in D and the consecutive differences z_i = x_{i+1} - x_i
    are drawn from a radial density proportional to |z|^{-s} on the ball of
    radius diam(D), which contains D - D.  The closing factor is f(sum z_i).
    Numerator and denominator use the same draws (the denominator only the
    first pair), so c_2 = 1 holds sample by sample.
quasi-monte-carlo
    Scrambled Sobol points in D^k, for non-singular kernels only.
tensor-quadrature
    Piecewise-constant Galerkin discretisation of the integral operator on an
    interval, traces of its powers at three resolutions, Aitken extrapolation.

Windows t D are handled in unit coordinates: c_k(t D; f) = c_k(D; f(t .)).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import linalg
from scipy.stats import qmc

from .errors import InvalidAlpha, InvalidParams, SingularityBudget, Unsupported
from .fieldsim import philox_generator
from .geometry import ConvexBody, unit_sphere_area

METHODS = ("monte-carlo", "quasi-monte-carlo", "tensor-quadrature")
K_MAX = 8
N_GROUPS = 32
_CHUNK = 1 << 15
_REL_BUDGET = 0.05


# -- kernels ---------------------------------------------------------------

@dataclass(frozen=True)
class PowerLawKernel:
    """f(z) = |z|^{-alpha} on R^dim."""

    alpha: float
    dim: int = 1

    blocks = 1
    singular = True

    def __post_init__(self):
        if not self.alpha >= 0:
            raise InvalidAlpha("alpha must be nonnegative")
        if self.alpha >= self.dim / 2:
            raise InvalidAlpha(f"alpha={self.alpha} must be below d/2={self.dim / 2}")

    @property
    def dims(self):
        return (self.dim,)

    def proposal_exponents(self):
        return (2 * self.alpha,)

    def radial(self, r):
        if self.alpha == 0:
            return np.ones_like(r)
        with np.errstate(divide="ignore"):
            return r ** (-self.alpha)

    def __call__(self, *radii):
        return self.radial(radii[0])


@dataclass(frozen=True)
class RadialKernel:
    """f(z) = c(scale |z|), divided by c(scale) when ``normalize`` is set."""

    c: object
    scale: float = 1.0
    normalize: bool = False

    blocks = 1
    singular = False

    @property
    def dims(self):
        return (self.c.dim,)

    def proposal_exponents(self):
        return (_cov_exponent(self.c.rho, self.c.dim),)

    def with_scale(self, scale):
        return RadialKernel(self.c, scale, self.normalize)

    def radial(self, r):
        v = self.c(self.scale * r)
        return v / float(self.c(self.scale)) if self.normalize else v

    def __call__(self, *radii):
        return self.radial(radii[0])


@dataclass(frozen=True)
class ProductWindowKernel:
    """Two-block kernel (z1, z2) -> C(t1 z1, t2 z2) for a space-time covariance C."""

    C: object
    scales: tuple = (1.0, 1.0)

    blocks = 2
    singular = False

    @property
    def dims(self):
        return (self.C.d1, self.C.d2)

    def proposal_exponents(self):
        return (_cov_exponent(self.C.factor1.rho, self.C.d1),
                _cov_exponent(self.C.factor2.rho, self.C.d2))

    def with_scale(self, scales):
        return ProductWindowKernel(self.C, tuple(scales))

    def __call__(self, r1, r2):
        return self.C.evaluate(self.scales[0] * r1, self.scales[1] * r2)


def _cov_exponent(rho, d):
    if rho is None or math.isinf(rho):
        return 0.9 * d
    return min(2 * rho, 0.9 * d)


def kernel_from_spec(spec):
    """Kernel from a JSON-like descriptor.

    ``{"kind": "power-law", "alpha": a, "dim": d}`` or
    ``{"kind": "radial-cov", "cov": {...radial spec...}, "scale": s}``.
    """
    from .covariance import RadialCovariance

    kind = spec.get("kind")
    if kind == "power-law":
        return PowerLawKernel(float(spec["alpha"]), int(spec.get("dim", 1)))
    if kind == "radial-cov":
        return RadialKernel(RadialCovariance.from_json(spec["cov"]), float(spec.get("scale", 1)))
    raise InvalidParams(f"unknown kernel kind {kind!r}")


@dataclass
class CyclicCoefficient:
    """c_k with its un-normalised numerator and the k = 2 denominator."""

    k: int
    value: float
    method: str
    stderr: Optional[float]
    n_points: int
    numerator: float = math.nan
    denominator: float = math.nan

    def as_row(self):
        return (self.k, self.value, self.stderr, self.n_points)


# -- Monte Carlo engine ----------------------------------------------------

def _as_blocks(domain):
    if isinstance(domain, ConvexBody):
        return (domain,)
    if hasattr(domain, "body1"):
        return (domain.body1, domain.body2)
    return tuple(domain)


def _draw_block(rng, body, s, k, n):
    """Importance-sampled cycle in one block.

    Returns radii of the k cycle edges (shape (k, n)), the full-cycle weight
    (zero when a point leaves the body) and the weight for the first pair.
    """
    d = body.dim
    R = body.diam
    norm = unit_sphere_area(d) * R ** (d - s) / (d - s)
    x = body.sample_uniform(rng, n)
    inside = np.ones(n, dtype=bool)
    radii = np.empty((k, n))
    inv_q = np.ones(n)
    total = np.zeros((n, d))
    w_pair = None
    for i in range(k - 1):
        r = R * rng.random(n) ** (1.0 / (d - s))
        if d == 1:
            u = np.where(rng.random(n) < 0.5, -1.0, 1.0)[:, None]
        else:
            u = rng.standard_normal((n, d))
            u /= np.linalg.norm(u, axis=1, keepdims=True)
        z = u * r[:, None]
        x = x + z
        total += z
        inside &= body.contains(x)
        radii[i] = r
        inv_q *= norm * r**s
        if i == 0:
            w_pair = body.vol * inv_q * inside
    radii[k - 1] = np.linalg.norm(total, axis=1)
    return radii, body.vol * inv_q * inside, w_pair


def _mc_draw(blocks, exps, k, n, rng):
    return [_draw_block(rng, b, s, k, n) for b, s in zip(blocks, exps)]


def _cycle_terms(kernel, draws, k):
    """Per-sample numerator and denominator contributions."""
    radii = [d[0] for d in draws]
    vals = kernel(*radii)
    w_full = np.prod([d[1] for d in draws], axis=0)
    w_pair = np.prod([d[2] for d in draws], axis=0)
    f1 = vals[0]
    num = w_full * np.prod(vals, axis=0) if k > 1 else w_full
    den = w_pair * f1 * f1
    # weights vanish outside the body; avoid 0 * inf from the singular closing edge
    num = np.where(w_full > 0, num, 0.0)
    den = np.where(w_pair > 0, den, 0.0)
    return num, den


def _group_sums(draw_fn, n_total, seed, estimands, groups=N_GROUPS):
    """Sum per-sample estimand arrays within ``groups`` substreams.

    ``estimands(draws)`` returns a list of arrays; the result has shape
    (groups, n_arrays).  Group g uses substreams (seed, g, j), so the output
    does not depend on how the work is scheduled.
    """
    per_group = max(1, n_total // groups)
    out = None
    for g in range(groups):
        done = 0
        j = 0
        while done < per_group:
            m = min(_CHUNK, per_group - done)
            rng = philox_generator(seed, (g << 20) + j)
            arrays = estimands(draw_fn(m, rng))
            sums = np.array([np.sum(a) for a in arrays])
            if out is None:
                out = np.zeros((groups, sums.size))
            out[g] += sums
            done += m
            j += 1
    return out, per_group * groups


def _jackknife(stat, sums, n):
    """Statistic of means and its grouped jackknife standard error."""
    G = sums.shape[0]
    total = sums.sum(axis=0)
    est = stat(total / n)
    m = n - n // G
    reps = np.array([stat((total - sums[g]) / m) for g in range(G)])
    se = math.sqrt((G - 1) / G * np.sum((reps - reps.mean(axis=0)) ** 2, axis=0)) \
        if np.ndim(est) == 0 else np.sqrt((G - 1) / G * np.sum((reps - reps.mean(0)) ** 2, 0))
    return est, se


def _ratio(k):
    return lambda m: m[0] / m[1] ** (k / 2)


def _check_k(k):
    if int(k) != k or k < 2 or k > K_MAX:
        raise InvalidParams(f"k must be an integer in [2, {K_MAX}]")


def _mc_cyclic(kernel, blocks, k, budget, seed, exps=None):
    exps = kernel.proposal_exponents() if exps is None else exps
    draw = lambda m, rng: _mc_draw(blocks, exps, k, m, rng)
    sums, n = _group_sums(draw, budget, seed, lambda dr: _cycle_terms(kernel, dr, k))
    value, se = _jackknife(_ratio(k), sums, n)
    num, den = sums.sum(axis=0) / n
    return CyclicCoefficient(k, float(value), "monte-carlo", float(se), n, float(num), float(den))


# -- quasi-Monte Carlo -----------------------------------------------------

def _qmc_cyclic(kernel, blocks, k, budget, seed, n_scrambles=16):
    dims = [b.dim for b in blocks]
    D = sum(dims) * k
    m = max(4, int(round(math.log2(max(16, budget // n_scrambles)))))
    ests = []
    nums = []
    dens = []
    for rep in range(n_scrambles):
        sob = qmc.Sobol(D, scramble=True, seed=np.random.default_rng([seed, rep]))
        u = sob.random_base2(m).reshape(-1, k, sum(dims))
        radii = []
        w_full = 1.0
        w_pair = 1.0
        off = 0
        for b in blocks:
            lo, side = b.lower, b.sides
            x = lo + u[:, :, off:off + b.dim] * side
            off += b.dim
            inside = b.contains(x)
            box_vol = float(np.prod(side))
            w_full = w_full * box_vol**k * np.all(inside, axis=1)
            w_pair = w_pair * box_vol**2 * inside[:, 0] * inside[:, 1]
            diff = x - np.roll(x, -1, axis=1)
            radii.append(np.linalg.norm(diff, axis=2).T)
        vals = kernel(*radii)
        num = float(np.mean(w_full * np.prod(vals, axis=0)))
        den = float(np.mean(w_pair * vals[0] ** 2))
        nums.append(num)
        dens.append(den)
        ests.append(num / den ** (k / 2))
    # pooled ratio, randomisation spread for the error
    num, den = float(np.mean(nums)), float(np.mean(dens))
    value = num / den ** (k / 2)
    se = float(np.std(ests, ddof=1) / math.sqrt(n_scrambles))
    return CyclicCoefficient(k, value, "quasi-monte-carlo", se, n_scrambles * 2**m, num, den)


# -- tensor quadrature (intervals) ------------------------------------------

_GL_X, _GL_W = np.polynomial.legendre.leggauss(24)


def _cell_integrals(kernel, n, length):
    """v[m] = int_cell_i int_cell_j f(x - y) for |i - j| = m on n equal cells."""
    h = length / n
    m = np.arange(n)
    if isinstance(kernel, PowerLawKernel):
        a = kernel.alpha
        F = lambda u: np.abs(u) ** (2 - a) / ((1 - a) * (2 - a))
        d = m * h
        return F(d + h) + F(d - h) - 2 * F(d)
    # triangle weight (h - |u|) on u in [-h, h], split at 0
    u = 0.5 * h * (_GL_X + 1.0)
    w = 0.5 * h * _GL_W * (h - u)
    lag = m[:, None] * h
    vals = kernel.radial(np.abs(lag + u[None, :])) + kernel.radial(np.abs(lag - u[None, :]))
    return vals @ w


def _galerkin_eigs(kernel, n, length):
    v = _cell_integrals(kernel, n, length)
    h = length / n
    A = linalg.toeplitz(v) / h
    return linalg.eigvalsh(A)


def _aitken(s0, s1, s2):
    d1, d2 = s1 - s0, s2 - s1
    den = d2 - d1
    if den == 0 or not np.isfinite(den) or d1 * d2 <= 0:
        return s2
    return s2 - d2 * d2 / den


def _tensor_traces(kernel, body, ks, n0):
    if body.dim != 1:
        raise Unsupported("tensor quadrature is implemented for intervals only")
    length = float(body.sides[0])
    traces = []
    for n in (n0, 2 * n0, 4 * n0):
        lam = _galerkin_eigs(kernel, n, length)
        traces.append({k: float(np.sum(lam**k)) for k in ks})
    out = {}
    for k in ks:
        s = [tr[k] for tr in traces]
        out[k] = (_aitken(*s), abs(_aitken(*s) - s[2]))
    return out


def _tensor_cyclic(kernel, blocks, k, n0):
    if kernel.blocks != 1:
        raise Unsupported("tensor quadrature needs a single interval block")
    tr = _tensor_traces(kernel, blocks[0], sorted({2, k}), n0)
    num, num_err = tr[k]
    den, den_err = tr[2]
    value = num / den ** (k / 2)
    if k == 2:
        value, err = 1.0, 0.0
    else:
        err = abs(value) * (num_err / abs(num) + k / 2 * den_err / abs(den))
    return CyclicCoefficient(k, float(value), "tensor-quadrature", float(err), 4 * n0,
                             float(num), float(den))


# -- public API --------------------------------------------------------------

def cyclic_integral(kernel, domain, k, method="monte-carlo", budget=200_000, seed=0,
                    enforce_budget=True):
    """Normalised cyclic coefficient c_k(domain; kernel).

    Parameters
    ----------
    kernel : PowerLawKernel, RadialKernel or ProductWindowKernel
    domain : ConvexBody, pair of bodies, or WindowSpec
    k : int
        Cycle length, 2 <= k <= 8.
    method : str
        ``monte-carlo``, ``quasi-monte-carlo`` or ``tensor-quadrature``.
    budget : int
        Number of samples (MC/QMC) or base number of cells (quadrature).

    Raises
    ------
    SingularityBudget
        Monte Carlo relative standard error above 5%.
    """
    _check_k(k)
    if method not in METHODS:
        raise InvalidParams(f"unknown method {method!r}")
    blocks = _as_blocks(domain)
    if tuple(b.dim for b in blocks) != tuple(kernel.dims):
        raise InvalidParams("kernel and domain dimensions differ")
    if isinstance(kernel, PowerLawKernel) and kernel.alpha == 0:
        # constant kernel: both sides are vol(D)^k
        vk = blocks[0].vol ** k
        return CyclicCoefficient(k, 1.0, method, 0.0, 0, vk, vk)
    if method == "tensor-quadrature":
        return _tensor_cyclic(kernel, blocks, k, int(budget))
    if method == "quasi-monte-carlo":
        if kernel.singular and getattr(kernel, "alpha", 0) > 0:
            raise Unsupported("quasi-Monte Carlo is reserved for non-singular kernels")
        res = _qmc_cyclic(kernel, blocks, k, int(budget), seed)
    else:
        res = _mc_cyclic(kernel, blocks, k, int(budget), seed)
    if enforce_budget and res.value > 0 and res.stderr / res.value > _REL_BUDGET:
        raise SingularityBudget(res.stderr / res.value, budget)
    return res


def power_law_cyclic(alpha, body, k, method="monte-carlo", budget=200_000, seed=0):
    """Un-normalised and normalised cyclic integrals of |z|^{-alpha} over a body."""
    return cyclic_integral(PowerLawKernel(alpha, body.dim), body, k, method, budget, seed)


def rosenblatt_ck(alpha, beta, body1, body2, k, budget=200_000, method="monte-carlo", seed=0):
    """c_k^{alpha,beta} = (2 sigma^2)^{-k/2} N_k(D1; alpha) N_k(D2; beta).

    With sigma^2 the product of the two k = 2 numerators this equals
    2^{-k/2} c_k(D1; |.|^-alpha) c_k(D2; |.|^-beta).  The stderr combines the
    two independent block estimates.
    """
    _check_k(k)
    if not 0 < alpha < body1.dim / 2 or not 0 < beta < body2.dim / 2:
        raise InvalidAlpha("need 0 < alpha < d1/2 and 0 < beta < d2/2")
    c1 = cyclic_integral(PowerLawKernel(alpha, body1.dim), body1, k, method, budget, seed)
    c2 = cyclic_integral(PowerLawKernel(beta, body2.dim), body2, k, method, budget, seed + 1)
    value = 2 ** (-k / 2) * c1.value * c2.value
    rel = math.hypot(c1.stderr / c1.value, c2.stderr / c2.value)
    return CyclicCoefficient(k, value, c1.method, value * rel, c1.n_points + c2.n_points,
                             c1.numerator * c2.numerator, c1.denominator * c2.denominator)


def appendixA_sequence(c, body, k, t_values, budget=200_000, seed=0, method="monte-carlo"):
    """Ratios ||C^{ok}||_{L1((tD)^k)} / (t^d c(t))^k for several t.

    In unit coordinates the ratio is the un-normalised cyclic integral of
    c(t|z|)/c(t) over D^k.  Monte Carlo uses one set of draws for all t.
    Returns a list of (value, stderr).
    """
    _check_k(k)
    if c.rho is None or not 0 < c.rho < body.dim / 2:
        raise InvalidAlpha("need a regularly varying profile with 0 < rho < d/2")
    kernels = [RadialKernel(c, float(t), normalize=True) for t in t_values]
    if method == "tensor-quadrature":
        return [(_tensor_cyclic(K, (body,), k, budget).numerator, None) for K in kernels]
    exps = (2 * c.rho,)
    blocks = (body,)
    draw = lambda m, rng: _mc_draw(blocks, exps, k, m, rng)

    def estimands(dr):
        return [_cycle_terms(K, dr, k)[0] for K in kernels]

    sums, n = _group_sums(draw, budget, seed, estimands)
    out = []
    for j in range(len(kernels)):
        est, se = _jackknife(lambda m: m[0], sums[:, j:j + 1], n)
        out.append((float(est), float(se)))
    return out


def appendixA_ratio(c, body, k, t, budget=200_000, seed=0, method="monte-carlo"):
    return appendixA_sequence(c, body, k, [t], budget, seed, method)[0][0]


def separability_gap(C, window, k, t_sequence, budget=200_000, seed=0, factors=None):
    """|c_k(t1 D1 x t2 D2; C) - c_k(t1 D1; C1) c_k(t2 D2; C2*)| along t.

    All three coefficients at every t come from the same draws (per-block
    proposals, unit coordinates), so successive t values are positively
    correlated and the differences are sharp.  ``factors`` defaults to the
    effective separable factors of C.

    Returns a list of dicts with keys t, gap, stderr, joint, separated.
    """
    from .regimes import effective_separable_factors

    _check_k(k)
    if factors is None:
        factors = (C.factor1, C.factor2) if not hasattr(C, "factor2") or \
            type(C).__name__ == "SeparableCovariance" else effective_separable_factors(C, 2)
    f1, f2 = factors
    blocks = (window.body1, window.body2)
    base = ProductWindowKernel(C)
    exps = base.proposal_exponents()
    scales = [(window.schedule.t1(t), window.schedule.t2(t)) for t in t_sequence]
    draw = lambda m, rng: _mc_draw(blocks, exps, k, m, rng)

    def estimands(dr):
        arrays = []
        for s1, s2 in scales:
            arrays.extend(_cycle_terms(base.with_scale((s1, s2)), dr, k))
            arrays.extend(_cycle_terms(RadialKernel(f1, s1), dr[:1], k))
            arrays.extend(_cycle_terms(RadialKernel(f2, s2), dr[1:], k))
        return arrays

    sums, n = _group_sums(draw, budget, seed, estimands)
    r = _ratio(k)

    def stat(m):
        out = []
        for j in range(len(scales)):
            v = m[6 * j:6 * j + 6]
            joint, sep = r(v[0:2]), r(v[2:4]) * r(v[4:6])
            out.extend([joint, sep, joint - sep])
        return np.array(out)

    est, se = _jackknife(stat, sums, n)
    rows = []
    for j, t in enumerate(t_sequence):
        rows.append({"t": float(t), "gap": float(abs(est[3 * j + 2])),
                     "signed_gap": float(est[3 * j + 2]), "stderr": float(se[3 * j + 2]),
                     "joint": float(est[3 * j]), "separated": float(est[3 * j + 1])})
    # paired stderr of successive differences, from the same jackknife
    G = sums.shape[0]
    total = sums.sum(axis=0)
    m_loo = n - n // G
    reps = np.array([stat((total - sums[g]) / m_loo) for g in range(G)])
    gaps = np.abs(reps[:, 2::3])
    for j in range(1, len(rows)):
        diff = gaps[:, j - 1] - gaps[:, j]
        rows[j]["diff_stderr"] = float(math.sqrt((G - 1) / G * np.sum((diff - diff.mean()) ** 2)))
    return rows
