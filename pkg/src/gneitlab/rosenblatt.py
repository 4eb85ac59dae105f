"""The two-domain Rosenblatt law: cumulants, characteristic function, density.

A standardized second-chaos variable H = sum_j nu_j (N_j^2 - 1) has

    kappa_k = 2^{k-1} (k-1)! c_k,    c_k = sum_j nu_j^k,
    log E[exp(i xi H)] = 1/2 sum_{k>=2} (2 i xi)^k / k * c_k
                       = sum_j [-1/2 log(1 - 2 i xi nu_j) - i xi nu_j].

For the Rosenblatt law on D1 x D2 the nu_j are the eigenvalues of the
integral operator with kernel |x - y|^{-alpha} |x' - y'|^{-beta}, scaled by
(2 sigma^2)^{-1/2}.  Here they come from a Galerkin discretisation on each
interval.  The series form is only valid for |2 xi| nu_max < 1, so the
density uses the product form over the leading eigenvalues plus a short
cumulant series for the rest of the spectrum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, optimize

from .cyclic import PowerLawKernel, _galerkin_eigs, _tensor_traces
from .errors import InvalidAlpha, InversionUnstable, SeriesDiverging, Unsupported

K_DEFAULT = 40
ALIAS_TOL = 1e-6
_TERM_STOP = 1e-12


def interval_power_norm(alpha, length):
    """int_0^L int_0^L |x - y|^{-2 alpha} dx dy."""
    g = 2 * alpha
    return 2 * length ** (2 - g) / ((1 - g) * (2 - g))


def _block_data(alpha, body, K, n_cells):
    if body.dim != 1:
        raise Unsupported("Rosenblatt spectra are computed on intervals only")
    length = float(body.sides[0])
    kern = PowerLawKernel(alpha, 1)
    traces = _tensor_traces(kern, body, range(3, K + 1), n_cells)
    lam = _galerkin_eigs(kern, 4 * n_cells, length)
    n2 = interval_power_norm(alpha, length)
    tr = {2: n2, **{k: v[0] for k, v in traces.items()}}
    return np.sort(lam)[::-1], tr


@dataclass(eq=False)
class RosenblattSpec:
    """Two-domain Rosenblatt law with its cumulant table and spectrum.

    Attributes
    ----------
    ck : dict
        c_k^{alpha,beta} for k = 2..K (c_2 = 1/2).
    nu : ndarray
        Leading normalized eigenvalues used in the product form.
    tail_ck : dict
        c_k minus the contribution of ``nu``; feeds the tail series.
    """

    alpha: float
    beta: float
    body1: object
    body2: object
    K: int = K_DEFAULT
    ck: dict = field(default_factory=dict)
    nu: np.ndarray = field(default_factory=lambda: np.zeros(0))
    tail_ck: dict = field(default_factory=dict)
    nu_tail_max: float = 0.0

    def cumulants(self, kmax=None):
        """kappa_1..kappa_kmax (kappa_1 = 0, kappa_2 = 1)."""
        kmax = self.K if kmax is None else kmax
        out = [0.0]
        for k in range(2, kmax + 1):
            out.append(2 ** (k - 1) * math.factorial(k - 1) * self.ck[k])
        return out

    @property
    def nu_max(self):
        return float(self.nu[0])


def make_rosenblatt_spec(alpha, beta, body1, body2, K=K_DEFAULT, n_cells=400, n_eigs=4000):
    """Build a RosenblattSpec for intervals D1, D2 (0 < alpha, beta < 1/2)."""
    if not 0 < alpha < body1.dim / 2 or not 0 < beta < body2.dim / 2:
        raise InvalidAlpha("need 0 < alpha < d1/2 and 0 < beta < d2/2")
    if K < 4:
        raise ValueError("K must be at least 4")
    lam1, tr1 = _block_data(alpha, body1, K, n_cells)
    lam2, tr2 = _block_data(beta, body2, K, n_cells)
    sigma2 = tr1[2] * tr2[2]
    scale = 1.0 / math.sqrt(2 * sigma2)
    ck = {k: tr1[k] * tr2[k] * scale**k for k in range(2, K + 1)}
    # leading products of the two discrete spectra
    prod = np.outer(lam1, lam2).ravel() * scale
    J = min(n_eigs, prod.size)
    cut = np.partition(prod, prod.size - J - 1)
    nu = np.sort(cut[prod.size - J:])[::-1]
    nu_next = float(cut[prod.size - J - 1])
    # excluded part of the discrete spectrum, from the factorised power sums
    tail = {k: max(0.0, float(np.sum(lam1**k) * np.sum(lam2**k)) * scale**k
                   - float(np.sum(nu**k))) for k in range(3, K + 1)}
    # the unresolved Hilbert-Schmidt mass goes to the second cumulant only
    tail[2] = 0.5 - float(np.sum(nu**2))
    return RosenblattSpec(alpha, beta, body1, body2, K, ck, nu, tail, nu_next)


def _series_log_cf(ck, xi, K):
    """1/2 sum_{k=2..K} (2 i xi)^k / k c_k with the magnitude of its last term."""
    xi = np.asarray(xi, dtype=float)
    total = np.zeros(xi.shape, dtype=complex)
    last = np.zeros(xi.shape)
    z = 2j * xi
    zk = z * z
    for k in range(2, K + 1):
        term = 0.5 * zk / k * ck[k]
        total = total + term
        last = np.abs(term)
        zk = zk * z
    return total, last


def char_fn(spec, xi, form="series"):
    """Characteristic function E[exp(i xi H)].

    ``form="series"`` sums the cumulant series to order K and raises
    SeriesDiverging when the last term exceeds 1e-8 of the partial sum;
    ``form="product"`` uses the eigenvalue product with a tail series.
    """
    xi_arr = np.asarray(xi, dtype=float)
    if form == "series":
        logcf, last = _series_log_cf(spec.ck, xi_arr, spec.K)
        bad = last > 1e-8 * np.maximum(np.abs(logcf), 1e-300)
        bad &= xi_arr != 0
        if np.any(bad):
            raise SeriesDiverging(
                f"cumulant series not converged at |xi| = {np.max(np.abs(xi_arr[bad])):.4g}")
        out = np.exp(logcf)
    elif form == "product":
        out = np.exp(_product_log_cf(spec, xi_arr))
    else:
        raise ValueError(f"unknown form {form!r}")
    return complex(out) if out.ndim == 0 else out


def _product_log_cf(spec, xi, K=None):
    K = spec.K if K is None else K
    xi = np.asarray(xi, dtype=float)
    flat = xi.ravel()
    out = np.empty(flat.shape, dtype=complex)
    nu = spec.nu
    step = max(1, 2_000_000 // max(nu.size, 1))
    for s in range(0, flat.size, step):
        x = flat[s:s + step, None]
        w = 2j * x * nu[None, :]
        out[s:s + step] = np.sum(-0.5 * np.log1p(-w) - 0.5 * w, axis=1)
    tail, _ = _series_log_cf(spec.tail_ck, flat, K)
    return (out + tail).reshape(xi.shape)


def _cgf_real(spec, theta):
    """log E[exp(theta H)] for real theta < 1/(2 nu_max) (tail by series)."""
    nu = spec.nu
    w = 2 * theta * nu
    main = float(np.sum(-0.5 * np.log1p(-w) - 0.5 * w))
    tail = sum(0.5 * (2 * theta) ** k / k * spec.tail_ck[k] for k in range(2, spec.K + 1))
    return main + tail


def tail_bound(spec, x):
    """Chernoff bound on P(H >= x) (x > 0) or P(H <= x) (x < 0)."""
    if x == 0:
        return 1.0
    if x > 0:
        hi = 0.999 / (2 * spec.nu_max)
        f = lambda th: -(th * x - _cgf_real(spec, th))
        res = optimize.minimize_scalar(f, bounds=(0.0, hi), method="bounded")
    else:
        f = lambda th: -(th * x - _cgf_real(spec, th))
        res = optimize.minimize_scalar(f, bounds=(-50.0, 0.0), method="bounded")
    return float(min(1.0, math.exp(res.fun)))


@dataclass
class Inversion:
    x: np.ndarray
    pdf: np.ndarray
    cdf: np.ndarray
    clip_mass: float
    alias_bound: float
    xi_step: float
    xi_max: float


def _xi_grid(spec, x_lo, x_hi, tol):
    # period long enough that both tails beyond it carry < tol
    period = (x_hi - x_lo) + 2.0
    while tail_bound(spec, x_lo + period) + tail_bound(spec, x_hi - period) > tol:
        period *= 1.25
        if period > 1e4:
            raise InversionUnstable("cannot bound aliasing below tolerance")
    alias = tail_bound(spec, x_lo + period) + tail_bound(spec, x_hi - period)
    dxi = 2 * math.pi / period
    # extent: |cf| below 1e-13, within the radius of the tail series
    xi_max = 10.0
    while abs(np.exp(_product_log_cf(spec, np.array(xi_max)))) > 1e-13:
        xi_max *= 1.5
    radius = 0.25 / max(spec.nu_tail_max, 1e-300)
    if xi_max > radius:
        raise InversionUnstable(f"inversion needs |xi| up to {xi_max:.3g}, beyond the tail "
                                f"series radius {radius:.3g}")
    n = int(math.ceil(xi_max / dxi))
    if n > 200_000:
        raise InversionUnstable("inversion grid too large")
    return dxi, n, alias


def invert(spec, x, tol=ALIAS_TOL, K=None):
    """Density and CDF on the points ``x`` by trapezoidal Fourier inversion.

    The pdf uses xi_j = j dxi (trapezoid), the CDF the Gil-Pelaez integral on
    the shifted grid xi_j = (j + 1/2) dxi.  Negative density values are
    clipped to zero and the clipped mass is reported.
    """
    x = np.asarray(x, dtype=float)
    dxi, n, alias = _xi_grid(spec, float(x.min()), float(x.max()), tol)
    xi = np.arange(n + 1) * dxi
    cf = np.exp(_product_log_cf(spec, xi, K))
    w = np.full(n + 1, dxi)
    w[0] = 0.5 * dxi
    pdf = np.empty(x.shape)
    xim = (np.arange(n) + 0.5) * dxi
    cfm = np.exp(_product_log_cf(spec, xim, K))
    cdf = np.empty(x.shape)
    step = max(1, 4_000_000 // (n + 1))
    flat_x = x.ravel()
    pdf_flat = pdf.ravel()
    cdf_flat = cdf.ravel()
    for s in range(0, flat_x.size, step):
        xs = flat_x[s:s + step, None]
        pdf_flat[s:s + step] = (np.exp(-1j * xs * xi[None, :]) @ (w * cf)).real / math.pi
        im = (np.exp(-1j * xs * xim[None, :]) * (cfm / xim)[None, :]).imag
        cdf_flat[s:s + step] = 0.5 - im.sum(axis=1) * dxi / math.pi
    pdf = pdf_flat.reshape(x.shape)
    cdf = cdf_flat.reshape(x.shape)
    neg = pdf < 0
    clip_mass = 0.0
    if np.any(neg) and x.size > 1:
        dx = np.gradient(x.ravel()).reshape(x.shape)
        clip_mass = float(-np.sum(pdf[neg] * dx[neg]))
    pdf = np.clip(pdf, 0.0, None)
    if alias > tol:
        raise InversionUnstable(f"aliasing bound {alias:.2e} exceeds {tol:.0e}")
    return Inversion(x, pdf, np.clip(cdf, 0.0, 1.0), clip_mass, alias, dxi, n * dxi)


def pdf(spec, x, tol=ALIAS_TOL, K=None):
    return invert(spec, x, tol, K).pdf


def cdf(spec, x, K=None):
    """Single-point CDF by the Gil-Pelaez integral with adaptive quadrature."""
    x = float(x)

    def integrand(u):
        if u == 0:
            return 0.0
        return (np.exp(-1j * u * x + _product_log_cf(spec, np.array(u), K))).imag / u

    # |cf| decays fast enough that a finite upper limit suffices
    upper = 10.0
    while abs(np.exp(_product_log_cf(spec, np.array(upper), K))) > 1e-14:
        upper *= 1.5
    val, _ = integrate.quad(integrand, 0.0, upper, limit=2000, epsabs=1e-12, epsrel=1e-10)
    return float(min(1.0, max(0.0, 0.5 - val / math.pi)))


def rosenblatt_type_cumulants(alpha, body, K, n_cells=400):
    """kappa_1..kappa_K of the one-domain Rosenblatt-type law.

    kappa_k = 2^{k-1} (k-1)! c_k^alpha with the un-normalised cyclic integral
    c_k^alpha of |.|^{-alpha} over body^k.
    """
    if not 0 < alpha < body.dim / 2:
        raise InvalidAlpha("need 0 < alpha < d/2")
    if body.dim != 1:
        from .cyclic import power_law_cyclic
        if K > 8:
            raise Unsupported("beyond intervals cumulants are limited to k <= 8")
        ck = {k: power_law_cyclic(alpha, body, k).numerator for k in range(2, K + 1)}
    else:
        tr = _tensor_traces(PowerLawKernel(alpha, 1), body, range(3, K + 1), n_cells)
        ck = {k: v[0] for k, v in tr.items()}
        ck[2] = interval_power_norm(alpha, float(body.sides[0]))
    return [0.0] + [2 ** (k - 1) * math.factorial(k - 1) * ck[k] for k in range(2, K + 1)]


def moments_from_cumulants(kappas):
    """Raw moments m_1..m_n from cumulants kappa_1..kappa_n (recursive Bell relation)."""
    n = len(kappas)
    m = [1.0]
    for j in range(1, n + 1):
        m.append(sum(math.comb(j - 1, i - 1) * kappas[i - 1] * m[j - i] for i in range(1, j + 1)))
    return m[1:]
