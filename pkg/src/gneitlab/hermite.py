"""Probabilists' Hermite polynomials, expansion coefficients and Hermite rank.

A square-integrable ``phi`` of a standard normal ``N`` expands as

    phi(x) = sum_q a_q H_q(x),    a_q = E[H_q(N) phi(N)] / q!,

with ``H_{q+1}(x) = x H_q(x) - q H_{q-1}(x)``.  The rank is the first
``q >= 1`` with ``a_q != 0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import integrate
from scipy.special import ndtr, roots_hermitenorm

from .errors import HermiteOverflow, InvalidParams, QuadratureNotConverged, RankNotFound

KINDS = ("hermite-poly", "indicator-abs", "indicator", "power", "user-callable")

Q_MAX_DEFAULT = 40
RANK_TOL_DEFAULT = 1e-10
_SQRT_2PI = math.sqrt(2 * math.pi)


def _std_normal_pdf(x):
    return np.exp(-0.5 * np.square(x)) / _SQRT_2PI


def hermite_poly(q, x):
    """H_q(x) by the three-term recurrence.

    Raises HermiteOverflow for ``q > 60`` combined with ``|x| > 30`` and
    whenever the recurrence leaves the float range.
    """
    if int(q) != q or q < 0:
        raise ValueError("q must be a nonnegative integer")
    q = int(q)
    x = np.asarray(x, dtype=float)
    if q > 60 and np.any(np.abs(x) > 30):
        raise HermiteOverflow(f"H_{q} at |x| > 30 exceeds the supported range")
    h_prev = np.ones_like(x)
    if q == 0:
        return h_prev if h_prev.ndim else float(h_prev)
    h = x.copy()
    with np.errstate(over="ignore", invalid="ignore"):
        for n in range(1, q):
            h_prev, h = h, x * h - n * h_prev
    if not np.all(np.isfinite(h)):
        raise HermiteOverflow(f"H_{q} overflowed")
    return h if h.ndim else float(h)


def hermite_table(qmax, x):
    """Array of H_0..H_qmax evaluated at ``x`` (first axis = order)."""
    x = np.asarray(x, dtype=float)
    out = np.empty((qmax + 1,) + x.shape)
    out[0] = 1.0
    if qmax >= 1:
        out[1] = x
    for n in range(1, qmax):
        out[n + 1] = x * out[n] - n * out[n - 1]
    return out


def gauss_expectation(func, nodes=200):
    """E[func(N)] by Gauss-Hermite quadrature under the probabilists' weight."""
    x, w = roots_hermitenorm(nodes)
    return float(np.sum(w * func(x)) / _SQRT_2PI)


def _quad_coeffs(func, qmax, nodes):
    x, w = roots_hermitenorm(nodes)
    fx = np.asarray(func(x), dtype=float)
    H = hermite_table(qmax, x)
    inv_fact = np.array([1.0 / math.factorial(q) for q in range(qmax + 1)])
    return (H @ (w * fx)) / _SQRT_2PI * inv_fact


def _indicator_coeffs(u, qmax, absolute):
    """Closed-form coefficients of 1(x >= u) or 1(|x| >= u).

    Uses  int_u^inf H_q(x) pdf(x) dx = H_{q-1}(u) pdf(u)  for q >= 1.
    """
    a = np.zeros(qmax + 1)
    tail = 1.0 - float(ndtr(u))
    a[0] = 2 * tail if absolute else tail
    if qmax >= 1:
        H = hermite_table(qmax - 1, u)
        pdf_u = float(_std_normal_pdf(u))
        for q in range(1, qmax + 1):
            val = H[q - 1] * pdf_u / math.factorial(q)
            if absolute:
                val = 2 * val if q % 2 == 0 else 0.0
            a[q] = val
    return a


@dataclass(frozen=True)
class HermiteFunctional:
    """A functional phi with its Hermite coefficients up to ``qmax``.

    Attributes
    ----------
    kind : str
        One of ``hermite-poly``, ``indicator-abs``, ``indicator``, ``power``,
        ``user-callable``.
    param : float or None
        q for ``hermite-poly``, the level u for indicators, the exponent p for
        ``power``.
    coeffs : tuple of float
        a_0 .. a_qmax.
    rank : int
    """

    kind: str
    param: Optional[float]
    qmax: int
    coeffs: tuple
    rank: int
    func: Optional[Callable] = field(default=None, compare=False, repr=False)

    @property
    def a0(self):
        return self.coeffs[0]

    @property
    def l2_norm_sq(self):
        """sum_{q <= qmax} q! a_q^2 (includes the q = 0 term)."""
        return float(sum(math.factorial(q) * a * a for q, a in enumerate(self.coeffs)))

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "hermite-poly":
            return hermite_poly(int(self.param), x)
        if self.kind == "indicator-abs":
            return (np.abs(x) >= self.param).astype(float)
        if self.kind == "indicator":
            return (x >= self.param).astype(float)
        if self.kind == "power":
            return x ** int(self.param)
        return np.asarray(self.func(x), dtype=float)

    def second_moment(self):
        """E[phi(N)^2], in closed form where available."""
        if self.kind == "hermite-poly":
            return float(math.factorial(int(self.param)))
        if self.kind == "indicator-abs":
            return 2 * (1.0 - float(ndtr(self.param)))
        if self.kind == "indicator":
            return 1.0 - float(ndtr(self.param))
        if self.kind == "power":
            p = int(self.param)
            return float(np.prod(np.arange(2 * p - 1, 0, -2))) if p > 0 else 1.0
        return _adaptive_expectation(lambda x: self(x) ** 2)

    def variance(self):
        return self.second_moment() - self.a0**2

    def parseval_deficit(self):
        """E[phi^2] minus the truncated sum of q! a_q^2; nonnegative up to roundoff."""
        return self.second_moment() - self.l2_norm_sq

    def to_json(self):
        if self.kind == "user-callable":
            raise InvalidParams("user-callable functionals are not serializable")
        return {"kind": self.kind, "param": self.param, "Qmax": self.qmax}


def _adaptive_expectation(func):
    val, _ = integrate.quad(lambda x: func(x) * _std_normal_pdf(x), -np.inf, np.inf,
                            epsabs=1e-13, epsrel=1e-12, limit=200)
    return val


def hermite_coeff(phi, q, nodes=200, tol=1e-10):
    """Hermite coefficient a_q of ``phi``.

    ``phi`` is a HermiteFunctional (closed forms are used for the polynomial
    and indicator kinds) or a plain callable, which is integrated with
    ``nodes``-point Gauss-Hermite quadrature.  The quadrature is repeated with
    twice the nodes and must agree to ``tol``.
    """
    if isinstance(phi, HermiteFunctional):
        if q <= phi.qmax and phi.kind != "user-callable":
            return phi.coeffs[q]
        func = phi
    else:
        func = phi
    first = _quad_coeffs(func, q, nodes)[q]
    second = _quad_coeffs(func, q, 2 * nodes)[q]
    if abs(first - second) > tol * max(1.0, abs(second)):
        raise QuadratureNotConverged(
            f"a_{q}: {nodes} nodes give {first:.12g}, {2 * nodes} nodes give {second:.12g}")
    return float(first)


def hermite_rank(phi, rank_tol=RANK_TOL_DEFAULT, qmax=None):
    """Smallest q >= 1 with |a_q| > rank_tol.

    ``phi`` may be a HermiteFunctional, a coefficient sequence, or a callable
    (its coefficients are then computed by quadrature up to ``qmax``).
    """
    if isinstance(phi, HermiteFunctional):
        coeffs = phi.coeffs
    elif callable(phi):
        top = Q_MAX_DEFAULT if qmax is None else qmax
        coeffs = [hermite_coeff(phi, q) for q in range(top + 1)]
    else:
        coeffs = phi
    qmax = len(coeffs) - 1 if qmax is None else min(qmax, len(coeffs) - 1)
    for q in range(1, qmax + 1):
        if abs(coeffs[q]) > rank_tol:
            return q
    raise RankNotFound(qmax)


def make_functional(kind, param=None, qmax=Q_MAX_DEFAULT, func=None, rank_tol=RANK_TOL_DEFAULT,
                    nodes=200):
    """Build a HermiteFunctional with its coefficient table and rank."""
    if kind not in KINDS:
        raise InvalidParams(f"unknown functional kind {kind!r}")
    if int(qmax) != qmax or qmax < 1:
        raise InvalidParams("Qmax must be a positive integer")
    qmax = int(qmax)
    if kind == "hermite-poly":
        if param is None or int(param) != param or param < 0:
            raise InvalidParams("hermite-poly needs a nonnegative integer order")
        a = np.zeros(qmax + 1)
        if param <= qmax:
            a[int(param)] = 1.0
        coeffs = a
    elif kind in ("indicator-abs", "indicator"):
        if param is None or not np.isfinite(param):
            raise InvalidParams("indicator functionals need a finite level u")
        if kind == "indicator-abs" and param < 0:
            raise InvalidParams("indicator-abs needs u >= 0")
        coeffs = _indicator_coeffs(float(param), qmax, kind == "indicator-abs")
    elif kind == "power":
        if param is None or int(param) != param or param < 1:
            raise InvalidParams("power functional needs an integer exponent p >= 1")
        # x^p is a polynomial of degree p, so Gauss-Hermite is exact
        coeffs = _quad_coeffs(lambda x: x ** int(param), qmax, nodes)
        coeffs[int(param) + 1:] = 0.0
    else:
        if func is None:
            raise InvalidParams("user-callable functional needs func")
        coeffs = np.array([hermite_coeff(func, q, nodes) for q in range(qmax + 1)])
    coeffs = tuple(float(c) for c in coeffs)
    rank = hermite_rank(coeffs, rank_tol)
    return HermiteFunctional(kind, None if param is None else float(param), qmax, coeffs, rank,
                             func)


def functional_from_json(obj):
    extra = set(obj) - {"kind", "param", "Qmax"}
    if extra:
        raise InvalidParams(f"unknown keys in functional spec: {sorted(extra)}")
    if "kind" not in obj:
        raise InvalidParams("functional spec missing 'kind'")
    return make_functional(obj["kind"], obj.get("param"), obj.get("Qmax", Q_MAX_DEFAULT))
