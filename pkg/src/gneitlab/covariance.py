"""Radial covariance factors and their Gneiting composition.

A Gneiting space-time covariance on R^{d1} x R^{d2} is built from two radial
profiles,

    C(x1, x2) = c2(|x2|) * c1(|x1| * c2(|x2|)**(1/d1)),

where ``c1`` is completely monotone and ``1/c2`` has a completely monotone
derivative.  Only whitelisted parametric families are accepted; their validity
ranges are certified analytically and double-checked numerically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidParams, Unsupported

FAMILIES = ("gen-cauchy", "exponential", "inv-bernstein", "user-table")
ROLES = ("factor1", "factor2")

# centered finite-difference stencils (offsets in units of h, weights, divisor power)
_FD_STENCILS = {
    1: ((-1, 1), (-0.5, 0.5)),
    2: ((-1, 0, 1), (1.0, -2.0, 1.0)),
    3: ((-2, -1, 1, 2), (-0.5, 1.0, -1.0, 0.5)),
    4: ((-2, -1, 0, 1, 2), (1.0, -4.0, 6.0, -4.0, 1.0)),
}


def _log_grid(r_min=1e-3, r_max=1e3, ratio=1.05):
    n = int(math.ceil(math.log(r_max / r_min) / math.log(ratio))) + 1
    return r_min * ratio ** np.arange(n)


def fd_derivative(f, r, order, ratio=1.05):
    """Centered finite difference of ``f`` at ``r`` with step ``(ratio - 1) * r``.

    Returns the derivative estimate and a scale (max |f| on the stencil divided
    by h**order) against which roundoff-level violations are judged.
    """
    r = np.asarray(r, dtype=float)
    h = (ratio - 1.0) * r
    offsets, weights = _FD_STENCILS[order]
    vals = [f(r + o * h) for o in offsets]
    deriv = sum(w * v for w, v in zip(weights, vals)) / h**order
    scale = np.max(np.abs(vals), axis=0) / h**order
    return deriv, scale


def check_complete_monotonicity(f, max_order=4, r_min=1e-3, r_max=1e3, ratio=1.05, tol=1e-8,
                                shift=0):
    """Sampled check of (-1)^n f^(n) >= 0 for n = 0..max_order on a log grid.

    With ``shift=1`` the pattern is checked on the derivative of ``f``, i.e.
    (-1)^n f^(n+1) >= 0 for derivative orders up to ``max_order``, which is
    the condition placed on ``1/c2``.

    Returns ``(ok, worst)`` where ``worst`` is the most negative normalized
    signed derivative encountered.
    """
    r = _log_grid(r_min, r_max, ratio)
    worst = np.inf
    for n in range(0, max_order + 1 - shift):
        order = n + shift
        if order == 0:
            signed = np.asarray(f(r), dtype=float)
            scale = np.abs(signed)
        else:
            deriv, scale = fd_derivative(f, r, order, ratio)
            signed = (-1) ** n * deriv
        with np.errstate(divide="ignore", invalid="ignore"):
            normed = np.where(scale > 0, signed / scale, 0.0)
        worst = min(worst, float(np.min(normed)))
    return worst >= -tol, worst


@dataclass(frozen=True)
class RadialCovariance:
    """A validated radial profile c(r) living in R^dim.

    ``rho`` is the regular-variation index of the tail (``math.inf`` for the
    exponential family, ``None`` for a user table without a declared index).
    """

    family: str
    params: tuple
    dim: int
    role: str = "factor1"
    rho: float | None = None
    _table: tuple = field(default=(), repr=False, compare=False)

    def __call__(self, r):
        r = np.abs(np.asarray(r, dtype=float))
        p = self.params
        if self.family == "gen-cauchy":
            gamma, rho = p
            return (1.0 + r**gamma) ** (-rho / gamma)
        if self.family == "exponential":
            (a,) = p
            return np.exp(-a * r)
        if self.family == "inv-bernstein":
            a, gamma, beta = p
            return (1.0 + a * r**gamma) ** (-beta)
        if self.family == "user-table":
            rs, cs = self._table
            out = np.interp(r, rs, cs)
            beyond = r > rs[-1]
            if np.any(beyond) and self.rho not in (None, 0.0):
                out = np.where(beyond, cs[-1] * (np.maximum(r, rs[-1]) / rs[-1]) ** (-self.rho), out)
            return out
        raise Unsupported(f"unknown family {self.family!r}")

    @property
    def short_range(self):
        return self.rho is not None and math.isinf(self.rho)

    def to_json(self):
        d = {"family": self.family, "params": list(self.params), "dim": self.dim, "role": self.role}
        if self.family == "user-table" and self.rho is not None:
            d["rho"] = self.rho
        return d

    @classmethod
    def from_json(cls, obj):
        allowed = {"family", "params", "dim", "role", "rho"}
        extra = set(obj) - allowed
        if extra:
            raise InvalidParams(f"unknown keys in covariance spec: {sorted(extra)}")
        try:
            return make_radial(obj["family"], obj["params"], obj["dim"],
                               role=obj.get("role", "factor1"), rho=obj.get("rho"))
        except KeyError as exc:
            raise InvalidParams(f"covariance spec missing key {exc}") from None


def _require(cond, message, condition):
    if not cond:
        raise InvalidParams(message, condition)


def make_radial(family, params, dim, role="factor1", rho=None):
    """Build and validate a radial covariance profile.

    Parameters
    ----------
    family : {"gen-cauchy", "exponential", "inv-bernstein", "user-table"}
        ``gen-cauchy`` takes ``(gamma, rho)`` with c(r) = (1 + r^gamma)^(-rho/gamma);
        ``exponential`` takes ``(a,)`` with c(r) = exp(-a r);
        ``inv-bernstein`` takes ``(a, gamma, beta)`` with c(r) = (1 + a r^gamma)^(-beta);
        ``user-table`` takes a flat list ``[r0, c0, r1, c1, ...]``.
    params : sequence of float
    dim : int
        Dimension of the space the factor lives in.
    role : {"factor1", "factor2"}
        ``factor1`` requires complete monotonicity of c; ``factor2`` requires
        1/c to have a completely monotone derivative.
    rho : float, optional
        Declared tail index, only used by ``user-table``.
    """
    if family not in FAMILIES:
        raise InvalidParams(f"unknown family {family!r}; expected one of {FAMILIES}", "family")
    if role not in ROLES:
        raise InvalidParams(f"unknown role {role!r}", "role")
    if int(dim) != dim or dim < 1:
        raise InvalidParams(f"dim must be a positive integer, got {dim!r}", "dim")
    dim = int(dim)
    params = tuple(float(p) for p in params)
    table = ()

    if family == "gen-cauchy":
        _require(len(params) == 2, "gen-cauchy takes (gamma, rho)", "arity")
        gamma, index = params
        _require(0.0 < gamma <= 1.0, f"gen-cauchy needs gamma in (0, 1], got {gamma}",
                 "complete monotonicity of c")
        _require(index > 0.0, f"gen-cauchy needs rho > 0, got {index}", "positive index")
        if role == "factor2":
            _require(index <= 1.0,
                     f"gen-cauchy as factor2 needs rho <= 1 (got {index}): derivative of 1/c2 "
                     "is not completely monotone",
                     "1/c2 derivative completely monotone")
        tail = index
    elif family == "exponential":
        _require(len(params) == 1, "exponential takes (a,)", "arity")
        (a,) = params
        _require(a > 0.0, f"exponential needs a > 0, got {a}", "positive rate")
        _require(role == "factor1",
                 "exponential cannot be factor2: 1/c2 = exp(a r) has a derivative that is not "
                 "completely monotone",
                 "1/c2 derivative completely monotone")
        tail = math.inf
    elif family == "inv-bernstein":
        _require(len(params) == 3, "inv-bernstein takes (a, gamma, beta)", "arity")
        a, gamma, beta = params
        _require(a > 0.0, f"inv-bernstein needs a > 0, got {a}", "positive scale")
        _require(0.0 < gamma <= 1.0, f"inv-bernstein needs gamma in (0, 1], got {gamma}",
                 "complete monotonicity of c")
        _require(beta > 0.0, f"inv-bernstein needs beta > 0, got {beta}", "positive index")
        if role == "factor2":
            _require(beta <= 1.0,
                     f"inv-bernstein as factor2 needs beta <= 1 (got {beta})",
                     "1/c2 derivative completely monotone")
        tail = gamma * beta
    else:
        _require(len(params) >= 4 and len(params) % 2 == 0,
                 "user-table takes a flat list [r0, c0, r1, c1, ...] with at least two knots",
                 "arity")
        rs = np.array(params[0::2])
        cs = np.array(params[1::2])
        _require(rs[0] == 0.0 and cs[0] == 1.0, "user-table must start at (0, 1)", "unit variance")
        _require(bool(np.all(np.diff(rs) > 0)), "user-table radii must increase", "ordering")
        _require(bool(np.all(np.diff(cs) <= 0)), "user-table values must not increase",
                 "monotonicity")
        _require(bool(np.all((cs >= 0) & (cs <= 1))), "user-table values must lie in [0, 1]",
                 "range")
        if rho is not None:
            _require(rho >= 0, "declared rho must be >= 0", "positive index")
        table = (rs, cs)
        tail = None if rho is None else float(rho)

    cov = RadialCovariance(family, params, dim, role, tail, table)
    if family != "user-table":
        if role == "factor1":
            ok, worst = check_complete_monotonicity(cov)
            _require(ok, f"numerical complete-monotonicity check failed (worst {worst:.2e})",
                     "complete monotonicity of c")
        else:
            ok, worst = check_complete_monotonicity(lambda r: 1.0 / cov(r), shift=1)
            _require(ok, f"numerical check of (1/c2)' failed (worst {worst:.2e})",
                     "1/c2 derivative completely monotone")
    return cov


def lq_membership(c, q):
    """Classify whether the radial covariance ``c`` is in L^q(R^dim).

    Decided from the tail index alone: integrable iff q * rho > dim.
    """
    if q <= 0:
        raise ValueError("q must be positive")
    if c.rho is None:
        raise Unsupported("user-table profile without a declared rho")
    if math.isinf(c.rho):
        return "integrable"
    lhs = q * c.rho
    if math.isclose(lhs, c.dim, rel_tol=1e-12, abs_tol=1e-15):
        return "borderline"
    return "integrable" if lhs > c.dim else "non-integrable"


def _certified(c):
    return c.family != "user-table"


class _ProductKernel:
    d1: int
    d2: int

    def __call__(self, x1, x2):
        x1 = np.atleast_1d(np.asarray(x1, dtype=float))
        x2 = np.atleast_1d(np.asarray(x2, dtype=float))
        if x1.shape[-1] != self.d1 or x2.shape[-1] != self.d2:
            raise ValueError(f"expected points in R^{self.d1} x R^{self.d2}")
        r1 = np.linalg.norm(x1, axis=-1)
        r2 = np.linalg.norm(x2, axis=-1)
        out = self.evaluate(r1, r2)
        return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class GneitingCovariance(_ProductKernel):
    """C(x1, x2) = c2(|x2|) c1(|x1| c2(|x2|)^(1/d1))."""

    factor1: RadialCovariance
    factor2: RadialCovariance

    @property
    def d1(self):
        return self.factor1.dim

    @property
    def d2(self):
        return self.factor2.dim

    @property
    def valid(self):
        return (self.factor1.role == "factor1" and self.factor2.role == "factor2"
                and _certified(self.factor1) and _certified(self.factor2))

    def evaluate(self, r1, r2):
        """Evaluate at radial distances ``r1 = |x1|`` and ``r2 = |x2|`` (broadcasting)."""
        c2 = self.factor2(r2)
        return c2 * self.factor1(np.asarray(r1, dtype=float) * c2 ** (1.0 / self.d1))

    def to_json(self):
        return {"model": "gneiting", "factor1": self.factor1.to_json(),
                "factor2": self.factor2.to_json()}


@dataclass(frozen=True)
class SeparableCovariance(_ProductKernel):
    """Tensor-product covariance C(x1, x2) = c1(|x1|) c2(|x2|)."""

    factor1: RadialCovariance
    factor2: RadialCovariance

    @property
    def d1(self):
        return self.factor1.dim

    @property
    def d2(self):
        return self.factor2.dim

    @property
    def valid(self):
        return _certified(self.factor1) and _certified(self.factor2)

    def evaluate(self, r1, r2):
        return self.factor1(r1) * self.factor2(r2)

    def to_json(self):
        return {"model": "separable", "factor1": self.factor1.to_json(),
                "factor2": self.factor2.to_json()}


def make_gneiting(factor1, factor2):
    if factor1.role != "factor1":
        raise InvalidParams("first factor must be validated in the factor1 role", "role")
    if factor2.role != "factor2":
        raise InvalidParams("second factor must be validated in the factor2 role", "role")
    return GneitingCovariance(factor1, factor2)


def eval_gneiting(C, x1, x2):
    """Evaluate a valid Gneiting covariance at a single point (x1, x2)."""
    if not C.valid:
        raise InvalidParams("covariance is not certified valid", "validity")
    return float(C(np.atleast_1d(x1), np.atleast_1d(x2)))


def covariance_from_json(obj):
    """Build a two-block covariance model from its JSON description."""
    allowed = {"model", "factor1", "factor2"}
    extra = set(obj) - allowed
    if extra:
        raise InvalidParams(f"unknown keys in covariance model: {sorted(extra)}")
    model = obj.get("model", "gneiting")
    f1 = RadialCovariance.from_json(obj["factor1"])
    f2 = RadialCovariance.from_json(obj["factor2"])
    if model == "gneiting":
        return make_gneiting(f1, f2)
    if model == "separable":
        return SeparableCovariance(f1, f2)
    raise InvalidParams(f"unknown covariance model {model!r}")
