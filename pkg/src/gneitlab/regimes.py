"""Range dependence, variance regimes and limit laws for Gneiting models.

For a functional of Hermite rank R observed on t1 D1 x t2 D2, the variance
grows like t1^e1 * t2^e2 (up to slowly varying factors) with

    case 1  rho1 > d1/R, rho2 > d2/(R-1)                   (d1, d2)
    case 2  rho1 > d1/R, rho2 < d2/(R-1)                   (d1, 2 d2 - (R-1) rho2)
    case 3  rho1 < d1/R, rho2 > d1 d2 / (R (d1 - rho1))    (2 d1 - R rho1, d2)
    case 4  R = 2, rho1 < d1/2, rho2 < d1 d2 / (2 (d1 - rho1))
                                            (2 d1 - 2 rho1, 2 d2 - 2 rho2 (1 - rho1/d1))

Cases 1-3 have Gaussian limits; case 4 has a two-domain Rosenblatt limit with
parameters (rho1, rho2 (1 - rho1/d1)).  Equalities are labelled critical.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
from scipy import integrate

from .covariance import make_radial
from .errors import InvalidParams, SeriesTail, Unsupported
from .geometry import unit_sphere_area

REGIMES = ("case1-gaussian", "case2-gaussian", "case3-gaussian", "case4-rosenblatt",
           "critical", "unsupported", "rank1-gaussian")

_REL = 1e-12


def _eq(a, b):
    if math.isinf(a) or math.isinf(b):
        return a == b
    return math.isclose(a, b, rel_tol=_REL, abs_tol=_REL)


def _gt(a, b):
    return a > b and not _eq(a, b)


def _lt(a, b):
    return a < b and not _eq(a, b)


@dataclass
class RegimeReport:
    regime: str
    exponent1: Optional[float]
    exponent2: Optional[float]
    limit_law: str
    law_params: Optional[tuple] = None
    leading_constant: Optional[float] = None
    inputs_echo: dict = field(default_factory=dict)
    note: str = ""

    def combined_exponent(self, schedule):
        """Exponent of Var(Y(t)) in t for power-law growth t1 = t^g1, t2 = t^g2."""
        if self.exponent1 is None:
            raise Unsupported(f"no exponent claim for regime {self.regime}")
        return schedule.gamma1 * self.exponent1 + schedule.gamma2 * self.exponent2

    def to_json(self):
        d = asdict(self)
        if d["law_params"] is not None:
            d["law_params"] = {"alpha": self.law_params[0], "beta": self.law_params[1]}
        d["inputs_echo"] = {k: (None if isinstance(v, float) and math.isinf(v) else v)
                            for k, v in self.inputs_echo.items()}
        d["inputs_echo"].update({f"{k}_is_inf": True for k, v in self.inputs_echo.items()
                                 if isinstance(v, float) and math.isinf(v)})
        return d


def _check_inputs(d1, d2, R, rho1, rho2):
    if d1 < 1 or d2 < 1 or int(d1) != d1 or int(d2) != d2:
        raise InvalidParams("dimensions must be positive integers")
    if int(R) != R or R < 1:
        raise InvalidParams("Hermite rank must be a positive integer")
    if not (rho1 > 0 and rho2 > 0):
        raise InvalidParams("tail indices must be positive (math.inf for exponential decay)")


def range_dependence(rho1, rho2, d1, d2, R):
    """'long' iff R = 1, or rho1 <= d1/R, or rho2 <= d2/(R-1)."""
    _check_inputs(d1, d2, R, rho1, rho2)
    if R == 1:
        return "long"
    if rho1 < d1 / R or _eq(rho1, d1 / R) or rho2 < d2 / (R - 1) or _eq(rho2, d2 / (R - 1)):
        return "long"
    return "short"


def classify(d1, d2, R, rho1, rho2):
    """Regime, variance exponents and limit law for (d1, d2, R, rho1, rho2).

    Tail indices may be ``math.inf`` for exponentially decaying factors.
    """
    _check_inputs(d1, d2, R, rho1, rho2)
    echo = {"d1": d1, "d2": d2, "R": R, "rho1": float(rho1), "rho2": float(rho2)}
    if R == 1:
        return RegimeReport("rank1-gaussian", None, None, "gaussian", inputs_echo=echo,
                            note="rank 1: the functional is asymptotically Gaussian")
    b1 = d1 / R
    b2 = d2 / (R - 1)
    if _gt(rho1, b1):
        if _gt(rho2, b2):
            return RegimeReport("case1-gaussian", float(d1), float(d2), "gaussian",
                                inputs_echo=echo)
        if _lt(rho2, b2):
            return RegimeReport("case2-gaussian", float(d1), 2 * d2 - (R - 1) * rho2,
                                "gaussian", inputs_echo=echo)
        return RegimeReport("critical", None, None, "unknown", inputs_echo=echo,
                            note="rho2 = d2/(R-1)")
    if _eq(rho1, b1):
        return RegimeReport("critical", None, None, "unknown", inputs_echo=echo,
                            note="rho1 = d1/R")
    # rho1 < d1/R from here on, so rho1 is finite
    b3 = d1 * d2 / (R * (d1 - rho1))
    if _gt(rho2, b3):
        return RegimeReport("case3-gaussian", 2 * d1 - R * rho1, float(d2), "gaussian",
                            inputs_echo=echo)
    if _eq(rho2, b3):
        return RegimeReport("critical", None, None, "unknown", inputs_echo=echo,
                            note="rho2 = d1 d2 / (R (d1 - rho1))")
    if R == 2:
        beta = rho2 * (1 - rho1 / d1)
        return RegimeReport("case4-rosenblatt", 2 * d1 - 2 * rho1, 2 * d2 - 2 * beta,
                            "rosenblatt", law_params=(float(rho1), float(beta)),
                            inputs_echo=echo)
    return RegimeReport("unsupported", None, None, "unknown", inputs_echo=echo,
                        note="non-central limits are only covered for R = 2")


def regime_grid(d1, d2, R, rho1_values, rho2_values):
    """Rows (rho1, rho2, regime, e1, e2) over a lattice of tail indices."""
    rows = []
    for r1 in rho1_values:
        for r2 in rho2_values:
            rep = classify(d1, d2, R, float(r1), float(r2))
            rows.append((float(r1), float(r2), rep.regime, rep.exponent1, rep.exponent2))
    return rows


def regime_grid_csv(rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["rho1", "rho2", "regime", "e1", "e2"])
    for r1, r2, reg, e1, e2 in rows:
        w.writerow([repr(r1), repr(r2), reg, "" if e1 is None else repr(e1),
                    "" if e2 is None else repr(e2)])
    return buf.getvalue()


def radial_lq_norm(c, q):
    """||c||_{L^q(R^d)}^q = |S^{d-1}| int_0^inf r^{d-1} c(r)^q dr."""
    if q <= 0:
        raise ValueError("q must be positive")
    d = c.dim
    integrand = lambda r: r ** (d - 1) * float(c(r)) ** q
    # split at 1 so the power tail is handled on its own interval
    head, _ = integrate.quad(integrand, 0.0, 1.0, epsabs=0, epsrel=1e-12, limit=200)
    tail, _ = integrate.quad(integrand, 1.0, np.inf, epsabs=0, epsrel=1e-10, limit=500)
    return unit_sphere_area(d) * (head + tail)


def leading_constant_case1(C, phi, bodies, qmax=None):
    """Leading constant of Var(Y(t)) / (vol(t1 D1) vol(t2 D2)) in case 1.

    l = vol(D1) vol(D2) sum_{q >= R} q! a_q^2 ||C1||_q^q ||C2||_{q-1}^{q-1}

    ``C`` is a covariance with ``factor1``/``factor2`` or a pair of radial
    profiles.  The series is truncated at ``qmax``; its remainder is bounded
    by the Parseval deficit of ``phi`` times the q = R weight, since the
    norms are nonincreasing in q for profiles bounded by 1.

    Returns (value, tail_bound).
    """
    f1, f2 = (C.factor1, C.factor2) if hasattr(C, "factor1") else C
    body1, body2 = bodies
    R = phi.rank
    if R < 2:
        raise InvalidParams("case 1 needs Hermite rank >= 2")
    for f in (f1, f2):
        if f.rho is None:
            raise Unsupported("factors need declared tail indices")
    rep = classify(f1.dim, f2.dim, R, f1.rho, f2.rho)
    if rep.regime != "case1-gaussian":
        raise InvalidParams(f"leading constant only defined in case 1, got {rep.regime}")
    qmax = phi.qmax if qmax is None else min(qmax, phi.qmax)
    vol = body1.vol * body2.vol
    total = 0.0
    for q in range(R, qmax + 1):
        a = phi.coeffs[q]
        if a == 0.0:
            continue
        total += math.factorial(q) * a * a * radial_lq_norm(f1, q) * radial_lq_norm(f2, q - 1)
    total *= vol
    deficit = phi.parseval_deficit()
    if deficit < 1e-12 * max(1.0, phi.second_moment()):
        deficit = 0.0
    tail = vol * deficit * radial_lq_norm(f1, R) * radial_lq_norm(f2, R - 1)
    if tail > 0.01 * total:
        raise SeriesTail(f"series tail bound {tail:.3e} exceeds 1% of partial sum {total:.3e}")
    return float(total), float(tail)


def effective_separable_factors(C, R=2):
    """Factors (C1, C2*) onto which a Gneiting covariance separates asymptotically.

    C2* is represented by the Cauchy profile (1 + r)^(-rho2*) in dimension d2;
    only its tail index matters for the limit.
    """
    if R != 2:
        raise Unsupported("asymptotic separability is only exposed for R = 2")
    f1, f2 = C.factor1, C.factor2
    if f1.rho is None or f2.rho is None:
        raise Unsupported("factors need declared tail indices")
    d1 = f1.dim
    if _gt(2 * f1.rho, d1):
        rho_star = f2.rho / 2
    elif _lt(2 * f1.rho, d1):
        rho_star = f2.rho * (1 - f1.rho / d1)
    else:
        raise Unsupported("2 rho1 = d1 is critical")
    if math.isinf(rho_star):
        c2_star = make_radial("exponential", (1.0,), f2.dim)
    else:
        c2_star = make_radial("gen-cauchy", (1.0, rho_star), f2.dim)
    return f1, c2_star
