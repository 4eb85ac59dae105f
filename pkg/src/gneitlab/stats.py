"""Verification statistics: KS distances, cumulant z-scores, exponent fits."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import interpolate
from scipy.special import ndtr
from scipy.stats import kstwobign

from .errors import CDFUnavailable, DegenerateLadder, GneitlabError, InvalidParams


def _rosenblatt_cdf(spec, samples):
    """Interpolated Rosenblatt CDF covering the sample range."""
    from .rosenblatt import invert

    lo = min(float(np.min(samples)), -4.0) - 0.5
    hi = max(float(np.max(samples)), 8.0) + 0.5
    grid = np.linspace(lo, hi, 4001)
    try:
        inv = invert(spec, grid)
    except GneitlabError as exc:
        raise CDFUnavailable(f"Rosenblatt CDF inversion failed: {exc}") from exc
    cdf = np.maximum.accumulate(inv.cdf)
    return interpolate.interp1d(grid, cdf, kind="cubic", bounds_error=False,
                                fill_value=(0.0, 1.0))


def ks_against(samples, law="std-normal", spec=None, cdf=None):
    """Two-sided KS statistic and asymptotic Kolmogorov p-value.

    ``law`` is ``std-normal`` or ``rosenblatt`` (then ``spec`` is a
    RosenblattSpec); a custom ``cdf`` callable overrides both.
    """
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    n = x.size
    if n == 0:
        raise InvalidParams("empty sample")
    if n < 100:
        raise InvalidParams("KS test needs at least 100 samples")
    if cdf is None:
        if law == "std-normal":
            cdf = ndtr
        elif law == "rosenblatt":
            if spec is None:
                raise CDFUnavailable("rosenblatt law needs a spec")
            cdf = _rosenblatt_cdf(spec, x)
        else:
            raise InvalidParams(f"unknown law {law!r}")
    F = np.clip(np.asarray(cdf(x), dtype=float), 0.0, 1.0)
    i = np.arange(1, n + 1)
    stat = float(max(np.max(i / n - F), np.max(F - (i - 1) / n)))
    p = float(kstwobign.sf(stat * math.sqrt(n)))
    return stat, p


def cumulant_compare(ensemble, theoretical):
    """z-scores (k_stat - kappa) / stderr for the standardized kappa3, kappa4.

    ``theoretical`` is a mapping or a sequence kappa_1, kappa_2, ... .
    """
    if isinstance(theoretical, dict):
        th = theoretical
    else:
        th = {k + 1: v for k, v in enumerate(theoretical)}
    out = {}
    for k, name in ((3, "kappa3"), (4, "kappa4")):
        if k not in th:
            continue
        est, se = ensemble.stats[name] if hasattr(ensemble, "stats") else ensemble[name]
        out[k] = (est - th[k]) / se
    return out


@dataclass
class ExponentFit:
    slope: float
    intercept: float
    r2: float
    residuals: np.ndarray
    t_values: np.ndarray
    slope_se: float = math.nan


def exponent_fit(var_estimates, schedule=None):
    """Weighted least squares of log Var against log t.

    ``var_estimates`` holds (t, var, stderr) rows; the weights are
    var^2 / stderr^2 (delta method in log space).  ``schedule`` is accepted
    for symmetry with the regime report but does not change the fit.
    """
    rows = np.asarray(var_estimates, dtype=float)
    if rows.ndim != 2 or rows.shape[0] < 4:
        raise DegenerateLadder("need at least 4 t values")
    t, v, se = rows[:, 0], rows[:, 1], rows[:, 2] if rows.shape[1] > 2 else np.ones(len(rows))
    if np.any(np.diff(t) <= 0):
        raise DegenerateLadder("t values must be strictly increasing")
    if np.any(v <= 0) or np.any(t <= 0):
        raise InvalidParams("variances and t values must be positive")
    x = np.log(t)
    y = np.log(v)
    se_log = np.where(se > 0, se / v, 1.0)
    w = 1.0 / se_log**2
    X = np.column_stack([np.ones_like(x), x])
    W = np.sqrt(w)
    coef, *_ = np.linalg.lstsq(X * W[:, None], y * W, rcond=None)
    resid = y - X @ coef
    ybar = np.sum(w * y) / np.sum(w)
    ss_tot = float(np.sum(w * (y - ybar) ** 2))
    ss_res = float(np.sum(w * resid**2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    cov = np.linalg.inv(X.T @ (X * w[:, None]))
    return ExponentFit(float(coef[1]), float(coef[0]), float(min(1.0, max(0.0, r2))), resid, t,
                       float(math.sqrt(cov[1, 1])))


def report(test, statistic, threshold, passed, p_value=None, z_scores=None):
    """Verification record in the JSON report layout."""
    out = {"test": test, "statistic": statistic, "threshold": threshold, "pass": bool(passed)}
    if p_value is not None:
        out["p_value"] = p_value
    if z_scores is not None:
        out["z_scores"] = {str(k): v for k, v in z_scores.items()}
    return out
