"""Named verification experiments driven by an ExperimentConfig.

Each suite returns a verdict dict (JSON-ready) and a list of CSV rows.
"""

from __future__ import annotations

import logging
import math

from .covariance import SeparableCovariance
from .cyclic import PowerLawKernel, cyclic_integral, appendixA_sequence, rosenblatt_ck, \
    separability_gap
from .errors import ConfigError, GneitlabError
from .functional import run_ensemble
from .geometry import rate_admissible
from .regimes import classify
from .stats import cumulant_compare, exponent_fit, ks_against, report

log = logging.getLogger(__name__)

SUITES = ("variance", "clt", "rosenblatt", "separability", "appendixA")


def regime_of(cfg):
    C = cfg.covariance
    return classify(C.d1, C.d2, cfg.functional.rank, C.factor1.rho, C.factor2.rho)


def _threads(cfg):
    return int(cfg.budget("threads")) or None


def _assumption_flag(cfg):
    f2 = cfg.covariance.factor2
    if isinstance(cfg.covariance, SeparableCovariance) or f2.rho is None:
        return False
    return not rate_admissible(cfg.window.schedule, f2, cfg.window.d1)


def _ensemble(cfg, t, cache=None):
    key = float(t)
    if cache is not None and key in cache:
        return cache[key]
    ens = run_ensemble(cfg.covariance, cfg.window, t, cfg.functional, cfg.n_reps,
                       cfg.master_seed, h=cfg.budget("h"), threads=_threads(cfg))
    if cache is not None:
        cache[key] = ens
    return ens


def variance_suite(cfg, cache=None):
    if len(cfg.t_ladder) < 4:
        raise ConfigError("variance suite needs at least 4 t values")
    rep = regime_of(cfg)
    theory = rep.combined_exponent(cfg.window.schedule)
    rows = []
    for t in cfg.t_ladder:
        ens = _ensemble(cfg, t, cache)
        rows.append((t, ens.var, ens.var_se))
    fit = exponent_fit(rows, cfg.window.schedule)
    tol = cfg.budget("slope_tol")
    verdict = report("variance-exponent", fit.slope, tol, abs(fit.slope - theory) <= tol)
    verdict.update(theory=theory, slope_se=fit.slope_se, r2=fit.r2, regime=rep.regime,
                   assumption_violated=_assumption_flag(cfg))
    return verdict, [("t", "var", "stderr")] + rows


def clt_suite(cfg, cache=None):
    t = cfg.t_ladder[-1]
    ens = _ensemble(cfg, t, cache)
    stat, p = ks_against(ens.standardized(), "std-normal")
    z = cumulant_compare(ens, {3: 0.0, 4: 0.0})
    zmax = cfg.budget("z_max")
    ok = p > cfg.budget("ks_alpha") and all(abs(v) < zmax for v in z.values())
    verdict = report("clt", stat, {"p_min": cfg.budget("ks_alpha"), "z_max": zmax}, ok,
                     p_value=p, z_scores=z)
    verdict.update(t=t, n=ens.n, kappa3=ens.kappa3, kappa4=ens.kappa4,
                   regime=regime_of(cfg).regime, assumption_violated=_assumption_flag(cfg))
    rows = [("replicate", "y_standardized")] + list(enumerate(ens.standardized().tolist()))
    return verdict, rows


def theoretical_kappa3(alpha, beta, body1, body2, budget=400_000):
    if body1.dim == 1 and body2.dim == 1:
        c3 = rosenblatt_ck(alpha, beta, body1, body2, 3, 400, method="tensor-quadrature")
    else:
        c3 = rosenblatt_ck(alpha, beta, body1, body2, 3, budget)
    return 8.0 * c3.value, 8.0 * c3.stderr


def rosenblatt_suite(cfg, cache=None):
    rep = regime_of(cfg)
    if rep.regime != "case4-rosenblatt":
        raise ConfigError(f"rosenblatt suite needs case 4, config is {rep.regime}")
    alpha, beta = rep.law_params
    k3_theory, k3_err = theoretical_kappa3(alpha, beta, cfg.window.body1, cfg.window.body2,
                                           cfg.budget("mc_points"))
    t = cfg.t_ladder[-1]
    ens = _ensemble(cfg, t, cache)
    k3, se = ens.kappa3
    rel = abs(k3 - k3_theory) / k3_theory
    sep = k3 / se
    ok = rel <= cfg.budget("kappa3_rel_tol") and sep > cfg.budget("kappa3_sep")
    verdict = report("rosenblatt-kappa3", k3, {"rel_tol": cfg.budget("kappa3_rel_tol"),
                                                "sep": cfg.budget("kappa3_sep")}, ok)
    verdict.update(kappa3_stderr=se, kappa3_theory=k3_theory, kappa3_theory_err=k3_err,
                   rel_error=rel, separation=sep, t=t, n=ens.n, alpha=alpha, beta=beta,
                   assumption_violated=_assumption_flag(cfg))
    return verdict, [("quantity", "value"), ("kappa3", k3), ("stderr", se),
                     ("theory", k3_theory)]


def gap_decreasing(rows, factor=2.0):
    """Each gap lies below its predecessor by more than ``factor`` paired stderrs."""
    return all(rows[j - 1]["gap"] - rows[j]["gap"] > factor * rows[j]["diff_stderr"]
               for j in range(1, len(rows)))


def separability_suite(cfg, cache=None):
    k = int(cfg.budget("k"))
    rows = separability_gap(cfg.covariance, cfg.window, k, cfg.t_ladder,
                            int(cfg.budget("mc_points")), cfg.master_seed)
    if isinstance(cfg.covariance, SeparableCovariance):
        ok = all(abs(r["signed_gap"]) < 3 * r["stderr"] for r in rows)
        name = "separability-null"
    else:
        ok = gap_decreasing(rows)
        name = "separability-decreasing"
    verdict = report(name, [r["gap"] for r in rows], "2 paired stderr", ok)
    verdict["rows"] = rows
    header = ("t", "gap", "stderr", "joint", "separated")
    return verdict, [header] + [tuple(r[h] for h in header) for r in rows]


def appendix_target(c, body, k, budget=400_000):
    if body.dim == 1:
        return cyclic_integral(PowerLawKernel(c.rho, 1), body, k, "tensor-quadrature",
                               400).numerator
    return cyclic_integral(PowerLawKernel(c.rho, body.dim), body, k, "monte-carlo",
                           budget).numerator


def appendix_monotone(values, target):
    gaps = [abs(v - target) for v in values]
    same_side = all((v - target) * (values[0] - target) > 0 for v in values)
    return same_side and all(b < a for a, b in zip(gaps, gaps[1:]))


def appendix_suite(cfg, cache=None):
    c = cfg.covariance.factor1
    body = cfg.window.body1
    k = int(cfg.budget("k"))
    seq = appendixA_sequence(c, body, k, cfg.t_ladder, int(cfg.budget("mc_points")),
                             cfg.master_seed)
    target = appendix_target(c, body, k)
    values = [v for v, _ in seq]
    final_gap = abs(values[-1] - target) / target
    ok = appendix_monotone(values, target) and final_gap < cfg.budget("appendix_gap")
    verdict = report("appendixA", values, cfg.budget("appendix_gap"), ok)
    verdict.update(target=target, final_rel_gap=final_gap,
                   stderr=[s for _, s in seq])
    rows = [("t", "ratio", "stderr")] + [(t, v, s) for t, (v, s) in zip(cfg.t_ladder, seq)]
    return verdict, rows


RUNNERS = {"variance": variance_suite, "clt": clt_suite, "rosenblatt": rosenblatt_suite,
           "separability": separability_suite, "appendixA": appendix_suite}


def run_suite(name, cfg, cache=None):
    if name not in RUNNERS:
        raise ConfigError(f"unknown suite {name!r}")
    return RUNNERS[name](cfg, cache)
