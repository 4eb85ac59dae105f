"""Command-line entry point.

Exit codes: 0 ok, 1 verification failed, 2 configuration error,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import re
import sys
from pathlib import Path

from . import __version__
from .config import load_config
from .covariance import RadialCovariance
from .errors import (ConfigError, EmbeddingFailed, GneitlabError, InvalidAlpha, InvalidParams,
                     SingularityBudget)
from .geometry import ConvexBody

log = logging.getLogger("gneitlab")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_CONFIG)


def _float(text):
    if text.lower() in ("inf", "infinity"):
        return math.inf
    return float(text)


def _range(text):
    """'a:b:step' -> list of floats (inclusive of b within half a step)."""
    try:
        a, b, s = (float(v) for v in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected start:stop:step, got {text!r}") from None
    if s <= 0 or b < a:
        raise argparse.ArgumentTypeError("need start <= stop and a positive step")
    n = int(math.floor((b - a) / s + 0.5)) + 1
    return [a + i * s for i in range(n)]


def _k_range(text):
    if ".." in text:
        lo, hi = text.split("..")
        return list(range(int(lo), int(hi) + 1))
    return [int(v) for v in text.split(",")]


def _domain(text):
    """box<d>, ball<d>, or an inline body JSON."""
    if text.startswith("{"):
        return ConvexBody.from_json(json.loads(text))
    for prefix, kind in (("box", "unit-box"), ("ball", "centered-ball")):
        if text.startswith(prefix) and text[len(prefix):].isdigit():
            d = int(text[len(prefix):])
            return ConvexBody(kind, d, () if kind == "unit-box" else (1.0,))
    raise InvalidParams(f"unknown domain {text!r}")


def provenance(seed=None, config_hash=None, extra=None):
    head = {"tool": "gneitlab", "version": __version__}
    if seed is not None:
        head["seed"] = seed
    if config_hash is not None:
        head["config_sha256"] = config_hash
    if extra:
        head.update(extra)
    return "# " + json.dumps(head, sort_keys=True)


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_csv(path, rows, header_line):
    buf = io.StringIO()
    buf.write(header_line + "\n")
    w = csv.writer(buf, lineterminator="\n")
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    text = buf.getvalue()
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="", encoding="utf-8") as fh:
            fh.write(text)


def write_json(path, obj):
    text = json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n"
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(text, encoding="utf-8")


def _json_default(o):
    if hasattr(o, "tolist"):
        return o.tolist()
    if hasattr(o, "item"):
        return o.item()
    raise TypeError(f"not serializable: {type(o)}")


# -- subcommands -----------------------------------------------------------

def cmd_classify(args):
    from .regimes import classify, regime_grid, regime_grid_csv

    if args.grid:
        rows = regime_grid(args.d1, args.d2, args.R, args.grid[0], args.grid[1])
        text = provenance() + "\n" + regime_grid_csv(rows)
        if args.out:
            Path(args.out).write_text(text)
        else:
            sys.stdout.write(text)
        return EXIT_OK
    rep = classify(args.d1, args.d2, args.R, args.rho1, args.rho2)
    write_json(args.out, rep.to_json())
    return EXIT_OK


def _threads(args):
    env = os.environ.get("GNEITING_THREADS")
    if env:
        return int(env)
    return args.threads


def cmd_simulate(args):
    from .functional import run_ensemble

    cfg = load_config(args.config)
    ladder = [args.t] if args.t else cfg.t_ladder
    if not ladder:
        raise ConfigError("no t given and the config has an empty t_ladder")
    rows = [("replicate", "t", "y_raw")]
    summaries = []
    for t in ladder:
        ens = run_ensemble(cfg.covariance, cfg.window, t, cfg.functional, cfg.n_reps,
                           cfg.master_seed, h=cfg.budget("h"), threads=_threads(args))
        rows.extend((i, float(t), r.y_raw) for i, r in enumerate(ens.results))
        summaries.append(ens.summary())
    header = provenance(cfg.master_seed, cfg.config_hash)
    write_csv(args.out, rows, header)
    if args.summary:
        write_json(args.summary, {"provenance": header[2:], "ensembles": summaries})
    return EXIT_OK


def _kernel(args, body):
    from .cyclic import PowerLawKernel, RadialKernel

    if args.kernel == "power-law":
        if args.alpha is None:
            raise ConfigError("--alpha is required for the power-law kernel")
        return PowerLawKernel(args.alpha, body.dim)
    if args.kernel == "radial-cov":
        if not args.cov:
            raise ConfigError("--cov is required for the radial-cov kernel")
        return RadialKernel(RadialCovariance.from_json(json.loads(args.cov)), args.scale)
    raise ConfigError(f"unknown kernel {args.kernel!r}")


def cmd_cumulants(args):
    from .cyclic import cyclic_integral

    body = _domain(args.domain)
    kern = _kernel(args, body)
    rows = [("k", "value", "stderr", "n_points")]
    for k in args.k:
        res = cyclic_integral(kern, body, k, args.method, args.budget, args.seed)
        rows.append(res.as_row())
    write_csv(args.out, rows, provenance(args.seed, extra={"method": args.method}))
    return EXIT_OK


def cmd_rosenblatt(args):
    import numpy as np

    from .rosenblatt import invert, make_rosenblatt_spec

    b1 = ConvexBody("scaled-box", 1, (args.length1,))
    b2 = ConvexBody("scaled-box", 1, (args.length2,))
    spec = make_rosenblatt_spec(args.alpha, args.beta, b1, b2, K=args.K)
    x = np.asarray(args.grid)
    inv = invert(spec, x)
    rows = [("x", "pdf", "cdf")] + list(zip(x.tolist(), inv.pdf.tolist(), inv.cdf.tolist()))
    extra = {"alpha": args.alpha, "beta": args.beta, "clip_mass": inv.clip_mass,
             "alias_bound": inv.alias_bound}
    write_csv(args.out, rows, provenance(extra=extra))
    if args.cumulants_out:
        kap = spec.cumulants()
        write_json(args.cumulants_out, {"alpha": args.alpha, "beta": args.beta, "K": args.K,
                                        "kappa": {str(i + 1): v for i, v in enumerate(kap)}})
    return EXIT_OK


def cmd_separability(args):
    from .cyclic import separability_gap

    cfg = load_config(args.config)
    k = args.k or int(cfg.budget("k"))
    rows = separability_gap(cfg.covariance, cfg.window, k, cfg.t_ladder,
                            int(cfg.budget("mc_points")), cfg.master_seed)
    header = ("t", "gap", "stderr", "joint", "separated")
    write_csv(args.out, [header] + [tuple(r[h] for h in header) for r in rows],
              provenance(cfg.master_seed, cfg.config_hash))
    return EXIT_OK


def cmd_verify(args):
    from .suites import _assumption_flag, run_suite

    cfg = load_config(args.config)
    if args.threads:
        cfg.budgets.setdefault("threads", args.threads)
    env = os.environ.get("GNEITING_THREADS")
    if env:
        cfg.budgets["threads"] = int(env)
    violated = _assumption_flag(cfg)
    if violated:
        log.warning("window schedule violates the rate condition; running anyway")
    verdict, rows = run_suite(args.suite, cfg)
    verdict["assumption_violated"] = violated
    if violated:
        verdict["warnings"] = ["assumption-violated: t1(t) c2(t2(t))^(1/d1) does not diverge"]
    out = Path(args.out or cfg.output_dir)
    header = provenance(cfg.master_seed, cfg.config_hash, {"suite": args.suite})
    write_csv(out / f"{args.suite}.csv", rows, header)
    verdict["provenance"] = header[2:]
    write_json(out / f"{args.suite}_verdict.json", verdict)
    write_json("-", {k: v for k, v in verdict.items() if k != "rows"})
    return EXIT_OK if verdict["pass"] else EXIT_FAIL


def build_parser():
    p = _Parser(prog="gneitlab", description=__doc__.splitlines()[0] if __doc__ else None)
    p.add_argument("--threads", type=int, default=None,
                   help="worker threads (GNEITING_THREADS overrides)")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    c = sub.add_parser("classify", help="variance regime and limit law")
    c.add_argument("--d1", type=int, required=True)
    c.add_argument("--d2", type=int, required=True)
    c.add_argument("--R", type=int, required=True)
    c.add_argument("--rho1", type=_float)
    c.add_argument("--rho2", type=_float)
    c.add_argument("--grid", nargs=2, type=_range, metavar=("RHO1_RANGE", "RHO2_RANGE"),
                   help="sweep start:stop:step lattices and emit CSV")
    c.add_argument("--out")
    c.set_defaults(func=cmd_classify)

    s = sub.add_parser("simulate", help="replicate ensembles of Y(t)")
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--t", type=float)
    s.add_argument("--summary")
    s.set_defaults(func=cmd_simulate)

    k = sub.add_parser("cumulants", help="cyclic coefficients c_k")
    k.add_argument("--kernel", choices=("power-law", "radial-cov"), required=True)
    k.add_argument("--alpha", type=float)
    k.add_argument("--cov", help="radial covariance spec as JSON")
    k.add_argument("--scale", type=float, default=1.0)
    k.add_argument("--domain", default="box1")
    k.add_argument("--k", type=_k_range, default=[2, 3, 4])
    k.add_argument("--method", default="monte-carlo",
                   choices=("monte-carlo", "quasi-monte-carlo", "tensor-quadrature"))
    k.add_argument("--budget", type=int, default=200_000)
    k.add_argument("--seed", type=int, default=0)
    k.add_argument("--out")
    k.set_defaults(func=cmd_cumulants)

    r = sub.add_parser("rosenblatt", help="density and CDF of the two-domain Rosenblatt law")
    r.add_argument("--alpha", type=float, required=True)
    r.add_argument("--beta", type=float, required=True)
    r.add_argument("--grid", type=_range, default=_range("-6:6:0.01"))
    r.add_argument("--length1", type=float, default=1.0)
    r.add_argument("--length2", type=float, default=1.0)
    r.add_argument("--K", type=int, default=40)
    r.add_argument("--out")
    r.add_argument("--cumulants-out")
    r.set_defaults(func=cmd_rosenblatt)

    v = sub.add_parser("verify", help="run a named verification suite")
    v.add_argument("suite", choices=("variance", "clt", "rosenblatt", "separability",
                                     "appendixA"))
    v.add_argument("--config", required=True)
    v.add_argument("--out", help="output directory (default: config output_dir)")
    v.set_defaults(func=cmd_verify)

    g = sub.add_parser("separability", help="separability gap along the t ladder")
    g.add_argument("--config", required=True)
    g.add_argument("--k", type=int)
    g.add_argument("--out")
    g.set_defaults(func=cmd_separability)
    return p


def _glue_negative_range(argv):
    """Let ``--grid -6:6:0.01`` through; argparse reads the value as a flag."""
    out = []
    i = 0
    while i < len(argv):
        tok = argv[i]
        nxt = argv[i + 1] if i + 1 < len(argv) else ""
        after = argv[i + 2] if i + 2 < len(argv) else ""
        if tok == "--grid" and re.match(r"-[\d.]", nxt) and not re.match(r"-?[\d.]", after):
            out.append(f"--grid={nxt}")
            i += 2
            continue
        out.append(tok)
        i += 1
    return out


def main(argv=None):
    parser = build_parser()
    argv = _glue_negative_range(list(sys.argv[1:] if argv is None else argv))
    args = parser.parse_args(argv)
    if args.command == "classify" and not args.grid and (args.rho1 is None or args.rho2 is None):
        parser.error("classify needs --rho1 and --rho2 (or --grid)")
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except (ConfigError, InvalidParams, InvalidAlpha) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (EmbeddingFailed, SingularityBudget) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except GneitlabError as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
