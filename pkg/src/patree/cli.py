"""Command line entry point: theory, simulate, urn, validate and sweep.

Exit codes: 0 success, 1 usage or config error, 2 refusal at the regime
boundary, 3 validation failure.
"""

from __future__ import annotations

import argparse
import hashlib
import io
import json
import math
import os
import sys

import numpy as np

from . import __version__
from .config import load_config
from .errors import ConfigError, PatreeError, PreconditionError
from .fitness import DominatingStructure
from .simulator import RunConfig, condensate_probe, grow
from .sweep import alpha_sweep
from .theory import BOUNDARY, theory_report

EXIT_OK, EXIT_USAGE, EXIT_BOUNDARY, EXIT_FAILED = 0, 1, 2, 3


class _Refusal(Exception):
    pass


def fmt(x):
    """Plain decimal text that round-trips the float; inf and nan spelled out."""
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return np.format_float_positional(x, unique=True, trim="-")


def write_csv(path, header, rows):
    buf = io.StringIO(newline="")
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(fmt(v) if not isinstance(v, str) else v for v in row) + "\n")
    data = buf.getvalue().encode()
    with open(path, "wb") as fh:
        fh.write(data)
    return hashlib.sha256(data).hexdigest()


def _u64(text):
    try:
        v = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in 64 unsigned bits")
    return v


def _threads(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError("thread count must be positive")
    return v


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH")
    common.add_argument("--out", metavar="DIR")
    common.add_argument("--seed", type=_u64, metavar="U64", help="overrides the configured seed")
    common.add_argument("--threads", type=_threads, metavar="N",
                        help="worker threads (default: $PATREE_THREADS or 1)")
    p = _Parser(prog="patree", description="Growing trees with vertex weights: limit theory, "
                "simulation and urn approximations.")
    p.add_argument("--version", action="version", version=f"patree {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("theory", parents=[common], help="regime, growth rate and condensate mass")
    sub.add_parser("simulate", parents=[common], help="grow trees and write CSV artifacts")
    sub.add_parser("urn", parents=[common], help="leading eigen-system of the two urns")
    sub.add_parser("validate", parents=[common], help="run the acceptance checks")
    sub.add_parser("sweep", parents=[common], help="phase diagram over the weight exponent")
    return p


def _need_config(args):
    if not args.config:
        raise ConfigError("--config is required for this command")
    return load_config(args.config)


def _need_model(cfg):
    if cfg.model is None:
        raise ConfigError("missing section 'model'", path=cfg.path)
    return cfg.model


def cmd_theory(args, out):
    cfg = _need_config(args)
    rep = theory_report(_need_model(cfg), cfg.law)
    out.write(rep.to_json(sort_keys=True) + "\n")
    return EXIT_BOUNDARY if rep.regime == BOUNDARY else EXIT_OK


def cmd_simulate(args, out):
    cfg = _need_config(args)
    model = _need_model(cfg)
    if not cfg.run:
        raise ConfigError("missing section 'run'", path=cfg.path)
    if not args.out:
        raise ConfigError("--out DIR is required for simulate")
    run = dict(cfg.run)
    if args.seed is not None:
        run["master_seed"] = args.seed
    rc = RunConfig(model, cfg.law, run["n_steps"], run["replicas"], run["master_seed"], run["bins"],
                   run["k_max"], run["stride"], run.get("keep_edges"))
    cond = None
    if cfg.condensation:
        c = cfg.condensation
        try:
            cond = condensate_probe(model, DominatingStructure(model, cfg.law), cfg.law, c["eps"],
                                    c["n"], c["replicas"], rc.master_seed, args.threads)
        except PreconditionError as exc:
            raise _Refusal(str(exc)) from None
    res = grow(rc, args.threads)
    m = res.measures
    try:
        os.makedirs(args.out, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {args.out}: {exc.strerror}") from None
    files = {}
    e = m.edges
    deg_rows = [(k, e[b], e[b + 1], m.n_geq[k, b], m.n_steps, m.replicas)
                for k in range(m.k_max + 1) for b in range(m.nbins)]
    files["degrees.csv"] = write_csv(os.path.join(args.out, "degrees.csv"),
                                     ["k", "bin_lo", "bin_hi", "count", "n", "replicas"], deg_rows)
    edge_rows = [(e[i], e[i + 1], m.xi[i], *m.xi2[i]) for i in range(m.nbins)]
    files["edges.csv"] = write_csv(os.path.join(args.out, "edges.csv"),
                                   ["bin_lo", "bin_hi", "xi"] + [f"xi2_{j}" for j in range(m.nbins)],
                                   edge_rows)
    steps, zn = m.z_path
    files["zpath.csv"] = write_csv(os.path.join(args.out, "zpath.csv"), ["n", "z_over_n"],
                                   zip(steps, zn))
    if cond is not None:
        files["condensate.csv"] = write_csv(
            os.path.join(args.out, "condensate.csv"), ["eps", "n", "empirical", "predicted", "excess"],
            [(r.eps, r.n, r.empirical, r.predicted, r.excess) for r in cond.rows])
    manifest = {
        "version": __version__,
        "command": "simulate",
        "config": os.path.basename(cfg.path) if cfg.path else None,
        "config_sha256": cfg.digest,
        "master_seed": rc.master_seed,
        "replica_seeds": res.seeds,
        "replicas": rc.replicas,
        "n_steps": rc.n_steps,
        "files": files,
    }
    if cond is not None:
        manifest["condensate_mass_limit"] = cond.condensate_mass
        manifest["condensate_rate"] = cond.lam
    with open(os.path.join(args.out, "manifest.json"), "wb") as fh:
        fh.write((json.dumps(manifest, indent=2, sort_keys=True) + "\n").encode())
    out.write(f"wrote {len(files)} CSV files to {args.out}\n")
    return EXIT_OK


def cmd_urn(args, out):
    from .urns import build_urn_d, build_urn_e, check_urn_d_formulas, check_urn_e_formulas, discretize, leading_eig

    cfg = _need_config(args)
    model = _need_model(cfg)
    u = cfg.urn or {"m": 2, "k_prime": 2}
    disc = discretize(model, cfg.law, u["m"])
    ue, ud = build_urn_e(disc), build_urn_d(disc, u["k_prime"])
    ee, ed = leading_eig(ue), leading_eig(ud)
    re_, rd = check_urn_e_formulas(ue, ee), check_urn_d_formulas(ud, ed, exact_degree=False)
    doc = {
        "lambda": ee.lam,
        "lambda_prime": ed.lam,
        "eigvec_residual_max": max(ee.residual, ed.residual),
        "B_m": re_.B,
        "E_m": re_.E,
        "R_K": rd.R,
        "E_K": rd.E,
        "F_K": rd.F,
        "type_count": {"edge_urn": ue.type_count, "neighbourhood_urn": ud.type_count},
        "cells": disc.D,
        "m": u["m"],
        "k_prime": u["k_prime"],
    }
    out.write(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return EXIT_OK


def cmd_validate(args, out):
    from .validate import CHECK_ORDER, format_table, parse_suite, run_suite

    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read suite: {exc.strerror}", path=args.config) from None
        suite = parse_suite(text, args.config)
    else:
        suite = {"checks": list(CHECK_ORDER), "tolerances": {}, "seed": 0}
    seed = args.seed if args.seed is not None else suite["seed"]
    results = run_suite(suite["checks"], suite["tolerances"], seed, args.threads,
                        report=lambda r: print(r.line(), file=sys.stderr, flush=True))
    out.write(format_table(results) + "\n")
    failed = [r.name for r in results if not r.passed]
    if failed:
        out.write(f"failed: {', '.join(failed)}\n")
        return EXIT_FAILED
    return EXIT_OK


def cmd_sweep(args, out):
    cfg = _need_config(args)
    if cfg.sweep is None:
        raise ConfigError("missing section 'sweep'", path=cfg.path)
    if cfg.law.kind != "beta_poly":
        raise ConfigError("the alpha sweep needs law.kind = 'beta_poly'", path=cfg.path)
    rows = alpha_sweep(cfg.sweep["values"], _need_model(cfg))
    header = ["param", "criterion", "regime", "lambda_or_gstar", "condensate_mass"]
    table = [(r.param, r.criterion, r.regime, r.lambda_or_gstar, r.condensate_mass) for r in rows]
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        path = os.path.join(args.out, "sweep.csv")
        write_csv(path, header, table)
        out.write(f"wrote {path}\n")
    else:
        out.write(",".join(header) + "\n")
        for row in table:
            out.write(",".join(fmt(v) if not isinstance(v, str) else v for v in row) + "\n")
    return EXIT_OK


COMMANDS = {"theory": cmd_theory, "simulate": cmd_simulate, "urn": cmd_urn,
            "validate": cmd_validate, "sweep": cmd_sweep}


def main(argv=None, out=None):
    out = out or sys.stdout
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args, out)
    except ConfigError as exc:
        where = f"{exc.path}: " if exc.path and exc.line is not None else ""
        print(f"error: {where}{exc}", file=sys.stderr)
        return EXIT_USAGE
    except _Refusal as exc:
        print(f"refused: {exc}", file=sys.stderr)
        return EXIT_BOUNDARY
    except PatreeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
