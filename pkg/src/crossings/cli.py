"""Command-line interface: ``crossings {diagnose,moments,compare,probe,sample}``.

Exit codes: 0 ok, 1 config or parse error, 2 non_integrable / violated,
3 inconclusive, 4 degenerate model, 5 formula and Monte Carlo disagree.

CSV column orders:
  diagnose: tau,L
  moments:  t,target,rice_mean,m2,variance,quad_error,series_K,finite
  compare:  quantity,formula,monte_carlo,se,z
  probe:    dt,variance,se_variance,mean_count,se_mean
  sample:   t,X
"""
from __future__ import annotations

import argparse
import csv
import datetime
import io
import json
import math
import os
import sys
from dataclasses import asdict

import numpy as np

from . import __version__
from .config import ConfigError, RunConfig, load_config
from .covariance import CovarianceValidationError, LagOutOfRangeError, NotSimulableError
from .crossing_moments import (CurveConditionError, DegenerateModelError, SingularLagError,
                               curve_second_moment)
from .curves import InvalidModulusError
from .diagnostics import classify_geman, curve_condition, lemma_report, theta_checks
from .expression import ExpressionError
from .simulate import EmbeddingError, divergence_probe, mc_moments, sample_path

EXIT_OK, EXIT_CONFIG, EXIT_DIVERGENT, EXIT_INCONCLUSIVE, EXIT_DEGENERATE, EXIT_MISMATCH = range(6)
Z_LIMIT = 3.0


def jsonable(v):
    """Recursively convert to JSON-safe values; non-finite floats become strings."""
    if isinstance(v, dict):
        return {str(k): jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return [jsonable(x) for x in v.tolist()]
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    return v


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.6g}"
    return str(v)


def render_table(headers, rows) -> str:
    """Aligned text table."""
    cells = [[_fmt(h) for h in headers]] + [[_fmt(c) for c in r] for r in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(headers))]
    lines = ["  ".join(c.rjust(w) for c, w in zip(r, widths)) for r in cells]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines)


def render_csv(headers, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(headers)
    for r in rows:
        w.writerow([_fmt(c) if isinstance(c, (float, np.floating, bool, np.bool_)) else c for c in r])
    return buf.getvalue()


class Output:
    """Collects one command's document, table and CSV rows, then emits them."""

    def __init__(self, command: str, cfg: RunConfig, fmt: str, out_dir):
        self.command, self.cfg, self.fmt, self.out_dir = command, cfg, fmt, out_dir
        self.tables = []
        self.csv_headers, self.csv_rows = [], []

    def document(self, result: dict) -> dict:
        return {
            "header": {"command": self.command, "version": __version__,
                       "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat()},
            "config": jsonable(self.cfg.to_dict()),
            "result": jsonable(result),
        }

    def emit(self, result: dict) -> None:
        doc = self.document(result)
        text = json.dumps(doc, sort_keys=True, indent=2)
        csv_text = render_csv(self.csv_headers, self.csv_rows)
        if self.fmt == "json" and self.out_dir is None:
            print(text)
        elif self.fmt == "csv" and self.out_dir is None:
            sys.stdout.write(csv_text)
        else:
            print("\n\n".join(self.tables))
        if self.out_dir is not None:
            os.makedirs(self.out_dir, exist_ok=True)
            if self.fmt == "csv":
                with open(os.path.join(self.out_dir, f"{self.command}.csv"), "w") as fh:
                    fh.write(csv_text)
            else:
                with open(os.path.join(self.out_dir, f"{self.command}.json"), "w") as fh:
                    fh.write(text + "\n")


def _worst(codes):
    order = [EXIT_OK, EXIT_INCONCLUSIVE, EXIT_DIVERGENT]
    return max(codes, key=order.index) if codes else EXIT_OK


# -- commands ------------------------------------------------------------------

def cmd_diagnose(cfg: RunConfig, out: Output) -> int:
    model = cfg.build_model()
    delta = cfg.delta if cfg.delta is not None else min(1.0, model.delta_max / 4.0)
    geman = classify_geman(model, delta, margin=cfg.margin)
    result = {"model": model.describe(), "geman": geman.to_dict()}
    codes = [{"integrable": EXIT_OK, "non_integrable": EXIT_DIVERGENT,
              "inconclusive": EXIT_INCONCLUSIVE}[geman.verdict]]
    rows = [("geman verdict", geman.verdict), ("alpha (tau exponent)", geman.local_exponent),
            ("beta (log exponent)", geman.log_exponent),
            ("integral of L on [tau_min, delta]", geman.integral_estimate),
            ("integral stable", geman.integral_stable)]
    try:
        lemma = lemma_report(model, delta, margin=cfg.margin)
        result["lemma"] = lemma.to_dict()
        rows += [("lemma1 lim L/tau", lemma.lemma1_limit), ("r''''(0)/2", lemma.lemma1_reference),
                 ("lemma2 max |r'/sigma|", lemma.lemma2_ratio_bound),
                 ("lemma2 max rho", lemma.lemma2_rho_max),
                 ("lemma3 min L tau/sigma^2", lemma.lemma3_lower_margin),
                 ("lemma3 C", lemma.lemma3_C_estimate)]
    except (DegenerateModelError, SingularLagError) as exc:
        result["lemma"] = {"error": str(exc)}
        rows.append(("lemma report", f"error: {exc}"))
    try:
        th = theta_checks(model, delta)
        result["theta"] = {"theta_positive": th.theta_positive, "limits_ok": th.limits_ok}
        rows += [("theta > 0 on grid", th.theta_positive), ("theta limits", th.limits_ok)]
    except (ValueError, FloatingPointError) as exc:
        result["theta"] = {"error": str(exc)}
    curve = cfg.build_curve()
    if curve is not None:
        cc = curve_condition(curve, delta, margin=cfg.margin)
        result["curve"] = cc.to_dict()
        rows += [("curve condition", cc.verdict), ("int gamma(s)/s ds", cc.integral_estimate)]
        codes.append({"satisfied": EXIT_OK, "violated": EXIT_DIVERGENT,
                      "inconclusive": EXIT_INCONCLUSIVE}[cc.verdict])
    out.tables.append(render_table(["quantity", "value"], rows))
    out.csv_headers = ["tau", "L"]
    out.csv_rows = [(a, b) for a, b in zip(geman.grid, geman.L_values)]
    out.emit(result)
    return _worst(codes)


def _moment_rows(res):
    return [res.t, res.target, res.rice_mean, res.m2, res.variance, res.quad_error,
            res.series_K, res.finite]


def _moments_for(cfg, model, target, sigma2_scale=1.0):
    return curve_second_moment(model, target, cfg.t, cfg.delta, quad_tol=cfg.quad_tol,
                               series_tol=cfg.series_tol, margin=cfg.margin,
                               sigma2_scale=sigma2_scale)


def cmd_moments(cfg: RunConfig, out: Output) -> int:
    model = cfg.build_model()
    results = [_moments_for(cfg, model, tg) for tg in cfg.targets()]
    headers = ["t", "x", "E[N]", "M2", "Var", "quad_error", "K"]
    out.tables.append(render_table(headers, [_moment_rows(r)[:7] for r in results]))
    out.csv_headers = ["t", "target", "rice_mean", "m2", "variance", "quad_error", "series_K", "finite"]
    out.csv_rows = [_moment_rows(r) for r in results]
    out.emit({"model": model.describe(), "moments": [r.to_dict() for r in results]})
    return EXIT_OK if all(r.finite for r in results) else EXIT_DIVERGENT


def _z(formula, mc, se):
    if not math.isfinite(formula):
        return math.inf
    if not se > 0 or not math.isfinite(se):
        return 0.0 if not math.isfinite(se) else (0.0 if formula == mc else math.inf)
    return (formula - mc) / se


def cmd_compare(cfg: RunConfig, out: Output, sigma2_scale: float = 1.0) -> int:
    model = cfg.build_model()
    rows, docs, finite = [], [], True
    for tg in cfg.targets():
        res = _moments_for(cfg, model, tg, sigma2_scale)
        finite &= res.finite
        target = tg.constant if tg.constant is not None else tg
        mc = mc_moments(model, target, cfg.t, cfg.dt, cfg.n_paths, cfg.seed)
        quad = res.quad_error if math.isfinite(res.quad_error) else 0.0
        for name, f, m, se in (("E[N]", res.rice_mean, mc.mean_count, mc.se_mean),
                               ("M2", res.m2, mc.second_factorial, mc.se_second_factorial),
                               ("Var", res.variance, mc.variance, mc.se_variance)):
            se_c = math.hypot(se, quad) if math.isfinite(se) else se
            rows.append([res.target, name, f, m, se_c, _z(f, m, se_c)])
        docs.append({"formula": res.to_dict(), "monte_carlo": mc.to_dict()})
    out.tables.append(render_table(["target", "quantity", "formula", "monte_carlo", "se", "z"], rows))
    out.csv_headers = ["quantity", "formula", "monte_carlo", "se", "z"]
    out.csv_rows = [r[1:] for r in rows]
    ok = all(abs(r[5]) < Z_LIMIT for r in rows)
    out.emit({"model": model.describe(), "comparisons": docs,
              "rows": [dict(zip(["target", "quantity", "formula", "monte_carlo", "se", "z"], r))
                       for r in rows],
              "all_within": ok, "z_limit": Z_LIMIT})
    if not finite:
        return EXIT_DIVERGENT
    return EXIT_OK if ok else EXIT_MISMATCH


def cmd_probe(cfg: RunConfig, out: Output) -> int:
    model = cfg.build_model()
    x = cfg.levels[0]
    rows = divergence_probe(model, x, cfg.t, cfg.dt_sequence, cfg.n_paths, cfg.seed)
    headers = ["dt", "variance", "se_variance", "mean_count", "se_mean"]
    table = [[r.dt, r.variance, r.se_variance, r.mean_count, r.se_mean] for r in rows]
    out.tables.append(render_table(headers, table))
    out.csv_headers, out.csv_rows = headers, table
    out.emit({"model": model.describe(), "level": x, "rows": [asdict(r) for r in rows]})
    return EXIT_OK


def cmd_sample(cfg: RunConfig, out: Output) -> int:
    model = cfg.build_model()
    path = sample_path(model, cfg.t, cfg.dt, cfg.seed)
    out.csv_headers = ["t", "X"]
    out.csv_rows = list(zip(path.times, path.values))
    out.tables.append(render_table(["n", "dt", "seed", "sample var", "clipped mass"],
                                   [[path.n, path.dt, path.seed, float(np.var(path.values)),
                                     path.clipped_mass]]))
    out.emit({"model": model.describe(), "n": path.n, "dt": path.dt, "seed": path.seed,
              "clipped_mass": path.clipped_mass, "values": path.values})
    return EXIT_OK


COMMANDS = {"diagnose": cmd_diagnose, "moments": cmd_moments, "compare": cmd_compare,
            "probe": cmd_probe, "sample": cmd_sample}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="crossings", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    helps = {"diagnose": "integrability, lemma and curve-condition checks",
             "moments": "mean, second factorial moment and variance of crossing counts",
             "compare": "formula versus Monte Carlo with z-scores",
             "probe": "empirical variance across a sequence of grid spacings",
             "sample": "one simulated path (CSV columns t,X)"}
    for name, text in helps.items():
        sp = sub.add_parser(name, help=text)
        sp.add_argument("--config", help="INI file")
        sp.add_argument("--seed", type=int, help="overrides [run] seed")
        sp.add_argument("--out", help="directory for JSON/CSV files")
        sp.add_argument("--format", choices=["json", "table", "csv"], default=None)
        sp.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                        help="override a config value (repeatable)")
        if name == "compare":
            sp.add_argument("--test-sigma2-scale", type=float, default=1.0, help=argparse.SUPPRESS)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, args.set)
        if args.seed is not None:
            cfg.seed = args.seed
        if args.out is not None:
            cfg.out_dir = args.out
        fmt = args.format or ("table" if cfg.out_dir is None else cfg.format)
        cfg.check_output_dir()
        out = Output(args.command, cfg, fmt, cfg.out_dir)
        if args.command == "compare":
            return cmd_compare(cfg, out, args.test_sigma2_scale)
        return COMMANDS[args.command](cfg, out)
    except (ConfigError, ExpressionError, CovarianceValidationError, LagOutOfRangeError,
            NotSimulableError, EmbeddingError, InvalidModulusError, CurveConditionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DegenerateModelError, SingularLagError) as exc:
        print(f"degenerate model: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE


if __name__ == "__main__":
    sys.exit(main())
