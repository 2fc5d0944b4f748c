"""Command-line surface.

Subcommands: ``rate eval|grid``, ``domains check-a4``, ``example <name>``,
``mc verify``, ``spherical rank1``.  Everything except the subcommand comes
from a declarative YAML config; reports are CSV (with "inf" spelled out)
plus a JSON verdict where applicable, and every report renders a PNG figure
next to the delimited output.

Exit codes: 0 success / pass, 1 verification failed, 2 malformed config,
3 domain-stability (A4) failure, 4 inconclusive Monte Carlo.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import plots
from .config import ConfigError, build_mc_plan, build_scenario, load_config, output_spec
from .engine import compute_rate
from .gauss2d import (
    Gauss2DParams,
    default_params,
    rate_closed_form,
    region_grid,
    spherical_rank_one,
)
from .montecarlo import estimate_decay, subsequence_probe
from .nonconvex import (
    NonConvexScenario,
    rate_nonconvex,
    solve_system_I,
    solve_system_barI,
)
from .presets import example1_spec, example2_spec, figure1_scenario
from .weights import A4FailureError, DiscreteMeasure, check_a4

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_CONFIG = 2
EXIT_A4 = 3
EXIT_INCONCLUSIVE = 4


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return repr(v)
    return str(v)


def _sanitize(obj):
    """JSON-safe copy: infinities become the tagged {"inf": true} object."""
    if isinstance(obj, dict):
        return {k: _sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_sanitize(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _sanitize(obj.tolist())
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        obj = obj.item()
    if isinstance(obj, float):
        if math.isinf(obj):
            return {"inf": obj > 0}
        if math.isnan(obj):
            return None
    return obj


def write_rate_csv(path, m: int, rows) -> None:
    """rows: (z, report) pairs."""
    header = (
        [f"z{i+1}" for i in range(m)]
        + ["value", "route"]
        + [f"lambda{i+1}" for i in range(m)]
        + [f"zn{i+1}" for i in range(m)]
    )
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for z, rep in rows:
            lam = rep.lambda_star if rep.lambda_star is not None else [None] * m
            zn = rep.z_n if rep.z_n is not None else [None] * m
            w.writerow(
                [_fmt(float(v)) for v in z]
                + [_fmt(rep.value), rep.route]
                + [_fmt(None if v is None else float(v)) for v in lam]
                + [_fmt(None if v is None else float(v)) for v in zn]
            )


def read_rate_csv(path):
    """Re-parse a rate CSV; inverse of write_rate_csv for value fields."""

    def back(s):
        if s == "":
            return None
        if s == "inf":
            return math.inf
        if s == "-inf":
            return -math.inf
        return float(s)

    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    m = sum(1 for h in header if h.startswith("z") and h[1:].isdigit())
    out = []
    for r in body:
        out.append(
            {
                "z": [back(v) for v in r[:m]],
                "value": back(r[m]),
                "route": r[m + 1],
                "lambda": [back(v) for v in r[m + 2 : m + 2 + m]],
                "zn": [back(v) for v in r[m + 2 + m :]],
            }
        )
    return out


def _outdir(args, cfg) -> Path:
    spec = output_spec(cfg)
    p = Path(args.out) if getattr(args, "out", None) else Path(spec.dir)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _grid_points(grid_cfg, m: int):
    lo, hi, nodes = grid_cfg["lo"], grid_cfg["hi"], grid_cfg["nodes"]
    if not (len(lo) == len(hi) == len(nodes) == m):
        raise ConfigError(f"grid axes must match scenario dimension m={m}", path="rate.grid")
    axes = [np.linspace(a, b, n) for a, b, n in zip(lo, hi, nodes)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.ravel() for g in mesh], axis=-1)


def cmd_rate(args) -> int:
    cfg = load_config(args.config)
    scenario = build_scenario(cfg)
    sec = cfg.get("rate", {})
    route = sec.get("route", "dual_sup")
    prefix = output_spec(cfg).prefix
    outdir = _outdir(args, cfg)
    if args.mode == "grid":
        if "grid" not in sec:
            raise ConfigError("rate grid needs a rate.grid section", path="rate.grid")
        zs = _grid_points(sec["grid"], scenario.m)
    else:
        if "z" not in sec:
            raise ConfigError("rate eval needs a rate.z list", path="rate.z")
        zs = np.array(sec["z"], dtype=float)
    try:
        rows = [(z, compute_rate(scenario, z, route)) for z in zs]
    except A4FailureError as e:
        print(f"domain-stability check failed: {e}", file=sys.stderr)
        return EXIT_A4
    csv_path = outdir / f"{prefix}_rate_{args.mode}.csv"
    write_rate_csv(csv_path, scenario.m, rows)
    fig_path = outdir / f"{prefix}_rate_{args.mode}.png"
    values = [rep.value for _, rep in rows]
    if scenario.m == 1:
        order = np.argsort(zs[:, 0])
        plots.rate_curve(zs[order, 0], [values[i] for i in order], fig_path)
    else:
        plots.rate_scatter(zs, values, fig_path)
    print(f"wrote {csv_path} and {fig_path}")
    return EXIT_OK


def cmd_domains(args) -> int:
    cfg = load_config(args.config)
    scenario = build_scenario(cfg)
    res = check_a4(scenario.limit_sets(), scenario.law, scenario.m)
    verdict = {
        "holds": bool(res.equal),
        "witness": None if res.witness is None else res.witness.tolist(),
        "domain": None
        if res.domain is None
        else {"normals": res.domain.normals.tolist(), "bounds": res.domain.bounds.tolist()},
    }
    outdir = _outdir(args, cfg)
    path = outdir / f"{output_spec(cfg).prefix}_a4.json"
    path.write_text(json.dumps(_sanitize(verdict), indent=2))
    print(json.dumps(_sanitize(verdict), indent=2))
    if not res.equal:
        print(f"witness tilt: {res.witness.tolist()}", file=sys.stderr)
        return EXIT_A4
    return EXIT_OK


def _example_figure1(outdir: Path, prefix: str) -> int:
    scenario = figure1_scenario()
    zs = np.arange(0.1, 4.0 + 1e-9, 0.01)
    rows = [(np.array([z]), compute_rate(scenario, [z], "dual_sup")) for z in zs]
    csv_path = outdir / f"{prefix}_figure1.csv"
    write_rate_csv(csv_path, 1, rows)
    plots.rate_curve(zs, [r.value for _, r in rows], outdir / f"{prefix}_figure1.png",
                     title="rate with one outlier weight 3 (kink at 3/2)")
    print(f"wrote {csv_path}")
    return EXIT_OK


def _example_alternating(outdir: Path, prefix: str, which: str) -> int:
    scenario = example1_spec() if which == "example1" else example2_spec()
    res = check_a4(scenario.limit_sets(), scenario.law, scenario.m)
    verdict = {
        "holds": bool(res.equal),
        "witness": None if res.witness is None else res.witness.tolist(),
        "domain_bound": None if res.domain is None else res.domain.bounds.tolist(),
    }
    path = outdir / f"{prefix}_{which}_a4.json"
    path.write_text(json.dumps(_sanitize(verdict), indent=2))
    print(json.dumps(_sanitize(verdict), indent=2))
    if not res.equal:
        print(f"witness tilt: {res.witness.tolist()}", file=sys.stderr)
    return EXIT_OK


def _example_gauss2d(outdir: Path, prefix: str, cfg: dict) -> int:
    sec = cfg.get("gauss2d", {})
    if "measure" in sec:
        pairs = sec["measure"]["atoms"]
        measure = DiscreteMeasure.from_pairs([(p[0], p[1]) for p in pairs])
        params = Gauss2DParams(measure, sec.get("x_min", -4.0), sec.get("x_max", 4.0))
    else:
        params = default_params()
    nodes = sec.get("nodes", 61)
    rows = region_grid(params, (-1.0, 4.0), (-6.0, 6.0), nodes=nodes)
    csv_path = outdir / f"{prefix}_gauss2d_regions.csv"
    with open(csv_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["z1", "z2", "region", "value", "boundary"])
        for x, y, region, val, edge in rows:
            w.writerow([_fmt(x), _fmt(y), region, _fmt(val), int(edge)])
    plots.region_map(rows, outdir / f"{prefix}_gauss2d_regions.png")
    scn = params.scenario()
    spots = [np.array([1.0, 0.0]), np.array([1.0, -2.0]), np.array([1.0, 2.0])]
    spot_rows = [(z, rate_closed_form(params, z, scn)) for z in spots]
    write_rate_csv(outdir / f"{prefix}_gauss2d_spots.csv", 2, spot_rows)
    print(f"wrote {csv_path}")
    return EXIT_OK


def _example_nonconvex(outdir: Path, prefix: str, k1: float, k2: float) -> int:
    res_i = solve_system_I(k1, k2)
    res_bar = solve_system_barI(k1, k2)
    zstar = np.array([1.0, 1.0, k2, k2, 0.0])
    r2 = rate_nonconvex(NonConvexScenario(k1, k2, retained=2), zstar)
    r1 = rate_nonconvex(NonConvexScenario(k1, k2, retained=1), zstar)
    verdict = {
        "k1": k1,
        "k2": k2,
        "two_outliers": {
            "feasible": res_i.feasible,
            "witness": res_i.witness,
            "rate": r2,
            "finite": bool(np.isfinite(r2)),
        },
        "one_outlier": {
            "feasible": res_bar.feasible,
            "witness": res_bar.witness,
            "reason": res_bar.infeasibility_reason,
            "rate": r1,
            "finite": bool(np.isfinite(r1)),
        },
    }
    path = outdir / f"{prefix}_nonconvex.json"
    path.write_text(json.dumps(_sanitize(verdict), indent=2))
    print(json.dumps(_sanitize(verdict), indent=2))
    table = outdir / f"{prefix}_nonconvex.csv"
    with open(table, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["retained", "rate", "verdict"])
        w.writerow([2, _fmt(r2), "finite" if np.isfinite(r2) else "infinite"])
        w.writerow([1, _fmt(r1), "finite" if np.isfinite(r1) else "infinite"])
    return EXIT_OK


def cmd_example(args) -> int:
    cfg = load_config(args.config) if args.config else {}
    outdir = _outdir(args, cfg)
    prefix = output_spec(cfg).prefix
    if args.name == "figure1":
        return _example_figure1(outdir, prefix)
    if args.name in ("example1", "example2"):
        return _example_alternating(outdir, prefix, args.name)
    if args.name == "gauss2d":
        return _example_gauss2d(outdir, prefix, cfg)
    if args.name == "nonconvex":
        return _example_nonconvex(outdir, prefix, args.k1, args.k2)
    raise AssertionError(args.name)


def cmd_mc(args) -> int:
    cfg = load_config(args.config)
    scenario = build_scenario(cfg)
    sec = cfg.get("mc")
    if not sec:
        raise ConfigError("missing mc section", path="mc")
    outdir = _outdir(args, cfg)
    prefix = output_spec(cfg).prefix
    statuses = []

    if "z" in sec:
        plan = build_mc_plan(cfg, scenario)
        try:
            est = estimate_decay(plan)
        except A4FailureError as e:
            print(f"domain-stability check failed: {e}", file=sys.stderr)
            return EXIT_A4
        _write_decay(outdir / f"{prefix}_mc.csv", est)
        plots.decay_plot(est, outdir / f"{prefix}_mc.png")
        verdict = {
            "computed_rate": est.computed_rate,
            "estimated_rate": est.slope,
            "relative_error": est.relative_error,
            "pass": est.agrees,
        }
        (outdir / f"{prefix}_mc.json").write_text(json.dumps(_sanitize(verdict), indent=2))
        print(json.dumps(_sanitize(verdict), indent=2))
        statuses.append(
            EXIT_INCONCLUSIVE if est.agrees is None else (EXIT_OK if est.agrees else EXIT_FAIL)
        )

    if "subsequence" in sec:
        sub = sec["subsequence"]
        ev, od = subsequence_probe(
            scenario,
            sub["z"],
            sub["even"],
            sub["odd"],
            trials=sub.get("trials", 20_000),
            seed=int(cfg.get("seed", 0)),
            rel_tol=sub.get("rel_tol", 0.2),
        )
        for label, est in (("even", ev), ("odd", od)):
            _write_decay(outdir / f"{prefix}_mc_{label}.csv", est)
            plots.decay_plot(est, outdir / f"{prefix}_mc_{label}.png", )
            verdict = {
                "class": label,
                "computed_rate": est.computed_rate,
                "estimated_rate": est.slope,
                "relative_error": est.relative_error,
                "pass": est.agrees,
            }
            (outdir / f"{prefix}_mc_{label}.json").write_text(
                json.dumps(_sanitize(verdict), indent=2)
            )
            print(json.dumps(_sanitize(verdict), indent=2))
            statuses.append(
                EXIT_INCONCLUSIVE if est.agrees is None else (EXIT_OK if est.agrees else EXIT_FAIL)
            )

    if not statuses:
        raise ConfigError("mc section has neither a ball plan nor a subsequence probe", path="mc")
    if EXIT_INCONCLUSIVE in statuses:
        return EXIT_INCONCLUSIVE
    return EXIT_OK if all(s == EXIT_OK for s in statuses) else EXIT_FAIL


def _write_decay(path, est) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["n", "decay", "half_width", "hits", "censored"])
        for n, d, h, k, c in zip(est.n_values, est.decay, est.half_width, est.hits, est.censored):
            w.writerow([n, _fmt(float(d)), _fmt(float(h)), k, int(c)])
        w.writerow([])
        w.writerow(["slope", _fmt(est.slope)])
        w.writerow(["computed_rate", _fmt(est.computed_rate)])


def cmd_spherical(args) -> int:
    cfg = load_config(args.config) if args.config else {}
    sec = cfg.get("gauss2d", {})
    if "measure" in sec:
        pairs = sec["measure"]["atoms"]
        measure = DiscreteMeasure.from_pairs([(p[0], p[1]) for p in pairs])
        params = Gauss2DParams(measure, sec.get("x_min", -4.0), sec.get("x_max", 4.0))
    else:
        params = default_params()
    theta = args.theta if args.theta is not None else cfg.get("spherical", {}).get("theta")
    if theta is None:
        raise ConfigError("need --theta or a spherical.theta entry", path="spherical.theta")
    value = spherical_rank_one(params, float(theta))
    outdir = _outdir(args, cfg)
    result = {"theta": float(theta), "value": value}
    (outdir / f"{output_spec(cfg).prefix}_spherical.json").write_text(
        json.dumps(_sanitize(result), indent=2)
    )
    print(json.dumps(_sanitize(result), indent=2))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ldpkit", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    rate = sub.add_parser("rate", help="evaluate the rate at points or on a grid")
    rate.add_argument("mode", choices=["eval", "grid"])
    rate.add_argument("--config", required=True)
    rate.add_argument("--out")
    rate.set_defaults(fn=cmd_rate)

    dom = sub.add_parser("domains", help="domain-stability diagnostics")
    dom_sub = dom.add_subparsers(dest="check", required=True)
    a4 = dom_sub.add_parser("check-a4", help="compare inner/outer tilt domains")
    a4.add_argument("--config", required=True)
    a4.add_argument("--out")
    a4.set_defaults(fn=cmd_domains)

    ex = sub.add_parser("example", help="reproduce a worked example")
    ex.add_argument("name", choices=["gauss2d", "nonconvex", "figure1", "example1", "example2"])
    ex.add_argument("--config")
    ex.add_argument("--out")
    ex.add_argument("--k1", type=float, default=1.5)
    ex.add_argument("--k2", type=float, default=1.4)
    ex.set_defaults(fn=cmd_example)

    mc = sub.add_parser("mc", help="Monte Carlo verification")
    mc_sub = mc.add_subparsers(dest="verify", required=True)
    mv = mc_sub.add_parser("verify", help="tilted-IS decay vs computed rate")
    mv.add_argument("--config", required=True)
    mv.add_argument("--out")
    mv.set_defaults(fn=cmd_mc)

    sph = sub.add_parser("spherical", help="rank-one spherical asymptotics")
    sph_sub = sph.add_subparsers(dest="rank", required=True)
    r1 = sph_sub.add_parser("rank1")
    r1.add_argument("--theta", type=float)
    r1.add_argument("--config")
    r1.add_argument("--out")
    r1.set_defaults(fn=cmd_spherical)

    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as e:
        print(str(e), file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except A4FailureError as e:
        print(str(e), file=sys.stderr)
        return EXIT_A4
    except ValueError as e:
        # Config-induced contract violations (bad tilts, dimensions, ranges)
        # surface before any sampling or solving starts.
        print(f"invalid run: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    raise SystemExit(main())
