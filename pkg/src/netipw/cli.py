"""Command-line front door: validate -> fit -> estimate -> variance -> report.

Exit codes: 0 on success, 1 on runtime/fit failure, 2 on input validation
failure.  Errors are emitted as one machine-readable JSON object on stderr.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import secrets
import sys

import numpy as np

from .api import estimate_effects
from .estimator import EFFECT_KINDS, effects_to_records
from .exceptions import (
    EmptyInputError,
    GraphInputError,
    NetipwError,
    ValidationError,
)
from .graph import (
    components,
    fast_greedy_communities,
    network_stats,
    read_edge_csv,
)
from .propensity import StudyData, read_study_csv
from .simulate import SCENARIOS, ScenarioConfig, run_study

VALIDATION_EXIT = 2
RUNTIME_EXIT = 1


def _parse_alpha_list(text):
    try:
        values = [float(v) for v in text.split(",") if v.strip() != ""]
    except ValueError:
        raise ValidationError(f"bad alpha list {text!r}")
    if not values:
        raise ValidationError("alpha list is empty")
    if not all(0.0 < v < 1.0 for v in values):
        raise ValidationError("all alpha values must be strictly inside (0, 1)")
    return tuple(sorted(set(values)))


def _parse_effects(text):
    wanted = tuple(e.strip() for e in text.split(",") if e.strip())
    for e in wanted:
        if e not in EFFECT_KINDS:
            raise ValidationError(f"unknown effect {e!r}")
    return wanted


def _load_validated_inputs(edge_path, data_path):
    """Apply the exclusion accounting: missing outcomes first, then isolates."""
    net = read_edge_csv(edge_path)
    ids, exposure, outcome, z, znames = read_study_csv(data_path)
    by_id = {nid: i for i, nid in enumerate(ids)}
    if len(by_id) != len(ids):
        raise ValidationError(f"{data_path}: duplicate ids")
    missing = [nid for nid in net.node_ids if nid not in by_id]
    if missing:
        raise ValidationError(
            f"{data_path}: no data row for {len(missing)} network node(s), "
            f"e.g. {missing[:5]}"
        )

    missing_outcome = [nid for nid in ids if math.isnan(outcome[by_id[nid]])]
    kept_ids = [nid for nid in ids if not math.isnan(outcome[by_id[nid]])]

    # ids never named in the edge file have no connections at all
    isolates = [nid for nid in kept_ids if nid not in net]
    in_net = [nid for nid in kept_ids if nid in net]
    subnet = net.subgraph([net.index_of(nid) for nid in in_net])
    degree_zero = [
        subnet.node_ids[i] for i in np.flatnonzero(subnet.degrees == 0)
    ]
    isolates.extend(degree_zero)
    if degree_zero:
        keep = [i for i in range(subnet.n) if subnet.degrees[i] > 0]
        subnet = subnet.subgraph(keep)

    rows = [by_id[nid] for nid in subnet.node_ids]
    data = StudyData(
        exposure=exposure[rows], outcome=outcome[rows], covariates=z[rows]
    )
    exclusions = {
        "missing_outcome": len(missing_outcome),
        "isolates": len(isolates),
    }
    return subnet, data, exclusions, znames


def _format_csv(records, digits=6):
    lines = ["estimator,effect,alpha1,alpha0,estimate,se,ci_lo,ci_hi"]
    fmt = f"%.{digits}g"
    for r in records:
        lines.append(
            ",".join(
                [
                    r["estimator"],
                    r["effect"],
                    fmt % r["alpha1"],
                    fmt % r["alpha0"],
                    fmt % r["estimate"],
                    fmt % r["se"],
                    fmt % r["ci_lo"],
                    fmt % r["ci_hi"],
                ]
            )
        )
    return "\n".join(lines) + "\n"


def _write_or_print(text, out):
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_estimate(args):
    net, data, exclusions, _ = _load_validated_inputs(args.edges, args.data)
    if net.n == 0:
        raise EmptyInputError("no analyzable nodes remain after exclusions")
    part = (
        fast_greedy_communities(net)
        if args.partition == "community"
        else components(net)
    )
    alpha_grid = _parse_alpha_list(args.alpha)
    effects = _parse_effects(args.effects)
    methods = ["ipw1", "ipw2"] if args.estimator == "both" else [args.estimator]

    records = []
    fits = {}
    for method in methods:
        fit, theta, cov, results = estimate_effects(
            net,
            data,
            method=method,
            alpha_grid=alpha_grid,
            effects=effects,
            partition=part,
            ci_level=args.ci_level,
        )
        fits[method] = fit.summary()
        records.extend(effects_to_records(results))
        if args.dump_sigma:
            path = args.dump_sigma
            if len(methods) > 1:
                stem, ext = os.path.splitext(path)
                path = f"{stem}_{method}{ext or '.csv'}"
            np.savetxt(path, cov.sigma, delimiter=",")

    if args.json:
        payload = {
            "command": "estimate",
            "exclusions": exclusions,
            "partition": {"kind": part.kind, "parts": part.m},
            "network": {"nodes": net.n, "edges": net.edge_count},
            "fits": fits,
            "results": records,
        }
        _write_or_print(json.dumps(payload, indent=2) + "\n", args.out)
    else:
        header = (
            f"# nodes={net.n} edges={net.edge_count} partition={part.kind}:{part.m} "
            f"excluded_missing_outcome={exclusions['missing_outcome']} "
            f"excluded_isolates={exclusions['isolates']}\n"
        )
        _write_or_print(header + _format_csv(records), args.out)
    return 0


def cmd_simulate(args):
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            base = json.load(fh)
    else:
        base = {}
    overrides = {
        "scenario": args.scenario,
        "m": args.components,
        "reps": args.reps,
        "seed": args.seed,
        "mean_size": args.mean_size,
        "degree": args.degree,
        "partition": args.partition,
        "threads": args.threads,
    }
    for key, val in overrides.items():
        if val is not None:
            base[key] = val
    if args.alpha is not None:
        base["alpha_grid"] = list(_parse_alpha_list(args.alpha))
    if args.estimator is not None:
        base["estimators"] = (
            ["ipw1", "ipw2"] if args.estimator == "both" else [args.estimator]
        )
    if "seed" not in base or base["seed"] is None:
        base["seed"] = secrets.randbits(63)

    config = ScenarioConfig.from_dict(base)
    report = run_study(config)
    if args.out:
        with open(args.out + ".csv", "w", encoding="utf-8") as fh:
            fh.write(report.to_csv_text())
        with open(args.out + ".json", "w", encoding="utf-8") as fh:
            fh.write(report.to_json_text())
        sys.stdout.write(
            f"seed={config.seed} reps={config.reps} wrote {args.out}.csv "
            f"and {args.out}.json\n"
        )
    else:
        sys.stdout.write(f"# seed={config.seed}\n")
        sys.stdout.write(report.to_csv_text())
    return 0


def cmd_graph_stats(args):
    net = read_edge_csv(args.edges)
    stats = network_stats(net)
    _write_or_print(json.dumps(stats.to_dict(), indent=2) + "\n", args.out)
    return 0


def cmd_communities(args):
    net = read_edge_csv(args.edges)
    part = fast_greedy_communities(net)
    payload = {
        "kind": part.kind,
        "parts": part.m,
        "cut_edges": part.cut_edges,
        "assignment": part.to_records(net),
    }
    _write_or_print(json.dumps(payload, indent=2) + "\n", args.out)
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="netipw",
        description=(
            "Direct and spillover effects of a non-randomized intervention on "
            "an observed network, via IPW with sandwich variances."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    est = sub.add_parser("estimate", help="estimate effects from edge and data CSVs")
    est.add_argument("--edges", required=True, help="edge list CSV (from,to)")
    est.add_argument("--data", required=True, help="study CSV (id,exposure,outcome,z...)")
    est.add_argument("--estimator", choices=["ipw1", "ipw2", "both"], default="both")
    est.add_argument("--alpha", default="0.25,0.5,0.75", help="comma list of coverages")
    est.add_argument("--effects", default=",".join(EFFECT_KINDS))
    est.add_argument("--partition", choices=["observed", "community"], default="observed")
    est.add_argument("--ci-level", type=float, default=0.95, dest="ci_level")
    est.add_argument("--seed", type=int, default=None, help="unused; estimation is deterministic")
    est.add_argument("--threads", type=int, default=os.cpu_count())
    est.add_argument("--out", default=None)
    est.add_argument("--json", action="store_true", help="full-precision JSON output")
    est.add_argument("--dump-sigma", default=None, dest="dump_sigma")
    est.set_defaults(func=cmd_estimate)

    sim = sub.add_parser("simulate", help="run a replicated simulation study")
    sim.add_argument("--scenario", choices=list(SCENARIOS), default=None)
    sim.add_argument("--components", type=int, default=None)
    sim.add_argument("--reps", type=int, default=None)
    sim.add_argument("--seed", type=int, default=None)
    sim.add_argument("--mean-size", type=float, default=None, dest="mean_size")
    sim.add_argument("--degree", type=int, default=None)
    sim.add_argument("--alpha", default=None)
    sim.add_argument("--estimator", choices=["ipw1", "ipw2", "both"], default=None)
    sim.add_argument("--partition", choices=["observed", "community"], default=None)
    sim.add_argument("--threads", type=int, default=os.cpu_count())
    sim.add_argument("--config", default=None, help="scenario config JSON")
    sim.add_argument("--out", default=None, help="output path base (.csv/.json added)")
    sim.set_defaults(func=cmd_simulate)

    gst = sub.add_parser("graph-stats", help="descriptive network statistics JSON")
    gst.add_argument("--edges", required=True)
    gst.add_argument("--out", default=None)
    gst.set_defaults(func=cmd_graph_stats)

    com = sub.add_parser("communities", help="fast-greedy modularity communities JSON")
    com.add_argument("--edges", required=True)
    com.add_argument("--out", default=None)
    com.set_defaults(func=cmd_communities)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValidationError, GraphInputError) as exc:
        sys.stderr.write(
            json.dumps({"error": exc.code, "message": str(exc)}) + "\n"
        )
        return VALIDATION_EXIT
    except NetipwError as exc:
        sys.stderr.write(
            json.dumps({"error": exc.code, "message": str(exc)}) + "\n"
        )
        return RUNTIME_EXIT


if __name__ == "__main__":
    sys.exit(main())
