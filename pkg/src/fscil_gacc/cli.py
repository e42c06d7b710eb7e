"""Command-line entry point: ``fscil-gacc <subcommand> [flags]``.

Exit status 0 on success, 2 on usage errors, 1 on validation/runtime errors.
Errors are reported as one JSON line on stderr.
"""
import argparse
import json
import os
import sys
import tempfile

from . import metrics
from .corner import CASES, corner_matrix
from .errors import FSCILError
from .gradcheck import TOLERANCE, run_gradcheck
from .task_matrix import TaskLayout, emit_matrix, read_matrix


def _atomic_write(path, text):
    path = os.path.abspath(path)
    directory = os.path.dirname(path)
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _emit(args, text):
    if args.output:
        _atomic_write(args.output, text)
    else:
        sys.stdout.write(text)


def _print_summary(report):
    print(f"aAcc {report.aacc:.2f}  lAcc {report.lacc:.2f}  tAcc {report.tacc:.2f}  gAcc {report.gacc:.2f}",
          file=sys.stderr)


def cmd_eval(args):
    m = read_matrix(args.input, args.format)
    report = metrics.evaluate(m, args.alpha_grid)
    _emit(args, report.to_json())
    _print_summary(report)


def cmd_curve(args):
    m = read_matrix(args.input, args.format)
    _emit(args, metrics.curves_csv(m, args.alpha_grid))


def cmd_oracle(args):
    layout = TaskLayout(args.tasks, args.base_classes, args.novel_classes)
    m = corner_matrix(args.case, args.base_acc, layout)
    _emit(args, emit_matrix(m, args.format or "csv"))


def cmd_compare(args):
    named = []
    for path in args.inputs:
        name = os.path.splitext(os.path.basename(path))[0]
        named.append((name, read_matrix(path, args.format)))
    ranking = metrics.compare(named, args.metric, args.alpha, args.alpha_grid)
    out = {"metric": args.metric, "alpha": args.alpha,
           "ranking": [{"rank": k, "name": n, "value": v} for k, (n, v) in enumerate(ranking, start=1)]}
    _emit(args, json.dumps(out, indent=2) + "\n")
    for k, (n, v) in enumerate(ranking, start=1):
        print(f"{k}. {n} {v:.2f}", file=sys.stderr)


def _load_sim(args):
    from dataclasses import replace

    from .rectify.objective import LossWeights
    from .simulator import ScenarioConfig, TrainingConfig, load_config

    if args.config:
        cfg, training, weights = load_config(args.config)
    else:
        cfg, training, weights = ScenarioConfig(), TrainingConfig(), LossWeights()
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    return cfg, training, weights


def cmd_simulate(args):
    from .simulator import generate_scenario, run_baseline, run_fr

    cfg, training, weights = _load_sim(args)
    scen = generate_scenario(cfg)
    base = run_baseline(cfg, scenario=scen)
    res = run_fr(cfg, weights, training, scenario=scen)
    fmt = args.format or "csv"
    outputs = {f"baseline.{fmt}": base, f"ensemble.{fmt}": res.ensemble}
    for layer, m in res.per_branch.items():
        outputs[f"branch_{layer}.{fmt}"] = m
    summary = {
        "config": cfg.to_dict(),
        "reports": {name.rsplit(".", 1)[0]: metrics.evaluate(m, args.alpha_grid).to_dict()
                    for name, m in outputs.items()},
    }
    if not args.output:
        sys.stdout.write(emit_matrix(res.ensemble, fmt))
        return
    for name, m in outputs.items():
        _atomic_write(os.path.join(args.output, name), emit_matrix(m, fmt))
    _atomic_write(os.path.join(args.output, "report.json"), json.dumps(summary, indent=2) + "\n")
    for name, rep in summary["reports"].items():
        agg = rep["aggregate"]
        print(f"{name}: aAcc {agg['aacc']:.2f} gAcc {agg['gacc']:.2f}", file=sys.stderr)


def cmd_ablate(args):
    from .simulator import ablation_table_json, run_ablation_suite

    cfg, training, weights = _load_sim(args)
    results = run_ablation_suite(cfg, weights=weights, training=training, grid_points=args.alpha_grid)
    _emit(args, ablation_table_json(results))
    for r in results:
        print(f"{json.dumps(r['cell'])}: aAcc {r['report'].aacc:.2f} gAcc {r['report'].gacc:.2f}", file=sys.stderr)


def cmd_gradcheck(args):
    results = run_gradcheck(args.seed or 0, args.configs)
    out = {
        "seed": args.seed or 0,
        "configs": args.configs,
        "tolerance": TOLERANCE,
        "checks": [{"name": r.name, "max_rel_error": r.max_rel_error, "coords": r.n_coords, "passed": r.passed}
                   for r in results],
    }
    _emit(args, json.dumps(out, indent=2) + "\n")
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'} {r.name} max_rel_error={r.max_rel_error:.3e}", file=sys.stderr)
    return 0 if all(r.passed for r in results) else 1


def build_parser():
    parser = argparse.ArgumentParser(prog="fscil-gacc", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, input_=True):
        if input_:
            p.add_argument("--input", required=True, help="matrix file (.csv or .json)")
        p.add_argument("--output", help="output path (stdout when omitted)")
        p.add_argument("--format", choices=("csv", "json"), help="matrix format (default: by extension / csv)")
        p.add_argument("--alpha-grid", type=int, default=None, help="alpha grid intervals (default round(r))")

    p = sub.add_parser("eval", help="compute the metric report of one matrix")
    common(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("curve", help="emit gAcc(alpha) curves as CSV")
    common(p)
    p.set_defaults(func=cmd_curve)

    p = sub.add_parser("oracle", help="emit a corner-case matrix")
    p.add_argument("--case", required=True, choices=CASES)
    p.add_argument("--base-acc", type=float, default=85.0)
    p.add_argument("--tasks", type=int, default=9)
    p.add_argument("--base-classes", type=int, default=60)
    p.add_argument("--novel-classes", type=int, default=5)
    p.add_argument("--output")
    p.add_argument("--format", choices=("csv", "json"))
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("compare", help="rank several matrices by one metric")
    p.add_argument("--inputs", action="append", required=True, help="matrix file; repeat for each method")
    p.add_argument("--metric", choices=metrics.METRIC_KEYS, default="gacc")
    p.add_argument("--alpha", type=float, default=None, help="rank by mean gAcc at this alpha")
    p.add_argument("--alpha-grid", type=int, default=None)
    p.add_argument("--format", choices=("csv", "json"))
    p.add_argument("--output")
    p.set_defaults(func=cmd_compare)

    for name, func, hlp in (("simulate", cmd_simulate, "run the synthetic baseline and FR pipeline"),
                            ("ablate", cmd_ablate, "run the loss / branch ablation grid")):
        p = sub.add_parser(name, help=hlp)
        p.add_argument("--config", help="scenario JSON")
        p.add_argument("--seed", type=int, default=None, help="overrides the config seed")
        p.add_argument("--output", help="output directory (simulate) or JSON file (ablate)")
        p.add_argument("--format", choices=("csv", "json"))
        p.add_argument("--alpha-grid", type=int, default=None)
        p.set_defaults(func=func)

    p = sub.add_parser("gradcheck", help="finite-difference check of every gradient")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--configs", type=int, default=100)
    p.add_argument("--output")
    p.set_defaults(func=cmd_gradcheck)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        status = args.func(args)
    except (FSCILError, ValueError, OSError, KeyError, json.JSONDecodeError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 1
    return status or 0


if __name__ == "__main__":
    sys.exit(main())
