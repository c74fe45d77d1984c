"""Command-line entry point ``gre``.

Exit status: 0 on success, 1 on a domain error (a JSON object describing it
is written to standard error), 2 on a usage error or a missing input file.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from . import io
from .classical import Sequence, e_algorithm, GermainBonne, Thiele, richardson, shanks
from .core import Dataset, GreModel, box_fill_distance, fill_distance_threshold, fit
from .design import DesignProblem, optimize_design
from .kernels import kernel_from_json
from .multioutput import GridDataset, fit_grid
from .order import BoundFamily, OrderGrid, estimate_order
from .problems import PROBLEMS, central_difference_oracle, run_convergence_study
from .simulator import SimulatorSpec, WorkflowConfig, run_workflow


class UsageError(Exception):
    pass


def _precision(text: str):
    if text in (None, "double"):
        return None
    if text.startswith("extended:"):
        digits = int(text.split(":", 1)[1])
        if digits < 16:
            raise argparse.ArgumentTypeError("extended precision needs at least 16 digits")
        return digits
    raise argparse.ArgumentTypeError("precision must be 'double' or 'extended:<digits>'")


def _existing(path):
    if path is not None and not Path(path).is_file():
        raise UsageError(f"no such file: {path}")
    return path


def _load_json(path):
    _existing(path)
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def _emit(text: str, out):
    if out:
        io.atomic_write(out, text)
    else:
        sys.stdout.write(text)


def _diagnostics(dataset: Dataset, model: GreModel, seed):
    P = dataset.points
    out = {}
    if np.all(P <= 1):
        n_random = 0 if seed is None else 4096
        fd = box_fill_distance(P, seed=seed, n_random=n_random)
        out["box_fill_distance"] = {"value": fd.value, "exact": fd.exact}
        r = getattr(model.bound, "r", None) or max(getattr(model.bound, "orders", [1.0]))
        s = getattr(model.kernel, "s", 0)
        out["fill_distance_threshold"] = fill_distance_threshold(dataset.dim, r, s)
    return out


# --------------------------------------------------------------------------
# subcommands


def cmd_fit(args):
    dataset = io.read_dataset(_existing(args.data))
    model = GreModel.from_json(_load_json(args.model))
    post = fit(dataset, model, dps=args.precision)
    doc = {
        "model": model.to_json(),
        "dataset": {
            "points": dataset.points,
            "values": [float(v) for v in dataset.values],
            "costs": dataset.costs,
        },
        "precision": "double" if args.precision is None else f"extended:{args.precision}",
        "summary": post.summary(args.alpha),
        "diagnostics": _diagnostics(dataset, model, args.seed),
    }
    _emit(io.dump_json(doc), args.out)


def cmd_extrapolate(args):
    if args.fit:
        doc = _load_json(args.fit)
        model = GreModel.from_json(doc["model"])
        ds = doc["dataset"]
        dataset = Dataset(np.array(ds["points"]), np.array(ds["values"]),
                          None if ds.get("costs") is None else np.array(ds["costs"]))
        precision = args.precision
        if precision is None and doc.get("precision", "double") != "double":
            precision = _precision(doc["precision"])
    else:
        if not (args.data and args.model):
            raise UsageError("extrapolate needs --data and --model, or --fit")
        _existing(args.data)
        model_doc = _load_json(args.model)
        if io.has_index_column(args.data):
            return _extrapolate_grid(args, model_doc)
        dataset = io.read_dataset(args.data)
        model = GreModel.from_json(model_doc)
        precision = args.precision
    post = fit(dataset, model, dps=precision)
    _emit(io.dump_json(post.summary(args.alpha)), args.out)


def _extrapolate_grid(args, model_doc):
    points, t, f = io.read_long_grid(args.data)
    grid = GridDataset.from_long(points, t, f)
    model = GreModel.from_json(model_doc)
    kernel_t = kernel_from_json(model_doc["kernel_t"]) if "kernel_t" in model_doc else None
    post = fit_grid(grid, model, kernel_t)
    tt, mean, sd = post.trajectory()
    _emit(io.csv_text(["t", "mean", "sd"], zip(tt, mean, sd)), args.out)


def cmd_design(args):
    X, costs = io.read_candidates(_existing(args.candidates))
    model = GreModel.from_json(_load_json(args.model))
    problem = DesignProblem(X, costs, args.budget, model.bound, model.kernel, model.nugget_relative)
    sol = optimize_design(problem, workers=args.workers or 1)
    doc = sol.to_json()
    doc["points"] = X[list(sol.selected)]
    _emit(io.dump_json(doc), args.out)
    lines = [f"{'idx':>4}  {'x':<28}  {'cost':>12}"]
    for i in sol.selected:
        lines.append(f"{i:>4}  {str([float(v) for v in X[i]]):<28}  {costs[i]:>12.6g}")
    lines.append(f"total cost {sol.total_cost:.6g} of {args.budget:.6g}; objective {sol.objective:.6g}"
                 f" ({sol.method.value}{', optimal' if sol.optimality_flag else ''})")
    print("\n".join(lines), file=sys.stdout if args.out else sys.stderr)


def cmd_estimate_order(args):
    dataset = io.read_dataset(_existing(args.data))
    grid = OrderGrid.from_json(_load_json(args.grid)) if args.grid else OrderGrid()
    est = estimate_order(dataset, grid, BoundFamily(args.bound_family), workers=args.workers or 1)
    doc = est.to_json()
    doc["surface_csv"] = io.csv_text(
        ["r", "s", "ell", "log_ql"],
        ([";".join(map(repr, r)) if isinstance(r, tuple) else r, s, ell, ll] for r, s, ell, ll in est.surface),
    )
    _emit(io.dump_json(doc), args.out)


def cmd_classical(args):
    x, y = io.read_sequence(_existing(args.data))
    seq = Sequence(y, x)
    method = args.method
    if method == "richardson":
        res = richardson(seq, args.order, args.depth, args.step)
        rows = zip(res.index, res.x, res.y)
    elif method == "shanks":
        res = shanks(seq)
        rows = zip(res.index, res.x if res.x is not None else [""] * len(res.y), res.y)
    else:
        basis = GermainBonne(args.n) if method == "germain-bonne" else Thiele(args.p)
        last = len(seq) - basis.needed(0)
        if last < 0:
            raise ValueError(f"{method} needs at least {basis.needed(0)} terms")
        vals = [e_algorithm(seq, basis, m) for m in range(last + 1)]
        # label each estimate with the finest term it uses
        xs = [x[basis.needed(m) - 1] if x is not None else "" for m in range(last + 1)]
        rows = zip(range(last + 1), xs, vals)
    _emit(io.csv_text(["m", "x", "y"], rows), args.out)


def cmd_study(args):
    if args.problem == "central-difference":
        problem = central_difference_oracle(args.s_true)
        base = args.base or [0.2, 0.4, 0.6, 0.8, 1.0]
        h = args.h or [1, 0.7, 0.5, 0.35, 0.25, 0.18]
    else:
        problem = PROBLEMS[args.problem]()
        base = args.base or [1, 1 / 2, 1 / 4, 1 / 8, 1 / 16]
        h = args.h or [1, 1 / 2, 1 / 4]
    methods = args.methods or [f"gre:{args.kernel}:{args.s}:{args.ell!r}", "raw", "richardson"]
    res = run_convergence_study(problem, base, h, methods, args.precision)
    _emit(io.csv_text(["h", "method", "abs_error", "rel_error"], res.rows()), args.out)
    if args.summary:
        io.atomic_write(args.summary, io.dump_json(res.summary()))
    elif args.out:
        print(io.dump_json(res.summary()), end="")


def cmd_workflow(args):
    doc = _load_json(args.config)
    base = Path(args.config).resolve().parent
    spec = SimulatorSpec.from_json(doc["simulator"])
    config = WorkflowConfig.from_json(doc, base)
    if args.workers:
        config = dataclasses.replace(config, workers=args.workers)
    outcome = run_workflow(spec, config)
    _emit(io.dump_json(outcome.report), args.out)
    r = outcome.report
    print(f"f(0) ~ {r['mean_at_zero']:.10g} +/- {r['sd_at_zero']:.3g} "
          f"({len(r['design']['points'])} design runs, {outcome.simulator_calls} new simulator calls)",
          file=sys.stderr)
    for w in r["warnings"]:
        print(f"warning: {w}", file=sys.stderr)


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="gre", description="Gauss-Richardson extrapolation.")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, alpha=True):
        p.add_argument("--out", help="output path (default: standard output)")
        p.add_argument("--precision", type=_precision, default=None, help="double | extended:<digits>")
        p.add_argument("--workers", type=int, default=None)
        p.add_argument("--seed", type=int, default=None, help="seed for randomised diagnostics")
        if alpha:
            p.add_argument("--alpha", type=float, default=0.05)

    p = sub.add_parser("fit", help="fit a model and save it with its data")
    p.add_argument("--data", required=True)
    p.add_argument("--model", required=True)
    common(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("extrapolate", help="report the extrapolated value at zero")
    p.add_argument("--data")
    p.add_argument("--model")
    p.add_argument("--fit", help="output of 'gre fit' to reuse instead of --data/--model")
    common(p)
    p.set_defaults(func=cmd_extrapolate)

    p = sub.add_parser("design", help="choose fidelities under a cost budget")
    p.add_argument("--candidates", required=True)
    p.add_argument("--budget", type=float, required=True)
    p.add_argument("--model", required=True)
    common(p, alpha=False)
    p.set_defaults(func=cmd_design)

    p = sub.add_parser("estimate-order", help="quasi-likelihood grid search")
    p.add_argument("--data", required=True)
    p.add_argument("--grid")
    p.add_argument("--bound-family", choices=[b.value for b in BoundFamily], default="monomial")
    common(p, alpha=False)
    p.set_defaults(func=cmd_estimate_order)

    p = sub.add_parser("classical", help="classical sequence transformations")
    p.add_argument("--data", required=True)
    p.add_argument("--method", choices=["richardson", "shanks", "germain-bonne", "thiele"], required=True)
    p.add_argument("--order", type=float, default=1.0, help="leading power for richardson")
    p.add_argument("--step", type=float, default=1.0, help="power increment for richardson")
    p.add_argument("--depth", type=int, default=None)
    p.add_argument("--n", type=int, default=2, help="unknowns for germain-bonne")
    p.add_argument("--p", type=int, default=1, help="degree for thiele")
    common(p, alpha=False)
    p.set_defaults(func=cmd_classical)

    p = sub.add_parser("study", help="convergence study on a built-in problem")
    p.add_argument("--problem", choices=sorted(PROBLEMS), required=True)
    p.add_argument("--kernel", choices=["matern", "wendland", "gaussian"], default="matern")
    p.add_argument("--s", type=int, default=2)
    p.add_argument("--ell", type=float, default=1.0)
    p.add_argument("--s-true", type=int, default=2)
    p.add_argument("--h", type=float, nargs="+")
    p.add_argument("--base", type=float, nargs="+")
    p.add_argument("--methods", nargs="+")
    p.add_argument("--summary", help="path for the JSON summary with fitted slopes")
    common(p, alpha=False)
    p.set_defaults(func=cmd_study)

    p = sub.add_parser("workflow", help="pilot, design and extrapolate against a simulator")
    p.add_argument("--config", required=True)
    common(p, alpha=False)
    p.set_defaults(func=cmd_workflow)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"gre: error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"gre: error: no such file: {exc.filename}", file=sys.stderr)
        return 2
    except (ValueError, ArithmeticError, RuntimeError, np.linalg.LinAlgError, KeyError) as exc:
        err = {"error": type(exc).__name__, "message": str(exc)}
        pair = getattr(exc, "pair", None)
        if pair is not None:
            err["points"] = list(pair)
        print(json.dumps(err), file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
