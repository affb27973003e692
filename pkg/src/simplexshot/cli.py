"""Command-line interface.

Exit codes: 0 success, 2 unreadable feature file, 3 solver failure,
4 bad arguments.
"""
import argparse
import csv
import json
import sys

import numpy as np

from . import _backend
from .classifier import DEFAULT_ALPHA
from .data import (
    FeatureDataset,
    generate_dataset,
    generate_synthetic,
    load_features,
    save_features,
    save_truth,
)
from .errors import FeatureFileError, InvalidInputError, SimplexShotError, SolverError
from .evaluation import EvalConfig, run_episodes, run_sweep, write_sweep_csv
from .model_selection import SelectionConfig, select_k
from .projection import project
from .solver import SolverConfig, solve

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_SOLVER = 3
EXIT_USAGE = 4


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _float_list(text):
    try:
        return tuple(float(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _add_solver_flags(p):
    g = p.add_argument_group("solver")
    g.add_argument("--lambda", dest="lam", type=float, default=0.05,
                   help="vertex dispersion weight in [0, 1] (default 0.05)")
    g.add_argument("--outer-iters", type=int, default=50)
    g.add_argument("--w-steps", type=int, default=20, help="W gradient steps per outer round")
    g.add_argument("--lr", type=float, default=0.1, help="initial W step size")
    g.add_argument("--rel-tol", type=float, default=1e-6)
    g.add_argument("--ridge-eps", type=float, default=1e-8)
    g.add_argument("--no-extrapolation", action="store_true",
                   help="plain alternation without the extrapolated step")
    g.add_argument("--seed", type=int, default=0)


def _add_selection_flags(p):
    g = p.add_argument_group("vertex-count selection")
    g.add_argument("--k-max", type=int, default=3)
    g.add_argument("--ratio-threshold", type=float, default=1.5)
    g.add_argument("--restarts", type=int, default=3)


def _solver_config(args):
    return SolverConfig(lam=args.lam, outer_iters=args.outer_iters,
                        w_steps_per_outer=args.w_steps, learning_rate=args.lr,
                        objective_rel_tol=args.rel_tol, ridge_eps=args.ridge_eps,
                        seed=args.seed, extrapolation=not args.no_extrapolation)


def _selection_config(args):
    return SelectionConfig(k_max=args.k_max, ratio_threshold=args.ratio_threshold,
                           restarts_per_k=args.restarts, solver=_solver_config(args))


def _image(dataset, image_id):
    if image_id not in dataset.features:
        raise UsageError(f"image id {image_id!r} not found in feature file")
    return dataset.features[image_id]


def cmd_solve(args):
    dataset = load_features(args.features)
    X = _image(dataset, args.image_id)
    model = solve(X, args.k, _solver_config(args))
    if args.out:
        payload = {
            "image_id": args.image_id,
            "k": model.k,
            "vertices": model.vertices.tolist(),
            "weights": model.weights.tolist(),
            "objective_trace": list(model.objective_trace),
            "initial_objective": model.initial_objective,
            "final_objective": model.final_objective,
            "recon_error": model.recon_error,
            "converged": model.converged,
            "config": vars(_solver_config(args)),
        }
        with open(args.out, "w") as fh:
            json.dump(payload, fh, indent=1)
    print(f"image={args.image_id} k={model.k} objective={model.final_objective:.10g} "
          f"recon_error={model.recon_error:.10g} rounds={model.n_iter} converged={model.converged}")


def cmd_select(args):
    dataset = load_features(args.features)
    if len(dataset) == 0:
        raise FeatureFileError("feature file contains no images")
    ids = [args.image_id] if args.image_id else dataset.image_ids
    config = _selection_config(args)
    header = ["image_id", "label", "chosen_k"] + [f"error_k{k}" for k in range(1, config.k_max + 1)]
    rows = []
    for image_id in ids:
        result = select_k(_image(dataset, image_id), config)
        rows.append([image_id, dataset.labels[image_id], result.chosen_k]
                    + [repr(e) for e in result.errors])
        print(f"{image_id} chosen_k={result.chosen_k}")
    if args.out:
        with open(args.out, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            writer.writerows(rows)


def cmd_synth(args):
    X, truth = generate_synthetic(args.k, args.n, args.dim, args.sigma, args.separation,
                                  args.concentration, args.seed)
    save_features(FeatureDataset.from_items([(args.image_id, args.label, X)]), args.out)
    if args.truth_out:
        save_truth(truth, args.truth_out)
    print(f"wrote {args.n} crops of dim {args.dim} from {args.k} vertices to {args.out}")


def cmd_synth_dataset(args):
    dataset = generate_dataset(args.classes, args.images_per_class, args.crops, args.dim,
                               args.max_objects, args.separation, args.sigma,
                               args.concentration, args.seed)
    save_features(dataset, args.out)
    print(f"wrote {len(dataset)} images in {args.classes} classes to {args.out}")


def cmd_eval(args):
    dataset = load_features(args.features)
    config = EvalConfig(n_episodes=args.episodes, way=args.way,
                        queries_per_class=args.queries, alpha=args.alpha,
                        k1_filter=args.k1_filter, lambdas=args.lambda_sweep or (),
                        seed=args.seed, cache=not args.no_cache,
                        selection=_selection_config(args), workers=args.workers)
    if config.lambdas:
        reports = run_sweep(dataset, config)
        for lam, report in reports:
            print(f"lambda={lam:g} accuracy={100 * report.accuracy_mean:.2f} "
                  f"+- {100 * report.ci95_halfwidth:.2f} pool={report.pool_size}")
        if args.out:
            with open(args.out, "w") as fh:
                json.dump({"sweep": [{"lambda": lam, "report": r.to_dict()} for lam, r in reports]},
                          fh, indent=1)
        if args.sweep_out:
            write_sweep_csv(reports, args.sweep_out)
        return
    report = run_episodes(dataset, config)
    print(f"accuracy={100 * report.accuracy_mean:.2f} +- {100 * report.ci95_halfwidth:.2f} "
          f"episodes={report.episodes_used} pool={report.pool_size} "
          f"excluded={report.excluded_images}")
    if args.out:
        report.save(args.out)


def _resolve_anchor(dataset, text):
    try:
        values = [float(t) for t in text.split(",")]
    except ValueError:
        try:
            return dataset.class_mean(text)
        except InvalidInputError as exc:
            raise UsageError(str(exc))
    return np.asarray(values)


def cmd_project(args):
    dataset = load_features(args.features)
    X = _image(dataset, args.image_id)
    if len(args.anchor) != 3:
        raise UsageError(f"need exactly 3 --anchor values, got {len(args.anchor)}")
    anchors = [_resolve_anchor(dataset, a) for a in args.anchor]
    if any(a.shape != (X.shape[1],) for a in anchors):
        raise UsageError(f"anchors must have dimension {X.shape[1]}")
    if args.k:
        vertices = solve(X, args.k, _solver_config(args)).vertices
    else:
        vertices = select_k(X, _selection_config(args)).model.vertices
    crops = project(X, anchors)
    verts = project(vertices, anchors)
    anchor_xy = project(np.vstack(anchors), anchors)
    rows = ([("crop", i, *xy) for i, xy in enumerate(crops)]
            + [("vertex", i, *xy) for i, xy in enumerate(verts)]
            + [("anchor", i, *xy) for i, xy in enumerate(anchor_xy)])
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["kind", "index", "u", "v"])
        for kind, i, u, v in rows:
            writer.writerow([kind, i, repr(float(u)), repr(float(v))])
    print(f"projected {len(crops)} crops and {len(verts)} vertices to {args.out}")


def build_parser():
    parser = _Parser(prog="simplexshot", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version",
                        version=f"%(prog)s 0.1.0 ({_backend.kernels.NAME} kernels)")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("solve", help="fit a K-vertex simplex to one image")
    p.add_argument("features")
    p.add_argument("--image-id", required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--out", help="JSON model file")
    _add_solver_flags(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("select", help="choose the vertex count of each image")
    p.add_argument("features")
    p.add_argument("--image-id")
    p.add_argument("--out", help="CSV table of chosen K and per-K errors")
    _add_selection_flags(p)
    _add_solver_flags(p)
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("synth", help="generate one synthetic image with known vertices")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--n", type=int, default=200)
    p.add_argument("--dim", type=int, default=16)
    p.add_argument("--sigma", type=float, default=0.0)
    p.add_argument("--separation", type=float, default=10.0)
    p.add_argument("--concentration", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--image-id", default="synth")
    p.add_argument("--label", default="synth")
    p.add_argument("--out", required=True)
    p.add_argument("--truth-out", help=".npz file with true vertices and weights")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("synth-dataset", help="generate a labelled multi-object dataset")
    p.add_argument("--classes", type=int, default=10)
    p.add_argument("--images-per-class", type=int, default=20)
    p.add_argument("--crops", type=int, default=20)
    p.add_argument("--dim", type=int, default=16)
    p.add_argument("--max-objects", type=int, default=3)
    p.add_argument("--separation", type=float, default=10.0)
    p.add_argument("--sigma", type=float, default=0.0)
    p.add_argument("--concentration", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth_dataset)

    p = sub.add_parser("eval", help="evaluate 1-shot accuracy over sampled episodes")
    p.add_argument("features")
    p.add_argument("--episodes", type=int, default=100_000)
    p.add_argument("--way", type=int, default=5)
    p.add_argument("--queries", type=int, default=15)
    p.add_argument("--alpha", type=float, default=DEFAULT_ALPHA,
                   help="vertex weight when shrinking toward the crop mean")
    p.add_argument("--k1-filter", action="store_true",
                   help="keep only images whose selected vertex count is 1")
    p.add_argument("--lambda-sweep", type=_float_list,
                   help="comma-separated lambda values, one report each")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--no-cache", action="store_true")
    p.add_argument("--out", help="JSON report")
    p.add_argument("--sweep-out", help="CSV of lambda,accuracy")
    _add_selection_flags(p)
    _add_solver_flags(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("project", help="2-D coordinates of crops and vertices on an anchor plane")
    p.add_argument("features")
    p.add_argument("--image-id", required=True)
    p.add_argument("--anchor", action="append", default=[],
                   help="comma-separated vector or class label; give exactly three")
    p.add_argument("--k", type=int, help="fixed vertex count (default: elbow selection)")
    p.add_argument("--out", required=True)
    _add_selection_flags(p)
    _add_solver_flags(p)
    p.set_defaults(func=cmd_project)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except (FeatureFileError, FileNotFoundError, IsADirectoryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except SolverError as exc:
        print(f"solver failure: {exc} {exc.diagnostics}", file=sys.stderr)
        return EXIT_SOLVER
    except (UsageError, SimplexShotError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
