"""Command-line interface: ``cdom <command> ...``.

Exit status is 0 on success, 1 on runtime failure, 2 on usage errors.
``CDOM_WORKERS`` sets how many restarts run concurrently (default 1).
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import io as cio
from .core import (
    DEFAULT_EPSILONS,
    DEFAULT_LAMBDAS,
    DEFAULT_WIDTH_MULTIPLIERS,
    DependenceModel,
    InitKind,
    MatchConfig,
    Measure,
    SignChoice,
    matched_accuracy,
)


class UsageError(Exception):
    """Bad flag combination detected after parsing (exit 2)."""


def _workers() -> int:
    raw = os.environ.get("CDOM_WORKERS", "").strip()
    if not raw:
        return 1
    try:
        w = int(raw)
    except ValueError:
        raise UsageError(f"CDOM_WORKERS must be an integer, got {raw!r}") from None
    if w < 1:
        raise UsageError("CDOM_WORKERS must be >= 1")
    return w


def _positive(text):
    v = float(text)
    if not (v > 0 and math.isfinite(v)):
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text}")
    return v


def _nonneg(text):
    v = float(text)
    if not (v >= 0 and math.isfinite(v)):
        raise argparse.ArgumentTypeError(f"expected a number >= 0, got {text}")
    return v


def _float_list(text):
    try:
        vals = [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def _add_match_flags(p, with_method=True, model_flags=True):
    if with_method:
        p.add_argument("--method", choices=["hsic", "nocco", "lsom"], required=True,
                       help="dependence measure to maximize")
    if model_flags:
        p.add_argument("--sigma-x", type=_positive,
                       help="x kernel width; unset means median heuristic times --width-multiplier")
        p.add_argument("--sigma-y", type=_positive,
                       help="y kernel width; unset means median heuristic times --width-multiplier")
        p.add_argument("--width-multiplier", type=_positive, default=1.0,
                       help="multiplier on the median-heuristic widths for hsic/nocco")
        p.add_argument("--epsilon", type=_positive, action="append",
                       help="nocco regularizer; repeat for several arms, best score wins "
                       "(unset means %s)" % ", ".join(map(str, DEFAULT_EPSILONS)))
        lam = p.add_mutually_exclusive_group()
        lam.add_argument("--lambda", dest="lam", type=_nonneg,
                         help="lsom: fixed LSMI regularizer, widths from --sigma-x/--sigma-y or the median heuristic")
        lam.add_argument("--cv", action="store_true",
                         help="lsom: select widths and lambda by 2-fold CV at every step (implied without --lambda)")
        p.add_argument("--cv-lambdas", type=_float_list, default=list(DEFAULT_LAMBDAS),
                       help="lsom CV lambda grid")
    p.add_argument("--lambda-placement", choices=["inside", "outside"], default="outside",
                   help="lsom: add lambda before (inside) or after (outside) the 1/n^2 scaling of H")
    p.add_argument("--restarts", type=int, default=10, help="number of restarts")
    p.add_argument("--max-iter", type=int, default=20, help="LAP iterations per restart")
    p.add_argument("--eta", type=float, default=1.0, help="step size in (0, 1]")
    p.add_argument("--seed", type=int, default=0, help="random seed")
    p.add_argument("--multipliers", type=_float_list, default=list(DEFAULT_WIDTH_MULTIPLIERS),
                   help="restart width multipliers c, cycled over restarts; also the lsom CV width grid")
    p.add_argument("--init", choices=[k.value for k in InitKind], default="eigen",
                   help="restart initialization")
    p.add_argument("--sign", choices=[s.value for s in SignChoice], default="both",
                   help="eigenvector sign handling for eigen init")
    p.add_argument("--exclude-self", action="store_true",
                   help="drop the zero self-distances from the median heuristic")


def _config(a) -> MatchConfig:
    try:
        return MatchConfig(
            max_iterations=a.max_iter,
            eta=a.eta,
            n_restarts=a.restarts,
            width_multipliers=a.multipliers,
            rng_seed=a.seed,
            init=a.init,
            sign_choice=a.sign,
            exclude_self_distances=a.exclude_self,
            workers=_workers(),
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _widths(a, x, y):
    from .kernels import median_width

    sx = a.sigma_x if a.sigma_x is not None else a.width_multiplier * median_width(x, a.exclude_self)
    sy = a.sigma_y if a.sigma_y is not None else a.width_multiplier * median_width(y, a.exclude_self)
    return sx, sy


def _match_arms(a, x, y) -> list:
    """Models to run as separate arms; LsomCV for lsom with CV."""
    from .matcher import LsomCV

    if a.method != "lsom" and (a.lam is not None or a.cv):
        raise UsageError("--lambda/--cv apply to --method lsom only")
    if a.method != "nocco" and a.epsilon:
        raise UsageError("--epsilon applies to --method nocco only")
    if a.method == "lsom" and a.lam is None:
        if a.sigma_x is not None or a.sigma_y is not None:
            raise UsageError("--sigma-x/--sigma-y with lsom need --lambda (CV selects widths itself)")
        return [LsomCV(width_multipliers=a.multipliers, lambdas=a.cv_lambdas,
                       lambda_placement=a.lambda_placement)]
    sx, sy = _widths(a, x, y)
    if a.method == "hsic":
        return [DependenceModel(Measure.HSIC, sx, sy)]
    if a.method == "nocco":
        return [DependenceModel(Measure.NOCCO, sx, sy, epsilon=e) for e in (a.epsilon or DEFAULT_EPSILONS)]
    return [DependenceModel(Measure.LSMI, sx, sy, lam=a.lam, lambda_placement=a.lambda_placement)]


def _run_arms(arms, x, y, cfg):
    from .matcher import run_match, run_match_arms

    if len(arms) == 1:
        return run_match(x, y, arms[0], cfg), None
    best, result, results = run_match_arms(x, y, arms, cfg)
    return result, [{"model": r.selected_model.to_dict(), "score": r.score} for r in results]


def cmd_match(a):
    x, y = cio.load_samples(a.x), cio.load_samples(a.y)
    if x.n != y.n:
        raise ValueError(f"--x has {x.n} samples but --y has {y.n}")
    cfg = _config(a)
    result, arms = _run_arms(_match_arms(a, x, y), x, y, cfg)
    extra = {"method": a.method}
    if arms is not None:
        extra["arms"] = arms
    if a.truth:
        truth = cio.load_permutation(a.truth)
        extra["accuracy"] = matched_accuracy(result.permutation, truth)
    cio.save_match_result(result, a.out, extra)
    print(f"score {result.score!r}")
    print(f"best restart {result.best_restart} (converged: {result.converged})")
    if "accuracy" in extra:
        print(f"accuracy {extra['accuracy']!r}")
    return 0


def cmd_score(a):
    from .dependence import score

    x, y = cio.load_samples(a.x), cio.load_samples(a.y)
    p = cio.load_permutation(a.pairing)
    from .kernels import median_width

    sx = a.sigma_x if a.sigma_x is not None else median_width(x)
    sy = a.sigma_y if a.sigma_y is not None else median_width(y)
    params = {}
    if a.measure == "nocco":
        params["epsilon"] = a.epsilon
    elif a.measure == "lsmi":
        params["lam"] = a.lam
        params["lambda_placement"] = a.lambda_placement
    model = DependenceModel(a.measure, sx, sy, **params)
    value = score(model, x, y, p)
    print(repr(value))
    if a.out:
        doc = {"model": model.to_dict(), "score": value}
        cio.atomic_write_text(a.out, json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return 0


def cmd_lap(a):
    from .lap import solve_lap, solve_lap_min

    m = cio.load_matrix(a.matrix)
    p, value = (solve_lap_min if a.minimize else solve_lap)(m)
    for i, j in enumerate(p.tolist()):
        print(f"{i},{j}")
    print(f"value {value!r}", file=sys.stderr)
    if a.out:
        doc = {"assignment": p.tolist(), "value": value, "objective": "min" if a.minimize else "max"}
        cio.atomic_write_text(a.out, json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return 0


def cmd_gen(a):
    out = Path(a.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if a.kind == "cubic":
        x, y, truth = cio.gen_cubic(a.n or 100, a.seed)
    elif a.kind == "split":
        if a.d % 2:
            raise UsageError("--d must be even")
        x, y, truth = cio.gen_split_halves(a.n or 50, a.d, a.noise, a.seed, mirror=a.mirror)
    else:
        feats, labels = cio.gen_color_clusters(a.n or 320, seed=a.seed)
        cio.save_samples(feats, out / "features.csv")
        cio.atomic_write_text(out / "labels.txt", "".join(f"{v}\n" for v in labels.tolist()))
        print(f"wrote {out / 'features.csv'} and {out / 'labels.txt'}")
        return 0
    cio.save_samples(x, out / "x.csv")
    cio.save_samples(y, out / "y.csv")
    cio.save_permutation(truth, out / "truth.txt")
    print(f"wrote {out / 'x.csv'}, {out / 'y.csv'} and {out / 'truth.txt'}")
    return 0


def cmd_regress_fit(a):
    from .regression import DEFAULT_DELTAS, fit, fit_cv

    x, y = cio.load_samples(a.x), cio.load_matrix(a.y)
    if a.pairing:
        y = y[cio.load_permutation(a.pairing).map]
    if (a.tau is None) != (a.delta is None):
        raise UsageError("give both --tau and --delta, or neither (CV)")
    if a.tau is not None:
        model = fit(x, y, a.tau, a.delta)
    else:
        model = fit_cv(x, y, a.taus, a.deltas or list(DEFAULT_DELTAS), seed=a.seed)
    cio.atomic_write_text(a.out, json.dumps(model.to_dict(), indent=2, sort_keys=True) + "\n")
    print(f"tau {model.tau!r} delta {model.delta!r}")
    return 0


def cmd_regress_predict(a):
    from .regression import KernelRegressor

    model = KernelRegressor.from_dict(json.loads(Path(a.model).read_text(encoding="utf-8")))
    pred = model.predict(cio.load_samples(a.x))
    cio.save_matrix(pred, a.out)
    print(f"wrote {pred.shape[0]} predictions to {a.out}")
    return 0


def _read_list(path) -> list:
    base = Path(path).parent
    names = [ln.strip() for ln in Path(path).read_text(encoding="utf-8").splitlines()]
    return [base / n for n in names if n and not n.startswith("#")]


def cmd_features(a):
    from .pnm import load_image_features

    feats = load_image_features(_read_list(a.images), lab=a.lab)
    cio.save_matrix(feats, a.out)
    print(f"wrote {feats.shape[0]} x {feats.shape[1]} features to {a.out}")
    return 0


def cmd_summarize(a):
    from .layout import mask_frame, rect_frame, summarize
    from .pnm import load_image_features, montage, read_pnm, write_pnm

    if (a.rows is None) != (a.cols is None) or (a.rows is None) == (a.mask is None):
        raise UsageError("give either --rows and --cols, or --mask")
    frame = rect_frame(a.rows, a.cols) if a.mask is None else mask_frame(Path(a.mask).read_text(encoding="utf-8"))
    images = _read_list(a.images) if a.images else None
    if a.features:
        feats = cio.load_matrix(a.features)
    elif images:
        feats = load_image_features(images, lab=a.lab)
    else:
        raise UsageError("give --features or --images")
    if a.montage and not images:
        raise UsageError("--montage needs --images")
    if feats.shape[0] != frame.n:
        raise ValueError(f"frame size must equal image count ({frame.n} cells, {feats.shape[0]} images)")
    arms = [None] if frame.n == 1 else _match_arms(a, feats, frame.coords)
    layouts = [summarize(feats, frame, m, _config(a)) for m in arms]
    layout = layouts[0]
    for other in layouts[1:]:
        if other.match.score > layout.match.score:
            layout = other
    lines = ["cell_row,cell_col,feature_index"] + [f"{r},{c},{f}" for r, c, f in layout.rows(frame)]
    cio.atomic_write_text(a.out, "\n".join(lines) + "\n")
    if a.json and layout.match is not None:
        cio.save_match_result(layout.match, a.json, {"method": a.method, "locality": layout.locality})
    if a.montage:
        write_pnm(montage([read_pnm(p) for p in images], frame.coords, layout.cell_to_feature.map), a.montage)
    print(f"locality {layout.locality!r}")
    return 0


def cmd_eval(a):
    """Accuracy of hsic / nocco / lsom arms on generated data, per seed and mean."""
    from .matcher import LsomCV, median_model, run_match, run_match_arms

    cfg_base = _config(a)
    methods = a.methods
    per = {m: [] for m in methods}
    for seed in range(a.seed, a.seed + a.seeds):
        if a.kind == "cubic":
            x, y, truth = cio.gen_cubic(a.n or 100, seed)
        else:
            x, y, truth = cio.gen_split_halves(a.n or 50, a.d, a.noise, seed)
        cfg = dataclasses.replace(cfg_base, rng_seed=seed)
        for m in methods:
            if m.startswith("hsic"):
                c = math.sqrt(10) if m.endswith("c10") else 1.0
                r = run_match(x, y, median_model(x, y, Measure.HSIC, c, cfg.exclude_self_distances), cfg)
            elif m.startswith("nocco"):
                c = math.sqrt(10) if m.endswith("c10") else 1.0
                arms = [median_model(x, y, Measure.NOCCO, c, cfg.exclude_self_distances, epsilon=e)
                        for e in DEFAULT_EPSILONS]
                r = run_match_arms(x, y, arms, cfg)[1]
            else:
                r = run_match(x, y, LsomCV(width_multipliers=a.multipliers, lambda_placement=a.lambda_placement), cfg)
            per[m].append(matched_accuracy(r.permutation, truth))
    summary = {m: float(np.mean(v)) for m, v in per.items()}
    for m in methods:
        print(f"{m:10s} mean accuracy {summary[m]:.4f}")
    doc = {
        "schema": "cdom.eval",
        "schema_version": 1,
        "tool_version": __version__,
        "kind": a.kind,
        "seeds": list(range(a.seed, a.seed + a.seeds)),
        "config": cfg_base.to_dict(),
        "accuracy": per,
        "mean_accuracy": summary,
    }
    if a.out:
        cio.atomic_write_text(a.out, json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return 0


EVAL_METHODS = ["hsic", "hsic-c10", "nocco", "nocco-c10", "lsom"]


def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.ArgumentDefaultsHelpFormatter
    ap = argparse.ArgumentParser(prog="cdom", description="Cross-domain object matching by dependence maximization.")
    ap.add_argument("--version", action="version", version=f"cdom {__version__}")
    sub = ap.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("match", help="find the pairing of two sample sets", formatter_class=fmt)
    p.add_argument("--x", required=True, help="CSV of x samples (one row each)")
    p.add_argument("--y", required=True, help="CSV of y samples")
    p.add_argument("--truth", help="true pairing file; prints accuracy")
    p.add_argument("--out", required=True, help="match-result JSON to write")
    _add_match_flags(p)
    p.set_defaults(func=cmd_match)

    p = sub.add_parser("score", help="dependence score of a given pairing", formatter_class=fmt)
    p.add_argument("--x", required=True)
    p.add_argument("--y", required=True)
    p.add_argument("--pairing", required=True, help="permutation file or match-result JSON")
    p.add_argument("--measure", choices=[m.value for m in Measure], required=True)
    p.add_argument("--sigma-x", type=_positive, help="unset means the median heuristic")
    p.add_argument("--sigma-y", type=_positive, help="unset means the median heuristic")
    p.add_argument("--epsilon", type=_positive, default=0.05)
    p.add_argument("--lambda", dest="lam", type=_nonneg, default=1e-2)
    p.add_argument("--lambda-placement", choices=["inside", "outside"], default="outside")
    p.add_argument("--out", help="optional JSON with model and score")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("lap", help="solve a linear assignment problem from a CSV matrix", formatter_class=fmt)
    p.add_argument("--matrix", required=True, help="square CSV of profits (or costs with --minimize)")
    p.add_argument("--minimize", action="store_true", help="treat the matrix as costs")
    p.add_argument("--out", help="optional JSON with assignment and value")
    p.set_defaults(func=cmd_lap)

    p = sub.add_parser("gen", help="write synthetic data sets", formatter_class=fmt)
    p.add_argument("kind", choices=["cubic", "split", "colors"])
    p.add_argument("--n", type=int, help="sample count; unset means 100 cubic, 50 split, 320 colors")
    p.add_argument("--d", type=int, default=20, help="split: full vector length (even)")
    p.add_argument("--noise", type=_nonneg, default=0.02, help="split: noise level on the right halves")
    p.add_argument("--mirror", action="store_true", help="split: mirror-symmetric signals (identical halves)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("regress", help="kernel ridge regression on matched pairs", formatter_class=fmt)
    rsub = p.add_subparsers(dest="action", required=True, metavar="ACTION")
    q = rsub.add_parser("fit", help="train and save a model", formatter_class=fmt)
    q.add_argument("--x", required=True, help="CSV of inputs")
    q.add_argument("--y", required=True, help="CSV of targets")
    q.add_argument("--pairing", help="pair x[i] with y[p[i]] (permutation file or match-result JSON)")
    q.add_argument("--tau", type=_positive, help="kernel width; unset means CV")
    q.add_argument("--delta", type=_nonneg, help="ridge parameter; unset means CV")
    q.add_argument("--taus", type=_float_list, help="CV width grid; unset means median width times sqrt(1..10)")
    q.add_argument("--deltas", type=_float_list, help="CV ridge grid; unset means 1,0.1,0.01,0.001")
    q.add_argument("--seed", type=int, default=0, help="fold shuffling seed")
    q.add_argument("--out", required=True, help="model JSON to write")
    q.set_defaults(func=cmd_regress_fit)
    q = rsub.add_parser("predict", help="predict with a saved model", formatter_class=fmt)
    q.add_argument("--model", required=True)
    q.add_argument("--x", required=True)
    q.add_argument("--out", required=True, help="CSV of predictions")
    q.set_defaults(func=cmd_regress_predict)

    p = sub.add_parser("features", help="convert P5/P6 images to a feature CSV", formatter_class=fmt)
    p.add_argument("--images", required=True, help="text file listing image paths, one per line")
    p.add_argument("--lab", action="store_true", help="convert colour images to L*a*b* first")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("summarize", help="lay feature vectors out on a grid frame", formatter_class=fmt)
    p.add_argument("--features", help="CSV of feature vectors")
    p.add_argument("--images", help="list of P5/P6 images (features if --features is absent; montage tiles)")
    p.add_argument("--lab", action="store_true", help="use L*a*b* image features")
    p.add_argument("--rows", type=int, help="rectangular frame rows")
    p.add_argument("--cols", type=int, help="rectangular frame columns")
    p.add_argument("--mask", help="text mask of '#'/'.' cells")
    p.add_argument("--method", choices=["hsic", "nocco", "lsom"], default="lsom", help="dependence measure to maximize")
    p.add_argument("--out", required=True, help="assignment CSV (cell_row,cell_col,feature_index)")
    p.add_argument("--json", help="optional match-result JSON")
    p.add_argument("--montage", help="optional PPM/PGM montage (needs --images)")
    _add_match_flags(p, with_method=False)
    p.set_defaults(func=cmd_summarize)

    p = sub.add_parser("eval", help="accuracy of several methods on generated data", formatter_class=fmt)
    p.add_argument("kind", choices=["cubic", "split"])
    p.add_argument("--seeds", type=int, default=10, help="number of seeds")
    p.add_argument("--n", type=int, help="sample count; unset means 100 cubic, 50 split")
    p.add_argument("--d", type=int, default=20, help="split: vector length")
    p.add_argument("--noise", type=_nonneg, default=0.02, help="split: noise level")
    p.add_argument("--methods", type=lambda s: s.split(","), default=EVAL_METHODS,
                   help="comma-separated subset of %s" % ",".join(EVAL_METHODS))
    p.add_argument("--out", help="optional JSON summary")
    _add_match_flags(p, with_method=False, model_flags=False)
    p.set_defaults(func=cmd_eval)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "methods", None):
        bad = set(args.methods) - set(EVAL_METHODS)
        if bad:
            parser.error(f"unknown methods: {', '.join(sorted(bad))}")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"cdom: error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError, KeyError, json.JSONDecodeError) as exc:
        print(f"cdom: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
