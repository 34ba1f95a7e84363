"""Command-line interface: ``gbtsvm {train,predict,balls,benchmark,stats}``.

Exit codes: 0 success, 2 usage, 3 input/data error, 4 computation error.
Defaults can be overridden through ``GBTSVM_*`` environment variables
(``GBTSVM_SEED``, ``GBTSVM_THREADS``, ``GBTSVM_OUT``, ``GBTSVM_T0``,
``GBTSVM_RADIUS``, ``GBTSVM_DE_OVERLAP``, ``GBTSVM_Q_ALPHA``, ``GBTSVM_FOLDS``);
explicit flags win over the environment.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import time
import warnings
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .classifiers import METHODS, TrainConfig, load_model, predict_batch, save_model, train
from .dataset_io import (BUNDLED, Dataset, apply_min_max, load_bundled, load_dataset,
                         load_features, make_folds, min_max_params, normalize_min_max)
from .errors import (DegenerateModel, EmptyDataset, GBTSVMError, LabelError, ModelFormatError,
                     NumericalFailure, ParseError, QPNotConverged, ShapeError,
                     SingleClassDataset, SingleClassFamily)
from .evaluation import (compute_metrics, config_entries, dataset_hash, friedman_test, grid_search, noise_sweep,
                         read_acc_matrix, report_row, write_cd_data, write_manifest,
                         write_report_csv)
from .granular_ball import DE_OVERLAP_MODES, RADIUS_MODES, GenerationConfig, generate_balls, save_family
from .scoring import score_family

log = logging.getLogger("gbftsvm")

EXIT_OK, EXIT_USAGE, EXIT_INPUT, EXIT_COMPUTE = 0, 2, 3, 4

INPUT_ERRORS = (ParseError, LabelError, EmptyDataset, SingleClassDataset, SingleClassFamily,
                ShapeError, ModelFormatError, FileNotFoundError, IsADirectoryError)
COMPUTE_ERRORS = (NumericalFailure, DegenerateModel)


class UsageError(Exception):
    pass


# ------------------------------------------------------------------ helpers


def _env(name, default, conv=str):
    raw = os.environ.get(f"GBTSVM_{name}")
    if raw is None or raw == "":
        return default
    try:
        return conv(raw)
    except ValueError:
        raise UsageError(f"environment variable GBTSVM_{name}={raw!r} is not valid") from None


def _fmt(x) -> str:
    # repr-based so output never depends on the locale
    return repr(float(x)) if isinstance(x, (float, np.floating)) else str(x)


def parse_grid(text: str) -> range:
    """``"-5..5"`` -> range(-5, 6); a single integer gives a one-point grid."""
    lo, sep, hi = text.partition("..")
    try:
        a = int(lo)
        b = int(hi) if sep else a
    except ValueError:
        raise UsageError(f"bad grid {text!r}; expected e.g. -5..5") from None
    if b < a:
        raise UsageError(f"empty grid {text!r}")
    return range(a, b + 1)


def parse_floats(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise UsageError(f"bad number list {text!r}") from None


def _load(spec: str, args) -> Dataset:
    """A file path, or the name of a bundled dataset."""
    if not Path(spec).exists() and spec in BUNDLED:
        return load_bundled(spec)
    return load_dataset(spec, args.format, args.label_column, args.positive_label)


def _gen_cfg(args) -> GenerationConfig:
    return GenerationConfig(initial_purity=args.t0, radius_mode=args.radius,
                            de_overlap=args.de_overlap, seed=args.seed)


def _manifest(args, path: Path, extra: dict) -> None:
    entries = {"command": args.command, "version": __version__, "seed": args.seed,
               "threads": args.threads}
    for k, v in sorted(vars(args).items()):
        if k not in ("func", "command") and not k.startswith("_"):
            entries[f"arg.{k}"] = v if not isinstance(v, list) else ",".join(map(str, v))
    entries.update(extra)
    path.parent.mkdir(parents=True, exist_ok=True)
    write_manifest(path, {k: _fmt(v) for k, v in entries.items()})


def _manifest_path(args, default_dir) -> Path:
    if args.manifest:
        return Path(args.manifest)
    return Path(default_dir) / f"{args.command}.manifest"


# ----------------------------------------------------------------- commands


def cmd_train(args) -> int:
    ds = _load(args.data, args)
    if len(np.unique(ds.labels)) < 2:
        raise SingleClassDataset(f"{args.data}: training data must contain both classes")
    scale = None
    if args.normalize:
        scale = min_max_params(ds.features)
        ds = replace(ds, features=apply_min_max(ds.features, *scale))
    cfg = TrainConfig(C1=args.c1, C2=args.c2, C3=args.c3, C4=args.c4, reg_eps=args.reg_eps,
                      qp_tol=args.qp_tol)
    gen = _gen_cfg(args)
    t0 = time.perf_counter()
    family = generate_balls(ds, gen) if args.method != "twsvm" else None
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", QPNotConverged)
        model = train(args.method, ds, cfg, gen, family=family)
    elapsed = time.perf_counter() - t0
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    if scale is not None:
        model = model.with_scale(*scale)
    save_model(model, args.model_out)
    m = len(family) if family is not None else ds.n
    unit = "balls" if family is not None else "points"
    print(f"trained {args.method}: m={m} {unit}, train_seconds={elapsed:.4f}, model={args.model_out}")
    _manifest(args, _manifest_path(args, Path(args.model_out).parent),
              {"data.hash": dataset_hash(ds), "data.n": ds.n, "data.d": ds.d, "model.m": m,
               **config_entries("train", cfg), **config_entries("generation", gen)})
    return EXIT_OK


def cmd_predict(args) -> int:
    model = load_model(args.model)
    labels = None
    if args.no_labels:
        X = load_features(args.data)
    else:
        ds = _load(args.data, args)
        X, labels = ds.features, ds.labels
    if X.shape[0] and X.shape[1] != model.d:
        raise ShapeError(f"model expects {model.d} features, data has {X.shape[1]}")
    pred = predict_batch(model, X) if X.shape[0] else np.zeros(0, dtype=int)
    text = "".join(f"{int(p)}\n" for p in pred)
    if args.labels_out:
        Path(args.labels_out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    out = sys.stderr if not args.labels_out else sys.stdout
    print(f"predicted {len(pred)} rows", file=out)
    extra = {"model.trained_by": model.trained_by, "data.rows": len(pred)}
    if labels is not None and len(pred):
        acc, prec, rec = compute_metrics(labels, pred)
        print(f"acc={acc:.6f} prec={prec:.6f} rec={rec:.6f}", file=out)
        extra.update({"metrics.acc": acc, "metrics.prec": prec, "metrics.rec": rec})
    default_dir = Path(args.labels_out).parent if args.labels_out else Path(args.out)
    _manifest(args, _manifest_path(args, default_dir), extra)
    return EXIT_OK


def cmd_balls(args) -> int:
    ds = _load(args.data, args)
    if args.normalize:
        ds = normalize_min_max(ds)
    gen = _gen_cfg(args)
    fam = generate_balls(ds, gen)
    scores = None
    if len(np.unique(fam.labels)) == 2:
        scores = score_family(fam)
    save_family(fam, args.balls_out, scores)
    pure = int(np.sum(fam.purities == 1.0))
    print(f"generated {len(fam)} balls from {ds.n} rows: {pure} positive-region, "
          f"{len(fam) - pure} boundary-region, file={args.balls_out}")
    _manifest(args, _manifest_path(args, Path(args.balls_out).parent),
              {"data.hash": dataset_hash(ds), "balls.m": len(fam),
               **config_entries("generation", gen)})
    return EXIT_OK


def _unique_name(name: str, used: set) -> str:
    base, k = name or "dataset", 1
    out = base
    while out in used:
        k += 1
        out = f"{base}_{k}"
    used.add(out)
    return out


def cmd_benchmark(args) -> int:
    exps = parse_grid(args.grid)
    rates = parse_floats(args.noise)
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    for m in methods:
        if m not in METHODS:
            raise UsageError(f"unknown method {m!r}; choose from {', '.join(METHODS)}")
    for r in rates:
        if not 0.0 <= r < 0.5:
            raise UsageError(f"noise rate {r} outside [0, 0.5)")
    if args.folds < 2:
        raise UsageError("--folds must be at least 2")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    gen = _gen_cfg(args)
    seeds = [args.seed + i for i in range(args.repeats)]
    manifest = {**config_entries("generation", gen), "grid": f"{exps.start}..{exps.stop - 1}",
                "noise": ",".join(map(str, rates)), "noise_seeds": ",".join(map(str, seeds))}
    used: set = set()
    ok = failed = 0
    for spec in args.data:
        try:
            ds = _load(spec, args)
            name = _unique_name(ds.source_id, used)
            if args.normalize:
                ds = normalize_min_max(ds)
            folds = make_folds(ds.n, args.folds, args.seed,
                               labels=ds.labels if args.stratified else None)
            rows, timing = [], []
            for method in methods:
                g = grid_search(ds, method, exps, gen, folds, n_jobs=args.threads)
                if not np.isfinite(g.best_accuracy):
                    raise NumericalFailure(f"{method}: no grid point produced a usable model")
                if args.save_surface:
                    surf = [report_row(name, method, 0.0, args.seed, p, rep)
                            for p, rep in g.surface.items()]
                    write_report_csv(surf, out / f"{name}_{method}_grid.csv")
                sweep = noise_sweep(ds, [method], rates, seeds, gen, folds,
                                    params={method: g.best_params}, noise_all=args.noise_all)
                for row in sweep:
                    rows.append(report_row(name, method, row.rate, row.seed, row.params, row.report))
                    timing.append(f"{name} {method} noise={row.rate:g} seed={row.seed} "
                                  f"train_s={row.report.train_time_s:.6f} "
                                  f"predict_s={row.report.predict_time_s:.6f}")
                manifest[f"{name}.{method}.best_C1"] = g.best_params[0]
                manifest[f"{name}.{method}.best_C2"] = g.best_params[1]
            write_report_csv(rows, out / f"{name}.csv")
            (out / f"{name}_timings.txt").write_text("\n".join(timing) + "\n", encoding="utf-8")
            manifest[f"{name}.source"] = spec
            manifest[f"{name}.hash"] = dataset_hash(ds)
            manifest[f"{name}.n"] = ds.n
            manifest[f"{name}.d"] = ds.d
            print(f"{name}: wrote {len(rows)} rows to {out / (name + '.csv')}")
            ok += 1
        except (GBTSVMError, OSError, ValueError) as exc:
            failed += 1
            log.error("dataset %s failed: %s", spec, exc)
            print(f"error: dataset {spec}: {exc}", file=sys.stderr)
    manifest["datasets.ok"] = ok
    manifest["datasets.failed"] = failed
    _manifest(args, _manifest_path(args, out), manifest)
    return EXIT_OK if ok else EXIT_INPUT


def cmd_stats(args) -> int:
    A, models, names = read_acc_matrix(args.acc_matrix)
    rep = friedman_test(A, q_alpha=args.q_alpha, alpha=args.alpha, models=models)
    w = max(len(m) for m in models)
    print(f"datasets N={A.shape[0]} models M={A.shape[1]}")
    print(f"chi2_F={rep.chi2_F:.6f} p={rep.p_value_chi2:.6g}")
    print(f"F_F={rep.F_F:.6f} dof=({rep.dof[0]},{rep.dof[1]}) p={rep.p_value_F:.6g}")
    print(f"q_alpha={rep.q_alpha:.6f} CD={rep.CD:.6f}")
    print("average ranks:")
    for m, r in zip(models, rep.avg_ranks):
        print(f"  {m:<{w}}  {r:.4f}")
    print("significant pairs (|rank gap| > CD):")
    pairs = [(models[i], models[j], abs(rep.avg_ranks[i] - rep.avg_ranks[j]))
             for i in range(len(models)) for j in range(i + 1, len(models))
             if rep.pairwise_significant[i, j]]
    for a, b, gap in pairs:
        print(f"  {a} vs {b}: {gap:.4f}")
    if not pairs:
        print("  none")
    cd_path = Path(args.cd_out) if args.cd_out else Path(args.out) / "cd_data.csv"
    cd_path.parent.mkdir(parents=True, exist_ok=True)
    write_cd_data(rep, cd_path)
    print(f"CD data written to {cd_path}")
    _manifest(args, _manifest_path(args, cd_path.parent),
              {"chi2_F": rep.chi2_F, "F_F": rep.F_F, "CD": rep.CD, "q_alpha": rep.q_alpha,
               "N": A.shape[0], "M": A.shape[1]})
    return EXIT_OK


# ------------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=_env("SEED", 0, int),
                        help="run seed for folds, ball generation and noise (default 0)")
    common.add_argument("--threads", type=int, default=_env("THREADS", os.cpu_count() or 1, int),
                        help="worker threads for grid evaluation (default: logical cores)")
    common.add_argument("--out", default=_env("OUT", "."), help="output directory (default .)")
    common.add_argument("--manifest", help="manifest path (default <out>/<command>.manifest)")
    common.add_argument("-v", "--verbose", action="count", default=0)

    data = argparse.ArgumentParser(add_help=False)
    data.add_argument("--format", default="csv", choices=["csv", "sparse", "libsvm"])
    data.add_argument("--label-column", default="-1",
                      help="label column for csv, index or header name (default last)")
    data.add_argument("--positive-label", help="raw label mapped to +1 (default the larger)")

    gen = argparse.ArgumentParser(add_help=False)
    gen.add_argument("--t0", type=float, default=_env("T0", 1.0, float),
                     help="initial purity threshold in (0.5, 1] (default 1.0)")
    gen.add_argument("--radius", choices=RADIUS_MODES, default=_env("RADIUS", "max"))
    gen.add_argument("--de-overlap", choices=DE_OVERLAP_MODES, default=_env("DE_OVERLAP", "strict"))

    p = argparse.ArgumentParser(prog="gbtsvm", description=__doc__.split("\n")[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", parents=[common, data, gen], help="train one model")
    t.add_argument("--data", required=True, help="dataset path or bundled name")
    t.add_argument("--method", required=True, choices=METHODS)
    t.add_argument("--c1", type=float, required=True)
    t.add_argument("--c2", type=float, required=True)
    t.add_argument("--c3", type=float, help="GBFTSVM bound on the first dual (default c1)")
    t.add_argument("--c4", type=float, help="GBFTSVM bound on the second dual (default c2)")
    t.add_argument("--reg-eps", type=float, default=1e-4)
    t.add_argument("--qp-tol", type=float, default=1e-6)
    t.add_argument("--no-normalize", dest="normalize", action="store_false",
                   help="train on raw features (default: min-max scaling stored in the model)")
    t.add_argument("--model-out", required=True)
    t.set_defaults(func=cmd_train)

    q = sub.add_parser("predict", parents=[common, data], help="label rows with a saved model")
    q.add_argument("--model", required=True)
    q.add_argument("--data", required=True)
    q.add_argument("--no-labels", action="store_true", help="input csv has no label column")
    q.add_argument("--labels-out", help="write predictions here instead of standard output")
    q.set_defaults(func=cmd_predict)

    b = sub.add_parser("balls", parents=[common, data, gen], help="generate and score granular balls")
    b.add_argument("--data", required=True)
    b.add_argument("--no-normalize", dest="normalize", action="store_false")
    b.add_argument("--balls-out", required=True, help="ball table csv (metadata goes to <path>.json)")
    b.set_defaults(func=cmd_balls)

    k = sub.add_parser("benchmark", parents=[common, data, gen],
                       help="grid-searched k-fold benchmark with optional label noise")
    k.add_argument("--data", required=True, nargs="+", help="dataset paths or bundled names")
    k.add_argument("--methods", default=",".join(METHODS))
    k.add_argument("--grid", default="-5..5", help="exponent range for C = 2^i (default -5..5)")
    k.add_argument("--noise", default="0", help="comma-separated label-noise rates")
    k.add_argument("--repeats", type=int, default=1, help="noise seeds per rate (seed, seed+1, ...)")
    k.add_argument("--folds", type=int, default=_env("FOLDS", 10, int))
    k.add_argument("--stratified", action="store_true")
    k.add_argument("--noise-all", action="store_true",
                   help="inject noise before splitting (test labels noisy too)")
    k.add_argument("--no-normalize", dest="normalize", action="store_false")
    k.add_argument("--save-surface", action="store_true", help="also write the full grid surface")
    k.set_defaults(func=cmd_benchmark)

    s = sub.add_parser("stats", parents=[common], help="Friedman test and Nemenyi critical difference")
    s.add_argument("--acc-matrix", required=True,
                   help="csv: header dataset,<model>...; one row per dataset")
    s.add_argument("--q-alpha", type=float, default=_env("Q_ALPHA", None, float),
                   help="Nemenyi critical value (default: studentized range / sqrt 2)")
    s.add_argument("--alpha", type=float, default=0.05)
    s.add_argument("--cd-out", help="CD data file (default <out>/cd_data.csv)")
    s.set_defaults(func=cmd_stats)
    return p


def _join_negative_values(argv):
    # lets "--grid -5..5" and "--noise -0" style values through argparse
    out, it = [], iter(argv)
    for tok in it:
        if tok == "--grid":
            nxt = next(it, None)
            out.append(tok if nxt is None else f"--grid={nxt}")
        else:
            out.append(tok)
    return out


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        parser = build_parser()
    except UsageError as exc:
        print(f"gbtsvm: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        args = parser.parse_args(_join_negative_values(argv))
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    if args.threads < 1:
        print("gbtsvm: error: --threads must be at least 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"gbtsvm: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except INPUT_ERRORS as exc:
        print(f"gbtsvm: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except COMPUTE_ERRORS as exc:
        print(f"gbtsvm: computation error: {exc}", file=sys.stderr)
        return EXIT_COMPUTE
    except ValueError as exc:
        # remaining ValueErrors come from out-of-range parameters
        print(f"gbtsvm: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # noqa: BLE001 - keep the documented exit-code contract
        log.debug("unhandled error", exc_info=True)
        print(f"gbtsvm: computation error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_COMPUTE


if __name__ == "__main__":
    sys.exit(main())
