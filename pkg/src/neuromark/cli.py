"""Command-line entry point: synthesize or ingest bundles, run protocols,
render reports.

Configuration is flags-only; every flag default can be overridden with
an NMK_-prefixed environment variable (NMK_TRIALS, NMK_SEED, ...), so
scripted invocations stay reproducible. Exit codes: 0 success, 2 file
or parse failure during ingest, 64 usage error, 65 data unfit for the
requested run.
"""
from __future__ import annotations

import argparse
import os
import sys

from . import evaluate, ingest, synth
from ._binio import write_atomic
from .core import NeuromarkError, dataset_summary, format_summary
from .deepnet import NetSpec

EXIT_OK = 0
EXIT_FILE = 2
EXIT_USAGE = 64
EXIT_DATA = 65

_PROTOCOL_OF = {
    "sd": "subject_dependent",
    "gender": "gender",
    "ad": "ad_based",
    "product": "product_based",
}

_RUNNERS = {
    "sd": evaluate.run_subject_dependent,
    "gender": evaluate.run_gender,
    "ad": evaluate.run_ad_based,
    "product": evaluate.run_product_based,
}


def _env(name: str, fallback, cast):
    raw = os.environ.get(f"NMK_{name}")
    if raw is None:
        return fallback
    try:
        return cast(raw)
    except ValueError:
        raise SystemExit(f"NMK_{name} is not a valid {cast.__name__}: {raw!r}")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="neuromark",
        description="EEG consumer-reaction pipeline: synthesize/ingest data, "
                    "run evaluation protocols, render reports.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_synth = sub.add_parser("synth", help="generate a synthetic bundle")
    p_synth.add_argument("--subjects", type=int, default=_env("SUBJECTS", 13, int))
    p_synth.add_argument("--seed", type=int, default=_env("SEED", 0, int))
    p_synth.add_argument("--separability", type=float,
                         default=_env("SEPARABILITY", 1.0, float))
    p_synth.add_argument("--out", required=True)

    p_ingest = sub.add_parser("ingest", help="load a manifest and save a bundle")
    p_ingest.add_argument("--manifest", required=True)
    p_ingest.add_argument("--out", required=True)

    p_run = sub.add_parser("run", help="run an evaluation protocol on a bundle")
    p_run.add_argument("--bundle", required=True)
    p_run.add_argument("--protocol", required=True,
                       help="one of sd, gender, ad, product")
    p_run.add_argument("--models", default=_env("MODELS", "knn,svm,dt,nb", str),
                       help="comma-separated subset of knn,svm,dt,nb,dl")
    p_run.add_argument("--trials", type=int, default=_env("TRIALS", 5, int))
    p_run.add_argument("--seed", type=int, default=_env("SEED", 0, int))
    p_run.add_argument("--report", required=True)
    p_run.add_argument("--jobs", type=int, default=_env("JOBS", 1, int))
    p_run.add_argument("--test-size", type=int, default=None,
                       help="per-unit test partition size (protocol default if omitted)")
    p_run.add_argument("--dl-epochs", type=int, default=_env("DL_EPOCHS", 30, int))
    p_run.add_argument("--knn-k", default=_env("KNN_K", None, str),
                       help="comma-separated k grid for KNN")
    p_run.add_argument("--svm-c", default=_env("SVM_C", None, str),
                       help="comma-separated C grid for the SVM")
    p_run.add_argument("--svm-gamma", default=_env("SVM_GAMMA", None, str),
                       help="comma-separated gamma grid for the SVM")
    p_run.add_argument("--dt-max-depth", default=_env("DT_MAX_DEPTH", None, str),
                       help="comma-separated max-depth grid for the tree")

    p_report = sub.add_parser("report", help="render a saved report")
    p_report.add_argument("--in", dest="path", required=True)
    p_report.add_argument("--format", dest="fmt", default="table")
    return parser


def _cmd_synth(args) -> int:
    spec = synth.default_spec(n_subjects=args.subjects, seed=args.seed,
                              separability=args.separability)
    ds = synth.generate(spec)
    ingest.save_bundle(ds, args.out)
    print(format_summary(dataset_summary(ds)))
    print(f"bundle written to {args.out}")
    return EXIT_OK


def _cmd_ingest(args) -> int:
    try:
        manifest = ingest.load_manifest(args.manifest)
        ds = ingest.load_dataset(manifest)
    except FileNotFoundError as exc:
        print(f"error: {exc.filename}: file not found", file=sys.stderr)
        return EXIT_FILE
    except NeuromarkError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FILE
    ingest.save_bundle(ds, args.out)
    print(format_summary(dataset_summary(ds)))
    print(f"bundle written to {args.out}")
    return EXIT_OK


def _parse_grid(raw: str | None, key: str, cast):
    if raw is None:
        return None
    try:
        values = [cast(v.strip()) for v in raw.split(",") if v.strip()]
    except ValueError:
        raise SystemExit(f"invalid grid value in {raw!r}")
    if not values:
        return None
    return values


def _build_grids(args) -> dict | None:
    grids: dict[str, list[dict]] = {}
    ks = _parse_grid(args.knn_k, "k", int)
    if ks:
        grids["knn"] = [{"k": k} for k in ks]
    cs = _parse_grid(args.svm_c, "C", float)
    gammas = _parse_grid(args.svm_gamma, "gamma", float)
    if cs or gammas:
        from .classify import DEFAULT_GRIDS
        cs = cs or sorted({g["C"] for g in DEFAULT_GRIDS["svm"]})
        gammas = gammas or sorted({g["gamma"] for g in DEFAULT_GRIDS["svm"]})
        grids["svm"] = [{"C": c, "gamma": g} for c in cs for g in gammas]
    depths = _parse_grid(args.dt_max_depth, "max_depth", int)
    if depths:
        grids["dt"] = [{"max_depth": d} for d in depths]
    return grids or None


def _cmd_run(args) -> int:
    if args.protocol not in _RUNNERS:
        print(f"error: unknown protocol {args.protocol!r}; expected one of "
              f"{sorted(_RUNNERS)}", file=sys.stderr)
        return EXIT_USAGE
    models = tuple(m.strip() for m in args.models.split(",") if m.strip())
    for kind in models:
        if kind not in evaluate.MODEL_CHOICES:
            print(f"error: unknown model {kind!r}; expected a subset of "
                  f"{','.join(evaluate.MODEL_CHOICES)}", file=sys.stderr)
            return EXIT_USAGE
    if not models:
        print("error: --models must name at least one model", file=sys.stderr)
        return EXIT_USAGE
    try:
        ds = ingest.load_bundle(args.bundle)
    except FileNotFoundError as exc:
        print(f"error: {exc.filename}: file not found", file=sys.stderr)
        return EXIT_DATA
    except NeuromarkError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    runner = _RUNNERS[args.protocol]
    kwargs = dict(trials=args.trials, seed=args.seed, jobs=args.jobs,
                  grids=_build_grids(args),
                  dl_spec=NetSpec(epochs=args.dl_epochs))
    if args.test_size is not None:
        kwargs["test_size"] = args.test_size
    try:
        report = runner(ds, models, **kwargs)
    except NeuromarkError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    write_atomic(args.report, evaluate.report_to_json(report).encode("utf-8"))
    print(evaluate.render_table(report))
    print(f"report written to {args.report}")
    return EXIT_OK


def _cmd_report(args) -> int:
    if args.fmt not in ("csv", "table"):
        print(f"error: unknown format {args.fmt!r}; expected csv or table",
              file=sys.stderr)
        return EXIT_USAGE
    try:
        with open(args.path, "r", encoding="utf-8") as handle:
            report = evaluate.report_from_json(handle.read())
    except FileNotFoundError as exc:
        print(f"error: {exc.filename}: file not found", file=sys.stderr)
        return EXIT_DATA
    except NeuromarkError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    if args.fmt == "csv":
        sys.stdout.write(evaluate.render_csv(report))
    else:
        sys.stdout.write(evaluate.render_table(report))
    return EXIT_OK


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    handlers = {"synth": _cmd_synth, "ingest": _cmd_ingest, "run": _cmd_run,
                "report": _cmd_report}
    return handlers[args.command](args)


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
