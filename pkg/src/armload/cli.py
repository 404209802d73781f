"""``armload`` command-line driver.

Exit codes: 0 success, 1 usage, 2 I/O, 3 data validation, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import bkp
from .dataset import (FIXTURE_KINDS, LabeledDataset, MASK_SUFFIX, ingest, load_csv, save_csv,
                      sort_labels, synth_image, write_labels_csv, read_labels_csv)
from .errors import ArmloadError, InvalidInputError, ParseError
from .evaluation import canonical_json, confusion, report_dict, report_table
from .imaging import read_image, write_image, write_mask
from .pipeline import (METHOD_NAMES, PipelineConfig, default_jobs, extract_directory, histograms,
                       parallel_map, run_pipeline)
from .segmentation import segment_arm
from .svm import DEFAULT_COST, DEFAULT_GAMMA, SvmModel, predict_many, train_multiclass

logger = logging.getLogger("armload")

EXIT_USAGE, EXIT_IO = 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage; 2 is reserved for I/O failures here
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _fraction(text):
    value = float(text)
    if not 0.0 < value < 1.0:
        raise argparse.ArgumentTypeError(f"expected a value in (0, 1), got {text}")
    return value


# --- subcommands ---------------------------------------------------------------

def _segment_task(args):
    path, out_dir, k, erode_iters, seed = args
    seg, mask = segment_arm(read_image(path), k=k, erode_iters=erode_iters, seed=seed)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_image(out_dir / (path.stem + ".png"), seg)
    write_mask(out_dir / (path.stem + MASK_SUFFIX), mask)
    return mask.count()


def cmd_segment(ns):
    items = ingest(ns.in_dir)
    out = Path(ns.out)
    tasks = [(p, out / label, ns.k, ns.erode, ns.seed) for p, label in items]
    parallel_map(_segment_task, tasks, ns.jobs)
    print(f"segmented {len(items)} images into {out}")


def _load_codebook(path) -> bkp.Codebook:
    try:
        with open(path) as fh:
            return bkp.Codebook.from_dict(json.load(fh))
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc.msg}", line=exc.lineno) from None
    except (KeyError, TypeError) as exc:
        raise ParseError(f"{path}: malformed codebook: {exc}") from None


def cmd_extract(ns):
    items = ingest(ns.in_dir)
    labels = [label for _, label in items]
    outputs = extract_directory(items, ns.method, ns.grid, ns.threshold, ns.jobs)
    if ns.method == "bkp":
        if ns.codebook is None:
            raise UsageError("--method bkp needs --codebook FILE (read if present, else built "
                             "from these images and written)")
        book_path = Path(ns.codebook)
        if book_path.exists():
            book = _load_codebook(book_path)
        else:
            # only ever build from the directory given here, i.e. the training images
            book = bkp.build_codebook(outputs, k=ns.vocabulary, seed=ns.seed)
            book_path.write_text(json.dumps(book.to_dict()) + "\n")
            logger.info("wrote %d-word codebook to %s", book.k, book_path)
        X = histograms(outputs, book)
    else:
        X = np.stack([fv.values for fv in outputs])
    ds = LabeledDataset(X, tuple(labels), sort_labels(labels), ns.method.upper())
    save_csv(ds, ns.out)
    print(f"wrote {len(ds)} x {ds.dim} {ns.method} features to {ns.out}")


def cmd_train(ns):
    ds = load_csv(ns.data)
    model = train_multiclass(ds, gamma=ns.gamma, C=ns.cost, seed=ns.seed, scale=not ns.no_scale)
    model.save(ns.model)
    n_sv = sum(m.support_vectors.shape[0] for m in model.machines)
    print(f"trained {len(model.machines)} machines ({n_sv} support vectors) -> {ns.model}")


def cmd_predict(ns):
    model = SvmModel.load(ns.model)
    ds = load_csv(ns.data)
    predicted = predict_many(model, ds.features)
    write_labels_csv(ns.out, predicted)
    print(f"wrote {len(predicted)} predictions to {ns.out}")


def cmd_evaluate(ns):
    truth, pred = read_labels_csv(ns.truth), read_labels_csv(ns.pred)
    if len(truth) != len(pred):
        raise InvalidInputError(f"{ns.truth} has {len(truth)} rows but {ns.pred} has {len(pred)}")
    cm = confusion(truth, pred, sort_labels(truth + pred))
    if ns.report == "json":
        text = canonical_json(report_dict(cm, {"truth": str(ns.truth), "pred": str(ns.pred)}))
    else:
        text = report_table(cm, ns.name)
    _emit(text, ns.out)


def cmd_pipeline(ns):
    cfg = PipelineConfig(method=ns.method, train_fraction=ns.split, seed=ns.seed, k=ns.k,
                         erode=ns.erode, grid=ns.grid, gamma=ns.gamma, cost=ns.cost,
                         scale=not ns.no_scale, vocabulary=ns.vocabulary,
                         threshold=ns.threshold, stratified=ns.stratified)
    report, model = run_pipeline(ns.images, cfg, jobs=ns.jobs)
    Path(ns.report).write_text(canonical_json(report))
    if ns.model:
        model.save(ns.model)
    agg = report["aggregate"]
    print(f"{ns.method}: OvA {agg['overall_accuracy']:.4f} on {report['split']['test']} "
          f"test images -> {ns.report}")


def _fixture_task(args):
    kind, k, i, classes, seed, size, path = args
    path.parent.mkdir(parents=True, exist_ok=True)
    write_image(path, synth_image(kind, k, i, classes, seed, size))


def cmd_fixtures(ns):
    if ns.classes < 2:
        raise InvalidInputError("a fixture needs at least 2 classes")
    out = Path(ns.out)
    tasks = [(ns.kind, k, i, ns.classes, ns.seed, ns.size, out / str(k) / f"{i:03d}.png")
             for k in range(ns.classes) for i in range(ns.per_class)]
    parallel_map(_fixture_task, tasks, ns.jobs)
    print(f"wrote {len(tasks)} {ns.kind} images to {out}")


def _emit(text, out):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


# --- parser --------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="armload", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0,
                        help="more logging (-v info, -vv debug)")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    def common(p, jobs=False):
        p.add_argument("--seed", type=int, default=0, help="seed for every random choice")
        if jobs:
            p.add_argument("--jobs", type=_positive_int, default=default_jobs(),
                           help="worker processes for per-image work (default: all cores)")

    p = sub.add_parser("segment", help="remove the blue backdrop; writes images and masks")
    p.add_argument("--in", dest="in_dir", required=True, help="class-per-directory image root")
    p.add_argument("--out", required=True)
    p.add_argument("--k", type=_positive_int, default=2, help="colour clusters")
    p.add_argument("--erode", type=int, default=1, help="3x3 erosion passes")
    common(p, jobs=True)
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("extract", help="feature CSV from segmented images")
    p.add_argument("--method", choices=METHOD_NAMES, required=True)
    p.add_argument("--in", dest="in_dir", required=True)
    p.add_argument("--out", required=True, help="output CSV")
    p.add_argument("--codebook", help="bkp codebook JSON: read if it exists, otherwise built and written")
    p.add_argument("--grid", type=_positive_int, default=3)
    p.add_argument("--vocabulary", type=_positive_int, default=bkp.DEFAULT_VOCABULARY)
    p.add_argument("--threshold", type=float, default=bkp.DEFAULT_THRESHOLD,
                   help="keypoint response threshold")
    common(p, jobs=True)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("train", help="fit a one-vs-one RBF SVM")
    p.add_argument("--data", required=True)
    p.add_argument("--model", required=True, help="output model JSON")
    p.add_argument("--gamma", type=float, default=DEFAULT_GAMMA)
    p.add_argument("--cost", type=float, default=DEFAULT_COST)
    p.add_argument("--no-scale", action="store_true", help="skip z-score feature scaling")
    common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="label a feature CSV with a trained model")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="confusion matrix and metrics")
    p.add_argument("--truth", required=True, help="CSV whose first column is the true label")
    p.add_argument("--pred", required=True, help="CSV whose first column is the prediction")
    p.add_argument("--report", choices=("json", "table"), default="table")
    p.add_argument("--name", default="", help="experiment name shown in the table")
    p.add_argument("--out", help="write the report here instead of stdout")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("pipeline", help="segment, extract, split, train, predict and evaluate")
    p.add_argument("--images", required=True)
    p.add_argument("--method", choices=METHOD_NAMES, required=True)
    p.add_argument("--split", type=_fraction, default=0.7, help="training fraction")
    p.add_argument("--report", required=True, help="output report JSON")
    p.add_argument("--model", help="also save the trained model here")
    p.add_argument("--stratified", action="store_true")
    p.add_argument("--k", type=_positive_int, default=2)
    p.add_argument("--erode", type=int, default=1)
    p.add_argument("--grid", type=_positive_int, default=3)
    p.add_argument("--gamma", type=float, default=DEFAULT_GAMMA)
    p.add_argument("--cost", type=float, default=DEFAULT_COST)
    p.add_argument("--no-scale", action="store_true")
    p.add_argument("--vocabulary", type=_positive_int, default=bkp.DEFAULT_VOCABULARY)
    p.add_argument("--threshold", type=float, default=bkp.DEFAULT_THRESHOLD)
    common(p, jobs=True)
    p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser("fixtures", help="write a synthetic labelled corpus")
    p.add_argument("--kind", choices=FIXTURE_KINDS, required=True)
    p.add_argument("--classes", type=int, default=3)
    p.add_argument("--per-class", type=_positive_int, default=30)
    p.add_argument("--size", type=int, default=256)
    p.add_argument("--out", required=True)
    common(p, jobs=True)
    p.set_defaults(func=cmd_fixtures)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:  # --help or bad usage
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    level = [logging.WARNING, logging.INFO, logging.DEBUG][min(ns.verbose, 2)]
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        ns.func(ns)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"armload: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ArmloadError as exc:
        print(f"armload: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"armload: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return 0


if __name__ == "__main__":
    sys.exit(main())
