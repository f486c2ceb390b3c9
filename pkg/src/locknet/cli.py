"""Command-line entry point.

Subcommands: convert, stamp, run, eval, gradcheck, report. Exit status is
0 on success, 1 on runtime/data failure, 2 on usage or config errors. No
subcommand mutates its inputs; outputs go only to explicitly named paths.
"""

import argparse
import logging
import sys

import numpy as np

from locknet import certificate
from locknet.certificate import Placement, motif_by_id, parse_motif_file, stamp_batch
from locknet.datasets import (
    LabeledDataset,
    load_canonical,
    load_cifar_binary,
    load_idx,
    save_canonical,
)
from locknet.errors import ConfigError, LocknetError
from locknet.evaluation import accuracy, parse_csv, per_class_accuracy, render_table
from locknet.nn.checkpoint_io import load_checkpoint
from locknet.nn.gradcheck import gradient_check
from locknet.nn.presets import cnn_mini_spec, mlp_mini_spec
from locknet.pipeline import load_config, run_experiment

GRADCHECK_TOLERANCE = 1e-4


def _summary(ds):
    n, h, w, c = ds.images.shape
    return f"N={n} K={ds.class_count} H={h} W={w} C={c}"


def _cmd_convert(args):
    if args.format == "idx":
        ds = load_idx(args.images, args.labels, class_count=args.classes,
                      name=args.name)
    elif args.format == "cifar10":
        ds = load_cifar_binary(args.inputs, "cifar10", name=args.name)
    elif args.format == "cifar100":
        ds = load_cifar_binary(args.inputs, f"cifar100-{args.label_mode}",
                               name=args.name)
    else:  # canonical-import: validate and rewrite an externally produced file
        ds = load_canonical(args.inputs[0], name=args.name)
    save_canonical(ds, args.out)
    print(f"wrote {args.out}: {_summary(ds)}")
    return 0


def _cmd_stamp(args):
    ds = load_canonical(args.data)
    extra = parse_motif_file(args.motif_file) if args.motif_file else ()
    motif = motif_by_id(args.motif, extra=extra)
    placement = Placement(args.placement, args.margin)
    rng = np.random.Generator(np.random.PCG64(args.seed))
    stamped = LabeledDataset(
        ds.name, stamp_batch(ds.images, motif, placement, rng), ds.labels,
        ds.class_count,
    )
    save_canonical(stamped, args.out)
    print(f"wrote {args.out}: {_summary(stamped)} motif={motif.id} "
          f"placement={args.placement}")
    return 0


def _cmd_run(args):
    config = load_config(args.config)
    result = run_experiment(config, out_root=args.out,
                            save_models=not args.no_save_models)
    print(render_table(result.report), end="")
    if result.run_dir:
        print(f"run directory: {result.run_dir}")
    return 1 if result.report.failed_seeds else 0


def _cmd_eval(args):
    ckpt = load_checkpoint(args.checkpoint)
    ds = load_canonical(args.data)
    print(f"accuracy: {accuracy(ckpt, ds):.2f}")
    if args.per_class:
        for cls, pct in per_class_accuracy(ckpt, ds).items():
            print(f"class {cls}: {pct:.2f}")
    return 0


def _cmd_gradcheck(args):
    if args.preset == "mlp-mini":
        spec, input_shape = mlp_mini_spec()
    else:
        spec, input_shape = cnn_mini_spec()
    err = gradient_check(spec, input_shape, sample_count=args.samples,
                         seed=args.seed)
    print(f"{args.preset}: max relative gradient error {err:.3e} "
          f"(tolerance {GRADCHECK_TOLERANCE:.0e})")
    return 0 if err <= GRADCHECK_TOLERANCE else 1


def _cmd_report(args):
    with open(args.csv) as f:
        report = parse_csv(f.read())
    print(render_table(report), end="")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="locknet",
        description="Train and evaluate certificate-locked image classifiers.",
    )
    parser.add_argument("--quiet", action="store_true", help="suppress progress logs")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("convert", help="convert a dataset to the canonical format")
    fmt = p.add_subparsers(dest="format", required=True)
    idx = fmt.add_parser("idx", help="IDX image/label pair (MNIST family)")
    idx.add_argument("--images", required=True)
    idx.add_argument("--labels", required=True)
    idx.add_argument("--classes", type=int, default=None,
                     help="expected class count (default: infer)")
    c10 = fmt.add_parser("cifar10", help="CIFAR10 binary batches")
    c10.add_argument("--inputs", nargs="+", required=True)
    c100 = fmt.add_parser("cifar100", help="CIFAR100 binary batches")
    c100.add_argument("--inputs", nargs="+", required=True)
    c100.add_argument("--label-mode", choices=("fine", "coarse"), default="fine")
    imp = fmt.add_parser("canonical-import",
                         help="validate and rewrite a canonical file")
    imp.add_argument("--inputs", nargs=1, required=True)
    for sp in (idx, c10, c100, imp):
        sp.add_argument("--out", required=True)
        sp.add_argument("--name", default=None)
    p.set_defaults(func=_cmd_convert)

    p = sub.add_parser("stamp", help="stamp a motif onto every image")
    p.add_argument("--data", required=True)
    p.add_argument("--motif", default="multi_pixel")
    p.add_argument("--motif-file", default=None)
    p.add_argument("--placement",
                   choices=(certificate.FIXED_BOTTOM_RIGHT, certificate.RANDOM_UNIFORM),
                   default=certificate.FIXED_BOTTOM_RIGHT)
    p.add_argument("--margin", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_stamp)

    p = sub.add_parser("run", help="run a full locked-training experiment")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default="runs")
    p.add_argument("--no-save-models", action="store_true")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("eval", help="accuracy of a checkpoint on a dataset")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--per-class", action="store_true")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("gradcheck", help="finite-difference gradient check")
    p.add_argument("--preset", choices=("mlp-mini", "cnn-mini"), default="mlp-mini")
    p.add_argument("--samples", type=int, default=150)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_gradcheck)

    p = sub.add_parser("report", help="render a report.csv as an aligned table")
    p.add_argument("--csv", required=True)
    p.set_defaults(func=_cmd_report)

    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING if args.quiet else logging.INFO,
        format="%(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except ConfigError as e:
        for problem in e.problems:
            print(f"config error: {problem}", file=sys.stderr)
        return 2
    except LocknetError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except OSError as e:
        print(f"I/O error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
