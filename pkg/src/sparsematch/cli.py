"""Command line front end: ``sparsematch <subcommand> [options]``.

Exit codes: 0 ok, 2 configuration error, 3 data error, 4 numeric error.
"""

import argparse
import logging
import sys

from . import pipeline
from .config import load_config, parse_overrides
from .errors import SparseMatchError

log = logging.getLogger("sparsematch")


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key=value config file")
    common.add_argument("--seed", type=int)
    common.add_argument("--k", type=int)
    common.add_argument("--beta", type=float)
    common.add_argument("--alpha", type=float)
    common.add_argument("--arch", choices=["1", "2"])
    common.add_argument("--eigen-mode", choices=["smallest", "largest"])
    common.add_argument("--out", help="artifact directory")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override any config key (repeatable)")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(
        prog="sparsematch",
        description="Sparse over-complete patch matching pipeline.")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("learn-dict", parents=[common],
                   help="learn the dictionary from training patches")
    enc = sub.add_parser("encode", parents=[common],
                         help="encode the pairs of one split")
    enc.add_argument("--split", choices=["train", "test"], default="train")
    enc.add_argument("--dictionary", help="dictionary file (default: in --out)")
    enc.add_argument("--force", action="store_true")
    tr = sub.add_parser("train", parents=[common], help="train the matcher")
    tr.add_argument("--force", action="store_true")
    ev = sub.add_parser("eval", parents=[common], help="evaluate on the test split")
    ev.add_argument("--force", action="store_true")
    sub.add_parser("pipeline", parents=[common], help="run every stage")
    syn = sub.add_parser("synth", parents=[common],
                         help="write the synthetic dataset container")
    syn.add_argument("--path", help="output container path")
    return parser


def config_from_args(args):
    overrides = parse_overrides(args.set, "--set")
    for key in ("seed", "k", "beta", "alpha", "arch", "eigen_mode", "out"):
        value = getattr(args, key, None)
        if value is not None:
            overrides[key] = value
    return load_config(args.config, overrides)


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = config_from_args(args)
        if args.command == "learn-dict":
            d = pipeline.cmd_learn_dict(config)
            print(f"dictionary m={d.m} k={d.k} {d.completeness} "
                  f"overcomplete={str(d.overcomplete).lower()} "
                  f"-> {config.path(pipeline.DICT_FILE)}")
        elif args.command == "encode":
            codes, pairs, report = pipeline.cmd_encode(
                config, args.split, args.dictionary, args.force)
            print(f"encoded {report.n} patches for {len(pairs)} {args.split} "
                  f"pairs, mean support {report.mean_support_size:.2f}")
        elif args.command == "train":
            _, history = pipeline.cmd_train(config, args.force)
            best = max(history.val_acc) if len(history) else float("nan")
            print(f"trained {len(history)} epochs, best val acc {best:.4f}")
        elif args.command == "eval":
            _, err95, acc = pipeline.cmd_eval(config, args.force)
            print(f"error95={err95:.6f} accuracy={acc:.6f}")
        elif args.command == "pipeline":
            result = pipeline.cmd_pipeline(config)
            print(f"m={result['m']} k={result['k']} {result['completeness']} "
                  f"error95={result['error95']:.6f} "
                  f"accuracy={result['accuracy']:.6f}")
        elif args.command == "synth":
            ds, path, pairs_path = pipeline.cmd_synth(config, args.path)
            print(f"wrote {len(ds.patches)} patches to {path}, "
                  f"{len(ds.pairs)} pairs to {pairs_path}")
    except SparseMatchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
