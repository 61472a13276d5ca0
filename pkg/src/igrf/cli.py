"""Command-line entry point: ``igrf <subcommand> --config run.ini``.

Exit codes: 0 success, 2 configuration error, 3 data/schema error,
4 numeric failure (divergent training, failing evaluator).
"""
from __future__ import annotations

import argparse
import json
import logging
import sys

from . import pipeline
from .errors import ConfigError, DataError, EvaluatorError, NumericError, SchemaError

log = logging.getLogger("igrf")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI config file (defaults cover the UNSW-NB15 run)")
    common.add_argument("--out", help="output directory (overrides output.dir)")
    common.add_argument("--seed", type=int, help="seed for the split, forest and MLP")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="igrf", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("preprocess", parents=[common], help="clean, encode, normalize and split")
    sub.add_parser("rank-ig", parents=[common], help="information-gain ranking CSV")
    sub.add_parser("rank-rf", parents=[common], help="random-forest MDI ranking CSV")
    p = sub.add_parser("filter", parents=[common], help="stage-1 subset from the rankings")
    p.add_argument("--mode", default="union", choices=pipeline.MODES[1:])
    for name, helptext in (("rfe", "stage-1 union then recursive feature elimination"),
                           ("pipeline", "every stage end to end")):
        p = sub.add_parser(name, parents=[common], help=helptext)
        p.add_argument("--rfe-epochs", type=int, help="epoch budget per RFE evaluation")
        p.add_argument("--evaluator", help="'mlp' or 'stub:<spec>' (see rfe.StubEvaluator)")
        if name == "pipeline":
            p.add_argument("--mode", default="igrf_rfe", choices=pipeline.MODES)
    for name in ("train", "evaluate"):
        p = sub.add_parser(name, parents=[common], help=f"{name} the MLP on a selected subset")
        p.add_argument("--mode", default="igrf_rfe", choices=pipeline.MODES)
    sub.add_parser("report", parents=[common], help="markdown summary of a run directory")
    return parser


def run(args) -> int:
    cfg = pipeline.load_config(args.config)
    cfg = pipeline.with_overrides(cfg, seed=args.seed, out_dir=args.out,
                                  rfe_epochs=getattr(args, "rfe_epochs", None))
    cmd = args.command
    if cmd == "preprocess":
        print(json.dumps(pipeline.cmd_preprocess(cfg), indent=2))
    elif cmd == "rank-ig":
        for s in pipeline.cmd_rank_ig(cfg):
            print(f"{s.feature:<24}{s.raw_ig:.6f}  {s.normalized:.4f}")
    elif cmd == "rank-rf":
        for s in pipeline.cmd_rank_rf(cfg):
            print(f"{s.feature:<24}{s.mdi:.6f}")
    elif cmd == "filter":
        print(pipeline.cmd_filter(cfg, args.mode).to_json())
    elif cmd == "rfe":
        print(pipeline.cmd_rfe(cfg, args.evaluator).to_json())
    elif cmd == "train":
        m = pipeline.cmd_train(cfg, args.mode)
        print(f"epochs run {m.trace.epochs_run}, best epoch {m.trace.best_epoch}, "
              f"best validation loss {m.trace.best_val_loss:.6f}")
    elif cmd == "evaluate":
        print(pipeline.cmd_evaluate(cfg, args.mode).table())
    elif cmd == "pipeline":
        print(pipeline.cmd_pipeline(cfg, args.mode, args.evaluator).table())
    elif cmd == "report":
        print(pipeline.cmd_report(cfg))
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return run(args)
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG
    except (DataError, SchemaError) as exc:
        log.error("data error: %s", exc)
        return EXIT_DATA
    except (NumericError, EvaluatorError) as exc:
        log.error("numeric failure: %s", exc)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
