"""Command-line entry points: train, eval, ablate, check.

Exit codes: 0 success, 2 config error, 3 runtime abort, 4 verification
failure.  Config precedence: --set overrides > config file > defaults; the
fully resolved config is written into the output directory before any work.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from .evaluate import evaluate_generator, run_ablation
from .training import (
    ConfigError,
    TrainConfig,
    TrainingDiverged,
    apply_overrides,
    config_text,
    load_config,
    load_generator,
    train,
)
from .verify import run_all_checks

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3
EXIT_CHECK = 4


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="initlab",
        description="Conditional-GAN lab: importance-weighted multi-hop training "
                    "on synthetic attribute domains.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, needs_config=True):
        if needs_config:
            p.add_argument("--config", type=Path, default=None,
                           help="flat key = value config file")
            p.add_argument("--set", dest="overrides", action="append", default=[],
                           metavar="K=V", help="override a config key (repeatable)")
        p.add_argument("--out", type=Path, default=None, help="output directory")

    p_train = sub.add_parser("train", help="run the training loop")
    common(p_train)

    p_eval = sub.add_parser("eval", help="evaluate a checkpoint (1-hop outputs)")
    common(p_eval)
    p_eval.add_argument("--checkpoint", type=Path, required=True)

    p_ablate = sub.add_parser("ablate", help="run the five-variant ablation")
    common(p_ablate)
    p_ablate.add_argument("--seeds", type=str, required=True,
                          help="comma-separated seed list, e.g. 0,1,2,3,4")

    p_check = sub.add_parser("check", help="run the verification suite")
    common(p_check, needs_config=False)
    return parser


def _resolve_config(args):
    config = TrainConfig()
    if getattr(args, "config", None) is not None:
        config = load_config(args.config, base=config)
    config = apply_overrides(config, getattr(args, "overrides", []))
    if args.out is not None:
        config = apply_overrides(config, [f"out_dir={args.out}"])
    return config


def _prepare_out(config, default_name):
    out_dir = Path(config.out_dir) if config.out_dir else Path("runs") / default_name
    out_dir.mkdir(parents=True, exist_ok=True)
    config = apply_overrides(config, [f"out_dir={out_dir}"])
    (out_dir / "config.resolved.cfg").write_text(config_text(config))
    return config, out_dir


def cmd_train(args):
    config = _resolve_config(args).validate()
    config, out_dir = _prepare_out(config, f"train_seed{config.seed}")
    state, history = train(config)
    log.info("training finished at step %d; outputs in %s", state.step, out_dir)
    print(f"run directory: {out_dir}")
    print(f"final checkpoint: {out_dir / f'step_{state.step}.ckpt'}")
    return EXIT_OK


def cmd_eval(args):
    config = _resolve_config(args).validate()
    config, out_dir = _prepare_out(config, f"eval_seed{config.seed}")
    spec, gen = load_generator(args.checkpoint, config)
    report = evaluate_generator(gen, spec, n_samples=config.eval_samples,
                                seed=config.seed)
    with open(out_dir / "eval_metrics.json", "w") as fh:
        json.dump(report.to_dict(), fh, indent=2)
        fh.write("\n")
    header = (["seed", "fid", "mean_acc"]
              + [f"acc_bit_{i + 1}" for i in range(spec.n)] + ["content_err"])
    with open(out_dir / "eval_metrics.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerow([report.seed, repr(report.fid), repr(report.mean_accuracy)]
                        + [repr(a) for a in report.per_bit_accuracy]
                        + [repr(report.content_error)])
    print(f"fid={report.fid:.4f} mean_acc={report.mean_accuracy:.4f} "
          f"content_err={report.content_error:.4f}")
    return EXIT_OK


def cmd_ablate(args):
    config = _resolve_config(args).validate()
    try:
        seeds = [int(s) for s in args.seeds.split(",") if s.strip() != ""]
    except ValueError:
        raise ConfigError(f"bad --seeds list: {args.seeds!r}") from None
    if not seeds:
        raise ConfigError("--seeds must name at least one seed")
    config, out_dir = _prepare_out(config, "ablation")
    rows, summary = run_ablation(config, seeds, n_eval=config.eval_samples,
                                 out_dir=out_dir)
    failed = sum(1 for r in rows if r["failed"])
    print(f"ablation finished: {len(rows)} arms, {failed} failed; results in {out_dir}")
    for label, stats in summary.items():
        print(f"variant ({label}): median fid {stats['fid_median']:.4f}, "
              f"median acc {stats['mean_acc_median']:.4f}")
    return EXIT_OK


def cmd_check(args):
    config = TrainConfig()
    out_dir = None
    if args.out is not None:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "config.resolved.cfg").write_text(config_text(config))
    results = run_all_checks()
    payload = {
        "passed": all(r.passed for r in results),
        "checks": [r.to_dict() for r in results],
    }
    text = json.dumps(payload, indent=2)
    print(text)
    if out_dir is not None:
        (out_dir / "check_report.json").write_text(text + "\n")
    for r in results:
        log.info("%-24s %s  value=%.3e threshold=%.3e (%s)",
                 r.name, "PASS" if r.passed else "FAIL", r.value, r.threshold,
                 r.direction)
    return EXIT_OK if payload["passed"] else EXIT_CHECK


def main(argv=None):
    logging.basicConfig(level=logging.INFO, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    parser = _build_parser()
    args = parser.parse_args(argv)
    handlers = {"train": cmd_train, "eval": cmd_eval,
                "ablate": cmd_ablate, "check": cmd_check}
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except TrainingDiverged as exc:
        print(f"runtime abort: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except (OSError, ValueError, RuntimeError) as exc:
        print(f"runtime abort: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
