"""Command-line entry point.

Exit codes: 0 on success, 1 for usage or configuration errors, 2 when a
run fails (divergence, failed gradient check, unreadable inputs).
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import experiments
from .config import ConfigError, RunConfig, load_config, tiny_config
from .data import ZslDataset, generate_dataset
from .diagnostics import model_gradcheck, op_gradient_suite
from .evaluation import best_gamma, evaluate_scores, load_scores, save_scores, sweep_gamma, write_csv, write_json
from .serialize import load_params, save_params
from .train import DivergenceError, compute_scores, evaluate_model, train

SWEEP_COLUMNS = ("gamma", "S", "U", "H")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON file with RunConfig overrides")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--out", help="output directory (defaults to the config's output_dir)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="aenet", description="Attribute-enhanced visual prompting for zero-shot learning.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("gen-data", help="generate and save the synthetic benchmark")
    _common(p)

    p = sub.add_parser("train", help="train a model and report test metrics")
    _common(p)
    p.add_argument("--data", help="dataset directory from gen-data (regenerated from the seed if omitted)")

    p = sub.add_parser("eval", help="score the test split with saved parameters")
    _common(p)
    p.add_argument("--params", help="parameter directory (default <out>/params)")
    p.add_argument("--data", help="dataset directory from gen-data")

    p = sub.add_parser("sweep-gamma", help="calibrated-stacking sweep over saved scores")
    _common(p)
    p.add_argument("--scores", help="score file stem (default <out>/scores)")

    p = sub.add_parser("ablate", help="full model against the three ablations")
    _common(p)

    p = sub.add_parser("sweep-T", help="sweep the prompt length over {1,3,5,7,9}")
    _common(p)

    p = sub.add_parser("sweep-lambda", help="sweep the consistency weight over [0, 2]")
    _common(p)

    p = sub.add_parser("gradcheck", help="finite-difference check of every operation and the full loss")
    _common(p)
    p.add_argument("--trials", type=int, default=100, help="random trials per operation")
    return parser


def resolve_config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    if args.seed is not None:
        cfg = cfg.with_overrides(seed=args.seed)
    if args.out:
        cfg = cfg.with_overrides(output_dir=args.out)
    cfg.validate()
    return cfg


def _dataset(cfg: RunConfig, directory) -> ZslDataset:
    return ZslDataset.load(directory) if directory else generate_dataset(cfg)


def cmd_gen_data(cfg: RunConfig, args, out: Path) -> None:
    data = generate_dataset(cfg)
    data.save(out / "data")
    print(f"dataset {data.digest()[:16]} written to {out / 'data'}")


def cmd_train(cfg: RunConfig, args, out: Path) -> None:
    data = _dataset(cfg, args.data)
    params, trainlog = train(cfg, data)
    save_params(out / "params", params)
    settings = cfg.to_dict()
    settings.pop("output_dir")
    write_json(out / "config.json", settings)
    write_json(out / "train_log.json", trainlog.to_dict())
    report = evaluate_model(params, cfg, data)
    write_json(out / "eval_report.json", report.to_dict())
    print(f"acc_zsl {report.acc_zsl:.4f}  S {report.S:.4f}  U {report.U:.4f}  H {report.H:.4f}  gamma {report.gamma}")


def cmd_eval(cfg: RunConfig, args, out: Path) -> None:
    data = _dataset(cfg, args.data)
    params = load_params(args.params or out / "params", cfg)
    ps = compute_scores(params, cfg, data)
    save_scores(out / "scores", ps)
    report = evaluate_scores(ps, cfg.gamma_grid)
    write_json(out / "eval_report.json", report.to_dict())
    write_csv(out / "gamma_sweep.csv", report.sweep, SWEEP_COLUMNS)
    print(f"acc_zsl {report.acc_zsl:.4f}  S {report.S:.4f}  U {report.U:.4f}  H {report.H:.4f}  gamma {report.gamma}")


def cmd_sweep_gamma(cfg: RunConfig, args, out: Path) -> None:
    ps = load_scores(args.scores or out / "scores")
    rows = sweep_gamma(ps, cfg.gamma_grid)
    write_csv(out / "gamma_sweep.csv", rows, SWEEP_COLUMNS)
    best = best_gamma(rows)
    print(f"best gamma {best['gamma']}  S {best['S']:.4f}  U {best['U']:.4f}  H {best['H']:.4f}")


def _table(rows, key: str, out: Path, name: str) -> None:
    write_csv(out / f"{name}.csv", rows, (key, *experiments.METRIC_COLUMNS))
    for row in rows:
        print(f"{key}={row[key]}  acc_zsl {row['acc_zsl']:.4f}  H {row['H']:.4f}")


def cmd_ablate(cfg: RunConfig, args, out: Path) -> None:
    _table(experiments.ablate(cfg), "variant", out, "ablation")


def cmd_sweep_t(cfg: RunConfig, args, out: Path) -> None:
    _table(experiments.sweep_prompt_length(cfg), "prompt_length", out, "sweep_T")


def cmd_sweep_lambda(cfg: RunConfig, args, out: Path) -> None:
    _table(experiments.sweep_lambda_cons(cfg), "lambda_cons", out, "sweep_lambda")


def cmd_gradcheck(cfg: RunConfig, args, out: Path) -> None:
    ops = op_gradient_suite(trials=args.trials)
    # without --config the tiny configuration is used; the default one is slow to check
    target = cfg if args.config else tiny_config(seed=cfg.seed)
    report = model_gradcheck(target)
    worst_op = max(ops.values())
    payload = {"operations": ops, "model": report.to_dict(), "passed": report.passed and worst_op < report.tol}
    write_json(out / "gradcheck.json", payload)
    print(f"worst op error {worst_op:.3e}  model error {report.max_error:.3e}")
    if not payload["passed"]:
        raise RuntimeError("gradient check failed")


COMMANDS = {
    "gen-data": cmd_gen_data,
    "train": cmd_train,
    "eval": cmd_eval,
    "sweep-gamma": cmd_sweep_gamma,
    "ablate": cmd_ablate,
    "sweep-T": cmd_sweep_t,
    "sweep-lambda": cmd_sweep_lambda,
    "gradcheck": cmd_gradcheck,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        cfg = resolve_config(args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except ConfigError as exc:
        print(f"aenet: config error: {exc}", file=sys.stderr)
        return 1
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    try:
        COMMANDS[args.command](cfg, args, out)
    except DivergenceError as exc:
        print(f"aenet: {exc}", file=sys.stderr)
        return 2
    except (RuntimeError, ValueError, OSError) as exc:
        print(f"aenet: {args.command} failed: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
