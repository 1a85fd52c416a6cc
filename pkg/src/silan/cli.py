"""Command-line front end.

Every command accepts ``--config file.json`` (a flat document of run keys);
explicit flags override values from the file.  Commands that write files also
write the effective configuration next to them as ``effective_config.json``.

Exit codes: 0 success, 1 runtime or validation failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import fields, replace
from pathlib import Path

from . import verify
from .adapt import adapt_target, evaluate, source_noise_std, write_metrics_csv
from .config import AdaptConfig, RunConfig
from .data import load_csv, save_csv
from .experiment import make_domains, pretrain
from .nn import load_model, save_model
from .plot import save_svg

SWEEP_PARAMS = {"k_t": int, "k_s": int, "tau": float}


class CliError(Exception):
    """Runtime failure reported with exit code 1."""


def _parse_widths(text: str) -> list[int]:
    try:
        return [int(w) for w in text.replace(" ", "").split(",") if w]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _bool(text: str) -> bool:
    if text.lower() in ("1", "true", "yes"):
        return True
    if text.lower() in ("0", "false", "no"):
        return False
    raise argparse.ArgumentTypeError(f"expected true/false, got {text!r}")


# flag name -> (config key, type); every one defaults to None so the file wins unless given
DATA_FLAGS = {"--n": ("n", int), "--noise": ("noise_std", float), "--rotate": ("rotation_deg", float),
              "--seed-s": ("seed_s", int), "--seed-t": ("seed_t", int)}
MODEL_FLAGS = {"--layers": ("layers", _parse_widths), "--activation": ("activation", str),
               "--feature-depth": ("feature_depth", int), "--pretrain-epochs": ("pretrain_epochs", int),
               "--pretrain-lr": ("pretrain_lr", float), "--pretrain-momentum": ("pretrain_momentum", float),
               "--pretrain-batch-size": ("pretrain_batch_size", int)}
ADAPT_FLAGS = {"--k-t": ("k_t", int), "--k-s": ("k_s", int), "--tau": ("tau", float),
               "--batch-size": ("batch_size", int), "--epochs": ("epochs", int),
               "--learning-rate": ("learning_rate", float), "--momentum": ("momentum", float),
               "--centroid-space": ("centroid_space", str), "--bank-refresh": ("bank_refresh", str),
               "--exclude-self": ("exclude_self", _bool), "--space": ("space", str),
               "--key-gradient": ("key_gradient", str), "--loss-reduction": ("loss_reduction", str)}


def _add_flags(parser, table):
    for flag, (key, kind) in table.items():
        parser.add_argument(flag, dest=key, type=kind, default=None)


def _add_common(parser, *tables):
    parser.add_argument("--config", type=Path, default=None, help="JSON document of run keys")
    parser.add_argument("--seed", type=int, default=None)
    for table in tables:
        _add_flags(parser, table)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="silan", description="Source-free adaptation on two-moons toys.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="write source.csv and target.csv")
    _add_common(p, DATA_FLAGS)
    p.add_argument("--out-dir", type=Path, required=True)

    p = sub.add_parser("pretrain", help="train the source model")
    _add_common(p, MODEL_FLAGS)
    p.add_argument("--source", type=Path, required=True, help="labelled source CSV")
    p.add_argument("--out", type=Path, required=True, help="model document to write")

    p = sub.add_parser("adapt", help="adapt a source model to an unlabelled target")
    _add_common(p, ADAPT_FLAGS)
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--target", type=Path, required=True)
    p.add_argument("--metrics", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("eval", help="print accuracy as a bare decimal")
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--data", type=Path, required=True)

    p = sub.add_parser("verify", help="run an oracle suite")
    p.add_argument("suite", choices=verify.SUITES + ("all",))

    p = sub.add_parser("sweep", help="one adaptation run per value of a hyperparameter")
    _add_common(p, ADAPT_FLAGS)
    p.add_argument("--param", choices=tuple(SWEEP_PARAMS), required=True)
    p.add_argument("--values", nargs="+", required=True)
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--target", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True, help="CSV to write")

    p = sub.add_parser("plot", help="SVG decision boundary with data overlaid")
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--grid-res", type=int, default=100)
    p.add_argument("--title", default=None)
    return parser


def load_run_config(args) -> RunConfig:
    doc = {}
    if getattr(args, "config", None) is not None:
        try:
            doc = json.loads(args.config.read_text(encoding="utf-8"))
        except OSError as exc:
            raise CliError(f"cannot read config: {exc}") from None
        except json.JSONDecodeError as exc:
            raise CliError(f"{args.config}: invalid JSON: {exc}") from None
        if not isinstance(doc, dict):
            raise CliError(f"{args.config}: expected a JSON object")
    overrides = {k: v for k, v in vars(args).items() if v is not None and k in _config_keys()}
    doc.update(overrides)
    return RunConfig.from_dict(doc)


def _config_keys() -> set:
    return ({f.name for f in fields(RunConfig)} | {f.name for f in fields(AdaptConfig)}) - {"adapt"}


def write_effective_config(cfg: RunConfig, directory: Path) -> None:
    directory.mkdir(parents=True, exist_ok=True)
    (directory / "effective_config.json").write_text(json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n",
                                                     encoding="utf-8")


def _existing(path: Path) -> Path:
    if not path.is_file():
        raise CliError(f"{path}: no such file")
    return path


def cmd_gen_data(args) -> int:
    cfg = load_run_config(args)
    ds_s, ds_t = make_domains(cfg)
    args.out_dir.mkdir(parents=True, exist_ok=True)
    save_csv(ds_s, args.out_dir / "source.csv")
    save_csv(ds_t, args.out_dir / "target.csv")
    write_effective_config(cfg, args.out_dir)
    return 0


def cmd_pretrain(args) -> int:
    cfg = load_run_config(args)
    ds_s = load_csv(_existing(args.source))
    model = pretrain(cfg, ds_s)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    save_model(model, args.out)
    write_effective_config(cfg, args.out.parent)
    print(f"source accuracy {evaluate(model, ds_s)}")
    return 0


def cmd_adapt(args) -> int:
    cfg = load_run_config(args)
    model_s = load_model(_existing(args.model))
    ds_t = load_csv(_existing(args.target))
    model_t, history = adapt_target(model_s, ds_t, cfg.adapt)
    for path in (args.metrics, args.out):
        path.parent.mkdir(parents=True, exist_ok=True)
    write_metrics_csv(history, args.metrics)
    save_model(model_t, args.out)
    write_effective_config(cfg, args.out.parent)
    if args.metrics.parent.resolve() != args.out.parent.resolve():
        write_effective_config(cfg, args.metrics.parent)
    return 0


def cmd_eval(args) -> int:
    model = load_model(_existing(args.model))
    print(evaluate(model, load_csv(_existing(args.data))))
    return 0


def cmd_verify(args) -> int:
    suites = verify.SUITES if args.suite == "all" else (args.suite,)
    results = [verify.run_suite(name) for name in suites]
    return 0 if all(results) else 1


def cmd_sweep(args) -> int:
    cfg = load_run_config(args)
    cast = SWEEP_PARAMS[args.param]
    try:
        values = [cast(v) for v in args.values]
    except ValueError:
        raise CliError(f"--values for {args.param} must be {cast.__name__}s, got {args.values}") from None
    model_s = load_model(_existing(args.model))
    ds_t = load_csv(_existing(args.target))
    rows = []
    for value in values:
        run_cfg = replace(cfg.adapt, **{args.param: value})
        model_t, history = adapt_target(model_s, ds_t, run_cfg)
        rows.append((value, evaluate(model_t, ds_t), source_noise_std(model_s, ds_t, run_cfg.k_s, run_cfg.exclude_self)))
    args.out.parent.mkdir(parents=True, exist_ok=True)
    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["value", "final_accuracy", "mean_noise_std"])
        for value, acc, noise in rows:
            writer.writerow([value, repr(acc), repr(noise)])
    write_effective_config(cfg, args.out.parent)
    return 0


def cmd_plot(args) -> int:
    model = load_model(_existing(args.model))
    ds = load_csv(_existing(args.data))
    args.out.parent.mkdir(parents=True, exist_ok=True)
    save_svg(model, ds, args.out, args.grid_res, title=args.title)
    return 0


COMMANDS = {"gen-data": cmd_gen_data, "pretrain": cmd_pretrain, "adapt": cmd_adapt, "eval": cmd_eval,
            "verify": cmd_verify, "sweep": cmd_sweep, "plot": cmd_plot}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (CliError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
