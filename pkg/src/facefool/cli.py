"""Command-line entry point.

Subcommands wire datasets, oracles, attacks, and reports into
reproducible end-to-end runs:

    facefool synth         generate the synthetic dataset tree
    facefool train         fit the built-in model and dump its weights
    facefool attack        run one attack kind over the test split
    facefool report        render SVG figures from attack CSVs
    facefool serve-oracle  expose a trained model over the wire protocol

Every run writes a manifest listing its full configuration and artifact
paths; re-running with the same flags reproduces the outputs byte for
byte (built-in oracle only). Exit codes: 0 success, 1 usage error,
2 data/model error, 3 oracle transport error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .attacks import (
    CHECKERBOARD_BANDS,
    KIND_SUMMARIES,
    KINDS,
    AttackConfig,
    run_attack,
)
from .dataset import (
    DESK_HEIGHT,
    DESK_NUM_CLASSES,
    DESK_PER_CLASS,
    DESK_SEED,
    DESK_WIDTH,
    generate_synthetic,
    load_directory,
    split_train_test,
)
from .errors import (
    DatasetError,
    FacefoolError,
    ModelError,
    OracleError,
    PgmError,
    UsageError,
)
from .image import save_pgm
from .oracle import TrainConfig, accuracy, load_model, save_model, train_softmax
from .report import METRICS, build_report, read_csv, render_bar_chart, write_csv
from .rng import Pcg32, derive_seed
from .wire import OracleTCPServer, connect_external, serve_stdio


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _write_manifest(path: Path, command: str, config: dict,
                    artifact_paths: list[str], oracle_descriptor: str) -> None:
    payload = {
        "command": command,
        "config": config,
        "artifact_paths": artifact_paths,
        "oracle_descriptor": oracle_descriptor,
    }
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n",
                    encoding="utf-8")


def _canonical_kind(raw: str) -> str:
    kind = raw.upper()
    if kind == "ESCALATE":
        kind = "ESCALATION"
    if kind not in KINDS:
        raise UsageError(
            f"unknown attack kind {raw!r}; choose from "
            f"{', '.join(KINDS[:-2])}, fgsm, escalate"
        )
    return kind


def _parse_band(raw: str) -> tuple[int, int]:
    lo, sep, hi = raw.partition(":")
    if not sep or not lo.isdigit() or not hi.isdigit():
        raise UsageError(f"--band wants lo:hi, got {raw!r}")
    return int(lo), int(hi)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="facefool", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", metavar="command")

    p = sub.add_parser("synth", help="generate a synthetic labeled dataset")
    p.add_argument("--classes", type=int, default=DESK_NUM_CLASSES)
    p.add_argument("--per-class", type=int, default=DESK_PER_CLASS)
    p.add_argument("--width", type=int, default=DESK_WIDTH)
    p.add_argument("--height", type=int, default=DESK_HEIGHT)
    p.add_argument("--seed", type=int, default=DESK_SEED)
    p.add_argument("--out", required=True, help="output dataset directory")

    p = sub.add_parser("train", help="train the built-in softmax model")
    p.add_argument("--data", required=True, help="dataset directory")
    p.add_argument("--model-out", required=True, help="model dump destination")
    p.add_argument("--epochs", type=int, default=TrainConfig.epochs)
    p.add_argument("--learning-rate", type=float, default=TrainConfig.learning_rate)
    p.add_argument("--l2", type=float, default=TrainConfig.l2_penalty)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--split-seed", type=int, default=0)
    p.add_argument("--per-class-test", type=int, default=1)

    p = sub.add_parser("attack", help="run one attack over the test split")
    p.add_argument("--kind", help="A..G, fgsm, or escalate")
    p.add_argument("--list-kinds", action="store_true",
                   help="list attack kinds and exit")
    p.add_argument("--data", help="dataset directory")
    p.add_argument("--model", help="built-in model file (in-process oracle)")
    p.add_argument("--oracle", help="external oracle endpoint "
                                    "(host:port or exec:<command>)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--split-seed", type=int, default=0)
    p.add_argument("--per-class-test", type=int, default=1)
    p.add_argument("--cell-side", type=int)
    p.add_argument("--band", help="lo:hi magnitude band (checkerboard kinds)")
    p.add_argument("--fgsm-grid", help="comma-separated ascending epsilons")
    p.add_argument("--step", type=int, default=10, help="escalation increment")
    p.add_argument("--max-magnitude", type=int, default=250)
    p.add_argument("--out", help="output directory")

    p = sub.add_parser("report", help="render SVG figures from attack CSVs")
    p.add_argument("csvs", nargs="*", help="CSV files written by `attack`")
    p.add_argument("--metric", choices=("conf", "misclass"), default="conf")
    p.add_argument("--per-image", action="store_true",
                   help="one bar per image (single CSV)")
    p.add_argument("--out", required=True, help="SVG destination")

    p = sub.add_parser("serve-oracle",
                       help="expose a trained model over the wire protocol")
    p.add_argument("--model", required=True)
    p.add_argument("--listen", help="host:port (port 0 picks one)")
    p.add_argument("--stdio", action="store_true",
                   help="speak the protocol on stdin/stdout")

    return parser


def cmd_synth(args) -> int:
    try:
        ds = generate_synthetic(args.classes, args.per_class, args.width,
                                args.height, Pcg32(args.seed))
    except DatasetError as err:
        raise UsageError(str(err)) from err
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    artifacts = []
    for name in ds.class_names:
        (out / name).mkdir(exist_ok=True)
    for item in ds.items:
        path = out / ds.class_names[item.label] / f"{item.source_name}.pgm"
        path.write_bytes(save_pgm(item.image))
        artifacts.append(str(path))
    _write_manifest(
        out / "manifest.json", "synth",
        {"classes": args.classes, "per_class": args.per_class,
         "width": args.width, "height": args.height, "seed": args.seed,
         "out": str(out)},
        artifacts, "none",
    )
    print(f"wrote {len(ds.items)} images across {ds.num_classes} classes to {out}")
    return 0


def _load_split(data_dir: str, per_class_test: int, split_seed: int):
    ds = load_directory(data_dir)
    return split_train_test(ds, per_class_test, Pcg32(split_seed))


def cmd_train(args) -> int:
    train, test = _load_split(args.data, args.per_class_test, args.split_seed)
    cfg = TrainConfig(epochs=args.epochs, learning_rate=args.learning_rate,
                      l2_penalty=args.l2, seed=args.seed)
    model = train_softmax(train, cfg)
    save_model(model, args.model_out)
    train_acc = accuracy(model, train)
    print(f"train accuracy: {train_acc:.4f}")
    if test.items:
        print(f"test accuracy: {accuracy(model, test):.4f}")
    _write_manifest(
        Path(args.model_out).with_suffix(Path(args.model_out).suffix + ".manifest.json"),
        "train",
        {"data": args.data, "epochs": args.epochs,
         "learning_rate": args.learning_rate, "l2": args.l2, "seed": args.seed,
         "split_seed": args.split_seed, "per_class_test": args.per_class_test,
         "model_out": args.model_out},
        [args.model_out], model.descriptor,
    )
    return 0


def cmd_attack(args) -> int:
    if args.list_kinds:
        for kind in KINDS:
            print(f"{kind}: {KIND_SUMMARIES[kind]}")
        return 0
    for flag in ("kind", "data", "out"):
        if getattr(args, flag) is None:
            raise UsageError(f"--{flag} is required")
    kind = _canonical_kind(args.kind)
    if (args.model is None) == (args.oracle is None):
        raise UsageError("pass exactly one of --model or --oracle")
    if kind == "FGSM" and args.model is None:
        raise UsageError("FGSM is white-box: it requires --model")
    band = _parse_band(args.band) if args.band else None
    if band is not None and kind not in (*CHECKERBOARD_BANDS, "G"):
        raise UsageError(f"--band applies to checkerboard kinds, not {kind}")
    grid_kwargs = {}
    if args.fgsm_grid:
        try:
            grid_kwargs["fgsm_epsilon_grid"] = tuple(
                float(v) for v in args.fgsm_grid.split(",")
            )
        except ValueError as err:
            raise UsageError(f"bad --fgsm-grid: {err}") from err

    if args.model is not None:
        oracle = load_model(args.model)
        close = lambda: None
    else:
        oracle = connect_external(args.oracle)
        close = oracle.close
    try:
        _, test = _load_split(args.data, args.per_class_test, args.split_seed)
        if (test.width, test.height) != (oracle.input_width, oracle.input_height):
            raise DatasetError(
                f"dataset is {test.width}x{test.height} but the oracle expects "
                f"{oracle.input_width}x{oracle.input_height}"
            )
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        outcomes, image_ids, artifacts = [], [], []
        for index, item in enumerate(test.items):
            image_id = f"{test.class_names[item.label]}_{item.source_name}"
            try:
                cfg = AttackConfig(
                    kind=kind,
                    seed=derive_seed(args.seed, index),
                    cell_side=args.cell_side,
                    magnitude_lo=band[0] if band else None,
                    magnitude_hi=band[1] if band else None,
                    escalation_step=args.step,
                    max_magnitude=args.max_magnitude,
                    **grid_kwargs,
                )
                outcome = run_attack(oracle, item.image, item.label, cfg)
            except ValueError as err:
                raise UsageError(f"image {image_id}: {err}") from err
            except FacefoolError as err:
                print(f"image {image_id}: {err}", file=sys.stderr)
                raise
            outcomes.append(outcome)
            image_ids.append(image_id)
            pgm_path = out / f"{image_id}_{kind}.pgm"
            pgm_path.write_bytes(save_pgm(outcome.perturbed))
            artifacts.append(str(pgm_path))
        report = build_report(kind, outcomes, image_ids, seed=args.seed,
                              oracle_descriptor=oracle.descriptor)
        csv_path = out / f"report_{kind}.csv"
        write_csv(report, csv_path)
        artifacts.append(str(csv_path))
        _write_manifest(
            out / "manifest.json", "attack",
            {"kind": kind, "data": args.data, "model": args.model,
             "oracle": args.oracle, "seed": args.seed,
             "split_seed": args.split_seed,
             "per_class_test": args.per_class_test,
             "cell_side": args.cell_side, "band": args.band,
             "fgsm_grid": args.fgsm_grid, "step": args.step,
             "max_magnitude": args.max_magnitude, "out": str(out)},
            artifacts, oracle.descriptor,
        )
        print(
            f"attack {kind}: mean confidence decrease "
            f"{report.mean_conf_decrease:.4f}, misclassification rate "
            f"{report.misclass_rate:.4f} over {len(test.items)} images"
        )
        print(f"queries used: {oracle.queries}")
        return 0
    finally:
        close()


def cmd_report(args) -> int:
    if not args.csvs:
        raise UsageError("pass at least one CSV file")
    if args.per_image and len(args.csvs) != 1:
        raise UsageError("--per-image works with exactly one CSV")
    try:
        reports = [read_csv(p) for p in args.csvs]
    except (OSError, ValueError) as err:
        raise DatasetError(str(err)) from err
    metric = METRICS[0] if args.metric == "conf" else METRICS[1]
    destination = render_bar_chart(reports, metric, args.out,
                                   per_image=args.per_image)
    _write_manifest(
        Path(str(destination) + ".manifest.json"), "report",
        {"csvs": list(args.csvs), "metric": args.metric,
         "per_image": args.per_image, "out": str(destination)},
        [str(destination)], "none",
    )
    print(f"wrote {destination}")
    return 0


def cmd_serve(args) -> int:
    model = load_model(args.model)
    if args.stdio:
        serve_stdio(model)
        return 0
    if not args.listen:
        raise UsageError("pass --listen host:port or --stdio")
    host, sep, port = args.listen.rpartition(":")
    if not sep or not port.isdigit():
        raise UsageError(f"--listen wants host:port, got {args.listen!r}")
    server = OracleTCPServer((host, int(port)), model)
    bound = server.bound_address
    print(f"listening on {bound[0]}:{bound[1]}", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return 0


_COMMANDS = {
    "synth": cmd_synth,
    "train": cmd_train,
    "attack": cmd_attack,
    "report": cmd_report,
    "serve-oracle": cmd_serve,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("no command given (see --help)")
        return _COMMANDS[args.command](args)
    except UsageError as err:
        print(f"usage error: {err}", file=sys.stderr)
        return 1
    except (DatasetError, ModelError, PgmError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except OracleError as err:
        print(f"oracle error: {err}", file=sys.stderr)
        return 3


def console_entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    console_entry()
