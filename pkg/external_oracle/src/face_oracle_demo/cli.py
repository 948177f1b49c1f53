"""Command line for the demo oracle.

    face-oracle-demo train --data DIR --out model.pt [--epochs N --seed S]
    face-oracle-demo serve --model model.pt (--listen H:P | --stdio)
    face-oracle-demo serve --demo-seed S --width W --height H --classes C ...

`serve` speaks the face-oracle/1 protocol on the chosen transport until
terminated. The demo-seed form serves a deterministic untrained network,
which is enough for protocol conformance checks.
"""

from __future__ import annotations

import argparse
import sys

from .model import demo_model, load_model, save_model, train_model
from .server import serve_stdio, serve_tcp


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="face-oracle-demo",
                                     description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="fit the demo net on a PGM class tree")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--learning-rate", type=float, default=1e-2)

    p = sub.add_parser("serve", help="speak face-oracle/1 on stdio or TCP")
    p.add_argument("--model", help="checkpoint from `train`")
    p.add_argument("--demo-seed", type=int,
                   help="serve a deterministic untrained net instead")
    p.add_argument("--width", type=int, default=56)
    p.add_argument("--height", type=int, default=64)
    p.add_argument("--classes", type=int, default=8)
    p.add_argument("--listen", help="host:port (port 0 picks one)")
    p.add_argument("--stdio", action="store_true")
    return parser


def cmd_train(args) -> int:
    model, checkpoint = train_model(args.data, epochs=args.epochs,
                                    seed=args.seed,
                                    learning_rate=args.learning_rate)
    save_model(checkpoint, args.out)
    print(f"saved {args.out}: {model.num_classes} classes, "
          f"{model.width}x{model.height}, "
          f"train accuracy {checkpoint['train_accuracy']:.4f}")
    return 0


def cmd_serve(args) -> int:
    if (args.model is None) == (args.demo_seed is None):
        print("pass exactly one of --model or --demo-seed", file=sys.stderr)
        return 1
    if args.model is not None:
        model = load_model(args.model)
    else:
        model = demo_model(args.width, args.height, args.classes,
                           seed=args.demo_seed)
    if args.stdio:
        serve_stdio(model)
        return 0
    if not args.listen:
        print("pass --listen host:port or --stdio", file=sys.stderr)
        return 1
    host, sep, port = args.listen.rpartition(":")
    if not sep or not port.isdigit():
        print(f"--listen wants host:port, got {args.listen!r}", file=sys.stderr)
        return 1
    serve_tcp(model, host, int(port))
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "train":
        return cmd_train(args)
    return cmd_serve(args)


def console_entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    console_entry()
