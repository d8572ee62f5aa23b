"""Command-line front end: checkpoint export and the fine-tune demo."""

from __future__ import annotations

import argparse
import sys

from .errors import AdapterError
from .export import export_checkpoint
from .manifest import load_manifest
from .train import finetune_attack, pretrain

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_USAGE = 2


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tsealadapt",
        description="Bridge torch checkpoints to sealed tensor containers.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("export", help="convert a torch checkpoint to a container")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--manifest", required=True, help="export manifest (JSON)")
    p.add_argument("--out", required=True)

    p = sub.add_parser("pretrain", help="train the demo classifier from scratch")
    p.add_argument("--out", required=True)
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--lr", type=float, default=1e-4)

    p = sub.add_parser("finetune", help="resume training from a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--lr", type=float, required=True)
    p.add_argument("--epochs", type=int, required=True)
    p.add_argument("--out", required=True)
    return parser


def run(argv: list[str] | None = None) -> int:
    try:
        args = _build_parser().parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK

    try:
        if args.command == "export":
            export_checkpoint(args.checkpoint, load_manifest(args.manifest), args.out)
            print(f"exported {args.checkpoint} -> {args.out}")
        elif args.command == "pretrain":
            pretrain(args.out, epochs=args.epochs, lr=args.lr)
            print(f"pretrained checkpoint written to {args.out}")
        else:
            finetune_attack(args.checkpoint, args.lr, args.epochs, args.out)
            print(f"fine-tuned for {args.epochs} epoch(s) at lr {args.lr}: {args.out}")
    except AdapterError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    return EXIT_OK


def entrypoint() -> None:
    raise SystemExit(run())


if __name__ == "__main__":
    entrypoint()
