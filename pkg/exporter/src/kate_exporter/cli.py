"""Exporter command line: batch export and the serve endpoint."""

from __future__ import annotations

import argparse
import json
import sys

from .encoder import EncoderSpec, ExporterError


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kate-export",
        description="Produce embedding store files from pre-trained sentence "
        "encoders, or serve embeddings over HTTP.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_encoder_flags(p):
        p.add_argument(
            "--checkpoint", required=True, help="hub name or local model path"
        )
        p.add_argument("--pooling", choices=["cls", "mean"], default="cls")
        p.add_argument("--normalize", action="store_true")

    p = sub.add_parser("export", help="encode a record file into a store file")
    add_encoder_flags(p)
    p.add_argument("--records", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--batch-size", type=int, default=32, dest="batch_size")

    p = sub.add_parser("serve", help="start the embedding HTTP endpoint")
    add_encoder_flags(p)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8500)
    p.add_argument("--batch-size", type=int, default=32, dest="batch_size")

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    spec = EncoderSpec(
        checkpoint=args.checkpoint,
        pooling=args.pooling,
        normalize=args.normalize,
    )
    try:
        if args.command == "export":
            from .export import export

            stats = export(
                args.records, spec, args.out, batch_size=args.batch_size
            )
            print(json.dumps(stats, indent=2))
            return 0

        import uvicorn

        from .serve import create_app

        uvicorn.run(
            create_app(spec, batch_size=args.batch_size),
            host=args.host,
            port=args.port,
        )
        return 0
    except ExporterError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
