"""Command-line client for the service.

Subcommands mirror the service endpoints. Without --server the requests run
against an in-process app over an ASGI transport, so single-shot commands
need no running daemon; with --server they go over the wire to a deployed
instance. ``kate serve`` starts that instance.

Exit codes: 0 success, 1 validation error, 2 backend failure.
"""

from __future__ import annotations

import argparse
import asyncio
import json
import sys

import httpx


def _request(server: str | None, path: str, payload: dict) -> httpx.Response:
    if server:
        with httpx.Client(base_url=server, timeout=None) as client:
            return client.post(path, json=payload)

    from .service import create_app

    async def go() -> httpx.Response:
        transport = httpx.ASGITransport(app=create_app())
        async with httpx.AsyncClient(
            transport=transport, base_url="http://kate.internal", timeout=None
        ) as client:
            return await client.post(path, json=payload)

    return asyncio.run(go())


def _finish(resp: httpx.Response, render=None) -> int:
    if resp.status_code == 200:
        body = resp.json()
        if render is not None:
            render(body)
        else:
            print(json.dumps(body, indent=2, sort_keys=True))
        return 0
    try:
        detail = resp.json().get("detail", resp.text)
    except json.JSONDecodeError:
        detail = resp.text
    print(f"error: {detail}", file=sys.stderr)
    if resp.status_code == 502:
        return 2
    return 1


def _parse_inline_json(text: str, flag: str) -> dict:
    from .errors import DataError

    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise DataError(f"{flag} must be valid JSON: {exc.msg}") from None


def _config_payload(args: argparse.Namespace) -> dict:
    """Merge --config file with CLI overrides; CLI wins."""
    from .harness import load_config

    overrides = {
        "train_records": args.train_records,
        "eval_records": args.eval_records,
        "train_embeddings": args.train_embeddings,
        "eval_embeddings": args.eval_embeddings,
        "method": args.method,
        "metric": args.metric,
        "k": args.k,
        "order": args.order,
        "trials": args.trials,
        "master_seed": args.master_seed,
        "template": args.template,
        "task": args.task,
        "budget": args.budget,
        "counter": args.counter,
        "max_tokens": args.max_tokens,
        "eval_limit": args.eval_limit,
        "study_size": getattr(args, "study_size", None),
    }
    if getattr(args, "backend", None):
        overrides["backend"] = _parse_inline_json(args.backend, "--backend")
    if getattr(args, "sweep", None):
        overrides["sweep"] = _parse_inline_json(args.sweep, "--sweep")
    config = load_config(args.config, overrides)
    from dataclasses import asdict

    return asdict(config)


def _add_config_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file; CLI flags override it")
    p.add_argument("--train-records")
    p.add_argument("--eval-records")
    p.add_argument("--train-embeddings")
    p.add_argument("--eval-embeddings")
    p.add_argument("--method", choices=["kate", "random", "knn"])
    p.add_argument("--metric", choices=["neg_euclidean", "cosine"])
    p.add_argument("--k", type=int)
    p.add_argument("--order", help="default | reverse | shuffle:SEED")
    p.add_argument("--trials", type=int)
    p.add_argument("--master-seed", type=int, dest="master_seed")
    p.add_argument("--template", help="template JSON path")
    p.add_argument("--task", choices=["sentiment", "table2text", "qa"])
    p.add_argument("--budget", type=int)
    p.add_argument("--counter", help="whitespace | bpe:<vocab path>")
    p.add_argument("--max-tokens", type=int, dest="max_tokens")
    p.add_argument("--eval-limit", type=int, dest="eval_limit")
    p.add_argument("--backend", help="backend spec as inline JSON")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kate",
        description="Retrieve semantically similar in-context examples and "
        "run few-shot experiments against a completion backend.",
    )
    parser.add_argument(
        "--server",
        help="base URL of a running service; defaults to in-process execution",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="validate records and embeddings")
    p.add_argument("--records", required=True)
    p.add_argument("--embeddings")

    p = sub.add_parser("retrieve", help="query neighbors from a store")
    p.add_argument("--store", required=True)
    p.add_argument("--records", help="record file to validate alignment against")
    p.add_argument("--query-id", dest="query_id")
    p.add_argument("--query-text", dest="query_text")
    p.add_argument("--k", type=int, default=10)
    p.add_argument(
        "--metric", choices=["neg_euclidean", "cosine"], default="neg_euclidean"
    )
    p.add_argument("--order", default="default")
    p.add_argument("--farthest", action="store_true")
    p.add_argument(
        "--exporter-url",
        dest="exporter_url",
        help="embedding endpoint used to encode --query-text",
    )

    p = sub.add_parser("run", help="run one experiment")
    _add_config_options(p)
    p.add_argument("--output-dir", dest="output_dir")

    p = sub.add_parser("sweep", help="run an ablation sweep")
    _add_config_options(p)
    p.add_argument("--sweep", help='e.g. {"k_values": [5, 64]}')
    p.add_argument("--output-dir", dest="output_dir", required=True)

    p = sub.add_parser(
        "study-distance", help="closest vs farthest neighbor comparison"
    )
    _add_config_options(p)
    p.add_argument("--study-size", type=int, dest="study_size")
    p.add_argument("--output-dir", dest="output_dir")

    p = sub.add_parser("report", help="recompute metrics from a stored report")
    p.add_argument("--report-dir", dest="report_dir", required=True)

    p = sub.add_parser("serve", help="start the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8400)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    from .errors import BackendError, DataError

    try:
        return _dispatch(args)
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except BackendError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def _dispatch(args: argparse.Namespace) -> int:
    if args.command == "serve":
        import uvicorn

        from .service import create_app

        uvicorn.run(create_app(), host=args.host, port=args.port)
        return 0

    if args.command == "ingest":
        return _finish(
            _request(
                args.server,
                "/ingest",
                {"records": args.records, "embeddings": args.embeddings},
            )
        )

    if args.command == "retrieve":
        payload = {
            "store": args.store,
            "records": args.records,
            "query_id": args.query_id,
            "query_text": args.query_text,
            "k": args.k,
            "metric": args.metric,
            "order": args.order,
            "farthest": args.farthest,
            "exporter_url": args.exporter_url,
        }

        def show(body: dict) -> None:
            for n in body["neighbors"]:
                print(f"{n['index']}\t{n['id']}\t{n['score']:.6f}")

        return _finish(_request(args.server, "/retrieve", payload), show)

    if args.command == "run":
        payload = {"config": _config_payload(args), "output_dir": args.output_dir}
        return _finish(_request(args.server, "/run", payload))

    if args.command == "sweep":
        payload = {"config": _config_payload(args), "output_dir": args.output_dir}
        return _finish(_request(args.server, "/sweep", payload))

    if args.command == "study-distance":
        payload = {"config": _config_payload(args), "output_dir": args.output_dir}
        return _finish(_request(args.server, "/study-distance", payload))

    if args.command == "report":
        return _finish(
            _request(args.server, "/report", {"report_dir": args.report_dir})
        )

    raise AssertionError(f"unhandled command {args.command}")


if __name__ == "__main__":
    sys.exit(main())
