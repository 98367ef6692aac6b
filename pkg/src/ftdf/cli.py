"""Command-line client for the recognition service.

Subcommands (synth, extract, fuse, train, eval, sweep, predict) post to the
HTTP service; without --server the app runs in-process over an ASGI
transport, so no daemon is needed for local work. `serve` hosts the service
with uvicorn. Settings come from an optional flat key=value --config file;
explicit flags win. Exit codes: 0 success, 2 config error, 3 data error,
4 model error, 1 anything else.
"""

from __future__ import annotations

import argparse
import json
import sys

import httpx

from .config import parse_config_file
from .errors import FtdfError, InvalidSpec
from .service import create_app

_EXIT_BY_FAMILY = {"config": 2, "data": 3, "model": 4}

# keys a subcommand forwards from --config / flags to its endpoint
_COMMON = (
    "window_len", "overlap", "scheme", "pair_a", "pair_b", "lags", "include_raw",
    "sscf_threshold", "ar_order", "rms_literal", "classifier", "n_trees",
    "max_splits", "min_leaf", "knn_k", "knn_metric", "knn_weighting",
    "test_fraction", "folds", "seed", "threads", "out",
)
_ENDPOINT_KEYS = {
    "synth": ("out", "classes", "traces_per_class", "duration_s", "fs", "seed", "noise_scale"),
    "extract": _COMMON + ("manifest", "descriptors", "force"),
    "fuse": _COMMON + ("manifest",),
    "train": _COMMON + ("manifest",),
    "eval": _COMMON + ("manifest", "model", "matrix", "protocol"),
    "sweep": _COMMON + ("manifest", "lengths"),
    "predict": ("model", "trace", "fs"),
}

_LIST_KEYS = {"pair_a", "pair_b", "classes", "descriptors"}
_INT_LIST_KEYS = {"lags", "lengths"}
_BOOL_KEYS = {"include_raw", "rms_literal", "force"}


def _add_common(p):
    p.add_argument("--config", help="flat key=value configuration file")
    p.add_argument("--server", help="base URL of a running service (default: in-process)")
    p.add_argument("--out", help="output directory")
    p.add_argument("--seed", type=int)
    p.add_argument("--threads", type=int)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="ftdf",
        description="appliance recognition from power traces: synthesize, extract, fuse, train, evaluate, sweep",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic labeled dataset + manifest")
    _add_common(p)
    p.add_argument("--classes", help="comma-separated class names")
    p.add_argument("--traces-per-class", dest="traces_per_class", type=int)
    p.add_argument("--duration", dest="duration_s", type=float, help="trace duration in seconds")
    p.add_argument("--fs", type=float, help="sampling rate in Hz")
    p.add_argument("--noise-scale", dest="noise_scale", type=float)

    p = sub.add_parser("extract", help="write per-(trace, descriptor) feature series files")
    _add_common(p)
    p.add_argument("--manifest", help="dataset manifest path")
    p.add_argument("--window-len", dest="window_len", type=int)
    p.add_argument("--overlap", type=float)
    p.add_argument("--descriptors", help="comma-separated descriptor subset")
    p.add_argument("--force", action="store_const", const=True, help="rewrite existing outputs")

    for name, help_text in (
        ("fuse", "export fused train/test matrices"),
        ("train", "train a classifier and save the model file"),
    ):
        p = sub.add_parser(name, help=help_text)
        _add_common(p)
        p.add_argument("--manifest")
        p.add_argument("--window-len", dest="window_len", type=int)
        p.add_argument("--overlap", type=float)
        p.add_argument("--scheme")
        p.add_argument("--lags")
        p.add_argument("--test-fraction", dest="test_fraction", type=float)
        if name == "train":
            p.add_argument("--classifier", choices=("ebt", "tree"))
            p.add_argument("--n-trees", dest="n_trees", type=int)
            p.add_argument("--max-splits", dest="max_splits", type=int)

    p = sub.add_parser("eval", help="evaluate a saved model, a matrix file, or run cross-validation")
    _add_common(p)
    p.add_argument("--manifest")
    p.add_argument("--model", help="FTDF01 model file")
    p.add_argument("--matrix", help="exported matrix file to score instead of raw traces")
    p.add_argument("--protocol", choices=("holdout", "cv"))
    p.add_argument("--folds", type=int)
    p.add_argument("--window-len", dest="window_len", type=int)
    p.add_argument("--scheme")
    p.add_argument("--classifier", choices=("ebt", "tree", "knn"))

    p = sub.add_parser("sweep", help="window-length sweep over every feature scheme")
    _add_common(p)
    p.add_argument("--manifest")
    p.add_argument("--lengths", help="comma-separated window lengths")
    p.add_argument("--classifier", choices=("ebt", "tree", "knn"))
    p.add_argument("--n-trees", dest="n_trees", type=int)
    p.add_argument("--max-splits", dest="max_splits", type=int)
    p.add_argument("--test-fraction", dest="test_fraction", type=float)

    p = sub.add_parser("predict", help="classify one trace file with a saved model")
    _add_common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--trace", required=True)
    p.add_argument("--fs", type=float)

    p = sub.add_parser("serve", help="host the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8321)

    return parser


def _coerce(key, value):
    if isinstance(value, str):
        if key in _LIST_KEYS:
            return [v.strip() for v in value.split(",") if v.strip()]
        if key in _INT_LIST_KEYS:
            return [int(v) for v in value.split(",") if v.strip()]
        if key in _BOOL_KEYS:
            return value.strip().lower() in ("1", "true", "yes", "on")
    return value


_ALL_KEYS = frozenset(k for keys in _ENDPOINT_KEYS.values() for k in keys)


def _request_body(args, command):
    mapping = {}
    if getattr(args, "config", None):
        file_mapping = parse_config_file(args.config)
        unknown = sorted(set(file_mapping) - _ALL_KEYS)
        if unknown:
            raise InvalidSpec(f"unknown configuration keys: {unknown}")
        mapping.update(file_mapping)
    for key, value in vars(args).items():
        if key in ("command", "config", "server") or value is None:
            continue
        mapping[key] = value
    body = {}
    for key in _ENDPOINT_KEYS[command]:
        if key in mapping:
            body[key] = _coerce(key, mapping[key])
    return body


class _InProcessTransport(httpx.BaseTransport):
    """Sync bridge to the ASGI app, so the client needs no running server."""

    def __init__(self, app):
        self._asgi = httpx.ASGITransport(app=app)

    def handle_request(self, request):
        import asyncio

        async def roundtrip():
            response = await self._asgi.handle_async_request(request)
            content = await response.aread()
            await response.aclose()
            return httpx.Response(
                status_code=response.status_code,
                headers=response.headers,
                content=content,
                request=request,
            )

        return asyncio.run(roundtrip())


def _client(args):
    server = getattr(args, "server", None)
    if server:
        return httpx.Client(base_url=server.rstrip("/"), timeout=600.0)
    return httpx.Client(
        transport=_InProcessTransport(create_app()),
        base_url="http://ftdf.internal",
        timeout=600.0,
    )


def _print_result(command, payload):
    if command == "predict":
        print(f"majority: {payload['majority']}")
        for k, p in zip(payload["windows"], payload["predictions"]):
            print(f"window {k}: {p}")
        return
    if command in ("train", "eval"):
        report = payload["report"]
        print(f"accuracy {report['accuracy']:.6f}  macro_f {report['macro_f']:.6f}")
        for key in ("model", "report_files"):
            if key in payload:
                print(f"{key}: {payload[key]}")
        return
    if command == "sweep":
        print(f"table: {payload['table']} ({len(payload['rows'])} rows)")
        return
    print(json.dumps(payload, indent=2, sort_keys=True))


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.command == "serve":
        import uvicorn

        uvicorn.run(create_app(), host=args.host, port=args.port)
        return 0
    try:
        body = _request_body(args, args.command)
    except (FtdfError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return getattr(exc, "exit_code", 2)
    try:
        with _client(args) as client:
            response = client.post(f"/{args.command}", json=body)
    except httpx.HTTPError as exc:
        print(f"error: cannot reach service: {exc}", file=sys.stderr)
        return 1
    if response.status_code >= 400:
        try:
            payload = response.json()
        except ValueError:
            payload = {}
        family = payload.get("family")
        detail = payload.get("detail", response.text)
        name = payload.get("error", f"HTTP {response.status_code}")
        print(f"error [{name}]: {detail}", file=sys.stderr)
        if family in _EXIT_BY_FAMILY:
            return _EXIT_BY_FAMILY[family]
        return 2 if response.status_code == 422 else 1
    _print_result(args.command, response.json())
    return 0


if __name__ == "__main__":
    sys.exit(main())
