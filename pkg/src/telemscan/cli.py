"""Operator command line: a thin client over the HTTP service.

Every verb issues a request against a telemscan service. With --server the
request goes over the network; without it an in-process instance of the
service handles the request through the same HTTP layer, so behavior and
validation are identical either way.

Exit codes: 0 success, 1 data/processing error, 2 usage error.
"""

from __future__ import annotations

import argparse
import asyncio
import json
import sys

import httpx

EXIT_OK = 0
EXIT_DATA = 1
EXIT_USAGE = 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="telemscan",
        description="Residual-based telemetry anomaly detection",
    )
    parser.add_argument("--server", default=None,
                        help="service base URL; defaults to an in-process service")
    sub = parser.add_subparsers(dest="verb", required=True)

    detect = sub.add_parser("detect", help="run detection over a channel data root")
    detect.add_argument("--config", default=None, help="TOML config file")
    detect.add_argument("--data", required=True, help="directory of channel CSVs")
    detect.add_argument("--predictions", default=None,
                        help="directory of prediction CSVs matching channel file names")
    detect.add_argument("--out", required=True, help="results file to write")
    detect.add_argument("--method", default=None,
                        choices=["nonparametric", "gaussian_tail"])
    detect.add_argument("--p", type=float, default=None,
                        help="minimum percent decrease for pruning")
    detect.add_argument("--z-min", type=float, default=None)
    detect.add_argument("--z-max", type=float, default=None)
    detect.add_argument("--z-step", type=float, default=None)
    detect.add_argument("--epsilon-norm", type=float, default=None)
    detect.add_argument("--h", type=int, default=None,
                        help="historical smoothed errors per evaluation window")
    detect.add_argument("--batch-size", type=int, default=None)
    detect.add_argument("--buffer", type=int, default=None,
                        help="expansion buffer in steps")
    detect.add_argument("--set", dest="extra", action="append", default=[],
                        metavar="KEY=VALUE", help="override any other config key")

    evaluate = sub.add_parser("evaluate", help="score results against labels")
    evaluate.add_argument("--results", required=True)
    evaluate.add_argument("--labels", required=True)
    evaluate.add_argument("--beta", type=float, default=0.5)

    compare = sub.add_parser("compare", help="compare methods on shared labels")
    compare.add_argument("--results", action="append", required=True,
                         help="results file (give two or more)")
    compare.add_argument("--labels", required=True)
    compare.add_argument("--beta", type=float, default=0.5)
    compare.add_argument("--out-csv", default=None, help="also write rows as CSV")

    label = sub.add_parser("label", help="record a tp/fp verdict for a sequence")
    label.add_argument("--results", required=True)
    label.add_argument("--feedback", required=True,
                       help="feedback CSV consumed by the s_min learner")
    label.add_argument("--channel", required=True)
    label.add_argument("--start", type=int, required=True)
    label.add_argument("--end", type=int, required=True)
    label.add_argument("--verdict", required=True, choices=["tp", "fp"])

    inspect = sub.add_parser("inspect", help="dump per-batch diagnostics for a channel")
    inspect.add_argument("--results", required=True)
    inspect.add_argument("--channel", required=True)

    serve = sub.add_parser("serve", help="run the HTTP service")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8764)

    return parser


_FLAG_KEYS = {
    "method": "method",
    "p": "p",
    "z_min": "z_min",
    "z_max": "z_max",
    "z_step": "z_step",
    "epsilon_norm": "epsilon_norm",
    "h": "h",
    "batch_size": "batch_size",
    "buffer": "expansion_buffer",
}


def _detect_overrides(args) -> dict:
    overrides: dict = {}
    for attr, key in _FLAG_KEYS.items():
        value = getattr(args, attr)
        if value is not None:
            overrides[key] = value
    for item in args.extra:
        if "=" not in item:
            raise ValueError(f"--set expects KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        overrides[key] = value
    return overrides


async def _request(args, method: str, path: str, payload: dict | None = None,
                   params: dict | None = None) -> httpx.Response:
    if args.server:
        async with httpx.AsyncClient(base_url=args.server, timeout=600.0) as client:
            return await client.request(method, path, json=payload, params=params)
    from .service.app import create_app

    transport = httpx.ASGITransport(app=create_app())
    async with httpx.AsyncClient(transport=transport, timeout=600.0,
                                 base_url="http://telemscan.internal") as client:
        return await client.request(method, path, json=payload, params=params)


def _fail(response: httpx.Response) -> int:
    detail = {}
    try:
        detail = response.json().get("detail", {})
    except json.JSONDecodeError:
        pass
    if isinstance(detail, dict) and detail:
        print(f"error [{detail.get('code', response.status_code)}]: "
              f"{detail.get('message', response.text)}", file=sys.stderr)
    else:
        print(f"error: HTTP {response.status_code}: {response.text}", file=sys.stderr)
    return EXIT_USAGE if response.status_code == 422 else EXIT_DATA


def _cmd_detect(args) -> int:
    try:
        overrides = _detect_overrides(args)
    except ValueError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    payload = {
        "data_dir": args.data,
        "out_path": args.out,
        "config_path": args.config,
        "predictions_dir": args.predictions,
        "overrides": overrides,
    }
    response = asyncio.run(_request(args, "POST", "/detect", payload))
    if response.status_code != 200:
        return _fail(response)
    body = response.json()
    print(f"wrote {body['out_path']} ({len(body['channels'])} channels, "
          f"method={body['method']}, config={body['config_hash']})")
    if body["aborted"]:
        for abort in body["aborted"]:
            print(f"aborted {abort['channel_id']}: [{abort['code']}] "
                  f"{abort['message']}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


def _cmd_evaluate(args) -> int:
    payload = {"results_path": args.results, "labels_path": args.labels,
               "beta": args.beta}
    response = asyncio.run(_request(args, "POST", "/evaluate", payload))
    if response.status_code != 200:
        return _fail(response)
    print(response.json()["table"])
    return EXIT_OK


def _cmd_compare(args) -> int:
    if len(args.results) < 2:
        print("usage error: compare needs two or more --results files", file=sys.stderr)
        return EXIT_USAGE
    payload = {"results_paths": args.results, "labels_path": args.labels,
               "beta": args.beta}
    response = asyncio.run(_request(args, "POST", "/compare", payload))
    if response.status_code != 200:
        return _fail(response)
    body = response.json()
    print(body["table"])
    if args.out_csv:
        with open(args.out_csv, "w", encoding="utf-8") as fh:
            fh.write(body["csv"])
    return EXIT_OK


def _cmd_label(args) -> int:
    payload = {
        "results_path": args.results,
        "feedback_path": args.feedback,
        "channel_id": args.channel,
        "start": args.start,
        "end": args.end,
        "verdict": args.verdict,
    }
    response = asyncio.run(_request(args, "POST", "/label", payload))
    if response.status_code != 200:
        return _fail(response)
    body = response.json()
    if body.get("warning"):
        print(f"warning: {body['warning']}", file=sys.stderr)
    print(f"recorded {args.verdict} for ({args.channel}, {args.start}..{args.end}), "
          f"score={body['score']:.6g}")
    return EXIT_OK


def _cmd_inspect(args) -> int:
    params = {"results_path": args.results, "channel_id": args.channel}
    response = asyncio.run(_request(args, "GET", "/inspect", params=params))
    if response.status_code != 200:
        return _fail(response)
    body = response.json()
    print(f"channel {body['channel_id']} method={body['method']} "
          f"config={body['config_hash']}")
    for diag in body["diagnostics"]:
        flags = "warm-up" if diag["warm_up"] else (
            "degenerate" if diag["degenerate"] else "")
        eps = "-" if diag["epsilon"] is None else f"{diag['epsilon']:.6g}"
        z = "-" if diag["z"] is None else f"{diag['z']:.2f}"
        obj = "-" if diag["objective"] is None else f"{diag['objective']:.6g}"
        print(f"  batch {diag['batch']:>4} [{diag['start']}..{diag['end']}] "
              f"eps={eps} z={z} objective={obj} "
              f"n_anomalous={diag['n_anomalous']} {flags}")
    return EXIT_OK


def _cmd_serve(args) -> int:
    import uvicorn

    uvicorn.run("telemscan.service.app:app", host=args.host, port=args.port)
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "detect": _cmd_detect,
        "evaluate": _cmd_evaluate,
        "compare": _cmd_compare,
        "label": _cmd_label,
        "inspect": _cmd_inspect,
        "serve": _cmd_serve,
    }
    try:
        return handlers[args.verb](args)
    except httpx.HTTPError as exc:
        print(f"error: cannot reach service: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
