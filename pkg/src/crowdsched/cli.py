"""Command-line client for the crowdsched service.

Subcommands POST to the service endpoints and write the returned CSV to
files. By default the service runs in-process (no server needed); pass
``--server URL`` to target a running instance. ``CROWDSCHED_SEED`` and
``CROWDSCHED_OUT`` override the seed and output directory.

Diagnostics go to stderr; data only ever goes to files.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path
from typing import Optional

import httpx

from .errors import ConfigError
from .sim import NOTIFY_METHODS, POLICIES, SimConfig


def parse_config(path: Optional[str]) -> dict:
    """Load and validate a simulation config document.

    A missing ``--config`` means all defaults. ``archetypes_file`` is a CLI
    convenience: the referenced CSV (relative to the config file) is inlined
    as ``archetypes_csv`` before validation, so remote servers never need
    local paths.
    """
    if path is None:
        raw: dict = {}
    else:
        config_path = Path(path)
        if not config_path.exists():
            raise ConfigError("config", f"no such file: {path}")
        try:
            raw = json.loads(config_path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError("config", f"malformed JSON: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError("config", "top level must be an object")
        if "archetypes_file" in raw:
            archetype_path = config_path.parent / raw.pop("archetypes_file")
            if not archetype_path.exists():
                raise ConfigError("archetypes_file", f"no such file: {archetype_path}")
            raw["archetypes_csv"] = archetype_path.read_text()
    env_seed = os.environ.get("CROWDSCHED_SEED")
    if env_seed is not None:
        try:
            raw["seed"] = int(env_seed)
        except ValueError as exc:
            raise ConfigError("CROWDSCHED_SEED", f"not an integer: {env_seed!r}") from exc
    SimConfig.from_dict(raw)  # fail fast before any request goes out
    return raw


def _client(server: Optional[str]) -> httpx.Client:
    if server:
        return httpx.Client(base_url=server, timeout=None)
    # in-process mode: drive the ASGI app directly over a blocking portal
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        from starlette.testclient import TestClient

    from .service import app  # deferred so plain CLI errors never need fastapi

    return TestClient(app)


def _post(client: httpx.Client, endpoint: str, payload: dict) -> dict:
    response = client.post(endpoint, json=payload)
    if response.status_code != 200:
        try:
            detail = response.json().get("detail", response.text)
        except ValueError:
            detail = response.text
        raise ConfigError("request", f"{endpoint} failed: {detail}")
    return response.json()


def _out_dir(path: str) -> Path:
    out = Path(os.environ.get("CROWDSCHED_OUT", path))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write(out: Path, name: str, text: str) -> None:
    target = out / name
    target.write_text(text)
    print(f"wrote {target}", file=sys.stderr)


def _cmd_simulate(args: argparse.Namespace) -> int:
    payload = {"config": parse_config(args.config)}
    if args.seed is not None:
        payload["seed"] = args.seed
    with _client(args.server) as client:
        result = _post(client, "/simulate", payload)
    out = _out_dir(args.out)
    _write(out, "metrics.csv", result["metrics_csv"])
    _write(out, "trace.csv", result["trace_csv"])
    print(
        f"completed={result['completed']} open={result['open_tasks']} "
        f"max_latency={result['metrics']['max_latency']:.3f} "
        f"avg_accuracy={result['metrics']['avg_accuracy']:.6f}",
        file=sys.stderr,
    )
    return 0


def _cmd_sweep(args: argparse.Namespace) -> int:
    payload = {
        "config": parse_config(args.config),
        "param": args.param,
        "values": [v for v in args.values.split(",") if v],
        "seeds": [int(s) for s in args.seeds.split(",") if s],
    }
    if args.policies:
        payload["policies"] = [p for p in args.policies.split(",") if p]
    with _client(args.server) as client:
        result = _post(client, "/sweep", payload)
    out = _out_dir(args.out)
    _write(out, "sweep.csv", result["metrics_csv"])
    print(f"rows={result['rows']}", file=sys.stderr)
    return 0


def _cmd_notify_eval(args: argparse.Namespace) -> int:
    events_path, friends_path = Path(args.events), Path(args.friends)
    for label, path in (("events", events_path), ("friends", friends_path)):
        if not path.exists():
            raise ConfigError(label, f"no such file: {path}")
    payload = {
        "events_csv": events_path.read_text(),
        "friends_csv": friends_path.read_text(),
        "fractions": [float(f) for f in args.fraction.split(",") if f],
        "seed": args.seed if args.seed is not None else 0,
    }
    if args.methods:
        payload["methods"] = [m for m in args.methods.split(",") if m]
    with _client(args.server) as client:
        result = _post(client, "/notify-eval", payload)
    out = _out_dir(args.out)
    _write(out, "notify_eval.csv", result["csv"])
    return 0


def _cmd_calibrate(args: argparse.Namespace) -> int:
    qual_path = Path(args.qual)
    if not qual_path.exists():
        raise ConfigError("qual", f"no such file: {qual_path}")
    payload = {"qualification_csv": qual_path.read_text()}
    with _client(args.server) as client:
        result = _post(client, "/calibrate", payload)
    out = _out_dir(args.out)
    _write(out, "accuracies.csv", result["accuracies_csv"])
    _write(out, "difficulties.csv", result["difficulties_csv"])
    return 0


def _cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    uvicorn.run("crowdsched.service:app", host=args.host, port=args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="crowdsched",
        description="Crowdsourcing scheduling simulator and notification evaluator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    simulate = sub.add_parser("simulate", help="run one simulation")
    simulate.add_argument("--config", help="JSON config file (defaults apply if omitted)")
    simulate.add_argument("--out", default=".", help="output directory")
    simulate.add_argument("--seed", type=int, help="override the config seed")
    simulate.add_argument("--server", help="remote service URL (default: in-process)")
    simulate.set_defaults(func=_cmd_simulate)

    sweep = sub.add_parser("sweep", help="vary one parameter across policies and seeds")
    sweep.add_argument("--param", required=True, choices=["m", "n", "L", "q-range"])
    sweep.add_argument(
        "--values", required=True,
        help="comma-separated values (q-range values as lo:hi)",
    )
    sweep.add_argument("--config", help="base JSON config file")
    sweep.add_argument("--seeds", default="0,1,2", help="comma-separated seeds")
    sweep.add_argument(
        "--policies", help=f"comma-separated subset of {','.join(POLICIES)}"
    )
    sweep.add_argument("--out", default=".", help="output directory")
    sweep.add_argument("--server", help="remote service URL (default: in-process)")
    sweep.set_defaults(func=_cmd_sweep)

    notify = sub.add_parser("notify-eval", help="score availability predictors")
    notify.add_argument("--events", required=True, help="event-log CSV")
    notify.add_argument("--friends", required=True, help="friendship CSV")
    notify.add_argument(
        "--fraction", required=True,
        help="comma-separated prediction fractions, e.g. 0.05,0.1",
    )
    notify.add_argument("--methods", help=f"subset of {','.join(NOTIFY_METHODS)}")
    notify.add_argument("--seed", type=int, help="evaluation seed")
    notify.add_argument("--out", default=".", help="output directory")
    notify.add_argument("--server", help="remote service URL (default: in-process)")
    notify.set_defaults(func=_cmd_notify_eval)

    calibrate = sub.add_parser("calibrate", help="grade qualification tests")
    calibrate.add_argument("--qual", required=True, help="qualification CSV")
    calibrate.add_argument("--out", default=".", help="output directory")
    calibrate.add_argument("--server", help="remote service URL (default: in-process)")
    calibrate.set_defaults(func=_cmd_calibrate)

    serve = sub.add_parser("serve", help="run the HTTP service")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)
    serve.set_defaults(func=_cmd_serve)

    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
