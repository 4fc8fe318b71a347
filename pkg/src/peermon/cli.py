"""Command-line interface.

``sim`` and ``sim-all`` are thin clients of the HTTP service: they post an
experiment request and write the CSV the service returns. By default the
service app is driven in-process (no socket); ``--server`` points them at a
running instance instead. ``follower`` and ``leader`` run real wall-clock
peers speaking the newline-delimited JSON protocol over TCP.

Exit codes: 0 on success, 2 on configuration errors.
"""

from __future__ import annotations

import argparse
import logging
import sys
import threading
from typing import Optional

import httpx

from .core import ConfigError
from .rules import RuleError, parse_rules

logger = logging.getLogger(__name__)

_EXIT_CONFIG = 2


def _post(server: Optional[str], path: str, payload: dict) -> dict:
    """POST to a running service, or drive the ASGI app in-process."""
    if server:
        with httpx.Client(base_url=server, timeout=600.0) as client:
            response = client.post(path, json=payload)
    else:
        import asyncio

        from .service.app import app

        async def call() -> httpx.Response:
            transport = httpx.ASGITransport(app=app)
            async with httpx.AsyncClient(
                transport=transport, base_url="http://peermon.internal", timeout=None
            ) as client:
                return await client.post(path, json=payload)

        response = asyncio.run(call())
    if response.status_code != 200:
        try:
            detail = response.json().get("detail", response.text)
        except ValueError:
            detail = response.text
        raise ConfigError(f"{path} failed ({response.status_code}): {detail}")
    return response.json()


def _sensitivity_payload(text: Optional[str], payload: dict) -> None:
    if text is None:
        return
    if text.lower() in ("none", "off"):
        payload["sensitivity"] = None
    else:
        try:
            payload["sensitivity"] = float(text)
        except ValueError:
            raise ConfigError(f"invalid sensitivity '{text}'") from None


def _cmd_sim(args: argparse.Namespace) -> int:
    payload = {
        "scenario": args.scenario,
        "mode": args.mode,
        "seed": args.seed,
        "preset": args.preset,
        "include_traces": args.trace is not None,
    }
    if args.rules:
        with open(args.rules, "r", encoding="utf-8") as handle:
            payload["rules_text"] = handle.read()
    _sensitivity_payload(args.sensitivity, payload)
    body = _post(args.server, "/experiments", payload)
    with open(args.out, "w", encoding="utf-8", newline="") as handle:
        handle.write(body["csv"])
    if args.trace is not None:
        import os

        os.makedirs(args.trace, exist_ok=True)
        trace_path = os.path.join(
            args.trace, f"{args.scenario}_{args.mode}_{args.seed}.csv"
        )
        with open(trace_path, "w", encoding="utf-8", newline="") as handle:
            handle.write(body["trace_csv"])
    spike = body["spike_pct"]
    print(
        f"{args.scenario}/{args.mode} seed={args.seed}: "
        f"rmse_follower={body['rmse_follower']:.6f} "
        f"rmse_leader={body['rmse_leader']:.6f} "
        f"msgs_per_sec={body['msgs_per_sec']:.6f}"
        + (f" spike_pct={spike:.2f}" if spike is not None else "")
    )
    return 0


def _cmd_sim_all(args: argparse.Namespace) -> int:
    payload = {"seeds": args.seeds, "preset": args.preset}
    if args.scenarios:
        payload["scenarios"] = args.scenarios.split(",")
    _sensitivity_payload(args.sensitivity, payload)
    body = _post(args.server, "/experiments/matrix", payload)
    with open(args.out, "w", encoding="utf-8", newline="") as handle:
        handle.write(body["csv"])
    print(f"wrote {len(body['results'])} runs to {args.out}")
    return 0


def _cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service.app import app

    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


def _cmd_follower(args: argparse.Namespace) -> int:
    from .config import load_peer_setup
    from .net import FollowerRunner

    setup = load_peer_setup(args.config)
    rules = None
    if args.rules:
        with open(args.rules, "r", encoding="utf-8") as handle:
            rules = parse_rules(handle.read())
    runner = FollowerRunner(
        leader=args.leader,
        setup=setup,
        rules=rules,
        node_id=args.node,
        adaptive=not args.static,
    )
    stop = threading.Event()
    try:
        runner.run(duration=args.duration, stop_event=stop)
    except KeyboardInterrupt:
        stop.set()
    except OSError as exc:
        print(f"cannot reach leader {args.leader}: {exc}", file=sys.stderr)
        return 1
    return 0


def _cmd_leader(args: argparse.Namespace) -> int:
    from .net import LeaderServer

    peers = args.peers.split(",") if args.peers else []
    server = LeaderServer(
        listen=args.listen,
        peers=peers,
        node_id=args.node,
        gossip_period=args.period,
        fanout=args.fanout,
    )
    server.start()
    print(f"leader listening on {server.host}:{server.port}")
    try:
        stop = threading.Event()
        if args.duration is not None:
            stop.wait(args.duration)
        else:
            while not stop.wait(3600):
                pass
    except KeyboardInterrupt:
        pass
    finally:
        server.stop()
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="peermon",
        description="Self-adaptive peer-to-peer monitoring toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    serve = sub.add_parser("serve", help="run the HTTP service")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)
    serve.set_defaults(fn=_cmd_serve)

    sim = sub.add_parser("sim", help="run one scenario experiment")
    sim.add_argument("--scenario", required=True)
    sim.add_argument("--mode", choices=("adaptive", "static"), required=True)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--preset", default="rq1", help="rq1 or default")
    sim.add_argument("--rules", help="rule file overriding the preset rules")
    sim.add_argument("--sensitivity", help="override (number, or 'none' to disable)")
    sim.add_argument("--out", required=True, help="results CSV path")
    sim.add_argument("--trace", help="directory for the per-second trace CSV")
    sim.add_argument("--server", help="URL of a running service (default: in-process)")
    sim.set_defaults(fn=_cmd_sim)

    sim_all = sub.add_parser("sim-all", help="run the scenario x mode matrix")
    sim_all.add_argument("--seeds", type=int, required=True)
    sim_all.add_argument("--preset", default="rq1")
    sim_all.add_argument("--scenarios", help="comma-separated subset")
    sim_all.add_argument("--sensitivity")
    sim_all.add_argument("--out", required=True)
    sim_all.add_argument("--server")
    sim_all.set_defaults(fn=_cmd_sim_all)

    follower = sub.add_parser("follower", help="run a wall-clock follower peer")
    follower.add_argument("--leader", required=True, metavar="HOST:PORT")
    follower.add_argument("--config", required=True, help="peer configuration JSON")
    follower.add_argument("--rules", help="adaptation rule file")
    follower.add_argument("--static", action="store_true", help="disable adaptation")
    follower.add_argument("--node", default="follower")
    follower.add_argument("--duration", type=float, help="stop after N seconds")
    follower.set_defaults(fn=_cmd_follower)

    leader = sub.add_parser("leader", help="run a wall-clock leader peer")
    leader.add_argument("--listen", required=True, metavar="HOST:PORT")
    leader.add_argument("--peers", help="comma-separated leader addresses")
    leader.add_argument("--node", default=None)
    leader.add_argument("--period", type=float, default=30.0, help="gossip period")
    leader.add_argument("--fanout", type=int, default=2)
    leader.add_argument("--duration", type=float, help="stop after N seconds")
    leader.set_defaults(fn=_cmd_leader)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, RuleError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _EXIT_CONFIG
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
