"""Wall-clock TCP runtime for peers.

Same wire codec as the simulation, over real byte streams. A Leader listens
for Followers and other Leaders and runs its logic in one consumer thread
(socket readers only enqueue decoded messages, so peer state stays
single-threaded). A Follower dials its Leader and runs the probe loop against
the monotonic clock; timestamps are seconds since process start.
"""

from __future__ import annotations

import logging
import queue
import socket
import threading
import time
from random import Random
from typing import Dict, Mapping, Optional, Sequence, Tuple

from .config import PeerSetup
from .core import ConfigError
from .messages import (
    DecodeError,
    Gossip,
    LineSplitter,
    Message,
    decode_message,
    encode_message,
)
from .peer import FollowerNode, LeaderNode, ProbeFn
from .rules import RuleSet

logger = logging.getLogger(__name__)


def parse_hostport(text: str) -> Tuple[str, int]:
    host, sep, port = text.rpartition(":")
    if not sep or not host:
        raise ConfigError(f"expected HOST:PORT, got '{text}'")
    try:
        return host, int(port)
    except ValueError:
        raise ConfigError(f"invalid port in '{text}'") from None


def builtin_probes(names: Sequence[str]) -> Dict[str, ProbeFn]:
    """Probe functions for the built-in host indicators (psutil-backed).

    A probe raising (e.g. no battery present) makes the follower skip that
    indicator for the cycle and log a warning.
    """
    import psutil

    def cpu(_t: float) -> float:
        return psutil.cpu_percent(interval=None) / 100.0

    def mem(_t: float) -> float:
        return psutil.virtual_memory().percent / 100.0

    def disk(_t: float) -> float:
        return psutil.disk_usage("/").percent / 100.0

    def power(_t: float) -> float:
        battery = psutil.sensors_battery()
        if battery is None:
            raise RuntimeError("no battery sensor on this host")
        return battery.percent / 100.0

    registry: Dict[str, ProbeFn] = {
        "cpu": cpu, "mem": mem, "memory": mem, "disk": disk, "power": power,
    }
    probes = {}
    for name in names:
        if name not in registry:
            raise ConfigError(
                f"no built-in probe for indicator '{name}' "
                f"(available: {', '.join(sorted(set(registry)))})"
            )
        probes[name] = registry[name]
    return probes


class LeaderServer:
    """Threaded TCP Leader: accepts peers, aggregates reports, gossips."""

    def __init__(
        self,
        listen: str,
        peers: Sequence[str] = (),
        node_id: Optional[str] = None,
        gossip_period: float = 30.0,
        fanout: int = 2,
        seed: int = 0,
        reply_with_state: bool = False,
    ):
        self.host, self.port = parse_hostport(listen)
        self.peers = list(peers)
        self.node_id = node_id or listen
        self.node = LeaderNode(
            self.node_id,
            peers=self.peers,
            fanout=fanout,
            rng=Random(seed),
            reply_with_state=reply_with_state,
        )
        self.gossip_period = gossip_period
        self._inbox: "queue.Queue[Tuple[Message, Optional[socket.socket]]]" = queue.Queue()
        self._stop = threading.Event()
        self._threads = []
        self._listener: Optional[socket.socket] = None
        self._started = time.monotonic()

    # seconds since server start; the virtual-time axis of this peer
    def now(self) -> float:
        return time.monotonic() - self._started

    def start(self) -> None:
        self._listener = socket.create_server((self.host, self.port))
        self.port = self._listener.getsockname()[1]
        self._listener.settimeout(0.2)
        self._started = time.monotonic()
        for target in (self._accept_loop, self._main_loop, self._gossip_loop):
            thread = threading.Thread(target=target, daemon=True)
            thread.start()
            self._threads.append(thread)
        logger.info("leader %s listening on %s:%d", self.node_id, self.host, self.port)

    def stop(self) -> None:
        self._stop.set()
        for thread in self._threads:
            thread.join(timeout=2.0)
        if self._listener is not None:
            self._listener.close()

    # -- internals ---------------------------------------------------------

    def _accept_loop(self) -> None:
        while not self._stop.is_set():
            try:
                conn, addr = self._listener.accept()
            except socket.timeout:
                continue
            except OSError:
                break
            thread = threading.Thread(target=self._reader, args=(conn, addr), daemon=True)
            thread.start()
            self._threads.append(thread)

    def _reader(self, conn: socket.socket, addr) -> None:
        splitter = LineSplitter()
        conn.settimeout(0.2)
        try:
            while not self._stop.is_set():
                try:
                    data = conn.recv(4096)
                except socket.timeout:
                    continue
                except OSError:
                    break
                if not data:
                    break
                for line in splitter.feed(data):
                    try:
                        message = decode_message(line)
                    except DecodeError as exc:
                        # never let a malformed peer line take the leader down
                        logger.warning("dropping malformed line from %s: %s", addr, exc)
                        continue
                    self._inbox.put((message, conn))
        finally:
            conn.close()

    def _main_loop(self) -> None:
        while not self._stop.is_set():
            try:
                message, conn = self._inbox.get(timeout=0.1)
            except queue.Empty:
                continue
            try:
                replies = self.node.on_message(message, self.now())
            except Exception:
                logger.exception("error handling %r", message)
                continue
            for _dst, reply in replies:
                try:
                    conn.sendall(encode_message(reply))
                except OSError:
                    logger.warning("could not send reply to %r", _dst)

    def _gossip_loop(self) -> None:
        while not self._stop.wait(self.gossip_period):
            for dst, message in self.node.gossip_tick(self.now()):
                self._send_to_peer(dst, message)

    def _send_to_peer(self, address: str, message: Gossip) -> None:
        host, port = parse_hostport(address)
        try:
            with socket.create_connection((host, port), timeout=2.0) as conn:
                conn.sendall(encode_message(message))
                if self.node.reply_with_state:
                    conn.settimeout(2.0)
                    splitter = LineSplitter()
                    while True:
                        data = conn.recv(4096)
                        if not data:
                            break
                        lines = splitter.feed(data)
                        if lines:
                            self.node.on_message(decode_message(lines[0]), self.now())
                            break
        except (OSError, DecodeError) as exc:
            logger.warning("gossip to %s failed: %s", address, exc)


class FollowerRunner:
    """Wall-clock Follower loop pushing reports to one Leader over TCP."""

    def __init__(
        self,
        leader: str,
        setup: PeerSetup,
        rules: Optional[RuleSet] = None,
        node_id: str = "follower",
        adaptive: bool = True,
        probes: Optional[Mapping[str, ProbeFn]] = None,
    ):
        self.leader_addr = parse_hostport(leader)
        kb = setup.build_kb()
        if probes is None:
            probes = builtin_probes(kb.indicator_names())
        self.follower = FollowerNode(
            node_id, kb, probes=probes, leader=leader, rules=rules, adaptive=adaptive
        )
        self._sock: Optional[socket.socket] = None
        self._started = time.monotonic()

    def now(self) -> float:
        return time.monotonic() - self._started

    def _send(self, outbound) -> None:
        for _dst, message in outbound:
            self._sock.sendall(encode_message(message))

    def run(
        self,
        duration: Optional[float] = None,
        stop_event: Optional[threading.Event] = None,
    ) -> None:
        """Probe until ``duration`` seconds elapse or ``stop_event`` is set,
        then say goodbye to the leader."""
        stop_event = stop_event or threading.Event()
        self._sock = socket.create_connection(self.leader_addr, timeout=5.0)
        self._started = time.monotonic()
        try:
            self._send(self.follower.start(0.0))
            while not stop_event.is_set():
                due = self.follower.next_wakeup()
                if due is None:
                    break
                if duration is not None and due > duration:
                    break
                delay = due - self.now()
                if delay > 0 and stop_event.wait(delay):
                    break
                self._send(self.follower.on_wakeup(max(due, self.now())))
            self._send(self.follower.stop())
        finally:
            self._sock.close()
