"""Single-threaded discrete-event loop with a virtual clock.

One global time-ordered event queue drives every peer loop in an experiment;
ties are broken by insertion order, so a run is fully deterministic and never
touches the wall clock.
"""

from __future__ import annotations

import heapq
from itertools import count
from typing import Callable, Dict, List, Tuple

from .messages import Message, decode_message, encode_message

Handler = Callable[[object, float], List[Tuple[str, object]]]


class EventLoop:
    """Virtual-time event queue. ``schedule`` must not go backwards."""

    def __init__(self) -> None:
        self._now = 0.0
        self._heap: List[Tuple[float, int, Callable[[], None]]] = []
        self._seq = count()

    @property
    def now(self) -> float:
        return self._now

    def schedule(self, at: float, fn: Callable[[], None]) -> None:
        if at < self._now:
            raise ValueError(f"cannot schedule at {at} before now={self._now}")
        heapq.heappush(self._heap, (at, next(self._seq), fn))

    def run_until(self, end: float) -> None:
        """Process every event strictly before ``end``; leave later ones queued."""
        while self._heap and self._heap[0][0] < end:
            at, _, fn = heapq.heappop(self._heap)
            self._now = at
            fn()
        if self._now < end:
            self._now = end

    def run_all(self) -> None:
        while self._heap:
            at, _, fn = heapq.heappop(self._heap)
            self._now = at
            fn()


class SimTransport:
    """In-process message transport over the event loop.

    Each send encodes the message to its wire line and schedules the decode at
    the destination after the per-link latency, so the simulation exercises
    the exact same codec as the byte-stream transport. Handlers may return
    outbound messages, which are forwarded recursively.
    """

    def __init__(self, loop: EventLoop, latency: float = 0.0):
        self.loop = loop
        self.latency = latency
        self._link_latency: Dict[Tuple[str, str], float] = {}
        self._handlers: Dict[str, Handler] = {}
        self.delivered: int = 0
        self.bytes_moved: int = 0

    def register(self, node_id: str, handler: Handler) -> None:
        self._handlers[node_id] = handler

    def set_link_latency(self, src: str, dst: str, latency: float) -> None:
        self._link_latency[(src, dst)] = latency

    def _latency(self, src: str, dst: str) -> float:
        return self._link_latency.get((src, dst), self.latency)

    def send(self, src: str, dst: str, msg: Message) -> None:
        if dst not in self._handlers:
            raise KeyError(f"no handler registered for node '{dst}'")
        data = encode_message(msg)
        self.bytes_moved += len(data)

        def deliver() -> None:
            decoded = decode_message(data)
            self.delivered += 1
            replies = self._handlers[dst](decoded, self.loop.now)
            for next_dst, reply in replies or []:
                self.send(dst, next_dst, reply)

        self.loop.schedule(self.loop.now + self._latency(src, dst), deliver)
