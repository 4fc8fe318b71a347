"""Wire-level messages and their newline-delimited JSON codec.

Every message is one UTF-8 JSON object terminated by a single newline.
The same codec backs both the real byte-stream transport and the in-process
simulated one. Numbers are serialized at full precision, so
decode(encode(m)) == m for every valid message.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import List, Tuple, Union


class DecodeError(ValueError):
    """Raised when a wire line cannot be decoded into a message."""


@dataclass(frozen=True)
class Register:
    node: str
    role: str  # "follower" or "leader"

    def __post_init__(self) -> None:
        if self.role not in ("follower", "leader"):
            raise ValueError(f"invalid role {self.role!r}")


@dataclass(frozen=True)
class Report:
    """Aggregated window statistics for one indicator of one node."""

    node: str
    indicator: str
    ts: float
    mean: float
    var: float
    n: int

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError(f"report window count must be >= 1, got {self.n}")
        if self.var < 0:
            raise ValueError(f"report variance must be >= 0, got {self.var}")


@dataclass(frozen=True)
class GossipEntry:
    origin: str
    indicator: str
    ts: float
    mean: float
    var: float
    n: int

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError(f"entry window count must be >= 1, got {self.n}")
        if self.var < 0:
            raise ValueError(f"entry variance must be >= 0, got {self.var}")


@dataclass(frozen=True)
class Gossip:
    node: str
    entries: Tuple[GossipEntry, ...]


@dataclass(frozen=True)
class Bye:
    node: str


Message = Union[Register, Report, Gossip, Bye]


def encode_message(msg: Message) -> bytes:
    """Encode a message as one JSON line (trailing 0x0A included)."""
    if isinstance(msg, Register):
        payload = {"type": "register", "node": msg.node, "role": msg.role}
    elif isinstance(msg, Report):
        payload = {
            "type": "report", "node": msg.node, "indicator": msg.indicator,
            "ts": msg.ts, "mean": msg.mean, "var": msg.var, "n": msg.n,
        }
    elif isinstance(msg, Gossip):
        payload = {
            "type": "gossip",
            "node": msg.node,
            "entries": [
                {
                    "origin": e.origin, "indicator": e.indicator, "ts": e.ts,
                    "mean": e.mean, "var": e.var, "n": e.n,
                }
                for e in msg.entries
            ],
        }
    elif isinstance(msg, Bye):
        payload = {"type": "bye", "node": msg.node}
    else:
        raise TypeError(f"not a wire message: {msg!r}")
    return json.dumps(payload, separators=(",", ":")).encode("utf-8") + b"\n"


def _field(obj: dict, name: str, kinds, line_kind: str):
    if name not in obj:
        raise DecodeError(f"{line_kind} message missing field \"{name}\"")
    value = obj[name]
    # bool is an int subclass; never a valid wire number
    if isinstance(value, bool) or not isinstance(value, kinds):
        raise DecodeError(f"{line_kind} message field \"{name}\" has wrong type")
    return value


def _entry_from(obj: dict) -> GossipEntry:
    if not isinstance(obj, dict):
        raise DecodeError("gossip entries must be objects")
    return GossipEntry(
        origin=_field(obj, "origin", str, "gossip"),
        indicator=_field(obj, "indicator", str, "gossip"),
        ts=float(_field(obj, "ts", (int, float), "gossip")),
        mean=float(_field(obj, "mean", (int, float), "gossip")),
        var=float(_field(obj, "var", (int, float), "gossip")),
        n=_field(obj, "n", int, "gossip"),
    )


def decode_message(data: Union[bytes, str]) -> Message:
    """Decode one newline-terminated JSON line into a message.

    Raises DecodeError on a truncated line, unknown type, or a missing or
    mistyped field (naming the field).
    """
    if isinstance(data, str):
        data = data.encode("utf-8")
    if not data.endswith(b"\n"):
        raise DecodeError("truncated line (missing trailing newline)")
    line = data[:-1]
    if b"\n" in line:
        raise DecodeError("multiple lines passed to decode_message")
    try:
        obj = json.loads(line.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise DecodeError(f"invalid JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise DecodeError("wire line is not a JSON object")
    kind = obj.get("type")
    if kind == "register":
        role = _field(obj, "role", str, "register")
        if role not in ("follower", "leader"):
            raise DecodeError(f"register message field \"role\" invalid: {role!r}")
        return Register(node=_field(obj, "node", str, "register"), role=role)
    if kind == "report":
        try:
            return Report(
                node=_field(obj, "node", str, "report"),
                indicator=_field(obj, "indicator", str, "report"),
                ts=float(_field(obj, "ts", (int, float), "report")),
                mean=float(_field(obj, "mean", (int, float), "report")),
                var=float(_field(obj, "var", (int, float), "report")),
                n=_field(obj, "n", int, "report"),
            )
        except ValueError as exc:
            if isinstance(exc, DecodeError):
                raise
            raise DecodeError(f"invalid report: {exc}") from exc
    if kind == "gossip":
        entries = _field(obj, "entries", list, "gossip")
        try:
            return Gossip(
                node=_field(obj, "node", str, "gossip"),
                entries=tuple(_entry_from(e) for e in entries),
            )
        except ValueError as exc:
            if isinstance(exc, DecodeError):
                raise
            raise DecodeError(f"invalid gossip entry: {exc}") from exc
    if kind == "bye":
        return Bye(node=_field(obj, "node", str, "bye"))
    raise DecodeError(f"unknown message type {kind!r}")


class LineSplitter:
    """Incrementally split a byte stream into newline-terminated lines."""

    def __init__(self) -> None:
        self._buffer = b""

    def feed(self, data: bytes) -> List[bytes]:
        self._buffer += data
        lines = []
        while True:
            idx = self._buffer.find(b"\n")
            if idx < 0:
                break
            lines.append(self._buffer[: idx + 1])
            self._buffer = self._buffer[idx + 1 :]
        return lines

    def pending(self) -> bytes:
        return self._buffer
