"""Peer configuration documents.

A configuration file is a JSON object:

    {
      "indicators": [
        {"name": "cpu", "kind": "numerical", "range": [0, 1],
         "state": {"k": 5, "p": 0.8, "delta_max": 0.05,
                   "too_low": 0.1, "low": 0.3, "high": 0.7, "too_high": 0.9}}
      ],
      "bounds": {"r_min": 30, "r_max": 60},
      "sensitivity": 0.1,
      "window": 20,
      "gossip": {"period": 30, "fanout": 2}
    }

``range`` defaults to [0, 1] and fills any omitted ``state`` values.
``sensitivity: null`` disables differential suppression. The optional
``initial_interval`` key sets the starting sampling interval (default r_min).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Optional, Tuple

from .core import (
    ConfigError,
    Indicator,
    IndicatorKind,
    KnowledgeBase,
    PeerConfig,
    RateBounds,
    StateConfig,
)

_SENTINEL = object()


@dataclass(frozen=True)
class IndicatorSetup:
    name: str
    kind: IndicatorKind = IndicatorKind.NUMERICAL
    range: Tuple[float, float] = (0.0, 1.0)
    state: Optional[StateConfig] = None

    def state_config(self) -> StateConfig:
        if self.state is not None:
            return self.state
        return StateConfig.for_range(*self.range)


@dataclass(frozen=True)
class PeerSetup:
    """Everything needed to build one peer's knowledge base."""

    indicators: Tuple[IndicatorSetup, ...]
    bounds: RateBounds = field(default_factory=lambda: RateBounds(30.0, 60.0))
    sensitivity: Optional[float] = 0.10
    window: int = 20
    gossip_period: float = 30.0
    gossip_fanout: int = 2
    initial_interval: Optional[float] = None  # None means r_min

    def build_kb(self) -> KnowledgeBase:
        config = PeerConfig(
            bounds=self.bounds,
            sensitivity=self.sensitivity,
            window=self.window,
            gossip_period=self.gossip_period,
            gossip_fanout=self.gossip_fanout,
        )
        kb = KnowledgeBase(config)
        start = self.initial_interval
        for spec in self.indicators:
            kb.register(
                Indicator(spec.name, spec.kind),
                state_config=spec.state_config(),
                interval=start,
            )
        return kb

    def with_sensitivity(self, sensitivity: Optional[float]) -> "PeerSetup":
        return replace(self, sensitivity=sensitivity)


def _state_from(doc: dict, rng: Tuple[float, float]) -> StateConfig:
    base = StateConfig.for_range(*rng)
    try:
        return StateConfig(
            k=int(doc.get("k", base.k)),
            p=float(doc.get("p", base.p)),
            delta_max=float(doc.get("delta_max", base.delta_max)),
            too_low=float(doc.get("too_low", base.too_low)),
            low=float(doc.get("low", base.low)),
            high=float(doc.get("high", base.high)),
            too_high=float(doc.get("too_high", base.too_high)),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid state config: {exc}") from exc


def peer_setup_from_dict(doc: dict) -> PeerSetup:
    if not isinstance(doc, dict):
        raise ConfigError("configuration must be a JSON object")
    raw_indicators = doc.get("indicators")
    if not raw_indicators or not isinstance(raw_indicators, list):
        raise ConfigError("configuration needs a non-empty 'indicators' list")
    indicators = []
    for item in raw_indicators:
        if not isinstance(item, dict) or "name" not in item:
            raise ConfigError("each indicator needs at least a 'name'")
        kind_text = item.get("kind", "numerical")
        try:
            kind = IndicatorKind(kind_text)
        except ValueError:
            raise ConfigError(f"unknown indicator kind '{kind_text}'") from None
        rng_raw = item.get("range", [0.0, 1.0])
        if not (isinstance(rng_raw, list) and len(rng_raw) == 2):
            raise ConfigError(f"indicator '{item['name']}': range must be [lo, hi]")
        rng = (float(rng_raw[0]), float(rng_raw[1]))
        state = _state_from(item.get("state", {}), rng)
        indicators.append(
            IndicatorSetup(name=str(item["name"]), kind=kind, range=rng, state=state)
        )

    bounds_doc = doc.get("bounds", {})
    try:
        bounds = RateBounds(
            r_min=float(bounds_doc.get("r_min", 30.0)),
            r_max=float(bounds_doc.get("r_max", 60.0)),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid bounds: {exc}") from exc

    sensitivity_raw = doc.get("sensitivity", 0.10)
    sensitivity = None if sensitivity_raw is None else float(sensitivity_raw)
    gossip = doc.get("gossip", {})
    initial = doc.get("initial_interval")
    return PeerSetup(
        indicators=tuple(indicators),
        bounds=bounds,
        sensitivity=sensitivity,
        window=int(doc.get("window", 20)),
        gossip_period=float(gossip.get("period", 30.0)),
        gossip_fanout=int(gossip.get("fanout", 2)),
        initial_interval=None if initial is None else float(initial),
    )


def load_peer_setup(path: str) -> PeerSetup:
    try:
        with open(path, "r", encoding="utf-8") as handle:
            doc = json.load(handle)
    except OSError as exc:
        raise ConfigError(f"cannot read configuration {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"configuration {path} is not valid JSON: {exc}") from exc
    return peer_setup_from_dict(doc)
