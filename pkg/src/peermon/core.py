"""Domain types and the per-peer knowledge base shared by all control-loop phases.

The knowledge base is owned by a single peer loop; every mutation goes
through that loop, so no locking is done here. Timestamps are virtual-clock
seconds supplied by the runtime (simulation or wall clock), never read from
the OS inside this module.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Deque, Dict, FrozenSet, List, Optional, Set, Tuple, Union

#: Raw series and state histories keep this many most-recent entries per
#: indicator; bounds memory on constrained devices.
RETENTION = 1000


class MonitoringError(Exception):
    """Base class for errors raised by the monitoring core."""


class UnknownIndicatorError(MonitoringError):
    """An operation referenced an indicator that was never registered."""


class TimestampOrderError(MonitoringError):
    """A sample violated the strictly-increasing timestamp requirement."""


class ConfigError(MonitoringError):
    """A configuration value violates an invariant."""


class IndicatorKind(str, Enum):
    NUMERICAL = "numerical"
    CATEGORICAL = "categorical"


class LogicalState(str, Enum):
    """Abstract labels summarizing an indicator's recent window."""

    STABLE = "stable"
    UNSTABLE = "unstable"
    TOO_HIGH = "too_high"
    HIGH = "high"
    NORMAL = "normal"
    LOW = "low"
    TOO_LOW = "too_low"


#: Level states are mutually exclusive: their value intervals partition the line.
LEVEL_STATES: Tuple[LogicalState, ...] = (
    LogicalState.TOO_HIGH,
    LogicalState.HIGH,
    LogicalState.NORMAL,
    LogicalState.LOW,
    LogicalState.TOO_LOW,
)

StateSet = FrozenSet[LogicalState]
EMPTY_STATES: StateSet = frozenset()

Value = Union[float, str]


@dataclass(frozen=True)
class Indicator:
    """A monitored quantity. The kind is immutable after registration."""

    name: str
    kind: IndicatorKind

    def __post_init__(self) -> None:
        if not self.name:
            raise ConfigError("indicator name must be non-empty")


@dataclass(frozen=True)
class Sample:
    """One probed value at a virtual timestamp (seconds since start)."""

    timestamp: float
    value: Value

    def __post_init__(self) -> None:
        if self.timestamp < 0:
            raise ConfigError(f"negative sample timestamp {self.timestamp}")


@dataclass(frozen=True)
class StateConfig:
    """Per-indicator parameters for the window classifier.

    ``k`` is the recent-history length in samples, ``p`` the tolerance
    fraction of k, ``delta_max`` the largest step still considered stable,
    and the four thresholds bound the five level intervals (strictly
    increasing, so the intervals partition the real line).
    """

    k: int = 5
    p: float = 0.8
    delta_max: float = 0.05
    too_low: float = 0.1
    low: float = 0.3
    high: float = 0.7
    too_high: float = 0.9

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ConfigError(f"window length k must be >= 1, got {self.k}")
        if not 0.0 <= self.p <= 1.0:
            raise ConfigError(f"tolerance p must be in [0, 1], got {self.p}")
        if self.delta_max < 0:
            raise ConfigError(f"delta_max must be >= 0, got {self.delta_max}")
        if not self.too_low < self.low < self.high < self.too_high:
            raise ConfigError(
                "level thresholds must satisfy too_low < low < high < too_high, got "
                f"({self.too_low}, {self.low}, {self.high}, {self.too_high})"
            )

    @classmethod
    def for_range(cls, lo: float, hi: float, k: int = 5, p: float = 0.8) -> "StateConfig":
        """Defaults calibrated from an indicator's declared value range:
        delta_max is 5% of the span, thresholds sit at its 10/30/70/90% points."""
        if not hi > lo:
            raise ConfigError(f"empty indicator range [{lo}, {hi}]")
        span = hi - lo
        return cls(
            k=k,
            p=p,
            delta_max=0.05 * span,
            too_low=lo + 0.1 * span,
            low=lo + 0.3 * span,
            high=lo + 0.7 * span,
            too_high=lo + 0.9 * span,
        )


@dataclass(frozen=True)
class RateBounds:
    """Sampling-interval boundaries in seconds, 0 < r_min <= r_max."""

    r_min: float
    r_max: float

    def __post_init__(self) -> None:
        if not 0 < self.r_min <= self.r_max:
            raise ConfigError(f"invalid rate bounds [{self.r_min}, {self.r_max}]")

    def clamp(self, interval: float) -> float:
        return min(max(interval, self.r_min), self.r_max)


@dataclass
class ConfigEvent:
    """Audit record for one applied configuration mutation."""

    timestamp: float
    parameter: str  # "rate" or "enabled"
    target: str  # indicator name, or "*" for the enabled set
    before: object
    after: object
    clamped: bool = False


@dataclass
class PeerConfig:
    """Mutable actuation surface of one peer.

    ``sensitivity`` is the differential-update threshold (fraction); ``None``
    disables suppression entirely so every aggregate is forwarded. ``window``
    is the number of recent samples aggregated into each report.
    """

    bounds: RateBounds = field(default_factory=lambda: RateBounds(30.0, 60.0))
    sensitivity: Optional[float] = 0.10
    window: int = 20
    gossip_period: float = 30.0
    gossip_fanout: int = 2
    intervals: Dict[str, float] = field(default_factory=dict)
    enabled: Set[str] = field(default_factory=set)

    def __post_init__(self) -> None:
        if self.sensitivity is not None and self.sensitivity < 0:
            raise ConfigError(f"sensitivity must be >= 0, got {self.sensitivity}")
        if self.window < 1:
            raise ConfigError(f"aggregation window must be >= 1, got {self.window}")
        if self.gossip_period <= 0:
            raise ConfigError(f"gossip period must be > 0, got {self.gossip_period}")
        if self.gossip_fanout < 1:
            raise ConfigError(f"gossip fanout must be >= 1, got {self.gossip_fanout}")
        for name, interval in self.intervals.items():
            if not self.bounds.r_min <= interval <= self.bounds.r_max:
                raise ConfigError(
                    f"interval {interval}s for '{name}' outside bounds "
                    f"[{self.bounds.r_min}, {self.bounds.r_max}]"
                )


class KnowledgeBase:
    """Single source of truth for one peer: raw series, state histories,
    the live configuration and reporting bookkeeping.

    State histories align one-to-one with raw samples from the (k+1)-th
    sample onward; during warm-up no states exist.
    """

    def __init__(self, config: Optional[PeerConfig] = None, retention: int = RETENTION):
        self.config = config if config is not None else PeerConfig()
        self.retention = retention
        self._indicators: Dict[str, Indicator] = {}
        self._series: Dict[str, Deque[Sample]] = {}
        self._states: Dict[str, Deque[Tuple[float, StateSet]]] = {}
        self.state_configs: Dict[str, StateConfig] = {}
        # (mean, variance) of the last report actually sent, per indicator
        self.last_sent: Dict[str, Tuple[float, float]] = {}
        self.config_events: List[ConfigEvent] = []
        # (tick, rule name, salience) entries appended by the planner
        self.fired_rules: List[Tuple[int, str, int]] = []
        self.tick: int = 0

    # -- registration ----------------------------------------------------

    def register(
        self,
        indicator: Indicator,
        state_config: Optional[StateConfig] = None,
        interval: Optional[float] = None,
    ) -> None:
        if indicator.name in self._indicators:
            raise ConfigError(f"indicator '{indicator.name}' already registered")
        self._indicators[indicator.name] = indicator
        self._series[indicator.name] = deque(maxlen=self.retention)
        self._states[indicator.name] = deque(maxlen=self.retention)
        self.state_configs[indicator.name] = state_config or StateConfig()
        start = self.config.bounds.r_min if interval is None else interval
        self.config.intervals[indicator.name] = self.config.bounds.clamp(start)
        self.config.enabled.add(indicator.name)

    def indicator(self, name: str) -> Indicator:
        try:
            return self._indicators[name]
        except KeyError:
            raise UnknownIndicatorError(f"unknown indicator '{name}'") from None

    def indicator_names(self) -> List[str]:
        return sorted(self._indicators)

    def is_registered(self, name: str) -> bool:
        return name in self._indicators

    # -- raw series -------------------------------------------------------

    def append(self, name: str, sample: Sample) -> None:
        """Store one sample; timestamps must strictly increase per indicator."""
        series = self._series_for(name)
        if series and sample.timestamp <= series[-1].timestamp:
            raise TimestampOrderError(
                f"sample at t={sample.timestamp} for '{name}' does not follow "
                f"t={series[-1].timestamp}"
            )
        series.append(sample)

    def recent(self, name: str, n: int) -> List[Sample]:
        """Last min(n, stored) samples in timestamp order."""
        if n < 1:
            raise ValueError(f"n must be >= 1, got {n}")
        series = self._series_for(name)
        if n >= len(series):
            return list(series)
        return [series[i] for i in range(len(series) - n, len(series))]

    def sample_count(self, name: str) -> int:
        return len(self._series_for(name))

    def last_sample(self, name: str) -> Optional[Sample]:
        series = self._series_for(name)
        return series[-1] if series else None

    # -- state history ----------------------------------------------------

    def record_states(self, name: str, timestamp: float, states: StateSet) -> None:
        """Append one classification; repeated calls for the same timestamp
        are ignored (idempotent per timestamp)."""
        history = self._states_for(name)
        if history and history[-1][0] == timestamp:
            return
        history.append((timestamp, states))

    def state_history(self, name: str, n: Optional[int] = None) -> List[StateSet]:
        """Last min(n, available) state sets in timestamp order (all if n is None)."""
        if n is not None and n < 1:
            raise ValueError(f"n must be >= 1, got {n}")
        history = self._states_for(name)
        sets = [entry[1] for entry in history]
        if n is None or n >= len(sets):
            return sets
        return sets[-n:]

    def state_entries(self, name: str) -> List[Tuple[float, StateSet]]:
        """Full (timestamp, state set) history in timestamp order."""
        return list(self._states_for(name))

    def latest_states(self, name: str) -> Optional[StateSet]:
        """Most recent state set, or None while warm-up is still in progress."""
        history = self._states_for(name)
        return history[-1][1] if history else None

    def last_state_timestamp(self, name: str) -> Optional[float]:
        history = self._states_for(name)
        return history[-1][0] if history else None

    def state_count(self, name: str) -> int:
        return len(self._states_for(name))

    # -- configuration mutations -------------------------------------------

    def set_interval(self, name: str, seconds: float, at: float) -> ConfigEvent:
        """Set an indicator's sampling interval, clamping into the rate bounds.

        Out-of-bounds requests are clamped rather than rejected, with the
        event flagged, so aggressive rules cannot wedge the peer.
        """
        if name not in self._indicators:
            raise UnknownIndicatorError(f"unknown indicator '{name}'")
        applied = self.config.bounds.clamp(seconds)
        event = ConfigEvent(
            timestamp=at,
            parameter="rate",
            target=name,
            before=self.config.intervals[name],
            after=applied,
            clamped=applied != seconds,
        )
        self.config.intervals[name] = applied
        self.config_events.append(event)
        return event

    def set_enabled(self, names: Set[str], at: float) -> ConfigEvent:
        """Replace the enabled-indicator set. Unknown names are an error;
        emptiness checks are the caller's concern (countermeasure level)."""
        unknown = sorted(n for n in names if n not in self._indicators)
        if unknown:
            raise UnknownIndicatorError(f"unknown indicator(s) {unknown}")
        event = ConfigEvent(
            timestamp=at,
            parameter="enabled",
            target="*",
            before=frozenset(self.config.enabled),
            after=frozenset(names),
        )
        self.config.enabled = set(names)
        self.config_events.append(event)
        return event

    # -- internals ---------------------------------------------------------

    def _series_for(self, name: str) -> Deque[Sample]:
        try:
            return self._series[name]
        except KeyError:
            raise UnknownIndicatorError(f"unknown indicator '{name}'") from None

    def _states_for(self, name: str) -> Deque[Tuple[float, StateSet]]:
        try:
            return self._states[name]
        except KeyError:
            raise UnknownIndicatorError(f"unknown indicator '{name}'") from None
