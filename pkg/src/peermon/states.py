"""Analysis phase: abstract raw sample windows into sets of logical states.

A window of k+1 values yields at most one stability state (stable/unstable,
always exactly one once warm-up is over) plus at most one level state. Level
membership is counted over all k+1 window values against the same p*k
threshold used for stability, so p = 1 still tolerates one outlier.

Boundary note: the stability predicate uses <= delta_max and unstable is its
exact complement, so the two partition time with no gap or overlap on
boundary deltas.
"""

from __future__ import annotations

from typing import Optional, Sequence

from .core import (
    EMPTY_STATES,
    IndicatorKind,
    KnowledgeBase,
    LogicalState,
    StateConfig,
    StateSet,
    Value,
)


class WindowLengthError(ValueError):
    """The classifier received a window of the wrong length."""


def _check_window(window: Sequence, cfg: StateConfig) -> None:
    expected = cfg.k + 1
    if len(window) != expected:
        raise WindowLengthError(
            f"window must hold k+1 = {expected} values, got {len(window)}"
        )


def classify_categorical(window: Sequence[Value], cfg: StateConfig) -> StateSet:
    """{stable} iff all k+1 values are equal, otherwise {unstable}."""
    _check_window(window, cfg)
    first = window[0]
    if all(v == first for v in window):
        return frozenset({LogicalState.STABLE})
    return frozenset({LogicalState.UNSTABLE})


def level_of(value: float, cfg: StateConfig) -> LogicalState:
    """The unique level interval containing ``value``.

    too_high: [too_high, +inf)   high: [high, too_high)
    normal:   (low, high)        low:  (too_low, low]
    too_low:  (-inf, too_low]
    """
    if value >= cfg.too_high:
        return LogicalState.TOO_HIGH
    if value >= cfg.high:
        return LogicalState.HIGH
    if value > cfg.low:
        return LogicalState.NORMAL
    if value > cfg.too_low:
        return LogicalState.LOW
    return LogicalState.TOO_LOW


def classify_numerical(window: Sequence[float], cfg: StateConfig) -> StateSet:
    """Classify a numerical window of k+1 values.

    stable requires at least p*k of the k consecutive steps to stay within
    delta_max and the latest step to do so as well; unstable is the
    complement. A level state additionally requires the current value to lie
    in the level's interval. Count thresholds compare in real arithmetic
    (count >= p*k), never rounded.
    """
    _check_window(window, cfg)
    k, p = cfg.k, cfg.p
    states = set()

    deltas = [abs(window[x] - window[x - 1]) for x in range(1, k + 1)]
    small_steps = sum(1 for d in deltas if d <= cfg.delta_max)
    if small_steps >= p * k and deltas[-1] <= cfg.delta_max:
        states.add(LogicalState.STABLE)
    else:
        states.add(LogicalState.UNSTABLE)

    # The intervals partition the line, so only the current value's own level
    # can satisfy the membership condition.
    current_level = level_of(window[-1], cfg)
    occupancy = sum(1 for v in window if level_of(v, cfg) is current_level)
    if occupancy >= p * k:
        states.add(current_level)

    return frozenset(states)


def analyze(
    kb: KnowledgeBase, name: str, cfg: Optional[StateConfig] = None
) -> StateSet:
    """Classify the most recent window of an indicator and record the result.

    Returns the empty set (recording nothing) while fewer than k+1 samples
    exist. Re-running without new samples does not duplicate history entries.
    """
    indicator = kb.indicator(name)
    if cfg is None:
        cfg = kb.state_configs[name]
    needed = cfg.k + 1
    if kb.sample_count(name) < needed:
        return EMPTY_STATES
    window = kb.recent(name, needed)
    values = [s.value for s in window]
    if indicator.kind is IndicatorKind.CATEGORICAL:
        states = classify_categorical(values, cfg)
    else:
        states = classify_numerical(values, cfg)
    kb.record_states(name, window[-1].timestamp, states)
    return states


def streak(history: Sequence[StateSet], state: LogicalState) -> int:
    """Number of consecutive most-recent state sets containing ``state``;
    0 if the latest set lacks it or the history is empty."""
    count = 0
    for states in reversed(history):
        if state not in states:
            break
        count += 1
    return count
