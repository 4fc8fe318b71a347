"""Execute phase: the Change Rate and Select Indicators countermeasures.

Actions run in queue order (highest salience first). When two actions in the
same tick target the same configuration parameter, the first one wins and
later ones are discarded but still recorded. Per-action failures never abort
the rest of the queue.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Set

from .core import KnowledgeBase, LogicalState, RateBounds
from .rules import (
    Action,
    ChangeRateProportional,
    ChangeRateTo,
    PlannedAction,
    SelectAll,
    SelectDrop,
    SelectKeep,
)
from .states import streak

logger = logging.getLogger(__name__)


@dataclass
class AppliedEffect:
    """Outcome of one planned action, recorded even when discarded or failed."""

    tick: int
    rule: str
    parameter: str  # "rate" or "enabled"
    target: str  # indicator name, or "*" for the enabled set
    before: object = None
    after: object = None
    clamped: bool = False
    discarded: bool = False
    error: Optional[str] = None


def compute_indicator_rate(
    state: LogicalState, streak_len: int, bounds: RateBounds, k: int
) -> float:
    """New sampling interval from a stability state and its streak.

    With s = min(streak, k)/k the interval interpolates linearly across the
    bounds: persisting stability stretches it toward r_max (fewer samples),
    persisting instability shrinks it toward r_min. States other than
    stable/unstable map to r_min: sample fast while something is alarming.
    """
    if streak_len < 0:
        raise ValueError(f"streak must be >= 0, got {streak_len}")
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    share = min(streak_len, k) / k
    if state is LogicalState.STABLE:
        interval = bounds.r_min + (bounds.r_max - bounds.r_min) * share
    elif state is LogicalState.UNSTABLE:
        interval = bounds.r_max - (bounds.r_max - bounds.r_min) * share
    else:
        interval = bounds.r_min
    # interpolation can round one ulp past an endpoint
    return bounds.clamp(interval)


def apply_change_rate(
    kb: KnowledgeBase, name: str, interval: float, at: float, tick: int, rule: str
) -> AppliedEffect:
    """Set an indicator's sampling interval (clamped into bounds).

    Takes effect at the next scheduling decision. Disabled or unknown
    indicators yield a flagged no-op instead of an exception.
    """
    if not kb.is_registered(name):
        return AppliedEffect(
            tick=tick, rule=rule, parameter="rate", target=name,
            error=f"unknown indicator '{name}'",
        )
    if name not in kb.config.enabled:
        current = kb.config.intervals.get(name)
        return AppliedEffect(
            tick=tick, rule=rule, parameter="rate", target=name,
            before=current, after=current,
            error=f"indicator '{name}' is disabled",
        )
    event = kb.set_interval(name, interval, at)
    return AppliedEffect(
        tick=tick, rule=rule, parameter="rate", target=name,
        before=event.before, after=event.after, clamped=event.clamped,
    )


def apply_select_indicators(
    kb: KnowledgeBase, directive: Action, at: float, tick: int, rule: str
) -> AppliedEffect:
    """Change the enabled-indicator set.

    keep(L) enables L intersected with the registered set, drop(L) removes L,
    all re-enables everything. A directive that would leave the peer
    monitoring nothing is rejected: it could never re-enable itself through
    state-triggered rules.
    """
    registered = set(kb.indicator_names())
    before: Set[str] = set(kb.config.enabled)
    if isinstance(directive, SelectKeep):
        target = set(directive.indicators) & registered
    elif isinstance(directive, SelectDrop):
        target = before - set(directive.indicators)
    elif isinstance(directive, SelectAll):
        target = registered
    else:  # pragma: no cover - guarded by the caller
        raise TypeError(f"not a select directive: {directive!r}")
    if not target:
        return AppliedEffect(
            tick=tick, rule=rule, parameter="enabled", target="*",
            before=frozenset(before), after=frozenset(before),
            error="directive would empty the enabled set",
        )
    event = kb.set_enabled(target, at)
    return AppliedEffect(
        tick=tick, rule=rule, parameter="enabled", target="*",
        before=event.before, after=event.after,
    )


def _conflict_key(action: Action):
    if isinstance(action, (ChangeRateProportional, ChangeRateTo)):
        return ("rate", action.indicator)
    return ("enabled",)


def execute(queue: Sequence[PlannedAction], kb: KnowledgeBase, at: float) -> List[AppliedEffect]:
    """Apply a planned-action queue to the peer configuration.

    Proportional rate changes resolve the indicator's dominant stability
    state (stable if present, else unstable) and its streak at execution
    time, then interpolate with compute_indicator_rate.
    """
    effects: List[AppliedEffect] = []
    claimed = set()
    tick = kb.tick
    for planned in queue:
        action = planned.action
        key = _conflict_key(action)
        if key in claimed:
            effects.append(
                AppliedEffect(
                    tick=tick, rule=planned.rule, parameter=key[0],
                    target=key[1] if len(key) > 1 else "*",
                    discarded=True,
                )
            )
            logger.debug("tick %d: discarded conflicting action from '%s' on %s",
                         tick, planned.rule, key)
            continue
        claimed.add(key)
        if isinstance(action, ChangeRateTo):
            effects.append(
                apply_change_rate(kb, action.indicator, action.seconds, at, tick, planned.rule)
            )
        elif isinstance(action, ChangeRateProportional):
            effects.append(
                _apply_proportional(kb, action.indicator, at, tick, planned.rule)
            )
        else:
            effects.append(
                apply_select_indicators(kb, action, at, tick, planned.rule)
            )
    return effects


def _apply_proportional(
    kb: KnowledgeBase, name: str, at: float, tick: int, rule: str
) -> AppliedEffect:
    if not kb.is_registered(name):
        return AppliedEffect(
            tick=tick, rule=rule, parameter="rate", target=name,
            error=f"unknown indicator '{name}'",
        )
    latest = kb.latest_states(name) or frozenset()
    dominant = (
        LogicalState.STABLE
        if LogicalState.STABLE in latest
        else LogicalState.UNSTABLE
    )
    run = streak(kb.state_history(name), dominant)
    interval = compute_indicator_rate(
        dominant, run, kb.config.bounds, kb.state_configs[name].k
    )
    return apply_change_rate(kb, name, interval, at, tick, rule)
