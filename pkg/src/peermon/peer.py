"""Follower and Leader peer roles.

A Follower owns a knowledge base and runs the full control loop: probe due
indicators, classify, plan, execute, then forward aggregated reports to its
Leader subject to the differential-update gate. A Leader keeps the freshest
aggregate per (origin, indicator) and periodically exchanges its store with
other Leaders.

Both roles are transport-agnostic: they consume decoded messages and timer
callbacks and return ``(destination, message)`` pairs. Each peer is one
logical sequential loop; nothing here is safe for concurrent mutation.
"""

from __future__ import annotations

import logging
import statistics
from random import Random
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Set, Tuple

from .adaptation import AppliedEffect, execute
from .core import IndicatorKind, KnowledgeBase, Sample, Value
from .messages import Bye, Gossip, GossipEntry, Message, Register, Report
from .rules import RuleSet, plan_tick
from .states import analyze

logger = logging.getLogger(__name__)

Outbound = Tuple[str, Message]
ProbeFn = Callable[[float], Value]

_DUE_EPS = 1e-9


def aggregate_window(values: Sequence[float]) -> Tuple[float, float, int]:
    """Arithmetic mean and population variance of a sample window."""
    if not values:
        raise ValueError("cannot aggregate an empty window")
    mean = statistics.fmean(values)
    var = statistics.pvariance(values, mu=mean)
    return mean, var, len(values)


def _relative_change_exceeds(current: float, previous: float, sensitivity: float) -> bool:
    # A zero baseline makes the relative rule undefined; compare the absolute
    # change against the sensitivity itself instead.
    if previous == 0:
        return abs(current - previous) > sensitivity
    return abs(current - previous) / abs(previous) > sensitivity


def should_report(
    current: Tuple[float, float],
    last_sent: Optional[Tuple[float, float]],
    sensitivity: Optional[float],
) -> bool:
    """Differential-update gate.

    True if nothing was ever sent, if suppression is disabled
    (sensitivity None), or if mean or variance moved by more than the
    sensitivity fraction relative to the last report actually sent.
    """
    if last_sent is None:
        return True
    if sensitivity is None:
        return True
    mean, var = current
    last_mean, last_var = last_sent
    return _relative_change_exceeds(mean, last_mean, sensitivity) or _relative_change_exceeds(
        var, last_var, sensitivity
    )


class FollowerNode:
    """Lower-tier peer: probes indicators and pushes reports to one Leader.

    ``probes`` maps indicator names to callables invoked with the current
    virtual time. In static mode (``adaptive=False``) the plan/execute phases
    are skipped entirely and intervals never change.
    """

    def __init__(
        self,
        node_id: str,
        kb: KnowledgeBase,
        probes: Mapping[str, ProbeFn],
        leader: str,
        rules: Optional[RuleSet] = None,
        adaptive: bool = True,
    ):
        self.node_id = node_id
        self.kb = kb
        self.probes = dict(probes)
        self.leader = leader
        self.rules = rules
        self.adaptive = adaptive
        self.next_due: Dict[str, float] = {}
        self.effects: List[AppliedEffect] = []
        # full probe history, unaffected by knowledge-base retention
        self.sample_trace: List[Tuple[float, str, Value]] = []
        self.sent_reports: List[Report] = []

    def start(self, now: float) -> List[Outbound]:
        """Register with the Leader and make every enabled indicator due now."""
        for name in self.kb.config.enabled:
            self.next_due[name] = now
        return [(self.leader, Register(node=self.node_id, role="follower"))]

    def next_wakeup(self) -> Optional[float]:
        pending = [t for name, t in self.next_due.items() if name in self.kb.config.enabled]
        return min(pending) if pending else None

    def on_wakeup(self, now: float) -> List[Outbound]:
        """Run one probe cycle at virtual time ``now``.

        Probes every due indicator, classifies it, then runs one plan/execute
        tick over the whole knowledge base. Executed actions affect the next
        cycle's scheduling, and a report is only emitted for indicators still
        enabled after execution.
        """
        kb = self.kb
        due = [
            name
            for name in sorted(kb.config.enabled)
            if self.next_due.get(name, float("inf")) <= now + _DUE_EPS
        ]
        probed = []
        for name in due:
            try:
                value = self.probes[name](now)
            except Exception:
                logger.warning("probe for '%s' failed at t=%s; skipping this cycle",
                               name, now, exc_info=True)
                continue
            kb.append(name, Sample(timestamp=now, value=value))
            self.sample_trace.append((now, name, value))
            analyze(kb, name)
            probed.append(name)

        kb.tick += 1
        if self.adaptive and self.rules is not None:
            queue = plan_tick(self.rules, kb)
            self.effects.extend(execute(queue, kb, now))

        out: List[Outbound] = []
        enabled = kb.config.enabled
        for name in probed:
            if name not in enabled:
                continue
            # categorical indicators feed states and rules but have no
            # mean/variance to report
            if kb.indicator(name).kind is not IndicatorKind.NUMERICAL:
                continue
            values = [s.value for s in kb.recent(name, kb.config.window)]
            mean, var, n = aggregate_window(values)
            if should_report((mean, var), kb.last_sent.get(name), kb.config.sensitivity):
                report = Report(
                    node=self.node_id, indicator=name, ts=now, mean=mean, var=var, n=n
                )
                kb.last_sent[name] = (mean, var)
                self.sent_reports.append(report)
                out.append((self.leader, report))

        # Reschedule with post-execution intervals; drop disabled indicators
        # and pick up newly re-enabled ones.
        for name in due:
            if name in enabled:
                self.next_due[name] = now + kb.config.intervals[name]
        for name in list(self.next_due):
            if name not in enabled:
                del self.next_due[name]
        for name in enabled:
            if name not in self.next_due:
                self.next_due[name] = now + kb.config.intervals[name]
        return out

    def stop(self) -> List[Outbound]:
        return [(self.leader, Bye(node=self.node_id))]


class LeaderStore:
    """Freshest aggregate per (origin node, indicator) plus a reception log."""

    def __init__(self) -> None:
        self.entries: Dict[Tuple[str, str], GossipEntry] = {}
        self.reception_log: List[Tuple[float, Report]] = []

    def handle_report(self, report: Report, arrival: float) -> None:
        """Log the report; replace the stored entry only if strictly newer."""
        self.reception_log.append((arrival, report))
        key = (report.node, report.indicator)
        current = self.entries.get(key)
        if current is not None and report.ts <= current.ts:
            return
        self.entries[key] = GossipEntry(
            origin=report.node,
            indicator=report.indicator,
            ts=report.ts,
            mean=report.mean,
            var=report.var,
            n=report.n,
        )

    def snapshot(self) -> Tuple[GossipEntry, ...]:
        """All entries in deterministic key order."""
        return tuple(self.entries[key] for key in sorted(self.entries))

    def copy(self) -> "LeaderStore":
        dup = LeaderStore()
        dup.entries = dict(self.entries)
        return dup

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, LeaderStore):
            return NotImplemented
        return self.entries == other.entries


def _entry_rank(entry: GossipEntry) -> Tuple[float, float, float, int]:
    return (entry.ts, entry.mean, entry.var, entry.n)


def merge_gossip(store: LeaderStore, entries: Sequence[GossipEntry]) -> None:
    """Newest-timestamp-wins merge per (origin, indicator).

    Ties on the timestamp fall back to the full (ts, mean, var, n) order so
    the merge is commutative, associative and idempotent for any inputs.
    """
    for entry in entries:
        key = (entry.origin, entry.indicator)
        current = store.entries.get(key)
        if current is None or _entry_rank(entry) > _entry_rank(current):
            store.entries[key] = entry


def gossip_round(
    store: LeaderStore,
    peers: Sequence[str],
    fanout: int,
    rng: Random,
    node: str = "",
) -> List[Outbound]:
    """Pick min(fanout, len(peers)) distinct peers uniformly via the seeded
    rng and send each the full entry set. Deterministic under a fixed seed."""
    if fanout < 1:
        raise ValueError(f"fanout must be >= 1, got {fanout}")
    if not peers:
        return []
    count = min(fanout, len(peers))
    chosen = rng.sample(sorted(peers), count)
    snapshot = store.snapshot()
    return [(peer, Gossip(node=node, entries=snapshot)) for peer in chosen]


class LeaderNode:
    """Upper-tier peer: aggregates Follower reports and gossips with other
    Leaders. Gossip is push-only full-state by default; setting
    ``reply_with_state`` upgrades it to push-pull anti-entropy (the contacted
    leader answers with its own store)."""

    def __init__(
        self,
        node_id: str,
        peers: Sequence[str] = (),
        fanout: int = 2,
        rng: Optional[Random] = None,
        reply_with_state: bool = False,
    ):
        self.node_id = node_id
        self.peers = [p for p in peers if p != node_id]
        self.fanout = fanout
        self.rng = rng if rng is not None else Random(0)
        self.reply_with_state = reply_with_state
        self.store = LeaderStore()
        self.followers: Set[str] = set()

    def on_message(self, msg: Message, now: float) -> List[Outbound]:
        if isinstance(msg, Register):
            self.followers.add(msg.node)
            return []
        if isinstance(msg, Report):
            self.store.handle_report(msg, now)
            return []
        if isinstance(msg, Gossip):
            merge_gossip(self.store, msg.entries)
            if self.reply_with_state and msg.node and msg.node != self.node_id:
                return [(msg.node, Gossip(node=self.node_id, entries=self.store.snapshot()))]
            return []
        if isinstance(msg, Bye):
            self.followers.discard(msg.node)
            return []
        raise TypeError(f"unhandled message: {msg!r}")

    def gossip_tick(self, now: float) -> List[Outbound]:
        return gossip_round(
            self.store, self.peers, self.fanout, self.rng, node=self.node_id
        )
