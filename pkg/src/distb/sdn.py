"""Match-action flow tables, flood detection, and source blocking.

Actions are plain tuples: ("forward", next_hop), ("drop",), and the table
default ("controller",) meaning punt to the control plane. Lookup picks the
highest-priority matching rule, breaking ties by earliest installed_at and
then by rule position, so it is fully deterministic.

Flood detection is a sliding-window rate check: a source whose packet count
over the last `window_ms` exceeds the controller's threshold is a suspect.
Blocking installs a maximal-priority drop rule and records the source in the
controller's blocked set.

Controller state belongs to whoever drives the event loop; mutations are
sequential per controller, and distinct controllers are independent.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass, field

FORWARD_TO_CONTROLLER = ("controller",)
DROP = ("drop",)
BLOCK_PRIORITY = 2**31 - 1


def forward(next_hop: str) -> tuple:
    return ("forward", next_hop)


@dataclass(frozen=True)
class Packet:
    src: str
    dst: str
    size: int
    kind: str  # sensor-data | file-chunk | attack
    created_at: int  # simulated ms


@dataclass(frozen=True)
class Match:
    """Exact-match predicate; None fields are wildcards."""

    src: str | None = None
    dst: str | None = None
    kind: str | None = None

    def covers(self, pkt: Packet) -> bool:
        return (
            (self.src is None or self.src == pkt.src)
            and (self.dst is None or self.dst == pkt.dst)
            and (self.kind is None or self.kind == pkt.kind)
        )


@dataclass(frozen=True)
class FlowRule:
    match: Match
    action: tuple
    priority: int
    installed_at: int = 0


@dataclass
class FlowTable:
    rules: list[FlowRule] = field(default_factory=list)
    default_action: tuple = FORWARD_TO_CONTROLLER


@dataclass
class SlidingWindow:
    """Per-source arrival counts over a sliding window of `window_ms`."""

    window_ms: int = 200
    buckets: dict[str, list[tuple[int, int]]] = field(default_factory=dict)

    def record(self, src: str, at: int, count: int = 1) -> None:
        self.buckets.setdefault(src, []).append((at, count))
        self._trim(src, at)

    def count(self, src: str, now: int) -> int:
        entries = self.buckets.get(src, [])
        lo = now - self.window_ms
        return sum(c for t, c in entries if lo < t <= now)

    def sources(self) -> list[str]:
        return sorted(self.buckets)

    def _trim(self, src: str, now: int) -> None:
        lo = now - 4 * self.window_ms
        entries = self.buckets[src]
        if entries and entries[0][0] < lo:
            self.buckets[src] = [(t, c) for t, c in entries if t >= lo]


@dataclass
class ControllerState:
    id: int
    flow_table: FlowTable = field(default_factory=FlowTable)
    traffic_window: SlidingWindow = field(default_factory=SlidingWindow)
    blocked: set[str] = field(default_factory=set)
    flood_threshold: float = 10.0  # packets per window


def match_packet(table: FlowTable, pkt: Packet) -> tuple:
    """Action of the best matching rule, or the table default.

    Best = max priority; ties go to the earliest installed_at, then to the
    earliest position in the rule list.
    """
    best = None
    best_key = None
    for pos, rule in enumerate(table.rules):
        if not rule.match.covers(pkt):
            continue
        key = (-rule.priority, rule.installed_at, pos)
        if best_key is None or key < best_key:
            best, best_key = rule, key
    return best.action if best is not None else table.default_action


def install_rule(table: FlowTable, rule: FlowRule) -> bool:
    """Append a rule to a table unless an exact duplicate (same match, action,
    priority) is already present. Returns True when the table changed."""
    for existing in table.rules:
        if (
            existing.match == rule.match
            and existing.action == rule.action
            and existing.priority == rule.priority
        ):
            return False
    table.rules.append(rule)
    return True


def install_flow_rule(ctrl: ControllerState, rule: FlowRule) -> ControllerState:
    """Append a rule to the controller's table; exact duplicates are a no-op."""
    install_rule(ctrl.flow_table, rule)
    return ctrl


def detect_flood(ctrl: ControllerState, now: int) -> list[str]:
    """Sources whose count over the last window exceeds the threshold. Pure query."""
    return [
        src
        for src in ctrl.traffic_window.sources()
        if ctrl.traffic_window.count(src, now) > ctrl.flood_threshold
    ]


def block_flow(ctrl: ControllerState, src: str, now: int = 0) -> ControllerState:
    """Block a source: remember it and install a maximal-priority drop rule."""
    if src in ctrl.blocked:
        return ctrl
    ctrl.blocked.add(src)
    install_rule(
        ctrl.flow_table,
        FlowRule(match=Match(src=src), action=DROP, priority=BLOCK_PRIORITY, installed_at=now),
    )
    return ctrl


def controller_index(src: str, n_controllers: int) -> int:
    """Stable source -> controller partition (seed-independent)."""
    return zlib.crc32(src.encode("utf-8")) % n_controllers


def flow_table_to_dict(table: FlowTable) -> dict:
    return {
        "default_action": list(table.default_action),
        "rules": [
            {
                "match": {"src": r.match.src, "dst": r.match.dst, "kind": r.match.kind},
                "action": list(r.action),
                "priority": r.priority,
                "installed_at": r.installed_at,
            }
            for r in table.rules
        ],
    }
