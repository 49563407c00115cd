"""Link-reversal height algebra for destination-oriented routing.

Every node carries a five-part height (tau, oid, r, delta, node) that orders
it relative to one destination. Links point from the higher endpoint to the
lower one, the destination holds the all-zero height and is the unique sink
of the resulting DAG. A height may also be NULL, meaning the node holds no
route opinion yet; NULL orders above every concrete height so an
undiscovered node never attracts traffic.

Everything here is pure state algebra: comparison, link classification, the
reaction cases a node runs when it loses its last downstream link, and the
erasure transition driven by clear packets. No I/O, no clocks, no RNG.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

LESS, EQUAL, GREATER = -1, 0, 1


class Direction(Enum):
    """Orientation of a link as seen from the owning node."""

    UP = "up"
    DN = "dn"
    UN = "un"


class Trigger(Enum):
    """Why a node lost its last downstream link."""

    LINK_FAILURE = "link_failure"
    UPD_REVERSAL = "upd_reversal"


class MaintenanceCase(Enum):
    GENERATE = "generate"
    PROPAGATE = "propagate"
    REFLECT = "reflect"
    DETECT_PARTITION = "detect_partition"
    GENERATE_NO_REACTION = "generate_no_reaction"


class BroadcastKind(Enum):
    UPD = "upd"
    CLR = "clr"
    NONE = "none"


@dataclass(frozen=True)
class Height:
    """Ordering tag of one node relative to one destination.

    Either all of (tau, oid, r, delta) are None (a NULL height) or none are.
    The (tau, oid, r) prefix is the reference level; (delta, node) orders
    nodes within a level. ``node`` is always the owning node's id.
    """

    tau: float | None
    oid: int | None
    r: int | None
    delta: int | None
    node: int

    def __post_init__(self) -> None:
        missing = sum(p is None for p in (self.tau, self.oid, self.r, self.delta))
        if missing not in (0, 4):
            raise ValueError(f"height must be fully NULL or fully set: {self!r}")
        if self.r is not None and self.r not in (0, 1):
            raise ValueError(f"reflection bit must be 0 or 1, got {self.r!r}")

    @classmethod
    def null(cls, node: int) -> "Height":
        return cls(None, None, None, None, node)

    @classmethod
    def zero(cls, node: int) -> "Height":
        return cls(0.0, 0, 0, 0, node)

    @property
    def is_null(self) -> bool:
        return self.tau is None

    @property
    def level(self) -> tuple[float, int, int] | None:
        """Reference level (tau, oid, r), or None for a NULL height."""
        if self.is_null:
            return None
        return (self.tau, self.oid, self.r)

    def sort_key(self) -> tuple:
        # NULL sorts strictly above every concrete height; all NULLs tie.
        if self.is_null:
            return (1, 0.0, 0, 0, 0, 0)
        return (0, self.tau, self.oid, self.r, self.delta, self.node)


def compare_heights(a: Height, b: Height) -> int:
    """Total order over heights: LESS (-1), EQUAL (0) or GREATER (1).

    Concrete heights compare lexicographically on (tau, oid, r, delta,
    node); a NULL height is greater than any concrete one and all NULL
    heights compare equal regardless of owner.
    """
    ka, kb = a.sort_key(), b.sort_key()
    if ka < kb:
        return LESS
    if ka > kb:
        return GREATER
    return EQUAL


def classify_link(own: Height, neighbor: Height) -> Direction:
    """Direction of the link from a node with height ``own`` to ``neighbor``.

    A NULL neighbor is undirected. A node with a NULL height sees any
    concrete neighbor as downstream (the neighbor is considered lower).
    """
    if neighbor.is_null:
        return Direction.UN
    if own.is_null:
        return Direction.DN
    cmp = compare_heights(neighbor, own)
    if cmp == LESS:
        return Direction.DN
    if cmp == GREATER:
        return Direction.UP
    return Direction.UN


@dataclass
class LinkState:
    """Per-neighbor mirror of the last height heard, plus link direction."""

    neighbor: int
    mirrored_height: Height
    direction: Direction


@dataclass
class NodeToraState:
    """One node's routing state toward one destination."""

    node: int
    destination: int
    links: dict[int, LinkState] = field(default_factory=dict)
    route_required: bool = False
    own_height: Height = field(init=False)

    def __post_init__(self) -> None:
        if self.node == self.destination:
            self.own_height = Height.zero(self.node)
        else:
            self.own_height = Height.null(self.node)

    def add_link(self, neighbor: int) -> None:
        """Register a new neighbor; a destination neighbor mirrors zero."""
        if neighbor in self.links:
            return
        if neighbor == self.destination:
            mirror = Height.zero(neighbor)
        else:
            mirror = Height.null(neighbor)
        self.links[neighbor] = LinkState(
            neighbor, mirror, classify_link(self.own_height, mirror)
        )

    def remove_link(self, neighbor: int) -> None:
        self.links.pop(neighbor, None)

    def set_mirror(self, neighbor: int, height: Height) -> None:
        if neighbor not in self.links:
            self.add_link(neighbor)
        ls = self.links[neighbor]
        ls.mirrored_height = height
        ls.direction = classify_link(self.own_height, height)

    def set_own_height(self, height: Height) -> None:
        if self.node == self.destination and height != Height.zero(self.node):
            raise ValueError("the destination's height is immutable")
        self.own_height = height
        for ls in self.links.values():
            ls.direction = classify_link(self.own_height, ls.mirrored_height)

    def concrete_mirrors(self) -> list[Height]:
        return [
            ls.mirrored_height
            for _, ls in sorted(self.links.items())
            if not ls.mirrored_height.is_null
        ]

    def has_upstream(self) -> bool:
        return any(ls.direction is Direction.UP for ls in self.links.values())


def has_downstream(state: NodeToraState) -> bool:
    """True iff some concrete-height neighbor sits strictly below the node."""
    return any(ls.direction is Direction.DN for ls in state.links.values())


def new_height_on_reply(neighbor_heights: set[Height] | list[Height], own_id: int) -> Height:
    """Height adopted when joining the DAG: just above the lowest neighbor.

    Carries the reference level of the minimum concrete neighbor height and
    orders one delta step above it; the fifth component is the adopting
    node's own id.
    """
    concrete = [h for h in neighbor_heights if not h.is_null]
    if not concrete:
        raise ValueError("cannot adopt a height from all-NULL neighbors")
    low = min(concrete, key=Height.sort_key)
    return Height(low.tau, low.oid, low.r, low.delta + 1, own_id)


@dataclass(frozen=True)
class MaintenanceOutcome:
    """Result of running the reaction table after losing all downstream links."""

    case: MaintenanceCase
    new_height: Height
    broadcast: BroadcastKind


def maintenance_case(state: NodeToraState, trigger: Trigger, now: float) -> MaintenanceOutcome:
    """Decide the single reaction of a node with no remaining downstream link.

    Callers invoke this exactly when the node has just lost its last
    downstream link (the failed link already removed from ``state``); the
    node's own height is not yet modified. Cases, in order:

    * a plain link failure defines a fresh reference level, or goes NULL
      when nobody upstream would hear about it;
    * mixed neighbor reference levels propagate the highest one, ordering
      just below its lowest member;
    * a uniform unreflected level is reflected back with the r bit set;
    * a uniform reflected level that this node itself originated means the
      destination is unreachable: partition, erase routes;
    * a uniform reflected level someone else originated starts a fresh
      level here, with no further network-wide reaction implied.
    """
    if has_downstream(state):
        raise ValueError("maintenance invoked while a downstream link exists")
    me = state.node

    def generate() -> MaintenanceOutcome:
        if not state.has_upstream():
            return MaintenanceOutcome(
                MaintenanceCase.GENERATE, Height.null(me), BroadcastKind.NONE
            )
        return MaintenanceOutcome(
            MaintenanceCase.GENERATE, Height(now, me, 0, 0, me), BroadcastKind.UPD
        )

    if trigger is Trigger.LINK_FAILURE:
        return generate()

    mirrors = state.concrete_mirrors()
    if not mirrors:
        # Degenerate reversal with no concrete neighbors left; treat as a
        # fresh failure so the node either re-levels or goes NULL.
        return generate()

    levels = {h.level for h in mirrors}
    if len(levels) > 1:
        top = max(levels)
        floor = min(h.delta for h in mirrors if h.level == top)
        new = Height(top[0], top[1], top[2], floor - 1, me)
        return MaintenanceOutcome(MaintenanceCase.PROPAGATE, new, BroadcastKind.UPD)

    (tau, oid, r) = next(iter(levels))
    if r == 0:
        return MaintenanceOutcome(
            MaintenanceCase.REFLECT, Height(tau, oid, 1, 0, me), BroadcastKind.UPD
        )
    if oid == me:
        return MaintenanceOutcome(
            MaintenanceCase.DETECT_PARTITION, Height.null(me), BroadcastKind.CLR
        )
    return MaintenanceOutcome(
        MaintenanceCase.GENERATE_NO_REACTION, Height(now, me, 0, 0, me), BroadcastKind.UPD
    )


def apply_clr(
    state: NodeToraState, clr_reference_level: tuple[float, int, int]
) -> tuple[bool, list[int]]:
    """Apply a route-erasure packet carrying a reflected reference level.

    Mutates ``state`` in place. If the node's own reference level matches,
    its height and every neighbor mirror go NULL (a destination neighbor
    mirrors zero instead), and the erasure must be rebroadcast. Otherwise
    only the mirrors sharing the erased level are cleared.

    Returns (rebroadcast, neighbors whose mirror was reset).
    """
    affected: list[int] = []
    own_level = state.own_height.level
    if own_level == clr_reference_level and state.node != state.destination:
        state.own_height = Height.null(state.node)
        for j, ls in sorted(state.links.items()):
            if j == state.destination:
                ls.mirrored_height = Height.zero(j)
            else:
                ls.mirrored_height = Height.null(j)
            affected.append(j)
        for ls in state.links.values():
            ls.direction = classify_link(state.own_height, ls.mirrored_height)
        return True, affected

    for j, ls in sorted(state.links.items()):
        mirror = ls.mirrored_height
        if not mirror.is_null and mirror.level == clr_reference_level:
            ls.mirrored_height = Height.null(j)
            ls.direction = classify_link(state.own_height, ls.mirrored_height)
            affected.append(j)
    return False, affected
