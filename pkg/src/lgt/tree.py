"""The evolving layered tree seen by an online traversal agent.

The tree grows one layer at a time.  Applying a layer inserts the newly
revealed nodes, then prunes every previous-layer leaf that received no
children together with its exclusive ancestor chain (the nodes whose only
active descendant was that leaf).  Pruned nodes stay in the node table,
marked inactive, so traces and transport computations can still refer to
them; only the active set shrinks.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

from .errors import MalformedInputError, TraversalTerminated

ROOT = 0


@dataclass(frozen=True)
class LayerUpdate:
    """One online revelation: the (child, parent) edges forming the next layer."""

    entries: tuple[tuple[int, int], ...]

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple((int(c), int(p)) for c, p in self.entries))


@dataclass(frozen=True)
class DeactivationRecord:
    """A pruned leaf together with the number of edges removed for it."""

    leaf: int
    d: int


class LayeredTree:
    """Mutable online tree: nodes, parents, layers, active set, prune counter.

    Single-writer: one tree instance is owned by one run.  Reads never
    mutate, so snapshots taken via :meth:`clone` are safe to share.
    """

    def __init__(self):
        self.parent: dict[int, int] = {}
        self.layer_of: dict[int, int] = {ROOT: 0}
        self.children: dict[int, list[int]] = {ROOT: []}
        self.active: set[int] = {ROOT}
        self.current_layer: int = 0
        self.deactivated_edges: int = 0
        self.max_layer_size: int = 1
        self._frontier: set[int] = {ROOT}

    # -- queries ------------------------------------------------------------

    @property
    def nodes(self) -> set[int]:
        return set(self.layer_of)

    def frontier(self) -> list[int]:
        """Active nodes of the current layer, ascending id."""
        return sorted(self._frontier)

    def is_active(self, u: int) -> bool:
        return u in self.active

    def active_children(self, u: int) -> list[int]:
        return [v for v in self.children[u] if v in self.active]

    def height_of(self, u: int) -> int:
        return self.current_layer - self.layer_of[u]

    def heights(self) -> dict[int, int]:
        """Height profile of the active tree: current layer minus node layer."""
        t = self.current_layer
        return {u: t - self.layer_of[u] for u in self.active}

    def subtree_leaf_counts(self) -> dict[int, int]:
        """Number of active current-layer descendants for every active node."""
        counts = {u: 0 for u in self.active}
        for u in self._frontier:
            counts[u] = 1
        for u in sorted(self.active, key=lambda v: -self.layer_of[v]):
            if u == ROOT:
                continue
            counts[self.parent[u]] += counts[u]
        return counts

    def active_by_layer_desc(self) -> list[int]:
        """Active nodes ordered so children always precede parents."""
        return sorted(self.active, key=lambda u: (-self.layer_of[u], u))

    def distance(self, u: int, v: int) -> int:
        """Number of edges on the tree path between two (possibly pruned) nodes."""
        du, dv = self.layer_of[u], self.layer_of[v]
        dist = 0
        while du > dv:
            u = self.parent[u]
            du -= 1
            dist += 1
        while dv > du:
            v = self.parent[v]
            dv -= 1
            dist += 1
        while u != v:
            u = self.parent[u]
            v = self.parent[v]
            dist += 2
        return dist

    def exclusive_chain_length(self, leaf: int) -> int:
        """Edges that would be deactivated if ``leaf`` died now (the paper's d)."""
        if leaf not in self._frontier:
            raise MalformedInputError(f"node {leaf} is not an active leaf")
        d = 1
        u = leaf
        while True:
            p = self.parent.get(u)
            if p is None:
                break
            if any(v != u and v in self.active for v in self.children[p]):
                break
            d += 1
            u = p
        return d

    # -- mutation -----------------------------------------------------------

    def reduce_to_tree(self, raw_entries: Iterable[tuple[int, Iterable[int]]]) -> LayerUpdate:
        """Reduce a raw layered-graph revelation to tree edges.

        Every child keeps exactly its first listed parent; the remaining
        parents are discarded.  All listed parents must be active nodes of
        the current layer.
        """
        entries = []
        for child, parents in raw_entries:
            parents = list(parents)
            if not parents:
                raise MalformedInputError(f"child {child} lists no parent")
            for p in parents:
                if p not in self._frontier:
                    raise MalformedInputError(
                        f"child {child} lists parent {p} outside the current layer"
                    )
            entries.append((child, parents[0]))
        return LayerUpdate(entries=tuple(entries))

    def apply_layer(self, update: LayerUpdate) -> list[DeactivationRecord]:
        """Insert the next layer, prune dead ends, and advance the clock.

        Returns one record per pruned leaf, in ascending leaf id.  Raises
        :class:`MalformedInputError` on an invalid update and
        :class:`TraversalTerminated` if no active leaf would remain.
        """
        entries = update.entries
        if not entries:
            raise MalformedInputError("layer update has no entries")
        new_layer = self.current_layer + 1
        seen: set[int] = set()
        for child, parent in entries:
            if child <= 0 or child in self.layer_of or child in seen:
                raise MalformedInputError(f"child id {child} is not fresh")
            if parent not in self._frontier:
                raise MalformedInputError(
                    f"parent {parent} is not an active node of layer {self.current_layer}"
                )
            seen.add(child)

        for child, parent in entries:
            self.layer_of[child] = new_layer
            self.parent[child] = parent
            self.children[child] = []
            self.children[parent].append(child)
            self.active.add(child)

        extended = {parent for _, parent in entries}
        records = []
        for leaf in sorted(self._frontier - extended):
            d = 0
            u = leaf
            while True:
                self.active.remove(u)
                d += 1
                p = self.parent.get(u)
                if p is None:
                    raise TraversalTerminated("the whole tree was deactivated")
                if any(v in self.active for v in self.children[p]):
                    break
                u = p
            records.append(DeactivationRecord(leaf=leaf, d=d))

        self.deactivated_edges += sum(r.d for r in records)
        self.current_layer = new_layer
        self._frontier = seen
        self.max_layer_size = max(self.max_layer_size, len(seen))
        if not self._frontier:
            raise TraversalTerminated("no active leaf remains")
        return records

    def clone(self) -> "LayeredTree":
        t = LayeredTree()
        t.parent = dict(self.parent)
        t.layer_of = dict(self.layer_of)
        t.children = {u: list(vs) for u, vs in self.children.items()}
        t.active = set(self.active)
        t.current_layer = self.current_layer
        t.deactivated_edges = self.deactivated_edges
        t.max_layer_size = self.max_layer_size
        t._frontier = set(self._frontier)
        return t

    def with_leaf_removed(self, leaf: int) -> "LayeredTree":
        """Copy of this tree with ``leaf`` and its exclusive chain pruned."""
        t = self.clone()
        d = 0
        u = leaf
        if leaf not in t._frontier:
            raise MalformedInputError(f"node {leaf} is not an active leaf")
        while True:
            t.active.remove(u)
            d += 1
            p = t.parent.get(u)
            if p is None:
                raise TraversalTerminated("removing the only leaf empties the tree")
            if any(v in t.active for v in t.children[p]):
                break
            u = p
        t._frontier.discard(leaf)
        t.deactivated_edges += d
        if not t._frontier:
            raise TraversalTerminated("removing the only leaf empties the tree")
        return t

    def check_invariants(self):
        """Raise AssertionError if any structural invariant is broken."""
        for u in self.layer_of:
            if u == ROOT:
                assert self.layer_of[u] == 0
                continue
            p = self.parent[u]
            assert self.layer_of[u] == self.layer_of[p] + 1, f"layer mismatch at {u}"
            assert u in self.children[p]
        for u in self.active:
            if u != ROOT:
                assert self.parent[u] in self.active, f"active set not parent-closed at {u}"
        frontier = {u for u in self.active if self.layer_of[u] == self.current_layer}
        assert frontier == self._frontier
        for u in self.active:
            if u not in self._frontier:
                assert self.active_children(u), f"active internal node {u} has no active child"
