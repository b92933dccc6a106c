"""Points of the active polytope, tree optimal transport, and couplings.

A configuration assigns every active node u a conditional probability
cond(u) = x_u / x_{p(u)} and, derived from those, an absolute subtree mass
x_u with x_root = 1.  Optimal transport between two configurations on the
same tree is the sum over non-root nodes of the absolute change in subtree
mass.  Couplings are built by a single bottom-up pass that cancels surplus
against deficit inside each subtree before exporting the residual through
the parent edge.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from random import Random
from typing import Mapping

from .errors import ContractError
from .tree import ROOT, LayeredTree

#: absolute masses below this are flushed to exactly zero for transport purposes
MASS_FLUSH = 1e-300

#: tolerance for constraint checks (marginals, flow conservation)
CHECK_TOL = 1e-9


@dataclass
class Configuration:
    """One point of the active polytope.

    ``cond`` maps each non-root support node to its conditional probability,
    ``mass`` maps every support node (root included) to its absolute subtree
    mass, and ``leaves`` lists the layer nodes carrying the distribution.
    Instances are never mutated after construction.
    """

    cond: dict[int, float]
    mass: dict[int, float]
    leaves: tuple[int, ...]

    @classmethod
    def root_only(cls) -> "Configuration":
        return cls(cond={}, mass={ROOT: 1.0}, leaves=(ROOT,))

    @classmethod
    def from_conditionals(cls, tree: LayeredTree, cond: Mapping[int, float]) -> "Configuration":
        """Derive absolute masses top-down over the active tree."""
        mass = {ROOT: 1.0}
        for u in sorted(tree.active, key=lambda v: tree.layer_of[v]):
            if u == ROOT:
                continue
            if u not in cond:
                raise ContractError(f"no conditional supplied for active node {u}")
            m = mass[tree.parent[u]] * cond[u]
            mass[u] = m if m >= MASS_FLUSH else 0.0
        return cls(cond=dict(cond), mass=mass, leaves=tuple(tree.frontier()))

    def leaf_distribution(self) -> dict[int, float]:
        return {u: self.mass[u] for u in self.leaves if self.mass[u] > 0.0}

    def validate(self, tree: LayeredTree, tol: float = CHECK_TOL):
        """Check polytope membership; raises ContractError on violation."""
        for u in tree.active:
            kids = tree.active_children(u)
            if not kids:
                continue
            s = sum(self.cond[v] for v in kids)
            if abs(s - 1.0) > tol:
                raise ContractError(f"conditionals under {u} sum to {s}")
            flow = sum(self.mass[v] for v in kids)
            if abs(flow - self.mass[u]) > tol:
                raise ContractError(f"flow constraint broken at {u}")
        for u in tree.active:
            if u == ROOT:
                continue
            if abs(self.mass[u] - self.mass[tree.parent[u]] * self.cond[u]) > tol:
                raise ContractError(f"mass inconsistent with conditional at {u}")


@dataclass
class TransportPlan:
    """A feasible leaf-to-leaf transport with its total cost."""

    moves: list[tuple[int, int, float]]
    cost: float
    _by_source: dict[int, tuple[list[int], list[float]]] = field(
        default=None, repr=False, compare=False
    )

    def mass_from(self, source: int) -> float:
        self._index()
        if source not in self._by_source:
            return 0.0
        return self._by_source[source][1][-1]

    def _index(self):
        if self._by_source is not None:
            return
        index: dict[int, tuple[list[int], list[float]]] = {}
        for src, tgt, m in self.moves:
            targets, cum = index.setdefault(src, ([], []))
            targets.append(tgt)
            cum.append(m if not cum else cum[-1] + m)
        self._by_source = index


def entropy_value(tree: LayeredTree, config: Configuration, heights: Mapping[int, float]) -> float:
    """Value of the entropic regularizer at ``config``.

    Computes the node-entropy form sum(x_u ln x_u) over non-root support and
    cross-checks it against the conditional form
    sum(h_{p(u)} x_u ln(x_u / x_{p(u)})); the two are an algebraic identity
    on the polytope and must agree to 1e-9.
    """
    for u in config.cond:
        hu, hp = heights[u], heights[tree.parent[u]]
        if hu < 0 or hp < hu or (hp == hu and hu != 0.0):
            raise ContractError(f"heights do not decrease from {tree.parent[u]} to {u}")

    node_form = 0.0
    for u, m in config.mass.items():
        if u != ROOT and m > 0.0:
            node_form += m * math.log(m)
    cond_form = 0.0
    for u, c in config.cond.items():
        m = config.mass[u]
        if m > 0.0 and c > 0.0:
            cond_form += heights[tree.parent[u]] * m * math.log(c)
    if abs(node_form - cond_form) > CHECK_TOL:
        raise ContractError(
            f"entropy expressions disagree: {node_form!r} vs {cond_form!r}"
        )
    depth = max(heights.values(), default=0.0)
    lower = -depth * math.log(max(len(config.leaves), 1))
    if node_form > CHECK_TOL or node_form < lower - CHECK_TOL:
        raise ContractError(f"entropy {node_form} outside [{lower}, 0]")
    return node_form


def ot_cost(config_a: Configuration, config_b: Configuration) -> float:
    """Tree optimal-transport cost: sum over edges of absolute mass change.

    Masses are extended by zero outside each configuration's support, so the
    two configurations may live on different layers of the same tree.
    """
    total = 0.0
    for u, m in config_a.mass.items():
        if u != ROOT:
            total += abs(config_b.mass.get(u, 0.0) - m)
    for u, m in config_b.mass.items():
        if u != ROOT and u not in config_a.mass:
            total += m
    return total


def ot_coupling(tree: LayeredTree, config_a: Configuration, config_b: Configuration) -> TransportPlan:
    """Build an optimal leaf-to-leaf coupling between consecutive configurations.

    One bottom-up pass over the union of supports: surplus (source mass) and
    deficit (target mass) parcels are cancelled inside each subtree, in
    ascending child id, and the residual is exported through the parent
    edge.  The resulting plan's cost equals :func:`ot_cost`.
    """
    mu = config_a.leaf_distribution()
    nu = config_b.leaf_distribution()
    if abs(sum(mu.values()) - sum(nu.values())) > CHECK_TOL:
        raise ContractError("marginals do not carry equal mass")

    involved: set[int] = set()
    for leaf in set(mu) | set(nu):
        u = leaf
        while u not in involved:
            involved.add(u)
            if u == ROOT:
                break
            u = tree.parent[u]
    kids: dict[int, list[int]] = {u: [] for u in involved}
    for u in involved:
        if u != ROOT:
            kids[tree.parent[u]].append(u)
    for vs in kids.values():
        vs.sort()

    layer = tree.layer_of
    moves: list[tuple[int, int, float]] = []
    cost = 0.0

    # post-order without recursion: instances may be thousands of layers deep
    order: list[int] = []
    stack = [ROOT]
    while stack:
        u = stack.pop()
        order.append(u)
        stack.extend(kids[u])
    pending: dict[int, tuple[list[list], list[list]]] = {}
    for u in reversed(order):
        surplus: list[list] = []  # [leaf, remaining mass], FIFO
        deficit: list[list] = []
        for v in kids[u]:
            s, d = pending.pop(v)
            surplus.extend(s)
            deficit.extend(d)
        if u in mu:
            surplus.append([u, mu[u]])
        if u in nu:
            deficit.append([u, nu[u]])
        si = di = 0
        while si < len(surplus) and di < len(deficit):
            src, avail = surplus[si]
            tgt, need = deficit[di]
            m = min(avail, need)
            if m > 0.0:
                moves.append((src, tgt, m))
                cost += m * (layer[src] + layer[tgt] - 2 * layer[u])
            surplus[si][1] = avail - m
            deficit[di][1] = need - m
            if surplus[si][1] <= 0.0:
                si += 1
            if deficit[di][1] <= 0.0:
                di += 1
        pending[u] = (surplus[si:], deficit[di:])

    leftover_s, leftover_d = pending.pop(ROOT)
    residue = sum(m for _, m in leftover_s) + sum(m for _, m in leftover_d)
    if residue > CHECK_TOL:
        raise ContractError(f"coupling left {residue} mass unmatched")
    return TransportPlan(moves=moves, cost=cost)


def sample_transition(plan: TransportPlan, current: int, rng: Random) -> int:
    """Sample the agent's next position given its current one.

    The target is drawn with probability proportional to the plan's mass
    moved out of ``current``.
    """
    plan._index()
    if current not in plan._by_source:
        raise ContractError(f"node {current} is not a source of the plan")
    targets, cum = plan._by_source[current]
    total = cum[-1]
    if total <= 0.0:
        raise ContractError(f"node {current} has no outgoing mass")
    r = rng.random() * total
    return targets[bisect.bisect_right(cum, r)] if r < total else targets[-1]
