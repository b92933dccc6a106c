"""The entropy-maximizing traversal policy and its potential function.

On every layer the policy adopts the configuration minimizing the tree
entropy sum(x_u ln x_u) over the active polytope.  The minimizer has a
closed form: weights y are computed bottom-up (leaves get exp(-gamma/h_p),
internal nodes get the h_u/h_{p(u)}-th power of their children's sum) and
each conditional is the node's weight over its siblings' total.  Movement
is charged as the optimal-transport cost between consecutive
configurations, and the run is monitored against the potential

    4 L(t) / w  +  4 ln(w) Phi_t(x(t))  +  6 (1 + ln w)^2 t.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

from .configuration import Configuration, ot_cost
from .errors import ContractError
from .tree import ROOT, LayeredTree

#: weights below this are clamped so extreme gamma values cannot underflow to 0
WEIGHT_FLOOR = 1e-300


def _check_heights(tree: LayeredTree, heights: Mapping[int, float], gamma: Mapping[int, float]):
    frontier = set(tree.frontier())
    for u in tree.active:
        h = heights.get(u)
        if h is None:
            raise ContractError(f"no height for active node {u}")
        if not math.isfinite(h) or h < 0:
            raise ContractError(f"invalid height {h} at node {u}")
        if u == ROOT:
            continue
        hp = heights[tree.parent[u]]
        if u in frontier:
            if hp < h or (hp == h and (h != 0.0 or gamma.get(u, 0.0) != 0.0)):
                raise ContractError(f"height profile degenerate at leaf {u}")
        elif hp <= h:
            raise ContractError(f"heights not decreasing at internal node {u}")


def explicit_argmin(
    tree: LayeredTree,
    heights: Mapping[int, float] | None = None,
    gamma: Mapping[int, float] | None = None,
) -> tuple[Configuration, dict[int, float]]:
    """Closed-form minimizer of the entropic objective plus a leaf bias.

    Minimizes sum(h_{p(u)} x_u ln(x_u/x_{p(u)})) + sum(gamma_l x_l) over the
    active polytope.  Returns the configuration and the recursion weights y
    (for every active non-root node).  With gamma = 0 every weight lies in
    [1, |leaves under the node|].
    """
    if heights is None:
        heights = tree.heights()
    gamma = dict(gamma) if gamma else {}
    frontier = set(tree.frontier())
    if not set(gamma) <= frontier:
        raise ContractError("gamma must be supported on active leaves")
    _check_heights(tree, heights, gamma)

    if tree.current_layer == 0:
        return Configuration.root_only(), {}

    y: dict[int, float] = {}
    sums: dict[int, float] = {}
    for u in tree.active_by_layer_desc():
        if u in frontier:
            g = gamma.get(u, 0.0)
            if g == 0.0:
                yu = 1.0
            else:
                hp = heights[tree.parent[u]]
                if hp <= 0.0:
                    raise ContractError(f"leaf {u} has bias {g} but parent height 0")
                yu = max(math.exp(-g / hp), WEIGHT_FLOOR)
        else:
            s = 0.0
            for v in tree.children[u]:
                if v in tree.active:
                    s += y[v]
            sums[u] = s
            if u == ROOT:
                continue
            h = heights[u]
            yu = 1.0 if h == 0.0 else max(s ** (h / heights[tree.parent[u]]), WEIGHT_FLOOR)
        y[u] = yu

    cond: dict[int, float] = {}
    for u in y:
        cond[u] = y[u] / sums[tree.parent[u]]
    return Configuration.from_conditionals(tree, cond), y


@dataclass(frozen=True)
class PotentialBreakdown:
    """The three potential terms and their sum."""

    deactivation_term: float
    entropy_term: float
    time_term: float
    total: float


def potential(tree: LayeredTree, config: Configuration, declared_width: int) -> PotentialBreakdown:
    """Evaluate the potential at the current layer for a declared width."""
    if declared_width < tree.max_layer_size:
        raise ContractError(
            f"declared width {declared_width} below observed layer size {tree.max_layer_size}"
        )
    log_w = math.log(declared_width)
    phi = 0.0
    for u, m in config.mass.items():
        if u != ROOT and m > 0.0:
            phi += m * math.log(m)
    deactivation = 4.0 * tree.deactivated_edges / declared_width
    entropy = 4.0 * log_w * phi
    time = 6.0 * (1.0 + log_w) ** 2 * tree.current_layer
    return PotentialBreakdown(
        deactivation_term=deactivation,
        entropy_term=entropy,
        time_term=time,
        total=deactivation + entropy + time,
    )


class FractionalPolicy:
    """Interface shared by all fractional policies.

    A policy proposes a configuration for the tree's current layer; the step
    cost is the optimal-transport distance from the previous configuration
    (pruned nodes keep their old mass and carry mass zero in the new one).
    """

    kind = "abstract"

    def __init__(self):
        self.config: Configuration | None = None

    def start(self, tree: LayeredTree) -> Configuration:
        if tree.current_layer != 0:
            raise ContractError("policies start on a fresh tree")
        self.config = Configuration.root_only()
        return self.config

    def propose(self, tree: LayeredTree) -> Configuration:
        raise NotImplementedError

    def step(self, tree: LayeredTree) -> tuple[Configuration, float]:
        new = self.propose(tree)
        cost = ot_cost(self.config, new)
        self.config = new
        return new, cost


class EntropicPolicy(FractionalPolicy):
    """The entropy-maximizing policy (integer heights, no leaf bias)."""

    kind = "entropic"

    def propose(self, tree: LayeredTree) -> Configuration:
        config, _ = explicit_argmin(tree)
        return config

    def potential(self, tree: LayeredTree, declared_width: int) -> PotentialBreakdown:
        return potential(tree, self.config, declared_width)
