"""Reference policies: deterministic DFS, random DFS, and uniform-on-leaves.

The fractional policies share the interface of the entropic policy and are
charged exact optimal-transport cost between consecutive configurations.
Deterministic DFS is a walking agent: it descends while its node has active
children and otherwise moves to the nearest active leaf, breaking ties by
smallest node id.
"""

from __future__ import annotations

from .configuration import Configuration
from .entropic import EntropicPolicy, FractionalPolicy
from .errors import ContractError, TraversalTerminated
from .tree import ROOT, LayeredTree

POLICY_KINDS = ("entropic", "dfs", "random_dfs", "uniform")


def random_dfs_conditionals(tree: LayeredTree) -> Configuration:
    """Fractional view of random DFS: each active child gets an equal share."""
    cond = {}
    for u in tree.active:
        kids = tree.active_children(u)
        if kids:
            share = 1.0 / len(kids)
            for v in kids:
                cond[v] = share
    return Configuration.from_conditionals(tree, cond)


def uniform_configuration(tree: LayeredTree) -> Configuration:
    """Uniform distribution on the active leaves; internal masses are subtree sums."""
    counts = tree.subtree_leaf_counts()
    if counts[ROOT] < 1:
        raise TraversalTerminated("no active leaf remains")
    cond = {}
    for u in tree.active:
        if u != ROOT:
            cond[u] = counts[u] / counts[tree.parent[u]]
    return Configuration.from_conditionals(tree, cond)


class RandomDfsPolicy(FractionalPolicy):
    kind = "random_dfs"

    def propose(self, tree: LayeredTree) -> Configuration:
        return random_dfs_conditionals(tree)


class UniformPolicy(FractionalPolicy):
    kind = "uniform"

    def propose(self, tree: LayeredTree) -> Configuration:
        return uniform_configuration(tree)


class DfsPolicy:
    """Deterministic depth-first walker.

    After each revealed layer the agent moves to the nearest active leaf of
    the new layer (ties broken by smallest node id); when its own node has
    active children this is simply the smallest-id child.  The step cost is
    the number of edges walked.
    """

    kind = "dfs"

    def __init__(self):
        self.position = ROOT

    def start(self, tree: LayeredTree) -> int:
        if tree.current_layer != 0:
            raise ContractError("policies start on a fresh tree")
        self.position = ROOT
        return self.position

    def step(self, tree: LayeredTree) -> tuple[int, int]:
        leaves = tree.frontier()
        if not leaves:
            raise TraversalTerminated("no active leaf remains")
        kids = [v for v in tree.children[self.position] if v in tree.active]
        if kids:
            target, cost = min(kids), 1
        else:
            target = min(leaves, key=lambda v: (tree.distance(self.position, v), v))
            cost = tree.distance(self.position, target)
        self.position = target
        return target, cost


def make_policy(kind: str):
    """Instantiate a policy by its tag."""
    policies = {
        "entropic": EntropicPolicy,
        "dfs": DfsPolicy,
        "random_dfs": RandomDfsPolicy,
        "uniform": UniformPolicy,
    }
    if kind not in policies:
        raise ContractError(f"unknown policy kind {kind!r}; expected one of {POLICY_KINDS}")
    return policies[kind]()
