import math

import pytest

from lgt.tree import LayeredTree, LayerUpdate

FIXTURES = "tests/fixtures"

# T1: root -> {a, b}, a -> {a1, a2}, b -> {b1}; ids 1, 2, 3, 4, 5
A, B, A1, A2, B1 = 1, 2, 3, 4, 5


def build_t1() -> LayeredTree:
    tree = LayeredTree()
    tree.apply_layer(LayerUpdate(entries=((A, 0), (B, 0))))
    tree.apply_layer(LayerUpdate(entries=((A1, A), (A2, A), (B1, B))))
    return tree


def build_chain(depth: int) -> LayeredTree:
    tree = LayeredTree()
    tip = 0
    for i in range(1, depth + 1):
        tree.apply_layer(LayerUpdate(entries=((i, tip),)))
        tip = i
    return tree


def build_star2() -> LayeredTree:
    """Two leaves under the root."""
    tree = LayeredTree()
    tree.apply_layer(LayerUpdate(entries=((1, 0), (2, 0))))
    return tree


@pytest.fixture
def t1():
    return build_t1()


@pytest.fixture
def star2():
    return build_star2()


def phi_of(config) -> float:
    return sum(m * math.log(m) for u, m in config.mass.items() if u != 0 and m > 0.0)
