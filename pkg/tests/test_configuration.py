import math
from random import Random

import pytest

from lgt.configuration import (
    Configuration,
    entropy_value,
    ot_cost,
    ot_coupling,
    sample_transition,
)
from lgt.entropic import explicit_argmin
from lgt.errors import ContractError
from lgt.tree import LayerUpdate
from lgt.verify import brute_force_ot, random_configuration, random_tree

from conftest import A, B, A1, A2, B1, build_chain, build_star2, build_t1, phi_of


def test_entropy_uniform_two_leaves(star2):
    config, _ = explicit_argmin(star2)
    value = entropy_value(star2, config, star2.heights())
    assert value == pytest.approx(2 * 0.5 * math.log(0.5), abs=1e-12)


def test_entropy_t1_optimum_closed_forms_agree(t1):
    config, _ = explicit_argmin(t1)
    value = entropy_value(t1, config, t1.heights())
    # frozen from the closed form; both expressions must agree inside entropy_value
    assert value == pytest.approx(-1.7627471740390859, abs=1e-9)


def test_entropy_chain_is_zero():
    chain = build_chain(4)
    config, _ = explicit_argmin(chain)
    assert entropy_value(chain, config, chain.heights()) == 0.0


def test_entropy_rejects_inconsistent_heights(t1):
    config, _ = explicit_argmin(t1)
    bad = t1.heights()
    bad[A] = 5  # higher than the root: not decreasing
    with pytest.raises(ContractError):
        entropy_value(t1, config, bad)


def test_ot_cost_star_swing(star2):
    half = Configuration(cond={1: 0.5, 2: 0.5}, mass={0: 1.0, 1: 0.5, 2: 0.5}, leaves=(1, 2))
    point = Configuration(cond={1: 1.0, 2: 0.0}, mass={0: 1.0, 1: 1.0, 2: 0.0}, leaves=(1, 2))
    assert ot_cost(half, point) == pytest.approx(1.0)
    assert ot_cost(half, half) == 0.0


def test_ot_cost_t1_to_pruned_optimum(t1):
    before, _ = explicit_argmin(t1)
    pruned = Configuration(
        cond={A: 1.0, A1: 0.5, A2: 0.5},
        mass={0: 1.0, A: 1.0, A1: 0.5, A2: 0.5},
        leaves=(A1, A2),
    )
    assert ot_cost(before, pruned) == pytest.approx(4 * (math.sqrt(2) - 1), abs=1e-9)


def test_ot_cost_step_with_branch_death(t1):
    before, _ = explicit_argmin(t1)
    t1.apply_layer(LayerUpdate(entries=((10, A1), (11, A2))))
    after, _ = explicit_argmin(t1)
    # b and b1 die, survivors rebalance, and all mass descends one layer
    assert ot_cost(before, after) == pytest.approx(4 * (math.sqrt(2) - 1) + 1.0, abs=1e-9)


def test_ot_coupling_star_collapse():
    tree = build_star2()
    mu, _ = explicit_argmin(tree)
    tree.apply_layer(LayerUpdate(entries=((3, 1),)))
    nu, _ = explicit_argmin(tree)
    plan = ot_coupling(tree, mu, nu)
    assert plan.moves == [(1, 3, 0.5), (2, 3, 0.5)]
    assert plan.cost == pytest.approx(0.5 * 1 + 0.5 * 3)
    assert plan.cost == pytest.approx(ot_cost(mu, nu), abs=1e-9)


def test_ot_coupling_identical_marginals_is_empty(t1):
    config, _ = explicit_argmin(t1)
    plan = ot_coupling(t1, config, config)
    assert plan.moves == [] and plan.cost == 0.0


def test_ot_coupling_chain_step():
    chain = build_chain(3)
    mu, _ = explicit_argmin(chain)
    chain.apply_layer(LayerUpdate(entries=((4, 3),)))
    nu, _ = explicit_argmin(chain)
    plan = ot_coupling(chain, mu, nu)
    assert plan.moves == [(3, 4, 1.0)] and plan.cost == 1.0


def test_ot_coupling_rejects_marginal_mismatch(t1):
    config, _ = explicit_argmin(t1)
    short = Configuration(
        cond={A: 0.5, B: 0.5}, mass={0: 0.9, A: 0.45, B: 0.45}, leaves=(A, B)
    )
    with pytest.raises(ContractError):
        ot_coupling(t1, short, config)


def test_ot_cost_between_consecutive_layers_at_least_one():
    rng = Random(4)
    for _ in range(20):
        tree = random_tree(rng, max_width=5, depth=6)
        mu = random_configuration(rng, tree)
        entries = tuple((1000 + i, u) for i, u in enumerate(tree.frontier()))
        tree.apply_layer(LayerUpdate(entries=entries))
        nu = random_configuration(rng, tree)
        assert ot_cost(mu, nu) >= 1.0 - 1e-12


def test_ot_triangle_inequality():
    rng = Random(5)
    for _ in range(30):
        tree = random_tree(rng, max_width=6, depth=6)
        a, b, c = (random_configuration(rng, tree) for _ in range(3))
        assert ot_cost(a, c) <= ot_cost(a, b) + ot_cost(b, c) + 1e-12


def test_entropy_identity_on_random_configurations():
    rng = Random(6)
    for _ in range(50):
        tree = random_tree(rng, max_width=6, depth=8)
        config = random_configuration(rng, tree)
        heights = tree.heights()
        node_form = phi_of(config)
        cond_form = sum(
            heights[tree.parent[u]] * config.mass[u] * math.log(c)
            for u, c in config.cond.items()
        )
        assert abs(node_form - cond_form) <= 1e-10


def test_coupling_cost_matches_brute_force_small_trees():
    rng = Random(7)
    checked = 0
    while checked < 25:
        tree = random_tree(rng, max_width=4, depth=5)
        if len(tree.frontier()) > 8:
            continue
        mu = random_configuration(rng, tree)
        entries = tuple((2000 + i, u) for i, u in enumerate(tree.frontier()))
        tree.apply_layer(LayerUpdate(entries=entries))
        nu = random_configuration(rng, tree)
        plan = ot_coupling(tree, mu, nu)
        assert plan.cost == pytest.approx(brute_force_ot(tree, mu, nu), abs=1e-8)
        checked += 1


def test_coupling_marginals_are_exact(t1):
    before, _ = explicit_argmin(t1)
    t1.apply_layer(LayerUpdate(entries=((10, A1), (11, B1))))
    after, _ = explicit_argmin(t1)
    plan = ot_coupling(t1, before, after)
    out = {}
    into = {}
    for src, tgt, m in plan.moves:
        out[src] = out.get(src, 0.0) + m
        into[tgt] = into.get(tgt, 0.0) + m
    for leaf, m in before.leaf_distribution().items():
        assert out.get(leaf, 0.0) == pytest.approx(m, abs=1e-9)
    for leaf, m in after.leaf_distribution().items():
        assert into.get(leaf, 0.0) == pytest.approx(m, abs=1e-9)


def test_sample_transition_single_target():
    from lgt.configuration import TransportPlan

    plan = TransportPlan(moves=[(1, 3, 0.5), (2, 3, 0.5)], cost=2.0)
    assert sample_transition(plan, 2, Random(0)) == 3


def test_sample_transition_proportional():
    from lgt.configuration import TransportPlan

    plan = TransportPlan(moves=[(1, 10, 0.3), (1, 11, 0.1)], cost=0.0)
    rng = Random(123)
    draws = 100_000
    hits = sum(1 for _ in range(draws) if sample_transition(plan, 1, rng) == 10)
    p = 0.75
    sigma = math.sqrt(p * (1 - p) / draws)
    assert abs(hits / draws - p) <= 3 * sigma


def test_sample_transition_unknown_source():
    from lgt.configuration import TransportPlan

    plan = TransportPlan(moves=[(1, 10, 0.3)], cost=0.0)
    with pytest.raises(ContractError):
        sample_transition(plan, 99, Random(0))


def test_configuration_validate_catches_bad_flow(t1):
    config, _ = explicit_argmin(t1)
    broken = Configuration(cond=dict(config.cond), mass=dict(config.mass), leaves=config.leaves)
    broken.mass[A] = 0.9
    with pytest.raises(ContractError):
        broken.validate(t1)
    config.validate(t1)
