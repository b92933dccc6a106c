import math
from random import Random

import pytest

from lgt.adversaries import gen_random, gen_star
from lgt.entropic import EntropicPolicy, explicit_argmin, potential
from lgt.errors import ContractError
from lgt.tree import LayeredTree, LayerUpdate
from lgt.verify import random_tree

from conftest import A, B, A1, A2, B1, build_chain, build_t1, phi_of

SQRT2 = math.sqrt(2)


def test_explicit_argmin_t1_closed_form(t1):
    config, weights = explicit_argmin(t1)
    assert weights[A] == pytest.approx(SQRT2, abs=1e-12)
    assert weights[B] == 1.0
    assert config.cond[A] == pytest.approx(SQRT2 / (1 + SQRT2), abs=1e-9)
    assert config.cond[B] == pytest.approx(1 / (1 + SQRT2), abs=1e-9)
    assert config.mass[A1] == pytest.approx(0.2928932, abs=1e-7)
    assert config.mass[A2] == pytest.approx(0.2928932, abs=1e-7)
    assert config.mass[B1] == pytest.approx(0.4142136, abs=1e-7)


def test_explicit_argmin_star_symmetry(star2):
    config, _ = explicit_argmin(star2)
    assert config.mass[1] == config.mass[2] == pytest.approx(0.5)


def test_explicit_argmin_star_with_bias(star2):
    config, _ = explicit_argmin(star2, None, {1: math.log(2)})
    assert config.mass[1] == pytest.approx(1 / 3, abs=1e-12)


def test_explicit_argmin_rejects_bias_off_leaf(t1):
    with pytest.raises(ContractError):
        explicit_argmin(t1, None, {A: 1.0})  # A is internal at t=2


def test_explicit_argmin_rejects_bad_heights(t1):
    heights = t1.heights()
    heights[A] = 3
    with pytest.raises(ContractError):
        explicit_argmin(t1, heights)


def test_explicit_argmin_rejects_bias_on_zero_height_parent():
    tree = build_t1()
    heights = {u: 0.0 if tree.layer_of[u] == 2 else (1 - tree.layer_of[u]) + 0.0 for u in tree.active}
    # growth profile at s=0: leaf parents sit at height 0
    with pytest.raises(ContractError):
        explicit_argmin(tree, heights, {A1: 1.0})


def test_step_costs_one_per_chain_layer():
    policy = EntropicPolicy()
    tree = LayeredTree()
    policy.start(tree)
    tip = 0
    for i in range(1, 101):
        tree.apply_layer(LayerUpdate(entries=((i, tip),)))
        _, cost = policy.step(tree)
        assert cost == pytest.approx(1.0, abs=1e-12)
        tip = i


def test_step_t1_from_symmetric_split(t1):
    policy = EntropicPolicy()
    fresh = LayeredTree()
    policy.start(fresh)
    fresh.apply_layer(LayerUpdate(entries=((A, 0), (B, 0))))
    _, cost1 = policy.step(fresh)
    assert cost1 == pytest.approx(1.0, abs=1e-12)
    fresh.apply_layer(LayerUpdate(entries=((A1, A), (A2, A), (B1, B))))
    _, cost2 = policy.step(fresh)
    assert cost2 == pytest.approx(1.1715729, abs=1e-6)


def test_step_branch_death_costs_at_least_its_mass(t1):
    policy = EntropicPolicy()
    fresh = LayeredTree()
    policy.start(fresh)
    fresh.apply_layer(LayerUpdate(entries=((A, 0), (B, 0))))
    policy.step(fresh)
    fresh.apply_layer(LayerUpdate(entries=((A1, A), (A2, A), (B1, B))))
    policy.step(fresh)
    dying_mass = policy.config.mass[B1]
    fresh.apply_layer(LayerUpdate(entries=((10, A1), (11, A2))))
    _, cost = policy.step(fresh)
    assert cost >= dying_mass - 1e-12


def test_potential_chain_w1():
    tree = build_chain(10)
    config, _ = explicit_argmin(tree)
    breakdown = potential(tree, config, 1)
    assert breakdown.total == pytest.approx(60.0)
    assert breakdown.entropy_term == 0.0
    assert breakdown.deactivation_term == 0.0


def test_potential_t1_breakdown(t1):
    config, _ = explicit_argmin(t1)
    breakdown = potential(t1, config, 3)
    phi = phi_of(config)
    assert breakdown.entropy_term == pytest.approx(4 * math.log(3) * phi, abs=1e-12)
    assert breakdown.time_term == pytest.approx(6 * (1 + math.log(3)) ** 2 * 2, abs=1e-12)
    # frozen from the closed forms above
    assert breakdown.total == pytest.approx(45.103779628928336, abs=1e-9)


def test_potential_counts_deactivated_edges(t1):
    t1.apply_layer(LayerUpdate(entries=((10, A1),)))  # kills a2 (d=1) and b1+b (d=2)
    config, _ = explicit_argmin(t1)
    breakdown = potential(t1, config, 3)
    assert breakdown.deactivation_term == pytest.approx(4 * 3 / 3)


def test_potential_rejects_small_declared_width(t1):
    config, _ = explicit_argmin(t1)
    with pytest.raises(ContractError):
        potential(t1, config, 2)


def test_y_bounds_on_random_sweep():
    rng = Random(21)
    for _ in range(50):
        tree = random_tree(rng, max_width=8, depth=8)
        _, weights = explicit_argmin(tree)
        counts = tree.subtree_leaf_counts()
        for u, y in weights.items():
            assert 1.0 - 1e-12 <= y <= counts[u] + 1e-12


def test_memorylessness_bit_for_bit():
    inst = gen_random(6, 25, seed=13, split_prob=0.4, kill_prob=0.2)
    policy = EntropicPolicy()
    tree = LayeredTree()
    policy.start(tree)
    for update in inst.layers:
        tree.apply_layer(update)
        policy.step(tree)
    rebuilt = inst.replay()
    fresh, _ = explicit_argmin(rebuilt)
    assert fresh.cond == policy.config.cond
    assert fresh.mass == policy.config.mass


def test_conditionals_are_scale_free():
    # the same shape hanging one layer below the root ...
    shallow = build_t1()
    # ... and again at the end of a two-edge stem
    deep = LayeredTree()
    deep.apply_layer(LayerUpdate(entries=((9, 0),)))
    deep.apply_layer(LayerUpdate(entries=((8, 9),)))
    deep.apply_layer(LayerUpdate(entries=((1, 8), (2, 8))))
    deep.apply_layer(LayerUpdate(entries=((3, 1), (4, 1), (5, 2))))
    shallow_cfg, _ = explicit_argmin(shallow)
    deep_cfg, _ = explicit_argmin(deep)
    for u in (A, B, A1, A2, B1):
        assert deep_cfg.cond[u] == pytest.approx(shallow_cfg.cond[u], abs=1e-12)


def test_first_order_optimality_under_flow_perturbations():
    rng = Random(31)
    eps = 1e-4
    for _ in range(20):
        tree = random_tree(rng, max_width=6, depth=6, min_leaves=2)
        config, _ = explicit_argmin(tree)
        base = phi_of(config)
        leaves = tree.frontier()
        for _ in range(50):
            delta = [rng.random() - 0.5 for _ in leaves]
            shift = sum(delta) / len(delta)
            delta = [d - shift for d in delta]
            scale = max(abs(d) for d in delta)
            leaf_mass = {
                u: config.mass[u] + eps * d / scale for u, d in zip(leaves, delta)
            }
            if any(m <= 0 for m in leaf_mass.values()):
                continue
            perturbed = 0.0
            masses = dict(leaf_mass)
            for u in tree.active_by_layer_desc():
                if u == 0:
                    continue
                if u not in masses:
                    masses[u] = 0.0
                masses[tree.parent[u]] = masses.get(tree.parent[u], 0.0) + masses[u]
            masses.pop(0)
            perturbed = sum(m * math.log(m) for m in masses.values() if m > 0)
            assert base <= perturbed + 1e-8
