import pytest

from lgt.errors import MalformedInputError
from lgt.tree import LayeredTree, LayerUpdate
from lgt.adversaries import gen_random

from conftest import A, B, A1, A2, B1, build_chain, build_t1


def test_reduce_to_tree_single_parent(star2):
    update = star2.reduce_to_tree([(10, [1])])
    assert update.entries == ((10, 1),)


def test_reduce_to_tree_first_listed_wins(star2):
    update = star2.reduce_to_tree([(10, [2, 1])])
    assert update.entries == ((10, 2),)


def test_reduce_to_tree_order_of_non_first_parents_is_irrelevant(t1):
    u1 = t1.reduce_to_tree([(10, [A1, A2, B1])])
    u2 = t1.reduce_to_tree([(10, [A1, B1, A2])])
    assert u1 == u2


def test_reduce_to_tree_unknown_parent(star2):
    with pytest.raises(MalformedInputError):
        star2.reduce_to_tree([(10, [99])])


def test_reduce_to_tree_empty_parent_list(star2):
    with pytest.raises(MalformedInputError):
        star2.reduce_to_tree([(10, [])])


def test_apply_layer_prunes_exclusive_chains(t1):
    # only a1 gets a child: a2 dies alone, b1 takes b with it
    records = t1.apply_layer(LayerUpdate(entries=((10, A1),)))
    assert [(r.leaf, r.d) for r in records] == [(A2, 1), (B1, 2)]
    assert t1.deactivated_edges == 3
    assert t1.active == {0, A, A1, 10}
    t1.check_invariants()


def test_apply_layer_chain_no_dead_end():
    tree = build_chain(1)
    records = tree.apply_layer(LayerUpdate(entries=((2, 1),)))
    assert records == []


def test_apply_layer_star_both_extended(star2):
    records = star2.apply_layer(LayerUpdate(entries=((3, 1), (4, 2))))
    assert records == []
    star2.check_invariants()


def test_apply_layer_rejects_stale_parent(t1):
    with pytest.raises(MalformedInputError):
        t1.apply_layer(LayerUpdate(entries=((10, A),)))  # A is in layer 1, not 2


def test_apply_layer_rejects_reused_id(t1):
    with pytest.raises(MalformedInputError):
        t1.apply_layer(LayerUpdate(entries=((A1, A1),)))


def test_apply_layer_rejects_empty_update(t1):
    with pytest.raises(MalformedInputError):
        t1.apply_layer(LayerUpdate(entries=()))


def test_heights_t1(t1):
    h = t1.heights()
    assert h[0] == 2 and h[A] == 1 and h[B] == 1
    assert h[A1] == h[A2] == h[B1] == 0


def test_heights_chain_and_advance(t1):
    assert build_chain(5).heights()[0] == 5
    t1.apply_layer(LayerUpdate(entries=((10, A1),)))
    assert t1.heights()[0] == 3


def test_subtree_leaf_counts(t1):
    counts = t1.subtree_leaf_counts()
    assert counts[0] == 3 and counts[A] == 2 and counts[B] == 1
    assert all(c == 1 for c in build_chain(4).subtree_leaf_counts().values())


def test_subtree_leaf_counts_after_prune(t1):
    t1.apply_layer(LayerUpdate(entries=((10, A1), (11, A2))))
    counts = t1.subtree_leaf_counts()
    assert counts[0] == 2 and counts[A] == 2
    assert B not in counts


def test_exclusive_chain_length(t1):
    assert t1.exclusive_chain_length(A2) == 1
    assert t1.exclusive_chain_length(B1) == 2


def test_deactivation_totals_match_counter():
    inst = gen_random(5, 40, seed=99, split_prob=0.4, kill_prob=0.2)
    tree = LayeredTree()
    total = 0
    for update in inst.layers:
        total += sum(r.d for r in tree.apply_layer(update))
        tree.check_invariants()
    assert total == tree.deactivated_edges


def test_no_internal_dead_wood_over_random_runs():
    for seed in range(5):
        inst = gen_random(6, 30, seed=seed, split_prob=0.35, kill_prob=0.25)
        tree = inst.replay()
        for u in tree.active:
            if tree.layer_of[u] < tree.current_layer:
                assert tree.active_children(u)


def test_root_leaf_count_equals_layer_size():
    inst = gen_random(6, 30, seed=3, split_prob=0.4, kill_prob=0.2)
    tree = LayeredTree()
    for update in inst.layers:
        tree.apply_layer(update)
        counts = tree.subtree_leaf_counts()
        assert counts[0] == len(tree.frontier()) <= inst.width


def test_distance():
    t1 = build_t1()
    assert t1.distance(A1, A2) == 2
    assert t1.distance(A1, B1) == 4
    assert t1.distance(0, B1) == 2
    assert t1.distance(A1, A1) == 0
