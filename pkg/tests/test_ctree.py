import random
from fractions import Fraction as F

import pytest

from bpmatch import (Graph, PERFECT, MessageInit, StopPolicy, TreeSizeError,
                     DegenerateTreeError, build_tree, build_gct_branch,
                     build_gct, tree_bmatching_dp, tree_depth, tree_size,
                     dump_tree, make_schedule, coverage, run_sync,
                     init_messages, sync_round_perfect)
from bpmatch.harness import tree_verify, random_instance


class TestBuildBalanced:
    def test_level_zero_children_are_neighbors(self, c4):
        tree = build_tree(c4, 1, 0)
        assert tree.root.label == 1
        assert [c.label for c in tree.root.children] == [2, 4]
        assert tree_depth(tree) == 1

    def test_level_one_excludes_parent(self, c4):
        tree = build_tree(c4, 1, 1)
        node2 = tree.root.children[0]
        assert node2.label == 2 and [c.label for c in node2.children] == [3]

    def test_edge_weights_copied(self, c4):
        tree = build_tree(c4, 1, 1)
        node2 = tree.root.children[0]
        assert node2.edge_weight == 1 and node2.children[0].edge_weight == 2

    def test_uniform_leaf_depth(self, k4):
        for t in range(4):
            tree = build_tree(k4, 2, t)
            depths = set()

            def walk(node, d):
                if not node.children:
                    depths.add(d)
                for c in node.children:
                    walk(c, d + 1)
            walk(tree.root, 0)
            assert depths == {t + 1}

    def test_tree_graph_unrolls_to_itself(self):
        # on an acyclic graph the unrolled tree just reproduces the graph
        g = Graph(4, [1, 2, 1, 1], [(1, 2, 3), (2, 3, 4), (2, 4, 5)])
        tree = build_tree(g, 1, 5)
        assert tree_size(tree) == 4
        labels = sorted(leaf.label for leaf in _leaves(tree.root))
        assert labels == [3, 4]

    def test_size_cap(self, k4):
        with pytest.raises(TreeSizeError):
            build_tree(k4, 1, 10, node_cap=100)


def _leaves(node):
    if not node.children:
        return [node]
    out = []
    for c in node.children:
        out.extend(_leaves(c))
    return out


class TestBuildGct:
    def test_time_zero_branch_is_single_edge(self, c4):
        sched = make_schedule(c4, "roundrobin")
        tree = build_gct_branch(c4, sched, (1, 2), 0)
        assert tree.root.label == 2
        assert [c.label for c in tree.root.children] == [1]
        assert tree.root.children[0].children == ()
        assert tree_depth(tree) == 1

    def test_full_sync_branch_equals_balanced_branch(self, c4):
        sched = make_schedule(c4, "sync")
        for t in range(4):
            branch = build_gct_branch(c4, sched, (2, 1), t)
            balanced = build_tree(c4, 1, t)
            bal_branch = next(c for c in balanced.root.children if c.label == 2)
            assert _shape(branch.root.children[0]) == _shape(bal_branch)

    def test_never_updated_edge_stays_single(self, c4):
        sets = [{(3, 4)}] * 6
        sched = make_schedule(c4, "explicit", sets=sets)
        tree = build_gct_branch(c4, sched, (1, 2), 6)
        assert tree_size(tree) == 2

    def test_empty_schedule_gct_is_star(self, c4):
        sched = make_schedule(c4, "explicit", sets=[set()] * 3)
        tree = build_gct(c4, sched, 1, 3)
        assert tree_depth(tree) == 1
        assert [c.label for c in tree.root.children] == [2, 4]

    def test_full_sync_gct_equals_balanced(self, c4):
        sched = make_schedule(c4, "sync")
        for t in range(4):
            assert _shape(build_gct(c4, sched, 1, t).root) == _shape(build_tree(c4, 1, t).root)

    def test_round_robin_depth_grows_with_cycles(self, c4):
        sched = make_schedule(c4, "roundrobin")
        cycle = len(c4.directed_edges())
        depths = [tree_depth(build_gct(c4, sched, 1, k * cycle)) for k in range(4)]
        assert depths == sorted(depths)
        for k in range(4):
            u = coverage(c4, sched, k * cycle).u
            assert depths[k] >= u


def _shape(node):
    return (node.label, node.edge_weight, tuple(_shape(c) for c in node.children))


class TestTreeDP:
    def test_single_edge_branch_base_case(self, c4):
        sched = make_schedule(c4, "roundrobin")
        tree = build_gct_branch(c4, sched, (1, 2), 0)
        dp = tree_bmatching_dp(tree)
        assert dp.branches[1].w_plus == 1 and dp.branches[1].w_minus == 0
        assert dp.branches[1].n == 1

    def test_c4_level_one_matches_message(self, c4):
        tree = build_tree(c4, 1, 1)
        dp = tree_bmatching_dp(tree)
        assert dp.branches[2].n == -1
        s1 = sync_round_perfect(c4, init_messages(c4))
        assert s1.value(2, 1) == -1

    def test_zero_weights_tie_everywhere(self):
        g = Graph(4, [1] * 4, [(1, 2, 0), (2, 3, 0), (3, 4, 0), (4, 1, 0)])
        dp = tree_bmatching_dp(build_tree(g, 1, 2))
        assert all(v.w_plus == 0 and v.w_minus == 0 for v in dp.branches.values())
        assert 1 in dp.ties

    def test_root_selection_size(self, k4):
        dp = tree_bmatching_dp(build_tree(k4, 1, 2))
        assert dp.selection is not None and len(dp.selection) == k4.cap(1)

    def test_degenerate_tree_rejected(self):
        g = Graph(3, [1, 2, 1], [(1, 2, 1), (2, 3, 1), (1, 3, 1)])
        # hand-build a branch whose internal node (capacity 2) has 1 child
        from bpmatch.ctree import TreeNode, LabeledTree
        leaf = TreeNode(3, F(1), ())
        inner = TreeNode(2, F(1), (leaf,))
        tree = LabeledTree(TreeNode(1, None, (inner,)), "branch", g, 1)
        with pytest.raises(DegenerateTreeError):
            tree_bmatching_dp(tree)

    def test_dump_format(self, c4):
        text = dump_tree(build_tree(c4, 1, 0))
        lines = text.strip().splitlines()
        assert lines[0] == "0 label=1"
        assert lines[1].strip().startswith("1 label=2 w=")


class TestEquivalence:
    def test_balanced_matches_engine_on_random_graphs(self):
        rng = random.Random(21)
        for _ in range(8):
            g = random_instance(rng, n_max=6, mode=PERFECT, allow_b2=True)
            rows, ok, first = tree_verify(g, 4)
            assert ok, first

    def test_gct_matches_engine_under_schedules(self):
        rng = random.Random(22)
        for _ in range(5):
            g = random_instance(rng, n_max=5, mode=PERFECT)
            for kind, seed, tm in (("sync", None, 3), ("roundrobin", None, 8), ("random", 7, 8)):
                rows, ok, first = tree_verify(g, tm, kind, seed)
                assert ok, (kind, first)

    def test_branch_depth_at_least_update_count(self, c4):
        for kind, seed in (("roundrobin", None), ("random", 13)):
            sched = make_schedule(c4, kind, seed=seed)
            for t in (0, 5, 9, 17, 24):
                u = coverage(c4, sched, t).u
                for (i, j) in c4.directed_edges():
                    d = tree_depth(build_gct_branch(c4, sched, (i, j), t))
                    assert d >= u

    def test_arbitrary_init_equals_dp_with_leaf_values(self, c4):
        rng = random.Random(23)
        init = MessageInit.explicit({d: F(rng.randint(-6, 6)) for d in c4.directed_edges()})
        imap = init.build(c4)
        run = run_sync(c4, PERFECT, init, StopPolicy.budget(3), keep_trace=True)
        for t in range(4):
            for root in c4.vertices():
                dp = tree_bmatching_dp(build_tree(c4, root, t), imap)
                for r in c4.neighbors(root):
                    assert dp.branches[r].n == run.trace[t].value(r, root)

    def test_perturbing_one_leaf_init_changes_only_that_base(self, c4):
        base = {d: c4.weight(*d) for d in c4.directed_edges()}
        tweaked = dict(base)
        tweaked[(3, 2)] = F(100)
        tree = build_tree(c4, 1, 1)  # leaf edge (3,2) sits at the bottom layer
        plain = tree_bmatching_dp(tree, base)
        bent = tree_bmatching_dp(tree, tweaked)
        assert plain.branches[2].n != bent.branches[2].n
        assert plain.branches[4].n == bent.branches[4].n
