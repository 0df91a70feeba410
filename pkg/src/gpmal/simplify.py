"""Algebraic simplification of evolved trees and model-complexity statistics.

The rewrite set is deliberately small and each rule preserves the
evaluation semantics exactly (protected division and saturation included,
because folding reuses the evaluator itself).  ``fitness_contribution``
orders an individual's trees by greedy forward selection on the exact
fitness, reproducing the per-dimension contribution analysis.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .dataset import Dataset
from .fitness import fitness_exact
from .neighbors import NeighborList
from .trees import (DIV_EPS, Individual, TreeNode, const, copy_tree, eval_tree,
                    iter_nodes, node_count, trees_equal)


def _is_const(node: TreeNode, value: float | None = None) -> bool:
    if node.op != "const":
        return False
    return value is None or node.value == value


def _all_const(node: TreeNode) -> bool:
    """True when the subtree reads no features (foldable to a constant)."""
    return all(n.op != "feature" for n in iter_nodes(node))


def _fold(node: TreeNode) -> TreeNode:
    """Evaluate a feature-free subtree down to a single constant."""
    return const(eval_tree(node, np.empty(0)))


def _rewrite(node: TreeNode) -> TreeNode:
    """One bottom-up pass; returns a (possibly) smaller equivalent tree."""
    if node.is_terminal:
        return node
    kids = [_rewrite(c) for c in node.children]
    node = TreeNode(node.op, kids)
    op = node.op

    if _all_const(node):
        return _fold(node)

    a = kids[0]
    b = kids[1] if len(kids) > 1 else None

    if op == "add":
        if _is_const(a, 0.0):
            return b
        if _is_const(b, 0.0):
            return a
    elif op == "sub":
        if _is_const(b, 0.0):
            return a
    elif op == "mul":
        if _is_const(a, 1.0):
            return b
        if _is_const(b, 1.0):
            return a
        # sound because evaluation never yields non-finite values
        if _is_const(a, 0.0) or _is_const(b, 0.0):
            return const(0.0)
    elif op == "div":
        if _is_const(a, 0.0):
            return const(0.0)
        if (a.op == "const" and b.op == "const" and a.value == b.value
                and abs(a.value) > DIV_EPS):
            return const(1.0)
    elif op in ("max", "min"):
        if trees_equal(a, b):
            return a
    elif op == "if":
        if a.op == "const":
            return kids[1] if a.value < 0 else kids[2]
    elif op == "relu":
        if a.op == "relu":
            return a
    return node


def simplify_tree(root: TreeNode) -> TreeNode:
    """Apply the rewrite rules to a fixpoint; never grows the tree."""
    current = copy_tree(root)
    while True:
        simplified = _rewrite(current)
        if trees_equal(simplified, current):
            return simplified
        current = simplified


def simplify_individual(ind: Individual) -> Individual:
    return Individual([simplify_tree(t) for t in ind.trees])


@dataclass(frozen=True)
class TreeStats:
    node_count: int
    function_count: int
    terminal_count: int
    unique_features: int
    feature_occurrences: int


@dataclass(frozen=True)
class ModelStats:
    per_tree: list[TreeStats]
    total: TreeStats

    def to_dict(self) -> dict:
        def enc(s: TreeStats) -> dict:
            return {
                "node_count": s.node_count,
                "function_count": s.function_count,
                "terminal_count": s.terminal_count,
                "unique_features": s.unique_features,
                "feature_occurrences": s.feature_occurrences,
            }
        return {"per_tree": [enc(s) for s in self.per_tree], "total": enc(self.total)}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def _tree_stats(root: TreeNode) -> TreeStats:
    nodes = list(iter_nodes(root))
    feats = [n.index for n in nodes if n.op == "feature"]
    terminals = sum(1 for n in nodes if n.is_terminal)
    return TreeStats(
        node_count=len(nodes),
        function_count=len(nodes) - terminals,
        terminal_count=terminals,
        unique_features=len(set(feats)),
        feature_occurrences=len(feats),
    )


def model_stats(ind: Individual) -> ModelStats:
    per = [_tree_stats(t) for t in ind.trees]
    all_feats = set()
    occurrences = 0
    for t in ind.trees:
        for n in iter_nodes(t):
            if n.op == "feature":
                all_feats.add(n.index)
                occurrences += 1
    total = TreeStats(
        node_count=sum(s.node_count for s in per),
        function_count=sum(s.function_count for s in per),
        terminal_count=sum(s.terminal_count for s in per),
        unique_features=len(all_feats),
        feature_occurrences=occurrences,
    )
    return ModelStats(per, total)


def fitness_contribution(ind: Individual, dataset: Dataset,
                         input_nl: NeighborList, K: int):
    """Greedy forward tree selection by exact fitness.

    Starting from an empty embedding, repeatedly add the tree whose
    inclusion gives the lowest fitness of the partial embedding.  Returns
    [(tree_index, cumulative_fitness), ...] covering every tree; the last
    cumulative value is the full individual's exact fitness.
    """
    remaining = list(range(ind.d))
    chosen: list[int] = []
    out = []
    while remaining:
        best_t = None
        best_fit = np.inf
        for t in remaining:
            partial = Individual([ind.trees[s] for s in chosen + [t]])
            fit = fitness_exact(partial, dataset, input_nl, K)
            if fit < best_fit:
                best_fit = fit
                best_t = t
        chosen.append(best_t)
        remaining.remove(best_t)
        out.append((best_t, best_fit))
    return out
