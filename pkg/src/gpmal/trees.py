"""Expression trees: primitives, evaluation, generation, variation, text form.

An individual is a fixed-length list of trees, one per embedding
dimension; evaluating every tree on every instance yields the n x d
embedding.  Function semantics are total: protected division absorbs
near-zero denominators and arithmetic saturates at +/-1e150, so finite
inputs can never produce NaN or infinity.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import Dataset

# name -> arity
FUNCTIONS = {
    "add": 2, "sub": 2, "mul": 2, "div": 2,
    "sigmoid": 1, "relu": 1,
    "max": 2, "min": 2, "if": 3,
}

DIV_EPS = 1e-9       # |denominator| at or below this divides to 0
SATURATE = 1e150     # magnitude cap; squares stay inside float64


class TreeNode:
    """One node of an expression tree.

    ``op`` is a FUNCTIONS key, "feature" (leaf reading column ``index``)
    or "const" (leaf carrying ``value``).  Nodes are treated as immutable
    after construction; variation operators copy before editing.
    """

    __slots__ = ("op", "children", "index", "value")

    def __init__(self, op, children=(), index=None, value=None):
        self.op = op
        self.children = list(children)
        self.index = index
        self.value = value
        if op == "feature":
            assert index is not None and not children
        elif op == "const":
            assert value is not None and not children
        else:
            assert len(self.children) == FUNCTIONS[op], \
                f"{op} expects {FUNCTIONS[op]} children, got {len(self.children)}"

    @property
    def is_terminal(self) -> bool:
        return not self.children

    def __repr__(self):
        return f"TreeNode({tree_to_text(self)!r})"


def feature(i: int) -> TreeNode:
    return TreeNode("feature", index=int(i))


def const(v: float) -> TreeNode:
    return TreeNode("const", value=float(v))


def func(op: str, *children: TreeNode) -> TreeNode:
    return TreeNode(op, children)


def copy_tree(node: TreeNode) -> TreeNode:
    if node.is_terminal:
        return TreeNode(node.op, index=node.index, value=node.value)
    return TreeNode(node.op, [copy_tree(c) for c in node.children])


def tree_depth(node: TreeNode) -> int:
    """Longest root-to-leaf path, counted in edges."""
    if node.is_terminal:
        return 0
    return 1 + max(tree_depth(c) for c in node.children)


def iter_nodes(node: TreeNode):
    """Yield every node in prefix order."""
    stack = [node]
    while stack:
        cur = stack.pop()
        yield cur
        stack.extend(reversed(cur.children))


def node_count(node: TreeNode) -> int:
    return sum(1 for _ in iter_nodes(node))


def trees_equal(a: TreeNode, b: TreeNode) -> bool:
    if a.op != b.op or a.index != b.index or a.value != b.value:
        return False
    if len(a.children) != len(b.children):
        return False
    return all(trees_equal(x, y) for x, y in zip(a.children, b.children))


# ---------------------------------------------------------------------------
# evaluation

def _stable_sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _clip(x: np.ndarray) -> np.ndarray:
    return np.clip(x, -SATURATE, SATURATE)


def eval_tree_columns(node: TreeNode, X: np.ndarray) -> np.ndarray:
    """Evaluate one tree over every row of X at once; returns an n-vector."""
    with np.errstate(over="ignore"):  # saturation absorbs transient overflow
        return _eval_node(node, X)


def _eval_node(node: TreeNode, X: np.ndarray) -> np.ndarray:
    if node.op == "feature":
        return X[:, node.index].astype(np.float64, copy=True)
    if node.op == "const":
        return np.full(X.shape[0], node.value, dtype=np.float64)
    args = [_eval_node(c, X) for c in node.children]
    op = node.op
    if op == "add":
        return _clip(args[0] + args[1])
    if op == "sub":
        return _clip(args[0] - args[1])
    if op == "mul":
        return _clip(args[0] * args[1])
    if op == "div":
        ok = np.abs(args[1]) > DIV_EPS
        return _clip(np.where(ok, args[0] / np.where(ok, args[1], 1.0), 0.0))
    if op == "sigmoid":
        return _stable_sigmoid(args[0])
    if op == "relu":
        return np.maximum(0.0, args[0])
    if op == "max":
        return np.maximum(args[0], args[1])
    if op == "min":
        return np.minimum(args[0], args[1])
    if op == "if":
        return np.where(args[0] < 0.0, args[1], args[2])
    raise ValueError(f"unknown op {op!r}")


def eval_tree(node: TreeNode, instance) -> float:
    """Evaluate one tree on a single instance (m-vector)."""
    X = np.asarray(instance, dtype=np.float64).reshape(1, -1)
    return float(eval_tree_columns(node, X)[0])


@dataclass
class Individual:
    """A candidate mapping: one tree per embedding dimension."""

    trees: list[TreeNode]
    cached_fitness: float | None = None

    @property
    def d(self) -> int:
        return len(self.trees)

    def copy(self) -> "Individual":
        # trees are immutable; sharing them is safe
        return Individual(list(self.trees), self.cached_fitness)


def eval_trees(trees, X: np.ndarray) -> np.ndarray:
    """Evaluate a list of trees over a feature matrix; returns n x d."""
    cols = [eval_tree_columns(t, X) for t in trees]
    return np.column_stack(cols)


def eval_individual(ind: Individual, data) -> np.ndarray:
    """Embedding of every instance: column t is tree t's output."""
    X = data.features if isinstance(data, Dataset) else np.asarray(data, dtype=np.float64)
    return eval_trees(ind.trees, X)


# ---------------------------------------------------------------------------
# generation

def _random_terminal(rng, m: int) -> TreeNode:
    t = int(rng.integers(0, m + 1))
    if t < m:
        return feature(t)
    return const(rng.uniform(-1.0, 1.0))


def _random_function(rng) -> str:
    names = list(FUNCTIONS)
    return names[int(rng.integers(0, len(names)))]


def _build(rng, method: str, depth: int, min_depth: int, target: int, m: int) -> TreeNode:
    if depth == target:
        return _random_terminal(rng, m)
    if method == "grow" and depth >= min_depth:
        # uniform over the combined terminal (m features + ERC) and function set
        if int(rng.integers(0, m + 1 + len(FUNCTIONS))) < m + 1:
            return _random_terminal(rng, m)
    op = _random_function(rng)
    kids = [_build(rng, method, depth + 1, min_depth, target, m)
            for _ in range(FUNCTIONS[op])]
    return TreeNode(op, kids)


def random_tree(rng, method: str, min_depth: int, max_depth: int, m: int) -> TreeNode:
    """Generate a tree with the grow or full method.

    full: every root-to-leaf path reaches exactly ``max_depth`` edges.
    grow: paths end anywhere in [min_depth, max_depth].
    """
    if method not in ("grow", "full"):
        raise ValueError(f"method must be 'grow' or 'full', got {method!r}")
    if not 2 <= min_depth <= max_depth:
        raise ValueError(f"need 2 <= min_depth <= max_depth, got "
                         f"[{min_depth}, {max_depth}]")
    return _build(rng, method, 0, min_depth, max_depth, m)


def _grow_subtree(rng, target: int, m: int) -> TreeNode:
    """Replacement subtree for mutation: grow with no minimum depth."""
    return _build(rng, "grow", 0, 0, target, m)


# ---------------------------------------------------------------------------
# variation

MUTATION_SUBTREE_DEPTH = 6   # cap on freshly grown replacement subtrees
DEPTH_RETRIES = 3

# Koza-style crossover point bias
FUNCTION_POINT_PROB = 0.9


def _node_paths(node: TreeNode, prefix=()):
    """(path, node, depth) triples; a path is the child-index route from the root."""
    out = [(prefix, node, len(prefix))]
    for i, c in enumerate(node.children):
        out.extend(_node_paths(c, prefix + (i,)))
    return out


def _get_at(node: TreeNode, path) -> TreeNode:
    for i in path:
        node = node.children[i]
    return node


def _replace_at(node: TreeNode, path, sub: TreeNode) -> TreeNode:
    """Copy of ``node`` with the subtree at ``path`` swapped for ``sub``."""
    if not path:
        return sub
    new = TreeNode(node.op, list(node.children), index=node.index, value=node.value)
    new.children[path[0]] = _replace_at(node.children[path[0]], path[1:], sub)
    return new


def _pick_point(rng, node: TreeNode):
    """Crossover point: 90% function nodes, 10% terminals (when both exist)."""
    paths = _node_paths(node)
    funcs = [p for p in paths if not p[1].is_terminal]
    terms = [p for p in paths if p[1].is_terminal]
    if funcs and (not terms or rng.random() < FUNCTION_POINT_PROB):
        pool = funcs
    else:
        pool = terms
    return pool[int(rng.integers(0, len(pool)))]


def _depth_ok(node: TreeNode, min_depth: int, max_depth: int) -> bool:
    return min_depth <= tree_depth(node) <= max_depth


def crossover_all_pairs(a: Individual, b: Individual, rng,
                        min_depth: int = 2, max_depth: int = 14):
    """Subtree crossover applied to every matching tree pair.

    A pair whose offspring would leave [min_depth, max_depth] is retried
    a bounded number of times, then the parents' trees are copied through
    unchanged at that position.
    """
    if a.d != b.d:
        raise ValueError(f"parents have different tree counts: {a.d} vs {b.d}")
    trees_a, trees_b = [], []
    for t in range(a.d):
        pa, pb = a.trees[t], b.trees[t]
        child_a, child_b = pa, pb
        for _ in range(1 + DEPTH_RETRIES):
            path_a, sub_a, _ = _pick_point(rng, pa)
            path_b, sub_b, _ = _pick_point(rng, pb)
            ca = _replace_at(pa, path_a, sub_b)
            cb = _replace_at(pb, path_b, sub_a)
            if _depth_ok(ca, min_depth, max_depth) and _depth_ok(cb, min_depth, max_depth):
                child_a, child_b = ca, cb
                break
        trees_a.append(child_a)
        trees_b.append(child_b)
    return Individual(trees_a), Individual(trees_b)


def mutate_single_tree(a: Individual, rng, m: int,
                       min_depth: int = 2, max_depth: int = 14) -> Individual:
    """Replace a uniformly chosen subtree of one uniformly chosen tree.

    The replacement is grown to fit the depth window; if repeated
    attempts still violate the minimum depth, the whole tree is
    regenerated at the root (always valid).
    """
    t = int(rng.integers(0, a.d))
    parent = a.trees[t]
    new_tree = None
    for _ in range(1 + DEPTH_RETRIES):
        paths = _node_paths(parent)
        path, _, depth_here = paths[int(rng.integers(0, len(paths)))]
        target = int(rng.integers(0, min(MUTATION_SUBTREE_DEPTH, max_depth - depth_here) + 1))
        candidate = _replace_at(parent, path, _grow_subtree(rng, target, m))
        if _depth_ok(candidate, min_depth, max_depth):
            new_tree = candidate
            break
    if new_tree is None:
        new_tree = random_tree(rng, "grow", min_depth, min(MUTATION_SUBTREE_DEPTH, max_depth), m)
    trees = list(a.trees)
    trees[t] = new_tree
    return Individual(trees)


# ---------------------------------------------------------------------------
# text form: prefix notation, e.g. (add (f 3) (c -0.25))

def tree_to_text(node: TreeNode) -> str:
    if node.op == "feature":
        return f"(f {node.index})"
    if node.op == "const":
        return f"(c {node.value!r})"
    inner = " ".join(tree_to_text(c) for c in node.children)
    return f"({node.op} {inner})"


def _tokenize(text: str):
    return text.replace("(", " ( ").replace(")", " ) ").split()


def _parse(tokens, pos: int):
    if tokens[pos] != "(":
        raise ValueError(f"expected '(' at token {pos}, got {tokens[pos]!r}")
    head = tokens[pos + 1]
    if head == "f":
        return feature(int(tokens[pos + 2])), pos + 4
    if head == "c":
        return const(float(tokens[pos + 2])), pos + 4
    if head not in FUNCTIONS:
        raise ValueError(f"unknown operator {head!r}")
    pos += 2
    kids = []
    for _ in range(FUNCTIONS[head]):
        kid, pos = _parse(tokens, pos)
        kids.append(kid)
    if tokens[pos] != ")":
        raise ValueError(f"expected ')' at token {pos}, got {tokens[pos]!r}")
    return TreeNode(head, kids), pos + 1


def tree_from_text(text: str) -> TreeNode:
    tokens = _tokenize(text)
    node, pos = _parse(tokens, 0)
    if pos != len(tokens):
        raise ValueError(f"trailing tokens after tree: {tokens[pos:]}")
    return node


def individual_to_text(ind: Individual) -> str:
    """One tree per line; embedding dimension t is line t."""
    return "\n".join(tree_to_text(t) for t in ind.trees) + "\n"


def individual_from_text(text: str) -> Individual:
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ValueError("no trees in text")
    return Individual([tree_from_text(ln) for ln in lines])
