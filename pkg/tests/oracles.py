"""Independent brute-force oracles used by the unit and acceptance tests.

Everything here is deliberately naive: enumeration and exhaustive search,
sharing no code with the implementations under test.
"""

from functools import lru_cache
from itertools import product

from textbridge.metrics import ConstituencyTree


def is_subsequence(sub, seq):
    it = iter(seq)
    return all(any(x == y for y in it) for x in sub)


def lcs_brute_force(a, b):
    """LCS length by enumerating every subsequence of the shorter list."""
    if len(a) > len(b):
        a, b = b, a
    n = len(a)
    best = 0
    for mask in range(1 << n):
        sub = [a[i] for i in range(n) if mask >> i & 1]
        if len(sub) > best and is_subsequence(sub, b):
            best = len(sub)
    return best


def rouge_l_brute_force(candidate, reference):
    lcs = lcs_brute_force(candidate, reference)
    if lcs == 0:
        return 0.0
    p = lcs / len(candidate)
    r = lcs / len(reference)
    return 2.0 * p * r / (p + r)


def _flatten_preorder(tree):
    """Labels plus preorder/postorder indices, both keyed by preorder id."""
    labels = []
    post_of = []
    counter = [0]

    def walk(node):
        my = len(labels)
        labels.append(node.label)
        post_of.append(-1)
        for c in node.children:
            walk(c)
        post_of[my] = counter[0]
        counter[0] += 1

    walk(tree)
    return labels, post_of


def _relation(post, x, y):
    """0 ancestor, 1 left-of, 2 descendant, 3 right-of (x relative to y)."""
    if x < y:
        return 0 if post[x] > post[y] else 1
    return 2 if post[x] < post[y] else 3


def ted_exhaustive(t1, t2):
    """Unit-cost tree edit distance by exhaustive search over edit scripts.

    Every edit script normalizes to a one-to-one node mapping that preserves
    ancestry and sibling order; the script cost is the unmapped-node count
    plus label mismatches. Search enumerates all such mappings.
    """
    lab1, post1 = _flatten_preorder(t1)
    lab2, post2 = _flatten_preorder(t2)
    n1, n2 = len(lab1), len(lab2)
    best = [n1 + n2]
    pairs = []

    def search(i, mapped, cost, used):
        if cost + max(0, (n2 - mapped) - (n1 - i)) >= best[0]:
            return
        if i == n1:
            total = cost + (n2 - mapped)
            if total < best[0]:
                best[0] = total
            return
        for j in range(n2):
            if used >> j & 1:
                continue
            ok = True
            for pi, pj in pairs:
                if _relation(post1, pi, i) != _relation(post2, pj, j):
                    ok = False
                    break
            if ok:
                pairs.append((i, j))
                search(i + 1, mapped + 1, cost + (lab1[i] != lab2[j]), used | 1 << j)
                pairs.pop()
        search(i + 1, mapped, cost + 1, used)

    search(0, 0, 0, 0)
    return best[0]


@lru_cache(maxsize=None)
def tree_shapes(n):
    """All ordered tree shapes with n nodes; a shape is a tuple of child shapes."""
    if n == 1:
        return ((),)
    out = []
    for first in range(1, n):
        for head in tree_shapes(first):
            for rest in _forest_shapes(n - 1 - first):
                out.append((head, *rest))
    result = []
    seen = set()
    for shape in out:
        if shape not in seen:
            seen.add(shape)
            result.append(shape)
    return tuple(result)


@lru_cache(maxsize=None)
def _forest_shapes(n):
    """All ordered forests (tuples of shapes) with n nodes total."""
    if n == 0:
        return ((),)
    out = []
    for first in range(1, n + 1):
        for head in tree_shapes(first):
            for rest in _forest_shapes(n - first):
                out.append((head, *rest))
    return tuple(out)


def _shape_size(shape):
    return 1 + sum(_shape_size(c) for c in shape)


def _build_labeled(shape, labels, pos):
    label = labels[pos[0]]
    pos[0] += 1
    children = tuple(_build_labeled(c, labels, pos) for c in shape)
    return ConstituencyTree(label, children)


def all_labeled_trees(max_nodes, alphabet):
    """Every ordered labeled tree with 1..max_nodes nodes over the alphabet."""
    trees = []
    for n in range(1, max_nodes + 1):
        for shape in tree_shapes(n):
            for labels in product(alphabet, repeat=n):
                trees.append(_build_labeled(shape, labels, [0]))
    return trees


def random_tree(rng, max_nodes, alphabet):
    """One uniformly shaped random labeled tree with 1..max_nodes nodes."""
    n = rng.randint(1, max_nodes)
    shape = rng.choice(tree_shapes(n))
    labels = [rng.choice(alphabet) for _ in range(n)]
    return _build_labeled(shape, labels, [0])


def wcss(points, assignment, k):
    """Within-cluster sum of squared distances to cluster means."""
    import numpy as np

    total = 0.0
    for c in range(k):
        members = points[[i for i, a in enumerate(assignment) if a == c]]
        if len(members):
            center = members.mean(axis=0)
            total += float(((members - center) ** 2).sum())
    return total


def best_two_partition_wcss(points):
    """Brute-force optimal 2-partition WCSS over all assignments."""
    n = len(points)
    best = float("inf")
    for mask in range(1 << n):
        assignment = [(mask >> i) & 1 for i in range(n)]
        best = min(best, wcss(points, assignment, 2))
    return best


def diversity_keep_oracle(texts_in, texts_out, score, threshold):
    """Exhaustive duplicate-component dedup over (input, output) pairs.

    Edges connect pairs whose input-side or output-side entailment in either
    direction reaches the threshold. Keeps, per connected component, the pair
    with the largest summed entailment to its neighbours (all four side and
    direction scores), ties broken by lexicographically smaller (input,
    output) text, then original index.
    """
    n = len(texts_in)
    adj = [[False] * n for _ in range(n)]
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            linked = (
                score(texts_in[i], texts_in[j]) >= threshold
                or score(texts_in[j], texts_in[i]) >= threshold
                or score(texts_out[i], texts_out[j]) >= threshold
                or score(texts_out[j], texts_out[i]) >= threshold
            )
            if linked:
                adj[i][j] = adj[j][i] = True
    unseen = set(range(n))
    kept = []
    while unseen:
        start = min(unseen)
        component = {start}
        frontier = [start]
        while frontier:
            cur = frontier.pop()
            for j in range(n):
                if adj[cur][j] and j in unseen and j not in component:
                    component.add(j)
                    frontier.append(j)
        unseen -= component
        scored = []
        for i in sorted(component):
            summed = sum(
                score(texts_in[i], texts_in[j])
                + score(texts_in[j], texts_in[i])
                + score(texts_out[i], texts_out[j])
                + score(texts_out[j], texts_out[i])
                for j in sorted(component)
                if j != i and adj[i][j]
            )
            scored.append((-summed, texts_in[i], texts_out[i], i))
        scored.sort()
        kept.append(scored[0][3])
    return sorted(kept)
