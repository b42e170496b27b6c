"""Text and tree metrics: cosine, LCS, Rouge-L, bracketed trees, tree edit distance.

The LCS and tree-edit-distance inner loops run on a compiled Cython kernel
when available; set TEXTBRIDGE_PURE=1 to force the pure-Python fallback.
All functions here are pure and safe to call concurrently.
"""

import os
from dataclasses import dataclass, field

import numpy as np

from textbridge.errors import TreeParseError

if os.environ.get("TEXTBRIDGE_PURE"):
    from textbridge.metrics import _kernels_py as _kernels

    KERNEL_BACKEND = "pure"
else:
    try:
        from textbridge.metrics import _kernels_c as _kernels  # type: ignore[no-redef]

        KERNEL_BACKEND = "compiled"
    except ImportError:
        from textbridge.metrics import _kernels_py as _kernels  # type: ignore[no-redef]

        KERNEL_BACKEND = "pure"

__all__ = [
    "KERNEL_BACKEND",
    "ConstituencyTree",
    "cosine_similarity",
    "lcs_length",
    "parse_bracketed_tree",
    "rouge_l",
    "serialize_tree",
    "tree_edit_distance",
]


def cosine_similarity(a, b) -> float:
    """Cosine of two equal-dimension vectors, clamped to [-1, 1]."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 1 or b.ndim != 1:
        raise ValueError("cosine_similarity expects 1-d vectors")
    if a.shape[0] != b.shape[0]:
        raise ValueError(f"dimension mismatch: {a.shape[0]} vs {b.shape[0]}")
    if a.shape[0] < 1:
        raise ValueError("vectors must have dimension >= 1")
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        raise ValueError("cosine undefined for zero-norm input")
    return float(np.clip(float(a @ b) / (na * nb), -1.0, 1.0))


def _intern_ids(tokens, table):
    return [table.setdefault(t, len(table)) for t in tokens]


def _kernel_seq(ids):
    if KERNEL_BACKEND == "compiled":
        return np.asarray(ids, dtype=np.int64)
    return ids


def lcs_length(a, b) -> int:
    """Length of the longest common subsequence of two token lists."""
    if not a or not b:
        return 0
    table: dict = {}
    ia = _intern_ids(a, table)
    ib = _intern_ids(b, table)
    return int(_kernels.lcs_kernel(_kernel_seq(ia), _kernel_seq(ib)))


def rouge_l(candidate, reference) -> float:
    """LCS-based F1 between two non-empty token lists.

    P = LCS/len(candidate), R = LCS/len(reference), F1 = 2PR/(P+R);
    0.0 when the sequences share no subsequence.
    """
    if not candidate or not reference:
        raise ValueError("rouge_l requires non-empty token lists")
    lcs = lcs_length(candidate, reference)
    if lcs == 0:
        return 0.0
    p = lcs / len(candidate)
    r = lcs / len(reference)
    return 2.0 * p * r / (p + r)


@dataclass(frozen=True)
class ConstituencyTree:
    """Ordered labeled tree; leaves are nodes without children."""

    label: str
    children: tuple = field(default_factory=tuple)

    def __post_init__(self):
        if not self.label:
            raise ValueError("tree node label must be non-empty")
        if any(c in self.label for c in "() \t\n"):
            raise ValueError(f"invalid characters in label {self.label!r}")
        object.__setattr__(self, "children", tuple(self.children))

    @property
    def node_count(self) -> int:
        return 1 + sum(c.node_count for c in self.children)

    def leaves(self) -> list:
        """Leaf labels in left-to-right order."""
        if not self.children:
            return [self.label]
        out = []
        for c in self.children:
            out.extend(c.leaves())
        return out

    def __str__(self):
        return serialize_tree(self)


def serialize_tree(tree: ConstituencyTree) -> str:
    """Canonical bracketed form; inner leaves print bare, the root keeps brackets."""

    def ser(node, is_root):
        if not node.children and not is_root:
            return node.label
        inner = " ".join(ser(c, False) for c in node.children)
        return f"({node.label} {inner})" if inner else f"({node.label})"

    return ser(tree, True)


def parse_bracketed_tree(s: str) -> ConstituencyTree:
    """Parse a Penn-style bracketed tree `(LABEL child ...)`.

    Bare tokens are leaves. Raises TreeParseError with the character offset
    on unbalanced brackets, empty labels, or trailing content.
    """
    stack: list = []
    root = None
    i, n = 0, len(s)
    while i < n:
        ch = s[i]
        if ch.isspace():
            i += 1
            continue
        if ch == "(":
            k = i + 1
            while k < n and s[k].isspace():
                k += 1
            j = k
            while j < n and not s[j].isspace() and s[j] not in "()":
                j += 1
            label = s[k:j]
            if not label:
                raise TreeParseError("empty node label", i)
            if root is not None and not stack:
                raise TreeParseError("content after complete tree", i)
            stack.append((label, []))
            i = j
        elif ch == ")":
            if not stack:
                raise TreeParseError("unbalanced ')'", i)
            label, children = stack.pop()
            node = ConstituencyTree(label, tuple(children))
            if stack:
                stack[-1][1].append(node)
            else:
                root = node
            i += 1
        else:
            j = i
            while j < n and not s[j].isspace() and s[j] not in "()":
                j += 1
            if not stack:
                raise TreeParseError("token outside any node", i)
            stack[-1][1].append(ConstituencyTree(s[i:j]))
            i = j
    if stack:
        raise TreeParseError("unbalanced '(' at end of input", n)
    if root is None:
        raise TreeParseError("no tree found", 0)
    return root


def _postorder(tree: ConstituencyTree, table: dict):
    """Postorder lmd/label arrays and keyroots for the Zhang-Shasha kernel."""
    lmds: list = []
    labels: list = []

    def walk(node):
        if node.children:
            first_lmd = None
            for k, child in enumerate(node.children):
                child_lmd = walk(child)
                if k == 0:
                    first_lmd = child_lmd
            lmd = first_lmd
        else:
            lmd = len(labels)
        lmds.append(lmd)
        labels.append(table.setdefault(node.label, len(table)))
        return lmd

    walk(tree)
    last_with_lmd: dict = {}
    for idx, lmd in enumerate(lmds):
        last_with_lmd[lmd] = idx
    keyroots = sorted(last_with_lmd.values())
    return lmds, labels, keyroots


def tree_edit_distance(t1: ConstituencyTree, t2: ConstituencyTree) -> int:
    """Zhang-Shasha edit distance with unit insert/delete/relabel costs."""
    table: dict = {}
    lmd1, lab1, kr1 = _postorder(t1, table)
    lmd2, lab2, kr2 = _postorder(t2, table)
    return int(
        _kernels.ted_kernel(
            _kernel_seq(lmd1),
            _kernel_seq(lab1),
            _kernel_seq(kr1),
            _kernel_seq(lmd2),
            _kernel_seq(lab2),
            _kernel_seq(kr2),
        )
    )
