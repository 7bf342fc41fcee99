"""Array-backed binary sum tree for logarithmic-time reaction selection.

The tree is a flat array of 2P doubles (P a power of two): node 1 is the
root, node v has children 2v and 2v+1, leaves occupy P..2P-1.  Leaf j of an
n-leaf tree sits at P+j; unused leaves stay at weight 0 so channels can be
reactivated without reshaping.
"""
from __future__ import annotations

import numpy as np
from numba import njit


def capacity_for(n_leaves):
    p = 1
    while p < max(n_leaves, 1):
        p *= 2
    return p


def new_tree(n_leaves):
    return np.zeros(2 * capacity_for(n_leaves))


@njit(cache=True, nogil=True)
def tree_set(tree, p, pos, value):
    """Set leaf `pos` and refresh the sums on its root path."""
    v = p + pos
    tree[v] = value
    v >>= 1
    while v >= 1:
        tree[v] = tree[2 * v] + tree[2 * v + 1]
        v >>= 1


@njit(cache=True, nogil=True)
def tree_rebuild(tree, p):
    """Recompute every internal sum from the leaves (cancels float drift)."""
    for v in range(p - 1, 0, -1):
        tree[v] = tree[2 * v] + tree[2 * v + 1]


@njit(cache=True, nogil=True)
def tree_find(tree, p, target):
    """Leaf position whose cumulative-weight interval contains target.

    Walks the sums downward; if rounding lands on a zero-weight leaf, falls
    back to a deterministic linear scan of the leaves.
    """
    original = target
    v = 1
    while v < p:
        left = 2 * v
        if target < tree[left]:
            v = left
        else:
            target -= tree[left]
            v = left + 1
    if tree[v] > 0.0:
        return v - p
    acc = 0.0
    last_pos = -1
    for j in range(p):
        w = tree[p + j]
        if w > 0.0:
            last_pos = j
            acc += w
            if original < acc:
                return j
    return last_pos  # target beyond the last interval by rounding: clamp
