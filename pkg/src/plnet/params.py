"""Nested parameter containers (dicts and lists of arrays) and their flat views."""

from __future__ import annotations

from typing import Callable

import numpy as np


def flatten(tree, prefix: str = "") -> dict:
    """``{"a.0.w": array, ...}`` in a deterministic order."""
    out = {}
    if isinstance(tree, dict):
        for key in tree:
            out.update(flatten(tree[key], f"{prefix}{key}."))
    elif isinstance(tree, (list, tuple)):
        for i, sub in enumerate(tree):
            out.update(flatten(sub, f"{prefix}{i}."))
    else:
        out[prefix[:-1]] = tree
    return out


def unflatten(flat: dict, template, prefix: str = ""):
    """Rebuild the structure of ``template`` from a flat mapping."""
    if isinstance(template, dict):
        return {k: unflatten(flat, v, f"{prefix}{k}.") for k, v in template.items()}
    if isinstance(template, (list, tuple)):
        return [unflatten(flat, v, f"{prefix}{i}.") for i, v in enumerate(template)]
    return flat[prefix[:-1]]


def tree_map(fn: Callable, tree):
    if isinstance(tree, dict):
        return {k: tree_map(fn, v) for k, v in tree.items()}
    if isinstance(tree, (list, tuple)):
        return [tree_map(fn, v) for v in tree]
    return fn(tree)


def copy_tree(tree):
    return tree_map(lambda a: np.array(a, dtype=np.float64, copy=True), tree)


def count(tree) -> int:
    return int(sum(np.size(a) for a in flatten(tree).values()))
