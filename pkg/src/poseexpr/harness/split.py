"""Grouped train/test splitting: every group lands wholly on one side."""

from __future__ import annotations

import numpy as np

from ..errors import TooFewGroups


def split_grouped(items, ratio: float, seed: int, group_of=None):
    """Shuffle groups by seed and assign whole groups to the training side
    until the sample ratio is reached.

    items: any sequence; group_of extracts the group id (default:
    item.group_id).  Returns (train list, test list).
    """
    if not 0.0 < ratio < 1.0:
        raise ValueError("ratio must be in (0, 1)")
    if group_of is None:
        group_of = lambda item: item.group_id
    groups: dict[str, list] = {}
    for item in items:
        groups.setdefault(str(group_of(item)), []).append(item)
    if len(groups) < 2:
        raise TooFewGroups(f"grouped split needs >= 2 groups, got {len(groups)}")
    names = sorted(groups)
    rng = np.random.default_rng(seed)
    rng.shuffle(names)
    total = len(items)
    target = ratio * total
    train, test = [], []
    count = 0
    for name in names:
        if count < target:
            train.extend(groups[name])
            count += len(groups[name])
        else:
            test.extend(groups[name])
    return train, test
