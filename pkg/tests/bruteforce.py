"""Independent reference implementations used as test oracles.

Deliberately slow and literal: these re-derive each quantity from its
definition (minimum-cost matching, exhaustive run/triple/window
enumeration) without sharing code with the package kernels.
"""

import math
from itertools import combinations

import numpy as np


def w1_bruteforce(a, b):
    """Exact W1 via sorted minimum-cost matching on an LCM-expanded multiset."""
    a = sorted(float(v) for v in a)
    b = sorted(float(v) for v in b)
    lcm = math.lcm(len(a), len(b))
    ea = sorted(v for v in a for _ in range(lcm // len(a)))
    eb = sorted(v for v in b for _ in range(lcm // len(b)))
    return sum(abs(x - y) for x, y in zip(ea, eb)) / lcm


def burst_lengths_bruteforce(ts, delta):
    """All maximal runs with internal gaps <= delta, by exhaustive check."""
    ts = list(ts)
    n = len(ts)
    lengths = []
    for i in range(n):
        for j in range(i, n):
            internal_ok = all(ts[k + 1] - ts[k] <= delta for k in range(i, j))
            left_max = i == 0 or ts[i] - ts[i - 1] > delta
            right_max = j == n - 1 or ts[j + 1] - ts[j] > delta
            if internal_ok and left_max and right_max:
                lengths.append(j - i + 1)
    return lengths


def triangles_bruteforce(n_nodes, edges):
    eset = {(min(u, v), max(u, v)) for u, v in edges}
    count = 0
    for a, b, c in combinations(range(n_nodes), 3):
        if (a, b) in eset and (a, c) in eset and (b, c) in eset:
            count += 1
    return count


def clustering_bruteforce(n_nodes, edges):
    eset = {(min(u, v), max(u, v)) for u, v in edges}
    triples = 0
    for center in range(n_nodes):
        nbrs = [x for x in range(n_nodes) if (min(center, x), max(center, x)) in eset and x != center]
        triples += len(nbrs) * (len(nbrs) - 1) // 2
    tri = triangles_bruteforce(n_nodes, edges)
    return 3.0 * tri / triples if triples else 0.0


def rule_triggered_bruteforce(
    ts,
    rule,
    amounts=None,
    codes=None,
    failed=None,
    ages_days=None,
):
    """Direct double-loop evaluation of one rule on one entity.

    Arrays are aligned to the entity's time-sorted rows.  Windows are
    (t - w, t] anchored at rows carrying the rule's value, matching the
    engine's documented semantics.
    """
    ts = list(ts)
    n = len(ts)
    w = rule.window
    thr = rule.threshold

    def in_window(j, i):
        return ts[i] - w < ts[j] <= ts[i]

    if rule.feature == "txn_count":
        return any(
            sum(1 for j in range(n) if in_window(j, i)) > thr for i in range(n)
        )
    if rule.feature == "failed_count":
        anchors = [i for i in range(n) if failed[i]]
        return any(
            sum(1 for j in anchors if in_window(j, i)) > thr for i in anchors
        )
    if rule.feature in ("distinct_merchants", "distinct_payment_methods", "distinct_ips"):
        anchors = [i for i in range(n) if codes[i] >= 0]
        return any(
            len({codes[j] for j in anchors if in_window(j, i)}) > thr for i in anchors
        )
    if rule.feature == "amount_sum":
        anchors = [i for i in range(n) if amounts[i] == amounts[i]]  # finite
        return any(
            sum(amounts[j] for j in anchors if in_window(j, i)) > thr for i in anchors
        )
    if rule.feature == "amount_spike_ratio":
        anchors = [i for i in range(n) if amounts[i] == amounts[i]]
        for i in anchors:
            win = [amounts[j] for j in anchors if in_window(j, i)]
            if len(win) < 2:
                continue
            med = float(np.median(win))
            if med > 0 and max(win) / med > thr:
                return True
        return False
    if rule.feature == "txn_count_young_account":
        limit = w / 86400.0
        young = sum(1 for a in ages_days if a == a and a < limit)
        return young > thr
    raise ValueError(rule.feature)
