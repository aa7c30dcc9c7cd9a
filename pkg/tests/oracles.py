"""Slow, obviously-correct reference computations used as test oracles.

Nothing here imports from the package under test.
"""

from __future__ import annotations

import itertools
import math
from fractions import Fraction
from functools import lru_cache


def warping_paths(n: int, m: int):
    """Every monotone, continuous index path from (0, 0) to (n-1, m-1)."""

    def extend(path):
        i, j = path[-1]
        if (i, j) == (n - 1, m - 1):
            yield path
            return
        for di, dj in ((1, 0), (0, 1), (1, 1)):
            a, b = i + di, j + dj
            if a < n and b < m:
                yield from extend(path + [(a, b)])

    yield from extend([(0, 0)])


def dtw_enumerate(x, y) -> float:
    return min(sum(abs(x[i] - y[j]) for i, j in p) for p in warping_paths(len(x), len(y)))


def frechet_enumerate(x, y) -> float:
    return min(max(abs(x[i] - y[j]) for i, j in p) for p in warping_paths(len(x), len(y)))


def dtw_recursive(x, y) -> float:
    """Top-down memoized recursion (different evaluation order from a table fill)."""

    @lru_cache(maxsize=None)
    def g(i, j):
        here = abs(x[i] - y[j])
        if i == 0 and j == 0:
            return here
        options = []
        if i > 0:
            options.append(g(i - 1, j))
        if j > 0:
            options.append(g(i, j - 1))
        if i > 0 and j > 0:
            options.append(g(i - 1, j - 1))
        return here + min(options)

    return g(len(x) - 1, len(y) - 1)


def ch_bruteforce(points, groups) -> float:
    """Calinski-Harabasz with unsquared distances, pure Python."""
    dim = len(points[0])
    n = len(points)
    labels = sorted(set(groups))
    k = len(labels)

    def mean(rows):
        return [sum(r[d] for r in rows) / len(rows) for d in range(dim)]

    def dist(a, b):
        return math.sqrt(sum((a[d] - b[d]) ** 2 for d in range(dim)))

    grand = mean(points)
    between = within = 0.0
    for lab in labels:
        rows = [p for p, g in zip(points, groups) if g == lab]
        c = mean(rows)
        between += len(rows) * dist(c, grand)
        within += sum(dist(r, c) for r in rows)
    return (n - k) * between / ((k - 1) * within)


def rand_bruteforce(a, b) -> float:
    pairs = list(itertools.combinations(range(len(a)), 2))
    agree = sum((a[i] == a[j]) == (b[i] == b[j]) for i, j in pairs)
    return agree / len(pairs)


def accuracy_bruteforce(pred, truth) -> float:
    plabs = sorted(set(pred))
    tlabs = sorted(set(truth))
    best = 0
    pad = tlabs + [None] * max(0, len(plabs) - len(tlabs))
    for image in itertools.permutations(pad, len(plabs)):
        mapping = dict(zip(plabs, image))
        best = max(best, sum(mapping[p] == t for p, t in zip(pred, truth)))
    return best / len(pred)


def binomial_tail_exact(n: int, observed: int, p: Fraction) -> Fraction:
    return sum(
        (math.comb(n, j) * p**j * (1 - p) ** (n - j) for j in range(observed, n + 1)),
        Fraction(0),
    )


def average_linkage_bruteforce(d, clusters_a, clusters_b) -> float:
    total = sum(d[i][j] for i in clusters_a for j in clusters_b)
    return total / (len(clusters_a) * len(clusters_b))


def trapezoid_exact(times, concs) -> Fraction:
    t = [Fraction(str(v)) for v in times]
    c = [Fraction(str(v)) for v in concs]
    return sum(((t[i + 1] - t[i]) * (c[i] + c[i + 1]) / 2 for i in range(len(t) - 1)), Fraction(0))
