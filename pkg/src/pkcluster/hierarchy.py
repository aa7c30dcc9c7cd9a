"""Agglomerative hierarchical clustering over a precomputed dissimilarity matrix.

Node references follow the usual linkage-matrix convention: leaves are
``0 .. n-1`` in input order and the ``i``-th merge creates node ``n + i``.
"""

from __future__ import annotations

import json
import re
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass
from html import escape
from pathlib import Path

import numpy as np

from pkcluster._format import fmt_float
from pkcluster.dissimilarity import DissimilarityMatrix, check_matrix
from pkcluster.errors import InputError, InvalidMatrix, KOutOfRange, ParseError

LINKAGES = ("average", "single", "complete")


@dataclass(frozen=True)
class Merge:
    left: int
    right: int
    height: float
    size: int


@dataclass(frozen=True)
class Dendrogram:
    leaves: tuple[str, ...]
    merges: tuple[Merge, ...]
    linkage: str = "average"

    def __post_init__(self):
        n = len(self.leaves)
        if len(self.merges) != max(n - 1, 0):
            raise InvalidMatrix(f"{n} leaves need {n - 1} merges, got {len(self.merges)}")
        used = set()
        sizes = [1] * n
        for i, m in enumerate(self.merges):
            for ref in (m.left, m.right):
                if not 0 <= ref < n + i or ref in used:
                    raise InvalidMatrix(f"merge {i} references invalid node {ref}")
                used.add(ref)
            if m.size != sizes[m.left] + sizes[m.right]:
                raise InvalidMatrix(f"merge {i} size {m.size} is inconsistent")
            sizes.append(m.size)

    @property
    def n(self) -> int:
        return len(self.leaves)

    @property
    def heights(self) -> np.ndarray:
        return np.array([m.height for m in self.merges])

    def members(self, node: int) -> list[int]:
        """Leaf indices under ``node``, left to right."""
        out = []
        stack = [node]
        while stack:
            v = stack.pop()
            if v < self.n:
                out.append(v)
            else:
                m = self.merges[v - self.n]
                stack.append(m.right)
                stack.append(m.left)
        return out

    def leaf_order(self) -> list[int]:
        """Left-to-right leaf order for drawing."""
        if self.n == 1:
            return [0]
        return self.members(self.n + len(self.merges) - 1)

    def to_linkage_matrix(self) -> np.ndarray:
        """Four-column linkage matrix (left, right, height, size)."""
        return np.array([[m.left, m.right, m.height, m.size] for m in self.merges], dtype=float)


@dataclass(frozen=True)
class Partition:
    """Assignment of curve ids to clusters ``1..k`` (no empty cluster)."""

    assignment: Mapping[str, int]
    k: int

    def __post_init__(self):
        a = {str(key): int(v) for key, v in dict(self.assignment).items()}
        if set(a.values()) != set(range(1, self.k + 1)):
            raise InputError(f"partition must use every cluster index 1..{self.k}")
        object.__setattr__(self, "assignment", a)

    @classmethod
    def from_labels(cls, ids: Sequence[str], labels: Sequence) -> Partition:
        """Relabel arbitrary group labels to ``1..k`` by first appearance."""
        index: dict = {}
        a = {}
        for cid, lab in zip(ids, labels):
            if lab not in index:
                index[lab] = len(index) + 1
            a[str(cid)] = index[lab]
        return cls(a, len(index))

    @property
    def ids(self) -> tuple[str, ...]:
        return tuple(self.assignment)

    def labels_for(self, ids: Sequence[str]) -> np.ndarray:
        return np.array([self.assignment[i] for i in ids])

    def clusters(self) -> dict[int, list[str]]:
        out: dict[int, list[str]] = {c: [] for c in range(1, self.k + 1)}
        for cid, c in self.assignment.items():
            out[c].append(cid)
        return out

    def sizes(self) -> list[int]:
        return [len(v) for v in self.clusters().values()]

    def canonical(self) -> frozenset[frozenset[str]]:
        """The partition as a set of id sets, independent of cluster numbering."""
        return frozenset(frozenset(v) for v in self.clusters().values())


def agglomerate(matrix: DissimilarityMatrix, linkage: str = "average") -> Dendrogram:
    """Bottom-up clustering: repeatedly merge the two closest clusters.

    Average linkage uses the mean of all cross-cluster dissimilarities,
    single the minimum and complete the maximum. Ties at the minimum are
    broken by the smallest pair of cluster representatives, a cluster's
    representative being its smallest member id, so the result does not
    depend on row order.
    """
    if linkage not in LINKAGES:
        raise InputError(f"unknown linkage {linkage!r}; choose from {LINKAGES}")
    ids = matrix.ids
    d = np.array(matrix.values, dtype=float)
    check_matrix(d, len(ids))
    n = len(ids)
    if n < 2:
        raise InputError("need at least 2 curves to cluster")

    # Pairwise linkage values between active slots; inf marks inactive.
    link = d.copy()
    np.fill_diagonal(link, np.inf)
    sums = d.copy() if linkage == "average" else None
    size = np.ones(n, dtype=np.int64)
    node = list(range(n))
    rep = list(ids)
    active = np.ones(n, dtype=bool)
    merges = []

    for step in range(n - 1):
        h = link.min()
        ii, jj = np.nonzero(np.triu(link == h, 1))
        if len(ii) == 1:
            a, b = int(ii[0]), int(jj[0])
        else:
            a, b = min(zip(ii.tolist(), jj.tolist()), key=lambda p: sorted((rep[p[0]], rep[p[1]])))
        if rep[b] < rep[a]:
            a, b = b, a
        merges.append(Merge(node[a], node[b], float(h), int(size[a] + size[b])))

        # slot a now holds the merged cluster; slot b is retired
        if linkage == "average":
            sums[a] = sums[a] + sums[b]
            sums[:, a] = sums[a]
            new = sums[a] / ((size[a] + size[b]) * size)
        elif linkage == "single":
            new = np.minimum(link[a], link[b])
        else:
            new = np.maximum(link[a], link[b])
        size[a] += size[b]
        active[b] = False
        new = np.where(active, new, np.inf)
        new[a] = np.inf
        link[a] = new
        link[:, a] = new
        link[b] = np.inf
        link[:, b] = np.inf
        node[a] = n + step
        rep[a] = min(rep[a], rep[b])

    return Dendrogram(ids, tuple(merges), linkage)


def cut(tree: Dendrogram, k: int) -> Partition:
    """Partition into ``k`` clusters by undoing the last ``k - 1`` merges.

    Clusters are numbered by the position of their first leaf in
    ``tree.leaves``.
    """
    n = tree.n
    if not 1 <= k <= n:
        raise KOutOfRange(f"k must be between 1 and {n}, got {k}")
    kept = n - k
    consumed = set()
    for m in tree.merges[:kept]:
        consumed.update((m.left, m.right))
    labels = [0] * n
    for root in range(n + kept):
        if root not in consumed:
            for leaf in tree.members(root):
                labels[leaf] = root
    return Partition.from_labels(tree.leaves, labels)


def cut_height(tree: Dendrogram, k: int) -> float:
    """A horizontal line height that yields ``k`` clusters when drawn."""
    h = tree.heights
    if k <= 1:
        return float(h[-1]) * 1.05 if len(h) else 0.0
    lo = h[-k] if k <= len(h) else 0.0
    hi = h[-k + 1] if k - 1 <= len(h) else lo
    return float((lo + hi) / 2)


# ---------------------------------------------------------------------------
# Export formats
# ---------------------------------------------------------------------------

_NEWICK_UNSAFE = re.compile(r"[\s(),:;\[\]']")


def _newick_label(s: str) -> str:
    if _NEWICK_UNSAFE.search(s):
        return "'" + s.replace("'", "''") + "'"
    return s


def to_newick(tree: Dendrogram) -> str:
    """Newick string; branch length = parent height minus child height."""
    n = tree.n
    if n == 1:
        return _newick_label(tree.leaves[0]) + ";"

    def height(v):
        return 0.0 if v < n else tree.merges[v - n].height

    text: dict[int, str] = {i: _newick_label(lab) for i, lab in enumerate(tree.leaves)}
    for i, m in enumerate(tree.merges):
        parts = []
        for child in (m.left, m.right):
            parts.append(f"{text.pop(child)}:{fmt_float(m.height - height(child))}")
        text[n + i] = "(" + ",".join(parts) + ")"
    return text[n + len(tree.merges) - 1] + ";"


def to_json(tree: Dendrogram) -> str:
    doc = {
        "leaves": list(tree.leaves),
        "merges": [
            {"left": m.left, "right": m.right, "height": m.height, "size": m.size}
            for m in tree.merges
        ],
        "linkage": tree.linkage,
    }
    return json.dumps(doc, indent=1)


def from_json(text: str) -> Dendrogram:
    try:
        doc = json.loads(text)
        merges = tuple(
            Merge(int(m["left"]), int(m["right"]), float(m["height"]), int(m["size"]))
            for m in doc["merges"]
        )
        return Dendrogram(tuple(doc["leaves"]), merges, doc.get("linkage", "average"))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, InvalidMatrix):
            raise
        raise ParseError(f"not a dendrogram document: {exc}") from exc


def to_svg(
    tree: Dendrogram,
    cut_at: float | None = None,
    highlight: Iterable[str] = (),
    width: int | None = None,
    height: int = 400,
) -> str:
    """Plain SVG drawing of the tree.

    Branches are ``<polyline>`` elements so that the optional horizontal
    cut marker is the only ``<line>``. Leaves listed in ``highlight`` get
    red labels.
    """
    n = tree.n
    highlight = set(highlight)
    order = tree.leaf_order()
    step = 14
    margin_l, margin_r, margin_t, margin_b = 50, 20, 20, 90
    width = width or max(300, margin_l + margin_r + step * n)
    plot_h = height - margin_t - margin_b
    top = float(tree.heights.max()) if len(tree.merges) else 1.0
    top = top if top > 0 else 1.0
    top_lim = max(top, cut_at or 0.0) * 1.05

    def y_of(hval):
        return margin_t + plot_h * (1 - hval / top_lim)

    xpos = {}
    for slot, leaf in enumerate(order):
        xpos[leaf] = margin_l + step * (slot + 0.5)
    ypos = {i: y_of(0.0) for i in range(n)}

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<title>dendrogram ({escape(tree.linkage)} linkage, {n} leaves)</title>',
        '<g class="branches" fill="none" stroke="black" stroke-width="1">',
    ]
    for i, m in enumerate(tree.merges):
        v = n + i
        ym = y_of(m.height)
        xl, xr = xpos[m.left], xpos[m.right]
        out.append(
            f'<polyline points="{xl:.2f},{ypos[m.left]:.2f} {xl:.2f},{ym:.2f} '
            f'{xr:.2f},{ym:.2f} {xr:.2f},{ypos[m.right]:.2f}"/>'
        )
        xpos[v] = (xl + xr) / 2
        ypos[v] = ym
    out.append("</g>")
    out.append('<g class="leaves" font-family="sans-serif" font-size="9">')
    for leaf in order:
        x = xpos[leaf]
        y = y_of(0.0) + 4
        label = escape(tree.leaves[leaf])
        attrs = ' class="highlight" fill="red" font-weight="bold"' if tree.leaves[leaf] in highlight else ""
        out.append(
            f'<text x="{x:.2f}" y="{y:.2f}" transform="rotate(90 {x:.2f} {y:.2f})"{attrs}>{label}</text>'
        )
    out.append("</g>")
    if cut_at is not None:
        yc = y_of(cut_at)
        out.append(
            f'<line class="cut" x1="{margin_l - 5}" y1="{yc:.2f}" x2="{width - margin_r}" '
            f'y2="{yc:.2f}" stroke="red" stroke-dasharray="4 3"/>'
        )
    out.append("</svg>")
    return "\n".join(out) + "\n"


def export_dendrogram(
    tree: Dendrogram,
    directory: str | Path,
    stem: str = "dendrogram",
    cut_at: float | None = None,
    highlight: Iterable[str] = (),
) -> dict[str, Path]:
    """Write ``.nwk``, ``.json`` and ``.svg`` renderings of ``tree``."""
    directory = Path(directory)
    paths = {
        "newick": directory / f"{stem}.nwk",
        "json": directory / f"{stem}.json",
        "svg": directory / f"{stem}.svg",
    }
    paths["newick"].write_text(to_newick(tree) + "\n", encoding="utf-8")
    paths["json"].write_text(to_json(tree) + "\n", encoding="utf-8")
    paths["svg"].write_text(to_svg(tree, cut_at, highlight), encoding="utf-8")
    return paths
