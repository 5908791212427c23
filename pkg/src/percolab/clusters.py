"""Cluster labelling, hole filling and the boundary of a filled 1*cluster.

A *0cluster* is a maximal nearest-connected set of 0 spins, a *1*cluster* a
maximal star-connected set of 1 spins. On a finite window "infinite" is read
as "spanning": touching two opposite window edges.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy import ndimage

from .lattice import Box, Configuration, Kind, Site

_STRUCTURE = {
    Kind.NEAREST: ndimage.generate_binary_structure(2, 1),
    Kind.STAR: ndimage.generate_binary_structure(2, 2),
}

LEFT, RIGHT, BOTTOM, TOP = 1, 2, 4, 8


@dataclass(frozen=True)
class ClusterLabeling:
    """Partition of the sites of one spin into clusters of one adjacency kind.

    ``labels[y - ymin, x - xmin]`` is the cluster id of a site, or -1 when the
    site carries the other spin. Ids follow the row-major order of each
    cluster's first site.
    """

    window: Box
    spin: int
    kind: Kind
    labels: np.ndarray
    sizes: np.ndarray
    edges: np.ndarray  # bit set of LEFT/RIGHT/BOTTOM/TOP per cluster

    def __len__(self) -> int:
        return len(self.sizes)

    def label(self, site: Site) -> int:
        if site not in self.window:
            raise KeyError(site)
        return int(self.labels[site[1] - self.window.ymin, site[0] - self.window.xmin])

    def sites(self, cluster: int) -> list[Site]:
        ys, xs = np.nonzero(self.labels == cluster)
        return [(int(x) + self.window.xmin, int(y) + self.window.ymin) for y, x in zip(ys, xs)]

    def mask(self, cluster: int) -> np.ndarray:
        return self.labels == cluster

    def touches_edge(self, cluster: int) -> bool:
        return bool(self.edges[cluster])

    def spans(self, cluster: int) -> bool:
        e = int(self.edges[cluster])
        return (e & LEFT and e & RIGHT) or (e & BOTTOM and e & TOP)

    def check_id(self, cluster: int, spin: int | None = None, kind: Kind | None = None):
        if spin is not None and self.spin != spin or kind is not None and self.kind is not Kind(kind):
            raise ValueError(f"labelling is of ({self.spin}, {self.kind.value}) clusters")
        if not 0 <= cluster < len(self):
            raise ValueError(f"no cluster with id {cluster}")


def label_clusters(cfg: Configuration, spin: int, kind: Kind | str) -> ClusterLabeling:
    kind = Kind(kind)
    raw, n = ndimage.label(cfg.spins == spin, structure=_STRUCTURE[kind])
    flat = raw.ravel()
    # ndimage numbers components in scan order already; renumber anyway so the
    # ordering contract does not hinge on that implementation detail
    present = np.nonzero(flat)[0]
    _, first = np.unique(flat[present], return_index=True)
    order = np.argsort(present[first], kind="stable")
    remap = np.full(n + 1, -1, dtype=np.int64)
    remap[1 + order] = np.arange(n)
    labels = remap[raw]
    sizes = np.bincount(labels[labels >= 0], minlength=n)
    edges = np.zeros(n, dtype=np.int64)
    for side, strip in ((LEFT, labels[:, 0]), (RIGHT, labels[:, -1]),
                        (BOTTOM, labels[0, :]), (TOP, labels[-1, :])):
        ids = np.unique(strip[strip >= 0])
        edges[ids] |= side
    return ClusterLabeling(cfg.window, spin, kind, labels, sizes, edges)


def spanning_clusters(cfg: Configuration, spin: int, kind: Kind | str) -> set[int]:
    lab = label_clusters(cfg, spin, kind)
    return {i for i in range(len(lab)) if lab.spans(i)}


def _one_star(cfg: Configuration, labeling: ClusterLabeling | None) -> ClusterLabeling:
    if labeling is None:
        return label_clusters(cfg, 1, Kind.STAR)
    if labeling.window != cfg.window:
        raise ValueError("labelling belongs to another window")
    return labeling


def hole_mask(cfg: Configuration, cluster: int, labeling: ClusterLabeling | None = None) -> np.ndarray:
    """Boolean mask of the 0clusters encircled by the given 1*cluster.

    A 0cluster counts as encircled when it does not touch the window edge and
    every site of its nearest boundary lies in the given 1*cluster.
    """
    ones = _one_star(cfg, labeling)
    ones.check_id(cluster, spin=1, kind=Kind.STAR)
    zeros = label_clusters(cfg, 0, Kind.NEAREST)
    if not len(zeros):
        return np.zeros_like(cfg.spins, dtype=bool)
    bad = zeros.edges != 0
    zl = zeros.labels
    mine = ones.labels == cluster
    # pair every 0 site with each nearest neighbour inside the window
    for a, b, m in ((zl[:, :-1], mine[:, 1:], ones.labels[:, 1:]),
                    (zl[:, 1:], mine[:, :-1], ones.labels[:, :-1]),
                    (zl[:-1, :], mine[1:, :], ones.labels[1:, :]),
                    (zl[1:, :], mine[:-1, :], ones.labels[:-1, :])):
        foreign = (a >= 0) & (m >= 0) & ~b
        bad[np.unique(a[foreign])] = True
    good = np.nonzero(~bad)[0]
    return np.isin(zl, good)


def fill_holes(cfg: Configuration, cluster: int, labeling: ClusterLabeling | None = None) -> Configuration:
    holes = hole_mask(cfg, cluster, labeling)
    spins = cfg.spins.copy()
    spins[holes] = 1
    return Configuration(cfg.window, spins)


@dataclass(frozen=True)
class BoundaryCurve:
    """Closed rectilinear polygons bounding a union of side-3/2 squares.

    Vertices are stored scaled by 4, so every coordinate is an integer.
    Outer loops run counterclockwise and holes clockwise: the filled side is
    always on the left, the 0-side on the right.
    """

    polygons: tuple[tuple[tuple[int, int], ...], ...]
    zero_side: str = "right"

    @property
    def length(self) -> Fraction:
        total = 0
        for poly in self.polygons:
            for (x0, y0), (x1, y1) in zip(poly, poly[1:]):
                total += abs(x1 - x0) + abs(y1 - y0)
        return Fraction(total, 4)

    def vertices(self) -> list[list[tuple[Fraction, Fraction]]]:
        return [[(Fraction(x, 4), Fraction(y, 4)) for x, y in poly] for poly in self.polygons]

    def to_json(self) -> list:
        return [[[x, y] for x, y in poly] for poly in self.polygons]

    def contains(self, point) -> bool:
        """Even-odd test for a point given in lattice units."""
        px, py = Fraction(point[0]) * 4, Fraction(point[1]) * 4
        inside = False
        for poly in self.polygons:
            for (x0, y0), (x1, y1) in zip(poly, poly[1:]):
                if (y0 > py) != (y1 > py):
                    xc = x0 + (py - y0) * (x1 - x0) / (y1 - y0)
                    if xc > px:
                        inside = not inside
        return inside

    def separates(self, a, b) -> bool:
        return self.contains(a) != self.contains(b)


def _trace_cells(filled: np.ndarray, x0: int, y0: int) -> list[tuple[tuple[int, int], ...]]:
    """Directed boundary loops of a cell set, filled side on the left.

    ``filled[j, i]`` is the unit cell with lower-left corner ``(x0 + i, y0 + j)``.
    """
    f = np.pad(filled, 1)
    x0, y0 = x0 - 1, y0 - 1
    nxt: dict[tuple[int, int], tuple[int, int]] = {}

    def add(a, b):
        if a in nxt:
            raise RuntimeError(f"ambiguous boundary vertex {a}")
        nxt[a] = b

    below = f[1:, :] & ~f[:-1, :]  # cell filled, cell below empty: edge on its bottom
    for j, i in zip(*np.nonzero(below)):
        x, y = x0 + i, y0 + j + 1
        add((x, y), (x + 1, y))
    above = f[:-1, :] & ~f[1:, :]
    for j, i in zip(*np.nonzero(above)):
        x, y = x0 + i, y0 + j + 1
        add((x + 1, y), (x, y))
    left = f[:, 1:] & ~f[:, :-1]
    for j, i in zip(*np.nonzero(left)):
        x, y = x0 + i + 1, y0 + j
        add((x, y + 1), (x, y))
    right = f[:, :-1] & ~f[:, 1:]
    for j, i in zip(*np.nonzero(right)):
        x, y = x0 + i + 1, y0 + j
        add((x, y), (x, y + 1))

    loops = []
    while nxt:
        start = min(nxt)
        loop = [start]
        cur = nxt.pop(start)
        while cur != start:
            loop.append(cur)
            cur = nxt.pop(cur)
        loops.append(_merge_collinear(loop))
    return loops


def _merge_collinear(loop: list[tuple[int, int]]) -> tuple[tuple[int, int], ...]:
    n = len(loop)
    keep = []
    for k in range(n):
        a, b, c = loop[k - 1], loop[k], loop[(k + 1) % n]
        if (b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0]) != 0:
            keep.append(b)
    keep = [(int(x), int(y)) for x, y in keep]
    return tuple(keep + keep[:1])


def boundary_curve_of_sites(sites) -> BoundaryCurve:
    """Boundary of the union of side-3/2 squares centred at ``sites``."""
    sites = list(sites)
    if not sites:
        raise ValueError("cannot draw the boundary of an empty cluster")
    xs = np.array([s[0] for s in sites])
    ys = np.array([s[1] for s in sites])
    x0, y0 = 4 * int(xs.min()) - 3, 4 * int(ys.min()) - 3
    w = 4 * int(xs.max() - xs.min()) + 6
    h = 4 * int(ys.max() - ys.min()) + 6
    filled = np.zeros((h, w), dtype=bool)
    for x, y in zip(xs, ys):
        i, j = 4 * int(x) - 3 - x0, 4 * int(y) - 3 - y0
        filled[j:j + 6, i:i + 6] = True
    return BoundaryCurve(tuple(_trace_cells(filled, x0, y0)))


def boundary_curve(cfg: Configuration, cluster: int, labeling: ClusterLabeling | None = None) -> BoundaryCurve:
    ones = _one_star(cfg, labeling)
    ones.check_id(cluster, spin=1, kind=Kind.STAR)
    return boundary_curve_of_sites(ones.sites(cluster))


@dataclass(frozen=True)
class SideDecomposition:
    zero_side: frozenset
    one_side: frozenset


def side_decomposition(cfg: Configuration, zero_cluster: int, one_cluster: int) -> SideDecomposition:
    """Split the window into the filled 1*cluster and everything else."""
    zeros = label_clusters(cfg, 0, Kind.NEAREST)
    ones = label_clusters(cfg, 1, Kind.STAR)
    zeros.check_id(zero_cluster)
    ones.check_id(one_cluster)
    if not zeros.spans(zero_cluster) or not ones.spans(one_cluster):
        raise ValueError("both designated clusters must span the window")
    mask = (ones.labels == one_cluster) | hole_mask(cfg, one_cluster, ones)
    w = cfg.window
    one_side = set()
    zero_side = set()
    for y in range(w.side):
        for x in range(w.side):
            (one_side if mask[y, x] else zero_side).add((x + w.xmin, y + w.ymin))
    return SideDecomposition(frozenset(zero_side), frozenset(one_side))


def filled_cluster_sites(cfg: Configuration, cluster: int, labeling: ClusterLabeling | None = None) -> list[Site]:
    ones = _one_star(cfg, labeling)
    mask = (ones.labels == cluster) | hole_mask(cfg, cluster, ones)
    ys, xs = np.nonzero(mask)
    return [(int(x) + cfg.window.xmin, int(y) + cfg.window.ymin) for y, x in zip(ys, xs)]
