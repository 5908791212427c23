"""Finite windows of the matching pair (Z^2, Z^2*).

Sites are plain ``(x, y)`` integer tuples. Two sites are *nearest* adjacent
when their Euclidean distance is 1 and *star* adjacent when it is 1 or
sqrt(2). Everything here is windowed: a :class:`Configuration` only knows the
spins inside its :class:`Box`, and reading outside raises ``KeyError``.
"""
from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

import numpy as np

Site = tuple[int, int]


class Kind(str, enum.Enum):
    NEAREST = "nearest"
    STAR = "star"

    @property
    def offsets(self) -> tuple[Site, ...]:
        return NEAREST_OFFSETS if self is Kind.NEAREST else STAR_OFFSETS

    @property
    def dual(self) -> "Kind":
        return Kind.STAR if self is Kind.NEAREST else Kind.NEAREST


# row-major neighbour order (lowest y first, then lowest x); searches rely on it
NEAREST_OFFSETS: tuple[Site, ...] = ((0, -1), (-1, 0), (1, 0), (0, 1))
STAR_OFFSETS: tuple[Site, ...] = (
    (-1, -1), (0, -1), (1, -1),
    (-1, 0), (1, 0),
    (-1, 1), (0, 1), (1, 1),
)


class LatticeError(ValueError):
    """Raised for malformed geometric input (bad paths, boxes, annuli)."""


def adjacency(a: Site, b: Site, kind: Kind | str) -> bool:
    kind = Kind(kind)
    dx, dy = abs(a[0] - b[0]), abs(a[1] - b[1])
    if kind is Kind.NEAREST:
        return dx + dy == 1
    return max(dx, dy) == 1


def neighbours(site: Site, kind: Kind | str) -> Iterator[Site]:
    x, y = site
    for dx, dy in Kind(kind).offsets:
        yield (x + dx, y + dy)


def boundary(sites: Iterable[Site], kind: Kind | str = Kind.NEAREST) -> set[Site]:
    """Sites outside ``sites`` that are adjacent (or *adjacent) to it."""
    block = set(sites)
    out = set()
    for s in block:
        for n in neighbours(s, kind):
            if n not in block:
                out.add(n)
    return out


@dataclass(frozen=True)
class Box:
    """The square ``center + {-d..d}^2``."""

    half_width: int
    center: Site = (0, 0)

    def __post_init__(self):
        if self.half_width < 0:
            raise LatticeError(f"negative half width {self.half_width}")
        object.__setattr__(self, "center", (int(self.center[0]), int(self.center[1])))

    @property
    def side(self) -> int:
        return 2 * self.half_width + 1

    @property
    def xmin(self) -> int:
        return self.center[0] - self.half_width

    @property
    def ymin(self) -> int:
        return self.center[1] - self.half_width

    @property
    def xmax(self) -> int:
        return self.center[0] + self.half_width

    @property
    def ymax(self) -> int:
        return self.center[1] + self.half_width

    def __contains__(self, site) -> bool:
        return (self.xmin <= site[0] <= self.xmax) and (self.ymin <= site[1] <= self.ymax)

    def __len__(self) -> int:
        return self.side * self.side

    def __iter__(self) -> Iterator[Site]:
        for y in range(self.ymin, self.ymax + 1):
            for x in range(self.xmin, self.xmax + 1):
                yield (x, y)

    def sup_distance(self, site: Site) -> int:
        return max(abs(site[0] - self.center[0]), abs(site[1] - self.center[1]))

    def ring(self) -> list[Site]:
        """Sites of the box at maximal sup-distance from the centre (row-major)."""
        return [s for s in self if self.sup_distance(s) == self.half_width]

    def grown(self, by: int = 1) -> "Box":
        return Box(self.half_width + by, self.center)

    def contains_box(self, other: "Box") -> bool:
        return (
            self.xmin <= other.xmin and other.xmax <= self.xmax
            and self.ymin <= other.ymin and other.ymax <= self.ymax
        )


@dataclass(frozen=True)
class Annulus:
    """Sites of ``outer`` that are not in ``inner``.

    ``inner`` together with its *boundary must sit inside ``outer`` minus the
    outer edge ring, so the annulus is at least two rings thick.
    """

    inner: Box
    outer: Box

    def __post_init__(self):
        if self.outer.half_width < 1 or not self.outer.grown(-1).contains_box(self.inner.grown(1)):
            raise LatticeError(f"{self.inner} is not strictly inside {self.outer}")

    def __contains__(self, site) -> bool:
        return site in self.outer and site not in self.inner

    def __iter__(self) -> Iterator[Site]:
        return (s for s in self.outer if s not in self.inner)

    def __len__(self) -> int:
        return len(self.outer) - len(self.inner)

    def inner_ring(self) -> list[Site]:
        """The *boundary of the inner box (the first ring of the annulus)."""
        return self.inner.grown(1).ring()

    def outer_ring(self) -> list[Site]:
        return self.outer.ring()


def annulus(inner: int | Box, outer: int | Box) -> Annulus:
    inner = inner if isinstance(inner, Box) else Box(inner)
    outer = outer if isinstance(outer, Box) else Box(outer)
    return Annulus(inner, outer)


class Configuration:
    """Spins in {0, 1} on a square window.

    ``spins[y - ymin, x - xmin]`` holds the spin of site ``(x, y)``; row 0 is
    the lowest y.
    """

    __slots__ = ("window", "spins")

    def __init__(self, window: Box, spins):
        spins = np.asarray(spins, dtype=np.uint8)
        if spins.shape != (window.side, window.side):
            raise LatticeError(f"spin array {spins.shape} does not match window side {window.side}")
        if spins.size and spins.max() > 1:
            raise LatticeError("spins must be 0 or 1")
        self.window = window
        self.spins = spins

    @classmethod
    def constant(cls, window: Box, value: int) -> "Configuration":
        return cls(window, np.full((window.side, window.side), value, dtype=np.uint8))

    @classmethod
    def from_sites(cls, window: Box, ones: Iterable[Site], background: int = 0) -> "Configuration":
        cfg = cls.constant(window, background)
        return cfg.with_spins(ones, 1 - background)

    def __contains__(self, site) -> bool:
        return site in self.window

    def __getitem__(self, site: Site) -> int:
        if site not in self.window:
            raise KeyError(f"site {site} is outside window {self.window}")
        return int(self.spins[site[1] - self.window.ymin, site[0] - self.window.xmin])

    def get(self, site: Site, default=None):
        if site not in self.window:
            return default
        return int(self.spins[site[1] - self.window.ymin, site[0] - self.window.xmin])

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Configuration)
            and self.window == other.window
            and np.array_equal(self.spins, other.spins)
        )

    def __repr__(self) -> str:
        return f"Configuration(window={self.window}, ones={int(self.spins.sum())})"

    def sites_with(self, spin: int) -> list[Site]:
        ys, xs = np.nonzero(self.spins == spin)
        return [(int(x) + self.window.xmin, int(y) + self.window.ymin) for y, x in zip(ys, xs)]

    def with_spins(self, sites: Iterable[Site], value: int) -> "Configuration":
        spins = self.spins.copy()
        for s in sites:
            if s not in self.window:
                raise KeyError(f"site {s} is outside window {self.window}")
            spins[s[1] - self.window.ymin, s[0] - self.window.xmin] = value
        return Configuration(self.window, spins)


@dataclass(frozen=True)
class PathTrace:
    """An ordered site sequence whose consecutive sites are ``kind``-adjacent."""

    sites: tuple[Site, ...]
    kind: Kind = Kind.NEAREST
    self_avoiding: bool = field(default=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "sites", tuple((int(x), int(y)) for x, y in self.sites))
        object.__setattr__(self, "kind", Kind(self.kind))
        if not self.sites:
            raise LatticeError("a path has at least one site")
        for a, b in zip(self.sites, self.sites[1:]):
            if not adjacency(a, b, self.kind):
                raise LatticeError(f"{a} and {b} are not {self.kind.value}-adjacent")
        if self.self_avoiding and len(set(self.sites)) != len(self.sites):
            raise LatticeError("path is flagged self-avoiding but repeats a site")

    def __len__(self) -> int:
        return len(self.sites)

    def __iter__(self):
        return iter(self.sites)

    @property
    def start(self) -> Site:
        return self.sites[0]

    @property
    def end(self) -> Site:
        return self.sites[-1]

    def is_self_avoiding(self) -> bool:
        return len(set(self.sites)) == len(self.sites)

    def reversed(self) -> "PathTrace":
        return type(self)(self.sites[::-1], self.kind, self.self_avoiding)


@dataclass(frozen=True)
class Circuit(PathTrace):
    """A path whose last site is adjacent to its first."""

    def __post_init__(self):
        super().__post_init__()
        if len(self.sites) < 2 or not adjacency(self.sites[-1], self.sites[0], self.kind):
            raise LatticeError("circuit endpoints are not adjacent")

    def edges(self) -> Iterator[tuple[Site, Site]]:
        n = len(self.sites)
        for i in range(n):
            yield self.sites[i], self.sites[(i + 1) % n]


def is_path(sites: Sequence[Site], kind: Kind | str) -> bool:
    return len(sites) >= 1 and all(adjacency(a, b, kind) for a, b in zip(sites, sites[1:]))


def row_path(h: int, m: int) -> PathTrace:
    """The shortest nearest path from ``(-m-1, h)`` to ``(m+1, h)``."""
    if m < 0:
        raise LatticeError("m must be non-negative")
    return PathTrace(tuple((x, h) for x in range(-m - 1, m + 2)), Kind.NEAREST, self_avoiding=True)


# -- interior / exterior -----------------------------------------------------
#
# The plane is refined by a factor of two: site (x, y) sits at (2x, 2y), edge
# midpoints at (odd, even) / (even, odd) and plaquette centres at (odd, odd).
# The polygon blocks its vertices, the midpoints of its unit edges and the
# centres of its diagonal edges. Free refined points are joined by half-steps
# and by corner cuts between two edge midpoints of one plaquette, which are
# legal unless the diagonal through the cut corner belongs to the polygon.


def _polygon_blocks(sites: Sequence[Site]):
    blocked = set()
    diagonals = set()
    n = len(sites)
    for i in range(n):
        a, b = sites[i], sites[(i + 1) % n]
        blocked.add((2 * a[0], 2 * a[1]))
        if a == b:
            continue
        mid = (a[0] + b[0], a[1] + b[1])
        blocked.add(mid)
        if a[0] != b[0] and a[1] != b[1]:
            diagonals.add(frozenset((a, b)))
    return blocked, diagonals


def enclosed_sites(sites: Sequence[Site], window: Box | None = None) -> set[Site]:
    """Lattice sites in bounded components of the plane minus the closed polygon."""
    if not sites:
        return set()
    xs = [s[0] for s in sites]
    ys = [s[1] for s in sites]
    lo_x, hi_x = 2 * min(xs) - 2, 2 * max(xs) + 2
    lo_y, hi_y = 2 * min(ys) - 2, 2 * max(ys) + 2
    blocked, diagonals = _polygon_blocks(sites)

    def free(p):
        return lo_x <= p[0] <= hi_x and lo_y <= p[1] <= hi_y and p not in blocked

    start = (lo_x, lo_y)
    seen = {start}
    queue = deque([start])
    while queue:
        px, py = queue.popleft()
        steps = [(px + 1, py), (px - 1, py), (px, py + 1), (px, py - 1)]
        if (px + py) % 2 == 1:
            # edge midpoint: corner cuts into the two plaquettes it borders
            if px % 2 == 1:  # horizontal edge, plaquettes above and below
                for dy in (1, -1):
                    for dx in (1, -1):
                        corner = ((px + dx) // 2, py // 2)
                        other = ((px - dx) // 2, (py + 2 * dy) // 2)
                        if frozenset((corner, other)) not in diagonals:
                            steps.append((px + dx, py + dy))
            else:  # vertical edge, plaquettes left and right
                for dx in (1, -1):
                    for dy in (1, -1):
                        corner = (px // 2, (py + dy) // 2)
                        other = ((px + 2 * dx) // 2, (py - dy) // 2)
                        if frozenset((corner, other)) not in diagonals:
                            steps.append((px + dx, py + dy))
        for q in steps:
            if q not in seen and free(q):
                seen.add(q)
                queue.append(q)

    on = set(sites)
    inside = set()
    for y in range(min(ys), max(ys) + 1):
        for x in range(min(xs), max(xs) + 1):
            if (x, y) not in on and (2 * x, 2 * y) not in seen:
                inside.add((x, y))
    if window is not None:
        inside = {s for s in inside if s in window}
    return inside


def interior_exterior(c: Circuit, window: Box | None = None) -> tuple[set[Site], set[Site]]:
    """Split ``window`` minus the circuit into enclosed and non-enclosed sites.

    Without a window, the circuit's bounding box grown by one is used.
    """
    if not c.is_self_avoiding():
        raise LatticeError("interior is only defined for self-avoiding circuits")
    if window is None:
        xs = [s[0] for s in c.sites]
        ys = [s[1] for s in c.sites]
        half = max(max(xs) - min(xs), max(ys) - min(ys)) // 2 + 2
        window = Box(half, ((max(xs) + min(xs)) // 2, (max(ys) + min(ys)) // 2))
    inside = enclosed_sites(c.sites, window)
    on = set(c.sites)
    outside = {s for s in window if s not in inside and s not in on}
    return inside, outside
