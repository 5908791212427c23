"""Winding numbers, circuit extraction and the matching-pair dichotomy.

Windings are measured around a lattice site ``center`` with exact integer
arithmetic. The reference ray leaves the centre towards +x; a vertex lying on
the ray counts as infinitesimally above it, so every step of a path either
crosses the ray (+1 upwards, -1 downwards) or does not. An open path adds
the angle between its endpoints, which is an exact multiple of 1/8 when both
endpoints sit on an axis or diagonal through the centre and a float
otherwise.
"""
from __future__ import annotations

import enum
import math
from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

from .lattice import (
    Annulus,
    Box,
    Circuit,
    Configuration,
    Kind,
    LatticeError,
    PathTrace,
    Site,
    adjacency,
    neighbours,
)

GUARD = 1e-6


class WindingError(LatticeError):
    """A path or polygon touches the point it is supposed to wind around."""


class OpposedPathsError(LatticeError):
    """The inputs of :func:`circuit_from_opposed_paths` violate its hypotheses."""


class DualityViolation(AssertionError):
    """Both or neither side of the annulus dichotomy held."""

    def __init__(self, message, cfg=None):
        super().__init__(message)
        self.cfg = cfg


class Orientation(str, enum.Enum):
    CLOCKWISE = "cw"
    COUNTERCLOCKWISE = "ccw"
    NEUTRAL = "neutral"


@dataclass(frozen=True)
class WindingValue:
    turns: int
    fractional: Fraction | float = Fraction(0)

    @property
    def total(self):
        return self.turns + self.fractional

    @property
    def exact(self) -> bool:
        return isinstance(self.fractional, (int, Fraction))

    def __neg__(self) -> "WindingValue":
        return WindingValue(-self.turns, -self.fractional)

    def __add__(self, other: "WindingValue") -> "WindingValue":
        return WindingValue(self.turns + other.turns, self.fractional + other.fractional)

    def __sub__(self, other: "WindingValue") -> "WindingValue":
        return WindingValue(self.turns - other.turns, self.fractional - other.fractional)

    def orientation(self) -> Orientation:
        t = self.total
        if self.exact:
            if t == 0:
                return Orientation.NEUTRAL
        elif abs(t) < GUARD:
            return Orientation.NEUTRAL
        return Orientation.COUNTERCLOCKWISE if t > 0 else Orientation.CLOCKWISE


def _check_step(a: Site, b: Site, center: Site):
    ax, ay = a[0] - center[0], a[1] - center[1]
    bx, by = b[0] - center[0], b[1] - center[1]
    if (ax, ay) == (0, 0) or (bx, by) == (0, 0):
        raise WindingError(f"vertex at the centre {center}")
    if ax * by - ay * bx == 0 and ax * bx + ay * by < 0:
        raise WindingError(f"segment {a}-{b} passes through the centre {center}")


def ray_crossing(a: Site, b: Site, center: Site = (0, 0)) -> int:
    """Signed crossing of the segment a->b with the ray {center + (t, 0): t > 0}."""
    ax, ay = a[0] - center[0], a[1] - center[1]
    bx, by = b[0] - center[0], b[1] - center[1]
    up_a, up_b = ay >= 0, by >= 0
    if up_a == up_b:
        return 0
    # sign of the x-intercept on y = 0 is sign(cross / (by - ay))
    cross = ax * by - ay * bx
    if cross == 0:
        raise WindingError(f"segment {a}-{b} passes through the centre {center}")
    if (cross > 0) != (by - ay > 0):
        return 0
    return 1 if up_b else -1


_OCTANT = {(1, 0): 0, (1, 1): 1, (0, 1): 2, (-1, 1): 3, (-1, 0): 4, (-1, -1): 5, (0, -1): 6, (1, -1): 7}


def _angle(p: Site, center: Site):
    dx, dy = p[0] - center[0], p[1] - center[1]
    if dx == 0 or dy == 0 or abs(dx) == abs(dy):
        sx = (dx > 0) - (dx < 0)
        sy = (dy > 0) - (dy < 0)
        return Fraction(_OCTANT[(sx, sy)], 8)
    return (math.atan2(dy, dx) % (2 * math.pi)) / (2 * math.pi)


def _sites(p) -> Sequence[Site]:
    return p.sites if isinstance(p, PathTrace) else p


def walk_crossings(sites: Sequence[Site], center: Site, closed: bool) -> int:
    n = len(sites)
    total = 0
    for i in range(n - 1):
        _check_step(sites[i], sites[i + 1], center)
        total += ray_crossing(sites[i], sites[i + 1], center)
    if closed and n > 1:
        _check_step(sites[-1], sites[0], center)
        total += ray_crossing(sites[-1], sites[0], center)
    return total


def winding_closed(polygon, center: Site = (0, 0)) -> WindingValue:
    """Winding of the closed polygon through the given vertices (closing edge implied)."""
    return WindingValue(walk_crossings(_sites(polygon), center, closed=True))


def winding_open(path, center: Site = (0, 0)) -> tuple[WindingValue, Orientation]:
    sites = _sites(path)
    turns = walk_crossings(sites, center, closed=False)
    a, b = _angle(sites[0], center), _angle(sites[-1], center)
    if isinstance(a, Fraction) and isinstance(b, Fraction):
        frac = b - a
    else:
        frac = float(b) - float(a)
    w = WindingValue(turns, frac)
    return w, w.orientation()


def classify(path, center: Site = (0, 0)) -> Orientation:
    return winding_open(path, center)[1]


# -- simplifying closed walks --------------------------------------------------


def _closed_turns(walk: Sequence[Site], center: Site) -> int:
    return walk_crossings(walk, center, closed=True)


def _choose(a: list, b: list, center: Site) -> list:
    wa, wb = _closed_turns(a, center), _closed_turns(b, center)
    if wa and wb:
        return a if len(a) <= len(b) else b
    if wa:
        return a
    if wb:
        return b
    raise RuntimeError("loop erasure exhausted a walk with nonzero winding")


def _first_repeat(walk: Sequence[Site]):
    seen = {}
    for j, v in enumerate(walk):
        if v in seen:
            return seen[v], j
        seen[v] = j
    return None


def _first_crossing(walk: Sequence[Site]):
    n = len(walk)
    by_plaquette = {}
    for i in range(n):
        a, b = walk[i], walk[(i + 1) % n]
        if a[0] != b[0] and a[1] != b[1]:
            key = (min(a[0], b[0]), min(a[1], b[1]))
            if key in by_plaquette:
                return by_plaquette[key], i
            by_plaquette[key] = i
    return None


def simplify_closed_walk(walk: Sequence[Site], center: Site) -> list[Site]:
    """Reduce a closed walk with nonzero winding to a simple polygon.

    Repeated sites split the walk into two closed sub-walks whose windings add
    up; the first one with nonzero winding is kept (the shorter if both
    qualify). Crossing diagonals inside one plaquette are split the same way,
    so the result has distinct vertices and no self-crossing edges.
    """
    walk = list(walk)
    if not _closed_turns(walk, center):
        raise RuntimeError("closed walk has zero winding")
    while True:
        rep = _first_repeat(walk)
        if rep is not None:
            i, j = rep
            walk = _choose(walk[i:j], walk[j:] + walk[:i], center)
            continue
        cr = _first_crossing(walk)
        if cr is not None:
            i, j = cr
            # edges i: a->b and j: c->d; keep b..c or d..a
            walk = _choose(walk[i + 1:j + 1], walk[j + 1:] + walk[:i + 1], center)
            continue
        return walk


def circuit_from_opposed_paths(p, q, delta: Box) -> Circuit:
    """A self-avoiding *circuit around ``delta`` made of sites of ``p`` and ``q``."""
    p = p if isinstance(p, PathTrace) else PathTrace(tuple(p), Kind.STAR)
    q = q if isinstance(q, PathTrace) else PathTrace(tuple(q), Kind.STAR)
    if p.start != q.start or p.end != q.end:
        raise OpposedPathsError("paths do not share their endpoints")
    if any(s in delta for s in p.sites) or any(s in delta for s in q.sites):
        raise OpposedPathsError("paths must avoid the box")
    center = delta.center
    wp, cp = winding_open(p, center)
    wq, cq = winding_open(q, center)
    if {cp, cq} != {Orientation.CLOCKWISE, Orientation.COUNTERCLOCKWISE}:
        raise OpposedPathsError(f"paths are {cp.value} and {cq.value}, not opposed")
    walk = list(p.sites) + list(q.sites[::-1][1:-1])
    if walk_crossings(walk, center, closed=True) != (wp - wq).turns:
        raise RuntimeError("closed walk winding disagrees with W(P) - W(Q)")
    loop = simplify_closed_walk(walk, center)
    return Circuit(tuple(loop), Kind.STAR, self_avoiding=True)


# -- circuit searches ------------------------------------------------------------


def _row_major(s: Site):
    return (s[1], s[0])


def _bfs_path(parent: dict, v) -> list:
    out = []
    while v is not None:
        out.append(v)
        v = parent[v]
    return out[::-1]


def nonzero_cycle(allowed: set[Site], kind: Kind | str, center: Site) -> list[Site] | None:
    """A closed walk in ``allowed`` with nonzero winding about ``center``, or None.

    Each component gets a BFS potential (net ray crossings from its root); an
    edge inconsistent with the potential closes a walk of nonzero winding, and
    if no such edge exists every closed walk in the component winds zero times.
    """
    kind = Kind(kind)
    level: dict[Site, int] = {}
    parent: dict[Site, Site | None] = {}
    for root in sorted(allowed, key=_row_major):
        if root in level:
            continue
        level[root] = 0
        parent[root] = None
        queue = deque([root])
        while queue:
            u = queue.popleft()
            for w in neighbours(u, kind):
                if w not in allowed:
                    continue
                d = ray_crossing(u, w, center)
                if w not in level:
                    level[w] = level[u] + d
                    parent[w] = u
                    queue.append(w)
                elif level[w] != level[u] + d:
                    pu, pw = _bfs_path(parent, u), _bfs_path(parent, w)
                    return pu + pw[::-1][:-1]
    return None


@dataclass(frozen=True)
class WindingComponents:
    """Components of an adjacency graph with a winding potential about ``center``.

    ``level[v]`` counts net ray crossings along a BFS tree path from the
    component root; ``period[c]`` is the gcd of the windings of all closed
    walks in component ``c`` (0 when every closed walk winds zero times).
    """

    center: Site
    comp: dict
    level: dict
    period: list

    def orientations(self, x: Site, y: Site) -> set[Orientation]:
        """Orientations realised by walks from x to y in the graph."""
        if x not in self.comp or y not in self.comp or self.comp[x] != self.comp[y]:
            return set()
        if self.period[self.comp[x]]:
            return {Orientation.CLOCKWISE, Orientation.COUNTERCLOCKWISE}
        a, b = _angle(x, self.center), _angle(y, self.center)
        frac = b - a if isinstance(a, Fraction) and isinstance(b, Fraction) else float(b) - float(a)
        w = WindingValue(self.level[y] - self.level[x], frac)
        return {w.orientation()} - {Orientation.NEUTRAL}


def winding_components(allowed: set[Site], kind: Kind | str, center: Site) -> WindingComponents:
    kind = Kind(kind)
    comp: dict[Site, int] = {}
    level: dict[Site, int] = {}
    period: list[int] = []
    for root in sorted(allowed, key=_row_major):
        if root in comp:
            continue
        cid = len(period)
        g = 0
        comp[root] = cid
        level[root] = 0
        queue = deque([root])
        while queue:
            u = queue.popleft()
            for w in neighbours(u, kind):
                if w not in allowed:
                    continue
                d = ray_crossing(u, w, center)
                if w not in comp:
                    comp[w] = cid
                    level[w] = level[u] + d
                    queue.append(w)
                else:
                    g = math.gcd(g, level[u] + d - level[w])
        period.append(g)
    return WindingComponents(center, comp, level, period)


def orientation_classes(cfg: Configuration, x: Site, y: Site, delta: Box,
                        spin: int = 1, kind: Kind | str = Kind.STAR) -> set[Orientation]:
    """Orientations (about the centre of ``delta``) of ``spin`` paths from x to y
    that stay in the window and avoid ``delta``.

    Paths need not be self-avoiding. Inside one component the windings of
    x-to-y walks form a coset of the component's period, so both signs occur
    as soon as some closed walk winds around the centre.
    """
    if cfg.get(x) != spin or cfg.get(y) != spin or x in delta or y in delta:
        return set()
    allowed = {s for s in cfg.sites_with(spin) if s not in delta}
    return winding_components(allowed, kind, delta.center).orientations(x, y)


def _region_sites(cfg: Configuration, region, spin: int) -> set[Site]:
    return {s for s in region if cfg.get(s) == spin}


def find_monochrome_circuit(cfg: Configuration, delta: Box, region: Annulus,
                            spin: int, kind: Kind | str) -> Circuit | None:
    """A self-avoiding ``spin`` circuit of ``kind`` in ``region`` around ``delta``."""
    if not region.inner.contains_box(delta):
        raise LatticeError("delta must lie inside the inner box of the region")
    kind = Kind(kind)
    allowed = _region_sites(cfg, region, spin)
    walk = nonzero_cycle(allowed, kind, delta.center)
    if walk is None:
        return None
    loop = simplify_closed_walk(walk, delta.center)
    return Circuit(tuple(loop), kind, self_avoiding=True)


@dataclass(frozen=True)
class MixedCircuit:
    """A self-avoiding 1*path followed by a self-avoiding 0path, closed up by *adjacency."""

    one_segment: tuple[Site, ...]
    zero_segment: tuple[Site, ...]

    @property
    def sites(self) -> tuple[Site, ...]:
        return self.one_segment + self.zero_segment

    def as_circuit(self) -> Circuit:
        return Circuit(self.sites, Kind.STAR, self_avoiding=True)


def _to_mixed(loop: list[Site], cfg: Configuration) -> MixedCircuit:
    spins = [cfg[s] for s in loop]
    n = len(loop)
    if all(spins) or not any(spins):
        seg = tuple(loop)
        return MixedCircuit(seg, ()) if spins[0] else MixedCircuit((), seg)
    start = next(i for i in range(n) if spins[i] == 1 and spins[i - 1] == 0)
    loop = loop[start:] + loop[:start]
    spins = spins[start:] + spins[:start]
    k = spins.index(0)
    return MixedCircuit(tuple(loop[:k]), tuple(loop[k:]))


def validate_mixed(mc: MixedCircuit, cfg: Configuration, delta: Box) -> list[str]:
    """Problems with a mixed circuit, checked from the definition (empty list = valid)."""
    from .lattice import enclosed_sites

    errors = []
    one, zero = mc.one_segment, mc.zero_segment
    if not one and not zero:
        return ["empty circuit"]
    if any(cfg.get(s) != 1 for s in one):
        errors.append("one segment has a 0 spin")
    if any(cfg.get(s) != 0 for s in zero):
        errors.append("zero segment has a 1 spin")
    if len(set(mc.sites)) != len(mc.sites):
        errors.append("sites repeat")
    if any(not adjacency(a, b, Kind.STAR) for a, b in zip(one, one[1:])):
        errors.append("one segment is not a *path")
    if any(not adjacency(a, b, Kind.NEAREST) for a, b in zip(zero, zero[1:])):
        errors.append("zero segment is not a path")
    if one and zero:
        if not adjacency(one[-1], zero[0], Kind.STAR) or not adjacency(zero[-1], one[0], Kind.STAR):
            errors.append("junctions are not *adjacent")
    elif one:
        if len(one) < 2 or not adjacency(one[-1], one[0], Kind.STAR):
            errors.append("pure 1* segment does not close")
    else:
        if len(zero) < 2 or not adjacency(zero[-1], zero[0], Kind.NEAREST):
            errors.append("pure 0 segment does not close")
    if not errors:
        inside = enclosed_sites(mc.sites)
        if not all(s in inside for s in delta):
            errors.append("box is not enclosed")
    return errors


def _mixed_walk_from(start: Site, ones: set[Site], zeros: set[Site], center: Site, cap: int):
    """BFS over (site, block, winding level) for a 1-block then 0-block closed walk."""
    origin = (start, 1, 0)
    parent = {origin: None}
    queue = deque([origin])
    while queue:
        state = queue.popleft()
        v, block, lev = state
        if block == 0 and adjacency(v, start, Kind.STAR):
            if lev + ray_crossing(v, start, center) != 0:
                return [s[0] for s in _bfs_path(parent, state)]
        if block == 1:
            moves = [(w, 1) for w in neighbours(v, Kind.STAR) if w in ones]
            moves += [(w, 0) for w in neighbours(v, Kind.STAR) if w in zeros]
        else:
            moves = [(w, 0) for w in neighbours(v, Kind.NEAREST) if w in zeros]
        for w, b in moves:
            nl = lev + ray_crossing(v, w, center)
            if abs(nl) > cap:
                continue
            nxt = (w, b, nl)
            if nxt not in parent:
                parent[nxt] = state
                queue.append(nxt)
    return None


def find_mixed_circuit(cfg: Configuration, delta: Box, region: Annulus) -> MixedCircuit | None:
    """A mixed 1*/0 circuit in ``region`` around ``delta``, or None.

    Pure 0 and pure 1* circuits are tried first; otherwise every 1 site of the
    region is tried as the first site of the 1* segment.
    """
    for spin, kind in ((0, Kind.NEAREST), (1, Kind.STAR)):
        c = find_monochrome_circuit(cfg, delta, region, spin, kind)
        if c is not None:
            return _to_mixed(list(c.sites), cfg)
    ones = _region_sites(cfg, region, 1)
    zeros = _region_sites(cfg, region, 0)
    cap = len(ones) + len(zeros)
    for start in sorted(ones, key=_row_major):
        walk = _mixed_walk_from(start, ones, zeros, delta.center, cap)
        if walk is not None:
            loop = simplify_closed_walk(walk, delta.center)
            return _to_mixed(loop, cfg)
    return None


def crossing_path(cfg: Configuration, sources: Iterable[Site], targets: Iterable[Site],
                  allowed: set[Site], spin: int, kind: Kind | str) -> list[Site] | None:
    """Shortest ``spin`` path inside ``allowed`` from a source to a target (BFS)."""
    kind = Kind(kind)
    targets = set(targets)
    parent = {}
    queue = deque()
    for s in sorted(sources, key=_row_major):
        if s in allowed and cfg.get(s) == spin and s not in parent:
            parent[s] = None
            queue.append(s)
    while queue:
        u = queue.popleft()
        if u in targets:
            return _bfs_path(parent, u)
        for w in neighbours(u, kind):
            if w in allowed and w not in parent and cfg.get(w) == spin:
                parent[w] = u
                queue.append(w)
    return None


@dataclass(frozen=True)
class DualityReport:
    zero_circuit: Circuit | None
    one_crossing: tuple[Site, ...] | None

    @property
    def side(self) -> str:
        return "a" if self.zero_circuit is not None else "b"


def duality_check(cfg: Configuration, region: Annulus) -> DualityReport:
    """Exactly one of: (a) a 0circuit around the inner box in the annulus,
    (b) a 1*path in the annulus from the *boundary of the inner box to the
    edge ring of the outer box."""
    if not cfg.window.contains_box(region.outer):
        raise LatticeError("annulus leaves the window")
    circuit = find_monochrome_circuit(cfg, region.inner, region, 0, Kind.NEAREST)
    allowed = set(region)
    path = crossing_path(cfg, region.inner_ring(), region.outer_ring(), allowed, 1, Kind.STAR)
    report = DualityReport(circuit, tuple(path) if path else None)
    if (circuit is None) == (path is None):
        which = "both" if circuit is not None else "neither"
        raise DualityViolation(f"{which} sides of the dichotomy hold", cfg)
    return report
