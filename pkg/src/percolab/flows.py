"""Disjoint 1*path counts, the source/sink network around a box, and necklets.

Two notions of disjointness appear. ``disjoint_path_count`` counts
site-disjoint 1*paths (unit capacity on every 1 site). ``build_network``
reproduces the arc-capacity network: arcs join *adjacent sites of the rings
s+1..t+1 and carry capacity 1 exactly when both ends are 1. Arc-disjoint
paths may share sites, so its flow value can exceed the number of
site-disjoint crossings. ``necklet_construct`` therefore builds its cut on the
site-capacity version and reports both values.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

from .lattice import Annulus, Box, Circuit, Configuration, Kind, LatticeError, Site, boundary, neighbours
from .topology import find_monochrome_circuit, nonzero_cycle, simplify_closed_walk

INF = 1 << 30


def _row_major(s: Site):
    return (s[1], s[0])


def rings(lo: int, hi: int) -> list[Site]:
    """Sites with sup-norm in [lo, hi], row-major."""
    out = []
    for y in range(-hi, hi + 1):
        for x in range(-hi, hi + 1):
            if lo <= max(abs(x), abs(y)):
                out.append((x, y))
    return out


class _Graph:
    """Residual graph for integral max flow with BFS augmenting paths."""

    def __init__(self, n: int):
        self.head = [[] for _ in range(n)]
        self.to: list[int] = []
        self.cap: list[int] = []

    def add(self, u: int, v: int, c: int, back: int = 0) -> int:
        e = len(self.to)
        self.to += [v, u]
        self.cap += [c, back]
        self.head[u].append(e)
        self.head[v].append(e + 1)
        return e

    def _bfs(self, src: int):
        prev = {src: -1}
        queue = deque([src])
        while queue:
            u = queue.popleft()
            for e in self.head[u]:
                v = self.to[e]
                if self.cap[e] > 0 and v not in prev:
                    prev[v] = e
                    queue.append(v)
        return prev

    def max_flow(self, src: int, dst: int) -> int:
        value = 0
        while True:
            prev = self._bfs(src)
            if dst not in prev:
                return value
            push = INF
            v = dst
            while v != src:
                e = prev[v]
                push = min(push, self.cap[e])
                v = self.to[e ^ 1]
            v = dst
            while v != src:
                e = prev[v]
                self.cap[e] -= push
                self.cap[e ^ 1] += push
                v = self.to[e ^ 1]
            value += push

    def reachable(self, src: int) -> set[int]:
        return set(self._bfs(src))


def _site_flow(cfg: Configuration, nodes: list[Site], sources, sinks):
    """Max number of site-disjoint 1*paths from ``sources`` to ``sinks`` inside ``nodes``.

    Returns (value, residual-reachable in-nodes, residual-reachable out-nodes).
    """
    index = {v: i for i, v in enumerate(nodes)}
    n = len(nodes)
    g = _Graph(2 * n + 2)
    src, dst = 2 * n, 2 * n + 1
    for v, i in index.items():
        if cfg[v] == 1:
            g.add(2 * i, 2 * i + 1, 1)
            for w in neighbours(v, Kind.STAR):
                j = index.get(w)
                if j is not None and cfg[w] == 1:
                    g.add(2 * i + 1, 2 * j, INF)
    for v in sorted(sources, key=_row_major):
        g.add(src, 2 * index[v], INF)
    for v in sorted(sinks, key=_row_major):
        g.add(2 * index[v] + 1, dst, INF)
    value = g.max_flow(src, dst)
    seen = g.reachable(src)
    ins = {nodes[k // 2] for k in seen if k < 2 * n and k % 2 == 0}
    outs = {nodes[k // 2] for k in seen if k < 2 * n and k % 2 == 1}
    return value, ins, outs


def _require_window(cfg: Configuration, half: int):
    if not cfg.window.contains_box(Box(half)):
        raise LatticeError(f"window {cfg.window} does not contain {{-{half}..{half}}}^2")


def disjoint_path_count(cfg: Configuration, k: int, i: int) -> int:
    """A_{k,i}: site-disjoint 1*paths in {-i..i}^2 minus {-k..k}^2 from the
    *boundary of {-k..k}^2 to the *boundary of {-i+1..i-1}^2."""
    if not 0 <= k < i - 1:
        raise LatticeError(f"need 0 <= k < i - 1, got k={k}, i={i}")
    _require_window(cfg, i)
    nodes = rings(k + 1, i)
    value, _, _ = _site_flow(cfg, nodes, Box(k + 1).ring(), Box(i).ring())
    return value


@dataclass(frozen=True)
class FlowNetwork:
    s: int
    t: int
    sources: tuple[Site, ...]
    sinks: tuple[Site, ...]
    intermediates: tuple[Site, ...]
    arcs: tuple[tuple[Site, Site], ...]
    capacity: dict = field(compare=False, repr=False)

    @property
    def nodes(self) -> tuple[Site, ...]:
        return tuple(sorted(self.sources + self.sinks + self.intermediates, key=_row_major))


def build_network(cfg: Configuration, s: int, t: int) -> FlowNetwork:
    if not 0 <= s < t:
        raise LatticeError(f"need 0 <= s < t, got s={s}, t={t}")
    _require_window(cfg, t + 1)
    sources = tuple(Box(s + 1).ring())
    sinks = tuple(Box(t + 1).ring())
    inter = tuple(rings(s + 2, t))
    nodes = set(sources) | set(sinks) | set(inter)
    arcs = []
    cap = {}
    for v in sorted(nodes, key=_row_major):
        for w in neighbours(v, Kind.STAR):
            if w in nodes and _row_major(v) < _row_major(w):
                arcs.append((v, w))
                cap[(v, w)] = int(cfg[v] == 1 and cfg[w] == 1)
    return FlowNetwork(s, t, sources, sinks, inter, tuple(arcs), cap)


def max_flow_min_cut(net: FlowNetwork) -> tuple[int, list[tuple[Site, Site]]]:
    """Max flow under the arc capacities and the cut of the residual-reachable side."""
    nodes = net.nodes
    index = {v: i for i, v in enumerate(nodes)}
    n = len(nodes)
    g = _Graph(n + 2)
    src, dst = n, n + 1
    for a, b in net.arcs:
        c = net.capacity[(a, b)]
        g.add(index[a], index[b], c, c)
    for v in net.sources:
        g.add(src, index[v], INF)
    for v in net.sinks:
        g.add(index[v], dst, INF)
    value = g.max_flow(src, dst)
    side = {nodes[i] for i in g.reachable(src) if i < n}
    cut = [(a, b) for a, b in net.arcs if (a in side) != (b in side)]
    if sum(net.capacity[e] for e in cut) != value:
        raise RuntimeError("cut capacity differs from flow value")
    return value, cut


class NeckletConstructionError(RuntimeError):
    def __init__(self, message, decomposition=None):
        super().__init__(message)
        self.decomposition = decomposition


class BlockingError(AssertionError):
    pass


@dataclass(frozen=True)
class Necklet:
    circuit: Circuit
    pearls: tuple[Site, ...]

    @property
    def n_pearls(self) -> int:
        return len(self.pearls)


@dataclass(frozen=True)
class CutDecomposition:
    """Cut data behind a necklet; ``arc_cut`` comes from the arc-capacity network."""

    flow_value: int
    arc_flow_value: int
    arc_cut: tuple
    cut_sites: frozenset
    B: frozenset
    B_outer: frozenset
    B_inner: frozenset
    D: frozenset
    E: frozenset
    F: frozenset

    def to_json(self) -> dict:
        def srt(xs):
            return [list(v) for v in sorted(xs, key=_row_major)]

        return {
            "flow_value": self.flow_value,
            "arc_flow_value": self.arc_flow_value,
            "arc_cut": [[list(a), list(b)] for a, b in self.arc_cut],
            "cut_sites": srt(self.cut_sites),
            "B_outer": srt(self.B_outer),
            "B_inner": srt(self.B_inner),
            "D": srt(self.D),
            "E": srt(self.E),
            "F": srt(self.F),
        }


def _outside(blocked: set[Site], kind: Kind, pad_from: set[Site]) -> set[Site]:
    """Sites reachable from far away by ``kind`` moves avoiding ``blocked``, clipped
    to the bounding box of ``pad_from`` grown by 2."""
    xs = [v[0] for v in pad_from]
    ys = [v[1] for v in pad_from]
    x0, x1, y0, y1 = min(xs) - 2, max(xs) + 2, min(ys) - 2, max(ys) + 2
    start = (x0, y0)
    seen = {start}
    queue = deque([start])
    while queue:
        u = queue.popleft()
        for w in neighbours(u, kind):
            if x0 <= w[0] <= x1 and y0 <= w[1] <= y1 and w not in seen and w not in blocked:
                seen.add(w)
                queue.append(w)
    return seen


def necklet_construct(cfg: Configuration, gamma: Box, s: int, t: int) -> tuple[Necklet, CutDecomposition]:
    """Necklet around ``gamma`` whose pearl count equals the max number of crossings.

    The cut is taken in the site-capacity network on rings s+1..t+1, so it is
    a set K of N 1-sites meeting every 1*path from S to T. B is {-s..s}^2
    plus every 1 site reachable from S by a 1*path avoiding K. Every site of
    the *boundary of B is 0 or in K, and its part visible from infinity
    (B_outer) carries a nearest circuit around B. Each of the N disjoint
    crossings leaves B through that circuit, at a 1 site, hence at its
    unique K site, so the circuit has exactly N pearls. In this vertex-cut
    form the necklet lies inside B_outer: D and E are its 0 and 1 sites and F
    is empty.
    """
    if not Box(s).contains_box(gamma):
        raise LatticeError("gamma must lie inside {-s..s}^2")
    _require_window(cfg, t + 1)
    net = build_network(cfg, s, t)
    arc_value, arc_cut = max_flow_min_cut(net)
    nodes = list(net.nodes)
    value, ins, outs = _site_flow(cfg, nodes, net.sources, net.sinks)
    cut_sites = frozenset(v for v in ins if v not in outs and cfg[v] == 1)
    if len(cut_sites) != value:
        raise RuntimeError("vertex cut size differs from flow value")
    # 1 sites reachable from S avoiding K (all residual-reachable sites outside K)
    U = {v for v in ins if cfg[v] == 1 and v not in cut_sites}
    B = set(Box(s)) | U
    ring = boundary(B, Kind.STAR)
    outer = _outside(B, Kind.NEAREST, B | ring)
    B_outer = {v for v in ring if v in outer}
    beyond = _outside(B_outer, Kind.STAR, B_outer)
    B_inner = {v for v in boundary(B_outer, Kind.STAR) if v not in beyond}
    D = {v for v in B_outer if cfg.get(v) == 0}
    E = {v for v in B_outer if cfg.get(v) == 1}
    dec = CutDecomposition(value, arc_value, tuple(arc_cut), cut_sites, frozenset(B), frozenset(B_outer),
                           frozenset(B_inner), frozenset(D), frozenset(E), frozenset())
    if any(v not in cfg.window for v in B_outer):
        raise NeckletConstructionError("B_outer leaves the window", dec)
    if not E <= cut_sites:
        raise NeckletConstructionError("B_outer holds a 1 site outside the cut", dec)
    walk = nonzero_cycle(B_outer, Kind.NEAREST, gamma.center)
    if walk is None:
        raise NeckletConstructionError("B_outer holds no circuit around gamma", dec)
    loop = simplify_closed_walk(walk, gamma.center)
    circuit = Circuit(tuple(loop), Kind.NEAREST, self_avoiding=True)
    pearls = tuple(v for v in loop if cfg[v] == 1)
    if len(pearls) != value:
        raise NeckletConstructionError(f"necklet has {len(pearls)} pearls, flow value is {value}", dec)
    problems = validate_necklet(Necklet(circuit, pearls), cfg, gamma)
    if problems:
        raise NeckletConstructionError("; ".join(problems), dec)
    return Necklet(circuit, pearls), dec


def validate_necklet(necklet: Necklet, cfg: Configuration, gamma: Box) -> list[str]:
    """Definition check: nearest self-avoiding circuit around gamma, pearls = its 1 sites."""
    from .lattice import enclosed_sites

    c = necklet.circuit
    errors = []
    if c.kind is not Kind.NEAREST:
        errors.append("necklet is not a nearest circuit")
    if not c.is_self_avoiding():
        errors.append("necklet repeats a site")
    if any(v not in cfg.window for v in c.sites):
        errors.append("necklet leaves the window")
    elif tuple(v for v in c.sites if cfg[v] == 1) != necklet.pearls:
        errors.append("pearls are not the 1 sites of the circuit")
    if not errors:
        inside = enclosed_sites(c.sites)
        if not all(v in inside for v in gamma):
            errors.append("gamma is not enclosed")
    return errors


def pearl_blocking_set(cfg: Configuration, necklet: Necklet, gamma: Box) -> frozenset:
    """Interior sites *adjacent to a pearl; flipping them to 0 must leave a 0circuit around gamma."""
    from .lattice import enclosed_sites

    inside = enclosed_sites(necklet.circuit.sites)
    if not all(v in inside for v in gamma.grown(1)):
        raise BlockingError("necklet must surround gamma and its *boundary")
    pearls = set(necklet.pearls)
    S = frozenset(v for v in inside if any(w in pearls for w in neighbours(v, Kind.STAR)))
    if len(S) > 5 * len(pearls):
        raise BlockingError(f"blocking set has {len(S)} > 5 * {len(pearls)} sites")
    flipped = cfg.with_spins(S, 0)
    region = Annulus(gamma, cfg.window)
    if find_monochrome_circuit(flipped, gamma, region, 0, Kind.NEAREST) is None:
        raise BlockingError("no 0circuit around gamma after flipping the blocking set")
    return S
