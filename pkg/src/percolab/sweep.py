"""Exhaustive check of the annulus dichotomy over every configuration.

Configurations of an annulus with n sites are n-bit integers (bit i = spin of
the i-th site in row-major order). Side (a) is decided by a catalogue of
minimal nearest cycles enclosing the inner box, side (b) by bitwise frontier
propagation of 1*-connectivity. Neither uses the circuit searches in
:mod:`percolab.topology`, so the sweep is an independent check on them.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lattice import Annulus, Kind, Site, neighbours


def site_order(region: Annulus) -> list[Site]:
    return sorted(region, key=lambda s: (s[1], s[0]))


def _even_odd_inside(poly: list[Site], p: Site) -> bool:
    px, py = p
    inside = False
    n = len(poly)
    for k in range(n):
        (x0, y0), (x1, y1) = poly[k], poly[(k + 1) % n]
        if (y0 > py) != (y1 > py):
            # intersection x > px  <=>  compare with integer cross-multiplication
            lhs = (x1 - x0) * (py - y0)
            rhs = (px - x0) * (y1 - y0)
            if (lhs > rhs) if y1 > y0 else (lhs < rhs):
                inside = not inside
    return inside


def simple_cycles(sites: list[Site], kind: Kind = Kind.NEAREST) -> list[list[Site]]:
    """Every simple cycle (length >= 3) of the induced graph, each listed once."""
    index = {s: i for i, s in enumerate(sites)}
    adj = [[index[w] for w in neighbours(s, kind) if w in index] for s in sites]
    out = []
    for root in range(len(sites)):
        path = [root]
        on = {root}

        def extend(v):
            for w in adj[v]:
                if w == root and len(path) >= 3 and path[1] < path[-1]:
                    out.append([sites[i] for i in path])
                elif w > root and w not in on:
                    path.append(w)
                    on.add(w)
                    extend(w)
                    path.pop()
                    on.discard(w)

        extend(root)
    return out


def enclosing_cycle_masks(region: Annulus) -> np.ndarray:
    """Bit masks of the inclusion-minimal nearest cycles that enclose the inner box."""
    order = site_order(region)
    bit = {s: i for i, s in enumerate(order)}
    center = region.inner.center
    masks = set()
    for cyc in simple_cycles(order, Kind.NEAREST):
        if _even_odd_inside(cyc, center):
            m = 0
            for s in cyc:
                m |= 1 << bit[s]
            masks.add(m)
    ordered = sorted(masks, key=lambda m: (bin(m).count("1"), m))
    minimal = []
    for m in ordered:
        if not any(m & k == k for k in minimal):
            minimal.append(m)
    return np.array(minimal, dtype=np.uint64)


@dataclass(frozen=True)
class SweepTables:
    n: int
    cycle_masks: np.ndarray
    star_nbr: list[int]  # per bit: mask of *adjacent bits
    sources: int
    targets: int


def sweep_tables(region: Annulus) -> SweepTables:
    order = site_order(region)
    bit = {s: i for i, s in enumerate(order)}
    star = []
    for s in order:
        m = 0
        for w in neighbours(s, Kind.STAR):
            if w in bit:
                m |= 1 << bit[w]
        star.append(m)
    src = sum(1 << bit[s] for s in region.inner_ring())
    dst = sum(1 << bit[s] for s in region.outer_ring())
    return SweepTables(len(order), enclosing_cycle_masks(region), star, src, dst)


def side_a(codes: np.ndarray, t: SweepTables) -> np.ndarray:
    codes = np.asarray(codes, dtype=np.uint64)
    full = np.uint64((1 << t.n) - 1)
    zeros = ~codes & full
    hit = np.zeros(codes.shape, dtype=bool)
    for m in t.cycle_masks:
        hit |= (zeros & m) == m
    return hit


def side_b(codes: np.ndarray, t: SweepTables) -> np.ndarray:
    codes = np.asarray(codes, dtype=np.uint64)
    reach = codes & np.uint64(t.sources)
    while True:
        grown = reach.copy()
        for i, m in enumerate(t.star_nbr):
            on = (reach >> np.uint64(i)) & np.uint64(1)
            grown |= (np.uint64(0) - on) & np.uint64(m)
        grown &= codes
        if np.array_equal(grown, reach):
            break
        reach = grown
    return (reach & np.uint64(t.targets)) != 0


@dataclass(frozen=True)
class SweepResult:
    total: int
    side_a: int
    side_b: int
    violations: int
    first_violation: int | None


def exhaustive_sweep(region: Annulus, chunk: int = 1 << 20) -> SweepResult:
    t = sweep_tables(region)
    if t.n > 30:
        raise ValueError(f"annulus has {t.n} sites; exhaustive sweep is limited to 30")
    total = 1 << t.n
    na = nb = bad = 0
    first = None
    for lo in range(0, total, chunk):
        codes = np.arange(lo, min(lo + chunk, total), dtype=np.uint64)
        a = side_a(codes, t)
        b = side_b(codes, t)
        na += int(a.sum())
        nb += int(b.sum())
        v = a == b
        nv = int(v.sum())
        if nv and first is None:
            first = int(codes[np.argmax(v)])
        bad += nv
    return SweepResult(total, na, nb, bad, first)


def decode(code: int, region: Annulus, window=None):
    """Configuration on ``window`` (default: the outer box) with the annulus spins of ``code``."""
    from .lattice import Configuration

    window = window or region.outer
    ones = [s for i, s in enumerate(site_order(region)) if code >> i & 1]
    return Configuration.from_sites(window, ones)
