import math
from fractions import Fraction

import numpy as np
import pytest

import oracles as O
from percolab.lattice import Box, Circuit, Configuration, Kind, PathTrace, annulus, interior_exterior
from percolab.sweep import decode, enclosing_cycle_masks, site_order, side_a, side_b, sweep_tables
from percolab.topology import (
    DualityViolation,
    OpposedPathsError,
    Orientation,
    WindingError,
    WindingValue,
    circuit_from_opposed_paths,
    classify,
    duality_check,
    find_mixed_circuit,
    find_monochrome_circuit,
    orientation_classes,
    ray_crossing,
    simplify_closed_walk,
    validate_mixed,
    winding_closed,
    winding_components,
    winding_open,
)

RING8 = ((1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1))
UPPER = ((-2, 0), (-2, 1), (-2, 2), (-1, 2), (0, 2), (1, 2), (2, 2), (2, 1), (2, 0))


def mirror(path):
    return tuple((x, -y) for x, y in path)


def test_closed_winding_examples():
    assert winding_closed(RING8) == WindingValue(1)
    assert winding_closed(RING8[::-1]).total == -1
    assert winding_closed([(2, 0), (3, 0), (3, 1)]).total == 0
    with pytest.raises(WindingError):
        winding_closed([(0, 0), (1, 0), (1, 1)])
    with pytest.raises(WindingError):
        winding_closed([(-1, 0), (1, 0), (1, 1)])


def test_open_winding_examples():
    w, o = winding_open(PathTrace(UPPER, Kind.NEAREST))
    assert w.total == Fraction(-1, 2) and w.exact and o is Orientation.CLOCKWISE
    w, o = winding_open(mirror(UPPER))
    assert w.total == Fraction(1, 2) and o is Orientation.COUNTERCLOCKWISE
    w, o = winding_open(((3, 0), (4, 0)))
    assert w.total == 0 and o is Orientation.NEUTRAL
    assert classify(((1, 2), (2, 1))) is Orientation.CLOCKWISE
    # off-octant endpoints give a float fractional part
    w, _ = winding_open(((2, 1), (1, 2)))
    assert not w.exact and w.total == pytest.approx((math.atan2(2, 1) - math.atan2(1, 2)) / (2 * math.pi))


def test_winding_value_arithmetic():
    a, b = WindingValue(1, Fraction(1, 4)), WindingValue(0, Fraction(-1, 8))
    assert (a - b).total == Fraction(11, 8) and (-a).total == Fraction(-5, 4)
    assert WindingValue(0, 1e-9).orientation() is Orientation.NEUTRAL
    assert WindingValue(0, -1e-3).orientation() is Orientation.CLOCKWISE


def _random_walk(rng, n, closed):
    """Random star walk avoiding the origin and never stepping across it."""
    while True:
        p = (int(rng.integers(-4, 5)), int(rng.integers(-4, 5)))
        if p != (0, 0):
            break
    walk = [p]
    while len(walk) < n:
        dx, dy = O.STAR_STEPS[rng.integers(8)]
        q = (walk[-1][0] + dx, walk[-1][1] + dy)
        a = walk[-1]
        if q == (0, 0) or (a[0] * q[1] - a[1] * q[0] == 0 and a[0] * q[0] + a[1] * q[1] < 0):
            continue
        walk.append(q)
    if closed:
        a, q = walk[-1], walk[0]
        if max(abs(a[0] - q[0]), abs(a[1] - q[1])) > 1 or a == q or (
                a[0] * q[1] - a[1] * q[0] == 0 and a[0] * q[0] + a[1] * q[1] < 0):
            return _random_walk(rng, n, closed)
    return walk


def test_winding_matches_angle_sum(rng):
    for _ in range(2000):
        c = _random_walk(rng, int(rng.integers(3, 30)), closed=True)
        w = winding_closed(c)
        assert w.total == round(O.angle_winding(c))
        assert w.total == sum(ray_crossing(c[i], c[(i + 1) % len(c)]) for i in range(len(c)))
        p = _random_walk(rng, int(rng.integers(2, 30)), closed=False)
        assert float(winding_open(p)[0].total) == pytest.approx(O.angle_winding(p, closed=False), abs=1e-9)


def test_winding_about_other_centres(rng):
    for _ in range(300):
        c = [(x + 5, y - 3) for x, y in _random_walk(rng, 12, closed=True)]
        assert winding_closed(c, (5, -3)).total == round(O.angle_winding(c, (5, -3)))


def test_simple_enclosing_circuits_wind_once(rng):
    from test_lattice import _random_circuit

    for _ in range(200):
        c = _random_circuit(rng)
        assert abs(winding_closed(c.sites).total) == 1


def test_crossing_diagonals_can_wind_twice():
    # distinct sites, but the diagonals (2,-1)-(1,0) and (1,-1)-(2,0) cross
    outer = [(2, 0), (2, 1), (2, 2), (1, 2), (0, 2), (-1, 2), (-2, 2), (-2, 1), (-2, 0), (-2, -1),
             (-2, -2), (-1, -2), (0, -2), (1, -2), (2, -2), (2, -1)]
    inner = [(1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1)]
    loop = outer + inner
    assert len(set(loop)) == len(loop) and O.has_crossing_diagonals(loop)
    assert winding_closed(loop).total == 2
    assert not O.even_odd(loop, (0, 0))
    simple = simplify_closed_walk(loop, (0, 0))
    assert not O.has_crossing_diagonals(simple) and abs(winding_closed(simple).total) == 1


def test_opposed_paths_examples():
    delta = Box(1)
    p = [(-3, 0)] + [(-3, y) for y in (1, 2, 3)] + [(x, 3) for x in range(-2, 3)] + [(3, y) for y in (3, 2, 1, 0)]
    q = [(x, -y) for x, y in p]
    c = circuit_from_opposed_paths(p, q, delta)
    assert set(c.sites) <= set(p) | set(q)
    assert set(delta) <= interior_exterior(c)[0]
    assert (winding_open(p)[0] - winding_open(q)[0]).total == -1
    with pytest.raises(OpposedPathsError):
        circuit_from_opposed_paths(p, p, delta)
    with pytest.raises(OpposedPathsError):
        circuit_from_opposed_paths(p, q[:-1], delta)
    with pytest.raises(OpposedPathsError):
        circuit_from_opposed_paths([(-3, 0), (-2, 0), (-1, 0)], [(-3, 0), (-2, 1), (-1, 0)], delta)


def sample_opposed_pairs(rng, count, half=7, d=1, spec=None):
    """Opposed (cw, ccw) *path pairs drawn from sampled configurations."""
    from percolab.measures import SamplerSpec, sample

    spec = spec or SamplerSpec("bernoulli", p=0.62, half_width=half, seed=int(rng.integers(2 ** 32)))
    delta = Box(d)
    pairs = []
    start = 0
    while len(pairs) < count:
        for cfg in sample(spec, 50, start):
            allowed = {s for s in cfg.sites_with(1) if s not in delta}
            wc = winding_components(allowed, Kind.STAR, (0, 0))
            left = [s for s in allowed if s[0] < -d]
            right = [s for s in allowed if s[0] > d]
            for _ in range(20):
                x = left[rng.integers(len(left))]
                y = right[rng.integers(len(right))]
                if wc.orientations(x, y) != {Orientation.CLOCKWISE, Orientation.COUNTERCLOCKWISE}:
                    continue
                got = {}
                for _ in range(12):
                    path = O.random_path(allowed, x, y, rng, wander=bool(rng.random() < 0.3))
                    o = classify(path)
                    got.setdefault(o, path)
                    if Orientation.CLOCKWISE in got and Orientation.COUNTERCLOCKWISE in got:
                        pairs.append((got[Orientation.CLOCKWISE], got[Orientation.COUNTERCLOCKWISE]))
                        break
                if len(pairs) >= count:
                    return pairs, delta
        start += 50
    return pairs, delta


def check_opposed(p, q, delta) -> bool:
    c = circuit_from_opposed_paths(p, q, delta)
    sites = c.sites
    ok = len(set(sites)) == len(sites) and set(sites) <= set(p) | set(q)
    ok &= all(O.adjacent(sites[i], sites[(i + 1) % len(sites)], "star") for i in range(len(sites)))
    ok &= all(O.even_odd(sites, s) for s in delta)
    return bool(ok)


def test_opposed_paths_from_samples(rng):
    pairs, delta = sample_opposed_pairs(rng, 300)
    assert all(check_opposed(p, q, delta) for p, q in pairs)
    assert all(check_opposed(q, p, delta) for p, q in pairs[:50])


def test_left_right_endpoints_never_neutral(rng):
    delta = Box(1)
    allowed = {s for s in Box(6) if s not in delta}
    for _ in range(300):
        x = (int(rng.integers(-6, -1)), int(rng.integers(-6, 7)))
        y = (int(rng.integers(2, 7)), int(rng.integers(-6, 7)))
        path = O.random_path(allowed, x, y, rng, wander=bool(rng.random() < 0.5))
        assert classify(path) is not Orientation.NEUTRAL


def test_orientation_classes():
    cfg = Configuration.from_sites(Box(3), [s for s in Box(3) if max(abs(s[0]), abs(s[1])) == 2])
    assert orientation_classes(cfg, (-2, 0), (2, 0), Box(1)) == {Orientation.CLOCKWISE, Orientation.COUNTERCLOCKWISE}
    top = Configuration.from_sites(Box(3), UPPER)
    assert orientation_classes(top, (-2, 0), (2, 0), Box(1)) == {Orientation.CLOCKWISE}
    assert orientation_classes(top, (-2, 0), (3, 3), Box(1)) == set()


def test_monochrome_examples():
    region = annulus(0, 2)
    zero = Configuration.constant(Box(2), 0)
    c = find_monochrome_circuit(zero, Box(0), region, 0, Kind.NEAREST)
    assert c is not None and c.kind is Kind.NEAREST and (0, 0) in interior_exterior(c)[0]
    assert find_monochrome_circuit(Configuration.constant(Box(2), 1), Box(0), region, 0, Kind.NEAREST) is None
    star = find_monochrome_circuit(Configuration.constant(Box(2), 1), Box(0), region, 1, Kind.STAR)
    assert star is not None and not O.has_crossing_diagonals(star.sites)


def oracle_nearest_cycles(region):
    """Site sets of simple nearest cycles in the annulus that enclose its centre."""
    sites = set(region)
    order = sorted(sites, key=lambda s: (s[1], s[0]))
    found = set()
    for i, s0 in enumerate(order):
        later = set(order[i + 1:])
        path = [s0]

        def dfs(u):
            for dx, dy in O.NEAREST_STEPS:
                w = (u[0] + dx, u[1] + dy)
                if w == s0 and len(path) >= 4:
                    if O.even_odd(path, (0, 0)):
                        found.add(frozenset(path))
                elif w in later and w not in path:
                    path.append(w)
                    dfs(w)
                    path.pop()

        dfs(s0)
    return found


def test_enclosing_cycles_match_enumeration():
    region = annulus(0, 2)
    order = site_order(region)
    masks = {int(m) for m in enclosing_cycle_masks(region)}
    every = {sum(1 << order.index(s) for s in cyc) for cyc in oracle_nearest_cycles(region)}
    # a circuit exists iff the 0 sites contain a minimal enclosing cycle
    minimal = {m for m in every if not any(o != m and o & m == o for o in every)}
    assert masks == minimal and len(masks) == 161


def test_sweep_sides_agree_with_searches(rng):
    region = annulus(0, 2)
    t = sweep_tables(region)
    codes = rng.integers(0, 1 << 24, size=3000, dtype=np.int64)
    a, b = side_a(codes, t), side_b(codes, t)
    assert not np.any(a == b)
    for code, sa in zip(codes[:600], a[:600]):
        cfg = decode(int(code), region)
        found = find_monochrome_circuit(cfg, Box(0), region, 0, Kind.NEAREST) is not None
        assert found == bool(sa)
        assert duality_check(cfg, region).side == ("a" if sa else "b")


def test_mixed_examples():
    region = annulus(1, 3)
    zero = Configuration.constant(Box(3), 0)
    mc = find_mixed_circuit(zero, Box(1), region)
    assert mc is not None and not mc.one_segment and validate_mixed(mc, zero, Box(1)) == []
    one = Configuration.constant(Box(3), 1)
    mc = find_mixed_circuit(one, Box(1), region)
    assert mc is not None and not mc.zero_segment and validate_mixed(mc, one, Box(1)) == []


def test_mixed_half_and_half():
    # only ring 2 is usable: its upper half is 1, its lower half 0, ring 3 is
    # cut by a vertical wall of 0s and 1s so no pure circuit exists there
    ring2 = [s for s in Box(2) if max(abs(s[0]), abs(s[1])) == 2]
    ones = [s for s in ring2 if s[1] > 0] + [(0, 3), (1, 3), (-1, 3)]
    cfg = Configuration.from_sites(Box(3), ones)
    cfg = cfg.with_spins([(3, -3), (3, -2), (3, -1), (3, 0), (3, 1), (3, 2), (3, 3)], 1)
    region = annulus(1, 3)
    assert find_monochrome_circuit(cfg, Box(1), region, 1, Kind.STAR) is None
    assert find_monochrome_circuit(cfg, Box(1), region, 0, Kind.NEAREST) is None
    mc = find_mixed_circuit(cfg, Box(1), region)
    assert mc is not None and mc.one_segment and mc.zero_segment
    assert validate_mixed(mc, cfg, Box(1)) == []


def independent_mixed_check(mc, cfg, delta):
    one, zero = mc.one_segment, mc.zero_segment
    sites = one + zero
    assert all(cfg[s] == 1 for s in one) and all(cfg[s] == 0 for s in zero)
    assert len(set(sites)) == len(sites)
    for seg, kind in ((one, "star"), (zero, "nearest")):
        assert all(O.adjacent(a, b, kind) for a, b in zip(seg, seg[1:]))
    if one and zero:
        assert O.adjacent(one[-1], zero[0], "star") and O.adjacent(zero[-1], one[0], "star")
    assert O.adjacent(sites[-1], sites[0], "star")
    assert all(O.even_odd(sites, s) for s in delta)


def test_mixed_random(rng):
    region = annulus(1, 4)
    found = 0
    for _ in range(300):
        cfg = Configuration(Box(4), (rng.random((9, 9)) < rng.uniform(0.2, 0.8)).astype(np.int8))
        mc = find_mixed_circuit(cfg, Box(1), region)
        if mc is not None:
            found += 1
            assert validate_mixed(mc, cfg, Box(1)) == []
            independent_mixed_check(mc, cfg, Box(1))
    assert found > 100


def test_duality_examples(rng):
    region = annulus(0, 2)
    assert duality_check(Configuration.constant(Box(2), 0), region).side == "a"
    rep = duality_check(Configuration.constant(Box(2), 1), region)
    assert rep.side == "b" and rep.zero_circuit is None and rep.one_crossing
    for _ in range(300):
        half = int(rng.integers(3, 6))
        k = int(rng.integers(0, half - 1))
        cfg = Configuration(Box(half), (rng.random((2 * half + 1,) * 2) < 0.5).astype(np.int8))
        r = duality_check(cfg, annulus(k, half))
        path = r.one_crossing
        if path:
            assert all(cfg[s] == 1 for s in path) and all(O.adjacent(a, b, "star") for a, b in zip(path, path[1:]))


def test_duality_violation_carries_configuration():
    exc = DualityViolation("both", Configuration.constant(Box(0), 1))
    assert exc.cfg.spins.sum() == 1 and "both" in str(exc)
