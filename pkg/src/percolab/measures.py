"""Samplers and empirical estimators for the probabilistic layer.

Two families are provided: Bernoulli site percolation and the nearest-neighbour
Ising model run by single-site heat-bath dynamics. Trials are numbered, and
trial ``i`` draws only from ``trial_stream(seed, i)``:

* bernoulli: one ``side x side`` block of doubles ``u``; site (xmin + c, ymin + r)
  gets spin 1 iff ``u[r, c] < p``.
* ising: one block for the start (spin +1 iff ``u < 1/2``), then one block per
  sweep. A sweep updates the sites with even ``r + c`` first, then the odd
  ones; a site becomes +1 iff its double is below
  ``1 / (1 + exp(-2 (beta * m + h)))`` where ``m`` is the sum of its four
  neighbours (outside the window: 0 for free, +1 for plus, -1 for minus).
  Spins -1/+1 are reported as 0/1.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace
from itertools import combinations

import numpy as np
from numba import njit
from scipy import ndimage

from .lattice import Box, Configuration
from .rng import trial_stream

Z95 = 1.959963984540054
BOUNDARY_GHOST = {"free": 0, "plus": 1, "minus": -1}
BATCH = 500


def wilson(k: int, n: int, z: float = Z95) -> tuple[float, float]:
    """Wilson score interval for k successes in n trials."""
    if n <= 0:
        return (0.0, 1.0)
    ph = k / n
    den = 1 + z * z / n
    mid = (ph + z * z / (2 * n)) / den
    half = z * math.sqrt(ph * (1 - ph) / n + z * z / (4 * n * n)) / den
    return (max(0.0, mid - half), min(1.0, mid + half))


@dataclass(frozen=True)
class SamplerSpec:
    family: str = "bernoulli"
    p: float = 0.5
    beta: float = 0.0
    h_field: float = 0.0
    boundary: str = "free"
    sweeps: int | None = None
    half_width: int = 8
    seed: int = 0

    def __post_init__(self):
        if self.family not in ("bernoulli", "ising"):
            raise ValueError(f"unknown family {self.family!r}")
        if not 0.0 <= self.p <= 1.0:
            raise ValueError("p must lie in [0, 1]")
        if self.beta < 0:
            raise ValueError("beta must be non-negative")
        if self.boundary not in BOUNDARY_GHOST:
            raise ValueError(f"unknown boundary condition {self.boundary!r}")
        if self.sweeps is not None and self.sweeps < 1:
            raise ValueError("sweeps must be at least 1")
        if self.half_width < 0:
            raise ValueError("half_width must be non-negative")
        if not 0 <= self.seed < 1 << 64:
            raise ValueError("seed must be an unsigned 64-bit integer")

    @property
    def window(self) -> Box:
        return Box(self.half_width)

    @property
    def side(self) -> int:
        return 2 * self.half_width + 1

    @property
    def n_sweeps(self) -> int:
        return self.sweeps if self.sweeps is not None else 100 * self.side

    def with_(self, **kw) -> "SamplerSpec":
        return replace(self, **kw)

    def to_dict(self) -> dict:
        d = asdict(self)
        if self.family == "bernoulli":
            for k in ("beta", "h_field", "boundary", "sweeps"):
                d.pop(k)
        else:
            d.pop("p")
            d["sweeps"] = self.n_sweeps
        return d

    @property
    def sampler_id(self) -> str:
        d = self.to_dict()
        d.pop("seed")
        return self.family + "(" + ",".join(f"{k}={v}" for k, v in d.items() if k != "family") + ")"

    @classmethod
    def from_mapping(cls, m: dict) -> "SamplerSpec":
        conv = {"family": str, "p": float, "beta": float, "h_field": float, "boundary": str,
                "sweeps": int, "half_width": int, "seed": int}
        kw = {}
        for k, v in m.items():
            k = k.strip()
            if k == "side":
                side = int(v)
                if side % 2 == 0:
                    raise ValueError("window side must be odd")
                kw["half_width"] = side // 2
                continue
            if k not in conv:
                raise ValueError(f"unknown sampler key {k!r}")
            v = v.strip() if isinstance(v, str) else v
            kw[k] = None if k == "sweeps" and v in ("", "default", None) else conv[k](v)
        return cls(**kw)

    @classmethod
    def parse(cls, text: str) -> "SamplerSpec":
        """Read ``key=value`` lines; ``#`` starts a comment."""
        m = {}
        for line_no, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"line {line_no}: expected key=value")
            k, v = line.split("=", 1)
            m[k.strip()] = v.strip()
        return cls.from_mapping(m)


def _bernoulli_block(spec: SamplerSpec, trials: range) -> np.ndarray:
    L = spec.side
    out = np.empty((len(trials), L, L), dtype=np.uint8)
    for k, t in enumerate(trials):
        out[k] = trial_stream(spec.seed, t).random((L, L)) < spec.p
    return out


def heat_bath_table(beta: float, h: float = 0.0) -> np.ndarray:
    """P(spin = +1 | neighbour sum m) at index m + 4."""
    return np.array([1.0 / (1.0 + math.exp(-2.0 * (beta * (m - 4) + h))) for m in range(9)])


@njit(cache=True)
def _sweep(s, u, table):  # pragma: no cover - compiled
    L = u.shape[0]
    for colour in range(2):
        for r in range(L):
            for c in range((r + colour) % 2, L, 2):
                m = s[r, c + 1] + s[r + 2, c + 1] + s[r + 1, c] + s[r + 1, c + 2]
                s[r + 1, c + 1] = 1 if u[r, c] < table[m + 4] else -1


def _sweep_numpy(s, u, table):
    """Vectorised twin of the compiled sweep, kept as a reference."""
    L = u.shape[-1]
    inner = s[..., 1:-1, 1:-1]
    rr, cc = np.indices((L, L))
    for colour in range(2):
        m = s[..., :-2, 1:-1] + s[..., 2:, 1:-1] + s[..., 1:-1, :-2] + s[..., 1:-1, 2:]
        new = np.where(u < table[m + 4], 1, -1).astype(np.int8)
        np.copyto(inner, new, where=(rr + cc) % 2 == colour)


def _ising_block(spec: SamplerSpec, trials: range, sweep=None) -> np.ndarray:
    sweep = sweep or _sweep
    L = spec.side
    table = heat_bath_table(spec.beta, spec.h_field)
    out = np.empty((len(trials), L, L), dtype=np.uint8)
    s = np.empty((L + 2, L + 2), dtype=np.int8)
    for k, t in enumerate(trials):
        g = trial_stream(spec.seed, t)
        s.fill(BOUNDARY_GHOST[spec.boundary])
        s[1:-1, 1:-1] = np.where(g.random((L, L)) < 0.5, 1, -1)
        for _ in range(spec.n_sweeps):
            sweep(s, g.random((L, L)), table)
        out[k] = s[1:-1, 1:-1] > 0
    return out


def sample_array(spec: SamplerSpec, count: int, start: int = 0) -> np.ndarray:
    """Spins of trials ``start .. start + count - 1`` as a (count, side, side) uint8 array."""
    block = _bernoulli_block if spec.family == "bernoulli" else _ising_block
    parts = [block(spec, range(lo, min(lo + BATCH, start + count))) for lo in range(start, start + count, BATCH)]
    if not parts:
        return np.zeros((0, spec.side, spec.side), dtype=np.uint8)
    return np.concatenate(parts)


def sample(spec: SamplerSpec, count: int, start: int = 0) -> list[Configuration]:
    arr = sample_array(spec, count, start)
    return [Configuration(spec.window, a) for a in arr]


# -- bounded energy ---------------------------------------------------------------


def polyominoes(n: int) -> list[tuple[tuple[int, int], ...]]:
    """Fixed polyominoes with n cells, normalised to min x = min y = 0, sorted."""
    if n < 1:
        return []
    shapes = {((0, 0),)}
    for _ in range(n - 1):
        grown = set()
        for sh in shapes:
            cells = set(sh)
            for x, y in sh:
                for dx, dy in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                    c = (x + dx, y + dy)
                    if c not in cells:
                        new = cells | {c}
                        mx = min(a for a, _ in new)
                        my = min(b for _, b in new)
                        grown.add(tuple(sorted(((a - mx, b - my) for a, b in new), key=lambda t: (t[1], t[0]))))
        shapes = grown
    return sorted(shapes)


def _shape_boundary(shape) -> list[tuple[int, int]]:
    cells = set(shape)
    out = set()
    for x, y in shape:
        for dx, dy in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            c = (x + dx, y + dy)
            if c not in cells:
                out.add(c)
    return sorted(out, key=lambda t: (t[1], t[0]))


def _codes(arr: np.ndarray, offsets, span: tuple[int, int, int, int]) -> np.ndarray:
    """Bit-code of the spins at ``offsets`` for every translate with offsets inside the array."""
    x0, x1, y0, y1 = span
    L = arr.shape[-1]
    code = np.zeros(arr.shape[:1] + (L - (y1 - y0), L - (x1 - x0)), dtype=np.int64)
    for k, (dx, dy) in enumerate(offsets):
        r, c = dy - y0, dx - x0
        code |= arr[:, r:r + code.shape[1], c:c + code.shape[2]].astype(np.int64) << k
    return code


def closed_form_energy(spec: SamplerSpec, n: int) -> float | None:
    """Exact c_n where it is elementary: Bernoulli for all n, Ising for n = 1."""
    if spec.family == "bernoulli":
        return min(spec.p, 1 - spec.p) ** n
    if n == 1:
        t = heat_bath_table(spec.beta, spec.h_field)[[0, 2, 4, 6, 8]]
        return float(min(t.min(), (1 - t).min()))
    return None


@dataclass
class EnergyEntry:
    n: int
    estimate: float | None
    ci: tuple[float, float] | None
    cells: int
    flagged_cells: int
    probes: int
    argmin: dict | None = None
    closed_form: float | None = None


@dataclass
class EnergyProfile:
    spec: SamplerSpec
    trials: int
    min_cell: int
    entries: list[EnergyEntry] = field(default_factory=list)

    def c(self, n: int) -> float | None:
        return self.entries[n - 1].estimate


def estimate_energy_profile(spec: SamplerSpec, n_max: int, trials: int, min_cell: int = 100,
                            configs: np.ndarray | None = None) -> EnergyProfile:
    """Empirical c_n = min over (shape, xi, eta) of P(eta on shape | xi).

    Every translate of every fixed polyomino of size n whose nearest boundary
    fits in the window is a probe. For Ising, xi is the configuration on the
    nearest boundary of the shape (the conditional law given the whole
    exterior depends on it only); for Bernoulli nothing is conditioned on.
    Cells with fewer than ``min_cell`` probes are flagged and skipped.
    """
    if not 1 <= n_max <= 4:
        raise ValueError("n_max must be between 1 and 4")
    arr = sample_array(spec, trials) if configs is None else configs
    prof = EnergyProfile(spec, len(arr), min_cell)
    for n in range(1, n_max + 1):
        best = None
        cells = flagged = probes = 0
        for shape in polyominoes(n):
            ring = _shape_boundary(shape) if spec.family == "ising" else []
            pts = list(shape) + ring
            xs, ys = [x for x, _ in pts], [y for _, y in pts]
            span = (min(xs), max(xs), min(ys), max(ys))
            if span[1] - span[0] >= arr.shape[-1] or span[3] - span[2] >= arr.shape[-1]:
                raise ValueError("window too small for the probes")
            eta = _codes(arr, shape, span)
            xi = _codes(arr, ring, span) if ring else np.zeros_like(eta)
            key = (xi << n) | eta
            counts = np.bincount(key.ravel(), minlength=(1 << len(ring)) << n).reshape(-1, 1 << n)
            totals = counts.sum(axis=1)
            probes += int(totals.sum())
            for x in np.nonzero(totals)[0]:
                cells += 1
                if totals[x] < min_cell:
                    flagged += 1
                    continue
                e = int(np.argmin(counts[x]))
                freq = counts[x, e] / totals[x]
                if best is None or freq < best[0]:
                    best = (freq, int(counts[x, e]), int(totals[x]), shape, int(x), e, ring)
        if best is None:
            entry = EnergyEntry(n, None, None, cells, flagged, probes)
        else:
            freq, k, tot, shape, x, e, ring = best
            entry = EnergyEntry(n, float(freq), wilson(k, tot), cells, flagged, probes, {
                "shape": [list(c) for c in shape],
                "eta": [(e >> i) & 1 for i in range(n)],
                "xi_sites": [list(c) for c in ring],
                "xi": [(x >> i) & 1 for i in range(len(ring))],
                "count": k, "total": tot})
        entry.closed_form = closed_form_energy(spec, n)
        prof.entries.append(entry)
    return prof


# -- increasing events ------------------------------------------------------------

NEAREST = ndimage.generate_binary_structure(2, 1)
STAR = ndimage.generate_binary_structure(2, 2)

EVENT_CATALOGUE = ("site:0,0", "site:1,0", "lr1", "bt1", "lr1star", "bt1star", "circuit1star")
"""Closed catalogue of increasing events.

site:x,y      the spin at (x, y) is 1
lr1 / bt1     a nearest path of 1s joins the left and right (bottom and top) window edges
lr1star / bt1star   the same with *paths
circuit1star  a 1*circuit around {-1..1}^2 inside the window

Each is a union of cylinder events {all sites of some set are 1}, hence increasing.
"""


def _crossing(arr2d: np.ndarray, structure, vertical: bool) -> bool:
    lab, _ = ndimage.label(arr2d, structure=structure)
    a, b = (lab[0], lab[-1]) if vertical else (lab[:, 0], lab[:, -1])
    return bool(np.intersect1d(a[a > 0], b[b > 0]).size)


def circuit_around_center(arr2d: np.ndarray, radius: int = 1) -> bool:
    """1*circuit around the central box, decided through the matching pair:
    it exists iff the central box cannot reach the window edge through 0 sites."""
    L = arr2d.shape[0]
    c = L // 2
    free = arr2d == 0
    free[c - radius:c + radius + 1, c - radius:c + radius + 1] = True
    lab, _ = ndimage.label(free, structure=NEAREST)
    mine = lab[c, c]
    edge = np.concatenate([lab[0], lab[-1], lab[:, 0], lab[:, -1]])
    return not bool((edge == mine).any())


def event_indicator(arr: np.ndarray, event: str) -> np.ndarray:
    """Boolean vector of the event over a stack of configurations (row 0 = lowest y)."""
    L = arr.shape[-1]
    h = L // 2
    if event.startswith("site:"):
        x, y = (int(v) for v in event[5:].split(","))
        if max(abs(x), abs(y)) > h:
            raise ValueError(f"{event} lies outside the window")
        return arr[:, y + h, x + h] == 1
    if event in ("lr1", "bt1", "lr1star", "bt1star"):
        st = STAR if event.endswith("star") else NEAREST
        vertical = event.startswith("bt")
        return np.array([_crossing(a == 1, st, vertical) for a in arr], dtype=bool)
    if event == "circuit1star":
        if h < 2:
            raise ValueError("window too small for circuit1star")
        return np.array([circuit_around_center(a) for a in arr], dtype=bool)
    raise ValueError(f"event {event!r} is not in the catalogue")


@dataclass(frozen=True)
class CorrelationReport:
    event_a: str
    event_b: str
    trials: int
    p_a: float
    p_b: float
    p_ab: float
    covariance: float
    std_error: float

    @property
    def z(self) -> float:
        return self.covariance / self.std_error if self.std_error > 0 else 0.0

    @property
    def one_sided_ok(self) -> bool:
        return self.covariance >= -3 * self.std_error


def correlation_from_indicators(a: np.ndarray, b: np.ndarray, names=("A", "B")) -> CorrelationReport:
    a = a.astype(float)
    b = b.astype(float)
    n = len(a)
    pa, pb, pab = a.mean(), b.mean(), (a * b).mean()
    cov = pab - pa * pb
    # influence function of (ab)bar - abar*bbar
    psi = a * b - pa * b - pb * a
    se = float(psi.std(ddof=1) / math.sqrt(n)) if n > 1 else float("inf")
    return CorrelationReport(names[0], names[1], n, float(pa), float(pb), float(pab), float(cov), se)


def increasing_event_correlation(spec: SamplerSpec, event_a: str, event_b: str, trials: int,
                                 configs: np.ndarray | None = None) -> CorrelationReport:
    arr = sample_array(spec, trials) if configs is None else configs
    return correlation_from_indicators(event_indicator(arr, event_a), event_indicator(arr, event_b),
                                       (event_a, event_b))


def catalogue_correlations(arr: np.ndarray, events=EVENT_CATALOGUE) -> list[CorrelationReport]:
    ind = {e: event_indicator(arr, e) for e in events}
    return [correlation_from_indicators(ind[a], ind[b], (a, b)) for a, b in combinations(events, 2)]
