"""Experiment drivers behind the command line.

Trials are processed in fixed chunks of ``CHUNK`` consecutive trial indices,
whatever the number of worker processes, and per-trial rows are concatenated
in trial order. Every trial draws from its own stream, so a report is a pure
function of (sampler spec, parameters, master seed). Wall-clock time is kept
out of the report and written to a separate timing file.
"""
from __future__ import annotations

import functools
import itertools
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import io
from .clusters import boundary_curve_of_sites, filled_cluster_sites, label_clusters
from .flows import (
    BlockingError,
    NeckletConstructionError,
    build_network,
    disjoint_path_count,
    max_flow_min_cut,
    necklet_construct,
    pearl_blocking_set,
)
from .lattice import Box, Configuration, Kind, annulus
from .measures import SamplerSpec, sample_array, wilson
from .rng import trial_stream
from .sweep import decode, exhaustive_sweep, site_order
from .topology import DualityViolation, Orientation, duality_check, winding_components

CHUNK = 100
SCHEMA_VERSION = 1


def run_chunks(worker, payload: dict, trials: int, jobs: int = 1) -> list:
    starts = list(range(0, trials, CHUNK))
    counts = [min(CHUNK, trials - s) for s in starts]
    if jobs <= 1 or len(starts) <= 1:
        parts = [worker(payload, s, c) for s, c in zip(starts, counts)]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            parts = list(ex.map(worker, itertools.repeat(payload), starts, counts))
    return [row for part in parts for row in part]


def proportion(name: str, k: int, n: int, seed: int, **extra) -> dict:
    value = k / n if n else None
    se = math.sqrt(value * (1 - value) / n) if n else None
    out = {"name": name, "kind": "proportion", "value": value, "std_error": se,
           "ci95": list(wilson(k, n)) if n else None, "successes": k, "trials": n, "seed": seed}
    out.update(extra)
    return out


def mean_estimate(name: str, values, seed: int, **extra) -> dict:
    v = np.asarray(values, dtype=float)
    n = len(v)
    m = float(v.mean()) if n else None
    se = float(v.std(ddof=1) / math.sqrt(n)) if n > 1 else None
    ci = [m - 1.959963984540054 * se, m + 1.959963984540054 * se] if se is not None else None
    out = {"name": name, "kind": "mean", "value": m, "std_error": se, "ci95": ci,
           "successes": None, "trials": n, "seed": seed}
    out.update(extra)
    return out


def derived(name: str, value, trials: int, seed: int, **extra) -> dict:
    out = {"name": name, "kind": "derived", "value": value, "std_error": None, "ci95": None,
           "successes": None, "trials": trials, "seed": seed}
    out.update(extra)
    return out


@dataclass
class ExperimentReport:
    experiment: str
    spec: SamplerSpec | None
    master_seed: int
    trials: int
    parameters: dict
    estimates: list = field(default_factory=list)
    flags: dict = field(default_factory=dict)
    failures: list = field(default_factory=list)
    rows: list = field(default_factory=list)
    columns: list | None = None
    wall_clock: float = 0.0

    def estimate(self, name: str) -> dict:
        for e in self.estimates:
            if e["name"] == name:
                return e
        raise KeyError(name)

    def to_json(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "experiment": self.experiment,
            "sampler": self.spec.to_dict() if self.spec else None,
            "sampler_id": self.spec.sampler_id if self.spec else None,
            "master_seed": self.master_seed,
            "trials": self.trials,
            "parameters": self.parameters,
            "estimates": self.estimates,
            "flags": self.flags,
            "failures": self.failures,
        }

    def write(self, out_dir) -> dict[str, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        doc = self.to_json()
        io.validate_report(doc)
        paths = {"json": io.dump_json(doc, out / f"{self.experiment}.json"),
                 "csv": io.write_csv(self.rows, out / f"{self.experiment}.csv", self.columns),
                 "timing": io.dump_json({"experiment": self.experiment, "wall_clock_seconds": self.wall_clock},
                                        out / f"{self.experiment}.timing.json")}
        return paths


def _timed(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kw):
        t0 = time.perf_counter()
        rep = fn(*args, **kw)
        rep.wall_clock = time.perf_counter() - t0
        return rep

    return wrapper


def _configs(spec: SamplerSpec, start: int, count: int):
    arr = sample_array(spec, count, start)
    return [(start + k, Configuration(spec.window, a)) for k, a in enumerate(arr)]


# -- duality ---------------------------------------------------------------------


def _duality_worker(payload, start, count):
    spec = payload["spec"]
    rows = []
    for t, cfg in _configs(spec, start, count):
        for k, n in payload["annuli"]:
            try:
                side = duality_check(cfg, annulus(k, n)).side
            except DualityViolation as exc:
                exc.trial = t
                raise
            rows.append({"trial": t, "annulus": f"{k}:{n}", "side": side})
    return rows


@_timed
def exp_duality_sweep(spec: SamplerSpec, annuli=((0, 2),), trials: int = 100, jobs: int = 1,
                      exhaustive: bool = False, crosscheck: int = 2000) -> ExperimentReport:
    """Sampled (and optionally exhaustive) check that exactly one side of the
    annulus dichotomy holds; a violation raises DualityViolation."""
    annuli = [tuple(a) for a in annuli]
    for k, n in annuli:
        if not spec.window.contains_box(Box(n)):
            raise ValueError(f"annulus {k}:{n} does not fit the window")
    rep = ExperimentReport("duality", spec, spec.seed, trials,
                           {"annuli": [f"{k}:{n}" for k, n in annuli], "exhaustive": exhaustive},
                           columns=["trial", "annulus", "side"])
    rep.rows = run_chunks(_duality_worker, {"spec": spec, "annuli": annuli}, trials, jobs)
    for k, n in annuli:
        sides = [r["side"] for r in rep.rows if r["annulus"] == f"{k}:{n}"]
        rep.estimates.append(proportion(f"side_a[{k}:{n}]", sides.count("a"), len(sides), spec.seed))
        rep.estimates.append(proportion(f"side_b[{k}:{n}]", sides.count("b"), len(sides), spec.seed))
    rep.estimates.append(derived("violations", 0, trials, spec.seed))
    rep.flags["sampled_ok"] = True
    if exhaustive:
        for k, n in annuli:
            region = annulus(k, n)
            if len(site_order(region)) > 24:
                rep.flags[f"exhaustive[{k}:{n}]"] = "skipped: more than 24 sites"
                continue
            res = exhaustive_sweep(region)
            tag = f"[{k}:{n}]"
            rep.estimates.append(derived("exhaustive_configurations" + tag, res.total, res.total, spec.seed))
            rep.estimates.append(derived("exhaustive_side_a" + tag, res.side_a, res.total, spec.seed))
            rep.estimates.append(derived("exhaustive_side_b" + tag, res.side_b, res.total, spec.seed))
            rep.estimates.append(derived("exhaustive_violations" + tag, res.violations, res.total, spec.seed))
            # the generic searcher must agree with the bitmask sweep on a seeded subset
            rng = trial_stream(spec.seed, (1 << 63) + k * 1000 + n)
            codes = rng.integers(0, res.total, size=min(crosscheck, res.total))
            from .sweep import side_a, sweep_tables

            tables = sweep_tables(region)
            expect_a = side_a(codes.astype(np.uint64), tables)
            mismatch = 0
            for code, ea in zip(codes, expect_a):
                cfg = decode(int(code), region)
                try:
                    got = duality_check(cfg, region).side == "a"
                except DualityViolation:
                    got = None
                if got != bool(ea):
                    mismatch += 1
                    rep.failures.append({"trial": None, "kind": "crosscheck", "code": int(code),
                                         "configuration": io.format_configuration(cfg)})
            rep.estimates.append(derived("crosscheck_mismatches" + tag, mismatch, len(codes), spec.seed))
            rep.flags["exhaustive_ok" + tag] = res.violations == 0 and mismatch == 0
            if res.violations:
                raise DualityViolation(f"exhaustive sweep found {res.violations} violations",
                                       decode(res.first_violation, region))
    return rep


# -- non-coexistence chain -------------------------------------------------------


def _spanning_mask(cfg: Configuration, spin: int, kind: Kind) -> np.ndarray:
    lab = label_clusters(cfg, spin, kind)
    ids = [i for i in range(len(lab)) if lab.spans(i)]
    return np.isin(lab.labels, ids)


def _chain_worker(payload, start, count):
    spec, d, m, heights = payload["spec"], payload["delta"], payload["gamma"], payload["heights"]
    delta = Box(d)
    hw = spec.half_width
    rows = []
    for t, cfg in _configs(spec, start, count):
        span = _spanning_mask(cfg, 1, Kind.STAR)
        allowed = {s for s in cfg.sites_with(1) if s not in delta}
        wc = winding_components(allowed, Kind.STAR, delta.center)
        row = {"trial": t, "circuit": any(wc.period)}
        for h in heights:
            x, y = (-m - 1, h), (m + 1, h)
            cls = wc.orientations(x, y)
            row[f"probe_x[{h}]"] = bool(span[h + hw, x[0] + hw])
            row[f"probe_y[{h}]"] = bool(span[h + hw, y[0] + hw])
            row[f"conn[{h}]"] = wc.comp.get(x, -1) == wc.comp.get(y, -2)
            row[f"cw[{h}]"] = Orientation.CLOCKWISE in cls
            row[f"ccw[{h}]"] = Orientation.COUNTERCLOCKWISE in cls
            row[f"row1[{h}]"] = bool(cfg.spins[h + hw, x[0] + hw:y[0] + hw + 1].all())
        rows.append(row)
    return rows


@_timed
def exp_theorem1_chain(spec: SamplerSpec, delta: int = 0, gamma: int = 1, heights=None, trials: int = 100,
                       jobs: int = 1) -> ExperimentReport:
    """Finite-window analogues of the quantities in the non-coexistence chain.

    Probes x_h = (-gamma-1, h), y_h = (gamma+1, h). Paths avoid {-delta..delta}^2
    and stay in the window; cw/ccw refer to windings about the origin.
    Inequality flags are reported, never enforced.
    """
    hw = spec.half_width
    if not 0 <= delta <= gamma or gamma + 1 > hw:
        raise ValueError("need 0 <= delta <= gamma and gamma + 1 <= half width")
    heights = list(range(-hw, hw + 1)) if heights is None else sorted(int(h) for h in heights)
    if any(abs(h) > hw for h in heights):
        raise ValueError("heights leave the window")
    payload = {"spec": spec, "delta": delta, "gamma": gamma, "heights": heights}
    trial_rows = run_chunks(_chain_worker, payload, trials, jobs)
    seed = spec.seed
    rep = ExperimentReport("chain", spec, seed, trials, {"delta": delta, "gamma": gamma, "heights": heights},
                           columns=["h", "probe_x", "probe_y", "conn", "cw", "ccw", "row1", "joint_cw_above"])

    def count(key):
        return sum(bool(r[key]) for r in trial_rows)

    probes = []
    for h in heights:
        joint = None
        if h + 1 in heights:
            joint = sum(bool(r[f"cw[{h + 1}]"] and r[f"ccw[{h}]"]) for r in trial_rows)
        rep.rows.append({"h": h, "probe_x": count(f"probe_x[{h}]"), "probe_y": count(f"probe_y[{h}]"),
                         "conn": count(f"conn[{h}]"), "cw": count(f"cw[{h}]"), "ccw": count(f"ccw[{h}]"),
                         "row1": count(f"row1[{h}]"), "joint_cw_above": joint})
        probes += [count(f"probe_x[{h}]"), count(f"probe_y[{h}]")]
    c_hat = min(probes) / trials if trials else 0.0
    rep.estimates.append(proportion("c_hat", min(probes), trials, seed,
                                    note="min over probe sites of P(site in a spanning 1*cluster)"))
    for r in rep.rows:
        h = r["h"]
        for key in ("conn", "cw", "ccw", "row1"):
            rep.estimates.append(proportion(f"{key}[{h}]", r[key], trials, seed))
        if r["joint_cw_above"] is not None:
            rep.estimates.append(proportion(f"joint_cw{h + 1}_ccw{h}", r["joint_cw_above"], trials, seed))
    circ = count("circuit")
    rep.estimates.append(proportion("circuit_around_delta", circ, trials, seed))
    t2, t4, t16 = c_hat ** 2 / 2, c_hat ** 2 / 4, c_hat ** 4 / 16
    rep.estimates.append(derived("threshold_c2_over_2", t2, trials, seed))
    rep.estimates.append(derived("threshold_c2_over_4", t4, trials, seed))
    rep.estimates.append(derived("threshold_c4_over_16", t16, trials, seed))
    freq = {key: {r["h"]: r[key] / trials for r in rep.rows} for key in ("conn", "cw", "ccw")}
    joints = [r["joint_cw_above"] / trials for r in rep.rows if r["joint_cw_above"] is not None]
    rep.flags = {
        "conn_ge_c2_over_2": min(freq["conn"].values()) >= t2,
        "cw_or_ccw_ge_c2_over_4": all(max(freq["cw"][h], freq["ccw"][h]) >= t4 for h in heights),
        "cw_above_ge_c2_over_4": any(freq["cw"][h] >= t4 for h in heights if h > 0),
        "ccw_below_ge_c2_over_4": any(freq["ccw"][h] >= t4 for h in heights if h < 0),
        "joint_ge_c4_over_16": bool(joints) and max(joints) >= t16,
        "circuit_ge_c4_over_16": circ / trials >= t16,
    }
    return rep


def chain_threshold(c: float) -> float:
    return c ** 4 / 16


# -- coexistence -------------------------------------------------------------------


def coexistence(cfg: Configuration) -> bool:
    """A spanning 0cluster and a spanning 1*cluster both exist."""
    z = label_clusters(cfg, 0, Kind.NEAREST)
    if not any(z.spans(i) for i in range(len(z))):
        return False
    o = label_clusters(cfg, 1, Kind.STAR)
    return any(o.spans(i) for i in range(len(o)))


def exact_coexistence(p: float, side: int = 3) -> float:
    """Exact Bernoulli coexistence probability on a side x side window by enumeration."""
    if side % 2 == 0 or side > 5:
        raise ValueError("side must be odd and at most 5")
    n = side * side
    w = Box(side // 2)
    total = 0.0
    for code in range(1 << n):
        bits = np.array([(code >> i) & 1 for i in range(n)], dtype=np.uint8).reshape(side, side)
        if coexistence(Configuration(w, bits)):
            k = int(bits.sum())
            total += p ** k * (1 - p) ** (n - k)
    return total


def _coexist_worker(payload, start, count):
    spec = payload["spec"]
    return [{"trial": t, "side": spec.side, "coexist": coexistence(cfg)} for t, cfg in _configs(spec, start, count)]


@_timed
def exp_coexistence_decay(spec: SamplerSpec, sizes=(17, 33, 65), trials: int = 100, jobs: int = 1,
                          exact_small: bool = True) -> ExperimentReport:
    sizes = [int(s) for s in sizes]
    if any(s % 2 == 0 or s < 1 for s in sizes):
        raise ValueError("window sizes must be odd and positive")
    rep = ExperimentReport("coexist", spec, spec.seed, trials, {"sizes": sizes},
                           columns=["side", "trials", "coexist", "estimate", "std_error", "ci95_lo", "ci95_hi"])
    est = []
    for side in sizes:
        sp = spec.with_(half_width=side // 2)
        rows = run_chunks(_coexist_worker, {"spec": sp}, trials, jobs)
        k = sum(r["coexist"] for r in rows)
        e = proportion(f"coexistence[{side}]", k, trials, spec.seed, sampler_id=sp.sampler_id)
        rep.estimates.append(e)
        est.append(e)
        rep.rows.append({"side": side, "trials": trials, "coexist": k, "estimate": e["value"],
                         "std_error": e["std_error"], "ci95_lo": e["ci95"][0], "ci95_hi": e["ci95"][1]})
    ok = True
    for a, b in zip(est, est[1:]):
        slack = 3 * math.sqrt(a["std_error"] ** 2 + b["std_error"] ** 2)
        ok = ok and b["value"] <= a["value"] + slack
    rep.flags["non_increasing_within_3sigma"] = ok
    if exact_small and spec.family == "bernoulli" and 3 in sizes:
        exact = exact_coexistence(spec.p, 3)
        rep.estimates.append(derived("exact_coexistence[3]", exact, 1 << 9, spec.seed))
        e3 = est[sizes.index(3)]
        rep.flags["exact_3x3_within_3sigma"] = abs(e3["value"] - exact) <= 3 * math.sqrt(exact * (1 - exact) / trials) + 1e-12
    return rep


# -- necklets ------------------------------------------------------------------------


def necklet_trial(cfg: Configuration, gamma: Box, s: int, t: int) -> dict:
    """All necklet quantities for one configuration; failures are reported, not raised."""
    row = {f"A[{s},{i}]": disjoint_path_count(cfg, s, i) for i in range(s + 2, t + 2)}
    arc_value, _ = max_flow_min_cut(build_network(cfg, s, t))
    row.update({"arc_flow": arc_value, "site_flow": None, "pearls": None, "necklet_ok": False,
                "blocking_ok": False, "blocking_size": None, "error": ""})
    try:
        necklet, dec = necklet_construct(cfg, gamma, s, t)
        row.update(site_flow=dec.flow_value, pearls=necklet.n_pearls, necklet_ok=True)
    except NeckletConstructionError as exc:
        if exc.decomposition is not None:
            row["site_flow"] = exc.decomposition.flow_value
        row["error"] = f"necklet: {exc}"
        return row
    try:
        blocking = pearl_blocking_set(cfg, necklet, gamma)
        row.update(blocking_ok=True, blocking_size=len(blocking))
    except BlockingError as exc:
        row["error"] = f"blocking: {exc}"
    return row


def _necklet_worker(payload, start, count):
    spec, g, s, t = payload["spec"], payload["gamma"], payload["s"], payload["t"]
    rows = []
    for k, cfg in _configs(spec, start, count):
        row = {"trial": k}
        row.update(necklet_trial(cfg, Box(g), s, t))
        if row["error"]:
            row["configuration"] = io.format_configuration(cfg)
        rows.append(row)
    return rows


@_timed
def exp_necklet_census(spec: SamplerSpec, gamma: int = 0, s: int = 1, t: int = 3, trials: int = 100,
                       jobs: int = 1) -> ExperimentReport:
    if not 0 <= gamma <= s - 1 or s >= t or spec.half_width < t + 1:
        raise ValueError("need gamma <= s - 1, s < t and window half width >= t + 1")
    rows = run_chunks(_necklet_worker, {"spec": spec, "gamma": gamma, "s": s, "t": t}, trials, jobs)
    a_cols = [f"A[{s},{i}]" for i in range(s + 2, t + 2)]
    cols = ["trial"] + a_cols + ["arc_flow", "site_flow", "pearls", "necklet_ok", "blocking_ok", "blocking_size", "error"]
    rep = ExperimentReport("necklet", spec, spec.seed, trials, {"gamma": gamma, "s": s, "t": t}, columns=cols)
    for r in rows:
        if r.get("configuration"):
            rep.failures.append({"trial": r["trial"], "kind": r["error"].split(":")[0],
                                 "message": r["error"], "configuration": r.pop("configuration")})
    rep.rows = rows
    seed = spec.seed
    rep.estimates.append(proportion("necklet_valid", sum(r["necklet_ok"] for r in rows), trials, seed))
    rep.estimates.append(proportion("blocking_valid", sum(r["blocking_ok"] for r in rows), trials, seed))
    flows = [r["site_flow"] for r in rows if r["site_flow"] is not None]
    rep.estimates.append(mean_estimate("flow_value_mean", flows, seed))
    rep.estimates.append(mean_estimate("arc_flow_value_mean", [r["arc_flow"] for r in rows], seed))
    rep.estimates.append(proportion("arc_flow_exceeds_site_flow",
                                    sum(r["site_flow"] is not None and r["arc_flow"] > r["site_flow"] for r in rows),
                                    trials, seed))
    for c in a_cols:
        rep.estimates.append(mean_estimate(f"{c}_mean", [r[c] for r in rows], seed))
    dist = {}
    for v in flows:
        dist[str(v)] = dist.get(str(v), 0) + 1
    rep.parameters["flow_value_distribution"] = dict(sorted(dist.items(), key=lambda kv: int(kv[0])))
    rep.flags["all_valid"] = not rep.failures
    return rep


# -- boundary shift ------------------------------------------------------------------


def boundary_separations(cfg: Configuration, edge, shifts) -> list[bool] | None:
    """Whether the boundary curve separates each vertical translate of ``edge``;
    None unless a spanning 0cluster and a spanning 1*cluster coexist.

    The first spanning cluster of each kind in row-major label order is used.
    """
    z = label_clusters(cfg, 0, Kind.NEAREST)
    o = label_clusters(cfg, 1, Kind.STAR)
    zs = [i for i in range(len(z)) if z.spans(i)]
    os_ = [i for i in range(len(o)) if o.spans(i)]
    if not zs or not os_:
        return None
    curve = boundary_curve_of_sites(filled_cluster_sites(cfg, os_[0], o))
    (ax, ay), (bx, by) = edge
    return [curve.separates((ax, ay + h), (bx, by + h)) for h in shifts]


def _boundary_worker(payload, start, count):
    spec, edge, shifts = payload["spec"], payload["edge"], payload["shifts"]
    rows = []
    for t, cfg in _configs(spec, start, count):
        sep = boundary_separations(cfg, edge, shifts)
        row = {"trial": t, "coexist": sep is not None}
        for h, v in zip(shifts, sep or [None] * len(shifts)):
            row[f"sep[{h}]"] = v
        rows.append(row)
    return rows


@_timed
def exp_boundary_shift(spec: SamplerSpec, edge=((0, -1), (0, 0)), shifts=(-2, -1, 0, 1, 2), trials: int = 100,
                       jobs: int = 1) -> ExperimentReport:
    shifts = [int(h) for h in shifts]
    edge = (tuple(edge[0]), tuple(edge[1]))
    rows = run_chunks(_boundary_worker, {"spec": spec, "edge": edge, "shifts": shifts}, trials, jobs)
    rep = ExperimentReport("boundary", spec, spec.seed, trials,
                           {"edge": [list(edge[0]), list(edge[1])], "shifts": shifts,
                            "conditioning": "spanning 0cluster and spanning 1*cluster coexist"},
                           columns=["trial", "coexist"] + [f"sep[{h}]" for h in shifts])
    rep.rows = rows
    hits = [r for r in rows if r["coexist"]]
    rep.estimates.append(proportion("coexistence", len(hits), trials, spec.seed))
    freqs = []
    for h in shifts:
        k = sum(bool(r[f"sep[{h}]"]) for r in hits)
        e = proportion(f"separates[{h}]", k, len(hits), spec.seed)
        rep.estimates.append(e)
        if e["value"] is not None:
            freqs.append(e["value"])
    rep.estimates.append(derived("spread", (max(freqs) - min(freqs)) if freqs else None, len(hits), spec.seed))
    return rep
