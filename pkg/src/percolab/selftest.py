"""Quick deterministic checks run by ``percolab selftest``."""
from __future__ import annotations

from fractions import Fraction

from .clusters import boundary_curve_of_sites
from .experiments import ExperimentReport, derived, necklet_trial
from .lattice import Box, Circuit, Kind, annulus, interior_exterior
from .measures import SamplerSpec, sample
from .topology import DualityViolation, duality_check, winding_closed


def run_selftest(seed: int = 0, trials: int = 200) -> ExperimentReport:
    rep = ExperimentReport("selftest", None, seed, trials, {})

    def check(name, ok, detail=None):
        rep.flags[name] = bool(ok)
        if not ok:
            rep.failures.append({"trial": None, "kind": name, "message": str(detail)})

    ring = ((1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1))
    w = winding_closed(ring)
    check("ring_winding", w.total == 1 and winding_closed(ring[::-1]).total == -1, w)
    inside, _ = interior_exterior(Circuit(ring, Kind.STAR))
    check("ring_interior", inside == {(0, 0)}, inside)
    check("square_length", boundary_curve_of_sites([(0, 0)]).length == 6)
    check("diagonal_length", boundary_curve_of_sites([(0, 0), (1, 1)]).length == Fraction(10))

    region = annulus(0, 2)
    bad = 0
    for cfg in sample(SamplerSpec("bernoulli", p=0.5, half_width=2, seed=seed), trials):
        try:
            duality_check(cfg, region)
        except DualityViolation:
            bad += 1
    rep.estimates.append(derived("duality_violations", bad, trials, seed))
    check("duality", bad == 0, bad)

    failures = 0
    spec = SamplerSpec("bernoulli", p=0.6, half_width=6, seed=seed)
    for cfg in sample(spec, trials // 4):
        row = necklet_trial(cfg, Box(0), 1, 4)
        failures += not (row["necklet_ok"] and row["blocking_ok"])
    rep.estimates.append(derived("necklet_failures", failures, trials // 4, seed))
    check("necklet", failures == 0, failures)
    return rep
