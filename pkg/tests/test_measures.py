import math

import numpy as np
import pytest
from scipy import stats

import oracles as O
from percolab.measures import (
    EVENT_CATALOGUE,
    SamplerSpec,
    _ising_block,
    _sweep_numpy,
    catalogue_correlations,
    circuit_around_center,
    closed_form_energy,
    correlation_from_indicators,
    estimate_energy_profile,
    event_indicator,
    heat_bath_table,
    increasing_event_correlation,
    polyominoes,
    sample,
    sample_array,
    wilson,
)
from percolab.rng import trial_stream


def test_spec_validation_and_parsing():
    for bad in ({"family": "potts"}, {"p": 1.5}, {"beta": -0.1}, {"boundary": "odd"},
                {"sweeps": 0}, {"half_width": -1}, {"seed": -3}):
        with pytest.raises(ValueError):
            SamplerSpec(**bad)
    spec = SamplerSpec.parse("family = ising  # comment\nbeta=0.5\nside=9\nboundary=plus\n\n")
    assert (spec.family, spec.beta, spec.half_width, spec.boundary) == ("ising", 0.5, 4, "plus")
    assert spec.n_sweeps == 900
    with pytest.raises(ValueError):
        SamplerSpec.parse("side=8")
    with pytest.raises(ValueError):
        SamplerSpec.parse("colour=red")
    with pytest.raises(ValueError):
        SamplerSpec.parse("just words")
    assert "p" not in spec.to_dict() and "beta" not in SamplerSpec().to_dict()
    assert SamplerSpec(p=0.3, seed=1).sampler_id == SamplerSpec(p=0.3, seed=2).sampler_id


def test_trial_streams_are_keyed_philox():
    g = trial_stream(7, 3)
    ref = np.random.Generator(np.random.Philox(key=np.array([7, 3], dtype=np.uint64)))
    assert np.array_equal(g.random(10), ref.random(10))
    assert not np.array_equal(trial_stream(7, 4).random(4), trial_stream(7, 3).random(4))


def test_bernoulli_extremes_and_mean():
    assert sample_array(SamplerSpec(p=1.0, half_width=3), 20).all()
    assert not sample_array(SamplerSpec(p=0.0, half_width=3), 20).any()
    arr = sample_array(SamplerSpec(p=0.5, half_width=7, seed=11), 500)
    assert arr.size > 1e5 and abs(arr.mean() - 0.5) <= 0.01


def test_bernoulli_follows_documented_draws():
    spec = SamplerSpec(p=0.37, half_width=2, seed=99)
    arr = sample_array(spec, 3, start=5)
    for k in range(3):
        u = trial_stream(99, 5 + k).random((5, 5))
        assert np.array_equal(arr[k], (u < 0.37).astype(np.uint8))


@pytest.mark.parametrize("spec", [SamplerSpec(p=0.4, half_width=3, seed=5),
                                  SamplerSpec("ising", beta=0.6, boundary="minus", sweeps=20, half_width=3, seed=5)])
def test_sampling_is_deterministic_and_split_invariant(spec):
    whole = sample_array(spec, 1200)
    assert np.array_equal(whole, sample_array(spec, 1200))
    assert np.array_equal(whole[700:900], sample_array(spec, 200, start=700))
    cfgs = sample(spec, 2, start=3)
    assert np.array_equal(cfgs[1].spins, whole[4]) and cfgs[0].window == spec.window


def test_ising_zero_beta_matches_fair_coin():
    spec = SamplerSpec("ising", beta=0.0, sweeps=3, half_width=2, seed=2)
    arr = sample_array(spec, 10_000)
    ones = int(arr.sum())
    assert stats.chisquare([ones, arr.size - ones]).pvalue > 0.01
    centre = int(arr[:, 2, 2].sum())
    assert stats.chisquare([centre, len(arr) - centre]).pvalue > 0.01


def test_compiled_sweep_matches_vectorised_twin():
    for boundary in ("free", "plus", "minus"):
        for beta, h in ((0.3, 0.0), (0.9, -0.2)):
            spec = SamplerSpec("ising", beta=beta, h_field=h, boundary=boundary, sweeps=15, half_width=4, seed=3)
            assert np.array_equal(_ising_block(spec, range(6)), _ising_block(spec, range(6), sweep=_sweep_numpy))


def test_boundary_conditions_bias_magnetisation():
    plus = sample_array(SamplerSpec("ising", beta=0.8, boundary="plus", sweeps=60, half_width=4, seed=1), 200)
    minus = sample_array(SamplerSpec("ising", beta=0.8, boundary="minus", sweeps=60, half_width=4, seed=1), 200)
    assert plus.mean() > 0.8 and minus.mean() < 0.2


def test_heat_bath_table():
    t = heat_bath_table(0.5, 0.1)
    for m in range(-4, 5):
        assert t[m + 4] == pytest.approx(math.exp(0.5 * m + 0.1) / (math.exp(0.5 * m + 0.1) + math.exp(-0.5 * m - 0.1)))
    assert np.allclose(heat_bath_table(0.0), 0.5)


def test_polyomino_counts():
    # fixed polyominoes: 1, 2, 6, 19
    assert [len(polyominoes(n)) for n in range(1, 5)] == [1, 2, 6, 19]
    assert polyominoes(0) == []


def test_wilson_interval():
    lo, hi = wilson(30, 100)
    assert lo < 0.3 < hi and hi - lo == pytest.approx(0.1770, abs=2e-3)
    assert wilson(0, 0) == (0.0, 1.0)
    assert wilson(0, 50)[0] == pytest.approx(0.0, abs=1e-12)


def test_energy_profile_bernoulli_closed_form():
    spec = SamplerSpec(p=0.3, half_width=6, seed=4)
    prof = estimate_energy_profile(spec, 3, trials=800)
    for n in (1, 2, 3):
        e = prof.entries[n - 1]
        assert e.closed_form == pytest.approx(0.3 ** n)
        k, tot = e.argmin["count"], e.argmin["total"]
        se = math.sqrt(e.closed_form * (1 - e.closed_form) / tot)
        # the minimum over cells is biased low, hence one-sided slack
        assert -5 * se <= e.estimate - e.closed_form <= 3 * se
        assert all(v == 1 for v in e.argmin["eta"])
    assert prof.c(1) >= prof.c(2) >= prof.c(3)


def test_energy_error_shrinks_with_trials():
    spec = SamplerSpec(p=0.3, half_width=6, seed=8)
    small = estimate_energy_profile(spec, 1, trials=250).entries[0]
    large = estimate_energy_profile(spec, 1, trials=1000).entries[0]
    ratio = (small.ci[1] - small.ci[0]) / (large.ci[1] - large.ci[0])
    assert 1.8 <= ratio <= 2.2


def test_energy_profile_ising_single_site():
    exact = O.ising_single_site_minimum(0.4, 0.0)
    spec = SamplerSpec("ising", beta=0.4, half_width=6, seed=12)
    assert closed_form_energy(spec, 1) == pytest.approx(exact, rel=1e-12)
    e = estimate_energy_profile(spec, 1, trials=500).entries[0]
    se = math.sqrt(exact * (1 - exact) / e.argmin["total"])
    assert abs(e.estimate - exact) <= 4 * se
    assert len(e.argmin["xi"]) == 4 and len(set(e.argmin["xi"])) == 1
    assert e.argmin["eta"] != e.argmin["xi"][:1]


def test_energy_profile_flags_thin_cells():
    spec = SamplerSpec("ising", beta=0.2, sweeps=5, half_width=3, seed=1)
    prof = estimate_energy_profile(spec, 2, trials=5, min_cell=50)
    assert prof.entries[1].flagged_cells > 0
    with pytest.raises(ValueError):
        estimate_energy_profile(spec, 5, trials=1)


def _stack(*grids):
    return np.array(grids, dtype=np.uint8)


def test_event_examples():
    L = 7
    ones, zeros = np.ones((L, L)), np.zeros((L, L))
    row = zeros.copy()
    row[3] = 1
    diag = np.eye(L)
    ring = zeros.copy()
    ring[1, 1:6] = ring[5, 1:6] = ring[1:6, 1] = ring[1:6, 5] = 1
    arr = _stack(ones, zeros, row, diag, ring)
    expect = {
        "site:0,0": [1, 0, 1, 1, 0],
        "site:1,0": [1, 0, 1, 0, 0],
        "lr1": [1, 0, 1, 0, 0],
        "bt1": [1, 0, 0, 0, 0],
        "lr1star": [1, 0, 1, 1, 0],
        "bt1star": [1, 0, 0, 1, 0],
        "circuit1star": [1, 0, 0, 0, 1],
    }
    for event in EVENT_CATALOGUE:
        assert event_indicator(arr, event).tolist() == [bool(v) for v in expect[event]], event
    with pytest.raises(ValueError):
        event_indicator(arr, "site:9,0")
    with pytest.raises(ValueError):
        event_indicator(arr, "cluster")


def _zero_escape(spins, box):
    """Nearest path of 0 sites from the box to outside the window."""
    seen, stack = set(box), list(box)
    while stack:
        u = stack.pop()
        for dx, dy in O.NEAREST_STEPS:
            w = (u[0] + dx, u[1] + dy)
            if w not in spins:
                return True
            if w not in seen and spins[w] == 0:
                seen.add(w)
                stack.append(w)
    return False


def test_circuit_event_matches_zero_escape(rng):
    hits = 0
    for _ in range(300):
        grid = (rng.random((9, 9)) < 0.6).astype(np.uint8)
        got = circuit_around_center(grid)
        hits += got
        assert got == (not _zero_escape(O.grid_map(grid, 4), O.square(1)))
    assert 0 < hits < 300


def test_events_are_increasing(rng):
    arr = (rng.random((400, 7, 7)) < 0.55).astype(np.uint8)
    up = arr.copy()
    idx = rng.integers(0, 7, size=(400, 2))
    up[np.arange(400), idx[:, 0], idx[:, 1]] = 1
    for event in EVENT_CATALOGUE:
        before, after = event_indicator(arr, event), event_indicator(up, event)
        assert not (before & ~after).any(), event


def test_correlation_examples():
    p = 0.3
    spec = SamplerSpec(p=p, half_width=3, seed=21)
    same = increasing_event_correlation(spec, "site:0,0", "site:0,0", 20_000)
    assert abs(same.covariance - (p - p * p)) <= 3 * same.std_error + 0.005
    apart = increasing_event_correlation(spec, "site:0,0", "site:1,0", 20_000)
    assert abs(apart.covariance) <= 3 * apart.std_error
    a = np.array([1, 1, 0, 0], dtype=bool)
    rep = correlation_from_indicators(a, ~a)
    assert rep.covariance == pytest.approx(-0.25) and not rep.one_sided_ok


def test_fkg_holds_for_ising_crossings():
    spec = SamplerSpec("ising", beta=0.5, sweeps=80, half_width=4, seed=6)
    arr = sample_array(spec, 2000)
    rep = increasing_event_correlation(spec, "lr1", "bt1", 0, configs=arr)
    assert rep.one_sided_ok and rep.trials == 2000
    assert all(r.one_sided_ok for r in catalogue_correlations(arr))


def test_plus_boundary_dominates_free():
    kw = dict(beta=0.5, sweeps=80, half_width=4, seed=9)
    plus = sample_array(SamplerSpec("ising", boundary="plus", **kw), 1500)
    free = sample_array(SamplerSpec("ising", boundary="free", **kw), 1500)
    for event in EVENT_CATALOGUE:
        a, b = event_indicator(plus, event).mean(), event_indicator(free, event).mean()
        se = math.sqrt((a * (1 - a) + b * (1 - b)) / 1500)
        assert a >= b - 3 * se, event
