import math
import warnings
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from scmkit import simlab
from scmkit.errors import DonorPoolTooSmall, EmptyWindow, YearNotInPost
from scmkit.inference import (
    CRITERIA, PerfectPreFitWarning, PlaceboFailureWarning, PlaceboSet, PlaceboUnit, effect_pct, gap_series,
    make_gaps, pseudo_p, ratio_of, rmspe, run_placebos,
)
from scmkit.panel import Panel
from scmkit.solver import fit

from conftest import mean_study


def gaps_from(pre, post, base=100.0):
    n_pre, n_post = len(pre), len(post)
    times = list(range(2000, 2000 + n_pre + n_post))
    g = np.array(list(pre) + list(post), dtype=float)
    return make_gaps(times, base + g, np.full(len(g), base), 2000 + n_pre)


def fake_unit(name, ratio, treated=False, pre_mspe=1.0, retained=True, last_gap=0.0):
    g = gaps_from([1.0, 1.0], [0.0, last_gap])
    return PlaceboUnit(name, treated, g, pre_mspe, 1.0, ratio, ratio, retained)


def placebo_set(treated_ratio, others, **kw):
    units = [fake_unit("T", treated_ratio, treated=True, **kw)]
    units += [fake_unit(f"d{i:02d}", r) for i, r in enumerate(others)]
    return PlaceboSet(units)


# ---------------------------------------------------------------- gaps and rmspe

def test_rmspe_hand_values():
    assert rmspe(gaps_from([0, 0, 0], [1]), "pre") == 0.0
    assert rmspe(gaps_from([3, 4], [1]), "pre") == pytest.approx(math.sqrt(12.5))
    assert round(rmspe(gaps_from([3, 4], [1]), "pre"), 6) == 3.535534


def test_rmspe_homogeneous():
    g = gaps_from([0.3, -1.2, 2.0], [4.0, 5.0])
    c = 7.5
    scaled = make_gaps(g.times, c * g.actual, c * g.synthetic, g.treatment_time)
    assert rmspe(scaled, "pre") == pytest.approx(c * rmspe(g, "pre"), rel=1e-14)


def test_rmspe_empty_window():
    g = make_gaps([2000, 2001], [1.0, 2.0], [1.0, 1.0], 2005)
    with pytest.raises(EmptyWindow):
        rmspe(g, "post")
    with pytest.raises(ValueError):
        g.mask("during")


def test_ratio_hand_values():
    g = gaps_from([1, 1], [0, 0])
    assert ratio_of(rmspe(g, "pre"), rmspe(g, "post")) == 0.0
    g = gaps_from([1, 1], [2, 2])
    assert ratio_of(rmspe(g, "pre"), rmspe(g, "post")) == 2.0


def test_ratio_perfect_pre_fit():
    with pytest.warns(PerfectPreFitWarning):
        assert ratio_of(0.0, 1.0) == math.inf


def test_effect_conventions():
    g = make_gaps([2000, 2001], [50.0, 110.0], [50.0, 100.0], 2001)
    e = effect_pct(g, 2001)
    assert e.a == pytest.approx(10.0)
    assert round(e.b, 2) == -9.09
    g = make_gaps([2000, 2001], [1.0, 100.0], [1.0, 90.19], 2001)
    assert round(effect_pct(g, 2001).b, 2) == -9.81
    g = make_gaps([2000, 2001], [1.0, 5.0], [1.0, 5.0], 2001)
    assert effect_pct(g, 2001).a == 0.0 and effect_pct(g, 2001).b == 0.0
    with pytest.raises(YearNotInPost):
        effect_pct(g, 2000)
    with pytest.raises(YearNotInPost):
        effect_pct(g, 2002)


def test_perfect_fit_gap_is_zero():
    cfg = simlab.SimConfig(J=6, noise_sd=0.0, effect_path=0.1, seed=9)
    panel, _ = simlab.generate_panel(cfg)
    f = fit(simlab.default_study(cfg), panel)
    g = gap_series(f, panel)
    assert np.abs(g.gap[g.mask("pre")]).max() <= 1e-9
    np.testing.assert_allclose(g.gap_pct[g.mask("post")], 10.0, atol=1e-6)


def test_vertex_weight_passes_donor_through(chile_panel):
    cells = [c for c in chile_panel.cells() if c[0] != "Maule"]
    cells += [("Maule", t, v, x) for u, t, v, x in chile_panel.cells() if u == "Aysén"]
    panel = Panel.from_cells(cells)
    spec = replace(simlab.default_study(simlab.SimConfig(J=12, T=31, T0=25)),
                   treated_unit="Maule")
    f = fit(spec, panel)
    g = gap_series(f, panel)
    donor = panel.block(["Aysén"], "gdp_pc", (1985, 2015))[0]
    np.testing.assert_array_equal(g.synthetic, donor)


def test_planted_effect_sign(nz_config):
    agree = 0
    for s in range(100):
        cfg = replace(nz_config, seed=s, unit_names=None, treated_name="treated")
        panel, _ = simlab.generate_panel(cfg)
        g = gap_series(fit(mean_study(cfg), panel), panel)
        agree += float(np.mean(g.gap[g.mask("post")])) > 0
    assert agree >= 95


# ---------------------------------------------------------------- p-values

def test_p_zero_of_fifteen():
    ps = placebo_set(10.0, [0.5 * i for i in range(14)])
    s = pseudo_p(ps)
    assert s.pseudo_p == 0.0 and s.rank == 1 and s.n_retained == 15


def test_p_one_of_fourteen():
    ps = placebo_set(10.0, [1.0] * 12 + [12.0])
    s = pseudo_p(ps)
    assert s.n_retained == 14
    assert s.pseudo_p == pytest.approx(0.071429, abs=1e-6)
    assert s.exceedances == ("d12",) and s.rank == 2


def test_ties_do_not_exceed():
    assert pseudo_p(placebo_set(2.0, [2.0, 2.0, 1.0])).pseudo_p == 0.0


def test_filtered_units_leave_denominator():
    units = [fake_unit("T", 3.0, treated=True), fake_unit("a", 5.0),
             replace(fake_unit("b", 9.0), retained=False), fake_unit("c", 1.0)]
    s = pseudo_p(PlaceboSet(units))
    assert (s.pseudo_p, s.n_retained) == (1 / 3, 3)


def test_too_few_retained():
    units = [fake_unit("T", 3.0, treated=True), replace(fake_unit("a", 5.0), retained=False)]
    with pytest.raises(DonorPoolTooSmall):
        pseudo_p(PlaceboSet(units))


def test_terminal_gap_criterion():
    units = [fake_unit("T", 1.0, treated=True, last_gap=-3.0),
             fake_unit("a", 9.0, last_gap=1.0), fake_unit("b", 0.5, last_gap=4.0)]
    ps = PlaceboSet(units)
    assert pseudo_p(ps, "rmspe_ratio").exceedances == ("a",)
    assert pseudo_p(ps, "terminal_abs_gap").exceedances == ("b",)
    with pytest.raises(ValueError):
        pseudo_p(ps, "median")


@settings(max_examples=100, deadline=None)
@given(st.floats(0, 10), st.lists(st.floats(0, 10), min_size=1, max_size=20),
       st.randoms(use_true_random=False))
def test_p_value_properties(t, others, rnd):
    ps = placebo_set(t, others)
    s = pseudo_p(ps)
    assert 0.0 <= s.pseudo_p < 1.0
    assert s.pseudo_p == sum(o > t for o in others) / (len(others) + 1)
    shuffled = list(others)
    rnd.shuffle(shuffled)
    assert pseudo_p(placebo_set(t, shuffled)).pseudo_p == s.pseudo_p
    big = max(others) + 1.0
    assert pseudo_p(placebo_set(big, others)).pseudo_p == 0.0


# ---------------------------------------------------------------- placebo runs

@pytest.fixture(scope="module")
def nz_placebos(nz_panel, nz_study):
    return run_placebos(nz_study, nz_panel, threads=1)


def test_nz_placebo_count(nz_placebos):
    assert len(nz_placebos.units) == 15
    assert sum(u.treated for u in nz_placebos.units) == 1
    assert nz_placebos.treated.unit == "Canterbury"
    assert all(u.gaps is not None and u.ratio >= 0 for u in nz_placebos.units)


def test_planted_effect_treated_ratio_largest(nz_placebos):
    t = nz_placebos.treated.ratio
    assert all(u.ratio < t for u in nz_placebos.units if not u.treated)
    assert pseudo_p(nz_placebos).pseudo_p == 0.0


def test_treated_never_a_placebo_donor(nz_placebos):
    f = nz_placebos.treated_fit
    assert "Canterbury" not in f.spec.donors


def test_thread_count_does_not_change_results(nz_panel, nz_study, nz_placebos):
    par = run_placebos(nz_study, nz_panel, threads=4)
    for a, b in zip(nz_placebos.units, par.units):
        assert a.unit == b.unit
        assert a.gaps.gap.tobytes() == b.gaps.gap.tobytes()


def test_filter_k_drops_bad_fit(nz_panel, nz_study):
    # wreck one donor's pre-period path so its placebo fit is terrible
    rows = []
    for u, t, v, x in nz_panel.cells():
        if u == "Auckland" and v == "gdp_pc" and t < 2011:
            x = x * (1.6 if t % 2 else 0.5)
        rows.append((u, t, v, x))
    panel = Panel.from_cells(rows)
    ps = run_placebos(nz_study, panel, filter_k=5.0, threads=1)
    bad = next(u for u in ps.units if u.unit == "Auckland")
    assert bad.pre_mspe > 5.0 * ps.treated.pre_mspe
    assert not bad.retained
    assert "Auckland" not in [u.unit for u in ps.retained]
    assert ps.treated.retained


def test_failed_placebo_is_recorded(nz_panel, nz_study):
    # x1 varies only through the treated unit, so every placebo pool has a
    # zero-variance predictor while the treated fit is fine
    rows = [(u, t, v, 5.0 if v == "x1" and u != "Canterbury" else x)
            for u, t, v, x in nz_panel.cells()]
    panel = Panel.from_cells(rows)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        ps = run_placebos(nz_study, panel, threads=1)
    msgs = [str(w.message) for w in caught if issubclass(w.category, PlaceboFailureWarning)]
    assert len(msgs) == 14 and any("placebo for Otago failed" in m for m in msgs)
    otago = next(u for u in ps.units if u.unit == "Otago")
    assert "ZeroVariancePredictor" in otago.error and not otago.retained
    assert len(ps.units) == 15 and ps.retained == [ps.treated]
    with pytest.raises(DonorPoolTooSmall):
        pseudo_p(ps)
