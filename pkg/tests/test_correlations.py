import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dampedcasimir import analytic, correlations, fock
from dampedcasimir.analytic import C2Convention
from dampedcasimir.correlations import G2Series, fit_oscillation, g2_numeric, resolve_c2
from dampedcasimir.errors import Unresolvable
from dampedcasimir.params import SystemParams, derive

SMALL = derive(SystemParams.from_ratios(0.5, 10.0, 3.0))


def with_occupation(x, N):
    """Parameters at eps*omega0/K = x, K/gamma = 10 with thermal occupation N."""
    p = derive(SystemParams.from_ratios(x, 10.0, 1.0))
    hk = np.log1p(1.0 / N) * p.raw.K / p.Omega
    return derive(SystemParams.from_ratios(x, 10.0, hk))


@pytest.fixture(scope="module")
def small_series():
    return g2_numeric(SMALL)


# ---- g2(0) of known states


def test_g2_zero_of_reference_states():
    sp = fock.HilbertSpace(80)
    assert correlations.g2_zero_of_state(fock.coherent_state(sp, 1.5).projector()) == pytest.approx(1, abs=1e-10)
    assert correlations.g2_zero_of_state(fock.thermal_state(sp, 0.5)) == pytest.approx(2, abs=1e-10)
    sq = fock.squeezed_thermal_state(sp, 0.6, 0.0)
    # squeezed vacuum: 3 + 1/<n>
    n = np.sinh(0.3) ** 2
    assert correlations.g2_zero_of_state(sq) == pytest.approx(3 + 1 / n, rel=1e-10)


def test_g2_zero_frozen_values(fig_params, fig_params_t0):
    assert correlations.g2_zero(fig_params_t0) == pytest.approx(5.22638806267858, rel=1e-9)
    assert correlations.g2_zero(fig_params) == pytest.approx(3.1230922305171758, rel=1e-9)


# ---- convention adjudication


def test_resolve_c2_picks_divided(small_series):
    report = resolve_c2(SMALL, series=small_series)
    assert report.winner is C2Convention.DIVIDED_BY_ETA_TILDE_SQ
    errs = report.relative_errors()
    assert errs[C2Convention.DIVIDED_BY_ETA_TILDE_SQ] < 1e-6
    assert errs[C2Convention.TIMES_ETA_TILDE_SQ] > 0.5
    assert not report.warnings
    assert "winner: divided" in str(report)
    assert analytic.DEFAULT_C2_CONVENTION is report.winner


def test_resolve_c2_at_zero_temperature_is_indistinguishable(fig_params_t0):
    report = resolve_c2(fig_params_t0)
    assert report.indistinguishable and report.winner is None
    assert set(report.candidates.values()) == {0.0}


@pytest.mark.parametrize("N", [0.2, 0.8, 2.0])
def test_winner_stable_across_occupation(N):
    p = with_occupation(0.5, N)
    assert p.N_Omega == pytest.approx(N, rel=1e-12)
    assert resolve_c2(p).winner is C2Convention.DIVIDED_BY_ETA_TILDE_SQ


def test_doctored_series_is_unresolvable(small_series):
    p = SMALL
    env = np.exp(-2 * p.gamma_r * small_series.taus) * np.cos(2 * p.Omega * small_series.taus)
    fake = dataclasses.replace(small_series, values=small_series.values + 0.5 * env)
    with pytest.raises(Unresolvable):
        resolve_c2(p, series=fake)


def test_sine_component_warns(small_series):
    p = SMALL
    env = np.exp(-2 * p.gamma_r * small_series.taus) * np.sin(2 * p.Omega * small_series.taus)
    fake = dataclasses.replace(small_series, values=small_series.values + 0.01 * env)
    report = resolve_c2(p, series=fake)
    assert report.winner is C2Convention.DIVIDED_BY_ETA_TILDE_SQ
    assert any("sine" in w for w in report.warnings)


# ---- g2(tau) numerics vs closed form


def test_numeric_matches_closed_form(small_series):
    assert small_series.dim is not None and small_series.values[0] > 1
    assert np.max(np.abs(small_series.values - small_series.analytic())) < 1e-8
    assert small_series.n_ss == pytest.approx(SMALL.n_st, rel=1e-9)


def test_stationarity(small_series):
    shifted = g2_numeric(SMALL, t0=3.0 / SMALL.gamma_r)
    assert np.max(np.abs(shifted.values - small_series.values)) < 1e-8


def test_nonclassical_bounds(small_series):
    p = SMALL
    g = small_series.values
    env = np.exp(-2 * p.gamma_r * small_series.taus)
    assert g.min() > 1 - 1e-9
    assert np.all(np.abs(g - 1 - analytic.c1(p) * env) <= analytic.c2(p) * env + 1e-9)


def test_zero_temperature_monotone():
    p = derive(SystemParams.from_ratios(0.5, 10.0, 0.0))
    s = g2_numeric(p)
    assert np.all(np.diff(s.values) < 1e-10)
    assert np.all(np.diff(s.analytic()) < 0)


def test_decorrelation():
    # the last decade of a window 10/(2 gamma_r) long sits within 1e-3 of 1
    p = SMALL
    taus = np.linspace(0, 10 / (2 * p.gamma_r), 500)
    s = g2_numeric(p, taus=taus)
    tail = s.values[taus > 0.9 * taus[-1]]
    assert abs(tail.mean() - 1) < 1e-3


@settings(max_examples=40)
@given(x=st.floats(0.05, 0.95), hk=st.floats(0.1, 20.0), tau=st.floats(0, 50))
def test_closed_form_properties(x, hk, tau):
    p = derive(SystemParams.from_ratios(x, 10.0, hk))
    g = analytic.g2_analytic(tau, p)
    assert g >= 1 - 1e-12
    assert g <= analytic.g2_zero_analytic(p) + 1e-12
    assert analytic.g2_analytic(-tau, p) == g


# ---- oscillation fit


def test_fit_oscillation_recovers_synthetic_parameters():
    taus = np.linspace(0, 6, 600)
    values = 1 + np.exp(-0.7 * taus) * (1.3 + 0.8 * np.cos(5.0 * taus))
    fit = fit_oscillation(taus, values)
    assert fit.frequency == pytest.approx(5.0, rel=1e-8)
    assert fit.decay_rate == pytest.approx(0.7, rel=1e-8)
    assert fit.offset_amplitude == pytest.approx(1.3, rel=1e-8)
    assert fit.beat_amplitude == pytest.approx(0.8, rel=1e-8)
    assert fit.residual_rms < 1e-10


def test_fit_oscillation_on_numerics(small_series):
    fit = fit_oscillation(small_series.taus, small_series.values)
    assert fit.frequency == pytest.approx(2 * SMALL.Omega, rel=1e-6)
    assert fit.decay_rate == pytest.approx(2 * SMALL.gamma_r, rel=1e-6)


def test_series_is_a_dataclass(small_series):
    assert isinstance(small_series, G2Series)
    times = small_series.analytic(C2Convention.TIMES_ETA_TILDE_SQ)
    assert np.max(np.abs(times - small_series.values)) > 1e-2
