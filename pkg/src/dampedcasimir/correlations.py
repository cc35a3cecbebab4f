"""Intensity correlation g2(tau) from the quantum regression formula.

For tau >= 0, <a+(0) a+(tau) a(tau) a(0)> = Tr[n e^{L tau}(a rho_ss a+)]: the
conditioned operator a rho_ss a+ is evolved under the same Liouvillian as a
state. It is not renormalized; its trace is <n>_ss.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import curve_fit

from . import analytic, fock
from .analytic import C2Convention
from .dynamics import IntegratorOptions, evolve, liouvillian_microscopic, steady_dim, steady_state
from .errors import Unresolvable
from .fock import DensityMatrix, HilbertSpace
from .params import DerivedParams, SystemParams, derive

MATCH_RTOL = 1e-4
UNRESOLVABLE_RTOL = 1e-2
SINE_WARN_RATIO = 1e-3


def _derived(p) -> DerivedParams:
    return derive(p) if isinstance(p, SystemParams) else p


@dataclass
class G2Series:
    taus: np.ndarray
    values: np.ndarray
    params: DerivedParams
    convention: C2Convention = analytic.DEFAULT_C2_CONVENTION
    dim: Optional[int] = None
    n_ss: Optional[float] = None
    diagnostics: dict = field(default_factory=dict)
    stats: dict = field(default_factory=dict)

    def analytic(self, convention: Optional[C2Convention] = None) -> np.ndarray:
        return analytic.g2_analytic(self.taus, self.params, convention or self.convention)


def g2_zero_of_state(rho: DensityMatrix) -> float:
    """<a+^2 a^2>/<a+ a>^2 of any state."""
    space = rho.space
    a = fock.annihilation(space)
    n = fock.expectation(rho, fock.number(space)).real
    pairs = fock.expectation(rho, a.dag() @ a.dag() @ a @ a).real
    return pairs / n**2


def _space_for(p: DerivedParams, space: Optional[HilbertSpace]) -> HilbertSpace:
    return space if space is not None else HilbertSpace(steady_dim(p))


def g2_zero(p, space: Optional[HilbertSpace] = None) -> float:
    """g2(0) evaluated directly on the numerical steady state of the microscopic model."""
    p = _derived(p)
    space = _space_for(p, space)
    return g2_zero_of_state(steady_state(liouvillian_microscopic(p, space)))


def g2_numeric(p, space: Optional[HilbertSpace] = None, taus=None,
               opts: IntegratorOptions = IntegratorOptions(),
               rho_ss: Optional[DensityMatrix] = None, t0: float = 0.0,
               convention: C2Convention = analytic.DEFAULT_C2_CONVENTION) -> G2Series:
    """g2(tau) of the microscopic steady state on the delay grid ``taus``.

    Default grid: 400 points over gamma*tau in [0, 3]. A positive ``t0``
    first evolves the steady state for that long (stationarity check).
    """
    p = _derived(p)
    space = _space_for(p, space)
    if taus is None:
        taus = np.linspace(0.0, 3.0, 400) / p.raw.gamma
    taus = np.asarray(taus, dtype=float)
    L = liouvillian_microscopic(p, space)
    rho = steady_state(L) if rho_ss is None else rho_ss
    matrix = rho.matrix
    if t0 > 0:
        run = evolve(L, rho, [0.0, t0], opts=IntegratorOptions(
            rtol=opts.rtol, atol=opts.atol, retain_states=True, backend=opts.backend))
        matrix = run.states[-1]
    num = fock.number(space)
    n_ss = float(np.einsum("ij,ji->", matrix, num.matrix).real)
    a = fock.annihilation(space).matrix
    sigma = a @ matrix @ a.conj().T
    traj = evolve(L, sigma, taus, {"n": num}, opts)
    values = traj.observables["n"].real / n_ss**2
    return G2Series(taus, values, p, convention, space.dim, n_ss, traj.diagnostics, traj.stats)


@dataclass
class ConventionReport:
    """Outcome of adjudicating the beat amplitude C2 against the numerics."""

    winner: Optional[C2Convention]
    candidates: dict
    fitted_cos: float
    fitted_sin: float
    indistinguishable: bool = False
    warnings: list = field(default_factory=list)

    def relative_errors(self) -> dict:
        return {
            conv: (abs(self.fitted_cos - value) / abs(value) if value else math.inf)
            for conv, value in self.candidates.items()
        }

    def __str__(self):
        if self.indistinguishable:
            return "C2 conventions indistinguishable (N_Omega = 0 gives C2 = 0 for both)"
        lines = [f"fitted C2 = {self.fitted_cos:.12g} (sine component {self.fitted_sin:.3g})"]
        for conv, err in self.relative_errors().items():
            lines.append(f"  {conv.value:8s} C2 = {self.candidates[conv]:.12g}  rel. dev. {err:.3g}")
        lines.append(f"winner: {self.winner.value if self.winner else 'none'}")
        lines.extend(f"warning: {w}" for w in self.warnings)
        return "\n".join(lines)


def fit_beat_amplitudes(series: G2Series):
    """Least-squares (cos, sin) amplitudes of the residual g2 - 1 - C1 e^{-2 gamma_r tau}."""
    p = series.params
    gr, Om = p.require("gamma_r"), p.require("Omega")
    env = np.exp(-2.0 * gr * series.taus)
    residual = series.values - 1.0 - analytic.c1(p) * env
    basis = np.column_stack([env * np.cos(2 * Om * series.taus), env * np.sin(2 * Om * series.taus)])
    (cos_amp, sin_amp), *_ = np.linalg.lstsq(basis, residual, rcond=None)
    return float(cos_amp), float(sin_amp)


def resolve_c2(p, space: Optional[HilbertSpace] = None, series: Optional[G2Series] = None,
               taus=None) -> ConventionReport:
    """Decide which placement of eta_tilde^2 in C2 the regression numerics support.

    Raises :class:`Unresolvable` when neither candidate is within 1e-2 relative.
    """
    p = _derived(p)
    candidates = {conv: analytic.c2(p, conv) for conv in C2Convention}
    if p.require("N_Omega") == 0:
        return ConventionReport(None, candidates, 0.0, 0.0, indistinguishable=True)
    if series is None:
        series = g2_numeric(p, space, taus)
    cos_amp, sin_amp = fit_beat_amplitudes(series)
    report = ConventionReport(None, candidates, cos_amp, sin_amp)
    if abs(sin_amp) > SINE_WARN_RATIO * abs(cos_amp):
        report.warnings.append(
            f"sine component {sin_amp:.3g} exceeds {SINE_WARN_RATIO:g} of cosine {cos_amp:.3g}"
        )
    errors = report.relative_errors()
    best = min(errors, key=errors.get)
    if errors[best] > UNRESOLVABLE_RTOL:
        raise Unresolvable(f"no C2 convention matches the numerics:\n{report}")
    if errors[best] > MATCH_RTOL:
        report.warnings.append(f"best match {best.value} deviates by {errors[best]:.3g}")
    else:
        report.winner = best
    return report


@dataclass(frozen=True)
class OscillationFit:
    frequency: float
    decay_rate: float
    offset_amplitude: float
    beat_amplitude: float
    residual_rms: float


def _model(tau, rate, omega, c1_, c2_):
    return 1.0 + np.exp(-rate * tau) * (c1_ + c2_ * np.cos(omega * tau))


def fit_oscillation(taus, values) -> OscillationFit:
    """Nonlinear fit of 1 + e^{-rate tau}[A + B cos(omega tau)], guessed from the data alone."""
    taus = np.asarray(taus, dtype=float)
    values = np.asarray(values, dtype=float)
    excess = np.clip(values - 1.0, 1e-300, None)
    rate0 = max(np.polyfit(taus, np.log(excess), 1)[0] * -1.0, 1e-6)
    detrended = excess * np.exp(rate0 * taus)
    detrended = detrended - detrended.mean()
    step = taus[1] - taus[0]
    pad = 16 * taus.size
    spectrum = np.abs(np.fft.rfft(detrended, n=pad))
    freqs = 2.0 * np.pi * np.fft.rfftfreq(pad, d=step)
    omega0 = freqs[1 + np.argmax(spectrum[1:])]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        popt, _ = curve_fit(_model, taus, values, p0=[rate0, omega0, excess[0], 0.1 * excess[0]],
                            maxfev=20000, xtol=1e-14, ftol=1e-14)
    rms = float(np.sqrt(np.mean((_model(taus, *popt) - values) ** 2)))
    rate, omega, a_, b_ = popt
    return OscillationFit(abs(float(omega)), float(rate), float(a_), float(b_), rms)
