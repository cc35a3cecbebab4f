"""Closed-form photon numbers, moments and the intensity correlation g2(tau).

All evaluators accept scalars or numpy arrays for the time argument.
"""

from __future__ import annotations

import enum
import math

import numpy as np

from .errors import NoSteadyState
from .params import DerivedParams, Regime, phenomenological_denominator


class C2Convention(enum.Enum):
    """Placement of eta_tilde^2 in the beat amplitude C2 of g2(tau)."""

    TIMES_ETA_TILDE_SQ = "times"
    DIVIDED_BY_ETA_TILDE_SQ = "divided"


# Fixed by correlations.resolve_c2 against the quantum-regression computation;
# tests/test_correlations.py re-runs that oracle and checks this value.
DEFAULT_C2_CONVENTION = C2Convention.DIVIDED_BY_ETA_TILDE_SQ


def _sinc(x):
    """sin(x)/x with the removable singularity filled in."""
    return np.sinc(np.asarray(x, dtype=float) / np.pi)


def n_lossless(t, p: DerivedParams):
    """Photon number generated from vacuum by the undamped effective Hamiltonian."""
    t = np.asarray(t, dtype=float)
    y = p.raw.eps_omega0 * t / 2.0
    if p.regime is Regime.BOUNDED:
        return (y * _sinc(p.eta_tilde * y)) ** 2
    if p.regime is Regime.CRITICAL:
        return y**2
    eta = p.eta.real
    return np.sinh(eta * y) ** 2 / eta**2


def n_phenomenological(t, p: DerivedParams, allow_growth: bool = False):
    """Photon number of the phenomenological ansatz, starting from vacuum.

    In the bounded regime eta is imaginary and the hyperbolic terms are
    continued term by term. With ``allow_growth`` the formula is also
    evaluated when no steady state exists (it then grows without bound).
    """
    raw = p.raw
    den = phenomenological_denominator(raw)
    if den == 0 or (den < 0 and not allow_growth):
        raise NoSteadyState(
            f"(2 kappa/eps omega0)^2 - eta^2 = {den:.6g}; no stationary photon number"
        )
    n_ph = 0.5 / den
    ew = raw.eps_omega0
    t = np.asarray(t, dtype=float)
    x = ew * t
    if p.regime is Regime.BOUNDED:
        et = p.eta_tilde
        half = -np.sin(et * x / 2.0) ** 2
        full = x * _sinc(et * x)
    elif p.regime is Regime.CRITICAL:
        half = np.zeros_like(x)
        full = x
    else:
        eta = p.eta.real
        half = np.sinh(eta * x / 2.0) ** 2
        full = np.sinh(eta * x) / eta
    decay = np.exp(-2.0 * raw.kappa * t)
    # n_ph (1 - e^{-2 kappa t}) - 2 n_ph e^{-2 kappa t} [half + kappa/(eps w0) full]
    return n_ph * (-np.expm1(-2.0 * raw.kappa * t)) - 2.0 * n_ph * decay * (
        half + raw.kappa / ew * full
    )


def n_microscopic(t, p: DerivedParams):
    """Damped photon number of the microscopic master equation, starting from vacuum."""
    gr = p.require("gamma_r")
    et = p.require("eta_tilde")
    n_st = p.require("n_st")
    t = np.asarray(t, dtype=float)
    y = p.raw.eps_omega0 * t / 2.0
    return np.exp(-2.0 * gr * t) * (y * _sinc(et * y)) ** 2 + (-np.expm1(-2.0 * gr * t)) * n_st


def eigenenergy(n, p: DerivedParams):
    """E_n with 2E_n = eps omega0 eta_tilde (n + 1/2) - K/2."""
    et = p.require("eta_tilde")
    n = np.asarray(n, dtype=float)
    return (p.raw.eps_omega0 * et * (n + 0.5) - p.raw.K / 2.0) / 2.0


def vacuum_b_moments(r: float):
    """(<b+b>, <b^2>) in the Fock vacuum, from b = u a + v a+.

    <0|b+ b|0> = |v|^2 and <0|b^2|0> = u v <0|a a+|0> = u v.
    """
    u, v = math.cosh(r / 2.0), math.sinh(r / 2.0)
    return v * v, complex(u * v)


def b_moment_solution(t, p: DerivedParams, init=None):
    """Solve the closed moment equations for <b+b> and <b^2>.

    ``init`` is ``(bb0, b2_0)``; the default is the Fock vacuum.
    """
    gr = p.require("gamma_r")
    Omega = p.require("Omega")
    N = p.require("N_Omega")
    bb0, b2_0 = vacuum_b_moments(p.require("r")) if init is None else init
    t = np.asarray(t, dtype=float)
    bb = N + (bb0 - N) * np.exp(-2.0 * gr * t)
    b2 = b2_0 * np.exp(-(2j * Omega + 2.0 * gr) * t)
    return bb, b2


def n_from_b_moments(bb, b2, r: float):
    """<n> = cosh r <b+b> - (sinh r / 2)(<b+^2> + <b^2>) + sinh^2(r/2)."""
    b2 = np.asarray(b2, dtype=complex)
    pair = (b2 + np.conj(b2)).real  # <b+^2> + <b^2>
    return math.cosh(r) * np.asarray(bb) - 0.5 * math.sinh(r) * pair + math.sinh(r / 2) ** 2


def c1(p: DerivedParams) -> float:
    n0 = p.require("n_st0")
    n = p.require("n_st")
    N = p.require("N_Omega")
    q = 1.0 + 2.0 * n0
    return (q * (n - N * (n + n0 + 2.0)) + q * q * (2.0 * N * N + N)) / n**2


def c2(p: DerivedParams, convention: C2Convention = DEFAULT_C2_CONVENTION) -> float:
    N = p.require("N_Omega")
    n = p.require("n_st")
    et2 = p.require("eta_tilde") ** 2
    base = N * (N + 1.0) / n**2
    if convention is C2Convention.TIMES_ETA_TILDE_SQ:
        return base * et2
    return base / et2


def g2_analytic(tau, p: DerivedParams, convention: C2Convention = DEFAULT_C2_CONVENTION):
    """g2(tau) = 1 + exp(-2 gamma_r |tau|) [C1 + C2 cos(2 Omega tau)]."""
    tau = np.abs(np.asarray(tau, dtype=float))
    gr = p.require("gamma_r")
    Omega = p.require("Omega")
    return 1.0 + np.exp(-2.0 * gr * tau) * (c1(p) + c2(p, convention) * np.cos(2.0 * Omega * tau))


def g2_zero_analytic(p: DerivedParams, convention: C2Convention = DEFAULT_C2_CONVENTION) -> float:
    return float(1.0 + c1(p) + c2(p, convention))
