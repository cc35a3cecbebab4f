"""Physical parameters of the damped nonstationary cavity and everything derived from them.

Units: hbar = k_B = 1 and all frequencies are measured in one user-chosen
reference unit (the CLI uses gamma = 1, so times come out as gamma*t).
Temperature enters only through the dimensionless ratio hbar*K/(k_B*T);
a ratio of 0 (or infinity) is the zero-temperature sentinel.
"""

from __future__ import annotations

import cmath
import enum
import math
from dataclasses import dataclass, fields, replace
from typing import Mapping, Optional

from .errors import BoundedRegimeRequired, InvalidParams, NoSteadyState

# Relative width of the band around K = eps*omega0 that is treated as the critical point.
CRITICAL_RTOL = 1e-12

PARAM_KEYS = ("omega0", "epsilon", "K", "gamma", "kappa", "hbarK_over_kT")


class Regime(enum.Enum):
    UNBOUNDED = "unbounded"
    CRITICAL = "critical"
    BOUNDED = "bounded"


@dataclass(frozen=True)
class SystemParams:
    """Raw inputs of the effective cavity model.

    ``hbarK_over_kT`` is hbar*K/(k_B*T); 0 and ``inf`` both mean T = 0.
    ``gamma`` is the bare damping rate of the microscopic master equation and
    ``kappa`` the decay rate of the phenomenological ansatz.
    """

    omega0: float = 100.0
    epsilon: float = 0.085
    K: float = 10.0
    gamma: float = 1.0
    kappa: float = 1.0
    hbarK_over_kT: float = 3.0

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise InvalidParams(f"{f.name} must be a real number, got {value!r}")
            if math.isnan(value):
                raise InvalidParams(f"{f.name} is NaN")
            object.__setattr__(self, f.name, float(value))
        if not (self.omega0 > 0 and math.isfinite(self.omega0)):
            raise InvalidParams(f"omega0 must be positive and finite, got {self.omega0}")
        if not (self.epsilon > 0 and math.isfinite(self.epsilon)):
            raise InvalidParams(f"epsilon must be positive and finite, got {self.epsilon}")
        if not (self.K >= 0 and math.isfinite(self.K)):
            raise InvalidParams(f"K must be non-negative and finite, got {self.K}")
        if not (self.gamma >= 0 and math.isfinite(self.gamma)):
            raise InvalidParams(f"gamma must be non-negative and finite, got {self.gamma}")
        if not (self.kappa >= 0 and math.isfinite(self.kappa)):
            raise InvalidParams(f"kappa must be non-negative and finite, got {self.kappa}")
        if not self.hbarK_over_kT >= 0:
            raise InvalidParams(f"hbarK_over_kT must be >= 0, got {self.hbarK_over_kT}")

    @property
    def eps_omega0(self) -> float:
        return self.epsilon * self.omega0

    @property
    def zero_temperature(self) -> bool:
        return self.hbarK_over_kT == 0 or math.isinf(self.hbarK_over_kT)

    def with_(self, **changes) -> "SystemParams":
        return replace(self, **changes)

    @classmethod
    def from_ratios(
        cls,
        eps_omega0_over_K: float = 0.85,
        K_over_gamma: float = 10.0,
        hbarK_over_kT: float = 3.0,
        gamma: float = 1.0,
        omega0: float = 100.0,
        kappa: Optional[float] = None,
    ) -> "SystemParams":
        """Build parameters from the dimensionless ratios used in figure captions."""
        K = K_over_gamma * gamma
        return cls(
            omega0=omega0,
            epsilon=eps_omega0_over_K * K / omega0,
            K=K,
            gamma=gamma,
            kappa=gamma if kappa is None else kappa,
            hbarK_over_kT=hbarK_over_kT,
        )

    @classmethod
    def from_mapping(cls, values: Mapping[str, object], base: Optional["SystemParams"] = None):
        base = base or cls()
        changes = {}
        for key, value in values.items():
            name = normalize_key(key)
            if name not in PARAM_KEYS:
                continue
            try:
                changes[name] = float(value)  # type: ignore[arg-type]
            except (TypeError, ValueError):
                raise InvalidParams(f"cannot parse {key} = {value!r} as a number") from None
        return replace(base, **changes)


@dataclass(frozen=True)
class DerivedParams:
    """All quantities computed from a :class:`SystemParams`.

    Fields that only exist in the bounded regime are ``None`` elsewhere;
    use :meth:`require` to fetch them with a :class:`BoundedRegimeRequired`
    error instead of a silent ``None``.
    """

    raw: SystemParams
    regime: Regime
    ratio: float
    eta: complex
    eta_tilde: Optional[float] = None
    r: Optional[float] = None
    Omega: Optional[float] = None
    gamma_r: Optional[float] = None
    N_Omega: Optional[float] = None
    n_st0: Optional[float] = None
    n_st: Optional[float] = None
    n_st_ph: Optional[float] = None

    @property
    def bounded(self) -> bool:
        return self.regime is Regime.BOUNDED

    def require(self, name: str) -> float:
        value = getattr(self, name)
        if value is None:
            if name == "n_st_ph":
                raise NoSteadyState(
                    "phenomenological steady state needs (2 kappa/eps omega0)^2 - eta^2 > 0"
                )
            raise BoundedRegimeRequired(
                f"{name} is defined only for K/(eps*omega0) > 1 "
                f"(ratio = {self.ratio:.6g}, regime = {self.regime.value})"
            )
        return value

    def as_dict(self) -> dict:
        out = {f.name: getattr(self.raw, f.name) for f in fields(self.raw)}
        out.update(
            regime=self.regime.value,
            ratio=self.ratio,
            eta_real=self.eta.real,
            eta_imag=self.eta.imag,
        )
        for name in ("eta_tilde", "r", "Omega", "gamma_r", "N_Omega", "n_st0", "n_st", "n_st_ph"):
            out[name] = getattr(self, name)
        return out


def _regime_of(K: float, eps_omega0: float) -> Regime:
    if abs(K - eps_omega0) <= CRITICAL_RTOL * eps_omega0:
        return Regime.CRITICAL
    return Regime.BOUNDED if K > eps_omega0 else Regime.UNBOUNDED


def thermal_occupation(energy_over_kT: float) -> float:
    """Bose-Einstein occupancy 1/(exp(x) - 1); x = inf gives 0."""
    if math.isinf(energy_over_kT):
        return 0.0
    if energy_over_kT <= 0:
        raise InvalidParams("thermal occupation needs a positive energy/temperature ratio")
    return 1.0 / math.expm1(energy_over_kT)


def phenomenological_denominator(raw: SystemParams) -> float:
    """(2 kappa/eps omega0)^2 - eta^2, positive iff a stationary photon number exists."""
    ew = raw.eps_omega0
    return (2.0 * raw.kappa / ew) ** 2 - (1.0 - (raw.K / ew) ** 2)


def derive(raw: SystemParams) -> DerivedParams:
    ew = raw.eps_omega0
    ratio = raw.K / ew
    regime = _regime_of(raw.K, ew)
    eta = cmath.sqrt(1.0 - ratio * ratio)
    if regime is Regime.CRITICAL:
        eta = 0j

    den = phenomenological_denominator(raw)
    n_st_ph = 0.5 / den if den > 0 else None

    if regime is not Regime.BOUNDED:
        return DerivedParams(raw=raw, regime=regime, ratio=ratio, eta=eta, n_st_ph=n_st_ph)

    eta_tilde = math.sqrt(ratio * ratio - 1.0)
    # r = 1/2 ln[(K + eps w0)/(K - eps w0)] = artanh(eps w0 / K)
    r = math.atanh(ew / raw.K)
    Omega = eta_tilde * ew / 2.0
    gamma_r = math.exp(-r) * raw.gamma
    if raw.zero_temperature:
        N = 0.0
    else:
        N = thermal_occupation(Omega / raw.K * raw.hbarK_over_kT)
    n_st0 = math.sinh(r / 2.0) ** 2
    n_st = n_st0 * (1.0 + 2.0 * N) + N
    return DerivedParams(
        raw=raw,
        regime=regime,
        ratio=ratio,
        eta=eta,
        eta_tilde=eta_tilde,
        r=r,
        Omega=Omega,
        gamma_r=gamma_r,
        N_Omega=N,
        n_st0=n_st0,
        n_st=n_st,
        n_st_ph=n_st_ph,
    )


@dataclass(frozen=True)
class RegimeReport:
    regime: Regime
    ratio: float
    resonant: bool
    phenomenological_steady_state: bool

    def __str__(self):
        extra = ", resonant" if self.resonant else ""
        ss = "yes" if self.phenomenological_steady_state else "no"
        return (
            f"{self.regime.value} (K/eps omega0 = {self.ratio:.6g}{extra}); "
            f"phenomenological steady state: {ss}"
        )


def classify_regime(raw: SystemParams) -> RegimeReport:
    ew = raw.eps_omega0
    regime = _regime_of(raw.K, ew)
    # 2 kappa > eta eps w0; for imaginary eta (bounded regime) this holds for any kappa > 0
    steady = raw.kappa > 0 and phenomenological_denominator(raw) > 0
    return RegimeReport(
        regime=regime,
        ratio=raw.K / ew,
        resonant=raw.K == 0,
        phenomenological_steady_state=steady,
    )


def hbarK_over_kT_for_occupation(N: float, K: float, Omega: float) -> float:
    """Temperature ratio hbar K/(k_B T) that produces reservoir occupancy N at frequency Omega."""
    if N < 0:
        raise InvalidParams("occupation must be non-negative")
    if N == 0:
        return 0.0
    return K / Omega * math.log1p(1.0 / N)


def normalize_key(key: str) -> str:
    key = key.strip().replace("-", "_")
    lowered = key.lower()
    if lowered == "k":
        return "K"
    if lowered == "hbark_over_kt":
        return "hbarK_over_kT"
    return key


def parse_config_text(text: str) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment. Keys are normalized."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InvalidParams(f"config line {lineno}: expected 'key = value', got {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise InvalidParams(f"config line {lineno}: empty key")
        out[normalize_key(key)] = value
    return out
