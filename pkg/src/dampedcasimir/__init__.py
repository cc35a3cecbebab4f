"""Damped dynamical Casimir cavity: closed forms and truncated-Fock Lindblad numerics."""

__version__ = "0.1.0"

from .analytic import (  # noqa: E402
    C2Convention,
    DEFAULT_C2_CONVENTION,
    g2_analytic,
    n_lossless,
    n_microscopic,
    n_phenomenological,
)
from .correlations import g2_numeric, g2_zero, resolve_c2  # noqa: E402
from .dynamics import (  # noqa: E402
    IntegratorOptions,
    Superoperator,
    evolve,
    liouvillian_microscopic,
    liouvillian_phenomenological,
    simulate_photon_number,
    steady_state,
)
from .fock import DensityMatrix, HilbertSpace, squeezed_thermal_state  # noqa: E402
from .kernels import BACKEND  # noqa: E402
from .params import DerivedParams, Regime, SystemParams, derive  # noqa: E402

__all__ = [
    "BACKEND",
    "C2Convention",
    "DEFAULT_C2_CONVENTION",
    "DensityMatrix",
    "DerivedParams",
    "HilbertSpace",
    "IntegratorOptions",
    "Regime",
    "Superoperator",
    "SystemParams",
    "derive",
    "evolve",
    "g2_analytic",
    "g2_numeric",
    "g2_zero",
    "liouvillian_microscopic",
    "liouvillian_phenomenological",
    "n_lossless",
    "n_microscopic",
    "n_phenomenological",
    "resolve_c2",
    "simulate_photon_number",
    "squeezed_thermal_state",
    "steady_state",
]
