"""Dense linear algebra on a truncated single-mode Fock space.

Truncation convention: checks that are sensitive to the top of the space
use only the lowest half of the levels (the *guarded subspace*); the upper
half is a buffer that absorbs the error of the truncated ladder operators.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg

from .errors import DimensionMismatch, TruncationTooSmall
from .params import DerivedParams, SystemParams

HERMITIAN_ATOL = 1e-12
STATE_NORM_ATOL = 1e-10
DENSITY_ATOL = 1e-10
THERMAL_TAIL_ATOL = 1e-12
MAX_AUTO_DIM = 512


@dataclass(frozen=True)
class HilbertSpace:
    dim: int

    def __post_init__(self):
        if int(self.dim) != self.dim or self.dim < 2:
            raise ValueError(f"Fock space dimension must be an integer >= 2, got {self.dim}")
        object.__setattr__(self, "dim", int(self.dim))

    @property
    def guard(self) -> int:
        """Number of levels in the guarded subspace."""
        return self.dim // 2


def _frozen(array, dtype=complex) -> np.ndarray:
    out = np.array(array, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


def _same_space(a, b):
    if a.space != b.space:
        raise DimensionMismatch(f"dimension {a.space.dim} vs {b.space.dim}")


class Operator:
    """A dim x dim complex matrix acting on a truncated Fock space."""

    __slots__ = ("space", "matrix", "hermitian")

    def __init__(self, space: HilbertSpace, matrix, hermitian: bool = False):
        matrix = _frozen(matrix)
        if matrix.shape != (space.dim, space.dim):
            raise DimensionMismatch(f"matrix shape {matrix.shape} does not fit dim={space.dim}")
        if hermitian and np.max(np.abs(matrix - matrix.conj().T), initial=0.0) > HERMITIAN_ATOL:
            raise ValueError("operator flagged Hermitian is not Hermitian")
        self.space = space
        self.matrix = matrix
        self.hermitian = hermitian

    def __repr__(self):
        return f"Operator(dim={self.space.dim}, hermitian={self.hermitian})"

    def dag(self) -> "Operator":
        return Operator(self.space, self.matrix.conj().T, hermitian=self.hermitian)

    def __matmul__(self, other):
        if isinstance(other, Operator):
            _same_space(self, other)
            return Operator(self.space, self.matrix @ other.matrix)
        if isinstance(other, StateVector):
            _same_space(self, other)
            return self.matrix @ other.amplitudes
        return NotImplemented

    def __add__(self, other):
        if isinstance(other, Operator):
            _same_space(self, other)
            return Operator(self.space, self.matrix + other.matrix,
                            hermitian=self.hermitian and other.hermitian)
        if np.isscalar(other):
            return Operator(self.space, self.matrix + other * np.eye(self.space.dim),
                            hermitian=self.hermitian and np.isreal(other))
        return NotImplemented

    __radd__ = __add__

    def __sub__(self, other):
        return self + (-1) * other

    def __rsub__(self, other):
        return (-1) * self + other

    def __mul__(self, scalar):
        if not np.isscalar(scalar):
            return NotImplemented
        return Operator(self.space, scalar * self.matrix,
                        hermitian=self.hermitian and np.isreal(scalar))

    __rmul__ = __mul__

    def __neg__(self):
        return (-1) * self

    def commutator(self, other: "Operator") -> "Operator":
        return self @ other - other @ self

    def guarded(self, size: Optional[int] = None) -> np.ndarray:
        """Upper-left block restricted to the guarded subspace."""
        g = self.space.guard if size is None else size
        return self.matrix[:g, :g]


class StateVector:
    __slots__ = ("space", "amplitudes")

    def __init__(self, space: HilbertSpace, amplitudes):
        amplitudes = _frozen(amplitudes)
        if amplitudes.shape != (space.dim,):
            raise DimensionMismatch(f"vector length {amplitudes.shape} does not fit dim={space.dim}")
        norm = np.linalg.norm(amplitudes)
        if abs(norm - 1.0) > STATE_NORM_ATOL:
            raise ValueError(f"state vector norm {norm!r} differs from 1")
        self.space = space
        self.amplitudes = amplitudes

    def __repr__(self):
        return f"StateVector(dim={self.space.dim})"

    def inner(self, other: "StateVector") -> complex:
        _same_space(self, other)
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def projector(self) -> "DensityMatrix":
        return DensityMatrix(self.space, np.outer(self.amplitudes, self.amplitudes.conj()))


class DensityMatrix:
    """Hermitian, unit-trace, positive semidefinite state on a truncated space.

    Validation happens on construction; ``validate=False`` is for callers that
    already know the invariants hold (it still freezes the data).
    """

    __slots__ = ("space", "matrix")

    def __init__(self, space: HilbertSpace, matrix, validate: bool = True):
        matrix = _frozen(matrix)
        if matrix.shape != (space.dim, space.dim):
            raise DimensionMismatch(f"matrix shape {matrix.shape} does not fit dim={space.dim}")
        self.space = space
        self.matrix = matrix
        if validate:
            problems = self.violations()
            if problems:
                raise ValueError("invalid density matrix: " + "; ".join(problems))

    def __repr__(self):
        return f"DensityMatrix(dim={self.space.dim})"

    def hermiticity_defect(self) -> float:
        return float(np.max(np.abs(self.matrix - self.matrix.conj().T)))

    def trace(self) -> float:
        return float(np.trace(self.matrix).real)

    def min_eigenvalue(self) -> float:
        herm = 0.5 * (self.matrix + self.matrix.conj().T)
        return float(np.linalg.eigvalsh(herm)[0])

    def purity(self) -> float:
        return float(np.einsum("ij,ji->", self.matrix, self.matrix).real)

    def violations(self, atol: float = DENSITY_ATOL) -> list:
        out = []
        if self.hermiticity_defect() > atol:
            out.append(f"hermiticity defect {self.hermiticity_defect():.3g}")
        if abs(self.trace() - 1.0) > atol:
            out.append(f"trace {self.trace()!r}")
        if self.min_eigenvalue() < -atol:
            out.append(f"min eigenvalue {self.min_eigenvalue():.3g}")
        return out


# --------------------------------------------------------------------------
# ladder operators


def annihilation(space: HilbertSpace) -> Operator:
    return Operator(space, np.diag(np.sqrt(np.arange(1, space.dim, dtype=float)), 1))


def creation(space: HilbertSpace) -> Operator:
    return annihilation(space).dag()


def number(space: HilbertSpace) -> Operator:
    return Operator(space, np.diag(np.arange(space.dim, dtype=float)), hermitian=True)


def identity(space: HilbertSpace) -> Operator:
    return Operator(space, np.eye(space.dim), hermitian=True)


def fock_state(space: HilbertSpace, n: int) -> StateVector:
    if not 0 <= n < space.dim:
        raise TruncationTooSmall(f"|{n}> does not fit in dim={space.dim}")
    amps = np.zeros(space.dim, dtype=complex)
    amps[n] = 1.0
    return StateVector(space, amps)


def coherent_state(space: HilbertSpace, alpha: complex) -> StateVector:
    """Truncated coherent state; raises if more than 1e-12 of the norm is lost."""
    n = np.arange(space.dim)
    log_fact = np.array([math.lgamma(k + 1) for k in n])
    with np.errstate(divide="ignore"):
        log_mag = n * np.log(abs(alpha)) if alpha != 0 else np.where(n == 0, 0.0, -np.inf)
    amps = np.exp(log_mag - 0.5 * log_fact - 0.5 * abs(alpha) ** 2)
    amps = amps * np.exp(1j * np.angle(alpha) * n)
    norm = np.linalg.norm(amps)
    if 1.0 - norm**2 > 1e-12:
        raise TruncationTooSmall(f"coherent state |{alpha}> loses {1 - norm**2:.2g} of its norm")
    return StateVector(space, amps / norm)


# --------------------------------------------------------------------------
# squeezing


def squeeze_generator(space: HilbertSpace, r: float) -> np.ndarray:
    """Anti-Hermitian matrix r(a^2 - a+^2)/4 on the truncated space."""
    a = annihilation(space).matrix
    a2 = a @ a
    return r * (a2 - a2.conj().T) / 4.0


def squeeze(space: HilbertSpace, r: float) -> Operator:
    """S(r) = exp[r(a^2 - a+^2)/4], via scaling-and-squaring of the truncated generator.

    The truncated generator is exactly anti-Hermitian, so the result is
    unitary to rounding at any dim; how far it agrees with the untruncated
    S(r) is measured by :func:`trusted_levels`.
    """
    if not math.isfinite(r):
        raise ValueError("squeezing parameter must be finite")
    return Operator(space, scipy.linalg.expm(squeeze_generator(space, r)))


def squeeze_disentangled(space: HilbertSpace, r: float) -> Operator:
    """Normal-ordered product form exp(z a+^2/2) exp(beta/2 (n+1/2)) exp(-z a^2/2).

    Only accurate on the low corner of the space; used to cross-check :func:`squeeze`.
    """
    z = -math.tanh(r / 2.0)
    beta = math.log1p(-z * z)
    a = annihilation(space).matrix
    a2 = a @ a
    n = np.arange(space.dim)
    left = scipy.linalg.expm(0.5 * z * a2.conj().T)
    middle = np.diag(np.exp(0.5 * beta * (n + 0.5)))
    right = scipy.linalg.expm(-0.5 * z * a2)
    return Operator(space, left @ middle @ right)


def squeezed_number_state(space: HilbertSpace, r: float, n: int) -> StateVector:
    """|r, n> = S(r)|n>, the eigenstates of the effective Hamiltonian."""
    if not 0 <= n < space.guard:
        raise TruncationTooSmall(f"n={n} lies outside the guarded subspace of dim={space.dim}")
    column = squeeze(space, r).matrix[:, n]
    norm = np.linalg.norm(column)
    if abs(norm - 1.0) > 1e-9:
        raise TruncationTooSmall(f"|r={r}, n={n}> loses {1 - norm:.2g} of its norm")
    return StateVector(space, column / norm)


def bogoliubov_pair(space: HilbertSpace, r: float):
    """Pseudo-ladder operators (b, b+) with b = cosh(r/2) a + sinh(r/2) a+."""
    if not math.isfinite(r):
        raise ValueError("squeezing parameter must be finite")
    a = annihilation(space)
    b = math.cosh(r / 2.0) * a + math.sinh(r / 2.0) * a.dag()
    return b, b.dag()


def squeezed_thermal_state(space: HilbertSpace, r: float, N: float) -> DensityMatrix:
    """(1+N)^-1 sum_n (N/(1+N))^n |r,n><r,n|, the asymptotic state of the microscopic model."""
    if N < 0:
        raise ValueError("thermal occupation must be non-negative")
    q = N / (1.0 + N)
    if N > 0 and q ** space.guard >= THERMAL_TAIL_ATOL:
        raise TruncationTooSmall(
            f"thermal weight beyond level {space.guard} is {q ** space.guard:.2g}; increase dim"
        )
    S = squeeze(space, r).matrix if r != 0 else np.eye(space.dim)
    weights = q ** np.arange(space.dim) / (1.0 + N)
    rho = (S * weights) @ S.conj().T
    rho = 0.5 * (rho + rho.conj().T)
    return DensityMatrix(space, rho / np.trace(rho).real)


def thermal_state(space: HilbertSpace, N: float) -> DensityMatrix:
    return squeezed_thermal_state(space, 0.0, N)


# --------------------------------------------------------------------------
# expectation values and diagnostics


def expectation(rho, op: Operator) -> complex:
    """Tr(rho O); ``rho`` may be a DensityMatrix or any operator-like with ``.matrix``."""
    _same_space(rho, op)
    return complex(np.einsum("ij,ji->", rho.matrix, op.matrix))


def tail_mass(rho, k: int) -> float:
    """Population sum_{j >= k} <j|rho|j>."""
    if not 0 <= k < rho.space.dim:
        raise IndexError(f"level {k} outside dim={rho.space.dim}")
    return float(np.real(np.diagonal(rho.matrix)[k:]).sum())


def _psd_sqrt(matrix: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(0.5 * (matrix + matrix.conj().T))
    return (v * np.sqrt(np.clip(w, 0.0, None))) @ v.conj().T


def fidelity(rho: DensityMatrix, sigma: DensityMatrix) -> float:
    """Uhlmann fidelity (Tr|sqrt(rho) sqrt(sigma)|)^2.

    The nuclear norm of sqrt(rho)sqrt(sigma) is used instead of the
    sqrt(sqrt(rho) sigma sqrt(rho)) form: singular values carry absolute
    rounding errors, square roots of tiny eigenvalues do not.
    """
    _same_space(rho, sigma)
    product = _psd_sqrt(rho.matrix) @ _psd_sqrt(sigma.matrix)
    return float(np.linalg.svd(product, compute_uv=False).sum() ** 2)


def squeezed_thermal_populations(r: float, N: float, dim: int) -> np.ndarray:
    """Fock populations of the squeezed thermal state computed on ``dim`` levels."""
    space = HilbertSpace(dim)
    S = squeeze(space, r).matrix
    q = N / (1.0 + N)
    weights = q ** np.arange(dim) / (1.0 + N)
    return (np.abs(S) ** 2) @ weights


@functools.lru_cache(maxsize=256)
def auto_dim(r: float, N: float, tol: float = 1e-10, cap: int = MAX_AUTO_DIM,
             step: int = 8, minimum: int = 16) -> int:
    """Smallest dim (multiple of ``step``) whose squeezed thermal state has
    tail_mass at 3/4 dim below ``tol``.

    Populations are computed on a reference space at least twice the candidate
    size, doubling the reference until that holds.
    """
    ref = 64
    while True:
        pops = squeezed_thermal_populations(r, N, ref)
        tails = np.cumsum(pops[::-1])[::-1]
        for dim in range(max(minimum, step), ref // 2 + 1, step):
            marker = (3 * dim) // 4
            if tails[marker] < tol:
                return dim
        if ref // 2 >= cap:
            raise TruncationTooSmall(
                f"squeezed thermal state (r={r:.4g}, N={N:.4g}) needs dim > {cap}"
            )
        ref *= 2


# --------------------------------------------------------------------------
# Hamiltonians and their algebraic structure


def effective_hamiltonian(space: HilbertSpace, raw: SystemParams) -> Operator:
    """H_eff = (eps omega0/4)(a+^2 + a^2) + (K/2) n."""
    a = annihilation(space).matrix
    a2 = a @ a
    H = raw.eps_omega0 / 4.0 * (a2 + a2.conj().T) + raw.K / 2.0 * np.diag(np.arange(space.dim))
    return Operator(space, H, hermitian=True)


def pseudo_hamiltonian(space: HilbertSpace, p: DerivedParams) -> Operator:
    """H_S = Omega (b+ b + 1/2) - K/4 built from the Bogoliubov pair."""
    Omega = p.require("Omega")
    b, bd = bogoliubov_pair(space, p.require("r"))
    H = Omega * (bd @ b).matrix + (Omega / 2.0 - p.raw.K / 4.0) * np.eye(space.dim)
    H = 0.5 * (H + H.conj().T)
    return Operator(space, H, hermitian=True)


def eigenenergies_numeric(space: HilbertSpace, raw: SystemParams, count: Optional[int] = None):
    """Lowest eigenvalues of the truncated H_eff (default: the lowest dim/4)."""
    count = space.dim // 4 if count is None else count
    return scipy.linalg.eigvalsh(effective_hamiltonian(space, raw).matrix,
                                 subset_by_index=[0, count - 1])


def trusted_levels(space: HilbertSpace, r: float, tol: float = 1e-20) -> int:
    """Number of low levels n whose image S(r)|n> keeps weight < ``tol`` above 3/4 dim.

    Conjugation identities such as b = S a S+ are only meaningful on these
    levels; the count shrinks roughly like dim * exp(-r).
    """
    S = squeeze(space, r).matrix
    top = (3 * space.dim) // 4
    leak = (np.abs(S[top:, : space.guard]) ** 2).sum(axis=0)
    bad = np.nonzero(leak >= tol)[0]
    return int(bad[0]) if bad.size else space.guard


@dataclass(frozen=True)
class StructureResiduals:
    """Largest entrywise residuals of the algebraic identities.

    Direct identities are measured on the guarded subspace; identities that
    conjugate by S(r) use the first ``conjugation_levels`` levels only.
    """

    dim: int
    conjugation_levels: int
    eigen_levels: int
    unitarity: float
    bogoliubov_vs_conjugation: float
    pseudo_vs_effective: float
    diagonalization: float
    commutator_b: float
    commutator_bdag: float
    canonical_commutator: float
    eigenvalue_rel: float

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def structure_residuals(space: HilbertSpace, p: DerivedParams,
                        eigen_levels: Optional[int] = None) -> StructureResiduals:
    """Evaluate every algebraic identity of the pseudo-oscillator picture.

    ``pseudo_vs_effective`` compares H_S (built from b) with H_eff, which it
    equals identically; ``diagonalization`` compares S+ H_eff S with the
    diagonal Omega(n + 1/2) - K/4. ``eigen_levels`` defaults to dim/4.
    """
    g = space.guard
    r = p.require("r")
    Omega = p.require("Omega")
    S = squeeze(space, r)
    a = annihilation(space)
    b, bd = bogoliubov_pair(space, r)
    H_eff = effective_hamiltonian(space, p.raw)
    H_S = pseudo_hamiltonian(space, p)

    q = trusted_levels(space, r)
    if q == 0:
        raise TruncationTooSmall(f"dim={space.dim} has no level that S(r={r:.4g}) keeps inside")
    unitarity = np.max(np.abs((S.dag() @ S).guarded() - np.eye(g)))
    bog = np.max(np.abs(b.guarded(q) - (S @ a @ S.dag()).guarded(q)))
    pseudo = np.max(np.abs(H_S.guarded() - H_eff.guarded()))
    diag_target = np.diag(Omega * (np.arange(q) + 0.5) - p.raw.K / 4.0)
    diagonal = np.max(np.abs((S.dag() @ H_eff @ S).guarded(q) - diag_target))
    comm_b = np.max(np.abs((H_S.commutator(b) + Omega * b).guarded()))
    comm_bd = np.max(np.abs((H_S.commutator(bd) - Omega * bd).guarded()))
    canon = np.max(np.abs(b.commutator(bd).guarded() - np.eye(g)))
    m = space.dim // 4 if eigen_levels is None else int(eigen_levels)
    numeric = eigenenergies_numeric(space, p.raw, m)
    exact = Omega * (np.arange(m) + 0.5) - p.raw.K / 4.0
    eig_rel = np.max(np.abs(numeric - exact) / np.abs(exact))
    return StructureResiduals(
        dim=space.dim,
        conjugation_levels=q,
        eigen_levels=m,
        unitarity=float(unitarity),
        bogoliubov_vs_conjugation=float(bog),
        pseudo_vs_effective=float(pseudo),
        diagonalization=float(diagonal),
        commutator_b=float(comm_b),
        commutator_bdag=float(comm_bd),
        canonical_commutator=float(canon),
        eigenvalue_rel=float(eig_rel),
    )
