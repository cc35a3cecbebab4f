"""Liouvillians of both master equations, time evolution and steady states.

A :class:`Superoperator` keeps its generator in Lindblad form (Hamiltonian
plus rated jump operators). Time evolution runs on the banded kernels in
:mod:`dampedcasimir.kernels`; the column-stacked sparse matrix is built on
demand for steady states and spectral checks.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from functools import cached_property
from typing import Mapping, Optional, Sequence, Union

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import analytic, fock, kernels
from .errors import (
    DegenerateKernel,
    DimensionMismatch,
    ObservableNotRegistered,
    TruncationLeak,
    TruncationTooSmall,
)
from .fock import DensityMatrix, HilbertSpace, Operator
from .ode import dopri5
from .params import DerivedParams, SystemParams, derive

LEAK_THRESHOLD = 1e-8
HERMITIAN_RTOL = 1e-12
KERNEL_GAP_ATOL = 1e-8


def _derived(p) -> DerivedParams:
    return derive(p) if isinstance(p, SystemParams) else p


class Superoperator:
    """Linear generator rho -> -i[H, rho] + sum_m rate_m L[J_m] rho.

    ``L[x] rho = 2 x rho x+ - x+ x rho - rho x+ x``. Real scalar multiples and
    sums stay in Lindblad form.
    """

    def __init__(self, space: HilbertSpace, hamiltonian: Optional[np.ndarray] = None,
                 jumps: Sequence = ()):
        self.space = space
        n = space.dim
        H = np.zeros((n, n), dtype=complex) if hamiltonian is None else np.array(hamiltonian, dtype=complex)
        if H.shape != (n, n):
            raise DimensionMismatch(f"Hamiltonian shape {H.shape} does not fit dim={n}")
        self.hamiltonian = H
        self.jumps = []
        for rate, J in jumps:
            J = np.array(J, dtype=complex)
            if J.shape != (n, n):
                raise DimensionMismatch(f"jump operator shape {J.shape} does not fit dim={n}")
            self.jumps.append((float(rate), J))

    def __repr__(self):
        return f"Superoperator(dim={self.space.dim}, jumps={len(self.jumps)})"

    def __add__(self, other):
        if not isinstance(other, Superoperator):
            return NotImplemented
        if other.space != self.space:
            raise DimensionMismatch("superoperators act on different spaces")
        return Superoperator(self.space, self.hamiltonian + other.hamiltonian,
                             self.jumps + other.jumps)

    def __mul__(self, scalar):
        if not np.isreal(scalar):
            return NotImplemented
        scalar = float(np.real(scalar))
        return Superoperator(self.space, scalar * self.hamiltonian,
                             [(scalar * rate, J) for rate, J in self.jumps])

    __rmul__ = __mul__

    @cached_property
    def banded(self) -> kernels.BandedGenerator:
        return kernels.BandedGenerator.from_dense(
            self.hamiltonian, [(rate, J) for rate, J in self.jumps if rate != 0]
        )

    @cached_property
    def matrix(self) -> sp.csr_matrix:
        """dim^2 x dim^2 sparse matrix acting on column-stacked density matrices."""
        n = self.space.dim
        eye = sp.identity(n, dtype=complex, format="csr")
        H = sp.csr_matrix(self.hamiltonian)
        # vec(A X B) = (B^T kron A) vec(X)
        L = -1j * (sp.kron(eye, H) - sp.kron(H.T, eye))
        for rate, J in self.jumps:
            if rate == 0:
                continue
            Js = sp.csr_matrix(J)
            JdJ = (Js.conj().T @ Js).tocsr()
            L = L + rate * (2.0 * sp.kron(Js.conj(), Js) - sp.kron(eye, JdJ) - sp.kron(JdJ.T, eye))
        return sp.csr_matrix(L)

    def apply(self, rho, backend: Optional[str] = None) -> np.ndarray:
        rho = rho.matrix if hasattr(rho, "matrix") else rho
        return self.banded.apply(rho, backend)

    def trace_defect(self) -> float:
        """max |vec(1)^T L|: zero for a trace-preserving generator."""
        n = self.space.dim
        vec_id = np.eye(n).ravel(order="F")
        return float(np.max(np.abs(self.matrix.T @ vec_id)))


def hamiltonian_part(H: Operator) -> Superoperator:
    return Superoperator(H.space, H.matrix)


def lindblad_dissipator(x: Operator) -> Superoperator:
    """L[x] rho = 2 x rho x+ - x+ x rho - rho x+ x."""
    return Superoperator(x.space, None, [(1.0, x.matrix)])


def liouvillian_microscopic(p, space: HilbertSpace) -> Superoperator:
    """-i[H_S, .] + gamma_r (N+1) L[b] + gamma_r N L[b+]."""
    p = _derived(p)
    gr = p.require("gamma_r")
    N = p.require("N_Omega")
    b, bd = fock.bogoliubov_pair(space, p.require("r"))
    L = hamiltonian_part(fock.pseudo_hamiltonian(space, p))
    if gr * (N + 1.0) > 0:
        L = L + gr * (N + 1.0) * lindblad_dissipator(b)
    if gr * N > 0:
        L = L + gr * N * lindblad_dissipator(bd)
    return L


def liouvillian_phenomenological(p, space: HilbertSpace) -> Superoperator:
    """-i[H_eff, .] + kappa L[a]."""
    p = _derived(p)
    L = hamiltonian_part(fock.effective_hamiltonian(space, p.raw))
    if p.raw.kappa > 0:
        L = L + p.raw.kappa * lindblad_dissipator(fock.annihilation(space))
    return L


# --------------------------------------------------------------------------
# time evolution


@dataclass(frozen=True)
class IntegratorOptions:
    rtol: float = 1e-9
    atol: float = 1e-12
    max_step: float = math.inf
    max_steps: int = 2_000_000
    retain_states: bool = False
    diagnostics: bool = False
    leak_threshold: Optional[float] = LEAK_THRESHOLD
    backend: Optional[str] = None
    # None: use the Hermitian kernel mode when the initial matrix is Hermitian
    hermitian: Optional[bool] = None


@dataclass
class ObservableSeries:
    name: str
    times: np.ndarray
    values: np.ndarray

    @property
    def real(self) -> np.ndarray:
        return self.values.real


@dataclass
class Trajectory:
    """Output of :func:`evolve`.

    ``diagnostics`` (when requested) holds per-output-time ``trace``,
    ``hermiticity_defect`` and ``min_eigenvalue``; for inputs without unit
    trace the last two are divided by the initial trace.
    """

    space: HilbertSpace
    times: np.ndarray
    observables: dict
    operators: dict
    states: Optional[list] = None
    diagnostics: dict = field(default_factory=dict)
    tail_mass: Optional[np.ndarray] = None
    stats: dict = field(default_factory=dict)

    def series(self, name: str) -> ObservableSeries:
        return observable_series(self, name)


def leak_marker(space: HilbertSpace) -> int:
    return (3 * space.dim) // 4


def evolve(L: Superoperator, rho0, times, observables: Optional[Mapping[str, Operator]] = None,
           opts: IntegratorOptions = IntegratorOptions()) -> Trajectory:
    """Integrate d rho/dt = L rho and sample at ``times``.

    ``rho0`` may be a :class:`DensityMatrix` or a raw matrix (for example the
    conditioned operator a rho a+ of the regression formula). Hermitian
    inputs are propagated in the kernels' Hermitian mode, which keeps every
    stage exactly Hermitian. Raises
    :class:`TruncationLeak` when the population at and above 3/4 dim exceeds
    ``opts.leak_threshold`` times the initial trace.
    """
    space = L.space
    matrix = rho0.matrix if hasattr(rho0, "matrix") else np.asarray(rho0, dtype=complex)
    if matrix.shape != (space.dim, space.dim):
        raise DimensionMismatch(f"initial state shape {matrix.shape} vs dim={space.dim}")
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size == 0 or times[0] < 0 or np.any(np.diff(times) < 0):
        raise ValueError("times must be a non-empty, non-decreasing grid starting at t >= 0")
    observables = dict(observables or {})
    for name, op in observables.items():
        if op.space != space:
            raise DimensionMismatch(f"observable {name!r} lives on dim={op.space.dim}")
    transposed = {name: np.ascontiguousarray(op.matrix.T) for name, op in observables.items()}
    values = {name: np.empty(times.size, dtype=complex) for name in observables}
    trace0 = complex(np.trace(matrix))
    norm0 = abs(trace0) if abs(trace0) > 0 else 1.0
    marker = leak_marker(space)
    tails = np.empty(times.size)
    states = [] if opts.retain_states else None
    diag = {key: np.empty(times.size) for key in ("trace", "hermiticity_defect", "min_eigenvalue")} \
        if opts.diagnostics else {}

    def record(index, t, y):
        for name, opT in transposed.items():
            values[name][index] = np.sum(y * opT)
        tails[index] = np.real(np.diagonal(y)[marker:]).sum() / norm0
        if opts.leak_threshold is not None and tails[index] > opts.leak_threshold:
            raise TruncationLeak(
                f"population {tails[index]:.3g} above level {marker} of dim={space.dim} at t={t:.6g}"
            )
        if states is not None:
            states.append(y.copy())
        if diag:
            diag["trace"][index] = np.trace(y).real
            diag["hermiticity_defect"][index] = np.max(np.abs(y - y.conj().T)) / norm0
            diag["min_eigenvalue"][index] = np.linalg.eigvalsh(0.5 * (y + y.conj().T))[0] / norm0

    hermitian = opts.hermitian
    if hermitian is None:
        scale = max(float(np.max(np.abs(matrix))), 1e-300)
        hermitian = float(np.max(np.abs(matrix - matrix.conj().T))) <= HERMITIAN_RTOL * scale
    if hermitian:
        matrix = 0.5 * (matrix + matrix.conj().T)
    f = L.banded.rhs_function(opts.backend, hermitian)
    start = time.perf_counter()
    stats = dopri5(f, matrix, times, rtol=opts.rtol, atol=opts.atol, max_step=opts.max_step,
                   max_steps=opts.max_steps, callback=record)
    return Trajectory(
        space=space,
        times=times,
        observables=values,
        operators=observables,
        states=states,
        diagnostics=diag,
        tail_mass=tails,
        stats=dict(steps=stats.steps, rejected=stats.rejected, nfev=stats.nfev,
                   backend=opts.backend or kernels.BACKEND, dim=space.dim, hermitian=hermitian,
                   wall_time=time.perf_counter() - start),
    )


def observable_series(traj: Trajectory, O: Union[str, Operator]) -> ObservableSeries:
    """Tr(rho(t) O) along a trajectory.

    ``O`` may be the name it was registered under, a registered operator, or
    any operator when states were retained.
    """
    if isinstance(O, str):
        if O not in traj.observables:
            raise ObservableNotRegistered(O)
        return ObservableSeries(O, traj.times, traj.observables[O])
    for name, op in traj.operators.items():
        if op is O or np.array_equal(op.matrix, O.matrix):
            return ObservableSeries(name, traj.times, traj.observables[name])
    if traj.states is None:
        raise ObservableNotRegistered("operator was not registered and states were not retained")
    if O.space != traj.space:
        raise DimensionMismatch("observable and trajectory live on different spaces")
    OT = O.matrix.T
    return ObservableSeries("custom", traj.times, np.array([np.sum(s * OT) for s in traj.states]))


# --------------------------------------------------------------------------
# steady states


def kernel_spectrum(L: Superoperator, k: int = 2):
    """The ``k`` eigenvalues of L closest to zero, with eigenvectors.

    Uses one sparse LU of (L - sigma) with a small positive shift sigma;
    a dissipative generator has no eigenvalue with positive real part.
    """
    M = L.matrix.tocsc()
    scale = max(1.0, float(abs(M).sum(axis=1).max()))
    sigma = 1e-9 * scale
    shifted = (M - sigma * sp.identity(M.shape[0], dtype=complex, format="csc")).tocsc()
    lu = spla.splu(shifted)
    op_inv = spla.LinearOperator(M.shape, matvec=lu.solve, dtype=complex)
    vals, vecs = spla.eigs(M, k=k, sigma=sigma, OPinv=op_inv, which="LM", tol=1e-14)
    order = np.argsort(np.abs(vals))
    return vals[order], vecs[:, order], lu


def steady_state(L: Superoperator, method: str = "kernel", check_kernel: bool = True,
                 psd_atol: float = 1e-8, t_final: Optional[float] = None) -> DensityMatrix:
    """Trace-one Hermitian element of the kernel of L.

    ``method="kernel"`` takes the null vector from a shift-inverted sparse
    eigensolve and polishes it by inverse iteration; ``method="evolve"``
    integrates from the vacuum for ``t_final`` as an independent check.
    Negative eigenvalues above ``-psd_atol`` are clamped to zero.
    """
    n = L.space.dim
    if method == "evolve":
        if t_final is None:
            raise ValueError("method='evolve' needs t_final")
        rho0 = np.zeros((n, n), dtype=complex)
        rho0[0, 0] = 1.0
        traj = evolve(L, rho0, [0.0, t_final], opts=IntegratorOptions(retain_states=True,
                                                                       leak_threshold=None))
        rho = traj.states[-1]
    elif method == "kernel":
        vals, vecs, lu = kernel_spectrum(L, k=2)
        if check_kernel and abs(vals[1]) < KERNEL_GAP_ATOL:
            raise DegenerateKernel(
                f"two eigenvalues of L within {KERNEL_GAP_ATOL:g} of zero: {vals[0]:.3g}, {vals[1]:.3g}"
            )
        x = vecs[:, 0]
        for _ in range(2):
            x = lu.solve(x)
            x /= np.linalg.norm(x)
        rho = x.reshape(n, n, order="F")
    else:
        raise ValueError(f"unknown steady-state method {method!r}")
    rho = 0.5 * (rho + rho.conj().T)
    rho /= np.trace(rho).real
    w, v = np.linalg.eigh(rho)
    if w[0] < -psd_atol:
        raise ValueError(f"steady state has eigenvalue {w[0]:.3g} below -{psd_atol:g}")
    if w[0] < 0:
        rho = (v * np.clip(w, 0.0, None)) @ v.conj().T
        rho = 0.5 * (rho + rho.conj().T)
        rho /= np.trace(rho).real
    return DensityMatrix(L.space, rho)


# --------------------------------------------------------------------------
# drivers


MODELS = ("microscopic", "phenomenological")


def build_liouvillian(model: str, p, space: HilbertSpace) -> Superoperator:
    if model == "microscopic":
        return liouvillian_microscopic(p, space)
    if model == "phenomenological":
        return liouvillian_phenomenological(p, space)
    raise ValueError(f"unknown model {model!r}; expected one of {MODELS}")


def steady_dim(p) -> int:
    """Truncation for the microscopic steady state (squeezed thermal tail rule)."""
    p = _derived(p)
    return fock.auto_dim(p.require("r"), p.require("N_Omega"))


def vacuum_run_dim(model: str, p, times) -> int:
    """Truncation for an evolution from vacuum over ``times``.

    Besides the steady state, the transient may carry more photons; a zero-mean
    Gaussian state with photon number n has no heavier Fock tail than the
    squeezed vacuum with the same n, which bounds the transient.
    """
    p = _derived(p)
    times = np.asarray(times, dtype=float)
    if model == "microscopic":
        peak = float(np.max(analytic.n_microscopic(times, p)))
        dims = [steady_dim(p)]
    else:
        peak = float(np.max(analytic.n_phenomenological(times, p, allow_growth=True)))
        dims = []
    r_eff = 2.0 * math.asinh(math.sqrt(max(peak, 0.0)))
    dims.append(fock.auto_dim(r_eff, 0.0))
    return max(dims)


def vacuum(space: HilbertSpace) -> DensityMatrix:
    return fock.fock_state(space, 0).projector()


@dataclass
class PhotonRun:
    params: DerivedParams
    model: str
    trajectory: Trajectory
    retries: int = 0

    @property
    def dim(self) -> int:
        return self.trajectory.space.dim

    @property
    def times(self) -> np.ndarray:
        return self.trajectory.times

    @property
    def photon_number(self) -> np.ndarray:
        return self.trajectory.observables["n"].real


def simulate_photon_number(p, times, model: str = "microscopic", dim: Optional[int] = None,
                           opts: IntegratorOptions = IntegratorOptions(),
                           extra_observables: Optional[Mapping[str, str]] = None,
                           max_dim: int = fock.MAX_AUTO_DIM) -> PhotonRun:
    """Evolve the vacuum and record <n> (plus <b+b>, <b^2> for the microscopic model).

    With an automatic ``dim`` a :class:`TruncationLeak` triggers a retry at
    doubled dimension, up to ``max_dim``.
    """
    p = _derived(p)
    auto = dim is None
    dim = vacuum_run_dim(model, p, times) if auto else dim
    retries = 0
    while True:
        space = HilbertSpace(dim)
        L = build_liouvillian(model, p, space)
        obs = {"n": fock.number(space)}
        if model == "microscopic":
            b, bd = fock.bogoliubov_pair(space, p.require("r"))
            obs["bb"] = bd @ b
            obs["b2"] = b @ b
        try:
            traj = evolve(L, vacuum(space), times, obs, opts)
            return PhotonRun(p, model, traj, retries)
        except TruncationLeak:
            if not auto or 2 * dim > max_dim:
                raise
            dim *= 2
            retries += 1
