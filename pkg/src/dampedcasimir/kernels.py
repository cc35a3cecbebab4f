"""Backend selection for the banded Lindblad right-hand side.

The compiled ``_banded`` extension is used when it imports; otherwise the
numpy implementation in ``_banded_py`` takes over. Setting the environment
variable ``CASIMIR_PURE_PYTHON=1`` forces the fallback.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from . import _banded_py

try:
    if os.environ.get("CASIMIR_PURE_PYTHON", "") not in ("", "0"):
        raise ImportError("compiled kernels disabled by CASIMIR_PURE_PYTHON")
    from . import _banded as _compiled
except ImportError:
    _compiled = None

BACKENDS = {"python": _banded_py.lindblad_rhs}
if _compiled is not None:
    BACKENDS["compiled"] = _compiled.lindblad_rhs

BACKEND = "compiled" if _compiled is not None else "python"


def to_bands(matrix: np.ndarray, atol: float = 0.0):
    """Split a square matrix into (offsets, data) with data[k, i] = M[i, i + offsets[k]]."""
    matrix = np.asarray(matrix, dtype=complex)
    n = matrix.shape[0]
    offsets, rows = [], []
    for o in range(-(n - 1), n):
        diag = np.diagonal(matrix, offset=o)
        if np.any(np.abs(diag) > atol):
            row = np.zeros(n, dtype=complex)
            if o >= 0:
                row[: n - o] = diag
            else:
                row[-o:] = diag
            offsets.append(o)
            rows.append(row)
    if not offsets:
        offsets, rows = [0], [np.zeros(n, dtype=complex)]
    return np.array(offsets, dtype=np.intp), np.ascontiguousarray(rows, dtype=complex)


@dataclass(frozen=True)
class BandedGenerator:
    """Lindblad generator packed for the kernels.

    Represents rho -> -i(G rho - rho G^+) + sum_m 2 rate_m J_m rho J_m^+ with
    G = H - i sum_m rate_m J_m^+ J_m.
    """

    dim: int
    g_offsets: np.ndarray
    g_data: np.ndarray
    j_offsets: np.ndarray
    j_data: np.ndarray
    rates: np.ndarray

    @classmethod
    def from_dense(cls, hamiltonian, jumps) -> "BandedGenerator":
        """``jumps`` is a sequence of (rate, matrix) pairs."""
        H = np.asarray(hamiltonian, dtype=complex)
        n = H.shape[0]
        G = H.copy()
        for rate, J in jumps:
            J = np.asarray(J, dtype=complex)
            G -= 1j * rate * (J.conj().T @ J)
        g_off, g_dat = to_bands(G)
        packed = [to_bands(J) for _, J in jumps]
        width = max((len(o) for o, _ in packed), default=1)
        j_off = np.zeros((len(packed), width), dtype=np.intp)
        j_dat = np.zeros((len(packed), width, n), dtype=complex)
        for m, (o, d) in enumerate(packed):
            j_off[m, : len(o)] = o
            j_dat[m, : len(o)] = d
        rates = np.array([float(rate) for rate, _ in jumps], dtype=float)
        return cls(n, g_off, g_dat, j_off, j_dat, rates)

    def rhs_function(self, backend: str | None = None, hermitian: bool = False):
        """Return f(rho) -> drho/dt writing into a reused buffer; callers must copy.

        ``hermitian=True`` promises Hermitian inputs and returns exactly
        Hermitian outputs.
        """
        kernel = BACKENDS[backend or BACKEND]
        n = self.dim
        out = np.empty((n, n), dtype=complex)
        work = np.empty((n, n), dtype=complex)
        args = (self.g_offsets, self.g_data, self.j_offsets, self.j_data, self.rates)

        def f(rho):
            kernel(np.ascontiguousarray(rho), out, work, *args, hermitian)
            return out

        return f

    def apply(self, rho, backend: str | None = None, hermitian: bool = False) -> np.ndarray:
        return self.rhs_function(backend, hermitian)(np.asarray(rho, dtype=complex)).copy()
