"""Pure numpy implementation of the banded Lindblad right-hand side.

Same storage convention and call signature as the compiled ``_banded``
extension; selected automatically when the extension is unavailable.
"""

import numpy as np


def _left(offsets, data, x, out, scale):
    n = x.shape[0]
    for o, d in zip(offsets, data):
        if o >= 0:
            out[: n - o] += (scale * d[: n - o])[:, None] * x[o:]
        else:
            out[-o:] += (scale * d[-o:])[:, None] * x[: n + o]


def _right_dag(offsets, data, x, out, scale):
    n = x.shape[0]
    for o, d in zip(offsets, data):
        if o >= 0:
            out[:, : n - o] += x[:, o:] * (scale * d[: n - o].conj())[None, :]
        else:
            out[:, -o:] += x[:, : n + o] * (scale * d[-o:].conj())[None, :]


def lindblad_rhs(rho, out, work, g_offsets, g_data, j_offsets, j_data, rates, hermitian=False):
    """out = -i(G rho - rho G^+) + sum_m 2 rates[m] J_m rho J_m^+ .

    With ``hermitian`` the lower triangle is replaced by the mirror of the upper one.
    """
    out[...] = 0
    _left(g_offsets, g_data, rho, out, -1j)
    _right_dag(g_offsets, g_data, rho, out, 1j)
    for offs, data, rate in zip(j_offsets, j_data, rates):
        if rate == 0:
            continue
        work[...] = 0
        _left(offs, data, rho, work, 1.0)
        _right_dag(offs, data, work, out, 2.0 * rate)
    if hermitian:
        lower = np.tril_indices(out.shape[0], -1)
        out[lower] = out.T[lower].conj()
        out.imag[np.diag_indices(out.shape[0])] = 0.0
    return out
