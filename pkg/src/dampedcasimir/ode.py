"""Adaptive Dormand-Prince 5(4) integrator for autonomous complex-valued systems.

The state may be an array of any shape; the right-hand side is ``f(y)``.
Output times are hit exactly by clipping the step, so no dense-output
interpolation is involved.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from scipy.linalg.blas import zaxpy

from .errors import ToleranceNotMet


def _axpy(x, y, a):
    """y += a x in place (1-d complex arrays)."""
    zaxpy(x, y, a=a)

# Butcher tableau (Dormand & Prince 1980); the last row of A is the 5th-order solution.
_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
# 5th-order weights minus embedded 4th-order weights
_E = (71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40)

SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 10.0


@dataclass
class StepStats:
    steps: int = 0
    rejected: int = 0
    nfev: int = 0


class _Workspace:
    """Preallocated buffers so a step allocates nothing of state size."""

    def __init__(self, y):
        self.shape = y.shape
        self.acc = np.empty(y.size, dtype=complex)
        self.err = np.empty(y.size, dtype=complex)
        self.mag = np.empty(y.size)
        self.mag2 = np.empty(y.size)

    def error_norm(self, y, y_new, rtol, atol) -> float:
        # RMS of |err| / (atol + rtol max(|y|, |y_new|))
        np.abs(y, out=self.mag)
        np.abs(y_new, out=self.mag2)
        np.maximum(self.mag, self.mag2, out=self.mag)
        self.mag *= rtol
        self.mag += atol
        np.abs(self.err, out=self.mag2)
        self.mag2 /= self.mag
        return float(np.sqrt(np.dot(self.mag2, self.mag2) / self.mag2.size))


def _initial_step(f, y, f0, rtol, atol) -> float:
    # Hairer, Norsett & Wanner, Solving ODEs I, II.4
    scale = atol + rtol * np.abs(y)
    d0 = np.sqrt(np.mean(np.abs(y / scale) ** 2))
    d1 = np.sqrt(np.mean(np.abs(f0 / scale) ** 2))
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    f1 = f(y + h0 * f0).copy()
    d2 = np.sqrt(np.mean(np.abs((f1 - f0) / scale) ** 2)) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1 / 5)
    return min(100 * h0, h1)


def dopri5(f, y0, t_out, rtol=1e-9, atol=1e-12, max_step=math.inf, first_step=None,
           max_steps=1_000_000, callback=None) -> StepStats:
    """Integrate dy/dt = f(y) from ``t_out[0]`` through every time in ``t_out``.

    ``callback(index, t, y)`` is called at each output time (including the
    first) with a view of the current state; it must copy what it keeps.
    ``f`` may return a reused buffer. Raises :class:`ToleranceNotMet` when the
    step size underflows or ``max_steps`` is exhausted.
    """
    t_out = np.asarray(t_out, dtype=float)
    if t_out.ndim != 1 or t_out.size == 0:
        raise ValueError("t_out must be a non-empty 1-d array")
    if np.any(np.diff(t_out) < 0):
        raise ValueError("output times must be non-decreasing")
    stats = StepStats()
    y = np.array(y0, dtype=complex, copy=True)
    t = float(t_out[0])
    if callback is not None:
        callback(0, t, y)
    if t_out.size == 1:
        return stats

    ws = _Workspace(y)
    shape = y.shape
    y = y.reshape(-1)
    k = [np.empty_like(y) for _ in range(7)]
    k[0][:] = f(y.reshape(shape)).reshape(-1)
    stats.nfev += 1
    h = first_step if first_step is not None else _initial_step(f, y.reshape(shape), k[0].reshape(shape),
                                                                 rtol, atol)
    stats.nfev += 1
    h = min(h, max_step)
    span = float(t_out[-1] - t_out[0])
    acc, err = ws.acc, ws.err

    for index in range(1, t_out.size):
        target = float(t_out[index])
        while t < target:
            if stats.steps + stats.rejected >= max_steps:
                raise ToleranceNotMet(f"exceeded {max_steps} steps at t={t}")
            if h < 1e-14 * max(1.0, abs(t), span):
                raise ToleranceNotMet(f"step size underflow (h={h:.3g}) at t={t}")
            remaining = target - t
            clipped = h >= remaining
            step = remaining if clipped else h
            for s in range(1, 7):
                acc[:] = y
                for coef, ks in zip(_A[s], k):
                    if coef:
                        _axpy(ks, acc, step * coef)
                k[s][:] = f(acc.reshape(shape)).reshape(-1)
            stats.nfev += 6
            # acc now holds the 5th-order solution, which is also the last stage input (FSAL)
            err.fill(0)
            for e, ks in zip(_E, k):
                if e:
                    _axpy(ks, err, step * e)
            norm = ws.error_norm(y, acc, rtol, atol)
            if norm <= 1.0:
                t = target if clipped else t + step
                y, ws.acc = acc, y
                acc = ws.acc
                k[0], k[6] = k[6], k[0]
                stats.steps += 1
                factor = MAX_FACTOR if norm == 0 else min(MAX_FACTOR, SAFETY * norm ** -0.2)
                # a step shortened only to land on an output time does not shrink h
                h = min(max_step, max(h, step * factor) if clipped else step * factor)
            else:
                stats.rejected += 1
                h = step * max(MIN_FACTOR, SAFETY * norm ** -0.2)
        if callback is not None:
            callback(index, t, y.reshape(shape))
    return stats
