"""Dormand-Prince 5(4) stepping with a PI step-size controller.

Kept deliberately small: the caller drives the loop so it can repair the
state after every accepted step (which invalidates first-same-as-last reuse,
so ``k1`` is always supplied by the caller for the repaired state).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Butcher tableau, Dormand & Prince (1980)
C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
E = B5 - B4
ORDER = 5

SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 5.0
# PI exponents (Gustafsson); alpha acts on the current error, beta on the previous
ALPHA = 0.7 / ORDER
BETA = 0.4 / ORDER


class StepSizeUnderflow(RuntimeError):
    def __init__(self, message, t, y):
        super().__init__(message)
        self.t = t
        self.y = y


def error_norm(err, y_old, y_new, rel_tol, abs_tol) -> float:
    scale = abs_tol + rel_tol * np.maximum(np.abs(y_old), np.abs(y_new))
    ratio = np.abs(err) / scale
    return float(np.sqrt(np.mean(ratio ** 2)))


def dopri_step(f, t, y, h, k1):
    """One trial step. Returns ``(y5, err_vector)``; ``y5`` is propagated."""
    ks = [k1]
    for i in range(1, 7):
        yi = y
        for a, k in zip(A[i], ks):
            if a != 0.0:
                yi = yi + (h * a) * k
        if i == 6:
            y5 = yi
        ks.append(f(t + C[i] * h, yi))
    err = h * sum(e * k for e, k in zip(E, ks) if e != 0.0)
    return y5, err


def initial_step(f, t0, y0, f0, direction, rel_tol, abs_tol, max_step) -> float:
    """Starting step-size heuristic from Hairer, Norsett & Wanner, II.4."""
    scale = abs_tol + rel_tol * np.abs(y0)
    d0 = np.sqrt(np.mean((np.abs(y0) / scale) ** 2))
    d1 = np.sqrt(np.mean((np.abs(f0) / scale) ** 2))
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h0 = min(h0, max_step)
    y1 = y0 + direction * h0 * f0
    f1 = f(t0 + direction * h0, y1)
    d2 = np.sqrt(np.mean((np.abs(f1 - f0) / scale) ** 2)) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1.0 / ORDER)
    return min(100 * h0, h1, max_step)


@dataclass
class PIController:
    rel_tol: float
    abs_tol: float
    prev_err: float = 1e-4

    def factor(self, err: float, accepted: bool) -> float:
        if err == 0.0:
            return MAX_FACTOR
        if accepted:
            fac = SAFETY * err ** -ALPHA * self.prev_err ** BETA
            self.prev_err = max(err, 1e-4)
            return min(MAX_FACTOR, max(MIN_FACTOR, fac))
        return max(MIN_FACTOR, SAFETY * err ** (-1.0 / ORDER))
