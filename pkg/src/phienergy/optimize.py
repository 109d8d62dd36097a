"""
Energy-optimal CPU frequency.

With A = t_on*f_max, K = k*n and S the static power (plus the coprocessor
power when it is included), the energy is

    E(f) = (A/f + t_off) * (S + K f^3)

Setting dE/df = 0 and multiplying by f^2 / (3 K t_off) gives

    f^4 + (2A / (3 t_off)) f^3 - A S / (3 K t_off) = 0

which has exactly one positive root (one sign change). For t_off = 0 the
condition collapses to f = cbrt(S / 2K).
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.optimize import brentq

from .types import DEFAULT_PSTATES, FittedModel, PStateTable

T_OFF_ZERO = 1e-9
GRID_STEP = 1e-4
GRID_LO = 0.1


class Method(str, Enum):
    CLOSED_FORM = "closed_form"
    QUARTIC = "quartic"
    GRID_FALLBACK = "grid_fallback"


class OptimizationError(ValueError):
    pass


def static_power(m: FittedModel, include_mic: bool = False) -> float:
    return m.P_s + (m.p_mic_avg if include_mic else 0.0)


def energy_curve(m: FittedModel, f, include_mic: bool = False):
    """Modeled energy at frequency `f` (scalar or array).

    With `include_mic` the measured coprocessor power is folded into the
    static term, which makes this equal to ``predict_energy(m, f).e_total``.
    """
    f = np.asarray(f, dtype=float)
    if np.any(f <= 0):
        raise ValueError("frequency must be > 0")
    s = static_power(m, include_mic)
    e = (m.t_on * m.f_max / f + m.t_off) * (s + m.k * m.n_cores * f ** 3)
    return float(e) if e.ndim == 0 else e


def grid_minimize(m: FittedModel, lo: float = GRID_LO, hi: float | None = None,
                  step: float = GRID_STEP, include_mic: bool = False) -> float:
    """Brute-force minimizer of `energy_curve` on a uniform grid.

    Ties resolve toward the higher frequency, so a flat curve returns `hi`.
    """
    hi = m.f_max if hi is None else hi
    n = int(round((hi - lo) / step))
    grid = lo + step * np.arange(n + 1)
    e = energy_curve(m, grid, include_mic)
    best = e.min()
    tied = np.flatnonzero(e <= best + abs(best) * 1e-12)
    return float(grid[tied[-1]])


def optimal_frequency_closed(m: FittedModel, include_mic: bool = False) -> float:
    """cbrt(S / 2kn), valid only when t_off is zero. Not clamped."""
    s = static_power(m, include_mic)
    if m.t_off > T_OFF_ZERO:
        raise OptimizationError(f"t_off = {m.t_off} > 0: use optimal_frequency_quartic")
    if m.k <= 0 or s <= 0:
        raise OptimizationError("closed form needs k > 0 and static power > 0; "
                                "use optimal_frequency_quartic or grid_minimize")
    return (s / (2.0 * m.k * m.n_cores)) ** (1.0 / 3.0)


def quartic_coefficients(m: FittedModel, include_mic: bool = False) -> tuple:
    """Coefficients (1, b, 0, 0, e) of the stationarity quartic, highest power first."""
    a = m.t_on * m.f_max
    kn = m.k * m.n_cores
    b = 2.0 * a / (3.0 * m.t_off)
    e = -a * static_power(m, include_mic) / (3.0 * kn * m.t_off)
    return (1.0, b, 0.0, 0.0, e)


def optimal_frequency_quartic(m: FittedModel, include_mic: bool = False):
    """Positive root of the stationarity quartic by bracketed root finding.

    Returns ``(f, method)``. When the quartic has no sign change on the
    bracket (t_on or static power at 0) the grid minimizer is used and the
    method is ``GRID_FALLBACK``.
    """
    if not m.t_off > 0:
        raise OptimizationError("quartic path needs t_off > 0")
    if not m.k > 0:
        raise OptimizationError("quartic path needs k > 0")
    _, b, _, _, e = quartic_coefficients(m, include_mic)

    def q(f):
        return f ** 4 + b * f ** 3 + e

    if not e < 0:
        return grid_minimize(m, include_mic=include_mic), Method.GRID_FALLBACK
    hi = max(m.f_max, 1.0)
    for _ in range(200):
        if q(hi) > 0:
            break
        hi *= 2.0
    else:
        return grid_minimize(m, include_mic=include_mic), Method.GRID_FALLBACK
    root = brentq(q, 0.0, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=500)
    return float(root), Method.QUARTIC


@dataclass(frozen=True)
class OptimizationResult:
    f_continuous: float
    f_pstate: float
    e_at_pstate: float
    method: Method
    clamped: bool
    include_mic: bool = False

    def to_dict(self) -> dict:
        return {"f_continuous": self.f_continuous, "f_pstate": self.f_pstate,
                "e_at_pstate": self.e_at_pstate, "method": self.method.value,
                "clamped": self.clamped, "include_mic": self.include_mic}


def continuous_optimum(m: FittedModel, include_mic: bool = False):
    """Pick the analytic branch for the model; returns ``(f, method)``."""
    s = static_power(m, include_mic)
    if m.t_off <= T_OFF_ZERO and m.k > 0 and s > 0:
        return optimal_frequency_closed(m, include_mic), Method.CLOSED_FORM
    if m.t_off > 0 and m.k > 0:
        return optimal_frequency_quartic(m, include_mic)
    return grid_minimize(m, include_mic=include_mic), Method.GRID_FALLBACK


def optimal_pstate(m: FittedModel, table: PStateTable = DEFAULT_PSTATES,
                   include_mic: bool = False) -> OptimizationResult:
    """Quantize the continuous optimum to the cheaper adjacent table level.

    The optimum is clamped into the table range first. Equal energies
    resolve toward the higher frequency.
    """
    f_cont, method = continuous_optimum(m, include_mic)
    clamped = not (table.f_min <= f_cont <= table.f_max)
    f_clamped = min(max(f_cont, table.f_min), table.f_max)
    below, above = table.neighbors(f_clamped)
    candidates = sorted({below, above}, reverse=True)
    energies = [energy_curve(m, f, include_mic) for f in candidates]
    best = min(range(len(candidates)), key=lambda i: (energies[i], -candidates[i]))
    return OptimizationResult(f_cont, candidates[best], energies[best], method, clamped,
                              include_mic)


def energy_table(m: FittedModel, table: PStateTable = DEFAULT_PSTATES,
                 include_mic: bool = False) -> list:
    """Modeled energy at every table level, ascending frequency."""
    return [{"f": f, "energy_j": energy_curve(m, f, include_mic),
             "time_s": m.t_on * m.f_max / f + m.t_off}
            for f in sorted(table.levels)]
